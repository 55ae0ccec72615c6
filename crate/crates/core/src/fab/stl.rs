//! Triangle meshes and binary STL output.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

const HEADER: &[u8] = b"binary STL; units: millimeters";

pub type Point = [f64; 3];

/// Triangle soup with outward (counter-clockwise) winding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    triangles: Vec<[Point; 3]>,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normal(t: &[Point; 3]) -> Point {
    let n = cross(sub(t[1], t[0]), sub(t[2], t[0]));
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if len == 0.0 {
        return [0.0; 3];
    }
    [n[0] / len, n[1] / len, n[2] / len]
}

impl Mesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn triangles(&self) -> &[[Point; 3]] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Adds a triangle unless it has zero area.
    pub fn push(&mut self, t: [Point; 3]) {
        if normal(&t) != [0.0; 3] {
            self.triangles.push(t);
        }
    }

    /// Adds a planar quad `a b c d` (counter-clockwise) as two triangles.
    pub fn quad(&mut self, a: Point, b: Point, c: Point, d: Point) {
        self.push([a, b, c]);
        self.push([a, c, d]);
    }

    /// Axis-aligned box from `lo` to `hi`.
    pub fn cuboid(&mut self, lo: Point, hi: Point) {
        let [x0, y0, z0] = lo;
        let [x1, y1, z1] = hi;
        self.quad([x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]);
        self.quad([x0, y0, z0], [x0, y1, z0], [x1, y1, z0], [x1, y0, z0]);
        self.quad([x1, y0, z0], [x1, y1, z0], [x1, y1, z1], [x1, y0, z1]);
        self.quad([x0, y0, z0], [x0, y0, z1], [x0, y1, z1], [x0, y1, z0]);
        self.quad([x0, y1, z0], [x0, y1, z1], [x1, y1, z1], [x1, y1, z0]);
        self.quad([x0, y0, z0], [x1, y0, z0], [x1, y0, z1], [x0, y0, z1]);
    }

    pub fn extend(&mut self, other: Mesh) {
        self.triangles.extend(other.triangles);
    }

    /// Serializes as binary STL.
    pub fn write_stl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = [b' '; 80];
        header[..HEADER.len()].copy_from_slice(HEADER);
        out.write_all(&header)?;
        out.write_all(&(self.triangles.len() as u32).to_le_bytes())?;
        for t in &self.triangles {
            for v in std::iter::once(normal(t)).chain(t.iter().copied()) {
                for c in v {
                    out.write_all(&(c as f32).to_le_bytes())?;
                }
            }
            out.write_all(&0u16.to_le_bytes())?;
        }
        out.flush()
    }

    pub fn save_stl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_stl(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Checks that every undirected edge borders exactly two triangles and
    /// that they traverse it in opposite directions.
    pub fn check_closed(&self) -> std::result::Result<(), String> {
        let key = |p: Point| p.map(|c| (c * 1e6).round() as i64);
        let mut edges: HashMap<([i64; 3], [i64; 3]), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (key(t[k]), key(t[(k + 1) % 3]));
                if a == b {
                    return Err(format!("degenerate edge at {:?}", t[k]));
                }
                let (lo, hi, dir) = if a < b { (a, b, 1) } else { (b, a, -1) };
                *edges.entry((lo, hi)).or_default() += dir * 1000 + 1;
            }
        }
        // Each edge must be used once in each direction: count 2, net 0.
        for ((a, b), v) in edges {
            if v != 2 {
                return Err(format!(
                    "edge {a:?}-{b:?} is not shared by one triangle in each direction"
                ));
            }
        }
        Ok(())
    }
}

/// Closed mesh of a height field over a rectilinear grid.
///
/// Cell `(i, j)` spans `[xs[i], xs[i+1]] × [ys[j], ys[j+1]]` and is solid
/// from `z = 0` to `height(i, j)`; zero means empty. Walls are split at every
/// distinct height so that neighbouring faces share whole edges.
#[allow(clippy::needless_range_loop)]
pub fn heightfield(xs: &[f64], ys: &[f64], height: impl Fn(usize, usize) -> f64) -> Mesh {
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let h: Vec<Vec<f64>> = (0..nx).map(|i| (0..ny).map(|j| height(i, j)).collect()).collect();
    let mut levels: Vec<f64> = h.iter().flatten().copied().chain([0.0]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
            0.0
        } else {
            h[i as usize][j as usize]
        }
    };
    let spans = |lo: f64, hi: f64| {
        levels
            .windows(2)
            .filter(move |w| w[0] >= lo && w[1] <= hi)
            .map(|w| (w[0], w[1]))
    };

    let mut mesh = Mesh::new();
    for i in 0..nx {
        for j in 0..ny {
            let z = h[i][j];
            if z > 0.0 {
                let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[j], ys[j + 1]);
                mesh.quad([x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z]);
                mesh.quad([x0, y0, 0.0], [x0, y1, 0.0], [x1, y1, 0.0], [x1, y0, 0.0]);
            }
        }
    }
    // Walls normal to x.
    for i in 0..=nx {
        let x = xs[i];
        for j in 0..ny {
            let (l, r) = (at(i as isize - 1, j as isize), at(i as isize, j as isize));
            let (y0, y1) = (ys[j], ys[j + 1]);
            for (za, zb) in spans(l.min(r), l.max(r)) {
                if l > r {
                    mesh.quad([x, y0, za], [x, y1, za], [x, y1, zb], [x, y0, zb]);
                } else {
                    mesh.quad([x, y0, za], [x, y0, zb], [x, y1, zb], [x, y1, za]);
                }
            }
        }
    }
    // Walls normal to y.
    for j in 0..=ny {
        let y = ys[j];
        for i in 0..nx {
            let (b, a) = (at(i as isize, j as isize - 1), at(i as isize, j as isize));
            let (x0, x1) = (xs[i], xs[i + 1]);
            for (za, zb) in spans(a.min(b), a.max(b)) {
                if b > a {
                    mesh.quad([x0, y, za], [x0, y, zb], [x1, y, zb], [x1, y, za]);
                } else {
                    mesh.quad([x0, y, za], [x1, y, za], [x1, y, zb], [x0, y, zb]);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuboid_is_closed() {
        let mut m = Mesh::new();
        m.cuboid([0.0; 3], [1.0, 2.0, 3.0]);
        assert_eq!(m.len(), 12);
        m.check_closed().unwrap();
        for t in m.triangles() {
            let c = [
                (t[0][0] + t[1][0] + t[2][0]) / 3.0 - 0.5,
                (t[0][1] + t[1][1] + t[2][1]) / 3.0 - 1.0,
                (t[0][2] + t[1][2] + t[2][2]) / 3.0 - 1.5,
            ];
            let n = normal(t);
            assert!(n[0] * c[0] + n[1] * c[1] + n[2] * c[2] > 0.0, "inward facet {t:?}");
        }
    }

    #[test]
    fn flipped_facet_detected() {
        let mut m = Mesh::new();
        m.cuboid([0.0; 3], [1.0; 3]);
        let t = m.triangles[0];
        m.triangles[0] = [t[0], t[2], t[1]];
        assert!(m.check_closed().is_err());
        m.triangles.pop();
        assert!(m.check_closed().is_err());
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let mut m = Mesh::new();
        m.push([[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(m.is_empty());
    }

    #[test]
    fn stepped_heightfield_is_closed() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 2.0, 3.0];
        let m = heightfield(&xs, &ys, |i, j| if (i, j) == (1, 1) { 0.4 } else { 0.8 });
        m.check_closed().unwrap();
        let hole = heightfield(&xs, &ys, |i, j| if (i, j) == (1, 1) { 0.0 } else { 0.8 });
        hole.check_closed().unwrap();
    }

    #[test]
    fn stl_layout() {
        let mut m = Mesh::new();
        m.cuboid([0.0; 3], [1.0; 3]);
        let mut buf = Vec::new();
        m.write_stl(&mut buf).unwrap();
        assert_eq!(buf.len(), 84 + 50 * 12);
        assert_eq!(u32::from_le_bytes(buf[80..84].try_into().unwrap()), 12);
        assert!(!buf.starts_with(b"solid"));
    }
}
