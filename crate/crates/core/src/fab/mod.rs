//! Printable geometry: inkwell base, metallization pads and paint stencil.
//!
//! Layout dimensions are in meters; meshes and STL files are in millimeters.

pub mod stl;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{element_positions, ReflectionCoefficients};
use stl::{heightfield, Mesh};

const MM: f64 = 1e3;
/// Geometric coincidence tolerance in millimeters.
const GRID_EPS: f64 = 1e-9;

/// Plate and well dimensions; defaults follow the reference build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayoutDims {
    pub pitch: f64,
    pub well_opening: f64,
    pub well_depth: f64,
    pub base_thickness: f64,
    pub aperture_side: f64,
}

impl Default for LayoutDims {
    fn default() -> Self {
        LayoutDims {
            pitch: 2.5e-3,
            well_opening: 2.2e-3,
            well_depth: 0.4e-3,
            base_thickness: 0.8e-3,
            aperture_side: 90e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InkwellLayout {
    rows: usize,
    cols: usize,
    dims: LayoutDims,
    /// `well_states[r][c]`; ON wells are metallized.
    well_states: Vec<Vec<bool>>,
}

/// Replicates a 1-D binary mask over `rows` rows; column `m` is bit `m`.
pub fn stripe_mask_2d(mask: &ReflectionCoefficients, rows: usize) -> Result<Vec<Vec<bool>>> {
    let bits = mask
        .bits()
        .ok_or_else(|| Error::invalid("only binary masks can be printed"))?;
    if rows == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    Ok(vec![bits; rows])
}

pub fn build_layout(grid: Vec<Vec<bool>>, dims: LayoutDims) -> Result<InkwellLayout> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("well grid is empty"));
    }
    if grid.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("well grid rows have different lengths"));
    }
    let LayoutDims {
        pitch,
        well_opening,
        well_depth,
        base_thickness,
        aperture_side,
    } = dims;
    for (name, v) in [
        ("pitch", pitch),
        ("well opening", well_opening),
        ("well depth", well_depth),
        ("base thickness", base_thickness),
        ("aperture side", aperture_side),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if well_opening >= pitch {
        return Err(Error::invalid(format!(
            "well opening {:.3} mm leaves no wall at pitch {:.3} mm",
            well_opening * MM,
            pitch * MM
        )));
    }
    if well_depth >= base_thickness {
        return Err(Error::invalid("well depth must be less than the base thickness"));
    }
    let extent = |n: usize| (n - 1) as f64 * pitch + well_opening;
    if extent(rows.max(cols)) > aperture_side * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "{rows}x{cols} wells at pitch {:.3} mm span {:.3} mm, larger than the {:.3} mm plate",
            pitch * MM,
            extent(rows.max(cols)) * MM,
            aperture_side * MM
        )));
    }
    Ok(InkwellLayout {
        rows,
        cols,
        dims,
        well_states: grid,
    })
}

impl InkwellLayout {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> &LayoutDims {
        &self.dims
    }

    pub fn well_states(&self) -> &[Vec<bool>] {
        &self.well_states
    }

    pub fn on_count(&self) -> usize {
        self.well_states.iter().flatten().filter(|&&b| b).count()
    }

    pub fn fill_fraction(&self) -> f64 {
        self.on_count() as f64 / (self.rows * self.cols) as f64
    }

    /// Well centers from the plate corner, `(x, y)` in meters, for column `c`
    /// and row `r`. Offsets from the plate center are the element positions.
    pub fn well_center(&self, row: usize, col: usize) -> (f64, f64) {
        let (cx, cy) = self.centers();
        (cx[col] / MM, cy[row] / MM)
    }

    fn centers(&self) -> (Vec<f64>, Vec<f64>) {
        let half = self.dims.aperture_side / 2.0;
        let xs = element_positions(self.cols, self.dims.pitch).expect("validated layout");
        let ys = element_positions(self.rows, self.dims.pitch).expect("validated layout");
        (
            xs.iter().map(|x| (half + x) * MM).collect(),
            ys.iter().map(|y| (half + y) * MM).collect(),
        )
    }

    /// Plate with one rectangular cavity per candidate well.
    pub fn base_mesh(&self) -> Mesh {
        let (cx, cy) = self.centers();
        let d = &self.dims;
        plate_with_cells(
            d.aperture_side * MM,
            &cx,
            &cy,
            d.well_opening * MM,
            |_, _| true,
            d.base_thickness * MM,
            (d.base_thickness - d.well_depth) * MM,
        )
    }

    /// One cuboid per ON well filling its cavity.
    pub fn pad_mesh(&self) -> Mesh {
        let (cx, cy) = self.centers();
        let d = &self.dims;
        let half = d.well_opening * MM / 2.0;
        let (z0, z1) = ((d.base_thickness - d.well_depth) * MM, d.base_thickness * MM);
        let mut mesh = Mesh::new();
        for (r, row) in self.well_states.iter().enumerate() {
            for (c, &on) in row.iter().enumerate() {
                if on {
                    mesh.cuboid(
                        [cx[c] - half, cy[r] - half, z0],
                        [cx[c] + half, cy[r] + half, z1],
                    );
                }
            }
        }
        mesh
    }
}

/// Square plate of side `side` and height `full`; cells of width `w`
/// centered on the `cx × cy` lattice where `open(r, c)` holds drop to `inner`.
fn plate_with_cells(
    side: f64,
    cx: &[f64],
    cy: &[f64],
    w: f64,
    open: impl Fn(usize, usize) -> bool,
    full: f64,
    inner: f64,
) -> Mesh {
    let edges = |centers: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = centers
            .iter()
            .flat_map(|&c| [c - w / 2.0, c + w / 2.0])
            .chain([0.0, side])
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < GRID_EPS);
        v
    };
    let xs = edges(cx);
    let ys = edges(cy);
    let locate = |centers: &[f64], mid: f64| centers.iter().position(|&c| (mid - c).abs() < w / 2.0);
    heightfield(&xs, &ys, |i, j| {
        let mx = 0.5 * (xs[i] + xs[i + 1]);
        let my = 0.5 * (ys[j] + ys[j + 1]);
        match (locate(cx, mx), locate(cy, my)) {
            (Some(c), Some(r)) if open(r, c) => inner,
            _ => full,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StencilLayout {
    pub thickness: f64,
    pub opening: f64,
    pub openings_at: Vec<(usize, usize)>,
    aperture_side: f64,
    rows: usize,
    cols: usize,
    pitch: f64,
    well_opening: f64,
}

/// Default stencil plate thickness and opening.
pub const STENCIL_THICKNESS: f64 = 0.8e-3;
pub const STENCIL_OPENING: f64 = 2.1e-3;
/// Least clearance between stencil opening and well edge, per side.
pub const STENCIL_MARGIN: f64 = 0.05e-3;

/// Stencil open exactly above the ON wells.
///
/// The opening is the default when it keeps the margin inside the well,
/// otherwise it shrinks to `well_opening - 2·margin`.
pub fn stencil_from_layout(layout: &InkwellLayout) -> StencilLayout {
    let d = &layout.dims;
    let opening = if STENCIL_OPENING + 2.0 * STENCIL_MARGIN <= d.well_opening * (1.0 + 1e-12) {
        STENCIL_OPENING
    } else {
        d.well_opening - 2.0 * STENCIL_MARGIN
    };
    let openings_at = layout
        .well_states
        .iter()
        .enumerate()
        .flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(move |(c, _)| (r, c))
        })
        .collect();
    StencilLayout {
        thickness: STENCIL_THICKNESS,
        opening,
        openings_at,
        aperture_side: d.aperture_side,
        rows: layout.rows,
        cols: layout.cols,
        pitch: d.pitch,
        well_opening: d.well_opening,
    }
}

impl StencilLayout {
    /// Clearance between opening and well edge on each side, meters.
    pub fn margin(&self) -> f64 {
        (self.well_opening - self.opening) / 2.0
    }

    /// Plate with square through-openings.
    pub fn mesh(&self) -> Mesh {
        let half = self.aperture_side / 2.0;
        let at = |n: usize| -> Vec<f64> {
            element_positions(n, self.pitch)
                .expect("validated layout")
                .iter()
                .map(|p| (half + p) * MM)
                .collect()
        };
        let (cx_all, cy_all) = (at(self.cols), at(self.rows));
        // Only columns and rows that hold an opening contribute grid lines.
        let mut used_c: Vec<usize> = self.openings_at.iter().map(|&(_, c)| c).collect();
        let mut used_r: Vec<usize> = self.openings_at.iter().map(|&(r, _)| r).collect();
        used_c.sort_unstable();
        used_c.dedup();
        used_r.sort_unstable();
        used_r.dedup();
        let cx: Vec<f64> = used_c.iter().map(|&c| cx_all[c]).collect();
        let cy: Vec<f64> = used_r.iter().map(|&r| cy_all[r]).collect();
        let holes: HashSet<(usize, usize)> = self.openings_at.iter().copied().collect();
        let open = |r: usize, c: usize| holes.contains(&(used_r[r], used_c[c]));
        plate_with_cells(
            self.aperture_side * MM,
            &cx,
            &cy,
            self.opening * MM,
            open,
            self.thickness * MM,
            0.0,
        )
    }
}

/// Paths of the three solids written by [`export_stl`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedFiles {
    pub base: PathBuf,
    pub pads: PathBuf,
    pub stencil: PathBuf,
    pub triangles: [usize; 3],
}

/// Writes `base.stl`, `pads.stl` and `stencil.stl` into `dir`.
pub fn export_stl(layout: &InkwellLayout, dir: &Path) -> Result<ExportedFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stencil = stencil_from_layout(layout);
    let solids = [
        ("base.stl", layout.base_mesh()),
        ("pads.stl", layout.pad_mesh()),
        ("stencil.stl", stencil.mesh()),
    ];
    let mut counts = [0; 3];
    for (k, (name, mesh)) in solids.iter().enumerate() {
        mesh.save_stl(&dir.join(name))?;
        counts[k] = mesh.len();
    }
    Ok(ExportedFiles {
        base: dir.join("base.stl"),
        pads: dir.join("pads.stl"),
        stencil: dir.join("stencil.stl"),
        triangles: counts,
    })
}

/// Human-readable summary of a layout.
pub fn layout_report(layout: &InkwellLayout) -> String {
    let d = &layout.dims;
    let (on_cols, strides, span) = column_stats(layout);
    let mut s = String::new();
    let _ = writeln!(s, "wells          {} x {} ({} total)", layout.rows, layout.cols, layout.rows * layout.cols);
    let _ = writeln!(s, "ON wells       {}", layout.on_count());
    let _ = writeln!(s, "fill fraction  {:.4}", layout.fill_fraction());
    let _ = writeln!(s, "ON columns     {on_cols}");
    let _ = writeln!(s, "column strides {strides:?}");
    let _ = writeln!(s, "span           {:.3} mm", span * MM);
    let _ = writeln!(s, "plate          {:.1} x {:.1} mm, base {:.2} mm", d.aperture_side * MM, d.aperture_side * MM, d.base_thickness * MM);
    let _ = writeln!(s, "wells          pitch {:.2} mm, opening {:.2} mm, depth {:.2} mm", d.pitch * MM, d.well_opening * MM, d.well_depth * MM);
    let _ = writeln!(s, "note           copper ground plane is adhesive foil under the base; not exported");
    s
}

/// ON-column summary used by reports and tests.
pub fn column_stats(layout: &InkwellLayout) -> (usize, Vec<usize>, f64) {
    let on_cols: Vec<usize> = (0..layout.cols)
        .filter(|&c| layout.well_states.iter().any(|r| r[c]))
        .collect();
    let strides = on_cols.windows(2).map(|w| w[1] - w[0]).collect();
    let span = match (on_cols.first(), on_cols.last()) {
        (Some(a), Some(b)) => (b - a) as f64 * layout.dims.pitch,
        _ => 0.0,
    };
    (on_cols.len(), strides, span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::stride_bits;
    use crate::model::Aperture;
    use crate::synthesis::single_beam_mask;

    fn layout(bits: &[bool]) -> InkwellLayout {
        let grid = stripe_mask_2d(&ReflectionCoefficients::from_bits(bits), 35).unwrap();
        build_layout(grid, LayoutDims::default()).unwrap()
    }

    #[test]
    fn stripe_counts() {
        assert_eq!(layout(&[true; 35]).on_count(), 1225);
        assert_eq!(layout(&[false; 35]).on_count(), 0);
        assert_eq!(layout(&stride_bits(4, 35)).on_count(), 315);
        assert!(stripe_mask_2d(&ReflectionCoefficients::from_phases(&[0.0]), 1).is_err());
        assert!(stripe_mask_2d(&ReflectionCoefficients::all_on(3), 0).is_err());
    }

    #[test]
    fn layout_validation() {
        let full = vec![vec![true; 35]; 35];
        let d = LayoutDims::default();
        assert!(build_layout(full.clone(), LayoutDims { pitch: 3.0e-3, ..d }).is_err());
        assert!(build_layout(full.clone(), LayoutDims { well_opening: 2.5e-3, ..d }).is_err());
        assert!(build_layout(vec![vec![true; 36]; 35], d).is_ok());
        assert!(build_layout(vec![vec![true; 37]; 1], d).is_err());
        let one = build_layout(vec![vec![true]], d).unwrap();
        assert_eq!((one.rows(), one.cols()), (1, 1));
        assert!(build_layout(vec![], d).is_err());
    }

    #[test]
    fn pads_sit_on_the_element_lattice() {
        let l = layout(&[true; 35]);
        let xm = element_positions(35, 2.5e-3).unwrap();
        for (c, x) in xm.iter().enumerate() {
            let (px, py) = l.well_center(0, c);
            assert!((px - 45e-3 - x).abs() < 1e-12);
            assert!((py - 45e-3 - xm[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn pad_triangle_counts() {
        assert_eq!(layout(&[true; 35]).pad_mesh().len(), 14_700);
        let mut bits = vec![false; 35];
        bits[3] = true;
        let one = build_layout(vec![bits], LayoutDims::default()).unwrap();
        assert_eq!(one.pad_mesh().len(), 12);
    }

    #[test]
    fn solids_are_closed() {
        let l = layout(&stride_bits(5, 35));
        l.base_mesh().check_closed().unwrap();
        l.pad_mesh().check_closed().unwrap();
        stencil_from_layout(&l).mesh().check_closed().unwrap();
    }

    #[test]
    fn stencil_registration() {
        let l = layout(&stride_bits(4, 35));
        let s = stencil_from_layout(&l);
        assert_eq!(s.openings_at.len(), 315);
        assert!(s.openings_at.iter().all(|&(r, c)| l.well_states()[r][c]));
        assert!(s.margin() >= STENCIL_MARGIN - 1e-12);
        assert_eq!(s.opening, 2.1e-3);
        let solid = stencil_from_layout(&layout(&[false; 35]));
        assert!(solid.openings_at.is_empty());
        assert_eq!(solid.mesh().len(), 12);
    }

    #[test]
    fn report_contents() {
        let l = layout(&stride_bits(5, 35));
        let (n, strides, span) = column_stats(&l);
        assert_eq!(n, 7);
        assert!(strides.iter().all(|&s| s == 5));
        assert!((span - 75e-3).abs() < 1e-12);
        let text = layout_report(&l);
        assert!(text.contains("75.000 mm") && text.contains("copper"));
        assert_eq!(layout(&[true; 35]).fill_fraction(), 1.0);
    }

    #[test]
    fn steering_mask_fill_matches_thinning() {
        let ap = Aperture::new(35, 2.5e-3, 5e-3).unwrap();
        let mask = single_beam_mask(&ap, 60.0, -30.0, 0.0).unwrap();
        let l = build_layout(stripe_mask_2d(&mask, 35).unwrap(), LayoutDims::default()).unwrap();
        let eta = crate::synthesis::thinning_ratio(&mask).unwrap();
        assert!((l.fill_fraction() - eta).abs() < 1e-15);
        assert!((l.fill_fraction() - 0.5).abs() <= 0.06);
    }
}
