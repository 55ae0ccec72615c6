//! Measured pattern processing: background subtraction, normalization and
//! comparison against simulated patterns.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{parse_err, power_to_db, AngularPattern, GAIN_FLOOR_DB};

/// Half-width of the search window around each declared target.
pub const PEAK_WINDOW_DEG: f64 = 10.0;

/// Azimuthal power scan at a fixed incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementScan {
    pub label: String,
    pub incidence_deg: Option<f64>,
    samples: Vec<(f64, f64)>,
}

impl MeasurementScan {
    /// Validates `(theta_deg, power_dbm)` samples.
    pub fn new(samples: Vec<(f64, f64)>, label: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a scan needs at least two samples"));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(format!(
                    "scan angles must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(s) = samples.iter().find(|s| !s.0.is_finite() || !s.1.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {s:?}")));
        }
        Ok(MeasurementScan {
            label: label.into(),
            incidence_deg: None,
            samples,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn header_index(headers: &csv::StringRecord, name: &str, source: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| parse_err(source, 1, format!("missing column `{name}`")))
}

/// Reads two named numeric columns, enforcing strictly increasing angles.
fn read_columns<R: Read>(input: R, source: &str, value_col: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .clone();
    let (ct, cv) = (header_index(&headers, "theta_deg", source)?, header_index(&headers, value_col, source)?);
    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |c: usize| -> Result<f64> {
            let field = rec.get(c).unwrap_or("").trim();
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(parse_err(source, line, format!("not a finite number: `{field}`"))),
            }
        };
        let (t, v) = (num(ct)?, num(cv)?);
        if let Some(&(prev, _, prev_line)) = rows.last() {
            if t == prev {
                return Err(parse_err(
                    source,
                    line,
                    format!("duplicate angle {t} (already on line {prev_line})"),
                ));
            }
            if t < prev {
                return Err(parse_err(
                    source,
                    line,
                    format!("angle {t} follows {prev}; angles must increase"),
                ));
            }
        }
        rows.push((t, v, line));
    }
    if rows.len() < 2 {
        return Err(parse_err(source, 0, format!("need at least 2 rows, found {}", rows.len())));
    }
    Ok(rows.into_iter().map(|(t, v, _)| (t, v)).collect())
}

/// Parses a `theta_deg,power_dbm` CSV.
pub fn load_scan<R: Read>(input: R, source: &str) -> Result<MeasurementScan> {
    MeasurementScan::new(read_columns(input, source, "power_dbm")?, source)
}

pub fn load_scan_file(path: &Path) -> Result<MeasurementScan> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_scan(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// `max(P_meas - P_mount, 0)` in milliwatts on an identical angle grid.
pub fn background_subtract(meas: &MeasurementScan, mount: &MeasurementScan) -> Result<Vec<(f64, f64)>> {
    let same_grid = meas.len() == mount.len()
        && meas.samples.iter().zip(&mount.samples).all(|(a, b)| a.0 == b.0);
    if !same_grid {
        return Err(Error::invalid(format!(
            "angle grids of `{}` and `{}` differ; re-measure the background on the same azimuth steps",
            meas.label, mount.label
        )));
    }
    Ok(meas
        .samples
        .iter()
        .zip(&mount.samples)
        .map(|(&(t, pm), &(_, pb))| (t, (dbm_to_mw(pm) - dbm_to_mw(pb)).max(0.0)))
        .collect())
}

/// Pattern in dB relative to its own maximum, floored at [`GAIN_FLOOR_DB`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedPattern {
    pub theta_deg: Vec<f64>,
    pub gain_db: Vec<f64>,
}

/// Divides by the maximum and converts to dB.
pub fn normalize_pattern(linear: &[(f64, f64)]) -> Result<NormalizedPattern> {
    let peak = linear.iter().map(|s| s.1).fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::invalid("no reflector signal above background"));
    }
    Ok(NormalizedPattern {
        theta_deg: linear.iter().map(|s| s.0).collect(),
        gain_db: linear.iter().map(|s| power_to_db(s.1 / peak)).collect(),
    })
}

impl NormalizedPattern {
    pub fn len(&self) -> usize {
        self.theta_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_deg.is_empty()
    }

    /// CSV with header `theta_deg,gain_db`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
        w.write_record(["theta_deg", "gain_db"]).map_err(err)?;
        for (t, g) in self.theta_deg.iter().zip(&self.gain_db) {
            w.write_record([t.to_string(), g.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("CSV write failed: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e {
            Error::Invalid(msg) => Error::io(path, std::io::Error::other(msg)),
            other => other,
        })
    }

    /// Reads the `theta_deg` and `gain_db` columns of any pattern CSV and
    /// re-references them to their maximum. Values at or below the floor
    /// are sentinels and stay at the floor.
    pub fn read_csv<R: Read>(input: R, source: &str) -> Result<Self> {
        let rows = read_columns(input, source, "gain_db")?;
        let peak = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        if peak <= GAIN_FLOOR_DB {
            return Err(Error::invalid(format!("{source}: no reflector signal above the floor")));
        }
        Ok(NormalizedPattern {
            theta_deg: rows.iter().map(|r| r.0).collect(),
            gain_db: rows
                .iter()
                .map(|r| {
                    if r.1 <= GAIN_FLOOR_DB {
                        GAIN_FLOOR_DB
                    } else {
                        (r.1 - peak).max(GAIN_FLOOR_DB)
                    }
                })
                .collect(),
        })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Theory gain in dB relative to its maximum, linearly interpolated in dB.
fn resample_theory(theory: &AngularPattern, at: &[f64]) -> Result<Vec<f64>> {
    let grid = theory.theta_grid();
    let peak = theory.normalized_gain().iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::invalid("theory pattern has no power"));
    }
    let db: Vec<f64> = theory
        .normalized_gain()
        .iter()
        .map(|&g| power_to_db(g / peak))
        .collect();
    at.iter()
        .map(|&t| {
            let (lo, hi) = (grid[0], grid[grid.len() - 1]);
            if t < lo || t > hi {
                return Err(Error::invalid(format!(
                    "measured angle {t} lies outside the theory grid [{lo}, {hi}]"
                )));
            }
            let j = grid.partition_point(|&g| g <= t);
            if j == 0 {
                return Ok(db[0]);
            }
            let i = j - 1;
            if grid[i] == t || i + 1 == grid.len() {
                return Ok(db[i]);
            }
            let w = (t - grid[i]) / (grid[i + 1] - grid[i]);
            Ok(db[i] + w * (db[i + 1] - db[i]))
        })
        .collect()
}

/// Local peak nearest to `target` within the search window, if any.
fn nearest_peak(theta: &[f64], db: &[f64], target: f64, floor_db: f64) -> Option<usize> {
    let n = db.len();
    (0..n)
        .filter(|&i| (theta[i] - target).abs() <= PEAK_WINDOW_DEG && db[i] > floor_db)
        .filter(|&i| (i == 0 || db[i] >= db[i - 1]) && (i + 1 == n || db[i] >= db[i + 1]))
        .min_by(|&a, &b| {
            (theta[a] - target)
                .abs()
                .total_cmp(&(theta[b] - target).abs())
                .then(db[b].total_cmp(&db[a]))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetComparison {
    pub theta: f64,
    /// Measured minus theoretical peak angle.
    pub angle_err_deg: Option<f64>,
    /// Measured minus theoretical peak level.
    pub level_err_db: Option<f64>,
    pub found: bool,
    pub measured_peak_deg: Option<f64>,
    pub theory_peak_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub targets: Vec<TargetComparison>,
    /// RMS dB difference where both patterns exceed the floor.
    pub rms_db: Option<f64>,
    pub floor_db: f64,
}

/// Scores a normalized measured pattern against theory.
pub fn compare(
    measured: &NormalizedPattern,
    theory: &AngularPattern,
    targets: &[f64],
    floor_db: f64,
) -> Result<ComparisonReport> {
    if measured.is_empty() || measured.theta_deg.len() != measured.gain_db.len() {
        return Err(Error::invalid("measured pattern is empty or ragged"));
    }
    if !floor_db.is_finite() {
        return Err(Error::invalid("floor must be finite"));
    }
    let theta = &measured.theta_deg;
    let meas = &measured.gain_db;
    let th = resample_theory(theory, theta)?;
    let targets = targets
        .iter()
        .map(|&t| {
            let pm = nearest_peak(theta, meas, t, floor_db);
            let pt = nearest_peak(theta, &th, t, floor_db);
            match (pm, pt) {
                (Some(i), Some(j)) => TargetComparison {
                    theta: t,
                    angle_err_deg: Some(theta[i] - theta[j]),
                    level_err_db: Some(meas[i] - th[j]),
                    found: true,
                    measured_peak_deg: Some(theta[i]),
                    theory_peak_deg: Some(theta[j]),
                },
                _ => TargetComparison {
                    theta: t,
                    angle_err_deg: None,
                    level_err_db: None,
                    found: false,
                    measured_peak_deg: pm.map(|i| theta[i]),
                    theory_peak_deg: pt.map(|j| theta[j]),
                },
            }
        })
        .collect();
    let diffs: Vec<f64> = meas
        .iter()
        .zip(&th)
        .filter(|(m, t)| **m > floor_db && **t > floor_db)
        .map(|(m, t)| (m - t).powi(2))
        .collect();
    let rms_db = (!diffs.is_empty()).then(|| (diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt());
    Ok(ComparisonReport {
        targets,
        rms_db,
        floor_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pattern_sweep, AngleGrid, Aperture, ReflectionCoefficients};

    fn scan(rows: &[(f64, f64)]) -> MeasurementScan {
        MeasurementScan::new(rows.to_vec(), "t").unwrap()
    }

    #[test]
    fn loads_valid_csv() {
        let s = load_scan("theta_deg,power_dbm\n-5,-40\n0,-30.5\n".as_bytes(), "a.csv").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.samples()[1], (0.0, -30.5));
        let mut text = String::from("power_dbm,theta_deg\n");
        for i in 0..37 {
            text += &format!("-50,{}\n", -90 + 5 * i);
        }
        assert_eq!(load_scan(text.as_bytes(), "b.csv").unwrap().len(), 37);
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let dup = load_scan("theta_deg,power_dbm\n0,-1\n5,-2\n5,-3\n".as_bytes(), "d.csv").unwrap_err();
        let msg = dup.to_string();
        assert!(msg.contains("line 4") && msg.contains("duplicate"), "{msg}");
        let back = load_scan("theta_deg,power_dbm\n0,-1\n-5,-2\n".as_bytes(), "d.csv").unwrap_err();
        assert!(back.to_string().contains("line 3"));
        let nan = load_scan("theta_deg,power_dbm\n0,abc\n5,-2\n".as_bytes(), "d.csv").unwrap_err();
        assert!(nan.to_string().contains("line 2"));
        assert!(load_scan("theta_deg,power_dbm\n0,-1\n".as_bytes(), "d.csv").is_err());
        assert!(load_scan("theta,power_dbm\n0,-1\n1,-1\n".as_bytes(), "d.csv").is_err());
    }

    #[test]
    fn subtraction_example() {
        let meas = scan(&[(-5.0, 0.0), (0.0, -3.01), (5.0, -10.0)]);
        let mount = scan(&[(-5.0, -10.0), (0.0, -10.0), (5.0, -10.0)]);
        let lin = background_subtract(&meas, &mount).unwrap();
        assert!((lin[0].1 - 0.9).abs() < 1e-12);
        assert!((lin[1].1 - 0.4).abs() < 1e-3);
        assert_eq!(lin[2].1, 0.0);
        let n = normalize_pattern(&lin).unwrap();
        assert_eq!(n.gain_db[0], 0.0);
        assert!((n.gain_db[1] + 3.52).abs() < 0.01);
        assert_eq!(n.gain_db[2], GAIN_FLOOR_DB);
    }

    #[test]
    fn clamp_and_mismatch() {
        let meas = scan(&[(0.0, -20.0), (5.0, -20.0)]);
        let mount = scan(&[(0.0, -10.0), (5.0, -20.0)]);
        let lin = background_subtract(&meas, &mount).unwrap();
        assert!(lin.iter().all(|s| s.1 == 0.0));
        assert!(normalize_pattern(&lin).unwrap_err().to_string().contains("no reflector signal"));
        let other = scan(&[(0.0, -20.0), (4.0, -20.0)]);
        assert!(background_subtract(&meas, &other).is_err());
    }

    #[test]
    fn single_sample_normalizes_to_zero() {
        assert_eq!(normalize_pattern(&[(3.0, 2.5)]).unwrap().gain_db, vec![0.0]);
    }

    #[test]
    fn csv_round_trip_is_idempotent() {
        let n = normalize_pattern(&[(0.0, 1.0), (5.0, 0.3), (10.0, 0.0)]).unwrap();
        let mut buf = Vec::new();
        n.write_csv(&mut buf).unwrap();
        let back = NormalizedPattern::read_csv(buf.as_slice(), "n.csv").unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn theory_against_itself() {
        let ap = Aperture::new(35, 2.5e-3, 5e-3).unwrap();
        let grid = AngleGrid::range(-90.0, 90.0, 5.0).unwrap();
        let p = pattern_sweep(&ap, &ReflectionCoefficients::all_on(35), 30.0, &grid).unwrap();
        let peak = p.normalized_gain().iter().copied().fold(0.0, f64::max);
        let lin: Vec<(f64, f64)> = p
            .theta_grid()
            .iter()
            .zip(p.normalized_gain())
            .map(|(&t, &g)| (t, g / peak))
            .collect();
        let meas = normalize_pattern(&lin).unwrap();
        let r = compare(&meas, &p, &[-30.0], GAIN_FLOOR_DB).unwrap();
        assert!(r.targets[0].found);
        assert_eq!(r.targets[0].angle_err_deg, Some(0.0));
        assert_eq!(r.targets[0].level_err_db, Some(0.0));
        assert_eq!(r.rms_db, Some(0.0));
    }

    #[test]
    fn missing_beam_is_reported() {
        let ap = Aperture::new(8, 2.5e-3, 5e-3).unwrap();
        let grid = AngleGrid::range(-90.0, 90.0, 1.0).unwrap();
        let p = pattern_sweep(&ap, &ReflectionCoefficients::all_on(8), 0.0, &grid).unwrap();
        let flat = NormalizedPattern {
            theta_deg: grid.angles().to_vec(),
            gain_db: (0..grid.angles().len()).map(|i| -(i as f64) * 0.1).collect(),
        };
        let r = compare(&flat, &p, &[45.0], GAIN_FLOOR_DB).unwrap();
        assert!(!r.targets[0].found);
        assert!(r.targets[0].angle_err_deg.is_none());
    }
}
