//! Reference parameter sets and the theory curves computed from them.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::bounds::{quantization_sweep, thinning_convergence};
use crate::error::{Error, Result};
use crate::model::{pattern_sweep, power_to_db, AngleGrid, AngularPattern, Aperture, ReflectionCoefficients};
use crate::synthesis::{ideal_continuous_weights, synthesize_bipolar, synthesize_mask, SteeringTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2a,
    Fig2b,
    Fig3,
    Fig5,
    Fig6,
    Fig7a,
    Fig7b,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig3,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7a,
        FigureId::Fig7b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig3 => "fig3",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7a => "fig7a",
            FigureId::Fig7b => "fig7b",
        }
    }

    pub fn params(self) -> &'static FigureParams {
        FIGURES.iter().find(|p| p.id == self).expect("every figure has parameters")
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = FigureId::ALL.iter().map(|f| f.name()).collect();
                Error::invalid(format!("unknown figure `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Parameters behind one figure. Lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureParams {
    pub id: FigureId,
    pub theta_i_deg: f64,
    pub targets_deg: &'static [f64],
    /// Elements on the dense scaffold.
    pub element_count: usize,
    pub spacing: f64,
    pub wavelength: f64,
    /// Uniform period of the diffraction-order design, if shown.
    pub period: Option<f64>,
    /// Active elements of the diffraction-order design.
    pub period_elements: usize,
}

const LAMBDA: f64 = 5e-3;
const D0: f64 = 2.5e-3;

pub static FIGURES: [FigureParams; 7] = [
    FigureParams {
        id: FigureId::Fig2a,
        theta_i_deg: 60.0,
        targets_deg: &[-30.0],
        element_count: 200,
        spacing: D0,
        wavelength: LAMBDA,
        period: None,
        period_elements: 0,
    },
    FigureParams {
        id: FigureId::Fig2b,
        theta_i_deg: 0.0,
        targets_deg: &[],
        element_count: 64,
        spacing: D0,
        wavelength: LAMBDA,
        period: None,
        period_elements: 0,
    },
    FigureParams {
        id: FigureId::Fig3,
        theta_i_deg: 45.0,
        targets_deg: &[-10.0],
        element_count: 35,
        spacing: D0,
        wavelength: LAMBDA,
        period: None,
        period_elements: 0,
    },
    FigureParams {
        id: FigureId::Fig5,
        theta_i_deg: 45.0,
        targets_deg: &[-10.0],
        element_count: 35,
        spacing: D0,
        wavelength: LAMBDA,
        period: Some(9.37e-3),
        period_elements: 35,
    },
    FigureParams {
        id: FigureId::Fig6,
        theta_i_deg: 30.0,
        targets_deg: &[-7.8, -60.0],
        element_count: 35,
        spacing: D0,
        wavelength: LAMBDA,
        period: Some(13.66e-3),
        period_elements: 35,
    },
    FigureParams {
        id: FigureId::Fig7a,
        theta_i_deg: 45.0,
        targets_deg: &[-10.0],
        element_count: 35,
        spacing: D0,
        wavelength: LAMBDA,
        period: Some(9.37e-3),
        period_elements: 9,
    },
    FigureParams {
        id: FigureId::Fig7b,
        theta_i_deg: 60.0,
        targets_deg: &[-7.8, -30.0],
        element_count: 35,
        spacing: D0,
        wavelength: LAMBDA,
        period: Some(13.66e-3),
        period_elements: 7,
    },
];

/// Column-oriented numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureTable {
    fn from_columns(header: &[&str], columns: Vec<Vec<f64>>) -> Self {
        let n = columns.first().map_or(0, Vec::len);
        FigureTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(err)?;
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
}

/// Gain in dB normalized by `reference_m²` instead of the pattern's own `M²`.
fn db_against(pattern: &AngularPattern, reference_m: usize) -> Vec<f64> {
    let scale = (pattern.element_count() as f64 / reference_m as f64).powi(2);
    pattern
        .normalized_gain()
        .iter()
        .map(|&g| power_to_db(g * scale))
        .collect()
}

fn task_for(p: &FigureParams) -> Result<SteeringTask> {
    SteeringTask::equal_weights(p.theta_i_deg, p.targets_deg)
}

/// Mask curves on the dense scaffold: ON/OFF, bipolar and ideal.
fn dense_curves(p: &FigureParams, grid: &AngleGrid) -> Result<[AngularPattern; 3]> {
    let ap = Aperture::new(p.element_count, p.spacing, p.wavelength)?;
    let task = task_for(p)?;
    let sweep = |c: &ReflectionCoefficients| pattern_sweep(&ap, c, p.theta_i_deg, grid);
    Ok([
        sweep(&synthesize_mask(&ap, &task)?)?,
        sweep(&synthesize_bipolar(&ap, &task)?)?,
        sweep(&ideal_continuous_weights(&ap, &task)?)?,
    ])
}

/// All-ON uniform-period design.
fn period_curve(p: &FigureParams, grid: &AngleGrid) -> Result<AngularPattern> {
    let delta = p.period.expect("figure has a period design");
    let ap = Aperture::new(p.period_elements, delta, p.wavelength)?;
    pattern_sweep(&ap, &ReflectionCoefficients::all_on(p.period_elements), p.theta_i_deg, grid)
}

/// Computes the theory table of a figure on `grid` (angle figures only).
pub fn reproduce(id: FigureId, grid: &AngleGrid) -> Result<FigureTable> {
    let p = id.params();
    let theta = grid.angles().to_vec();
    let m = p.element_count;
    match id {
        FigureId::Fig2a => {
            let ms: Vec<usize> = (1..=p.element_count).collect();
            let eta = thinning_convergence(p.theta_i_deg, p.targets_deg[0], p.spacing, p.wavelength, &ms)?;
            Ok(FigureTable::from_columns(
                &["M", "eta"],
                vec![eta.iter().map(|e| e.0 as f64).collect(), eta.iter().map(|e| e.1).collect()],
            ))
        }
        FigureId::Fig2b => {
            let ap = Aperture::new(m, p.spacing, p.wavelength)?;
            let u: Vec<f64> = (-200..=200).map(|i| i as f64 / 100.0).collect();
            let pts = quantization_sweep(&ap, &u)?;
            Ok(FigureTable::from_columns(
                &["u", "ideal_db", "onoff_opt_db", "bipolar_opt_db", "onoff_psi0_db", "bipolar_psi0_db"],
                vec![
                    pts.iter().map(|q| q.u).collect(),
                    pts.iter().map(|q| q.ideal_db).collect(),
                    pts.iter().map(|q| q.onoff_opt_db).collect(),
                    pts.iter().map(|q| q.bipolar_opt_db).collect(),
                    pts.iter().map(|q| q.onoff_psi0_db).collect(),
                    pts.iter().map(|q| q.bipolar_psi0_db).collect(),
                ],
            ))
        }
        FigureId::Fig3 => {
            let ap = Aperture::new(m, p.spacing, p.wavelength)?;
            let all_on = pattern_sweep(&ap, &ReflectionCoefficients::all_on(m), p.theta_i_deg, grid)?;
            let [onoff, bipolar, ideal] = dense_curves(p, grid)?;
            Ok(FigureTable::from_columns(
                &["theta_deg", "all_on_db", "on_off_db", "bipolar_db", "ideal_db"],
                vec![theta, all_on.gain_db(), onoff.gain_db(), bipolar.gain_db(), ideal.gain_db()],
            ))
        }
        FigureId::Fig5 => Ok(FigureTable::from_columns(
            &["theta_deg", "diffraction_db"],
            vec![theta, period_curve(p, grid)?.gain_db()],
        )),
        FigureId::Fig6 => {
            let [onoff, bipolar, ideal] = dense_curves(p, grid)?;
            Ok(FigureTable::from_columns(
                &["theta_deg", "on_off_db", "bipolar_db", "ideal_db", "diffraction_db"],
                vec![theta, onoff.gain_db(), bipolar.gain_db(), ideal.gain_db(), period_curve(p, grid)?.gain_db()],
            ))
        }
        FigureId::Fig7a | FigureId::Fig7b => {
            let [onoff, _, ideal] = dense_curves(p, grid)?;
            Ok(FigureTable::from_columns(
                &["theta_deg", "diffraction_db", "on_off_db", "ideal_db"],
                vec![theta, db_against(&period_curve(p, grid)?, m), onoff.gain_db(), ideal.gain_db()],
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(t: &FigureTable, col: &str, theta: f64) -> f64 {
        let th = t.column("theta_deg").unwrap();
        let i = th.iter().position(|&x| (x - theta).abs() < 1e-9).unwrap();
        t.column(col).unwrap()[i]
    }

    #[test]
    fn names_parse() {
        for id in FigureId::ALL {
            assert_eq!(id.name().parse::<FigureId>().unwrap(), id);
        }
        assert!("fig4".parse::<FigureId>().is_err());
    }

    #[test]
    fn single_beam_figure_levels() {
        let t = reproduce(FigureId::Fig3, &AngleGrid::default()).unwrap();
        assert_eq!(at(&t, "all_on_db", -45.0), 0.0);
        assert!((at(&t, "ideal_db", -10.0)).abs() < 1e-9);
        assert!((at(&t, "bipolar_db", -10.0) + 3.92).abs() < 0.1);
    }

    #[test]
    fn aperture_matched_diffraction_is_weaker() {
        let t = reproduce(FigureId::Fig7a, &AngleGrid::default()).unwrap();
        let d = at(&t, "diffraction_db", -10.0);
        let o = at(&t, "on_off_db", -10.0);
        assert!(d < o, "{d} vs {o}");
        assert!(d <= 20.0 * (9.0f64 / 35.0).log10() + 1e-9);
    }

    #[test]
    fn thinning_table_shape() {
        let t = reproduce(FigureId::Fig2a, &AngleGrid::default()).unwrap();
        assert_eq!(t.rows.len(), 200);
        assert_eq!(t.header, vec!["M", "eta"]);
    }
}
