//! JSON mask file shared by synthesis, simulation and fabrication.
//!
//! ```json
//! {"version":1,"M":35,"d0_m":0.0025,"lambda_m":0.005,"theta_i_deg":45.0,
//!  "targets":[{"theta_deg":-10.0,"weight_re":1.0,"weight_im":0.0}],
//!  "psi_rad":0.0,"bits":"1100..."}
//! ```
//! `bits[m]` is element `m`, with positions decreasing in `m`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffraction::{stride_bits, PeriodDesign};
use crate::error::{Error, Result};
use crate::model::{Aperture, ReflectionCoefficients};
use crate::synthesis::{SteeringTask, Target};

pub const MASK_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub theta_deg: f64,
    pub weight_re: f64,
    pub weight_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub version: u32,
    #[serde(rename = "M")]
    pub m: usize,
    pub d0_m: f64,
    pub lambda_m: f64,
    pub theta_i_deg: f64,
    pub targets: Vec<TargetEntry>,
    pub psi_rad: f64,
    pub bits: String,
}

fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl MaskFile {
    /// Records a synthesized binary mask with its design inputs.
    pub fn from_design(aperture: &Aperture, task: &SteeringTask, mask: &ReflectionCoefficients) -> Result<Self> {
        let bits = mask
            .bits()
            .ok_or_else(|| Error::invalid("mask files hold binary masks only"))?;
        if bits.len() != aperture.element_count() {
            return Err(Error::invalid("mask length does not match the aperture"));
        }
        Ok(MaskFile {
            version: MASK_FILE_VERSION,
            m: bits.len(),
            d0_m: aperture.spacing(),
            lambda_m: aperture.wavelength(),
            theta_i_deg: task.incidence_deg(),
            targets: task
                .targets()
                .iter()
                .map(|t| TargetEntry {
                    theta_deg: t.theta_deg,
                    weight_re: t.weight.re,
                    weight_im: t.weight.im,
                })
                .collect(),
            psi_rad: task.psi(),
            bits: bit_string(&bits),
        })
    }

    /// Expands a snapped period design into ON wells `0, p, 2p, …` of a row.
    pub fn from_period(design: &PeriodDesign, pitch: f64, wells_per_row: usize) -> Result<Self> {
        let snap = match design.snapped {
            Some(s) => s,
            None => design.clone().snap(pitch, wells_per_row)?.snapped.expect("just snapped"),
        };
        Ok(MaskFile {
            version: MASK_FILE_VERSION,
            m: wells_per_row,
            d0_m: pitch,
            lambda_m: design.wavelength,
            theta_i_deg: design.theta_i_deg,
            targets: vec![TargetEntry {
                theta_deg: design.theta_t_deg,
                weight_re: 1.0,
                weight_im: 0.0,
            }],
            psi_rad: 0.0,
            bits: bit_string(&stride_bits(snap.stride, wells_per_row)),
        })
    }

    /// Checks the schema and decodes the bits.
    pub fn bits(&self) -> Result<Vec<bool>> {
        if self.version != MASK_FILE_VERSION {
            return Err(Error::invalid(format!(
                "unsupported mask file version {} (expected {MASK_FILE_VERSION})",
                self.version
            )));
        }
        let bits: Vec<bool> = self
            .bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bit string contains `{other}`"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != self.m {
            return Err(Error::invalid(format!(
                "bit string has {} characters but M = {}",
                bits.len(),
                self.m
            )));
        }
        Ok(bits)
    }

    pub fn aperture(&self) -> Result<Aperture> {
        Aperture::new(self.m, self.d0_m, self.lambda_m)
    }

    pub fn coefficients(&self) -> Result<ReflectionCoefficients> {
        Ok(ReflectionCoefficients::from_bits(&self.bits()?))
    }

    pub fn task(&self) -> Result<SteeringTask> {
        let targets = self
            .targets
            .iter()
            .map(|t| Target {
                theta_deg: t.theta_deg,
                weight: Complex64::new(t.weight_re, t.weight_im),
            })
            .collect();
        SteeringTask::new(self.theta_i_deg, targets, self.psi_rad)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mask file serializes") + "\n"
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let file: MaskFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        file.bits()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::synthesize_mask;

    #[test]
    fn design_round_trip() {
        let ap = Aperture::new(35, 2.5e-3, 5e-3).unwrap();
        let task = SteeringTask::single(45.0, -10.0).unwrap();
        let mask = synthesize_mask(&ap, &task).unwrap();
        let file = MaskFile::from_design(&ap, &task, &mask).unwrap();
        let text = file.to_json();
        assert!(text.contains("\"M\": 35"));
        let back = MaskFile::from_json(&text, "m.json").unwrap();
        assert_eq!(back, file);
        assert_eq!(back.coefficients().unwrap(), mask);
        assert_eq!(back.task().unwrap(), task);
        assert_eq!(back.aperture().unwrap(), ap);
    }

    #[test]
    fn period_expands_to_stride() {
        let d = PeriodDesign::new(45.0, -10.0, 5e-3, 1).unwrap();
        let f = MaskFile::from_period(&d, 2.5e-3, 35).unwrap();
        assert_eq!(f.bits.matches('1').count(), 9);
        assert!(f.bits.starts_with("10001"));
    }

    #[test]
    fn schema_errors() {
        let mut f = MaskFile::from_period(&PeriodDesign::new(45.0, -10.0, 5e-3, 1).unwrap(), 2.5e-3, 35).unwrap();
        f.bits.pop();
        assert!(f.bits().is_err());
        f.bits.push('x');
        assert!(f.bits().is_err());
        assert!(MaskFile::from_json("{\"version\": 1}", "x.json").is_err());
    }
}
