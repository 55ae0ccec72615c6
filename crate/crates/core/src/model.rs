//! Aperture geometry and array-factor evaluation.
//!
//! A reflecting aperture is a 1-D lattice of `M` elements at centered positions
//! `x_m = ((M-1)/2 - m)·d`. Under plane-wave incidence from `θ_I` the response
//! toward departure angle `θ_T` is the phasor sum
//!
//! ```text
//! p(θ_T, θ_I) = Σ_m c_m · exp(-j k x_m (sin θ_T + sin θ_I))
//! ```
//!
//! where `c_m` are the per-element reflection coefficients. Angles cross the
//! public API in degrees; reflection-side departures are negative, so the
//! specular direction is `θ_T = -θ_I`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// dB value written for zero (or vanishing) power.
pub const GAIN_FLOOR_DB: f64 = -60.0;

/// Default departure-angle sweep: -90° to +90° in 0.5° steps.
pub const DEFAULT_GRID: (f64, f64, f64) = (-90.0, 90.0, 0.5);

/// Denominator threshold below which the Dirichlet kernel takes its limit.
const DIRICHLET_EPS: f64 = 1e-12;

pub(crate) fn sin_deg(deg: f64) -> f64 {
    deg.to_radians().sin()
}

/// Power ratio to dB, clamped at [`GAIN_FLOOR_DB`].
pub fn power_to_db(gain: f64) -> f64 {
    if gain > 0.0 {
        (10.0 * gain.log10()).max(GAIN_FLOOR_DB)
    } else {
        GAIN_FLOOR_DB
    }
}

pub(crate) fn check_angle(name: &str, deg: f64) -> Result<()> {
    if !deg.is_finite() || deg.abs() > 90.0 {
        return Err(Error::invalid(format!(
            "{name} must be a finite angle in [-90, 90] degrees, got {deg}"
        )));
    }
    Ok(())
}

/// Centered element coordinates in meters.
pub fn element_positions(element_count: usize, spacing: f64) -> Result<Vec<f64>> {
    if element_count == 0 {
        return Err(Error::invalid("element count must be at least 1"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!(
            "element spacing must be positive, got {spacing}"
        )));
    }
    let half = (element_count - 1) as f64 / 2.0;
    Ok((0..element_count)
        .map(|m| (half - m as f64) * spacing)
        .collect())
}

/// Uniform linear lattice of reflecting elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Aperture {
    spacing: f64,
    wavelength: f64,
    positions: Vec<f64>,
}

impl Aperture {
    pub fn new(element_count: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        let positions = element_positions(element_count, spacing)?;
        Ok(Aperture {
            spacing,
            wavelength,
            positions,
        })
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Free-space wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Inter-element phase step `k·d·(sin θ_T + sin θ_I)` in radians.
    pub fn phase_increment(&self, theta_i_deg: f64, theta_t_deg: f64) -> f64 {
        self.wavenumber() * self.spacing * (sin_deg(theta_t_deg) + sin_deg(theta_i_deg))
    }

    /// Phasor sum for an arbitrary sine-sum `u = sin θ_T + sin θ_I`.
    pub(crate) fn response_at(&self, values: &[Complex64], sine_sum: f64) -> Complex64 {
        let k = self.wavenumber();
        self.positions
            .iter()
            .zip(values)
            .map(|(&x, &c)| c * Complex64::from_polar(1.0, -k * x * sine_sum))
            .sum()
    }
}

/// Which alphabet a set of reflection coefficients is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    /// ON/OFF metallization, values in {0, 1}.
    Binary,
    /// 1-bit phase control, values in {-1, +1}.
    Bipolar,
    /// Ideal phase-only control, unit modulus.
    Continuous,
    /// Arbitrary passive element, |v| ≤ 1 (e.g. a calibrated ON state ρ_m·b_m).
    Complex,
    /// Unconstrained per-element weights scaled so that Σ|v|² = M.
    Normalized,
}

/// Diagonal of the scattering matrix, one complex coefficient per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionCoefficients {
    kind: CoefficientKind,
    values: Vec<Complex64>,
}

impl ReflectionCoefficients {
    pub fn from_bits(bits: &[bool]) -> Self {
        let values = bits
            .iter()
            .map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0))
            .collect();
        ReflectionCoefficients {
            kind: CoefficientKind::Binary,
            values,
        }
    }

    pub fn all_on(element_count: usize) -> Self {
        Self::from_bits(&vec![true; element_count])
    }

    /// Bipolar weights from signs; `true` is +1.
    pub fn from_signs(positive: &[bool]) -> Self {
        let values = positive
            .iter()
            .map(|&p| Complex64::new(if p { 1.0 } else { -1.0 }, 0.0))
            .collect();
        ReflectionCoefficients {
            kind: CoefficientKind::Bipolar,
            values,
        }
    }

    /// Unit-modulus coefficients `e^{jφ_m}`.
    pub fn from_phases(phases: &[f64]) -> Self {
        ReflectionCoefficients {
            kind: CoefficientKind::Continuous,
            values: phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
        }
    }

    /// Non-ideal ON state: `ρ_m·b_m` with user-supplied element responses.
    pub fn with_element_response(bits: &[bool], rho: &[Complex64]) -> Result<Self> {
        if bits.len() != rho.len() {
            return Err(Error::invalid(format!(
                "{} mask bits but {} element responses",
                bits.len(),
                rho.len()
            )));
        }
        let values = bits
            .iter()
            .zip(rho)
            .map(|(&b, &r)| if b { r } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self::new(CoefficientKind::Complex, values)
    }

    /// Validating constructor for any kind.
    pub fn new(kind: CoefficientKind, values: Vec<Complex64>) -> Result<Self> {
        let bad = |i: usize, what: &str| {
            Err(Error::invalid(format!(
                "coefficient {i} = {} violates the {what} constraint",
                values[i]
            )))
        };
        match kind {
            CoefficientKind::Binary => {
                if let Some(i) = values
                    .iter()
                    .position(|v| v.im != 0.0 || (v.re != 0.0 && v.re != 1.0))
                {
                    return bad(i, "binary {0, 1}");
                }
            }
            CoefficientKind::Bipolar => {
                if let Some(i) = values.iter().position(|v| v.im != 0.0 || v.re.abs() != 1.0) {
                    return bad(i, "bipolar {-1, +1}");
                }
            }
            CoefficientKind::Continuous => {
                if let Some(i) = values.iter().position(|v| (v.norm() - 1.0).abs() > 1e-12) {
                    return bad(i, "unit-modulus");
                }
            }
            CoefficientKind::Complex => {
                if let Some(i) = values
                    .iter()
                    .position(|v| !v.is_finite() || v.norm() > 1.0 + 1e-12)
                {
                    return bad(i, "passive |v| <= 1");
                }
            }
            CoefficientKind::Normalized => {
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return bad(i, "finite");
                }
                let energy: f64 = values.iter().map(|v| v.norm_sqr()).sum();
                let m = values.len() as f64;
                if (energy - m).abs() > 1e-9 * m.max(1.0) {
                    return Err(Error::invalid(format!(
                        "normalized coefficients must satisfy sum |v|^2 = M = {m}, got {energy}"
                    )));
                }
            }
        }
        Ok(ReflectionCoefficients { kind, values })
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ON/OFF states, only for binary coefficients.
    pub fn bits(&self) -> Option<Vec<bool>> {
        (self.kind == CoefficientKind::Binary).then(|| self.values.iter().map(|v| v.re == 1.0).collect())
    }
}

fn check_len(aperture: &Aperture, coeffs: &ReflectionCoefficients) -> Result<()> {
    if coeffs.len() != aperture.element_count() {
        return Err(Error::invalid(format!(
            "aperture has {} elements but {} coefficients were given",
            aperture.element_count(),
            coeffs.len()
        )));
    }
    Ok(())
}

/// Complex response `p(θ_T, θ_I)` of the aperture.
pub fn array_factor(
    aperture: &Aperture,
    coeffs: &ReflectionCoefficients,
    theta_t_deg: f64,
    theta_i_deg: f64,
) -> Result<Complex64> {
    check_angle("departure angle", theta_t_deg)?;
    check_angle("incidence angle", theta_i_deg)?;
    check_len(aperture, coeffs)?;
    let u = sin_deg(theta_t_deg) + sin_deg(theta_i_deg);
    Ok(aperture.response_at(coeffs.values(), u))
}

/// Normalized power gain `|p|²/M²`.
pub fn normalized_gain(
    aperture: &Aperture,
    coeffs: &ReflectionCoefficients,
    theta_t_deg: f64,
    theta_i_deg: f64,
) -> Result<f64> {
    let p = array_factor(aperture, coeffs, theta_t_deg, theta_i_deg)?;
    let m = aperture.element_count() as f64;
    Ok(p.norm_sqr() / (m * m))
}

/// Closed-form response of an all-ON uniform aperture with period `delta`.
///
/// With centered positions the sum is the real Dirichlet kernel
/// `sin(Mx/2) / sin(x/2)`, `x = δ(k_I + k_T)`. The half-angle is reduced by
/// the nearest multiple of π before evaluation so that the kernel stays
/// accurate next to its removable singularities, where the value is
/// `M·(-1)^{n(M-1)}`.
pub fn uniform_closed_form(
    element_count: usize,
    delta: f64,
    wavelength: f64,
    theta_t_deg: f64,
    theta_i_deg: f64,
) -> Result<Complex64> {
    // Reuse the aperture validation for M, δ and λ.
    let aperture = Aperture::new(element_count, delta, wavelength)?;
    check_angle("departure angle", theta_t_deg)?;
    check_angle("incidence angle", theta_i_deg)?;
    let x = aperture.phase_increment(theta_i_deg, theta_t_deg);
    Ok(Complex64::new(dirichlet(element_count, x), 0.0))
}

fn dirichlet(m: usize, x: f64) -> f64 {
    let half = x / 2.0;
    let n = (half / PI).round();
    let r = half - n * PI;
    // sin(x/2) = (-1)^n sin r and sin(Mx/2) = (-1)^{Mn} sin(Mr)
    let odd = (n as i64 * (m as i64 - 1)).rem_euclid(2) == 1;
    let sign = if odd { -1.0 } else { 1.0 };
    let den = r.sin();
    if den.abs() < DIRICHLET_EPS {
        sign * m as f64
    } else {
        sign * (m as f64 * r).sin() / den
    }
}

/// Strictly increasing list of departure angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid(Vec<f64>);

impl AngleGrid {
    /// Inclusive range `min, min+step, …, max`.
    pub fn range(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("grid step must be positive, got {step}")));
        }
        if !(min <= max) {
            return Err(Error::invalid(format!("grid start {min} exceeds end {max}")));
        }
        let n = ((max - min) / step + 1e-9).floor() as usize;
        let angles = (0..=n).map(|i| min + i as f64 * step).collect();
        Self::from_angles(angles)
    }

    pub fn from_angles(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("angle grid is empty"));
        }
        for &a in &angles {
            check_angle("grid angle", a)?;
        }
        if let Some(w) = angles.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "angle grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(AngleGrid(angles))
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }
}

impl Default for AngleGrid {
    fn default() -> Self {
        let (lo, hi, step) = DEFAULT_GRID;
        AngleGrid::range(lo, hi, step).expect("default grid is valid")
    }
}

/// Sampled response over a departure-angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularPattern {
    theta_grid: Vec<f64>,
    response: Vec<Complex64>,
    gain: Vec<f64>,
    incidence_deg: f64,
    element_count: usize,
}

impl AngularPattern {
    /// Assembles a pattern from a complex response; gains are derived.
    pub fn from_response(
        grid: AngleGrid,
        response: Vec<Complex64>,
        incidence_deg: f64,
        element_count: usize,
    ) -> Result<Self> {
        if response.len() != grid.0.len() {
            return Err(Error::invalid("response length does not match the grid"));
        }
        if element_count == 0 {
            return Err(Error::invalid("element count must be at least 1"));
        }
        let m2 = (element_count * element_count) as f64;
        let gain = response.iter().map(|p| p.norm_sqr() / m2).collect();
        Ok(AngularPattern {
            theta_grid: grid.0,
            response,
            gain,
            incidence_deg,
            element_count,
        })
    }

    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    pub fn complex_response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn normalized_gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn incidence_deg(&self) -> f64 {
        self.incidence_deg
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn gain_db(&self) -> Vec<f64> {
        self.gain.iter().map(|&g| power_to_db(g)).collect()
    }

    pub fn len(&self) -> usize {
        self.theta_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_grid.is_empty()
    }

    /// Index and angle of the largest gain (first one on ties).
    pub fn peak(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, &g) in self.gain.iter().enumerate() {
            if g > self.gain[best] {
                best = i;
            }
        }
        (best, self.theta_grid[best])
    }

    /// Index of the grid angle closest to `deg`.
    pub fn nearest_index(&self, deg: f64) -> usize {
        let mut best = 0;
        for (i, &t) in self.theta_grid.iter().enumerate() {
            if (t - deg).abs() < (self.theta_grid[best] - deg).abs() {
                best = i;
            }
        }
        best
    }

    /// Angular extent of the lobe containing `near_deg`.
    ///
    /// Climbs from the nearest grid sample to the local maximum, then walks
    /// down each flank to the adjacent local minimum. Returns the angles of
    /// the two minima (null to null).
    pub fn lobe_window(&self, near_deg: f64) -> (f64, f64) {
        let g = &self.gain;
        let mut i = self.nearest_index(near_deg);
        while i + 1 < g.len() && g[i + 1] > g[i] {
            i += 1;
        }
        while i > 0 && g[i - 1] > g[i] {
            i -= 1;
        }
        let mut lo = i;
        while lo > 0 && g[lo - 1] < g[lo] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < g.len() && g[hi + 1] < g[hi] {
            hi += 1;
        }
        (self.theta_grid[lo], self.theta_grid[hi])
    }

    /// CSV with header `theta_deg,re,im,gain_linear,gain_db`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::invalid(format!("CSV write failed: {e}"));
        w.write_record(["theta_deg", "re", "im", "gain_linear", "gain_db"])
            .map_err(io)?;
        for i in 0..self.len() {
            let p = self.response[i];
            w.write_record([
                self.theta_grid[i].to_string(),
                p.re.to_string(),
                p.im.to_string(),
                self.gain[i].to_string(),
                power_to_db(self.gain[i]).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("CSV write failed: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e {
            Error::Invalid(msg) => Error::io(path, std::io::Error::other(msg)),
            other => other,
        })
    }

    /// Reads a pattern CSV written by [`AngularPattern::write_csv`].
    ///
    /// The file does not record `M` or the incidence angle, so the caller
    /// supplies them; gains are recomputed from the complex columns.
    pub fn read_csv<R: Read>(
        input: R,
        source: &str,
        incidence_deg: f64,
        element_count: usize,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(source, 1, e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| parse_err(source, 1, format!("missing column `{name}`")))
        };
        let (ct, cre, cim) = (col("theta_deg")?, col("re")?, col("im")?);
        let mut thetas = Vec::new();
        let mut response = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(source, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |c: usize| -> Result<f64> {
                let field = rec.get(c).unwrap_or("").trim();
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(source, line, format!("not a number: `{field}`")))
            };
            thetas.push(num(ct)?);
            response.push(Complex64::new(num(cre)?, num(cim)?));
        }
        let grid = AngleGrid::from_angles(thetas).map_err(|e| parse_err(source, 0, e.to_string()))?;
        AngularPattern::from_response(grid, response, incidence_deg, element_count)
    }
}

pub(crate) fn parse_err(source: &str, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Evaluates the array factor over a grid of departure angles.
///
/// Each angle is computed independently, so the parallel evaluation is
/// bit-identical to a sequential loop.
pub fn pattern_sweep(
    aperture: &Aperture,
    coeffs: &ReflectionCoefficients,
    theta_i_deg: f64,
    grid: &AngleGrid,
) -> Result<AngularPattern> {
    check_angle("incidence angle", theta_i_deg)?;
    check_len(aperture, coeffs)?;
    let sin_i = sin_deg(theta_i_deg);
    let response: Vec<Complex64> = grid
        .angles()
        .par_iter()
        .map(|&t| aperture.response_at(coeffs.values(), sin_deg(t) + sin_i))
        .collect();
    AngularPattern::from_response(grid.clone(), response, theta_i_deg, aperture.element_count())
}

/// Highest gain outside the exclusion windows relative to the global peak, in dB.
///
/// Windows are inclusive `(lo, hi)` angle intervals in degrees. A pattern
/// whose remaining samples are all zero returns `-inf`.
pub fn peak_to_sidelobe(pattern: &AngularPattern, exclusion_windows: &[(f64, f64)]) -> Result<f64> {
    if pattern.is_empty() {
        return Err(Error::invalid("pattern is empty"));
    }
    if let Some(&(lo, hi)) = exclusion_windows.iter().find(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::invalid(format!("exclusion window ({lo}, {hi}) is reversed")));
    }
    let excluded = |t: f64| exclusion_windows.iter().any(|&(lo, hi)| t >= lo && t <= hi);
    let side = pattern
        .theta_grid()
        .iter()
        .zip(pattern.normalized_gain())
        .filter(|(&t, _)| !excluded(t))
        .map(|(_, &g)| g)
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
    let Some(side) = side else {
        return Err(Error::invalid("exclusion windows cover the whole grid"));
    };
    let (ipk, _) = pattern.peak();
    let peak = pattern.normalized_gain()[ipk];
    if peak <= 0.0 {
        return Err(Error::invalid("pattern has no power"));
    }
    Ok(10.0 * (side / peak).log10())
}
