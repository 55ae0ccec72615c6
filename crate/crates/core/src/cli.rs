//! `reflector` command-line interface.
//!
//! Lengths on the command line are millimeters; files store meters.
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{thinning_convergence, verify_gain_bound};
use crate::diffraction::{multibeam_period_check, PeriodDesign};
use crate::error::{Error, Result};
use crate::fab::{build_layout, export_stl, layout_report, stripe_mask_2d, LayoutDims};
use crate::figures::{reproduce, FigureId};
use crate::maskfile::MaskFile;
use crate::measure::{background_subtract, compare, load_scan_file, normalize_pattern, NormalizedPattern};
use crate::model::{normalized_gain, pattern_sweep, power_to_db, AngleGrid, AngularPattern, Aperture, ReflectionCoefficients, GAIN_FLOOR_DB};
use crate::synthesis::{on_count, select_psi, synthesize_mask, thinning_ratio, SteeringTask};

const MM: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "reflector", version, about = "Design and verify passive binary-coded mmWave reflectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a cosine-threshold ON/OFF mask and write it as JSON.
    DesignMask(DesignMask),
    /// Choose a uniform period that places a diffraction order on the target.
    DesignPeriod(DesignPeriod),
    /// Sweep the far-field pattern of a mask file.
    Simulate(Simulate),
    /// Certify the 1/pi^2 gain bound on seeded random geometries.
    VerifyBounds(VerifyBounds),
    /// Thinning ratio of the psi = 0 mask against aperture size.
    Thinning(Thinning),
    /// Write base, pad and stencil STL files for a mask.
    ExportStl(ExportStl),
    /// Normalize a measured scan and score it against a simulated pattern.
    Compare(Compare),
    /// Write the theory CSV of a reference figure.
    ReproduceFigure(ReproduceFigure),
}

#[derive(Debug, Args)]
struct Geometry {
    /// Element spacing, mm.
    #[arg(long, default_value_t = 2.5)]
    d0_mm: f64,
    /// Wavelength, mm.
    #[arg(long, default_value_t = 5.0)]
    lambda_mm: f64,
}

#[derive(Debug, Args)]
struct DesignMask {
    /// Incidence angle, degrees.
    #[arg(long, allow_negative_numbers = true)]
    theta_i: f64,
    /// Target departure angle, degrees (repeat for several beams).
    #[arg(long = "target", required = true, allow_negative_numbers = true)]
    targets: Vec<f64>,
    #[arg(long, default_value_t = 35)]
    m: usize,
    #[command(flatten)]
    geometry: Geometry,
    /// Phase offset psi, radians in [0, 2pi).
    #[arg(long, default_value_t = 0.0, conflicts_with = "psi_grid")]
    psi: f64,
    /// Pick psi from a K-point grid maximizing the weakest target.
    #[arg(long)]
    psi_grid: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DesignPeriod {
    #[arg(long, allow_negative_numbers = true)]
    theta_i: f64,
    #[arg(long, allow_negative_numbers = true)]
    target: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda_mm: f64,
    /// Diffraction order placed on the target; defaults to +-1.
    #[arg(long, allow_negative_numbers = true)]
    order: Option<i32>,
    /// Snap to a scaffold of this pitch, mm.
    #[arg(long)]
    pitch_mm: Option<f64>,
    /// Wells per scaffold row.
    #[arg(long, default_value_t = 35)]
    wells: usize,
    /// Extra target to test against the visible orders (repeatable).
    #[arg(long = "check", allow_negative_numbers = true)]
    checks: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    tol_deg: f64,
    /// Write the snapped stride as a mask file (pitch defaults to 2.5 mm).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Sweep {
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    theta_min: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    theta_max: f64,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
}

impl Sweep {
    fn grid(&self) -> Result<AngleGrid> {
        AngleGrid::range(self.theta_min, self.theta_max, self.step)
    }
}

#[derive(Debug, Args)]
struct Simulate {
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    sweep: Sweep,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyBounds {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    m_min: usize,
    #[arg(long, default_value_t = 14)]
    m_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Thinning {
    #[arg(long, allow_negative_numbers = true)]
    theta_i: f64,
    #[arg(long, allow_negative_numbers = true)]
    target: f64,
    #[command(flatten)]
    geometry: Geometry,
    /// Sweep M = 1..=m_max.
    #[arg(long, default_value_t = 200)]
    m_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportStl {
    /// Mask file; omit with --all-on.
    #[arg(long, required_unless_present = "all_on")]
    mask: Option<PathBuf>,
    /// Metallize every well.
    #[arg(long, conflicts_with = "mask")]
    all_on: bool,
    #[arg(long, default_value_t = 35)]
    rows: usize,
    #[arg(long, default_value_t = 35)]
    cols: usize,
    /// Override the scaffold pitch, mm.
    #[arg(long)]
    pitch_mm: Option<f64>,
    #[arg(long)]
    side_mm: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct Compare {
    /// Reflector scan, `theta_deg,power_dbm`.
    #[arg(long, requires = "mount", required_unless_present = "measured_db")]
    meas: Option<PathBuf>,
    /// Mount-only background scan.
    #[arg(long)]
    mount: Option<PathBuf>,
    /// Already normalized pattern with `theta_deg,gain_db` columns.
    #[arg(long, conflicts_with = "meas")]
    measured_db: Option<PathBuf>,
    /// Simulated pattern CSV.
    #[arg(long)]
    theory: PathBuf,
    #[arg(long = "target", required = true, allow_negative_numbers = true)]
    targets: Vec<f64>,
    #[arg(long, default_value_t = GAIN_FLOOR_DB, allow_negative_numbers = true)]
    floor_db: f64,
    /// Write the normalized measured pattern.
    #[arg(long)]
    normalized_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceFigure {
    /// fig2a, fig2b, fig3, fig5, fig6, fig7a or fig7b.
    figure: String,
    #[command(flatten)]
    sweep: Sweep,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::DesignMask(a) => design_mask(a, out),
        Command::DesignPeriod(a) => design_period(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::VerifyBounds(a) => verify_bounds(a, out),
        Command::Thinning(a) => thinning(a, out),
        Command::ExportStl(a) => export(a, out),
        Command::Compare(a) => compare_cmd(a, out),
        Command::ReproduceFigure(a) => reproduce_figure(a, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::io("<stdout>", e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { say($out, format_args!($($arg)*)) };
}

fn write_text(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn design_mask(a: DesignMask, out: &mut dyn Write) -> Result<()> {
    let ap = Aperture::new(a.m, a.geometry.d0_mm * MM, a.geometry.lambda_mm * MM)?;
    let mut task = SteeringTask::equal_weights(a.theta_i, &a.targets)?.with_psi(a.psi)?;
    if let Some(k) = a.psi_grid {
        let (psi, _) = select_psi(&ap, &task, k)?;
        task = task.with_psi(psi)?;
    }
    let mask = synthesize_mask(&ap, &task)?;
    MaskFile::from_design(&ap, &task, &mask)?.save(&a.out)?;
    say!(out, "M = {}, psi = {:.6} rad", a.m, task.psi())?;
    say!(out, "eta_M = {:.6} ({} of {} ON)", thinning_ratio(&mask)?, on_count(&mask)?, a.m)?;
    for t in task.targets() {
        let g = normalized_gain(&ap, &mask, t.theta_deg, a.theta_i)?;
        say!(out, "gain at {:+.2} deg: {:.3} dB", t.theta_deg, power_to_db(g))?;
    }
    say!(out, "wrote {}", a.out.display())
}

fn design_period(a: DesignPeriod, out: &mut dyn Write) -> Result<()> {
    let lambda = a.lambda_mm * MM;
    let mut design = match a.order {
        Some(n) => PeriodDesign::new(a.theta_i, a.target, lambda, n)?,
        None => PeriodDesign::first_order(a.theta_i, a.target, lambda)?,
    };
    let pitch = a.pitch_mm.or(a.out.as_ref().map(|_| 2.5)).map(|p| p * MM);
    if let Some(p) = pitch {
        design = design.snap(p, a.wells)?;
    }
    say!(out, "order n = {}", design.order)?;
    say!(out, "delta = {:.4} mm", design.period / MM)?;
    let orders = design.visible_orders()?;
    say!(out, "visible orders n = {}..{} ({} total)", orders.n_min, orders.n_max, orders.count())?;
    for (n, t) in &orders.directions {
        say!(out, "  n = {n:+}: {t:+.3} deg")?;
    }
    if let Some(s) = design.snapped {
        say!(
            out,
            "snapped: stride {} ({:.3} mm), {} active of {} wells",
            s.stride,
            s.delta_actual / MM,
            s.m_active,
            a.wells
        )?;
    }
    for c in multibeam_period_check(&design, &a.checks, a.tol_deg)? {
        say!(
            out,
            "target {:+.2} deg: {} (nearest n = {:+}, {:+.3} deg)",
            c.target_deg,
            if c.covered { "covered" } else { "not covered" },
            c.nearest_order,
            c.nearest_deg
        )?;
    }
    if let (Some(path), Some(p)) = (&a.out, pitch) {
        MaskFile::from_period(&design, p, a.wells)?.save(path)?;
        say!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn simulate(a: Simulate, out: &mut dyn Write) -> Result<()> {
    let file = MaskFile::load(&a.mask)?;
    let ap = file.aperture()?;
    let pattern = pattern_sweep(&ap, &file.coefficients()?, file.theta_i_deg, &a.sweep.grid()?)?;
    pattern.save_csv(&a.out)?;
    let (i, theta) = pattern.peak();
    say!(out, "peak {:.3} dB at {:+.2} deg", power_to_db(pattern.normalized_gain()[i]), theta)?;
    say!(out, "wrote {}", a.out.display())
}

fn verify_bounds(a: VerifyBounds, out: &mut dyn Write) -> Result<()> {
    let report = verify_gain_bound(a.trials, a.m_min, a.m_max, a.seed)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(path) = &a.out {
        write_text(path, &json)?;
    }
    say!(out, "trials = {}, M in [{}, {}], seed = {}", report.trials, report.m_min, report.m_max, report.seed)?;
    say!(out, "min gamma* = {:.6} (bound 1/pi^2 = {:.6})", report.min_gamma_star, report.bound)?;
    say!(out, "violations = {}", report.violations)?;
    if report.violations > 0 {
        return Err(Error::invalid(format!("{} trials fell below the bound", report.violations)));
    }
    Ok(())
}

fn thinning(a: Thinning, out: &mut dyn Write) -> Result<()> {
    if a.m_max == 0 {
        return Err(Error::invalid("m-max must be at least 1"));
    }
    let ms: Vec<usize> = (1..=a.m_max).collect();
    let rows = thinning_convergence(a.theta_i, a.target, a.geometry.d0_mm * MM, a.geometry.lambda_mm * MM, &ms)?;
    let mut text = String::from("M,eta\n");
    for (m, eta) in &rows {
        text += &format!("{m},{eta}\n");
    }
    match &a.out {
        Some(path) => {
            write_text(path, &text)?;
            let (m, eta) = rows[rows.len() - 1];
            say!(out, "eta at M = {m}: {eta:.6}")?;
            say!(out, "wrote {}", path.display())
        }
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn export(a: ExportStl, out: &mut dyn Write) -> Result<()> {
    let mut dims = LayoutDims::default();
    if let Some(p) = a.pitch_mm {
        dims.pitch = p * MM;
    }
    if let Some(s) = a.side_mm {
        dims.aperture_side = s * MM;
    }
    let grid = match &a.mask {
        Some(path) => stripe_mask_2d(&MaskFile::load(path)?.coefficients()?, a.rows)?,
        None => stripe_mask_2d(&ReflectionCoefficients::all_on(a.cols), a.rows)?,
    };
    let layout = build_layout(grid, dims)?;
    let files = export_stl(&layout, &a.out_dir)?;
    let report = layout_report(&layout);
    write_text(&a.out_dir.join("layout.txt"), &report)?;
    out.write_all(report.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    say!(
        out,
        "wrote {} ({} triangles), {} ({}), {} ({})",
        files.base.display(),
        files.triangles[0],
        files.pads.display(),
        files.triangles[1],
        files.stencil.display(),
        files.triangles[2]
    )
}

fn compare_cmd(a: Compare, out: &mut dyn Write) -> Result<()> {
    let measured = match (&a.meas, &a.mount, &a.measured_db) {
        (Some(m), Some(b), _) => {
            let lin = background_subtract(&load_scan_file(m)?, &load_scan_file(b)?)?;
            normalize_pattern(&lin)?
        }
        (_, _, Some(path)) => NormalizedPattern::read_file(path)?,
        _ => return Err(Error::invalid("give --meas with --mount, or --measured-db")),
    };
    if let Some(path) = &a.normalized_out {
        measured.save_csv(path)?;
    }
    let file = std::fs::File::open(&a.theory).map_err(|e| Error::io(&a.theory, e))?;
    // Theory is re-referenced to its own peak, so M and incidence do not matter here.
    let theory = AngularPattern::read_csv(std::io::BufReader::new(file), &a.theory.display().to_string(), 0.0, 1)?;
    let report = compare(&measured, &theory, &a.targets, a.floor_db)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    for t in &report.targets {
        match (t.angle_err_deg, t.level_err_db) {
            (Some(da), Some(dl)) => say!(out, "target {:+.2} deg: angle error {:+.2} deg, level error {:+.2} dB", t.theta, da, dl)?,
            _ => say!(out, "target {:+.2} deg: beam missing", t.theta)?,
        }
    }
    match report.rms_db {
        Some(r) => say!(out, "rms above {:.1} dB floor: {:.3} dB", a.floor_db, r)?,
        None => say!(out, "no samples above the {:.1} dB floor", a.floor_db)?,
    }
    if let Some(path) = &a.out {
        write_text(path, &json)?;
        say!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn reproduce_figure(a: ReproduceFigure, out: &mut dyn Write) -> Result<()> {
    let id: FigureId = a.figure.parse()?;
    let table = reproduce(id, &a.sweep.grid()?)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let path = a.out_dir.join(format!("{id}.csv"));
    table.save_csv(&path)?;
    say!(out, "wrote {} ({} rows)", path.display(), table.rows.len())
}
