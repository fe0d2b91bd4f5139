//! Command-line front end. Exit codes: 0 pass, 1 input or runtime error,
//! 2 design-quality failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::factorization::{assemble_sensitivity, compute_up, default_stability_window};
use crate::quasipoly::DelayRational;
use crate::scenario::Scenario;
use crate::simulator::{simulate_closed_loop, suppression_summary};
use crate::spectrum::{
    check_completeness, find_roots, sensitivity_spectrum, RegionSpec, Root, RootKind, RootSet,
    SpectrumWarning,
};
use crate::synthesis::{verify_regulation, DesignResult, DEFAULT_REGULATION_TOL};
use crate::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_QUALITY: i32 = 2;

/// Right-half window searched for closed-loop roots by `verify`.
pub const CLOSED_LOOP_WINDOW: [f64; 4] = [0.0, 10.0, -1.0, 200.0];

#[derive(Parser, Debug)]
#[command(
    name = "ykreg",
    version,
    about = "Periodic regulation of time-delay systems with a lumped-delay Youla-Kucera parameter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file, or one of the presets example1, example2, example3
    scenario: String,
    /// Output path (default depends on the command)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pass threshold on |S| at the targeted harmonics
    #[arg(long, default_value_t = DEFAULT_REGULATION_TOL)]
    tol: f64,
    /// Continue despite root-finder grid warnings
    #[arg(long)]
    force: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Zeros,
    Poles,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the parameter gains and check the sensitivity at the harmonics
    Design(Common),
    /// Sensitivity zeros and poles in the scenario's region as CSV
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Kind::Both)]
        kind: Kind,
    },
    /// Closed-loop time response as CSV with a suppression summary
    Simulate(Common),
    /// Frequency response of the designed sensitivity as CSV
    Freqresp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        wmin: f64,
        #[arg(long, default_value_t = 100.0)]
        wmax: f64,
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Properness, factor stability, closed-loop stability and regulation checks
    Verify(Common),
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// Seventeen significant digits.
fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_ERROR,
            message: format!("i/o error: {e}"),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ERROR,
        message: message.into(),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    return EXIT_PASS;
                }
                _ => EXIT_ERROR,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    if !(common.tol > 0.0 && common.tol.is_finite()) {
        return Err(input_error(format!("--tol must be positive, got {}", common.tol)));
    }
    Scenario::load(&common.scenario).map_err(|e| input_error(format!("{}: {e}", common.scenario)))
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Design(c) => cmd_design(&c, stdout),
        Command::Spectrum { common, kind } => cmd_spectrum(&common, kind, stdout, stderr),
        Command::Simulate(c) => cmd_simulate(&c, stdout, stderr),
        Command::Freqresp {
            common,
            wmin,
            wmax,
            points,
        } => cmd_freqresp(&common, wmin, wmax, points, stdout),
        Command::Verify(c) => cmd_verify(&c, stdout),
    }
}

/// Writes to `--out` when given, else to `stdout`.
fn with_output(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => body(stdout)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct HarmonicEntry {
    omega: f64,
    abs_s: f64,
}

#[derive(Serialize)]
struct DesignReport<'a> {
    scenario: &'a str,
    spacing: f64,
    count: usize,
    gains: &'a [f64],
    residual_inf: f64,
    rank: usize,
    rows: usize,
    /// `null` when the matrix is singular.
    condition: Option<f64>,
    include_dc: bool,
    sensitivity: Vec<HarmonicEntry>,
    tol: f64,
    passed: bool,
    warnings: Vec<String>,
}

fn design_entries(d: &DesignResult) -> Vec<HarmonicEntry> {
    let dc = d.include_dc.then_some(0.0);
    dc.into_iter()
        .chain(d.omegas.iter().copied())
        .zip(&d.sensitivity_at_harmonics)
        .map(|(omega, &abs_s)| HarmonicEntry { omega, abs_s })
        .collect()
}

fn cmd_design(c: &Common, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let sc = load(c)?;
    let d = sc.design()?;
    let passed = d.passes(c.tol) && !d.is_rank_deficient();
    let rows = d.omegas.len() * 2 + usize::from(d.include_dc);

    writeln!(stdout, "scenario   {}", sc.name)?;
    writeln!(
        stdout,
        "structure  N = {}, spacing = {} s, span = {} s",
        d.qm.count(),
        sig6(d.qm.spacing()),
        sig6(d.qm.span())
    )?;
    for (k, g) in d.qm.gains().iter().enumerate() {
        writeln!(stdout, "a_{k:<3} = {}", sig6(*g))?;
    }
    writeln!(stdout, "residual   {}", sig6(d.residual_inf))?;
    writeln!(stdout, "rank       {} of {} rows", d.rank, rows)?;
    writeln!(stdout, "condition  {}", sig6(d.condition))?;
    for e in design_entries(&d) {
        writeln!(stdout, "|S(j{})| = {}", sig6(e.omega), sig6(e.abs_s))?;
    }
    for w in &d.warnings {
        writeln!(stdout, "warning: {w}")?;
    }
    writeln!(
        stdout,
        "{} (tol {})",
        if passed { "PASS" } else { "FAIL" },
        sig6(c.tol)
    )?;

    let report = DesignReport {
        scenario: &sc.name,
        spacing: d.qm.spacing(),
        count: d.qm.count(),
        gains: d.qm.gains(),
        residual_inf: d.residual_inf,
        rank: d.rank,
        rows,
        condition: d.condition.is_finite().then_some(d.condition),
        include_dc: d.include_dc,
        sensitivity: design_entries(&d),
        tol: c.tol,
        passed,
        warnings: d.warnings.iter().map(|w| w.to_string()).collect(),
    };
    let path = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.design.json", sc.name)));
    let json = serde_json::to_string_pretty(&report).expect("plain data");
    std::fs::write(&path, json + "\n")
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    writeln!(stdout, "result     {}", path.display())?;
    Ok(if passed { EXIT_PASS } else { EXIT_QUALITY })
}

fn grid_warnings(set: &RootSet) -> Vec<String> {
    set.warnings
        .iter()
        .filter(|w| matches!(w, SpectrumWarning::GridTooCoarse { .. }))
        .map(|w| w.to_string())
        .collect()
}

fn cmd_spectrum(
    c: &Common,
    kind: Kind,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let sc = load(c)?;
    let d = sc.design()?;
    let spec = sensitivity_spectrum(&sc.plant_factors, &sc.controller_factors, &d.qm, &sc.region)?;
    let mut selected: Vec<(&RootSet, RootKind)> = Vec::new();
    if kind != Kind::Poles {
        selected.push((&spec.zeros, RootKind::Zero));
    }
    if kind != Kind::Zeros {
        selected.push((&spec.poles, RootKind::Pole));
    }
    let mut coarse = Vec::new();
    for (set, _) in &selected {
        coarse.extend(grid_warnings(set));
        for w in set.warnings.iter().filter(|w| !matches!(w, SpectrumWarning::GridTooCoarse { .. })) {
            writeln!(stderr, "warning: {w}")?;
        }
    }
    if !coarse.is_empty() {
        for w in &coarse {
            writeln!(stderr, "warning: {w}")?;
        }
        if !c.force {
            return Err(input_error(
                "root-finder grid too coarse; set spectrum.grid_step smaller or pass --force",
            ));
        }
    }
    let spec_ref = &spec;
    let rows: Vec<(Root, RootKind, bool)> = selected
        .iter()
        .flat_map(|(set, k)| {
            set.roots
                .iter()
                .map(move |r| (*r, *k, spec_ref.is_coincident(r.s)))
        })
        .collect();
    with_output(c.out.as_deref(), stdout, |w| {
        writeln!(w, "re,im,residual,kind,coincident")?;
        for (r, k, coincident) in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                sig17(r.s.re),
                sig17(r.s.im),
                sig17(r.residual),
                k.as_str(),
                coincident
            )?;
        }
        Ok(())
    })?;
    Ok(EXIT_PASS)
}

fn cmd_simulate(c: &Common, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let sc = load(c)?;
    let d = sc.design()?;
    let sim = sc.sim_scenario(d.qm.clone());
    let ts = simulate_closed_loop(&sim).map_err(Error::from)?;
    let window = 2.0 * sc.target.period();
    let summary = suppression_summary(&ts, sim.t_augmentation_on, window);
    let peak = sim.disturbance.peak();
    with_output(c.out.as_deref(), stdout, |w| ts.write_csv(w))?;
    let line = format!(
        "residual before activation {} | after {} | disturbance peak {} | window {} s",
        sig6(summary.before),
        sig6(summary.after),
        sig6(peak),
        sig6(window)
    );
    if c.out.is_some() {
        writeln!(stdout, "{line}")?;
    } else {
        writeln!(stderr, "{line}")?;
    }
    Ok(EXIT_PASS)
}

fn cmd_freqresp(
    c: &Common,
    wmin: f64,
    wmax: f64,
    points: usize,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    if !(wmin >= 0.0 && wmax >= wmin && wmax.is_finite()) {
        return Err(input_error(format!(
            "need 0 <= wmin <= wmax, got wmin = {wmin}, wmax = {wmax}"
        )));
    }
    if points == 0 {
        return Err(input_error("--points must be at least 1"));
    }
    let sc = load(c)?;
    let d = sc.design()?;
    let s = assemble_sensitivity(&sc.plant_factors, &sc.controller_factors, &d.qm).map_err(Error::from)?;
    let omegas: Vec<f64> = if points == 1 {
        vec![wmin]
    } else {
        (0..points)
            .map(|i| wmin + (wmax - wmin) * i as f64 / (points - 1) as f64)
            .collect()
    };
    let values: Vec<Complex64> = omegas
        .iter()
        .map(|&w| s.eval(Complex64::new(0.0, w)))
        .collect::<Result<_, _>>()
        .map_err(Error::from)?;
    with_output(c.out.as_deref(), stdout, |out| {
        writeln!(out, "omega,abs_S,arg_S")?;
        for (w, v) in omegas.iter().zip(&values) {
            writeln!(out, "{},{},{}", sig17(*w), sig17(v.norm()), sig17(v.arg()))?;
        }
        Ok(())
    })?;
    Ok(EXIT_PASS)
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn closed_loop_check(up: &DelayRational) -> Result<Check, Failure> {
    let [a, b, c, d] = CLOSED_LOOP_WINDOW;
    let region = RegionSpec::new(a, b, c, d).expect("static window");
    let name = "closed-loop roots with Re >= 0";
    if up.num().is_zero() {
        return Ok(Check {
            name,
            passed: false,
            detail: "characteristic function vanishes identically".into(),
        });
    }
    let mut roots = find_roots(up.num(), &region).map_err(Error::from)?;
    let located: Vec<Complex64> = roots.inside().map(|r| r.s).collect();
    let consistent = check_completeness(up.num(), &mut roots, 4096).unwrap_or(true);
    let detail = match located.first() {
        Some(s) => format!(
            "{} root(s) in [{a}, {b}] x [{c}, {d}], first at {}{:+}j",
            located.len(),
            sig6(s.re),
            sig6(s.im)
        ),
        None if consistent => format!("none in [{a}, {b}] x [{c}, {d}]"),
        None => "root finder and winding count disagree".into(),
    };
    Ok(Check {
        name,
        passed: located.is_empty() && consistent,
        detail,
    })
}

fn cmd_verify(c: &Common, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let sc = load(c)?;
    let mut checks = Vec::new();

    let proper = sc.plant_factors.is_proper() && sc.controller_factors.is_proper();
    checks.push(Check {
        name: "factor properness",
        passed: proper,
        detail: if proper {
            "all factors proper".into()
        } else {
            "an improper factor".into()
        },
    });

    let window = default_stability_window();
    let mut stable = true;
    let mut detail = "factor denominators have no roots with Re >= 0 in [-50, 50] x [0, 500]".to_string();
    for f in [&sc.plant_factors, &sc.controller_factors] {
        if let Err(e) = f.check_stability(&window) {
            stable = false;
            detail = e.to_string();
            break;
        }
    }
    checks.push(Check {
        name: "factor stability",
        passed: stable,
        detail,
    });

    let up = compute_up(&sc.plant_factors, &sc.controller_factors);
    checks.push(closed_loop_check(&up)?);

    let d = sc.design()?;
    let s = assemble_sensitivity(&sc.plant_factors, &sc.controller_factors, &d.qm).map_err(Error::from)?;
    let report = verify_regulation(&s, &d.omegas, d.include_dc, c.tol);
    let worst = report.magnitudes.iter().copied().fold(0.0, f64::max);
    checks.push(Check {
        name: "regulation",
        passed: report.passed,
        detail: format!("max |S| at targets {} (tol {})", sig6(worst), sig6(c.tol)),
    });

    let all = checks.iter().all(|c| c.passed);
    writeln!(stdout, "scenario {}", sc.name)?;
    for ch in &checks {
        writeln!(
            stdout,
            "[{}] {}: {}",
            if ch.passed { "PASS" } else { "FAIL" },
            ch.name,
            ch.detail
        )?;
    }
    writeln!(stdout, "{}", if all { "PASS" } else { "FAIL" })?;
    Ok(if all { EXIT_PASS } else { EXIT_QUALITY })
}
