//! Command-line front end: solve a benchmark case, report the first-step
//! diagnostics, list the cases, and check a model's derivatives.

pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nrdiag::diagnostics::{self, DEFAULT_THRESHOLD};
use nrdiag::model::{self, EquationClass, StructureCheck};
use nrdiag::problems::{self, AcGridParams, Override, ProblemCase};
use nrdiag::{newton_solve, SolveOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub use report::Report;

/// Exit status for a converged run.
pub const EXIT_CONVERGED: i32 = 0;
/// Exit status for usage or configuration errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for a run that was reported but did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nrdiag", version, about = "Newton-Raphson initial-guess diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a case and report the first-step diagnostics.
    Run(RunArgs),
    /// List the built-in cases and presets.
    List,
    /// Check declared structure and analytic derivatives of a case.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Case name, optionally with a preset: `hex#3`, `dc#2`, `ac-test4`, `ac(4,0.4)#test1`.
    pub case: String,
    /// Preset name; overrides one given in the case name.
    #[arg(long)]
    pub preset: Option<String>,
    /// Set a variable of the initial guess, `name=value`.
    #[arg(long = "set", value_name = "NAME=VALUE", value_parser = parse_pair)]
    pub sets: Vec<(String, f64)>,
    /// Set a variable to a multiple of its reference value, `name=factor`.
    #[arg(long = "scale-var", value_name = "NAME=FACTOR", value_parser = parse_pair)]
    pub scales: Vec<(String, f64)>,
    /// JSON object mapping variable names to initial values.
    #[arg(long)]
    pub guess_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Increment infinity-norm at which the iteration stops.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Damping factor for the first-step line search.
    #[arg(long)]
    pub lambda_factor: Option<f64>,
    /// Suspect score above which a variable is flagged critical.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    /// `hex`, `dc`, `ac` or `ac(N,X)`.
    pub case: String,
    /// Grid size when the case is `ac`.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Line reactance when the case is `ac`.
    #[arg(long)]
    pub x: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Resolved `run` configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: String,
    pub preset: Option<String>,
    pub sets: Vec<(String, f64)>,
    pub scales: Vec<(String, f64)>,
    pub guess_file: Option<PathBuf>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub options: SolveOptions,
    pub threshold: f64,
}

impl TryFrom<RunArgs> for RunConfig {
    type Error = anyhow::Error;

    fn try_from(a: RunArgs) -> Result<Self> {
        let mut options = SolveOptions::default();
        if let Some(v) = a.max_iter {
            options.max_iter = v;
        }
        if let Some(v) = a.tol {
            options.increment_tol = v;
        }
        if let Some(v) = a.lambda_factor {
            options.damping_factor = v;
        }
        options.validate().map_err(|e| anyhow!(e))?;
        if a.threshold.is_nan() || a.threshold < 0.0 {
            bail!("threshold must be non-negative");
        }
        Ok(Self {
            case: a.case,
            preset: a.preset,
            sets: a.sets,
            scales: a.scales,
            guess_file: a.guess_file,
            format: a.format,
            out: a.out,
            options,
            threshold: a.threshold,
        })
    }
}

/// Builds the case and initial guess a configuration describes.
pub fn prepare(config: &RunConfig) -> Result<(ProblemCase, String, Vec<f64>)> {
    let (case, named) = problems::lookup(&config.case)?;
    let preset = match config.preset.clone().or(named) {
        Some(p) => p,
        None => case.preset_names().next().ok_or_else(|| anyhow!("case `{}` has no presets", case.name))?.to_string(),
    };
    let Some(guess) = case.preset(&preset).or_else(|| case.preset(&format!("#{preset}"))) else {
        bail!(problems::ProblemError::UnknownPreset { case: case.name.clone(), preset });
    };
    let mut overrides: Vec<(String, Override)> = Vec::new();
    if let Some(path) = &config.guess_file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a JSON object of numbers", path.display()))?;
        overrides.extend(map.into_iter().map(|(k, v)| (k, Override::Set(v))));
    }
    overrides.extend(config.sets.iter().map(|(k, v)| (k.clone(), Override::Set(*v))));
    overrides.extend(config.scales.iter().map(|(k, f)| (k.clone(), Override::Scale(*f))));
    let x0 = problems::perturb_preset(&case, guess, &overrides)?;
    Ok((case, preset, x0))
}

/// Solves, diagnoses and reports. Returns the exit code for the outcome.
pub fn cmd_run(config: &RunConfig) -> Result<i32> {
    let (case, preset, x0) = prepare(config)?;
    let report = run_report(&case, &preset, &x0, &config.options, config.threshold);
    let body = match config.format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json() + "\n",
    };
    match &config.out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(if report.status == "converged" { EXIT_CONVERGED } else { EXIT_NOT_CONVERGED })
}

/// The combined report for one start point.
pub fn run_report(case: &ProblemCase, preset: &str, x0: &[f64], opts: &SolveOptions, threshold: f64) -> Report {
    let diag = diagnostics::diagnose(&case.model, x0, opts, threshold);
    let solve = newton_solve(&case.model, x0, opts);
    let diag = diag.as_ref().map_err(|e| format!("first-step diagnostics unavailable: {e}"));
    Report::new(&case.model, &case.name, Some(preset), &solve, diag)
}

pub fn cmd_list(out: &mut impl Write) -> Result<i32> {
    for case in problems::builtin_cases() {
        let m = &case.model;
        writeln!(out, "{} (m={}, q={}, p={})", case.name, m.m(), m.q(), m.p())?;
        let names: Vec<&str> = case.preset_names().collect();
        let sep = if case.name == "ac" { "ac-" } else { "" };
        let shown: Vec<String> = names
            .iter()
            .map(|p| if p.starts_with('#') { format!("{}{p}", case.name) } else { format!("{sep}{p}") })
            .collect();
        writeln!(out, "  presets: {}", shown.join(" "))?;
    }
    writeln!(out, "ac(N,X) (m=8N^2-4N, q=4N^2-4, p=2N^2-2), N even >= 2, X > 0")?;
    writeln!(out, "  presets: test1; test2..test11 when N >= 20")?;
    Ok(EXIT_CONVERGED)
}

/// Derivative and structure checks at points near the reference solution.
pub fn cmd_verify(args: &VerifyArgs, out: &mut impl Write) -> Result<i32> {
    let case = if args.case == "ac" {
        problems::ac_grid(&AcGridParams {
            n: args.n,
            x: args.x.unwrap_or(AcGridParams::default().x),
            ..Default::default()
        })?
    } else {
        problems::lookup(&args.case)?.0
    };
    let model = &case.model;
    let samples = samples_near(&case, 3, 0x5eed)?;

    let structure = model::verify_structure(model, &samples);
    let mut checks = structure.checks.clone();
    checks.extend(model::verify_derivatives(model, &samples));
    checks.extend(sigma_checks(&case)?);

    writeln!(out, "verify {} (m={}, q={}, p={})", case.name, model.m(), model.q(), model.p())?;
    for c in &checks {
        let mark = if c.passed { "pass" } else { "FAIL" };
        write!(out, "  {mark}  {}", c.name)?;
        if !c.offenders.is_empty() {
            let shown: Vec<&str> = c.offenders.iter().take(8).map(String::as_str).collect();
            let more =
                if c.offenders.len() > 8 { format!(" (+{} more)", c.offenders.len() - 8) } else { String::new() };
            write!(out, ": {}{more}", shown.join(", "))?;
        }
        writeln!(out)?;
    }
    let class_name = |c: &EquationClass| match c {
        EquationClass::Linear => "linear",
        EquationClass::Quadratic => "quadratic",
        EquationClass::Nonlinear => "nonlinear",
    };
    if model.m() <= 20 {
        writeln!(out, "  equation classes:")?;
        for (name, c) in model.eq_names().iter().zip(&structure.classes) {
            writeln!(out, "    {name:<28} {}", class_name(c))?;
        }
    } else {
        let count = |k: EquationClass| structure.classes.iter().filter(|c| **c == k).count();
        writeln!(
            out,
            "  equation classes: {} linear, {} quadratic, {} nonlinear",
            count(EquationClass::Linear),
            count(EquationClass::Quadratic),
            count(EquationClass::Nonlinear)
        )?;
    }
    let passed = checks.iter().all(|c| c.passed);
    writeln!(out, "{}", if passed { "all checks passed" } else { "some checks failed" })?;
    Ok(if passed { EXIT_CONVERGED } else { EXIT_NOT_CONVERGED })
}

/// Random points within 5% of the reference whose finite-difference
/// stencils stay evaluable.
fn samples_near(case: &ProblemCase, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let model = &case.model;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..1000 {
        if samples.len() == count {
            break;
        }
        let x: Vec<f64> =
            case.reference.iter().map(|&r| r + 0.05 * r.abs().max(0.1) * rng.random_range(-1.0..=1.0)).collect();
        let stencil_ok = (0..x.len()).all(|j| {
            let h = 1e-3 * x[j].abs().max(1.0);
            [h, -h].iter().all(|d| {
                let mut y = x.clone();
                y[j] += d;
                model.eval(&y).is_ok()
            })
        });
        if model.eval(&x).is_ok() && stencil_ok {
            samples.push(x);
        }
    }
    if samples.len() < count {
        bail!("could not find {count} evaluable points near the reference of `{}`", case.name);
    }
    Ok(samples)
}

/// Analytic Σ against the finite-difference oracle at the first preset, and
/// the oracle's z columns against zero.
fn sigma_checks(case: &ProblemCase) -> Result<Vec<StructureCheck>> {
    let model = &case.model;
    let opts = SolveOptions::default();
    let (_, x0) = case.presets.first().ok_or_else(|| anyhow!("case `{}` has no presets", case.name))?;
    let step = nrdiag::solver::first_step_damped(model, x0, &opts)?;
    let sigma = diagnostics::compute_sigma(model, &step).map_err(|e| anyhow!(e))?.full();
    let oracle = diagnostics::sigma_fd_oracle(model, x0, &opts)?;
    let mut mismatch = Vec::new();
    let mut z_nonzero = Vec::new();
    let names = model.var_names();
    for i in 0..model.m() {
        for j in 0..model.m() {
            let (a, b) = (sigma[(i, j)], oracle[(i, j)]);
            if (a - b).abs() > 1e-3_f64.max(1e-3 * a.abs()) {
                mismatch.push(format!("{}/{}", names[i], names[j]));
            }
        }
    }
    for &j in model.z_indices() {
        if (0..model.m()).any(|i| oracle[(i, j)].abs() > 1e-6) {
            z_nonzero.push(names[j].clone());
        }
    }
    Ok(vec![
        StructureCheck {
            name: "sensitivity matches finite differences".into(),
            passed: mismatch.is_empty(),
            offenders: mismatch,
        },
        StructureCheck {
            name: "first step is independent of z0".into(),
            passed: z_nonzero.is_empty(),
            offenders: z_nonzero,
        },
    ])
}

/// Parses `args` (including the program name) and dispatches. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => RunConfig::try_from(a).and_then(|c| cmd_run(&c)),
        Command::List => cmd_list(&mut std::io::stdout().lock()),
        Command::Verify(a) => cmd_verify(&a, &mut std::io::stdout().lock()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("p_i=2.1994").unwrap(), ("p_i".to_string(), 2.1994));
        assert!(parse_pair("p_i").is_err());
        assert!(parse_pair("p_i=abc").is_err());
    }

    #[test]
    fn options_from_flags() {
        let cli = Cli::try_parse_from(["nrdiag", "run", "hex#3", "--max-iter", "7", "--lambda-factor", "0.5"]).unwrap();
        let Command::Run(a) = cli.command else { panic!("expected run") };
        let c = RunConfig::try_from(a).unwrap();
        assert_eq!(c.options.max_iter, 7);
        assert_eq!(c.options.damping_factor, 0.5);
        let cli = Cli::try_parse_from(["nrdiag", "run", "hex", "--lambda-factor", "1.5"]).unwrap();
        let Command::Run(a) = cli.command else { panic!("expected run") };
        assert!(RunConfig::try_from(a).is_err());
    }

    #[test]
    fn preset_defaults_to_first() {
        let cli = Cli::try_parse_from(["nrdiag", "run", "dc"]).unwrap();
        let Command::Run(a) = cli.command else { panic!("expected run") };
        let (_, preset, x0) = prepare(&RunConfig::try_from(a).unwrap()).unwrap();
        assert_eq!(preset, "#1");
        assert_eq!(x0[0], 0.99999);
    }
}
