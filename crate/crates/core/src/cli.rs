//! Command-line front end: `certify`, `run`, `verify` and `bench`.
//!
//! Exit statuses: 0 on success (STRONG/WEAK for `certify`, all checks
//! passing for `verify`), 1 for invalid input, 2 for a negative outcome
//! (NONE verdict, failed check, run that did not converge).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{self, CountConvention, MonteCarloSpec, SummaryStats};
use crate::error::{Error, Result};
use crate::functions::{by_name, diag_quadratic, finite_difference_error, paper_oscillatory, quadratic, sector_membership_scan, shifted_gradient, SectorFunction};
use crate::interconnect::{delta_bar_signal, gd_loop, loop_equivalence_report, run_transformed, LoopTrace};
use crate::lti::gd_passivity_certificate;
use crate::numfmt::human;
use crate::optim::{gd_run, gsgd_run, ArmijoParams, RunTrace, StepSchedule, StoppingRule, Termination};
use crate::passivity::{certify_step_size, empirical_passivity_margin, nabla_indices, transformed_indices, unit_energy_inputs, Classification, Verdict};
use crate::signals::{norm, Signal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "passive-gd", version, about = "Passivity certificates and simulations for gradient descent")]
pub struct Cli {
    /// Print extra diagnostics to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certify a GD step size for the sector class (m, L).
    Certify(CertifyArgs),
    /// Run an optimizer or simulate the feedback loop.
    Run(RunArgs),
    /// Run a property suite.
    Verify(VerifyArgs),
    /// Monte Carlo iteration-count statistics.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub m: f64,
    #[arg(long = "L")]
    pub l: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gd,
    Gsgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Optim,
    Loop,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// paper-oscillatory, quadratic or diag-quadratic.
    #[arg(long, default_value = "paper-oscillatory")]
    pub function: String,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[arg(long = "L", default_value_t = 100.0)]
    pub l: f64,
    /// Initial point, comma separated for vector functions.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub x0: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Gd)]
    pub method: MethodArg,
    /// Fixed step size (gd).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fixed scheduling value (gsgd).
    #[arg(long)]
    pub s: Option<f64>,
    /// Backtracking instead of a fixed value.
    #[arg(long)]
    pub armijo: bool,
    #[arg(long)]
    pub armijo_c: Option<f64>,
    #[arg(long)]
    pub armijo_shrink: Option<f64>,
    #[arg(long)]
    pub armijo_initial: Option<f64>,
    /// Cap on backtracked scheduling values; defaults to sqrt(2/L).
    #[arg(long)]
    pub cap: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Also stop on the paired-gradient rule with this tolerance.
    #[arg(long)]
    pub paired_tol: Option<f64>,
    #[arg(long, default_value_t = crate::optim::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Write the trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Optim)]
    pub mode: ModeArg,
    /// Loop mode: simulate the loop-transformed interconnection.
    #[arg(long)]
    pub transformed: bool,
    /// Loop mode: feedthrough of the modified controller (default alpha/2).
    #[arg(long)]
    pub d: Option<f64>,
    /// Loop mode: number of steps.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Sector,
    Passivity,
    Loop,
    Counterexample,
    All,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Updates,
    GradientEvaluations,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// JSON benchmark configuration; the six-method preset when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0_low: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0_high: Option<f64>,
    #[arg(long, value_enum)]
    pub count_convention: Option<ConventionArg>,
    /// Worker threads; overrides PASSIVE_GD_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

/// Function selection as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl FunctionSpec {
    pub fn build(&self) -> Result<SectorFunction> {
        by_name(&self.name, self.m, self.l)
    }
}

/// Benchmark configuration file: a function plus a [`MonteCarloSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub function: FunctionSpec,
    #[serde(flatten)]
    pub spec: MonteCarloSpec,
}

impl BenchConfig {
    /// The six-method preset on `paper-oscillatory(1, 100)` with 10⁵ samples.
    pub fn table1() -> Self {
        Self {
            function: FunctionSpec {
                name: "paper-oscillatory".into(),
                m: 1.0,
                l: 100.0,
            },
            spec: bench::table1_spec(1.0, 100.0, 100_000, 1),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{text}");
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_INVALID
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INVALID
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Divergence { .. } | Error::NonConvergence { .. } | Error::LineSearchFailure { .. } => EXIT_NEGATIVE,
                _ => EXIT_INVALID,
            }
        }
    }
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Certify(a) => certify_command(a, out),
        Command::Run(a) => run_command(a, out),
        Command::Verify(a) => verify_command(a, out),
        Command::Bench(a) => bench_command(a, cli.verbose, out, err),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyReport {
    pub verdict: Verdict,
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub alpha: f64,
    /// Candidate certificate scalar `1/α`.
    pub p: f64,
    pub certified: bool,
    pub lmi_max_eigenvalue: Option<f64>,
    pub delta: f64,
    pub epsilon: f64,
    pub d: f64,
    pub delta_bar: Option<f64>,
    pub epsilon_bar: Option<f64>,
    pub transformed_classification: Option<Classification>,
    pub alpha_half: f64,
    pub inv_l: f64,
}

pub fn certify_report(m: f64, l: f64, alpha: f64) -> Result<CertifyReport> {
    let v = certify_step_size(m, l, alpha)?;
    Ok(CertifyReport {
        verdict: v.verdict,
        m,
        l,
        alpha,
        p: 1.0 / alpha,
        certified: v.certificate.is_some(),
        lmi_max_eigenvalue: v.certificate.map(|c| c.max_eigenvalue_m),
        delta: v.nabla_indices.delta,
        epsilon: v.nabla_indices.epsilon,
        d: v.d,
        delta_bar: v.transformed_indices.map(|t| t.delta),
        epsilon_bar: v.transformed_indices.map(|t| t.epsilon),
        transformed_classification: v.transformed_indices.map(|t| t.classification),
        alpha_half: alpha / 2.0,
        inv_l: 1.0 / l,
    })
}

fn certify_command(a: &CertifyArgs, out: &mut dyn Write) -> Result<i32> {
    let r = certify_report(a.m, a.l, a.alpha)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
    } else {
        writeln!(out, "verdict: {}", r.verdict)?;
        writeln!(out, "m = {}, L = {}, alpha = {}", human(r.m), human(r.l), human(r.alpha))?;
        let lmi = if r.certified { "feasible" } else { "infeasible" };
        writeln!(out, "certificate p = 1/alpha = {} ({lmi})", human(r.p))?;
        writeln!(out, "gradient indices: delta = {}, epsilon = {}", human(r.delta), human(r.epsilon))?;
        match (r.delta_bar, r.epsilon_bar, r.transformed_classification) {
            (Some(db), Some(eb), Some(c)) => writeln!(
                out,
                "transformed indices at d = {}: delta_bar = {}, epsilon_bar = {} ({c})",
                human(r.d),
                human(db),
                human(eb)
            )?,
            _ => writeln!(out, "transformed indices at d = {}: undefined", human(r.d))?,
        }
        writeln!(out, "bounds: alpha/2 = {}, 1/L = {}", human(r.alpha_half), human(r.inv_l))?;
    }
    Ok(match r.verdict {
        Verdict::Strong | Verdict::Weak => EXIT_OK,
        Verdict::None => EXIT_NEGATIVE,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub mode: &'static str,
    pub function: String,
    pub method: &'static str,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub final_x: Vec<f64>,
    pub final_value: f64,
    pub final_grad_norm: f64,
}

fn schedule_from(a: &RunArgs, f: &SectorFunction) -> Result<StepSchedule> {
    let mut params = ArmijoParams::default();
    if let Some(c) = a.armijo_c {
        params.c = c;
    }
    if let Some(s) = a.armijo_shrink {
        params.shrink = s;
    }
    params.initial = a.armijo_initial;
    match (a.method, a.armijo, a.alpha, a.s) {
        (MethodArg::Gd, false, Some(alpha), None) => Ok(StepSchedule::FixedAlpha(alpha)),
        (MethodArg::Gd, true, None, None) => Ok(StepSchedule::ArmijoAlpha(params)),
        (MethodArg::Gsgd, false, None, Some(s)) => Ok(StepSchedule::FixedS(s)),
        (MethodArg::Gsgd, true, None, None) => Ok(StepSchedule::ArmijoS {
            params,
            cap: a.cap.unwrap_or_else(|| (2.0 / f.l()).sqrt()),
        }),
        _ => Err(Error::invalid(
            "choose exactly one of --alpha (gd), --s (gsgd) or --armijo",
        )),
    }
}

fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run_command(a: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let f = by_name(&a.function, a.m, a.l)?;
    if a.x0.len() != f.dim() {
        return Err(Error::shape(f.dim(), a.x0.len()));
    }
    let (report, code) = match a.mode {
        ModeArg::Optim => {
            if a.transformed || a.d.is_some() {
                return Err(Error::invalid("--transformed and --d apply to --mode loop"));
            }
            let schedule = schedule_from(a, &f)?;
            let mut stops = vec![StoppingRule::GradNorm(a.tol), StoppingRule::MaxIter(a.max_iter)];
            if let Some(p) = a.paired_tol {
                stops.push(StoppingRule::PairedGrad(p));
            }
            let trace: RunTrace = match a.method {
                MethodArg::Gd => gd_run(&f, &a.x0, &schedule, &stops)?,
                MethodArg::Gsgd => gsgd_run(&f, &a.x0, &schedule, &stops)?,
            };
            if let Some(p) = &a.trace {
                write_file(p, |w| trace.write_csv(w))?;
            }
            let x = trace.final_iterate().to_vec();
            let code = if trace.termination == Termination::MaxIterHit { EXIT_NEGATIVE } else { EXIT_OK };
            let report = RunReport {
                mode: "optim",
                function: f.name().to_string(),
                method: match a.method {
                    MethodArg::Gd => "gd",
                    MethodArg::Gsgd => "gsgd",
                },
                iterations: trace.iterations,
                termination: Some(trace.termination),
                final_value: f.value(&x),
                final_grad_norm: norm(&f.gradient(&x)),
                final_x: x,
            };
            (report, code)
        }
        ModeArg::Loop => {
            let alpha = match (a.method, a.alpha, a.s, a.armijo) {
                (MethodArg::Gd, Some(alpha), None, false) => alpha,
                _ => return Err(Error::invalid("loop mode simulates gd with a fixed --alpha")),
            };
            let trace: LoopTrace = if a.transformed {
                run_transformed(&f, alpha, a.d.unwrap_or(alpha / 2.0), &a.x0, a.steps)?
            } else {
                if a.d.is_some() {
                    return Err(Error::invalid("--d requires --transformed"));
                }
                gd_loop(&f, alpha, &a.x0, a.steps)?
            };
            if let Some(p) = &a.trace {
                write_file(p, |w| trace.write_csv(w))?;
            }
            let xi = trace.states.last().expect("loop trace holds the initial state");
            let x: Vec<f64> = xi.iter().zip(f.minimizer()).map(|(a, b)| a + b).collect();
            let report = RunReport {
                mode: if a.transformed { "loop-transformed" } else { "loop" },
                function: f.name().to_string(),
                method: "gd",
                iterations: trace.steps,
                termination: None,
                final_value: f.value(&x),
                final_grad_norm: norm(&f.gradient(&x)),
                final_x: x,
            };
            (report, EXIT_OK)
        }
    };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        writeln!(out, "mode: {}", report.mode)?;
        writeln!(out, "function: {}, method: {}", report.function, report.method)?;
        match report.termination {
            Some(t) => writeln!(out, "iterations: {} ({t})", report.iterations)?,
            None => writeln!(out, "steps: {}", report.iterations)?,
        }
        let xs: Vec<String> = report.final_x.iter().map(|&v| human(v)).collect();
        writeln!(out, "final x: [{}]", xs.join(", "))?;
        writeln!(out, "f(x) = {}, |grad f(x)| = {}", human(report.final_value), human(report.final_grad_norm))?;
    }
    Ok(code)
}

/// One line of a verification report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// `>=` or `<=`: how `value` is compared with `threshold`.
    pub comparison: &'static str,
    /// Informational checks are reported but do not affect the exit status.
    pub gating: bool,
}

impl Check {
    fn at_least(suite: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
            comparison: ">=",
            gating: true,
        }
    }

    fn at_most(suite: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
            comparison: "<=",
            gating: true,
        }
    }
}

/// Default test functions: `paper-oscillatory(1, 100)`, `quadratic(100)` and
/// `diag-quadratic(1, 100)`.
pub fn builtin_functions() -> Vec<SectorFunction> {
    vec![
        paper_oscillatory(1.0, 100.0).expect("valid sector"),
        quadratic(100.0).expect("valid sector"),
        diag_quadratic(1.0, 100.0).expect("valid sector"),
    ]
}

pub fn sector_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for f in builtin_functions() {
        let scan = sector_membership_scan(&f, -1e5, 1e5, 100_000, seed)?;
        checks.push(Check::at_least("sector", format!("{}: min relative co-coercivity residual", f.name()), scan.min_relative_residual, -1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..f.dim()).map(|_| rng.random_range(-100.0..=100.0)).collect();
            worst = worst.max(finite_difference_error(&f, &x)?);
        }
        checks.push(Check::at_most("sector", format!("{}: max finite-difference gradient error", f.name()), worst, 1e-6));
    }
    Ok(checks)
}

pub fn passivity_suite(seed: u64) -> Result<Vec<Check>> {
    let (alpha, d) = (0.01, 0.005);
    let certified = gd_passivity_certificate(alpha, d)?.is_certified();
    let mut checks = vec![Check::at_least(
        "passivity",
        format!("controller LMI certified at alpha = {alpha}, d = {d}"),
        if certified { 1.0 } else { 0.0 },
        1.0,
    )];
    for f in builtin_functions() {
        let inputs = unit_energy_inputs(f.dim(), 50, 100, seed)?;
        let nabla = nabla_indices(f.m(), f.l())?;
        let g = |u: &Signal| u.map_samples(|s| shifted_gradient(&f, s));
        let m = empirical_passivity_margin(g, &nabla, &inputs, 50)?;
        checks.push(Check::at_least("passivity", format!("{}: shifted gradient margin / scale", f.name()), m.margin / m.scale.max(1.0), -1e-9));
        let indices = transformed_indices(f.m(), f.l(), d)?;
        let m = empirical_passivity_margin(|u| delta_bar_signal(&f, d, u), &indices, &inputs, 50)?;
        checks.push(Check::at_least("passivity", format!("{}: transformed nonlinearity margin / scale (d = {d})", f.name()), m.margin / m.scale.max(1.0), -1e-9));
    }
    Ok(checks)
}

pub fn loop_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for f in builtin_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let alpha = loop {
                let a = rng.random_range(0.0..2.0 / f.l());
                if a > 0.0 {
                    break a;
                }
            };
            let x0: Vec<f64> = (0..f.dim()).map(|_| rng.random_range(-10.0..=10.0)).collect();
            let dev = loop_equivalence_report(&f, alpha, &x0, 100)?;
            worst = worst.max(dev / (1.0 + norm(&x0)));
        }
        checks.push(Check::at_most("loop", format!("{}: max deviation / (1 + |x0|)", f.name()), worst, 1e-9));
    }
    Ok(checks)
}

pub fn counterexample_suite() -> Result<Vec<Check>> {
    let f = diag_quadratic(1.0, 100.0)?;
    let stops = [StoppingRule::GradNorm(1e-12), StoppingRule::PairedGrad(1e-10), StoppingRule::MaxIter(2000)];
    let t = gd_run(&f, &[1.0, 1.0], &StepSchedule::FixedAlpha(0.02), &stops)?;
    let drift = t.iterates.samples().take(201).map(|x| (x[1].abs() - 1.0).abs()).fold(0.0, f64::max);
    let min_grad = t.gradients.samples().map(norm).fold(f64::INFINITY, f64::min);
    let fired_at = if t.termination == Termination::PairedGradMet { t.iterations as f64 } else { f64::INFINITY };
    let x200 = t.iterates.get(200).map(|x| {
        let g = f.gradient(x);
        let avg: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - 0.01 * gi).collect();
        (norm(&avg), avg[1].abs())
    });
    let mut checks = vec![
        Check::at_most("counterexample", "max ||x2[k]| - 1| for k <= 200", drift, 1e-12),
        Check::at_least("counterexample", "min |grad f(x[k])| (gradient-norm rule never fires)", min_grad, 1e-12),
        Check::at_most("counterexample", "iteration at which the paired-gradient rule fires", fired_at, 2000.0),
    ];
    if let Some((dist, second)) = x200 {
        checks.push(Check::at_most("counterexample", "second component of x[200] - grad f(x[200])/L", second, 1e-12));
        checks.push(Check {
            gating: false,
            ..Check::at_most("counterexample", "|x[200] - grad f(x[200])/L - x*|", dist, 1e-6)
        });
    }
    Ok(checks)
}

pub fn verify_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    Ok(match suite {
        Suite::Sector => sector_suite(seed)?,
        Suite::Passivity => passivity_suite(seed)?,
        Suite::Loop => loop_suite(seed)?,
        Suite::Counterexample => counterexample_suite()?,
        Suite::All => {
            let mut all = sector_suite(seed)?;
            all.extend(passivity_suite(seed)?);
            all.extend(loop_suite(seed)?);
            all.extend(counterexample_suite()?);
            all
        }
    })
}

fn verify_command(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let checks = verify_suite(a.suite, a.seed)?;
    let ok = checks.iter().all(|c| c.passed || !c.gating);
    if a.json {
        #[derive(Serialize)]
        struct Report<'a> {
            suite: Suite,
            seed: u64,
            passed: bool,
            checks: &'a [Check],
        }
        let r = Report {
            suite: a.suite,
            seed: a.seed,
            passed: ok,
            checks: &checks,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
    } else {
        for c in &checks {
            let tag = match (c.passed, c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "INFO",
            };
            writeln!(out, "{tag} [{}] {}: {} ({} {})", c.suite, c.name, human(c.value), c.comparison, human(c.threshold))?;
        }
        writeln!(out, "{}", if ok { "all checks passed" } else { "some checks failed" })?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
}

/// Loads the configuration (or the preset) and applies flag overrides.
pub fn resolve_bench_config(a: &BenchArgs) -> Result<BenchConfig> {
    let mut cfg = match &a.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::table1(),
    };
    let s = &mut cfg.spec;
    if let Some(v) = a.n_samples {
        s.n_samples = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.tol {
        s.tol = v;
    }
    if let Some(v) = a.max_iter {
        s.max_iter = v;
    }
    if let Some(v) = a.x0_low {
        s.x0_low = v;
    }
    if let Some(v) = a.x0_high {
        s.x0_high = v;
    }
    if let Some(c) = a.count_convention {
        s.count_convention = match c {
            ConventionArg::Updates => CountConvention::Updates,
            ConventionArg::GradientEvaluations => CountConvention::GradientEvaluations,
        };
    }
    s.validate()?;
    Ok(cfg)
}

fn bench_command(a: &BenchArgs, verbose: u8, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = resolve_bench_config(a)?;
    let f = cfg.function.build()?;
    if verbose > 0 {
        writeln!(err, "running {} samples x {} methods on {}", cfg.spec.n_samples, cfg.spec.methods.len(), f.name())?;
    }
    if a.threads == Some(0) {
        return Err(Error::invalid("--threads must be positive"));
    }
    let threads = a.threads.or_else(bench::thread_count_from_env);
    let stats = bench::run_monte_carlo_with_threads(&f, &cfg.spec, threads)?;
    bench::write_outputs(&stats, &a.out_dir)?;
    write_file(&a.out_dir.join("config.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &cfg)?;
        writeln!(w)?;
        Ok(())
    })?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats)?)?;
    } else {
        print_stats(&stats, out)?;
    }
    Ok(EXIT_OK)
}

fn print_stats(stats: &[SummaryStats], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{:<18} {:>10} {:>8} {:>6} {:>8} {:>8}", "label", "mean", "median", "mode", "n", "flagged")?;
    for s in stats {
        writeln!(
            out,
            "{:<18} {:>10} {:>8} {:>6} {:>8} {:>8}",
            s.label,
            human(s.mean),
            human(s.median),
            s.mode,
            s.n,
            s.flagged
        )?;
    }
    Ok(())
}
