//! Monte Carlo iteration-count statistics over random initial conditions.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::SectorFunction;
use crate::numfmt::machine;
use crate::optim::{gd_run, gsgd_run, ArmijoParams, StepSchedule, StoppingRule};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "PASSIVE_GD_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Gd,
    Gsgd,
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(MethodKind::Gd),
            "gsgd" => Ok(MethodKind::Gsgd),
            other => Err(Error::invalid(format!("unknown method {other:?} (expected gd or gsgd)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    pub method: MethodKind,
    pub schedule: StepSchedule,
}

/// What a recorded iteration count measures.
///
/// `Updates` counts applied updates, so a run started at the minimizer
/// records 0. `GradientEvaluations` counts gradients evaluated up to and
/// including the one that met the tolerance, i.e. updates + 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountConvention {
    Updates,
    #[default]
    GradientEvaluations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub n_samples: usize,
    pub x0_low: f64,
    pub x0_high: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub count_convention: CountConvention,
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if !(self.x0_low < self.x0_high) || !self.x0_low.is_finite() || !self.x0_high.is_finite() {
            return Err(Error::invalid(format!(
                "need finite x0_low < x0_high, got [{}, {}]",
                self.x0_low, self.x0_high
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("at least one method is required"));
        }
        for m in &self.methods {
            let fits = match m.method {
                MethodKind::Gd => m.schedule.is_alpha_kind(),
                MethodKind::Gsgd => !m.schedule.is_alpha_kind(),
            };
            if !fits {
                return Err(Error::invalid(format!(
                    "method {:?}: schedule {:?} does not match {:?}",
                    m.label, m.schedule, m.method
                )));
            }
        }
        Ok(())
    }
}

/// Six-method comparison on `[−10⁵, 10⁵]` with tolerance `10⁻¹²`: fixed
/// steps `2/(m+L)` and `2/L`, their scheduling counterparts `√(2/(m+L))`
/// and `√(2/L)`, and one backtracking variant of each.
pub fn table1_spec(m: f64, l: f64, n_samples: usize, seed: u64) -> MonteCarloSpec {
    let a_opt = 2.0 / (m + l);
    let a_max = 2.0 / l;
    let method = |label: &str, method, schedule| MethodSpec {
        label: label.into(),
        method,
        schedule,
    };
    MonteCarloSpec {
        n_samples,
        x0_low: -1e5,
        x0_high: 1e5,
        seed,
        tol: 1e-12,
        max_iter: 1_000_000,
        methods: vec![
            method("alpha=2/(m+L)", MethodKind::Gd, StepSchedule::FixedAlpha(a_opt)),
            method("s=sqrt(2/(m+L))", MethodKind::Gsgd, StepSchedule::FixedS(a_opt.sqrt())),
            method("alpha=2/L", MethodKind::Gd, StepSchedule::FixedAlpha(a_max)),
            method("s=sqrt(2/L)", MethodKind::Gsgd, StepSchedule::FixedS(a_max.sqrt())),
            method(
                "alpha_btk",
                MethodKind::Gd,
                StepSchedule::ArmijoAlpha(ArmijoParams {
                    initial: Some(a_max),
                    shrink: 0.5,
                    c: 0.1,
                }),
            ),
            method(
                "s_btk",
                MethodKind::Gsgd,
                StepSchedule::ArmijoS {
                    params: ArmijoParams {
                        initial: None,
                        shrink: 0.5f64.sqrt(),
                        c: 0.1,
                    },
                    cap: a_max.sqrt(),
                },
            ),
        ],
        count_convention: CountConvention::GradientEvaluations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub label: String,
    pub mean: f64,
    pub median: f64,
    pub mode: usize,
    pub count_histogram: BTreeMap<usize, usize>,
    pub n: usize,
    /// Samples that hit `max_iter` or failed; recorded with count `max_iter`.
    pub flagged: usize,
}

impl SummaryStats {
    pub fn from_counts(label: impl Into<String>, counts: &[usize], flagged: usize) -> Result<Self> {
        let mode = mode_of(counts)?;
        let mut sorted = counts.to_vec();
        sorted.sort_unstable();
        let median = sorted[(sorted.len() - 1) / 2] as f64;
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64;
        let mut count_histogram = BTreeMap::new();
        for &c in counts {
            *count_histogram.entry(c).or_insert(0) += 1;
        }
        Ok(Self {
            label: label.into(),
            mean,
            median,
            mode,
            count_histogram,
            n: counts.len(),
            flagged,
        })
    }
}

/// Most frequent value; ties go to the smallest.
pub fn mode_of(counts: &[usize]) -> Result<usize> {
    if counts.is_empty() {
        return Err(Error::invalid("mode of an empty sample"));
    }
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in counts {
        *freq.entry(c).or_insert(0) += 1;
    }
    let mut best = (0, 0);
    for (&value, &n) in &freq {
        if n > best.1 {
            best = (value, n);
        }
    }
    Ok(best.0)
}

/// Initial condition of sample `index`, independent of scheduling.
pub fn sample_x0(spec: &MonteCarloSpec, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    rng.random_range(spec.x0_low..=spec.x0_high)
}

/// Iteration count of one run and whether it was flagged.
pub fn count_one(f: &SectorFunction, method: &MethodSpec, x0: &[f64], spec: &MonteCarloSpec) -> (usize, bool) {
    let stops = [StoppingRule::GradNorm(spec.tol), StoppingRule::MaxIter(spec.max_iter)];
    let run = match method.method {
        MethodKind::Gd => gd_run(f, x0, &method.schedule, &stops),
        MethodKind::Gsgd => gsgd_run(f, x0, &method.schedule, &stops),
    };
    match run {
        Ok(t) if t.termination != crate::optim::Termination::MaxIterHit => {
            let n = match spec.count_convention {
                CountConvention::Updates => t.iterations,
                CountConvention::GradientEvaluations => t.iterations + 1,
            };
            (n, false)
        }
        _ => (spec.max_iter, true),
    }
}

/// Worker count from `PASSIVE_GD_THREADS`, if set to a positive integer.
pub fn thread_count_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every method on the same seeded `x0` sequence, using up to
/// `PASSIVE_GD_THREADS` workers when set.
pub fn run_monte_carlo(f: &SectorFunction, spec: &MonteCarloSpec) -> Result<Vec<SummaryStats>> {
    run_monte_carlo_with_threads(f, spec, thread_count_from_env())
}

/// As [`run_monte_carlo`] with an explicit worker count (`None` = rayon default).
/// Results do not depend on the worker count.
pub fn run_monte_carlo_with_threads(f: &SectorFunction, spec: &MonteCarloSpec, threads: Option<usize>) -> Result<Vec<SummaryStats>> {
    spec.validate()?;
    if f.dim() != 1 {
        return Err(Error::invalid(format!("Monte Carlo runs need a scalar function, {} has dimension {}", f.name(), f.dim())));
    }
    let work = || -> Vec<Vec<(usize, bool)>> {
        (0..spec.n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let x0 = [sample_x0(spec, i)];
                spec.methods.iter().map(|m| count_one(f, m, &x0, spec)).collect()
            })
            .collect()
    };
    let per_sample = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    spec.methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let counts: Vec<usize> = per_sample.iter().map(|row| row[j].0).collect();
            let flagged = per_sample.iter().filter(|row| row[j].1).count();
            SummaryStats::from_counts(m.label.clone(), &counts, flagged)
        })
        .collect()
}

/// CSV `iterations,count`, ascending.
pub fn export_histogram(stats: &SummaryStats, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["iterations", "count"])?;
    for (it, n) in &stats.count_histogram {
        w.write_record([it.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram(path: impl AsRef<Path>) -> Result<BTreeMap<usize, usize>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in r.deserialize() {
        let (it, n): (usize, usize) = row?;
        out.insert(it, n);
    }
    Ok(out)
}

/// CSV `label,mean,median,mode,n,flagged`.
pub fn write_summary(stats: &[SummaryStats], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["label", "mean", "median", "mode", "n", "flagged"])?;
    for s in stats {
        w.write_record([
            s.label.clone(),
            machine(s.mean),
            machine(s.median),
            s.mode.to_string(),
            s.n.to_string(),
            s.flagged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// File-system friendly form of a method label.
pub fn label_slug(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        match ch {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' | '.' => out.push(ch),
            _ if !out.ends_with('_') => out.push('_'),
            _ => {}
        }
    }
    out.trim_matches('_').to_string()
}

/// Histogram per method as `hist_<label>.csv` plus `summary.csv`.
pub fn write_outputs(stats: &[SummaryStats], out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for s in stats {
        export_histogram(s, dir.join(format!("hist_{}.csv", label_slug(&s.label))))?;
    }
    write_summary(stats, dir.join("summary.csv"))
}
