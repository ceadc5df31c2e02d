//! Gradient descent and its gain-scheduled variant.
//!
//! * GD: `x[k+1] = x[k] − αₖ·∇f(x[k])`
//! * gain-scheduled GD: `x[k+1] = x[k] − sₖ·∇f(sₖ·x[k])`
//!
//! For a constant `s`, `x̄ = s·x` turns the scheduled recursion into plain GD
//! with step `s²`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::functions::SectorFunction;
use crate::signals::{dot, norm, norm_sq, Signal};

/// Iteration cap added when a run has no explicit `MaxIter` rule.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Backtracking gives up after this many reductions.
pub const MAX_HALVINGS: usize = 100;

/// Backtracking parameters: trials `initial·shrinkʲ`, accepted on sufficient
/// decrease with coefficient `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    /// First trial; `None` means 1 for step sizes and the cap for schedules.
    #[serde(default)]
    pub initial: Option<f64>,
    pub shrink: f64,
    pub c: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            initial: None,
            shrink: 0.5,
            c: 1e-4,
        }
    }
}

impl ArmijoParams {
    fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid(format!("shrink factor must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::invalid(format!("sufficient-decrease coefficient must lie in (0, 1), got {}", self.c)));
        }
        if let Some(t) = self.initial {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("initial trial must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    FixedAlpha(f64),
    FixedS(f64),
    ArmijoAlpha(ArmijoParams),
    ArmijoS { params: ArmijoParams, cap: f64 },
}

impl StepSchedule {
    pub fn is_alpha_kind(&self) -> bool {
        matches!(self, StepSchedule::FixedAlpha(_) | StepSchedule::ArmijoAlpha(_))
    }

    /// Armijo schedule capped at `√(2/L)`.
    pub fn armijo_s_for(f: &SectorFunction, params: ArmijoParams) -> Self {
        StepSchedule::ArmijoS {
            params,
            cap: (2.0 / f.l()).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::FixedAlpha(a) if !(a > 0.0 && a.is_finite()) => {
                Err(Error::invalid(format!("step size must be positive, got {a}")))
            }
            StepSchedule::FixedS(s) if s == 0.0 || !s.is_finite() => {
                Err(Error::invalid("scheduling value must be nonzero and finite"))
            }
            StepSchedule::ArmijoAlpha(p) => p.validate(),
            StepSchedule::ArmijoS { params, cap } => {
                if !(cap > 0.0 && cap.is_finite()) {
                    return Err(Error::invalid(format!("cap must be positive, got {cap}")));
                }
                params.validate()
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// `‖∇f(x[k])‖ < tol`
    GradNorm(f64),
    /// `‖∇f(x[k]) + ∇f(x[k−1])‖² < tol`
    PairedGrad(f64),
    /// `k ≥ cap`
    MaxIter(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    GradNormMet,
    PairedGradMet,
    MaxIterHit,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::GradNormMet => "GRAD_NORM_MET",
            Termination::PairedGradMet => "PAIRED_GRAD_MET",
            Termination::MaxIterHit => "MAX_ITER_HIT",
        })
    }
}

/// Iterate history of one run. `iterates` and `gradients` hold
/// `iterations + 1` samples; `step_history` holds one entry per update.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub iterates: Signal,
    pub gradients: Signal,
    pub iterations: usize,
    pub termination: Termination,
    pub step_history: Vec<f64>,
}

impl RunTrace {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trace always holds x0")
    }

    /// CSV with columns `k,x_0..,g_0..,step` (`step` empty on the last row).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        use crate::numfmt::machine;
        let dim = self.iterates.dim();
        let mut header = vec!["k".to_string()];
        header.extend((0..dim).map(|i| format!("x_{i}")));
        header.extend((0..dim).map(|i| format!("g_{i}")));
        header.push("step".into());
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&header)?;
        for k in 0..=self.iterations {
            let mut row = vec![k.to_string()];
            row.extend(self.iterates.sample(k).iter().map(|&v| machine(v)));
            row.extend(self.gradients.sample(k).iter().map(|&v| machine(v)));
            row.push(self.step_history.get(k).map_or(String::new(), |&v| machine(v)));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `‖g_now + g_prev‖² < tol`.
pub fn paired_gradient_criterion(g_now: &[f64], g_prev: &[f64], tol: f64) -> Result<bool> {
    ensure_dim(g_now.len(), g_prev.len())?;
    let sum: f64 = g_now.iter().zip(g_prev).map(|(a, b)| (a + b) * (a + b)).sum();
    Ok(sum < tol)
}

/// Largest `α = initial·shrinkʲ` with
/// `f(x − α∇f(x)) ≤ f(x) − c·α·‖∇f(x)‖²`.
pub fn armijo_alpha(f: &SectorFunction, x: &[f64], params: &ArmijoParams) -> Result<f64> {
    ensure_dim(f.dim(), x.len())?;
    params.validate()?;
    let g = f.gradient(x);
    let g2 = norm_sq(&g);
    if g2 == 0.0 {
        return Err(Error::invalid("Armijo search needs a nonzero gradient"));
    }
    let fx = f.value(x);
    let mut alpha = params.initial.unwrap_or(1.0);
    for _ in 0..=MAX_HALVINGS {
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
        if f.value(&trial) <= fx - params.c * alpha * g2 {
            return Ok(alpha);
        }
        alpha *= params.shrink;
    }
    Err(Error::LineSearchFailure { halvings: MAX_HALVINGS })
}

/// Largest `s = min(initial, cap)·shrinkʲ` with
/// `f(x − s∇f(s·x)) ≤ f(x) − c·s·⟨∇f(x), ∇f(s·x)⟩`.
///
/// Only positive schedules are searched.
pub fn armijo_s(f: &SectorFunction, x: &[f64], params: &ArmijoParams, cap: f64) -> Result<f64> {
    ensure_dim(f.dim(), x.len())?;
    params.validate()?;
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::invalid(format!("cap must be positive, got {cap}")));
    }
    let g = f.gradient(x);
    if norm_sq(&g) == 0.0 {
        return Err(Error::invalid("Armijo search needs a nonzero gradient"));
    }
    let fx = f.value(x);
    let mut s = params.initial.map_or(cap, |t| t.min(cap));
    for _ in 0..=MAX_HALVINGS {
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let gs = f.gradient(&sx);
        let trial: Vec<f64> = x.iter().zip(&gs).map(|(xi, gi)| xi - s * gi).collect();
        if f.value(&trial) <= fx - params.c * s * dot(&g, &gs) {
            return Ok(s);
        }
        s *= params.shrink;
    }
    Err(Error::LineSearchFailure { halvings: MAX_HALVINGS })
}

fn effective_rules(stops: &[StoppingRule]) -> Result<Vec<StoppingRule>> {
    let mut rules = Vec::with_capacity(stops.len() + 1);
    for &r in stops {
        match r {
            StoppingRule::GradNorm(t) | StoppingRule::PairedGrad(t) if !(t > 0.0) => {
                return Err(Error::invalid(format!("stopping tolerance must be positive, got {t}")));
            }
            _ => rules.push(r),
        }
    }
    if !rules.iter().any(|r| matches!(r, StoppingRule::MaxIter(_))) {
        rules.push(StoppingRule::MaxIter(DEFAULT_MAX_ITER));
    }
    // evaluation order: GRAD_NORM, PAIRED_GRAD, MAX_ITER
    rules.sort_by_key(|r| match r {
        StoppingRule::GradNorm(_) => 0,
        StoppingRule::PairedGrad(_) => 1,
        StoppingRule::MaxIter(_) => 2,
    });
    Ok(rules)
}

fn check_stop(rules: &[StoppingRule], k: usize, g: &[f64], g_prev: Option<&[f64]>) -> Option<Termination> {
    rules.iter().find_map(|rule| match *rule {
        StoppingRule::GradNorm(tol) => (norm(g) < tol).then_some(Termination::GradNormMet),
        StoppingRule::PairedGrad(tol) => g_prev
            .filter(|prev| paired_gradient_criterion(g, prev, tol).unwrap_or(false))
            .map(|_| Termination::PairedGradMet),
        StoppingRule::MaxIter(cap) => (k >= cap).then_some(Termination::MaxIterHit),
    })
}

fn run<U>(f: &SectorFunction, x0: &[f64], stops: &[StoppingRule], mut update: U) -> Result<RunTrace>
where
    U: FnMut(&[f64], &[f64]) -> Result<(Vec<f64>, f64)>,
{
    ensure_dim(f.dim(), x0.len())?;
    let rules = effective_rules(stops)?;
    let mut iterates = Signal::new(f.dim())?;
    let mut gradients = Signal::new(f.dim())?;
    let mut step_history = Vec::new();
    let mut x = x0.to_vec();
    let mut k = 0usize;
    loop {
        let g = f.gradient(&x);
        iterates.push(&x)?;
        gradients.push(&g)?;
        let prev = k.checked_sub(1).map(|j| gradients.sample(j));
        if let Some(termination) = check_stop(&rules, k, &g, prev) {
            return Ok(RunTrace {
                iterates,
                gradients,
                iterations: k,
                termination,
                step_history,
            });
        }
        let (next, step) = update(&x, &g)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: k + 1,
                last_finite: x,
            });
        }
        step_history.push(step);
        x = next;
        k += 1;
    }
}

/// Plain GD with a fixed or backtracking step size.
pub fn gd_run(f: &SectorFunction, x0: &[f64], schedule: &StepSchedule, stops: &[StoppingRule]) -> Result<RunTrace> {
    schedule.validate()?;
    let schedule = *schedule;
    run(f, x0, stops, |x, g| {
        let alpha = match schedule {
            StepSchedule::FixedAlpha(a) => a,
            StepSchedule::ArmijoAlpha(p) => armijo_alpha(f, x, &p)?,
            _ => return Err(Error::invalid("gd_run needs a step-size schedule (fixed alpha or Armijo alpha)")),
        };
        let next = x.iter().zip(g).map(|(xi, gi)| xi - alpha * gi).collect();
        Ok((next, alpha))
    })
}

/// Gain-scheduled GD with a fixed or backtracking scheduling value.
pub fn gsgd_run(f: &SectorFunction, x0: &[f64], schedule: &StepSchedule, stops: &[StoppingRule]) -> Result<RunTrace> {
    schedule.validate()?;
    let schedule = *schedule;
    run(f, x0, stops, |x, _| {
        let s = match schedule {
            StepSchedule::FixedS(s) => s,
            StepSchedule::ArmijoS { params, cap } => armijo_s(f, x, &params, cap)?,
            _ => return Err(Error::invalid("gsgd_run needs a scheduling function (fixed s or Armijo s)")),
        };
        let sx: Vec<f64> = x.iter().map(|v| s * v).collect();
        let gs = f.gradient(&sx);
        let next = x.iter().zip(&gs).map(|(xi, gi)| xi - s * gi).collect();
        Ok((next, s))
    })
}
