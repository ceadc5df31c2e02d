//! Negative-feedback interconnection of a GD controller with the shifted
//! gradient, before and after the loop transformation.
//!
//! Wiring (both forms):
//!
//! ```text
//! u1[k] = r1[k] − y2[k]        y1 = G u1
//! u2[k] = r2[k] + y1[k]        y2 = Δ u2
//! ```
//!
//! In the transformed loop the controller carries a feedthrough `d` and the
//! nonlinearity becomes `Δ̄`: the shifted gradient in positive feedback
//! through `d`, i.e. `y = ∇f(u + d·y + x*)`, and the second exogenous input
//! becomes `r̄2 = r2 − d·r1`.

use std::io::Write;

use crate::error::{ensure_dim, Error, Result};
use crate::functions::{shifted_gradient, SectorFunction};
use crate::lti::{gd_realization, modified_gd_realization, StateSpaceRealization};
use crate::numfmt::machine;
use crate::signals::{norm, Signal};

/// Fixed-point tolerance for evaluating `Δ̄`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration budget for strictly contractive `Δ̄` (`d·L < 1`).
pub const DEFAULT_MAX_ITER: usize = 1_000;
/// Iteration budget at the boundary `d·L = 1`.
pub const BOUNDARY_MAX_ITER: usize = 10_000;
/// Damping used at the boundary `d·L = 1`.
pub const BOUNDARY_DAMPING: f64 = 0.5;

/// Two-block loop with a state-space controller and a sector-bounded
/// nonlinearity.
#[derive(Clone, Debug)]
pub struct FeedbackLoop {
    pub controller: StateSpaceRealization,
    pub nonlinearity: SectorFunction,
    pub r1: Signal,
    pub r2: Signal,
    pub xi0: Vec<f64>,
}

impl FeedbackLoop {
    /// Loop with zero exogenous inputs over `horizon` steps.
    pub fn new(controller: StateSpaceRealization, nonlinearity: SectorFunction, xi0: Vec<f64>, horizon: usize) -> Result<Self> {
        let dim = nonlinearity.dim();
        Self::with_inputs(
            controller,
            nonlinearity,
            Signal::zeros(dim, horizon)?,
            Signal::zeros(dim, horizon)?,
            xi0,
        )
    }

    pub fn with_inputs(
        controller: StateSpaceRealization,
        nonlinearity: SectorFunction,
        r1: Signal,
        r2: Signal,
        xi0: Vec<f64>,
    ) -> Result<Self> {
        let dim = nonlinearity.dim();
        ensure_dim(dim, controller.input_dim())?;
        ensure_dim(dim, controller.output_dim())?;
        ensure_dim(controller.state_dim(), xi0.len())?;
        ensure_dim(dim, r1.dim())?;
        ensure_dim(dim, r2.dim())?;
        if r1.horizon() != r2.horizon() {
            return Err(Error::shape(
                format!("r2 horizon {}", r1.horizon()),
                format!("{}", r2.horizon()),
            ));
        }
        Ok(Self {
            controller,
            nonlinearity,
            r1,
            r2,
            xi0,
        })
    }

    fn check_horizon(&self, steps: usize) -> Result<()> {
        if steps > self.r1.horizon() {
            return Err(Error::HorizonExceeded {
                requested: steps,
                available: self.r1.horizon(),
            });
        }
        Ok(())
    }
}

/// Signals produced by running a loop. `states[k]` is the controller state
/// at the start of step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopTrace {
    pub u1: Signal,
    pub y1: Signal,
    pub u2: Signal,
    pub y2: Signal,
    pub states: Signal,
    pub steps: usize,
}

impl LoopTrace {
    fn empty(dim: usize, state_dim: usize) -> Result<Self> {
        Ok(Self {
            u1: Signal::new(dim)?,
            y1: Signal::new(dim)?,
            u2: Signal::new(dim)?,
            y2: Signal::new(dim)?,
            states: Signal::new(state_dim)?,
            steps: 0,
        })
    }

    /// Largest violation of `u1 = r1 − y2` and `u2 = r2 + y1` over the trace.
    pub fn wiring_residual(&self, r1: &Signal, r2: &Signal) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.steps {
            let (u1, y1, u2, y2) = (self.u1.sample(k), self.y1.sample(k), self.u2.sample(k), self.y2.sample(k));
            for i in 0..u1.len() {
                worst = worst.max((u1[i] - (r1.sample(k)[i] - y2[i])).abs());
                worst = worst.max((u2[i] - (r2.sample(k)[i] + y1[i])).abs());
            }
        }
        worst
    }

    /// CSV with columns `k,u1,y1,u2,y2,state` (suffixed `_i` per component
    /// for vector loops).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dim = self.u1.dim();
        let cols = |name: &str, n: usize| -> Vec<String> {
            if n == 1 {
                vec![name.to_string()]
            } else {
                (0..n).map(|i| format!("{name}_{i}")).collect()
            }
        };
        let mut header = vec!["k".to_string()];
        for name in ["u1", "y1", "u2", "y2"] {
            header.extend(cols(name, dim));
        }
        header.extend(cols("state", self.states.dim()));
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&header)?;
        for k in 0..self.steps {
            let mut row = vec![k.to_string()];
            for s in [&self.u1, &self.y1, &self.u2, &self.y2, &self.states] {
                row.extend(s.sample(k).iter().map(|&v| machine(v)));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs the untransformed loop. The controller must be strictly proper so
/// each step can be evaluated in order without an algebraic cycle.
pub fn run_untransformed(lp: &FeedbackLoop, steps: usize) -> Result<LoopTrace> {
    if !lp.controller.is_strictly_proper() {
        return Err(Error::AlgebraicLoop);
    }
    lp.check_horizon(steps)?;
    let dim = lp.nonlinearity.dim();
    let mut trace = LoopTrace::empty(dim, lp.controller.state_dim())?;
    let mut xi = lp.xi0.clone();
    let zero = vec![0.0; dim];
    for k in 0..steps {
        let y1 = lp.controller.output(&xi, &zero);
        let u2: Vec<f64> = lp.r2.sample(k).iter().zip(&y1).map(|(r, y)| r + y).collect();
        let y2 = shifted_gradient(&lp.nonlinearity, &u2)?;
        let u1: Vec<f64> = lp.r1.sample(k).iter().zip(&y2).map(|(r, y)| r - y).collect();
        let (next, _) = lp.controller.step(&xi, &u1);
        trace.states.push(&xi)?;
        trace.u1.push(&u1)?;
        trace.y1.push(&y1)?;
        trace.u2.push(&u2)?;
        trace.y2.push(&y2)?;
        xi = next;
    }
    trace.steps = steps;
    Ok(trace)
}

#[derive(Clone, Debug)]
pub struct DeltaBarOptions {
    /// Stop once `‖∇f(u + d·y + x*) − y‖ ≤ tol·max(1, ‖y‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation weight `θ` in `y ← y + θ·(g(y) − y)`.
    pub damping: f64,
    /// Starting point; defaults to `∇f(u + x*)`.
    pub initial: Option<Vec<f64>>,
    /// Permit `d·L = 1`, where the map is only non-expansive.
    pub allow_boundary: bool,
}

impl Default for DeltaBarOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            damping: 1.0,
            initial: None,
            allow_boundary: false,
        }
    }
}

impl DeltaBarOptions {
    /// Settings for the non-expansive boundary case.
    pub fn boundary() -> Self {
        Self {
            max_iter: BOUNDARY_MAX_ITER,
            damping: BOUNDARY_DAMPING,
            allow_boundary: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointSolution {
    pub y: Vec<f64>,
    /// Number of residual evaluations after the starting point.
    pub iterations: usize,
    pub residual: f64,
}

fn is_boundary(d: f64, l: f64) -> bool {
    (d * l - 1.0).abs() <= crate::passivity::BOUNDARY_RTOL
}

/// `Δ̄(u)`: the `y` solving `y = ∇f(u + d·y + x*)`.
pub fn evaluate_delta_bar(f: &SectorFunction, d: f64, u: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let opts = DeltaBarOptions {
        tol,
        max_iter,
        ..DeltaBarOptions::default()
    };
    Ok(evaluate_delta_bar_with(f, d, u, &opts)?.y)
}

/// `Δ̄` applied sample by sample to a signal.
pub fn delta_bar_signal(f: &SectorFunction, d: f64, u: &Signal) -> Result<Signal> {
    ensure_dim(f.dim(), u.dim())?;
    u.map_samples(|s| Ok(evaluate_delta_bar_with(f, d, s, &DeltaBarOptions::default())?.y))
}

/// Fixed-point evaluation of `Δ̄` with explicit options.
///
/// For `d·L < 1` the map `y ↦ ∇f(u + d·y + x*)` is a contraction with factor
/// `d·L`, so the iteration converges to the unique solution from any start.
pub fn evaluate_delta_bar_with(f: &SectorFunction, d: f64, u: &[f64], opts: &DeltaBarOptions) -> Result<FixedPointSolution> {
    ensure_dim(f.dim(), u.len())?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid(format!("feedthrough must be positive, got {d}")));
    }
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::invalid("tol must be positive and damping in (0, 1]"));
    }
    let contraction = d * f.l();
    if contraction >= 1.0 && !(opts.allow_boundary && is_boundary(d, f.l())) {
        return Err(Error::ContractionViolation(format!(
            "d·L = {contraction} must be below 1 for a unique fixed point"
        )));
    }
    let map = |y: &[f64]| -> Result<Vec<f64>> {
        let arg: Vec<f64> = u.iter().zip(y).map(|(a, b)| a + d * b).collect();
        shifted_gradient(f, &arg)
    };
    let mut y = match &opts.initial {
        Some(y0) => {
            ensure_dim(f.dim(), y0.len())?;
            y0.clone()
        }
        None => shifted_gradient(f, u)?,
    };
    let mut residual = f64::INFINITY;
    for iterations in 0..=opts.max_iter {
        let gy = map(&y)?;
        let step: Vec<f64> = gy.iter().zip(&y).map(|(a, b)| a - b).collect();
        residual = norm(&step);
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.tol * norm(&y).max(1.0) {
            return Ok(FixedPointSolution { y, iterations, residual });
        }
        if iterations == opts.max_iter {
            break;
        }
        for (yi, si) in y.iter_mut().zip(&step) {
            *yi += opts.damping * si;
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Iteration budget large enough for the contraction bound
/// `ceil(log(tol/‖y₀‖)/log(d·L)) + 1` with a wide margin on `‖y₀‖`.
fn contraction_budget(contraction: f64, tol: f64) -> usize {
    if contraction <= 0.0 {
        return DEFAULT_MAX_ITER;
    }
    let needed = ((tol * 1e-6).ln() / contraction.ln()).ceil();
    if needed.is_finite() {
        DEFAULT_MAX_ITER.max(needed as usize + 10)
    } else {
        DEFAULT_MAX_ITER
    }
}

/// Loop-transformed configuration: modified controller with feedthrough `d`
/// against `Δ̄`.
#[derive(Clone, Debug)]
pub struct TransformedLoop {
    pub f: SectorFunction,
    pub alpha: f64,
    pub d: f64,
    pub r1: Signal,
    pub r2: Signal,
    pub xi0: Vec<f64>,
}

/// Transformed loop from an initial iterate `x0` (state `x0 − x*`), zero
/// exogenous inputs.
pub fn run_transformed(f: &SectorFunction, alpha: f64, d: f64, x0: &[f64], steps: usize) -> Result<LoopTrace> {
    ensure_dim(f.dim(), x0.len())?;
    let xi0 = x0.iter().zip(f.minimizer()).map(|(a, b)| a - b).collect();
    let lp = TransformedLoop {
        f: f.clone(),
        alpha,
        d,
        r1: Signal::zeros(f.dim(), steps)?,
        r2: Signal::zeros(f.dim(), steps)?,
        xi0,
    };
    run_transformed_loop(&lp, steps)
}

/// Simulates the transformed loop. The trace records `ū2`, `ȳ1` (barred
/// signals), so its wiring identities hold against `r1` and `r̄2 = r2 − d·r1`.
///
/// Each step contains an algebraic cycle through the controller feedthrough
/// and the positive feedback inside `Δ̄`. Writing `v = ū2 + d·y2`, the loop
/// equations give `v = r2 + Cξ` directly, which fixes `ū2 = v − d·∇f(v + x*)`.
/// `Δ̄(ū2)` is then evaluated independently by fixed-point iteration.
pub fn run_transformed_loop(lp: &TransformedLoop, steps: usize) -> Result<LoopTrace> {
    let f = &lp.f;
    let dim = f.dim();
    let ctrl = modified_gd_realization(lp.alpha, lp.d, dim)?;
    ensure_dim(dim, lp.xi0.len())?;
    ensure_dim(dim, lp.r1.dim())?;
    ensure_dim(dim, lp.r2.dim())?;
    let available = lp.r1.horizon().min(lp.r2.horizon());
    if steps > available {
        return Err(Error::HorizonExceeded {
            requested: steps,
            available,
        });
    }
    let contraction = lp.d * f.l();
    let boundary = is_boundary(lp.d, f.l());
    if contraction >= 1.0 && !boundary {
        return Err(Error::ContractionViolation(format!(
            "d·L = {contraction} exceeds 1; the transformed nonlinearity is not well posed"
        )));
    }
    let base_opts = if boundary {
        DeltaBarOptions::boundary()
    } else {
        // a residual of r leaves an error up to r/(1 − d·L) in the fixed point
        let tol = DEFAULT_TOL * (1.0 - contraction);
        DeltaBarOptions {
            tol,
            max_iter: contraction_budget(contraction, tol),
            ..DeltaBarOptions::default()
        }
    };

    let mut trace = LoopTrace::empty(dim, dim)?;
    let mut xi = lp.xi0.clone();
    let zero = vec![0.0; dim];
    for k in 0..steps {
        let r1 = lp.r1.sample(k);
        let r2 = lp.r2.sample(k);
        let r2_bar: Vec<f64> = r2.iter().zip(r1).map(|(a, b)| a - lp.d * b).collect();
        let cxi = ctrl.output(&xi, &zero);
        let v: Vec<f64> = r2.iter().zip(&cxi).map(|(a, b)| a + b).collect();
        let grad_v = shifted_gradient(f, &v)?;
        let u2_in: Vec<f64> = v.iter().zip(&grad_v).map(|(a, g)| a - lp.d * g).collect();

        let y2 = loop_branch_delta_bar(f, lp.d, &u2_in, &grad_v, &base_opts, boundary)?;

        let u1: Vec<f64> = r1.iter().zip(&y2).map(|(r, y)| r - y).collect();
        let (next, y1) = ctrl.step(&xi, &u1);
        let u2: Vec<f64> = r2_bar.iter().zip(&y1).map(|(r, y)| r + y).collect();
        trace.states.push(&xi)?;
        trace.u1.push(&u1)?;
        trace.y1.push(&y1)?;
        trace.u2.push(&u2)?;
        trace.y2.push(&y2)?;
        xi = next;
    }
    trace.steps = steps;
    Ok(trace)
}

/// Evaluates `Δ̄(ū2)` and returns the solution lying on the loop's branch.
///
/// Away from the boundary the iteration is started cold from `∇f(ū2 + x*)`.
/// When `∇f` is steeper than `L` between points (the sector bound only
/// constrains it relative to `x*`), `Δ̄` can have several fixed points or the
/// cold iteration can fail to settle; the solve is then repeated from the
/// loop-consistent value `∇f(v + x*)`, which is verified as a fixed point.
fn loop_branch_delta_bar(
    f: &SectorFunction,
    d: f64,
    u2: &[f64],
    loop_value: &[f64],
    opts: &DeltaBarOptions,
    boundary: bool,
) -> Result<Vec<f64>> {
    if !boundary {
        if let Ok(sol) = evaluate_delta_bar_with(f, d, u2, opts) {
            let gap: Vec<f64> = sol.y.iter().zip(loop_value).map(|(a, b)| a - b).collect();
            if norm(&gap) <= 1e-9 * norm(loop_value).max(1.0) {
                return Ok(sol.y);
            }
        }
    }
    let warm = DeltaBarOptions {
        initial: Some(loop_value.to_vec()),
        ..opts.clone()
    };
    Ok(evaluate_delta_bar_with(f, d, u2, &warm)?.y)
}

/// Max over `k < steps` of `‖x_direct[k] − (ξ_loop[k] + x*)‖`, comparing the
/// plain recursion `x ← x − α∇f(x)` against the transformed loop with
/// `d = α/2`.
pub fn loop_equivalence_report(f: &SectorFunction, alpha: f64, x0: &[f64], steps: usize) -> Result<f64> {
    ensure_dim(f.dim(), x0.len())?;
    let trace = run_transformed(f, alpha, alpha / 2.0, x0, steps)?;
    let mut x = x0.to_vec();
    let mut worst = 0.0f64;
    for k in 0..steps {
        let xi = trace.states.sample(k);
        let dev: Vec<f64> = x
            .iter()
            .zip(xi)
            .zip(f.minimizer())
            .map(|((a, b), s)| a - (b + s))
            .collect();
        worst = worst.max(norm(&dev));
        let g = f.gradient(&x);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= alpha * gi;
        }
    }
    Ok(worst)
}

/// Untransformed GD loop from `x0` with zero exogenous inputs.
pub fn gd_loop(f: &SectorFunction, alpha: f64, x0: &[f64], steps: usize) -> Result<LoopTrace> {
    ensure_dim(f.dim(), x0.len())?;
    let xi0 = x0.iter().zip(f.minimizer()).map(|(a, b)| a - b).collect();
    let lp = FeedbackLoop::new(gd_realization(alpha, f.dim())?, f.clone(), xi0, steps)?;
    run_untransformed(&lp, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{diag_quadratic, paper_oscillatory, quadratic};
    use rand::{Rng, SeedableRng};

    #[test]
    fn untransformed_one_step_convergence() {
        let f = quadratic(100.0).unwrap();
        let t = gd_loop(&f, 0.01, &[1.0], 3).unwrap();
        assert_eq!(t.states, Signal::scalar(&[1.0, 0.0, 0.0]));
        assert_eq!(t.steps, 3);
    }

    #[test]
    fn untransformed_equilibrium() {
        let f = diag_quadratic(1.0, 100.0).unwrap();
        let t = gd_loop(&f, 0.01, &[0.0, 0.0], 10).unwrap();
        for s in [&t.u1, &t.y1, &t.u2, &t.y2, &t.states] {
            assert!(s.as_flat().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn untransformed_oscillates_at_two_over_l() {
        let f = quadratic(100.0).unwrap();
        let t = gd_loop(&f, 0.02, &[1.0], 6).unwrap();
        for (k, s) in t.states.samples().enumerate() {
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((s[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn untransformed_rejects_feedthrough() {
        let f = quadratic(1.0).unwrap();
        let lp = FeedbackLoop::new(modified_gd_realization(0.1, 0.05, 1).unwrap(), f, vec![1.0], 5).unwrap();
        assert!(matches!(run_untransformed(&lp, 5), Err(Error::AlgebraicLoop)));
    }

    #[test]
    fn untransformed_wiring_with_inputs() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let r1 = Signal::scalar(&[0.1, -0.2, 0.3, 0.0]);
        let r2 = Signal::scalar(&[0.5, 0.0, -0.1, 0.2]);
        let lp = FeedbackLoop::with_inputs(gd_realization(0.01, 1).unwrap(), f, r1.clone(), r2.clone(), vec![2.0]).unwrap();
        let t = run_untransformed(&lp, 4).unwrap();
        assert!(t.wiring_residual(&r1, &r2) <= 1e-12);
        assert!(run_untransformed(&lp, 5).is_err());
    }

    #[test]
    fn delta_bar_zero_input() {
        for f in [paper_oscillatory(1.0, 100.0).unwrap(), quadratic(100.0).unwrap()] {
            let y = evaluate_delta_bar(&f, 0.005, &[0.0], 1e-12, 1000).unwrap();
            assert_eq!(y, vec![0.0]);
        }
    }

    #[test]
    fn delta_bar_linear_closed_form() {
        let f = quadratic(100.0).unwrap();
        let y = evaluate_delta_bar(&f, 0.005, &[1.0], 1e-12, 1000).unwrap();
        assert!((y[0] - 200.0).abs() < 1e-9);
    }

    // Bisection on g(y) = y − f'(u + d·y) over a bracket where d·f'' < 1, so
    // g is increasing there and the root is unique.
    fn bisect_delta_bar(f: &SectorFunction, d: f64, u: f64) -> f64 {
        let g = |y: f64| y - f.gradient(&[u + d * y])[0];
        let (mut lo, mut hi) = (-50.0, 800.0);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn delta_bar_matches_bisection() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let sol = evaluate_delta_bar_with(&f, 0.005, &[0.3], &DeltaBarOptions::default()).unwrap();
        let y = sol.y[0];
        let residual = (y - f.gradient(&[0.3 + 0.005 * y])[0]).abs();
        assert!(residual <= 1e-12 * y.abs().max(1.0));
        let oracle = bisect_delta_bar(&f, 0.005, 0.3);
        assert!((y - oracle).abs() <= 1e-9 * oracle.abs(), "{y} vs {oracle}");
    }

    #[test]
    fn delta_bar_errors() {
        let f = quadratic(100.0).unwrap();
        assert!(matches!(
            evaluate_delta_bar(&f, 0.02, &[1.0], 1e-12, 100),
            Err(Error::ContractionViolation(_))
        ));
        assert!(matches!(
            evaluate_delta_bar(&f, 0.01, &[1.0], 1e-12, 100),
            Err(Error::ContractionViolation(_))
        ));
        assert!(matches!(
            evaluate_delta_bar(&f, 0.009, &[1.0], 1e-12, 3),
            Err(Error::NonConvergence { .. })
        ));
        assert!(evaluate_delta_bar(&f, 0.005, &[1.0, 2.0], 1e-12, 10).is_err());
    }

    #[test]
    fn delta_bar_iteration_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        // arguments stay where f' is L-Lipschitz
        let fs = [
            paper_oscillatory(1.0, 100.0).unwrap(),
            quadratic(100.0).unwrap(),
        ];
        for i in 0..200 {
            let f = &fs[i % 2];
            let d = rng.random_range(0.0005..0.009);
            let u = rng.random_range(-0.2..0.2);
            let y0 = f.gradient(&[u])[0].abs();
            if y0 == 0.0 {
                continue;
            }
            let tol = 1e-12;
            let opts = DeltaBarOptions {
                max_iter: 100_000,
                ..DeltaBarOptions::default()
            };
            let sol = evaluate_delta_bar_with(f, d, &[u], &opts).unwrap();
            let bound = ((tol / y0).ln() / (d * 100.0).ln()).ceil().max(0.0) as usize + 1;
            assert!(sol.iterations <= bound, "d={d} u={u}: {} > {bound}", sol.iterations);
        }
    }

    #[test]
    fn transformed_matches_untransformed_quadratic() {
        let f = quadratic(100.0).unwrap();
        let direct = gd_loop(&f, 0.01, &[1.0], 20).unwrap();
        let transformed = run_transformed(&f, 0.01, 0.005, &[1.0], 20).unwrap();
        for (a, b) in direct.states.as_flat().iter().zip(transformed.states.as_flat()) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn transformed_stationary_at_minimizer() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let t = run_transformed(&f, 0.01, 0.005, &[0.0], 10).unwrap();
        assert!(t.states.as_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transformed_tracks_direct_gd_on_oscillatory() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let t = run_transformed(&f, 0.01, 0.005, &[5.0], 50).unwrap();
        let mut x = 5.0;
        for k in 0..50 {
            assert!((t.states.sample(k)[0] - x).abs() <= 1e-9, "k={k}");
            x -= 0.01 * f.gradient(&[x])[0];
        }
    }

    #[test]
    fn transformed_wiring_with_inputs() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let r1 = Signal::scalar(&[0.1, -0.2, 0.3, 0.0, 0.05]);
        let r2 = Signal::scalar(&[0.5, 0.0, -0.1, 0.2, 0.0]);
        let d = 0.004;
        let lp = TransformedLoop {
            f: f.clone(),
            alpha: 0.008,
            d,
            r1: r1.clone(),
            r2: r2.clone(),
            xi0: vec![1.5],
        };
        let t = run_transformed_loop(&lp, 5).unwrap();
        let r2_bar = r2.lin_comb(1.0, &r1, -d).unwrap();
        assert!(t.wiring_residual(&r1, &r2_bar) <= 1e-12);

        // same states as the untransformed loop with the same inputs
        let plain = FeedbackLoop::with_inputs(gd_realization(0.008, 1).unwrap(), f, r1, r2, vec![1.5]).unwrap();
        let u = run_untransformed(&plain, 5).unwrap();
        for (a, b) in u.states.as_flat().iter().zip(t.states.as_flat()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn equivalence_examples() {
        let f = quadratic(100.0).unwrap();
        assert!(loop_equivalence_report(&f, 0.01, &[7.0], 100).unwrap() <= 1e-9);
        assert_eq!(loop_equivalence_report(&f, 0.013, &[0.0], 100).unwrap(), 0.0);
        let f = diag_quadratic(1.0, 100.0).unwrap();
        assert!(loop_equivalence_report(&f, 0.02, &[1.0, 1.0], 100).unwrap() <= 1e-9);
    }

    #[test]
    fn equivalence_rejects_uncertifiable_step() {
        let f = quadratic(100.0).unwrap();
        assert!(matches!(
            loop_equivalence_report(&f, 0.05, &[1.0], 10),
            Err(Error::ContractionViolation(_))
        ));
    }

    #[test]
    fn trace_csv_columns() {
        let f = diag_quadratic(1.0, 100.0).unwrap();
        let t = gd_loop(&f, 0.01, &[1.0, 1.0], 3).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,u1_0,u1_1,y1_0,y1_1,u2_0,u2_1,y2_0,y2_1,state_0,state_1\n"));
        assert_eq!(text.lines().count(), 4);

        let f = quadratic(2.0).unwrap();
        let t = gd_loop(&f, 0.1, &[1.0], 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,u1,y1,u2,y2,state\n"));
    }
}
