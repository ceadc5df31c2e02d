//! Objectives with sector-bounded gradients.
//!
//! A [`SectorFunction`] carries its sector bounds `(m, L)` and minimiser `x*`
//! alongside `f` and `∇f`. Membership in the sector class is characterised by
//! the co-coercivity inequality
//!
//! ```text
//! ⟨x − x*, ∇f(x)⟩ ≥ mL/(m+L)·‖x − x*‖² + 1/(m+L)·‖∇f(x)‖²
//! ```
//!
//! which [`cocoercivity_residual`] evaluates pointwise. Built-in functions
//! have analytic gradients; custom functions are accepted with caller-supplied
//! metadata and can be spot-checked with [`sector_membership_scan`].

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::signals::{dot, norm_sq};

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    /// `((L−m)/4)·(((L+m)/(L−m))·x² + 2 sin x − 2x cos x)`
    Oscillatory,
    Quadratic,
    /// `½ xᵀ diag(m, L) x`
    DiagQuadratic,
    Custom {
        value: Arc<ValueFn>,
        gradient: Arc<GradientFn>,
    },
}

/// Differentiable objective with registered sector bounds and minimiser.
#[derive(Clone)]
pub struct SectorFunction {
    name: String,
    dim: usize,
    m: f64,
    l: f64,
    minimizer: Vec<f64>,
    kind: Kind,
}

impl fmt::Debug for SectorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SectorFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("m", &self.m)
            .field("l", &self.l)
            .field("minimizer", &self.minimizer)
            .finish()
    }
}

fn check_sector(m: f64, l: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite() && l.is_finite() && m <= l) {
        return Err(Error::invalid(format!("sector bounds must satisfy 0 < m <= L, got m={m}, L={l}")));
    }
    Ok(())
}

/// Oscillatory scalar objective, non-convex for `L` large relative to `m`,
/// with minimiser 0 and sector bounds `(m, L)`.
pub fn paper_oscillatory(m: f64, l: f64) -> Result<SectorFunction> {
    check_sector(m, l)?;
    if m >= l {
        return Err(Error::invalid(format!("oscillatory function needs m < L, got m={m}, L={l}")));
    }
    Ok(SectorFunction {
        name: "paper-oscillatory".into(),
        dim: 1,
        m,
        l,
        minimizer: vec![0.0],
        kind: Kind::Oscillatory,
    })
}

/// `f(x) = l·x²/2`, so `m = L = l`.
pub fn quadratic(l: f64) -> Result<SectorFunction> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!("curvature must be positive, got {l}")));
    }
    Ok(SectorFunction {
        name: "quadratic".into(),
        dim: 1,
        m: l,
        l,
        minimizer: vec![0.0],
        kind: Kind::Quadratic,
    })
}

/// Two-dimensional `½ xᵀ diag(m, l) x`.
pub fn diag_quadratic(m: f64, l: f64) -> Result<SectorFunction> {
    check_sector(m, l)?;
    if m >= l {
        return Err(Error::invalid(format!("diag-quadratic needs m < L, got m={m}, L={l}")));
    }
    Ok(SectorFunction {
        name: "diag-quadratic".into(),
        dim: 2,
        m,
        l,
        minimizer: vec![0.0, 0.0],
        kind: Kind::DiagQuadratic,
    })
}

/// Built-in function by CLI name. `quadratic` uses `l` only.
pub fn by_name(name: &str, m: f64, l: f64) -> Result<SectorFunction> {
    match name {
        "paper-oscillatory" => paper_oscillatory(m, l),
        "quadratic" => quadratic(l),
        "diag-quadratic" => diag_quadratic(m, l),
        other => Err(Error::invalid(format!(
            "unknown function {other:?} (expected paper-oscillatory, quadratic or diag-quadratic)"
        ))),
    }
}

impl SectorFunction {
    /// User-supplied objective. The sector bounds are trusted, not proven;
    /// only `∇f(x*) = 0` is checked here.
    pub fn custom<V, G>(name: impl Into<String>, m: f64, l: f64, minimizer: Vec<f64>, value: V, gradient: G) -> Result<Self>
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        check_sector(m, l)?;
        if minimizer.is_empty() {
            return Err(Error::invalid("minimizer must have positive dimension"));
        }
        let g = gradient(&minimizer);
        ensure_dim(minimizer.len(), g.len())?;
        if norm_sq(&g).sqrt() > 1e-12 {
            return Err(Error::invalid("gradient does not vanish at the supplied minimizer"));
        }
        Ok(Self {
            name: name.into(),
            dim: minimizer.len(),
            m,
            l,
            minimizer,
            kind: Kind::Custom {
                value: Arc::new(value),
                gradient: Arc::new(gradient),
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    /// `f(x)`. Panics if `x` has the wrong dimension; use [`Self::try_value`]
    /// for checked evaluation.
    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "dimension mismatch");
        let (m, l) = (self.m, self.l);
        match &self.kind {
            Kind::Oscillatory => {
                let x = x[0];
                (l - m) / 4.0 * ((l + m) / (l - m) * x * x + 2.0 * x.sin() - 2.0 * x * x.cos())
            }
            Kind::Quadratic => 0.5 * l * x[0] * x[0],
            Kind::DiagQuadratic => 0.5 * (m * x[0] * x[0] + l * x[1] * x[1]),
            Kind::Custom { value, .. } => value(x),
        }
    }

    /// `∇f(x)`. Panics on dimension mismatch like [`Self::value`].
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "dimension mismatch");
        let (m, l) = (self.m, self.l);
        match &self.kind {
            // product rule: the x·cos x terms cancel
            Kind::Oscillatory => {
                let x = x[0];
                vec![(l + m) / 2.0 * x + (l - m) / 2.0 * x * x.sin()]
            }
            Kind::Quadratic => vec![l * x[0]],
            Kind::DiagQuadratic => vec![m * x[0], l * x[1]],
            Kind::Custom { gradient, .. } => gradient(x),
        }
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64> {
        ensure_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    pub fn try_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim, x.len())?;
        Ok(self.gradient(x))
    }
}

/// `∇f(u + x*)`: the gradient seen from coordinates centred on the minimiser.
pub fn shifted_gradient(f: &SectorFunction, u: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(f.dim, u.len())?;
    let x: Vec<f64> = u.iter().zip(&f.minimizer).map(|(a, b)| a + b).collect();
    Ok(f.gradient(&x))
}

/// Pointwise co-coercivity slack; non-negative for every member of the sector
/// class.
pub fn cocoercivity_residual(f: &SectorFunction, x: &[f64]) -> Result<f64> {
    Ok(cocoercivity_terms(f, x)?.residual())
}

/// The three terms of the co-coercivity residual, kept separate so callers can
/// build a tolerance relative to their magnitudes.
#[derive(Clone, Copy, Debug)]
pub struct CocoercivityTerms {
    pub inner: f64,
    pub distance_term: f64,
    pub gradient_term: f64,
}

impl CocoercivityTerms {
    pub fn residual(&self) -> f64 {
        self.inner - self.distance_term - self.gradient_term
    }

    pub fn scale(&self) -> f64 {
        self.inner.abs() + self.distance_term + self.gradient_term
    }
}

pub fn cocoercivity_terms(f: &SectorFunction, x: &[f64]) -> Result<CocoercivityTerms> {
    ensure_dim(f.dim, x.len())?;
    let (m, l) = (f.m, f.l);
    let g = f.gradient(x);
    let e: Vec<f64> = x.iter().zip(&f.minimizer).map(|(a, b)| a - b).collect();
    Ok(CocoercivityTerms {
        inner: dot(&e, &g),
        distance_term: m * l / (m + l) * norm_sq(&e),
        gradient_term: norm_sq(&g) / (m + l),
    })
}

#[derive(Clone, Debug)]
pub struct MembershipScan {
    pub min_residual: f64,
    pub argmin: Vec<f64>,
    /// Smallest residual divided by `1 + |⟨x−x*,∇f⟩| + …` at the same point.
    pub min_relative_residual: f64,
    pub relative_argmin: Vec<f64>,
}

/// Samples `n_samples` points uniformly from `[lo, hi]^dim` (seeded) and
/// reports the worst co-coercivity residual found.
pub fn sector_membership_scan(f: &SectorFunction, lo: f64, hi: f64, n_samples: usize, seed: u64) -> Result<MembershipScan> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("empty sampling range [{lo}, {hi}]")));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scan = MembershipScan {
        min_residual: f64::INFINITY,
        argmin: Vec::new(),
        min_relative_residual: f64::INFINITY,
        relative_argmin: Vec::new(),
    };
    for _ in 0..n_samples {
        let x: Vec<f64> = (0..f.dim).map(|_| rng.random_range(lo..=hi)).collect();
        let terms = cocoercivity_terms(f, &x)?;
        let r = terms.residual();
        let rel = r / (1.0 + terms.scale());
        if r < scan.min_residual {
            scan.min_residual = r;
            scan.argmin = x.clone();
        }
        if rel < scan.min_relative_residual {
            scan.min_relative_residual = rel;
            scan.relative_argmin = x;
        }
    }
    Ok(scan)
}

/// Largest `|∂ᵢf − Dᵢf| / (1 + |∂ᵢf|)` where `Dᵢf` is the central difference
/// with width `1e-6·(1 + ‖x‖∞)`.
pub fn finite_difference_error(f: &SectorFunction, x: &[f64]) -> Result<f64> {
    let g = f.try_gradient(x)?;
    let h = 1e-6 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / (1.0 + g[i].abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn central_diff(f: &SectorFunction, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let h = 1e-6 * (1.0 + x[i].abs());
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f.value(&xp) - f.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn oscillatory_at_minimizer() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        assert_eq!(f.value(&[0.0]), 0.0);
        assert_eq!(f.gradient(&[0.0]), vec![0.0]);
    }

    #[test]
    fn oscillatory_at_pi() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let g = f.gradient(&[PI])[0];
        // frozen: 101/2·π; sin π contributes ~1e-14
        let expected = 101.0 / 2.0 * PI;
        assert!((g - expected).abs() < 1e-10 * expected);
        let fd = central_diff(&f, &[PI])[0];
        assert!((g - fd).abs() < 1e-6 * g.abs());

        let v = f.value(&[PI]);
        let expected_v = 99.0 / 4.0 * (101.0 / 99.0 * PI * PI + 2.0 * PI);
        assert!((v - expected_v).abs() < 1e-12 * expected_v);
        // trapezoid quadrature of f' from 0 to π as an independent check
        let n = 20_000;
        let h = PI / n as f64;
        let quad: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f.gradient(&[i as f64 * h])[0]
            })
            .sum::<f64>()
            * h;
        assert!((quad - v).abs() < 1e-6 * v);
    }

    #[test]
    fn oscillatory_rejects_degenerate_sector() {
        assert!(paper_oscillatory(5.0, 5.0).is_err());
        assert!(paper_oscillatory(2.0, 1.0).is_err());
        assert!(paper_oscillatory(0.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let f = quadratic(100.0).unwrap();
        assert_eq!((f.value(&[1.0]), f.gradient(&[1.0])[0]), (50.0, 100.0));
        let f = quadratic(1.0).unwrap();
        assert_eq!((f.value(&[0.0]), f.gradient(&[0.0])[0]), (0.0, 0.0));
        let f = quadratic(2.0).unwrap();
        assert_eq!((f.value(&[-3.0]), f.gradient(&[-3.0])[0]), (9.0, -6.0));
        assert_eq!((f.m(), f.l()), (2.0, 2.0));
        assert!(quadratic(0.0).is_err());
    }

    #[test]
    fn diag_quadratic_examples() {
        let f = diag_quadratic(1.0, 100.0).unwrap();
        assert_eq!(f.value(&[1.0, 1.0]), 50.5);
        assert_eq!(f.gradient(&[1.0, 1.0]), vec![1.0, 100.0]);
        assert_eq!(f.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
        let f = diag_quadratic(1.0, 2.0).unwrap();
        assert_eq!(f.value(&[2.0, 0.0]), 2.0);
        assert_eq!(f.gradient(&[2.0, 0.0]), vec![2.0, 0.0]);
        assert!(diag_quadratic(3.0, 3.0).is_err());
    }

    #[test]
    fn shifted_gradient_examples() {
        for f in builtins() {
            let zero = vec![0.0; f.dim()];
            assert!(shifted_gradient(&f, &zero).unwrap().iter().all(|&v| v == 0.0));
        }
        assert_eq!(shifted_gradient(&quadratic(100.0).unwrap(), &[1.0]).unwrap(), vec![100.0]);
        assert_eq!(
            shifted_gradient(&diag_quadratic(1.0, 100.0).unwrap(), &[1.0, 1.0]).unwrap(),
            vec![1.0, 100.0]
        );
        assert!(shifted_gradient(&quadratic(1.0).unwrap(), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn shifted_gradient_uses_minimizer() {
        let f = SectorFunction::custom(
            "shifted",
            2.0,
            2.0,
            vec![3.0],
            |x| (x[0] - 3.0).powi(2),
            |x| vec![2.0 * (x[0] - 3.0)],
        )
        .unwrap();
        assert_eq!(shifted_gradient(&f, &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(shifted_gradient(&f, &[1.0]).unwrap(), vec![2.0]);
        assert!(cocoercivity_residual(&f, &[7.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn custom_rejects_bad_minimizer() {
        let r = SectorFunction::custom("bad", 1.0, 1.0, vec![1.0], |x| x[0] * x[0], |x| vec![2.0 * x[0]]);
        assert!(r.is_err());
    }

    #[test]
    fn residual_examples() {
        let r = cocoercivity_residual(&quadratic(1.0).unwrap(), &[2.0]).unwrap();
        assert_eq!(r, 0.0);
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        assert_eq!(cocoercivity_residual(&f, &[0.0]).unwrap(), 0.0);
        assert!(cocoercivity_residual(&f, &[3.0]).unwrap() >= 0.0);
        assert!(cocoercivity_residual(&f, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn scan_examples() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let s = sector_membership_scan(&f, -1e5, 1e5, 10_000, 3).unwrap();
        assert!(s.min_relative_residual >= -1e-6, "{s:?}");

        let s = sector_membership_scan(&quadratic(1.0).unwrap(), -50.0, 50.0, 500, 1).unwrap();
        assert!(s.min_residual.abs() < 1e-9);

        let s = sector_membership_scan(&diag_quadratic(1.0, 100.0).unwrap(), -1.0, 1.0, 1000, 2).unwrap();
        assert!(s.min_relative_residual >= -1e-12, "{s:?}");
        assert_eq!(s.argmin.len(), 2);

        assert!(sector_membership_scan(&f, 1.0, 1.0, 10, 0).is_err());
        assert!(sector_membership_scan(&f, -1.0, 1.0, 0, 0).is_err());
    }

    #[test]
    fn oscillatory_is_not_convex() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let h = 1e-3;
        let witness = (0..20_000).map(|i| -100.0 + i as f64 * 0.01).find(|&x| {
            f.value(&[x + h]) - 2.0 * f.value(&[x]) + f.value(&[x - h]) < 0.0
        });
        assert!(witness.is_some());
    }

    #[test]
    fn by_name_dispatch() {
        assert_eq!(by_name("quadratic", 0.0, 3.0).unwrap().l(), 3.0);
        assert_eq!(by_name("diag-quadratic", 1.0, 3.0).unwrap().dim(), 2);
        assert!(by_name("rosenbrock", 1.0, 3.0).is_err());
    }

    fn builtins() -> Vec<SectorFunction> {
        vec![
            paper_oscillatory(1.0, 100.0).unwrap(),
            quadratic(100.0).unwrap(),
            diag_quadratic(1.0, 100.0).unwrap(),
        ]
    }

    #[test]
    fn fd_error_on_oscillatory() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        for x in [-100.0, -3.0, 0.0, 0.5, 42.0, 100.0] {
            assert!(finite_difference_error(&f, &[x]).unwrap() <= 1e-6);
        }
        assert!(finite_difference_error(&f, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in builtins() {
            for _ in 0..500 {
                let x: Vec<f64> = (0..f.dim()).map(|_| rng.random_range(-100.0..100.0)).collect();
                let g = f.gradient(&x);
                let fd = central_diff(&f, &x);
                // cancellation in the difference quotient scales with |f(x)|/h
                let h = 1e-6 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                let noise = 1e-14 * f.value(&x).abs() / h;
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()) + noise, "{} at {x:?}: {a} vs {b}", f.name());
                }
            }
        }
    }

    #[test]
    fn builtins_satisfy_sector_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in builtins() {
            for _ in 0..2000 {
                let x: Vec<f64> = (0..f.dim()).map(|_| rng.random_range(-1e5..1e5)).collect();
                let t = cocoercivity_terms(&f, &x).unwrap();
                let e2: f64 = x.iter().map(|v| v * v).sum();
                let g2 = norm_sq(&f.gradient(&x));
                assert!(t.residual() >= -1e-9 * (1.0 + e2 + g2), "{} at {x:?}", f.name());
            }
        }
    }
}
