//! Passivity indices and step-size certification.
//!
//! An operator `u ↦ y` satisfies
//!
//! ```text
//! ⟨u, y⟩_T ≥ β + δ‖u‖²_{2T} + ε‖y‖²_{2T}   for all u, T
//! ```
//!
//! with `β ≤ 0`. It is passive for `δ = ε = 0`, input strictly passive (ISP)
//! for `δ > 0`, and very strictly passive (VSP) for `δ, ε > 0`.
//!
//! The shifted gradient of a sector-bounded objective is VSP. After the loop
//! transformation the nonlinearity picks up an internal positive feedback
//! through the feedthrough `d`, which rescales the indices; GD with step `α`
//! is certified by pairing the passive modified controller (`d = α/2`) with
//! the transformed nonlinearity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::{gd_passivity_certificate, GdPassivity, PositiveRealCertificate};
use crate::signals::{inner_product_truncated, norm_sq_truncated, Signal};

/// Relative tolerance used to detect the knife-edge `α = 2/L` / `d = 1/L`.
pub const BOUNDARY_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Passive,
    Isp,
    Vsp,
    None,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Passive => "PASSIVE",
            Classification::Isp => "ISP",
            Classification::Vsp => "VSP",
            Classification::None => "NONE",
        })
    }
}

/// `(β, δ, ε)` with a classification. For `NONE` the raw formula values are
/// kept as computed, so `epsilon` may be negative there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PassivityIndices {
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub classification: Classification,
}

impl PassivityIndices {
    pub fn new(beta: f64, delta: f64, epsilon: f64, classification: Classification) -> Result<Self> {
        if beta > 0.0 {
            return Err(Error::invalid(format!("beta must be non-positive, got {beta}")));
        }
        let ok = match classification {
            Classification::Vsp => delta > 0.0 && epsilon > 0.0,
            Classification::Isp => delta > 0.0 && epsilon >= 0.0,
            Classification::Passive => delta >= 0.0 && epsilon >= 0.0,
            Classification::None => true,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "indices delta={delta}, epsilon={epsilon} inconsistent with {classification}"
            )));
        }
        Ok(Self {
            beta,
            delta,
            epsilon,
            classification,
        })
    }
}

fn check_sector(m: f64, l: f64) -> Result<()> {
    if !(m > 0.0 && m <= l && l.is_finite()) {
        return Err(Error::invalid(format!("sector bounds must satisfy 0 < m <= L, got m={m}, L={l}")));
    }
    Ok(())
}

/// Indices of the shifted gradient: `δ = mL/(m+L)`, `ε = 1/(m+L)`, `β = 0`.
pub fn nabla_indices(m: f64, l: f64) -> Result<PassivityIndices> {
    check_sector(m, l)?;
    Ok(PassivityIndices {
        beta: 0.0,
        delta: m * l / (m + l),
        epsilon: 1.0 / (m + l),
        classification: Classification::Vsp,
    })
}

/// Indices of the nonlinearity after the loop transformation with
/// feedthrough `d`:
///
/// ```text
/// δ̄ = δ / (1 − 2δd)
/// ε̄ = (ε − d + δd²) / (1 − 2δd)
/// ```
///
/// The numerator of `ε̄` has roots `1/L` and `1/m`, so it is evaluated in the
/// factored form `δ(d − 1/L)(d − 1/m)`, which vanishes exactly at `d = 1/L`.
pub fn transformed_indices(m: f64, l: f64, d: f64) -> Result<PassivityIndices> {
    check_sector(m, l)?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid(format!("feedthrough must be positive, got {d}")));
    }
    let at_boundary = (d - 1.0 / l).abs() <= BOUNDARY_RTOL / l;
    if at_boundary && m == l {
        return Err(Error::DegenerateSector(format!(
            "d = 1/L with m == L = {l} leaves no input-strict margin"
        )));
    }
    let limit = (m + l) / (2.0 * m * l);
    if d >= limit {
        return Err(Error::ContractionViolation(format!(
            "d = {d} must be below (m+L)/(2mL) = {limit}"
        )));
    }
    let base = nabla_indices(m, l)?;
    let denom = 1.0 - 2.0 * base.delta * d;
    let delta = base.delta / denom;
    let epsilon = base.delta * (d - 1.0 / l) * (d - 1.0 / m) / denom;
    let (epsilon, classification) = if at_boundary {
        (0.0, Classification::Isp)
    } else if d < 1.0 / l {
        (epsilon, Classification::Vsp)
    } else {
        (epsilon, Classification::None)
    };
    Ok(PassivityIndices {
        beta: 0.0,
        delta,
        epsilon,
        classification,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    /// Passive controller against a VSP nonlinearity.
    Strong,
    /// Passive controller against an ISP nonlinearity.
    Weak,
    None,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Strong => "STRONG",
            Verdict::Weak => "WEAK",
            Verdict::None => "NONE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSizeVerdict {
    pub m: f64,
    pub l: f64,
    pub alpha: f64,
    pub d: f64,
    pub verdict: Verdict,
    pub nabla_indices: PassivityIndices,
    /// `None` when `d` is past the contraction limit and the transformed
    /// indices are undefined.
    pub transformed_indices: Option<PassivityIndices>,
    /// Positive-real certificate of the modified controller, when it exists.
    pub certificate: Option<PositiveRealCertificate>,
}

/// Certifies GD with step `alpha` on the sector class `(m, L)` using
/// `d = α/2`.
///
/// * `STRONG` for `α < 2/L`;
/// * `WEAK` for `α = 2/L` (relative tolerance [`BOUNDARY_RTOL`]) when `m < L`;
/// * `NONE` otherwise.
///
/// The verdict is assembled from the LMI certificate and the transformed
/// indices rather than from the step-size inequality directly.
pub fn certify_step_size(m: f64, l: f64, alpha: f64) -> Result<StepSizeVerdict> {
    check_sector(m, l)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {alpha}")));
    }
    let d = alpha / 2.0;
    let nabla = nabla_indices(m, l)?;
    let controller = gd_passivity_certificate(alpha, d)?;
    let transformed = match transformed_indices(m, l, d) {
        Ok(t) => Some(t),
        Err(Error::ContractionViolation(_)) | Err(Error::DegenerateSector(_)) => None,
        Err(e) => return Err(e),
    };
    let certificate = match controller {
        GdPassivity::Certified(c) => Some(c),
        GdPassivity::Infeasible(_) => None,
    };
    let verdict = match (certificate.is_some(), transformed.map(|t| t.classification)) {
        (true, Some(Classification::Vsp)) => Verdict::Strong,
        (true, Some(Classification::Isp)) if m < l => Verdict::Weak,
        _ => Verdict::None,
    };
    Ok(StepSizeVerdict {
        m,
        l,
        alpha,
        d,
        verdict,
        nabla_indices: nabla,
        transformed_indices: transformed,
        certificate,
    })
}

/// Result of checking the passivity inequality along sample trajectories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassivityMargin {
    /// `min over inputs of ⟨u,y⟩_T − β − δ‖u‖² − ε‖y‖²`.
    pub margin: f64,
    /// Largest `|⟨u,y⟩_T| + δ‖u‖² + ε‖y‖²` seen; a natural yardstick for
    /// round-off in `margin`.
    pub scale: f64,
    /// Index of the input achieving the minimum.
    pub worst_input: usize,
}

/// Evaluates the passivity inequality of `indices` on `op` for each input.
/// A non-negative margin is consistent with the claimed classification.
pub fn empirical_passivity_margin<F>(op: F, indices: &PassivityIndices, inputs: &[Signal], t: usize) -> Result<PassivityMargin>
where
    F: Fn(&Signal) -> Result<Signal>,
{
    if inputs.is_empty() {
        return Err(Error::invalid("at least one input signal is required"));
    }
    let dim = inputs[0].dim();
    let mut out = PassivityMargin {
        margin: f64::INFINITY,
        scale: 0.0,
        worst_input: 0,
    };
    for (i, u) in inputs.iter().enumerate() {
        crate::error::ensure_dim(dim, u.dim())?;
        let y = op(u)?;
        let supplied = inner_product_truncated(u, &y, t)?;
        let input_energy = indices.delta * norm_sq_truncated(u, t)?;
        let output_energy = indices.epsilon * norm_sq_truncated(&y, t)?;
        let slack = supplied - indices.beta - input_energy - output_energy;
        out.scale = out.scale.max(supplied.abs() + input_energy.abs() + output_energy.abs());
        if slack < out.margin {
            out.margin = slack;
            out.worst_input = i;
        }
    }
    Ok(out)
}

/// Seeded Gaussian test inputs, each scaled to unit energy over its horizon.
pub fn unit_energy_inputs(dim: usize, horizon: usize, count: usize, seed: u64) -> Result<Vec<Signal>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..dim * horizon).map(|_| StandardNormal.sample(&mut rng)).collect();
            let energy: f64 = raw.iter().map(|v| v * v).sum();
            let scale = if energy > 0.0 { energy.sqrt().recip() } else { 0.0 };
            Signal::from_samples(dim, raw.chunks(dim).map(|c| c.iter().map(|v| v * scale).collect::<Vec<_>>()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{paper_oscillatory, shifted_gradient};
    use rand::{Rng, SeedableRng};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn nabla_examples() {
        let i = nabla_indices(1.0, 100.0).unwrap();
        assert!(rel(i.delta, 100.0 / 101.0) <= 1e-15);
        assert!(rel(i.epsilon, 1.0 / 101.0) <= 1e-15);
        assert_eq!((i.beta, i.classification), (0.0, Classification::Vsp));
        let i = nabla_indices(1.0, 1.0).unwrap();
        assert_eq!((i.delta, i.epsilon), (0.5, 0.5));
        let i = nabla_indices(2.0, 2.0).unwrap();
        assert_eq!((i.delta, i.epsilon), (1.0, 0.25));
        assert!(nabla_indices(2.0, 1.0).is_err());
        assert!(nabla_indices(0.0, 1.0).is_err());
    }

    #[test]
    fn transformed_examples() {
        let t = transformed_indices(1.0, 100.0, 0.005).unwrap();
        assert!(rel(t.delta, 1.0) <= 1e-12);
        assert!(rel(t.epsilon, 0.004975) <= 1e-12);
        assert_eq!(t.classification, Classification::Vsp);

        let t = transformed_indices(1.0, 100.0, 0.01).unwrap();
        assert!(t.epsilon.abs() <= 1e-12);
        assert!(rel(t.delta, 100.0 / 99.0) <= 1e-12);
        assert_eq!(t.classification, Classification::Isp);

        let t = transformed_indices(1.0, 100.0, 0.02).unwrap();
        assert_eq!(t.classification, Classification::None);
        assert!(t.epsilon < 0.0);
    }

    #[test]
    fn transformed_errors() {
        assert!(matches!(
            transformed_indices(1.0, 100.0, 0.505),
            Err(Error::ContractionViolation(_))
        ));
        assert!(matches!(
            transformed_indices(5.0, 5.0, 0.2),
            Err(Error::DegenerateSector(_))
        ));
        assert!(transformed_indices(1.0, 100.0, 0.0).is_err());
        // m == L away from the boundary is fine
        assert_eq!(
            transformed_indices(5.0, 5.0, 0.1).unwrap().classification,
            Classification::Vsp
        );
    }

    // Independent check against the unfactored quadratic ε − d + δd².
    #[test]
    fn epsilon_numerator_roots() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let m: f64 = rng.random_range(0.01..10.0);
            let l: f64 = m + rng.random_range(0.01..100.0);
            let delta = m * l / (m + l);
            let eps = 1.0 / (m + l);
            for root in [1.0 / l, 1.0 / m] {
                let q = eps - root + delta * root * root;
                assert!(q.abs() <= 1e-12, "m={m} l={l} root={root} q={q}");
            }
            let d = 0.3 / l;
            let t = transformed_indices(m, l, d).unwrap();
            let expanded = (eps - d + delta * d * d) / (1.0 - 2.0 * delta * d);
            assert!((t.epsilon - expanded).abs() <= 1e-12 * (1.0 + expanded.abs()));
        }
    }

    #[test]
    fn classification_sweep() {
        let (m, l) = (1.0, 100.0);
        for i in 1..200 {
            let d = i as f64 / 200.0 / l;
            assert_eq!(transformed_indices(m, l, d).unwrap().classification, Classification::Vsp);
        }
        assert_eq!(transformed_indices(m, l, 1.0 / l).unwrap().classification, Classification::Isp);
        for i in 1..50 {
            let d = 1.0 / l + i as f64 * 0.009;
            if d < (m + l) / (2.0 * m * l) {
                assert_eq!(transformed_indices(m, l, d).unwrap().classification, Classification::None);
            }
        }
    }

    #[test]
    fn certify_examples() {
        assert_eq!(certify_step_size(1.0, 100.0, 0.01).unwrap().verdict, Verdict::Strong);
        assert_eq!(certify_step_size(1.0, 100.0, 0.02).unwrap().verdict, Verdict::Weak);
        assert_eq!(certify_step_size(1.0, 100.0, 0.021).unwrap().verdict, Verdict::None);
        assert_eq!(certify_step_size(5.0, 5.0, 2.0 / 5.0).unwrap().verdict, Verdict::None);
        assert_eq!(certify_step_size(1.0, 100.0, 5.0).unwrap().verdict, Verdict::None);
        assert!(certify_step_size(1.0, 100.0, 0.0).is_err());
        assert!(certify_step_size(3.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn certify_consistency() {
        for &(m, l) in &[(1.0, 100.0), (0.5, 2.0), (3.0, 3.0)] {
            for i in 1..300 {
                let alpha = i as f64 * 0.01 / l;
                let v = certify_step_size(m, l, alpha).unwrap();
                let lmi = gd_passivity_certificate(alpha, alpha / 2.0).unwrap().is_certified();
                let vsp = matches!(
                    transformed_indices(m, l, alpha / 2.0).map(|t| t.classification),
                    Ok(Classification::Vsp)
                );
                assert_eq!(v.verdict == Verdict::Strong, lmi && vsp, "m={m} l={l} alpha={alpha}");
                if v.verdict == Verdict::Strong {
                    assert_eq!(v.transformed_indices.unwrap().classification, Classification::Vsp);
                }
                if v.verdict == Verdict::Weak {
                    assert_eq!(v.transformed_indices.unwrap().classification, Classification::Isp);
                }
            }
        }
    }

    #[test]
    fn margin_identity_and_negation() {
        let idx = PassivityIndices::new(0.0, 0.5, 0.5, Classification::Vsp).unwrap();
        let inputs = unit_energy_inputs(2, 10, 20, 4).unwrap();
        let m = empirical_passivity_margin(|u| Ok(u.clone()), &idx, &inputs, 10).unwrap();
        assert!(m.margin.abs() <= 1e-15);
        let m = empirical_passivity_margin(|u| Ok(u.scale(-1.0)), &idx, &inputs, 10).unwrap();
        assert!(m.margin < 0.0);
    }

    #[test]
    fn margin_of_shifted_gradient() {
        let f = paper_oscillatory(1.0, 100.0).unwrap();
        let idx = nabla_indices(1.0, 100.0).unwrap();
        let mut inputs = unit_energy_inputs(1, 50, 100, 17).unwrap();
        // large-amplitude inputs reach the non-convex part of f
        inputs.extend(inputs.clone().iter().map(|u| u.scale(300.0)));
        let op = |u: &Signal| u.map_samples(|s| shifted_gradient(&f, s));
        let m = empirical_passivity_margin(op, &idx, &inputs, 50).unwrap();
        assert!(m.margin >= -1e-9 * m.scale, "{m:?}");
    }

    #[test]
    fn margin_shape_errors() {
        let idx = nabla_indices(1.0, 1.0).unwrap();
        let inputs = vec![Signal::scalar(&[1.0]), Signal::zeros(2, 1).unwrap()];
        assert!(empirical_passivity_margin(|u| Ok(u.clone()), &idx, &inputs, 1).is_err());
        assert!(empirical_passivity_margin(|u| Ok(u.clone()), &idx, &[], 1).is_err());
    }

    #[test]
    fn unit_energy() {
        for u in unit_energy_inputs(3, 7, 5, 1).unwrap() {
            assert!((norm_sq_truncated(&u, 7).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indices_invariants() {
        assert!(PassivityIndices::new(0.1, 1.0, 1.0, Classification::Vsp).is_err());
        assert!(PassivityIndices::new(0.0, 1.0, 0.0, Classification::Vsp).is_err());
        assert!(PassivityIndices::new(0.0, 0.0, 0.0, Classification::Isp).is_err());
        assert!(PassivityIndices::new(-1.0, 0.0, 0.0, Classification::Passive).is_ok());
    }
}
