//! Discrete-time LTI blocks and the positive-real certificate for the GD
//! controller family.
//!
//! ```text
//! ξ[k+1] = A ξ[k] + B u[k]
//! y[k]   = C ξ[k] + D u[k]
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::Signal;

/// `(A, B, C, D)` quadruple, optionally tagged with the GD parameters that
/// produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceRealization {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    alpha: Option<f64>,
    feedthrough: Option<f64>,
}

impl StateSpaceRealization {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::shape("square A", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::shape(format!("B with {n} rows"), format!("{} rows", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::shape(format!("C with {n} columns"), format!("{} columns", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::shape(
                format!("D of size {}x{}", c.nrows(), b.ncols()),
                format!("{}x{}", d.nrows(), d.ncols()),
            ));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            alpha: None,
            feedthrough: None,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Step size this realization was built from, if any.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Scalar feedthrough `d` this realization was built from, if any.
    pub fn feedthrough(&self) -> Option<f64> {
        self.feedthrough
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_square(&self) -> bool {
        self.input_dim() == self.output_dim()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    /// One step of the state update, returning `(ξ⁺, y)`.
    pub fn step(&self, xi: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xi = DVector::from_column_slice(xi);
        let u = DVector::from_column_slice(u);
        let next = &self.a * &xi + &self.b * &u;
        let y = &self.c * &xi + &self.d * &u;
        (next.as_slice().to_vec(), y.as_slice().to_vec())
    }

    /// Output map `C ξ + D u`.
    pub fn output(&self, xi: &[f64], u: &[f64]) -> Vec<f64> {
        let y = &self.c * DVector::from_column_slice(xi) + &self.d * DVector::from_column_slice(u);
        y.as_slice().to_vec()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RealizationDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RealizationDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// On-disk form: row-major nested arrays plus optional GD metadata.
#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct RealizationDoc {
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::shape(format!("rectangular {name}"), "ragged rows"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<&StateSpaceRealization> for RealizationDoc {
    fn from(ss: &StateSpaceRealization) -> Self {
        Self {
            A: rows(&ss.a),
            B: rows(&ss.b),
            C: rows(&ss.c),
            D: rows(&ss.d),
            alpha: ss.alpha,
            d: ss.feedthrough,
        }
    }
}

impl TryFrom<RealizationDoc> for StateSpaceRealization {
    type Error = Error;

    fn try_from(doc: RealizationDoc) -> Result<Self> {
        let mut ss = StateSpaceRealization::new(
            from_rows(&doc.A, "A")?,
            from_rows(&doc.B, "B")?,
            from_rows(&doc.C, "C")?,
            from_rows(&doc.D, "D")?,
        )?;
        ss.alpha = doc.alpha;
        ss.feedthrough = doc.d;
        Ok(ss)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// GD controller `(I, αI, I, 0)`.
pub fn gd_realization(alpha: f64, dim: usize) -> Result<StateSpaceRealization> {
    positive("alpha", alpha)?;
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let eye = DMatrix::<f64>::identity(dim, dim);
    let mut ss = StateSpaceRealization::new(eye.clone(), eye.clone() * alpha, eye, DMatrix::zeros(dim, dim))?;
    ss.alpha = Some(alpha);
    Ok(ss)
}

/// Loop-transformed GD controller `(I, αI, I, dI)`.
pub fn modified_gd_realization(alpha: f64, d: f64, dim: usize) -> Result<StateSpaceRealization> {
    positive("alpha", alpha)?;
    positive("d", d)?;
    let mut ss = gd_realization(alpha, dim)?;
    ss.d = DMatrix::identity(dim, dim) * d;
    ss.feedthrough = Some(d);
    Ok(ss)
}

/// Runs the realization over the whole input. `states` has one more sample
/// than `u` (it includes the state after the last input).
pub fn simulate(ss: &StateSpaceRealization, u: &Signal, xi0: &[f64]) -> Result<(Signal, Signal)> {
    crate::error::ensure_dim(ss.input_dim(), u.dim())?;
    crate::error::ensure_dim(ss.state_dim(), xi0.len())?;
    let mut states = Signal::from_samples(ss.state_dim(), [xi0])?;
    let mut y = Signal::new(ss.output_dim())?;
    let mut xi = xi0.to_vec();
    for uk in u.samples() {
        let (next, yk) = ss.step(&xi, uk);
        y.push(&yk)?;
        states.push(&next)?;
        xi = next;
    }
    Ok((states, y))
}

/// Outcome of evaluating the positive-real LMI at `P = p·I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositiveRealCheck {
    pub feasible: bool,
    pub max_eigenvalue: f64,
    pub tolerance: f64,
}

/// Block matrix of the discrete positive-real LMI with `P = p·I`:
///
/// ```text
/// [ AᵀPA − P        AᵀPB − Cᵀ      ]
/// [ (AᵀPB − Cᵀ)ᵀ    BᵀPB − (D + Dᵀ) ]
/// ```
pub fn positive_real_matrix(ss: &StateSpaceRealization, p_scalar: f64) -> Result<DMatrix<f64>> {
    if !ss.is_square() {
        return Err(Error::shape(
            "square system (inputs == outputs)",
            format!("{} inputs, {} outputs", ss.input_dim(), ss.output_dim()),
        ));
    }
    positive("p_scalar", p_scalar)?;
    let n = ss.state_dim();
    let m = ss.input_dim();
    let (a, b, c, d) = (&ss.a, &ss.b, &ss.c, &ss.d);
    let top_left = a.transpose() * a * p_scalar - DMatrix::identity(n, n) * p_scalar;
    let top_right = a.transpose() * b * p_scalar - c.transpose();
    let bottom_right = b.transpose() * b * p_scalar - (d + d.transpose());

    let mut mat = DMatrix::zeros(n + m, n + m);
    mat.view_mut((0, 0), (n, n)).copy_from(&top_left);
    mat.view_mut((0, n), (n, m)).copy_from(&top_right);
    mat.view_mut((n, 0), (m, n)).copy_from(&top_right.transpose());
    mat.view_mut((n, n), (m, m)).copy_from(&bottom_right);
    Ok(mat)
}

/// Checks `M ⪯ 0` via the largest eigenvalue of the symmetrised block matrix.
/// The slack is `1e-10·(1 + max|Mᵢⱼ|)`.
pub fn positive_real_check(ss: &StateSpaceRealization, p_scalar: f64) -> Result<PositiveRealCheck> {
    let mat = positive_real_matrix(ss, p_scalar)?;
    let sym = (&mat + mat.transpose()) * 0.5;
    let scale = sym.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tolerance = 1e-10 * (1.0 + scale);
    let max_eigenvalue = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PositiveRealCheck {
        feasible: max_eigenvalue <= tolerance,
        max_eigenvalue,
        tolerance,
    })
}

/// Feasible positive-real certificate `P = p·I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PositiveRealCertificate {
    pub p_scalar: f64,
    pub max_eigenvalue_m: f64,
}

/// Why no certificate exists for a given `(α, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Infeasibility {
    pub alpha: f64,
    pub d: f64,
    /// Smallest feedthrough that would be certifiable, `α/2`.
    pub required_d: f64,
    pub max_eigenvalue_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GdPassivity {
    Certified(PositiveRealCertificate),
    Infeasible(Infeasibility),
}

impl GdPassivity {
    pub fn certificate(&self) -> Option<&PositiveRealCertificate> {
        match self {
            GdPassivity::Certified(c) => Some(c),
            GdPassivity::Infeasible(_) => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.certificate().is_some()
    }
}

/// Positive-real certificate for the modified GD controller `(I, αI, I, dI)`.
///
/// The off-diagonal block `αP − I` must vanish for `M ⪯ 0` (the top-left block
/// is zero), which pins `P = I/α`; feasibility is then decided by the LMI
/// itself at that `P`.
pub fn gd_passivity_certificate(alpha: f64, d: f64) -> Result<GdPassivity> {
    let ss = modified_gd_realization(alpha, d, 1)?;
    let p_scalar = 1.0 / alpha;
    let check = positive_real_check(&ss, p_scalar)?;
    Ok(if check.feasible {
        GdPassivity::Certified(PositiveRealCertificate {
            p_scalar,
            max_eigenvalue_m: check.max_eigenvalue,
        })
    } else {
        GdPassivity::Infeasible(Infeasibility {
            alpha,
            d,
            required_d: alpha / 2.0,
            max_eigenvalue_m: check.max_eigenvalue,
        })
    })
}
