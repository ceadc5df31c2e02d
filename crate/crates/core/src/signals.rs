//! Finite-horizon discrete-time signals.
//!
//! A [`Signal`] stores samples `u[0], …, u[T-1]` of a fixed vector dimension.
//! Everything past the stored horizon is implicitly zero and never
//! materialised, so every signal is trivially a member of the extended
//! space; only truncated quantities are ever evaluated.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numfmt::machine;

/// An ordered list of equal-dimension real vectors indexed by time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    dim: usize,
    data: Vec<f64>,
}

impl Signal {
    /// Empty signal of the given dimension.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("signal dimension must be positive"));
        }
        Ok(Self { dim, data: Vec::new() })
    }

    pub fn zeros(dim: usize, horizon: usize) -> Result<Self> {
        let mut s = Self::new(dim)?;
        s.data = vec![0.0; dim * horizon];
        Ok(s)
    }

    pub fn from_samples<I, V>(dim: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[f64]>,
    {
        let mut s = Self::new(dim)?;
        for v in samples {
            s.push(v.as_ref())?;
        }
        Ok(s)
    }

    /// Scalar signal from a list of values.
    pub fn scalar(values: &[f64]) -> Self {
        Self {
            dim: 1,
            data: values.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        crate::error::ensure_dim(self.dim, sample.len())?;
        self.data.extend_from_slice(sample);
        Ok(())
    }

    /// Sample at time `k`. Panics when `k` is past the horizon.
    pub fn sample(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn get(&self, k: usize) -> Option<&[f64]> {
        (k < self.horizon()).then(|| self.sample(k))
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.horizon().checked_sub(1).map(|k| self.sample(k))
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Flat row-major view: sample `k` occupies `[k*dim, (k+1)*dim)`.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn map_samples<F>(&self, mut f: F) -> Result<Signal>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut out: Option<Signal> = None;
        for s in self.samples() {
            let y = f(s)?;
            match out.as_mut() {
                Some(o) => o.push(&y)?,
                None => out = Some(Signal::from_samples(y.len(), [y])?),
            }
        }
        Ok(out.unwrap_or(Signal {
            dim: self.dim,
            data: Vec::new(),
        }))
    }

    /// `a·self + b·other`, sample-wise.
    pub fn lin_comb(&self, a: f64, other: &Signal, b: f64) -> Result<Signal> {
        crate::error::ensure_dim(self.dim, other.dim)?;
        if self.horizon() != other.horizon() {
            return Err(Error::shape(
                format!("horizon {}", self.horizon()),
                format!("horizon {}", other.horizon()),
            ));
        }
        Ok(Signal {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn scale(&self, a: f64) -> Signal {
        Signal {
            dim: self.dim,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string()];
        header.extend((0..self.dim).map(|i| format!("x_{i}")));
        wtr.write_record(&header)?;
        for (k, s) in self.samples().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(s.iter().map(|&v| machine(v)));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Signal> {
        let mut rdr = csv::Reader::from_reader(r);
        let dim = rdr.headers()?.len().saturating_sub(1);
        let mut sig = Signal::new(dim)?;
        for (expected_k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let k: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad time index {:?}", &rec[0])))?;
            if k != expected_k {
                return Err(Error::invalid(format!("expected row k={expected_k}, found k={k}")));
            }
            let sample = rec
                .iter()
                .skip(1)
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad sample value {f:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            sig.push(&sample)?;
        }
        Ok(sig)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

fn check_horizon(t: usize, available: usize) -> Result<()> {
    if t > available {
        Err(Error::HorizonExceeded {
            requested: t,
            available,
        })
    } else {
        Ok(())
    }
}

/// First `t` samples of `u`.
pub fn truncate(u: &Signal, t: usize) -> Result<Signal> {
    check_horizon(t, u.horizon())?;
    Ok(Signal {
        dim: u.dim,
        data: u.data[..t * u.dim].to_vec(),
    })
}

/// `⟨u, y⟩_T = Σ_{k<T} u[k]ᵀ y[k]`.
pub fn inner_product_truncated(u: &Signal, y: &Signal, t: usize) -> Result<f64> {
    crate::error::ensure_dim(u.dim, y.dim)?;
    check_horizon(t, u.horizon().min(y.horizon()))?;
    let n = t * u.dim;
    Ok(dot(&u.data[..n], &y.data[..n]))
}

/// `‖u‖²_{2T} = ⟨u, u⟩_T`.
pub fn norm_sq_truncated(u: &Signal, t: usize) -> Result<f64> {
    inner_product_truncated(u, u, t)
}
