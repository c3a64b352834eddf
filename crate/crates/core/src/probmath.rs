//! Probability-vector mathematics.
//!
//! All logarithms are natural, so entropies and divergences are in nats and
//! entropy is bounded by `ln K` for `K` classes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance on the sum of a [`Distribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Additive smoothing applied to the second argument of KL in
/// [`KlMode::Smoothed`].
pub const KL_SMOOTHING_EPS: f64 = 1e-12;

/// A normalized probability vector over the answer set.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "length {} < 2",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "element {bad} is not a finite non-negative number"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Raw per-class sigmoid outputs, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RawOutput(Vec<f64>);

impl RawOutput {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidOutput(format!("element {bad} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplies every element by `c`. Panics if the result leaves `[0, 1]`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.0.iter().map(|v| v * c).collect()).expect("scaled output out of range")
    }
}

impl TryFrom<Vec<f64>> for RawOutput {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<RawOutput> for Vec<f64> {
    fn from(r: RawOutput) -> Self {
        r.0
    }
}

/// Behaviour of [`kl_div`] when `p[i] > 0` and `q[i] = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlMode {
    /// Return `f64::INFINITY`.
    #[default]
    Infinite,
    /// Add [`KL_SMOOTHING_EPS`] to every element of `q` and renormalize.
    Smoothed,
}

/// Divides by the sum so the result is a distribution.
pub fn normalize(raw: &RawOutput) -> Result<Distribution> {
    if raw.len() < 2 {
        return Err(Error::InvalidOutput(format!("length {} < 2", raw.len())));
    }
    let sum: f64 = raw.0.iter().sum();
    if sum <= 0.0 {
        return Err(Error::AllZeroOutput);
    }
    Ok(Distribution(raw.0.iter().map(|v| v / sum).collect()))
}

/// Shannon entropy with `0 ln 0 = 0`.
pub fn entropy(d: &Distribution) -> f64 {
    -d.0
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

fn check_len(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

fn kl_terms(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).ln();
    }
    acc
}

/// `KL(p || q)` in [`KlMode::Infinite`] mode.
pub fn kl_div(p: &Distribution, q: &Distribution) -> Result<f64> {
    kl_div_with(p, q, KlMode::Infinite)
}

pub fn kl_div_with(p: &Distribution, q: &Distribution, mode: KlMode) -> Result<f64> {
    check_len(p, q)?;
    Ok(match mode {
        KlMode::Infinite => kl_terms(&p.0, &q.0),
        KlMode::Smoothed => {
            let denom = 1.0 + KL_SMOOTHING_EPS * q.len() as f64;
            let smoothed: Vec<f64> = q.0.iter().map(|v| (v + KL_SMOOTHING_EPS) / denom).collect();
            kl_terms(&p.0, &smoothed)
        }
    })
}

/// Jensen-Shannon divergence against the midpoint `M = (p + q) / 2`.
///
/// Always finite and bounded by `ln 2`.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_len(p, q)?;
    let m: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| (a + b) / 2.0).collect();
    Ok((kl_terms(&p.0, &m) + kl_terms(&q.0, &m)) / 2.0)
}
