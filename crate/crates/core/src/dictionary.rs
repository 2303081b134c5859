//! State-inclusive logistic lifting dictionaries.
//!
//! A dictionary over `m`-dimensional measurements is the ordered stack
//! `[1, y, Λ_1(y), ..., Λ_NL(y)]`, where each `Λ` is a conjunctive logistic:
//! a product of one scalar logistic per measurement coordinate.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result, SillError};

/// Standard logistic `1 / (1 + e^{-x})`, evaluated without overflow.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Center and steepness of a single-coordinate logistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarLogisticParams {
    pub mu: f64,
    pub alpha: f64,
}

impl ScalarLogisticParams {
    pub fn new(mu: f64, alpha: f64) -> Self {
        Self { mu, alpha }
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        logistic(self.alpha * (y - self.mu))
    }

    /// `1 - λ(y)`, computed as `λ` of the negated argument so it keeps full
    /// relative precision in the saturated tail.
    #[inline]
    pub fn eval_complement(&self, y: f64) -> f64 {
        logistic(-self.alpha * (y - self.mu))
    }
}

/// Multivariate conjunctive logistic `Λ(y) = Π_i λ(y_i; μ_i, α_i)`.
///
/// Construction only checks shape; positivity of the steepness is enforced
/// when the function is placed in a [`SillDictionary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConjLogisticRepr")]
pub struct ConjLogistic {
    mu: Vec<f64>,
    alpha: Vec<f64>,
}

#[derive(Deserialize)]
struct ConjLogisticRepr {
    mu: Vec<f64>,
    alpha: Vec<f64>,
}

impl TryFrom<ConjLogisticRepr> for ConjLogistic {
    type Error = SillError;

    fn try_from(r: ConjLogisticRepr) -> Result<Self> {
        ConjLogistic::new(r.mu, r.alpha)
    }
}

impl ConjLogistic {
    pub fn new(mu: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(SillError::InvalidParameter(
                "conjunctive logistic needs at least one coordinate".into(),
            ));
        }
        check_dim("conjunctive logistic alpha", mu.len(), alpha.len())?;
        if mu.iter().chain(&alpha).any(|v| !v.is_finite()) {
            return Err(SillError::NonFinite("conjunctive logistic parameters"));
        }
        Ok(Self { mu, alpha })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn component(&self, i: usize) -> ScalarLogisticParams {
        ScalarLogisticParams::new(self.mu[i], self.alpha[i])
    }

    /// Same centers, every steepness multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            mu: self.mu.clone(),
            alpha: self.alpha.iter().map(|a| a * scale).collect(),
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        check_dim("conjunctive logistic input", self.dim(), y.len())?;
        Ok(self.eval_unchecked(y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(self.mu.iter().zip(&self.alpha))
            .map(|(&yi, (&mu, &alpha))| logistic(alpha * (yi - mu)))
            .product()
    }

    /// Gradient `∂Λ/∂y_i = α_i (1 - λ_i(y_i)) Λ(y)`.
    pub fn grad(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("conjunctive logistic gradient input", self.dim(), y.len())?;
        let value = self.eval_unchecked(y);
        Ok((0..self.dim())
            .map(|i| {
                let p = self.component(i);
                p.alpha * p.eval_complement(y[i]) * value
            })
            .collect())
    }

    /// Orthant order: `self ≳ other` when `other.mu - self.mu` lies in the
    /// closed non-negative orthant. Reflexive.
    pub fn dominates(&self, other: &ConjLogistic) -> Result<bool> {
        check_dim("domination check", self.dim(), other.dim())?;
        Ok(self.mu.iter().zip(&other.mu).all(|(a, b)| b - a >= 0.0))
    }

    /// Componentwise-max centers, each steepness taken from the function that
    /// supplied the winning center. On a center tie the larger steepness wins.
    pub fn join(&self, other: &ConjLogistic) -> Result<ConjLogistic> {
        check_dim("join", self.dim(), other.dim())?;
        let (mu, alpha) = self
            .mu
            .iter()
            .zip(&self.alpha)
            .zip(other.mu.iter().zip(&other.alpha))
            .map(|((&mf, &af), (&mg, &ag))| {
                if mf > mg {
                    (mf, af)
                } else if mg > mf {
                    (mg, ag)
                } else {
                    (mf, af.max(ag))
                }
            })
            .unzip();
        Ok(ConjLogistic { mu, alpha })
    }

    fn bit_key(&self) -> Vec<u64> {
        self.mu
            .iter()
            .chain(&self.alpha)
            .map(|v| v.to_bits())
            .collect()
    }
}

/// Result of checking the orthant order over a dictionary's logistics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderCheckResult {
    pub totally_ordered: bool,
    /// Zero-based logistic index pairs `(l, j)`, `l < j`, where neither dominates.
    pub incomparable_pairs: Vec<(usize, usize)>,
}

/// Ordered dictionary `[1, y, Λ_1(y), ..., Λ_NL(y)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DictionaryRepr")]
pub struct SillDictionary {
    m: usize,
    logistics: Vec<ConjLogistic>,
}

#[derive(Deserialize)]
struct DictionaryRepr {
    m: usize,
    logistics: Vec<ConjLogistic>,
}

impl TryFrom<DictionaryRepr> for SillDictionary {
    type Error = SillError;

    fn try_from(r: DictionaryRepr) -> Result<Self> {
        SillDictionary::new(r.m, r.logistics)
    }
}

impl SillDictionary {
    pub fn new(m: usize, logistics: Vec<ConjLogistic>) -> Result<Self> {
        if m == 0 {
            return Err(SillError::InvalidParameter(
                "measurement dimension must be positive".into(),
            ));
        }
        if logistics.is_empty() {
            return Err(SillError::InvalidParameter(
                "dictionary needs at least one conjunctive logistic".into(),
            ));
        }
        for f in &logistics {
            check_dim("dictionary logistic", m, f.dim())?;
            if f.alpha.iter().any(|&a| a <= 0.0) {
                return Err(SillError::InvalidParameter(
                    "dictionary steepness values must be strictly positive".into(),
                ));
            }
        }
        Ok(Self { m, logistics })
    }

    /// Measurement dimension `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of conjunctive logistics `N_L`.
    pub fn n_logistics(&self) -> usize {
        self.logistics.len()
    }

    /// Total dictionary size `N = 1 + m + N_L`.
    pub fn len(&self) -> usize {
        1 + self.m + self.logistics.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn logistics(&self) -> &[ConjLogistic] {
        &self.logistics
    }

    /// Row of `ψ` holding logistic `l`.
    pub fn logistic_row(&self, l: usize) -> usize {
        1 + self.m + l
    }

    pub fn scaled(&self, scale: f64) -> Result<Self> {
        Self::new(
            self.m,
            self.logistics.iter().map(|f| f.scaled(scale)).collect(),
        )
    }

    pub fn lift(&self, y: &[f64]) -> Result<DVector<f64>> {
        check_dim("lift input", self.m, y.len())?;
        let mut z = DVector::zeros(self.len());
        z[0] = 1.0;
        for (i, &yi) in y.iter().enumerate() {
            z[1 + i] = yi;
        }
        for (l, f) in self.logistics.iter().enumerate() {
            z[self.logistic_row(l)] = f.eval_unchecked(y);
        }
        Ok(z)
    }

    /// Lifts every point into the columns of an `N × r` matrix.
    pub fn lift_columns(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut g = DMatrix::zeros(self.len(), points.len());
        for (c, y) in points.iter().enumerate() {
            g.set_column(c, &self.lift(y)?);
        }
        Ok(g)
    }

    /// `∂ψ/∂y`, an `N × m` matrix.
    pub fn lift_jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("jacobian input", self.m, y.len())?;
        let mut jac = DMatrix::zeros(self.len(), self.m);
        for i in 0..self.m {
            jac[(1 + i, i)] = 1.0;
        }
        for (l, f) in self.logistics.iter().enumerate() {
            let row = self.logistic_row(l);
            for (i, g) in f.grad(y)?.into_iter().enumerate() {
                jac[(row, i)] = g;
            }
        }
        Ok(jac)
    }

    pub fn check_total_order(&self) -> OrderCheckResult {
        let mut incomparable_pairs = Vec::new();
        for l in 0..self.logistics.len() {
            for j in l + 1..self.logistics.len() {
                let (f, g) = (&self.logistics[l], &self.logistics[j]);
                // dims are validated at construction
                if !f.dominates(g).unwrap_or(false) && !g.dominates(f).unwrap_or(false) {
                    incomparable_pairs.push((l, j));
                }
            }
        }
        OrderCheckResult {
            totally_ordered: incomparable_pairs.is_empty(),
            incomparable_pairs,
        }
    }

    /// Closes the logistic set under pairwise [`ConjLogistic::join`].
    ///
    /// Original logistics keep their indices; new joins are appended in
    /// discovery order and deduplicated by exact parameter equality.
    pub fn join_completion(&self) -> Self {
        let mut out = self.logistics.clone();
        let mut seen: HashSet<Vec<u64>> = out.iter().map(ConjLogistic::bit_key).collect();
        let mut k = 0;
        while k < out.len() {
            for j in 0..k {
                let joined = out[j].join(&out[k]).expect("dimensions validated");
                if seen.insert(joined.bit_key()) {
                    out.push(joined);
                }
            }
            k += 1;
        }
        Self {
            m: self.m,
            logistics: out,
        }
    }
}
