//! Closure analysis for SILL dictionaries.
//!
//! When the vector field lies in the span of the dictionary's logistics
//! (`F_i = Σ_j w_ij Λ_j`), the Lie derivative of every logistic is a weighted
//! sum of pairwise products `Λ_l Λ_j`. Replacing each product by the single
//! logistic of the joined parameters gives a chain of approximations ending
//! in a combination a Koopman row can represent. This module evaluates each
//! link of that chain, the error terms between links, the uniform bounds that
//! combine them, and an end-to-end fitted-residual experiment.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{make_snapshots, spanned_field};
use crate::dictionary::{ConjLogistic, SillDictionary};
use crate::error::{check_dim, Result, SillError};
use crate::numeric::linear_fit;
use crate::regression::{fit_generator, residual};

/// Default separation from the center hyperplanes for sampled grids.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// A vector field spanned by a dictionary's logistics, `F = W Λ̄(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpannedField {
    dictionary: SillDictionary,
    /// `m × N_L`.
    weights: DMatrix<f64>,
}

impl SpannedField {
    pub fn new(dictionary: SillDictionary, weights: DMatrix<f64>) -> Result<Self> {
        check_dim("weight rows", dictionary.m(), weights.nrows())?;
        check_dim("weight columns", dictionary.n_logistics(), weights.ncols())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(SillError::NonFinite("field weights"));
        }
        Ok(Self { dictionary, weights })
    }

    /// Builds from row-major weight rows (one row per measurement coordinate).
    pub fn from_rows(dictionary: SillDictionary, rows: &[Vec<f64>]) -> Result<Self> {
        check_dim("weight rows", dictionary.m(), rows.len())?;
        let nl = dictionary.n_logistics();
        for r in rows {
            check_dim("weight columns", nl, r.len())?;
        }
        let w = DMatrix::from_fn(rows.len(), nl, |i, j| rows[i][j]);
        Self::new(dictionary, w)
    }

    pub fn dictionary(&self) -> &SillDictionary {
        &self.dictionary
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// `F(y)`; `y` must have the dictionary's dimension.
    pub fn field(&self, y: &[f64]) -> Vec<f64> {
        let lam: Vec<f64> = self
            .dictionary
            .logistics()
            .iter()
            .map(|f| f.eval_unchecked(y))
            .collect();
        (0..self.dictionary.m())
            .map(|i| lam.iter().enumerate().map(|(j, v)| self.weights[(i, j)] * v).sum())
            .collect()
    }

    pub fn scaled(&self, scale: f64) -> Result<Self> {
        Self::new(self.dictionary.scaled(scale)?, self.weights.clone())
    }

    /// Join-completes the dictionary; appended logistics get zero weight, so
    /// the field itself is unchanged.
    pub fn completed(&self) -> Self {
        let dictionary = self.dictionary.join_completion();
        let nl_old = self.dictionary.n_logistics();
        let w = DMatrix::from_fn(self.dictionary.m(), dictionary.n_logistics(), |i, j| {
            if j < nl_old {
                self.weights[(i, j)]
            } else {
                0.0
            }
        });
        Self {
            dictionary,
            weights: w,
        }
    }

    fn check(&self, l: usize, y: &[f64]) -> Result<()> {
        let nl = self.dictionary.n_logistics();
        if l >= nl {
            return Err(SillError::IndexOutOfRange { index: l, len: nl });
        }
        check_dim("evaluation point", self.dictionary.m(), y.len())
    }

    fn join_table(&self) -> Vec<Vec<ConjLogistic>> {
        let ls = self.dictionary.logistics();
        ls.iter()
            .map(|f| ls.iter().map(|g| f.join(g).expect("same dimension")).collect())
            .collect()
    }
}

/// Every sum in the approximation chain for one logistic at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct LieTerms {
    exact: f64,
    intermediate: f64,
    linear: f64,
    linearization_error: f64,
    bilinear_error: f64,
    /// `Σ α w (1 − λ) ε`.
    weighted_product_error: f64,
    /// `Σ α w ε`.
    plain_product_error: f64,
}

fn lie_terms(sf: &SpannedField, joins: &[ConjLogistic], l: usize, y: &[f64]) -> LieTerms {
    let ls = sf.dictionary.logistics();
    let fl = &ls[l];
    let lam_l = fl.eval_unchecked(y);
    let lam: Vec<f64> = ls.iter().map(|f| f.eval_unchecked(y)).collect();
    let star: Vec<f64> = joins.iter().map(|f| f.eval_unchecked(y)).collect();
    let mut t = LieTerms::default();
    for (i, &yi) in y.iter().enumerate() {
        let p = fl.component(i);
        let on = p.eval(yi);
        let off = p.eval_complement(yi);
        for j in 0..ls.len() {
            let c = p.alpha * sf.weights[(i, j)];
            if c == 0.0 {
                continue;
            }
            let prod = lam_l * lam[j];
            let eps = prod - star[j];
            t.exact += c * off * prod;
            t.intermediate += c * off * star[j];
            t.linear += c * star[j];
            t.linearization_error += c * on * star[j];
            t.bilinear_error += c * on * prod;
            t.weighted_product_error += c * off * eps;
            t.plain_product_error += c * eps;
        }
    }
    t
}

fn terms_for(l: usize, sf: &SpannedField, y: &[f64]) -> Result<LieTerms> {
    sf.check(l, y)?;
    let fl = &sf.dictionary.logistics()[l];
    let joins: Vec<ConjLogistic> = sf
        .dictionary
        .logistics()
        .iter()
        .map(|g| fl.join(g))
        .collect::<Result<_>>()?;
    Ok(lie_terms(sf, &joins, l, y))
}

/// `Λ_f(y) Λ_g(y) − Λ_{f∨g}(y)`.
pub fn product_approx_error(f: &ConjLogistic, g: &ConjLogistic, y: &[f64]) -> Result<f64> {
    let joined = f.join(g)?;
    Ok(f.eval(y)? * g.eval(y)? - joined.eval(y)?)
}

/// Distance from `y` to the nearest center hyperplane `y_i = μ_ji`.
pub fn hyperplane_distance(y: &[f64], d: &SillDictionary) -> Result<f64> {
    check_dim("hyperplane distance point", d.m(), y.len())?;
    Ok(center_distance(y, d.logistics()))
}

fn center_distance<'a>(y: &[f64], fs: impl IntoIterator<Item = &'a ConjLogistic>) -> f64 {
    fs.into_iter()
        .flat_map(|f| f.mu().iter().zip(y).map(|(mu, yi)| (yi - mu).abs()))
        .fold(f64::INFINITY, f64::min)
}

fn check_separation<'a>(
    points: &[Vec<f64>],
    fs: impl IntoIterator<Item = &'a ConjLogistic> + Clone,
    delta: f64,
) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(SillError::InvalidParameter(format!(
            "hyperplane separation must be positive, got {delta}"
        )));
    }
    for (k, y) in points.iter().enumerate() {
        let dist = center_distance(y, fs.clone());
        if dist < delta {
            return Err(SillError::OnHyperplane {
                point: k,
                distance: dist,
                delta,
            });
        }
    }
    Ok(())
}

/// Exponential-decay fit of the worst product-approximation error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Steepness scale factors, strictly increasing.
    pub alphas: Vec<f64>,
    pub max_errors: Vec<f64>,
    /// Fitted `d ln(max_error) / d scale`.
    pub slope: f64,
    pub intercept: f64,
}

/// Measures how fast `Λ_f Λ_g` approaches `Λ_{f∨g}` as both steepness
/// vectors are scaled up, over a grid kept `delta` away from both functions'
/// center hyperplanes.
pub fn theorem1_decay(
    f: &ConjLogistic,
    g: &ConjLogistic,
    grid: &[Vec<f64>],
    scales: &[f64],
    delta: f64,
) -> Result<DecayFit> {
    if !(f.dominates(g)? || g.dominates(f)?) {
        return Err(SillError::Incomparable);
    }
    if grid.is_empty() {
        return Err(SillError::InvalidParameter("grid is empty".into()));
    }
    for y in grid {
        check_dim("grid point", f.dim(), y.len())?;
    }
    check_separation(grid, [f, g], delta)?;
    if scales.len() < 2 || scales.windows(2).any(|w| w[1] <= w[0]) || scales[0] <= 0.0 {
        return Err(SillError::InvalidParameter(
            "scales must be positive, strictly increasing, at least two".into(),
        ));
    }
    let mut max_errors = Vec::with_capacity(scales.len());
    for &s in scales {
        let (fs, gs) = (f.scaled(s), g.scaled(s));
        let mut worst: f64 = 0.0;
        for y in grid {
            worst = worst.max(product_approx_error(&fs, &gs, y)?.abs());
        }
        if worst <= 0.0 || !worst.is_finite() {
            return Err(SillError::InvalidParameter(format!(
                "max product error {worst:e} at scale {s} is not a positive finite number"
            )));
        }
        max_errors.push(worst);
    }
    let logs: Vec<f64> = max_errors.iter().map(|e| e.ln()).collect();
    let (slope, intercept) = linear_fit(scales, &logs).expect("at least two distinct scales");
    Ok(DecayFit {
        alphas: scales.to_vec(),
        max_errors,
        slope,
        intercept,
    })
}

/// `Λ̇_l = Σ_i Σ_j α_li w_ij (1 − λ_li) Λ_l Λ_j`.
pub fn lie_derivative_exact(l: usize, sf: &SpannedField, y: &[f64]) -> Result<f64> {
    Ok(terms_for(l, sf, y)?.exact)
}

/// Products replaced by joins: `Σ α_li w_ij (1 − λ_li) Λ(y; θ_l ∨ θ_j)`.
pub fn lie_approx_intermediate(l: usize, sf: &SpannedField, y: &[f64]) -> Result<f64> {
    Ok(terms_for(l, sf, y)?.intermediate)
}

/// Fully linear in the completed dictionary: `Σ α_li w_ij Λ(y; θ_l ∨ θ_j)`.
pub fn lie_approx_linear(l: usize, sf: &SpannedField, y: &[f64]) -> Result<f64> {
    Ok(terms_for(l, sf, y)?.linear)
}

/// `Σ α_li w_ij λ_li Λ(y; θ_l ∨ θ_j)`, the gap from intermediate to linear.
pub fn error_term_linearization(l: usize, sf: &SpannedField, y: &[f64]) -> Result<f64> {
    Ok(terms_for(l, sf, y)?.linearization_error)
}

/// `Σ α_li w_ij λ_li Λ_l Λ_j`.
pub fn error_term_bilinear(l: usize, sf: &SpannedField, y: &[f64]) -> Result<f64> {
    Ok(terms_for(l, sf, y)?.bilinear_error)
}

/// `Σ α_li w_ij (1 − λ_li) ε_lj(y)`, with `ε_lj = Λ_l Λ_j − Λ_{l∨j}`.
pub fn weighted_product_error(l: usize, sf: &SpannedField, y: &[f64]) -> Result<f64> {
    Ok(terms_for(l, sf, y)?.weighted_product_error)
}

/// Bounds and residual statistics for one steepness scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    #[serde(rename = "bar_B1")]
    pub bar_b1: f64,
    #[serde(rename = "bar_B2")]
    pub bar_b2: f64,
    #[serde(rename = "tilde_B1")]
    pub tilde_b1: f64,
    #[serde(rename = "tilde_B2")]
    pub tilde_b2: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// From [`compute_bounds`]: worst `|Λ̇_l − Σ α w Λ*|` on the grid.
    /// From [`closure_experiment`]: worst held-out `‖ε(y)‖∞` of the fitted model.
    pub residual_max: f64,
    pub residual_mean: f64,
    /// Worst `|Λ̇_l − Σ α w Λ*|` over logistics and grid points.
    pub linear_residual_max: f64,
    /// Logistic index attaining `linear_residual_max`.
    pub worst_function: usize,
    pub alpha_scale: f64,
    pub m: usize,
    /// `residual_max ≤ bar_B1 + bar_B2`.
    pub bound_holds: bool,
}

/// Uniform bounds over a sampled grid.
///
/// `bar_B1` and `tilde_B2` are grid maxima of `|Σ α w (1−λ) ε|` and
/// `|Σ α w ε|`. `bar_B2` and `tilde_B1` are `Σ ν_ij / 2^{m+1}` and
/// `Σ ν_ij / 2^{2m+1}` with `ν_ij = min(|α_li w_ij|, a²)`. Every bound is the
/// maximum over dictionary logistics `l`.
pub fn compute_bounds(sf: &SpannedField, grid: &[Vec<f64>], a: f64, delta: f64) -> Result<ClosureReport> {
    if grid.is_empty() {
        return Err(SillError::InvalidParameter("grid is empty".into()));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(SillError::InvalidParameter(format!("interval radius must be positive, got {a}")));
    }
    let d = &sf.dictionary;
    for y in grid {
        check_dim("grid point", d.m(), y.len())?;
    }
    check_separation(grid, d.logistics(), delta)?;

    let m = d.m();
    let table = sf.join_table();
    let a2 = a * a;
    let per_l: Vec<(f64, f64, f64, f64, f64, f64)> = (0..d.n_logistics())
        .into_par_iter()
        .map(|l| {
            let mut b1: f64 = 0.0;
            let mut b2t: f64 = 0.0;
            let mut lin_max: f64 = 0.0;
            let mut lin_sum = 0.0;
            for y in grid {
                let t = lie_terms(sf, &table[l], l, y);
                b1 = b1.max(t.weighted_product_error.abs());
                b2t = b2t.max(t.plain_product_error.abs());
                let r = (t.exact - t.linear).abs();
                lin_max = lin_max.max(r);
                lin_sum += r;
            }
            let fl = &d.logistics()[l];
            let nu: f64 = (0..m)
                .flat_map(|i| (0..d.n_logistics()).map(move |j| (i, j)))
                .map(|(i, j)| (fl.alpha()[i] * sf.weights[(i, j)]).abs().min(a2))
                .sum();
            let bar_b2 = nu / 2f64.powi(m as i32 + 1);
            let tilde_b1 = nu / 2f64.powi(2 * m as i32 + 1);
            (b1, bar_b2, tilde_b1, b2t, lin_max, lin_sum / grid.len() as f64)
        })
        .collect();

    let mut rep = ClosureReport {
        bar_b1: 0.0,
        bar_b2: 0.0,
        tilde_b1: 0.0,
        tilde_b2: 0.0,
        b: 0.0,
        residual_max: 0.0,
        residual_mean: 0.0,
        linear_residual_max: 0.0,
        worst_function: 0,
        alpha_scale: 1.0,
        m,
        bound_holds: true,
    };
    for (l, &(b1, b2, tb1, tb2, lin_max, lin_mean)) in per_l.iter().enumerate() {
        rep.bar_b1 = rep.bar_b1.max(b1);
        rep.bar_b2 = rep.bar_b2.max(b2);
        rep.tilde_b1 = rep.tilde_b1.max(tb1);
        rep.tilde_b2 = rep.tilde_b2.max(tb2);
        if lin_max > rep.linear_residual_max || l == 0 {
            rep.linear_residual_max = lin_max;
            rep.residual_max = lin_max;
            rep.residual_mean = lin_mean;
            rep.worst_function = l;
        }
    }
    rep.b = (rep.bar_b1 + rep.bar_b2).min(rep.tilde_b1 + rep.tilde_b2);
    rep.bound_holds = rep.residual_max <= rep.bar_b1 + rep.bar_b2;
    Ok(rep)
}

/// Regular sampling of a box: training points at cell centers, held-out
/// points at interior cell corners (shifted by half a cell).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_dim: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        check_dim("grid hi", self.lo.len(), self.hi.len())?;
        if self.lo.is_empty() {
            return Err(SillError::InvalidParameter("grid needs at least one dimension".into()));
        }
        if self.points_per_dim < 2 {
            return Err(SillError::InvalidParameter("grid needs at least two points per dimension".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| h <= l || !l.is_finite() || !h.is_finite()) {
            return Err(SillError::InvalidParameter("grid box must satisfy lo < hi".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(SillError::InvalidParameter(format!(
                "grid delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn axis(&self, i: usize, offset: f64, range: std::ops::Range<usize>) -> Vec<f64> {
        let h = (self.hi[i] - self.lo[i]) / self.points_per_dim as f64;
        range.map(|k| self.lo[i] + (k as f64 + offset) * h).collect()
    }

    pub fn training_points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| self.axis(i, 0.5, 0..self.points_per_dim))
            .collect();
        cartesian(&axes)
    }

    pub fn heldout_points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| self.axis(i, 0.0, 1..self.points_per_dim))
            .collect();
        cartesian(&axes)
    }

    /// Training points at least `delta` away from every center hyperplane of `fs`.
    pub fn separated_points<'a>(&self, fs: impl IntoIterator<Item = &'a ConjLogistic> + Clone) -> Vec<Vec<f64>> {
        self.training_points()
            .into_iter()
            .filter(|y| center_distance(y, fs.clone()) >= self.delta)
            .collect()
    }
}

/// Cartesian product, first axis varying slowest.
pub fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// For each steepness scale: join-complete, fit a CT generator on the
/// training grid, and measure the fitted model's residual on the held-out
/// grid next to the analytic bounds.
pub fn closure_experiment(
    sf: &SpannedField,
    grid: &GridSpec,
    alpha_scales: &[f64],
    ridge: f64,
    a: f64,
) -> Result<Vec<ClosureReport>> {
    grid.validate()?;
    check_dim("grid dimension", sf.dictionary.m(), grid.dim())?;
    if alpha_scales.is_empty() || alpha_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(SillError::InvalidParameter("alpha scales must be positive".into()));
    }
    let train = grid.training_points();
    let held = grid.heldout_points();
    alpha_scales
        .par_iter()
        .map(|&s| {
            let sfc = sf.scaled(s)?.completed();
            let d = sfc.dictionary();
            check_separation(&train, d.logistics(), grid.delta)?;
            let field = spanned_field(&sfc);
            let model = fit_generator(&make_snapshots(&field, &train)?, d, ridge)?;
            let res = residual(&model, &make_snapshots(&field, &held)?)?;
            let mut rep = compute_bounds(&sfc, &held, a, grid.delta)?;
            rep.residual_max = res.max_abs;
            rep.residual_mean = res.mean_inf_norm;
            rep.alpha_scale = s;
            rep.bound_holds = rep.residual_max <= rep.bar_b1 + rep.bar_b2;
            Ok(rep)
        })
        .collect()
}
