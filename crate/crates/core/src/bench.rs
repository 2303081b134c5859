//! Benchmark vector fields, exact-derivative snapshots, RK4, and the
//! polynomial non-closure demonstration.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::closure::SpannedField;
use crate::error::{check_dim, Result, SillError};
use crate::numeric::linear_fit;
use crate::regression::{solve_least_squares, SnapshotSet};

/// Closed-form autonomous field `ẏ = F(y)` on `ℝ^m`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64]) -> Vec<f64>;
}

/// Wraps a closure as a [`VectorField`].
pub struct FnField<F> {
    m: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Send + Sync> FnField<F> {
    pub fn new(m: usize, f: F) -> Self {
        Self { m, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Send + Sync> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.m
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        (self.f)(y)
    }
}

/// Sampled trajectory, one state per row. A trajectory that hit a non-finite
/// value is truncated before it and flagged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub diverged: bool,
}

/// Classical fourth-order Runge–Kutta on an arbitrary right-hand side.
pub(crate) fn rk4<F: Fn(&[f64]) -> Vec<f64>>(f: F, y0: &[f64], dt: f64, steps: usize) -> Trajectory {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    let n = y.len();
    let axpy = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, 0.5 * dt));
        let k3 = f(&axpy(&y, &k2, 0.5 * dt));
        let k4 = f(&axpy(&y, &k3, dt));
        let next: Vec<f64> = (0..n)
            .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Trajectory {
                dt,
                states,
                diverged: true,
            };
        }
        states.push(next.clone());
        y = next;
    }
    Trajectory {
        dt,
        states,
        diverged: false,
    }
}

pub fn rk4_integrate(field: &dyn VectorField, y0: &[f64], dt: f64, steps: usize) -> Result<Trajectory> {
    check_dim("initial condition", field.dim(), y0.len())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SillError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    Ok(rk4(|y| field.eval(y), y0, dt, steps))
}

/// Ground-truth field `F_i(y) = Σ_j w_ij Λ_j(y)` lying in the dictionary span.
pub fn spanned_field(sf: &SpannedField) -> impl VectorField + '_ {
    SpannedVectorField(sf)
}

struct SpannedVectorField<'a>(&'a SpannedField);

impl VectorField for SpannedVectorField<'_> {
    fn dim(&self) -> usize {
        self.0.dictionary().m()
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.0.field(y)
    }
}

/// CT snapshots with `ẏ_i = F(y_i)` evaluated exactly.
pub fn make_snapshots(field: &dyn VectorField, points: &[Vec<f64>]) -> Result<SnapshotSet> {
    for p in points {
        check_dim("snapshot point", field.dim(), p.len())?;
    }
    let derivatives: Vec<Vec<f64>> = points.iter().map(|p| field.eval(p)).collect();
    SnapshotSet::continuous(points, &derivatives)
}

/// Axis-aligned box `lo ≤ y ≤ hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Corpus manifest entry for a built-in field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub m: usize,
    pub domain: DomainBox,
    pub parameters: BTreeMap<String, f64>,
}

/// Built-in demonstration systems.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinField {
    /// `ẏ = y²`.
    Quadratic,
    /// `ẏ = r y (1 − y)`.
    LogisticGrowth { rate: f64 },
    /// Van der Pol oscillator; trajectories settle on a bounded limit cycle.
    VanDerPol { mu: f64 },
}

impl BuiltinField {
    pub fn spec(&self) -> FieldSpec {
        let (name, m, lo, hi, parameters) = match self {
            BuiltinField::Quadratic => ("quadratic", 1, vec![-2.0], vec![2.0], BTreeMap::new()),
            BuiltinField::LogisticGrowth { rate } => (
                "logistic_growth",
                1,
                vec![-0.5],
                vec![1.5],
                BTreeMap::from([("rate".to_string(), *rate)]),
            ),
            BuiltinField::VanDerPol { mu } => (
                "van_der_pol",
                2,
                vec![-3.0, -3.0],
                vec![3.0, 3.0],
                BTreeMap::from([("mu".to_string(), *mu)]),
            ),
        };
        FieldSpec {
            name: name.to_string(),
            m,
            domain: DomainBox { lo, hi },
            parameters,
        }
    }
}

impl VectorField for BuiltinField {
    fn dim(&self) -> usize {
        match self {
            BuiltinField::Quadratic | BuiltinField::LogisticGrowth { .. } => 1,
            BuiltinField::VanDerPol { .. } => 2,
        }
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        match self {
            BuiltinField::Quadratic => vec![y[0] * y[0]],
            BuiltinField::LogisticGrowth { rate } => vec![rate * y[0] * (1.0 - y[0])],
            BuiltinField::VanDerPol { mu } => {
                vec![y[1], mu * (1.0 - y[0] * y[0]) * y[1] - y[0]]
            }
        }
    }
}

pub fn builtin_fields() -> Vec<BuiltinField> {
    vec![
        BuiltinField::Quadratic,
        BuiltinField::LogisticGrowth { rate: 1.0 },
        BuiltinField::VanDerPol { mu: 1.0 },
    ]
}

pub fn corpus_manifest() -> Vec<FieldSpec> {
    builtin_fields().iter().map(BuiltinField::spec).collect()
}

/// Scalar monomial basis `{1, y, ..., y^n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolynomialDictionary {
    degree: usize,
}

impl PolynomialDictionary {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(SillError::InvalidParameter("polynomial degree must be at least 1".into()));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lift(&self, y: f64) -> Vec<f64> {
        (0..=self.degree as i32).map(|k| y.powi(k)).collect()
    }

    /// `d(y^k)/dt` along `ẏ = y²`, i.e. `k y^{k+1}`.
    pub fn lie_derivative_quadratic(&self, y: f64) -> Vec<f64> {
        (0..=self.degree as i32).map(|k| k as f64 * y.powi(k + 1)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Example1Row {
    pub y: f64,
    /// `n y^{n+1} − K_n · ψ(y)` for the top monomial.
    pub residual: f64,
    /// `residual / y^{n+1}`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Example1Table {
    pub n: usize,
    /// Fitted row of `K` for `y^n`.
    pub top_row: Vec<f64>,
    pub rows: Vec<Example1Row>,
    /// Log-log slope of `|residual|` against `|y|` over the nonzero eval points.
    pub growth_exponent: Option<f64>,
}

/// Fits the best generator for `ẏ = y²` on the monomial basis of degree `n`
/// over `fit_values`, then evaluates the top-row residual at `eval_values`.
pub fn example1_residual(n: usize, fit_values: &[f64], eval_values: &[f64]) -> Result<Example1Table> {
    let dict = PolynomialDictionary::new(n)?;
    if fit_values.is_empty() {
        return Err(SillError::EmptySnapshots);
    }
    let size = n + 1;
    let lifts = DMatrix::from_fn(size, fit_values.len(), |k, c| fit_values[c].powi(k as i32));
    let targets = DMatrix::from_fn(size, fit_values.len(), |k, c| {
        k as f64 * fit_values[c].powi(k as i32 + 1)
    });
    let kmat = solve_least_squares(&lifts, &targets, 0.0)?;
    let top_row: Vec<f64> = kmat.row(n).iter().copied().collect();

    let rows: Vec<Example1Row> = eval_values
        .iter()
        .map(|&y| {
            let exact = dict.lie_derivative_quadratic(y)[n];
            let approx: f64 = dict.lift(y).iter().zip(&top_row).map(|(p, k)| p * k).sum();
            let residual = exact - approx;
            Example1Row {
                y,
                residual,
                ratio: residual / y.powi(n as i32 + 1),
            }
        })
        .collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.y != 0.0 && r.residual != 0.0)
        .map(|r| (r.y.abs().ln(), r.residual.abs().ln()))
        .unzip();
    let growth_exponent = linear_fit(&xs, &ys).map(|(s, _)| s);

    Ok(Example1Table {
        n,
        top_row,
        rows,
        growth_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_zero_field_and_no_steps() {
        let f = FnField::new(2, |_y: &[f64]| vec![0.0, 0.0]);
        let t = rk4_integrate(&f, &[1.0, -2.0], 0.1, 5).unwrap();
        assert_eq!(t.states.len(), 6);
        assert!(t.states.iter().all(|s| s == &vec![1.0, -2.0]));
        let t0 = rk4_integrate(&f, &[1.0, -2.0], 0.1, 0).unwrap();
        assert_eq!(t0.states.len(), 1);
        assert!(rk4_integrate(&f, &[1.0, -2.0], 0.0, 1).is_err());
    }

    #[test]
    fn rk4_exponential_decay() {
        let f = FnField::new(1, |y: &[f64]| vec![-y[0]]);
        let t = rk4_integrate(&f, &[1.0], 1e-3, 1000).unwrap();
        let end = t.states.last().unwrap()[0];
        assert!((end - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk4_flags_blow_up() {
        let f = FnField::new(1, |y: &[f64]| vec![y[0] * y[0]]);
        let t = rk4_integrate(&f, &[1.0], 0.1, 1000).unwrap();
        assert!(t.diverged);
        assert!(t.states.len() < 1001);
        assert!(t.states.iter().all(|s| s[0].is_finite()));
    }

    #[test]
    fn builtin_corpus() {
        let fields = builtin_fields();
        assert!(fields.len() >= 3);
        assert_eq!(BuiltinField::Quadratic.eval(&[3.0]), vec![9.0]);
        let lg = BuiltinField::LogisticGrowth { rate: 1.0 };
        assert_eq!(lg.eval(&[0.0]), vec![0.0]);
        assert_eq!(lg.eval(&[1.0]), vec![0.0]);
        let manifest = corpus_manifest();
        assert_eq!(manifest[2].m, 2);
        assert_eq!(manifest[2].domain.lo.len(), 2);
    }

    #[test]
    fn snapshots_are_exact() {
        let f = BuiltinField::VanDerPol { mu: 1.0 };
        let pts = vec![vec![0.5, -1.0], vec![2.0, 0.25]];
        let s = make_snapshots(&f, &pts).unwrap();
        assert_eq!(s.len(), 2);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(s.target(i), f.eval(p));
        }
        let zero = FnField::new(1, |_y: &[f64]| vec![0.0]);
        let s0 = make_snapshots(&zero, &[vec![1.0], vec![2.0]]).unwrap();
        assert!(s0.targets().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn example1_linear_dictionary_cannot_cancel_quadratic() {
        let fit: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
        let t = example1_residual(1, &fit, &[0.0, 10.0]).unwrap();
        // symmetric grid: best linear fit of y² is the constant mean(y²)
        let mean_sq = fit.iter().map(|y| y * y).sum::<f64>() / fit.len() as f64;
        assert!((t.top_row[0] - mean_sq).abs() < 1e-9);
        assert!(t.top_row[1].abs() < 1e-9);
        assert!((t.rows[0].residual + t.top_row[0]).abs() < 1e-12);
        assert!(t.rows[1].residual >= (100.0 - mean_sq) - 1e-9);
    }

    #[test]
    fn example1_ratio_tends_to_degree() {
        let fit: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
        for n in 1..=3 {
            let t = example1_residual(n, &fit, &[1e2, 1e3, 1e4]).unwrap();
            let last = t.rows.last().unwrap().ratio;
            assert!((last - n as f64).abs() < 1e-3 * n as f64, "n={n} ratio={last}");
            let errs: Vec<f64> = t.rows.iter().map(|r| (r.ratio - n as f64).abs()).collect();
            assert!(errs[2] <= errs[0]);
        }
    }
}
