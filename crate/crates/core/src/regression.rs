//! Least-squares identification of finite Koopman generators and operators.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::bench::{rk4, Trajectory};
use crate::dictionary::SillDictionary;
use crate::error::{check_dim, Result, SillError};

/// Continuous-time generator or discrete-time operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "CT")]
    Continuous,
    #[serde(rename = "DT")]
    Discrete,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Continuous => "CT",
            Mode::Discrete => "DT",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn expect_mode(expected: Mode, found: Mode) -> Result<()> {
    if expected != found {
        return Err(SillError::ModeMismatch {
            expected: expected.as_str(),
            found: found.as_str(),
        });
    }
    Ok(())
}

/// Paired samples: measurements `Y` with derivatives (CT) or successors (DT).
///
/// Both matrices are `r × m`, one snapshot per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    y: DMatrix<f64>,
    d: DMatrix<f64>,
    mode: Mode,
    dt: Option<f64>,
}

impl SnapshotSet {
    pub fn new(y: DMatrix<f64>, d: DMatrix<f64>, mode: Mode, dt: Option<f64>) -> Result<Self> {
        if y.nrows() == 0 {
            return Err(SillError::EmptySnapshots);
        }
        if y.ncols() == 0 {
            return Err(SillError::InvalidParameter(
                "snapshots need at least one measurement column".into(),
            ));
        }
        check_dim("snapshot rows", y.nrows(), d.nrows())?;
        check_dim("snapshot columns", y.ncols(), d.ncols())?;
        match (mode, dt) {
            (Mode::Discrete, Some(h)) if h > 0.0 && h.is_finite() => {}
            (Mode::Discrete, _) => {
                return Err(SillError::InvalidParameter(
                    "discrete-time snapshots need a positive dt".into(),
                ))
            }
            (Mode::Continuous, None) => {}
            (Mode::Continuous, Some(_)) => {
                return Err(SillError::InvalidParameter(
                    "dt is only meaningful for discrete-time snapshots".into(),
                ))
            }
        }
        Ok(Self { y, d, mode, dt })
    }

    /// Continuous-time set from measurement rows and derivative rows.
    pub fn continuous(points: &[Vec<f64>], derivatives: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(points)?, rows_to_matrix(derivatives)?, Mode::Continuous, None)
    }

    pub fn discrete(points: &[Vec<f64>], successors: &[Vec<f64>], dt: f64) -> Result<Self> {
        Self::new(rows_to_matrix(points)?, rows_to_matrix(successors)?, Mode::Discrete, Some(dt))
    }

    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.nrows() == 0
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    pub fn measurements(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.y.row(i).iter().copied().collect()
    }

    pub fn target(&self, i: usize) -> Vec<f64> {
        self.d.row(i).iter().copied().collect()
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let Some(first) = rows.first() else {
        return Err(SillError::EmptySnapshots);
    };
    let cols = first.len();
    for r in rows {
        check_dim("row length", cols, r.len())?;
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `dψ(y_i)/dt = (∂ψ/∂y)(y_i) ẏ_i` for every snapshot, as an `r × N` matrix.
pub fn lift_derivatives(s: &SnapshotSet, d: &SillDictionary) -> Result<DMatrix<f64>> {
    expect_mode(Mode::Continuous, s.mode)?;
    check_dim("snapshot measurement dimension", d.m(), s.m())?;
    let mut out = DMatrix::zeros(s.len(), d.len());
    for i in 0..s.len() {
        let jac = d.lift_jacobian(&s.point(i))?;
        let ydot = DVector::from_iterator(s.m(), s.d.row(i).iter().copied());
        out.set_row(i, &(jac * ydot).transpose());
    }
    Ok(out)
}

/// Solves `min_K Σ_i ‖a_i − K g_i‖² + ridge ‖K‖_F²` where `g_i`, `a_i` are the
/// columns of `lifts` and `targets` (both `N × r`).
///
/// With `ridge > 0` this is a Cholesky solve of `(G Gᵀ + ridge I) Kᵀ = G Aᵀ`.
/// With `ridge = 0` the minimum-norm solution `A G⁺` is returned.
pub fn solve_least_squares(
    lifts: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    if lifts.ncols() == 0 {
        return Err(SillError::EmptySnapshots);
    }
    check_dim("target rows", lifts.nrows(), targets.nrows())?;
    check_dim("target columns", lifts.ncols(), targets.ncols())?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(SillError::InvalidParameter(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    if lifts.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(SillError::NonFinite("regression data"));
    }
    let n = lifts.nrows();
    if ridge > 0.0 {
        let gram = lifts * lifts.transpose() + DMatrix::identity(n, n) * ridge;
        let rhs = lifts * targets.transpose();
        let chol = Cholesky::new(gram).ok_or(SillError::Solve("regularized Gram matrix is not positive definite"))?;
        Ok(chol.solve(&rhs).transpose())
    } else {
        let svd = SVD::new(lifts.clone(), true, true);
        let smax = svd.singular_values.max();
        let eps = f64::EPSILON * (n.max(lifts.ncols()) as f64) * smax;
        let pinv = svd.pseudo_inverse(eps).map_err(SillError::Solve)?;
        Ok(targets * pinv)
    }
}

/// Fitted `N × N` matrix bound to its dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct KoopmanModel {
    k: DMatrix<f64>,
    dictionary: SillDictionary,
    mode: Mode,
    ridge: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    mode: Mode,
    ridge: f64,
    dictionary: SillDictionary,
    #[serde(rename = "K")]
    k: Vec<f64>,
}

impl TryFrom<ModelRepr> for KoopmanModel {
    type Error = SillError;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let n = r.dictionary.len();
        check_dim("model K entries", n * n, r.k.len())?;
        KoopmanModel::new(
            DMatrix::from_row_slice(n, n, &r.k),
            r.dictionary,
            r.mode,
            r.ridge,
        )
    }
}

impl From<KoopmanModel> for ModelRepr {
    fn from(m: KoopmanModel) -> Self {
        let k = m.k_row_major();
        ModelRepr {
            mode: m.mode,
            ridge: m.ridge,
            dictionary: m.dictionary,
            k,
        }
    }
}

impl KoopmanModel {
    pub fn new(k: DMatrix<f64>, dictionary: SillDictionary, mode: Mode, ridge: f64) -> Result<Self> {
        check_dim("model rows", dictionary.len(), k.nrows())?;
        check_dim("model columns", dictionary.len(), k.ncols())?;
        Ok(Self {
            k,
            dictionary,
            mode,
            ridge,
        })
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn k_row_major(&self) -> Vec<f64> {
        self.k.transpose().as_slice().to_vec()
    }

    pub fn dictionary(&self) -> &SillDictionary {
        &self.dictionary
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Eigenvalues of `K` as `(re, im)` pairs, for spectral diagnostics.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        self.k
            .complex_eigenvalues()
            .iter()
            .map(|c| (c.re, c.im))
            .collect()
    }
}

/// Fits a continuous-time generator against analytic `dψ/dt` targets.
pub fn fit_generator(s: &SnapshotSet, d: &SillDictionary, ridge: f64) -> Result<KoopmanModel> {
    expect_mode(Mode::Continuous, s.mode)?;
    check_dim("snapshot measurement dimension", d.m(), s.m())?;
    if s.y.iter().chain(s.d.iter()).any(|v| !v.is_finite()) {
        return Err(SillError::NonFinite("snapshot data"));
    }
    let lifts = lift_points(&s.y, d)?;
    let targets = lift_derivatives(s, d)?.transpose();
    let k = solve_least_squares(&lifts, &targets, ridge)?;
    KoopmanModel::new(k, d.clone(), Mode::Continuous, ridge)
}

/// Fits a discrete-time operator `ψ(y⁺) ≈ K ψ(y)`.
pub fn fit_edmd(s: &SnapshotSet, d: &SillDictionary, ridge: f64) -> Result<KoopmanModel> {
    expect_mode(Mode::Discrete, s.mode)?;
    check_dim("snapshot measurement dimension", d.m(), s.m())?;
    if s.y.iter().chain(s.d.iter()).any(|v| !v.is_finite()) {
        return Err(SillError::NonFinite("snapshot data"));
    }
    let lifts = lift_points(&s.y, d)?;
    let targets = lift_points(&s.d, d)?;
    let k = solve_least_squares(&lifts, &targets, ridge)?;
    KoopmanModel::new(k, d.clone(), Mode::Discrete, ridge)
}

fn lift_points(rows: &DMatrix<f64>, d: &SillDictionary) -> Result<DMatrix<f64>> {
    let mut g = DMatrix::zeros(d.len(), rows.nrows());
    let mut y = vec![0.0; rows.ncols()];
    for i in 0..rows.nrows() {
        for (j, v) in y.iter_mut().enumerate() {
            *v = rows[(i, j)];
        }
        g.set_column(i, &d.lift(&y)?);
    }
    Ok(g)
}

/// Measurement block of a lifted state.
pub fn project_state(z: &[f64], d: &SillDictionary) -> Result<Vec<f64>> {
    check_dim("lifted state", d.len(), z.len())?;
    Ok(z[1..=d.m()].to_vec())
}

/// Integrates `ż = K z` from `z₀ = ψ(y₀)` with classical RK4 and projects each
/// step back to measurements. Row 0 is `y₀`.
pub fn predict_ct(model: &KoopmanModel, y0: &[f64], horizon: f64, dt: f64) -> Result<Trajectory> {
    expect_mode(Mode::Continuous, model.mode)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SillError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(SillError::InvalidParameter(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    let d = &model.dictionary;
    let z0 = d.lift(y0)?;
    let steps = (horizon / dt).round() as usize;
    let k = &model.k;
    let lifted = rk4(
        |z: &[f64]| {
            let zv = DVector::from_column_slice(z);
            (k * zv).as_slice().to_vec()
        },
        z0.as_slice(),
        dt,
        steps,
    );
    let m = d.m();
    Ok(Trajectory {
        dt,
        states: lifted.states.iter().map(|z| z[1..=m].to_vec()).collect(),
        diverged: lifted.diverged,
    })
}

/// Per-snapshot closure residuals `ε(y_i)` with summary statistics.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// `r × N`, row `i` is the residual of snapshot `i`.
    pub residuals: DMatrix<f64>,
    pub max_row_norm: f64,
    pub mean_row_norm: f64,
    /// Largest absolute residual per dictionary function.
    pub per_function_max_abs: Vec<f64>,
    /// Largest absolute entry overall (max over snapshots of `‖ε(y_i)‖∞`).
    pub max_abs: f64,
    /// Mean over snapshots of `‖ε(y_i)‖∞`.
    pub mean_inf_norm: f64,
}

impl ResidualReport {
    fn from_matrix(residuals: DMatrix<f64>) -> Self {
        let r = residuals.nrows();
        let norms: Vec<f64> = residuals.row_iter().map(|row| row.norm()).collect();
        let inf: Vec<f64> = residuals.row_iter().map(|row| row.amax()).collect();
        let per_function_max_abs = residuals.column_iter().map(|c| c.amax()).collect();
        Self {
            max_row_norm: norms.iter().copied().fold(0.0, f64::max),
            mean_row_norm: norms.iter().sum::<f64>() / r as f64,
            max_abs: inf.iter().copied().fold(0.0, f64::max),
            mean_inf_norm: inf.iter().sum::<f64>() / r as f64,
            per_function_max_abs,
            residuals,
        }
    }
}

/// `ε(y_i) = dψ(y_i)/dt − K ψ(y_i)` (CT) or `ψ(y_i⁺) − K ψ(y_i)` (DT).
pub fn residual(model: &KoopmanModel, s: &SnapshotSet) -> Result<ResidualReport> {
    expect_mode(model.mode, s.mode)?;
    let d = &model.dictionary;
    check_dim("snapshot measurement dimension", d.m(), s.m())?;
    let lifts = lift_points(&s.y, d)?;
    let targets = match s.mode {
        Mode::Continuous => lift_derivatives(s, d)?.transpose(),
        Mode::Discrete => lift_points(&s.d, d)?,
    };
    let eps = targets - &model.k * lifts;
    Ok(ResidualReport::from_matrix(eps.transpose()))
}
