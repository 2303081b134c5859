//! Statistics of logistic functions with uniformly sampled parameters.
//!
//! With `X, Y, Z ~ U(−a, a)` iid, the logistic argument `α(y − μ)` is
//! distributed as `X(Y − Z)`. Its density has a closed form with an
//! integrable log singularity at zero; expectations of `λ` and `λ²` against
//! it are computed by quadrature and cross-checked by seeded Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::logistic;
use crate::error::{Result, SillError};
use crate::numeric::GaussLegendre;

/// Identifier of the generator behind every Monte Carlo estimate.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// Samples per Monte Carlo shard. Shard `k` draws from stream `k` of the
/// seeded generator, so results do not depend on how shards are scheduled.
pub const SHARD_SIZE: u64 = 1 << 16;

/// Relative half-width of the analytically integrated core around `z = 0`.
pub const SINGULAR_SPLIT: f64 = 1e-8;

const GAUSS_NODES: usize = 10;
const MAX_PANELS: usize = 1 << 14;

/// Radius of the symmetric sampling interval `U(−a, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformInterval {
    a: f64,
}

impl UniformInterval {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(SillError::InvalidParameter(format!(
                "interval radius must be positive, got {a}"
            )));
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        rng.gen_range(-self.a..self.a)
    }
}

/// Density of `Y − Z`: `1/(2a) − |x|/(4a²)` on `[−2a, 2a]`.
pub fn triangular_pdf(x: f64, a: f64) -> Result<f64> {
    UniformInterval::new(a)?;
    if x.abs() > 2.0 * a {
        return Ok(0.0);
    }
    Ok(1.0 / (2.0 * a) - x.abs() / (4.0 * a * a))
}

/// Density of `X(Y − Z)`: `(1/2a²)(ln(2a²/|z|) + |z|/2a² − 1)` on `[−2a², 2a²]`.
pub fn product_pdf(z: f64, a: f64) -> Result<f64> {
    UniformInterval::new(a)?;
    if z == 0.0 {
        return Err(SillError::SingularPoint);
    }
    Ok(product_pdf_unchecked(z.abs(), a))
}

fn product_pdf_unchecked(z_abs: f64, a: f64) -> f64 {
    let c = 2.0 * a * a;
    if z_abs >= c {
        return 0.0;
    }
    ((c / z_abs).ln() + z_abs / c - 1.0) / c
}

/// `∫_0^z g` for `0 ≤ z ≤ 2a²`.
fn product_mass_from_zero(z: f64, a: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let c = 2.0 * a * a;
    let z = z.min(c);
    (z * (c / z).ln() + z * z / (2.0 * c)) / c
}

/// Cumulative distribution of `X(Y − Z)`.
pub fn product_cdf(z: f64, a: f64) -> Result<f64> {
    UniformInterval::new(a)?;
    let half = product_mass_from_zero(z.abs(), a);
    Ok(if z >= 0.0 { 0.5 + half } else { 0.5 - half })
}

/// `∫ g(z) h(z) dz` over the product density.
///
/// The core `|z| < SINGULAR_SPLIT·a²` is integrated analytically with `h`
/// frozen at zero; the rest uses composite Gauss–Legendre in `ln|z|`, doubling
/// panels from `quad_points / 10` until successive estimates agree to 1e-13.
pub fn integrate_against_product<H: Fn(f64) -> f64>(a: f64, quad_points: usize, h: H) -> Result<f64> {
    UniformInterval::new(a)?;
    if quad_points < 100 {
        return Err(SillError::InvalidParameter(format!(
            "at least 100 quadrature points required, got {quad_points}"
        )));
    }
    let c = 2.0 * a * a;
    let eps = SINGULAR_SPLIT * a * a;
    let core = 2.0 * h(0.0) * product_mass_from_zero(eps, a);

    let rule = GaussLegendre::new(GAUSS_NODES);
    let integrand = |t: f64| {
        let z = t.exp();
        product_pdf_unchecked(z, a) * (h(z) + h(-z)) * z
    };
    let (lo, hi) = (eps.ln(), c.ln());
    let mut panels = quad_points.div_ceil(GAUSS_NODES);
    let mut prev = rule.integrate(integrand, lo, hi, panels);
    let mut change = f64::NAN;
    while panels * 2 <= MAX_PANELS {
        panels *= 2;
        let next = rule.integrate(integrand, lo, hi, panels);
        change = (next - prev).abs();
        if change <= 1e-13 * next.abs().max(1.0) {
            return Ok(core + next);
        }
        prev = next;
    }
    Err(SillError::QuadratureNonConvergence { panels, change })
}

/// Quadrature moments of `λ(X(Y − Z))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticMoments {
    pub a: f64,
    pub expectation: f64,
    pub variance: f64,
}

pub fn expected_logistic(a: f64, quad_points: usize) -> Result<LogisticMoments> {
    let expectation = integrate_against_product(a, quad_points, logistic)?;
    let second = integrate_against_product(a, quad_points, |z| {
        let l = logistic(z);
        l * l
    })?;
    Ok(LogisticMoments {
        a,
        expectation,
        variance: (second - expectation * expectation).max(0.0),
    })
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Unbiased sample variance of the summand.
    pub sample_variance: f64,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    fn estimate(&self, seed: u64) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let sample_variance = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            mean,
            stderr: (sample_variance / n).sqrt(),
            sample_variance,
            samples: self.n,
            seed,
        }
    }
}

/// Runs `draw` for `samples` draws across fixed-size shards and reduces the
/// per-shard sums in shard order. Each draw yields one value per tracked series.
fn sharded<const K: usize, F>(samples: u64, seed: u64, draw: F) -> [Moments; K]
where
    F: Fn(&mut ChaCha8Rng) -> [f64; K] + Sync,
{
    let shards = samples.div_ceil(SHARD_SIZE);
    let partial: Vec<[Moments; K]> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let n = SHARD_SIZE.min(samples - k * SHARD_SIZE);
            let mut acc = [Moments::default(); K];
            for _ in 0..n {
                for (a, v) in acc.iter_mut().zip(draw(&mut rng)) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    partial.into_iter().fold([Moments::default(); K], |mut tot, p| {
        for (t, s) in tot.iter_mut().zip(p) {
            *t = t.merge(s);
        }
        tot
    })
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(SillError::InvalidParameter("at least one sample required".into()));
    }
    Ok(())
}

/// Monte Carlo mean of `λ(X(Y − Z))`; also returns the estimate for `λ²`.
pub fn mc_expected_logistic(a: f64, samples: u64, seed: u64) -> Result<(McEstimate, McEstimate)> {
    let u = UniformInterval::new(a)?;
    check_samples(samples)?;
    let [first, second] = sharded(samples, seed, |rng| {
        let x = u.sample(rng);
        let y = u.sample(rng);
        let z = u.sample(rng);
        let l = logistic(x * (y - z));
        [l, l * l]
    });
    Ok((first.estimate(seed), second.estimate(seed)))
}

/// Monte Carlo mean of `Π_{i=1}^m λ_i` with every coordinate's parameters and
/// measurement sampled independently from `U(−a, a)`.
pub fn expected_conjunctive(m: usize, a: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    if m == 0 {
        return Err(SillError::InvalidParameter("m must be at least 1".into()));
    }
    let u = UniformInterval::new(a)?;
    check_samples(samples)?;
    let [est] = sharded(samples, seed, |rng| {
        let mut prod = 1.0;
        for _ in 0..m {
            let alpha = u.sample(rng);
            let mu = u.sample(rng);
            let y = u.sample(rng);
            prod *= logistic(alpha * (y - mu));
        }
        [prod]
    });
    Ok(est.estimate(seed))
}

/// Reported moments for one interval radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub a: f64,
    pub expectation: f64,
    pub variance: f64,
    pub mc_expectation: f64,
    pub mc_stderr: f64,
    pub mc_variance: f64,
    pub samples: u64,
    pub seed: u64,
    pub rng: String,
}

pub fn moment_report(a: f64, quad_points: usize, samples: u64, seed: u64) -> Result<MomentReport> {
    let q = expected_logistic(a, quad_points)?;
    let (first, second) = mc_expected_logistic(a, samples, seed)?;
    Ok(MomentReport {
        a,
        expectation: q.expectation,
        variance: q.variance,
        mc_expectation: first.mean,
        mc_stderr: first.stderr,
        mc_variance: (second.mean - first.mean * first.mean).max(0.0),
        samples,
        seed,
        rng: RNG_ALGORITHM.to_string(),
    })
}

/// Quadrature and Monte Carlo moments for each radius in `a_values`.
pub fn figure2_sweep(a_values: &[f64], quad_points: usize, samples: u64, seed: u64) -> Result<Vec<MomentReport>> {
    a_values
        .iter()
        .map(|&a| moment_report(a, quad_points, samples, seed))
        .collect()
}

/// Expected per-term error magnitudes for one measurement dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRow {
    pub m: usize,
    /// `1 / 2^{m+1}`.
    pub rate_linear: f64,
    /// `1 / 2^{2m+1}`.
    pub rate_bilinear: f64,
    /// Monte Carlo `E[|α_li w_ij| λ_li Λ(θ_l ∨ θ_j)]`.
    pub mc_linear: f64,
    /// Monte Carlo `E[|α_li w_ij| λ_li Λ_l Λ_j]`.
    pub mc_bilinear: f64,
    pub mc_linear_stderr: f64,
    pub mc_bilinear_stderr: f64,
}

/// Analytic per-term rates next to Monte Carlo per-summand magnitudes, with
/// all of `α, w, μ, y` drawn iid from `U(−a, a)`.
pub fn expected_error_rates(m_values: &[usize], a: f64, samples: u64, seed: u64) -> Result<Vec<ErrorRateRow>> {
    let u = UniformInterval::new(a)?;
    check_samples(samples)?;
    m_values
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(SillError::InvalidParameter("m must be at least 1".into()));
            }
            let [lin, bil] = sharded(samples, seed, |rng| {
                let w = u.sample(rng);
                let mut lam_l = 1.0;
                let mut lam_j = 1.0;
                let mut lam_star = 1.0;
                let mut lead = (0.0, 0.0);
                for i in 0..m {
                    let (mu_l, al_l) = (u.sample(rng), u.sample(rng));
                    let (mu_j, al_j) = (u.sample(rng), u.sample(rng));
                    let y = u.sample(rng);
                    let vl = logistic(al_l * (y - mu_l));
                    let vj = logistic(al_j * (y - mu_j));
                    let (mu_s, al_s) = if mu_l >= mu_j { (mu_l, al_l) } else { (mu_j, al_j) };
                    lam_l *= vl;
                    lam_j *= vj;
                    lam_star *= logistic(al_s * (y - mu_s));
                    if i == 0 {
                        lead = (al_l, vl);
                    }
                }
                let (alpha, lam_i) = lead;
                let nu = (alpha * w).abs();
                [nu * lam_i * lam_star, nu * lam_i * lam_l * lam_j]
            });
            let (lin, bil) = (lin.estimate(seed), bil.estimate(seed));
            Ok(ErrorRateRow {
                m,
                rate_linear: 0.5f64.powi(m as i32 + 1),
                rate_bilinear: 0.5f64.powi(2 * m as i32 + 1),
                mc_linear: lin.mean,
                mc_bilinear: bil.mean,
                mc_linear_stderr: lin.stderr,
                mc_bilinear_stderr: bil.stderr,
            })
        })
        .collect()
}
