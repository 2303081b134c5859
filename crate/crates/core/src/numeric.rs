//! Small numerical helpers shared across modules.

use std::num::NonZeroUsize;

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
///
/// Returns `None` with fewer than two points or zero spread in `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Composite Gauss–Legendre quadrature over equal panels.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    rule: gauss_quad::GaussLegendre,
}

impl GaussLegendre {
    /// `n`-point rule per panel.
    pub fn new(n: usize) -> Self {
        let n = NonZeroUsize::new(n).expect("Gauss-Legendre rule needs at least one node");
        Self {
            rule: gauss_quad::GaussLegendre::new(n),
        }
    }

    pub fn len(&self) -> usize {
        self.rule.nodes().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Composite rule over `panels` equal sub-intervals of `[lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        (0..panels)
            .map(|p| {
                let a = lo + h * p as f64;
                self.rule.integrate(a, a + h, &mut f)
            })
            .sum()
    }
}
