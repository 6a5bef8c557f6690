//! Non-negative, compactly supported test functions for Laplace functionals.

use serde::{Deserialize, Serialize};

/// Piecewise-linear table `f(x_i) = y_i`, zero outside `[x_0, x_last]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TestFunction {
    /// Returns `None` unless `xs` is strictly increasing, both tables have
    /// the same length ≥ 2, and every `y` is finite and non-negative.
    pub fn from_table(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        let ok = xs.len() >= 2
            && xs.len() == ys.len()
            && xs.windows(2).all(|w| w[0] < w[1])
            && ys.iter().all(|y| y.is_finite() && *y >= 0.0)
            && xs.iter().all(|x| x.is_finite());
        ok.then_some(Self { xs, ys })
    }

    /// `h · max(0, 1 − |x − x₀|/w)`.
    pub fn triangle(height: f64, center: f64, width: f64) -> Self {
        assert!(width > 0.0 && height >= 0.0, "triangle needs width > 0, height >= 0");
        Self {
            xs: vec![center - width, center, center + width],
            ys: vec![0.0, height, 0.0],
        }
    }

    pub fn zero(lo: f64, hi: f64) -> Self {
        Self {
            xs: vec![lo, hi],
            ys: vec![0.0, 0.0],
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("table is non-empty"))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let j = self.xs.partition_point(|&xi| xi <= x);
        if j == 0 {
            return self.ys[0];
        }
        if j == self.xs.len() {
            return *self.ys.last().expect("table is non-empty");
        }
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let (y0, y1) = (self.ys[j - 1], self.ys[j]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `Σ f(x)` over the atoms.
    pub fn sum_over(&self, atoms: &[f64]) -> f64 {
        atoms.iter().map(|&x| self.eval(x)).sum()
    }
}
