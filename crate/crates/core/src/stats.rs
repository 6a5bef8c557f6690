//! Reductions from raw samples to the comparisons the limit theorems make.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::StatsError;
use crate::functional::TestFunction;
use crate::model::SpectralConstants;

/// JSON has no NaN; undefined statistics travel as `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Empirical CDF of a finite sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// Non-finite values are dropped.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.retain(|v| v.is_finite());
        values.sort_by(f64::total_cmp);
        Self { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{v ≤ x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `(x, F(x))` at every distinct jump point.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = f,
                _ => out.push((x, f)),
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

/// Pools consecutive gaps of every point set.
pub fn gap_ecdf<S: AsRef<[f64]>>(point_sets: &[S]) -> Result<Ecdf, StatsError> {
    let mut gaps = Vec::new();
    for (set, atoms) in point_sets.iter().enumerate() {
        let atoms = atoms.as_ref();
        if atoms.len() < 2 {
            return Err(StatsError::TooFewAtoms { set });
        }
        gaps.extend(atoms.windows(2).map(|w| w[1] - w[0]));
    }
    Ok(Ecdf::new(gaps))
}

/// `sup_x |F_a(x) − F_b(x)|`, evaluated at every jump of either table.
pub fn ks_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let (xa, xb) = (a.values(), b.values());
    if xa.is_empty() || xb.is_empty() {
        return if xa.is_empty() && xb.is_empty() { 0.0 } else { 1.0 };
    }
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS distance against a continuous CDF.
pub fn ks_distance_to_cdf(a: &Ecdf, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = a.len() as f64;
    a.values()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Mean and standard error of `exp(−Σ f(x))` over point sets whose window
/// is `[lo, hi]`.
pub fn empirical_laplace<S: AsRef<[f64]>>(
    point_sets: &[S],
    f: &TestFunction,
    window: (f64, f64),
) -> Result<(f64, f64), StatsError> {
    let (lo, hi) = f.support();
    if lo < window.0 || hi > window.1 {
        return Err(StatsError::SupportExceedsWindow {
            lo,
            hi,
            win_lo: window.0,
            win_hi: window.1,
        });
    }
    if point_sets.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut acc = Moments::default();
    for atoms in point_sets {
        acc.push((-f.sum_over(atoms.as_ref())).exp());
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Sample covariance with jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub replicas: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl CovarianceEstimate {
    pub fn min_eigenvalue(&self) -> f64 {
        let p = self.mean.len();
        let m = DMatrix::from_fn(p, p, |i, j| self.covariance[i][j]);
        m.symmetric_eigenvalues().min()
    }
}

/// Minimum replica count for [`covariance_estimate`].
pub const MIN_COVARIANCE_REPLICAS: usize = 30;

/// Unbiased covariance of replicated vectors `rows[r][k]`; the standard
/// errors are leave-one-out jackknife estimates.
pub fn covariance_estimate(rows: &[Vec<f64>]) -> Result<CovarianceEstimate, StatsError> {
    let r = rows.len();
    if r < MIN_COVARIANCE_REPLICAS {
        return Err(StatsError::TooFewSamples {
            needed: MIN_COVARIANCE_REPLICAS,
            got: r,
        });
    }
    let p = rows[0].len();
    if rows.iter().any(|v| v.len() != p) {
        return Err(StatsError::RaggedInput);
    }
    let rf = r as f64;
    let mean: Vec<f64> = (0..p)
        .map(|k| rows.iter().map(|v| v[k]).sum::<f64>() / rf)
        .collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut covariance = vec![vec![0.0; p]; p];
    let mut stderr = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            // Centered sums: S_a = S_b = 0.
            let s_ab: f64 = centered.iter().map(|v| v[a] * v[b]).sum();
            let cov = s_ab / (rf - 1.0);
            // Leave-one-out: (S_ab − x_a x_b − x_a x_b/(R−1)) / (R−2).
            let loo: Vec<f64> = centered
                .iter()
                .map(|v| {
                    let xy = v[a] * v[b];
                    (s_ab - xy - xy / (rf - 1.0)) / (rf - 2.0)
                })
                .collect();
            let loo_mean = loo.iter().sum::<f64>() / rf;
            let var = (rf - 1.0) / rf * loo.iter().map(|t| (t - loo_mean).powi(2)).sum::<f64>();
            covariance[a][b] = cov;
            covariance[b][a] = cov;
            stderr[a][b] = var.sqrt();
            stderr[b][a] = var.sqrt();
        }
    }
    Ok(CovarianceEstimate {
        replicas: r,
        mean,
        covariance,
        stderr,
    })
}

pub const UNIFORMITY_BINS: usize = 16;
pub const UNIFORMITY_ORDERS: usize = 4;
pub const MIN_UNIFORMITY_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityResult {
    pub samples: usize,
    pub chi2: f64,
    /// 0.999 quantile of χ² with `bins − 1` degrees of freedom.
    pub chi2_threshold: f64,
    /// `|mean e^{imθ}|` for `m = 1..=4`.
    pub moduli: Vec<f64>,
    pub max_modulus: f64,
}

/// χ² over 16 equal bins of `[0, 2π)` and the first four characteristic
/// moduli of the phases (taken mod 2π).
pub fn uniformity_test(phases: &[f64]) -> Result<UniformityResult, StatsError> {
    let n = phases.len();
    if n < MIN_UNIFORMITY_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_UNIFORMITY_SAMPLES,
            got: n,
        });
    }
    let mut counts = [0usize; UNIFORMITY_BINS];
    let mut sums = [Complex64::default(); UNIFORMITY_ORDERS];
    for &theta in phases {
        let w = theta.rem_euclid(TAU);
        let bin = ((w / TAU * UNIFORMITY_BINS as f64) as usize).min(UNIFORMITY_BINS - 1);
        counts[bin] += 1;
        for (m, s) in sums.iter_mut().enumerate() {
            *s += Complex64::cis((m + 1) as f64 * w);
        }
    }
    let expected = n as f64 / UNIFORMITY_BINS as f64;
    let chi2 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let moduli: Vec<f64> = sums.iter().map(|s| s.norm() / n as f64).collect();
    let max_modulus = moduli.iter().copied().fold(0.0, f64::max);
    Ok(UniformityResult {
        samples: n,
        chi2,
        chi2_threshold: chi2_quantile(0.999, (UNIFORMITY_BINS - 1) as f64),
        moduli,
        max_modulus,
    })
}

pub fn chi2_quantile(p: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive degrees of freedom").inverse_cdf(p)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive standard deviation").cdf(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharDecay {
    pub m: i32,
    pub replicas: usize,
    pub empirical: Complex64,
    pub stderr: f64,
    pub theory: Complex64,
    pub distance: f64,
}

impl CharDecay {
    pub fn within(&self, k: f64) -> bool {
        self.distance <= k * self.stderr
    }
}

/// Empirical `E e^{2mi(θ̃_after − θ̃_before)}` against `(t/t₀)^{⟨G_m⟩}`.
pub fn char_decay_test(
    before: &[f64],
    after: &[f64],
    m: i32,
    t0: f64,
    t: f64,
    constants: &SpectralConstants,
) -> Result<CharDecay, StatsError> {
    if before.len() != after.len() {
        return Err(StatsError::RaggedInput);
    }
    let r = before.len();
    if r < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: r });
    }
    let zs: Vec<Complex64> = before
        .iter()
        .zip(after)
        .map(|(b, a)| Complex64::cis(2.0 * m as f64 * (a - b)))
        .collect();
    let empirical = zs.iter().sum::<Complex64>() / r as f64;
    let spread: f64 = zs.iter().map(|z| (z - empirical).norm_sqr()).sum();
    let stderr = (spread / ((r - 1) as f64 * r as f64)).sqrt();
    let theory = (constants.g_mean(m) * (t / t0).ln()).exp();
    Ok(CharDecay {
        m,
        replicas: r,
        empirical,
        stderr,
        theory,
        distance: (empirical - theory).norm(),
    })
}

/// Running sums that merge exactly by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Unbiased sample variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    #[serde(with = "nullable")]
    pub statistic: f64,
    #[serde(with = "nullable")]
    pub threshold: f64,
    pub pass: bool,
}

impl TestRecord {
    /// Passes when `statistic < threshold`.
    pub fn below(statistic: f64, threshold: f64) -> Self {
        Self {
            statistic,
            threshold,
            pass: statistic < threshold,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub moments: Moments,
    #[serde(with = "nullable")]
    pub mean: f64,
    #[serde(with = "nullable")]
    pub variance: f64,
    #[serde(with = "nullable")]
    pub stderr: f64,
}

impl From<Moments> for StatSummary {
    fn from(moments: Moments) -> Self {
        Self {
            moments,
            mean: moments.mean(),
            variance: moments.variance(),
            stderr: moments.stderr(),
        }
    }
}

/// Per-statistic moments, ECDF tables and test outcomes for one source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub source: String,
    pub replicas: usize,
    pub statistics: BTreeMap<String, StatSummary>,
    pub ecdfs: BTreeMap<String, Vec<(f64, f64)>>,
    pub tests: BTreeMap<String, TestRecord>,
}

impl EnsembleSummary {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            ..Self::default()
        }
    }

    pub fn add_statistic(&mut self, name: impl Into<String>, moments: Moments) {
        self.statistics.insert(name.into(), moments.into());
    }

    /// Adds the other summary's sums into this one; ECDF tables and test
    /// records are not re-derived and are dropped when the sources differ.
    pub fn merge(&mut self, other: &Self) {
        self.replicas += other.replicas;
        for (name, stat) in &other.statistics {
            let entry = self.statistics.entry(name.clone()).or_default();
            let mut m = entry.moments;
            m.merge(&stat.moments);
            *entry = m.into();
        }
        if self.source != other.source {
            self.ecdfs.clear();
            self.tests.clear();
        }
    }
}
