//! Potential model on the circle and its closed-form spectral constants.
//!
//! The driving process is a Brownian motion `X_t` on the circle with
//! generator `L = (σ²/2) d²/dx²`, and the potential is a finite zero-mean
//! Fourier series `F`. Averages `⟨·⟩` are taken against the normalized
//! (probability) volume, so every resolvent and carré du champ reduces to
//! per-mode arithmetic.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Finite Fourier series `Σ_k c_k cos(kx) + s_k sin(kx)`, `k ≥ 1`, with
/// complex coefficients. Index `k - 1` holds mode `k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierSeries {
    pub cos: Vec<Complex64>,
    pub sin: Vec<Complex64>,
}

impl FourierSeries {
    pub fn from_real(cos: &[f64], sin: &[f64]) -> Self {
        let n = cos.len().max(sin.len());
        let pick = |v: &[f64], k: usize| Complex64::new(v.get(k).copied().unwrap_or(0.0), 0.0);
        Self {
            cos: (0..n).map(|k| pick(cos, k)).collect(),
            sin: (0..n).map(|k| pick(sin, k)).collect(),
        }
    }

    /// Highest mode index carried.
    pub fn modes(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn coeff(v: &[Complex64], k: usize) -> Complex64 {
        v.get(k).copied().unwrap_or_default()
    }

    pub fn cos_coeff(&self, k: usize) -> Complex64 {
        Self::coeff(&self.cos, k - 1)
    }

    pub fn sin_coeff(&self, k: usize) -> Complex64 {
        Self::coeff(&self.sin, k - 1)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        (1..=self.modes())
            .map(|k| {
                let (s, c) = (k as f64 * x).sin_cos();
                self.cos_coeff(k) * c + self.sin_coeff(k) * s
            })
            .sum()
    }

    pub fn conj(&self) -> Self {
        Self {
            cos: self.cos.iter().map(|c| c.conj()).collect(),
            sin: self.sin.iter().map(|c| c.conj()).collect(),
        }
    }

    /// Multiplies mode `k` by `factor(k)`.
    pub fn map_modes(&self, factor: impl Fn(usize) -> Complex64) -> Self {
        let n = self.modes();
        Self {
            cos: (1..=n).map(|k| self.cos_coeff(k) * factor(k)).collect(),
            sin: (1..=n).map(|k| self.sin_coeff(k) * factor(k)).collect(),
        }
    }

    /// `⟨f·h⟩` under the normalized measure (no conjugation).
    pub fn mean_product(&self, other: &Self) -> Complex64 {
        let n = self.modes().max(other.modes());
        (1..=n)
            .map(|k| {
                (self.cos_coeff(k) * other.cos_coeff(k) + self.sin_coeff(k) * other.sin_coeff(k))
                    * 0.5
            })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|c| *c == Complex64::default())
    }
}

/// Zero-mean Fourier potential `F` driven by Brownian motion on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    fourier_cos: Vec<f64>,
    fourier_sin: Vec<f64>,
    generator_scale: f64,
}

impl PotentialModel {
    pub fn new(
        fourier_cos: Vec<f64>,
        fourier_sin: Vec<f64>,
        generator_scale: f64,
    ) -> Result<Self, ModelError> {
        if !(generator_scale > 0.0 && generator_scale.is_finite()) {
            return Err(ModelError::InvalidGeneratorScale(generator_scale));
        }
        if fourier_cos.iter().chain(&fourier_sin).any(|c| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient);
        }
        if fourier_cos.iter().chain(&fourier_sin).all(|c| *c == 0.0) {
            return Err(ModelError::ConstantPotential);
        }
        Ok(Self {
            fourier_cos,
            fourier_sin,
            generator_scale,
        })
    }

    /// `F = cos`, `σ² = 1`.
    pub fn cosine() -> Self {
        Self::new(vec![1.0], vec![], 1.0).expect("cos is a valid potential")
    }

    pub fn fourier_cos(&self) -> &[f64] {
        &self.fourier_cos
    }

    pub fn fourier_sin(&self) -> &[f64] {
        &self.fourier_sin
    }

    /// `σ²` in `L = (σ²/2) d²/dx²`.
    pub fn generator_scale(&self) -> f64 {
        self.generator_scale
    }

    pub fn modes(&self) -> usize {
        self.fourier_cos.len().max(self.fourier_sin.len())
    }

    /// `F(x) = Σ a_k cos(kx) + b_k sin(kx)`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, a) in self.fourier_cos.iter().enumerate() {
            if *a != 0.0 {
                acc += a * ((k + 1) as f64 * x).cos();
            }
        }
        for (k, b) in self.fourier_sin.iter().enumerate() {
            if *b != 0.0 {
                acc += b * ((k + 1) as f64 * x).sin();
            }
        }
        acc
    }

    /// Upper bound on `sup |F|`.
    pub fn sup_bound(&self) -> f64 {
        let n = self.modes();
        (0..n)
            .map(|k| {
                let a = self.fourier_cos.get(k).copied().unwrap_or(0.0);
                let b = self.fourier_sin.get(k).copied().unwrap_or(0.0);
                a.hypot(b)
            })
            .sum()
    }

    pub fn series(&self) -> FourierSeries {
        FourierSeries::from_real(&self.fourier_cos, &self.fourier_sin)
    }

    /// Eigenvalue of `L` on mode `k`.
    pub fn mode_eigenvalue(&self, k: usize) -> f64 {
        -0.5 * self.generator_scale * (k * k) as f64
    }

    /// `(L + z)⁻¹ f`, mode by mode.
    pub fn resolvent_apply(
        &self,
        f: &FourierSeries,
        shift: Complex64,
    ) -> Result<FourierSeries, ModelError> {
        for k in 1..=f.modes() {
            let active = f.cos_coeff(k) != Complex64::default() || f.sin_coeff(k) != Complex64::default();
            let denom = Complex64::new(self.mode_eigenvalue(k), 0.0) + shift;
            if active && denom.norm() <= f64::EPSILON * (1.0 + shift.norm()) {
                return Err(ModelError::SingularShift { mode: k, re: shift.re, im: shift.im });
            }
        }
        Ok(f.map_modes(|k| {
            let denom = Complex64::new(self.mode_eigenvalue(k), 0.0) + shift;
            if denom == Complex64::default() {
                Complex64::default()
            } else {
                denom.inv()
            }
        }))
    }

    /// `(L + z) f`.
    pub fn apply_shifted_generator(&self, f: &FourierSeries, shift: Complex64) -> FourierSeries {
        f.map_modes(|k| Complex64::new(self.mode_eigenvalue(k), 0.0) + shift)
    }

    /// `⟨[f, h̄]⟩ = σ² ⟨∇f · ∇h̄⟩` under the normalized measure.
    pub fn carre_du_champ_mean(&self, f: &FourierSeries, h: &FourierSeries) -> Complex64 {
        let n = f.modes().max(h.modes());
        let sum: Complex64 = (1..=n)
            .map(|k| {
                let kk = (k * k) as f64;
                (f.cos_coeff(k) * h.cos_coeff(k).conj() + f.sin_coeff(k) * h.sin_coeff(k).conj())
                    * (0.5 * kk)
            })
            .sum();
        sum * self.generator_scale
    }

    /// Spectral measure of `L` with respect to `F`: atoms `(λ_k, ⟨F_k²⟩)`.
    pub fn spectral_measure(&self) -> Vec<(f64, f64)> {
        let n = self.modes();
        (1..=n)
            .filter_map(|k| {
                let a = self.fourier_cos.get(k - 1).copied().unwrap_or(0.0);
                let b = self.fourier_sin.get(k - 1).copied().unwrap_or(0.0);
                let mass = 0.5 * (a * a + b * b);
                (mass > 0.0).then(|| (self.mode_eigenvalue(k), mass))
            })
            .collect()
    }

    /// Lyapunov exponent `γ(E)` from the spectral measure.
    pub fn lyapunov(&self, energy: f64) -> f64 {
        lyapunov_from_spectral_measure(&self.spectral_measure(), energy)
    }

    /// Energy `E` with `γ(E) = target`, by doubling bracket then bisection.
    pub fn energy_for_lyapunov(&self, target: f64) -> Result<f64, ModelError> {
        let measure = self.spectral_measure();
        let gamma = |e: f64| lyapunov_from_spectral_measure(&measure, e);
        if !(target > 0.0) {
            return Err(ModelError::NoCriticalEnergy);
        }
        let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
        let mut guard = 0;
        while gamma(hi) >= target {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 || !hi.is_finite() {
                return Err(ModelError::NoCriticalEnergy);
            }
        }
        guard = 0;
        while gamma(lo) <= target {
            lo *= 0.5;
            guard += 1;
            if guard > 2000 || lo == 0.0 {
                return Err(ModelError::NoCriticalEnergy);
            }
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if gamma(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Energy where the limiting ensemble has parameter `beta = 1/γ`.
    pub fn energy_for_beta(&self, beta: f64) -> Result<f64, ModelError> {
        self.energy_for_lyapunov(1.0 / beta)
    }

    pub fn spectral_constants(&self, energy: f64) -> Result<SpectralConstants, ModelError> {
        SpectralConstants::compute(self, energy)
    }
}

/// `γ(E) = −(1/4E) ∫ λ/(λ² + 4E) dσ_F(λ)`.
pub fn lyapunov_from_spectral_measure(measure: &[(f64, f64)], energy: f64) -> f64 {
    let integral: f64 = measure
        .iter()
        .map(|(lambda, mass)| lambda / (lambda * lambda + 4.0 * energy) * mass)
        .sum();
    -integral / (4.0 * energy)
}

/// Smooth decay envelope `a(t) = amplitude · (1 + t²)^{-α/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    alpha: f64,
    amplitude: f64,
    form: DecayForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayForm {
    #[default]
    SmoothDefault,
}

impl DecayProfile {
    pub fn new(alpha: f64, amplitude: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidAlpha(alpha));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(ModelError::InvalidAmplitude(amplitude));
        }
        Ok(Self {
            alpha,
            amplitude,
            form: DecayForm::SmoothDefault,
        })
    }

    pub fn unit(alpha: f64) -> Result<Self, ModelError> {
        Self::new(alpha, 1.0)
    }

    /// `a ≡ 0`: the free operator.
    pub fn free() -> Self {
        Self {
            alpha: 1.0,
            amplitude: 0.0,
            form: DecayForm::SmoothDefault,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn form(&self) -> DecayForm {
        self.form
    }

    pub fn is_free(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let t = t.abs();
        if t <= 1.0 {
            self.amplitude * (1.0 + t * t).powf(-0.5 * self.alpha)
        } else {
            // factor out t^{-α} so the tail keeps full relative precision
            let inv = 1.0 / t;
            self.amplitude * t.powf(-self.alpha) * (1.0 + inv * inv).powf(-0.5 * self.alpha)
        }
    }

    /// Constants `(C₁, C₂)` with `C₁ t^{-α} ≤ a(t) ≤ C₂ t^{-α}` for `t ≥ 1`.
    pub fn envelope_bounds(&self) -> (f64, f64) {
        (self.amplitude * 2f64.powf(-0.5 * self.alpha), self.amplitude)
    }
}

/// Closed-form quantities at energy `E = κ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConstants {
    pub energy: f64,
    pub kappa: f64,
    /// `(L + 2iκ)⁻¹ F`
    pub g_kappa: FourierSeries,
    /// `L⁻¹ F`
    pub g_zero: FourierSeries,
    /// `C(E) = ⟨[g_κ, ḡ_κ]⟩`
    pub c_e: f64,
    pub gamma_e: f64,
    pub beta_e: f64,
    pub e_c: f64,
    pub d: f64,
    pub g_m_means: BTreeMap<i32, Complex64>,
    /// `⟨g_κ F⟩`
    pub mean_f_g_kappa: Complex64,
    /// `⟨g F⟩`
    pub mean_f_g_zero: f64,
    pub c1: Complex64,
    pub c2: Complex64,
    pub c3: f64,
    pub c4: f64,
    pub sigma_f: Vec<(f64, f64)>,
}

/// Orders `m` for which `⟨G_m⟩` is tabulated.
pub const G_M_ORDERS: std::ops::RangeInclusive<i32> = -4..=4;

impl SpectralConstants {
    fn compute(model: &PotentialModel, energy: f64) -> Result<Self, ModelError> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(ModelError::InvalidEnergy(energy));
        }
        let kappa = energy.sqrt();
        let f = model.series();
        let g_kappa = model.resolvent_apply(&f, Complex64::new(0.0, 2.0 * kappa))?;
        let g_zero = model.resolvent_apply(&f, Complex64::default())?;

        let c_e = model.carre_du_champ_mean(&g_kappa, &g_kappa).re;
        let sigma_f = model.spectral_measure();
        let gamma_e = lyapunov_from_spectral_measure(&sigma_f, energy);
        let beta_e = 8.0 * energy / c_e;
        let e_c = model.energy_for_lyapunov(0.5)?;
        let d = (c_e / (2.0 * energy)).sqrt();

        let fg_kappa = g_kappa.mean_product(&f);
        let fg_zero = g_zero.mean_product(&f).re;
        let k2 = kappa * kappa;
        let g_m_means = G_M_ORDERS
            .map(|m| (m, g_m_mean(fg_kappa, fg_zero, kappa, m)))
            .collect();

        let gg = model.carre_du_champ_mean(&g_zero, &g_zero).re;
        let c1 = (fg_kappa + 2.0 * fg_zero) / (2.0 * k2);
        let c4 = (2.0 * c_e + 4.0 * gg).sqrt() / (2.0 * kappa);
        let c2 = Complex64::new(0.0, c4);
        let c3 = -g_kappa.mean_product(&g_kappa.conj()).re / kappa;

        Ok(Self {
            energy,
            kappa,
            g_kappa,
            g_zero,
            c_e,
            gamma_e,
            beta_e,
            e_c,
            d,
            g_m_means,
            mean_f_g_kappa: fg_kappa,
            mean_f_g_zero: fg_zero,
            c1,
            c2,
            c3,
            c4,
            sigma_f,
        })
    }

    /// `⟨G_m⟩` for any order `m`.
    pub fn g_mean(&self, m: i32) -> Complex64 {
        g_m_mean(self.mean_f_g_kappa, self.mean_f_g_zero, self.kappa, m)
    }

    pub fn report(&self) -> ConstantsReport {
        ConstantsReport {
            energy: self.energy,
            c_e: self.c_e,
            gamma: self.gamma_e,
            beta: self.beta_e,
            e_c: self.e_c,
            d: self.d,
            g_m: self.g_m_means.iter().map(|(m, v)| (*m, v.re, v.im)).collect(),
            c1: [self.c1.re, self.c1.im],
            c2: [self.c2.re, self.c2.im],
            c3: self.c3,
            c4: self.c4,
        }
    }
}

/// `⟨G_m⟩ = m(m+1)/(4κ²)⟨g_κF⟩ + m(m−1)/(4κ²)⟨g_{−κ}F⟩ + m²/κ²⟨gF⟩`.
fn g_m_mean(fg_kappa: Complex64, fg_zero: f64, kappa: f64, m: i32) -> Complex64 {
    let mf = f64::from(m);
    let k2 = kappa * kappa;
    fg_kappa * (mf * (mf + 1.0) / (4.0 * k2))
        + fg_kappa.conj() * (mf * (mf - 1.0) / (4.0 * k2))
        + fg_zero * (mf * mf / k2)
}

/// JSON export of [`SpectralConstants`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "C_E")]
    pub c_e: f64,
    pub gamma: f64,
    pub beta: f64,
    #[serde(rename = "E_c")]
    pub e_c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "G_m")]
    pub g_m: Vec<(i32, f64, f64)>,
    #[serde(rename = "C1")]
    pub c1: [f64; 2],
    #[serde(rename = "C2")]
    pub c2: [f64; 2],
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}
