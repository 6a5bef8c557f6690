//! Limit objects: the clock process, the Gaussian covariance kernel, the
//! critical SDE family `Ψ_t(c)`, the phase SDE `η_t`, and the circular
//! β-ensemble.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::LimitsError;
use crate::model::{DecayProfile, PotentialModel, SpectralConstants};
use crate::pruefer::{phase_mod, DrivingSignal, NoisePath};
use crate::quadrature;
use crate::seed::{split_seed, stream_seed, Stream};

// ---------------------------------------------------------------- clock

/// Where and how long to run the phase for a clock sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    pub e0: f64,
    pub beta_offset: f64,
    pub horizon: f64,
    pub step: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSample {
    pub phi_beta: f64,
    /// `θ̃_T(√E₀)`, the stand-in for `θ̃_∞`.
    pub theta_tilde: f64,
    pub atoms: Vec<f64>,
}

impl ClockSample {
    pub fn from_phase(beta_offset: f64, theta_tilde: f64, half_width: f64) -> Self {
        let phi_beta = phase_mod(beta_offset + theta_tilde, PI).1;
        Self {
            phi_beta,
            theta_tilde,
            atoms: clock_atoms(phi_beta, half_width),
        }
    }
}

/// `{nπ − φ} ∩ [−W, W]`.
pub fn clock_atoms(phi: f64, half_width: f64) -> Vec<f64> {
    let lo = ((phi - half_width) / PI).ceil() as i64;
    let hi = ((phi + half_width) / PI).floor() as i64;
    (lo..=hi).map(|n| n as f64 * PI - phi).collect()
}

fn check_clock_regime(decay: &DecayProfile) -> Result<(), LimitsError> {
    if !decay.is_free() && decay.alpha() <= 0.5 {
        return Err(LimitsError::InvalidRegime(decay.alpha()));
    }
    Ok(())
}

/// One draw of the clock process, with `θ̃_∞` approximated by `θ̃_T`.
pub fn clock_limit_sample(
    seed: u64,
    model: &PotentialModel,
    decay: &DecayProfile,
    spec: &ClockSpec,
) -> Result<ClockSample, LimitsError> {
    check_clock_regime(decay)?;
    let path = NoisePath::simulate(seed, spec.horizon, spec.step, model.generator_scale())?;
    let end = DrivingSignal::new(&path, decay, model).final_state(spec.e0.sqrt())?;
    Ok(ClockSample::from_phase(spec.beta_offset, end.theta_tilde, spec.half_width))
}

/// `θ̃_T(√E₀)` at several horizons `T` along one path of length `max T`.
pub fn clock_phases(
    seed: u64,
    model: &PotentialModel,
    decay: &DecayProfile,
    e0: f64,
    horizons: &[f64],
    step: f64,
) -> Result<Vec<f64>, LimitsError> {
    check_clock_regime(decay)?;
    let longest = horizons.iter().copied().fold(0.0, f64::max);
    let path = NoisePath::simulate(seed, longest, step, model.generator_scale())?;
    let signal = DrivingSignal::new(&path, decay, model);
    let mut order: Vec<usize> = (0..horizons.len()).collect();
    order.sort_by(|&a, &b| horizons[a].total_cmp(&horizons[b]));
    let idx: Vec<usize> = order
        .iter()
        .map(|&k| (horizons[k] / path.step()).round() as usize)
        .collect();
    let values = signal.theta_tilde_at(e0.sqrt(), &idx)?;
    let mut out = vec![0.0; horizons.len()];
    for (&k, v) in order.iter().zip(values) {
        out[k] = v;
    }
    Ok(out)
}

// ------------------------------------------------------ Gaussian kernel

/// Absolute tolerance of the covariance quadrature.
pub const COVARIANCE_TOL: f64 = 1e-10;
const MAX_INTERVALS: usize = 20_000;

fn check_gaussian_regime(alpha: f64) -> Result<(), LimitsError> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(LimitsError::InvalidRegime(alpha));
    }
    Ok(())
}

fn integrate_kernel(f: impl Fn(f64) -> f64, t: f64) -> Result<f64, LimitsError> {
    quadrature::integrate(f, 0.0, t, COVARIANCE_TOL, MAX_INTERVALS)
        .map(|q| q.value)
        .map_err(|q| LimitsError::QuadratureFailure {
            tol: COVARIANCE_TOL,
            estimate: q.error,
        })
}

/// `l_t((c₁,c₂),(c′₁,c′₂)) = (C/8κ²) ∫₀ᵗ s^{−2α} Re (e^{2ic₁s}−e^{2ic₂s}) conj(e^{2ic′₁s}−e^{2ic′₂s}) ds`.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_covariance_general(
    constants: &SpectralConstants,
    alpha: f64,
    c1: f64,
    c2: f64,
    c1p: f64,
    c2p: f64,
    t: f64,
) -> Result<f64, LimitsError> {
    check_gaussian_regime(alpha)?;
    if !(t > 0.0) {
        return Err(LimitsError::InvalidArgument(format!("t must be positive, got {t}")));
    }
    // e^{2ias} − e^{2ibs} = 2i sin((a−b)s) e^{i(a+b)s}
    let (d, dp) = (c1 - c2, c1p - c2p);
    let sum = (c1 + c2) - (c1p + c2p);
    let integral = integrate_kernel(
        |s| 4.0 * (d * s).sin() * (dp * s).sin() * (sum * s).cos() * s.powf(-2.0 * alpha),
        t,
    )?;
    Ok(constants.c_e / (8.0 * constants.energy) * integral)
}

/// `C(n,n′) = (C/8E) ∫₀¹ s^{−2α} cos(2(n−n′)πs) · 2(1 − cos 2πs) ds`.
pub fn gaussian_covariance(
    constants: &SpectralConstants,
    alpha: f64,
    n: i64,
    n_prime: i64,
) -> Result<f64, LimitsError> {
    check_gaussian_regime(alpha)?;
    let k = (n - n_prime) as f64;
    let integral = integrate_kernel(
        |s| {
            let half = (PI * s).sin();
            (2.0 * k * PI * s).cos() * 4.0 * half * half * s.powf(-2.0 * alpha)
        },
        1.0,
    )?;
    Ok(constants.c_e / (8.0 * constants.energy) * integral)
}

// ------------------------------------------------------------ Ψ_t(c)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiConfig {
    pub t0: f64,
    pub steps: usize,
    pub max_refinements: u32,
}

impl Default for PsiConfig {
    fn default() -> Self {
        Self {
            t0: 1e-3,
            steps: 2000,
            max_refinements: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiPaths {
    pub cs: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[k][j] = Ψ_{t_k}(c_j)`
    pub values: Vec<Vec<f64>>,
    pub d: f64,
    pub t0: f64,
    /// Number of step doublings the monotonicity check required.
    pub refinements: u32,
}

impl PsiPaths {
    pub fn terminal(&self) -> &[f64] {
        self.values.last().expect("paths have at least one time")
    }

    /// `c` with `Ψ₁(c) = level`, by linear interpolation of the monotone
    /// map `c ↦ Ψ₁(c)`.
    pub fn invert_terminal(&self, level: f64) -> Result<f64, LimitsError> {
        invert_monotone(&self.cs, self.terminal(), level)
    }
}

fn invert_monotone(xs: &[f64], ys: &[f64], level: f64) -> Result<f64, LimitsError> {
    let (first, last) = (ys[0], ys[ys.len() - 1]);
    if !(level >= first && level <= last) {
        return Err(LimitsError::GridTooNarrow { level });
    }
    let j = ys.partition_point(|&y| y < level);
    if j == 0 {
        return Ok(xs[0]);
    }
    let (y0, y1) = (ys[j - 1], ys[j]);
    Ok(xs[j - 1] + (xs[j] - xs[j - 1]) * (level - y0) / (y1 - y0))
}

/// Brownian driver `(B¹, B²)` on a geometric time grid.
struct PsiDriver {
    times: Vec<f64>,
    db1: Vec<f64>,
    db2: Vec<f64>,
}

impl PsiDriver {
    fn new(seed: u64, t0: f64, steps: usize) -> Self {
        let ratio = (1.0 / t0).powf(1.0 / steps as f64);
        let mut times: Vec<f64> = (0..=steps).map(|k| t0 * ratio.powi(k as i32)).collect();
        times[0] = t0;
        times[steps] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Driver));
        let mut db1 = Vec::with_capacity(steps);
        let mut db2 = Vec::with_capacity(steps);
        for w in times.windows(2) {
            let sd = (w[1] - w[0]).sqrt();
            db1.push(sd * rng.sample::<f64, _>(StandardNormal));
            db2.push(sd * rng.sample::<f64, _>(StandardNormal));
        }
        Self { times, db1, db2 }
    }

    /// Halves every interval at its geometric midpoint with a Brownian
    /// bridge, keeping the coarse increments.
    fn refine(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.db1.len();
        let mut times = Vec::with_capacity(2 * n + 1);
        let mut db1 = Vec::with_capacity(2 * n);
        let mut db2 = Vec::with_capacity(2 * n);
        for k in 0..n {
            let (a, b) = (self.times[k], self.times[k + 1]);
            let mid = (a * b).sqrt();
            let w = (mid - a) / (b - a);
            let sd = (w * (1.0 - w) * (b - a)).sqrt();
            times.push(a);
            times.push(mid);
            for (src, dst) in [(&self.db1, &mut db1), (&self.db2, &mut db2)] {
                let left = w * src[k] + sd * rng.sample::<f64, _>(StandardNormal);
                dst.push(left);
                dst.push(src[k] - left);
            }
        }
        times.push(1.0);
        Self { times, db1, db2 }
    }
}

/// Euler–Maruyama for `dΨ = 2c dt + (D/√t)[(cos Ψ − 1) dB¹ − sin Ψ dB²]`
/// from `Ψ_{t0}(c) = 2c t0`. Returns `None` on a monotonicity breach.
fn run_psi(driver: &PsiDriver, cs: &[f64], d: f64, keep: bool) -> Option<Vec<Vec<f64>>> {
    let mut psi: Vec<f64> = cs.iter().map(|&c| 2.0 * c * driver.times[0]).collect();
    let mut out = Vec::new();
    if keep {
        out.push(psi.clone());
    }
    for k in 0..driver.db1.len() {
        let t = driver.times[k];
        let dt = driver.times[k + 1] - t;
        let scale = d / t.sqrt();
        let (b1, b2) = (driver.db1[k], driver.db2[k]);
        for (p, &c) in psi.iter_mut().zip(cs) {
            let (s, co) = p.sin_cos();
            *p += 2.0 * c * dt + scale * ((co - 1.0) * b1 - s * b2);
        }
        if psi.windows(2).any(|w| !(w[0] < w[1])) {
            return None;
        }
        if keep {
            out.push(psi.clone());
        }
    }
    if !keep {
        out.push(psi);
    }
    Some(out)
}

fn psi_paths(
    seed: u64,
    d: f64,
    cs: &[f64],
    config: &PsiConfig,
    keep: bool,
) -> Result<PsiPaths, LimitsError> {
    if !(config.t0 > 0.0 && config.t0 <= 0.1) {
        return Err(LimitsError::InvalidArgument(format!("t0 must lie in (0, 0.1], got {}", config.t0)));
    }
    if config.steps == 0 {
        return Err(LimitsError::InvalidArgument("steps must be positive".into()));
    }
    if cs.is_empty() || cs.windows(2).any(|w| !(w[0] < w[1])) || cs.iter().any(|c| !c.is_finite()) {
        return Err(LimitsError::InvalidArgument("cs must be finite and strictly increasing".into()));
    }
    let mut driver = PsiDriver::new(seed, config.t0, config.steps);
    for level in 0..=config.max_refinements {
        if let Some(values) = run_psi(&driver, cs, d, keep) {
            let times = if keep { driver.times.clone() } else { vec![1.0] };
            return Ok(PsiPaths {
                cs: cs.to_vec(),
                times,
                values,
                d,
                t0: config.t0,
                refinements: level,
            });
        }
        if level < config.max_refinements {
            driver = driver.refine(split_seed(seed, 0xB1D6_0000 + u64::from(level)));
        }
    }
    Err(LimitsError::MonotonicityBreach {
        steps: driver.db1.len(),
        t0: config.t0,
    })
}

/// The coupled family `Ψ_t(c_j)` driven by one complex Brownian motion,
/// with `D` from the constants.
pub fn simulate_psi_sde(
    seed: u64,
    constants: &SpectralConstants,
    cs: &[f64],
    config: &PsiConfig,
) -> Result<PsiPaths, LimitsError> {
    psi_paths(seed, constants.d, cs, config, true)
}

/// As [`simulate_psi_sde`] with an explicit `D`, keeping only `Ψ₁`.
pub fn psi_terminal(seed: u64, d: f64, cs: &[f64], config: &PsiConfig) -> Result<PsiPaths, LimitsError> {
    psi_paths(seed, d, cs, config, false)
}

/// Terminal values `Ψ₁(c)` started at `t0, t0/2, …, t0/2^levels`, each on
/// its own driver derived from `seed`; level 0 reproduces [`psi_terminal`].
pub fn psi_t0_study(
    seed: u64,
    d: f64,
    cs: &[f64],
    config: &PsiConfig,
    levels: u32,
) -> Result<Vec<(f64, Vec<f64>)>, LimitsError> {
    (0..=levels)
        .map(|k| {
            let cfg = PsiConfig {
                t0: config.t0 / f64::from(1u32 << k),
                ..*config
            };
            let s = if k == 0 { seed } else { split_seed(seed, 0x7400_0000 + u64::from(k)) };
            psi_terminal(s, d, cs, &cfg).map(|p| (cfg.t0, p.terminal().to_vec()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePointSample {
    /// Uniform offset `θ` on `[0, 2π)`.
    pub theta: f64,
    pub atoms: Vec<f64>,
}

/// Atoms `Ψ₁⁻¹(2nπ + θ)` inside `[−W, W]`, inverting `Ψ₁` on a `c`-grid of
/// spacing at most `dc`.
pub fn sde_limit_point_process(
    seed: u64,
    d: f64,
    half_width: f64,
    dc: f64,
    config: &PsiConfig,
) -> Result<SdePointSample, LimitsError> {
    if !(half_width > 0.0 && dc > 0.0) {
        return Err(LimitsError::InvalidArgument("half width and dc must be positive".into()));
    }
    let cells = (2.0 * half_width / dc).ceil() as usize;
    let cs: Vec<f64> = (0..=cells)
        .map(|j| -half_width + 2.0 * half_width * j as f64 / cells as f64)
        .collect();
    let paths = psi_terminal(seed, d, &cs, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Offset));
    let theta = rng.random::<f64>() * TAU;
    let psi = paths.terminal();
    let lo = ((psi[0] - theta) / TAU).ceil() as i64;
    let hi = ((psi[psi.len() - 1] - theta) / TAU).floor() as i64;
    let atoms = (lo..=hi)
        .map(|n| paths.invert_terminal(n as f64 * TAU + theta))
        .collect::<Result<_, _>>()?;
    Ok(SdePointSample { theta, atoms })
}

// --------------------------------------------------------------- η_t

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaPath {
    pub times: Vec<f64>,
    /// Unwrapped `arg η_t`, starting at 0.
    pub arg: Vec<f64>,
}

impl EtaPath {
    pub fn eta(&self) -> Vec<Complex64> {
        self.arg.iter().map(|&a| Complex64::cis(a)).collect()
    }
}

/// `η_t` from the exact time-changed form: in `u = log t`, `arg η` has
/// drift `C₃` and diffusion `C₄`, so increments are Gaussian.
pub fn simulate_eta_sde(
    seed: u64,
    constants: &SpectralConstants,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<EtaPath, LimitsError> {
    eta_path(seed, constants.c3, constants.c4, t0, t1, steps)
}

pub fn eta_path(seed: u64, c3: f64, c4: f64, t0: f64, t1: f64, steps: usize) -> Result<EtaPath, LimitsError> {
    if !(t0 > 0.0 && t1 > t0 && steps > 0) {
        return Err(LimitsError::InvalidArgument(format!(
            "need 0 < t0 < t1 and steps > 0, got t0={t0}, t1={t1}, steps={steps}"
        )));
    }
    let du = (t1 / t0).ln() / steps as f64;
    let sd = c4 * du.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Noise));
    let (u0, mut arg) = (t0.ln(), 0.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut args = Vec::with_capacity(steps + 1);
    times.push(t0);
    args.push(0.0);
    for k in 1..=steps {
        arg += c3 * du + sd * rng.sample::<f64, _>(StandardNormal);
        times.push(if k == steps { t1 } else { (u0 + k as f64 * du).exp() });
        args.push(arg);
    }
    Ok(EtaPath { times, arg: args })
}

// ------------------------------------------------ circular β-ensemble

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbeSample {
    pub n: usize,
    pub beta: f64,
    /// Sorted angles in `[−π, π)`.
    pub angles: Vec<f64>,
    pub acceptance_rate: f64,
    pub sweeps: usize,
    pub proposal_width: f64,
}

/// Chain schedule for [`sample_circular_beta_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbeSchedule {
    pub burn_in_sweeps: usize,
    /// Sweeps (of `n` single-site moves each) between kept samples.
    pub thin_sweeps: usize,
    pub proposal_width: f64,
}

const TARGET_ACCEPTANCE: f64 = 0.4;
const TUNE_BATCH: usize = 10;

struct CbeChain {
    beta: f64,
    angles: Vec<f64>,
    width: f64,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

impl CbeChain {
    fn new(seed: u64, n: usize, beta: f64, width: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Chain));
        let angles = (0..n).map(|_| rng.random::<f64>() * TAU - PI).collect();
        Self {
            beta,
            angles,
            width,
            rng,
            accepted: 0,
            proposed: 0,
        }
    }

    fn sweep(&mut self) {
        let n = self.angles.len();
        for j in 0..n {
            let old = self.angles[j];
            let step: f64 = self.rng.sample(StandardNormal);
            let proposal = wrap(old + self.width * step);
            // β Σ_k log |e^{iθ'} − e^{iθ_k}| / |e^{iθ_j} − e^{iθ_k}|
            let mut ratio = 1.0;
            for (k, &other) in self.angles.iter().enumerate() {
                if k != j {
                    ratio *= (0.5 * (proposal - other)).sin() / (0.5 * (old - other)).sin();
                }
            }
            let log_accept = self.beta * ratio.abs().ln();
            self.proposed += 1;
            if log_accept >= 0.0 || self.rng.random::<f64>().ln() < log_accept {
                self.angles[j] = proposal;
                self.accepted += 1;
            }
        }
    }

    /// Burn-in with proposal-width adaptation toward 40% acceptance.
    fn burn_in(&mut self, sweeps: usize) {
        let mut done = 0;
        while done < sweeps {
            let batch = TUNE_BATCH.min(sweeps - done);
            let (a0, p0) = (self.accepted, self.proposed);
            for _ in 0..batch {
                self.sweep();
            }
            done += batch;
            let rate = (self.accepted - a0) as f64 / (self.proposed - p0).max(1) as f64;
            self.width = (self.width * (rate - TARGET_ACCEPTANCE).exp()).clamp(1e-6, PI);
        }
        self.accepted = 0;
        self.proposed = 0;
    }

    fn snapshot(&self, sweeps: usize) -> CbeSample {
        let mut angles = self.angles.clone();
        angles.sort_by(f64::total_cmp);
        CbeSample {
            n: angles.len(),
            beta: self.beta,
            angles,
            acceptance_rate: self.accepted as f64 / self.proposed.max(1) as f64,
            sweeps,
            proposal_width: self.width,
        }
    }
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

fn check_cbe(n: usize, beta: f64, width: f64) -> Result<(), LimitsError> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(LimitsError::DegenerateProposal(width));
    }
    if n < 2 || !(beta > 0.0 && beta.is_finite()) {
        return Err(LimitsError::InvalidArgument(format!(
            "need n >= 2 and beta > 0, got n={n}, beta={beta}"
        )));
    }
    Ok(())
}

/// Metropolis chain on `∝ |Δ(e^{iθ₁},…,e^{iθₙ})|^β`; the first half of the
/// sweeps is burn-in. Returns the final state.
pub fn sample_circular_beta(
    seed: u64,
    n: usize,
    beta: f64,
    sweeps: usize,
    proposal_width: f64,
) -> Result<CbeSample, LimitsError> {
    check_cbe(n, beta, proposal_width)?;
    let mut chain = CbeChain::new(seed, n, beta, proposal_width);
    let burn = sweeps / 2;
    chain.burn_in(burn);
    for _ in burn..sweeps {
        chain.sweep();
    }
    Ok(chain.snapshot(sweeps))
}

/// `count` thinned states from one chain.
pub fn sample_circular_beta_chain(
    seed: u64,
    n: usize,
    beta: f64,
    schedule: &CbeSchedule,
    count: usize,
) -> Result<Vec<CbeSample>, LimitsError> {
    check_cbe(n, beta, schedule.proposal_width)?;
    if schedule.thin_sweeps == 0 {
        return Err(LimitsError::InvalidArgument("thin_sweeps must be positive".into()));
    }
    let mut chain = CbeChain::new(seed, n, beta, schedule.proposal_width);
    chain.burn_in(schedule.burn_in_sweeps);
    let mut sweeps = schedule.burn_in_sweeps;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..schedule.thin_sweeps {
            chain.sweep();
        }
        sweeps += schedule.thin_sweeps;
        out.push(chain.snapshot(sweeps));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbeScaled {
    /// `nθ_j`
    pub scaled: Vec<f64>,
    /// `nθ_j / 2`
    pub halved: Vec<f64>,
    /// Consecutive gaps of `halved`, including the one across `±π`.
    pub gaps: Vec<f64>,
}

pub fn cbe_scaled_gaps(sample: &CbeSample) -> CbeScaled {
    let n = sample.angles.len() as f64;
    let scaled: Vec<f64> = sample.angles.iter().map(|a| n * a).collect();
    let halved: Vec<f64> = scaled.iter().map(|x| 0.5 * x).collect();
    let mut gaps: Vec<f64> = halved.windows(2).map(|w| w[1] - w[0]).collect();
    if let (Some(first), Some(last)) = (halved.first(), halved.last()) {
        gaps.push(first + 0.5 * n * TAU - last);
    }
    CbeScaled { scaled, halved, gaps }
}

/// Circular gaps `θ_{j+1} − θ_j` of the raw angles, including the one across `±π`.
pub fn cbe_circular_gaps(sample: &CbeSample) -> Vec<f64> {
    let a = &sample.angles;
    let mut gaps: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    if let (Some(first), Some(last)) = (a.first(), a.last()) {
        gaps.push(first + TAU - last);
    }
    gaps
}

/// CDF of the circular gap of the two-point ensemble, whose density on
/// `[0, 2π]` is `∝ (2 sin(φ/2))^β`, by quadrature.
pub fn cbe_two_point_gap_cdf(beta: f64, phi: f64) -> Result<f64, LimitsError> {
    let density = |s: f64| (2.0 * (0.5 * s).sin()).abs().powf(beta);
    let mass = |b: f64| {
        quadrature::integrate(density, 0.0, b, 1e-12, MAX_INTERVALS)
            .map(|q| q.value)
            .map_err(|q| LimitsError::QuadratureFailure {
                tol: 1e-12,
                estimate: q.error,
            })
    };
    let x = phi.clamp(0.0, TAU);
    Ok(mass(x)? / mass(TAU)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constants(e: f64) -> SpectralConstants {
        PotentialModel::cosine().spectral_constants(e).unwrap()
    }

    #[test]
    fn free_clock_sample() {
        let spec = ClockSpec {
            e0: 1.0,
            beta_offset: 0.7,
            horizon: 50.0,
            step: 0.01,
            half_width: 5.0,
        };
        let s = clock_limit_sample(3, &PotentialModel::cosine(), &DecayProfile::free(), &spec).unwrap();
        assert_eq!(s.phi_beta, 0.7);
        assert_eq!(s.atoms.len(), 3);
        for (x, want) in s.atoms.iter().zip([-PI - 0.7, -0.7, PI - 0.7]) {
            assert_abs_diff_eq!(*x, want, epsilon = 1e-12);
        }
        assert!(s.atoms.windows(2).all(|w| (w[1] - w[0] - PI).abs() < 1e-12));
    }

    #[test]
    fn clock_regime_is_checked() {
        let spec = ClockSpec {
            e0: 1.0,
            beta_offset: 0.0,
            horizon: 10.0,
            step: 0.01,
            half_width: 5.0,
        };
        let decay = DecayProfile::unit(0.5).unwrap();
        assert!(matches!(
            clock_limit_sample(1, &PotentialModel::cosine(), &decay, &spec),
            Err(LimitsError::InvalidRegime(_))
        ));
    }

    #[test]
    fn clock_phases_match_direct_integration() {
        let model = PotentialModel::cosine();
        let decay = DecayProfile::unit(0.9).unwrap();
        let got = clock_phases(4, &model, &decay, 1.0, &[100.0, 20.0], 0.01).unwrap();
        let path = NoisePath::simulate(4, 20.0, 0.01, 1.0).unwrap();
        let direct = DrivingSignal::new(&path, &decay, &model).final_state(1.0).unwrap();
        assert_eq!(got[1], direct.theta_tilde);
    }

    #[test]
    fn covariance_trivial_cases() {
        let k = constants(1.0);
        let v = gaussian_covariance_general(&k, 0.75, 1.3, 1.3, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(v, 0.0);
        let a = gaussian_covariance_general(&k, 0.75, 1.0, 0.2, 2.5, -0.4, 0.8).unwrap();
        let b = gaussian_covariance_general(&k, 0.75, 2.5, -0.4, 1.0, 0.2, 0.8).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        assert!(matches!(
            gaussian_covariance(&k, 0.5, 0, 0),
            Err(LimitsError::InvalidRegime(_))
        ));
    }

    #[test]
    fn covariance_matches_midpoint_oracle() {
        let k = constants(1.0);
        let v = gaussian_covariance_general(&k, 0.75, PI, 0.0, PI, 0.0, 1.0).unwrap();
        let panels = 1_000_000;
        let h = 1.0 / panels as f64;
        let mut sum = 0.0;
        for i in 0..panels {
            let s = (i as f64 + 0.5) * h;
            let e = Complex64::cis(2.0 * PI * s) - 1.0;
            sum += s.powf(-1.5) * e.norm_sqr();
        }
        let oracle = k.c_e / 8.0 * sum * h;
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn covariance_routes_agree() {
        let k = constants(1.0);
        for (n, np) in [(0, 0), (0, 1), (3, 1), (-2, 2)] {
            let special = gaussian_covariance(&k, 0.75, n, np).unwrap();
            let g0 = 0.37;
            let general = gaussian_covariance_general(
                &k,
                0.75,
                (n + 1) as f64 * PI + g0,
                n as f64 * PI + g0,
                (np + 1) as f64 * PI + g0,
                np as f64 * PI + g0,
                1.0,
            )
            .unwrap();
            assert_abs_diff_eq!(special, general, epsilon = 1e-9);
            let swapped = gaussian_covariance(&k, 0.75, np, n).unwrap();
            let shifted = gaussian_covariance(&k, 0.75, n + 5, np + 5).unwrap();
            assert_abs_diff_eq!(special, swapped, epsilon = 1e-12);
            assert_abs_diff_eq!(special, shifted, epsilon = 1e-12);
        }
        assert!(gaussian_covariance(&k, 0.75, 0, 0).unwrap() > 0.0);
    }

    #[test]
    fn psi_zero_is_fixed_and_paths_are_monotone() {
        let k = constants(0.15);
        let cs = [-1.0, 0.0, 0.5, 1.0, 2.0];
        let p = simulate_psi_sde(7, &k, &cs, &PsiConfig::default()).unwrap();
        assert_eq!(p.times.len(), p.values.len());
        assert_eq!(*p.times.last().unwrap(), 1.0);
        for row in &p.values {
            assert_eq!(row[1], 0.0);
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn psi_without_noise_is_linear() {
        let p = psi_terminal(1, 0.0, &[0.5, 1.0], &PsiConfig::default()).unwrap();
        assert_abs_diff_eq!(p.terminal()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.terminal()[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn psi_refinement_keeps_coarse_increments() {
        let d = PsiDriver::new(3, 1e-3, 50);
        let r = d.refine(9);
        assert_eq!(r.times.len(), 101);
        for k in 0..50 {
            assert_abs_diff_eq!(r.db1[2 * k] + r.db1[2 * k + 1], d.db1[k], epsilon = 1e-14);
            assert_abs_diff_eq!(r.times[2 * k], d.times[k], epsilon = 0.0);
        }
    }

    #[test]
    fn psi_rejects_bad_input() {
        let k = constants(0.15);
        let bad = PsiConfig {
            t0: 0.5,
            ..PsiConfig::default()
        };
        assert!(simulate_psi_sde(1, &k, &[0.0], &bad).is_err());
        assert!(simulate_psi_sde(1, &k, &[1.0, 0.0], &PsiConfig::default()).is_err());
    }

    #[test]
    fn noiseless_sde_points_are_pi_spaced() {
        let s = sde_limit_point_process(5, 0.0, 8.0, 0.05, &PsiConfig::default()).unwrap();
        assert!(!s.atoms.is_empty());
        for (x, w) in s.atoms.iter().zip(s.atoms.iter().skip(1)) {
            assert_abs_diff_eq!(w - x, PI, epsilon = 1e-9);
        }
        let count = s.atoms.len() as i64;
        let expect = (((16.0 - s.theta) / TAU).floor() - ((-16.0 - s.theta) / TAU).ceil()) as i64 + 1;
        assert_eq!(count, expect);
    }

    #[test]
    fn invert_reports_narrow_grid() {
        let p = psi_terminal(1, 0.0, &[0.0, 1.0], &PsiConfig::default()).unwrap();
        assert!(matches!(p.invert_terminal(5.0), Err(LimitsError::GridTooNarrow { .. })));
        assert_abs_diff_eq!(p.invert_terminal(1.0).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eta_is_unimodular_and_deterministic_without_noise() {
        let k = constants(1.0);
        let p = simulate_eta_sde(2, &k, 1.0, 4.0, 100).unwrap();
        assert!(p.eta().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let q = eta_path(2, 0.3, 0.0, 1.0, 4.0, 50).unwrap();
        for (t, a) in q.times.iter().zip(&q.arg) {
            assert_abs_diff_eq!(*a, 0.3 * t.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn cbe_basics() {
        let s = sample_circular_beta(1, 5, 2.0, 200, 0.5).unwrap();
        assert_eq!(s.angles.len(), 5);
        assert!(s.angles.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.angles.iter().all(|a| (-PI..PI).contains(a)));
        assert!(s.acceptance_rate > 0.0 && s.acceptance_rate < 1.0);
        assert!(matches!(
            sample_circular_beta(1, 5, 2.0, 10, 0.0),
            Err(LimitsError::DegenerateProposal(_))
        ));
    }

    #[test]
    fn cbe_scaling_example() {
        let s = CbeSample {
            n: 2,
            beta: 2.0,
            angles: vec![0.0, PI],
            acceptance_rate: 0.5,
            sweeps: 0,
            proposal_width: 1.0,
        };
        let g = cbe_scaled_gaps(&s);
        assert_eq!(g.scaled, vec![0.0, TAU]);
        assert_eq!(g.halved, vec![0.0, PI]);
        assert_eq!(g.gaps.len(), 2);
        assert_abs_diff_eq!(g.gaps[0] + g.gaps[1], TAU, epsilon = 1e-12);
    }

    #[test]
    fn two_point_gap_cdf() {
        assert_abs_diff_eq!(cbe_two_point_gap_cdf(2.0, PI).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cbe_two_point_gap_cdf(2.0, TAU).unwrap(), 1.0, epsilon = 1e-14);
        // β = 2: ∫₀^φ 4 sin²(s/2) ds = 2(φ − sin φ), total 4π.
        let phi = 1.3;
        let exact = 2.0 * (phi - f64::sin(phi)) / (4.0 * PI);
        assert_abs_diff_eq!(cbe_two_point_gap_cdf(2.0, phi).unwrap(), exact, epsilon = 1e-12);
        let s = CbeSample {
            n: 3,
            beta: 1.0,
            angles: vec![-1.0, 0.5, 2.0],
            acceptance_rate: 0.0,
            sweeps: 0,
            proposal_width: 1.0,
        };
        let g = cbe_circular_gaps(&s);
        assert_abs_diff_eq!(g.iter().sum::<f64>(), TAU, epsilon = 1e-12);
    }

    #[test]
    fn t0_study_level_zero_matches_direct_run() {
        let cfg = PsiConfig { steps: 200, ..PsiConfig::default() };
        let study = psi_t0_study(5, 0.8, &[0.5, 1.0], &cfg, 2).unwrap();
        assert_eq!(study.len(), 3);
        assert_eq!(study[0].1, psi_terminal(5, 0.8, &[0.5, 1.0], &cfg).unwrap().terminal());
        assert_eq!(study[2].0, cfg.t0 / 4.0);
    }
}
