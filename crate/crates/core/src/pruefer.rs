//! Prüfer phase integration along a frozen noise realization.
//!
//! For `−x'' + q(t) x = κ² x` with `(x, x'/κ) = r (sin θ, cos θ)` and
//! `θ_0 = 0`:
//!
//! ```text
//! θ'       = κ − (q/κ) sin²θ
//! (log r)' = q sin(2θ) / (2κ)
//! ```
//!
//! with `q(t) = a(t) F(X_t)`. We integrate the centred phase
//! `θ̃ = θ − κt` directly so that phase differences between nearby `κ`
//! keep full precision at long horizons.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::PrueferError;
use crate::model::{wrap_angle, DecayProfile, PotentialModel};
use crate::seed::split_seed;

/// One seeded realization of the driving Brownian increments.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    step: f64,
    horizon: f64,
    sigma2: f64,
    x0: f64,
    increments: Vec<f64>,
    refinements: u32,
}

impl NoisePath {
    /// Simulates `ceil(L/h)` i.i.d. `N(0, σ²h')` increments, `h' = L/ceil(L/h)`,
    /// with `X₀` uniform on `[0, 2π)` drawn first from the same stream.
    pub fn simulate(seed: u64, horizon: f64, step: f64, sigma2: f64) -> Result<Self, PrueferError> {
        if !(horizon > 0.0 && step > 0.0 && step <= horizon && horizon.is_finite()) {
            return Err(PrueferError::InvalidGrid { horizon, step });
        }
        if !(sigma2 > 0.0) {
            return Err(PrueferError::InvalidGrid { horizon, step: sigma2 });
        }
        let n = (horizon / step).ceil() as usize;
        let step = horizon / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = rng.random::<f64>() * 2.0 * PI;
        let scale = (sigma2 * step).sqrt();
        let increments = (0..n)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            seed,
            step,
            horizon,
            sigma2,
            x0,
            increments,
            refinements: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn initial_point(&self) -> f64 {
        self.x0
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Grid time `t_i`; the last node is exactly the horizon.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.increments.len() {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }

    /// Halves the step by Brownian-bridge midpoints, keeping every existing
    /// grid value of `X` unchanged.
    pub fn refine(&self) -> Self {
        let level = self.refinements + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(self.seed, 0x5EED_0000 + u64::from(level)));
        let half = 0.5 * self.step;
        let bridge_sd = (self.sigma2 * half * 0.5).sqrt();
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for &d in &self.increments {
            let first = 0.5 * d + bridge_sd * rng.sample::<f64, _>(StandardNormal);
            increments.push(first);
            increments.push(d - first);
        }
        Self {
            seed: self.seed,
            step: half,
            horizon: self.horizon,
            sigma2: self.sigma2,
            x0: self.x0,
            increments,
            refinements: level,
        }
    }

    /// `X_{t_i}` on the grid, wrapped to `[0, 2π)`.
    pub fn positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut x = self.x0;
        out.push(x);
        for d in &self.increments {
            x = wrap_angle(x + d);
            out.push(x);
        }
        out
    }
}

/// The coefficient `q(t_i) = a(t_i) F(X_{t_i})` sampled on the noise grid.
///
/// Building this once and sharing it across `κ` is what makes batched
/// integration cheap.
#[derive(Debug, Clone)]
pub struct DrivingSignal {
    step: f64,
    horizon: f64,
    values: Vec<f64>,
    sup: f64,
}

impl DrivingSignal {
    pub fn new(path: &NoisePath, decay: &DecayProfile, model: &PotentialModel) -> Self {
        let values: Vec<f64> = if decay.is_free() {
            vec![0.0; path.len() + 1]
        } else {
            path.positions()
                .iter()
                .enumerate()
                .map(|(i, &x)| decay.eval(path.time(i)) * model.eval(x))
                .collect()
        };
        let sup = decay.amplitude() * model.sup_bound();
        Self {
            step: path.step(),
            horizon: path.horizon(),
            values,
            sup,
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    fn time(&self, i: usize) -> f64 {
        if i == self.steps() {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }

    fn check(&self, kappa: f64) -> Result<(), PrueferError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(PrueferError::InvalidKappa(kappa));
        }
        let bound = self.step * (kappa + self.sup / kappa);
        if bound > 0.5 {
            return Err(PrueferError::StepTooCoarse {
                step: self.step,
                kappa,
                bound,
            });
        }
        Ok(())
    }

    /// Integrates to the horizon and returns only the end state.
    pub fn final_state(&self, kappa: f64) -> Result<PhaseEnd, PrueferError> {
        self.check(kappa)?;
        let mut st = Lanes::new([kappa], self.step);
        for i in 0..self.steps() {
            st.advance(self, i);
        }
        Ok(st.end(0, self.horizon))
    }

    /// End states for several `κ`, integrated in lockstep. Each lane does
    /// exactly the arithmetic of [`DrivingSignal::final_state`], so results
    /// are bit-identical to per-`κ` calls; interleaving independent lanes
    /// hides the latency of the serial phase recursion.
    pub fn final_states(&self, kappas: &[f64]) -> Result<Vec<PhaseEnd>, PrueferError> {
        for &k in kappas {
            self.check(k)?;
        }
        let mut out = Vec::with_capacity(kappas.len());
        for chunk in kappas.chunks(LANES) {
            if chunk.len() == 1 {
                out.push(self.final_state(chunk[0])?);
                continue;
            }
            let mut padded = [chunk[0]; LANES];
            padded[..chunk.len()].copy_from_slice(chunk);
            let mut lanes = Lanes::new(padded, self.step);
            for i in 0..self.steps() {
                lanes.advance(self, i);
            }
            out.extend((0..chunk.len()).map(|l| lanes.end(l, self.horizon)));
        }
        Ok(out)
    }

    /// `θ̃` at each of the requested grid indices (ascending).
    pub fn theta_tilde_at(&self, kappa: f64, indices: &[usize]) -> Result<Vec<f64>, PrueferError> {
        self.check(kappa)?;
        let mut st = Lanes::new([kappa], self.step);
        let mut out = Vec::with_capacity(indices.len());
        let mut i = 0;
        for &target in indices {
            let target = target.min(self.steps());
            while i < target {
                st.advance(self, i);
                i += 1;
            }
            out.push(st.theta_tilde[0]);
        }
        Ok(out)
    }

    pub fn trajectory(&self, kappa: f64, stride: usize) -> Result<PhaseTrajectory, PrueferError> {
        self.check(kappa)?;
        if stride == 0 {
            return Err(PrueferError::InvalidStride);
        }
        let n = self.steps();
        let cap = n / stride + 2;
        let mut traj = PhaseTrajectory {
            kappa,
            times: Vec::with_capacity(cap),
            theta: Vec::with_capacity(cap),
            theta_tilde: Vec::with_capacity(cap),
            log_r: Vec::with_capacity(cap),
        };
        let mut st = Lanes::new([kappa], self.step);
        traj.push(0.0, 0.0, 0.0);
        for i in 0..n {
            st.advance(self, i);
            if (i + 1) % stride == 0 || i + 1 == n {
                traj.push(self.time(i + 1), st.theta_tilde[0], st.log_r[0]);
            }
        }
        Ok(traj)
    }
}

/// Lanes per lockstep chunk in [`DrivingSignal::final_states`].
const LANES: usize = 8;

/// Resynchronise the phasors with exact `sin_cos` this often.
const RESYNC: usize = 64;

/// Heun integrator state for `N` values of `κ` sharing one driving signal.
///
/// The phases `e^{2iκt}` and `e^{2iθ̃}` are carried as unit phasors
/// updated by small rotations, so a step costs a few multiplications
/// instead of two `sin_cos` calls. Lanes are independent; running several
/// at once hides the latency of the serial phase recursion.
struct Lanes<const N: usize> {
    kappa: [f64; N],
    inv2k: [f64; N],
    theta_tilde: [f64; N],
    log_r: [f64; N],
    // e^{2iκ t_i}
    clock: [(f64, f64); N],
    // e^{2iθ̃}
    phase: [(f64, f64); N],
    // e^{2iκh}
    tick: [(f64, f64); N],
}

impl<const N: usize> Lanes<N> {
    fn new(kappa: [f64; N], step: f64) -> Self {
        Self {
            kappa,
            inv2k: kappa.map(|k| 0.5 / k),
            theta_tilde: [0.0; N],
            log_r: [0.0; N],
            clock: [(1.0, 0.0); N],
            phase: [(1.0, 0.0); N],
            tick: kappa.map(|k| cis(2.0 * k * step)),
        }
    }

    fn end(&self, lane: usize, horizon: f64) -> PhaseEnd {
        PhaseEnd {
            kappa: self.kappa[lane],
            theta: self.kappa[lane] * horizon + self.theta_tilde[lane],
            theta_tilde: self.theta_tilde[lane],
            log_r: self.log_r[lane],
        }
    }

    /// Heun step from node `i` to `i + 1`.
    #[inline(always)]
    fn advance(&mut self, sig: &DrivingSignal, i: usize) {
        let t1 = sig.time(i + 1);
        let h = t1 - sig.time(i);
        let resync = (i + 1).is_multiple_of(RESYNC);
        let q0 = sig.values[i];
        let q1 = sig.values[i + 1];
        let active = q0 != 0.0 || q1 != 0.0;
        for l in 0..N {
            let next_clock = if resync {
                cis(2.0 * self.kappa[l] * t1)
            } else {
                cmul(self.clock[l], self.tick[l])
            };
            if active {
                // θ̃' = (q/2κ)(cos 2θ − 1),  (log r)' = (q/2κ) sin 2θ
                let e0 = cmul(self.clock[l], self.phase[l]);
                let k1 = q0 * self.inv2k[l] * (e0.0 - 1.0);
                let l1 = q0 * self.inv2k[l] * e0.1;
                let e1 = cmul(cmul(next_clock, self.phase[l]), small_cis(2.0 * h * k1));
                let k2 = q1 * self.inv2k[l] * (e1.0 - 1.0);
                let l2 = q1 * self.inv2k[l] * e1.1;
                let delta = 0.5 * h * (k1 + k2);
                self.theta_tilde[l] += delta;
                self.log_r[l] += 0.5 * h * (l1 + l2);
                self.phase[l] = if resync {
                    cis(2.0 * self.theta_tilde[l])
                } else {
                    cmul(self.phase[l], small_cis(2.0 * delta))
                };
            }
            self.clock[l] = next_clock;
        }
    }
}

#[inline]
fn cis(x: f64) -> (f64, f64) {
    let (s, c) = x.sin_cos();
    (c, s)
}

#[inline]
fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// `e^{ix}`, by a short Taylor series when `|x|` is small. The phasors are
/// resynchronised every [`RESYNC`] steps, so the truncation error (below
/// `3e-11` at the cutoff) never accumulates.
#[inline]
fn small_cis(x: f64) -> (f64, f64) {
    if x.abs() > 0.05 {
        return cis(x);
    }
    let x2 = x * x;
    let c = 1.0 - x2 * (0.5 - x2 * (1.0 / 24.0));
    let s = x * (1.0 - x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0)));
    (c, s)
}

/// End state of one phase integration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseEnd {
    pub kappa: f64,
    pub theta: f64,
    pub theta_tilde: f64,
    pub log_r: f64,
}

/// Sampled Prüfer phase, centred phase and log-amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub kappa: f64,
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub log_r: Vec<f64>,
}

impl PhaseTrajectory {
    fn push(&mut self, t: f64, theta_tilde: f64, log_r: f64) {
        self.times.push(t);
        self.theta.push(self.kappa * t + theta_tilde);
        self.theta_tilde.push(theta_tilde);
        self.log_r.push(log_r);
    }

    pub fn final_theta(&self) -> f64 {
        *self.theta.last().expect("trajectory has at least one sample")
    }

    pub fn final_theta_tilde(&self) -> f64 {
        *self.theta_tilde.last().expect("trajectory has at least one sample")
    }

    pub fn final_log_r(&self) -> f64 {
        *self.log_r.last().expect("trajectory has at least one sample")
    }

    /// Writes `t,theta,theta_tilde,log_r` with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,theta,theta_tilde,log_r")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.times[i], self.theta[i], self.theta_tilde[i], self.log_r[i]
            )?;
        }
        Ok(())
    }
}

/// Default step `min(10⁻³, 0.05/κ)`.
pub fn default_step(kappa: f64) -> f64 {
    (1e-3_f64).min(0.05 / kappa)
}

pub fn integrate_theta(
    path: &NoisePath,
    kappa: f64,
    decay: &DecayProfile,
    model: &PotentialModel,
    stride: usize,
) -> Result<PhaseTrajectory, PrueferError> {
    DrivingSignal::new(path, decay, model).trajectory(kappa, stride)
}

/// Integrates several `κ` against one shared driving signal.
pub fn integrate_theta_batch(
    path: &NoisePath,
    kappas: &[f64],
    decay: &DecayProfile,
    model: &PotentialModel,
    stride: usize,
) -> Result<Vec<PhaseTrajectory>, PrueferError> {
    if kappas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PrueferError::UnsortedKappas);
    }
    let signal = DrivingSignal::new(path, decay, model);
    kappas.iter().map(|&k| signal.trajectory(k, stride)).collect()
}

/// `Ψ_L(x) = θ_L(√E₀ + x/L) − θ_L(√E₀)` on a driving signal whose horizon
/// is `L`. `Φ_L = 2Ψ_L`.
pub fn relative_phase_on(signal: &DrivingSignal, e0: f64, xs: &[f64]) -> Result<Vec<f64>, PrueferError> {
    let length = signal.horizon();
    let kappa0 = e0.sqrt();
    if let Some(min_x) = xs.iter().copied().reduce(f64::min) {
        let kmin = kappa0 + min_x / length;
        if !(kmin > 0.0) {
            return Err(PrueferError::WindowUnderflow(kmin));
        }
    }
    let mut kappas = Vec::with_capacity(xs.len() + 1);
    kappas.push(kappa0);
    kappas.extend(xs.iter().map(|&x| kappa0 + x / length));
    let ends = signal.final_states(&kappas)?;
    let base = ends[0].theta_tilde;
    Ok(xs
        .iter()
        .zip(&ends[1..])
        .map(|(&x, end)| if x == 0.0 { 0.0 } else { x + (end.theta_tilde - base) })
        .collect())
}

pub fn relative_phase(
    path: &NoisePath,
    e0: f64,
    xs: &[f64],
    decay: &DecayProfile,
    model: &PotentialModel,
) -> Result<Vec<f64>, PrueferError> {
    relative_phase_on(&DrivingSignal::new(path, decay, model), e0, xs)
}

/// Splits `θ = m·modulus + φ` with `0 ≤ φ < modulus`.
pub fn phase_mod(theta: f64, modulus: f64) -> (i64, f64) {
    let m = (theta / modulus).floor();
    let mut phi = theta - m * modulus;
    let mut m = m as i64;
    if phi >= modulus {
        phi -= modulus;
        m += 1;
    }
    if phi < 0.0 {
        phi += modulus;
        m -= 1;
    }
    (m, phi)
}
