//! Dirichlet eigenvalues near `E₀` from the monotone phase map, the
//! rescaled point process `ξ_L`, spacing fluctuations, and the Laplace
//! functional through the relative phase.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::SpectrumError;
use crate::functional::TestFunction;
use crate::pruefer::{phase_mod, DrivingSignal};

/// Root tolerance in `θ` units.
pub const ROOT_TOL: f64 = 1e-9;
/// Probe budget per eigenvalue after bracketing.
pub const MAX_PROBES: usize = 100;
/// Default half-width of the window in `x` units.
pub const DEFAULT_HALF_WIDTH: f64 = 6.0 * PI;

/// Internal target so that re-evaluation stays inside [`ROOT_TOL`].
const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenWindow {
    e0: f64,
    length: f64,
    half_width: f64,
}

impl EigenWindow {
    pub fn new(e0: f64, length: f64, half_width: f64) -> Result<Self, SpectrumError> {
        if !(e0 > 0.0 && e0.is_finite()) {
            return Err(SpectrumError::InvalidWindow(format!("E0 must be positive, got {e0}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(SpectrumError::InvalidWindow(format!("L must be positive, got {length}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(SpectrumError::InvalidWindow(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let w = Self {
            e0,
            length,
            half_width,
        };
        if !(w.kappa_min() > 0.0) {
            return Err(SpectrumError::WindowUnderflow(w.kappa_min()));
        }
        Ok(w)
    }

    pub fn with_default_width(e0: f64, length: f64) -> Result<Self, SpectrumError> {
        Self::new(e0, length, DEFAULT_HALF_WIDTH)
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn kappa0(&self) -> f64 {
        self.e0.sqrt()
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa0() - self.half_width / self.length
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa0() + self.half_width / self.length
    }

    pub fn kappa_at(&self, x: f64) -> f64 {
        self.kappa0() + x / self.length
    }

    fn check_signal(&self, signal: &DrivingSignal) -> Result<(), SpectrumError> {
        let rel = (signal.horizon() - self.length).abs() / self.length;
        if rel > 1e-12 {
            return Err(SpectrumError::InvalidWindow(format!(
                "signal horizon {} does not match window length {}",
                signal.horizon(),
                self.length
            )));
        }
        Ok(())
    }
}

/// Provenance carried by every sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub length: f64,
    pub alpha: f64,
    pub e0: f64,
    pub half_width: f64,
    pub step: f64,
}

/// Atoms of `ξ_L` (or of a limit process) inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProcessSample {
    pub atoms: Vec<f64>,
    pub kappas: Vec<f64>,
    pub indices: Vec<i64>,
    pub phi: f64,
    pub m: i64,
    /// Largest `|θ_L(κ_n) − nπ|` over the atoms.
    pub max_residual: f64,
    pub meta: SampleMeta,
}

impl PointProcessSample {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Index `n` of the atom nearest `x = 0`; ties go to the negative side.
    pub fn center_index(&self) -> Option<i64> {
        let mut best: Option<(f64, f64, i64)> = None;
        for (&x, &n) in self.atoms.iter().zip(&self.indices) {
            let better = match best {
                None => true,
                Some((d, bx, _)) => x.abs() < d || (x.abs() == d && x < bx),
            };
            if better {
                best = Some((x.abs(), x, n));
            }
        }
        best.map(|(_, _, n)| n)
    }

    pub fn atom(&self, n: i64) -> Option<f64> {
        let first = *self.indices.first()?;
        let k = usize::try_from(n - first).ok()?;
        self.atoms.get(k).copied()
    }

    /// `x_{n+1} − x_n` for every consecutive pair.
    pub fn gaps(&self) -> Vec<f64> {
        self.atoms.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `L = (mπ + β)/√E₀`.
pub fn choose_length(e0: f64, m: i64, beta_offset: f64) -> f64 {
    (m as f64 * PI + beta_offset) / e0.sqrt()
}

/// `⌊θ_L(κ)/π⌋`, the Sturm count of Dirichlet eigenvalues below `κ²`.
pub fn count_states(signal: &DrivingSignal, kappa: f64) -> Result<i64, SpectrumError> {
    let end = signal.final_state(kappa)?;
    Ok(phase_mod(end.theta, PI).0)
}

/// Evaluates `g(x) = x + θ̃_L(κ₀ + x/L)` on a batch of `x` in lockstep.
struct PhaseMap<'a> {
    signal: &'a DrivingSignal,
    window: EigenWindow,
    probes: usize,
}

impl<'a> PhaseMap<'a> {
    fn new(signal: &'a DrivingSignal, window: EigenWindow) -> Self {
        Self {
            signal,
            window,
            probes: 0,
        }
    }

    fn eval(&mut self, xs: &[f64]) -> Result<Vec<f64>, SpectrumError> {
        self.probes += xs.len();
        let kappas: Vec<f64> = xs.iter().map(|&x| self.window.kappa_at(x)).collect();
        let ends = self.signal.final_states(&kappas)?;
        Ok(xs.iter().zip(ends).map(|(&x, e)| x + e.theta_tilde).collect())
    }

    /// Equispaced grid over `[lo, hi]` with spacing at most `π/2`.
    fn grid(&mut self, lo: f64, hi: f64) -> Result<(Vec<f64>, Vec<f64>), SpectrumError> {
        let cells = (((hi - lo) / (0.5 * PI)).ceil() as usize).max(1);
        let xs: Vec<f64> = (0..=cells)
            .map(|j| if j == cells { hi } else { lo + (hi - lo) * j as f64 / cells as f64 })
            .collect();
        let gs = self.eval(&xs)?;
        Ok((xs, gs))
    }

    /// Solves `g(x) = target_i` for every target, each bracketed on the grid,
    /// with Illinois steps evaluated in lockstep across targets. Returns
    /// `(root, |residual|)`; the residual exceeds [`ROOT_TOL`] only when
    /// adjacent representable `κ` straddle the root.
    fn invert(
        &mut self,
        xs: &[f64],
        gs: &[f64],
        targets: &[f64],
        labels: &[i64],
    ) -> Result<Vec<(f64, f64)>, SpectrumError> {
        struct Bracket {
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            side: i8,
            best: (f64, f64),
            done: bool,
            // A probe that fails to halve the bracket is followed by a
            // bisection step.
            checkpoint: f64,
            bisect: bool,
            exhausted: bool,
        }
        let mut brackets = Vec::with_capacity(targets.len());
        for (&t, &label) in targets.iter().zip(labels) {
            let j = gs.partition_point(|&g| g < t);
            if j < gs.len() && gs[j] == t {
                brackets.push(Bracket {
                    a: xs[j],
                    fa: 0.0,
                    b: xs[j],
                    fb: 0.0,
                    side: 0,
                    best: (xs[j], 0.0),
                    done: true,
                    checkpoint: 0.0,
                    bisect: false,
                    exhausted: false,
                });
                continue;
            }
            if j == 0 || j == gs.len() {
                return Err(SpectrumError::BracketFailure { index: label });
            }
            let (fa, fb) = (gs[j - 1] - t, gs[j] - t);
            if !(fa < 0.0 && fb >= 0.0) {
                return Err(SpectrumError::BracketFailure { index: label });
            }
            let best = if -fa < fb { (xs[j - 1], fa) } else { (xs[j], fb) };
            brackets.push(Bracket {
                a: xs[j - 1],
                fa,
                b: xs[j],
                fb,
                side: 0,
                best,
                done: best.1.abs() <= SOLVE_TOL,
                checkpoint: xs[j] - xs[j - 1],
                bisect: false,
                exhausted: false,
            });
        }
        for _ in 0..MAX_PROBES {
            let active: Vec<usize> = (0..brackets.len()).filter(|&i| !brackets[i].done).collect();
            if active.is_empty() {
                break;
            }
            let probes: Vec<f64> = active
                .iter()
                .map(|&i| {
                    let br = &brackets[i];
                    let x = br.b - br.fb * (br.b - br.a) / (br.fb - br.fa);
                    if !br.bisect && x > br.a && x < br.b {
                        x
                    } else {
                        0.5 * (br.a + br.b)
                    }
                })
                .collect();
            let values = self.eval(&probes)?;
            for ((&i, &x), &g) in active.iter().zip(&probes).zip(&values) {
                let br = &mut brackets[i];
                let f = g - targets[i];
                if f.abs() < br.best.1.abs() {
                    br.best = (x, f);
                }
                if f < 0.0 {
                    br.a = x;
                    br.fa = f;
                    if br.side == -1 {
                        br.fb *= 0.5;
                    }
                    br.side = -1;
                } else {
                    br.b = x;
                    br.fb = f;
                    if br.side == 1 {
                        br.fa *= 0.5;
                    }
                    br.side = 1;
                }
                let width = br.b - br.a;
                br.bisect = width > 0.5 * br.checkpoint;
                br.checkpoint = width;
                let mid = 0.5 * (br.a + br.b);
                let (ka, kb, km) = (
                    self.window.kappa_at(br.a),
                    self.window.kappa_at(br.b),
                    self.window.kappa_at(mid),
                );
                let exhausted = km == ka || km == kb || width <= 4.0 * f64::EPSILON * x.abs().max(1.0);
                if f.abs() <= SOLVE_TOL {
                    br.done = true;
                } else if exhausted {
                    br.done = true;
                    br.exhausted = true;
                }
            }
        }
        brackets
            .iter()
            .zip(labels)
            .map(|(br, &label)| {
                if br.best.1.abs() <= ROOT_TOL || br.exhausted {
                    Ok((br.best.0, br.best.1.abs()))
                } else {
                    Err(SpectrumError::BracketFailure { index: label })
                }
            })
            .collect()
    }
}

/// Every Dirichlet eigenvalue with `x_n ∈ (−W, W)`, each located to
/// `|θ_L(κ_n) − nπ| ≤ 1e−9`.
pub fn solve_eigenvalues(
    signal: &DrivingSignal,
    window: &EigenWindow,
) -> Result<PointProcessSample, SpectrumError> {
    window.check_signal(signal)?;
    let length = window.length();
    let base = window.kappa0() * length;
    let mut map = PhaseMap::new(signal, *window);
    let w = window.half_width();
    let (xs, gs) = map.grid(-w, w)?;
    let center = map.eval(&[0.0])?[0];
    let (m, phi) = phase_mod(base + center, PI);

    let lo = phase_mod(base + gs[0], PI).0 + 1;
    let hi_theta = base + gs[gs.len() - 1];
    let (mut hi, rem) = phase_mod(hi_theta, PI);
    if rem == 0.0 {
        hi -= 1;
    }
    let indices: Vec<i64> = (lo..=hi).collect();
    let targets: Vec<f64> = indices.iter().map(|&n| n as f64 * PI - base).collect();
    let solved = map.invert(&xs, &gs, &targets, &indices)?;
    let atoms: Vec<f64> = solved.iter().map(|r| r.0).collect();
    let max_residual = solved.iter().map(|r| r.1).fold(0.0, f64::max);
    if atoms.windows(2).any(|p| !(p[0] < p[1])) {
        let bad = atoms.windows(2).position(|p| !(p[0] < p[1])).unwrap_or(0);
        return Err(SpectrumError::BracketFailure { index: indices[bad] });
    }
    let kappas = atoms.iter().map(|&x| window.kappa_at(x)).collect();
    Ok(PointProcessSample {
        atoms,
        kappas,
        indices,
        phi,
        m,
        max_residual,
        meta: SampleMeta {
            length,
            e0: window.e0(),
            half_width: w,
            step: signal.step(),
            ..SampleMeta::default()
        },
    })
}

/// `X(n) = (x_{c+n+1} − x_{c+n} − π)·L^{α−½}` for each `n`.
pub fn spacing_fluctuations(
    sample: &PointProcessSample,
    alpha: f64,
    center: i64,
    offsets: &[i64],
) -> Result<Vec<f64>, SpectrumError> {
    let scale = sample.meta.length.powf(alpha - 0.5);
    offsets
        .iter()
        .map(|&n| {
            let k = center + n;
            let x0 = sample.atom(k).ok_or(SpectrumError::MissingIndex(k))?;
            let x1 = sample.atom(k + 1).ok_or(SpectrumError::MissingIndex(k + 1))?;
            Ok((x1 - x0 - PI) * scale)
        })
        .collect()
}

/// `exp(−Σ_k f(Ψ_L⁻¹(kπ − φ)))`, inverting the relative phase
/// `Ψ_L(x) = x + θ̃(κ₀ + x/L) − θ̃(κ₀)` over the support of `f`.
pub fn laplace_functional_via_phase(
    signal: &DrivingSignal,
    window: &EigenWindow,
    f: &TestFunction,
) -> Result<f64, SpectrumError> {
    window.check_signal(signal)?;
    let (lo, hi) = f.support();
    let w = window.half_width();
    if lo < -w || hi > w {
        return Err(SpectrumError::SupportExceedsWindow {
            lo,
            hi,
            win_lo: -w,
            win_hi: w,
        });
    }
    let mut map = PhaseMap::new(signal, *window);
    let base = window.kappa0() * window.length();
    let theta_tilde0 = map.eval(&[0.0])?[0];
    let phi = phase_mod(base + theta_tilde0, PI).1;
    let (xs, gs) = map.grid(lo, hi)?;
    let psi: Vec<f64> = gs.iter().map(|g| g - theta_tilde0).collect();

    let k_lo = ((psi[0] + phi) / PI).ceil() as i64;
    let k_hi = ((psi[psi.len() - 1] + phi) / PI).floor() as i64;
    let ks: Vec<i64> = (k_lo..=k_hi)
        .filter(|&k| {
            let level = k as f64 * PI - phi;
            level >= psi[0] && level <= psi[psi.len() - 1]
        })
        .collect();
    let levels: Vec<f64> = ks.iter().map(|&k| k as f64 * PI - phi).collect();
    // Ψ = g − θ̃(κ₀), so the level Ψ = kπ − φ is g = kπ − φ + θ̃(κ₀).
    let g_levels: Vec<f64> = levels.iter().map(|l| l + theta_tilde0).collect();
    let roots: Vec<f64> = map.invert(&xs, &gs, &g_levels, &ks)?.into_iter().map(|r| r.0).collect();
    let total = f.sum_over(&roots);
    Ok((-total).exp())
}
