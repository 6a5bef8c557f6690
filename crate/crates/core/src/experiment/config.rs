//! TOML experiment configuration: parsing, defaults and validation.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use ExperimentKind as Kind;
use crate::functional::TestFunction;
use crate::model::{DecayProfile, PotentialModel};
use crate::spectrum::{choose_length, DEFAULT_HALF_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Clock,
    Gaussian,
    Critical,
    PsiSde,
    Cbe,
    Constants,
    Uniformity,
    CharDecay,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        Self::Spectrum,
        Self::Clock,
        Self::Gaussian,
        Self::Critical,
        Self::PsiSde,
        Self::Cbe,
        Self::Constants,
        Self::Uniformity,
        Self::CharDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Clock => "clock",
            Self::Gaussian => "gaussian",
            Self::Critical => "critical",
            Self::PsiSde => "psi_sde",
            Self::Cbe => "cbe",
            Self::Constants => "constants",
            Self::Uniformity => "uniformity",
            Self::CharDecay => "char_decay",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Whether the kind integrates the Prüfer phase and so needs `[decay]`.
    pub fn needs_decay(self) -> bool {
        !matches!(self, Self::PsiSde | Self::Cbe | Self::Constants)
    }

    pub fn needs_experiment(self) -> bool {
        !matches!(self, Self::Constants)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `F(x) = Σ_k a_k cos(kx) + b_k sin(kx)`, `k ≥ 1`, with generator `(σ²/2)d²/dx²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub fourier_cos: Vec<f64>,
    pub fourier_sin: Vec<f64>,
    pub sigma2: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            fourier_cos: vec![1.0],
            fourier_sin: Vec::new(),
            sigma2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// Integrator step; `None` means `min(1e-3, 0.05/κ)`.
    pub h: Option<f64>,
    /// Start time of the Ψ SDE.
    pub t0: f64,
    pub psi_steps: usize,
    pub psi_max_refinements: u32,
    /// Eigenvalue window half-width in `x` units.
    pub half_width: f64,
    /// Dump the replica-0 phase trajectory at this stride when set.
    pub trajectory_stride: Option<usize>,
    /// CBE burn-in sweeps; `None` means `2000·n`.
    pub cbe_burn_in: Option<usize>,
    /// Sweeps between kept CBE states.
    pub cbe_thin: usize,
    pub proposal_width: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            h: None,
            t0: 1e-3,
            psi_steps: 2000,
            psi_max_refinements: 4,
            half_width: DEFAULT_HALF_WIDTH,
            trajectory_stride: None,
            cbe_burn_in: None,
            cbe_thin: 1,
            proposal_width: 0.5,
        }
    }
}

/// Triangular bump `h · max(0, 1 − |x − x₀|/w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleSpec {
    pub height: f64,
    pub center: f64,
    pub width: f64,
}

impl TriangleSpec {
    pub fn function(&self) -> TestFunction {
        TestFunction::triangle(self.height, self.center, self.width)
    }
}

/// Kind-specific parameters; which ones are required depends on the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    /// Reference energy `E₀`.
    pub e0: Option<f64>,
    /// Pick `E₀` with `β(E₀)` equal to this (critical runs).
    pub target_beta: Option<f64>,
    /// Interval length `L`; alternatively `m` with `beta_offset`.
    pub length: Option<f64>,
    pub m: Option<i64>,
    pub beta_offset: f64,
    /// Phase horizon `T` (clock, uniformity).
    pub horizon: Option<f64>,
    /// Gap offsets `n` for spacing fluctuations.
    pub offsets: Vec<i64>,
    pub test_functions: Vec<TriangleSpec>,
    /// Drift parameters for the Ψ SDE.
    pub cs: Vec<f64>,
    /// CBE point count and exponent.
    pub points: Option<usize>,
    pub beta: Option<f64>,
    /// Kept CBE states (per replica for `cbe`, in total for `critical`).
    pub samples: usize,
    /// Energies tabulated by `constants`.
    pub energies: Vec<f64>,
    /// Scale `n` and times `t0 < t` for the characteristic decay.
    pub scale: f64,
    pub t0: f64,
    pub t: f64,
    pub orders: Vec<i32>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            e0: None,
            target_beta: None,
            length: None,
            m: None,
            beta_offset: 0.0,
            horizon: None,
            offsets: vec![0, 1],
            test_functions: vec![
                TriangleSpec { height: 1.0, center: 0.0, width: 2.0 },
                TriangleSpec { height: 0.5, center: 1.5, width: 3.0 },
                TriangleSpec { height: 2.0, center: -1.0, width: 1.0 },
            ],
            cs: vec![0.5, 1.0, 2.0],
            points: None,
            beta: None,
            samples: 10_000,
            energies: vec![0.1, 0.5, 1.0, 4.0],
            scale: 1000.0,
            t0: 1.0,
            t: 4.0,
            orders: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    pub replicas: usize,
    /// Global index of this run's first replica, for sharded runs.
    pub first_replica: usize,
    /// Worker threads; `None` defers to `PRUEFER_LAB_WORKERS`, then 1.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            replicas: 1,
            first_replica: 0,
            workers: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    decay: Option<DecayConfig>,
    #[serde(default)]
    numerics: Option<NumericsConfig>,
    #[serde(default)]
    experiment: Option<ExperimentParams>,
    #[serde(default)]
    run: Option<RunConfig>,
}

/// A validated experiment description with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    pub decay: Option<DecayConfig>,
    pub numerics: NumericsConfig,
    pub experiment: ExperimentParams,
    pub run: RunConfig,
}

/// One violated constraint, addressed by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ExperimentError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut errors = Vec::new();
    let mut err = |path: &str, message: String| {
        errors.push(FieldError {
            path: path.to_string(),
            message,
        })
    };
    let Some(kind) = ExperimentKind::from_name(&raw.kind) else {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        err("kind", format!("unknown kind '{}', expected one of {}", raw.kind, names.join(", ")));
        return Err(ExperimentError::Validation(errors));
    };
    let config = ExperimentConfig {
        kind,
        model: raw.model.unwrap_or_default(),
        decay: raw.decay,
        numerics: raw.numerics.unwrap_or_default(),
        experiment: raw.experiment.clone().unwrap_or_default(),
        run: raw.run.unwrap_or_default(),
    };
    if kind.needs_experiment() && raw.experiment.is_none() {
        err("experiment", format!("section [experiment] is required for kind '{kind}'"));
    }
    for e in config.validate() {
        errors.push(e);
    }
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ExperimentError::Validation(errors))
    }
}

fn positive(errors: &mut Vec<FieldError>, path: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(FieldError {
            path: path.into(),
            message: format!("must be positive and finite, got {v}"),
        });
    }
}

fn require<T>(errors: &mut Vec<FieldError>, path: &str, v: &Option<T>, kind: ExperimentKind) {
    if v.is_none() {
        errors.push(FieldError {
            path: path.into(),
            message: format!("required for kind '{kind}'"),
        });
    }
}

impl ExperimentConfig {
    /// Every constraint violation; empty when the config is usable.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut e = Vec::new();
        let kind = self.kind;
        let push = |e: &mut Vec<FieldError>, path: &str, message: String| {
            e.push(FieldError {
                path: path.into(),
                message,
            })
        };

        positive(&mut e, "model.sigma2", self.model.sigma2);
        if let Err(err) = self.potential() {
            push(&mut e, "model", err.to_string());
        }

        match (&self.decay, kind.needs_decay()) {
            (None, true) => push(&mut e, "decay", format!("section [decay] is required for kind '{kind}'")),
            (Some(d), _) => {
                positive(&mut e, "decay.alpha", d.alpha);
                if !(d.amplitude >= 0.0 && d.amplitude.is_finite()) {
                    push(&mut e, "decay.amplitude", format!("must be non-negative, got {}", d.amplitude));
                }
                if d.alpha > 0.0 && d.amplitude > 0.0 {
                    match kind {
                        Kind::Clock if d.alpha <= 0.5 => {
                            push(&mut e, "decay.alpha", format!("clock runs need alpha > 1/2, got {}", d.alpha))
                        }
                        Kind::Gaussian if !(d.alpha > 0.5 && d.alpha < 1.0) => push(
                            &mut e,
                            "decay.alpha",
                            format!("gaussian runs need 1/2 < alpha < 1, got {}", d.alpha),
                        ),
                        _ => {}
                    }
                }
            }
            (None, false) => {}
        }

        let n = &self.numerics;
        if let Some(h) = n.h {
            positive(&mut e, "numerics.h", h);
        }
        if !(n.t0 > 0.0 && n.t0 <= 0.1) {
            push(&mut e, "numerics.t0", format!("must lie in (0, 0.1], got {}", n.t0));
        }
        if n.psi_steps == 0 {
            push(&mut e, "numerics.psi_steps", "must be at least 1".into());
        }
        positive(&mut e, "numerics.half_width", n.half_width);
        if n.trajectory_stride == Some(0) {
            push(&mut e, "numerics.trajectory_stride", "must be at least 1".into());
        }
        if n.cbe_thin == 0 {
            push(&mut e, "numerics.cbe_thin", "must be at least 1".into());
        }
        positive(&mut e, "numerics.proposal_width", n.proposal_width);

        let x = &self.experiment;
        if let Some(e0) = x.e0 {
            positive(&mut e, "experiment.e0", e0);
        }
        if let Some(l) = x.length {
            positive(&mut e, "experiment.length", l);
        }
        if !(x.beta_offset >= 0.0 && x.beta_offset < PI) {
            push(&mut e, "experiment.beta_offset", format!("must lie in [0, π), got {}", x.beta_offset));
        }
        for (i, f) in x.test_functions.iter().enumerate() {
            if !(f.width > 0.0 && f.height >= 0.0 && f.center.is_finite()) {
                push(
                    &mut e,
                    &format!("experiment.test_functions[{i}]"),
                    "needs width > 0 and height >= 0".into(),
                );
            } else if (f.center - f.width) < -n.half_width || (f.center + f.width) > n.half_width {
                push(
                    &mut e,
                    &format!("experiment.test_functions[{i}]"),
                    format!("support exceeds the window [-{0}, {0}]", n.half_width),
                );
            }
        }

        let needs_length = matches!(kind, Kind::Spectrum | Kind::Gaussian | Kind::Critical);
        if needs_length && x.length.is_none() && x.m.is_none() {
            push(&mut e, "experiment.length", format!("required for kind '{kind}' (or give experiment.m)"));
        }
        match kind {
            Kind::Spectrum | Kind::Gaussian | Kind::Clock | Kind::Uniformity | Kind::CharDecay | Kind::PsiSde => {
                require(&mut e, "experiment.e0", &x.e0, kind)
            }
            Kind::Critical => {
                if x.e0.is_none() && x.target_beta.is_none() {
                    push(&mut e, "experiment.e0", "required for kind 'critical' (or give experiment.target_beta)".into());
                }
                if let Some(b) = x.target_beta {
                    positive(&mut e, "experiment.target_beta", b);
                }
            }
            Kind::Cbe => {
                require(&mut e, "experiment.points", &x.points, kind);
                require(&mut e, "experiment.beta", &x.beta, kind);
            }
            Kind::Constants => {}
        }
        if matches!(kind, Kind::Clock | Kind::Uniformity) {
            require(&mut e, "experiment.horizon", &x.horizon, kind);
            if let Some(t) = x.horizon {
                positive(&mut e, "experiment.horizon", t);
            }
        }
        if kind == Kind::Gaussian && x.offsets.is_empty() {
            push(&mut e, "experiment.offsets", "needs at least one offset".into());
        }
        if kind == Kind::PsiSde && (x.cs.is_empty() || x.cs.iter().any(|c| !c.is_finite())) {
            push(&mut e, "experiment.cs", "needs at least one finite drift value".into());
        }
        if matches!(kind, Kind::Cbe | Kind::Critical) {
            if let Some(p) = x.points {
                if p < 2 {
                    push(&mut e, "experiment.points", format!("must be at least 2, got {p}"));
                }
            }
            if let Some(b) = x.beta {
                positive(&mut e, "experiment.beta", b);
            }
            if x.samples == 0 {
                push(&mut e, "experiment.samples", "must be at least 1".into());
            }
        }
        if kind == Kind::Constants {
            if x.energies.is_empty() {
                push(&mut e, "experiment.energies", "needs at least one energy".into());
            }
            for (i, &en) in x.energies.iter().enumerate() {
                positive(&mut e, &format!("experiment.energies[{i}]"), en);
            }
        }
        if kind == Kind::CharDecay {
            positive(&mut e, "experiment.scale", x.scale);
            positive(&mut e, "experiment.t0", x.t0);
            if !(x.t >= x.t0) {
                push(&mut e, "experiment.t", format!("must be at least t0 = {}, got {}", x.t0, x.t));
            }
        }

        if self.run.replicas == 0 {
            push(&mut e, "run.replicas", "must be at least 1".into());
        }
        if self.run.workers == Some(0) {
            push(&mut e, "run.workers", "must be at least 1".into());
        }
        e
    }

    pub fn potential(&self) -> Result<PotentialModel, crate::ModelError> {
        PotentialModel::new(self.model.fourier_cos.clone(), self.model.fourier_sin.clone(), self.model.sigma2)
    }

    /// Decay profile; `free()` for kinds without a `[decay]` section.
    pub fn decay_profile(&self) -> Result<DecayProfile, crate::ModelError> {
        match &self.decay {
            Some(d) if d.amplitude == 0.0 => Ok(DecayProfile::free()),
            Some(d) => DecayProfile::new(d.alpha, d.amplitude),
            None => Ok(DecayProfile::free()),
        }
    }

    /// `E₀`, resolving `target_beta` through the model when given.
    pub fn reference_energy(&self) -> Result<f64, crate::Error> {
        match (self.experiment.e0, self.experiment.target_beta) {
            (Some(e0), _) => Ok(e0),
            (None, Some(b)) => Ok(self.potential()?.energy_for_beta(b)?),
            (None, None) => Ok(1.0),
        }
    }

    pub fn length(&self, e0: f64) -> Option<f64> {
        self.experiment
            .length
            .or_else(|| self.experiment.m.map(|m| choose_length(e0, m, self.experiment.beta_offset)))
    }

    /// Worker count: config, then `PRUEFER_LAB_WORKERS`, then 1.
    pub fn workers(&self) -> usize {
        self.run
            .workers
            .or_else(|| std::env::var("PRUEFER_LAB_WORKERS").ok()?.parse().ok())
            .filter(|&w| w > 0)
            .unwrap_or(1)
    }

    /// The config with run-only settings cleared, for comparing shards.
    pub fn science(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.run = RunConfig {
            master_seed: self.run.master_seed,
            ..RunConfig::default()
        };
        c
    }
}
