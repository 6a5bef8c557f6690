use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("generator scale must be positive and finite, got {0}")]
    InvalidGeneratorScale(f64),
    #[error("Fourier coefficients must be finite")]
    NonFiniteCoefficient,
    #[error("potential is constant: every Fourier coefficient is zero")]
    ConstantPotential,
    #[error("decay exponent alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("decay amplitude must be non-negative, got {0}")]
    InvalidAmplitude(f64),
    #[error("energy must be positive, got {0}")]
    InvalidEnergy(f64),
    #[error("shift {re}+{im}i is an eigenvalue of -L on active mode {mode}")]
    SingularShift { mode: usize, re: f64, im: f64 },
    #[error("no energy with gamma(E) = 1/2 inside the search bracket")]
    NoCriticalEnergy,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrueferError {
    #[error("invalid grid: horizon {horizon}, step {step}")]
    InvalidGrid { horizon: f64, step: f64 },
    #[error("kappa must be positive, got {0}")]
    InvalidKappa(f64),
    #[error("kappas must be strictly increasing")]
    UnsortedKappas,
    #[error("step {step} too coarse for kappa {kappa}: phase advance bound {bound} > 0.5")]
    StepTooCoarse { step: f64, kappa: f64, bound: f64 },
    #[error("window underflow: smallest kappa {0} is not positive")]
    WindowUnderflow(f64),
    #[error("stride must be at least 1")]
    InvalidStride,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Integrator(#[from] PrueferError),
    #[error("window underflow: kappa_min = {0} is not positive")]
    WindowUnderflow(f64),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("root bracket failed for index {index}")]
    BracketFailure { index: i64 },
    #[error("index {0} is missing from the sample")]
    MissingIndex(i64),
    #[error("test-function support [{lo}, {hi}] exceeds the computed window [{win_lo}, {win_hi}]")]
    SupportExceedsWindow { lo: f64, hi: f64, win_lo: f64, win_hi: f64 },
    #[error("sample has no atoms")]
    EmptySample,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitsError {
    #[error(transparent)]
    Integrator(#[from] PrueferError),
    #[error("alpha = {0} is outside the regime this operation requires")]
    InvalidRegime(f64),
    #[error("quadrature did not reach tolerance {tol} (error estimate {estimate})")]
    QuadratureFailure { tol: f64, estimate: f64 },
    #[error("monotonicity in c breached after refinement (steps {steps}, t0 {t0})")]
    MonotonicityBreach { steps: usize, t0: f64 },
    #[error("level {level} falls outside the computed range of Psi_1")]
    GridTooNarrow { level: f64 },
    #[error("proposal width must be positive, got {0}")]
    DegenerateProposal(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("point set {set} has fewer than two atoms")]
    TooFewAtoms { set: usize },
    #[error("test-function support [{lo}, {hi}] exceeds window [{win_lo}, {win_hi}]")]
    SupportExceedsWindow { lo: f64, hi: f64, win_lo: f64, win_hi: f64 },
    #[error("replica vectors have inconsistent length")]
    RaggedInput,
}

/// Any error the simulation library can raise.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pruefer(#[from] PrueferError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Limits(#[from] LimitsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
