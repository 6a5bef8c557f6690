//! Replica fan-out, per-kind statistics and artifact writing.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind as Kind};
use super::ExperimentError;
use crate::limits::{
    cbe_circular_gaps, cbe_scaled_gaps, cbe_two_point_gap_cdf, clock_limit_sample, gaussian_covariance,
    psi_t0_study, sample_circular_beta_chain, CbeSample, CbeSchedule, ClockSample, ClockSpec, PsiConfig,
};
use crate::model::{wrap_angle, ConstantsReport, DecayProfile, PotentialModel, SpectralConstants};
use crate::pruefer::{default_step, DrivingSignal, NoisePath};
use crate::seed::split_seed;
use crate::spectrum::{solve_eigenvalues, spacing_fluctuations, EigenWindow, PointProcessSample, MAX_PROBES, ROOT_TOL};
use crate::stats::{
    char_decay_test, covariance_estimate, gap_ecdf, ks_distance, ks_distance_to_cdf,
    normal_cdf, uniformity_test, Ecdf, EnsembleSummary, Moments, TestRecord, MIN_COVARIANCE_REPLICAS,
};
use crate::Error;

/// Bumped whenever artifact layouts change; reports refuse to mix versions.
pub const SCHEMA_VERSION: u32 = 1;

/// Halvings of `t0` in the built-in Ψ start-time study.
const PSI_T0_HALVINGS: u32 = 2;

/// Index of the coordinator-side CBE chain seed for critical runs.
const CBE_REFERENCE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub replica: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub replica: usize,
    pub seed: u64,
    pub error: String,
}

/// Everything needed to reproduce and audit one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub schema: u32,
    pub config: ExperimentConfig,
    pub constants: Vec<ConstantsReport>,
    pub seeds: Vec<ReplicaSeed>,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
    pub workers: usize,
    pub completed: usize,
    pub failures: Vec<ReplicaFailure>,
    pub checks: BTreeMap<String, TestRecord>,
}

impl RunManifest {
    /// True when every acceptance check passed.
    pub fn passed(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }
}

enum Output {
    Points(PointProcessSample),
    Clock(ClockSample),
    Fluctuations(Vec<f64>),
    Psi(Vec<(f64, Vec<f64>)>),
    Cbe(Vec<CbeSample>),
    Phase { theta: f64, theta_tilde: f64 },
    Pair(f64, f64),
}

/// Resolved run parameters shared by all replicas.
struct Setup<'a> {
    config: &'a ExperimentConfig,
    model: PotentialModel,
    decay: DecayProfile,
    e0: f64,
    length: f64,
    step: f64,
    constants: Option<SpectralConstants>,
}

impl<'a> Setup<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self, Error> {
        let model = config.potential()?;
        let decay = config.decay_profile()?;
        let e0 = config.reference_energy()?;
        let x = &config.experiment;
        let length = match config.kind {
            Kind::Clock | Kind::Uniformity => x.horizon.unwrap_or(1.0),
            Kind::CharDecay => x.scale * x.t,
            _ => config.length(e0).unwrap_or(1.0),
        };
        let step = config.numerics.h.unwrap_or_else(|| default_step(e0.sqrt()));
        let constants = match config.kind {
            Kind::Cbe | Kind::Constants => None,
            _ => Some(model.spectral_constants(e0)?),
        };
        Ok(Self {
            config,
            model,
            decay,
            e0,
            length,
            step,
            constants,
        })
    }

    fn kappa0(&self) -> f64 {
        self.e0.sqrt()
    }

    fn alpha(&self) -> f64 {
        self.config.decay.as_ref().map_or(0.0, |d| d.alpha)
    }

    fn half_width(&self) -> f64 {
        self.config.numerics.half_width
    }

    fn psi_config(&self) -> PsiConfig {
        let n = &self.config.numerics;
        PsiConfig {
            t0: n.t0,
            steps: n.psi_steps,
            max_refinements: n.psi_max_refinements,
        }
    }

    fn cbe_beta(&self) -> f64 {
        self.config
            .experiment
            .beta
            .or_else(|| self.constants.as_ref().map(|c| c.beta_e))
            .unwrap_or(2.0)
    }

    fn cbe_schedule(&self, n: usize) -> CbeSchedule {
        let nm = &self.config.numerics;
        CbeSchedule {
            burn_in_sweeps: nm.cbe_burn_in.unwrap_or(2000 * n),
            thin_sweeps: nm.cbe_thin,
            proposal_width: nm.proposal_width,
        }
    }

    fn signal(&self, seed: u64) -> Result<(NoisePath, DrivingSignal), Error> {
        let path = NoisePath::simulate(seed, self.length, self.step, self.model.generator_scale())?;
        let signal = DrivingSignal::new(&path, &self.decay, &self.model);
        Ok((path, signal))
    }

    fn spectrum(&self, seed: u64) -> Result<PointProcessSample, Error> {
        let (_, signal) = self.signal(seed)?;
        let window = EigenWindow::new(self.e0, self.length, self.half_width())?;
        let mut sample = solve_eigenvalues(&signal, &window)?;
        sample.meta.seed = seed;
        sample.meta.alpha = self.alpha();
        Ok(sample)
    }

    fn replica(&self, seed: u64) -> Result<Output, Error> {
        let x = &self.config.experiment;
        Ok(match self.config.kind {
            Kind::Spectrum | Kind::Critical => Output::Points(self.spectrum(seed)?),
            Kind::Clock => {
                let spec = ClockSpec {
                    e0: self.e0,
                    beta_offset: x.beta_offset,
                    horizon: self.length,
                    step: self.step,
                    half_width: self.half_width(),
                };
                Output::Clock(clock_limit_sample(seed, &self.model, &self.decay, &spec)?)
            }
            Kind::Gaussian => {
                let sample = self.spectrum(seed)?;
                let center = sample
                    .center_index()
                    .ok_or(crate::SpectrumError::EmptySample)?;
                Output::Fluctuations(spacing_fluctuations(&sample, self.alpha(), center, &x.offsets)?)
            }
            Kind::PsiSde => {
                let d = self.constants.as_ref().map_or(0.0, |c| c.d);
                Output::Psi(psi_t0_study(seed, d, &x.cs, &self.psi_config(), PSI_T0_HALVINGS)?)
            }
            Kind::Cbe => {
                let n = x.points.unwrap_or(2);
                let samples = sample_circular_beta_chain(seed, n, self.cbe_beta(), &self.cbe_schedule(n), x.samples)?;
                Output::Cbe(samples)
            }
            Kind::Uniformity => {
                let (_, signal) = self.signal(seed)?;
                let end = signal.final_state(self.kappa0())?;
                Output::Phase {
                    theta: end.theta,
                    theta_tilde: end.theta_tilde,
                }
            }
            Kind::CharDecay => {
                let (path, signal) = self.signal(seed)?;
                let first = (x.scale * x.t0 / path.step()).round() as usize;
                let v = signal.theta_tilde_at(self.kappa0(), &[first, signal.steps()])?;
                Output::Pair(v[0], v[1])
            }
            Kind::Constants => unreachable!("constants runs have no replicas"),
        })
    }
}

fn header(kind: Kind) -> &'static str {
    match kind {
        Kind::Spectrum | Kind::Critical => "replica,n,x_n,kappa_n",
        Kind::Clock => "replica,phi_beta,theta_tilde",
        Kind::Gaussian => "replica,offset,x",
        Kind::PsiSde => "replica,t0,c,psi1",
        Kind::Cbe => "replica,sample,j,angle",
        Kind::Uniformity => "replica,theta,theta_tilde,phase",
        Kind::CharDecay => "replica,theta_before,theta_after",
        Kind::Constants => "E,C_E,gamma,beta,E_c,D,C3,C4",
    }
}

fn rows(csv: &mut String, r: usize, out: &Output, config: &ExperimentConfig) {
    match out {
        Output::Points(s) => {
            for ((n, x), k) in s.indices.iter().zip(&s.atoms).zip(&s.kappas) {
                let _ = writeln!(csv, "{r},{n},{x},{k}");
            }
        }
        Output::Clock(c) => {
            let _ = writeln!(csv, "{r},{},{}", c.phi_beta, c.theta_tilde);
        }
        Output::Fluctuations(v) => {
            for (o, x) in config.experiment.offsets.iter().zip(v) {
                let _ = writeln!(csv, "{r},{o},{x}");
            }
        }
        Output::Psi(levels) => {
            for (t0, values) in levels {
                for (c, p) in config.experiment.cs.iter().zip(values) {
                    let _ = writeln!(csv, "{r},{t0},{c},{p}");
                }
            }
        }
        Output::Cbe(samples) => {
            for (i, s) in samples.iter().enumerate() {
                for (j, a) in s.angles.iter().enumerate() {
                    let _ = writeln!(csv, "{r},{i},{j},{a}");
                }
            }
        }
        Output::Phase { theta, theta_tilde } => {
            let _ = writeln!(csv, "{r},{theta},{theta_tilde},{}", wrap_angle(2.0 * theta));
        }
        Output::Pair(a, b) => {
            let _ = writeln!(csv, "{r},{a},{b}");
        }
    }
}

/// Passes when `|x − target| < k·stderr`; exact equality is required when
/// the standard error vanishes.
fn within_se(x: f64, target: f64, stderr: f64, k: f64) -> TestRecord {
    if stderr > 0.0 {
        TestRecord::below((x - target).abs() / stderr, k)
    } else {
        TestRecord {
            statistic: (x - target).abs(),
            threshold: 0.0,
            pass: x == target,
        }
    }
}

struct Aggregate {
    summary: EnsembleSummary,
    sidecar: Value,
}

fn aggregate(setup: &Setup, outputs: &[(usize, u64, Output)]) -> Result<Aggregate, Error> {
    let config = setup.config;
    let x = &config.experiment;
    let mut s = EnsembleSummary::new(config.kind.name());
    s.replicas = outputs.len();
    let mut sidecar = json!({
        "kind": config.kind.name(),
        "E0": setup.e0,
        "L": setup.length,
        "alpha": setup.alpha(),
        "W": setup.half_width(),
        "h": setup.step,
    });
    let laplace = |s: &mut EnsembleSummary, sets: &[&[f64]]| {
        for (i, f) in x.test_functions.iter().enumerate() {
            let f = f.function();
            let m: Moments = sets.iter().map(|a| (-f.sum_over(a)).exp()).collect();
            s.add_statistic(format!("laplace[{i}]"), m);
        }
    };

    match config.kind {
        Kind::Spectrum | Kind::Critical => {
            let samples: Vec<&PointProcessSample> = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Points(p) = o { Some(p) } else { None })
                .collect();
            let gaps: Moments = samples.iter().flat_map(|p| p.gaps()).collect();
            s.add_statistic("gap", gaps);
            s.add_statistic("atoms", samples.iter().map(|p| p.len() as f64).collect());
            s.add_statistic(
                "center_gap_deviation",
                samples
                    .iter()
                    .filter_map(|p| {
                        let c = p.center_index()?;
                        Some((p.atom(c + 1)? - p.atom(c)? - PI).abs())
                    })
                    .collect(),
            );
            let max_residual = samples.iter().map(|p| p.max_residual).fold(0.0, f64::max);
            s.add_statistic("max_residual", samples.iter().map(|p| p.max_residual).collect());
            let sets: Vec<&[f64]> = samples.iter().map(|p| p.atoms.as_slice()).collect();
            laplace(&mut s, &sets);
            s.tests
                .insert("root_residual".into(), TestRecord::below(max_residual, 10.0 * ROOT_TOL));
            if setup.decay.is_free() {
                let worst = samples
                    .iter()
                    .flat_map(|p| p.gaps())
                    .map(|g| (g - PI).abs())
                    .fold(0.0, f64::max);
                s.tests.insert("free_gaps".into(), TestRecord::below(worst, 1e-9));
            }
            sidecar["tolerances"] = json!({ "root_tol": ROOT_TOL, "max_probes": MAX_PROBES });
            sidecar["replicas"] = samples
                .iter()
                .zip(outputs)
                .map(|(p, (r, seed, _))| {
                    json!({ "replica": r, "seed": seed, "phi": p.phi, "m": p.m, "max_residual": p.max_residual })
                })
                .collect();
            if config.kind == Kind::Critical && !sets.is_empty() {
                let ecdf = gap_ecdf(&sets)?;
                let n = x.points.unwrap_or(64);
                let beta = setup.cbe_beta();
                let chain_seed = split_seed(config.run.master_seed, CBE_REFERENCE_STREAM);
                let cbe = sample_circular_beta_chain(chain_seed, n, beta, &setup.cbe_schedule(n), x.samples)?;
                let reference = Ecdf::new(cbe.iter().flat_map(|c| cbe_scaled_gaps(c).gaps).collect());
                s.add_statistic("cbe_gap", reference.values().iter().copied().collect());
                s.tests
                    .insert("ks_cbe".into(), TestRecord::below(ks_distance(&ecdf, &reference), 0.08));
                s.ecdfs.insert("gap".into(), ecdf.table());
                s.ecdfs.insert("cbe_gap".into(), reference.table());
                sidecar["cbe"] = json!({ "n": n, "beta": beta, "samples": x.samples, "seed": chain_seed });
            } else if !sets.is_empty() {
                s.ecdfs.insert("gap".into(), gap_ecdf(&sets)?.table());
            }
        }
        Kind::Clock => {
            let clocks: Vec<&ClockSample> = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Clock(c) = o { Some(c) } else { None })
                .collect();
            s.add_statistic("phi_beta", clocks.iter().map(|c| c.phi_beta).collect());
            let sets: Vec<&[f64]> = clocks.iter().map(|c| c.atoms.as_slice()).collect();
            laplace(&mut s, &sets);
            s.ecdfs
                .insert("phi_beta".into(), Ecdf::new(clocks.iter().map(|c| c.phi_beta).collect()).table());
        }
        Kind::Gaussian => {
            let rows: Vec<Vec<f64>> = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Fluctuations(v) = o { Some(v.clone()) } else { None })
                .collect();
            for (i, o) in x.offsets.iter().enumerate() {
                s.add_statistic(format!("x[{o}]"), rows.iter().map(|r| r[i]).collect());
            }
            let k = setup.constants.as_ref().expect("gaussian runs compute constants");
            let mut table = Vec::new();
            for (i, &a) in x.offsets.iter().enumerate() {
                for &b in &x.offsets[i..] {
                    let c = gaussian_covariance(k, setup.alpha(), a, b)?;
                    table.push(json!({ "alpha": setup.alpha(), "E0": setup.e0, "n_minus_n_prime": a - b, "value": c }));
                }
            }
            sidecar["covariance"] = Value::Array(table);
            if rows.len() >= MIN_COVARIANCE_REPLICAS {
                let est = covariance_estimate(&rows)?;
                let mut worst_se: f64 = 0.0;
                for (i, &a) in x.offsets.iter().enumerate() {
                    for (j, &b) in x.offsets.iter().enumerate().skip(i) {
                        let c = gaussian_covariance(k, setup.alpha(), a, b)?;
                        worst_se = worst_se.max(est.stderr[i][j]);
                        s.tests.insert(
                            format!("cov[{a},{b}]"),
                            within_se(est.covariance[i][j], c, est.stderr[i][j], 3.0),
                        );
                    }
                }
                s.tests
                    .insert("psd".into(), TestRecord::below(-est.min_eigenvalue(), 3.0 * worst_se));
                let first: Vec<f64> = rows.iter().map(|r| r[0]).collect();
                let sd = est.covariance[0][0].sqrt();
                let mean = est.mean[0];
                let ecdf = Ecdf::new(first);
                s.tests.insert(
                    "normality".into(),
                    TestRecord::below(ks_distance_to_cdf(&ecdf, |v| normal_cdf(v, mean, sd)), 0.05),
                );
                s.ecdfs.insert(format!("x[{}]", x.offsets[0]), ecdf.table());
                sidecar["estimate"] = serde_json::to_value(&est).unwrap_or(Value::Null);
            }
        }
        Kind::PsiSde => {
            let studies: Vec<&Vec<(f64, Vec<f64>)>> = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Psi(v) = o { Some(v) } else { None })
                .collect();
            for level in 0..=PSI_T0_HALVINGS as usize {
                for (j, c) in x.cs.iter().enumerate() {
                    let m: Moments = studies.iter().map(|st| st[level].1[j]).collect();
                    let name = if level == 0 {
                        format!("psi1[c={c}]")
                    } else {
                        format!("psi1[c={c},t0/{}]", 1u32 << level)
                    };
                    if level == 0 {
                        s.tests
                            .insert(format!("mean[c={c}]"), within_se(m.mean(), 2.0 * c, m.stderr(), 3.0));
                    }
                    s.add_statistic(name, m);
                }
            }
            for (i, &c) in x.cs.iter().enumerate() {
                let Some(j) = x.cs.iter().position(|&d| d == 2.0 * c) else {
                    continue;
                };
                if c == 0.0 || studies.is_empty() {
                    continue;
                }
                let base = Ecdf::new(studies.iter().map(|st| st[0].1[i]).collect());
                let diff = Ecdf::new(studies.iter().map(|st| st[0].1[j] - st[0].1[i]).collect());
                s.tests.insert(
                    format!("invariance[c={c}]"),
                    TestRecord::below(ks_distance(&base, &diff), 0.05),
                );
            }
            let breaches = setup.config.run.replicas - outputs.len();
            s.tests
                .insert("monotone".into(), TestRecord::below(breaches as f64, 1.0));
            sidecar["t0"] = json!(setup.config.numerics.t0);
            sidecar["D"] = json!(setup.constants.as_ref().map(|k| k.d));
        }
        Kind::Cbe => {
            let chains: Vec<&Vec<CbeSample>> = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Cbe(v) = o { Some(v) } else { None })
                .collect();
            let halved: Moments = chains
                .iter()
                .flat_map(|c| c.iter().flat_map(|smp| cbe_scaled_gaps(smp).gaps))
                .collect();
            s.add_statistic("halved_gap", halved);
            s.add_statistic(
                "acceptance",
                chains.iter().filter_map(|c| c.last().map(|smp| smp.acceptance_rate)).collect(),
            );
            let n = x.points.unwrap_or(2);
            let beta = setup.cbe_beta();
            if n == 2 {
                let gaps = Ecdf::new(
                    chains
                        .iter()
                        .flat_map(|c| c.iter().flat_map(cbe_circular_gaps))
                        .collect(),
                );
                let failure = std::cell::Cell::new(None);
                let ks = ks_distance_to_cdf(&gaps, |phi| {
                    cbe_two_point_gap_cdf(beta, phi).unwrap_or_else(|e| {
                        failure.set(Some(e));
                        f64::NAN
                    })
                });
                if let Some(e) = failure.take() {
                    return Err(e.into());
                }
                s.tests.insert("two_point_ks".into(), TestRecord::below(ks, 0.01));
                s.ecdfs.insert("circular_gap".into(), gaps.table());
            } else if halved.count > 0 {
                s.tests.insert(
                    "mean_gap".into(),
                    TestRecord::below((halved.mean() - PI).abs() / PI, 0.02),
                );
            }
            sidecar["beta"] = json!(beta);
            sidecar["points"] = json!(n);
            sidecar["schedule"] = serde_json::to_value(setup.cbe_schedule(n)).unwrap_or(Value::Null);
        }
        Kind::Uniformity => {
            let phases: Vec<f64> = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Phase { theta, .. } = o { Some(2.0 * theta) } else { None })
                .collect();
            s.add_statistic("phase", phases.iter().map(|&p| wrap_angle(p)).collect());
            if let Ok(u) = uniformity_test(&phases) {
                s.tests.insert("chi2".into(), TestRecord::below(u.chi2, u.chi2_threshold));
                s.tests.insert(
                    "max_modulus".into(),
                    TestRecord::below(u.max_modulus, 3.0 / (phases.len() as f64).sqrt()),
                );
                sidecar["moduli"] = json!(u.moduli);
            }
        }
        Kind::CharDecay => {
            let (before, after): (Vec<f64>, Vec<f64>) = outputs
                .iter()
                .filter_map(|(_, _, o)| if let Output::Pair(a, b) = o { Some((*a, *b)) } else { None })
                .unzip();
            let k = setup.constants.as_ref().expect("char_decay runs compute constants");
            let mut rows = Vec::new();
            if before.len() >= 2 {
                for &m in &x.orders {
                    let d = char_decay_test(&before, &after, m, x.t0, x.t, k)?;
                    s.tests
                        .insert(format!("decay[m={m}]"), within_se(d.distance, 0.0, d.stderr, 3.0));
                    rows.push(serde_json::to_value(&d).unwrap_or(Value::Null));
                }
            }
            s.add_statistic("increment", before.iter().zip(&after).map(|(b, a)| a - b).collect());
            sidecar["decay"] = Value::Array(rows);
        }
        Kind::Constants => {}
    }
    Ok(Aggregate { summary: s, sidecar })
}

fn constants_run(config: &ExperimentConfig) -> Result<(Vec<ConstantsReport>, String, EnsembleSummary), Error> {
    let model = config.potential()?;
    let mut reports = Vec::new();
    let mut csv = String::from(header(Kind::Constants));
    csv.push('\n');
    let mut worst_product: f64 = 0.0;
    let mut e_c_gamma = 0.0;
    for &e in &config.experiment.energies {
        let k = model.spectral_constants(e)?;
        worst_product = worst_product.max((k.beta_e * k.gamma_e - 1.0).abs());
        e_c_gamma = model.lyapunov(k.e_c);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            k.energy, k.c_e, k.gamma_e, k.beta_e, k.e_c, k.d, k.c3, k.c4
        );
        reports.push(k.report());
    }
    let mut s = EnsembleSummary::new(Kind::Constants.name());
    s.tests
        .insert("beta_gamma".into(), TestRecord::below(worst_product, 1e-12));
    s.tests
        .insert("gamma_at_e_c".into(), TestRecord::below((e_c_gamma - 0.5).abs(), 1e-10));
    Ok((reports, csv, s))
}

fn write(dir: &Path, name: &str, body: &[u8]) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| ExperimentError::io(&path, e))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("artifact types serialize");
    s.push(b'\n');
    s
}

/// Runs every replica, writes `<kind>.csv`, `<kind>.json`, `stats.json` and
/// `manifest.json` into the output directory, and returns the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest, ExperimentError> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(ExperimentError::Validation(problems));
    }
    let started = Instant::now();
    let dir = config.run.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let kind = config.kind;
    let workers = config.workers();
    let csv_name = format!("{}.csv", kind.name());
    let sidecar_name = format!("{}.json", kind.name());
    let mut artifacts = vec![csv_name.clone()];

    if kind == Kind::Constants {
        let (reports, csv, summary) = constants_run(config)?;
        write(dir, &csv_name, csv.as_bytes())?;
        write(dir, &sidecar_name, &to_json(&reports))?;
        write(dir, "stats.json", &to_json(&summary))?;
        artifacts.extend([sidecar_name, "stats.json".into()]);
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            schema: SCHEMA_VERSION,
            config: config.clone(),
            constants: reports,
            seeds: Vec::new(),
            artifacts,
            wall_time_s: started.elapsed().as_secs_f64(),
            workers,
            completed: 0,
            failures: Vec::new(),
            checks: summary.tests,
        };
        write(dir, "manifest.json", &to_json(&manifest))?;
        return Ok(manifest);
    }

    let setup = Setup::new(config)?;
    let first = config.run.first_replica;
    let seeds: Vec<ReplicaSeed> = (first..first + config.run.replicas)
        .map(|replica| ReplicaSeed {
            replica,
            seed: split_seed(config.run.master_seed, replica as u64),
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::io(dir, e))?;
    let results: Vec<Result<Output, Error>> =
        pool.install(|| seeds.par_iter().map(|s| setup.replica(s.seed)).collect());

    let mut csv = String::from(header(kind));
    csv.push('\n');
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (s, result) in seeds.iter().zip(results) {
        match result {
            Ok(out) => {
                rows(&mut csv, s.replica, &out, config);
                outputs.push((s.replica, s.seed, out));
            }
            Err(e) => failures.push(ReplicaFailure {
                replica: s.replica,
                seed: s.seed,
                error: e.to_string(),
            }),
        }
    }
    write(dir, &csv_name, csv.as_bytes())?;

    let Aggregate { summary, mut sidecar } = aggregate(&setup, &outputs)?;
    sidecar["failures"] = json!(failures.len());
    write(dir, &sidecar_name, &to_json(&sidecar))?;
    write(dir, "stats.json", &to_json(&summary))?;
    artifacts.extend([sidecar_name, "stats.json".into()]);

    if let Some(stride) = config.numerics.trajectory_stride {
        if kind.needs_decay() && !seeds.is_empty() {
            let (_, signal) = setup.signal(seeds[0].seed).map_err(ExperimentError::Core)?;
            let traj = signal.trajectory(setup.kappa0(), stride).map_err(Error::from)?;
            let mut body = Vec::new();
            traj.write_csv(&mut body).map_err(|e| ExperimentError::io(dir, e))?;
            write(dir, "trajectory.csv", &body)?;
            artifacts.push("trajectory.csv".into());
        }
    }

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        schema: SCHEMA_VERSION,
        config: config.clone(),
        constants: setup.constants.iter().map(|k| k.report()).collect(),
        seeds,
        artifacts,
        wall_time_s: started.elapsed().as_secs_f64(),
        workers,
        completed: outputs.len(),
        failures,
        checks: summary.tests,
    };
    write(dir, "manifest.json", &to_json(&manifest))?;
    Ok(manifest)
}
