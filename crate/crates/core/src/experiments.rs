//! Ergodicity, small-mass and Newtonian-limit experiments, the inequality suites, and the
//! reports they produce.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::integrators::{
    coupled_simulate, simulate, step_count, FirstExit, MomentumSampler, Observer, RunningMax, Specs, TimeSeriesWriter,
};
use crate::lemmas;
use crate::linalg::SVec;
use crate::lyapunov::{certify_drift, DriftCertificate, LyapunovSpec, SamplePlan};
use crate::measures::{
    effective_sample_size, gamma3, histogram, ks_distance_cdf, ks_distance_samples, normal_cdf,
    sample_momentum_marginal, DensityKind, DistanceReport, HistogramRow, QuadratureCdf,
};
use crate::noise::NoiseStream;
use crate::potentials::{Confining, Pairwise, PotentialSpec};
use crate::state::{check_domain, BaseKind, ModelConfig, ModelKind, PhaseState};

type State = PhaseState<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    GreaterEq,
}

/// One thresholded outcome: `value relation threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::Less => value < threshold,
            Relation::LessEq => value <= threshold,
            Relation::Greater => value > threshold,
            Relation::GreaterEq => value >= threshold,
        };
        Self { name: name.into(), value, relation, threshold, passed }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::GreaterEq, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Everything needed to re-run: model, potentials, diffusion, initial state, parameters.
    pub config: Value,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    fn new(experiment: &str, config: Value, seeds: Vec<u64>) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            seeds,
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            passed: false,
            wall_clock_seconds: 0.0,
        }
    }

    fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics.insert(key.into(), serde_json::to_value(value).expect("serializable metric"));
    }

    fn finish(mut self, start: Instant) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self.wall_clock_seconds = start.elapsed().as_secs_f64();
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing field zeroed, for byte-level comparison of reruns.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        r.to_json()
    }
}

fn snapshot(cfg: &ModelConfig, specs: &Specs, initial: &State, params: &impl Serialize) -> Value {
    json!({ "model": cfg, "specs": specs, "initial": initial, "parameters": params })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub mean: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    pub lyapunov: LyapunovSpec,
    pub alpha: f64,
    #[serde(default = "one")]
    pub power: u32,
    #[serde(default)]
    pub plan: SamplePlan,
}

fn one() -> u32 {
    1
}

impl CertifyParams {
    /// The Lyapunov function and exponent matching `cfg`'s model, if there is one.
    pub fn default_for(cfg: &ModelConfig, specs: &Specs) -> Option<Self> {
        let (lyapunov, alpha) = match (cfg.model_kind, cfg.particle_count) {
            (ModelKind::Classical, _) => (LyapunovSpec::Classical { eps1: None }, 1.0),
            (ModelKind::Relativistic, 1) => (LyapunovSpec::RelativisticSingle { eps1: None, kappa1: None }, 0.5),
            (ModelKind::Relativistic, _) if specs.potentials.constants.validate(true).is_ok() => (
                LyapunovSpec::RelativisticMulti {
                    a1: crate::lyapunov::DEFAULT_A1,
                    a2: crate::lyapunov::DEFAULT_A2,
                    kappa: None,
                },
                2.0 / 3.0,
            ),
            _ => return None,
        };
        Some(Self { lyapunov, alpha, power: 1, plan: SamplePlan { seed: cfg.seed, ..SamplePlan::default() } })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityParams {
    pub horizon: f64,
    pub burn_in: f64,
    pub stride: u64,
    pub ensemble: usize,
    pub checkpoints: usize,
    pub ks_threshold: f64,
    pub min_effective_samples: f64,
    /// Final KS must be below this fraction of the first checkpoint's.
    pub decay_factor: f64,
    pub histogram_bins: usize,
    pub certificate: Option<CertifyParams>,
}

impl Default for ErgodicityParams {
    fn default() -> Self {
        Self {
            horizon: 1e4,
            burn_in: 2e3,
            stride: 10,
            ensemble: 1,
            checkpoints: 6,
            ks_threshold: 0.02,
            min_effective_samples: 0.0,
            decay_factor: 0.5,
            histogram_bins: 0,
            certificate: None,
        }
    }
}

/// Domain violations (ordering in d = 1) along the path.
#[derive(Default)]
struct DomainWatch {
    violations: u64,
}

impl Observer for DomainWatch {
    fn observe(&mut self, _step: u64, state: &State) -> Result<()> {
        if check_domain(state, 0.0).is_err() {
            self.violations += 1;
        }
        Ok(())
    }
}

struct PathOutcome {
    samples: Vec<f64>,
    collision_rejected: u64,
    substepped: u64,
    domain_violations: u64,
    steps: u64,
}

/// Long-run sampling of particle 0's first momentum coordinate against the exact marginal
/// of the invariant measure, with KS distances at geometrically spaced checkpoints.
pub fn run_ergodicity(
    cfg: &ModelConfig,
    specs: &Specs,
    initial: &State,
    params: &ErgodicityParams,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    specs.validate(cfg)?;
    let density = match cfg.model_kind {
        ModelKind::Classical => DensityKind::GibbsBoltzmann { mass: cfg.mass_or_err()? },
        ModelKind::Relativistic => DensityKind::MaxwellJuttner { epsilon: cfg.epsilon_or_err()? },
        k => return Err(Error::Kind { op: "run_ergodicity", kind: k.name().into() }),
    };
    if !(params.burn_in >= 0.0 && params.burn_in < params.horizon) || params.ensemble == 0 || params.checkpoints == 0 {
        return Err(Error::Config("ergodicity needs 0 <= burn_in < horizon, ensemble >= 1, checkpoints >= 1".into()));
    }
    let stride = params.stride.max(1);
    let burn_steps = step_count(params.burn_in, cfg.dt)?;
    let width = cfg.particle_count * cfg.dimension;
    let outcomes: Vec<Result<PathOutcome>> = (0..params.ensemble as u64)
        .into_par_iter()
        .map(|path| {
            let mut noise = NoiseStream::new(cfg.seed, path, width, cfg.dt);
            let mut sampler = MomentumSampler::new(0, 0, burn_steps, stride);
            let mut watch = DomainWatch::default();
            let sum = simulate(initial, cfg, specs, params.horizon, &mut noise, &mut [&mut sampler, &mut watch])?;
            Ok(PathOutcome {
                samples: sampler.samples,
                collision_rejected: sum.collision_rejected,
                substepped: sum.substepped,
                domain_violations: watch.violations,
                steps: sum.steps,
            })
        })
        .collect();
    let outcomes: Vec<PathOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let reference_name;
    let reference: Box<dyn Fn(&[f64]) -> Result<DistanceReport>> = match density {
        DensityKind::GibbsBoltzmann { mass } => {
            reference_name = format!("gaussian(0, 1/{mass})");
            let cdf = normal_cdf(0.0, 1.0 / mass.sqrt());
            let name = reference_name.clone();
            Box::new(move |x| ks_distance_cdf(x, &cdf, &name))
        }
        DensityKind::MaxwellJuttner { epsilon } if cfg.dimension == 1 => {
            reference_name = format!("maxwell_juttner(eps={epsilon}) quadrature cdf");
            let q = QuadratureCdf::maxwell_juttner(epsilon);
            let name = reference_name.clone();
            Box::new(move |x| ks_distance_cdf(x, |t| q.cdf(t), &name))
        }
        DensityKind::MaxwellJuttner { epsilon } => {
            reference_name = format!("maxwell_juttner(eps={epsilon}) exact samples, component 0");
            let name = reference_name.clone();
            let (d, seed) = (cfg.dimension, cfg.seed);
            Box::new(move |x| {
                let exact = sample_momentum_marginal(&density, d, x.len(), seed ^ 0x5eed)?;
                let comp: Vec<f64> = exact.samples.iter().map(|v| v[0]).collect();
                ks_distance_samples(x, &comp, &name)
            })
        }
    };

    let mut checkpoints = Vec::new();
    let span = params.horizon - params.burn_in;
    for k in 1..=params.checkpoints {
        let t = params.burn_in + span * 2f64.powi(k as i32 - params.checkpoints as i32);
        let per_path = ((step_count(t, cfg.dt)?.saturating_sub(burn_steps)) / stride) as usize;
        let pooled: Vec<f64> = outcomes.iter().flat_map(|o| o.samples[..per_path.min(o.samples.len())].to_vec()).collect();
        if pooled.len() < crate::measures::MIN_KS_SAMPLES {
            continue;
        }
        let ks = reference(&pooled)?;
        checkpoints.push(json!({ "time": t, "samples": pooled.len(), "ks": ks.value }));
    }
    let pooled: Vec<f64> = outcomes.iter().flat_map(|o| o.samples.clone()).collect();
    let final_ks = reference(&pooled)?;
    let ess: f64 = outcomes.iter().map(|o| effective_sample_size(&o.samples)).sum();

    let mut report = ExperimentReport::new(
        &format!("ergodicity_{}", cfg.model_kind.name()),
        snapshot(cfg, specs, initial, params),
        (0..params.ensemble as u64).map(|p| cfg.seed ^ p).collect(),
    );
    report.metric("final_distance", &final_ks);
    report.metric("checkpoints", &checkpoints);
    report.metric("effective_samples", ess);
    report.metric("samples", pooled.len());
    report.metric("steps", outcomes.iter().map(|o| o.steps).sum::<u64>());
    report.metric("substepped", outcomes.iter().map(|o| o.substepped).sum::<u64>());
    let rejected: u64 = outcomes.iter().map(|o| o.collision_rejected).sum();
    let violations: u64 = outcomes.iter().map(|o| o.domain_violations).sum();
    report.metric("collision_rejected", rejected);
    report.metric("domain_violations", violations);
    report.checks.push(Check::new("final_ks", final_ks.value, Relation::Less, params.ks_threshold));
    report.checks.push(Check::new("effective_samples", ess, Relation::GreaterEq, params.min_effective_samples));
    if let (Some(first), true) = (checkpoints.first(), checkpoints.len() >= 2) {
        let first_ks = first["ks"].as_f64().unwrap_or(f64::NAN);
        report.checks.push(Check::new("ks_decay", final_ks.value, Relation::Less, params.decay_factor * first_ks));
    }
    report.checks.push(Check::new("collision_rejected", rejected as f64, Relation::LessEq, 0.0));
    report.checks.push(Check::new("domain_violations", violations as f64, Relation::LessEq, 0.0));
    if params.histogram_bins > 0 {
        let lim = pooled.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rows: Vec<HistogramRow> = histogram(&pooled, -lim, lim * (1.0 + 1e-12), params.histogram_bins)?;
        report.metric("histogram", &rows);
    }
    if let Some(cp) = &params.certificate {
        let cert = certify_drift(&cp.lyapunov, cfg, specs, cp.alpha, cp.power, &cp.plan)?;
        report.checks.push(Check::flag("drift_certificate", cert.valid));
        report.metric("drift_certificate", &cert);
    }
    Ok(report.finish(start))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallMassParams {
    /// Descending.
    pub masses: Vec<f64>,
    pub horizon: f64,
    pub ensemble: usize,
    /// Coarsest step; every config steps at `base_dt·2^{−l}`.
    pub base_dt: f64,
    /// Classical runs use the largest dyadic step not above `mass·dt_per_mass`.
    pub dt_per_mass: f64,
    pub control_ratio: f64,
}

impl Default for SmallMassParams {
    fn default() -> Self {
        Self {
            masses: vec![1e-1, 1e-2, 1e-3],
            horizon: 1.0,
            ensemble: 64,
            base_dt: 2f64.powi(-10),
            dt_per_mass: 1.0 / 20.0,
            control_ratio: 2.0,
        }
    }
}

fn dyadic_below(base: f64, limit: f64) -> f64 {
    let mut dt = base;
    while dt > limit {
        dt /= 2.0;
    }
    dt
}

/// Classical runs at each mass coupled to the overdamped limit (and to the limit without
/// the noise-induced drift) on one Brownian path; reports `sup_t|x^m − q|` quantiles.
pub fn run_small_mass(
    cfg: &ModelConfig,
    specs: &Specs,
    initial: &State,
    params: &SmallMassParams,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.model_kind != ModelKind::Classical {
        return Err(Error::Kind { op: "run_small_mass", kind: cfg.model_kind.name().into() });
    }
    if params.masses.is_empty() || params.masses.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("masses must be a nonempty descending list".into()));
    }
    if params.ensemble == 0 || !(params.base_dt > 0.0) || !(params.dt_per_mass > 0.0) {
        return Err(Error::Config("small-mass needs ensemble >= 1, base_dt > 0, dt_per_mass > 0".into()));
    }
    let mut cfgs: Vec<ModelConfig> = params
        .masses
        .iter()
        .map(|&m| ModelConfig { mass: Some(m), dt: dyadic_below(params.base_dt, m * params.dt_per_mass), ..cfg.clone() })
        .collect();
    for c in &cfgs {
        specs.validate(c)?;
    }
    let finest = cfgs.iter().map(|c| c.dt).fold(params.base_dt, f64::min);
    let od = ModelConfig {
        model_kind: ModelKind::Overdamped,
        mass: None,
        dt: finest,
        noise_induced_drift: true,
        ..cfg.clone()
    };
    let control = ModelConfig { noise_induced_drift: false, ..od.clone() };
    let nm = cfgs.len();
    cfgs.push(od);
    cfgs.push(control);
    // Anchor the base grid at base_dt even when every mass refines it.
    let anchor = ModelConfig { dt: params.base_dt, ..cfgs[nm].clone() };
    cfgs.push(anchor);
    let all_specs = vec![specs.clone(); cfgs.len()];
    let mut pairs: Vec<(usize, usize)> = (0..nm).map(|k| (k, nm)).collect();
    pairs.push((nm - 1, nm + 1));

    let runs: Vec<Result<Vec<f64>>> = (0..params.ensemble as u64)
        .into_par_iter()
        .map(|path| {
            let run = coupled_simulate(initial, &cfgs, &all_specs, params.horizon, &pairs, path)?;
            Ok(run.distances.iter().map(|d| d.sup_dq).collect())
        })
        .collect();
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;

    let mut report = ExperimentReport::new("small_mass", snapshot(cfg, specs, initial, params), vec![cfg.seed]);
    let mut medians = Vec::new();
    let mut per_mass = Vec::new();
    for k in 0..nm {
        let errs: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let q = Quantiles::of(&errs);
        medians.push(q.median);
        per_mass.push(json!({ "mass": params.masses[k], "dt": cfgs[k].dt, "sup_error": q }));
    }
    let control_errs: Vec<f64> = runs.iter().map(|r| r[nm]).collect();
    let cq = Quantiles::of(&control_errs);
    report.metric("per_mass", &per_mass);
    report.metric("overdamped_dt", finest);
    report.metric("control_sup_error_smallest_mass", &cq);
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    report.checks.push(Check::flag("median_error_strictly_decreasing", decreasing));
    let ratio = cq.median / medians[nm - 1];
    report.metric("control_ratio", ratio);
    if matches!(specs.diffusion, DiffusionSpec::SinePerturbed { .. }) {
        report.checks.push(Check::new("control_ratio", ratio, Relation::GreaterEq, params.control_ratio));
    }
    Ok(report.finish(start))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonianParams {
    /// Descending.
    pub epsilons: Vec<f64>,
    /// Truncated mode when set; the slope is only fitted in truncated mode.
    pub truncation_radius: Option<f64>,
    pub horizon: f64,
    pub ensemble: usize,
    /// Error moment `n` in `E sup|Δ|^n`.
    pub moment: u32,
    pub slope_band: (f64, f64),
}

impl Default for NewtonianParams {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-1, 1e-2, 1e-3],
            truncation_radius: Some(5.0),
            horizon: 1.0,
            ensemble: 64,
            moment: 2,
            slope_band: (0.7, 1.3),
        }
    }
}

/// Relativistic runs at each ε coupled to the Newtonian (classical-limit) dynamics.
pub fn run_newtonian(
    cfg: &ModelConfig,
    specs: &Specs,
    initial: &State,
    params: &NewtonianParams,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.model_kind.base() != BaseKind::Relativistic {
        return Err(Error::Kind { op: "run_newtonian", kind: cfg.model_kind.name().into() });
    }
    if params.epsilons.is_empty() || params.epsilons.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("epsilons must be a nonempty descending list".into()));
    }
    if params.ensemble == 0 || params.moment == 0 {
        return Err(Error::Config("newtonian needs ensemble >= 1 and moment >= 1".into()));
    }
    let (rel_kind, lim_kind) = match params.truncation_radius {
        Some(_) => (ModelKind::RelativisticTruncated, ModelKind::ClassicalLimitTruncated),
        None => (ModelKind::Relativistic, ModelKind::ClassicalLimit),
    };
    let base = ModelConfig { model_kind: rel_kind, truncation_radius: params.truncation_radius, ..cfg.clone() };
    let mut cfgs: Vec<ModelConfig> = params.epsilons.iter().map(|&e| ModelConfig { epsilon: Some(e), ..base.clone() }).collect();
    cfgs.push(ModelConfig { model_kind: lim_kind, epsilon: None, ..base.clone() });
    for c in &cfgs {
        specs.validate(c)?;
    }
    let ne = params.epsilons.len();
    let all_specs = vec![specs.clone(); cfgs.len()];
    let pairs: Vec<(usize, usize)> = (0..ne).map(|k| (k, ne)).collect();
    let runs: Vec<Result<Vec<f64>>> = (0..params.ensemble as u64)
        .into_par_iter()
        .map(|path| {
            let run = coupled_simulate(initial, &cfgs, &all_specs, params.horizon, &pairs, path)?;
            Ok(run.distances.iter().map(|d| d.sup_joint.powi(params.moment as i32)).collect())
        })
        .collect();
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;

    let truncated = params.truncation_radius.is_some();
    let mut report = ExperimentReport::new(
        if truncated { "newtonian_truncated" } else { "newtonian" },
        snapshot(cfg, specs, initial, params),
        vec![cfg.seed],
    );
    let mut medians = Vec::new();
    let mut per_eps = Vec::new();
    for k in 0..ne {
        let errs: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let q = Quantiles::of(&errs);
        medians.push(q.median);
        per_eps.push(json!({ "epsilon": params.epsilons[k], "sup_error_moment": q }));
    }
    report.metric("per_epsilon", &per_eps);
    let mut distinct = params.epsilons.clone();
    distinct.dedup();
    let degenerate = distinct.len() != params.epsilons.len() || distinct.len() < 2;
    report.metric("degenerate_sweep", degenerate);
    if truncated {
        let slope = if degenerate { None } else { log_log_slope(&params.epsilons, &medians) };
        report.metric("slope", slope);
        report.checks.push(Check::flag("sweep_nondegenerate", !degenerate));
        let s = slope.unwrap_or(f64::NAN);
        report.checks.push(Check::new("slope_lower", s, Relation::GreaterEq, params.slope_band.0));
        report.checks.push(Check::new("slope_upper", s, Relation::LessEq, params.slope_band.1));
    } else {
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        report.checks.push(Check::flag("median_error_decreasing", decreasing));
    }
    Ok(report.finish(start))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma3Params {
    pub epsilons: Vec<f64>,
    pub horizon: f64,
    pub ensemble: usize,
    /// Largest allowed ratio of the ensemble means across ε.
    pub max_ratio: f64,
}

impl Default for Gamma3Params {
    fn default() -> Self {
        Self { epsilons: vec![1.0, 0.1, 0.01], horizon: 1.0, ensemble: 32, max_ratio: 2.0 }
    }
}

/// Ensemble mean of `sup_{[0,T]} Γ₃` along single-particle relativistic paths, per ε.
pub fn run_gamma3_uniformity(
    cfg: &ModelConfig,
    specs: &Specs,
    initial: &State,
    params: &Gamma3Params,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.model_kind != ModelKind::Relativistic || cfg.particle_count != 1 {
        return Err(Error::Config("Γ₃ uniformity needs the relativistic model with N = 1".into()));
    }
    if params.epsilons.is_empty() || params.ensemble == 0 {
        return Err(Error::Config("Γ₃ uniformity needs epsilons and ensemble >= 1".into()));
    }
    let mut means = Vec::new();
    let mut per_eps = Vec::new();
    for &eps in &params.epsilons {
        let c = ModelConfig { epsilon: Some(eps), ..cfg.clone() };
        specs.validate(&c)?;
        let sups: Vec<Result<f64>> = (0..params.ensemble as u64)
            .into_par_iter()
            .map(|path| {
                let mut noise = NoiseStream::new(c.seed, path, c.dimension, c.dt);
                let mut obs = RunningMax::new(|s: &State| gamma3(s, &specs.potentials, eps));
                simulate(initial, &c, specs, params.horizon, &mut noise, &mut [&mut obs])?;
                Ok(obs.max)
            })
            .collect();
        let sups: Vec<f64> = sups.into_iter().collect::<Result<_>>()?;
        let q = Quantiles::of(&sups);
        means.push(q.mean);
        per_eps.push(json!({ "epsilon": eps, "sup_gamma3": q }));
    }
    let ratio = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / means.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut report = ExperimentReport::new("gamma3_uniformity", snapshot(cfg, specs, initial, params), vec![cfg.seed]);
    report.metric("per_epsilon", &per_eps);
    report.metric("mean_ratio", ratio);
    report.checks.push(Check::new("mean_ratio", ratio, Relation::Less, params.max_ratio));
    Ok(report.finish(start))
}

pub const LEMMA_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaTally {
    pub trials: u64,
    pub violations: u64,
    /// Largest `(rhs − lhs)/max(|lhs|, |rhs|)` seen.
    pub worst_relative_gap: f64,
}

impl LemmaTally {
    /// Records `lhs ≥ rhs`.
    fn at_least(&mut self, lhs: f64, rhs: f64) {
        self.trials += 1;
        let scale = lhs.abs().max(rhs.abs());
        let gap = if scale > 0.0 { (rhs - lhs) / scale } else { 0.0 };
        if !(lhs.is_finite() && rhs.is_finite()) || gap > LEMMA_TOLERANCE {
            self.violations += 1;
        }
        if gap.is_finite() {
            self.worst_relative_gap = self.worst_relative_gap.max(gap);
        }
    }

    fn merge(&mut self, other: &LemmaTally) {
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_relative_gap = self.worst_relative_gap.max(other.worst_relative_gap);
    }
}

fn trial_rng(seed: u64, lemma: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&lemma.to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> SVec<f64> {
    loop {
        let mut v = SVec::zeros(d);
        for k in 0..d {
            v[k] = rng.sample(StandardNormal);
        }
        if v.norm() > 1e-9 {
            return v.scale(1.0 / v.norm());
        }
    }
}

/// `N ∈ {2..6}` points in `d ∈ {1,2,3}` built by a random walk whose step lengths are
/// log-uniform in `[10⁻⁶, 10³]`.
fn random_configuration(rng: &mut ChaCha8Rng) -> Vec<SVec<f64>> {
    loop {
        let n = rng.random_range(2..=6usize);
        let d = rng.random_range(1..=3usize);
        let mut x = vec![unit(rng, d).scale(log_uniform(rng, 1e-3, 1e2))];
        for _ in 1..n {
            let step = unit(rng, d).scale(log_uniform(rng, 1e-6, 1e3));
            let next = *x.last().expect("nonempty") + step;
            x.push(next);
        }
        let distinct = (0..n).all(|i| ((i + 1)..n).all(|j| (x[i] - x[j]).norm() > 0.0));
        if distinct {
            return x;
        }
    }
}

const LEMMA_NAMES: [&str; 10] = [
    "A1",
    "A2_i",
    "A2_ii",
    "A3",
    "gradG_sandwich_lower",
    "gradG_sandwich_upper",
    "spectral_sqrt_momentum",
    "spectral_sqrt_radius",
    "spectral_top",
    "gamma3_quadratic_variation",
];

fn lemma_trial(seed: u64, trial: u64) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::new();
    let mut rng = trial_rng(seed, 1, trial);
    let x = random_configuration(&mut rng);
    let s = rng.random::<f64>() * 4.0;
    let (l, r) = lemmas::lemma_a1(&x, s)?;
    out.push((0, l, r));
    let (l, r, _) = lemmas::lemma_a2(&x, s)?;
    out.push((1, l, r));
    let s01 = rng.random::<f64>();
    let (l, _, r) = lemmas::lemma_a2(&x, s01)?;
    out.push((2, l, r));
    let gamma = 1.0 - rng.random::<f64>();
    let (l, r) = lemmas::lemma_a3(&x, gamma, s)?;
    out.push((3, l, r));

    let mut rng = trial_rng(seed, 2, trial);
    let x = random_configuration(&mut rng);
    let k = log_uniform(&mut rng, 0.1, 10.0);
    let pair = if rng.random::<bool>() {
        Pairwise::LogRepulsive { k }
    } else {
        Pairwise::PowerRepulsive { k, beta1: 1.0 + 2.0 * (1.0 - rng.random::<f64>()) }
    };
    let pot = PotentialSpec::new(Confining::PolyConfining { lambda: 1.0, scale: 1.0 }, pair)?;
    let sw = pot.grad_g_sandwich(x.len()).expect("log and power variants have a sandwich");
    let (lhs, sum) = lemmas::grad_g_sums(&x, &pot)?;
    out.push((4, lhs, sw.a7 * sum - sw.a8));
    out.push((5, sw.a9 * sum + sw.a10, lhs));

    let mut rng = trial_rng(seed, 3, trial);
    let d = rng.random_range(1..=3usize);
    let eps = log_uniform(&mut rng, 1e-4, 10.0);
    let radius = 1.0 + 19.0 * rng.random::<f64>();
    let p = unit(&mut rng, d).scale(log_uniform(&mut rng, 1e-3, 2.0 * (radius + 1.0)));
    let c = lemmas::spectral_bound(eps, &p, radius);
    out.push((6, c.bound_momentum, c.sqrt_deviation));
    out.push((7, c.bound_radius, c.sqrt_deviation));
    out.push((8, c.bound_top, c.top));

    let mut rng = trial_rng(seed, 4, trial);
    let d = rng.random_range(1..=3usize);
    let eps = log_uniform(&mut rng, 1e-4, 1.0);
    let lambda = 1.0 + 2.0 * rng.random::<f64>();
    let pair = match rng.random_range(0..3u32) {
        0 => Pairwise::None,
        // k ≤ 1 keeps U + G ≥ 0 for the log variant.
        1 => Pairwise::LogRepulsive { k: rng.random::<f64>() },
        _ => Pairwise::PowerRepulsive { k: log_uniform(&mut rng, 0.1, 10.0), beta1: 1.0 + rng.random::<f64>() },
    };
    let pot = PotentialSpec::new(Confining::PolyConfining { lambda, scale: 1.0 }, pair)?;
    let q = unit(&mut rng, d).scale(log_uniform(&mut rng, 1e-3, 1e2));
    let p = unit(&mut rng, d).scale(log_uniform(&mut rng, 1e-3, 1e3));
    let st = State::new(d, q.as_slice().to_vec(), p.as_slice().to_vec())?;
    let (rate, bound) = lemmas::gamma3_qv_bound(&st, &pot, eps)?;
    out.push((9, bound, rate));
    Ok(out)
}

/// Random-trial checks of the pairwise-sum inequalities, the ∇G sandwich, the truncated
/// relativistic spectrum bounds and the Γ₃ quadratic-variation bound.
pub fn lemma_suite(seed: u64, trials: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let per_trial: Vec<Result<Vec<(usize, f64, f64)>>> = (0..trials).into_par_iter().map(|t| lemma_trial(seed, t)).collect();
    let mut tallies = vec![LemmaTally::default(); LEMMA_NAMES.len()];
    for r in per_trial {
        let mut local = vec![LemmaTally::default(); LEMMA_NAMES.len()];
        for (k, lhs, rhs) in r? {
            local[k].at_least(lhs, rhs);
        }
        for (t, l) in tallies.iter_mut().zip(&local) {
            t.merge(l);
        }
    }
    let mut report = ExperimentReport::new(
        "lemmas",
        json!({ "seed": seed, "trials": trials, "relative_tolerance": LEMMA_TOLERANCE }),
        vec![seed],
    );
    for (name, t) in LEMMA_NAMES.iter().zip(&tallies) {
        report.metric(name, t);
        report.checks.push(Check::new(format!("{name}_violations"), t.violations as f64, Relation::LessEq, 0.0));
    }
    Ok(report.finish(start))
}

/// Drift certificate as a report.
pub fn run_certify(cfg: &ModelConfig, specs: &Specs, params: &CertifyParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let cert: DriftCertificate = certify_drift(&params.lyapunov, cfg, specs, params.alpha, params.power, &params.plan)?;
    let mut report = ExperimentReport::new(
        "certify_drift",
        json!({ "model": cfg, "specs": specs, "parameters": params }),
        vec![params.plan.seed],
    );
    report.checks.push(Check::new("c", cert.c, Relation::Greater, 0.0));
    report.checks.push(Check::new("max_residual", cert.max_residual, Relation::LessEq, 0.0));
    report.metric("certificate", &cert);
    Ok(report.finish(start))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub dimension: usize,
    pub samples: usize,
    pub radius_range: (f64, f64),
}

impl Default for AuditParams {
    fn default() -> Self {
        Self { dimension: 1, samples: 10_000, radius_range: (1e-6, 1e3) }
    }
}

/// Growth and singularity assumptions of the potentials over random samples.
pub fn run_audit(specs: &Specs, params: &AuditParams, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let audit = specs.potentials.audit_assumptions(params.dimension, params.samples, params.radius_range, seed)?;
    let mut report = ExperimentReport::new(
        "audit_potentials",
        json!({ "specs": specs, "parameters": params, "seed": seed }),
        vec![seed],
    );
    for c in &audit.checks {
        report.checks.push(Check::new(format!("{}_violations", c.name), c.violations as f64, Relation::LessEq, 0.0));
    }
    report.metric("audit", &audit);
    Ok(report.finish(start))
}

/// One trajectory on stream 0, written as CSV rows (`time,q…,p…`) every `stride` steps.
/// With `exit_radius` the first exit time from `{|q_i| ≤ R, |q_i − q_j| ≥ 1/R}` is reported.
pub fn run_simulate<W: std::io::Write>(
    cfg: &ModelConfig,
    specs: &Specs,
    initial: &State,
    horizon: f64,
    stride: u64,
    exit_radius: Option<f64>,
    out: W,
) -> Result<(ExperimentReport, W)> {
    let start = Instant::now();
    let mut noise = NoiseStream::new(cfg.seed, 0, cfg.particle_count * cfg.dimension, cfg.dt);
    let mut writer = TimeSeriesWriter::new(out, stride);
    let mut watch = DomainWatch::default();
    let mut exit = FirstExit::new(exit_radius.unwrap_or(f64::INFINITY));
    // A zero horizon yields a header with no rows.
    let sum = if step_count(horizon, cfg.dt)? == 0 {
        writer.write_header(cfg.particle_count, cfg.dimension)?;
        simulate(initial, cfg, specs, horizon, &mut noise, &mut [&mut watch, &mut exit])?
    } else {
        simulate(initial, cfg, specs, horizon, &mut noise, &mut [&mut writer, &mut watch, &mut exit])?
    };
    let mut report = ExperimentReport::new(
        "simulate",
        snapshot(cfg, specs, initial, &json!({ "horizon": horizon, "stride": stride, "exit_radius": exit_radius })),
        vec![cfg.seed],
    );
    report.metric("summary", &sum);
    report.metric("rows", writer.rows);
    if exit_radius.is_some() {
        report.metric("first_exit_time", exit.time);
    }
    if let Some(fin) = &sum.final_state {
        report.metric("final_state", fin);
    }
    report.checks.push(Check::new("domain_violations", watch.violations as f64, Relation::LessEq, 0.0));
    Ok((report.finish(start), writer.into_inner()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit() {
        let x = [1e-1, 1e-2, 1e-3];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
        assert!(log_log_slope(&[0.1, 0.1], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn quantiles() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!(q.median, 3.0);
        assert_eq!(q.q25, 2.0);
        assert_eq!(q.mean, 3.0);
    }

    #[test]
    fn small_lemma_suite_is_clean_and_deterministic() {
        let a = lemma_suite(3, 300).unwrap();
        assert!(a.passed, "{}", a.to_json());
        let b = lemma_suite(3, 300).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
    }

    #[test]
    fn checks() {
        assert!(Check::new("x", 1.0, Relation::Less, 2.0).passed);
        assert!(!Check::new("x", f64::NAN, Relation::Less, 2.0).passed);
        assert!(!Check::flag("f", false).passed);
    }
}
