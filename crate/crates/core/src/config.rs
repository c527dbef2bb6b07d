//! Flat TOML run configuration: one table of keys covering the model, potentials,
//! diffusion, initial state and every experiment's parameters.
//!
//! ```toml
//! model_kind = "classical"
//! mass = 1.0
//! dimension = 1
//! particle_count = 2
//! dt = 0.01
//! seed = 7
//! pairwise = "log_repulsive"
//! pair_k = 1.0
//! diffusion = "constant"
//! gamma = 1.0
//! initial_positions = [-1.0, 1.0]
//! horizon = 10.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::experiments::{
    AuditParams, CertifyParams, ErgodicityParams, Gamma3Params, NewtonianParams, SmallMassParams,
};
use crate::integrators::Specs;
use crate::lyapunov::{LyapunovSpec, SamplePlan, DEFAULT_A1, DEFAULT_A2};
use crate::potentials::{Confining, Pairwise, PotentialSpec};
use crate::state::{ModelConfig, ModelKind, PhaseState, DEFAULT_COLLISION_GUARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseKind {
    None,
    LogRepulsive,
    PowerRepulsive,
    LennardJones,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionKind {
    Constant,
    SinePerturbed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    Classical,
    RelativisticSingle,
    RelativisticMulti,
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn guard() -> f64 {
    DEFAULT_COLLISION_GUARD
}
fn yes() -> bool {
    true
}

/// Every key is optional except the model core (`model_kind`, `dimension`,
/// `particle_count`, `dt`, `seed`) and `initial_positions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model_kind: ModelKind,
    pub mass: Option<f64>,
    pub epsilon: Option<f64>,
    pub truncation_radius: Option<f64>,
    pub dimension: usize,
    pub particle_count: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default = "guard")]
    pub collision_guard: f64,
    #[serde(default = "yes")]
    pub noise_induced_drift: bool,

    #[serde(default = "one")]
    pub confining_lambda: f64,
    #[serde(default = "one")]
    pub confining_scale: f64,
    #[serde(default = "pairwise_none")]
    pub pairwise: PairwiseKind,
    pub pair_k: Option<f64>,
    pub pair_beta1: Option<f64>,
    pub lj_a: Option<f64>,
    pub lj_b: Option<f64>,

    #[serde(default = "diffusion_constant")]
    pub diffusion: DiffusionKind,
    pub gamma: Option<f64>,
    pub gamma0: Option<f64>,
    pub alpha: Option<f64>,
    pub kappa: Option<Vec<f64>>,

    pub initial_positions: Vec<f64>,
    /// Zeros when absent.
    pub initial_momenta: Option<Vec<f64>>,

    #[serde(default = "one")]
    pub horizon: f64,
    /// Time-series row stride for `simulate`.
    #[serde(default = "one_u32")]
    pub output_stride: u32,
    /// Report the first exit time from `|q_i| ≤ R`, `|q_i − q_j| ≥ 1/R` in `simulate`.
    pub exit_radius: Option<f64>,
    pub ensemble: Option<usize>,

    /// Defaults to 20% of the horizon.
    pub burn_in: Option<f64>,
    pub sample_stride: Option<u64>,
    pub checkpoints: Option<usize>,
    pub ks_threshold: Option<f64>,
    pub min_effective_samples: Option<f64>,
    pub decay_factor: Option<f64>,
    pub histogram_bins: Option<usize>,
    /// Attach a drift certificate to the ergodicity report.
    #[serde(default)]
    pub certify: bool,

    pub masses: Option<Vec<f64>>,
    pub base_dt: Option<f64>,
    pub dt_per_mass: Option<f64>,
    pub control_ratio: Option<f64>,

    pub epsilons: Option<Vec<f64>>,
    pub error_moment: Option<u32>,
    pub slope_low: Option<f64>,
    pub slope_high: Option<f64>,
    /// Newtonian runs compare truncated dynamics at this radius; untruncated when absent.
    pub newtonian_radius: Option<f64>,
    pub gamma3_max_ratio: Option<f64>,

    pub trials: Option<u64>,

    pub lyapunov: Option<LyapunovKind>,
    pub eps1: Option<f64>,
    pub lyapunov_kappa: Option<f64>,
    pub lyapunov_a1: Option<f64>,
    pub lyapunov_a2: Option<f64>,
    pub drift_alpha: Option<f64>,
    pub drift_power: Option<u32>,
    pub plan_seed: Option<u64>,

    pub audit_samples: Option<usize>,
    pub audit_radius_min: Option<f64>,
    pub audit_radius_max: Option<f64>,
}

fn pairwise_none() -> PairwiseKind {
    PairwiseKind::None
}
fn diffusion_constant() -> DiffusionKind {
    DiffusionKind::Constant
}

fn need(v: Option<f64>, key: &str, variant: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("`{key}` is required for {variant}")))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Builds every part once so errors surface before a run starts.
    pub fn validate(&self) -> Result<()> {
        let cfg = self.model()?;
        let specs = self.specs()?;
        specs.validate(&cfg)?;
        crate::state::validate_state(&self.initial_state()?, &cfg)?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be finite and >= 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            model_kind: self.model_kind,
            mass: self.mass,
            epsilon: self.epsilon,
            truncation_radius: self.truncation_radius,
            dimension: self.dimension,
            particle_count: self.particle_count,
            dt: self.dt,
            seed: self.seed,
            collision_guard: self.collision_guard,
            noise_induced_drift: self.noise_induced_drift,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn potentials(&self) -> Result<PotentialSpec<f64>> {
        let pair = match self.pairwise {
            PairwiseKind::None => Pairwise::None,
            PairwiseKind::LogRepulsive => Pairwise::LogRepulsive { k: need(self.pair_k, "pair_k", "log_repulsive")? },
            PairwiseKind::PowerRepulsive => Pairwise::PowerRepulsive {
                k: need(self.pair_k, "pair_k", "power_repulsive")?,
                beta1: need(self.pair_beta1, "pair_beta1", "power_repulsive")?,
            },
            PairwiseKind::LennardJones => Pairwise::LennardJones {
                a: need(self.lj_a, "lj_a", "lennard_jones")?,
                b: need(self.lj_b, "lj_b", "lennard_jones")?,
            },
        };
        PotentialSpec::new(Confining::PolyConfining { lambda: self.confining_lambda, scale: self.confining_scale }, pair)
    }

    pub fn diffusion_spec(&self) -> Result<DiffusionSpec<f64>> {
        let d = match self.diffusion {
            DiffusionKind::Constant => DiffusionSpec::Constant { gamma: self.gamma.unwrap_or(1.0) },
            DiffusionKind::SinePerturbed => DiffusionSpec::SinePerturbed {
                gamma0: need(self.gamma0, "gamma0", "sine_perturbed")?,
                alpha: need(self.alpha, "alpha", "sine_perturbed")?,
                kappa: self.kappa.clone().ok_or_else(|| Error::Config("`kappa` is required for sine_perturbed".into()))?,
            },
        };
        d.validate(self.dimension)?;
        Ok(d)
    }

    pub fn specs(&self) -> Result<Specs> {
        Ok(Specs::new(self.potentials()?, self.diffusion_spec()?))
    }

    pub fn initial_state(&self) -> Result<PhaseState<f64>> {
        let p = self.initial_momenta.clone().unwrap_or_else(|| vec![0.0; self.initial_positions.len()]);
        PhaseState::new(self.dimension, self.initial_positions.clone(), p)
    }

    fn ensemble_or(&self, default: usize) -> usize {
        self.ensemble.unwrap_or(default)
    }

    pub fn certify_params(&self) -> Result<CertifyParams> {
        let cfg = self.model()?;
        let specs = self.specs()?;
        let mut params = match self.lyapunov {
            None => CertifyParams::default_for(&cfg, &specs)
                .ok_or_else(|| Error::Config("no default Lyapunov function for this model; set `lyapunov`".into()))?,
            Some(kind) => {
                let (lyapunov, alpha) = match kind {
                    LyapunovKind::Classical => (LyapunovSpec::Classical { eps1: self.eps1 }, 1.0),
                    LyapunovKind::RelativisticSingle => {
                        (LyapunovSpec::RelativisticSingle { eps1: self.eps1, kappa1: self.lyapunov_kappa }, 0.5)
                    }
                    LyapunovKind::RelativisticMulti => (
                        LyapunovSpec::RelativisticMulti {
                            a1: self.lyapunov_a1.unwrap_or(DEFAULT_A1),
                            a2: self.lyapunov_a2.unwrap_or(DEFAULT_A2),
                            kappa: self.lyapunov_kappa,
                        },
                        2.0 / 3.0,
                    ),
                };
                CertifyParams { lyapunov, alpha, power: 1, plan: SamplePlan::default() }
            }
        };
        if let Some(a) = self.drift_alpha {
            params.alpha = a;
        }
        if let Some(p) = self.drift_power {
            params.power = p;
        }
        params.plan.seed = self.plan_seed.unwrap_or(self.seed);
        Ok(params)
    }

    pub fn ergodicity_params(&self) -> Result<ErgodicityParams> {
        let d = ErgodicityParams::default();
        Ok(ErgodicityParams {
            horizon: self.horizon,
            burn_in: self.burn_in.unwrap_or(0.2 * self.horizon),
            stride: self.sample_stride.unwrap_or(d.stride),
            ensemble: self.ensemble_or(d.ensemble),
            checkpoints: self.checkpoints.unwrap_or(d.checkpoints),
            ks_threshold: self.ks_threshold.unwrap_or(d.ks_threshold),
            min_effective_samples: self.min_effective_samples.unwrap_or(d.min_effective_samples),
            decay_factor: self.decay_factor.unwrap_or(d.decay_factor),
            histogram_bins: self.histogram_bins.unwrap_or(d.histogram_bins),
            certificate: if self.certify { Some(self.certify_params()?) } else { None },
        })
    }

    pub fn small_mass_params(&self) -> SmallMassParams {
        let d = SmallMassParams::default();
        SmallMassParams {
            masses: self.masses.clone().unwrap_or(d.masses),
            horizon: self.horizon,
            ensemble: self.ensemble_or(d.ensemble),
            base_dt: self.base_dt.unwrap_or(d.base_dt),
            dt_per_mass: self.dt_per_mass.unwrap_or(d.dt_per_mass),
            control_ratio: self.control_ratio.unwrap_or(d.control_ratio),
        }
    }

    pub fn newtonian_params(&self) -> NewtonianParams {
        let d = NewtonianParams::default();
        NewtonianParams {
            epsilons: self.epsilons.clone().unwrap_or(d.epsilons),
            truncation_radius: self.newtonian_radius,
            horizon: self.horizon,
            ensemble: self.ensemble_or(d.ensemble),
            moment: self.error_moment.unwrap_or(d.moment),
            slope_band: (self.slope_low.unwrap_or(d.slope_band.0), self.slope_high.unwrap_or(d.slope_band.1)),
        }
    }

    pub fn gamma3_params(&self) -> Gamma3Params {
        let d = Gamma3Params::default();
        Gamma3Params {
            epsilons: self.epsilons.clone().unwrap_or(d.epsilons),
            horizon: self.horizon,
            ensemble: self.ensemble_or(d.ensemble),
            max_ratio: self.gamma3_max_ratio.unwrap_or(d.max_ratio),
        }
    }

    pub fn audit_params(&self) -> AuditParams {
        let d = AuditParams::default();
        AuditParams {
            dimension: self.dimension,
            samples: self.audit_samples.unwrap_or(d.samples),
            radius_range: (
                self.audit_radius_min.unwrap_or(d.radius_range.0),
                self.audit_radius_max.unwrap_or(d.radius_range.1),
            ),
        }
    }

    pub fn lemma_trials(&self) -> u64 {
        self.trials.unwrap_or(10_000)
    }
}
