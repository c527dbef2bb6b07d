//! Euler–Maruyama time stepping for all model kinds, with step halving near collisions
//! and coupled runs on a shared Brownian path.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diffusion::{truncated_d, DiffusionSpec};
use crate::error::{Error, Result};
use crate::linalg::{SMat, SVec};
use crate::noise::NoiseStream;
use crate::potentials::{ForceField, PotentialSpec};
use crate::state::{check_domain, BaseKind, ModelConfig, PhaseState};

pub const MAX_HALVINGS: u32 = 20;

type State = PhaseState<f64>;

/// Potentials plus the classical diffusion field; relativistic kinds build `D(p)` from
/// the config's ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Specs {
    pub potentials: PotentialSpec<f64>,
    pub diffusion: DiffusionSpec<f64>,
}

impl Specs {
    pub fn new(potentials: PotentialSpec<f64>, diffusion: DiffusionSpec<f64>) -> Self {
        Self { potentials, diffusion }
    }

    pub fn diffusion_for(&self, cfg: &ModelConfig) -> Result<DiffusionSpec<f64>> {
        match cfg.model_kind.base() {
            BaseKind::Relativistic => Ok(DiffusionSpec::Relativistic { epsilon: cfg.epsilon_or_err()? }),
            BaseKind::ClassicalLimit => Ok(DiffusionSpec::Constant { gamma: 1.0 }),
            _ => {
                if !self.diffusion.is_classical() {
                    return Err(Error::Config(format!(
                        "{} needs a classical diffusion field",
                        cfg.model_kind.name()
                    )));
                }
                Ok(self.diffusion.clone())
            }
        }
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        cfg.validate()?;
        self.potentials.validate()?;
        self.diffusion_for(cfg)?.validate(cfg.dimension)
    }
}

/// Time derivative of positions and momenta (velocities for the classical model).
#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub dq: Vec<SVec<f64>>,
    pub dp: Vec<SVec<f64>>,
}

fn guard_state(state: &State, guard: f64) -> Result<()> {
    check_domain(state, guard)
}

/// `dx_i/dt = v_i`, `m dv_i/dt = −∇U(x_i) − Σ_{j≠i}∇G(x_i−x_j) − D(x_i)v_i`.
pub fn drift_classical(
    state: &State,
    potentials: &PotentialSpec<f64>,
    diffusion: &DiffusionSpec<f64>,
    m: f64,
    guard: f64,
) -> Result<Drift> {
    classical_drift_truncated(state, potentials, diffusion, m, guard, None)
}

fn classical_drift_truncated(
    state: &State,
    potentials: &PotentialSpec<f64>,
    diffusion: &DiffusionSpec<f64>,
    m: f64,
    guard: f64,
    truncation: Option<f64>,
) -> Result<Drift> {
    guard_state(state, guard)?;
    let grad = ForceField::new(potentials, false).truncated(truncation).gradient(state)?;
    let n = state.particles();
    let mut dq = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    for i in 0..n {
        let (x, v) = (state.q(i), state.p(i));
        dq.push(v);
        let friction = diffusion.d_matrix(&x).mul_vec(&v);
        dp.push((-grad[i] - friction).scale(1.0 / m));
    }
    Ok(Drift { dq, dp })
}

/// `dq_i/dt = p_i/√(1+ε|p_i|²)`,
/// `dp_i/dt = −D(p_i)p_i/√(1+ε|p_i|²) + div D(p_i) − ∇U(q_i) − Σ_{j≠i}∇G(q_i−q_j)`.
pub fn drift_relativistic(
    state: &State,
    potentials: &PotentialSpec<f64>,
    epsilon: f64,
    anchored: bool,
    guard: f64,
) -> Result<Drift> {
    relativistic_drift_truncated(state, potentials, epsilon, anchored, guard, None)
}

fn relativistic_drift_truncated(
    state: &State,
    potentials: &PotentialSpec<f64>,
    epsilon: f64,
    anchored: bool,
    guard: f64,
    truncation: Option<f64>,
) -> Result<Drift> {
    guard_state(state, guard)?;
    let diffusion = DiffusionSpec::Relativistic { epsilon };
    let grad = ForceField::new(potentials, anchored).truncated(truncation).gradient(state)?;
    let n = state.particles();
    let mut dq = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    for i in 0..n {
        let p = state.p(i);
        let s = (1.0 + epsilon * p.norm_sq()).sqrt();
        dq.push(p.scale(1.0 / s));
        let friction = diffusion.d_matrix(&p).mul_vec(&p).scale(1.0 / s);
        dp.push(diffusion.div_d(&p) - friction - grad[i]);
    }
    Ok(Drift { dq, dp })
}

/// Newtonian target: `dq_i/dt = p_i`, `dp_i/dt = −p_i − ∇U(q_i) − Σ_{j≠i}∇G(q_i−q_j)`.
pub fn drift_classical_limit(
    state: &State,
    potentials: &PotentialSpec<f64>,
    anchored: bool,
    guard: f64,
    truncation: Option<f64>,
) -> Result<Drift> {
    guard_state(state, guard)?;
    let grad = ForceField::new(potentials, anchored).truncated(truncation).gradient(state)?;
    let n = state.particles();
    let dq = (0..n).map(|i| state.p(i)).collect();
    let dp = (0..n).map(|i| -state.p(i) - grad[i]).collect();
    Ok(Drift { dq, dp })
}

/// Overdamped limit: `dq_i/dt = −D⁻¹(q_i)(∇U(q_i) + Σ_{j≠i}∇G(q_i−q_j)) + div D⁻¹(q_i)`;
/// `noise_induced_drift = false` drops the last term.
pub fn drift_overdamped(
    state: &State,
    potentials: &PotentialSpec<f64>,
    diffusion: &DiffusionSpec<f64>,
    noise_induced_drift: bool,
    guard: f64,
    truncation: Option<f64>,
) -> Result<Vec<SVec<f64>>> {
    guard_state(state, guard)?;
    let grad = ForceField::new(potentials, false).truncated(truncation).gradient(state)?;
    (0..state.particles())
        .map(|i| {
            let q = state.q(i);
            let mut b = -diffusion.inv_d(&q)?.mul_vec(&grad[i]);
            if noise_induced_drift {
                b += diffusion.div_inv_d(&q)?;
            }
            Ok(b)
        })
        .collect()
}

/// Noise matrix per particle: the increment added to the noisy channel is `Σ_i ΔW_i`.
fn noise_matrix(cfg: &ModelConfig, diffusion: &DiffusionSpec<f64>, state: &State, i: usize) -> Result<SMat<f64>> {
    let d = state.dim();
    let sqrt2 = std::f64::consts::SQRT_2;
    Ok(match cfg.model_kind.base() {
        BaseKind::Classical => diffusion.sqrt_d(&state.q(i)).scale(sqrt2 / cfg.mass_or_err()?),
        BaseKind::Relativistic => {
            let p = state.p(i);
            match cfg.active_truncation() {
                Some(r) => truncated_d(cfg.epsilon_or_err()?, &p, r).sqrt_m.scale(sqrt2),
                None => diffusion.sqrt_d(&p).scale(sqrt2),
            }
        }
        BaseKind::Overdamped => diffusion.sqrt_inv_d(&state.q(i))?.scale(sqrt2),
        BaseKind::ClassicalLimit => SMat::scaled_identity(d, sqrt2),
    })
}

/// Drift of `cfg`'s model at `state`. For overdamped kinds `dp` is zero.
pub fn model_drift(state: &State, cfg: &ModelConfig, specs: &Specs) -> Result<Drift> {
    let guard = cfg.collision_guard;
    let trunc = cfg.active_truncation();
    let diffusion = specs.diffusion_for(cfg)?;
    let pot = &specs.potentials;
    match cfg.model_kind.base() {
        BaseKind::Classical => classical_drift_truncated(state, pot, &diffusion, cfg.mass_or_err()?, guard, trunc),
        BaseKind::Relativistic => {
            relativistic_drift_truncated(state, pot, cfg.epsilon_or_err()?, cfg.anchored(), guard, trunc)
        }
        BaseKind::ClassicalLimit => drift_classical_limit(state, pot, cfg.anchored(), guard, trunc),
        BaseKind::Overdamped => {
            let dq = drift_overdamped(state, pot, &diffusion, cfg.noise_induced_drift, guard, trunc)?;
            let dp = vec![SVec::zeros(state.dim()); state.particles()];
            Ok(Drift { dq, dp })
        }
    }
}

/// One unguarded Euler–Maruyama update with Brownian increment `dw` (length N·d).
pub fn em_update(state: &State, cfg: &ModelConfig, specs: &Specs, h: f64, dw: &[f64]) -> Result<State> {
    let drift = model_drift(state, cfg, specs)?;
    let diffusion = specs.diffusion_for(cfg)?;
    let d = state.dim();
    let mut next = state.clone();
    for i in 0..state.particles() {
        let xi = SVec::from_slice(&dw[i * d..(i + 1) * d]);
        let kick = noise_matrix(cfg, &diffusion, state, i)?.mul_vec(&xi);
        if cfg.model_kind.base() == BaseKind::Overdamped {
            next.set_q(i, &(state.q(i) + drift.dq[i].scale(h) + kick));
        } else {
            next.set_q(i, &(state.q(i) + drift.dq[i].scale(h)));
            next.set_p(i, &(state.p(i) + drift.dp[i].scale(h) + kick));
        }
    }
    next.time = state.time + h;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Accepted,
    /// Resolved by halving; the count is the number of substeps taken.
    Substepped(u32),
    CollisionRejected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: State,
    pub status: StepStatus,
}

/// Stepper for one config at a fixed dyadic level of a noise stream.
#[derive(Clone, Debug)]
pub struct Stepper<'a> {
    cfg: &'a ModelConfig,
    specs: &'a Specs,
    level: u32,
}

/// Level `l` with `dt = base_dt·2^{−l}`.
pub fn dyadic_level(base_dt: f64, dt: f64) -> Result<u32> {
    let ratio = base_dt / dt;
    let l = ratio.log2().round();
    if !(l >= 0.0 && l < 60.0) || ((2f64.powf(l) - ratio) / ratio).abs() > 1e-9 {
        return Err(Error::Config(format!("dt {dt} is not base_dt {base_dt} times a power of 1/2")));
    }
    Ok(l as u32)
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a ModelConfig, specs: &'a Specs, noise: &NoiseStream) -> Result<Self> {
        specs.validate(cfg)?;
        if noise.width() != cfg.particle_count * cfg.dimension {
            return Err(Error::Config("noise width differs from N*d".into()));
        }
        Ok(Self { cfg, specs, level: dyadic_level(noise.base_dt(), cfg.dt)? })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    fn admissible(&self, prev: &State, next: &State) -> bool {
        if check_domain(next, self.cfg.collision_guard).is_err() {
            return false;
        }
        if self.cfg.anchored() && self.specs.potentials.has_pairwise() {
            let (a, b) = (prev.q(0), next.q(0));
            if b.norm() < self.cfg.collision_guard {
                return false;
            }
            if a.dim() == 1 && a[0].signum() != b[0].signum() {
                return false;
            }
        }
        true
    }

    fn attempt(&self, state: &State, noise: &mut NoiseStream, level: u32, index: u64, depth: u32) -> Option<(State, u32)> {
        let mut dw = vec![0.0; noise.width()];
        noise.increment(level, index, &mut dw);
        let h = noise.step_at(level);
        if let Ok(next) = em_update(state, self.cfg, self.specs, h, &dw) {
            if self.admissible(state, &next) {
                return Some((next, 1));
            }
        }
        if depth >= MAX_HALVINGS {
            return None;
        }
        let (mid, a) = self.attempt(state, noise, level + 1, 2 * index, depth + 1)?;
        let (end, b) = self.attempt(&mid, noise, level + 1, 2 * index + 1, depth + 1)?;
        Some((end, a + b))
    }

    /// Advances over step `index` of this stepper's level.
    pub fn step(&self, state: &State, noise: &mut NoiseStream, index: u64) -> StepResult {
        match self.attempt(state, noise, self.level, index, 0) {
            Some((next, 1)) => StepResult { next_state: next, status: StepStatus::Accepted },
            Some((next, k)) => StepResult { next_state: next, status: StepStatus::Substepped(k) },
            None => StepResult { next_state: state.clone(), status: StepStatus::CollisionRejected },
        }
    }
}

/// One guarded Euler–Maruyama step with step halving.
pub fn step_em(state: &State, cfg: &ModelConfig, specs: &Specs, noise: &mut NoiseStream, index: u64) -> Result<StepResult> {
    Ok(Stepper::new(cfg, specs, noise)?.step(state, noise, index))
}

/// Same as [`step_em`] for a truncated kind.
pub fn step_truncated(
    state: &State,
    cfg: &ModelConfig,
    specs: &Specs,
    noise: &mut NoiseStream,
    index: u64,
) -> Result<StepResult> {
    if !cfg.model_kind.is_truncated() {
        return Err(Error::Kind { op: "step_truncated", kind: cfg.model_kind.name().into() });
    }
    step_em(state, cfg, specs, noise, index)
}

/// Callback invoked on the initial state (step 0) and after every step.
pub trait Observer {
    fn observe(&mut self, step: u64, state: &State) -> Result<()>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub steps: u64,
    pub accepted: u64,
    pub substepped: u64,
    pub substeps_total: u64,
    pub collision_rejected: u64,
    #[serde(skip)]
    pub final_state: Option<State>,
}

pub fn step_count(horizon: f64, dt: f64) -> Result<u64> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    Ok((horizon / dt - 1e-9).ceil().max(0.0) as u64)
}

/// Runs `cfg` from `initial` up to `horizon` on `noise`, whose base step must equal `cfg.dt`
/// up to a power of two.
pub fn simulate(
    initial: &State,
    cfg: &ModelConfig,
    specs: &Specs,
    horizon: f64,
    noise: &mut NoiseStream,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectorySummary> {
    let stepper = Stepper::new(cfg, specs, noise)?;
    crate::state::validate_state(initial, cfg)?;
    let n = step_count(horizon, cfg.dt)?;
    let singular = specs.potentials.has_pairwise() && !cfg.model_kind.is_truncated();
    let mut state = initial.clone();
    let mut summary = TrajectorySummary::default();
    for o in observers.iter_mut() {
        o.observe(0, &state)?;
    }
    for k in 0..n {
        let r = stepper.step(&state, noise, k);
        summary.steps += 1;
        match r.status {
            StepStatus::Accepted => summary.accepted += 1,
            StepStatus::Substepped(c) => {
                summary.substepped += 1;
                summary.substeps_total += c as u64;
            }
            StepStatus::CollisionRejected => {
                summary.collision_rejected += 1;
                if singular {
                    return Err(Error::CollisionAbort {
                        step: k,
                        halvings: MAX_HALVINGS,
                        detail: format!("q = {:?}, p = {:?}, t = {}", state.positions(), state.momenta(), state.time),
                    });
                }
            }
        }
        state = r.next_state;
        if r.status == StepStatus::CollisionRejected {
            state.time += cfg.dt;
        }
        for o in observers.iter_mut() {
            o.observe(k + 1, &state)?;
        }
    }
    summary.final_state = Some(state);
    Ok(summary)
}

/// Pathwise sup-distances between two configs of a coupled run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDistance {
    pub a: usize,
    pub b: usize,
    pub sup_dq: f64,
    pub sup_dp: f64,
    /// `sup_t √(|Δq|² + |Δp|²)`.
    pub sup_joint: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledRun {
    pub finals: Vec<State>,
    pub summaries: Vec<TrajectorySummary>,
    pub distances: Vec<PairDistance>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Runs every config from `initial` on one Brownian path (`seed`, `stream_id`). The base
/// step is the largest `dt`; each other `dt` must be a dyadic refinement of it. Distances
/// are sampled on the base grid.
pub fn coupled_simulate(
    initial: &State,
    cfgs: &[ModelConfig],
    specs: &[Specs],
    horizon: f64,
    pairs: &[(usize, usize)],
    stream_id: u64,
) -> Result<CoupledRun> {
    if cfgs.is_empty() || cfgs.len() != specs.len() {
        return Err(Error::InvalidArgument("need one Specs per config".into()));
    }
    let (n, d, seed) = (cfgs[0].particle_count, cfgs[0].dimension, cfgs[0].seed);
    if cfgs.iter().any(|c| c.particle_count != n || c.dimension != d || c.seed != seed) {
        return Err(Error::Config("coupled configs must share N, d and seed".into()));
    }
    for &(a, b) in pairs {
        if a >= cfgs.len() || b >= cfgs.len() {
            return Err(Error::InvalidArgument(format!("pair ({a}, {b}) out of range")));
        }
    }
    let base_dt = cfgs.iter().map(|c| c.dt).fold(f64::MIN, f64::max);
    let mut noises = Vec::with_capacity(cfgs.len());
    let mut steppers = Vec::with_capacity(cfgs.len());
    for (c, s) in cfgs.iter().zip(specs) {
        let level = dyadic_level(base_dt, c.dt)?;
        let noise = NoiseStream::new(seed, stream_id, n * d, base_dt).with_cache_level(level);
        steppers.push(Stepper::new(c, s, &noise)?);
        crate::state::validate_state(initial, c)?;
        noises.push(noise);
    }
    let coarse = step_count(horizon, base_dt)?;
    let mut states: Vec<State> = vec![initial.clone(); cfgs.len()];
    let mut summaries = vec![TrajectorySummary::default(); cfgs.len()];
    let mut distances: Vec<PairDistance> =
        pairs.iter().map(|&(a, b)| PairDistance { a, b, sup_dq: 0.0, sup_dp: 0.0, sup_joint: 0.0 }).collect();
    for k in 0..coarse {
        for c in 0..cfgs.len() {
            let per = 1u64 << steppers[c].level();
            let singular = specs[c].potentials.has_pairwise() && !cfgs[c].model_kind.is_truncated();
            for sub in 0..per {
                let r = steppers[c].step(&states[c], &mut noises[c], k * per + sub);
                let s = &mut summaries[c];
                s.steps += 1;
                match r.status {
                    StepStatus::Accepted => s.accepted += 1,
                    StepStatus::Substepped(m) => {
                        s.substepped += 1;
                        s.substeps_total += m as u64;
                    }
                    StepStatus::CollisionRejected => {
                        s.collision_rejected += 1;
                        if singular {
                            return Err(Error::CollisionAbort {
                                step: k * per + sub,
                                halvings: MAX_HALVINGS,
                                detail: format!("config {c} ({})", cfgs[c].model_kind.name()),
                            });
                        }
                    }
                }
                let rejected = r.status == StepStatus::CollisionRejected;
                states[c] = r.next_state;
                if rejected {
                    states[c].time += cfgs[c].dt;
                }
            }
        }
        for pd in distances.iter_mut() {
            let (a, b) = (&states[pd.a], &states[pd.b]);
            let (dq, dp) = (distance(a.positions(), b.positions()), distance(a.momenta(), b.momenta()));
            pd.sup_dq = pd.sup_dq.max(dq);
            pd.sup_dp = pd.sup_dp.max(dp);
            pd.sup_joint = pd.sup_joint.max(dq.hypot(dp));
        }
    }
    for (s, st) in summaries.iter_mut().zip(&states) {
        s.final_state = Some(st.clone());
    }
    Ok(CoupledRun { finals: states, summaries, distances })
}

/// Writes `time, q_{i,k}…, p_{i,k}…` rows every `stride` steps.
pub struct TimeSeriesWriter<W: Write> {
    out: W,
    stride: u64,
    header_written: bool,
    pub rows: u64,
}

impl<W: Write> TimeSeriesWriter<W> {
    pub fn new(out: W, stride: u64) -> Self {
        Self { out, stride: stride.max(1), header_written: false, rows: 0 }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    pub fn header(n: usize, d: usize) -> String {
        let mut cols = vec!["time".to_string()];
        for prefix in ["q", "p"] {
            for i in 0..n {
                for k in 0..d {
                    cols.push(format!("{prefix}{i}_{k}"));
                }
            }
        }
        cols.join(",")
    }

    pub fn write_header(&mut self, n: usize, d: usize) -> Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", Self::header(n, d))?;
            self.header_written = true;
        }
        Ok(())
    }
}

impl<W: Write> Observer for TimeSeriesWriter<W> {
    fn observe(&mut self, step: u64, state: &State) -> Result<()> {
        self.write_header(state.particles(), state.dim())?;
        if step % self.stride != 0 {
            return Ok(());
        }
        let mut row = format!("{:.12e}", state.time);
        for x in state.positions().iter().chain(state.momenta()) {
            row.push_str(&format!(",{x:.12e}"));
        }
        writeln!(self.out, "{row}")?;
        self.rows += 1;
        Ok(())
    }
}

/// Records one momentum coordinate every `stride` steps after `burn_in` steps.
#[derive(Clone, Debug)]
pub struct MomentumSampler {
    pub particle: usize,
    pub component: usize,
    pub burn_in: u64,
    pub stride: u64,
    pub samples: Vec<f64>,
}

impl MomentumSampler {
    pub fn new(particle: usize, component: usize, burn_in: u64, stride: u64) -> Self {
        Self { particle, component, burn_in, stride: stride.max(1), samples: Vec::new() }
    }
}

impl Observer for MomentumSampler {
    fn observe(&mut self, step: u64, state: &State) -> Result<()> {
        if step > self.burn_in && (step - self.burn_in) % self.stride == 0 {
            self.samples.push(state.p(self.particle)[self.component]);
        }
        Ok(())
    }
}

/// Running maximum of a scalar functional along the path.
pub struct RunningMax<F: FnMut(&State) -> Result<f64>> {
    f: F,
    pub max: f64,
}

impl<F: FnMut(&State) -> Result<f64>> RunningMax<F> {
    pub fn new(f: F) -> Self {
        Self { f, max: f64::NEG_INFINITY }
    }
}

impl<F: FnMut(&State) -> Result<f64>> Observer for RunningMax<F> {
    fn observe(&mut self, _step: u64, state: &State) -> Result<()> {
        self.max = self.max.max((self.f)(state)?);
        Ok(())
    }
}

/// First time some `|q_i|` exceeds `radius` or some pair separation drops below `1/radius`
/// (the stopping times used by the truncation arguments). Recorded only.
#[derive(Clone, Debug)]
pub struct FirstExit {
    pub radius: f64,
    pub time: Option<f64>,
}

impl FirstExit {
    pub fn new(radius: f64) -> Self {
        Self { radius, time: None }
    }
}

impl Observer for FirstExit {
    fn observe(&mut self, _step: u64, state: &State) -> Result<()> {
        if self.time.is_some() {
            return Ok(());
        }
        let far = (0..state.particles()).any(|i| state.q(i).norm() > self.radius);
        let close = crate::state::min_pair_distance(state) < 1.0 / self.radius;
        if far || close {
            self.time = Some(state.time);
        }
        Ok(())
    }
}
