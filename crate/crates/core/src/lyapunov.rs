//! Lyapunov functions of the classical and relativistic systems and empirical
//! certification of drift inequalities `ℒV ≤ −c·V^α + C`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Dynamics, Energy, Generator, Hamiltonian, Jet, Power, SmoothObservable};
use crate::integrators::Specs;
use crate::linalg::{SMat, SVec};
use crate::potentials::PotentialSpec;
use crate::scalar::Scalar;
use crate::state::{check_domain, BaseKind, ModelConfig, PhaseState};

/// Unit vector `u/|u|` and its Jacobian `(I − n⊗n)/|u|`.
fn unit_and_jacobian<T: Scalar>(u: &SVec<T>) -> Result<(SVec<T>, SMat<T>)> {
    let r = u.norm();
    if !(r > T::zero()) {
        return Err(Error::SingularInput);
    }
    let n = u.scale(T::one() / r);
    let j = (SMat::identity(u.dim()) - SMat::outer(&n, &n)).scale(T::one() / r);
    Ok((n, j))
}

/// `H + ε₁mΣ⟨x_i,v_i⟩ − ε₁mΣ⟨v_i, Σ_{j≠i}(x_i−x_j)/|x_i−x_j|⟩`.
#[derive(Clone, Debug)]
pub struct VClassical<T> {
    pub mass: T,
    pub eps1: T,
    pub potentials: PotentialSpec<T>,
}

impl<T: Scalar> SmoothObservable<T> for VClassical<T> {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        let n = state.particles();
        let h = Hamiltonian::new(Energy::Classical { mass: self.mass }, self.potentials.clone(), false);
        let mut jet = h.jet(state)?;
        let em = self.eps1 * self.mass;
        for i in 0..n {
            let (x, v) = (state.q(i), state.p(i));
            jet.value = jet.value + em * x.dot(&v);
            jet.grad_q[i] += v.scale(em);
            jet.grad_p[i] += x.scale(em);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (e, jac) = unit_and_jacobian(&(state.q(i) - state.q(j)))?;
                let dv = state.p(i) - state.p(j);
                jet.value = jet.value - em * e.dot(&dv);
                jet.grad_p[i] -= e.scale(em);
                jet.grad_p[j] += e.scale(em);
                let g = jac.mul_vec(&dv).scale(em);
                jet.grad_q[i] -= g;
                jet.grad_q[j] += g;
            }
        }
        Ok(jet)
    }

    fn describe(&self) -> String {
        format!("V_classical(m={:?}, eps1={:?})", self.mass, self.eps1)
    }
}

/// `H₁² + ε₁⟨p,q⟩ − ⟨p,q⟩/|q| + κ₁` for one relativistic particle, where `H₁` includes
/// `εG(q)` about the origin.
#[derive(Clone, Debug)]
pub struct VRelativisticSingle<T> {
    pub epsilon: T,
    pub eps1: T,
    pub kappa1: T,
    pub potentials: PotentialSpec<T>,
}

impl<T: Scalar> SmoothObservable<T> for VRelativisticSingle<T> {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        if state.particles() != 1 {
            return Err(Error::Shape("single-particle Lyapunov function needs N = 1".into()));
        }
        let h = Hamiltonian::new(Energy::Relativistic { epsilon: self.epsilon }, self.potentials.clone(), true);
        let hj = h.jet(state)?;
        let two = T::lit(2.0);
        let mut jet = hj.compose(hj.value * hj.value, two * hj.value, two);
        let (q, p) = (state.q(0), state.p(0));
        let (n, jac) = unit_and_jacobian(&q)?;
        jet.value = jet.value + self.eps1 * p.dot(&q) - p.dot(&n) + self.kappa1;
        jet.grad_p[0] += q.scale(self.eps1) - n;
        jet.grad_q[0] += p.scale(self.eps1) - jac.mul_vec(&p);
        Ok(jet)
    }

    fn describe(&self) -> String {
        format!("V_relativistic_single(eps={:?}, eps1={:?}, kappa1={:?})", self.epsilon, self.eps1, self.kappa1)
    }
}

/// `A₁H³ + εH⟨q,p⟩ − A₂ε²Σ_{i≠j}⟨q_i−q_j, p_i−p_j⟩/|q_i−q_j|^{β₁−1} + κ_N`.
#[derive(Clone, Debug)]
pub struct VRelativisticMulti<T> {
    pub epsilon: T,
    pub a1: T,
    pub a2: T,
    pub kappa: T,
    pub potentials: PotentialSpec<T>,
}

impl<T: Scalar> SmoothObservable<T> for VRelativisticMulti<T> {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        let n = state.particles();
        if n < 2 {
            return Err(Error::Shape("multi-particle Lyapunov function needs N >= 2".into()));
        }
        let eps = self.epsilon;
        let beta = T::lit(self.potentials.constants.beta1);
        let h = Hamiltonian::new(Energy::Relativistic { epsilon: eps }, self.potentials.clone(), false);
        let hj = h.jet(state)?;
        let hv = hj.value;
        let three = T::lit(3.0);
        let mut jet = hj.compose(self.a1 * hv * hv * hv, three * self.a1 * hv * hv, T::lit(6.0) * self.a1 * hv);

        let qp = (0..n).fold(T::zero(), |s, i| s + state.q(i).dot(&state.p(i)));
        jet.value = jet.value + eps * hv * qp + self.kappa;
        for i in 0..n {
            let (q, p) = (state.q(i), state.p(i));
            let gp = hj.grad_p[i];
            jet.grad_p[i] += gp.scale(eps * qp) + q.scale(eps * hv);
            jet.grad_q[i] += hj.grad_q[i].scale(eps * qp) + p.scale(eps * hv);
            jet.hess_p[i] = jet.hess_p[i]
                + (SMat::outer(&gp, &q) + SMat::outer(&q, &gp)).scale(eps)
                + hj.hess_p[i].scale(eps * qp);
        }

        // The i≠j sum counts each unordered pair twice.
        let c = T::lit(2.0) * self.a2 * eps * eps;
        for i in 0..n {
            for j in (i + 1)..n {
                let u = state.q(i) - state.q(j);
                let w = state.p(i) - state.p(j);
                let r = u.norm();
                if !(r > T::zero()) {
                    return Err(Error::SingularInput);
                }
                let rp = r.powf(T::one() - beta);
                let uw = u.dot(&w);
                jet.value = jet.value - c * uw * rp;
                let gp = u.scale(c * rp);
                jet.grad_p[i] -= gp;
                jet.grad_p[j] += gp;
                let gu = (w.scale(rp) + u.scale((T::one() - beta) * uw * rp / (r * r))).scale(c);
                jet.grad_q[i] -= gu;
                jet.grad_q[j] += gu;
            }
        }
        Ok(jet)
    }

    fn describe(&self) -> String {
        format!(
            "V_relativistic_multi(eps={:?}, A1={:?}, A2={:?}, kappa={:?})",
            self.epsilon, self.a1, self.a2, self.kappa
        )
    }
}

/// Value of the classical Lyapunov function.
pub fn v_classical(state: &PhaseState<f64>, potentials: &PotentialSpec<f64>, m: f64, eps1: f64) -> Result<f64> {
    VClassical { mass: m, eps1, potentials: potentials.clone() }.value(state)
}

pub fn v_relativistic_single(
    state: &PhaseState<f64>,
    potentials: &PotentialSpec<f64>,
    epsilon: f64,
    eps1: f64,
    kappa1: f64,
) -> Result<f64> {
    VRelativisticSingle { epsilon, eps1, kappa1, potentials: potentials.clone() }.value(state)
}

pub fn v_relativistic_multi(
    state: &PhaseState<f64>,
    potentials: &PotentialSpec<f64>,
    epsilon: f64,
    a1: f64,
    a2: f64,
    kappa: f64,
) -> Result<f64> {
    VRelativisticMulti { epsilon, a1, a2, kappa, potentials: potentials.clone() }.value(state)
}

pub const DEFAULT_A1: f64 = 10.0;
pub const DEFAULT_A2: f64 = 10.0;
pub const EPS1_FLOOR: f64 = 1e-6;

/// Which Lyapunov function to certify. Unset constants take their defaults; an unset
/// ε₁ is swept downward by decades from its default until certification succeeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LyapunovSpec {
    Classical {
        #[serde(default)]
        eps1: Option<f64>,
    },
    RelativisticSingle {
        #[serde(default)]
        eps1: Option<f64>,
        #[serde(default)]
        kappa1: Option<f64>,
    },
    RelativisticMulti {
        #[serde(default = "default_a1")]
        a1: f64,
        #[serde(default = "default_a2")]
        a2: f64,
        #[serde(default)]
        kappa: Option<f64>,
    },
}

fn default_a1() -> f64 {
    DEFAULT_A1
}

fn default_a2() -> f64 {
    DEFAULT_A2
}

/// Sampled states: a log-radial grid in `|q|` and `|p|` with random directions, a
/// near-collision family with the closest pair (or, for one particle, the distance to
/// the origin) on a log grid, and any explicit states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub q_radius: (f64, f64),
    pub q_count: usize,
    /// Upper end is scaled by `1/√ε` for relativistic kinds.
    pub p_radius: (f64, f64),
    pub p_count: usize,
    pub directions: usize,
    pub collision_separation: (f64, f64),
    pub collision_count: usize,
    pub core_quantile: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<PhaseState<f64>>,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            q_radius: (1e-3, 1e3),
            q_count: 25,
            p_radius: (1e-3, 1e3),
            p_count: 25,
            directions: 4,
            collision_separation: (1e-3, 1.0),
            collision_count: 10,
            core_quantile: 0.9,
            seed: 0,
            explicit: Vec::new(),
        }
    }
}

impl SamplePlan {
    /// Plan consisting only of the given states.
    pub fn points(states: Vec<PhaseState<f64>>) -> Self {
        Self { q_count: 0, p_count: 0, directions: 0, collision_count: 0, explicit: states, ..Self::default() }
    }

    fn log_grid(range: (f64, f64), count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![range.0],
            _ => {
                let (a, b) = (range.0.ln(), range.1.ln());
                (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
            }
        }
    }

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> SVec<f64> {
        loop {
            let mut v = SVec::zeros(d);
            for k in 0..d {
                v[k] = rng.sample(StandardNormal);
            }
            let r = v.norm();
            if r > 1e-8 {
                return v.scale(1.0 / r);
            }
        }
    }

    /// `n` vectors, the largest of norm exactly `radius`.
    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, radius: f64) -> Vec<SVec<f64>> {
        let mut v: Vec<SVec<f64>> =
            (0..n).map(|_| Self::random_unit(rng, d).scale(rng.random::<f64>() * 0.9 + 0.1)).collect();
        v[0] = v[0].scale(1.0 / v[0].norm());
        v.iter().map(|x| x.scale(radius)).collect()
    }

    fn assemble(d: usize, q: &mut [SVec<f64>], p: &[SVec<f64>]) -> Option<PhaseState<f64>> {
        if d == 1 {
            q.sort_by(|a, b| a[0].total_cmp(&b[0]));
        }
        let pos: Vec<f64> = q.iter().flat_map(|v| v.as_slice().to_vec()).collect();
        let mom: Vec<f64> = p.iter().flat_map(|v| v.as_slice().to_vec()).collect();
        let s = PhaseState::new(d, pos, mom).ok()?;
        check_domain(&s, 0.0).ok()?;
        Some(s)
    }

    /// Materializes the plan for `n` particles in dimension `d`.
    pub fn states(&self, n: usize, d: usize, p_scale: f64) -> Vec<PhaseState<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let qs = Self::log_grid(self.q_radius, self.q_count);
        let mut ps = vec![0.0];
        ps.extend(Self::log_grid((self.p_radius.0, self.p_radius.1 * p_scale), self.p_count));
        let mut out = self.explicit.clone();
        if self.q_count > 0 && self.p_count > 0 {
            for &rq in &qs {
                for &rp in &ps {
                    for _ in 0..self.directions {
                        let mut q = Self::random_cloud(&mut rng, n, d, rq);
                        let p = Self::random_cloud(&mut rng, n, d, rp);
                        out.extend(Self::assemble(d, &mut q, &p));
                    }
                }
            }
        }
        let seps = Self::log_grid(self.collision_separation, self.collision_count);
        let centres = Self::log_grid((1e-1, 1e1), 3);
        for &sep in &seps {
            for &c in &centres {
                for &rp in &ps {
                    for _ in 0..self.directions.max(1) {
                        let p = Self::random_cloud(&mut rng, n, d, rp);
                        let mut q = if n == 1 {
                            vec![Self::random_unit(&mut rng, d).scale(sep)]
                        } else {
                            let centre = Self::random_unit(&mut rng, d).scale(c);
                            let e = Self::random_unit(&mut rng, d);
                            let mut q = vec![centre - e.scale(sep / 2.0), centre + e.scale(sep / 2.0)];
                            for k in 2..n {
                                q.push(centre + Self::random_unit(&mut rng, d).scale(1.0 + k as f64));
                            }
                            q
                        };
                        out.extend(Self::assemble(d, &mut q, &p));
                    }
                }
            }
        }
        out
    }
}

/// Default ε₁ for the classical Lyapunov function.
pub fn default_eps1_classical(mass: f64, a2: f64) -> f64 {
    (1e-2f64).min(mass * a2 / 4.0)
}

pub const DEFAULT_EPS1_RELATIVISTIC: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps1: f64,
    pub c: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftCertificate {
    pub lyapunov: String,
    pub power: u32,
    pub alpha: f64,
    pub c: f64,
    pub big_c: f64,
    /// Max of ℒV on the core.
    pub c0: f64,
    /// Core threshold on V (quantile of sampled values).
    pub core_threshold: f64,
    pub max_residual: f64,
    pub valid: bool,
    pub samples: usize,
    pub core_samples: usize,
    pub skipped: usize,
    pub eps1: Option<f64>,
    pub kappa: f64,
    pub eps1_sweep: Vec<SweepEntry>,
    pub plan: SamplePlan,
}

/// Fits `(c, C₀, C, V₀, residual)` from samples `(V, ℒV)`.
fn fit(values: &[(f64, f64)], alpha: f64, quantile: f64) -> (f64, f64, f64, f64, f64, usize) {
    let mut sorted: Vec<f64> = values.iter().map(|v| v.0).collect();
    sorted.sort_by(f64::total_cmp);
    let idx = ((sorted.len() as f64 * quantile).ceil() as usize).clamp(1, sorted.len()) - 1;
    let v0 = sorted[idx];
    let core: Vec<&(f64, f64)> = values.iter().filter(|v| v.0 <= v0).collect();
    let c0 = core.iter().map(|v| v.1).fold(0.0, f64::max);
    let mut c = f64::INFINITY;
    for &(v, lv) in values.iter().filter(|v| v.0 > v0) {
        c = c.min((c0 - lv) / v.powf(alpha));
    }
    if c.is_infinite() {
        c = 1.0;
    }
    // Shave off rounding so the fitted inequality holds strictly at the argmin.
    let c = if c > 0.0 { c * (1.0 - 1e-9) } else { c };
    let big_c = c0 + c.max(0.0) * v0.powf(alpha);
    let residual = values.iter().map(|&(v, lv)| lv + c * v.powf(alpha) - big_c).fold(f64::NEG_INFINITY, f64::max);
    (c, c0, big_c, v0, residual, core.len())
}

struct Candidate {
    observable: Box<dyn SmoothObservable<f64>>,
    eps1: Option<f64>,
    kappa: f64,
}

fn build(
    spec: &LyapunovSpec,
    cfg: &ModelConfig,
    specs: &Specs,
    eps1: f64,
    states: &[PhaseState<f64>],
) -> Result<Candidate> {
    let pot = specs.potentials.clone();
    let raw: Box<dyn Fn(f64) -> Box<dyn SmoothObservable<f64>>> = match spec {
        LyapunovSpec::Classical { .. } => {
            let m = cfg.mass_or_err()?;
            Box::new(move |k| {
                let v = VClassical { mass: m, eps1, potentials: pot.clone() };
                Box::new(Shifted { inner: v, shift: k })
            })
        }
        LyapunovSpec::RelativisticSingle { .. } => {
            let e = cfg.epsilon_or_err()?;
            Box::new(move |k| Box::new(VRelativisticSingle { epsilon: e, eps1, kappa1: k, potentials: pot.clone() }))
        }
        LyapunovSpec::RelativisticMulti { a1, a2, .. } => {
            let e = cfg.epsilon_or_err()?;
            let (a1, a2) = (*a1, *a2);
            Box::new(move |k| {
                Box::new(VRelativisticMulti { epsilon: e, a1, a2, kappa: k, potentials: pot.clone() })
            })
        }
    };
    let fixed_kappa = match spec {
        LyapunovSpec::Classical { .. } => None,
        LyapunovSpec::RelativisticSingle { kappa1, .. } => *kappa1,
        LyapunovSpec::RelativisticMulti { kappa, .. } => *kappa,
    };
    let kappa = match fixed_kappa {
        Some(k) => k,
        None => {
            let zero = raw(0.0);
            let min = states
                .par_iter()
                .map(|s| zero.value(s).unwrap_or(f64::INFINITY))
                .collect::<Vec<_>>()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            1.0 + (-min).max(0.0)
        }
    };
    let eps1 = match spec {
        LyapunovSpec::RelativisticMulti { .. } => None,
        _ => Some(eps1),
    };
    Ok(Candidate { observable: raw(kappa), eps1, kappa })
}

/// `f + shift`; the classical V has no κ of its own but needs `V ≥ 1` for `V^α` fits.
struct Shifted<O> {
    inner: O,
    shift: f64,
}

impl<O: SmoothObservable<f64>> SmoothObservable<f64> for Shifted<O> {
    fn jet(&self, state: &PhaseState<f64>) -> Result<Jet<f64>> {
        let mut j = self.inner.jet(state)?;
        j.value += self.shift;
        Ok(j)
    }

    fn describe(&self) -> String {
        format!("{} + {:?}", self.inner.describe(), self.shift)
    }
}

/// Fits a drift inequality for `V^power` on the sample plan.
///
/// The core is `{V^power ≤ quantile}`; `C₀ = max(0, max_core ℒV^power)` and
/// `c = min_{outside} (C₀ − ℒV^power)/V^{power·α}`. Invalid fits are reported, not errors.
pub fn certify_drift(
    spec: &LyapunovSpec,
    cfg: &ModelConfig,
    specs: &Specs,
    alpha: f64,
    power: u32,
    plan: &SamplePlan,
) -> Result<DriftCertificate> {
    specs.validate(cfg)?;
    if !(alpha > 0.0 && alpha <= 1.0) || power == 0 {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1] and power >= 1".into()));
    }
    if !(plan.core_quantile > 0.0 && plan.core_quantile <= 1.0) {
        return Err(Error::InvalidArgument("core_quantile must lie in (0, 1]".into()));
    }
    match (spec, cfg.model_kind.base()) {
        (LyapunovSpec::Classical { .. }, BaseKind::Classical) => {}
        (LyapunovSpec::RelativisticSingle { .. }, BaseKind::Relativistic) if cfg.particle_count == 1 => {}
        (LyapunovSpec::RelativisticMulti { .. }, BaseKind::Relativistic) if cfg.particle_count >= 2 => {
            specs.potentials.constants.validate(true)?;
        }
        _ => {
            return Err(Error::Config(format!(
                "Lyapunov function {spec:?} does not fit model {} with N = {}",
                cfg.model_kind.name(),
                cfg.particle_count
            )))
        }
    }
    let p_scale = cfg.epsilon.map_or(1.0, |e| 1.0 / e.sqrt());
    let states = plan.states(cfg.particle_count, cfg.dimension, p_scale);
    let dynamics = Dynamics::from_config(cfg, specs)?;
    let generator = Generator::new(dynamics, &specs.potentials, cfg.anchored());

    let (start, sweep) = match spec {
        LyapunovSpec::Classical { eps1 } => {
            let d = default_eps1_classical(cfg.mass_or_err()?, specs.potentials.constants.a2);
            (eps1.unwrap_or(d), eps1.is_none())
        }
        LyapunovSpec::RelativisticSingle { eps1, .. } => (eps1.unwrap_or(DEFAULT_EPS1_RELATIVISTIC), eps1.is_none()),
        LyapunovSpec::RelativisticMulti { .. } => (0.0, false),
    };

    let mut history = Vec::new();
    let mut eps1 = start;
    loop {
        let cand = build(spec, cfg, specs, eps1, &states)?;
        let obs = Power { inner: cand.observable, n: power };
        let evaluated: Vec<Option<(f64, f64)>> = states
            .par_iter()
            .map(|s| {
                let jet = obs.jet(s).ok()?;
                let lv = generator.apply_jet(&jet, s).ok()?;
                (jet.value.is_finite() && lv.is_finite()).then_some((jet.value, lv))
            })
            .collect();
        let skipped = evaluated.iter().filter(|v| v.is_none()).count();
        let values: Vec<(f64, f64)> = evaluated.into_iter().flatten().collect();
        if values.is_empty() {
            return Err(Error::InvalidArgument("sample plan produced no admissible states".into()));
        }
        let (c, c0, big_c, v0, residual, core) = fit(&values, alpha, plan.core_quantile);
        let valid = c > 0.0 && residual <= 0.0;
        if cand.eps1.is_some() {
            history.push(SweepEntry { eps1, c, valid });
        }
        let next = eps1 / 10.0;
        if valid || !sweep || next < EPS1_FLOOR * (1.0 - 1e-9) {
            return Ok(DriftCertificate {
                lyapunov: obs.describe(),
                power,
                alpha,
                c,
                big_c,
                c0,
                core_threshold: v0,
                max_residual: residual,
                valid,
                samples: values.len(),
                core_samples: core,
                skipped,
                eps1: cand.eps1,
                kappa: cand.kappa,
                eps1_sweep: history,
                plan: plan.clone(),
            });
        }
        eps1 = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionSpec;
    use crate::potentials::{Confining, Pairwise};
    use crate::state::ModelKind;

    fn pot() -> PotentialSpec<f64> {
        PotentialSpec::new(Confining::PolyConfining { lambda: 1.0, scale: 1.0 }, Pairwise::None).unwrap()
    }

    #[test]
    fn formula_examples() {
        let s = PhaseState::at_rest(1, vec![0.7]).unwrap();
        let h = Hamiltonian::new(Energy::Classical { mass: 1.0 }, pot(), false).value(&s).unwrap();
        assert_eq!(v_classical(&s, &pot(), 1.0, 0.1).unwrap(), h);
        let s = PhaseState::new(1, vec![1.0], vec![1.0]).unwrap();
        let h = Hamiltonian::new(Energy::Classical { mass: 1.0 }, pot(), false).value(&s).unwrap();
        assert!((v_classical(&s, &pot(), 1.0, 0.1).unwrap() - (h + 0.1)).abs() < 1e-14);

        let s = PhaseState::at_rest(1, vec![0.4]).unwrap();
        let h = Hamiltonian::new(Energy::Relativistic { epsilon: 0.3 }, pot(), true).value(&s).unwrap();
        assert!((v_relativistic_single(&s, &pot(), 0.3, 0.01, 2.0).unwrap() - (h * h + 2.0)).abs() < 1e-14);
        assert!(v_relativistic_single(&PhaseState::at_rest(1, vec![0.0]).unwrap(), &pot(), 0.3, 0.01, 2.0).is_err());

        let s = PhaseState::at_rest(1, vec![-0.5, 0.9]).unwrap();
        let h = Hamiltonian::new(Energy::Relativistic { epsilon: 0.3 }, pot(), false).value(&s).unwrap();
        let v = v_relativistic_multi(&s, &pot(), 0.3, 10.0, 10.0, 1.5).unwrap();
        assert!((v - (10.0 * h.powi(3) + 1.5)).abs() < 1e-12);
    }

    #[test]
    fn one_point_plan_is_trivially_valid() {
        let cfg = ModelConfig::new(ModelKind::Classical, 1, 1, 0.01, 0).with_mass(1.0);
        let specs = Specs::new(pot(), DiffusionSpec::Constant { gamma: 1.0 });
        let plan = SamplePlan::points(vec![PhaseState::at_rest(1, vec![0.0]).unwrap()]);
        let cert = certify_drift(&LyapunovSpec::Classical { eps1: Some(0.01) }, &cfg, &specs, 1.0, 1, &plan).unwrap();
        assert!(cert.valid);
        assert_eq!(cert.samples, 1);
        assert!(cert.c0 >= 0.0);
    }

    #[test]
    fn plan_states_are_admissible() {
        let plan = SamplePlan { q_count: 4, p_count: 3, collision_count: 3, ..SamplePlan::default() };
        let states = plan.states(3, 1, 1.0);
        assert!(!states.is_empty());
        for s in &states {
            check_domain(s, 0.0).unwrap();
        }
        assert_eq!(states, plan.states(3, 1, 1.0));
    }
}
