//! Smooth observables with analytic derivatives and the infinitesimal generators of the
//! classical, relativistic and Newtonian-limit dynamics.

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::integrators::Specs;
use crate::linalg::{SMat, SVec};
use crate::potentials::{ForceField, PotentialSpec};
use crate::scalar::Scalar;
use crate::state::{BaseKind, ModelConfig, PhaseState};

/// Value, position gradient, momentum gradient and per-particle momentum Hessian blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub grad_q: Vec<SVec<T>>,
    pub grad_p: Vec<SVec<T>>,
    pub hess_p: Vec<SMat<T>>,
}

impl<T: Scalar> Jet<T> {
    pub fn constant(value: T, n: usize, d: usize) -> Self {
        Self {
            value,
            grad_q: vec![SVec::zeros(d); n],
            grad_p: vec![SVec::zeros(d); n],
            hess_p: vec![SMat::zeros(d); n],
        }
    }

    /// Jet of `g(f)` given `g(f)`, `g'(f)`, `g''(f)`.
    pub fn compose(&self, g0: T, g1: T, g2: T) -> Self {
        Self {
            value: g0,
            grad_q: self.grad_q.iter().map(|v| v.scale(g1)).collect(),
            grad_p: self.grad_p.iter().map(|v| v.scale(g1)).collect(),
            hess_p: self
                .hess_p
                .iter()
                .zip(&self.grad_p)
                .map(|(h, g)| h.scale(g1) + SMat::outer(g, g).scale(g2))
                .collect(),
        }
    }
}

/// Function on phase space with analytic first derivatives and momentum Hessian.
pub trait SmoothObservable<T: Scalar>: Send + Sync {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>>;

    fn value(&self, state: &PhaseState<T>) -> Result<T> {
        Ok(self.jet(state)?.value)
    }

    fn describe(&self) -> String;
}

#[derive(Clone, Debug)]
pub struct Constant<T>(pub T);

impl<T: Scalar> SmoothObservable<T> for Constant<T> {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        Ok(Jet::constant(self.0, state.particles(), state.dim()))
    }

    fn describe(&self) -> String {
        format!("constant({:?})", self.0)
    }
}

/// `Σ⟨q_i, p_i⟩`.
#[derive(Clone, Debug, Default)]
pub struct CrossTerm;

impl<T: Scalar> SmoothObservable<T> for CrossTerm {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        let n = state.particles();
        let mut jet = Jet::constant(T::zero(), n, state.dim());
        for i in 0..n {
            jet.value = jet.value + state.q(i).dot(&state.p(i));
            jet.grad_q[i] = state.p(i);
            jet.grad_p[i] = state.q(i);
        }
        Ok(jet)
    }

    fn describe(&self) -> String {
        "cross_term".into()
    }
}

/// `Σ|p_i|⁴`.
#[derive(Clone, Debug, Default)]
pub struct MomentumQuartic;

impl<T: Scalar> SmoothObservable<T> for MomentumQuartic {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        let n = state.particles();
        let d = state.dim();
        let mut jet = Jet::constant(T::zero(), n, d);
        let two = T::lit(2.0);
        for i in 0..n {
            let p = state.p(i);
            let r2 = p.norm_sq();
            jet.value = jet.value + r2 * r2;
            jet.grad_p[i] = p.scale(two * two * r2);
            jet.hess_p[i] = SMat::scaled_identity(d, two * two * r2) + SMat::outer(&p, &p).scale(T::lit(8.0));
        }
        Ok(jet)
    }

    fn describe(&self) -> String {
        "momentum_quartic".into()
    }
}

/// Which Hamiltonian: classical `Σ½m|v|² + ΣU + Σ_{i<j}G`, or relativistic
/// `Σ√(1+ε|p|²) + εΣU + εΣ_{i<j}G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Energy<T> {
    Classical { mass: T },
    Relativistic { epsilon: T },
}

#[derive(Clone, Debug)]
pub struct Hamiltonian<T> {
    pub energy: Energy<T>,
    pub potentials: PotentialSpec<T>,
    /// Single particle interacting with the origin through G.
    pub anchored: bool,
}

impl<T: Scalar> Hamiltonian<T> {
    pub fn new(energy: Energy<T>, potentials: PotentialSpec<T>, anchored: bool) -> Self {
        Self { energy, potentials, anchored }
    }
}

impl<T: Scalar> SmoothObservable<T> for Hamiltonian<T> {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        let n = state.particles();
        let d = state.dim();
        let field = ForceField::new(&self.potentials, self.anchored);
        let pot = field.energy(state)?;
        let grad = field.gradient(state)?;
        let mut jet = Jet::constant(T::zero(), n, d);
        match self.energy {
            Energy::Classical { mass } => {
                let mut kin = T::zero();
                for i in 0..n {
                    let v = state.p(i);
                    kin = kin + mass * v.norm_sq() / T::lit(2.0);
                    jet.grad_q[i] = grad[i];
                    jet.grad_p[i] = v.scale(mass);
                    jet.hess_p[i] = SMat::scaled_identity(d, mass);
                }
                jet.value = kin + pot;
            }
            Energy::Relativistic { epsilon } => {
                let mut kin = T::zero();
                for i in 0..n {
                    let p = state.p(i);
                    let s = (T::one() + epsilon * p.norm_sq()).sqrt();
                    kin = kin + s;
                    jet.grad_q[i] = grad[i].scale(epsilon);
                    jet.grad_p[i] = p.scale(epsilon / s);
                    jet.hess_p[i] = SMat::scaled_identity(d, epsilon / s)
                        - SMat::outer(&p, &p).scale(epsilon * epsilon / (s * s * s));
                }
                jet.value = kin + epsilon * pot;
            }
        }
        Ok(jet)
    }

    fn describe(&self) -> String {
        match self.energy {
            Energy::Classical { mass } => format!("hamiltonian_classical(m={mass:?})"),
            Energy::Relativistic { epsilon } => format!("hamiltonian_relativistic(eps={epsilon:?})"),
        }
    }
}

/// `f^n` for an observable `f`.
pub struct Power<T> {
    pub inner: Box<dyn SmoothObservable<T>>,
    pub n: u32,
}

impl<T: Scalar> SmoothObservable<T> for Power<T> {
    fn jet(&self, state: &PhaseState<T>) -> Result<Jet<T>> {
        let jet = self.inner.jet(state)?;
        if self.n == 1 {
            return Ok(jet);
        }
        let f = jet.value;
        let n = T::from_usize_lossy(self.n as usize);
        let g0 = f.powi(self.n as i32);
        let g1 = n * f.powi(self.n as i32 - 1);
        let g2 = n * (n - T::one()) * f.powi(self.n as i32 - 2);
        Ok(jet.compose(g0, g1, g2))
    }

    fn describe(&self) -> String {
        format!("({})^{}", self.inner.describe(), self.n)
    }
}

/// Dynamics whose generator is applied.
#[derive(Clone, Debug, PartialEq)]
pub enum Dynamics<T> {
    Classical { mass: T, diffusion: DiffusionSpec<T> },
    Relativistic { epsilon: T },
    ClassicalLimit,
}

#[derive(Clone, Debug)]
pub struct Generator<'a, T> {
    pub dynamics: Dynamics<T>,
    pub potentials: &'a PotentialSpec<T>,
    pub anchored: bool,
}

impl<'a, T: Scalar> Generator<'a, T> {
    pub fn new(dynamics: Dynamics<T>, potentials: &'a PotentialSpec<T>, anchored: bool) -> Self {
        Self { dynamics, potentials, anchored }
    }

    /// `ℒf` at `state` from the jet of `f`.
    pub fn apply_jet(&self, jet: &Jet<T>, state: &PhaseState<T>) -> Result<T> {
        let grad = ForceField::new(self.potentials, self.anchored).gradient(state)?;
        let mut acc = T::zero();
        for i in 0..state.particles() {
            let (q, p) = (state.q(i), state.p(i));
            let (gq, gp, hp) = (&jet.grad_q[i], &jet.grad_p[i], &jet.hess_p[i]);
            let term = match &self.dynamics {
                Dynamics::Classical { mass, diffusion } => {
                    let m = *mass;
                    let dm = diffusion.d_matrix(&q);
                    p.dot(gq) - grad[i].dot(gp) / m - dm.mul_vec(&p).dot(gp) / m + dm.contract(hp) / (m * m)
                }
                Dynamics::Relativistic { epsilon } => {
                    let rel = DiffusionSpec::Relativistic { epsilon: *epsilon };
                    let s = (T::one() + *epsilon * p.norm_sq()).sqrt();
                    let dm = rel.d_matrix(&p);
                    p.dot(gq) / s - dm.mul_vec(&p).dot(gp) / s + rel.div_d(&p).dot(gp) - grad[i].dot(gp)
                        + dm.contract(hp)
                }
                Dynamics::ClassicalLimit => p.dot(gq) - p.dot(gp) - grad[i].dot(gp) + hp.trace(),
            };
            acc = acc + term;
        }
        Ok(acc)
    }

    pub fn apply(&self, f: &dyn SmoothObservable<T>, state: &PhaseState<T>) -> Result<T> {
        let jet = f.jet(state)?;
        self.apply_jet(&jet, state)
    }
}

impl Dynamics<f64> {
    pub fn from_config(cfg: &ModelConfig, specs: &Specs) -> Result<Self> {
        if cfg.model_kind.is_truncated() {
            return Err(Error::Kind { op: "apply_generator", kind: cfg.model_kind.name().into() });
        }
        match cfg.model_kind.base() {
            BaseKind::Classical => {
                Ok(Dynamics::Classical { mass: cfg.mass_or_err()?, diffusion: specs.diffusion_for(cfg)? })
            }
            BaseKind::Relativistic => Ok(Dynamics::Relativistic { epsilon: cfg.epsilon_or_err()? }),
            BaseKind::ClassicalLimit => Ok(Dynamics::ClassicalLimit),
            BaseKind::Overdamped => Err(Error::Kind { op: "apply_generator", kind: "overdamped".into() }),
        }
    }
}

/// `ℒf` for the model selected by `cfg`.
pub fn apply_generator(
    f: &dyn SmoothObservable<f64>,
    state: &PhaseState<f64>,
    cfg: &ModelConfig,
    specs: &Specs,
) -> Result<f64> {
    crate::state::check_domain(state, 0.0)?;
    Generator::new(Dynamics::from_config(cfg, specs)?, &specs.potentials, cfg.anchored()).apply(f, state)
}

/// Hamiltonian of the model selected by `cfg` (classical or relativistic family).
pub fn hamiltonian(state: &PhaseState<f64>, potentials: &PotentialSpec<f64>, cfg: &ModelConfig) -> Result<f64> {
    let energy = match cfg.model_kind.base() {
        BaseKind::Classical => Energy::Classical { mass: cfg.mass_or_err()? },
        BaseKind::Relativistic => Energy::Relativistic { epsilon: cfg.epsilon_or_err()? },
        BaseKind::ClassicalLimit => Energy::Classical { mass: 1.0 },
        BaseKind::Overdamped => return Err(Error::Kind { op: "hamiltonian", kind: "overdamped".into() }),
    };
    Hamiltonian::new(energy, potentials.clone(), cfg.anchored()).value(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{Confining, Pairwise};

    fn pot(pair: Pairwise<f64>) -> PotentialSpec<f64> {
        PotentialSpec::new(Confining::PolyConfining { lambda: 1.0, scale: 1.0 }, pair).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let s = PhaseState::at_rest(1, vec![0.0]).unwrap();
        let cfg = ModelConfig::new(crate::state::ModelKind::Classical, 1, 1, 0.1, 0).with_mass(1.0);
        assert_eq!(hamiltonian(&s, &pot(Pairwise::None), &cfg).unwrap(), 1.0);

        let mut u2 = pot(Pairwise::None);
        u2.confining = Confining::PolyConfining { lambda: 1.0, scale: 2.0 };
        let rcfg = ModelConfig::new(crate::state::ModelKind::Relativistic, 1, 1, 0.1, 0).with_epsilon(1.0);
        assert_eq!(hamiltonian(&s, &u2, &rcfg).unwrap(), 3.0);

        let s = PhaseState::new(1, vec![-1.0, 1.0], vec![1.0, -1.0]).unwrap();
        let cfg = ModelConfig::new(crate::state::ModelKind::Classical, 1, 2, 0.1, 0).with_mass(2.0);
        let h = hamiltonian(&s, &pot(Pairwise::LogRepulsive { k: 1.0 }), &cfg).unwrap();
        assert!((h - (6.0 - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn generator_of_energy_single_particle() {
        let p = pot(Pairwise::None);
        let h = Hamiltonian::new(Energy::Classical { mass: 1.0 }, p.clone(), false);
        let g = Generator::new(Dynamics::Classical { mass: 1.0, diffusion: DiffusionSpec::Constant { gamma: 1.0 } }, &p, false);
        let s = PhaseState::new(1, vec![0.3], vec![2.0]).unwrap();
        assert!((g.apply(&h, &s).unwrap() + 3.0).abs() < 1e-14);
    }

    #[test]
    fn generator_kills_constants() {
        let p = pot(Pairwise::LogRepulsive { k: 1.0 });
        let s = PhaseState::new(2, vec![0.1, 0.2, -0.4, 0.9], vec![3.0, -1.0, 0.5, 0.5]).unwrap();
        for dyn_ in [
            Dynamics::Classical { mass: 0.3, diffusion: DiffusionSpec::Constant { gamma: 2.0 } },
            Dynamics::Relativistic { epsilon: 0.2 },
            Dynamics::ClassicalLimit,
        ] {
            let g = Generator::new(dyn_, &p, false);
            assert_eq!(g.apply(&Constant(1.0), &s).unwrap(), 0.0);
        }
    }
}
