//! Phase-space state, model configuration and the no-collision domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SVec, MAX_DIM};
use crate::scalar::Scalar;

/// Positions and momenta (velocities for the classical model) of N particles in ℝ^d.
///
/// Coordinates are stored flat, particle-major: `positions[i*d + k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState<T> {
    dim: usize,
    positions: Vec<T>,
    momenta: Vec<T>,
    pub time: T,
}

impl<T: Scalar> PhaseState<T> {
    pub fn new(dim: usize, positions: Vec<T>, momenta: Vec<T>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Shape(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if positions.is_empty() || positions.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} position coordinates is not a positive multiple of d={dim}",
                positions.len()
            )));
        }
        if momenta.len() != positions.len() {
            return Err(Error::Shape("positions and momenta differ in length".into()));
        }
        Ok(Self { dim, positions, momenta, time: T::zero() })
    }

    /// Particles at the given positions with zero momenta.
    pub fn at_rest(dim: usize, positions: Vec<T>) -> Result<Self> {
        let n = positions.len();
        Self::new(dim, positions, vec![T::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particles(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn q(&self, i: usize) -> SVec<T> {
        SVec::from_slice(&self.positions[i * self.dim..(i + 1) * self.dim])
    }

    pub fn p(&self, i: usize) -> SVec<T> {
        SVec::from_slice(&self.momenta[i * self.dim..(i + 1) * self.dim])
    }

    pub fn set_q(&mut self, i: usize, v: &SVec<T>) {
        let d = self.dim;
        self.positions[i * d..(i + 1) * d].copy_from_slice(v.as_slice());
    }

    pub fn set_p(&mut self, i: usize, v: &SVec<T>) {
        let d = self.dim;
        self.momenta[i * d..(i + 1) * d].copy_from_slice(v.as_slice());
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn momenta(&self) -> &[T] {
        &self.momenta
    }

    pub fn positions_mut(&mut self) -> &mut [T] {
        &mut self.positions
    }

    pub fn momenta_mut(&mut self) -> &mut [T] {
        &mut self.momenta
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.momenta).all(|x| x.is_finite()) && self.time.is_finite()
    }

    pub fn cast<U: Scalar>(&self) -> PhaseState<U> {
        let c = |xs: &[T]| xs.iter().map(|x| U::lit(x.to_f64_lossy())).collect();
        PhaseState {
            dim: self.dim,
            positions: c(&self.positions),
            momenta: c(&self.momenta),
            time: U::lit(self.time.to_f64_lossy()),
        }
    }
}

/// Smallest pairwise distance; `+∞` for a single particle.
pub fn min_pair_distance<T: Scalar>(state: &PhaseState<T>) -> T {
    closest_pair(state).map_or(T::infinity(), |(_, _, r)| r)
}

fn closest_pair<T: Scalar>(state: &PhaseState<T>) -> Option<(usize, usize, T)> {
    let n = state.particles();
    let mut best: Option<(usize, usize, T)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (state.q(i) - state.q(j)).norm();
            if best.map_or(true, |(_, _, b)| r < b) {
                best = Some((i, j, r));
            }
        }
    }
    best
}

/// Checks finiteness, the no-collision domain, and shape against `cfg`.
pub fn validate_state<T: Scalar>(state: &PhaseState<T>, cfg: &ModelConfig) -> Result<()> {
    if state.dim() != cfg.dimension || state.particles() != cfg.particle_count {
        return Err(Error::Shape(format!(
            "state has N={}, d={}; config has N={}, d={}",
            state.particles(),
            state.dim(),
            cfg.particle_count,
            cfg.dimension
        )));
    }
    check_domain(state, T::zero())
}

/// Domain check with a collision guard: pairs closer than `guard` (or not strictly
/// ordered in d = 1) are violations.
pub fn check_domain<T: Scalar>(state: &PhaseState<T>, guard: T) -> Result<()> {
    for i in 0..state.particles() {
        if !state.q(i).is_finite() || !state.p(i).is_finite() {
            return Err(Error::NonFinite { particle: i });
        }
    }
    if state.dim() == 1 {
        let q = state.positions();
        for i in 1..q.len() {
            if q[i] <= q[i - 1] {
                return Err(Error::Ordering { i: i - 1, j: i });
            }
            if q[i] - q[i - 1] < guard {
                return Err(Error::Collision { i: i - 1, j: i, separation: (q[i] - q[i - 1]).to_f64_lossy() });
            }
        }
        return Ok(());
    }
    if let Some((i, j, r)) = closest_pair(state) {
        if !(r > T::zero()) || r < guard {
            return Err(Error::Collision { i, j, separation: r.to_f64_lossy() });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Classical,
    Relativistic,
    Overdamped,
    ClassicalLimit,
    ClassicalTruncated,
    RelativisticTruncated,
    OverdampedTruncated,
    ClassicalLimitTruncated,
}

/// The four underlying dynamics, ignoring truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    Classical,
    Relativistic,
    Overdamped,
    ClassicalLimit,
}

impl ModelKind {
    pub fn base(self) -> BaseKind {
        use ModelKind::*;
        match self {
            Classical | ClassicalTruncated => BaseKind::Classical,
            Relativistic | RelativisticTruncated => BaseKind::Relativistic,
            Overdamped | OverdampedTruncated => BaseKind::Overdamped,
            ClassicalLimit | ClassicalLimitTruncated => BaseKind::ClassicalLimit,
        }
    }

    pub fn is_truncated(self) -> bool {
        use ModelKind::*;
        matches!(self, ClassicalTruncated | RelativisticTruncated | OverdampedTruncated | ClassicalLimitTruncated)
    }

    pub fn needs_mass(self) -> bool {
        self.base() == BaseKind::Classical
    }

    pub fn needs_epsilon(self) -> bool {
        self.base() == BaseKind::Relativistic
    }

    /// For a single particle the relativistic-family models keep G as an external
    /// potential centred at the origin; the classical family has no pair term.
    pub fn anchors_single_particle(self) -> bool {
        matches!(self.base(), BaseKind::Relativistic | BaseKind::ClassicalLimit)
    }

    pub fn name(self) -> &'static str {
        use ModelKind::*;
        match self {
            Classical => "classical",
            Relativistic => "relativistic",
            Overdamped => "overdamped",
            ClassicalLimit => "classical_limit",
            ClassicalTruncated => "classical_truncated",
            RelativisticTruncated => "relativistic_truncated",
            OverdampedTruncated => "overdamped_truncated",
            ClassicalLimitTruncated => "classical_limit_truncated",
        }
    }
}

pub const DEFAULT_COLLISION_GUARD: f64 = 1e-10;

fn default_guard() -> f64 {
    DEFAULT_COLLISION_GUARD
}

fn default_true() -> bool {
    true
}

/// Model selection and numerical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    pub dimension: usize,
    pub particle_count: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default = "default_guard")]
    pub collision_guard: f64,
    /// Overdamped kinds only: include the noise-induced drift div D⁻¹.
    #[serde(default = "default_true")]
    pub noise_induced_drift: bool,
}

impl ModelConfig {
    pub fn new(model_kind: ModelKind, dimension: usize, particle_count: usize, dt: f64, seed: u64) -> Self {
        Self {
            model_kind,
            mass: None,
            epsilon: None,
            truncation_radius: None,
            dimension,
            particle_count,
            dt,
            seed,
            collision_guard: DEFAULT_COLLISION_GUARD,
            noise_induced_drift: true,
        }
    }

    pub fn with_mass(mut self, m: f64) -> Self {
        self.mass = Some(m);
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn with_truncation(mut self, r: f64) -> Self {
        self.truncation_radius = Some(r);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dimension == 0 || self.dimension > MAX_DIM {
            return bad(format!("dimension must be in 1..={MAX_DIM}, got {}", self.dimension));
        }
        if self.particle_count == 0 {
            return bad("particle_count must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.collision_guard > 0.0) {
            return bad(format!("collision_guard must be positive, got {}", self.collision_guard));
        }
        if let Some(m) = self.mass {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("mass must be positive, got {m}"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be positive, got {e}"));
            }
        }
        if let Some(r) = self.truncation_radius {
            if !(r >= 1.0 && r.is_finite()) {
                return bad(format!("truncation_radius must be at least 1, got {r}"));
            }
        }
        let kind = self.model_kind;
        if kind.needs_mass() && self.mass.is_none() {
            return bad(format!("{} requires mass", kind.name()));
        }
        if kind.needs_epsilon() && self.epsilon.is_none() {
            return bad(format!("{} requires epsilon", kind.name()));
        }
        if kind.is_truncated() && self.truncation_radius.is_none() {
            return bad(format!("{} requires truncation_radius", kind.name()));
        }
        Ok(())
    }

    pub fn mass_or_err(&self) -> Result<f64> {
        self.mass.ok_or_else(|| Error::Config(format!("{} requires mass", self.model_kind.name())))
    }

    pub fn epsilon_or_err(&self) -> Result<f64> {
        self.epsilon.ok_or_else(|| Error::Config(format!("{} requires epsilon", self.model_kind.name())))
    }

    /// Truncation radius if the kind is truncated.
    pub fn active_truncation(&self) -> Option<f64> {
        if self.model_kind.is_truncated() {
            self.truncation_radius
        } else {
            None
        }
    }

    pub fn anchored(&self) -> bool {
        self.particle_count == 1 && self.model_kind.anchors_single_particle()
    }
}

/// Constants of the growth and singularity assumptions on U, G and D.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    /// Signed; the relativistic two-term expansion uses it with sign.
    pub a5: f64,
    pub a6: f64,
    pub gamma_lower: f64,
    pub gamma_upper: f64,
}

impl AssumptionConstants {
    pub fn validate(&self, relativistic_multi: bool) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.lambda >= 1.0) {
            return bad("lambda must be at least 1");
        }
        if !(self.beta1 >= 1.0) {
            return bad("beta1 must be at least 1");
        }
        if !(self.beta2 >= 0.0 && self.beta2 < self.beta1) {
            return bad("beta2 must lie in [0, beta1)");
        }
        if !(self.a1 > 0.0 && self.a2 > 0.0 && self.a3 > 0.0 && self.a4 > 0.0) {
            return bad("a1..a4 must be positive");
        }
        if !(self.a6 >= 0.0) {
            return bad("a6 must be nonnegative");
        }
        if !(self.gamma_lower > 0.0 && self.gamma_lower <= self.gamma_upper) {
            return bad("ellipticity bounds must satisfy 0 < lower <= upper");
        }
        if relativistic_multi && !(self.beta1 > 1.0 && self.beta1 <= 2.0) {
            return bad("relativistic multi-particle use needs beta1 in (1, 2]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, d: usize) -> ModelConfig {
        ModelConfig::new(ModelKind::Classical, d, n, 1e-3, 1).with_mass(1.0)
    }

    #[test]
    fn min_pair_distance_examples() {
        let s = PhaseState::at_rest(1, vec![0.0, 3.0]).unwrap();
        assert_eq!(min_pair_distance(&s), 3.0);
        let s = PhaseState::at_rest(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(min_pair_distance(&s), 1.0);
        let s = PhaseState::at_rest(2, vec![0.5f64, 0.5]).unwrap();
        assert!(min_pair_distance(&s).is_infinite());
    }

    #[test]
    fn validate_examples() {
        let ok = PhaseState::at_rest(1, vec![1.0, 2.0]).unwrap();
        assert!(validate_state(&ok, &cfg(2, 1)).is_ok());
        let swapped = PhaseState::at_rest(1, vec![2.0, 1.0]).unwrap();
        assert_eq!(validate_state(&swapped, &cfg(2, 1)), Err(Error::Ordering { i: 0, j: 1 }));
        let coincident = PhaseState::at_rest(2, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(validate_state(&coincident, &cfg(2, 2)), Err(Error::Collision { i: 0, j: 1, .. })));
    }

    #[test]
    fn validate_reports_non_finite_and_shape() {
        let s = PhaseState::new(1, vec![0.0, f64::NAN], vec![0.0, 0.0]).unwrap();
        assert_eq!(validate_state(&s, &cfg(2, 1)), Err(Error::NonFinite { particle: 1 }));
        let s = PhaseState::at_rest(1, vec![0.0]).unwrap();
        assert!(matches!(validate_state(&s, &cfg(2, 1)), Err(Error::Shape(_))));
    }

    #[test]
    fn config_invariants() {
        assert!(cfg(1, 1).validate().is_ok());
        let mut c = cfg(1, 1);
        c.dt = -1.0;
        assert!(c.validate().is_err());
        let c = ModelConfig::new(ModelKind::RelativisticTruncated, 1, 1, 1e-3, 0).with_epsilon(0.1);
        assert!(c.validate().is_err());
        assert!(c.clone().with_truncation(0.5).validate().is_err());
        assert!(c.with_truncation(5.0).validate().is_ok());
        let c = ModelConfig::new(ModelKind::Classical, 1, 1, 1e-3, 0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = ModelConfig::new(ModelKind::RelativisticTruncated, 2, 3, 0.01, 42)
            .with_epsilon(0.25)
            .with_truncation(5.0);
        let text = toml::to_string(&c).unwrap();
        let back: ModelConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(text.contains("model_kind = \"relativistic_truncated\""));
    }
}
