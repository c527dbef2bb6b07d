//! Confining potential U, singular pair potential G, and assumption audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SMat, SVec};
use crate::scalar::Scalar;
use crate::state::{AssumptionConstants, PhaseState};
use crate::truncation::theta;

/// `U(q) = scale·(1+|q|²)^((λ+1)/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Confining<T> {
    PolyConfining { lambda: T, scale: T },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Pairwise<T> {
    None,
    /// `G(q) = −k·log|q|`
    LogRepulsive { k: T },
    /// `G(q) = k·|q|^(1−β₁)/(β₁−1)`
    PowerRepulsive { k: T, beta1: T },
    /// `G(q) = A|q|⁻¹² − B|q|⁻⁶`
    LennardJones { a: T, b: T },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec<T> {
    pub confining: Confining<T>,
    pub pairwise: Pairwise<T>,
    pub constants: AssumptionConstants,
}

impl<T: Scalar> PotentialSpec<T> {
    /// Spec with assumption constants derived from the variants.
    pub fn new(confining: Confining<T>, pairwise: Pairwise<T>) -> Result<Self> {
        let spec = Self { confining, pairwise, constants: derive_constants(&confining, &pairwise) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let Confining::PolyConfining { lambda, scale } = self.confining;
        if !(lambda >= T::one()) {
            return Err(Error::Config("confining lambda must be at least 1".into()));
        }
        if !(scale >= T::one()) {
            return Err(Error::Config("confining scale must be at least 1 so that U >= 1".into()));
        }
        match self.pairwise {
            Pairwise::None => {}
            Pairwise::LogRepulsive { k } => {
                if !(k > T::zero()) {
                    return Err(Error::Config("log_repulsive k must be positive".into()));
                }
            }
            Pairwise::PowerRepulsive { k, beta1 } => {
                if !(k > T::zero()) || !(beta1 > T::one()) {
                    return Err(Error::Config("power_repulsive needs k > 0 and beta1 > 1".into()));
                }
            }
            Pairwise::LennardJones { a, b } => {
                if !(a > T::zero()) || !(b >= T::zero()) {
                    return Err(Error::Config("lennard_jones needs A > 0 and B >= 0".into()));
                }
            }
        }
        self.constants.validate(false)
    }

    pub fn has_pairwise(&self) -> bool {
        !matches!(self.pairwise, Pairwise::None)
    }

    pub fn eval_u(&self, q: &SVec<T>) -> T {
        let Confining::PolyConfining { lambda, scale } = self.confining;
        scale * (T::one() + q.norm_sq()).powf((lambda + T::one()) / T::lit(2.0))
    }

    pub fn grad_u(&self, q: &SVec<T>) -> SVec<T> {
        let Confining::PolyConfining { lambda, scale } = self.confining;
        let f = scale * (lambda + T::one()) * (T::one() + q.norm_sq()).powf((lambda - T::one()) / T::lit(2.0));
        q.scale(f)
    }

    pub fn hess_u(&self, q: &SVec<T>) -> SMat<T> {
        let Confining::PolyConfining { lambda, scale } = self.confining;
        let w = T::one() + q.norm_sq();
        let c = scale * (lambda + T::one()) * w.powf((lambda - T::lit(3.0)) / T::lit(2.0));
        SMat::scaled_identity(q.dim(), c * w) + SMat::outer(q, q).scale(c * (lambda - T::one()))
    }

    /// Radial profile φ(r), φ'(r), φ''(r) of G.
    fn radial(&self, r: T) -> (T, T, T) {
        match self.pairwise {
            Pairwise::None => (T::zero(), T::zero(), T::zero()),
            Pairwise::LogRepulsive { k } => (-k * r.ln(), -k / r, k / (r * r)),
            Pairwise::PowerRepulsive { k, beta1 } => {
                let rb = r.powf(-beta1);
                (k * rb * r / (beta1 - T::one()), -k * rb, k * beta1 * rb / r)
            }
            Pairwise::LennardJones { a, b } => {
                let r6 = r.powi(-6);
                let r12 = r6 * r6;
                (
                    a * r12 - b * r6,
                    (-T::lit(12.0) * a * r12 + T::lit(6.0) * b * r6) / r,
                    (T::lit(156.0) * a * r12 - T::lit(42.0) * b * r6) / (r * r),
                )
            }
        }
    }

    fn separation(&self, q: &SVec<T>) -> Result<T> {
        let r = q.norm();
        if self.has_pairwise() && !(r > T::zero()) {
            return Err(Error::SingularInput);
        }
        Ok(r)
    }

    pub fn eval_g(&self, q: &SVec<T>) -> Result<T> {
        let r = self.separation(q)?;
        if !self.has_pairwise() {
            return Ok(T::zero());
        }
        Ok(self.radial(r).0)
    }

    pub fn grad_g(&self, q: &SVec<T>) -> Result<SVec<T>> {
        let r = self.separation(q)?;
        if !self.has_pairwise() {
            return Ok(SVec::zeros(q.dim()));
        }
        let (_, d1, _) = self.radial(r);
        Ok(q.scale(d1 / r))
    }

    pub fn hess_g(&self, q: &SVec<T>) -> Result<SMat<T>> {
        let r = self.separation(q)?;
        if !self.has_pairwise() {
            return Ok(SMat::zeros(q.dim()));
        }
        let (_, d1, d2) = self.radial(r);
        let radial = (d2 - d1 / r) / (r * r);
        Ok(SMat::scaled_identity(q.dim(), d1 / r) + SMat::outer(q, q).scale(radial))
    }
}

fn derive_constants<T: Scalar>(confining: &Confining<T>, pairwise: &Pairwise<T>) -> AssumptionConstants {
    let Confining::PolyConfining { lambda, scale } = *confining;
    let (l, s) = (lambda.to_f64_lossy(), scale.to_f64_lossy());
    let a1_u = s * (l + 1.0) * l.max(1.0) * 2f64.powf((l - 1.0) / 2.0);
    let (beta1, beta2, a1_g, a4, a5) = match *pairwise {
        Pairwise::None => (1.0, 0.0, 0.0, 1.0, 0.0),
        Pairwise::LogRepulsive { k } => (1.0, 0.0, k.to_f64_lossy(), k.to_f64_lossy(), 0.0),
        Pairwise::PowerRepulsive { k, beta1 } => {
            let (k, b) = (k.to_f64_lossy(), beta1.to_f64_lossy());
            (b, 0.0, (k / (b - 1.0)).max(k * b).max(k), k, 0.0)
        }
        Pairwise::LennardJones { a, b } => {
            let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
            (13.0, 7.0, 156.0 * a + 42.0 * b, 12.0 * a, -6.0 * b)
        }
    };
    AssumptionConstants {
        lambda: l,
        beta1,
        beta2,
        a1: a1_u.max(a1_g),
        a2: s * (l + 1.0),
        a3: 1.0,
        a4,
        a5,
        a6: 0.0,
        gamma_lower: 1.0,
        gamma_upper: 1.0,
    }
}

/// Potential energy and forces of an N-particle configuration, optionally truncated.
///
/// With `anchored` set and a single particle, G acts between the particle and the origin.
#[derive(Clone, Copy, Debug)]
pub struct ForceField<'a, T> {
    pub spec: &'a PotentialSpec<T>,
    pub anchored: bool,
    pub truncation: Option<T>,
}

impl<'a, T: Scalar> ForceField<'a, T> {
    pub fn new(spec: &'a PotentialSpec<T>, anchored: bool) -> Self {
        Self { spec, anchored, truncation: None }
    }

    pub fn truncated(mut self, r: Option<T>) -> Self {
        self.truncation = r;
        self
    }

    fn anchor_active(&self, state: &PhaseState<T>) -> bool {
        self.anchored && state.particles() == 1 && self.spec.has_pairwise()
    }

    /// `ΣU(q_i) + Σ_{i<j} G(q_i − q_j)` (plus `G(q)` when anchored).
    pub fn energy(&self, state: &PhaseState<T>) -> Result<T> {
        Ok(self.confining_energy(state) + self.pair_energy(state)?)
    }

    pub fn confining_energy(&self, state: &PhaseState<T>) -> T {
        (0..state.particles()).fold(T::zero(), |s, i| s + self.spec.eval_u(&state.q(i)))
    }

    pub fn pair_energy(&self, state: &PhaseState<T>) -> Result<T> {
        let n = state.particles();
        if self.anchor_active(state) {
            return self.spec.eval_g(&state.q(0));
        }
        let mut e = T::zero();
        if !self.spec.has_pairwise() {
            return Ok(e);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                e = e + self.spec.eval_g(&(state.q(i) - state.q(j)))?;
            }
        }
        Ok(e)
    }

    /// `θ∇U(q_i) + Σ_{j≠i} θ∇G(q_i − q_j)` per particle; the force is its negative.
    pub fn gradient(&self, state: &PhaseState<T>) -> Result<Vec<SVec<T>>> {
        let n = state.particles();
        let mut out: Vec<SVec<T>> = (0..n)
            .map(|i| {
                let q = state.q(i);
                let g = self.spec.grad_u(&q);
                match self.truncation {
                    Some(r) => g.scale(theta(r, q.norm())),
                    None => g,
                }
            })
            .collect();
        if !self.spec.has_pairwise() {
            return Ok(out);
        }
        if self.anchor_active(state) {
            let q = state.q(0);
            out[0] += self.cut_pair(&q, self.spec.grad_g(&q)?);
            return Ok(out);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let u = state.q(i) - state.q(j);
                let g = self.cut_pair(&u, self.spec.grad_g(&u)?);
                out[i] += g;
                out[j] -= g;
            }
        }
        Ok(out)
    }

    fn cut_pair(&self, u: &SVec<T>, g: SVec<T>) -> SVec<T> {
        match self.truncation {
            Some(r) => g.scale(theta(r, T::one() / u.norm())),
            None => g,
        }
    }
}

/// Constants of the two-sided bound on `Σ_i|Σ_{j≠i}∇G(q_i−q_j)|²` in terms of
/// `Σ_{i≠j}|q_i−q_j|^{−2β₁}`, available for the pure log and power variants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradGSandwich {
    pub a7: f64,
    pub a8: f64,
    pub a9: f64,
    pub a10: f64,
    pub beta1: f64,
}

impl<T: Scalar> PotentialSpec<T> {
    pub fn grad_g_sandwich(&self, n: usize) -> Option<GradGSandwich> {
        let (k, beta1) = match self.pairwise {
            Pairwise::LogRepulsive { k } => (k.to_f64_lossy(), 1.0),
            Pairwise::PowerRepulsive { k, beta1 } => (k.to_f64_lossy(), beta1.to_f64_lossy()),
            _ => return None,
        };
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        Some(GradGSandwich {
            a7: 2.0 * k * k / (nf * (nf - 1.0).powi(2)),
            a8: 0.0,
            a9: k * k * (nf - 1.0),
            a10: 0.0,
            beta1,
        })
    }
}

/// Slack statistics for one inequality `lhs ≤ rhs` (slack = rhs − lhs).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityAudit {
    pub name: String,
    pub samples: usize,
    pub worst_slack: f64,
    pub worst_radius: f64,
    pub violations: usize,
    pub violation_radius_min: Option<f64>,
    pub violation_radius_max: Option<f64>,
    pub first_violations: Vec<(f64, f64)>,
}

impl InequalityAudit {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            samples: 0,
            worst_slack: f64::INFINITY,
            worst_radius: f64::NAN,
            violations: 0,
            violation_radius_min: None,
            violation_radius_max: None,
            first_violations: Vec::new(),
        }
    }

    fn record(&mut self, radius: f64, lhs: f64, rhs: f64) {
        self.record_scaled(radius, lhs, rhs, 0.0);
    }

    /// `scale` is the magnitude of the terms that cancel inside `lhs`; rounding of that
    /// size is not counted as a violation.
    fn record_scaled(&mut self, radius: f64, lhs: f64, rhs: f64, scale: f64) {
        let slack = rhs - lhs;
        self.samples += 1;
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.worst_radius = radius;
        }
        let tol = 1e-12 * (1.0 + lhs.abs().max(rhs.abs()).max(scale));
        if slack < -tol {
            self.violations += 1;
            self.violation_radius_min = Some(self.violation_radius_min.map_or(radius, |r| r.min(radius)));
            self.violation_radius_max = Some(self.violation_radius_max.map_or(radius, |r| r.max(radius)));
            if self.first_violations.len() < 8 {
                self.first_violations.push((radius, slack));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub dimension: usize,
    pub constants: AssumptionConstants,
    pub radius_range: (f64, f64),
    pub checks: Vec<InequalityAudit>,
    /// Smallest sampled `U(q) + G(q)`; potentials are never shifted.
    pub min_u_plus_g: f64,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, name: &str) -> Option<&InequalityAudit> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn spectral_norm_sym(m: &SMat<f64>) -> f64 {
    // Radial potentials have Hessians a·I + b·q̂q̂ᵀ; for a general symmetric matrix use power
    // iteration on m², which is adequate for d ≤ 3.
    let d = m.dim();
    let m2 = m.matmul(m);
    let mut v = SVec::from_slice(&[1.0, 0.7, 0.3][..d]);
    let mut lam = 0.0;
    for _ in 0..200 {
        let w = m2.mul_vec(&v);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        lam = n / v.norm();
        v = w.scale(1.0 / n);
    }
    lam.sqrt()
}

impl PotentialSpec<f64> {
    /// Samples `|q|` log-uniformly over `radius_range` and directions uniformly on the
    /// sphere; checks the growth and singularity inequalities with `self.constants`.
    pub fn audit_assumptions(
        &self,
        dim: usize,
        sample_count: usize,
        radius_range: (f64, f64),
        seed: u64,
    ) -> Result<AuditReport> {
        let (lo, hi) = radius_range;
        if sample_count == 0 || !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument("audit needs sample_count >= 1 and 0 < lo <= hi".into()));
        }
        let c = self.constants;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names_u = ["U_growth", "gradU_growth", "gradU_coercive", "hessU_growth", "gradU_lower", "gradU_upper"];
        let names_g = ["G_growth", "gradG_growth", "hessG_growth", "gradG_leading_term", "gradG_two_term"];
        let mut checks: Vec<InequalityAudit> = names_u.iter().map(|n| InequalityAudit::new(n)).collect();
        if self.has_pairwise() {
            checks.extend(names_g.iter().map(|n| InequalityAudit::new(n)));
        }
        let mut min_ug = f64::INFINITY;
        for _ in 0..sample_count {
            let r = (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp();
            let mut dir = SVec::zeros(dim);
            loop {
                for k in 0..dim {
                    dir[k] = rng.sample(StandardNormal);
                }
                if dir.norm() > 1e-12 {
                    break;
                }
            }
            let q = dir.scale(r / dir.norm());
            let r = q.norm();
            let u = self.eval_u(&q);
            let gu = self.grad_u(&q);
            let l = c.lambda;
            checks[0].record(r, u.abs(), c.a1 * (1.0 + r.powf(l + 1.0)));
            checks[1].record(r, gu.norm(), c.a1 * (1.0 + r.powf(l)));
            checks[2].record(r, c.a2 * r.powf(l + 1.0) - c.a3, gu.dot(&q));
            checks[3].record(r, spectral_norm_sym(&self.hess_u(&q)), c.a1 * (1.0 + r.powf(l - 1.0)));
            let n = gu.norm();
            checks[4].record(r, c.a2 * r.powf(l) - c.a2.max(c.a3), n);
            checks[5].record(r, n, c.a1 * r.powf(l) + c.a1);
            let mut ug = u;
            if self.has_pairwise() {
                let g = self.eval_g(&q)?;
                ug += g;
                let gg = self.grad_g(&q)?;
                let b1 = c.beta1;
                checks[6].record(r, g.abs(), c.a1 * (1.0 + r + r.powf(-b1)));
                checks[7].record(r, gg.norm(), c.a1 * (1.0 + r.powf(-b1)));
                checks[8].record(r, spectral_norm_sym(&self.hess_g(&q)?), c.a1 * (1.0 + r.powf(-b1 - 1.0)));
                let lead = gg + q.scale(c.a4 * r.powf(-b1 - 1.0));
                checks[9].record_scaled(r, lead.norm(), c.a5.abs() * r.powf(-c.beta2) + c.a6, gg.norm());
                let two = lead + q.scale(c.a5 * r.powf(-c.beta2 - 1.0));
                checks[10].record_scaled(r, two.norm(), c.a6, gg.norm());
            }
            min_ug = min_ug.min(ug);
        }
        Ok(AuditReport { dimension: dim, constants: c, radius_range, checks, min_u_plus_g: min_ug })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(lambda: f64) -> Confining<f64> {
        Confining::PolyConfining { lambda, scale: 1.0 }
    }

    #[test]
    fn confining_examples() {
        let s = PotentialSpec::new(quad(1.0), Pairwise::None).unwrap();
        assert_eq!(s.eval_u(&SVec::zeros(2)), 1.0);
        assert_eq!(s.grad_u(&SVec::zeros(2)), SVec::zeros(2));
        let q = SVec::from_slice(&[3.0, 4.0]);
        assert!((s.eval_u(&q) - 26.0).abs() < 1e-12);
        assert_eq!(s.grad_u(&q), SVec::from_slice(&[6.0, 8.0]));
        let s2 = PotentialSpec::new(quad(2.0), Pairwise::None).unwrap();
        assert!((s2.eval_u(&SVec::from_slice(&[1.0, 0.0])) - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn pairwise_examples() {
        let log = PotentialSpec::new(quad(1.0), Pairwise::LogRepulsive { k: 1.0 }).unwrap();
        let r = SVec::from_slice(&[2.0, 0.0]);
        assert!((log.eval_g(&r).unwrap() + 2f64.ln()).abs() < 1e-15);
        assert_eq!(log.grad_g(&r).unwrap(), SVec::from_slice(&[-0.5, 0.0]));
        let pw = PotentialSpec::new(quad(1.0), Pairwise::PowerRepulsive { k: 1.0, beta1: 2.0 }).unwrap();
        let r = SVec::from_slice(&[1.0, 0.0]);
        assert_eq!(pw.eval_g(&r).unwrap(), 1.0);
        assert_eq!(pw.grad_g(&r).unwrap(), SVec::from_slice(&[-1.0, 0.0]));
        assert_eq!(pw.eval_g(&SVec::zeros(2)), Err(Error::SingularInput));
    }

    #[test]
    fn derived_constants_match_variant() {
        let pw = PotentialSpec::new(quad(1.0), Pairwise::PowerRepulsive { k: 3.0, beta1: 2.0 }).unwrap();
        assert_eq!((pw.constants.a4, pw.constants.a5, pw.constants.a6), (3.0, 0.0, 0.0));
        assert_eq!(pw.constants.beta1, 2.0);
        let lj = PotentialSpec::new(quad(1.0), Pairwise::LennardJones { a: 1.0, b: 1.0 }).unwrap();
        assert_eq!((lj.constants.beta1, lj.constants.beta2, lj.constants.a4), (13.0, 7.0, 12.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialSpec::new(quad(0.5), Pairwise::None).is_err());
        assert!(PotentialSpec::new(Confining::PolyConfining { lambda: 1.0, scale: 0.5 }, Pairwise::None).is_err());
        assert!(PotentialSpec::new(quad(1.0), Pairwise::PowerRepulsive { k: 1.0, beta1: 1.0 }).is_err());
        assert!(PotentialSpec::new(quad(1.0), Pairwise::LogRepulsive { k: -1.0 }).is_err());
    }

    #[test]
    fn audit_quadratic_with_unit_constants() {
        let mut s = PotentialSpec::new(quad(1.0), Pairwise::None).unwrap();
        s.constants.a2 = 1.0;
        s.constants.a3 = 1.0;
        let rep = s.audit_assumptions(2, 2000, (1e-3, 1e3), 7).unwrap();
        assert_eq!(rep.check("gradU_coercive").unwrap().violations, 0);
        assert_eq!(rep.total_violations(), 0);
        assert!(rep.min_u_plus_g >= 1.0);
    }

    #[test]
    fn audit_power_law_leading_term_is_exact() {
        let s = PotentialSpec::new(quad(1.0), Pairwise::PowerRepulsive { k: 1.0, beta1: 2.0 }).unwrap();
        let rep = s.audit_assumptions(3, 2000, (1e-3, 1e3), 3).unwrap();
        let lead = rep.check("gradG_leading_term").unwrap();
        assert_eq!(lead.violations, 0);
        assert!(lead.worst_slack.abs() < 1e-6);
        assert_eq!(rep.total_violations(), 0);
    }

    #[test]
    fn audit_lennard_jones_locates_failing_window() {
        let mut s = PotentialSpec::new(quad(1.0), Pairwise::LennardJones { a: 1.0, b: 1.0 }).unwrap();
        assert_eq!(s.audit_assumptions(2, 4000, (1e-2, 1e2), 5).unwrap().total_violations(), 0);
        s.constants.a1 = 1.0;
        let rep = s.audit_assumptions(2, 4000, (1e-2, 1e2), 5).unwrap();
        let g2 = rep.check("gradG_growth").unwrap();
        assert!(g2.violations > 0);
        // |∇G| ≈ 12 r⁻¹³ only beats 1 + r⁻¹³ close to the core.
        assert!(g2.violation_radius_max.unwrap() < 1.5);
    }
}
