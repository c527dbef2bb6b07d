//! Diffusion matrices: classical `g(x)·I` and relativistic `D(p) = (I + ε p⊗p)/√(1+ε|p|²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SMat, SVec};
use crate::scalar::Scalar;
use crate::truncation::theta;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DiffusionSpec<T> {
    /// `g ≡ γ`
    Constant { gamma: T },
    /// `g(x) = γ₀ + α·sin(κ·x)`
    SinePerturbed { gamma0: T, alpha: T, kappa: Vec<T> },
    Relativistic { epsilon: T },
}

impl<T: Scalar> DiffusionSpec<T> {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            DiffusionSpec::Constant { gamma } => {
                if !(*gamma > T::zero()) {
                    return Err(Error::Config("constant diffusion needs gamma > 0".into()));
                }
            }
            DiffusionSpec::SinePerturbed { gamma0, alpha, kappa } => {
                if !(*alpha >= T::zero() && *gamma0 > *alpha) {
                    return Err(Error::Config("sine_perturbed diffusion needs gamma0 > alpha >= 0".into()));
                }
                if kappa.len() != dim || kappa.iter().any(|k| !k.is_finite()) {
                    return Err(Error::Config(format!("sine_perturbed kappa must have {dim} finite entries")));
                }
            }
            DiffusionSpec::Relativistic { epsilon } => {
                if !(*epsilon > T::zero()) {
                    return Err(Error::Config("relativistic diffusion needs epsilon > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_classical(&self) -> bool {
        !matches!(self, DiffusionSpec::Relativistic { .. })
    }

    /// Uniform ellipticity bounds `(γ̲, γ̄)` of a classical field.
    pub fn ellipticity(&self) -> Option<(T, T)> {
        match self {
            DiffusionSpec::Constant { gamma } => Some((*gamma, *gamma)),
            DiffusionSpec::SinePerturbed { gamma0, alpha, .. } => Some((*gamma0 - *alpha, *gamma0 + *alpha)),
            DiffusionSpec::Relativistic { .. } => None,
        }
    }

    fn kind_error(&self, op: &'static str) -> Error {
        Error::Kind { op, kind: "relativistic diffusion".into() }
    }

    /// Scalar field g and its gradient for classical kinds.
    fn scalar_field(&self, x: &SVec<T>) -> Option<(T, SVec<T>)> {
        match self {
            DiffusionSpec::Constant { gamma } => Some((*gamma, SVec::zeros(x.dim()))),
            DiffusionSpec::SinePerturbed { gamma0, alpha, kappa } => {
                let k = SVec::from_slice(kappa);
                let phase = k.dot(x);
                Some((*gamma0 + *alpha * phase.sin(), k.scale(*alpha * phase.cos())))
            }
            DiffusionSpec::Relativistic { .. } => None,
        }
    }

    pub fn d_matrix(&self, z: &SVec<T>) -> SMat<T> {
        match self {
            DiffusionSpec::Relativistic { epsilon } => {
                let s = (T::one() + *epsilon * z.norm_sq()).sqrt();
                (SMat::identity(z.dim()) + SMat::outer(z, z).scale(*epsilon)).scale(T::one() / s)
            }
            _ => {
                let (g, _) = self.scalar_field(z).expect("classical");
                SMat::scaled_identity(z.dim(), g)
            }
        }
    }

    /// `√D = α·I + β·z⊗z`; for the relativistic kind `α = w^{-1/4}`,
    /// `β = ε·w^{-1/4}/(√w + 1)` with `w = 1 + ε|z|²`.
    pub fn sqrt_d(&self, z: &SVec<T>) -> SMat<T> {
        match self {
            DiffusionSpec::Relativistic { epsilon } => {
                let w = T::one() + *epsilon * z.norm_sq();
                let a = w.powf(T::lit(-0.25));
                let b = *epsilon * a / (w.sqrt() + T::one());
                SMat::scaled_identity(z.dim(), a) + SMat::outer(z, z).scale(b)
            }
            _ => {
                let (g, _) = self.scalar_field(z).expect("classical");
                SMat::scaled_identity(z.dim(), g.sqrt())
            }
        }
    }

    /// `∂D/∂z_j`.
    pub fn partial_d(&self, z: &SVec<T>, j: usize) -> SMat<T> {
        let d = z.dim();
        match self {
            DiffusionSpec::Relativistic { epsilon } => {
                let eps = *epsilon;
                let s = (T::one() + eps * z.norm_sq()).sqrt();
                let mut ej = SVec::zeros(d);
                ej[j] = T::one();
                let sym = SMat::outer(&ej, z) + SMat::outer(z, &ej);
                let full = SMat::identity(d) + SMat::outer(z, z).scale(eps);
                sym.scale(eps / s) - full.scale(eps * z[j] / (s * s * s))
            }
            _ => {
                let (_, grad) = self.scalar_field(z).expect("classical");
                SMat::scaled_identity(d, grad[j])
            }
        }
    }

    /// Row divergence `[div D]_i = Σ_j ∂_j D_ij`.
    pub fn div_d(&self, z: &SVec<T>) -> SVec<T> {
        match self {
            DiffusionSpec::Relativistic { epsilon } => {
                let s = (T::one() + *epsilon * z.norm_sq()).sqrt();
                z.scale(*epsilon * T::from_usize_lossy(z.dim()) / s)
            }
            _ => self.scalar_field(z).expect("classical").1,
        }
    }

    pub fn inv_d(&self, z: &SVec<T>) -> Result<SMat<T>> {
        let (g, _) = self.scalar_field(z).ok_or_else(|| self.kind_error("inv_D"))?;
        Ok(SMat::scaled_identity(z.dim(), T::one() / g))
    }

    /// `[div D⁻¹]_i = −Σ_j (D⁻¹ ∂_jD D⁻¹)_ij`.
    pub fn div_inv_d(&self, z: &SVec<T>) -> Result<SVec<T>> {
        let inv = self.inv_d(z)?;
        let d = z.dim();
        let mut out = SVec::zeros(d);
        for j in 0..d {
            let m = inv.matmul(&self.partial_d(z, j)).matmul(&inv);
            for i in 0..d {
                out[i] = out[i] - m.get(i, j);
            }
        }
        Ok(out)
    }

    /// `√(D⁻¹)` for classical kinds.
    pub fn sqrt_inv_d(&self, z: &SVec<T>) -> Result<SMat<T>> {
        let (g, _) = self.scalar_field(z).ok_or_else(|| self.kind_error("sqrt_inv_D"))?;
        Ok(SMat::scaled_identity(z.dim(), T::one() / g.sqrt()))
    }
}

/// `M = θ_R(|p|)(D(p) − I) + I` and `√M` for the relativistic matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedDiffusion<T> {
    pub m: SMat<T>,
    pub sqrt_m: SMat<T>,
}

pub fn truncated_d<T: Scalar>(epsilon: T, p: &SVec<T>, r: T) -> TruncatedDiffusion<T> {
    let d = p.dim();
    let th = theta(r, p.norm());
    let s = (T::one() + epsilon * p.norm_sq()).sqrt();
    // Eigenvalues along p and orthogonal to p.
    let mu_par = th * (s - T::one()) + T::one();
    let mu_perp = th * (T::one() / s - T::one()) + T::one();
    let id = SMat::identity(d);
    let ppt = SMat::outer(p, p);
    let m = id.scale(mu_perp) + ppt.scale(th * epsilon / s);
    let coef = th * epsilon / (s * (mu_par.sqrt() + mu_perp.sqrt()));
    let sqrt_m = id.scale(mu_perp.sqrt()) + ppt.scale(coef);
    TruncatedDiffusion { m, sqrt_m }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(eps: f64) -> DiffusionSpec<f64> {
        DiffusionSpec::Relativistic { epsilon: eps }
    }

    fn sine(d: usize) -> DiffusionSpec<f64> {
        DiffusionSpec::SinePerturbed { gamma0: 2.0, alpha: 1.0, kappa: vec![1.0; d] }
    }

    #[test]
    fn relativistic_examples() {
        assert_eq!(rel(1.0).d_matrix(&SVec::zeros(3)), SMat::identity(3));
        assert_eq!(rel(1.0).sqrt_d(&SVec::zeros(3)), SMat::identity(3));
        let m = rel(1.0).d_matrix(&SVec::from_slice(&[1.0, 0.0]));
        assert!((m.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.get(1, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.get(0, 1), 0.0);
        let r = rel(3.0).sqrt_d(&SVec::from_slice(&[1.0, 0.0]));
        assert!((r.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.get(1, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rel(1.0).div_d(&SVec::zeros(2)), SVec::zeros(2));
        let dv = rel(1.0).div_d(&SVec::from_slice(&[2.0]));
        assert!((dv[0] - 2.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn classical_examples() {
        let x = SVec::from_slice(&[std::f64::consts::FRAC_PI_2]);
        assert_eq!(sine(1).d_matrix(&x), SMat::scaled_identity(1, 3.0));
        let c = DiffusionSpec::Constant { gamma: 4.0 };
        assert_eq!(c.sqrt_d(&SVec::zeros(2)), SMat::scaled_identity(2, 2.0));
        let c2 = DiffusionSpec::Constant { gamma: 2.0 };
        assert_eq!(c2.inv_d(&SVec::zeros(2)).unwrap(), SMat::scaled_identity(2, 0.5));
        assert_eq!(c2.div_inv_d(&SVec::zeros(2)).unwrap(), SVec::zeros(2));
        assert_eq!(c2.div_d(&SVec::zeros(2)), SVec::zeros(2));
        let v = sine(1).div_inv_d(&SVec::zeros(1)).unwrap();
        assert!((v[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn inverse_is_kind_error_for_relativistic() {
        assert!(matches!(rel(1.0).inv_d(&SVec::zeros(1)), Err(Error::Kind { .. })));
        assert!(matches!(rel(1.0).div_inv_d(&SVec::zeros(1)), Err(Error::Kind { .. })));
    }

    #[test]
    fn truncated_examples() {
        let p = SVec::from_slice(&[7.0, 0.0]);
        assert_eq!(truncated_d(0.3, &p, 5.0).m, SMat::identity(2));
        let t = truncated_d(0.3, &SVec::zeros(2), 5.0);
        assert_eq!(t.m, SMat::identity(2));
        assert_eq!(t.sqrt_m, SMat::identity(2));
    }

    #[test]
    fn truncation_inside_radius_is_plain_d() {
        let p = SVec::from_slice(&[0.6, -0.8, 0.3]);
        let t = truncated_d(0.5, &p, 2.0);
        let d = rel(0.5).d_matrix(&p);
        assert!((t.m - d).frobenius() < 1e-14);
        assert!((t.sqrt_m - rel(0.5).sqrt_d(&p)).frobenius() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let p = SVec::<f32>::from_slice(&[0.4, 1.3]);
        let spec = DiffusionSpec::Relativistic { epsilon: 0.7f32 };
        let s = spec.sqrt_d(&p);
        let err = (s.matmul(&s) - spec.d_matrix(&p)).frobenius();
        assert!(err < 1e-5, "{err}");
    }
}
