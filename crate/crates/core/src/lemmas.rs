//! Evaluators for the pairwise-sum inequalities, the truncated relativistic diffusion
//! spectrum and the Γ₃ quadratic-variation bound. Each returns `(lhs, rhs)` of an
//! inequality `lhs ≥ rhs` (or `lhs ≤ rhs` where noted).

use serde::Serialize;

use crate::diffusion::truncated_d;
use crate::error::{Error, Result};
use crate::linalg::{SMat, SVec};
use crate::measures::{gamma3, gamma3_qv_rate};
use crate::potentials::PotentialSpec;
use crate::state::PhaseState;

fn check_points(x: &[SVec<f64>]) -> Result<()> {
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if !((x[i] - x[j]).norm() > 0.0) {
                return Err(Error::Collision { i, j, separation: 0.0 });
            }
        }
    }
    Ok(())
}

/// `Σ_{j≠i}(x_i − x_j)/|x_i − x_j|^{a}`.
fn weighted_sum(x: &[SVec<f64>], i: usize, a: f64) -> SVec<f64> {
    let mut acc = SVec::zeros(x[i].dim());
    for j in 0..x.len() {
        if j != i {
            let u = x[i] - x[j];
            acc += u.scale(u.norm().powf(-a));
        }
    }
    acc
}

/// `Σ_i⟨Σ_j u_ij/|u_ij|^a, Σ_l u_il/|u_il|^b⟩`.
fn pair_form(x: &[SVec<f64>], a: f64, b: f64) -> f64 {
    (0..x.len()).map(|i| weighted_sum(x, i, a).dot(&weighted_sum(x, i, b))).sum()
}

/// `Σ_{i<j}|x_i − x_j|^{−e}`.
fn inverse_power_sum(x: &[SVec<f64>], e: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            acc += (x[i] - x[j]).norm().powf(-e);
        }
    }
    acc
}

/// `Σ_i⟨Σ_j u_ij/|u_ij|^{s+1}, Σ_l u_il/|u_il|⟩ ≥ 2Σ_{i<j}|u_ij|^{−s}`, `s ≥ 0`.
pub fn lemma_a1(x: &[SVec<f64>], s: f64) -> Result<(f64, f64)> {
    check_points(x)?;
    Ok((pair_form(x, s + 1.0, 1.0), 2.0 * inverse_power_sum(x, s)))
}

/// Left side `Σ_i|Σ_j u_ij/|u_ij|^{s+1}|²` with the two lower bounds
/// `4/(N(N−1)²)·Σ_{i<j}|u_ij|^{−2s}` (any `s ≥ 0`) and `2Σ_{i<j}|u_ij|^{−2s}` (`s ∈ [0,1]`).
pub fn lemma_a2(x: &[SVec<f64>], s: f64) -> Result<(f64, f64, f64)> {
    check_points(x)?;
    let n = x.len() as f64;
    let lhs = pair_form(x, s + 1.0, s + 1.0);
    let sum = inverse_power_sum(x, 2.0 * s);
    Ok((lhs, 4.0 / (n * (n - 1.0).powi(2)) * sum, 2.0 * sum))
}

/// `Σ_i⟨Σ_j u_ij/|u_ij|^γ, Σ_k u_ik/|u_ik|^{s+1}⟩ ≥ 2Σ_{i<j}|u_ij|^{−(s+γ−1)}`,
/// `γ ∈ (0,1]`, `s ≥ 0`.
pub fn lemma_a3(x: &[SVec<f64>], gamma: f64, s: f64) -> Result<(f64, f64)> {
    check_points(x)?;
    Ok((pair_form(x, gamma, s + 1.0), 2.0 * inverse_power_sum(x, s + gamma - 1.0)))
}

/// `Σ_i|Σ_{j≠i}∇G(q_i − q_j)|²` and `Σ_{i≠j}|q_i − q_j|^{−2β₁}`.
pub fn grad_g_sums(x: &[SVec<f64>], potentials: &PotentialSpec<f64>) -> Result<(f64, f64)> {
    check_points(x)?;
    let mut lhs = 0.0;
    for i in 0..x.len() {
        let mut acc = SVec::zeros(x[i].dim());
        for j in 0..x.len() {
            if j != i {
                acc += potentials.grad_g(&(x[i] - x[j]))?;
            }
        }
        lhs += acc.norm_sq();
    }
    let beta1 = potentials.constants.beta1;
    Ok((lhs, 2.0 * inverse_power_sum(x, 2.0 * beta1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralCheck {
    /// Largest eigenvalue of `(√M − I)²`.
    pub sqrt_deviation: f64,
    pub bound_momentum: f64,
    pub bound_radius: f64,
    /// Largest eigenvalue of `M`.
    pub top: f64,
    pub bound_top: f64,
}

/// Spectrum of `M = θ_R(|p|)(D(p) − I) + I` against `¼ε²R²|p|²`, `ε²R⁴` and `1 + 2εR²`.
pub fn spectral_bound(epsilon: f64, p: &SVec<f64>, r: f64) -> SpectralCheck {
    let t = truncated_d(epsilon, p, r);
    let dev = t.sqrt_m - SMat::identity(p.dim());
    let dev2 = dev.matmul(&dev);
    let top_dev = *dev2.symmetric_eigenvalues().last().expect("nonempty");
    let top = *t.m.symmetric_eigenvalues().last().expect("nonempty");
    SpectralCheck {
        sqrt_deviation: top_dev,
        bound_momentum: 0.25 * epsilon * epsilon * r * r * p.norm_sq(),
        bound_radius: epsilon * epsilon * r.powi(4),
        top,
        bound_top: 1.0 + 2.0 * epsilon * r * r,
    }
}

/// `(d⟨M₅⟩/dt, 8√2(Γ₃^{3/2} + Γ₃))`; the first should not exceed the second for `ε ≤ 1`.
pub fn gamma3_qv_bound(state: &PhaseState<f64>, potentials: &PotentialSpec<f64>, epsilon: f64) -> Result<(f64, f64)> {
    let g = gamma3(state, potentials, epsilon)?;
    let rate = gamma3_qv_rate(state, potentials, epsilon)?;
    Ok((rate, 8.0 * 2f64.sqrt() * (g.powf(1.5) + g)))
}
