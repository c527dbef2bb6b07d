//! Independent oracles shared by the integration tests: finite differences, nalgebra
//! eigen-decompositions and Gauss–Hermite short-time expectations of one EM step.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singular_langevin::diffusion::DiffusionSpec;
use singular_langevin::generator::SmoothObservable;
use singular_langevin::integrators::{em_update, Specs};
use singular_langevin::linalg::{SMat, SVec};
use singular_langevin::state::{ModelConfig, PhaseState};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dmatrix(m: &SMat<f64>) -> DMatrix<f64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m.get(i, j))
}

/// Ascending eigenvalues from nalgebra.
pub fn eigenvalues(m: &SMat<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(to_dmatrix(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn shifted(z: &SVec<f64>, j: usize, h: f64) -> SVec<f64> {
    let mut w = *z;
    w[j] += h;
    w
}

/// `Σ_j ∂_j D_ij` by central differences of `D_matrix`.
pub fn fd_div_d(spec: &DiffusionSpec<f64>, z: &SVec<f64>, h: f64) -> Vec<f64> {
    fd_div(|w| to_dmatrix(&spec.d_matrix(w)), z, h)
}

/// `Σ_j ∂_j (D⁻¹)_ij` with the inverse taken by nalgebra.
pub fn fd_div_inv_d(spec: &DiffusionSpec<f64>, z: &SVec<f64>, h: f64) -> Vec<f64> {
    fd_div(|w| to_dmatrix(&spec.d_matrix(w)).try_inverse().expect("invertible"), z, h)
}

fn fd_div(m: impl Fn(&SVec<f64>) -> DMatrix<f64>, z: &SVec<f64>, h: f64) -> Vec<f64> {
    let d = z.dim();
    let mut out = vec![0.0; d];
    for j in 0..d {
        let diff = (m(&shifted(z, j, h)) - m(&shifted(z, j, -h))) / (2.0 * h);
        for (i, o) in out.iter_mut().enumerate() {
            *o += diff[(i, j)];
        }
    }
    out
}

/// Nodes and weights for `E g(ξ)`, `ξ ~ N(0,1)`, by Golub–Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

/// `E f(X_h)` after one EM step of size `h`, integrated exactly over the Gaussian
/// increment by a tensor Gauss–Hermite rule.
pub fn one_step_expectation(
    f: &dyn SmoothObservable<f64>,
    state: &PhaseState<f64>,
    cfg: &ModelConfig,
    specs: &Specs,
    h: f64,
    nodes: usize,
) -> f64 {
    let (x, w) = gauss_hermite(nodes);
    let width = state.particles() * state.dim();
    let mut idx = vec![0usize; width];
    let mut total = 0.0;
    loop {
        let dw: Vec<f64> = idx.iter().map(|&k| h.sqrt() * x[k]).collect();
        let weight: f64 = idx.iter().map(|&k| w[k]).product();
        let next = em_update(state, cfg, specs, h, &dw).expect("em step");
        total += weight * f.value(&next).expect("observable");
        let mut pos = 0;
        loop {
            if pos == width {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < nodes {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Richardson-extrapolated short-time generator `(E f(X_h) − f(x))/h` from `h` and `h/2`.
pub fn generator_oracle(
    f: &dyn SmoothObservable<f64>,
    state: &PhaseState<f64>,
    cfg: &ModelConfig,
    specs: &Specs,
    h: f64,
) -> f64 {
    let f0 = f.value(state).expect("observable");
    let quotient = |h: f64| (one_step_expectation(f, state, cfg, specs, h, 5) - f0) / h;
    2.0 * quotient(h / 2.0) - quotient(h)
}

/// Random state with distinct positions (sorted in d = 1) and no particle near the origin.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize, d: usize, q_scale: f64, p_scale: f64) -> PhaseState<f64> {
    loop {
        let mut q: Vec<f64> = (0..n * d).map(|_| q_scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let p: Vec<f64> = (0..n * d).map(|_| p_scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        if d == 1 {
            q.sort_by(f64::total_cmp);
        }
        let s = PhaseState::new(d, q, p).unwrap();
        let sep = singular_langevin::state::min_pair_distance(&s);
        if (n == 1 || sep > 0.1 * q_scale) && (0..n).all(|i| s.q(i).norm() > 0.05 * q_scale) {
            return s;
        }
    }
}
