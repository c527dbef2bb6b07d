mod common;

use proptest::prelude::*;
use singular_langevin::diffusion::DiffusionSpec;
use singular_langevin::generator::{
    apply_generator, Constant, CrossTerm, Energy, Hamiltonian, MomentumQuartic, SmoothObservable,
};
use singular_langevin::integrators::Specs;
use singular_langevin::potentials::{Confining, Pairwise, PotentialSpec};
use singular_langevin::state::{ModelConfig, ModelKind, PhaseState};

fn specs(pair: Pairwise<f64>, diffusion: DiffusionSpec<f64>) -> Specs {
    Specs::new(PotentialSpec::new(Confining::PolyConfining { lambda: 1.0, scale: 1.0 }, pair).unwrap(), diffusion)
}

fn close(analytic: f64, oracle: f64, rel: f64) -> bool {
    (analytic - oracle).abs() <= rel * analytic.abs().max(oracle.abs()).max(1e-8)
}

#[test]
fn energy_dissipation_example_matches_oracle() {
    let cfg = ModelConfig::new(ModelKind::Classical, 1, 1, 1e-3, 0).with_mass(1.0);
    let sp = specs(Pairwise::None, DiffusionSpec::Constant { gamma: 1.0 });
    let s = PhaseState::new(1, vec![0.3], vec![2.0]).unwrap();
    let h = Hamiltonian::new(Energy::Classical { mass: 1.0 }, sp.potentials.clone(), false);
    let analytic = apply_generator(&h, &s, &cfg, &sp).unwrap();
    assert!((analytic + 3.0).abs() < 1e-12);
    assert!(close(analytic, common::generator_oracle(&h, &s, &cfg, &sp, 1e-3), 1e-4));
}

#[test]
fn classical_limit_generator_matches_oracle() {
    let cfg = ModelConfig::new(ModelKind::ClassicalLimit, 1, 2, 1e-3, 0);
    let sp = specs(Pairwise::LogRepulsive { k: 1.0 }, DiffusionSpec::Constant { gamma: 1.0 });
    let mut rng = common::rng(4);
    for _ in 0..5 {
        let s = common::random_state(&mut rng, 2, 1, 2.0, 2.0);
        for f in [&CrossTerm as &dyn SmoothObservable<f64>, &MomentumQuartic] {
            let a = apply_generator(f, &s, &cfg, &sp).unwrap();
            let o = common::generator_oracle(f, &s, &cfg, &sp, 1e-3);
            assert!(close(a, o, 1e-3), "{a} vs {o}");
        }
    }
}

#[test]
fn constants_are_annihilated() {
    let sp = specs(Pairwise::PowerRepulsive { k: 1.0, beta1: 2.0 }, DiffusionSpec::Constant { gamma: 2.0 });
    let s = PhaseState::new(2, vec![0.1, 0.2, -1.0, 0.4], vec![3.0, -1.0, 0.5, 0.5]).unwrap();
    for cfg in [
        ModelConfig::new(ModelKind::Classical, 2, 2, 1e-3, 0).with_mass(0.3),
        ModelConfig::new(ModelKind::Relativistic, 2, 2, 1e-3, 0).with_epsilon(0.2),
        ModelConfig::new(ModelKind::ClassicalLimit, 2, 2, 1e-3, 0),
    ] {
        assert_eq!(apply_generator(&Constant(4.2), &s, &cfg, &sp).unwrap(), 0.0);
    }
}

fn classical_state() -> impl Strategy<Value = (PhaseState<f64>, f64, f64, f64, Vec<f64>)> {
    (1usize..=4, 1usize..=3, any::<u64>(), 0.05..5.0f64, 1.5..4.0f64, 0.0..1.0f64, prop::collection::vec(-2.0..2.0f64, 3))
        .prop_map(|(n, d, seed, m, g0, a, k)| {
            let mut rng = common::rng(seed);
            (common::random_state(&mut rng, n, d, 3.0, 4.0), m, g0, a, k[..d].to_vec())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// `ℒH = −⟨D v, v⟩ + tr D / m` summed over particles.
    #[test]
    fn energy_identity((s, m, g0, a, kappa) in classical_state(), log in any::<bool>()) {
        let diffusion = DiffusionSpec::SinePerturbed { gamma0: g0, alpha: a, kappa };
        let pair = if log { Pairwise::LogRepulsive { k: 1.0 } } else { Pairwise::PowerRepulsive { k: 0.5, beta1: 1.5 } };
        let sp = specs(pair, diffusion.clone());
        let cfg = ModelConfig::new(ModelKind::Classical, s.dim(), s.particles(), 1e-3, 0).with_mass(m);
        let h = Hamiltonian::new(Energy::Classical { mass: m }, sp.potentials.clone(), false);
        let lh = apply_generator(&h, &s, &cfg, &sp).unwrap();
        let (mut dissipation, mut trace) = (0.0, 0.0);
        for i in 0..s.particles() {
            let dm = diffusion.d_matrix(&s.q(i));
            dissipation += s.p(i).dot(&dm.mul_vec(&s.p(i)));
            trace += dm.trace();
        }
        let expected = -dissipation + trace / m;
        let scale = dissipation.abs().max(trace / m);
        prop_assert!((lh - expected).abs() <= 1e-10 * scale, "{lh} vs {expected}");
    }

    #[test]
    fn relativistic_generator_matches_oracle(seed in any::<u64>(), eps in 0.01..1.0f64, n in 1usize..=2) {
        let mut rng = common::rng(seed);
        let s = common::random_state(&mut rng, n, 1, 2.0, 3.0);
        let sp = specs(Pairwise::LogRepulsive { k: 1.0 }, DiffusionSpec::Constant { gamma: 1.0 });
        let cfg = ModelConfig::new(ModelKind::Relativistic, 1, n, 1e-3, 0).with_epsilon(eps);
        let h = Hamiltonian::new(Energy::Relativistic { epsilon: eps }, sp.potentials.clone(), cfg.anchored());
        for f in [&h as &dyn SmoothObservable<f64>, &CrossTerm, &MomentumQuartic] {
            let a = apply_generator(f, &s, &cfg, &sp).unwrap();
            let h = 1e-5;
            let o = common::generator_oracle(f, &s, &cfg, &sp, h);
            // The extrapolated oracle keeps an O(h²) remainder, visible when ℒf is near zero.
            prop_assert!((a - o).abs() <= 1e-3 * a.abs().max(o.abs()) + 10.0 * h * h, "{a} vs {o}");
        }
    }
}

#[test]
fn quartic_is_stationary_at_zero_momentum() {
    // Gradient and Hessian of |p|⁴ both vanish at p = 0.
    let cfg = ModelConfig::new(ModelKind::Relativistic, 3, 1, 1e-3, 0).with_epsilon(0.5);
    let sp = specs(Pairwise::None, DiffusionSpec::Constant { gamma: 1.0 });
    let s = PhaseState::new(3, vec![0.5, 0.5, 0.5], vec![0.0; 3]).unwrap();
    assert_eq!(apply_generator(&MomentumQuartic, &s, &cfg, &sp).unwrap(), 0.0);
}
