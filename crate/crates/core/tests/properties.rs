mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rishp::channel::synthesize;
use rishp::metrics::{mse_actual, rotate_columns, sinr_per_user, spectral_efficiency};
use rishp::rng::{trial_stream, Purpose};
use rishp::solver::{
    analog_gradient, grad_analog, grad_ris_at, mse_bar, random_analog, random_ris, regularized_gram, step_bound_analog,
    step_bound_ris, update_digital, SolverState,
};
use rishp::{AnalogStructure, CMat, LinkBudget, SystemConfig, C64};
use rishp_oracle::{fd_directional, objective, wirtinger_directional, DEFAULT_EPS};

use common::*;

struct Instance {
    cfg: SystemConfig,
    channels: rishp::ChannelSet,
    f_rf: CMat,
    f_bb: CMat,
    psi: rishp::CVec,
    rng: ChaCha8Rng,
}

fn instance(seed: u64, snr_db: f64, structure: AnalogStructure) -> Instance {
    let cfg = SystemConfig { m: 8, n_rf: 2, k: 2, r: 9, l_b: 3, l_i: 3, snr_db, ..SystemConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = synthesize(&cfg, &mut rng, false).unwrap();
    let f_rf = random_analog(cfg.m, cfg.n_rf, structure, &mut rng);
    let psi = random_ris(cfg.r, &mut rng);
    let f_bb = gaussian(cfg.n_rf, cfg.k, &mut rng);
    Instance { cfg, channels, f_rf, f_bb, psi, rng }
}

fn scaled_error(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / an.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradients_match_central_differences(seed in any::<u64>(), snr in -20.0f64..20.0) {
        let mut x = instance(seed, snr, AnalogStructure::FullyConnected);
        let b = x.cfg.budget();
        let state = SolverState::cascaded(&x.channels, b, x.f_rf.clone(), x.psi.clone()).with_digital(x.f_bb.clone());
        let h = cascade_by_sums(&x.channels.h_i, x.psi.as_slice(), &x.channels.h_b);

        let d = direction(x.cfg.m, x.cfg.n_rf, 1.0, &mut x.rng);
        let fd = fd_directional(|f| objective(&h, &(f * &x.f_bb), b.power, b.users, b.noise_var), &x.f_rf, &d, DEFAULT_EPS);
        prop_assert!(scaled_error(fd, wirtinger_directional(&grad_analog(&state), &d)) <= 1e-6);

        let f_bar = &x.f_rf * &x.f_bb;
        let d = direction(x.cfg.r, 1, 1.0, &mut x.rng);
        let fd = fd_directional(
            |p| objective(&cascade_by_sums(&x.channels.h_i, p.as_slice(), &x.channels.h_b), &f_bar, b.power, b.users, b.noise_var),
            &column(&x.psi),
            &d,
            DEFAULT_EPS,
        );
        let g = column(&grad_ris_at(&state).unwrap());
        prop_assert!(scaled_error(fd, wirtinger_directional(&g, &d)) <= 1e-6);
    }

    #[test]
    fn quadratic_bounds_hold_for_any_feasible_pair(seed in any::<u64>(), snr in -20.0f64..20.0) {
        let mut x = instance(seed, snr, AnalogStructure::FullyConnected);
        let b = x.cfg.budget();
        let h = x.channels.cascade(&x.psi);
        let other = random_analog(x.cfg.m, x.cfg.n_rf, AnalogStructure::FullyConnected, &mut x.rng);
        let grad = analog_gradient(&regularized_gram(&h, b), &h, &x.f_rf, &x.f_bb, b);
        let tau = step_bound_analog(&h, &x.f_bb, b).unwrap();
        let delta = &other - &x.f_rf;
        let lhs = mse_bar(&h, &(&other * &x.f_bb), b);
        let rhs = mse_bar(&h, &(&x.f_rf * &x.f_bb), b) + wirtinger_directional(&grad, &delta) + tau * delta.norm_squared();
        prop_assert!(lhs <= rhs + 1e-9);

        let state = SolverState::cascaded(&x.channels, b, x.f_rf.clone(), x.psi.clone()).with_digital(x.f_bb.clone());
        let sigma = step_bound_ris(&state.gamma_bar().unwrap(), &x.channels.h_i, b).unwrap();
        let grad = column(&grad_ris_at(&state).unwrap());
        let moved = random_ris(x.cfg.r, &mut x.rng);
        let delta = column(&moved) - column(&x.psi);
        let f_bar = state.scaled_precoder();
        let lhs = mse_bar(&x.channels.cascade(&moved), &f_bar, b);
        let rhs = state.mse_bar() + wirtinger_directional(&grad, &delta) + sigma * delta.norm_squared();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn digital_step_is_stationary(seed in any::<u64>(), snr in -20.0f64..30.0, pcs in any::<bool>()) {
        let structure = if pcs { AnalogStructure::PartiallyConnected } else { AnalogStructure::FullyConnected };
        let x = instance(seed, snr, structure);
        let b = x.cfg.budget();
        let h = x.channels.cascade(&x.psi);
        let f_bb = update_digital(&h, &x.f_rf, b).unwrap();
        let xi = regularized_gram(&h, b);
        let grad = (x.f_rf.adjoint() * (&xi * &x.f_rf * &f_bb - h.adjoint())) * C64::from(b.stream_power());
        let scale = b.stream_power() * (x.f_rf.adjoint() * &xi * &x.f_rf).norm() * f_bb.norm().max(1.0);
        prop_assert!(grad.norm() <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn objective_sees_ris_only_through_effective_channel(seed in any::<u64>(), phase in 0.0f64..std::f64::consts::TAU, idx in 0usize..9) {
        let x = instance(seed, -10.0, AnalogStructure::FullyConnected);
        let b = x.cfg.budget();
        let mut h_i = x.channels.h_i.clone();
        h_i.column_mut(idx).fill(C64::new(0.0, 0.0));
        let channels = rishp::ChannelSet::new(x.channels.h_b.clone(), h_i, None).unwrap();
        let mut other = x.psi.clone();
        other[idx] = C64::from_polar(other[idx].norm(), phase);
        let f_bar = &x.f_rf * &x.f_bb;
        prop_assert_eq!(channels.cascade(&x.psi), channels.cascade(&other));
        let a = SolverState::cascaded(&channels, b, x.f_rf.clone(), x.psi.clone()).with_digital(x.f_bb.clone());
        let c = SolverState::cascaded(&channels, b, x.f_rf.clone(), other).with_digital(x.f_bb.clone());
        prop_assert_eq!(a.mse_bar(), c.mse_bar());
        prop_assert_eq!(a.mse_bar(), mse_bar(&channels.cascade(&x.psi), &f_bar, b));
    }

    #[test]
    fn receive_mse_matches_scaled_objective(seed in any::<u64>(), zeta in 0.01f64..10.0, snr in -20.0f64..20.0) {
        let x = instance(seed, snr, AnalogStructure::FullyConnected);
        let b = x.cfg.budget();
        let h = x.channels.cascade(&x.psi);
        let f = &x.f_rf * &x.f_bb;
        let f = &f * C64::from((x.cfg.k as f64).sqrt() / f.norm());
        let lhs = mse_actual(&h, &f, zeta, b);
        let rhs = mse_bar(&h, &(&f * C64::from(zeta)), b);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn spectral_efficiency_ignores_column_phases(seed in any::<u64>(), a in -7.0f64..7.0, c in -7.0f64..7.0) {
        let x = instance(seed, 0.0, AnalogStructure::FullyConnected);
        let b = x.cfg.budget();
        let h = x.channels.cascade(&x.psi);
        let f = &x.f_rf * &x.f_bb;
        let base = spectral_efficiency(&sinr_per_user(&h, &f, b));
        let rotated = spectral_efficiency(&sinr_per_user(&h, &rotate_columns(&f, &[a, c]), b));
        prop_assert!((base - rotated).abs() <= 1e-10 * base.max(1.0));
    }

    #[test]
    fn spectral_efficiency_grows_as_noise_falls(seed in any::<u64>(), s2 in 1e-3f64..10.0, factor in 1.01f64..10.0) {
        let x = instance(seed, 0.0, AnalogStructure::FullyConnected);
        let h = x.channels.cascade(&x.psi);
        let f = &x.f_rf * &x.f_bb;
        let noisy = spectral_efficiency(&sinr_per_user(&h, &f, LinkBudget::new(1.0, 2, s2)));
        let quiet = spectral_efficiency(&sinr_per_user(&h, &f, LinkBudget::new(1.0, 2, s2 / factor)));
        prop_assert!(quiet >= noisy);
    }

    #[test]
    fn channels_are_a_function_of_seed_and_trial(seed in any::<u64>(), trial in 0u64..1000) {
        let cfg = SystemConfig { m: 8, n_rf: 2, k: 2, r: 9, l_b: 3, l_i: 3, ..SystemConfig::default() };
        let draw = |t: u64| synthesize(&cfg, &mut trial_stream(seed, t, Purpose::Channel), true).unwrap();
        prop_assert_eq!(draw(trial), draw(trial));
        prop_assert_ne!(draw(trial).fingerprint(), draw(trial + 1).fingerprint());
    }
}
