use num_complex::Complex64;
use picocell::channel::CVector;
use picocell::phy::*;
use picocell::RfConstants;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian_channels(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<CVector> {
    (0..k)
        .map(|_| {
            CVector::from_fn(n, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            })
        })
        .collect()
}

fn feasible(outcome: PowerOutcome) -> PowerSolution {
    match outcome {
        PowerOutcome::Feasible(s) => s,
        PowerOutcome::Infeasible => panic!("expected a feasible power solution"),
    }
}

#[test]
fn lmmse_has_unit_response_and_nulls_strong_interferers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = gaussian_channels(&mut rng, 3, 8);
    // Huge uplink weights on the other users push the beam toward their null space.
    let w = lmmse_beamformer(0, &h, &[1.0, 1e10, 1e10]).unwrap();
    assert!((w.dotc(&h[0]) - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    for j in 1..3 {
        assert!(w.dotc(&h[j]).norm() < 1e-4, "leak to user {j}: {}", w.dotc(&h[j]).norm());
    }
}

#[test]
fn lmmse_rejects_bad_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = gaussian_channels(&mut rng, 2, 4);
    assert!(lmmse_beamformer(2, &h, &[1.0, 1.0]).is_err());
    assert!(lmmse_beamformer(0, &h, &[1.0]).is_err());
    assert!(lmmse_beamformer(0, &h, &[1.0, f64::NAN]).is_err());
}

#[test]
fn power_solution_ignores_initial_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = gaussian_channels(&mut rng, 3, 8);
    let noise = [0.01, 0.02, 0.005];
    let opts = PowerOptions::default();
    let a = feasible(solve_power_problem(&h, &noise, 5.0, &[1.0; 3], &opts).unwrap());
    let b = feasible(solve_power_problem(&h, &noise, 5.0, &[1e-6, 40.0, 3.0], &opts).unwrap());
    assert!((a.total_power() / b.total_power() - 1.0).abs() < 1e-6);
}

#[test]
fn unreachable_target_is_infeasible() {
    // Two users on the same channel cannot both exceed SINR 1.
    let h = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)]);
    let opts = PowerOptions {
        power_cap: 1e9,
        ..Default::default()
    };
    let out = solve_power_problem(&[h.clone(), h], &[1.0, 1.0], 2.0, &[1.0, 1.0], &opts).unwrap();
    assert!(matches!(out, PowerOutcome::Infeasible));
}

#[test]
fn maxmin_equalizes_sinr_and_respects_eirp() {
    let rf = RfConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let g_max = 64.0;
    let per_stream = rf.eirp_watts() / g_max;
    for _ in 0..20 {
        let h = gaussian_channels(&mut rng, 3, 16);
        let noise = vec![1e-3; 3];
        let sol = solve_maxmin_sinr(&h, &noise, &rf, g_max, &MaxMinOptions::default()).unwrap();
        let max = sol.per_user_sinr.iter().cloned().fold(0.0, f64::max);
        let min = sol.per_user_sinr.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 1.0 + 1e-6, "{:?}", sol.per_user_sinr);
        assert!((min / sol.achieved_gamma - 1.0).abs() < 1e-6);
        for p in &sol.powers {
            assert!(*p <= per_stream * (1.0 + 1e-6));
        }
    }
}

#[test]
fn maxmin_single_user_is_interference_free_ceiling_or_one_notch_below() {
    let rf = RfConstants::default();
    let h = CVector::from_vec(vec![Complex64::new(1.0, 0.0); 4]);
    let noise = [0.5];
    let g_max = 16.0;
    let sol = solve_maxmin_sinr(&[h], &noise, &rf, g_max, &MaxMinOptions::default()).unwrap();
    let ceiling = rf.eirp_watts() / g_max * 4.0 / 0.5;
    assert!(sol.achieved_gamma <= ceiling * (1.0 + 1e-9));
    assert!(sol.achieved_gamma >= ceiling * 10f64.powf(-0.01));
}

fn instance() -> impl Strategy<Value = (u64, usize, usize, f64)> {
    (any::<u64>(), 1usize..=4, prop::sample::select(vec![4usize, 8, 16]), -10.0..10.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_power_solution_meets_every_target((seed, k, n, gamma_db) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = gaussian_channels(&mut rng, k, n);
        let noise: Vec<f64> = (0..k).map(|_| 0.01 + rng.random::<f64>() * 0.1).collect();
        let gamma = 10f64.powf(gamma_db / 10.0);
        let opts = PowerOptions { power_cap: 1e12, ..Default::default() };
        if let PowerOutcome::Feasible(sol) = solve_power_problem(&h, &noise, gamma, &vec![1.0; k], &opts).unwrap() {
            let sinr = compute_sinr(&sol.beamformers, &h, &noise).unwrap();
            for s in sinr {
                prop_assert!((s / gamma - 1.0).abs() < 1e-6, "sinr {} target {}", s, gamma);
            }
            for (w, p) in sol.beamformers.iter().zip(&sol.powers) {
                prop_assert!((w.norm_squared() - p).abs() <= 1e-9 * p.max(1e-300));
            }
        } else {
            // With N >= 4 >= K and these SNRs every target is reachable.
            prop_assert!(false, "infeasible at gamma {}", gamma);
        }
    }
}
