use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use dualq::fockspace::{charge_operator, enumerate_sector, Basis, TwoModeSpace};
use dualq::metrics::{QuadratureAngles, QuadratureCovariance};
use dualq::model::{build_hamiltonian, coupling_from_qsl, rabi_frequency, BatteryModelParams};
use dualq::propagate::{evolve, expectation, QState, Propagator};
use dualq::protocol::{estimate_phi, run_protocol, sample_measurements, ProtocolParams};
use dualq::spinoat::{exact_small_n_oracle, sigma_z_analytic, SpinBatteryParams};
use dualq::squeezeopt::{ladders_for, minimize_covariance};

fn coherent_cov(alpha: C64, beta: C64, n: usize, g_n: f64, t: f64) -> (QuadratureCovariance, f64) {
    let model = BatteryModelParams::with_coupling(n, 1.0, g_n).unwrap();
    let basis = dualq::propagate::charging_space(alpha, beta, n);
    let psi = QState::coherent(alpha, beta, &basis).unwrap();
    let h = build_hamiltonian(&model, true, &basis);
    let ev = evolve(&psi, &h, t).unwrap();
    let ops = ladders_for(&ev.state).unwrap();
    (QuadratureCovariance::from_state(&ev.state, &ops).unwrap(), ev.state.norm())
}

fn smallest_eigenvalue(c: &QuadratureCovariance) -> f64 {
    let m = Matrix4::from_fn(|i, j| c.cov[i][j]);
    SymmetricEigen::new(m).eigenvalues.min()
}

proptest! {
    #[test]
    fn product_index_round_trips(ca in 1usize..12, cb in 1usize..12, seed in 0usize..1000) {
        let s = TwoModeSpace::new(ca, cb);
        let i = seed % s.dim();
        let (na, nb) = s.occupation(i);
        prop_assert_eq!(s.index_of(na, nb), Some(i));
        prop_assert_eq!(s.dim(), (ca + 1) * (cb + 1));
        prop_assert_eq!(s.index_of(ca + 1, 0), None);
    }

    #[test]
    fn sector_states_carry_their_charge(n in 1usize..7, q in 0usize..40) {
        let sec = enumerate_sector(n, q).unwrap();
        prop_assert_eq!(sec.dim(), q / n + 1);
        for &(na, nb) in sec.states() {
            prop_assert_eq!(n * na + nb, q);
        }
        prop_assert!(sec.states().windows(2).all(|w| w[0].0 > w[1].0));
    }

    #[test]
    fn charge_blocks_partition_the_space(n in 1usize..5, ka in 1usize..6) {
        // cutoff_b a multiple of n keeps every block closed under the coupling
        let s = TwoModeSpace::new(ka, n * ka + 3);
        let total: usize = s.charge_blocks(n).iter().map(|(_, v)| v.len()).sum();
        prop_assert_eq!(total, s.dim());
    }

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_charge(n in 1usize..5, g_n in 0.01f64..2.0) {
        let model = BatteryModelParams::with_coupling(n, 1.3, g_n).unwrap();
        let basis = Basis::product(4, 4 * n + 2);
        let h = build_hamiltonian(&model, true, &basis);
        prop_assert!(h.equals_adjoint_exactly());
        for (r, c, _) in h.iter() {
            let (a, b) = (basis.occupation(r), basis.occupation(c));
            prop_assert_eq!(n * a.0 + a.1, n * b.0 + b.1);
        }
    }

    #[test]
    fn charging_advantage_grows_with_charge(q in 1usize..40) {
        let w = |q: usize| rabi_frequency(q, q, coupling_from_qsl(1.0, q, q).unwrap()).unwrap();
        prop_assert!(w(q + 1) > w(q));
    }

    #[test]
    fn sector_evolution_preserves_norm_and_charge(n in 1usize..5, extra in 0usize..12, t in 0.0f64..20.0) {
        let q = n + extra;
        let model = BatteryModelParams::with_coupling(n, 1.0, 0.3).unwrap();
        let basis = Basis::sector(n, q).unwrap();
        let h = build_hamiltonian(&model, true, &basis);
        let psi = QState::fock(&basis, q / n, q % n).unwrap();
        let ev = Propagator::new(&h).unwrap().evolve(&psi, t).unwrap();
        prop_assert!((ev.state.norm() - 1.0).abs() < 1e-12);
        let qo = charge_operator(&basis, n);
        prop_assert!((expectation(&qo, &ev.state).unwrap().re - q as f64).abs() < 1e-10);
    }

    #[test]
    fn canonical_angles_keep_the_variance(
        theta in -10.0f64..10.0, phi in -10.0f64..10.0, eta in -10.0f64..10.0,
        m in proptest::array::uniform16(-1.0f64..1.0),
    ) {
        // any symmetric matrix will do for the quadratic form
        let mut cov = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                cov[i][j] = m[4 * i + j] + m[4 * j + i];
            }
        }
        let c = QuadratureCovariance { means: [0.0; 4], cov };
        let a = QuadratureAngles::new(theta, phi, eta);
        let k = a.canonical();
        prop_assert!((0.0..=FRAC_PI_2).contains(&k.theta));
        prop_assert!((0.0..PI).contains(&k.phi_q));
        prop_assert!((0.0..TAU).contains(&k.eta));
        prop_assert!((c.variance(&a) - c.variance(&k)).abs() < 1e-12);
    }

    #[test]
    fn sampler_counts_sum_to_shots(p0 in 0.0f64..=1.0, shots in 0u64..100_000, seed: u64) {
        let (k0, k1) = sample_measurements(p0, shots, seed).unwrap();
        prop_assert_eq!(k0 + k1, shots);
        prop_assert_eq!(sample_measurements(p0, shots, seed).unwrap(), (k0, k1));
    }

    #[test]
    fn estimator_inverts_exact_counts(n in 1usize..7, t_s in 0.1f64..10.0, frac in 0.0f64..1.0) {
        let shots = 1u64 << 40;
        let phi = frac * PI / (n as f64 * t_s);
        let p1 = (phi * n as f64 * t_s / 2.0).sin().powi(2);
        let k1 = (p1 * shots as f64).round() as u64;
        let est = estimate_phi(k1, shots, n, t_s).unwrap();
        prop_assert!((est.phi_hat - phi).abs() < 1e-5 / (n as f64 * t_s));
    }

    #[test]
    fn oat_magnetisation_is_bounded(n in 1usize..200, chi in 0.01f64..3.0, t in 0.0f64..10.0) {
        prop_assert!(sigma_z_analytic(n, chi, t).abs() <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn protocol_probabilities_are_complementary_and_enhanced(
        n in prop::sample::select(vec![2usize, 3, 4, 6]),
        t_s in prop::sample::select(vec![0.1f64, 1.0, 10.0]),
        frac in 0.0f64..1.0,
    ) {
        let phi = frac * PI / (n as f64 * t_s);
        let run = |order: usize, phi: f64| {
            let model = BatteryModelParams::with_coupling(order, 1.0, 0.5).unwrap();
            run_protocol(&ProtocolParams { model, phi, t_s, shots: 0, seed: 0 }).unwrap()
        };
        let r = run(n, phi);
        prop_assert!((r.p0_simulated + r.p1_simulated - 1.0).abs() < 1e-12);
        prop_assert!((r.p1_simulated - (phi * n as f64 * t_s / 2.0).sin().powi(2)).abs() < 1e-9);
        prop_assert!((r.p1_simulated - run(1, n as f64 * phi).p1_simulated).abs() < 1e-9);
        prop_assert!((r.residual_energy - n as f64 * r.p0).abs() < 1e-9);
    }

    #[test]
    fn optimizer_reaches_the_covariance_floor(
        are in -1.5f64..1.5, aim in -1.5f64..1.5, bre in -1.5f64..1.5, bim in -1.5f64..1.5,
        t in 0.0f64..0.6,
    ) {
        let (cov, _) = coherent_cov(C64::new(are, aim), C64::new(bre, bim), 2, 0.5, t);
        let (v, angles, _) = minimize_covariance(&cov);
        // the variance over unit weight vectors is bounded below by the smallest eigenvalue
        prop_assert!((v - smallest_eigenvalue(&cov)).abs() < 1e-10);
        prop_assert!((cov.variance(&angles) - v).abs() < 1e-12);
    }

    #[test]
    fn random_angles_never_beat_the_optimum(
        t in 0.0f64..0.5,
        samples in proptest::collection::vec((0.0f64..FRAC_PI_2, 0.0f64..PI, 0.0f64..TAU), 100),
    ) {
        let (cov, _) = coherent_cov(C64::new(0.0, -1.5), C64::new(1.2, 0.0), 3, 0.4, t);
        let (v, _, _) = minimize_covariance(&cov);
        for (th, ph, et) in samples {
            prop_assert!(cov.variance(&QuadratureAngles::new(th, ph, et)) >= v - 1e-8);
        }
    }
}

#[test]
fn coherent_inputs_start_at_the_vacuum_bound() {
    let (cov, norm) = coherent_cov(C64::new(0.0, -4.0), C64::new(2.0, 0.0), 4, 1.0 / 6f64.sqrt(), 0.0);
    assert!((norm - 1.0).abs() < 1e-12);
    assert!(minimize_covariance(&cov).0 <= 0.25 + 1e-12);
}

#[test]
fn initial_squeezing_slope_follows_the_commutator_oracle() {
    use dualq::metrics::short_time_var_quadratures_commutator;
    let (alpha, beta, n, g_n) = (C64::new(0.0, -1.0), C64::new(1.0, 0.0), 3, 0.5);
    let h = 1e-4;
    let v0 = minimize_covariance(&coherent_cov(alpha, beta, n, g_n, 0.0).0).0;
    let v1 = minimize_covariance(&coherent_cov(alpha, beta, n, g_n, h).0).0;
    let slope = (v1 - v0) / h;
    let (x, p) = short_time_var_quadratures_commutator(alpha, beta, n, g_n, 1.0);
    let oracle = (x - 0.25).min(p - 0.25);
    assert!(oracle < 0.0);
    assert!((slope - oracle).abs() < 0.05 * oracle.abs(), "slope {slope} vs {oracle}");
}

#[test]
fn spin_oracle_never_exceeds_full_polarisation() {
    for n in 1..=10 {
        let p = SpinBatteryParams::new(n, 0.7, 1.0).unwrap();
        for k in 0..20 {
            let s = exact_small_n_oracle(&p, k as f64 * 0.3).unwrap();
            assert!(s.abs() <= 1.0 + 1e-12);
        }
    }
}
