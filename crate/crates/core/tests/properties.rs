use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use pruefer_lab::limits::{eta_path, gaussian_covariance, gaussian_covariance_general, simulate_psi_sde, PsiConfig};
use pruefer_lab::pruefer::phase_mod;
use pruefer_lab::spectrum::{count_states, solve_eigenvalues, EigenWindow, ROOT_TOL};
use pruefer_lab::stats::{covariance_estimate, empirical_laplace, gap_ecdf, ks_distance, Ecdf, Moments};
use pruefer_lab::{DecayProfile, DrivingSignal, FourierSeries, NoisePath, PotentialModel, TestFunction};

fn coefficients() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 1..5)
}

fn model() -> impl Strategy<Value = PotentialModel> {
    (coefficients(), coefficients(), 0.2..3.0f64)
        .prop_filter_map("non-constant potential", |(c, s, sigma2)| {
            PotentialModel::new(c, s, sigma2).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constants_identities(m in model(), energy in 0.05..10.0f64) {
        let k = m.spectral_constants(energy).unwrap();
        prop_assert!((k.c_e - 8.0 * energy * k.gamma_e).abs() <= 1e-12 * k.c_e);
        prop_assert!((k.beta_e * k.gamma_e - 1.0).abs() <= 1e-12);
        prop_assert!((m.lyapunov(energy) - k.gamma_e).abs() <= 1e-12 * k.gamma_e);
    }

    #[test]
    fn resolvent_round_trip(m in model(), re in -3.0..3.0f64, im in 0.1..5.0f64) {
        let f = m.series();
        let z = Complex64::new(re, im);
        let back = m.apply_shifted_generator(&m.resolvent_apply(&f, z).unwrap(), z);
        for k in 1..=f.modes() {
            prop_assert!((back.cos_coeff(k) - f.cos_coeff(k)).norm() <= 1e-14 * (1.0 + f.cos_coeff(k).norm()));
            prop_assert!((back.sin_coeff(k) - f.sin_coeff(k)).norm() <= 1e-14 * (1.0 + f.sin_coeff(k).norm()));
        }
    }

    #[test]
    fn carre_du_champ_is_nonnegative(m in model(), c in coefficients(), s in coefficients()) {
        let f = FourierSeries::from_real(&c, &s);
        let v = m.carre_du_champ_mean(&f, &f);
        prop_assert!(v.im.abs() <= 1e-15 * (1.0 + v.re.abs()));
        prop_assert!(v.re >= 0.0);
    }

    #[test]
    fn g_m_real_part_is_negative(energy in prop::sample::select(vec![0.5, 1.0, 2.0]), m in prop::sample::select(vec![-3, -2, -1, 1, 2, 3])) {
        let k = PotentialModel::cosine().spectral_constants(energy).unwrap();
        prop_assert!(k.g_mean(m).re < 0.0);
    }

    #[test]
    fn phase_mod_reconstructs(theta in -1e4..1e4f64, two_pi in any::<bool>()) {
        let modulus = if two_pi { 2.0 * PI } else { PI };
        let (m, phi) = phase_mod(theta, modulus);
        prop_assert!((0.0..modulus).contains(&phi));
        prop_assert!((m as f64 * modulus + phi - theta).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_phase_is_exact(kappa in 0.3..3.0f64, length in 1.0..40.0f64) {
        let path = NoisePath::simulate(1, length, 0.01, 1.0).unwrap();
        let sig = DrivingSignal::new(&path, &DecayProfile::free(), &PotentialModel::cosine());
        let end = sig.final_state(kappa).unwrap();
        prop_assert!((end.theta - kappa * length).abs() <= 1e-12 * kappa * length);
        prop_assert_eq!(end.log_r, 0.0);
    }

    #[test]
    fn theta_is_monotone_in_kappa(seed in any::<u64>(), alpha in 0.3..1.5f64, k1 in 0.5..2.0f64, dk in 1e-4..0.5f64) {
        let path = NoisePath::simulate(seed, 60.0, 0.02, 1.0).unwrap();
        let sig = DrivingSignal::new(&path, &DecayProfile::unit(alpha).unwrap(), &PotentialModel::cosine());
        let ends = sig.final_states(&[k1, k1 + dk]).unwrap();
        prop_assert!(ends[0].theta < ends[1].theta);
    }

    #[test]
    fn bookkeeping_identity(seed in any::<u64>(), kappa in 0.5..2.0f64, stride in 1usize..50) {
        let path = NoisePath::simulate(seed, 30.0, 0.01, 1.0).unwrap();
        let sig = DrivingSignal::new(&path, &DecayProfile::unit(0.7).unwrap(), &PotentialModel::cosine());
        let tr = sig.trajectory(kappa, stride).unwrap();
        prop_assert_eq!(tr.theta[0], 0.0);
        for i in 0..tr.times.len() {
            prop_assert!((tr.theta[i] - kappa * tr.times[i] - tr.theta_tilde[i]).abs() <= 1e-12 * (1.0 + tr.theta[i].abs()));
        }
    }

    #[test]
    fn atoms_are_consistent_with_the_phase(seed in any::<u64>(), alpha in 0.5..1.2f64) {
        let length = 150.0;
        let path = NoisePath::simulate(seed, length, 0.05, 1.0).unwrap();
        let sig = DrivingSignal::new(&path, &DecayProfile::unit(alpha).unwrap(), &PotentialModel::cosine());
        let window = EigenWindow::new(1.0, length, 3.0 * PI).unwrap();
        let s = solve_eigenvalues(&sig, &window).unwrap();
        prop_assert!(s.atoms.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.indices.windows(2).all(|w| w[1] == w[0] + 1));
        let kappas: Vec<f64> = std::iter::once(1.0).chain(s.kappas.iter().copied()).collect();
        let ends = sig.final_states(&kappas).unwrap();
        for (i, &n) in s.indices.iter().enumerate() {
            prop_assert!((ends[i + 1].theta - n as f64 * PI).abs() <= ROOT_TOL);
            let psi = ends[i + 1].theta - ends[0].theta;
            prop_assert!((psi - ((n - s.m) as f64 * PI - s.phi)).abs() <= 1e-8);
        }
    }

    #[test]
    fn free_counting_function(kappa in 0.2..3.0f64, length in 5.0..200.0f64) {
        let path = NoisePath::simulate(2, length, 0.01, 1.0).unwrap();
        let sig = DrivingSignal::new(&path, &DecayProfile::free(), &PotentialModel::cosine());
        let expected = (kappa * length / PI).floor() as i64;
        let got = count_states(&sig, kappa).unwrap();
        // Exact multiples of π may round either way in floating point.
        let on_boundary = ((kappa * length / PI) - expected as f64).abs() < 1e-12;
        prop_assert!(got == expected || on_boundary);
    }

    #[test]
    fn covariance_kernel_symmetry(n in -3i64..3, np in -3i64..3, shift in -4i64..4, alpha in 0.55..0.95f64) {
        let k = PotentialModel::cosine().spectral_constants(1.0).unwrap();
        let a = gaussian_covariance(&k, alpha, n, np).unwrap();
        prop_assert!((a - gaussian_covariance(&k, alpha, np, n).unwrap()).abs() <= 1e-12);
        prop_assert!((a - gaussian_covariance(&k, alpha, n + shift, np + shift).unwrap()).abs() <= 1e-9);
        let c = |m: i64| (m as f64 + 1.0) * PI;
        let d = |m: i64| m as f64 * PI;
        let general = gaussian_covariance_general(&k, alpha, c(n), d(n), c(np), d(np), 1.0).unwrap();
        prop_assert!((a - general).abs() <= 1e-9);
    }

    #[test]
    fn psi_paths_are_ordered_in_c(seed in any::<u64>(), d in 0.1..2.0f64) {
        let k = PotentialModel::cosine().spectral_constants(1.0).unwrap();
        let _ = d;
        let cs = [-1.0, 0.0, 0.5, 1.0, 2.0];
        let config = PsiConfig { steps: 400, ..PsiConfig::default() };
        let p = simulate_psi_sde(seed, &k, &cs, &config).unwrap();
        for row in &p.values {
            prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(row[1], 0.0);
        }
    }

    #[test]
    fn eta_stays_on_the_circle(seed in any::<u64>(), c3 in -1.0..1.0f64, c4 in 0.0..2.0f64) {
        let p = eta_path(seed, c3, c4, 0.5, 8.0, 200).unwrap();
        prop_assert!(p.eta().iter().all(|z| (z.norm() - 1.0).abs() <= 1e-14));
    }
}

fn point_sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-5.0..5.0f64, 2..8).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        }),
        2..20,
    )
    .prop_filter("two atoms per set", |sets| sets.iter().all(|s| s.len() >= 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimators_are_permutation_invariant(sets in point_sets(), rot in 0usize..20) {
        let mut shuffled = sets.clone();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        shuffled.reverse();
        let f = TestFunction::triangle(1.0, 0.5, 2.0);
        let a = empirical_laplace(&sets, &f, (-6.0, 6.0)).unwrap();
        let b = empirical_laplace(&shuffled, &f, (-6.0, 6.0)).unwrap();
        prop_assert!((a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12);
        prop_assert!(a.0 > 0.0 && a.0 <= 1.0);
        prop_assert_eq!(gap_ecdf(&sets).unwrap(), gap_ecdf(&shuffled).unwrap());
    }

    #[test]
    fn shifted_gaps_dominate(sets in point_sets(), shift in 0.01..1.0f64) {
        let base = gap_ecdf(&sets).unwrap();
        let shifted = Ecdf::new(base.values().iter().map(|g| g + shift).collect());
        for &x in base.values() {
            prop_assert!(shifted.eval(x) <= base.eval(x));
        }
        prop_assert!(ks_distance(&base, &shifted) > 0.0);
    }

    #[test]
    fn covariance_is_symmetric_psd(rows in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 30..80)) {
        let est = covariance_estimate(&rows).unwrap();
        let worst_se = est.stderr.iter().flatten().copied().fold(0.0, f64::max);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(est.covariance[i][j], est.covariance[j][i]);
            }
        }
        prop_assert!(est.min_eigenvalue() > -3.0 * worst_se);
        let mut reversed = rows.clone();
        reversed.reverse();
        let again = covariance_estimate(&reversed).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((again.covariance[i][j] - est.covariance[i][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn moments_merge_is_associative(xs in prop::collection::vec(-1e3..1e3f64, 0..50), cut1 in 0usize..50, cut2 in 0usize..50) {
        let (a, b) = (cut1.min(xs.len()), cut2.min(xs.len()));
        let (lo, hi) = (a.min(b), a.max(b));
        let part = |r: std::ops::Range<usize>| xs[r].iter().copied().collect::<Moments>();
        let mut left = part(0..lo);
        left.merge(&part(lo..hi));
        left.merge(&part(hi..xs.len()));
        let mut tail = part(lo..hi);
        tail.merge(&part(hi..xs.len()));
        let mut right = part(0..lo);
        right.merge(&tail);
        let whole = part(0..xs.len());
        prop_assert_eq!(left.count, whole.count);
        prop_assert!((left.sum - right.sum).abs() <= 1e-9 && (left.sum - whole.sum).abs() <= 1e-9);
        prop_assert!((left.sum_sq - whole.sum_sq).abs() <= 1e-6);
    }
}
