mod common;

use common::*;
use nonnormal_lab::linalg::{self, DenseMatrix, C64};
use nonnormal_lab::operators::{self, COMMUTATOR_TOL};
use nonnormal_lab::pseudospec::{self, GridSpec};
use nonnormal_lab::train::{detect_spikes, AdamHyper, AdamState};
use proptest::collection::vec;
use proptest::prelude::*;

fn square(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), vec(-1.0..1.0f64, n * n)))
}

fn symmetric(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    square(max_n).prop_map(|(n, a)| (n, symmetrize(n, &a)))
}

fn op_norm(m: &DenseMatrix) -> f64 {
    linalg::operator_norm_2(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn powers_obey_eigenvector_bound((n, a) in square(20), radius in 0.3..0.999f64) {
        let j = with_spectral_radius(n, &a, radius);
        let e = linalg::eig(&j).unwrap();
        prop_assume!(e.diagonalizable);
        let norms = linalg::matrix_power_norms(&j, 50).unwrap();
        for (t, norm) in norms.iter().enumerate() {
            let bound = e.kappa_v * e.spectral_radius.powi(t as i32) + 1e-6;
            prop_assert!(*norm <= bound, "t = {t}: {norm} > {bound}");
        }
    }

    #[test]
    fn symmetric_matrices_have_unit_kappa((n, h) in symmetric(20)) {
        let e = linalg::eig(&real(n, &h)).unwrap();
        prop_assert!(e.kappa_v <= 1.0 + 1e-6, "{}", e.kappa_v);
        prop_assert!(e.eigenvalues.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn eigendecomposition_reconstructs((n, a) in square(20)) {
        let j = real(n, &a);
        let e = linalg::eig(&j).unwrap();
        prop_assume!(e.diagonalizable);
        let d = DenseMatrix::from_fn(n, n, |r, c| if r == c { e.eigenvalues[r] } else { C64::new(0.0, 0.0) }).unwrap();
        let back = &(&e.vectors * &d) * &linalg::inverse(&e.vectors).unwrap();
        prop_assert!(op_norm(&(&back - &j)) <= 1e-6 * op_norm(&j));
    }

    #[test]
    fn smallest_singular_value_inverts_inverse_norm((n, a) in square(12)) {
        let shifted: Vec<f64> = (0..n * n)
            .map(|k| a[k] + if k / n == k % n { 3.0 } else { 0.0 })
            .collect();
        let m = real(n, &shifted);
        let product = linalg::sigma_min(&m) * op_norm(&linalg::inverse(&m).unwrap());
        prop_assert!((product - 1.0).abs() <= 1e-8, "{product}");
    }

    #[test]
    fn adam_normality_iff_h_and_m_commute(
        (n, a) in symmetric(8),
        groups in vec(0..3usize, 8),
        levels in vec(0.2..3.0f64, 3),
        spread in vec(0.2..3.0f64, 8),
        commuting in any::<bool>(),
        eta in 0.01..1.0f64,
    ) {
        // Block structure by group with M constant on each block commutes;
        // independent M entries generically do not.
        let h: Vec<f64> = (0..n * n)
            .map(|k| if commuting && groups[k / n] != groups[k % n] { 0.0 } else { a[k] })
            .collect();
        let m: Vec<f64> = (0..n)
            .map(|i| if commuting { levels[groups[i]] } else { spread[i] })
            .collect();
        let h = real(n, &h);
        let j = operators::build_adam_frozen(&h, &m, eta).unwrap().matrix;
        let scale = op_norm(&h) * m.iter().cloned().fold(0.0, f64::max);
        let hm_zero = op_norm(&operators::hm_commutator(&h, &m).unwrap()) <= COMMUTATOR_TOL * scale;
        prop_assert_eq!(operators::is_normal(&j), hm_zero);
        if commuting {
            prop_assert!(hm_zero);
        }
    }

    #[test]
    fn adam_commutator_closed_form(
        (n, a) in symmetric(8),
        m in vec(0.2..3.0f64, 8),
        eta in 0.01..1.0f64,
    ) {
        let m = &m[..n];
        let h = real(n, &a);
        let j = operators::build_adam_frozen(&h, m, eta).unwrap().matrix;
        let direct = operators::normality_commutator(&j);
        let minv = DenseMatrix::from_diag(&m.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
        let h2 = &h * &h;
        let left = &(&minv * &h2) * &minv;
        let right = &(&(&h * &minv) * &minv) * &h;
        let closed = (&left - &right).scale(eta * eta);
        let scale = op_norm(&j).powi(2);
        prop_assert!(op_norm(&(&direct - &closed)) <= 1e-10 * scale);
    }

    #[test]
    fn momentum_operator_is_never_normal(
        (n, a) in symmetric(6),
        eta in 0.01..1.0f64,
        beta in 0.05..0.99f64,
    ) {
        let j = operators::build_sgdm_augmented(&real(n, &a), eta, beta).unwrap().matrix;
        let c = op_norm(&operators::normality_commutator(&j));
        prop_assert!(c > COMMUTATOR_TOL * op_norm(&j).powi(2), "commutator norm {c:e}");
    }

    #[test]
    fn one_dimensional_momentum_operator_is_the_toy(
        lambda in 0.01..20.0f64,
        eta in 0.01..1.0f64,
        beta in 0.0..0.99f64,
    ) {
        let aug = operators::build_sgdm_augmented(&DenseMatrix::from_diag(&[lambda]), eta, beta).unwrap();
        let toy = operators::build_scalar_toy(lambda, eta, beta).unwrap();
        prop_assert_eq!(aug.matrix, toy.matrix);
    }

    #[test]
    fn toy_commutator_diagonal_closed_form(
        lambda in 0.01..20.0f64,
        eta in 0.01..1.0f64,
        beta in 0.0..0.99f64,
    ) {
        let j = operators::build_scalar_toy(lambda, eta, beta).unwrap().matrix;
        let c = operators::normality_commutator(&j);
        let expected = (eta * beta).powi(2) - lambda * lambda;
        let tol = 1e-12 * op_norm(&j).powi(2);
        prop_assert!((c.re(0, 0) - expected).abs() <= tol);
        prop_assert!((c.re(1, 1) + expected).abs() <= tol);
    }

    #[test]
    fn precursor_is_the_first_decay_time(kappa in 1.001..1e6f64, rho in 0.05..0.999f64) {
        let exact = kappa.ln() / (1.0 / rho).ln();
        prop_assume!((exact - exact.round()).abs() > 1e-9);
        let t_c = pseudospec::precursor_from(kappa, rho).t_c.unwrap();
        prop_assert!(kappa * rho.powf(t_c as f64) <= 1.0);
        prop_assert!(kappa * rho.powf(t_c as f64 - 1.0) > 1.0);
    }

    #[test]
    fn spike_detection_is_translation_covariant(
        series in vec(0.01..10.0f64, 10..80),
        prefix in vec(0.01..10.0f64, 0..30),
    ) {
        let base = detect_spikes(&series);
        let k = prefix.len();
        let mut joined = prefix.clone();
        joined.extend_from_slice(&series);
        let shifted: Vec<usize> = detect_spikes(&joined)
            .into_iter()
            .filter(|&t| t >= k + 10)
            .map(|t| t - k)
            .collect();
        prop_assert_eq!(shifted, base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pseudospectra_are_nested((n, a) in square(4), e1 in 1e-3..0.1f64, factor in 1.01..10.0f64) {
        let j = real(n, &a);
        let half = op_norm(&j) + 0.5;
        let grid = pseudospec::pseudospectrum(&j, GridSpec::square(C64::new(0.0, 0.0), half, 41)).unwrap();
        let inner = grid.sublevel(e1);
        let outer = grid.sublevel(e1 * factor);
        prop_assert!(inner.iter().zip(&outer).all(|(i, o)| !i || *o));
    }

    #[test]
    fn pseudospectral_radius_bounds((n, a) in square(4), eps in 0.02..0.2f64) {
        let j = real(n, &a);
        let rho = linalg::eig(&j).unwrap().spectral_radius;
        let spec = GridSpec::square(C64::new(0.0, 0.0), op_norm(&j) + eps + 0.2, 81);
        let est = pseudospec::pseudospectral_radius(&j, eps, spec).unwrap();
        prop_assert!(est.value >= rho + eps - 2.0 * est.uncertainty);
    }

    #[test]
    fn normal_pseudospectral_radius_is_shifted_spectral_radius((n, a) in symmetric(4), eps in 0.02..0.2f64) {
        let j = real(n, &a);
        let rho = linalg::eig(&j).unwrap().spectral_radius;
        let spec = GridSpec::square(C64::new(0.0, 0.0), rho + eps + 0.2, 81);
        let (dx, dy) = spec.spacing();
        let est = pseudospec::pseudospectral_radius(&j, eps, spec).unwrap();
        prop_assert!((est.value - (rho + eps)).abs() <= 2.0 * dx.max(dy));
    }

    #[test]
    fn kreiss_estimate_is_below_transient_peak((n, a) in square(8), radius in 0.3..0.98f64) {
        let j = with_spectral_radius(n, &a, radius);
        let k = pseudospec::kreiss_constant(&j, 40, 64, 6).unwrap();
        let peak = linalg::matrix_power_norms(&j, 200).unwrap().into_iter().fold(0.0, f64::max);
        prop_assert!(k.value <= peak * (1.0 + 1e-6), "K ≥ {} but max ‖J^t‖ = {}", k.value, peak);
        prop_assert!(peak <= std::f64::consts::E * n as f64 * k.value * (1.0 + 1e-6) || k.value < 1.0);
    }

    #[test]
    fn adam_without_moments_follows_the_gradient(
        g in vec(-1.0..1.0f64, 2..50),
        eta in 0.01..1.0f64,
    ) {
        prop_assume!(g.iter().any(|x| x.abs() > 1e-3));
        let hyper = AdamHyper { eta, beta1: 0.0, beta2: 0.0, eps: 1e8 };
        let mut state = AdamState::new(hyper, g.len());
        let mut theta = vec![0.0; g.len()];
        state.step(&mut theta, &g);
        let cos = -dot(&theta, &g)
            / (dot(&theta, &theta).sqrt() * dot(&g, &g).sqrt());
        let angle = cos.clamp(-1.0, 1.0).acos();
        prop_assert!(angle < 1e-6, "angle {angle:e}");
    }
}

#[test]
fn momentum_operator_is_normal_at_an_isolated_point() {
    // Normal exactly when λ = ηβ and β(1 + η²) = 1, a measure-zero set.
    let j = operators::build_scalar_toy(0.4, 0.5, 0.8).unwrap().matrix;
    assert!(operators::is_normal(&j));
}
