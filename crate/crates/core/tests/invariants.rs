use std::f64::consts::FRAC_PI_2;

use edgephase::finite::BoundaryCondition;
use edgephase::linalg::svd_truncate;
use edgephase::oracle::{dense_spectrum, validate_peps, PureState};
use edgephase::{
    build_lower_boundary_imps, build_projector, canonicalize, contract, entanglement_spectrum,
    finite_row_matrix, transfer_spectrum, truncate_to, MeasurementAngle, Tensor, UniformMPS, C64,
};
use ndarray::Array2;
use proptest::prelude::*;

fn tensor(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut k = seed;
    Tensor::from_fn(&shape, |_| {
        k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let a = ((k >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
        let b = ((k >> 11 & 0xffff) as f64 / 65536.0) - 0.5;
        C64::new(a, b)
    })
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..FRAC_PI_2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn contraction_is_associative(d in 1usize..4, e in 1usize..4, f in 1usize..4, g in 1usize..4, seed in any::<u64>()) {
        let a = tensor(vec![d, e], seed);
        let b = tensor(vec![e, f], seed ^ 1);
        let c = tensor(vec![f, g], seed ^ 2);
        let left = contract(&contract(&a, &b, &[(1, 0)]).unwrap(), &c, &[(1, 0)]).unwrap();
        let right = contract(&a, &contract(&b, &c, &[(1, 0)]).unwrap(), &[(1, 0)]).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
    }

    #[test]
    fn permutation_round_trips(shape in prop::collection::vec(1usize..4, 1..5), seed in any::<u64>()) {
        let t = tensor(shape.clone(), seed);
        let n = shape.len();
        let fwd: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let mut back = vec![0; n];
        for (i, &p) in fwd.iter().enumerate() {
            back[p] = i;
        }
        let round = t.permute(&fwd).unwrap().permute(&back).unwrap();
        prop_assert_eq!(round.max_abs_diff(&t).unwrap(), 0.0);
    }

    #[test]
    fn truncated_svd_weights_add_up(m in 1usize..7, n in 1usize..7, chi in 1usize..7, seed in any::<u64>()) {
        let t = tensor(vec![m, n], seed);
        let svd = svd_truncate(&t, chi, 0.0).unwrap();
        let kept: f64 = svd.s.iter().map(|s| s * s).sum();
        let total = t.norm().powi(2);
        prop_assert!((kept + svd.report.discarded_weight - total).abs() < 1e-10 * total.max(1.0));
        prop_assert!(svd.s.len() <= chi.min(m).min(n));
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn canonical_form_is_isometric_and_normalized(chi in 1usize..7, seed in any::<u64>()) {
        let psi = UniformMPS::random(chi, 2, seed).unwrap();
        let cf = canonicalize(&psi).unwrap();
        let (l, r) = cf.isometry_residuals();
        prop_assert!(l < 1e-9 && r < 1e-9);
        prop_assert!(cf.gauge_residual() < 1e-8);
        let spec = entanglement_spectrum(&cf);
        let total: f64 = spec.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!(spec.ee >= -1e-12 && spec.ee <= (cf.chi() as f64).ln() + 1e-9);
    }

    #[test]
    fn transfer_leading_eigenvalue_is_one(chi in 1usize..6, seed in any::<u64>()) {
        let psi = UniformMPS::random(chi, 2, seed).unwrap();
        let ts = transfer_spectrum(&psi, 2.min(chi * chi)).unwrap();
        prop_assert!((ts.eigenvalues[0].norm() - 1.0).abs() < 1e-8);
        prop_assert!(ts.eigenvalues.windows(2).all(|w| w[0].norm() + 1e-10 >= w[1].norm()));
    }

    #[test]
    fn truncation_never_raises_bond_dimension(chi in 2usize..8, keep in 1usize..8, seed in any::<u64>()) {
        let psi = UniformMPS::random(chi, 2, seed).unwrap();
        let t = truncate_to(&psi, keep).unwrap();
        prop_assert!(t.chi() <= keep.min(chi));
    }

    #[test]
    fn projector_is_rank_one(theta in angle()) {
        let p = build_projector(MeasurementAngle::new(theta).unwrap());
        let pp = p.matrix.dot(&p.matrix);
        prop_assert!((&pp - &p.matrix).iter().all(|x| x.abs() < 1e-14));
        prop_assert!((p.matrix[[0, 0]] + p.matrix[[1, 1]] - 1.0).abs() < 1e-14);
        let v = p.direction;
        prop_assert!((v[0] * v[0] + v[1] * v[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn angle_clamping_stays_in_range(raw in -1.0f64..3.0) {
        let (a, clamped) = MeasurementAngle::clamped(raw);
        prop_assert!((0.0..=FRAC_PI_2).contains(&a.value()));
        prop_assert_eq!(clamped, !(0.0..=FRAC_PI_2).contains(&raw));
    }

    #[test]
    fn periodic_row_commutes_with_translation(theta in angle(), n in 2usize..7) {
        let h = finite_row_matrix(MeasurementAngle::new(theta).unwrap(), n, BoundaryCondition::Periodic)
            .unwrap()
            .to_matrix()
            .unwrap();
        // Cyclic shift of the site labels; site 0 is the most significant bit.
        let shift = |c: usize| ((c << 1) | (c >> (n - 1))) & ((1 << n) - 1);
        let dim = 1usize << n;
        let shifted = Array2::from_shape_fn((dim, dim), |(i, j)| h[[shift(i), shift(j)]]);
        let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = (&shifted - &h).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12 * scale, "{diff:.2e}");
    }

    #[test]
    fn dense_spectrum_is_sorted_by_real_part(theta in angle(), n in 2usize..6) {
        let ev = dense_spectrum(MeasurementAngle::new(theta).unwrap(), n, BoundaryCondition::Periodic).unwrap();
        prop_assert!(ev.windows(2).all(|w| w[0].re + 1e-12 >= w[1].re));
    }

    #[test]
    fn lower_boundary_has_one_entangled_bond(theta in angle()) {
        let psi = build_lower_boundary_imps(MeasurementAngle::new(theta).unwrap());
        prop_assert!(psi.chi() <= 2);
        let spec = entanglement_spectrum(&canonicalize(&psi).unwrap());
        prop_assert!(spec.ee >= -1e-12 && spec.ee <= 2f64.ln() + 1e-10);
    }
}

#[test]
fn cluster_patches_reproduce_exact_states() {
    for (lx, ly) in [(1, 2), (2, 2), (3, 2), (2, 3), (4, 3), (5, 2)] {
        let f = validate_peps(lx, ly).unwrap();
        assert!(1.0 - f < 1e-12, "{lx}×{ly}: {f}");
    }
}

#[test]
fn pure_state_fidelity_is_phase_blind() {
    let amps: Vec<C64> = (0..8).map(|i| C64::new(i as f64, 1.0)).collect();
    let a = PureState::new(3, amps.iter().copied().collect()).unwrap();
    let b = PureState::new(3, amps.iter().map(|z| z * C64::new(0.0, 1.0)).collect()).unwrap();
    assert!((a.fidelity(&b) - 1.0).abs() < 1e-14);
}
