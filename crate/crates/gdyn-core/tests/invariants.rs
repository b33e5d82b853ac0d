use gdyn_core::asymptotics::{edge_micro_law, macro_o, solve_min_saddle};
use gdyn_core::exact::ginibre_closed_sum;
use gdyn_core::linalg::{
    eigendecompose, overlap_matrix, ComplexMatrix, Gauge, SpectralDecomposition, DEFAULT_GAP_FLOOR,
};
use gdyn_core::rng::{ginibre, stream_rng};
use gdyn_core::sfp::{check_tdq, check_tq, PointLimits, SfpPoint};
use gdyn_core::special::erfc;
use gdyn_core::{SourceSpec, C64};
use proptest::prelude::*;

fn matrix(n: usize, seed: u64) -> ComplexMatrix {
    ginibre(n, 1.0, &mut stream_rng(seed, 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_reconstructs(n in 1usize..=20, seed in any::<u64>()) {
        let x = matrix(n, seed);
        let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR).unwrap();
        prop_assert!(dec.reconstruct().max_abs_diff(&x) < 1e-9 * x.max_abs());
        prop_assert!(dec.s.matmul(&dec.s_inv).identity_defect() < 1e-9);
        for j in 0..n {
            let norm: f64 = (0..n).map(|i| dec.s[(i, j)].norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        for w in dec.lambdas.windows(2) {
            prop_assert!(w[0].re < w[1].re || (w[0].re == w[1].re && w[0].im <= w[1].im));
        }
    }

    #[test]
    fn overlap_sum_rule_and_diagonal(n in 1usize..=12, seed in any::<u64>()) {
        let dec = eigendecompose(&matrix(n, seed), DEFAULT_GAP_FLOOR).unwrap();
        let ov = overlap_matrix(&dec).unwrap();
        prop_assert!(ov.column_sum_defect() < 1e-10);
        for i in 0..n {
            prop_assert!(ov.o[(i, i)].im.abs() < 1e-10);
            prop_assert!(ov.diag_real[i] >= 1.0 - 1e-10);
            for j in 0..n {
                prop_assert!((ov.o[(i, j)] - ov.o[(j, i)].conj()).norm() < 1e-9 * ov.o.max_abs());
            }
        }
    }

    #[test]
    fn overlap_is_gauge_invariant(n in 2usize..=8, seed in any::<u64>(), phases in prop::collection::vec((0.1f64..10.0, -3.2f64..3.2), 8)) {
        let dec = eigendecompose(&matrix(n, seed), DEFAULT_GAP_FLOOR).unwrap();
        let scales: Vec<C64> = phases.iter().take(n).map(|&(r, t)| C64::from_polar(r, t)).collect();
        let rescaled = SpectralDecomposition::from_parts(dec.lambdas.clone(), dec.s.scale_columns(&scales), Gauge::Trajectory).unwrap();
        let a = overlap_matrix(&dec).unwrap();
        let b = overlap_matrix(&rescaled).unwrap();
        prop_assert!(a.o.max_abs_diff(&b.o) < 1e-10 * a.o.max_abs().max(1.0));
    }

    #[test]
    fn sfp_cancellations(n in 2usize..=6, seed in any::<u64>()) {
        let p = SfpPoint::sample(n, PointLimits::default(), &mut stream_rng(seed, 0));
        prop_assert!(check_tq(&p).relative < 1e-10);
        let (a, b) = check_tdq(&p);
        prop_assert!(a.relative < 1e-10 && b.relative < 1e-10);
    }

    #[test]
    fn closed_sum_nonnegative_and_bounded(n in 1usize..=200, tau in 0.1f64..5.0, r in 0.0f64..3.0) {
        let v = ginibre_closed_sum(n, tau, r * r * tau);
        prop_assert!(v >= 0.0 && v.is_finite());
        // bounded by the macroscopic value at the origin up to finite-N corrections
        prop_assert!(v <= 1.0 / (std::f64::consts::PI * tau) * 1.01);
    }

    #[test]
    fn saddle_residual_small(n in 1usize..=5, tau in 0.2f64..3.0, zr in -1.5f64..1.5, zi in -1.5f64..1.5, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let vals: Vec<C64> = (0..n).map(|_| gdyn_core::rng::uniform_disk(&mut rng, 1.0)).collect();
        let src = SourceSpec::from_values(&vals).unwrap();
        let z = C64::new(zr, zi);
        let s = solve_min_saddle(tau, z, &src);
        prop_assert!(s.converged && s.residual < 1e-12);
        let min_a = src.squared_distances(z).iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        prop_assert!(s.sigma_min < min_a);
        prop_assert!(macro_o(tau, z, &src) >= 0.0);
    }

    #[test]
    fn erfc_matches_gaussian_tail_quadrature(x in -4.0f64..4.0) {
        let tail = gdyn_core::quadrature::adaptive_gauss_kronrod(|t| (-t * t).exp(), x, x + 12.0, 1e-300, 1e-15).unwrap();
        let want = 2.0 / std::f64::consts::PI.sqrt() * tail.value;
        prop_assert!((erfc(x) - want).abs() < 1e-13 * want.max(1e-300) + 1e-300);
    }

    #[test]
    fn edge_law_monotone(d1 in -3.0f64..3.0, d2 in -3.0f64..3.0, tau in 0.2f64..4.0) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(edge_micro_law(lo, tau) >= edge_micro_law(hi, tau) - 1e-15);
    }
}
