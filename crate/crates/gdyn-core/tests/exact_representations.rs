use std::f64::consts::PI;

use gdyn_core::exact::{
    correlator_beta_form, correlator_double_contour, density_source, ginibre_closed_sum,
    ginibre_density_closed,
};
use gdyn_core::rng::{stream_rng, uniform_disk};
use gdyn_core::{SourceSpec, C64};

fn grid5(half: f64) -> Vec<C64> {
    let mut pts = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            // offset keeps the grid away from source values on the axes
            pts.push(C64::new(
                -half + 2.0 * half * i as f64 / 4.0 + 0.013,
                -half + 2.0 * half * j as f64 / 4.0 + 0.021,
            ));
        }
    }
    pts
}

fn random_source(n: usize, seed: u64) -> SourceSpec {
    let mut rng = stream_rng(seed, 0);
    let vals: Vec<C64> = (0..n).map(|_| uniform_disk(&mut rng, 0.8)).collect();
    SourceSpec::from_values(&vals).unwrap()
}

#[test]
fn three_representations_agree() {
    let tau = 1.0;
    for n in [2usize, 4, 8] {
        let sources = [
            SourceSpec::null(n),
            random_source(n, n as u64),
            SourceSpec::spiric(n, C64::new(0.7, 0.2)).unwrap(),
        ];
        for (k, src) in sources.iter().enumerate() {
            for z in grid5(1.2) {
                let b = correlator_beta_form(n, tau, z, src).unwrap();
                let d = correlator_double_contour(n, tau, z, src)
                    .unwrap_or_else(|e| panic!("n={n} src={k} z={z}: {e}"));
                assert!(
                    (b - d).abs() < 1e-6,
                    "n={n} src={k} z={z}: beta {b} vs double {d}"
                );
                assert!(b >= -1e-8);
                if k == 0 {
                    let c = ginibre_closed_sum(n, tau, z.norm_sqr());
                    assert!((b - c).abs() < 1e-8, "n={n} z={z}: beta {b} vs closed {c}");
                    assert!(
                        (d - c).abs() < 1e-8,
                        "n={n} z={z}: double {d} vs closed {c}"
                    );
                }
            }
        }
    }
}

#[test]
fn density_matches_ginibre_closed_form() {
    for &(n, r) in &[(4usize, 0.2), (4, 0.9), (8, 0.5), (8, 1.3)] {
        let z = C64::new(r * 0.8, r * 0.6);
        let d = density_source(n, 1.0, z, &SourceSpec::null(n)).unwrap();
        let e = ginibre_density_closed(n, 1.0, r * r);
        assert!(
            (d - e).abs() < 1e-6 * e.max(1e-3),
            "n={n} r={r}: {d} vs {e}"
        );
    }
}

#[test]
fn density_normalization_generic_source() {
    let n = 4;
    let src = SourceSpec::from_values(&[
        C64::new(0.5, 0.1),
        C64::new(-0.4, 0.3),
        C64::new(0.1, -0.6),
        C64::new(-0.2, -0.1),
    ])
    .unwrap();
    let m = 31;
    let h = 6.0 / m as f64;
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let z = C64::new(-3.0 + (i as f64 + 0.5) * h, -3.0 + (j as f64 + 0.5) * h);
            total += density_source(n, 1.0, z, &src).unwrap() * h * h;
        }
    }
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn density_bulk_flat_large_n() {
    let n = 100;
    let src = SourceSpec::null(n);
    for &r in &[0.05, 0.3, 0.5, 0.7] {
        let d = density_source(n, 1.0, C64::new(r, 0.0), &src).unwrap();
        assert!((d * PI - 1.0).abs() < 0.02, "r={r}: {d}");
    }
}
