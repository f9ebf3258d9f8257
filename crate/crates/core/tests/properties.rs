//! Property tests for the measure layer and the statistics invariants.

use nibb_core::measures::{wasserstein1, AtomicMeasure, GridDensity, Measure1D};
use nibb_core::stats::ks_distance;
use num_complex::Complex64;
use proptest::prelude::*;

fn atom_vec() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-50.0f64..50.0, 1..24)
}

/// Strictly increasing grid with non-negative values and positive mass.
fn density_data() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        proptest::collection::vec(0.01f64..1.0, 8..64),
        proptest::collection::vec(0.0f64..1.0, 8..64),
        -20.0f64..20.0,
    )
        .prop_map(|(gaps, mut values, origin)| {
            let n = gaps.len().min(values.len());
            let mut grid = Vec::with_capacity(n);
            let mut x = origin;
            for g in gaps.iter().take(n) {
                grid.push(x);
                x += g;
            }
            values.truncate(n);
            // Interior bump so the density is not identically zero.
            let mid = n / 2;
            values[mid] += 1.0;
            (grid, values)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_translation_is_exact((atoms, shift) in (atom_vec(), -10.0f64..10.0)) {
        let a = Measure1D::Atomic(AtomicMeasure::new(atoms.clone()).unwrap());
        let b = Measure1D::Atomic(
            AtomicMeasure::new(atoms.iter().map(|x| x + shift).collect()).unwrap(),
        );
        let w = wasserstein1(&a, &b);
        prop_assert!((w - shift.abs()).abs() < 1e-9, "w = {w}, shift = {shift}");
    }

    #[test]
    fn wasserstein_is_symmetric_and_nonnegative(
        (xs, ys) in (atom_vec(), atom_vec())
    ) {
        let a = Measure1D::Atomic(AtomicMeasure::new(xs).unwrap());
        let b = Measure1D::Atomic(AtomicMeasure::new(ys).unwrap());
        let ab = wasserstein1(&a, &b);
        let ba = wasserstein1(&b, &a);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn quantiles_are_monotone_and_supported(
        (data, n) in (density_data(), 1usize..40)
    ) {
        let (grid, values) = data;
        let d = GridDensity::new_normalized(grid, values).unwrap();
        let q = d.quantiles(n).unwrap();
        let (lo, hi) = d.support();
        for w in q.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(q[0] >= lo - 1e-12);
        prop_assert!(*q.last().unwrap() <= hi + 1e-12);
    }

    #[test]
    fn atomic_stieltjes_matches_direct_sum(
        (atoms, re, im) in (atom_vec(), -30.0f64..30.0, 0.1f64..10.0)
    ) {
        let z = Complex64::new(re, im);
        let m = AtomicMeasure::new(atoms.clone()).unwrap().stieltjes(z).unwrap();
        let direct: Complex64 =
            atoms.iter().map(|&x| (z - x).inv()).sum::<Complex64>() / atoms.len() as f64;
        prop_assert!((m - direct).norm() < 1e-12);
        prop_assert!(m.im < 0.0, "upper half plane maps below the axis");
    }

    #[test]
    fn ks_distance_is_invariant_under_monotone_maps(samples in atom_vec()) {
        // Reference CDF: a smooth strictly increasing function.
        let cdf = |x: f64| 0.5 * (1.0 + (x / 8.0).tanh());
        let d1 = ks_distance(&samples, cdf).unwrap();
        // Apply x -> x^3 (strictly increasing) to both samples and reference.
        let transformed: Vec<f64> = samples.iter().map(|x| x * x * x).collect();
        let d2 = ks_distance(&transformed, |y: f64| cdf(y.cbrt())).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-12, "{d1} vs {d2}");
    }

    #[test]
    fn density_csv_load_normalizes((data, scale) in (density_data(), 0.1f64..10.0)) {
        let (grid, values) = data;
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let mut text = String::new();
        for (x, v) in grid.iter().zip(&scaled) {
            text.push_str(&format!("{x},{v}\n"));
        }
        let d = GridDensity::from_csv_str(&text).unwrap();
        let total = d.cdf_at(d.support().1 + 1.0);
        prop_assert!((total - 1.0).abs() < 1e-9, "total mass {total}");
    }
}
