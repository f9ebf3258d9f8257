//! Cross-validation of the samplers: the exact drift and the mean-field
//! system driven by a limit shape must produce matching empirical densities
//! under independent noise.

use nibb_core::burgers::{solve_characteristics, watermelon_shape, SolveOptions};
use nibb_core::measures::{wasserstein1, AtomicMeasure, GridDensity, Measure1D, WeylPoint};
use nibb_core::sde::{simulate_bridge, simulate_meanfield, BridgeSpec, DriftMode, EndCondition};

fn pooled(ens: &nibb_core::sde::PathEnsemble, idx: usize) -> Measure1D {
    Measure1D::Atomic(AtomicMeasure::new(ens.pooled_positions(idx)).unwrap())
}

#[test]
fn watermelon_exact_and_meanfield_densities_agree() {
    // n = 64 at t = 0.5, 200 samples per sampler, independent seeds: the
    // confluent closed-form drift is the exact sampler here.
    let n = 64;
    let spec = BridgeSpec {
        n,
        start: WeylPoint::closed(vec![0.0; n]).unwrap(),
        end: EndCondition::Confluent(0.0),
        record_times: vec![0.5],
        drift_mode: DriftMode::Confluent,
        dt_max: 1e-3,
        dt_edge_factor: 0.1,
        seed: 2025,
        samples: 200,
    };
    let exact = simulate_bridge(&spec).unwrap();

    let shape = watermelon_shape(&[0.5]).unwrap();
    let mut mf_spec = spec.clone();
    mf_spec.drift_mode = DriftMode::MeanField;
    mf_spec.seed = 2026;
    let meanfield = simulate_meanfield(&mf_spec, &shape).unwrap();

    let w1 = wasserstein1(&pooled(&exact, 0), &pooled(&meanfield, 0));
    assert!(w1 < 0.05, "cross-sampler W1 = {w1}");
}

#[test]
fn kernel_drift_and_solved_shape_agree_at_moderate_n() {
    // Strict terminal data exercises the LU-based drift; n is kept moderate
    // because the Karlin–McGregor matrix at n = 64 mid-bridge is genuinely
    // at the edge of f64 conditioning.
    let n = 24;
    let samples = 150;
    let t = 0.5;
    let sc = GridDensity::semicircle(2.0).unwrap();
    let mu = Measure1D::Density(sc.clone());
    let shape_times: Vec<f64> = (0..=8).map(|k| 0.5 * k as f64 / 8.0).collect();
    let shape =
        solve_characteristics(&mu, &mu, &shape_times, &SolveOptions::default()).unwrap();

    let ends = sc.discretize(n).unwrap();
    let spec = BridgeSpec {
        n,
        start: ends.clone(),
        end: EndCondition::Points(WeylPoint::new(ends.coords().to_vec()).unwrap()),
        record_times: vec![t],
        drift_mode: DriftMode::ExactKernel,
        dt_max: 1e-3,
        dt_edge_factor: 0.1,
        seed: 2027,
        samples,
    };
    let exact = simulate_bridge(&spec).unwrap();

    let mut mf_spec = spec.clone();
    mf_spec.drift_mode = DriftMode::MeanField;
    mf_spec.seed = 2028;
    let meanfield = simulate_meanfield(&mf_spec, &shape).unwrap();

    let w1 = wasserstein1(&pooled(&exact, 0), &pooled(&meanfield, 0));
    assert!(w1 < 0.05, "cross-sampler W1 = {w1}");

    let idx = shape.slice_index(t).unwrap();
    let w_shape = wasserstein1(
        &pooled(&meanfield, 0),
        &Measure1D::Density(shape.densities[idx].clone()),
    );
    assert!(w_shape < 0.05, "mean-field vs shape W1 = {w_shape}");
}
