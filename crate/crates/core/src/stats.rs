//! Statistical harnesses over sampled ensembles: rigidity reports, Stieltjes
//! concentration, rescaled edge statistics, Kolmogorov–Smirnov distances and
//! stochastic-dominance checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::burgers::{LimitShape, Side};
use crate::error::{Error, Result};
use crate::sde::PathEnsemble;

// ---------------------------------------------------------------------------
// Rigidity
// ---------------------------------------------------------------------------

/// Per-rank deviations |x_i - γ_i(t)| aggregated over samples, plus the
/// per-sample overshoot beyond the support edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidityReport {
    pub t: f64,
    pub n: usize,
    pub samples: usize,
    /// Classical locations γ_i(t): the midpoint quantiles of ρ*_t.
    pub quantiles: Vec<f64>,
    pub median_dev: Vec<f64>,
    pub p95_dev: Vec<f64>,
    /// max(a(t) - x_1, x_n - b(t), 0) per sample.
    pub edge_excess: Vec<f64>,
}

impl RigidityReport {
    /// Median of the per-rank median deviations over the bulk ranks
    /// [n/4, 3n/4).
    pub fn bulk_median(&self) -> f64 {
        let lo = self.n / 4;
        let hi = (3 * self.n / 4).max(lo + 1).min(self.n);
        median(&self.median_dev[lo..hi])
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return f64::NAN;
    }
    let idx = ((v.len() as f64 - 1.0) * p).round() as usize;
    v[idx.min(v.len() - 1)]
}

/// Compares every recorded particle against its classical location.
pub fn rigidity_report(
    ensemble: &PathEnsemble,
    shape: &LimitShape,
    t: f64,
) -> Result<RigidityReport> {
    let time_index = ensemble
        .time_index(t)
        .ok_or_else(|| Error::usage(format!("time {t} was not recorded in the ensemble")))?;
    let slice_index = shape
        .slice_index(t)
        .ok_or_else(|| Error::usage(format!("shape has no slice at time {t}")))?;
    let n = ensemble.n();
    let density = &shape.densities[slice_index];
    let quantiles = density.quantiles(n)?;
    let (a, b) = shape.edges[slice_index];

    let samples = ensemble.samples();
    let mut median_dev = Vec::with_capacity(n);
    let mut p95_dev = Vec::with_capacity(n);
    let mut devs = vec![0.0f64; samples];
    for rank in 0..n {
        for (s, dev) in devs.iter_mut().enumerate() {
            *dev = (ensemble.slice(s, time_index)[rank] - quantiles[rank]).abs();
        }
        median_dev.push(median(&devs));
        p95_dev.push(percentile(&devs, 0.95));
    }
    let edge_excess: Vec<f64> = (0..samples)
        .map(|s| {
            let slice = ensemble.slice(s, time_index);
            (a - slice[0]).max(slice[n - 1] - b).max(0.0)
        })
        .collect();

    Ok(RigidityReport {
        t,
        n,
        samples,
        quantiles,
        median_dev,
        p95_dev,
        edge_excess,
    })
}

// ---------------------------------------------------------------------------
// Stieltjes concentration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StieltjesDeviation {
    /// Probe point (re, im).
    pub z: (f64, f64),
    /// Median over samples of |m̃_t(z) - m_t(z)|.
    pub median: f64,
    /// Max over samples.
    pub max: f64,
    /// True when z lies outside the validated domain; no value computed.
    pub flagged: bool,
}

/// Empirical-vs-limit Stieltjes deviations at the probe points.
///
/// Probes must satisfy Im z > 0 and the domain condition
/// min(dist(z, [a, b]) · |Im m_t(z)|, Im z) ≳ (log n)² / n; points outside
/// it are flagged rather than evaluated.
pub fn stieltjes_compare(
    ensemble: &PathEnsemble,
    shape: &LimitShape,
    t: f64,
    z_list: &[Complex64],
) -> Result<Vec<StieltjesDeviation>> {
    let time_index = ensemble
        .time_index(t)
        .ok_or_else(|| Error::usage(format!("time {t} was not recorded in the ensemble")))?;
    let slice_index = shape
        .slice_index(t)
        .ok_or_else(|| Error::usage(format!("shape has no slice at time {t}")))?;
    let density = &shape.densities[slice_index];
    let (a, b) = shape.edges[slice_index];
    let n = ensemble.n() as f64;
    let threshold = (n.ln() * n.ln()) / n;

    let mut out = Vec::with_capacity(z_list.len());
    for &z in z_list {
        if z.im <= 0.0 {
            out.push(StieltjesDeviation {
                z: (z.re, z.im),
                median: f64::NAN,
                max: f64::NAN,
                flagged: true,
            });
            continue;
        }
        let m_limit = density.stieltjes(z)?;
        let dist = if z.re < a {
            Complex64::new(z.re - a, z.im).norm()
        } else if z.re > b {
            Complex64::new(z.re - b, z.im).norm()
        } else {
            z.im
        };
        if (dist * m_limit.im.abs()).min(z.im) < threshold {
            out.push(StieltjesDeviation {
                z: (z.re, z.im),
                median: f64::NAN,
                max: f64::NAN,
                flagged: true,
            });
            continue;
        }
        let devs: Vec<f64> = (0..ensemble.samples())
            .map(|s| {
                let slice = ensemble.slice(s, time_index);
                let emp: Complex64 =
                    slice.iter().map(|&x| (z - x).inv()).sum::<Complex64>() / slice.len() as f64;
                (emp - m_limit).norm()
            })
            .collect();
        out.push(StieltjesDeviation {
            z: (z.re, z.im),
            median: median(&devs),
            max: devs.iter().cloned().fold(0.0, f64::max),
            flagged: false,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Edge statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeScaling {
    pub edge: f64,
    pub s: f64,
    pub n: usize,
}

/// Rescaled extreme-particle samples.
///
/// Sign convention: eta = (s n)^{2/3} (a - x_1) on the left and
/// (s n)^{2/3} (x_n - b) on the right, so both converge in law to the
/// Tracy–Widom GUE distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSampleSet {
    pub t: f64,
    pub side: Side,
    pub eta: Vec<f64>,
    pub scaling: EdgeScaling,
}

pub fn edge_statistics(
    ensemble: &PathEnsemble,
    shape: &LimitShape,
    t: f64,
    side: Side,
) -> Result<EdgeSampleSet> {
    let time_index = ensemble
        .time_index(t)
        .ok_or_else(|| Error::usage(format!("time {t} was not recorded in the ensemble")))?;
    let slice_index = shape
        .slice_index(t)
        .ok_or_else(|| Error::usage(format!("shape has no slice at time {t}")))?;
    let (a, b) = shape.edges[slice_index];
    let (s_left, s_right) = shape.edge_coeffs[slice_index];
    let (edge, s) = match side {
        Side::Left => (a, s_left),
        Side::Right => (b, s_right),
    };
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::usage(format!(
            "shape has no valid edge coefficient at t = {t} ({side:?})"
        )));
    }
    let n = ensemble.n();
    let scale = (s * n as f64).powf(2.0 / 3.0);
    let eta: Vec<f64> = (0..ensemble.samples())
        .map(|sm| {
            let slice = ensemble.slice(sm, time_index);
            match side {
                Side::Left => scale * (edge - slice[0]),
                Side::Right => scale * (slice[n - 1] - edge),
            }
        })
        .collect();
    Ok(EdgeSampleSet {
        t,
        side,
        eta,
        scaling: EdgeScaling { edge, s, n },
    })
}

// ---------------------------------------------------------------------------
// Kolmogorov–Smirnov
// ---------------------------------------------------------------------------

/// Two-sided KS statistic of the samples against a reference CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::usage("KS distance needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        d = d.max(f - i as f64 / m);
        d = d.max((i + 1) as f64 / m - f);
    }
    Ok(d)
}

/// Dvoretzky–Kiefer–Wolfowitz band at confidence level 1 - alpha.
pub fn dkw_band(samples: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * samples as f64)).sqrt()
}

// ---------------------------------------------------------------------------
// Stochastic dominance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceReport {
    pub t: f64,
    pub alpha: f64,
    pub band: f64,
    /// Number of evaluation points violating the banded dominance per rank.
    pub rank_violations: Vec<usize>,
    pub total_violations: usize,
    /// Largest observed F_hi - F_lo - band (negative when dominance holds).
    pub max_exceedance: f64,
}

/// Tests rankwise stochastic dominance of `hi` over `lo` at a recorded time:
/// the empirical CDF of each rank of `hi` must stay below the CDF of the
/// same rank of `lo` up to a two-sample DKW band at level alpha = 0.01.
pub fn dominance_test(
    hi: &PathEnsemble,
    lo: &PathEnsemble,
    t: f64,
) -> Result<DominanceReport> {
    if hi.n() != lo.n() {
        return Err(Error::usage(format!(
            "rank mismatch: {} vs {}",
            hi.n(),
            lo.n()
        )));
    }
    let ti_hi = hi
        .time_index(t)
        .ok_or_else(|| Error::usage(format!("time {t} not recorded in hi ensemble")))?;
    let ti_lo = lo
        .time_index(t)
        .ok_or_else(|| Error::usage(format!("time {t} not recorded in lo ensemble")))?;

    // Boundary data of hi must dominate lo coordinatewise.
    for (h, l) in hi
        .spec
        .start
        .coords()
        .iter()
        .zip(lo.spec.start.coords())
    {
        if h < l {
            return Err(Error::usage(
                "hi starting data does not dominate lo coordinatewise",
            ));
        }
    }

    let alpha = 0.01;
    let band = dkw_band(hi.samples(), alpha) + dkw_band(lo.samples(), alpha);
    let n = hi.n();
    let mut rank_violations = vec![0usize; n];
    let mut max_exceedance = f64::NEG_INFINITY;

    for rank in 0..n {
        let mut xs_hi = hi.rank_values(ti_hi, rank);
        let mut xs_lo = lo.rank_values(ti_lo, rank);
        xs_hi.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs_lo.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut grid: Vec<f64> = xs_hi.iter().chain(xs_lo.iter()).cloned().collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        for &x in &grid {
            let f_hi = xs_hi.partition_point(|&v| v <= x) as f64 / xs_hi.len() as f64;
            let f_lo = xs_lo.partition_point(|&v| v <= x) as f64 / xs_lo.len() as f64;
            let exceed = f_hi - f_lo - band;
            max_exceedance = max_exceedance.max(exceed);
            if exceed > 0.0 {
                rank_violations[rank] += 1;
            }
        }
    }
    Ok(DominanceReport {
        t,
        alpha,
        band,
        total_violations: rank_violations.iter().sum(),
        rank_violations,
        max_exceedance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::burgers::watermelon_shape;
    use crate::measures::WeylPoint;
    use crate::rng;
    use crate::sde::{simulate_bridge, BridgeSpec, DriftMode, EndCondition};

    /// Hand-built ensemble with every sample equal to `slice` shifted by the
    /// per-sample offsets.
    fn synthetic_ensemble(slice: &[f64], offsets: &[f64], t: f64) -> PathEnsemble {
        let n = slice.len();
        let spec = BridgeSpec {
            n,
            start: WeylPoint::closed(vec![0.0; n]).unwrap(),
            end: EndCondition::Confluent(0.0),
            record_times: vec![t],
            drift_mode: DriftMode::Confluent,
            dt_max: 1e-3,
            dt_edge_factor: 0.1,
            seed: 0,
            samples: offsets.len(),
        };
        let positions = offsets
            .iter()
            .map(|&c| vec![slice.iter().map(|x| x + c).collect::<Vec<f64>>()])
            .collect();
        PathEnsemble {
            spec,
            times: vec![t],
            positions,
        }
    }

    #[test]
    fn rigidity_exact_quantiles_have_zero_deviation() {
        let shape = watermelon_shape(&[0.5]).unwrap();
        let n = 16;
        let quantiles = shape.densities[0].quantiles(n).unwrap();
        let ens = synthetic_ensemble(&quantiles, &[0.0; 8], 0.5);
        let report = rigidity_report(&ens, &shape, 0.5).unwrap();
        assert!(report.median_dev.iter().all(|&d| d == 0.0));
        assert!(report.edge_excess.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn rigidity_shifted_ensemble_reports_shift() {
        let shape = watermelon_shape(&[0.5]).unwrap();
        let quantiles = shape.densities[0].quantiles(8).unwrap();
        let c = 0.03;
        let ens = synthetic_ensemble(&quantiles, &vec![c; 5], 0.5);
        let report = rigidity_report(&ens, &shape, 0.5).unwrap();
        for d in &report.median_dev {
            assert!((d - c).abs() < 1e-12);
        }
    }

    #[test]
    fn rigidity_translation_equivariance() {
        // Shifting ensemble and shape together leaves the report unchanged.
        let c = 0.4;
        let shape0 = watermelon_shape(&[0.5]).unwrap();
        let shape1 =
            crate::burgers::watermelon_shape_between(c, c, &[0.5], 2048).unwrap();
        let q = shape0.densities[0].quantiles(6).unwrap();
        let offsets = [0.01, -0.02, 0.005];
        let e0 = synthetic_ensemble(&q, &offsets, 0.5);
        let q1: Vec<f64> = q.iter().map(|x| x + c).collect();
        let e1 = synthetic_ensemble(&q1, &offsets, 0.5);
        let r0 = rigidity_report(&e0, &shape0, 0.5).unwrap();
        let r1 = rigidity_report(&e1, &shape1, 0.5).unwrap();
        for (a, b) in r0.median_dev.iter().zip(&r1.median_dev) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        for (a, b) in r0.edge_excess.iter().zip(&r1.edge_excess) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rigidity_unrecorded_time_is_usage_error() {
        let shape = watermelon_shape(&[0.5]).unwrap();
        let q = shape.densities[0].quantiles(4).unwrap();
        let ens = synthetic_ensemble(&q, &[0.0], 0.5);
        assert!(matches!(
            rigidity_report(&ens, &shape, 0.25),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn stieltjes_quantile_configuration_midpoint_bound() {
        // The midpoint-quantile configuration approximates the limiting
        // Stieltjes transform to the midpoint-rule error, below 2/n.
        let shape = watermelon_shape(&[0.5]).unwrap();
        for n in [16usize, 32, 64] {
            let q = shape.densities[0].quantiles(n).unwrap();
            let ens = synthetic_ensemble(&q, &[0.0], 0.5);
            let devs = stieltjes_compare(
                &ens,
                &shape,
                0.5,
                &[Complex64::new(0.0, 2.0)],
            )
            .unwrap();
            assert!(!devs[0].flagged);
            assert!(
                devs[0].max < 2.0 / n as f64,
                "n={n}: deviation {}",
                devs[0].max
            );
        }
    }

    #[test]
    fn stieltjes_far_field_tiny() {
        let shape = watermelon_shape(&[0.5]).unwrap();
        let q = shape.densities[0].quantiles(32).unwrap();
        let ens = synthetic_ensemble(&q, &[0.0], 0.5);
        let devs =
            stieltjes_compare(&ens, &shape, 0.5, &[Complex64::new(0.0, 100.0)]).unwrap();
        assert!(devs[0].max < 1e-3, "deviation {}", devs[0].max);
    }

    #[test]
    fn stieltjes_flags_bad_probes() {
        let shape = watermelon_shape(&[0.5]).unwrap();
        let q = shape.densities[0].quantiles(8).unwrap();
        let ens = synthetic_ensemble(&q, &[0.0], 0.5);
        let devs = stieltjes_compare(
            &ens,
            &shape,
            0.5,
            &[Complex64::new(0.0, -1.0), Complex64::new(0.0, 1e-6)],
        )
        .unwrap();
        assert!(devs.iter().all(|d| d.flagged));
    }

    #[test]
    fn edge_statistics_sign_and_scaling() {
        let shape = watermelon_shape(&[0.5]).unwrap();
        let (a, b) = shape.edges[0];
        let n = 8;
        // One synthetic sample with x_1 exactly at the left edge.
        let mut slice: Vec<f64> = (0..n).map(|i| a + i as f64 * 0.1).collect();
        slice[n - 1] = b; // and x_n at the right edge
        let ens = synthetic_ensemble(&slice, &[0.0], 0.5);
        let left = edge_statistics(&ens, &shape, 0.5, Side::Left).unwrap();
        assert!(left.eta[0].abs() < 1e-12);
        let right = edge_statistics(&ens, &shape, 0.5, Side::Right).unwrap();
        assert!(right.eta[0].abs() < 1e-9);

        // Doubling s multiplies eta by 2^(2/3).
        let mut shape2 = shape.clone();
        shape2.edge_coeffs[0] = (shape.edge_coeffs[0].0 * 2.0, shape.edge_coeffs[0].1 * 2.0);
        let slice2: Vec<f64> = (0..n).map(|i| a + 0.05 + i as f64 * 0.1).collect();
        let ens2 = synthetic_ensemble(&slice2, &[0.0], 0.5);
        let e1 = edge_statistics(&ens2, &shape, 0.5, Side::Left).unwrap();
        let e2 = edge_statistics(&ens2, &shape2, 0.5, Side::Left).unwrap();
        let ratio = e2.eta[0] / e1.eta[0];
        assert!((ratio - 2.0f64.powf(2.0 / 3.0)).abs() < 1e-12, "ratio {ratio}");
    }

    #[test]
    fn edge_statistics_stable_under_grid_refit() {
        // Refitting the same closed-form density on a 2x grid moves eta by
        // less than 1e-2 per sample.
        let coarse = watermelon_shape(&[0.5]).unwrap();
        let fine = crate::burgers::watermelon_shape_between(0.0, 0.0, &[0.5], 4096).unwrap();
        let mut refit_coarse = coarse.clone();
        let mut refit_fine = fine.clone();
        for (shape, refit) in [(&coarse, &mut refit_coarse), (&fine, &mut refit_fine)] {
            let left = crate::burgers::edge_coefficient(&shape.densities[0], Side::Left).unwrap();
            let right =
                crate::burgers::edge_coefficient(&shape.densities[0], Side::Right).unwrap();
            refit.edges[0] = (left.edge, right.edge);
            refit.edge_coeffs[0] = (left.s, right.s);
        }
        let n = 8;
        let slice: Vec<f64> = (0..n).map(|i| -0.95 + i as f64 * 0.2).collect();
        let ens = synthetic_ensemble(&slice, &[0.0], 0.5);
        let e1 = edge_statistics(&ens, &refit_coarse, 0.5, Side::Left).unwrap();
        let e2 = edge_statistics(&ens, &refit_fine, 0.5, Side::Left).unwrap();
        assert!(
            (e1.eta[0] - e2.eta[0]).abs() < 1e-2,
            "{} vs {}",
            e1.eta[0],
            e2.eta[0]
        );
    }

    #[test]
    fn ks_single_sample_at_median() {
        let d = ks_distance(&[0.0], |_| 0.5).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_samples_below_reference_range() {
        let cdf = |x: f64| x.clamp(0.0, 1.0); // uniform on [0, 1]
        let samples = vec![-3.0, -2.0, -1.5];
        let d = ks_distance(&samples, cdf).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ks_self_test_against_uniform() {
        let m = 100_000;
        let samples: Vec<f64> = (0..m).map(|i| rng::uniform(5, 0, i as u64, 1)).collect();
        let d = ks_distance(&samples, |x: f64| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.01, "KS = {d}");
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let samples: Vec<f64> = (0..500).map(|i| rng::standard_normal(9, 0, i, 0)).collect();
        let phi = |x: f64| 0.5 * (1.0 + erf_like(x));
        let d1 = ks_distance(&samples, phi).unwrap();
        let transformed: Vec<f64> = samples.iter().map(|x| x.exp()).collect();
        let d2 = ks_distance(&transformed, |y: f64| {
            if y <= 0.0 {
                0.0
            } else {
                phi(y.ln())
            }
        })
        .unwrap();
        assert!((d1 - d2).abs() < 1e-12);
    }

    /// Rough error function used only to build a strictly increasing CDF for
    /// the invariance test; accuracy is irrelevant there.
    fn erf_like(x: f64) -> f64 {
        let t = x / (1.0 + 0.3275911 * x.abs() / std::f64::consts::SQRT_2);
        (x / (1.0 + x * x / 3.0)).tanh().max(-1.0).min(1.0) + 0.0 * t
    }

    #[test]
    fn ks_rejects_empty() {
        assert!(ks_distance(&[], |_| 0.5).is_err());
    }

    fn quick_ensemble(shift: f64, seed: u64) -> PathEnsemble {
        let n = 6;
        let spec = BridgeSpec {
            n,
            start: WeylPoint::closed(vec![shift; n]).unwrap(),
            end: EndCondition::Confluent(shift),
            record_times: vec![0.5],
            drift_mode: DriftMode::Confluent,
            dt_max: 2e-3,
            dt_edge_factor: 0.1,
            seed,
            samples: 300,
        };
        simulate_bridge(&spec).unwrap()
    }

    #[test]
    fn dominance_shifted_ensembles() {
        let lo = quick_ensemble(0.0, 21);
        let hi = quick_ensemble(0.15, 22);
        let report = dominance_test(&hi, &lo, 0.5).unwrap();
        assert_eq!(report.total_violations, 0, "report {report:?}");
        // And the reversed comparison is a usage error on the boundary data.
        assert!(dominance_test(&lo, &hi, 0.5).is_err());
    }

    #[test]
    fn dominance_self_comparison_passes() {
        let a = quick_ensemble(0.0, 31);
        let b = quick_ensemble(0.0, 32);
        let report = dominance_test(&a, &b, 0.5).unwrap();
        assert_eq!(report.total_violations, 0, "report {report:?}");
        let same = dominance_test(&a, &a, 0.5).unwrap();
        assert_eq!(same.total_violations, 0);
        assert!(same.max_exceedance <= 0.0);
    }

    #[test]
    fn dominance_rank_mismatch_rejected() {
        let a = quick_ensemble(0.0, 41);
        let shape = watermelon_shape(&[0.5]).unwrap();
        let q = shape.densities[0].quantiles(4).unwrap();
        let b = synthetic_ensemble(&q, &[0.0], 0.5);
        assert!(dominance_test(&a, &b, 0.5).is_err());
    }
}
