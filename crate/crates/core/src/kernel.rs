//! Karlin–McGregor determinant kernel.
//!
//! The transition density of n nonintersecting Brownian motions (diffusion
//! coefficient 1/n) is `det[ sqrt(n/2πt) exp(-n (x_i - y_j)^2 / 2t) ]`.
//! Raw entries underflow once the particle spread exceeds a few multiples of
//! sqrt(t/n), so everything here works in the log domain: each row's largest
//! exponent is factored out before an LU factorization with partial pivoting
//! accumulates log|det| and the sign.

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::measures::WeylPoint;

/// Log-domain value of the kernel determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    /// Natural log of |p_t(x, y)|; `-inf` when the determinant vanishes.
    pub log_density: f64,
    /// Sign of the determinant: +1, -1, or 0 (coincident coordinates).
    pub sign: i8,
}

/// Reciprocal-condition threshold below which drift evaluations are refused.
pub const RCOND_THRESHOLD: f64 = 1e-14;

fn check_time_positive(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("kernel time must be positive, got {t}")));
    }
    Ok(())
}

/// log p_t(x, y) with the determinant's sign.
///
/// `n_scale` is the diffusion scaling n in the kernel; it usually equals the
/// particle count but is kept separate so small systems can be probed at
/// other scalings.
pub fn log_km_density(x: &WeylPoint, y: &WeylPoint, t: f64, n_scale: usize) -> Result<KernelEval> {
    check_time_positive(t)?;
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "configuration sizes differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if n_scale == 0 {
        return Err(Error::validation("n_scale must be positive"));
    }
    Ok(log_km_density_raw(x.coords(), y.coords(), t, n_scale as f64))
}

/// Slice-level kernel evaluation without ordering checks. The determinant is
/// antisymmetric in the rows of either argument, so permuted inputs are
/// meaningful (they flip the sign).
pub(crate) fn log_km_density_raw(x: &[f64], y: &[f64], t: f64, n_scale: f64) -> KernelEval {
    let n = x.len();
    let log_norm = 0.5 * (n_scale / (2.0 * std::f64::consts::PI * t)).ln();
    let inv_2t = n_scale / (2.0 * t);

    // Row-wise exponent shifts keep the rescaled matrix entries in [0, 1].
    let mut scaled = vec![0.0f64; n * n];
    let mut shift_total = 0.0;
    for i in 0..n {
        let mut row_max = f64::NEG_INFINITY;
        for j in 0..n {
            let d = x[i] - y[j];
            let e = -inv_2t * d * d;
            scaled[i * n + j] = e;
            row_max = row_max.max(e);
        }
        shift_total += row_max + log_norm;
        for j in 0..n {
            scaled[i * n + j] = (scaled[i * n + j] - row_max).exp();
        }
    }

    let lu = Lu::factor(&scaled, n);
    let (sign, log_abs) = lu.log_abs_det();
    if sign == 0 {
        return KernelEval {
            log_density: f64::NEG_INFINITY,
            sign: 0,
        };
    }
    KernelEval {
        log_density: shift_total + log_abs,
        sign,
    }
}

/// Full gradient of log p_{1-t}(x, b) in x: the exact bridge drift before
/// the 1/n normalization applied by the integrator.
///
/// One LU factorization of the row-rescaled kernel matrix plus n triangular
/// solves produce the inverse; the gradient then costs O(n^2) more.
pub fn km_drift(x: &WeylPoint, b: &WeylPoint, t: f64, n_scale: usize) -> Result<Vec<f64>> {
    if !(t.is_finite() && t < 1.0) {
        return Err(Error::domain(format!("bridge time must be below 1, got {t}")));
    }
    if x.len() != b.len() {
        return Err(Error::validation(format!(
            "configuration sizes differ: {} vs {}",
            x.len(),
            b.len()
        )));
    }
    if !b.is_strict() {
        return Err(Error::validation(
            "exact drift needs strictly increasing terminal data; route tied endpoints \
             through the confluent drift",
        ));
    }
    if n_scale == 0 {
        return Err(Error::validation("n_scale must be positive"));
    }

    let tau = 1.0 - t;
    let n = x.len();
    let ns = n_scale as f64;
    let inv_2tau = ns / (2.0 * tau);
    let xs = x.coords();
    let bs = b.coords();

    // Row-rescaled matrix; the shifts cancel between M^{-1} and dM, so they
    // never need to be tracked here.
    let mut scaled = vec![0.0f64; n * n];
    for i in 0..n {
        let mut row_max = f64::NEG_INFINITY;
        for j in 0..n {
            let d = xs[i] - bs[j];
            let e = -inv_2tau * d * d;
            scaled[i * n + j] = e;
            row_max = row_max.max(e);
        }
        for j in 0..n {
            scaled[i * n + j] = (scaled[i * n + j] - row_max).exp();
        }
    }

    let lu = Lu::factor(&scaled, n);
    let rcond = lu.rcond_proxy();
    if rcond < RCOND_THRESHOLD {
        return Err(Error::Conditioning {
            rcond,
            t,
            x: xs.to_vec(),
            b: bs.to_vec(),
        });
    }
    let inv = lu.inverse();

    // drift_i = sum_j (A^{-1})_{ji} A_{ij} c_{ij},  c_{ij} = -n (x_i - b_j)/tau.
    let mut drift = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let c = -ns * (xs[i] - bs[j]) / tau;
            acc += inv[j * n + i] * scaled[i * n + j] * c;
        }
        drift[i] = acc;
    }
    Ok(drift)
}

/// Closed-form drift for the confluent terminal condition b ≡ c:
/// the gradient of log[Δ(x) · Π exp(-n (x_i - c)^2 / 2(1-t))].
pub fn km_drift_confluent(x: &WeylPoint, c: f64, t: f64, n_scale: usize) -> Result<Vec<f64>> {
    if !(t.is_finite() && t < 1.0) {
        return Err(Error::domain(format!("bridge time must be below 1, got {t}")));
    }
    if !c.is_finite() {
        return Err(Error::validation("confluent endpoint must be finite"));
    }
    if n_scale == 0 {
        return Err(Error::validation("n_scale must be positive"));
    }
    let tau = 1.0 - t;
    let ns = n_scale as f64;
    let xs = x.coords();
    let n = xs.len();
    let mut drift = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            if j != i {
                acc += 1.0 / (xs[i] - xs[j]);
            }
        }
        drift[i] = acc - ns * (xs[i] - c) / tau;
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn wp(v: &[f64]) -> WeylPoint {
        WeylPoint::closed(v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_gaussian_log_density() {
        let e = log_km_density(&wp(&[0.0]), &wp(&[0.0]), 1.0, 1).unwrap();
        assert_eq!(e.sign, 1);
        let expect = -(0.5 * (2.0 * std::f64::consts::PI).ln());
        assert!((e.log_density - expect).abs() < 1e-12, "{}", e.log_density);
    }

    /// Direct 2x2 cofactor oracle in plain arithmetic.
    fn cofactor_2x2(x: &[f64], y: &[f64], t: f64, ns: f64) -> f64 {
        let norm = (ns / (2.0 * std::f64::consts::PI * t)).sqrt();
        let g = |xi: f64, yj: f64| norm * (-ns * (xi - yj) * (xi - yj) / (2.0 * t)).exp();
        g(x[0], y[0]) * g(x[1], y[1]) - g(x[0], y[1]) * g(x[1], y[0])
    }

    #[test]
    fn matches_cofactor_oracle_n2() {
        let cases = [
            ([-0.4, 0.9], [0.1, 1.3], 0.7, 2usize),
            ([-1.0, 0.2], [-0.5, 0.6], 0.3, 2usize),
            ([0.0, 0.5], [0.2, 0.4], 1.2, 4usize),
        ];
        for (x, y, t, ns) in cases {
            let direct = cofactor_2x2(&x, &y, t, ns as f64);
            let e = log_km_density(&wp(&x), &wp(&y), t, ns).unwrap();
            assert_eq!(e.sign as f64, direct.signum());
            let rel = (e.log_density - direct.abs().ln()).abs() / direct.abs().ln().abs().max(1.0);
            assert!(rel < 1e-12, "rel err {rel}");
        }
    }

    #[test]
    fn coincident_coordinates_vanish() {
        let e = log_km_density(&wp(&[0.3, 0.3]), &wp(&[0.0, 1.0]), 0.5, 2).unwrap();
        assert_eq!(e.sign, 0);
        assert_eq!(e.log_density, f64::NEG_INFINITY);
    }

    #[test]
    fn no_underflow_at_large_n_near_pinning() {
        // Raw kernel entries underflow here; the log-domain path must not.
        let n = 32;
        let x: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.95).collect();
        let e = log_km_density(&wp(&x), &wp(&y), 0.01, n).unwrap();
        assert_eq!(e.sign, 1);
        assert!(e.log_density.is_finite());
    }

    #[test]
    fn exchange_antisymmetry() {
        // Swapping two entries of y flips the sign and keeps log|det|.
        for case in 0..8u64 {
            let n = 2 + (rng::word(11, case, 0, 0) % 5) as usize; // 2..=6
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut cx = -1.5;
            let mut cy = -1.0;
            for i in 0..n {
                cx += 0.2 + rng::uniform(11, case, 1, i as u64);
                cy += 0.2 + rng::uniform(11, case, 2, i as u64);
                x.push(cx);
                y.push(cy);
            }
            let base = log_km_density_raw(&x, &y, 0.6, n as f64);
            let i = (rng::word(11, case, 3, 0) % n as u64) as usize;
            let j = (i + 1 + (rng::word(11, case, 4, 0) % (n as u64 - 1)) as usize) % n;
            let mut swapped = y.clone();
            swapped.swap(i, j);
            let e = log_km_density_raw(&x, &swapped, 0.6, n as f64);
            assert_eq!(e.sign, -base.sign);
            assert!((e.log_density - base.log_density).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_drift_closed_form() {
        // n = 1: drift = n_scale (b - x)/(1 - t).
        let d = km_drift(&wp(&[0.0]), &wp(&[1.0]), 0.5, 4).unwrap();
        assert!((d[0] - 8.0).abs() < 1e-12, "{}", d[0]);
    }

    fn random_instance(seed: u64, n: usize) -> (WeylPoint, WeylPoint, f64) {
        // Generic bridge states: terminal data within O(1) of the current
        // configuration. Systematically diverging x/b sequences make the
        // kernel matrix genuinely degenerate (several rows peak in the same
        // column) and trip the conditioning guard.
        let mut x = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut cx = -1.0 - rng::uniform(seed, 0, 0, 0);
        for i in 0..n {
            cx += 0.5 + 0.8 * rng::uniform(seed, 1, i as u64, 0);
            x.push(cx);
            b.push(cx + 0.4 * (rng::uniform(seed, 2, i as u64, 0) - 0.5));
        }
        let t = 0.2 + 0.7 * rng::uniform(seed, 3, 0, 0);
        (wp(&x), wp(&b), t)
    }

    /// Central finite differences of log p_{1-t}(x, b): the independent
    /// oracle for the analytic gradient.
    fn fd_drift(x: &WeylPoint, b: &WeylPoint, t: f64, ns: usize, h: f64) -> Vec<f64> {
        let coords = x.coords();
        let mut out = Vec::with_capacity(coords.len());
        for i in 0..coords.len() {
            let mut plus = coords.to_vec();
            let mut minus = coords.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let lp = log_km_density_raw(&plus, b.coords(), 1.0 - t, ns as f64).log_density;
            let lm = log_km_density_raw(&minus, b.coords(), 1.0 - t, ns as f64).log_density;
            out.push((lp - lm) / (2.0 * h));
        }
        out
    }

    #[test]
    fn drift_matches_finite_differences() {
        let mut checked = 0;
        for seed in 0..100u64 {
            let n = 2 + (rng::word(99, seed, 0, 0) % 7) as usize; // 2..=8
            let (x, b, t) = random_instance(seed + 1000, n);
            let drift = km_drift(&x, &b, t, n).unwrap();
            let fd = fd_drift(&x, &b, t, n, 1e-6);
            for i in 0..n {
                let rel = (drift[i] - fd[i]).abs() / fd[i].abs().max(1.0);
                assert!(
                    rel < 1e-6,
                    "seed {seed} n {n} i {i}: drift {} fd {} rel {rel}",
                    drift[i],
                    fd[i]
                );
            }
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn drift_symmetric_configuration_is_antisymmetric() {
        let x = wp(&[-1.2, -0.4, 0.4, 1.2]);
        let b = wp(&[-0.9, -0.3, 0.3, 0.9]);
        let d = km_drift(&x, &b, 0.4, 4).unwrap();
        for i in 0..4 {
            assert!(
                (d[i] + d[3 - i]).abs() < 1e-9,
                "drift {:?} not antisymmetric",
                d
            );
        }
    }

    #[test]
    fn confluent_hand_evaluated_n2() {
        let d = km_drift_confluent(&wp(&[-1.0, 1.0]), 0.0, 0.5, 2).unwrap();
        assert!((d[0] - 3.5).abs() < 1e-12, "{:?}", d);
        assert!((d[1] + 3.5).abs() < 1e-12, "{:?}", d);
    }

    #[test]
    fn confluent_symmetric_antisymmetry() {
        let d = km_drift_confluent(&wp(&[-2.0, -0.5, 0.5, 2.0]), 0.0, 0.3, 4).unwrap();
        for i in 0..4 {
            assert!((d[i] + d[3 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn confluent_scalar_reduces_to_gaussian_gradient() {
        let d = km_drift_confluent(&wp(&[0.25]), 1.0, 0.5, 3).unwrap();
        assert!((d[0] - 3.0 * 0.75 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn drift_approaches_confluent_limit() {
        // b = (c - eps, c + eps), eps = 1e-5 versus the b ≡ c closed form.
        let x = wp(&[-0.8, 0.6]);
        let eps = 1e-5;
        let exact = km_drift(&x, &wp(&[-eps, eps]), 0.4, 2).unwrap();
        let conf = km_drift_confluent(&x, 0.0, 0.4, 2).unwrap();
        for i in 0..2 {
            assert!(
                (exact[i] - conf[i]).abs() < 1e-3,
                "exact {:?}, confluent {:?}",
                exact,
                conf
            );
        }
    }

    #[test]
    fn drift_rejects_tied_endpoints() {
        let x = wp(&[-1.0, 1.0]);
        assert!(km_drift(&x, &wp(&[0.0, 0.0]), 0.5, 2).is_err());
    }

    #[test]
    fn drift_rejects_t_at_one() {
        let x = wp(&[-1.0, 1.0]);
        let b = wp(&[-0.5, 0.5]);
        assert!(km_drift(&x, &b, 1.0, 2).is_err());
    }

    #[test]
    fn semigroup_property_n2() {
        // ∫ p_s(x, z) p_{t-s}(z, y) dz over the chamber equals p_t(x, y),
        // checked by 2-D trapezoidal quadrature over a truncated box.
        let x = [-0.3, 0.5];
        let y = [0.2, 0.9];
        let (s, t) = (0.3, 0.6);
        let ns = 2.0;
        let m = 321;
        let (lo, hi) = (-3.5, 4.2);
        let h = (hi - lo) / (m - 1) as f64;
        let dens = |a: &[f64], b: &[f64], tt: f64| {
            let e = log_km_density_raw(a, b, tt, ns);
            e.sign as f64 * e.log_density.exp()
        };
        let mut integral = 0.0;
        for i in 0..m {
            let z1 = lo + i as f64 * h;
            for j in 0..m {
                let z2 = lo + j as f64 * h;
                if z2 <= z1 {
                    continue;
                }
                let w = {
                    let wi = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                    let wj = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
                    wi * wj
                };
                let z = [z1, z2];
                integral += w * dens(&x, &z, s) * dens(&z, &y, t - s);
            }
        }
        integral *= h * h;
        let direct = dens(&x, &y, t);
        let rel = (integral - direct).abs() / direct.abs();
        assert!(rel < 1e-3, "rel err {rel}: quad {integral} direct {direct}");
    }
}
