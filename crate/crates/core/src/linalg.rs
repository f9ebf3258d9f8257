//! Small dense LU machinery shared by the kernel and the Fredholm oracle.

/// LU factorization with partial pivoting of a square matrix stored row-major.
pub struct Lu {
    n: usize,
    /// Combined L (unit diagonal, below) and U (on and above the diagonal).
    lu: Vec<f64>,
    /// Row permutation: `perm[k]` is the original row now in position `k`.
    perm: Vec<usize>,
    /// Sign of the permutation, 0 if the matrix is exactly singular.
    perm_sign: i8,
}

impl Lu {
    pub fn factor(a: &[f64], n: usize) -> Lu {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut perm_sign: i8 = 1;

        for k in 0..n {
            // Partial pivot on the current column.
            let mut p = k;
            let mut max = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].abs();
                if v > max {
                    max = v;
                    p = r;
                }
            }
            if max == 0.0 {
                perm_sign = 0;
                continue;
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                perm_sign = -perm_sign;
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in (k + 1)..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
            }
        }

        Lu {
            n,
            lu,
            perm,
            perm_sign,
        }
    }

    /// (sign, log|det|). Sign 0 means an exactly singular pivot was hit,
    /// in which case the log is `-inf`.
    pub fn log_abs_det(&self) -> (i8, f64) {
        if self.perm_sign == 0 {
            return (0, f64::NEG_INFINITY);
        }
        let mut sign = self.perm_sign;
        let mut log = 0.0;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            if d == 0.0 {
                return (0, f64::NEG_INFINITY);
            }
            if d < 0.0 {
                sign = -sign;
            }
            log += d.abs().ln();
        }
        (sign, log)
    }

    /// Cheap reciprocal-condition proxy: min |U_kk| / max |U_kk|.
    pub fn rcond_proxy(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..self.n {
            let d = self.lu[k * self.n + k].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    /// Solves A x = b in place of the returned vector.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        // Forward substitution with unit lower triangle.
        for k in 0..n {
            for c in 0..k {
                x[k] -= self.lu[k * n + c] * x[c];
            }
        }
        // Back substitution.
        for k in (0..n).rev() {
            for c in (k + 1)..n {
                x[k] -= self.lu[k * n + c] * x[c];
            }
            x[k] /= self.lu[k * n + k];
        }
        x
    }

    /// Full inverse via one triangular solve per unit vector.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_matches_direct_3x3() {
        let a = [2.0, 1.0, 0.5, -1.0, 3.0, 1.0, 0.25, -0.5, 4.0];
        let lu = Lu::factor(&a, 3);
        // Cofactor expansion by hand.
        let det: f64 = 2.0 * (3.0 * 4.0 - 1.0 * -0.5) - 1.0 * (-1.0 * 4.0 - 1.0 * 0.25)
            + 0.5 * (-1.0 * -0.5 - 3.0 * 0.25);
        let (sign, log) = lu.log_abs_det();
        assert_eq!(sign as f64, det.signum());
        assert!((log - det.abs().ln()).abs() < 1e-12);
    }

    #[test]
    fn solve_and_inverse_roundtrip() {
        let a = [4.0, 1.0, 2.0, 0.5, 3.0, -1.0, 1.5, -2.0, 5.0];
        let lu = Lu::factor(&a, 3);
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
        let inv = lu.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_reports_zero_sign() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let lu = Lu::factor(&a, 2);
        let (sign, log) = lu.log_abs_det();
        assert_eq!(sign, 0);
        assert_eq!(log, f64::NEG_INFINITY);
    }
}
