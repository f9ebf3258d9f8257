//! Limit shapes of nonintersecting Brownian bridges.
//!
//! The density/velocity pair (ρ*_t, u*_t) of the hydrodynamic limit is
//! encoded as the complex slope f_t = u*_t − iπρ*_t, which satisfies the
//! complex Burgers equation and is constant along the characteristics
//! z_t = z + t f_0(z). The confluent (watermelon) case has closed forms; the
//! general two-density case is solved numerically: the unknown is the
//! drift field g_0 = u_0 − H(μ_A) on the initial slice, transported forward
//! by implicit characteristic inversion and corrected by a damped
//! fixed-point sweep until the time-1 density matches μ_B.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{GridDensity, Measure1D};

/// Fraction of the support width used to widen the drift evaluation window.
pub const WINDOW_PAD_FRACTION: f64 = 0.1;

/// Edge-fit window: grid cells where the density is at most this fraction of
/// its peak.
const EDGE_FIT_PEAK_FRACTION: f64 = 0.2;

// ---------------------------------------------------------------------------
// Shape types
// ---------------------------------------------------------------------------

/// How the shape was produced; the watermelon form carries its closed-form
/// parameters so the drift field can be evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ShapeForm {
    /// Point-to-point boundary data: semicircular profiles with affine
    /// transport between `start` and `end`.
    Watermelon { start: f64, end: f64 },
    /// Output of the characteristic solver on general boundary densities.
    Numeric,
}

/// Square-root edge fit ρ(x) ≈ s sqrt(±(x - edge)) / π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeFit {
    pub edge: f64,
    pub s: f64,
    /// RMS residual of the fit relative to the fitted scale.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ShapeDiagnostics {
    pub iterations: usize,
    pub final_mismatch: f64,
    pub tolerance: f64,
    /// Mean absolute continuity-equation residual over bulk cells.
    pub continuity_residual: f64,
}

/// Initial-slice characteristic data of a solved shape: base points on the
/// t = 0 slice and the complex slope f_0 there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacteristicField {
    pub base_points: Vec<[f64; 2]>,
    pub slopes: Vec<[f64; 2]>,
}

/// Time-indexed limit shape: densities, velocities, edges and edge
/// coefficients, plus the drift field g_t = u*_t − H(ρ*_t) cached on the
/// same grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitShape {
    pub times: Vec<f64>,
    pub densities: Vec<GridDensity>,
    /// u*_t sampled on each density's grid.
    pub velocities: Vec<Vec<f64>>,
    /// (a(t), b(t)) per time.
    pub edges: Vec<(f64, f64)>,
    /// (s_left(t), s_right(t)) per time.
    pub edge_coeffs: Vec<(f64, f64)>,
    pub form: ShapeForm,
    pub diagnostics: ShapeDiagnostics,
    pub characteristic: Option<CharacteristicField>,
    /// g_t = u − H(ρ) on each grid; rebuilt after deserialization.
    #[serde(skip)]
    g_grids: Vec<Vec<f64>>,
}

impl LimitShape {
    fn finalize(mut self) -> Self {
        if self.g_grids.len() != self.times.len() {
            self.g_grids = self
                .densities
                .iter()
                .zip(&self.velocities)
                .map(|(d, u)| {
                    d.grid()
                        .iter()
                        .zip(u)
                        .map(|(&x, &ux)| ux - d.hilbert_unchecked(x))
                        .collect()
                })
                .collect();
        }
        self
    }

    /// True when the drift field is available at time t.
    pub fn covers(&self, t: f64) -> bool {
        match self.form {
            ShapeForm::Watermelon { .. } => (0.0..1.0).contains(&t),
            ShapeForm::Numeric => {
                !self.times.is_empty()
                    && t >= self.times[0] - 1e-9
                    && t <= self.times[self.times.len() - 1] + 1e-9
            }
        }
    }

    /// Index of the slice at time t, within 1e-9.
    pub fn slice_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&tt| (tt - t).abs() < 1e-9)
    }

    /// Drift evaluation window at time t: support widened by 10%.
    pub fn window(&self, t: f64) -> Result<(f64, f64)> {
        match self.form {
            ShapeForm::Watermelon { start, end } => {
                if !(0.0..1.0).contains(&t) {
                    return Err(Error::domain(format!("watermelon window needs t in [0,1), got {t}")));
                }
                let center = (1.0 - t) * start + t * end;
                let sigma = (t * (1.0 - t)).sqrt();
                let half = 2.0 * sigma;
                let pad = WINDOW_PAD_FRACTION * 2.0 * half;
                Ok((center - half - pad, center + half + pad))
            }
            ShapeForm::Numeric => {
                let (k0, k1, theta) = self.bracket(t)?;
                let (lo0, hi0) = padded_support(&self.densities[k0]);
                let (lo1, hi1) = padded_support(&self.densities[k1]);
                Ok((lo0 * (1.0 - theta) + lo1 * theta, hi0 * (1.0 - theta) + hi1 * theta))
            }
        }
    }

    fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        if !self.covers(t) {
            return Err(Error::domain(format!(
                "time {t} outside shape coverage [{:?}]",
                (self.times.first(), self.times.last())
            )));
        }
        let n = self.times.len();
        if t <= self.times[0] {
            return Ok((0, 0, 0.0));
        }
        if t >= self.times[n - 1] {
            return Ok((n - 1, n - 1, 0.0));
        }
        let k = self.times.partition_point(|&tt| tt <= t) - 1;
        let theta = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok((k, (k + 1).min(n - 1), theta))
    }

    /// Mean-field drift g_t(x) = u*_t(x) − H(ρ*_t)(x).
    ///
    /// Inside the support this is the cached grid field; outside (but within
    /// the padded window) the grids already carry the real-analytic
    /// continuation, so the same interpolation applies.
    pub fn compute_g(&self, t: f64, x: f64) -> Result<f64> {
        match self.form {
            ShapeForm::Watermelon { start, end } => {
                if !(0.0..1.0).contains(&t) {
                    return Err(Error::domain(format!("watermelon drift needs t in [0,1), got {t}")));
                }
                let (wlo, whi) = self.window(t)?;
                if x < wlo || x > whi {
                    return Err(Error::domain(format!(
                        "x = {x} outside drift window [{wlo}, {whi}] at t = {t}"
                    )));
                }
                let center = (1.0 - t) * start + t * end;
                Ok((end - start) - (x - center) / (1.0 - t))
            }
            ShapeForm::Numeric => {
                let (wlo, whi) = self.window(t)?;
                if x < wlo || x > whi {
                    return Err(Error::domain(format!(
                        "x = {x} outside drift window [{wlo}, {whi}] at t = {t}"
                    )));
                }
                let (k0, k1, theta) = self.bracket(t)?;
                let g0 = self.slice_g(k0, x);
                if k0 == k1 {
                    return Ok(g0);
                }
                let g1 = self.slice_g(k1, x);
                Ok(g0 * (1.0 - theta) + g1 * theta)
            }
        }
    }

    fn slice_g(&self, k: usize, x: f64) -> f64 {
        let grid = self.densities[k].grid();
        let g = &self.g_grids[k];
        interp_clamped(grid, g, x)
    }

    /// Drift evaluation with the sampler's robustness contract.
    ///
    /// The closed watermelon form extends to the whole line, so it is used
    /// directly. Numeric shapes clamp the argument to the evaluation window
    /// (excursions at edge-fluctuation scale must not abort a run) and
    /// refuse once a particle exceeds the window by more than 10% of the
    /// support width.
    pub fn sampler_g(&self, t: f64, x: f64) -> Result<f64> {
        match self.form {
            ShapeForm::Watermelon { start, end } => {
                if !(0.0..1.0).contains(&t) {
                    return Err(Error::domain(format!(
                        "watermelon drift needs t in [0,1), got {t}"
                    )));
                }
                let center = (1.0 - t) * start + t * end;
                Ok((end - start) - (x - center) / (1.0 - t))
            }
            ShapeForm::Numeric => {
                let (wlo, whi) = self.window(t)?;
                let width = (whi - wlo) / (1.0 + 2.0 * WINDOW_PAD_FRACTION);
                let slack = 0.1 * width;
                if x < wlo - slack || x > whi + slack {
                    return Err(Error::Integration(format!(
                        "particle at {x} exceeded the drift window [{wlo}, {whi}] \
                         by more than 10% of the support width at t = {t}"
                    )));
                }
                self.compute_g(t, x.clamp(wlo, whi))
            }
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a serialized shape.
    pub fn from_json_str(text: &str) -> Result<LimitShape> {
        let raw: LimitShape = serde_json::from_str(text)?;
        let n = raw.times.len();
        if raw.densities.len() != n || raw.velocities.len() != n || raw.edges.len() != n
            || raw.edge_coeffs.len() != n
        {
            return Err(Error::validation("shape field lengths disagree"));
        }
        if raw.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation("shape times must be strictly increasing"));
        }
        let mut densities = Vec::with_capacity(n);
        for (d, u) in raw.densities.into_iter().zip(&raw.velocities) {
            if d.grid().len() != u.len() {
                return Err(Error::validation("velocity grid mismatch"));
            }
            // Deserialized densities carry no cumulative cache; rebuild.
            densities.push(crate::measures::rebuild_density(d)?);
        }
        for (a, b) in &raw.edges {
            if !(a < b) {
                return Err(Error::validation("shape edges must satisfy a < b"));
            }
        }
        Ok(LimitShape {
            times: raw.times,
            densities,
            velocities: raw.velocities,
            edges: raw.edges,
            edge_coeffs: raw.edge_coeffs,
            form: raw.form,
            diagnostics: raw.diagnostics,
            characteristic: raw.characteristic,
            g_grids: Vec::new(),
        }
        .finalize())
    }
}

fn padded_support(d: &GridDensity) -> (f64, f64) {
    let (lo, hi) = d.support();
    let pad = WINDOW_PAD_FRACTION * (hi - lo);
    (lo - pad, hi + pad)
}

fn interp_clamped(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    let k = grid.partition_point(|&g| g <= x) - 1;
    let k = k.min(n - 2);
    let theta = (x - grid[k]) / (grid[k + 1] - grid[k]);
    values[k] * (1.0 - theta) + values[k + 1] * theta
}

// ---------------------------------------------------------------------------
// Watermelon closed form
// ---------------------------------------------------------------------------

/// Closed-form shape of the confluent bridge pinned at 0 on both ends: at
/// time t the density is the semicircle of radius 2 sqrt(t(1-t)).
pub fn watermelon_shape(time_grid: &[f64]) -> Result<LimitShape> {
    watermelon_shape_between(0.0, 0.0, time_grid, crate::measures::DEFAULT_GRID_POINTS)
}

/// Point-to-point generalization: the profile translates affinely from
/// `start` to `end` while the width follows the confluent law.
pub fn watermelon_shape_between(
    start: f64,
    end: f64,
    time_grid: &[f64],
    grid_points: usize,
) -> Result<LimitShape> {
    let mut shape = watermelon_build(start, end, time_grid, grid_points)?;
    shape.diagnostics.continuity_residual = continuity_residual_watermelon(&shape);
    Ok(shape)
}

fn watermelon_build(
    start: f64,
    end: f64,
    time_grid: &[f64],
    grid_points: usize,
) -> Result<LimitShape> {
    if time_grid.is_empty() {
        return Err(Error::validation("empty time grid"));
    }
    if time_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("time grid must be strictly increasing"));
    }
    if !(start.is_finite() && end.is_finite()) {
        return Err(Error::validation("endpoints must be finite"));
    }
    let mut densities = Vec::with_capacity(time_grid.len());
    let mut velocities = Vec::with_capacity(time_grid.len());
    let mut edges = Vec::with_capacity(time_grid.len());
    let mut coeffs = Vec::with_capacity(time_grid.len());
    for &t in time_grid {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::domain(format!(
                "watermelon profile degenerates at t = {t}; need t strictly inside (0, 1)"
            )));
        }
        let sigma2 = t * (1.0 - t);
        let sigma = sigma2.sqrt();
        let center = (1.0 - t) * start + t * end;
        let radius = 2.0 * sigma;
        // Grid over the padded window so the drift continuation is cached too.
        let pad = WINDOW_PAD_FRACTION * 2.0 * radius;
        let (wlo, whi) = (center - radius - pad, center + radius + pad);
        let m = grid_points.max(8);
        let grid: Vec<f64> = (0..m)
            .map(|k| wlo + (whi - wlo) * k as f64 / (m - 1) as f64)
            .collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let d = radius * radius - (x - center) * (x - center);
                if d > 0.0 {
                    d.sqrt() / (2.0 * std::f64::consts::PI * sigma2)
                } else {
                    0.0
                }
            })
            .collect();
        let u: Vec<f64> = grid
            .iter()
            .map(|&x| (end - start) + (x - center) * (1.0 - 2.0 * t) / (2.0 * sigma2))
            .collect();
        densities.push(GridDensity::new_normalized(grid, values)?);
        velocities.push(u);
        edges.push((center - radius, center + radius));
        let s = sigma2.powf(-0.75);
        coeffs.push((s, s));
    }
    Ok(LimitShape {
        times: time_grid.to_vec(),
        densities,
        velocities,
        edges,
        edge_coeffs: coeffs,
        form: ShapeForm::Watermelon { start, end },
        diagnostics: ShapeDiagnostics::default(),
        characteristic: None,
        g_grids: Vec::new(),
    }
    .finalize())
}

/// Finite-difference continuity residual of the closed form, as a sanity
/// figure reported in the diagnostics.
fn continuity_residual_watermelon(shape: &LimitShape) -> f64 {
    let (start, end) = match shape.form {
        ShapeForm::Watermelon { start, end } => (start, end),
        ShapeForm::Numeric => return f64::NAN,
    };
    let delta = 1e-4;
    let mut worst_mean = 0.0f64;
    for &t in &shape.times {
        if t - delta <= 0.0 || t + delta >= 1.0 {
            continue;
        }
        let probe = |tt: f64, points: usize| watermelon_build(start, end, &[tt], points).unwrap();
        let lo = probe(t - delta, 512);
        let hi = probe(t + delta, 512);
        let mid = probe(t, 512);
        let grid = mid.densities[0].grid().to_vec();
        let mut acc = 0.0;
        let mut count = 0usize;
        let max_rho = mid.densities[0].max_value();
        for k in 1..grid.len() - 1 {
            let x = grid[k];
            let rho = mid.densities[0].value_at(x);
            if rho < 0.05 * max_rho {
                continue;
            }
            let drho_dt =
                (hi.densities[0].value_at(x) - lo.densities[0].value_at(x)) / (2.0 * delta);
            let h = grid[k + 1] - grid[k - 1];
            let flux_hi = mid.densities[0].value_at(grid[k + 1])
                * interp_clamped(&grid, &mid.velocities[0], grid[k + 1]);
            let flux_lo = mid.densities[0].value_at(grid[k - 1])
                * interp_clamped(&grid, &mid.velocities[0], grid[k - 1]);
            acc += (drho_dt + (flux_hi - flux_lo) / h).abs();
            count += 1;
        }
        if count > 0 {
            worst_mean = worst_mean.max(acc / count as f64);
        }
    }
    worst_mean
}

// ---------------------------------------------------------------------------
// Edge coefficient fit
// ---------------------------------------------------------------------------

/// Fits the square-root edge model ρ ≈ s sqrt([x - a]_+)/π by least squares
/// on ρ² over the window where ρ ≤ 0.2 · max ρ.
///
/// ρ² is fit with a quadratic so the O(|x-a|^{3/2}) correction in ρ does not
/// bias the slope; (edge, s) come from the root and the slope at the root.
pub fn edge_coefficient(density: &GridDensity, side: Side) -> Result<EdgeFit> {
    let grid = density.grid();
    let values = density.values();
    let peak = density.max_value();
    if peak <= 0.0 {
        return Err(Error::Fit("density is identically zero".into()));
    }
    let (lo, hi) = density.support();

    // Collect the contiguous window from the support end inward.
    let mut xs = Vec::new();
    let mut q = Vec::new();
    // Zero-valued nodes are the clipped region outside the true edge; they
    // do not lie on the ρ² parabola and would bias the fit. The band widens
    // past the design fraction only when the grid under-resolves it.
    let mut frac = EDGE_FIT_PEAK_FRACTION;
    loop {
        let threshold = frac * peak;
        xs.clear();
        q.clear();
        match side {
            Side::Left => {
                for k in 0..grid.len() {
                    if grid[k] < lo || values[k] == 0.0 {
                        continue;
                    }
                    if values[k] > threshold {
                        break;
                    }
                    xs.push(grid[k]);
                    q.push(values[k] * values[k]);
                }
            }
            Side::Right => {
                for k in (0..grid.len()).rev() {
                    if grid[k] > hi || values[k] == 0.0 {
                        continue;
                    }
                    if values[k] > threshold {
                        break;
                    }
                    xs.push(grid[k]);
                    q.push(values[k] * values[k]);
                }
                xs.reverse();
                q.reverse();
            }
        }
        if xs.len() >= 8 || frac >= 0.35 {
            break;
        }
        frac += 0.05;
    }
    if xs.len() < 6 {
        if std::env::var_os("NIBB_SOLVER_TRACE").is_some() {
            eprintln!(
                "edge fit {side:?}: support ({lo:.4}, {hi:.4}), peak {peak:.4}, \
                 collected only {} band points",
                xs.len()
            );
        }
        return Err(Error::Fit(format!(
            "no square-root edge on the {side:?} side: density does not vanish at the support end"
        )));
    }
    // Centered, scaled quadratic least squares on rho^2.
    let x0 = xs[(xs.len() - 1) / 2];
    let scale = (xs[xs.len() - 1] - xs[0]).max(1e-300);
    let t: Vec<f64> = xs.iter().map(|&x| (x - x0) / scale).collect();
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (tk, qk) in t.iter().zip(&q) {
        let basis = [1.0, *tk, tk * tk];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * qk;
        }
    }
    let coeff = solve3(m, rhs).ok_or_else(|| Error::Fit("degenerate edge-fit system".into()))?;

    // Root of c0 + c1 t + c2 t^2 nearest the support end.
    let end_t = match side {
        Side::Left => (lo - x0) / scale,
        Side::Right => (hi - x0) / scale,
    };
    let root_t = quadratic_root_near(coeff, end_t)
        .ok_or_else(|| Error::Fit("edge fit has no real root near the support end".into()))?;
    let slope_t = coeff[1] + 2.0 * coeff[2] * root_t;
    let slope = slope_t / scale; // d(rho^2)/dx at the root
    let sign = match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    if sign * slope <= 0.0 {
        return Err(Error::Fit("edge fit slope has the wrong sign".into()));
    }
    let edge = x0 + root_t * scale;
    let s = std::f64::consts::PI * (sign * slope).sqrt();

    // Residual relative to the fitted scale.
    let fitted_scale = q.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut rss = 0.0;
    for (tk, qk) in t.iter().zip(&q) {
        let fit = coeff[0] + coeff[1] * tk + coeff[2] * tk * tk;
        rss += (fit - qk) * (fit - qk);
    }
    let residual = (rss / q.len() as f64).sqrt() / fitted_scale;
    if residual > 0.1 {
        return Err(Error::Fit(format!(
            "edge fit residual {residual:.3} exceeds 10% of the fitted scale"
        )));
    }
    // The root must sit near the support end, not deep inside the bulk.
    let window_width = (xs[xs.len() - 1] - xs[0]).abs();
    if (edge - match side {
        Side::Left => lo,
        Side::Right => hi,
    })
    .abs()
        > 2.0 * window_width + 1e-12
    {
        return Err(Error::Fit("fitted edge far from the support end".into()));
    }
    Ok(EdgeFit { edge, s, residual })
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for k in 0..3 {
        let mut p = k;
        for r in k + 1..3 {
            if m[r][k].abs() > m[p][k].abs() {
                p = r;
            }
        }
        if m[p][k].abs() < 1e-300 {
            return None;
        }
        m.swap(k, p);
        b.swap(k, p);
        for r in k + 1..3 {
            let f = m[r][k] / m[k][k];
            for c in k..3 {
                m[r][c] -= f * m[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let mut acc = b[k];
        for c in k + 1..3 {
            acc -= m[k][c] * x[c];
        }
        x[k] = acc / m[k][k];
    }
    Some(x)
}

fn quadratic_root_near(c: [f64; 3], near: f64) -> Option<f64> {
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    if c2.abs() < 1e-12 * c1.abs().max(1e-300) {
        if c1.abs() < 1e-300 {
            return None;
        }
        return Some(-c0 / c1);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let r1 = (-c1 + sq) / (2.0 * c2);
    let r2 = (-c1 - sq) / (2.0 * c2);
    Some(if (r1 - near).abs() < (r2 - near).abs() { r1 } else { r2 })
}

// ---------------------------------------------------------------------------
// Characteristic solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Wasserstein-1 mismatch tolerance of the transported time-1 density.
    pub tol: f64,
    pub max_iter: usize,
    /// Output grid resolution per slice.
    pub grid_points: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-2,
            max_iter: 500,
            grid_points: 2048,
        }
    }
}

/// Damping of the fixed-point update.
const DAMPING: f64 = 0.5;
/// Off-axis regularization for the initial guess.
const INIT_EPS: f64 = 1e-3;
/// Targets per slice during fixed-point iteration.
const ITER_TARGETS: usize = 448;
/// Chebyshev modes kept when smoothing the drift field between updates.
const SMOOTH_DEGREE: usize = 16;

/// Solves the limit shape for boundary densities (μ_A, μ_B) on the times in
/// `time_grid` (within [0, 1]). Point-mass boundary data routes to the
/// closed-form watermelon profile (with edges refit from the grids).
pub fn solve_characteristics(
    mu_a: &Measure1D,
    mu_b: &Measure1D,
    time_grid: &[f64],
    opts: &SolveOptions,
) -> Result<LimitShape> {
    if time_grid.is_empty() {
        return Err(Error::validation("empty time grid"));
    }
    if time_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("time grid must be strictly increasing"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }

    match (point_location(mu_a), point_location(mu_b)) {
        (Some(a), Some(b)) => {
            // The closed form degenerates at the endpoints, and its drift
            // covers all of [0, 1) regardless of the stored slices; keep
            // interior slice times only.
            let mut interior: Vec<f64> = time_grid
                .iter()
                .cloned()
                .filter(|&t| t > 0.0 && t < 1.0)
                .collect();
            if interior.is_empty() {
                interior.push(0.5);
            }
            let mut shape = watermelon_shape_between(a, b, &interior, opts.grid_points.max(512))?;
            refit_edges(&mut shape)?;
            return Ok(shape);
        }
        (Some(_), None) | (None, Some(_)) => {
            return Err(Error::UnsupportedTopology(
                "mixed point/density boundary data is not supported; \
                 discretize the point mass or use the confluent sampler directly"
                    .into(),
            ))
        }
        (None, None) => {}
    }

    let da = require_density(mu_a)?;
    let db = require_density(mu_b)?;
    validate_single_cut(da, "initial")?;
    validate_single_cut(db, "terminal")?;
    if time_grid[0] < 0.0 || *time_grid.last().unwrap() > 1.0 {
        return Err(Error::validation("time grid must lie within [0, 1]"));
    }

    CharSolver::new(da, db, opts)?.run(time_grid)
}

fn point_location(m: &Measure1D) -> Option<f64> {
    match m {
        Measure1D::Atomic(a) => {
            let atoms = a.atoms();
            let first = atoms[0];
            if atoms.iter().all(|&x| (x - first).abs() < 1e-12) {
                Some(first)
            } else {
                None
            }
        }
        Measure1D::Density(d) => {
            let (lo, hi) = d.support();
            if hi - lo < 1e-9 {
                Some(0.5 * (lo + hi))
            } else {
                None
            }
        }
    }
}

fn require_density(m: &Measure1D) -> Result<&GridDensity> {
    match m {
        Measure1D::Density(d) => Ok(d),
        Measure1D::Atomic(_) => Err(Error::UnsupportedTopology(
            "spread atomic boundary data is not supported by the characteristic solver; \
             provide a density"
                .into(),
        )),
    }
}

fn validate_single_cut(d: &GridDensity, which: &str) -> Result<()> {
    let max = d.max_value();
    let values = d.values();
    let first = values.iter().position(|&v| v > 1e-3 * max).unwrap_or(0);
    let last = values.iter().rposition(|&v| v > 1e-3 * max).unwrap_or(0);
    let mut dip_run = 0usize;
    for &v in &values[first..=last] {
        if v < 1e-4 * max {
            dip_run += 1;
            if dip_run >= 3 {
                return Err(Error::UnsupportedTopology(format!(
                    "{which} density has disconnected support"
                )));
            }
        } else {
            dip_run = 0;
        }
    }
    Ok(())
}

fn refit_edges(shape: &mut LimitShape) -> Result<()> {
    for k in 0..shape.times.len() {
        let left = edge_coefficient(&shape.densities[k], Side::Left)?;
        let right = edge_coefficient(&shape.densities[k], Side::Right)?;
        shape.edges[k] = (left.edge, right.edge);
        shape.edge_coeffs[k] = (left.s, right.s);
    }
    Ok(())
}

/// Density, velocity, edges and edge coefficients of one assembled slice.
type PackagedSlice = (GridDensity, Vec<f64>, (f64, f64), (f64, f64));

/// One direction of the transport problem: initial density plus cached
/// Hilbert data on targets and Chebyshev nodes.
struct DirectionData {
    /// Full-resolution initial density.
    full: GridDensity,
    /// Field resolution used during fixed-point iteration. The slope field
    /// must evaluate boundary values and off-axis transforms from the same
    /// density, otherwise Newton cycles at the resolution mismatch.
    iter_density: GridDensity,
    /// Higher-resolution field for the final assembly pass.
    fine_density: GridDensity,
}

struct CharSolver {
    window: (f64, f64),
    targets: Vec<f64>,
    fwd: DirectionData,
    bwd: DirectionData,
    opts: SolveOptions,
}

/// Complex slope field f_0(ζ) = m_μ(ζ) + P(ζ) with P the drift polynomial on
/// Chebyshev nodes. Both the on-axis boundary values and the off-axis
/// Stieltjes transform come from the same density.
struct SlopeField<'s> {
    solver: &'s CharSolver,
    density: &'s GridDensity,
    g_coeffs: Vec<f64>,
}

impl CharSolver {
    fn new(da: &GridDensity, db: &GridDensity, opts: &SolveOptions) -> Result<CharSolver> {
        let (la, ha) = da.support();
        let (lb, hb) = db.support();
        let lo = la.min(lb);
        let hi = ha.max(hb);
        let w = hi - lo;
        // The early transports behave like free motion before the drift
        // locks onto the terminal data; the profile can spread a further
        // 2 sqrt(t) ≤ 2 beyond the boundary hull and must stay on-window.
        let pad = (0.25 * w).max(2.1);
        let window = (lo - pad, hi + pad);

        let m = ITER_TARGETS;
        let targets: Vec<f64> = (0..m)
            .map(|j| window.0 + (window.1 - window.0) * j as f64 / (m - 1) as f64)
            .collect();

        let build_dir = |d: &GridDensity| -> DirectionData {
            DirectionData {
                full: d.clone(),
                iter_density: coarsen(d, 512),
                fine_density: coarsen(d, 1024),
            }
        };

        let fwd = build_dir(da);
        let bwd = build_dir(db);
        Ok(CharSolver {
            window,
            targets,
            fwd,
            bwd,
            opts: opts.clone(),
        })
    }

    /// Weighted least-squares Chebyshev fit (degree SMOOTH_DEGREE) of
    /// sampled values on the solver window.
    fn cheb_fit(&self, xs: &[f64], values: &[f64], weights: &[f64]) -> Vec<f64> {
        let d = SMOOTH_DEGREE + 1;
        let (a, b) = self.window;
        let mut normal = vec![0.0f64; d * d];
        let mut rhs = vec![0.0f64; d];
        let mut basis = vec![0.0f64; d];
        for ((&x, &v), &w) in xs.iter().zip(values).zip(weights) {
            let u = (2.0 * x - (a + b)) / (b - a);
            basis[0] = 1.0;
            if d > 1 {
                basis[1] = u;
            }
            for k in 2..d {
                basis[k] = 2.0 * u * basis[k - 1] - basis[k - 2];
            }
            for i in 0..d {
                for j in 0..d {
                    normal[i * d + j] += w * basis[i] * basis[j];
                }
                rhs[i] += w * basis[i] * v;
            }
        }
        // Tiny ridge keeps the normal equations well posed when samples
        // cluster.
        for i in 0..d {
            normal[i * d + i] += 1e-10;
        }
        crate::linalg::Lu::factor(&normal, d).solve(&rhs)
    }

    /// Truncated-series evaluation P(z), P'(z) on the solver window.
    fn cheb_eval(&self, coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
        let (a, b) = self.window;
        let w = (2.0 * z - (a + b)) / (b - a);
        let dw = 2.0 / (b - a);
        let mut t_prev = Complex64::new(1.0, 0.0); // T_0
        let mut t_cur = w; // T_1
        let mut u_prev = Complex64::new(1.0, 0.0); // U_0
        let mut u_cur = 2.0 * w; // U_1
        let mut p = Complex64::new(coeffs[0], 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        if coeffs.len() > 1 {
            p += coeffs[1] * t_cur;
            dp += coeffs[1] * u_prev;
        }
        for (k, &c) in coeffs.iter().enumerate().skip(2) {
            let t_next = 2.0 * w * t_cur - t_prev;
            p += c * t_next;
            dp += c * (k as f64) * u_cur;
            t_prev = t_cur;
            t_cur = t_next;
            let u_next = 2.0 * w * u_cur - u_prev;
            u_prev = u_cur;
            u_cur = u_next;
        }
        (p, dp * dw)
    }

    /// Sample layout for drift updates: dense points over the mass-carrying
    /// region plus lightly weighted wing anchors that pin the fitted
    /// polynomial to its edge values.
    fn update_samples(&self) -> (Vec<f64>, Vec<f64>, usize) {
        let (lo_a, hi_a) = self.fwd.full.support();
        let pad = 0.05 * (hi_a - lo_a);
        let (lo, hi) = (lo_a - pad, hi_a + pad);
        let mut xs = Vec::new();
        let mut weights = Vec::new();
        let interior = 120usize;
        for k in 0..interior {
            xs.push(lo + (hi - lo) * k as f64 / (interior - 1) as f64);
            weights.push(1.0);
        }
        let wings = 20usize;
        for k in 0..wings {
            xs.push(self.window.0 + (lo - self.window.0) * k as f64 / wings as f64);
            weights.push(0.3);
        }
        for k in 1..=wings {
            xs.push(hi + (self.window.1 - hi) * k as f64 / wings as f64);
            weights.push(0.3);
        }
        (xs, weights, interior)
    }

    fn run(self, time_grid: &[f64]) -> Result<LimitShape> {
        // Initial drift guess from the Stieltjes mismatch of the two ends,
        // fitted over the whole window.
        let eps = Complex64::new(0.0, INIT_EPS);
        let (xs, weights, interior) = self.update_samples();
        let mut init_vals = Vec::with_capacity(xs.len());
        for &x in &xs {
            let z = Complex64::new(x, 0.0) + eps;
            let ma = self.fwd.full.stieltjes(z)?;
            let mb = self.bwd.full.stieltjes(z)?;
            init_vals.push((mb - ma).re);
        }
        let mut g_coeffs = self.cheb_fit(&xs, &init_vals, &weights);

        // Quantile shooting: characteristics preserve mass order, so the
        // point carrying quantile q lands at the transported q-quantile. The
        // drift correction is the displacement to the target's q-quantile
        // (the landing responds to an added constant velocity with unit
        // Jacobian), fitted in coefficient space and applied with damping.
        let mut iterations = 0;
        let mut mismatch = f64::INFINITY;
        let mut best_mismatch = f64::INFINITY;
        let mut best_coeffs = g_coeffs.clone();
        let mut since_best = 0usize;
        let mut fwd_cache: Option<Vec<Complex64>> = None;
        let trust = 0.1 * (self.window.1 - self.window.0);
        while iterations < self.opts.max_iter {
            iterations += 1;
            let mut fwd_slice = self.transport_to(&self.fwd, &g_coeffs, 1.0, fwd_cache.as_deref())?;
            // The Stieltjes-difference initial guess is a heuristic; when its
            // edge derivatives fold the characteristics (visible as lost
            // mass), restart from a plain diffusive drift.
            if iterations == 1 && raw_slice_mass(&self.targets, &fwd_slice) < 0.9 {
                for g in g_coeffs.iter_mut() {
                    *g = 0.0;
                }
                fwd_slice = self.transport_to(&self.fwd, &g_coeffs, 1.0, None)?;
            }
            let rho1 = self.slice_density(&fwd_slice)?;
            mismatch = crate::measures::wasserstein1(
                &Measure1D::Density(rho1.clone()),
                &Measure1D::Density(self.bwd.full.clone()),
            );
            if std::env::var_os("NIBB_SOLVER_TRACE").is_some() {
                let gmax = g_coeffs.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
                let (lo, hi) = rho1.support();
                let raw_mass: f64 = {
                    let mut acc = 0.0;
                    for k in 1..self.targets.len() {
                        let r0 = (-fwd_slice[k - 1].im / std::f64::consts::PI).max(0.0);
                        let r1 = (-fwd_slice[k].im / std::f64::consts::PI).max(0.0);
                        acc += 0.5 * (r0 + r1) * (self.targets[k] - self.targets[k - 1]);
                    }
                    acc
                };
                eprintln!(
                    "solver iter {iterations}: mismatch {mismatch:.4e}, |coeff| {gmax:.3}, \
                     raw mass {raw_mass:.4}, supp [{lo:.3}, {hi:.3}]"
                );
            }
            if mismatch < best_mismatch {
                best_mismatch = mismatch;
                best_coeffs.copy_from_slice(&g_coeffs);
                since_best = 0;
            } else {
                since_best += 1;
            }
            if mismatch < self.opts.tol {
                break;
            }
            // The damped iteration reaches a representation-limited floor;
            // once it stops improving there is nothing left to gain.
            if since_best > 15 {
                break;
            }
            fwd_cache = Some(fwd_slice);
            // The constant drift mode moves the transported mean with unit
            // Jacobian; correcting it separately keeps the first moment
            // exact while the quantile fit handles the shape.
            let mean_shift = self.bwd.full.mean() - rho1.mean();
            let mut delta = Vec::with_capacity(xs.len());
            for (k, &x) in xs.iter().enumerate() {
                if k < interior {
                    let q = self.fwd.full.cdf_at(x).clamp(5e-4, 1.0 - 5e-4);
                    let landed = rho1.quantile_at(q);
                    let wanted = self.bwd.full.quantile_at(q);
                    delta.push((wanted - landed - mean_shift).clamp(-trust, trust));
                } else {
                    // Wing anchors repeat the nearest interior correction.
                    let edge_val = if x < xs[0] { delta[0] } else { delta[interior - 1] };
                    delta.push(edge_val);
                }
            }
            let delta_coeffs = self.cheb_fit(&xs, &delta, &weights);
            for (g, d) in g_coeffs.iter_mut().zip(&delta_coeffs) {
                *g += DAMPING * d;
            }
            g_coeffs[0] += DAMPING * mean_shift;
        }
        if best_mismatch < mismatch {
            mismatch = best_mismatch;
            g_coeffs = best_coeffs;
        }
        if mismatch >= self.opts.tol {
            return Err(Error::Solver {
                iterations,
                mismatch,
                tol: self.opts.tol,
            });
        }

        self.assemble(time_grid, &g_coeffs, iterations, mismatch)
    }

    /// Transports the initial slice of `dir` to time t by implicit
    /// characteristic inversion at the iteration targets. A warm slice from
    /// a previous iteration (same t, slightly different drift) replaces the
    /// cold continuation march.
    fn transport_to(
        &self,
        dir: &DirectionData,
        g_coeffs: &[f64],
        t: f64,
        warm: Option<&[Complex64]>,
    ) -> Result<Vec<Complex64>> {
        let field = SlopeField {
            solver: self,
            density: &dir.iter_density,
            g_coeffs: g_coeffs.to_vec(),
        };
        if let Some(prev) = warm {
            let mut vs = prev.to_vec();
            if self
                .advance_slice(&field, &self.targets, &mut vs, t, true)
                .is_ok()
            {
                return Ok(vs);
            }
            // Warm start failed to track; fall back to the cold march.
        }
        let mut vs = self.seed_slice(&field, &self.targets)?;
        for &tt in [0.25, 0.5, 0.75].iter().filter(|&&tt| tt < t - 1e-12) {
            self.advance_slice(&field, &self.targets, &mut vs, tt, false)?;
        }
        self.advance_slice(&field, &self.targets, &mut vs, t, false)?;
        Ok(vs)
    }

    /// Boundary values f_0(x + i0) at the targets.
    fn seed_slice(&self, field: &SlopeField<'_>, targets: &[f64]) -> Result<Vec<Complex64>> {
        targets
            .iter()
            .map(|&x| Ok(field.eval(Complex64::new(x, 0.0))?.0))
            .collect()
    }

    fn advance_slice(
        &self,
        field: &SlopeField<'_>,
        targets: &[f64],
        vs: &mut [Complex64],
        t: f64,
        strict: bool,
    ) -> Result<()> {
        // Each target tries its own warm value first (continuation in t),
        // then the freshly solved neighbor (continuation in x through the
        // support edge), then the neighbor's real projection (the exterior
        // branch).
        let n = vs.len();
        let center = (0..n)
            .min_by(|&a, &b| {
                vs[a]
                    .im
                    .partial_cmp(&vs[b].im)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(n / 2);
        let mut stubborn = Vec::new();

        // A warm seed that converges to a (near-)real root gets a second
        // opinion from the inward neighbor: when the support sweeps over a
        // previously exterior target, only the neighbor seed finds the
        // physical complex branch.
        let solve_at = |j: usize, warm: Complex64, neighbor: Option<Complex64>| -> Option<Complex64> {
            let first = newton_slope(field, targets[j], t, warm);
            if let Some(w) = first {
                if w.im < -1e-4 {
                    return Some(w);
                }
                // Near-real root next to a complex neighbor: the support may
                // have swept over this target, so check the complex branch.
                if let Some(nb) = neighbor {
                    if nb.im < -1e-3 && (nb - warm).norm() > 1e-12 {
                        if let Some(sol) = newton_slope(field, targets[j], t, nb) {
                            if sol.im < w.im - 1e-9 {
                                return Some(sol);
                            }
                        }
                    }
                }
                return Some(w);
            }
            let nb = neighbor?;
            if let Some(sol) = newton_slope(field, targets[j], t, nb) {
                return Some(sol);
            }
            newton_slope(field, targets[j], t, Complex64::new(nb.re, 0.0))
        };

        match solve_at(center, vs[center], None) {
            Some(sol) => vs[center] = sol,
            None => stubborn.push(center),
        }
        // Failed targets fall back to the neighbor's real projection: near
        // the support edge (where failures cluster) the exterior branch is
        // real, and a real fill cannot fake density.
        for j in center + 1..n {
            let neighbor = vs[j - 1];
            match solve_at(j, vs[j], Some(neighbor)) {
                Some(sol) => vs[j] = sol,
                None => {
                    stubborn.push(j);
                    vs[j] = Complex64::new(neighbor.re, 0.0);
                }
            }
        }
        for j in (0..center).rev() {
            let neighbor = vs[j + 1];
            match solve_at(j, vs[j], Some(neighbor)) {
                Some(sol) => vs[j] = sol,
                None => {
                    stubborn.push(j);
                    vs[j] = Complex64::new(neighbor.re, 0.0);
                }
            }
        }

        // Trim ghost mass beyond the contiguous support around the center:
        // exterior slopes are real.
        let peak = vs.iter().map(|v| -v.im).fold(0.0f64, f64::max).max(1e-300);
        let threshold = 1e-4 * peak;
        let mut hi_end = n;
        let mut run = 0;
        for j in center + 1..n {
            if -vs[j].im < threshold {
                run += 1;
                if run >= 3 {
                    hi_end = j + 1 - run;
                    break;
                }
            } else {
                run = 0;
            }
        }
        for v in vs.iter_mut().take(n).skip(hi_end.max(center + 1)) {
            *v = Complex64::new(v.re, 0.0);
        }
        let mut lo_end = 0usize;
        run = 0;
        for j in (0..center).rev() {
            if -vs[j].im < threshold {
                run += 1;
                if run >= 3 {
                    lo_end = j + run;
                    break;
                }
            } else {
                run = 0;
            }
        }
        for v in vs.iter_mut().take(lo_end.min(center)) {
            *v = Complex64::new(v.re, 0.0);
        }

        if !stubborn.is_empty() && std::env::var_os("NIBB_SOLVER_TRACE").is_some() {
            stubborn.sort_unstable();
            eprintln!(
                "advance t={t}: {} stubborn of {} targets: {:?}",
                stubborn.len(),
                n,
                &stubborn[..stubborn.len().min(20)]
            );
        }
        // A warm continuation that loses many targets must be redone from a
        // cold march; within a cold march only failures where the slice
        // carries mass corrupt the transported density (far-exterior targets
        // hold interpolated real slopes and are harmless).
        if strict && stubborn.len() * 10 > n {
            return Err(Error::Solver {
                iterations: 0,
                mismatch: stubborn.len() as f64 / n as f64,
                tol: 0.1,
            });
        }
        let support_lo = (0..n).find(|&j| -vs[j].im >= 1e-3 * peak).unwrap_or(0);
        let support_hi = (0..n).rfind(|&j| -vs[j].im >= 1e-3 * peak).unwrap_or(n - 1);
        let critical = stubborn
            .iter()
            .filter(|&&j| j + 2 >= support_lo && j <= support_hi + 2)
            .count();
        let span = support_hi.saturating_sub(support_lo) + 1;
        if critical * 20 > span {
            return Err(Error::Solver {
                iterations: 0,
                mismatch: critical as f64 / span as f64,
                tol: 0.05,
            });
        }
        Ok(())
    }

    /// Normalized density from a transported slice. Values below a dust
    /// threshold are flushed to zero so stray Newton noise cannot masquerade
    /// as support.
    fn slice_density(&self, vs: &[Complex64]) -> Result<GridDensity> {
        GridDensity::new_normalized(self.targets.clone(), flush_dust(vs))
    }

    fn assemble(
        &self,
        time_grid: &[f64],
        g_coeffs: &[f64],
        iterations: usize,
        mismatch: f64,
    ) -> Result<LimitShape> {
        let m = self.opts.grid_points.max(256);
        let fine_targets: Vec<f64> = (0..m)
            .map(|j| self.window.0 + (self.window.1 - self.window.0) * j as f64 / (m - 1) as f64)
            .collect();
        let field = SlopeField {
            solver: self,
            density: &self.fwd.fine_density,
            g_coeffs: g_coeffs.to_vec(),
        };
        let mut vs = self.seed_slice(&field, &fine_targets)?;

        let mut times = Vec::new();
        let mut densities = Vec::new();
        let mut velocities = Vec::new();
        let mut edges = Vec::new();
        let mut coeffs = Vec::new();
        let mut residual_acc: Vec<f64> = Vec::new();

        // March through the requested times plus residual probes, inserting
        // continuation midpoints so no warm jump exceeds 0.25.
        let delta = 2e-3;
        let mut requested: Vec<f64> = Vec::new();
        for &t in time_grid {
            requested.push(t);
            if t - delta > 0.0 {
                requested.push(t - delta);
            }
            if t + delta < 1.0 {
                requested.push(t + delta);
            }
        }
        requested.sort_by(|a, b| a.partial_cmp(b).unwrap());
        requested.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut stops: Vec<f64> = Vec::new();
        let mut prev = 0.0;
        for &t in &requested {
            while t - prev > 0.26 {
                prev += 0.25;
                stops.push(prev);
            }
            stops.push(t);
            prev = t;
        }
        stops.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut probe_lo: Option<Vec<f64>> = None;
        let mut pending: Option<(f64, Vec<f64>, Vec<f64>)> = None;

        for &t in &stops {
            if t > 0.0 {
                self.advance_slice(&field, &fine_targets, &mut vs, t, false)?;
            }
            let rho: Vec<f64> = vs.iter().map(|v| (-v.im / std::f64::consts::PI).max(0.0)).collect();
            let u: Vec<f64> = vs.iter().map(|v| v.re).collect();

            let requested = time_grid.iter().any(|&tr| (tr - t).abs() < 1e-12);
            let is_probe_lo = time_grid.iter().any(|&tr| (tr - delta - t).abs() < 1e-12);
            let is_probe_hi = time_grid.iter().any(|&tr| (tr + delta - t).abs() < 1e-12);

            if is_probe_lo {
                probe_lo = Some(rho.clone());
            }
            if requested {
                pending = Some((t, rho.clone(), u.clone()));
                times.push(t);
                let (density, velocity, edge, coeff) =
                    self.package_slice(&fine_targets, &rho, &u)?;
                densities.push(density);
                velocities.push(velocity);
                edges.push(edge);
                coeffs.push(coeff);
            }
            if is_probe_hi {
                if let (Some(lo_rho), Some((_, mid_rho, mid_u))) = (&probe_lo, &pending) {
                    residual_acc.push(continuity_residual_fd(
                        &fine_targets,
                        lo_rho,
                        mid_rho,
                        mid_u,
                        &rho,
                        delta,
                    ));
                }
                probe_lo = None;
                pending = None;
            }
        }

        let continuity_residual = if residual_acc.is_empty() {
            f64::NAN
        } else {
            residual_acc.iter().cloned().fold(0.0, f64::max)
        };
        if continuity_residual.is_finite() && continuity_residual > 0.05 {
            return Err(Error::Solver {
                iterations,
                mismatch: continuity_residual,
                tol: 0.05,
            });
        }

        // Characteristic field on the initial slice.
        let (la, ha) = self.fwd.full.support();
        let mut base_points = Vec::new();
        let mut slopes = Vec::new();
        for j in 0..self.targets.len() {
            let x = self.targets[j];
            if x < la || x > ha {
                continue;
            }
            let f0 = field.eval(Complex64::new(x, 0.0))?.0;
            base_points.push([x, 0.0]);
            slopes.push([f0.re, f0.im]);
        }

        Ok(LimitShape {
            times,
            densities,
            velocities,
            edges,
            edge_coeffs: coeffs,
            form: ShapeForm::Numeric,
            diagnostics: ShapeDiagnostics {
                iterations,
                final_mismatch: mismatch,
                tolerance: self.opts.tol,
                continuity_residual,
            },
            characteristic: Some(CharacteristicField {
                base_points,
                slopes,
            }),
            g_grids: Vec::new(),
        }
        .finalize())
    }

    /// Builds the stored grid representation of one slice.
    fn package_slice(
        &self,
        targets: &[f64],
        rho: &[f64],
        u: &[f64],
    ) -> Result<PackagedSlice> {
        let peak = rho.iter().cloned().fold(0.0f64, f64::max);
        let rho: Vec<f64> = rho
            .iter()
            .map(|&v| if v < 1e-6 * peak { 0.0 } else { v })
            .collect();
        let rho = &rho[..];
        let max = rho.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::Solver {
                iterations: 0,
                mismatch: f64::INFINITY,
                tol: self.opts.tol,
            });
        }
        // Support splitting check.
        let first = rho.iter().position(|&v| v > 1e-3 * max).unwrap();
        let last = rho.iter().rposition(|&v| v > 1e-3 * max).unwrap();
        let mut dip = 0usize;
        for &v in &rho[first..=last] {
            if v < 1e-4 * max {
                dip += 1;
                if dip >= 5 {
                    return Err(Error::UnsupportedTopology(
                        "transported density split into multiple intervals".into(),
                    ));
                }
            } else {
                dip = 0;
            }
        }
        let density = GridDensity::new_normalized(targets.to_vec(), rho.to_vec())?;
        let left = edge_coefficient(&density, Side::Left)?;
        let right = edge_coefficient(&density, Side::Right)?;
        Ok((
            density,
            u.to_vec(),
            (left.edge, right.edge),
            (left.s, right.s),
        ))
    }
}

impl SlopeField<'_> {
    /// f_0 and f_0' at complex ζ (upper half plane or real axis).
    fn eval(&self, zeta: Complex64) -> Result<(Complex64, Complex64)> {
        let (p, dp) = self.solver.cheb_eval(&self.g_coeffs, zeta);
        if zeta.im.abs() < 1e-11 {
            // Boundary value from above; analytically the limit of the
            // off-axis branch for the same piecewise-linear density.
            let x = zeta.re;
            let h = self.density.hilbert_unchecked(x);
            let rho = self.density.value_at(x);
            let m = Complex64::new(h, -std::f64::consts::PI * rho);
            let (_, dm) = self.m_and_prime(Complex64::new(x, 1e-7));
            return Ok((m + p, dm + dp));
        }
        let (m, dm) = self.m_and_prime(zeta);
        Ok((m + p, dm + dp))
    }

    /// Stieltjes transform and its derivative in one cell pass; the log is
    /// the expensive part and is shared.
    fn m_and_prime(&self, z: Complex64) -> (Complex64, Complex64) {
        let grid = self.density.grid();
        let values = self.density.values();
        let mut m = Complex64::new(0.0, 0.0);
        let mut dm = Complex64::new(0.0, 0.0);
        for k in 0..grid.len() - 1 {
            let (y0, y1) = (grid[k], grid[k + 1]);
            let (v0, v1) = (values[k], values[k + 1]);
            if v0 == 0.0 && v1 == 0.0 {
                continue;
            }
            let h = y1 - y0;
            let beta = (v1 - v0) / h;
            let r0 = (z - y0).inv();
            let r1 = (z - y1).inv();
            let log = ((z - y0) * r1).ln();
            let a = Complex64::new(v0, 0.0) + beta * (z - y0);
            m += a * log - beta * h;
            dm += beta * log + a * (r0 - r1);
        }
        (m, dm)
    }
}

/// Solves v = f_0(ξ - t v) by damped Newton; keeps the physical branch
/// Im v ≤ 0.
fn newton_slope(field: &SlopeField<'_>, xi: f64, t: f64, v0: Complex64) -> Option<Complex64> {
    let mut v = v0;
    if v.im > 0.0 {
        v = Complex64::new(v.re, 0.0);
    }
    let mut best_res = f64::INFINITY;
    let mut stale = 0usize;
    for _ in 0..30 {
        let zeta = Complex64::new(xi, 0.0) - t * v;
        // The preimage must stay in the closed upper half plane.
        let zeta = if zeta.im < 0.0 {
            Complex64::new(zeta.re, 0.0)
        } else {
            zeta
        };
        let (f, df) = field.eval(zeta).ok()?;
        let r = v - f;
        let res = r.norm();
        if res < 1e-11 * (1.0 + v.norm()) {
            return Some(v);
        }
        let denom = Complex64::new(1.0, 0.0) + t * df;
        if denom.norm() < 1e-10 {
            return None;
        }
        let mut step = r / denom;
        // Backtrack if the step does not reduce the residual.
        let mut tries = 0;
        loop {
            let cand = v - step;
            let zc = Complex64::new(xi, 0.0) - t * cand;
            let zc = if zc.im < 0.0 { Complex64::new(zc.re, 0.0) } else { zc };
            if let Ok((fc, _)) = field.eval(zc) {
                let rc = (cand - fc).norm();
                if rc < res || tries >= 4 {
                    v = cand;
                    if v.im > 1e-9 {
                        v = Complex64::new(v.re, 0.0);
                    }
                    break;
                }
            }
            step *= 0.5;
            tries += 1;
        }
        if res < 0.9 * best_res {
            best_res = res;
            stale = 0;
        } else {
            stale += 1;
            if stale >= 6 {
                break;
            }
        }
        best_res = best_res.min(res);
    }
    // Accept a slightly looser residual before declaring failure.
    if best_res < 1e-7 {
        Some(v)
    } else {
        None
    }
}

fn flush_dust(vs: &[Complex64]) -> Vec<f64> {
    let mut values: Vec<f64> = vs
        .iter()
        .map(|v| (-v.im / std::f64::consts::PI).max(0.0))
        .collect();
    let peak = values.iter().cloned().fold(0.0f64, f64::max);
    for v in &mut values {
        if *v < 1e-6 * peak {
            *v = 0.0;
        }
    }
    values
}

fn raw_slice_mass(targets: &[f64], vs: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..targets.len() {
        let r0 = (-vs[k - 1].im / std::f64::consts::PI).max(0.0);
        let r1 = (-vs[k].im / std::f64::consts::PI).max(0.0);
        acc += 0.5 * (r0 + r1) * (targets[k] - targets[k - 1]);
    }
    acc
}

fn coarsen(d: &GridDensity, cells: usize) -> GridDensity {
    let (lo, hi) = d.support();
    let m = cells.max(32);
    let grid: Vec<f64> = (0..=m)
        .map(|k| lo + (hi - lo) * k as f64 / m as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| d.value_at(x)).collect();
    GridDensity::new_normalized(grid, values).expect("coarsened density")
}

/// Mean |∂_t ρ + ∂_x(ρ u)| over bulk cells, by central differences on the
/// probe slices at t ± delta.
fn continuity_residual_fd(
    grid: &[f64],
    rho_lo: &[f64],
    rho_mid: &[f64],
    u_mid: &[f64],
    rho_hi: &[f64],
    delta: f64,
) -> f64 {
    let max = rho_mid.iter().cloned().fold(0.0, f64::max);
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in 1..grid.len() - 1 {
        if rho_mid[k] < 0.05 * max {
            continue;
        }
        let drho_dt = (rho_hi[k] - rho_lo[k]) / (2.0 * delta);
        let dflux =
            (rho_mid[k + 1] * u_mid[k + 1] - rho_mid[k - 1] * u_mid[k - 1]) / (grid[k + 1] - grid[k - 1]);
        acc += (drho_dt + dflux).abs();
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        acc / count as f64
    }
}
