//! One-dimensional probability measures and their transforms.
//!
//! Two concrete representations are used throughout: [`AtomicMeasure`] for
//! empirical particle configurations (each atom carries mass 1/n) and
//! [`GridDensity`] for absolutely continuous measures sampled on a grid with
//! piecewise-linear interpolation and trapezoidal quadrature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points for built-in densities.
pub const DEFAULT_GRID_POINTS: usize = 2048;

// ---------------------------------------------------------------------------
// Weyl chamber points
// ---------------------------------------------------------------------------

/// An ordered particle configuration.
///
/// Interior configurations are strictly increasing; boundary data may carry
/// ties and is built with [`WeylPoint::closed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylPoint {
    coords: Vec<f64>,
}

impl WeylPoint {
    /// Strictly increasing configuration (interior of the chamber).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        validate_finite(&coords)?;
        if coords.is_empty() {
            return Err(Error::validation("empty configuration"));
        }
        for w in coords.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::validation(format!(
                    "coordinates must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(WeylPoint { coords })
    }

    /// Non-decreasing configuration (closed chamber, boundary data only).
    pub fn closed(coords: Vec<f64>) -> Result<Self> {
        validate_finite(&coords)?;
        if coords.is_empty() {
            return Err(Error::validation("empty configuration"));
        }
        for w in coords.windows(2) {
            if !(w[0] <= w[1]) {
                return Err(Error::validation(format!(
                    "coordinates must be non-decreasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(WeylPoint { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_strict(&self) -> bool {
        self.coords.windows(2).all(|w| w[0] < w[1])
    }
}

fn validate_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite value in input"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Atomic measures
// ---------------------------------------------------------------------------

/// Uniform atomic measure: n atoms of mass 1/n at sorted positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<f64>,
}

impl AtomicMeasure {
    /// Builds from positions in any order; atoms are sorted.
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        validate_finite(&atoms)?;
        if atoms.is_empty() {
            return Err(Error::validation("atomic measure needs at least one atom"));
        }
        atoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(AtomicMeasure { atoms })
    }

    pub fn point(c: f64) -> Result<Self> {
        AtomicMeasure::new(vec![c])
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.atoms.len() as f64
    }

    /// Right-continuous CDF.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let count = self.atoms.partition_point(|&a| a <= x);
        count as f64 / self.atoms.len() as f64
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 {
            let inside = self.atoms.iter().any(|&a| (a - z.re).abs() < 1e-300)
                || (z.re >= self.atoms[0] && z.re <= *self.atoms.last().unwrap());
            if inside {
                return Err(Error::domain(format!(
                    "stieltjes transform undefined on the real axis inside support (z = {})",
                    z.re
                )));
            }
        }
        let sum: Complex64 = self.atoms.iter().map(|&a| (z - a).inv()).sum();
        Ok(sum / self.atoms.len() as f64)
    }

    /// One-column CSV: one atom position per line.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            match trimmed.parse::<f64>() {
                Ok(v) if v.is_finite() => atoms.push(v),
                Ok(_) => {
                    return Err(Error::validation(format!(
                        "non-finite atom on line {}",
                        idx + 1
                    )))
                }
                Err(_) if idx == 0 => continue, // header line
                Err(_) => {
                    return Err(Error::validation(format!(
                        "cannot parse atom on line {}: {trimmed:?}",
                        idx + 1
                    )))
                }
            }
        }
        AtomicMeasure::new(atoms)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for a in &self.atoms {
            out.push_str(&format!("{a}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Grid densities
// ---------------------------------------------------------------------------

/// A probability density sampled on a strictly increasing grid.
///
/// Values are interpreted by piecewise-linear interpolation, integrals by
/// trapezoidal quadrature; the trapezoid integral over the support must be 1
/// within 1e-8.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    support: (f64, f64),
    #[serde(skip)]
    cumulative: Vec<f64>,
}

pub const NORMALIZATION_TOL: f64 = 1e-8;

impl GridDensity {
    /// Validating constructor; the trapezoid integral must already be 1.
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let d = Self::build(grid, values)?;
        let total = *d.cumulative.last().unwrap();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!(
                "density not normalized: trapezoid integral {total}"
            )));
        }
        Ok(d)
    }

    /// Rescales the values so the trapezoid integral is exactly 1.
    pub fn new_normalized(grid: Vec<f64>, mut values: Vec<f64>) -> Result<Self> {
        let probe = Self::build(grid.clone(), values.clone())?;
        let total = *probe.cumulative.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::validation(format!(
                "density mass must be positive and finite, got {total}"
            )));
        }
        for v in &mut values {
            *v /= total;
        }
        Self::build(grid, values)
    }

    fn build(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_finite(&grid)?;
        validate_finite(&values)?;
        if grid.len() < 2 {
            return Err(Error::validation("grid needs at least two points"));
        }
        if grid.len() != values.len() {
            return Err(Error::validation(format!(
                "grid length {} does not match value length {}",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation("grid must be strictly increasing"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::validation("density values must be non-negative"));
        }
        let first = values.iter().position(|&v| v > 0.0);
        let last = values.iter().rposition(|&v| v > 0.0);
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::validation("density is identically zero")),
        };
        let support = (grid[first.saturating_sub(1)], grid[(last + 1).min(grid.len() - 1)]);
        let mut cumulative = Vec::with_capacity(grid.len());
        cumulative.push(0.0);
        for k in 1..grid.len() {
            let h = grid[k] - grid[k - 1];
            let inc = 0.5 * h * (values[k] + values[k - 1]);
            let prev = cumulative[k - 1];
            cumulative.push(prev + inc);
        }
        Ok(GridDensity {
            grid,
            values,
            support,
            cumulative,
        })
    }

    /// Semicircle density of the given radius centered at 0.
    pub fn semicircle(radius: f64) -> Result<Self> {
        Self::semicircle_with_points(radius, DEFAULT_GRID_POINTS)
    }

    pub fn semicircle_with_points(radius: f64, points: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::validation(format!("semicircle radius {radius}")));
        }
        if points < 3 {
            return Err(Error::validation("need at least 3 grid points"));
        }
        let n = points;
        let grid: Vec<f64> = (0..n)
            .map(|k| -radius + 2.0 * radius * k as f64 / (n - 1) as f64)
            .collect();
        let values: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let d = radius * radius - x * x;
                if d > 0.0 {
                    2.0 * d.sqrt() / (std::f64::consts::PI * radius * radius)
                } else {
                    0.0
                }
            })
            .collect();
        Self::new_normalized(grid, values)
    }

    /// Uniform density on [lo, hi].
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::uniform_with_points(lo, hi, 33)
    }

    pub fn uniform_with_points(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::validation(format!("uniform range [{lo}, {hi}]")));
        }
        let n = points.max(2);
        let grid: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect();
        let values = vec![1.0 / (hi - lo); n];
        Self::new_normalized(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn support_width(&self) -> f64 {
        self.support.1 - self.support.0
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation; 0 outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x < self.grid[0] || x > self.grid[n - 1] {
            return 0.0;
        }
        let k = cell_index(&self.grid, x);
        let h = self.grid[k + 1] - self.grid[k];
        let theta = (x - self.grid[k]) / h;
        self.values[k] * (1.0 - theta) + self.values[k + 1] * theta
    }

    /// CDF at x, exact for the piecewise-linear density.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return *self.cumulative.last().unwrap();
        }
        let k = cell_index(&self.grid, x);
        let h = self.grid[k + 1] - self.grid[k];
        let u = x - self.grid[k];
        let beta = (self.values[k + 1] - self.values[k]) / h;
        self.cumulative[k] + self.values[k] * u + 0.5 * beta * u * u
    }

    pub fn mean(&self) -> f64 {
        // Exact first moment of the piecewise-linear density.
        let mut m = 0.0;
        for k in 0..self.grid.len() - 1 {
            let (x0, x1) = (self.grid[k], self.grid[k + 1]);
            let (v0, v1) = (self.values[k], self.values[k + 1]);
            let h = x1 - x0;
            m += h * (v0 * (2.0 * x0 + x1) + v1 * (x0 + 2.0 * x1)) / 6.0;
        }
        m
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 && z.re >= self.support.0 && z.re <= self.support.1 {
            return Err(Error::domain(format!(
                "stieltjes transform undefined on the real axis inside support (z = {})",
                z.re
            )));
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..self.grid.len() - 1 {
            let (y0, y1) = (self.grid[k], self.grid[k + 1]);
            let (v0, v1) = (self.values[k], self.values[k + 1]);
            if v0 == 0.0 && v1 == 0.0 {
                continue;
            }
            let h = y1 - y0;
            let beta = (v1 - v0) / h;
            // Interpolant evaluated at z: the integrand splits as
            // A/(z-y) - beta with A = v0 + beta (z - y0).
            let a = Complex64::new(v0, 0.0) + beta * (z - y0);
            sum += a * ((z - y0) / (z - y1)).ln() - beta * h;
        }
        Ok(sum)
    }

    /// Principal-value Hilbert transform H(x) = PV ∫ ρ(y)/(x−y) dy for x
    /// strictly inside the support.
    pub fn hilbert(&self, x: f64) -> Result<f64> {
        if !(x > self.support.0 && x < self.support.1) {
            return Err(Error::domain(format!(
                "hilbert transform needs x strictly inside support ({}, {}), got {x}",
                self.support.0, self.support.1
            )));
        }
        Ok(self.hilbert_unchecked(x))
    }

    /// Hilbert transform without the interior-domain restriction. For x
    /// outside the support this is an ordinary (non-PV) integral; at support
    /// endpoints the density vanishes so the value is still finite.
    pub fn hilbert_unchecked(&self, x: f64) -> f64 {
        let (lo, hi) = self.support;
        let rho_x = self.value_at(x);
        let mut sum = 0.0;
        for k in 0..self.grid.len() - 1 {
            let (y0, y1) = (self.grid[k], self.grid[k + 1]);
            if y1 <= lo || y0 >= hi {
                continue;
            }
            let (v0, v1) = (self.values[k], self.values[k + 1]);
            let h = y1 - y0;
            let beta = (v1 - v0) / h;
            // (rho_hat(y) - rho(x))/(x - y) = c/(x - y) - beta with
            // c = rho_hat(x) - rho(x); c vanishes on the cell containing x.
            let c = v0 + beta * (x - y0) - rho_x;
            let mut term = -beta * h;
            if c != 0.0 {
                term += c * ((x - y0).abs() / (x - y1).abs()).ln();
            }
            sum += term;
        }
        if rho_x != 0.0 {
            sum += rho_x * ((x - lo).abs() / (hi - x).abs()).ln();
        }
        sum
    }

    /// Inverse CDF at a single probability (clamped to the grid).
    pub fn quantile_at(&self, q: f64) -> f64 {
        let total = *self.cumulative.last().unwrap();
        self.invert_cdf(q.clamp(0.0, 1.0) * total)
    }

    /// Midpoint quantiles: γ_i with ∫_{-∞}^{γ_i} ρ = (i − 1/2)/n.
    pub fn quantiles(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::validation("quantile count must be at least 1"));
        }
        let total = *self.cumulative.last().unwrap();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!(
                "density not normalized: trapezoid integral {total}"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for i in 1..=n {
            let q = (i as f64 - 0.5) / n as f64 * total;
            out.push(self.invert_cdf(q));
        }
        Ok(out)
    }

    fn invert_cdf(&self, q: f64) -> f64 {
        let m = self.cumulative.len();
        // Last cell index with cumulative <= q.
        let mut k = self.cumulative.partition_point(|&c| c <= q);
        if k == 0 {
            return self.grid[0];
        }
        if k >= m {
            return self.grid[m - 1];
        }
        k -= 1;
        let target = q - self.cumulative[k];
        let h = self.grid[k + 1] - self.grid[k];
        let v0 = self.values[k];
        let beta = (self.values[k + 1] - v0) / h;
        // Solve v0 u + beta u^2 / 2 = target for u in [0, h].
        let u = if beta.abs() * h < 1e-12 * v0.max(1e-300) {
            if v0 > 0.0 {
                target / v0
            } else {
                0.5 * h
            }
        } else {
            let disc = (v0 * v0 + 2.0 * beta * target).max(0.0);
            (-v0 + disc.sqrt()) / beta
        };
        self.grid[k] + u.clamp(0.0, h)
    }

    /// Quantile discretization into a closed-chamber configuration.
    pub fn discretize(&self, n: usize) -> Result<WeylPoint> {
        if n == 0 {
            return Err(Error::validation("cannot discretize into 0 particles"));
        }
        WeylPoint::closed(self.quantiles(n)?)
    }

    /// Two-column CSV: `x,value` per line; the density is normalized on load.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split(',');
            let (a, b) = match (parts.next(), parts.next()) {
                (Some(a), Some(b)) => (a.trim(), b.trim()),
                _ => {
                    // Also accept whitespace separation.
                    let mut ws = trimmed.split_whitespace();
                    match (ws.next(), ws.next()) {
                        (Some(a), Some(b)) => (a, b),
                        _ => {
                            return Err(Error::validation(format!(
                                "expected two columns on line {}",
                                idx + 1
                            )))
                        }
                    }
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(v)) => {
                    grid.push(x);
                    values.push(v);
                }
                _ if idx == 0 => continue, // header line
                _ => {
                    return Err(Error::validation(format!(
                        "cannot parse line {}: {trimmed:?}",
                        idx + 1
                    )))
                }
            }
        }
        Self::new_normalized(grid, values)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (x, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{x},{v}\n"));
        }
        out
    }
}

/// After deserialization the skipped cumulative cache must be rebuilt.
pub(crate) fn rebuild_density(d: GridDensity) -> Result<GridDensity> {
    GridDensity::new_normalized(d.grid, d.values)
}

fn cell_index(grid: &[f64], x: f64) -> usize {
    debug_assert!(x >= grid[0] && x <= grid[grid.len() - 1]);
    let k = grid.partition_point(|&g| g <= x);
    k.saturating_sub(1).min(grid.len() - 2)
}

// ---------------------------------------------------------------------------
// Measure enum
// ---------------------------------------------------------------------------

/// A probability measure on the line, atomic or density-on-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure1D {
    Atomic(AtomicMeasure),
    Density(GridDensity),
}

impl Measure1D {
    pub fn cdf_at(&self, x: f64) -> f64 {
        match self {
            Measure1D::Atomic(a) => a.cdf_at(x),
            Measure1D::Density(d) => d.cdf_at(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Measure1D::Atomic(a) => a.mean(),
            Measure1D::Density(d) => d.mean(),
        }
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        match self {
            Measure1D::Atomic(a) => a.stieltjes(z),
            Measure1D::Density(d) => d.stieltjes(z),
        }
    }

    /// All CDF breakpoints (atoms or grid nodes).
    fn breakpoints(&self) -> &[f64] {
        match self {
            Measure1D::Atomic(a) => a.atoms(),
            Measure1D::Density(d) => d.grid(),
        }
    }

    fn is_atomic(&self) -> bool {
        matches!(self, Measure1D::Atomic(_))
    }

    /// Parses a built-in named measure: `semicircle(r)`, `uniform(lo,hi)`,
    /// `point(c)`.
    pub fn parse_named(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let open = spec
            .find('(')
            .ok_or_else(|| Error::validation(format!("bad measure spec {spec:?}")))?;
        if !spec.ends_with(')') {
            return Err(Error::validation(format!("bad measure spec {spec:?}")));
        }
        let name = spec[..open].trim();
        let args: Vec<f64> = {
            let inner = &spec[open + 1..spec.len() - 1];
            let parts: Vec<&str> = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            let mut vals = Vec::with_capacity(parts.len());
            for p in parts {
                vals.push(p.parse::<f64>().map_err(|_| {
                    Error::validation(format!("bad numeric argument {p:?} in {spec:?}"))
                })?);
            }
            vals
        };
        match (name, args.as_slice()) {
            ("semicircle", [r]) => Ok(Measure1D::Density(GridDensity::semicircle(*r)?)),
            ("uniform", [lo, hi]) => Ok(Measure1D::Density(GridDensity::uniform(*lo, *hi)?)),
            ("point", [c]) => {
                if !c.is_finite() {
                    return Err(Error::validation("point location must be finite"));
                }
                Ok(Measure1D::Atomic(AtomicMeasure::point(*c)?))
            }
            _ => Err(Error::validation(format!(
                "unknown measure {name:?} with {} argument(s)",
                args.len()
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Wasserstein-1
// ---------------------------------------------------------------------------

/// W1 distance by CDF comparison on the merged breakpoint grid.
pub fn wasserstein1(mu: &Measure1D, nu: &Measure1D) -> f64 {
    let mut pts: Vec<f64> = mu
        .breakpoints()
        .iter()
        .chain(nu.breakpoints().iter())
        .cloned()
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 2 {
        return 0.0;
    }

    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        // Left/right limits of F - G on the open segment (a, b): steps are
        // constant (right-continuous), densities interpolate linearly.
        let left = segment_value(mu, a, b, true) - segment_value(nu, a, b, true);
        let right = segment_value(mu, a, b, false) - segment_value(nu, a, b, false);
        total += integrate_abs_linear(left, right, h);
    }
    total
}

fn segment_value(m: &Measure1D, a: f64, b: f64, left_end: bool) -> f64 {
    if m.is_atomic() {
        // constant on (a, b)
        m.cdf_at(a)
    } else if left_end {
        m.cdf_at(a)
    } else {
        m.cdf_at(b)
    }
}

/// ∫_0^h |l + (r - l) t / h| dt, exact with a sign-crossing split.
fn integrate_abs_linear(l: f64, r: f64, h: f64) -> f64 {
    if l == 0.0 && r == 0.0 {
        return 0.0;
    }
    if l * r >= 0.0 {
        0.5 * (l.abs() + r.abs()) * h
    } else {
        let cross = l / (l - r); // in (0, 1)
        0.5 * h * (l.abs() * cross + r.abs() * (1.0 - cross))
    }
}

/// Convenience for comparing a density against an atomic configuration.
pub fn wasserstein1_density_atoms(density: &GridDensity, atoms: &AtomicMeasure) -> f64 {
    wasserstein1(
        &Measure1D::Density(density.clone()),
        &Measure1D::Atomic(atoms.clone()),
    )
}
