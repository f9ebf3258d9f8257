//! Stochastic integration of the nonintersecting bridge particle systems.
//!
//! Both samplers run Euler–Maruyama on
//! `dx_i = dB_i/sqrt(n) + drift_i dt` with a step schedule that shrinks near
//! the pinned endpoint and near-collisions, an order-violation retry that
//! halves the step, and counter-based noise keyed by
//! `(seed, sample, step, particle)` so ensembles are independent of worker
//! scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burgers::LimitShape;
use crate::error::{Error, Result};
use crate::kernel;
use crate::measures::{GridDensity, WeylPoint};
use crate::rng;

// ---------------------------------------------------------------------------
// Specification types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    /// Gradient of the log Karlin–McGregor kernel toward strict terminal
    /// data.
    ExactKernel,
    /// Dyson interaction plus the limit-shape drift g_t.
    MeanField,
    /// Closed-form drift for a single confluent endpoint.
    Confluent,
}

/// Terminal condition of the bridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "value")]
pub enum EndCondition {
    /// Strictly increasing terminal configuration.
    Points(WeylPoint),
    /// All particles pinned at one location.
    Confluent(f64),
}

/// Full description of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub n: usize,
    /// Starting configuration; ties allowed (closed chamber).
    pub start: WeylPoint,
    pub end: EndCondition,
    /// Sorted times in [0, 1] at which slices are recorded.
    pub record_times: Vec<f64>,
    pub drift_mode: DriftMode,
    pub dt_max: f64,
    /// Step shrink factor near the pinned endpoint: dt ≤ factor · (1 - t).
    pub dt_edge_factor: f64,
    pub seed: u64,
    pub samples: usize,
}

impl BridgeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("particle count must be positive"));
        }
        if self.start.len() != self.n {
            return Err(Error::validation(format!(
                "start configuration has {} particles, spec says {}",
                self.start.len(),
                self.n
            )));
        }
        if self.samples == 0 {
            return Err(Error::validation("sample count must be positive"));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::validation("dt_max must be positive"));
        }
        if !(self.dt_edge_factor > 0.0 && self.dt_edge_factor.is_finite()) {
            return Err(Error::validation("dt_edge_factor must be positive"));
        }
        if self.record_times.is_empty() {
            return Err(Error::validation("no record times requested"));
        }
        if self
            .record_times
            .iter()
            .any(|&t| !(0.0..=1.0).contains(&t))
        {
            return Err(Error::validation("record times must lie in [0, 1]"));
        }
        if self.record_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation("record times must be strictly increasing"));
        }
        match (&self.drift_mode, &self.end) {
            (DriftMode::ExactKernel, EndCondition::Points(b)) => {
                if b.len() != self.n {
                    return Err(Error::validation("terminal configuration size mismatch"));
                }
                if !b.is_strict() {
                    return Err(Error::validation(
                        "exact-kernel mode needs strictly increasing terminal data \
                         (tied endpoints route through confluent mode)",
                    ));
                }
            }
            (DriftMode::ExactKernel, EndCondition::Confluent(_)) => {}
            (DriftMode::Confluent, EndCondition::Confluent(_)) => {}
            (DriftMode::Confluent, EndCondition::Points(_)) => {
                return Err(Error::validation(
                    "confluent mode needs a confluent terminal condition",
                ));
            }
            (DriftMode::MeanField, _) => {}
        }
        Ok(())
    }

    fn terminal_coords(&self) -> Vec<f64> {
        match &self.end {
            EndCondition::Points(b) => b.coords().to_vec(),
            EndCondition::Confluent(c) => vec![*c; self.n],
        }
    }
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

/// Sampled trajectories recorded at the spec's record times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub spec: BridgeSpec,
    pub times: Vec<f64>,
    /// positions[sample][time_index][rank]
    pub positions: Vec<Vec<Vec<f64>>>,
}

const ENSEMBLE_MAGIC: &[u8; 8] = b"NIBBPE01";

impl PathEnsemble {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn samples(&self) -> usize {
        self.positions.len()
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&tt| (tt - t).abs() < 1e-9)
    }

    pub fn slice(&self, sample: usize, time_index: usize) -> &[f64] {
        &self.positions[sample][time_index]
    }

    /// Values of one rank across all samples at a recorded time.
    pub fn rank_values(&self, time_index: usize, rank: usize) -> Vec<f64> {
        self.positions
            .iter()
            .map(|sample| sample[time_index][rank])
            .collect()
    }

    /// All particle positions at a recorded time pooled over samples.
    pub fn pooled_positions(&self, time_index: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples() * self.n());
        for sample in &self.positions {
            out.extend_from_slice(&sample[time_index]);
        }
        out
    }

    /// CSV with columns sample,time,rank,position.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample,time,rank,position\n");
        for (s, sample) in self.positions.iter().enumerate() {
            for (k, slice) in sample.iter().enumerate() {
                let t = self.times[k];
                for (r, x) in slice.iter().enumerate() {
                    out.push_str(&format!("{s},{t},{r},{x}\n"));
                }
            }
        }
        out
    }

    /// Compact binary slice format: little-endian f64 payload with a JSON
    /// spec header.
    pub fn to_bytes(&self) -> Vec<u8> {
        let spec_json = serde_json::to_vec(&self.spec).expect("spec serializes");
        let n = self.n();
        let n_times = self.times.len();
        let n_samples = self.samples();
        let mut out = Vec::with_capacity(
            8 + 4 + spec_json.len() + 12 + 8 * n_times + 8 * n * n_times * n_samples,
        );
        out.extend_from_slice(ENSEMBLE_MAGIC);
        out.extend_from_slice(&(spec_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&spec_json);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(n_times as u32).to_le_bytes());
        out.extend_from_slice(&(n_samples as u32).to_le_bytes());
        for t in &self.times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for sample in &self.positions {
            for slice in sample {
                for x in slice {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<PathEnsemble> {
        let fail = |msg: &str| Error::validation(format!("ensemble decode: {msg}"));
        if data.len() < 12 || &data[..8] != ENSEMBLE_MAGIC {
            return Err(fail("bad magic"));
        }
        let mut off = 8usize;
        let take_u32 = |off: &mut usize| -> Result<u32> {
            let end = off
                .checked_add(4)
                .filter(|&e| e <= data.len())
                .ok_or_else(|| fail("truncated header"))?;
            let v = u32::from_le_bytes(data[*off..end].try_into().unwrap());
            *off = end;
            Ok(v)
        };
        let spec_len = take_u32(&mut off)? as usize;
        let spec_end = off
            .checked_add(spec_len)
            .filter(|&e| e <= data.len())
            .ok_or_else(|| fail("truncated spec"))?;
        let spec: BridgeSpec = serde_json::from_slice(&data[off..spec_end])
            .map_err(|e| fail(&format!("bad spec json: {e}")))?;
        spec.validate()?;
        off = spec_end;
        let n = take_u32(&mut off)? as usize;
        let n_times = take_u32(&mut off)? as usize;
        let n_samples = take_u32(&mut off)? as usize;
        if n != spec.n || n_samples != spec.samples {
            return Err(fail("header disagrees with spec"));
        }
        let floats = (n_times)
            .checked_add(
                n.checked_mul(n_times)
                    .and_then(|v| v.checked_mul(n_samples))
                    .ok_or_else(|| fail("size overflow"))?,
            )
            .ok_or_else(|| fail("size overflow"))?;
        let expected = off
            .checked_add(floats.checked_mul(8).ok_or_else(|| fail("size overflow"))?)
            .ok_or_else(|| fail("size overflow"))?;
        if expected != data.len() {
            return Err(fail("payload length mismatch"));
        }
        let read_f64 = |off: &mut usize| -> f64 {
            let v = f64::from_le_bytes(data[*off..*off + 8].try_into().unwrap());
            *off += 8;
            v
        };
        let times: Vec<f64> = (0..n_times).map(|_| read_f64(&mut off)).collect();
        if times.iter().any(|t| !t.is_finite()) {
            return Err(fail("non-finite time"));
        }
        let mut positions = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut sample = Vec::with_capacity(n_times);
            for &t in &times {
                let slice: Vec<f64> = (0..n).map(|_| read_f64(&mut off)).collect();
                if slice.iter().any(|x| !x.is_finite()) {
                    return Err(fail("non-finite position"));
                }
                let interior = t > 0.0 && t < 1.0;
                for w in slice.windows(2) {
                    if interior && !(w[0] < w[1]) {
                        return Err(fail("interior slice not strictly increasing"));
                    }
                    if !interior && !(w[0] <= w[1]) {
                        return Err(fail("slice not ordered"));
                    }
                }
                sample.push(slice);
            }
            positions.push(sample);
        }
        Ok(PathEnsemble {
            spec,
            times,
            positions,
        })
    }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Smallest step the retry loop will attempt before giving up.
const DT_FLOOR: f64 = 1e-12;
/// Resolution barrier: proposals with a gap below this fraction of the mean
/// particle spacing count as ordering violations. Under the level-repulsion
/// law such gaps carry ~1e-10 probability, but the discrete scheme would
/// otherwise random-walk into them and the explicit drift cannot recover.
const GAP_BARRIER_FRACTION: f64 = 1e-2;
/// Time of the deterministic tie-spread of confluent starting data.
const TIE_SPREAD_TIME: f64 = 1e-3;

enum Drift<'a> {
    Exact { b: WeylPoint },
    Confluent { c: f64 },
    MeanField { shape: &'a LimitShape },
}

impl Drift<'_> {
    /// Per-particle drift already normalized by 1/n.
    fn eval(&self, x: &[f64], t: f64, n: usize, out: &mut Vec<f64>) -> Result<()> {
        let nf = n as f64;
        match self {
            Drift::Exact { b } => {
                let xp = WeylPoint::new(x.to_vec())?;
                let raw = kernel::km_drift(&xp, b, t, n)?;
                out.clear();
                out.extend(raw.iter().map(|d| d / nf));
            }
            Drift::Confluent { c } => {
                let xp = WeylPoint::new(x.to_vec())?;
                let raw = kernel::km_drift_confluent(&xp, *c, t, n)?;
                out.clear();
                out.extend(raw.iter().map(|d| d / nf));
            }
            Drift::MeanField { shape } => {
                out.clear();
                for i in 0..n {
                    let xi = x[i];
                    let g = shape.sampler_g(t, xi)?;
                    let mut pair = 0.0;
                    for j in 0..n {
                        if j != i {
                            pair += 1.0 / (xi - x[j]);
                        }
                    }
                    out.push(pair / nf + g);
                }
            }
        }
        Ok(())
    }
}

/// Deterministic spread of tied particles: each maximal tie group opens into
/// the quantiles of the short-time confluent profile.
fn spread_ties(start: &[f64], n: usize, delta: f64) -> Result<(Vec<f64>, f64)> {
    let has_ties = start.windows(2).any(|w| w[0] == w[1]);
    if !has_ties {
        return Ok((start.to_vec(), 0.0));
    }
    let sc = GridDensity::semicircle(1.0)?;
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    while i < n {
        let mut j = i;
        while j + 1 < n && start[j + 1] == start[i] {
            j += 1;
        }
        let k = j - i + 1;
        if k == 1 {
            out.push(start[i]);
        } else {
            let mut radius = 2.0 * (delta * (1.0 - delta) * k as f64 / n as f64).sqrt();
            // Stay clear of neighboring groups.
            if i > 0 {
                radius = radius.min(0.45 * (start[i] - start[i - 1]).abs());
            }
            if j + 1 < n {
                radius = radius.min(0.45 * (start[j + 1] - start[j]).abs());
            }
            let q = sc.quantiles(k)?;
            for qq in q {
                out.push(start[i] + radius * qq);
            }
        }
        i = j + 1;
    }
    // Guard against pathological inputs that still collide after spreading.
    for w in out.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Integration(
                "tie spreading failed to produce a strictly ordered start".into(),
            ));
        }
    }
    Ok((out, delta))
}

fn min_gap(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn integrate_sample(
    spec: &BridgeSpec,
    drift: &Drift<'_>,
    sample: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = spec.n;
    let nf = n as f64;
    let sqrt_inv_n = 1.0 / nf.sqrt();
    let terminal = spec.terminal_coords();

    let mut slices: Vec<Vec<f64>> = Vec::with_capacity(spec.record_times.len());
    let mut record_iter = spec.record_times.iter().peekable();

    // Record t = 0 verbatim if requested.
    if let Some(&&t0) = record_iter.peek() {
        if t0 == 0.0 {
            slices.push(spec.start.coords().to_vec());
            record_iter.next();
        }
    }
    let remaining: Vec<f64> = record_iter.cloned().collect();

    // Tie spreading for confluent starting data.
    let first_target = remaining.first().cloned().unwrap_or(1.0);
    let delta0 = TIE_SPREAD_TIME
        .min(spec.dt_max)
        .min(0.5 * first_target.max(1e-6));
    let (mut x, mut t) = spread_ties(spec.start.coords(), n, delta0)?;

    let mut step: u64 = 0;
    let mut drift_buf: Vec<f64> = Vec::with_capacity(n);
    let mut proposal = vec![0.0f64; n];

    for &target in &remaining {
        if target >= 1.0 {
            break; // handled after the loop
        }
        while t < target - 1e-13 {
            // Step schedule: global cap, endpoint shrink, collision cap.
            // The collision cap keeps the noise scale near half the
            // smallest resolvable gap so near-collisions recover instead of
            // diving; the resolution barrier below bounds how small that
            // gap can get.
            let gap = min_gap(&x);
            let g_floor = if n > 1 {
                GAP_BARRIER_FRACTION * (x[n - 1] - x[0]).abs().max(1e-300) / (nf - 1.0)
            } else {
                0.0
            };
            let cap = if n > 1 {
                let g_eff = gap.max(g_floor);
                g_eff * g_eff * nf / 4.0
            } else {
                f64::INFINITY
            };
            let mut dt = spec
                .dt_max
                .min(spec.dt_edge_factor * (1.0 - t))
                .min(cap)
                .min(target - t);

            // Attempt loop: fresh noise per attempt, halve on violation.
            loop {
                step += 1;
                match drift.eval(&x, t, n, &mut drift_buf) {
                    Ok(()) => {}
                    Err(Error::Conditioning { .. }) => {
                        // Conditioning failures shrink the step like an
                        // ordering violation; a persistent failure hits the
                        // floor below.
                        dt *= 0.5;
                        if dt < DT_FLOOR {
                            return Err(Error::Integration(format!(
                                "kernel conditioning kept failing at t = {t} (sample {sample})"
                            )));
                        }
                        continue;
                    }
                    Err(e) => return Err(e),
                }
                let sq = dt.sqrt();
                let mut ok = true;
                for i in 0..n {
                    let z = rng::standard_normal(spec.seed, sample as u64, step, i as u64);
                    proposal[i] = x[i] + sq * sqrt_inv_n * z + drift_buf[i] * dt;
                    if !proposal[i].is_finite() {
                        ok = false;
                    }
                }
                if ok && n > 1 {
                    for w in proposal.windows(2) {
                        if !(w[1] - w[0] > 0.5 * g_floor) {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    x.copy_from_slice(&proposal);
                    t += dt;
                    break;
                }
                dt *= 0.5;
                if dt < DT_FLOOR {
                    return Err(Error::Integration(format!(
                        "step floor reached at t = {t} (sample {sample}, min gap {:.3e})",
                        min_gap(&x)
                    )));
                }
            }
            if (target - t).abs() < 1e-13 {
                t = target;
            }
        }
        t = target;
        slices.push(x.clone());
    }

    // A requested slice at t = 1 is the pinned terminal configuration.
    if remaining.iter().any(|&t| t >= 1.0) {
        slices.push(terminal);
    }
    Ok(slices)
}

fn run_ensemble(spec: &BridgeSpec, drift: Drift<'_>) -> Result<PathEnsemble> {
    let positions: Vec<Vec<Vec<f64>>> = (0..spec.samples)
        .into_par_iter()
        .map(|sample| integrate_sample(spec, &drift, sample))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble {
        spec: spec.clone(),
        times: spec.record_times.clone(),
        positions,
    })
}

/// Samples the bridge with the exact kernel drift (or its confluent closed
/// form).
pub fn simulate_bridge(spec: &BridgeSpec) -> Result<PathEnsemble> {
    spec.validate()?;
    let drift = match (&spec.drift_mode, &spec.end) {
        (DriftMode::MeanField, _) => {
            return Err(Error::usage(
                "mean-field mode needs a limit shape; call simulate_meanfield",
            ))
        }
        (_, EndCondition::Confluent(c)) => Drift::Confluent { c: *c },
        (DriftMode::ExactKernel, EndCondition::Points(b)) => Drift::Exact { b: b.clone() },
        (DriftMode::Confluent, EndCondition::Points(_)) => unreachable!("validated above"),
    };
    run_ensemble(spec, drift)
}

/// Samples the mean-field system: Dyson interaction plus the shape drift.
pub fn simulate_meanfield(spec: &BridgeSpec, shape: &LimitShape) -> Result<PathEnsemble> {
    spec.validate()?;
    let t_max = spec
        .record_times
        .iter()
        .cloned()
        .filter(|&t| t < 1.0)
        .fold(0.0f64, f64::max);
    if !shape.covers(0.0) || !shape.covers(t_max) {
        return Err(Error::usage(format!(
            "limit shape does not cover the integration range [0, {t_max}]"
        )));
    }
    run_ensemble(spec, Drift::MeanField { shape })
}

// ---------------------------------------------------------------------------
// Bridge / drifted-motion duality
// ---------------------------------------------------------------------------

/// A scalar trajectory sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<ScalarPath> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::validation("path needs matching nonempty grids"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::validation("path times must be strictly increasing"));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("path contains non-finite entries"));
        }
        Ok(ScalarPath { times, values })
    }

    /// Linear interpolation in time, clamped at the ends.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&tt| tt <= t) - 1;
        let theta = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k] * (1.0 - theta) + self.values[k + 1] * theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualDirection {
    BridgeToMotion,
    MotionToBridge,
}

/// The bridge/motion correspondence W(t) = (1 - t) B(t / (1 - t)), applied
/// pointwise on the reparametrized grid.
pub fn dual_transform(path: &ScalarPath, direction: DualDirection) -> Result<ScalarPath> {
    match direction {
        DualDirection::BridgeToMotion => {
            if path.times.iter().any(|&t| t >= 1.0) {
                return Err(Error::domain(
                    "bridge-side input must avoid t = 1 (the motion time diverges)",
                ));
            }
            if path.times.iter().any(|&t| t < 0.0) {
                return Err(Error::domain("bridge times must be non-negative"));
            }
            let times: Vec<f64> = path.times.iter().map(|&t| t / (1.0 - t)).collect();
            let values: Vec<f64> = path
                .times
                .iter()
                .zip(&path.values)
                .map(|(&t, &w)| w / (1.0 - t))
                .collect();
            ScalarPath::new(times, values)
        }
        DualDirection::MotionToBridge => {
            if path.times.iter().any(|&s| s < 0.0) {
                return Err(Error::domain("motion times must be non-negative"));
            }
            let times: Vec<f64> = path.times.iter().map(|&s| s / (1.0 + s)).collect();
            let values: Vec<f64> = path
                .times
                .iter()
                .zip(&path.values)
                .map(|(&s, &b)| b / (1.0 + s))
                .collect();
            ScalarPath::new(times, values)
        }
    }
}

// ---------------------------------------------------------------------------
// Calogero–Moser system
// ---------------------------------------------------------------------------

/// State of the deterministic companion system
/// `x' = v, v_i' = -(1/n^2) Σ_{j≠i} (x_i - x_j)^{-3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub energy: f64,
}

impl CmState {
    pub fn new(positions: WeylPoint, velocities: Vec<f64>) -> Result<CmState> {
        if !positions.is_strict() {
            return Err(Error::validation("positions must be strictly increasing"));
        }
        if positions.len() != velocities.len() {
            return Err(Error::validation("velocity length mismatch"));
        }
        if velocities.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite velocity"));
        }
        let energy = cm_energy(positions.coords(), &velocities);
        Ok(CmState {
            positions: positions.into_coords(),
            velocities,
            energy,
        })
    }
}

/// Conserved energy: kinetic term minus the attractive pair potential
/// summed over unordered pairs.
pub fn cm_energy(x: &[f64], v: &[f64]) -> f64 {
    let n = x.len() as f64;
    let kinetic: f64 = v.iter().map(|vi| 0.5 * vi * vi).sum();
    let mut pot = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let d = x[i] - x[j];
            pot += 1.0 / (d * d);
        }
    }
    kinetic - pot / (2.0 * n * n)
}

fn cm_force(x: &[f64], out: &mut [f64]) {
    let n = x.len() as f64;
    let inv_n2 = 1.0 / (n * n);
    for i in 0..x.len() {
        let mut acc = 0.0;
        for j in 0..x.len() {
            if j != i {
                let d = x[i] - x[j];
                acc += 1.0 / (d * d * d);
            }
        }
        out[i] = -inv_n2 * acc;
    }
}

/// Classic fourth-order Runge–Kutta with per-step energy recording.
/// Fails when a particle pair approaches collision (gap below 1e-9).
pub fn cm_integrate(initial: &CmState, t_end: f64, dt: f64) -> Result<Vec<CmState>> {
    if !(dt > 0.0 && dt.is_finite() && t_end > 0.0) {
        return Err(Error::validation("need positive dt and t_end"));
    }
    let n = initial.positions.len();
    let steps = (t_end / dt).round() as usize;
    let mut x = initial.positions.clone();
    let mut v = initial.velocities.clone();
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(CmState {
        positions: x.clone(),
        velocities: v.clone(),
        energy: cm_energy(&x, &v),
    });

    let mut k = vec![vec![0.0f64; n]; 8];
    for step in 0..steps {
        if min_gap(&x) < 1e-9 {
            return Err(Error::Integration(format!(
                "particle collision at step {step} (gap below 1e-9)"
            )));
        }
        // k1
        let (x1, v1) = (x.clone(), v.clone());
        k[0].copy_from_slice(&v1);
        cm_force(&x1, &mut k[1]);
        // k2
        let x2: Vec<f64> = x.iter().zip(&k[0]).map(|(a, b)| a + 0.5 * dt * b).collect();
        let v2: Vec<f64> = v.iter().zip(&k[1]).map(|(a, b)| a + 0.5 * dt * b).collect();
        k[2].copy_from_slice(&v2);
        cm_force(&x2, &mut k[3]);
        // k3
        let x3: Vec<f64> = x.iter().zip(&k[2]).map(|(a, b)| a + 0.5 * dt * b).collect();
        let v3: Vec<f64> = v.iter().zip(&k[3]).map(|(a, b)| a + 0.5 * dt * b).collect();
        k[4].copy_from_slice(&v3);
        cm_force(&x3, &mut k[5]);
        // k4
        let x4: Vec<f64> = x.iter().zip(&k[4]).map(|(a, b)| a + dt * b).collect();
        let v4: Vec<f64> = v.iter().zip(&k[5]).map(|(a, b)| a + dt * b).collect();
        k[6].copy_from_slice(&v4);
        cm_force(&x4, &mut k[7]);

        for i in 0..n {
            x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[2][i] + 2.0 * k[4][i] + k[6][i]);
            v[i] += dt / 6.0 * (k[1][i] + 2.0 * k[3][i] + 2.0 * k[5][i] + k[7][i]);
        }
        traj.push(CmState {
            positions: x.clone(),
            velocities: v.clone(),
            energy: cm_energy(&x, &v),
        });
    }
    Ok(traj)
}
