//! Plot-ready CSV emission.

use std::path::{Path, PathBuf};

use nibb_core::airy::TwTable;
use nibb_core::burgers::LimitShape;
use nibb_core::error::{Error, Result};
use nibb_core::sde::PathEnsemble;
use nibb_core::stats::RigidityReport;

/// Artifacts a run may have produced; plot emission picks what it needs.
#[derive(Default)]
pub struct RunOutputs {
    pub ensemble: Option<PathEnsemble>,
    pub shape: Option<LimitShape>,
    pub edge_samples: Option<Vec<f64>>,
    pub table: Option<TwTable>,
    pub rigidity: Option<RigidityReport>,
    pub plot_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// (x, rho_star, rho_hat) on the shape grid.
    DensityOverlay,
    /// (s, F2, F_hat) over the reference table grid.
    CdfOverlay,
    /// (rank, median_dev, p95_dev).
    RigidityCurve,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<PlotKind> {
        match s {
            "density-overlay" => Ok(PlotKind::DensityOverlay),
            "cdf-overlay" => Ok(PlotKind::CdfOverlay),
            "rigidity-curve" => Ok(PlotKind::RigidityCurve),
            other => Err(Error::usage(format!("unknown plot kind {other:?}"))),
        }
    }
}

/// Writes one plot CSV into `dir`, returning its path.
pub fn emit_plotdata(outputs: &RunOutputs, kind: PlotKind, dir: &Path) -> Result<PathBuf> {
    let (name, content) = match kind {
        PlotKind::DensityOverlay => {
            let shape = outputs
                .shape
                .as_ref()
                .ok_or_else(|| Error::usage("density overlay needs a limit shape"))?;
            let ensemble = outputs
                .ensemble
                .as_ref()
                .ok_or_else(|| Error::usage("density overlay needs an ensemble"))?;
            let t = outputs
                .plot_time
                .ok_or_else(|| Error::usage("density overlay needs a time"))?;
            ("density_overlay.csv", density_overlay_csv(shape, ensemble, t)?)
        }
        PlotKind::CdfOverlay => {
            let table = outputs
                .table
                .as_ref()
                .ok_or_else(|| Error::usage("cdf overlay needs the reference table"))?;
            let samples = outputs
                .edge_samples
                .as_ref()
                .ok_or_else(|| Error::usage("cdf overlay needs edge samples"))?;
            ("cdf_overlay.csv", cdf_overlay_csv(table, samples)?)
        }
        PlotKind::RigidityCurve => {
            let report = outputs
                .rigidity
                .as_ref()
                .ok_or_else(|| Error::usage("rigidity curve needs a rigidity report"))?;
            ("rigidity_curve.csv", rigidity_curve_csv(report))
        }
    };
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path)
}

/// Two-curve density overlay: the limit density and a binned empirical
/// density pooled over samples.
pub fn density_overlay_csv(
    shape: &LimitShape,
    ensemble: &PathEnsemble,
    t: f64,
) -> Result<String> {
    let slice_index = shape
        .slice_index(t)
        .ok_or_else(|| Error::usage(format!("shape has no slice at time {t}")))?;
    let time_index = ensemble
        .time_index(t)
        .ok_or_else(|| Error::usage(format!("ensemble has no slice at time {t}")))?;
    if ensemble.samples() == 0 {
        return Err(Error::usage("empty ensemble"));
    }
    let density = &shape.densities[slice_index];
    let grid = density.grid();
    let mut pooled = ensemble.pooled_positions(time_index);
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total = pooled.len() as f64;
    let mut out = String::from("x,rho_star,rho_hat\n");
    for (k, &x) in grid.iter().enumerate() {
        let h_lo = if k == 0 { grid[1] - grid[0] } else { x - grid[k - 1] };
        let h_hi = if k + 1 == grid.len() {
            grid[k] - grid[k - 1]
        } else {
            grid[k + 1] - x
        };
        let (lo, hi) = (x - 0.5 * h_lo, x + 0.5 * h_hi);
        let count =
            pooled.partition_point(|&p| p < hi) - pooled.partition_point(|&p| p < lo);
        let rho_hat = count as f64 / (total * (hi - lo));
        out.push_str(&format!("{x},{},{rho_hat}\n", density.values()[k]));
    }
    Ok(out)
}

/// Reference CDF against the empirical CDF of the samples.
pub fn cdf_overlay_csv(table: &TwTable, samples: &[f64]) -> Result<String> {
    if samples.is_empty() {
        return Err(Error::usage("empty sample set"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len() as f64;
    let mut out = String::from("s,f2,f_hat\n");
    for (s, f2) in table.s_grid.iter().zip(&table.cdf) {
        let f_hat = sorted.partition_point(|&v| v <= *s) as f64 / m;
        out.push_str(&format!("{s},{f2},{f_hat}\n"));
    }
    Ok(out)
}

pub fn rigidity_curve_csv(report: &RigidityReport) -> String {
    let mut out = String::from("rank,median_dev,p95_dev\n");
    for rank in 0..report.n {
        out.push_str(&format!(
            "{rank},{},{}\n",
            report.median_dev[rank], report.p95_dev[rank]
        ));
    }
    out
}
