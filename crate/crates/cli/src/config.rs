//! Experiment configuration: JSON with a preset layer that expands to full
//! specifications, so the standard runs are one-command reproducible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nibb_core::burgers::Side;
use nibb_core::error::{Error, Result};
use nibb_core::measures::{AtomicMeasure, GridDensity, Measure1D, WeylPoint};
use nibb_core::sde::{BridgeSpec, DriftMode, EndCondition};

/// Where a boundary measure comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSource {
    /// Built-in named measure: `semicircle(r)`, `uniform(lo,hi)`, `point(c)`.
    Named { named: String },
    /// CSV file: two columns for a density, one column for atoms.
    Csv {
        csv: PathBuf,
        #[serde(default)]
        kind: CsvKind,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvKind {
    #[default]
    Density,
    Atoms,
}

impl MeasureSource {
    pub fn load(&self, base_dir: &Path) -> Result<Measure1D> {
        match self {
            MeasureSource::Named { named } => Measure1D::parse_named(named),
            MeasureSource::Csv { csv, kind } => {
                let path = if csv.is_absolute() {
                    csv.clone()
                } else {
                    base_dir.join(csv)
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::validation(format!("cannot read {}: {e}", path.display()))
                })?;
                match kind {
                    CsvKind::Density => Ok(Measure1D::Density(GridDensity::from_csv_str(&text)?)),
                    CsvKind::Atoms => Ok(Measure1D::Atomic(AtomicMeasure::from_csv_str(&text)?)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeConfig {
    /// Times at which shape slices are solved; defaults to the record times.
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_tol() -> f64 {
    5e-3
}

fn default_grid_points() -> usize {
    2048
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            times: None,
            tol: default_tol(),
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeConfig {
    pub time: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigidityConfig {
    pub time: f64,
    /// Stieltjes probe points as (re, im) pairs.
    #[serde(default)]
    pub z_probes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DominanceConfig {
    pub shift: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tw2Config {
    pub s: Option<f64>,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default)]
    pub write_table: bool,
}

fn default_quad_nodes() -> usize {
    64
}

impl Default for Tw2Config {
    fn default() -> Self {
        Tw2Config {
            s: None,
            quad_nodes: default_quad_nodes(),
            write_table: false,
        }
    }
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// "watermelon" or "semicircle-to-semicircle"; expands defaults below.
    pub preset: Option<String>,
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    /// 0 or absent: use all cores.
    pub workers: Option<usize>,
    pub record_times: Option<Vec<f64>>,
    pub drift_mode: Option<DriftMode>,
    pub dt_max: Option<f64>,
    pub dt_edge_factor: Option<f64>,
    pub mu_a: Option<MeasureSource>,
    pub mu_b: Option<MeasureSource>,
    pub shape: Option<ShapeConfig>,
    pub edge: Option<EdgeConfig>,
    pub rigidity: Option<RigidityConfig>,
    pub dominance: Option<DominanceConfig>,
    pub tw2: Option<Tw2Config>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("config parse error: {e}")))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// A config with the preset expanded and all defaults applied.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub preset: Option<String>,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    pub record_times: Vec<f64>,
    pub drift_mode: DriftMode,
    pub dt_max: f64,
    pub dt_edge_factor: f64,
    pub mu_a: Measure1D,
    pub mu_b: Measure1D,
    pub shape: ShapeConfig,
    pub edge: EdgeConfig,
    pub rigidity: RigidityConfig,
    pub dominance: DominanceConfig,
    pub tw2: Tw2Config,
    /// Sufficient-condition checks that failed; reported, not fatal.
    pub warnings: Vec<String>,
}

pub fn resolve(cfg: &ExperimentConfig, base_dir: &Path) -> Result<ResolvedConfig> {
    let preset = cfg.preset.clone();
    let (def_mu_a, def_mu_b, def_mode): (MeasureSource, MeasureSource, DriftMode) =
        match preset.as_deref() {
            Some("watermelon") => (
                MeasureSource::Named {
                    named: "point(0)".into(),
                },
                MeasureSource::Named {
                    named: "point(0)".into(),
                },
                DriftMode::Confluent,
            ),
            Some("semicircle-to-semicircle") => (
                MeasureSource::Named {
                    named: "semicircle(2)".into(),
                },
                MeasureSource::Named {
                    named: "semicircle(2)".into(),
                },
                DriftMode::ExactKernel,
            ),
            Some(other) => {
                return Err(Error::validation(format!(
                    "unknown preset {other:?}; expected \"watermelon\" or \
                     \"semicircle-to-semicircle\""
                )))
            }
            None => (
                MeasureSource::Named {
                    named: "point(0)".into(),
                },
                MeasureSource::Named {
                    named: "point(0)".into(),
                },
                DriftMode::Confluent,
            ),
        };

    let mu_a = cfg.mu_a.clone().unwrap_or(def_mu_a).load(base_dir)?;
    let mu_b = cfg.mu_b.clone().unwrap_or(def_mu_b).load(base_dir)?;
    let record_times = cfg.record_times.clone().unwrap_or_else(|| vec![0.5]);

    let mut warnings = Vec::new();
    check_terminal_assumptions(&mu_b, &mut warnings);

    Ok(ResolvedConfig {
        preset,
        n: cfg.n.unwrap_or(64),
        samples: cfg.samples.unwrap_or(200),
        seed: cfg.seed.unwrap_or(1),
        workers: cfg.workers.unwrap_or(0),
        record_times,
        drift_mode: cfg.drift_mode.unwrap_or(def_mode),
        dt_max: cfg.dt_max.unwrap_or(1e-3),
        dt_edge_factor: cfg.dt_edge_factor.unwrap_or(0.1),
        mu_a,
        mu_b,
        shape: cfg.shape.clone().unwrap_or_default(),
        edge: cfg.edge.unwrap_or(EdgeConfig {
            time: 0.5,
            side: Side::Right,
        }),
        rigidity: cfg.rigidity.clone().unwrap_or(RigidityConfig {
            time: 0.5,
            z_probes: vec![(0.0, 1.0)],
        }),
        dominance: cfg.dominance.unwrap_or(DominanceConfig {
            shift: 0.1,
            time: 0.5,
        }),
        tw2: cfg.tw2.clone().unwrap_or_default(),
        warnings,
    })
}

/// Sufficient-condition checks on the terminal measure (single interval,
/// density bounded below over its support). Violations are warnings: the
/// assumptions are sufficient, not necessary.
fn check_terminal_assumptions(mu_b: &Measure1D, warnings: &mut Vec<String>) {
    let d = match mu_b {
        Measure1D::Density(d) => d,
        Measure1D::Atomic(a) => {
            let first = a.atoms()[0];
            if a.atoms().iter().any(|&x| (x - first).abs() > 1e-12) {
                warnings.push(
                    "terminal data is a spread atomic measure; edge-regularity \
                     assumptions cannot be checked"
                        .into(),
                );
            }
            return;
        }
    };
    let max = d.max_value();
    let values = d.values();
    let first = values.iter().position(|&v| v > 1e-3 * max).unwrap_or(0);
    let last = values.iter().rposition(|&v| v > 1e-3 * max).unwrap_or(0);
    let mut dip = 0usize;
    for &v in &values[first..=last] {
        if v < 1e-4 * max {
            dip += 1;
            if dip >= 3 {
                warnings.push("terminal density appears to have disconnected support".into());
                break;
            }
        } else {
            dip = 0;
        }
    }
    // Non-critical edges: the density must vanish at the support ends (a
    // square-root profile, not a hard edge), and the profile factor
    // S(x) = rho/sqrt((x-a)(b-x)) should not collapse in the interior.
    let (lo, hi) = d.support();
    let grid = d.grid();
    let edge_value = values[first].max(values[last]);
    if edge_value > 0.3 * max {
        warnings.push(
            "terminal density does not vanish at its support edge (hard edge); \
             the square-root edge assumptions do not apply"
                .into(),
        );
    }
    let mut ratios: Vec<f64> = Vec::new();
    for (k, &x) in grid.iter().enumerate() {
        if x <= lo || x >= hi || values[k] <= 0.0 {
            continue;
        }
        let w = ((x - lo) * (hi - x)).sqrt();
        if w > 0.0 {
            ratios.push(values[k] / w);
        }
    }
    if !ratios.is_empty() {
        let mut sorted = ratios.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        if sorted[0] < 0.02 * median {
            warnings.push(
                "terminal density is nearly critical: the square-root profile factor \
                 dips far below its typical level"
                    .into(),
            );
        }
    }
}

/// Builds the bridge specification from a resolved config.
pub fn build_bridge_spec(rc: &ResolvedConfig) -> Result<BridgeSpec> {
    let n = rc.n;
    let start = match &rc.mu_a {
        Measure1D::Atomic(a) => {
            if a.len() == n {
                WeylPoint::closed(a.atoms().to_vec())?
            } else if a.len() == 1 {
                WeylPoint::closed(vec![a.atoms()[0]; n])?
            } else {
                return Err(Error::validation(format!(
                    "initial atomic data has {} atoms but n = {n}",
                    a.len()
                )));
            }
        }
        Measure1D::Density(d) => d.discretize(n)?,
    };
    let end = match &rc.mu_b {
        Measure1D::Atomic(a) => {
            let atoms = a.atoms();
            let confluent = atoms.iter().all(|&x| (x - atoms[0]).abs() < 1e-12);
            if confluent {
                EndCondition::Confluent(atoms[0])
            } else if atoms.len() == n {
                EndCondition::Points(WeylPoint::new(atoms.to_vec())?)
            } else {
                return Err(Error::validation(format!(
                    "terminal atomic data has {} atoms but n = {n}",
                    atoms.len()
                )));
            }
        }
        Measure1D::Density(d) => EndCondition::Points(WeylPoint::new(
            d.discretize(n)?.into_coords(),
        )?),
    };
    Ok(BridgeSpec {
        n,
        start,
        end,
        record_times: rc.record_times.clone(),
        drift_mode: rc.drift_mode,
        dt_max: rc.dt_max,
        dt_edge_factor: rc.dt_edge_factor,
        seed: rc.seed,
        samples: rc.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn watermelon_preset_expands() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"preset": "watermelon", "n": 16, "samples": 10}"#,
        )
        .unwrap();
        let rc = resolve(&cfg, Path::new(".")).unwrap();
        assert_eq!(rc.n, 16);
        assert_eq!(rc.drift_mode, DriftMode::Confluent);
        let spec = build_bridge_spec(&rc).unwrap();
        assert_eq!(spec.start.coords(), &[0.0; 16]);
        assert!(matches!(spec.end, EndCondition::Confluent(c) if c == 0.0));
    }

    #[test]
    fn semicircle_preset_expands() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"preset": "semicircle-to-semicircle", "n": 8, "samples": 5}"#,
        )
        .unwrap();
        let rc = resolve(&cfg, Path::new(".")).unwrap();
        assert_eq!(rc.drift_mode, DriftMode::ExactKernel);
        let spec = build_bridge_spec(&rc).unwrap();
        assert!(matches!(spec.end, EndCondition::Points(_)));
        assert!(spec.start.is_strict());
    }

    #[test]
    fn unknown_preset_rejected() {
        let cfg =
            ExperimentConfig::from_json_str(r#"{"preset": "parabola"}"#).unwrap();
        assert!(resolve(&cfg, Path::new(".")).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json_str(r#"{"particles": 5}"#).is_err());
        assert!(ExperimentConfig::from_json_str("not json").is_err());
    }

    #[test]
    fn hard_edge_density_warns() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"mu_a": {"named": "point(0)"}, "mu_b": {"named": "uniform(0,1)"}}"#,
        )
        .unwrap();
        let rc = resolve(&cfg, Path::new(".")).unwrap();
        assert!(
            !rc.warnings.is_empty(),
            "uniform terminal data should warn: {:?}",
            rc.warnings
        );
    }

    #[test]
    fn csv_source_roundtrip() {
        let dir = std::env::temp_dir().join(format!("nibb-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let d = GridDensity::semicircle(1.0).unwrap();
        std::fs::write(dir.join("rho.csv"), d.to_csv_string()).unwrap();
        let src = MeasureSource::Csv {
            csv: PathBuf::from("rho.csv"),
            kind: CsvKind::Density,
        };
        match src.load(&dir).unwrap() {
            Measure1D::Density(back) => {
                assert!((back.support().0 + 1.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
