//! Experiment configuration: a JSON document with `network`, `cases`,
//! `sim`, `outputs`, and `quantile_levels` sections.
//!
//! A case overrides the base network's traffic intensities (service rates
//! become `lambda_j / rho_j`) and optionally replaces the primitive
//! distributions by gamma shapes, which is exactly how the reference
//! experiment grid is parameterized.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::approx::PmfConvention;
use crate::network::{DistributionSpec, NetworkSpec};
use crate::sim::SimConfig;
use crate::{Error, Result};

/// The built-in two-station network: `alpha = (0.3, 0.2)`,
/// `P = [[0.3, 0.6], [0.4, 0.2]]`, giving `lambda = (1, 1)`.
pub const PRESET_TWO_STATION: &str = "paper-4.2";

/// Network section: either a named preset or an inline spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSection {
    Preset { preset: String },
    Inline(NetworkSpec),
}

/// One experiment case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseConfig {
    pub label: String,
    /// Traffic intensity per station; service rates are derived as
    /// `lambda / rho`.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    /// Gamma shape per station for the external interarrival distributions.
    #[serde(default)]
    pub arrival_shapes: Option<Vec<f64>>,
    /// Gamma shape per station for the service distributions.
    #[serde(default)]
    pub service_shapes: Option<Vec<f64>>,
}

/// Which artifacts the report commands emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Means,
    Quantiles,
    Histogram,
    Joint,
    Gtest,
    BarCheck,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![
        OutputKind::Means,
        OutputKind::Quantiles,
        OutputKind::Histogram,
        OutputKind::Joint,
    ]
}

fn default_quantiles() -> Vec<f64> {
    vec![0.25, 0.50, 0.75, 0.90]
}

fn default_sim() -> SimConfig {
    SimConfig {
        horizon: 1e7,
        warmup_fraction: 0.9,
        num_batches: 20,
        seed: 20_260_810,
        pmf_cap: 0, // 0 = derive from the approximation means
        joint_interval: None,
    }
}

/// Top-level experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    #[serde(default)]
    pub cases: Vec<CaseConfig>,
    #[serde(default = "default_sim")]
    pub sim: SimConfig,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default = "default_quantiles")]
    pub quantile_levels: Vec<f64>,
    #[serde(default)]
    pub pmf_convention: PmfConvention,
}

/// A fully resolved case: label plus concrete network.
#[derive(Debug, Clone)]
pub struct ResolvedCase {
    pub label: String,
    pub spec: NetworkSpec,
}

pub fn preset_network(name: &str) -> Result<NetworkSpec> {
    match name {
        PRESET_TWO_STATION => NetworkSpec::new(
            vec![0.3, 0.2],
            vec![1.0 / 0.92, 1.0 / 0.98],
            vec![vec![0.3, 0.6], vec![0.4, 0.2]],
            vec![DistributionSpec::Exponential; 2],
            vec![DistributionSpec::Exponential; 2],
        ),
        other => Err(Error::Config(format!("unknown preset `{other}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        for case in &self.cases {
            if let Some(rho) = &case.rho {
                if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
                    return Err(Error::Config(format!(
                        "case `{}`: rho {rho:?} must be componentwise in (0,1)",
                        case.label
                    )));
                }
            }
        }
        for &q in &self.quantile_levels {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Config(format!("quantile level {q} outside (0,1)")));
            }
        }
        Ok(())
    }

    pub fn base_network(&self) -> Result<NetworkSpec> {
        let spec = match &self.network {
            NetworkSection::Preset { preset } => preset_network(preset)?,
            NetworkSection::Inline(spec) => spec.clone(),
        };
        let violations = crate::network::validate(&spec);
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidNetwork(
                violations
                    .iter()
                    .map(|v| v.label.clone())
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    /// Expand the case list against the base network. An empty case list
    /// yields the base network as a single case named `base`.
    pub fn resolve_cases(&self) -> Result<Vec<ResolvedCase>> {
        let base = self.base_network()?;
        if self.cases.is_empty() {
            return Ok(vec![ResolvedCase {
                label: "base".into(),
                spec: base,
            }]);
        }
        let lambda = crate::flow::solve_traffic(&base)?.lambda;
        self.cases
            .iter()
            .map(|case| {
                let mut spec = base.clone();
                let n = spec.num_stations();
                if let Some(rho) = &case.rho {
                    if rho.len() != n {
                        return Err(Error::Config(format!(
                            "case `{}`: rho has {} entries for {} stations",
                            case.label,
                            rho.len(),
                            n
                        )));
                    }
                    spec.mu = lambda.iter().zip(rho).map(|(l, r)| l / r).collect();
                }
                if let Some(shapes) = &case.arrival_shapes {
                    if shapes.len() != n {
                        return Err(Error::Config(format!(
                            "case `{}`: arrival_shapes has {} entries for {} stations",
                            case.label,
                            shapes.len(),
                            n
                        )));
                    }
                    spec.arrival_dist = shapes
                        .iter()
                        .map(|&shape| DistributionSpec::Gamma { shape })
                        .collect();
                }
                if let Some(shapes) = &case.service_shapes {
                    if shapes.len() != n {
                        return Err(Error::Config(format!(
                            "case `{}`: service_shapes has {} entries for {} stations",
                            case.label,
                            shapes.len(),
                            n
                        )));
                    }
                    spec.service_dist = shapes
                        .iter()
                        .map(|&shape| DistributionSpec::Gamma { shape })
                        .collect();
                }
                Ok(ResolvedCase {
                    label: case.label.clone(),
                    spec,
                })
            })
            .collect()
    }

    /// Concrete simulation config for one case: fills the derived pmf cap
    /// (ten times the largest approximate mean) when the config left it 0.
    pub fn sim_for(&self, spec: &NetworkSpec) -> Result<SimConfig> {
        let mut sim = self.sim.clone();
        if sim.pmf_cap == 0 {
            let model = crate::approx::build_approx(spec)?;
            let max_mean = (0..spec.num_stations())
                .map(|j| model.mean_queue(j))
                .fold(0.0f64, f64::max);
            sim.pmf_cap = ((10.0 * max_mean).ceil() as usize).clamp(50, 100_000);
        }
        Ok(sim)
    }
}

/// The reference experiment grid on the two-station preset: variability
/// cases A-C at `rho = (0.92, 0.98)`.
pub fn variability_experiment() -> ExperimentConfig {
    ExperimentConfig {
        network: NetworkSection::Preset {
            preset: PRESET_TWO_STATION.into(),
        },
        cases: vec![
            CaseConfig {
                label: "A".into(),
                rho: Some(vec![0.92, 0.98]),
                arrival_shapes: Some(vec![1.2, 1.3]),
                service_shapes: Some(vec![1.1, 1.25]),
            },
            CaseConfig {
                label: "B".into(),
                rho: Some(vec![0.92, 0.98]),
                arrival_shapes: Some(vec![0.75, 0.8]),
                service_shapes: Some(vec![0.95, 0.6]),
            },
            CaseConfig {
                label: "C".into(),
                rho: Some(vec![0.92, 0.98]),
                arrival_shapes: Some(vec![0.6, 0.45]),
                service_shapes: Some(vec![0.5, 0.4]),
            },
        ],
        sim: default_sim(),
        outputs: default_outputs(),
        quantile_levels: default_quantiles(),
        pmf_convention: PmfConvention::MassPreserving,
    }
}

/// The load-separation grid: case-B shapes, `rho_2 = 0.99`, `rho_1` swept.
pub fn separation_experiment() -> ExperimentConfig {
    let mut cfg = variability_experiment();
    cfg.cases = ["I", "II", "III", "IV"]
        .iter()
        .zip([0.99, 0.96, 0.90, 0.84])
        .map(|(label, rho1)| CaseConfig {
            label: (*label).into(),
            rho: Some(vec![rho1, 0.99]),
            arrival_shapes: Some(vec![0.75, 0.8]),
            service_shapes: Some(vec![0.95, 0.6]),
        })
        .collect();
    cfg
}
