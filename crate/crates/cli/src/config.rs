//! Scenario configuration: one JSON file per run, strict about unknown keys
//! so a typo fails loudly instead of silently using a default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use grandlab_core::embeddings::SubBox;
use grandlab_core::grid::{BoxDomain, TestFunctionSpec};
use grandlab_core::hajlasz::PairStrategy;
use grandlab_core::maximal::{MaximalConfig, WindowShape};
use grandlab_core::weights::WeightSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Norm,
    GrandNorm,
    Maximal,
    Aq,
    HajlaszVerify,
    Hedberg,
    Poincare,
    Embed,
    Probe,
    Bench,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Norm => "norm",
            Scenario::GrandNorm => "grand-norm",
            Scenario::Maximal => "maximal",
            Scenario::Aq => "aq",
            Scenario::HajlaszVerify => "hajlasz-verify",
            Scenario::Hedberg => "hedberg",
            Scenario::Poincare => "poincare",
            Scenario::Embed => "embed",
            Scenario::Probe => "probe",
            Scenario::Bench => "bench",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<BoxDomain> {
        BoxDomain::new(&self.lower, &self.upper, &self.resolution)
            .map_err(|e| anyhow!("field `domain`: {e}"))
    }
}

/// Weight families addressable from a config file. Parameter arity is
/// checked here so the error can name the offending field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl WeightConfig {
    pub fn build(&self, field: &str) -> Result<WeightSpec> {
        let p = &self.params;
        match self.name.as_str() {
            "constant" => match p.len() {
                0 => Ok(WeightSpec::constant(1.0)),
                1 => Ok(WeightSpec::constant(p[0])),
                n => bail!("field `{field}`: constant takes params [c], got {n} values"),
            },
            "power" => match p.len() {
                1 => Ok(WeightSpec::power(p[0])),
                n if n >= 2 => Ok(WeightSpec::shifted_power(p[0], p[1..].to_vec())),
                _ => bail!("field `{field}`: power takes params [beta] or [beta, center...]"),
            },
            "exp-decay" => match p.len() {
                1 => Ok(WeightSpec::exp_decay(p[0])),
                n => bail!("field `{field}`: exp-decay takes params [rate], got {n} values"),
            },
            other => bail!(
                "field `{field}`: unknown weight `{other}` (expected constant, power, exp-decay)"
            ),
        }
    }
}

/// Everything a scenario might need, flat and mostly optional; each scenario
/// validates its own required subset so the error names the missing field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub domain: Option<DomainConfig>,
    pub function: Option<TestFunctionSpec>,
    /// Explicit gradient candidate for hajlasz-verify.
    pub gradient: Option<TestFunctionSpec>,
    /// Scale for the maximal-function gradient when `gradient` is absent.
    pub constant: Option<f64>,
    pub weight: Option<WeightConfig>,
    pub grandizer: Option<WeightConfig>,
    pub q: Option<f64>,
    pub t: Option<f64>,
    pub delta: Option<f64>,
    /// Size of a uniform epsilon grid; the standard grid when absent.
    pub epsilon_count: Option<usize>,
    pub pair_strategy: Option<PairStrategy>,
    pub c_bound: Option<f64>,
    pub sample_count: Option<usize>,
    pub truncation: Option<f64>,
    pub shape: Option<String>,
    pub radii: Option<Vec<f64>>,
    pub embedding: Option<String>,
    pub region: Option<SubBox>,
    pub family: Option<Vec<TestFunctionSpec>>,
    pub point: Option<Vec<f64>>,
    pub ball_center: Option<Vec<f64>>,
    pub ball_radius: Option<f64>,
    pub resolutions: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow!("config error: {e}"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        require(&self.domain, "domain")?.build()
    }

    pub fn function(&self) -> Result<&TestFunctionSpec> {
        require(&self.function, "function")
    }

    pub fn q(&self) -> Result<f64> {
        Ok(*require(&self.q, "q")?)
    }

    /// Weight-style field as a spec, constant 1 when absent.
    pub fn weight_spec(&self, field: &str) -> Result<WeightSpec> {
        let slot = match field {
            "weight" => &self.weight,
            _ => &self.grandizer,
        };
        match slot {
            Some(cfg) => cfg.build(field),
            None => Ok(WeightSpec::constant(1.0)),
        }
    }

    /// Maximal-operator window from the truncation / shape / radii fields.
    pub fn maximal_config(&self) -> Result<MaximalConfig> {
        let mut cfg = match self.truncation {
            Some(t) => MaximalConfig::truncated(t),
            None => MaximalConfig::untruncated(),
        };
        if let Some(shape) = &self.shape {
            cfg = cfg.with_shape(match shape.as_str() {
                "ball" => WindowShape::Ball,
                "cube" => WindowShape::Cube,
                other => bail!("field `shape`: expected ball or cube, got `{other}`"),
            });
        }
        if let Some(radii) = &self.radii {
            if radii.is_empty() {
                bail!("field `radii`: radius grid must be nonempty");
            }
            cfg = cfg.with_radii(radii.clone());
        }
        Ok(cfg)
    }
}

pub fn require<'a, T>(slot: &'a Option<T>, name: &str) -> Result<&'a T> {
    slot.as_ref()
        .ok_or_else(|| anyhow!("missing field `{name}`"))
}
