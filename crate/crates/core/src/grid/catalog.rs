//! Built-in test functions plus a parsed-expression escape hatch.
//!
//! Catalog entries are closed-form profiles with known smoothness, kink
//! locations, and (where defined) analytic gradients, so tests can pin
//! expected values without re-deriving them at every call site.

use super::{BoxDomain, GridFunction};
use crate::error::Error;
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogId {
    Constant,
    Linear,
    Power,
    Bump,
    Sine,
    Abs,
    Indicator,
    PowerWeight,
    ExpDecayWeight,
}

impl CatalogId {
    pub fn name(self) -> &'static str {
        match self {
            CatalogId::Constant => "constant",
            CatalogId::Linear => "linear",
            CatalogId::Power => "power",
            CatalogId::Bump => "bump",
            CatalogId::Sine => "sine",
            CatalogId::Abs => "abs",
            CatalogId::Indicator => "indicator",
            CatalogId::PowerWeight => "power-weight",
            CatalogId::ExpDecayWeight => "exp-decay-weight",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "constant" => CatalogId::Constant,
            "linear" => CatalogId::Linear,
            "power" => CatalogId::Power,
            "bump" => CatalogId::Bump,
            "sine" => CatalogId::Sine,
            "abs" => CatalogId::Abs,
            "indicator" => CatalogId::Indicator,
            "power-weight" => CatalogId::PowerWeight,
            "exp-decay-weight" => CatalogId::ExpDecayWeight,
            other => return Err(Error::UnknownCatalogId(other.to_string())),
        })
    }

    /// Expected parameter count in dimension `dim`.
    pub fn arity(self, dim: usize) -> usize {
        match self {
            CatalogId::Constant | CatalogId::Power | CatalogId::Abs => 1,
            CatalogId::PowerWeight | CatalogId::ExpDecayWeight => 1,
            CatalogId::Linear => dim + 1,
            CatalogId::Bump => dim + 2,
            CatalogId::Sine => 2,
            CatalogId::Indicator => 2 * dim,
        }
    }
}

/// A test function: either a catalog profile with parameters or a parsed
/// expression in the variables `x`, `y`, `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestFunctionSpec {
    Catalog { id: CatalogId, params: Vec<f64> },
    Custom { expr: String },
}

impl TestFunctionSpec {
    pub fn catalog(id: CatalogId, params: Vec<f64>) -> Self {
        TestFunctionSpec::Catalog { id, params }
    }

    pub fn custom(expr: impl Into<String>) -> Self {
        TestFunctionSpec::Custom { expr: expr.into() }
    }

    pub fn constant(c: f64) -> Self {
        Self::catalog(CatalogId::Constant, vec![c])
    }

    /// 1D convenience: `f(x) = slope * x + intercept`.
    pub fn linear_1d(intercept: f64, slope: f64) -> Self {
        Self::catalog(CatalogId::Linear, vec![intercept, slope])
    }

    pub fn describe(&self) -> String {
        match self {
            TestFunctionSpec::Catalog { id, params } => format!("{}{:?}", id.name(), params),
            TestFunctionSpec::Custom { expr } => format!("expr({expr})"),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunctionSpec::Catalog { id, params } => {
                let expected = id.arity(dim);
                if params.len() != expected {
                    return Err(Error::ArityMismatch {
                        id: id.name().to_string(),
                        expected,
                        got: params.len(),
                    });
                }
                match id {
                    CatalogId::Bump => {
                        if params[1] <= 0.0 {
                            return Err(Error::InvalidWeight("bump radius must be positive".into()));
                        }
                    }
                    CatalogId::ExpDecayWeight => {
                        if params[0] <= 0.0 {
                            return Err(Error::InvalidWeight(
                                "exp-decay rate must be positive".into(),
                            ));
                        }
                    }
                    CatalogId::Indicator => {
                        for k in 0..dim {
                            if params[2 * k] >= params[2 * k + 1] {
                                return Err(Error::InvalidWeight(format!(
                                    "indicator needs a < b on axis {k}"
                                )));
                            }
                        }
                    }
                    _ => {}
                }
                Ok(())
            }
            TestFunctionSpec::Custom { .. } => Ok(()),
        }
    }

    fn eval_catalog(id: CatalogId, params: &[f64], x: &[f64]) -> f64 {
        let dim = x.len();
        match id {
            CatalogId::Constant => params[0],
            CatalogId::Linear => {
                params[0]
                    + x.iter()
                        .zip(&params[1..])
                        .map(|(xi, ai)| ai * xi)
                        .sum::<f64>()
            }
            CatalogId::Power => norm2(x).powf(params[0]),
            CatalogId::Bump => {
                let (amp, radius) = (params[0], params[1]);
                let center = &params[2..2 + dim];
                let s2 = dist2(x, center) / (radius * radius);
                if s2 < 1.0 {
                    amp * (1.0 - 1.0 / (1.0 - s2)).exp()
                } else {
                    0.0
                }
            }
            CatalogId::Sine => {
                let (amp, k) = (params[0], params[1]);
                amp * x.iter().map(|xi| (k * xi).sin()).product::<f64>()
            }
            CatalogId::Abs => (x[0] - params[0]).abs(),
            CatalogId::Indicator => {
                let inside = (0..dim).all(|k| x[k] > params[2 * k] && x[k] < params[2 * k + 1]);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            CatalogId::PowerWeight => norm2(x).powf(params[0]),
            CatalogId::ExpDecayWeight => (-params[0] * norm2(x)).exp(),
        }
    }

    /// Evaluate at one point. Custom expressions are re-parsed per call; use
    /// [`sample`](Self::sample) for whole-grid evaluation.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.validate(x.len())?;
        match self {
            TestFunctionSpec::Catalog { id, params } => Ok(Self::eval_catalog(*id, params, x)),
            TestFunctionSpec::Custom { expr } => {
                let f = compile_expr(expr)?;
                Ok(f(pad3(x)))
            }
        }
    }

    /// Sample at every cell center of `domain`.
    pub fn sample(&self, domain: &BoxDomain) -> Result<GridFunction> {
        self.validate(domain.dim())?;
        match self {
            TestFunctionSpec::Catalog { id, params } => {
                let values: Vec<f64> = (0..domain.n_cells())
                    .map(|i| Self::eval_catalog(*id, params, &domain.center(i)))
                    .collect();
                GridFunction::from_values(domain.clone(), values)
            }
            TestFunctionSpec::Custom { expr } => {
                let f = compile_expr(expr)?;
                let values: Vec<f64> = (0..domain.n_cells())
                    .map(|i| f(pad3(&domain.center(i))))
                    .collect();
                GridFunction::from_values(domain.clone(), values)
            }
        }
    }

    /// Analytic gradient where one exists (None for jumps, kinks at the
    /// evaluation point, and custom expressions).
    pub fn analytic_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let TestFunctionSpec::Catalog { id, params } = self else {
            return None;
        };
        if self.validate(x.len()).is_err() {
            return None;
        }
        let dim = x.len();
        match id {
            CatalogId::Constant => Some(vec![0.0; dim]),
            CatalogId::Linear => Some(params[1..].to_vec()),
            CatalogId::Power => {
                let p = params[0];
                let r = norm2(x);
                if r == 0.0 {
                    if p >= 2.0 || p == 0.0 {
                        Some(vec![0.0; dim])
                    } else {
                        None
                    }
                } else {
                    Some(x.iter().map(|xi| p * r.powf(p - 2.0) * xi).collect())
                }
            }
            CatalogId::Bump => {
                let (amp, radius) = (params[0], params[1]);
                let center = &params[2..2 + dim];
                let r2 = radius * radius;
                let s2 = dist2(x, center) / r2;
                if s2 >= 1.0 {
                    return Some(vec![0.0; dim]);
                }
                let u = 1.0 - s2;
                let f = amp * (1.0 - 1.0 / u).exp();
                Some(
                    (0..dim)
                        .map(|k| -2.0 * f * (x[k] - center[k]) / (u * u * r2))
                        .collect(),
                )
            }
            CatalogId::Sine => {
                let (amp, k) = (params[0], params[1]);
                Some(
                    (0..dim)
                        .map(|i| {
                            let mut g = amp * k * (k * x[i]).cos();
                            for (j, xj) in x.iter().enumerate() {
                                if j != i {
                                    g *= (k * xj).sin();
                                }
                            }
                            g
                        })
                        .collect(),
                )
            }
            CatalogId::Abs => {
                let d = x[0] - params[0];
                if d == 0.0 {
                    None
                } else {
                    let mut g = vec![0.0; dim];
                    g[0] = d.signum();
                    Some(g)
                }
            }
            CatalogId::Indicator => None,
            CatalogId::PowerWeight => {
                TestFunctionSpec::catalog(CatalogId::Power, params.clone()).analytic_gradient(x)
            }
            CatalogId::ExpDecayWeight => {
                let lambda = params[0];
                let r = norm2(x);
                if r == 0.0 {
                    return None;
                }
                let f = (-lambda * r).exp();
                Some(x.iter().map(|xi| -lambda * f * xi / r).collect())
            }
        }
    }

    /// Infinitely differentiable on the whole box.
    pub fn is_smooth(&self) -> bool {
        match self {
            TestFunctionSpec::Catalog { id, params } => match id {
                CatalogId::Constant | CatalogId::Linear | CatalogId::Bump | CatalogId::Sine => true,
                CatalogId::Power | CatalogId::PowerWeight => {
                    params[0] == 0.0 || params[0] >= 2.0
                }
                CatalogId::Abs | CatalogId::Indicator | CatalogId::ExpDecayWeight => false,
            },
            TestFunctionSpec::Custom { .. } => false,
        }
    }

    /// Supported strictly inside every sufficiently large box.
    pub fn has_compact_support(&self) -> bool {
        matches!(
            self,
            TestFunctionSpec::Catalog {
                id: CatalogId::Bump,
                ..
            }
        )
    }

    /// Kink and jump abscissae for 1D profiles; empty for smooth entries.
    pub fn nonsmooth_points_1d(&self) -> Vec<f64> {
        match self {
            TestFunctionSpec::Catalog { id, params } => match id {
                CatalogId::Abs => vec![params[0]],
                CatalogId::Indicator => vec![params[0], params[1]],
                CatalogId::Power | CatalogId::PowerWeight => {
                    if params[0] != 0.0 && params[0] < 2.0 {
                        vec![0.0]
                    } else {
                        vec![]
                    }
                }
                CatalogId::ExpDecayWeight => vec![0.0],
                _ => vec![],
            },
            TestFunctionSpec::Custom { .. } => vec![],
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn pad3(x: &[f64]) -> (f64, f64, f64) {
    (
        x.first().copied().unwrap_or(0.0),
        x.get(1).copied().unwrap_or(0.0),
        x.get(2).copied().unwrap_or(0.0),
    )
}

fn compile_expr(src: &str) -> Result<impl Fn((f64, f64, f64)) -> f64> {
    let expr: meval::Expr = src
        .parse()
        .map_err(|e| Error::ExpressionParse(format!("{e}")))?;
    let f = expr
        .bind3("x", "y", "z")
        .map_err(|e| Error::ExpressionParse(format!("{e}")))?;
    Ok(move |(x, y, z)| f(x, y, z))
}

/// One row of the catalog listing.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static str,
    pub formula: &'static str,
    pub smooth: &'static str,
}

/// Static catalog table for the listing command.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "constant",
            params: "[c]",
            formula: "f(x) = c",
            smooth: "yes",
        },
        CatalogEntry {
            name: "linear",
            params: "[b, a1..a_dim]",
            formula: "f(x) = b + sum_i a_i x_i",
            smooth: "yes",
        },
        CatalogEntry {
            name: "power",
            params: "[p]",
            formula: "f(x) = |x|^p",
            smooth: "for p = 0 or p >= 2",
        },
        CatalogEntry {
            name: "bump",
            params: "[amp, radius, c1..c_dim]",
            formula: "f(x) = amp * exp(1 - 1/(1 - |x-c|^2/radius^2)) inside, 0 outside",
            smooth: "yes (compact support)",
        },
        CatalogEntry {
            name: "sine",
            params: "[amp, k]",
            formula: "f(x) = amp * prod_i sin(k x_i)",
            smooth: "yes",
        },
        CatalogEntry {
            name: "abs",
            params: "[c]",
            formula: "f(x) = |x_1 - c|",
            smooth: "kink at x_1 = c",
        },
        CatalogEntry {
            name: "indicator",
            params: "[a1, b1, .., a_dim, b_dim]",
            formula: "f(x) = 1 on the open box (a, b), else 0",
            smooth: "jumps at the box faces",
        },
        CatalogEntry {
            name: "power-weight",
            params: "[beta]",
            formula: "w(x) = |x|^beta",
            smooth: "smooth away from 0",
        },
        CatalogEntry {
            name: "exp-decay-weight",
            params: "[lambda]",
            formula: "w(x) = exp(-lambda |x|)",
            smooth: "kink at 0",
        },
        CatalogEntry {
            name: "custom",
            params: "expression string",
            formula: "any meval expression in x, y, z",
            smooth: "unknown",
        },
    ]
}

/// Random bump fully supported inside `domain`, margins away from the faces.
pub fn random_bump<R: Rng>(rng: &mut R, domain: &BoxDomain) -> TestFunctionSpec {
    let dim = domain.dim();
    let amp = rng.gen_range(0.5..2.0);
    let radius = domain.min_extent() * rng.gen_range(0.15..0.35);
    let mut params = vec![amp, radius];
    for k in 0..dim {
        let lo = domain.lower()[k] + radius * 1.05;
        let hi = domain.upper()[k] - radius * 1.05;
        params.push(if lo < hi {
            rng.gen_range(lo..hi)
        } else {
            0.5 * (domain.lower()[k] + domain.upper()[k])
        });
    }
    TestFunctionSpec::catalog(CatalogId::Bump, params)
}

/// Random sine profile with moderate frequency.
pub fn random_sine<R: Rng>(rng: &mut R) -> TestFunctionSpec {
    let amp = rng.gen_range(0.5..2.0);
    let k = rng.gen_range(1.0..6.0);
    TestFunctionSpec::catalog(CatalogId::Sine, vec![amp, k])
}

/// Random sub-box indicator strictly inside `domain`.
pub fn random_indicator<R: Rng>(rng: &mut R, domain: &BoxDomain) -> TestFunctionSpec {
    let dim = domain.dim();
    let mut params = Vec::with_capacity(2 * dim);
    for k in 0..dim {
        let (lo, hi) = (domain.lower()[k], domain.upper()[k]);
        let ext = hi - lo;
        let a = lo + ext * rng.gen_range(0.05..0.45);
        let b = a + ext * rng.gen_range(0.1..0.5);
        params.push(a);
        params.push(b.min(hi - 0.05 * ext));
    }
    TestFunctionSpec::catalog(CatalogId::Indicator, params)
}

/// Random smooth catalog member (bump or sine).
pub fn random_smooth<R: Rng>(rng: &mut R, domain: &BoxDomain) -> TestFunctionSpec {
    if rng.gen_bool(0.5) {
        random_bump(rng, domain)
    } else {
        random_sine(rng)
    }
}
