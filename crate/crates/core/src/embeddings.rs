//! Embedding verifiers built as exact algebra over shared profiles: the
//! upper embedding of the weighted Lebesgue space into its grand relative,
//! local integrability with an explicitly assembled constant, the Sobolev
//! variant with its factor-4 slack, and an empirical boundedness probe for
//! the maximal operator.
//!
//! Every check evaluates both sides on the same epsilon grid and the same
//! cell data, so the inequalities hold cell-exactly and the tolerances only
//! absorb floating-point rounding. A failure is an implementation bug, not
//! discretization slack.

use crate::error::Error;
use crate::grid::{BoxDomain, GridFunction};
use crate::maximal::{maximal_field, MaximalConfig};
use crate::norms::{grand_norm_on_grid, lq_norm, EpsilonGrid};
use crate::numeric::NeumaierSum;
use crate::weights::{default_epsilon_grid, grandizer_exponent_search, weight_product, WeightSpec};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Two-sided comparison with the pass rule `lhs <= rhs (1 + tolerance)`.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub passed: bool,
    pub tolerance: f64,
}

impl EmbeddingReport {
    fn compare(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let ratio = if rhs == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        };
        EmbeddingReport {
            lhs,
            rhs,
            ratio,
            passed: lhs <= rhs * (1.0 + tolerance),
            tolerance,
        }
    }
}

/// Axis-aligned measurement region inside a box domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SubBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidDomain(
                "region bounds must be nonempty and of one dimension".into(),
            ));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "region bounds [{lo}, {hi}] are not an interval"
                )));
            }
        }
        Ok(SubBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Cells of the ambient grid whose centers fall in the region.
    pub fn covered_cells(&self, domain: &BoxDomain) -> Result<Vec<usize>> {
        if self.dim() != domain.dim() {
            return Err(Error::DomainMismatch);
        }
        let res = domain.resolution();
        let masks: Vec<Vec<bool>> = (0..domain.dim())
            .map(|k| {
                (0..res[k])
                    .map(|i| {
                        let c = domain.axis_center(k, i);
                        c >= self.lower[k] && c <= self.upper[k]
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        for idx in 0..domain.n_cells() {
            let mut rem = idx;
            let mut inside = true;
            for k in (0..domain.dim()).rev() {
                let i = rem % res[k];
                rem /= res[k];
                if !masks[k][i] {
                    inside = false;
                    break;
                }
            }
            if inside {
                out.push(idx);
            }
        }
        Ok(out)
    }
}

fn check_embedding_inputs(
    f: &GridFunction,
    w: &GridFunction,
    a: &GridFunction,
    q: f64,
) -> Result<()> {
    f.same_domain(w)?;
    f.same_domain(a)?;
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "embeddings need q > 1, got {q}"
        )));
    }
    Ok(())
}

/// Check `grand_norm(f) <= lq_norm(f) * grand_norm(a) / lq_norm(a)`, all
/// four norms on the same epsilon grid and cell data. Cell-wise Hölder makes
/// the inequality exact, so the tolerance is pure rounding; `f = a` gives
/// bitwise equality.
pub fn upper_embedding_check(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
) -> Result<EmbeddingReport> {
    check_embedding_inputs(f, w, a, q)?;
    let lq_a = lq_norm(a, q, Some(w))?;
    if lq_a == 0.0 {
        return Err(Error::InvalidWeight("grandizer has zero norm".into()));
    }
    if !lq_a.is_finite() {
        return Err(Error::DivergentEstimate(
            "grandizer norm is not finite".into(),
        ));
    }
    let grid = EpsilonGrid::standard(q)?;
    let lhs = grand_norm_on_grid(f, q, w, a, &grid)?.value;
    let grand_a = grand_norm_on_grid(a, q, w, a, &grid)?.value;
    let lq_f = lq_norm(f, q, Some(w))?;
    let rhs = (lq_f / lq_a) * grand_a;
    Ok(EmbeddingReport::compare(lhs, rhs, 1e-9))
}

/// Check `integral over E of |f| <= C grand_norm(f)` with the constant
/// assembled from its three factors: the class estimate of `w a^eps0` to the
/// `1/(q-eps0)`, the reciprocal of `(eps0 integral over E of w a^eps0)` to
/// the same power, and the measure of `E`. `eps0` comes from the exponent
/// search over the weight class; the class estimate is floored by the ratio
/// on `E` itself so the Hölder step stays cell-exact.
pub fn local_integrability_check(
    f: &GridFunction,
    region: &SubBox,
    q: f64,
    w: &WeightSpec,
    a: &WeightSpec,
    delta: f64,
) -> Result<EmbeddingReport> {
    let domain = f.domain();
    let choice = grandizer_exponent_search(
        w,
        a,
        q,
        delta,
        domain,
        &default_epsilon_grid(q, delta),
    )?;
    let eps0 = choice.epsilon;
    let p = q - eps0;

    let wa = weight_product(w, a, eps0, domain)?;
    let wa_field = wa.sample(domain)?;
    let cells = region.covered_cells(domain)?;
    if cells.is_empty() {
        return Err(Error::EmptyInput("region covers no cells"));
    }
    let cv = domain.cell_volume();
    let measure = cells.len() as f64 * cv;

    let mut f_sum = NeumaierSum::new();
    let mut wa_sum = NeumaierSum::new();
    let mut recip_sum = NeumaierSum::new();
    for &i in &cells {
        f_sum.add(f.value(i).abs());
        wa_sum.add(wa_field.value(i));
        recip_sum.add(wa_field.value(i).powf(-1.0 / (p - 1.0)));
    }
    let lhs = f_sum.total() * cv;
    let wa_integral = wa_sum.total() * cv;

    let avg_wa = wa_integral / measure;
    let avg_recip = recip_sum.total() * cv / measure;
    let region_ratio = avg_wa * avg_recip.powf(p - 1.0);
    let class_estimate = choice.estimate.max(region_ratio);

    let w_field = w.sample(domain)?;
    let a_field = a.sample(domain)?;
    let grid = EpsilonGrid::standard(q)?.with_point(eps0)?;
    let grand = grand_norm_on_grid(f, q, &w_field, &a_field, &grid)?.value;

    let c = measure * class_estimate.powf(1.0 / p) * (eps0 * wa_integral).powf(-1.0 / p);
    Ok(EmbeddingReport::compare(lhs, c * grand, 1e-9))
}

/// Check `grand_sobolev_sup(f) <= K_a * sobolev_norm(f)` with
/// `K_a = 4 grand_norm(a) / lq_norm(a)`; per-epsilon subadditivity plus
/// Hölder prove the inequality with the 4 as pure margin.
pub fn sobolev_embedding_check(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
) -> Result<EmbeddingReport> {
    check_embedding_inputs(f, w, a, q)?;
    let lq_a = lq_norm(a, q, Some(w))?;
    if lq_a == 0.0 {
        return Err(Error::InvalidWeight("grandizer has zero norm".into()));
    }
    let grid = EpsilonGrid::standard(q)?;
    let lhs = crate::norms::grand_sobolev_sup(f, q, w, a, &grid)?.value;
    let grand_a = grand_norm_on_grid(a, q, w, a, &grid)?.value;
    let k_a = 4.0 * grand_a / lq_a;
    let rhs = k_a * crate::norms::sobolev_norm(f, q, Some(w))?;
    Ok(EmbeddingReport::compare(lhs, rhs, 1e-9))
}

/// Empirical operator-norm probe over a family of fields.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    /// `grand_norm(M g) / grand_norm(g)` per family member, family order.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax_member: usize,
    /// Finiteness of every ratio; no reference constant exists to compare
    /// against.
    pub passed: bool,
    pub q: f64,
}

/// Ratio of grand norms before and after the maximal operator, maximized
/// over the family. The probe asserts finiteness only; stability under
/// refinement is the caller's cross-check.
pub fn maximal_boundedness_probe(
    family: &[GridFunction],
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    cfg: &MaximalConfig,
) -> Result<ProbeReport> {
    if family.is_empty() {
        return Err(Error::EmptyInput("probe family is empty"));
    }
    let grid = EpsilonGrid::standard(q)?;
    let mut ratios = Vec::with_capacity(family.len());
    for (i, g) in family.iter().enumerate() {
        check_embedding_inputs(g, w, a, q)?;
        let denom = grand_norm_on_grid(g, q, w, a, &grid)?.value;
        if denom == 0.0 {
            return Err(Error::PreconditionFailed(format!(
                "family member {i} has zero grand norm"
            )));
        }
        let mg = maximal_field(g, cfg)?;
        let numer = grand_norm_on_grid(&mg, q, w, a, &grid)?.value;
        ratios.push(numer / denom);
    }
    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax_member = 0;
    for (i, &r) in ratios.iter().enumerate() {
        if r > max_ratio {
            max_ratio = r;
            argmax_member = i;
        }
    }
    let passed = ratios.iter().all(|r| r.is_finite());
    Ok(ProbeReport {
        ratios,
        max_ratio,
        argmax_member,
        passed,
        q,
    })
}
