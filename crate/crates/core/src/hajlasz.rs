//! Pointwise characterization machinery: Riesz potentials over balls, the
//! ball-average pointwise estimate, the Hedberg-style bound by the truncated
//! maximal value, maximal-gradient construction, pair-sampled verification of
//! the two-point inequality `|f(x)-f(y)| <= |x-y| (g(x)+g(y))`, the converse
//! derivative bound, and scalar Lipschitz extension.
//!
//! Pair admissibility is the one-sided containment `B(x, 3|x-y|)` inside the
//! box, tested exactly against the box bounds. Null-set language becomes an
//! explicit finite exclusion list (kink cells, jump-adjacent cells); reports
//! carry it rather than an inflated tolerance.

use crate::error::Error;
use crate::grid::{Ball, BoxDomain, GridFunction};
use crate::maximal::{maximal_at, maximal_field, MaximalConfig, WindowShape, DEFAULT_RADIUS_RATIO};
use crate::numeric::{self, NeumaierSum};
use crate::report::VerificationReport;
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Visit cells whose centers lie in `B(center, r)`, passing the squared
/// distance from the cell center to `pole` (the kernel's singularity, which
/// need not be the ball center).
fn for_cells_in_ball(
    domain: &BoxDomain,
    center: &[f64],
    r: f64,
    pole: &[f64],
    visit: &mut impl FnMut(usize, f64),
) {
    match domain.dim() {
        1 => {
            if let Some((lo, hi)) = domain.axis_range(0, center[0], r) {
                for i in lo..=hi {
                    let d = domain.axis_center(0, i) - pole[0];
                    visit(i, d * d);
                }
            }
        }
        2 => {
            let n1 = domain.resolution()[1];
            let Some((lo0, hi0)) = domain.axis_range(0, center[0], r) else {
                return;
            };
            for i0 in lo0..=hi0 {
                let c0 = domain.axis_center(0, i0);
                let rem = r * r - (c0 - center[0]) * (c0 - center[0]);
                if rem < 0.0 {
                    continue;
                }
                let p0 = c0 - pole[0];
                if let Some((lo1, hi1)) = domain.axis_range(1, center[1], rem.sqrt()) {
                    for i1 in lo1..=hi1 {
                        let p1 = domain.axis_center(1, i1) - pole[1];
                        visit(i0 * n1 + i1, p0 * p0 + p1 * p1);
                    }
                }
            }
        }
        3 => {
            let res = domain.resolution();
            let (n1, n2) = (res[1], res[2]);
            let Some((lo0, hi0)) = domain.axis_range(0, center[0], r) else {
                return;
            };
            for i0 in lo0..=hi0 {
                let c0 = domain.axis_center(0, i0);
                let rem0 = r * r - (c0 - center[0]) * (c0 - center[0]);
                if rem0 < 0.0 {
                    continue;
                }
                let p0 = c0 - pole[0];
                let Some((lo1, hi1)) = domain.axis_range(1, center[1], rem0.sqrt()) else {
                    continue;
                };
                for i1 in lo1..=hi1 {
                    let c1 = domain.axis_center(1, i1);
                    let rem1 = rem0 - (c1 - center[1]) * (c1 - center[1]);
                    if rem1 < 0.0 {
                        continue;
                    }
                    let p1 = c1 - pole[1];
                    if let Some((lo2, hi2)) = domain.axis_range(2, center[2], rem1.sqrt()) {
                        for i2 in lo2..=hi2 {
                            let p2 = domain.axis_center(2, i2) - pole[2];
                            visit(
                                (i0 * n1 + i1) * n2 + i2,
                                p0 * p0 + p1 * p1 + p2 * p2,
                            );
                        }
                    }
                }
            }
        }
        _ => unreachable!("domains are 1 to 3 dimensional"),
    }
}

/// Exact integral of `1/sqrt(u^2+v^2)` over `[0,p] x [0,q]`.
fn corner_kernel_integral(p: f64, q: f64) -> f64 {
    if p <= 0.0 || q <= 0.0 {
        0.0
    } else {
        p * (q / p).asinh() + q * (p / q).asinh()
    }
}

/// Integral of `|x-y|^(1-n)` over the cell `idx` containing the pole `x`.
/// 1D: the kernel is 1, so the cell length. 2D: the four corner rectangles
/// around the pole in closed form. 3D: the volume-equivalent ball around the
/// pole, `4 pi rho` with `rho = (3 vol / 4 pi)^(1/3)`.
fn singular_cell_kernel_integral(domain: &BoxDomain, x: &[f64], idx: usize) -> f64 {
    match domain.dim() {
        1 => domain.spacing(0),
        2 => {
            let mi = domain.to_multi(idx);
            let mut total = 0.0;
            let lo0 = domain.lower()[0] + mi[0] as f64 * domain.spacing(0);
            let lo1 = domain.lower()[1] + mi[1] as f64 * domain.spacing(1);
            let side0 = [(x[0] - lo0).max(0.0), (lo0 + domain.spacing(0) - x[0]).max(0.0)];
            let side1 = [(x[1] - lo1).max(0.0), (lo1 + domain.spacing(1) - x[1]).max(0.0)];
            for &p in &side0 {
                for &q in &side1 {
                    total += corner_kernel_integral(p, q);
                }
            }
            total
        }
        3 => {
            let rho = (3.0 * domain.cell_volume() / (4.0 * std::f64::consts::PI)).cbrt();
            4.0 * std::f64::consts::PI * rho
        }
        _ => unreachable!(),
    }
}

/// Riesz potential `integral over B of |g(y)| / |x-y|^(n-1) dy` by midpoint
/// quadrature, with the cell containing `x` integrated against the kernel in
/// closed form. Cells outside the box count as zero.
pub fn riesz_potential(g: &GridFunction, x: &[f64], ball: &Ball) -> Result<f64> {
    let domain = g.domain();
    if ball.dim() != domain.dim() || x.len() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    if !ball.contains(x) {
        return Err(Error::PointOutsideDomain(x.to_vec()));
    }
    let singular = domain.cell_of(x);
    let dim = domain.dim();
    let mut acc = NeumaierSum::new();
    for_cells_in_ball(domain, &ball.center, ball.radius, x, &mut |idx, d2| {
        if Some(idx) == singular {
            return;
        }
        let kernel = match dim {
            1 => 1.0,
            2 => 1.0 / d2.sqrt(),
            _ => 1.0 / d2,
        };
        acc.add(g.value(idx).abs() * kernel);
    });
    let mut total = acc.total() * domain.cell_volume();
    if let Some(idx) = singular {
        total += g.value(idx).abs() * singular_cell_kernel_integral(domain, x, idx);
    }
    Ok(total)
}

/// Empirical constant for the ball-average estimate: the max over sampled
/// cells `x` in `B` of `|f(x) - f_B| / riesz_potential(|grad f|, x, B)`,
/// where `f_B` is the mean of `f` over the covered cells (both sides of the
/// average on the same discrete measure, so a constant field deviates by
/// rounding only). Numerators below the accumulation floor count as zero;
/// samples with a 0/0 ratio are skipped; a constant `f` yields 0.
pub fn poincare_pointwise_check(
    f: &GridFunction,
    ball: &Ball,
    sample_count: usize,
) -> Result<f64> {
    let domain = f.domain();
    if ball.dim() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    if !domain.ball_inside(&ball.center, ball.radius) {
        return Err(Error::PreconditionFailed(format!(
            "ball of radius {} at {:?} extends outside the box",
            ball.radius, ball.center
        )));
    }
    if sample_count == 0 {
        return Err(Error::EmptyInput("sample count must be positive"));
    }
    let grad = f.gradient_magnitude()?;
    let mut covered = Vec::new();
    for_cells_in_ball(domain, &ball.center, ball.radius, &ball.center, &mut |idx, _| {
        covered.push(idx)
    });
    if covered.is_empty() {
        return Err(Error::EmptyInput("ball covers no cells"));
    }
    let mut sum = NeumaierSum::new();
    for &idx in &covered {
        sum.add(f.value(idx));
    }
    let f_b = sum.total() / covered.len() as f64;
    let floor = covered.len() as f64 * f64::EPSILON * f.max_abs();
    let step = (covered.len() / sample_count).max(1);
    let samples: Vec<usize> = covered.iter().copied().step_by(step).collect();
    let ratios: Vec<Option<f64>> = samples
        .par_iter()
        .map(|&idx| {
            let mut num = (f.value(idx) - f_b).abs();
            if num <= floor {
                num = 0.0;
            }
            let pot = riesz_potential(&grad, &domain.center(idx), ball).ok()?;
            if pot == 0.0 {
                if num == 0.0 {
                    None
                } else {
                    Some(f64::INFINITY)
                }
            } else {
                Some(num / pot)
            }
        })
        .collect();
    Ok(ratios.into_iter().flatten().fold(0.0, f64::max))
}

/// Check that the Riesz potential over `B(x,t)` is bounded by
/// `2^n omega_n t M_t(|grad f|)(x)`, with 5% slack for quadrature error.
/// The maximal value is taken over the geometric shell radii
/// `t, t/2^(1/4), ...` down to `max(h, t/64)`.
pub fn hedberg_check(f: &GridFunction, x: &[f64], t: f64) -> Result<VerificationReport> {
    let domain = f.domain();
    if x.len() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    if !domain.contains(x) {
        return Err(Error::PointOutsideDomain(x.to_vec()));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidRadiusGrid(format!("truncation {t}")));
    }
    let h = domain.max_spacing();
    if t < h {
        return Err(Error::PreconditionFailed(format!(
            "truncation {t} below the cell spacing {h}"
        )));
    }
    let grad = f.gradient_magnitude()?;
    let lhs = riesz_potential(&grad, x, &Ball::new(x.to_vec(), t)?)?;

    let floor = h.max(t / 64.0) * (1.0 - 1e-9);
    let mut shells = Vec::new();
    let mut r = t;
    while r >= floor {
        shells.push(r);
        r /= DEFAULT_RADIUS_RATIO;
    }
    shells.reverse();
    let cfg = MaximalConfig::truncated(t)
        .with_shape(WindowShape::Ball)
        .with_radii(shells);
    let m = maximal_at(&grad, x, &cfg)?;
    let dim = domain.dim();
    let rhs = (1u32 << dim) as f64 * numeric::unit_ball_volume(dim) * t * m;

    let mut report = VerificationReport::new(
        "Riesz potential bounded by the truncated maximal value",
        0.05,
    );
    report.constant("potential", lhs);
    report.constant("maximal_bound", rhs);
    report.constant("ratio", if rhs > 0.0 { lhs / rhs } else { 0.0 });
    report.record(format!("x {x:?}, t {t}"), lhs, rhs);
    Ok(report)
}

/// The candidate pointwise gradient `c * M(|grad f|)` for the two-point
/// inequality; the caller chooses `c` and the maximal window setup.
pub fn hajlasz_gradient(f: &GridFunction, c: f64, cfg: &MaximalConfig) -> Result<GridFunction> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "gradient scale {c} must be a nonnegative real"
        )));
    }
    let grad = f.gradient_magnitude()?;
    maximal_field(&grad, cfg)?.map(|v| c * v)
}

/// How a pair sample is drawn. Uniform sampling rejects inadmissible draws;
/// the nearest-neighbor stratum keeps every axis-adjacent pair and flags
/// admissibility, since those pairs make the two-point inequality tightest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum PairStrategy {
    Uniform { count: usize, seed: u64 },
    NearestNeighbor,
    Combined { count: usize, seed: u64 },
}

/// Sampled point pairs with the one-sided ball-containment flag
/// `B(x, 3|x-y|)` inside the box, anchored at the first point.
#[derive(Clone, Debug)]
pub struct PairSample {
    domain: BoxDomain,
    pairs: Vec<(usize, usize)>,
    admissible: Vec<bool>,
    strategy: PairStrategy,
}

fn pair_distance(domain: &BoxDomain, i: usize, j: usize) -> f64 {
    if domain.dim() == 1 {
        (domain.axis_center(0, i) - domain.axis_center(0, j)).abs()
    } else {
        let (a, b) = (domain.center(i), domain.center(j));
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

fn pair_admissible(domain: &BoxDomain, i: usize, j: usize) -> bool {
    let d = pair_distance(domain, i, j);
    d > 0.0 && domain.ball_inside(&domain.center(i), 3.0 * d)
}

impl PairSample {
    pub fn build(domain: &BoxDomain, strategy: PairStrategy) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut admissible = Vec::new();
        match strategy {
            PairStrategy::Uniform { count, seed } => {
                Self::draw_uniform(domain, count, seed, &mut pairs, &mut admissible)?;
            }
            PairStrategy::NearestNeighbor => {
                Self::push_neighbors(domain, &mut pairs, &mut admissible);
            }
            PairStrategy::Combined { count, seed } => {
                Self::push_neighbors(domain, &mut pairs, &mut admissible);
                Self::draw_uniform(domain, count, seed, &mut pairs, &mut admissible)?;
            }
        }
        if !admissible.iter().any(|&a| a) {
            return Err(Error::EmptyInput("no admissible pairs in the sample"));
        }
        Ok(Self {
            domain: domain.clone(),
            pairs,
            admissible,
            strategy,
        })
    }

    fn draw_uniform(
        domain: &BoxDomain,
        count: usize,
        seed: u64,
        pairs: &mut Vec<(usize, usize)>,
        admissible: &mut Vec<bool>,
    ) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let n = domain.n_cells();
        if n < 2 {
            return Err(Error::EmptyInput("domain has fewer than two cells"));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let budget = 1000 + 200 * count;
        let mut accepted = 0;
        for _ in 0..budget {
            if accepted == count {
                break;
            }
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i == j || !pair_admissible(domain, i, j) {
                continue;
            }
            pairs.push((i, j));
            admissible.push(true);
            accepted += 1;
        }
        Ok(())
    }

    fn push_neighbors(
        domain: &BoxDomain,
        pairs: &mut Vec<(usize, usize)>,
        admissible: &mut Vec<bool>,
    ) {
        let res = domain.resolution().to_vec();
        let dim = domain.dim();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * res[k + 1];
        }
        for idx in 0..domain.n_cells() {
            let mi = domain.to_multi(idx);
            for k in 0..dim {
                if mi[k] + 1 < res[k] {
                    let j = idx + strides[k];
                    pairs.push((idx, j));
                    admissible.push(pair_admissible(domain, idx, j));
                }
            }
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn admissible(&self) -> &[bool] {
        &self.admissible
    }

    pub fn strategy(&self) -> &PairStrategy {
        &self.strategy
    }

    pub fn n_admissible(&self) -> usize {
        self.admissible.iter().filter(|&&a| a).count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairViolation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ratio: f64,
}

/// Result of sweeping the two-point inequality over a pair sample.
#[derive(Clone, Debug, Serialize)]
pub struct HajlaszReport {
    /// Max over admissible pairs of `|f(x)-f(y)| / (|x-y| (g(x)+g(y)))`,
    /// with 0/0 counted as 0.
    pub minimal_constant: f64,
    pub n_pairs: usize,
    pub n_admissible: usize,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    /// Pairs whose ratio exceeds the supplied bound, capped at 1000.
    pub violations: Vec<PairViolation>,
    pub strategy: PairStrategy,
}

/// Sweep `|f(x)-f(y)| <= |x-y| (g(x)+g(y))` over the admissible pairs.
/// `c_bound`, when given, fills the violation list with pairs whose ratio
/// exceeds it.
pub fn verify_pointwise(
    f: &GridFunction,
    g: &GridFunction,
    sample: &PairSample,
    c_bound: Option<f64>,
) -> Result<HajlaszReport> {
    f.same_domain(g)?;
    if f.domain() != sample.domain() {
        return Err(Error::DomainMismatch);
    }
    let domain = f.domain();
    let ratios: Vec<Option<f64>> = sample
        .pairs
        .par_iter()
        .zip(&sample.admissible)
        .map(|(&(i, j), &adm)| {
            if !adm {
                return None;
            }
            let num = (f.value(i) - f.value(j)).abs();
            let den = pair_distance(domain, i, j) * (g.value(i) + g.value(j));
            Some(if num == 0.0 {
                0.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            })
        })
        .collect();

    let mut minimal = 0.0f64;
    let mut worst: Option<usize> = None;
    let mut violations = Vec::new();
    for (k, ratio) in ratios.iter().enumerate() {
        let Some(ratio) = *ratio else { continue };
        if ratio > minimal {
            minimal = ratio;
            worst = Some(k);
        }
        if let Some(c) = c_bound {
            if ratio > c * (1.0 + 1e-9) && violations.len() < 1000 {
                let (i, j) = sample.pairs[k];
                violations.push(PairViolation {
                    x: domain.center(i),
                    y: domain.center(j),
                    ratio,
                });
            }
        }
    }
    let worst_pair = worst.map(|k| {
        let (i, j) = sample.pairs[k];
        (domain.center(i), domain.center(j))
    });
    Ok(HajlaszReport {
        minimal_constant: minimal,
        n_pairs: sample.pairs.len(),
        n_admissible: sample.n_admissible(),
        worst_pair,
        violations,
        strategy: sample.strategy.clone(),
    })
}

/// 1D cells whose closed interval contains one of the given points; the
/// exclusion list for almost-everywhere statements around kinks.
pub fn kink_exclusion_cells(domain: &BoxDomain, points: &[f64]) -> Result<Vec<usize>> {
    if domain.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            op: "kink_exclusion_cells",
            got: domain.dim(),
            supported: "1",
        });
    }
    let h = domain.spacing(0);
    let mut out = Vec::new();
    for &p in points {
        let guess = ((p - domain.lower()[0]) / h - 0.5).round() as i64;
        for cand in guess - 1..=guess + 1 {
            if cand < 0 || cand >= domain.resolution()[0] as i64 {
                continue;
            }
            let c = domain.axis_center(0, cand as usize);
            if (c - p).abs() <= 0.5 * h * (1.0 + 1e-9) {
                out.push(cand as usize);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Converse bound in 1D: once `(f, g/c)` satisfies the two-point inequality
/// with constant at most 1, central differences obey
/// `|f'(x)| <= 2 g(x) + tau(h)` away from the excluded cells, where
/// `tau = Lambda h` and `Lambda` is the largest second difference over the
/// non-excluded interior.
pub fn derivative_bound_check(
    f: &GridFunction,
    g: &GridFunction,
    c: f64,
    excluded: &[usize],
) -> Result<VerificationReport> {
    let domain = f.domain();
    if domain.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            op: "derivative_bound_check",
            got: domain.dim(),
            supported: "1",
        });
    }
    f.same_domain(g)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "scale {c} must be a positive real"
        )));
    }
    let n = domain.n_cells();
    if n < 3 {
        return Err(Error::ResolutionTooSmall {
            op: "derivative_bound_check",
            need: 3,
        });
    }

    let scaled = g.map(|v| v / c)?;
    let sample = PairSample::build(
        domain,
        PairStrategy::Combined {
            count: 2000,
            seed: 0x9e37_79b9_7f4a_7c15,
        },
    )?;
    let pre = verify_pointwise(f, &scaled, &sample, None)?;
    if !(pre.minimal_constant <= 1.0 + 1e-9) {
        return Err(Error::PreconditionFailed(format!(
            "two-point inequality fails for g/c: minimal constant {}",
            pre.minimal_constant
        )));
    }

    let h = domain.spacing(0);
    let mut excl = vec![false; n];
    for &i in excluded {
        if i < n {
            excl[i] = true;
        }
    }
    let mut lambda = 0.0f64;
    for i in 1..n - 1 {
        if excl[i - 1] || excl[i] || excl[i + 1] {
            continue;
        }
        let second = (f.value(i + 1) - 2.0 * f.value(i) + f.value(i - 1)).abs() / (h * h);
        lambda = lambda.max(second);
    }
    let tau = lambda * h;

    let mut report =
        VerificationReport::new("central differences bounded by twice the gradient", 1e-12);
    report.constant("lambda", lambda);
    report.constant("tau", tau);
    for i in 1..n - 1 {
        if excl[i] {
            continue;
        }
        let deriv = (f.value(i + 1) - f.value(i - 1)).abs() / (2.0 * h);
        report.record(
            format!("cell {i}"),
            deriv,
            2.0 * g.value(i) + tau,
        );
    }
    Ok(report)
}

/// Scalar Lipschitz extension by the infimal formula
/// `min_i (v_i + L |x - p_i|)`; exact on the data points and globally
/// L-Lipschitz.
#[derive(Clone, Debug)]
pub struct McShaneExtension {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    l: f64,
}

impl McShaneExtension {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.values)
            .map(|(p, v)| v + self.l * euclidean(x, p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.l
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn mcshane_extend(points: &[Vec<f64>], values: &[f64], l: f64) -> Result<McShaneExtension> {
    if points.is_empty() {
        return Err(Error::EmptyInput("extension needs at least one point"));
    }
    if points.len() != values.len() {
        return Err(Error::ValueCountMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "Lipschitz constant {l} must be a nonnegative real"
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::PreconditionFailed(
            "extension data must be finite and of one dimension".into(),
        ));
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let diff = (values[i] - values[j]).abs();
            let dist = euclidean(&points[i], &points[j]);
            if diff > l * dist * (1.0 + 1e-12) {
                return Err(Error::LipschitzViolation { i, j, diff, dist });
            }
        }
    }
    Ok(McShaneExtension {
        points: points.to_vec(),
        values: values.to_vec(),
        l,
    })
}

/// Mask of cells where `g <= level`; masks are nested in the level.
pub fn truncation_sets(g: &GridFunction, level: f64) -> Vec<bool> {
    g.values().iter().map(|&v| v <= level).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CatalogId, TestFunctionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn riesz_kernel_is_flat_in_1d() {
        let d = BoxDomain::line(-1.0, 1.0, 1024).unwrap();
        let g = GridFunction::constant(d, 1.0).unwrap();
        let v = riesz_potential(&g, &[0.0], &Ball::new(vec![0.0], 1.0).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn riesz_matches_polar_value_in_2d() {
        let d = BoxDomain::square(-1.0, 1.0, 1024).unwrap();
        let g = GridFunction::constant(d, 1.0).unwrap();
        let v = riesz_potential(&g, &[0.0, 0.0], &Ball::new(vec![0.0, 0.0], 1.0).unwrap())
            .unwrap();
        let exact = 2.0 * std::f64::consts::PI;
        assert!((v - exact).abs() < 0.01 * exact, "{v} vs {exact}");
    }

    #[test]
    fn riesz_matches_radial_value_in_3d() {
        let d = BoxDomain::new(&[-1.0; 3], &[1.0; 3], &[48; 3]).unwrap();
        let g = GridFunction::constant(d, 1.0).unwrap();
        let v = riesz_potential(&g, &[0.0; 3], &Ball::new(vec![0.0; 3], 1.0).unwrap()).unwrap();
        let exact = 4.0 * std::f64::consts::PI;
        assert!((v - exact).abs() < 0.05 * exact, "{v} vs {exact}");
    }

    #[test]
    fn riesz_zero_monotone_additive() {
        let d = BoxDomain::line(-1.0, 1.0, 256).unwrap();
        let ball = Ball::new(vec![0.1], 0.7).unwrap();
        let zero = GridFunction::constant(d.clone(), 0.0).unwrap();
        assert_eq!(riesz_potential(&zero, &[0.2], &ball).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g1 = GridFunction::from_values(
            d.clone(),
            (0..256).map(|_| rng.gen_range(0.0..2.0)).collect(),
        )
        .unwrap();
        let g2 = GridFunction::from_values(
            d.clone(),
            (0..256).map(|_| rng.gen_range(0.0..2.0)).collect(),
        )
        .unwrap();
        let sum = g1.zip_with(&g2, |a, b| a + b).unwrap();
        let (v1, v2, vs) = (
            riesz_potential(&g1, &[0.2], &ball).unwrap(),
            riesz_potential(&g2, &[0.2], &ball).unwrap(),
            riesz_potential(&sum, &[0.2], &ball).unwrap(),
        );
        assert!((vs - (v1 + v2)).abs() < 1e-12 * vs);
        assert!(v1 <= vs);
    }

    #[test]
    fn riesz_rejects_pole_outside_ball() {
        let d = BoxDomain::line(-1.0, 1.0, 64).unwrap();
        let g = GridFunction::constant(d, 1.0).unwrap();
        let e = riesz_potential(&g, &[0.9], &Ball::new(vec![0.0], 0.5).unwrap());
        assert!(matches!(e, Err(Error::PointOutsideDomain(_))));
    }

    #[test]
    fn poincare_constant_for_linear_function_is_half() {
        let d = BoxDomain::line(-1.0, 1.0, 2048).unwrap();
        let f = GridFunction::from_fn(d, |p| p[0]).unwrap();
        let ball = Ball::new(vec![0.0], 0.99).unwrap();
        let c = poincare_pointwise_check(&f, &ball, 400).unwrap();
        assert!((c - 0.5).abs() < 0.01, "{c}");
    }

    #[test]
    fn poincare_constant_function_gives_zero() {
        let d = BoxDomain::line(-1.0, 1.0, 128).unwrap();
        let f = GridFunction::constant(d, 3.0).unwrap();
        let ball = Ball::new(vec![0.0], 0.9).unwrap();
        assert_eq!(poincare_pointwise_check(&f, &ball, 32).unwrap(), 0.0);
    }

    #[test]
    fn poincare_2d_stable_under_refinement() {
        let spec = TestFunctionSpec::catalog(CatalogId::Bump, vec![1.0, 0.8, 0.0, 0.0]);
        let ball = Ball::new(vec![0.0, 0.0], 0.9).unwrap();
        let mut values = Vec::new();
        for res in [128usize, 256] {
            let d = BoxDomain::square(-1.0, 1.0, res).unwrap();
            let f = spec.sample(&d).unwrap();
            values.push(poincare_pointwise_check(&f, &ball, 64).unwrap());
        }
        let (a, b) = (values[0], values[1]);
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() <= 0.10 * b.max(a), "{a} vs {b}");
    }

    #[test]
    fn hedberg_ratio_for_plateau_ramp() {
        let d = BoxDomain::line(-2.0, 2.0, 4096).unwrap();
        let f = GridFunction::from_fn(d, |p| p[0].clamp(0.0, 1.0)).unwrap();
        let report = hedberg_check(&f, &[0.5], 1.0).unwrap();
        assert!(report.passed);
        let ratio = report
            .constants
            .iter()
            .find(|(n, _)| n == "ratio")
            .unwrap()
            .1;
        assert!((0.23..=0.26).contains(&ratio), "{ratio}");
    }

    #[test]
    fn hedberg_zero_gradient_passes() {
        let d = BoxDomain::line(-1.0, 1.0, 256).unwrap();
        let f = GridFunction::constant(d, 5.0).unwrap();
        let report = hedberg_check(&f, &[0.25], 0.5).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn hedberg_on_random_2d_points() {
        let d = BoxDomain::square(-1.0, 1.0, 256).unwrap();
        let f = TestFunctionSpec::catalog(CatalogId::Bump, vec![1.0, 0.7, 0.1, -0.1])
            .sample(&d)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let t = rng.gen_range(0.1..0.5);
            let report = hedberg_check(&f, &x, t).unwrap();
            assert!(report.passed, "x {x:?} t {t}: worst {}", report.worst_ratio);
        }
    }

    #[test]
    fn maximal_gradient_of_linear_function_is_half() {
        let d = BoxDomain::line(-1.0, 1.0, 1024).unwrap();
        let h = d.spacing(0);
        let f = GridFunction::from_fn(d.clone(), |p| p[0]).unwrap();
        let mut radii = vec![64.0 * h];
        while *radii.last().unwrap() < d.diameter() {
            let next = radii.last().unwrap() * DEFAULT_RADIUS_RATIO;
            radii.push(next);
        }
        let cfg = MaximalConfig::untruncated()
            .with_shape(WindowShape::Ball)
            .with_radii(radii);
        let g = hajlasz_gradient(&f, 0.5, &cfg).unwrap();
        // Away from the boundary the smallest window dominates and averages
        // the constant field 1 with at most a one-cell surplus.
        for i in 256..768 {
            let v = g.value(i);
            assert!((0.5..=0.505).contains(&v), "cell {i}: {v}");
        }
    }

    #[test]
    fn linear_pair_ratios_are_exactly_one() {
        let d = BoxDomain::line(-1.0, 1.0, 512).unwrap();
        let f = GridFunction::from_fn(d.clone(), |p| p[0]).unwrap();
        let g = GridFunction::constant(d.clone(), 0.5).unwrap();
        let sample = PairSample::build(
            &d,
            PairStrategy::Combined {
                count: 2000,
                seed: 42,
            },
        )
        .unwrap();
        let report = verify_pointwise(&f, &g, &sample, None).unwrap();
        assert_eq!(report.minimal_constant, 1.0);
        assert!(report.n_admissible > 0);
    }

    #[test]
    fn jump_function_has_no_bounded_gradient() {
        let d = BoxDomain::line(-1.0, 1.0, 1024).unwrap();
        let f = GridFunction::from_fn(d.clone(), |p| if p[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let g = GridFunction::constant(d.clone(), 1.0).unwrap();
        let sample = PairSample::build(&d, PairStrategy::NearestNeighbor).unwrap();
        let report = verify_pointwise(&f, &g, &sample, Some(10.0)).unwrap();
        assert!(report.minimal_constant > 10.0, "{}", report.minimal_constant);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn sine_roundtrip_stays_below_the_forward_constant() {
        let d = BoxDomain::line(-std::f64::consts::PI, std::f64::consts::PI, 1024).unwrap();
        let f = TestFunctionSpec::catalog(CatalogId::Sine, vec![1.0, 1.0])
            .sample(&d)
            .unwrap();
        let c_hat = poincare_pointwise_check(&f, &d.inscribed_ball(), 200).unwrap();
        let c_star = 3.0 * c_hat * numeric::unit_ball_volume(1);
        let cfg = MaximalConfig::untruncated().with_shape(WindowShape::Ball);
        let g = hajlasz_gradient(&f, c_star, &cfg).unwrap();
        let sample = PairSample::build(
            &d,
            PairStrategy::Uniform {
                count: 10_000,
                seed: 1234,
            },
        )
        .unwrap();
        let report = verify_pointwise(&f, &g, &sample, Some(1.0)).unwrap();
        assert!(
            report.minimal_constant <= 1.15,
            "minimal constant {}",
            report.minimal_constant
        );
    }

    #[test]
    fn pair_admissibility_is_reproducible_and_exact() {
        let d = BoxDomain::line(-1.0, 1.0, 256).unwrap();
        let s1 = PairSample::build(&d, PairStrategy::Uniform { count: 500, seed: 9 }).unwrap();
        let s2 = PairSample::build(&d, PairStrategy::Uniform { count: 500, seed: 9 }).unwrap();
        assert_eq!(s1.pairs(), s2.pairs());
        for (&(i, j), &adm) in s1.pairs().iter().zip(s1.admissible()) {
            assert!(i != j);
            assert_eq!(adm, pair_admissible(&d, i, j));
        }
    }

    #[test]
    fn derivative_bound_for_linear_and_kinked_functions() {
        let d = BoxDomain::line(-1.0, 1.0, 1024).unwrap();
        let half = GridFunction::constant(d.clone(), 0.5).unwrap();

        let linear = GridFunction::from_fn(d.clone(), |p| p[0]).unwrap();
        let report = derivative_bound_check(&linear, &half, 1.0, &[]).unwrap();
        assert!(report.passed, "worst {}", report.worst_ratio);

        let vee = GridFunction::from_fn(d.clone(), |p| p[0].abs()).unwrap();
        let excluded = kink_exclusion_cells(&d, &[0.0]).unwrap();
        assert!(excluded.len() <= 2);
        let report = derivative_bound_check(&vee, &half, 1.0, &excluded).unwrap();
        assert!(report.passed, "worst {}", report.worst_ratio);
    }

    #[test]
    fn derivative_bound_rejects_an_undersized_gradient() {
        let d = BoxDomain::line(-1.0, 1.0, 256).unwrap();
        let f = GridFunction::from_fn(d.clone(), |p| p[0]).unwrap();
        let tiny = GridFunction::constant(d, 0.1).unwrap();
        let e = derivative_bound_check(&f, &tiny, 1.0, &[]);
        assert!(matches!(e, Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn mcshane_interpolates_and_extends() {
        let ext = mcshane_extend(&[vec![0.0], vec![1.0]], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!(ext.evaluate(&[0.5]), 0.5);
        assert_eq!(ext.evaluate(&[2.0]), 2.0);
        assert_eq!(ext.evaluate(&[0.0]), 0.0);
        assert_eq!(ext.evaluate(&[1.0]), 1.0);
    }

    #[test]
    fn mcshane_rejects_non_lipschitz_data() {
        let e = mcshane_extend(&[vec![0.0], vec![1.0]], &[0.0, 5.0], 1.0);
        assert!(matches!(e, Err(Error::LipschitzViolation { .. })));
    }

    #[test]
    fn mcshane_random_data_is_globally_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let raw: Vec<f64> = (0..100).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let l = 1.5;
        // One infimal pass makes arbitrary data L-Lipschitz on the points.
        let values: Vec<f64> = (0..100)
            .map(|i| {
                (0..100)
                    .map(|j| raw[j] + l * euclidean(&points[i], &points[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let ext = mcshane_extend(&points, &values, l).unwrap();
        for i in 0..100 {
            assert!((ext.evaluate(&points[i]) - values[i]).abs() < 1e-12);
        }
        for _ in 0..1000 {
            let a = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let b = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let diff = (ext.evaluate(&a) - ext.evaluate(&b)).abs();
            let dist = euclidean(&a, &b);
            assert!(diff <= l * dist + 1e-12, "{diff} vs {}", l * dist);
        }
    }

    #[test]
    fn truncation_masks_are_nested() {
        let d = BoxDomain::line(-2.0, 2.0, 128).unwrap();
        let g = GridFunction::from_fn(d.clone(), |p| p[0].abs()).unwrap();
        let m1 = truncation_sets(&g, 1.0);
        assert!(m1
            .iter()
            .enumerate()
            .all(|(i, &m)| m == (d.axis_center(0, i).abs() <= 1.0)));
        let mut prev = truncation_sets(&g, 0.0);
        for k in 1..=10 {
            let mask = truncation_sets(&g, k as f64 * 0.3);
            assert!(prev.iter().zip(&mask).all(|(&a, &b)| !a || b));
            prev = mask;
        }
        let low = GridFunction::constant(d, 0.5).unwrap();
        assert!(truncation_sets(&low, 1.0).iter().all(|&m| m));
    }
}
