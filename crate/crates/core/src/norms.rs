//! Lebesgue, weighted, grand, and grand Sobolev norms with the epsilon
//! profile machinery.
//!
//! The grand norm is `sup over eps in (0, q-1)` of
//! `(eps * integral of |f|^(q-eps) w a^eps)^(1/(q-eps))`. The open-interval
//! sup is evaluated on a closed uniform grid `[eps_min, q-1-eps_min]` with
//! `eps_min = (q-1)/4096`, optionally refined by a golden-section pass around
//! the grid argmax; profiles are continuous in eps, so the grid max converges
//! to the sup from below.
//!
//! Every profile entry is computed from one per-cell precomputation:
//! `|f|^(q-eps) w a^eps = exp(P + eps Q)` with `P = q ln|f| + ln w` and
//! `Q = ln a - ln|f|`, cells with `f = 0` dropped. Entries for different eps
//! therefore share one data pass, checks that compare profiles (the 1/4
//! equivalence, the embedding inequalities) are pure algebra on shared
//! arrays, and their tolerances are float-roundoff budgets, not modelling
//! slack.

use crate::error::Error;
use crate::grid::GridFunction;
use crate::report::VerificationReport;
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Evaluation grid for the epsilon sup, strictly inside (0, q-1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    q: f64,
    points: Vec<f64>,
}

impl EpsilonGrid {
    /// Uniform grid of `count` points on `[(q-1)/4096, (q-1)(1 - 1/4096)]`.
    pub fn uniform(q: f64, count: usize) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::InvalidExponent(format!(
                "grand norms need q > 1, got {q}"
            )));
        }
        if count < 2 {
            return Err(Error::EmptyInput("epsilon grid needs at least 2 points"));
        }
        let span = q - 1.0;
        let eps_min = span / 4096.0;
        let step = (span - 2.0 * eps_min) / (count - 1) as f64;
        let points = (0..count).map(|i| eps_min + step * i as f64).collect();
        Ok(EpsilonGrid { q, points })
    }

    /// The default 2048-point grid.
    pub fn standard(q: f64) -> Result<Self> {
        Self::uniform(q, 2048)
    }

    /// Insert an extra evaluation point, keeping the grid sorted.
    pub fn with_point(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < self.q - 1.0) {
            return Err(Error::InvalidExponent(format!(
                "epsilon {eps} outside (0, {})",
                self.q - 1.0
            )));
        }
        match self
            .points
            .binary_search_by(|p| p.partial_cmp(&eps).unwrap())
        {
            Ok(_) => {}
            Err(i) => self.points.insert(i, eps),
        }
        Ok(self)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// A grand norm value together with the profile that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct GrandNormResult {
    pub value: f64,
    pub argmax_eps: f64,
    /// `(eps, eps^(1/(q-eps)) -scaled norm)` pairs, including any refined
    /// point, so `value` is always the max over entries.
    pub profile: Vec<(f64, f64)>,
    pub q: f64,
}

/// Per-cell exponent precomputation behind every profile evaluation.
struct CellTerms {
    /// `q ln|f| + ln w` per nonzero cell.
    p: Vec<f64>,
    /// `ln a - ln|f|` per nonzero cell.
    q_coef: Vec<f64>,
    cell_volume: f64,
}

impl CellTerms {
    fn integral_at(&self, eps: f64) -> f64 {
        let mut acc = crate::numeric::NeumaierSum::new();
        for (p, qc) in self.p.iter().zip(&self.q_coef) {
            acc.add((p + eps * qc).exp());
        }
        acc.total() * self.cell_volume
    }
}

fn check_weight_field(name: &'static str, w: &GridFunction) -> Result<()> {
    if w.is_extended_real() || w.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidWeight(format!(
            "{name} must be strictly positive and finite"
        )));
    }
    Ok(())
}

fn cell_terms(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
) -> Result<CellTerms> {
    if f.is_extended_real() {
        return Err(Error::PreconditionFailed(
            "norm of an extended-real field".into(),
        ));
    }
    if w.domain() != f.domain() || a.domain() != f.domain() {
        return Err(Error::DomainMismatch);
    }
    check_weight_field("weight", w)?;
    check_weight_field("grandizer", a)?;
    let n = f.domain().n_cells();
    let mut p = Vec::new();
    let mut q_coef = Vec::new();
    for i in 0..n {
        let fv = f.value(i).abs();
        if fv == 0.0 {
            continue;
        }
        let lf = fv.ln();
        p.push(q * lf + w.value(i).ln());
        q_coef.push(a.value(i).ln() - lf);
    }
    Ok(CellTerms {
        p,
        q_coef,
        cell_volume: f.domain().cell_volume(),
    })
}

/// Raw integrals `I(eps) = integral of |f|^(q-eps) w a^eps` over the grid,
/// the shared ingredient of profile-algebra checks.
pub(crate) fn raw_integrals(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    grid: &EpsilonGrid,
) -> Result<Vec<f64>> {
    if grid.q() != q {
        return Err(Error::InvalidExponent(format!(
            "grid built for q {}, norm asked at q {q}",
            grid.q()
        )));
    }
    let terms = cell_terms(f, q, w, a)?;
    Ok(grid
        .points()
        .par_iter()
        .map(|&eps| terms.integral_at(eps))
        .collect())
}

fn scale(eps: f64, integral: f64, q: f64) -> f64 {
    (eps * integral).powf(1.0 / (q - eps))
}

fn profile_max(profile: &[(f64, f64)]) -> (f64, f64) {
    let mut best = (profile[0].0, profile[0].1);
    for &(eps, v) in profile {
        if v > best.1 {
            best = (eps, v);
        }
    }
    (best.0, best.1)
}

fn finish_profile(profile: Vec<(f64, f64)>, q: f64) -> Result<GrandNormResult> {
    for &(eps, v) in &profile {
        if !v.is_finite() {
            return Err(Error::DivergentEstimate(format!(
                "profile entry at eps {eps} is {v}"
            )));
        }
    }
    let (argmax_eps, value) = profile_max(&profile);
    Ok(GrandNormResult {
        value,
        argmax_eps,
        profile,
        q,
    })
}

/// Weighted Lebesgue norm `(integral of |f|^q w)^(1/q)`.
pub fn lq_norm(f: &GridFunction, q: f64, w: Option<&GridFunction>) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("L^q needs q >= 1, got {q}")));
    }
    if f.is_extended_real() {
        return Err(Error::PreconditionFailed(
            "norm of an extended-real field".into(),
        ));
    }
    if let Some(w) = w {
        if w.domain() != f.domain() {
            return Err(Error::DomainMismatch);
        }
        check_weight_field("weight", w)?;
    }
    let mut acc = crate::numeric::NeumaierSum::new();
    for i in 0..f.domain().n_cells() {
        let v = f.value(i).abs().powf(q);
        acc.add(match w {
            Some(w) => v * w.value(i),
            None => v,
        });
    }
    Ok((acc.total() * f.domain().cell_volume()).powf(1.0 / q))
}

/// Grand norm on the grid alone, no refinement. Checks that compare
/// profiles use this so their algebra stays exact on shared data.
pub fn grand_norm_on_grid(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    grid: &EpsilonGrid,
) -> Result<GrandNormResult> {
    let integrals = raw_integrals(f, q, w, a, grid)?;
    let profile: Vec<(f64, f64)> = grid
        .points()
        .iter()
        .zip(&integrals)
        .map(|(&eps, &int)| (eps, scale(eps, int, q)))
        .collect();
    finish_profile(profile, q)
}

/// Grand norm with a golden-section refinement pass around the grid argmax.
pub fn grand_norm(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    grid: &EpsilonGrid,
) -> Result<GrandNormResult> {
    let integrals = raw_integrals(f, q, w, a, grid)?;
    let mut profile: Vec<(f64, f64)> = grid
        .points()
        .iter()
        .zip(&integrals)
        .map(|(&eps, &int)| (eps, scale(eps, int, q)))
        .collect();
    let (_, grid_max) = profile_max(&profile);
    if grid_max > 0.0 {
        let j = profile
            .iter()
            .position(|&(_, v)| v == grid_max)
            .unwrap();
        let lo = profile[j.saturating_sub(1)].0;
        let hi = profile[(j + 1).min(profile.len() - 1)].0;
        if hi > lo {
            let terms = cell_terms(f, q, w, a)?;
            let phi = |eps: f64| scale(eps, terms.integral_at(eps), q);
            let (e_star, v_star) = golden_max(phi, lo, hi, 1e-12 * (hi - lo));
            if v_star > grid_max {
                profile.push((e_star, v_star));
            }
        }
    }
    finish_profile(profile, q)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Sobolev norm `lq_norm(f) + lq_norm(|grad f|)`.
pub fn sobolev_norm(f: &GridFunction, q: f64, w: Option<&GridFunction>) -> Result<f64> {
    let grad = f.gradient_magnitude()?;
    Ok(lq_norm(f, q, w)? + lq_norm(&grad, q, w)?)
}

/// Inner Sobolev norm shape for the sup-form grand norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SobolevInnerForm {
    /// `(||f||^(q-eps) + ||grad f||^(q-eps))^(1/(q-eps))`; the 1/4
    /// equivalence constant is stated against this form.
    PowerSum,
    /// `||f|| + ||grad f||` inside the eps scaling.
    PlainSum,
}

/// Sup-form grand Sobolev norm on the grid.
pub fn grand_sobolev_sup_with(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    grid: &EpsilonGrid,
    form: SobolevInnerForm,
) -> Result<GrandNormResult> {
    let grad = f.gradient_magnitude()?;
    let if_ = raw_integrals(f, q, w, a, grid)?;
    let ig = raw_integrals(&grad, q, w, a, grid)?;
    let profile: Vec<(f64, f64)> = grid
        .points()
        .iter()
        .zip(if_.iter().zip(&ig))
        .map(|(&eps, (&i_f, &i_g))| {
            let v = match form {
                SobolevInnerForm::PowerSum => scale(eps, i_f + i_g, q),
                SobolevInnerForm::PlainSum => scale(eps, i_f, q) + scale(eps, i_g, q),
            };
            (eps, v)
        })
        .collect();
    finish_profile(profile, q)
}

pub fn grand_sobolev_sup(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    grid: &EpsilonGrid,
) -> Result<GrandNormResult> {
    grand_sobolev_sup_with(f, q, w, a, grid, SobolevInnerForm::PowerSum)
}

/// Sum-form grand Sobolev norm `grand_norm(f) + grand_norm(|grad f|)`.
pub fn grand_sobolev_sum(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
    grid: &EpsilonGrid,
) -> Result<f64> {
    let grad = f.gradient_magnitude()?;
    Ok(grand_norm(f, q, w, a, grid)?.value + grand_norm(&grad, q, w, a, grid)?.value)
}

/// The 1/4 equivalence of the sup and sum forms, proved entry by entry on
/// one shared profile: subadditivity of `t^(1/(q-eps))` gives
/// `sup <= sum`, and the sup dominates each term's own maximum, so
/// `sum <= 2 sup`; both directions are asserted at 1e-12 relative, with the
/// stated 1/4 constant left as margin.
pub fn equivalence_check(
    f: &GridFunction,
    q: f64,
    w: &GridFunction,
    a: &GridFunction,
) -> Result<VerificationReport> {
    let grid = EpsilonGrid::standard(q)?;
    let grad = f.gradient_magnitude()?;
    let if_ = raw_integrals(f, q, w, a, &grid)?;
    let ig = raw_integrals(&grad, q, w, a, &grid)?;

    let mut report = VerificationReport::new("grand Sobolev sup-sum equivalence", 1e-12);
    let mut sup = 0.0f64;
    let mut max_f = 0.0f64;
    let mut max_g = 0.0f64;
    let mut per_eps: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(grid.points().len());
    for (&eps, (&i_f, &i_g)) in grid.points().iter().zip(if_.iter().zip(&ig)) {
        let s = scale(eps, i_f + i_g, q);
        let tf = scale(eps, i_f, q);
        let tg = scale(eps, i_g, q);
        if !(s.is_finite() && tf.is_finite() && tg.is_finite()) {
            return Err(Error::DivergentEstimate(format!(
                "profile entry at eps {eps} not finite"
            )));
        }
        sup = sup.max(s);
        max_f = max_f.max(tf);
        max_g = max_g.max(tg);
        per_eps.push((eps, s, tf, tg));
    }
    let sum = max_f + max_g;
    report.constant("sup_form", sup);
    report.constant("sum_form", sum);
    report.constant("ratio", if sum > 0.0 { sup / sum } else { 0.0 });
    report.record("sup <= sum", sup, sum);
    report.record("sum/4 <= sup", 0.25 * sum, sup);
    for (eps, s, tf, tg) in per_eps {
        report.record(format!("eps {eps:.6}: subadditive"), s, tf + tg);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoxDomain, CatalogId, TestFunctionSpec};
    use proptest::prelude::*;

    fn unit_line(res: usize) -> BoxDomain {
        BoxDomain::line(0.0, 1.0, res).unwrap()
    }

    fn ones(d: &BoxDomain) -> GridFunction {
        GridFunction::constant(d.clone(), 1.0).unwrap()
    }

    #[test]
    fn lq_fixtures() {
        let d = unit_line(2048);
        let chi = ones(&d);
        for q in [1.0, 2.0, 3.5] {
            assert!((lq_norm(&chi, q, None).unwrap() - 1.0).abs() < 1e-12);
        }
        let w2 = GridFunction::constant(d.clone(), 2.0).unwrap();
        assert!(
            (lq_norm(&chi, 3.0, Some(&w2)).unwrap() - 2f64.powf(1.0 / 3.0)).abs() < 1e-12
        );

        let d = unit_line(4096);
        let x = GridFunction::from_fn(d, |p| p[0]).unwrap();
        assert!((lq_norm(&x, 2.0, None).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn grand_norm_of_indicator_approaches_one() {
        let d = unit_line(2048);
        let chi = ones(&d);
        let w = ones(&d);
        let a = ones(&d);
        let grid = EpsilonGrid::standard(2.0).unwrap();
        let r = grand_norm(&chi, 2.0, &w, &a, &grid).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3, "{}", r.value);
        // The sup sits at the right edge and is not attained inside.
        assert!(r.argmax_eps > 0.99 * (2.0 - 1.0));
        assert!(r.value < 1.0);
    }

    #[test]
    fn zero_function_has_zero_profile() {
        let d = unit_line(128);
        let z = GridFunction::constant(d.clone(), 0.0).unwrap();
        let grid = EpsilonGrid::standard(2.0).unwrap();
        let r = grand_norm(&z, 2.0, &ones(&d), &ones(&d), &grid).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.profile.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn homogeneity_to_machine_precision() {
        let d = BoxDomain::line(-1.0, 1.0, 256).unwrap();
        let f = TestFunctionSpec::catalog(CatalogId::Bump, vec![1.3, 0.7, 0.1])
            .sample(&d)
            .unwrap();
        let cf = f.map(|v| 2.5 * v).unwrap();
        let grid = EpsilonGrid::uniform(2.0, 256).unwrap();
        let (w, a) = (ones(&d), ones(&d));
        let nf = grand_norm_on_grid(&f, 2.0, &w, &a, &grid).unwrap().value;
        let ncf = grand_norm_on_grid(&cf, 2.0, &w, &a, &grid).unwrap().value;
        assert!((ncf - 2.5 * nf).abs() < 1e-12 * ncf, "{ncf} vs {}", 2.5 * nf);
    }

    #[test]
    fn refinement_stays_close_to_a_dense_grid() {
        let d = BoxDomain::line(-1.0, 1.0, 512).unwrap();
        let f = TestFunctionSpec::catalog(CatalogId::Bump, vec![1.0, 0.8, 0.0])
            .sample(&d)
            .unwrap();
        let (w, a) = (ones(&d), ones(&d));
        let grid = EpsilonGrid::standard(2.0).unwrap();
        let on_grid = grand_norm_on_grid(&f, 2.0, &w, &a, &grid).unwrap().value;
        let refined = grand_norm(&f, 2.0, &w, &a, &grid).unwrap().value;
        assert!(refined >= on_grid);
        assert!((refined - on_grid) < 1e-6 * on_grid.max(1e-300));
    }

    #[test]
    fn profile_entries_never_exceed_value() {
        let d = BoxDomain::line(-2.0, 2.0, 256).unwrap();
        let f = TestFunctionSpec::catalog(CatalogId::Sine, vec![1.0, 3.0])
            .sample(&d)
            .unwrap();
        let grid = EpsilonGrid::uniform(1.5, 333).unwrap();
        let r = grand_norm(&f, 1.5, &ones(&d), &ones(&d), &grid).unwrap();
        for &(_, v) in &r.profile {
            assert!(v <= r.value);
        }
    }

    #[test]
    fn sobolev_fixture_linear_function() {
        let d = unit_line(4096);
        let x = GridFunction::from_fn(d, |p| p[0]).unwrap();
        let v = sobolev_norm(&x, 2.0, None).unwrap();
        assert!((v - (1.0 / 3f64.sqrt() + 1.0)).abs() < 1e-4, "{v}");
    }

    #[test]
    fn constant_function_sobolev_norm_is_its_lq_norm() {
        let d = unit_line(512);
        let c = GridFunction::constant(d, 0.7).unwrap();
        let v = sobolev_norm(&c, 2.0, None).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sup_form_below_sum_form() {
        let d = BoxDomain::line(-1.0, 1.0, 512).unwrap();
        let grid = EpsilonGrid::uniform(2.0, 512).unwrap();
        let (w, a) = (ones(&d), ones(&d));
        for spec in [
            TestFunctionSpec::catalog(CatalogId::Bump, vec![1.0, 0.6, 0.2]),
            TestFunctionSpec::catalog(CatalogId::Sine, vec![0.8, 2.0]),
        ] {
            let f = spec.sample(&d).unwrap();
            let sup = grand_sobolev_sup(&f, 2.0, &w, &a, &grid).unwrap().value;
            let sum = grand_sobolev_sum(&f, 2.0, &w, &a, &grid).unwrap();
            assert!(sup <= sum * (1.0 + 1e-12), "{sup} vs {sum}");
        }
    }

    #[test]
    fn equivalence_check_passes_and_brackets_the_ratio() {
        let d = unit_line(1024);
        let x = GridFunction::from_fn(d.clone(), |p| p[0]).unwrap();
        let r = equivalence_check(&x, 2.0, &ones(&d), &ones(&d)).unwrap();
        assert!(r.passed, "worst {}", r.worst_ratio);
        let ratio = r
            .constants
            .iter()
            .find(|(n, _)| n == "ratio")
            .unwrap()
            .1;
        assert!(ratio > 0.25 && ratio <= 1.0, "{ratio}");
    }

    #[test]
    fn equivalence_check_accepts_zero_function() {
        let d = unit_line(64);
        let z = GridFunction::constant(d.clone(), 0.0).unwrap();
        let r = equivalence_check(&z, 2.0, &ones(&d), &ones(&d)).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn truncations_converge_monotonically() {
        let d = BoxDomain::line(-1.0, 1.0, 512).unwrap();
        let f = GridFunction::from_fn(d.clone(), |p| 3.0 * p[0].abs()).unwrap();
        let grid = EpsilonGrid::uniform(2.0, 256).unwrap();
        let (w, a) = (ones(&d), ones(&d));
        let full = grand_norm_on_grid(&f, 2.0, &w, &a, &grid).unwrap().value;
        let mut last = 0.0;
        for k in [0.5, 1.0, 2.0, 4.0] {
            let trunc = f.map(|v| v.min(k)).unwrap();
            let v = grand_norm_on_grid(&trunc, 2.0, &w, &a, &grid).unwrap().value;
            assert!(v >= last - 1e-15);
            last = v;
        }
        assert!((last - full).abs() < 1e-12 * full);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn triangle_and_lattice(seedf in 0u64..1000, seedg in 1000u64..2000) {
            use rand::{Rng, SeedableRng};
            let d = unit_line(64);
            let grid = EpsilonGrid::uniform(2.0, 64).unwrap();
            let (w, a) = (ones(&d), ones(&d));
            let mut rf = rand_chacha::ChaCha8Rng::seed_from_u64(seedf);
            let mut rg = rand_chacha::ChaCha8Rng::seed_from_u64(seedg);
            let f = GridFunction::from_values(d.clone(), (0..64).map(|_| rf.gen_range(-1.0..1.0)).collect()).unwrap();
            let g = GridFunction::from_values(d.clone(), (0..64).map(|_| rg.gen_range(-1.0..1.0)).collect()).unwrap();
            let nf = grand_norm_on_grid(&f, 2.0, &w, &a, &grid).unwrap().value;
            let ng = grand_norm_on_grid(&g, 2.0, &w, &a, &grid).unwrap().value;
            let nsum = grand_norm_on_grid(&f.zip_with(&g, |x, y| x + y).unwrap(), 2.0, &w, &a, &grid).unwrap().value;
            prop_assert!(nsum <= (nf + ng) * (1.0 + 1e-10));

            let bigger = f.map(|v| v.abs() + 0.25).unwrap();
            let nb = grand_norm_on_grid(&bigger, 2.0, &w, &a, &grid).unwrap().value;
            prop_assert!(nf <= nb * (1.0 + 1e-12));
        }
    }
}
