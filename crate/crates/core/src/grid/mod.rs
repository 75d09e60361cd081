//! Uniform cell-center grids over axis-aligned boxes.
//!
//! A `BoxDomain` partitions a box into `resolution[k]` equal cells per axis;
//! samples live at cell centers, quadrature is the midpoint rule (exact for
//! cellwise-linear integrands), and functions extend by zero outside the box.
//! Storage is row-major with the last axis fastest.

mod catalog;
mod io;

pub use catalog::{
    catalog_entries, random_bump, random_indicator, random_sine, random_smooth, CatalogEntry,
    CatalogId, TestFunctionSpec,
};

use crate::error::Error;
use crate::numeric::{self, NeumaierSum};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Default cap on total cell count.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 24;

/// Axis-aligned box with a uniform cell grid, dimension 1 to 3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lower: &[f64], upper: &[f64], resolution: &[usize]) -> Result<Self> {
        Self::with_budget(lower, upper, resolution, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(
        lower: &[f64],
        upper: &[f64],
        resolution: &[usize],
        budget: usize,
    ) -> Result<Self> {
        let dim = lower.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1..=3, got {dim}"
            )));
        }
        if upper.len() != dim || resolution.len() != dim {
            return Err(Error::InvalidDomain(
                "lower/upper/resolution length mismatch".into(),
            ));
        }
        for k in 0..dim {
            if !lower[k].is_finite() || !upper[k].is_finite() || lower[k] >= upper[k] {
                return Err(Error::InvalidDomain(format!(
                    "need finite lower < upper on axis {k}: [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if resolution[k] == 0 {
                return Err(Error::InvalidDomain(format!("zero resolution on axis {k}")));
            }
        }
        let cells: usize = resolution.iter().try_fold(1usize, |acc, &r| {
            acc.checked_mul(r)
                .filter(|&c| c <= budget)
                .ok_or(Error::CellBudgetExceeded {
                    requested: usize::MAX,
                    budget,
                })
        })?;
        debug_assert!(cells <= budget);
        Ok(Self {
            dim,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            resolution: resolution.to_vec(),
        })
    }

    /// Uniform 1D domain.
    pub fn line(lower: f64, upper: f64, resolution: usize) -> Result<Self> {
        Self::new(&[lower], &[upper], &[resolution])
    }

    /// Square 2D domain with equal resolution per axis.
    pub fn square(lower: f64, upper: f64, resolution: usize) -> Result<Self> {
        Self::new(
            &[lower, lower],
            &[upper, upper],
            &[resolution, resolution],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.resolution[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.spacing(k)).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|k| self.spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when all axis spacings agree to within 1e-12 relative.
    pub fn is_isotropic(&self) -> bool {
        let h0 = self.spacing(0);
        (1..self.dim).all(|k| (self.spacing(k) - h0).abs() <= 1e-12 * h0)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing(k)).product()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn min_extent(&self) -> f64 {
        (0..self.dim)
            .map(|k| self.extent(k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|k| self.extent(k).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.extent(k)).product()
    }

    /// Multi-index of a flat cell index (row-major, last axis fastest).
    pub fn to_multi(&self, mut idx: usize) -> Vec<usize> {
        let mut mi = vec![0usize; self.dim];
        for k in (0..self.dim).rev() {
            mi[k] = idx % self.resolution[k];
            idx /= self.resolution[k];
        }
        mi
    }

    pub fn from_multi(&self, mi: &[usize]) -> usize {
        let mut idx = 0usize;
        for k in 0..self.dim {
            idx = idx * self.resolution[k] + mi[k];
        }
        idx
    }

    /// Center coordinate of cell `i` on `axis`.
    #[inline]
    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mi = self.to_multi(idx);
        (0..self.dim).map(|k| self.axis_center(k, mi[k])).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && (0..self.dim).all(|k| x[k] >= self.lower[k] && x[k] <= self.upper[k])
    }

    /// Flat index of the cell containing `x`, or None outside the box.
    /// Points on internal cell boundaries land in the higher cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut mi = vec![0usize; self.dim];
        for k in 0..self.dim {
            let t = (x[k] - self.lower[k]) / self.spacing(k);
            mi[k] = (t.floor() as usize).min(self.resolution[k] - 1);
        }
        Some(self.from_multi(&mi))
    }

    /// Inclusive index range on `axis` of cell centers within `halfwidth` of
    /// `x`, or None when the slab misses the grid.
    pub fn axis_range(&self, axis: usize, x: f64, halfwidth: f64) -> Option<(usize, usize)> {
        let h = self.spacing(axis);
        let n = self.resolution[axis];
        let lo = ((x - halfwidth - self.lower[axis]) / h - 0.5).ceil();
        let hi = ((x + halfwidth - self.lower[axis]) / h - 0.5).floor();
        let mut lo = lo.max(0.0) as i64;
        let mut hi = hi.min(n as f64 - 1.0) as i64;
        // Rounding guard: grow or shrink by one cell so the range agrees with
        // the literal |center - x| <= halfwidth test.
        while lo > 0 && (self.axis_center(axis, (lo - 1) as usize) - x).abs() <= halfwidth {
            lo -= 1;
        }
        while lo <= hi && (self.axis_center(axis, lo as usize) - x).abs() > halfwidth {
            lo += 1;
        }
        while (hi + 1) < n as i64 && (self.axis_center(axis, (hi + 1) as usize) - x).abs() <= halfwidth
        {
            hi += 1;
        }
        while hi >= lo && (self.axis_center(axis, hi as usize) - x).abs() > halfwidth {
            hi -= 1;
        }
        if lo > hi {
            None
        } else {
            Some((lo as usize, hi as usize))
        }
    }

    /// True when the closed ball B(center, radius) lies inside the box.
    pub fn ball_inside(&self, center: &[f64], radius: f64) -> bool {
        (0..self.dim).all(|k| {
            center[k] - radius >= self.lower[k] && center[k] + radius <= self.upper[k]
        })
    }

    /// Largest ball centered at the box midpoint that fits inside.
    pub fn inscribed_ball(&self) -> Ball {
        let center: Vec<f64> = (0..self.dim)
            .map(|k| 0.5 * (self.lower[k] + self.upper[k]))
            .collect();
        let radius = self.min_extent() / 2.0;
        Ball { center, radius }
    }
}

/// Euclidean ball used for averages and Riesz potentials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidDomain(format!("ball radius {radius} must be positive")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("ball center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn volume(&self) -> f64 {
        numeric::unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d2 <= self.radius * self.radius
    }
}

/// Scalar samples at the cell centers of a `BoxDomain`.
///
/// Values are finite unless the function was built with
/// [`GridFunction::from_values_extended`], which admits `+inf` entries; that
/// flag exists for weight samples whose singular cells carry a divergent
/// closed-form average.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: BoxDomain,
    values: Vec<f64>,
    extended_real: bool,
}

impl GridFunction {
    pub fn from_values(domain: BoxDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_cells() {
            return Err(Error::ValueCountMismatch {
                expected: domain.n_cells(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index: i });
        }
        Ok(Self {
            domain,
            values,
            extended_real: false,
        })
    }

    /// Like [`from_values`](Self::from_values) but permits `+inf` entries.
    /// NaN and `-inf` stay rejected.
    pub fn from_values_extended(domain: BoxDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.n_cells() {
            return Err(Error::ValueCountMismatch {
                expected: domain.n_cells(),
                got: values.len(),
            });
        }
        if let Some(i) = values
            .iter()
            .position(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            return Err(Error::NonFiniteValue { index: i });
        }
        let extended = values.iter().any(|v| v.is_infinite());
        Ok(Self {
            domain,
            values,
            extended_real: extended,
        })
    }

    /// Evaluate `f` at every cell center.
    pub fn from_fn(domain: BoxDomain, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..domain.n_cells())
            .map(|i| f(&domain.center(i)))
            .collect();
        Self::from_values(domain, values)
    }

    pub fn constant(domain: BoxDomain, c: f64) -> Result<Self> {
        let n = domain.n_cells();
        Self::from_values(domain, vec![c; n])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn is_extended_real(&self) -> bool {
        self.extended_real
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn same_domain(&self, other: &GridFunction) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::from_values(self.domain.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.same_domain(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridFunction::from_values(self.domain.clone(), values)
    }

    /// Midpoint-rule integral over the box.
    pub fn integrate(&self) -> f64 {
        numeric::sum(&self.values) * self.domain.cell_volume()
    }

    /// Midpoint-rule integral of `self * w`.
    pub fn integrate_weighted(&self, w: &GridFunction) -> Result<f64> {
        self.same_domain(w)?;
        let mut acc = NeumaierSum::new();
        for (v, wv) in self.values.iter().zip(&w.values) {
            acc.add(v * wv);
        }
        Ok(acc.total() * self.domain.cell_volume())
    }

    /// Average over the cells whose centers fall in `ball`, normalized by the
    /// exact ball volume. Cells outside the box count as zero, which realizes
    /// extension of the function by zero.
    pub fn integral_average(&self, ball: &Ball) -> Result<f64> {
        if ball.dim() != self.domain.dim() {
            return Err(Error::DomainMismatch);
        }
        let sum = self.ball_cell_sum(ball);
        Ok(sum * self.domain.cell_volume() / ball.volume())
    }

    /// Raw value sum over cells with centers in `ball`, ascending index order.
    fn ball_cell_sum(&self, ball: &Ball) -> f64 {
        let d = &self.domain;
        let mut acc = NeumaierSum::new();
        match d.dim() {
            1 => {
                if let Some((lo, hi)) = d.axis_range(0, ball.center[0], ball.radius) {
                    for i in lo..=hi {
                        acc.add(self.values[i]);
                    }
                }
            }
            2 => {
                let r2 = ball.radius * ball.radius;
                if let Some((ilo, ihi)) = d.axis_range(0, ball.center[0], ball.radius) {
                    for i in ilo..=ihi {
                        let dx = d.axis_center(0, i) - ball.center[0];
                        let rem = r2 - dx * dx;
                        if rem < 0.0 {
                            continue;
                        }
                        if let Some((jlo, jhi)) = d.axis_range(1, ball.center[1], rem.sqrt()) {
                            let row = i * d.resolution[1];
                            for j in jlo..=jhi {
                                let dy = d.axis_center(1, j) - ball.center[1];
                                if dx * dx + dy * dy <= r2 {
                                    acc.add(self.values[row + j]);
                                }
                            }
                        }
                    }
                }
            }
            3 => {
                let r2 = ball.radius * ball.radius;
                if let Some((ilo, ihi)) = d.axis_range(0, ball.center[0], ball.radius) {
                    for i in ilo..=ihi {
                        let dx = d.axis_center(0, i) - ball.center[0];
                        let rem_x = r2 - dx * dx;
                        if rem_x < 0.0 {
                            continue;
                        }
                        let jr = d.axis_range(1, ball.center[1], rem_x.sqrt());
                        let Some((jlo, jhi)) = jr else { continue };
                        for j in jlo..=jhi {
                            let dy = d.axis_center(1, j) - ball.center[1];
                            let rem = rem_x - dy * dy;
                            if rem < 0.0 {
                                continue;
                            }
                            let kr = d.axis_range(2, ball.center[2], rem.sqrt());
                            let Some((klo, khi)) = kr else { continue };
                            let row = (i * d.resolution[1] + j) * d.resolution[2];
                            for k in klo..=khi {
                                let dz = d.axis_center(2, k) - ball.center[2];
                                if dx * dx + dy * dy + dz * dz <= r2 {
                                    acc.add(self.values[row + k]);
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        acc.total()
    }

    /// Component `axis` of the finite-difference gradient: central differences
    /// at interior cells, one-sided at the boundary. Needs >= 2 cells per axis.
    pub fn gradient_component(&self, axis: usize) -> Result<GridFunction> {
        let d = &self.domain;
        if d.resolution[axis] < 2 {
            return Err(Error::ResolutionTooSmall {
                op: "gradient",
                need: 2,
            });
        }
        let h = d.spacing(axis);
        let n = d.resolution[axis];
        // Stride between neighbors along `axis` in the flat layout.
        let stride: usize = d.resolution[axis + 1..].iter().product();
        let mut out = vec![0.0; self.values.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let i = (idx / stride) % n;
            *slot = if i == 0 {
                (self.values[idx + stride] - self.values[idx]) / h
            } else if i == n - 1 {
                (self.values[idx] - self.values[idx - stride]) / h
            } else {
                (self.values[idx + stride] - self.values[idx - stride]) / (2.0 * h)
            };
        }
        GridFunction::from_values(d.clone(), out)
    }

    pub fn gradient(&self) -> Result<Vec<GridFunction>> {
        (0..self.domain.dim())
            .map(|k| self.gradient_component(k))
            .collect()
    }

    /// Euclidean length of the finite-difference gradient.
    pub fn gradient_magnitude(&self) -> Result<GridFunction> {
        let comps = self.gradient()?;
        let n = self.values.len();
        let mut out = vec![0.0; n];
        for (i, slot) in out.iter_mut().enumerate() {
            let s: f64 = comps.iter().map(|c| c.values[i] * c.values[i]).sum();
            *slot = s.sqrt();
        }
        GridFunction::from_values(self.domain.clone(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn cell_centers_1d() {
        let d = BoxDomain::line(0.0, 1.0, 4).unwrap();
        let centers: Vec<f64> = (0..4).map(|i| d.center(i)[0]).collect();
        assert_eq!(centers, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn row_major_last_axis_fastest() {
        let d = BoxDomain::new(&[0.0, 0.0], &[1.0, 2.0], &[2, 3]).unwrap();
        assert_eq!(d.from_multi(&[0, 1]), 1);
        assert_eq!(d.from_multi(&[1, 0]), 3);
        assert_eq!(d.to_multi(5), vec![1, 2]);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(BoxDomain::line(1.0, 1.0, 4).is_err());
        assert!(BoxDomain::new(&[0.0; 4], &[1.0; 4], &[2; 4]).is_err());
        assert!(BoxDomain::with_budget(&[0.0], &[1.0], &[100], 50).is_err());
    }

    #[test]
    fn quadrature_exact_for_linear() {
        let d = BoxDomain::line(0.0, 1.0, 64).unwrap();
        let f = GridFunction::from_fn(d, |x| 3.0 * x[0] + 1.0).unwrap();
        close(f.integrate(), 2.5, 1e-13);
    }

    #[test]
    fn quadrature_second_order_on_square() {
        // x^2 on (0,1): midpoint error is h^2/12 exactly.
        for res in [16usize, 32] {
            let d = BoxDomain::line(0.0, 1.0, res).unwrap();
            let f = GridFunction::from_fn(d, |x| x[0] * x[0]).unwrap();
            let h = 1.0 / res as f64;
            close(f.integrate(), 1.0 / 3.0 - h * h / 12.0, 1e-13);
        }
    }

    #[test]
    fn integral_average_of_constant_is_constant() {
        let d = BoxDomain::square(-1.0, 1.0, 128).unwrap();
        let f = GridFunction::constant(d, 2.5).unwrap();
        let ball = Ball::new(vec![0.1, -0.2], 0.5).unwrap();
        let avg = f.integral_average(&ball).unwrap();
        // Covered-cell volume approximates the ball volume to O(h/r).
        close(avg, 2.5, 2.5 * 0.08);
    }

    #[test]
    fn integral_average_sees_zero_extension() {
        let d = BoxDomain::line(0.0, 1.0, 256).unwrap();
        let f = GridFunction::constant(d, 1.0).unwrap();
        // Ball of radius 1 centered at the right edge: half its length is
        // outside the box, so the average is about one half.
        let ball = Ball::new(vec![1.0], 1.0).unwrap();
        let avg = f.integral_average(&ball).unwrap();
        close(avg, 0.5, 0.01);
    }

    #[test]
    fn gradient_exact_for_linear_interior_and_boundary() {
        let d = BoxDomain::line(0.0, 1.0, 8).unwrap();
        let f = GridFunction::from_fn(d, |x| 2.0 * x[0] + 1.0).unwrap();
        let g = f.gradient_component(0).unwrap();
        for &v in g.values() {
            close(v, 2.0, 1e-12);
        }
    }

    #[test]
    fn gradient_central_second_order() {
        // Interior error ratio between h and h/2 should sit near 4.
        let err = |res: usize| {
            let d = BoxDomain::line(-3.0, 3.0, res).unwrap();
            let f = GridFunction::from_fn(d.clone(), |x| x[0].sin()).unwrap();
            let g = f.gradient_component(0).unwrap();
            let mut worst = 0.0f64;
            for i in 1..res - 1 {
                let x = d.axis_center(0, i);
                worst = worst.max((g.value(i) - x.cos()).abs());
            }
            worst
        };
        let ratio = err(256) / err(512);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_2d_components() {
        let d = BoxDomain::square(0.0, 1.0, 32).unwrap();
        let f = GridFunction::from_fn(d.clone(), |x| x[0] + 3.0 * x[1]).unwrap();
        let gm = f.gradient_magnitude().unwrap();
        let expected = (1.0f64 + 9.0).sqrt();
        for &v in gm.values() {
            close(v, expected, 1e-12);
        }
    }

    #[test]
    fn lebesgue_differentiation_at_continuity_point() {
        let d = BoxDomain::line(-1.0, 1.0, 2048).unwrap();
        let h = d.spacing(0);
        let f = GridFunction::from_fn(d, |x| x[0].cos()).unwrap();
        // 0.25 sits on a cell boundary, so a radius of m*h covers exactly
        // 2m cells and the exact-volume denominator adds no error of its
        // own; what remains is pure quadrature, shrinking like r^2.
        let x0 = 0.25f64;
        let mut prev_err = f64::INFINITY;
        for m in [410, 102, 26] {
            let r = m as f64 * h;
            let ball = Ball::new(vec![x0], r).unwrap();
            let err = (f.integral_average(&ball).unwrap() - x0.cos()).abs();
            assert!(err <= prev_err + 1e-9, "average drifted away at r={r}");
            prev_err = err;
        }
        assert!(prev_err < 1e-3);
    }

    #[test]
    fn cell_of_boundary_points() {
        let d = BoxDomain::line(0.0, 1.0, 4).unwrap();
        assert_eq!(d.cell_of(&[0.0]), Some(0));
        assert_eq!(d.cell_of(&[0.25]), Some(1));
        assert_eq!(d.cell_of(&[1.0]), Some(3));
        assert_eq!(d.cell_of(&[1.1]), None);
    }

    #[test]
    fn rejects_nonfinite_unless_extended() {
        let d = BoxDomain::line(0.0, 1.0, 2).unwrap();
        assert!(GridFunction::from_values(d.clone(), vec![1.0, f64::INFINITY]).is_err());
        let g = GridFunction::from_values_extended(d.clone(), vec![1.0, f64::INFINITY]).unwrap();
        assert!(g.is_extended_real());
        assert!(GridFunction::from_values_extended(d, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn inscribed_ball_of_rectangle() {
        let d = BoxDomain::new(&[0.0, 0.0], &[4.0, 2.0], &[8, 8]).unwrap();
        let b = d.inscribed_ball();
        assert_eq!(b.center, vec![2.0, 1.0]);
        assert_eq!(b.radius, 1.0);
    }
}
