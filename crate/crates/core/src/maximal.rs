//! Truncated centered maximal operator on grid functions.
//!
//! `M_t g(x) = sup over 0 < r <= t of the average of |g| over B(x, r)`, with
//! `g` extended by zero outside its box. The sup runs over a finite radius
//! grid; the default grid is geometric with ratio 2^(1/4) (four radii per
//! doubling) anchored at the cell spacing, so the discrete sup undershoots the
//! continuum one by at most a factor `ratio^dim` on monotone profiles.
//!
//! Two window shapes are supported. `Ball` is the literal operator: averages
//! over Euclidean balls normalized by exact ball volume, evaluated row by row
//! (direct sweeps in 1D, per-row segment sums in 2D/3D). `Cube` averages over
//! axis-parallel cubes of half-width `r` normalized by `(2r)^dim` via summed
//! prefix tables, which is the fast path for whole fields. The two are
//! pointwise comparable:
//!
//! `M_ball <= (2^n / omega_n) M_cube` and
//! `M_cube(r) <= (omega_n n^(n/2) / 2^n) M_ball(sqrt(n) r)`,
//!
//! and both inequalities hold cell-exactly on the grid because cube windows
//! contain the same-radius ball windows and are contained in the
//! sqrt(n)-scaled ones.

use crate::error::Error;
use crate::grid::{BoxDomain, GridFunction};
use crate::numeric::{self, NeumaierSum};
use crate::report::VerificationReport;
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Geometric ratio of the default radius grid: four radii per doubling.
pub const DEFAULT_RADIUS_RATIO: f64 = 1.189_207_115_002_721_1; // 2^(1/4)

/// Windows whose averages feed the sup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowShape {
    /// Euclidean balls, exact-volume normalization. The literal operator.
    Ball,
    /// Axis cubes of half-width r, `(2r)^dim` normalization. Fast path.
    Cube,
}

/// Truncation, window shape, and radius grid for a maximal evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalConfig {
    /// Radius cap `t`; `f64::INFINITY` for the untruncated operator.
    pub truncation: f64,
    pub shape: WindowShape,
    /// Explicit radius grid; `None` selects the default geometric grid from
    /// the cell spacing up to `min(truncation, diameter)`.
    pub radii: Option<Vec<f64>>,
}

impl MaximalConfig {
    pub fn truncated(t: f64) -> Self {
        Self {
            truncation: t,
            shape: WindowShape::Cube,
            radii: None,
        }
    }

    pub fn untruncated() -> Self {
        Self::truncated(f64::INFINITY)
    }

    pub fn with_shape(mut self, shape: WindowShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_radii(mut self, radii: Vec<f64>) -> Self {
        self.radii = Some(radii);
        self
    }

    /// Resolve and validate the radius grid for `domain`.
    ///
    /// Auto grids are pure prefixes of one geometric progression, so grids
    /// for t1 <= t2 are nested and `M_{t1} <= M_{t2}` holds exactly.
    pub fn radius_grid(&self, domain: &BoxDomain) -> Result<Vec<f64>> {
        if !(self.truncation > 0.0) {
            return Err(Error::InvalidRadiusGrid(format!(
                "truncation {} must be positive",
                self.truncation
            )));
        }
        match &self.radii {
            Some(radii) => {
                if radii.is_empty() {
                    return Err(Error::EmptyRadiusGrid);
                }
                for (k, &r) in radii.iter().enumerate() {
                    if !r.is_finite() || r <= 0.0 {
                        return Err(Error::InvalidRadiusGrid(format!("radius {r} at {k}")));
                    }
                    if r > self.truncation * (1.0 + 1e-12) {
                        return Err(Error::InvalidRadiusGrid(format!(
                            "radius {r} exceeds truncation {}",
                            self.truncation
                        )));
                    }
                }
                for w in radii.windows(2) {
                    if w[1] <= w[0] {
                        return Err(Error::InvalidRadiusGrid("radii must be ascending".into()));
                    }
                    if w[1] / w[0] > DEFAULT_RADIUS_RATIO * (1.0 + 1e-9) {
                        return Err(Error::InvalidRadiusGrid(format!(
                            "gap {} to {} exceeds four radii per doubling",
                            w[0], w[1]
                        )));
                    }
                }
                Ok(radii.clone())
            }
            None => {
                let h = domain.max_spacing();
                let rmax = self.truncation.min(domain.diameter());
                if h > rmax * (1.0 + 1e-12) {
                    return Err(Error::EmptyRadiusGrid);
                }
                let mut out = Vec::new();
                let mut r = h;
                while r <= rmax * (1.0 + 1e-12) {
                    out.push(r);
                    r *= DEFAULT_RADIUS_RATIO;
                }
                if out.is_empty() {
                    return Err(Error::EmptyRadiusGrid);
                }
                Ok(out)
            }
        }
    }
}

/// Maximal function evaluated at every cell center.
pub fn maximal_field(g: &GridFunction, cfg: &MaximalConfig) -> Result<GridFunction> {
    let domain = g.domain().clone();
    let radii = cfg.radius_grid(&domain)?;
    let vals: Vec<f64> = g.values().iter().map(|v| v.abs()).collect();
    let out = match cfg.shape {
        WindowShape::Cube => cube_field(&domain, &vals, &radii),
        WindowShape::Ball => ball_field(&domain, &vals, &radii),
    };
    GridFunction::from_values(domain, out)
}

/// Maximal function at one point: a direct radius sweep with per-cell
/// summation and no prefix tables. Used as the independent cross-check for
/// the field paths.
pub fn maximal_at(g: &GridFunction, x: &[f64], cfg: &MaximalConfig) -> Result<f64> {
    let domain = g.domain();
    if x.len() != domain.dim() {
        return Err(Error::DomainMismatch);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::PointOutsideDomain(x.to_vec()));
    }
    let radii = cfg.radius_grid(domain)?;
    let cell_vol = domain.cell_volume();
    let dim = domain.dim();
    let mut best = 0.0f64;
    for &r in &radii {
        let mut acc = NeumaierSum::new();
        for_each_window_cell(domain, x, r, cfg.shape, &mut |idx| {
            acc.add(g.value(idx).abs());
        });
        let avg = acc.total() * cell_vol / window_volume(cfg.shape, dim, r);
        if avg > best {
            best = avg;
        }
    }
    Ok(best)
}

fn window_volume(shape: WindowShape, dim: usize, r: f64) -> f64 {
    match shape {
        WindowShape::Ball => numeric::unit_ball_volume(dim) * r.powi(dim as i32),
        WindowShape::Cube => (2.0 * r).powi(dim as i32),
    }
}

/// Visit window cells in ascending index order. Membership is the per-axis
/// slab decomposition shared by all evaluation paths: a cell is in the ball
/// window when its center passes nested `axis_range` tests with halfwidths
/// r, sqrt(r^2 - dx^2), sqrt(... - dy^2).
fn for_each_window_cell(
    domain: &BoxDomain,
    x: &[f64],
    r: f64,
    shape: WindowShape,
    visit: &mut impl FnMut(usize),
) {
    let res = domain.resolution();
    match (domain.dim(), shape) {
        (1, _) => {
            // Ball and cube windows coincide in 1D.
            if let Some((lo, hi)) = domain.axis_range(0, x[0], r) {
                for i in lo..=hi {
                    visit(i);
                }
            }
        }
        (2, WindowShape::Cube) => {
            let (Some((ilo, ihi)), Some((jlo, jhi))) = (
                domain.axis_range(0, x[0], r),
                domain.axis_range(1, x[1], r),
            ) else {
                return;
            };
            for i in ilo..=ihi {
                let row = i * res[1];
                for j in jlo..=jhi {
                    visit(row + j);
                }
            }
        }
        (2, WindowShape::Ball) => {
            let Some((ilo, ihi)) = domain.axis_range(0, x[0], r) else {
                return;
            };
            for i in ilo..=ihi {
                let dx = domain.axis_center(0, i) - x[0];
                let rem = r * r - dx * dx;
                if rem < 0.0 {
                    continue;
                }
                if let Some((jlo, jhi)) = domain.axis_range(1, x[1], rem.sqrt()) {
                    let row = i * res[1];
                    for j in jlo..=jhi {
                        visit(row + j);
                    }
                }
            }
        }
        (3, WindowShape::Cube) => {
            let (Some((ilo, ihi)), Some((jlo, jhi)), Some((klo, khi))) = (
                domain.axis_range(0, x[0], r),
                domain.axis_range(1, x[1], r),
                domain.axis_range(2, x[2], r),
            ) else {
                return;
            };
            for i in ilo..=ihi {
                for j in jlo..=jhi {
                    let row = (i * res[1] + j) * res[2];
                    for k in klo..=khi {
                        visit(row + k);
                    }
                }
            }
        }
        (3, WindowShape::Ball) => {
            let Some((ilo, ihi)) = domain.axis_range(0, x[0], r) else {
                return;
            };
            for i in ilo..=ihi {
                let dx = domain.axis_center(0, i) - x[0];
                let rem_x = r * r - dx * dx;
                if rem_x < 0.0 {
                    continue;
                }
                let Some((jlo, jhi)) = domain.axis_range(1, x[1], rem_x.sqrt()) else {
                    continue;
                };
                for j in jlo..=jhi {
                    let dy = domain.axis_center(1, j) - x[1];
                    let rem = rem_x - dy * dy;
                    if rem < 0.0 {
                        continue;
                    }
                    if let Some((klo, khi)) = domain.axis_range(2, x[2], rem.sqrt()) {
                        let row = (i * res[1] + j) * res[2];
                        for k in klo..=khi {
                            visit(row + k);
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Segments shorter than this are summed directly instead of by prefix
/// difference, which keeps small-window averages at direct-sum accuracy.
const DIRECT_SEGMENT: usize = 33;

#[inline]
fn segment_sum(prefix: &[f64], line: &[f64], lo: usize, hi: usize) -> f64 {
    if hi - lo + 1 <= DIRECT_SEGMENT {
        let mut s = NeumaierSum::new();
        for &v in &line[lo..=hi] {
            s.add(v);
        }
        s.total()
    } else {
        prefix[hi + 1] - prefix[lo]
    }
}

fn ball_field(domain: &BoxDomain, vals: &[f64], radii: &[f64]) -> Vec<f64> {
    let dim = domain.dim();
    let cell_vol = domain.cell_volume();
    let unit_vol = numeric::unit_ball_volume(dim);
    match dim {
        1 => {
            let n = domain.resolution()[0];
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let x = domain.axis_center(0, i);
                    // Radii ascend, so the window only grows; extend the sum
                    // instead of rescanning.
                    let mut acc = NeumaierSum::new();
                    let (mut lo, mut hi) = (i, i + 1); // current half-open window
                    acc.add(vals[i]);
                    let mut best = 0.0f64;
                    for &r in radii {
                        if let Some((nlo, nhi)) = domain.axis_range(0, x, r) {
                            for k in (nlo..lo).rev() {
                                acc.add(vals[k]);
                            }
                            for k in hi..=nhi {
                                acc.add(vals[k]);
                            }
                            lo = nlo;
                            hi = nhi + 1;
                        }
                        let avg = acc.total() * cell_vol / (unit_vol * r);
                        if avg > best {
                            best = avg;
                        }
                    }
                    best
                })
                .collect()
        }
        2 => {
            let (n0, n1) = (domain.resolution()[0], domain.resolution()[1]);
            // Per-row prefix arrays, stride n1 + 1.
            let rowpre: Vec<f64> = (0..n0)
                .flat_map(|i| numeric::prefix_sums(&vals[i * n1..(i + 1) * n1]))
                .collect();
            (0..n0 * n1)
                .into_par_iter()
                .map(|idx| {
                    let (ci, cj) = (idx / n1, idx % n1);
                    let x = [domain.axis_center(0, ci), domain.axis_center(1, cj)];
                    let mut best = 0.0f64;
                    for &r in radii {
                        let Some((ilo, ihi)) = domain.axis_range(0, x[0], r) else {
                            continue;
                        };
                        let mut acc = NeumaierSum::new();
                        for i in ilo..=ihi {
                            let dx = domain.axis_center(0, i) - x[0];
                            let rem = r * r - dx * dx;
                            if rem < 0.0 {
                                continue;
                            }
                            if let Some((jlo, jhi)) = domain.axis_range(1, x[1], rem.sqrt()) {
                                acc.add(segment_sum(
                                    &rowpre[i * (n1 + 1)..(i + 1) * (n1 + 1)],
                                    &vals[i * n1..(i + 1) * n1],
                                    jlo,
                                    jhi,
                                ));
                            }
                        }
                        let avg = acc.total() * cell_vol / (unit_vol * r * r);
                        if avg > best {
                            best = avg;
                        }
                    }
                    best
                })
                .collect()
        }
        3 => {
            let (n1, n2) = (domain.resolution()[1], domain.resolution()[2]);
            let n_lines = domain.n_cells() / n2;
            let linepre: Vec<f64> = (0..n_lines)
                .flat_map(|l| numeric::prefix_sums(&vals[l * n2..(l + 1) * n2]))
                .collect();
            (0..domain.n_cells())
                .into_par_iter()
                .map(|idx| {
                    let c = domain.center(idx);
                    let mut best = 0.0f64;
                    for &r in radii {
                        let Some((ilo, ihi)) = domain.axis_range(0, c[0], r) else {
                            continue;
                        };
                        let mut acc = NeumaierSum::new();
                        for i in ilo..=ihi {
                            let dx = domain.axis_center(0, i) - c[0];
                            let rem_x = r * r - dx * dx;
                            if rem_x < 0.0 {
                                continue;
                            }
                            let Some((jlo, jhi)) = domain.axis_range(1, c[1], rem_x.sqrt())
                            else {
                                continue;
                            };
                            for j in jlo..=jhi {
                                let dy = domain.axis_center(1, j) - c[1];
                                let rem = rem_x - dy * dy;
                                if rem < 0.0 {
                                    continue;
                                }
                                if let Some((klo, khi)) = domain.axis_range(2, c[2], rem.sqrt()) {
                                    let line = i * n1 + j;
                                    acc.add(segment_sum(
                                        &linepre[line * (n2 + 1)..(line + 1) * (n2 + 1)],
                                        &vals[line * n2..(line + 1) * n2],
                                        klo,
                                        khi,
                                    ));
                                }
                            }
                        }
                        let avg = acc.total() * cell_vol / (unit_vol * r * r * r);
                        if avg > best {
                            best = avg;
                        }
                    }
                    best
                })
                .collect()
        }
        _ => unreachable!(),
    }
}

/// Summed prefix table over cells, one guard slot per axis.
struct Sat {
    dims: Vec<usize>,
    p: Vec<f64>,
}

impl Sat {
    fn build(domain: &BoxDomain, vals: &[f64]) -> Self {
        let dims: Vec<usize> = domain.resolution().to_vec();
        match dims.len() {
            1 => Sat {
                p: numeric::prefix_sums(vals),
                dims,
            },
            2 => {
                let (n0, n1) = (dims[0], dims[1]);
                let w = n1 + 1;
                let mut p = vec![0.0; (n0 + 1) * w];
                for i in 0..n0 {
                    // Row prefix into row i + 1.
                    let mut acc = NeumaierSum::new();
                    for j in 0..n1 {
                        acc.add(vals[i * n1 + j]);
                        p[(i + 1) * w + j + 1] = acc.total();
                    }
                }
                for j in 1..=n1 {
                    let mut acc = NeumaierSum::new();
                    for i in 1..=n0 {
                        acc.add(p[i * w + j]);
                        p[i * w + j] = acc.total();
                    }
                }
                Sat { p, dims }
            }
            3 => {
                let (n0, n1, n2) = (dims[0], dims[1], dims[2]);
                let (w1, w2) = (n1 + 1, n2 + 1);
                let mut p = vec![0.0; (n0 + 1) * w1 * w2];
                let at = |i: usize, j: usize, k: usize| (i * w1 + j) * w2 + k;
                for i in 0..n0 {
                    for j in 0..n1 {
                        let mut acc = NeumaierSum::new();
                        for k in 0..n2 {
                            acc.add(vals[(i * n1 + j) * n2 + k]);
                            p[at(i + 1, j + 1, k + 1)] = acc.total();
                        }
                    }
                }
                for i in 1..=n0 {
                    for k in 1..=n2 {
                        let mut acc = NeumaierSum::new();
                        for j in 1..=n1 {
                            acc.add(p[at(i, j, k)]);
                            p[at(i, j, k)] = acc.total();
                        }
                    }
                }
                for j in 1..=n1 {
                    for k in 1..=n2 {
                        let mut acc = NeumaierSum::new();
                        for i in 1..=n0 {
                            acc.add(p[at(i, j, k)]);
                            p[at(i, j, k)] = acc.total();
                        }
                    }
                }
                Sat { p, dims }
            }
            _ => unreachable!(),
        }
    }

    /// Sum over the inclusive cell ranges.
    fn query(&self, ranges: &[(usize, usize)]) -> f64 {
        match self.dims.len() {
            1 => {
                let (a, b) = ranges[0];
                self.p[b + 1] - self.p[a]
            }
            2 => {
                let w = self.dims[1] + 1;
                let (a0, b0) = ranges[0];
                let (a1, b1) = ranges[1];
                self.p[(b0 + 1) * w + b1 + 1] - self.p[a0 * w + b1 + 1]
                    - self.p[(b0 + 1) * w + a1]
                    + self.p[a0 * w + a1]
            }
            3 => {
                let (w1, w2) = (self.dims[1] + 1, self.dims[2] + 1);
                let at = |i: usize, j: usize, k: usize| (i * w1 + j) * w2 + k;
                let (a0, b0) = ranges[0];
                let (a1, b1) = ranges[1];
                let (a2, b2) = ranges[2];
                let (a0, b0, a1, b1, a2, b2) = (a0, b0 + 1, a1, b1 + 1, a2, b2 + 1);
                self.p[at(b0, b1, b2)] - self.p[at(a0, b1, b2)] - self.p[at(b0, a1, b2)]
                    - self.p[at(b0, b1, a2)]
                    + self.p[at(a0, a1, b2)]
                    + self.p[at(a0, b1, a2)]
                    + self.p[at(b0, a1, a2)]
                    - self.p[at(a0, a1, a2)]
            }
            _ => unreachable!(),
        }
    }
}

/// Cube windows small enough per axis to sum directly.
const DIRECT_CUBE_AXIS: usize = 5;

fn cube_field(domain: &BoxDomain, vals: &[f64], radii: &[f64]) -> Vec<f64> {
    let dim = domain.dim();
    let cell_vol = domain.cell_volume();
    let sat = Sat::build(domain, vals);
    let res = domain.resolution();
    (0..domain.n_cells())
        .into_par_iter()
        .map(|idx| {
            let mi = domain.to_multi(idx);
            let x: Vec<f64> = (0..dim).map(|k| domain.axis_center(k, mi[k])).collect();
            let mut ranges = vec![(0usize, 0usize); dim];
            let mut best = 0.0f64;
            'radius: for &r in radii {
                for k in 0..dim {
                    match domain.axis_range(k, x[k], r) {
                        Some(rg) => ranges[k] = rg,
                        None => continue 'radius,
                    }
                }
                let small = dim > 1
                    && ranges
                        .iter()
                        .all(|&(a, b)| b - a + 1 <= DIRECT_CUBE_AXIS);
                let sum = if small || (dim == 1 && ranges[0].1 - ranges[0].0 + 1 <= DIRECT_SEGMENT)
                {
                    let mut acc = NeumaierSum::new();
                    match dim {
                        1 => {
                            for i in ranges[0].0..=ranges[0].1 {
                                acc.add(vals[i]);
                            }
                        }
                        2 => {
                            for i in ranges[0].0..=ranges[0].1 {
                                let row = i * res[1];
                                for j in ranges[1].0..=ranges[1].1 {
                                    acc.add(vals[row + j]);
                                }
                            }
                        }
                        3 => {
                            for i in ranges[0].0..=ranges[0].1 {
                                for j in ranges[1].0..=ranges[1].1 {
                                    let row = (i * res[1] + j) * res[2];
                                    for k in ranges[2].0..=ranges[2].1 {
                                        acc.add(vals[row + k]);
                                    }
                                }
                            }
                        }
                        _ => unreachable!(),
                    }
                    acc.total()
                } else {
                    sat.query(&ranges)
                };
                let avg = sum * cell_vol / window_volume(WindowShape::Cube, dim, r);
                if avg > best {
                    best = avg;
                }
            }
            best
        })
        .collect()
}

/// Pointwise ball-cube comparability of the two window shapes on a shared
/// radius grid. The scaled ball grid is inflated by 1e-12 so corner cells on
/// the boundary survive rounding; the report tolerance absorbs the inflation.
pub fn comparability_check(g: &GridFunction, cfg: &MaximalConfig) -> Result<VerificationReport> {
    let domain = g.domain();
    let dim = domain.dim();
    let radii = cfg.radius_grid(domain)?;
    let cube_cfg = MaximalConfig {
        truncation: cfg.truncation,
        shape: WindowShape::Cube,
        radii: Some(radii.clone()),
    };
    let ball_cfg = MaximalConfig {
        truncation: cfg.truncation,
        shape: WindowShape::Ball,
        radii: Some(radii.clone()),
    };
    let scale = (dim as f64).sqrt() * (1.0 + 1e-12);
    let scaled: Vec<f64> = radii.iter().map(|r| r * scale).collect();
    let ball_scaled_cfg = MaximalConfig {
        truncation: cfg.truncation * scale * (1.0 + 1e-12),
        shape: WindowShape::Ball,
        radii: Some(scaled),
    };

    let m_cube = maximal_field(g, &cube_cfg)?;
    let m_ball = maximal_field(g, &ball_cfg)?;
    let m_ball_scaled = maximal_field(g, &ball_scaled_cfg)?;

    let unit_vol = numeric::unit_ball_volume(dim);
    let c_ball_by_cube = 2f64.powi(dim as i32) / unit_vol;
    let c_cube_by_ball = unit_vol * (dim as f64).powf(dim as f64 / 2.0) / 2f64.powi(dim as i32);

    let mut report = VerificationReport::new("ball-cube comparability", 1e-9);
    report.constant("ball_le_cube_factor", c_ball_by_cube);
    report.constant("cube_le_scaled_ball_factor", c_cube_by_ball);
    for i in 0..domain.n_cells() {
        report.record(
            format!("cell {i} ball<=c*cube"),
            m_ball.value(i),
            c_ball_by_cube * m_cube.value(i),
        );
        report.record(
            format!("cell {i} cube<=c*ball"),
            m_cube.value(i),
            c_cube_by_ball * m_ball_scaled.value(i),
        );
    }
    Ok(report)
}
