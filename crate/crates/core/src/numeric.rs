//! Small numeric primitives: compensated summation, prefix sums, unit-ball
//! volumes, and geometric radius progressions.

/// Neumaier variant of Kahan summation. Running error stays near one ulp of
/// the total, which keeps window sums extracted from long prefix arrays
/// usable down to tight tolerances.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice in index order.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}

/// Compensated prefix sums: output has `values.len() + 1` entries with
/// `out[0] = 0` and `out[k] = values[..k].sum()`.
pub fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    out.push(0.0);
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v);
        out.push(acc.total());
    }
    out
}

/// Volume of the unit ball in dimension 1 to 3.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => panic!("unit_ball_volume: unsupported dimension {dim}"),
    }
}

/// Geometric progression `start * ratio^k` truncated at `max` (inclusive up
/// to a relative slack of 1e-12 so the endpoint survives rounding).
pub fn geometric_progression(start: f64, max: f64, ratio: f64) -> Vec<f64> {
    assert!(start > 0.0 && ratio > 1.0);
    let mut out = Vec::new();
    let mut r = start;
    while r <= max * (1.0 + 1e-12) {
        out.push(r.min(max));
        r *= ratio;
    }
    out
}
