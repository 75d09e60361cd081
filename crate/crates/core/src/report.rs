//! Structured outcomes for inequality checks.

use serde::Serialize;

/// A single point or cell where an asserted inequality failed.
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub location: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of one verified inequality: worst ratio seen, the witnesses that
/// exceeded the tolerance, and any empirical constants worth reporting.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub passed: bool,
    /// Largest lhs/rhs over all probed sites (0 when nothing was probed).
    pub worst_ratio: f64,
    pub tolerance: f64,
    pub violations: Vec<Violation>,
    pub constants: Vec<(String, f64)>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            passed: true,
            worst_ratio: 0.0,
            tolerance,
            violations: Vec::new(),
            constants: Vec::new(),
        }
    }

    /// Record one `lhs <= rhs * (1 + tolerance)` site.
    pub fn record(&mut self, location: impl Into<String>, lhs: f64, rhs: f64) {
        let ratio = if rhs == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        };
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
        }
        if lhs > rhs * (1.0 + self.tolerance) {
            self.passed = false;
            if self.violations.len() < 1000 {
                self.violations.push(Violation {
                    location: location.into(),
                    lhs,
                    rhs,
                });
            }
        }
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) {
        self.constants.push((name.into(), value));
    }
}
