//! Pearson correlation and its two-tailed significance.

use serde::{Deserialize, Serialize};

use crate::analysis::distributions::student_t_two_tailed;
use crate::error::{Error, Result};
use crate::harness::ScenarioClass;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub scenario: Option<ScenarioClass>,
    pub x_name: String,
    pub y_name: String,
    pub rho: f64,
    pub n: usize,
    pub p: f64,
    /// `p < alpha`.
    pub significant: bool,
    /// At least one of the two variables passed the normality test.
    pub gate_passed: bool,
}

impl CorrelationResult {
    /// Significant and allowed through the normality gate.
    pub fn reportable(&self) -> bool {
        self.significant && self.gate_passed
    }
}

/// Covariance over the product of standard deviations.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData { required: 3, available: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-tailed p for H0: rho = 0, via t = rho * sqrt((n-2)/(1-rho^2)) on n-2
/// degrees of freedom.
pub fn pearson_p(rho: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need n >= 3, got {n}")));
    }
    if !(rho.abs() <= 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("correlation {rho} outside [-1, 1]")));
    }
    let r = rho.clamp(-1.0, 1.0);
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    student_t_two_tailed(t, df)
}

pub fn correlate(x_name: &str, x: &[f64], y_name: &str, y: &[f64], alpha: f64) -> Result<CorrelationResult> {
    let rho = pearson(x, y)?;
    let p = pearson_p(rho, x.len())?;
    Ok(CorrelationResult {
        scenario: None,
        x_name: x_name.to_string(),
        y_name: y_name.to_string(),
        rho,
        n: x.len(),
        p,
        significant: p < alpha,
        gate_passed: true,
    })
}
