//! Shapiro-Wilk normality test, Royston's approximation (algorithm AS R94).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::harness::ScenarioClass;

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 5000;
pub const NORMALITY_ALPHA: f64 = 0.05;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub variable: String,
    pub scenario: Option<ScenarioClass>,
    pub n: usize,
    pub w: f64,
    pub p: f64,
    /// `p > 0.05`.
    pub normal_at_alpha: bool,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Antisymmetric weights for the lower half of the order statistics,
/// positive, with the full vector normalized to unit length.
pub fn coefficients(n: usize) -> Result<Vec<f64>> {
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::UnsupportedSize(n));
    }
    let half = n / 2;
    if n == 3 {
        return Ok(vec![std::f64::consts::FRAC_1_SQRT_2]);
    }
    let normal = std_normal();
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half).map(|i| -normal.inverse_cdf((i as f64 - 0.375) / an25)).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = m[0] / ssumm2 + poly(&C1, rsn);

    let mut a = vec![0.0; half];
    let first_scaled;
    let fac;
    if n > 5 {
        first_scaled = 2;
        let a2 = m[1] / ssumm2 + poly(&C2, rsn);
        fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
    } else {
        first_scaled = 1;
        fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
    }
    a[0] = a1;
    for i in first_scaled..half {
        a[i] = m[i] / fac;
    }
    Ok(a)
}

fn p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    if n == 3 {
        let pi = std::f64::consts::PI;
        return (6.0 / pi * (w.sqrt().asin() - pi / 3.0)).max(0.0);
    }
    let an = n as f64;
    let mut y = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let ln_n = an.ln();
        (poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    (1.0 - std_normal().cdf((y - m) / s)).clamp(0.0, 1.0)
}

/// W statistic and p-value for `x`, 3 ≤ n ≤ 5000.
pub fn shapiro_wilk(x: &[f64]) -> Result<NormalityResult> {
    shapiro_wilk_named("", x)
}

pub fn shapiro_wilk_named(variable: &str, x: &[f64]) -> Result<NormalityResult> {
    let n = x.len();
    let a = coefficients(n)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{variable}: non-finite value")));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[n - 1] - sorted[0] <= 0.0 {
        return Err(Error::DegenerateInput(format!("{variable}: all {n} values equal")));
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss <= 0.0 {
        return Err(Error::DegenerateInput(format!("{variable}: zero variance")));
    }
    let b: f64 = a.iter().enumerate().map(|(i, ai)| ai * (sorted[n - 1 - i] - sorted[i])).sum();
    let w = (b * b / ss).min(1.0);
    let p = p_value(w, n);
    Ok(NormalityResult { variable: variable.to_string(), scenario: None, n, w, p, normal_at_alpha: p > NORMALITY_ALPHA })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(got: f64, want: f64, tol: f64) {
        assert!((got - want).abs() <= tol, "{got} vs {want}");
    }

    #[test]
    fn evenly_spaced_triple_is_perfect() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.w, 1.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn constant_is_degenerate() {
        assert!(matches!(shapiro_wilk(&[4.0; 10]), Err(Error::DegenerateInput(_))));
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::UnsupportedSize(2))));
        assert!(matches!(shapiro_wilk(&vec![0.0; 5001]), Err(Error::UnsupportedSize(5001))));
    }

    #[test]
    fn coefficients_have_unit_norm() {
        for n in [3, 4, 5, 6, 7, 11, 12, 25, 100, 999, 5000] {
            let a = coefficients(n).unwrap();
            let norm: f64 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
            close(norm, 1.0, 1e-12);
            assert!(a.windows(2).all(|w| w[0] >= w[1]), "n={n}: weights not decreasing");
        }
    }

    // reference values from an independent float32 implementation (scipy)
    #[test]
    fn small_sample_references() {
        let cases: [(&[f64], f64, f64); 5] = [
            (&[2.1, 3.4, 1.9, 5.6], 0.8760318341481133, 0.321964802033592),
            (&[1.0, 2.0, 4.0, 8.0, 16.0], 0.876108811751035, 0.29204844728099144),
            (&[0.3, -1.2, 0.8, 2.5, -0.4, 1.1], 0.9879187822343682, 0.9834929171844751),
            (
                &[148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0],
                0.7888146948631716,
                0.006703814061898823,
            ),
            (&[1.2, 3.4, 2.2, 5.9, 4.4, 3.3, 2.8, 6.1, 0.4, 3.9, 4.0, 2.5], 0.9730653517326011, 0.9401146689147313),
        ];
        for (x, w, p) in cases {
            let r = shapiro_wilk(x).unwrap();
            close(r.w, w, 1e-5);
            close(r.p, p, 1e-4);
        }
    }

    #[test]
    fn larger_sample_references() {
        let d20 = [
            0.0, 3.074994, -0.566623, -2.477444, 1.88234, 2.895461, -1.499624, -1.154411, 3.377485, 2.090222, -1.884192,
            0.653003, 4.199379, 0.97409, -1.515395, 2.577175, 4.237819, -0.056912, -0.385082, 4.219984,
        ];
        let r = shapiro_wilk(&d20).unwrap();
        close(r.w, 0.9335406620962511, 1e-5);
        close(r.p, 0.1806036267405713, 1e-4);

        let d50 = [
            0.304717, -1.039984, 0.750451, 0.940565, -1.951035, -1.30218, 0.12784, -0.316243, -0.016801, -0.853044,
            0.879398, 0.777792, 0.066031, 1.127241, 0.467509, -0.859292, 0.368751, -0.958883, 0.87845, -0.049926,
            -0.184862, -0.68093, 1.222541, -0.154529, -0.428328, -0.352134, 0.532309, 0.365444, 0.412733, 0.430821,
            2.141648, -0.406415, -0.512243, -0.813773, 0.615979, 1.128972, -0.113947, -0.840156, -0.824481, 0.650593,
            0.743254, 0.543154, -0.66551, 0.232161, 0.116686, 0.218689, 0.871429, 0.223596, 0.678914, 0.067579,
        ];
        let r = shapiro_wilk(&d50).unwrap();
        close(r.w, 0.9840504470975057, 1e-5);
        close(r.p, 0.7301419009990167, 1e-4);
        assert!(r.normal_at_alpha);
    }

    #[test]
    fn n3_closed_form() {
        // with a1 = 1/sqrt(2), W = (x3 - x1)^2 / (2 SS)
        let r = shapiro_wilk(&[0.0, 1.0, 10.0]).unwrap();
        let mean = 11.0 / 3.0;
        let ss = [0.0f64, 1.0, 10.0].iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let w = 0.5 * 100.0 / ss;
        close(r.w, w, 1e-12);
        let pi = std::f64::consts::PI;
        close(r.p, 6.0 / pi * (w.sqrt().asin() - pi / 3.0), 1e-12);
    }

    proptest! {
        #[test]
        fn affine_invariant(
            x in prop::collection::vec(-100.0f64..100.0, 3..200),
            scale in 0.01f64..100.0,
            shift in -1e3f64..1e3,
        ) {
            let Ok(base) = shapiro_wilk(&x) else { return Ok(()) };
            let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            let moved = shapiro_wilk(&y).unwrap();
            prop_assert!((base.w - moved.w).abs() < 1e-9);
            prop_assert!(base.w > 0.0 && base.w <= 1.0);
            prop_assert!((0.0..=1.0).contains(&base.p));
        }
    }
}
