use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positivity floor for the stiffness.
pub const BETA_FLOOR: f64 = 1e-8;

/// Density-modulated bending stiffness. Every family is real analytic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StiffnessProfile {
    /// `a`
    Constant { a: f64 },
    /// `a exp(b x)`
    Exponential { a: f64, b: f64 },
    /// `a + b exp(-c (x - x0)^2)`
    GaussianBump { a: f64, b: f64, c: f64, x0: f64 },
    /// Polynomial `p(x) = sum coeffs[k] x^k`, lifted smoothly above the floor:
    /// `floor + (p + sqrt(p^2 + floor^2)) / 2`.
    PolynomialPositive { coeffs: Vec<f64> },
}

/// `beta` and its first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessValue {
    pub beta: f64,
    pub dbeta: f64,
    pub d2beta: f64,
}

impl Default for StiffnessProfile {
    fn default() -> Self {
        StiffnessProfile::Constant { a: 1.0 }
    }
}

impl StiffnessProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(msg));
        match *self {
            StiffnessProfile::Constant { a } => {
                if !(a.is_finite() && a >= BETA_FLOOR) {
                    return bad(format!("constant stiffness must be positive, got a = {a}"));
                }
            }
            StiffnessProfile::Exponential { a, b } => {
                if !(a.is_finite() && a > 0.0 && b.is_finite()) {
                    return bad(format!("exponential stiffness needs a > 0 and finite b, got a = {a}, b = {b}"));
                }
            }
            StiffnessProfile::GaussianBump { a, b, c, x0 } => {
                if ![a, b, c, x0].iter().all(|v| v.is_finite()) || a <= 0.0 || c < 0.0 {
                    return bad(format!(
                        "gaussian bump needs a > 0, c >= 0, finite b and x0 (a = {a}, b = {b}, c = {c}, x0 = {x0})"
                    ));
                }
                if a + b.min(0.0) < BETA_FLOOR {
                    return bad(format!("gaussian bump dips below the floor: a + min(b, 0) = {}", a + b.min(0.0)));
                }
            }
            StiffnessProfile::PolynomialPositive { ref coeffs } => {
                if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
                    return bad("polynomial stiffness needs at least one finite coefficient".into());
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> StiffnessValue {
        match *self {
            StiffnessProfile::Constant { a } => StiffnessValue { beta: a, dbeta: 0.0, d2beta: 0.0 },
            StiffnessProfile::Exponential { a, b } => {
                let e = a * (b * x).exp();
                StiffnessValue { beta: e, dbeta: b * e, d2beta: b * b * e }
            }
            StiffnessProfile::GaussianBump { a, b, c, x0 } => {
                let d = x - x0;
                let g = b * (-c * d * d).exp();
                StiffnessValue {
                    beta: a + g,
                    dbeta: -2.0 * c * d * g,
                    d2beta: (4.0 * c * c * d * d - 2.0 * c) * g,
                }
            }
            StiffnessProfile::PolynomialPositive { ref coeffs } => {
                let (p, dp, d2p) = horner(coeffs, x);
                let eps = BETA_FLOOR;
                let r = (p * p + eps * eps).sqrt();
                let t = 1.0 + p / r;
                StiffnessValue {
                    beta: eps + 0.5 * (p + r),
                    dbeta: 0.5 * dp * t,
                    d2beta: 0.5 * (d2p * t + dp * dp * eps * eps / (r * r * r)),
                }
            }
        }
    }

    /// Checked evaluation; rejects non-finite arguments.
    pub fn eval_checked(&self, x: f64) -> Result<StiffnessValue> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("stiffness argument {x}")));
        }
        Ok(self.eval(x))
    }
}

/// `beta_eval` in functional form.
pub fn beta_eval(profile: &StiffnessProfile, x: f64) -> Result<(f64, f64, f64)> {
    let v = profile.eval_checked(x)?;
    Ok((v.beta, v.dbeta, v.d2beta))
}

/// Value, first and second derivative of a polynomial.
fn horner(coeffs: &[f64], x: f64) -> (f64, f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    let mut d2p = 0.0;
    for &c in coeffs.iter().rev() {
        d2p = d2p * x + 2.0 * dp;
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp, d2p)
}
