//! Valuation functions `v : [0, 1] -> R+`.
//!
//! Every built-in family is concave, non-decreasing and satisfies `v(0) = 0`
//! once its parameters pass [`ValuationFunction::validate`]. Derivatives are
//! right derivatives throughout; at a kink of a piecewise-linear function the
//! slope of the segment to the right is used.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A concave, non-decreasing valuation over resource shares.
///
/// The JSON form is tagged by `kind`:
/// `{"kind":"linear","slope":a}`, `{"kind":"power","coef":a,"exp":r}`,
/// `{"kind":"pwl","knots":[[x,v],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ValuationFunction {
    /// `v(x) = slope * x`.
    Linear { slope: f64 },
    /// `v(x) = coefficient * x^exponent` with `exponent` in `(0, 1]`.
    Power {
        #[serde(rename = "coef")]
        coefficient: f64,
        #[serde(rename = "exp")]
        exponent: f64,
    },
    /// Linear interpolation through `knots`, starting at `(0, 0)`. The
    /// function is flat to the right of the last knot.
    #[serde(rename = "pwl")]
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

/// The property a [`ValuationCheck`] is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    WellFormed,
    NonNegative,
    NonDecreasing,
    Concave,
    ZeroAtOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationCheck {
    pub invariant: Invariant,
    pub passed: bool,
    pub detail: String,
}

/// Per-invariant outcome of [`ValuationFunction::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValuationCheck>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValuationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, invariant: Invariant, passed: bool, detail: impl Into<String>) {
        self.checks.push(ValuationCheck {
            invariant,
            passed,
            detail: detail.into(),
        });
    }

    pub(crate) fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg = self
            .failures()
            .map(|c| c.detail.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidValuation(msg))
    }
}

impl ValuationFunction {
    pub fn linear(slope: f64) -> Self {
        ValuationFunction::Linear { slope }
    }

    pub fn power(coefficient: f64, exponent: f64) -> Self {
        ValuationFunction::Power {
            coefficient,
            exponent,
        }
    }

    /// Piecewise-linear valuation through `(x, v)` knots; the first knot must
    /// be `(0, 0)`.
    pub fn piecewise_linear(knots: impl IntoIterator<Item = (f64, f64)>) -> Self {
        ValuationFunction::PiecewiseLinear {
            knots: knots.into_iter().map(|(x, v)| [x, v]).collect(),
        }
    }

    /// Piecewise-linear valuation starting at the origin with the given
    /// `(segment width, slope)` pairs.
    pub fn from_slopes(segments: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut knots = vec![[0.0, 0.0]];
        let (mut x, mut v) = (0.0, 0.0);
        for (width, slope) in segments {
            x += width;
            v += width * slope;
            knots.push([x, v]);
        }
        ValuationFunction::PiecewiseLinear { knots }
    }

    /// Value at share `x`; errors if `x` is outside `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                x,
                domain: "[0, 1]",
            });
        }
        Ok(self.value(x))
    }

    /// Right derivative at `x` in `[0, 1)`. May be `+inf` (power family at 0).
    pub fn right_derivative(&self, x: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Domain {
                x,
                domain: "[0, 1)",
            });
        }
        Ok(self.marginal(x))
    }

    /// Unchecked evaluation; `x` is clamped into `[0, 1]`.
    pub(crate) fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            ValuationFunction::Linear { slope } => slope * x,
            ValuationFunction::Power {
                coefficient,
                exponent,
            } => {
                if x == 0.0 {
                    0.0
                } else {
                    coefficient * x.powf(*exponent)
                }
            }
            ValuationFunction::PiecewiseLinear { knots } => {
                for w in knots.windows(2) {
                    let ([x0, v0], [x1, v1]) = (w[0], w[1]);
                    if x <= x1 {
                        return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
                    }
                }
                knots.last().map_or(0.0, |k| k[1])
            }
        }
    }

    /// Right derivative for `x < 1`, left derivative at `x >= 1`.
    pub(crate) fn marginal(&self, x: f64) -> f64 {
        match self {
            ValuationFunction::Linear { slope } => *slope,
            ValuationFunction::Power {
                coefficient,
                exponent,
            } => {
                if *exponent == 1.0 || *coefficient == 0.0 {
                    *coefficient
                } else if x <= 0.0 {
                    f64::INFINITY
                } else {
                    coefficient * exponent * x.min(1.0).powf(exponent - 1.0)
                }
            }
            ValuationFunction::PiecewiseLinear { knots } => {
                let last = knots.len().saturating_sub(1);
                for (k, w) in knots.windows(2).enumerate() {
                    let ([x0, v0], [x1, v1]) = (w[0], w[1]);
                    let inside = if x >= 1.0 {
                        k + 1 == last && x1 >= 1.0
                    } else {
                        x >= x0 && x < x1
                    };
                    if inside {
                        return (v1 - v0) / (x1 - x0);
                    }
                }
                0.0
            }
        }
    }

    /// `sup { x in [0, 1] : marginal(x) >= price }`, with `sup {} = 0`.
    /// This is the demand curve used by water-filling.
    pub(crate) fn demand(&self, price: f64) -> f64 {
        let above = |slope: f64| slope >= price;
        match self {
            ValuationFunction::Linear { slope } => {
                if above(*slope) {
                    1.0
                } else {
                    0.0
                }
            }
            ValuationFunction::Power {
                coefficient,
                exponent,
            } => {
                if *exponent == 1.0 || *coefficient == 0.0 {
                    return if above(*coefficient) { 1.0 } else { 0.0 };
                }
                if price <= 0.0 {
                    // the marginal is strictly positive on [0, 1]
                    return 1.0;
                }
                // coefficient * exponent * x^(exponent - 1) = price
                let x = (coefficient * exponent / price).powf(1.0 / (1.0 - exponent));
                x.min(1.0)
            }
            ValuationFunction::PiecewiseLinear { knots } => {
                if above(0.0) {
                    return 1.0;
                }
                let mut reach = 0.0;
                for w in knots.windows(2) {
                    let ([x0, v0], [x1, v1]) = (w[0], w[1]);
                    if above((v1 - v0) / (x1 - x0)) {
                        reach = x1;
                    } else {
                        break;
                    }
                }
                reach.min(1.0)
            }
        }
    }

    /// Smallest share at which the value reaches `level`, or 1 if it never
    /// does.
    pub(crate) fn share_reaching(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        match self {
            ValuationFunction::Linear { slope } => {
                if *slope <= 0.0 {
                    1.0
                } else {
                    (level / slope).min(1.0)
                }
            }
            ValuationFunction::Power {
                coefficient,
                exponent,
            } => {
                if *coefficient <= 0.0 {
                    1.0
                } else {
                    (level / coefficient).powf(1.0 / exponent).min(1.0)
                }
            }
            ValuationFunction::PiecewiseLinear { knots } => {
                for w in knots.windows(2) {
                    let ([x0, v0], [x1, v1]) = (w[0], w[1]);
                    if v1 >= level {
                        if v1 == v0 {
                            return x0.min(1.0);
                        }
                        return (x0 + (level - v0) * (x1 - x0) / (v1 - v0)).min(1.0);
                    }
                }
                1.0
            }
        }
    }

    /// Checks the parameter ranges that make the family concave,
    /// non-decreasing and zero at the origin.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport { checks: Vec::new() };
        match self {
            ValuationFunction::Linear { slope } => {
                report.push(
                    Invariant::WellFormed,
                    slope.is_finite(),
                    format!("slope {slope} must be finite"),
                );
                report.push(
                    Invariant::NonDecreasing,
                    *slope >= 0.0,
                    format!("slope {slope} must be non-negative"),
                );
                report.push(Invariant::Concave, true, "linear");
                report.push(Invariant::ZeroAtOrigin, true, "v(0) = 0");
            }
            ValuationFunction::Power {
                coefficient,
                exponent,
            } => {
                report.push(
                    Invariant::WellFormed,
                    coefficient.is_finite() && exponent.is_finite(),
                    format!("parameters ({coefficient}, {exponent}) must be finite"),
                );
                report.push(
                    Invariant::NonDecreasing,
                    *coefficient >= 0.0,
                    format!("coefficient {coefficient} must be non-negative"),
                );
                report.push(
                    Invariant::Concave,
                    *exponent > 0.0 && *exponent <= 1.0,
                    format!("exponent {exponent} must lie in (0, 1]"),
                );
                report.push(Invariant::ZeroAtOrigin, true, "v(0) = 0");
            }
            ValuationFunction::PiecewiseLinear { knots } => {
                let finite = knots.iter().all(|k| k[0].is_finite() && k[1].is_finite());
                let increasing = knots.windows(2).all(|w| w[1][0] > w[0][0]);
                let in_domain = knots.iter().all(|k| (0.0..=1.0).contains(&k[0]));
                report.push(
                    Invariant::WellFormed,
                    knots.len() >= 2 && finite && increasing && in_domain,
                    "need >= 2 finite knots with strictly increasing x in [0, 1]",
                );
                report.push(
                    Invariant::NonNegative,
                    knots.iter().all(|k| k[1] >= 0.0),
                    "knot values must be non-negative",
                );
                report.push(
                    Invariant::ZeroAtOrigin,
                    knots.first().is_some_and(|k| k[0] == 0.0 && k[1] == 0.0),
                    "first knot must be (0, 0)",
                );
                let slopes: Vec<f64> = knots
                    .windows(2)
                    .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
                    .collect();
                let decreasing = slopes.iter().all(|s| *s >= 0.0);
                report.push(
                    Invariant::NonDecreasing,
                    decreasing,
                    format!("segment slopes {slopes:?} must be non-negative"),
                );
                let concave = slopes.windows(2).all(|s| s[1] <= s[0]);
                report.push(
                    Invariant::Concave,
                    concave,
                    format!("segment slopes {slopes:?} must be non-increasing"),
                );
            }
        }
        report
    }
}

impl fmt::Display for ValuationFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValuationFunction::Linear { slope } => write!(f, "{slope}x"),
            ValuationFunction::Power {
                coefficient,
                exponent,
            } => write!(f, "{coefficient}x^{exponent}"),
            ValuationFunction::PiecewiseLinear { knots } => {
                write!(f, "pwl[")?;
                for (i, [x, v]) in knots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({x}, {v})")?;
                }
                write!(f, "]")
            }
        }
    }
}
