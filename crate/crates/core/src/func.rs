//! Evaluable function families with exact metadata.
//!
//! The growth law mu(S) and the age-dependent rates beta, k, q are
//! restricted to closed-form families (plus tabulated data with linear
//! interpolation) so that sup-norms, infima, derivatives, and exponential
//! tails are available exactly rather than estimated from a grid.

use serde::{Deserialize, Serialize};

/// Specific growth rate mu(S). Increasing with mu(0) = 0 for the
/// families of interest; validation checks the sign of the slope.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum GrowthLaw {
    /// mu(S) = c * S
    Linear { c: f64 },
    /// mu(S) = m * S / (a_half + S)
    Monod { m: f64, a_half: f64 },
}

impl GrowthLaw {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            GrowthLaw::Linear { c } => c * s,
            GrowthLaw::Monod { m, a_half } => m * s / (a_half + s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            GrowthLaw::Linear { c } => c,
            GrowthLaw::Monod { m, a_half } => m * a_half / ((a_half + s) * (a_half + s)),
        }
    }

    /// L_mu = max of mu'(S) over [0, S_in]. For both families mu' is
    /// non-increasing, so the max sits at S = 0.
    pub fn lipschitz_on(&self, _s_in: f64) -> f64 {
        self.derivative(0.0)
    }
}

/// One exponential term `amp * exp(-rate * (a - a0))` of a tail expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub amp: f64,
    pub rate: f64,
}

/// Bounded continuous age-dependent rate on [0, infinity).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum AgeFunction {
    Constant { c: f64 },
    /// amplitude * exp(-rate * a)
    ExpDecay { amplitude: f64, rate: f64 },
    /// Linear interpolation between knots, constant extrapolation beyond
    /// the last knot. Knots must be strictly increasing and start at 0.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl AgeFunction {
    pub fn zero() -> Self {
        AgeFunction::Constant { c: 0.0 }
    }

    pub fn value(&self, a: f64) -> f64 {
        match self {
            AgeFunction::Constant { c } => *c,
            AgeFunction::ExpDecay { amplitude, rate } => amplitude * (-rate * a).exp(),
            AgeFunction::Tabulated { knots, values } => {
                if a <= knots[0] {
                    values[0]
                } else if a >= *knots.last().unwrap() {
                    *values.last().unwrap()
                } else {
                    let i = match knots.binary_search_by(|x| x.partial_cmp(&a).unwrap()) {
                        Ok(i) => return values[i],
                        Err(i) => i - 1,
                    };
                    let t = (a - knots[i]) / (knots[i + 1] - knots[i]);
                    values[i] * (1.0 - t) + values[i + 1] * t
                }
            }
        }
    }

    /// Derivative at `a`. For tabulated data the right-hand slope of the
    /// containing panel (zero beyond the last knot).
    pub fn derivative(&self, a: f64) -> f64 {
        match self {
            AgeFunction::Constant { .. } => 0.0,
            AgeFunction::ExpDecay { amplitude, rate } => -rate * amplitude * (-rate * a).exp(),
            AgeFunction::Tabulated { knots, values } => {
                if a >= *knots.last().unwrap() {
                    return 0.0;
                }
                let i = match knots.binary_search_by(|x| x.partial_cmp(&a).unwrap()) {
                    Ok(i) => i.min(knots.len() - 2),
                    Err(i) => i.saturating_sub(1),
                };
                (values[i + 1] - values[i]) / (knots[i + 1] - knots[i])
            }
        }
    }

    /// Supremum over [0, infinity).
    pub fn sup_norm(&self) -> f64 {
        match self {
            AgeFunction::Constant { c } => *c,
            AgeFunction::ExpDecay { amplitude, rate } => {
                if *rate >= 0.0 {
                    *amplitude
                } else {
                    f64::INFINITY
                }
            }
            AgeFunction::Tabulated { values, .. } => values.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Infimum over [0, infinity).
    pub fn infimum(&self) -> f64 {
        match self {
            AgeFunction::Constant { c } => *c,
            AgeFunction::ExpDecay { amplitude, rate } => {
                if *rate > 0.0 {
                    0.0
                } else {
                    *amplitude
                }
            }
            AgeFunction::Tabulated { values, .. } => {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// True if the function is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            AgeFunction::Constant { c } => *c == 0.0,
            AgeFunction::ExpDecay { amplitude, .. } => *amplitude == 0.0,
            AgeFunction::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// Exact tail representation for a >= a0: value(a) = amp * exp(-rate*(a-a0)).
    /// Constant and tabulated functions extrapolate as constants (rate 0).
    pub fn tail(&self, a0: f64) -> TailTerm {
        match self {
            AgeFunction::Constant { c } => TailTerm { amp: *c, rate: 0.0 },
            AgeFunction::ExpDecay { rate, .. } => TailTerm {
                amp: self.value(a0),
                rate: *rate,
            },
            AgeFunction::Tabulated { values, .. } => TailTerm {
                amp: *values.last().unwrap(),
                rate: 0.0,
            },
        }
    }

    /// Structural sanity for tabulated data; the closed-form families are
    /// validated by the model-level checks.
    pub fn check_shape(&self) -> Result<(), String> {
        if let AgeFunction::Tabulated { knots, values } = self {
            if knots.len() < 2 || knots.len() != values.len() {
                return Err("tabulated function needs >= 2 knots and matching values".into());
            }
            if knots[0] != 0.0 {
                return Err("tabulated knots must start at a = 0".into());
            }
            if knots.windows(2).any(|w| w[1] <= w[0]) {
                return Err("tabulated knots must be strictly increasing".into());
            }
        }
        Ok(())
    }
}
