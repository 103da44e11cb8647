//! Model data and structural-assumption checks.

use serde::{Deserialize, Serialize};

use crate::func::{AgeFunction, GrowthLaw};
use crate::grid::{trapezoid, AgeGrid};
use crate::{Error, Result};

/// Relative tolerance used by the assumption checks unless overridden.
pub const DEFAULT_ASSUMPTION_TOL: f64 = 1e-9;

/// The chemostat data: growth law, mortality, birth and consumption
/// rates, inlet concentration, dilution rate, and the age-grid truncation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu: GrowthLaw,
    pub beta: AgeFunction,
    pub k: AgeFunction,
    pub q: AgeFunction,
    #[serde(rename = "S_in")]
    pub s_in: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub a_max: f64,
    pub n_age: usize,
}

impl ModelParams {
    /// Basic structural sanity; the scientific assumptions are covered by
    /// [`validate_model`].
    pub fn check(&self) -> Result<()> {
        if !(self.s_in > 0.0) {
            return Err(Error::InvalidModel("S_in must be > 0".into()));
        }
        if !(self.d > 0.0) {
            return Err(Error::InvalidModel("D must be > 0".into()));
        }
        if !(self.a_max > 0.0) || self.n_age < 2 {
            return Err(Error::InvalidModel("need a_max > 0 and n_age >= 2".into()));
        }
        for (name, f) in [("beta", &self.beta), ("k", &self.k), ("q", &self.q)] {
            f.check_shape()
                .map_err(|e| Error::InvalidModel(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> AgeGrid {
        AgeGrid::new(self.a_max, self.n_age)
    }

    /// L = inf of beta over [0, infinity).
    pub fn l_beta(&self) -> f64 {
        self.beta.infimum()
    }

    /// L_mu = max of mu'(S) over [0, S_in].
    pub fn l_mu(&self) -> f64 {
        self.mu.lipschitz_on(self.s_in)
    }
}

/// Integral of an age function over [0, infinity): grid trapezoid plus
/// the exact exponential tail (infinite when the tail is a positive
/// constant).
pub fn integral_to_infinity(f: &AgeFunction, grid: &AgeGrid) -> f64 {
    let vals = grid.sample(|a| f.value(a));
    let head = trapezoid(&vals, grid.da);
    let tail = f.tail(grid.a_max);
    if tail.amp == 0.0 {
        head
    } else if tail.rate > 0.0 {
        head + tail.amp / tail.rate
    } else {
        f64::INFINITY
    }
}

/// One line of a validation report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    /// The value that decides the predicate (min, max, or integral).
    pub witness: f64,
}

/// Pass/fail per structural assumption, with witness values.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failed(&self) -> Vec<&CheckItem> {
        self.items.iter().filter(|i| !i.pass).collect()
    }
}

/// Checks the standing assumptions: mu(0) = 0, mu increasing on
/// [0, S_in], non-negativity and boundedness of beta, k, q, and positive
/// integrals of k and q.
pub fn validate_model(params: &ModelParams) -> ValidationReport {
    let grid = params.grid();
    let mut items = Vec::new();
    let mut push = |name: &str, pass: bool, witness: f64| {
        items.push(CheckItem {
            name: name.to_string(),
            pass,
            witness,
        });
    };

    let mu0 = params.mu.value(0.0);
    push("mu(0) = 0", mu0 == 0.0, mu0);

    // mu increasing on [0, S_in]: sample the derivative.
    let ns = 257;
    let min_dmu = (0..ns)
        .map(|i| params.mu.derivative(params.s_in * i as f64 / (ns - 1) as f64))
        .fold(f64::INFINITY, f64::min)
        .min(params.mu.derivative(0.0));
    push("mu increasing", min_dmu >= 0.0, min_dmu);

    for (name, f) in [("beta", &params.beta), ("k", &params.k), ("q", &params.q)] {
        let min_val = grid
            .points()
            .map(|a| f.value(a))
            .fold(f64::INFINITY, f64::min)
            .min(f.infimum());
        push(&format!("{name} >= 0"), min_val >= 0.0, min_val);
        let sup = f.sup_norm();
        push(&format!("{name} bounded"), sup.is_finite(), sup);
    }

    for (name, f) in [("k", &params.k), ("q", &params.q)] {
        let integral = integral_to_infinity(f, &grid);
        push(&format!("integral of {name} > 0"), integral > 0.0, integral);
    }

    let pass = items.iter().all(|i| i.pass);
    ValidationReport { items, pass }
}

/// Outcome of the k <= R*q ratio check.
#[derive(Debug, Clone, Serialize)]
pub struct RatioCheck {
    pub holds: bool,
    /// Age maximizing k/q (infinity when the tail ratio diverges).
    pub worst_age: f64,
    pub worst_ratio: f64,
}

/// Assumption (A): k(a) <= R*q(a) for all a >= 0, checked on the grid
/// plus the analytic tail.
pub fn verify_assumption_a(params: &ModelParams, r: f64) -> Result<RatioCheck> {
    assert!(r > 0.0, "R must be positive");
    if params.k.is_zero() {
        return Ok(RatioCheck {
            holds: true,
            worst_age: 0.0,
            worst_ratio: 0.0,
        });
    }
    let grid = params.grid();
    let mut worst_age = 0.0;
    let mut worst_ratio = f64::NEG_INFINITY;
    for a in grid.points() {
        let kv = params.k.value(a);
        let qv = params.q.value(a);
        if qv == 0.0 {
            if kv > 0.0 {
                return Err(Error::NoFiniteRatio { age: a, k_value: kv });
            }
            continue;
        }
        let ratio = kv / qv;
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_age = a;
        }
    }
    // Analytic tail: k/q behaves like (amp_k/amp_q) * exp(-(rate_k-rate_q)(a-a_max)).
    let tk = params.k.tail(grid.a_max);
    let tq = params.q.tail(grid.a_max);
    if tk.amp > 0.0 {
        if tq.amp == 0.0 {
            return Err(Error::NoFiniteRatio {
                age: grid.a_max,
                k_value: tk.amp,
            });
        }
        if tk.rate < tq.rate {
            // ratio grows without bound in the tail
            return Ok(RatioCheck {
                holds: false,
                worst_age: f64::INFINITY,
                worst_ratio: f64::INFINITY,
            });
        }
        // Otherwise the tail ratio is non-increasing; its max (at a_max)
        // is already on the grid.
    }
    Ok(RatioCheck {
        holds: worst_ratio <= r,
        worst_age,
        worst_ratio,
    })
}

/// Decomposition constants and residual functions of assumption (B).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBData {
    pub b: f64,
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub h: AgeFunction,
    pub p: AgeFunction,
    #[serde(rename = "R")]
    pub r_ratio: f64,
}

impl AssumptionBData {
    pub fn check(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::Invalid("theta must be > 0".into()));
        }
        if self.alpha < 0.0 || self.delta < 0.0 {
            return Err(Error::Invalid("alpha, delta must be >= 0".into()));
        }
        if self.b > 1.0 || self.gamma > 1.0 {
            return Err(Error::Invalid("b and gamma must be <= 1".into()));
        }
        if !(self.r_ratio > 0.0) {
            return Err(Error::Invalid("R must be > 0".into()));
        }
        Ok(())
    }
}

/// Pointwise residual comparison for the two differential relations of
/// assumption (B).
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub pass: bool,
    /// Max deviation |h(a) - computed q-residual| over the grid.
    pub max_h_deviation: f64,
    /// Max deviation |p(a) - computed k-residual| over the grid.
    pub max_p_deviation: f64,
    /// Most negative computed residual (must be >= -tol).
    pub min_residual: f64,
    pub failures: Vec<String>,
}

/// Assumption (B): evaluates
///   q'(a) - beta(a)q(a) - gamma*D*q(a) - delta*theta*k(a) = h(a)
///   k'(a) - beta(a)k(a) - (alpha/theta)*q(a) - b*D*k(a)   = p(a)
/// on the grid and compares against the stated h, p.
pub fn verify_assumption_b(
    params: &ModelParams,
    data: &AssumptionBData,
    tol: f64,
) -> Result<ResidualReport> {
    assert!(tol > 0.0, "tol must be positive");
    data.check()?;
    let grid = params.grid();
    let d = params.d;
    let mut max_h_dev: f64 = 0.0;
    let mut max_p_dev: f64 = 0.0;
    let mut min_res = f64::INFINITY;
    let mut failures = Vec::new();
    for a in grid.points() {
        let bv = params.beta.value(a);
        let kv = params.k.value(a);
        let qv = params.q.value(a);
        let res_q = params.q.derivative(a) - bv * qv - data.gamma * d * qv - data.delta * data.theta * kv;
        let res_k =
            params.k.derivative(a) - bv * kv - data.alpha / data.theta * qv - data.b * d * kv;
        min_res = min_res.min(res_q).min(res_k);
        let h_dev = (data.h.value(a) - res_q).abs();
        let p_dev = (data.p.value(a) - res_k).abs();
        if h_dev > tol * (1.0 + res_q.abs()) && failures.len() < 8 {
            failures.push(format!("h mismatch at a = {a}: stated {} vs computed {res_q}", data.h.value(a)));
        }
        if p_dev > tol * (1.0 + res_k.abs()) && failures.len() < 8 {
            failures.push(format!("p mismatch at a = {a}: stated {} vs computed {res_k}", data.p.value(a)));
        }
        if res_q < -tol || res_k < -tol {
            if failures.len() < 8 {
                failures.push(format!(
                    "h or p not non-negative: assumption (B) violated at a = {a}"
                ));
            }
        }
        max_h_dev = max_h_dev.max(h_dev);
        max_p_dev = max_p_dev.max(p_dev);
    }
    Ok(ResidualReport {
        pass: failures.is_empty(),
        max_h_deviation: max_h_dev,
        max_p_deviation: max_p_dev,
        min_residual: min_res,
        failures,
    })
}

/// The section-4 family: beta constant L, q constant 1, k = Y exp(-kt*a),
/// linear or supplied growth law.
pub fn toth_kot_model(y: f64, k_tilde: f64, l: f64, d: f64, s_in: f64, n_age: usize) -> ModelParams {
    let a_max = 40.0 / (d + l);
    ModelParams {
        mu: GrowthLaw::Linear { c: 1.0 },
        beta: AgeFunction::Constant { c: l },
        k: AgeFunction::ExpDecay {
            amplitude: y,
            rate: k_tilde,
        },
        q: AgeFunction::Constant { c: 1.0 },
        s_in,
        d,
        a_max,
        n_age,
    }
}

/// The exact assumption-(B) selection for the section-4 family:
/// gamma = -L/D, b = -(kt+L)/D, delta = alpha = 0, h = p = 0.
pub fn toth_kot_assumption_b(y: f64, k_tilde: f64, l: f64, d: f64, theta: f64) -> AssumptionBData {
    AssumptionBData {
        b: -(k_tilde + l) / d,
        gamma: -l / d,
        theta,
        alpha: 0.0,
        delta: 0.0,
        h: AgeFunction::zero(),
        p: AgeFunction::zero(),
        r_ratio: y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monod_model() -> ModelParams {
        ModelParams {
            mu: GrowthLaw::Monod { m: 1.0, a_half: 1.0 },
            beta: AgeFunction::Constant { c: 0.5 },
            k: AgeFunction::ExpDecay {
                amplitude: 2.0,
                rate: 0.5,
            },
            q: AgeFunction::Constant { c: 1.0 },
            s_in: 2.0,
            d: 1.0,
            a_max: 40.0 / 1.5,
            n_age: 2001,
        }
    }

    #[test]
    fn monod_model_passes_validation() {
        let report = validate_model(&monod_model());
        assert!(report.pass, "failures: {:?}", report.failed());
    }

    #[test]
    fn decreasing_mu_fails_validation() {
        let mut m = monod_model();
        m.mu = GrowthLaw::Linear { c: -1.0 };
        let report = validate_model(&m);
        assert!(!report.pass);
        assert!(report.failed().iter().any(|i| i.name == "mu increasing"));
    }

    #[test]
    fn zero_k_fails_integral_check() {
        let mut m = monod_model();
        m.k = AgeFunction::zero();
        let report = validate_model(&m);
        assert!(report
            .failed()
            .iter()
            .any(|i| i.name == "integral of k > 0"));
    }

    #[test]
    fn assumption_a_exp_over_constant() {
        let m = monod_model();
        // k = 2 e^{-0.5a}, q = 1: ratio maximal at a = 0 where it equals 2.
        let ok = verify_assumption_a(&m, 2.0).unwrap();
        assert!(ok.holds);
        assert_eq!(ok.worst_age, 0.0);
        let bad = verify_assumption_a(&m, 1.0).unwrap();
        assert!(!bad.holds);
        assert_eq!(bad.worst_age, 0.0);
        assert!((bad.worst_ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn assumption_a_zero_k_is_degenerate_true() {
        let mut m = monod_model();
        m.k = AgeFunction::zero();
        let r = verify_assumption_a(&m, 1e-6).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn assumption_a_monotone_in_r() {
        let m = monod_model();
        let low = verify_assumption_a(&m, 2.0).unwrap();
        let high = verify_assumption_a(&m, 5.0).unwrap();
        assert!(low.holds && high.holds);
    }

    #[test]
    fn assumption_b_toth_kot_selection_is_exact() {
        let (y, kt, l, d) = (2.0, 0.5, 0.5, 1.0);
        let m = toth_kot_model(y, kt, l, d, 2.0, 501);
        let data = toth_kot_assumption_b(y, kt, l, d, 1.0);
        let rep = verify_assumption_b(&m, &data, 1e-9).unwrap();
        assert!(rep.pass, "{:?}", rep.failures);
        assert!(rep.max_h_deviation < 1e-12);
        assert!(rep.max_p_deviation < 1e-12);
    }

    #[test]
    fn assumption_b_missing_gamma_fails() {
        let (y, kt, l, d) = (2.0, 0.5, 0.5, 1.0);
        let m = toth_kot_model(y, kt, l, d, 2.0, 501);
        let mut data = toth_kot_assumption_b(y, kt, l, d, 1.0);
        data.gamma = 0.0; // computed h becomes -L*q < 0
        let rep = verify_assumption_b(&m, &data, 1e-9).unwrap();
        assert!(!rep.pass);
        assert!(rep.min_residual < -1e-3);
    }

    #[test]
    fn assumption_b_trivial_zero_case() {
        let m = ModelParams {
            mu: GrowthLaw::Linear { c: 1.0 },
            beta: AgeFunction::zero(),
            k: AgeFunction::Constant { c: 1.0 },
            q: AgeFunction::Constant { c: 1.0 },
            s_in: 2.0,
            d: 1.0,
            a_max: 10.0,
            n_age: 101,
        };
        // beta = 0, q = 1, gamma = delta = 0 -> h residual identically 0.
        let data = AssumptionBData {
            b: 0.0,
            gamma: 0.0,
            theta: 1.0,
            alpha: 0.0,
            delta: 0.0,
            h: AgeFunction::zero(),
            p: AgeFunction::zero(),
            r_ratio: 1.0,
        };
        let rep = verify_assumption_b(&m, &data, 1e-9).unwrap();
        assert!(rep.max_h_deviation == 0.0);
    }

    #[test]
    fn model_json_rejects_unknown_fields() {
        let js = r#"{"mu":{"family":"linear","c":1.0},
            "beta":{"family":"constant","c":0.5},
            "k":{"family":"expdecay","amplitude":2.0,"rate":0.5},
            "q":{"family":"constant","c":1.0},
            "S_in":2.0,"D":1.0,"a_max":26.0,"n_age":101,"bogus":1}"#;
        assert!(serde_json::from_str::<ModelParams>(js).is_err());
        let ok = js.replace(",\"bogus\":1", "");
        assert!(serde_json::from_str::<ModelParams>(&ok).is_ok());
    }
}
