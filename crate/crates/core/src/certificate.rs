//! Assembly and testing of the sufficient stability conditions, the
//! closed-form certificate recipe for the constant-mortality /
//! exponential-fertility model family, and a randomized feasibility
//! search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::Equilibrium;
use crate::func::AgeFunction;
use crate::grid::trapezoid_corrected;
use crate::lyapunov::LyapunovWeights;
use crate::model::{AssumptionBData, ModelParams};
use crate::simulator::s_lower;
use crate::sym3::{self, Definiteness, Sym3};
use crate::{indexed_map, Error, Result};

/// The free constants of the stability conditions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertInput {
    pub sigma: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub lambda: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// Trapping-region mass bound F (> R*S_in).
    #[serde(rename = "F")]
    pub f_bound: f64,
}

impl CertInput {
    pub fn check(&self, r_ratio: f64, s_in: f64) -> Result<()> {
        let pos = [
            ("epsilon", self.epsilon),
            ("omega", self.omega),
            ("R1", self.r1),
            ("R2", self.r2),
            ("R3", self.r3),
            ("B", self.b),
            ("Gamma", self.gamma),
            ("M", self.m),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.sigma < 0.0 {
            return Err(Error::Invalid("sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Invalid("lambda must be in [0, 1]".into()));
        }
        if !(self.f_bound > r_ratio * s_in) {
            return Err(Error::Invalid(format!(
                "F = {} must exceed R*S_in = {}",
                self.f_bound,
                r_ratio * s_in
            )));
        }
        Ok(())
    }

    pub fn weights(&self) -> LyapunovWeights {
        LyapunovWeights {
            sigma: self.sigma,
            b: self.b,
            gamma: self.gamma,
            m: self.m,
        }
    }
}

/// A fully-derived certificate: the inputs plus every quantity the decay
/// inequality needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub input: CertInput,
    pub weights: LyapunovWeights,
    pub s_lower: f64,
    pub f_bound: f64,
    /// g evaluated at S_lower and S_in.
    pub g_lower: f64,
    pub g_upper: f64,
    pub p: Sym3,
    pub a_entry: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    /// Dissipation constant of the ||rho chi||^2 channel.
    pub c: f64,
    pub lambda_min: f64,
    pub k0: f64,
    pub norm_rho_inv_h: f64,
    pub norm_rho_inv_tph: f64,
    pub norm_rho_r: f64,
}

/// ||rho^{-1} f||_2 = sqrt(int e^{2 sigma a} f^2 da): grid quadrature plus
/// the closed-form exponential tail, with divergence detection (the tail
/// decay rate of f must exceed sigma).
pub fn norm_rho_inv(f: &AgeFunction, sigma: f64, params: &ModelParams) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let grid = params.grid();
    let tail = f.tail(grid.a_max);
    if tail.amp != 0.0 && tail.rate <= sigma {
        return Err(Error::DivergentNorm {
            rate: tail.rate,
            sigma,
        });
    }
    let vals = grid.sample(|a| ((sigma * a).exp() * f.value(a)).powi(2));
    // d/da (e^{sigma a} f)^2 = 2 e^{2 sigma a} f (sigma f + f'), exact at
    // the endpoints, for the Euler-Maclaurin correction.
    let dg = |a: f64| {
        2.0 * (2.0 * sigma * a).exp() * f.value(a) * (sigma * f.value(a) + f.derivative(a))
    };
    let head = trapezoid_corrected(&vals, grid.da, dg(0.0), dg(grid.a_max));
    let tail_int = if tail.amp == 0.0 {
        0.0
    } else {
        ((sigma * grid.a_max).exp() * tail.amp).powi(2) / (2.0 * (tail.rate - sigma))
    };
    Ok((head + tail_int).sqrt())
}

/// ||rho r||_2 with the exponential survivor tail.
pub fn norm_rho_r(eq: &Equilibrium, sigma: f64, params: &ModelParams) -> f64 {
    let grid = params.grid();
    let vals: Vec<f64> = (0..grid.n)
        .map(|i| ((-sigma * grid.point(i)).exp() * eq.r[i]).powi(2))
        .collect();
    let beta_inf = params.beta.tail(grid.a_max).amp;
    let r_end = *eq.r.last().unwrap();
    let g_end = ((-sigma * grid.a_max).exp() * r_end).powi(2);
    let tail = g_end / (2.0 * (sigma + params.d + beta_inf));
    // (e^{-sigma a} r)^2 satisfies g' = -2(sigma + D + beta) g exactly.
    let d0 = -2.0 * (sigma + params.d + params.beta.value(0.0));
    let d1 = -2.0 * (sigma + params.d + params.beta.value(grid.a_max)) * g_end;
    (trapezoid_corrected(&vals, grid.da, d0, d1) + tail).sqrt()
}

/// Computes the derived matrix, constants, and norms for a set of inputs.
pub fn assemble(
    params: &ModelParams,
    eq: &Equilibrium,
    data: &AssumptionBData,
    input: &CertInput,
) -> Result<Certificate> {
    input.check(data.r_ratio, params.s_in)?;
    data.check()?;
    let sl = s_lower(params, input.f_bound);
    let mu_star = params.mu.value(eq.s_star);
    let g_lower = params.mu.value(sl) / mu_star;
    let g_upper = params.mu.value(params.s_in) / mu_star;

    let nh = norm_rho_inv(&data.h, input.sigma, params)?;
    let tph = theta_p_minus_h(data);
    let ntph = norm_rho_inv(&tph, input.sigma, params)?;
    let nr = norm_rho_r(eq, input.sigma, params);

    let (kappa1, kappa2, qr) = (eq.kappa1, eq.kappa2, eq.qr);
    let (big_b, big_g, big_m, eps) = (input.b, input.gamma, input.m, input.epsilon);
    let (delta, lambda) = (data.delta, input.lambda);
    let d = params.d;

    let g1 = big_b
        * (nh / qr * (nr + big_g / (2.0 * big_b * input.r2))
            + (1.0 - lambda) * ntph / (2.0 * big_b * input.r1 * qr)
            + nr * nr / (2.0 * eps));
    let g2 = (1.0 - lambda) * input.r1 / (2.0 * qr) * ntph;
    let g3 = lambda * ntph * ntph / (2.0 * input.omega * big_b * qr);
    let g4 = input.r2 * nh / (2.0 * qr) + delta / (2.0 * input.r3);
    let c = params.l_beta() + data.gamma * d + input.sigma - g1 / big_b;

    let a_entry = kappa1 * (1.0 - 2.0 * big_b * eps * delta)
        + delta * (1.0 - big_b * eps * delta) / g_upper
        - big_b * (1.0 + eps * kappa1 * kappa1) * g_upper
        - big_g * delta * input.r3 / (2.0 * g_lower)
        - (1.0 - lambda) * input.r1 * ntph / (2.0 * qr * g_lower);
    let p01 = -big_g * kappa1 / 2.0;
    let p02 = (kappa1 - kappa2) / 2.0;
    let p11 = big_g
        * (d - input.r2 * nh / (2.0 * g_lower * qr) - delta / (2.0 * input.r3 * g_lower));
    let p12 = (big_g * d + d * big_m - big_g * kappa1) / 2.0;
    let p22 = d * big_m - big_b * g_upper * (1.0 + eps * kappa1 * kappa1);
    let p = [
        [a_entry, p01, p02],
        [p01, p11, p12],
        [p02, p12, p22],
    ];
    let lambda_min = sym3::lambda_min(&p);
    let k0 = (lambda_min * g_lower.min(1.0 / g_upper)).min(c);

    Ok(Certificate {
        input: *input,
        weights: input.weights(),
        s_lower: sl,
        f_bound: input.f_bound,
        g_lower,
        g_upper,
        p,
        a_entry,
        g1,
        g2,
        g3,
        g4,
        c,
        lambda_min,
        k0,
        norm_rho_inv_h: nh,
        norm_rho_inv_tph: ntph,
        norm_rho_r: nr,
    })
}

/// theta*p - h as a single closed-form function where possible; falls
/// back to a dense tabulation otherwise.
fn theta_p_minus_h(data: &AssumptionBData) -> AgeFunction {
    if data.p.is_zero() && data.h.is_zero() {
        return AgeFunction::zero();
    }
    if data.h.is_zero() {
        if let AgeFunction::ExpDecay { amplitude, rate } = data.p {
            return AgeFunction::ExpDecay {
                amplitude: data.theta * amplitude,
                rate,
            };
        }
        if let AgeFunction::Constant { c } = data.p {
            return AgeFunction::Constant {
                c: data.theta * c,
            };
        }
    }
    if data.p.is_zero() {
        if let AgeFunction::ExpDecay { amplitude, rate } = data.h {
            return AgeFunction::ExpDecay {
                amplitude: -amplitude,
                rate,
            };
        }
        if let AgeFunction::Constant { c } = data.h {
            return AgeFunction::Constant { c: -c };
        }
    }
    // General case: tabulate densely on a fixed knot set; the tail is
    // constant-extrapolated, which is exact when both tails are constant.
    let knots: Vec<f64> = (0..2048).map(|i| i as f64 * 0.05).collect();
    let values: Vec<f64> = knots
        .iter()
        .map(|a| data.theta * data.p.value(*a) - data.h.value(*a))
        .collect();
    AgeFunction::Tabulated { knots, values }
}

/// Signed margins of the five sufficient conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// 2<q,r> alpha - omega lambda >= 0
    pub margin_3_20: f64,
    /// kappa1 g(S_lower) + delta - G3 >= 0
    pub margin_3_21: f64,
    /// L + gamma D + sigma - G1/B > 0 (equals c)
    pub margin_3_22: f64,
    /// 1 - 2 B epsilon delta > 0
    pub margin_3_23: f64,
    pub lambda_min: f64,
    pub definiteness: Definiteness,
    pub sylvester_pd: bool,
    pub pass: bool,
}

pub fn check_conditions(
    cert: &Certificate,
    eq: &Equilibrium,
    data: &AssumptionBData,
) -> ConditionReport {
    let m20 = 2.0 * eq.qr * data.alpha - cert.input.omega * cert.input.lambda;
    let m21 = eq.kappa1 * cert.g_lower + data.delta - cert.g3;
    let m22 = cert.c;
    let m23 = 1.0 - 2.0 * cert.input.b * cert.input.epsilon * data.delta;
    let def = sym3::definiteness(&cert.p);
    let syl = sym3::sylvester_pd(&cert.p);
    let pass = m20 >= 0.0
        && m21 >= 0.0
        && m22 > 0.0
        && m23 > 0.0
        && def == Definiteness::Positive
        && syl;
    ConditionReport {
        margin_3_20: m20,
        margin_3_21: m21,
        margin_3_22: m22,
        margin_3_23: m23,
        lambda_min: cert.lambda_min,
        definiteness: def,
        sylvester_pd: syl,
        pass,
    }
}

// ---------------------------------------------------------------------
// Closed-form recipe for beta = L, q = 1, k = Y e^{-kt a}.
// ---------------------------------------------------------------------

/// Condition: D > kt^2 / (8(2L + kt)).
pub fn threshold_main(k_tilde: f64, l: f64) -> f64 {
    if k_tilde == 0.0 {
        return 0.0;
    }
    k_tilde * k_tilde / (8.0 * (2.0 * l + k_tilde))
}

/// Linearization-based comparison bound: D >= (kt - L)^2 / (8 kt).
pub fn threshold_linearized(k_tilde: f64, l: f64) -> f64 {
    if k_tilde == 0.0 {
        return 0.0;
    }
    (k_tilde - l) * (k_tilde - l) / (8.0 * k_tilde)
}

/// Lower endpoint of the feasible Gamma interval.
pub fn gamma1(k_tilde: f64, l: f64, d: f64) -> f64 {
    ((k_tilde / (l + d) + 1.0).sqrt() - 1.0).powi(2)
}

/// Upper root of the discriminant quadratic.
pub fn gamma2(k_tilde: f64, l: f64, d: f64) -> f64 {
    ((k_tilde / (l + d) + 1.0).sqrt() + 1.0).powi(2)
}

/// The discriminant quadratic whose negativity characterizes feasible
/// Gamma.
pub fn delta_quadratic(gamma: f64, k_tilde: f64, l: f64, d: f64) -> f64 {
    let s = l + d;
    s * s * gamma * gamma - 2.0 * s * (2.0 * s + k_tilde) * gamma + k_tilde * k_tilde
}

/// The concave quadratic in M whose positivity (above kt^2 Gamma D)
/// decides positive definiteness of the reduced matrix.
pub fn j_of_m(m: f64, gamma: f64, k_tilde: f64, l: f64, d: f64) -> f64 {
    (l + d)
        * (-d * d * m * m + d * gamma * (4.0 * d + 2.0 * l - gamma * (l + d) + k_tilde) * m
            - gamma * gamma * l * (l + k_tilde))
}

/// Argmax of [`j_of_m`].
pub fn m_star(gamma: f64, k_tilde: f64, l: f64, d: f64) -> f64 {
    (4.0 * gamma * d - gamma * gamma * (l + d) + 2.0 * gamma * l + k_tilde * gamma) / (2.0 * d)
}

/// The B -> 0 reduced matrix.
pub fn p0_matrix(gamma: f64, m: f64, k_tilde: f64, l: f64, d: f64) -> Sym3 {
    [
        [l + d, -gamma * (l + d) / 2.0, -k_tilde / 2.0],
        [-gamma * (l + d) / 2.0, gamma * d, (d * m - gamma * l) / 2.0],
        [-k_tilde / 2.0, (d * m - gamma * l) / 2.0, d * m],
    ]
}

/// Outcome of the closed-form recipe.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum RecipeOutcome {
    Feasible {
        certificate: Certificate,
        report: ConditionReport,
    },
    Infeasible {
        gamma1: f64,
        bound: f64,
        threshold: f64,
    },
}

impl RecipeOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, RecipeOutcome::Feasible { .. })
    }
}

/// Builds the closed-form certificate when the dilution rate clears the
/// feasibility threshold; otherwise reports the interval obstruction.
pub fn tothkot_recipe(
    params: &ModelParams,
    eq: &Equilibrium,
    y: f64,
    k_tilde: f64,
    l: f64,
) -> Result<RecipeOutcome> {
    let d = params.d;
    let g1v = gamma1(k_tilde, l, d);
    let bound = 4.0 * d / (l + d);
    if g1v >= bound {
        return Ok(RecipeOutcome::Infeasible {
            gamma1: g1v,
            bound,
            threshold: threshold_main(k_tilde, l),
        });
    }
    let gamma = (g1v + bound) / 2.0;
    let m = m_star(gamma, k_tilde, l, d);
    let sigma = (d + l) / 2.0;
    let epsilon = 2.0 / (4.0 * sigma * (sigma + d + l));
    let kappa1 = eq.kappa1;
    let mu_star = params.mu.value(eq.s_star);
    let g_upper = params.mu.value(params.s_in) / mu_star;
    let lam0 = sym3::lambda_min(&p0_matrix(gamma, m, k_tilde, l, d));
    if lam0 <= 0.0 {
        return Err(Error::Invalid(format!(
            "recipe inconsistency: reduced matrix not positive definite (lambda_min = {lam0})"
        )));
    }
    let b = lam0 / (2.0 * g_upper * (1.0 + epsilon * kappa1 * kappa1));
    let input = CertInput {
        sigma,
        epsilon,
        omega: 1.0,
        lambda: 0.0,
        r1: 1.0,
        r2: 1.0,
        r3: 1.0,
        b,
        gamma,
        m,
        f_bound: 2.0 * y * params.s_in,
    };
    let data = crate::model::toth_kot_assumption_b(y, k_tilde, l, d, eq.theta);
    let cert = assemble(params, eq, &data, &input)?;
    let report = check_conditions(&cert, eq, &data);
    if !report.pass {
        return Err(Error::Invalid(format!(
            "recipe produced an infeasible certificate above threshold: {report:?}"
        )));
    }
    Ok(RecipeOutcome::Feasible {
        certificate: cert,
        report,
    })
}

/// Canonical model used by the feasibility scan: linear growth with unit
/// slope and S_in chosen so the equilibrium sits at S_in/2.
pub fn canonical_scan_model(y: f64, k_tilde: f64, l: f64, d: f64, n_age: usize) -> ModelParams {
    let s_in = 2.0 * (d + l + k_tilde) / y;
    crate::model::toth_kot_model(y, k_tilde, l, d, s_in, n_age)
}

fn recipe_feasible_at(y: f64, k_tilde: f64, l: f64, d: f64) -> Result<bool> {
    let m = canonical_scan_model(y, k_tilde, l, d, 2001);
    let eq = crate::equilibrium::solve_equilibrium(&m)?;
    Ok(tothkot_recipe(&m, &eq, y, k_tilde, l)?.is_feasible())
}

/// One row of the feasibility table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub d: f64,
    pub recipe_feasible: bool,
    pub cond_main: bool,
    pub cond_linearized: bool,
}

/// Runs the full recipe at every dilution rate and tabulates it against
/// the two closed-form thresholds. Rows are computed in parallel.
pub fn feasibility_threshold_scan(
    y: f64,
    k_tilde: f64,
    l: f64,
    d_grid: &[f64],
) -> Result<Vec<ScanRow>> {
    let rows = indexed_map(d_grid.len(), |i| {
        let d = d_grid[i];
        recipe_feasible_at(y, k_tilde, l, d).map(|feasible| ScanRow {
            d,
            recipe_feasible: feasible,
            cond_main: d > threshold_main(k_tilde, l),
            cond_linearized: d >= threshold_linearized(k_tilde, l),
        })
    });
    rows.into_iter().collect()
}

/// The recipe's arithmetic feasibility test: the Gamma interval is
/// non-empty. Exact, unlike the assembled certificate whose margins sink
/// below quadrature noise arbitrarily close to the flip point.
pub fn recipe_interval_feasible(k_tilde: f64, l: f64, d: f64) -> bool {
    gamma1(k_tilde, l, d) < 4.0 * d / (l + d)
}

/// Bisects the recipe's feasibility flip point in D to relative 1e-8.
pub fn recipe_flip_point(k_tilde: f64, l: f64, mut d_lo: f64, mut d_hi: f64) -> Result<f64> {
    if recipe_interval_feasible(k_tilde, l, d_lo) || !recipe_interval_feasible(k_tilde, l, d_hi) {
        return Err(Error::Invalid(
            "flip-point bisection needs infeasible lower and feasible upper endpoints".into(),
        ));
    }
    while d_hi - d_lo > 1e-8 * d_hi {
        let mid = 0.5 * (d_lo + d_hi);
        if recipe_interval_feasible(k_tilde, l, mid) {
            d_hi = mid;
        } else {
            d_lo = mid;
        }
    }
    Ok(0.5 * (d_lo + d_hi))
}

// ---------------------------------------------------------------------
// Randomized feasibility search.
// ---------------------------------------------------------------------

/// Result of [`search_certificate`].
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found {
        certificate: Certificate,
        report: ConditionReport,
        evaluations: usize,
    },
    NotFound {
        best_input: Option<CertInput>,
        best_margin: f64,
        evaluations: usize,
    },
}

/// Minimum normalized margin over the five conditions; positive iff the
/// candidate is fully feasible.
fn candidate_score(
    params: &ModelParams,
    eq: &Equilibrium,
    data: &AssumptionBData,
    input: &CertInput,
) -> f64 {
    let cert = match assemble(params, eq, data, input) {
        Ok(c) => c,
        Err(_) => return f64::NEG_INFINITY,
    };
    let rep = check_conditions(&cert, eq, data);
    let norm = |m: f64, scale: f64| m / (1.0 + scale.abs());
    // The strict conditions must clear zero; the two weak ones only
    // penalize when violated (margin 0 is feasible there), so that
    // score > 0 is equivalent to rep.pass.
    let mut score = norm(rep.margin_3_22, params.l_beta() + input.sigma)
        .min(norm(rep.margin_3_23, 1.0))
        .min(norm(rep.lambda_min, cert.p[0][0]));
    if rep.margin_3_20 < 0.0 {
        score = score.min(norm(rep.margin_3_20, eq.qr * data.alpha));
    }
    if rep.margin_3_21 < 0.0 {
        score = score.min(norm(rep.margin_3_21, eq.kappa1));
    }
    score
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 > 0 by construction of gen_range on (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Log-normal jitter around a working candidate, clamped to the search
/// box. `tau` is the log-space standard deviation.
fn perturb(rng: &mut ChaCha8Rng, base: &CertInput, tau: f64, r_sin: f64, free_lambda: bool) -> CertInput {
    let jog = |rng: &mut ChaCha8Rng, v: f64, lo: f64, hi: f64| {
        (v * (tau * standard_normal(rng)).exp()).clamp(lo, hi)
    };
    CertInput {
        sigma: jog(rng, base.sigma.max(1e-3), 1e-3, 1e1),
        epsilon: jog(rng, base.epsilon, 1e-3, 1e2),
        omega: jog(rng, base.omega, 1e-2, 1e2),
        lambda: if free_lambda {
            (base.lambda + 0.25 * tau * standard_normal(rng)).clamp(0.0, 1.0)
        } else {
            0.0
        },
        r1: jog(rng, base.r1, 1e-2, 1e2),
        r2: jog(rng, base.r2, 1e-2, 1e2),
        r3: jog(rng, base.r3, 1e-2, 1e2),
        b: jog(rng, base.b, 1e-6, 1e1),
        gamma: jog(rng, base.gamma, 1e-3, 1e2),
        m: jog(rng, base.m, 1e-3, 1e3),
        f_bound: jog(rng, base.f_bound, 1.1 * r_sin, 4.0 * r_sin),
    }
}

/// Seeded randomized search over log-scaled coordinates. Candidates are
/// scored in parallel batches with a deterministic reduction (first
/// feasible index wins within a batch). `budget` counts condition
/// evaluations.
pub fn search_certificate(
    params: &ModelParams,
    eq: &Equilibrium,
    data: &AssumptionBData,
    budget: usize,
    seed: u64,
) -> SearchOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_sin = data.r_ratio * params.s_in;
    let batch = 64usize;
    let mut evaluated = 0usize;
    let mut best: Option<(f64, CertInput)> = None;

    while evaluated < budget {
        let n = batch.min(budget - evaluated);
        // Half global exploration, half local refinement around the best
        // candidate found so far.
        // lambda buys slack only through alpha; pin it to zero otherwise.
        let free_lambda = data.alpha > 0.0;
        let candidates: Vec<CertInput> = (0..n)
            .map(|j| match &best {
                Some((_, base)) if j % 2 == 1 => {
                    let tau = if j % 4 == 1 { 0.3 } else { 0.05 };
                    perturb(&mut rng, base, tau, r_sin, free_lambda)
                }
                _ => CertInput {
                    sigma: log_uniform(&mut rng, 1e-3, 1e1),
                    epsilon: log_uniform(&mut rng, 1e-3, 1e2),
                    omega: log_uniform(&mut rng, 1e-2, 1e2),
                    lambda: if free_lambda { rng.gen_range(0.0..=1.0) } else { 0.0 },
                    r1: log_uniform(&mut rng, 1e-2, 1e2),
                    r2: log_uniform(&mut rng, 1e-2, 1e2),
                    r3: log_uniform(&mut rng, 1e-2, 1e2),
                    b: log_uniform(&mut rng, 1e-6, 1e1),
                    gamma: log_uniform(&mut rng, 1e-3, 1e2),
                    m: log_uniform(&mut rng, 1e-3, 1e3),
                    f_bound: log_uniform(&mut rng, 1.1 * r_sin, 4.0 * r_sin),
                },
            })
            .collect();
        let scores = indexed_map(n, |i| candidate_score(params, eq, data, &candidates[i]));
        evaluated += n;
        for (i, score) in scores.iter().enumerate() {
            if *score > 0.0 {
                let cert = assemble(params, eq, data, &candidates[i])
                    .expect("scored candidate must assemble");
                let report = check_conditions(&cert, eq, data);
                return SearchOutcome::Found {
                    certificate: cert,
                    report,
                    evaluations: evaluated - n + i + 1,
                };
            }
            if score.is_finite() && best.as_ref().map_or(true, |(s, _)| score > s) {
                best = Some((*score, candidates[i]));
            }
        }
    }
    let (best_margin, best_input) = match best {
        Some((s, c)) => (s, Some(c)),
        None => (f64::NEG_INFINITY, None),
    };
    SearchOutcome::NotFound {
        best_input,
        best_margin,
        evaluations: evaluated,
    }
}
