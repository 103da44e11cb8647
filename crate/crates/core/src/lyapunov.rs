//! Normalized variables, the Lyapunov functional V, the measure Psi, the
//! diagnostic E, and the exact-derivative functional U.

use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::equilibrium::Equilibrium;
use crate::grid::{adaptive_simpson, AgeGrid};
use crate::model::{AssumptionBData, ModelParams};
use crate::simulator::{scheme_moment, State};
use crate::{Error, Result};

/// Absolute tolerance of the adaptive Q(S) quadrature.
pub const Q_TOL: f64 = 1e-10;

/// Weights of the Lyapunov functional.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LyapunovWeights {
    pub sigma: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl LyapunovWeights {
    pub fn check(&self) -> Result<()> {
        if self.sigma < 0.0 || !(self.b > 0.0) || !(self.gamma > 0.0) || !(self.m > 0.0) {
            return Err(Error::Invalid(
                "weights require sigma >= 0 and B, Gamma, M > 0".into(),
            ));
        }
        Ok(())
    }
}

/// e^y - y - 1 without cancellation for small |y|.
pub fn exp_sub(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        // Truncated series y^2/2 (1 + y/3 + y^2/12 + y^3/60 + y^4/360),
        // relative error below 1e-16 for |y| < 1e-2.
        let c = 1.0 + y / 3.0 * (1.0 + y / 4.0 * (1.0 + y / 5.0 * (1.0 + y / 6.0)));
        0.5 * y * y * c
    } else {
        y.exp_m1() - y
    }
}

/// The dimensionless state decomposition of the stability analysis.
#[derive(Debug, Clone)]
pub struct NormalizedVars {
    pub zeta: f64,
    pub xi: f64,
    /// v(a) = f(a) / (f*(0) zeta)
    pub v: Vec<f64>,
    /// chi(a) = v(a) - r(a)
    pub chi: Vec<f64>,
    pub phi: f64,
    pub w: f64,
    pub g: f64,
    /// Boundary flux mu(S) <k, f>.
    pub x: f64,
    pub s: f64,
}

/// Shared sampled data for repeated Lyapunov evaluations on one grid.
pub struct LyapunovContext<'a> {
    pub params: &'a ModelParams,
    pub eq: &'a Equilibrium,
    pub grid: AgeGrid,
    k_vals: Vec<f64>,
    q_vals: Vec<f64>,
    beta_vals: Vec<f64>,
    mu_star: f64,
}

impl<'a> LyapunovContext<'a> {
    pub fn new(params: &'a ModelParams, eq: &'a Equilibrium) -> Self {
        let grid = params.grid();
        LyapunovContext {
            params,
            eq,
            k_vals: grid.sample(|a| params.k.value(a)),
            q_vals: grid.sample(|a| params.q.value(a)),
            beta_vals: grid.sample(|a| params.beta.value(a)),
            mu_star: params.mu.value(eq.s_star),
            grid,
        }
    }

    pub fn normalized_vars(&self, state: &State) -> Result<NormalizedVars> {
        if !(state.s > 0.0 && state.s < self.params.s_in) {
            return Err(Error::OutsideStateSpace(format!(
                "S = {} outside (0, S_in)",
                state.s
            )));
        }
        let da = self.grid.da;
        let kf = scheme_moment(&self.k_vals, &state.f, da);
        let qf = scheme_moment(&self.q_vals, &state.f, da);
        if !(kf > 0.0) || !(qf > 0.0) {
            return Err(Error::OutsideStateSpace(format!(
                "non-positive moments <k,f> = {kf}, <q,f> = {qf}"
            )));
        }
        let zeta = qf / self.eq.qf_star();
        let xi = kf / self.eq.kf_star();
        let scale = 1.0 / (self.eq.f_star0 * zeta);
        let v: Vec<f64> = state.f.iter().map(|fv| fv * scale).collect();
        let chi: Vec<f64> = v.iter().zip(self.eq.r.iter()).map(|(a, b)| a - b).collect();
        let s_in = self.params.s_in;
        Ok(NormalizedVars {
            zeta,
            xi,
            phi: (xi / zeta).ln(),
            w: ((s_in - self.eq.s_star) * zeta / (s_in - state.s)).ln(),
            g: self.params.mu.value(state.s) / self.mu_star,
            x: self.params.mu.value(state.s) * kf,
            s: state.s,
            v,
            chi,
        })
    }

    /// ||rho chi||_2^2 with the exponential tail (chi = -r beyond a_max).
    pub fn rho_chi_sq(&self, nv: &NormalizedVars, sigma: f64) -> f64 {
        let vals: Vec<f64> = (0..self.grid.n)
            .map(|i| {
                let rho = (-sigma * self.grid.point(i)).exp();
                (rho * nv.chi[i]).powi(2)
            })
            .collect();
        crate::grid::trapezoid(&vals, self.grid.da) + self.tail_rr(sigma)
    }

    /// Tail integral of rho^2 r^2 beyond a_max (exact exponential form).
    fn tail_rr(&self, sigma: f64) -> f64 {
        let r_end = *self.eq.r.last().unwrap();
        let rho_end = (-sigma * self.grid.a_max).exp();
        let beta_inf = self.params.beta.tail(self.grid.a_max).amp;
        (rho_end * r_end).powi(2) / (2.0 * (sigma + self.params.d + beta_inf))
    }

    fn weighted_chi_moment(&self, weight: impl Fn(usize, f64) -> f64, chi: &[f64]) -> f64 {
        let vals: Vec<f64> = (0..self.grid.n)
            .map(|i| weight(i, self.grid.point(i)) * chi[i])
            .collect();
        crate::grid::trapezoid(&vals, self.grid.da)
    }

    /// Q(S): adaptive Simpson of M (g - 1) / ((S_in - S) g) from S* to S.
    pub fn q_of_s(&self, s: f64, m_weight: f64) -> Result<f64> {
        let s_in = self.params.s_in;
        if !(s >= 1e-6 * s_in && s <= s_in * (1.0 - 1e-6)) {
            return Err(Error::OutsideStateSpace(format!(
                "Q(S) evaluation rejected: S = {s} too close to the boundary of (0, S_in)"
            )));
        }
        let mu_star = self.mu_star;
        let integrand = |x: f64| {
            let g = self.params.mu.value(x) / mu_star;
            m_weight * (g - 1.0) / ((s_in - x) * g)
        };
        Ok(adaptive_simpson(&integrand, self.eq.s_star, s, Q_TOL))
    }
}

/// The Lyapunov functional with its per-summand breakdown.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VBreakdown {
    /// exp(phi) - phi - 1
    pub phi_term: f64,
    /// Gamma (exp(w) - w - 1)
    pub w_term: f64,
    pub q_term: f64,
    /// (B/2) ||rho chi||_2^2
    pub chi_term: f64,
    pub rho_chi_sq: f64,
    pub v: f64,
}

pub fn lyapunov_v(
    ctx: &LyapunovContext,
    nv: &NormalizedVars,
    weights: &LyapunovWeights,
) -> Result<VBreakdown> {
    weights.check()?;
    let phi_term = exp_sub(nv.phi);
    let w_term = weights.gamma * exp_sub(nv.w);
    let q_term = ctx.q_of_s(nv.s, weights.m)?;
    let rho_chi_sq = ctx.rho_chi_sq(nv, weights.sigma);
    let chi_term = 0.5 * weights.b * rho_chi_sq;
    Ok(VBreakdown {
        phi_term,
        w_term,
        q_term,
        chi_term,
        rho_chi_sq,
        v: phi_term + w_term + q_term + chi_term,
    })
}

/// Psi = |S - S*| + ||f - f*||_inf + ||f - f*||_1 + V.
pub fn measure_psi(
    ctx: &LyapunovContext,
    state: &State,
    weights: &LyapunovWeights,
) -> Result<f64> {
    let nv = ctx.normalized_vars(state)?;
    let vb = lyapunov_v(ctx, &nv, weights)?;
    let fstar = ctx.eq.f_star();
    let mut sup = 0.0f64;
    let mut dev = Vec::with_capacity(state.f.len());
    for (a, b) in state.f.iter().zip(fstar.iter()) {
        let d = (a - b).abs();
        sup = sup.max(d);
        dev.push(d);
    }
    let l1 = crate::grid::trapezoid(&dev, ctx.grid.da);
    Ok((state.s - ctx.eq.s_star).abs() + sup + l1 + vb.v)
}

/// E = (e^phi - 1)^2 + (e^w - 1)^2 + (g - 1)^2 + ||rho chi||_2^2.
pub fn diagnostic_e(ctx: &LyapunovContext, nv: &NormalizedVars, sigma: f64) -> f64 {
    nv.phi.exp_m1().powi(2)
        + nv.w.exp_m1().powi(2)
        + (nv.g - 1.0).powi(2)
        + ctx.rho_chi_sq(nv, sigma)
}

/// Per-term breakdown of the exact derivative U along solutions.
#[derive(Debug, Clone, Serialize)]
pub struct UBreakdown {
    pub terms: Vec<(&'static str, f64)>,
    pub u: f64,
    pub rho_chi_sq: f64,
}

/// Evaluates U term by term. dV/dt equals U along weak solutions, which
/// makes U a finite-difference oracle for V and vice versa.
pub fn derivative_u(
    ctx: &LyapunovContext,
    nv: &NormalizedVars,
    data: &AssumptionBData,
    weights: &LyapunovWeights,
) -> Result<UBreakdown> {
    weights.check()?;
    data.check()?;
    let eq = ctx.eq;
    let p = ctx.params;
    let (kappa1, kappa2, qr) = (eq.kappa1, eq.kappa2, eq.qr);
    let (gamma_b, delta, alpha, theta) = (data.gamma, data.delta, data.alpha, data.theta);
    let (big_b, big_g, big_m, sigma) = (weights.b, weights.gamma, weights.m, weights.sigma);
    let d = p.d;
    let g = nv.g;
    let ephi1 = nv.phi.exp_m1();
    let ew1 = nv.w.exp_m1();
    let g1 = g - 1.0;

    let grid = &ctx.grid;
    let sample = |f: &crate::func::AgeFunction| grid.sample(|a| f.value(a));
    let h_vals = sample(&data.h);
    let p_vals = sample(&data.p);
    let pv = crate::grid::trapezoid_product(&p_vals, &nv.v, grid.da);
    let hv = crate::grid::trapezoid_product(&h_vals, &nv.v, grid.da);
    let h_chi = ctx.weighted_chi_moment(|i, _| h_vals[i], &nv.chi);
    let tph_chi = ctx.weighted_chi_moment(|i, _| theta * p_vals[i] - h_vals[i], &nv.chi);
    let rho2 = |a: f64| (-2.0 * sigma * a).exp();
    // <beta rho^2 chi, chi> and <rho^2 r, chi>, both with the chi = -r tail.
    let beta_inf = p.beta.tail(grid.a_max).amp;
    let tail_rr = ctx.tail_rr(sigma);
    let beta_chi = ctx.weighted_chi_moment(|i, a| ctx.beta_vals[i] * rho2(a) * nv.chi[i], &nv.chi)
        + beta_inf * tail_rr;
    let rr_chi =
        ctx.weighted_chi_moment(|i, a| rho2(a) * eq.r[i], &nv.chi) - tail_rr;
    let rho_chi_sq = ctx.rho_chi_sq(nv, sigma);

    let kg = kappa1 * g + delta;
    let terms: Vec<(&'static str, f64)> = vec![
        ("alpha_phi", -(alpha + theta * pv / qr) * (-nv.phi).exp() * ephi1 * ephi1),
        ("kappa_phi_sq", -kg * ephi1 * ephi1),
        ("kappa_cross", (kappa2 - kappa1) * g1 * ephi1),
        ("tph_chi_phi", tph_chi / qr * ephi1),
        ("gamma_w_sq", -big_g * d * g * ew1 * ew1),
        ("gw_cross", (big_g * kappa1 - big_g * d - d * big_m) * g1 * ew1),
        ("boundary_sq", 0.5 * big_b * (g * ephi1 + g1).powi(2)),
        ("phi_w_cross", big_g * kg * ephi1 * ew1),
        ("g_sq", -d * big_m * g1 * g1 / g),
        ("h_chi_w", big_g * h_chi / qr * ew1),
        (
            "rho_chi_dissipation",
            -big_b * (gamma_b * d + sigma + kg * nv.phi.exp() + hv / qr) * rho_chi_sq,
        ),
        ("beta_rho_chi", -big_b * beta_chi),
        (
            "rr_chi_coupling",
            -big_b * (kg * ephi1 + kappa1 * g1 + h_chi / qr) * rr_chi,
        ),
    ];
    let u = terms.iter().map(|(_, v)| v).sum();
    Ok(UBreakdown {
        terms,
        u,
        rho_chi_sq,
    })
}

/// Margin report of the decay inequality dV/dt <= -z'Pz - Bc ||rho chi||^2.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub u: f64,
    pub ztpz: f64,
    pub rho_chi_term: f64,
    /// U + z'Pz + Bc ||rho chi||^2; the inequality holds when <= tol.
    pub slack: f64,
    pub k0: f64,
}

/// Checks the decay inequality at one state inside the trapping region.
pub fn decay_check(
    ctx: &LyapunovContext,
    state: &State,
    nv: &NormalizedVars,
    data: &AssumptionBData,
    cert: &Certificate,
) -> Result<DecayReport> {
    let mass = crate::grid::trapezoid(&state.f, ctx.grid.da);
    let slack_tol = 1e-9 * (1.0 + cert.f_bound);
    if data.r_ratio * state.s + mass > cert.f_bound + slack_tol || state.s < cert.s_lower - slack_tol
    {
        return Err(Error::OutsideTrapping(format!(
            "RS + mass = {}, S = {} vs F = {}, S_lower = {}",
            data.r_ratio * state.s + mass,
            state.s,
            cert.f_bound,
            cert.s_lower
        )));
    }
    let ub = derivative_u(ctx, nv, data, &cert.weights)?;
    let sqg = nv.g.sqrt();
    let z = [
        sqg * nv.phi.exp_m1(),
        sqg * nv.w.exp_m1(),
        (nv.g - 1.0) / sqg,
    ];
    let mut ztpz = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            ztpz += z[i] * cert.p[i][j] * z[j];
        }
    }
    let rho_chi_term = cert.weights.b * cert.c * ub.rho_chi_sq;
    Ok(DecayReport {
        u: ub.u,
        ztpz,
        rho_chi_term,
        slack: ub.u + ztpz + rho_chi_term,
        k0: cert.k0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;
    use crate::model::{toth_kot_assumption_b, toth_kot_model};
    use approx::assert_relative_eq;

    fn setup() -> (ModelParams, Equilibrium) {
        let m = toth_kot_model(2.0, 0.5, 0.5, 1.0, 2.0, 4001);
        let eq = solve_equilibrium(&m).unwrap();
        (m, eq)
    }

    fn weights() -> LyapunovWeights {
        LyapunovWeights {
            sigma: 0.0,
            b: 1.0,
            gamma: 1.0,
            m: 1.0,
        }
    }

    #[test]
    fn exp_sub_is_stable_near_zero() {
        assert_eq!(exp_sub(0.0), 0.0);
        for &y in &[1e-9, -1e-7, 1e-4, -1e-3, 0.5, -2.0] {
            let brute = (y as f64).exp() - y - 1.0;
            assert_relative_eq!(exp_sub(y), brute, max_relative = 1e-7);
        }
        // Quadratic leading order where brute force loses all digits.
        assert_relative_eq!(exp_sub(1e-9), 0.5e-18, max_relative = 1e-9);
    }

    #[test]
    fn equilibrium_normalizes_to_identity() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        let state = State {
            f: eq.f_star(),
            s: eq.s_star,
            t: 0.0,
        };
        let nv = ctx.normalized_vars(&state).unwrap();
        assert_relative_eq!(nv.zeta, 1.0, max_relative = 1e-10);
        assert_relative_eq!(nv.xi, 1.0, max_relative = 1e-10);
        assert!(nv.phi.abs() < 1e-10 && nv.w.abs() < 1e-10);
        assert_relative_eq!(nv.g, 1.0, max_relative = 1e-12);
        let chi_max = nv.chi.iter().cloned().fold(0.0, f64::max);
        assert!(chi_max.abs() < 1e-10);
        let vb = lyapunov_v(&ctx, &nv, &weights()).unwrap();
        assert!(vb.v < 1e-12, "V at equilibrium = {}", vb.v);
        assert!(measure_psi(&ctx, &state, &weights()).unwrap() < 1e-9);
    }

    #[test]
    fn doubled_profile_worked_example() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        let state = State {
            f: eq.f_star().iter().map(|v| 2.0 * v).collect(),
            s: eq.s_star,
            t: 0.0,
        };
        let nv = ctx.normalized_vars(&state).unwrap();
        assert_relative_eq!(nv.zeta, 2.0, max_relative = 1e-10);
        assert_relative_eq!(nv.xi, 2.0, max_relative = 1e-10);
        assert!(nv.phi.abs() < 1e-10);
        assert_relative_eq!(nv.w, 2.0f64.ln(), max_relative = 1e-10);
        let chi_max = nv.chi.iter().map(|c| c.abs()).fold(0.0, f64::max);
        assert!(chi_max < 1e-10);
        // V = 1 - ln 2 with unit weights.
        let vb = lyapunov_v(&ctx, &nv, &weights()).unwrap();
        assert_relative_eq!(vb.v, 1.0 - 2.0f64.ln(), max_relative = 1e-8);
        // Psi adds ||f*||_inf + ||f*||_1.
        let psi = measure_psi(&ctx, &state, &weights()).unwrap();
        let expected = eq.f_star0 + eq.f_star0 * eq.r_norm1 + vb.v;
        assert_relative_eq!(psi, expected, max_relative = 1e-4);
    }

    #[test]
    fn scaling_identity() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        // A genuinely perturbed profile, then scaled by c.
        let base: Vec<f64> = eq
            .f_star()
            .iter()
            .enumerate()
            .map(|(i, v)| v * (1.0 + 0.3 * (-0.1 * i as f64).exp()))
            .collect();
        let c = 2.7;
        let s = 1.3;
        let nv1 = ctx
            .normalized_vars(&State { f: base.clone(), s, t: 0.0 })
            .unwrap();
        let scaled: Vec<f64> = base.iter().map(|v| c * v).collect();
        let nv2 = ctx
            .normalized_vars(&State { f: scaled, s, t: 0.0 })
            .unwrap();
        assert_relative_eq!(nv1.phi, nv2.phi, epsilon = 1e-12);
        assert_relative_eq!(nv2.w - nv1.w, c.ln(), epsilon = 1e-12);
        for (a, b) in nv1.chi.iter().zip(nv2.chi.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn q_is_positive_away_from_equilibrium() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        assert_eq!(ctx.q_of_s(eq.s_star, 1.0).unwrap(), 0.0);
        assert!(ctx.q_of_s(eq.s_star * 1.1, 1.0).unwrap() > 0.0);
        assert!(ctx.q_of_s(eq.s_star * 0.9, 1.0).unwrap() > 0.0);
        assert!(ctx.q_of_s(1e-9, 1.0).is_err());
    }

    #[test]
    fn q_matches_reference_quadrature() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        // Linear mu: integrand M (S - S*) / ((S_in - S) S). Reference:
        // dense composite trapezoid.
        let s_hi = 1.5;
        let n = 1_000_001usize;
        let h = (s_hi - eq.s_star) / (n - 1) as f64;
        let f = |x: f64| (x - eq.s_star) / ((m.s_in - x) * x);
        let mut acc = 0.5 * (f(eq.s_star) + f(s_hi));
        for i in 1..n - 1 {
            acc += f(eq.s_star + i as f64 * h);
        }
        let reference = acc * h;
        let q = ctx.q_of_s(s_hi, 1.0).unwrap();
        assert!((q - reference).abs() < 1e-9, "q = {q}, ref = {reference}");
    }

    #[test]
    fn u_vanishes_at_equilibrium_and_h_p_terms_drop() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        let data = toth_kot_assumption_b(2.0, 0.5, 0.5, 1.0, eq.theta);
        let state = State {
            f: eq.f_star(),
            s: eq.s_star,
            t: 0.0,
        };
        let nv = ctx.normalized_vars(&state).unwrap();
        let ub = derivative_u(&ctx, &nv, &data, &weights()).unwrap();
        assert!(ub.u.abs() < 1e-10, "U at equilibrium = {}", ub.u);
        for (name, v) in &ub.terms {
            if matches!(*name, "tph_chi_phi" | "h_chi_w") {
                assert_eq!(*v, 0.0, "{name} must vanish for h = p = 0");
            }
        }
    }

    #[test]
    fn e_diagnostic_zero_only_at_equilibrium() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        let at_eq = State {
            f: eq.f_star(),
            s: eq.s_star,
            t: 0.0,
        };
        let nv = ctx.normalized_vars(&at_eq).unwrap();
        assert!(diagnostic_e(&ctx, &nv, 0.5) < 1e-15);
        let off = State {
            f: eq.f_star().iter().map(|v| 1.5 * v).collect(),
            s: eq.s_star,
            t: 0.0,
        };
        let nv2 = ctx.normalized_vars(&off).unwrap();
        assert!(diagnostic_e(&ctx, &nv2, 0.5) > 0.1);
    }

    #[test]
    fn v_dominates_chi_summand() {
        let (m, eq) = setup();
        let ctx = LyapunovContext::new(&m, &eq);
        let off = State {
            f: eq
                .f_star()
                .iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 + 0.2 * (-0.05 * i as f64).exp()))
                .collect(),
            s: 1.2,
            t: 0.0,
        };
        let nv = ctx.normalized_vars(&off).unwrap();
        let vb = lyapunov_v(&ctx, &nv, &weights()).unwrap();
        assert!(vb.v >= vb.chi_term);
        assert!(vb.phi_term >= 0.0 && vb.w_term >= 0.0 && vb.q_term >= 0.0);
    }
}
