//! Survivor function, moment integrals, and the interior equilibrium.

use serde::Serialize;

use crate::func::AgeFunction;
use crate::grid::{trapezoid_corrected, trapezoid_product, AgeGrid};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Default bound on the accepted truncated-tail contribution of a moment.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

/// Relative tolerance of the equilibrium bisection.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

/// Cumulative trapezoid of beta: out[i] = integral of beta over [0, a_i].
/// Exact for constant beta, O(da^2) otherwise.
pub fn beta_cumulative(params: &ModelParams, grid: &AgeGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n);
    out.push(0.0);
    let mut acc = 0.0;
    let mut prev = params.beta.value(0.0);
    for i in 1..grid.n {
        let cur = params.beta.value(grid.point(i));
        acc += 0.5 * (prev + cur) * grid.da;
        out.push(acc);
        prev = cur;
    }
    out
}

/// r(a) = exp(-D a - integral of beta over [0, a]) sampled on the grid.
pub fn survivor_profile(params: &ModelParams) -> Vec<f64> {
    let grid = params.grid();
    let bc = beta_cumulative(params, &grid);
    (0..grid.n)
        .map(|i| (-params.d * grid.point(i) - bc[i]).exp())
        .collect()
}

/// Moment <weight, r> of the survivor profile over [0, infinity):
/// endpoint-corrected trapezoid over [0, a_max] plus the exact exponential
/// tail. The endpoint derivatives use r' = -(D + beta)*r, which is exact.
pub fn moment_survivor(
    weight: &AgeFunction,
    r: &[f64],
    params: &ModelParams,
    tail_tol: f64,
) -> Result<f64> {
    let grid = params.grid();
    debug_assert_eq!(r.len(), grid.n);
    let vals: Vec<f64> = (0..grid.n)
        .map(|i| weight.value(grid.point(i)) * r[i])
        .collect();
    let dw = |a: f64, rv: f64| {
        weight.derivative(a) * rv - weight.value(a) * (params.d + params.beta.value(a)) * rv
    };
    let head = trapezoid_corrected(
        &vals,
        grid.da,
        dw(0.0, r[0]),
        dw(grid.a_max, r[grid.n - 1]),
    );
    // Tail: weight ~ amp_w e^{-rw (a-a_max)}, r ~ r(a_max) e^{-(D+beta_inf)(a-a_max)}.
    let tw = weight.tail(grid.a_max);
    let beta_inf = params.beta.tail(grid.a_max).amp;
    let tail_rate = tw.rate + params.d + beta_inf;
    let tail = tw.amp * r[grid.n - 1] / tail_rate;
    if tail.abs() > tail_tol {
        return Err(Error::TailTooLarge {
            estimate: tail,
            tol: tail_tol,
        });
    }
    Ok(head + tail)
}

/// Plain-trapezoid moment of a sampled profile (mass beyond a_max is
/// treated as zero). Used for simulated states.
pub fn moment_sampled(weight_vals: &[f64], profile: &[f64], da: f64) -> f64 {
    trapezoid_product(weight_vals, profile, da)
}

/// The Lotka-Sharpe equilibrium and its derived constants.
#[derive(Debug, Clone, Serialize)]
pub struct Equilibrium {
    pub s_star: f64,
    pub f_star0: f64,
    /// Survivor profile r on the age grid.
    pub r: Vec<f64>,
    /// <k, r>
    pub kr: f64,
    /// <q, r>
    pub qr: f64,
    /// theta = mu(S*) <q, r> = <q, r> / <k, r>
    pub theta: f64,
    /// kappa1 = q(0) / <q, r>
    pub kappa1: f64,
    /// kappa2 = k(0) / <k, r>
    pub kappa2: f64,
    /// L1 norm of r over [0, infinity)
    pub r_norm1: f64,
}

impl Equilibrium {
    /// Equilibrium age profile f*(a) = f*(0) r(a) on the grid.
    pub fn f_star(&self) -> Vec<f64> {
        self.r.iter().map(|v| self.f_star0 * v).collect()
    }

    /// <q, f*> = f*(0) <q, r>
    pub fn qf_star(&self) -> f64 {
        self.f_star0 * self.qr
    }

    /// <k, f*> = f*(0) <k, r>
    pub fn kf_star(&self) -> f64 {
        self.f_star0 * self.kr
    }
}

/// Solves mu(S*)<k, r> = 1 by bisection on (0, S_in) and assembles the
/// equilibrium profile and constants.
pub fn solve_equilibrium(params: &ModelParams) -> Result<Equilibrium> {
    params.check()?;
    let r = survivor_profile(params);
    let kr = moment_survivor(&params.k, &r, params, DEFAULT_TAIL_TOL)?;
    let qr = moment_survivor(&params.q, &r, params, DEFAULT_TAIL_TOL)?;
    let one = AgeFunction::Constant { c: 1.0 };
    let r_norm1 = moment_survivor(&one, &r, params, DEFAULT_TAIL_TOL)?;

    let excess = params.mu.value(params.s_in) * kr;
    if excess <= 1.0 {
        return Err(Error::Washout(excess));
    }
    // mu is increasing, so mu(S)*kr - 1 crosses zero once in (0, S_in).
    let mut lo = 0.0;
    let mut hi = params.s_in;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if params.mu.value(mid) * kr - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= EQUILIBRIUM_TOL * hi {
            break;
        }
    }
    let s_star = 0.5 * (lo + hi);
    let mu_star = params.mu.value(s_star);
    let f_star0 = params.d * (params.s_in - s_star) / (mu_star * qr);
    Ok(Equilibrium {
        s_star,
        f_star0,
        r,
        kr,
        qr,
        theta: mu_star * qr,
        kappa1: params.q.value(0.0) / qr,
        kappa2: params.k.value(0.0) / kr,
        r_norm1,
    })
}
