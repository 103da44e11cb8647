//! Characteristics-aligned grid scheme for the coupled transport/substrate
//! system, plus the explicit-solution oracle and trapping-region tracking.
//!
//! With dt = da the transport term is advanced exactly: each cell slides
//! one slot up the age axis and picks up the (exact for constant beta)
//! decay factor exp(-(D + beta_bar)*dt). Only the substrate coupling and
//! the renewal boundary closure carry discretization error.

use serde::Serialize;

use crate::equilibrium::{beta_cumulative, Equilibrium};
use crate::model::{AssumptionBData, ModelParams};
use crate::{Error, Result};

/// Relative boundary-compatibility threshold beyond which initial data is
/// projected back onto the state space.
pub const PROJECTION_TOL: f64 = 1e-8;

/// One point-in-time state of the coupled system.
#[derive(Debug, Clone, Serialize)]
pub struct State {
    /// Age density sampled on the uniform grid.
    pub f: Vec<f64>,
    /// Substrate concentration, in (0, S_in).
    pub s: f64,
    pub t: f64,
}

/// Endpoint-corrected trapezoid of weight*profile with third-order
/// one-sided finite-difference endpoint derivatives. Error O(da^4) on
/// smooth data, which keeps the discrete fixed point within 1e-10 of the
/// continuum equilibrium on desk-scale grids.
pub fn scheme_moment(weight: &[f64], profile: &[f64], da: f64) -> f64 {
    let n = profile.len();
    debug_assert!(n >= 4 && weight.len() == n);
    let g = |i: usize| weight[i] * profile[i];
    let mut s = 0.5 * (g(0) + g(n - 1));
    for i in 1..n - 1 {
        s += g(i);
    }
    let d0 = (-11.0 * g(0) + 18.0 * g(1) - 9.0 * g(2) + 2.0 * g(3)) / (6.0 * da);
    let d1 = (11.0 * g(n - 1) - 18.0 * g(n - 2) + 9.0 * g(n - 3) - 2.0 * g(n - 4)) / (6.0 * da);
    da * s - da * da / 12.0 * (d1 - d0)
}

/// Weight of profile[0] in [`scheme_moment`] (affine dependence used by
/// the boundary closure): da/2 from the trapezoid, -11*da/72 from the
/// correction stencil.
fn boundary_weight(k0: f64, da: f64) -> f64 {
    k0 * 25.0 * da / 72.0
}

/// Precomputed per-grid data for repeated stepping.
pub struct Stepper {
    pub params: ModelParams,
    pub da: f64,
    /// decay[i] advances cell i to cell i+1.
    decay: Vec<f64>,
    pub k_vals: Vec<f64>,
    pub q_vals: Vec<f64>,
    ones: Vec<f64>,
}

impl Stepper {
    pub fn new(params: &ModelParams) -> Self {
        let grid = params.grid();
        let da = grid.da;
        let decay: Vec<f64> = (0..grid.n - 1)
            .map(|i| {
                let bbar =
                    0.5 * (params.beta.value(grid.point(i)) + params.beta.value(grid.point(i + 1)));
                (-(params.d + bbar) * da).exp()
            })
            .collect();
        Stepper {
            params: params.clone(),
            da,
            decay,
            k_vals: grid.sample(|a| params.k.value(a)),
            q_vals: grid.sample(|a| params.q.value(a)),
            ones: vec![1.0; grid.n],
        }
    }

    pub fn mass(&self, f: &[f64]) -> f64 {
        scheme_moment(&self.ones, f, self.da)
    }

    pub fn kf(&self, f: &[f64]) -> f64 {
        scheme_moment(&self.k_vals, f, self.da)
    }

    pub fn qf(&self, f: &[f64]) -> f64 {
        scheme_moment(&self.q_vals, f, self.da)
    }

    /// Solves the affine renewal closure f(0) = mu(s) * <k, f> with f(0)
    /// appearing inside the quadrature.
    fn close_boundary(&self, f: &mut [f64], s: f64) -> Result<f64> {
        let mu = self.params.mu.value(s);
        // Conservative coarseness gate per the plain-trapezoid weight.
        let coarse = mu * self.k_vals[0] * self.da / 2.0;
        if coarse >= 1.0 {
            return Err(Error::BoundaryClosure(coarse));
        }
        f[0] = 0.0;
        let rest = self.kf(f);
        let c = mu * boundary_weight(self.k_vals[0], self.da);
        if c >= 1.0 {
            return Err(Error::BoundaryClosure(c));
        }
        f[0] = mu * rest / (1.0 - c);
        Ok(f[0])
    }

    /// One step of size dt = da. Returns the new state.
    pub fn step(&self, state: &State) -> Result<State> {
        let n = state.f.len();
        let dt = self.da;
        let mut fnew = vec![0.0; n];
        for i in 0..n - 1 {
            fnew[i + 1] = state.f[i] * self.decay[i];
        }
        // Predictor boundary at the old substrate level, for the moment
        // used in the substrate update.
        self.close_boundary(&mut fnew, state.s)?;
        let qf0 = self.qf(&state.f);
        let qf1 = self.qf(&fnew);

        // Classical RK4 for S' = D(S_in - S) - mu(S)<q,f>, with <q,f>
        // interpolated linearly in time between the old and predictor
        // profiles.
        let rhs = |s: f64, tau: f64| {
            let qf = qf0 + tau / dt * (qf1 - qf0);
            self.params.d * (self.params.s_in - s) - self.params.mu.value(s) * qf
        };
        let s = state.s;
        let k1 = rhs(s, 0.0);
        let k2 = rhs(s + 0.5 * dt * k1, 0.5 * dt);
        let k3 = rhs(s + 0.5 * dt * k2, 0.5 * dt);
        let k4 = rhs(s + dt * k3, dt);
        let s_new = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(s_new > 0.0 && s_new < self.params.s_in) {
            return Err(Error::SchemeInstability(s_new));
        }
        // Corrector boundary at the updated substrate level.
        self.close_boundary(&mut fnew, s_new)?;
        Ok(State {
            f: fnew,
            s: s_new,
            t: state.t + dt,
        })
    }
}

/// Builds an initial state, projecting f(0) onto the renewal boundary
/// condition when it is violated beyond [`PROJECTION_TOL`] relative.
/// Returns the state and whether a projection was applied.
pub fn make_initial(mut f: Vec<f64>, s0: f64, params: &ModelParams) -> Result<(State, bool)> {
    let grid = params.grid();
    if f.len() != grid.n {
        return Err(Error::Invalid(format!(
            "initial profile has {} samples, grid has {}",
            f.len(),
            grid.n
        )));
    }
    if f.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::OutsideStateSpace(
            "initial profile must be strictly positive".into(),
        ));
    }
    if !(s0 > 0.0 && s0 < params.s_in) {
        return Err(Error::OutsideStateSpace(format!(
            "S0 = {s0} outside (0, S_in)"
        )));
    }
    let stepper = Stepper::new(params);
    let target = params.mu.value(s0) * stepper.kf(&f);
    let projected = (f[0] - target).abs() > PROJECTION_TOL * target.abs().max(f64::MIN_POSITIVE);
    if projected {
        stepper.close_boundary(&mut f, s0)?;
    }
    Ok((
        State { f, s: s0, t: 0.0 },
        projected,
    ))
}

/// Per-step scalar records plus strided full-profile snapshots.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub mass: Vec<f64>,
    pub kf: Vec<f64>,
    pub qf: Vec<f64>,
    /// Boundary flux x(t) = mu(S)<k, f>.
    pub x: Vec<f64>,
    pub snapshots: Vec<State>,
    /// True when f(a_max)/max f exceeded 1e-10 at some step.
    pub tail_warning: bool,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        *self.t.last().unwrap()
    }
}

/// Simulation options.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub horizon: f64,
    pub stride: usize,
    /// Assert the pathwise bounds at every step.
    pub assert_bounds: bool,
}

fn bound_tol(da: f64) -> f64 {
    1e-6 + 10.0 * da
}

struct BoundChecker<'a> {
    params: &'a ModelParams,
    data: Option<&'a AssumptionBData>,
    tol: f64,
    s0: f64,
    y0: f64,
    xi0: f64,
    zeta0: f64,
    s_floor: f64,
}

impl<'a> BoundChecker<'a> {
    fn new(
        params: &'a ModelParams,
        eq: &Equilibrium,
        data: Option<&'a AssumptionBData>,
        initial: &State,
        stepper: &Stepper,
    ) -> Self {
        let mass0 = stepper.mass(&initial.f);
        let (y0, s_floor) = match data {
            Some(d) => {
                let r = d.r_ratio;
                let y0 = r * initial.s + mass0;
                let lmu = params.l_mu();
                let qsup = params.q.sup_norm();
                let denom =
                    params.d + lmu * qsup * (r * params.s_in + (y0 - r * params.s_in).max(0.0));
                (y0, (params.d * params.s_in / denom).min(initial.s))
            }
            None => (0.0, 0.0),
        };
        BoundChecker {
            params,
            data,
            tol: bound_tol(stepper.da),
            s0: initial.s,
            y0,
            xi0: stepper.kf(&initial.f) / eq.kf_star(),
            zeta0: stepper.qf(&initial.f) / eq.qf_star(),
            s_floor,
        }
    }

    fn check(&self, t: f64, s: f64, mass: f64, xi: f64, zeta: f64) -> Result<()> {
        let p = self.params;
        let edt = (-p.d * t).exp();
        // Substrate upper bound (monotone relaxation toward S_in).
        let s_upper = p.s_in - (p.s_in - self.s0) * edt;
        if s > s_upper + self.tol {
            return Err(Error::Invalid(format!(
                "pathwise bound violated at t = {t}: S = {s} > upper bound {s_upper}"
            )));
        }
        if let Some(d) = self.data {
            // Total-resource dissipation bound.
            let y = d.r_ratio * s + mass;
            let y_bound = d.r_ratio * p.s_in + (self.y0 - d.r_ratio * p.s_in) * edt;
            if y > y_bound + self.tol {
                return Err(Error::Invalid(format!(
                    "pathwise bound violated at t = {t}: RS + mass = {y} > {y_bound}"
                )));
            }
            // Substrate lower bound.
            if s < self.s_floor - self.tol {
                return Err(Error::Invalid(format!(
                    "pathwise bound violated at t = {t}: S = {s} < floor {}",
                    self.s_floor
                )));
            }
            // Moment lower bounds.
            let xi_low = (p.d * (d.b - 1.0) * t).exp() * self.xi0;
            let zeta_low = (p.d * (d.gamma - 1.0) * t).exp() * self.zeta0;
            if xi + self.tol < xi_low {
                return Err(Error::Invalid(format!(
                    "pathwise bound violated at t = {t}: xi = {xi} < {xi_low}"
                )));
            }
            if zeta + self.tol < zeta_low {
                return Err(Error::Invalid(format!(
                    "pathwise bound violated at t = {t}: zeta = {zeta} < {zeta_low}"
                )));
            }
        }
        Ok(())
    }
}

/// Integrates the system from `initial` to the horizon, recording per-step
/// scalars and a snapshot every `stride` steps.
pub fn simulate(
    initial: &State,
    params: &ModelParams,
    eq: &Equilibrium,
    data: Option<&AssumptionBData>,
    opts: SimOptions,
) -> Result<Trajectory> {
    assert!(opts.horizon >= 0.0 && opts.stride >= 1);
    let stepper = Stepper::new(params);
    let n_steps = (opts.horizon / stepper.da).round() as usize;
    let checker = if opts.assert_bounds {
        Some(BoundChecker::new(params, eq, data, initial, &stepper))
    } else {
        None
    };

    let mut traj = Trajectory {
        dt: stepper.da,
        stride: opts.stride,
        t: Vec::with_capacity(n_steps + 1),
        s: Vec::with_capacity(n_steps + 1),
        mass: Vec::with_capacity(n_steps + 1),
        kf: Vec::with_capacity(n_steps + 1),
        qf: Vec::with_capacity(n_steps + 1),
        x: Vec::with_capacity(n_steps + 1),
        snapshots: Vec::new(),
        tail_warning: false,
    };

    let mut state = initial.clone();
    let record = |traj: &mut Trajectory, state: &State, step: usize| -> Result<()> {
        let mass = stepper.mass(&state.f);
        let kf = stepper.kf(&state.f);
        let qf = stepper.qf(&state.f);
        traj.t.push(state.t);
        traj.s.push(state.s);
        traj.mass.push(mass);
        traj.kf.push(kf);
        traj.qf.push(qf);
        traj.x.push(params.mu.value(state.s) * kf);
        let fmax = state.f.iter().cloned().fold(0.0, f64::max);
        if state.f[state.f.len() - 1] > 1e-10 * fmax {
            traj.tail_warning = true;
        }
        if step % opts.stride == 0 {
            traj.snapshots.push(state.clone());
        }
        if let Some(ch) = &checker {
            ch.check(state.t, state.s, mass, kf / eq.kf_star(), qf / eq.qf_star())?;
        }
        Ok(())
    };

    record(&mut traj, &state, 0)?;
    for step in 1..=n_steps {
        state = stepper.step(&state)?;
        record(&mut traj, &state, step)?;
    }
    Ok(traj)
}

/// Boundary-flux history x(j*dt) recorded by the scheme.
pub struct BoundaryHistory<'a> {
    pub dt: f64,
    pub x: &'a [f64],
}

/// Explicit solution representation on the grid at t = m*dt:
/// f(t, a) = f0(a - t) exp(-Dt - int_{a-t}^a beta) for a >= t, and
/// x(t - a) exp(-Da - int_0^a beta) for t > a. Used as a cross-check
/// oracle against the stepped solution.
pub fn oracle_profile(
    t: f64,
    hist: &BoundaryHistory,
    f0: &[f64],
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let grid = params.grid();
    let m = (t / hist.dt).round() as usize;
    if (t - m as f64 * hist.dt).abs() > 1e-9 * hist.dt.max(1.0) || m >= hist.x.len() {
        return Err(Error::HistoryRange {
            t,
            t_max: (hist.x.len().saturating_sub(1)) as f64 * hist.dt,
        });
    }
    let bc = beta_cumulative(params, &grid);
    let out = (0..grid.n)
        .map(|i| {
            if i >= m {
                f0[i - m] * (-params.d * t - (bc[i] - bc[i - m])).exp()
            } else {
                hist.x[m - i] * (-params.d * grid.point(i) - bc[i]).exp()
            }
        })
        .collect();
    Ok(out)
}

/// Trapping-region entry report.
#[derive(Debug, Clone, Serialize)]
pub struct TrappingStatus {
    pub f_bound: f64,
    pub s_lower: f64,
    /// First recorded time inside the region, if any.
    pub entered_at: Option<f64>,
    /// Lemma-2 entry-time prediction evaluated at the initial resources.
    pub t_bound: f64,
}

/// S_lower per the trapping-region definition.
pub fn s_lower(params: &ModelParams, f_bound: f64) -> f64 {
    params.d * params.s_in
        / (2.0 * (params.d + params.l_mu() * f_bound * params.q.sup_norm()))
}

/// Predicted entry time for initial resources s = R*S0 + ||f0||_1.
pub fn entry_time_bound(params: &ModelParams, f_bound: f64, r: f64, s: f64) -> f64 {
    let excess = (s - f_bound).max(0.0);
    (1.0 / params.d) * (1.0 + excess / (f_bound - r * params.s_in)).ln()
        + std::f64::consts::LN_2 / (params.d + params.l_mu() * f_bound * params.q.sup_norm())
}

/// Scans a trajectory for trapping-region entry and checks the entry time
/// against the predicted bound.
pub fn trapping_report(
    traj: &Trajectory,
    params: &ModelParams,
    f_bound: f64,
    r: f64,
) -> Result<TrappingStatus> {
    if !(f_bound > r * params.s_in) {
        return Err(Error::Invalid(format!(
            "F = {f_bound} must exceed R*S_in = {}",
            r * params.s_in
        )));
    }
    let sl = s_lower(params, f_bound);
    let s_init = r * traj.s[0] + traj.mass[0];
    let t_bound = entry_time_bound(params, f_bound, r, s_init);

    let entered_at = traj
        .t
        .iter()
        .zip(traj.s.iter().zip(traj.mass.iter()))
        .find(|(_, (s, mass))| r * **s + **mass <= f_bound && **s >= sl)
        .map(|(t, _)| *t);

    let slack = traj.stride as f64 * traj.dt;
    match entered_at {
        Some(te) if te <= t_bound + slack => Ok(TrappingStatus {
            f_bound,
            s_lower: sl,
            entered_at,
            t_bound,
        }),
        Some(te) => Err(Error::Invalid(format!(
            "trapping entry at t = {te} exceeds predicted bound {t_bound}"
        ))),
        None if traj.horizon() < t_bound => Err(Error::Inconclusive {
            t_bound,
            horizon: traj.horizon(),
        }),
        None => Err(Error::Invalid(format!(
            "trajectory never entered the trapping region despite horizon {} >= bound {t_bound}",
            traj.horizon()
        ))),
    }
}

/// Independent oracle: the closed moment system for xi = <k,f>/<k,f*>,
/// zeta = <q,f>/<q,f*> coupled with the substrate equation. Closed only
/// when h = p = 0 (the residual terms involve the full profile otherwise).
pub fn moment_ode_oracle(
    params: &ModelParams,
    eq: &Equilibrium,
    data: &AssumptionBData,
    xi0: f64,
    zeta0: f64,
    s0: f64,
    horizon: f64,
    dt: f64,
) -> Result<Vec<(f64, f64, f64, f64)>> {
    if !data.h.is_zero() || !data.p.is_zero() {
        return Err(Error::Invalid(
            "moment system is closed only for h = p = 0".into(),
        ));
    }
    let k0 = params.k.value(0.0);
    let q0 = params.q.value(0.0);
    let ratio_kq = eq.kf_star() / eq.qf_star();
    let rhs = |y: [f64; 3]| -> [f64; 3] {
        let [xi, zeta, s] = y;
        let mu = params.mu.value(s);
        [
            (k0 * mu + (data.b - 1.0) * params.d) * xi
                + data.alpha * eq.qf_star() / (data.theta * eq.kf_star()) * zeta,
            (q0 * mu + data.delta * data.theta) * ratio_kq * xi
                + params.d * (data.gamma - 1.0) * zeta,
            params.d * (params.s_in - s) - mu * eq.qf_star() * zeta,
        ]
    };
    let n_steps = (horizon / dt).round() as usize;
    let mut y = [xi0, zeta0, s0];
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((0.0, y[0], y[1], y[2]));
    let axpy = |y: [f64; 3], c: f64, k: [f64; 3]| [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2]];
    for step in 1..=n_steps {
        let k1 = rhs(y);
        let k2 = rhs(axpy(y, 0.5 * dt, k1));
        let k3 = rhs(axpy(y, 0.5 * dt, k2));
        let k4 = rhs(axpy(y, dt, k3));
        for j in 0..3 {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
        }
        out.push((step as f64 * dt, y[0], y[1], y[2]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;
    use crate::model::{toth_kot_assumption_b, toth_kot_model};

    fn section4(n_age: usize) -> (ModelParams, Equilibrium) {
        let m = toth_kot_model(2.0, 0.5, 0.5, 1.0, 2.0, n_age);
        let eq = solve_equilibrium(&m).unwrap();
        (m, eq)
    }

    #[test]
    fn equilibrium_is_a_fixed_point_per_step() {
        let (m, eq) = section4(4001);
        let state = State {
            f: eq.f_star(),
            s: eq.s_star,
            t: 0.0,
        };
        let stepper = Stepper::new(&m);
        let next = stepper.step(&state).unwrap();
        assert!((next.s - eq.s_star).abs() < 1e-10, "dS = {}", next.s - eq.s_star);
        let fstar = eq.f_star();
        let max_dev = next
            .f
            .iter()
            .zip(fstar.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-10, "max profile deviation {max_dev}");
    }

    #[test]
    fn pure_decay_without_boundary_feedback() {
        // Interior cells decay by the exact characteristic factor
        // independently of the boundary feedback.
        let (m, _) = section4(2001);
        let state = State {
            f: vec![1.0; m.n_age],
            s: 1.0,
            t: 0.0,
        };
        let stepper = Stepper::new(&m);
        let next = stepper.step(&state).unwrap();
        let factor = (-(m.d + m.l_beta()) * stepper.da).exp();
        for i in 0..m.n_age - 1 {
            assert!((next.f[i + 1] - factor).abs() < 1e-14);
        }
    }

    #[test]
    fn horizon_zero_is_a_single_snapshot() {
        let (m, eq) = section4(501);
        let (state, _) = make_initial(eq.f_star(), eq.s_star, &m).unwrap();
        let traj = simulate(
            &state,
            &m,
            &eq,
            None,
            SimOptions {
                horizon: 0.0,
                stride: 1,
                assert_bounds: false,
            },
        )
        .unwrap();
        assert_eq!(traj.t.len(), 1);
        assert_eq!(traj.snapshots.len(), 1);
    }

    #[test]
    fn projection_restores_boundary_compatibility() {
        let (m, eq) = section4(1001);
        let mut f = eq.f_star();
        f[0] *= 2.0; // violate the renewal condition
        let (state, projected) = make_initial(f, eq.s_star, &m).unwrap();
        assert!(projected);
        let stepper = Stepper::new(&m);
        let target = m.mu.value(state.s) * stepper.kf(&state.f);
        assert!((state.f[0] - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn oracle_matches_initial_data_and_boundary() {
        let (m, eq) = section4(1001);
        let f0 = eq.f_star();
        let x = vec![1.0, 2.0, 3.0];
        let hist = BoundaryHistory { dt: 0.01, x: &x };
        let at0 = oracle_profile(0.0, &hist, &f0, &m).unwrap();
        assert_eq!(at0, f0);
        let at2 = oracle_profile(0.02, &hist, &f0, &m).unwrap();
        assert_eq!(at2[0], 3.0); // a = 0 returns x(t) exactly
        assert!(matches!(
            oracle_profile(0.05, &hist, &f0, &m),
            Err(Error::HistoryRange { .. })
        ));
    }

    #[test]
    fn trapping_from_inside_enters_at_zero() {
        let (m, eq) = section4(1001);
        let data = toth_kot_assumption_b(2.0, 0.5, 0.5, 1.0, eq.theta);
        let (state, _) = make_initial(eq.f_star(), eq.s_star, &m).unwrap();
        let traj = simulate(
            &state,
            &m,
            &eq,
            Some(&data),
            SimOptions {
                horizon: 1.0,
                stride: 10,
                assert_bounds: true,
            },
        )
        .unwrap();
        let rep = trapping_report(&traj, &m, 2.0 * data.r_ratio * m.s_in, data.r_ratio).unwrap();
        assert_eq!(rep.entered_at, Some(0.0));
    }

    #[test]
    fn trapping_requires_f_above_rsin() {
        let (m, eq) = section4(501);
        let (state, _) = make_initial(eq.f_star(), eq.s_star, &m).unwrap();
        let traj = simulate(
            &state,
            &m,
            &eq,
            None,
            SimOptions {
                horizon: 0.0,
                stride: 1,
                assert_bounds: false,
            },
        )
        .unwrap();
        assert!(trapping_report(&traj, &m, 1.0, 2.0).is_err());
    }

    #[test]
    fn moment_oracle_rejects_nonzero_h() {
        let (m, eq) = section4(501);
        let mut data = toth_kot_assumption_b(2.0, 0.5, 0.5, 1.0, eq.theta);
        data.h = crate::func::AgeFunction::Constant { c: 1.0 };
        assert!(moment_ode_oracle(&m, &eq, &data, 1.0, 1.0, 1.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn moments_track_closed_ode_system() {
        let (m, eq) = section4(2001);
        let data = toth_kot_assumption_b(2.0, 0.5, 0.5, 1.0, eq.theta);
        // 50% biomass overshoot.
        let f0: Vec<f64> = eq.f_star().iter().map(|v| 1.5 * v).collect();
        let (state, _) = make_initial(f0, eq.s_star, &m).unwrap();
        let stepper = Stepper::new(&m);
        let xi0 = stepper.kf(&state.f) / eq.kf_star();
        let zeta0 = stepper.qf(&state.f) / eq.qf_star();
        let traj = simulate(
            &state,
            &m,
            &eq,
            Some(&data),
            SimOptions {
                horizon: 5.0,
                stride: 100,
                assert_bounds: true,
            },
        )
        .unwrap();
        let oracle =
            moment_ode_oracle(&m, &eq, &data, xi0, zeta0, state.s, 5.0, traj.dt).unwrap();
        let mut worst = 0.0f64;
        for (i, (_, xi, zeta, s)) in oracle.iter().enumerate() {
            worst = worst
                .max((traj.kf[i] / eq.kf_star() - xi).abs())
                .max((traj.qf[i] / eq.qf_star() - zeta).abs())
                .max((traj.s[i] - s).abs());
        }
        // O(dt) + quadrature tolerance.
        assert!(worst < 50.0 * traj.dt, "worst moment deviation {worst}");
    }
}
