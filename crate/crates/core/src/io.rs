//! Config parsing, CSV/JSON serialization, and the standard perturbed-run
//! construction used by the end-to-end pipeline.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::certificate::ScanRow;
use crate::equilibrium::Equilibrium;
use crate::func::AgeFunction;
use crate::model::ModelParams;
use crate::simulator::{make_initial, State, Trajectory};
use crate::{Error, Result};

/// Version stamp carried by every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

/// Full float round-trip: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("cannot parse {}: {e}", path.display())))
}

/// Serializes a report with the schema-version field injected at the top
/// level.
pub fn report_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    match v.as_object_mut() {
        Some(map) => {
            map.insert("schema_version".into(), SCHEMA_VERSION.into());
        }
        None => return Err(Error::Invalid("report must serialize to an object".into())),
    }
    serde_json::to_string_pretty(&v).map_err(|e| Error::Invalid(format!("{e}")))
}

pub fn save_report<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, report_json(value)? + "\n")
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))
}

/// Initial-condition config: a profile family (or tabulated values) plus
/// the initial substrate level.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub profile: AgeFunction,
}

impl InitialCondition {
    /// Samples the profile and projects it into the state space.
    pub fn build(&self, params: &ModelParams) -> Result<(State, bool)> {
        self.profile
            .check_shape()
            .map_err(Error::InvalidModel)?;
        let f = params.grid().sample(|a| self.profile.value(a));
        make_initial(f, self.s0, params)
    }
}

/// The 50% biomass-overshoot initial state used by the end-to-end
/// pipeline: f0 = 1.5 f*(0) r(a), S0 = S*.
pub fn standard_perturbed_run(params: &ModelParams, eq: &Equilibrium) -> Result<State> {
    let f0: Vec<f64> = eq.f_star().iter().map(|v| 1.5 * v).collect();
    let (state, _) = make_initial(f0, eq.s_star, params)?;
    Ok(state)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", path.display())))
}

fn wr(f: &mut fs::File, line: &str) -> Result<()> {
    writeln!(f, "{line}").map_err(|e| Error::Invalid(format!("write failed: {e}")))
}

/// Per-step scalar trajectory CSV: t, S, mass, kf, qf, x.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut f = create(path)?;
    wr(&mut f, "t,S,mass,kf,qf,x")?;
    for i in 0..traj.t.len() {
        wr(
            &mut f,
            &format!(
                "{},{},{},{},{},{}",
                fmt_f64(traj.t[i]),
                fmt_f64(traj.s[i]),
                fmt_f64(traj.mass[i]),
                fmt_f64(traj.kf[i]),
                fmt_f64(traj.qf[i]),
                fmt_f64(traj.x[i])
            ),
        )?;
    }
    Ok(())
}

/// One CSV per snapshot (columns a, f), named by the snapshot index.
pub fn write_snapshots(dir: &Path, traj: &Trajectory, params: &ModelParams) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Invalid(format!("cannot create {}: {e}", dir.display())))?;
    let grid = params.grid();
    for (idx, snap) in traj.snapshots.iter().enumerate() {
        let mut f = create(&dir.join(format!("snapshot_{idx:06}.csv")))?;
        wr(&mut f, "a,f")?;
        for i in 0..grid.n {
            wr(
                &mut f,
                &format!("{},{}", fmt_f64(grid.point(i)), fmt_f64(snap.f[i])),
            )?;
        }
    }
    Ok(())
}

/// Reads back a snapshot CSV written by [`write_snapshots`].
pub fn read_snapshot_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "a,f" {
                return Err(Error::Invalid(format!(
                    "{}: expected header 'a,f', got '{line}'",
                    path.display()
                )));
            }
            continue;
        }
        let f = line
            .split(',')
            .nth(1)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Invalid(format!("{}: bad row '{line}'", path.display()))
            })?;
        out.push(f);
    }
    Ok(out)
}

/// Reads the scalar columns of a trajectory CSV. Returns column-major
/// data keyed as (t, S, mass, kf, qf, x).
#[allow(clippy::type_complexity)]
pub fn read_trajectory_csv(
    path: &Path,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut cols: [Vec<f64>; 6] = Default::default();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "t,S,mass,kf,qf,x" {
                return Err(Error::Invalid(format!(
                    "{}: unexpected trajectory header '{line}'",
                    path.display()
                )));
            }
            continue;
        }
        let mut fields = line.split(',');
        for col in cols.iter_mut() {
            let v = fields
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Invalid(format!("{}: bad row '{line}'", path.display()))
                })?;
            col.push(v);
        }
    }
    let [t, s, mass, kf, qf, x] = cols;
    Ok((t, s, mass, kf, qf, x))
}

/// One row of the Lyapunov diagnostics CSV.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovRow {
    pub t: f64,
    pub v: f64,
    pub q: f64,
    pub psi: f64,
    pub e: f64,
    pub u: f64,
    /// Central finite difference of V (NaN at the endpoints).
    pub u_fd: f64,
    /// Decay-inequality slack (NaN without a certificate).
    pub slack: f64,
    pub phi_term: f64,
    pub w_term: f64,
    pub chi_term: f64,
}

pub fn write_lyapunov_csv(path: &Path, rows: &[LyapunovRow]) -> Result<()> {
    let mut f = create(path)?;
    wr(&mut f, "t,V,Q,Psi,E,U,U_fd,slack,V_phi,V_w,V_chi")?;
    for r in rows {
        wr(
            &mut f,
            &format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.v),
                fmt_f64(r.q),
                fmt_f64(r.psi),
                fmt_f64(r.e),
                fmt_f64(r.u),
                fmt_f64(r.u_fd),
                fmt_f64(r.slack),
                fmt_f64(r.phi_term),
                fmt_f64(r.w_term),
                fmt_f64(r.chi_term)
            ),
        )?;
    }
    Ok(())
}

/// Feasibility-scan CSV with one row per dilution rate.
pub fn write_scan_csv(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let mut f = create(path)?;
    wr(&mut f, "D,recipe_feasible,cond_4_9,cond_4_10")?;
    for r in rows {
        wr(
            &mut f,
            &format!(
                "{},{},{},{}",
                fmt_f64(r.d),
                r.recipe_feasible,
                r.cond_main,
                r.cond_linearized
            ),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;
    use crate::model::toth_kot_model;
    use crate::simulator::{simulate, SimOptions};

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[1.5, -2.0 / 3.0, 1e-300, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "round-trip failed for {s}");
        }
    }

    #[test]
    fn report_json_carries_schema_version() {
        #[derive(Serialize)]
        struct Dummy {
            a: u32,
        }
        let s = report_json(&Dummy { a: 1 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["a"], 1);
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let m = toth_kot_model(2.0, 0.5, 0.5, 1.0, 2.0, 501);
        let eq = solve_equilibrium(&m).unwrap();
        let state = standard_perturbed_run(&m, &eq).unwrap();
        let traj = simulate(
            &state,
            &m,
            &eq,
            None,
            SimOptions {
                horizon: 0.5,
                stride: 2,
                assert_bounds: false,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("traj.csv");
        write_trajectory_csv(&csv, &traj).unwrap();
        let (t, s, mass, kf, qf, x) = read_trajectory_csv(&csv).unwrap();
        assert_eq!(t, traj.t);
        assert_eq!(s, traj.s);
        assert_eq!(mass, traj.mass);
        assert_eq!(kf, traj.kf);
        assert_eq!(qf, traj.qf);
        assert_eq!(x, traj.x);

        write_snapshots(dir.path(), &traj, &m).unwrap();
        let back = read_snapshot_csv(&dir.path().join("snapshot_000000.csv")).unwrap();
        assert_eq!(back, traj.snapshots[0].f);
    }

    #[test]
    fn initial_condition_parses_and_projects() {
        let m = toth_kot_model(2.0, 0.5, 0.5, 1.0, 2.0, 501);
        let js = r#"{"S0": 1.0, "profile": {"family": "expdecay", "amplitude": 2.0, "rate": 1.5}}"#;
        let ic: InitialCondition = serde_json::from_str(js).unwrap();
        let (state, _) = ic.build(&m).unwrap();
        assert_eq!(state.s, 1.0);
        assert!(state.f.iter().all(|v| *v > 0.0));
        assert!(serde_json::from_str::<InitialCondition>(r#"{"S0": 1.0}"#).is_err());
    }

    #[test]
    fn standard_run_has_expected_normalization() {
        let m = toth_kot_model(2.0, 0.5, 0.5, 1.0, 2.0, 2001);
        let eq = solve_equilibrium(&m).unwrap();
        let state = standard_perturbed_run(&m, &eq).unwrap();
        assert_eq!(state.s, eq.s_star);
        // zeta = xi = 1.5 up to the boundary projection.
        let ctx = crate::lyapunov::LyapunovContext::new(&m, &eq);
        let nv = ctx.normalized_vars(&state).unwrap();
        assert!((nv.zeta - 1.5).abs() < 1e-3, "zeta = {}", nv.zeta);
        assert!((nv.xi - 1.5).abs() < 1e-3, "xi = {}", nv.xi);
        assert!(nv.phi.abs() < 1e-3);
        assert!((nv.w - 1.5f64.ln()).abs() < 1e-3);
    }
}
