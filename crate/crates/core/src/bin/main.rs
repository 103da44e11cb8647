//! Command-line front end: equilibrium solving, time stepping, Lyapunov
//! diagnostics, certificate assembly, feasibility scans, and the
//! end-to-end pipeline for the constant-mortality model family.
//!
//! Exit codes: 0 success, 1 domain failure (washout, infeasibility,
//! violated assumptions), 2 usage error (bad flags, unreadable configs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use agechemo::certificate::{
    self, search_certificate, Certificate, RecipeOutcome, SearchOutcome,
};
use agechemo::equilibrium::solve_equilibrium;
use agechemo::func::AgeFunction;
use agechemo::io::{
    self, read_snapshot_csv, read_trajectory_csv, standard_perturbed_run, write_lyapunov_csv,
    write_scan_csv, write_snapshots, write_trajectory_csv, InitialCondition, LyapunovRow,
};
use agechemo::lyapunov::{
    decay_check, derivative_u, diagnostic_e, lyapunov_v, measure_psi, LyapunovContext,
    LyapunovWeights,
};
use agechemo::model::{validate_model, AssumptionBData, ModelParams};
use agechemo::simulator::{simulate, trapping_report, SimOptions, State};

#[derive(Parser)]
#[command(name = "agechemo", version, about = "Age-structured chemostat toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the steady state and report its invariants.
    Equilibrium(EquilibriumArgs),
    /// Integrate the coupled system and write trajectory CSVs.
    Simulate(SimulateArgs),
    /// Evaluate V, Psi, E, U and the decay inequality along a stored run.
    Lyapunov(LyapunovArgs),
    /// Assemble a stability certificate by recipe or randomized search.
    Certify(CertifyArgs),
    /// Tabulate recipe feasibility against the closed-form thresholds.
    Scan(ScanArgs),
    /// End-to-end pipeline for the constant-mortality model family.
    Tothkot(TothkotArgs),
}

#[derive(Args)]
struct EquilibriumArgs {
    #[arg(long)]
    model: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Initial-condition JSON; defaults to the 50% overshoot run.
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Integration horizon; defaults to 30/D.
    #[arg(long)]
    horizon: Option<f64>,
    /// Step size override (re-grids the age axis so dt = da).
    #[arg(long)]
    dt: Option<f64>,
    /// Snapshot every this many steps.
    #[arg(long, default_value_t = 100)]
    stride: usize,
    /// Check the pathwise a-priori bounds at every step.
    #[arg(long)]
    assert_bounds: bool,
    /// Assumption-(B) data JSON (enables the moment and floor bounds).
    #[arg(long)]
    assumption_b: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write one profile CSV per snapshot.
    #[arg(long)]
    snapshots: bool,
}

#[derive(Args)]
struct LyapunovArgs {
    #[arg(long)]
    model: PathBuf,
    /// Lyapunov weights JSON (ignored when --certificate is given).
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Certificate JSON; enables the decay-inequality slack column.
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Assumption-(B) data JSON; enables the U column.
    #[arg(long)]
    assumption_b: Option<PathBuf>,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    snapshots_dir: PathBuf,
    /// Snapshot stride used by the simulate run.
    #[arg(long, default_value_t = 100)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Assumption-(B) data JSON (derived automatically with --recipe).
    #[arg(long)]
    assumption_b: Option<PathBuf>,
    /// Use the closed-form recipe (model must be of the
    /// constant-mortality / exponential-fertility family).
    #[arg(long, conflicts_with = "search")]
    recipe: bool,
    /// Randomized search over the free constants.
    #[arg(long)]
    search: bool,
    /// Condition-evaluation budget for --search.
    #[arg(long, default_value_t = 20000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 2.0)]
    y: f64,
    #[arg(long)]
    k_tilde: f64,
    #[arg(long)]
    l: f64,
    #[arg(long)]
    d_min: f64,
    #[arg(long)]
    d_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Bisect the feasibility flip point over [d_min, d_max] as well.
    #[arg(long)]
    flip: bool,
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON report with thresholds and the flip point.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TothkotArgs {
    #[arg(long, default_value_t = 2.0)]
    y: f64,
    #[arg(long)]
    k_tilde: f64,
    #[arg(long)]
    l: f64,
    #[arg(long)]
    d: f64,
    #[arg(long)]
    s_in: f64,
    #[arg(long, default_value_t = 2001)]
    n_age: usize,
    /// Integration horizon; defaults to 30/D.
    #[arg(long)]
    horizon: Option<f64>,
    /// Write report.json, trajectory.csv, lyapunov.csv here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Domain(agechemo::Error),
}

impl From<agechemo::Error> for CliError {
    fn from(e: agechemo::Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    io::load_json(path).map_err(|e| CliError::Usage(e.to_string()))
}

fn emit<T: Serialize>(out: Option<&Path>, report: &T) -> CliResult<()> {
    match out {
        Some(p) => io::save_report(p, report)?,
        None => println!("{}", io::report_json(report)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Equilibrium(a) => cmd_equilibrium(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Lyapunov(a) => cmd_lyapunov(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Tothkot(a) => cmd_tothkot(a),
    }
}

#[derive(Serialize)]
struct EquilibriumReport {
    #[serde(rename = "S_star")]
    s_star: f64,
    f_star0: f64,
    kr: f64,
    qr: f64,
    theta: f64,
    kappa1: f64,
    kappa2: f64,
    r_norm1: f64,
    validation_pass: bool,
}

fn cmd_equilibrium(a: EquilibriumArgs) -> CliResult<()> {
    let params: ModelParams = load(&a.model)?;
    let validation = validate_model(&params);
    if !validation.pass {
        let names: Vec<&str> = validation.failed().iter().map(|i| i.name.as_str()).collect();
        return Err(CliError::Domain(agechemo::Error::InvalidModel(format!(
            "structural assumptions violated: {}",
            names.join(", ")
        ))));
    }
    let eq = solve_equilibrium(&params)?;
    emit(
        a.out.as_deref(),
        &EquilibriumReport {
            s_star: eq.s_star,
            f_star0: eq.f_star0,
            kr: eq.kr,
            qr: eq.qr,
            theta: eq.theta,
            kappa1: eq.kappa1,
            kappa2: eq.kappa2,
            r_norm1: eq.r_norm1,
            validation_pass: true,
        },
    )
}

#[derive(Serialize)]
struct SimulateReport {
    horizon: f64,
    dt: f64,
    stride: usize,
    n_records: usize,
    n_snapshots: usize,
    projected: bool,
    tail_warning: bool,
    #[serde(rename = "S_final")]
    s_final: f64,
    mass_final: f64,
}

fn regrid(mut params: ModelParams, dt: Option<f64>) -> CliResult<ModelParams> {
    if let Some(dt) = dt {
        if !(dt > 0.0 && dt < params.a_max / 4.0) {
            return Err(CliError::Usage(format!(
                "dt = {dt} must be in (0, a_max/4)"
            )));
        }
        params.n_age = (params.a_max / dt).round() as usize + 1;
        // Keep dt = da exactly by nudging a_max onto the step lattice.
        params.a_max = dt * (params.n_age - 1) as f64;
    }
    Ok(params)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let params = regrid(load::<ModelParams>(&a.model)?, a.dt)?;
    let eq = solve_equilibrium(&params)?;
    let data: Option<AssumptionBData> = match &a.assumption_b {
        Some(p) => Some(load(p)?),
        None => None,
    };
    let (state, projected) = match &a.initial {
        Some(p) => load::<InitialCondition>(p)?.build(&params)?,
        None => (standard_perturbed_run(&params, &eq)?, false),
    };
    let horizon = a.horizon.unwrap_or(30.0 / params.d);
    let traj = simulate(
        &state,
        &params,
        &eq,
        data.as_ref(),
        SimOptions {
            horizon,
            stride: a.stride,
            assert_bounds: a.assert_bounds,
        },
    )?;
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out_dir.display())))?;
    write_trajectory_csv(&a.out_dir.join("trajectory.csv"), &traj)?;
    if a.snapshots {
        write_snapshots(&a.out_dir.join("snapshots"), &traj, &params)?;
    }
    emit(
        Some(&a.out_dir.join("simulate_report.json")),
        &SimulateReport {
            horizon,
            dt: traj.dt,
            stride: traj.stride,
            n_records: traj.t.len(),
            n_snapshots: traj.snapshots.len(),
            projected,
            tail_warning: traj.tail_warning,
            s_final: *traj.s.last().unwrap(),
            mass_final: *traj.mass.last().unwrap(),
        },
    )
}

#[derive(Serialize)]
struct LyapunovSummary {
    rows: usize,
    v_initial: f64,
    v_final: f64,
    v_monotone_decreasing: bool,
    max_slack: Option<f64>,
}

fn cmd_lyapunov(a: LyapunovArgs) -> CliResult<()> {
    let params: ModelParams = load(&a.model)?;
    let cert: Option<Certificate> = match &a.certificate {
        Some(p) => Some(load(p)?),
        None => None,
    };
    let weights = match (&cert, &a.weights) {
        (Some(c), _) => c.weights,
        (None, Some(p)) => load::<LyapunovWeights>(p)?,
        (None, None) => {
            return Err(CliError::Usage(
                "either --weights or --certificate is required".into(),
            ))
        }
    };
    let data: Option<AssumptionBData> = match &a.assumption_b {
        Some(p) => Some(load(p)?),
        None => None,
    };
    if cert.is_some() && data.is_none() {
        return Err(CliError::Usage(
            "--certificate requires --assumption-b for the decay check".into(),
        ));
    }
    let (t, s, ..) = read_trajectory_csv(&a.trajectory).map_err(|e| CliError::Usage(e.to_string()))?;
    let eq = solve_equilibrium(&params)?;
    let ctx = LyapunovContext::new(&params, &eq);

    let mut rows: Vec<LyapunovRow> = Vec::new();
    for j in 0.. {
        let path = a.snapshots_dir.join(format!("snapshot_{j:06}.csv"));
        if !path.exists() {
            break;
        }
        let f = read_snapshot_csv(&path).map_err(|e| CliError::Usage(e.to_string()))?;
        let row_idx = j * a.stride;
        if row_idx >= t.len() {
            return Err(CliError::Usage(format!(
                "snapshot {j} maps past the trajectory ({} rows, stride {})",
                t.len(),
                a.stride
            )));
        }
        let state = State {
            f,
            s: s[row_idx],
            t: t[row_idx],
        };
        let nv = ctx.normalized_vars(&state)?;
        let vb = lyapunov_v(&ctx, &nv, &weights)?;
        let psi = measure_psi(&ctx, &state, &weights)?;
        let e = diagnostic_e(&ctx, &nv, weights.sigma);
        let u = match &data {
            Some(d) => derivative_u(&ctx, &nv, d, &weights)?.u,
            None => f64::NAN,
        };
        let slack = match (&cert, &data) {
            (Some(c), Some(d)) => decay_check(&ctx, &state, &nv, d, c)?.slack,
            _ => f64::NAN,
        };
        rows.push(LyapunovRow {
            t: state.t,
            v: vb.v,
            q: vb.q_term,
            psi,
            e,
            u,
            u_fd: f64::NAN,
            slack,
            phi_term: vb.phi_term,
            w_term: vb.w_term,
            chi_term: vb.chi_term,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!(
            "no snapshot CSVs found in {}",
            a.snapshots_dir.display()
        )));
    }
    for j in 1..rows.len().saturating_sub(1) {
        rows[j].u_fd = (rows[j + 1].v - rows[j - 1].v) / (rows[j + 1].t - rows[j - 1].t);
    }
    write_lyapunov_csv(&a.out, &rows)?;
    let v0 = rows[0].v;
    let vend = rows.last().unwrap().v;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].v <= w[0].v + 1e-8 * (1.0 + w[0].v));
    let max_slack = if cert.is_some() {
        Some(rows.iter().map(|r| r.slack).fold(f64::NEG_INFINITY, f64::max))
    } else {
        None
    };
    emit(
        None,
        &LyapunovSummary {
            rows: rows.len(),
            v_initial: v0,
            v_final: vend,
            v_monotone_decreasing: monotone,
            max_slack,
        },
    )
}

/// Extracts (Y, k_tilde, L) when the model is of the recipe family.
fn infer_family(params: &ModelParams) -> CliResult<(f64, f64, f64)> {
    let (y, kt) = match params.k {
        AgeFunction::ExpDecay { amplitude, rate } => (amplitude, rate),
        _ => {
            return Err(CliError::Usage(
                "recipe requires an exponential-decay fertility k".into(),
            ))
        }
    };
    let l = match params.beta {
        AgeFunction::Constant { c } => c,
        _ => {
            return Err(CliError::Usage(
                "recipe requires a constant mortality beta".into(),
            ))
        }
    };
    match params.q {
        AgeFunction::Constant { c } if (c - 1.0).abs() < 1e-12 => {}
        _ => {
            return Err(CliError::Usage(
                "recipe requires a unit-constant consumption q".into(),
            ))
        }
    }
    Ok((y, kt, l))
}

fn cmd_certify(a: CertifyArgs) -> CliResult<()> {
    let params: ModelParams = load(&a.model)?;
    let eq = solve_equilibrium(&params)?;
    if a.recipe {
        let (y, kt, l) = infer_family(&params)?;
        let outcome = certificate::tothkot_recipe(&params, &eq, y, kt, l)?;
        let feasible = outcome.is_feasible();
        emit(a.out.as_deref(), &outcome)?;
        if !feasible {
            return Err(CliError::Domain(agechemo::Error::Invalid(
                "recipe infeasible at this dilution rate".into(),
            )));
        }
        return Ok(());
    }
    if !a.search {
        return Err(CliError::Usage("pass either --recipe or --search".into()));
    }
    let data: AssumptionBData = match &a.assumption_b {
        Some(p) => load(p)?,
        None => {
            let (y, kt, l) = infer_family(&params)?;
            agechemo::model::toth_kot_assumption_b(y, kt, l, params.d, eq.theta)
        }
    };
    let outcome = search_certificate(&params, &eq, &data, a.budget, a.seed);
    let found = matches!(outcome, SearchOutcome::Found { .. });
    emit(a.out.as_deref(), &outcome)?;
    if !found {
        return Err(CliError::Domain(agechemo::Error::Invalid(format!(
            "search exhausted its budget of {} without a feasible certificate",
            a.budget
        ))));
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanReport {
    y: f64,
    k_tilde: f64,
    l: f64,
    threshold_main: f64,
    threshold_linearized: f64,
    flip_point: Option<f64>,
}

fn cmd_scan(a: ScanArgs) -> CliResult<()> {
    if a.points < 2 || !(a.d_min > 0.0 && a.d_max > a.d_min) {
        return Err(CliError::Usage(
            "need points >= 2 and 0 < d_min < d_max".into(),
        ));
    }
    let grid: Vec<f64> = (0..a.points)
        .map(|i| a.d_min + (a.d_max - a.d_min) * i as f64 / (a.points - 1) as f64)
        .collect();
    let rows = certificate::feasibility_threshold_scan(a.y, a.k_tilde, a.l, &grid)?;
    write_scan_csv(&a.out, &rows)?;
    let flip_point = if a.flip {
        Some(certificate::recipe_flip_point(
            a.k_tilde, a.l, a.d_min, a.d_max,
        )?)
    } else {
        None
    };
    let report = ScanReport {
        y: a.y,
        k_tilde: a.k_tilde,
        l: a.l,
        threshold_main: certificate::threshold_main(a.k_tilde, a.l),
        threshold_linearized: certificate::threshold_linearized(a.k_tilde, a.l),
        flip_point,
    };
    emit(a.report.as_deref(), &report)
}

#[derive(Serialize)]
struct DecaySummary {
    v_initial: f64,
    v_final: f64,
    v_monotone_decreasing: bool,
    max_slack: f64,
    entered_trapping_at: Option<f64>,
}

#[derive(Serialize)]
struct TothkotReport {
    y: f64,
    k_tilde: f64,
    l: f64,
    d: f64,
    #[serde(rename = "S_in")]
    s_in: f64,
    #[serde(rename = "S_star")]
    s_star: f64,
    f_star0: f64,
    theta: f64,
    threshold_main: f64,
    threshold_linearized: f64,
    feasible: bool,
    certificate: Option<Certificate>,
    decay: Option<DecaySummary>,
}

fn cmd_tothkot(a: TothkotArgs) -> CliResult<()> {
    let params = agechemo::model::toth_kot_model(a.y, a.k_tilde, a.l, a.d, a.s_in, a.n_age);
    params.check()?;
    let eq = solve_equilibrium(&params)?;
    let outcome = certificate::tothkot_recipe(&params, &eq, a.y, a.k_tilde, a.l)?;
    let mut report = TothkotReport {
        y: a.y,
        k_tilde: a.k_tilde,
        l: a.l,
        d: a.d,
        s_in: a.s_in,
        s_star: eq.s_star,
        f_star0: eq.f_star0,
        theta: eq.theta,
        threshold_main: certificate::threshold_main(a.k_tilde, a.l),
        threshold_linearized: certificate::threshold_linearized(a.k_tilde, a.l),
        feasible: outcome.is_feasible(),
        certificate: None,
        decay: None,
    };
    let report_out = |report: &TothkotReport| -> CliResult<()> {
        match &a.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| {
                    CliError::Usage(format!("cannot create {}: {e}", dir.display()))
                })?;
                emit(Some(&dir.join("report.json")), report)
            }
            None => emit(None, report),
        }
    };
    let cert = match outcome {
        RecipeOutcome::Feasible { certificate, .. } => certificate,
        RecipeOutcome::Infeasible { .. } => {
            report_out(&report)?;
            return Err(CliError::Domain(agechemo::Error::Invalid(format!(
                "recipe infeasible: D = {} is at or below the threshold {}",
                a.d, report.threshold_main
            ))));
        }
    };

    let data = agechemo::model::toth_kot_assumption_b(a.y, a.k_tilde, a.l, a.d, eq.theta);
    let state = standard_perturbed_run(&params, &eq)?;
    let horizon = a.horizon.unwrap_or(30.0 / a.d);
    let traj = simulate(
        &state,
        &params,
        &eq,
        Some(&data),
        SimOptions {
            horizon,
            stride: 100,
            assert_bounds: true,
        },
    )?;
    let trapping = trapping_report(&traj, &params, cert.f_bound, data.r_ratio)?;

    let ctx = LyapunovContext::new(&params, &eq);
    let mut rows: Vec<LyapunovRow> = Vec::new();
    for snap in &traj.snapshots {
        let nv = ctx.normalized_vars(snap)?;
        let vb = lyapunov_v(&ctx, &nv, &cert.weights)?;
        let dc = decay_check(&ctx, snap, &nv, &data, &cert)?;
        rows.push(LyapunovRow {
            t: snap.t,
            v: vb.v,
            q: vb.q_term,
            psi: measure_psi(&ctx, snap, &cert.weights)?,
            e: diagnostic_e(&ctx, &nv, cert.weights.sigma),
            u: dc.u,
            u_fd: f64::NAN,
            slack: dc.slack,
            phi_term: vb.phi_term,
            w_term: vb.w_term,
            chi_term: vb.chi_term,
        });
    }
    for j in 1..rows.len().saturating_sub(1) {
        rows[j].u_fd = (rows[j + 1].v - rows[j - 1].v) / (rows[j + 1].t - rows[j - 1].t);
    }
    let v0 = rows[0].v;
    report.certificate = Some(cert);
    report.decay = Some(DecaySummary {
        v_initial: v0,
        v_final: rows.last().unwrap().v,
        v_monotone_decreasing: rows
            .windows(2)
            .all(|w| w[1].v <= w[0].v + 1e-8 * (1.0 + w[0].v)),
        max_slack: rows.iter().map(|r| r.slack).fold(f64::NEG_INFINITY, f64::max),
        entered_trapping_at: trapping.entered_at,
    });
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
        write_lyapunov_csv(&dir.join("lyapunov.csv"), &rows)?;
    }
    report_out(&report)
}
