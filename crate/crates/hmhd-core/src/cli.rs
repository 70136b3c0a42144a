//! Command-line front end: identity verification suite, time integration
//! with diagnostics, and the scaling-invariance study.

use crate::config::{RunConfig, KEY_DOCS};
use crate::diagnostics::{self, CritConfig, DiagnosticsRecord};
use crate::error::{HmhdError, Result};
use crate::evolve::{ModelSpec, SimState, Stepper, StepperConfig, System};
use crate::fields::{random_divfree, vector_l2_inner, FieldKind, VectorField};
use crate::ledger::{
    build_ledger, build_ledger_with_fault, check_25d_vi_cancellations, check_cancellations,
    check_master_identity, ledger_internal_checks, ledger_labels, CheckResult,
};
use crate::nonlinear::{advect, hall_term, hall_term_alt, vorticity_cancellation_residuals};
use crate::spectral::{Grid, SpectralScalar, TAU};
use crate::tolerances::*;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use std::io::Write as _;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

fn config_help() -> String {
    let width = KEY_DOCS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from(
        "Configuration file: one `key = value` per line, `#` starts a comment.\n\
         Unknown or repeated keys are rejected.  Keys:\n",
    );
    for (k, doc) in KEY_DOCS {
        s.push_str(&format!("  {k:width$}  {doc}\n"));
    }
    s.push_str("\nEnvironment: HMHD_THREADS caps the worker-thread count.\n");
    s
}

#[derive(Parser)]
#[command(
    name = "hmhd",
    version,
    about = "Pseudo-spectral laboratory for Hall-term cancellation identities and 2.5-D electron/Hall magnetohydrodynamics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the identity-verification suite on random divergence-free fields
    /// and write a JSON report.  Exits 0 only if every check passes.
    Verify(VerifyArgs),
    /// Integrate a configured model, writing a diagnostics CSV and restart
    /// snapshots.  Exit codes: 0 reached t_end, 2 blow-up (last good
    /// snapshot kept), 3 configuration error.
    #[command(after_help = config_help())]
    Simulate(SimulateArgs),
    /// Compare a trajectory with the trajectory of its rescaled initial
    /// data; exits 0 only if the two commute within tolerance.
    ScalingTest(ScalingArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Grid dimensions to cover: 2, 3, or both
    #[arg(long, default_value = "both")]
    dim: String,
    /// Per-axis grid size (default: 64 in 2-D, 32 in 3-D)
    #[arg(long)]
    n: Option<usize>,
    /// Number of random seeds per dimension
    #[arg(long, default_value_t = 2)]
    seeds: u64,
    /// Where to write the JSON report
    #[arg(long, default_value = "verify_report.json")]
    json: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Resume from a snapshot (model and state come from the snapshot;
    /// stepping and output settings from the configuration)
    #[arg(long)]
    restart: Option<PathBuf>,
    /// Override output.dir
    #[arg(long)]
    out_dir: Option<String>,
    /// Override step.t_end
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Args)]
struct ScalingArgs {
    /// Per-axis grid size
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Band limit of the coarse field (the grid must hold lambda times this)
    #[arg(long, default_value_t = 6)]
    band: usize,
    /// Seed for the random initial field
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Spectral decay exponent of the initial field
    #[arg(long, default_value_t = 1.5)]
    slope: f64,
    /// L2 norm the initial field is rescaled to
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    /// Dissipation exponent parameter of the uniform-exponent model
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    /// Integer scaling factor
    #[arg(long, default_value_t = 2)]
    lambda: u32,
    /// Final time of the coarse run
    #[arg(long, default_value_t = 0.1)]
    t_end: f64,
    /// Time step of the coarse run
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Pass threshold on the relative endpoint mismatch
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Optional JSON report path
    #[arg(long)]
    json: Option<PathBuf>,
}

pub fn run() -> i32 {
    init_threads();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Verify(a) => run_verify(&a),
        Cmd::Simulate(a) => run_simulate(&a),
        Cmd::ScalingTest(a) => run_scaling(&a),
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("HMHD_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

// ---------------------------------------------------------------- verify

#[derive(Serialize)]
struct VerifyReport {
    dims: Vec<usize>,
    n_2d: usize,
    n_3d: usize,
    seeds: u64,
    fault_label: Option<String>,
    n_checks: usize,
    n_failed: usize,
    all_pass: bool,
    first_failure: Option<String>,
    notes: Vec<String>,
    checks: Vec<CheckResult>,
}

fn renamed(mut c: CheckResult, suffix: &str) -> CheckResult {
    c.name.push_str(suffix);
    c
}

fn neutrality_checks(
    b: &VectorField,
    u: &VectorField,
    suffix: &str,
    checks: &mut Vec<CheckResult>,
) {
    let j = b.current_density();
    let hall = hall_term(b);
    let scale = j.l2_norm() * b.sobolev_seminorm(1.0) * b.l2_norm();
    checks.push(CheckResult::new(
        format!("hall_energy_neutrality{suffix}"),
        vector_l2_inner(&hall, b),
        0.0,
        scale.max(1e-300),
        TOL_BILINEAR,
    ));

    let adv = advect(u, b);
    let scale_a = u.l2_norm() * b.sobolev_seminorm(1.0) * b.l2_norm();
    checks.push(CheckResult::new(
        format!("advection_energy_neutrality{suffix}"),
        vector_l2_inner(&adv, b),
        0.0,
        scale_a.max(1e-300),
        TOL_BILINEAR,
    ));

    let alt = hall_term_alt(b);
    let mut diff = hall.clone();
    diff.add_scaled(&alt, -1.0);
    checks.push(CheckResult::new(
        format!("hall_two_assemblies{suffix}"),
        diff.l2_norm() / hall.l2_norm().max(1e-300),
        0.0,
        1.0,
        TOL_FOURTH_ORDER,
    ));
}

fn verify_seed_2d(
    n: usize,
    band: usize,
    seed: u64,
    fault: Option<&str>,
    checks: &mut Vec<CheckResult>,
    notes: &mut Vec<String>,
) -> Result<()> {
    let suffix = format!("_2d_s{seed}");
    let grid = Grid::new_square(2, n, band)?;
    let b = random_divfree(&grid, seed, band, 1.5)?;
    let u = random_divfree(&grid, seed + 1000, band, 1.5)?;

    let ledger = build_ledger_with_fault(&b, fault);
    for c in ledger_internal_checks(&b, &ledger) {
        checks.push(renamed(c, &suffix));
    }
    for c in check_cancellations(&ledger).checks {
        checks.push(renamed(c, &suffix));
    }
    checks.push(renamed(check_master_identity(&b, &ledger), &suffix));
    let vi = check_25d_vi_cancellations(&b, &ledger)?;
    for c in vi.checks {
        checks.push(renamed(c, &suffix));
    }
    notes.extend(vi.notes);

    checks.push(CheckResult::new(
        format!("div_free_b{suffix}"),
        b.div_residual_rel(),
        0.0,
        1.0,
        TOL_DIVFREE,
    ));
    checks.push(CheckResult::new(
        format!("div_free_u{suffix}"),
        u.div_residual_rel(),
        0.0,
        1.0,
        TOL_DIVFREE,
    ));

    neutrality_checks(&b, &u, &suffix, checks);

    let (r_u, r_b) = vorticity_cancellation_residuals(&u, &b)?;
    let su = u.comp(3).sobolev_seminorm(1.0).powi(2).max(1e-300);
    let sb = b.comp(3).sobolev_seminorm(1.0).powi(2).max(1e-300);
    checks.push(CheckResult::new(
        format!("planar_gradient_cancellation_u{suffix}"),
        r_u,
        0.0,
        su,
        TOL_LINEAR,
    ));
    checks.push(CheckResult::new(
        format!("planar_gradient_cancellation_b{suffix}"),
        r_b,
        0.0,
        sb,
        TOL_LINEAR,
    ));

    let spec = ModelSpec::new(System::HallmhdMixed);
    checks.push(CheckResult::new(
        format!("z3_dual_assembly{suffix}"),
        diagnostics::z3_residual(&u, &b, spec.alpha, spec.eps)?,
        0.0,
        1.0,
        TOL_FOURTH_ORDER,
    ));
    checks.push(CheckResult::new(
        format!("omega3_consistency{suffix}"),
        diagnostics::omega3_consistency_residual(&u, &b, &spec)?,
        0.0,
        1.0,
        TOL_FOURTH_ORDER,
    ));

    // the same ledger on the field extended by a trivial third axis, entry
    // by entry, up to the measure of the extra circle
    let b3 = b.embed_in_3d(4)?;
    let ledger3 = build_ledger(&b3);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (label, v2) in ledger.entries() {
        if let Some(v3) = ledger3.get(label) {
            worst = worst.max((v3 - TAU * v2).abs());
            scale = scale.max((TAU * v2).abs()).max(v3.abs());
        }
    }
    checks.push(CheckResult::new(
        format!("embed_matches_planar{suffix}"),
        worst,
        0.0,
        scale.max(1e-300),
        TOL_FOURTH_ORDER,
    ));
    Ok(())
}

fn verify_seed_3d(
    n: usize,
    band: usize,
    seed: u64,
    fault: Option<&str>,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    let suffix = format!("_3d_s{seed}");
    let grid = Grid::new_square(3, n, band)?;
    let b = random_divfree(&grid, seed, band, 1.5)?;
    let u = random_divfree(&grid, seed + 2000, band, 1.5)?;

    let ledger = build_ledger_with_fault(&b, fault);
    for c in ledger_internal_checks(&b, &ledger) {
        checks.push(renamed(c, &suffix));
    }
    for c in check_cancellations(&ledger).checks {
        checks.push(renamed(c, &suffix));
    }
    checks.push(renamed(check_master_identity(&b, &ledger), &suffix));

    checks.push(CheckResult::new(
        format!("div_free_b{suffix}"),
        b.div_residual_rel(),
        0.0,
        1.0,
        TOL_DIVFREE,
    ));
    neutrality_checks(&b, &u, &suffix, checks);
    Ok(())
}

fn negative_controls(n2: Option<(usize, usize)>, checks: &mut Vec<CheckResult>) -> Result<()> {
    // a field with nonzero divergence must be flagged
    let grid = match n2 {
        Some((n, band)) => Grid::new_square(2, n, band)?,
        None => Grid::new_square(3, 16, 5)?,
    };
    let mut mode = vec![0i64; grid.dim()];
    mode[0] = 1;
    let sin1 = SpectralScalar::from_modes(&grid, &[(mode, Complex64::new(0.0, -0.5))])?;
    let zero = SpectralScalar::zero(&grid);
    let bad = VectorField::new(FieldKind::Magnetic, [sin1, zero.clone(), zero]);
    let div = bad.div_residual_rel();
    checks.push(CheckResult {
        name: "negative_control_divergence_detected".to_string(),
        value: div,
        expected: f64::INFINITY,
        residual: div,
        scale: 1.0,
        tol: NEG_CONTROL_MIN,
        pass: div > NEG_CONTROL_MIN,
    });

    if let Some((n, band)) = n2 {
        // the four solenoidal-only pair identities must fail on a field
        // with broken solenoidality
        let grid = Grid::new_square(2, n, band)?;
        let mut b = random_divfree(&grid, 777, band, 1.5)?;
        let extra =
            SpectralScalar::from_modes(&grid, &[(vec![1, 0], Complex64::new(0.0, 0.35))])?;
        b.comp_mut(1).add_scaled(&extra, 1.0);
        let ledger = build_ledger(&b);
        let vi = check_25d_vi_cancellations(&b, &ledger)?;
        let worst_rel = vi
            .checks
            .iter()
            .filter(|c| c.name.starts_with("planar_pair_"))
            .map(|c| c.residual / c.scale.max(1e-300))
            .fold(0.0f64, f64::max);
        checks.push(CheckResult {
            name: "negative_control_pairs_need_solenoidality".to_string(),
            value: worst_rel,
            expected: f64::INFINITY,
            residual: worst_rel,
            scale: 1.0,
            tol: NEG_CONTROL_MIN,
            pass: worst_rel > NEG_CONTROL_MIN,
        });
    }
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> i32 {
    let dims: Vec<usize> = match args.dim.as_str() {
        "2" => vec![2],
        "3" => vec![3],
        "both" => vec![2, 3],
        other => {
            eprintln!("--dim must be 2, 3 or both, got {other}");
            return EXIT_CONFIG;
        }
    };
    let n_2d = args.n.unwrap_or(64);
    let n_3d = if args.dim == "both" {
        32
    } else {
        args.n.unwrap_or(32)
    };
    for (d, n) in [(2, n_2d), (3, n_3d)] {
        if dims.contains(&d) && (n < 8 || n % 2 != 0) {
            eprintln!("--n must be even and >= 8, got {n}");
            return EXIT_CONFIG;
        }
    }
    let band_2d = (n_2d / 2 - 1).min(10).max(2);
    let band_3d = (n_3d / 2 - 1).min(5).max(2);
    let fault = std::env::var("HMHD_FAULT_LABEL").ok().filter(|s| !s.is_empty());

    if let Some(label) = &fault {
        let known = ledger_labels(*dims.first().unwrap());
        if !known.iter().any(|l| l == label) {
            eprintln!("fault label `{label}` does not name a ledger entry");
            return EXIT_FAIL;
        }
        eprintln!("fault injection: sign of ledger entry `{label}` flipped for the first seed");
    }

    let mut checks: Vec<CheckResult> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut work = || -> Result<()> {
        for &d in &dims {
            for s in 0..args.seeds {
                let seed = s + 1;
                let f = if s == 0 && d == dims[0] { fault.as_deref() } else { None };
                if d == 2 {
                    verify_seed_2d(n_2d, band_2d, seed, f, &mut checks, &mut notes)?;
                } else {
                    verify_seed_3d(n_3d, band_3d, seed, f, &mut checks)?;
                }
            }
        }
        let planar = dims.contains(&2).then_some((n_2d, band_2d));
        negative_controls(planar, &mut checks)?;
        Ok(())
    };
    if let Err(e) = work() {
        eprintln!("verification aborted: {e}");
        return EXIT_FAIL;
    }

    let n_failed = checks.iter().filter(|c| !c.pass).count();
    let first_failure = checks.iter().find(|c| !c.pass).map(|c| c.name.clone());
    for c in &checks {
        println!(
            "{} {:<46} residual {:.3e}  (tol {:.1e} x scale {:.3e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.tol,
            c.scale
        );
    }
    for n in &notes {
        println!("note: {n}");
    }
    println!(
        "{} of {} checks passed",
        checks.len() - n_failed,
        checks.len()
    );

    let report = VerifyReport {
        dims,
        n_2d,
        n_3d,
        seeds: args.seeds,
        fault_label: fault.clone(),
        n_checks: checks.len(),
        n_failed,
        all_pass: n_failed == 0,
        first_failure: first_failure.clone(),
        notes,
        checks,
    };
    match serde_json::to_string_pretty(&report) {
        Ok(text) => {
            if let Err(e) = std::fs::write(&args.json, text) {
                eprintln!("cannot write report {}: {e}", args.json.display());
                return EXIT_FAIL;
            }
            println!("report written to {}", args.json.display());
        }
        Err(e) => {
            eprintln!("cannot serialize report: {e}");
            return EXIT_FAIL;
        }
    }

    if let Some(name) = first_failure {
        if let Some(label) = &report.fault_label {
            eprintln!("first failing check: {name} (fault label `{label}`)");
        } else {
            eprintln!("first failing check: {name}");
        }
        EXIT_FAIL
    } else {
        EXIT_OK
    }
}

// -------------------------------------------------------------- simulate

fn run_simulate(args: &SimulateArgs) -> i32 {
    match simulate_inner(args) {
        Ok(code) => code,
        Err(SimError::Config(msg)) => {
            let msg = msg.strip_prefix("configuration error: ").unwrap_or(&msg);
            eprintln!("configuration error: {msg}");
            EXIT_CONFIG
        }
        Err(SimError::Blowup { t, what, last_good }) => {
            match last_good {
                Some((path, tg)) => eprintln!(
                    "blow-up at t = {t:.6e}: {what}; last good snapshot {} (t = {tg:.6e})",
                    path.display()
                ),
                None => eprintln!("blow-up at t = {t:.6e}: {what}; no snapshot was written"),
            }
            EXIT_BLOWUP
        }
        Err(SimError::Other(msg)) => {
            eprintln!("{msg}");
            EXIT_FAIL
        }
    }
}

enum SimError {
    Config(String),
    Blowup {
        t: f64,
        what: String,
        last_good: Option<(PathBuf, f64)>,
    },
    Other(String),
}

fn simulate_inner(args: &SimulateArgs) -> std::result::Result<i32, SimError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        SimError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| SimError::Config(e.to_string()))?;
    if let Some(d) = &args.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(t) = args.t_end {
        cfg.t_end = t;
    }

    // model and state: either fresh from the configuration or resumed
    let (spec, mut state, resumed) = match &args.restart {
        Some(path) => {
            let (spec, state) = crate::snapshot::load(path)
                .map_err(|e| SimError::Config(format!("cannot restart from {}: {e}", path.display())))?;
            let g = state.b.grid();
            if g.dims() != [cfg.n, cfg.n] {
                return Err(SimError::Config(format!(
                    "snapshot grid {:?} does not match grid.n = {}",
                    g.dims(),
                    cfg.n
                )));
            }
            (spec, state, true)
        }
        None => {
            let grid = Grid::new_square(2, cfg.n, cfg.band)
                .map_err(|e| SimError::Config(e.to_string()))?;
            let spec = ModelSpec {
                system: cfg.system,
                eps: cfg.eps,
                alpha: cfg.alpha,
                beta: cfg.beta,
                nu: cfg.nu,
                eta: cfg.eta,
            };
            spec.validate().map_err(|e| SimError::Config(e.to_string()))?;
            let mut b = random_divfree(&grid, cfg.seed, cfg.k_max, cfg.slope)
                .map_err(|e| SimError::Config(e.to_string()))?;
            if cfg.amplitude_h3 > 0.0 {
                let h3 = b.sobolev_seminorm(3.0);
                if h3 > 0.0 {
                    b = b.scaled(cfg.amplitude_h3 / h3);
                }
            }
            let u = if spec.system.has_velocity() {
                let mut u = random_divfree(&grid, cfg.u_seed, cfg.k_max, cfg.slope)
                    .map_err(|e| SimError::Config(e.to_string()))?;
                if cfg.u_amplitude_l2 > 0.0 {
                    let l2 = u.l2_norm();
                    if l2 > 0.0 {
                        u = u.scaled(cfg.u_amplitude_l2 / l2);
                    }
                }
                Some(u)
            } else {
                None
            };
            (spec, SimState::new(b, u), false)
        }
    };

    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    let crit = CritConfig {
        p_u: cfg.crit_p_u,
        r_u: cfg.crit_r_u,
        p_b: cfg.crit_p_b,
        r_b: cfg.crit_r_b,
    };
    for w in crit.warnings() {
        eprintln!("warning: {w}");
    }

    let mut step_cfg = StepperConfig::new(cfg.t_end);
    step_cfg.dt = cfg.dt_mode();
    step_cfg.cfl = cfg.cfl;
    step_cfg.scheme = cfg.scheme;
    step_cfg.diagnostics_stride = cfg.stride;
    step_cfg.h3_ceiling = cfg.h3_ceiling;

    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| SimError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join("trajectory.csv");
    let latest_path = out_dir.join("snapshot_latest.bin");
    let final_path = out_dir.join("snapshot_final.bin");

    let append = resumed && csv_path.exists();
    let mut csv = if append {
        std::fs::OpenOptions::new().append(true).open(&csv_path)
    } else {
        std::fs::File::create(&csv_path)
    }
    .map_err(|e| SimError::Other(format!("cannot open {}: {e}", csv_path.display())))?;
    if !append {
        writeln!(csv, "{}", DiagnosticsRecord::csv_header())
            .map_err(|e| SimError::Other(format!("cannot write {}: {e}", csv_path.display())))?;
    }

    let mut stepper = Stepper::new(spec, step_cfg, state.b.grid())
        .map_err(|e| SimError::Config(e.to_string()))?;

    let mut last_good: Option<(PathBuf, f64)> = None;
    let mut last_snap_step: Option<u64> = None;
    let snap_stride = cfg.snapshot_stride.max(1) as u64;
    let run_result = stepper.run(&mut state, |st| {
        let rec = diagnostics::record(st, &spec, &crit);
        writeln!(csv, "{}", rec.csv_row())?;
        println!(
            "t = {:9.5}  |b| = {:.6e}  |b|_H3 = {:.6e}  energy defect = {:.3e}",
            st.t, rec.l2_b, rec.h3_b, rec.energy_defect
        );
        let due = match last_snap_step {
            None => true,
            Some(prev) => st.step_count >= prev + snap_stride,
        };
        if due {
            crate::snapshot::save(&latest_path, &spec, st)?;
            last_snap_step = Some(st.step_count);
            last_good = Some((latest_path.clone(), st.t));
        }
        Ok(())
    });

    match run_result {
        Ok(()) => {
            crate::snapshot::save(&final_path, &spec, &state)
                .map_err(|e| SimError::Other(format!("cannot write final snapshot: {e}")))?;
            println!(
                "reached t = {:.6e} in {} steps; final snapshot {}",
                state.t,
                state.step_count,
                final_path.display()
            );
            Ok(EXIT_OK)
        }
        Err(HmhdError::Blowup { t, what }) => Err(SimError::Blowup {
            t,
            what,
            last_good,
        }),
        Err(e) => Err(SimError::Other(format!("run failed: {e}"))),
    }
}

// ---------------------------------------------------------- scaling test

fn run_scaling(args: &ScalingArgs) -> i32 {
    let work = || -> Result<diagnostics::ScalingReport> {
        let grid = Grid::new_square(2, args.n, args.band)?;
        let mut b0 = random_divfree(&grid, args.seed, args.band, args.slope)?;
        let l2 = b0.l2_norm();
        if args.amplitude > 0.0 && l2 > 0.0 {
            b0 = b0.scaled(args.amplitude / l2);
        }
        diagnostics::scaling_test(&b0, args.beta, args.lambda, args.t_end, args.dt)
    };
    match work() {
        Ok(rep) => {
            println!(
                "lambda = {}  beta = {}  mismatch = {:.6e}  prefactor measured = {:.12}  predicted = {:.12}",
                rep.lambda, rep.beta, rep.mismatch, rep.prefactor_measured, rep.prefactor_predicted
            );
            if let Some(path) = &args.json {
                match serde_json::to_string_pretty(&rep) {
                    Ok(text) => {
                        if let Err(e) = std::fs::write(path, text) {
                            eprintln!("cannot write report {}: {e}", path.display());
                            return EXIT_FAIL;
                        }
                    }
                    Err(e) => {
                        eprintln!("cannot serialize report: {e}");
                        return EXIT_FAIL;
                    }
                }
            }
            if rep.mismatch < args.tol {
                println!("scaling commutation holds at tolerance {:.1e}", args.tol);
                EXIT_OK
            } else {
                eprintln!(
                    "scaling commutation FAILED: mismatch {:.6e} >= tolerance {:.1e}",
                    rep.mismatch, args.tol
                );
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("scaling test aborted: {e}");
            EXIT_FAIL
        }
    }
}
