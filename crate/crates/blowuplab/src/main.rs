//! Command-line front end: special-function evaluation, exponent
//! classification, test-function checks and dumps, the linear ODE traces,
//! nonlinear simulations, diagnostics reports, lifespan sweeps, and the
//! verification suite.

use blowuplab::cli_io::{self, fmt12, fmt15, Csv, DirLock, IoError, RunManifest};
use blowuplab::exponents::{self, LifespanLaw, ModelParams};
use blowuplab::linode::{sign_changes, solve_f1_ode};
use blowuplab::specfun;
use blowuplab::suite;
use blowuplab::testfunc::{self, TestFunctionKit};
use blowuplab::wavesolver::{
    self, geometry_for, SimOutcome, SimStatus, Snapshot, SolverOpts, SpatialGrid, DEFAULT_CFL,
    DEFAULT_THRESHOLD,
};
use blowuplab::{diagnostics, lifespan};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn config(msg: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_CONFIG, msg: msg.to_string() }
    }

    fn numerical(msg: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_NUMERICAL, msg: msg.to_string() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) => CliError::numerical(e),
            _ => CliError::config(e),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "blowuplab",
    version,
    about = "Numerical laboratory for blow-up of semilinear wave equations \
             with scale-invariant damping and mass"
)]
struct Cli {
    /// RNG seed recorded in run manifests
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the modified Bessel function K_xi(t) with an error estimate
    Specfun {
        /// order xi >= 0
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        /// argument t > 0
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
    /// Classify a parameter tuple: exponents, blow-up region, lifespan law
    Exponents(ExponentsArgs),
    /// Test-function identity suite and CSV dumps
    Testfunc {
        #[command(subcommand)]
        cmd: TestfuncCmd,
    },
    /// Integrate the linear ODE for F1 and report the sign structure of F2
    Linode(LinodeArgs),
    /// Run the nonlinear solver once and persist amplitude/snapshot CSVs
    Simulate(SimulateArgs),
    /// Check the coercivity and inequality diagnostics along a stored run
    Diagnose(DiagnoseArgs),
    /// Epsilon-sweep: measure blow-up times and fit the lifespan power law
    Sweep {
        /// flat key=value plan file
        #[arg(long)]
        config: PathBuf,
        /// output CSV (eps,T_est,converged,grid_dr); summary written alongside
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the fast verification suite; exits nonzero on any failure
    Check,
}

#[derive(Args)]
struct ExponentsArgs {
    /// read parameters from a flat key=value config instead of flags
    #[arg(long, conflicts_with_all = ["mu", "nu", "p", "q", "dim"])]
    config: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "N")]
    dim: Option<u32>,
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 1)]
    a: u8,
    #[arg(long, default_value_t = 0)]
    b: u8,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// write the one-row CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TestfuncCmd {
    /// Run the identity suite and print max residuals
    Check,
    /// Dump a test function on a grid as CSV
    Dump {
        #[arg(long, value_enum)]
        what: DumpWhat,
        /// evaluation grid LO:HI:COUNT
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 2.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[arg(long = "N", default_value_t = 1)]
        dim: u32,
        /// write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpWhat {
    Rho,
    Phi,
    Gamma,
}

#[derive(Args)]
struct LinodeArgs {
    #[command(subcommand)]
    cmd: Option<LinodeCmd>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// initial conditions F1(0),F1'(0)
    #[arg(long, default_value = "1,0")]
    ic: String,
    #[arg(long, default_value_t = 20.0)]
    tmax: f64,
    /// output CSV (t,F1,F1p,F2)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LinodeCmd {
    /// Reproduce the four reference figures: traces plus a summary CSV
    Figures {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    nu: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long = "N", default_value_t = 1)]
    dim: u32,
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    a: u8,
    #[arg(long, default_value_t = 0)]
    b: u8,
    #[arg(long, default_value_t = 0.01)]
    dr: f64,
    #[arg(long, default_value_t = DEFAULT_CFL)]
    cfl: f64,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// number of state snapshots to store (0 disables)
    #[arg(long, default_value_t = 0)]
    snapshots: usize,
    /// output prefix: writes <prefix>_amp.csv, <prefix>_meta,
    /// <prefix>_snap_####.csv, <prefix>_manifest.txt
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// prefix of a stored `simulate` run
    #[arg(long)]
    run: PathBuf,
    /// comma-separated subset of g1,g2,L,H,weak,transform
    #[arg(long, default_value = "g1,g2,L,H,weak,transform")]
    checks: String,
    /// report CSV (check,window,fitted_constant,pass,detail)
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Specfun { xi, t } => cmd_specfun(xi, t),
        Cmd::Exponents(args) => cmd_exponents(args),
        Cmd::Testfunc { cmd } => cmd_testfunc(cmd),
        Cmd::Linode(args) => cmd_linode(args, cli.seed),
        Cmd::Simulate(args) => cmd_simulate(args, cli.seed),
        Cmd::Diagnose(args) => cmd_diagnose(args, cli.seed),
        Cmd::Sweep { config, out } => cmd_sweep(&config, &out, cli.seed),
        Cmd::Check => cmd_check(),
    }
}

fn cmd_specfun(xi: f64, t: f64) -> Result<ExitCode> {
    let eval = specfun::bessel_k_eval(xi, t).map_err(CliError::config)?;
    println!("value={}", fmt15(eval.value));
    println!("abs_error_estimate={}", fmt15(eval.abs_error_estimate));
    Ok(ExitCode::SUCCESS)
}

fn cmd_exponents(args: ExponentsArgs) -> Result<ExitCode> {
    let params = if let Some(cfg) = &args.config {
        cli_io::parse_config(cfg)?.params
    } else {
        let require = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::config(format!("missing --{name} (or use --config)")))
        };
        ModelParams {
            mu: require(args.mu, "mu")?,
            nu: require(args.nu, "nu")?,
            p: require(args.p, "p")?,
            q: require(args.q, "q")?,
            dim: args
                .dim
                .ok_or_else(|| CliError::config("missing --N (or use --config)"))?,
            radius: args.radius,
            a: args.a,
            b: args.b,
            eps: args.eps,
        }
    };
    let report = exponents::classify(&params).map_err(CliError::config)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".into(), fmt12);
    let mut csv = Csv::new(&[
        "delta",
        "alpha",
        "sigma",
        "pG",
        "qS",
        "qF",
        "lambda",
        "region",
        "lifespan_exponent",
    ]);
    csv.push(vec![
        fmt12(report.delta),
        opt(report.alpha),
        opt(report.sigma),
        opt(report.p_glassey_shifted),
        opt(report.q_strauss_shifted),
        fmt12(report.q_fujita),
        fmt12(report.lambda_shifted),
        report.region.to_string(),
        match report.lifespan {
            LifespanLaw::Power(x) => fmt12(x),
            LifespanLaw::Exponential => "exp".into(),
            LifespanLaw::None => "nan".into(),
        },
    ])?;
    emit_csv(&csv, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn emit_csv(csv: &Csv, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => csv.write(path)?,
        None => print!("{}", csv.to_string()),
    }
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::config(format!("--grid expects LO:HI:COUNT, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count < 2 || !(hi > lo) {
        return Err(bad());
    }
    let h = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|i| lo + h * i as f64).collect())
}

fn cmd_testfunc(cmd: TestfuncCmd) -> Result<ExitCode> {
    match cmd {
        TestfuncCmd::Check => {
            let mut pass = true;
            for r in [suite::criterion_2(), suite::criterion_3()] {
                println!("[{}] {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                pass &= r.pass;
            }
            Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ACCEPTANCE) })
        }
        TestfuncCmd::Dump { what, grid, mu, nu, dim, out } => {
            let points = parse_grid(&grid)?;
            let csv = match what {
                DumpWhat::Phi => {
                    let mut csv = Csv::new(&["r", "value"]);
                    for r in &points {
                        csv.push(vec![fmt12(*r), fmt12(testfunc::phi(*r, dim))])?;
                    }
                    csv
                }
                DumpWhat::Rho | DumpWhat::Gamma => {
                    let params = ModelParams {
                        mu,
                        nu,
                        p: 1.5,
                        q: 2.0,
                        dim,
                        radius: 1.0,
                        a: 0,
                        b: 0,
                        eps: 0.1,
                    };
                    let kit = TestFunctionKit::new(params).map_err(CliError::config)?;
                    let mut csv = Csv::new(&["t", "value"]);
                    for t in &points {
                        if *t < 0.0 {
                            return Err(CliError::config("time grid must be nonnegative"));
                        }
                        let v = match what {
                            DumpWhat::Rho => kit.rho(*t),
                            _ => kit.gamma(*t),
                        }
                        .map_err(CliError::numerical)?;
                        csv.push(vec![fmt12(*t), fmt12(v)])?;
                    }
                    csv
                }
            };
            emit_csv(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn trace_csv(trace: &blowuplab::linode::OdeTrace) -> Result<Csv> {
    let mut csv = Csv::new(&["t", "F1", "F1p", "F2"]);
    for i in 0..trace.t_grid.len() {
        csv.push(vec![
            fmt12(trace.t_grid[i]),
            fmt12(trace.f1[i]),
            fmt12(trace.f1_prime[i]),
            fmt12(trace.f2[i]),
        ])?;
    }
    Ok(csv)
}

fn cmd_linode(args: LinodeArgs, seed: u64) -> Result<ExitCode> {
    if let Some(LinodeCmd::Figures { out_dir }) = args.cmd {
        let _lock = DirLock::acquire(&out_dir)?;
        let mut manifest = RunManifest::new("linode figures", seed);
        let mut summary = Csv::new(&["mu", "nu", "delta", "sign_changes", "final_sign"]);
        for (i, (mu, nu)) in [(10.0, 0.0), (10.0, 4.0), (9.0, 4.0), (10.0, 20.0)]
            .into_iter()
            .enumerate()
        {
            let trace =
                solve_f1_ode(mu, nu, (1.0, 0.0), 20.0, 1e-9).map_err(CliError::numerical)?;
            let path = out_dir.join(format!("trace_fig{}.csv", i + 1));
            trace_csv(&trace)?.write(&path)?;
            manifest.output(&path);
            let (changes, _) = sign_changes(&trace);
            let last = *trace.f2.last().unwrap();
            summary.push(vec![
                fmt12(mu),
                fmt12(nu),
                fmt12(exponents::delta(mu, nu)),
                changes.to_string(),
                if last > 0.0 { "+1" } else if last < 0.0 { "-1" } else { "0" }.to_string(),
            ])?;
        }
        let spath = out_dir.join("figures_summary.csv");
        summary.write(&spath)?;
        manifest.output(&spath);
        manifest.write(&out_dir.join("figures_manifest.txt"))?;
        return Ok(ExitCode::SUCCESS);
    }

    let mu = args.mu.ok_or_else(|| CliError::config("missing --mu"))?;
    let nu = args.nu.ok_or_else(|| CliError::config("missing --nu"))?;
    let out = args.out.ok_or_else(|| CliError::config("missing --out"))?;
    let ic = {
        let parts: Vec<&str> = args.ic.split(',').collect();
        let bad = || CliError::config(format!("--ic expects a,b; got {:?}", args.ic));
        if parts.len() != 2 {
            return Err(bad());
        }
        (
            parts[0].trim().parse::<f64>().map_err(|_| bad())?,
            parts[1].trim().parse::<f64>().map_err(|_| bad())?,
        )
    };
    let dir = out.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let _lock = DirLock::acquire(&dir)?;
    let trace =
        solve_f1_ode(mu, nu, ic, args.tmax, 1e-9).map_err(CliError::numerical)?;
    trace_csv(&trace)?.write(&out)?;
    let mut manifest = RunManifest::new("linode", seed);
    manifest.param("mu", mu);
    manifest.param("nu", nu);
    manifest.param("ic", format!("{},{}", ic.0, ic.1));
    manifest.param("tmax", args.tmax);
    manifest.output(&out);
    manifest.write(&manifest_path(&out))?;
    let (changes, _) = sign_changes(&trace);
    println!("sign_changes={changes}");
    Ok(ExitCode::SUCCESS)
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.txt")
}

fn status_str(s: SimStatus) -> &'static str {
    match s {
        SimStatus::BlewUp => "BLEWUP",
        SimStatus::Survived => "SURVIVED",
        SimStatus::Unresolved => "UNRESOLVED",
    }
}

fn cmd_simulate(args: SimulateArgs, seed: u64) -> Result<ExitCode> {
    let params = ModelParams {
        mu: args.mu,
        nu: args.nu,
        p: args.p,
        q: args.q,
        dim: args.dim,
        radius: args.radius,
        a: args.a,
        b: args.b,
        eps: args.eps,
    };
    params.validate().map_err(CliError::config)?;
    let grid = SpatialGrid::for_horizon(args.dr, args.tmax, args.radius, geometry_for(args.dim))
        .map_err(CliError::config)?;
    let mut opts = SolverOpts::new(args.tmax);
    opts.cfl = args.cfl;
    opts.threshold = args.threshold;
    if args.snapshots > 0 {
        opts.snap_cadence = Some(args.tmax / args.snapshots as f64);
    }

    let dir = args.out.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let _lock = DirLock::acquire(&dir)?;
    let outcome = wavesolver::run(&params, &grid, &opts).map_err(CliError::numerical)?;

    let prefix = args.out.display();
    let mut manifest = RunManifest::new("simulate", seed);

    let amp_path = PathBuf::from(format!("{prefix}_amp.csv"));
    let mut amp = Csv::new(&["t", "max_abs_u"]);
    for (t, m) in &outcome.amp_history {
        amp.push(vec![fmt12(*t), fmt12(*m)])?;
    }
    amp.write(&amp_path)?;
    manifest.output(&amp_path);

    let mut meta = String::new();
    let kv = |s: &mut String, k: &str, v: &dyn std::fmt::Display| {
        s.push_str(&format!("{k}={v}\n"));
    };
    kv(&mut meta, "mu", &params.mu);
    kv(&mut meta, "nu", &params.nu);
    kv(&mut meta, "p", &params.p);
    kv(&mut meta, "q", &params.q);
    kv(&mut meta, "N", &params.dim);
    kv(&mut meta, "R", &params.radius);
    kv(&mut meta, "a", &params.a);
    kv(&mut meta, "b", &params.b);
    kv(&mut meta, "eps", &params.eps);
    kv(&mut meta, "dr", &grid.dr);
    kv(&mut meta, "cfl", &args.cfl);
    kv(&mut meta, "tmax", &args.tmax);
    kv(&mut meta, "threshold", &args.threshold);
    kv(&mut meta, "dt", &outcome.dt);
    kv(&mut meta, "status", &status_str(outcome.status));
    if let Some(t_est) = outcome.t_est {
        kv(&mut meta, "T_est", &fmt12(t_est));
    }
    kv(&mut meta, "support_ok", &outcome.support_ok);
    kv(&mut meta, "n_snaps", &outcome.snapshots.len());
    for (i, snap) in outcome.snapshots.iter().enumerate() {
        kv(&mut meta, &format!("snap_{i:04}_t"), &snap.t);
    }
    let meta_path = PathBuf::from(format!("{prefix}_meta"));
    std::fs::write(&meta_path, &meta).map_err(|e| CliError::numerical(e))?;
    manifest.output(&meta_path);

    for (i, snap) in outcome.snapshots.iter().enumerate() {
        let mut csv = Csv::new(&["r", "u", "ut"]);
        let ut = snap.u_t();
        for j in 0..snap.u_curr.len() {
            csv.push(vec![fmt12(grid.r(j)), fmt12(snap.u_curr[j]), fmt12(ut[j])])?;
        }
        let path = PathBuf::from(format!("{prefix}_snap_{i:04}.csv"));
        csv.write(&path)?;
        manifest.output(&path);
    }

    manifest.param("status", status_str(outcome.status));
    manifest.write(&PathBuf::from(format!("{prefix}_manifest.txt")))?;

    println!("status={}", status_str(outcome.status));
    if let Some(t_est) = outcome.t_est {
        println!("T_est={}", fmt12(t_est));
    }
    println!("support_ok={}", outcome.support_ok);
    Ok(if outcome.status == SimStatus::Unresolved {
        ExitCode::from(EXIT_NUMERICAL)
    } else {
        ExitCode::SUCCESS
    })
}

/// Rebuild a SimOutcome from the files a `simulate` run persisted.
fn load_run(prefix: &Path) -> Result<SimOutcome> {
    let prefix = prefix.display();
    let meta_path = PathBuf::from(format!("{prefix}_meta"));
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|e| CliError::config(format!("{}: {e}", meta_path.display())))?;
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| {
        map.get(k).cloned().ok_or_else(|| {
            CliError::config(format!("{}: missing key {k:?}", meta_path.display()))
        })
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| {
            CliError::config(format!("{}: bad number for {k:?}", meta_path.display()))
        })
    };
    let params = ModelParams {
        mu: num("mu")?,
        nu: num("nu")?,
        p: num("p")?,
        q: num("q")?,
        dim: num("N")? as u32,
        radius: num("R")?,
        a: num("a")? as u8,
        b: num("b")? as u8,
        eps: num("eps")?,
    };
    let dr = num("dr")?;
    let dt = num("dt")?;
    let status = match get("status")?.as_str() {
        "BLEWUP" => SimStatus::BlewUp,
        "SURVIVED" => SimStatus::Survived,
        _ => SimStatus::Unresolved,
    };
    let t_est = map.get("T_est").and_then(|v| v.parse().ok());
    let support_ok = get("support_ok")? == "true";
    let n_snaps = num("n_snaps")? as usize;

    let amp_path = PathBuf::from(format!("{prefix}_amp.csv"));
    let amp = Csv::read(&amp_path)?;
    let mut amp_history = Vec::new();
    for row in &amp.rows {
        let t: f64 = row[0].parse().map_err(|_| CliError::config("bad amp row"))?;
        let m: f64 = row[1].parse().map_err(|_| CliError::config("bad amp row"))?;
        amp_history.push((t, m));
    }

    let mut snapshots = Vec::new();
    let mut n_points = 0;
    for i in 0..n_snaps {
        let path = PathBuf::from(format!("{prefix}_snap_{i:04}.csv"));
        let csv = Csv::read(&path)?;
        let t = num(&format!("snap_{i:04}_t"))?;
        let mut u_curr = Vec::with_capacity(csv.rows.len());
        let mut u_prev = Vec::with_capacity(csv.rows.len());
        for row in &csv.rows {
            let u: f64 = row[1].parse().map_err(|_| CliError::config("bad snap row"))?;
            let ut: f64 = row[2].parse().map_err(|_| CliError::config("bad snap row"))?;
            u_curr.push(u);
            u_prev.push(u - dt * ut);
        }
        n_points = u_curr.len();
        snapshots.push(Snapshot { t, dt, u_curr, u_prev });
    }
    if n_points < 2 {
        return Err(CliError::config("run has no snapshots; rerun simulate with --snapshots"));
    }
    let grid = SpatialGrid {
        dr,
        r_max: (n_points - 1) as f64 * dr,
        n_points,
        geometry: geometry_for(params.dim),
    };
    Ok(SimOutcome {
        status,
        t_est,
        bracket: None,
        amp_history,
        snapshots,
        support_ok,
        params,
        grid,
        dt,
    })
}

fn cmd_diagnose(args: DiagnoseArgs, seed: u64) -> Result<ExitCode> {
    let outcome = load_run(&args.run)?;
    let params = outcome.params;
    let kit = TestFunctionKit::new(params);
    let last_t = outcome.snapshots.last().map(|s| s.t).unwrap_or(0.0);
    let t_ref = outcome.t_est.unwrap_or(last_t);

    let requested: Vec<String> =
        args.checks.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    let known = ["g1", "g2", "L", "H", "weak", "transform"];
    for c in &requested {
        if !known.contains(&c.as_str()) {
            return Err(CliError::config(format!(
                "unknown check {c:?}; expected a subset of {}",
                known.join(",")
            )));
        }
    }

    // the functional trace backs every check except `transform`
    let needs_trace = requested.iter().any(|c| c != "transform");
    let trace = if needs_trace {
        let kit = kit
            .as_ref()
            .map_err(|e| CliError::config(format!("test-function kit: {e}")))?;
        Some(diagnostics::compute_functionals(&outcome, kit).map_err(CliError::numerical)?)
    } else {
        None
    };

    let mut report = Csv::new(&["check", "window", "fitted_constant", "pass", "detail"]);
    let window_str = |w: (f64, f64)| format!("{:.4}..{:.4}", w.0, w.1);
    let clean = |s: String| s.replace(',', ";");

    for check in &requested {
        let row: (String, String, bool, String) = match check.as_str() {
            "g1" => {
                let tr = trace.as_ref().unwrap();
                let w = (0.0, last_t);
                let (c_fit, pass) = diagnostics::check_g1_coercivity(tr, params.eps, w);
                (
                    window_str(w),
                    fmt12(c_fit),
                    pass,
                    format!("min G1/eps; cross-identity rel err {:.2e}", tr.cross_rel),
                )
            }
            "g2" => {
                let tr = trace.as_ref().unwrap();
                let rep = diagnostics::check_g2(tr, params.eps, &params);
                (
                    window_str((0.0, last_t)),
                    fmt12(rep.k_fit),
                    rep.pass,
                    format!(
                        "min G2 {:.3e}; coercive from {:?}; dip bound {}",
                        rep.min_g2, rep.coercive_from, rep.neg_bound_ok
                    ),
                )
            }
            "L" => {
                let tr = trace.as_ref().unwrap();
                match diagnostics::check_l_inequality(tr, &params, t_ref) {
                    Ok(rep) => (
                        window_str(rep.window),
                        fmt12(rep.c_fit),
                        rep.pass,
                        format!("degenerate={}", rep.degenerate),
                    ),
                    Err(e) => (window_str((0.0, t_ref)), "nan".into(), false, e.to_string()),
                }
            }
            "H" => {
                let tr = trace.as_ref().unwrap();
                match diagnostics::check_h_inequality(tr, &params, params.eps, t_ref) {
                    Ok(rep) => (
                        window_str(rep.window),
                        fmt12(rep.c_fit),
                        rep.pass,
                        format!("degenerate={}", rep.degenerate),
                    ),
                    Err(e) => (window_str((0.0, t_ref)), "nan".into(), false, e.to_string()),
                }
            }
            "weak" => {
                let kit = kit
                    .as_ref()
                    .map_err(|e| CliError::config(format!("test-function kit: {e}")))?;
                match diagnostics::weak_form_residual(&outcome, kit, diagnostics::TestChoice::One)
                {
                    Ok(res) => (
                        window_str((0.0, last_t)),
                        fmt12(res),
                        res <= 5e-2,
                        "normalized residual of the weak identity with Phi=1".into(),
                    ),
                    Err(e) => (window_str((0.0, last_t)), "nan".into(), false, e.to_string()),
                }
            }
            "transform" => {
                let which = if params.delta() >= 0.0 {
                    diagnostics::Transform::DampedV
                } else {
                    diagnostics::Transform::LiouvilleW
                };
                match diagnostics::transform_residual(&outcome, which) {
                    Ok(res) => (
                        window_str((0.0, last_t)),
                        fmt12(res),
                        res <= 5e-2,
                        format!("{which:?} transform residual"),
                    ),
                    Err(e) => (window_str((0.0, last_t)), "nan".into(), false, e.to_string()),
                }
            }
            _ => unreachable!(),
        };
        report.push(vec![check.clone(), row.0, row.1, row.2.to_string(), clean(row.3)])?;
    }

    let dir = args.out.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let _lock = DirLock::acquire(&dir)?;
    report.write(&args.out)?;
    let mut manifest = RunManifest::new("diagnose", seed);
    manifest.param("run", args.run.display());
    manifest.param("checks", requested.join(";"));
    manifest.output(&args.out);
    manifest.write(&manifest_path(&args.out))?;
    print!("{}", report.to_string());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(config: &Path, out: &Path, seed: u64) -> Result<ExitCode> {
    let cfg = cli_io::parse_config(config)?;
    let t_max_hint = cfg.tmax.unwrap_or(10.0);
    let mut plan =
        lifespan::SweepPlan::new(cfg.params, cfg.eps_list.clone(), cfg.dr_list.clone(), t_max_hint);
    plan.threshold = cfg.threshold;
    plan.cfl = cfg.cfl;

    let dir = out.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let _lock = DirLock::acquire(&dir)?;

    let result = lifespan::run_sweep(&plan).map_err(|e| match e {
        lifespan::SweepError::Invalid(_) => CliError::config(e),
        _ => CliError::numerical(e),
    })?;

    let mut csv = Csv::new(&["eps", "T_est", "converged", "grid_dr"]);
    for r in &result.records {
        csv.push(vec![
            fmt12(r.eps),
            fmt12(r.t_est),
            r.converged.to_string(),
            fmt12(r.grid_dr),
        ])?;
    }
    for eps in &result.survived {
        csv.push(vec![fmt12(*eps), "nan".into(), "false".into(), "nan".into()])?;
    }
    csv.write(out)?;

    let theory = match result.theory {
        LifespanLaw::Power(x) => fmt12(x),
        LifespanLaw::Exponential => "exp".into(),
        LifespanLaw::None => "nan".into(),
    };
    let (slope, intercept, r2) = match result.fit {
        Some((s, i, r)) => (fmt12(s), fmt12(i), fmt12(r)),
        None => ("nan".into(), "nan".into(), "nan".into()),
    };
    let mut summary = String::new();
    summary.push_str(&format!("slope={slope}\n"));
    summary.push_str(&format!("intercept={intercept}\n"));
    summary.push_str(&format!("r2={r2}\n"));
    summary.push_str(&format!("theory_exponent={theory}\n"));
    summary.push_str(&format!("verdict={}\n", result.verdict));
    summary.push_str(&format!("monotone={}\n", result.monotone));
    print!("{summary}");
    let summary_path = out.with_extension("summary.txt");
    std::fs::write(&summary_path, &summary).map_err(CliError::numerical)?;

    let mut manifest = RunManifest::new("sweep", seed);
    manifest.config_sha256 = Some(cli_io::sha256_hex(&cfg.raw));
    manifest.param("verdict", result.verdict);
    manifest.output(out);
    manifest.output(&summary_path);
    manifest.write(&manifest_path(out))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check() -> Result<ExitCode> {
    let results = suite::fast_suite();
    let mut all = true;
    for r in &results {
        println!(
            "[{}] criterion {} ({}): {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.detail
        );
        all &= r.pass;
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ACCEPTANCE) })
}
