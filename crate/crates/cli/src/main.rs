//! `renorm`: command-line front end for the solver, the Whitney decomposition
//! and the weighted inequality checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use renorm_core::energy::build_singular_part;
use renorm_core::geometry::{default_profile, parse_spacing, Domain, Grid};
use renorm_core::hardy::{
    chain_audit, default_c1, growth_check, hardy_scan, hardy_search_family, sigma_scan, standard_family,
    trudinger_suite, weighted_sobolev_suite, write_sigma_csv, TheoreticalConstants,
};
use renorm_core::solver::{
    heatmap_svg, kv_check, liouville_residual, solve_from, verify_minimizer, write_fields_csv, Preconditioner,
    SolverConfig,
};
use renorm_core::whitney::{decompose, verify_properties, BumpFunction, DerivedConstants, WhitneyParams};
use renorm_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "renorm",
    version,
    about = "Renormalized energies, Whitney partitions and weighted Hardy-Trudinger checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the renormalized energy and reconstruct the maximal solution.
    Solve(SolveArgs),
    /// Build a Whitney decomposition and verify its partition-of-unity properties.
    Whitney(WhitneyArgs),
    /// Check the weighted Sobolev and Trudinger inequalities on the test family.
    VerifyInequality(InequalityArgs),
    /// Print the constants of the weighted inequalities.
    Constants(ConstantsArgs),
    /// Audit every step of the localization argument for one test function.
    AuditChain(ChainArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Preset (disk, square, l-shape, annulus), a JSON file or inline JSON
    #[arg(long, default_value = "disk")]
    domain: String,
    /// Output directory
    #[arg(
        long = "report",
        visible_alias = "out",
        env = "RENORM_OUT_DIR",
        default_value = "renorm-out"
    )]
    report: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write SVG pictures
    #[arg(long)]
    svg: bool,
    /// Also write CSV tables
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug, Clone)]
struct WhitneyOpts {
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    #[arg(long = "eta-prime", default_value_t = 1.05)]
    eta_prime: f64,
    #[arg(long = "k-max", default_value_t = 14)]
    k_max: i32,
}

impl WhitneyOpts {
    fn params(&self, dim: usize) -> Result<WhitneyParams> {
        WhitneyParams::new(self.eta, self.eta_prime, dim, self.k_max)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Grid spacing, e.g. 1/256
    #[arg(long, default_value = "1/64")]
    h: String,
    /// Hardy constant for the global bound
    #[arg(long = "H", default_value_t = 2.0)]
    hardy: f64,
    #[arg(long, default_value_t = 1e-8)]
    gradient_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    cg_tol: f64,
    #[arg(long, default_value_t = 60)]
    max_newton: usize,
    /// Jacobi-precondition the linear solves
    #[arg(long)]
    jacobi: bool,
    /// Random perturbations per amplitude in the minimizer check
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Args, Debug)]
struct WhitneyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    whitney: WhitneyOpts,
    /// Monte Carlo samples for the coverage and partition checks
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct InequalityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    whitney: WhitneyOpts,
    #[arg(long, default_value = "1/64")]
    h: String,
    /// Exponents, comma separated
    #[arg(long, value_delimiter = ',', default_value = "3,4,6,10,20")]
    q: Vec<f64>,
    #[arg(long = "H", default_value_t = 2.0)]
    hardy: f64,
    #[arg(long)]
    c1: Option<f64>,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long = "N", default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
    #[arg(long = "H", default_value_t = 2.0)]
    hardy: f64,
    #[arg(long)]
    c1: Option<f64>,
    #[command(flatten)]
    whitney: WhitneyOpts,
    #[arg(
        long = "report",
        visible_alias = "out",
        env = "RENORM_OUT_DIR",
        default_value = "renorm-out"
    )]
    report: PathBuf,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    whitney: WhitneyOpts,
    #[arg(long, default_value = "1/64")]
    h: String,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
    /// Index into the standard test family; all members when omitted
    #[arg(long)]
    function: Option<usize>,
}

fn parse_domain(text: &str) -> Result<Domain> {
    match text.to_ascii_lowercase().as_str() {
        "disk" => return Ok(Domain::unit_disk()),
        "square" => return Ok(Domain::unit_square()),
        "l-shape" | "lshape" | "l" => return Ok(Domain::l_shape()),
        "annulus" => return Domain::annulus(&[0.0, 0.0], 0.5, 1.0),
        _ => {}
    }
    if text.trim_start().starts_with('{') {
        return Domain::from_json(text);
    }
    let body = fs::read_to_string(text)
        .map_err(|e| Error::InvalidDomain(format!("{text:?} is neither a preset nor a readable file: {e}")))?;
    Domain::from_json(&body)
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Writes the JSON envelope and reports where it went.
fn emit(dir: &Path, name: &str, command: &str, pass: bool, body: impl Serialize) -> Result<bool> {
    let envelope = json!({
        "command": command,
        "timestamp": timestamp(),
        "pass": pass,
        "report": body,
    });
    write(dir, name, &serde_json::to_string_pretty(&envelope)?)?;
    println!(
        "{command}: {} -> {}",
        if pass { "pass" } else { "FAIL" },
        dir.join(name).display()
    );
    Ok(pass)
}

fn run_solve(args: &SolveArgs) -> Result<bool> {
    let domain = parse_domain(&args.common.domain)?;
    let h = parse_spacing(&args.h)?;
    let grid = Grid::new(&domain, h)?;
    let profile = default_profile(&domain);
    let config = SolverConfig {
        gradient_tol: args.gradient_tol,
        cg_rel_tol: args.cg_tol,
        max_newton: args.max_newton,
        preconditioner: if args.jacobi {
            Preconditioner::Jacobi
        } else {
            Preconditioner::None
        },
        hardy_constant: args.hardy,
        ..Default::default()
    };
    config.validate()?;
    let sp = build_singular_part(&domain, &profile, &grid)?;
    let report = solve_from(
        &domain,
        &sp,
        &renorm_core::geometry::ScalarField::zeros(grid.clone()),
        &config,
    )?;
    let minimizer = verify_minimizer(&report, &sp, args.trials, args.common.seed)?;
    let kv = kv_check(&sp, args.hardy, args.trials, args.common.seed);
    let scan = hardy_scan(&domain, &grid, &hardy_search_family(&domain, h))?;
    let hardy_ok = args.hardy >= scan.h_emp;
    let pass = report.converged
        && report.strictly_decreasing()
        && report.gradient_bound.pass
        && minimizer.pass
        && kv.pass
        && hardy_ok;
    let dir = &args.common.report;
    if args.common.csv {
        let mut buf = Vec::new();
        write_fields_csv(&report, &sp, &mut buf)?;
        write(dir, "fields.csv", &String::from_utf8_lossy(&buf))?;
    }
    if args.common.svg {
        write(dir, "u.svg", &heatmap_svg(&report.u, 600.0, 128)?)?;
        write(
            dir,
            "residual.svg",
            &heatmap_svg(&liouville_residual(&report.u, &sp.d)?, 600.0, 128)?,
        )?;
    }
    let body = json!({
        "domain": domain,
        "profile": profile,
        "config": config,
        "solve": report,
        "minimizer": minimizer,
        "kv_bound": kv,
        "hardy": { "configured": args.hardy, "empirical": scan.h_emp, "best": scan.best, "pass": hardy_ok },
    });
    emit(dir, "solve_report.json", "solve", pass, body)
}

fn run_whitney(args: &WhitneyArgs) -> Result<bool> {
    let domain = parse_domain(&args.common.domain)?;
    let params = args.whitney.params(domain.dim())?;
    let decomp = decompose(&domain, &params)?;
    let bump = BumpFunction::new(params.eta_prime, params.dim)?;
    let report = verify_properties(&decomp, &bump, args.samples, args.common.seed);
    let dir = &args.common.report;
    write(dir, "whitney_cubes.json", &decomp.to_json()?)?;
    if args.common.svg && params.dim == 2 {
        write(dir, "whitney.svg", &decomp.to_svg(600.0)?)?;
    }
    let body = json!({
        "domain": domain,
        "params": params,
        "cubes": decomp.len(),
        "epsilon_cut": decomp.epsilon_cut(),
        "constants": decomp.constants(),
        "properties": report,
    });
    emit(dir, "whitney_report.json", "whitney", report.pass, body)
}

fn run_inequality(args: &InequalityArgs) -> Result<bool> {
    let domain = parse_domain(&args.common.domain)?;
    let h = parse_spacing(&args.h)?;
    let grid = Grid::new(&domain, h)?;
    let params = args.whitney.params(2)?;
    let dc = DerivedConstants::compute(&params, &BumpFunction::new(params.eta_prime, 2)?)?;
    let family = standard_family(&domain);
    let sobolev = weighted_sobolev_suite(&domain, &grid, &dc, &family, &args.q)?;
    let c1 = args.c1.unwrap_or_else(|| default_c1(&dc, 2));
    let trudinger = trudinger_suite(&domain, &grid, &dc, &family, c1)?;
    let rows = sigma_scan(&dc, (3..=60).map(f64::from))?;
    let growth = growth_check(&rows);
    let scan = hardy_scan(&domain, &grid, &hardy_search_family(&domain, h))?;
    let hardy_ok = args.hardy >= scan.h_emp;
    let pass = sobolev.iter().chain(&trudinger).all(|r| r.pass) && growth.pass && hardy_ok;
    let dir = &args.common.report;
    if args.common.csv {
        let mut buf = Vec::new();
        write_sigma_csv(&rows, &mut buf)?;
        write(dir, "sigma_scan.csv", &String::from_utf8_lossy(&buf))?;
    }
    let body = json!({
        "domain": domain,
        "h": h,
        "c1": c1,
        "records": sobolev.iter().chain(&trudinger).collect::<Vec<_>>(),
        "sigma_growth": { "rows": rows, "check": growth },
        "hardy": { "configured": args.hardy, "empirical": scan.h_emp, "best": scan.best, "pass": hardy_ok },
    });
    emit(dir, "inequality_report.json", "verify-inequality", pass, body)
}

fn run_constants(args: &ConstantsArgs) -> Result<bool> {
    let params = args.whitney.params(args.n)?;
    let dc = DerivedConstants::compute(&params, &BumpFunction::new(params.eta_prime, args.n)?)?;
    let constants = TheoreticalConstants::compute(&dc, args.n, args.q, args.c1, args.hardy)?;
    println!("{}", serde_json::to_string_pretty(&constants)?);
    emit(
        &args.report,
        "constants.json",
        "constants",
        true,
        json!({ "params": params, "constants": constants }),
    )
}

fn run_chain(args: &ChainArgs) -> Result<bool> {
    let domain = parse_domain(&args.common.domain)?;
    let h = parse_spacing(&args.h)?;
    let grid = Grid::new(&domain, h)?;
    let params = args.whitney.params(2)?;
    let decomp = decompose(&domain, &params)?;
    let bump = BumpFunction::new(params.eta_prime, 2)?;
    let family = standard_family(&domain);
    let chosen: Vec<_> = match args.function {
        Some(i) => vec![family
            .get(i)
            .ok_or_else(|| Error::InvalidParams(format!("test family has {} members, got index {i}", family.len())))?
            .clone()],
        None => family,
    };
    let mut audits: Vec<Value> = Vec::new();
    let mut pass = true;
    for func in &chosen {
        let u = func.evaluate(&domain, &grid);
        let report = chain_audit(&u, &decomp, &bump, args.q, 2.0)?;
        pass &= report.pass;
        audits.push(json!({ "function": func, "audit": report }));
    }
    let body = json!({ "domain": domain, "h": h, "params": params, "audits": audits });
    emit(&args.common.report, "chain_report.json", "audit-chain", pass, body)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Whitney(a) => run_whitney(a),
        Command::VerifyInequality(a) => run_inequality(a),
        Command::Constants(a) => run_constants(a),
        Command::AuditChain(a) => run_chain(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
