//! `simflow` command-line driver.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use simflow::case::Case;
use simflow::eigenvalue::{default_bracket, solve_lambda};
use simflow::fields::sample;
use simflow::fv::{crossval_run, snapshot, GridSpec, DEFAULT_CFL};
use simflow::solution::build_solution;
use simflow::weak::{default_deltas, default_t_grid, verify, VerifyReport};

use config::{CliError, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "simflow", version, about = "Similarity flows for imploding shocks and collapsing cavities")]
struct Cli {
    /// key = value file; flags given on the command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Find the similarity exponent and print it as JSON
    SolveLambda,
    /// Construct the complete flow and write a case file
    Build,
    /// Sample physical fields on a (t, r) grid as CSV
    Fields,
    /// Run the weak-solution checks on a case file
    Verify,
    /// Compare a finite-volume run against the exact flow
    Crossval,
}

#[derive(Args)]
struct Flags {
    #[arg(long, global = true)]
    gamma: Option<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    /// shock or cavity
    #[arg(long, global = true)]
    kind: Option<String>,
    #[arg(long, global = true)]
    rtol: Option<String>,
    #[arg(long, global = true)]
    atol: Option<String>,
    #[arg(long, global = true)]
    shoot_tol: Option<String>,
    #[arg(long, global = true)]
    series_order: Option<String>,
    #[arg(long, global = true)]
    eps_c: Option<String>,
    #[arg(long, global = true)]
    eps_s: Option<String>,
    #[arg(long = "eps-0", global = true)]
    eps_0: Option<String>,
    #[arg(long, global = true)]
    shoot_ball: Option<String>,
    #[arg(long, global = true)]
    max_dxi: Option<String>,
    #[arg(long, global = true)]
    w_start: Option<String>,
    /// points in the initial λ scan
    #[arg(long, global = true)]
    n_scan: Option<String>,
    /// case file to read (fields, verify, crossval)
    #[arg(long, global = true)]
    case: Option<String>,
    /// output file; stdout when absent
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    r_bar: Option<String>,
    /// list `a,b,c`, range `lo:hi:count` or `log:lo:hi:count`
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_grid: Option<String>,
    #[arg(long, global = true)]
    r_grid: Option<String>,
    #[arg(long, global = true)]
    deltas: Option<String>,
    /// comma-separated cell counts
    #[arg(long, global = true)]
    n_cells: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_start: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_end: Option<String>,
    #[arg(long, global = true)]
    r_min: Option<String>,
    #[arg(long, global = true)]
    r_max: Option<String>,
    #[arg(long, global = true)]
    cfl: Option<String>,
    /// CSV snapshot of the finest crossval grid
    #[arg(long, global = true)]
    snapshot: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("gamma", &self.gamma),
            ("n", &self.n),
            ("kind", &self.kind),
            ("rtol", &self.rtol),
            ("atol", &self.atol),
            ("shoot_tol", &self.shoot_tol),
            ("series_order", &self.series_order),
            ("eps_c", &self.eps_c),
            ("eps_s", &self.eps_s),
            ("eps_0", &self.eps_0),
            ("shoot_ball", &self.shoot_ball),
            ("max_dxi", &self.max_dxi),
            ("w_start", &self.w_start),
            ("n_scan", &self.n_scan),
            ("case", &self.case),
            ("out", &self.out),
            ("r_bar", &self.r_bar),
            ("t_grid", &self.t_grid),
            ("r_grid", &self.r_grid),
            ("deltas", &self.deltas),
            ("n_cells", &self.n_cells),
            ("t_start", &self.t_start),
            ("t_end", &self.t_end),
            ("r_min", &self.r_min),
            ("r_max", &self.r_max),
            ("cfl", &self.cfl),
            ("snapshot", &self.snapshot),
        ]
    }
}

/// Format with 12 significant digits.
fn g12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let d = (11 - e).max(0) as usize;
        let s = format!("{x:.d$}");
        if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s }
    } else {
        format!("{x:.11e}")
    }
}

/// Round every float in a JSON tree to 12 significant digits.
fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            if let Some(m) = format!("{x:.11e}").parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

fn json_out<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).map_err(|e| UsageError(e.to_string()))?;
    round_json(&mut v);
    Ok(serde_json::to_string_pretty(&v).map_err(|e| UsageError(e.to_string()))? + "\n")
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match cfg.raw("out") {
        Some(p) => std::fs::write(p, text).map_err(|e| UsageError(format!("out: {p}: {e}")).into()),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes()).map_err(|e| UsageError(format!("stdout: {e}")).into())
        }
    }
}

fn load_case(cfg: &RunConfig) -> Result<Case, CliError> {
    let p = cfg.raw("case").ok_or_else(|| UsageError("case: a case file is required (run `simflow build` first)".into()))?;
    Ok(Case::read(std::path::Path::new(p))?)
}

fn cmd_solve_lambda(cfg: &RunConfig) -> Result<(), CliError> {
    let gas = cfg.gas()?;
    let ctl = cfg.controls()?;
    let shoot = solve_lambda(&gas, default_bracket(&gas), &ctl, cfg.usize_or("n_scan", 41)?)?;
    let mut v = serde_json::to_value(&shoot).map_err(|e| UsageError(e.to_string()))?;
    if let Value::Object(o) = &mut v {
        o.insert("gamma".into(), gas.gamma.into());
        o.insert("n".into(), gas.n.into());
        o.insert("kind".into(), gas.kind.name().into());
    }
    emit(cfg, &json_out(&v)?)
}

fn cmd_build(cfg: &RunConfig) -> Result<(), CliError> {
    let gas = cfg.gas()?;
    let ctl = cfg.controls()?;
    let shoot = solve_lambda(&gas, default_bracket(&gas), &ctl, cfg.usize_or("n_scan", 41)?)?;
    let sol = build_solution(&gas, &ctl, shoot)?;
    let summary = serde_json::json!({
        "lambda": sol.lam.lambda,
        "x_c": sol.x_c(),
        "B": sol.b(),
        "ell": sol.origin.ell,
        "L": sol.origin.big_l,
        "R0": sol.r0(),
        "integral_drift": sol.integral_drift(),
        "asymptotics": sol.asymptotics,
    });
    let case = Case::new(sol);
    match cfg.raw("out") {
        Some(p) => {
            case.write(std::path::Path::new(p))?;
            print!("{}", json_out(&summary)?);
            Ok(())
        }
        None => {
            println!("{}", case.to_json()?);
            Ok(())
        }
    }
}

fn cmd_fields(cfg: &RunConfig) -> Result<(), CliError> {
    let case = load_case(cfg)?;
    let sol = &case.solution;
    let ts = cfg.list_or("t_grid", vec![-1.0, -0.5, 0.0, 0.5, 1.0])?;
    let rs = cfg.list_or("r_grid", log_grid(0.01, 2.0, 200))?;
    let mut s = String::from("# t,r,rho,u,c,p,region\n");
    for (k, &t) in ts.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        for &r in &rs {
            let q = sample(sol, t, r)?;
            s += &format!("{},{},{},{},{},{},{}\n", g12(t), g12(r), g12(q.rho), g12(q.u), g12(q.c), g12(q.p), q.region.name());
        }
    }
    emit(cfg, &s)
}

fn log_grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a * (b / a).powf(i as f64 / (k - 1) as f64)).collect()
}

fn summary_table(rep: &VerifyReport) -> String {
    let mut s = String::new();
    let tag = if rep.informational { " (informational)" } else { "" };
    s += &format!("lambda = {}{tag}\n", g12(rep.lambda));
    let p = &rep.p_conditions;
    s += &format!("lambda < 1 + n/2     {}\n", rep.lambda_ok);
    s += &format!("P1  1+V in [{}, {}]   {}\n", g12(p.p1_bracket.0), g12(p.p1_bracket.1), p.p1);
    s += &format!("P2  ell = {}, L = {}   {}\n", g12(p.ell), g12(p.big_l), p.p2);
    s += &format!("P3  V({}) - V0 = {}   {}\n", g12(p.x_max), g12(p.v_at_x_max - p.v0), p.p3);
    s += "quantity  closed form      limit below      limit above      rel. jump\n";
    for r in &rep.continuity {
        s += &format!("{:<9} {:<16} {:<16} {:<16} {}\n", r.quantity.label(), g12(r.closed_form), g12(r.limit_below), g12(r.limit_above), g12(r.jump));
    }
    match (&rep.integrability, &rep.integrability_error) {
        (Some(i), _) => s += &format!("I_2 = {}  I_3 = {}  P_0 = {}  P_1 = {}\n", g12(i.i2), g12(i.i3), g12(i.p0), g12(i.p1)),
        (None, Some(e)) => s += &format!("integrability: {e}\n"),
        _ => {}
    }
    s += "equation  fitted exp   predicted    decays\n";
    for f in &rep.flux_residuals {
        let fit = f.fitted_exponent.map_or("-".to_string(), g12);
        s += &format!("{:<9} {:<12} {:<12} {}\n", format!("{:?}", f.equation).to_lowercase(), fit, g12(f.predicted_exponent), f.decays);
    }
    s
}

fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let case = load_case(cfg)?;
    let sol = &case.solution;
    let r_bar = cfg.f64_or("r_bar", 1.0)?;
    let ts = cfg.list_or("t_grid", default_t_grid())?;
    let ds = cfg.list_or("deltas", default_deltas())?;
    let rep = verify(sol, r_bar, &ts, &ds)?;
    emit(cfg, &json_out(&rep)?)?;
    eprint!("{}", summary_table(&rep));
    if !rep.informational && !rep.weak_form_ok() {
        return Err(CliError::WeakForm("see the report for the failing entries".into()));
    }
    Ok(())
}

fn cmd_crossval(cfg: &RunConfig) -> Result<(), CliError> {
    let case = load_case(cfg)?;
    let sol = &case.solution;
    let cells: Vec<usize> = cfg
        .list_or("n_cells", vec![512.0, 1024.0, 2048.0, 4096.0])?
        .into_iter()
        .map(|x| if x >= 1.0 && x.fract() == 0.0 { Ok(x as usize) } else { Err(UsageError(format!("n_cells: {x} is not a count"))) })
        .collect::<Result<_, _>>()?;
    let t0 = cfg.f64_or("t_start", -1.0)?;
    let t1 = cfg.f64_or("t_end", -0.5)?;
    let r_min = cfg.f64_or("r_min", 0.05)?;
    let r_max = cfg.f64_or("r_max", 2.0)?;
    let cfl = cfg.f64_or("cfl", DEFAULT_CFL)?;
    let mut s = String::from("n_cells,t_start,t_end,l1_rho,l1_u,l1_p,linf_rho,linf_u,linf_p,rel_l1_rho,shock_numeric,shock_exact,shock_offset_cells,mass_defect,steps\n");
    let mut last = None;
    for &n in &cells {
        let (run, grid) = crossval_run(sol, GridSpec { r_min, r_max, n_cells: n }, t0, t1, cfl)?;
        let e = &run.norms;
        s += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            n,
            g12(t0),
            g12(t1),
            g12(e.l1[0]),
            g12(e.l1[1]),
            g12(e.l1[2]),
            g12(e.linf[0]),
            g12(e.linf[1]),
            g12(e.linf[2]),
            g12(e.rho_relative()),
            run.shock_numeric.map_or("nan".into(), g12),
            g12(run.shock_exact),
            g12(run.shock_offset_cells),
            g12(run.mass_defect),
            run.steps
        );
        last = Some(grid);
    }
    emit(cfg, &s)?;
    if let (Some(p), Some(grid)) = (cfg.raw("snapshot"), last) {
        let mut t = String::from("r,rho,u,p,rho_exact,u_exact,p_exact\n");
        for row in snapshot(&grid, sol)? {
            t += &format!("{},{},{},{},{},{},{}\n", g12(row.r), g12(row.rho), g12(row.u), g12(row.p), g12(row.rho_exact), g12(row.u_exact), g12(row.p_exact));
        }
        std::fs::write(p, t).map_err(|e| UsageError(format!("snapshot: {p}: {e}")))?;
    }
    Ok(())
}

fn set_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("SIMFLOW_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| UsageError(format!("SIMFLOW_THREADS: expected a thread count, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| UsageError(format!("SIMFLOW_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    set_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in cli.flags.pairs() {
        if let Some(v) = v {
            cfg.set(k, v.clone());
        }
    }
    match cli.cmd {
        Cmd::SolveLambda => cmd_solve_lambda(&cfg),
        Cmd::Build => cmd_build(&cfg),
        Cmd::Fields => cmd_fields(&cfg),
        Cmd::Verify => cmd_verify(&cfg),
        Cmd::Crossval => cmd_crossval(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(g12(1.5713126233031), "1.5713126233");
        assert_eq!(g12(-0.5), "-0.5");
        assert_eq!(g12(1.0e-9), "1.00000000000e-9");
        let mut v = serde_json::json!({"a": [0.1234567890123456]});
        round_json(&mut v);
        assert_eq!(v["a"][0].as_f64().unwrap(), 0.123456789012);
    }
}
