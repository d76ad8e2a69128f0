use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use wnd_core::instance::{verify_powers, OFF_DB};
use wnd_core::milp::Audit;
use wnd_core::report::{opt_num, Table, TableFormat};
use wnd_core::wplan::{self, full_size, power_set_with_levels, Schedule, WplanConfig, WplanResult};
use wnd_core::{
    generate, read_instance, read_solution, solve_formulation, write_instance, write_solution, FormulationKind,
    Instance, PowerSet, PropagationConfig, SolutionFile, SolveOutcome,
};

#[derive(Parser)]
#[command(name = "wnd", version, about = "Power-discretized wireless network design solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// Solve an instance with one formulation and audit the result.
    Solve(SolveArgs),
    /// Audit a solution file against an instance.
    Verify(VerifyArgs),
    /// Solve one instance with BM, DM, DM&GCI1 and WPLAN under equal budgets.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    sites: usize,
    #[arg(long, default_value_t = 100)]
    testpoints: usize,
    /// Side of the square area in metres.
    #[arg(long)]
    side: Option<f64>,
    /// Linear noise power.
    #[arg(long)]
    noise: Option<f64>,
    /// Linear SIR threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Integer revenues in [1, 100] instead of unit revenues.
    #[arg(long)]
    population: bool,
}

impl GenArgs {
    fn instance(&self) -> Result<Instance> {
        let mut cfg = PropagationConfig { population: self.population, ..Default::default() };
        if let Some(v) = self.side {
            cfg.side_m = v;
        }
        if let Some(v) = self.noise {
            cfg.noise_mu = v;
        }
        if let Some(v) = self.threshold {
            cfg.sir_threshold = v;
        }
        Ok(generate(self.seed, self.sites, self.testpoints, &cfg)?)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// bm, dm, dm0, pi or dm-gci1. `pi` runs the iterative driver.
    #[arg(long)]
    formulation: String,
    /// Number of power levels, off included (default: the full integer range).
    #[arg(long)]
    levels: Option<usize>,
    /// Level counts of the iterative schedule, e.g. 2,4,6,22.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    time_limit: Option<f64>,
    /// Solution file; tables and the outcome JSON are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    table: TableFormat,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Writes the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Instance file; a generated instance is used when absent.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    /// Level count for DM and DM&GCI1 (default: the last schedule set).
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value = "2,4,6")]
    schedule: String,
    /// Budget per formulation in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    table: TableFormat,
}

/// Bad flags, files or schedules: exit code 2.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T, E: Into<anyhow::Error>>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| InputError(e.into()).into())
}

fn input_err<T>(msg: String) -> Result<T> {
    Err(InputError(anyhow::anyhow!(msg)).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let inst = input(a.gen.instance())?;
    write_instance(&inst, &a.out)?;
    println!("wrote {} ({} sites, {} testpoints)", a.out.display(), inst.n_transmitters, inst.n_testpoints);
    Ok(())
}

enum Formulation {
    Single(FormulationKind),
    Wplan,
}

fn parse_formulation(s: &str) -> Result<Formulation> {
    match s {
        "pi" => Ok(Formulation::Wplan),
        "bm" | "dm" | "dm0" | "dm-gci1" => Ok(Formulation::Single(s.parse().expect("known name"))),
        other => input_err(format!("unknown formulation `{other}` (expected bm, dm, dm0, pi or dm-gci1)")),
    }
}

fn time_limit(secs: Option<f64>) -> Result<Option<Duration>> {
    match secs {
        None => Ok(None),
        Some(s) if s.is_finite() && s >= 0.0 => Ok(Some(Duration::from_secs_f64(s))),
        Some(s) => input_err(format!("invalid time limit {s}")),
    }
}

fn levels_set(inst: &Instance, levels: Option<usize>) -> Result<PowerSet> {
    let n = levels.unwrap_or_else(|| full_size(inst.p_min_db, inst.p_max_db));
    input(power_set_with_levels(inst.p_min_db, inst.p_max_db, n))
}

/// `dir/name.json` -> `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn table_ext(format: TableFormat) -> &'static str {
    match format {
        TableFormat::Text => "txt",
        TableFormat::Csv => "csv",
    }
}

fn solution_file(formulation: &str, audit: &Audit, power_set: Option<&PowerSet>) -> SolutionFile {
    let db = |p: f64| if p > 0.0 { 10.0 * p.log10() } else { OFF_DB };
    SolutionFile {
        version: 1,
        formulation: formulation.to_string(),
        server: audit.server.iter().map(|s| s.map_or(-1, |b| b as i64)).collect(),
        power_level: audit.power_level.as_ref().map(|l| l.iter().map(|&l| l + 1).collect()),
        power_db: audit.powers.iter().map(|&p| db(p)).collect(),
        power_mw: audit.powers.clone(),
        power_set_db: power_set.map(|ps| ps.db_labels().to_vec()),
        nominal_revenue: audit.report.nominal_revenue,
        verified_revenue: Some(audit.report.verified_revenue),
    }
}

fn wplan_audit(inst: &Instance, res: &WplanResult) -> Audit {
    let powers: Vec<f64> = res.assignment.power_level.iter().map(|&l| res.power_set.value(l)).collect();
    let report = verify_powers(inst, &res.assignment.server, &powers);
    Audit {
        server: res.assignment.server.clone(),
        power_level: Some(res.assignment.power_level.clone()),
        powers,
        report,
    }
}

fn outcome_table(kind: FormulationKind, out: &SolveOutcome) -> Table {
    let audit = out.audit.as_ref().expect("audited");
    let mut t = Table::new(["formulation", "status", "nominal", "verified", "errors", "UB", "gap%", "nodes", "secs"]);
    t.push(vec![
        kind.to_string(),
        format!("{:?}", out.status),
        audit.report.nominal_revenue.to_string(),
        audit.report.verified_revenue.to_string(),
        audit.report.error_count().to_string(),
        opt_num(Some(out.best_bound), 2),
        opt_num(out.gap_pct, 2),
        out.nodes.to_string(),
        format!("{:.2}", out.wall_secs),
    ]);
    t
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let inst = input(read_instance(&a.instance))?;
    let formulation = parse_formulation(&a.formulation)?;
    let limit = time_limit(a.time_limit)?;
    let (audit, text, json, power_set, name) = match formulation {
        Formulation::Wplan => {
            if a.levels.is_some() {
                return input_err("formulation pi takes --schedule, not --levels".into());
            }
            let Some(spec) = a.schedule.as_deref() else {
                return input_err("formulation pi requires --schedule (e.g. 2,4,6,22)".into());
            };
            let schedule = input(Schedule::parse(inst.p_min_db, inst.p_max_db, spec))?;
            let res = wplan::run(&inst, &schedule, &WplanConfig { time_limit: limit, ..Default::default() });
            let audit = wplan_audit(&inst, &res);
            let json = serde_json::to_string_pretty(&res.iterations)?;
            (audit, res.render(a.table), json, Some(res.power_set), "pi".to_string())
        }
        Formulation::Single(kind) => {
            if a.schedule.is_some() {
                return input_err(format!("formulation {kind} takes --levels, not --schedule"));
            }
            let ps = levels_set(&inst, a.levels)?;
            let (_, out) = solve_formulation(kind, &inst, &ps, limit);
            for line in &out.progress {
                info!("{line}");
            }
            let text = outcome_table(kind, &out).render(a.table);
            let json = serde_json::to_string_pretty(&out)?;
            let ps = (kind != FormulationKind::Bm).then_some(ps);
            (out.audit.expect("audited"), text, json, ps, kind.to_string())
        }
    };
    print!("{text}");
    if let Some(path) = &a.out {
        write_solution(&solution_file(&name, &audit, power_set.as_ref()), path)?;
        let table_path = sibling(path, &format!("table.{}", table_ext(a.table)));
        std::fs::write(&table_path, &text).with_context(|| table_path.display().to_string())?;
        let json_path = sibling(path, "outcome.json");
        std::fs::write(&json_path, json).with_context(|| json_path.display().to_string())?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let inst = input(read_instance(&a.instance))?;
    let sol = input(read_solution(&a.solution))?;
    let server = input(sol.servers())?;
    if server.len() != inst.n_testpoints || sol.power_mw.len() != inst.n_transmitters {
        return input_err(format!(
            "solution has {} testpoints and {} transmitters, instance has {} and {}",
            server.len(),
            sol.power_mw.len(),
            inst.n_testpoints,
            inst.n_transmitters
        ));
    }
    if let Some(b) = server.iter().flatten().find(|&&b| b >= inst.n_transmitters) {
        return input_err(format!("server index {b} out of range"));
    }
    let report = verify_powers(&inst, &server, &sol.power_mw);
    println!("nominal  {} ({} testpoints)", report.nominal_revenue, report.nominal_covered.len());
    println!("verified {} ({} testpoints)", report.verified_revenue, report.verified_covered.len());
    println!("errors   {} {:?}", report.error_count(), report.errors);
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

struct Column {
    name: &'static str,
    audit: Audit,
    ub: Option<f64>,
    gap: Option<f64>,
    secs: f64,
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let inst = match &a.instance {
        Some(p) => input(read_instance(p))?,
        None => input(a.gen.instance())?,
    };
    let limit = time_limit(Some(a.time_limit))?;
    let schedule = input(Schedule::parse(inst.p_min_db, inst.p_max_db, &a.schedule))?;
    let ps = match a.levels {
        Some(n) => levels_set(&inst, Some(n))?,
        None => schedule.last().clone(),
    };

    let mut cols = Vec::new();
    for (name, kind) in [("BM", FormulationKind::Bm), ("DM", FormulationKind::Dm), ("DM&GCI1", FormulationKind::DmGci1)] {
        let (_, out) = solve_formulation(kind, &inst, &ps, limit);
        cols.push(Column {
            name,
            ub: Some(out.best_bound),
            gap: out.gap_pct,
            secs: out.wall_secs,
            audit: out.audit.expect("audited"),
        });
    }
    let res = wplan::run(&inst, &schedule, &WplanConfig { time_limit: limit, ..Default::default() });
    let last = res.iterations.last().expect("nonempty schedule");
    cols.push(Column {
        name: "WPLAN",
        audit: wplan_audit(&inst, &res),
        ub: Some(last.best_bound),
        gap: last.gap_pct,
        secs: res.wall_secs,
    });

    let mut t = Table::new(std::iter::once("").chain(cols.iter().map(|c| c.name)));
    let mut row = |label: &str, f: &dyn Fn(&Column) -> String| {
        t.push(std::iter::once(label.to_string()).chain(cols.iter().map(f)).collect());
    };
    row("|T*| verified", &|c| c.audit.report.verified_revenue.to_string());
    row("|T*| nominal", &|c| c.audit.report.nominal_revenue.to_string());
    row("errors", &|c| c.audit.report.error_count().to_string());
    row("UB", &|c| opt_num(c.ub, 2));
    row("gap%", &|c| opt_num(c.gap, 2));
    row("secs", &|c| format!("{:.2}", c.secs));
    let text = t.render(a.table);
    print!("{text}");
    if a.table == TableFormat::Text {
        println!("|L| = {} for DM and DM&GCI1, WPLAN schedule {:?}, |L*| = {}", ps.len(), schedule.sizes(), res.best_levels);
    }
    if let Some(path) = &a.out {
        std::fs::write(path, &text).with_context(|| path.display().to_string())?;
    }
    Ok(())
}
