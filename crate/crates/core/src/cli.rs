//! Batch front end: experiment orchestration, CSV reports and the command-line parser.
//!
//! Exit codes: 0 success, 2 a constraint check failed, 3 a budget was exceeded, 4 bad input.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_traits::Zero;

use crate::audit::{
    check_ic_exact_with, welfare_benchmarks_with, AuditReport, Constraint, IcConfig, WelfareBenchmarks,
    DEFAULT_IC_BUDGET,
};
use crate::error::{Error, Result};
use crate::gmdp::{plan_with, PlanConfig, Policy, DEFAULT_STATE_CAP};
use crate::instance::{generate, parse_instance, Family, GenParams, Instance};
use crate::mechanism::{MechanismFactory, MechanismKind};
use crate::rational::{fmt_decimal, fmt_rat, parse_rat, to_f64, Rat};
use crate::sim::{audit_episodes, estimate_welfare, run_episode, welfare_gap_against, WelfareEstimate};
use crate::tree::export_policy_tree;

/// Fractional digits of every decimal column.
pub const DECIMAL_DIGITS: usize = 9;

/// Where an experiment's instance comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSource {
    File(PathBuf),
    Generated { family: Family, params: GenParams },
}

impl InstanceSource {
    /// Short id used in result rows; never contains a comma.
    pub fn id(&self) -> String {
        match self {
            InstanceSource::File(p) => p.display().to_string().replace(',', "_"),
            InstanceSource::Generated { family, params } => {
                let mut s = format!("{family} k={} h={}", params.k, params.h);
                if let Some(e) = &params.eps {
                    s.push_str(&format!(" eps={}", fmt_rat(e)));
                }
                s
            }
        }
    }

    pub fn load(&self) -> Result<Instance> {
        match self {
            InstanceSource::File(p) => read_instance(p),
            InstanceSource::Generated { family, params } => generate(*family, params),
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::BadInput(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text)
}

/// Which exact checks to run on each mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckKind {
    Eair,
    Epir,
    /// Full-enumeration incentive check for agents who know their position.
    Ic,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Eair => "eair",
            CheckKind::Epir => "epir",
            CheckKind::Ic => "ic",
        })
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eair" => Ok(CheckKind::Eair),
            "epir" => Ok(CheckKind::Epir),
            "ic" => Ok(CheckKind::Ic),
            other => Err(Error::BadInput(format!("unknown check {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub instances: Vec<InstanceSource>,
    pub mechanisms: Vec<MechanismKind>,
    /// Replaces the computed phase length of the incentive-compatible mechanisms.
    pub phase_length: Option<u64>,
    pub horizons: Vec<usize>,
    /// Monte Carlo episodes per (mechanism, n); 0 skips simulation.
    pub runs: u64,
    pub seed: u64,
    pub checks: Vec<CheckKind>,
    /// Episodes audited per (mechanism, n) by the individual-rationality checks.
    pub audit_episodes: u64,
    pub budget_states: usize,
    pub ic_budget: u64,
    /// Results CSV, written by [`run`] when set.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instances: Vec::new(),
            mechanisms: Vec::new(),
            phase_length: None,
            horizons: Vec::new(),
            runs: 0,
            seed: 0,
            checks: Vec::new(),
            audit_episodes: 0,
            budget_states: DEFAULT_STATE_CAP,
            ic_budget: DEFAULT_IC_BUDGET,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() {
            return Err(Error::BadInput("no instances".into()));
        }
        for src in &self.instances {
            if let InstanceSource::File(p) = src {
                if !p.is_file() {
                    return Err(Error::BadInput(format!("{} does not exist", p.display())));
                }
            }
        }
        if !self.mechanisms.is_empty() {
            if self.horizons.is_empty() {
                return Err(Error::BadInput("mechanisms need at least one horizon".into()));
            }
            if self.horizons.contains(&0) {
                return Err(Error::BadInput("horizons must be positive".into()));
            }
            let audits = self.checks.iter().any(|c| *c != CheckKind::Ic);
            if audits && self.audit_episodes == 0 {
                return Err(Error::BadInput("individual-rationality checks need audit episodes".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of the checks run on one (mechanism, n).
#[derive(Clone, Debug, PartialEq)]
pub struct AuditVerdict {
    pub checks: Vec<CheckKind>,
    pub evaluated: u64,
    pub violations: u64,
    pub worst_margin: Option<Rat>,
}

impl AuditVerdict {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn absorb(&mut self, report: &AuditReport) {
        self.evaluated += report.evaluated();
        self.violations += report.violations();
        if let Some(m) = report.worst_margin() {
            if self.worst_margin.as_ref().is_none_or(|w| m < w) {
                self.worst_margin = Some(m.clone());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultsRow {
    pub instance: String,
    pub k: usize,
    pub h: u32,
    /// `None` on the benchmark row of an instance.
    pub mechanism: Option<MechanismKind>,
    pub n: Option<usize>,
    pub estimate: Option<WelfareEstimate>,
    pub benchmarks: WelfareBenchmarks,
    pub chain_holds: bool,
    pub audit: Option<AuditVerdict>,
}

impl ResultsRow {
    /// `opt / opt_eair`, `opt_eair / opt_epir` and `opt_epir / opt_del`; `None` on a zero
    /// denominator.
    pub fn ratios(&self) -> [Option<Rat>; 3] {
        let b = &self.benchmarks;
        let div = |a: &Rat, d: &Rat| (!d.is_zero()).then(|| a / d);
        [div(&b.opt, &b.opt_eair), div(&b.opt_eair, &b.opt_epir), div(&b.opt_epir, &b.opt_del)]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultsRow>,
}

impl ResultsTable {
    /// False when any audited row has a violation.
    pub fn audits_passed(&self) -> bool {
        self.rows.iter().filter_map(|r| r.audit.as_ref()).all(AuditVerdict::passed)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "instance,K,H,mech,n,runs,seed,mean,std_error,mean_n1,mean_n2,opt,opt_dec,opt_eair,opt_eair_dec,\
             opt_epir,opt_epir_dec,opt_del,opt_del_dec,ratio_opt_eair,ratio_eair_epir,ratio_epir_del,chain,\
             audit,evaluated,worst_margin"
        )?;
        for row in &self.rows {
            let mut cells: Vec<String> = vec![row.instance.clone(), row.k.to_string(), row.h.to_string()];
            cells.push(row.mechanism.map(|m| m.to_string()).unwrap_or_default());
            cells.push(row.n.map(|n| n.to_string()).unwrap_or_default());
            match &row.estimate {
                Some(e) => cells.extend([
                    e.runs.to_string(),
                    e.seed.to_string(),
                    fmt_float(e.mean),
                    fmt_float(e.std_error),
                    fmt_float(e.mean_n1),
                    fmt_float(e.mean_n2),
                ]),
                None => cells.extend(std::iter::repeat_n(String::new(), 6)),
            }
            let b = &row.benchmarks;
            for v in [&b.opt, &b.opt_eair, &b.opt_epir, &b.opt_del] {
                cells.push(fmt_rat(v));
                cells.push(fmt_decimal(v, DECIMAL_DIGITS));
            }
            for r in row.ratios() {
                cells.push(r.map(|r| fmt_decimal(&r, DECIMAL_DIGITS)).unwrap_or_default());
            }
            cells.push(row.chain_holds.to_string());
            match &row.audit {
                Some(a) => cells.extend([
                    if a.passed() { "pass" } else { "fail" }.to_string(),
                    a.evaluated.to_string(),
                    a.worst_margin.as_ref().map(fmt_rat).unwrap_or_default(),
                ]),
                None => cells.extend(std::iter::repeat_n(String::new(), 3)),
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.prec$}", prec = DECIMAL_DIGITS)
}

/// Plans, simulates and audits everything in `config`, one benchmark row per instance
/// followed by one row per (mechanism, n). Writes `config.out` when set.
pub fn run(config: &ExperimentConfig) -> Result<ResultsTable> {
    config.validate()?;
    let mut table = ResultsTable::default();
    for src in &config.instances {
        let inst = src.load()?;
        let policy = plan_with(&inst, &PlanConfig { max_states: config.budget_states })?;
        let benchmarks = welfare_benchmarks_with(&inst, &policy);
        let base = ResultsRow {
            instance: src.id(),
            k: inst.k(),
            h: inst.h(),
            mechanism: None,
            n: None,
            estimate: None,
            chain_holds: benchmarks.chain_holds(&inst),
            benchmarks,
            audit: None,
        };
        table.rows.push(base.clone());
        for &kind in &config.mechanisms {
            let factory = factory_for(&inst, kind, &policy, config.phase_length)?;
            for &n in &config.horizons {
                let estimate = match config.runs {
                    0 => None,
                    runs => Some(estimate_welfare(&factory, n, runs, config.seed)?),
                };
                let audit = if config.checks.is_empty() {
                    None
                } else {
                    Some(audit_row(&factory, n, config)?)
                };
                table.rows.push(ResultsRow { mechanism: Some(kind), n: Some(n), estimate, audit, ..base.clone() });
            }
        }
    }
    if let Some(path) = &config.out {
        report_csv(&table, path)?;
    }
    Ok(table)
}

fn factory_for<'a>(
    inst: &'a Instance,
    kind: MechanismKind,
    policy: &Policy,
    phase_length: Option<u64>,
) -> Result<MechanismFactory<'a>> {
    let policy = kind.needs_policy().then(|| policy.clone());
    let f = MechanismFactory::with_policy(inst, kind, policy)?;
    match phase_length {
        Some(b) if kind.needs_margin() => f.phase_length_override(b),
        _ => Ok(f),
    }
}

fn audit_row(factory: &MechanismFactory<'_>, n: usize, config: &ExperimentConfig) -> Result<AuditVerdict> {
    let mut verdict = AuditVerdict { checks: config.checks.clone(), evaluated: 0, violations: 0, worst_margin: None };
    let ir: Vec<Constraint> = config
        .checks
        .iter()
        .filter_map(|c| match c {
            CheckKind::Eair => Some(Constraint::Eair),
            CheckKind::Epir => Some(Constraint::Epir),
            CheckKind::Ic => None,
        })
        .collect();
    if !ir.is_empty() {
        verdict.absorb(&audit_episodes(factory, n, config.audit_episodes, config.seed, &ir)?);
    }
    if config.checks.contains(&CheckKind::Ic) {
        verdict.absorb(&check_ic_exact_with(factory, &IcConfig { n, budget: config.ic_budget })?);
    }
    Ok(verdict)
}

/// Writes the table as CSV with a stable column order.
pub fn report_csv(table: &ResultsTable, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

// ---------------------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "fiduciary", version, about = "Plan, simulate and audit fiduciary exploration mechanisms")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cap on planner states.
    #[arg(long, global = true, default_value_t = DEFAULT_STATE_CAP)]
    budget_states: usize,
    /// Output file (default: stdout).
    #[arg(long, short = 'o', global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a named instance construction as JSON.
    Gen(GenArgs),
    /// Plan the optimal exploration policy and print its value table as CSV.
    Plan(InstArg),
    /// Export the planned policy as an indented tree.
    Tree(TreeArgs),
    /// Estimate average welfare by Monte Carlo.
    Simulate(SimulateArgs),
    /// Check individual rationality on every recommendation of seeded episodes.
    Audit(AuditArgs),
    /// Exact welfare benchmarks and their ratios, optionally with mechanism runs.
    Ratios(RatiosArgs),
    /// Exact incentive-compatibility check by full enumeration.
    IcCheck(IcArgs),
}

#[derive(Debug, Args)]
struct InstArg {
    /// Instance JSON file.
    #[arg(long)]
    inst: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// prop5, prop6, prop7, prop9_uniform, uniform, random or random(<seed>).
    #[arg(long)]
    family: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    h: u32,
    /// Construction slack as p/q or decimal.
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[command(flatten)]
    inst: InstArg,
    /// Only the subtree below this default-arm reward.
    #[arg(long)]
    branch: Option<u32>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    inst: InstArg,
    #[arg(long, value_delimiter = ',', default_value = "fee")]
    mech: Vec<MechanismKind>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    /// Phase length override for icfee and icepfee.
    #[arg(long)]
    phase_length: Option<u64>,
    /// Also write the first episode's per-round trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    inst: InstArg,
    #[arg(long, default_value = "fee")]
    mech: MechanismKind,
    #[arg(long, default_value_t = 1000)]
    episodes: u64,
    /// Agents per episode.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "eair")]
    check: Vec<String>,
    #[arg(long)]
    phase_length: Option<u64>,
}

#[derive(Debug, Args)]
struct RatiosArgs {
    /// Instance files.
    #[arg(long)]
    inst: Vec<PathBuf>,
    /// Generate instances of this family instead (combined with every --k).
    #[arg(long)]
    family: Option<String>,
    /// Arm counts, as a list (`2,3`) or a range (`2..8`).
    #[arg(long, default_value = "")]
    k: String,
    #[arg(long)]
    h: Option<u32>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long, value_delimiter = ',')]
    mech: Vec<MechanismKind>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    runs: u64,
    #[arg(long, value_delimiter = ',')]
    check: Vec<String>,
    #[arg(long, default_value_t = 0)]
    episodes: u64,
    #[arg(long)]
    phase_length: Option<u64>,
}

#[derive(Debug, Args)]
struct IcArgs {
    #[command(flatten)]
    inst: InstArg,
    #[arg(long, default_value = "icfee")]
    mech: MechanismKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    phase_length: Option<u64>,
    /// Cap on enumerated nodes.
    #[arg(long, default_value_t = DEFAULT_IC_BUDGET)]
    budget_nodes: u64,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
/// Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // a pool already installed by an earlier call in this process is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn parse_checks(raw: &[String]) -> Result<Vec<CheckKind>> {
    let mut v = raw.iter().filter(|s| !s.trim().is_empty()).map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
    v.sort();
    v.dedup();
    Ok(v)
}

fn parse_family(raw: &str, seed: u64) -> Result<Family> {
    // a bare "random" draws from the master seed
    if raw.trim() == "random" {
        Ok(Family::Random(seed))
    } else {
        raw.parse()
    }
}

fn parse_k_list(raw: &str) -> Result<Vec<usize>> {
    let bad = || Error::BadInput(format!("bad K list {raw:?}"));
    if let Some((a, b)) = raw.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    raw.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let plan_cfg = PlanConfig { max_states: cli.budget_states };
    match &cli.command {
        Command::Gen(a) => {
            let eps = a.eps.as_deref().map(parse_rat).transpose()?;
            let inst = generate(parse_family(&a.family, cli.seed)?, &GenParams { k: a.k, h: a.h, eps })?;
            let mut json = inst.to_json();
            json.push('\n');
            emit(&cli.out, json.as_bytes())?;
            Ok(0)
        }
        Command::Plan(a) => {
            let inst = read_instance(&a.inst)?;
            let policy = plan_with(&inst, &plan_cfg)?;
            let mut buf = Vec::new();
            write_policy_csv(&inst, &policy, &mut buf)?;
            emit(&cli.out, &buf)?;
            eprintln!(
                "W = {} ({}) over {} states",
                fmt_rat(policy.initial_value()),
                fmt_decimal(policy.initial_value(), DECIMAL_DIGITS),
                policy.len()
            );
            Ok(0)
        }
        Command::Tree(a) => {
            let inst = read_instance(&a.inst.inst)?;
            let policy = plan_with(&inst, &plan_cfg)?;
            emit(&cli.out, export_policy_tree(&inst, &policy, a.branch)?.as_bytes())?;
            Ok(0)
        }
        Command::Simulate(a) => {
            let inst = read_instance(&a.inst.inst)?;
            let policy = plan_with(&inst, &plan_cfg)?;
            let opt = inst.expected_max(inst.all_arms_mask(), 0);
            let opt_eair = policy.initial_value().clone();
            let mut buf = Vec::new();
            writeln!(buf, "mech,n,runs,seed,mean,std_error,mean_n1,mean_n2,opt,opt_eair,gap")?;
            for (mi, &kind) in a.mech.iter().enumerate() {
                let factory = factory_for(&inst, kind, &policy, a.phase_length)?;
                for &n in &a.n {
                    let e = estimate_welfare(&factory, n, a.runs, cli.seed)?;
                    writeln!(
                        buf,
                        "{kind},{n},{},{},{},{},{},{},{},{},{}",
                        e.runs,
                        e.seed,
                        fmt_float(e.mean),
                        fmt_float(e.std_error),
                        fmt_float(e.mean_n1),
                        fmt_float(e.mean_n2),
                        fmt_decimal(&opt, DECIMAL_DIGITS),
                        fmt_decimal(&opt_eair, DECIMAL_DIGITS),
                        fmt_float(welfare_gap_against(&opt_eair, &e)),
                    )?;
                }
                if let (Some(path), 0) = (&a.trace, mi) {
                    let n = *a.n.last().expect("clap requires --n");
                    let trace = run_episode(&factory, n, cli.seed)?;
                    let mut t = Vec::new();
                    trace.write_csv(&mut t)?;
                    fs::write(path, t)?;
                }
            }
            emit(&cli.out, &buf)?;
            Ok(0)
        }
        Command::Audit(a) => {
            let inst = read_instance(&a.inst.inst)?;
            let policy = plan_with(&inst, &plan_cfg)?;
            let factory = factory_for(&inst, a.mech, &policy, a.phase_length)?;
            let constraints: Vec<Constraint> = parse_checks(&a.check)?
                .into_iter()
                .map(|c| match c {
                    CheckKind::Eair => Ok(Constraint::Eair),
                    CheckKind::Epir => Ok(Constraint::Epir),
                    CheckKind::Ic => Err(Error::BadInput("use ic-check for incentive compatibility".into())),
                })
                .collect::<Result<_>>()?;
            let report = audit_episodes(&factory, a.n, a.episodes, cli.seed, &constraints)?;
            finish_report(&cli.out, &report)
        }
        Command::Ratios(a) => {
            let mut instances: Vec<InstanceSource> = a.inst.iter().cloned().map(InstanceSource::File).collect();
            if let Some(f) = &a.family {
                let family = parse_family(f, cli.seed)?;
                let h = a.h.ok_or_else(|| Error::BadInput("--family needs --h".into()))?;
                let eps = a.eps.as_deref().map(parse_rat).transpose()?;
                for k in parse_k_list(&a.k)? {
                    instances.push(InstanceSource::Generated { family, params: GenParams { k, h, eps: eps.clone() } });
                }
            }
            let config = ExperimentConfig {
                instances,
                mechanisms: a.mech.clone(),
                phase_length: a.phase_length,
                horizons: a.n.clone(),
                runs: a.runs,
                seed: cli.seed,
                checks: parse_checks(&a.check)?,
                audit_episodes: a.episodes,
                budget_states: cli.budget_states,
                ic_budget: DEFAULT_IC_BUDGET,
                out: None,
            };
            let table = run(&config)?;
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            emit(&cli.out, &buf)?;
            Ok(if table.audits_passed() { 0 } else { 2 })
        }
        Command::IcCheck(a) => {
            let inst = read_instance(&a.inst.inst)?;
            let policy = plan_with(&inst, &plan_cfg)?;
            let factory = factory_for(&inst, a.mech, &policy, a.phase_length)?;
            if let Some(b) = factory.phase_length() {
                eprintln!("phase length B = {b}");
            }
            let report = check_ic_exact_with(&factory, &IcConfig { n: a.n, budget: a.budget_nodes })?;
            finish_report(&cli.out, &report)
        }
    }
}

fn finish_report(out: &Option<PathBuf>, report: &AuditReport) -> Result<i32> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    emit(out, &buf)?;
    let worst = report.worst_margin().map(|m| format!("{} ({})", fmt_rat(m), to_f64(m))).unwrap_or("-".into());
    eprintln!("{} checks, {} violations, worst margin {worst}", report.evaluated(), report.violations());
    Ok(if report.passed() { 0 } else { 2 })
}

/// `U,alpha,beta,action,p_first,W,W_dec`, one row per reachable state in state order.
pub fn write_policy_csv(inst: &Instance, policy: &Policy, mut out: impl Write) -> Result<()> {
    let k = inst.k();
    writeln!(out, "U,alpha,beta,action,p_first,W,W_dec")?;
    let mut states = policy.states();
    states.extend(policy.terminal_states());
    states.sort();
    for s in states {
        let (alpha, beta) = match (s.alpha, s.beta) {
            (Some(a), Some(b)) => (a.to_string(), b.to_string()),
            _ => ("-".into(), "-".into()),
        };
        let (action, p, w) = match policy.decision(&s) {
            Some(d) => (d.pair.to_string(), fmt_rat(&d.portfolio.prob(d.pair.i)), d.value.clone()),
            None => (
                "terminal".to_string(),
                String::new(),
                policy.terminal_value(&s).cloned().expect("listed terminal state"),
            ),
        };
        writeln!(out, "{},{alpha},{beta},{action},{p},{},{}", s.bits(k), fmt_rat(&w), fmt_decimal(&w, DECIMAL_DIGITS))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn random_source() -> InstanceSource {
        InstanceSource::Generated {
            family: Family::Random(0),
            params: GenParams { k: 2, h: 1, eps: None },
        }
    }

    fn toy_file(dir: &Path) -> PathBuf {
        let p = dir.join("toy.json");
        fs::write(
            &p,
            r#"{"version":1,"H":1,"arms":[{"name":"a1","weights":[2,3]},{"name":"a2","weights":[1,1]}]}"#,
        )
        .unwrap();
        p
    }

    #[test]
    fn benchmark_row_for_toy() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { instances: vec![InstanceSource::File(toy_file(dir.path()))], ..Default::default() };
        let table = run(&cfg).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.benchmarks.opt, ratio(4, 5));
        assert_eq!(row.benchmarks.opt_eair, ratio(4, 5));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.contains(",4/5,0.800000000,4/5,0.800000000,"), "{line}");
        assert!(line.contains(",1.000000000,1.000000000,1.000000000,true,"), "{line}");
    }

    #[test]
    fn run_is_deterministic_and_audits() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |name: &str| ExperimentConfig {
            instances: vec![random_source(), InstanceSource::File(toy_file(dir.path()))],
            mechanisms: vec![MechanismKind::Fee, MechanismKind::Mepir],
            horizons: vec![5, 20],
            runs: 200,
            seed: 9,
            checks: vec![CheckKind::Eair],
            audit_episodes: 50,
            out: Some(dir.path().join(name)),
            ..Default::default()
        };
        let a = run(&mk("a.csv")).unwrap();
        let b = run(&mk("b.csv")).unwrap();
        assert_eq!(a, b);
        assert!(a.audits_passed());
        assert_eq!(a.rows.len(), 2 * (1 + 2 * 2));
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    }

    #[test]
    fn failed_audit_is_visible() {
        let cfg = ExperimentConfig {
            instances: vec![InstanceSource::Generated {
                family: Family::Uniform,
                params: GenParams { k: 3, h: 6, eps: None },
            }],
            mechanisms: vec![MechanismKind::FullX],
            horizons: vec![4],
            checks: vec![CheckKind::Epir],
            audit_episodes: 20,
            ..Default::default()
        };
        assert!(!run(&cfg).unwrap().audits_passed());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_err());
        cfg.instances.push(InstanceSource::File("/no/such/file.json".into()));
        assert!(matches!(cfg.validate(), Err(Error::BadInput(_))));
        cfg.instances = vec![random_source()];
        cfg.mechanisms = vec![MechanismKind::Fee];
        assert!(cfg.validate().is_err());
        cfg.horizons = vec![0];
        assert!(cfg.validate().is_err());
        cfg.horizons = vec![3];
        cfg.validate().unwrap();
    }

    #[test]
    fn k_lists() {
        assert_eq!(parse_k_list("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_k_list("2,7").unwrap(), vec![2, 7]);
        assert!(parse_k_list("5..2").is_err());
        assert!(parse_k_list("x").is_err());
    }

    #[test]
    fn bad_arguments_exit_with_four() {
        assert_eq!(main_with_args(["fiduciary", "plan"]), 4);
        assert_eq!(main_with_args(["fiduciary", "plan", "--inst", "/no/such/file.json"]), 4);
        assert_eq!(main_with_args(["fiduciary", "--help"]), 0);
    }
}
