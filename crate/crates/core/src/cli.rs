//! Command-line front end.
//!
//! ```text
//! disentangle run     [SCENARIO] [--preset soft] [--strategy reactive] [--seed 0] [--out DIR]
//! disentangle compare [--preset soft] [--strategies default,reactive] [--seeds 3]
//! disentangle trace   [SCENARIO] --signals r_hip,r_knee [--legs fl,fr] [--paired]
//! disentangle sweep   [SCENARIO] --param observer.threshold --values 1,2,4 [--seeds 3]
//! ```
//!
//! `run` exits 0 when the course is completed, 2 when the robot gets stuck,
//! falls or times out, and 1 on any error. Output goes to `--out`, else to
//! `$DISENTANGLE_OUT`, else to `./out`.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::batch::{format_table, run_batch, CompareRow};
use crate::error::{Error, Result};
use crate::gait_controller::{baseline_strategy, Strategy, LEG_NAMES, STRATEGIES};
use crate::scenario::ScenarioConfig;
use crate::simulator::{run_scenario, MetricsSummary, StepLog, LEG_COLUMNS};

const GLOBAL_SIGNALS: [&str; 4] = ["body_x", "body_speed", "f_back", "power"];

#[derive(Debug, Parser)]
#[command(
    name = "disentangle",
    version,
    about = "Swing-leg entanglement detection and reaction on a simulated quadruped"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its step log and summary.
    Run(RunArgs),
    /// Run several strategies over seeded trials and tabulate them.
    Compare(CompareArgs),
    /// Write selected per-tick signals for plotting.
    Trace(TraceArgs),
    /// Vary one scenario key over a list of values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML).
    pub scenario: Option<PathBuf>,
    /// Course preset, used when no scenario file is given or to replace its course.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable the swing-start observer reset.
    #[arg(long)]
    pub no_reset: bool,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub gain: Option<f64>,
    /// Uniform obstacle placement jitter (m).
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Output directory.
    #[arg(long, env = "DISENTANGLE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Do not write the per-tick log.
    #[arg(long)]
    pub no_log: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated strategies; all five by default.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<String>,
    /// Number of trials per strategy, seeded from `--seed` upward.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated legs (fl, fr, hl, hr).
    #[arg(long, value_delimiter = ',', default_value = "fl,fr")]
    pub legs: Vec<String>,
    /// Comma-separated signals, e.g. r_hip,r_knee,mode,fx or body_speed.
    #[arg(long, value_delimiter = ',', default_value = "r_hip,r_knee")]
    pub signals: Vec<String>,
    /// Also write the same scenario with the observer reset disabled.
    #[arg(long)]
    pub paired: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Dotted scenario key, e.g. `observer.threshold` or `gait.period`.
    #[arg(long)]
    pub param: String,
    /// Comma-separated TOML values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.scenario {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::preset(self.preset.as_deref().unwrap_or("soft"), Strategy::Reactive),
        };
        if self.scenario.is_some() {
            if let Some(p) = &self.preset {
                cfg.course.preset = Some(p.clone());
                cfg.course.obstacles.clear();
            }
        }
        if let Some(s) = &self.strategy {
            cfg.strategy = baseline_strategy(s)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.no_reset {
            cfg.observer.reset = false;
        }
        if let Some(t) = self.threshold {
            cfg.observer.threshold = t;
        }
        if let Some(g) = self.gain {
            cfg.observer.gain = g;
        }
        if let Some(j) = self.jitter {
            cfg.course.jitter = j;
        }
        cfg.build()?;
        Ok(cfg)
    }

    pub fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let io = |e| Error::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let mut cfg = args.scenario.load()?;
    if args.no_log {
        cfg.output.no_log = true;
    }
    let dir = args.scenario.out_dir(&cfg);
    create_dir(&dir)?;
    let (log, summary) = run_scenario(&cfg.build()?)?;
    if !cfg.output.no_log {
        write_file(&dir.join("steps.csv"), |w| log.write_csv(w))?;
    }
    write_file(&dir.join("summary.toml"), |w| {
        w.write_all(summary.to_record().as_bytes())
    })?;
    print!("{}", summary.to_record());
    Ok(summary.exit_code())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let base = args.scenario.load()?;
    let strategies = if args.strategies.is_empty() {
        STRATEGIES.to_vec()
    } else {
        args.strategies
            .iter()
            .map(|s| baseline_strategy(s.trim()))
            .collect::<Result<_>>()?
    };
    if args.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let mut cfgs = Vec::new();
    for &s in &strategies {
        for k in 0..args.seeds {
            let mut c = base.clone();
            c.strategy = s;
            c.seed = base.seed + k;
            cfgs.push(c.build()?);
        }
    }
    let results = run_batch(&cfgs).into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<CompareRow> = strategies
        .iter()
        .zip(results.chunks(args.seeds as usize))
        .map(|(&s, runs)| CompareRow::from_runs(s, runs))
        .collect();
    let dir = args.scenario.out_dir(&base);
    create_dir(&dir)?;
    write_file(&dir.join("compare.csv"), |w| {
        writeln!(w, "{}", CompareRow::CSV_HEADER)?;
        for r in &rows {
            writeln!(w, "{}", r.to_csv())?;
        }
        Ok(())
    })?;
    print!("{}", format_table(&rows));
    if let Some(ratio) = power_ratio(&rows) {
        println!("P_f(always_retract) / P_f(reactive) = {ratio:.2}");
    }
    Ok(0)
}

/// Free-walking power of always-retract relative to the reactive strategy.
pub fn power_ratio(rows: &[CompareRow]) -> Option<f64> {
    let p = |s| rows.iter().find(|r| r.strategy == s).map(|r| r.p_f);
    Some(p(Strategy::AlwaysRetract)? / p(Strategy::Reactive)?)
}

/// A column of the step log picked out by leg and signal.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceColumn {
    pub name: String,
    pub index: usize,
}

/// Resolves legs and signal names to step-log columns.
pub fn trace_columns(legs: &[String], signals: &[String]) -> Result<Vec<TraceColumn>> {
    let header = StepLog::header();
    let mut cols = vec![TraceColumn {
        name: "time".into(),
        index: 0,
    }];
    for leg in legs {
        if !LEG_NAMES.contains(&leg.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown leg `{leg}`; valid legs: {}",
                LEG_NAMES.join(", ")
            )));
        }
    }
    for sig in signals {
        let names: Vec<String> = if GLOBAL_SIGNALS.contains(&sig.as_str()) {
            vec![sig.clone()]
        } else if LEG_COLUMNS.contains(&sig.as_str()) {
            legs.iter().map(|l| format!("{l}_{sig}")).collect()
        } else {
            return Err(Error::InvalidArgument(format!(
                "unknown signal `{sig}`; valid signals: {}, {}",
                GLOBAL_SIGNALS.join(", "),
                LEG_COLUMNS.join(", ")
            )));
        };
        for name in names {
            let index = header.iter().position(|h| *h == name).expect("signal is in the header");
            cols.push(TraceColumn { name, index });
        }
    }
    Ok(cols)
}

/// Writes the chosen columns of a full step log as CSV.
pub fn write_trace<W: Write + ?Sized>(log: &StepLog, cols: &[TraceColumn], out: &mut W) -> std::io::Result<()> {
    let full = log.to_csv_string();
    let names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
    writeln!(out, "{}", names.join(","))?;
    for line in full.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let picked: Vec<&str> = cols.iter().map(|c| fields[c.index]).collect();
        writeln!(out, "{}", picked.join(","))?;
    }
    Ok(())
}

pub fn cmd_trace(args: &TraceArgs) -> Result<i32> {
    let cols = trace_columns(&args.legs, &args.signals)?;
    let mut cfg = args.scenario.load()?;
    cfg.output.no_log = false;
    let dir = args.scenario.out_dir(&cfg);
    create_dir(&dir)?;
    let mut runs = vec![("trace.csv", cfg.clone())];
    if args.paired {
        let mut off = cfg.clone();
        off.observer.reset = false;
        runs.push(("trace_no_reset.csv", off));
    }
    for (file, c) in runs {
        let (log, summary) = run_scenario(&c.build()?)?;
        let path = dir.join(file);
        write_file(&path, |w| write_trace(&log, &cols, w))?;
        println!(
            "{}: {} rows, outcome {}",
            path.display(),
            log.rows.len(),
            summary.outcome.name()
        );
    }
    Ok(0)
}

/// Returns `cfg` with the dotted `key` set to the TOML literal `value`.
pub fn with_override(cfg: &ScenarioConfig, key: &str, value: &str) -> Result<ScenarioConfig> {
    let mut doc: toml::Table =
        toml::from_str(&cfg.emit()?).map_err(|e| Error::InvalidState(format!("scenario did not round-trip: {e}")))?;
    let parsed: toml::Table = toml::from_str(&format!("v = {value}"))
        .map_err(|e| Error::InvalidArgument(format!("`{value}` is not a TOML value: {}", e.message())))?;
    let value = parsed["v"].clone();
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = &mut doc;
    for p in parents {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("`{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    let text = toml::to_string(&doc).map_err(|e| Error::InvalidState(e.to_string()))?;
    ScenarioConfig::parse(&text)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let base = args.scenario.load()?;
    if args.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let mut labels = Vec::new();
    let mut cfgs = Vec::new();
    for v in &args.values {
        let c = with_override(&base, &args.param, v.trim())?;
        for k in 0..args.seeds {
            let mut c = c.clone();
            c.seed = base.seed + k;
            labels.push((v.trim().to_string(), c.seed));
            cfgs.push(c.build()?);
        }
    }
    let results = run_batch(&cfgs).into_iter().collect::<Result<Vec<_>>>()?;
    let dir = args.scenario.out_dir(&base);
    create_dir(&dir)?;
    let header = format!("{},seed,{}", args.param, SWEEP_COLUMNS.join(","));
    let lines: Vec<String> = labels
        .iter()
        .zip(&results)
        .map(|((v, seed), m)| format!("{},{seed},{}", csv_field(v), sweep_fields(m)))
        .collect();
    write_file(&dir.join("sweep.csv"), |w| {
        writeln!(w, "{header}")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    println!("{header}");
    for l in &lines {
        println!("{l}");
    }
    Ok(0)
}

const SWEEP_COLUMNS: [&str; 10] = [
    "outcome",
    "obstacles_cleared",
    "p_f",
    "p_o",
    "v_f",
    "v_o",
    "distance",
    "retract_entries",
    "threshold_crossings",
    "trigger_latency",
];

fn sweep_fields(m: &MetricsSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        m.outcome.name(),
        m.obstacles_cleared,
        m.p_f,
        m.p_o,
        m.v_f,
        m.v_o,
        m.distance,
        m.retract_entries,
        m.threshold_crossings,
        m.trigger_latency().map_or_else(String::new, |v| v.to_string())
    )
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}
