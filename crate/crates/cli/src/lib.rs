//! Command-line pipeline: load a chain, interval map or graph map, run one
//! analysis and write a JSON report plus CSV plot data into an output directory.
//!
//! Output bytes depend only on the [`RunConfig`]; floats are rounded to 12
//! significant digits before printing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fairmeasure::backward::{equidistribution_test, path_statistics, running_geo_means, sample_paths, transition_chi_squared};
use fairmeasure::builtins;
use fairmeasure::chain::spec::{ChainSpec, SpecError};
use fairmeasure::fair::{
    check_fair_on_cylinders, fair_entropy, fair_measure_verdict, find_atomic_fair_measures, integral_log_c,
    verify_stationary, verify_stationary_exact, ClosedForm, FairVerdict, SolverOptions, StationaryVector,
};
use fairmeasure::graph::{cut_and_paste, graph_by_name, refined_transition_matrix};
use fairmeasure::interval::{check_lebesgue_fair, lebesgue_fair_model, map_by_name, rohlin_entropy, transition_matrix, MAP_NAMES};
use fairmeasure::recurrence::RecurrencePolicy;
use fairmeasure::{
    classify, BackwardKernel, ChainError, FairError, FairMeasure, GraphError, IntervalError, MarkovIntervalMap,
    RecurrenceClass, StateId, TameGraphMapSpec, TransitionRuleSet,
};
use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Exit codes of [`run`].
pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC_ERROR: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("chain spec: {0}")]
    ChainSpec(#[from] SpecError),
    #[error("interval map: {0}")]
    Interval(#[from] IntervalError),
    #[error("graph map: {0}")]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Fair(#[from] FairError),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Parser)]
#[command(name = "fairmeasure", version, about = "Fair measures of countable Markov shifts, interval maps and graph maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Stationary vector, fair measure, entropies and atoms of a chain.
    Analyze(Options),
    /// Recurrence class of the backward kernel with its evidence.
    Classify(Options),
    /// Random backward trajectories and their statistics.
    Simulate(Options),
    /// Lebesgue fair model of a Markov interval map.
    Fairmodel(Options),
    /// Refined chain and cut-and-paste interval map of a graph map.
    Graph(Options),
    /// Checks stationarity, fairness and the entropy identity; exit 3 on failure.
    Verify(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Builtin chain, interval map or graph map, e.g. `origin-broadcast`, `full-shift:3`, `dendrite:8`.
    #[arg(long, conflicts_with_all = ["chain", "map", "graph"])]
    pub builtin: Option<String>,
    /// Chain spec JSON file.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Interval map spec JSON file.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Graph map spec JSON file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Window radius for reported states, series and checks.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(i64).range(1..))]
    pub window: i64,
    /// Stationary solver tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Largest solver window radius.
    #[arg(long, default_value_t = 1 << 14, value_parser = clap::value_parser!(i64).range(1..))]
    pub max_window: i64,
    /// Cylinder depth for fairness checks and word statistics.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
    /// Monte Carlo return trials.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Largest return horizon; H/100 and H/10 are also read off.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    /// Terms of the return series.
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    pub nmax: u64,
    /// Backward path length.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub length: u64,
    /// Number of backward paths.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub paths: u64,
    /// Start state of backward paths; defaults to the chain's origin.
    #[arg(long)]
    pub start: Option<i64>,
    /// Longest period searched for atomic fair measures.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_period: u64,
    /// Arc window of a graph map with infinitely many arcs in view.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub arc_window: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Classify,
    Simulate,
    Fairmodel,
    Graph,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Input {
    Builtin(String),
    Chain(PathBuf),
    Map(PathBuf),
    Graph(PathBuf),
}

/// Everything a run depends on. All numeric fields are positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Input,
    /// Not part of the reports, so outputs do not depend on where they go.
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    pub window: i64,
    pub tolerance: f64,
    pub max_window: i64,
    pub depth: usize,
    pub trials: u64,
    pub horizon: u64,
    pub n_max: usize,
    pub length: usize,
    pub paths: usize,
    pub start: Option<i64>,
    pub max_period: usize,
    pub arc_window: Option<usize>,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let (command, o) = match cli.command {
            CliCommand::Analyze(o) => (Command::Analyze, o),
            CliCommand::Classify(o) => (Command::Classify, o),
            CliCommand::Simulate(o) => (Command::Simulate, o),
            CliCommand::Fairmodel(o) => (Command::Fairmodel, o),
            CliCommand::Graph(o) => (Command::Graph, o),
            CliCommand::Verify(o) => (Command::Verify, o),
        };
        let files = [o.chain.clone().map(Input::Chain), o.map.clone().map(Input::Map), o.graph.clone().map(Input::Graph)];
        let mut given: Vec<Input> = files.into_iter().flatten().collect();
        if let Some(b) = &o.builtin {
            given.push(Input::Builtin(b.clone()));
        }
        if given.len() != 1 {
            return Err(CliError::Input("give exactly one of --builtin, --chain, --map, --graph".into()));
        }
        let input = given.pop().expect("one input");
        let accepted = match (command, &input) {
            (_, Input::Builtin(_)) => true,
            (Command::Fairmodel, i) => matches!(i, Input::Map(_)),
            (Command::Graph, i) => matches!(i, Input::Graph(_)),
            (_, i) => matches!(i, Input::Chain(_)),
        };
        if !accepted {
            return Err(CliError::Input(format!("{command:?} does not accept this input kind")));
        }
        let config = RunConfig {
            command,
            input,
            out: o.out,
            seed: o.seed,
            window: o.window,
            tolerance: o.tolerance,
            max_window: o.max_window,
            depth: o.depth as usize,
            trials: o.trials,
            horizon: o.horizon,
            n_max: o.nmax as usize,
            length: o.length as usize,
            paths: o.paths as usize,
            start: o.start,
            max_period: o.max_period as usize,
            arc_window: o.arc_window.map(|w| w as usize),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            self.window > 0,
            self.tolerance > 0.0 && self.tolerance.is_finite(),
            self.max_window > 0,
            self.depth > 0,
            self.trials > 0,
            self.horizon > 0,
            self.n_max > 0,
            self.length > 0,
            self.paths > 0,
            self.max_period > 0,
            self.arc_window != Some(0),
        ];
        if positive.iter().all(|ok| *ok) {
            Ok(())
        } else {
            Err(CliError::Input("numeric parameters must be positive".into()))
        }
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions { tolerance: self.tolerance, max_window: self.max_window, ..SolverOptions::default() }
    }

    fn policy(&self, origin: StateId) -> RecurrencePolicy {
        let mut horizons: Vec<u64> = [self.horizon / 100, self.horizon / 10, self.horizon].into_iter().filter(|h| *h > 0).collect();
        horizons.dedup();
        RecurrencePolicy {
            origin,
            horizons,
            trials: self.trials,
            seed: self.seed,
            n_max: self.n_max,
            // Series paths of length n_max must stay inside the window.
            window: self.window.max(4 * self.n_max as i64),
            solver: self.solver(),
            ..RecurrencePolicy::default()
        }
    }
}

/// Exit code and the files written, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub files: Vec<String>,
}

struct Chain {
    rules: TransitionRuleSet,
    closed_form: Option<ClosedForm>,
    origin: StateId,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_chain(input: &Input) -> Result<Chain, CliError> {
    match input {
        Input::Builtin(name) => {
            let b = builtins::by_name(name)?;
            Ok(Chain { rules: b.rules, closed_form: b.closed_form, origin: b.origin })
        }
        Input::Chain(path) => {
            let rules = ChainSpec::from_json(&read(path)?)?.build()?;
            let origin = rules.domain().first();
            Ok(Chain { rules, closed_form: None, origin })
        }
        _ => Err(CliError::Input("expected a chain".into())),
    }
}

fn load_map(input: &Input) -> Result<(MarkovIntervalMap, Option<ClosedForm>), CliError> {
    match input {
        Input::Builtin(name) => {
            let map = map_by_name(name)?;
            let chain = MAP_NAMES.iter().find(|(m, _)| *m == name).map(|(_, c)| *c);
            let closed_form = chain.map(builtins::by_name).transpose()?.and_then(|b| b.closed_form);
            Ok((map, closed_form))
        }
        Input::Map(path) => Ok((MarkovIntervalMap::from_json(&read(path)?)?, None)),
        _ => Err(CliError::Input("expected an interval map".into())),
    }
}

fn load_graph(input: &Input) -> Result<TameGraphMapSpec, CliError> {
    match input {
        Input::Builtin(name) => Ok(graph_by_name(name)?),
        Input::Graph(path) => Ok(TameGraphMapSpec::from_json(&read(path)?)?),
        _ => Err(CliError::Input("expected a graph map".into())),
    }
}

/// Rounds every non-integer number to 12 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| json!(round12(x))).unwrap_or(Value::Null),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

/// Float formatted as in JSON reports.
pub fn fmt_float(x: f64) -> String {
    json!(round12(x)).to_string()
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn report(&mut self, name: &str, config: &RunConfig, body: Value) -> Result<(), CliError> {
        let mut doc = json!({ "schema_version": REPORT_SCHEMA_VERSION, "config": config });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let text = serde_json::to_string_pretty(&round_floats(doc)).expect("report serializes");
        self.text(name, &(text + "\n"))
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let mut body = String::from(header);
        body.push('\n');
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        self.text(name, &body)
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report value serializes")
}

fn pi_entries(pi: &StationaryVector, window: fairmeasure::IndexRange) -> Vec<(StateId, f64)> {
    pi.entries.iter().filter(|(s, _)| window.contains(**s)).map(|(s, p)| (*s, *p)).collect()
}

/// Runs one command, writing its files under `config.out`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let mut w = Writer::new(&config.out)?;
    let exit_code = match config.command {
        Command::Analyze => analyze(config, &mut w)?,
        Command::Classify => classify_cmd(config, &mut w)?,
        Command::Simulate => simulate(config, &mut w)?,
        Command::Fairmodel => fairmodel(config, &mut w)?,
        Command::Graph => graph(config, &mut w)?,
        Command::Verify => verify(config, &mut w)?,
    };
    Ok(RunOutcome { exit_code, files: w.files })
}

fn verdict_code(v: &FairVerdict) -> i32 {
    if matches!(v, FairVerdict::Unknown { .. }) {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    }
}

fn analyze(config: &RunConfig, w: &mut Writer) -> Result<i32, CliError> {
    let chain = load_chain(&config.input)?;
    let m = &chain.rules;
    let (verdict, pi) = fair_measure_verdict(m, config.solver(), chain.closed_form.as_ref(), config.max_period)?;
    let atoms = find_atomic_fair_measures(m, config.max_period, config.window.max(config.max_period as i64))?;
    let window = m.domain().window(config.window);
    let mut body = json!({
        "chain": m.name(),
        "domain": m.domain(),
        "window": window,
        "solver": config.solver(),
        "verdict": verdict,
        "atomic_orbits": atoms,
    });
    let class = match BackwardKernel::new(m.clone()) {
        Ok(q) => Some(classify(&q, &config.policy(chain.origin), chain.closed_form.as_ref())?),
        Err(ChainError::InfinitePreimages(_)) => None,
        Err(e) => return Err(e.into()),
    };
    body["class"] = to_value(class.as_ref().map(|v| v.class));
    if let Some(pi) = pi {
        let q = BackwardKernel::new(m.clone())?;
        let mu = FairMeasure::new(pi, &q)?;
        let entries = pi_entries(&mu.pi, window);
        body["pi"] = json!({
            "entries": entries.iter().map(|(s, p)| json!({ "state": s, "pi": p })).collect::<Vec<_>>(),
            "normalized": mu.pi.normalized,
            "provenance": mu.pi.provenance,
            "tail_mass_bound": mu.pi.tail_mass_bound,
        });
        let rows: Vec<Value> = entries
            .iter()
            .filter_map(|(s, _)| mu.p.rows.get(s).map(|r| json!({ "state": s, "row": r.iter().map(|(j, p)| json!({ "to": j, "p": p })).collect::<Vec<_>>(), "tail": mu.p.row_tail.get(s) })))
            .collect();
        body["P_rows"] = Value::Array(rows);
        body["fair_entropy"] = to_value(fair_entropy(&mu, mu.window())?);
        body["integral_log_c"] = to_value(integral_log_c(&mu, &q, mu.window())?);
        w.csv("pi.csv", "state,pi", entries.iter().map(|(s, p)| format!("{},{}", s.index(), fmt_float(*p))))?;
    }
    if let Some(v) = &class {
        body["diagnostics"] = json!({ "recurrence": v.evidence });
    }
    w.report("report.json", config, body)?;
    Ok(verdict_code(&verdict))
}

fn classify_cmd(config: &RunConfig, w: &mut Writer) -> Result<i32, CliError> {
    let chain = load_chain(&config.input)?;
    let q = BackwardKernel::new(chain.rules.clone())?;
    let policy = config.policy(chain.origin);
    let verdict = classify(&q, &policy, chain.closed_form.as_ref())?;
    w.csv(
        "series.csv",
        "n,term,partial_sum",
        verdict.evidence.series.iter().map(|(n, t, s)| format!("{n},{},{}", fmt_float(*t), fmt_float(*s))),
    )?;
    w.report("verdict.json", config, json!({ "chain": chain.rules.name(), "policy": policy, "class": verdict.class, "evidence": verdict.evidence }))?;
    Ok(if verdict.class == RecurrenceClass::Unknown { EXIT_UNKNOWN } else { EXIT_OK })
}

fn simulate(config: &RunConfig, w: &mut Writer) -> Result<i32, CliError> {
    let chain = load_chain(&config.input)?;
    let q = BackwardKernel::new(chain.rules.clone())?;
    let start = config.start.map(StateId).unwrap_or(chain.origin);
    let paths = sample_paths(&q, start, config.length, config.paths, config.seed)?;
    let mut per_path = Vec::new();
    for (k, p) in paths.iter().enumerate() {
        let means = running_geo_means(p, &q)?;
        let mut rows = Vec::with_capacity(p.states.len());
        for (step, s) in p.states.iter().enumerate() {
            let mean = if step == 0 { String::new() } else { fmt_float(means[step - 1]) };
            rows.push(format!("{step},{},{mean}", s.index()));
        }
        w.csv(&format!("path_{k}.csv"), "step,state,geo_mean", rows)?;
        let stats = path_statistics(p, &q, config.depth)?;
        per_path.push(json!({ "seed": p.seed, "length": stats.length, "geo_mean_c": stats.geo_mean_c }));
    }
    let mut body = json!({
        "chain": chain.rules.name(),
        "start": start,
        "paths": per_path,
        "transition_fit": transition_chi_squared(&paths, &q, 5.0)?,
    });
    let (verdict, pi) = fair_measure_verdict(&chain.rules, config.solver(), chain.closed_form.as_ref(), config.max_period)?;
    body["verdict"] = to_value(&verdict);
    if let Some(pi) = pi {
        let mu = FairMeasure::new(pi, &q)?;
        let window = chain.rules.domain().window(config.window);
        body["discrepancy"] = to_value(equidistribution_test(&paths, &q, &mu, config.depth, window)?);
        body["geo_mean_target"] = json!(integral_log_c(&mu, &q, mu.window())?.value.exp());
    }
    w.report("summary.json", config, body)?;
    Ok(EXIT_OK)
}

fn fairmodel(config: &RunConfig, w: &mut Writer) -> Result<i32, CliError> {
    let (map, closed_form) = load_map(&config.input)?;
    let m = transition_matrix(&map)?;
    let (verdict, pi) = fair_measure_verdict(&m, config.solver(), closed_form.as_ref(), config.max_period)?;
    let mut body = json!({ "map": map.name, "verdict": verdict });
    if let Some(pi) = pi {
        let q = BackwardKernel::new(m.clone())?;
        let mu = FairMeasure::new(pi, &q)?;
        let model = lebesgue_fair_model(&map, &mu, mu.window())?;
        let mut csv = String::from("source,target,x,x_end,y,y_end,slope\n");
        for p in &model.pieces {
            let f = |x: f64| fmt_float(x);
            let _ = writeln!(csv, "{},{},{},{},{},{},{}", p.source.index(), p.target.index(), f(p.x), f(p.x_end), f(p.y), f(p.y_end), p.slope);
        }
        w.text("model.csv", &csv)?;
        body["pieces"] = json!(model.pieces.len());
        body["tail_mass"] = json!(model.tail_mass);
        body["rohlin_entropy"] = to_value(rohlin_entropy(&model));
        body["fair_entropy"] = to_value(fair_entropy(&mu, mu.window())?);
        body["lebesgue_fairness"] = to_value(check_lebesgue_fair(&model, config.depth));
    }
    w.report("entropy.json", config, body)?;
    Ok(verdict_code(&verdict))
}

fn graph(config: &RunConfig, w: &mut Writer) -> Result<i32, CliError> {
    let spec = load_graph(&config.input)?;
    let refined = refined_transition_matrix(&spec, config.arc_window)?;
    let model = cut_and_paste(&spec, config.arc_window)?;
    w.text("interval_map.json", &(model.interval_map.to_json() + "\n"))?;
    w.text("refined_chain.json", &(ChainSpec::from_rules(&refined).to_json() + "\n"))?;
    let (verdict, pi) = fair_measure_verdict(&refined, config.solver(), None, config.max_period)?;
    let mut body = json!({ "graph": spec.name, "refined_states": model.states.len(), "verdict": verdict });
    if let Some(pi) = pi {
        let q = BackwardKernel::new(refined.clone())?;
        let mu = FairMeasure::new(pi, &q)?;
        body["fair_entropy"] = to_value(fair_entropy(&mu, mu.window())?);
        let pam = lebesgue_fair_model(&model.interval_map, &mu, mu.window())?;
        body["rohlin_entropy"] = to_value(rohlin_entropy(&pam));
    }
    w.report("report.json", config, body)?;
    Ok(verdict_code(&verdict))
}

fn verify(config: &RunConfig, w: &mut Writer) -> Result<i32, CliError> {
    let chain = load_chain(&config.input)?;
    let m = &chain.rules;
    let (verdict, pi) = fair_measure_verdict(m, config.solver(), chain.closed_form.as_ref(), config.max_period)?;
    let mut body = json!({ "chain": m.name(), "verdict": verdict });
    let Some(pi) = pi else {
        body["passed"] = json!(false);
        body["reason"] = json!("no summable stationary vector to verify");
        w.report("report.json", config, body)?;
        return Ok(EXIT_VERIFY_FAILED);
    };
    let q = BackwardKernel::new(m.clone())?;
    let mu = FairMeasure::new(pi, &q)?;
    let window = m.domain().window(config.window);
    let inner = fairmeasure::IndexRange::new(window.lo.max(mu.window().lo), window.hi.min(mu.window().hi));
    // Exact weights are checked exactly; numeric ones against the solver tolerance scale.
    let slack = (config.tolerance * 1e3).max(1e-9);
    let residual = verify_stationary(&mu.pi, &q, inner)?;
    let residual_exact = verify_stationary_exact(&mu.pi, &q, inner)?;
    let stationary_ok = match &residual_exact {
        Some(r) => r.is_zero(),
        None => residual <= slack,
    };
    let fairness = check_fair_on_cylinders(&mu, m, config.depth, inner)?;
    let fair_ok = match &fairness.max_violation_exact {
        Some(v) => v.is_zero(),
        None => fairness.max_violation <= slack,
    };
    let h = fair_entropy(&mu, mu.window())?;
    let l = integral_log_c(&mu, &q, mu.window())?;
    let entropy_ok = (h.value - l.value).abs() <= slack + h.tail_bound + l.tail_bound;
    let passed = stationary_ok && fair_ok && entropy_ok;
    body["checks"] = json!({
        "stationary": { "passed": stationary_ok, "residual": residual, "residual_exact": residual_exact.map(|r| r.to_string()) },
        "fair_on_cylinders": { "passed": fair_ok, "result": fairness },
        "entropy_identity": { "passed": entropy_ok, "fair_entropy": h, "integral_log_c": l },
    });
    body["passed"] = json!(passed);
    w.report("report.json", config, body)?;
    Ok(if passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
