//! The `swn` command line: weight discovery, distance evaluation, unfolding
//! and format conversion.

pub mod config;
mod io;
mod report;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use swn_core::distances::{log_likelihood_divergence, restricted_emd, truncated_emd, DistanceError, DistanceReport};
use swn_core::eventlog::{log_language, CsvColumns, EventLog};
use swn_core::net::pnml::{write_net, write_pnml};
use swn_core::optimizer::{convergence_csv, optimized_weights, Measure, Method, ObjectiveSpec, OptimizerConfig, OptimizerError};
use swn_core::semantics::{annotate, build_rg, SemanticsError, DEFAULT_STATE_CAP};
use swn_core::unfolding::{trace_probabilities, unfold_language, LanguageBudget, PrefixIndex, UnfoldLimits, DEFAULT_PROB_FLOOR};
use swn_core::StochasticWorkflowNet;

use config::{pick, pick_path, ConfigFile};
use io::Format;

pub const REPORT_SCHEMA: &str = "stochastic-weights/report/1";
const DEFAULT_COVERAGE: f64 = 0.8;
const DEFAULT_MAX_TRACE_LEN: usize = 64;

/// Estimate and evaluate transition weights of stochastic workflow nets.
#[derive(Debug, Parser)]
#[command(name = "swn", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimise the weights of a net against an event log.
    Discover(DiscoverArgs),
    /// Distances between a weighted net and an event log.
    Evaluate(EvaluateArgs),
    /// Trace probabilities of a weighted net.
    Unfold(UnfoldArgs),
    /// Canonicalise a PNML file or convert a log between XES and CSV.
    Convert(ConvertArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// key = value file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub max_level: Option<usize>,
    #[arg(long)]
    pub prob_floor: Option<f64>,
    /// Abort if the reachability graph grows past this many states.
    #[arg(long)]
    pub state_cap: Option<usize>,
    #[arg(long)]
    pub case_column: Option<String>,
    #[arg(long)]
    pub activity_column: Option<String>,
    /// CSV column to order events by; row order otherwise.
    #[arg(long)]
    pub time_column: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub common: Common,
    /// lh or remd.
    #[arg(long)]
    pub measure: Option<Measure>,
    /// fd-quasi-newton or derivative-free; by default chosen from the measure.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_net: Option<PathBuf>,
    /// Report JSON; standard output when absent.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    #[arg(long)]
    pub out_convergence: Option<PathBuf>,
    /// Include wall-clock phase timings in the report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated subset of lh, remd, temd.
    #[arg(long)]
    pub measures: Option<String>,
    /// Probability mass tEMD unfolds before comparing.
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub max_trace_len: Option<usize>,
    /// Wall-clock budget in seconds for the tEMD unfolding.
    #[arg(long)]
    pub temd_timeout: Option<f64>,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct UnfoldArgs {
    #[command(flatten)]
    pub common: Common,
    /// Unfold the full language up to this mass instead of the log's traces.
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub max_trace_len: Option<usize>,
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Also write the reachability graph in Graphviz format.
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub case_column: Option<String>,
    #[arg(long)]
    pub activity_column: Option<String>,
    #[arg(long)]
    pub time_column: Option<String>,
}

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable, malformed or invalid input.
    Input(anyhow::Error),
    /// Valid input on which the computation failed.
    Computation(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Computation(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Computation(e) => e,
        }
    }
}

type Outcome<T> = Result<T, Failure>;

trait InputContext<T> {
    fn input(self) -> Outcome<T>;
}

impl<T> InputContext<T> for anyhow::Result<T> {
    fn input(self) -> Outcome<T> {
        self.map_err(Failure::Input)
    }
}

fn computation(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Computation(e.into())
}

fn semantics_failure(e: SemanticsError) -> Failure {
    match e {
        SemanticsError::StateCapExceeded(_) => computation(e),
        other => Failure::Input(anyhow!(other).context("the net is not 1-safe")),
    }
}

pub fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Discover(a) => discover(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Unfold(a) => unfold(a),
        Command::Convert(a) => convert(a),
    }
}

struct Inputs {
    config: ConfigFile,
    net: Option<PathBuf>,
    log: Option<PathBuf>,
    limits: UnfoldLimits,
    state_cap: usize,
    columns: CsvColumns,
}

impl Inputs {
    fn resolve(common: Common) -> anyhow::Result<Self> {
        let config = match &common.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let prob_floor = pick(common.prob_floor, &config, "prob-floor")?.unwrap_or(DEFAULT_PROB_FLOOR);
        if !(0.0..1.0).contains(&prob_floor) {
            bail!("--prob-floor must lie in [0, 1)");
        }
        let max_level = pick(common.max_level, &config, "max-level")?;
        if max_level == Some(0) {
            bail!("--max-level must be positive");
        }
        let state_cap = pick(common.state_cap, &config, "state-cap")?.unwrap_or(DEFAULT_STATE_CAP);
        let columns = columns(common.case_column, common.activity_column, common.time_column, &config)?;
        Ok(Inputs {
            net: pick_path(common.net, &config, "net"),
            log: pick_path(common.log, &config, "log"),
            limits: UnfoldLimits { max_level, prob_floor },
            state_cap,
            columns,
            config,
        })
    }

    fn net_path(&self) -> anyhow::Result<&Path> {
        self.net.as_deref().context("--net is required")
    }

    fn log_path(&self) -> anyhow::Result<&Path> {
        self.log.as_deref().context("--log is required")
    }

    fn read_net(&self) -> anyhow::Result<StochasticWorkflowNet> {
        io::read_swn(self.net_path()?)
    }

    fn read_log(&self) -> anyhow::Result<EventLog> {
        io::read_log(self.log_path()?, &self.columns)
    }
}

fn columns(
    case: Option<String>,
    activity: Option<String>,
    time: Option<String>,
    config: &ConfigFile,
) -> anyhow::Result<CsvColumns> {
    let defaults = CsvColumns::default();
    Ok(CsvColumns {
        case: pick(case, config, "case-column")?.unwrap_or(defaults.case),
        activity: pick(activity, config, "activity-column")?.unwrap_or(defaults.activity),
        time: pick(time, config, "time-column")?,
    })
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Outcome<()> {
    match path {
        Some(p) => io::write(p, bytes).input(),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).context("writing to standard output").input()
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialise");
    bytes.push(b'\n');
    bytes
}

fn discover(args: DiscoverArgs) -> Outcome<()> {
    let inputs = Inputs::resolve(args.common).input()?;
    let c = &inputs.config;
    let defaults = OptimizerConfig::default();
    let measure = pick(args.measure, c, "measure").input()?.unwrap_or(Measure::Lh);
    let config = OptimizerConfig {
        n0: pick(args.n0, c, "n0").input()?.unwrap_or(defaults.n0),
        max_iter: pick(args.max_iter, c, "max-iter").input()?.unwrap_or(defaults.max_iter),
        delta: pick(args.delta, c, "delta").input()?.unwrap_or(defaults.delta),
        seed: pick(args.seed, c, "seed").input()?.unwrap_or(defaults.seed),
        method: pick(args.method, c, "method").input()?,
        ..defaults
    };
    config.validate().map_err(anyhow::Error::from).input()?;
    let out_net = pick_path(args.out_net, c, "out-net");
    let out_report = pick_path(args.out_report, c, "out-report");
    let out_convergence = pick_path(args.out_convergence, c, "out-convergence");

    let swn = inputs.read_net().input()?;
    let log = inputs.read_log().input()?;
    let target = log_language(&log).context("reading the event log").input()?;

    let started = Instant::now();
    let spec = ObjectiveSpec::new(measure, swn.workflow(), target, inputs.limits, inputs.state_cap).map_err(|e| match e {
        OptimizerError::Semantics(s) => semantics_failure(s),
        other => Failure::Input(other.into()),
    })?;
    let result = optimized_weights(&spec, &config).map_err(|e| match e {
        OptimizerError::InvalidConfig(_) => Failure::Input(e.into()),
        other => computation(other),
    })?;
    let optimization = started.elapsed();

    let tuned = swn.with_weights(result.weights.clone()).map_err(computation)?;
    let clock = Instant::now();
    let probs = spec.unfold(&result.weights);
    let unfold_time = clock.elapsed();
    let clock = Instant::now();
    let lh = log_likelihood_divergence(spec.target(), &probs);
    let lh_time = clock.elapsed();
    let clock = Instant::now();
    let remd = restricted_emd(spec.target(), &probs).ok().map(|r| r.value);
    let remd_time = clock.elapsed();

    let report = report::Discover {
        schema: REPORT_SCHEMA,
        command: "discover",
        measure,
        method: result.method,
        seed: config.seed,
        n0: config.n0,
        max_iter: config.max_iter,
        delta: config.delta,
        final_value: result.final_value,
        start_value: result.start_value,
        iterations: result.iterations,
        stop_reason: result.stop_reason,
        evaluations: result.evaluations,
        weights: report::weights(tuned.net(), &result.weights),
        distances: report::FinalDistances { lh, remd, dropped_mass: probs.dropped_mass },
        timings: args.timings.then(|| report::Timings {
            unfold_ms: report::millis(unfold_time),
            lh_ms: report::millis(lh_time),
            remd_ms: report::millis(remd_time),
            optimization_ms: report::millis(optimization),
        }),
    };
    if let Some(path) = &out_net {
        io::write(path, &write_pnml(&tuned)).input()?;
    }
    if let Some(path) = &out_convergence {
        io::write(path, convergence_csv(&result.trace).as_bytes()).input()?;
    }
    emit(out_report.as_deref(), &to_json(&report))
}

fn parse_measures(raw: &str) -> anyhow::Result<Vec<String>> {
    let mut out = Vec::new();
    for m in raw.split(',').map(|m| m.trim().to_ascii_lowercase()).filter(|m| !m.is_empty()) {
        if !["lh", "remd", "temd"].contains(&m.as_str()) {
            bail!("unknown measure `{m}` (expected lh, remd or temd)");
        }
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!("--measures is empty");
    }
    Ok(out)
}

fn coverage_arg(flag: Option<f64>, config: &ConfigFile) -> anyhow::Result<Option<f64>> {
    let coverage = pick(flag, config, "coverage")?;
    if let Some(c) = coverage {
        if !(c > 0.0 && c <= 1.0) {
            bail!("--coverage must lie in (0, 1]");
        }
    }
    Ok(coverage)
}

fn trace_len_arg(flag: Option<usize>, config: &ConfigFile) -> anyhow::Result<usize> {
    let len = pick(flag, config, "max-trace-len")?.unwrap_or(DEFAULT_MAX_TRACE_LEN);
    if len == 0 {
        bail!("--max-trace-len must be positive");
    }
    Ok(len)
}

fn evaluate(args: EvaluateArgs) -> Outcome<()> {
    let inputs = Inputs::resolve(args.common).input()?;
    let c = &inputs.config;
    let measures = match pick(args.measures, c, "measures").input()? {
        Some(raw) => parse_measures(&raw).input()?,
        None => vec!["lh".into(), "remd".into(), "temd".into()],
    };
    let coverage = coverage_arg(args.coverage, c).input()?.unwrap_or(DEFAULT_COVERAGE);
    let max_trace_len = trace_len_arg(args.max_trace_len, c).input()?;
    let time_limit = match pick(args.temd_timeout, c, "temd-timeout").input()? {
        Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => return Err(Failure::Input(anyhow::anyhow!("--temd-timeout must be a non-negative number of seconds, got {t}"))),
        None => None,
    };
    let out_report = pick_path(args.out_report, c, "out-report");

    let swn = inputs.read_net().input()?;
    let log = inputs.read_log().input()?;
    let target = log_language(&log).context("reading the event log").input()?;
    let rg = build_rg(swn.workflow(), inputs.state_cap).map_err(semantics_failure)?;
    let arg = annotate(&rg, swn.weights());
    let probs = trace_probabilities(&arg, &PrefixIndex::from_traces(target.support()), inputs.limits);

    let mut reports: Vec<DistanceReport> = Vec::new();
    for m in &measures {
        let report = match m.as_str() {
            "lh" => DistanceReport {
                kind: swn_core::distances::DistanceKind::Lh,
                value: log_likelihood_divergence(&target, &probs),
                model_mass_on_log: None,
                coverage_used: None,
                partial: false,
            },
            "remd" => restricted_emd(&target, &probs).map_err(distance_failure)?,
            _ => {
                let budget = LanguageBudget {
                    coverage,
                    max_trace_len,
                    max_level: inputs.limits.max_level,
                    prob_floor: inputs.limits.prob_floor,
                    time_limit,
                };
                let r = truncated_emd(&target, &arg, budget).map_err(distance_failure)?;
                if r.partial {
                    log::warn!(
                        "tEMD budget bound at coverage {:.6} below the requested {coverage}",
                        r.coverage_used.unwrap_or(0.0)
                    );
                }
                r
            }
        };
        reports.push(report);
    }
    emit(out_report.as_deref(), &to_json(&reports))
}

fn distance_failure(e: DistanceError) -> Failure {
    match e {
        DistanceError::IncompleteTarget(_) => Failure::Input(e.into()),
        other => computation(other),
    }
}

fn unfold(args: UnfoldArgs) -> Outcome<()> {
    let inputs = Inputs::resolve(args.common).input()?;
    let c = &inputs.config;
    let coverage = coverage_arg(args.coverage, c).input()?;
    let max_trace_len = trace_len_arg(args.max_trace_len, c).input()?;
    let out_report = pick_path(args.out_report, c, "out-report");

    let swn = inputs.read_net().input()?;
    let rg = build_rg(swn.workflow(), inputs.state_cap).map_err(semantics_failure)?;
    if let Some(path) = &args.out_dot {
        io::write(path, rg.to_dot(swn.net()).as_bytes()).input()?;
    }
    let arg = annotate(&rg, swn.weights());

    let bytes = match (coverage, &inputs.log) {
        (None, Some(_)) => {
            let log = inputs.read_log().input()?;
            let target = log_language(&log).context("reading the event log").input()?;
            let r = trace_probabilities(&arg, &PrefixIndex::from_traces(target.probs().keys()), inputs.limits);
            to_json(&report::Unfolded::from_result(&r))
        }
        (coverage, _) => {
            if inputs.log.is_some() {
                log::warn!("--coverage unfolds the full language; the log is ignored");
            }
            let budget = LanguageBudget {
                coverage: coverage.unwrap_or(1.0),
                max_trace_len,
                max_level: inputs.limits.max_level,
                prob_floor: inputs.limits.prob_floor,
                time_limit: None,
            };
            to_json(&report::Unfolded::from_language(&unfold_language(&arg, budget)))
        }
    };
    emit(out_report.as_deref(), &bytes)
}

fn convert(args: ConvertArgs) -> Outcome<()> {
    let from = io::format_of(&args.input).input()?;
    let to = io::format_of(&args.output).input()?;
    let bytes = match (from, to) {
        (Format::Pnml, Format::Pnml) => {
            let parsed = io::read_pnml(&args.input).input()?;
            write_net(&parsed.net, parsed.weights.as_ref())
        }
        (Format::Pnml, _) | (_, Format::Pnml) => {
            return Err(Failure::Input(anyhow!("cannot convert between a net and an event log")));
        }
        (_, to) => {
            let columns = columns(args.case_column, args.activity_column, args.time_column, &ConfigFile::default()).input()?;
            let log = io::read_log(&args.input, &columns).input()?;
            io::encode_log(&log, to).input()?
        }
    };
    io::write(&args.output, &bytes).input()
}
