//! The `indet` command-line front end.
//!
//! Machine-readable output (JSON or CSV) goes to stdout; diagnostics go to
//! stderr. Exit codes: 0 success, 1 data or I/O error, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    flag_partition, mixed_interval, oracle_partition, partition_interval, prevalence_interval,
    threshold_partition, AgreementSource, Partition,
};
use crate::corpus::{merge_audit, validate_corpus, AuditRecord, Corpus};
use crate::error::Error;
use crate::estimation::{draw_audit_sample, estimate_prevalence, widened_prevalence_interval};
use crate::jsonl::{parse_audits, parse_corpus, write_audit_worksheet, write_corpus};
use crate::metrics::evaluate;
use crate::simulate::{simulate_corpus, sweep_indeterminacy, GridSummary, SimulationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "indet",
    version,
    about = "Score model responses when items can have several correct answers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with valid response sets.
    Simulate(SimulateArgs),
    /// Gold-label concurrence and true performance of a corpus.
    Evaluate(EvaluateArgs),
    /// Performance intervals from partial knowledge.
    Bound {
        #[command(subcommand)]
        command: BoundCommand,
    },
    /// Draw, apply and summarize indeterminacy audits.
    Audit {
        #[command(subcommand)]
        command: AuditCommand,
    },
    /// Sweep the indeterminacy proportion over simulated corpora.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SimFlags {
    /// Items per corpus.
    #[arg(long, default_value_t = 2000)]
    items: usize,
    /// Alphabet size.
    #[arg(long, default_value_t = 4)]
    labels: usize,
    /// Raters per item.
    #[arg(long, default_value_t = 5)]
    raters: usize,
    /// Probability that a rater answers uniformly at random.
    #[arg(long, default_value_t = 0.05, value_parser = half_open_fraction)]
    epsilon: f64,
    /// Probability that the model answers from the valid response set.
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    competence: f64,
    /// Largest valid response set size.
    #[arg(long, default_value_t = 3)]
    vrs_max: usize,
    /// Concentration of the interpretation weights.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    alpha_dirichlet: f64,
    #[arg(long)]
    seed: u64,
    /// Worker threads; defaults to all cores. Output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl SimFlags {
    fn config(&self, pi: f64) -> SimulationConfig {
        SimulationConfig {
            n_items: self.items,
            alphabet_size: self.labels,
            pi,
            vrs_max: self.vrs_max,
            raters_per_item: self.raters,
            rater_error: self.epsilon,
            llm_competence: self.competence,
            dirichlet_alpha: self.alpha_dirichlet,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Proportion of indeterminate items.
    #[arg(long, value_parser = fraction)]
    pi: f64,
    #[command(flatten)]
    sim: SimFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Fail unless every item carries a valid response set.
    #[arg(long)]
    require_vrs: bool,
}

#[derive(Debug, Subcommand)]
enum BoundCommand {
    /// Interval from the proportion of indeterminate items.
    Prevalence(PrevalenceArgs),
    /// Interval from a determinate/indeterminate split.
    Partition(PartitionArgs),
    /// Partition interval using exact correctness wherever a valid response set is known.
    Mixed(PartitionArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("knowledge").required(true).args(["pi", "audit"]))]
struct PrevalenceArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Known proportion of indeterminate items.
    #[arg(long, value_parser = fraction)]
    pi: Option<f64>,
    /// Audit file; the proportion is estimated with a one-sided upper limit.
    #[arg(long, requires = "alpha")]
    audit: Option<PathBuf>,
    #[arg(long, requires = "audit", value_parser = open_fraction)]
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    Raters,
    Llm,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("split").required(true).args(["oracle", "threshold", "flags"]))]
struct PartitionArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Split by the valid response sets in the corpus.
    #[arg(long)]
    oracle: bool,
    /// Items with agreement strictly below TAU are indeterminate.
    #[arg(long, value_name = "TAU", value_parser = fraction)]
    threshold: Option<f64>,
    #[arg(long, value_enum, requires = "threshold", default_value = "raters")]
    agreement_source: SourceArg,
    /// Split by audit flags; items without one count as indeterminate.
    #[arg(long)]
    flags: bool,
}

#[derive(Debug, Subcommand)]
enum AuditCommand {
    /// Write a worksheet of randomly sampled item ids.
    Draw {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Copy audit verdicts onto the corpus.
    Apply {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        audit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the proportion of indeterminate items.
    Estimate {
        #[arg(long)]
        audit: PathBuf,
        #[arg(long, value_parser = open_fraction)]
        alpha: f64,
    },
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// "start:stop:step" (stop included) or a comma-separated list.
    #[arg(long, value_parser = parse_grid)]
    pi_grid: Grid,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Agreement threshold for the heuristic partition.
    #[arg(long, default_value_t = 0.7, value_parser = fraction)]
    tau: f64,
    #[command(flatten)]
    sim: SimFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("{s:?} is not a number"))
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

fn half_open_fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1), got {v}"))
    }
}

fn open_fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

/// Snaps grid arithmetic noise such as 0.30000000000000004 to 0.3.
fn tidy(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let values: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("expected start:stop:step, got {s:?}"));
        };
        let (start, stop, step) = (fraction(start)?, fraction(stop)?, parse_f64(step)?);
        if step.is_nan() || step <= 0.0 {
            return Err(format!("step must be positive, got {step}"));
        }
        if stop < start {
            return Err(format!("stop {stop} is below start {start}"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > MAX_GRID_POINTS {
            return Err(format!("grid has more than {MAX_GRID_POINTS} points"));
        }
        (0..count)
            .map(|i| {
                let v = start + i as f64 * step;
                if (v - stop).abs() <= 1e-9 {
                    stop
                } else {
                    tidy(v)
                }
            })
            .collect()
    } else {
        s.split(',').map(fraction).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(Grid(values))
}

/// A failed command: exit code plus a diagnostic for stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn config_flag(field: &str) -> &'static str {
    match field {
        "n_items" => "--items",
        "alphabet_size" => "--labels",
        "pi" => "--pi",
        "vrs_max" => "--vrs-max",
        "raters_per_item" => "--raters",
        "rater_error" => "--epsilon",
        "llm_competence" => "--competence",
        "dirichlet_alpha" => "--alpha-dirichlet",
        "pi_grid" => "--pi-grid",
        "replicates" => "--replicates",
        _ => "a flag",
    }
}

/// Maps a library error, treating config errors as usage errors.
fn lib_failure(context: &str, err: Error) -> Failure {
    match err {
        Error::InvalidConfig { field, reason } => {
            Failure::usage(format!("{}: {reason}", config_flag(field)))
        }
        err => Failure::data(format!("{context}: {err}")),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Corpus, Failure> {
    parse_corpus(open(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn load_audits(path: &Path) -> Result<Vec<AuditRecord>, Failure> {
    parse_audits(open(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the destination directory, then
/// renames it into place.
fn write_atomic<F>(path: &Path, fill: F) -> CmdResult
where
    F: FnOnce(&mut dyn Write) -> crate::error::Result<()>,
{
    let fail =
        |e: &dyn std::fmt::Display| Failure::data(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(|e| fail(&e))?;
        buf.flush().map_err(|e| fail(&e))?;
    }
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn emit_json<T: Serialize>(stdout: &mut dyn Write, value: &T) -> CmdResult {
    let text = serde_json::to_string(value).expect("report types serialize");
    writeln!(stdout, "{text}").map_err(|e| Failure::data(format!("cannot write stdout: {e}")))
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, Failure> {
    match threads {
        None => Ok(job()),
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::data(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    n_items: usize,
    realized_pi: f64,
}

fn cmd_simulate(args: SimulateArgs, stdout: &mut dyn Write) -> CmdResult {
    let config = args.sim.config(args.pi);
    let (corpus, truth) = with_threads(args.sim.threads, || simulate_corpus(&config))?
        .map_err(|e| lib_failure("simulate", e))?;
    write_atomic(&args.out, |w| write_corpus(&corpus, w))?;
    emit_json(
        stdout,
        &SimulateSummary {
            n_items: corpus.len(),
            realized_pi: truth.indeterminate_count() as f64 / corpus.len() as f64,
        },
    )
}

fn cmd_evaluate(args: EvaluateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let corpus = load_corpus(&args.corpus)?;
    let report = validate_corpus(&corpus);
    for warning in report.warnings() {
        let _ = writeln!(stderr, "{warning}");
    }
    if report.has_errors() {
        let lines: Vec<String> = report.errors().map(|v| v.to_string()).collect();
        return Err(Failure::data(format!(
            "{}: validation failed\n{}",
            args.corpus.display(),
            lines.join("\n")
        )));
    }
    if args.require_vrs {
        if let Some(item) = corpus.items().iter().find(|i| i.vrs.is_none()) {
            return Err(Failure::data(format!(
                "{}: item {:?} has no valid response set (--require-vrs)",
                args.corpus.display(),
                item.item_id
            )));
        }
    }
    let result =
        evaluate(&corpus).map_err(|e| lib_failure(&args.corpus.display().to_string(), e))?;
    emit_json(stdout, &result)
}

fn build_partition(args: &PartitionArgs, corpus: &Corpus) -> Result<(Partition, String), Failure> {
    let ctx = args.corpus.display().to_string();
    if args.oracle {
        let p = oracle_partition(corpus).map_err(|e| lib_failure(&ctx, e))?;
        Ok((p, "partition-source:oracle".into()))
    } else if let Some(tau) = args.threshold {
        let (source, name) = match args.agreement_source {
            SourceArg::Raters => (AgreementSource::Raters, "raters"),
            SourceArg::Llm => (AgreementSource::LlmSamples, "llm"),
        };
        let p = threshold_partition(corpus, tau, source).map_err(|e| lib_failure(&ctx, e))?;
        Ok((p, format!("partition-source:threshold:{name}<{tau}")))
    } else {
        Ok((flag_partition(corpus), "partition-source:flags".into()))
    }
}

fn cmd_bound(command: BoundCommand, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let interval = match command {
        BoundCommand::Prevalence(args) => {
            let corpus = load_corpus(&args.corpus)?;
            let ctx = args.corpus.display().to_string();
            match (args.pi, args.audit, args.alpha) {
                (Some(pi), None, None) => {
                    prevalence_interval(&corpus, pi).map_err(|e| lib_failure(&ctx, e))?
                }
                (None, Some(path), Some(alpha)) => {
                    let audits = load_audits(&path)?;
                    merge_audit(&corpus, &audits)
                        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
                    let estimate = estimate_prevalence(&audits, alpha)
                        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
                    let _ = writeln!(
                        stderr,
                        "audit: {}/{} indeterminate, upper limit {:.6}",
                        estimate.n_indeterminate, estimate.n_audited, estimate.upper_confidence
                    );
                    widened_prevalence_interval(&corpus, &estimate)
                        .map_err(|e| lib_failure(&ctx, e))?
                }
                _ => {
                    return Err(Failure::usage(
                        "give exactly one of --pi or --audit with --alpha",
                    ))
                }
            }
        }
        BoundCommand::Partition(args) => {
            let corpus = load_corpus(&args.corpus)?;
            let (partition, tag) = build_partition(&args, &corpus)?;
            partition_interval(&corpus, &partition)
                .map_err(|e| lib_failure(&args.corpus.display().to_string(), e))?
                .with_assumption(tag)
        }
        BoundCommand::Mixed(args) => {
            let corpus = load_corpus(&args.corpus)?;
            let (partition, tag) = build_partition(&args, &corpus)?;
            mixed_interval(&corpus, &partition)
                .map_err(|e| lib_failure(&args.corpus.display().to_string(), e))?
                .with_assumption(tag)
        }
    };
    emit_json(stdout, &interval)
}

fn cmd_audit(command: AuditCommand, stdout: &mut dyn Write) -> CmdResult {
    match command {
        AuditCommand::Draw {
            corpus,
            n,
            seed,
            out,
        } => {
            let loaded = load_corpus(&corpus)?;
            let ids = draw_audit_sample(&loaded, n, seed)
                .map_err(|e| Failure::usage(format!("--n: {e}")))?;
            write_atomic(&out, |w| write_audit_worksheet(&ids, w))?;
            emit_json(stdout, &serde_json::json!({ "n_sampled": ids.len() }))
        }
        AuditCommand::Apply { corpus, audit, out } => {
            let loaded = load_corpus(&corpus)?;
            let audits = load_audits(&audit)?;
            let merged = merge_audit(&loaded, &audits)
                .map_err(|e| Failure::data(format!("{}: {e}", audit.display())))?;
            write_atomic(&out, |w| write_corpus(&merged, w))?;
            emit_json(stdout, &serde_json::json!({ "n_applied": audits.len() }))
        }
        AuditCommand::Estimate { audit, alpha } => {
            let audits = load_audits(&audit)?;
            let estimate = estimate_prevalence(&audits, alpha)
                .map_err(|e| Failure::data(format!("{}: {e}", audit.display())))?;
            emit_json(stdout, &estimate)
        }
    }
}

#[derive(Serialize)]
struct SweepSummary {
    rows: usize,
    grid: Vec<GridSummary>,
}

fn cmd_sweep(args: SweepArgs, stdout: &mut dyn Write) -> CmdResult {
    let base = args.sim.config(0.0);
    let grid = args.pi_grid.0;
    let table = with_threads(args.sim.threads, || {
        sweep_indeterminacy(&base, &grid, args.replicates, args.tau)
    })?
    .map_err(|e| lib_failure("sweep", e))?;
    write_atomic(&args.out, |w| table.write_csv(w))?;
    emit_json(
        stdout,
        &SweepSummary {
            rows: table.rows.len(),
            grid: table.summary(),
        },
    )
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            };
            let text = err.render().to_string();
            let sink: &mut dyn Write = if err.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args, stdout),
        Command::Evaluate(args) => cmd_evaluate(args, stdout, stderr),
        Command::Bound { command } => cmd_bound(command, stdout, stderr),
        Command::Audit { command } => cmd_audit(command, stdout),
        Command::Sweep(args) => cmd_sweep(args, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ranges_include_stop() {
        assert_eq!(parse_grid("0:0.8:0.4").unwrap().0, vec![0.0, 0.4, 0.8]);
        let g = parse_grid("0:1:0.1").unwrap().0;
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(parse_grid("0:0.5:0.2").unwrap().0, vec![0.0, 0.2, 0.4]);
        assert_eq!(parse_grid("0.2, 0.5,0.9").unwrap().0, vec![0.2, 0.5, 0.9]);
    }

    #[test]
    fn malformed_grids() {
        for bad in [
            "",
            "0:1",
            "0:1:0",
            "0:1:-0.1",
            "0.5:0.1:0.1",
            "0:1.5:0.5",
            "a,b",
            "0.1,,0.2",
            "0:1:1e-9",
        ] {
            assert!(parse_grid(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn value_parsers() {
        assert!(fraction("1.5").is_err());
        assert!(fraction("1").is_ok());
        assert!(half_open_fraction("1").is_err());
        assert!(open_fraction("0").is_err());
        assert!(positive("0").is_err());
    }

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("indet").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, out, err) =
            run_capture(&["simulate", "--pi", "1.5", "--seed", "1", "--out", "x"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("--pi"), "{err}");

        let (code, _, _) = run_capture(&["bogus"]);
        assert_eq!(code, EXIT_USAGE);

        let (code, _, err) =
            run_capture(&["sweep", "--pi-grid", "0:1", "--seed", "1", "--out", "x"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--pi-grid"));
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, err) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("simulate"));
        assert!(err.is_empty());
    }
}
