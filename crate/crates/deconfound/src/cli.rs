//! `deconfound` command line. Every subcommand loads a table, calls the
//! library and writes a report; exit codes are 0 on success, 1 on domain
//! errors and 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deconfound_core::projection::{
    logit_projection_with, parity_only_projection_with, pr_projection_with,
};
use deconfound_core::simulate::replicate_metrics;
use deconfound_core::{
    Assignment, EffectReport, Event, JointTable, Metric, ProjectionResult, Provenance,
    ReplicateConfig, Role, Settings, StudyLayout,
};

use crate::csv_io::{load_csv, TableFileSpec, DEFAULT_COUNT_COLUMN};
use crate::datasets::{builtin, describe_builtins};
use crate::error::Error;
use crate::report::ReportDocument;

pub const DEFAULT_REPLICATES: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "deconfound",
    version,
    about = "Remove observed-confounder bias from categorical study tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a projection and report the fitted table (and effects, given an event and reference).
    Project(ProjectArgs),
    /// Effect sizes and significance tests on the observed table.
    Metrics(MetricsArgs),
    /// Replicate studies drawn from the fitted table.
    Sample(SampleArgs),
    /// Projection, observed and hypothetical effects, optionally replicates, in one document.
    Report(ReportArgs),
    /// List the builtin datasets.
    Datasets(DatasetsArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Builtin dataset name (see `datasets`).
    #[arg(long, required_unless_present = "input", conflicts_with = "input")]
    pub builtin: Option<String>,
    /// Cell-list CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Outcome column of --input.
    #[arg(long, requires = "input")]
    pub outcome: Option<String>,
    /// Independent (intervention) column of --input; repeatable.
    #[arg(long, requires = "input")]
    pub independent: Vec<String>,
    /// Confounder column of --input; repeatable.
    #[arg(long, requires = "input")]
    pub confounder: Vec<String>,
    #[arg(long, default_value = DEFAULT_COUNT_COLUMN, requires = "input")]
    pub count_column: String,
    /// One row per subject instead of one row per cell.
    #[arg(long, requires = "input")]
    pub microdata: bool,
    /// Add up repeated cells instead of rejecting the file.
    #[arg(long, requires = "input")]
    pub merge_duplicates: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Pr,
    ParityOnly,
    Logit,
}

#[derive(Debug, Args)]
pub struct ProjectionArgs {
    #[arg(long, value_enum, default_value_t = Kind::Pr)]
    pub kind: Kind,
    #[arg(long, default_value_t = deconfound_core::projection::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = deconfound_core::projection::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct OptionalEffectArgs {
    /// Outcome level counted as the event.
    #[arg(long, requires = "reference")]
    pub event: Option<String>,
    /// Reference group, e.g. "place=New York".
    #[arg(long, requires = "event")]
    pub reference: Option<String>,
}

#[derive(Debug, Args)]
pub struct EffectArgs {
    /// Outcome level counted as the event.
    #[arg(long)]
    pub event: String,
    /// Reference group, e.g. "place=New York".
    #[arg(long)]
    pub reference: String,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Report path; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[command(flatten)]
    pub effect: OptionalEffectArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub effect: EffectArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// Subjects per replicate study; defaults to the table's N.
    #[arg(long)]
    pub subjects: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[command(flatten)]
    pub effect: OptionalEffectArgs,
    #[command(flatten)]
    pub replicate: ReplicateArgs,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub projection: ProjectionArgs,
    #[command(flatten)]
    pub effect: EffectArgs,
    #[command(flatten)]
    pub replicate: ReplicateArgs,
    /// Also summarize this many replicate studies.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DatasetsArgs {
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A failed run: exit code plus message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownDataset(_) => Failure::usage(e.to_string()),
            e => Failure::domain(e.to_string()),
        }
    }
}

impl From<deconfound_core::Error> for Failure {
    fn from(e: deconfound_core::Error) -> Self {
        Failure::domain(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((text, path)) => match path {
            Some(path) => match std::fs::write(&path, text) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {}: {e}", path.display());
                    1
                }
            },
            None => {
                let _ = stdout.write_all(text.as_bytes());
                0
            }
        },
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

type Outcome = Result<(String, Option<PathBuf>), Failure>;

pub fn execute(command: &Command) -> Outcome {
    match command {
        Command::Project(a) => project(a),
        Command::Metrics(a) => metrics(a),
        Command::Sample(a) => sample(a),
        Command::Report(a) => report(a),
        Command::Datasets(a) => Ok((describe_builtins()?, a.output.output.clone())),
    }
}

fn load(input: &InputArgs) -> Result<(String, JointTable), Failure> {
    if let Some(name) = &input.builtin {
        return Ok((format!("builtin:{name}"), builtin(name)?));
    }
    let path = input.input.as_ref().expect("clap requires one source");
    let outcome = input
        .outcome
        .as_ref()
        .ok_or_else(|| Failure::usage("--input needs --outcome, --independent and --confounder"))?;
    if input.independent.is_empty() || input.confounder.is_empty() {
        return Err(Failure::usage(
            "--input needs at least one --independent and one --confounder",
        ));
    }
    let mut roles = vec![(outcome.clone(), Role::Outcome)];
    roles.extend(
        input
            .independent
            .iter()
            .map(|c| (c.clone(), Role::Independent)),
    );
    roles.extend(
        input
            .confounder
            .iter()
            .map(|c| (c.clone(), Role::Confounder)),
    );
    let mut spec = TableFileSpec::new(path, roles).with_count_column(&input.count_column);
    if input.microdata {
        spec = spec.microdata();
    }
    if input.merge_duplicates {
        spec = spec.merging();
    }
    Ok((format!("file:{}", path.display()), load_csv(&spec)?))
}

fn settings(p: &ProjectionArgs) -> Result<Settings, Failure> {
    let s = Settings {
        tolerance: p.tolerance,
        max_iterations: p.max_iterations,
    };
    s.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(s)
}

fn fit(f: &JointTable, p: &ProjectionArgs) -> Result<(ProjectionResult, Settings), Failure> {
    let s = settings(p)?;
    let dist = f.normalize()?;
    let result = match p.kind {
        Kind::Pr => pr_projection_with(&dist, s),
        Kind::ParityOnly => parity_only_projection_with(&dist, s),
        Kind::Logit => logit_projection_with(&dist, s),
    }?;
    Ok((result, s))
}

fn resolve(t: &JointTable, event: &str, reference: &str) -> Result<(Event, Assignment), Failure> {
    let schema = t.schema();
    let event = Event::parse(schema, event).map_err(|e| Failure::usage(format!("--event: {e}")))?;
    let reference = schema
        .parse_assignment(reference)
        .map_err(|e| Failure::usage(format!("--reference: {e}")))?;
    let layout = StudyLayout::of(t)?;
    if reference.vars() != layout.x {
        return Err(Failure::usage(
            "--reference must fix every independent variable, e.g. \"treatment=control\"",
        ));
    }
    Ok((event, reference))
}

fn effects_on_both(
    doc: &mut ReportDocument,
    f: &JointTable,
    q: &JointTable,
    event: &str,
    reference: &str,
) -> Result<(), Failure> {
    let (event, reference) = resolve(f, event, reference)?;
    doc.empirical = Some(EffectReport::compute(
        f,
        event,
        &reference,
        Provenance::Empirical,
    )?);
    doc.hypothetical = Some(EffectReport::compute(
        q,
        event,
        &reference,
        Provenance::Hypothetical,
    )?);
    Ok(())
}

fn project(a: &ProjectArgs) -> Outcome {
    let (source, f) = load(&a.input)?;
    let (result, s) = fit(&f, &a.projection)?;
    let mut doc = ReportDocument::new(source, f.clone());
    if let (Some(event), Some(reference)) = (&a.effect.event, &a.effect.reference) {
        effects_on_both(&mut doc, &f, &result.q, event, reference)?;
    }
    doc.projection = Some((result, s));
    Ok((doc.render(), a.output.output.clone()))
}

fn metrics(a: &MetricsArgs) -> Outcome {
    let (source, f) = load(&a.input)?;
    let (event, reference) = resolve(&f, &a.effect.event, &a.effect.reference)?;
    let mut doc = ReportDocument::new(source, f.clone());
    doc.empirical = Some(EffectReport::compute(
        &f,
        event,
        &reference,
        Provenance::Empirical,
    )?);
    Ok((doc.render(), a.output.output.clone()))
}

fn replicate_config(
    f: &JointTable,
    q: &JointTable,
    r: &ReplicateArgs,
    replicates: usize,
    effect: Option<(Event, Assignment)>,
) -> Result<ReplicateConfig, Failure> {
    let n_subjects = match r.subjects {
        Some(n) => n,
        None => {
            let n = f.total();
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Failure::usage(
                    "table total is not a positive integer; pass --subjects",
                ));
            }
            n as u64
        }
    };
    let mut metrics = Metric::parity_suite(q)?;
    metrics.extend(Metric::realism_suite(q)?);
    if let Some((event, reference)) = effect {
        metrics.extend(Metric::intervention_suite(q, event, &reference)?);
    }
    let cfg = ReplicateConfig {
        n_subjects,
        n_replicates: replicates,
        seed: r.seed,
        metrics,
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn sample(a: &SampleArgs) -> Outcome {
    let (source, f) = load(&a.input)?;
    let effect = match (&a.effect.event, &a.effect.reference) {
        (Some(e), Some(r)) => Some(resolve(&f, e, r)?),
        _ => None,
    };
    let (result, s) = fit(&f, &a.projection)?;
    let cfg = replicate_config(&f, &result.q, &a.replicate, a.replicates, effect)?;
    let mut doc = ReportDocument::new(source, f);
    doc.fluctuation = Some(replicate_metrics(&result.q, &cfg)?);
    doc.projection = Some((result, s));
    Ok((doc.render(), a.output.output.clone()))
}

fn report(a: &ReportArgs) -> Outcome {
    let (source, f) = load(&a.input)?;
    let effect = resolve(&f, &a.effect.event, &a.effect.reference)?;
    let (result, s) = fit(&f, &a.projection)?;
    let mut doc = ReportDocument::new(source, f.clone());
    effects_on_both(
        &mut doc,
        &f,
        &result.q,
        &a.effect.event,
        &a.effect.reference,
    )?;
    if let Some(replicates) = a.replicates {
        let cfg = replicate_config(&f, &result.q, &a.replicate, replicates, Some(effect))?;
        doc.fluctuation = Some(replicate_metrics(&result.q, &cfg)?);
    }
    doc.projection = Some((result, s));
    Ok((doc.render(), a.output.output.clone()))
}
