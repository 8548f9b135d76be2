//! Command implementations behind the `mutagate` binary.

pub mod config;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mutagate::analysis::{read_manifest, write_manifest, ManifestError, RunManifest};
use mutagate::execution::{
    CancelToken, ExecutionError, Executor, KillMatrix, MutantOutcome, Progress,
};
use mutagate::mutation::{MutantId, MutationOperator};
use mutagate::pipeline::{discover, matrix_for, run_pipeline, PipelineError, RunOptions};
use mutagate::project::{production_digest, SourceSelector};
use mutagate::report::{render_manifest, render_report, Format};
use mutagate::safety_net::{diff_runs, trace_flips, DiffReport, Verdict};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{load_config, parse_operators, Config, CONFIG_FILE_NAME, TEMPLATE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHANGED: i32 = 1;
pub const EXIT_INCOMPARABLE: i32 = 2;
pub const EXIT_RED_BASELINE: i32 = 3;
pub const EXIT_ERROR: i32 = 4;
pub const EXIT_INTERRUPTED: i32 = 130;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Pipeline(PipelineError::Execution(e)) => match e {
                ExecutionError::RedBaseline { .. } | ExecutionError::BaselineTimeout(_) => {
                    EXIT_RED_BASELINE
                }
                ExecutionError::Interrupted => EXIT_INTERRUPTED,
                _ => EXIT_ERROR,
            },
            _ => EXIT_ERROR,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write a template config into `root`. Refuses to overwrite unless `force`.
pub fn cmd_init(root: &Path, force: bool) -> Result<PathBuf, CliError> {
    if !root.is_dir() {
        return Err(CliError::Config(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let path = root.join(CONFIG_FILE_NAME);
    if path.exists() && !force {
        return Err(CliError::Config(format!(
            "{} already exists; pass --force to overwrite it",
            path.display()
        )));
    }
    fs::write(&path, TEMPLATE).map_err(io_err(&path))?;
    Ok(path)
}

/// One line per mutant: short id, location, operator and replacement.
pub fn cmd_generate(
    config: &Config,
    operators: Option<&BTreeSet<MutationOperator>>,
) -> Result<String, CliError> {
    let ops = operators.unwrap_or(&config.operators);
    let discovery = discover(&config.build, ops)?;
    let mut out = String::new();
    for m in &discovery.mutants {
        let p = &m.point;
        let _ = writeln!(
            out,
            "{}  {}:{}  {:<5}  {:?} -> {:?}",
            m.id.short(),
            p.file,
            p.line,
            p.operator.code(),
            p.original,
            p.replacement
        );
    }
    let _ = writeln!(
        out,
        "{} mutants in {} production files",
        discovery.mutants.len(),
        discovery.files.len()
    );
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub label: String,
    pub out: PathBuf,
    pub operators: Option<BTreeSet<MutationOperator>>,
    pub workers: Option<usize>,
    pub matrix: bool,
    pub keep: bool,
    /// Zero timestamps and durations so reruns are byte-identical.
    pub reproducible: bool,
}

impl RunArgs {
    pub fn new(label: impl Into<String>, out: impl Into<PathBuf>) -> Self {
        RunArgs {
            label: label.into(),
            out: out.into(),
            operators: None,
            workers: None,
            matrix: false,
            keep: false,
            reproducible: false,
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub matrix_path: Option<PathBuf>,
    pub exit_status: i32,
    /// Why the run stopped early, if it did.
    pub error: Option<String>,
}

/// Kill matrix stored next to a manifest by `run --matrix`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub label: String,
    pub production_digest: String,
    pub matrix: KillMatrix,
}

pub fn matrix_path_for(manifest: &Path) -> PathBuf {
    let stem = manifest
        .file_stem()
        .map_or_else(|| "manifest".into(), |s| s.to_string_lossy().into_owned());
    manifest.with_file_name(format!("{stem}.matrix.json"))
}

fn reproducible_timestamp() -> chrono::DateTime<chrono::Utc> {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0).unwrap_or_default()
}

/// Green check, mutation run and manifest. A partial manifest is written
/// even when the run is interrupted.
pub fn cmd_run(
    config: &Config,
    args: &RunArgs,
    executor: &dyn Executor,
    cancel: &CancelToken,
    progress: Progress<'_, MutantOutcome>,
) -> Result<RunSummary, CliError> {
    let mut build = config.build.clone();
    if let Some(w) = args.workers {
        build.max_workers = w;
    }
    build.keep_workspaces |= args.keep;
    let options = RunOptions {
        label: args.label.clone(),
        operators: args
            .operators
            .clone()
            .unwrap_or_else(|| config.operators.clone()),
        matrix: args.matrix,
        created_at: if args.reproducible {
            reproducible_timestamp()
        } else {
            chrono::Utc::now()
        },
        record_timing: !args.reproducible,
    };
    let result = run_pipeline(&build, &options, executor, cancel, progress)?;
    write_manifest(&result.manifest, &args.out)?;

    let matrix_path = match result.matrix {
        Some(matrix) => {
            let path = matrix_path_for(&args.out);
            let file = MatrixFile {
                label: args.label.clone(),
                production_digest: result.manifest.production_digest.clone(),
                matrix,
            };
            let mut text = serde_json::to_string_pretty(&file).expect("matrix serializes");
            text.push('\n');
            fs::write(&path, text).map_err(io_err(&path))?;
            Some(path)
        }
        None => None,
    };
    let exit_status = match &result.error {
        None => EXIT_OK,
        Some(ExecutionError::Interrupted) => EXIT_INTERRUPTED,
        Some(_) => EXIT_ERROR,
    };
    Ok(RunSummary {
        manifest: result.manifest,
        manifest_path: args.out.clone(),
        matrix_path,
        exit_status,
        error: result.error.map(|e| e.to_string()),
    })
}

/// Returns the rendered report and the exit status for the verdict.
pub fn cmd_diff(pre: &Path, post: &Path, format: Format) -> Result<(DiffReport, String), CliError> {
    let pre = read_manifest(pre)?;
    let post = read_manifest(post)?;
    let report = diff_runs(&pre, &post);
    let text = render_report(&report, format);
    Ok((report, text))
}

#[derive(Debug, Clone)]
pub struct TraceArgs {
    pub pre_manifest: PathBuf,
    pub post_manifest: PathBuf,
    /// Configs of the two checkouts; each names its project root.
    pub pre_config: PathBuf,
    pub post_config: PathBuf,
    /// Also trace mutants killed in both runs, to find masked changes.
    pub masking: bool,
    pub format: Format,
}

#[derive(Debug)]
pub struct TraceOutcome {
    pub report: DiffReport,
    pub rendered: String,
    /// Set when there was nothing to trace.
    pub notice: Option<String>,
}

impl TraceOutcome {
    pub fn exit_status(&self) -> i32 {
        self.report.exit_status()
    }
}

/// Per-test kill matrices on both checkouts, restricted to the flipped
/// mutants (and, with `masking`, to mutants killed in both runs).
pub fn cmd_trace(
    args: &TraceArgs,
    executor: &dyn Executor,
    cancel: &CancelToken,
) -> Result<TraceOutcome, CliError> {
    let pre = read_manifest(&args.pre_manifest)?;
    let post = read_manifest(&args.post_manifest)?;
    let report = diff_runs(&pre, &post);
    if report.verdict == Verdict::Incomparable {
        let rendered = render_report(&report, args.format);
        return Ok(TraceOutcome {
            report,
            rendered,
            notice: Some("runs are incomparable; nothing to trace".into()),
        });
    }

    let mut ids: BTreeSet<MutantId> = report.flips.iter().map(|f| f.mutant_id).collect();
    if args.masking {
        ids.extend(
            pre.outcomes
                .iter()
                .filter(|r| r.status.is_kill())
                .filter(|r| {
                    post.outcome(&r.mutant_id)
                        .is_some_and(|p| p.status.is_kill())
                })
                .map(|r| r.mutant_id),
        );
    }
    if ids.is_empty() {
        let rendered = render_report(&report, args.format);
        return Ok(TraceOutcome {
            report,
            rendered,
            notice: Some(
                "no status flips; nothing to trace (pass --masking to look for masked changes)"
                    .into(),
            ),
        });
    }

    let pre_config = load_config(&args.pre_config)?;
    let post_config = load_config(&args.post_config)?;
    let pre_matrix = matrix_for_checkout(
        &pre_config,
        &pre,
        &args.pre_manifest,
        &ids,
        executor,
        cancel,
    )?;
    let post_matrix = matrix_for_checkout(
        &post_config,
        &post,
        &args.post_manifest,
        &ids,
        executor,
        cancel,
    )?;
    let report = trace_flips(report, &pre, &pre_matrix, &post_matrix);
    let rendered = render_report(&report, args.format);
    Ok(TraceOutcome {
        report,
        rendered,
        notice: None,
    })
}

fn matrix_for_checkout(
    config: &Config,
    manifest: &RunManifest,
    manifest_path: &Path,
    ids: &BTreeSet<MutantId>,
    executor: &dyn Executor,
    cancel: &CancelToken,
) -> Result<KillMatrix, CliError> {
    let build = &config.build;
    let selector = SourceSelector::new(&build.source_globs, &build.excluded_globs)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let digest = production_digest(&build.project_root, &selector)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if digest != manifest.production_digest {
        return Err(CliError::Config(format!(
            "checkout {} does not match manifest {:?}: production digests differ",
            build.project_root.display(),
            manifest.label
        )));
    }

    let stored = matrix_path_for(manifest_path);
    if let Ok(text) = fs::read_to_string(&stored) {
        if let Ok(file) = serde_json::from_str::<MatrixFile>(&text) {
            if file.production_digest == manifest.production_digest
                && ids.iter().all(|id| file.matrix.rows.contains_key(id))
            {
                return Ok(file.matrix);
            }
        }
    }
    let operators: BTreeSet<MutationOperator> = manifest.operators.iter().copied().collect();
    Ok(matrix_for(build, &operators, ids, executor, cancel)?)
}

/// Coverage summary of a single manifest.
pub fn cmd_report(manifest: &Path, format: Format) -> Result<String, CliError> {
    let manifest = read_manifest(manifest)?;
    Ok(render_manifest(&manifest, format))
}

/// Progress line for one finished mutant.
pub fn progress_line(outcome: &MutantOutcome, done: usize, total: usize) -> String {
    format!(
        "[{done}/{total}] {:<9} {} ({} ms)",
        outcome.status.as_str(),
        outcome.mutant_id.short(),
        outcome.duration.as_millis()
    )
}
