//! End-to-end run: green check, enumeration, generation, execution and
//! manifest assembly.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::analysis::{config_digest, ManifestHeader, RunManifest};
use crate::execution::{
    list_tests, run_all, run_kill_matrix, verify_green_suite, Baseline, BuildConfig, CancelToken,
    ExecutionError, Executor, KillMatrix, MutantOutcome, Progress,
};
use crate::mutation::{
    enumerate_points, generate_mutants, Mutant, MutantId, MutationError, MutationOperator,
    MutationPoint,
};
use crate::project::{production_digest, read_source, ProjectError, SourceSelector};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Execution(#[from] ExecutionError),
}

/// Every mutant of the production code, in file then position order.
#[derive(Debug, Clone)]
pub struct Discovery {
    pub production_digest: String,
    pub files: Vec<String>,
    pub mutants: Vec<Mutant>,
}

impl Discovery {
    pub fn points(&self) -> HashMap<MutantId, MutationPoint> {
        self.mutants
            .iter()
            .map(|m| (m.id, m.point.clone()))
            .collect()
    }
}

pub fn discover(
    config: &BuildConfig,
    operators: &BTreeSet<MutationOperator>,
) -> Result<Discovery, PipelineError> {
    let selector = SourceSelector::new(&config.source_globs, &config.excluded_globs)?;
    let root = &config.project_root;
    let files = selector.select(root)?;
    let digest = production_digest(root, &selector)?;
    let mut mutants = Vec::new();
    for file in &files {
        let source = read_source(root, file)?;
        let points = enumerate_points(file, &source, operators);
        mutants.extend(generate_mutants(&points, &source)?);
    }
    Ok(Discovery {
        production_digest: digest,
        files,
        mutants,
    })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub label: String,
    pub operators: BTreeSet<MutationOperator>,
    pub matrix: bool,
    pub created_at: chrono::DateTime<chrono::Utc>,
    pub record_timing: bool,
}

#[derive(Debug)]
pub struct PipelineResult {
    pub manifest: RunManifest,
    pub matrix: Option<KillMatrix>,
    pub baseline: Baseline,
    /// Set when the run stopped early; the manifest is then partial.
    pub error: Option<ExecutionError>,
}

/// A red baseline, bad configuration or unreadable project is an `Err`.
/// Failures after the baseline yield a partial manifest instead.
pub fn run_pipeline(
    config: &BuildConfig,
    options: &RunOptions,
    executor: &dyn Executor,
    cancel: &CancelToken,
    progress: Progress<'_, MutantOutcome>,
) -> Result<PipelineResult, PipelineError> {
    config.validate()?;
    let discovery = discover(config, &options.operators)?;
    let baseline = verify_green_suite(config, executor)?;
    let run = run_all(
        &discovery.mutants,
        config,
        &baseline,
        executor,
        cancel,
        progress,
    );

    let mut error = run.error;
    let mut matrix = None;
    if options.matrix && error.is_none() {
        let result = list_tests(config, executor).and_then(|tests| {
            run_kill_matrix(
                &discovery.mutants,
                &tests,
                config,
                &baseline,
                executor,
                cancel,
            )
        });
        match result {
            Ok(m) => matrix = Some(m),
            Err(e) => error = Some(e),
        }
    }

    let manifest = RunManifest::build(
        ManifestHeader {
            label: options.label.clone(),
            created_at: options.created_at,
            config_digest: config_digest(config, &options.operators),
            production_digest: discovery.production_digest.clone(),
            operators: options.operators.clone(),
            partial: run.partial,
            record_timing: options.record_timing,
        },
        &discovery.points(),
        &run.outcomes,
    )
    .expect("outcomes come from the discovered mutants");
    Ok(PipelineResult {
        manifest,
        matrix,
        baseline,
        error,
    })
}

/// Kill matrix for a chosen subset of mutants, after a fresh green check.
pub fn matrix_for(
    config: &BuildConfig,
    operators: &BTreeSet<MutationOperator>,
    ids: &BTreeSet<MutantId>,
    executor: &dyn Executor,
    cancel: &CancelToken,
) -> Result<KillMatrix, PipelineError> {
    config.validate()?;
    if config.test_filter_template.is_none() {
        return Err(ExecutionError::Config(
            "tracing needs a per-test command (build.test_command) containing {TEST_ID}".into(),
        )
        .into());
    }
    let discovery = discover(config, operators)?;
    let selected: Vec<Mutant> = discovery
        .mutants
        .into_iter()
        .filter(|m| ids.contains(&m.id))
        .collect();
    let baseline = verify_green_suite(config, executor)?;
    let tests = list_tests(config, executor)?;
    if selected.is_empty() {
        return Ok(KillMatrix {
            tests,
            rows: Default::default(),
        });
    }
    Ok(run_kill_matrix(
        &selected, &tests, config, &baseline, executor, cancel,
    )?)
}
