//! Running the user's build against mutants.
//!
//! The only contract with the build is its exit status: zero when every test
//! passes, non-zero otherwise. Each mutant runs inside a private copy of the
//! project so the user's tree is never touched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mutation::{Mutant, MutantId};
use crate::project::{self, ProjectError};

/// Environment variable relocating the directory that holds workspaces.
pub const WORKDIR_ENV: &str = "MUTAGATE_WORKDIR";

/// Placeholder substituted with a test id in the per-test command.
pub const TEST_ID_PLACEHOLDER: &str = "{TEST_ID}";

/// Compiler-error markers used when no stillborn patterns are configured.
pub const DEFAULT_STILLBORN_PATTERNS: &[&str] = &[
    // gcc, clang, javac: path:line[:col]: error:
    r"(?m)^\S+:\d+(:\d+)?: (fatal )?error:",
    // rustc
    r"(?m)^error(\[E\d+\])?: ",
    // maven, gradle
    r"COMPILATION ERROR",
    r"Compilation failed",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommandSpec {
    /// Executed directly, no shell involved.
    Argv(Vec<String>),
    /// Executed through `sh -c`.
    Shell(String),
}

impl CommandSpec {
    pub fn program(&self) -> &str {
        match self {
            CommandSpec::Argv(argv) => argv.first().map_or("", String::as_str),
            CommandSpec::Shell(_) => "sh",
        }
    }

    pub fn has_test_placeholder(&self) -> bool {
        match self {
            CommandSpec::Argv(argv) => argv.iter().any(|a| a.contains(TEST_ID_PLACEHOLDER)),
            CommandSpec::Shell(s) => s.contains(TEST_ID_PLACEHOLDER),
        }
    }

    /// Substitute `{TEST_ID}`. In shell mode the id is single-quoted.
    pub fn with_test_id(&self, test_id: &str) -> CommandSpec {
        match self {
            CommandSpec::Argv(argv) => CommandSpec::Argv(
                argv.iter()
                    .map(|a| a.replace(TEST_ID_PLACEHOLDER, test_id))
                    .collect(),
            ),
            CommandSpec::Shell(s) => {
                let quoted = format!("'{}'", test_id.replace('\'', r"'\''"));
                CommandSpec::Shell(s.replace(TEST_ID_PLACEHOLDER, &quoted))
            }
        }
    }
}

impl fmt::Display for CommandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandSpec::Argv(argv) => f.write_str(&argv.join(" ")),
            CommandSpec::Shell(s) => write!(f, "sh -c {s:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub project_root: PathBuf,
    /// Runs the whole test suite; working directory is the workspace root.
    pub build_command: CommandSpec,
    /// Runs one test; must contain `{TEST_ID}`.
    pub test_filter_template: Option<CommandSpec>,
    /// Prints one test id per line.
    pub test_list_command: Option<CommandSpec>,
    pub timeout_factor: f64,
    pub timeout_floor: Duration,
    pub max_workers: usize,
    pub source_globs: Vec<String>,
    pub excluded_globs: Vec<String>,
    /// Regexes over build output that mark a failing mutant as stillborn.
    pub stillborn_patterns: Vec<String>,
    /// Added on top of the inherited environment.
    pub env: BTreeMap<String, String>,
    /// Overrides `MUTAGATE_WORKDIR` and the system temp dir.
    pub workdir: Option<PathBuf>,
    pub keep_workspaces: bool,
    pub log_lines: usize,
}

impl BuildConfig {
    pub fn new(project_root: impl Into<PathBuf>, build_command: CommandSpec) -> Self {
        BuildConfig {
            project_root: project_root.into(),
            build_command,
            test_filter_template: None,
            test_list_command: None,
            timeout_factor: 4.0,
            timeout_floor: Duration::from_secs(10),
            max_workers: thread::available_parallelism().map_or(1, |n| n.get()),
            source_globs: Vec::new(),
            excluded_globs: Vec::new(),
            stillborn_patterns: DEFAULT_STILLBORN_PATTERNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            env: BTreeMap::new(),
            workdir: None,
            keep_workspaces: false,
            log_lines: 20,
        }
    }

    pub fn validate(&self) -> Result<(), ExecutionError> {
        let bad = |msg: String| Err(ExecutionError::Config(msg));
        if !self.project_root.is_dir() {
            return bad(format!(
                "project root {} is not a directory",
                self.project_root.display()
            ));
        }
        match &self.build_command {
            CommandSpec::Argv(argv) if argv.is_empty() => {
                return bad("build command is empty".into())
            }
            CommandSpec::Shell(s) if s.trim().is_empty() => {
                return bad("build command is empty".into())
            }
            _ => {}
        }
        if !(self.timeout_factor.is_finite() && self.timeout_factor > 0.0) {
            return bad(format!(
                "timeout factor must be positive, got {}",
                self.timeout_factor
            ));
        }
        if self.max_workers == 0 {
            return bad("max workers must be at least 1".into());
        }
        if let Some(t) = &self.test_filter_template {
            if !t.has_test_placeholder() {
                return bad(format!(
                    "test command {t} lacks the {TEST_ID_PLACEHOLDER} placeholder"
                ));
            }
        }
        self.stillborn_matchers()?;
        Ok(())
    }

    pub fn stillborn_matchers(&self) -> Result<Vec<Regex>, ExecutionError> {
        self.stillborn_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|e| {
                    ExecutionError::Config(format!("bad stillborn pattern {p:?}: {e}"))
                })
            })
            .collect()
    }

    /// `max(floor, factor × baseline)`.
    pub fn timeout_for(&self, baseline: &Baseline) -> Duration {
        let scaled = baseline.duration.mul_f64(self.timeout_factor);
        scaled.max(self.timeout_floor)
    }

    fn workspace_base(&self) -> PathBuf {
        self.workdir
            .clone()
            .or_else(|| std::env::var_os(WORKDIR_ENV).map(PathBuf::from))
            .unwrap_or_else(std::env::temp_dir)
    }
}

#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("command not found: {0}")]
    CommandNotFound(String),
    #[error("baseline not green; mutation analysis is meaningless (exit {}):\n{log}", fmt_exit(*.exit_code))]
    RedBaseline { exit_code: Option<i32>, log: String },
    #[error("baseline timed out after {0:?}")]
    BaselineTimeout(Duration),
    #[error("workspace error: {0}")]
    Workspace(#[from] ProjectError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("interrupted")]
    Interrupted,
}

fn fmt_exit(code: Option<i32>) -> String {
    code.map_or_else(|| "signal".to_string(), |c| c.to_string())
}

/// Result of running one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecResult {
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub output: String,
    pub duration: Duration,
}

impl ExecResult {
    pub fn success(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExecRequest<'a> {
    pub command: &'a CommandSpec,
    pub cwd: &'a Path,
    pub env: &'a BTreeMap<String, String>,
    pub timeout: Option<Duration>,
}

/// Something that can run a build command in a directory.
pub trait Executor: Sync {
    fn execute(&self, request: &ExecRequest<'_>) -> Result<ExecResult, ExecutionError>;
}

/// Spawns real processes, each in its own process group so a timeout can
/// kill the whole build tree.
#[derive(Debug, Default, Clone, Copy)]
pub struct ProcessExecutor;

impl Executor for ProcessExecutor {
    fn execute(&self, request: &ExecRequest<'_>) -> Result<ExecResult, ExecutionError> {
        let mut cmd = match request.command {
            CommandSpec::Argv(argv) => {
                let (program, args) = argv
                    .split_first()
                    .ok_or_else(|| ExecutionError::Config("empty command".into()))?;
                let mut c = Command::new(program);
                c.args(args);
                c
            }
            CommandSpec::Shell(script) => {
                let mut c = Command::new("sh");
                c.arg("-c").arg(script);
                c
            }
        };
        cmd.current_dir(request.cwd)
            .envs(request.env)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }

        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => {
                ExecutionError::CommandNotFound(request.command.program().to_string())
            }
            _ => ExecutionError::Io(e),
        })?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let mut timed_out = false;
        let mut pause = Duration::from_millis(1);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if request.timeout.is_some_and(|t| started.elapsed() >= t) {
                kill_tree(&mut child);
                timed_out = true;
                break child.wait()?;
            }
            thread::sleep(pause);
            pause = (pause * 2).min(Duration::from_millis(25));
        };
        let duration = started.elapsed();
        // Reap stragglers still holding the pipes open.
        kill_tree(&mut child);

        let mut output = String::from_utf8_lossy(&stdout.join().unwrap_or_default()).into_owned();
        output.push_str(&String::from_utf8_lossy(&stderr.join().unwrap_or_default()));
        Ok(ExecResult {
            exit_code: if timed_out { None } else { status.code() },
            timed_out,
            output,
            duration,
        })
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut pipe) = pipe {
            let _ = pipe.read_to_end(&mut buf);
        }
        buf
    })
}

#[cfg(unix)]
fn kill_tree(child: &mut std::process::Child) {
    // The child leads its own process group.
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_tree(child: &mut std::process::Child) {
    let _ = child.kill();
}

/// Measured duration of a green baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Baseline {
    pub duration: Duration,
}

/// A private copy of the project tree.
pub struct Workspace {
    dir: Option<tempfile::TempDir>,
    root: PathBuf,
}

impl Workspace {
    pub fn create(config: &BuildConfig) -> Result<Self, ExecutionError> {
        let base = config.workspace_base();
        fs::create_dir_all(&base)?;
        let dir = tempfile::Builder::new()
            .prefix("mutagate-")
            .tempdir_in(&base)?;
        let root = dir.path().join("project");
        project::copy_tree(&config.project_root, &root)?;
        Ok(Workspace {
            dir: Some(dir),
            root,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Keep the directory on disk and return its path.
    pub fn persist(mut self) -> PathBuf {
        let dir = self.dir.take().expect("workspace dir present");
        dir.keep()
    }

    fn finish(self, keep: bool) -> Option<PathBuf> {
        keep.then(|| self.persist())
    }

    fn run(
        &self,
        executor: &dyn Executor,
        command: &CommandSpec,
        config: &BuildConfig,
        timeout: Option<Duration>,
    ) -> Result<ExecResult, ExecutionError> {
        executor.execute(&ExecRequest {
            command,
            cwd: &self.root,
            env: &config.env,
            timeout,
        })
    }

    /// Write the mutant, run `f`, then restore the original file.
    fn with_mutant<T>(
        &self,
        mutant: &Mutant,
        f: impl FnOnce() -> Result<T, ExecutionError>,
    ) -> Result<T, ExecutionError> {
        let target = self.root.join(&mutant.point.file);
        let pristine = fs::read(&target)?;
        fs::write(&target, &mutant.mutated_source)?;
        let result = f();
        fs::write(&target, pristine)?;
        result
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MutantStatus {
    Killed,
    Survived,
    TimedOut,
    Stillborn,
}

impl MutantStatus {
    /// Counts towards killed in coverage (timeouts included).
    pub fn is_kill(self) -> bool {
        matches!(self, MutantStatus::Killed | MutantStatus::TimedOut)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MutantStatus::Killed => "KILLED",
            MutantStatus::Survived => "SURVIVED",
            MutantStatus::TimedOut => "TIMED_OUT",
            MutantStatus::Stillborn => "STILLBORN",
        }
    }
}

impl fmt::Display for MutantStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutantOutcome {
    pub mutant_id: MutantId,
    pub status: MutantStatus,
    pub exit_code: Option<i32>,
    pub duration: Duration,
    pub log_excerpt: String,
}

pub fn classify(result: &ExecResult, stillborn: &[Regex]) -> MutantStatus {
    if result.timed_out {
        MutantStatus::TimedOut
    } else if result.exit_code == Some(0) {
        MutantStatus::Survived
    } else if stillborn.iter().any(|re| re.is_match(&result.output)) {
        MutantStatus::Stillborn
    } else {
        MutantStatus::Killed
    }
}

pub fn tail_lines(text: &str, n: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(n)..].join("\n")
}

/// Run the build on an unmutated copy. Fails unless every test passes.
pub fn verify_green_suite(
    config: &BuildConfig,
    executor: &dyn Executor,
) -> Result<Baseline, ExecutionError> {
    config.validate()?;
    let ws = Workspace::create(config)?;
    // No timeout on the baseline: there is nothing to scale from yet.
    let result = ws.run(executor, &config.build_command, config, None)?;
    ws.finish(config.keep_workspaces);
    if !result.success() {
        return Err(ExecutionError::RedBaseline {
            exit_code: result.exit_code,
            log: tail_lines(&result.output, config.log_lines),
        });
    }
    Ok(Baseline {
        duration: result.duration,
    })
}

fn run_in(
    ws: &Workspace,
    mutant: &Mutant,
    config: &BuildConfig,
    timeout: Duration,
    stillborn: &[Regex],
    executor: &dyn Executor,
) -> Result<MutantOutcome, ExecutionError> {
    let result = ws.with_mutant(mutant, || {
        ws.run(executor, &config.build_command, config, Some(timeout))
    })?;
    Ok(MutantOutcome {
        mutant_id: mutant.id,
        status: classify(&result, stillborn),
        exit_code: result.exit_code,
        duration: result.duration,
        log_excerpt: tail_lines(&result.output, config.log_lines),
    })
}

/// Run one mutant in a fresh workspace of its own.
pub fn run_mutant(
    mutant: &Mutant,
    config: &BuildConfig,
    baseline: &Baseline,
    executor: &dyn Executor,
) -> Result<MutantOutcome, ExecutionError> {
    let stillborn = config.stillborn_matchers()?;
    let ws = Workspace::create(config)?;
    let outcome = run_in(
        &ws,
        mutant,
        config,
        config.timeout_for(baseline),
        &stillborn,
        executor,
    );
    ws.finish(config.keep_workspaces);
    outcome
}

/// Cooperative cancellation shared between the coordinator and workers.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Sorted by mutant id.
    pub outcomes: Vec<MutantOutcome>,
    /// Some mutants never ran (interrupt or infrastructure failure).
    pub partial: bool,
    pub error: Option<ExecutionError>,
    pub no_mutable_code: bool,
}

/// Called once per finished item with (done, total).
pub type Progress<'a, T> = &'a (dyn Fn(&T, usize, usize) + Sync);

/// Run every mutant on up to `max_workers` workers.
///
/// Each worker owns one workspace and restores the mutated file after every
/// mutant. On an infrastructure error or cancellation, in-flight mutants are
/// allowed to finish and the result is marked partial.
pub fn run_all(
    mutants: &[Mutant],
    config: &BuildConfig,
    baseline: &Baseline,
    executor: &dyn Executor,
    cancel: &CancelToken,
    progress: Progress<'_, MutantOutcome>,
) -> RunOutcome {
    let stillborn = match config.stillborn_matchers() {
        Ok(s) => s,
        Err(e) => {
            return RunOutcome {
                outcomes: Vec::new(),
                partial: !mutants.is_empty(),
                error: Some(e),
                no_mutable_code: mutants.is_empty(),
            }
        }
    };
    let timeout = config.timeout_for(baseline);
    let results = parallel_map(
        mutants,
        config,
        cancel,
        |ws, mutant| run_in(ws, mutant, config, timeout, &stillborn, executor),
        progress,
    );
    let mut outcomes = results.done;
    outcomes.sort_by_key(|o| o.mutant_id);
    RunOutcome {
        partial: outcomes.len() != mutants.len(),
        outcomes,
        error: results.error,
        no_mutable_code: mutants.is_empty(),
    }
}

struct ParallelResults<T> {
    done: Vec<T>,
    error: Option<ExecutionError>,
}

fn parallel_map<T: Send>(
    mutants: &[Mutant],
    config: &BuildConfig,
    cancel: &CancelToken,
    job: impl Fn(&Workspace, &Mutant) -> Result<T, ExecutionError> + Sync,
    progress: Progress<'_, T>,
) -> ParallelResults<T> {
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let done = Mutex::new(Vec::with_capacity(mutants.len()));
    let error = Mutex::new(None);
    let workers = config.max_workers.clamp(1, mutants.len().max(1));

    let record_error = |e: ExecutionError| {
        failed.store(true, Ordering::SeqCst);
        error.lock().unwrap().get_or_insert(e);
    };

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut workspace: Option<Workspace> = None;
                loop {
                    if cancel.is_cancelled() || failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(mutant) = mutants.get(i) else { break };
                    let ws = match &workspace {
                        Some(ws) => ws,
                        None => match Workspace::create(config) {
                            Ok(ws) => workspace.insert(ws),
                            Err(e) => {
                                record_error(e);
                                break;
                            }
                        },
                    };
                    match job(ws, mutant) {
                        Ok(item) => {
                            let mut done = done.lock().unwrap();
                            progress(&item, done.len() + 1, mutants.len());
                            done.push(item);
                        }
                        Err(e) => {
                            record_error(e);
                            break;
                        }
                    }
                }
                if let Some(ws) = workspace {
                    ws.finish(config.keep_workspaces);
                }
            });
        }
    });

    let mut error = error.into_inner().unwrap();
    if error.is_none() && cancel.is_cancelled() {
        error = Some(ExecutionError::Interrupted);
    }
    ParallelResults {
        done: done.into_inner().unwrap(),
        error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestVerdict {
    Pass,
    Fail,
    TimedOut,
}

impl fmt::Display for TestVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestVerdict::Pass => "PASS",
            TestVerdict::Fail => "FAIL",
            TestVerdict::TimedOut => "TIMED_OUT",
        })
    }
}

/// Per-(mutant, test) verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KillMatrix {
    pub tests: Vec<String>,
    pub rows: BTreeMap<MutantId, BTreeMap<String, TestVerdict>>,
}

impl KillMatrix {
    /// Some(true) iff any cell in the row is FAIL.
    pub fn killed(&self, id: &MutantId) -> Option<bool> {
        self.rows
            .get(id)
            .map(|row| row.values().any(|v| *v == TestVerdict::Fail))
    }

    pub fn row(&self, id: &MutantId) -> Option<&BTreeMap<String, TestVerdict>> {
        self.rows.get(id)
    }

    /// Tests whose cell is FAIL for this mutant.
    pub fn killers(&self, id: &MutantId) -> BTreeSet<&str> {
        self.rows.get(id).map_or_else(BTreeSet::new, |row| {
            row.iter()
                .filter(|(_, v)| **v == TestVerdict::Fail)
                .map(|(t, _)| t.as_str())
                .collect()
        })
    }
}

/// Ids printed by the configured test-list command, run on a clean copy.
pub fn list_tests(
    config: &BuildConfig,
    executor: &dyn Executor,
) -> Result<Vec<String>, ExecutionError> {
    let command = config.test_list_command.as_ref().ok_or_else(|| {
        ExecutionError::Config("no test list command configured (build.test_list_command)".into())
    })?;
    let ws = Workspace::create(config)?;
    let result = ws.run(executor, command, config, None)?;
    ws.finish(config.keep_workspaces);
    if !result.success() {
        return Err(ExecutionError::Config(format!(
            "test list command {command} failed (exit {}):\n{}",
            fmt_exit(result.exit_code),
            tail_lines(&result.output, config.log_lines)
        )));
    }
    let mut tests: Vec<String> = result
        .output
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    tests.dedup();
    Ok(tests)
}

/// Run every test separately against every mutant.
pub fn run_kill_matrix(
    mutants: &[Mutant],
    tests: &[String],
    config: &BuildConfig,
    baseline: &Baseline,
    executor: &dyn Executor,
    cancel: &CancelToken,
) -> Result<KillMatrix, ExecutionError> {
    let template = config.test_filter_template.as_ref().ok_or_else(|| {
        ExecutionError::Config(
            "kill-matrix mode needs a per-test command (build.test_command) containing {TEST_ID}"
                .into(),
        )
    })?;
    if !template.has_test_placeholder() {
        return Err(ExecutionError::Config(format!(
            "test command {template} lacks the {TEST_ID_PLACEHOLDER} placeholder"
        )));
    }
    if tests.is_empty() {
        return Err(ExecutionError::Config(
            "kill matrix needs at least one test id".into(),
        ));
    }
    let timeout = config.timeout_for(baseline);
    let rows = parallel_map(
        mutants,
        config,
        cancel,
        |ws, mutant| {
            ws.with_mutant(mutant, || {
                let mut row = BTreeMap::new();
                for test in tests {
                    let result = ws.run(
                        executor,
                        &template.with_test_id(test),
                        config,
                        Some(timeout),
                    )?;
                    let verdict = if result.timed_out {
                        TestVerdict::TimedOut
                    } else if result.exit_code == Some(0) {
                        TestVerdict::Pass
                    } else {
                        TestVerdict::Fail
                    };
                    row.insert(test.clone(), verdict);
                }
                Ok((mutant.id, row))
            })
        },
        &|_, _, _| {},
    );
    if let Some(e) = rows.error {
        return Err(e);
    }
    Ok(KillMatrix {
        tests: tests.to_vec(),
        rows: rows.done.into_iter().collect(),
    })
}

/// Executor driven by a closure, for tests that must not spawn processes.
///
/// The closure sees the workspace root (with the mutant already written) and
/// the command, and decides the result.
pub struct ScriptedExecutor<F>(pub F);

impl<F> Executor for ScriptedExecutor<F>
where
    F: Fn(&Path, &CommandSpec) -> ExecResult + Sync,
{
    fn execute(&self, request: &ExecRequest<'_>) -> Result<ExecResult, ExecutionError> {
        let mut result = (self.0)(request.cwd, request.command);
        if let Some(timeout) = request.timeout {
            if result.duration > timeout {
                result.timed_out = true;
                result.exit_code = None;
                result.duration = timeout;
            }
        }
        Ok(result)
    }
}

impl ExecResult {
    pub fn exited(code: i32, output: impl Into<String>) -> Self {
        ExecResult {
            exit_code: Some(code),
            timed_out: false,
            output: output.into(),
            duration: Duration::from_millis(1),
        }
    }
}
