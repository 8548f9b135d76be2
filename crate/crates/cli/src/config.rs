//! `mutagate.toml` loading.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use mutagate::execution::{BuildConfig, CommandSpec, DEFAULT_STILLBORN_PATTERNS};
use mutagate::mutation::MutationOperator;
use serde::Deserialize;

use crate::CliError;

pub const CONFIG_FILE_NAME: &str = "mutagate.toml";

pub const TEMPLATE: &str = r#"# mutagate configuration.
# Paths are relative to this file.

[project]
# Project root; defaults to the directory holding this file.
# root = "."
# Production code to mutate.
sources = ["src/**/*.c"]
# Never mutated; exclusion wins over `sources`. List your test code here.
exclude = ["test/**", "tests/**", "build/**"]

[build]
# Builds the project and runs the whole test suite. Exit 0 means all tests
# passed. A string runs through `sh -c`; an array runs directly.
command = ["make", "test"]
# Runs a single test; `{TEST_ID}` is replaced by the test id. Needed for
# `mutagate trace` and `mutagate run --matrix`.
# test_command = ["make", "test", "TEST={TEST_ID}"]
# Prints one test id per line.
# test_list_command = ["make", "list-tests"]
# Regexes over build output that mark a failing mutant as stillborn
# (did not compile). Defaults cover gcc, clang, javac and rustc.
# stillborn_patterns = ['(?m)^\S+:\d+(:\d+)?: (fatal )?error:']
# Extra environment variables for every command.
# env = { CFLAGS = "-O0" }

[run]
# Per-mutant timeout is max(timeout_floor_secs, timeout_factor * baseline).
timeout_factor = 4.0
timeout_floor_secs = 10
# Parallel workspaces; defaults to the number of CPUs.
# workers = 4
# Operators to apply; defaults to all nine.
# operators = ["AOR-B", "AOR-S", "AOR-U", "LOR", "SOR", "ROR", "COR", "COD", "SAOR"]
# Where workspaces are created; MUTAGATE_WORKDIR or the system temp dir otherwise.
# workdir = "/tmp/mutagate"
# Lines of build output kept per failure.
# log_lines = 20
"#;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    project: ProjectSection,
    build: BuildSection,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectSection {
    root: Option<PathBuf>,
    sources: Vec<String>,
    #[serde(default)]
    exclude: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildSection {
    command: CommandSpec,
    test_command: Option<CommandSpec>,
    test_list_command: Option<CommandSpec>,
    stillborn_patterns: Option<Vec<String>>,
    #[serde(default)]
    env: BTreeMap<String, String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    timeout_factor: Option<f64>,
    timeout_floor_secs: Option<f64>,
    workers: Option<usize>,
    operators: Option<Vec<String>>,
    workdir: Option<PathBuf>,
    log_lines: Option<usize>,
}

/// A parsed configuration with paths resolved.
#[derive(Debug, Clone)]
pub struct Config {
    pub path: PathBuf,
    pub build: BuildConfig,
    pub operators: BTreeSet<MutationOperator>,
}

/// Accepts the config file itself or a directory containing `mutagate.toml`.
pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let path = if path.is_dir() {
        path.join(CONFIG_FILE_NAME)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<Config, CliError> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let root = file
        .project
        .root
        .as_deref()
        .map_or_else(|| base.to_path_buf(), resolve);
    let mut build = BuildConfig::new(root, file.build.command);
    build.source_globs = file.project.sources;
    build.excluded_globs = file.project.exclude;
    build.test_filter_template = file.build.test_command;
    build.test_list_command = file.build.test_list_command;
    build.stillborn_patterns = file.build.stillborn_patterns.unwrap_or_else(|| {
        DEFAULT_STILLBORN_PATTERNS
            .iter()
            .map(|s| s.to_string())
            .collect()
    });
    build.env = file.build.env;
    let run = file.run;
    if let Some(f) = run.timeout_factor {
        build.timeout_factor = f;
    }
    if let Some(secs) = run.timeout_floor_secs {
        build.timeout_floor = Duration::try_from_secs_f64(secs).map_err(|_| {
            CliError::Config(format!(
                "run.timeout_floor_secs must be a non-negative number, got {secs}"
            ))
        })?;
    }
    if let Some(w) = run.workers {
        build.max_workers = w;
    }
    build.workdir = run.workdir.as_deref().map(resolve);
    if let Some(n) = run.log_lines {
        build.log_lines = n;
    }
    let operators = match run.operators {
        Some(list) => parse_operators(&list)?,
        None => MutationOperator::all(),
    };
    build
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Config {
        path: path.to_path_buf(),
        build,
        operators,
    })
}

pub fn parse_operators<S: AsRef<str>>(list: &[S]) -> Result<BTreeSet<MutationOperator>, CliError> {
    let ops = list
        .iter()
        .map(|s| s.as_ref().trim().parse::<MutationOperator>())
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if ops.is_empty() {
        return Err(CliError::Config("operator list is empty".into()));
    }
    Ok(ops)
}
