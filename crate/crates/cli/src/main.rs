use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mutagate::execution::{CancelToken, ProcessExecutor};
use mutagate::report::Format;
use mutagate_cli::{
    cmd_diff, cmd_generate, cmd_init, cmd_report, cmd_run, cmd_trace, load_config, parse_operators,
    progress_line, CliError, RunArgs, TraceArgs, EXIT_ERROR, EXIT_OK,
};

/// Checks that a test refactoring preserved test behavior by comparing
/// mutation runs before and after it.
#[derive(Debug, Parser)]
#[command(name = "mutagate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a template mutagate.toml.
    Init {
        #[arg(default_value = ".")]
        root: PathBuf,
        /// Overwrite an existing config.
        #[arg(long)]
        force: bool,
    },
    /// List the mutants of the production code without running anything.
    Generate {
        #[arg(short, long, default_value = "mutagate.toml")]
        config: PathBuf,
        /// Comma-separated operator codes, e.g. AOR-B,ROR.
        #[arg(long, value_delimiter = ',')]
        operators: Option<Vec<String>>,
    },
    /// Run the mutation analysis and write a manifest.
    Run {
        #[arg(short, long, default_value = "mutagate.toml")]
        config: PathBuf,
        #[arg(long, default_value = "run")]
        label: String,
        /// Manifest path; defaults to <label>.manifest.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        operators: Option<Vec<String>>,
        #[arg(long)]
        workers: Option<usize>,
        /// Also record a per-test kill matrix next to the manifest.
        #[arg(long)]
        matrix: bool,
        /// Keep workspaces for inspection.
        #[arg(long)]
        keep: bool,
        /// Byte-identical manifests across reruns (no wall-clock data).
        /// Implied when SOURCE_DATE_EPOCH is set.
        #[arg(long)]
        reproducible: bool,
    },
    /// Compare two manifests. Exit 0 preserved, 1 changed, 2 incomparable.
    Diff {
        pre: PathBuf,
        post: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Find the tests responsible for each status flip.
    Trace {
        pre: PathBuf,
        post: PathBuf,
        /// Config (or directory holding it) of the pre-refactoring checkout.
        #[arg(long)]
        pre_config: PathBuf,
        /// Config (or directory holding it) of the post-refactoring checkout.
        #[arg(long)]
        post_config: PathBuf,
        /// Also trace mutants killed in both runs to find masked changes.
        #[arg(long)]
        masking: bool,
        #[arg(long, default_value = "text")]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Summarize one manifest.
    Report {
        manifest: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
    },
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn operators(
    list: Option<Vec<String>>,
) -> Result<Option<std::collections::BTreeSet<mutagate::mutation::MutationOperator>>, CliError> {
    list.map(|l| parse_operators(&l)).transpose()
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Init { root, force } => {
            let path = cmd_init(&root, force)?;
            eprintln!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Generate {
            config,
            operators: ops,
        } => {
            let config = load_config(&config)?;
            emit(&cmd_generate(&config, operators(ops)?.as_ref())?, None)?;
            Ok(EXIT_OK)
        }
        Command::Run {
            config,
            label,
            out,
            operators: ops,
            workers,
            matrix,
            keep,
            reproducible,
        } => {
            let config = load_config(&config)?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("{label}.manifest.json")));
            let args = RunArgs {
                label,
                out,
                operators: operators(ops)?,
                workers,
                matrix,
                keep,
                reproducible: reproducible || std::env::var_os("SOURCE_DATE_EPOCH").is_some(),
            };
            let cancel = CancelToken::new();
            let handler = cancel.clone();
            if let Err(e) = ctrlc::set_handler(move || {
                eprintln!(
                    "interrupt: finishing in-flight mutants, then writing a partial manifest"
                );
                handler.cancel();
            }) {
                eprintln!("warning: cannot install interrupt handler: {e}");
            }
            let summary = cmd_run(
                &config,
                &args,
                &mutagate::execution::ProcessExecutor,
                &cancel,
                &|o, done, total| {
                    eprintln!("{}", progress_line(o, done, total));
                },
            )?;
            emit(
                &mutagate::report::render_manifest(&summary.manifest, Format::Text),
                None,
            )?;
            eprintln!("wrote {}", summary.manifest_path.display());
            if let Some(p) = &summary.matrix_path {
                eprintln!("wrote {}", p.display());
            }
            if let Some(e) = &summary.error {
                eprintln!("error: run incomplete, manifest marked partial: {e}");
            }
            Ok(summary.exit_status)
        }
        Command::Diff {
            pre,
            post,
            format,
            output,
        } => {
            let (report, text) = cmd_diff(&pre, &post, format)?;
            emit(&text, output.as_ref())?;
            Ok(report.exit_status())
        }
        Command::Trace {
            pre,
            post,
            pre_config,
            post_config,
            masking,
            format,
            output,
        } => {
            let args = TraceArgs {
                pre_manifest: pre,
                post_manifest: post,
                pre_config,
                post_config,
                masking,
                format,
            };
            let cancel = CancelToken::new();
            let handler = cancel.clone();
            let _ = ctrlc::set_handler(move || handler.cancel());
            let outcome = cmd_trace(&args, &ProcessExecutor, &cancel)?;
            if let Some(n) = &outcome.notice {
                eprintln!("{n}");
            }
            emit(&outcome.rendered, output.as_ref())?;
            Ok(outcome.exit_status())
        }
        Command::Report { manifest, format } => {
            emit(&cmd_report(&manifest, format)?, None)?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mutagate: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
