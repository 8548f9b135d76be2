//! Rendering diff reports and run summaries.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{CoverageSummary, RunManifest};
use crate::safety_net::{DiffReport, FlipKind, Verdict};

pub const REPORT_VERSION: u32 = 1;
const BAR_WIDTH: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Markdown,
    Machine,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown report format {0:?} (expected text, markdown or machine)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "markdown" | "md" => Ok(Format::Markdown),
            "machine" | "json" => Ok(Format::Machine),
            _ => Err(UnknownFormat(s.to_string())),
        }
    }
}

/// Machine-format envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineReport {
    pub report_version: u32,
    pub exit_status: i32,
    pub report: DiffReport,
}

#[derive(Debug, Error)]
pub enum ReportParseError {
    #[error("malformed report: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported report version {0}")]
    UnsupportedVersion(u32),
}

pub fn parse_machine_report(text: &str) -> Result<DiffReport, ReportParseError> {
    let envelope: MachineReport = serde_json::from_str(text)?;
    if envelope.report_version != REPORT_VERSION {
        return Err(ReportParseError::UnsupportedVersion(
            envelope.report_version,
        ));
    }
    Ok(envelope.report)
}

/// `[########............]`, proportional to coverage; dots for n/a.
pub fn bar(summary: &CoverageSummary) -> String {
    let filled = match summary.per_mille() {
        Some(pm) => (pm * BAR_WIDTH + 500) / 1000,
        None => 0,
    };
    let mut s = String::from("[");
    for i in 0..BAR_WIDTH {
        s.push(if i < filled { '#' } else { '.' });
    }
    s.push(']');
    s
}

fn verdict_line(report: &DiffReport) -> String {
    let masked = report.trace.as_ref().map_or(0, |t| t.masked.len());
    let mut line = match report.verdict {
        Verdict::Preserved => "PRESERVED: behavior preserved".to_string(),
        Verdict::Changed => "CHANGED: test behavior changed".to_string(),
        Verdict::Incomparable => "INCOMPARABLE: runs cannot be compared".to_string(),
    };
    if masked > 0 {
        let _ = write!(
            line,
            " at the aggregate level, but {masked} masked behavior change(s) found by tracing"
        );
    }
    line
}

fn kind_label(kind: FlipKind) -> &'static str {
    match kind {
        FlipKind::Behavior => "",
        FlipKind::Timing => " (timing-related)",
        FlipKind::StillbornAnomaly => " (stillborn anomaly)",
    }
}

fn mutation_text(original: &str, replacement: &str) -> String {
    if replacement.is_empty() {
        format!("delete `{original}`")
    } else {
        format!("`{original}` -> `{replacement}`")
    }
}

pub fn render_report(report: &DiffReport, format: Format) -> String {
    match format {
        Format::Text => render_text(report),
        Format::Markdown => render_markdown(report),
        Format::Machine => {
            let envelope = MachineReport {
                report_version: REPORT_VERSION,
                exit_status: report.exit_status(),
                report: report.clone(),
            };
            let mut s = serde_json::to_string_pretty(&envelope).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn render_text(r: &DiffReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "verdict: {}", verdict_line(r));
    let _ = writeln!(out, "compared: {} -> {}", r.pre_label, r.post_label);
    if r.partial_data {
        let _ = writeln!(out, "warning: partial data, a run did not complete");
    }
    for note in &r.notes {
        let _ = writeln!(out, "note: {note}");
    }

    if !r.flips.is_empty() {
        let _ = writeln!(out, "\nstatus flips ({}):", r.flips.len());
        for f in &r.flips {
            let _ = writeln!(
                out,
                "  {}:{}  {}  {}  {} -> {}{}  [{}]",
                f.file,
                f.line,
                f.operator,
                mutation_text(&f.original, &f.replacement),
                f.pre_status,
                f.post_status,
                kind_label(f.kind),
                f.mutant_id.short()
            );
            if let Some(t) = r
                .trace
                .as_ref()
                .and_then(|t| t.flips.iter().find(|t| t.mutant_id == f.mutant_id))
            {
                if t.untraced {
                    let _ = writeln!(out, "      untraced: no kill-matrix row on one side");
                } else if t.implicated.is_empty() {
                    let _ = writeln!(
                        out,
                        "      no shared test changed verdict (see renamed tests)"
                    );
                } else {
                    for c in &t.implicated {
                        let _ = writeln!(
                            out,
                            "      implicated test: {} ({} -> {})",
                            c.test, c.pre, c.post
                        );
                    }
                }
            }
        }
    }

    if let Some(t) = &r.trace {
        if !t.masked.is_empty() {
            let _ = writeln!(out, "\nmasked behavior changes ({}):", t.masked.len());
            for m in &t.masked {
                let _ = writeln!(
                    out,
                    "  {}:{}  {}  {}  still {}  [{}]",
                    m.file,
                    m.line,
                    m.operator,
                    mutation_text(&m.original, &m.replacement),
                    m.status,
                    m.mutant_id.short()
                );
                for c in &m.changed {
                    let _ = writeln!(
                        out,
                        "      test changed: {} ({} -> {})",
                        c.test, c.pre, c.post
                    );
                }
            }
        }
        if !t.tests_only_in_pre.is_empty() || !t.tests_only_in_post.is_empty() {
            let _ = writeln!(
                out,
                "\nunmatched tests (renamed, added or removed): pre-only [{}], post-only [{}]",
                t.tests_only_in_pre.join(", "),
                t.tests_only_in_post.join(", ")
            );
        }
    }

    if !r.unmatched.is_empty() {
        let _ = writeln!(
            out,
            "\nunmatched mutants: {} only in {}, {} only in {}",
            r.unmatched.only_in_pre.len(),
            r.pre_label,
            r.unmatched.only_in_post.len(),
            r.post_label
        );
    }

    if let Some(cov) = &r.coverage_delta {
        let width = cov
            .per_file
            .keys()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("overall".len());
        let _ = writeln!(
            out,
            "\nmutation coverage ({} -> {}):",
            r.pre_label, r.post_label
        );
        let mut row = |name: &str, pre: &CoverageSummary, post: &CoverageSummary| {
            let _ = writeln!(
                out,
                "  {name:<width$}  {} → {}  {} {}",
                pre.percent(),
                post.percent(),
                bar(pre),
                bar(post)
            );
        };
        row("overall", &cov.overall.pre, &cov.overall.post);
        for (file, pair) in &cov.per_file {
            row(file, &pair.pre, &pair.post);
        }
    }
    if r.stillborn_excluded != (0, 0) {
        let _ = writeln!(
            out,
            "\nnote: stillborn mutants (pre {}, post {}) are excluded from coverage denominators",
            r.stillborn_excluded.0, r.stillborn_excluded.1
        );
    }
    let _ = writeln!(out, "\nexit status: {}", r.exit_status());
    out
}

fn render_markdown(r: &DiffReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Test refactoring check: {} → {}\n",
        r.pre_label, r.post_label
    );
    let _ = writeln!(out, "**Verdict:** {}\n", verdict_line(r));
    if r.partial_data {
        let _ = writeln!(
            out,
            "> **Warning:** partial data, a run did not complete.\n"
        );
    }
    for note in &r.notes {
        let _ = writeln!(out, "> {note}\n");
    }
    if !r.flips.is_empty() {
        let _ = writeln!(out, "## Status flips\n");
        let _ = writeln!(
            out,
            "| Location | Operator | Mutation | Pre | Post | Implicated tests |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for f in &r.flips {
            let implicated = r
                .trace
                .as_ref()
                .and_then(|t| t.flips.iter().find(|t| t.mutant_id == f.mutant_id))
                .map_or(String::new(), |t| {
                    if t.untraced {
                        "untraced".to_string()
                    } else {
                        t.implicated
                            .iter()
                            .map(|c| format!("`{}`", c.test))
                            .collect::<Vec<_>>()
                            .join(", ")
                    }
                });
            let _ = writeln!(
                out,
                "| `{}:{}` | {} | {} | {} | {}{} | {} |",
                f.file,
                f.line,
                f.operator,
                mutation_text(&f.original, &f.replacement).replace('|', "\\|"),
                f.pre_status,
                f.post_status,
                kind_label(f.kind),
                implicated
            );
        }
        out.push('\n');
    }
    if let Some(t) = r.trace.as_ref().filter(|t| !t.masked.is_empty()) {
        let _ = writeln!(out, "## Masked behavior changes\n");
        for m in &t.masked {
            let tests: Vec<_> = m
                .changed
                .iter()
                .map(|c| format!("`{}` ({} → {})", c.test, c.pre, c.post))
                .collect();
            let _ = writeln!(
                out,
                "- `{}:{}` {} {}, still {}: {}",
                m.file,
                m.line,
                m.operator,
                mutation_text(&m.original, &m.replacement).replace('|', "\\|"),
                m.status,
                tests.join(", ")
            );
        }
        out.push('\n');
    }
    if let Some(cov) = &r.coverage_delta {
        let _ = writeln!(out, "## Mutation coverage\n");
        let _ = writeln!(out, "| Scope | {} | {} | |", r.pre_label, r.post_label);
        let _ = writeln!(out, "|---|---:|---:|---|");
        let mut row = |name: &str, pre: &CoverageSummary, post: &CoverageSummary| {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | `{}` → `{}` |",
                pre.percent(),
                post.percent(),
                bar(pre),
                bar(post)
            );
        };
        row("overall", &cov.overall.pre, &cov.overall.post);
        for (file, pair) in &cov.per_file {
            row(&format!("`{file}`"), &pair.pre, &pair.post);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "Exit status: {}", r.exit_status());
    out
}

/// Human summary of a single run.
pub fn render_manifest(m: &RunManifest, format: Format) -> String {
    if format == Format::Machine {
        return m.to_canonical_string();
    }
    let md = format == Format::Markdown;
    let mut out = String::new();
    if md {
        let _ = writeln!(out, "# Mutation run `{}`\n", m.label);
    } else {
        let _ = writeln!(out, "run: {}", m.label);
    }
    let _ = writeln!(out, "production digest: {}", m.production_digest);
    if m.partial {
        let _ = writeln!(out, "warning: partial run");
    }
    if m.no_mutable_code() {
        let _ = writeln!(out, "no mutable code: zero mutation points found");
    }
    let width = m
        .per_file
        .keys()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("overall".len());
    if md {
        let _ = writeln!(out, "\n| Scope | Coverage | Killed | Scored | Stillborn |");
        let _ = writeln!(out, "|---|---:|---:|---:|---:|");
    } else {
        out.push('\n');
    }
    let mut row = |name: &str, s: &CoverageSummary| {
        if md {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {} | {} |",
                s.percent(),
                s.killed,
                s.total_scored,
                s.stillborn
            );
        } else {
            let _ = writeln!(out, "  {name:<width$}  {} {s}", bar(s));
        }
    };
    row("overall", &m.overall);
    for (file, s) in &m.per_file {
        row(file, s);
    }
    if m.overall.stillborn > 0 {
        let _ = writeln!(
            out,
            "\nnote: {} stillborn mutants are excluded from the coverage denominator",
            m.overall.stillborn
        );
    }
    out
}
