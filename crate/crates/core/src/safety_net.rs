//! Comparing a run before and after a test-code refactoring.
//!
//! Both runs must cover byte-identical production code; only then does a
//! change in any mutant's status mean the tests changed behavior. Mutants are
//! matched by their content-addressed id, and the verdict is per mutant:
//! equal coverage percentages are not enough.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{CoverageSummary, OutcomeRecord, RunManifest};
use crate::execution::{KillMatrix, MutantStatus, TestVerdict};
use crate::lexer::Span;
use crate::mutation::{MutantId, MutationOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Preserved,
    Changed,
    Incomparable,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Preserved => 0,
            Verdict::Changed => 1,
            Verdict::Incomparable => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Preserved => "PRESERVED",
            Verdict::Changed => "CHANGED",
            Verdict::Incomparable => "INCOMPARABLE",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipKind {
    /// Killed/timed-out versus survived.
    Behavior,
    /// Killed versus timed out.
    Timing,
    /// One side did not compile: the test code changed what builds.
    StillbornAnomaly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flip {
    pub mutant_id: MutantId,
    pub file: String,
    pub line: usize,
    pub span: Span,
    pub operator: MutationOperator,
    pub original: String,
    pub replacement: String,
    pub pre_status: MutantStatus,
    pub post_status: MutantStatus,
    pub kind: FlipKind,
}

impl Flip {
    fn new(pre: &OutcomeRecord, post: &OutcomeRecord) -> Self {
        let kind = match (pre.status, post.status) {
            (MutantStatus::Stillborn, _) | (_, MutantStatus::Stillborn) => {
                FlipKind::StillbornAnomaly
            }
            (a, b) if a.is_kill() && b.is_kill() => FlipKind::Timing,
            _ => FlipKind::Behavior,
        };
        Flip {
            mutant_id: pre.mutant_id,
            file: pre.file.clone(),
            line: pre.line,
            span: pre.span,
            operator: pre.operator,
            original: pre.original.clone(),
            replacement: pre.replacement.clone(),
            pre_status: pre.status,
            post_status: post.status,
            kind,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unmatched {
    pub only_in_pre: Vec<MutantId>,
    pub only_in_post: Vec<MutantId>,
}

impl Unmatched {
    pub fn is_empty(&self) -> bool {
        self.only_in_pre.is_empty() && self.only_in_post.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveragePair {
    pub pre: CoverageSummary,
    pub post: CoverageSummary,
}

impl CoveragePair {
    pub fn is_unchanged(&self) -> bool {
        self.pre == self.post
    }
}

/// Coverage over the mutants present in both runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageDelta {
    pub overall: CoveragePair,
    pub per_file: BTreeMap<String, CoveragePair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestChange {
    pub test: String,
    pub pre: TestVerdict,
    pub post: TestVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipTrace {
    pub mutant_id: MutantId,
    /// Tests whose verdict on this mutant differs between the two versions.
    pub implicated: Vec<TestChange>,
    /// A kill-matrix row was missing on at least one side.
    pub untraced: bool,
}

/// A mutant whose aggregate status is unchanged while individual test
/// verdicts moved, because another test still kills it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskedChange {
    pub mutant_id: MutantId,
    pub file: String,
    pub line: usize,
    pub operator: MutationOperator,
    pub original: String,
    pub replacement: String,
    pub status: MutantStatus,
    pub changed: Vec<TestChange>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceReport {
    pub flips: Vec<FlipTrace>,
    pub masked: Vec<MaskedChange>,
    /// Test ids present in only one version (renamed, added or removed).
    pub tests_only_in_pre: Vec<String>,
    pub tests_only_in_post: Vec<String>,
    /// Matrix rows whose aggregate disagrees with the manifest status.
    pub inconsistent: Vec<MutantId>,
}

impl TraceReport {
    /// Union of the tests implicated in any flip.
    pub fn implicated_tests(&self) -> BTreeSet<&str> {
        self.flips
            .iter()
            .flat_map(|f| f.implicated.iter().map(|c| c.test.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffReport {
    pub pre_label: String,
    pub post_label: String,
    pub verdict: Verdict,
    /// At least one manifest is partial; the verdict cannot be PRESERVED.
    pub partial_data: bool,
    pub pre_production_digest: String,
    pub post_production_digest: String,
    pub notes: Vec<String>,
    /// Sorted by mutant id.
    pub flips: Vec<Flip>,
    pub unmatched: Unmatched,
    /// Absent when the runs are incomparable.
    pub coverage_delta: Option<CoverageDelta>,
    /// Stillborn mutants excluded from the coverage denominators (pre, post).
    pub stillborn_excluded: (u64, u64),
    pub trace: Option<TraceReport>,
}

impl DiffReport {
    /// CI exit status: 0 preserved, 1 changed, 2 incomparable. A masked
    /// change found by tracing turns a preserved verdict into 1.
    pub fn exit_status(&self) -> i32 {
        let masked = self.trace.as_ref().is_some_and(|t| !t.masked.is_empty());
        match self.verdict {
            Verdict::Preserved if masked => 1,
            v => v.exit_code(),
        }
    }
}

pub const INCOMPARABLE_MESSAGE: &str = "production code differs between the two runs; \
     test behavior can only be compared when the production code is byte-identical \
     and only the test code was refactored";

/// Compare two runs mutant by mutant.
pub fn diff_runs(pre: &RunManifest, post: &RunManifest) -> DiffReport {
    let partial_data = pre.partial || post.partial;
    let mut report = DiffReport {
        pre_label: pre.label.clone(),
        post_label: post.label.clone(),
        verdict: Verdict::Incomparable,
        partial_data,
        pre_production_digest: pre.production_digest.clone(),
        post_production_digest: post.production_digest.clone(),
        notes: Vec::new(),
        flips: Vec::new(),
        unmatched: Unmatched::default(),
        coverage_delta: None,
        stillborn_excluded: (pre.overall.stillborn, post.overall.stillborn),
        trace: None,
    };
    if partial_data {
        report
            .notes
            .push("partial data: at least one run did not finish".to_string());
    }
    if pre.production_digest != post.production_digest {
        report.notes.push(INCOMPARABLE_MESSAGE.to_string());
        return report;
    }
    if pre.config_digest != post.config_digest {
        report
            .notes
            .push("the runs used different configurations (config digests differ)".to_string());
    }

    let post_by_id: BTreeMap<MutantId, &OutcomeRecord> =
        post.outcomes.iter().map(|r| (r.mutant_id, r)).collect();
    let pre_ids: BTreeSet<MutantId> = pre.outcomes.iter().map(|r| r.mutant_id).collect();

    let mut overall = CoveragePair {
        pre: CoverageSummary::default(),
        post: CoverageSummary::default(),
    };
    let mut per_file: BTreeMap<String, CoveragePair> = BTreeMap::new();
    for a in &pre.outcomes {
        let Some(b) = post_by_id.get(&a.mutant_id) else {
            report.unmatched.only_in_pre.push(a.mutant_id);
            continue;
        };
        overall.pre.add(a.status);
        overall.post.add(b.status);
        let entry = per_file.entry(a.file.clone()).or_insert(CoveragePair {
            pre: CoverageSummary::default(),
            post: CoverageSummary::default(),
        });
        entry.pre.add(a.status);
        entry.post.add(b.status);
        if a.status != b.status {
            report.flips.push(Flip::new(a, b));
        }
    }
    report.unmatched.only_in_post = post
        .outcomes
        .iter()
        .map(|r| r.mutant_id)
        .filter(|id| !pre_ids.contains(id))
        .collect();
    if !report.unmatched.is_empty() {
        report.notes.push(format!(
            "{} mutants exist in only one run; coverage is compared over the {} shared mutants",
            report.unmatched.only_in_pre.len() + report.unmatched.only_in_post.len(),
            overall.pre.mutants()
        ));
    }
    report.coverage_delta = Some(CoverageDelta { overall, per_file });
    report.verdict = if report.flips.is_empty() && report.unmatched.is_empty() && !partial_data {
        Verdict::Preserved
    } else {
        Verdict::Changed
    };
    report
}

fn row_changes(
    pre: &BTreeMap<String, TestVerdict>,
    post: &BTreeMap<String, TestVerdict>,
) -> Vec<TestChange> {
    pre.iter()
        .filter_map(|(test, a)| {
            let b = post.get(test)?;
            (a != b).then(|| TestChange {
                test: test.clone(),
                pre: *a,
                post: *b,
            })
        })
        .collect()
}

/// Attribute each flip to the tests whose verdict changed, and look for
/// masked changes among the mutants that did not flip.
///
/// `pre` supplies the aggregate status and location of non-flipped mutants.
pub fn trace_flips(
    mut report: DiffReport,
    pre: &RunManifest,
    pre_matrix: &KillMatrix,
    post_matrix: &KillMatrix,
) -> DiffReport {
    let pre_tests: BTreeSet<&String> = pre_matrix.tests.iter().collect();
    let post_tests: BTreeSet<&String> = post_matrix.tests.iter().collect();
    let mut trace = TraceReport {
        tests_only_in_pre: pre_tests
            .difference(&post_tests)
            .map(|t| t.to_string())
            .collect(),
        tests_only_in_post: post_tests
            .difference(&pre_tests)
            .map(|t| t.to_string())
            .collect(),
        ..TraceReport::default()
    };

    let flipped: BTreeSet<MutantId> = report.flips.iter().map(|f| f.mutant_id).collect();
    for flip in &report.flips {
        match (
            pre_matrix.row(&flip.mutant_id),
            post_matrix.row(&flip.mutant_id),
        ) {
            (Some(a), Some(b)) => trace.flips.push(FlipTrace {
                mutant_id: flip.mutant_id,
                implicated: row_changes(a, b),
                untraced: false,
            }),
            _ => trace.flips.push(FlipTrace {
                mutant_id: flip.mutant_id,
                implicated: Vec::new(),
                untraced: true,
            }),
        }
    }

    for (id, a) in &pre_matrix.rows {
        if flipped.contains(id) {
            continue;
        }
        let (Some(b), Some(record)) = (post_matrix.row(id), pre.outcome(id)) else {
            continue;
        };
        let changed = row_changes(a, b);
        if changed.is_empty() {
            continue;
        }
        let kills =
            |row: &BTreeMap<String, TestVerdict>| row.values().any(|v| *v != TestVerdict::Pass);
        if kills(a) != kills(b) || kills(a) != record.status.is_kill() {
            trace.inconsistent.push(*id);
            continue;
        }
        trace.masked.push(MaskedChange {
            mutant_id: *id,
            file: record.file.clone(),
            line: record.line,
            operator: record.operator,
            original: record.original.clone(),
            replacement: record.replacement.clone(),
            status: record.status,
            changed,
        });
    }
    if !trace.inconsistent.is_empty() {
        report.notes.push(format!(
            "{} kill-matrix rows disagree with the aggregate run (flaky tests?)",
            trace.inconsistent.len()
        ));
    }
    report.trace = Some(trace);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{ManifestHeader, MANIFEST_VERSION};
    use crate::execution::MutantOutcome;
    use crate::mutation::{mutant_id, MutationPoint};
    use std::collections::HashMap;
    use std::time::Duration;
    use MutantStatus::*;

    fn point(start: usize) -> MutationPoint {
        MutationPoint {
            file: if start < 100 {
                "src/employee.c"
            } else {
                "src/other.c"
            }
            .into(),
            token_index: 0,
            span: Span::new(start, start + 1),
            line: start / 10 + 1,
            original: "+".into(),
            operator: MutationOperator::AorB,
            replacement: "-".into(),
        }
    }

    fn manifest(label: &str, digest: char, entries: &[(usize, MutantStatus)]) -> RunManifest {
        let points: HashMap<_, _> = entries
            .iter()
            .map(|(s, _)| (mutant_id(&point(*s)), point(*s)))
            .collect();
        let outcomes: Vec<_> = entries
            .iter()
            .map(|(s, st)| MutantOutcome {
                mutant_id: mutant_id(&point(*s)),
                status: *st,
                exit_code: Some(i32::from(*st != Survived)),
                duration: Duration::ZERO,
                log_excerpt: String::new(),
            })
            .collect();
        let m = RunManifest::build(
            ManifestHeader {
                label: label.into(),
                created_at: chrono::DateTime::from_timestamp(0, 0).unwrap(),
                config_digest: format!("sha256:{}", "c".repeat(64)),
                production_digest: format!("sha256:{}", digest.to_string().repeat(64)),
                operators: MutationOperator::all(),
                partial: false,
                record_timing: false,
            },
            &points,
            &outcomes,
        )
        .unwrap();
        assert_eq!(m.manifest_version, MANIFEST_VERSION);
        m
    }

    fn id(start: usize) -> MutantId {
        mutant_id(&point(start))
    }

    #[test]
    fn toy_flip() {
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Survived)]);
        let post = manifest("post", 'a', &[(10, Survived), (20, Survived)]);
        let r = diff_runs(&pre, &post);
        assert_eq!(r.verdict, Verdict::Changed);
        assert_eq!(r.flips.len(), 1);
        assert_eq!(r.flips[0].mutant_id, id(10));
        assert_eq!(
            (r.flips[0].pre_status, r.flips[0].post_status),
            (Killed, Survived)
        );
        assert_eq!(r.flips[0].kind, FlipKind::Behavior);
        assert_eq!(r.exit_status(), 1);
        let cov = r.coverage_delta.unwrap();
        assert_eq!(cov.overall.pre.percent(), "50.0%");
        assert_eq!(cov.overall.post.percent(), "0.0%");
    }

    #[test]
    fn identical_runs_preserve() {
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Survived), (150, TimedOut)]);
        let post = manifest(
            "post",
            'a',
            &[(10, Killed), (20, Survived), (150, TimedOut)],
        );
        let r = diff_runs(&pre, &post);
        assert_eq!(r.verdict, Verdict::Preserved);
        assert!(r.flips.is_empty() && r.unmatched.is_empty());
        let cov = r.coverage_delta.unwrap();
        assert!(cov.overall.is_unchanged());
        assert!(cov.per_file.values().all(CoveragePair::is_unchanged));
        assert_eq!(cov.per_file.len(), 2);
    }

    #[test]
    fn differing_production_is_incomparable() {
        let pre = manifest("pre", 'a', &[(10, Killed)]);
        let post = manifest("post", 'b', &[(10, Killed)]);
        let r = diff_runs(&pre, &post);
        assert_eq!(r.verdict, Verdict::Incomparable);
        assert!(r.flips.is_empty() && r.coverage_delta.is_none());
        assert!(r.notes.iter().any(|n| n.contains("byte-identical")));
        assert_eq!(r.exit_status(), 2);
        assert_eq!(diff_runs(&post, &pre).verdict, Verdict::Incomparable);
    }

    #[test]
    fn compensating_flips_are_not_preserved() {
        // same coverage percentage, different mutants killed
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Survived)]);
        let post = manifest("post", 'a', &[(10, Survived), (20, Killed)]);
        let r = diff_runs(&pre, &post);
        let cov = r.coverage_delta.as_ref().unwrap();
        assert_eq!(cov.overall.pre, cov.overall.post);
        assert_eq!(r.verdict, Verdict::Changed);
        assert_eq!(r.flips.len(), 2);
    }

    #[test]
    fn flip_kinds() {
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Stillborn), (30, TimedOut)]);
        let post = manifest("post", 'a', &[(10, TimedOut), (20, Killed), (30, Survived)]);
        let r = diff_runs(&pre, &post);
        let kind = |s| r.flips.iter().find(|f| f.mutant_id == id(s)).unwrap().kind;
        assert_eq!(kind(10), FlipKind::Timing);
        assert_eq!(kind(20), FlipKind::StillbornAnomaly);
        assert_eq!(kind(30), FlipKind::Behavior);
        assert_eq!(r.stillborn_excluded, (1, 0));
    }

    #[test]
    fn unmatched_and_partial() {
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Survived)]);
        let post = manifest("post", 'a', &[(10, Killed)]);
        let r = diff_runs(&pre, &post);
        assert_eq!(r.verdict, Verdict::Changed);
        assert_eq!(r.unmatched.only_in_pre, vec![id(20)]);
        assert!(r.coverage_delta.unwrap().overall.is_unchanged());

        let mut partial = pre.clone();
        partial.partial = true;
        let r = diff_runs(&partial, &pre);
        assert_eq!(r.verdict, Verdict::Changed);
        assert!(r.partial_data);
        assert!(r.flips.is_empty());
    }

    #[test]
    fn direction_symmetry() {
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Survived), (30, TimedOut)]);
        let post = manifest("post", 'a', &[(10, Survived), (20, Survived), (30, Killed)]);
        let fwd = diff_runs(&pre, &post);
        let back = diff_runs(&post, &pre);
        assert_eq!(fwd.verdict, back.verdict);
        let swapped: Vec<_> = back
            .flips
            .iter()
            .map(|f| (f.mutant_id, f.post_status, f.pre_status, f.kind))
            .collect();
        let forward: Vec<_> = fwd
            .flips
            .iter()
            .map(|f| (f.mutant_id, f.pre_status, f.post_status, f.kind))
            .collect();
        assert_eq!(forward, swapped);
    }

    fn matrix(rows: &[(usize, &[(&str, TestVerdict)])]) -> KillMatrix {
        let mut tests = BTreeSet::new();
        let rows = rows
            .iter()
            .map(|(s, cells)| {
                let row: BTreeMap<_, _> = cells
                    .iter()
                    .map(|(t, v)| {
                        tests.insert(t.to_string());
                        (t.to_string(), *v)
                    })
                    .collect();
                (id(*s), row)
            })
            .collect();
        KillMatrix {
            tests: tests.into_iter().collect(),
            rows,
        }
    }

    use TestVerdict::{Fail, Pass};

    #[test]
    fn trace_implicates_single_test() {
        let pre = manifest("pre", 'a', &[(10, Killed), (20, Survived)]);
        let post = manifest("post", 'a', &[(10, Survived), (20, Survived)]);
        let pm = matrix(&[(
            10,
            &[
                ("salaryEngineerTest", Pass),
                ("salaryManagerTest", Fail),
                ("salarySalesmanTest", Pass),
            ],
        )]);
        let qm = matrix(&[(
            10,
            &[
                ("salaryEngineerTest", Pass),
                ("salaryManagerTest", Pass),
                ("salarySalesmanTest", Pass),
            ],
        )]);
        let r = trace_flips(diff_runs(&pre, &post), &pre, &pm, &qm);
        let t = r.trace.unwrap();
        assert_eq!(t.flips.len(), 1);
        assert!(!t.flips[0].untraced);
        assert_eq!(t.implicated_tests(), BTreeSet::from(["salaryManagerTest"]));
        assert_eq!(
            t.flips[0].implicated,
            vec![TestChange {
                test: "salaryManagerTest".into(),
                pre: Fail,
                post: Pass
            }]
        );
        assert!(t.masked.is_empty());
    }

    #[test]
    fn trace_missing_rows_and_renames() {
        let pre = manifest("pre", 'a', &[(10, Killed)]);
        let post = manifest("post", 'a', &[(10, Survived)]);
        let pm = matrix(&[(99, &[("oldName", Fail)])]);
        let qm = matrix(&[(10, &[("newName", Pass)])]);
        let t = trace_flips(diff_runs(&pre, &post), &pre, &pm, &qm)
            .trace
            .unwrap();
        assert!(t.flips[0].untraced);
        assert_eq!(t.tests_only_in_pre, vec!["oldName"]);
        assert_eq!(t.tests_only_in_post, vec!["newName"]);
    }

    #[test]
    fn masking_detected_where_aggregate_is_blind() {
        let pre = manifest("pre", 'a', &[(10, Killed)]);
        let post = manifest("post", 'a', &[(10, Killed)]);
        let diff = diff_runs(&pre, &post);
        assert_eq!(diff.verdict, Verdict::Preserved);
        assert_eq!(diff.exit_status(), 0);
        let pm = matrix(&[(10, &[("testAreaSquare", Fail), ("testAreaRect", Fail)])]);
        let qm = matrix(&[(10, &[("testAreaSquare", Fail), ("testAreaRect", Pass)])]);
        let r = trace_flips(diff, &pre, &pm, &qm);
        let t = r.trace.as_ref().unwrap();
        assert_eq!(t.masked.len(), 1);
        assert_eq!(t.masked[0].changed[0].test, "testAreaRect");
        assert_eq!(r.verdict, Verdict::Preserved);
        assert_eq!(r.exit_status(), 1);
    }

    #[test]
    fn inconsistent_rows_are_not_masking() {
        let pre = manifest("pre", 'a', &[(10, Survived)]);
        let post = manifest("post", 'a', &[(10, Survived)]);
        let pm = matrix(&[(10, &[("t", Fail)])]);
        let qm = matrix(&[(10, &[("t", Pass)])]);
        let r = trace_flips(diff_runs(&pre, &post), &pre, &pm, &qm);
        let t = r.trace.unwrap();
        assert!(t.masked.is_empty());
        assert_eq!(t.inconsistent, vec![id(10)]);
    }
}
