//! Mutation coverage and the persisted run manifest.
//!
//! Coverage is `killed / (killed + survived)`. Timed-out mutants count as
//! killed; stillborn mutants (those that do not compile) are left out of the
//! denominator and reported on their own.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::execution::{BuildConfig, MutantOutcome, MutantStatus};
use crate::lexer::Span;
use crate::mutation::{MutantId, MutationOperator, MutationPoint};

pub const MANIFEST_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSummary {
    /// Includes timed-out mutants.
    pub killed: u64,
    /// Subset of `killed`.
    pub timed_out: u64,
    pub survived: u64,
    /// Excluded from `total_scored`.
    pub stillborn: u64,
    pub total_scored: u64,
}

impl CoverageSummary {
    pub fn add(&mut self, status: MutantStatus) {
        match status {
            MutantStatus::Killed => self.killed += 1,
            MutantStatus::TimedOut => {
                self.killed += 1;
                self.timed_out += 1;
            }
            MutantStatus::Survived => self.survived += 1,
            MutantStatus::Stillborn => self.stillborn += 1,
        }
        self.total_scored = self.killed + self.survived;
    }

    pub fn from_statuses(statuses: impl IntoIterator<Item = MutantStatus>) -> Self {
        let mut s = CoverageSummary::default();
        statuses.into_iter().for_each(|st| s.add(st));
        s
    }

    pub fn merge(&mut self, other: &CoverageSummary) {
        self.killed += other.killed;
        self.timed_out += other.timed_out;
        self.survived += other.survived;
        self.stillborn += other.stillborn;
        self.total_scored += other.total_scored;
    }

    pub fn mutants(&self) -> u64 {
        self.killed + self.survived + self.stillborn
    }

    /// Exact coverage; `None` when nothing was scored.
    pub fn coverage(&self) -> Option<Ratio<u64>> {
        (self.total_scored > 0).then(|| Ratio::new(self.killed, self.total_scored))
    }

    /// Coverage in tenths of a percent, rounded half up.
    pub fn per_mille(&self) -> Option<u64> {
        (self.total_scored > 0)
            .then(|| (self.killed * 2000 + self.total_scored) / (2 * self.total_scored))
    }

    /// `"50.0%"`, or `"n/a"` when nothing was scored.
    pub fn percent(&self) -> String {
        match self.per_mille() {
            Some(pm) => format!("{}.{}%", pm / 10, pm % 10),
            None => "n/a".to_string(),
        }
    }

    fn is_consistent(&self) -> bool {
        self.timed_out <= self.killed && self.total_scored == self.killed + self.survived
    }
}

impl fmt::Display for CoverageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}/{} killed",
            self.percent(),
            self.killed,
            self.total_scored
        )?;
        if self.timed_out > 0 {
            write!(f, ", {} timed out", self.timed_out)?;
        }
        if self.stillborn > 0 {
            write!(f, ", {} stillborn excluded", self.stillborn)?;
        }
        f.write_str(")")
    }
}

pub fn compute_coverage(outcomes: &[MutantOutcome]) -> CoverageSummary {
    CoverageSummary::from_statuses(outcomes.iter().map(|o| o.status))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("outcome for unknown mutant {0}")]
pub struct UnknownMutant(pub MutantId);

/// Partition outcomes by the file of their mutation point.
pub fn aggregate_per_file(
    outcomes: &[MutantOutcome],
    files: &HashMap<MutantId, String>,
) -> Result<BTreeMap<String, CoverageSummary>, UnknownMutant> {
    let mut per_file: BTreeMap<String, CoverageSummary> = BTreeMap::new();
    for o in outcomes {
        let file = files.get(&o.mutant_id).ok_or(UnknownMutant(o.mutant_id))?;
        per_file.entry(file.clone()).or_default().add(o.status);
    }
    Ok(per_file)
}

/// Digest of the configuration fields that influence outcomes.
///
/// The project root, worker count and workspace placement are left out, so
/// two checkouts of the same project in different directories compare equal.
pub fn config_digest(config: &BuildConfig, operators: &BTreeSet<MutationOperator>) -> String {
    #[derive(Serialize)]
    struct Normalized<'a> {
        build_command: &'a crate::execution::CommandSpec,
        test_filter_template: &'a Option<crate::execution::CommandSpec>,
        test_list_command: &'a Option<crate::execution::CommandSpec>,
        timeout_factor: f64,
        timeout_floor_ms: u128,
        source_globs: BTreeSet<&'a str>,
        excluded_globs: BTreeSet<&'a str>,
        stillborn_patterns: &'a [String],
        env: &'a BTreeMap<String, String>,
        operators: &'a BTreeSet<MutationOperator>,
    }
    let normalized = Normalized {
        build_command: &config.build_command,
        test_filter_template: &config.test_filter_template,
        test_list_command: &config.test_list_command,
        timeout_factor: config.timeout_factor,
        timeout_floor_ms: config.timeout_floor.as_millis(),
        source_globs: config.source_globs.iter().map(String::as_str).collect(),
        excluded_globs: config.excluded_globs.iter().map(String::as_str).collect(),
        stillborn_patterns: &config.stillborn_patterns,
        env: &config.env,
        operators,
    };
    let bytes = serde_json::to_vec(&normalized).expect("config serializes");
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// One mutant's result as persisted in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeRecord {
    pub mutant_id: MutantId,
    pub file: String,
    pub line: usize,
    pub span: Span,
    pub operator: MutationOperator,
    pub original: String,
    pub replacement: String,
    pub status: MutantStatus,
    pub exit_code: Option<i32>,
    pub duration_ms: u64,
}

impl OutcomeRecord {
    pub fn new(point: &MutationPoint, outcome: &MutantOutcome) -> Self {
        OutcomeRecord {
            mutant_id: outcome.mutant_id,
            file: point.file.clone(),
            line: point.line,
            span: point.span,
            operator: point.operator,
            original: point.original.clone(),
            replacement: point.replacement.clone(),
            status: outcome.status,
            exit_code: outcome.exit_code,
            duration_ms: u64::try_from(outcome.duration.as_millis()).unwrap_or(u64::MAX),
        }
    }

    pub fn point(&self) -> MutationPoint {
        MutationPoint {
            file: self.file.clone(),
            token_index: 0,
            span: self.span,
            line: self.line,
            original: self.original.clone(),
            operator: self.operator,
            replacement: self.replacement.clone(),
        }
    }
}

/// Persisted record of one mutation run. Field order here is the
/// serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    /// RFC 3339, UTC, second precision.
    pub created_at: String,
    pub label: String,
    pub config_digest: String,
    pub production_digest: String,
    pub operators: Vec<MutationOperator>,
    pub partial: bool,
    pub overall: CoverageSummary,
    pub per_file: BTreeMap<String, CoverageSummary>,
    /// Sorted by mutant id.
    pub outcomes: Vec<OutcomeRecord>,
}

/// Inputs for [`RunManifest::build`] that are not per-mutant.
#[derive(Debug, Clone)]
pub struct ManifestHeader {
    pub label: String,
    pub created_at: chrono::DateTime<chrono::Utc>,
    pub config_digest: String,
    pub production_digest: String,
    pub operators: BTreeSet<MutationOperator>,
    pub partial: bool,
    /// When false, durations are written as 0 so reruns are byte-identical.
    pub record_timing: bool,
}

impl RunManifest {
    pub fn build(
        header: ManifestHeader,
        points: &HashMap<MutantId, MutationPoint>,
        outcomes: &[MutantOutcome],
    ) -> Result<Self, UnknownMutant> {
        let mut records = outcomes
            .iter()
            .map(|o| {
                let point = points.get(&o.mutant_id).ok_or(UnknownMutant(o.mutant_id))?;
                let mut rec = OutcomeRecord::new(point, o);
                if !header.record_timing {
                    rec.duration_ms = 0;
                }
                Ok(rec)
            })
            .collect::<Result<Vec<_>, _>>()?;
        records.sort_by_key(|r| r.mutant_id);
        let mut manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            created_at: header
                .created_at
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            label: header.label,
            config_digest: header.config_digest,
            production_digest: header.production_digest,
            operators: header.operators.into_iter().collect(),
            partial: header.partial,
            overall: CoverageSummary::default(),
            per_file: BTreeMap::new(),
            outcomes: records,
        };
        manifest.recompute_summaries();
        Ok(manifest)
    }

    pub fn recompute_summaries(&mut self) {
        self.per_file.clear();
        for r in &self.outcomes {
            self.per_file
                .entry(r.file.clone())
                .or_default()
                .add(r.status);
        }
        self.overall = CoverageSummary::from_statuses(self.outcomes.iter().map(|r| r.status));
    }

    pub fn outcome(&self, id: &MutantId) -> Option<&OutcomeRecord> {
        self.outcomes
            .binary_search_by_key(id, |r| r.mutant_id)
            .ok()
            .map(|i| &self.outcomes[i])
    }

    pub fn no_mutable_code(&self) -> bool {
        self.outcomes.is_empty() && !self.partial
    }

    /// Canonical text: two-space indented JSON, LF endings, trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let invalid = |m: &str| Err(ManifestError::Invalid(m.to_string()));
        if self.manifest_version != MANIFEST_VERSION {
            return Err(ManifestError::UnsupportedVersion(u64::from(
                self.manifest_version,
            )));
        }
        for (name, value) in [
            ("config_digest", &self.config_digest),
            ("production_digest", &self.production_digest),
        ] {
            if !is_digest(value) {
                return Err(ManifestError::MissingDigest(name));
            }
        }
        if !self
            .outcomes
            .windows(2)
            .all(|w| w[0].mutant_id < w[1].mutant_id)
        {
            return invalid("outcomes are not sorted by unique mutant id");
        }
        let mut recomputed = self.clone();
        recomputed.recompute_summaries();
        if recomputed.overall != self.overall || recomputed.per_file != self.per_file {
            return invalid("coverage summaries do not match outcomes");
        }
        if !self.overall.is_consistent() {
            return invalid("overall summary is inconsistent");
        }
        Ok(())
    }
}

fn is_digest(s: &str) -> bool {
    s.strip_prefix("sha256:")
        .is_some_and(|h| h.len() == 64 && h.bytes().all(|b| b.is_ascii_hexdigit()))
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("unsupported manifest version {0} (this tool reads version {MANIFEST_VERSION}); re-run the mutation analysis with this tool version")]
    UnsupportedVersion(u64),
    #[error("manifest is missing the {0} field")]
    MissingDigest(&'static str),
    #[error("malformed manifest: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub fn parse_manifest(text: &str) -> Result<RunManifest, ManifestError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("manifest_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(MANIFEST_VERSION) => {}
        Some(v) => return Err(ManifestError::UnsupportedVersion(v)),
        None => {
            return Err(ManifestError::Invalid(
                "missing manifest_version".to_string(),
            ))
        }
    }
    for field in ["config_digest", "production_digest"] {
        if !value
            .get(field)
            .and_then(|v| v.as_str())
            .is_some_and(is_digest)
        {
            return Err(ManifestError::MissingDigest(field));
        }
    }
    let manifest: RunManifest = serde_json::from_value(value)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::write(path, manifest.to_canonical_string()).map_err(io_err)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::CommandSpec;
    use crate::mutation::mutant_id;
    use std::time::Duration;
    use MutantStatus::*;

    fn outcome(id: MutantId, status: MutantStatus) -> MutantOutcome {
        MutantOutcome {
            mutant_id: id,
            status,
            exit_code: match status {
                Survived => Some(0),
                TimedOut => None,
                _ => Some(1),
            },
            duration: Duration::from_millis(1234),
            log_excerpt: String::new(),
        }
    }

    fn point(file: &str, start: usize) -> MutationPoint {
        MutationPoint {
            file: file.into(),
            token_index: start,
            span: Span::new(start, start + 1),
            line: 1,
            original: "+".into(),
            operator: MutationOperator::AorB,
            replacement: "-".into(),
        }
    }

    fn statuses(list: &[MutantStatus]) -> CoverageSummary {
        CoverageSummary::from_statuses(list.iter().copied())
    }

    #[test]
    fn coverage_examples() {
        let half = statuses(&[Killed, Survived]);
        assert_eq!(half.coverage(), Some(Ratio::new(1, 2)));
        assert_eq!(half.percent(), "50.0%");
        let none = statuses(&[Survived, Survived]);
        assert_eq!(none.coverage(), Some(Ratio::new(0, 1)));
        assert_eq!(none.percent(), "0.0%");
        let empty = statuses(&[]);
        assert_eq!(empty.total_scored, 0);
        assert_eq!(empty.coverage(), None);
        assert_eq!(empty.percent(), "n/a");
    }

    #[test]
    fn timeouts_count_as_killed_and_stillborn_is_excluded() {
        let s = statuses(&[TimedOut, Survived, Stillborn, Stillborn]);
        assert_eq!(s.killed, 1);
        assert_eq!(s.timed_out, 1);
        assert_eq!(s.stillborn, 2);
        assert_eq!(s.total_scored, 2);
        assert_eq!(s.mutants(), 4);
        assert_eq!(s.coverage(), Some(Ratio::new(1, 2)));
        assert_eq!(
            s.to_string(),
            "50.0% (1/2 killed, 1 timed out, 2 stillborn excluded)"
        );
        assert_eq!(statuses(&[Stillborn]).percent(), "n/a");
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(statuses(&[Killed, Survived, Survived]).percent(), "33.3%");
        assert_eq!(statuses(&[Killed, Killed, Survived]).percent(), "66.7%");
        let mut s = statuses(&[]);
        for _ in 0..1999 {
            s.add(Killed);
        }
        s.add(Survived);
        assert_eq!(s.percent(), "100.0%"); // 99.95 rounds half up
    }

    #[test]
    fn per_file_partition() {
        let a1 = point("a.c", 1);
        let a2 = point("a.c", 5);
        let b1 = point("b.c", 1);
        let b2 = point("b.c", 5);
        let files: HashMap<_, _> = [&a1, &a2, &b1, &b2]
            .iter()
            .map(|p| (mutant_id(p), p.file.clone()))
            .collect();
        let outs = vec![
            outcome(mutant_id(&a1), Killed),
            outcome(mutant_id(&a2), Survived),
            outcome(mutant_id(&b1), Killed),
            outcome(mutant_id(&b2), Survived),
        ];
        let per = aggregate_per_file(&outs, &files).unwrap();
        assert_eq!(per["a.c"].percent(), "50.0%");
        assert_eq!(per["b.c"].percent(), "50.0%");
        let mut total = CoverageSummary::default();
        per.values().for_each(|s| total.merge(s));
        assert_eq!(total, compute_coverage(&outs));

        let outs = vec![
            outcome(mutant_id(&a1), Killed),
            outcome(mutant_id(&b1), Survived),
        ];
        let per = aggregate_per_file(&outs, &files).unwrap();
        assert_eq!(per["a.c"].coverage(), Some(Ratio::from_integer(1)));
        assert_eq!(per["b.c"].coverage(), Some(Ratio::from_integer(0)));
        assert_eq!(compute_coverage(&outs).percent(), "50.0%");

        let stranger = mutant_id(&point("c.c", 9));
        assert_eq!(
            aggregate_per_file(&[outcome(stranger, Killed)], &files),
            Err(UnknownMutant(stranger))
        );
    }

    pub(crate) fn sample_manifest() -> RunManifest {
        let pts = [
            point("src/a.c", 3),
            point("src/a.c", 9),
            point("src/b.c", 4),
        ];
        let map: HashMap<_, _> = pts.iter().map(|p| (mutant_id(p), p.clone())).collect();
        let outs: Vec<_> = pts
            .iter()
            .zip([Killed, Survived, Stillborn])
            .map(|(p, s)| outcome(mutant_id(p), s))
            .collect();
        RunManifest::build(
            ManifestHeader {
                label: "pre".into(),
                created_at: chrono::DateTime::from_timestamp(0, 0).unwrap(),
                config_digest: format!("sha256:{}", "a".repeat(64)),
                production_digest: format!("sha256:{}", "b".repeat(64)),
                operators: MutationOperator::all(),
                partial: false,
                record_timing: true,
            },
            &map,
            &outs,
        )
        .unwrap()
    }

    #[test]
    fn manifest_build_and_round_trip() {
        let m = sample_manifest();
        assert_eq!(m.overall.percent(), "50.0%");
        assert_eq!(m.per_file.len(), 2);
        assert_eq!(m.created_at, "1970-01-01T00:00:00Z");
        assert!(m
            .outcomes
            .windows(2)
            .all(|w| w[0].mutant_id < w[1].mutant_id));
        assert_eq!(m.outcomes[0].duration_ms, 1234);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/run.json");
        write_manifest(&m, &path).unwrap();
        let first = fs::read(&path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
        write_manifest(&m, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        let text = String::from_utf8(first).unwrap();
        assert!(text.ends_with("}\n") && !text.contains('\r'));
        assert!(text.starts_with("{\n  \"manifest_version\": 1,\n  \"tool_version\""));
    }

    #[test]
    fn manifest_rejections() {
        let m = sample_manifest();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_canonical_string()).unwrap();
        v["manifest_version"] = 99.into();
        assert!(matches!(
            parse_manifest(&v.to_string()),
            Err(ManifestError::UnsupportedVersion(99))
        ));

        let mut v: serde_json::Value = serde_json::from_str(&m.to_canonical_string()).unwrap();
        v.as_object_mut().unwrap().remove("production_digest");
        assert!(matches!(
            parse_manifest(&v.to_string()),
            Err(ManifestError::MissingDigest("production_digest"))
        ));

        let mut v: serde_json::Value = serde_json::from_str(&m.to_canonical_string()).unwrap();
        v["overall"]["killed"] = 7.into();
        assert!(matches!(
            parse_manifest(&v.to_string()),
            Err(ManifestError::Invalid(_))
        ));

        let mut v: serde_json::Value = serde_json::from_str(&m.to_canonical_string()).unwrap();
        v["surprise"] = true.into();
        assert!(matches!(
            parse_manifest(&v.to_string()),
            Err(ManifestError::Malformed(_))
        ));

        let mut shuffled = m.clone();
        shuffled.outcomes.reverse();
        assert!(matches!(
            shuffled.validate(),
            Err(ManifestError::Invalid(_))
        ));

        assert!(matches!(
            parse_manifest("not json"),
            Err(ManifestError::Malformed(_))
        ));
        assert!(matches!(
            read_manifest(Path::new("/no/such/manifest.json")),
            Err(ManifestError::Io { .. })
        ));
    }

    #[test]
    fn untimed_manifests_zero_durations() {
        let mut m = sample_manifest();
        m.outcomes.iter_mut().for_each(|r| r.duration_ms = 0);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn config_digest_normalization() {
        let ops = MutationOperator::all();
        let mut a = BuildConfig::new(
            "/x/pre",
            CommandSpec::Argv(vec!["sh".into(), "build.sh".into()]),
        );
        a.source_globs = vec!["src/**/*.c".into(), "src/**/*.h".into()];
        let mut b = a.clone();
        b.project_root = "/elsewhere/post".into();
        b.max_workers = 17;
        b.source_globs.reverse();
        assert_eq!(config_digest(&a, &ops), config_digest(&b, &ops));
        b.timeout_factor = 5.0;
        assert_ne!(config_digest(&a, &ops), config_digest(&b, &ops));
        let fewer: BTreeSet<_> = [MutationOperator::AorB].into();
        assert_ne!(config_digest(&a, &ops), config_digest(&a, &fewer));
        assert!(is_digest(&config_digest(&a, &ops)));
    }
}
