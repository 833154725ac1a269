//! Persistent evaluation runs with manual resolutions layered on top.
//!
//! Directory layout:
//!
//! ```text
//! <store>/events.jsonl          append-only event log, one JSON record per line
//! <store>/snapshot.json         rebuildable cache of the replayed state
//! <store>/suites/rev-NNNNNN.jsonl  suite file for every rule revision
//! ```
//!
//! The event log is the source of truth. Each mutation is one line written
//! with a single `write` and synced; a torn final line (no trailing newline)
//! is dropped when the store is opened, so a run is either fully ingested or
//! absent. Record schemas are documented in `docs/store.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::rules::{self, AutoJudgment, OutputFile, RawOutput, Verdict, VerdictCounts};
use crate::stats::RunVerdicts;
use crate::suite::{self, Provenance, Rule, TestItem, TestSuite};

const EVENTS: &str = "events.jsonl";
const SNAPSHOT: &str = "snapshot.json";
const SUITES: &str = "suites";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualResolution {
    pub item_id: String,
    pub verdict: Verdict,
    pub annotator_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub run_id: String,
    pub system_id: String,
    pub suite_version: String,
    /// Rule revision the automatic judgments were computed under.
    pub revision: u64,
    pub created: DateTime<Utc>,
    pub content_hash: String,
    pub outputs: BTreeMap<String, RawOutput>,
    pub auto: BTreeMap<String, AutoJudgment>,
    pub manual: BTreeMap<String, ManualResolution>,
    /// Items whose automatic verdict has been a warning at some point.
    pub flagged: BTreeSet<String>,
}

impl EvaluationRun {
    pub fn effective(&self, item_id: &str) -> Option<Verdict> {
        self.manual
            .get(item_id)
            .map(|m| m.verdict)
            .or_else(|| self.auto.get(item_id).map(|a| a.verdict))
    }

    pub fn verdicts(&self) -> RunVerdicts {
        RunVerdicts {
            run_id: self.run_id.clone(),
            system_id: self.system_id.clone(),
            suite_version: self.suite_version.clone(),
            revision: self.revision,
            verdicts: self
                .auto
                .keys()
                .map(|id| (id.clone(), self.effective(id).expect("judged item")))
                .collect(),
        }
    }

    pub fn counts(&self) -> VerdictCounts {
        let verdicts: Vec<Verdict> = self.auto.keys().filter_map(|id| self.effective(id)).collect();
        VerdictCounts::tally(&verdicts)
    }

    pub fn auto_counts(&self) -> VerdictCounts {
        VerdictCounts::tally(self.auto.values().map(|a| &a.verdict))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictChange {
    pub run_id: String,
    pub item_id: String,
    pub from: Verdict,
    pub to: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReJudgeReport {
    pub revision: u64,
    /// Effective-verdict changes.
    pub changed: Vec<VerdictChange>,
    /// Items whose automatic verdict changed underneath a manual resolution.
    pub unchanged_manual: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressSummary {
    pub total_items: usize,
    pub runs: usize,
    /// Items whose automatic verdict was a warning for some system.
    pub warning_items: usize,
    /// Flagged items that are now warning-free for every system.
    pub resolved_items: usize,
    /// Items warning-free for every system.
    pub valid_items: usize,
    /// (run, item) pairs still awaiting a human.
    pub pending: usize,
}

/// A pending (run, item) warning with the context an annotator needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingWarning {
    pub run_id: String,
    pub system_id: String,
    pub item_id: String,
    pub source: String,
    pub phenomenon: String,
    pub category: String,
    pub output: String,
    pub matched_pass_rules: Vec<String>,
    pub matched_fail_rules: Vec<String>,
    pub rules: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invalid_encoding: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningFilter {
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub phenomenon: Option<String>,
}

impl WarningFilter {
    fn admits(&self, system: &str, item: &TestItem) -> bool {
        self.system.as_deref().is_none_or(|s| s == system)
            && self
                .category
                .as_deref()
                .is_none_or(|c| c.eq_ignore_ascii_case(&item.category))
            && self
                .phenomenon
                .as_deref()
                .is_none_or(|p| p.eq_ignore_ascii_case(&item.phenomenon))
    }
}

/// One entry of the audit trail: an effective-verdict change or a manual decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: usize,
    pub at: DateTime<Utc>,
    pub run_id: String,
    pub item_id: String,
    pub from: Verdict,
    pub to: Verdict,
    /// Annotator id, or `rejudge@<revision>` for automatic changes.
    pub actor: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestOutcome {
    Created(String),
    Existing(String),
}

impl IngestOutcome {
    pub fn run_id(&self) -> &str {
        match self {
            IngestOutcome::Created(id) | IngestOutcome::Existing(id) => id,
        }
    }

    pub fn is_new(&self) -> bool {
        matches!(self, IngestOutcome::Created(_))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Init {
        name: String,
        version: String,
        at: DateTime<Utc>,
    },
    Ingest {
        run_id: String,
        system_id: String,
        suite_version: String,
        revision: u64,
        content_hash: String,
        at: DateTime<Utc>,
        outputs: BTreeMap<String, RawOutput>,
    },
    Resolve {
        run_id: String,
        item_id: String,
        verdict: Verdict,
        previous: Verdict,
        annotator: String,
        at: DateTime<Utc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rationale: Option<String>,
        #[serde(default)]
        r#override: bool,
    },
    AddRule {
        item_id: String,
        rule: String,
        annotator: String,
        at: DateTime<Utc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        comment: Option<String>,
        revision: u64,
    },
    Rejudge {
        run_ids: Vec<String>,
        revision: u64,
        at: DateTime<Utc>,
        changes: Vec<VerdictChange>,
    },
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    events_applied: usize,
    revision: u64,
    runs: Vec<EvaluationRun>,
}

/// Single-writer store of evaluation runs.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    suite: Option<TestSuite>,
    runs: Vec<EvaluationRun>,
    run_index: BTreeMap<String, usize>,
    events_applied: usize,
}

impl Store {
    /// Opens (creating if needed) the store at `dir` and replays its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(dir.join(SUITES)).map_err(|e| Error::io(&dir, e))?;
        let mut store = Store {
            dir,
            suite: None,
            runs: Vec::new(),
            run_index: BTreeMap::new(),
            events_applied: 0,
        };
        let events = store.read_events()?;
        store.restore(&events)?;
        Ok(store)
    }

    /// Opens the store and installs `suite` as revision 0.
    pub fn init(dir: impl AsRef<Path>, suite: &TestSuite) -> Result<Store> {
        let mut store = Store::open(dir)?;
        if let Some(existing) = &store.suite {
            return Err(Error::SuiteExists(existing.name().to_owned()));
        }
        let suite = rebase(suite, 0)?;
        suite::save_suite(&suite, store.suite_path(0))?;
        let event = Event::Init {
            name: suite.name().to_owned(),
            version: suite.version().to_owned(),
            at: Utc::now(),
        };
        store.append(std::slice::from_ref(&event))?;
        store.apply(event)?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn suite(&self) -> Option<&TestSuite> {
        self.suite.as_ref()
    }

    fn require_suite(&self) -> Result<&TestSuite> {
        self.suite.as_ref().ok_or(Error::NoSuite)
    }

    pub fn runs(&self) -> &[EvaluationRun] {
        &self.runs
    }

    pub fn run(&self, run_id: &str) -> Option<&EvaluationRun> {
        self.run_index.get(run_id).map(|&i| &self.runs[i])
    }

    /// The most recently ingested run of each system, in ingestion order.
    pub fn latest_runs(&self) -> Vec<&EvaluationRun> {
        let mut latest: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, run) in self.runs.iter().enumerate() {
            latest.insert(&run.system_id, i);
        }
        let mut idx: Vec<usize> = latest.into_values().collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.runs[i]).collect()
    }

    pub fn latest_run_for(&self, system_id: &str) -> Option<&EvaluationRun> {
        self.runs.iter().rev().find(|r| r.system_id == system_id)
    }

    // -- ingest -------------------------------------------------------------

    pub fn ingest_file(&mut self, system_id: &str, path: impl AsRef<Path>) -> Result<IngestOutcome> {
        let file = OutputFile::load(path)?;
        self.ingest_run(system_id, &file)
    }

    /// Judges and persists one system's outputs. Identical content returns the existing run.
    pub fn ingest_run(&mut self, system_id: &str, file: &OutputFile) -> Result<IngestOutcome> {
        let suite = self.require_suite()?;
        if let Some(name) = &file.suite {
            if name != suite.name() {
                return Err(Error::VersionMismatch {
                    expected: format!("suite {}", suite.name()),
                    found: format!("suite {name}"),
                });
            }
        }
        if let Some(version) = &file.version {
            if version != suite.version() {
                return Err(Error::VersionMismatch {
                    expected: suite.version().to_owned(),
                    found: version.clone(),
                });
            }
        }
        let content_hash = content_hash(system_id, &file.outputs);
        if let Some(run) = self
            .runs
            .iter()
            .find(|r| r.system_id == system_id && r.content_hash == content_hash)
        {
            return Ok(IngestOutcome::Existing(run.run_id.clone()));
        }
        rules::check_coverage(suite, &file.outputs)?;
        let mut run_id = format!("{system_id}-{}", &content_hash[..10]);
        while self.run_index.contains_key(&run_id) {
            run_id.push('_');
        }
        let event = Event::Ingest {
            run_id: run_id.clone(),
            system_id: system_id.to_owned(),
            suite_version: suite.version().to_owned(),
            revision: suite.revision(),
            content_hash,
            at: Utc::now(),
            outputs: file.outputs.clone(),
        };
        self.append(std::slice::from_ref(&event))?;
        self.apply(event)?;
        self.checkpoint()?;
        Ok(IngestOutcome::Created(run_id))
    }

    // -- warnings and resolutions ------------------------------------------

    /// (run, item) pairs whose effective verdict is warning, ordered by system then item id.
    pub fn pending_warnings(&self, filter: &WarningFilter) -> Vec<PendingWarning> {
        let Some(suite) = &self.suite else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for run in &self.runs {
            for (item_id, auto) in &run.auto {
                if run.effective(item_id) != Some(Verdict::Warning) {
                    continue;
                }
                let Some(item) = suite.item(item_id) else { continue };
                if !filter.admits(&run.system_id, item) {
                    continue;
                }
                out.push(PendingWarning {
                    run_id: run.run_id.clone(),
                    system_id: run.system_id.clone(),
                    item_id: item_id.clone(),
                    source: item.source.clone(),
                    phenomenon: item.phenomenon.clone(),
                    category: item.category.clone(),
                    output: auto.normalized_output.clone(),
                    matched_pass_rules: auto
                        .matched_pass_rules
                        .iter()
                        .filter_map(|&i| item.pass_rules.get(i).map(Rule::to_string))
                        .collect(),
                    matched_fail_rules: auto
                        .matched_fail_rules
                        .iter()
                        .filter_map(|&i| item.fail_rules.get(i).map(Rule::to_string))
                        .collect(),
                    rules: item.rules().map(Rule::to_string).collect(),
                    invalid_encoding: auto.invalid_encoding,
                });
            }
        }
        out.sort_by(|a, b| (&a.system_id, &a.item_id, &a.run_id).cmp(&(&b.system_id, &b.item_id, &b.run_id)));
        out
    }

    /// Records a human verdict for a warning, or corrects an earlier one with `override_existing`.
    pub fn resolve(
        &mut self,
        run_id: &str,
        item_id: &str,
        verdict: Verdict,
        annotator_id: &str,
        rationale: Option<String>,
        override_existing: bool,
    ) -> Result<ManualResolution> {
        let out = self.resolve_batch(
            &[Resolution {
                run_id: run_id.to_owned(),
                item_id: item_id.to_owned(),
                verdict,
                rationale,
            }],
            annotator_id,
            override_existing,
        )?;
        Ok(out.into_iter().next().expect("one resolution"))
    }

    /// Applies several resolutions with a single log append. Validation is all-or-nothing.
    pub fn resolve_batch(
        &mut self,
        batch: &[Resolution],
        annotator_id: &str,
        override_existing: bool,
    ) -> Result<Vec<ManualResolution>> {
        let now = Utc::now();
        let mut events = Vec::with_capacity(batch.len());
        let mut staged: BTreeMap<(&str, &str), Verdict> = BTreeMap::new();
        for r in batch {
            if r.verdict == Verdict::Warning {
                return Err(Error::WarningVerdict);
            }
            let run = self
                .run(&r.run_id)
                .ok_or_else(|| Error::UnknownRun(r.run_id.clone()))?;
            let current = staged
                .get(&(r.run_id.as_str(), r.item_id.as_str()))
                .copied()
                .or_else(|| run.effective(&r.item_id))
                .ok_or_else(|| Error::UnknownItem(r.item_id.clone()))?;
            if current != Verdict::Warning && !override_existing {
                return Err(Error::NotAWarning {
                    run: r.run_id.clone(),
                    item: r.item_id.clone(),
                    verdict: current.to_string(),
                });
            }
            staged.insert((&r.run_id, &r.item_id), r.verdict);
            events.push(Event::Resolve {
                run_id: r.run_id.clone(),
                item_id: r.item_id.clone(),
                verdict: r.verdict,
                previous: current,
                annotator: annotator_id.to_owned(),
                at: now,
                rationale: r.rationale.clone(),
                r#override: override_existing,
            });
        }
        self.append(&events)?;
        let mut out = Vec::with_capacity(events.len());
        for e in events {
            let (run_id, item_id) = match &e {
                Event::Resolve { run_id, item_id, .. } => (run_id.clone(), item_id.clone()),
                _ => unreachable!(),
            };
            self.apply(e)?;
            out.push(self.runs[self.run_index[&run_id]].manual[&item_id].clone());
        }
        Ok(out)
    }

    // -- rule augmentation ---------------------------------------------------

    /// Parses `spec` (compact rule notation) and appends it to the item.
    pub fn add_rule_spec(
        &mut self,
        item_id: &str,
        spec: &str,
        annotator_id: &str,
        comment: Option<String>,
    ) -> Result<TestItem> {
        let mut rule = Rule::parse(spec).map_err(|reason| Error::InvalidPattern {
            item: item_id.to_owned(),
            pattern: spec.to_owned(),
            reason,
        })?;
        rule.comment = comment;
        self.add_rule(item_id, rule, annotator_id)
    }

    /// Appends an annotator rule, bumping the suite revision. Existing runs
    /// keep their judgments until [`Store::rejudge`].
    pub fn add_rule(&mut self, item_id: &str, mut rule: Rule, annotator_id: &str) -> Result<TestItem> {
        let suite = self.require_suite()?;
        if !suite.contains(item_id) {
            return Err(Error::UnknownItem(item_id.to_owned()));
        }
        let at = Utc::now();
        rule.provenance = Provenance::Annotator {
            annotator: annotator_id.to_owned(),
            at,
        };
        let next = suite.with_rule(item_id, rule.clone())?;
        suite::save_suite(&next, self.suite_path(next.revision()))?;
        let event = Event::AddRule {
            item_id: item_id.to_owned(),
            rule: rule.to_string(),
            annotator: annotator_id.to_owned(),
            at,
            comment: rule.comment.clone(),
            revision: next.revision(),
        };
        self.append(std::slice::from_ref(&event))?;
        self.apply(event)?;
        Ok(self
            .suite()
            .and_then(|s| s.item(item_id))
            .expect("item exists")
            .clone())
    }

    /// Dry run of a rule addition: how each run's verdict for `item_id` would
    /// change after adding `rule` and re-judging. Nothing is written.
    pub fn preview_rule(&self, item_id: &str, rule: &Rule) -> Result<Vec<RulePreview>> {
        let suite = self.require_suite()?;
        let item = suite
            .item(item_id)
            .ok_or_else(|| Error::UnknownItem(item_id.to_owned()))?;
        let mut extended = item.clone();
        extended.push_rule(rule.clone());
        Ok(self
            .runs
            .iter()
            .filter_map(|run| {
                let raw = run.outputs.get(item_id)?;
                let after = rules::judge_raw(&extended, raw, &run.system_id);
                Some(RulePreview {
                    run_id: run.run_id.clone(),
                    system_id: run.system_id.clone(),
                    output: raw.text.clone(),
                    matches: rule.is_match(&after.normalized_output),
                    current: run.effective(item_id)?,
                    after: run.manual.get(item_id).map_or(after.verdict, |m| m.verdict),
                })
            })
            .collect())
    }

    /// Recomputes automatic judgments of `run_ids` (all runs when empty) under
    /// the current rules. Manual resolutions are left untouched.
    pub fn rejudge(&mut self, run_ids: &[String]) -> Result<ReJudgeReport> {
        let suite = self.require_suite()?;
        let targets: Vec<String> = if run_ids.is_empty() {
            self.runs.iter().map(|r| r.run_id.clone()).collect()
        } else {
            for id in run_ids {
                if !self.run_index.contains_key(id) {
                    return Err(Error::UnknownRun(id.clone()));
                }
            }
            run_ids.to_vec()
        };
        let revision = suite.revision();
        let mut report = ReJudgeReport {
            revision,
            ..Default::default()
        };
        for id in &targets {
            let (changes, manual) = self.rejudge_preview(id)?;
            report.changed.extend(changes);
            report.unchanged_manual += manual;
        }
        let event = Event::Rejudge {
            run_ids: targets,
            revision,
            at: Utc::now(),
            changes: report.changed.clone(),
        };
        self.append(std::slice::from_ref(&event))?;
        self.apply(event)?;
        self.checkpoint()?;
        Ok(report)
    }

    fn rejudge_preview(&self, run_id: &str) -> Result<(Vec<VerdictChange>, usize)> {
        let suite = self.require_suite()?;
        let run = &self.runs[self.run_index[run_id]];
        let fresh = rules::apply_suite(suite, &run.outputs, &run.system_id)?;
        let mut changes = Vec::new();
        let mut manual = 0;
        for j in fresh {
            let old = run.auto[&j.item_id].verdict;
            if old == j.verdict {
                continue;
            }
            if run.manual.contains_key(&j.item_id) {
                manual += 1;
            } else {
                changes.push(VerdictChange {
                    run_id: run_id.to_owned(),
                    item_id: j.item_id.clone(),
                    from: old,
                    to: j.verdict,
                });
            }
        }
        Ok((changes, manual))
    }

    // -- summaries -----------------------------------------------------------

    pub fn progress(&self) -> ProgressSummary {
        let Some(suite) = &self.suite else {
            return ProgressSummary::default();
        };
        let mut summary = ProgressSummary {
            total_items: suite.len(),
            runs: self.runs.len(),
            ..Default::default()
        };
        for item in suite.items() {
            let flagged = self.runs.iter().any(|r| r.flagged.contains(&item.id));
            let pending = self
                .runs
                .iter()
                .filter(|r| r.effective(&item.id) == Some(Verdict::Warning))
                .count();
            summary.pending += pending;
            if flagged {
                summary.warning_items += 1;
            }
            if pending == 0 {
                summary.valid_items += 1;
                if flagged {
                    summary.resolved_items += 1;
                }
            }
        }
        summary
    }

    /// Item ids with no effective warning in any run.
    pub fn valid_items(&self) -> BTreeSet<String> {
        let Some(suite) = &self.suite else {
            return BTreeSet::new();
        };
        suite
            .items()
            .iter()
            .filter(|i| {
                self.runs
                    .iter()
                    .all(|r| r.effective(&i.id) != Some(Verdict::Warning))
            })
            .map(|i| i.id.clone())
            .collect()
    }

    /// Manual decisions and automatic verdict changes, in log order.
    pub fn audit_log(&self) -> Result<Vec<AuditEntry>> {
        let mut out = Vec::new();
        for event in self.read_events()? {
            match event {
                Event::Resolve {
                    run_id,
                    item_id,
                    verdict,
                    previous,
                    annotator,
                    at,
                    ..
                } => out.push(AuditEntry {
                    seq: out.len(),
                    at,
                    run_id,
                    item_id,
                    from: previous,
                    to: verdict,
                    actor: annotator,
                }),
                Event::Rejudge {
                    revision,
                    at,
                    changes,
                    ..
                } => {
                    for c in changes {
                        out.push(AuditEntry {
                            seq: out.len(),
                            at,
                            run_id: c.run_id,
                            item_id: c.item_id,
                            from: c.from,
                            to: c.to,
                            actor: format!("rejudge@{revision}"),
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Writes the snapshot cache atomically.
    pub fn checkpoint(&self) -> Result<()> {
        let snapshot = Snapshot {
            events_applied: self.events_applied,
            revision: self.suite.as_ref().map_or(0, TestSuite::revision),
            runs: self.runs.clone(),
        };
        let bytes = serde_json::to_vec(&snapshot)?;
        fsutil::write_atomic(&self.dir.join(SNAPSHOT), &bytes)
    }

    // -- internals -----------------------------------------------------------

    fn suite_path(&self, revision: u64) -> PathBuf {
        self.dir.join(SUITES).join(format!("rev-{revision:06}.jsonl"))
    }

    fn append(&self, events: &[Event]) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let lines = events
            .iter()
            .map(serde_json::to_string)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        fsutil::append_lines(&self.dir.join(EVENTS), &lines)
    }

    /// Reads the log, truncating a torn final line.
    fn read_events(&self) -> Result<Vec<Event>> {
        let path = self.dir.join(EVENTS);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            let f = std::fs::OpenOptions::new()
                .write(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            f.set_len(complete as u64).map_err(|e| Error::io(&path, e))?;
            f.sync_all().map_err(|e| Error::io(&path, e))?;
        }
        bytes[..complete]
            .split(|&b| b == b'\n')
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_slice(line)
                    .map_err(|e| Error::Corrupt(format!("{}: event {}: {e}", path.display(), i + 1)))
            })
            .collect()
    }

    fn restore(&mut self, events: &[Event]) -> Result<()> {
        let Some(Event::Init { .. }) = events.first() else {
            if events.is_empty() {
                return Ok(());
            }
            return Err(Error::Corrupt("event log does not start with init".into()));
        };
        let mut start = 0;
        if let Some(snapshot) = self.read_snapshot(events.len()) {
            self.suite = Some(suite::load_suite(self.suite_path(snapshot.revision))?);
            for run in snapshot.runs {
                self.run_index.insert(run.run_id.clone(), self.runs.len());
                self.runs.push(run);
            }
            self.events_applied = snapshot.events_applied;
            start = snapshot.events_applied;
        }
        for event in &events[start..] {
            self.apply(event.clone())?;
        }
        Ok(())
    }

    fn read_snapshot(&self, event_count: usize) -> Option<Snapshot> {
        let bytes = std::fs::read(self.dir.join(SNAPSHOT)).ok()?;
        let snapshot: Snapshot = serde_json::from_slice(&bytes).ok()?;
        (snapshot.events_applied <= event_count && snapshot.events_applied > 0).then_some(snapshot)
    }

    fn apply(&mut self, event: Event) -> Result<()> {
        match event {
            Event::Init { .. } => {
                self.suite = Some(suite::load_suite(self.suite_path(0))?);
            }
            Event::Ingest {
                run_id,
                system_id,
                suite_version,
                revision,
                content_hash,
                at,
                outputs,
            } => {
                let suite = self.require_suite()?;
                if revision != suite.revision() {
                    return Err(Error::Corrupt(format!(
                        "run {run_id} ingested at revision {revision}, log is at {}",
                        suite.revision()
                    )));
                }
                let judgments = rules::apply_suite(suite, &outputs, &system_id)?;
                let flagged = judgments
                    .iter()
                    .filter(|j| j.verdict.is_warning())
                    .map(|j| j.item_id.clone())
                    .collect();
                let run = EvaluationRun {
                    run_id: run_id.clone(),
                    system_id,
                    suite_version,
                    revision,
                    created: at,
                    content_hash,
                    outputs,
                    auto: judgments.into_iter().map(|j| (j.item_id.clone(), j)).collect(),
                    manual: BTreeMap::new(),
                    flagged,
                };
                self.run_index.insert(run_id, self.runs.len());
                self.runs.push(run);
            }
            Event::Resolve {
                run_id,
                item_id,
                verdict,
                annotator,
                at,
                rationale,
                ..
            } => {
                let &i = self
                    .run_index
                    .get(&run_id)
                    .ok_or_else(|| Error::Corrupt(format!("resolution for unknown run {run_id}")))?;
                self.runs[i].manual.insert(
                    item_id.clone(),
                    ManualResolution {
                        item_id,
                        verdict,
                        annotator_id: annotator,
                        timestamp: at,
                        rationale,
                    },
                );
            }
            Event::AddRule {
                item_id,
                rule,
                annotator,
                at,
                comment,
                revision,
            } => {
                let suite = self.require_suite()?;
                let mut parsed = Rule::parse(&rule).map_err(Error::Corrupt)?;
                parsed.provenance = Provenance::Annotator { annotator, at };
                parsed.comment = comment;
                let next = suite.with_rule(&item_id, parsed)?;
                if next.revision() != revision {
                    return Err(Error::Corrupt(format!(
                        "rule revision {revision} does not follow {}",
                        suite.revision()
                    )));
                }
                self.suite = Some(next);
            }
            Event::Rejudge {
                run_ids, revision, ..
            } => {
                let suite = self.suite.as_ref().ok_or(Error::NoSuite)?;
                if suite.revision() != revision {
                    return Err(Error::Corrupt(format!(
                        "rejudge at revision {revision}, log is at {}",
                        suite.revision()
                    )));
                }
                for id in run_ids {
                    let i = *self
                        .run_index
                        .get(&id)
                        .ok_or_else(|| Error::Corrupt(format!("rejudge of unknown run {id}")))?;
                    let run = &mut self.runs[i];
                    let fresh = rules::apply_suite(suite, &run.outputs, &run.system_id)?;
                    for j in fresh {
                        if j.verdict.is_warning() {
                            run.flagged.insert(j.item_id.clone());
                        }
                        run.auto.insert(j.item_id.clone(), j);
                    }
                    run.revision = revision;
                }
            }
        }
        self.events_applied += 1;
        Ok(())
    }
}

/// Effect of a candidate rule on one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePreview {
    pub run_id: String,
    pub system_id: String,
    pub output: String,
    pub matches: bool,
    pub current: Verdict,
    /// Effective verdict after adding the rule and re-judging.
    pub after: Verdict,
}

/// One requested manual verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub run_id: String,
    pub item_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

fn content_hash(system_id: &str, outputs: &BTreeMap<String, RawOutput>) -> String {
    let mut h = Sha256::new();
    h.update(system_id.as_bytes());
    h.update([0]);
    for (id, o) in outputs {
        h.update(id.as_bytes());
        h.update([0]);
        h.update(o.text.as_bytes());
        h.update([u8::from(o.invalid_encoding)]);
    }
    hex::encode(h.finalize())
}

fn rebase(suite: &TestSuite, revision: u64) -> Result<TestSuite> {
    TestSuite::with_taxonomy(
        suite.name(),
        suite.version(),
        revision,
        suite.taxonomy().clone(),
        suite.items().to_vec(),
    )
}
