//! Operations shared by the command line and the HTTP service.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lingeval_core::report::{self, build_year_report, ReportTable, TableKind, YearPair};
use lingeval_core::stats::{self, Grouping, StatsRecord};
use lingeval_core::store::Resolution;
use lingeval_core::suite::Provenance;
use lingeval_core::{GroupBy, RunVerdicts, SignificanceConfig, Store, Verdict};

use crate::error::{AppError, AppResult};

/// A run id, or a system id standing for that system's latest run.
pub fn resolve_run(store: &Store, spec: &str) -> AppResult<String> {
    if let Some(run) = store.run(spec) {
        return Ok(run.run_id.clone());
    }
    store
        .latest_run_for(spec)
        .map(|r| r.run_id.clone())
        .ok_or_else(|| lingeval_core::Error::UnknownRun(spec.to_owned()).into())
}

/// `LABEL=EARLIER:LATER`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSpec {
    pub label: String,
    pub earlier: String,
    pub later: String,
}

impl std::str::FromStr for PairSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("pair {s:?} is not LABEL=EARLIER:LATER");
        let (label, runs) = s.split_once('=').ok_or_else(bad)?;
        let (earlier, later) = runs.split_once(':').ok_or_else(bad)?;
        if label.is_empty() || earlier.is_empty() || later.is_empty() {
            return Err(bad());
        }
        Ok(PairSpec {
            label: label.to_owned(),
            earlier: earlier.to_owned(),
            later: later.to_owned(),
        })
    }
}

pub fn table_kind(s: &str) -> AppResult<TableKind> {
    match s {
        "category" | "categories" => Ok(TableKind::Category),
        "phenomenon" | "phenomena" => Ok(TableKind::Phenomenon),
        "years" => Ok(TableKind::Years),
        other => Err(AppError::usage(format!(
            "unknown report kind {other:?} (category, phenomenon, years)"
        ))),
    }
}

pub fn group_by(s: &str) -> AppResult<GroupBy> {
    match s {
        "category" => Ok(GroupBy::Category),
        "phenomenon" => Ok(GroupBy::Phenomenon),
        other => Err(AppError::usage(format!("unknown grouping {other:?}"))),
    }
}

pub struct ReportRequest<'a> {
    pub kind: TableKind,
    pub pairs: &'a [PairSpec],
    pub by: GroupBy,
    pub bleu: Option<&'a BTreeMap<String, f64>>,
    pub significance: SignificanceConfig,
}

/// Accuracy tables use the latest run of every system.
pub fn build_report(store: &Store, req: &ReportRequest<'_>) -> AppResult<ReportTable> {
    let suite = store.suite().ok_or(lingeval_core::Error::NoSuite)?;
    match req.kind {
        TableKind::Years => {
            if req.pairs.is_empty() {
                return Err(AppError::usage("a years report needs at least one pair"));
            }
            let mut runs: Vec<(String, RunVerdicts, RunVerdicts)> = Vec::new();
            for p in req.pairs {
                let a = resolve_run(store, &p.earlier)?;
                let b = resolve_run(store, &p.later)?;
                runs.push((
                    p.label.clone(),
                    store.run(&a).expect("resolved").verdicts(),
                    store.run(&b).expect("resolved").verdicts(),
                ));
            }
            let pairs: Vec<YearPair<'_>> = runs
                .iter()
                .map(|(label, a, b)| YearPair {
                    label: label.clone(),
                    earlier: a,
                    later: b,
                })
                .collect();
            Ok(build_year_report(&pairs, &Grouping::from_suite(suite, req.by))?)
        }
        kind => {
            let runs: Vec<RunVerdicts> = store.latest_runs().iter().map(|r| r.verdicts()).collect();
            let build = if kind == TableKind::Category {
                report::build_category_report
            } else {
                report::build_phenomenon_report
            };
            Ok(build(&runs, suite, &req.significance, req.bleu)?)
        }
    }
}

/// Per-group counts, z against the best system and cluster membership for
/// the latest run of every system.
pub fn stats_records(
    store: &Store,
    by: GroupBy,
    significance: &SignificanceConfig,
) -> AppResult<Vec<StatsRecord>> {
    let suite = store.suite().ok_or(lingeval_core::Error::NoSuite)?;
    let runs: Vec<RunVerdicts> = store.latest_runs().iter().map(|r| r.verdicts()).collect();
    Ok(stats::stats_records(
        &runs,
        &Grouping::from_suite(suite, by),
        significance,
    )?)
}

/// Renders statistics records as `jsonl` or `csv`.
pub fn render_stats(records: &[StatsRecord], format: &str) -> AppResult<String> {
    match format {
        "jsonl" | "json" => Ok(report::stats_jsonl(records)),
        "csv" => Ok(report::stats_csv(records)),
        other => Err(AppError::usage(format!(
            "unknown stats format {other:?}; expected jsonl or csv"
        ))),
    }
}

/// `system<TAB>score` lines.
pub fn load_bleu_scores(path: &Path) -> AppResult<BTreeMap<String, f64>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| AppError::usage(format!("{}: {e}", path.display())))?;
    let mut scores = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(s, v)| Some((s.trim().to_owned(), v.trim().parse::<f64>().ok()?)));
        let (system, score) = parsed.ok_or_else(|| {
            AppError::usage(format!(
                "{}:{}: expected <system>\\t<score>",
                path.display(),
                i + 1
            ))
        })?;
        scores.insert(system, score);
    }
    Ok(scores)
}

/// Batch file: `item<TAB>verdict[<TAB>rationale]` lines for one run.
pub fn parse_batch(text: &str, origin: &str, run_id: &str) -> AppResult<Vec<Resolution>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let item = fields.next().unwrap_or("").trim();
        let verdict = fields.next().unwrap_or("").trim();
        let rationale = fields
            .next()
            .map(|r| r.trim().to_owned())
            .filter(|r| !r.is_empty());
        let verdict: Verdict = verdict
            .parse()
            .map_err(|e| AppError::usage(format!("{origin}:{}: {e}", i + 1)))?;
        if item.is_empty() {
            return Err(AppError::usage(format!("{origin}:{}: empty item id", i + 1)));
        }
        out.push(Resolution {
            run_id: run_id.to_owned(),
            item_id: item.to_owned(),
            verdict,
            rationale,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleView {
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemVerdict {
    pub run_id: String,
    pub system_id: String,
    pub output: String,
    pub auto: Verdict,
    pub effective: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemView {
    pub id: String,
    pub source: String,
    pub phenomenon: String,
    pub category: String,
    pub revision: u64,
    pub rules: Vec<RuleView>,
    pub verdicts: Vec<ItemVerdict>,
}

pub fn item_view(store: &Store, id: &str) -> AppResult<ItemView> {
    let suite = store.suite().ok_or(lingeval_core::Error::NoSuite)?;
    let item = suite
        .item(id)
        .ok_or_else(|| lingeval_core::Error::UnknownItem(id.to_owned()))?;
    let rules = item
        .rules()
        .map(|r| {
            let (by, at) = match &r.provenance {
                Provenance::Initial => (None, None),
                Provenance::Annotator { annotator, at } => (Some(annotator.clone()), Some(at.to_rfc3339())),
            };
            RuleView {
                rule: r.to_string(),
                by,
                at,
                comment: r.comment.clone(),
            }
        })
        .collect();
    let verdicts = store
        .runs()
        .iter()
        .filter_map(|run| {
            let auto = run.auto.get(id)?;
            Some(ItemVerdict {
                run_id: run.run_id.clone(),
                system_id: run.system_id.clone(),
                output: run.outputs[id].text.clone(),
                auto: auto.verdict,
                effective: run.effective(id)?,
                annotator: run.manual.get(id).map(|m| m.annotator_id.clone()),
            })
        })
        .collect();
    Ok(ItemView {
        id: item.id.clone(),
        source: item.source.clone(),
        phenomenon: item.phenomenon.clone(),
        category: item.category.clone(),
        revision: suite.revision(),
        rules,
        verdicts,
    })
}
