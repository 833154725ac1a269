//! Accuracy statistics over judged runs.
//!
//! Integer counts are the source of truth; every fraction is derived from
//! them and percentages exist only for display.

mod bleu;
mod significance;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use bleu::{corpus_bleu, tokenize, MAX_ORDER};
pub use significance::{best_cluster, ztest, ClusterResult, SignificanceConfig, DEFAULT_CRITICAL_Z};

use crate::error::{Error, Result};
use crate::rules::Verdict;
use crate::suite::{GroupBy, TestSuite};

/// Effective verdicts of one run, as consumed by the statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunVerdicts {
    pub run_id: String,
    pub system_id: String,
    pub suite_version: String,
    pub revision: u64,
    pub verdicts: BTreeMap<String, Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub kind: GroupBy,
    pub group: String,
    pub system_id: String,
    pub correct: u64,
    pub n: u64,
    pub accuracy: f64,
}

impl GroupAccuracy {
    pub fn new(
        kind: GroupBy,
        group: impl Into<String>,
        system_id: impl Into<String>,
        correct: u64,
        n: u64,
    ) -> Result<Self> {
        let group = group.into();
        if n == 0 {
            return Err(Error::EmptyGroup(group));
        }
        assert!(correct <= n, "correct ({correct}) exceeds n ({n})");
        Ok(GroupAccuracy {
            kind,
            group,
            system_id: system_id.into(),
            correct,
            n,
            accuracy: correct as f64 / n as f64,
        })
    }

    /// Percentage in tenths of a point, halves rounded away from zero.
    pub fn tenths(&self) -> i64 {
        ratio_tenths(self.correct as i64, self.n)
    }
}

/// Item → group assignment with a fixed group order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub kind: GroupBy,
    groups: Vec<String>,
    of: BTreeMap<String, String>,
}

impl Grouping {
    pub fn from_suite(suite: &TestSuite, kind: GroupBy) -> Self {
        let of = suite
            .items()
            .iter()
            .map(|i| (i.id.clone(), i.group(kind).to_owned()))
            .collect();
        Grouping {
            kind,
            groups: suite.groups(kind),
            of,
        }
    }

    /// Builds a grouping from explicit `(item, group)` pairs; groups keep first-seen order.
    pub fn from_pairs<I, A, B>(kind: GroupBy, pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut groups: Vec<String> = Vec::new();
        let mut of = BTreeMap::new();
        for (item, group) in pairs {
            let group = group.into();
            if !groups.contains(&group) {
                groups.push(group.clone());
            }
            of.insert(item.into(), group);
        }
        Grouping { kind, groups, of }
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn group_of(&self, item: &str) -> Option<&str> {
        self.of.get(item).map(String::as_str)
    }

    /// Drops groups that have no member in `items`.
    pub fn restricted_to(&self, items: &BTreeSet<String>) -> Grouping {
        let present: BTreeSet<&str> = items.iter().filter_map(|i| self.group_of(i)).collect();
        Grouping {
            kind: self.kind,
            groups: self
                .groups
                .iter()
                .filter(|g| present.contains(g.as_str()))
                .cloned()
                .collect(),
            of: self.of.clone(),
        }
    }

    fn members<'a>(
        &'a self,
        group: &'a str,
        items: &'a BTreeSet<String>,
    ) -> impl Iterator<Item = &'a String> {
        items.iter().filter(move |i| self.group_of(i) == Some(group))
    }
}

/// Items judged pass or fail in every run.
pub fn fair_item_set(runs: &[RunVerdicts]) -> Result<BTreeSet<String>> {
    let Some((first, rest)) = runs.split_first() else {
        return Ok(BTreeSet::new());
    };
    for run in rest {
        if run.suite_version != first.suite_version || run.revision != first.revision {
            return Err(Error::VersionMismatch {
                expected: format!("{} rev {}", first.suite_version, first.revision),
                found: format!("{} rev {} (run {})", run.suite_version, run.revision, run.run_id),
            });
        }
    }
    Ok(first
        .verdicts
        .iter()
        .filter(|(id, _)| {
            runs.iter()
                .all(|r| r.verdicts.get(*id).is_some_and(|v| !v.is_warning()))
        })
        .map(|(id, _)| id.clone())
        .collect())
}

/// Per-group accuracy of `run` over `items`.
pub fn accuracy(
    run: &RunVerdicts,
    items: &BTreeSet<String>,
    grouping: &Grouping,
) -> Result<Vec<GroupAccuracy>> {
    if let Some(missing) = items.iter().find(|i| !run.verdicts.contains_key(*i)) {
        return Err(Error::UnknownItem(missing.clone()));
    }
    grouping
        .groups()
        .iter()
        .map(|group| {
            let (mut correct, mut n) = (0u64, 0u64);
            for id in grouping.members(group, items) {
                n += 1;
                if run.verdicts[id] == Verdict::Pass {
                    correct += 1;
                }
            }
            GroupAccuracy::new(grouping.kind, group, &run.system_id, correct, n)
        })
        .collect()
}

/// Pooled accuracy: total correct over total items. NaN for no groups.
pub fn micro_average(groups: &[GroupAccuracy]) -> f64 {
    let (c, n) = pooled(groups);
    c as f64 / n as f64
}

pub fn pooled(groups: &[GroupAccuracy]) -> (u64, u64) {
    groups.iter().fold((0, 0), |(c, n), g| (c + g.correct, n + g.n))
}

/// Unweighted mean of group accuracies. NaN for no groups.
pub fn macro_average(groups: &[GroupAccuracy]) -> f64 {
    mean(groups.iter().map(|g| g.accuracy))
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}

/// `100 * num / den` in tenths of a point, rounding halves away from zero.
pub fn ratio_tenths(num: i64, den: u64) -> i64 {
    assert!(den > 0, "zero denominator");
    let den = den as i128;
    let mag = (num as i128).abs();
    let t = (2000 * mag + den) / (2 * den);
    (if num < 0 { -t } else { t }) as i64
}

/// A fraction (or percentage-point difference / 100) in tenths of a point.
///
/// Ties round away from zero; a 1e-9 slack absorbs binary representation
/// error so that e.g. 0.8435 renders as 84.4.
pub fn fraction_tenths(f: f64) -> i64 {
    let t = (f.abs() * 1000.0 + 0.5 + 1e-9).floor() as i64;
    if f < 0.0 {
        -t
    } else {
        t
    }
}

/// `"85.3"` from 853.
pub fn format_tenths(tenths: i64) -> String {
    let sign = if tenths < 0 { "-" } else { "" };
    let t = tenths.abs();
    format!("{sign}{}.{}", t / 10, t % 10)
}

/// `"+18.4"` / `"-9.9"` / `"+0.0"`.
pub fn format_signed_tenths(tenths: i64) -> String {
    if tenths < 0 {
        format_tenths(tenths)
    } else {
        format!("+{}", format_tenths(tenths))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearDelta {
    pub system_id: String,
    pub group: String,
    pub correct_a: u64,
    pub correct_b: u64,
    pub n: u64,
    /// `acc_b - acc_a` in percentage points over the common items.
    pub delta_pp: f64,
}

impl YearDelta {
    pub fn tenths(&self) -> i64 {
        ratio_tenths(self.correct_b as i64 - self.correct_a as i64, self.n)
    }
}

/// Items judged pass or fail in both runs.
pub fn common_items(a: &RunVerdicts, b: &RunVerdicts) -> BTreeSet<String> {
    a.verdicts
        .iter()
        .filter(|(id, v)| !v.is_warning() && b.verdicts.get(*id).is_some_and(|w| !w.is_warning()))
        .map(|(id, _)| id.clone())
        .collect()
}

/// Per-group accuracy change from `run_a` to `run_b` over their common items.
/// Groups without common items are omitted.
pub fn year_delta(run_a: &RunVerdicts, run_b: &RunVerdicts, grouping: &Grouping) -> Result<Vec<YearDelta>> {
    let common = common_items(run_a, run_b);
    if common.is_empty() {
        return Err(Error::NoCommonItems);
    }
    let grouping = grouping.restricted_to(&common);
    if grouping.groups().is_empty() {
        return Err(Error::NoCommonItems);
    }
    let acc_a = accuracy(run_a, &common, &grouping)?;
    let acc_b = accuracy(run_b, &common, &grouping)?;
    Ok(acc_a
        .iter()
        .zip(&acc_b)
        .map(|(a, b)| YearDelta {
            system_id: run_b.system_id.clone(),
            group: a.group.clone(),
            correct_a: a.correct,
            correct_b: b.correct,
            n: a.n,
            delta_pp: 100.0 * (b.accuracy - a.accuracy),
        })
        .collect())
}

/// One exported statistics record: a (group, system) cell with its cluster data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub kind: GroupBy,
    pub group: String,
    pub system_id: String,
    pub correct: u64,
    pub n: u64,
    pub accuracy: f64,
    pub best: String,
    /// `null` in JSON if infinite, which the pooled test never produces for
    /// unequal proportions with non-zero variance.
    #[serde(serialize_with = "finite_or_none", deserialize_with = "none_as_infinity")]
    pub z_vs_best: f64,
    pub in_cluster: bool,
}

fn finite_or_none<S: serde::Serializer>(z: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if z.is_finite() {
        s.serialize_some(z)
    } else {
        s.serialize_none()
    }
}

fn none_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Accuracies and best cluster for one group across systems.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: String,
    pub accuracies: Vec<GroupAccuracy>,
    pub cluster: ClusterResult,
}

impl GroupStats {
    pub fn records(&self) -> impl Iterator<Item = StatsRecord> + '_ {
        self.accuracies.iter().map(|a| StatsRecord {
            kind: a.kind,
            group: a.group.clone(),
            system_id: a.system_id.clone(),
            correct: a.correct,
            n: a.n,
            accuracy: a.accuracy,
            best: self.cluster.best.clone(),
            z_vs_best: self.cluster.z_scores[&a.system_id],
            in_cluster: self.cluster.members.contains(&a.system_id),
        })
    }
}

/// Flattened [`group_table`]: one record per (group, system), groups in table order.
pub fn stats_records(
    runs: &[RunVerdicts],
    grouping: &Grouping,
    config: &SignificanceConfig,
) -> Result<Vec<StatsRecord>> {
    Ok(group_table(runs, grouping, config)?
        .iter()
        .flat_map(GroupStats::records)
        .collect())
}

/// Accuracies of every run over the fair item set, grouped, with clusters per group.
pub fn group_table(
    runs: &[RunVerdicts],
    grouping: &Grouping,
    config: &SignificanceConfig,
) -> Result<Vec<GroupStats>> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let fair = fair_item_set(runs)?;
    if fair.is_empty() {
        return Err(Error::NoValidItems);
    }
    let grouping = grouping.restricted_to(&fair);
    let per_run: Vec<Vec<GroupAccuracy>> = runs
        .iter()
        .map(|r| accuracy(r, &fair, &grouping))
        .collect::<Result<_>>()?;
    Ok(grouping
        .groups()
        .iter()
        .enumerate()
        .map(|(gi, group)| {
            let accuracies: Vec<GroupAccuracy> = per_run.iter().map(|accs| accs[gi].clone()).collect();
            let cluster = best_cluster(&accuracies, config);
            GroupStats {
                group: group.clone(),
                accuracies,
                cluster,
            }
        })
        .collect())
}
