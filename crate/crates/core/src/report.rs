//! Accuracy and year-over-year tables, rendered as plain text, CSV, Markdown or JSON.
//!
//! Cells keep their integer counts; the one-decimal percentages are derived
//! at render time, halves away from zero. Cluster members are marked `*` in plain
//! text and `**…**` in Markdown; negative deltas carry a trailing `!`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{
    self, best_cluster, format_signed_tenths, format_tenths, group_table, ratio_tenths, GroupAccuracy,
    GroupStats, Grouping, RunVerdicts, SignificanceConfig, StatsRecord,
};
use crate::suite::{GroupBy, TestSuite};

pub const NEGATIVE_MARKER: &str = "!";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Category,
    Phenomenon,
    Years,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Plain,
    Csv,
    Markdown,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "text" | "txt" => Ok(Format::Plain),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Cell {
    Accuracy { correct: u64, n: u64, bold: bool },
    Delta { correct_a: u64, correct_b: u64, n: u64 },
}

impl Cell {
    pub fn tenths(&self) -> i64 {
        match *self {
            Cell::Accuracy { correct, n, .. } => ratio_tenths(correct as i64, n),
            Cell::Delta {
                correct_a,
                correct_b,
                n,
            } => ratio_tenths(correct_b as i64 - correct_a as i64, n),
        }
    }

    pub fn bold(&self) -> bool {
        matches!(self, Cell::Accuracy { bold: true, .. })
    }

    pub fn negative(&self) -> bool {
        matches!(self, Cell::Delta { .. }) && self.tenths() < 0
    }

    /// Number text without markers.
    pub fn number(&self) -> String {
        match self {
            Cell::Accuracy { .. } => format_tenths(self.tenths()),
            Cell::Delta { .. } => format_signed_tenths(self.tenths()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<u64>,
    pub cells: Vec<Option<Cell>>,
}

/// Footer value in percent (or BLEU points). Counts are kept when the value
/// is a pooled ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FooterCell {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<(i64, u64)>,
    #[serde(default)]
    pub bold: bool,
    #[serde(default)]
    pub signed: bool,
}

impl FooterCell {
    pub fn tenths(&self) -> i64 {
        match self.counts {
            Some((num, den)) => ratio_tenths(num, den),
            None => stats::fraction_tenths(self.value / 100.0),
        }
    }

    pub fn negative(&self) -> bool {
        self.signed && self.tenths() < 0
    }

    pub fn number(&self) -> String {
        if self.signed {
            format_signed_tenths(self.tenths())
        } else {
            format_tenths(self.tenths())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FooterRow {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<u64>,
    pub cells: Vec<Option<FooterCell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub kind: TableKind,
    pub title: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub footer: Vec<FooterRow>,
}

// ---------------------------------------------------------------------------
// Builders

/// Column order: descending category macro-average, ties by system id.
fn column_order(runs: &[RunVerdicts], suite: &TestSuite, config: &SignificanceConfig) -> Result<Vec<usize>> {
    let by_category = group_table(runs, &Grouping::from_suite(suite, GroupBy::Category), config)?;
    let macros: Vec<f64> = (0..runs.len())
        .map(|i| stats::mean(by_category.iter().map(|g| g.accuracies[i].accuracy)))
        .collect();
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| {
        macros[b]
            .partial_cmp(&macros[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| runs[a].system_id.cmp(&runs[b].system_id))
    });
    Ok(order)
}

fn accuracy_report(
    kind: TableKind,
    by: GroupBy,
    runs: &[RunVerdicts],
    suite: &TestSuite,
    config: &SignificanceConfig,
    bleu: Option<&BTreeMap<String, f64>>,
) -> Result<ReportTable> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let order = column_order(runs, suite, config)?;
    let runs: Vec<RunVerdicts> = order.iter().map(|&i| runs[i].clone()).collect();
    let table = group_table(&runs, &Grouping::from_suite(suite, by), config)?;

    let rows = table
        .iter()
        .map(|g: &GroupStats| ReportRow {
            group: g.group.clone(),
            items: g.accuracies.first().map(|a| a.n),
            cells: g
                .accuracies
                .iter()
                .map(|a| {
                    Some(Cell::Accuracy {
                        correct: a.correct,
                        n: a.n,
                        bold: g.cluster.members.contains(&a.system_id),
                    })
                })
                .collect(),
        })
        .collect();

    let per_system =
        |i: usize| -> Vec<GroupAccuracy> { table.iter().map(|g| g.accuracies[i].clone()).collect() };
    let pooled: Vec<GroupAccuracy> = (0..runs.len())
        .map(|i| {
            let (c, n) = stats::pooled(&per_system(i));
            GroupAccuracy::new(GroupBy::All, "micro-average", &runs[i].system_id, c, n)
        })
        .collect::<Result<_>>()?;
    let micro_cluster = best_cluster(&pooled, config);
    let total = pooled.first().map(|p| p.n);
    let mut footer = vec![
        FooterRow {
            label: "micro-average".into(),
            items: total,
            cells: pooled
                .iter()
                .map(|p| {
                    Some(FooterCell {
                        value: 100.0 * p.accuracy,
                        counts: Some((p.correct as i64, p.n)),
                        bold: micro_cluster.members.contains(&p.system_id),
                        signed: false,
                    })
                })
                .collect(),
        },
        FooterRow {
            label: "macro-average".into(),
            items: total,
            cells: (0..runs.len())
                .map(|i| {
                    Some(FooterCell {
                        value: 100.0 * stats::macro_average(&per_system(i)),
                        counts: None,
                        bold: false,
                        signed: false,
                    })
                })
                .collect(),
        },
    ];
    if let Some(scores) = bleu {
        footer.push(FooterRow {
            label: "BLEU".into(),
            items: None,
            cells: runs
                .iter()
                .map(|r| {
                    scores.get(&r.system_id).map(|&value| FooterCell {
                        value,
                        counts: None,
                        bold: false,
                        signed: false,
                    })
                })
                .collect(),
        });
    }

    let (title, row_header) = match kind {
        TableKind::Category => ("Accuracy (%) per category", "category"),
        _ => ("Accuracy (%) per phenomenon", "phenomenon"),
    };
    Ok(ReportTable {
        kind,
        title: title.into(),
        row_header: row_header.into(),
        columns: runs.iter().map(|r| r.system_id.clone()).collect(),
        rows,
        footer,
    })
}

/// Category rows over the fair item set, with micro/macro footers and optional BLEU.
pub fn build_category_report(
    runs: &[RunVerdicts],
    suite: &TestSuite,
    config: &SignificanceConfig,
    bleu: Option<&BTreeMap<String, f64>>,
) -> Result<ReportTable> {
    accuracy_report(TableKind::Category, GroupBy::Category, runs, suite, config, bleu)
}

/// Phenomenon rows; the macro footer averages over phenomena.
pub fn build_phenomenon_report(
    runs: &[RunVerdicts],
    suite: &TestSuite,
    config: &SignificanceConfig,
    bleu: Option<&BTreeMap<String, f64>>,
) -> Result<ReportTable> {
    accuracy_report(
        TableKind::Phenomenon,
        GroupBy::Phenomenon,
        runs,
        suite,
        config,
        bleu,
    )
}

/// Two runs of one system to compare; `label` names the column.
#[derive(Debug, Clone)]
pub struct YearPair<'a> {
    pub label: String,
    pub earlier: &'a RunVerdicts,
    pub later: &'a RunVerdicts,
}

/// Signed per-group deltas for each pair over its common items.
pub fn build_year_report(pairs: &[YearPair<'_>], grouping: &Grouping) -> Result<ReportTable> {
    if pairs.is_empty() {
        return Err(Error::NoRuns);
    }
    let deltas: Vec<Vec<stats::YearDelta>> = pairs
        .iter()
        .map(|p| stats::year_delta(p.earlier, p.later, grouping))
        .collect::<Result<_>>()?;
    let rows = grouping
        .groups()
        .iter()
        .filter_map(|group| {
            let cells: Vec<Option<Cell>> = deltas
                .iter()
                .map(|ds| {
                    ds.iter().find(|d| &d.group == group).map(|d| Cell::Delta {
                        correct_a: d.correct_a,
                        correct_b: d.correct_b,
                        n: d.n,
                    })
                })
                .collect();
            cells.iter().any(Option::is_some).then(|| ReportRow {
                group: group.clone(),
                items: None,
                cells,
            })
        })
        .collect();
    let micro = deltas
        .iter()
        .map(|ds| {
            let (a, b, n) = ds.iter().fold((0i64, 0i64, 0u64), |(a, b, n), d| {
                (a + d.correct_a as i64, b + d.correct_b as i64, n + d.n)
            });
            Some(FooterCell {
                value: 100.0 * (b - a) as f64 / n as f64,
                counts: Some((b - a, n)),
                bold: false,
                signed: true,
            })
        })
        .collect();
    let macro_ = deltas
        .iter()
        .map(|ds| {
            Some(FooterCell {
                value: stats::mean(ds.iter().map(|d| d.delta_pp)),
                counts: None,
                bold: false,
                signed: true,
            })
        })
        .collect();
    Ok(ReportTable {
        kind: TableKind::Years,
        title: "Accuracy change (percentage points) over common items".into(),
        row_header: match grouping.kind {
            GroupBy::Phenomenon => "phenomenon".into(),
            GroupBy::Category => "category".into(),
            GroupBy::All => "group".into(),
        },
        columns: pairs.iter().map(|p| p.label.clone()).collect(),
        rows,
        footer: vec![
            FooterRow {
                label: "micro-avg".into(),
                items: None,
                cells: micro,
            },
            FooterRow {
                label: "macro-avg".into(),
                items: None,
                cells: macro_,
            },
        ],
    })
}

// ---------------------------------------------------------------------------
// Rendering

pub fn render(table: &ReportTable, format: Format) -> String {
    match format {
        Format::Plain => render_plain(table),
        Format::Csv => render_csv(table),
        Format::Markdown => render_markdown(table),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(table).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn has_items(table: &ReportTable) -> bool {
    table.rows.iter().any(|r| r.items.is_some())
}

/// Marker-decorated cell text; `bold` wraps cluster members.
fn cell_text(cell: Option<&Cell>, show_bold: bool, bold: impl Fn(&str) -> String) -> String {
    match cell {
        None => String::new(),
        Some(c) if c.negative() => format!("{}{NEGATIVE_MARKER}", c.number()),
        Some(c) if c.bold() && show_bold => bold(&c.number()),
        Some(c) => c.number(),
    }
}

fn footer_text(cell: Option<&FooterCell>, show_bold: bool, bold: impl Fn(&str) -> String) -> String {
    match cell {
        None => String::new(),
        Some(c) if c.negative() => format!("{}{NEGATIVE_MARKER}", c.number()),
        Some(c) if c.bold && show_bold => bold(&c.number()),
        Some(c) => c.number(),
    }
}

fn text_grid(
    table: &ReportTable,
    bold: impl Fn(&str) -> String + Copy,
) -> (Vec<String>, Vec<Vec<String>>, Vec<Vec<String>>) {
    let show_bold = table.columns.len() > 1;
    let with_items = has_items(table);
    let mut header = vec![table.row_header.clone()];
    if with_items {
        header.push("items".into());
    }
    header.extend(table.columns.iter().cloned());
    let items = |n: Option<u64>| n.map(|n| n.to_string()).unwrap_or_default();
    let body = table
        .rows
        .iter()
        .map(|r| {
            let mut line = vec![r.group.clone()];
            if with_items {
                line.push(items(r.items));
            }
            line.extend(r.cells.iter().map(|c| cell_text(c.as_ref(), show_bold, bold)));
            line
        })
        .collect();
    let foot = table
        .footer
        .iter()
        .map(|r| {
            let mut line = vec![r.label.clone()];
            if with_items {
                line.push(items(r.items));
            }
            line.extend(r.cells.iter().map(|c| footer_text(c.as_ref(), show_bold, bold)));
            line
        })
        .collect();
    (header, body, foot)
}

fn render_plain(table: &ReportTable) -> String {
    let (header, body, foot) = text_grid(table, |s| format!("{s}*"));
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for line in body.iter().chain(&foot) {
        for (w, cell) in widths.iter_mut().zip(line) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt_line = |line: &[String]| -> String {
        let mut out = String::new();
        for (i, (cell, w)) in line.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.trim_end().to_owned()
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1));
    let mut out = String::new();
    let _ = writeln!(out, "{}", fmt_line(&header));
    let _ = writeln!(out, "{rule}");
    for line in &body {
        let _ = writeln!(out, "{}", fmt_line(line));
    }
    if !foot.is_empty() {
        let _ = writeln!(out, "{rule}");
        for line in &foot {
            let _ = writeln!(out, "{}", fmt_line(line));
        }
    }
    out
}

fn render_markdown(table: &ReportTable) -> String {
    let (header, body, foot) = text_grid(table, |s| format!("**{s}**"));
    let esc = |s: &str| s.replace('|', "\\|");
    let mut out = String::new();
    let line = |cells: &[String]| -> String {
        format!(
            "| {} |",
            cells.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")
        )
    };
    let _ = writeln!(out, "{}", line(&header));
    let align: Vec<String> = (0..header.len())
        .map(|i| if i == 0 { "---".into() } else { "---:".into() })
        .collect();
    let _ = writeln!(out, "| {} |", align.join(" | "));
    for l in body.iter().chain(&foot) {
        let _ = writeln!(out, "{}", line(l));
    }
    out
}

/// One CSV record per cell; see `docs/report.md` for the columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub section: String,
    pub group: String,
    pub items: Option<u64>,
    pub column: String,
    pub value: String,
    pub correct: Option<u64>,
    pub n: Option<u64>,
    pub correct_a: Option<u64>,
    pub correct_b: Option<u64>,
    pub raw: Option<f64>,
    pub bold: bool,
    pub negative: bool,
}

pub fn csv_records(table: &ReportTable) -> Vec<CsvRecord> {
    let mut out = Vec::new();
    for row in &table.rows {
        for (col, cell) in table.columns.iter().zip(&row.cells) {
            let Some(cell) = cell else { continue };
            let mut rec = CsvRecord {
                section: "row".into(),
                group: row.group.clone(),
                items: row.items,
                column: col.clone(),
                value: cell.number(),
                bold: cell.bold(),
                negative: cell.negative(),
                ..Default::default()
            };
            match *cell {
                Cell::Accuracy { correct, n, .. } => {
                    rec.correct = Some(correct);
                    rec.n = Some(n);
                }
                Cell::Delta {
                    correct_a,
                    correct_b,
                    n,
                } => {
                    rec.correct_a = Some(correct_a);
                    rec.correct_b = Some(correct_b);
                    rec.n = Some(n);
                }
            }
            out.push(rec);
        }
    }
    for row in &table.footer {
        for (col, cell) in table.columns.iter().zip(&row.cells) {
            let Some(cell) = cell else { continue };
            out.push(CsvRecord {
                section: "footer".into(),
                group: row.label.clone(),
                items: row.items,
                column: col.clone(),
                value: cell.number(),
                correct: cell.counts.map(|(c, _)| c.max(0) as u64).filter(|_| !cell.signed),
                n: cell.counts.map(|(_, n)| n),
                raw: Some(cell.value),
                bold: cell.bold,
                negative: cell.negative(),
                ..Default::default()
            });
        }
    }
    out
}

fn render_csv(table: &ReportTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for rec in csv_records(table) {
        w.serialize(rec).expect("csv record serializes");
    }
    if table.rows.is_empty() && table.footer.is_empty() {
        // header only
        w.write_record([
            "section",
            "group",
            "items",
            "column",
            "value",
            "correct",
            "n",
            "correct_a",
            "correct_b",
            "raw",
            "bold",
            "negative",
        ])
        .expect("csv header");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Statistics records as CSV, one line per (group, system).
pub fn stats_csv(records: &[StatsRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for rec in records {
        w.serialize(rec).expect("csv record serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Statistics records as JSON lines.
pub fn stats_jsonl(records: &[StatsRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Reads records produced by the CSV renderer.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|rec| {
            rec.map_err(|e| Error::Parse {
                path: "<csv>".into(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}
