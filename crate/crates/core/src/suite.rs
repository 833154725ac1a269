//! Test-suite data model: taxonomy, items, rules, and the JSON-lines suite file.
//!
//! A suite file is UTF-8 with one JSON object per line. The first record is
//! the header (`"record": "suite"`), followed by optional `"phenomenon"`
//! records that pin the taxonomy, followed by `"item"` records. Rules are
//! written in a compact notation, see [`Rule::parse`]. The grammar lives in
//! `docs/format.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use regex_automata::meta;
use regex_automata::util::syntax;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::rules::normalize;

/// Phenomena with fewer items than this draw a validation warning.
pub const MIN_ITEMS_PER_PHENOMENON: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Regex,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Initial,
    Annotator { annotator: String, at: DateTime<Utc> },
}

/// A pass or fail pattern with its compiled matcher.
///
/// Compact notation: `<polarity><kind>[/<flag>]:<pattern>` where polarity is
/// `+` (pass) or `-` (fail), kind is `lit` or `re`, and the optional flag is
/// `i` (case-insensitive) or `c` (case-sensitive). Literals default to
/// case-insensitive, regexes to case-sensitive.
#[derive(Debug, Clone)]
pub struct Rule {
    pattern: String,
    kind: RuleKind,
    polarity: Polarity,
    case_sensitive: bool,
    pub provenance: Provenance,
    pub comment: Option<String>,
    matcher: meta::Regex,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern
            && self.kind == other.kind
            && self.polarity == other.polarity
            && self.case_sensitive == other.case_sensitive
            && self.provenance == other.provenance
            && self.comment == other.comment
    }
}

impl Rule {
    pub fn new(
        pattern: impl Into<String>,
        kind: RuleKind,
        polarity: Polarity,
        case_sensitive: bool,
    ) -> std::result::Result<Self, String> {
        let pattern = pattern.into();
        if pattern.is_empty() {
            return Err("empty pattern".into());
        }
        let source = match kind {
            RuleKind::Regex => pattern.clone(),
            RuleKind::Literal => regex::escape(&pattern),
        };
        let matcher = compile(&source, case_sensitive)?;
        Ok(Rule {
            pattern,
            kind,
            polarity,
            case_sensitive,
            provenance: Provenance::Initial,
            comment: None,
            matcher,
        })
    }

    pub fn literal(pattern: &str, polarity: Polarity) -> Self {
        Rule::new(pattern, RuleKind::Literal, polarity, false).expect("escaped literal compiles")
    }

    pub fn regex(pattern: &str, polarity: Polarity) -> std::result::Result<Self, String> {
        Rule::new(pattern, RuleKind::Regex, polarity, true)
    }

    /// Parses the compact notation.
    pub fn parse(spec: &str) -> std::result::Result<Self, String> {
        let (head, pattern) = spec
            .split_once(':')
            .ok_or_else(|| format!("rule {spec:?} lacks ':' separator"))?;
        let mut chars = head.chars();
        let polarity = match chars.next() {
            Some('+') => Polarity::Pass,
            Some('-') => Polarity::Fail,
            _ => return Err(format!("rule {spec:?} must start with '+' or '-'")),
        };
        let rest = chars.as_str();
        let (kind, flag) = match rest.split_once('/') {
            Some((k, f)) => (k, Some(f)),
            None => (rest, None),
        };
        let kind = match kind {
            "lit" => RuleKind::Literal,
            "re" => RuleKind::Regex,
            other => return Err(format!("unknown rule kind {other:?}")),
        };
        let case_sensitive = match flag {
            None => kind == RuleKind::Regex,
            Some("c") => true,
            Some("i") => false,
            Some(other) => return Err(format!("unknown rule flag {other:?}")),
        };
        Rule::new(pattern, kind, polarity, case_sensitive)
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn case_sensitive(&self) -> bool {
        self.case_sensitive
    }

    /// Tests the rule against already-normalized text.
    pub fn is_match(&self, normalized: &str) -> bool {
        self.matcher.is_match(normalized)
    }

    pub fn match_count(&self, normalized: &str) -> usize {
        self.matcher.find_iter(normalized).count()
    }

    /// Same pattern, kind, polarity and case handling.
    pub fn same_test(&self, other: &Rule) -> bool {
        self.pattern == other.pattern
            && self.kind == other.kind
            && self.polarity == other.polarity
            && self.case_sensitive == other.case_sensitive
    }
}

/// Outputs are single sentences, so the eager DFA and literal prefilters cost
/// far more to build than they save; case-insensitive literals in particular
/// expand into large prefilters. The lazy DFA and PikeVM remain.
fn compile(source: &str, case_sensitive: bool) -> std::result::Result<meta::Regex, String> {
    meta::Regex::builder()
        .configure(
            meta::Config::new()
                .dfa(false)
                .onepass(false)
                .backtrack(false)
                .auto_prefilter(false),
        )
        .syntax(syntax::Config::new().case_insensitive(!case_sensitive))
        .build(source)
        .map_err(|e| e.to_string())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pol = match self.polarity {
            Polarity::Pass => '+',
            Polarity::Fail => '-',
        };
        let (kind, default_cs) = match self.kind {
            RuleKind::Literal => ("lit", false),
            RuleKind::Regex => ("re", true),
        };
        let flag = match (self.case_sensitive, default_cs) {
            (a, b) if a == b => "",
            (true, _) => "/c",
            (false, _) => "/i",
        };
        write!(f, "{pol}{kind}{flag}:{}", self.pattern)
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Rule::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestItem {
    pub id: String,
    pub source: String,
    pub phenomenon: String,
    pub category: String,
    pub pass_rules: Vec<Rule>,
    pub fail_rules: Vec<Rule>,
    pub notes: Option<String>,
}

impl TestItem {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        phenomenon: impl Into<String>,
        category: impl Into<String>,
        rules: impl IntoIterator<Item = Rule>,
    ) -> Self {
        let mut item = TestItem {
            id: id.into(),
            source: source.into(),
            phenomenon: phenomenon.into(),
            category: category.into(),
            pass_rules: Vec::new(),
            fail_rules: Vec::new(),
            notes: None,
        };
        for rule in rules {
            item.push_rule(rule);
        }
        item
    }

    pub fn push_rule(&mut self, rule: Rule) {
        match rule.polarity {
            Polarity::Pass => self.pass_rules.push(rule),
            Polarity::Fail => self.fail_rules.push(rule),
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.pass_rules.iter().chain(self.fail_rules.iter())
    }

    pub fn rule_count(&self) -> usize {
        self.pass_rules.len() + self.fail_rules.len()
    }

    pub fn group(&self, by: GroupBy) -> &str {
        match by {
            GroupBy::Category => &self.category,
            GroupBy::Phenomenon => &self.phenomenon,
            GroupBy::All => ALL_GROUP,
        }
    }
}

/// Name of the single group produced by [`GroupBy::All`].
pub const ALL_GROUP: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Category,
    Phenomenon,
    All,
}

/// Phenomenon → category mapping, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    phenomena: Vec<(String, String)>,
    index: BTreeMap<String, usize>,
}

impl Taxonomy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a phenomenon. Re-registering with the same category is a no-op.
    pub fn insert(&mut self, phenomenon: &str, category: &str) -> std::result::Result<(), String> {
        if let Some(&i) = self.index.get(phenomenon) {
            let existing = &self.phenomena[i].1;
            if existing != category {
                return Err(existing.clone());
            }
            return Ok(());
        }
        self.index.insert(phenomenon.to_owned(), self.phenomena.len());
        self.phenomena.push((phenomenon.to_owned(), category.to_owned()));
        Ok(())
    }

    pub fn category_of(&self, phenomenon: &str) -> Option<&str> {
        self.index.get(phenomenon).map(|&i| self.phenomena[i].1.as_str())
    }

    pub fn phenomena(&self) -> impl Iterator<Item = (&str, &str)> {
        self.phenomena.iter().map(|(p, c)| (p.as_str(), c.as_str()))
    }

    /// Categories in first-seen order.
    pub fn categories(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.phenomena
            .iter()
            .filter(|(_, c)| seen.insert(c.as_str()))
            .map(|(_, c)| c.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.phenomena.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phenomena.is_empty()
    }
}

/// An immutable, validated test suite.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    name: String,
    version: String,
    revision: u64,
    items: Vec<TestItem>,
    taxonomy: Taxonomy,
    index: BTreeMap<String, usize>,
}

impl TestSuite {
    /// Builds a suite, inferring the taxonomy from the items.
    pub fn new(name: impl Into<String>, version: impl Into<String>, items: Vec<TestItem>) -> Result<Self> {
        let mut taxonomy = Taxonomy::new();
        for item in &items {
            taxonomy
                .insert(&item.phenomenon, &item.category)
                .map_err(|expected| Error::CategoryMismatch {
                    item: item.id.clone(),
                    phenomenon: item.phenomenon.clone(),
                    expected,
                    found: item.category.clone(),
                })?;
        }
        Self::with_taxonomy(name, version, 0, taxonomy, items)
    }

    /// Builds a suite against an explicit taxonomy.
    pub fn with_taxonomy(
        name: impl Into<String>,
        version: impl Into<String>,
        revision: u64,
        taxonomy: Taxonomy,
        items: Vec<TestItem>,
    ) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidSuite("suite has no items".into()));
        }
        let mut index = BTreeMap::new();
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(item.id.clone()));
            }
            check_item(item, &taxonomy)?;
        }
        Ok(TestSuite {
            name: name.into(),
            version: version.into(),
            revision,
            items,
            taxonomy,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Release label of the item set (sources and ids).
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Rule revision, bumped on every rule change.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn items(&self) -> &[TestItem] {
        &self.items
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&TestItem> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Returns a copy with `rule` appended to `item_id` and the revision bumped.
    pub fn with_rule(&self, item_id: &str, rule: Rule) -> Result<TestSuite> {
        let &i = self
            .index
            .get(item_id)
            .ok_or_else(|| Error::UnknownItem(item_id.to_owned()))?;
        let mut next = self.clone();
        next.items[i].push_rule(rule);
        next.revision += 1;
        Ok(next)
    }

    /// Group names in taxonomy order for the given grouping.
    pub fn groups(&self, by: GroupBy) -> Vec<String> {
        match by {
            GroupBy::Category => self
                .taxonomy
                .categories()
                .into_iter()
                .map(str::to_owned)
                .collect(),
            GroupBy::Phenomenon => self.taxonomy.phenomena().map(|(p, _)| p.to_owned()).collect(),
            GroupBy::All => vec![ALL_GROUP.to_owned()],
        }
    }
}

fn check_item(item: &TestItem, taxonomy: &Taxonomy) -> Result<()> {
    if item.id.is_empty() {
        return Err(Error::InvalidSuite("item with empty id".into()));
    }
    if normalize(&item.source).is_empty() {
        return Err(Error::InvalidSuite(format!(
            "item {:?}: empty source sentence",
            item.id
        )));
    }
    if item.rule_count() == 0 {
        return Err(Error::InvalidSuite(format!(
            "item {:?}: no pass or fail rules",
            item.id
        )));
    }
    if item.pass_rules.iter().any(|r| r.polarity != Polarity::Pass)
        || item.fail_rules.iter().any(|r| r.polarity != Polarity::Fail)
    {
        return Err(Error::InvalidSuite(format!(
            "item {:?}: rule filed under the wrong polarity",
            item.id
        )));
    }
    match taxonomy.category_of(&item.phenomenon) {
        None => Err(Error::UnknownPhenomenon {
            item: item.id.clone(),
            phenomenon: item.phenomenon.clone(),
        }),
        Some(cat) if cat != item.category => Err(Error::CategoryMismatch {
            item: item.id.clone(),
            phenomenon: item.phenomenon.clone(),
            expected: cat.to_owned(),
            found: item.category.clone(),
        }),
        Some(_) => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl ValidationIssue {
    fn warning(subject: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationIssue {
            severity: Severity::Warning,
            subject: subject.into(),
            message: message.into(),
        }
    }

    fn error(subject: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationIssue {
            severity: Severity::Error,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.subject, self.message)
    }
}

/// Checks a suite and reports issues instead of failing.
pub fn validate_suite(suite: &TestSuite) -> Vec<ValidationIssue> {
    validate_items(suite.items(), suite.taxonomy())
}

/// Same checks as [`validate_suite`], over items that need not form a valid suite.
pub fn validate_items(items: &[TestItem], taxonomy: &Taxonomy) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    if items.is_empty() {
        issues.push(ValidationIssue::error("suite", "suite has no items"));
        return issues;
    }
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.id.as_str()) {
            issues.push(ValidationIssue::error(&item.id, "duplicate item id"));
        }
        if let Err(e) = check_item(item, taxonomy) {
            issues.push(ValidationIssue::error(&item.id, e.to_string()));
        }
        let rules: Vec<&Rule> = item.rules().collect();
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].iter().any(|r| r.same_test(rule)) {
                issues.push(ValidationIssue::warning(
                    &item.id,
                    format!("duplicate rule {rule}"),
                ));
            }
        }
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for item in items {
        *counts.entry(item.phenomenon.as_str()).or_default() += 1;
    }
    for (phenomenon, _) in taxonomy.phenomena() {
        let n = counts.get(phenomenon).copied().unwrap_or(0);
        if n < MIN_ITEMS_PER_PHENOMENON {
            issues.push(ValidationIssue::warning(
                phenomenon,
                format!("{n} item(s), below recommended minimum of {MIN_ITEMS_PER_PHENOMENON}"),
            ));
        }
    }
    issues
}

// ---------------------------------------------------------------------------
// Taxonomy statistics

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyStats {
    pub phenomena: Vec<(String, usize)>,
    pub categories: Vec<(String, usize)>,
    pub total: usize,
}

impl TaxonomyStats {
    pub fn phenomenon(&self, name: &str) -> Option<usize> {
        lookup(&self.phenomena, name)
    }

    pub fn category(&self, name: &str) -> Option<usize> {
        lookup(&self.categories, name)
    }
}

fn lookup(counts: &[(String, usize)], name: &str) -> Option<usize> {
    counts
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, c)| c)
}

pub fn taxonomy_stats(suite: &TestSuite) -> TaxonomyStats {
    let count = |by: GroupBy| -> Vec<(String, usize)> {
        suite
            .groups(by)
            .into_iter()
            .map(|g| {
                let n = suite.items().iter().filter(|i| i.group(by) == g).count();
                (g, n)
            })
            .collect()
    };
    TaxonomyStats {
        phenomena: count(GroupBy::Phenomenon),
        categories: count(GroupBy::Category),
        total: suite.len(),
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Suite {
        name: String,
        version: String,
        #[serde(default)]
        revision: u64,
    },
    Phenomenon {
        name: String,
        category: String,
    },
    Item(ItemRecord),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemRecord {
    id: String,
    source: String,
    phenomenon: String,
    category: String,
    rules: Vec<RuleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RuleRecord {
    Compact(String),
    Full {
        rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        by: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<DateTime<Utc>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        comment: Option<String>,
    },
}

impl RuleRecord {
    fn from_rule(rule: &Rule) -> Self {
        match (&rule.provenance, &rule.comment) {
            (Provenance::Initial, None) => RuleRecord::Compact(rule.to_string()),
            (prov, comment) => {
                let (by, at) = match prov {
                    Provenance::Initial => (None, None),
                    Provenance::Annotator { annotator, at } => (Some(annotator.clone()), Some(*at)),
                };
                RuleRecord::Full {
                    rule: rule.to_string(),
                    by,
                    at,
                    comment: comment.clone(),
                }
            }
        }
    }

    fn into_rule(self) -> std::result::Result<Rule, (String, String)> {
        let (spec, by, at, comment) = match self {
            RuleRecord::Compact(s) => (s, None, None, None),
            RuleRecord::Full {
                rule,
                by,
                at,
                comment,
            } => (rule, by, at, comment),
        };
        let mut rule = Rule::parse(&spec).map_err(|e| (spec.clone(), e))?;
        rule.provenance = match (by, at) {
            (Some(annotator), Some(at)) => Provenance::Annotator { annotator, at },
            (None, None) => Provenance::Initial,
            _ => return Err((spec, "annotator provenance needs both \"by\" and \"at\"".into())),
        };
        rule.comment = comment;
        Ok(rule)
    }
}

pub fn load_suite(path: impl AsRef<Path>) -> Result<TestSuite> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_suite(&text, &path.display().to_string())
}

/// Parses suite-file text. `origin` labels parse errors.
pub fn parse_suite(text: &str, origin: &str) -> Result<TestSuite> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut header: Option<(String, String, u64)> = None;
    let mut explicit = Taxonomy::new();
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| parse_err(lineno, e.to_string()))?;
        match record {
            Record::Suite {
                name,
                version,
                revision,
            } => {
                if header.is_some() || !items.is_empty() || !explicit.is_empty() {
                    return Err(parse_err(lineno, "suite header must be the first record".into()));
                }
                header = Some((name, version, revision));
            }
            _ if header.is_none() => {
                return Err(parse_err(lineno, "missing suite header record".into()));
            }
            Record::Phenomenon { name, category } => {
                explicit.insert(&name, &category).map_err(|prev| {
                    parse_err(lineno, format!("phenomenon {name:?} already mapped to {prev:?}"))
                })?;
            }
            Record::Item(rec) => {
                let mut rules = Vec::with_capacity(rec.rules.len());
                for r in rec.rules {
                    let rule = r.into_rule().map_err(|(pattern, reason)| Error::InvalidPattern {
                        item: rec.id.clone(),
                        pattern,
                        reason,
                    })?;
                    rules.push(rule);
                }
                let mut item = TestItem::new(rec.id, rec.source, rec.phenomenon, rec.category, rules);
                item.notes = rec.notes;
                items.push(item);
            }
        }
    }
    let (name, version, revision) =
        header.ok_or_else(|| parse_err(1, "missing suite header record".into()))?;
    if explicit.is_empty() {
        let mut suite = TestSuite::new(name, version, items)?;
        suite.revision = revision;
        Ok(suite)
    } else {
        TestSuite::with_taxonomy(name, version, revision, explicit, items)
    }
}

/// Serializes a suite to its file form. Taxonomy records are always written.
pub fn write_suite(suite: &TestSuite) -> String {
    let mut out = String::new();
    let mut push = |record: &Record| {
        out.push_str(&serde_json::to_string(record).expect("suite records serialize"));
        out.push('\n');
    };
    push(&Record::Suite {
        name: suite.name.clone(),
        version: suite.version.clone(),
        revision: suite.revision,
    });
    for (p, c) in suite.taxonomy.phenomena() {
        push(&Record::Phenomenon {
            name: p.to_owned(),
            category: c.to_owned(),
        });
    }
    for item in &suite.items {
        push(&Record::Item(ItemRecord {
            id: item.id.clone(),
            source: item.source.clone(),
            phenomenon: item.phenomenon.clone(),
            category: item.category.clone(),
            rules: item.rules().map(RuleRecord::from_rule).collect(),
            notes: item.notes.clone(),
        }));
    }
    out
}

/// Writes the suite file atomically.
pub fn save_suite(suite: &TestSuite, path: impl AsRef<Path>) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), write_suite(suite).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, phenomenon: &str, category: &str) -> TestItem {
        TestItem::new(
            id,
            "Er las gerne Novellen.",
            phenomenon,
            category,
            [Rule::literal("novellas", Polarity::Pass)],
        )
    }

    const HEADER: &str = r#"{"record":"suite","name":"t","version":"1"}"#;

    #[test]
    fn compact_rule_notation() {
        let r = Rule::parse("+lit:novellas").unwrap();
        assert_eq!(r.polarity(), Polarity::Pass);
        assert_eq!(r.kind(), RuleKind::Literal);
        assert!(!r.case_sensitive());
        assert_eq!(r.to_string(), "+lit:novellas");

        let r = Rule::parse(r"-re/i:\bnovels?\b").unwrap();
        assert!(!r.case_sensitive());
        assert_eq!(r.to_string(), r"-re/i:\bnovels?\b");

        // colons in the pattern survive
        let r = Rule::parse("+lit/c:He said: yes").unwrap();
        assert_eq!(r.pattern(), "He said: yes");
        assert!(r.case_sensitive());

        assert!(Rule::parse("novellas").is_err());
        assert!(Rule::parse("*lit:x").is_err());
        assert!(Rule::parse("+glob:x").is_err());
        assert!(Rule::parse("+lit/z:x").is_err());
        assert!(Rule::parse("+lit:").is_err());
    }

    #[test]
    fn literal_defaults_to_case_insensitive() {
        let r = Rule::literal("novellas", Polarity::Pass);
        assert!(r.is_match("Novellas are short."));
        let re = Rule::regex("novellas", Polarity::Pass).unwrap();
        assert!(!re.is_match("Novellas are short."));
    }

    #[test]
    fn literal_is_not_a_regex() {
        let r = Rule::literal("die?", Polarity::Fail);
        assert!(r.is_match("Why did they die?"));
        assert!(!r.is_match("Why did they di"));
    }

    #[test]
    fn unclosed_group_is_rejected_at_load() {
        let text = format!(
            "{HEADER}\n{}",
            r#"{"record":"item","id":"amb-001","source":"Er las gerne Novellen.","phenomenon":"Lexical ambiguity","category":"Ambiguity","rules":["+re:(novel"]}"#
        );
        match parse_suite(&text, "t.jsonl") {
            Err(Error::InvalidPattern { item, pattern, .. }) => {
                assert_eq!(item, "amb-001");
                assert_eq!(pattern, "+re:(novel");
            }
            other => panic!("expected invalid pattern, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = TestSuite::new(
            "t",
            "1",
            vec![item("amb-001", "p", "c"), item("amb-001", "p", "c")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "amb-001"));
    }

    #[test]
    fn empty_suite_is_rejected() {
        assert!(matches!(
            TestSuite::new("t", "1", vec![]),
            Err(Error::InvalidSuite(_))
        ));
        assert!(parse_suite(HEADER, "t").is_err());
    }

    #[test]
    fn item_without_rules_is_rejected() {
        let mut it = item("a", "p", "c");
        it.pass_rules.clear();
        assert!(matches!(
            TestSuite::new("t", "1", vec![it]),
            Err(Error::InvalidSuite(_))
        ));
    }

    #[test]
    fn blank_source_is_rejected() {
        let mut it = item("a", "p", "c");
        it.source = " \t ".into();
        assert!(TestSuite::new("t", "1", vec![it]).is_err());
    }

    #[test]
    fn phenomenon_mapping_to_two_categories_is_rejected() {
        let err = TestSuite::new("t", "1", vec![item("a", "p", "c1"), item("b", "p", "c2")]).unwrap_err();
        assert!(matches!(err, Error::CategoryMismatch { .. }));
    }

    #[test]
    fn unknown_phenomenon_against_explicit_taxonomy() {
        let text = format!(
            "{HEADER}\n{}\n{}",
            r#"{"record":"phenomenon","name":"Sluicing","category":"Coordination & ellipsis"}"#,
            r#"{"record":"item","id":"x","source":"Hallo.","phenomenon":"Idioms","category":"MWE","rules":["+lit:hello"]}"#
        );
        assert!(matches!(
            parse_suite(&text, "t"),
            Err(Error::UnknownPhenomenon { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{HEADER}\n\n{{not json");
        match parse_suite(&text, "demo.jsonl") {
            Err(Error::Parse { path, line, .. }) => {
                assert_eq!(path, "demo.jsonl");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
        let no_header = r#"{"record":"phenomenon","name":"p","category":"c"}"#;
        assert!(matches!(
            parse_suite(no_header, "t"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn phenomenon_size_warnings() {
        let mut items: Vec<TestItem> = (0..20).map(|i| item(&format!("a{i}"), "big", "c")).collect();
        items.extend((0..9).map(|i| item(&format!("b{i}"), "small", "c")));
        let suite = TestSuite::new("t", "1", items).unwrap();
        let issues = validate_suite(&suite);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].severity, Severity::Warning);
        assert_eq!(issues[0].subject, "small");
        assert!(issues[0].message.contains("below recommended minimum"));
    }

    #[test]
    fn empty_item_list_is_an_error_issue() {
        let issues = validate_items(&[], &Taxonomy::new());
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].severity, Severity::Error);
    }

    #[test]
    fn duplicate_rule_is_flagged() {
        let base = TestSuite::new("t", "1", vec![item("a", "p", "c")]).unwrap();
        let dup = base
            .with_rule("a", Rule::literal("novellas", Polarity::Pass))
            .unwrap();
        assert_eq!(dup.revision(), 1);
        assert!(validate_suite(&dup)
            .iter()
            .any(|i| i.message.starts_with("duplicate rule")));
    }

    #[test]
    fn single_item_stats() {
        let suite = TestSuite::new("t", "1", vec![item("a", "p", "c")]).unwrap();
        let stats = taxonomy_stats(&suite);
        assert_eq!(stats.phenomenon("p"), Some(1));
        assert_eq!(stats.category("c"), Some(1));
        assert_eq!(stats.total, 1);
    }

    #[test]
    fn annotator_rules_round_trip_with_provenance() {
        let mut rule = Rule::literal("short stories", Polarity::Pass);
        rule.provenance = Provenance::Annotator {
            annotator: "ann1".into(),
            at: "2026-10-16T12:00:00Z".parse().unwrap(),
        };
        rule.comment = Some("Novelle may be a short story".into());
        let suite = TestSuite::new("t", "1", vec![item("a", "p", "c")])
            .unwrap()
            .with_rule("a", rule)
            .unwrap();
        let back = parse_suite(&write_suite(&suite), "t").unwrap();
        assert_eq!(back, suite);
    }
}
