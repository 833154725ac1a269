//! Output normalization and automatic pass/fail/warning judgment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::suite::{TestItem, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Warning,
}

impl Verdict {
    pub fn is_warning(self) -> bool {
        self == Verdict::Warning
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Warning => "warning",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pass" => Ok(Verdict::Pass),
            "fail" => Ok(Verdict::Fail),
            "warning" => Ok(Verdict::Warning),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

/// NFC, trim, and collapse whitespace runs to one space. Punctuation is kept.
pub fn normalize(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoJudgment {
    pub item_id: String,
    pub system_id: String,
    pub verdict: Verdict,
    /// Indices into the item's pass rules.
    pub matched_pass_rules: Vec<usize>,
    /// Indices into the item's fail rules.
    pub matched_fail_rules: Vec<usize>,
    pub normalized_output: String,
    /// The raw output held undecodable bytes; the verdict is forced to warning.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invalid_encoding: bool,
}

impl AutoJudgment {
    /// Checks the verdict/rule-list consistency invariants.
    pub fn is_consistent(&self) -> bool {
        let p = !self.matched_pass_rules.is_empty();
        let f = !self.matched_fail_rules.is_empty();
        match self.verdict {
            Verdict::Pass => p && !f,
            Verdict::Fail => f && !p,
            Verdict::Warning => p == f,
        }
    }
}

fn matching(rules: &[crate::suite::Rule], text: &str) -> Vec<usize> {
    rules
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_match(text))
        .map(|(i, _)| i)
        .collect()
}

/// Applies an item's rules to one system output.
///
/// Pass-only matches pass, fail-only matches fail; no match or a pass/fail
/// conflict leaves a warning for a human.
pub fn judge(item: &TestItem, raw_output: &str, system_id: &str) -> AutoJudgment {
    let normalized_output = normalize(raw_output);
    let matched_pass_rules = matching(&item.pass_rules, &normalized_output);
    let matched_fail_rules = matching(&item.fail_rules, &normalized_output);
    let verdict = match (matched_pass_rules.is_empty(), matched_fail_rules.is_empty()) {
        (false, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
        _ => Verdict::Warning,
    };
    AutoJudgment {
        item_id: item.id.clone(),
        system_id: system_id.to_owned(),
        verdict,
        matched_pass_rules,
        matched_fail_rules,
        normalized_output,
        invalid_encoding: false,
    }
}

/// One system output as read from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawOutput {
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invalid_encoding: bool,
}

impl From<&str> for RawOutput {
    fn from(text: &str) -> Self {
        RawOutput {
            text: text.to_owned(),
            invalid_encoding: false,
        }
    }
}

impl From<String> for RawOutput {
    fn from(text: String) -> Self {
        RawOutput {
            text,
            invalid_encoding: false,
        }
    }
}

pub fn judge_raw(item: &TestItem, raw: &RawOutput, system_id: &str) -> AutoJudgment {
    let mut j = judge(item, &raw.text, system_id);
    if raw.invalid_encoding {
        j.verdict = Verdict::Warning;
        j.matched_pass_rules.clear();
        j.matched_fail_rules.clear();
        j.invalid_encoding = true;
    }
    j
}

/// Judges every suite item, in suite order.
pub fn apply_suite(
    suite: &TestSuite,
    outputs: &BTreeMap<String, RawOutput>,
    system_id: &str,
) -> Result<Vec<AutoJudgment>> {
    check_coverage(suite, outputs)?;
    Ok(suite
        .items()
        .iter()
        .map(|item| judge_raw(item, &outputs[&item.id], system_id))
        .collect())
}

pub(crate) fn check_coverage(suite: &TestSuite, outputs: &BTreeMap<String, RawOutput>) -> Result<()> {
    let missing: Vec<String> = suite
        .items()
        .iter()
        .filter(|i| !outputs.contains_key(&i.id))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingOutputs(missing));
    }
    let unknown: Vec<String> = outputs.keys().filter(|id| !suite.contains(id)).cloned().collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownOutputs(unknown));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: usize,
    pub fail: usize,
    pub warning: usize,
}

impl VerdictCounts {
    pub fn tally<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> Self {
        let mut c = VerdictCounts::default();
        for v in verdicts {
            match v {
                Verdict::Pass => c.pass += 1,
                Verdict::Fail => c.fail += 1,
                Verdict::Warning => c.warning += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.pass + self.fail + self.warning
    }
}

impl fmt::Display for VerdictCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} pass / {} fail / {} warning",
            self.pass, self.fail, self.warning
        )
    }
}

// ---------------------------------------------------------------------------
// System-output file

/// Parsed system-output file.
///
/// Format: one `<item id>\t<translation>` record per line. Lines starting
/// with `#` are comments, except a `#!` directive line which may declare
/// `suite=<name>` and `version=<version>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputFile {
    pub suite: Option<String>,
    pub version: Option<String>,
    pub outputs: BTreeMap<String, RawOutput>,
}

impl OutputFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, &path.display().to_string())
    }

    pub fn parse(bytes: &[u8], origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_owned(),
            line,
            message,
        };
        let mut file = OutputFile::default();
        for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix(b"\r").unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            if let Some(directive) = line.strip_prefix(b"#!") {
                let directive = String::from_utf8_lossy(directive);
                for token in directive.split_whitespace() {
                    match token.split_once('=') {
                        Some(("suite", v)) => file.suite = Some(v.to_owned()),
                        Some(("version", v)) => file.version = Some(v.to_owned()),
                        _ => return Err(err(lineno, format!("unknown directive {token:?}"))),
                    }
                }
                continue;
            }
            if line.starts_with(b"#") {
                continue;
            }
            let tab = line
                .iter()
                .position(|&b| b == b'\t')
                .ok_or_else(|| err(lineno, "expected <id>\\t<translation>".into()))?;
            let id = std::str::from_utf8(&line[..tab])
                .map_err(|_| err(lineno, "item id is not valid UTF-8".into()))?
                .trim();
            if id.is_empty() {
                return Err(err(lineno, "empty item id".into()));
            }
            let raw = &line[tab + 1..];
            let output = match std::str::from_utf8(raw) {
                Ok(s) => RawOutput::from(s),
                Err(_) => RawOutput {
                    text: String::from_utf8_lossy(raw).into_owned(),
                    invalid_encoding: true,
                },
            };
            if file.outputs.insert(id.to_owned(), output).is_some() {
                return Err(err(lineno, format!("duplicate item id {id:?}")));
            }
        }
        Ok(file)
    }

    /// Renders the file form; round-trips through [`OutputFile::parse`] for valid UTF-8 text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut directive = Vec::new();
        if let Some(s) = &self.suite {
            directive.push(format!("suite={s}"));
        }
        if let Some(v) = &self.version {
            directive.push(format!("version={v}"));
        }
        if !directive.is_empty() {
            out.push_str("#! ");
            out.push_str(&directive.join(" "));
            out.push('\n');
        }
        for (id, o) in &self.outputs {
            out.push_str(id);
            out.push('\t');
            out.push_str(&o.text.replace(['\n', '\r'], " "));
            out.push('\n');
        }
        out
    }
}
