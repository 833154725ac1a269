//! Rule-based evaluation of machine translation output against a
//! linguistic test suite.
//!
//! The pipeline: load a [`suite::TestSuite`], judge system outputs with
//! [`rules::judge`], keep runs and human resolutions in a [`store::Store`],
//! then compute accuracies and significance clusters with [`stats`] and
//! render them with [`report`].

pub mod error;
mod fsutil;
pub mod report;
pub mod rules;
pub mod stats;
pub mod store;
pub mod suite;

pub use error::{Error, ErrorClass, Result};
pub use report::{Format, ReportTable};
pub use rules::{judge, normalize, AutoJudgment, OutputFile, RawOutput, Verdict};
pub use stats::{GroupAccuracy, RunVerdicts, SignificanceConfig};
pub use store::{EvaluationRun, ProgressSummary, Store};
pub use suite::{load_suite, GroupBy, Polarity, Rule, RuleKind, TestItem, TestSuite};
