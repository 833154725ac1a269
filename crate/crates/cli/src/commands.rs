use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use lingeval_core::report::{render, TableKind};
use lingeval_core::rules::OutputFile;
use lingeval_core::store::{IngestOutcome, WarningFilter};
use lingeval_core::suite::{self, validate_suite, Severity};
use lingeval_core::{Format, Rule, Store, TestSuite, Verdict};

use crate::config::{Config, Overrides};
use crate::error::{AppError, AppResult};
use crate::ops::{self, PairSpec, ReportRequest};

#[derive(Debug, Parser)]
#[command(
    name = "lingeval",
    version,
    about = "Rule-based test-suite evaluation of MT output"
)]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "LINGEVAL_STORE")]
    pub store: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true, env = "LINGEVAL_CONFIG")]
    pub config: Option<PathBuf>,
    /// One-tailed critical z for significance clusters.
    #[arg(long, global = true)]
    pub critical_z: Option<f64>,
    /// Annotator id recorded with resolutions and rules.
    #[arg(long, global = true, env = "LINGEVAL_ANNOTATOR")]
    pub annotator: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a store holding a suite.
    Init {
        #[arg(long)]
        suite: Option<PathBuf>,
    },
    /// Check a suite file and print its taxonomy counts.
    Validate {
        #[arg(long)]
        suite: Option<PathBuf>,
        /// File of expected category names, one per line.
        #[arg(long)]
        categories: Option<PathBuf>,
    },
    /// Judge one system's outputs and store the run.
    Apply {
        #[arg(long)]
        system: String,
        /// `<item id>\t<translation>` file.
        outputs: PathBuf,
        /// Suite to initialise the store with if it has none yet.
        #[arg(long)]
        suite: Option<PathBuf>,
    },
    /// List pending warnings.
    Warnings {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Record a manual verdict for a warning.
    Resolve(ResolveArgs),
    /// Rule maintenance.
    Rule {
        #[command(subcommand)]
        command: RuleCommand,
    },
    /// Re-judge runs under the current rules.
    Rejudge {
        /// Run or system ids; all runs when omitted.
        #[arg(long = "run")]
        runs: Vec<String>,
    },
    /// Render an accuracy or year-over-year table.
    Report {
        #[arg(long, default_value = "category")]
        kind: String,
        #[arg(long)]
        format: Option<String>,
        /// `LABEL=EARLIER:LATER` (run or system ids); years reports only.
        #[arg(long = "pair")]
        pairs: Vec<PairSpec>,
        /// Grouping for years reports.
        #[arg(long, default_value = "category")]
        by: String,
        /// `system\tscore` file for the BLEU footer row.
        #[arg(long)]
        bleu: Option<PathBuf>,
    },
    /// Per-group accuracy change between runs of one system.
    CompareYears {
        #[arg(long = "pair", required = true)]
        pairs: Vec<PairSpec>,
        #[arg(long, default_value = "category")]
        by: String,
        #[arg(long)]
        format: Option<String>,
    },
    /// Corpus BLEU of a hypothesis file against a reference file, one segment per line.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Per-group counts, z-scores and cluster membership as records.
    Stats {
        #[arg(long, default_value = "category")]
        by: String,
        /// `jsonl` or `csv`.
        #[arg(long, default_value = "jsonl")]
        format: String,
    },
    /// Item, warning and valid-item counts.
    Progress {
        #[arg(long)]
        json: bool,
    },
    /// Manual decisions and automatic verdict changes in log order.
    Audit {
        #[arg(long)]
        json: bool,
    },
    /// Serve the JSON API (and the annotation UI bundle, if configured).
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Default)]
pub struct FilterArgs {
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long)]
    pub phenomenon: Option<String>,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    /// Run or system id.
    #[arg(required_unless_present = "batch")]
    pub run: Option<String>,
    #[arg(required_unless_present = "batch")]
    pub item: Option<String>,
    #[arg(required_unless_present = "batch")]
    pub verdict: Option<Verdict>,
    #[arg(long)]
    pub rationale: Option<String>,
    /// Replace an existing verdict instead of requiring a pending warning.
    #[arg(long = "override")]
    pub override_existing: bool,
    /// `item\tverdict[\trationale]` file; needs `--run`.
    #[arg(long, requires = "batch_run", conflicts_with_all = ["run", "item", "verdict"])]
    pub batch: Option<PathBuf>,
    #[arg(long = "run")]
    pub batch_run: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum RuleCommand {
    /// Append a rule (`+lit:…`, `-re:…`) to an item.
    Add {
        item: String,
        rule: String,
        #[arg(long)]
        comment: Option<String>,
    },
    /// Show how a rule would change current verdicts, without saving it.
    Preview { item: String, rule: String },
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            store: self.store.clone(),
            critical_z: self.critical_z,
            annotator: self.annotator.clone(),
        }
    }
}

fn suite_path(explicit: &Option<PathBuf>, config: &Config) -> AppResult<PathBuf> {
    explicit
        .clone()
        .or_else(|| config.suite.clone())
        .ok_or_else(|| AppError::usage("no suite given (--suite or `suite` in the config file)"))
}

fn format_of(explicit: &Option<String>, config: &Config) -> AppResult<Format> {
    match explicit {
        Some(f) => f.parse().map_err(AppError::usage),
        None => Ok(config.format),
    }
}

fn annotator(config: &Config) -> AppResult<String> {
    config
        .annotator
        .clone()
        .ok_or_else(|| AppError::usage("no annotator id (--annotator or LINGEVAL_ANNOTATOR)"))
}

fn load_checked_suite(path: &Path) -> AppResult<TestSuite> {
    let suite = suite::load_suite(path)?;
    let errors: Vec<String> = validate_suite(&suite)
        .into_iter()
        .filter(|i| i.severity == Severity::Error)
        .map(|i| i.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(AppError::usage(errors.join("\n")));
    }
    Ok(suite)
}

/// Runs one command, writing its report to `out`. `serve` blocks until shutdown.
pub fn run(cli: Cli, out: &mut dyn Write) -> AppResult<()> {
    let config = Config::resolve(&cli.overrides())?;
    match cli.command {
        Command::Init { suite } => {
            let path = suite_path(&suite, &config)?;
            let suite = load_checked_suite(&path)?;
            let store = Store::init(&config.store, &suite)?;
            writeln!(
                out,
                "initialised {} with suite {} {} ({} items)",
                store.dir().display(),
                suite.name(),
                suite.version(),
                suite.len()
            )?;
        }
        Command::Validate { suite, categories } => {
            validate(&suite_path(&suite, &config)?, categories.as_deref(), out)?
        }
        Command::Apply {
            system,
            outputs,
            suite,
        } => {
            let mut store = Store::open(&config.store)?;
            if store.suite().is_none() {
                let path = suite_path(&suite, &config).map_err(|_| lingeval_core::Error::NoSuite)?;
                store = Store::init(&config.store, &load_checked_suite(&path)?)?;
            }
            let file = OutputFile::load(&outputs)?;
            let invalid = file.outputs.values().filter(|o| o.invalid_encoding).count();
            let outcome = store.ingest_run(&system, &file)?;
            let run = store.run(outcome.run_id()).expect("ingested run");
            match outcome {
                IngestOutcome::Created(id) => writeln!(out, "{id}: {}", run.auto_counts())?,
                IngestOutcome::Existing(id) => {
                    writeln!(out, "run exists (idempotent): {id}: {}", run.counts())?
                }
            }
            if invalid > 0 {
                writeln!(
                    out,
                    "{invalid} output(s) were not valid UTF-8 and are left as warnings"
                )?;
            }
        }
        Command::Warnings { filter, json } => {
            let store = Store::open(&config.store)?;
            let filter = WarningFilter {
                system: filter.system,
                category: filter.category,
                phenomenon: filter.phenomenon,
            };
            let pending = store.pending_warnings(&filter);
            if json {
                serde_json::to_writer_pretty(&mut *out, &pending).map_err(std::io::Error::from)?;
                writeln!(out)?;
            } else {
                for w in &pending {
                    writeln!(out, "{}\t{}\t{}\t{}", w.run_id, w.item_id, w.phenomenon, w.output)?;
                }
                writeln!(out, "{} pending warning(s)", pending.len())?;
            }
        }
        Command::Resolve(args) => resolve(args, &config, out)?,
        Command::Rule { command } => {
            let mut store = Store::open(&config.store)?;
            match command {
                RuleCommand::Add { item, rule, comment } => {
                    let item = store.add_rule_spec(&item, &rule, &annotator(&config)?, comment)?;
                    writeln!(
                        out,
                        "{}: {} rule(s), suite revision {}; run `rejudge` to apply",
                        item.id,
                        item.rule_count(),
                        store.suite().expect("suite").revision()
                    )?;
                }
                RuleCommand::Preview { item, rule } => {
                    let parsed =
                        Rule::parse(&rule).map_err(|reason| lingeval_core::Error::InvalidPattern {
                            item: item.clone(),
                            pattern: rule.clone(),
                            reason,
                        })?;
                    for p in store.preview_rule(&item, &parsed)? {
                        writeln!(
                            out,
                            "{}\t{}\t{} -> {}\t{}",
                            p.run_id,
                            if p.matches { "match" } else { "no match" },
                            p.current,
                            p.after,
                            p.output
                        )?;
                    }
                }
            }
        }
        Command::Rejudge { runs } => {
            let mut store = Store::open(&config.store)?;
            let runs = runs
                .iter()
                .map(|r| ops::resolve_run(&store, r))
                .collect::<AppResult<Vec<_>>>()?;
            let report = store.rejudge(&runs)?;
            for c in &report.changed {
                writeln!(out, "{}\t{}\t{} -> {}", c.run_id, c.item_id, c.from, c.to)?;
            }
            writeln!(
                out,
                "revision {}: {} verdict(s) changed, {} manual verdict(s) kept",
                report.revision,
                report.changed.len(),
                report.unchanged_manual
            )?;
        }
        Command::Report {
            kind,
            format,
            pairs,
            by,
            bleu,
        } => {
            let store = Store::open(&config.store)?;
            let bleu = bleu.as_deref().map(ops::load_bleu_scores).transpose()?;
            let table = ops::build_report(
                &store,
                &ReportRequest {
                    kind: ops::table_kind(&kind)?,
                    pairs: &pairs,
                    by: ops::group_by(&by)?,
                    bleu: bleu.as_ref(),
                    significance: config.significance,
                },
            )?;
            out.write_all(render(&table, format_of(&format, &config)?).as_bytes())?;
        }
        Command::CompareYears { pairs, by, format } => {
            let store = Store::open(&config.store)?;
            let table = ops::build_report(
                &store,
                &ReportRequest {
                    kind: TableKind::Years,
                    pairs: &pairs,
                    by: ops::group_by(&by)?,
                    bleu: None,
                    significance: config.significance,
                },
            )?;
            out.write_all(render(&table, format_of(&format, &config)?).as_bytes())?;
        }
        Command::Bleu { hyp, reference } => {
            let read = |p: &Path| -> AppResult<Vec<String>> {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| AppError::usage(format!("{}: {e}", p.display())))?;
                Ok(text.lines().map(str::to_owned).collect())
            };
            let score = lingeval_core::stats::corpus_bleu(&read(&hyp)?, &read(&reference)?)?;
            writeln!(out, "BLEU = {score:.2}")?;
        }
        Command::Stats { by, format } => {
            let store = Store::open(&config.store)?;
            let records = ops::stats_records(&store, ops::group_by(&by)?, &config.significance)?;
            out.write_all(ops::render_stats(&records, &format)?.as_bytes())?;
        }
        Command::Progress { json } => {
            let store = Store::open(&config.store)?;
            let p = store.progress();
            if json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&p).map_err(std::io::Error::from)?
                )?;
            } else {
                writeln!(
                    out,
                    "{} valid of {} items; {} item(s) had warnings, {} resolved; {} pending over {} run(s)",
                    p.valid_items, p.total_items, p.warning_items, p.resolved_items, p.pending, p.runs
                )?;
            }
        }
        Command::Audit { json } => {
            let store = Store::open(&config.store)?;
            let log = store.audit_log()?;
            if json {
                serde_json::to_writer_pretty(&mut *out, &log).map_err(std::io::Error::from)?;
                writeln!(out)?;
            } else {
                for e in &log {
                    writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{} -> {}",
                        e.at.to_rfc3339(),
                        e.actor,
                        e.run_id,
                        e.item_id,
                        e.from,
                        e.to
                    )?;
                }
            }
        }
        Command::Serve { bind, ui } => {
            let mut config = config;
            if let Some(b) = bind {
                config.bind = b;
            }
            if ui.is_some() {
                config.ui_dir = ui;
            }
            crate::server::serve_blocking(config, out)?;
        }
    }
    Ok(())
}

fn validate(path: &Path, categories: Option<&Path>, out: &mut dyn Write) -> AppResult<()> {
    let suite = suite::load_suite(path)?;
    let issues = validate_suite(&suite);
    for issue in &issues {
        writeln!(out, "{issue}")?;
    }
    let stats = suite::taxonomy_stats(&suite);
    if let Some(list) = categories {
        let text =
            std::fs::read_to_string(list).map_err(|e| AppError::usage(format!("{}: {e}", list.display())))?;
        let known: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        for (category, _) in &stats.categories {
            if !known.iter().any(|k| k.eq_ignore_ascii_case(category)) {
                writeln!(out, "warning: category {category:?} is not in {}", list.display())?;
            }
        }
    }
    for (category, n) in &stats.categories {
        writeln!(out, "{category}\t{n}")?;
    }
    writeln!(
        out,
        "{} items, {} phenomena, {} categories",
        stats.total,
        stats.phenomena.len(),
        stats.categories.len()
    )?;
    let errors = issues.iter().filter(|i| i.severity == Severity::Error).count();
    if errors > 0 {
        return Err(AppError::usage(format!(
            "{errors} error(s) in {}",
            path.display()
        )));
    }
    Ok(())
}

fn resolve(args: ResolveArgs, config: &Config, out: &mut dyn Write) -> AppResult<()> {
    let mut store = Store::open(&config.store)?;
    let annotator = annotator(config)?;
    if let Some(batch) = args.batch {
        let run = ops::resolve_run(&store, args.batch_run.as_deref().expect("clap requires --run"))?;
        let text = std::fs::read_to_string(&batch)
            .map_err(|e| AppError::usage(format!("{}: {e}", batch.display())))?;
        let requests = ops::parse_batch(&text, &batch.display().to_string(), &run)?;
        let done = store.resolve_batch(&requests, &annotator, args.override_existing)?;
        let pass = done.iter().filter(|r| r.verdict == Verdict::Pass).count();
        writeln!(
            out,
            "resolved {} warning(s) in {run}: {pass} pass / {} fail",
            done.len(),
            done.len() - pass
        )?;
    } else {
        let run = ops::resolve_run(&store, args.run.as_deref().expect("clap requires run"))?;
        let item = args.item.expect("clap requires item");
        let verdict = args.verdict.expect("clap requires verdict");
        store.resolve(
            &run,
            &item,
            verdict,
            &annotator,
            args.rationale,
            args.override_existing,
        )?;
        writeln!(out, "{run}\t{item}\t{verdict}")?;
    }
    let p = store.progress();
    writeln!(
        out,
        "{} valid of {} items, {} pending",
        p.valid_items, p.total_items, p.pending
    )?;
    Ok(())
}
