mod common;

use common::fixtures::{data_dir, demo_suite, labeled_outputs};
use lingeval_core::report::{self, build_category_report, build_phenomenon_report, Format};
use lingeval_core::rules::{apply_suite, OutputFile, VerdictCounts};
use lingeval_core::store::WarningFilter;
use lingeval_core::suite::{taxonomy_stats, validate_suite, Severity};
use lingeval_core::{judge, SignificanceConfig, Store, Verdict};

#[test]
fn labeled_outputs_get_their_verdicts() {
    let suite = demo_suite();
    let labeled = labeled_outputs();
    assert!(labeled.iter().filter(|l| l.2 != Verdict::Warning).count() >= 12);
    for (item, output, expected) in &labeled {
        let j = judge(suite.item(item).unwrap(), output, "golden");
        assert_eq!(j.verdict, *expected, "{item}: {output:?}");
    }
}

#[test]
fn demo_suite_shape() {
    let suite = demo_suite();
    let stats = taxonomy_stats(&suite);
    assert_eq!(stats.total, 12);
    assert_eq!(stats.category("ambiguity"), Some(3));
    assert_eq!(stats.category("Verb tense/aspect/mood"), Some(3));
    assert_eq!(stats.categories.len(), 7);
    assert_eq!(stats.phenomena.len(), 10);
    // every phenomenon is below the recommended size, nothing structural
    let issues = validate_suite(&suite);
    assert!(issues.iter().all(|i| i.severity == Severity::Warning));
    assert_eq!(issues.len(), 10);
}

#[test]
fn scripted_outputs_count() {
    let suite = demo_suite();
    let expected = [("alpha", (7, 3, 2)), ("beta", (10, 2, 0)), ("gamma", (4, 8, 0))];
    for (system, (pass, fail, warning)) in expected {
        let file = OutputFile::load(data_dir().join(format!("demo/outputs-{system}.tsv"))).unwrap();
        let judgments = apply_suite(&suite, &file.outputs, system).unwrap();
        let counts = VerdictCounts::tally(judgments.iter().map(|j| &j.verdict));
        assert_eq!(counts, VerdictCounts { pass, fail, warning }, "{system}");
    }
}

#[test]
fn annotation_loop_on_demo() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::init(dir.path(), &demo_suite()).unwrap();
    let run = store
        .ingest_file("alpha", data_dir().join("demo/outputs-alpha.tsv"))
        .unwrap()
        .run_id()
        .to_owned();
    let pending = store.pending_warnings(&WarningFilter::default());
    assert_eq!(
        pending.iter().map(|w| w.item_id.as_str()).collect::<Vec<_>>(),
        ["ff-001", "val-002"]
    );
    assert_eq!(store.progress().valid_items, 10);

    store
        .resolve(
            &run,
            "val-002",
            Verdict::Fail,
            "ann",
            Some("drank up ≠ emptied".into()),
            false,
        )
        .unwrap();
    store
        .add_rule_spec("ff-001", "+lit:short stories", "ann", None)
        .unwrap();
    // rule additions take effect on rejudge only
    assert_eq!(store.pending_warnings(&WarningFilter::default()).len(), 1);
    let report = store.rejudge(&[]).unwrap();
    assert_eq!(report.changed.len(), 1);
    assert_eq!(report.changed[0].to, Verdict::Pass);
    assert!(store.pending_warnings(&WarningFilter::default()).is_empty());

    let progress = store.progress();
    assert_eq!(
        (
            progress.valid_items,
            progress.warning_items,
            progress.resolved_items
        ),
        (12, 2, 2)
    );
    let audit = store.audit_log().unwrap();
    assert_eq!(audit.len(), 2);
    assert_eq!(audit[0].actor, "ann");
    assert_eq!(audit[1].actor, "rejudge@1");

    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.runs(), store.runs());
    assert_eq!(reopened.suite().unwrap().revision(), 1);
}

#[test]
fn demo_reports_have_one_row_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::init(dir.path(), &demo_suite()).unwrap();
    for system in ["alpha", "beta", "gamma"] {
        store
            .ingest_file(system, data_dir().join(format!("demo/outputs-{system}.tsv")))
            .unwrap();
    }
    let runs: Vec<_> = store.runs().iter().map(|r| r.verdicts()).collect();
    let suite = store.suite().unwrap();
    let config = SignificanceConfig::default();
    let valid = store.valid_items();
    assert_eq!(valid, lingeval_core::stats::fair_item_set(&runs).unwrap());

    let cat = build_category_report(&runs, suite, &config, None).unwrap();
    let groups: std::collections::BTreeSet<&str> = valid
        .iter()
        .map(|id| suite.item(id).unwrap().category.as_str())
        .collect();
    assert_eq!(cat.rows.len(), groups.len());
    let phen = build_phenomenon_report(&runs, suite, &config, None).unwrap();
    assert!(phen.rows.len() >= cat.rows.len());

    // bold flags equal the cluster computed directly from the row counts
    for row in &cat.rows {
        let accs: Vec<_> = cat
            .columns
            .iter()
            .zip(&row.cells)
            .map(|(s, c)| match c.as_ref().unwrap() {
                report::Cell::Accuracy { correct, n, .. } => lingeval_core::GroupAccuracy::new(
                    lingeval_core::GroupBy::Category,
                    &row.group,
                    s,
                    *correct,
                    *n,
                )
                .unwrap(),
                _ => unreachable!(),
            })
            .collect();
        let cluster = lingeval_core::stats::best_cluster(&accs, &config);
        for (s, c) in cat.columns.iter().zip(&row.cells) {
            assert_eq!(c.as_ref().unwrap().bold(), cluster.members.contains(s));
        }
    }

    for format in [Format::Plain, Format::Markdown, Format::Csv, Format::Json] {
        assert_eq!(report::render(&cat, format), report::render(&cat, format));
    }
    let json = report::render(&cat, Format::Json);
    let back: lingeval_core::ReportTable = serde_json::from_str(&json).unwrap();
    assert_eq!(back, cat);
    let csv = report::parse_csv(&report::render(&cat, Format::Csv)).unwrap();
    assert_eq!(csv, report::csv_records(&cat));
}
