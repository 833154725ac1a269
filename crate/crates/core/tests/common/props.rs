//! Property checks shared by the property tests and the acceptance runner.

use std::collections::BTreeMap;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

use lingeval_core::rules::{judge, normalize, OutputFile};
use lingeval_core::stats::{self, best_cluster, corpus_bleu, ztest, GroupAccuracy, SignificanceConfig};
use lingeval_core::{GroupBy, Polarity, Rule, Store, TestItem, TestSuite, Verdict};

pub type Outcome = Result<(), String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(reason, value) => format!("{reason} for input {value:?}"),
        TestError::Abort(reason) => format!("aborted: {reason}"),
    })
}

const WORDS: [&str; 10] = [
    "he", "read", "novels", "novellas", "die", "out", "had", "slept", "the", "cup",
];

fn sentence() -> impl Strategy<Value = String> {
    vec(
        (
            prop::sample::select(&WORDS[..]),
            prop::sample::select(&[" ", "  ", "\t", ", ", ". "][..]),
        ),
        0..8,
    )
    .prop_map(|ws| ws.into_iter().map(|(w, sep)| format!("{w}{sep}")).collect())
}

fn rule() -> impl Strategy<Value = Rule> {
    (
        prop::sample::select(&WORDS[..]),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(w, pass, regex, upper)| {
            let polarity = if pass { Polarity::Pass } else { Polarity::Fail };
            let w = if upper { w.to_uppercase() } else { w.to_owned() };
            if regex {
                Rule::regex(&format!(r"\b{w}\b"), polarity).unwrap()
            } else {
                Rule::literal(&w, polarity)
            }
        })
}

fn item(rules: Vec<Rule>) -> TestItem {
    TestItem::new("i", "Quelle", "Phenomenon", "Category", rules)
}

pub fn normalize_idempotent() -> Outcome {
    run(256, "\\PC{0,40}", |s| {
        let once = normalize(&s);
        prop_assert_eq!(normalize(&once), once);
        Ok(())
    })
}

pub fn judge_deterministic_and_consistent() -> Outcome {
    run(512, (vec(rule(), 0..5), sentence()), |(rules, output)| {
        let item = item(rules);
        let a = judge(&item, &output, "sys");
        let b = judge(&item, &output, "sys");
        prop_assert_eq!(&a, &b);
        prop_assert!(a.is_consistent());
        let expected = match (a.matched_pass_rules.is_empty(), a.matched_fail_rules.is_empty()) {
            (false, true) => Verdict::Pass,
            (true, false) => Verdict::Fail,
            _ => Verdict::Warning,
        };
        prop_assert_eq!(a.verdict, expected);
        for &i in &a.matched_pass_rules {
            prop_assert!(item.pass_rules[i].is_match(&a.normalized_output));
        }
        for &i in &a.matched_fail_rules {
            prop_assert!(item.fail_rules[i].is_match(&a.normalized_output));
        }
        Ok(())
    })
}

/// Adding a pass rule never makes a pass worse or a fail better than a warning.
pub fn pass_rule_addition_monotone() -> Outcome {
    run(
        512,
        (vec(rule(), 0..4), rule(), sentence()),
        |(rules, extra, output)| {
            let before = judge(&item(rules.clone()), &output, "sys").verdict;
            let mut more = rules;
            more.push(extra.clone());
            let after = judge(&item(more), &output, "sys").verdict;
            match extra.polarity() {
                Polarity::Pass => {
                    prop_assert!(before != Verdict::Pass || after == Verdict::Pass);
                    prop_assert!(after != Verdict::Fail || before == Verdict::Fail);
                }
                Polarity::Fail => {
                    prop_assert!(before != Verdict::Fail || after == Verdict::Fail);
                    prop_assert!(after != Verdict::Pass || before == Verdict::Pass);
                }
            }
            Ok(())
        },
    )
}

#[derive(Debug, Clone)]
enum Op {
    Resolve { run: usize, item: usize, pass: bool },
    AddRule { item: usize, rule: Rule },
    Rejudge,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..2usize, 0..4usize, any::<bool>()).prop_map(|(run, item, pass)| Op::Resolve { run, item, pass }),
        2 => (0..4usize, rule()).prop_map(|(item, rule)| Op::AddRule { item, rule }),
        1 => Just(Op::Rejudge),
    ]
}

/// Manual verdicts win over automatic ones through any sequence of
/// resolutions, rule additions and re-judges, and survive a reopen.
pub fn manual_precedence() -> Outcome {
    let outputs = [
        ["he read novels", "they had slept", "the cup", "die out"],
        ["he read novellas", "slept", "read the cup", "die"],
    ];
    run(48, vec(op(), 1..12), |ops| {
        let dir = tempfile::tempdir().unwrap();
        let items: Vec<TestItem> = (0..4)
            .map(|i| {
                TestItem::new(
                    format!("i{i}"),
                    "Quelle",
                    "P",
                    "C",
                    [Rule::literal(WORDS[i], Polarity::Pass)],
                )
            })
            .collect();
        let suite = TestSuite::new("prop", "1", items).unwrap();
        let mut store = Store::init(dir.path(), &suite).unwrap();
        let mut run_ids = Vec::new();
        for (s, outs) in outputs.iter().enumerate() {
            let file = OutputFile {
                suite: None,
                version: None,
                outputs: outs
                    .iter()
                    .enumerate()
                    .map(|(i, o)| (format!("i{i}"), (*o).into()))
                    .collect(),
            };
            run_ids.push(
                store
                    .ingest_run(&format!("s{s}"), &file)
                    .unwrap()
                    .run_id()
                    .to_owned(),
            );
        }
        let mut manual: BTreeMap<(usize, usize), Verdict> = BTreeMap::new();
        for op in ops {
            match op {
                Op::Resolve { run, item, pass } => {
                    let v = if pass { Verdict::Pass } else { Verdict::Fail };
                    store
                        .resolve(&run_ids[run], &format!("i{item}"), v, "prop", None, true)
                        .unwrap();
                    manual.insert((run, item), v);
                }
                Op::AddRule { item, rule } => {
                    store.add_rule(&format!("i{item}"), rule, "prop").unwrap();
                }
                Op::Rejudge => {
                    store.rejudge(&[]).unwrap();
                }
            }
            check_state(&store, &run_ids, &manual)?;
        }
        let reopened = Store::open(dir.path()).unwrap();
        prop_assert_eq!(reopened.runs(), store.runs());
        check_state(&reopened, &run_ids, &manual)
    })
}

fn check_state(
    store: &Store,
    run_ids: &[String],
    manual: &BTreeMap<(usize, usize), Verdict>,
) -> Result<(), TestCaseError> {
    for (r, id) in run_ids.iter().enumerate() {
        let run = store.run(id).unwrap();
        for i in 0..4 {
            let item = format!("i{i}");
            let eff = run.effective(&item).unwrap();
            match manual.get(&(r, i)) {
                Some(&v) => prop_assert_eq!(eff, v),
                None => prop_assert_eq!(eff, run.auto[&item].verdict),
            }
        }
    }
    Ok(())
}

fn counts() -> impl Strategy<Value = (u64, u64)> {
    (1u64..300).prop_flat_map(|n| (0..=n, Just(n)))
}

pub fn ztest_antisymmetric() -> Outcome {
    run(1024, (counts(), counts()), |((c1, n1), (c2, n2))| {
        let z = ztest(c1, n1, c2, n2);
        let back = ztest(c2, n2, c1, n1);
        prop_assert!(z == -back, "{} vs {}", z, back);
        prop_assert_eq!(ztest(c1, n1, c1, n1), 0.0);
        prop_assert_eq!(ztest(c1, n1, c1 * 2, n1 * 2), 0.0);
        Ok(())
    })
}

fn groups() -> impl Strategy<Value = Vec<GroupAccuracy>> {
    vec(counts(), 1..10).prop_map(|cs| {
        cs.into_iter()
            .enumerate()
            .map(|(i, (c, n))| GroupAccuracy::new(GroupBy::Category, format!("g{i}"), "s", c, n).unwrap())
            .collect()
    })
}

pub fn micro_between_extremes() -> Outcome {
    run(512, (groups(), 1u64..50), |(gs, size)| {
        let micro = stats::micro_average(&gs);
        let lo = gs.iter().map(|g| g.accuracy).fold(f64::INFINITY, f64::min);
        let hi = gs.iter().map(|g| g.accuracy).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= micro && micro <= hi + 1e-12);
        // equal group sizes: micro and macro coincide
        let equal: Vec<GroupAccuracy> = gs
            .iter()
            .map(|g| GroupAccuracy::new(g.kind, &g.group, "s", g.correct.min(size), size).unwrap())
            .collect();
        prop_assert!((stats::micro_average(&equal) - stats::macro_average(&equal)).abs() < 1e-12);
        Ok(())
    })
}

/// Relabeling systems does not change cluster membership, and a system
/// strictly dominated by a member's counts cannot enter without it.
pub fn cluster_relabel_invariant() -> Outcome {
    run(512, vec(counts(), 1..8), |cs| {
        let config = SignificanceConfig::default();
        let named = |prefix: &str| -> Vec<GroupAccuracy> {
            cs.iter()
                .enumerate()
                .map(|(i, &(c, n))| {
                    GroupAccuracy::new(GroupBy::Category, "g", format!("{prefix}{i:02}"), c, n).unwrap()
                })
                .collect()
        };
        let a = best_cluster(&named("a"), &config);
        let mut reversed = named("b");
        reversed.reverse();
        let b = best_cluster(&reversed, &config);
        let strip = |s: &String| s[1..].to_owned();
        let ma: Vec<String> = a.members.iter().map(strip).collect();
        let mb: Vec<String> = b.members.iter().map(strip).collect();
        prop_assert_eq!(ma, mb);
        prop_assert!(a.members.contains(&a.best));
        Ok(())
    })
}

pub fn bleu_properties() -> Outcome {
    run(256, vec((sentence(), sentence()), 1..6), |pairs| {
        let hyps: Vec<&String> = pairs.iter().map(|p| &p.0).collect();
        let refs: Vec<&String> = pairs.iter().map(|p| &p.1).collect();
        let nonempty = hyps.iter().any(|h| !h.trim().is_empty());
        if nonempty {
            prop_assert_eq!(corpus_bleu(&hyps, &hyps).unwrap(), 100.0);
        }
        let score = corpus_bleu(&hyps, &refs).unwrap();
        prop_assert!((0.0..=100.0).contains(&score));
        let mut rotated: Vec<(&String, &String)> = hyps.iter().copied().zip(refs.iter().copied()).collect();
        rotated.rotate_left(1);
        rotated.reverse();
        let (h2, r2): (Vec<&String>, Vec<&String>) = rotated.into_iter().unzip();
        prop_assert!((corpus_bleu(&h2, &r2).unwrap() - score).abs() < 1e-9);
        Ok(())
    })
}

/// Cuts the event log inside its last record, as if the writer had been
/// killed mid-append, and replays it.
pub fn crash_atomicity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = super::fixtures::demo_suite();
    let mut store = Store::init(dir.path(), &suite).map_err(|e| e.to_string())?;
    store
        .ingest_file(
            "alpha",
            super::fixtures::data_dir().join("demo/outputs-alpha.tsv"),
        )
        .map_err(|e| e.to_string())?;
    let before_runs = store.runs().to_vec();
    let log = dir.path().join("events.jsonl");
    let len_before = std::fs::metadata(&log).unwrap().len() as usize;
    store
        .ingest_file("beta", super::fixtures::data_dir().join("demo/outputs-beta.tsv"))
        .map_err(|e| e.to_string())?;
    let after_runs = store.runs().to_vec();
    let full = std::fs::read(&log).unwrap();
    drop(store);
    let copy = tempfile::tempdir().unwrap();
    copy_dir(dir.path(), copy.path());
    // every byte near both ends of the record, every 7th in between
    let cuts = (len_before..=full.len())
        .filter(|&c| c < len_before + 32 || c + 32 > full.len() || (c - len_before).is_multiple_of(7));
    for cut in cuts {
        std::fs::write(copy.path().join("events.jsonl"), &full[..cut]).unwrap();
        let reopened = Store::open(copy.path()).map_err(|e| format!("cut {cut}: {e}"))?;
        let expected = if cut == full.len() {
            &after_runs
        } else {
            &before_runs
        };
        if reopened.runs() != expected.as_slice() {
            return Err(format!(
                "cut at byte {cut}: replayed state is neither before nor after"
            ));
        }
        let kept = std::fs::metadata(copy.path().join("events.jsonl")).unwrap().len() as usize;
        let expected_len = if cut == full.len() { cut } else { len_before };
        if kept != expected_len {
            return Err(format!(
                "cut at byte {cut}: torn record left {kept} bytes in the log"
            ));
        }
    }
    Ok(())
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

pub type Check = fn() -> Outcome;

pub const ALL: [(&str, Check); 10] = [
    ("normalize is idempotent", normalize_idempotent),
    (
        "judge is deterministic and consistent with matched rules",
        judge_deterministic_and_consistent,
    ),
    (
        "rule addition moves verdicts monotonically",
        pass_rule_addition_monotone,
    ),
    (
        "manual verdicts take precedence under random operations",
        manual_precedence,
    ),
    (
        "ztest is antisymmetric and zero on equal proportions",
        ztest_antisymmetric,
    ),
    (
        "micro-average lies between group extremes",
        micro_between_extremes,
    ),
    (
        "cluster membership ignores system labels and order",
        cluster_relabel_invariant,
    ),
    (
        "BLEU identical = 100, bounded, permutation invariant",
        bleu_properties,
    ),
    (
        "store replays to before/after state when killed mid-append",
        crash_atomicity,
    ),
    ("taxonomy counts add up", taxonomy_totals),
];

pub fn taxonomy_totals() -> Outcome {
    let suite = super::fixtures::demo_suite();
    let stats = lingeval_core::suite::taxonomy_stats(&suite);
    let p: usize = stats.phenomena.iter().map(|p| p.1).sum();
    let c: usize = stats.categories.iter().map(|c| c.1).sum();
    if p == stats.total && c == stats.total && stats.total == suite.len() {
        Ok(())
    } else {
        Err(format!("phenomena {p}, categories {c}, total {}", stats.total))
    }
}
