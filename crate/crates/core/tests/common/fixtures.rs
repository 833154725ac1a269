use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lingeval_core::rules::OutputFile;
use lingeval_core::store::Resolution;
use lingeval_core::{Polarity, RawOutput, Rule, Store, TestItem, TestSuite, Verdict};

use super::published;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn demo_suite() -> TestSuite {
    lingeval_core::load_suite(data_dir().join("demo/suite.jsonl")).expect("demo suite loads")
}

/// `(item, output, expected verdict)` rows of the labeled demo file.
pub fn labeled_outputs() -> Vec<(String, String, Verdict)> {
    let text = std::fs::read_to_string(data_dir().join("demo/labeled.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 3, "bad labeled line {l:?}");
            (f[0].to_owned(), f[1].to_owned(), f[2].parse().unwrap())
        })
        .collect()
}

fn synthetic_item(id: &str, phenomenon: &str, category: &str) -> TestItem {
    TestItem::new(
        id,
        format!("Quelle {id}"),
        phenomenon,
        category,
        [
            Rule::literal(&format!("<ok {id}>"), Polarity::Pass),
            Rule::literal(&format!("<bad {id}>"), Polarity::Fail),
        ],
    )
}

fn scripted_output(id: &str, verdict: Verdict) -> RawOutput {
    match verdict {
        Verdict::Pass => format!("translation <ok {id}>").into(),
        Verdict::Fail => format!("translation <bad {id}>").into(),
        Verdict::Warning => "an unforeseen translation".into(),
    }
}

pub struct FullScale {
    pub store: Store,
    /// Manual resolutions applied after ingestion, per run.
    pub resolved: usize,
    /// Warnings left open on purpose.
    pub unresolved: usize,
}

pub const EXTRA_CATEGORY: &str = "Verb tense/aspect/mood";
pub const EXTRA_ITEMS: usize = published::TOTAL_ITEMS - published::VALID_ITEMS;

/// 5,560 items over the 14 categories, 11 systems whose pass counts per
/// category follow the published table. Roughly one output in ten comes out
/// as a warning and is resolved by script to its intended verdict; the 46
/// extra items each keep one unresolved warning.
pub fn full_scale(dir: &Path) -> FullScale {
    let mut items = Vec::new();
    // (category index, position within category) per item
    let mut plan: Vec<(usize, usize, bool)> = Vec::new();
    for (ci, (name, n, _)) in published::CATEGORIES.iter().enumerate() {
        let total = *n as usize + if *name == EXTRA_CATEGORY { EXTRA_ITEMS } else { 0 };
        let phenomena = (total / 50).max(1);
        for k in 0..total {
            let id = format!("c{ci:02}-{k:04}");
            let phenomenon = format!("{name} / p{}", k % phenomena + 1);
            items.push(synthetic_item(&id, &phenomenon, name));
            plan.push((ci, k, k >= *n as usize));
        }
    }
    assert_eq!(items.len(), published::TOTAL_ITEMS);
    let suite = TestSuite::new("full-scale", "2020", items).unwrap();
    let mut store = Store::init(dir, &suite).unwrap();

    let mut scripted: Vec<(String, Vec<Resolution>)> = Vec::new();
    let mut unresolved = 0;
    for (si, system) in published::SYSTEMS.iter().enumerate() {
        let mut outputs = BTreeMap::new();
        let mut to_resolve = Vec::new();
        for (item, &(ci, k, extra)) in suite.items().iter().zip(&plan) {
            let (_, n, accs) = published::CATEGORIES[ci];
            let n = n as usize;
            let intended = if extra {
                if k % 2 == 0 {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            } else {
                let correct = published::derived_correct(accs[si], n as u64) as usize;
                if (k + 7 * si) % n < correct {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            };
            let stuck = extra && (k % published::SYSTEMS.len()) == si;
            let warn = stuck || (k * 31 + si * 17) % 10 == 0;
            if stuck {
                unresolved += 1;
            } else if warn {
                to_resolve.push(Resolution {
                    run_id: String::new(),
                    item_id: item.id.clone(),
                    verdict: intended,
                    rationale: None,
                });
            }
            let v = if warn { Verdict::Warning } else { intended };
            outputs.insert(item.id.clone(), scripted_output(&item.id, v));
        }
        let file = OutputFile {
            suite: Some("full-scale".into()),
            version: Some("2020".into()),
            outputs,
        };
        let run_id = store.ingest_run(system, &file).unwrap().run_id().to_owned();
        for r in &mut to_resolve {
            r.run_id = run_id.clone();
        }
        scripted.push((run_id, to_resolve));
    }
    let mut resolved = 0;
    for (_, batch) in &scripted {
        store.resolve_batch(batch, "fixture", false).unwrap();
        resolved += batch.len();
    }
    FullScale {
        store,
        resolved,
        unresolved,
    }
}

pub const YEAR_CATEGORIES: [(&str, usize); 2] = [("LDD & interrogatives", 174), ("Function word", 72)];

/// One system evaluated in two years on a suite with two categories.
///
/// LDD & interrogatives: 120 → 152 correct of 174 common items.
/// Function word: 8 items are warnings in the earlier run, leaving 64 common
/// items with 57 → 58 correct.
pub fn cross_year(dir: &Path) -> (Store, String, String) {
    let mut items = Vec::new();
    for (ci, (name, n)) in YEAR_CATEGORIES.iter().enumerate() {
        for k in 0..*n {
            items.push(synthetic_item(
                &format!("y{ci}-{k:03}"),
                &format!("{name} / p1"),
                name,
            ));
        }
    }
    let suite = TestSuite::new("years", "2019-2020", items).unwrap();
    let mut store = Store::init(dir, &suite).unwrap();
    let run = |store: &mut Store, system: &str, verdict: &dyn Fn(usize, usize) -> Verdict| {
        let outputs = suite
            .items()
            .iter()
            .map(|item| {
                let (ci, k) = item.id[1..].split_once('-').unwrap();
                let v = verdict(ci.parse().unwrap(), k.parse().unwrap());
                (item.id.clone(), scripted_output(&item.id, v))
            })
            .collect();
        let file = OutputFile {
            suite: None,
            version: None,
            outputs,
        };
        store.ingest_run(system, &file).unwrap().run_id().to_owned()
    };
    let pf = |ok: bool| if ok { Verdict::Pass } else { Verdict::Fail };
    let earlier = run(&mut store, "Onl-G@2019", &|ci, k| match ci {
        0 => pf(k < 120),
        _ if k >= 64 => Verdict::Warning,
        _ => pf(k < 57),
    });
    let later = run(&mut store, "Onl-G@2020", &|ci, k| match ci {
        0 => pf(k >= 174 - 152),
        _ => pf(k < 58),
    });
    (store, earlier, later)
}
