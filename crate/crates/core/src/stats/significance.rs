use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GroupAccuracy;

/// One-tailed critical value at 95% confidence.
pub const DEFAULT_CRITICAL_Z: f64 = 1.6449;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceConfig {
    pub critical_z: f64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig {
            critical_z: DEFAULT_CRITICAL_Z,
        }
    }
}

impl SignificanceConfig {
    pub fn new(critical_z: f64) -> Result<Self, String> {
        if critical_z.is_finite() && critical_z > 0.0 {
            Ok(SignificanceConfig { critical_z })
        } else {
            Err(format!("critical z must be positive, got {critical_z}"))
        }
    }
}

/// Pooled two-proportion z statistic for `p1 > p2`.
///
/// When the pooled proportion is 0 or 1 the standard error vanishes; the
/// statistic is then 0 for equal proportions and signed infinity otherwise.
pub fn ztest(correct1: u64, n1: u64, correct2: u64, n2: u64) -> f64 {
    assert!(n1 > 0 && n2 > 0, "ztest needs non-empty samples");
    let order = compare(correct1, n1, correct2, n2);
    if order == Ordering::Equal {
        return 0.0;
    }
    let (c1, m1, c2, m2) = (correct1 as f64, n1 as f64, correct2 as f64, n2 as f64);
    let pooled = (c1 + c2) / (m1 + m2);
    let se = (pooled * (1.0 - pooled) * (1.0 / m1 + 1.0 / m2)).sqrt();
    if se == 0.0 {
        return if order == Ordering::Greater {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    (c1 / m1 - c2 / m2) / se
}

/// Exact comparison of `c1/n1` with `c2/n2`.
fn compare(c1: u64, n1: u64, c2: u64, n2: u64) -> Ordering {
    (c1 as u128 * n2 as u128).cmp(&(c2 as u128 * n1 as u128))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub group: String,
    pub best: String,
    /// Systems not significantly below the best one.
    pub members: BTreeSet<String>,
    /// z of the best system against each system (0 for the best itself).
    pub z_scores: BTreeMap<String, f64>,
}

/// Compares every system in one group against the most accurate one.
///
/// Ties on the top accuracy pick the smallest system id as `best`; tied
/// systems have z = 0 and are members either way.
pub fn best_cluster(accuracies: &[GroupAccuracy], config: &SignificanceConfig) -> ClusterResult {
    let best = accuracies
        .iter()
        .max_by(|a, b| compare(a.correct, a.n, b.correct, b.n).then_with(|| b.system_id.cmp(&a.system_id)))
        .expect("best_cluster needs at least one system");
    let mut members = BTreeSet::new();
    let mut z_scores = BTreeMap::new();
    for acc in accuracies {
        let z = ztest(best.correct, best.n, acc.correct, acc.n);
        if z < config.critical_z {
            members.insert(acc.system_id.clone());
        }
        z_scores.insert(acc.system_id.clone(), z);
    }
    ClusterResult {
        group: best.group.clone(),
        best: best.system_id.clone(),
        members,
        z_scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::GroupBy;

    fn acc(system: &str, correct: u64, n: u64) -> GroupAccuracy {
        GroupAccuracy::new(GroupBy::Category, "g", system, correct, n).unwrap()
    }

    // Direct evaluation of the pooled formula, written out independently.
    fn oracle_z(c1: f64, n1: f64, c2: f64, n2: f64) -> f64 {
        let p = (c1 + c2) / (n1 + n2);
        (c1 / n1 - c2 / n2) / (p * (1.0 - p) * (1.0 / n1 + 1.0 / n2)).sqrt()
    }

    #[test]
    fn negation_pair() {
        let z = ztest(20, 20, 19, 20);
        assert!((z - 1.0127).abs() < 1e-4, "{z}");
        assert!((z - oracle_z(20.0, 20.0, 19.0, 20.0)).abs() < 1e-12);
        assert!(z < DEFAULT_CRITICAL_Z);
    }

    #[test]
    fn punctuation_pair() {
        let z = ztest(60, 60, 43, 60);
        assert!((z - 4.4499).abs() < 1e-3, "{z}");
        assert!(z > DEFAULT_CRITICAL_Z);
    }

    #[test]
    fn equal_and_degenerate() {
        assert_eq!(ztest(5, 10, 10, 20), 0.0);
        assert_eq!(ztest(0, 10, 0, 30), 0.0);
        assert_eq!(ztest(10, 10, 30, 30), 0.0);
        assert_eq!(ztest(3, 7, 5, 9), -ztest(5, 9, 3, 7));
    }

    #[test]
    fn ties_at_the_top_are_members() {
        let accs = [acc("b", 20, 20), acc("a", 20, 20), acc("c", 16, 20)];
        let c = best_cluster(&accs, &SignificanceConfig::default());
        assert_eq!(c.best, "a");
        assert_eq!(c.members, ["a", "b"].iter().map(|s| s.to_string()).collect());
        assert_eq!(c.z_scores["b"], 0.0);
    }

    #[test]
    fn single_system_is_its_own_cluster() {
        let c = best_cluster(&[acc("only", 3, 9)], &SignificanceConfig::default());
        assert_eq!(c.best, "only");
        assert!(c.members.contains("only"));
    }

    #[test]
    fn config_rejects_non_positive() {
        assert!(SignificanceConfig::new(0.0).is_err());
        assert!(SignificanceConfig::new(f64::NAN).is_err());
        assert!(SignificanceConfig::new(1.96).is_ok());
    }
}
