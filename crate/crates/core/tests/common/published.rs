//! Published per-category accuracies (one decimal) for the 2020 systems.

pub const SYSTEMS: [&str; 11] = [
    "Tohoku", "Huoshan", "UEdin", "Onl-B", "Onl-G", "Onl-A", "PROMT", "OPPO", "Onl-Z", "ZLabs", "WMTBi",
];

/// (category, items, accuracy in tenths of a percent per system in `SYSTEMS` order)
pub const CATEGORIES: [(&str, u64, [i64; 11]); 14] = [
    (
        "Ambiguity",
        81,
        [827, 778, 728, 790, 840, 765, 642, 827, 679, 457, 309],
    ),
    (
        "Composition",
        49,
        [980, 980, 939, 939, 959, 939, 898, 959, 857, 490, 449],
    ),
    (
        "Coordination & ellipsis",
        78,
        [897, 910, 897, 910, 859, 872, 872, 872, 603, 526, 449],
    ),
    (
        "False friends",
        36,
        [722, 806, 722, 806, 778, 694, 722, 667, 861, 528, 500],
    ),
    (
        "Function word",
        72,
        [861, 806, 861, 903, 903, 833, 889, 556, 889, 417, 431],
    ),
    (
        "LDD & interrogatives",
        174,
        [891, 862, 851, 833, 868, 776, 810, 586, 724, 483, 586],
    ),
    ("MWE", 80, [800, 750, 713, 775, 775, 713, 700, 788, 738, 450, 375]),
    (
        "Named entity & terminology",
        89,
        [921, 843, 876, 820, 820, 888, 876, 854, 685, 708, 730],
    ),
    (
        "Negation",
        20,
        [1000, 1000, 1000, 1000, 1000, 950, 1000, 1000, 950, 800, 1000],
    ),
    (
        "Non-verbal agreement",
        61,
        [918, 885, 885, 869, 902, 836, 820, 885, 852, 541, 574],
    ),
    (
        "Punctuation",
        60,
        [967, 983, 983, 717, 617, 1000, 983, 700, 283, 683, 550],
    ),
    (
        "Subordination",
        180,
        [906, 883, 911, 911, 922, 889, 900, 906, 878, 650, 622],
    ),
    (
        "Verb tense/aspect/mood",
        4447,
        [846, 853, 803, 759, 796, 775, 751, 793, 736, 505, 521],
    ),
    (
        "Verb valency",
        87,
        [793, 816, 770, 816, 770, 770, 713, 805, 644, 448, 517],
    ),
];

pub const MICRO: [i64; 11] = [853, 854, 812, 777, 806, 787, 765, 791, 736, 513, 524];
pub const MACRO: [i64; 11] = [881, 868, 853, 846, 843, 836, 827, 800, 741, 549, 544];

/// Systems printed without boldface in two rows.
pub const NEGATION_NOT_BOLD: [&str; 1] = ["ZLabs"];
pub const PUNCTUATION_NOT_BOLD: [&str; 6] = ["Onl-B", "Onl-G", "OPPO", "Onl-Z", "ZLabs", "WMTBi"];

pub const TOTAL_ITEMS: usize = 5560;
pub const VALID_ITEMS: usize = 5514;

/// Correct-count implied by a one-decimal percentage: round(pct × items / 100).
pub fn derived_correct(tenths: i64, items: u64) -> u64 {
    ((tenths as u64) * items + 500) / 1000
}

pub fn category(name: &str) -> &'static (&'static str, u64, [i64; 11]) {
    CATEGORIES.iter().find(|c| c.0 == name).expect("known category")
}

pub fn system_index(name: &str) -> usize {
    SYSTEMS.iter().position(|s| *s == name).expect("known system")
}
