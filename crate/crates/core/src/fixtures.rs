//! A small hand-built capture/recapture instance.
//!
//! Seven subjects `1..=7` recruited from one seed with two coupons each,
//! plus five outsiders `A..=E`. With up to five reports per subject the
//! recapture is deterministic:
//!
//! ```text
//! 1 → C, D     2 → 5     3 → (nobody)     4 → A
//! 5 → 2, A, B, C         6 → 7            7 → 6, E
//! ```
//!
//! giving `rS = {C, D, 5, A, A, 2, B, C, 7, 6, E}`.
//!
//! Vertex ids: subject `k` is `k - 1`, outsider `A` is 7 through `E` = 11.

use crate::graph::Graph;
use crate::multiset::Multiset;
use crate::rds::RdsForest;

/// Vertex id of subject `k` (1-based label).
pub fn subject(k: usize) -> usize {
    assert!((1..=7).contains(&k));
    k - 1
}

/// Vertex id of outsider `label` in `'A'..='E'`.
pub fn outsider(label: char) -> usize {
    assert!(('A'..='E').contains(&label));
    7 + (label as usize - 'A' as usize)
}

fn id(label: char) -> usize {
    match label {
        '1'..='7' => subject(label as usize - '0' as usize),
        _ => outsider(label),
    }
}

const TREE: [(char, char); 6] = [
    ('1', '2'),
    ('1', '3'),
    ('3', '4'),
    ('3', '5'),
    ('4', '6'),
    ('5', '7'),
];

const REPORT_EDGES: [(char, char); 9] = [
    ('1', 'C'),
    ('1', 'D'),
    ('2', '5'),
    ('4', 'A'),
    ('5', 'A'),
    ('5', 'B'),
    ('5', 'C'),
    ('6', '7'),
    ('7', 'E'),
];

/// The population graph and the capture forest rooted at subject 1.
pub fn worked_example() -> (Graph, RdsForest) {
    let edges = TREE
        .iter()
        .chain(REPORT_EDGES.iter())
        .map(|&(a, b)| (id(a), id(b)));
    let graph = Graph::from_edges(12, edges).expect("fixture graph is valid");
    let forest = RdsForest::from_parts(
        std::iter::once((subject(1), None)).chain(TREE.iter().map(|&(r, s)| (id(s), Some(id(r))))),
    )
    .expect("fixture forest is valid");
    (graph, forest)
}

/// `rS` for the worked example.
pub fn worked_example_reports() -> Multiset<usize> {
    "CD5AA2BC76E".chars().map(id).collect()
}
