//! Respondent-driven capture and peer-report recapture.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::multiset::Multiset;
use crate::seed;

#[derive(Debug, Error)]
pub enum RdsError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed referral forest: {0}")]
    MalformedForest(String),
    #[error("tree edge ({0}, {1}) is not an edge of the graph")]
    ForeignEdge(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Capture sample `(S, T)`: subjects in interview order plus the
/// recruiter → recruitee edges of the referral forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RdsForest {
    subjects: Vec<usize>,
    recruiter: Vec<Option<usize>>,
    position: BTreeMap<usize, usize>,
    recruitees: Vec<Vec<usize>>,
    exhausted: bool,
}

impl RdsForest {
    fn empty() -> Self {
        Self {
            subjects: Vec::new(),
            recruiter: Vec::new(),
            position: BTreeMap::new(),
            recruitees: Vec::new(),
            exhausted: false,
        }
    }

    fn push(&mut self, subject: usize, recruiter: Option<usize>) {
        let idx = self.subjects.len();
        self.subjects.push(subject);
        self.recruiter.push(recruiter);
        self.recruitees.push(Vec::new());
        self.position.insert(subject, idx);
        if let Some(r) = recruiter {
            let ridx = self.position[&r];
            self.recruitees[ridx].push(subject);
        }
    }

    /// Assemble a forest from subjects in interview order, each paired with
    /// its recruiter (`None` for seeds). Every recruiter must be an earlier
    /// subject, so the result is acyclic with at most one inbound edge per
    /// subject.
    pub fn from_parts(
        parts: impl IntoIterator<Item = (usize, Option<usize>)>,
    ) -> Result<Self, RdsError> {
        let mut forest = Self::empty();
        for (subject, recruiter) in parts {
            if forest.position.contains_key(&subject) {
                return Err(RdsError::MalformedForest(format!(
                    "subject {subject} appears twice"
                )));
            }
            if let Some(r) = recruiter {
                if !forest.position.contains_key(&r) {
                    return Err(RdsError::MalformedForest(format!(
                        "recruiter {r} of subject {subject} is not an earlier subject"
                    )));
                }
            }
            forest.push(subject, recruiter);
        }
        Ok(forest)
    }

    /// Subjects in interview order.
    pub fn subjects(&self) -> &[usize] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.position.contains_key(&v)
    }

    /// Interview-order index of a subject.
    pub fn position(&self, v: usize) -> Option<usize> {
        self.position.get(&v).copied()
    }

    pub fn recruiter_of(&self, v: usize) -> Option<usize> {
        self.position(v).and_then(|i| self.recruiter[i])
    }

    pub fn recruitees_of(&self, v: usize) -> &[usize] {
        self.position(v)
            .map(|i| self.recruitees[i].as_slice())
            .unwrap_or(&[])
    }

    /// Recruiter plus recruitees, sorted.
    pub fn tree_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.recruitees_of(v).to_vec();
        out.extend(self.recruiter_of(v));
        out.sort_unstable();
        out
    }

    /// Subjects with no recruiter, in interview order.
    pub fn seeds(&self) -> Vec<usize> {
        self.subjects
            .iter()
            .zip(&self.recruiter)
            .filter(|(_, r)| r.is_none())
            .map(|(&s, _)| s)
            .collect()
    }

    /// Recruiter → recruitee pairs in recruitee interview order.
    pub fn tree_edges(&self) -> Vec<(usize, usize)> {
        self.subjects
            .iter()
            .zip(&self.recruiter)
            .filter_map(|(&s, r)| r.map(|r| (r, s)))
            .collect()
    }

    /// Capture ran out of population before reaching its target.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// `S` as a multiset (every multiplicity one).
    pub fn subject_set(&self) -> Multiset<usize> {
        self.subjects.iter().copied().collect()
    }

    /// The referral forest as an undirected graph on interview-order
    /// indices `0..|S|`.
    pub fn tree_graph(&self) -> Graph {
        let edges = self
            .tree_edges()
            .into_iter()
            .map(|(r, s)| (self.position[&r], self.position[&s]));
        Graph::from_edges(self.len(), edges).expect("forest edges are valid by construction")
    }

    /// Relabel subjects through `f` (which must be injective on `S`).
    pub fn relabel(&self, mut f: impl FnMut(usize) -> usize) -> Result<Self, RdsError> {
        let mut out = Self::from_parts(
            self.subjects
                .iter()
                .zip(&self.recruiter)
                .map(|(&s, r)| (f(s), r.map(&mut f)))
                .collect::<Vec<_>>(),
        )?;
        out.exhausted = self.exhausted;
        Ok(out)
    }

    /// Check the structural invariants of a capture drawn from `graph` with
    /// `coupons` coupons per subject. Returns the first violation found.
    pub fn validate(&self, graph: &Graph, coupons: usize) -> Result<(), String> {
        let edges = self.tree_edges();
        let roots = self.seeds().len();
        if edges.len() != self.len() - roots {
            return Err(format!(
                "|T| = {} but |S| - roots = {}",
                edges.len(),
                self.len() - roots
            ));
        }
        let mut inbound: BTreeMap<usize, usize> = BTreeMap::new();
        for &(r, s) in &edges {
            if !graph.has_edge(r, s) {
                return Err(format!("tree edge ({r}, {s}) not in graph"));
            }
            *inbound.entry(s).or_default() += 1;
        }
        if let Some((v, _)) = inbound.iter().find(|(_, &n)| n > 1) {
            return Err(format!("subject {v} recruited more than once"));
        }
        for &v in &self.subjects {
            if v >= graph.vertex_count() {
                return Err(format!("subject {v} outside graph"));
            }
            if self.recruitees_of(v).len() > coupons {
                return Err(format!(
                    "subject {v} recruited {} > {coupons}",
                    self.recruitees_of(v).len()
                ));
            }
        }
        Ok(())
    }
}

/// Respondent-driven capture.
///
/// Draws `s` distinct uniform seeds, then repeatedly interviews a uniformly
/// chosen frontier member, who recruits up to `c` uniformly chosen
/// undiscovered neighbors. When the frontier empties short of `n0`, a fresh
/// uniform seed from the undiscovered vertices is injected. Stops once at
/// least `n0` subjects are known. The loop body always runs once, and an
/// injected seed joins `S` only when interviewed, so the result can exceed
/// `n0` by up to `c`. When the population runs out first, every vertex is returned
/// and [`RdsForest::exhausted`] is set.
pub fn rds_capture(
    graph: &Graph,
    s: usize,
    c: usize,
    n0: usize,
    rng_seed: u64,
) -> Result<RdsForest, RdsError> {
    let n = graph.vertex_count();
    if s == 0 || c == 0 || s > n0 || s > n {
        return Err(RdsError::InvalidParameters(format!(
            "capture needs 1 <= s <= n0, s <= |V| and c >= 1 (s={s}, c={c}, n0={n0}, |V|={n})"
        )));
    }
    let mut rng = seed::rng(rng_seed);
    let mut discovered = vec![false; n];
    let mut forest = RdsForest::empty();

    let mut frontier: Vec<usize> = index::sample(&mut rng, n, s).into_vec();
    for &v in &frontier {
        discovered[v] = true;
        forest.push(v, None);
    }

    let mut candidates: Vec<usize> = Vec::new();
    loop {
        let x = frontier.swap_remove(rng.gen_range(0..frontier.len()));
        if !discovered[x] {
            // injected seed joins S when interviewed
            discovered[x] = true;
            forest.push(x, None);
        }
        candidates.clear();
        candidates.extend(graph.adj(x).iter().copied().filter(|&v| !discovered[v]));
        let recruits: Vec<usize> = if candidates.len() <= c {
            candidates.clone()
        } else {
            candidates.choose_multiple(&mut rng, c).copied().collect()
        };
        for r in recruits {
            discovered[r] = true;
            forest.push(r, Some(x));
            frontier.push(r);
        }
        if frontier.is_empty() && forest.len() < n0 {
            if forest.len() == n {
                forest.exhausted = true;
                break;
            }
            frontier.push(uniform_undiscovered(&discovered, forest.len(), &mut rng));
        }
        if forest.len() >= n0 {
            break;
        }
    }
    Ok(forest)
}

fn uniform_undiscovered(discovered: &[bool], known: usize, rng: &mut impl Rng) -> usize {
    let n = discovered.len();
    if known * 2 < n {
        loop {
            let v = rng.gen_range(0..n);
            if !discovered[v] {
                return v;
            }
        }
    }
    let pool: Vec<usize> = (0..n).filter(|&v| !discovered[v]).collect();
    pool[rng.gen_range(0..pool.len())]
}

/// The recapture multiset `rS` together with each subject's report set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMultiset {
    reports: Multiset<usize>,
    per_subject: BTreeMap<usize, Vec<usize>>,
}

impl ReportMultiset {
    /// Amalgamate per-subject report sets with `⊎`.
    pub fn from_per_subject(per_subject: BTreeMap<usize, Vec<usize>>) -> Self {
        let mut reports = Multiset::new();
        for list in per_subject.values() {
            for &v in list {
                reports.insert(v);
            }
        }
        Self {
            reports,
            per_subject,
        }
    }

    /// `rS`.
    pub fn reports(&self) -> &Multiset<usize> {
        &self.reports
    }

    /// `R_v`, sorted; empty for subjects who reported nobody.
    pub fn reported_by(&self, v: usize) -> &[usize] {
        self.per_subject.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn per_subject(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.per_subject
    }
}

/// Peer-report recapture.
///
/// Each subject `v` reports up to `p` neighbors drawn uniformly from
/// `N_G(v) \ N_T(v)`, where `N_T(v)` is `v`'s recruiter and recruitees.
pub fn recapture(
    graph: &Graph,
    forest: &RdsForest,
    p: usize,
    rng_seed: u64,
) -> Result<ReportMultiset, RdsError> {
    for (r, s) in forest.tree_edges() {
        if !graph.has_edge(r, s) {
            return Err(RdsError::ForeignEdge(r, s));
        }
    }
    let mut rng = seed::rng(rng_seed);
    let mut per_subject = BTreeMap::new();
    for &v in forest.subjects() {
        let tree = forest.tree_neighbors(v);
        let candidates: Vec<usize> = graph
            .neighbors(v)?
            .iter()
            .copied()
            .filter(|u| tree.binary_search(u).is_err())
            .collect();
        let mut chosen = if candidates.len() <= p {
            candidates
        } else {
            candidates.choose_multiple(&mut rng, p).copied().collect()
        };
        chosen.sort_unstable();
        per_subject.insert(v, chosen);
    }
    Ok(ReportMultiset::from_per_subject(per_subject))
}
