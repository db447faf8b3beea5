//! Undirected simple graphs over dense vertex ids `0..n`.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("vertex {vertex} out of range for graph of {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Build from an edge list. Duplicate edges (in either orientation) are
    /// merged; self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(GraphError::InvalidParameters(format!(
                    "self-loop on vertex {u}"
                )));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        Ok(Self::from_raw_adjacency(adjacency))
    }

    fn from_raw_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        let mut twice = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Self {
            adjacency,
            edge_count: twice / 2,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: usize) -> Result<&[usize], GraphError> {
        self.adjacency
            .get(v)
            .map(Vec::as_slice)
            .ok_or(GraphError::VertexOutOfRange {
                vertex: v,
                n: self.vertex_count(),
            })
    }

    /// Neighbors of `v`; panics when `v` is out of range.
    pub(crate) fn adj(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency
            .get(u)
            .is_some_and(|list| list.binary_search(&v).is_ok())
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn mean_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            return 0.0;
        }
        2.0 * self.edge_count as f64 / self.vertex_count() as f64
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Symmetric adjacency with no self-loops or repeated neighbors.
    pub fn check_invariants(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(u, list)| {
            list.windows(2).all(|w| w[0] < w[1])
                && list.iter().all(|&v| v != u && self.has_edge(v, u))
        })
    }

    /// Write the edge list, one `u v` line per edge with `u < v`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# edgelist v1 n={}", self.vertex_count())?;
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    /// Read a whitespace-separated edge list.
    ///
    /// Blank lines and `#` comments are ignored, except that a
    /// `# edgelist v1 n=<n>` header fixes the vertex count so isolated
    /// vertices survive a round trip. Ids that are not already dense are
    /// remapped to `0..k` in ascending id order.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self, GraphError> {
        let mut declared_n: Option<usize> = None;
        let mut raw = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(n) = comment
                    .split_whitespace()
                    .find_map(|tok| tok.strip_prefix("n="))
                {
                    declared_n = Some(n.parse().map_err(|_| GraphError::Parse {
                        line: lineno,
                        message: format!("bad vertex count {n:?}"),
                    })?);
                }
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let mut next_id = |what: &str| -> Result<u64, GraphError> {
                let tok = tokens.next().ok_or_else(|| GraphError::Parse {
                    line: lineno,
                    message: format!("missing {what} vertex"),
                })?;
                tok.parse::<u64>().map_err(|_| GraphError::Parse {
                    line: lineno,
                    message: format!("non-integer vertex id {tok:?}"),
                })
            };
            let u = next_id("first")?;
            let v = next_id("second")?;
            if let Some(extra) = tokens.next() {
                return Err(GraphError::Parse {
                    line: lineno,
                    message: format!("unexpected token {extra:?}"),
                });
            }
            if u == v {
                return Err(GraphError::SelfLoop {
                    line: lineno,
                    vertex: u,
                });
            }
            raw.push((u, v));
        }

        let ids: BTreeSet<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
        let max_id = ids.last().copied();
        let dense_with_header = declared_n.is_some_and(|n| max_id.is_none_or(|m| (m as usize) < n));
        let already_dense = max_id.is_none_or(|m| m as usize + 1 == ids.len());
        if dense_with_header || already_dense {
            let n = declared_n.unwrap_or(ids.len());
            let edges = raw.into_iter().map(|(u, v)| (u as usize, v as usize));
            return Self::from_edges(n, edges);
        }
        let index: Vec<u64> = ids.into_iter().collect();
        let remap = |id: u64| index.binary_search(&id).expect("id collected above");
        let edges: Vec<_> = raw.into_iter().map(|(u, v)| (remap(u), remap(v))).collect();
        Self::from_edges(index.len(), edges)
    }

    pub fn load_edge_list(path: impl AsRef<std::path::Path>) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(file))
    }

    pub fn save_edge_list(&self, path: impl AsRef<std::path::Path>) -> Result<(), GraphError> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_edge_list(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a complete graph on `attach + 1` vertices; every later vertex
/// joins with `attach` distinct edges whose endpoints are drawn with
/// probability proportional to current degree (duplicate draws are
/// discarded and redrawn).
pub fn generate_ba(n: usize, attach: usize, rng_seed: u64) -> Result<Graph, GraphError> {
    if attach == 0 || n <= attach {
        return Err(GraphError::InvalidParameters(format!(
            "barabasi-albert needs n > attach >= 1 (n={n}, attach={attach})"
        )));
    }
    let mut rng = seed::rng(rng_seed);
    let core = attach + 1;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    // every edge contributes both endpoints, so a uniform draw from this
    // list is a degree-weighted vertex draw
    let mut endpoints: Vec<usize> =
        Vec::with_capacity(2 * (core * attach / 2 + (n - core) * attach));
    for u in 0..core.min(n) {
        for v in (u + 1)..core.min(n) {
            adjacency[u].push(v);
            adjacency[v].push(u);
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut targets: Vec<usize> = Vec::with_capacity(attach);
    for v in core..n {
        targets.clear();
        while targets.len() < attach {
            let t = endpoints[rng.gen_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            adjacency[v].push(t);
            adjacency[t].push(v);
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    Ok(Graph::from_raw_adjacency(adjacency))
}

/// Erdős–Rényi `G(n, p)` with `p = mean_degree / (n - 1)`, sampled by
/// geometric skipping over the lower-triangular pair sequence.
pub fn generate_er(n: usize, mean_degree: f64, rng_seed: u64) -> Result<Graph, GraphError> {
    if n < 2 || !(mean_degree > 0.0 && mean_degree < (n - 1) as f64) {
        return Err(GraphError::InvalidParameters(format!(
            "erdos-renyi needs 0 < mean_degree < n-1 (n={n}, mean_degree={mean_degree})"
        )));
    }
    let p = mean_degree / (n - 1) as f64;
    let mut rng = seed::rng(rng_seed);
    let log_q = (1.0 - p).ln();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n {
        let r: f64 = rng.gen();
        let skip = ((1.0 - r).ln() / log_q).floor();
        w += 1 + if skip.is_finite() {
            skip as i64
        } else {
            i64::MAX / 4
        };
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            let u = w as usize;
            adjacency[v].push(u);
            adjacency[u].push(v);
        }
    }
    Ok(Graph::from_raw_adjacency(adjacency))
}

/// Relabel vertices: vertex `v` becomes `perm[v]`.
pub fn permute(graph: &Graph, perm: &[usize]) -> Result<Graph, GraphError> {
    if perm.len() != graph.vertex_count() {
        return Err(GraphError::InvalidParameters(
            "permutation length mismatch".into(),
        ));
    }
    Graph::from_edges(
        graph.vertex_count(),
        graph.edges().map(|(u, v)| (perm[u], perm[v])),
    )
}

/// Uniform random permutation of `0..n`.
pub fn random_permutation(n: usize, rng_seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(rng_seed));
    perm
}
