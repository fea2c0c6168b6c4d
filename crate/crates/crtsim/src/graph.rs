//! Undirected simple graphs: the shared substrate for cluster generation,
//! rewiring, and epidemic spread.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge endpoint {endpoint} out of range for {nodes} nodes")]
    EndpointOutOfRange { endpoint: usize, nodes: usize },
    #[error("block labels must cover all {nodes} nodes (got {got})")]
    BlockLabelMismatch { nodes: usize, got: usize },
    #[error("malformed edge list: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Undirected simple graph. Edges are stored canonically as `(low, high)`
/// with no self-loops and no duplicates; `block_of` is present only for
/// blockmodel draws.
#[derive(Debug, Clone)]
pub struct Network {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    block_of: Option<Vec<usize>>,
}

impl Network {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if e.1 >= node_count {
                return Err(GraphError::EndpointOutOfRange {
                    endpoint: e.1,
                    nodes: node_count,
                });
            }
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            canonical.push(e);
        }
        Ok(Network {
            node_count,
            edges: canonical,
            block_of: None,
        })
    }

    pub fn with_blocks(mut self, block_of: Vec<usize>) -> Result<Self, GraphError> {
        if block_of.len() != self.node_count {
            return Err(GraphError::BlockLabelMismatch {
                nodes: self.node_count,
                got: block_of.len(),
            });
        }
        self.block_of = Some(block_of);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn block_of(&self) -> Option<&[usize]> {
        self.block_of.as_deref()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.node_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Neighbor lists in deterministic (insertion) order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Re-checks the simple-graph invariants; used by property tests.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = HashSet::with_capacity(self.edges.len());
        for &(a, b) in &self.edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if a.max(b) >= self.node_count {
                return Err(GraphError::EndpointOutOfRange {
                    endpoint: a.max(b),
                    nodes: self.node_count,
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateEdge(a.min(b), a.max(b)));
            }
        }
        Ok(())
    }

    /// Writes the line-oriented dump: a `# nodes=N` header, then one
    /// zero-indexed `u v` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# nodes={}", self.node_count)?;
        for &(a, b) in &self.edges {
            writeln!(w, "{a} {b}")?;
        }
        Ok(())
    }

    /// Parses the dump format produced by [`Network::write_edge_list`].
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| GraphError::Parse("empty input".into()))??;
        let node_count: usize = header
            .strip_prefix("# nodes=")
            .ok_or_else(|| GraphError::Parse(format!("bad header: {header:?}")))?
            .trim()
            .parse()
            .map_err(|e| GraphError::Parse(format!("bad node count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let a = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line:?}")))?;
            let b = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line:?}")))?;
            if it.next().is_some() {
                return Err(GraphError::Parse(format!("trailing tokens: {line:?}")));
            }
            edges.push((a, b));
        }
        Network::new(node_count, edges)
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Network {
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Network {
            node_count: n,
            edges,
            block_of: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(matches!(
            Network::new(3, vec![(1, 1)]).unwrap_err(),
            GraphError::SelfLoop(1)
        ));
        assert!(matches!(
            Network::new(3, vec![(0, 1), (1, 0)]).unwrap_err(),
            GraphError::DuplicateEdge(0, 1)
        ));
        assert!(matches!(
            Network::new(2, vec![(0, 5)]).unwrap_err(),
            GraphError::EndpointOutOfRange { .. }
        ));
    }

    #[test]
    fn degrees_and_adjacency_agree() {
        let g = Network::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 2, 1]);
        assert_eq!(g.adjacency()[1], vec![0, 2]);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Network::new(5, vec![(0, 4), (1, 2), (2, 3)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let parsed = Network::read_edge_list(&buf[..]).unwrap();
        assert_eq!(parsed.node_count(), 5);
        assert_eq!(parsed.edges(), g.edges());
    }

    #[test]
    fn complete_graph_edge_count() {
        assert_eq!(Network::complete(5).edge_count(), 10);
    }
}
