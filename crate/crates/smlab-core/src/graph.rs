//! Simple undirected graphs, the source objects of the clique reduction.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex {0} out of range (n = {1})")]
    OutOfRange(usize, usize),
    #[error("self loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
}

/// Undirected simple graph on vertices 0..n. Edges are stored with u < v,
/// sorted, so equal graphs compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, raw_edges: Vec<(usize, usize)>) -> Result<Graph, GraphError> {
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (a, b) in raw_edges {
            if a >= n {
                return Err(GraphError::OutOfRange(a, n));
            }
            if b >= n {
                return Err(GraphError::OutOfRange(b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        Ok(Graph { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).is_ok()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Edges incident to v, as indices into `edges()`.
    pub fn incident_edges(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| a == v || b == v)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Graph { n, edges }
    }

    /// Star with center 0 and `leaves` leaves (triangle-free for leaves >= 2).
    pub fn star(leaves: usize) -> Graph {
        Graph {
            n: leaves + 1,
            edges: (1..=leaves).map(|l| (0, l)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let g = Graph::new(3, vec![(0, 1), (2, 1), (0, 2)]).unwrap();
        assert_eq!(g.m(), 3);
        assert!(g.has_edge(1, 0));
        assert_eq!(g.neighbors(1), vec![0, 2]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(Graph::new(2, vec![(0, 2)]), Err(GraphError::OutOfRange(2, 2)));
        assert_eq!(Graph::new(2, vec![(1, 1)]), Err(GraphError::SelfLoop(1)));
        assert_eq!(
            Graph::new(3, vec![(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
    }

    #[test]
    fn star_is_triangle_free() {
        let g = Graph::star(3);
        assert_eq!(g.n(), 4);
        assert_eq!(g.m(), 3);
        assert!(!g.has_edge(1, 2));
    }
}
