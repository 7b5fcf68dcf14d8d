//! Conditional dependency graphs over the unit set.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::UnitId;
use crate::{Error, Result};

/// Undirected simple graph on a set of units. Vertices are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    vertices: Vec<UnitId>,
    adjacency: Vec<Vec<usize>>,
}

impl DependencyGraph {
    /// Builds a graph from vertices and undirected edges. Duplicate edges are
    /// merged; self-loops and unknown endpoints are rejected.
    pub fn from_edges<I>(vertices: Vec<UnitId>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (UnitId, UnitId)>,
    {
        let mut vertices = vertices;
        vertices.sort();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph("duplicate vertex".into()));
        }
        let index = |id: &UnitId| {
            vertices
                .binary_search(id)
                .map_err(|_| Error::InvalidGraph(format!("unknown vertex {id}")))
        };
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (a, b) in edges {
            let (i, j) = (index(&a)?, index(&b)?);
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on {a}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(Self {
            vertices,
            adjacency,
        })
    }

    /// Union of cliques given by a membership label per vertex.
    pub fn from_cliques<I>(membership: I) -> Result<Self>
    where
        I: IntoIterator<Item = (UnitId, u64)>,
    {
        let mut groups: BTreeMap<u64, Vec<UnitId>> = BTreeMap::new();
        let mut vertices = Vec::new();
        for (id, clique) in membership {
            groups.entry(clique).or_default().push(id.clone());
            vertices.push(id);
        }
        let mut edges = Vec::new();
        for members in groups.values() {
            for (k, a) in members.iter().enumerate() {
                for b in &members[k + 1..] {
                    edges.push((a.clone(), b.clone()));
                }
            }
        }
        Self::from_edges(vertices, edges)
    }

    /// Consecutive blocks of `size` vertices (in id order) form cliques.
    pub fn disjoint_cliques(vertices: Vec<UnitId>, size: usize) -> Result<Self> {
        if size == 0 || vertices.len() % size != 0 {
            return Err(Error::InvalidGraph(format!(
                "clique size {size} does not divide {} vertices",
                vertices.len()
            )));
        }
        let mut sorted = vertices;
        sorted.sort();
        let labels = sorted
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, (i / size) as u64));
        Self::from_cliques(labels)
    }

    /// Ring lattice: vertex `i` (in id order) is joined to every vertex within
    /// circular distance `radius`.
    pub fn ring_lattice(vertices: Vec<UnitId>, radius: usize) -> Result<Self> {
        let mut sorted = vertices;
        sorted.sort();
        let n = sorted.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for k in 1..=radius.min(n.saturating_sub(1)) {
                let j = (i + k) % n;
                if j != i {
                    edges.push((sorted[i].clone(), sorted[j].clone()));
                }
            }
        }
        Self::from_edges(sorted, edges)
    }

    pub fn vertices(&self) -> &[UnitId] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, as vertex indices.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// If the graph is a disjoint union of cliques, returns a clique label per
    /// vertex (labels numbered by first appearance).
    pub fn clique_partition(&self) -> Option<Vec<u64>> {
        let closed = |i: usize| {
            let mut c = self.adjacency[i].clone();
            c.push(i);
            c.sort_unstable();
            c
        };
        let mut labels = vec![u64::MAX; self.len()];
        let mut next = 0;
        for i in 0..self.len() {
            if labels[i] != u64::MAX {
                continue;
            }
            let members = closed(i);
            for &j in &members {
                if labels[j] != u64::MAX || closed(j) != members {
                    return None;
                }
                labels[j] = next;
            }
            next += 1;
        }
        Some(labels)
    }

    /// Checks that the vertex set equals the given unit set.
    pub fn check_vertices(&self, units: &[UnitId]) -> Result<()> {
        let mut sorted: Vec<&UnitId> = units.iter().collect();
        sorted.sort();
        if sorted.len() != self.vertices.len()
            || sorted.iter().zip(self.vertices.iter()).any(|(a, b)| *a != b)
        {
            return Err(Error::InvalidGraph(
                "graph vertices differ from the panel unit set".into(),
            ));
        }
        Ok(())
    }
}

/// One plus the maximum vertex degree.
pub fn degree_plus_one(g: &DependencyGraph) -> Result<usize> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(1 + g.adjacency.iter().map(Vec::len).max().unwrap_or(0))
}
