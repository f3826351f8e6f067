//! Max-k Vertex Cover instances: graphs, the covered-edge objective and the
//! exact weight-k optimum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QaoaError, Result};
use crate::rng::rng_from_seed;
use crate::subspace::{SubspaceIndex, MAX_QUBITS};

/// Weight-k sectors larger than this are refused by the exhaustive paths.
pub const MAX_ENUMERABLE_DIM: usize = 1 << 24;

/// Simple undirected graph on vertices `0..n`. Edges are stored as `(u, v)`
/// with `u < v`, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = QaoaError;

    fn try_from(raw: GraphJson) -> Result<Self> {
        Graph::new(raw.n, raw.edges.into_iter().map(|[u, v]| (u, v)))
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson { n: g.n, edges: g.edges.into_iter().map(|(u, v)| [u, v]).collect() }
    }
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph needs at least one vertex"));
        }
        if n > MAX_QUBITS {
            return Err(invalid(format!("graphs are limited to {MAX_QUBITS} vertices, got {n}")));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(invalid(format!("self-loop at vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(invalid(format!("edge ({u},{v}) has an endpoint outside 0..{n}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate edge ({},{})", w[0].0, w[0].1)));
        }
        Ok(Self { n, edges: list })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|v| (v - 1, v)))
    }

    /// Canonical JSON form `{"n":..,"edges":[[u,v],..]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Graph with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(invalid("permutation length differs from vertex count"));
        }
        Self::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }
}

/// Erdős–Rényi graph: each of the C(n,2) pairs, visited in lexicographic
/// order, is an edge with probability `p_edge`.
pub fn gen_random_graph(n: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(invalid(format!("edge probability {p_edge} outside [0,1]")));
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p_edge {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges)
}

/// Number of edges with at least one endpoint in `subset`.
pub fn objective(graph: &Graph, subset: u64) -> u32 {
    graph
        .edges
        .iter()
        .filter(|&&(u, v)| (subset >> u | subset >> v) & 1 == 1)
        .count() as u32
}

/// A graph together with `k` and the objective over the weight-k basis.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    graph: Graph,
    k: usize,
    index: SubspaceIndex,
    table: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Optimum {
    pub max_value: u32,
    /// Every weight-k maximizer, in canonical basis order.
    pub argmax: Vec<u64>,
}

impl ProblemInstance {
    pub fn new(graph: Graph, k: usize) -> Result<Self> {
        let n = graph.n_vertices();
        if k == 0 || k > n {
            return Err(invalid(format!("k = {k} outside [1, {n}]")));
        }
        let index = SubspaceIndex::new(n, k)?;
        if index.dim() > MAX_ENUMERABLE_DIM {
            return Err(QaoaError::ResourceLimit(format!(
                "C({n},{k}) = {} exceeds the enumerable limit {MAX_ENUMERABLE_DIM}",
                index.dim()
            )));
        }
        let table = index.basis().into_iter().map(|x| objective(&graph, x)).collect();
        Ok(Self { graph, k, index, table })
    }

    /// Instance with the default `k = floor(n/2)`.
    pub fn with_half_k(graph: Graph) -> Result<Self> {
        let k = (graph.n_vertices() / 2).max(1);
        Self::new(graph, k)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn index(&self) -> &SubspaceIndex {
        &self.index
    }

    /// `f(unrank(i))` for every canonical index `i`.
    pub fn objective_table(&self) -> &[u32] {
        &self.table
    }

    pub fn max_value(&self) -> u32 {
        self.table.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_value(&self) -> f64 {
        self.table.iter().map(|&v| f64::from(v)).sum::<f64>() / self.table.len() as f64
    }
}

/// Exhaustive maximum of the objective over weight-k bitstrings.
pub fn brute_force_optimum(instance: &ProblemInstance) -> Result<Optimum> {
    let index = instance.index();
    if index.dim() > MAX_ENUMERABLE_DIM {
        return Err(QaoaError::ResourceLimit(format!("dimension {} too large to enumerate", index.dim())));
    }
    let mut best = 0u32;
    let mut argmax = Vec::new();
    for (i, x) in index.basis().into_iter().enumerate() {
        let value = instance.objective_table()[i];
        if value > best {
            best = value;
            argmax.clear();
        }
        if value == best {
            argmax.push(x);
        }
    }
    Ok(Optimum { max_value: best, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::complete(3).unwrap()
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(0, []).is_err());
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        let g = Graph::new(4, [(3, 2), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (2, 3)]);
    }

    #[test]
    fn random_graph_extremes() {
        let full = gen_random_graph(3, 1.0, 99).unwrap();
        assert_eq!(full.edges(), &[(0, 1), (0, 2), (1, 2)]);
        let empty = gen_random_graph(5, 0.0, 99).unwrap();
        assert_eq!(empty.n_edges(), 0);
        assert_eq!(gen_random_graph(10, 0.5, 42).unwrap(), gen_random_graph(10, 0.5, 42).unwrap());
        assert!(matches!(gen_random_graph(0, 0.5, 1), Err(QaoaError::InvalidArgument(_))));
        assert!(gen_random_graph(4, 1.5, 1).is_err());
    }

    #[test]
    fn objective_examples() {
        assert_eq!(objective(&triangle(), 0b001), 2);
        let g = gen_random_graph(8, 0.5, 5).unwrap();
        assert_eq!(objective(&g, 0xFF), g.n_edges() as u32);
        let path = Graph::path(3).unwrap();
        assert_eq!(objective(&path, 0b010), 2);
    }

    #[test]
    fn optimum_examples() {
        let tri = ProblemInstance::new(triangle(), 1).unwrap();
        let opt = brute_force_optimum(&tri).unwrap();
        assert_eq!(opt.max_value, 2);
        assert_eq!(opt.argmax, vec![0b001, 0b010, 0b100]);

        let empty = ProblemInstance::new(Graph::new(5, []).unwrap(), 2).unwrap();
        let opt = brute_force_optimum(&empty).unwrap();
        assert_eq!(opt.max_value, 0);
        assert_eq!(opt.argmax.len(), 10);

        let path = ProblemInstance::new(Graph::path(3).unwrap(), 1).unwrap();
        let opt = brute_force_optimum(&path).unwrap();
        assert_eq!(opt, Optimum { max_value: 2, argmax: vec![0b010] });
    }

    #[test]
    fn instance_k_range() {
        assert!(ProblemInstance::new(triangle(), 0).is_err());
        assert!(ProblemInstance::new(triangle(), 4).is_err());
        assert!(ProblemInstance::new(triangle(), 3).is_ok());
    }

    #[test]
    fn resource_limit() {
        let g = Graph::new(40, []).unwrap();
        assert!(matches!(ProblemInstance::new(g, 20), Err(QaoaError::ResourceLimit(_))));
    }

    #[test]
    fn canonical_json() {
        let g = Graph::new(4, [(2, 3), (1, 0)]).unwrap();
        assert_eq!(g.to_json(), r#"{"n":4,"edges":[[0,1],[2,3]]}"#);
        assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);
        assert!(Graph::from_json(r#"{"n":2,"edges":[[0,0]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn objective_bounded_and_monotone(n in 1usize..=12, seed in any::<u64>(), x in any::<u64>(), bit in 0usize..12) {
            let g = gen_random_graph(n, 0.5, seed).unwrap();
            let x = x & ((1u64 << n) - 1);
            let fx = objective(&g, x);
            prop_assert!(fx as usize <= g.n_edges());
            let bit = bit % n;
            prop_assert!(objective(&g, x | 1 << bit) >= fx);
        }

        #[test]
        fn optimum_is_table_max(n in 2usize..=9, seed in any::<u64>()) {
            let g = gen_random_graph(n, 0.5, seed).unwrap();
            let inst = ProblemInstance::with_half_k(g).unwrap();
            let opt = brute_force_optimum(&inst).unwrap();
            prop_assert_eq!(opt.max_value, inst.max_value());
            for x in &opt.argmax {
                prop_assert_eq!(objective(inst.graph(), *x), opt.max_value);
            }
            let count = inst.objective_table().iter().filter(|&&v| v == opt.max_value).count();
            prop_assert_eq!(count, opt.argmax.len());
        }
    }
}
