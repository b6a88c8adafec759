//! Problem instances: a weighted undirected graph, positive vertex weights,
//! and the choice of pair kernel.
//!
//! Vertices are addressed by dense indices everywhere in the library; the
//! string labels from the model file survive only for input and output.
//! Conductances are kept as an unordered edge list, which is the natural
//! shape for the sparse graphs this toolkit targets.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels;

/// Finite weighted undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    labels: Vec<String>,
    edges: Vec<Edge>,
    pair_index: HashMap<(usize, usize), usize>,
}

/// One unordered edge, stored with `x < y` and conductance `c >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub x: usize,
    pub y: usize,
    pub c: f64,
}

impl Graph {
    /// Builds a graph from labels and unordered edges, normalizing each pair
    /// to `x < y`. Rejects self-loops, duplicate pairs, negative
    /// conductances, and fewer than two vertices.
    pub fn new(labels: Vec<String>, raw_edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 vertices, got {n}"
            )));
        }
        let mut seen = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(_prev) = seen.insert(l.clone(), i) {
                return Err(Error::InvalidModel(format!("duplicate vertex label {l:?}")));
            }
        }
        let mut edges = Vec::with_capacity(raw_edges.len());
        let mut pair_index = HashMap::new();
        for (a, b, c) in raw_edges {
            if a >= n || b >= n {
                return Err(Error::InvalidModel(format!(
                    "edge ({a}, {b}) references a vertex out of range"
                )));
            }
            if a == b {
                return Err(Error::InvalidModel(format!(
                    "self-loop on vertex {:?} is not allowed",
                    labels[a]
                )));
            }
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "conductance on edge ({:?}, {:?}) must be finite and nonnegative, got {c}",
                    labels[a], labels[b]
                )));
            }
            let (x, y) = if a < b { (a, b) } else { (b, a) };
            if pair_index.insert((x, y), edges.len()).is_some() {
                return Err(Error::InvalidModel(format!(
                    "edge ({:?}, {:?}) listed twice",
                    labels[x], labels[y]
                )));
            }
            edges.push(Edge { x, y, c });
        }
        Ok(Graph {
            labels,
            edges,
            pair_index,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Conductance of the unordered pair `{x, y}`; zero when the pair is not
    /// an edge (and on the diagonal).
    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        let key = if x < y { (x, y) } else { (y, x) };
        self.pair_index.get(&key).map_or(0.0, |&i| self.edges[i].c)
    }

    fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Positive vertex weights with their cached sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaWeights {
    values: Vec<f64>,
    total: f64,
}

impl AlphaWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &a) in values.iter().enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "alpha must be positive and finite, entry {i} is {a}"
                )));
            }
        }
        let total = values.iter().sum();
        Ok(AlphaWeights { values, total })
    }

    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of all weights, written `|alpha|` in the formulas.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// One atom `(u, v, w)` of a discrete pair measure: the update parameters
/// and a positive weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

/// Kernel family selection. The three named families are parametrized by
/// the vertex weights; discrete kernels carry their own atoms per ordered
/// pair.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Kmp,
    Hp,
    Iem { kappa: f64 },
    Discrete { atoms: BTreeMap<(usize, usize), Vec<Atom>> },
}

impl KernelSpec {
    /// The three named families are reversible with an explicit product
    /// invariant measure; discrete kernels in general are not.
    pub fn is_named(&self) -> bool {
        !matches!(self, KernelSpec::Discrete { .. })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Kmp => "kmp",
            KernelSpec::Hp => "hp",
            KernelSpec::Iem { .. } => "iem",
            KernelSpec::Discrete { .. } => "discrete",
        }
    }
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub graph: Graph,
    pub alpha: AlphaWeights,
    pub kernel: KernelSpec,
}

impl ModelSpec {
    pub fn new(graph: Graph, alpha: AlphaWeights, kernel: KernelSpec) -> Result<Self> {
        if alpha.values().len() != graph.n() {
            return Err(Error::InvalidModel(format!(
                "alpha has {} entries for {} vertices",
                alpha.values().len(),
                graph.n()
            )));
        }
        match &kernel {
            KernelSpec::Iem { kappa } => {
                let amin = alpha.min();
                if !(*kappa > 0.0 && *kappa < amin) {
                    return Err(Error::InvalidModel(format!(
                        "iem kappa must lie strictly between 0 and min alpha = {amin}, got {kappa}"
                    )));
                }
            }
            KernelSpec::Discrete { atoms } => {
                for (&(x, y), list) in atoms {
                    if x == y || x >= graph.n() || y >= graph.n() {
                        return Err(Error::InvalidModel(format!(
                            "discrete atoms reference invalid pair ({x}, {y})"
                        )));
                    }
                    if graph.conductance(x, y) <= 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "discrete atoms on pair ({:?}, {:?}) without a positive-conductance edge",
                            graph.labels()[x],
                            graph.labels()[y]
                        )));
                    }
                    for atom in list {
                        if !(0.0..=1.0).contains(&atom.u) || !(0.0..=1.0).contains(&atom.v) {
                            return Err(Error::InvalidModel(format!(
                                "atom parameters must lie in [0, 1], got u={}, v={}",
                                atom.u, atom.v
                            )));
                        }
                        if !(atom.w > 0.0) || !atom.w.is_finite() {
                            return Err(Error::InvalidModel(format!(
                                "atom weight must be positive, got {}",
                                atom.w
                            )));
                        }
                    }
                }
            }
            KernelSpec::Kmp | KernelSpec::Hp => {}
        }
        Ok(ModelSpec {
            graph,
            alpha,
            kernel,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Unordered pairs `{x, y}` (as `x < y`, sorted) that carry any kernel
    /// mass in either direction. This is the canonical iteration order for
    /// every rate, generator, and simulation assembly in the library.
    pub fn interacting_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = match &self.kernel {
            KernelSpec::Discrete { atoms } => {
                let mut set: Vec<(usize, usize)> = atoms
                    .iter()
                    .filter(|(_, list)| !list.is_empty())
                    .map(|(&(x, y), _)| if x < y { (x, y) } else { (y, x) })
                    .collect();
                set.sort_unstable();
                set.dedup();
                set
            }
            _ => self
                .graph
                .edges()
                .iter()
                .filter(|e| e.c > 0.0)
                .map(|e| (e.x, e.y))
                .collect(),
        };
        pairs.sort_unstable();
        pairs
    }

    /// Loads and validates a model file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let wire: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        wire.into_spec()
    }

    /// Canonical JSON value of the instance, suitable for re-loading and
    /// for hashing. Inverse of `from_json_str` up to field order.
    pub fn to_json_value(&self) -> serde_json::Value {
        let wire = ModelFile::from_spec(self);
        serde_json::to_value(wire).expect("model serialization cannot fail")
    }
}

/// Wire format of the model file.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    vertices: Vec<String>,
    alpha: BTreeMap<String, f64>,
    edges: Vec<EdgeFile>,
    model: ModelKindFile,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    u: String,
    v: String,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ModelKindFile {
    Kmp,
    Hp,
    Iem { kappa: f64 },
    Discrete { atoms: BTreeMap<String, Vec<Atom>> },
}

impl ModelFile {
    fn into_spec(self) -> Result<ModelSpec> {
        let labels = self.vertices;
        let graph_probe = Graph::new(labels.clone(), vec![])?;
        let mut alpha_values = vec![0.0; labels.len()];
        let mut seen = vec![false; labels.len()];
        for (label, value) in &self.alpha {
            let Some(i) = graph_probe.index_of_label(label) else {
                return Err(Error::InvalidModel(format!(
                    "alpha references unknown vertex {label:?}"
                )));
            };
            alpha_values[i] = *value;
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidModel(format!(
                "alpha missing for vertex {:?}",
                labels[i]
            )));
        }
        let alpha = AlphaWeights::new(alpha_values)?;

        let mut raw_edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let Some(x) = graph_probe.index_of_label(&e.u) else {
                return Err(Error::InvalidModel(format!(
                    "edge references unknown vertex {:?}",
                    e.u
                )));
            };
            let Some(y) = graph_probe.index_of_label(&e.v) else {
                return Err(Error::InvalidModel(format!(
                    "edge references unknown vertex {:?}",
                    e.v
                )));
            };
            raw_edges.push((x, y, e.c));
        }
        let graph = Graph::new(labels, raw_edges)?;

        let kernel = match self.model {
            ModelKindFile::Kmp => KernelSpec::Kmp,
            ModelKindFile::Hp => KernelSpec::Hp,
            ModelKindFile::Iem { kappa } => KernelSpec::Iem { kappa },
            ModelKindFile::Discrete { atoms } => {
                let mut map = BTreeMap::new();
                for (key, list) in atoms {
                    let Some((a, b)) = key.split_once("->") else {
                        return Err(Error::InvalidModel(format!(
                            "discrete atom key {key:?} is not of the form \"a->b\""
                        )));
                    };
                    let Some(x) = graph.index_of_label(a.trim()) else {
                        return Err(Error::InvalidModel(format!(
                            "discrete atom key {key:?} references unknown vertex {a:?}"
                        )));
                    };
                    let Some(y) = graph.index_of_label(b.trim()) else {
                        return Err(Error::InvalidModel(format!(
                            "discrete atom key {key:?} references unknown vertex {b:?}"
                        )));
                    };
                    if map.insert((x, y), list).is_some() {
                        return Err(Error::InvalidModel(format!(
                            "discrete atoms listed twice for {key:?}"
                        )));
                    }
                }
                KernelSpec::Discrete { atoms: map }
            }
        };
        ModelSpec::new(graph, alpha, kernel)
    }

    fn from_spec(spec: &ModelSpec) -> Self {
        let labels = spec.graph.labels();
        let alpha = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), spec.alpha.get(i)))
            .collect();
        let edges = spec
            .graph
            .edges()
            .iter()
            .map(|e| EdgeFile {
                u: labels[e.x].clone(),
                v: labels[e.y].clone(),
                c: e.c,
            })
            .collect();
        let model = match &spec.kernel {
            KernelSpec::Kmp => ModelKindFile::Kmp,
            KernelSpec::Hp => ModelKindFile::Hp,
            KernelSpec::Iem { kappa } => ModelKindFile::Iem { kappa: *kappa },
            KernelSpec::Discrete { atoms } => ModelKindFile::Discrete {
                atoms: atoms
                    .iter()
                    .map(|(&(x, y), list)| {
                        (format!("{}->{}", labels[x], labels[y]), list.clone())
                    })
                    .collect(),
            },
        };
        ModelFile {
            vertices: labels.to_vec(),
            alpha,
            edges,
            model,
        }
    }
}

/// Assumption checks for a loaded model: finiteness of the first-moment
/// integral per directed pair, and strong connectivity of the digraph whose
/// edges are the pairs with positive second-order rate.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Per directed pair with mass: is `int [(1-u) + (1-v)] d(beta_xy)` finite?
    pub pair_moment_finite: Vec<PairFiniteness>,
    /// Strong connectivity of the directed graph with an edge `x -> y`
    /// whenever `s_xy > 0`.
    pub strongly_connected: bool,
    /// Number of directed edges in that graph.
    pub s_edge_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairFiniteness {
    pub x: usize,
    pub y: usize,
    pub finite: bool,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.strongly_connected && self.pair_moment_finite.iter().all(|p| p.finite)
    }
}

/// Evaluates both model assumptions. Pure: the report depends only on the
/// spec.
pub fn validate(spec: &ModelSpec) -> ValidationReport {
    let mut pair_moment_finite = Vec::new();
    let mut s_edges = Vec::new();
    for (x, y) in spec.interacting_pairs() {
        for (a, b) in [(x, y), (y, x)] {
            let hold = kernels::mixed_moment(spec, a, b, 0, 1, 0, 0);
            let give = kernels::mixed_moment(spec, a, b, 0, 0, 0, 1);
            pair_moment_finite.push(PairFiniteness {
                x: a,
                y: b,
                finite: !hold.is_infinite() && !give.is_infinite(),
            });
            if kernels::s_rate(spec, a, b) > 0.0 {
                s_edges.push((a, b));
            }
        }
    }

    let n = spec.n();
    let mut digraph = petgraph::graph::DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| digraph.add_node(())).collect();
    for &(a, b) in &s_edges {
        digraph.add_edge(nodes[a], nodes[b], ());
    }
    let sccs = petgraph::algo::tarjan_scc(&digraph);
    let strongly_connected = sccs.len() == 1 && sccs[0].len() == n;

    ValidationReport {
        pair_moment_finite,
        strongly_connected,
        s_edge_count: s_edges.len(),
    }
}
