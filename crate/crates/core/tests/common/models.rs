//! Random model generators shared by the integration suites.

use std::collections::BTreeMap;

use exgap_core::model::{AlphaWeights, Atom, Graph, KernelSpec, ModelSpec};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct RawModel {
    pub alpha: Vec<f64>,
    pub conductances: Vec<f64>,
    pub extra_edges: Vec<bool>,
    pub kernel_pick: usize,
    pub atom_params: Vec<(f64, f64, f64)>,
}

pub fn arb_raw(n: usize, kernels: std::ops::Range<usize>) -> impl Strategy<Value = RawModel> {
    let pairs = n * (n - 1) / 2;
    (
        prop::collection::vec(0.3f64..2.5, n),
        prop::collection::vec(0.2f64..2.0, pairs),
        prop::collection::vec(any::<bool>(), pairs),
        kernels,
        prop::collection::vec((0.05f64..0.95, 0.05f64..0.95, 0.1f64..1.0), n * (n - 1)),
    )
        .prop_map(
            |(alpha, conductances, extra_edges, kernel_pick, atom_params)| RawModel {
                alpha,
                conductances,
                extra_edges,
                kernel_pick,
                atom_params,
            },
        )
}

/// Connected graph on a path backbone with optional chords; kernel picked
/// by index (0 = KMP, 1 = HP, 2 = IEM, 3 = discrete atoms).
pub fn build(raw: &RawModel) -> ModelSpec {
    let n = raw.alpha.len();
    let labels: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    let mut pair_slot = 0usize;
    for x in 0..n {
        for y in x + 1..n {
            let on_path = y == x + 1;
            if on_path || raw.extra_edges[pair_slot] {
                edges.push((x, y, raw.conductances[pair_slot]));
            }
            pair_slot += 1;
        }
    }
    let graph = Graph::new(labels, edges.clone()).unwrap();
    let alpha = AlphaWeights::new(raw.alpha.clone()).unwrap();
    let kernel = match raw.kernel_pick {
        0 => KernelSpec::Kmp,
        1 => KernelSpec::Hp,
        2 => KernelSpec::Iem {
            kappa: 0.25 * alpha.min(),
        },
        _ => {
            let mut atoms = BTreeMap::new();
            let mut slot = 0usize;
            for &(x, y, _) in &edges {
                for key in [(x, y), (y, x)] {
                    let (u, v, w) = raw.atom_params[slot];
                    atoms.insert(key, vec![Atom { u, v, w }]);
                    slot += 1;
                }
            }
            KernelSpec::Discrete { atoms }
        }
    };
    ModelSpec::new(graph, alpha, kernel).unwrap()
}

pub fn arb_model(n_max: usize) -> impl Strategy<Value = ModelSpec> {
    (2usize..=n_max)
        .prop_flat_map(|n| arb_raw(n, 0..4))
        .prop_map(|raw| build(&raw))
}

pub fn arb_named_model(n_max: usize) -> impl Strategy<Value = ModelSpec> {
    (2usize..=n_max)
        .prop_flat_map(|n| arb_raw(n, 0..3))
        .prop_map(|raw| build(&raw))
}

pub fn arb_discrete_model(n_max: usize) -> impl Strategy<Value = ModelSpec> {
    (2usize..=n_max)
        .prop_flat_map(|n| arb_raw(n, 3..4))
        .prop_map(|raw| build(&raw))
}

/// Complete graph with uniform weights and conductances.
pub fn complete(kernel: KernelSpec, n: usize, alpha: f64, c: f64) -> ModelSpec {
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, c));
        }
    }
    let graph = Graph::new(labels, edges).unwrap();
    ModelSpec::new(graph, AlphaWeights::new(vec![alpha; n]).unwrap(), kernel).unwrap()
}

/// Path graph with uniform weights and conductances.
pub fn path(kernel: KernelSpec, n: usize, alpha: f64, c: f64) -> ModelSpec {
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let edges = (0..n - 1).map(|i| (i, i + 1, c)).collect();
    let graph = Graph::new(labels, edges).unwrap();
    ModelSpec::new(graph, AlphaWeights::new(vec![alpha; n]).unwrap(), kernel).unwrap()
}

/// Cycle graph with uniform weights and conductances.
pub fn cycle(kernel: KernelSpec, n: usize, alpha: f64, c: f64) -> ModelSpec {
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, c)).collect();
    edges.push((0, n - 1, c));
    let graph = Graph::new(labels, edges).unwrap();
    ModelSpec::new(graph, AlphaWeights::new(vec![alpha; n]).unwrap(), kernel).unwrap()
}

/// Cycle graph with one weight per vertex.
pub fn cycle_weighted(kernel: KernelSpec, alphas: &[f64], c: f64) -> ModelSpec {
    let n = alphas.len();
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, c)).collect();
    edges.push((0, n - 1, c));
    let graph = Graph::new(labels, edges).unwrap();
    ModelSpec::new(graph, AlphaWeights::new(alphas.to_vec()).unwrap(), kernel).unwrap()
}
