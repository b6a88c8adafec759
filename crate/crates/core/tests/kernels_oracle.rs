//! Cross-checks the closed-form moment and rate formulas against direct
//! numerical quadrature of the defining integrals.

mod common;

use exgap_core::kernels::{self, Moment};
use exgap_core::model::{AlphaWeights, Atom, Graph, KernelSpec, ModelSpec};

fn two_vertex(kernel: KernelSpec, ax: f64, ay: f64, c: f64) -> ModelSpec {
    let graph = Graph::new(vec!["x".into(), "y".into()], vec![(0, 1, c)]).unwrap();
    ModelSpec::new(graph, AlphaWeights::new(vec![ax, ay]).unwrap(), kernel).unwrap()
}

fn exponent_grid() -> Vec<(u32, u32, u32, u32)> {
    let mut grid = Vec::new();
    for p in 0..=2 {
        for q in 0..=2 {
            for r in 0..=2 {
                for s in 0..=2 {
                    if p + q + r + s <= 4 {
                        grid.push((p, q, r, s));
                    }
                }
            }
        }
    }
    grid
}

fn assert_close(label: &str, got: f64, want: f64, rel: f64) {
    let scale = want.abs().max(1.0);
    assert!(
        (got - want).abs() <= rel * scale,
        "{label}: got {got}, quadrature {want}"
    );
}

#[test]
fn kmp_moments_match_quadrature() {
    for &(ax, ay) in &[(1.0, 1.0), (0.4, 1.7), (2.5, 0.8)] {
        for &c in &[0.5, 2.0] {
            let spec = two_vertex(KernelSpec::Kmp, ax, ay, c);
            for &(p, q, r, s) in &exponent_grid() {
                let got = kernels::mixed_moment(&spec, 0, 1, p, q, r, s)
                    .finite()
                    .unwrap();
                let want = common::kmp_moment(c, ax, ay, p, q, r, s);
                assert_close(&format!("kmp {ax},{ay},{c} ({p},{q},{r},{s})"), got, want, 1e-9);
            }
        }
    }
}

#[test]
fn hp_moments_match_quadrature_where_finite() {
    for &(ax, ay) in &[(1.0, 1.0), (0.25, 0.5), (1.9, 0.7)] {
        let c = 1.25;
        let spec = two_vertex(KernelSpec::Hp, ax, ay, c);
        for &(p, q, r, s) in &exponent_grid() {
            let got = kernels::mixed_moment(&spec, 0, 1, p, q, r, s);
            match common::hp_moment(c, ax, p, q, r, s) {
                Some(want) => assert_close(
                    &format!("hp {ax} ({p},{q},{r},{s})"),
                    got.finite().unwrap(),
                    want,
                    1e-9,
                ),
                None => assert!(got.is_infinite(), "hp ({p},{q},{r},{s}) should diverge"),
            }
        }
    }
}

#[test]
fn iem_moments_match_quadrature() {
    for &(ax, ay, kappa) in &[(1.0, 1.0, 0.5), (1.5, 2.0, 0.9), (0.8, 1.1, 0.3)] {
        let c = 0.75;
        let spec = two_vertex(KernelSpec::Iem { kappa }, ax, ay, c);
        for &(p, q, r, s) in &exponent_grid() {
            let got = kernels::mixed_moment(&spec, 0, 1, p, q, r, s)
                .finite()
                .unwrap();
            let want = common::iem_moment(c, ax, ay, kappa, p, q, r, s);
            assert_close(&format!("iem {kappa} ({p},{q},{r},{s})"), got, want, 1e-9);
        }
    }
}

#[test]
fn discrete_moments_match_the_atom_sum() {
    let atoms_01 = [(0.15, 0.85, 0.6), (0.5, 0.5, 0.4), (0.9, 0.2, 1.1)];
    let atoms_10 = [(0.3, 0.4, 0.8)];
    let graph = Graph::new(vec!["x".into(), "y".into()], vec![(0, 1, 1.0)]).unwrap();
    let mut atoms = std::collections::BTreeMap::new();
    atoms.insert(
        (0, 1),
        atoms_01.iter().map(|&(u, v, w)| Atom { u, v, w }).collect(),
    );
    atoms.insert(
        (1, 0),
        atoms_10.iter().map(|&(u, v, w)| Atom { u, v, w }).collect(),
    );
    let spec = ModelSpec::new(
        graph,
        AlphaWeights::new(vec![1.0, 1.0]).unwrap(),
        KernelSpec::Discrete { atoms },
    )
    .unwrap();

    for &(p, q, r, s) in &exponent_grid() {
        let got = kernels::mixed_moment(&spec, 0, 1, p, q, r, s)
            .finite()
            .unwrap();
        assert_close(
            &format!("atoms ({p},{q},{r},{s})"),
            got,
            common::discrete_moment(&atoms_01, p, q, r, s),
            1e-12,
        );
        let back = kernels::mixed_moment(&spec, 1, 0, p, q, r, s)
            .finite()
            .unwrap();
        assert_close(
            &format!("atoms rev ({p},{q},{r},{s})"),
            back,
            common::discrete_moment(&atoms_10, p, q, r, s),
            1e-12,
        );
    }
}

#[test]
fn jump_and_exchange_rates_match_their_brackets() {
    let specs = [
        two_vertex(KernelSpec::Kmp, 0.6, 1.3, 0.7),
        two_vertex(KernelSpec::Hp, 1.2, 0.9, 1.5),
        two_vertex(KernelSpec::Iem { kappa: 0.4 }, 1.0, 1.4, 0.9),
    ];
    for spec in &specs {
        let oracle = |p: u32, q: u32, r: u32, s: u32| -> f64 {
            let fwd = kernels::mixed_moment(spec, 0, 1, p, q, r, s);
            let rev = kernels::mixed_moment(spec, 1, 0, r, s, p, q);
            match (fwd, rev) {
                (Moment::Finite(a), Moment::Finite(b)) => a + b,
                _ => panic!("rate bracket must be finite"),
            }
        };
        assert_close("r", kernels::r_rate(spec, 0, 1), oracle(0, 1, 0, 0), 1e-12);
        assert_close("s", kernels::s_rate(spec, 0, 1), oracle(1, 1, 0, 0), 1e-12);
    }
}

#[test]
fn closed_form_gamma_agrees_with_the_edge_minimum() {
    let mut cases: Vec<ModelSpec> = Vec::new();
    for &(ax, ay) in &[(1.0, 1.0), (0.25, 0.25), (2.0, 3.5)] {
        for &c in &[0.5, 1.0] {
            cases.push(two_vertex(KernelSpec::Kmp, ax, ay, c));
            cases.push(two_vertex(KernelSpec::Hp, ax, ay, c));
        }
    }
    cases.push(two_vertex(KernelSpec::Iem { kappa: 0.5 }, 1.0, 1.0, 0.5));
    cases.push(two_vertex(KernelSpec::Iem { kappa: 0.2 }, 0.9, 2.0, 1.5));

    let labels: Vec<String> = (0..4).map(|i| format!("v{i}")).collect();
    let edges = vec![
        (0usize, 1usize, 0.3),
        (1, 2, 1.0),
        (2, 3, 0.4),
        (0, 3, 0.8),
        (0, 2, 0.1),
    ];
    let alpha = AlphaWeights::new(vec![0.7, 1.1, 2.0, 0.5]).unwrap();
    for kernel in [KernelSpec::Kmp, KernelSpec::Hp, KernelSpec::Iem { kappa: 0.3 }] {
        let graph = Graph::new(labels.clone(), edges.clone()).unwrap();
        cases.push(ModelSpec::new(graph, alpha.clone(), kernel).unwrap());
    }

    for spec in &cases {
        let generic = kernels::gamma(spec).unwrap().gamma;
        let closed = kernels::gamma_closed_form(spec).expect("named family");
        assert_close("gamma", generic, closed, 1e-10);
        assert!(generic <= 2.0 + 1e-12);
    }
}

#[test]
fn stationary_weights_are_proportional_to_alpha() {
    let spec = two_vertex(KernelSpec::Kmp, 0.6, 2.4, 1.0);
    let pi = kernels::stationary_pi(&spec).unwrap();
    assert_close("pi_x", pi[0], 0.2, 1e-14);
    assert_close("pi_y", pi[1], 0.8, 1e-14);
}

#[test]
fn comparison_margins_match_the_moment_oracle() {
    let spec = two_vertex(KernelSpec::Hp, 1.5, 1.5, 0.9);
    let report = kernels::aldous_criterion(&spec);
    assert!(report.holds);
    for m in &report.margins {
        let (x, y) = (m.x, m.y);
        let s = kernels::s_rate(&spec, x, y);
        let r = kernels::r_rate(&spec, x, y);
        assert_close("margin", m.margin, 2.0 * s - r, 1e-12);
        assert!(m.margin >= -1e-12);
    }

    let tight = two_vertex(KernelSpec::Iem { kappa: 0.5 }, 2.0, 2.0, 1.0);
    let report = kernels::aldous_criterion(&tight);
    assert!(report.holds, "boundary case counts as satisfied");
    for m in &report.margins {
        assert!(m.margin.abs() <= 1e-12, "boundary margin {}", m.margin);
    }

    let fails = two_vertex(KernelSpec::Kmp, 1.0, 1.0, 1.0);
    assert!(!kernels::aldous_criterion(&fails).holds);
}
