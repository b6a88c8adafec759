//! Spectral invariants on random models: agreement of the two fresh-
//! eigenvalue extraction routes, the level-one identity with the walk gap,
//! the certified bounds, and the sharpness and crossover behavior of the
//! kinetic product on complete heavy-tailed models.

mod common;

use common::models::{arb_discrete_model, arb_model, arb_named_model, complete};
use exgap_core::model::KernelSpec;
use exgap_core::spectral::{self, SpectralMethod};
use exgap_core::kernels;
use proptest::prelude::*;

const CAP: usize = 10_000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fresh_eigenvalue_routes_agree(spec in arb_named_model(4), k in 2usize..=3) {
        let fast = spectral::new_eigs(&spec, k, CAP, SpectralMethod::Reversible).unwrap();
        let slow = spectral::new_eigs(&spec, k, CAP, SpectralMethod::General).unwrap();
        prop_assert_eq!(fast.len(), slow.len());
        let scale = slow.iter().fold(1.0f64, |m, e| m.max(e.norm()));
        let mut remaining = slow.clone();
        for e in &fast {
            let (idx, dist) = remaining
                .iter()
                .enumerate()
                .map(|(i, s)| (i, (s - e).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(dist <= 1e-7 * scale, "unmatched fresh eigenvalue {e}");
            remaining.swap_remove(idx);
        }
    }

    #[test]
    fn level_one_gap_is_the_walk_gap(spec in arb_named_model(4)) {
        let level = spectral::eig_level(&spec, 1, CAP, SpectralMethod::Auto).unwrap();
        let rw = spectral::gap_rw(&spec).unwrap();
        prop_assert!(
            (level.gap() - rw).abs() <= 1e-9 * rw.max(1.0),
            "level-1 gap {} vs walk gap {}", level.gap(), rw
        );
    }

    #[test]
    fn certified_bounds_hold_on_random_models(spec in arb_model(4)) {
        let verdict = spectral::verify_bounds(&spec, 2, CAP).unwrap();
        prop_assert!(verdict.pass, "verdict failed: {verdict:?}");
    }

    #[test]
    fn the_sandwich_confines_reversible_gaps(spec in arb_named_model(3)) {
        let suite = spectral::spectrum_suite(&spec, 3, CAP, SpectralMethod::Auto).unwrap();
        let gamma = kernels::gamma(&spec).unwrap().gamma;
        let lower = gamma.min(1.0) * suite.gap_rw;
        let upper = suite.gap_rw;
        let got = suite.gap_upto();
        prop_assert!(got >= lower - 1e-9 * lower.max(1.0));
        prop_assert!(got <= upper + 1e-9 * upper.max(1.0));
    }

    #[test]
    fn irreversible_gaps_still_clear_the_lower_bound(spec in arb_discrete_model(3)) {
        let suite = spectral::spectrum_suite(&spec, 3, CAP, SpectralMethod::Auto).unwrap();
        let gamma = kernels::gamma(&spec).unwrap().gamma;
        let lower = gamma.min(1.0) * suite.gap_rw;
        prop_assert!(suite.gap_upto() >= lower - 1e-9 * lower.max(1.0));
    }

    #[test]
    fn comparison_regime_pins_the_gap_to_the_walk(alpha in 1.5f64..3.0, c in 0.3f64..1.2) {
        let spec = complete(KernelSpec::Hp, 4, alpha, c);
        let aldous = kernels::aldous_criterion(&spec);
        prop_assert!(aldous.holds);
        let suite = spectral::spectrum_suite(&spec, 3, CAP, SpectralMethod::Auto).unwrap();
        prop_assert!(
            (suite.gap_upto() - suite.gap_rw).abs() <= 1e-8 * suite.gap_rw.max(1.0),
            "gap {} vs walk gap {}", suite.gap_upto(), suite.gap_rw
        );
    }
}

#[test]
fn kinetic_product_is_sharp_on_complete_heavy_tailed_models() {
    for alpha in [0.2, 0.5, 0.9] {
        let spec = complete(KernelSpec::Hp, 8, alpha, 0.125);
        let gamma = kernels::gamma(&spec).unwrap().gamma;
        let rw = spectral::gap_rw(&spec).unwrap();
        let fresh = spectral::new_eigs(&spec, 2, CAP, SpectralMethod::Auto).unwrap();
        let min_re = fresh
            .iter()
            .map(|e| e.re)
            .fold(f64::INFINITY, f64::min);
        assert!(
            (min_re - gamma * rw).abs() <= 1e-6 * (gamma * rw),
            "alpha {alpha}: fresh minimum {min_re} vs kinetic product {}",
            gamma * rw
        );

        let crosses_below = min_re < rw;
        assert_eq!(
            crosses_below,
            alpha < 0.75,
            "alpha {alpha}: fresh minimum {min_re}, walk gap {rw}"
        );
    }
}

#[test]
fn second_level_can_undercut_the_walk_gap() {
    let spec = complete(KernelSpec::Hp, 8, 0.25, 0.125);
    let suite = spectral::spectrum_suite(&spec, 2, CAP, SpectralMethod::Auto).unwrap();
    assert!(suite.gap_upto() < suite.gap_rw);
    let verdict = spectral::verify_bounds(&spec, 2, CAP).unwrap();
    assert!(verdict.pass);
}
