//! Randomized identities of the symbolic kernel and the geometry built on it.

mod support;

use proptest::prelude::*;
use support::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, ..ProptestConfig::default() })]

    #[test]
    fn normalize_is_idempotent(t in tree(true)) {
        support::normalize_is_idempotent(&t)?;
    }

    #[test]
    fn total_derivatives_commute(t in tree(true)) {
        support::total_derivatives_commute(&t)?;
    }

    #[test]
    fn total_derivatives_commute_on_an_equation(t in tree(false), i in 0usize..3, j in 0usize..3) {
        support::total_derivatives_commute_on_an_equation(&t, i, j)?;
    }

    #[test]
    fn curvature_symmetries_and_bianchi(coeffs in metric_coeffs()) {
        support::curvature_symmetries_and_bianchi(&coeffs)?;
    }

    #[test]
    fn cotton_is_trace_free_and_antisymmetric(coeffs in metric_coeffs()) {
        support::cotton_is_trace_free_and_antisymmetric(&coeffs)?;
    }

    #[test]
    fn weyl_connection_satisfies_its_construction(coeffs in metric_coeffs(), w in covector()) {
        support::weyl_connection_satisfies_its_construction(&coeffs, &w)?;
    }

    #[test]
    fn covector_gauge_law(coeffs in metric_coeffs(), l in factor(), use_exp in any::<bool>()) {
        support::covector_gauge_law(&coeffs, &l, use_exp)?;
    }

    #[test]
    fn expressions_survive_a_document_round_trip(t in tree(true)) {
        support::expressions_survive_a_document_round_trip(&t)?;
    }
}
