//! Analytic gradients of both objectives against central differences.

mod common;

use common::max_gradient_error;
use lbmrc::distill::Objective;

#[test]
fn likelihood_gradient_matches_finite_differences() {
    for (seed, layers) in [(11, 1), (12, 1), (13, 2)] {
        let (err, at) = max_gradient_error(Objective::nll_only(), false, seed, layers);
        assert!(err <= 1e-3, "seed {seed}, {layers} layers: {err:.3e} at {at}");
    }
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    for (seed, layers) in [(11, 1), (12, 1), (13, 2)] {
        let (err, at) = max_gradient_error(Objective::default(), true, seed, layers);
        assert!(err <= 1e-3, "seed {seed}, {layers} layers: {err:.3e} at {at}");
    }
}
