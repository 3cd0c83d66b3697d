use crate::error::{Error, Result};
use crate::numerics::Distribution;
use crate::scalar::Real;

/// Lower clamp applied to probabilities before taking a logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

fn check_tau<T: Real>(tau: T) -> Result<()> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// `softmax(z / tau)` with max subtraction.
pub fn softmax_temperature<T: Real>(z: &[T], tau: T) -> Result<Distribution<T>> {
    check_tau(tau)?;
    if z.is_empty() {
        return Err(Error::shape("softmax of an empty vector"));
    }
    debug_assert!(z.iter().all(|v| v.is_finite()), "non-finite logits");
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| ((v - max) / tau).exp()).collect();
    let total = pairwise_sum(&exps);
    Ok(Distribution::from_raw(exps.into_iter().map(|e| e / total).collect()))
}

/// `log softmax(z / tau)`, computed without forming the probabilities.
pub fn log_softmax_temperature<T: Real>(z: &[T], tau: T) -> Result<Vec<T>> {
    check_tau(tau)?;
    if z.is_empty() {
        return Err(Error::shape("log-softmax of an empty vector"));
    }
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let shifted: Vec<T> = z.iter().map(|&v| (v - max) / tau).collect();
    let exps: Vec<T> = shifted.iter().map(|v| v.exp()).collect();
    let log_total = pairwise_sum(&exps).ln();
    Ok(shifted.into_iter().map(|v| v - log_total).collect())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy<T: Real>(p: &Distribution<T>) -> T {
    let terms: Vec<T> = p
        .probs()
        .iter()
        .map(|&pi| if pi > T::zero() { -pi * pi.ln() } else { T::zero() })
        .collect();
    pairwise_sum(&terms)
}

/// `-sum target_i ln(max(predicted_i, 1e-12))`.
pub fn cross_entropy<T: Real>(target: &Distribution<T>, predicted: &Distribution<T>) -> Result<T> {
    if target.len() != predicted.len() {
        return Err(Error::shape(format!(
            "cross-entropy over {} vs {} positions",
            target.len(),
            predicted.len()
        )));
    }
    let clamp = T::lit(LOG_CLAMP);
    let terms: Vec<T> = target
        .probs()
        .iter()
        .zip(predicted.probs())
        .map(|(&t, &p)| if t == T::zero() { T::zero() } else { -t * p.max(clamp).ln() })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Gradient of [`cross_entropy`] with respect to the predicted probabilities.
pub fn cross_entropy_grad_predicted<T: Real>(
    target: &Distribution<T>,
    predicted: &Distribution<T>,
) -> Result<Vec<T>> {
    if target.len() != predicted.len() {
        return Err(Error::shape("cross-entropy gradient length mismatch"));
    }
    let clamp = T::lit(LOG_CLAMP);
    Ok(target
        .probs()
        .iter()
        .zip(predicted.probs())
        .map(|(&t, &p)| if p < clamp { T::zero() } else { -t / p })
        .collect())
}

/// Backward pass of [`softmax_temperature`]: maps `dL/dp` to `dL/dz`.
pub fn softmax_backward<T: Real>(p: &Distribution<T>, grad_p: &[T], tau: T) -> Result<Vec<T>> {
    check_tau(tau)?;
    if grad_p.len() != p.len() {
        return Err(Error::shape("softmax gradient length mismatch"));
    }
    let weighted: Vec<T> = p.probs().iter().zip(grad_p).map(|(&pi, &g)| pi * g).collect();
    let dot = pairwise_sum(&weighted);
    Ok(p.probs()
        .iter()
        .zip(grad_p)
        .map(|(&pi, &g)| pi * (g - dot) / tau)
        .collect())
}

/// Fused gradient of `cross_entropy(target, softmax(z / tau))` with respect to `z`:
/// `(softmax(z / tau) - target) / tau`.
pub fn softmax_cross_entropy_grad<T: Real>(
    target: &Distribution<T>,
    logits: &[T],
    tau: T,
) -> Result<Vec<T>> {
    if target.len() != logits.len() {
        return Err(Error::shape("softmax cross-entropy gradient length mismatch"));
    }
    let p = softmax_temperature(logits, tau)?;
    Ok(p.probs()
        .iter()
        .zip(target.probs())
        .map(|(&pi, &ti)| (pi - ti) / tau)
        .collect())
}

/// Fixed-order pairwise summation; the result depends only on the slice contents.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_temperature(&[0.0, 0.0, 0.0], 1.0).unwrap();
        for &v in p.probs() {
            assert!(close(v, 1.0 / 3.0, 1e-15));
        }
        let p = softmax_temperature(&[0.0, 3f64.ln()], 1.0).unwrap();
        assert!(close(p[0], 0.25, 1e-15));
        assert!(close(p[1], 0.75, 1e-15));
        let a = softmax_temperature(&[1.0, 2.0], 2.0).unwrap();
        let b = softmax_temperature(&[0.5, 1.0], 1.0).unwrap();
        assert!(close(a[0], b[0], 1e-15) && close(a[1], b[1], 1e-15));
    }

    #[test]
    fn non_positive_temperature_rejected() {
        assert!(matches!(softmax_temperature(&[1.0, 2.0], 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(softmax_temperature(&[1.0, 2.0], -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&Distribution::<f64>::one_hot(5, 2)), 0.0);
        let u = Distribution::<f64>::uniform(7);
        assert!(close(entropy(&u), 7f64.ln(), 1e-14));
        let half = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!(close(entropy(&half), std::f64::consts::LN_2, 1e-15));
    }

    #[test]
    fn cross_entropy_examples() {
        let one = Distribution::<f64>::one_hot(4, 1);
        assert_eq!(cross_entropy(&one, &one).unwrap(), 0.0);
        let p = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(close(cross_entropy(&p, &p).unwrap(), entropy(&p), 1e-15));
        let target = Distribution::<f64>::one_hot(10, 3);
        let uniform = Distribution::uniform(10);
        assert!(close(cross_entropy(&target, &uniform).unwrap(), 2.302585092994046, 1e-12));
        let short = Distribution::<f64>::uniform(3);
        assert!(matches!(cross_entropy(&target, &short), Err(Error::Shape(_))));
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let z = [0.3, -1.2, 2.5, 0.0];
        let lp = log_softmax_temperature(&z, 1.7).unwrap();
        let p = softmax_temperature(&z, 1.7).unwrap();
        for (a, b) in lp.iter().zip(p.probs()) {
            assert!(close(*a, b.ln(), 1e-14));
        }
    }

    fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut plus = x.to_vec();
                let mut minus = x.to_vec();
                plus[i] += h;
                minus[i] -= h;
                (f(&plus) - f(&minus)) / (2.0 * h)
            })
            .collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn ce_of_softmax_gradient_is_p_minus_onehot() {
        let z = [0.4, -0.3, 1.1, 0.2, -2.0];
        let target = Distribution::one_hot(5, 2);
        let analytic = softmax_cross_entropy_grad(&target, &z, 1.0).unwrap();
        let p = softmax_temperature(&z, 1.0).unwrap();
        for i in 0..5 {
            let expected = p[i] - if i == 2 { 1.0 } else { 0.0 };
            assert!(close(analytic[i], expected, 1e-15));
        }
        let numeric = central_difference(
            |x| cross_entropy(&target, &softmax_temperature(x, 1.0).unwrap()).unwrap(),
            &z,
        );
        assert!(max_rel_err(&analytic, &numeric) < 1e-6);
    }

    #[test]
    fn tau_squared_scaled_kd_gradient_matches_finite_differences() {
        let tau = 2.0;
        let z = [0.9, -0.4, 0.1, 1.6];
        let target = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let numeric = central_difference(
            |x| tau * tau * cross_entropy(&target, &softmax_temperature(x, tau).unwrap()).unwrap(),
            &z,
        );
        let p = softmax_temperature(&z, tau).unwrap();
        let closed_form: Vec<f64> = (0..4).map(|i| tau * (p[i] - target[i])).collect();
        assert!(max_rel_err(&closed_form, &numeric) < 1e-6);
    }

    #[test]
    fn composed_softmax_and_ce_backward_matches_fused() {
        let z = [0.5, -1.0, 0.25];
        let tau = 1.5;
        let target = Distribution::new(vec![0.6, 0.1, 0.3]).unwrap();
        let p = softmax_temperature(&z, tau).unwrap();
        let dp = cross_entropy_grad_predicted(&target, &p).unwrap();
        let composed = softmax_backward(&p, &dp, tau).unwrap();
        let fused = softmax_cross_entropy_grad(&target, &z, tau).unwrap();
        assert!(max_rel_err(&composed, &fused) < 1e-12);
    }

    fn distribution(len: usize) -> impl Strategy<Value = Distribution<f64>> {
        proptest::collection::vec(0.0f64..1.0, len).prop_map(|raw| {
            let total: f64 = raw.iter().sum::<f64>() + 1e-3;
            let mut probs: Vec<f64> = raw.iter().map(|v| (v + 1e-3 / raw.len() as f64) / total).collect();
            let s: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= s);
            Distribution::new(probs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_even_for_extreme_logits(
            z in proptest::collection::vec(-1e4f64..1e4, 1..40),
            tau in 0.05f64..10.0,
        ) {
            let p = softmax_temperature(&z, tau).unwrap();
            let total: f64 = p.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn softmax_is_shift_invariant(
            z in proptest::collection::vec(-50f64..50.0, 1..20),
            c in -100f64..100.0,
            tau in 0.1f64..5.0,
        ) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let a = softmax_temperature(&z, tau).unwrap();
            let b = softmax_temperature(&shifted, tau).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn entropy_bounded_by_log_length(p in (1usize..30).prop_flat_map(distribution)) {
            let h = entropy(&p);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn gibbs_inequality(
            (p, q) in (1usize..30).prop_flat_map(|n| (distribution(n), distribution(n)))
        ) {
            prop_assert!(cross_entropy(&p, &q).unwrap() >= entropy(&p) - 1e-12);
        }

        #[test]
        fn softmax_backward_matches_finite_differences(
            z in proptest::collection::vec(-3f64..3.0, 2..8),
            g in proptest::collection::vec(-1f64..1.0, 8),
            tau in 0.5f64..3.0,
        ) {
            let g = &g[..z.len()];
            let p = softmax_temperature(&z, tau).unwrap();
            let analytic = softmax_backward(&p, g, tau).unwrap();
            let numeric = central_difference(
                |x| {
                    let q = softmax_temperature(x, tau).unwrap();
                    q.probs().iter().zip(g).map(|(a, b)| a * b).sum()
                },
                &z,
            );
            let err: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-8);
        }
    }
}
