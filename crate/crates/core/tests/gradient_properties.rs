mod common;

use proptest::prelude::*;
use vfair::nnet::{forward_pass, weighted_gradient, LossVector, ParameterVector};
use vfair::vfair::{
    batch_sigma, combined_weights, ema_update, grad_mu, grad_sigma, pairwise_coefficients, secondary_term,
    FairObjectiveKind, UpdateState,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reweighting_matches_two_gradients(seed in any::<u64>(), lambda in 0.0f64..4.0) {
        let mut r = common::rng(seed);
        let inst = common::random_instance(&mut r, 50);
        let (spec, params, batch) = (&inst.spec, &inst.params, &inst.batch);
        let losses = forward_pass(spec, params, batch).unwrap().losses().clone();
        let mu = losses.mean();
        let sigma = batch_sigma(&losses, mu, 1e-12);
        let two = grad_sigma(spec, params, batch, mu, sigma)
            .unwrap()
            .plus_scaled(lambda, &grad_mu(spec, params, batch).unwrap());
        let one = weighted_gradient(spec, params, batch, &combined_weights(&losses, mu, sigma, lambda)).unwrap();
        prop_assert!(common::relative_error(&two, &one) < 1e-10);
    }

    #[test]
    fn weighted_gradient_is_linear_in_weights(seed in any::<u64>(), a in -2.0f64..2.0) {
        let mut r = common::rng(seed);
        let inst = common::random_instance(&mut r, 50);
        let (spec, params, batch) = (&inst.spec, &inst.params, &inst.batch);
        let b = batch.len();
        let w1: Vec<f64> = (0..b).map(|_| common::normal(&mut r)).collect();
        let w2: Vec<f64> = (0..b).map(|_| common::normal(&mut r)).collect();
        let mixed: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + y).collect();
        let lhs = weighted_gradient(spec, params, batch, &mixed).unwrap();
        let rhs = weighted_gradient(spec, params, batch, &w2)
            .unwrap()
            .plus_scaled(a, &weighted_gradient(spec, params, batch, &w1).unwrap());
        prop_assert!(common::relative_error(&lhs, &rhs) < 1e-10 || rhs.norm() < 1e-12);
    }

    #[test]
    fn ema_closed_form(m in 0.0f64..10.0, beta in 0.5f64..0.999, t in 1i32..400) {
        let losses = LossVector::new(vec![m; 3]).unwrap();
        let mut mu = 0.0;
        for _ in 0..t {
            mu = ema_update(mu, &losses, beta).unwrap();
            prop_assert!(mu >= 0.0);
        }
        prop_assert!((mu - m * (1.0 - beta.powi(t))).abs() <= 1e-12 * m.max(1.0));
    }

    #[test]
    fn secondary_weights_stay_nonnegative_with_batch_mean(
        losses in prop::collection::vec(0.0f64..5.0, 2..20),
        kind in prop_oneof![Just(FairObjectiveKind::Variance), Just(FairObjectiveKind::Pairwise)],
    ) {
        let lv = LossVector::new(losses).unwrap();
        let mu = lv.mean();
        let state = UpdateState::new(0.1);
        let sigma = batch_sigma(&lv, mu, state.sigma_floor);
        let term = secondary_term(kind, &lv, mu, sigma, &state);
        let min = term.weights.iter().map(|w| w + term.lambda2).fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-12);
    }

    #[test]
    fn pairwise_coefficients_sum_to_zero(losses in prop::collection::vec(0.0f64..5.0, 1..20)) {
        let phi = pairwise_coefficients(&LossVector::new(losses).unwrap());
        prop_assert!(phi.iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(phi.iter().all(|p| p.abs() <= 2.0));
    }
}

#[test]
fn zero_direction_is_a_fixed_point() {
    let mut r = common::rng(3);
    let inst = common::random_instance(&mut r, 50);
    let g = weighted_gradient(&inst.spec, &inst.params, &inst.batch, &vec![0.0; inst.batch.len()]).unwrap();
    assert_eq!(g, ParameterVector::zeros(inst.params.len()));
}
