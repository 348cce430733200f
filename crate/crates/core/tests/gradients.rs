use phonoeeg_core::tensor::gradcheck::{check_sequential, run_suite, Case, Objective};
use phonoeeg_core::tensor::ops::{
    dense_backward, lstm_backward, lstm_forward_batched, softmax, softmax_cross_entropy, LstmParams,
};
use phonoeeg_core::tensor::Tensor;

#[test]
fn every_layer_kind_matches_finite_differences() {
    for report in run_suite(20).unwrap() {
        assert!(
            report.max_error < 1e-4,
            "{}: max relative error {:.3e}",
            report.case.name(),
            report.max_error
        );
    }
}

#[test]
fn dense_two_by_two_weight_gradient_is_outer_product() {
    let x = Tensor::new(vec![1, 2], vec![0.5, -1.5]).unwrap();
    let w = Tensor::new(vec![2, 2], vec![1.0, 2.0, -1.0, 0.5]).unwrap();
    let delta = Tensor::new(vec![1, 2], vec![0.25, -2.0]).unwrap();
    let (_, dw, db) = dense_backward(&x, &w, &delta).unwrap();
    assert_eq!(dw.data(), &[0.125, -0.375, -1.0, 3.0]);
    assert_eq!(db.data(), &[0.25, -2.0]);
}

#[test]
fn relu_blocks_gradient_at_negative_preactivation() {
    let (mut model, _, _) = Case::Relu.instance(3).unwrap();
    // Push every pre-activation negative: zero the weights, negative bias.
    for (i, p) in model.params_mut().into_iter().enumerate() {
        let fill = if i == 0 { 0.0 } else { -1.0 };
        p.data_mut().iter_mut().for_each(|v| *v = fill);
    }
    let x = Tensor::new(vec![1, 4], vec![0.3, -0.2, 0.9, 0.1]).unwrap();
    let check = check_sequential(&mut model, &x, &Objective::Mse(vec![1.0; 6]), 0).unwrap();
    assert_eq!(check.max_error(), 0.0);
    let params = model.params_mut();
    assert!(params.iter().all(|p| p.grad().unwrap().iter().all(|&g| g == 0.0)));
}

#[test]
fn lstm_three_steps_input_gradient() {
    let mut params = LstmParams::zeros(2, 2);
    for (i, v) in params.w_x.data_mut().iter_mut().enumerate() {
        *v = ((i * 7 % 5) as f64 - 2.0) * 0.3;
    }
    for (i, v) in params.w_h.data_mut().iter_mut().enumerate() {
        *v = ((i * 3 % 4) as f64 - 1.5) * 0.4;
    }
    let xs = [0.2, -0.4, 0.9, 0.1, -0.7, 0.5];
    let loss = |params: &LstmParams, xs: &[f64]| {
        let (hs, _) = lstm_forward_batched(&Tensor::new(vec![1, 3, 2], xs.to_vec()).unwrap(), params, &[0.0; 2], &[0.0; 2]).unwrap();
        hs.data().iter().map(|h| h * h).sum::<f64>() / 2.0
    };
    let (hs, cache) = lstm_forward_batched(&Tensor::new(vec![1, 3, 2], xs.to_vec()).unwrap(), &params, &[0.0; 2], &[0.0; 2]).unwrap();
    let grads = lstm_backward(&cache, &mut params, hs.data()).unwrap();
    for i in 0..xs.len() {
        let mut plus = xs;
        let mut minus = xs;
        plus[i] += 1e-5;
        minus[i] -= 1e-5;
        let numeric = (loss(&params, &plus) - loss(&params, &minus)) / 2e-5;
        let analytic = grads.dxs[i];
        assert!((numeric - analytic).abs() <= 1e-8 * analytic.abs().max(1.0), "{i}: {analytic} vs {numeric}");
    }
}

#[test]
fn combined_softmax_cross_entropy_gradient_is_probs_minus_onehot() {
    let logits = Tensor::new(vec![2, 3], vec![0.3, -1.2, 2.0, 5.0, 5.0, -3.0]).unwrap();
    let targets = [2, 0];
    let (_, grad) = softmax_cross_entropy(&logits, &targets).unwrap();
    let probs = softmax(&logits);
    for b in 0..2 {
        for k in 0..3 {
            let onehot = if targets[b] == k { 1.0 } else { 0.0 };
            let expected = (probs.data()[b * 3 + k] - onehot) / 2.0;
            assert!((grad.data()[b * 3 + k] - expected).abs() < 1e-12);
        }
    }
}
