use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skipsnn::dynamics::{skipsnn_forward_with, Firing, GateMode, LifConfig, ModelParams};
use skipsnn::matrix::Matrix;
use skipsnn::spiketrain::SpikeTrain;
use skipsnn::training::gradcheck::{fd_oracle_gradients, max_relative_error, smoothed_bptt_gradients, DEFAULT_FD_STEP};
use skipsnn::training::{bptt, penalty_grad, BpttOptions, GradientSet, Surrogate};

const SMOOTHING: f64 = 0.5;
const FLOOR: f64 = 1e-6;

fn random_instance(seed: u64, sizes: &[usize], steps: usize) -> (SpikeTrain, usize, ModelParams<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = *sizes.last().unwrap();
    let layer_weights = sizes
        .windows(2)
        .map(|w| Matrix::from_fn(w[1], w[0], |_, _| rng.gen_range(-1.2..1.2)))
        .collect();
    let periods = vec![1, 3];
    let params = ModelParams {
        layer_weights,
        ctrl_wz: (0..sizes[1]).map(|_| rng.gen_range(-0.5..1.5)).collect(),
        ctrl_wo: (0..periods.len()).map(|_| rng.gen_range(0.0..1.2)).collect(),
        pulse_periods: periods,
        voting: Matrix::identity(classes),
        lif: LifConfig { tau: 0.5, v_th: 1.0 },
    };
    let label = rng.gen_range(0..classes);
    let x = SpikeTrain::from_fn(sizes[0], steps, label, |_, _| rng.gen_bool(0.4)).unwrap();
    (x, label, params)
}

fn max_abs_diff(a: &GradientSet<f64>, b: &GradientSet<f64>) -> f64 {
    a.slices()
        .into_iter()
        .flatten()
        .zip(b.slices().into_iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn seed_eleven_small_net() {
    let (x, label, params) = random_instance(11, &[3, 4, 2], 5);
    let fd = fd_oracle_gradients(&x, label, &params, GateMode::Learned, SMOOTHING, 0.1, DEFAULT_FD_STEP).unwrap();
    let an = smoothed_bptt_gradients(&x, label, &params, GateMode::Learned, SMOOTHING, 0.1).unwrap();
    let err = max_relative_error(&fd, &an, FLOOR);
    assert!(err < 1e-4, "max relative error {err}");
    assert!(an.ctrl_wz.iter().chain(&an.ctrl_wo).any(|&g| g != 0.0));
}

#[test]
fn random_instances_gated_and_ungated() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mask: Vec<bool> = (0..12).map(|t| t % 3 != 1).collect();
    for i in 0..24u64 {
        let depth = rng.gen_range(2..=3);
        let mut sizes = vec![rng.gen_range(2..=8)];
        for _ in 1..depth {
            sizes.push(rng.gen_range(2..=6));
        }
        sizes.push(rng.gen_range(2..=3));
        let steps = rng.gen_range(3..=12);
        let lambda = [0.0, 0.1, 0.5][i as usize % 3];
        let mode = match i % 3 {
            0 | 1 => GateMode::Learned,
            _ if i % 2 == 0 => GateMode::ForcedAwake,
            _ => GateMode::External(&mask[..steps]),
        };
        let (x, label, params) = random_instance(100 + i, &sizes, steps);
        let fd = fd_oracle_gradients(&x, label, &params, mode, SMOOTHING, lambda, DEFAULT_FD_STEP).unwrap();
        let an = smoothed_bptt_gradients(&x, label, &params, mode, SMOOTHING, lambda).unwrap();
        let err = max_relative_error(&fd, &an, FLOOR);
        assert!(err < 1e-4, "instance {i} sizes {sizes:?} T={steps}: max relative error {err}");
    }
}

#[test]
fn zero_weights_agree_tightly() {
    let (x, label, mut params) = random_instance(5, &[4, 3, 2], 6);
    for w in &mut params.layer_weights {
        w.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
    }
    params.ctrl_wz.iter_mut().for_each(|v| *v = 0.0);
    params.ctrl_wo.iter_mut().for_each(|v| *v = 0.0);
    let fd = fd_oracle_gradients(&x, label, &params, GateMode::Learned, SMOOTHING, 0.1, DEFAULT_FD_STEP).unwrap();
    let an = smoothed_bptt_gradients(&x, label, &params, GateMode::Learned, SMOOTHING, 0.1).unwrap();
    assert!(max_abs_diff(&fd, &an) < 1e-8);
    // hidden units are interchangeable, so their incoming gradients coincide
    let g = &an.layer_weights[0];
    for j in 1..g.rows() {
        assert_eq!(g.row(j), g.row(0));
    }
}

#[test]
fn central_difference_error_is_second_order() {
    let (x, label, params) = random_instance(11, &[3, 4, 2], 5);
    let an = smoothed_bptt_gradients(&x, label, &params, GateMode::Learned, SMOOTHING, 0.1).unwrap();
    let err_at = |h: f64| {
        let fd = fd_oracle_gradients(&x, label, &params, GateMode::Learned, SMOOTHING, 0.1, h).unwrap();
        fd.slices()
            .into_iter()
            .flatten()
            .zip(an.slices().into_iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    };
    // at 1e-5 rounding noise is already comparable to the truncation error
    let ratio = err_at(2e-3) / err_at(1e-3);
    assert!((3.9..4.1).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn silent_network_has_exactly_zero_gradient() {
    let (x, label, mut params) = random_instance(3, &[5, 4, 3], 8);
    params.lif.v_th = 1e6;
    let trace = skipsnn_forward_with(&x, &params, GateMode::ForcedAwake, Firing::Heaviside, None).unwrap();
    let opts = BpttOptions {
        main: Surrogate::Rectangular { epsilon: 1.0 },
        controller: Surrogate::Rectangular { epsilon: 1.0 },
        lambda: 0.0,
        reset_grad: false,
    };
    let (loss, g) = bptt(&trace, &x, label, &params, &opts).unwrap();
    assert_eq!(loss.classification, 1.0);
    assert!(g.slices().into_iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn penalty_gradient_is_lambda_over_t() {
    for steps in [1usize, 7, 300] {
        for lambda in [0.0, 1e-3, 0.1, 2.5] {
            let g = penalty_grad(steps, lambda);
            assert_eq!(g.len(), steps);
            assert!(g.iter().all(|&v| v == lambda / steps as f64));
        }
    }
    assert!(penalty_grad(0, 0.1f64).is_empty());
}

#[test]
fn out_of_peak_unit_receives_no_gradient() {
    // hidden unit 1 only ever sees strongly negative drive, so its membrane
    // never enters the rectangular window
    let (x, label, mut params) = random_instance(8, &[4, 3, 2], 10);
    params.layer_weights[0].row_mut(1).iter_mut().for_each(|w| *w = -5.0);
    let trace = skipsnn_forward_with(&x, &params, GateMode::ForcedAwake, Firing::Heaviside, None).unwrap();
    assert!((0..10).all(|t| (trace.layer_u(0, t)[1] - 1.0).abs() >= 0.5));
    let opts = BpttOptions {
        main: Surrogate::Rectangular { epsilon: 1.0 },
        controller: Surrogate::Rectangular { epsilon: 1.0 },
        lambda: 0.0,
        reset_grad: false,
    };
    let (_, g) = bptt(&trace, &x, label, &params, &opts).unwrap();
    assert!(g.layer_weights[0].row(1).iter().all(|&v| v == 0.0));
    assert!((0..2).all(|r| g.layer_weights[1][(r, 1)] == 0.0));
}
