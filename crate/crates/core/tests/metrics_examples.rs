use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skipsnn::baselines::{evaluate_policy, Policy};
use skipsnn::dynamics::{skipsnn_forward, Architecture, GateMode, LifConfig, ModelParams};
use skipsnn::matrix::Matrix;
use skipsnn::metrics::{Component, FlopLedger, GateState};
use skipsnn::spiketrain::{generate_split, DatasetSpec, SpikeTrain, Split};

fn default_net(seed: u64) -> ModelParams<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelParams::init(&Architecture::default(), 64, 4, LifConfig::default(), &mut rng).unwrap()
}

fn test_split(n: usize) -> Vec<SpikeTrain> {
    generate_split(&DatasetSpec::default(), Split::Test, n)
        .unwrap()
        .into_iter()
        .map(|g| g.train)
        .collect()
}

#[test]
fn random_mask_input_cost_is_proportional_to_awake_fraction() {
    let p = default_net(1);
    let xs = test_split(200);
    let full = evaluate_policy(&xs, &p, Policy::AlwaysAwake).unwrap();
    let part = evaluate_policy(&xs, &p, Policy::Random { p: 0.11, seed: 5 }).unwrap();
    let input = |l: &FlopLedger| l.component(Component::InputMatmul).flops() as f64;
    let ratio = input(&part.ledger) / input(&full.ledger);
    assert!((ratio / part.awake_frac - 1.0).abs() < 0.05, "ratio {ratio} awake {}", part.awake_frac);
    assert!((part.awake_frac - 0.11).abs() < 0.01);
}

#[test]
fn gating_only_removes_network_charges() {
    let xs = test_split(20);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (i, x) in xs.iter().enumerate() {
        let mut p = default_net(i as u64);
        p.ctrl_wo = vec![rng.gen_range(0.0..1.2), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        p.ctrl_wz = (0..128).map(|_| rng.gen_range(-0.05..0.1)).collect();
        let mut forced = FlopLedger::new();
        let mut learned = FlopLedger::new();
        skipsnn_forward(x, &p, GateMode::ForcedAwake, &mut forced).unwrap();
        skipsnn_forward(x, &p, GateMode::Learned, &mut learned).unwrap();
        for c in [Component::InputMatmul, Component::HiddenMatmul, Component::Decay] {
            assert!(learned.component(c).flops() <= forced.component(c).flops(), "{c:?}");
        }
        assert_eq!(forced.component(Component::Controller).flops(), 0);
        assert_eq!(forced.state(GateState::Hibernating).flops(), 0);
    }
}

#[test]
fn silent_network_pays_only_decay() {
    let mut p = default_net(0);
    for m in &mut p.layer_weights {
        *m = Matrix::zeros(m.rows(), m.cols());
    }
    let x = SpikeTrain::zeros(64, 300, 0).unwrap();
    let mut l = FlopLedger::new();
    skipsnn_forward(&x, &p, GateMode::ForcedAwake, &mut l).unwrap();
    let decay = l.component(Component::Decay);
    assert_eq!(decay.mults, 300 * 2 * (128 + 64 + 4));
    assert_eq!(decay.adds, 300 * (128 + 64 + 4));
    assert_eq!(l.total(), decay);
}
