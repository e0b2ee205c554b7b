use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skipsnn::dynamics::{skipsnn_forward, GateMode, LifConfig, ModelParams};
use skipsnn::matrix::Matrix;
use skipsnn::metrics::{Component, FlopLedger, GateState};
use skipsnn::spiketrain::{generate_split, read_dataset, write_dataset, DatasetSpec, SpikeDataset, SpikeTrain, Split};

fn network(rng: &mut ChaCha8Rng, sizes: &[usize]) -> ModelParams<f64> {
    let out = *sizes.last().unwrap();
    ModelParams {
        layer_weights: sizes
            .windows(2)
            .map(|w| Matrix::from_fn(w[1], w[0], |_, _| rng.gen_range(0.0..1.0)))
            .collect(),
        ctrl_wz: vec![0.1; sizes[1]],
        ctrl_wo: vec![1.0, 0.1],
        pulse_periods: vec![1, 10],
        voting: Matrix::identity(out),
        lif: LifConfig::default(),
    }
}

/// At least one event in every column.
fn busy_train(rng: &mut ChaCha8Rng, channels: usize, steps: usize) -> SpikeTrain {
    let mut x = SpikeTrain::from_fn(channels, steps, 0, |_, _| rng.gen_bool(0.3)).unwrap();
    for t in 0..steps {
        let c = rng.gen_range(0..channels);
        x.set(t, c);
    }
    x
}

fn ledger_for(x: &SpikeTrain, p: &ModelParams<f64>, mode: GateMode<'_>) -> FlopLedger {
    let mut l = FlopLedger::new();
    skipsnn_forward(x, p, mode, &mut l).unwrap();
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // excitatory weights: removing input can only remove spikes downstream
    #[test]
    fn masking_never_adds_work(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [rng.gen_range(2..12), rng.gen_range(2..10), rng.gen_range(2..6)];
        let p = network(&mut rng, &sizes);
        let steps = rng.gen_range(1..30);
        let x = busy_train(&mut rng, sizes[0], steps);
        let mask: Vec<bool> = (0..steps).map(|_| rng.gen_bool(0.5)).collect();
        let ones = vec![true; steps];
        let full = ledger_for(&x, &p, GateMode::External(&ones)).total().flops();
        let part = ledger_for(&x, &p, GateMode::External(&mask)).total().flops();
        prop_assert_eq!(full, ledger_for(&x, &p, GateMode::ForcedAwake).total().flops());
        if mask.iter().all(|&b| b) {
            prop_assert_eq!(part, full);
        } else {
            prop_assert!(part < full, "masked {} vs full {}", part, full);
        }
    }

    #[test]
    fn batch_ledger_is_sum_of_sample_ledgers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [6, 5, 3];
        let p = network(&mut rng, &sizes);
        let xs: Vec<SpikeTrain> = (0..rng.gen_range(1..6)).map(|_| busy_train(&mut rng, 6, 12)).collect();
        let per: Vec<FlopLedger> = xs.iter().map(|x| ledger_for(x, &p, GateMode::Learned)).collect();
        let mut merged = FlopLedger::new();
        for l in per.iter().rev() {
            merged.merge(l);
        }
        let summed: FlopLedger = per.iter().sum();
        prop_assert_eq!(&merged, &summed);
        for c in Component::ALL {
            for s in [GateState::Awake, GateState::Hibernating] {
                prop_assert_eq!(summed.get(c, s), per.iter().fold(Default::default(), |a, l| a + l.get(c, s)));
            }
        }
    }

    #[test]
    fn event_charge_matches_dense_when_all_active(rows in 0usize..50, cols in 1usize..50) {
        let mut dense = FlopLedger::new();
        dense.charge_matmul_event_driven((rows, cols), cols, Component::InputMatmul, GateState::Awake);
        let c = dense.total();
        prop_assert_eq!(c.mults, (rows * cols) as u64);
        prop_assert_eq!(c.adds, (rows * cols) as u64);
    }

    #[test]
    fn dataset_file_round_trips(seed in any::<u64>(), p in 1usize..10, t in 1usize..15, c in 1usize..4, n in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = rng.gen_range(0.0..1.0);
        let trains: Vec<SpikeTrain> = (0..n)
            .map(|_| {
                let label = rng.gen_range(0..c);
                SpikeTrain::from_fn(p, t, label, |_, _| rng.gen_bool(density)).unwrap()
            })
            .collect();
        let ds = SpikeDataset::new(p, t, c, trains).unwrap();
        prop_assert_eq!(&SpikeDataset::decode(&ds.encode()).unwrap(), &ds);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        write_dataset(&path, &ds).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn generation_is_a_function_of_the_spec(seed in any::<u64>(), p in 8usize..20, s in 2usize..8, k in 0usize..3) {
        let spec = DatasetSpec {
            num_channels: p,
            horizon: 30,
            signal_len: s,
            num_classes: 3,
            pattern_rate: 0.3,
            noise_spikes_per_step: k,
            seed,
        };
        let a = generate_split(&spec, Split::Train, 6).unwrap();
        let b = generate_split(&spec, Split::Train, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.train, &y.train);
            prop_assert_eq!(x.signal_start, y.signal_start);
        }
        for g in &a {
            for t in 0..spec.horizon {
                let any = g.train.column(t).iter().any(|&v| v != 0);
                if k >= 1 {
                    prop_assert!(any);
                } else if any {
                    prop_assert!(g.in_signal(t, s));
                }
            }
        }
    }
}
