use super::*;
use crate::channel::{generate, ChannelConfig};
use crate::nn::Tensor1D;

fn clean(n: usize) -> Dataset {
    generate(&ChannelConfig::clean(11), n).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_a_small_noiseless_set() {
    let data = clean(16);
    let init = init_network::<f32>(&NetworkDims::cnn_default(), 3).unwrap();
    let cfg = TrainConfig {
        validation_fraction: 0.25,
        ..quick(200)
    };
    let out = train(&init, &data, &cfg).unwrap();
    assert_eq!(accuracy(&out.network, &data).unwrap(), 1.0);
}

#[test]
fn binary_network_trains_on_clean_data() {
    let data = clean(256);
    let init = init_network::<f32>(&NetworkDims::bcnn_default(), 5).unwrap();
    let out = train(&init, &data, &quick(30)).unwrap();
    let net = binarize(&out.network);
    assert!(accuracy(&net, &data).unwrap() > 0.95);
    for l in net.conv_layers().iter().filter(|l| l.binary) {
        assert!(l.kernels.weights().iter().all(|&w| w == 1.0 || w == -1.0));
    }
    for (l, s) in out.network.conv_layers().iter().zip(init.layer_shapes()) {
        if s.binary {
            assert!(l.kernels.weights().iter().all(|w| w.abs() <= 1.0));
        }
    }
}

#[test]
fn binarize_keeps_decisions() {
    let data = generate(&ChannelConfig::default(), 200).unwrap();
    let net = init_network::<f32>(&NetworkDims::bcnn_default(), 8).unwrap();
    let bin = binarize(&net);
    for i in 0..data.len() {
        let x = data.tensor::<f32>(i);
        assert!(net.forward(&x).unwrap().bit_identical(&bin.forward(&x).unwrap()));
    }
}

#[test]
fn zero_learning_rate_leaves_weights() {
    let data = clean(64);
    let init = init_network::<f32>(&NetworkDims::bcnn_default(), 4).unwrap();
    for optimizer in [Optimizer::Sgd, Optimizer::Adam] {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            optimizer,
            ..quick(3)
        };
        assert_eq!(train(&init, &data, &cfg).unwrap().network, init);
    }
}

#[test]
fn training_is_deterministic() {
    let data = generate(&ChannelConfig::default(), 128).unwrap();
    let init = init_network::<f32>(&NetworkDims::cnn_default(), 6).unwrap();
    let a = train(&init, &data, &quick(3)).unwrap();
    let b = train(&init, &data, &quick(3)).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.log, b.log);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = single.install(|| train(&init, &data, &quick(3)).unwrap());
    assert_eq!(a.network, c.network);
}

#[test]
fn best_checkpoint_has_lowest_validation_loss() {
    let data = generate(&ChannelConfig::default(), 128).unwrap();
    let init = init_network::<f32>(&NetworkDims::cnn_default(), 2).unwrap();
    let out = train(&init, &data, &quick(5)).unwrap();
    assert_eq!(out.log.len(), 5);
    if out.best_epoch > 0 {
        let best = out.log[out.best_epoch - 1].val_loss;
        assert!(out.log.iter().all(|e| e.val_loss >= best));
    }
}

#[test]
fn rejects_bad_inputs() {
    let init = init_network::<f32>(&NetworkDims::cnn_default(), 1).unwrap();
    let short = generate(
        &ChannelConfig {
            symbols_per_frame: 2,
            ..ChannelConfig::clean(1)
        },
        10,
    )
    .unwrap();
    assert!(matches!(train(&init, &short, &quick(1)), Err(Error::Domain(_))));
    let bad = TrainConfig {
        validation_fraction: 1.0,
        ..quick(1)
    };
    assert!(matches!(train(&init, &clean(10), &bad), Err(Error::Config(_))));
    assert!(train(&init, &clean(1), &quick(1)).is_err());
}

#[test]
fn log_csv_layout() {
    let log = [EpochLog {
        epoch: 1,
        train_loss: 0.5,
        val_loss: 0.25,
        val_acc: 1.0,
    }];
    let mut buf = Vec::new();
    write_log_csv(&mut buf, &log).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,1.0\n"
    );
}

fn sample(seed: u64) -> (Tensor1D<f64>, usize) {
    let ds = generate(
        &ChannelConfig {
            rng_seed: seed,
            ..ChannelConfig::default()
        },
        1,
    )
    .unwrap();
    (ds.tensor::<f64>(0), ds.label(0) as usize)
}

#[test]
fn gradient_matches_differences_on_default_cnn() {
    for seed in 0..4 {
        let net = init_network::<f64>(&NetworkDims::cnn_default(), seed).unwrap();
        let (x, label) = sample(seed);
        let r = gradient_check(&net, &x, label, 1e-3).unwrap();
        assert!(r.checked + r.excluded.len() == net.parameter_count() && r.checked > 800);
        assert!(r.max_rel_error < 1e-2, "seed {seed}: {}", r.max_rel_error);
    }
}

#[test]
fn gradient_is_near_exact_in_a_linear_region() {
    // positive weights and inputs keep every pre-activation positive
    let mut net = init_network::<f64>(&NetworkDims::cnn_default(), 9).unwrap();
    for b in param_blocks_mut(&mut net) {
        for w in b.iter_mut() {
            *w = w.abs() * 0.3 + 0.01;
        }
    }
    let x = Tensor1D::from_signal((0..32).map(|i| 0.5 + 0.4 * ((i as f64) * 0.7).sin()).collect()).unwrap();
    let r = gradient_check(&net, &x, 1, 1e-3).unwrap();
    assert!(r.excluded.len() < 10);
    assert!(r.max_rel_error < 1e-5, "{}", r.max_rel_error);
}

#[test]
fn kink_points_are_excluded() {
    // a zero input row makes every first-layer pre-activation equal its bias
    let net = init_network::<f64>(&NetworkDims::cnn_default(), 1).unwrap();
    let x = Tensor1D::from_signal(vec![0.0; 32]).unwrap();
    let r = gradient_check(&net, &x, 0, 1e-3).unwrap();
    assert!(!r.excluded.is_empty());
    assert!(r.max_rel_error < 1e-2);
}

#[test]
fn gradient_check_rejects_binary_layers() {
    let net = init_network::<f64>(&NetworkDims::bcnn_default(), 1).unwrap();
    let (x, label) = sample(1);
    assert!(matches!(gradient_check(&net, &x, label, 1e-3), Err(Error::Domain(_))));
}
