//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rof_accel::channel::{
    self, ber_sweep, default_sweep, generate, write_sweep_csv, ChannelConfig, Dataset, SweepPoint, ThresholdDetector,
    FEC_THRESHOLD,
};
use rof_accel::cost_model::{
    efficiency_index, estimate, layer_resources, reference_measurement, CostReport, ResourceProfile,
};
use rof_accel::nn::{
    binary_conv1d, binary_conv1d_xnor, leaky_relu, maxpool1d, sign_mac_score, weights_file, ConvDims, ConvLayer,
    FcLayer, KernelSet, NetKind, Network, NetworkDims, SignBits, Tensor1D,
};
use rof_accel::numerics::{leaky_relu_real, leaky_relu_shift, Arithmetic, FixedPoint, QFormat, Scalar};
use rof_accel::schedules::{self, LayerWork, ScheduleKind};
use rof_accel::training::{binarize, gradient_check, init_network, train, TrainConfig};
use rof_accel::Q16_8;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let t0 = Instant::now();
    let v = f();
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!(
        "{tag} {id:>2} {name}: {} [{:.1}s]",
        v.detail,
        t0.elapsed().as_secs_f64()
    );
    v.pass
}

fn main() -> ExitCode {
    let results = [
        report(1, "schedule equivalence", schedule_equivalence),
        report(2, "inner-parallel latency reduction", inner_parallel_latency),
        report(3, "fully-unrolled latency reduction", fully_unrolled_latency),
        report(4, "efficiency index", efficiency_indices),
        report(5, "resource-model ratios", resource_ratios),
        report(6, "leaky-ReLU shift equivalence", leaky_shift),
        report(7, "binary-conv equivalence", binary_conv),
        report(8, "activation/pool commutation", commutation),
        report(9, "gradient check", gradients),
        report(10, "end-to-end BER", end_to_end_ber),
        report(11, "determinism", determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_dims(rng: &mut ChaCha8Rng) -> NetworkDims {
    loop {
        let kind = if rng.random_bool(0.5) {
            NetKind::Cnn
        } else {
            NetKind::Bcnn
        };
        let dims = NetworkDims {
            kind,
            input_channels: rng.random_range(1..=2),
            input_length: rng.random_range(16..=48),
            conv: (0..kind.conv_layers())
                .map(|_| ConvDims {
                    out_channels: rng.random_range(1..=8),
                    kernel_size: rng.random_range(1..=6),
                    stride: rng.random_range(1..=2),
                })
                .collect(),
            classes: rng.random_range(2..=4),
        };
        if dims.layer_shapes().is_ok() {
            return dims;
        }
    }
}

fn random_network(dims: &NetworkDims, rng: &mut ChaCha8Rng) -> Network<f32> {
    let zero = Network::<f32>::zeros(dims).unwrap();
    let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let conv = zero
        .conv_layers()
        .iter()
        .map(|l| {
            let k = &l.kernels;
            ConvLayer {
                kernels: KernelSet::new(
                    k.out_channels(),
                    k.in_channels(),
                    k.kernel_size(),
                    draw(k.weights().len()),
                    draw(k.bias().len()),
                )
                .unwrap(),
                ..l.clone()
            }
        })
        .collect();
    let fc = zero.fc();
    let fc = FcLayer::new(
        fc.in_features(),
        fc.out_classes(),
        draw(fc.weights().len()),
        draw(fc.bias().len()),
    )
    .unwrap();
    Network::new(dims.kind, dims.input_channels, dims.input_length, conv, fc).unwrap()
}

fn agree_on<T: Scalar>(net: &Network<T>, x: &Tensor1D<T>, profile: &ResourceProfile) -> bool {
    let (seq, _) = schedules::run(ScheduleKind::Sequential, net, x, profile).unwrap();
    [ScheduleKind::InnerParallel, ScheduleKind::FullyUnrolled]
        .into_iter()
        .all(|k| schedules::run(k, net, x, profile).unwrap().0.bit_identical(&seq))
}

fn schedule_equivalence() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tight = ResourceProfile {
        dsp_budget: Some(40),
        lut_budget: None,
        ..ResourceProfile::vc709()
    };
    let profiles = [
        ResourceProfile::vc709(),
        ResourceProfile::arty7(),
        ResourceProfile::vc709().unconstrained(),
        tight,
    ];
    let pairs = 1000;
    let mut mismatches = 0;
    for i in 0..pairs {
        let dims = random_dims(&mut rng);
        let net = random_network(&dims, &mut rng);
        let n = dims.input_channels * dims.input_length;
        let x = Tensor1D::new(
            dims.input_channels,
            dims.input_length,
            (0..n).map(|_| rng.random_range(-2.0f32..2.0)).collect(),
        )
        .unwrap();
        let profile = &profiles[i % profiles.len()];
        if !agree_on(&net, &x, profile) {
            mismatches += 1;
        }
        if !agree_on(&net.cast::<Q16_8>(), &x.cast::<Q16_8>(), profile) {
            mismatches += 1;
        }
    }
    let elapsed = t0.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{pairs} random pairs x 2 arithmetics, {mismatches} mismatches, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn latency(dims: &NetworkDims, kind: ScheduleKind, profile: &ResourceProfile) -> CostReport {
    estimate(dims, Arithmetic::Real32, kind, profile).unwrap()
}

fn inner_parallel_latency() -> Verdict {
    let p = ResourceProfile::vc709();
    let ratio = |d: NetworkDims| {
        latency(&d, ScheduleKind::InnerParallel, &p).latency_s / latency(&d, ScheduleKind::Sequential, &p).latency_s
    };
    let cnn = ratio(NetworkDims::cnn_default());
    let bcnn = ratio(NetworkDims::bcnn_default());
    let cnn_ok = (0.50..=0.60).contains(&cnn);
    let bcnn_ok = (bcnn - 0.5415).abs() <= 0.05;
    verdict(
        cnn_ok && bcnn_ok,
        format!("CNN {cnn:.4} (target 0.5507, band [0.50, 0.60]); BCNN {bcnn:.4} (target 0.5415 +/- 0.05)"),
    )
}

fn fully_unrolled_latency() -> Verdict {
    let p = ResourceProfile::vc709().unconstrained();
    let d = NetworkDims::cnn_default();
    let reduction = 1.0
        - latency(&d, ScheduleKind::FullyUnrolled, &p).latency_s / latency(&d, ScheduleKind::Sequential, &p).latency_s;
    verdict(
        (reduction * 100.0 - 85.62).abs() <= 5.0,
        format!("CNN reduction {:.2}% (target 85.62% +/- 5 pp)", reduction * 100.0),
    )
}

fn efficiency_indices() -> Verdict {
    let cases = [
        ("CNN1", "CNN2", "VC709", 3.03),
        ("CNN1", "CNN3", "VC709", 15.06),
        ("CNN1", "CNN3", "Arty-7", 28.83),
        ("BCNN1", "BCNN2", "VC709", 1.72),
        ("BCNN1", "BCNN3", "VC709", 55.25),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (base, opt, device, expected) in cases {
        let (Some(b), Some(o)) = (reference_measurement(base, device), reference_measurement(opt, device)) else {
            return verdict(false, format!("missing reference row for {opt} on {device}"));
        };
        let Some(e) = efficiency_index(&b, &o) else {
            return verdict(false, format!("{opt} on {device}: index undefined"));
        };
        worst = worst.max((e - expected).abs() / expected);
        parts.push(format!("{opt}/{device} {e:.2}"));
    }
    verdict(
        worst <= 0.005,
        format!("{}; worst deviation {:.3}%", parts.join(", "), worst * 100.0),
    )
}

fn resource_ratios() -> Verdict {
    let vc = ResourceProfile::vc709();
    let cnn = NetworkDims::cnn_default();
    let seq = latency(&cnn, ScheduleKind::Sequential, &vc).dsp;
    let ip = latency(&cnn, ScheduleKind::InnerParallel, &vc).dsp;
    let fu = latency(&cnn, ScheduleKind::FullyUnrolled, &vc.unconstrained()).dsp;

    let bcnn = NetworkDims::bcnn_default();
    let works = LayerWork::from_dims(&bcnn).unwrap();
    let mut binary_dsp = 0;
    for kind in ScheduleKind::ALL {
        for profile in [vc.clone(), vc.unconstrained()] {
            for arithmetic in [Arithmetic::Real32, Arithmetic::Fixed(QFormat::Q16_8)] {
                let trace = schedules::plan(&bcnn, arithmetic, kind, &profile).unwrap();
                for (w, l) in works.iter().zip(&trace.layers) {
                    if w.is_binary() {
                        binary_dsp += layer_resources(w, l.widths, arithmetic, &profile).dsp;
                    }
                }
            }
        }
    }
    verdict(
        ip == 2 * seq && fu >= 10 * seq && binary_dsp == 0,
        format!(
            "DSP Seq {seq}, InnerParallel {ip} (ratio {}), FullyUnrolled {fu} (ratio {:.1}); binary-layer DSPs {binary_dsp}",
            ip as f64 / seq as f64,
            fu as f64 / seq as f64
        ),
    )
}

fn leaky_shift() -> Verdict {
    let mut fixed_bad = 0u64;
    for frac in 0..16 {
        let q = QFormat::new(16, frac).unwrap();
        for m in i16::MIN as i64..=i16::MAX as i64 {
            let y = leaky_relu_shift(FixedPoint::new(m, q).unwrap()).mantissa() as i64;
            let expected = if m >= 0 { m } else { m.div_euclid(4) };
            fixed_bad += (y != expected) as u64;
        }
    }
    for m in i16::MIN as i64..=i16::MAX as i64 {
        let y = Q16_8::from_mantissa(m).leaky_relu().mantissa() as i64;
        fixed_bad += (y != if m >= 0 { m } else { m.div_euclid(4) }) as u64;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut real_bad = 0u64;
    let trials = 1_000_000;
    for _ in 0..trials {
        // random negative finite binary32, subnormals included
        let x = f32::from_bits(rng.random_range(0x8000_0001u32..0xFF80_0000));
        let expected = (x as f64 * 0.25) as f32;
        real_bad += (leaky_relu_real(x).to_bits() != expected.to_bits()) as u64;
    }
    verdict(
        fixed_bad == 0 && real_bad == 0,
        format!("{fixed_bad} fixed mismatches over 17 x 2^16 values; {real_bad} of {trials} binary32 mismatches"),
    )
}

fn signed(bits: u32, len: usize, magnitude: f32) -> Vec<f32> {
    (0..len)
        .map(|j| {
            if bits >> j & 1 == 1 {
                -magnitude
            } else {
                magnitude * (j % 3) as f32
            }
        })
        .collect()
}

fn binary_conv() -> Verdict {
    // exhaustive: every sign pattern of input window and kernel up to 12 bits
    let mut exhaustive = 0u64;
    let mut bad = 0u64;
    for len in 1..=12usize {
        let inputs: Vec<(Tensor1D<f32>, SignBits)> = (0..1u32 << len)
            .map(|b| {
                let v = signed(b, len, 0.75);
                (Tensor1D::from_signal(v.clone()).unwrap(), SignBits::pack(v))
            })
            .collect();
        for wb in 0..1u32 << len {
            let w = signed(wb, len, 1.5);
            let k = KernelSet::new(1, 1, len, w.clone(), vec![0.0]).unwrap();
            let wbits = SignBits::pack(w);
            for (x, xbits) in &inputs {
                bad += (sign_mac_score(x, &k, 0, 0, 1) != xbits.xnor_score(&wbits)) as u64;
                exhaustive += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 100_000;
    for _ in 0..trials {
        let (n, f) = (rng.random_range(1..=8), rng.random_range(2..=9));
        if n * f <= 12 {
            continue;
        }
        let (m, len, stride) = (
            rng.random_range(1..=3),
            rng.random_range(f..=f + 12),
            rng.random_range(1..=2),
        );
        let x: Vec<f32> = (0..n * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor1D::new(n, len, x).unwrap();
        let k = KernelSet::new(
            m,
            n,
            f,
            (0..m * n * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let a = binary_conv1d(&x, &k, stride).unwrap();
        let b = binary_conv1d_xnor(&x, &k, stride).unwrap();
        bad += (a
            .as_slice()
            .iter()
            .map(|v| v.to_bits())
            .ne(b.as_slice().iter().map(|v| v.to_bits()))) as u64;
        let (qx, qk) = (x.cast::<Q16_8>(), k.cast::<Q16_8>());
        bad += (binary_conv1d(&qx, &qk, stride).unwrap() != binary_conv1d_xnor(&qx, &qk, stride).unwrap()) as u64;
    }
    verdict(
        bad == 0,
        format!("{exhaustive} exhaustive window pairs (<= 12 bits) and {trials} random trials, {bad} mismatches"),
    )
}

fn commutation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 10_000;
    let mut bad = 0;
    for _ in 0..trials {
        let (c, len) = (rng.random_range(1..=4), rng.random_range(2..=40));
        let v: Vec<f32> = (0..c * len).map(|_| rng.random_range(-100.0..100.0)).collect();
        let x = Tensor1D::new(c, len, v).unwrap();
        bad += (maxpool1d(&leaky_relu(&x)) != leaky_relu(&maxpool1d(&x))) as usize;
        let q = x.cast::<Q16_8>();
        bad += (maxpool1d(&leaky_relu(&q)) != leaky_relu(&maxpool1d(&q))) as usize;
    }
    verdict(
        bad == 0,
        format!("{trials} random tensors x 2 arithmetics, {bad} mismatches"),
    )
}

fn gradients() -> Verdict {
    let mut worst = 0.0f64;
    let (mut checked, mut excluded) = (0, 0);
    for seed in 0..5 {
        let net = init_network::<f64>(&NetworkDims::cnn_default(), seed).unwrap();
        let ds = generate(
            &ChannelConfig {
                rng_seed: 100 + seed,
                ..ChannelConfig::default()
            },
            1,
        )
        .unwrap();
        let r = gradient_check(&net, &ds.tensor::<f64>(0), ds.label(0) as usize, 1e-3).unwrap();
        worst = worst.max(r.max_rel_error);
        checked += r.checked;
        excluded += r.excluded.len();
    }
    verdict(
        worst < 1e-2,
        format!("max relative error {worst:.2e} over {checked} parameters ({excluded} kink points excluded)"),
    )
}

fn training_set(entries: &[channel::SweepEntry], per_entry: usize) -> Dataset {
    let mut out: Option<Dataset> = None;
    for (i, e) in entries.iter().enumerate() {
        let cfg = ChannelConfig {
            rng_seed: 77 + i as u64,
            ..e.config.clone()
        };
        let d = generate(&cfg, per_entry).unwrap();
        out = Some(match out {
            None => d,
            Some(a) => a.concat(&d).unwrap(),
        });
    }
    out.unwrap()
}

fn serial<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn end_to_end_ber() -> Verdict {
    let t0 = Instant::now();
    let entries = default_sweep(1000);
    let data = training_set(&entries, 4000);
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let (cnn, bcnn) = serial(|| {
        let cnn = train(
            &init_network::<f32>(&NetworkDims::cnn_default(), 1).unwrap(),
            &data,
            &cfg,
        )
        .unwrap();
        let bcnn = train(
            &init_network::<f32>(&NetworkDims::bcnn_default(), 1).unwrap(),
            &data,
            &cfg,
        )
        .unwrap();
        (cnn.network, binarize(&bcnn.network))
    });
    let n = 100_000;
    let th = ber_sweep(&ThresholdDetector, &entries, n).unwrap();
    let c = ber_sweep(&cnn, &entries, n).unwrap();
    let b = ber_sweep(&bcnn, &entries, n).unwrap();
    for i in 0..entries.len() {
        println!(
            "     snr {:>4} dB: threshold {:.2e}  CNN {:.2e}  BCNN {:.2e}",
            th[i].snr_db, th[i].ber, c[i].ber, b[i].ber
        );
    }
    let fec_gain = (0..entries.len())
        .filter(|&i| c[i].ber < FEC_THRESHOLD && th[i].ber >= FEC_THRESHOLD)
        .count();
    let ordered = (0..entries.len()).all(|i| c[i].errors <= b[i].errors);
    let elapsed = t0.elapsed();
    verdict(
        fec_gain >= 1 && ordered && elapsed < Duration::from_secs(600),
        format!(
            "{n} symbols/point; CNN under FEC limit where threshold is not at {fec_gain} points; CNN <= BCNN everywhere: {ordered}; {:.0}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn sweep_csv(points: &[SweepPoint]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, points).unwrap();
    buf
}

fn determinism() -> Verdict {
    let run = || {
        let cfg = ChannelConfig {
            rng_seed: 31,
            phase_noise_linewidth: Some(1e-3),
            ..ChannelConfig::default()
        };
        let data = generate(&cfg, 3000).unwrap();
        let data_bytes = channel::file::encode(&data, Arithmetic::Real32).unwrap();
        let tc = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let net = serial(|| {
            train(
                &init_network::<f32>(&NetworkDims::bcnn_default(), 5).unwrap(),
                &data,
                &tc,
            )
            .unwrap()
        });
        let net = binarize(&net.network);
        let weights = weights_file::encode(&net);
        let csv = sweep_csv(&ber_sweep(&net, &default_sweep(9), 5000).unwrap());
        (data_bytes, weights, csv)
    };
    let (a, b) = (run(), run());
    verdict(
        a.0 == b.0 && a.1 == b.1 && a.2 == b.2,
        format!(
            "dataset {}, weights {}, sweep CSV {}",
            same(&a.0, &b.0),
            same(&a.1, &b.1),
            same(&a.2, &b.2)
        ),
    )
}

fn same(a: &[u8], b: &[u8]) -> &'static str {
    if a == b {
        "identical"
    } else {
        "DIFFER"
    }
}
