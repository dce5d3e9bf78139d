use proptest::prelude::*;
use rof_accel::cost_model::{estimate, ResourceProfile};
use rof_accel::nn::{conv1d, leaky_relu, maxpool1d, ConvDims, KernelSet, NetKind, Network, NetworkDims, Tensor1D};
use rof_accel::numerics::{self, leaky_relu_real, Arithmetic, QFormat, Scalar};
use rof_accel::schedules::{self, ScheduleKind};
use rof_accel::Q16_8;

fn tensor<T: Scalar>(channels: usize, values: &[f32]) -> Tensor1D<T> {
    let len = values.len() / channels;
    Tensor1D::new(
        channels,
        len,
        values[..channels * len].iter().map(|&v| T::from_f32(v)).collect(),
    )
    .unwrap()
}

fn dims(kind: NetKind, len: usize, conv: &[(usize, usize)]) -> NetworkDims {
    NetworkDims {
        kind,
        input_channels: 1,
        input_length: len,
        conv: conv
            .iter()
            .map(|&(m, f)| ConvDims {
                out_channels: m,
                kernel_size: f,
                stride: 1,
            })
            .collect(),
        classes: 2,
    }
}

fn random_net(d: &NetworkDims, params: &[f32]) -> Network<f32> {
    let zero = Network::<f32>::zeros(d).unwrap();
    let mut it = params.iter().copied().cycle();
    let conv = zero
        .conv_layers()
        .iter()
        .map(|l| {
            let k = &l.kernels;
            let w = (0..k.weights().len()).map(|_| it.next().unwrap()).collect();
            let b = (0..k.bias().len()).map(|_| it.next().unwrap()).collect();
            rof_accel::nn::ConvLayer {
                kernels: KernelSet::new(k.out_channels(), k.in_channels(), k.kernel_size(), w, b).unwrap(),
                ..l.clone()
            }
        })
        .collect();
    let fc = zero.fc();
    let fc = rof_accel::nn::FcLayer::new(
        fc.in_features(),
        fc.out_classes(),
        (0..fc.weights().len()).map(|_| it.next().unwrap()).collect(),
        (0..fc.bias().len()).map(|_| it.next().unwrap()).collect(),
    )
    .unwrap();
    Network::new(d.kind, 1, d.input_length, conv, fc).unwrap()
}

proptest! {
    #[test]
    fn leaky_real_is_monotone(a in -1e30f32..1e30, b in -1e30f32..1e30) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(leaky_relu_real(lo) <= leaky_relu_real(hi));
    }

    #[test]
    fn msb_depends_only_on_sign(a in -1e6f32..1e6, b in -1e6f32..1e6) {
        let (ma, mb) = (numerics::msb(a).unwrap(), numerics::msb(b).unwrap());
        prop_assert!(ma == 1 || ma == -1);
        if a.is_sign_negative() == b.is_sign_negative() {
            prop_assert_eq!(ma, mb);
        }
    }

    #[test]
    fn pool_and_activation_commute(channels in 1usize..4, values in prop::collection::vec(-64f32..64.0, 2..48)) {
        prop_assume!(values.len() / channels >= 2);
        let x = tensor::<f32>(channels, &values);
        prop_assert_eq!(maxpool1d(&leaky_relu(&x)), leaky_relu(&maxpool1d(&x)));
        let q = tensor::<Q16_8>(channels, &values);
        prop_assert_eq!(maxpool1d(&leaky_relu(&q)), leaky_relu(&maxpool1d(&q)));
    }

    #[test]
    fn identity_kernel_truncates(values in prop::collection::vec(-8f32..8.0, 3..40), f in 1usize..4, tap in 0usize..4) {
        prop_assume!(tap < f && f <= values.len());
        let x = tensor::<f32>(1, &values);
        let mut w = vec![0.0; f];
        w[tap] = 1.0;
        let k = KernelSet::new(1, 1, f, w, vec![0.0]).unwrap();
        let y = conv1d(&x, &k, 1).unwrap();
        prop_assert_eq!(y.as_slice(), &values[tap..tap + values.len() - f + 1]);
    }

    #[test]
    fn schedules_agree_and_conserve_work(
        binary in any::<bool>(),
        len in 20usize..40,
        m in 1usize..5,
        f in 2usize..5,
        params in prop::collection::vec(-1f32..1.0, 64),
        input in prop::collection::vec(-2f32..2.0, 40),
    ) {
        let d = if binary {
            dims(NetKind::Bcnn, len, &[(m, f), (m, 2), (2, 2)])
        } else {
            dims(NetKind::Cnn, len, &[(m, f), (3, f)])
        };
        prop_assume!(d.layer_shapes().is_ok());
        let net = random_net(&d, &params);
        let profile = ResourceProfile::vc709();
        let x = tensor::<f32>(1, &input[..len]);
        let qnet = net.cast::<Q16_8>();
        let qx = x.cast::<Q16_8>();
        let (seq, seq_t) = schedules::run(ScheduleKind::Sequential, &net, &x, &profile).unwrap();
        let (qseq, qseq_t) = schedules::run(ScheduleKind::Sequential, &qnet, &qx, &profile).unwrap();
        for kind in [ScheduleKind::InnerParallel, ScheduleKind::FullyUnrolled] {
            let (out, t) = schedules::run(kind, &net, &x, &profile).unwrap();
            prop_assert!(out.bit_identical(&seq));
            prop_assert_eq!(t.op_counts, seq_t.op_counts);
            prop_assert!(t.cycles() <= seq_t.cycles());
            let (qout, qt) = schedules::run(kind, &qnet, &qx, &profile).unwrap();
            prop_assert!(qout.bit_identical(&qseq));
            prop_assert_eq!(qt.op_counts, qseq_t.op_counts);
        }
    }

    // A wider kernel shortens every downstream map, so only channel counts and
    // the input length are grown here.
    #[test]
    fn estimate_is_monotone_in_layer_size(
        binary in any::<bool>(),
        m in 1usize..12,
        f in 2usize..6,
        grow in 0usize..3,
    ) {
        let (kind, conv) = if binary {
            (NetKind::Bcnn, vec![(m, f), (m, f), (4, 2)])
        } else {
            (NetKind::Cnn, vec![(m, f), (m, f)])
        };
        let small = dims(kind, 32, &conv);
        let mut big = small.clone();
        match grow {
            0 => big.conv[0].out_channels += 1,
            1 => big.conv[1].out_channels += 1,
            _ => big.input_length += 2,
        }
        prop_assume!(small.layer_shapes().is_ok() && big.layer_shapes().is_ok());
        for arithmetic in [Arithmetic::Real32, Arithmetic::Fixed(QFormat::Q16_8)] {
            for (kind, profile) in [
                (ScheduleKind::Sequential, ResourceProfile::vc709()),
                (ScheduleKind::InnerParallel, ResourceProfile::vc709()),
                (ScheduleKind::FullyUnrolled, ResourceProfile::vc709().unconstrained()),
            ] {
                let a = estimate(&small, arithmetic, kind, &profile).unwrap();
                let b = estimate(&big, arithmetic, kind, &profile).unwrap();
                prop_assert!(b.dsp >= a.dsp && b.lut >= a.lut && b.cycles >= a.cycles, "{kind}: {a:?} -> {b:?}");
                prop_assert!(b.bram_18kb >= a.bram_18kb && b.latency_s >= a.latency_s);
            }
            let seq = estimate(&small, arithmetic, ScheduleKind::Sequential, &ResourceProfile::vc709()).unwrap();
            for kind in ScheduleKind::ALL {
                let r = estimate(&small, arithmetic, kind, &ResourceProfile::vc709()).unwrap();
                prop_assert!(seq.dsp <= r.dsp);
            }
        }
    }
}
