//! Per-output building blocks shared by the executing loop nests. Each helper
//! tallies the primitives it performs.

use super::activation_ops;
use super::trace::{OpCounts, Primitive};
use crate::nn::{argmax, FcLayer, Inference, KernelSet, Tensor1D};
use crate::numerics::Scalar;

/// Canonical real-valued output: bias, then channels ascending, taps ascending.
#[inline]
pub(super) fn conv_output<T: Scalar>(
    x: &Tensor1D<T>,
    k: &KernelSet<T>,
    m: usize,
    i: usize,
    stride: usize,
    tally: &mut OpCounts,
) -> T {
    let taps = (k.in_channels() * k.kernel_size()) as u64;
    tally.add(Primitive::Mul, taps);
    tally.add(Primitive::Add, taps);
    crate::nn::conv_point(x, k, m, i, stride)
}

/// Binary output in sign-MAC form.
#[inline]
pub(super) fn binary_output<T: Scalar>(
    x: &Tensor1D<T>,
    k: &KernelSet<T>,
    m: usize,
    i: usize,
    stride: usize,
    tally: &mut OpCounts,
) -> T {
    tally_binary(tally, k.in_channels() * k.kernel_size());
    k.bias()[m] + T::from_score(crate::nn::sign_mac_score(x, k, m, i, stride))
}

pub(super) fn tally_binary(tally: &mut OpCounts, taps: usize) {
    tally.add(Primitive::Xnor, taps as u64);
    tally.add(Primitive::PopcountBit, taps as u64);
    tally.add(Primitive::Shift, 1);
    tally.add(Primitive::Sub, 1);
    tally.add(Primitive::Add, 1);
}

#[inline]
pub(super) fn activate<T: Scalar>(z: T, tally: &mut OpCounts) -> T {
    for &p in activation_ops(T::arithmetic()) {
        tally.add(p, 1);
    }
    z.leaky_relu()
}

#[inline]
pub(super) fn pool_pair<T: Scalar>(a: T, b: T, tally: &mut OpCounts) -> T {
    tally.add(Primitive::Cmp, 1);
    a.max_of(b)
}

/// FC scores with the classes visited in `order`.
pub(super) fn fc_scores<T: Scalar>(
    x: &[T],
    fc: &FcLayer<T>,
    order: impl IntoIterator<Item = usize>,
    tally: &mut OpCounts,
) -> Inference<T> {
    let mut scores = vec![T::zero(); fc.out_classes()];
    for c in order {
        tally.add(Primitive::Mul, fc.in_features() as u64);
        tally.add(Primitive::Add, fc.in_features() as u64);
        scores[c] = fc.class_score(x, c);
    }
    Inference {
        decision: argmax(&scores),
        scores,
    }
}
