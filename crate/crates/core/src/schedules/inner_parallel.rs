use super::exec::{activate, binary_output, conv_output, fc_scores, pool_pair};
use super::trace::OpCounts;
use crate::nn::{conv_out_len, pool_out_len, Inference, Network, Tensor1D};
use crate::numerics::Scalar;

/// Inner-parallel design. Each step of the feature-map loop computes position `i` on
/// the low datapath and `I - 1 - i` on the high one; the middle position of an
/// odd-length map is computed once, by the low side. Activation is applied as
/// soon as an output's last tap is in, and a pooling pair is reduced in the
/// step that completes it.
pub(super) fn execute<T: Scalar>(net: &Network<T>, x: &Tensor1D<T>, tally: &mut OpCounts) -> Inference<T> {
    let mut h = x.clone();
    for layer in net.conv_layers() {
        let k = &layer.kernels;
        let len = conv_out_len(h.length(), k.kernel_size(), layer.stride);
        let plen = pool_out_len(len);
        let mut act = vec![T::zero(); len];
        let mut pooled = vec![T::zero(); k.out_channels() * plen];
        for m in 0..k.out_channels() {
            for step in 0..len.div_ceil(2) {
                let lo = step;
                let hi = len - 1 - step;
                for i in if hi == lo { vec![lo] } else { vec![lo, hi] } {
                    let z = if layer.binary {
                        binary_output(&h, k, m, i, layer.stride, tally)
                    } else {
                        conv_output(&h, k, m, i, layer.stride, tally)
                    };
                    act[i] = activate(z, tally);
                }
                let mut candidates = [lo / 2, hi / 2];
                if candidates[0] == candidates[1] {
                    candidates[1] = usize::MAX;
                }
                for j in candidates {
                    if j < plen && pair_step(j, len) == step {
                        pooled[m * plen + j] = pool_pair(act[2 * j], act[2 * j + 1], tally);
                    }
                }
            }
        }
        h = Tensor1D::from_parts_unchecked(k.out_channels(), plen, pooled);
    }
    // the duplicated datapath splits the classes between even and odd indices
    let classes = net.fc().out_classes();
    let order = (0..classes).step_by(2).chain((1..classes).step_by(2));
    fc_scores(h.as_slice(), net.fc(), order, tally)
}

/// Step in which the later member of pooling pair `j` is computed.
fn pair_step(j: usize, len: usize) -> usize {
    let step_of = |i: usize| i.min(len - 1 - i);
    step_of(2 * j).max(step_of(2 * j + 1))
}
