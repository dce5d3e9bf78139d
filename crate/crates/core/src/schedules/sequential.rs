use super::exec::{activate, binary_output, conv_output, fc_scores, pool_pair};
use super::trace::OpCounts;
use crate::nn::{pool_out_len, Inference, Network, Tensor1D};
use crate::numerics::Scalar;

/// Baseline design: one output at a time, layer after layer.
pub(super) fn execute<T: Scalar>(net: &Network<T>, x: &Tensor1D<T>, tally: &mut OpCounts) -> Inference<T> {
    let mut h = x.clone();
    for layer in net.conv_layers() {
        let k = &layer.kernels;
        let len = crate::nn::conv_out_len(h.length(), k.kernel_size(), layer.stride);
        let mut act = Vec::with_capacity(k.out_channels() * len);
        for m in 0..k.out_channels() {
            for i in 0..len {
                let z = if layer.binary {
                    binary_output(&h, k, m, i, layer.stride, tally)
                } else {
                    conv_output(&h, k, m, i, layer.stride, tally)
                };
                act.push(activate(z, tally));
            }
        }
        let plen = pool_out_len(len);
        let mut pooled = Vec::with_capacity(k.out_channels() * plen);
        for m in 0..k.out_channels() {
            let row = &act[m * len..(m + 1) * len];
            for j in 0..plen {
                pooled.push(pool_pair(row[2 * j], row[2 * j + 1], tally));
            }
        }
        h = Tensor1D::from_parts_unchecked(k.out_channels(), plen, pooled);
    }
    let classes = net.fc().out_classes();
    fc_scores(h.as_slice(), net.fc(), 0..classes, tally)
}
