//! Shared helpers for unit tests: seeded tensors and independent oracles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Element, Tensor3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    crate::rng::seeded(seed)
}

/// Uniform values in [-1, 1).
pub fn uniform_tensor<E: Element>(
    rng: &mut ChaCha8Rng,
    batch: usize,
    channels: usize,
    length: usize,
) -> Tensor3<E> {
    let data: Vec<E> = (0..batch * channels * length)
        .map(|_| E::from_f64(rng.gen_range(-1.0..1.0)))
        .collect();
    Tensor3::from_vec(batch, channels, length, data).unwrap()
}

/// Naive direct convolution: quadruple loop, bias first, input channels
/// outer, kernel taps inner — the reference the fast path must match
/// bit-for-bit.
pub fn naive_conv1d<E: Element>(
    x: &Tensor3<E>,
    weights: &Tensor3<E>,
    bias: &[E],
    stride: usize,
    padding: usize,
) -> Tensor3<E> {
    let (out_c, in_c, kernel) = weights.shape();
    let (batch, _, in_len) = x.shape();
    let span = in_len + 2 * padding;
    let out_len = (span - kernel) / stride + 1;
    let mut out = Tensor3::zeros(batch, out_c, out_len);
    for b in 0..batch {
        for o in 0..out_c {
            for t in 0..out_len {
                let mut acc = bias[o];
                for i in 0..in_c {
                    for k in 0..kernel {
                        let pos = t * stride + k;
                        let v = if pos < padding || pos >= padding + in_len {
                            E::zero()
                        } else {
                            x.at(b, i, pos - padding)
                        };
                        acc = acc + weights.at(o, i, k) * v;
                    }
                }
                *out.at_mut(b, o, t) = acc;
            }
        }
    }
    out
}
