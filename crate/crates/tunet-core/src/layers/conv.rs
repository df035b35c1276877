//! Temporal convolution and transposed convolution with exact backward passes.
//!
//! Weight layout: conv `(out_channels, in_channels, kernel)`, deconv
//! `(in_channels, out_channels, kernel)`, both stored as [`Tensor3`].
//!
//! Per output element the forward sum runs bias-first, then input channels
//! outer, kernel taps inner. Tests compare against a naive oracle with the
//! same accumulation order, so keep that order when touching the kernels.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor3};

/// Zero-pad the time axis by `padding` samples at each end.
fn pad_time<E: Element>(x: &Tensor3<E>, padding: usize) -> Tensor3<E> {
    if padding == 0 {
        return x.clone();
    }
    let (b, c, l) = x.shape();
    let mut out = Tensor3::zeros(b, c, l + 2 * padding);
    for bi in 0..b {
        for ci in 0..c {
            out.row_mut(bi, ci)[padding..padding + l].copy_from_slice(x.row(bi, ci));
        }
    }
    out
}

/// Drop `padding` samples from each end of the time axis.
fn unpad_time<E: Element>(x: &Tensor3<E>, padding: usize) -> Tensor3<E> {
    if padding == 0 {
        return x.clone();
    }
    let (b, c, l) = x.shape();
    let inner = l - 2 * padding;
    let mut out = Tensor3::zeros(b, c, inner);
    for bi in 0..b {
        for ci in 0..c {
            out.row_mut(bi, ci)
                .copy_from_slice(&x.row(bi, ci)[padding..padding + inner]);
        }
    }
    out
}

/// Dot product with a fixed 8-lane accumulation order.
fn dot8<E: Element>(a: &[E], b: &[E]) -> E {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [E::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let i = 8 * c;
        for j in 0..8 {
            acc[j] = acc[j] + a[i + j] * b[i + j];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for i in 8 * chunks..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

/// `out[t] += w * x[t]` over equal-length slices.
fn axpy<E: Element>(out: &mut [E], w: E, x: &[E]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o = *o + w * *v;
    }
}

/// The three shifted-tap dot products (sum_t g[t] * x[t + k] for k = 0..3)
/// in one sweep. `x` must be exactly two longer than `g`. Fixed-size chunks
/// keep the lanes free of bounds checks so they vectorize.
fn tap3_dots<E: Element>(g: &[E], x: &[E]) -> (E, E, E) {
    debug_assert_eq!(x.len(), g.len() + 2);
    let n = g.len();
    let mut a0 = [E::zero(); 4];
    let mut a1 = [E::zero(); 4];
    let mut a2 = [E::zero(); 4];
    let g_it = g.chunks_exact(4);
    let x0_it = x[..n].chunks_exact(4);
    let x1_it = x[1..n + 1].chunks_exact(4);
    let x2_it = x[2..n + 2].chunks_exact(4);
    for (((gc, x0), x1), x2) in g_it.zip(x0_it).zip(x1_it).zip(x2_it) {
        for j in 0..4 {
            a0[j] = a0[j] + gc[j] * x0[j];
            a1[j] = a1[j] + gc[j] * x1[j];
            a2[j] = a2[j] + gc[j] * x2[j];
        }
    }
    let fold = |a: [E; 4]| (a[0] + a[1]) + (a[2] + a[3]);
    let mut s0 = fold(a0);
    let mut s1 = fold(a1);
    let mut s2 = fold(a2);
    for t in 4 * (n / 4)..n {
        s0 = s0 + g[t] * x[t];
        s1 = s1 + g[t] * x[t + 1];
        s2 = s2 + g[t] * x[t + 2];
    }
    (s0, s1, s2)
}

/// Trainable parameters of one temporal convolution.
#[derive(Clone, Debug)]
pub struct Conv1dParams<E> {
    /// (out_channels, in_channels, kernel_size)
    pub weights: Tensor3<E>,
    pub bias: Vec<E>,
    pub stride: usize,
    pub padding: usize,
}

impl<E: Element> Conv1dParams<E> {
    pub fn zeros(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            weights: Tensor3::zeros(out_channels, in_channels, kernel_size),
            bias: vec![E::zero(); out_channels],
            stride,
            padding,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.batch()
    }

    pub fn in_channels(&self) -> usize {
        self.weights.channels()
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.length()
    }

    pub fn forward(&self, x: Tensor3<E>) -> Result<(Tensor3<E>, Conv1dCache<E>)> {
        conv1d_forward(x, &self.weights, &self.bias, self.stride, self.padding)
    }

    pub fn backward(
        &self,
        grad_out: &Tensor3<E>,
        cache: &Conv1dCache<E>,
    ) -> Result<(Tensor3<E>, Tensor3<E>, Vec<E>)> {
        conv1d_backward(grad_out, cache, &self.weights, self.stride, self.padding)
    }
}

/// Backward-pass state for one convolution: the padded input.
#[derive(Clone, Debug)]
pub struct Conv1dCache<E> {
    padded: Tensor3<E>,
    in_len: usize,
    out_len: usize,
}

impl<E: Element> Conv1dCache<E> {
    pub fn out_len(&self) -> usize {
        self.out_len
    }
}

fn conv_out_len(l_in: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let span = l_in + 2 * padding;
    if kernel == 0 || stride == 0 {
        return Err(Error::InvalidConfig(
            "conv kernel and stride must be >= 1".into(),
        ));
    }
    if span < kernel || !(span - kernel).is_multiple_of(stride) {
        return Err(Error::ShapeMismatch(format!(
            "conv output length not exact: (L_in {} + 2*pad {} - kernel {}) not divisible by stride {}",
            l_in, padding, kernel, stride
        )));
    }
    Ok((span - kernel) / stride + 1)
}

/// out(b,o,t) = bias(o) + sum_{i,k} w(o,i,k) * x_padded(b,i,t*stride+k)
pub fn conv1d_forward<E: Element>(
    x: Tensor3<E>,
    weights: &Tensor3<E>,
    bias: &[E],
    stride: usize,
    padding: usize,
) -> Result<(Tensor3<E>, Conv1dCache<E>)> {
    let (out_c, in_c, kernel) = weights.shape();
    if x.channels() != in_c {
        return Err(Error::ShapeMismatch(format!(
            "conv input has {} channels, weights expect {}",
            x.channels(),
            in_c
        )));
    }
    if bias.len() != out_c {
        return Err(Error::ShapeMismatch(format!(
            "conv bias length {} does not match {} output channels",
            bias.len(),
            out_c
        )));
    }
    let in_len = x.length();
    let out_len = conv_out_len(in_len, kernel, stride, padding)?;
    let batch = x.batch();
    let padded = pad_time(&x, padding);
    let mut out = Tensor3::zeros(batch, out_c, out_len);

    for b in 0..batch {
        for o in 0..out_c {
            out.row_mut(b, o).fill(bias[o]);
            if stride == 1 && kernel == 3 {
                // Fast path: two input channels per sweep. The adds chain
                // left to right, so each output element still accumulates in
                // exact (i, k) order and stays bit-identical to the naive
                // quadruple loop.
                let mut i = 0;
                while i + 2 <= in_c {
                    let xa = padded.row(b, i);
                    let xb = padded.row(b, i + 1);
                    let wa0 = weights.at(o, i, 0);
                    let wa1 = weights.at(o, i, 1);
                    let wa2 = weights.at(o, i, 2);
                    let wb0 = weights.at(o, i + 1, 0);
                    let wb1 = weights.at(o, i + 1, 1);
                    let wb2 = weights.at(o, i + 1, 2);
                    let orow = out.row_mut(b, o);
                    for t in 0..out_len {
                        orow[t] = orow[t]
                            + wa0 * xa[t]
                            + wa1 * xa[t + 1]
                            + wa2 * xa[t + 2]
                            + wb0 * xb[t]
                            + wb1 * xb[t + 1]
                            + wb2 * xb[t + 2];
                    }
                    i += 2;
                }
                if i < in_c {
                    let xr = padded.row(b, i);
                    let w0 = weights.at(o, i, 0);
                    let w1 = weights.at(o, i, 1);
                    let w2 = weights.at(o, i, 2);
                    let orow = out.row_mut(b, o);
                    for t in 0..out_len {
                        orow[t] = orow[t] + w0 * xr[t] + w1 * xr[t + 1] + w2 * xr[t + 2];
                    }
                }
                continue;
            }
            for i in 0..in_c {
                let xr = padded.row(b, i);
                let orow = out.row_mut(b, o);
                if stride == 1 && kernel == 1 {
                    axpy(orow, weights.at(o, i, 0), &xr[0..out_len]);
                } else if stride == 1 {
                    for t in 0..out_len {
                        let mut acc = orow[t];
                        for k in 0..kernel {
                            acc = acc + weights.at(o, i, k) * xr[t + k];
                        }
                        orow[t] = acc;
                    }
                } else {
                    for t in 0..out_len {
                        let mut acc = orow[t];
                        let base = t * stride;
                        for k in 0..kernel {
                            acc = acc + weights.at(o, i, k) * xr[base + k];
                        }
                        orow[t] = acc;
                    }
                }
            }
        }
    }

    Ok((
        out,
        Conv1dCache {
            padded,
            in_len,
            out_len,
        },
    ))
}

/// Exact partials of `sum(grad_out * out)` w.r.t. input, weights, and bias.
pub fn conv1d_backward<E: Element>(
    grad_out: &Tensor3<E>,
    cache: &Conv1dCache<E>,
    weights: &Tensor3<E>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor3<E>, Tensor3<E>, Vec<E>)> {
    let (out_c, in_c, kernel) = weights.shape();
    let batch = cache.padded.batch();
    if grad_out.shape() != (batch, out_c, cache.out_len) {
        return Err(Error::ShapeMismatch(format!(
            "conv backward: grad_out {:?} does not match cached output ({}, {}, {})",
            grad_out.shape(),
            batch,
            out_c,
            cache.out_len
        )));
    }
    if cache.padded.channels() != in_c {
        return Err(Error::ShapeMismatch(
            "conv backward: cache does not match weights".into(),
        ));
    }
    let out_len = cache.out_len;

    let mut grad_b = vec![E::zero(); out_c];
    for o in 0..out_c {
        let mut acc = E::zero();
        for b in 0..batch {
            for &g in grad_out.row(b, o) {
                acc = acc + g;
            }
        }
        grad_b[o] = acc;
    }

    // Batch outermost so one item's rows stay cache-resident across the
    // whole (o, i) sweep.
    let mut grad_w = Tensor3::zeros(out_c, in_c, kernel);
    for b in 0..batch {
        for o in 0..out_c {
            let gr = grad_out.row(b, o);
            for i in 0..in_c {
                let xr = cache.padded.row(b, i);
                if stride == 1 && kernel == 3 {
                    let (s0, s1, s2) = tap3_dots(&gr[..out_len], &xr[..out_len + 2]);
                    let base = grad_w.offset(o, i, 0);
                    let gw = grad_w.data_mut();
                    gw[base] = gw[base] + s0;
                    gw[base + 1] = gw[base + 1] + s1;
                    gw[base + 2] = gw[base + 2] + s2;
                } else {
                    for k in 0..kernel {
                        let acc = if stride == 1 {
                            dot8(gr, &xr[k..k + out_len])
                        } else {
                            let mut acc = E::zero();
                            for t in 0..out_len {
                                acc = acc + gr[t] * xr[t * stride + k];
                            }
                            acc
                        };
                        *grad_w.at_mut(o, i, k) = grad_w.at(o, i, k) + acc;
                    }
                }
            }
        }
    }

    let plen = cache.padded.length();
    let mut grad_padded = Tensor3::zeros(batch, in_c, plen);
    for b in 0..batch {
        if stride == 1 && kernel == 3 && out_len >= 4 {
            // grad_padded(u) += sum_k w(o,i,k) * grad_out(u - k): a fused
            // correlation sweep, two output channels at a time. Equal-length
            // pre-sliced windows keep the interior loop check-free.
            let n_int = out_len - 2;
            for i in 0..in_c {
                let mut o = 0;
                while o + 2 <= out_c {
                    let ga = grad_out.row(b, o);
                    let gb = grad_out.row(b, o + 1);
                    let wa = [weights.at(o, i, 0), weights.at(o, i, 1), weights.at(o, i, 2)];
                    let wb = [
                        weights.at(o + 1, i, 0),
                        weights.at(o + 1, i, 1),
                        weights.at(o + 1, i, 2),
                    ];
                    let gxr = grad_padded.row_mut(b, i);
                    {
                        let gx_int = &mut gxr[2..out_len];
                        let (ga2, ga1, ga0) = (&ga[2..out_len], &ga[1..out_len - 1], &ga[..n_int]);
                        let (gb2, gb1, gb0) = (&gb[2..out_len], &gb[1..out_len - 1], &gb[..n_int]);
                        for t in 0..n_int {
                            gx_int[t] = gx_int[t]
                                + wa[0] * ga2[t]
                                + wa[1] * ga1[t]
                                + wa[2] * ga0[t]
                                + wb[0] * gb2[t]
                                + wb[1] * gb1[t]
                                + wb[2] * gb0[t];
                        }
                    }
                    for u in (0..2).chain(out_len..plen) {
                        let mut v = gxr[u];
                        for k in 0..3 {
                            if u >= k && u - k < out_len {
                                v = v + wa[k] * ga[u - k] + wb[k] * gb[u - k];
                            }
                        }
                        gxr[u] = v;
                    }
                    o += 2;
                }
                if o < out_c {
                    let ga = grad_out.row(b, o);
                    let wa = [weights.at(o, i, 0), weights.at(o, i, 1), weights.at(o, i, 2)];
                    let gxr = grad_padded.row_mut(b, i);
                    {
                        let gx_int = &mut gxr[2..out_len];
                        let (ga2, ga1, ga0) = (&ga[2..out_len], &ga[1..out_len - 1], &ga[..n_int]);
                        for t in 0..n_int {
                            gx_int[t] =
                                gx_int[t] + wa[0] * ga2[t] + wa[1] * ga1[t] + wa[2] * ga0[t];
                        }
                    }
                    for u in (0..2).chain(out_len..plen) {
                        let mut v = gxr[u];
                        for k in 0..3 {
                            if u >= k && u - k < out_len {
                                v = v + wa[k] * ga[u - k];
                            }
                        }
                        gxr[u] = v;
                    }
                }
            }
        } else {
            for o in 0..out_c {
                for i in 0..in_c {
                    let gxr = grad_padded.row_mut(b, i);
                    for k in 0..kernel {
                        let w = weights.at(o, i, k);
                        if stride == 1 {
                            let gr = grad_out.row(b, o);
                            for (gx, g) in gxr[k..k + out_len].iter_mut().zip(gr) {
                                *gx = *gx + w * *g;
                            }
                        } else {
                            let gr = grad_out.row(b, o);
                            for t in 0..out_len {
                                gxr[t * stride + k] = gxr[t * stride + k] + w * gr[t];
                            }
                        }
                    }
                }
            }
        }
    }
    let grad_x = unpad_time(&grad_padded, padding);
    debug_assert_eq!(grad_x.length(), cache.in_len);

    Ok((grad_x, grad_w, grad_b))
}

/// Trainable parameters of one temporal transposed convolution.
#[derive(Clone, Debug)]
pub struct Deconv1dParams<E> {
    /// (in_channels, out_channels, kernel_size)
    pub weights: Tensor3<E>,
    pub bias: Vec<E>,
    pub stride: usize,
}

impl<E: Element> Deconv1dParams<E> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize) -> Self {
        Self {
            weights: Tensor3::zeros(in_channels, out_channels, kernel_size),
            bias: vec![E::zero(); out_channels],
            stride,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weights.batch()
    }

    pub fn out_channels(&self) -> usize {
        self.weights.channels()
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.length()
    }

    pub fn forward(&self, x: Tensor3<E>) -> Result<(Tensor3<E>, Deconv1dCache<E>)> {
        deconv1d_forward(x, &self.weights, &self.bias, self.stride)
    }

    pub fn backward(
        &self,
        grad_out: &Tensor3<E>,
        cache: &Deconv1dCache<E>,
    ) -> Result<(Tensor3<E>, Tensor3<E>, Vec<E>)> {
        deconv1d_backward(grad_out, cache, &self.weights, self.stride)
    }
}

/// Backward-pass state for one transposed convolution: the input.
#[derive(Clone, Debug)]
pub struct Deconv1dCache<E> {
    input: Tensor3<E>,
}

/// out(b,o,s*stride+k) += w(i,o,k) * x(b,i,s); L_out = (L_in - 1)*stride + kernel.
pub fn deconv1d_forward<E: Element>(
    x: Tensor3<E>,
    weights: &Tensor3<E>,
    bias: &[E],
    stride: usize,
) -> Result<(Tensor3<E>, Deconv1dCache<E>)> {
    let (in_c, out_c, kernel) = weights.shape();
    if x.channels() != in_c {
        return Err(Error::ShapeMismatch(format!(
            "deconv input has {} channels, weights expect {}",
            x.channels(),
            in_c
        )));
    }
    if bias.len() != out_c {
        return Err(Error::ShapeMismatch(format!(
            "deconv bias length {} does not match {} output channels",
            bias.len(),
            out_c
        )));
    }
    if stride == 0 || kernel == 0 || x.length() == 0 {
        return Err(Error::InvalidConfig(
            "deconv kernel, stride, and input length must be >= 1".into(),
        ));
    }
    let batch = x.batch();
    let in_len = x.length();
    let out_len = (in_len - 1) * stride + kernel;
    let mut out = Tensor3::zeros(batch, out_c, out_len);

    for b in 0..batch {
        for o in 0..out_c {
            out.row_mut(b, o).fill(bias[o]);
            for i in 0..in_c {
                let xr = x.row(b, i);
                let orow = out.row_mut(b, o);
                if stride == 2 && kernel == 2 {
                    let w0 = weights.at(i, o, 0);
                    let w1 = weights.at(i, o, 1);
                    for (och, &xv) in orow.chunks_exact_mut(2).zip(xr) {
                        och[0] = och[0] + w0 * xv;
                        och[1] = och[1] + w1 * xv;
                    }
                } else {
                    for k in 0..kernel {
                        let w = weights.at(i, o, k);
                        for (s, &xv) in xr.iter().enumerate() {
                            let t = s * stride + k;
                            orow[t] = orow[t] + w * xv;
                        }
                    }
                }
            }
        }
    }

    Ok((out, Deconv1dCache { input: x }))
}

/// Exact partials for the transposed convolution.
pub fn deconv1d_backward<E: Element>(
    grad_out: &Tensor3<E>,
    cache: &Deconv1dCache<E>,
    weights: &Tensor3<E>,
    stride: usize,
) -> Result<(Tensor3<E>, Tensor3<E>, Vec<E>)> {
    let (in_c, out_c, kernel) = weights.shape();
    let x = &cache.input;
    let batch = x.batch();
    let in_len = x.length();
    let out_len = (in_len - 1) * stride + kernel;
    if grad_out.shape() != (batch, out_c, out_len) {
        return Err(Error::ShapeMismatch(format!(
            "deconv backward: grad_out {:?} does not match cached output ({}, {}, {})",
            grad_out.shape(),
            batch,
            out_c,
            out_len
        )));
    }
    if x.channels() != in_c {
        return Err(Error::ShapeMismatch(
            "deconv backward: cache does not match weights".into(),
        ));
    }

    let mut grad_b = vec![E::zero(); out_c];
    for o in 0..out_c {
        let mut acc = E::zero();
        for b in 0..batch {
            for &g in grad_out.row(b, o) {
                acc = acc + g;
            }
        }
        grad_b[o] = acc;
    }

    let mut grad_w = Tensor3::zeros(in_c, out_c, kernel);
    for i in 0..in_c {
        for o in 0..out_c {
            for k in 0..kernel {
                let mut acc = E::zero();
                for b in 0..batch {
                    let xr = x.row(b, i);
                    let gr = grad_out.row(b, o);
                    for (s, &xv) in xr.iter().enumerate() {
                        acc = acc + xv * gr[s * stride + k];
                    }
                }
                *grad_w.at_mut(i, o, k) = acc;
            }
        }
    }

    // grad_x(b,i,s) = sum_{o,k} w(i,o,k) * grad_out(b,o,s*stride+k): the
    // gather dual of the forward scatter.
    let mut grad_x = Tensor3::zeros(batch, in_c, in_len);
    for b in 0..batch {
        for i in 0..in_c {
            let gxr = grad_x.row_mut(b, i);
            for o in 0..out_c {
                let gr = grad_out.row(b, o);
                if stride == 2 && kernel == 2 {
                    let w0 = weights.at(i, o, 0);
                    let w1 = weights.at(i, o, 1);
                    for (gxv, gch) in gxr.iter_mut().zip(gr.chunks_exact(2)) {
                        *gxv = *gxv + w0 * gch[0] + w1 * gch[1];
                    }
                } else {
                    for k in 0..kernel {
                        let w = weights.at(i, o, k);
                        for (s, gxv) in gxr.iter_mut().enumerate() {
                            *gxv = *gxv + w * gr[s * stride + k];
                        }
                    }
                }
            }
        }
    }

    Ok((grad_x, grad_w, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{naive_conv1d, rng, uniform_tensor};

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor3::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let (out, _) = conv1d_forward(x, &w, &[0.0], 1, 0).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn box_kernel_sums_neighbours() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor3::from_vec(1, 1, 2, vec![1.0, 1.0]).unwrap();
        let (out, _) = conv1d_forward(x, &w, &[0.0], 1, 0).unwrap();
        assert_eq!(out.shape(), (1, 1, 3));
        assert_eq!(out.data(), &[3.0, 5.0, 7.0]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut r = rng(11);
        let x = uniform_tensor::<f64>(&mut r, 2, 3, 16);
        let w = uniform_tensor::<f64>(&mut r, 4, 3, 3);
        let bias: Vec<f64> = (0..4).map(|i| 0.1 * i as f64).collect();
        let (out, _) = conv1d_forward(x.clone(), &w, &bias, 1, 1).unwrap();
        assert_eq!(out.shape(), (2, 4, 16));
        let oracle = naive_conv1d(&x, &w, &bias, 1, 1);
        assert_eq!(out.data(), oracle.data());
    }

    #[test]
    fn forward_rejects_channel_mismatch() {
        let x = Tensor3::<f64>::zeros(1, 2, 8);
        let w = Tensor3::<f64>::zeros(4, 3, 3);
        assert!(matches!(
            conv1d_forward(x, &w, &[0.0; 4], 1, 1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn forward_rejects_non_exact_length() {
        // (5 + 0 - 2) % 2 != 0
        let x = Tensor3::<f64>::zeros(1, 1, 5);
        let w = Tensor3::<f64>::zeros(1, 1, 2);
        assert!(conv1d_forward(x, &w, &[0.0], 2, 0).is_err());
    }

    #[test]
    fn bias_gradient_is_sum_of_grad_out() {
        let x = Tensor3::from_vec(1, 1, 3, vec![0.5f64, -1.0, 2.0]).unwrap();
        let w = Tensor3::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let (_, cache) = conv1d_forward(x, &w, &[0.0], 1, 0).unwrap();
        let gout = Tensor3::filled(1, 1, 3, 1.0);
        let (_, _, gb) = conv1d_backward(&gout, &cache, &w, 1, 0).unwrap();
        assert_eq!(gb, vec![3.0]);
    }

    #[test]
    fn identity_kernel_backward_passes_grad_through() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor3::from_vec(1, 1, 1, vec![1.0]).unwrap();
        let (_, cache) = conv1d_forward(x, &w, &[0.0], 1, 0).unwrap();
        let gout = Tensor3::from_vec(1, 1, 4, vec![0.1f64, -0.2, 0.3, 0.7]).unwrap();
        let (gx, _, _) = conv1d_backward(&gout, &cache, &w, 1, 0).unwrap();
        assert_eq!(gx.data(), gout.data());
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let x = Tensor3::<f64>::zeros(1, 1, 4);
        let w = Tensor3::<f64>::zeros(1, 1, 3);
        let (_, cache) = conv1d_forward(x, &w, &[0.0], 1, 1).unwrap();
        let bad = Tensor3::<f64>::zeros(1, 1, 5);
        assert!(conv1d_backward(&bad, &cache, &w, 1, 1).is_err());
    }

    #[test]
    fn deconv_upsamples_paper_shapes() {
        let x = Tensor3::<f32>::zeros(1, 256, 48);
        let w = Tensor3::<f32>::zeros(256, 128, 2);
        let (out, _) = deconv1d_forward(x, &w, &vec![0.0; 128], 2).unwrap();
        assert_eq!(out.shape(), (1, 128, 96));
    }

    #[test]
    fn deconv_scatter_example() {
        let x = Tensor3::from_vec(1, 1, 3, vec![1.0f64, 2.0, 3.0]).unwrap();
        let w = Tensor3::from_vec(1, 1, 2, vec![1.0, 1.0]).unwrap();
        let (out, _) = deconv1d_forward(x, &w, &[0.0], 2).unwrap();
        assert_eq!(out.data(), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn deconv_rejects_channel_mismatch() {
        let x = Tensor3::<f64>::zeros(1, 3, 4);
        let w = Tensor3::<f64>::zeros(2, 5, 2);
        assert!(deconv1d_forward(x, &w, &[0.0; 5], 2).is_err());
    }

    /// <conv(x), y> == <x, deconv(y)> for the same raw weight buffer: the
    /// (out,in,k) conv weights reread as (in,out,k) deconv weights.
    #[test]
    fn deconv_is_adjoint_of_conv() {
        let mut r = rng(7);
        for _ in 0..10 {
            let x = uniform_tensor::<f64>(&mut r, 2, 3, 12);
            let w = uniform_tensor::<f64>(&mut r, 4, 3, 2);
            let zero4 = vec![0.0; 4];
            let zero3 = vec![0.0; 3];
            let (cx, _) = conv1d_forward(x.clone(), &w, &zero4, 2, 0).unwrap();
            let y = uniform_tensor::<f64>(&mut r, 2, 4, cx.length());
            // w as deconv weights: in=4, out=3, same flat data.
            let wt = Tensor3::from_vec(4, 3, 2, w.data().to_vec()).unwrap();
            let (dy, _) = deconv1d_forward(y.clone(), &wt, &zero3, 2).unwrap();
            let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
            let scale = lhs.abs().max(rhs.abs()).max(1e-12);
            assert!(
                ((lhs - rhs) / scale).abs() <= 1e-10,
                "adjoint identity violated: {} vs {}",
                lhs,
                rhs
            );
        }
    }

    /// deconv grad_x equals conv1d_forward applied to grad_out with the same
    /// weights, element for element.
    #[test]
    fn deconv_grad_x_matches_conv_forward() {
        let mut r = rng(21);
        let x = uniform_tensor::<f64>(&mut r, 1, 3, 6);
        let w = uniform_tensor::<f64>(&mut r, 3, 2, 2); // deconv: in=3, out=2
        let bias = vec![0.0; 2];
        let (out, cache) = deconv1d_forward(x, &w, &bias, 2).unwrap();
        let gout = uniform_tensor::<f64>(&mut r, 1, 2, out.length());
        let (gx, _, _) = deconv1d_backward(&gout, &cache, &w, 2).unwrap();

        // Same buffer as conv weights: out=3, in=2.
        let wc = Tensor3::from_vec(3, 2, 2, w.data().to_vec()).unwrap();
        let (conv_route, _) = conv1d_forward(gout, &wc, &[0.0; 3], 2, 0).unwrap();
        for (a, b) in gx.data().iter().zip(conv_route.data()) {
            assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }

    #[test]
    fn deconv_bias_gradient_is_sum() {
        let x = Tensor3::from_vec(1, 1, 2, vec![1.0f64, -2.0]).unwrap();
        let w = Tensor3::from_vec(1, 1, 2, vec![0.3, 0.7]).unwrap();
        let (out, cache) = deconv1d_forward(x, &w, &[0.0], 2).unwrap();
        let gout = Tensor3::filled(1, 1, out.length(), 1.0);
        let (_, _, gb) = deconv1d_backward(&gout, &cache, &w, 2).unwrap();
        assert_eq!(gb, vec![4.0]);
    }
}
