//! Temporal max pooling with argmax routing for the backward pass.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor3};

/// Records which input time index won each pooling window.
#[derive(Clone, Debug)]
pub struct PoolCache {
    batch: usize,
    channels: usize,
    in_len: usize,
    out_len: usize,
    argmax: Vec<usize>,
}

impl PoolCache {
    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// out(b,c,t) = max over the window starting at t*stride; ties break to the
/// smallest time index so gradients are deterministic.
pub fn maxpool1d_forward<E: Element>(
    x: &Tensor3<E>,
    kernel: usize,
    stride: usize,
) -> Result<(Tensor3<E>, PoolCache)> {
    if kernel == 0 || stride == 0 {
        return Err(Error::InvalidConfig(
            "pool kernel and stride must be >= 1".into(),
        ));
    }
    let (batch, channels, in_len) = x.shape();
    if in_len < kernel || !(in_len - kernel).is_multiple_of(stride) {
        return Err(Error::ShapeMismatch(format!(
            "pool windows not exact: (L_in {} - kernel {}) not divisible by stride {}",
            in_len, kernel, stride
        )));
    }
    let out_len = (in_len - kernel) / stride + 1;
    let mut out = Tensor3::zeros(batch, channels, out_len);
    let mut argmax = vec![0usize; batch * channels * out_len];

    for b in 0..batch {
        for c in 0..channels {
            let xr = x.row(b, c);
            let orow = out.row_mut(b, c);
            let arow = &mut argmax[(b * channels + c) * out_len..(b * channels + c + 1) * out_len];
            for t in 0..out_len {
                let start = t * stride;
                let mut best = xr[start];
                let mut best_idx = start;
                for (j, &v) in xr[start..start + kernel].iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        best_idx = start + j;
                    }
                }
                orow[t] = best;
                arow[t] = best_idx;
            }
        }
    }

    Ok((
        out,
        PoolCache {
            batch,
            channels,
            in_len,
            out_len,
            argmax,
        },
    ))
}

/// Routes each grad_out element to its recorded argmax position.
pub fn maxpool1d_backward<E: Element>(
    grad_out: &Tensor3<E>,
    cache: &PoolCache,
) -> Result<Tensor3<E>> {
    if grad_out.shape() != (cache.batch, cache.channels, cache.out_len) {
        return Err(Error::ShapeMismatch(format!(
            "pool backward: grad_out {:?} does not match cached output ({}, {}, {})",
            grad_out.shape(),
            cache.batch,
            cache.channels,
            cache.out_len
        )));
    }
    let mut grad_x = Tensor3::zeros(cache.batch, cache.channels, cache.in_len);
    for b in 0..cache.batch {
        for c in 0..cache.channels {
            let gr = grad_out.row(b, c);
            let arow =
                &cache.argmax[(b * cache.channels + c) * cache.out_len..(b * cache.channels + c + 1) * cache.out_len];
            let gxr = grad_x.row_mut(b, c);
            for (t, &g) in gr.iter().enumerate() {
                gxr[arow[t]] = gxr[arow[t]] + g;
            }
        }
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0f64, 3.0, 2.0, 4.0]).unwrap();
        let (out, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0]);
        assert_eq!(cache.argmax(), &[1, 3]);
    }

    #[test]
    fn halves_length_96_to_48() {
        let x = Tensor3::<f32>::zeros(1, 128, 96);
        let (out, _) = maxpool1d_forward(&x, 2, 2).unwrap();
        assert_eq!(out.shape(), (1, 128, 48));
    }

    #[test]
    fn ties_break_to_window_start() {
        let x = Tensor3::filled(1, 1, 6, 5.0f64);
        let (out, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        assert!(out.data().iter().all(|&v| v == 5.0));
        assert_eq!(cache.argmax(), &[0, 2, 4]);
    }

    #[test]
    fn rejects_non_exact_windows() {
        let x = Tensor3::<f64>::zeros(1, 1, 5);
        assert!(maxpool1d_forward(&x, 2, 2).is_err());
    }

    #[test]
    fn backward_routes_to_argmax() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0f64, 3.0, 2.0, 4.0]).unwrap();
        let (_, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        let gout = Tensor3::filled(1, 1, 2, 1.0);
        let gx = maxpool1d_backward(&gout, &cache).unwrap();
        assert_eq!(gx.data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn backward_conserves_mass() {
        let x = Tensor3::from_vec(
            2,
            2,
            8,
            (0..32).map(|i| ((i * 37) % 11) as f64).collect(),
        )
        .unwrap();
        let (out, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        let gout = Tensor3::from_vec(
            2,
            2,
            out.length(),
            (0..2 * 2 * out.length()).map(|i| 0.1 * i as f64).collect(),
        )
        .unwrap();
        let gx = maxpool1d_backward(&gout, &cache).unwrap();
        let sum_in: f64 = gx.data().iter().sum();
        let sum_out: f64 = gout.data().iter().sum();
        assert!((sum_in - sum_out).abs() < 1e-12);
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let x = Tensor3::<f64>::zeros(1, 1, 4);
        let (_, cache) = maxpool1d_forward(&x, 2, 2).unwrap();
        let bad = Tensor3::<f64>::zeros(1, 1, 3);
        assert!(maxpool1d_backward(&bad, &cache).is_err());
    }
}
