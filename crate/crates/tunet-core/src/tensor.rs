//! Dense 3-axis array in (batch, channel, time) row-major order.
//!
//! The time axis is innermost so temporal convolutions sweep stride-1 memory.
//! Element precision is generic over [`Element`]: `f32` for training speed,
//! `f64` for finite-difference gradient checks.

use std::fmt;

use crate::error::{Error, Result};

/// Scalar element of every tensor in the crate. Implemented for `f32`/`f64`.
pub trait Element:
    num_traits::Float + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Number of bits in the representation (32 or 64), used in logs.
    const BITS: u32;

    fn from_f64(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Element for f32 {
    const BITS: u32 = 32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    const BITS: u32 = 64;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn into_f64(self) -> f64 {
        self
    }
}

/// Dense (batch × channels × length) array.
///
/// Flat offset of `(b, c, t)` is `((b * channels) + c) * length + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<E> {
    batch: usize,
    channels: usize,
    length: usize,
    data: Vec<E>,
}

impl<E: Element> Tensor3<E> {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Self {
            batch,
            channels,
            length,
            data: vec![E::zero(); batch * channels * length],
        }
    }

    pub fn filled(batch: usize, channels: usize, length: usize, value: E) -> Self {
        Self {
            batch,
            channels,
            length,
            data: vec![value; batch * channels * length],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, length: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != batch * channels * length {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not equal {}x{}x{}",
                data.len(),
                batch,
                channels,
                length
            )));
        }
        Ok(Self {
            batch,
            channels,
            length,
            data,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.length)
    }

    /// Total number of elements.
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize, t: usize) -> usize {
        debug_assert!(b < self.batch && c < self.channels && t < self.length);
        (b * self.channels + c) * self.length + t
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, t: usize) -> E {
        self.data[self.offset(b, c, t)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, t: usize) -> &mut E {
        let i = self.offset(b, c, t);
        &mut self.data[i]
    }

    /// Contiguous time row at (b, c); the stride-1 unit of every hot loop.
    #[inline]
    pub fn row(&self, b: usize, c: usize) -> &[E] {
        let start = self.offset(b, c, 0);
        &self.data[start..start + self.length]
    }

    #[inline]
    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [E] {
        let start = self.offset(b, c, 0);
        let len = self.length;
        &mut self.data[start..start + len]
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-wise accumulate; shapes must match.
    pub fn add_assign(&mut self, other: &Tensor3<E>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "add_assign {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: E) {
        for v in self.data.iter_mut() {
            *v = *v * factor;
        }
    }

    /// Convert element precision; `f64 -> f32` narrows.
    pub fn cast<F: Element>(&self) -> Tensor3<F> {
        Tensor3 {
            batch: self.batch,
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|v| F::from_f64(v.into_f64())).collect(),
        }
    }
}

/// Concatenate along the channel axis; `a` occupies the lower channel indices.
pub fn concat_channels<E: Element>(a: &Tensor3<E>, b: &Tensor3<E>) -> Result<Tensor3<E>> {
    if a.batch != b.batch || a.length != b.length {
        return Err(Error::ShapeMismatch(format!(
            "concat_channels: {:?} vs {:?} (batch/length must match)",
            a.shape(),
            b.shape()
        )));
    }
    let channels = a.channels + b.channels;
    let mut out = Tensor3::zeros(a.batch, channels, a.length);
    for bi in 0..a.batch {
        for c in 0..a.channels {
            out.row_mut(bi, c).copy_from_slice(a.row(bi, c));
        }
        for c in 0..b.channels {
            out.row_mut(bi, a.channels + c).copy_from_slice(b.row(bi, c));
        }
    }
    Ok(out)
}

/// Adjoint of [`concat_channels`]: slice a gradient back into the two inputs.
pub fn split_channels_grad<E: Element>(
    g: &Tensor3<E>,
    split_at: usize,
) -> Result<(Tensor3<E>, Tensor3<E>)> {
    if split_at == 0 || split_at >= g.channels {
        return Err(Error::ShapeMismatch(format!(
            "split_channels_grad: split point {} out of range for {} channels",
            split_at, g.channels
        )));
    }
    let mut left = Tensor3::zeros(g.batch, split_at, g.length);
    let mut right = Tensor3::zeros(g.batch, g.channels - split_at, g.length);
    for bi in 0..g.batch {
        for c in 0..split_at {
            left.row_mut(bi, c).copy_from_slice(g.row(bi, c));
        }
        for c in split_at..g.channels {
            right.row_mut(bi, c - split_at).copy_from_slice(g.row(bi, c));
        }
    }
    Ok((left, right))
}

/// Integer label array shaped (batch × length), one class id per time sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMatrix {
    batch: usize,
    length: usize,
    data: Vec<usize>,
}

impl LabelMatrix {
    pub fn zeros(batch: usize, length: usize) -> Self {
        Self {
            batch,
            length,
            data: vec![0; batch * length],
        }
    }

    pub fn from_vec(batch: usize, length: usize, data: Vec<usize>) -> Result<Self> {
        if data.len() != batch * length {
            return Err(Error::ShapeMismatch(format!(
                "label data length {} does not equal {}x{}",
                data.len(),
                batch,
                length
            )));
        }
        Ok(Self {
            batch,
            length,
            data,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn at(&self, b: usize, t: usize) -> usize {
        self.data[b * self.length + t]
    }

    pub fn set(&mut self, b: usize, t: usize, v: usize) {
        self.data[b * self.length + t] = v;
    }

    pub fn row(&self, b: usize) -> &[usize] {
        &self.data[b * self.length..(b + 1) * self.length]
    }

    pub fn row_mut(&mut self, b: usize) -> &mut [usize] {
        &mut self.data[b * self.length..(b + 1) * self.length]
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn indexing_law_counter_pattern() {
        // Write a counter through flat data, read back via (b, c, t).
        let (b, c, l) = (2, 3, 5);
        let data: Vec<f64> = (0..b * c * l).map(|i| i as f64).collect();
        let t = Tensor3::from_vec(b, c, l, data).unwrap();
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..l {
                    let expected = ((bi * c + ci) * l + ti) as f64;
                    assert_eq!(t.at(bi, ci, ti), expected);
                }
            }
        }
    }

    #[test]
    fn from_vec_rejects_wrong_size() {
        let r = Tensor3::<f64>::from_vec(1, 2, 3, vec![0.0; 5]);
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn concat_zeros_then_ones() {
        let a = Tensor3::<f64>::zeros(1, 1, 4);
        let b = Tensor3::<f64>::filled(1, 1, 4, 1.0);
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), (1, 2, 4));
        assert!(cat.row(0, 0).iter().all(|&v| v == 0.0));
        assert!(cat.row(0, 1).iter().all(|&v| v == 1.0));

        let (left, right) = split_channels_grad(&cat, 1).unwrap();
        assert_eq!(left, a);
        assert_eq!(right, b);
    }

    #[test]
    fn concat_paper_shapes() {
        let a = Tensor3::<f32>::zeros(1, 128, 96);
        let b = Tensor3::<f32>::zeros(1, 128, 96);
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), (1, 256, 96));
    }

    #[test]
    fn concat_index_sweep() {
        // (2x3x5) ++ (2x4x5) -> 2x7x5, checked element-for-element.
        let a_data: Vec<f64> = (0..2 * 3 * 5).map(|i| i as f64).collect();
        let b_data: Vec<f64> = (0..2 * 4 * 5).map(|i| 1000.0 + i as f64).collect();
        let a = Tensor3::from_vec(2, 3, 5, a_data).unwrap();
        let b = Tensor3::from_vec(2, 4, 5, b_data).unwrap();
        let cat = concat_channels(&a, &b).unwrap();
        assert_eq!(cat.shape(), (2, 7, 5));
        for bi in 0..2 {
            for c in 0..7 {
                for t in 0..5 {
                    let expected = if c < 3 {
                        a.at(bi, c, t)
                    } else {
                        b.at(bi, c - 3, t)
                    };
                    assert_eq!(cat.at(bi, c, t), expected);
                }
            }
        }
    }

    #[test]
    fn concat_rejects_mismatched_shapes() {
        let a = Tensor3::<f64>::zeros(1, 2, 4);
        let b = Tensor3::<f64>::zeros(2, 2, 4);
        assert!(concat_channels(&a, &b).is_err());
        let c = Tensor3::<f64>::zeros(1, 2, 5);
        assert!(concat_channels(&a, &c).is_err());
    }

    #[test]
    fn split_rejects_out_of_range() {
        let g = Tensor3::<f64>::zeros(1, 4, 3);
        assert!(split_channels_grad(&g, 0).is_err());
        assert!(split_channels_grad(&g, 4).is_err());
        assert!(split_channels_grad(&g, 2).is_ok());
    }

    #[test]
    fn split_example_1x7x5() {
        let g_data: Vec<f64> = (0..35).map(|i| i as f64).collect();
        let g = Tensor3::from_vec(1, 7, 5, g_data).unwrap();
        let (l, r) = split_channels_grad(&g, 3).unwrap();
        assert_eq!(l.shape(), (1, 3, 5));
        assert_eq!(r.shape(), (1, 4, 5));
    }

    proptest! {
        #[test]
        fn concat_split_round_trip(
            batch in 1usize..3,
            ca in 1usize..5,
            cb in 1usize..5,
            length in 1usize..9,
            seed in 0u64..1000,
        ) {
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let a_data: Vec<f64> = (0..batch * ca * length).map(|_| next()).collect();
            let b_data: Vec<f64> = (0..batch * cb * length).map(|_| next()).collect();
            let a = Tensor3::from_vec(batch, ca, length, a_data).unwrap();
            let b = Tensor3::from_vec(batch, cb, length, b_data).unwrap();
            let cat = concat_channels(&a, &b).unwrap();
            let (la, rb) = split_channels_grad(&cat, ca).unwrap();
            prop_assert_eq!(la, a);
            prop_assert_eq!(rb, b);
        }
    }
}
