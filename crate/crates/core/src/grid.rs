//! Dense row-major grids: the storage behind feature maps, Hough maps and
//! location maps.
//!
//! Values are `f32`; reductions that feed identities or losses accumulate in
//! `f64` at the call sites that need it.

use crate::error::{Error, Result};

/// A dense 2-D grid of `f32`, row-major (`y * width + x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Grid {
    pub fn zeros(h: usize, w: usize) -> Self {
        Grid {
            h,
            w,
            data: vec![0.0; h * w],
        }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::shape(
                format!("{h}x{w} = {} values", h * w),
                format!("{} values", data.len()),
            ));
        }
        Ok(Grid { h, w, data })
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        Grid { h, w, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        debug_assert!(y < self.h && x < self.w);
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, y: usize, x: usize) -> &mut f32 {
        debug_assert!(y < self.h && x < self.w);
        &mut self.data[y * self.w + x]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.w..(y + 1) * self.w]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Sum of all cells, accumulated in f64.
    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Maximum cell value; 0.0 for an empty grid.
    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(0.0f32, f32::max)
    }

    /// Flat index of the first cell attaining the maximum value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        let mut best_v = f32::NEG_INFINITY;
        for (i, &v) in self.data.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        best
    }
}

/// A dense channel-first 3-D tensor of `f32` (`c * h * w + y * w + x`).
///
/// Holds both spatial feature maps (channels x height x width) and Hough
/// features (channels x theta bins x r bins).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor3 {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::shape(
                format!("{c}x{h}x{w} = {} values", c * h * w),
                format!("{} values", data.len()),
            ));
        }
        Ok(Tensor3 { c, h, w, data })
    }

    /// Single-channel tensor wrapping a grid.
    pub fn from_grid(g: &Grid) -> Self {
        Tensor3 {
            c: 1,
            h: g.height(),
            w: g.width(),
            data: g.data().to_vec(),
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        debug_assert!(c < self.c && y < self.h && x < self.w);
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f32 {
        debug_assert!(c < self.c && y < self.h && x < self.w);
        &mut self.data[(c * self.h + y) * self.w + x]
    }

    /// Channel plane as a flat row-major slice.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copy of one channel as a `Grid`.
    pub fn channel_grid(&self, c: usize) -> Grid {
        Grid::from_vec(self.h, self.w, self.channel(c).to_vec()).expect("channel shape")
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Concatenate tensors along the channel axis. All spatial shapes must agree.
    pub fn concat_channels(parts: &[&Tensor3]) -> Result<Tensor3> {
        let (_, h, w) = parts
            .first()
            .ok_or_else(|| Error::InvalidConfig("concat of zero tensors".into()))?
            .shape();
        let mut data = Vec::new();
        let mut c = 0;
        for p in parts {
            if p.height() != h || p.width() != w {
                return Err(Error::shape(
                    format!("plane {h}x{w}"),
                    format!("plane {}x{}", p.height(), p.width()),
                ));
            }
            data.extend_from_slice(p.data());
            c += p.channels();
        }
        Tensor3::from_vec(c, h, w, data)
    }

    /// Inner product with another tensor of the same shape, accumulated in f64.
    pub fn dot(&self, other: &Tensor3) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_is_row_major() {
        let g = Grid::from_fn(2, 3, |y, x| (y * 3 + x) as f32);
        assert_eq!(g.at(0, 0), 0.0);
        assert_eq!(g.at(0, 2), 2.0);
        assert_eq!(g.at(1, 0), 3.0);
        assert_eq!(g.data()[5], 5.0);
    }

    #[test]
    fn tensor_channel_planes() {
        let t = Tensor3::from_vec(2, 2, 2, (0..8).map(|v| v as f32).collect()).unwrap();
        assert_eq!(t.channel(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.channel(1), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(t.at(1, 1, 0), 6.0);
    }

    #[test]
    fn concat_checks_shapes() {
        let a = Tensor3::zeros(1, 2, 2);
        let b = Tensor3::zeros(3, 2, 2);
        let c = Tensor3::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), (4, 2, 2));
        let bad = Tensor3::zeros(1, 3, 2);
        assert!(Tensor3::concat_channels(&[&a, &bad]).is_err());
    }

    #[test]
    fn from_vec_rejects_wrong_len() {
        assert!(Grid::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Tensor3::from_vec(1, 2, 2, vec![0.0; 5]).is_err());
    }
}
