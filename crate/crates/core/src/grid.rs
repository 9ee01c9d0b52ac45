//! Dense row-major grid containers shared by every layer.
//!
//! Two containers cover all the data the layers move around: [`ScalarGrid`]
//! for intensities, depths and residuals, and [`VectorGrid`] for anything
//! with per-pixel channels (sampling grids, flow fields, per-pixel parameter
//! maps). Storage is always 64-bit floats, row-major, indexed `(row, col)`
//! with the image-plane convention x = column, y = row and the origin at the
//! center of pixel (0, 0).
//!
//! Grids are treated as immutable by every layer operation; mutation happens
//! only while a single owner is building one.

use crate::error::{Error, Result};

fn check_finite(data: &[f64]) -> Result<()> {
    for (index, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}

/// H×W grid of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ScalarGrid {
    /// Grid of the given shape with every element set to `fill`.
    pub fn filled(height: usize, width: usize, fill: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid {
                height,
                width,
                channels: 1,
            });
        }
        if !fill.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(ScalarGrid {
            height,
            width,
            data: vec![fill; height * width],
        })
    }

    /// All-zero grid.
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, 0.0)
    }

    /// Wraps an existing row-major buffer; length and finiteness are checked.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid {
                height,
                width,
                channels: 1,
            });
        }
        if data.len() != height * width {
            return Err(Error::shape(
                "ScalarGrid::from_vec",
                format!("{} elements", height * width),
                format!("{} elements", data.len()),
            ));
        }
        check_finite(&data)?;
        Ok(ScalarGrid {
            height,
            width,
            data,
        })
    }

    /// Builds a grid by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut g = Self::zeros(height, width)?;
        for r in 0..height {
            for c in 0..width {
                g.set(r, c, f(r, c));
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &ScalarGrid) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Sum of all elements in row-major sequential order, so results are
    /// bit-reproducible across runs.
    pub fn sum(&self) -> f64 {
        let mut acc = 0.0;
        for v in &self.data {
            acc += v;
        }
        acc
    }

    /// W×H grid with rows and columns swapped.
    pub fn transposed(&self) -> ScalarGrid {
        let mut out = ScalarGrid {
            height: self.width,
            width: self.height,
            data: vec![0.0; self.data.len()],
        };
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }
}

/// H×W×C grid of 64-bit floats; the channel count is fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl VectorGrid {
    /// Grid of the given shape with every element set to `fill`.
    pub fn filled(height: usize, width: usize, channels: usize, fill: f64) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::EmptyGrid {
                height,
                width,
                channels,
            });
        }
        if !fill.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(VectorGrid {
            height,
            width,
            channels,
            data: vec![fill; height * width * channels],
        })
    }

    /// All-zero grid.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Wraps an existing row-major, channel-interleaved buffer.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::EmptyGrid {
                height,
                width,
                channels,
            });
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                "VectorGrid::from_vec",
                format!("{} elements", height * width * channels),
                format!("{} elements", data.len()),
            ));
        }
        check_finite(&data)?;
        Ok(VectorGrid {
            height,
            width,
            channels,
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        self.data[(row * self.width + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &VectorGrid) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Extracts one channel as a scalar grid.
    pub fn channel(&self, channel: usize) -> ScalarGrid {
        debug_assert!(channel < self.channels);
        let mut out = ScalarGrid {
            height: self.height,
            width: self.width,
            data: vec![0.0; self.height * self.width],
        };
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(r, c, self.get(r, c, channel));
            }
        }
        out
    }
}

/// Grid of given shape with every element equal to `fill`.
///
/// Thin constructor alias kept as a free function because every layer module
/// builds its outputs through it.
pub fn make_grid(height: usize, width: usize, channels: usize, fill: f64) -> Result<VectorGrid> {
    VectorGrid::filled(height, width, channels, fill)
}

/// Sum over all elements of `g` in row-major sequential order.
pub fn reduce_sum(g: &ScalarGrid) -> f64 {
    g.sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filled_sets_every_element() {
        let g = make_grid(2, 2, 1, 0.0).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
        assert_eq!(g.data().len(), 4);

        let g = make_grid(1, 3, 2, 1.5).unwrap();
        assert_eq!(g.data().len(), 6);
        assert!(g.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn zero_dimension_is_an_error() {
        assert!(make_grid(0, 3, 2, 0.0).is_err());
        assert!(ScalarGrid::zeros(3, 0).is_err());
        assert!(make_grid(3, 3, 0, 0.0).is_err());
    }

    #[test]
    fn non_finite_fill_is_an_error() {
        assert!(ScalarGrid::filled(2, 2, f64::NAN).is_err());
        assert!(make_grid(2, 2, 1, f64::INFINITY).is_err());
        assert!(ScalarGrid::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(ScalarGrid::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(VectorGrid::from_vec(2, 2, 2, vec![1.0; 7]).is_err());
    }

    #[test]
    fn reduce_sum_row_major() {
        let g = ScalarGrid::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(reduce_sum(&g), 10.0);

        let z = ScalarGrid::zeros(5, 5).unwrap();
        assert_eq!(reduce_sum(&z), 0.0);

        let row = ScalarGrid::from_vec(1, 10, vec![0.1; 10]).unwrap();
        assert!((reduce_sum(&row) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn element_round_trip() {
        let mut g = VectorGrid::zeros(3, 4, 2).unwrap();
        g.set(2, 3, 1, -0.25);
        assert_eq!(g.get(2, 3, 1), -0.25);
        g.set(0, 0, 0, 7.5);
        assert_eq!(g.get(0, 0, 0), 7.5);
    }

    #[test]
    fn channel_extraction() {
        let mut g = VectorGrid::zeros(2, 2, 3).unwrap();
        g.set(1, 0, 2, 9.0);
        let ch = g.channel(2);
        assert_eq!(ch.get(1, 0), 9.0);
        assert_eq!(ch.get(0, 0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // The mathematical sum is permutation invariant; the row-major
            // and transposed summation orders may differ only by rounding.
            #[test]
            fn reduce_sum_matches_transposed_sum(
                height in 1usize..48,
                width in 1usize..48,
                seed in 0u64..1_000,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
                let g = ScalarGrid::from_fn(height, width, |_, _| {
                    rng.random_range(-1.0..1.0)
                }).unwrap();
                let difference = (reduce_sum(&g) - reduce_sum(&g.transposed())).abs();
                prop_assert!(difference < 1e-12);
            }

            #[test]
            fn element_write_read_round_trip(
                row in 0usize..8,
                col in 0usize..8,
                channel in 0usize..3,
                value in -1e9f64..1e9,
            ) {
                let mut g = VectorGrid::zeros(8, 8, 3).unwrap();
                g.set(row, col, channel, value);
                prop_assert_eq!(g.get(row, col, channel), value);
            }
        }
    }
}
