//! Differentiable bilinear sampling with a validity mask.
//!
//! Sampling coordinates are source-image pixel coordinates (x = column,
//! y = row). A sample is valid only when all four interpolation neighbors
//! lie inside the source; invalid samples output 0 with mask 0 and
//! contribute nothing to any gradient. The border policy is zero-with-mask
//! rather than clamp-to-edge so that missing pixels stay identifiable and
//! downstream costs can block them out.
//!
//! The interpolant is piecewise linear; on integer lattice lines the
//! coordinate derivative takes the linear piece of the cell anchored at
//! `floor(coord)`, a fixed one-sided choice.

use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};

/// Per-pixel sampling coordinates: a 2-channel grid holding (x, y).
pub type SampleGrid = VectorGrid;

struct Cell {
    row0: usize,
    col0: usize,
    frac_x: f64,
    frac_y: f64,
}

fn locate(src_h: usize, src_w: usize, x: f64, y: f64) -> Option<Cell> {
    if !x.is_finite() || !y.is_finite() {
        return None;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    if x0 < 0.0 || y0 < 0.0 {
        return None;
    }
    let col0 = x0 as usize;
    let row0 = y0 as usize;
    if col0 + 1 > src_w - 1 || row0 + 1 > src_h - 1 {
        return None;
    }
    Some(Cell {
        row0,
        col0,
        frac_x: x - x0,
        frac_y: y - y0,
    })
}

fn check_grid(grid: &SampleGrid) -> Result<()> {
    if grid.channels() != 2 {
        return Err(Error::shape(
            "bilinear_sample",
            "2-channel sample grid".to_string(),
            format!("{} channels", grid.channels()),
        ));
    }
    Ok(())
}

/// Samples `src` at every coordinate of `grid` with 4-neighbor bilinear
/// weights; returns the warped image and its 0/1 validity mask.
pub fn bilinear_sample(src: &ScalarGrid, grid: &SampleGrid) -> Result<(ScalarGrid, ScalarGrid)> {
    check_grid(grid)?;
    let mut warped = ScalarGrid::zeros(grid.height(), grid.width())?;
    let mut mask = ScalarGrid::zeros(grid.height(), grid.width())?;
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let x = grid.get(r, c, 0);
            let y = grid.get(r, c, 1);
            if let Some(cell) = locate(src.height(), src.width(), x, y) {
                let (fx, fy) = (cell.frac_x, cell.frac_y);
                let value = (1.0 - fx) * (1.0 - fy) * src.get(cell.row0, cell.col0)
                    + fx * (1.0 - fy) * src.get(cell.row0, cell.col0 + 1)
                    + (1.0 - fx) * fy * src.get(cell.row0 + 1, cell.col0)
                    + fx * fy * src.get(cell.row0 + 1, cell.col0 + 1);
                warped.set(r, c, value);
                mask.set(r, c, 1.0);
            }
        }
    }
    Ok((warped, mask))
}

/// Backward pass of [`bilinear_sample`].
///
/// `grad_src` receives the four bilinear weights of each valid sample
/// scattered sequentially (deterministic accumulation order); `grad_grid`
/// holds the coordinate gradients, i.e. the image slope at the sample point
/// under the bilinear weights. Masked-out samples contribute zero to both.
pub fn bilinear_sample_backward(
    src: &ScalarGrid,
    grid: &SampleGrid,
    grad_warped: &ScalarGrid,
) -> Result<(ScalarGrid, VectorGrid)> {
    check_grid(grid)?;
    if grad_warped.height() != grid.height() || grad_warped.width() != grid.width() {
        return Err(Error::shape(
            "bilinear_sample_backward",
            format!("{}x{}", grid.height(), grid.width()),
            format!("{}x{}", grad_warped.height(), grad_warped.width()),
        ));
    }
    let mut grad_src = ScalarGrid::zeros(src.height(), src.width())?;
    let mut grad_grid = VectorGrid::zeros(grid.height(), grid.width(), 2)?;
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let x = grid.get(r, c, 0);
            let y = grid.get(r, c, 1);
            let cell = match locate(src.height(), src.width(), x, y) {
                Some(cell) => cell,
                None => continue,
            };
            let g = grad_warped.get(r, c);
            let (r0, c0) = (cell.row0, cell.col0);
            let (fx, fy) = (cell.frac_x, cell.frac_y);

            let i00 = src.get(r0, c0);
            let i01 = src.get(r0, c0 + 1);
            let i10 = src.get(r0 + 1, c0);
            let i11 = src.get(r0 + 1, c0 + 1);

            grad_src.set(r0, c0, grad_src.get(r0, c0) + g * (1.0 - fx) * (1.0 - fy));
            grad_src.set(r0, c0 + 1, grad_src.get(r0, c0 + 1) + g * fx * (1.0 - fy));
            grad_src.set(r0 + 1, c0, grad_src.get(r0 + 1, c0) + g * (1.0 - fx) * fy);
            grad_src.set(r0 + 1, c0 + 1, grad_src.get(r0 + 1, c0 + 1) + g * fx * fy);

            grad_grid.set(r, c, 0, g * ((1.0 - fy) * (i01 - i00) + fy * (i11 - i10)));
            grad_grid.set(r, c, 1, g * ((1.0 - fx) * (i10 - i00) + fx * (i11 - i01)));
        }
    }
    Ok((grad_src, grad_grid))
}

/// Channelwise [`bilinear_sample`] over a multichannel source with one
/// shared mask (validity depends only on the coordinates).
pub fn warp_multichannel(src: &VectorGrid, grid: &SampleGrid) -> Result<(VectorGrid, ScalarGrid)> {
    check_grid(grid)?;
    let mut warped = VectorGrid::zeros(grid.height(), grid.width(), src.channels())?;
    let mut mask = ScalarGrid::zeros(grid.height(), grid.width())?;
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let x = grid.get(r, c, 0);
            let y = grid.get(r, c, 1);
            if let Some(cell) = locate(src.height(), src.width(), x, y) {
                mask.set(r, c, 1.0);
                let (r0, c0) = (cell.row0, cell.col0);
                let (fx, fy) = (cell.frac_x, cell.frac_y);
                for ch in 0..src.channels() {
                    let value = (1.0 - fx) * (1.0 - fy) * src.get(r0, c0, ch)
                        + fx * (1.0 - fy) * src.get(r0, c0 + 1, ch)
                        + (1.0 - fx) * fy * src.get(r0 + 1, c0, ch)
                        + fx * fy * src.get(r0 + 1, c0 + 1, ch);
                    warped.set(r, c, ch, value);
                }
            }
        }
    }
    Ok((warped, mask))
}

/// The regular pixel lattice as a sample grid: pixel (r, c) holds (c, r).
pub fn identity_grid(height: usize, width: usize) -> Result<SampleGrid> {
    let mut grid = VectorGrid::zeros(height, width, 2)?;
    for r in 0..height {
        for c in 0..width {
            grid.set(r, c, 0, c as f64);
            grid.set(r, c, 1, r as f64);
        }
    }
    Ok(grid)
}
