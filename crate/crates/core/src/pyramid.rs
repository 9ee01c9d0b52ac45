//! Factor-2 image and depth downsampling for coarse-to-fine alignment.

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

/// Halves both dimensions by 2×2 box averaging; a trailing odd row or
/// column is dropped.
pub fn downsample_image(image: &ScalarGrid) -> Result<ScalarGrid> {
    let (h, w) = (image.height() / 2, image.width() / 2);
    if h == 0 || w == 0 {
        return Err(Error::Config(format!(
            "cannot downsample a {}x{} image any further",
            image.height(),
            image.width()
        )));
    }
    let mut out = ScalarGrid::zeros(h, w)?;
    for r in 0..h {
        for c in 0..w {
            let sum = image.get(2 * r, 2 * c)
                + image.get(2 * r, 2 * c + 1)
                + image.get(2 * r + 1, 2 * c)
                + image.get(2 * r + 1, 2 * c + 1);
            out.set(r, c, sum / 4.0);
        }
    }
    Ok(out)
}

/// Depth-aware halving: averages only the valid (> 0) entries of each 2×2
/// block and keeps the 0 sentinel where none are valid.
pub fn downsample_depth(depth: &ScalarGrid) -> Result<ScalarGrid> {
    let (h, w) = (depth.height() / 2, depth.width() / 2);
    if h == 0 || w == 0 {
        return Err(Error::Config(format!(
            "cannot downsample a {}x{} depth map any further",
            depth.height(),
            depth.width()
        )));
    }
    let mut out = ScalarGrid::zeros(h, w)?;
    for r in 0..h {
        for c in 0..w {
            let block = [
                depth.get(2 * r, 2 * c),
                depth.get(2 * r, 2 * c + 1),
                depth.get(2 * r + 1, 2 * c),
                depth.get(2 * r + 1, 2 * c + 1),
            ];
            let mut sum = 0.0;
            let mut n = 0;
            for d in block {
                if d > 0.0 {
                    sum += d;
                    n += 1;
                }
            }
            out.set(r, c, if n > 0 { sum / n as f64 } else { 0.0 });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_average_of_uniform_is_uniform() {
        let img = ScalarGrid::filled(4, 6, 0.25).unwrap();
        let half = downsample_image(&img).unwrap();
        assert_eq!(half.height(), 2);
        assert_eq!(half.width(), 3);
        assert!(half.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn odd_trailing_row_and_column_are_dropped() {
        let img = ScalarGrid::filled(5, 5, 1.0).unwrap();
        let half = downsample_image(&img).unwrap();
        assert_eq!((half.height(), half.width()), (2, 2));
    }

    #[test]
    fn too_small_to_downsample() {
        let img = ScalarGrid::filled(1, 4, 1.0).unwrap();
        assert!(downsample_image(&img).is_err());
    }

    #[test]
    fn depth_downsample_skips_invalid() {
        let mut depth = ScalarGrid::filled(2, 2, 2.0).unwrap();
        depth.set(0, 0, 0.0);
        depth.set(0, 1, 0.0);
        depth.set(1, 0, 0.0);
        let half = downsample_depth(&depth).unwrap();
        assert_eq!(half.get(0, 0), 2.0);

        let zeros = ScalarGrid::zeros(2, 2).unwrap();
        let half = downsample_depth(&zeros).unwrap();
        assert_eq!(half.get(0, 0), 0.0);
    }
}
