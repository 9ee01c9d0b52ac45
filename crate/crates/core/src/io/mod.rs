//! Image, depth and plain-text file I/O.
//!
//! Supported formats: PGM (P2/P5) and PPM (P3/P6) for images, grayscale PFM
//! for depth. Intensities load scaled to [0, 1] by maxval. Depth loads in
//! metres: PFM values directly, PGM values as millimetres / 1000 (the common
//! depth-camera convention), with 0 as the invalid sentinel. All writers
//! produce byte-identical output for identical inputs.
//!
//! Text sidecar formats: intrinsics are one line `fx fy px py`; poses are
//! one line `v1 v2 v3 t1 t2 t3`.

mod pfm;
mod pnm;

use std::fs;
use std::path::{Path, PathBuf};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};

/// A loaded image: grayscale or RGB.
#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Gray(ScalarGrid),
    Rgb(VectorGrid),
}

impl Image {
    pub fn height(&self) -> usize {
        match self {
            Image::Gray(g) => g.height(),
            Image::Rgb(g) => g.height(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Image::Gray(g) => g.width(),
            Image::Rgb(g) => g.width(),
        }
    }

    /// Grayscale view: RGB collapses to the channel mean.
    pub fn to_gray(&self) -> Result<ScalarGrid> {
        match self {
            Image::Gray(g) => Ok(g.clone()),
            Image::Rgb(g) => {
                let mut out = ScalarGrid::zeros(g.height(), g.width())?;
                for r in 0..g.height() {
                    for c in 0..g.width() {
                        let sum = g.get(r, c, 0) + g.get(r, c, 1) + g.get(r, c, 2);
                        out.set(r, c, sum / 3.0);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a PGM into a [`ScalarGrid`] or a PPM into a 3-channel
/// [`VectorGrid`], values scaled to [0, 1] by maxval.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = read_bytes(path.as_ref())?;
    let pnm = pnm::parse_pnm(&bytes)?;
    Ok(match pnm.channels {
        1 => Image::Gray(pnm.to_scalar_grid()?),
        _ => Image::Rgb(pnm.to_vector_grid()?),
    })
}

/// Reads a depth map in metres: `Pf` PFM directly, PGM as millimetres/1000.
/// Value 0 marks invalid pixels.
pub fn read_depth(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    let bytes = read_bytes(path.as_ref())?;
    if bytes.starts_with(b"Pf") || bytes.starts_with(b"PF") {
        return pfm::parse_pfm(&bytes);
    }
    let pnm = pnm::parse_pnm(&bytes)?;
    if pnm.channels != 1 {
        return Err(Error::Parse {
            offset: 0,
            message: "depth maps must be single-channel (PGM or Pf PFM)".to_string(),
        });
    }
    let mut grid = ScalarGrid::zeros(pnm.height, pnm.width)?;
    for r in 0..pnm.height {
        for c in 0..pnm.width {
            grid.set(r, c, pnm.samples[r * pnm.width + c] as f64 / 1000.0);
        }
    }
    Ok(grid)
}

/// Writes a [0, 1] grayscale grid as binary PGM with maxval 255.
pub fn write_image(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &pnm::encode_pgm(grid))
}

/// Writes a [0, 1] 3-channel grid as binary PPM with maxval 255.
pub fn write_image_rgb(grid: &VectorGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &pnm::encode_ppm(grid)?)
}

/// Writes |residuals| scaled to [0, maxval] as PGM, with masked pixels
/// forced to 0.
pub fn write_residual(
    residuals: &ScalarGrid,
    mask: &ScalarGrid,
    path: impl AsRef<Path>,
) -> Result<()> {
    if !residuals.same_shape(mask) {
        return Err(Error::shape(
            "write_residual",
            format!("{}x{}", residuals.height(), residuals.width()),
            format!("{}x{}", mask.height(), mask.width()),
        ));
    }
    let mut image = ScalarGrid::zeros(residuals.height(), residuals.width())?;
    for r in 0..residuals.height() {
        for c in 0..residuals.width() {
            if mask.get(r, c) != 0.0 {
                image.set(r, c, residuals.get(r, c).abs());
            }
        }
    }
    write_image(&image, path)
}

/// Writes a depth grid (metres) as little-endian grayscale PFM.
pub fn write_depth(depth: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &pfm::encode_pfm(depth))
}

/// Writes a 0/1 mask as PGM (0 → black, 1 → white).
pub fn write_mask(mask: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    write_image(mask, path)
}

fn parse_floats(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split_whitespace().map(str::parse::<f64>).collect();
    let values = values.map_err(|e| Error::Parse {
        offset: 0,
        message: format!("{what}: {e}"),
    })?;
    if values.len() != expected {
        return Err(Error::Parse {
            offset: 0,
            message: format!("{what}: expected {expected} floats, got {}", values.len()),
        });
    }
    Ok(values)
}

/// Parses `fx fy px py`.
pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let v = parse_floats(text, 4, "intrinsics")?;
    CameraIntrinsics::new(v[0], v[1], v[2], v[3])
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_intrinsics(&text)
}

pub fn write_intrinsics(k: &CameraIntrinsics, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(
        path.as_ref(),
        format!("{} {} {} {}\n", k.fx, k.fy, k.px, k.py).as_bytes(),
    )
}

/// Parses `v1 v2 v3 t1 t2 t3`.
pub fn parse_pose(text: &str) -> Result<[f64; 6]> {
    let v = parse_floats(text, 6, "pose")?;
    Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
}

pub fn read_pose(path: impl AsRef<Path>) -> Result<[f64; 6]> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_pose(&text)
}

/// One line of six floats, shortest round-trip formatting.
pub fn format_pose(pose: &[f64; 6]) -> String {
    format!(
        "{} {} {} {} {} {}",
        pose[0], pose[1], pose[2], pose[3], pose[4], pose[5]
    )
}

pub fn write_pose(pose: &[f64; 6], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format!("{}\n", format_pose(pose)).as_bytes())
}

/// A synthetic or recorded image pair on disk.
#[derive(Debug, Clone)]
pub struct DatasetPair {
    pub ref_path: PathBuf,
    pub live_path: PathBuf,
    pub depth_path: Option<PathBuf>,
    pub intrinsics: CameraIntrinsics,
    pub ground_truth_pose: Option<[f64; 6]>,
}

impl DatasetPair {
    /// Loads every referenced file and checks that all shapes agree.
    pub fn load(&self) -> Result<(ScalarGrid, ScalarGrid, Option<ScalarGrid>)> {
        let ref_image = read_image(&self.ref_path)?.to_gray()?;
        let live_image = read_image(&self.live_path)?.to_gray()?;
        if !ref_image.same_shape(&live_image) {
            return Err(Error::shape(
                "DatasetPair::load",
                format!("{}x{}", ref_image.height(), ref_image.width()),
                format!("{}x{}", live_image.height(), live_image.width()),
            ));
        }
        let depth = match &self.depth_path {
            Some(p) => {
                let d = read_depth(p)?;
                if !d.same_shape(&ref_image) {
                    return Err(Error::shape(
                        "DatasetPair::load (depth)",
                        format!("{}x{}", ref_image.height(), ref_image.width()),
                        format!("{}x{}", d.height(), d.width()),
                    ));
                }
                Some(d)
            }
            None => None,
        };
        Ok((ref_image, live_image, depth))
    }
}
