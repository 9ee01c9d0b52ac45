//! Portable FloatMap (PFM) depth maps, grayscale `Pf` only.
//!
//! Header: magic, width, height, scale. A negative scale means
//! little-endian samples, positive means big-endian; the magnitude is
//! ignored (values are taken as metres directly). Scanlines are stored
//! bottom-to-top per the de facto PFM convention. Non-finite and
//! non-positive samples load as the invalid-depth sentinel 0.

use crate::error::Result;
use crate::grid::ScalarGrid;
use crate::io::pnm::Cursor;

pub(crate) fn parse_pfm(bytes: &[u8]) -> Result<ScalarGrid> {
    let mut cursor = Cursor::new(bytes);
    let magic = cursor.token()?;
    match magic {
        "Pf" => {}
        "PF" => {
            return Err(Cursor::new(bytes)
                .error("color PFM ('PF') is not supported; depth maps are grayscale 'Pf'"))
        }
        other => return Err(Cursor::new(bytes).error(format!("unsupported magic '{other}'"))),
    }
    let width = cursor.uint("image width")? as usize;
    let height = cursor.uint("image height")? as usize;
    if width == 0 || height == 0 {
        return Err(cursor.error("image dimensions must be positive"));
    }
    let scale_tok = cursor.token()?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| cursor.error(format!("expected scale factor, got '{scale_tok}'")))?;
    if scale == 0.0 {
        return Err(cursor.error("scale factor must be non-zero"));
    }
    cursor.single_whitespace()?;

    let expected = width * height * 4;
    let payload = cursor.remaining();
    if payload.len() != expected {
        return Err(cursor.error(format!(
            "payload length {} disagrees with declared dimensions (expected {expected} bytes)",
            payload.len()
        )));
    }
    let little_endian = scale < 0.0;
    let mut grid = ScalarGrid::zeros(height, width)?;
    // PFM rows run bottom-to-top.
    for row_in_file in 0..height {
        let row = height - 1 - row_in_file;
        for col in 0..width {
            let i = (row_in_file * width + col) * 4;
            let raw: [u8; 4] = payload[i..i + 4].try_into().expect("length checked");
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            } as f64;
            grid.set(row, col, if v.is_finite() && v > 0.0 { v } else { 0.0 });
        }
    }
    Ok(grid)
}

/// Encodes a depth grid as little-endian `Pf` with scale −1.
pub(crate) fn encode_pfm(depth: &ScalarGrid) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", depth.width(), depth.height()).into_bytes();
    for row_in_file in 0..depth.height() {
        let row = depth.height() - 1 - row_in_file;
        for col in 0..depth.width() {
            out.extend((depth.get(row, col) as f32).to_le_bytes());
        }
    }
    out
}
