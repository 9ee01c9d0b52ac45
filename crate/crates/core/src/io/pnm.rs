//! Netpbm (PGM P2/P5, PPM P3/P6) parsing and writing.
//!
//! Parsing is strict: declared dimensions must match the payload exactly,
//! sample values must not exceed the declared maxval, and trailing garbage
//! is an error. All parse failures carry the byte offset of the problem.
//! Sample values are scaled to [0, 1] by maxval. Binary 16-bit samples are
//! big-endian per the Netpbm convention.

use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    pub(crate) fn remaining(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }

    pub(crate) fn advance(&mut self, n: usize) {
        self.pos += n;
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skips whitespace and `#` comments (which run to end of line).
    pub(crate) fn skip_separators(&mut self) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(b) = self.peek() {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => break,
            }
        }
    }

    /// Reads one whitespace-delimited token after skipping separators.
    pub(crate) fn token(&mut self) -> Result<&'a str> {
        self.skip_separators();
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("unexpected end of file, expected a token"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| self.error("token is not valid ASCII"))
    }

    pub(crate) fn uint(&mut self, what: &str) -> Result<u64> {
        let start_pos;
        let tok = {
            self.skip_separators();
            start_pos = self.pos;
            self.token()?
        };
        tok.parse::<u64>().map_err(|_| Error::Parse {
            offset: start_pos,
            message: format!("expected {what}, got '{tok}'"),
        })
    }

    /// Consumes exactly one whitespace byte separating header from payload.
    pub(crate) fn single_whitespace(&mut self) -> Result<()> {
        match self.peek() {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("expected a single whitespace byte before the payload")),
        }
    }
}

/// Parsed Netpbm payload before grid conversion.
#[derive(Debug)]
pub(crate) struct Pnm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub channels: usize,
    /// Raw samples in row-major, channel-interleaved order.
    pub samples: Vec<u32>,
}

fn read_header(cursor: &mut Cursor<'_>) -> Result<(usize, usize, u32)> {
    let width = cursor.uint("image width")? as usize;
    let height = cursor.uint("image height")? as usize;
    let maxval = cursor.uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(cursor.error("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cursor.error(format!("maxval must be in 1..=65535, got {maxval}")));
    }
    Ok((width, height, maxval as u32))
}

fn read_ascii_samples(cursor: &mut Cursor<'_>, count: usize, maxval: u32) -> Result<Vec<u32>> {
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let v = cursor.uint("sample value")?;
        if v > maxval as u64 {
            return Err(cursor.error(format!("sample {v} exceeds maxval {maxval}")));
        }
        samples.push(v as u32);
    }
    cursor.skip_separators();
    if !cursor.remaining().is_empty() {
        return Err(cursor.error("trailing data after the declared samples"));
    }
    Ok(samples)
}

fn read_binary_samples(cursor: &mut Cursor<'_>, count: usize, maxval: u32) -> Result<Vec<u32>> {
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let expected = count * bytes_per_sample;
    let payload = cursor.remaining();
    if payload.len() != expected {
        return Err(cursor.error(format!(
            "payload length {} disagrees with declared dimensions (expected {expected} bytes)",
            payload.len()
        )));
    }
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let v = if bytes_per_sample == 2 {
            u32::from(payload[2 * i]) << 8 | u32::from(payload[2 * i + 1])
        } else {
            u32::from(payload[i])
        };
        if v > maxval {
            cursor.advance(i * bytes_per_sample);
            return Err(cursor.error(format!("sample {v} exceeds maxval {maxval}")));
        }
        samples.push(v);
    }
    Ok(samples)
}

/// Parses any of P2/P3/P5/P6 from raw bytes.
pub(crate) fn parse_pnm(bytes: &[u8]) -> Result<Pnm> {
    let mut cursor = Cursor::new(bytes);
    let magic = cursor.token()?;
    let (channels, binary) = match magic {
        "P2" => (1, false),
        "P3" => (3, false),
        "P5" => (1, true),
        "P6" => (3, true),
        other => {
            return Err(Cursor::new(bytes).error(format!(
                "unsupported magic '{other}' (expected P2, P3, P5 or P6)"
            )))
        }
    };
    let (width, height, maxval) = read_header(&mut cursor)?;
    let count = width * height * channels;
    let samples = if binary {
        cursor.single_whitespace()?;
        read_binary_samples(&mut cursor, count, maxval)?
    } else {
        read_ascii_samples(&mut cursor, count, maxval)?
    };
    Ok(Pnm {
        width,
        height,
        maxval,
        channels,
        samples,
    })
}

impl Pnm {
    /// Grayscale samples scaled to [0, 1].
    pub(crate) fn to_scalar_grid(&self) -> Result<ScalarGrid> {
        debug_assert_eq!(self.channels, 1);
        let scale = 1.0 / self.maxval as f64;
        ScalarGrid::from_vec(
            self.height,
            self.width,
            self.samples.iter().map(|&v| v as f64 * scale).collect(),
        )
    }

    /// RGB samples scaled to [0, 1].
    pub(crate) fn to_vector_grid(&self) -> Result<VectorGrid> {
        debug_assert_eq!(self.channels, 3);
        let scale = 1.0 / self.maxval as f64;
        VectorGrid::from_vec(
            self.height,
            self.width,
            3,
            self.samples.iter().map(|&v| v as f64 * scale).collect(),
        )
    }
}

fn quantize(value: f64, maxval: u32) -> u32 {
    (value.clamp(0.0, 1.0) * maxval as f64).round() as u32
}

/// Encodes a [0, 1] grayscale grid as binary PGM (P5) with maxval 255.
pub(crate) fn encode_pgm(grid: &ScalarGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid.data().iter().map(|&v| quantize(v, 255) as u8));
    out
}

/// Encodes a [0, 1] 3-channel grid as binary PPM (P6) with maxval 255.
pub(crate) fn encode_ppm(grid: &VectorGrid) -> Result<Vec<u8>> {
    if grid.channels() != 3 {
        return Err(Error::shape(
            "encode_ppm",
            "3 channels".to_string(),
            format!("{} channels", grid.channels()),
        ));
    }
    let mut out = format!("P6\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid.data().iter().map(|&v| quantize(v, 255) as u8));
    Ok(out)
}
