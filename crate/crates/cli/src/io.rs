//! Image files: binary/ASCII PGM and a lossless plain-text float format.
//!
//! PGM samples are normalized to `[0, 1]` by the header's maxval; 16-bit
//! samples are big-endian. The float format is a `width height` line followed
//! by `height` lines of `width` values each, written with Rust's shortest
//! round-trip formatting so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mpg_core::ImageGrid;

use crate::error::{CliError, CliResult};

/// Reads a PGM (`P5` or `P2`) or float-format image, chosen by content.
pub fn read_image(path: &Path) -> CliResult<ImageGrid> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.first() == Some(&b'P') {
        decode_pgm(&bytes).map_err(|r| CliError::format(path, r))
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::format(path, "not UTF-8 text and not PGM"))?;
        decode_float(text).map_err(|r| CliError::format(path, r))
    }
}

/// Writes 16-bit binary PGM for a `.pgm` extension (values clamped to
/// `[0, 1]`), the float format otherwise.
pub fn write_image(image: &ImageGrid, path: &Path) -> CliResult<()> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm"));
    let bytes = if is_pgm { encode_pgm16(image) } else { encode_float(image).into_bytes() };
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn encode_float(image: &ImageGrid) -> String {
    let mut out = format!("{} {}\n", image.width(), image.height());
    for row in image.data().chunks(image.width()) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn decode_float(text: &str) -> Result<ImageGrid, String> {
    let mut tokens = text.split_ascii_whitespace();
    let mut dim = |name: &str| -> Result<usize, String> {
        tokens
            .next()
            .ok_or(format!("missing {name} in header"))?
            .parse::<usize>()
            .map_err(|e| format!("bad {name}: {e}"))
    };
    let (w, h) = (dim("width")?, dim("height")?);
    if w == 0 || h == 0 {
        return Err(format!("empty image {w}x{h}"));
    }
    let n = w.checked_mul(h).ok_or("image dimensions overflow")?;
    let mut data = Vec::with_capacity(n);
    for tok in tokens {
        data.push(tok.parse::<f64>().map_err(|e| format!("bad value `{tok}` at index {}: {e}", data.len()))?);
    }
    if data.len() != n {
        return Err(format!("expected {n} values for {w}x{h}, found {}", data.len()));
    }
    ImageGrid::new(w, h, data).map_err(|e| e.to_string())
}

/// 16-bit binary PGM with maxval 65535.
pub fn encode_pgm16(image: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", image.width(), image.height()).into_bytes();
    out.reserve(2 * image.len());
    for &v in image.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// 8-bit binary PGM with maxval 255.
pub fn encode_pgm8(image: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

struct Header {
    ascii: bool,
    width: usize,
    height: usize,
    maxval: u32,
    /// Offset of the first raster byte.
    body: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, String> {
    let ascii = match bytes.get(..2) {
        Some(b"P5") => false,
        Some(b"P2") => true,
        _ => return Err("unsupported magic (expected P5 or P2)".into()),
    };
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        // whitespace and comments may precede each field
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format!("malformed header: missing {name}"));
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).unwrap();
        fields[i] = digits.parse().map_err(|_| format!("malformed header: {name} out of range"))?;
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header: no separator after maxval".into());
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("empty image {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    Ok(Header {
        ascii,
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        body: pos + 1,
    })
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid, String> {
    let hdr = parse_header(bytes)?;
    let n = hdr.width.checked_mul(hdr.height).ok_or("image dimensions overflow")?;
    let body = &bytes[hdr.body..];
    let samples: Vec<u32> = if hdr.ascii {
        let text = std::str::from_utf8(body).map_err(|_| "non-text raster in P2 file")?;
        let vals = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse::<u32>().map_err(|_| format!("bad sample `{t}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() < n {
            return Err(format!("truncated raster: {} of {n} samples", vals.len()));
        }
        vals
    } else if hdr.maxval > 255 {
        if body.len() < 2 * n {
            return Err(format!("truncated raster: {} of {} bytes", body.len(), 2 * n));
        }
        body[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
    } else {
        if body.len() < n {
            return Err(format!("truncated raster: {} of {n} bytes", body.len()));
        }
        body[..n].iter().map(|&b| b as u32).collect()
    };
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, &s)| s > hdr.maxval) {
        return Err(format!("sample {s} at index {i} exceeds maxval {}", hdr.maxval));
    }
    let scale = hdr.maxval as f64;
    ImageGrid::new(hdr.width, hdr.height, samples.iter().map(|&s| s as f64 / scale).collect())
        .map_err(|e| e.to_string())
}
