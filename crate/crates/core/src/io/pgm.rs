//! Binary PGM (P5, 8-bit) images, mapped linearly to `[0, 1]`.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Decodes a P5 image with `maxval` up to 255.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let bad = |msg: &str| Error::parse(path, 0, msg.to_string());
    let mut pos = 0;
    let mut next_token = || -> Result<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        Ok(&bytes[start..pos])
    };
    if next_token()? != b"P5" {
        return Err(bad("not a binary PGM (P5) file"));
    }
    let mut number = |what: &str| -> Result<usize> {
        let tok = next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("invalid {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| bad("image dimensions overflow"))?;
    let end = start
        .checked_add(count)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated PGM raster"))?;
    let scale = 1.0 / maxval as f64;
    let data = bytes[start..end]
        .iter()
        .map(|&b| (b as f64 * scale).min(1.0))
        .collect();
    GrayImage::new(width, height, data).map_err(|e| bad(&e.to_string()))
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    write_atomic(path, &encode_pgm(image))
}

/// Reads a PGM, or a PNG converted to grayscale by luminance.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes, path);
    }
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| Error::parse(path, 0, format!("unsupported image: {e}")))?
        .to_luma8();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    GrayImage::new(w as usize, h as usize, data).map_err(|e| Error::parse(path, 0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x + 5 * y) as f64 / 14.0).unwrap();
        let back = decode_pgm(&encode_pgm(&img), Path::new("a.pgm")).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn header_comments_and_maxval() {
        let mut bytes = b"P5 # comment\n2 2\n# another\n15\n".to_vec();
        bytes.extend([0, 15, 5, 10]);
        let img = decode_pgm(&bytes, Path::new("a.pgm")).unwrap();
        assert_eq!(img.get(1, 0), 1.0);
        assert!((img.get(0, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed() {
        let p = Path::new("a.pgm");
        assert!(decode_pgm(b"P2\n2 2\n255\n", p).is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00\x01", p).is_err());
        assert!(decode_pgm(b"P5\n2 2\n65535\n", p).is_err());
        assert!(decode_pgm(b"P5\n99999999999 99999999999\n255\n", p).is_err());
        assert!(decode_pgm(b"P5\n1 1\n255\n\x00", p).is_err());
        assert!(decode_pgm(b"P5", p).is_err());
    }
}
