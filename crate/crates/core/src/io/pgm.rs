use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Grayscale image with pixels in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape("GrayImage::new", "image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(
                "GrayImage::new",
                format!("{} pixels for a {width}x{height} image", pixels.len()),
            ));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Unsupported(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Rows become image rows; values are clamped into `[0, 1]` (NaN maps to 0).
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        let pixels = m
            .as_slice()
            .iter()
            .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(m.cols(), m.rows(), pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_vec(self.height, self.width, self.pixels.clone()).expect("sizes checked")
    }

    /// `round(p·255)` with halves rounded up.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| quantize(p)).collect()
    }
}

fn quantize(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| parse_err(start, format!("{what} out of range")))
    }
}

/// Decodes a P5 (binary) or P2 (ASCII) graymap with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(parse_err(0, "not a P5 or P2 graymap")),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space_and_comments();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(parse_err(
            maxval_at,
            format!("maxval {maxval} is not supported (only 255)"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(parse_err(2, "image dimensions must be positive"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(2, "image dimensions overflow"))?;
    let raw: Vec<u8> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(h.pos) {
            Some(c) if c.is_ascii_whitespace() => h.pos += 1,
            _ => return Err(parse_err(h.pos, "missing whitespace after maxval")),
        }
        let data = &bytes[h.pos..];
        if data.len() < n {
            return Err(parse_err(
                bytes.len(),
                format!("truncated raster: {} of {n} bytes", data.len()),
            ));
        }
        data[..n].to_vec()
    } else {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let at = {
                h.skip_space_and_comments();
                h.pos
            };
            if at >= bytes.len() {
                return Err(parse_err(at, format!("truncated raster: {} of {n} values", out.len())));
            }
            let v = h.number("pixel value")?;
            if v > 255 {
                return Err(parse_err(at, format!("pixel value {v} exceeds maxval")));
            }
            out.push(v as u8);
        }
        out
    };
    GrayImage::new(width, height, raw.iter().map(|&b| b as f64 / 255.0).collect())
}

/// Encodes as P5 with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_bytes());
    out
}

/// Encodes as P2 (ASCII), 16 values per line.
pub fn encode_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for (i, b) in img.to_bytes().iter().enumerate() {
        out.push_str(&b.to_string());
        out.push(if i % 16 == 15 { '\n' } else { ' ' });
    }
    out.push('\n');
    out.into_bytes()
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_binary_bytes_exactly() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
        let ascii = decode_pgm(b"P2\n# comment\n2 2\n255\n0 255\n128 64\n").unwrap();
        assert_eq!(ascii, img);
    }

    #[test]
    fn rejects_wide_maxval_and_truncation() {
        let err = decode_pgm(b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 7, .. }), "{err:?}");
        assert!(err.to_string().contains("65535"));
        let err = decode_pgm(b"P5\n2 2\n255\n\0\0\0").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(decode_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(decode_pgm(b"P2\n2 1\n255\n3").is_err());
        assert!(decode_pgm(b"P2\n1 1\n255\n300").is_err());
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        let img = GrayImage::new(2, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(img.to_bytes(), vec![128, 128]);
        let m = DenseMatrix::from_rows(&[[-0.1, 1.7, f64::NAN]]);
        assert_eq!(GrayImage::from_matrix(&m).unwrap().to_bytes(), vec![0, 255, 0]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        let img = GrayImage::new(3, 2, (0..6).map(|i| i as f64 / 5.0).collect()).unwrap();
        write_pgm(&img, &path).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.to_bytes(), img.to_bytes());
        assert!(matches!(read_pgm(dir.path().join("missing.pgm")), Err(Error::Io { .. })));
    }
}
