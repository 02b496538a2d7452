//! PGM and PNG reading and writing for 8-bit grayscale rasters.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::raster::{dequantize_sample, ByteGrid, Raster};

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {depth}-bit samples are not supported (8-bit only)", path.display())]
    UnsupportedBitDepth { path: PathBuf, depth: u32 },
    #[error("{}: unknown image extension (expected .pgm or .png)", path.display())]
    UnknownExtension { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> ImageIoError {
    ImageIoError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Loads a PGM (P2/P5, maxval 255) or 8-bit gray/RGB PNG. Color is reduced to
/// luminance with Rec. 709 weights and rounded to 8 bits.
pub fn load_image(path: &Path) -> Result<Raster, ImageIoError> {
    let data = fs::read(path).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let grid = if data.starts_with(b"\x89PNG") {
        decode_png(path, &data)?
    } else if data.starts_with(b"P2") || data.starts_with(b"P5") {
        decode_pgm(path, &data)?
    } else {
        return Err(format_err(path, "not a PGM (P2/P5) or PNG file"));
    };
    Ok(grid.dequantize())
}

pub fn save_image(r: &Raster, path: &Path) -> Result<(), ImageIoError> {
    let format = ImageFormat::from_path(path).ok_or_else(|| ImageIoError::UnknownExtension {
        path: path.to_path_buf(),
    })?;
    let grid = r.quantize();
    let bytes = match format {
        ImageFormat::Pgm => encode_pgm(&grid),
        ImageFormat::Png => encode_png(&grid).map_err(|e| format_err(path, e.to_string()))?,
    };
    fs::write(path, bytes).map_err(|source| ImageIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Header tokens of a netpbm file, skipping `#` comments.
struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn next_token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn next_number(&mut self, path: &Path, what: &str) -> Result<usize, ImageIoError> {
        let tok = self
            .next_token()
            .ok_or_else(|| format_err(path, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(path, format!("invalid {what}")))
    }
}

fn decode_pgm(path: &Path, data: &[u8]) -> Result<ByteGrid, ImageIoError> {
    let mut header = HeaderReader { data, pos: 0 };
    let binary = match header.next_token() {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(format_err(path, "bad PGM magic")),
    };
    let width = header.next_number(path, "width")?;
    let height = header.next_number(path, "height")?;
    let maxval = header.next_number(path, "maxval")?;
    if maxval > 255 {
        return Err(ImageIoError::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: 16,
        });
    }
    if maxval != 255 {
        return Err(format_err(
            path,
            format!("maxval {maxval} not supported (expected 255)"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(format_err(path, "empty image"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| format_err(path, "image dimensions overflow"))?;

    let bytes = if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = header.pos + 1;
        let body = data
            .get(start..start + count)
            .ok_or_else(|| format_err(path, "truncated pixel data"))?;
        body.to_vec()
    } else {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let v = header.next_number(path, "pixel value")?;
            if v > 255 {
                return Err(format_err(path, format!("pixel value {v} exceeds maxval")));
            }
            out.push(v as u8);
        }
        out
    };
    ByteGrid::new(width, height, bytes).map_err(|e| format_err(path, e.to_string()))
}

fn encode_pgm(grid: &ByteGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend_from_slice(grid.bytes());
    out
}

fn decode_png(path: &Path, data: &[u8]) -> Result<ByteGrid, ImageIoError> {
    let decoder = png::Decoder::new(Cursor::new(data));
    let mut reader = decoder
        .read_info()
        .map_err(|e| format_err(path, e.to_string()))?;
    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    if depth != png::BitDepth::Eight {
        return Err(ImageIoError::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: depth as u32,
        });
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| format_err(path, e.to_string()))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;
    let mut bytes = Vec::with_capacity(w * h);
    match color {
        png::ColorType::Grayscale => {
            for y in 0..h {
                bytes.extend_from_slice(&buf[y * stride..y * stride + w]);
            }
        }
        png::ColorType::Rgb => {
            for y in 0..h {
                let row = &buf[y * stride..y * stride + 3 * w];
                bytes.extend(
                    row.chunks_exact(3)
                        .map(|px| rgb_luminance(px[0], px[1], px[2])),
                );
            }
        }
        other => {
            return Err(format_err(
                path,
                format!("PNG color type {other:?} not supported (8-bit grayscale or RGB only)"),
            ))
        }
    }
    ByteGrid::new(w, h, bytes).map_err(|e| format_err(path, e.to_string()))
}

/// Rec. 709 luma of an 8-bit RGB triple, rounded back to 8 bits.
pub fn rgb_luminance(r: u8, g: u8, b: u8) -> u8 {
    let l = 0.2126 * f64::from(r) + 0.7152 * f64::from(g) + 0.0722 * f64::from(b);
    l.round().clamp(0.0, 255.0) as u8
}

/// Luminance of an RGB pixel in `[0, 1]`.
pub fn rgb_to_luminance(r: u8, g: u8, b: u8) -> f64 {
    dequantize_sample(rgb_luminance(r, g, b))
}

fn encode_png(grid: &ByteGrid) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, grid.width() as u32, grid.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(grid.bytes())?;
        writer.finish()?;
    }
    Ok(out)
}
