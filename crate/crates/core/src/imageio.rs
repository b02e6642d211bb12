//! PGM (binary P5, 8-bit) and PFM (grayscale `Pf` / color `PF`) image files.
//!
//! PGM values map to `[0, 1]` with round-half-up quantization. PFM stores
//! 32-bit floats; rows are written bottom-to-top as the format requires and
//! always little-endian (negative scale). Big-endian PFM files are decoded too.
//! Complex tensors are stored as two PFM files with `_re` / `_im` suffixes.
//! Grayscale files decode to `[H, W]`, color PFM to `[3, H, W]`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{plane_dims, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Pgm,
    Pfm,
}

fn format_of(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(e) if e == "pgm" => Ok(Format::Pgm),
        Some(e) if e == "pfm" => Ok(Format::Pfm),
        other => Err(Error::format(
            "suffix",
            format!("unsupported image suffix {other:?} (expected .pgm or .pfm)"),
        )),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Path of one part of a complex pair: `img.pfm` -> `img_re.pfm`.
pub fn part_path(path: &Path, part: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("pfm");
    path.with_file_name(format!("{stem}_{part}.{ext}"))
}

/// Reads a PGM or PFM file. If `path` is absent but its `_re`/`_im` pair
/// exists, the pair is read back as one complex tensor.
pub fn read_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let fmt = format_of(path)?;
    if !path.exists() && fmt == Format::Pfm {
        let (re, im) = (part_path(path, "re"), part_path(path, "im"));
        if re.exists() && im.exists() {
            return Tensor::from_parts(&read_image(re)?, &read_image(im)?);
        }
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    match fmt {
        Format::Pgm => decode_pgm(&bytes),
        Format::Pfm => decode_pfm(&bytes),
    }
}

/// Writes `t` (shape `[H, W]`, `[1, H, W]`, or `[3, H, W]` for PFM).
pub fn write_image(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fmt = format_of(path)?;
    if t.is_complex() {
        if fmt != Format::Pfm {
            return Err(Error::Dtype("complex images can only be written as PFM pairs".into()));
        }
        write_image(&t.real_part(), part_path(path, "re"))?;
        return write_image(&t.imag_part(), part_path(path, "im"));
    }
    let bytes = match fmt {
        Format::Pgm => encode_pgm(t)?,
        Format::Pfm => encode_pfm(t)?,
    };
    fs::write(path, bytes).map_err(io_err(path))
}

/// 8-bit level of a value: round-half-up of `255 * clamp(v, 0, 1)`.
pub fn quantize_u8(v: f64) -> u8 {
    let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (255.0 * c + 0.5).floor() as u8
}

fn channels(t: &Tensor) -> Result<(usize, usize, usize)> {
    let (planes, h, w) = plane_dims(t.shape())?;
    if t.shape().len() > 3 {
        return Err(Error::shape(format!("image tensors have at most 3 axes, got {:?}", t.shape())));
    }
    Ok((planes, h, w))
}

fn encode_pgm(t: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = channels(t)?;
    if c != 1 {
        return Err(Error::shape(format!("PGM holds one channel, got {c}")));
    }
    let v = t.real_values("PGM encoding")?;
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(v.iter().map(|&x| quantize_u8(x)));
    Ok(out)
}

fn encode_pfm(t: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = channels(t)?;
    let magic = match c {
        1 => "Pf",
        3 => "PF",
        _ => return Err(Error::shape(format!("PFM holds 1 or 3 channels, got {c}"))),
    };
    let v = t.real_values("PFM encoding")?;
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * v.len());
    for row in (0..h).rev() {
        for col in 0..w {
            for ch in 0..c {
                let x = v[(ch * h + row) * w + col] as f32;
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Whitespace-separated header tokens; `#` comments run to end of line.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn token(&mut self, field: &str) -> Result<&'a str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(field, "header ends early"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::format(field, "not ASCII"))
    }

    fn dim(&mut self, field: &str) -> Result<usize> {
        let tok = self.token(field)?;
        match tok.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::format(field, format!("expected a positive integer, got {tok:?}"))),
        }
    }

    /// Consumes the single whitespace byte that ends the header.
    fn payload(self, field: &str) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(&self.bytes[self.pos + 1..]),
            _ => Err(Error::format(field, "missing whitespace before payload")),
        }
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<Tensor> {
    let mut hdr = Header { bytes, pos: 0 };
    let magic = hdr.token("magic")?;
    if magic != "P5" {
        return Err(Error::format("magic", format!("unsupported magic number {magic:?} (expected P5)")));
    }
    let w = hdr.dim("width")?;
    let h = hdr.dim("height")?;
    let maxval = hdr.dim("maxval")?;
    if maxval > 255 {
        return Err(Error::format("maxval", format!("only 8-bit PGM is supported, got maxval {maxval}")));
    }
    let payload = hdr.payload("maxval")?;
    if payload.len() < w * h {
        return Err(Error::format(
            "payload",
            format!("truncated: expected {} bytes, found {}", w * h, payload.len()),
        ));
    }
    let scale = maxval as f64;
    let v = payload[..w * h].iter().map(|&b| b as f64 / scale).collect();
    Tensor::from_real(vec![h, w], v)
}

fn decode_pfm(bytes: &[u8]) -> Result<Tensor> {
    let mut hdr = Header { bytes, pos: 0 };
    let magic = hdr.token("magic")?;
    let c = match magic {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(Error::format("magic", format!("unsupported magic number {magic:?} (expected Pf or PF)"))),
    };
    let w = hdr.dim("width")?;
    let h = hdr.dim("height")?;
    let scale_tok = hdr.token("scale")?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::format("scale", format!("not a number: {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("scale", "must be finite and nonzero"));
    }
    let little = scale < 0.0;
    let payload = hdr.payload("scale")?;
    let n = c * h * w;
    if payload.len() < 4 * n {
        return Err(Error::format(
            "payload",
            format!("truncated: expected {} bytes, found {}", 4 * n, payload.len()),
        ));
    }
    let mut v = vec![0.0; n];
    let mut k = 0;
    for row in (0..h).rev() {
        for col in 0..w {
            for ch in 0..c {
                let b: [u8; 4] = payload[4 * k..4 * k + 4].try_into().unwrap();
                let x = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
                v[(ch * h + row) * w + col] = x as f64;
                k += 1;
            }
        }
    }
    let shape = if c == 1 { vec![h, w] } else { vec![c, h, w] };
    Tensor::from_real(shape, v)
}
