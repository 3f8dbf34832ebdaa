//! PGM/PPM (plain and binary) and 8-bit PNG codecs, plus label-map rendering.
//!
//! Every writer goes through [`write_atomic`]: bytes land in a sibling temp
//! file that is renamed into place, so a failed run never leaves a truncated
//! output behind.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{quantize, Image, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Png,
    Pgm,
    Ppm,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(Format::Png),
            "pgm" => Ok(Format::Pgm),
            "ppm" | "pnm" => Ok(Format::Ppm),
            other => Err(Error::Unsupported(format!(
                "unknown image extension {other:?} for {}",
                path.display()
            ))),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decodes by magic bytes rather than by extension.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes)
    } else if bytes.first() == Some(&b'P') {
        decode_pnm(bytes)
    } else {
        Err(Error::MalformedHeader {
            offset: 0,
            reason: "neither a PNG signature nor a PNM magic number".into(),
        })
    }
}

/// Writes `img` with 8-bit quantization; the format follows the extension.
/// `.pgm` requires a grayscale image.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match Format::from_path(path)? {
        Format::Png => encode_png(img)?,
        Format::Pgm => {
            if !img.is_gray() {
                return Err(Error::InvalidArgument(format!(
                    "{} is PGM but the image has {} channels",
                    path.display(),
                    img.channels()
                )));
            }
            encode_pnm(img, false)
        }
        Format::Ppm => encode_pnm(img, false),
    };
    write_atomic(path, &bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Binary P5/P6 (or plain P2/P3 when `plain`) with maxval 255.
pub fn encode_pnm(img: &Image, plain: bool) -> Vec<u8> {
    let magic = match (img.is_gray(), plain) {
        (true, false) => "P5",
        (false, false) => "P6",
        (true, true) => "P2",
        (false, true) => "P3",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    if plain {
        let row_len = img.width() * img.channels();
        for row in img.data().chunks(row_len) {
            let line: Vec<String> = row.iter().map(|&v| quantize(v).to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    } else {
        out.extend(img.data().iter().map(|&v| quantize(v)));
    }
    out
}

struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader {
                offset: start,
                reason: format!("expected decimal {field}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader {
                offset: start,
                reason: format!("{field} does not fit in an integer"),
            })
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let magic = bytes.get(..2).ok_or(Error::MalformedHeader {
        offset: 0,
        reason: "truncated magic number".into(),
    })?;
    let (channels, binary) = match magic {
        b"P2" => (1, false),
        b"P5" => (1, true),
        b"P3" => (3, false),
        b"P6" => (3, true),
        _ => {
            return Err(Error::Unsupported(format!(
                "PNM variant {:?} (only P2, P3, P5, P6)",
                String::from_utf8_lossy(magic)
            )))
        }
    };
    let mut cur = PnmCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader {
            offset: 3,
            reason: format!("zero dimension {width}x{height}"),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader {
            offset: maxval_offset,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let count = width * height * channels;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => {
                return Err(Error::MalformedHeader {
                    offset: cur.pos,
                    reason: "missing whitespace after maxval".into(),
                })
            }
        }
        let wide = maxval > 255;
        let needed = count * if wide { 2 } else { 1 };
        let raster = bytes
            .get(cur.pos..cur.pos + needed)
            .ok_or(Error::MalformedHeader {
                offset: bytes.len(),
                reason: format!(
                    "raster truncated: need {needed} bytes after offset {}",
                    cur.pos
                ),
            })?;
        if wide {
            data.extend(
                raster
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]]) as usize),
            );
        } else {
            data.extend(raster.iter().map(|&b| b as usize));
        }
    } else {
        for _ in 0..count {
            data.push(cur.number("sample")?);
        }
    }
    let mut values = Vec::with_capacity(count);
    for (k, &s) in data.iter().enumerate() {
        if s > maxval {
            return Err(Error::MalformedHeader {
                offset: cur.pos,
                reason: format!("sample {k} = {s} exceeds maxval {maxval}"),
            });
        }
        values.push(s as f64 * scale);
    }
    Image::new(width, height, channels, values)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_err)?;
    if reader.info().bit_depth == png::BitDepth::Sixteen {
        return Err(Error::Unsupported("16-bit PNG".into()));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Unsupported("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Unsupported(format!(
            "PNG bit depth {:?}",
            info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => return Err(Error::Unsupported("unexpanded palette PNG".into())),
    };
    let mut data = Vec::with_capacity(w * h * keep);
    for row in buf.chunks_exact(info.line_size).take(h) {
        for px in row[..w * src_channels].chunks_exact(src_channels) {
            data.extend(px[..keep].iter().map(|&b| f64::from(b) / 255.0));
        }
    }
    Image::new(w, h, keep, data)
}

fn encode_png_raw(
    width: usize,
    height: usize,
    color: png::ColorType,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(data).map_err(png_err)?;
    }
    Ok(out)
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let color = if img.is_gray() {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    };
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    encode_png_raw(img.width(), img.height(), color, None, &bytes)
}

/// Fixed 256-entry palette; id 0 is black and consecutive ids are far apart in hue.
pub fn label_palette() -> [[u8; 3]; 256] {
    let mut pal = [[0u8; 3]; 256];
    for (id, entry) in pal.iter_mut().enumerate().skip(1) {
        // golden-angle hue walk, alternating lightness bands
        let hue = (id as f64 * 137.507_764) % 360.0;
        let light = [0.55, 0.40, 0.70][id % 3];
        *entry = hsl_to_rgb(hue, 0.75, light);
    }
    pal
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    [r, g, b].map(|v| ((v + m).clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Indexed PNG; ids beyond 255 wrap onto the palette.
pub fn encode_label_png(labels: &LabelMap) -> Result<Vec<u8>> {
    let palette: Vec<u8> = label_palette().iter().flatten().copied().collect();
    let data: Vec<u8> = labels.labels().iter().map(|&l| (l % 256) as u8).collect();
    encode_png_raw(
        labels.width(),
        labels.height(),
        png::ColorType::Indexed,
        Some(palette),
        &data,
    )
}

/// Plain PGM (P2) whose samples are the raw segment ids.
pub fn encode_label_pgm(labels: &LabelMap) -> Vec<u8> {
    let maxval = labels.segment_count().saturating_sub(1).clamp(1, 65535);
    let mut out = format!("P2\n{} {}\n{maxval}\n", labels.width(), labels.height()).into_bytes();
    for row in labels.labels().chunks(labels.width()) {
        let line: Vec<String> = row.iter().map(usize::to_string).collect();
        out.extend_from_slice(line.join(" ").as_bytes());
        out.push(b'\n');
    }
    out
}

/// Binary P5 mask: 255 inside segment `id`, 0 elsewhere.
pub fn encode_mask_pgm(labels: &LabelMap, id: usize) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", labels.width(), labels.height()).into_bytes();
    out.extend(
        labels
            .labels()
            .iter()
            .map(|&l| if l == id { 255u8 } else { 0 }),
    );
    out
}

/// Input (as gray or RGB) with a red 1-pixel boundary wherever a 4-neighbor has a different label.
pub fn render_overlay(img: &Image, labels: &LabelMap) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if labels.width() != w || labels.height() != h {
        return Err(Error::SizeMismatch {
            expected: w * h,
            actual: labels.labels().len(),
        });
    }
    let l = labels.labels();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let edge = (x + 1 < w && l[i + 1] != l[i])
                || (x > 0 && l[i - 1] != l[i])
                || (y + 1 < h && l[i + w] != l[i])
                || (y > 0 && l[i - w] != l[i]);
            if edge {
                data.extend_from_slice(&[1.0, 0.0, 0.0]);
            } else if img.is_gray() {
                let v = img.data()[i];
                data.extend_from_slice(&[v, v, v]);
            } else {
                data.extend_from_slice(img.pixel(i));
            }
        }
    }
    Ok(Image::from_parts_unchecked(w, h, 3, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_pgm_scales_by_maxval() {
        let img = decode_image(b"P2\n2 2\n255\n0 255\n255 0\n").unwrap();
        assert!(img.is_gray());
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
        let img = decode_image(b"P2 # comment\n1 2\n# more\n4\n1 4\n").unwrap();
        assert_eq!(img.data(), &[0.25, 1.0]);
    }

    #[test]
    fn plain_ppm_pixel() {
        let img = decode_image(b"P3\n1 1\n255\n51 102 204\n").unwrap();
        assert_eq!(img.channels(), 3);
        let expected = [51.0 / 255.0, 102.0 / 255.0, 204.0 / 255.0];
        for (a, b) in img.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((img.data()[0] - 0.2).abs() < 1e-15);
        assert!((img.data()[1] - 0.4).abs() < 1e-15);
        assert!((img.data()[2] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn binary_16bit_pnm() {
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x00, 0x00]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0]);
    }

    #[test]
    fn encode_bytes() {
        let img = Image::gray(2, 1, vec![0.0, 1.0]).unwrap();
        let bytes = encode_pnm(&img, false);
        assert!(bytes.ends_with(&[0, 255]));
        let half = Image::gray(1, 1, vec![0.5]).unwrap();
        assert_eq!(*encode_pnm(&half, false).last().unwrap(), 128);
    }

    #[test]
    fn header_errors_carry_offsets() {
        match decode_image(b"P5\n2 x\n255\n") {
            Err(Error::MalformedHeader { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        match decode_image(b"P5\n2 2\n255\n\x00") {
            Err(Error::MalformedHeader { reason, .. }) => assert!(reason.contains("truncated")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode_image(b"P2\n1 1\n0\n0\n"),
            Err(Error::MalformedHeader { .. })
        ));
        assert!(matches!(decode_image(b"P7\n"), Err(Error::Unsupported(_))));
        assert!(matches!(
            decode_image(b"GIF89a"),
            Err(Error::MalformedHeader { offset: 0, .. })
        ));
    }

    #[test]
    fn sixteen_bit_png_rejected() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0, 0]).unwrap();
        }
        assert!(matches!(decode_image(&out), Err(Error::Unsupported(_))));
    }

    #[test]
    fn label_png_uses_palette() {
        let lm = LabelMap::new(2, 1, vec![0, 1]).unwrap();
        let png_bytes = encode_label_png(&lm).unwrap();
        let decoded = decode_image(&png_bytes).unwrap();
        assert_eq!(decoded.channels(), 3);
        assert_eq!(&decoded.data()[..3], &[0.0, 0.0, 0.0]);
        assert_ne!(&decoded.data()[3..], &[0.0, 0.0, 0.0]);
        let pal = label_palette();
        let distinct: std::collections::HashSet<_> = pal.iter().collect();
        assert_eq!(distinct.len(), 256);
    }

    #[test]
    fn label_pgm_holds_raw_ids() {
        let lm = LabelMap::new(3, 1, vec![0, 2, 1]).unwrap();
        let text = String::from_utf8(encode_label_pgm(&lm)).unwrap();
        assert_eq!(text, "P2\n3 1\n2\n0 2 1\n");
    }

    #[test]
    fn overlay_marks_boundaries_red() {
        let img = Image::gray(3, 1, vec![0.5; 3]).unwrap();
        let lm = LabelMap::new(3, 1, vec![0, 0, 1]).unwrap();
        let ov = render_overlay(&img, &lm).unwrap();
        assert_eq!(ov.pixel(0), &[0.5, 0.5, 0.5]);
        assert_eq!(ov.pixel(1), &[1.0, 0.0, 0.0]);
        assert_eq!(ov.pixel(2), &[1.0, 0.0, 0.0]);
    }
}
