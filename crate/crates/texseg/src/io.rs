//! PGM (P2/P5) and 8-bit grayscale PNG readers plus label-map writers.
//!
//! PGM is the canonical lossless interchange format; PNG is accepted on
//! input for convenience. Label maps are written as PGM with pixel value
//! equal to the class index, and optionally as a color-mapped PNG for
//! viewing.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayImage, LabelMap, MAX_LEVELS};

/// Raw PGM contents before requantization.
#[derive(Debug)]
pub struct RawPgm {
    pub width: usize,
    pub height: usize,
    pub maxval: usize,
    pub samples: Vec<u16>,
}

/// Parses a P2 (ASCII) or P5 (binary) PGM byte stream.
pub fn parse_pgm(data: &[u8]) -> Result<RawPgm> {
    if data.len() < 2 {
        return Err(Error::Format("file too short for a PGM header".into()));
    }
    let magic = &data[..2];
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(Error::Format("not a PGM file (expected P2 or P5 magic)".into())),
    };

    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        *slot = read_header_number(data, &mut pos)?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM dimensions must be positive".into()));
    }
    if maxval == 0 || maxval > 65_535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range [1, 65535]")));
    }

    let count = width * height;
    let samples = if binary {
        // Exactly one whitespace byte separates the header from raster data.
        pos += 1;
        let wide = maxval > 255;
        let bytes_needed = count * if wide { 2 } else { 1 };
        let raster = data
            .get(pos..pos + bytes_needed)
            .ok_or_else(|| Error::Format("PGM raster data truncated".into()))?;
        if wide {
            raster
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect()
        } else {
            raster.iter().map(|&b| b as u16).collect()
        }
    } else {
        let mut samples = Vec::with_capacity(count);
        while samples.len() < count {
            samples.push(read_header_number(data, &mut pos)? as u16);
        }
        samples
    };

    if let Some(&s) = samples.iter().find(|&&s| s as usize > maxval) {
        return Err(Error::Format(format!("PGM sample {s} exceeds maxval {maxval}")));
    }
    Ok(RawPgm { width, height, maxval, samples })
}

fn read_header_number(data: &[u8], pos: &mut usize) -> Result<usize> {
    // Skip whitespace and '#' comments.
    loop {
        match data.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = data.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::Format("unexpected end of PGM header".into())),
        }
    }
    let start = *pos;
    while matches!(data.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::Format("expected a number in PGM header".into()));
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("malformed number in PGM header".into()))
}

/// Loads a PGM (P2/P5) or 8-bit grayscale PNG and linearly requantizes the
/// samples from the source depth to `[0, levels - 1]` via
/// `floor(v * levels / (maxval + 1))`.
pub fn load_image(path: impl AsRef<Path>, levels: usize) -> Result<GrayImage> {
    let path = path.as_ref();
    if !(2..=MAX_LEVELS).contains(&levels) {
        return Err(Error::Invalid(format!("grey-level count must be in [2, {MAX_LEVELS}]")));
    }
    let data = fs::read(path)?;
    let raw = if data.starts_with(b"P2") || data.starts_with(b"P5") {
        parse_pgm(&data)?
    } else if data.starts_with(&[0x89, b'P', b'N', b'G']) {
        parse_png_gray(&data)?
    } else {
        return Err(Error::Format(format!(
            "{}: unsupported format (expected PGM P2/P5 or 8-bit grayscale PNG)",
            path.display()
        )));
    };
    let source_levels = raw.maxval + 1;
    let full = GrayImage::new(raw.width, raw.height, source_levels, raw.samples)?;
    full.requantize(levels)
}

/// Loads a PGM or PNG at its native bit depth (`levels = maxval + 1`),
/// without requantization.
pub fn load_image_native(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let data = fs::read(path)?;
    let raw = if data.starts_with(b"P2") || data.starts_with(b"P5") {
        parse_pgm(&data)?
    } else if data.starts_with(&[0x89, b'P', b'N', b'G']) {
        parse_png_gray(&data)?
    } else {
        return Err(Error::Format(format!(
            "{}: unsupported format (expected PGM P2/P5 or 8-bit grayscale PNG)",
            path.display()
        )));
    };
    GrayImage::new(raw.width, raw.height, raw.maxval + 1, raw.samples)
}

fn parse_png_gray(data: &[u8]) -> Result<RawPgm> {
    let img = image::load_from_memory_with_format(data, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG decode failed: {e}")))?;
    match img {
        image::DynamicImage::ImageLuma8(luma) => Ok(RawPgm {
            width: luma.width() as usize,
            height: luma.height() as usize,
            maxval: 255,
            samples: luma.into_raw().into_iter().map(|b| b as u16).collect(),
        }),
        other => Err(Error::Format(format!(
            "unsupported PNG color type {:?} (only 8-bit grayscale is accepted)",
            other.color()
        ))),
    }
}

/// Writes a grey image as PGM; binary P5 by default, ASCII P2 on request.
/// Maxval is `levels - 1`, so the stored samples are the raw quantized levels.
pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>, ascii: bool) -> Result<()> {
    let maxval = img.levels() - 1;
    if maxval > 65_535 {
        return Err(Error::Invalid("PGM supports at most 65536 grey levels".into()));
    }
    let mut out = Vec::new();
    if ascii {
        write!(out, "P2\n{} {}\n{}\n", img.width(), img.height(), maxval)?;
        for r in 0..img.height() {
            let row: Vec<String> =
                (0..img.width()).map(|c| img.get(r, c).to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    } else {
        write!(out, "P5\n{} {}\n{}\n", img.width(), img.height(), maxval)?;
        if maxval > 255 {
            for &p in img.pixels() {
                out.extend_from_slice(&p.to_be_bytes());
            }
        } else {
            out.extend(img.pixels().iter().map(|&p| p as u8));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a label map as PGM with pixel value = class index.
pub fn write_label_map_pgm(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let levels = labels.num_classes().max(2);
    let img = GrayImage::new(
        labels.width(),
        labels.height(),
        levels,
        labels.labels().to_vec(),
    )?;
    write_pgm(&img, path, false)
}

/// Reads back a label-map PGM written by [`write_label_map_pgm`].
pub fn read_label_map_pgm(path: impl AsRef<Path>) -> Result<LabelMap> {
    let data = fs::read(path)?;
    let raw = parse_pgm(&data)?;
    LabelMap::new(raw.width, raw.height, raw.maxval + 1, raw.samples)
}

/// Fixed palette used for the viewing PNG; classes cycle through it.
const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [255, 255, 255],
    [0, 0, 0],
];

/// Writes a color-mapped PNG of the label map for viewing.
pub fn write_label_map_png(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = image::RgbImage::new(labels.width() as u32, labels.height() as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let class = labels.get(y as usize, x as usize) as usize;
        *px = image::Rgb(PALETTE[class % PALETTE.len()]);
    }
    buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("PNG encode failed: {e}")))?;
    Ok(())
}
