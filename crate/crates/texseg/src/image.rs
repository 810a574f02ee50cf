//! Quantized grey-level rasters, label maps and sliding-window iteration.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum grey-level count representable by the `u16` pixel storage.
pub const MAX_LEVELS: usize = 1 << 16;

/// A quantized 2-D grey-level raster. Pixel values are integers in
/// `[0, levels - 1]`, stored row-major. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    levels: usize,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, levels: usize, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("image dimensions must be at least 1x1".into()));
        }
        if !(2..=MAX_LEVELS).contains(&levels) {
            return Err(Error::Invalid(format!(
                "grey-level count must be in [2, {MAX_LEVELS}], got {levels}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Invalid(format!(
                "pixel buffer length {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if let Some(&p) = pixels.iter().find(|&&p| (p as usize) >= levels) {
            return Err(Error::Invalid(format!(
                "pixel value {p} exceeds maximum level {}",
                levels - 1
            )));
        }
        Ok(Self { width, height, levels, pixels })
    }

    /// Image of constant grey level.
    pub fn filled(width: usize, height: usize, levels: usize, value: u16) -> Result<Self> {
        Self::new(width, height, levels, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(row, col)`; values are clamped to the level range.
    pub fn from_fn(
        width: usize,
        height: usize,
        levels: usize,
        mut f: impl FnMut(usize, usize) -> u16,
    ) -> Result<Self> {
        let max = (levels.saturating_sub(1)).min(u16::MAX as usize) as u16;
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c).min(max));
            }
        }
        Self::new(width, height, levels, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        debug_assert!(row < self.height && col < self.width);
        self.pixels[row * self.width + col]
    }

    /// Pixel lookup with a padding policy applied to out-of-range indices.
    /// `Padding::None` requires in-range indices.
    #[inline]
    pub fn get_padded(&self, row: isize, col: isize, padding: Padding) -> u16 {
        let (r, c) = match padding {
            Padding::None => (row as usize, col as usize),
            Padding::Clamp => (clamp_index(row, self.height), clamp_index(col, self.width)),
            Padding::Mirror => (mirror_index(row, self.height), mirror_index(col, self.width)),
        };
        self.get(r, c)
    }

    /// Linearly requantizes to `new_levels` grey levels via
    /// `q = floor(v * new_levels / levels)` clamped to `new_levels - 1`.
    /// The map is monotone and sends 0 to 0 and `levels - 1` to `new_levels - 1`.
    pub fn requantize(&self, new_levels: usize) -> Result<GrayImage> {
        if !(2..=MAX_LEVELS).contains(&new_levels) {
            return Err(Error::Invalid(format!(
                "grey-level count must be in [2, {MAX_LEVELS}], got {new_levels}"
            )));
        }
        let pixels = self
            .pixels
            .iter()
            .map(|&v| {
                let q = (v as u64 * new_levels as u64) / self.levels as u64;
                q.min(new_levels as u64 - 1) as u16
            })
            .collect();
        GrayImage::new(self.width, self.height, new_levels, pixels)
    }

    /// Real-valued view with intensities scaled to `[0, 1]` by `v / (levels - 1)`.
    pub fn to_normalized(&self) -> Array2<f64> {
        let denom = (self.levels - 1) as f64;
        Array2::from_shape_fn((self.height, self.width), |(r, c)| {
            self.get(r, c) as f64 / denom
        })
    }

    /// Quantizes a real-valued field to `levels` grey levels by min-max scaling.
    /// A constant field maps to level 0.
    pub fn from_field(field: &Array2<f64>, levels: usize) -> Result<GrayImage> {
        let (height, width) = field.dim();
        if height == 0 || width == 0 {
            return Err(Error::Invalid("field must be non-empty".into()));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in field.iter() {
            if !v.is_finite() {
                return Err(Error::Invalid("field contains non-finite values".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        let max = (levels - 1) as f64;
        let pixels = field
            .iter()
            .map(|&v| {
                if range == 0.0 {
                    0u16
                } else {
                    (((v - lo) / range * max).round() as usize).min(levels - 1) as u16
                }
            })
            .collect();
        GrayImage::new(width, height, levels, pixels)
    }
}

/// Policy for window pixels that fall outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No padding: windows must lie fully inside the image.
    None,
    /// Out-of-range indices clamp to the nearest edge pixel.
    Clamp,
    /// Out-of-range indices reflect at the border (edge pixel included).
    Mirror,
}

/// Reflects an index into `[0, n)`, duplicating the edge pixel
/// (`-1 -> 0`, `n -> n - 1`). Folds repeatedly, so arbitrary overshoot is fine.
#[inline]
pub fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

#[inline]
pub fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Square sliding-window geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Side length in pixels.
    pub size: usize,
    /// Stride between consecutive window positions.
    pub step: usize,
    pub padding: Padding,
}

impl WindowSpec {
    pub fn new(size: usize, step: usize, padding: Padding) -> Result<Self> {
        if size < 3 {
            return Err(Error::Invalid(format!("window size must be >= 3, got {size}")));
        }
        if step < 1 {
            return Err(Error::Invalid("window step must be >= 1".into()));
        }
        Ok(Self { size, step, padding })
    }

    /// Offset from the window's top-left corner to its nominal center pixel.
    #[inline]
    pub fn center_offset(&self) -> usize {
        self.size / 2
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { size: 32, step: 1, padding: Padding::Mirror }
    }
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Window center positions along one axis of length `dim`.
///
/// Padded iteration places one center every `step` pixels starting at 0;
/// unpadded iteration places centers so the window stays inside the image.
pub fn axis_centers(dim: usize, spec: &WindowSpec) -> Result<Vec<usize>> {
    match spec.padding {
        Padding::None => {
            if spec.size > dim {
                return Err(Error::Invalid(format!(
                    "window size {} exceeds image extent {} without padding",
                    spec.size, dim
                )));
            }
            let off = spec.center_offset();
            Ok((0..=dim - spec.size).step_by(spec.step).map(|tl| tl + off).collect())
        }
        Padding::Clamp | Padding::Mirror => Ok((0..dim).step_by(spec.step).collect()),
    }
}

/// Number of window positions along one axis; matches
/// `ceil((padded_dim - size + 1) / step)` with `padded_dim = dim + size - 1`
/// when padding is in effect.
pub fn axis_window_count(dim: usize, spec: &WindowSpec) -> usize {
    match spec.padding {
        Padding::None => {
            if spec.size > dim {
                0
            } else {
                ceil_div(dim - spec.size + 1, spec.step)
            }
        }
        Padding::Clamp | Padding::Mirror => ceil_div(dim, spec.step),
    }
}

/// Copies the window centered at (`center_r`, `center_c`) into `buf`
/// (row-major, `size * size` entries), applying the padding policy.
pub fn fill_window(
    img: &GrayImage,
    center_r: usize,
    center_c: usize,
    spec: &WindowSpec,
    buf: &mut Vec<u16>,
) {
    let size = spec.size;
    let off = spec.center_offset() as isize;
    buf.clear();
    buf.reserve(size * size);
    for dr in 0..size as isize {
        let r = center_r as isize - off + dr;
        for dc in 0..size as isize {
            let c = center_c as isize - off + dc;
            buf.push(img.get_padded(r, c, spec.padding));
        }
    }
}

/// A materialized window and its center position.
#[derive(Debug, Clone)]
pub struct Window {
    pub center: (usize, usize),
    pub pixels: GrayImage,
}

/// Iterates all window positions of `spec` over `img`, yielding copies of
/// the window contents. Window order is row-major over center positions.
pub fn windows<'a>(
    img: &'a GrayImage,
    spec: &WindowSpec,
) -> Result<impl Iterator<Item = Window> + 'a> {
    let rows = axis_centers(img.height(), spec)?;
    let cols = axis_centers(img.width(), spec)?;
    let spec = *spec;
    Ok(rows.into_iter().flat_map(move |r| {
        let cols = cols.clone();
        let spec = spec;
        cols.into_iter().map(move |c| {
            let mut buf = Vec::new();
            fill_window(img, r, c, &spec, &mut buf);
            Window {
                center: (r, c),
                pixels: GrayImage::new(spec.size, spec.size, img.levels(), buf)
                    .expect("window buffer matches spec dimensions"),
            }
        })
    }))
}

/// Per-pixel class-index raster produced by segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, num_classes: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("label map dimensions must be at least 1x1".into()));
        }
        if num_classes == 0 || num_classes > MAX_LEVELS {
            return Err(Error::Invalid(format!("class count must be in [1, {MAX_LEVELS}]")));
        }
        if labels.len() != width * height {
            return Err(Error::Invalid("label buffer length does not match dimensions".into()));
        }
        if labels.iter().any(|&l| (l as usize) >= num_classes) {
            return Err(Error::Invalid("label value exceeds class count".into()));
        }
        Ok(Self { width, height, num_classes, labels })
    }

    pub fn filled(width: usize, height: usize, num_classes: usize, value: u16) -> Result<Self> {
        Self::new(width, height, num_classes, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        debug_assert!(row < self.height && col < self.width);
        self.labels[row * self.width + col]
    }

    /// Pixels carrying each class, indexed by class id.
    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}
