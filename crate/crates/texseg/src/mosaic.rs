//! Procedural texture-mosaic synthesis with ground-truth labels, used for
//! tests, demos and the comparison harness.
//!
//! A mosaic is a set of rectangular regions that tile the image exactly,
//! each bound to one generator. The generators are chosen so each texture
//! measure has something to discriminate on: oriented sinusoids separate by
//! orientation and frequency, Gaussian noise by second-order statistics,
//! checkerboards by run structure, and synthetic GMRF fields by their
//! interaction weights.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf;
use crate::image::{GrayImage, LabelMap};

/// One region texture generator. Numeric intensity parameters are in grey
/// levels of the target image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `0.5 + amplitude/2 * cos(2 pi f (x cos theta + y sin theta))`,
    /// scaled to the level range. Uses global image coordinates so the
    /// phase is continuous across regions.
    Sinusoid {
        /// Cycles per pixel.
        frequency: f64,
        orientation_deg: f64,
        /// Fraction of the level range, in `(0, 1]`.
        amplitude: f64,
    },
    /// I.i.d. Gaussian intensities, clamped to the level range.
    GaussianNoise { mean: f64, std_dev: f64 },
    /// Alternating cells of the lowest and highest level, on the global
    /// grid.
    Checkerboard { cell: usize },
    /// A synthetic Markov random field with the given interaction weights,
    /// min-max scaled to the level range.
    GmrfField { alpha: [f64; 6], sigma: f64 },
}

/// A rectangle bound to a generator (= class) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosaicSpec {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub seed: u64,
    pub generators: Vec<Generator>,
    pub regions: Vec<Region>,
}

impl MosaicSpec {
    /// A single full-frame region for one generator; the building block for
    /// training reference images.
    pub fn single(
        width: usize,
        height: usize,
        levels: usize,
        seed: u64,
        generator: Generator,
    ) -> Self {
        Self {
            width,
            height,
            levels,
            seed,
            generators: vec![generator],
            regions: vec![Region { x: 0, y: 0, width, height, class_id: 0 }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invalid("mosaic dimensions must be positive".into()));
        }
        if self.levels < 2 {
            return Err(Error::Invalid("mosaic needs at least 2 grey levels".into()));
        }
        if self.generators.is_empty() {
            return Err(Error::Invalid("mosaic needs at least one generator".into()));
        }
        let mut coverage = vec![0u8; self.width * self.height];
        for region in &self.regions {
            if region.class_id >= self.generators.len() {
                return Err(Error::Invalid(format!(
                    "region references generator {} but only {} exist",
                    region.class_id,
                    self.generators.len()
                )));
            }
            if region.width == 0 || region.height == 0 {
                return Err(Error::Invalid("regions must be non-empty".into()));
            }
            if region.x + region.width > self.width || region.y + region.height > self.height {
                return Err(Error::Invalid("region exceeds the mosaic bounds".into()));
            }
            for r in region.y..region.y + region.height {
                for c in region.x..region.x + region.width {
                    coverage[r * self.width + c] += 1;
                }
            }
        }
        if coverage.iter().any(|&c| c > 1) {
            return Err(Error::Invalid("regions overlap".into()));
        }
        if coverage.contains(&0) {
            return Err(Error::Invalid("regions leave gaps".into()));
        }
        Ok(())
    }
}

fn render_region(
    spec: &MosaicSpec,
    region: &Region,
    generator: &Generator,
    rng: &mut ChaCha8Rng,
    pixels: &mut [u16],
) -> Result<()> {
    let levels = spec.levels;
    let max = (levels - 1) as f64;
    match generator {
        Generator::Sinusoid { frequency, orientation_deg, amplitude } => {
            let theta = orientation_deg.to_radians();
            let (sin_t, cos_t) = theta.sin_cos();
            for r in region.y..region.y + region.height {
                for c in region.x..region.x + region.width {
                    let phase = 2.0 * std::f64::consts::PI
                        * frequency
                        * (c as f64 * cos_t + r as f64 * sin_t);
                    let v = 0.5 + 0.5 * amplitude * phase.cos();
                    pixels[r * spec.width + c] = (v * max).round().clamp(0.0, max) as u16;
                }
            }
        }
        Generator::GaussianNoise { mean, std_dev } => {
            for r in region.y..region.y + region.height {
                for c in region.x..region.x + region.width {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = (mean + std_dev * z).round().clamp(0.0, max);
                    pixels[r * spec.width + c] = v as u16;
                }
            }
        }
        Generator::Checkerboard { cell } => {
            if *cell == 0 {
                return Err(Error::Invalid("checkerboard cell size must be >= 1".into()));
            }
            for r in region.y..region.y + region.height {
                for c in region.x..region.x + region.width {
                    let on = ((r / cell) + (c / cell)) % 2 == 1;
                    pixels[r * spec.width + c] = if on { (levels - 1) as u16 } else { 0 };
                }
            }
        }
        Generator::GmrfField { alpha, sigma } => {
            let field = gmrf::synthesize_field(region.height, region.width, alpha, *sigma, rng)?;
            let quantized = GrayImage::from_field(&field, levels)?;
            for r in 0..region.height {
                for c in 0..region.width {
                    pixels[(region.y + r) * spec.width + (region.x + c)] =
                        quantized.get(r, c);
                }
            }
        }
    }
    Ok(())
}

/// Renders the mosaic and its ground-truth label map. Deterministic for a
/// fixed spec: each region draws from its own seed stream, derived from the
/// mosaic seed and the region index.
pub fn synthesize_mosaic(spec: &MosaicSpec) -> Result<(GrayImage, LabelMap)> {
    spec.validate()?;
    let mut pixels = vec![0u16; spec.width * spec.height];
    let mut labels = vec![0u16; spec.width * spec.height];
    for (index, region) in spec.regions.iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(spec.seed ^ (index as u64).wrapping_mul(0x9e3779b97f4a7c15));
        render_region(spec, region, &spec.generators[region.class_id], &mut rng, &mut pixels)?;
        for r in region.y..region.y + region.height {
            for c in region.x..region.x + region.width {
                labels[r * spec.width + c] = region.class_id as u16;
            }
        }
    }
    let image = GrayImage::new(spec.width, spec.height, spec.levels, pixels)?;
    let label_map = LabelMap::new(spec.width, spec.height, spec.generators.len(), labels)?;
    Ok((image, label_map))
}

/// Spec of a full-frame single-texture reference image for one of the
/// mosaic's classes, drawn from an independent seed stream so training data
/// never repeats mosaic pixels. Panics on an out-of-range class.
pub fn reference_spec(
    spec: &MosaicSpec,
    class_id: usize,
    width: usize,
    height: usize,
) -> MosaicSpec {
    MosaicSpec::single(
        width,
        height,
        spec.levels,
        spec.seed ^ 0xa5a5_5a5a_0000_0000 ^ ((class_id as u64) << 32),
        spec.generators[class_id].clone(),
    )
}

/// Renders the reference image described by [`reference_spec`].
pub fn reference_image(
    spec: &MosaicSpec,
    class_id: usize,
    width: usize,
    height: usize,
) -> Result<GrayImage> {
    if class_id >= spec.generators.len() {
        return Err(Error::Invalid(format!("mosaic has no generator {class_id}")));
    }
    Ok(synthesize_mosaic(&reference_spec(spec, class_id, width, height))?.0)
}

/// Built-in mosaic layouts used by the CLI and the comparison harness.
pub fn preset(name: &str, size: usize, seed: u64) -> Result<MosaicSpec> {
    let levels = 256;
    match name {
        // Two vertical bands of orthogonal gratings.
        "two-band" => {
            let generators = vec![
                Generator::Sinusoid { frequency: 0.0884, orientation_deg: 0.0, amplitude: 1.0 },
                Generator::Sinusoid { frequency: 0.0884, orientation_deg: 90.0, amplitude: 1.0 },
            ];
            let half = size / 2;
            let regions = vec![
                Region { x: 0, y: 0, width: half, height: size, class_id: 0 },
                Region { x: half, y: 0, width: size - half, height: size, class_id: 1 },
            ];
            Ok(MosaicSpec { width: size, height: size, levels, seed, generators, regions })
        }
        // Five textures mixing gratings, noise, run structure and a Markov
        // field: two quadrants on top, three columns below.
        "five" => {
            let generators = vec![
                Generator::Sinusoid { frequency: 0.0884, orientation_deg: 0.0, amplitude: 1.0 },
                Generator::Sinusoid { frequency: 0.0884, orientation_deg: 90.0, amplitude: 1.0 },
                Generator::GaussianNoise { mean: 128.0, std_dev: 40.0 },
                Generator::Checkerboard { cell: 4 },
                Generator::GmrfField {
                    alpha: [0.2, -0.15, 0.0, 0.0, 0.08, 0.04],
                    sigma: 1.0,
                },
            ];
            let half_h = size / 2;
            let third = size / 3;
            let regions = vec![
                Region { x: 0, y: 0, width: size / 2, height: half_h, class_id: 0 },
                Region { x: size / 2, y: 0, width: size - size / 2, height: half_h, class_id: 1 },
                Region { x: 0, y: half_h, width: third, height: size - half_h, class_id: 2 },
                Region { x: third, y: half_h, width: third, height: size - half_h, class_id: 3 },
                Region {
                    x: 2 * third,
                    y: half_h,
                    width: size - 2 * third,
                    height: size - half_h,
                    class_id: 4,
                },
            ];
            Ok(MosaicSpec { width: size, height: size, levels, seed, generators, regions })
        }
        // Ten textures on a 2 x 5 grid.
        "ten" => {
            let generators = vec![
                Generator::Sinusoid { frequency: 0.0442, orientation_deg: 0.0, amplitude: 1.0 },
                Generator::Sinusoid { frequency: 0.0442, orientation_deg: 90.0, amplitude: 1.0 },
                Generator::Sinusoid { frequency: 0.1768, orientation_deg: 45.0, amplitude: 1.0 },
                Generator::Sinusoid { frequency: 0.1768, orientation_deg: 135.0, amplitude: 1.0 },
                Generator::GaussianNoise { mean: 96.0, std_dev: 16.0 },
                Generator::GaussianNoise { mean: 160.0, std_dev: 56.0 },
                Generator::Checkerboard { cell: 2 },
                Generator::Checkerboard { cell: 6 },
                Generator::GmrfField {
                    alpha: [0.2, -0.15, 0.0, 0.0, 0.08, 0.04],
                    sigma: 1.0,
                },
                Generator::GmrfField {
                    alpha: [-0.1, 0.3, 0.0, 0.0, 0.02, 0.02],
                    sigma: 1.0,
                },
            ];
            let row_h = size / 2;
            let col_w = size / 5;
            let mut regions = Vec::new();
            for row in 0..2 {
                for col in 0..5 {
                    let x = col * col_w;
                    let y = row * row_h;
                    regions.push(Region {
                        x,
                        y,
                        width: if col == 4 { size - x } else { col_w },
                        height: if row == 1 { size - y } else { row_h },
                        class_id: row * 5 + col,
                    });
                }
            }
            Ok(MosaicSpec { width: size, height: size, levels, seed, generators, regions })
        }
        other => Err(Error::Invalid(format!(
            "unknown mosaic preset '{other}' (expected two-band, five or ten)"
        ))),
    }
}
