//! End-to-end driver: train per-class models from reference textures,
//! segment a target with the sliding window, and run the four-method
//! comparison.
//!
//! Training windows are drawn from pure single-texture reference images on
//! a coarse stride; segmentation slides the window densely (step 1 by
//! default) with mirror padding so every pixel gets a label. Window
//! classification is parallelized over disjoint row strips and assembled
//! in order, so the output bytes do not depend on the worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, TrainOptions, TrainedSegmenter};
use crate::error::{Error, Result};
use crate::features::{fmt_f64, Extractor, FeatureSample};
use crate::gabor::{apply_bank, build_bank, EnergyPooler};
use crate::glcm::glcm_feature_vector;
use crate::gmrf::{gmrf_feature_vector, EstimateOptions};
use crate::image::{
    axis_centers, fill_window, GrayImage, LabelMap, Padding, WindowSpec,
};
use crate::io::{
    load_image_native, read_label_map_pgm, write_label_map_pgm, write_label_map_png,
};
use crate::mosaic::{synthesize_mosaic, MosaicSpec};
use crate::quality::{quality_report, QualityReport};
use crate::rlm::rlm_feature_vector;

/// Where an image in a run configuration comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ImageSource {
    File { path: PathBuf },
    Mosaic { spec: MosaicSpec },
}

impl ImageSource {
    /// Loads or synthesizes the image; mosaic sources also yield their
    /// ground-truth labels.
    pub fn resolve(&self) -> Result<(GrayImage, Option<LabelMap>)> {
        match self {
            ImageSource::File { path } => Ok((load_image_native(path)?, None)),
            ImageSource::Mosaic { spec } => {
                let (img, labels) = synthesize_mosaic(spec)?;
                Ok((img, Some(labels)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSource {
    pub class_id: usize,
    pub source: ImageSource,
}

/// Declarative description of a run, also the schema of `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub extractors: Vec<Extractor>,
    pub window: WindowSpec,
    /// Grey-level count for the co-occurrence and run-length paths.
    pub levels: usize,
    /// Stride for sampling training windows from reference images.
    pub train_step: usize,
    pub diagonal_covariance: bool,
    /// Enables the GMRF ridge fallback for degenerate windows.
    pub ridge: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub training: Vec<TrainingSource>,
    pub target: Option<ImageSource>,
    /// Ground-truth label map for file targets (mosaic targets carry their
    /// own).
    pub truth: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            extractors: Extractor::COMPARED.to_vec(),
            window: WindowSpec::default(),
            levels: 32,
            train_step: 8,
            diagonal_covariance: false,
            ridge: false,
            seed: 0,
            out_dir: PathBuf::from("out"),
            training: Vec::new(),
            target: None,
            truth: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("bad run config: {e}")))
    }

    /// A self-contained synthetic run: the mosaic is the target and one
    /// full-frame reference per class (independent seed streams) trains the
    /// classifier.
    pub fn for_mosaic(spec: MosaicSpec, extractors: Vec<Extractor>, out_dir: PathBuf) -> Self {
        let training = (0..spec.generators.len())
            .map(|class_id| TrainingSource {
                class_id,
                source: ImageSource::Mosaic {
                    spec: crate::mosaic::reference_spec(
                        &spec,
                        class_id,
                        spec.width,
                        spec.height,
                    ),
                },
            })
            .collect();
        Self {
            extractors,
            seed: spec.seed,
            training,
            target: Some(ImageSource::Mosaic { spec }),
            out_dir,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Invalid("levels must be >= 2".into()));
        }
        if self.train_step < 1 {
            return Err(Error::Invalid("train step must be >= 1".into()));
        }
        if self.extractors.is_empty() {
            return Err(Error::Invalid("at least one extractor required".into()));
        }
        Ok(())
    }
}

fn with_context(err: Error, context: &str) -> Error {
    match err {
        Error::Io(e) => Error::Format(format!("{context}: {e}")),
        Error::Format(m) => Error::Format(format!("{context}: {m}")),
        Error::Invalid(m) => Error::Invalid(format!("{context}: {m}")),
        Error::Degenerate(m) => Error::Degenerate(format!("{context}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{context}: {m}")),
    }
}

/// Extracts one feature vector per window position of `grid` over `img`.
///
/// The co-occurrence and run-length paths see the image requantized to
/// `levels`; the Markov-field and Gabor paths see the full-range
/// intensities normalized to `[0, 1]`. Gabor filters the whole image once
/// and pools window energies from the response stack.
pub fn extract_features(
    img: &GrayImage,
    extractor: Extractor,
    grid: &WindowSpec,
    levels: usize,
    ridge: bool,
) -> Result<Vec<FeatureSample>> {
    let rows = axis_centers(img.height(), grid)?;
    let cols = axis_centers(img.width(), grid)?;

    match extractor {
        Extractor::Gabor => {
            let bank = build_bank(img.height(), img.width())?;
            let stack = apply_bank(&img.to_normalized(), &bank)?;
            let pooler = EnergyPooler::new(&stack, grid);
            Ok(rows
                .par_iter()
                .flat_map_iter(|&r| {
                    let pooler = &pooler;
                    cols.iter().map(move |&c| FeatureSample {
                        row: r,
                        col: c,
                        values: pooler.feature(r, c),
                    })
                })
                .collect())
        }
        Extractor::Glcm | Extractor::GlcmAveraged | Extractor::Rlm => {
            let quantized = img.requantize(levels)?;
            let averaged = extractor == Extractor::GlcmAveraged;
            rows.par_iter()
                .map(|&r| {
                    let mut buf = Vec::new();
                    let mut out = Vec::with_capacity(cols.len());
                    for &c in &cols {
                        fill_window(&quantized, r, c, grid, &mut buf);
                        let window =
                            GrayImage::new(grid.size, grid.size, levels, buf.clone())?;
                        let fv = match extractor {
                            Extractor::Rlm => rlm_feature_vector(&window)?,
                            _ => glcm_feature_vector(&window, 1, averaged)?,
                        };
                        out.push(FeatureSample { row: r, col: c, values: fv.values });
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()
                .map(|nested| nested.into_iter().flatten().collect())
        }
        Extractor::Gmrf => {
            let options = EstimateOptions { ridge };
            rows.par_iter()
                .map(|&r| {
                    let mut buf = Vec::new();
                    let mut out = Vec::with_capacity(cols.len());
                    for &c in &cols {
                        fill_window(img, r, c, grid, &mut buf);
                        let window =
                            GrayImage::new(grid.size, grid.size, img.levels(), buf.clone())?;
                        let fv = gmrf_feature_vector(&window, options)?;
                        out.push(FeatureSample { row: r, col: c, values: fv.values });
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()
                .map(|nested| nested.into_iter().flatten().collect())
        }
    }
}

/// A trained model plus the extraction parameters it was built with.
/// Segmenting with mismatched parameters is a hard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub extractor: Extractor,
    pub window_size: usize,
    pub levels: usize,
    pub ridge: bool,
    pub segmenter: TrainedSegmenter,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl ModelFile {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("model serialization failed: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("bad model file: {e}")))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                model.version
            )));
        }
        Ok(model)
    }
}

/// Trains one extractor's model from already-resolved reference images.
pub fn train_from_images(
    images: &[(usize, GrayImage)],
    extractor: Extractor,
    cfg: &RunConfig,
) -> Result<ModelFile> {
    let mut class_ids: Vec<usize> = images.iter().map(|(c, _)| *c).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::Invalid("training needs at least 2 classes".into()));
    }
    if *class_ids.last().unwrap() != class_ids.len() - 1 {
        return Err(Error::Invalid("class ids must be contiguous from 0".into()));
    }

    let grid = WindowSpec {
        size: cfg.window.size,
        step: cfg.train_step,
        padding: Padding::None,
    };
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for (class_id, img) in images {
        if img.width() < grid.size || img.height() < grid.size {
            return Err(Error::Invalid(format!(
                "training image for class {class_id} is {}x{}, smaller than the {} px window",
                img.width(),
                img.height(),
                grid.size
            )));
        }
        let samples = extract_features(img, extractor, &grid, cfg.levels, cfg.ridge)
            .map_err(|e| {
                with_context(e, &format!("training class {class_id} with {extractor}"))
            })?;
        for s in samples {
            vectors.push(s.values);
            labels.push(*class_id);
        }
    }
    let options = TrainOptions {
        diagonal_covariance: cfg.diagonal_covariance,
        ..TrainOptions::default()
    };
    let segmenter = classifier::train(&vectors, &labels, options)
        .map_err(|e| with_context(e, &format!("training {extractor}")))?;
    Ok(ModelFile {
        version: MODEL_FORMAT_VERSION,
        extractor,
        window_size: cfg.window.size,
        levels: cfg.levels,
        ridge: cfg.ridge,
        segmenter,
    })
}

fn resolve_training(cfg: &RunConfig) -> Result<Vec<(usize, GrayImage)>> {
    cfg.training
        .iter()
        .map(|t| {
            let (img, _) = t
                .source
                .resolve()
                .map_err(|e| with_context(e, &format!("training class {}", t.class_id)))?;
            Ok((t.class_id, img))
        })
        .collect()
}

/// Trains and writes `model_<extractor>.json` for every configured
/// extractor; returns the written paths.
pub fn train_command(cfg: &RunConfig) -> Result<Vec<(Extractor, PathBuf)>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let images = resolve_training(cfg)?;
    let mut written = Vec::new();
    for &extractor in &cfg.extractors {
        let model = train_from_images(&images, extractor, cfg)?;
        let path = cfg.out_dir.join(format!("model_{}.json", extractor.name()));
        model.save(&path)?;
        written.push((extractor, path));
    }
    echo_config(cfg)?;
    Ok(written)
}

/// Dense (or strided) sliding-window segmentation of `img` with a trained
/// model. Returns the per-pixel label map and the window-center feature
/// samples. With a step above 1, pixels take the label of their nearest
/// window center.
pub fn segment_image(
    img: &GrayImage,
    model: &ModelFile,
    step: usize,
) -> Result<(LabelMap, Vec<FeatureSample>)> {
    let grid = WindowSpec { size: model.window_size, step, padding: Padding::Mirror };
    let samples = extract_features(img, model.extractor, &grid, model.levels, model.ridge)?;
    let classes: Vec<u16> = samples
        .par_iter()
        .map(|s| model.segmenter.classify(&s.values).map(|(c, _)| c as u16))
        .collect::<Result<_>>()?;

    let rows = axis_centers(img.height(), &grid)?;
    let cols = axis_centers(img.width(), &grid)?;
    let nearest = |centers: &[usize], x: usize| -> usize {
        // Centers are 0, step, 2*step, ...: divide and round.
        let idx = (x + step / 2) / step;
        idx.min(centers.len() - 1)
    };
    let mut labels = vec![0u16; img.width() * img.height()];
    for r in 0..img.height() {
        let ri = nearest(&rows, r);
        for c in 0..img.width() {
            let ci = nearest(&cols, c);
            labels[r * img.width() + c] = classes[ri * cols.len() + ci];
        }
    }
    let map = LabelMap::new(
        img.width(),
        img.height(),
        model.segmenter.num_classes(),
        labels,
    )?;
    Ok((map, samples))
}

/// Everything a segmentation run produced.
pub struct SegmentOutcome {
    pub labels: LabelMap,
    pub report: Option<QualityReport>,
    pub label_path: PathBuf,
    pub report_path: Option<PathBuf>,
}

fn resolve_target(cfg: &RunConfig) -> Result<(GrayImage, Option<LabelMap>)> {
    let target = cfg
        .target
        .as_ref()
        .ok_or_else(|| Error::Invalid("no target image configured".into()))?;
    let (img, mosaic_truth) = target.resolve()?;
    let truth = match (&cfg.truth, mosaic_truth) {
        (Some(path), _) => Some(read_label_map_pgm(path)?),
        (None, truth) => truth,
    };
    if let Some(t) = &truth {
        if t.width() != img.width() || t.height() != img.height() {
            return Err(Error::Invalid(
                "ground-truth label map does not match the target dimensions".into(),
            ));
        }
    }
    Ok((img, truth))
}

/// Segments the configured target with a previously trained model, writing
/// `labels_<extractor>.pgm` (plus a viewing PNG) and, when ground truth is
/// available, `report_<extractor>.csv` and a text summary.
pub fn segment_command(cfg: &RunConfig, model: &ModelFile) -> Result<SegmentOutcome> {
    cfg.validate()?;
    if !cfg.extractors.contains(&model.extractor) {
        return Err(Error::Invalid(format!(
            "configured extractors {:?} do not include the model's {}",
            cfg.extractors.iter().map(|e| e.name()).collect::<Vec<_>>(),
            model.extractor.name()
        )));
    }
    if cfg.window.size != model.window_size {
        return Err(Error::Invalid(format!(
            "window size {} does not match the model's {}",
            cfg.window.size, model.window_size
        )));
    }
    if cfg.levels != model.levels {
        return Err(Error::Invalid(format!(
            "levels {} do not match the model's {}",
            cfg.levels, model.levels
        )));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let (img, truth) = resolve_target(cfg)?;
    let (labels, samples) = segment_image(&img, model, cfg.window.step)?;

    let name = model.extractor.name();
    let label_path = cfg.out_dir.join(format!("labels_{name}.pgm"));
    write_label_map_pgm(&labels, &label_path)?;
    write_label_map_png(&labels, cfg.out_dir.join(format!("labels_{name}.png")))?;

    let (report, report_path) = match &truth {
        Some(truth) => {
            let report = quality_report(&labels, truth, &samples, &samples)?;
            let path = cfg.out_dir.join(format!("report_{name}.csv"));
            report.write_csv(&path)?;
            std::fs::write(
                cfg.out_dir.join(format!("report_{name}.txt")),
                report.to_string(),
            )?;
            (Some(report), Some(path))
        }
        None => (None, None),
    };
    echo_config(cfg)?;
    Ok(SegmentOutcome { labels, report, label_path, report_path })
}

/// One extractor's line in the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub extractor: Extractor,
    pub per_class: Vec<Option<f64>>,
    pub total_distance: Option<f64>,
    pub pixel_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub num_classes: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// Table-shaped CSV: one row per extractor with per-texture distances,
    /// the total, the pixel accuracy and a status column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("extractor");
        for c in 0..self.num_classes {
            out.push_str(&format!(",texture_{c}"));
        }
        out.push_str(",total_distance,pixel_accuracy,status\n");
        for row in &self.rows {
            out.push_str(row.extractor.name());
            for c in 0..self.num_classes {
                out.push(',');
                if let Some(Some(b)) = row.per_class.get(c) {
                    out.push_str(&fmt_f64(*b));
                }
            }
            out.push(',');
            if let Some(t) = row.total_distance {
                out.push_str(&fmt_f64(t));
            }
            out.push(',');
            if let Some(a) = row.pixel_accuracy {
                out.push_str(&fmt_f64(a));
            }
            out.push(',');
            match &row.error {
                None => out.push_str("ok"),
                Some(e) => out.push_str(&e.replace([',', '\n'], ";")),
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Reads back a comparison CSV written by [`ComparisonTable::write_csv`].
pub fn read_comparison_csv(path: impl AsRef<Path>) -> Result<ComparisonTable> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("comparison CSV is empty".into()))?;
    let cols = header.split(',').count();
    if cols < 4 {
        return Err(Error::Format("comparison CSV needs at least 4 columns".into()));
    }
    let num_classes = cols - 4;
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(Error::Format("comparison CSV row width mismatch".into()));
        }
        let parse_opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Format(format!("bad number '{s}'")))
            }
        };
        let per_class = cells[1..1 + num_classes]
            .iter()
            .map(|s| parse_opt(s))
            .collect::<Result<Vec<_>>>()?;
        let status = cells[cols - 1];
        rows.push(ComparisonRow {
            extractor: cells[0].parse()?,
            per_class,
            total_distance: parse_opt(cells[cols - 3])?,
            pixel_accuracy: parse_opt(cells[cols - 2])?,
            error: if status == "ok" { None } else { Some(status.to_string()) },
        });
    }
    Ok(ComparisonTable { num_classes, rows })
}

fn echo_config(cfg: &RunConfig) -> Result<()> {
    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Format(format!("config echo failed: {e}")))?;
    std::fs::write(cfg.out_dir.join("run_config_echo.json"), json)?;
    Ok(())
}

/// Runs train + segment + quality for every configured extractor on the
/// same data, writing label maps, per-extractor reports, `comparison.csv`,
/// a config echo and per-extractor wall-clock timings (`timings.txt`, kept
/// out of the CSV so the CSV stays byte-deterministic). Per-extractor
/// failures are recorded in the table; remaining extractors still run.
pub fn compare_command(cfg: &RunConfig) -> Result<ComparisonTable> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let (img, truth) = resolve_target(cfg)?;
    let truth = truth.ok_or_else(|| {
        Error::Invalid("compare requires ground truth (mosaic target or truth labels)".into())
    })?;
    let images = resolve_training(cfg)?;
    let num_classes = truth.num_classes();

    let mut rows = Vec::new();
    let mut timings = String::new();
    for &extractor in &cfg.extractors {
        let started = Instant::now();
        let outcome: Result<(QualityReport, LabelMap)> = (|| {
            let model = train_from_images(&images, extractor, cfg)?;
            model.save(cfg.out_dir.join(format!("model_{}.json", extractor.name())))?;
            let (labels, samples) = segment_image(&img, &model, cfg.window.step)?;
            let report = quality_report(&labels, &truth, &samples, &samples)?;
            Ok((report, labels))
        })();
        let elapsed = started.elapsed();
        timings.push_str(&format!(
            "{}: {:.1} ms\n",
            extractor.name(),
            elapsed.as_secs_f64() * 1e3
        ));
        match outcome {
            Ok((report, labels)) => {
                let name = extractor.name();
                write_label_map_pgm(&labels, cfg.out_dir.join(format!("labels_{name}.pgm")))?;
                write_label_map_png(&labels, cfg.out_dir.join(format!("labels_{name}.png")))?;
                report.write_csv(cfg.out_dir.join(format!("report_{name}.csv")))?;
                std::fs::write(
                    cfg.out_dir.join(format!("report_{name}.txt")),
                    report.to_string(),
                )?;
                rows.push(ComparisonRow {
                    extractor,
                    per_class: report.per_class.clone(),
                    total_distance: Some(report.total_distance),
                    pixel_accuracy: Some(report.pixel_accuracy),
                    error: None,
                });
            }
            Err(e) => rows.push(ComparisonRow {
                extractor,
                per_class: vec![None; num_classes],
                total_distance: None,
                pixel_accuracy: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let table = ComparisonTable { num_classes, rows };
    table.write_csv(cfg.out_dir.join("comparison.csv"))?;
    std::fs::write(cfg.out_dir.join("timings.txt"), timings)?;
    echo_config(cfg)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mosaic::preset;
    use tempfile::tempdir;

    fn quick_cfg(extractors: Vec<Extractor>, out_dir: PathBuf) -> RunConfig {
        let spec = preset("two-band", 96, 5).unwrap();
        let mut cfg = RunConfig::for_mosaic(spec, extractors, out_dir);
        cfg.window = WindowSpec { size: 16, step: 4, padding: Padding::Mirror };
        cfg.train_step = 8;
        cfg
    }

    #[test]
    fn train_writes_model_files_with_expected_shape() {
        let dir = tempdir().unwrap();
        let cfg = quick_cfg(vec![Extractor::Gabor], dir.path().to_path_buf());
        let written = train_command(&cfg).unwrap();
        assert_eq!(written.len(), 1);
        let model = ModelFile::load(&written[0].1).unwrap();
        assert_eq!(model.extractor, Extractor::Gabor);
        assert_eq!(model.segmenter.num_classes(), 2);
        assert_eq!(model.segmenter.dim, 20);
    }

    #[test]
    fn five_class_glcm_model_shape() {
        let dir = tempdir().unwrap();
        let spec = preset("five", 96, 2).unwrap();
        let mut cfg =
            RunConfig::for_mosaic(spec, vec![Extractor::Glcm], dir.path().to_path_buf());
        cfg.window.size = 16;
        cfg.train_step = 16;
        let written = train_command(&cfg).unwrap();
        let model = ModelFile::load(&written[0].1).unwrap();
        assert_eq!(model.segmenter.num_classes(), 5);
        assert_eq!(model.segmenter.dim, 32);
    }

    #[test]
    fn training_image_smaller_than_window_names_the_class() {
        let dir = tempdir().unwrap();
        let mut cfg = quick_cfg(vec![Extractor::Rlm], dir.path().to_path_buf());
        // Shrink class 1's reference below the window size.
        if let ImageSource::Mosaic { spec } = &mut cfg.training[1].source {
            spec.width = 8;
            spec.height = 8;
            spec.regions[0].width = 8;
            spec.regions[0].height = 8;
        }
        let err = train_command(&cfg).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
    }

    #[test]
    fn segment_rejects_mismatched_window_or_levels() {
        let dir = tempdir().unwrap();
        let cfg = quick_cfg(vec![Extractor::Rlm], dir.path().to_path_buf());
        let written = train_command(&cfg).unwrap();
        let model = ModelFile::load(&written[0].1).unwrap();

        let mut bad = cfg.clone();
        bad.window.size = 24;
        assert!(segment_command(&bad, &model).is_err());
        let mut bad_levels = cfg.clone();
        bad_levels.levels = 16;
        assert!(segment_command(&bad_levels, &model).is_err());
        let mut bad_extractor = cfg.clone();
        bad_extractor.extractors = vec![Extractor::Gabor];
        assert!(segment_command(&bad_extractor, &model).is_err());
    }

    #[test]
    fn label_map_matches_input_dimensions() {
        let dir = tempdir().unwrap();
        let cfg = quick_cfg(vec![Extractor::Glcm], dir.path().to_path_buf());
        let written = train_command(&cfg).unwrap();
        let model = ModelFile::load(&written[0].1).unwrap();
        let outcome = segment_command(&cfg, &model).unwrap();
        assert_eq!(outcome.labels.width(), 96);
        assert_eq!(outcome.labels.height(), 96);
        assert!(outcome.report.is_some());
        assert!(outcome.label_path.exists());
        assert!(outcome.report_path.as_ref().unwrap().exists());
    }

    #[test]
    fn comparison_csv_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("comparison.csv");
        let table = ComparisonTable {
            num_classes: 3,
            rows: vec![
                ComparisonRow {
                    extractor: Extractor::Glcm,
                    per_class: vec![Some(0.5), None, Some(1.25e-3)],
                    total_distance: Some(0.50125),
                    pixel_accuracy: Some(0.93),
                    error: None,
                },
                ComparisonRow {
                    extractor: Extractor::Gmrf,
                    per_class: vec![None, None, None],
                    total_distance: None,
                    pixel_accuracy: None,
                    error: Some("singular normal matrix".into()),
                },
            ],
        };
        table.write_csv(&path).unwrap();
        let back = read_comparison_csv(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn self_segmentation_recovers_the_training_class() {
        // Segmenting a fresh sample of a training texture by its own model
        // labels nearly all pixels with that class (border band of one
        // window radius excluded).
        let dir = tempdir().unwrap();
        let cfg = quick_cfg(vec![Extractor::Glcm], dir.path().to_path_buf());
        let written = train_command(&cfg).unwrap();
        let model = ModelFile::load(&written[0].1).unwrap();

        let spec = preset("two-band", 96, 5).unwrap();
        for class in 0..2usize {
            let mut reference = crate::mosaic::reference_spec(&spec, class, 96, 96);
            reference.seed ^= 0xdead_beef;
            let (img, _) = crate::mosaic::synthesize_mosaic(&reference).unwrap();
            let (labels, _) = segment_image(&img, &model, 1).unwrap();
            let truth = LabelMap::filled(96, 96, 2, class as u16).unwrap();
            let band = model.window_size / 2;
            let acc = crate::quality::interior_accuracy(&labels, &truth, band);
            assert!(acc >= 0.99, "class {class} self-segmentation accuracy {acc}");
        }
    }

    #[test]
    fn strided_segmentation_fills_every_pixel() {
        let dir = tempdir().unwrap();
        let mut cfg = quick_cfg(vec![Extractor::Rlm], dir.path().to_path_buf());
        cfg.window.step = 5;
        let written = train_command(&cfg).unwrap();
        let model = ModelFile::load(&written[0].1).unwrap();
        let (img, _) = cfg.target.as_ref().unwrap().resolve().unwrap();
        let (labels, samples) = segment_image(&img, &model, 5).unwrap();
        assert_eq!(labels.width(), img.width());
        assert_eq!(labels.height(), img.height());
        // 96 / 5 centers per axis, rounded up.
        assert_eq!(samples.len(), 20 * 20);
    }

    #[test]
    fn averaged_glcm_variant_runs_end_to_end() {
        let dir = tempdir().unwrap();
        let cfg = quick_cfg(vec![Extractor::GlcmAveraged], dir.path().to_path_buf());
        let written = train_command(&cfg).unwrap();
        let model = ModelFile::load(&written[0].1).unwrap();
        assert_eq!(model.segmenter.dim, 8);
        let outcome = segment_command(&cfg, &model).unwrap();
        assert!(outcome.label_path.ends_with("labels_glcm_averaged.pgm"));
    }

    #[test]
    fn compare_isolates_per_extractor_failures() {
        // Without the ridge fallback, GMRF windows on a pure grating are
        // singular; the comparison must record that and still finish the
        // other extractors.
        let dir = tempdir().unwrap();
        let mut cfg = quick_cfg(
            vec![Extractor::Gmrf, Extractor::Rlm],
            dir.path().to_path_buf(),
        );
        cfg.ridge = false;
        let table = compare_command(&cfg).unwrap();
        assert_eq!(table.rows.len(), 2);
        let gmrf_row = &table.rows[0];
        assert!(gmrf_row.error.as_deref().unwrap_or("").contains("singular"));
        let rlm_row = &table.rows[1];
        assert!(rlm_row.error.is_none());
        assert!(rlm_row.pixel_accuracy.unwrap() > 0.5);
        // The failed extractor appears in the CSV with its status.
        let parsed = read_comparison_csv(cfg.out_dir.join("comparison.csv")).unwrap();
        assert_eq!(parsed, table);
    }
}
