//! Segmentation-quality assessment via the Bhattacharyya distance between
//! segmented and reference texture statistics, plus pixel accuracy and a
//! confusion matrix.
//!
//! For Gaussian region statistics `(mu_1, Sigma_1)` and `(mu_2, Sigma_2)`,
//! with `M = (Sigma_1 + Sigma_2) / 2`:
//!
//! `B = (mu_1 - mu_2)^T M^{-1} (mu_1 - mu_2) / 8
//!    + ln(|M| / sqrt(|Sigma_1| |Sigma_2|)) / 2`
//!
//! The distance is zero exactly when the two distributions coincide, and
//! with equal covariances it reduces to one eighth of the squared
//! Mahalanobis distance between the means. Determinants are evaluated in
//! the log domain through Cholesky factors so large feature dimensions do
//! not overflow.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::classifier::{regularize, TrainOptions};
use crate::error::{Error, Result};
use crate::features::{fmt_f64, FeatureSample};
use crate::image::LabelMap;

/// Sample mean and covariance of one region's feature vectors.
#[derive(Debug, Clone)]
pub struct RegionStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub count: usize,
}

/// Fits region statistics from raw vectors, applying the same covariance
/// regularization as the classifier.
pub fn stats_from_vectors(vectors: &[&[f64]]) -> Result<RegionStats> {
    if vectors.len() < 2 {
        return Err(Error::Degenerate(format!(
            "region statistics need at least 2 samples, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    let n = vectors.len();
    let mut mu = DVector::zeros(dim);
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Invalid("inconsistent feature dimensions".into()));
        }
        for (i, x) in v.iter().enumerate() {
            mu[i] += x;
        }
    }
    mu /= n as f64;
    let mut sigma = DMatrix::zeros(dim, dim);
    for v in vectors {
        let d = DVector::from_iterator(dim, v.iter().enumerate().map(|(i, x)| x - mu[i]));
        sigma.syger(1.0, &d, &d, 1.0);
    }
    sigma /= (n - 1) as f64;
    for i in 0..dim {
        for j in i + 1..dim {
            sigma[(i, j)] = sigma[(j, i)];
        }
    }
    regularize(&mut sigma, &TrainOptions::default());
    Ok(RegionStats { mu, sigma, count: n })
}

/// Statistics of the feature samples whose window center carries `class_id`
/// in the label map.
pub fn region_stats(
    samples: &[FeatureSample],
    labels: &LabelMap,
    class_id: usize,
) -> Result<RegionStats> {
    let members: Vec<&[f64]> = samples
        .iter()
        .filter(|s| labels.get(s.row, s.col) as usize == class_id)
        .map(|s| s.values.as_slice())
        .collect();
    if members.len() < 2 {
        return Err(Error::Degenerate(format!(
            "class {class_id} has {} member windows; at least 2 are required",
            members.len()
        )));
    }
    stats_from_vectors(&members)
}

fn log_det_cholesky(m: &DMatrix<f64>, what: &str) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let chol = m.clone().cholesky().ok_or_else(|| {
        Error::Numerical(format!("{what} is not positive definite"))
    })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((chol, log_det))
}

/// Bhattacharyya distance between two Gaussian region statistics.
pub fn bhattacharyya(a: &RegionStats, b: &RegionStats) -> Result<f64> {
    if a.mu.len() != b.mu.len() {
        return Err(Error::Invalid("region statistics dimensions differ".into()));
    }
    let avg = (&a.sigma + &b.sigma) * 0.5;
    let (avg_chol, log_det_avg) = log_det_cholesky(&avg, "averaged covariance")?;
    let (_, log_det_a) = log_det_cholesky(&a.sigma, "first covariance")?;
    let (_, log_det_b) = log_det_cholesky(&b.sigma, "second covariance")?;

    let d = &a.mu - &b.mu;
    let solved = avg_chol.solve(&d);
    let mahalanobis_sq = d.dot(&solved);
    let b_dist = mahalanobis_sq / 8.0 + 0.5 * (log_det_avg - 0.5 * (log_det_a + log_det_b));
    Ok(b_dist.max(0.0))
}

/// Per-texture and total Bhattacharyya distances plus pixel accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    /// Distance per class; `None` when the class was empty (or had a single
    /// window) on either side.
    pub per_class: Vec<Option<f64>>,
    /// Sum of the available per-class distances.
    pub total_distance: f64,
    pub pixel_accuracy: f64,
    /// `confusion[reference][segmented]` pixel counts.
    pub confusion: Vec<Vec<u64>>,
    /// Classes excluded from the total.
    pub missing_classes: Vec<usize>,
}

/// Compares a segmentation against reference labels: per-class Bhattacharyya
/// distance between the feature statistics of windows the segmentation
/// assigned to each class and those truly of the class, plus pixel accuracy
/// and the confusion matrix over all pixels.
pub fn quality_report(
    seg: &LabelMap,
    reference: &LabelMap,
    seg_samples: &[FeatureSample],
    ref_samples: &[FeatureSample],
) -> Result<QualityReport> {
    if seg.width() != reference.width() || seg.height() != reference.height() {
        return Err(Error::Invalid("label maps have different dimensions".into()));
    }
    let num_classes = seg.num_classes().max(reference.num_classes());

    let mut per_class = Vec::with_capacity(num_classes);
    let mut missing = Vec::new();
    let mut total = 0.0;
    for class in 0..num_classes {
        let seg_stats = region_stats(seg_samples, seg, class);
        let ref_stats = region_stats(ref_samples, reference, class);
        match (seg_stats, ref_stats) {
            (Ok(s), Ok(r)) => {
                let b = bhattacharyya(&s, &r)?;
                total += b;
                per_class.push(Some(b));
            }
            (Err(Error::Degenerate(_)), _) | (_, Err(Error::Degenerate(_))) => {
                missing.push(class);
                per_class.push(None);
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }

    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    let mut correct = 0u64;
    for r in 0..seg.height() {
        for c in 0..seg.width() {
            let truth = reference.get(r, c) as usize;
            let got = seg.get(r, c) as usize;
            confusion[truth][got] += 1;
            if truth == got {
                correct += 1;
            }
        }
    }
    let pixel_accuracy = correct as f64 / (seg.width() * seg.height()) as f64;

    Ok(QualityReport {
        per_class,
        total_distance: total,
        pixel_accuracy,
        confusion,
        missing_classes: missing,
    })
}

/// Fraction of correctly labeled pixels at least `band` pixels away from
/// both the image border and any reference class boundary.
pub fn interior_accuracy(seg: &LabelMap, reference: &LabelMap, band: usize) -> f64 {
    let (w, h) = (reference.width(), reference.height());
    // Mark reference boundary pixels, then dilate by `band` with two
    // separable max passes.
    let mut boundary = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            let v = reference.get(r, c);
            if (r + 1 < h && reference.get(r + 1, c) != v)
                || (c + 1 < w && reference.get(r, c + 1) != v)
            {
                boundary[r * w + c] = true;
            }
        }
    }
    let mut dilated_rows = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if boundary[r * w + c] {
                let lo = c.saturating_sub(band);
                let hi = (c + band).min(w - 1);
                for cc in lo..=hi {
                    dilated_rows[r * w + cc] = true;
                }
            }
        }
    }
    let mut excluded = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if dilated_rows[r * w + c] {
                let lo = r.saturating_sub(band);
                let hi = (r + band).min(h - 1);
                for rr in lo..=hi {
                    excluded[rr * w + c] = true;
                }
            }
        }
    }

    let mut total = 0u64;
    let mut correct = 0u64;
    for r in band..h.saturating_sub(band) {
        for c in band..w.saturating_sub(band) {
            if excluded[r * w + c] {
                continue;
            }
            total += 1;
            if seg.get(r, c) == reference.get(r, c) {
                correct += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

impl QualityReport {
    /// One CSV line mirroring the per-texture + total report layout:
    /// `texture_0,...,texture_{n-1},total_distance,pixel_accuracy`. Missing
    /// classes serialize as empty cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header: Vec<String> =
            (0..self.per_class.len()).map(|c| format!("texture_{c}")).collect();
        header.push("total_distance".into());
        header.push("pixel_accuracy".into());
        let mut row: Vec<String> = self
            .per_class
            .iter()
            .map(|b| b.map(fmt_f64).unwrap_or_default())
            .collect();
        row.push(fmt_f64(self.total_distance));
        row.push(fmt_f64(self.pixel_accuracy));
        std::fs::write(path, format!("{}\n{}\n", header.join(","), row.join(",")))?;
        Ok(())
    }
}

/// Parsed form of a report CSV written by [`QualityReport::write_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub per_class: Vec<Option<f64>>,
    pub total_distance: f64,
    pub pixel_accuracy: f64,
}

/// Reads back a report CSV.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<ReportRow> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("report CSV is empty".into()))?;
    let data = lines
        .next()
        .ok_or_else(|| Error::Format("report CSV has no data row".into()))?;
    let cols = header.split(',').count();
    if cols < 3 {
        return Err(Error::Format("report CSV needs at least 3 columns".into()));
    }
    let cells: Vec<&str> = data.split(',').collect();
    if cells.len() != cols {
        return Err(Error::Format("report CSV data row width mismatch".into()));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Format(format!("bad number '{s}' in report CSV")))
    };
    let per_class = cells[..cols - 2]
        .iter()
        .map(|s| if s.is_empty() { Ok(None) } else { parse(s).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportRow {
        per_class,
        total_distance: parse(cells[cols - 2])?,
        pixel_accuracy: parse(cells[cols - 1])?,
    })
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "segmentation quality")?;
        for (c, b) in self.per_class.iter().enumerate() {
            match b {
                Some(b) => writeln!(f, "  texture {c}: B = {b:.6e}")?,
                None => writeln!(f, "  texture {c}: missing (too few windows)")?,
            }
        }
        writeln!(f, "  total distance: {:.6e}", self.total_distance)?;
        writeln!(f, "  pixel accuracy: {:.4}", self.pixel_accuracy)?;
        writeln!(f, "  confusion (rows = reference, cols = segmented):")?;
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>8}")).collect();
            writeln!(f, "    {}", cells.join(" "))?;
        }
        Ok(())
    }
}
