//! Gaussian Markov random field parameter estimation.
//!
//! Each pixel is modeled as conditionally Gaussian given its third-order
//! neighborhood, summarized by six symmetric pair sums: the axial
//! neighbors at offsets 1 and 2 and both diagonal neighbors at offset 1.
//! The six interaction weights `alpha` solve the least-squares normal
//! equations accumulated over interior pixels (margin 2, so every pair sum
//! stays inside the window), and the residual variance `sigma2` is the
//! mean squared fit residual over those interior pixels. The feature
//! vector is `(alpha_1..alpha_6, sigma2)`.
//!
//! Windows are mean-centered before estimation: the conditional model has
//! no intercept, so without centering the weights absorb the DC level and
//! stop being comparable across windows. Intensities are normalized to
//! `[0, 1]` first so `sigma2` scales comparably across images.

use nalgebra::{SMatrix, SVector};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::features::{Extractor, FeatureVector};
use crate::fft::fft_2d;
use crate::image::GrayImage;

/// The six symmetric neighbor pairs, in feature order: vertical +-1,
/// horizontal +-1, vertical +-2, horizontal +-2, main diagonal +-1,
/// anti-diagonal +-1.
pub const NEIGHBOR_PAIRS: [[(isize, isize); 2]; 6] = [
    [(-1, 0), (1, 0)],
    [(0, -1), (0, 1)],
    [(-2, 0), (2, 0)],
    [(0, -2), (0, 2)],
    [(-1, -1), (1, 1)],
    [(-1, 1), (1, -1)],
];

/// Pixels closer than this to the window border are excluded from the
/// normal-equation sums; the offset-2 pairs reach exactly this far.
pub const INTERIOR_MARGIN: usize = 2;

/// Condition-number threshold beyond which the normal matrix is treated as
/// singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Ridge weight relative to the normal-matrix trace when the fallback is
/// enabled.
pub const RIDGE_FACTOR: f64 = 1e-8;

type Mat6 = SMatrix<f64, 6, 6>;
type Vec6 = SVector<f64, 6>;

/// The six neighbor pair sums at one pixel.
pub fn neighbor_sums(field: &Array2<f64>, row: usize, col: usize) -> Result<[f64; 6]> {
    let (h, w) = field.dim();
    if row < INTERIOR_MARGIN
        || col < INTERIOR_MARGIN
        || row + INTERIOR_MARGIN >= h
        || col + INTERIOR_MARGIN >= w
    {
        return Err(Error::Invalid(format!(
            "pixel ({row}, {col}) is within {INTERIOR_MARGIN} of the border of a {h}x{w} field"
        )));
    }
    Ok(sums_unchecked(field, row, col))
}

#[inline]
fn sums_unchecked(field: &Array2<f64>, row: usize, col: usize) -> [f64; 6] {
    let mut s = [0.0; 6];
    for (l, pair) in NEIGHBOR_PAIRS.iter().enumerate() {
        for &(dr, dc) in pair {
            s[l] += field[((row as isize + dr) as usize, (col as isize + dc) as usize)];
        }
    }
    s
}

/// Estimated interaction weights and residual variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmrfParams {
    pub alpha: [f64; 6],
    pub sigma2: f64,
    /// Set when the ridge fallback was applied to an ill-conditioned system.
    pub ridged: bool,
}

impl GmrfParams {
    pub fn feature_vector(&self) -> Result<FeatureVector> {
        let mut values = self.alpha.to_vec();
        values.push(self.sigma2);
        FeatureVector::new(Extractor::Gmrf, values)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    /// Fall back to Tikhonov regularization instead of failing on an
    /// ill-conditioned normal matrix.
    pub ridge: bool,
}

/// Least-squares fit of the six interaction weights on a real-valued field.
///
/// The field is mean-centered internally. Fails with a numerical error on a
/// singular normal matrix (condition number above [`CONDITION_LIMIT`])
/// unless the ridge fallback is enabled.
pub fn estimate_field(field: &Array2<f64>, options: EstimateOptions) -> Result<GmrfParams> {
    let (h, w) = field.dim();
    if h < 8 || w < 8 {
        return Err(Error::Invalid(format!(
            "GMRF estimation needs a window of at least 8x8, got {h}x{w}"
        )));
    }
    if field.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("field contains non-finite values".into()));
    }

    let mean = field.sum() / (h * w) as f64;
    let centered = field.mapv(|v| v - mean);

    let mut normal = Mat6::zeros();
    let mut rhs = Vec6::zeros();
    for r in INTERIOR_MARGIN..h - INTERIOR_MARGIN {
        for c in INTERIOR_MARGIN..w - INTERIOR_MARGIN {
            let s = sums_unchecked(&centered, r, c);
            let v = centered[(r, c)];
            for a in 0..6 {
                rhs[a] += v * s[a];
                for b in a..6 {
                    normal[(a, b)] += s[a] * s[b];
                }
            }
        }
    }
    for a in 0..6 {
        for b in 0..a {
            normal[(a, b)] = normal[(b, a)];
        }
    }

    let eigen = normal.symmetric_eigenvalues();
    let max_eig = eigen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
    let ill_conditioned = min_eig <= 0.0 || max_eig / min_eig > CONDITION_LIMIT;

    let mut ridged = false;
    let mut system = normal;
    if ill_conditioned {
        if !options.ridge {
            return Err(Error::Numerical(
                "singular GMRF normal matrix (constant or degenerate window); \
                 enable the ridge fallback to force an estimate"
                    .into(),
            ));
        }
        let mut lambda = RIDGE_FACTOR * normal.trace();
        if lambda <= 0.0 {
            lambda = 1e-12;
        }
        for i in 0..6 {
            system[(i, i)] += lambda;
        }
        ridged = true;
    }

    let alpha_vec = system
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| system.lu().solve(&rhs))
        .ok_or_else(|| Error::Numerical("GMRF normal equations could not be solved".into()))?;

    let mut residual_sq = 0.0;
    for r in INTERIOR_MARGIN..h - INTERIOR_MARGIN {
        for c in INTERIOR_MARGIN..w - INTERIOR_MARGIN {
            let s = sums_unchecked(&centered, r, c);
            let pred: f64 = (0..6).map(|l| alpha_vec[l] * s[l]).sum();
            let res = centered[(r, c)] - pred;
            residual_sq += res * res;
        }
    }
    let interior = ((h - 2 * INTERIOR_MARGIN) * (w - 2 * INTERIOR_MARGIN)) as f64;

    let mut alpha = [0.0; 6];
    alpha.copy_from_slice(alpha_vec.as_slice());
    Ok(GmrfParams { alpha, sigma2: residual_sq / interior, ridged })
}

/// Estimates on a quantized window: intensities are normalized to `[0, 1]`
/// before the fit.
pub fn estimate_window(window: &GrayImage, options: EstimateOptions) -> Result<GmrfParams> {
    estimate_field(&window.to_normalized(), options)
}

/// The 7-dim feature vector `(alpha_1..alpha_6, sigma2)` of a window.
pub fn gmrf_feature_vector(window: &GrayImage, options: EstimateOptions) -> Result<FeatureVector> {
    estimate_window(window, options)?.feature_vector()
}

/// Spectral gain of the symmetric neighbor operator at angular frequency
/// `(wr, wc)`: each pair contributes `2 alpha_l cos(w . offset)`.
fn neighbor_symbol(alpha: &[f64; 6], wr: f64, wc: f64) -> f64 {
    2.0 * (alpha[0] * wr.cos()
        + alpha[1] * wc.cos()
        + alpha[2] * (2.0 * wr).cos()
        + alpha[3] * (2.0 * wc).cos()
        + alpha[4] * (wr + wc).cos()
        + alpha[5] * (wr - wc).cos())
}

/// Samples a stationary Gaussian Markov field on a torus whose conditional
/// mean at every pixel is `sum_l alpha_l * s_l` with residual variance
/// `sigma^2`, i.e. spectral density `sigma^2 / (1 - c(w))` where `c` is the
/// neighbor operator's symbol. Synthesized by spectral filtering of white
/// noise; requires the stability condition `2 * sum |alpha_l| < 1`.
pub fn synthesize_field(
    height: usize,
    width: usize,
    alpha: &[f64; 6],
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    if height < 2 * INTERIOR_MARGIN + 1 || width < 2 * INTERIOR_MARGIN + 1 {
        return Err(Error::Invalid("field too small for the neighborhood".into()));
    }
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::Invalid("sigma must be finite and nonnegative".into()));
    }
    let gain: f64 = alpha.iter().map(|a| 2.0 * a.abs()).sum();
    if gain >= 1.0 {
        return Err(Error::Invalid(format!(
            "unstable interaction weights: 2 * sum |alpha| = {gain:.3} must be < 1"
        )));
    }

    let mut buf: Vec<Complex<f64>> = (0..height * width)
        .map(|_| Complex::new(sigma * rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    fft_2d(&mut buf, width, height, false);
    for r in 0..height {
        let wr = 2.0 * std::f64::consts::PI * r as f64 / height as f64;
        for c in 0..width {
            let wc = 2.0 * std::f64::consts::PI * c as f64 / width as f64;
            let denom = 1.0 - neighbor_symbol(alpha, wr, wc);
            buf[r * width + c] /= denom.sqrt();
        }
    }
    fft_2d(&mut buf, width, height, true);
    let scale = 1.0 / (height * width) as f64;
    Ok(Array2::from_shape_fn((height, width), |(r, c)| {
        buf[r * width + c].re * scale
    }))
}
