//! Supervised Gaussian Bayes classifier over feature vectors.
//!
//! Training fits a per-dimension z-score scaler on all samples, then a
//! sample mean and covariance (denominator `n - 1`) per class on the
//! scaled features. Covariances are regularized by adding
//! `lambda = 1e-6 * mean(diag) + 1e-12` to the diagonal so near-constant
//! training textures stay invertible; the precision matrix and
//! log-determinant are cached.
//!
//! Classification assigns the class maximizing the Gaussian log-likelihood
//! `-(D ln 2pi + ln |Sigma_i| + (x - mu_i)^T Sigma_i^{-1} (x - mu_i)) / 2`
//! under equal priors, with ties broken toward the lowest class id. The
//! full covariance is the default; a diagonal-covariance mode implements
//! the independence-assuming variant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative diagonal regularization weight.
pub const COVARIANCE_RIDGE_REL: f64 = 1e-6;
/// Absolute regularization floor, so all-constant features stay invertible.
pub const COVARIANCE_RIDGE_ABS: f64 = 1e-12;

/// Per-dimension affine feature normalization learned from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    /// Z-score fit over all samples; dimensions with (near-)zero spread get
    /// unit scale.
    pub fn fit(samples: &[Vec<f64>]) -> Self {
        let n = samples.len() as f64;
        let dim = samples[0].len();
        let mut shift = vec![0.0; dim];
        for s in samples {
            for (m, v) in shift.iter_mut().zip(s) {
                *m += v;
            }
        }
        for m in &mut shift {
            *m /= n;
        }
        let mut scale = vec![0.0; dim];
        for s in samples {
            for ((sc, v), m) in scale.iter_mut().zip(s).zip(&shift) {
                *sc += (v - m) * (v - m);
            }
        }
        for sc in &mut scale {
            *sc = (*sc / n).sqrt();
            if *sc < 1e-12 {
                *sc = 1.0;
            }
        }
        Self { shift, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Maps a scaled-space vector back to the original feature space.
    pub fn unapply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Gaussian model of one class in scaled feature space.
#[derive(Debug, Clone)]
pub struct ClassModel {
    pub class_id: usize,
    pub sample_count: usize,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_inv: DMatrix<f64>,
    pub log_det: f64,
}

impl ClassModel {
    /// Builds the cached precision and log-determinant from a (regularized)
    /// covariance.
    fn from_moments(
        class_id: usize,
        sample_count: usize,
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let chol = sigma.clone().cholesky().ok_or_else(|| {
            Error::Numerical(format!(
                "covariance of class {class_id} is not positive definite"
            ))
        })?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let sigma_inv = chol.inverse();
        Ok(Self { class_id, sample_count, mu, sigma, sigma_inv, log_det })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Keep only the covariance diagonal (the independence-assuming variant).
    pub diagonal_covariance: bool,
    pub ridge_rel: f64,
    pub ridge_abs: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            diagonal_covariance: false,
            ridge_rel: COVARIANCE_RIDGE_REL,
            ridge_abs: COVARIANCE_RIDGE_ABS,
        }
    }
}

/// A trained per-class Gaussian classifier plus its feature scaler.
#[derive(Debug, Clone)]
pub struct TrainedSegmenter {
    pub dim: usize,
    pub scaler: Scaler,
    pub options: TrainOptions,
    pub models: Vec<ClassModel>,
}

impl TrainedSegmenter {
    pub fn num_classes(&self) -> usize {
        self.models.len()
    }

    /// Class mean mapped back to the original (unscaled) feature space.
    pub fn class_mean_unscaled(&self, class: usize) -> Vec<f64> {
        self.scaler.unapply(self.models[class].mu.as_slice())
    }
}

/// Fits the classifier on `(vector, class)` samples. Class ids must be
/// `0..k` for some `k >= 2` and every class needs at least two samples.
pub fn train(
    vectors: &[Vec<f64>],
    labels: &[usize],
    options: TrainOptions,
) -> Result<TrainedSegmenter> {
    if vectors.len() != labels.len() {
        return Err(Error::Invalid("feature and label counts differ".into()));
    }
    if vectors.is_empty() {
        return Err(Error::Invalid("no training samples".into()));
    }
    let dim = vectors[0].len();
    if dim == 0 {
        return Err(Error::Invalid("feature dimension must be positive".into()));
    }
    for v in vectors {
        if v.len() != dim {
            return Err(Error::Invalid("inconsistent feature dimensions".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite training feature".into()));
        }
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    if num_classes < 2 {
        return Err(Error::Invalid("training needs at least 2 classes".into()));
    }
    let mut class_counts = vec![0usize; num_classes];
    for &l in labels {
        class_counts[l] += 1;
    }
    if let Some(bad) = class_counts.iter().position(|&c| c < 2) {
        return Err(Error::Invalid(format!(
            "class {bad} has {} training samples; at least 2 are required",
            class_counts[bad]
        )));
    }

    let scaler = Scaler::fit(vectors);
    let scaled: Vec<Vec<f64>> = vectors.iter().map(|v| scaler.apply(v)).collect();

    let mut models = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let members: Vec<&Vec<f64>> = scaled
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(v, _)| v)
            .collect();
        let n = members.len();
        let mut mu = DVector::zeros(dim);
        for m in &members {
            for (i, v) in m.iter().enumerate() {
                mu[i] += v;
            }
        }
        mu /= n as f64;

        let mut sigma = DMatrix::zeros(dim, dim);
        for m in &members {
            let d = DVector::from_iterator(dim, m.iter().enumerate().map(|(i, v)| v - mu[i]));
            sigma.syger(1.0, &d, &d, 1.0);
        }
        sigma /= (n - 1) as f64;
        // syger fills the lower triangle; mirror it.
        for i in 0..dim {
            for j in i + 1..dim {
                sigma[(i, j)] = sigma[(j, i)];
            }
        }
        if options.diagonal_covariance {
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        sigma[(i, j)] = 0.0;
                    }
                }
            }
        }
        regularize(&mut sigma, &options);
        models.push(ClassModel::from_moments(class, n, mu, sigma)?);
    }

    Ok(TrainedSegmenter { dim, scaler, options, models })
}

/// Adds `ridge_rel * mean(diag) + ridge_abs` to the covariance diagonal.
pub fn regularize(sigma: &mut DMatrix<f64>, options: &TrainOptions) {
    let dim = sigma.nrows();
    let mean_diag = sigma.diagonal().sum() / dim as f64;
    let lambda = options.ridge_rel * mean_diag + options.ridge_abs;
    for i in 0..dim {
        sigma[(i, i)] += lambda;
    }
}

impl TrainedSegmenter {
    /// Builds a segmenter directly from per-class `(mu, sigma)` moments with
    /// an identity scaler and no extra regularization. Covariances must be
    /// positive definite. Intended for analytic fixtures and tests.
    pub fn from_class_moments(moments: &[(Vec<f64>, Vec<Vec<f64>>)]) -> Result<Self> {
        if moments.len() < 2 {
            return Err(Error::Invalid("at least 2 classes required".into()));
        }
        let dim = moments[0].0.len();
        let mut models = Vec::with_capacity(moments.len());
        for (class_id, (mu, sigma_rows)) in moments.iter().enumerate() {
            if mu.len() != dim || sigma_rows.len() != dim {
                return Err(Error::Invalid("inconsistent moment dimensions".into()));
            }
            let sigma = DMatrix::from_fn(dim, dim, |i, j| sigma_rows[i][j]);
            models.push(ClassModel::from_moments(
                class_id,
                0,
                DVector::from_column_slice(mu),
                sigma,
            )?);
        }
        Ok(Self { dim, scaler: Scaler::identity(dim), options: TrainOptions::default(), models })
    }

    /// Classifies one feature vector: returns the winning class id and the
    /// per-class Gaussian log-likelihoods (equal priors). Ties go to the
    /// lowest class id.
    pub fn classify(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.dim {
            return Err(Error::Invalid(format!(
                "feature dimension {} does not match the model's {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite feature vector".into()));
        }
        let z = DVector::from_vec(self.scaler.apply(x));
        let log_2pi = (2.0 * std::f64::consts::PI).ln();
        let scores: Vec<f64> = self
            .models
            .iter()
            .map(|m| {
                let d = &z - &m.mu;
                let quad = (&m.sigma_inv * &d).dot(&d);
                -0.5 * (self.dim as f64 * log_2pi + m.log_det + quad)
            })
            .collect();
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        Ok((best, scores))
    }
}

/// Serialized form of a trained segmenter (matrices row-major).
#[derive(Serialize, Deserialize)]
struct SegmenterDto {
    dim: usize,
    scaler: Scaler,
    options: TrainOptions,
    models: Vec<ModelDto>,
}

#[derive(Serialize, Deserialize)]
struct ModelDto {
    class_id: usize,
    sample_count: usize,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl Serialize for TrainedSegmenter {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dto = SegmenterDto {
            dim: self.dim,
            scaler: self.scaler.clone(),
            options: self.options,
            models: self
                .models
                .iter()
                .map(|m| ModelDto {
                    class_id: m.class_id,
                    sample_count: m.sample_count,
                    mu: m.mu.as_slice().to_vec(),
                    sigma: m.sigma.transpose().as_slice().to_vec(),
                })
                .collect(),
        };
        dto.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TrainedSegmenter {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = SegmenterDto::deserialize(deserializer)?;
        let mut models = Vec::with_capacity(dto.models.len());
        for m in dto.models {
            if m.mu.len() != dto.dim || m.sigma.len() != dto.dim * dto.dim {
                return Err(D::Error::custom("model dimensions inconsistent with header"));
            }
            let mu = DVector::from_column_slice(&m.mu);
            let sigma =
                DMatrix::from_fn(dto.dim, dto.dim, |i, j| m.sigma[i * dto.dim + j]);
            models.push(
                ClassModel::from_moments(m.class_id, m.sample_count, mu, sigma)
                    .map_err(|e| D::Error::custom(e.to_string()))?,
            );
        }
        Ok(TrainedSegmenter {
            dim: dto.dim,
            scaler: dto.scaler,
            options: dto.options,
            models,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn jittered(value: f64, n: usize, eps: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![value + eps * if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect()
    }

    #[test]
    fn recovers_constant_class_means() {
        let mut vectors = jittered(0.0, 10, 1e-3);
        vectors.extend(jittered(10.0, 10, 1e-3));
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let seg = train(&vectors, &labels, TrainOptions::default()).unwrap();
        let mu0 = seg.class_mean_unscaled(0)[0];
        let mu1 = seg.class_mean_unscaled(1)[0];
        assert!(mu0.abs() < 1e-6, "mu0 {mu0}");
        assert!((mu1 - 10.0).abs() < 1e-6, "mu1 {mu1}");
    }

    #[test]
    fn monte_carlo_moment_recovery() {
        // Known 3-D Gaussian; mean within 3 sigma/sqrt(n), covariance within
        // 10% Frobenius.
        let n = 10_000;
        let mu = [1.0, -2.0, 0.5];
        let a = [[1.0, 0.0, 0.0], [0.5, 0.8, 0.0], [-0.3, 0.2, 0.6]];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut sample = || {
            let z: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            (0..3)
                .map(|i| mu[i] + (0..3).map(|j| a[i][j] * z[j]).sum::<f64>())
                .collect::<Vec<f64>>()
        };
        let mut vectors: Vec<Vec<f64>> = (0..n).map(|_| sample()).collect();
        // A second, well-separated class so training is valid.
        vectors.extend((0..n).map(|_| {
            let mut v = sample();
            v[0] += 100.0;
            v
        }));
        let labels: Vec<usize> = (0..2 * n).map(|i| i / n).collect();
        let seg = train(&vectors, &labels, TrainOptions::default()).unwrap();

        // True covariance = A A^T.
        let mut true_sigma = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                true_sigma[i][j] = (0..3).map(|k| a[i][k] * a[j][k]).sum();
            }
        }
        let est_mu = seg.class_mean_unscaled(0);
        for i in 0..3 {
            let sigma_i = true_sigma[i][i].sqrt();
            let tol = 3.0 * sigma_i / (n as f64).sqrt();
            assert!((est_mu[i] - mu[i]).abs() < tol, "mean component {i}");
        }

        // Covariance back in original units: sigma_orig = S sigma_scaled S.
        let m = &seg.models[0];
        let s = &seg.scaler.scale;
        let mut frob_err = 0.0;
        let mut frob_true = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let est = m.sigma[(i, j)] * s[i] * s[j];
                frob_err += (est - true_sigma[i][j]).powi(2);
                frob_true += true_sigma[i][j].powi(2);
            }
        }
        assert!(frob_err.sqrt() < 0.1 * frob_true.sqrt(), "covariance Frobenius error");
    }

    #[test]
    fn collinear_samples_are_regularized_to_positive_definite() {
        // Perfectly collinear 2-D data: raw covariance is singular.
        let vectors: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let mut with_other: Vec<Vec<f64>> =
            (0..6).map(|i| vec![10.0 + i as f64, -i as f64]).collect();
        let mut all = vectors;
        all.append(&mut with_other);
        let labels: Vec<usize> = (0..12).map(|i| i / 6).collect();
        let opts = TrainOptions::default();
        let seg = train(&all, &labels, opts).unwrap();
        for m in &seg.models {
            let eig = m.sigma.clone().symmetric_eigen().eigenvalues;
            let mean_diag = m.sigma.diagonal().sum() / 2.0;
            let lambda_lower =
                opts.ridge_abs + opts.ridge_rel * (mean_diag - opts.ridge_abs) / (1.0 + opts.ridge_rel);
            for e in eig.iter() {
                assert!(*e >= lambda_lower * 0.99, "eigenvalue {e} below the ridge floor");
            }
            // Cached inverse is a true inverse.
            let identity = &m.sigma * &m.sigma_inv;
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((identity[(i, j)] - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn class_with_one_sample_rejected() {
        let vectors = vec![vec![0.0], vec![0.1], vec![5.0]];
        let labels = vec![0, 0, 1];
        assert!(train(&vectors, &labels, TrainOptions::default()).is_err());
    }

    fn hand_segmenter_1d() -> TrainedSegmenter {
        TrainedSegmenter::from_class_moments(&[
            (vec![0.0], vec![vec![1.0]]),
            (vec![10.0], vec![vec![1.0]]),
        ])
        .unwrap()
    }

    #[test]
    fn nearer_mean_wins_with_equal_variance() {
        let seg = hand_segmenter_1d();
        let (class, scores) = seg.classify(&[2.0]).unwrap();
        assert_eq!(class, 0);
        let log_2pi = (2.0 * std::f64::consts::PI).ln();
        assert!((scores[0] - (-0.5 * (log_2pi + 4.0))).abs() < 1e-12);
        assert!((scores[1] - (-0.5 * (log_2pi + 64.0))).abs() < 1e-12);
    }

    #[test]
    fn midpoint_tie_goes_to_lowest_class() {
        let seg = hand_segmenter_1d();
        let (class, scores) = seg.classify(&[5.0]).unwrap();
        assert_eq!(class, 0);
        assert_eq!(scores[0], scores[1]);
    }

    #[test]
    fn larger_variance_wins_in_the_tail() {
        let seg = TrainedSegmenter::from_class_moments(&[
            (vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            (vec![0.0, 0.0], vec![vec![4.0, 0.0], vec![0.0, 4.0]]),
        ])
        .unwrap();
        let (class, scores) = seg.classify(&[3.0, 3.0]).unwrap();
        assert_eq!(class, 1);
        let log_2pi = (2.0 * std::f64::consts::PI).ln();
        assert!((scores[0] - (-0.5 * (2.0 * log_2pi + 18.0))).abs() < 1e-12);
        assert!(
            (scores[1] - (-0.5 * (2.0 * log_2pi + 2.0 * 4.0f64.ln() + 4.5))).abs() < 1e-12
        );
    }

    #[test]
    fn dimension_mismatch_and_nan_rejected() {
        let seg = hand_segmenter_1d();
        assert!(seg.classify(&[1.0, 2.0]).is_err());
        assert!(seg.classify(&[f64::NAN]).is_err());
    }

    /// Three well-separated 3-D classes; test points are drawn from the same
    /// class mixture so they live where the models have support.
    fn training_fixture(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<f64>>) {
        let draw = |class: usize, rng: &mut ChaCha8Rng| {
            let center = class as f64 * 2.5;
            vec![
                center + 0.5 * rng.sample::<f64, _>(StandardNormal),
                -center + 0.7 * rng.sample::<f64, _>(StandardNormal),
                0.2 * rng.sample::<f64, _>(StandardNormal),
            ]
        };
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for class in 0..3usize {
            for _ in 0..200 {
                vectors.push(draw(class, rng));
                labels.push(class);
            }
        }
        let tests: Vec<Vec<f64>> = (0..60).map(|i| draw(i % 3, rng)).collect();
        (vectors, labels, tests)
    }

    #[test]
    fn decisions_invariant_under_affine_feature_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (vectors, labels, tests) = training_fixture(&mut rng);
        let seg = train(&vectors, &labels, TrainOptions::default()).unwrap();
        let base: Vec<usize> =
            tests.iter().map(|t| seg.classify(t).unwrap().0).collect();

        // Per-dimension invertible affine map applied to every vector.
        let map = |v: &[f64]| -> Vec<f64> {
            vec![4.0 * v[0] + 3.0, -0.5 * v[1] + 100.0, 8.0 * v[2] - 7.0]
        };
        let mapped: Vec<Vec<f64>> = vectors.iter().map(|v| map(v)).collect();
        let seg2 = train(&mapped, &labels, TrainOptions::default()).unwrap();
        let remapped: Vec<usize> = tests
            .iter()
            .map(|t| seg2.classify(&map(t)).unwrap().0)
            .collect();
        assert_eq!(base, remapped);
    }

    #[test]
    fn duplicating_a_sample_per_class_keeps_confident_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (vectors, labels, tests) = training_fixture(&mut rng);
        let seg = train(&vectors, &labels, TrainOptions::default()).unwrap();

        let mut augmented = vectors.clone();
        let mut aug_labels = labels.clone();
        for class in 0..3 {
            let idx = labels.iter().position(|&l| l == class).unwrap();
            augmented.push(vectors[idx].clone());
            aug_labels.push(class);
        }
        let seg2 = train(&augmented, &aug_labels, TrainOptions::default()).unwrap();

        for t in &tests {
            let (c1, s1) = seg.classify(t).unwrap();
            let mut sorted = s1.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let margin = sorted[0] - sorted[1];
            if margin > 1e-3 {
                let (c2, _) = seg2.classify(t).unwrap();
                assert_eq!(c1, c2, "confident decision flipped at margin {margin}");
            }
        }
    }

    #[test]
    fn classify_is_pure() {
        let seg = hand_segmenter_1d();
        let a = seg.classify(&[1.234]).unwrap();
        let b = seg.classify(&[1.234]).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn json_roundtrip_preserves_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (vectors, labels, tests) = training_fixture(&mut rng);
        let seg = train(&vectors, &labels, TrainOptions::default()).unwrap();
        let json = serde_json::to_string(&seg).unwrap();
        let back: TrainedSegmenter = serde_json::from_str(&json).unwrap();
        assert_eq!(back.dim, seg.dim);
        assert_eq!(back.num_classes(), seg.num_classes());
        for t in &tests {
            assert_eq!(seg.classify(t).unwrap().0, back.classify(t).unwrap().0);
        }
    }

    #[test]
    fn diagonal_mode_zeroes_off_diagonals() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (vectors, labels, _) = training_fixture(&mut rng);
        let opts = TrainOptions { diagonal_covariance: true, ..Default::default() };
        let seg = train(&vectors, &labels, opts).unwrap();
        for m in &seg.models {
            for i in 0..seg.dim {
                for j in 0..seg.dim {
                    if i != j {
                        assert_eq!(m.sigma[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
