//! Grey-level co-occurrence matrices and the eight derived statistics.
//!
//! A GLCM tallies how often a pixel with grey level `i` occurs jointly with
//! a pixel of grey level `j` at a fixed displacement. Counting is symmetric
//! (each pair is tallied in both orders), and four displacement directions
//! at distance `d` are used: 0, 45, 90 and 135 degrees.
//!
//! With `p(i, j)` the normalized matrix, the derived statistics are:
//!
//! - contrast: `sum (i - j)^2 p(i, j)`
//! - correlation: `sum (i - mu_x)(j - mu_y) p(i, j) / (sigma_x sigma_y)`
//! - energy: `sum p(i, j)^2`
//! - entropy: `-sum p log2 p` over `p > 0`
//! - homogeneity: `sum p / (1 + (i - j)^2)`
//! - dissimilarity: `sum |i - j| p`
//! - inverse difference moment: `sum p / (1 + |i - j|)`
//! - maximum probability: `max p`
//!
//! Correlation is undefined when a marginal has zero variance (a constant
//! window); it is then reported as 0 with a degeneracy flag so downstream
//! covariance estimation stays finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Extractor, FeatureVector};
use crate::image::GrayImage;

/// Co-occurrence / run-length scan direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

/// The four directions in their documented order.
pub const DIRECTIONS: [Direction; 4] =
    [Direction::Deg0, Direction::Deg45, Direction::Deg90, Direction::Deg135];

impl Direction {
    /// Displacement `(d_row, d_col)` for distance `d`. Row axis points down,
    /// so 45 degrees steps up-right and 135 degrees up-left.
    pub fn offset(self, d: usize) -> (isize, isize) {
        let d = d as isize;
        match self {
            Direction::Deg0 => (0, d),
            Direction::Deg45 => (-d, d),
            Direction::Deg90 => (-d, 0),
            Direction::Deg135 => (-d, -d),
        }
    }

    pub fn angle_degrees(self) -> u32 {
        match self {
            Direction::Deg0 => 0,
            Direction::Deg45 => 45,
            Direction::Deg90 => 90,
            Direction::Deg135 => 135,
        }
    }
}

/// A symmetric co-occurrence matrix for one direction and distance.
#[derive(Debug, Clone)]
pub struct Glcm {
    levels: usize,
    direction: Direction,
    distance: usize,
    counts: Vec<u64>,
    total: u64,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    /// Total tallies; twice the number of positional pairs because counting
    /// is symmetric.
    pub fn total(&self) -> u64 {
        self.total
    }

    #[inline]
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) as f64 / self.total as f64
    }

    /// The normalized matrix, row-major.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

/// Tallies the co-occurrence matrix of `window` for one direction.
///
/// Every in-bounds positional pair `(p, p + offset)` contributes to both
/// `(i, j)` and `(j, i)`, so the counts matrix is symmetric by construction.
pub fn compute_glcm(window: &GrayImage, direction: Direction, distance: usize) -> Result<Glcm> {
    if distance == 0 {
        return Err(Error::Invalid("GLCM distance must be >= 1".into()));
    }
    let levels = window.levels();
    let (dr, dc) = direction.offset(distance);
    let h = window.height() as isize;
    let w = window.width() as isize;

    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for r in 0..h {
        let r2 = r + dr;
        if r2 < 0 || r2 >= h {
            continue;
        }
        for c in 0..w {
            let c2 = c + dc;
            if c2 < 0 || c2 >= w {
                continue;
            }
            let i = window.get(r as usize, c as usize) as usize;
            let j = window.get(r2 as usize, c2 as usize) as usize;
            counts[i * levels + j] += 1;
            counts[j * levels + i] += 1;
            total += 2;
        }
    }
    if total == 0 {
        return Err(Error::Degenerate(format!(
            "window {}x{} has no valid pixel pairs at distance {} in direction {}",
            window.width(),
            window.height(),
            distance,
            direction.angle_degrees()
        )));
    }
    Ok(Glcm { levels, direction, distance, counts, total })
}

/// The eight co-occurrence statistics for a single direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub entropy: f64,
    pub homogeneity: f64,
    pub dissimilarity: f64,
    pub inverse_difference_moment: f64,
    pub maximum_probability: f64,
    /// Set when correlation was undefined (zero marginal variance) and
    /// reported as 0.
    pub correlation_degenerate: bool,
}

pub const GLCM_FEATURES_PER_DIRECTION: usize = 8;

impl GlcmFeatures {
    /// The features in documented CSV order.
    pub fn as_array(&self) -> [f64; GLCM_FEATURES_PER_DIRECTION] {
        [
            self.contrast,
            self.correlation,
            self.energy,
            self.entropy,
            self.homogeneity,
            self.dissimilarity,
            self.inverse_difference_moment,
            self.maximum_probability,
        ]
    }
}

/// Computes the eight statistics from a normalized GLCM.
pub fn glcm_features(glcm: &Glcm) -> GlcmFeatures {
    let g = glcm.levels();
    let total = glcm.total() as f64;

    let mut px = vec![0.0; g];
    let mut py = vec![0.0; g];
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut entropy = 0.0;
    let mut homogeneity = 0.0;
    let mut dissimilarity = 0.0;
    let mut idm = 0.0;
    let mut max_p = 0.0f64;
    for i in 0..g {
        for j in 0..g {
            let c = glcm.count(i, j);
            if c == 0 {
                continue;
            }
            let p = c as f64 / total;
            let diff = i as f64 - j as f64;
            px[i] += p;
            py[j] += p;
            contrast += diff * diff * p;
            energy += p * p;
            entropy -= p * p.log2();
            homogeneity += p / (1.0 + diff * diff);
            dissimilarity += diff.abs() * p;
            idm += p / (1.0 + diff.abs());
            max_p = max_p.max(p);
        }
    }

    let mu_x: f64 = px.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let var_x: f64 = px.iter().enumerate().map(|(i, p)| (i as f64 - mu_x).powi(2) * p).sum();
    let var_y: f64 = py.iter().enumerate().map(|(j, p)| (j as f64 - mu_y).powi(2) * p).sum();
    let sigma = (var_x * var_y).sqrt();

    let (correlation, degenerate) = if sigma < 1e-15 {
        (0.0, true)
    } else {
        let mut corr = 0.0;
        for i in 0..g {
            for j in 0..g {
                let c = glcm.count(i, j);
                if c == 0 {
                    continue;
                }
                let p = c as f64 / total;
                corr += (i as f64 - mu_x) * (j as f64 - mu_y) * p;
            }
        }
        (corr / sigma, false)
    };

    GlcmFeatures {
        contrast,
        correlation,
        energy,
        entropy,
        homogeneity,
        dissimilarity,
        inverse_difference_moment: idm,
        maximum_probability: max_p,
        correlation_degenerate: degenerate,
    }
}

/// Concatenates the four per-direction feature tuples (direction-major) into
/// the 32-dim vector, or averages them into 8 dims when `averaged` is set.
pub fn glcm_feature_vector(
    window: &GrayImage,
    distance: usize,
    averaged: bool,
) -> Result<FeatureVector> {
    let mut per_direction = Vec::with_capacity(DIRECTIONS.len());
    for dir in DIRECTIONS {
        let glcm = compute_glcm(window, dir, distance)?;
        per_direction.push(glcm_features(&glcm).as_array());
    }
    if averaged {
        let mut values = vec![0.0; GLCM_FEATURES_PER_DIRECTION];
        for feats in &per_direction {
            for (v, f) in values.iter_mut().zip(feats) {
                *v += f;
            }
        }
        for v in &mut values {
            *v /= DIRECTIONS.len() as f64;
        }
        FeatureVector::new(Extractor::GlcmAveraged, values)
    } else {
        let values = per_direction.into_iter().flatten().collect();
        FeatureVector::new(Extractor::Glcm, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: enumerate all in-bounds positional pairs with a
    /// double loop and tally both orders.
    fn brute_force_glcm(window: &GrayImage, direction: Direction, distance: usize) -> Vec<u64> {
        let g = window.levels();
        let (dr, dc) = direction.offset(distance);
        let mut counts = vec![0u64; g * g];
        for r in 0..window.height() as isize {
            for c in 0..window.width() as isize {
                let (r2, c2) = (r + dr, c + dc);
                if r2 < 0
                    || r2 >= window.height() as isize
                    || c2 < 0
                    || c2 >= window.width() as isize
                {
                    continue;
                }
                let i = window.get(r as usize, c as usize) as usize;
                let j = window.get(r2 as usize, c2 as usize) as usize;
                counts[i * g + j] += 1;
                counts[j * g + i] += 1;
            }
        }
        counts
    }

    fn random_window(seed: u64, w: usize, h: usize, g: usize) -> GrayImage {
        // Small deterministic LCG; independent of the crate's RNG plumbing.
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        GrayImage::from_fn(w, h, g, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as usize % g) as u16
        })
        .unwrap()
    }

    #[test]
    fn two_by_two_example() {
        let win = GrayImage::new(2, 2, 2, vec![0, 1, 0, 1]).unwrap();
        let glcm = compute_glcm(&win, Direction::Deg0, 1).unwrap();
        assert_eq!(glcm.probability(0, 1), 0.5);
        assert_eq!(glcm.probability(1, 0), 0.5);
        assert_eq!(glcm.probability(0, 0), 0.0);
        assert_eq!(glcm.probability(1, 1), 0.0);
    }

    #[test]
    fn constant_window_concentrates_probability() {
        let win = GrayImage::filled(6, 6, 8, 5).unwrap();
        for dir in DIRECTIONS {
            let glcm = compute_glcm(&win, dir, 1).unwrap();
            assert_eq!(glcm.probability(5, 5), 1.0);
        }
    }

    #[test]
    fn matches_brute_force_on_random_windows() {
        for seed in 0..20 {
            let win = random_window(seed, 8, 8, 8);
            for dir in DIRECTIONS {
                let glcm = compute_glcm(&win, dir, 1).unwrap();
                let oracle = brute_force_glcm(&win, dir, 1);
                let got: Vec<u64> = (0..8)
                    .flat_map(|i| (0..8).map(move |j| (i, j)))
                    .map(|(i, j)| glcm.count(i, j))
                    .collect();
                assert_eq!(got, oracle, "seed {seed} dir {dir:?}");
            }
        }
    }

    #[test]
    fn degenerate_window_errors() {
        // A 1x1 window has no pairs at any offset.
        let win = GrayImage::filled(1, 1, 4, 2).unwrap();
        assert!(matches!(
            compute_glcm(&win, Direction::Deg0, 1),
            Err(Error::Degenerate(_))
        ));
        // A 3x3 window has no pairs at distance 3.
        let win = GrayImage::filled(3, 3, 4, 2).unwrap();
        assert!(compute_glcm(&win, Direction::Deg45, 3).is_err());
    }

    #[test]
    fn hand_evaluated_features() {
        // P(0,1) = P(1,0) = 0.5
        let win = GrayImage::new(2, 2, 2, vec![0, 1, 0, 1]).unwrap();
        let f = glcm_features(&compute_glcm(&win, Direction::Deg0, 1).unwrap());
        assert!((f.contrast - 1.0).abs() < 1e-12);
        assert!((f.energy - 0.5).abs() < 1e-12);
        assert!((f.entropy - 1.0).abs() < 1e-12);
        assert!((f.maximum_probability - 0.5).abs() < 1e-12);
        assert!((f.dissimilarity - 1.0).abs() < 1e-12);
        // Both entries sit at |i - j| = 1: 0.5/2 + 0.5/2 for each measure.
        assert!((f.homogeneity - 0.5).abs() < 1e-12);
        assert!((f.inverse_difference_moment - 0.5).abs() < 1e-12);
        // Marginals are uniform over {0, 1}: correlation = -1.
        assert!((f.correlation + 1.0).abs() < 1e-12);
        assert!(!f.correlation_degenerate);
    }

    #[test]
    fn constant_window_features() {
        let win = GrayImage::filled(8, 8, 16, 3).unwrap();
        let f = glcm_features(&compute_glcm(&win, Direction::Deg90, 1).unwrap());
        assert_eq!(f.contrast, 0.0);
        assert_eq!(f.energy, 1.0);
        assert_eq!(f.entropy, 0.0);
        assert_eq!(f.homogeneity, 1.0);
        assert_eq!(f.maximum_probability, 1.0);
        assert_eq!(f.correlation, 0.0);
        assert!(f.correlation_degenerate);
    }

    #[test]
    fn feature_vector_shapes() {
        let win = GrayImage::filled(8, 8, 8, 2).unwrap();
        let v = glcm_feature_vector(&win, 1, false).unwrap();
        assert_eq!(v.dim(), 32);
        // Four identical per-direction tuples for a constant window.
        for d in 1..4 {
            assert_eq!(&v.values[..8], &v.values[d * 8..d * 8 + 8]);
        }
        let avg = glcm_feature_vector(&win, 1, true).unwrap();
        assert_eq!(avg.dim(), 8);
        assert_eq!(&avg.values[..], &v.values[..8]);
    }

    #[test]
    fn horizontal_stripes_maximize_vertical_contrast() {
        // Rows alternate 0 and G-1: along a row every pair is equal, across
        // rows every pair differs maximally.
        let g = 8;
        let win = GrayImage::from_fn(8, 8, g, |r, _| if r % 2 == 0 { 0 } else { g as u16 - 1 })
            .unwrap();
        let v = glcm_feature_vector(&win, 1, false).unwrap();
        let contrast_at = |dir: usize| v.values[dir * 8];
        let c0 = contrast_at(0);
        let c90 = contrast_at(2);
        assert_eq!(c0, 0.0);
        for d in 0..4 {
            assert!(c90 >= contrast_at(d), "90-degree contrast must be maximal");
        }
        assert!(c90 > c0);
    }

    #[test]
    fn zero_degree_glcm_invariant_to_row_permutation() {
        let win = random_window(7, 8, 8, 8);
        let mut rows: Vec<Vec<u16>> = (0..8)
            .map(|r| (0..8).map(|c| win.get(r, c)).collect())
            .collect();
        rows.reverse();
        rows.swap(1, 3);
        let permuted =
            GrayImage::new(8, 8, 8, rows.into_iter().flatten().collect()).unwrap();
        let a = compute_glcm(&win, Direction::Deg0, 1).unwrap();
        let b = compute_glcm(&permuted, Direction::Deg0, 1).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(a.count(i, j), b.count(i, j));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_normalized_and_brute_force_equivalent(
            seed in 0u64..10_000,
            w in 2usize..12,
            h in 2usize..12,
            g in 2usize..8,
        ) {
            let win = random_window(seed, w, h, g);
            for dir in DIRECTIONS {
                let Ok(glcm) = compute_glcm(&win, dir, 1) else { continue };
                let oracle = brute_force_glcm(&win, dir, 1);
                let mut sum = 0.0;
                for i in 0..g {
                    for j in 0..g {
                        prop_assert_eq!(glcm.count(i, j), oracle[i * g + j]);
                        prop_assert_eq!(glcm.count(i, j), glcm.count(j, i));
                        sum += glcm.probability(i, j);
                    }
                }
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn energy_bounded_by_max_probability(seed in 0u64..10_000) {
            let win = random_window(seed, 8, 8, 8);
            let glcm = compute_glcm(&win, Direction::Deg45, 1).unwrap();
            let f = glcm_features(&glcm);
            prop_assert!(f.energy > 0.0);
            prop_assert!(f.energy <= f.maximum_probability + 1e-12);
            prop_assert!(f.maximum_probability <= 1.0);
            prop_assert!(f.entropy >= 0.0);
            prop_assert!(f.contrast >= 0.0);
        }
    }
}
