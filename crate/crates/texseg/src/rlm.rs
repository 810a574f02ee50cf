//! Grey-level run-length matrices and the five derived statistics.
//!
//! `counts[i][j]` is the number of maximal runs of grey level `i` with
//! length `j` along scan lines in one of four directions (0, 45, 90, 135
//! degrees). Lines are enumerated so every pixel belongs to exactly one
//! line per direction, hence `sum_j j * counts[i][j]` equals the window
//! pixel count.
//!
//! With `N_r` the total number of runs and `P` the pixel count:
//!
//! - short run emphasis: `(1/N_r) sum counts[i][j] / j^2`
//! - long run emphasis: `(1/N_r) sum counts[i][j] * j^2`
//! - grey level non-uniformity: `(1/N_r) sum_i (sum_j counts[i][j])^2`
//! - run length non-uniformity: `(1/N_r) sum_j (sum_i counts[i][j])^2`
//! - run percentage: `N_r / P`

use crate::error::Result;
use crate::features::{Extractor, FeatureVector};
use crate::glcm::{Direction, DIRECTIONS};
use crate::image::GrayImage;

/// A run-length matrix for one scan direction.
#[derive(Debug, Clone)]
pub struct Rlm {
    levels: usize,
    max_run: usize,
    direction: Direction,
    counts: Vec<u64>,
    total_runs: u64,
    pixel_count: u64,
}

impl Rlm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Longest representable run for this direction (the longest scan line).
    pub fn max_run(&self) -> usize {
        self.max_run
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Number of runs of grey level `i` with length `length` (1-based).
    #[inline]
    pub fn count(&self, i: usize, length: usize) -> u64 {
        debug_assert!(length >= 1 && length <= self.max_run);
        self.counts[i * self.max_run + (length - 1)]
    }

    pub fn total_runs(&self) -> u64 {
        self.total_runs
    }

    pub fn pixel_count(&self) -> u64 {
        self.pixel_count
    }
}

/// Enumerates the maximal scan lines of a direction as coordinate sequences.
/// Every pixel of a `w` x `h` raster appears in exactly one line.
fn scan_lines(w: usize, h: usize, direction: Direction) -> Vec<Vec<(usize, usize)>> {
    match direction {
        Direction::Deg0 => (0..h).map(|r| (0..w).map(|c| (r, c)).collect()).collect(),
        Direction::Deg90 => (0..w).map(|c| (0..h).map(|r| (r, c)).collect()).collect(),
        Direction::Deg45 => {
            // Anti-diagonals walked up-right from their bottom-left end.
            (0..w + h - 1)
                .map(|k| {
                    let mut line = Vec::new();
                    let mut r = k.min(h - 1) as isize;
                    let mut c = k as isize - r;
                    while r >= 0 && (c as usize) < w {
                        line.push((r as usize, c as usize));
                        r -= 1;
                        c += 1;
                    }
                    line
                })
                .collect()
        }
        Direction::Deg135 => {
            // Diagonals walked up-left from their bottom-right end.
            let mut starts: Vec<(usize, usize)> = (0..w).map(|c| (h - 1, c)).collect();
            starts.extend((0..h - 1).rev().map(|r| (r, w - 1)));
            starts
                .into_iter()
                .map(|(r0, c0)| {
                    let mut line = Vec::new();
                    let (mut r, mut c) = (r0 as isize, c0 as isize);
                    while r >= 0 && c >= 0 {
                        line.push((r as usize, c as usize));
                        r -= 1;
                        c -= 1;
                    }
                    line
                })
                .collect()
        }
    }
}

/// Counts maximal equal-level runs along every scan line of `direction`.
pub fn compute_rlm(window: &GrayImage, direction: Direction) -> Result<Rlm> {
    let (w, h) = (window.width(), window.height());
    let levels = window.levels();
    let max_run = match direction {
        Direction::Deg0 => w,
        Direction::Deg90 => h,
        Direction::Deg45 | Direction::Deg135 => w.min(h),
    };

    let mut counts = vec![0u64; levels * max_run];
    let mut total_runs = 0u64;
    for line in scan_lines(w, h, direction) {
        let mut iter = line.iter();
        let Some(&(r0, c0)) = iter.next() else { continue };
        let mut level = window.get(r0, c0);
        let mut run = 1usize;
        for &(r, c) in iter {
            let v = window.get(r, c);
            if v == level {
                run += 1;
            } else {
                counts[level as usize * max_run + (run - 1)] += 1;
                total_runs += 1;
                level = v;
                run = 1;
            }
        }
        counts[level as usize * max_run + (run - 1)] += 1;
        total_runs += 1;
    }

    Ok(Rlm {
        levels,
        max_run,
        direction,
        counts,
        total_runs,
        pixel_count: (w * h) as u64,
    })
}

/// The five run-length statistics for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlmFeatures {
    pub short_run_emphasis: f64,
    pub long_run_emphasis: f64,
    pub gray_level_nonuniformity: f64,
    pub run_length_nonuniformity: f64,
    pub run_percentage: f64,
}

pub const RLM_FEATURES_PER_DIRECTION: usize = 5;

impl RlmFeatures {
    pub fn as_array(&self) -> [f64; RLM_FEATURES_PER_DIRECTION] {
        [
            self.short_run_emphasis,
            self.long_run_emphasis,
            self.gray_level_nonuniformity,
            self.run_length_nonuniformity,
            self.run_percentage,
        ]
    }
}

pub fn rlm_features(rlm: &Rlm) -> RlmFeatures {
    // Every pixel of a nonempty window lies in exactly one run, so the
    // total is positive by construction.
    let n_r = rlm.total_runs() as f64;
    let mut sre = 0.0;
    let mut lre = 0.0;
    let mut level_sums = vec![0u64; rlm.levels()];
    let mut length_sums = vec![0u64; rlm.max_run()];
    for i in 0..rlm.levels() {
        for j in 1..=rlm.max_run() {
            let c = rlm.count(i, j);
            if c == 0 {
                continue;
            }
            let jj = (j * j) as f64;
            sre += c as f64 / jj;
            lre += c as f64 * jj;
            level_sums[i] += c;
            length_sums[j - 1] += c;
        }
    }
    let gln: f64 = level_sums.iter().map(|&s| (s as f64) * (s as f64)).sum();
    let rln: f64 = length_sums.iter().map(|&s| (s as f64) * (s as f64)).sum();
    RlmFeatures {
        short_run_emphasis: sre / n_r,
        long_run_emphasis: lre / n_r,
        gray_level_nonuniformity: gln / n_r,
        run_length_nonuniformity: rln / n_r,
        run_percentage: n_r / rlm.pixel_count() as f64,
    }
}

/// Four directions times five statistics, direction-major: the 20-dim vector.
pub fn rlm_feature_vector(window: &GrayImage) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(20);
    for dir in DIRECTIONS {
        let rlm = compute_rlm(window, dir)?;
        values.extend(rlm_features(&rlm).as_array());
    }
    FeatureVector::new(Extractor::Rlm, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: walk each scan line and split it into runs with a
    /// plain state machine over the materialized coordinate list.
    fn brute_force_runs(window: &GrayImage, direction: Direction) -> Vec<(u16, usize)> {
        let lines = match direction {
            Direction::Deg0 => (0..window.height())
                .map(|r| (0..window.width()).map(|c| (r, c)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            Direction::Deg90 => (0..window.width())
                .map(|c| (0..window.height()).map(|r| (r, c)).collect())
                .collect(),
            Direction::Deg45 => {
                let mut by_sum: Vec<Vec<(usize, usize)>> =
                    vec![Vec::new(); window.width() + window.height() - 1];
                for r in (0..window.height()).rev() {
                    for c in 0..window.width() {
                        by_sum[r + c].push((r, c));
                    }
                }
                by_sum
            }
            Direction::Deg135 => {
                let off = window.width() - 1;
                let mut by_diff: Vec<Vec<(usize, usize)>> =
                    vec![Vec::new(); window.width() + window.height() - 1];
                for r in (0..window.height()).rev() {
                    for c in (0..window.width()).rev() {
                        by_diff[r + off - c].push((r, c));
                    }
                }
                by_diff
            }
        };
        let mut runs = Vec::new();
        for line in lines {
            let mut current: Option<(u16, usize)> = None;
            for (r, c) in line {
                let v = window.get(r, c);
                current = match current {
                    Some((lv, len)) if lv == v => Some((lv, len + 1)),
                    Some(done) => {
                        runs.push(done);
                        Some((v, 1))
                    }
                    None => Some((v, 1)),
                };
            }
            if let Some(done) = current {
                runs.push(done);
            }
        }
        runs
    }

    fn assert_matches_oracle(win: &GrayImage, dir: Direction) {
        let rlm = compute_rlm(win, dir).unwrap();
        let mut expected = vec![0u64; win.levels() * rlm.max_run()];
        for (level, len) in brute_force_runs(win, dir) {
            expected[level as usize * rlm.max_run() + (len - 1)] += 1;
        }
        for i in 0..win.levels() {
            for j in 1..=rlm.max_run() {
                assert_eq!(
                    rlm.count(i, j),
                    expected[i * rlm.max_run() + (j - 1)],
                    "level {i} length {j} dir {dir:?}"
                );
            }
        }
    }

    fn random_window(seed: u64, w: usize, h: usize, g: usize) -> GrayImage {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(0x2545f491);
        GrayImage::from_fn(w, h, g, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as usize % g) as u16
        })
        .unwrap()
    }

    #[test]
    fn paired_rows_example() {
        // Every row [0, 0, 1, 1]: four runs of each level, all length 2.
        let win = GrayImage::new(4, 4, 2, vec![0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1])
            .unwrap();
        let rlm = compute_rlm(&win, Direction::Deg0).unwrap();
        assert_eq!(rlm.count(0, 2), 4);
        assert_eq!(rlm.count(1, 2), 4);
        assert_eq!(rlm.total_runs(), 8);

        let f = rlm_features(&rlm);
        assert!((f.short_run_emphasis - 0.25).abs() < 1e-12);
        assert!((f.long_run_emphasis - 4.0).abs() < 1e-12);
        assert!((f.gray_level_nonuniformity - 4.0).abs() < 1e-12);
        assert!((f.run_length_nonuniformity - 8.0).abs() < 1e-12);
        assert!((f.run_percentage - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_window_runs() {
        let n = 6;
        let win = GrayImage::filled(n, n, 4, 2).unwrap();
        let rlm = compute_rlm(&win, Direction::Deg0).unwrap();
        assert_eq!(rlm.count(2, n), n as u64);
        let f = rlm_features(&rlm);
        assert!((f.short_run_emphasis - 1.0 / (n * n) as f64).abs() < 1e-12);
        assert!((f.long_run_emphasis - (n * n) as f64).abs() < 1e-12);
        assert!((f.run_percentage - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_runs_all_unit_length() {
        let win = GrayImage::from_fn(6, 6, 2, |r, c| ((r + c) % 2) as u16).unwrap();
        let rlm = compute_rlm(&win, Direction::Deg0).unwrap();
        assert_eq!(rlm.total_runs(), 36);
        let f = rlm_features(&rlm);
        assert_eq!(f.short_run_emphasis, 1.0);
        assert_eq!(f.long_run_emphasis, 1.0);
        assert_eq!(f.run_percentage, 1.0);
    }

    #[test]
    fn feature_vector_shape_and_symmetry() {
        let win = GrayImage::filled(8, 8, 4, 1).unwrap();
        let v = rlm_feature_vector(&win).unwrap();
        assert_eq!(v.dim(), 20);
        // Constant square window: the 0- and 90-degree tuples coincide.
        assert_eq!(&v.values[0..5], &v.values[10..15]);
    }

    #[test]
    fn horizontal_stripes_emphasize_horizontal_runs() {
        let g = 4;
        let win = GrayImage::from_fn(8, 8, g, |r, _| if r % 2 == 0 { 0 } else { g as u16 - 1 })
            .unwrap();
        let v = rlm_feature_vector(&win).unwrap();
        let lre_0 = v.values[1];
        let lre_90 = v.values[11];
        assert!(lre_0 > lre_90);
        assert_eq!(lre_0, 64.0);
        assert_eq!(lre_90, 1.0);
    }

    #[test]
    fn diagonal_lines_cover_all_pixels_in_rectangles() {
        for (w, h) in [(5, 3), (3, 5), (7, 7), (1, 4), (4, 1)] {
            for dir in DIRECTIONS {
                let lines = scan_lines(w, h, dir);
                let mut seen = vec![0u8; w * h];
                for line in &lines {
                    for &(r, c) in line {
                        seen[r * w + c] += 1;
                    }
                }
                assert!(seen.iter().all(|&s| s == 1), "{w}x{h} {dir:?}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conservation_and_oracle_equivalence(
            seed in 0u64..10_000,
            w in 1usize..12,
            h in 1usize..12,
            g in 2usize..8,
        ) {
            let win = random_window(seed, w, h, g);
            for dir in DIRECTIONS {
                let rlm = compute_rlm(&win, dir).unwrap();
                let covered: u64 = (0..g)
                    .flat_map(|i| (1..=rlm.max_run()).map(move |j| (i, j)))
                    .map(|(i, j)| j as u64 * rlm.count(i, j))
                    .sum();
                prop_assert_eq!(covered, (w * h) as u64);
                assert_matches_oracle(&win, dir);

                let f = rlm_features(&rlm);
                prop_assert!(f.run_percentage > 0.0 && f.run_percentage <= 1.0);
                prop_assert!(f.short_run_emphasis > 0.0 && f.short_run_emphasis <= 1.0);
                prop_assert!(f.long_run_emphasis >= 1.0);
                prop_assert!(f.long_run_emphasis >= f.short_run_emphasis);
            }
        }
    }
}
