//! Small shared 2-D FFT helpers on row-major complex buffers.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// In-place 2-D transform: rows first, then columns.
pub(crate) fn fft_2d(buf: &mut [Complex<f64>], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(width)
    } else {
        planner.plan_fft_forward(width)
    };
    for r in 0..height {
        row_fft.process(&mut buf[r * width..(r + 1) * width]);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(height)
    } else {
        planner.plan_fft_forward(height)
    };
    let mut col = vec![Complex::new(0.0, 0.0); height];
    for c in 0..width {
        for r in 0..height {
            col[r] = buf[r * width + c];
        }
        col_fft.process(&mut col);
        for r in 0..height {
            buf[r * width + c] = col[r];
        }
    }
}

/// Smallest integer >= `n` whose prime factors are all in {2, 3, 5}.
pub(crate) fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_smooth_values() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(17), 18);
        assert_eq!(next_smooth(241), 243);
        assert_eq!(next_smooth(640), 640);
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let (w, h) = (12, 10);
        let mut state = 7u64;
        let mut buf: Vec<Complex<f64>> = (0..w * h)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                Complex::new(((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5, 0.0)
            })
            .collect();
        let original = buf.clone();
        fft_2d(&mut buf, w, h, false);
        fft_2d(&mut buf, w, h, true);
        let scale = 1.0 / (w * h) as f64;
        for (a, b) in buf.iter().zip(&original) {
            assert!((a.re * scale - b.re).abs() < 1e-12);
            assert!((a.im * scale).abs() < 1e-12);
        }
    }
}
