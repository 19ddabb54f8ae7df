//! Square 2-D complex FFTs on row-major buffers.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

/// In-place unnormalized 2-D transform of an `n x n` row-major array.
pub(crate) fn fft2(data: &mut [Complex64], n: usize, direction: FftDirection) {
    assert_eq!(data.len(), n * n);
    let fft = FftPlanner::new().plan_fft(n, direction);
    let pass = |buf: &mut [Complex64]| {
        buf.par_chunks_mut(n).for_each(|row| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(row, &mut scratch);
        });
    };
    pass(data);
    transpose(data, n);
    pass(data);
    transpose(data, n);
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let n = 8;
        let input: Vec<Complex64> = (0..n * n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut out = input.clone();
        fft2(&mut out, n, FftDirection::Forward);
        for (u, v) in [(0, 0), (1, 3), (5, 7)] {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let ph = -2.0 * std::f64::consts::PI * ((u * i + v * j) as f64) / n as f64;
                    s += input[i * n + j] * Complex64::from_polar(1.0, ph);
                }
            }
            assert!((s - out[u * n + v]).norm() < 1e-12);
        }
    }
}
