//! Small fixed-size transforms used by the feature extractor.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// In-place iterative radix-2 decimation-in-time FFT.
pub fn fft_in_place(data: &mut [Complex64]) -> Result<()> {
    let n = data.len();
    if !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("FFT length {n} is not a power of two")));
    }
    if n <= 1 {
        return Ok(());
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let step = -2.0 * PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = Complex64::from_polar(1.0, step * k as f64);
                let even = data[start + k];
                let odd = data[start + k + half] * w;
                data[start + k] = even + odd;
                data[start + k + half] = even - odd;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// Magnitude spectrum of a real signal whose length is a power of two.
pub fn real_fft_magnitudes(signal: &[f64]) -> Result<Vec<f64>> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf)?;
    Ok(buf.iter().map(|c| c.norm()).collect())
}

/// Level-1 orthonormal Haar approximation coefficients of a 64-point signal.
pub fn dwt_level1(x: &[f64]) -> Result<[f64; 32]> {
    if x.len() != 64 {
        return Err(Error::Dimension {
            expected: 64,
            got: x.len(),
        });
    }
    let mut out = [0.0; 32];
    for (k, pair) in x.chunks_exact(2).enumerate() {
        out[k] = (pair[0] + pair[1]) * FRAC_1_SQRT_2;
    }
    Ok(out)
}
