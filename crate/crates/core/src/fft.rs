//! Iterative radix-2 complex FFT for power-of-two lengths.

use crate::scalar::Real;
use num_complex::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place radix-2 Cooley-Tukey transform.
///
/// Forward computes `X_k = Σ_j x_j e^{-2πi jk/n}`; inverse applies the
/// conjugate kernel and the `1/n` normalization, so the pair is an identity.
pub fn fft_in_place<R: Real>(data: &mut [Complex<R>], dir: Direction) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // bit reversal permutation
    let mut j = 0usize;
    for i in 0..n - 1 {
        if i < j {
            data.swap(i, j);
        }
        let mut m = n >> 1;
        while m >= 1 && j & m != 0 {
            j ^= m;
            m >>= 1;
        }
        j |= m;
    }

    let sign = match dir {
        Direction::Forward => -R::one(),
        Direction::Inverse => R::one(),
    };
    let mut len = 2usize;
    while len <= n {
        let ang = sign * (R::PI() + R::PI()) / R::from_usize(len).unwrap();
        let wlen = Complex::new(ang.cos(), ang.sin());
        let half = len / 2;
        let mut start = 0usize;
        while start < n {
            let mut w = Complex::new(R::one(), R::zero());
            for k in 0..half {
                let u = data[start + k];
                let v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
                w = w * wlen;
            }
            start += len;
        }
        len <<= 1;
    }

    if let Direction::Inverse = dir {
        let scale = R::one() / R::from_usize(n).unwrap();
        for z in data.iter_mut() {
            *z = Complex::new(z.re * scale, z.im * scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::r;

    /// Direct O(n^2) discrete Fourier sum, the independent oracle.
    pub fn dft_naive<R: Real>(data: &[Complex<R>]) -> Vec<Complex<R>> {
        let n = data.len();
        let mut out = vec![Complex::new(R::zero(), R::zero()); n];
        for (k, item) in out.iter_mut().enumerate() {
            let mut acc = Complex::new(R::zero(), R::zero());
            for (j, &x) in data.iter().enumerate() {
                let ang =
                    -r::<R>(2.0) * R::PI() * R::from_usize(j * k % n).unwrap()
                        / R::from_usize(n).unwrap();
                acc = acc + x * Complex::new(ang.cos(), ang.sin());
            }
            *item = acc;
        }
        out
    }

    #[test]
    fn matches_naive_dft_at_resolution_8() {
        // deterministic pseudo-random input
        let mut state = 0x1234_5678u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let data: Vec<Complex<f64>> = (0..8).map(|_| Complex::new(next(), next())).collect();
        let mut fast = data.clone();
        fft_in_place(&mut fast, Direction::Forward);
        let slow = dft_naive(&data);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).norm() < 1e-12, "fft disagrees with direct sum");
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let data: Vec<Complex<f64>> = (0..64).map(|_| Complex::new(next(), next())).collect();
        let mut work = data.clone();
        fft_in_place(&mut work, Direction::Forward);
        fft_in_place(&mut work, Direction::Inverse);
        let scale: f64 = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in work.iter().zip(data.iter()) {
            assert!((a - b).norm() <= 1e-12 * scale.max(1.0));
        }
    }
}
