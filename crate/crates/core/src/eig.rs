//! Maximal eigenvalue of small symmetric matrices, closed form.

use crate::error::{CoreError, Result};
use crate::grid::MAX_DIM;
use crate::scalar::{r, Real};

/// Largest eigenvalue of a symmetric `dim × dim` matrix stored dense.
///
/// 2-D uses `(a+c)/2 + sqrt(((a-c)/2)² + b²)`; 3-D the trigonometric
/// solution of the characteristic cubic.
pub fn lambda_max<R: Real>(m: &[[R; MAX_DIM]; MAX_DIM], dim: usize) -> Result<R> {
    check_symmetric(m, dim)?;
    Ok(lambda_max_unchecked(m, dim))
}

/// As [`lambda_max`] without the symmetry check (hot paths build symmetric
/// matrices by construction).
#[inline]
pub fn lambda_max_unchecked<R: Real>(m: &[[R; MAX_DIM]; MAX_DIM], dim: usize) -> R {
    match dim {
        2 => {
            let half_tr = (m[0][0] + m[1][1]) * r::<R>(0.5);
            let half_diff = (m[0][0] - m[1][1]) * r::<R>(0.5);
            half_tr + (half_diff * half_diff + m[0][1] * m[0][1]).sqrt()
        }
        3 => lambda_max_3x3(m),
        _ => unreachable!("dim must be 2 or 3"),
    }
}

fn lambda_max_3x3<R: Real>(m: &[[R; MAX_DIM]; MAX_DIM]) -> R {
    let third = R::one() / r::<R>(3.0);
    let q = (m[0][0] + m[1][1] + m[2][2]) * third;
    let mut p2 = R::zero();
    for i in 0..3 {
        let d = m[i][i] - q;
        p2 += d * d;
    }
    p2 += r::<R>(2.0) * (m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]);
    if p2 <= R::epsilon() * (q * q + R::one()) {
        // effectively a multiple of the identity
        return q;
    }
    let p = (p2 / r::<R>(6.0)).sqrt();
    // B = (M - qI)/p; λ = q + 2p cos(acos(det(B)/2)/3) is the largest root
    let b = |i: usize, j: usize| {
        let v = m[i][j];
        if i == j {
            (v - q) / p
        } else {
            v / p
        }
    };
    let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
        - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let half_det = (det_b * r::<R>(0.5)).max(-R::one()).min(R::one());
    let phi = half_det.acos() * third;
    q + r::<R>(2.0) * p * phi.cos()
}

fn check_symmetric<R: Real>(m: &[[R; MAX_DIM]; MAX_DIM], dim: usize) -> Result<()> {
    let mut scale = R::zero();
    for i in 0..dim {
        for j in 0..dim {
            scale = scale.max(m[i][j].abs());
        }
    }
    let tol = r::<R>(1e-12) * scale.max(R::one());
    for i in 0..dim {
        for j in (i + 1)..dim {
            let defect = (m[i][j] - m[j][i]).abs();
            if defect > tol {
                return Err(CoreError::AsymmetricInput(defect.to_f64_lossy()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Power iteration on `S + cI` with `c` large enough to make the shifted
    /// matrix positive definite; independent oracle for the closed forms.
    fn lambda_max_power(m: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> f64 {
        let mut scale = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                scale = scale.max(m[i][j].abs());
            }
        }
        let shift = 4.0 * scale + 1.0;
        let mut v = [1.0f64; MAX_DIM];
        let mut lambda = 0.0;
        for _ in 0..8000 {
            let mut w = [0.0f64; MAX_DIM];
            for i in 0..dim {
                for j in 0..dim {
                    w[i] += m[i][j] * v[j];
                }
                w[i] += shift * v[i];
            }
            let norm = w.iter().take(dim).map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..dim {
                v[i] = w[i] / norm;
            }
            lambda = norm;
        }
        lambda - shift
    }

    #[test]
    fn identity_and_diagonal() {
        let mut id = [[0.0f64; MAX_DIM]; MAX_DIM];
        for i in 0..3 {
            id[i][i] = 1.0;
        }
        assert!((lambda_max(&id, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!((lambda_max(&id, 3).unwrap() - 1.0).abs() < 1e-14);

        let mut d = [[0.0f64; MAX_DIM]; MAX_DIM];
        d[0][0] = 3.0;
        d[1][1] = -1.0;
        assert!((lambda_max(&d, 2).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let mut m = [[0.0f64; MAX_DIM]; MAX_DIM];
        m[0][1] = 1.0;
        m[1][0] = 1.0 + 1e-6;
        assert!(matches!(
            lambda_max(&m, 2),
            Err(CoreError::AsymmetricInput(_))
        ));
    }

    #[test]
    fn random_matrices_match_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for dim in [2usize, 3] {
            for _ in 0..1000 {
                let mut m = [[0.0f64; MAX_DIM]; MAX_DIM];
                for i in 0..dim {
                    for j in i..dim {
                        let v = rng.gen_range(-2.0..2.0);
                        m[i][j] = v;
                        m[j][i] = v;
                    }
                }
                let fast = lambda_max(&m, dim).unwrap();
                let slow = lambda_max_power(&m, dim);
                assert!(
                    (fast - slow).abs() < 1e-10 * (1.0 + slow.abs()),
                    "dim {dim}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn subadditivity_on_trace_free_samples() {
        // λ_max(A+B) ≤ λ_max(A) + λ_max(B)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3] {
            for _ in 0..500 {
                let mut a = [[0.0f64; MAX_DIM]; MAX_DIM];
                let mut b = [[0.0f64; MAX_DIM]; MAX_DIM];
                for m in [&mut a, &mut b] {
                    for i in 0..dim {
                        for j in i..dim {
                            let v = rng.gen_range(-1.0..1.0);
                            m[i][j] = v;
                            m[j][i] = v;
                        }
                    }
                    // remove trace
                    let tr: f64 = (0..dim).map(|i| m[i][i]).sum();
                    for i in 0..dim {
                        m[i][i] -= tr / dim as f64;
                    }
                }
                let mut s = [[0.0f64; MAX_DIM]; MAX_DIM];
                for i in 0..dim {
                    for j in 0..dim {
                        s[i][j] = a[i][j] + b[i][j];
                    }
                }
                let la = lambda_max(&a, dim).unwrap();
                let lb = lambda_max(&b, dim).unwrap();
                let ls = lambda_max(&s, dim).unwrap();
                assert!(ls <= la + lb + 1e-12);
            }
        }
    }
}
