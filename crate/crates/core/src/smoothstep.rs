//! C^∞ step with exact plateaus, built from the compactly supported bump
//! `φ(s) = exp(-1/(s(1-s)))`. `S(s) = ∫₀^s φ / ∫₀¹ φ` rises from exactly 0
//! to exactly 1 on [0,1]; derivatives up to third order come from the same
//! closed form.

use crate::pressure::adaptive_simpson;
use crate::scalar::{r, Real};
use std::sync::OnceLock;

#[inline]
fn bump_f64(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

fn bump_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| adaptive_simpson(&bump_f64, 0.0, 1.0, 1e-15, 48))
}

/// Normalized smooth step on `[0,1]` with vanishing derivatives of all
/// orders at the endpoints.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothStep;

impl SmoothStep {
    /// `S(s)`: 0 for `s ≤ 0`, 1 for `s ≥ 1`, strictly increasing between.
    pub fn eval<R: Real>(&self, s: R) -> R {
        let s = s.to_f64_lossy();
        if s <= 0.0 {
            return R::zero();
        }
        if s >= 1.0 {
            return R::one();
        }
        // integrate from the nearest endpoint; better conditioned in the tails
        let v = if s <= 0.5 {
            adaptive_simpson(&bump_f64, 0.0, s, 1e-15, 48) / bump_norm()
        } else {
            1.0 - adaptive_simpson(&bump_f64, s, 1.0, 1e-15, 48) / bump_norm()
        };
        r::<R>(v.clamp(0.0, 1.0))
    }

    /// `S′(s) = φ(s)/c`.
    pub fn d1<R: Real>(&self, s: R) -> R {
        r::<R>(bump_f64(s.to_f64_lossy()) / bump_norm())
    }

    /// `S″(s)`.
    pub fn d2<R: Real>(&self, s: R) -> R {
        let s = s.to_f64_lossy();
        if s <= 0.0 || s >= 1.0 {
            return R::zero();
        }
        let (gp, _) = g_derivs(s);
        r::<R>(bump_f64(s) * gp / bump_norm())
    }

    /// `S‴(s)`.
    pub fn d3<R: Real>(&self, s: R) -> R {
        let s = s.to_f64_lossy();
        if s <= 0.0 || s >= 1.0 {
            return R::zero();
        }
        let (gp, gpp) = g_derivs(s);
        r::<R>(bump_f64(s) * (gp * gp + gpp) / bump_norm())
    }
}

/// First and second derivative of `g(s) = -1/(s(1-s))`, the bump exponent.
fn g_derivs(s: f64) -> (f64, f64) {
    let q = s * (1.0 - s);
    let qp = 1.0 - 2.0 * s;
    let qpp = -2.0;
    let gp = qp / (q * q);
    let gpp = (qpp * q - 2.0 * qp * qp) / (q * q * q);
    (gp, gpp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plateaus() {
        let s = SmoothStep;
        assert_eq!(s.eval::<f64>(-0.5), 0.0);
        assert_eq!(s.eval::<f64>(0.0), 0.0);
        assert_eq!(s.eval::<f64>(1.0), 1.0);
        assert_eq!(s.eval::<f64>(2.0), 1.0);
        assert_eq!(s.d1::<f64>(0.0), 0.0);
        assert_eq!(s.d1::<f64>(1.0), 0.0);
    }

    #[test]
    fn monotone_and_symmetric() {
        let s = SmoothStep;
        let mut prev = 0.0f64;
        for i in 1..=100 {
            let x = i as f64 / 100.0;
            let v = s.eval::<f64>(x);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        // bump is symmetric about 1/2
        assert!((s.eval::<f64>(0.5) - 0.5).abs() < 1e-12);
        assert!((s.eval::<f64>(0.3) + s.eval::<f64>(0.7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = SmoothStep;
        let h = 1e-5f64;
        for &x in &[0.21, 0.4, 0.5, 0.63, 0.8] {
            let d1_fd = (s.eval::<f64>(x + h) - s.eval::<f64>(x - h)) / (2.0 * h);
            assert!((s.d1::<f64>(x) - d1_fd).abs() < 1e-7 * (1.0 + d1_fd.abs()));
            let d2_fd = (s.d1::<f64>(x + h) - s.d1::<f64>(x - h)) / (2.0 * h);
            assert!((s.d2::<f64>(x) - d2_fd).abs() < 1e-6 * (1.0 + d2_fd.abs()));
            let d3_fd = (s.d2::<f64>(x + h) - s.d2::<f64>(x - h)) / (2.0 * h);
            assert!((s.d3::<f64>(x) - d3_fd).abs() < 1e-4 * (1.0 + d3_fd.abs()));
        }
    }
}
