//! Barotropic pressure law and its potential.
//!
//! The default is the power law `p(ϱ) = ϱ^γ`, `γ > 1`, whose potential has
//! the closed form `P(ϱ) = (ϱ^γ − ϱ)/(γ − 1)`. Custom increasing laws are
//! supported with the potential evaluated by adaptive quadrature.

use crate::error::{CoreError, Result};
use crate::scalar::{r, Real};
use std::sync::Arc;

type ScalarFn<R> = Arc<dyn Fn(R) -> R + Send + Sync>;

#[derive(Clone)]
pub enum PressureLaw<R: Real> {
    Power { gamma: R },
    Custom { p: ScalarFn<R>, dp: ScalarFn<R> },
}

impl<R: Real> std::fmt::Debug for PressureLaw<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Power { gamma } => write!(f, "PressureLaw::Power {{ gamma: {gamma} }}"),
            Self::Custom { .. } => write!(f, "PressureLaw::Custom"),
        }
    }
}

impl<R: Real> PressureLaw<R> {
    pub fn power(gamma: R) -> Result<Self> {
        if gamma <= R::one() {
            return Err(CoreError::InvalidInput(format!(
                "gamma must exceed 1, got {gamma}"
            )));
        }
        Ok(Self::Power { gamma })
    }

    pub fn custom(p: ScalarFn<R>, dp: ScalarFn<R>) -> Self {
        Self::Custom { p, dp }
    }

    /// `p(ϱ)`.
    pub fn pressure(&self, rho: R) -> R {
        match self {
            Self::Power { gamma } => rho.powf(*gamma),
            Self::Custom { p, .. } => p(rho),
        }
    }

    /// `p′(ϱ)`.
    pub fn dpressure(&self, rho: R) -> R {
        match self {
            Self::Power { gamma } => *gamma * rho.powf(*gamma - R::one()),
            Self::Custom { dp, .. } => dp(rho),
        }
    }

    /// Pressure potential `P(ϱ) = ϱ ∫₁^ϱ p(z)/z² dz`.
    pub fn potential(&self, rho: R) -> Result<R> {
        if rho <= R::zero() {
            return Err(CoreError::InvalidInput(format!(
                "potential needs positive density, got {rho}"
            )));
        }
        match self {
            Self::Power { gamma } => Ok((rho.powf(*gamma) - rho) / (*gamma - R::one())),
            Self::Custom { p, .. } => {
                let integral = adaptive_simpson(
                    &|z: R| p(z) / (z * z),
                    R::one(),
                    rho,
                    r::<R>(1e-10),
                    40,
                );
                Ok(rho * integral)
            }
        }
    }

    /// `P′(ϱ) = ∫₁^ϱ p(z)/z² dz + p(ϱ)/ϱ`.
    pub fn dpotential(&self, rho: R) -> Result<R> {
        if rho <= R::zero() {
            return Err(CoreError::InvalidInput(format!(
                "potential needs positive density, got {rho}"
            )));
        }
        match self {
            Self::Power { gamma } => {
                Ok((*gamma * rho.powf(*gamma - R::one()) - R::one()) / (*gamma - R::one()))
            }
            Self::Custom { p, .. } => {
                let integral = adaptive_simpson(
                    &|z: R| p(z) / (z * z),
                    R::one(),
                    rho,
                    r::<R>(1e-10),
                    40,
                );
                Ok(integral + p(rho) / rho)
            }
        }
    }

    /// Check monotonicity `p′ > 0` and `p(0⁺) → 0` on a sample of densities.
    pub fn validate(&self, rho_min: R, rho_max: R) -> Result<()> {
        let samples = 64;
        for i in 0..=samples {
            let t = R::from_usize(i).unwrap() / R::from_usize(samples).unwrap();
            let rho = rho_min + (rho_max - rho_min) * t;
            if self.dpressure(rho) <= R::zero() {
        return Err(CoreError::InvalidInput(format!(
                    "pressure not increasing at rho = {rho}"
                )));
            }
        }
        let near_zero = self.pressure(r::<R>(1e-8));
        if near_zero.abs() > r::<R>(1e-4) {
            return Err(CoreError::InvalidInput(
                "pressure does not vanish at zero density".into(),
            ));
        }
        Ok(())
    }
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson<R: Real>(f: &dyn Fn(R) -> R, a: R, b: R, tol: R, max_depth: u32) -> R {
    fn simpson<R: Real>(f: &dyn Fn(R) -> R, a: R, fa: R, b: R, fb: R) -> (R, R, R) {
        let m = (a + b) * r::<R>(0.5);
        let fm = f(m);
        let h = (b - a) / r::<R>(6.0);
        (m, fm, h * (fa + r::<R>(4.0) * fm + fb))
    }
    fn recurse<R: Real>(
        f: &dyn Fn(R) -> R,
        a: R,
        fa: R,
        b: R,
        fb: R,
        m: R,
        fm: R,
        whole: R,
        tol: R,
        depth: u32,
    ) -> R {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= r::<R>(15.0) * tol {
            left + right + delta / r::<R>(15.0)
        } else {
            let half = tol * r::<R>(0.5);
            recurse(f, a, fa, m, fm, lm, flm, left, half, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, half, depth - 1)
        }
    }
    if a == b {
        return R::zero();
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_vanishes_at_one() {
        let law = PressureLaw::<f64>::power(2.0).unwrap();
        assert_eq!(law.potential(1.0).unwrap(), 0.0);
    }

    #[test]
    fn gamma_two_closed_form_vs_quadrature_oracle() {
        // γ = 2: P(2) = (4 − 2)/(2 − 1) = 2, checked against the defining
        // integral evaluated numerically.
        let law = PressureLaw::<f64>::power(2.0).unwrap();
        let closed = law.potential(2.0).unwrap();
        assert!((closed - 2.0).abs() < 1e-12);
        let oracle = 2.0 * adaptive_simpson(&|z: f64| z * z / (z * z), 1.0, 2.0, 1e-12, 40);
        assert!((closed - oracle).abs() < 1e-10);
    }

    #[test]
    fn custom_law_matches_power_law() {
        let p = Arc::new(|rho: f64| rho.powf(1.7));
        let dp = Arc::new(|rho: f64| 1.7 * rho.powf(0.7));
        let custom = PressureLaw::custom(p, dp);
        let power = PressureLaw::<f64>::power(1.7).unwrap();
        for rho in [0.5, 1.0, 1.3, 2.4] {
            let a = custom.potential(rho).unwrap();
            let b = power.potential(rho).unwrap();
            assert!((a - b).abs() < 1e-9, "rho {rho}: {a} vs {b}");
        }
    }

    #[test]
    fn potential_strictly_convex_on_grid() {
        // positive second difference on a sampled density grid
        let law = PressureLaw::<f64>::power(2.0).unwrap();
        let h = 1e-2;
        for i in 1..200 {
            let rho = 0.2 + i as f64 * 1e-2;
            let second = law.potential(rho + h).unwrap() - 2.0 * law.potential(rho).unwrap()
                + law.potential(rho - h).unwrap();
            assert!(second > 0.0, "second difference not positive at {rho}");
        }
    }

    #[test]
    fn rejects_nonpositive_density_and_bad_gamma() {
        let law = PressureLaw::<f64>::power(2.0).unwrap();
        assert!(law.potential(0.0).is_err());
        assert!(law.potential(-1.0).is_err());
        assert!(PressureLaw::<f64>::power(1.0).is_err());
    }

    #[test]
    fn validate_accepts_power_law() {
        let law = PressureLaw::<f64>::power(1.4).unwrap();
        law.validate(0.3, 3.0).unwrap();
    }
}
