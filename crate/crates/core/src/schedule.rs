//! Prescribed density evolution and its acoustic potential.
//!
//! The density interpolates between the initial field and its mean through a
//! smooth cutoff `h`: `ϱ(t,x) = h(t) ϱ0(x) + (1-h(t)) ϱ̃`, with `h ≡ 1` on
//! `[0, T/4]` and `h ≡ 0` on `[3T/4, T]`. The acoustic potential solves
//! `-ΔΨ = ∂t ϱ = h'(t)(ϱ0 - ϱ̃)` with zero mean, so its spatial profile is
//! fixed once and scaled by `h'` in time.

use crate::error::{CoreError, Result};
use crate::field::{gradient, solve_poisson, ScalarField, VectorField};
use crate::grid::PeriodicGrid;
use crate::scalar::{r, Real};
use crate::smoothstep::SmoothStep;
use serde::{Deserialize, Serialize};

/// One Fourier mode of the initial density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMode {
    /// integer wavevector (entries beyond the dimension are ignored)
    pub k: [i64; 3],
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Initial density as a constant plus finitely many cosine modes; guarantees
/// smoothness and a controllable gradient bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rho0Spec {
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<DensityMode>,
}

impl Rho0Spec {
    pub fn constant(mean: f64) -> Self {
        Self {
            mean,
            modes: Vec::new(),
        }
    }

    pub fn single_mode(mean: f64, k: [i64; 3], amplitude: f64) -> Self {
        Self {
            mean,
            modes: vec![DensityMode {
                k,
                amplitude,
                phase: 0.0,
            }],
        }
    }

    /// Build and validate positivity.
    pub fn build<R: Real>(&self, grid: PeriodicGrid) -> Result<ScalarField<R>> {
        if self.mean <= 0.0 {
            return Err(CoreError::InvalidInput(format!(
                "rho0 mean must be positive, got {}",
                self.mean
            )));
        }
        let field = self.synthesize::<R>(grid)?;
        if field.min() <= R::zero() {
            return Err(CoreError::InvalidInput(
                "rho0 not positive everywhere".into(),
            ));
        }
        Ok(field)
    }

    /// Evaluate `mean + Σ a cos(π k·x + phase)` without positivity checks.
    pub fn synthesize<R: Real>(&self, grid: PeriodicGrid) -> Result<ScalarField<R>> {
        for m in &self.modes {
            let active = &m.k[..grid.dim()];
            if active.iter().all(|k| *k == 0) {
                return Err(CoreError::InvalidInput(
                    "rho0 modes must have a nonzero wavevector; fold constants into `mean`"
                        .into(),
                ));
            }
            if m.k[grid.dim()..].iter().any(|k| *k != 0) {
                return Err(CoreError::InvalidInput(format!(
                    "rho0 mode {:?} uses axes beyond dimension {}",
                    m.k,
                    grid.dim()
                )));
            }
        }
        let mean = r::<R>(self.mean);
        let modes = self.modes.clone();
        let field = ScalarField::from_fn(grid, |x| {
            let mut v = mean;
            for m in &modes {
                let mut phase = r::<R>(m.phase);
                for a in 0..grid.dim() {
                    phase += R::PI() * R::from_i64(m.k[a]).unwrap() * x[a];
                }
                v += r::<R>(m.amplitude) * phase.cos();
            }
            v
        });
        Ok(field)
    }
}

/// Smooth cutoff driving the density interpolation, with analytic
/// derivatives up to third order and exact plateaus.
#[derive(Debug, Clone)]
pub struct Cutoff<R: Real> {
    horizon: R,
    step: SmoothStep,
}

impl<R: Real> Cutoff<R> {
    pub fn new(horizon: R) -> Result<Self> {
        if horizon <= R::zero() {
            return Err(CoreError::InvalidInput("time horizon must be positive".into()));
        }
        Ok(Self {
            horizon,
            step: SmoothStep,
        })
    }

    #[inline]
    fn local(&self, t: R) -> R {
        // maps [T/4, 3T/4] to [0, 1]
        (t - self.horizon * r::<R>(0.25)) / (self.horizon * r::<R>(0.5))
    }

    pub fn check_range(&self, t: R) -> Result<()> {
        if t < R::zero() || t > self.horizon {
            return Err(CoreError::InvalidInput(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `h(t)`; equals 1 on `[0, T/4]` and 0 on `[3T/4, T]` exactly, and is
    /// monotone non-increasing.
    pub fn eval(&self, t: R) -> R {
        R::one() - self.step.eval(self.local(t))
    }

    pub fn d1(&self, t: R) -> R {
        let scale = R::one() / (self.horizon * r::<R>(0.5));
        -self.step.d1(self.local(t)) * scale
    }

    pub fn d2(&self, t: R) -> R {
        let scale = R::one() / (self.horizon * r::<R>(0.5));
        -self.step.d2(self.local(t)) * scale * scale
    }

    pub fn d3(&self, t: R) -> R {
        let scale = R::one() / (self.horizon * r::<R>(0.5));
        -self.step.d3(self.local(t)) * scale * scale * scale
    }
}

/// The prescribed density evolution with its acoustic potential.
#[derive(Debug, Clone)]
pub struct DensitySchedule<R: Real> {
    grid: PeriodicGrid,
    horizon: R,
    cutoff: Cutoff<R>,
    rho0: ScalarField<R>,
    rho_tilde: R,
    rho_lower: R,
    rho_upper: R,
    /// spatial profile of the acoustic potential: `-ΔΨ₁ = ϱ0 - ϱ̃`, `∫Ψ₁ = 0`
    psi_profile: ScalarField<R>,
    grad_psi_profile: VectorField<R>,
    grad_rho0: VectorField<R>,
}

impl<R: Real> DensitySchedule<R> {
    pub fn new(grid: PeriodicGrid, spec: &Rho0Spec, horizon: R) -> Result<Self> {
        let rho0 = spec.build::<R>(grid)?;
        let rho_tilde = rho0.mean();
        let source = rho0.map(|v| v - rho_tilde);
        let psi_profile = solve_poisson(&source)?;
        let grad_psi_profile = gradient(&psi_profile);
        let grad_rho0 = gradient(&rho0);
        Ok(Self {
            grid,
            horizon,
            cutoff: Cutoff::new(horizon)?,
            rho_lower: rho0.min(),
            rho_upper: rho0.max(),
            rho0,
            rho_tilde,
            psi_profile,
            grad_psi_profile,
            grad_rho0,
        })
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn horizon(&self) -> R {
        self.horizon
    }

    #[inline]
    pub fn cutoff(&self) -> &Cutoff<R> {
        &self.cutoff
    }

    #[inline]
    pub fn rho0(&self) -> &ScalarField<R> {
        &self.rho0
    }

    #[inline]
    pub fn rho_tilde(&self) -> R {
        self.rho_tilde
    }

    #[inline]
    pub fn rho_bounds(&self) -> (R, R) {
        (
            self.rho_lower.min(self.rho_tilde),
            self.rho_upper.max(self.rho_tilde),
        )
    }

    #[inline]
    pub fn psi_profile(&self) -> &ScalarField<R> {
        &self.psi_profile
    }

    #[inline]
    pub fn grad_psi_profile(&self) -> &VectorField<R> {
        &self.grad_psi_profile
    }

    #[inline]
    pub fn grad_rho0(&self) -> &VectorField<R> {
        &self.grad_rho0
    }

    /// Clamp-free pointwise density at cutoff value `h`.
    #[inline]
    pub fn density_value(&self, h: R, node: usize) -> R {
        h * self.rho0.values()[node] + (R::one() - h) * self.rho_tilde
    }

    /// `ϱ(t,·) = h(t) ϱ0 + (1-h(t)) ϱ̃`.
    pub fn density_at(&self, t: R) -> ScalarField<R> {
        let h = self.cutoff.eval(t);
        self.rho0
            .map(|v| h * v + (R::one() - h) * self.rho_tilde)
    }

    /// `∂t ϱ(t,·) = h'(t)(ϱ0 - ϱ̃)`.
    pub fn density_rate_at(&self, t: R) -> ScalarField<R> {
        let hd = self.cutoff.d1(t);
        self.rho0.map(|v| hd * (v - self.rho_tilde))
    }

    /// Acoustic potential and its first two time derivatives:
    /// `Ψ(t,·) = h'(t) Ψ₁`, `∂tΨ = h''(t) Ψ₁`, `∂²ttΨ = h'''(t) Ψ₁`.
    pub fn acoustic_potential(&self, t: R) -> (ScalarField<R>, ScalarField<R>, ScalarField<R>) {
        let d1 = self.cutoff.d1(t);
        let d2 = self.cutoff.d2(t);
        let d3 = self.cutoff.d3(t);
        (
            self.psi_profile.scale(d1),
            self.psi_profile.scale(d2),
            self.psi_profile.scale(d3),
        )
    }

    /// `∇Ψ(t,·) = h'(t) ∇Ψ₁`.
    pub fn grad_psi_at(&self, t: R) -> VectorField<R> {
        self.grad_psi_profile.scale(self.cutoff.d1(t))
    }

    /// Pointwise `∂tΨ(t, node)`.
    #[inline]
    pub fn dt_psi_value(&self, t: R, node: usize) -> R {
        self.cutoff.d2(t) * self.psi_profile.values()[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> DensitySchedule<f64> {
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let spec = Rho0Spec::single_mode(1.0, [1, 0, 0], 0.12);
        DensitySchedule::new(grid, &spec, 1.0).unwrap()
    }

    #[test]
    fn cutoff_boundary_and_plateau_values() {
        let c = Cutoff::new(1.0f64).unwrap();
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(1.0), 0.0);
        // plateau on [0, T/4]
        assert_eq!(c.eval(0.125), 1.0);
        assert_eq!(c.d1(0.125), 0.0);
        assert_eq!(c.d2(0.125), 0.0);
        assert_eq!(c.d3(0.125), 0.0);
        // plateau on [3T/4, T]
        assert_eq!(c.eval(0.8), 0.0);
        assert_eq!(c.d1(0.9), 0.0);
    }

    #[test]
    fn cutoff_monotone_between_plateaus() {
        let c = Cutoff::new(1.0f64).unwrap();
        let mid = c.eval(0.5);
        assert!(mid > 0.0 && mid < 1.0);
        let mut prev = 1.0f64;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let v = c.eval(t);
            assert!(v <= prev + 1e-15, "h not non-increasing at t={t}");
            prev = v;
        }
    }

    #[test]
    fn density_endpoints_and_mass_conservation() {
        let s = schedule();
        let d0 = s.density_at(0.0);
        for (a, b) in d0.values().iter().zip(s.rho0().values().iter()) {
            assert_eq!(a, b);
        }
        let dt_end = s.density_at(1.0);
        for v in dt_end.values() {
            assert!((v - s.rho_tilde()).abs() < 1e-15);
        }
        // spatial mean is t-independent
        let m0 = s.rho0().mean();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!((s.density_at(t).mean() - m0).abs() < 1e-12);
        }
        // lower bound
        let (lo, _hi) = s.rho_bounds();
        assert!(lo > 0.0);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!(s.density_at(t).min() >= lo - 1e-14);
        }
    }

    #[test]
    fn acoustic_potential_plateau_and_constraints() {
        let s = schedule();
        for t in [0.0, 0.2, 0.8, 1.0] {
            let (psi, _, _) = s.acoustic_potential(t);
            assert!(psi.linf() < 1e-14, "Ψ should vanish on plateaus, t={t}");
        }
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let (psi, _, _) = s.acoustic_potential(t);
            assert!(psi.mean().abs() < 1e-12);
        }
    }

    #[test]
    fn acoustic_potential_laplacian_oracle() {
        // -ΔΨ = h'(t)(ϱ0 - ϱ̃) via the spectral Laplacian
        let s = schedule();
        let t = 0.47;
        let (psi, _, _) = s.acoustic_potential(t);
        let lap = psi.transform().laplacian().inverse();
        let rate = s.density_rate_at(t);
        for (l, r) in lap.values().iter().zip(rate.values().iter()) {
            assert!((l + r).abs() < 1e-10 * rate.linf().max(1.0));
        }
    }

    #[test]
    fn p1_compatibility() {
        // ∂tϱ + ΔΨ = 0 exactly (both sides from the same h′ and profile)
        let s = schedule();
        for i in 1..8 {
            let t = i as f64 / 8.0;
            let (psi, _, _) = s.acoustic_potential(t);
            let lap = psi.transform().laplacian().inverse();
            let rate = s.density_rate_at(t);
            let resid = rate.add(&lap).unwrap();
            assert!(resid.linf() < 1e-10 * (1.0 + rate.linf()));
        }
    }

    #[test]
    fn rejects_bad_rho0() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        assert!(Rho0Spec::single_mode(1.0, [0, 0, 0], 0.1)
            .build::<f64>(grid)
            .is_err());
        assert!(Rho0Spec::single_mode(1.0, [1, 0, 0], 1.5)
            .build::<f64>(grid)
            .is_err());
        assert!(Rho0Spec::single_mode(1.0, [0, 0, 1], 0.1)
            .build::<f64>(grid)
            .is_err());
        assert!(Rho0Spec::constant(-1.0).build::<f64>(grid).is_err());
    }
}
