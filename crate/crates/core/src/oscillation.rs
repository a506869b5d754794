//! Oscillatory increments: time-localized transverse waves that raise
//! kinetic energy while keeping the relaxed constraint exact.
//!
//! An increment is a closed-form record, never a stored grid: a flat-top
//! carrier along one grid axis, polarized perpendicular to it, with a smooth
//! amplitude profile along the carrier axis and a smooth time bump. Because
//! the polarization is orthogonal to every wavevector of the profile, the
//! field is divergence-free exactly; the compensating tensor is assembled
//! per evaluation time from the canonical quadratic part plus an exact
//! divergence inverse of the leftover, so `∂t w + div U = 0` holds to
//! machine precision at every time it is queried.

use crate::error::{CoreError, Result};
use crate::fft::{fft_in_place, Direction};
use crate::field::VectorField;
use crate::grid::{PeriodicGrid, MAX_DIM};
use crate::scalar::{r, Real};
use crate::smoothstep::SmoothStep;
use crate::sparse::{SparseScalar, SparseVector};
use num_complex::Complex;
use serde::Serialize;
use std::sync::{Mutex, OnceLock};

/// Smooth bump supported exactly on `[t0, t1]`, identically 1 on the middle
/// half, built from two smooth steps.
#[derive(Debug, Clone)]
pub struct TimeBump<R: Real> {
    t0: R,
    t1: R,
    ramp: R,
    step: SmoothStep,
}

impl<R: Real> TimeBump<R> {
    pub fn new(t0: R, t1: R) -> Result<Self> {
        if t1 <= t0 {
            return Err(CoreError::InvalidInput("empty time window".into()));
        }
        Ok(Self {
            t0,
            t1,
            ramp: (t1 - t0) * r::<R>(0.25),
            step: SmoothStep,
        })
    }

    #[inline]
    pub fn support(&self) -> (R, R) {
        (self.t0, self.t1)
    }

    pub fn eval(&self, t: R) -> R {
        if t <= self.t0 || t >= self.t1 {
            return R::zero();
        }
        self.step.eval((t - self.t0) / self.ramp) * self.step.eval((self.t1 - t) / self.ramp)
    }

    pub fn d1(&self, t: R) -> R {
        if t <= self.t0 || t >= self.t1 {
            return R::zero();
        }
        let a = (t - self.t0) / self.ramp;
        let b = (self.t1 - t) / self.ramp;
        (self.step.d1(a) * self.step.eval(b) - self.step.eval(a) * self.step.d1(b)) / self.ramp
    }
}

/// Odd-harmonic coefficients of a near-square profile `s(u)` with `|s| ≤ 1`:
/// `s(u) = Σ_j b_j sin((2j-1)u)`. Built once per harmonic count by clipped
/// Fourier iteration; deterministic.
pub fn flat_wave_harmonics(count: usize) -> &'static [f64] {
    static CACHE: OnceLock<Mutex<std::collections::BTreeMap<usize, &'static [f64]>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(std::collections::BTreeMap::new()));
    let mut guard = cache.lock().expect("flat wave cache poisoned");
    if let Some(v) = guard.get(&count) {
        return v;
    }
    let n = 4096usize;
    let mut samples: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
        .collect();
    let mut coeffs = vec![0.0f64; count];
    for _ in 0..400 {
        // clip and project back onto the first `count` odd harmonics; the
        // gentle gain walks toward the flattest band-limited profile
        let mut spec: Vec<Complex<f64>> = samples
            .iter()
            .map(|&v| Complex::new((1.01 * v).clamp(-1.0, 1.0), 0.0))
            .collect();
        fft_in_place(&mut spec, Direction::Forward);
        for (j, c) in coeffs.iter_mut().enumerate() {
            let bin = 2 * j + 1;
            // sin coefficient: X_k = -i b n/2 for pure b sin(k u)
            *c = -2.0 * spec[bin].im / n as f64;
        }
        for (i, v) in samples.iter_mut().enumerate() {
            let u = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            *v = coeffs
                .iter()
                .enumerate()
                .map(|(j, b)| b * ((2 * j + 1) as f64 * u).sin())
                .sum();
        }
    }
    // normalize the sampled sup to 1
    let max = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for c in coeffs.iter_mut() {
        *c /= max * (1.0 + 1e-9);
    }
    let leaked: &'static [f64] = Box::leak(coeffs.into_boxed_slice());
    guard.insert(count, leaked);
    leaked
}

/// Mean of `s²` for the profile with `count` odd harmonics.
pub fn flat_wave_mean_square(count: usize) -> f64 {
    flat_wave_harmonics(count)
        .iter()
        .map(|b| 0.5 * b * b)
        .sum()
}

/// Measured diagnostics of one increment.
#[derive(Debug, Clone, Serialize)]
pub struct IncrementNorms {
    /// ∫∫ |w|² over space-time (Parseval in space, quadrature in time)
    pub l2_spacetime_sq: f64,
    /// sup-norm bound of the amplitude profile
    pub linf_bound: f64,
    /// mean removed from the profile to keep `∫w = 0`
    pub removed_mean: f64,
}

/// A single oscillatory increment of the solenoidal part.
#[derive(Debug)]
pub struct Increment<R: Real> {
    /// carrier varies along this grid axis
    pub axis: usize,
    /// polarization component (perpendicular axis index)
    pub pol: usize,
    /// base carrier frequency (`cos(nπ x_axis + φ)` scale)
    pub n: u32,
    pub phase: R,
    /// accepted amplitude fraction after backtracking
    pub theta: R,
    /// harmonics of the flat-top carrier
    pub harmonics: usize,
    pub window: (R, R),
    envelope: TimeBump<R>,
    /// spatial profile: polarized vector with modes along the carrier axis
    shape: SparseVector<R>,
    /// cached exact nodal values of the shape on the base grid
    shape_grid: VectorField<R>,
    /// fine 1-D tables of the line profile, keyed by resolution
    line_cache: Mutex<std::collections::BTreeMap<usize, std::sync::Arc<Vec<R>>>>,
    pub norms: IncrementNorms,
}

impl<R: Real> Increment<R> {
    #[inline]
    pub fn envelope(&self) -> &TimeBump<R> {
        &self.envelope
    }

    #[inline]
    pub fn shape(&self) -> &SparseVector<R> {
        &self.shape
    }

    #[inline]
    pub fn shape_grid(&self) -> &VectorField<R> {
        &self.shape_grid
    }

    /// `w(t)` as sparse modes.
    pub fn at(&self, t: R) -> SparseVector<R> {
        self.shape.scale(self.envelope.eval(t))
    }

    /// `∂t w(t)` as sparse modes.
    pub fn rate_at(&self, t: R) -> SparseVector<R> {
        self.shape.scale(self.envelope.d1(t))
    }

    /// Envelope value (shape multiplier) at `t`.
    #[inline]
    pub fn amplitude_at(&self, t: R) -> R {
        self.envelope.eval(t)
    }

    /// Line-profile values at `res` uniform points on the carrier axis
    /// (exact nodal values via mode folding); cached per resolution.
    pub fn line_values(&self, res: usize) -> std::sync::Arc<Vec<R>> {
        let res = res.next_power_of_two().max(64);
        {
            let cache = self.line_cache.lock().expect("line cache poisoned");
            if let Some(v) = cache.get(&res) {
                return v.clone();
            }
        }
        let n = res as i64;
        let mut bins = vec![Complex::new(R::zero(), R::zero()); res];
        for (k, c) in self.shape.comps[self.pol].modes() {
            let kk = k[self.axis] as i64;
            let sign = if kk.rem_euclid(2) == 0 {
                R::one()
            } else {
                -R::one()
            };
            let bin = kk.rem_euclid(n) as usize;
            bins[bin] = bins[bin] + Complex::new(c.re * sign, c.im * sign);
        }
        // synthesize: f_j = Σ_k bins_k e^{2πi k j / res}
        let scale = R::from_usize(res).unwrap();
        for z in bins.iter_mut() {
            *z = Complex::new(z.re * scale, z.im * scale);
        }
        fft_in_place(&mut bins, Direction::Inverse);
        let table: Vec<R> = bins.into_iter().map(|z| z.re).collect();
        let arc = std::sync::Arc::new(table);
        self.line_cache
            .lock()
            .expect("line cache poisoned")
            .insert(res, arc.clone());
        arc
    }

    /// Record serialization for run reports.
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "xi": {"axis": self.axis, "pol": self.pol},
            "n": self.n,
            "phase": self.phase.to_f64_lossy(),
            "theta": self.theta.to_f64_lossy(),
            "harmonics": self.harmonics,
            "window": [self.window.0.to_f64_lossy(), self.window.1.to_f64_lossy()],
            "norms": self.norms,
        })
    }
}

/// Build the wave pair for a carrier along `axis`, polarized along `pol`,
/// with pointwise amplitude `amplitude(x_axis)` sampled on a fine line.
///
/// The profile `amplitude(x)·s(nπx + φ)` is expanded into line modes (its
/// mean removed so the increment carries no momentum), giving an exactly
/// divergence-free field since the polarization is orthogonal to every
/// wavevector.
#[allow(clippy::too_many_arguments)]
pub fn build_wave<R: Real>(
    grid: PeriodicGrid,
    axis: usize,
    pol: usize,
    n: u32,
    phase: R,
    harmonics: usize,
    amplitude: &dyn Fn(R) -> R,
    window: (R, R),
) -> Result<Increment<R>> {
    if axis >= grid.dim() || pol >= grid.dim() || axis == pol {
        return Err(CoreError::InvalidInput(format!(
            "invalid carrier axes: axis {axis}, pol {pol}, dim {}",
            grid.dim()
        )));
    }
    if n == 0 {
        return Err(CoreError::InvalidInput("carrier frequency must be >= 1".into()));
    }
    let coeffs = flat_wave_harmonics(harmonics);
    let max_freq = n as usize * (2 * harmonics - 1);
    let res1d = (8 * max_freq).next_power_of_two().max(512);

    // sample amplitude(x)·s(nπx+φ) on the fine line
    let mut samples: Vec<Complex<R>> = (0..res1d)
        .map(|i| {
            let x = -R::one() + r::<R>(2.0) * R::from_usize(i).unwrap()
                / R::from_usize(res1d).unwrap();
            let u = R::PI() * R::from_u32(n).unwrap() * x + phase;
            let mut s = R::zero();
            for (j, b) in coeffs.iter().enumerate() {
                s += r::<R>(*b) * (u * R::from_usize(2 * j + 1).unwrap()).sin();
            }
            Complex::new(amplitude(x) * s, R::zero())
        })
        .collect();
    fft_in_place(&mut samples, Direction::Forward);

    // collect line modes into a sparse polarized vector
    let mut line = SparseScalar::new(grid.dim());
    let scale = R::one() / R::from_usize(res1d).unwrap();
    let mut max_mag = R::zero();
    for bin in 0..res1d {
        let mag = samples[bin].norm() * scale;
        max_mag = max_mag.max(mag);
    }
    let cutoff = max_mag * r::<R>(1e-14);
    let mut removed_mean = R::zero();
    for bin in 0..res1d {
        let k_signed = if bin <= res1d / 2 {
            bin as i64
        } else {
            bin as i64 - res1d as i64
        };
        if k_signed == res1d as i64 / 2 {
            continue;
        }
        // physical coefficient of e^{iπ k x} with node offset -1
        let sign = if k_signed.rem_euclid(2) == 0 {
            R::one()
        } else {
            -R::one()
        };
        let c = samples[bin] * (scale * sign);
        if c.norm() <= cutoff {
            continue;
        }
        if k_signed == 0 {
            removed_mean = c.re;
            continue;
        }
        let mut k = [0i32; MAX_DIM];
        k[axis] = k_signed as i32;
        line.add_half_mode(k, c);
    }

    let mut shape = SparseVector::zero(grid.dim());
    shape.comps[pol] = line;
    let shape_grid = shape.eval_on_grid(grid)?;

    let envelope = {
        let len = window.1 - window.0;
        let margin = len * r::<R>(1e-3);
        TimeBump::new(window.0 + margin, window.1 - margin)?
    };

    // ∫∫|w|² = ∫Θ² dt · ∫|shape|²
    let shape_l2 = shape.l2_inner(&shape, grid.volume());
    let env_l2 = {
        let steps = 512;
        let (a, b) = envelope.support();
        let dt = (b - a) / R::from_usize(steps).unwrap();
        let mut acc = R::zero();
        for i in 0..steps {
            let t = a + dt * (R::from_usize(i).unwrap() + r::<R>(0.5));
            let v = envelope.eval(t);
            acc += v * v;
        }
        acc * dt
    };

    let norms = IncrementNorms {
        l2_spacetime_sq: (shape_l2 * env_l2).to_f64_lossy(),
        linf_bound: shape.linf_bound().to_f64_lossy(),
        removed_mean: removed_mean.to_f64_lossy(),
    };

    Ok(Increment {
        axis,
        pol,
        n,
        phase,
        theta: R::one(),
        harmonics,
        window,
        envelope,
        shape,
        shape_grid,
        line_cache: Mutex::new(Default::default()),
        norms,
    })
}

impl<R: Real> Increment<R> {
    /// Copy with a different accepted amplitude factor recorded.
    pub fn with_theta(&self, theta: R) -> Self {
        Self {
            axis: self.axis,
            pol: self.pol,
            n: self.n,
            phase: self.phase,
            theta,
            harmonics: self.harmonics,
            window: self.window,
            envelope: self.envelope.clone(),
            shape: self.shape.clone(),
            shape_grid: self.shape_grid.clone(),
            line_cache: Mutex::new(Default::default()),
            norms: self.norms.clone(),
        }
    }
}

/// How the margin floor is enforced during generation.
#[derive(Debug, Clone, Copy)]
pub enum MarginRule<R: Real> {
    /// keep at least half of the pre-application window minimum
    HalfOfBefore,
    /// keep at least an absolute floor
    Floor(R),
}

/// Generation parameters for one increment.
#[derive(Debug, Clone)]
pub struct GenerationPolicy<R: Real> {
    /// fraction of the pointwise amplitude capacity to use
    pub theta: R,
    pub harmonics: usize,
    pub margin_rule: MarginRule<R>,
    /// fraction of the kept margin the envelope flux may consume
    pub flux_budget: R,
    /// requested weak-metric smallness of the increment (None = unchecked)
    pub weak_bound: Option<R>,
    /// requested bound on the density-weighted pairing with every prefix
    /// state (None = unchecked)
    pub cross_bound: Option<R>,
    pub max_backtracks: usize,
    pub max_escalations: usize,
    /// fine points per line scan
    pub scan_res: usize,
}

impl<R: Real> Default for GenerationPolicy<R> {
    fn default() -> Self {
        Self {
            theta: r(0.95),
            harmonics: 15,
            margin_rule: MarginRule::HalfOfBefore,
            flux_budget: r(0.35),
            weak_bound: None,
            cross_bound: None,
            max_backtracks: 7,
            max_escalations: 5,
            scan_res: 16384,
        }
    }
}

/// Outcome of one generation call.
#[derive(Debug, Clone)]
pub struct Generated<R: Real> {
    pub stack: crate::subsolution::Subsolution<R>,
    pub increment: std::sync::Arc<Increment<R>>,
    /// measured ratio ‖w‖²_{L²(space-time)} / ∫∫ gap²
    pub lambda_hat: R,
    pub margin_before: R,
    pub margin_after: R,
    pub weak_dist: R,
    pub cross_max: R,
    pub gap_sq_integral: R,
    pub l2_spacetime_sq: R,
}

/// Quadrature nodes and weights covering a window (composite midpoint).
pub fn window_quadrature<R: Real>(window: (R, R), nodes: usize) -> Vec<(R, R)> {
    let len = window.1 - window.0;
    let n = nodes.max(4);
    let dt = len / R::from_usize(n).unwrap();
    (0..n)
        .map(|i| {
            (
                window.0 + dt * (R::from_usize(i).unwrap() + r::<R>(0.5)),
                dt,
            )
        })
        .collect()
}

/// Build an increment on the window that raises kinetic energy in
/// proportion to the local gap while preserving strict subsolution margins.
///
/// The amplitude profile is `θ ·` the pointwise capacity measured on a fine
/// line probe; the accepted `θ` backtracks by halving until the measured
/// post-application margin satisfies the rule, and the carrier frequency
/// escalates if the envelope flux, the weak-metric bound or the prefix
/// pairing bound fail. A window with no gap yields the zero increment.
#[allow(clippy::too_many_arguments)]
pub fn generate_increment<R: Real>(
    sub: &crate::subsolution::Subsolution<R>,
    axis: usize,
    pol: usize,
    n_start: u32,
    phase: R,
    window: (R, R),
    policy: &GenerationPolicy<R>,
) -> Result<Generated<R>> {
    let grid = *sub.grid();
    let quad = window_quadrature(window, 12);
    let probe_times: Vec<R> = quad.iter().map(|(t, _)| *t).collect();
    let quad_slice: Vec<(R, R)> = quad.clone();

    let mu_floor = |before: R| -> R {
        match policy.margin_rule {
            MarginRule::HalfOfBefore => before * r::<R>(0.5),
            MarginRule::Floor(f) => f,
        }
    };

    // pre-application probe: capacity and margins
    let pre = sub.line_scan(axis, pol, &quad_slice, policy.scan_res, R::zero())?;
    let margin_before = pre.min_margin_bound;
    if margin_before <= R::zero() {
        return Err(CoreError::StageFailure(format!(
            "window not strictly admissible: margin bound {:e}",
            margin_before.to_f64_lossy()
        )));
    }
    let keep = mu_floor(margin_before);

    // capacity probe at the kept margin level
    let scan = sub.line_scan(axis, pol, &quad_slice, policy.scan_res, keep)?;
    let gap_sq = scan.gap_sq_spacetime;
    if scan.cap.iter().all(|c| *c <= R::epsilon()) || gap_sq <= R::zero() {
        // equality region: zero increment, lower bound vacuous
        let inc = std::sync::Arc::new(build_wave(
            grid,
            axis,
            pol,
            n_start.max(1),
            phase,
            policy.harmonics,
            &|_| R::zero(),
            window,
        )?);
        return Ok(Generated {
            stack: sub.clone(),
            increment: inc.clone(),
            lambda_hat: R::zero(),
            margin_before,
            margin_after: margin_before,
            weak_dist: R::zero(),
            cross_max: R::zero(),
            gap_sq_integral: gap_sq,
            l2_spacetime_sq: R::zero(),
        });
    }

    let res = scan.res;
    let cap = scan.cap.clone();
    let metric = WeakMetric::default();
    let mut n = n_start.max(1);
    let mut failures: Vec<String> = Vec::new();

    for _esc in 0..=policy.max_escalations {
        let mut theta = policy.theta;
        for _bt in 0..=policy.max_backtracks {
            let amplitude = |x: R| -> R {
                let pos = (x + R::one()) / r::<R>(2.0) * R::from_usize(res).unwrap();
                let i = (pos.to_f64_lossy().floor() as usize).min(res - 1);
                theta * cap[i]
            };
            let inc = build_wave(
                grid,
                axis,
                pol,
                n,
                phase,
                policy.harmonics,
                &amplitude,
                window,
            )?
            .with_theta(theta);
            let inc = std::sync::Arc::new(inc);

            // envelope flux against the margin budget
            let candidate = sub.extended(inc.clone())?;
            let mut flux = R::zero();
            for &t in &probe_times {
                flux = flux.max(candidate.corrector_bound(t) - sub.corrector_bound(t));
            }
            if flux > policy.flux_budget * keep {
                failures.push(format!(
                    "n={n}: flux bound {:.3e} over budget",
                    flux.to_f64_lossy()
                ));
                n = n.saturating_mul(2);
                break; // escalate frequency
            }

            // weak-metric smallness
            let mut weak = R::zero();
            for &t in &probe_times {
                weak = weak.max(metric.norm_sparse(&inc.at(t)));
            }
            if let Some(bound) = policy.weak_bound {
                if weak >= bound {
                    failures.push(format!(
                        "n={n}: weak distance {:.3e} over bound",
                        weak.to_f64_lossy()
                    ));
                    n = n.saturating_mul(2);
                    break;
                }
            }

            // pairing with prefix states
            let mut cross = R::zero();
            for &t in &probe_times {
                let amp = inc.amplitude_at(t);
                if amp == R::zero() {
                    continue;
                }
                for c in sub.prefix_cross(inc.shape(), t) {
                    cross = cross.max((c * amp).abs());
                }
            }
            if let Some(bound) = policy.cross_bound {
                if cross >= bound {
                    failures.push(format!(
                        "n={n}: prefix pairing {:.3e} over bound",
                        cross.to_f64_lossy()
                    ));
                    n = n.saturating_mul(2);
                    break;
                }
            }

            // measured post-application margin
            let post = candidate.line_scan(axis, pol, &quad_slice, policy.scan_res, R::zero())?;
            if post.min_margin_bound < keep {
                failures.push(format!(
                    "n={n} theta={:.3}: margin {:.3e} below keep {:.3e}",
                    theta.to_f64_lossy(),
                    post.min_margin_bound.to_f64_lossy(),
                    keep.to_f64_lossy()
                ));
                theta = theta * r::<R>(0.5);
                continue; // backtrack amplitude
            }

            let l2 = r::<R>(inc.norms.l2_spacetime_sq);
            let lambda_hat = if gap_sq > R::zero() { l2 / gap_sq } else { R::zero() };
            return Ok(Generated {
                stack: candidate,
                increment: inc,
                lambda_hat,
                margin_before,
                margin_after: post.min_margin_bound,
                weak_dist: weak,
                cross_max: cross,
                gap_sq_integral: gap_sq,
                l2_spacetime_sq: l2,
            });
        }
    }
    Err(CoreError::StageFailure(format!(
        "increment generation exhausted retries: [{}]",
        failures.join("; ")
    )))
}

/// Metric of the weak topology on bounded sets: weighted low-mode
/// coefficient distance, `Σ_{|k|≤M} 2^{-|k|} |f̂(k) - ĝ(k)|`.
#[derive(Debug, Clone, Copy)]
pub struct WeakMetric {
    pub mode_cutoff: i64,
}

impl Default for WeakMetric {
    fn default() -> Self {
        Self { mode_cutoff: 8 }
    }
}

impl WeakMetric {
    /// Distance between two sparse vector fields at a single time.
    pub fn distance_sparse<R: Real>(&self, f: &SparseVector<R>, g: &SparseVector<R>) -> R {
        let dim = f.dim();
        let m = self.mode_cutoff;
        let mut acc = R::zero();
        // union of low modes
        let mut low: std::collections::BTreeSet<[i32; MAX_DIM]> = Default::default();
        for comp in f.comps.iter().chain(g.comps.iter()) {
            for (k, _) in comp.modes() {
                let k2: i64 = k.iter().map(|ki| (*ki as i64) * (*ki as i64)).sum();
                if k2 <= m * m {
                    low.insert(*k);
                }
            }
        }
        for k in low {
            let mut mag2 = R::zero();
            for a in 0..dim {
                let d = f.comps[a].coeff(k) - g.comps[a].coeff(k);
                mag2 += d.norm_sqr();
            }
            let k2: i64 = k.iter().map(|ki| (*ki as i64) * (*ki as i64)).sum();
            let knorm = R::from_i64(k2).unwrap().sqrt();
            acc += mag2.sqrt() * r::<R>(0.5).powf(knorm);
        }
        acc
    }

    /// Distance of one sparse field from zero.
    pub fn norm_sparse<R: Real>(&self, f: &SparseVector<R>) -> R {
        self.distance_sparse(f, &SparseVector::zero(f.dim()))
    }
}
