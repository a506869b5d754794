//! Selection and validation of the homogeneous energy level `χ(t)` and the
//! kinetic-energy field `e(t,x) = χ(t) - (N/2)∂tΨ - (N/2)p(ϱ)`.
//!
//! Two constraints shape `χ`:
//!
//! * a pointwise floor keeping the zero pair a strict subsolution,
//!   `χ(t) > sup_x (N/2)(∂tΨ + p(ϱ) + λ_max[∇Ψ⊗∇Ψ/ϱ])`;
//! * a scalar differential inequality sufficient for the weak energy
//!   inequality of the saturated states,
//!   `χ' ≤ -χ[Ĉ1 + D̂] + Ĉ2 √(χ+1) - Ĉ3`,
//!   where the coefficients are suprema of the fields obtained by expanding
//!   the divergence form of the energy balance, and `D̂` bounds
//!   `div(v/ϱ) = -v·∇ϱ/ϱ²` through the a-priori bound
//!   `|v| ≤ C5 (1 + √χ)`. The gradient of the initial density enters `D̂`
//!   and decides feasibility.
//!
//! `Ĉ2` is signed (non-positive): it collects the worst case of the
//! `v`-linear transport term, which can only lower the admissible slope.

use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::pressure::PressureLaw;
use crate::scalar::{r, Real};
use crate::schedule::{DensitySchedule, Rho0Spec};
use crate::spline::CubicSpline;
use std::sync::Arc;

/// Tabulated suprema of the coefficient fields, sampled over the cutoff
/// value `h ∈ [0,1]`. Every coefficient of the scalar inequality factors as
/// (cutoff derivatives) × (field of `h` and `x`), so suprema over `x` can be
/// precomputed on an `h`-grid and interpolated.
#[derive(Debug, Clone)]
struct CoefficientTables<R: Real> {
    /// inf_x and sup_x of f₁(h,x) where div(∇Ψ/ϱ) = h'·f₁
    f1_inf: Vec<R>,
    /// sup_x |V_a(h,x)|: the h''-proportional part of the v-coefficient
    va_sup: Vec<R>,
    /// sup_x |V_b(h,x)|: the cutoff-free part of the v-coefficient
    vb_sup: Vec<R>,
    /// sup_x |T1(h,x)|: h'-proportional source part
    t1_sup: Vec<R>,
    /// sup_x |T2(h,x)|: h'h''-proportional source part
    t2_sup: Vec<R>,
    /// sup_x |∇ϱ0|/ϱ(h)² (the h-factor is applied at evaluation time)
    w_sup: Vec<R>,
    /// sup_x |T0| = (N/2)|Ψ₁| (h'''-proportional source part)
    t0_sup: R,
    psi_linf: R,
    grad_psi_linf: R,
    rho_sup: R,
}

const H_TABLE: usize = 257;
/// Safety inflation applied to interpolated suprema.
const TABLE_SAFETY: f64 = 1e-3;

fn build_tables<R: Real>(
    schedule: &DensitySchedule<R>,
    law: &PressureLaw<R>,
) -> Result<CoefficientTables<R>> {
    let grid = *schedule.grid();
    let half_n = r::<R>(grid.dim() as f64 / 2.0);
    let rho0 = schedule.rho0().values();
    let rho_tilde = schedule.rho_tilde();
    let psi = schedule.psi_profile().values();
    let gpsi = schedule.grad_psi_profile();
    let grho = schedule.grad_rho0();
    let (_, rho_sup) = schedule.rho_bounds();

    let mut f1_inf = Vec::with_capacity(H_TABLE);
    let mut va_sup = Vec::with_capacity(H_TABLE);
    let mut vb_sup = Vec::with_capacity(H_TABLE);
    let mut t1_sup = Vec::with_capacity(H_TABLE);
    let mut t2_sup = Vec::with_capacity(H_TABLE);
    let mut w_sup = Vec::with_capacity(H_TABLE);

    for step in 0..H_TABLE {
        let h = R::from_usize(step).unwrap() / R::from_usize(H_TABLE - 1).unwrap();
        let mut f1_lo = R::infinity();
        let mut va = R::zero();
        let mut vb = R::zero();
        let mut t1 = R::zero();
        let mut t2 = R::zero();
        let mut w = R::zero();
        for idx in 0..grid.len() {
            let rho = h * rho0[idx] + (R::one() - h) * rho_tilde;
            let rho2 = rho * rho;
            let p = law.pressure(rho);
            let dp = law.dpressure(rho);
            let bigp = law.potential(rho)?;
            let dbigp = law.dpotential(rho)?;

            let mut gpsi_dot_grho = R::zero();
            let mut gpsi2 = R::zero();
            let mut grho2 = R::zero();
            for a in 0..grid.dim() {
                let gp = gpsi.component(a).values()[idx];
                let gr = grho.component(a).values()[idx];
                gpsi_dot_grho += gp * gr;
                gpsi2 += gp * gp;
                grho2 += gr * gr;
            }

            // f₁: div(∇Ψ/ϱ) = h'·[ΔΨ₁/ϱ - h ∇Ψ₁·∇ϱ0/ϱ²], ΔΨ₁ = -(ϱ0 - ϱ̃)
            let f1 = -(rho0[idx] - rho_tilde) / rho - h * gpsi_dot_grho / rho2;
            f1_lo = f1_lo.min(f1);

            // V_a = -(N/2)[Ψ₁ h ∇ϱ0/ϱ² - ∇Ψ₁/ϱ]
            let mut va2 = R::zero();
            for a in 0..grid.dim() {
                let gr = grho.component(a).values()[idx];
                let gp = gpsi.component(a).values()[idx];
                let comp = -half_n * (psi[idx] * h * gr / rho2 - gp / rho);
                va2 += comp * comp;
            }
            va = va.max(va2.sqrt());

            // G_b = -((N/2)-1) p + P ; G_b' = -((N/2)-1) p' + P'
            let gb = -(half_n - R::one()) * p + bigp;
            let gbp = -(half_n - R::one()) * dp + dbigp;
            // V_b = G_b h ∇ϱ0/ϱ² - G_b' h ∇ϱ0/ϱ
            let mut vb2 = R::zero();
            for a in 0..grid.dim() {
                let gr = grho.component(a).values()[idx];
                let comp = h * gr * (gb / rho2 - gbp / rho);
                vb2 += comp * comp;
            }
            vb = vb.max(vb2.sqrt());

            // T1 = A_b + G_b f₁ + G_b' h (∇Ψ₁·∇ϱ0)/ϱ,
            // A_b = (P' - (N/2) p')(ϱ0 - ϱ̃)
            let ab = (dbigp - half_n * dp) * (rho0[idx] - rho_tilde);
            let t1v = ab + gb * f1 + gbp * h * gpsi_dot_grho / rho;
            t1 = t1.max(t1v.abs());

            // T2 = -(N/2)[Ψ₁ f₁ + |∇Ψ₁|²/ϱ]
            let t2v = -half_n * (psi[idx] * f1 + gpsi2 / rho);
            t2 = t2.max(t2v.abs());

            w = w.max(grho2.sqrt() / rho2);
        }
        f1_inf.push(f1_lo);
        va_sup.push(va);
        vb_sup.push(vb);
        t1_sup.push(t1);
        t2_sup.push(t2);
        w_sup.push(w);
    }

    let t0_sup = half_n * schedule.psi_profile().linf();
    Ok(CoefficientTables {
        f1_inf,
        va_sup,
        vb_sup,
        t1_sup,
        t2_sup,
        w_sup,
        t0_sup,
        psi_linf: schedule.psi_profile().linf(),
        grad_psi_linf: schedule.grad_psi_profile().linf(),
        rho_sup,
    })
}

impl<R: Real> CoefficientTables<R> {
    fn lookup(&self, table: &[R], h: R) -> R {
        let n = table.len() - 1;
        let pos = (h.max(R::zero()).min(R::one()) * R::from_usize(n).unwrap()).to_f64_lossy();
        let i = (pos.floor() as usize).min(n - 1);
        let frac = r::<R>(pos - i as f64);
        table[i] + (table[i + 1] - table[i]) * frac
    }
}

/// Scalar inequality coefficients at one time.
#[derive(Debug, Clone, Copy)]
pub struct OdeCoefficients<R: Real> {
    /// coefficient of `-χ` (acoustic compression), signed
    pub c1: R,
    /// coefficient of `√(χ+1)`, signed (non-positive)
    pub c2: R,
    /// constant source, enters as `-Ĉ3`, signed
    pub c3: R,
    /// `sup_x |∇ϱ|/ϱ²`; multiplies the velocity bound inside `D̂`
    pub w: R,
    /// velocity bound constant: `|v| ≤ C5 (1 + √χ)`
    pub c5: R,
}

impl<R: Real> OdeCoefficients<R> {
    /// `D̂(t,χ) = W · C5 · (1 + √χ)`.
    pub fn d_hat(&self, chi: R) -> R {
        self.w * self.c5 * (R::one() + chi.max(R::zero()).sqrt())
    }

    /// Right-hand side of the admissible-slope inequality.
    pub fn slope_bound(&self, chi: R) -> R {
        -chi * (self.c1 + self.d_hat(chi)) + self.c2 * (chi + R::one()).sqrt() - self.c3
    }

    /// As [`Self::slope_bound`] with every adversarial term inflated by `σ`;
    /// integrating this leaves validation slack.
    fn slope_bound_inflated(&self, chi: R, sigma: R) -> R {
        let one = R::one();
        -chi * (self.c1 + sigma * self.c1.abs() + (one + sigma) * self.d_hat(chi))
            + (one + sigma) * self.c2 * (chi + one).sqrt()
            - (self.c3 + sigma * self.c3.abs())
    }
}

/// Context shared by floor and coefficient evaluation.
#[derive(Debug, Clone)]
pub struct ProfileContext<R: Real> {
    pub schedule: Arc<DensitySchedule<R>>,
    pub law: Arc<PressureLaw<R>>,
    tables: CoefficientTables<R>,
}

impl<R: Real> ProfileContext<R> {
    pub fn new(schedule: Arc<DensitySchedule<R>>, law: Arc<PressureLaw<R>>) -> Result<Self> {
        let (lo, hi) = schedule.rho_bounds();
        law.validate(lo, hi)?;
        let tables = build_tables(&schedule, &law)?;
        Ok(Self {
            schedule,
            law,
            tables,
        })
    }

    /// Pointwise subsolution floor
    /// `sup_x (N/2)(∂tΨ + p(ϱ) + λ_max[∇Ψ⊗∇Ψ/ϱ])` at time `t`.
    ///
    /// The rank-one tensor `∇Ψ⊗∇Ψ/ϱ` has maximal eigenvalue `|∇Ψ|²/ϱ`.
    /// Times beyond the horizon use the terminal plateau values.
    pub fn chi_floor(&self, t: R) -> R {
        let s = &self.schedule;
        let t = t.min(s.horizon());
        let grid = *s.grid();
        let half_n = r::<R>(grid.dim() as f64 / 2.0);
        let h = s.cutoff().eval(t);
        let hd1 = s.cutoff().d1(t);
        let hd2 = s.cutoff().d2(t);
        let psi = s.psi_profile().values();
        let gpsi = s.grad_psi_profile();
        let mut sup = -R::infinity();
        for idx in 0..grid.len() {
            let rho = s.density_value(h, idx);
            let mut gpsi2 = R::zero();
            for a in 0..grid.dim() {
                let gp = gpsi.component(a).values()[idx];
                gpsi2 += gp * gp;
            }
            let v = half_n
                * (hd2 * psi[idx] + self.law.pressure(rho) + hd1 * hd1 * gpsi2 / rho);
            sup = sup.max(v);
        }
        sup
    }

    /// Coefficients of the scalar inequality at time `t` (suprema over `x`,
    /// interpolated from the `h`-tables).
    pub fn coefficients(&self, t: R) -> OdeCoefficients<R> {
        let s = &self.schedule;
        let tb = &self.tables;
        let t_clamped = t.min(s.horizon());
        let h = s.cutoff().eval(t_clamped);
        let hd1 = s.cutoff().d1(t_clamped);
        let hd2 = s.cutoff().d2(t_clamped);
        let hd3 = s.cutoff().d3(t_clamped);
        let safety = R::one() + r::<R>(TABLE_SAFETY);

        // h' ≤ 0, so sup_x h'·f₁ = h'·inf_x f₁
        let c1 = hd1 * tb.lookup(&tb.f1_inf, h) * safety;

        // the h-factor sits inside V_b already (via h·∇ϱ0)
        let c2_mag = hd2.abs() * tb.lookup(&tb.va_sup, h) + tb.lookup(&tb.vb_sup, h);

        let c3 = hd3.abs() * tb.t0_sup
            + hd1.abs() * tb.lookup(&tb.t1_sup, h)
            + (hd1 * hd2).abs() * tb.lookup(&tb.t2_sup, h);

        let w = h * tb.lookup(&tb.w_sup, h) * safety;

        let half_n = r::<R>(s.grid().dim() as f64 / 2.0);
        let m_psi_t = hd2.abs() * tb.psi_linf;
        let m_psi_g = hd1.abs() * tb.grad_psi_linf;
        let c5 = (r::<R>(2.0) * tb.rho_sup)
            .sqrt()
            .max((tb.rho_sup * r::<R>(2.0) * half_n * m_psi_t).sqrt() + m_psi_g);

        OdeCoefficients {
            c1,
            c2: -r::<R>(2.0).sqrt() * c5 * c2_mag * safety,
            c3: c3 * safety,
            w,
            c5,
        }
    }
}

/// Report produced by [`EnergyProfile::validate`].
#[derive(Debug, Clone)]
pub struct ProfileReport<R: Real> {
    /// min over sample times of `χ - floor`
    pub min_floor_margin: R,
    /// max over sample times of the discretized slope-inequality residual
    pub max_oo5_residual: R,
    /// min over sampled `(t,x)` of the kinetic energy field
    pub min_energy: R,
}

/// The chosen energy level: a C² spline for `χ` on `[0,T]`, extended by a
/// constant beyond the horizon, plus the induced kinetic-energy field.
#[derive(Debug, Clone)]
pub struct EnergyProfile<R: Real> {
    context: Arc<ProfileContext<R>>,
    chi: CubicSpline<R>,
    delta_chi: R,
}

impl<R: Real> EnergyProfile<R> {
    /// Build a profile from `χ` samples on the uniform grid `t = i·dt`,
    /// `i = 0..values.len()`, spanning `[0, T]`; validates before returning.
    pub fn from_chi_samples(
        context: Arc<ProfileContext<R>>,
        dt: R,
        values: Vec<R>,
        delta_chi: R,
    ) -> Result<Self> {
        let chi = CubicSpline::fit(R::zero(), dt, values)?;
        let horizon = context.schedule.horizon();
        let end = chi.t_end();
        if (end - horizon).abs() > r::<R>(1e-9) * horizon {
            return Err(CoreError::InvalidInput(format!(
                "chi samples must span [0, T]: end {end} vs horizon {horizon}"
            )));
        }
        let profile = Self {
            context,
            chi,
            delta_chi,
        };
        profile.validate(4)?;
        Ok(profile)
    }

    pub fn context(&self) -> &ProfileContext<R> {
        &self.context
    }

    pub fn schedule(&self) -> &DensitySchedule<R> {
        &self.context.schedule
    }

    pub fn law(&self) -> &PressureLaw<R> {
        &self.context.law
    }

    pub fn delta_chi(&self) -> R {
        self.delta_chi
    }

    pub fn horizon(&self) -> R {
        self.context.schedule.horizon()
    }

    /// `χ(t)`, constant for `t ≥ T`.
    pub fn chi(&self, t: R) -> R {
        let end = self.chi.t_end();
        if t >= end {
            self.chi.eval(end)
        } else {
            self.chi.eval(t.max(self.chi.t_start()))
        }
    }

    pub fn chi_prime(&self, t: R) -> R {
        let end = self.chi.t_end();
        if t >= end {
            R::zero()
        } else {
            self.chi.derivative(t.max(self.chi.t_start()))
        }
    }

    /// Margin over the subsolution floor at time `t`.
    pub fn margin_o1(&self, t: R) -> R {
        self.chi(t) - self.context.chi_floor(t)
    }

    /// Pointwise kinetic energy `e(t, node)`.
    #[inline]
    pub fn energy_value(&self, t: R, node: usize) -> R {
        let s = &self.context.schedule;
        let t_c = t.min(s.horizon());
        let half_n = r::<R>(s.grid().dim() as f64 / 2.0);
        let h = s.cutoff().eval(t_c);
        let rho = s.density_value(h, node);
        self.chi(t) - half_n * (s.dt_psi_value(t_c, node) + self.context.law.pressure(rho))
    }

    /// `e(t,·) = χ(t) - (N/2)∂tΨ - (N/2)p(ϱ)` as a field.
    pub fn energy_field(&self, t: R) -> ScalarField<R> {
        let grid = *self.context.schedule.grid();
        let values = (0..grid.len()).map(|i| self.energy_value(t, i)).collect();
        ScalarField::from_values(grid, values).expect("grid-sized buffer")
    }

    /// Rows for the profile export: `(t, χ, floor, oo5 residual)`.
    pub fn export_rows(&self, samples: usize) -> Vec<(R, R, R, R)> {
        let horizon = self.horizon();
        (0..=samples)
            .map(|i| {
                let t = horizon * R::from_usize(i).unwrap() / R::from_usize(samples).unwrap();
                (
                    t,
                    self.chi(t),
                    self.context.chi_floor(t),
                    self.oo5_residual(t),
                )
            })
            .collect()
    }

    /// Discretized slope-inequality residual
    /// `χ' + χ(Ĉ1 + D̂) - Ĉ2 √(χ+1) + Ĉ3`; admissible profiles keep it ≤ 0.
    pub fn oo5_residual(&self, t: R) -> R {
        let chi = self.chi(t);
        let co = self.context.coefficients(t);
        self.chi_prime(t) + chi * (co.c1 + co.d_hat(chi)) - co.c2 * (chi + R::one()).sqrt()
            + co.c3
    }

    /// Check floor margin, slope residual and energy positivity on a refined
    /// sample of `[0, T]`.
    pub fn validate(&self, refinement: usize) -> Result<ProfileReport<R>> {
        let horizon = self.horizon();
        let samples = (self.chi.knot_count() - 1) * refinement.max(1);
        let mut min_floor_margin = R::infinity();
        let mut max_res = -R::infinity();
        let mut min_energy = R::infinity();
        let grid_len = self.context.schedule.grid().len();
        for i in 0..=samples {
            let t = horizon * R::from_usize(i).unwrap() / R::from_usize(samples).unwrap();
            min_floor_margin = min_floor_margin.min(self.margin_o1(t));
            max_res = max_res.max(self.oo5_residual(t));
            // energy positivity on a thinner time sample
            if i % refinement.max(1) == 0 {
                for node in 0..grid_len {
                    min_energy = min_energy.min(self.energy_value(t, node));
                }
            }
        }
        let tol = r::<R>(1e-9) * self.chi(R::zero()).abs().max(R::one());
        if min_floor_margin < self.delta_chi - tol {
            return Err(CoreError::Infeasible(format!(
                "floor margin {:e} below delta_chi {:e}",
                min_floor_margin.to_f64_lossy(),
                self.delta_chi.to_f64_lossy()
            )));
        }
        if max_res > tol {
            return Err(CoreError::Infeasible(format!(
                "slope inequality residual {:e} positive",
                max_res.to_f64_lossy()
            )));
        }
        if min_energy <= R::zero() {
            return Err(CoreError::Infeasible(format!(
                "kinetic energy field not positive: {:e}",
                min_energy.to_f64_lossy()
            )));
        }
        Ok(ProfileReport {
            min_floor_margin,
            max_oo5_residual: max_res,
            min_energy,
        })
    }
}

/// Default floor margin: `1e-2 · (N/2) p(ϱ̃)`.
pub fn default_delta_chi<R: Real>(schedule: &DensitySchedule<R>, law: &PressureLaw<R>) -> R {
    r::<R>(1e-2)
        * r::<R>(schedule.grid().dim() as f64 / 2.0)
        * law.pressure(schedule.rho_tilde())
}

/// Inflation applied to the adversarial terms while integrating; leaves the
/// constructed profile strictly inside the admissible slope region.
const SIGMA_SLACK: f64 = 0.05;
/// Uniform extra decay rate (relative to `χ0/T`) applied while integrating.
/// Keeps the residual strictly negative where the coefficient slack
/// vanishes (the plateaus), clear of spline interpolation noise; on exact
/// plateaus the trajectory is exactly linear, which the spline reproduces.
const KAPPA_DRIFT: f64 = 2e-4;
/// Start-value ladder: powers of two tried on top of the floor requirement.
const CHI0_LADDER: usize = 21;

/// Construct a feasible profile by integrating the extremal slope ODE from
/// the smallest workable start value; returns the profile or an
/// infeasibility error.
pub fn choose_chi<R: Real>(
    context: Arc<ProfileContext<R>>,
    delta_chi: R,
    time_nodes: usize,
) -> Result<EnergyProfile<R>> {
    let horizon = context.schedule.horizon();
    let nodes = time_nodes.max(64);
    let dt = horizon / R::from_usize(nodes).unwrap();
    let sigma = r::<R>(SIGMA_SLACK);

    // floor + required margin on the integration nodes
    let required: Vec<R> = (0..=nodes)
        .map(|i| context.chi_floor(dt * R::from_usize(i).unwrap()) + delta_chi)
        .collect();
    let chi0_base = required[0];

    let mut failures: Vec<String> = Vec::new();
    for ladder in 0..CHI0_LADDER {
        let chi0 = chi0_base * r::<R>((1u64 << ladder) as f64);
        let drift = chi0 * r::<R>(KAPPA_DRIFT) / horizon;
        match integrate_extremal(&context, chi0, nodes, dt, sigma, drift, &required) {
            Ok(values) => {
                match EnergyProfile::from_chi_samples(context.clone(), dt, values, delta_chi) {
                    Ok(profile) => return Ok(profile),
                    Err(e) => failures.push(format!("chi0 x{}: {e}", 1u64 << ladder)),
                }
            }
            Err(e) => failures.push(format!("chi0 x{}: {e}", 1u64 << ladder)),
        }
    }
    Err(CoreError::Infeasible(format!(
        "no admissible chi for delta_chi {:e}; gradient of rho0 too large [{}]",
        delta_chi.to_f64_lossy(),
        failures.join("; ")
    )))
}

/// RK4 with stability-driven substeps on the inflated extremal slope.
fn integrate_extremal<R: Real>(
    context: &ProfileContext<R>,
    chi0: R,
    nodes: usize,
    dt: R,
    sigma: R,
    drift: R,
    required: &[R],
) -> Result<Vec<R>> {
    let mut values = Vec::with_capacity(nodes + 1);
    values.push(chi0);
    let mut chi = chi0;
    for i in 0..nodes {
        let t_node = dt * R::from_usize(i).unwrap();
        // local stiffness estimate to pick substeps
        let co = context.coefficients(t_node);
        let lipschitz = co.c1.abs()
            + co.d_hat(chi) * r::<R>(1.5)
            + co.c2.abs() / (r::<R>(2.0) * (chi + R::one()).sqrt())
            + r::<R>(1e-6);
        let m = ((lipschitz * dt).to_f64_lossy() / 0.2).ceil().max(1.0) as usize;
        let m = m.min(65536);
        let h = dt / R::from_usize(m).unwrap();
        for sub in 0..m {
            let t = t_node + h * R::from_usize(sub).unwrap();
            let f = |tt: R, cc: R| {
                context.coefficients(tt).slope_bound_inflated(cc, sigma) - drift
            };
            let k1 = f(t, chi);
            let k2 = f(t + h * r::<R>(0.5), chi + h * r::<R>(0.5) * k1);
            let k3 = f(t + h * r::<R>(0.5), chi + h * r::<R>(0.5) * k2);
            let k4 = f(t + h, chi + h * k3);
            chi += h * (k1 + r::<R>(2.0) * k2 + r::<R>(2.0) * k3 + k4) / r::<R>(6.0);
            if !chi.is_finite() || chi <= R::zero() {
                return Err(CoreError::Numerical(
                    "chi trajectory collapsed to zero".into(),
                ));
            }
        }
        if chi < required[i + 1] {
            return Err(CoreError::Infeasible(format!(
                "trajectory fell below floor at node {}",
                i + 1
            )));
        }
        values.push(chi);
    }
    Ok(values)
}

/// Result of the empirical feasibility threshold search.
#[derive(Debug, Clone)]
pub struct FeasibilityResult<R: Real> {
    /// largest amplitude for which profile construction succeeded
    pub s_hat: R,
    /// bisection bracket: last feasible / first infeasible amplitude
    pub s_feasible: R,
    pub s_infeasible: Option<R>,
    /// true when the search hit the density-positivity cap instead of a
    /// genuine threshold
    pub capped: bool,
}

/// Bisect the largest amplitude `s` for which `ϱ0 = ϱ̃ + s·g` admits a
/// profile, to relative tolerance `1e-3`.
pub fn feasibility_epsilon<R: Real>(
    grid: crate::grid::PeriodicGrid,
    law: Arc<PressureLaw<R>>,
    mean: R,
    unit_modes: &Rho0Spec,
    horizon: R,
    delta_chi_fraction: Option<R>,
    time_nodes: usize,
) -> Result<FeasibilityResult<R>> {
    if unit_modes.modes.is_empty() {
        return Err(CoreError::InvalidInput(
            "feasibility family needs at least one mode (g ≢ 0)".into(),
        ));
    }
    // sup |g| for the positivity cap
    let unit = Rho0Spec {
        mean: 1.0,
        modes: unit_modes.modes.clone(),
    };
    let g_sup = {
        let f = unit.synthesize::<R>(grid)?;
        f.map(|v| v - R::one()).linf()
    };
    if g_sup <= R::zero() {
        return Err(CoreError::InvalidInput("degenerate family (g ≡ 0)".into()));
    }
    let cap = r::<R>(0.95) * mean / g_sup;

    let feasible = |s: R| -> Result<bool> {
        let spec = Rho0Spec {
            mean: mean.to_f64_lossy(),
            modes: unit_modes
                .modes
                .iter()
                .map(|m| crate::schedule::DensityMode {
                    k: m.k,
                    amplitude: m.amplitude * s.to_f64_lossy(),
                    phase: m.phase,
                })
                .collect(),
        };
        let schedule = match DensitySchedule::new(grid, &spec, horizon) {
            Ok(s) => Arc::new(s),
            Err(_) => return Ok(false),
        };
        let context = match ProfileContext::new(schedule.clone(), law.clone()) {
            Ok(c) => Arc::new(c),
            Err(_) => return Ok(false),
        };
        let delta = match delta_chi_fraction {
            Some(f) => f * default_delta_chi(&schedule, &law) / r::<R>(1e-2),
            None => default_delta_chi(&schedule, &law),
        };
        Ok(choose_chi(context, delta, time_nodes).is_ok())
    };

    if !feasible(R::zero())? {
        return Err(CoreError::Infeasible(
            "constant density infeasible; configuration broken".into(),
        ));
    }
    if feasible(cap)? {
        return Ok(FeasibilityResult {
            s_hat: cap,
            s_feasible: cap,
            s_infeasible: None,
            capped: true,
        });
    }

    let mut lo = R::zero();
    let mut hi = cap;
    // bisect to relative tolerance 1e-3 of the upper end
    while (hi - lo) > r::<R>(1e-3) * hi {
        let mid = (lo + hi) * r::<R>(0.5);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FeasibilityResult {
        s_hat: lo,
        s_feasible: lo,
        s_infeasible: Some(hi),
        capped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;

    fn context(amplitude: f64) -> Arc<ProfileContext<f64>> {
        let grid = PeriodicGrid::new(2, 32).unwrap();
        let spec = if amplitude == 0.0 {
            Rho0Spec::constant(1.0)
        } else {
            Rho0Spec::single_mode(1.0, [1, 0, 0], amplitude)
        };
        let schedule = Arc::new(DensitySchedule::new(grid, &spec, 1.0).unwrap());
        let law = Arc::new(PressureLaw::power(2.0).unwrap());
        Arc::new(ProfileContext::new(schedule, law).unwrap())
    }

    #[test]
    fn floor_on_terminal_plateau_is_pressure_term() {
        let ctx = context(0.1);
        // Ψ ≡ 0, ϱ ≡ ϱ̃ = 1, so floor = (N/2) p(ϱ̃) = 1
        let f = ctx.chi_floor(0.9);
        assert!((f - 1.0).abs() < 1e-12, "floor {f}");
    }

    #[test]
    fn constant_density_accepts_constant_chi() {
        // direct substitution of a constant χ > (N/2)p(ϱ̃): with Ψ ≡ 0 and
        // constant ϱ all coefficient suprema vanish, so the residual is χ'.
        let ctx = context(0.0);
        let nodes = 256usize;
        let dt = 1.0 / nodes as f64;
        let profile = EnergyProfile::from_chi_samples(
            ctx,
            dt,
            vec![1.25f64; nodes + 1],
            0.01,
        )
        .unwrap();
        for i in 0..=16 {
            let t = i as f64 / 16.0;
            assert_eq!(profile.chi(t), 1.25);
            assert!(profile.oo5_residual(t) <= 1e-12);
        }
        // floor is exactly (N/2) p(ϱ̃) = 1 for all t
        assert!(profile.margin_o1(0.5) >= 0.01 - 1e-12);
        // below the floor the constructor must reject
        let ctx = context(0.0);
        assert!(EnergyProfile::from_chi_samples(
            ctx,
            dt,
            vec![0.99f64; nodes + 1],
            0.01
        )
        .is_err());
    }

    #[test]
    fn extension_beyond_horizon_is_constant() {
        let ctx = context(0.08);
        let profile = choose_chi(ctx, 0.01, 256).unwrap();
        let chi_end = profile.chi(1.0);
        assert_eq!(profile.chi(1.5), chi_end);
        assert_eq!(profile.chi_prime(2.0), 0.0);
        // conditions still hold past the horizon: coefficients vanish there
        assert!(profile.oo5_residual(1.3) <= 1e-12);
        assert!(profile.margin_o1(1.7) > 0.0);
    }

    #[test]
    fn moderate_oscillation_is_feasible_and_validates() {
        let ctx = context(0.08);
        let profile = choose_chi(ctx, 0.01, 512).unwrap();
        let report = profile.validate(4).unwrap();
        assert!(report.min_floor_margin >= 0.01 - 1e-12);
        let scale = profile.chi(0.0);
        assert!(report.max_oo5_residual <= 1e-12 * scale);
        assert!(report.min_energy > 0.0);
    }

    #[test]
    fn energy_field_plateau_values() {
        let ctx = context(0.08);
        let profile = choose_chi(ctx, 0.01, 256).unwrap();
        // t ≥ 3T/4: e = χ(t) - (N/2) p(ϱ̃), spatially constant
        let e = profile.energy_field(0.9);
        let expect = profile.chi(0.9) - 1.0;
        for v in e.values() {
            assert!((v - expect).abs() < 1e-12);
        }
        // t = 0: ∂tΨ = 0 on the plateau, e = χ(0) - (N/2)p(ϱ0)
        let e0 = profile.energy_field(0.0);
        let sched = profile.schedule().clone();
        for (idx, v) in e0.values().iter().enumerate() {
            let rho = sched.rho0().values()[idx];
            let expect = profile.chi(0.0) - rho * rho;
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_threshold_brackets() {
        let grid = PeriodicGrid::new(2, 16).unwrap();
        let law = Arc::new(PressureLaw::power(2.0).unwrap());
        let family = Rho0Spec::single_mode(1.0, [1, 0, 0], 1.0);
        let result =
            feasibility_epsilon(grid, law, 1.0, &family, 1.0, None, 192).unwrap();
        assert!(result.s_hat > 0.0);
        if !result.capped {
            let hi = result.s_infeasible.unwrap();
            assert!(hi > result.s_hat);
            assert!((hi - result.s_hat) <= 1.0e-3 * hi * 1.01);
        }
    }
}
