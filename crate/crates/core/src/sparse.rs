//! Sparse trigonometric polynomials on the torus.
//!
//! Oscillatory increments carry frequencies far above any storage grid, so
//! they are kept symbolically: a map from integer wavevectors `k` to complex
//! coefficients of `e^{iπ k·x}`, Hermitian so the field is real. Products,
//! derivatives and the divergence inverse are exact mode algebra; integrals
//! come from Parseval. Evaluation on a collocation grid folds modes onto the
//! grid bins, which reproduces exact nodal values.

use crate::error::{CoreError, Result};
use crate::fft::{fft_in_place, Direction};
use crate::field::{ScalarField, SymTensorField, VectorField};
use crate::grid::{PeriodicGrid, MAX_DIM};
use crate::scalar::{r, Real};
use num_complex::Complex;
use std::collections::BTreeMap;

pub type Mode = [i32; MAX_DIM];

/// Coefficients below `DUST * max|c|` are dropped after products; the dropped
/// mass is tracked so rigorous sup-norm bounds stay honest.
const DUST: f64 = 1e-16;

#[derive(Debug, Clone)]
pub struct SparseScalar<R: Real> {
    dim: usize,
    modes: BTreeMap<Mode, Complex<R>>,
    /// accumulated sup-norm bound of everything truncated away
    dust: R,
}

fn neg(k: Mode) -> Mode {
    [-k[0], -k[1], -k[2]]
}

impl<R: Real> SparseScalar<R> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            modes: BTreeMap::new(),
            dust: R::zero(),
        }
    }

    pub fn constant(dim: usize, c: R) -> Self {
        let mut s = Self::new(dim);
        if c != R::zero() {
            s.modes.insert([0; MAX_DIM], Complex::new(c, R::zero()));
        }
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn dust(&self) -> R {
        self.dust
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Mode, &Complex<R>)> {
        self.modes.iter()
    }

    pub fn coeff(&self, k: Mode) -> Complex<R> {
        self.modes
            .get(&k)
            .copied()
            .unwrap_or_else(|| Complex::new(R::zero(), R::zero()))
    }

    /// Add `c·e^{iπk·x} + conj` so the field stays real.
    pub fn add_mode_pair(&mut self, k: Mode, c: Complex<R>) {
        if k == [0; MAX_DIM] {
            // c + conj(c) = 2 Re(c), kept exactly real
            let e = self
                .modes
                .entry(k)
                .or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *e = Complex::new(e.re + c.re + c.re, R::zero());
            if e.re == R::zero() {
                self.modes.remove(&k);
            }
            return;
        }
        for (kk, cc) in [(k, c), (neg(k), c.conj())] {
            let e = self
                .modes
                .entry(kk)
                .or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *e = *e + cc;
            if e.re == R::zero() && e.im == R::zero() {
                self.modes.remove(&kk);
            }
        }
    }

    pub fn scale(&self, f: R) -> Self {
        let mut out = self.clone();
        for c in out.modes.values_mut() {
            *c = Complex::new(c.re * f, c.im * f);
        }
        out.dust = out.dust * f.abs();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(other, R::one());
        out
    }

    pub fn add_assign_scaled(&mut self, other: &Self, f: R) {
        for (k, c) in other.modes.iter() {
            let e = self
                .modes
                .entry(*k)
                .or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *e = *e + Complex::new(c.re * f, c.im * f);
        }
        self.dust += other.dust * f.abs();
        self.prune_zero();
    }

    fn prune_zero(&mut self) {
        self.modes
            .retain(|_, c| c.re != R::zero() || c.im != R::zero());
    }

    /// Exact pointwise product (convolution of mode sets), with dust-level
    /// truncation tracked.
    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::new(self.dim);
        let mut acc: BTreeMap<Mode, Complex<R>> = BTreeMap::new();
        for (ka, ca) in self.modes.iter() {
            for (kb, cb) in other.modes.iter() {
                let k = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]];
                let e = acc
                    .entry(k)
                    .or_insert_with(|| Complex::new(R::zero(), R::zero()));
                *e = *e + *ca * *cb;
            }
        }
        // carried dust: |a·dust_b| + |b·dust_a| + dust_a·dust_b
        let sup_a = self.linf_bound();
        let sup_b = other.linf_bound();
        out.dust = sup_a * other.dust + sup_b * self.dust + self.dust * other.dust;
        out.modes = acc;
        out.truncate();
        out
    }

    /// Drop coefficients below the dust threshold, accumulating their mass.
    pub fn truncate(&mut self) {
        let max = self
            .modes
            .values()
            .fold(R::zero(), |m, c| m.max(c.norm()));
        if max == R::zero() {
            self.modes.clear();
            return;
        }
        let cut = max * r::<R>(DUST);
        let mut dropped = R::zero();
        self.modes.retain(|_, c| {
            let n = c.norm();
            if n < cut {
                dropped += n;
                false
            } else {
                true
            }
        });
        self.dust += dropped;
    }

    /// `∂_axis`: multiply each mode by `iπ k_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = Self::new(self.dim);
        for (k, c) in self.modes.iter() {
            let factor = Complex::new(R::zero(), R::PI() * R::from_i32(k[axis]).unwrap());
            let v = *c * factor;
            if v.re != R::zero() || v.im != R::zero() {
                out.modes.insert(*k, v);
            }
        }
        // derivative of the dust is not controlled; callers only
        // differentiate fields whose dust is zero by construction
        out.dust = self.dust;
        out
    }

    /// `∫_Ω f = |Ω| · c₀`.
    pub fn integral(&self, volume: R) -> R {
        self.coeff([0; MAX_DIM]).re * volume
    }

    pub fn mean(&self) -> R {
        self.coeff([0; MAX_DIM]).re
    }

    /// Parseval product `∫ f g` for real fields.
    pub fn l2_inner(&self, other: &Self, volume: R) -> R {
        // iterate over the smaller set
        let (small, big) = if self.modes.len() <= other.modes.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = Complex::new(R::zero(), R::zero());
        for (k, c) in small.modes.iter() {
            let o = big.coeff(neg(*k));
            acc = acc + *c * o;
        }
        acc.re * volume
    }

    /// Rigorous sup-norm bound `Σ|c_k|` plus tracked dust.
    pub fn linf_bound(&self) -> R {
        let s: R = self.modes.values().map(|c| c.norm()).sum();
        s + self.dust
    }

    /// Evaluate at one point (full mode sum).
    pub fn eval(&self, x: [R; MAX_DIM]) -> R {
        let mut acc = R::zero();
        for (k, c) in self.modes.iter() {
            let mut phase = R::zero();
            for a in 0..self.dim {
                phase += R::PI() * R::from_i32(k[a]).unwrap() * x[a];
            }
            acc += c.re * phase.cos() - c.im * phase.sin();
        }
        acc
    }

    /// Exact nodal values on a collocation grid: modes fold onto grid bins
    /// (`e^{iπk·x_j}` depends on `k` only through `k mod 2n` at the nodes).
    pub fn eval_on_grid(&self, grid: PeriodicGrid) -> Result<ScalarField<R>> {
        if grid.dim() != self.dim {
            return Err(CoreError::GridMismatch(format!(
                "sparse dim {} vs grid dim {}",
                self.dim,
                grid.dim()
            )));
        }
        let n = grid.resolution() as i64;
        let len = grid.len();
        let mut bins = vec![Complex::new(R::zero(), R::zero()); len];
        for (k, c) in self.modes.iter() {
            // fold each axis: e^{iπ k x_j} at x_j = -1 + 2j/n equals
            // (-1)^k e^{2πi (k mod n) j / n}
            let mut idx = [0usize; MAX_DIM];
            let mut parity = 0i64;
            for a in 0..self.dim {
                let kk = k[a] as i64;
                parity += kk;
                idx[a] = kk.rem_euclid(n) as usize;
            }
            let sign = if parity.rem_euclid(2) == 0 {
                R::one()
            } else {
                -R::one()
            };
            let bin = grid.index(idx);
            bins[bin] = bins[bin] + Complex::new(c.re * sign, c.im * sign);
        }
        fft_in_place_nd(grid, &mut bins);
        ScalarField::from_values(grid, bins.into_iter().map(|z| z.re).collect())
    }

    /// Lift a grid field into mode space, keeping modes with `|k| ≤ band`
    /// per axis. Intended for smooth, well-resolved fields.
    pub fn from_grid(field: &ScalarField<R>, band: usize) -> Self {
        let grid = *field.grid();
        let sp = field.transform();
        let mut out = Self::new(grid.dim());
        let band = band.min(grid.resolution() / 2) as i64;
        let mut k = [0i64; MAX_DIM];
        fn rec<R: Real>(
            out: &mut SparseScalar<R>,
            sp: &crate::field::Spectrum<R>,
            grid: &PeriodicGrid,
            band: i64,
            axis: usize,
            k: &mut [i64; MAX_DIM],
        ) {
            if axis == grid.dim() {
                let c = sp.physical_coeff(*k);
                if c.norm() > R::epsilon() * r::<R>(16.0) {
                    let mode = [k[0] as i32, k[1] as i32, k[2] as i32];
                    out.modes.insert(mode, c);
                }
                return;
            }
            for kk in -band..=band {
                k[axis] = kk;
                rec(out, sp, grid, band, axis + 1, k);
            }
        }
        rec(&mut out, &sp, &grid, band, 0, &mut k);
        out
    }
}

/// Inverse multi-dim FFT on a raw coefficient buffer (helper for folding).
fn fft_in_place_nd<R: Real>(grid: PeriodicGrid, data: &mut [Complex<R>]) {
    // data holds raw DFT bins (physical-coefficient convention folded in);
    // synthesize values: f_j = Σ_k bins_k e^{2πi k·j/n}. The library inverse
    // applies 1/n^N, so pre-scale.
    let scale = R::from_usize(grid.len()).unwrap();
    for z in data.iter_mut() {
        *z = Complex::new(z.re * scale, z.im * scale);
    }
    // reuse the per-axis machinery from field: local implementation
    let sizes = grid.sizes();
    let dim = grid.dim();
    let n = grid.resolution();
    let mut line = vec![Complex::new(R::zero(), R::zero()); n];
    let mut strides = [0usize; MAX_DIM];
    {
        let mut s = 1usize;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= sizes[a];
        }
    }
    for axis in 0..dim {
        let stride = strides[axis];
        let count = grid.len() / n;
        for block in 0..count {
            let mut rem = block;
            let mut base = 0usize;
            for a in 0..dim {
                if a == axis {
                    continue;
                }
                let extent = sizes[a];
                let pos = rem % extent;
                rem /= extent;
                base += pos * strides[a];
            }
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[base + i * stride];
            }
            fft_in_place(&mut line, Direction::Inverse);
            for (i, slot) in line.iter().enumerate() {
                data[base + i * stride] = *slot;
            }
        }
    }
}

/// Sparse vector field: one sparse scalar per axis.
#[derive(Debug, Clone)]
pub struct SparseVector<R: Real> {
    pub comps: Vec<SparseScalar<R>>,
}

impl<R: Real> SparseVector<R> {
    pub fn zero(dim: usize) -> Self {
        Self {
            comps: (0..dim).map(|_| SparseScalar::new(dim)).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn scale(&self, f: R) -> Self {
        Self {
            comps: self.comps.iter().map(|c| c.scale(f)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            comps: self
                .comps
                .iter()
                .zip(other.comps.iter())
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Self, f: R) {
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            a.add_assign_scaled(b, f);
        }
    }

    pub fn divergence(&self) -> SparseScalar<R> {
        let dim = self.dim();
        let mut acc = SparseScalar::new(dim);
        for (a, c) in self.comps.iter().enumerate() {
            acc.add_assign_scaled(&c.derivative(a), R::one());
        }
        acc
    }

    /// `∫ (w·v) g` in mode space: pairwise component inner products with a
    /// scalar weight.
    pub fn weighted_inner(&self, other: &Self, weight: &SparseScalar<R>, volume: R) -> R {
        let mut acc = R::zero();
        for (a, b) in self.comps.iter().zip(other.comps.iter()) {
            let prod = a.product(b);
            acc += prod.l2_inner(weight, volume);
        }
        acc
    }

    pub fn l2_inner(&self, other: &Self, volume: R) -> R {
        let mut acc = R::zero();
        for (a, b) in self.comps.iter().zip(other.comps.iter()) {
            acc += a.l2_inner(b, volume);
        }
        acc
    }

    pub fn eval(&self, x: [R; MAX_DIM]) -> [R; MAX_DIM] {
        let mut out = [R::zero(); MAX_DIM];
        for (a, c) in self.comps.iter().enumerate() {
            out[a] = c.eval(x);
        }
        out
    }

    pub fn eval_on_grid(&self, grid: PeriodicGrid) -> Result<VectorField<R>> {
        VectorField::from_components(
            self.comps
                .iter()
                .map(|c| c.eval_on_grid(grid))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn linf_bound(&self) -> R {
        // componentwise sup bounds combined as Euclidean norm bound
        let s: R = self
            .comps
            .iter()
            .map(|c| {
                let b = c.linf_bound();
                b * b
            })
            .sum();
        s.sqrt()
    }

    pub fn mode_count(&self) -> usize {
        self.comps.iter().map(|c| c.len()).sum()
    }
}

/// Sparse symmetric tensor field, packed upper triangle.
#[derive(Debug, Clone)]
pub struct SparseSymTensor<R: Real> {
    dim: usize,
    pub comps: Vec<SparseScalar<R>>,
}

impl<R: Real> SparseSymTensor<R> {
    pub fn zero(dim: usize) -> Self {
        let n = dim * (dim + 1) / 2;
        Self {
            dim,
            comps: (0..n).map(|_| SparseScalar::new(dim)).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize, j: usize) -> &SparseScalar<R> {
        &self.comps[crate::field::sym_index(self.dim, i, j)]
    }

    pub fn component_mut(&mut self, i: usize, j: usize) -> &mut SparseScalar<R> {
        &mut self.comps[crate::field::sym_index(self.dim, i, j)]
    }

    pub fn add_assign_scaled(&mut self, other: &Self, f: R) {
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            a.add_assign_scaled(b, f);
        }
    }

    pub fn scale(&self, f: R) -> Self {
        Self {
            dim: self.dim,
            comps: self.comps.iter().map(|c| c.scale(f)).collect(),
        }
    }

    /// Row divergence `(div U)_i = Σ_j ∂_j U_{ij}`.
    pub fn divergence(&self) -> SparseVector<R> {
        let mut out = SparseVector::zero(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.comps[i].add_assign_scaled(&self.component(i, j).derivative(j), R::one());
            }
        }
        out
    }

    pub fn trace(&self) -> SparseScalar<R> {
        let mut acc = SparseScalar::new(self.dim);
        for a in 0..self.dim {
            acc.add_assign_scaled(self.component(a, a), R::one());
        }
        acc
    }

    /// Rigorous bound on `sup_x ‖U(x)‖₂`: sum over modes of coefficient
    /// matrix spectral norms (bounded by Frobenius), plus dust.
    pub fn spectral_norm_bound(&self) -> R {
        // collect per-mode Frobenius norms
        let mut per_mode: BTreeMap<Mode, R> = BTreeMap::new();
        let mut dust = R::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let c = self.component(i, j);
                for (k, v) in c.modes() {
                    let e = per_mode.entry(*k).or_insert_with(R::zero);
                    *e += v.norm_sqr();
                }
            }
        }
        for c in &self.comps {
            dust += c.dust();
        }
        let s: R = per_mode.values().map(|v| v.sqrt()).sum();
        s + dust * r::<R>(2.0)
    }

    pub fn eval(&self, x: [R; MAX_DIM]) -> [[R; MAX_DIM]; MAX_DIM] {
        let mut m = [[R::zero(); MAX_DIM]; MAX_DIM];
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.component(i, j).eval(x);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn eval_on_grid(&self, grid: PeriodicGrid, trace_free: bool) -> Result<SymTensorField<R>> {
        let mut out = SymTensorField::zeros(grid, trace_free);
        for i in 0..self.dim {
            for j in i..self.dim {
                *out.component_mut(i, j) = self.component(i, j).eval_on_grid(grid)?;
            }
        }
        Ok(out)
    }

    pub fn mode_count(&self) -> usize {
        self.comps.iter().map(|c| c.len()).sum()
    }
}

/// Solve `div U = g` for a symmetric trace-free `U`, mode by mode.
///
/// For each wavevector `κ = πk` the solution takes
/// `Û = [k̂⊗ĝ⊥ + ĝ⊥⊗k̂ + (N/(N-1))(ĝ·k̂)(k̂⊗k̂ - I/N)] / (iπ|k|)`,
/// which satisfies `iπ Û k = ĝ`, symmetry and zero trace. The zero mode of
/// `g` must vanish (no constant right-hand side is attainable).
pub fn div_solve<R: Real>(g: &SparseVector<R>) -> Result<SparseSymTensor<R>> {
    let dim = g.dim();
    let mut out = SparseSymTensor::zero(dim);
    // gather union of modes
    let mut union: BTreeMap<Mode, Vec<Complex<R>>> = BTreeMap::new();
    for (a, comp) in g.comps.iter().enumerate() {
        for (k, c) in comp.modes() {
            let e = union
                .entry(*k)
                .or_insert_with(|| vec![Complex::new(R::zero(), R::zero()); dim]);
            e[a] = *c;
        }
    }
    for (k, ghat) in union {
        let k2: i64 = k.iter().take(dim).map(|ki| (*ki as i64) * (*ki as i64)).sum();
        if k2 == 0 {
            let mag: R = ghat.iter().map(|c| c.norm()).sum();
            if mag > r::<R>(1e-13) {
                return Err(CoreError::Numerical(format!(
                    "div_solve: nonzero mean right-hand side (|g(0)| = {:e})",
                    mag.to_f64_lossy()
                )));
            }
            continue;
        }
        let norm = R::from_i64(k2).unwrap().sqrt();
        let khat: Vec<R> = (0..dim)
            .map(|a| R::from_i32(k[a]).unwrap() / norm)
            .collect();
        // g∥ = (ĝ·k̂), g⊥ = ĝ − g∥ k̂
        let mut gpar = Complex::new(R::zero(), R::zero());
        for a in 0..dim {
            gpar = gpar + ghat[a] * khat[a];
        }
        let gperp: Vec<Complex<R>> = (0..dim).map(|a| ghat[a] - gpar * khat[a]).collect();
        // 1/(iπ|k|)
        let inv = Complex::new(R::zero(), -R::one() / (R::PI() * norm));
        let nn = R::from_usize(dim).unwrap();
        let par_factor = nn / (nn - R::one());
        for i in 0..dim {
            for j in i..dim {
                let mut val = gperp[j] * khat[i] + gperp[i] * khat[j];
                let kron = if i == j { R::one() } else { R::zero() };
                val = val + gpar * par_factor * (khat[i] * khat[j] - kron / nn);
                let coeff = val * inv;
                if coeff.re != R::zero() || coeff.im != R::zero() {
                    out.component_mut(i, j).add_half_mode(k, coeff);
                }
            }
        }
    }
    Ok(out)
}

impl<R: Real> SparseScalar<R> {
    /// Insert a coefficient for one signed mode without adding the conjugate
    /// (used when the caller iterates over full conjugate-closed mode sets).
    pub fn add_half_mode(&mut self, k: Mode, c: Complex<R>) {
        let e = self
            .modes
            .entry(k)
            .or_insert_with(|| Complex::new(R::zero(), R::zero()));
        *e = *e + c;
        if e.re == R::zero() && e.im == R::zero() {
            self.modes.remove(&k);
        }
    }
}
