//! Grid fields with spectral companions: transforms, calculus, Poisson and
//! Helmholtz kernels. Differentiation is exact per Fourier mode; products of
//! fields are dealiased with the 2/3 rule where they feed back into spectral
//! work.

use crate::error::{CoreError, Result};
use crate::fft::{fft_in_place, Direction};
use crate::grid::{PeriodicGrid, MAX_DIM};
use crate::scalar::{r, Real};
use num_complex::Complex;

/// Real collocation samples on a [`PeriodicGrid`] (row-major axis order).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<R: Real> {
    grid: PeriodicGrid,
    values: Vec<R>,
}

/// Complex Fourier coefficients of a [`ScalarField`], raw DFT layout.
#[derive(Debug, Clone)]
pub struct Spectrum<R: Real> {
    grid: PeriodicGrid,
    coeffs: Vec<Complex<R>>,
}

impl<R: Real> ScalarField<R> {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            values: vec![R::zero(); grid.len()],
        }
    }

    pub fn constant(grid: PeriodicGrid, c: R) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: PeriodicGrid, values: Vec<R>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::GridMismatch(format!(
                "value buffer {} vs grid {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([R; MAX_DIM]) -> R) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[R] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    pub fn mean(&self) -> R {
        let sum: R = self.values.iter().copied().sum();
        sum / R::from_usize(self.values.len()).unwrap()
    }

    /// Exact integral over Ω of the trigonometric interpolant.
    pub fn integral(&self) -> R {
        self.mean() * self.grid.volume()
    }

    pub fn linf(&self) -> R {
        self.values
            .iter()
            .fold(R::zero(), |m, v| m.max(v.abs()))
    }

    pub fn l2(&self) -> R {
        let s: R = self.values.iter().map(|v| *v * *v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn min(&self) -> R {
        self.values.iter().fold(R::infinity(), |m, v| m.min(*v))
    }

    pub fn max(&self) -> R {
        self.values.iter().fold(-R::infinity(), |m, v| m.max(*v))
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(R, R) -> R) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn scale(&self, c: R) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn axpy(&mut self, c: R, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += c * *b;
        }
    }

    /// Forward transform: fills spectral coefficients from physical values.
    pub fn transform(&self) -> Spectrum<R> {
        let mut coeffs: Vec<Complex<R>> = self
            .values
            .iter()
            .map(|v| Complex::new(*v, R::zero()))
            .collect();
        fft_nd(&self.grid, &mut coeffs, Direction::Forward);
        Spectrum {
            grid: self.grid,
            coeffs,
        }
    }

    /// Spectral first derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.transform().derivative(axis).inverse()
    }

    /// Zero out modes with any `|k| > resolution/3` (2/3 dealiasing rule).
    pub fn dealias(&self) -> Self {
        let mut sp = self.transform();
        sp.dealias_in_place();
        sp.inverse()
    }
}

impl<R: Real> Spectrum<R> {
    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex<R>] {
        &self.coeffs
    }

    /// Inverse transform back to physical samples (real part; imaginary dust
    /// from roundoff is dropped).
    pub fn inverse(&self) -> ScalarField<R> {
        let mut work = self.coeffs.clone();
        fft_nd(&self.grid, &mut work, Direction::Inverse);
        ScalarField {
            grid: self.grid,
            values: work.into_iter().map(|z| z.re).collect(),
        }
    }

    /// Coefficient of the basis function `e^{iπ k·x}` for signed mode `k`.
    ///
    /// Relates to the raw DFT bin through the node offset `x_0 = -1`.
    pub fn physical_coeff(&self, k: [i64; MAX_DIM]) -> Complex<R> {
        let n = self.grid.resolution() as i64;
        let mut bins = [0usize; MAX_DIM];
        for a in 0..self.grid.dim() {
            let kk = k[a].rem_euclid(n);
            bins[a] = kk as usize;
        }
        let idx = self.grid.index(bins);
        let parity: i64 = k.iter().take(self.grid.dim()).sum();
        let sign = if parity.rem_euclid(2) == 0 {
            R::one()
        } else {
            -R::one()
        };
        let scale = sign / R::from_usize(self.grid.len()).unwrap();
        self.coeffs[idx] * scale
    }

    fn for_each_mode(&mut self, f: impl Fn([i64; MAX_DIM]) -> Complex<R>) {
        let grid = self.grid;
        let dim = grid.dim();
        for idx in 0..self.coeffs.len() {
            let c = grid.coords(idx);
            let mut k = [0i64; MAX_DIM];
            for a in 0..dim {
                k[a] = grid.signed_freq(c[a]);
            }
            self.coeffs[idx] = self.coeffs[idx] * f(k);
        }
    }

    /// Multiply each mode by `iπ k_axis`; the Nyquist mode derivative is set
    /// to zero as usual for real data.
    pub fn derivative(mut self, axis: usize) -> Self {
        let nyq = -((self.grid.resolution() / 2) as i64);
        self.for_each_mode(|k| {
            if k[axis] == nyq {
                Complex::new(R::zero(), R::zero())
            } else {
                Complex::new(R::zero(), R::PI() * R::from_i64(k[axis]).unwrap())
            }
        });
        self
    }

    /// Multiply each mode by `-π²|k|²`.
    pub fn laplacian(mut self) -> Self {
        self.for_each_mode(|k| {
            let k2: i64 = k.iter().map(|ki| ki * ki).sum();
            Complex::new(-R::PI() * R::PI() * R::from_i64(k2).unwrap(), R::zero())
        });
        self
    }

    pub fn dealias_in_place(&mut self) {
        let cutoff = (self.grid.resolution() / 3) as i64;
        self.for_each_mode(|k| {
            if k.iter().any(|ki| ki.abs() > cutoff) {
                Complex::new(R::zero(), R::zero())
            } else {
                Complex::new(R::one(), R::zero())
            }
        });
    }
}

/// Multi-dimensional FFT: 1-D transforms along every axis.
fn fft_nd<R: Real>(grid: &PeriodicGrid, data: &mut [Complex<R>], dir: Direction) {
    let sizes = grid.sizes();
    let dim = grid.dim();
    let n = grid.resolution();
    let mut line = vec![Complex::new(R::zero(), R::zero()); n];
    // strides for row-major layout over the active dims
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
            // compute base offset of this line
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
            fft_in_place(&mut line, dir);
            for (i, slot) in line.iter().enumerate() {
                data[base + i * stride] = *slot;
            }
        }
    }
}

/// Solve `-ΔΨ = f` on the torus with `∫Ψ = 0`.
///
/// The source must have (numerically) zero mean; otherwise the problem is
/// ill-posed on the torus and an error is returned.
pub fn solve_poisson<R: Real>(f: &ScalarField<R>) -> Result<ScalarField<R>> {
    let mean = f.mean().abs();
    let rel = r::<R>(1e-10).max(R::epsilon() * r::<R>(16.0));
    let bound = rel * f.linf().max(R::min_positive_value());
    if mean > bound {
        return Err(CoreError::NonzeroMeanSource {
            mean: mean.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    let mut sp = f.transform();
    let pi2 = R::PI() * R::PI();
    sp.for_each_mode(|k| {
        let k2: i64 = k.iter().map(|ki| ki * ki).sum();
        if k2 == 0 {
            Complex::new(R::zero(), R::zero())
        } else {
            Complex::new(R::one() / (pi2 * R::from_i64(k2).unwrap()), R::zero())
        }
    });
    Ok(sp.inverse())
}

/// Vector field as one scalar component per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<R: Real> {
    components: Vec<ScalarField<R>>,
}

impl<R: Real> VectorField<R> {
    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField<R>>) -> Result<Self> {
        if components.is_empty() {
            return Err(CoreError::InvalidInput("empty vector field".into()));
        }
        let grid = *components[0].grid();
        if components.len() != grid.dim() {
            return Err(CoreError::GridMismatch(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        for c in &components {
            grid.check_same(c.grid())?;
        }
        Ok(Self { components })
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([R; MAX_DIM], usize) -> R) -> Self {
        let components = (0..grid.dim())
            .map(|a| ScalarField::from_fn(grid, |x| f(x, a)))
            .collect();
        Self { components }
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        self.components[0].grid()
    }

    #[inline]
    pub fn component(&self, axis: usize) -> &ScalarField<R> {
        &self.components[axis]
    }

    #[inline]
    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField<R> {
        &mut self.components[axis]
    }

    pub fn divergence(&self) -> ScalarField<R> {
        let grid = *self.grid();
        let mut acc = ScalarField::zeros(grid);
        for (a, comp) in self.components.iter().enumerate() {
            let d = comp.derivative(a);
            acc.axpy(R::one(), &d);
        }
        acc
    }

    /// Pointwise squared magnitude.
    pub fn norm2_field(&self) -> ScalarField<R> {
        let grid = *self.grid();
        let mut acc = ScalarField::zeros(grid);
        for comp in &self.components {
            for (s, v) in acc.values_mut().iter_mut().zip(comp.values().iter()) {
                *s += *v * *v;
            }
        }
        acc
    }

    pub fn linf(&self) -> R {
        self.norm2_field().max().sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let components = self
            .components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let components = self
            .components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    pub fn scale(&self, c: R) -> Self {
        Self {
            components: self.components.iter().map(|f| f.scale(c)).collect(),
        }
    }

    /// L² inner product `∫ a·b`.
    pub fn l2_inner(&self, other: &Self) -> Result<R> {
        self.grid().check_same(other.grid())?;
        let mut acc = R::zero();
        for (a, b) in self.components.iter().zip(other.components.iter()) {
            let s: R = a
                .values()
                .iter()
                .zip(b.values().iter())
                .map(|(x, y)| *x * *y)
                .sum();
            acc += s;
        }
        Ok(acc * self.grid().cell_volume())
    }
}

/// Gradient of a scalar field.
pub fn gradient<R: Real>(f: &ScalarField<R>) -> VectorField<R> {
    let sp = f.transform();
    let components = (0..f.grid().dim())
        .map(|a| sp.clone().derivative(a).inverse())
        .collect();
    VectorField { components }
}

/// Helmholtz decomposition `m = v + ∇Φ` with `div v = 0`, `∫Φ = 0`.
///
/// Mode-wise projection: the gradient part carries `k (k·m̂)/|k|²`, the
/// solenoidal part the orthogonal complement; the two are L²-orthogonal.
pub fn helmholtz<R: Real>(m: &VectorField<R>) -> Result<(VectorField<R>, ScalarField<R>)> {
    let grid = *m.grid();
    let dim = grid.dim();
    let spectra: Vec<Spectrum<R>> = (0..dim).map(|a| m.component(a).transform()).collect();

    let mut phi = Spectrum {
        grid,
        coeffs: vec![Complex::new(R::zero(), R::zero()); grid.len()],
    };
    let mut v_spectra: Vec<Spectrum<R>> = spectra.clone();

    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        let mut k = [0i64; MAX_DIM];
        for a in 0..dim {
            k[a] = grid.signed_freq(c[a]);
        }
        let k2: i64 = k.iter().map(|ki| ki * ki).sum();
        if k2 == 0 {
            // mean momentum stays in v; Φ has zero mean
            phi.coeffs[idx] = Complex::new(R::zero(), R::zero());
            continue;
        }
        let k2r = R::from_i64(k2).unwrap();
        // k·m̂
        let mut kdm = Complex::new(R::zero(), R::zero());
        for a in 0..dim {
            kdm = kdm + spectra[a].coeffs[idx] * R::from_i64(k[a]).unwrap();
        }
        // Φ̂ = (k·m̂) / (iπ|k|²)  so that (∇Φ)̂ = iπk Φ̂ = k(k·m̂)/|k|²
        let iphi = kdm / (Complex::new(R::zero(), R::PI()) * k2r);
        phi.coeffs[idx] = iphi;
        for a in 0..dim {
            let grad_part = kdm * (R::from_i64(k[a]).unwrap() / k2r);
            v_spectra[a].coeffs[idx] = spectra[a].coeffs[idx] - grad_part;
        }
    }

    let v = VectorField {
        components: v_spectra.into_iter().map(|s| s.inverse()).collect(),
    };
    Ok((v, phi.inverse()))
}

/// Packed symmetric tensor field; `N(N+1)/2` independent components.
#[derive(Debug, Clone)]
pub struct SymTensorField<R: Real> {
    grid: PeriodicGrid,
    /// 2-D order: xx, xy, yy. 3-D order: xx, xy, xz, yy, yz, zz.
    components: Vec<ScalarField<R>>,
    trace_free: bool,
}

/// Packed index of component `(i,j)`, `i ≤ j`, for dimension `dim`.
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row-major upper triangle
    let mut idx = 0;
    for row in 0..i {
        idx += dim - row;
    }
    idx + (j - i)
}

impl<R: Real> SymTensorField<R> {
    pub fn zeros(grid: PeriodicGrid, trace_free: bool) -> Self {
        let n = grid.dim() * (grid.dim() + 1) / 2;
        Self {
            grid,
            components: (0..n).map(|_| ScalarField::zeros(grid)).collect(),
            trace_free,
        }
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn trace_free(&self) -> bool {
        self.trace_free
    }

    #[inline]
    pub fn component(&self, i: usize, j: usize) -> &ScalarField<R> {
        &self.components[sym_index(self.grid.dim(), i, j)]
    }

    #[inline]
    pub fn component_mut(&mut self, i: usize, j: usize) -> &mut ScalarField<R> {
        &mut self.components[sym_index(self.grid.dim(), i, j)]
    }

    /// Pointwise trace.
    pub fn trace_field(&self) -> ScalarField<R> {
        let mut acc = ScalarField::zeros(self.grid);
        for a in 0..self.grid.dim() {
            acc.axpy(R::one(), self.component(a, a));
        }
        acc
    }

    /// Largest component magnitude over all nodes and entries.
    pub fn linf(&self) -> R {
        self.components
            .iter()
            .fold(R::zero(), |m, f| m.max(f.linf()))
    }

    /// Validate the trace-free claim: pointwise trace below
    /// `1e-12 · max component magnitude`.
    pub fn check_trace_free(&self) -> Result<()> {
        let tol = r::<R>(1e-12) * self.linf().max(R::min_positive_value());
        let worst = self.trace_field().linf();
        if worst > tol {
            return Err(CoreError::InvalidInput(format!(
                "trace magnitude {:e} exceeds {:e}",
                worst.to_f64_lossy(),
                tol.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// Matrix at a node, dense `dim × dim`.
    pub fn at(&self, idx: usize) -> [[R; MAX_DIM]; MAX_DIM] {
        let dim = self.grid.dim();
        let mut m = [[R::zero(); MAX_DIM]; MAX_DIM];
        for i in 0..dim {
            for j in i..dim {
                let v = self.component(i, j).values()[idx];
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    /// Row divergence: `(div U)_i = Σ_j ∂_j U_{ij}`.
    pub fn divergence(&self) -> VectorField<R> {
        let dim = self.grid.dim();
        let mut components = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut acc = ScalarField::zeros(self.grid);
            for j in 0..dim {
                acc.axpy(R::one(), &self.component(i, j).derivative(j));
            }
            components.push(acc);
        }
        VectorField { components }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(2, n).unwrap()
    }

    #[test]
    fn constant_field_spectrum() {
        let f = ScalarField::<f64>::constant(grid2(16), 3.25);
        let sp = f.transform();
        let zero_mode = sp.physical_coeff([0, 0, 0]);
        assert!((zero_mode.re - 3.25).abs() < 1e-13);
        assert!(zero_mode.im.abs() < 1e-13);
        for idx in 1..sp.coeffs().len() {
            assert!(sp.coeffs()[idx].norm() < 1e-12 * 16.0 * 16.0);
        }
    }

    #[test]
    fn single_harmonic_spectrum() {
        // cos(πx₁) has exactly two nonzero modes, k = ±1 on axis 0.
        let f = ScalarField::<f64>::from_fn(grid2(16), |x| (std::f64::consts::PI * x[0]).cos());
        let sp = f.transform();
        let plus = sp.physical_coeff([1, 0, 0]);
        let minus = sp.physical_coeff([-1, 0, 0]);
        assert!((plus.re - 0.5).abs() < 1e-12);
        assert!((minus.re - 0.5).abs() < 1e-12);
        let mut nonzero = 0;
        for idx in 0..sp.coeffs().len() {
            if sp.coeffs()[idx].norm() / (16.0 * 16.0) > 1e-12 {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn roundtrip_random_field() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let g = grid2(8);
        let f = ScalarField::from_values(g, (0..g.len()).map(|_| next()).collect()).unwrap();
        let back = f.transform().inverse();
        let scale = f.linf().max(1.0);
        for (a, b) in back.values().iter().zip(f.values().iter()) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn poisson_eigenfunction() {
        // f = π² cos(πx₁) → Ψ = cos(πx₁)
        let pi = std::f64::consts::PI;
        let g = grid2(32);
        let f = ScalarField::<f64>::from_fn(g, |x| pi * pi * (pi * x[0]).cos());
        let psi = solve_poisson(&f).unwrap();
        let expect = ScalarField::<f64>::from_fn(g, |x| (pi * x[0]).cos());
        for (a, b) in psi.values().iter().zip(expect.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(psi.mean().abs() < 1e-13);
    }

    #[test]
    fn poisson_zero_source() {
        let g = grid2(8);
        let psi = solve_poisson(&ScalarField::<f64>::zeros(g)).unwrap();
        assert!(psi.linf() < 1e-15);
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let g = grid2(8);
        let f = ScalarField::<f64>::constant(g, 1.0);
        assert!(matches!(
            solve_poisson(&f),
            Err(CoreError::NonzeroMeanSource { .. })
        ));
    }

    #[test]
    fn poisson_random_source_laplacian_oracle() {
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let g = grid2(32);
        let mut f = ScalarField::from_values(g, (0..g.len()).map(|_| next()).collect()).unwrap();
        // smooth it a bit and remove the mean
        f = f.dealias();
        let mean = f.mean();
        f = f.map(|v| v - mean);
        let psi = solve_poisson(&f).unwrap();
        // discrete Laplacian oracle: apply the spectral Laplacian and compare
        let lap = psi.transform().laplacian().inverse();
        for (a, b) in lap.values().iter().zip(f.values().iter()) {
            assert!((a + b).abs() < 1e-10 * f.linf().max(1.0));
        }
    }

    #[test]
    fn helmholtz_pure_gradient() {
        let pi = std::f64::consts::PI;
        let g = grid2(32);
        let phi_true = ScalarField::<f64>::from_fn(g, |x| (pi * x[0]).cos());
        let m = gradient(&phi_true);
        let (v, phi) = helmholtz(&m).unwrap();
        assert!(v.linf() < 1e-12);
        for (a, b) in phi.values().iter().zip(phi_true.values().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_pure_curl() {
        let pi = std::f64::consts::PI;
        let g = grid2(32);
        let psi = ScalarField::<f64>::from_fn(g, |x| (pi * x[0]).sin() * (2.0 * pi * x[1]).cos());
        let dpsi1 = psi.derivative(1);
        let dpsi0 = psi.derivative(0);
        let m = VectorField::from_components(vec![dpsi1.clone(), dpsi0.scale(-1.0)]).unwrap();
        let (v, phi) = helmholtz(&m).unwrap();
        assert!(phi.linf() < 1e-12);
        let diff = v.sub(&m).unwrap();
        assert!(diff.linf() < 1e-12);
    }

    #[test]
    fn helmholtz_random_reassembly_and_orthogonality() {
        let mut state = 4242u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let g = grid2(32);
        let m = VectorField::from_components(
            (0..2)
                .map(|_| {
                    ScalarField::from_values(g, (0..g.len()).map(|_| next()).collect())
                        .unwrap()
                        .dealias()
                })
                .collect(),
        )
        .unwrap();
        let (v, phi) = helmholtz(&m).unwrap();
        // reassembly
        let reassembled = v.add(&gradient(&phi)).unwrap();
        let diff = reassembled.sub(&m).unwrap();
        assert!(diff.linf() < 1e-10 * m.linf().max(1.0));
        // div v = 0
        assert!(v.divergence().linf() < 1e-10 * m.linf().max(1.0));
        // orthogonality ∫ v · ∇Φ = 0
        let inner = v.l2_inner(&gradient(&phi)).unwrap();
        assert!(inner.abs() < 1e-10);
    }

    #[test]
    fn poisson_helmholtz_consistency() {
        // helmholtz(∇ solve_poisson(f)) = (0, solve_poisson(f))
        let pi = std::f64::consts::PI;
        let g = grid2(32);
        let f = ScalarField::<f64>::from_fn(g, |x| {
            (pi * x[0]).cos() + 0.5 * (2.0 * pi * x[1]).sin()
        });
        let psi = solve_poisson(&f).unwrap();
        let (v, phi) = helmholtz(&gradient(&psi)).unwrap();
        assert!(v.linf() < 1e-10);
        let diff = phi.sub(&psi).unwrap();
        assert!(diff.linf() < 1e-10);
    }

    #[test]
    fn sym_index_layout() {
        assert_eq!(sym_index(2, 0, 0), 0);
        assert_eq!(sym_index(2, 0, 1), 1);
        assert_eq!(sym_index(2, 1, 0), 1);
        assert_eq!(sym_index(2, 1, 1), 2);
        assert_eq!(sym_index(3, 0, 2), 2);
        assert_eq!(sym_index(3, 1, 1), 3);
        assert_eq!(sym_index(3, 1, 2), 4);
        assert_eq!(sym_index(3, 2, 2), 5);
    }

    #[test]
    fn generic_scalar_smoke_f32() {
        let g = grid2(16);
        let pi = std::f32::consts::PI;
        let f = ScalarField::<f32>::from_fn(g, |x| pi * pi * (pi * x[0]).cos());
        let psi = solve_poisson(&f).unwrap();
        let expect = ScalarField::<f32>::from_fn(g, |x| (pi * x[0]).cos());
        for (a, b) in psi.values().iter().zip(expect.values().iter()) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
