//! Natural cubic spline on a uniform knot grid; C² with analytic derivative.

use crate::error::{CoreError, Result};
use crate::scalar::{r, Real};

#[derive(Debug, Clone)]
pub struct CubicSpline<R: Real> {
    t0: R,
    dt: R,
    values: Vec<R>,
    /// second derivatives at the knots
    m: Vec<R>,
}

impl<R: Real> CubicSpline<R> {
    pub fn fit(t0: R, dt: R, values: Vec<R>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(CoreError::InvalidInput(
                "spline needs at least two knots".into(),
            ));
        }
        if dt <= R::zero() {
            return Err(CoreError::InvalidInput("spline spacing must be positive".into()));
        }
        // natural BC tridiagonal system for second derivatives
        let mut m = vec![R::zero(); n];
        if n > 2 {
            let interior = n - 2;
            let mut diag = vec![r::<R>(4.0); interior];
            let mut rhs = vec![R::zero(); interior];
            let six_over_h2 = r::<R>(6.0) / (dt * dt);
            for i in 0..interior {
                rhs[i] =
                    six_over_h2 * (values[i + 2] - r::<R>(2.0) * values[i + 1] + values[i]);
            }
            // Thomas algorithm, off-diagonals are 1
            for i in 1..interior {
                let w = R::one() / diag[i - 1];
                diag[i] = diag[i] - w;
                let prev = rhs[i - 1];
                rhs[i] = rhs[i] - w * prev;
            }
            m[interior] = rhs[interior - 1] / diag[interior - 1];
            for i in (0..interior - 1).rev() {
                m[i + 1] = (rhs[i] - m[i + 2]) / diag[i];
            }
        }
        Ok(Self { t0, dt, values, m })
    }

    #[inline]
    fn locate(&self, t: R) -> (usize, R) {
        let n = self.values.len();
        let pos = ((t - self.t0) / self.dt).to_f64_lossy();
        let i = (pos.floor() as isize).clamp(0, n as isize - 2) as usize;
        let local = t - (self.t0 + self.dt * R::from_usize(i).unwrap());
        (i, local)
    }

    pub fn eval(&self, t: R) -> R {
        let (i, x) = self.locate(t);
        let h = self.dt;
        let a = self.values[i];
        let b = (self.values[i + 1] - self.values[i]) / h
            - h * (r::<R>(2.0) * self.m[i] + self.m[i + 1]) / r::<R>(6.0);
        let c = self.m[i] / r::<R>(2.0);
        let d = (self.m[i + 1] - self.m[i]) / (r::<R>(6.0) * h);
        a + x * (b + x * (c + x * d))
    }

    pub fn derivative(&self, t: R) -> R {
        let (i, x) = self.locate(t);
        let h = self.dt;
        let b = (self.values[i + 1] - self.values[i]) / h
            - h * (r::<R>(2.0) * self.m[i] + self.m[i + 1]) / r::<R>(6.0);
        let c = self.m[i] / r::<R>(2.0);
        let d = (self.m[i + 1] - self.m[i]) / (r::<R>(6.0) * h);
        b + x * (r::<R>(2.0) * c + x * r::<R>(3.0) * d)
    }

    pub fn knot_count(&self) -> usize {
        self.values.len()
    }

    pub fn t_start(&self) -> R {
        self.t0
    }

    pub fn t_end(&self) -> R {
        self.t0 + self.dt * R::from_usize(self.values.len() - 1).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots() {
        let vals: Vec<f64> = (0..16).map(|i| (i as f64 * 0.4).sin()).collect();
        let sp = CubicSpline::fit(0.0, 0.4, vals.clone()).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert!((sp.eval(i as f64 * 0.4) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn approximates_smooth_function_and_derivative() {
        let n = 257;
        let dt = 1.0 / (n - 1) as f64;
        let f = |t: f64| (2.0 * t).sin() + 0.3 * t * t;
        let df = |t: f64| 2.0 * (2.0 * t).cos() + 0.6 * t;
        let vals: Vec<f64> = (0..n).map(|i| f(i as f64 * dt)).collect();
        let sp = CubicSpline::fit(0.0, dt, vals).unwrap();
        for i in 0..200 {
            let t = 0.05 + 0.9 * (i as f64 / 200.0);
            assert!((sp.eval(t) - f(t)).abs() < 1e-8);
            assert!((sp.derivative(t) - df(t)).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_data_stays_constant() {
        let sp = CubicSpline::fit(0.0, 0.1, vec![2.5f64; 32]).unwrap();
        for i in 0..100 {
            let t = i as f64 * 0.031;
            assert_eq!(sp.eval(t), 2.5);
            assert_eq!(sp.derivative(t), 0.0);
        }
    }
}
