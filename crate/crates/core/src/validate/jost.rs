//! Scattering matrix from the auxiliary linear problem `∂ₓJ = UJ`,
//! `U = [[−iλ/2, −p], [q, iλ/2]]`, at real `λ`.
//!
//! In the gauge `Ĵ = e^{iλxσ₃/2}J` the system reads
//! `∂ₓĴ = [[0, −p e^{iλx}], [q e^{−iλx}, 0]] Ĵ`, and the Jost solution
//! normalized at `x = −∞` satisfies `Ĵ(−X) = I`; its value at `x = X` is the
//! scattering matrix `S = [[a, b̃e^{λ²t/2}], [be^{−λ²t/2}, ã]]`.

use nalgebra::SVector;
use num_complex::Complex64;
use ode_solvers::{Dopri5, OutputType, System};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, numerical, Result};
use crate::fredholm::FredholmSolver;
use crate::scattering::{scattering_coeffs, PhiEvaluator};

/// `p(t, ·)` and `q(t, ·)` on a uniform grid covering `[−X, X]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSlice {
    pub t: f64,
    pub xs: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl FieldSlice {
    /// Sample the Fredholm fields at time `t` on `[−X, X]` with spacing
    /// close to `step`, using the symmetry in `x`.
    pub fn compute(solver: &FredholmSolver, t: f64, half_width: f64, step: f64) -> Result<Self> {
        let n = (half_width / step).ceil() as usize;
        let h = half_width / n as f64;
        let half: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
        let slice = solver.at_time(t)?;
        let vals: Vec<Result<(f64, f64)>> = half
            .par_iter()
            .map(|&x| {
                let s = slice.solve(x)?;
                Ok((s.p, s.q))
            })
            .collect();
        let vals: Vec<(f64, f64)> = vals.into_iter().collect::<Result<_>>()?;
        let mut xs = Vec::with_capacity(2 * n + 1);
        let mut p = Vec::with_capacity(2 * n + 1);
        let mut q = Vec::with_capacity(2 * n + 1);
        for k in (1..=n).rev() {
            xs.push(-half[k]);
            p.push(vals[k].0);
            q.push(vals[k].1);
        }
        for k in 0..=n {
            xs.push(half[k]);
            p.push(vals[k].0);
            q.push(vals[k].1);
        }
        Ok(Self { t, xs, p, q })
    }

    /// Largest of `|p|, |q|` at the two ends relative to the field maxima.
    pub fn tail(&self) -> f64 {
        let rel = |f: &[f64]| {
            let m = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if m == 0.0 {
                0.0
            } else {
                f[0].abs().max(f[f.len() - 1].abs()) / m
            }
        };
        rel(&self.p).max(rel(&self.q))
    }

    fn step(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    fn interp(&self, x: f64) -> (f64, f64) {
        let h = self.step();
        let pos = (x - self.xs[0]) / h;
        let n = self.xs.len();
        let k = (pos.floor() as isize).clamp(1, n as isize - 3) as usize;
        let f = pos - k as f64;
        let c = [
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        ];
        let mut p = 0.0;
        let mut q = 0.0;
        for (i, ci) in c.iter().enumerate() {
            p += ci * self.p[k - 1 + i];
            q += ci * self.q[k - 1 + i];
        }
        (p, q)
    }
}

/// A 2×2 complex matrix in row-major order.
pub type Matrix2 = [[Complex64; 2]; 2];

/// Numeric scattering matrix and its comparison with the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostComparison {
    pub lambda: f64,
    pub numeric: Matrix2,
    pub analytic: Matrix2,
    /// `max |S_numeric − S_analytic|` over the entries, each relative to
    /// `max(1, |S_analytic|)`.
    pub max_error: f64,
    /// `|det S_numeric − 1|`.
    pub det_error: f64,
}

type State = SVector<f64, 8>;

struct Gauge<'a> {
    slice: &'a FieldSlice,
    lambda: f64,
}

impl System<f64, State> for Gauge<'_> {
    fn system(&self, x: f64, y: &State, dy: &mut State) {
        let (p, q) = self.slice.interp(x);
        let e = Complex64::from_polar(1.0, self.lambda * x);
        let upper = -p * e;
        let lower = q * e.conj();
        for col in 0..2 {
            let top = Complex64::new(y[4 * col], y[4 * col + 1]);
            let bottom = Complex64::new(y[4 * col + 2], y[4 * col + 3]);
            let dtop = upper * bottom;
            let dbottom = lower * top;
            dy[4 * col] = dtop.re;
            dy[4 * col + 1] = dtop.im;
            dy[4 * col + 2] = dbottom.re;
            dy[4 * col + 3] = dbottom.im;
        }
    }
}

/// Scattering matrix of the sampled fields at real `λ`, `|λ| ≤ 5`, by an
/// adaptive Dormand–Prince integration of the gauged system across the
/// slice.
pub fn jost_scattering(slice: &FieldSlice, lambda: f64) -> Result<Matrix2> {
    if !(lambda.is_finite() && lambda.abs() <= 5.0) {
        return Err(domain(format!("λ = {lambda} outside [−5, 5]")));
    }
    if slice.xs.len() < 4 {
        return Err(domain("field slice needs at least four nodes".to_string()));
    }
    let (x0, x1) = (slice.xs[0], slice.xs[slice.xs.len() - 1]);
    let mut y0 = State::zeros();
    y0[0] = 1.0;
    y0[6] = 1.0;
    let mut solver = Dopri5::new(Gauge { slice, lambda }, x0, x1, x1 - x0, y0, 1e-12, 1e-14);
    solver.set_output(OutputType::Sparse);
    solver
        .integrate()
        .map_err(|e| numerical(format!("Jost integration at λ = {lambda}: {e:?}")))?;
    let y = solver
        .y_out()
        .last()
        .ok_or_else(|| numerical(format!("Jost integration at λ = {lambda} returned no state")))?;
    let c = |k: usize| Complex64::new(y[k], y[k + 1]);
    Ok([[c(0), c(4)], [c(2), c(6)]])
}

/// Closed-form `S(λ; t)` at `λ + 10⁻¹⁰i`.
pub fn analytic_scattering(eval: &PhiEvaluator, lambda: f64, t: f64) -> Result<Matrix2> {
    let s = scattering_coeffs(eval, Complex64::new(lambda, 1e-10), t)?;
    Ok([[s.a, s.b_tilde_dressed], [s.b_dressed, s.a_tilde]])
}

/// Numeric against closed-form scattering matrix at `λ`.
pub fn compare_jost(slice: &FieldSlice, eval: &PhiEvaluator, lambda: f64) -> Result<JostComparison> {
    let numeric = jost_scattering(slice, lambda)?;
    let analytic = analytic_scattering(eval, lambda, slice.t)?;
    let mut max_error = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let e = (numeric[i][j] - analytic[i][j]).norm() / analytic[i][j].norm().max(1.0);
            max_error = max_error.max(e);
        }
    }
    let det = numeric[0][0] * numeric[1][1] - numeric[0][1] * numeric[1][0];
    Ok(JostComparison {
        lambda,
        numeric,
        analytic,
        max_error,
        det_error: (det - 1.0).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{Branch, SolutionSpec};
    use crate::specfun::heat_kernel;

    fn heat_slice(t: f64) -> FieldSlice {
        let n = 1600;
        let xs: Vec<f64> = (0..=2 * n).map(|k| -10.0 + 10.0 * k as f64 / n as f64).collect();
        FieldSlice {
            t,
            p: vec![0.0; xs.len()],
            q: xs.iter().map(|&x| heat_kernel(t, x)).collect(),
            xs,
        }
    }

    #[test]
    fn free_fields_give_the_dressed_identity() {
        let spec = SolutionSpec::new(Branch::NonSoliton, 0.0, 2.0).unwrap();
        let eval = PhiEvaluator::new(spec);
        let slice = heat_slice(1.0);
        for &lambda in &[-2.0, 1.0, 3.0] {
            let cmp = compare_jost(&slice, &eval, lambda).unwrap();
            assert!(cmp.max_error < 1e-9, "λ = {lambda}: {cmp:?}");
            assert!(cmp.det_error < 1e-10);
            let expect = (-lambda * lambda * 0.5f64).exp();
            assert!((cmp.numeric[1][0].re - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_large_spectral_parameter() {
        assert!(jost_scattering(&heat_slice(1.0), 6.0).is_err());
    }
}
