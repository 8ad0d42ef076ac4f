//! Fields sampled in similarity coordinates.
//!
//! Rows sit at angles `θ` with `t = T(1 − cos θ)/2`, and each row samples the
//! fields at `x = ℓ(t)·ξ` on a uniform `ξ` grid, where
//! `ℓ(t) = √(t(T − t)/T)`. In these variables the rescaled noise
//! `U(θ, ξ) = ℓ·w(t, ℓξ)` is smooth up to both endpoints `θ = 0, π`, so rows
//! can be interpolated and integrated in `θ` with spectral accuracy.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::fredholm::{field_grid, FieldOptions, FredholmSolver};
use crate::kernels::T_MIN_FRACTION;
use crate::quad::gauss_legendre;

/// `(q, p, w)` along one similarity row.
type RowFields = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Layout of a [`SimilarityField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityGrid {
    /// Number of Gauss–Legendre rows in `θ`.
    pub n_theta: usize,
    /// Largest sampled `ξ`.
    pub xi_max: f64,
    /// Spacing of the `ξ` grid.
    pub xi_step: f64,
}

impl Default for SimilarityGrid {
    fn default() -> Self {
        Self {
            n_theta: 24,
            xi_max: 12.0,
            xi_step: 0.125,
        }
    }
}

/// `q, p, w` on a similarity grid; rows hold `ξ ≥ 0` and the fields are even
/// in `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityField {
    pub horizon: f64,
    pub gamma: f64,
    pub thetas: Vec<f64>,
    pub ts: Vec<f64>,
    pub xi_step: f64,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    theta_lo: f64,
    weights: Vec<f64>,
    bary: Vec<f64>,
    scaled_w: Vec<Vec<f64>>,
}

/// Similarity length `ℓ(t) = √(t(T − t)/T)`.
pub fn similarity_length(horizon: f64, t: f64) -> f64 {
    (t * (horizon - t) / horizon).max(0.0).sqrt()
}

/// Time at angle `θ`.
pub fn time_of_angle(horizon: f64, theta: f64) -> f64 {
    0.5 * horizon * (1.0 - theta.cos())
}

/// Angle of time `t`.
pub fn angle_of_time(horizon: f64, t: f64) -> f64 {
    (1.0 - 2.0 * t / horizon).clamp(-1.0, 1.0).acos()
}

impl SimilarityField {
    /// Sample the Fredholm fields on `grid`. Rows cover
    /// `t ∈ [t_min, T − t_min]`, `t_min = 10⁻³·T`; the solver must reach
    /// `x = ℓ(T/2)·ξ_max`.
    pub fn compute(solver: &FredholmSolver, grid: SimilarityGrid) -> Result<Self> {
        let spec = solver.spec();
        let big_t = spec.horizon;
        if grid.n_theta < 4 || !(grid.xi_step > 0.0) || !(grid.xi_max > grid.xi_step) {
            return Err(domain(format!("degenerate similarity grid {grid:?}")));
        }
        let n_xi = (grid.xi_max / grid.xi_step).round() as usize + 1;
        let x_far = similarity_length(big_t, 0.5 * big_t) * grid.xi_step * (n_xi - 1) as f64;
        if x_far > solver.x_max() * (1.0 + 1e-12) {
            return Err(domain(format!(
                "similarity grid reaches x = {x_far}, beyond the solver range {}",
                solver.x_max()
            )));
        }
        let theta_lo = angle_of_time(big_t, T_MIN_FRACTION * big_t);
        let half = 0.5 * (PI - 2.0 * theta_lo);
        let rule = gauss_legendre(grid.n_theta);
        let thetas: Vec<f64> = rule.nodes.iter().map(|&u| 0.5 * PI + half * u).collect();
        let weights: Vec<f64> = rule.weights.iter().map(|&w| half * w).collect();
        let ts: Vec<f64> = thetas.iter().map(|&th| time_of_angle(big_t, th)).collect();
        let rows: Vec<Result<RowFields>> = ts
            .par_iter()
            .map(|&t| {
                let ell = similarity_length(big_t, t);
                let xs: Vec<f64> = (0..n_xi).map(|k| ell * grid.xi_step * k as f64).collect();
                let g = field_grid(solver, &[t], &xs, FieldOptions::default())?;
                Ok((g.q[0].clone(), g.p[0].clone(), g.w[0].clone()))
            })
            .collect();
        let mut q = Vec::with_capacity(ts.len());
        let mut p = Vec::with_capacity(ts.len());
        let mut w = Vec::with_capacity(ts.len());
        for row in rows {
            let (qr, pr, wr) = row?;
            q.push(qr);
            p.push(pr);
            w.push(wr);
        }
        Ok(Self::assemble(
            big_t,
            spec.gamma,
            thetas,
            weights,
            theta_lo,
            grid.xi_step,
            q,
            p,
            w,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        horizon: f64,
        gamma: f64,
        thetas: Vec<f64>,
        weights: Vec<f64>,
        theta_lo: f64,
        xi_step: f64,
        q: Vec<Vec<f64>>,
        p: Vec<Vec<f64>>,
        w: Vec<Vec<f64>>,
    ) -> Self {
        let ts: Vec<f64> = thetas.iter().map(|&th| time_of_angle(horizon, th)).collect();
        let scaled_w = ts
            .iter()
            .zip(&w)
            .map(|(&t, row)| {
                let ell = similarity_length(horizon, t);
                row.iter().map(|v| ell * v).collect()
            })
            .collect();
        let bary = barycentric_weights(&thetas);
        Self {
            horizon,
            gamma,
            thetas,
            ts,
            xi_step,
            q,
            p,
            w,
            theta_lo,
            weights,
            bary,
            scaled_w,
        }
    }

    /// Number of `ξ` nodes per row (`ξ ≥ 0`).
    pub fn n_xi(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    /// Largest sampled `ξ`.
    pub fn xi_max(&self) -> f64 {
        self.xi_step * (self.n_xi().max(1) - 1) as f64
    }

    /// Spatial nodes `x = ℓ(tᵢ)ξ` of row `i`.
    pub fn row_xs(&self, i: usize) -> Vec<f64> {
        let ell = similarity_length(self.horizon, self.ts[i]);
        (0..self.n_xi()).map(|k| ell * self.xi_step * k as f64).collect()
    }

    /// Coefficients `cᵢ(θ)` with `f(θ) ≈ Σ cᵢ f(θᵢ)`: the global barycentric
    /// interpolant inside the row span, cubic extrapolation from the four
    /// outermost rows beyond it.
    fn row_coefficients(&self, theta: f64) -> Vec<f64> {
        let n = self.thetas.len();
        let mut c = vec![0.0; n];
        if theta < self.thetas[0] || theta > self.thetas[n - 1] {
            let idx: Vec<usize> = if theta < self.thetas[0] {
                (0..4).collect()
            } else {
                (n - 4..n).collect()
            };
            for &i in &idx {
                let mut l = 1.0;
                for &k in &idx {
                    if k != i {
                        l *= (theta - self.thetas[k]) / (self.thetas[i] - self.thetas[k]);
                    }
                }
                c[i] = l;
            }
            return c;
        }
        if let Some(i) = self.thetas.iter().position(|&th| th == theta) {
            c[i] = 1.0;
            return c;
        }
        let mut den = 0.0;
        for ((ci, b), th) in c.iter_mut().zip(&self.bary).zip(&self.thetas) {
            *ci = b / (theta - th);
            den += *ci;
        }
        for v in &mut c {
            *v /= den;
        }
        c
    }

    /// Rescaled noise `U(θ(t), ξₖ) = ℓ(t)·w(t, ℓ(t)ξₖ)` at time `t ∈ [0, T]`.
    pub fn noise_profile(&self, t: f64) -> NoiseProfile {
        let theta = angle_of_time(self.horizon, t);
        let c = self.row_coefficients(theta);
        let mut u = vec![0.0; self.n_xi()];
        for (ci, row) in c.iter().zip(&self.scaled_w) {
            if *ci != 0.0 {
                for (acc, v) in u.iter_mut().zip(row) {
                    *acc += ci * v;
                }
            }
        }
        NoiseProfile {
            ell: similarity_length(self.horizon, t),
            xi_step: self.xi_step,
            u,
        }
    }

    /// `w(t, x)` from the interpolated profile.
    pub fn w_at(&self, t: f64, x: f64) -> f64 {
        self.noise_profile(t).eval(x)
    }

    /// `½ ∫₀^T ∫_ℝ w² dx dt = (√T/2) ∫₀^π ∫ U² dξ dθ`: Gauss–Legendre over
    /// the rows, the end caps `[0, θ_min]`, `[π − θ_min, π]` by integrating
    /// the cubic extrapolant.
    pub fn action(&self) -> f64 {
        if self.gamma == 0.0 {
            return 0.0;
        }
        let g: Vec<f64> = self
            .scaled_w
            .iter()
            .map(|row| {
                let sq: Vec<f64> = row.iter().map(|v| v * v).collect();
                even_line_trapezoid(&sq, self.xi_step)
            })
            .collect();
        let bulk: f64 = g.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        let cap_rule = gauss_legendre(8);
        let mut caps = 0.0;
        for (a, b) in [(0.0, self.theta_lo), (PI - self.theta_lo, PI)] {
            let half = 0.5 * (b - a);
            caps += cap_rule.integrate(|u| {
                let c = self.row_coefficients(0.5 * (a + b) + half * u);
                half * c.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>()
            });
        }
        0.5 * self.horizon.sqrt() * (bulk + caps)
    }
}

/// Rescaled noise at one time on the uniform `ξ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    pub ell: f64,
    pub xi_step: f64,
    /// `U(ξₖ)` for `ξₖ = k·xi_step ≥ 0`.
    pub u: Vec<f64>,
}

impl NoiseProfile {
    /// `w(x) = U(|x|/ℓ)/ℓ` by four-point Lagrange interpolation in `ξ`, zero
    /// beyond the sampled range.
    pub fn eval(&self, x: f64) -> f64 {
        if self.ell <= 0.0 {
            return 0.0;
        }
        let xi = x.abs() / self.ell;
        let pos = xi / self.xi_step;
        let n = self.u.len() as i64;
        let k = pos.floor() as i64;
        if k >= n - 1 {
            return 0.0;
        }
        let f = pos - k as f64;
        let at = |j: i64| -> f64 {
            let j = j.abs();
            if j < n {
                self.u[j as usize]
            } else {
                0.0
            }
        };
        let (a, b, c, d) = (at(k - 1), at(k), at(k + 1), at(k + 2));
        let v = -f * (f - 1.0) * (f - 2.0) / 6.0 * a + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * b
            - (f + 1.0) * f * (f - 2.0) / 2.0 * c
            + (f + 1.0) * f * (f - 1.0) / 6.0 * d;
        v / self.ell
    }
}

/// `∫_ℝ f dξ` by the trapezoid rule for an even function sampled at
/// `ξ = 0, h, 2h, …`.
pub fn even_line_trapezoid(f: &[f64], h: f64) -> f64 {
    match f.split_first() {
        Some((f0, rest)) => h * (f0 + 2.0 * rest.iter().sum::<f64>()),
        None => 0.0,
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let span = (nodes[n - 1] - nodes[0]).abs().max(f64::MIN_POSITIVE);
    let scale = 4.0 / span;
    (0..n)
        .map(|i| {
            let mut prod = 1.0;
            for k in 0..n {
                if k != i {
                    prod *= scale * (nodes[i] - nodes[k]);
                }
            }
            1.0 / prod
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn synthetic(
    horizon: f64,
    gamma: f64,
    grid: SimilarityGrid,
    f: impl Fn(f64, f64) -> (f64, f64),
) -> SimilarityField {
    let theta_lo = angle_of_time(horizon, T_MIN_FRACTION * horizon);
    let half = 0.5 * (PI - 2.0 * theta_lo);
    let rule = gauss_legendre(grid.n_theta);
    let thetas: Vec<f64> = rule.nodes.iter().map(|&u| 0.5 * PI + half * u).collect();
    let weights: Vec<f64> = rule.weights.iter().map(|&w| half * w).collect();
    let n_xi = (grid.xi_max / grid.xi_step).round() as usize + 1;
    let (mut q, mut p, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for &th in &thetas {
        let t = time_of_angle(horizon, th);
        let ell = similarity_length(horizon, t);
        let vals: Vec<(f64, f64)> = (0..n_xi).map(|k| f(t, ell * grid.xi_step * k as f64)).collect();
        q.push(vals.iter().map(|v| v.0).collect::<Vec<_>>());
        p.push(vals.iter().map(|v| v.1).collect::<Vec<_>>());
        w.push(vals.iter().map(|v| v.0 * v.1).collect::<Vec<_>>());
    }
    SimilarityField::assemble(horizon, gamma, thetas, weights, theta_lo, grid.xi_step, q, p, w)
}
