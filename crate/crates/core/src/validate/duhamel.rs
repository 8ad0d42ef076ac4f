//! Split-step solvers for `∂ₜq = ½∂ₓₓq + wq` forward from the delta at
//! `t = 0` and for `−∂ₜp = ½∂ₓₓp + wp` backward from `γδ₀` at `t = T`.
//!
//! The bulk `[t₀, T − t₀]` is advanced by Strang splitting: exact heat
//! half-steps through the Fourier multiplier on a periodic domain of length
//! `4L`, and pointwise multiplication by `e^{wΔt}` in between. Time steps
//! shrink geometrically towards both ends. The layers `[0, t₀]` and
//! `[T − t₀, T]` are closed with the first-order Feynman–Kac factor of the
//! noise: a Brownian bridge average next to the delta and a heat-smoothed
//! time integral at the free end.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{domain, invariant, Result};
use crate::quad::gauss_legendre;
use crate::rate::SolutionSpec;
use crate::specfun::heat_kernel;
use crate::validate::field::SimilarityField;

/// A noise field `w(t, x)` on `[0, T] × ℝ`.
pub trait NoiseField: Sync {
    /// Horizon `T`.
    fn horizon(&self) -> f64;

    /// Fill `out[j] = w(t, xs[j])`.
    fn sample(&self, t: f64, xs: &[f64], out: &mut [f64]);
}

impl NoiseField for SimilarityField {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn sample(&self, t: f64, xs: &[f64], out: &mut [f64]) {
        let prof = self.noise_profile(t);
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = prof.eval(x);
        }
    }
}

/// Noise given by a closure `(t, x) ↦ w`.
#[derive(Debug, Clone, Copy)]
pub struct FnNoise<F> {
    pub horizon: f64,
    pub f: F,
}

impl<F: Fn(f64, f64) -> f64 + Sync> NoiseField for FnNoise<F> {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn sample(&self, t: f64, xs: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = (self.f)(t, x);
        }
    }
}

/// Another noise multiplied by a constant factor.
#[derive(Debug, Clone, Copy)]
pub struct ScaledNoise<'a, N: ?Sized> {
    pub inner: &'a N,
    pub factor: f64,
}

impl<N: NoiseField + ?Sized> NoiseField for ScaledNoise<'_, N> {
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn sample(&self, t: f64, xs: &[f64], out: &mut [f64]) {
        self.inner.sample(t, xs, out);
        for v in out.iter_mut() {
            *v *= self.factor;
        }
    }
}

/// Discretization of the split-step solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuhamelConfig {
    /// Width of the end layers next to the deltas.
    pub t0: f64,
    /// Number of spatial nodes on the periodic domain `[−2L, 2L)`.
    pub nx: usize,
    /// Half-width `L` of the physical domain.
    pub x_domain: f64,
    /// Number of steps of the largest size `T/nt`; the geometric grading
    /// towards the ends uses ratio `1 + 10/nt`.
    pub nt: usize,
}

impl DuhamelConfig {
    /// Default discretization for a solution: `t₀ = 10⁻³·T`,
    /// `L = 8√T + κT`, spacing at most `√t₀/6`, `nt = 2000`.
    pub fn for_spec(spec: &SolutionSpec) -> Self {
        let big_t = spec.horizon;
        let t0 = 1e-3 * big_t;
        let x_domain = 8.0 * big_t.sqrt() + spec.kappa * big_t;
        let nx = ((4.0 * x_domain) / (t0.sqrt() / 6.0)).ceil() as usize;
        Self {
            t0,
            nx: nx.next_power_of_two(),
            x_domain,
            nt: 2000,
        }
    }

    /// Twice the spatial and temporal resolution.
    pub fn refined(self) -> Self {
        Self {
            nx: 2 * self.nx,
            nt: 2 * self.nt,
            ..self
        }
    }

    /// Grid spacing.
    pub fn dx(&self) -> f64 {
        4.0 * self.x_domain / self.nx as f64
    }

    fn check(&self, horizon: f64) -> Result<()> {
        if !(self.t0 >= 1e-4 * horizon * (1.0 - 1e-12) && self.t0 < 0.25 * horizon) {
            return Err(domain(format!("t₀ = {} outside [10⁻⁴T, T/4)", self.t0)));
        }
        if !(self.x_domain >= 8.0 * horizon.sqrt()) {
            return Err(domain(format!("L = {} below 8√T", self.x_domain)));
        }
        if self.dx() > self.t0.sqrt() / 4.0 {
            return Err(domain(format!(
                "spacing {} does not resolve hk(t₀) of width {}",
                self.dx(),
                self.t0.sqrt()
            )));
        }
        if self.nt < 10 || !self.nx.is_multiple_of(2) {
            return Err(domain(format!("need nt ≥ 10 and even nx, got {self:?}")));
        }
        Ok(())
    }
}

/// Result of a split-step run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuhamelRun {
    /// Nodes of the periodic grid, `x = −2L + j·dx`.
    pub xs: Vec<f64>,
    /// Field at the far end (`q(T,·)` forward, `p(0,·)` backward).
    pub values: Vec<f64>,
    /// Requested interior snapshots `(t, field)`.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// Smallest field value relative to the running maximum.
    pub min_ratio: f64,
    /// Number of bulk steps taken.
    pub steps: usize,
}

impl DuhamelRun {
    /// Index of the node `x = 0`.
    pub fn center(&self) -> usize {
        self.xs.len() / 2
    }

    /// Value of `field` at `x` by four-point Lagrange interpolation.
    pub fn interpolate(&self, field: &[f64], x: f64) -> f64 {
        let dx = self.xs[1] - self.xs[0];
        let pos = (x - self.xs[0]) / dx;
        let k = (pos.floor() as usize).clamp(1, self.xs.len() - 3);
        let f = pos - k as f64;
        let (a, b, c, d) = (field[k - 1], field[k], field[k + 1], field[k + 2]);
        -f * (f - 1.0) * (f - 2.0) / 6.0 * a + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * b
            - (f + 1.0) * f * (f - 2.0) / 2.0 * c
            + (f + 1.0) * f * (f - 1.0) / 6.0 * d
    }

    /// Snapshot at time `t`, if one was requested.
    pub fn snapshot(&self, t: f64) -> Option<&[f64]> {
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * (1.0 + t))
            .map(|(_, v)| v.as_slice())
    }
}

/// Direction of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// `q(T, ·)` for `∂ₜq = ½∂ₓₓq + wq`, `q(0) = δ₀`, with snapshots at the
/// requested times in `[t₀, T − t₀]`.
pub fn forward_duhamel<N: NoiseField + ?Sized>(
    noise: &N,
    config: DuhamelConfig,
    snapshot_times: &[f64],
) -> Result<DuhamelRun> {
    run(noise, config, 1.0, snapshot_times, Direction::Forward)
}

/// `p(0, ·)` for `−∂ₜp = ½∂ₓₓp + wp`, `p(T) = γδ₀`, with snapshots at the
/// requested times in `[t₀, T − t₀]`.
pub fn backward_duhamel<N: NoiseField + ?Sized>(
    noise: &N,
    gamma: f64,
    config: DuhamelConfig,
    snapshot_times: &[f64],
) -> Result<DuhamelRun> {
    run(noise, config, gamma, snapshot_times, Direction::Backward)
}

fn run<N: NoiseField + ?Sized>(
    noise: &N,
    config: DuhamelConfig,
    weight: f64,
    snapshot_times: &[f64],
    dir: Direction,
) -> Result<DuhamelRun> {
    let big_t = noise.horizon();
    config.check(big_t)?;
    let t0 = config.t0;
    let phys = |s: f64| match dir {
        Direction::Forward => s,
        Direction::Backward => big_t - s,
    };
    let mut stops: Vec<f64> = Vec::with_capacity(snapshot_times.len());
    for &t in snapshot_times {
        let s = phys(t);
        if !(s >= t0 * (1.0 - 1e-12) && s <= (big_t - t0) * (1.0 + 1e-12)) {
            return Err(domain(format!("snapshot time {t} outside [t₀, T − t₀]")));
        }
        stops.push(s.clamp(t0, big_t - t0));
    }
    stops.sort_by(f64::total_cmp);

    let nx = config.nx;
    let dx = config.dx();
    let xs: Vec<f64> = (0..nx).map(|j| -2.0 * config.x_domain + j as f64 * dx).collect();
    let sampler = |s: f64, out: &mut [f64]| noise.sample(phys(s), &xs, out);

    let layer = bridge_layer(
        &|s, ys: &[f64], out: &mut [f64]| noise.sample(phys(s), ys, out),
        t0,
        &xs,
    );
    let mut field: Vec<f64> = xs
        .iter()
        .zip(&layer)
        .map(|(&x, &c)| weight * heat_kernel(t0, x) * c.exp())
        .collect();

    let heat = SpectralHeat::new(nx, 4.0 * config.x_domain);
    let dt_max = big_t / config.nt as f64;
    let ratio = 10.0 / config.nt as f64;
    let s_end = big_t - t0;
    let mut s = t0;
    let mut steps = 0usize;
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut next_stop = 0usize;
    let mut w = vec![0.0; nx];
    let mut running_max = field.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut min_ratio = 0.0f64;
    while next_stop < stops.len() && stops[next_stop] <= s {
        snapshots.push((phys(stops[next_stop]), field.clone()));
        next_stop += 1;
    }
    while s < s_end {
        let d = s.min(big_t - s);
        let mut ds = (ratio * d).min(dt_max);
        let target = if next_stop < stops.len() {
            stops[next_stop].min(s_end)
        } else {
            s_end
        };
        if s + ds >= target || target - (s + ds) < 1e-3 * ds {
            ds = target - s;
        }
        heat.apply(&mut field, 0.5 * ds);
        sampler(s + 0.5 * ds, &mut w);
        for (f, wv) in field.iter_mut().zip(&w) {
            *f *= (wv * ds).exp();
        }
        heat.apply(&mut field, 0.5 * ds);
        s = if ds == target - s { target } else { s + ds };
        steps += 1;
        let mx = field.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        running_max = running_max.max(mx);
        let mn = field.iter().cloned().fold(f64::INFINITY, f64::min);
        if running_max > 0.0 {
            min_ratio = min_ratio.min(weight.signum() * mn / running_max);
        }
        if !field.iter().all(|v| v.is_finite()) {
            return Err(invariant(format!("split-step run lost finiteness at s = {s}")));
        }
        while next_stop < stops.len() && stops[next_stop] <= s {
            snapshots.push((phys(stops[next_stop]), field.clone()));
            next_stop += 1;
        }
    }
    if min_ratio < -1e-10 {
        return Err(invariant(format!(
            "split-step field lost positivity: min/max = {min_ratio:e}"
        )));
    }

    heat.apply(&mut field, t0);
    let tail = free_end_layer(
        &|s, ys: &[f64], out: &mut [f64]| noise.sample(phys(s), ys, out),
        big_t,
        t0,
        &xs,
    );
    for (f, c) in field.iter_mut().zip(&tail) {
        *f *= c.exp();
    }
    Ok(DuhamelRun {
        xs,
        values: field,
        snapshots,
        min_ratio,
        steps,
    })
}

type Sampler<'a> = dyn Fn(f64, &[f64], &mut [f64]) + 'a;

/// `∫₀^{t₀} E[w(s, Bₛ)] ds` for the Brownian bridge from `(0, 0)` to
/// `(t₀, x)`; `Bₛ ~ N(xs/t₀, s(t₀ − s)/t₀)`.
fn bridge_layer(sample: &Sampler<'_>, t0: f64, xs: &[f64]) -> Vec<f64> {
    let reach = 10.0 * t0.sqrt();
    let u_rule = gauss_legendre(16);
    let y_rule = gauss_legendre(24);
    let mut out = vec![0.0; xs.len()];
    let active: Vec<usize> = (0..xs.len()).filter(|&j| xs[j].abs() <= reach).collect();
    let mut ys = vec![0.0; y_rule.len()];
    let mut wy = vec![0.0; y_rule.len()];
    for (&u, &wu) in u_rule.nodes.iter().zip(&u_rule.weights) {
        let uu = 0.5 * (u + 1.0);
        let s = t0 * uu * uu;
        let jac = 0.5 * wu * 2.0 * t0 * uu;
        let sigma = (s * (t0 - s) / t0).max(0.0).sqrt();
        for &j in &active {
            let m = xs[j] * s / t0;
            if sigma == 0.0 {
                sample(s, &[m], &mut wy[..1]);
                out[j] += jac * wy[0];
                continue;
            }
            let half = 8.0 * sigma;
            for (y, &v) in ys.iter_mut().zip(&y_rule.nodes) {
                *y = m + half * v;
            }
            sample(s, &ys, &mut wy);
            let mut acc = 0.0;
            for ((&v, &wv), &wn) in y_rule.nodes.iter().zip(&y_rule.weights).zip(&wy) {
                let z = half * v / sigma;
                acc += wv * half * (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma) * wn;
            }
            out[j] += jac * acc;
        }
    }
    out
}

/// `∫₀^{t₀} (hk(r) ∗ w(T − r, ·))(x) dr`.
fn free_end_layer(sample: &Sampler<'_>, big_t: f64, t0: f64, xs: &[f64]) -> Vec<f64> {
    let reach = 40.0 * t0.sqrt();
    let u_rule = gauss_legendre(16);
    let y_rule = gauss_legendre(32);
    let mut out = vec![0.0; xs.len()];
    let active: Vec<usize> = (0..xs.len()).filter(|&j| xs[j].abs() <= reach).collect();
    let mut ys = vec![0.0; y_rule.len()];
    let mut wy = vec![0.0; y_rule.len()];
    for (&u, &wu) in u_rule.nodes.iter().zip(&u_rule.weights) {
        let uu = 0.5 * (u + 1.0);
        let r = t0 * uu * uu;
        let jac = 0.5 * wu * 2.0 * t0 * uu;
        let sd = r.sqrt();
        for &j in &active {
            let half = 8.0 * sd;
            for (y, &v) in ys.iter_mut().zip(&y_rule.nodes) {
                *y = xs[j] + half * v;
            }
            sample(big_t - r, &ys, &mut wy);
            let mut acc = 0.0;
            for ((&v, &wv), &wn) in y_rule.nodes.iter().zip(&y_rule.weights).zip(&wy) {
                acc += wv * half * heat_kernel(r, half * v) * wn;
            }
            out[j] += jac * acc;
        }
    }
    out
}

/// Exact heat flow on a periodic grid through the Fourier multiplier
/// `e^{−k²τ/2}`.
struct SpectralHeat {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl SpectralHeat {
    fn new(n: usize, period: f64) -> Self {
        let mut planner = FftPlanner::new();
        let k2 = (0..n)
            .map(|m| {
                let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                let k = 2.0 * PI * m / period;
                k * k
            })
            .collect();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            k2,
        }
    }

    fn apply(&self, field: &mut [f64], tau: f64) {
        let n = field.len();
        let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let norm = 1.0 / n as f64;
        for (b, &k2) in buf.iter_mut().zip(&self.k2) {
            *b *= (-0.5 * k2 * tau).exp() * norm;
        }
        self.inverse.process(&mut buf);
        for (f, b) in field.iter_mut().zip(&buf) {
            *f = b.re;
        }
    }
}
