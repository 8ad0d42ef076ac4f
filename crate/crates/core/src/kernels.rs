//! Convolution kernels `ρ(s;t,x)` and `ρ̃(s;t,x)`: Fourier transforms of the
//! dressed reflection coefficients along `ℝ ± iv₀`.
//!
//! Two evaluation paths are provided. [`ContourQuad`] integrates the contour
//! directly for individual points. [`KernelFactory`] produces per-time
//! [`KernelSection`]s: the contour integral is discretized by the trapezoid
//! rule in `Re λ`, evaluated on a uniform `s` lattice with one FFT, and read
//! back by barycentric interpolation. Both paths agree to near machine
//! precision relative to the kernel peak.

use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{domain, invariant, Error, Result};
use crate::quad::{composite, equispaced_interp, equispaced_interp2, gauss_legendre, Rule};
use crate::rate::{Branch, ScaledProblem, SolutionSpec};
use crate::scattering::{dressed_r_exponent, dressed_r_tilde_exponent, PhiEvaluator};
use crate::specfun::{heat_kernel, EXP_LIMIT};

/// Required value of `(Λ² − v₀²)·min(t, T−t)/2` for a contour rule.
pub const TRUNCATION_EXPONENT: f64 = 40.0;

/// Relative kernel magnitude that defines the half-line truncation.
pub const KERNEL_TAIL: f64 = 1e-12;

/// Fraction of `T` below which (and within which of `T`) kernels are refused.
pub const T_MIN_FRACTION: f64 = 1e-3;

fn check_time(spec: &SolutionSpec, t: f64) -> Result<()> {
    let t_min = T_MIN_FRACTION * spec.horizon * (1.0 - 1e-12);
    if !(t >= t_min && t <= spec.horizon - t_min) {
        return Err(domain(format!(
            "kernel time {t} outside [{t_min}, {}]",
            spec.horizon - t_min
        )));
    }
    Ok(())
}

/// Truncation `Λ` of the contour for a kernel whose Gaussian factor is
/// `e^{−λ²τ/2}`.
pub fn truncation_for(v0: f64, tau: f64) -> f64 {
    (2.0 * TRUNCATION_EXPONENT / tau + v0 * v0).sqrt()
}

/// Gauss–Legendre rule on `|Re λ| ≤ Λ` for the contours `ℝ ± iv₀`, with `φ`
/// cached at its nodes on the upper contour.
#[derive(Debug, Clone)]
pub struct ContourQuad {
    /// Contour height.
    pub v0: f64,
    /// Truncation `Λ`.
    pub half_width: f64,
    /// Number of nodes.
    pub n_nodes: usize,
    /// Nodes in `Re λ` and weights.
    pub rule: Rule,
    /// Smallest `min(t, T−t)` the rule serves.
    pub tau_min: f64,
    phi_upper: Vec<Complex64>,
}

impl ContourQuad {
    /// Rule serving all times with `min(t, T−t) ≥ tau_min`, using the default
    /// node budget `max(256, 64Λ)`.
    pub fn new(eval: &PhiEvaluator, tau_min: f64) -> Result<Self> {
        let v0 = eval.spec().v0;
        let lam = truncation_for(v0, tau_min);
        let n = ((64.0 * lam).ceil() as usize).max(256);
        Self::with_nodes(eval, tau_min, n)
    }

    /// Rule with (at least) `n` nodes in 32-node Gauss–Legendre panels.
    pub fn with_nodes(eval: &PhiEvaluator, tau_min: f64, n: usize) -> Result<Self> {
        if !(tau_min > 0.0) {
            return Err(domain("contour rule needs a positive time scale"));
        }
        let v0 = eval.spec().v0;
        let lam = truncation_for(v0, tau_min);
        let panels = n.div_ceil(32).max(1);
        let edges: Vec<f64> = (0..=panels)
            .map(|k| -lam + 2.0 * lam * k as f64 / panels as f64)
            .collect();
        let rule = composite(&edges, &gauss_legendre(32));
        let phi_upper = rule
            .nodes
            .iter()
            .map(|&u| eval.eval(Complex64::new(u, v0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            v0,
            half_width: lam,
            n_nodes: rule.len(),
            rule,
            tau_min,
            phi_upper,
        })
    }

    fn serves(&self, spec: &SolutionSpec, t: f64) -> Result<()> {
        let tau = t.min(spec.horizon - t);
        let margin = (self.half_width.powi(2) - self.v0 * self.v0) * tau / 2.0;
        if margin < TRUNCATION_EXPONENT * (1.0 - 1e-9) {
            return Err(Error::Grid(format!(
                "contour truncation Λ = {} too small at t = {t}",
                self.half_width
            )));
        }
        Ok(())
    }
}

/// Blaschke factor `(λ − iκ)/(λ + iκ)` (1 on the non-soliton branch).
fn blaschke(spec: &SolutionSpec, lambda: Complex64) -> Complex64 {
    if spec.branch == Branch::NonSoliton || spec.kappa == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let ik = Complex64::new(0.0, spec.kappa);
    (lambda - ik) / (lambda + ik)
}

fn finish_real(sum: Complex64, scale: f64, what: &str) -> Result<f64> {
    if scale > 0.0 && sum.im.abs() > 1e-8 * scale {
        return Err(invariant(format!(
            "{what} has imaginary residual {:e} against scale {scale:e}",
            sum.im
        )));
    }
    Ok(sum.re)
}

/// `ρ(s;t,x)` by contour quadrature, with the closed form `hk(t, s+x)` at `γ = 0`.
pub fn rho(eval: &PhiEvaluator, quad: &ContourQuad, s: f64, t: f64, x: f64) -> Result<f64> {
    if eval.spec().gamma == 0.0 {
        check_time(eval.spec(), t)?;
        return Ok(heat_kernel(t, s + x));
    }
    rho_contour(eval, quad, s, t, x)
}

/// `ρ(s;t,x)` by contour quadrature for every `γ`.
pub fn rho_contour(eval: &PhiEvaluator, quad: &ContourQuad, s: f64, t: f64, x: f64) -> Result<f64> {
    let spec = eval.spec();
    check_time(spec, t)?;
    quad.serves(spec, t)?;
    let sigma = s + x;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for ((&u, &w), &ph) in quad.rule.nodes.iter().zip(&quad.rule.weights).zip(&quad.phi_upper) {
        let lambda = Complex64::new(u, quad.v0);
        let e = dressed_r_exponent(eval, lambda, t, sigma, ph);
        if e.re > EXP_LIMIT {
            return Err(Error::Overflow {
                exponent: e.re,
                limit: EXP_LIMIT,
            });
        }
        let term = w * e.exp() / blaschke(spec, lambda);
        scale += term.norm();
        sum += term;
    }
    finish_real(sum / (2.0 * PI), scale / (2.0 * PI), "ρ")
}

/// `ρ̃(s;t,x)` by contour quadrature along `ℝ − iv₀`; identically 0 at `γ = 0`.
pub fn rho_tilde(eval: &PhiEvaluator, quad: &ContourQuad, s: f64, t: f64, x: f64) -> Result<f64> {
    let spec = eval.spec();
    check_time(spec, t)?;
    if spec.gamma == 0.0 {
        return Ok(0.0);
    }
    quad.serves(spec, t)?;
    let sign = -spec.gamma.signum();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for ((&u, &w), &ph) in quad.rule.nodes.iter().zip(&quad.rule.weights).zip(&quad.phi_upper) {
        let lambda = Complex64::new(u, -quad.v0);
        // φ(conj λ) = −conj φ(λ)
        let ph_lower = -ph.conj();
        let e = dressed_r_tilde_exponent(eval, lambda, t, x - s, ph_lower);
        if e.re > EXP_LIMIT {
            return Err(Error::Overflow {
                exponent: e.re,
                limit: EXP_LIMIT,
            });
        }
        let term = w * sign * blaschke(spec, lambda) * e.exp();
        scale += term.norm();
        sum += term;
    }
    finish_real(sum / (2.0 * PI), scale / (2.0 * PI), "ρ̃")
}

/// Layout shared by every section a factory produces: the `u` step, the
/// periodic window in `σ` and the range of `σ` the tables must serve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionLayout {
    /// Step `Δu` in `Re λ`; the tables are periodic with period `2π/Δu`.
    pub du: f64,
    /// Left end of the periodic window.
    pub window_lo: f64,
    /// Smallest `σ` callers may request.
    pub sigma_lo: f64,
    /// Largest `σ` callers may request; beyond it kernels read as 0.
    pub sigma_hi: f64,
}

impl SectionLayout {
    /// Layout for kernels read at `σ ∈ [sigma_lo, sigma_hi]`, with margins
    /// sized so that the periodic images of the tables are below `1e-16` of
    /// their peak.
    pub fn new(spec: &SolutionSpec, sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        if !(sigma_hi > sigma_lo) {
            return Err(domain("σ range must be non-empty"));
        }
        let t = spec.horizon;
        let rate = spec.v0 - spec.kappa;
        let window_lo = sigma_lo - 37.0 / rate - 1.0;
        let right = sigma_hi.max(spec.v0 * t + 10.0 * t.sqrt()) + 1.0;
        let period = right - window_lo;
        let du = (2.0 * PI / period).min(0.1);
        Ok(Self {
            du,
            window_lo,
            sigma_lo,
            sigma_hi,
        })
    }

    /// Period of the tables in `σ`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.du
    }
}

/// Cap on the half-line truncation length.
pub fn s_max_cap(spec: &SolutionSpec) -> f64 {
    let t = spec.horizon;
    20.0 * t.sqrt() + 10.0 / spec.kappa.max(1.0 / t.sqrt())
}

/// Producer of per-time kernel sections for one solution, caching `φ` on
/// the `u` lattice shared by all sections.
#[derive(Debug)]
pub struct KernelFactory {
    eval: PhiEvaluator,
    layout: SectionLayout,
    phi_lattice: RwLock<Vec<Complex64>>,
}

impl KernelFactory {
    /// Factory serving `σ ∈ [sigma_lo, sigma_hi]`.
    pub fn new(spec: SolutionSpec, sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        let layout = SectionLayout::new(&spec, sigma_lo, sigma_hi)?;
        Ok(Self {
            eval: PhiEvaluator::new(spec),
            layout,
            phi_lattice: RwLock::new(Vec::new()),
        })
    }

    /// Factory serving half-line solves at `|x| ≤ x_max` with the default cap
    /// on the truncation length.
    pub fn for_fields(spec: SolutionSpec, x_max: f64) -> Result<Self> {
        let cap = s_max_cap(&spec);
        Self::new(spec, -x_max.abs() - 1.0, 2.0 * cap + x_max.abs() + 1.0)
    }

    /// The solution spec.
    pub fn spec(&self) -> &SolutionSpec {
        self.eval.spec()
    }

    /// The `φ` evaluator.
    pub fn phi(&self) -> &PhiEvaluator {
        &self.eval
    }

    /// The shared table layout.
    pub fn layout(&self) -> &SectionLayout {
        &self.layout
    }

    /// `φ(kΔu + iv₀)` for `k = 0..count`.
    fn phi_values(&self, count: usize) -> Result<Vec<Complex64>> {
        {
            let cached = self.phi_lattice.read().expect("φ cache lock");
            if cached.len() >= count {
                return Ok(cached[..count].to_vec());
            }
        }
        let mut cached = self.phi_lattice.write().expect("φ cache lock");
        let v0 = self.spec().v0;
        for k in cached.len()..count {
            let v = self.eval.eval(Complex64::new(k as f64 * self.layout.du, v0))?;
            cached.push(v);
        }
        Ok(cached[..count].to_vec())
    }

    /// Kernel tables at time `t`.
    pub fn section(&self, t: f64) -> Result<KernelSection> {
        let spec = *self.spec();
        check_time(&spec, t)?;
        let lay = self.layout;
        let du = lay.du;
        let lam = truncation_for(spec.v0, t.min(spec.horizon - t));
        let k_max = (lam / du).ceil() as usize;
        let m = (8 * k_max).next_power_of_two().max(64);
        let step = lay.period() / m as f64;
        let origin = lay.window_lo;
        if spec.gamma == 0.0 {
            let rho: Vec<f64> = (0..m).map(|j| heat_kernel(t, origin + j as f64 * step)).collect();
            return Ok(KernelSection {
                t,
                spec,
                origin,
                step,
                sigma_hi: lay.sigma_hi,
                rho: Arc::new(rho),
                rho_tilde_m: Arc::new(vec![0.0; m]),
            });
        }
        let phis = self.phi_values(k_max + 1)?;
        let v0 = spec.v0;
        let mut upper = vec![Complex64::new(0.0, 0.0); m];
        let mut lower = vec![Complex64::new(0.0, 0.0); m];
        let sign = -spec.gamma.signum();
        for k in -(k_max as i64)..=(k_max as i64) {
            let u = k as f64 * du;
            let ph_up = if k >= 0 {
                phis[k as usize]
            } else {
                phis[(-k) as usize].conj()
            };
            let ph_lo = -ph_up.conj();
            let lu = Complex64::new(u, v0);
            let ll = Complex64::new(u, -v0);
            let phase = Complex64::new(0.0, u * origin);
            let eu = dressed_r_exponent(&self.eval, lu, t, 0.0, ph_up) + phase;
            // ρ̃m(σ) = ρ̃(−σ): the transform runs with e^{−iuσ}.
            let el = dressed_r_tilde_exponent(&self.eval, ll, t, 0.0, ph_lo) - phase;
            for e in [eu, el] {
                if e.re > EXP_LIMIT {
                    return Err(Error::Overflow {
                        exponent: e.re,
                        limit: EXP_LIMIT,
                    });
                }
            }
            let idx = k.rem_euclid(m as i64) as usize;
            upper[idx] = eu.exp() / blaschke(&spec, lu);
            lower[idx] = sign * blaschke(&spec, ll) * el.exp();
        }
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_inverse(m).process(&mut upper);
        planner.plan_fft_forward(m).process(&mut lower);
        let norm = du / (2.0 * PI);
        let mut rho = Vec::with_capacity(m);
        let mut rho_tilde_m = Vec::with_capacity(m);
        let (mut peak_r, mut peak_t, mut worst_im_r, mut worst_im_t) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for j in 0..m {
            let sigma = origin + j as f64 * step;
            let damp = (-v0 * sigma).exp();
            let (a, b) = (upper[j] * norm, lower[j] * norm);
            peak_r = peak_r.max(a.re.abs());
            peak_t = peak_t.max(b.re.abs());
            worst_im_r = worst_im_r.max(a.im.abs());
            worst_im_t = worst_im_t.max(b.im.abs());
            rho.push(a.re * damp);
            rho_tilde_m.push(b.re * damp);
        }
        if worst_im_r > 1e-8 * peak_r.max(1e-300) || worst_im_t > 1e-8 * peak_t.max(1e-300) {
            return Err(invariant(format!(
                "kernel tables at t = {t} are not real: residuals {worst_im_r:e}, {worst_im_t:e}"
            )));
        }
        Ok(KernelSection {
            t,
            spec,
            origin,
            step,
            sigma_hi: lay.sigma_hi,
            rho: Arc::new(rho),
            rho_tilde_m: Arc::new(rho_tilde_m),
        })
    }
}

/// Tables of `ρ(σ;t,0)` and `ρ̃m(σ) = ρ̃(−σ;t,0)` on a uniform `σ` lattice at
/// one time `t`.
#[derive(Debug, Clone)]
pub struct KernelSection {
    /// Time of the section.
    pub t: f64,
    spec: SolutionSpec,
    origin: f64,
    step: f64,
    sigma_hi: f64,
    rho: Arc<Vec<f64>>,
    rho_tilde_m: Arc<Vec<f64>>,
}

impl KernelSection {
    /// The solution spec.
    pub fn spec(&self) -> &SolutionSpec {
        &self.spec
    }

    /// Lattice spacing in `σ`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Largest `σ` served; beyond it both kernels read as 0.
    pub fn sigma_hi(&self) -> f64 {
        self.sigma_hi
    }

    /// `ρ(σ;t,0)`.
    pub fn rho(&self, sigma: f64) -> f64 {
        if self.spec.gamma == 0.0 {
            return heat_kernel(self.t, sigma);
        }
        if sigma > self.sigma_hi {
            return 0.0;
        }
        equispaced_interp(&self.rho, self.origin, self.step, sigma).unwrap_or(0.0)
    }

    /// `ρ̃(−σ;t,0)`.
    pub fn rho_tilde_m(&self, sigma: f64) -> f64 {
        if self.spec.gamma == 0.0 || sigma > self.sigma_hi {
            return 0.0;
        }
        equispaced_interp(&self.rho_tilde_m, self.origin, self.step, sigma).unwrap_or(0.0)
    }

    /// `(ρ(σ;t,0), ρ̃(−σ;t,0))` in one interpolation pass.
    pub fn both(&self, sigma: f64) -> (f64, f64) {
        if self.spec.gamma == 0.0 {
            return (heat_kernel(self.t, sigma), 0.0);
        }
        if sigma > self.sigma_hi {
            return (0.0, 0.0);
        }
        equispaced_interp2(&self.rho, &self.rho_tilde_m, self.origin, self.step, sigma).unwrap_or((0.0, 0.0))
    }

    /// `ρ(s;t,x)` through translation covariance.
    pub fn rho_at(&self, s: f64, x: f64) -> f64 {
        self.rho(s + x)
    }

    /// `ρ̃(s;t,x) = ρ̃(s − x;t,0)`.
    pub fn rho_tilde_at(&self, s: f64, x: f64) -> f64 {
        self.rho_tilde_m(x - s)
    }

    /// Smallest `S ≥ 0` beyond which `|ρ(σ)|` and `|ρ̃m(σ)|` stay below
    /// `tail · peak` for `σ ≥ S + x_min`, with peaks taken over `σ ≥ x_min`.
    pub fn decay_length(&self, x_min: f64, tail: f64) -> f64 {
        if self.spec.gamma == 0.0 {
            let t = self.t;
            let reach = (2.0 * t * (1.0 / tail).ln()).sqrt();
            return (reach - x_min).max(0.0);
        }
        let start = (((x_min - self.origin) / self.step).floor().max(0.0)) as usize;
        let end = ((((self.sigma_hi - self.origin) / self.step).ceil()) as usize).min(self.rho.len());
        let mut peak_r = 0.0f64;
        let mut peak_t = 0.0f64;
        for j in start..end {
            peak_r = peak_r.max(self.rho[j].abs());
            peak_t = peak_t.max(self.rho_tilde_m[j].abs());
        }
        let mut last = start;
        for j in start..end {
            if self.rho[j].abs() > tail * peak_r || self.rho_tilde_m[j].abs() > tail * peak_t {
                last = j;
            }
        }
        (self.origin + (last + 1) as f64 * self.step - x_min).max(0.0)
    }
}

/// Large-`N` split of `ρ` for the scaled soliton problem: heat kernel plus
/// the residue picked up at `λ = i√γ̄` when `(s+x)/t < √γ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticKernel {
    /// Main term.
    pub value: f64,
    /// Gaussian part of the main term.
    pub gaussian: f64,
    /// Residue (plateau) part of the main term.
    pub residue: f64,
    /// Size of the neglected Gaussian correction, `hk · 2√γ̄ / max(|σ/t − √γ̄|, 1/√t)`.
    pub envelope: f64,
}

/// `ρ(s;t,x)` for the scaled problem from its large-`N` split.
pub fn rho_asymptotic(scaled: &ScaledProblem, s: f64, t: f64, x: f64) -> Result<AsymptoticKernel> {
    let horizon = 2.0 * scaled.n;
    if !(t > 0.0 && t < horizon) {
        return Err(domain(format!("time {t} outside (0, {horizon})")));
    }
    let kappa = scaled.gamma_bar.sqrt();
    let sigma = s + x;
    let gaussian = heat_kernel(t, sigma);
    let residue = if sigma / t < kappa {
        2.0 * kappa * (0.5 * scaled.gamma_bar * t - kappa * sigma).exp()
    } else {
        0.0
    };
    let envelope = gaussian * 2.0 * kappa / (sigma / t - kappa).abs().max(1.0 / t.sqrt());
    Ok(AsymptoticKernel {
        value: gaussian + residue,
        gaussian,
        residue,
        envelope,
    })
}
