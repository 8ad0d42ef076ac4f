//! Special functions: half-integer polylogarithms on `(-inf, 1]`, the
//! truncated heat kernel, `sech`, and overflow-checked complex exponentials.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::quad::{gauss_legendre, Rule};

/// Largest real part accepted by [`exp_checked`].
pub const EXP_LIMIT: f64 = 700.0;

/// Order of the polylogarithm. Only the two half-integer orders that enter the
/// rate function are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolylogOrder {
    /// `s = 3/2`
    ThreeHalves,
    /// `s = 5/2`
    FiveHalves,
}

impl PolylogOrder {
    /// The order `s` as a float.
    pub fn s(self) -> f64 {
        match self {
            PolylogOrder::ThreeHalves => 1.5,
            PolylogOrder::FiveHalves => 2.5,
        }
    }

    /// `Γ(s)`.
    pub fn gamma(self) -> f64 {
        match self {
            PolylogOrder::ThreeHalves => 0.5 * PI.sqrt(),
            PolylogOrder::FiveHalves => 0.75 * PI.sqrt(),
        }
    }
}

/// Arguments of the heat kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelArgs {
    pub t: f64,
    pub x: f64,
}

impl HeatKernelArgs {
    /// Evaluate the kernel at these arguments.
    pub fn eval(self) -> f64 {
        heat_kernel(self.t, self.x)
    }
}

/// `Li_s(z)` for `z ≤ 1`, accurate to better than `1e-10` absolute.
///
/// Uses the power series for `|z| ≤ 1/2` and the Bose–Einstein integral
/// `Li_s(z) = z/Γ(s) ∫_0^∞ u^{s-1} / (e^u - z) du` elsewhere.
pub fn polylog(order: PolylogOrder, z: f64) -> Result<f64> {
    if !z.is_finite() || z > 1.0 {
        return Err(domain(format!("polylog argument {z} must be finite and at most 1")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.abs() <= 0.5 {
        Ok(polylog_series(order.s(), z))
    } else {
        Ok(polylog_integral(order, z))
    }
}

/// `Li'_{5/2}(z) = Li_{3/2}(z)/z`, equal to 1 at `z = 0`.
pub fn polylog_prime_52(z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(1.0);
    }
    if z.abs() <= 0.5 {
        if !z.is_finite() {
            return Err(domain("polylog argument must be finite"));
        }
        // Σ z^{k-1}/k^{3/2}, avoiding the division by a tiny z.
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 1..200 {
            let term = pow / (k as f64).powf(1.5);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
            pow *= z;
        }
        return Ok(sum);
    }
    Ok(polylog(PolylogOrder::ThreeHalves, z)? / z)
}

/// Power series `Σ_{k≥1} z^k / k^s`, used for `|z| ≤ 1/2` (and exposed for
/// cross-checks on `|z| < 1`).
pub fn polylog_series(s: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = z;
    for k in 1..100_000 {
        let term = pow / (k as f64).powf(s);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) || term == 0.0 {
            break;
        }
        pow *= z;
    }
    sum
}

fn panel_rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Bose–Einstein integral after the substitution `u = v²`, which removes the
/// `u^{s-1}` endpoint behaviour: `Li_s(z) = 2z/Γ(s) ∫_0^∞ v^{2s-1} / (e^{v²} - z) dv`.
///
/// Panels are graded towards `v = √(1-z)` (the scale of the near-pole as
/// `z → 1`) and shrink around `v² = log|z|` (the Fermi edge for very negative `z`).
pub fn polylog_integral(order: PolylogOrder, z: f64) -> f64 {
    let gap = 1.0 - z;
    let edge = if z < -1.0 { (-z).ln() } else { 0.0 };
    let v_max = (edge + 46.0).sqrt();
    let mut edges = vec![0.0];
    if gap < 0.25 {
        let mut v = gap.sqrt().max(1e-9);
        while v < 0.5 {
            edges.push(v);
            v *= 3.0;
        }
    }
    let width = if edge > 1.0 { (0.7 / edge.sqrt()).min(0.5) } else { 0.5 };
    let mut v = *edges.last().unwrap_or(&0.0);
    while v < v_max {
        // Wide panels away from the Fermi edge, narrow ones across it.
        let near_edge = edge > 1.0 && (v * v - edge).abs() < 12.0 * edge.sqrt().max(1.0);
        let w = if near_edge { width } else { 0.5 };
        v = (v + w).min(v_max);
        edges.push(v);
    }
    let p = 2.0 * order.s() - 1.0;
    let rule = panel_rule();
    let mut acc = 0.0;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut part = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v = mid + half * x;
            let v2 = v * v;
            let den = v2.exp_m1() + gap;
            part += w * v.powf(p) / den;
        }
        acc += half * part;
    }
    2.0 * z * acc / order.gamma()
}

/// Heat kernel `exp(-x²/2t)/√(2πt)` for `t > 0`, and exactly 0 for `t ≤ 0`.
pub fn heat_kernel(t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Hyperbolic secant, stable for large arguments.
pub fn sech(x: f64) -> f64 {
    let a = x.abs();
    if a > 350.0 {
        return 2.0 * (-a).exp();
    }
    1.0 / a.cosh()
}

/// `exp(z)` for a complex exponent whose real part must not exceed [`EXP_LIMIT`].
pub fn exp_checked(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Numerical(format!("non-finite exponent {z}")));
    }
    if z.re > EXP_LIMIT {
        return Err(Error::Overflow {
            exponent: z.re,
            limit: EXP_LIMIT,
        });
    }
    Ok(z.exp())
}

/// `log(1 - γ e^{-a})` for real `a ≥ 0` and `γ ≤ 1`, without cancellation when
/// `γ e^{-a}` is close to 0 or to 1.
pub fn log_one_minus_gamma_exp(gamma: f64, a: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    if gamma > 0.0 {
        let e = gamma.ln() - a;
        if e > -0.7 {
            // 1 - γe^{-a} = -expm1(log γ - a)
            return (-e.exp_m1()).ln();
        }
        return (-e.exp()).ln_1p();
    }
    (-gamma * (-a).exp()).ln_1p()
}
