//! Closed-form scattering data: the Cauchy transform `φ(λ)`, the four
//! scattering coefficients, overflow-safe dressed reflection coefficients and
//! the analytic conserved quantities.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::quad::tanh_sinh;
use crate::rate::{psi, psi_prime, Branch, SolutionSpec};
use crate::specfun::{exp_checked, log_one_minus_gamma_exp, polylog, PolylogOrder, EXP_LIMIT};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Integrand magnitude below which the `η` integral is truncated.
const TAIL_LOG: f64 = 41.5;

/// Evaluator of `φ(λ) = ∫_ℝ (dη/2πi) log(1 − γe^{−η²T/2})/(η − λ)`.
///
/// The line is cut into panels at `0`, `Re λ` and the truncation points
/// `±η_max`, each integrated by tanh-sinh. Close to the real axis the value
/// `log(1 − γe^{−u²T/2})` at `u = Re λ` is subtracted on a window around `u`
/// and its contribution restored in closed form.
#[derive(Debug, Clone)]
pub struct PhiEvaluator {
    spec: SolutionSpec,
    /// Tanh-sinh half-count per panel.
    pub nodes_per_panel: usize,
    eta_max: f64,
    window: f64,
}

impl PhiEvaluator {
    /// Evaluator with the default rule (`2·120 + 1` nodes per panel).
    pub fn new(spec: SolutionSpec) -> Self {
        Self::with_nodes(spec, 120)
    }

    /// Evaluator with `2m + 1` tanh-sinh nodes per panel.
    pub fn with_nodes(spec: SolutionSpec, m: usize) -> Self {
        let log_g = if spec.gamma == 0.0 {
            f64::NEG_INFINITY
        } else {
            spec.gamma.abs().ln()
        };
        let reach = log_g + TAIL_LOG;
        let eta_max = if reach > 0.0 {
            (2.0 * reach / spec.horizon).sqrt()
        } else {
            0.0
        };
        let window = 0.5 * (2.0 / spec.horizon).sqrt();
        Self {
            spec,
            nodes_per_panel: m,
            eta_max,
            window,
        }
    }

    /// The solution spec this evaluator serves.
    pub fn spec(&self) -> &SolutionSpec {
        &self.spec
    }

    /// Truncation point of the `η` integral.
    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    fn log_weight(&self, eta: f64) -> f64 {
        log_one_minus_gamma_exp(self.spec.gamma, 0.5 * eta * eta * self.spec.horizon)
    }

    /// `φ(λ)` for `Im λ ≠ 0`.
    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        if !(lambda.im != 0.0 && lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(domain(format!("φ needs a finite λ off the real axis, got {lambda}")));
        }
        if self.spec.gamma == 0.0 || self.eta_max == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if lambda.re < 0.0 {
            // φ(−conj λ) = conj φ(λ)
            let mirrored = Complex64::new(-lambda.re, lambda.im);
            return Ok(self.eval_right(mirrored).conj());
        }
        Ok(self.eval_right(lambda))
    }

    fn eval_right(&self, lambda: Complex64) -> Complex64 {
        let u = lambda.re;
        let em = self.eta_max;
        let subtract = lambda.im.abs() < 0.5 * self.window && u < em && {
            let lu = self.log_weight(u);
            lu.is_finite() && lu.abs() > 1e-300
        };
        let (lo_w, hi_w, lu) = if subtract {
            (u - self.window, u + self.window, self.log_weight(u))
        } else {
            (u, u, 0.0)
        };
        let mut edges = vec![-em, 0.0, em];
        for e in [u, lo_w, hi_w] {
            if e > -em && e < em {
                edges.push(e);
            }
        }
        edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        let mut acc = Complex64::new(0.0, 0.0);
        for pair in edges.windows(2) {
            let rule = tanh_sinh(self.nodes_per_panel, pair[0], pair[1]);
            let inside = subtract && pair[0] >= lo_w - 1e-15 && pair[1] <= hi_w + 1e-15;
            for (&eta, &w) in rule.nodes.iter().zip(&rule.weights) {
                let mut l = self.log_weight(eta);
                if inside {
                    l -= lu;
                }
                acc += w * l / (Complex64::new(eta, 0.0) - lambda);
            }
        }
        if subtract {
            let window_integral = (Complex64::new(hi_w, 0.0) - lambda).ln() - (Complex64::new(lo_w, 0.0) - lambda).ln();
            acc += lu * window_integral;
        }
        acc / (2.0 * PI * I)
    }

    /// `∫ (dη/2πi) η^k log(1 − γe^{−η²T/2})`, evaluated by quadrature.
    pub fn moment(&self, k: u32) -> Complex64 {
        if self.spec.gamma == 0.0 || self.eta_max == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = 0.0;
        for (a, b) in [(-self.eta_max, 0.0), (0.0, self.eta_max)] {
            let rule = tanh_sinh(self.nodes_per_panel, a, b);
            acc += rule.integrate(|eta| eta.powi(k as i32) * self.log_weight(eta));
        }
        Complex64::new(acc, 0.0) / (2.0 * PI * I)
    }

    /// Leading coefficients `(c₁, c₃)` of `log Sa(λ) = c₁/λ + c₃/λ³ + …` as
    /// `|λ| → ∞`, assembled from the `η` moments and the Blaschke factor.
    pub fn log_sa_expansion(&self) -> (Complex64, Complex64) {
        let k = self.spec.kappa;
        let c1 = -self.moment(0) - 2.0 * I * k;
        let c3 = -self.moment(2) + Complex64::new(0.0, 2.0 * k * k * k / 3.0);
        (c1, c3)
    }
}

/// One-shot `φ(λ)` with the default evaluator.
pub fn phi(spec: &SolutionSpec, lambda: Complex64) -> Result<Complex64> {
    PhiEvaluator::new(*spec).eval(lambda)
}

/// The four scattering coefficients at time `t`, with the off-diagonal
/// entries dressed by `e^{∓λ²t/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoeffs {
    pub a: Complex64,
    pub a_tilde: Complex64,
    /// `b(λ) e^{−λ²t/2}`, with `b ≡ 1`.
    pub b_dressed: Complex64,
    /// `b̃(λ) e^{λ²t/2}`, with `b̃ = −γe^{−λ²T/2}`.
    pub b_tilde_dressed: Complex64,
    /// Undressed `b`.
    pub b: Complex64,
    /// Undressed `b̃`.
    pub b_tilde: Complex64,
}

impl ScatteringCoeffs {
    /// `a·ã − b·b̃`, identically 1.
    pub fn determinant(&self) -> Complex64 {
        self.a * self.a_tilde - self.b * self.b_tilde
    }
}

fn blaschke(spec: &SolutionSpec, lambda: Complex64) -> Result<Complex64> {
    if spec.branch == Branch::NonSoliton || spec.kappa == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let ik = Complex64::new(0.0, spec.kappa);
    let scale = spec.kappa.max(1.0);
    if (lambda - ik).norm() <= 1e-300 * scale || (lambda + ik).norm() <= 1e-300 * scale {
        return Err(domain(format!("λ = {lambda} sits on a Blaschke zero/pole ±iκ")));
    }
    Ok((lambda - ik) / (lambda + ik))
}

/// `log(1 − γe^{−λ²T/2})` for complex `λ`.
fn log_g(spec: &SolutionSpec, lambda: Complex64) -> Complex64 {
    if spec.gamma == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let e = -lambda * lambda * (0.5 * spec.horizon) + spec.gamma.abs().ln();
    let z = if spec.gamma > 0.0 { -e.exp() } else { e.exp() };
    if z.norm() < 0.5 {
        // log1p for complex arguments via the series-safe identity
        let w = Complex64::new(1.0, 0.0) + z;
        let d = w - 1.0;
        if d.norm() == 0.0 {
            return z;
        }
        return w.ln() * (z / d);
    }
    (Complex64::new(1.0, 0.0) + z).ln()
}

/// Scattering coefficients at `λ` (off the real axis) and time `t`.
pub fn scattering_coeffs(eval: &PhiEvaluator, lambda: Complex64, t: f64) -> Result<ScatteringCoeffs> {
    let spec = eval.spec();
    let bl = blaschke(spec, lambda)?;
    let ph = eval.eval(lambda)?;
    let lg = log_g(spec, lambda);
    let (a, a_tilde) = if lambda.im > 0.0 {
        (bl * ph.exp(), (lg - ph).exp() / bl)
    } else {
        (bl * (lg + ph).exp(), (-ph).exp() / bl)
    };
    let b = Complex64::new(1.0, 0.0);
    let b_tilde = if spec.gamma == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        -spec.gamma * (-lambda * lambda * (0.5 * spec.horizon)).exp()
    };
    let half = lambda * lambda * (0.5 * t);
    Ok(ScatteringCoeffs {
        a,
        a_tilde,
        b_dressed: (-half).exp(),
        b_tilde_dressed: b_tilde * half.exp(),
        b,
        b_tilde,
    })
}

fn check_time(spec: &SolutionSpec, t: f64) -> Result<()> {
    if !(t > 0.0 && t < spec.horizon) {
        return Err(domain(format!("time {t} outside (0, {})", spec.horizon)));
    }
    Ok(())
}

/// Exponent of the dressed `r` without the Blaschke factor:
/// `−λ²t/2 + iλx − φ(λ)` (plus `−log g` below the axis).
pub fn dressed_r_exponent(eval: &PhiEvaluator, lambda: Complex64, t: f64, x: f64, phi_value: Complex64) -> Complex64 {
    let mut e = -lambda * lambda * (0.5 * t) + I * lambda * x - phi_value;
    if lambda.im < 0.0 {
        e -= log_g(eval.spec(), lambda);
    }
    e
}

/// `e^{−λ²t/2 + iλx}/Sa(λ)`, assembled as one exponential times the inverse
/// Blaschke factor.
pub fn dressed_r(eval: &PhiEvaluator, lambda: Complex64, t: f64, x: f64) -> Result<Complex64> {
    let spec = eval.spec();
    check_time(spec, t)?;
    let bl = blaschke(spec, lambda)?;
    let ph = eval.eval(lambda)?;
    Ok(exp_checked(dressed_r_exponent(eval, lambda, t, x, ph))? / bl)
}

/// Exponent of the dressed `r̃` without sign and Blaschke factor:
/// `log|γ| − λ²(T−t)/2 − iλx + φ(λ)` (plus `−log g` above the axis).
pub fn dressed_r_tilde_exponent(
    eval: &PhiEvaluator,
    lambda: Complex64,
    t: f64,
    x: f64,
    phi_value: Complex64,
) -> Complex64 {
    let spec = eval.spec();
    let mut e = spec.gamma.abs().ln() - lambda * lambda * (0.5 * (spec.horizon - t)) - I * lambda * x + phi_value;
    if lambda.im > 0.0 {
        e -= log_g(spec, lambda);
    }
    e
}

/// `−γe^{−λ²(T−t)/2 − iλx}/Sã(λ)`, assembled as one exponential times the
/// Blaschke factor.
pub fn dressed_r_tilde(eval: &PhiEvaluator, lambda: Complex64, t: f64, x: f64) -> Result<Complex64> {
    let spec = eval.spec();
    check_time(spec, t)?;
    if spec.gamma == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let bl = blaschke(spec, lambda)?;
    let ph = eval.eval(lambda)?;
    let e = dressed_r_tilde_exponent(eval, lambda, t, x, ph);
    if e.re > EXP_LIMIT {
        return Err(Error::Overflow {
            exponent: e.re,
            limit: EXP_LIMIT,
        });
    }
    Ok(-spec.gamma.signum() * bl * exp_checked(e)?)
}

/// Analytic conserved quantities of the scattering data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedSet {
    pub c1: f64,
    pub c3: f64,
}

/// `C₁ = √(2/T) ψ'(γ) γ` and `C₃ = √(2/T³) ψ(γ)` on the spec's branch.
pub fn conserved_analytic(spec: &SolutionSpec) -> Result<ConservedSet> {
    let t = spec.horizon;
    if spec.gamma == 0.0 {
        return Ok(ConservedSet { c1: 0.0, c3: 0.0 });
    }
    let c1 = (2.0 / t).sqrt() * psi_prime(spec.branch, spec.gamma)? * spec.gamma;
    let c3 = (2.0 / (t * t * t)).sqrt() * psi(spec.branch, spec.gamma)?;
    Ok(ConservedSet { c1, c3 })
}

/// Closed forms of the `η` moments: `∫ log(1 − γe^{−η²T/2}) dη` and
/// `∫ η² log(1 − γe^{−η²T/2}) dη`, through the polylogarithm.
pub fn log_weight_moments(spec: &SolutionSpec) -> Result<(f64, f64)> {
    let t = spec.horizon;
    let m0 = -(2.0 * PI / t).sqrt() * polylog(PolylogOrder::ThreeHalves, spec.gamma)?;
    let m2 = -(2.0 * PI).sqrt() * t.powf(-1.5) * polylog(PolylogOrder::FiveHalves, spec.gamma)?;
    Ok((m0, m2))
}

/// Zeros `λ` of `1 − γe^{−λ²T/2}` on the imaginary axis (`λ = ±iκ` for
/// `γ ∈ (0, 1)`), written in the unscaled variable.
pub fn imaginary_zeros(spec: &SolutionSpec) -> Option<[Complex64; 2]> {
    if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
        return None;
    }
    let k = (2.0 / spec.horizon * (1.0 / spec.gamma).ln()).sqrt();
    Some([Complex64::new(0.0, k), Complex64::new(0.0, -k)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{solve_gamma, Problem};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ns(gamma: f64, t: f64) -> SolutionSpec {
        SolutionSpec::new(Branch::NonSoliton, gamma, t).unwrap()
    }

    #[test]
    fn phi_matches_adaptive_quadrature_values() {
        let cases = [
            (0.5, 2.0, c(0.0, 2.0), c(-0.080_619_280_434_706_15, 0.0)),
            (
                0.9,
                2.0,
                c(0.3, 0.7),
                c(-0.442_413_383_080_837_5, -0.118_664_189_734_855_83),
            ),
            (
                0.9,
                2.0,
                c(-1.2, -0.4),
                c(0.197_194_460_069_003_32, 0.329_224_542_693_333_2),
            ),
            (
                1.0,
                2.0,
                c(0.5, 0.3),
                c(-0.812_544_016_664_144_4, -0.690_875_039_012_694_1),
            ),
            (
                1.0,
                2.0,
                c(-0.05, 1.0),
                c(-0.633_894_778_766_873_8, 0.025_321_369_631_929_197),
            ),
            (
                -1.0,
                2.0,
                c(1.5, 0.8),
                c(0.082_939_240_925_677_25, 0.101_389_847_109_169_57),
            ),
            (
                0.3,
                5.0,
                c(-0.2, 1.1),
                c(-0.047_799_339_753_458_53, 0.007_079_597_178_160_409),
            ),
            (
                0.99,
                2.0,
                c(2.5, 0.01),
                c(-0.002_221_483_273_982_417_9, -0.272_459_109_237_833_53),
            ),
        ];
        for (g, t, lam, want) in cases {
            let got = phi(&ns(g, t), lam).unwrap();
            assert!((got - want).norm() < 1e-10, "γ={g} λ={lam}: {got} vs {want}");
        }
    }

    #[test]
    fn phi_vanishes_at_gamma_zero_and_rejects_real_lambda() {
        assert_eq!(phi(&ns(0.0, 2.0), c(0.3, 1.0)).unwrap(), c(0.0, 0.0));
        assert!(phi(&ns(0.5, 2.0), c(0.3, 0.0)).is_err());
    }

    #[test]
    fn phi_conjugate_symmetry() {
        let ev = PhiEvaluator::new(ns(0.8, 3.0));
        for lam in [c(-0.4, 0.9), c(-2.0, -0.3), c(-0.1, 0.05)] {
            let direct = ev.eval_right(lam);
            let mirrored = ev.eval(c(-lam.re, lam.im)).unwrap().conj();
            assert!((direct - mirrored).norm() < 1e-11, "{lam}");
            assert!((ev.eval(lam).unwrap() - direct).norm() < 1e-11);
        }
    }

    #[test]
    fn phi_large_lambda_expansion() {
        for g in [0.5, 0.9, -1.0] {
            let spec = ns(g, 2.0);
            let (m0, m2) = log_weight_moments(&spec).unwrap();
            let ev = PhiEvaluator::new(spec);
            for lam in [c(0.0, 50.0), c(30.0, 40.0), c(-50.0, 0.5)] {
                let got = ev.eval(lam).unwrap() * lam;
                let want = -(m0 + m2 / (lam * lam)) / (2.0 * PI * I);
                assert!((got - want).norm() < 1e-6 * want.norm().max(1e-3), "{g} {lam}");
            }
        }
    }

    #[test]
    fn moments_match_polylog_closed_forms() {
        for g in [0.3, 0.9, 1.0, -2.0] {
            let spec = ns(g, 2.0);
            let (m0, m2) = log_weight_moments(&spec).unwrap();
            let ev = PhiEvaluator::new(spec);
            assert!((ev.moment(0) * 2.0 * PI * I - m0).norm() < 1e-11);
            assert!((ev.moment(2) * 2.0 * PI * I - m2).norm() < 1e-11);
        }
    }

    #[test]
    fn expansion_reproduces_conserved_quantities() {
        for level in [0.5, 2.0, 5.0] {
            let spec = solve_gamma(&Problem::with_level(2.0, level).unwrap()).unwrap();
            let cs = conserved_analytic(&spec).unwrap();
            let (c1, c3) = PhiEvaluator::new(spec).log_sa_expansion();
            assert!((c1 - c(0.0, -cs.c1)).norm() < 1e-7, "{c1} vs {}", cs.c1);
            assert!((c3 - c(0.0, -cs.c3)).norm() < 1e-7, "{c3} vs {}", cs.c3);
        }
    }

    fn sample_lambdas() -> Vec<Complex64> {
        (0..20)
            .map(|k| {
                let th = 0.31 + k as f64 * 2.0 * PI / 20.0;
                let r = 0.4 + 0.15 * k as f64;
                c(r * th.cos(), r * th.sin())
            })
            .filter(|l| l.im.abs() > 1e-3)
            .collect()
    }

    #[test]
    fn unit_determinant_on_both_branches() {
        for level in [0.2, 0.6, 2.0] {
            let spec = solve_gamma(&Problem::with_level(2.0, level).unwrap()).unwrap();
            let ev = PhiEvaluator::new(spec);
            for lam in sample_lambdas() {
                let s = scattering_coeffs(&ev, lam, 1.0).unwrap();
                assert!((s.determinant() - 1.0).norm() < 1e-10, "{lam}");
            }
        }
        let ev = PhiEvaluator::new(ns(-1.0, 2.0));
        for lam in sample_lambdas() {
            let s = scattering_coeffs(&ev, lam, 1.0).unwrap();
            assert!((s.determinant() - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn trivial_coefficients_at_gamma_zero() {
        let ev = PhiEvaluator::new(ns(0.0, 2.0));
        let s = scattering_coeffs(&ev, c(0.7, -0.4), 1.0).unwrap();
        assert_eq!(s.a, c(1.0, 0.0));
        assert_eq!(s.a_tilde, c(1.0, 0.0));
        assert_eq!(s.b_tilde, c(0.0, 0.0));
    }

    #[test]
    fn a_is_continuous_across_the_real_axis() {
        for level in [0.5, 2.0] {
            let spec = solve_gamma(&Problem::with_level(2.0, level).unwrap()).unwrap();
            let ev = PhiEvaluator::new(spec);
            for u in [-2.0, -0.7, 0.2, 1.0, 1.9] {
                let up = scattering_coeffs(&ev, c(u, 1e-9), 1.0).unwrap();
                let dn = scattering_coeffs(&ev, c(u, -1e-9), 1.0).unwrap();
                assert!((up.a - dn.a).norm() < 1e-8, "a at {u}");
                assert!((up.a_tilde - dn.a_tilde).norm() < 1e-8, "ã at {u}");
            }
        }
    }

    #[test]
    fn soliton_a_has_simple_zero_at_i_kappa() {
        let spec = solve_gamma(&Problem::with_level(2.0, 2.0).unwrap()).unwrap();
        let ev = PhiEvaluator::new(spec);
        let ik = c(0.0, spec.kappa);
        let ratios: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e| scattering_coeffs(&ev, ik + c(e, 0.0), 1.0).unwrap().a.norm() / e)
            .collect();
        assert!((ratios[0] / ratios[2] - 1.0).abs() < 1e-2);
        assert!((ratios[1] / ratios[2] - 1.0).abs() < 1e-3);
        assert!(scattering_coeffs(&ev, ik, 1.0).is_err());
    }

    #[test]
    fn imaginary_zeros_satisfy_the_level_relation() {
        let spec = solve_gamma(&Problem::with_level(2.0, 2.0).unwrap()).unwrap();
        let [z, _] = imaginary_zeros(&spec).unwrap();
        // x² − y² = log|γ| in the variable √(T/2) λ
        let w = z * (spec.horizon / 2.0).sqrt();
        assert!((w.re * w.re - w.im * w.im - spec.gamma.ln()).abs() < 1e-12);
        assert!((z.im - spec.kappa).abs() < 1e-14);
    }

    #[test]
    fn dressed_r_examples() {
        let ev = PhiEvaluator::new(ns(0.0, 2.0));
        let lam = c(0.3, 1.0);
        let got = dressed_r(&ev, lam, 1.0, 0.0).unwrap();
        assert!((got - (-lam * lam / 2.0).exp()).norm() < 1e-15);
        assert_eq!(dressed_r_tilde(&ev, c(0.3, -1.0), 1.0, 0.0).unwrap(), c(0.0, 0.0));
        assert!(dressed_r(&ev, lam, 0.0, 0.0).is_err());
    }

    #[test]
    fn dressed_r_tilde_matches_direct_composition() {
        let spec = ns(0.5, 2.0);
        let ev = PhiEvaluator::new(spec);
        for lam in [c(0.0, -spec.v0), c(0.8, -spec.v0), c(-1.3, -0.2)] {
            let s = scattering_coeffs(&ev, lam, 1.0).unwrap();
            let direct = s.b_tilde_dressed / s.a_tilde * (-I * lam * 0.0).exp();
            let got = dressed_r_tilde(&ev, lam, 1.0, 0.0).unwrap();
            assert!((got - direct).norm() < 1e-13 * direct.norm().max(1.0), "{lam}");
            let r = dressed_r(&ev, -lam, 1.0, 0.4).unwrap();
            let s_up = scattering_coeffs(&ev, -lam, 1.0).unwrap();
            let direct_r = s_up.b_dressed * (I * (-lam) * 0.4).exp() / s_up.a;
            assert!((r - direct_r).norm() < 1e-13 * direct_r.norm().max(1.0));
        }
    }

    #[test]
    fn soliton_dressed_r_pole_is_simple() {
        let spec = solve_gamma(&Problem::with_level(2.0, 2.0).unwrap()).unwrap();
        let ev = PhiEvaluator::new(spec);
        let ik = c(0.0, spec.kappa);
        let vals: Vec<Complex64> = [1e-4, 1e-6]
            .iter()
            .map(|&e| c(e, 0.0) * dressed_r(&ev, ik + c(e, 0.0), 1.0, 0.0).unwrap())
            .collect();
        // Residue oracle: (λ−iκ)/Sa → (2iκ) e^{−φ(iκ)} times the plain exponent at iκ.
        let ph = ev.eval(ik).unwrap();
        let residue = 2.0 * ik * (-ik * ik / 2.0 - ph).exp();
        assert!((vals[1] - residue).norm() < 1e-5 * residue.norm());
        assert!((vals[0] - vals[1]).norm() < 1e-3 * residue.norm());
    }

    #[test]
    fn dressed_r_decays_gaussian_in_re_lambda() {
        let spec = solve_gamma(&Problem::with_level(2.0, 0.5).unwrap()).unwrap();
        let ev = PhiEvaluator::new(spec);
        for u in [2.0, 4.0, 6.0] {
            let r = dressed_r(&ev, c(u, spec.v0), 1.0, 0.0).unwrap().norm();
            let bound = 2.0 * ((spec.v0 * spec.v0 - u * u) * 0.5).exp();
            assert!(r <= bound, "{u}: {r} > {bound}");
            let rt = dressed_r_tilde(&ev, c(u, -spec.v0), 1.0, 0.0).unwrap().norm();
            assert!(rt <= 2.0 * ((spec.v0 * spec.v0 - u * u) * 0.5).exp());
        }
    }

    #[test]
    fn conserved_examples() {
        let zero = conserved_analytic(&ns(0.0, 2.0)).unwrap();
        assert_eq!((zero.c1, zero.c3), (0.0, 0.0));
        let cs = conserved_analytic(&ns(0.5, 2.0)).unwrap();
        assert!((cs.c1 - 0.176_27).abs() < 1e-4);
        let psi_half = crate::rate::psi(Branch::NonSoliton, 0.5).unwrap();
        assert!((cs.c3 - psi_half / 2.0).abs() < 1e-14);
        for level in [0.4, 3.0] {
            let p = Problem::with_level(2.0, level).unwrap();
            let spec = solve_gamma(&p).unwrap();
            let cs = conserved_analytic(&spec).unwrap();
            assert!((cs.c1 - spec.gamma * p.alpha.exp()).abs() < 1e-10);
        }
    }
}
