//! Rate-function layer: the two ψ branches, the γ–α relation, the thresholds
//! `c⋆` and `c⋆,1`, the rate value, and the scaled large-`N` equation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, numerical, Result};
use crate::specfun::{polylog, polylog_prime_52, PolylogOrder};

/// `√(4π)`.
pub const SQRT_4PI: f64 = 3.544_907_701_811_032;

/// The one-to-one problem: delta initial condition, terminal value `q(T,0) = e^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Problem {
    /// Time horizon `T > 0`.
    pub horizon: f64,
    /// Logarithm of the terminal value.
    pub alpha: f64,
}

impl Problem {
    /// Validated constructor.
    pub fn new(horizon: f64, alpha: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(domain(format!("horizon must be finite and positive, got {horizon}")));
        }
        if !alpha.is_finite() {
            return Err(domain(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { horizon, alpha })
    }

    /// Problem whose scaled terminal value `√(T/2) e^α` equals `level`.
    pub fn with_level(horizon: f64, level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(domain("terminal level must be positive"));
        }
        Self::new(horizon, level.ln() - 0.5 * (horizon / 2.0).ln())
    }

    /// `√(T/2) e^α`, the quantity matched by `ψ'(γ)`.
    pub fn level(&self) -> f64 {
        (0.5 * (self.horizon / 2.0).ln() + self.alpha).exp()
    }
}

/// Which physical candidate the scattering data belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    NonSoliton,
    Soliton,
}

impl Branch {
    /// Short tag used in CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            Branch::NonSoliton => "ns",
            Branch::Soliton => "s",
        }
    }
}

/// Everything needed to evaluate the scattering data of a solved problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionSpec {
    pub branch: Branch,
    /// `γ ≤ 1`; in `(0, 1)` on the soliton branch.
    pub gamma: f64,
    /// `κ = √((2/T) log(1/γ))` on the soliton branch, 0 otherwise.
    pub kappa: f64,
    /// Height of the integration contours `ℝ ± i v₀`.
    pub v0: f64,
    /// Time horizon `T`.
    pub horizon: f64,
}

impl SolutionSpec {
    /// Assemble a spec from `γ` and the branch, filling `κ` and `v₀`.
    pub fn new(branch: Branch, gamma: f64, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(domain("horizon must be finite and positive"));
        }
        match branch {
            Branch::NonSoliton => {
                if !(gamma <= 1.0) || !gamma.is_finite() {
                    return Err(domain(format!("non-soliton branch needs γ ≤ 1, got {gamma}")));
                }
                Ok(Self {
                    branch,
                    gamma,
                    kappa: 0.0,
                    v0: 1.0 / horizon.sqrt(),
                    horizon,
                })
            }
            Branch::Soliton => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(domain(format!("soliton branch needs γ in (0,1), got {gamma}")));
                }
                let kappa = (2.0 / horizon * (1.0 / gamma).ln()).sqrt();
                Ok(Self::soliton_with_kappa(gamma, kappa, horizon))
            }
        }
    }

    fn soliton_with_kappa(gamma: f64, kappa: f64, horizon: f64) -> Self {
        let v0 = kappa + (1.0 / horizon.sqrt()).max(kappa / 2.0);
        Self {
            branch: Branch::Soliton,
            gamma,
            kappa,
            v0,
            horizon,
        }
    }

    /// Spec of the scaled problem: `T = 2N`, `γ = e^{-Nγ̄}`, `κ = √γ̄`.
    pub fn from_scaled(scaled: &ScaledProblem) -> Result<Self> {
        let exponent = scaled.n * scaled.gamma_bar;
        if exponent > 700.0 {
            return Err(domain("scaled γ underflows; N·γ̄ must stay below 700"));
        }
        Ok(Self::soliton_with_kappa(
            (-exponent).exp(),
            scaled.gamma_bar.sqrt(),
            2.0 * scaled.n,
        ))
    }
}

/// Solution of the scaled equation for given `N` and `ᾱ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledProblem {
    pub n: f64,
    pub alpha_bar: f64,
    pub gamma_bar: f64,
}

impl ScaledProblem {
    /// The unscaled problem `T = 2N`, `α = Nᾱ`.
    pub fn problem(&self) -> Problem {
        Problem {
            horizon: 2.0 * self.n,
            alpha: self.n * self.alpha_bar,
        }
    }
}

fn check_branch_domain(branch: Branch, gamma: f64) -> Result<()> {
    match branch {
        Branch::NonSoliton if gamma <= 1.0 && gamma.is_finite() => Ok(()),
        Branch::Soliton if gamma > 0.0 && gamma < 1.0 => Ok(()),
        Branch::Soliton if gamma == 1.0 => Ok(()),
        _ => Err(domain(format!("γ = {gamma} outside the {branch:?} domain"))),
    }
}

/// `ψ⋆(γ)` on the given branch.
pub fn psi(branch: Branch, gamma: f64) -> Result<f64> {
    check_branch_domain(branch, gamma)?;
    let base = polylog(PolylogOrder::FiveHalves, gamma)? / SQRT_4PI;
    Ok(match branch {
        Branch::NonSoliton => base,
        Branch::Soliton => base - 4.0 / 3.0 * (1.0 / gamma).ln().powf(1.5),
    })
}

/// `ψ'⋆(γ)` on the given branch.
pub fn psi_prime(branch: Branch, gamma: f64) -> Result<f64> {
    check_branch_domain(branch, gamma)?;
    let base = polylog_prime_52(gamma)? / SQRT_4PI;
    Ok(match branch {
        Branch::NonSoliton => base,
        Branch::Soliton => base + 2.0 * (1.0 / gamma).ln().sqrt() / gamma,
    })
}

/// `c⋆ = ζ(3/2)/√(4π)`, the non-soliton/soliton threshold for `√(T/2) e^α`.
pub fn threshold_c_star() -> f64 {
    polylog(PolylogOrder::ThreeHalves, 1.0).expect("Li at 1 is finite") / SQRT_4PI
}

/// The bracketed objective whose infimum over `(0, 1]` defines `c⋆,1`.
pub fn c_star1_objective(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(domain("c⋆,1 objective is defined on (0, 1]"));
    }
    let root = Complex64::new(gamma.ln(), 2.0 * PI).sqrt();
    let bracket = polylog(PolylogOrder::ThreeHalves, gamma)? / SQRT_4PI + 4.0 * root.im;
    Ok(bracket / gamma)
}

/// `c⋆,1`: infimum over `γ ∈ (0, 1]` of [`c_star1_objective`], with the square
/// root on the upper half plane. Returns `(value, minimizer)`.
pub fn threshold_c_star1() -> (f64, f64) {
    let f = |g: f64| c_star1_objective(g).expect("objective on (0,1]");
    // Coarse scan in log γ, then golden-section refinement around the best cell.
    let n = 400;
    let lo_log = -12.0f64;
    let grid: Vec<f64> = (0..=n).map(|i| (lo_log * (1.0 - i as f64 / n as f64)).exp()).collect();
    let (mut best, mut best_val) = (1.0, f(1.0));
    let mut best_i = n;
    for (i, &g) in grid.iter().enumerate() {
        let v = f(g);
        if v < best_val {
            best = g;
            best_val = v;
            best_i = i;
        }
    }
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(n)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let g = 0.5 * (a + b);
    let v = f(g);
    if v < best_val {
        best = g;
        best_val = v;
    }
    (best_val, best)
}

/// Branch selection: non-soliton iff `√(T/2) e^α ≤ c⋆`.
pub fn classify(problem: &Problem) -> Branch {
    let log_level = 0.5 * (problem.horizon / 2.0).ln() + problem.alpha;
    if log_level <= threshold_c_star().ln() {
        Branch::NonSoliton
    } else {
        Branch::Soliton
    }
}

/// Solve `ψ'⋆(γ) = √(T/2) e^α` on the selected branch.
///
/// Both branches are monotone, so bisection is unconditionally safe; it is run
/// to floating-point resolution of the bracketing variable.
pub fn solve_gamma(problem: &Problem) -> Result<SolutionSpec> {
    let branch = classify(problem);
    let target = problem.level();
    let tol = 1e-12 * target.max(1.0);
    let gamma = match branch {
        Branch::NonSoliton => {
            if (target - threshold_c_star()).abs() <= tol {
                1.0
            } else {
                // γ = 1 - e^{-u}; ψ'_ns increases with u.
                let g = |u: f64| 1.0 - (-u).exp();
                let h = |u: f64| psi_prime(Branch::NonSoliton, g(u)).map(|v| v - target);
                let u = bisect(h, -40.0, 40.0)?;
                g(u)
            }
        }
        Branch::Soliton => {
            // γ = e^{-ℓ}; ψ'_s decreases in γ, so increases with ℓ.
            let h = |l: f64| psi_prime(Branch::Soliton, (-l).exp()).map(|v| v - target);
            let l = bisect(h, 1e-16, 1e16f64.ln())?;
            (-l).exp()
        }
    };
    let residual = (psi_prime(branch, gamma)? - target).abs();
    if residual > tol.max(1e-11 * target) {
        return Err(numerical(format!(
            "γ solve residual {residual:e} exceeds tolerance for level {target}"
        )));
    }
    SolutionSpec::new(branch, gamma, problem.horizon)
}

/// Bisection for an increasing function on `[lo, hi]`.
fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo > 0.0 || fhi < 0.0 {
        return Err(numerical(format!(
            "root not bracketed on [{lo}, {hi}]: f = ({flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (vlo, vhi) = (f(lo)?.abs(), f(hi)?.abs());
    Ok(if vlo <= vhi { lo } else { hi })
}

/// Rate `γ e^α − ψ⋆(γ)/√(T/2)` at the solved `γ`.
pub fn rate_value(problem: &Problem) -> Result<f64> {
    let spec = solve_gamma(problem)?;
    let psi_val = psi(spec.branch, spec.gamma)?;
    Ok(spec.gamma * problem.alpha.exp() - psi_val / (problem.horizon / 2.0).sqrt())
}

/// Solve `(1/√(4πN)) Li'_{5/2}(e^{-Nγ̄}) + 2√γ̄ e^{Nγ̄} = e^{Nᾱ}` for `γ̄`,
/// working with the logarithm of both sides.
pub fn solve_gamma_scaled(n: f64, alpha_bar: f64) -> Result<ScaledProblem> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(domain(format!("scale parameter N must be at least 1, got {n}")));
    }
    if !(alpha_bar > 0.0 && alpha_bar.is_finite()) {
        return Err(domain(format!("ᾱ must be positive, got {alpha_bar}")));
    }
    let f = |g: f64| scaled_log_residual(n, alpha_bar, g);
    let mut hi = alpha_bar.max(1.0);
    while f(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(numerical("scaled equation could not be bracketed"));
        }
    }
    let gamma_bar = bisect(f, 1e-300, hi)?;
    let res = f(gamma_bar)?;
    if res.abs() > 1e-10 {
        return Err(numerical(format!("scaled equation residual {res:e}")));
    }
    Ok(ScaledProblem {
        n,
        alpha_bar,
        gamma_bar,
    })
}

/// `log(LHS) − Nᾱ` of the scaled equation; its exponential minus one is the
/// relative residual.
pub fn scaled_log_residual(n: f64, alpha_bar: f64, gamma_bar: f64) -> Result<f64> {
    let gamma = (-n * gamma_bar).exp();
    let soliton = (2.0 * gamma_bar.sqrt()).ln() + n * gamma_bar;
    let bulk = polylog_prime_52(gamma)? / (4.0 * PI * n).sqrt();
    // log(e^{soliton} + bulk) = soliton + log1p(bulk e^{-soliton})
    let total = soliton + (bulk * (-soliton).exp()).ln_1p();
    Ok(total - n * alpha_bar)
}
