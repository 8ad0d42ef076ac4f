//! Closed-form comparators for the upper-tail scaling `T = 2N`, `α = Nᾱ`:
//! the NLS soliton, the pointwise envelopes of `q, p, w` for large `N`, and
//! the Hopf–Cole limit shape of `(1/N) log q`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::fredholm::FieldGrid;
use crate::rate::ScaledProblem;
use crate::specfun::{heat_kernel, sech};

/// Default lower bound on `τ·γ̄` for the envelope regime.
pub const DEFAULT_TAU_THRESHOLD: f64 = 4.0;

/// The soliton `q_s = e^{γ̄t/2}√γ̄ sech(√γ̄x)`, `p_s = e^{−γ̄t/2}√γ̄ sech(√γ̄x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolitonProfile {
    pub gamma_bar: f64,
}

/// Values of an explicit solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldValues {
    pub q: f64,
    pub p: f64,
    pub w: f64,
}

impl SolitonProfile {
    /// Profile with `γ̄ > 0`.
    pub fn new(gamma_bar: f64) -> Result<Self> {
        if !(gamma_bar > 0.0 && gamma_bar.is_finite()) {
            return Err(domain(format!("soliton needs γ̄ > 0, got {gamma_bar}")));
        }
        Ok(Self { gamma_bar })
    }

    /// `(q_s, p_s, w_s)` at `(t, x)`; `w_s = γ̄ sech²(√γ̄x)` does not depend on
    /// `t`.
    pub fn at(&self, t: f64, x: f64) -> FieldValues {
        let k = self.gamma_bar.sqrt();
        let s = sech(k * x);
        let g = 0.5 * self.gamma_bar * t;
        FieldValues {
            q: g.exp() * k * s,
            p: (-g).exp() * k * s,
            w: self.gamma_bar * s * s,
        }
    }
}

/// `(q_s, p_s, w_s)` of the soliton with parameter `γ̄` at `(t, x)`.
pub fn soliton_fields(gamma_bar: f64, t: f64, x: f64) -> Result<FieldValues> {
    Ok(SolitonProfile::new(gamma_bar)?.at(t, x))
}

/// Main terms and error envelopes of the large-`N` estimates at one point.
///
/// Every `*_bound` is the absolute size of the error term with unit
/// constants: the comparison `|computed − main| ≤ C·bound` then measures the
/// constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub t: f64,
    pub x: f64,
    /// `τ = min(t, 2N − t)`.
    pub tau: f64,
    /// `√(1+τ) e^{−γ̄τ/2}`.
    pub decay: f64,
    /// True when `τ ≥ threshold/γ̄`.
    pub in_regime: bool,
    pub q_main: f64,
    pub q_bound: f64,
    pub p_main: f64,
    pub p_bound: f64,
    pub w_main: f64,
    pub w_bound: f64,
}

impl Envelope {
    /// Ratios of the deviations of `(q, p, w)` from the main terms to the
    /// envelopes.
    pub fn deviation(&self, q: f64, p: f64, w: f64) -> Deviation {
        let ratio = |v: f64, main: f64, bound: f64| {
            if bound > 0.0 {
                (v - main).abs() / bound
            } else if v == main {
                0.0
            } else {
                f64::INFINITY
            }
        };
        Deviation {
            t: self.t,
            x: self.x,
            tau: self.tau,
            q_ratio: ratio(q, self.q_main, self.q_bound),
            p_ratio: ratio(p, self.p_main, self.p_bound),
            w_ratio: ratio(w, self.w_main, self.w_bound),
        }
    }
}

/// `q`-type main term and bound at time `t` (used for `q` at `t` and, after
/// the `e^{−γ̄N}` factor, for `p` at `2N − t`).
fn q_form(gamma_bar: f64, t: f64, x: f64, decay: f64) -> (f64, f64) {
    let k = gamma_bar.sqrt();
    let plateau = if x.abs() < k * t {
        (0.5 * gamma_bar * t).exp() * k * sech(k * x)
    } else {
        0.0
    };
    let heat = heat_kernel(t, x);
    let edge = 1.0 / ((x.abs() / t - k).abs().max(1.0 / t.sqrt()));
    let main = plateau + heat;
    let bound = plateau * decay + heat * (edge + decay + edge * decay);
    (main, bound)
}

/// Main terms and envelopes at `(t, x)` for the scaled problem; points with
/// `τ < threshold/γ̄` are flagged as outside the regime.
pub fn corollary_envelope(scaled: &ScaledProblem, t: f64, x: f64, threshold: f64) -> Result<Envelope> {
    let n = scaled.n;
    let gb = scaled.gamma_bar;
    if !(gb > 0.0) {
        return Err(domain(format!("envelopes need γ̄ > 0, got {gb}")));
    }
    if !(t > 0.0 && t < 2.0 * n) {
        return Err(domain(format!("time {t} outside (0, 2N)")));
    }
    let tau = t.min(2.0 * n - t);
    let decay = (1.0 + tau).sqrt() * (-0.5 * gb * tau).exp();
    let (q_main, q_bound) = q_form(gb, t, x, decay);
    let (pq_main, pq_bound) = q_form(gb, 2.0 * n - t, x, decay);
    let scale = (-gb * n).exp();
    let k = gb.sqrt();
    let s2 = sech(k * x).powi(2);
    let inside = if x.abs() < k * tau { 1.0 } else { 0.0 };
    let gauss = |s: f64| (-(x.abs() - k * s).powi(2) / (2.0 * s)).exp();
    let edges = gauss(t) + gauss(2.0 * n - t);
    let w_main = gb * s2 * inside;
    let w_bound = gb * s2 * (decay * inside + (1.0 + decay) * edges);
    Ok(Envelope {
        t,
        x,
        tau,
        decay,
        in_regime: tau * gb >= threshold,
        q_main,
        q_bound,
        p_main: scale * pq_main,
        p_bound: scale * pq_bound,
        w_main,
        w_bound,
    })
}

/// Limit shape `h_*(s, y) = γ̄s/2 − √γ̄|y|` for `|y| ≤ √γ̄s` and `−y²/(2s)`
/// beyond.
pub fn hopf_cole_shape(gamma_bar: f64, s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(domain(format!("limit shape needs s > 0, got {s}")));
    }
    if !(gamma_bar >= 0.0) {
        return Err(domain(format!("limit shape needs γ̄ ≥ 0, got {gamma_bar}")));
    }
    let k = gamma_bar.sqrt();
    Ok(if y.abs() <= k * s {
        0.5 * gamma_bar * s - k * y.abs()
    } else {
        -y * y / (2.0 * s)
    })
}

/// Deviation of computed fields from the envelopes at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub t: f64,
    pub x: f64,
    pub tau: f64,
    /// `|q − q_main| / q_bound`.
    pub q_ratio: f64,
    /// `|p − p_main| / p_bound`.
    pub p_ratio: f64,
    /// `|w − w_main| / w_bound`.
    pub w_ratio: f64,
}

impl Deviation {
    /// Largest of the three ratios.
    pub fn max_ratio(&self) -> f64 {
        self.q_ratio.max(self.p_ratio).max(self.w_ratio)
    }
}

/// Options of [`compare_asymptotics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareOptions {
    /// Lower bound on `τ·γ̄`.
    pub threshold: f64,
    /// Multiplier on the envelopes for the in-envelope fraction.
    pub safety: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_TAU_THRESHOLD,
            safety: 5.0,
        }
    }
}

/// Per-point deviations over the in-regime points of a field grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticTable {
    pub gamma_bar: f64,
    pub n: f64,
    pub rows: Vec<Deviation>,
    /// Largest ratio over all rows: the fitted envelope constant.
    pub fitted_constant: f64,
    /// Fraction of rows with every ratio at most `safety`.
    pub within_fraction: f64,
}

impl AsymptoticTable {
    /// Largest ratio over the rows with `τ` within `tol` of `tau`.
    pub fn max_ratio_at_tau(&self, tau: f64, tol: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| (r.tau - tau).abs() <= tol)
            .map(Deviation::max_ratio)
            .reduce(f64::max)
    }
}

/// Compare the fields of the scaled problem with the envelopes at every grid
/// point in the regime.
pub fn compare_asymptotics(
    scaled: &ScaledProblem,
    fields: &FieldGrid,
    opts: CompareOptions,
) -> Result<AsymptoticTable> {
    if !(scaled.gamma_bar > 0.0) || fields.gamma == 0.0 {
        return Err(domain(
            "asymptotic comparison needs a scaled soliton problem with γ̄ > 0".to_string(),
        ));
    }
    if (fields.horizon - 2.0 * scaled.n).abs() > 1e-9 * fields.horizon {
        return Err(domain(format!(
            "fields have T = {}, expected 2N = {}",
            fields.horizon,
            2.0 * scaled.n
        )));
    }
    let mut rows = Vec::new();
    for (i, &t) in fields.ts.iter().enumerate() {
        for (j, &x) in fields.xs.iter().enumerate() {
            let env = corollary_envelope(scaled, t, x, opts.threshold)?;
            if !env.in_regime {
                continue;
            }
            rows.push(env.deviation(fields.q[i][j], fields.p[i][j], fields.w[i][j]));
        }
    }
    let fitted_constant = rows.iter().map(Deviation::max_ratio).fold(0.0, f64::max);
    let within = rows.iter().filter(|r| r.max_ratio() <= opts.safety).count();
    let within_fraction = if rows.is_empty() {
        0.0
    } else {
        within as f64 / rows.len() as f64
    };
    Ok(AsymptoticTable {
        gamma_bar: scaled.gamma_bar,
        n: scaled.n,
        rows,
        fitted_constant,
        within_fraction,
    })
}
