//! Residual-type checks on sampled fields: the imaginary-time NLS residuals,
//! the conserved quantities `C₁, C₂, C₃` over time, and the energy identity
//! `½‖w‖² = C₁ + T·C₃`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::fredholm::FieldGrid;
use crate::scattering::ConservedSet;
use crate::validate::field::{even_line_trapezoid, similarity_length, SimilarityField};

/// Conserved quantities on one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedRow {
    pub t: f64,
    /// `∫ pq dx`.
    pub c1: f64,
    /// `∫ p ∂ₓq dx`.
    pub c2: f64,
    /// `∫ (p ∂ₓₓq + p²q²) dx`.
    pub c3: f64,
}

/// `C₁, C₂, C₃` over the rows of a field and their spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationTable {
    pub rows: Vec<ConservedRow>,
    pub c1_mean: f64,
    pub c3_mean: f64,
    /// `max |C₁(t) − mean| / max(1, |mean|)`.
    pub c1_spread: f64,
    /// `max |C₃(t) − mean| / max(1, |mean|)`.
    pub c3_spread: f64,
    /// `max |C₂(t)|`.
    pub c2_max: f64,
}

/// `C₁, C₂, C₃` on the rows with `t ∈ [lo, hi]`, with `x`-derivatives from
/// fourth-order central differences in `ξ` and integrals by the trapezoid
/// rule over the full line.
pub fn conservation_check(field: &SimilarityField, lo: f64, hi: f64) -> Result<ConservationTable> {
    let mut rows = Vec::new();
    for (i, &t) in field.ts.iter().enumerate() {
        if t < lo || t > hi {
            continue;
        }
        let ell = similarity_length(field.horizon, t);
        let h = field.xi_step;
        let q = mirrored(&field.q[i]);
        let p = mirrored(&field.p[i]);
        let n = q.len();
        let at = |f: &[f64], k: isize| -> f64 {
            if k < 0 || k as usize >= n {
                0.0
            } else {
                f[k as usize]
            }
        };
        let (mut c2, mut c3) = (0.0, 0.0);
        for k in 0..n as isize {
            let d1 = (-at(&q, k + 2) + 8.0 * at(&q, k + 1) - 8.0 * at(&q, k - 1) + at(&q, k - 2)) / (12.0 * h);
            let d2 = (-at(&q, k + 2) + 16.0 * at(&q, k + 1) - 30.0 * at(&q, k) + 16.0 * at(&q, k - 1) - at(&q, k - 2))
                / (12.0 * h * h);
            let (pk, qk) = (p[k as usize], q[k as usize]);
            c2 += pk * d1;
            c3 += pk * d2 / (ell * ell) + pk * pk * qk * qk;
        }
        let c1 = ell * even_line_trapezoid(&field.w[i], h);
        rows.push(ConservedRow {
            t,
            c1,
            c2: h * c2,
            c3: ell * h * c3,
        });
    }
    if rows.is_empty() {
        return Err(domain(format!("no rows in [{lo}, {hi}]")));
    }
    let mean = |f: fn(&ConservedRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let c1_mean = mean(|r| r.c1);
    let c3_mean = mean(|r| r.c3);
    let spread = |f: fn(&ConservedRow) -> f64, m: f64| {
        rows.iter().map(|r| (f(r) - m).abs()).fold(0.0, f64::max) / m.abs().max(1.0)
    };
    Ok(ConservationTable {
        c1_spread: spread(|r| r.c1, c1_mean),
        c3_spread: spread(|r| r.c3, c3_mean),
        c2_max: rows.iter().map(|r| r.c2.abs()).fold(0.0, f64::max),
        c1_mean,
        c3_mean,
        rows,
    })
}

impl ConservationTable {
    /// Relative distance of `C₃` from the closed form. The density
    /// `∫(p∂ₓₓq + p²q²)` is the negative of the coefficient `C₃` of the
    /// `log a(λ)` expansion, so the comparison is against `−C₃`.
    pub fn c3_deviation(&self, analytic: &ConservedSet) -> f64 {
        (self.c3_mean + analytic.c3).abs() / analytic.c3.abs().max(1.0)
    }
}

fn mirrored(row: &[f64]) -> Vec<f64> {
    row.iter().skip(1).rev().chain(row.iter()).cloned().collect()
}

/// Both sides of the energy identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity {
    /// `½ ∫∫ w² dx dt`.
    pub action: f64,
    /// `C₁ + T·C₃`.
    pub conserved: f64,
    /// `|action − conserved| / max(1, |conserved|)`.
    pub gap: f64,
}

/// Compare `½‖w‖²` with `C₁ + T·C₃` from the time-averaged conserved
/// quantities.
pub fn energy_identity(field: &SimilarityField, table: &ConservationTable) -> EnergyIdentity {
    if field.gamma == 0.0 {
        return EnergyIdentity {
            action: 0.0,
            conserved: 0.0,
            gap: 0.0,
        };
    }
    let action = field.action();
    let conserved = table.c1_mean + field.horizon * table.c3_mean;
    EnergyIdentity {
        action,
        conserved,
        gap: (action - conserved).abs() / conserved.abs().max(1.0),
    }
}

/// Statistics of the NLS residuals on a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlsResidual {
    /// `max |R_q|` over the lattice interior, relative to the largest term of
    /// the `q` equation.
    pub max_q: f64,
    /// Same for `R_p`.
    pub max_p: f64,
    /// Root mean square of `R_q`, same normalization.
    pub l2_q: f64,
    /// Root mean square of `R_p`, same normalization.
    pub l2_p: f64,
    /// Number of interior points.
    pub points: usize,
}

/// Residuals `R_q = ∂ₜq − ½∂ₓₓq − pq²` and `R_p = ∂ₜp + ½∂ₓₓp + p²q` by
/// fourth-order central differences on a uniform lattice, evaluated two
/// nodes away from every edge.
pub fn nls_residual(fields: &FieldGrid) -> Result<NlsResidual> {
    let (nt, nx) = (fields.ts.len(), fields.xs.len());
    if nt < 5 || nx < 5 {
        return Err(domain(format!("lattice {nt}×{nx} too small for five-point stencils")));
    }
    let uniform = |v: &[f64]| {
        let h = v[1] - v[0];
        h > 0.0 && v.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
    };
    if !uniform(&fields.ts) || !uniform(&fields.xs) {
        return Err(domain("nls_residual needs a uniform lattice".to_string()));
    }
    let dt = fields.ts[1] - fields.ts[0];
    let dx = fields.xs[1] - fields.xs[0];
    let d1 = |f: [f64; 5], h: f64| (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    let d2 = |f: [f64; 5], h: f64| (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
    let (q, p) = (&fields.q, &fields.p);
    let mut rq = Vec::new();
    let mut rp = Vec::new();
    let (mut scale_q, mut scale_p) = (0.0f64, 0.0f64);
    for i in 2..nt - 2 {
        for j in 2..nx - 2 {
            let ft = |f: &Vec<Vec<f64>>| [f[i - 2][j], f[i - 1][j], f[i][j], f[i + 1][j], f[i + 2][j]];
            let fx = |f: &Vec<Vec<f64>>| [f[i][j - 2], f[i][j - 1], f[i][j], f[i][j + 1], f[i][j + 2]];
            let (qt, qxx) = (d1(ft(q), dt), d2(fx(q), dx));
            let (pt, pxx) = (d1(ft(p), dt), d2(fx(p), dx));
            let (pv, qv) = (p[i][j], q[i][j]);
            rq.push(qt - 0.5 * qxx - pv * qv * qv);
            rp.push(pt + 0.5 * pxx + pv * pv * qv);
            scale_q = scale_q.max(qt.abs()).max((0.5 * qxx).abs()).max((pv * qv * qv).abs());
            scale_p = scale_p.max(pt.abs()).max((0.5 * pxx).abs()).max((pv * pv * qv).abs());
        }
    }
    let stats = |r: &[f64], s: f64| {
        let s = if s > 0.0 { s } else { 1.0 };
        let max = r.iter().map(|v| v.abs()).fold(0.0, f64::max) / s;
        let l2 = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt() / s;
        (max, l2)
    };
    let (max_q, l2_q) = stats(&rq, scale_q);
    let (max_p, l2_p) = stats(&rp, scale_p);
    Ok(NlsResidual {
        max_q,
        max_p,
        l2_q,
        l2_p,
        points: rq.len(),
    })
}
