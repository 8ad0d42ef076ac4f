//! The four subcommands: rate curves, field grids, validation reports and
//! asymptotic comparisons.

use rayon::prelude::*;
use serde::Serialize;
use wnt_core::asymptotics::corollary_envelope;
use wnt_core::fredholm::{field_grid, FieldOptions, FredholmSolver, GridParams};
use wnt_core::rate::{rate_value, solve_gamma, solve_gamma_scaled, Problem, SolutionSpec};
use wnt_core::validate::{validate_with_artifacts, ReportParams, ValidationConfig};
use wnt_core::{Check, Result as CoreResult};

use crate::error::CliError;
use crate::output::{num, CsvDoc};

/// Parameters of `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    pub horizon: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub steps: usize,
}

/// Rate curve `α ↦ (γ, branch, rate)` on an equispaced grid.
pub fn cmd_rate(p: &RateParams) -> Result<Vec<u8>, CliError> {
    if p.steps < 2 {
        return Err(CliError::Usage(format!("steps must be at least 2, got {}", p.steps)));
    }
    if !(p.alpha_max > p.alpha_min) {
        return Err(CliError::Usage(format!(
            "alpha_max {} must exceed alpha_min {}",
            p.alpha_max, p.alpha_min
        )));
    }
    let mut doc = CsvDoc::new("rate", &["alpha", "gamma", "branch", "rate"])?;
    doc.meta("horizon", num(p.horizon));
    doc.meta("alpha_min", num(p.alpha_min));
    doc.meta("alpha_max", num(p.alpha_max));
    doc.meta("steps", p.steps);
    for i in 0..p.steps {
        let f = i as f64 / (p.steps - 1) as f64;
        let alpha = if i + 1 == p.steps {
            p.alpha_max
        } else {
            p.alpha_min + f * (p.alpha_max - p.alpha_min)
        };
        let problem = Problem::new(p.horizon, alpha)?;
        let spec = solve_gamma(&problem)?;
        let rate = rate_value(&problem)?;
        doc.row(&[num(alpha), num(spec.gamma), spec.branch.tag().to_string(), num(rate)])?;
    }
    doc.finish()
}

/// Parameters of `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeParams {
    pub horizon: f64,
    pub alpha: f64,
    pub nt: usize,
    pub nx: usize,
    pub x_max: f64,
    pub t_min: f64,
    pub grid: GridParams,
}

/// `q, p, w, log det` on `nt × nx` points of `[t_min, T − t_min] × [−x_max, x_max]`.
pub fn cmd_shape(p: &ShapeParams) -> Result<Vec<u8>, CliError> {
    if p.nt < 1 || p.nx < 1 {
        return Err(CliError::Usage("nt and nx must be positive".to_string()));
    }
    if !(p.t_min >= 1e-3 * p.horizon && p.t_min < 0.5 * p.horizon) {
        return Err(CliError::Usage(format!(
            "t_min must lie in [1e-3·T, T/2), got {}",
            p.t_min
        )));
    }
    if !(p.x_max > 0.0) {
        return Err(CliError::Usage(format!("x_max must be positive, got {}", p.x_max)));
    }
    let spec = solve_gamma(&Problem::new(p.horizon, p.alpha)?)?;
    let solver = FredholmSolver::with_params(spec, p.x_max, p.grid)?;
    let ts = linspace(p.t_min, p.horizon - p.t_min, p.nt);
    let xs = linspace(-p.x_max, p.x_max, p.nx);
    let grid = field_grid(&solver, &ts, &xs, FieldOptions::default())?;
    let mut doc = CsvDoc::new("shape", &["t", "x", "q", "p", "w", "logdet"])?;
    doc.meta("horizon", num(p.horizon));
    doc.meta("alpha", num(p.alpha));
    doc.meta("branch", spec.branch.tag());
    doc.meta("gamma", num(spec.gamma));
    doc.meta("nt", p.nt);
    doc.meta("nx", p.nx);
    doc.meta("x_max", num(p.x_max));
    doc.meta("t_min", num(p.t_min));
    doc.meta("ell_min", num(p.grid.ell_min));
    doc.meta("ell_max", num(p.grid.ell_max));
    doc.meta("ratio", num(p.grid.ratio));
    doc.meta("s_factor", num(p.grid.s_factor));
    for (i, &t) in ts.iter().enumerate() {
        for (j, &x) in xs.iter().enumerate() {
            doc.row(&[
                num(t),
                num(x),
                num(grid.q[i][j]),
                num(grid.p[i][j]),
                num(grid.w[i][j]),
                num(grid.logdet[i][j]),
            ])?;
        }
    }
    doc.finish()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Parameters of `validate`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidateParams {
    pub horizon: f64,
    pub alpha: f64,
    pub tolerance_scale: f64,
    pub noise_scale: f64,
}

#[derive(Serialize)]
struct Summary {
    pass: bool,
    passed: usize,
    failed: Vec<String>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    version: &'static str,
    params: ReportParams,
    tolerance_scale: f64,
    checks: &'a [Check],
    summary: Summary,
}

/// Validation report as JSON; the flag is true iff every check passes.
pub fn cmd_validate(p: &ValidateParams) -> Result<(Vec<u8>, bool), CliError> {
    if !(p.tolerance_scale >= 0.0) {
        return Err(CliError::Usage(format!(
            "tolerance_scale must be non-negative, got {}",
            p.tolerance_scale
        )));
    }
    let problem = Problem::new(p.horizon, p.alpha)?;
    let config = ValidationConfig {
        noise_scale: p.noise_scale,
        ..ValidationConfig::default()
    };
    let (report, _) = validate_with_artifacts(&problem, &config)?;
    let report = report.with_tolerance_scale(p.tolerance_scale);
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.clone())
        .collect();
    let doc = ReportDoc {
        version: env!("CARGO_PKG_VERSION"),
        params: report.params,
        tolerance_scale: p.tolerance_scale,
        checks: &report.checks,
        summary: Summary {
            pass: report.pass,
            passed: report.checks.len() - failed.len(),
            failed,
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Numerical(format!("report: {e}")))?;
    bytes.push(b'\n');
    Ok((bytes, report.pass))
}

/// Parameters of `asym`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymParams {
    pub n: f64,
    pub alpha_bar: f64,
    pub probes: Vec<(f64, f64)>,
    pub threshold: f64,
}

/// Default probes: `t ∈ {0.6, 0.8, 1, 1.2, 1.4}·N`, `x ∈ {−2, −1, 0, 1, 2}`.
pub fn default_probes(n: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for f in [0.6, 0.8, 1.0, 1.2, 1.4] {
        for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            out.push((f * n, x));
        }
    }
    out
}

/// Parse `t:x,t:x,...`.
pub fn parse_probes(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |s: &str| CliError::Usage(format!("probe {s:?} is not of the form t:x"));
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (t, x) = s.split_once(':').ok_or_else(|| bad(s))?;
            Ok((
                t.trim().parse().map_err(|_| bad(s))?,
                x.trim().parse().map_err(|_| bad(s))?,
            ))
        })
        .collect()
}

/// Computed fields against the large-`N` main terms at each probe.
pub fn cmd_asym(p: &AsymParams) -> Result<Vec<u8>, CliError> {
    if !(p.n >= 4.0) {
        return Err(CliError::Usage(format!("N must be at least 4, got {}", p.n)));
    }
    if p.probes.is_empty() {
        return Err(CliError::Usage("no probes".to_string()));
    }
    let big_t = 2.0 * p.n;
    if let Some(&(t, x)) = p
        .probes
        .iter()
        .find(|&&(t, x)| !(t > 0.0 && t < big_t && x.is_finite()))
    {
        return Err(CliError::Usage(format!("probe ({t}, {x}) outside (0, 2N) × ℝ")));
    }
    let scaled = solve_gamma_scaled(p.n, p.alpha_bar)?;
    let spec = SolutionSpec::from_scaled(&scaled)?;
    let x_max = p.probes.iter().fold(1.0f64, |m, &(_, x)| m.max(x.abs()));
    let solver = FredholmSolver::new(spec, x_max)?;
    let rows: Vec<CoreResult<[f64; 9]>> = p
        .probes
        .par_iter()
        .map(|&(t, x)| {
            let s = solver.at_time(t)?.solve(x)?;
            let env = corollary_envelope(&scaled, t, x, p.threshold)?;
            let ratio = env.deviation(s.q, s.p, s.w).max_ratio();
            Ok([t, x, s.q, env.q_main, s.p, env.p_main, s.w, env.w_main, ratio])
        })
        .collect();
    let header = ["t", "x", "q", "q_pred", "p", "p_pred", "w", "w_pred", "envelope_ratio"];
    let mut doc = CsvDoc::new("asym", &header)?;
    doc.meta("n", num(p.n));
    doc.meta("alpha_bar", num(p.alpha_bar));
    doc.meta("gamma_bar", num(scaled.gamma_bar));
    doc.meta("threshold", num(p.threshold));
    for row in rows {
        doc.row(&row?.map(num))?;
    }
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_parse_and_reject_garbage() {
        assert_eq!(parse_probes("8:0, 9:-1.5").unwrap(), vec![(8.0, 0.0), (9.0, -1.5)]);
        assert!(parse_probes("8").is_err());
        assert!(parse_probes("a:1").is_err());
    }

    #[test]
    fn linspace_hits_both_ends() {
        let v = linspace(0.1, 1.9, 7);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[6], 1.9);
        assert_eq!(linspace(0.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn rate_rejects_short_grids() {
        let p = RateParams {
            horizon: 2.0,
            alpha_min: -1.0,
            alpha_max: 1.0,
            steps: 1,
        };
        assert_eq!(cmd_rate(&p).unwrap_err().exit_code(), 2);
    }
}
