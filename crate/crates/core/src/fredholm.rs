//! Half-line operators built from `ρ` and `ρ̃`: Nyström discretization,
//! resolvent solves for `q` and `p`, the Fredholm log-determinant, and field
//! grids of `(q, p, w, log det)`.
//!
//! On a half-line grid `{sᵢ, wᵢ}` the composite kernel is
//! `K = R W R̃` with `Rᵢₖ = ρ(sᵢ+sₖ+x)` and `R̃ᵢₖ = ρ̃(−sᵢ−sₖ−x)`, both
//! symmetric. A single LU factorization of `I − KW` yields `q`, `p` (through
//! the push-through identity) and `log det(I − KW)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, invariant, Error, Result};
use crate::kernels::{s_max_cap, KernelFactory, KernelSection, KERNEL_TAIL, T_MIN_FRACTION};
use crate::quad::{composite, gauss_legendre, Rule};
use crate::rate::SolutionSpec;
use crate::specfun::heat_kernel;

/// Composite Gauss–Legendre rule on `[0, S_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineGrid {
    /// Truncation length.
    pub s_max: f64,
    /// Nodes and weights.
    pub rule: Rule,
}

impl HalfLineGrid {
    /// Minimum node count.
    pub const MIN_NODES: usize = 64;
    /// Nodes per panel.
    pub const PANEL: usize = 16;
    /// Maximum node count.
    pub const MAX_NODES: usize = 2048;

    /// Panels of width `ell_min` on `[0, fine_to]`, then widths growing by
    /// `ratio` up to `ell_max` until `s_max`.
    pub fn graded(s_max: f64, fine_to: f64, ell_min: f64, ell_max: f64, ratio: f64) -> Result<Self> {
        if !(s_max > 0.0 && ell_min > 0.0 && ell_max >= ell_min && ratio >= 1.0) {
            return Err(domain("half-line grid needs positive length and panel widths"));
        }
        let mut edges = vec![0.0];
        let fine_to = fine_to.clamp(0.0, s_max);
        let fine_panels = (fine_to / ell_min).ceil() as usize;
        if fine_panels * Self::PANEL > Self::MAX_NODES {
            return Err(Error::Grid(format!(
                "half-line grid with panels of {ell_min:.3e} on [0, {fine_to:.3}] needs more than {} nodes",
                Self::MAX_NODES
            )));
        }
        for k in 1..=fine_panels {
            edges.push(fine_to * k as f64 / fine_panels as f64);
        }
        let mut width = ell_min;
        while *edges.last().expect("non-empty") < s_max * (1.0 - 1e-12) {
            let last = *edges.last().expect("non-empty");
            let next = (last + width).min(s_max);
            // Avoid a sliver panel at the end.
            let next = if s_max - next < 0.3 * width { s_max } else { next };
            edges.push(next);
            width = (width * ratio).min(ell_max);
            if edges.len() * Self::PANEL > Self::MAX_NODES {
                return Err(Error::Grid(format!(
                    "half-line grid on [0, {s_max:.3}] with panels from {ell_min:.3e} needs more than {} nodes",
                    Self::MAX_NODES
                )));
            }
        }
        while (edges.len() - 1) * Self::PANEL < Self::MIN_NODES {
            let mut finer = Vec::with_capacity(2 * edges.len());
            for pair in edges.windows(2) {
                finer.push(pair[0]);
                finer.push(0.5 * (pair[0] + pair[1]));
            }
            finer.push(s_max);
            edges = finer;
        }
        let rule = composite(&edges, &gauss_legendre(Self::PANEL));
        Ok(Self { s_max, rule })
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.rule.len()
    }

    /// Nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    /// Weights.
    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }
}

/// Resolution parameters of the half-line grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridParams {
    /// Smallest panel width in units of `√min(t, T−t)`.
    pub ell_min: f64,
    /// Largest panel width in units of `√max(t, T−t)`.
    pub ell_max: f64,
    /// Geometric growth of panel widths.
    pub ratio: f64,
    /// Multiplier applied to the truncation length found from the kernel tails.
    pub s_factor: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            ell_min: 0.5,
            ell_max: 0.6,
            ratio: 1.3,
            s_factor: 1.0,
        }
    }
}

impl GridParams {
    /// Parameters with halved panel widths and doubled truncation length.
    pub fn refined(self) -> Self {
        Self {
            ell_min: 0.5 * self.ell_min,
            ell_max: 0.5 * self.ell_max,
            s_factor: 2.0 * self.s_factor,
            ..self
        }
    }

    /// Require positive widths with `ell_max ≥ ell_min`, `ratio ≥ 1` and
    /// `s_factor ≥ 1`.
    pub fn check(&self) -> Result<()> {
        let ok = self.ell_min > 0.0
            && self.ell_max >= self.ell_min
            && self.ell_max.is_finite()
            && self.ratio >= 1.0
            && self.ratio.is_finite()
            && self.s_factor >= 1.0
            && self.s_factor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid grid parameters {self:?}")))
        }
    }
}

/// Fredholm solver for one solution: a kernel factory plus grid parameters.
#[derive(Debug, Clone)]
pub struct FredholmSolver {
    factory: Arc<KernelFactory>,
    params: GridParams,
    x_max: f64,
}

impl FredholmSolver {
    /// Solver serving `|x| ≤ x_max`.
    pub fn new(spec: SolutionSpec, x_max: f64) -> Result<Self> {
        Self::with_params(spec, x_max, GridParams::default())
    }

    /// Solver with explicit grid parameters.
    pub fn with_params(spec: SolutionSpec, x_max: f64, params: GridParams) -> Result<Self> {
        params.check()?;
        let reach = x_max.abs() + 1.0;
        let cap = s_max_cap(&spec) * params.s_factor.max(1.0);
        let factory = KernelFactory::new(spec, -reach, 2.0 * cap + reach)?;
        Ok(Self {
            factory: Arc::new(factory),
            params,
            x_max: x_max.abs(),
        })
    }

    /// Solver sharing this one's kernel tables but using other grid parameters.
    pub fn with_grid_params(&self, params: GridParams) -> Self {
        Self {
            factory: Arc::clone(&self.factory),
            params,
            x_max: self.x_max,
        }
    }

    /// The solution spec.
    pub fn spec(&self) -> &SolutionSpec {
        self.factory.spec()
    }

    /// Grid parameters.
    pub fn params(&self) -> GridParams {
        self.params
    }

    /// Largest `|x|` served.
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Kernel tables and grid data at time `t`.
    pub fn at_time(&self, t: f64) -> Result<TimeSlice> {
        let section = self.factory.section(t)?;
        Ok(TimeSlice {
            section,
            params: self.params,
            spec: *self.spec(),
        })
    }
}

/// Everything needed for point solves at one time.
#[derive(Debug, Clone)]
pub struct TimeSlice {
    section: KernelSection,
    params: GridParams,
    spec: SolutionSpec,
}

impl TimeSlice {
    /// Time of the slice.
    pub fn t(&self) -> f64 {
        self.section.t
    }

    /// Kernel tables.
    pub fn section(&self) -> &KernelSection {
        &self.section
    }

    /// Half-line grid serving all `x ≥ x_min`.
    pub fn grid(&self, x_min: f64) -> Result<HalfLineGrid> {
        let t = self.t();
        let big_t = self.spec.horizon;
        let tau_small = t.min(big_t - t);
        let tau_big = t.max(big_t - t);
        let p = self.params;
        let decay = self.section.decay_length(x_min.min(0.0), KERNEL_TAIL);
        let cap = s_max_cap(&self.spec) * p.s_factor.max(1.0);
        let s_max = (p.s_factor * decay).max(4.0 * tau_small.sqrt());
        if s_max > cap {
            return Err(Error::Grid(format!(
                "kernel tails at t = {t} need S = {s_max:.3} beyond the cap {cap:.3}"
            )));
        }
        let ell_min = p.ell_min * tau_small.sqrt();
        let ell_max = (p.ell_max * tau_big.sqrt()).max(ell_min);
        HalfLineGrid::graded(s_max, (-x_min).max(0.0) + ell_min, ell_min, ell_max, p.ratio)
    }

    /// Assemble and factor the discrete system at `x` on `grid`.
    pub fn system(&self, grid: &HalfLineGrid, x: f64) -> Result<PointSystem> {
        PointSystem::assemble(&self.section, grid, x)
    }

    /// Solve at `x` on the default grid for `x`.
    pub fn solve(&self, x: f64) -> Result<PointSolution> {
        let grid = self.grid(x)?;
        self.system(&grid, x)?.solution()
    }

    /// `(w_pq, w_det)` at `x`: the product `p·q` and the five-point second
    /// difference of `log det` with step `10⁻²·max(1, √t)`.
    pub fn solve_w(&self, x: f64) -> Result<(f64, f64)> {
        let h = 1e-2 * self.t().sqrt().max(1.0);
        let grid = self.grid(x - 2.0 * h)?;
        let center = self.system(&grid, x)?.solution()?;
        let mut ld = [0.0; 5];
        for (k, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
            ld[k] = if *off == 0.0 {
                center.logdet
            } else {
                self.system(&grid, x + off * h)?.log_det()?
            };
        }
        let w_det = (-ld[0] + 16.0 * ld[1] - 30.0 * ld[2] + 16.0 * ld[3] - ld[4]) / (12.0 * h * h);
        Ok((center.w, w_det))
    }
}

/// Discrete system at one `(t, x)`: kernel samples and the LU factors of
/// `I − KW`.
#[derive(Debug, Clone)]
pub struct PointSystem {
    /// Spatial point.
    pub x: f64,
    grid: HalfLineGrid,
    rho_x: f64,
    rho_tilde_x: f64,
    r: DVector<f64>,
    rt: DVector<f64>,
    rmat: DMatrix<f64>,
    rtmat: DMatrix<f64>,
    k: DMatrix<f64>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    trivial: bool,
}

/// Values produced by one point solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointSolution {
    pub q: f64,
    pub p: f64,
    pub w: f64,
    pub logdet: f64,
}

impl PointSystem {
    fn assemble(section: &KernelSection, grid: &HalfLineGrid, x: f64) -> Result<Self> {
        let n = grid.n();
        let s = grid.nodes();
        let w = grid.weights();
        let (rho_x, rho_tilde_x) = section.both(x);
        let trivial = section.spec().gamma == 0.0;
        let mut r = DVector::zeros(n);
        let mut rt = DVector::zeros(n);
        for i in 0..n {
            let (a, b) = section.both(s[i] + x);
            r[i] = a;
            rt[i] = b;
        }
        if trivial {
            return Ok(Self {
                x,
                grid: grid.clone(),
                rho_x,
                rho_tilde_x,
                r,
                rt,
                rmat: DMatrix::zeros(0, 0),
                rtmat: DMatrix::zeros(0, 0),
                k: DMatrix::zeros(n, n),
                lu: None,
                trivial,
            });
        }
        let mut rmat = DMatrix::zeros(n, n);
        let mut rtmat = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let (a, b) = section.both(s[i] + s[j] + x);
                rmat[(i, j)] = a;
                rmat[(j, i)] = a;
                rtmat[(i, j)] = b;
                rtmat[(j, i)] = b;
            }
        }
        let wv = DVector::from_column_slice(w);
        let mut rw = rmat.clone();
        for (j, mut col) in rw.column_iter_mut().enumerate() {
            col *= wv[j];
        }
        let k = &rw * &rtmat;
        let mut a = -&k;
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col *= wv[j];
        }
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        let lu = a.lu();
        Ok(Self {
            x,
            grid: grid.clone(),
            rho_x,
            rho_tilde_x,
            r,
            rt,
            rmat,
            rtmat,
            k,
            lu: Some(lu),
            trivial,
        })
    }

    /// The grid the system lives on.
    pub fn grid(&self) -> &HalfLineGrid {
        &self.grid
    }

    /// Nyström matrix `K(sᵢ, sⱼ)` of the composite kernel.
    pub fn composite_kernel(&self) -> &DMatrix<f64> {
        &self.k
    }

    fn weights(&self) -> DVector<f64> {
        DVector::from_column_slice(self.grid.weights())
    }

    fn lu(&self) -> Result<&nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        self.lu
            .as_ref()
            .ok_or_else(|| invariant("no factorization for the trivial system"))
    }

    fn solve_lu(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu()?
            .solve(rhs)
            .ok_or_else(|| invariant(format!("I − K is singular at x = {}", self.x)))
    }

    /// `q(t,x)` from `(I − KW)g = r` and the Nyström extension to `0⁺`.
    pub fn q(&self) -> Result<f64> {
        if self.trivial {
            return Ok(self.rho_x);
        }
        let w = self.weights();
        let g = self.solve_lu(&self.r)?;
        // K(0, sⱼ) = Σₖ ρ(sₖ+x) wₖ ρ̃m(sₖ+sⱼ+x)
        let k0 = self.rtmat.tr_mul(&self.r.component_mul(&w));
        Ok(self.rho_x + k0.component_mul(&w).dot(&g))
    }

    /// `p(t,x)` through the push-through identity, reusing the factors of `I − KW`.
    pub fn p(&self) -> Result<f64> {
        if self.trivial {
            return Ok(0.0);
        }
        let w = self.weights();
        let rhs = &self.rmat * self.rt.component_mul(&w);
        let y = self.solve_lu(&rhs)?;
        Ok(-(self.rho_tilde_x + self.rt.component_mul(&w).dot(&y)))
    }

    /// `p(t,x)` from the mirrored system `(I − MW)h = r̃`, `M = R̃WR`.
    pub fn p_mirrored(&self) -> Result<f64> {
        if self.trivial {
            return Ok(0.0);
        }
        let w = self.weights();
        let (m_lu, _) = self.mirrored_lu(&w);
        let h = m_lu.solve(&self.rt).ok_or_else(|| invariant("I − M is singular"))?;
        let m0 = self.rmat.tr_mul(&self.rt.component_mul(&w));
        Ok(-(self.rho_tilde_x + m0.component_mul(&w).dot(&h)))
    }

    /// `q(t,x)` from the second expression `ρ + ρ I₋(I − I₋ρ̃I₊ρI₋)^{-1} I₋ρ̃ I₊ρ`.
    pub fn q_mirrored(&self) -> Result<f64> {
        if self.trivial {
            return Ok(self.rho_x);
        }
        let w = self.weights();
        let (m_lu, _) = self.mirrored_lu(&w);
        let rhs = &self.rtmat * self.r.component_mul(&w);
        let z = m_lu.solve(&rhs).ok_or_else(|| invariant("I − M is singular"))?;
        Ok(self.rho_x + self.r.component_mul(&w).dot(&z))
    }

    fn mirrored_lu(&self, w: &DVector<f64>) -> (nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, DMatrix<f64>) {
        let n = w.len();
        let mut rtw = self.rtmat.clone();
        for (j, mut col) in rtw.column_iter_mut().enumerate() {
            col *= w[j];
        }
        let m = &rtw * &self.rmat;
        let mut a = -&m;
        for (j, mut col) in a.column_iter_mut().enumerate() {
            col *= w[j];
        }
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        (a.lu(), m)
    }

    /// `log det(I − KW)`; fails unless the determinant is positive.
    pub fn log_det(&self) -> Result<f64> {
        if self.trivial {
            return Ok(0.0);
        }
        let lu = self.lu()?;
        let u = lu.u();
        let mut log_abs = 0.0;
        let mut negative = lu.p().determinant::<f64>() < 0.0;
        for i in 0..u.nrows() {
            let d = u[(i, i)];
            if d == 0.0 {
                return Err(invariant(format!("det(I − K) vanishes at x = {}", self.x)));
            }
            if d < 0.0 {
                negative = !negative;
            }
            log_abs += d.abs().ln();
        }
        if negative {
            return Err(invariant(format!("det(I − K) is negative at x = {}", self.x)));
        }
        Ok(log_abs)
    }

    /// All four values at once.
    pub fn solution(&self) -> Result<PointSolution> {
        let q = self.q()?;
        let p = self.p()?;
        Ok(PointSolution {
            q,
            p,
            w: p * q,
            logdet: self.log_det()?,
        })
    }
}

/// Composite-kernel Nyström matrix at `(t, x)` on the default grid.
pub fn composite_kernel_q(solver: &FredholmSolver, t: f64, x: f64) -> Result<DMatrix<f64>> {
    let slice = solver.at_time(t)?;
    let grid = slice.grid(x)?;
    Ok(slice.system(&grid, x)?.k)
}

/// `q(t, x)`.
pub fn solve_q(solver: &FredholmSolver, t: f64, x: f64) -> Result<f64> {
    let slice = solver.at_time(t)?;
    let grid = slice.grid(x)?;
    slice.system(&grid, x)?.q()
}

/// `p(t, x)` from the mirrored resolvent.
pub fn solve_p(solver: &FredholmSolver, t: f64, x: f64) -> Result<f64> {
    let slice = solver.at_time(t)?;
    let grid = slice.grid(x)?;
    slice.system(&grid, x)?.p_mirrored()
}

/// `log det(I − K)` at `(t, x)`.
pub fn log_det(solver: &FredholmSolver, t: f64, x: f64) -> Result<f64> {
    let slice = solver.at_time(t)?;
    let grid = slice.grid(x)?;
    slice.system(&grid, x)?.log_det()
}

/// `(w_pq, w_det)` at `(t, x)`.
pub fn solve_w(solver: &FredholmSolver, t: f64, x: f64) -> Result<(f64, f64)> {
    solver.at_time(t)?.solve_w(x)
}

/// Fields `q, p, w = pq, log det` on a tensor grid, rows indexed by time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldGrid {
    pub horizon: f64,
    pub gamma: f64,
    pub ts: Vec<f64>,
    pub xs: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub logdet: Vec<Vec<f64>>,
}

/// Summary of the invariant sweep over a field grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDiagnostics {
    /// Smallest `q` relative to its row maximum.
    pub min_q_ratio: f64,
    /// Largest `|f(t,x) − f(t,−x)|` over `q, p, w`, relative to the field scale.
    pub x_asymmetry: f64,
    /// Largest `|w(t,x) − w(T−t,x)|` relative to `max |w|` over mirrored row pairs.
    pub t_asymmetry: Option<f64>,
    /// Range of `det(I − K)` over the grid.
    pub det_range: (f64, f64),
}

impl FieldGrid {
    /// Row of `w` at index `i`.
    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i]
    }

    /// Invariant sweep: `q > 0`, symmetry in `x`, symmetry of `w` in `t`.
    pub fn diagnostics(&self) -> FieldDiagnostics {
        let mut min_q_ratio = f64::INFINITY;
        for row in &self.q {
            let m = row.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            if m > 0.0 {
                for &v in row {
                    min_q_ratio = min_q_ratio.min(v / m);
                }
            }
        }
        let mut x_asym = 0.0f64;
        let nx = self.xs.len();
        for (i, _) in self.ts.iter().enumerate() {
            for field in [&self.q, &self.p, &self.w] {
                let scale = field[i].iter().cloned().fold(1e-300f64, |a, b| a.max(b.abs()));
                for j in 0..nx {
                    let xm = -self.xs[j];
                    if let Some(k) = self.xs.iter().position(|&y| (y - xm).abs() <= 1e-12 * (1.0 + xm.abs())) {
                        x_asym = x_asym.max((field[i][j] - field[i][k]).abs() / scale);
                    }
                }
            }
        }
        let wscale = self.w.iter().flatten().cloned().fold(1e-300f64, |a, b| a.max(b.abs()));
        let mut t_asym: Option<f64> = None;
        for (i, &t) in self.ts.iter().enumerate() {
            let tm = self.horizon - t;
            if let Some(k) = self.ts.iter().position(|&s| (s - tm).abs() <= 1e-12 * self.horizon) {
                let d = (0..nx).map(|j| (self.w[i][j] - self.w[k][j]).abs()).fold(0.0, f64::max) / wscale;
                t_asym = Some(t_asym.unwrap_or(0.0).max(d));
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.logdet.iter().flatten() {
            lo = lo.min(v.exp());
            hi = hi.max(v.exp());
        }
        FieldDiagnostics {
            min_q_ratio,
            x_asymmetry: x_asym,
            t_asymmetry: t_asym,
            det_range: (lo, hi),
        }
    }
}

/// Options of [`field_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldOptions {
    /// Compute only `x ≥ 0` and fill `x < 0` from the symmetry `x ↦ −x`.
    pub mirror_x: bool,
    /// Allowed negative excursion of `q` relative to the larger of its row
    /// maximum and `hk(t, 0)`.
    pub positivity_tolerance: f64,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            mirror_x: true,
            positivity_tolerance: 1e-12,
        }
    }
}

/// Populate `q, p, w, log det` on `ts × xs`, fanning rows out across workers.
pub fn field_grid(solver: &FredholmSolver, ts: &[f64], xs: &[f64], opts: FieldOptions) -> Result<FieldGrid> {
    let spec = *solver.spec();
    let t_min = T_MIN_FRACTION * spec.horizon;
    for &t in ts {
        if !(t >= t_min * (1.0 - 1e-12) && t <= spec.horizon - t_min * (1.0 - 1e-12)) {
            return Err(domain(format!("field time {t} outside [{t_min}, T − {t_min}]")));
        }
    }
    if let Some(&x) = xs.iter().find(|x| x.abs() > solver.x_max() * (1.0 + 1e-12)) {
        return Err(domain(format!("field point x = {x} beyond the solver range")));
    }
    let rows: Vec<Result<Vec<PointSolution>>> = ts.par_iter().map(|&t| field_row(solver, t, xs, opts)).collect();
    let mut grid = FieldGrid {
        horizon: spec.horizon,
        gamma: spec.gamma,
        ts: ts.to_vec(),
        xs: xs.to_vec(),
        q: Vec::with_capacity(ts.len()),
        p: Vec::with_capacity(ts.len()),
        w: Vec::with_capacity(ts.len()),
        logdet: Vec::with_capacity(ts.len()),
    };
    let mut failures = Vec::new();
    for (row, &t) in rows.into_iter().zip(ts) {
        match row {
            Ok(vals) => {
                grid.q.push(vals.iter().map(|v| v.q).collect());
                grid.p.push(vals.iter().map(|v| v.p).collect());
                grid.w.push(vals.iter().map(|v| v.w).collect());
                grid.logdet.push(vals.iter().map(|v| v.logdet).collect());
            }
            Err(e) => failures.push(format!("t = {t}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(invariant(format!("field grid failed at {}", failures.join("; "))));
    }
    for (i, row) in grid.q.iter().enumerate() {
        let m = row
            .iter()
            .cloned()
            .fold(heat_kernel(grid.ts[i], 0.0), |a, b| a.max(b.abs()));
        if let Some(j) = row
            .iter()
            .position(|&v| !(v > -opts.positivity_tolerance * m) || (m == 0.0 && v < 0.0))
        {
            return Err(invariant(format!(
                "q = {:e} is not positive at (t, x) = ({}, {})",
                row[j], grid.ts[i], grid.xs[j]
            )));
        }
    }
    Ok(grid)
}

fn field_row(solver: &FredholmSolver, t: f64, xs: &[f64], opts: FieldOptions) -> Result<Vec<PointSolution>> {
    let slice = solver.at_time(t)?;
    let spec = solver.spec();
    if spec.gamma == 0.0 {
        return Ok(xs
            .iter()
            .map(|&x| PointSolution {
                q: heat_kernel(t, x),
                p: 0.0,
                w: 0.0,
                logdet: 0.0,
            })
            .collect());
    }
    let mut cache: Vec<(f64, PointSolution)> = Vec::new();
    let base = slice.grid(0.0)?;
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        let key = if opts.mirror_x { x.abs() } else { x };
        if let Some((_, v)) = cache.iter().find(|(k, _)| *k == key) {
            out.push(*v);
            continue;
        }
        let sol = if key >= 0.0 {
            slice.system(&base, key)?.solution()?
        } else {
            let g = slice.grid(key)?;
            slice.system(&g, key)?.solution()?
        };
        cache.push((key, sol));
        out.push(sol);
    }
    Ok(out)
}

/// `∫ f dx` on a non-uniform grid by the trapezoid rule.
pub fn trapezoid(xs: &[f64], f: &[f64]) -> f64 {
    xs.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `∫₀^{t₁} f dt` from the two samples nearest the endpoint, assuming
/// `f ≈ a/√t + b` as `t → 0`.
pub fn boundary_layer(t1: f64, f1: f64, t2: f64, f2: f64) -> f64 {
    let (s1, s2) = (1.0 / t1.sqrt(), 1.0 / t2.sqrt());
    let a = (f1 - f2) / (s1 - s2);
    let b = f1 - a * s1;
    2.0 * a * t1.sqrt() + b * t1
}

/// `½ ∫∫ w² dx dt` over `[0, T] × ℝ`: trapezoid in `x` and in `t` over the
/// rows, with the layers `[0, t₀]` and `[T − t₀, T]` extrapolated from the
/// `a/√t + b` behaviour of the row integrals.
pub fn action_numeric(fields: &FieldGrid) -> f64 {
    if fields.gamma == 0.0 || fields.ts.len() < 2 {
        return 0.0;
    }
    let rows: Vec<f64> = fields
        .w
        .iter()
        .map(|row| {
            let sq: Vec<f64> = row.iter().map(|v| v * v).collect();
            trapezoid(&fields.xs, &sq)
        })
        .collect();
    let ts = &fields.ts;
    let n = ts.len();
    let bulk = trapezoid(ts, &rows);
    let head = boundary_layer(ts[0], rows[0], ts[1], rows[1]);
    let big_t = fields.horizon;
    let tail = boundary_layer(big_t - ts[n - 1], rows[n - 1], big_t - ts[n - 2], rows[n - 2]);
    0.5 * (bulk + head + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::{solve_gamma, Branch, Problem};

    fn spec_for(level: f64) -> SolutionSpec {
        solve_gamma(&Problem::with_level(2.0, level).unwrap()).unwrap()
    }

    #[test]
    fn graded_grid_has_minimum_size_and_covers_the_interval() {
        let g = HalfLineGrid::graded(3.0, 0.0, 0.1, 0.5, 1.3).unwrap();
        assert!(g.n() >= 64);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 3.0).abs() < 1e-13);
        let g = HalfLineGrid::graded(0.2, 0.0, 0.5, 0.5, 1.3).unwrap();
        assert!(g.n() >= 64);
    }

    #[test]
    fn oversized_grids_and_bad_parameters_are_rejected() {
        assert!(matches!(
            HalfLineGrid::graded(30.0, 0.0, 1e-4, 1e-3, 1.3),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            HalfLineGrid::graded(3.0, 3.0, 1e-4, 1e-3, 1.3),
            Err(Error::Grid(_))
        ));
        let bad = GridParams {
            ratio: 0.9,
            ..GridParams::default()
        };
        assert!(matches!(bad.check(), Err(Error::Domain(_))));
        assert!(GridParams::default().refined().check().is_ok());
    }

    #[test]
    fn gamma_zero_reduces_to_heat_kernel() {
        let spec = SolutionSpec::new(Branch::NonSoliton, 0.0, 2.0).unwrap();
        let solver = FredholmSolver::new(spec, 6.0).unwrap();
        for (t, x) in [(0.3, 0.0), (1.0, 1.5), (1.7, -2.0)] {
            assert!((solve_q(&solver, t, x).unwrap() - heat_kernel(t, x)).abs() < 1e-14);
            assert_eq!(solve_p(&solver, t, x).unwrap(), 0.0);
            assert_eq!(log_det(&solver, t, x).unwrap(), 0.0);
            assert_eq!(solve_w(&solver, t, x).unwrap(), (0.0, 0.0));
            assert!(composite_kernel_q(&solver, t, x).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn first_and_second_expressions_agree() {
        for level in [0.5, 2.0] {
            let solver = FredholmSolver::new(spec_for(level), 4.0).unwrap();
            for (t, x) in [(0.5, 0.0), (1.0, 0.7), (1.6, 1.5)] {
                let slice = solver.at_time(t).unwrap();
                let sys = slice.system(&slice.grid(x).unwrap(), x).unwrap();
                let (q1, q2) = (sys.q().unwrap(), sys.q_mirrored().unwrap());
                let (p1, p2) = (sys.p().unwrap(), sys.p_mirrored().unwrap());
                assert!((q1 - q2).abs() < 1e-9 * q1.abs().max(1.0), "q {q1} {q2}");
                assert!((p1 - p2).abs() < 1e-9 * p1.abs().max(1.0), "p {p1} {p2}");
            }
        }
    }

    #[test]
    fn x_symmetry_of_point_solves() {
        let solver = FredholmSolver::new(spec_for(2.0), 4.0).unwrap();
        for (t, x) in [(0.6, 0.4), (1.2, 1.1)] {
            let a = solve_q(&solver, t, x).unwrap();
            let b = solve_q(&solver, t, -x).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} {b}");
            let a = solve_p(&solver, t, x).unwrap();
            let b = solve_p(&solver, t, -x).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn time_reflection_and_sign_of_p() {
        for level in [0.5, 2.0] {
            let spec = spec_for(level);
            let solver = FredholmSolver::new(spec, 4.0).unwrap();
            for (t, x) in [(0.4, 0.0), (0.9, 0.8)] {
                let p = solve_p(&solver, t, x).unwrap();
                let q_ref = solve_q(&solver, spec.horizon - t, x).unwrap();
                assert!(p > 0.0);
                assert!(
                    (p - spec.gamma * q_ref).abs() < 1e-8 * p.abs(),
                    "{p} vs {}",
                    spec.gamma * q_ref
                );
            }
        }
        let spec = SolutionSpec::new(Branch::NonSoliton, -0.5, 2.0).unwrap();
        let solver = FredholmSolver::new(spec, 4.0).unwrap();
        assert!(solve_p(&solver, 1.0, 0.3).unwrap() < 0.0);
        assert!(solve_q(&solver, 1.0, 0.3).unwrap() > 0.0);
    }

    #[test]
    fn w_from_product_matches_w_from_determinant() {
        for level in [0.5, 2.0] {
            let solver = FredholmSolver::new(spec_for(level), 4.0).unwrap();
            for (t, x) in [(0.3, 0.2), (1.0, 0.0), (1.5, 1.0)] {
                let (a, b) = solve_w(&solver, t, x).unwrap();
                assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn determinant_tends_to_one_far_out() {
        let solver = FredholmSolver::new(spec_for(2.0), 12.0).unwrap();
        let near = log_det(&solver, 1.0, 0.0).unwrap();
        let far = log_det(&solver, 1.0, 11.0).unwrap();
        assert!(near > 0.0);
        assert!(far.abs() < 1e-8 * near);
        let k = composite_kernel_q(&solver, 1.0, 11.0).unwrap();
        assert!(k.norm() < 1e-8 * composite_kernel_q(&solver, 1.0, 0.0).unwrap().norm());
    }

    #[test]
    fn log_det_equals_double_integral_of_w() {
        let solver = FredholmSolver::new(spec_for(2.0), 14.0).unwrap();
        let slice = solver.at_time(1.0).unwrap();
        let xs: Vec<f64> = (0..=560).map(|k| 0.025 * k as f64).collect();
        let ws: Vec<f64> = xs.iter().map(|&x| slice.solve(x).unwrap().w).collect();
        // ∫ₓ^∞ ∫_{y₁}^∞ w = ∫ₓ^∞ (y − x) w(y) dy
        let x0 = 0.5;
        let integrand: Vec<f64> = xs
            .iter()
            .zip(&ws)
            .map(|(&y, &w)| if y >= x0 { (y - x0) * w } else { 0.0 })
            .collect();
        let ident = crate::quad::simpson_uniform(&integrand, 0.025);
        let ld = slice.solve(x0).unwrap().logdet;
        assert!((ident - ld).abs() < 1e-6 * ld.max(1.0), "{ident} vs {ld}");
    }

    #[test]
    fn grid_refinement_is_converged() {
        for level in [0.5, 2.0] {
            let solver = FredholmSolver::new(spec_for(level), 4.0).unwrap();
            let fine = solver.with_grid_params(solver.params().refined());
            for (t, x) in [(0.2, 0.0), (1.0, 0.5), (1.8, 1.0)] {
                let a = solver.at_time(t).unwrap().solve(x).unwrap();
                let b = fine.at_time(t).unwrap().solve(x).unwrap();
                assert!((a.q - b.q).abs() < 1e-8 * a.q.abs(), "q {t} {x}: {} {}", a.q, b.q);
                assert!((a.p - b.p).abs() < 1e-8 * a.p.abs(), "p {t} {x}: {} {}", a.p, b.p);
            }
        }
    }

    #[test]
    fn boundary_layer_is_exact_for_its_model() {
        let f = |t: f64| 3.0 / t.sqrt() + 0.5;
        let got = boundary_layer(0.01, f(0.01), 0.02, f(0.02));
        assert!((got - (6.0 * 0.1 + 0.005)).abs() < 1e-13);
    }
}
