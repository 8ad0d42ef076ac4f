//! Large-`N` fields of the scaled soliton problem against the closed-form
//! envelopes.

use wnt_core::asymptotics::{compare_asymptotics, corollary_envelope, CompareOptions, DEFAULT_TAU_THRESHOLD};
use wnt_core::fredholm::{field_grid, FieldGrid, FieldOptions, FredholmSolver};
use wnt_core::rate::{solve_gamma_scaled, ScaledProblem, SolutionSpec};

fn fields(n: f64, ts: &[f64], xs: &[f64]) -> (ScaledProblem, FieldGrid) {
    let scaled = solve_gamma_scaled(n, 1.0).unwrap();
    let solver = FredholmSolver::new(SolutionSpec::from_scaled(&scaled).unwrap(), 8.0).unwrap();
    let grid = field_grid(&solver, ts, xs, FieldOptions::default()).unwrap();
    (scaled, grid)
}

#[test]
fn plateau_point_lies_within_the_envelope() {
    for n in [6.0, 8.0, 10.0] {
        let (scaled, grid) = fields(n, &[n], &[0.0]);
        let table = compare_asymptotics(&scaled, &grid, CompareOptions::default()).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].max_ratio() <= 5.0, "N = {n}: {:?}", table.rows[0]);
    }
}

#[test]
fn deviation_decays_with_distance_from_the_ends() {
    let n = 8.0;
    let xs: Vec<f64> = (-8..=8).map(|k| 0.25 * k as f64).collect();
    let (scaled, grid) = fields(n, &[0.4 * n, 0.8 * n], &xs);
    let dev = |i: usize| {
        xs.iter()
            .enumerate()
            .map(|(j, &x)| {
                let env = corollary_envelope(&scaled, grid.ts[i], x, DEFAULT_TAU_THRESHOLD).unwrap();
                (grid.w[i][j] - env.w_main).abs()
            })
            .fold(0.0, f64::max)
    };
    assert!(dev(1) < dev(0), "τ = 0.8N: {}, τ = 0.4N: {}", dev(1), dev(0));
}

#[test]
fn fitted_envelope_constants_are_moderate_and_stable() {
    let mut constants = Vec::new();
    for n in [6.0, 8.0, 10.0] {
        let ts: Vec<f64> = (1..20).map(|k| 0.1 * k as f64 * n).collect();
        let xs: Vec<f64> = (-12..=12).map(|k| 0.5 * k as f64).collect();
        let (scaled, grid) = fields(n, &ts, &xs);
        let table = compare_asymptotics(&scaled, &grid, CompareOptions::default()).unwrap();
        assert!(!table.rows.is_empty());
        assert_eq!(table.within_fraction, 1.0, "N = {n}");
        constants.push(table.fitted_constant);
    }
    assert!(constants.iter().all(|&c| c < 10.0), "{constants:?}");
    let (lo, hi) = constants
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi / lo < 2.0, "{constants:?}");
}

#[test]
fn centre_of_w_approaches_the_soliton() {
    let mut prev = f64::INFINITY;
    for n in [6.0, 8.0, 10.0] {
        let (scaled, grid) = fields(n, &[n], &[0.0]);
        let gb = scaled.gamma_bar;
        let err = (grid.w[0][0] / gb - 1.0).abs();
        assert!(err < prev);
        assert!(err <= 5.0 * n.sqrt() * (-0.5 * gb * n).exp());
        prev = err;
    }
}
