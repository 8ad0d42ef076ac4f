//! Quadrature rules: Gauss–Legendre (single and composite) and tanh-sinh.

use std::f64::consts::{FRAC_PI_2, PI};

/// A quadrature rule as parallel node and weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Apply the rule to a real integrand.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre rule with `n` nodes on `[-1, 1]`.
///
/// Nodes are found by Newton iteration on the three-term recurrence, starting
/// from the Tricomi approximation; accurate to a few ulps for `n` up to several
/// hundred.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule: `base` (defined on `[-1, 1]`) mapped onto each panel
/// `[edges[k], edges[k+1]]`.
pub fn composite(edges: &[f64], base: &Rule) -> Rule {
    let panels = edges.len().saturating_sub(1);
    let mut nodes = Vec::with_capacity(panels * base.len());
    let mut weights = Vec::with_capacity(panels * base.len());
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    Rule { nodes, weights }
}

/// Tanh-sinh rule with `2m + 1` nodes on `[a, b]`.
///
/// The abscissae are generated from their distances to the nearer endpoint, so
/// integrands with integrable endpoint singularities (such as a logarithm) are
/// sampled without cancellation.
pub fn tanh_sinh(m: usize, a: f64, b: f64) -> Rule {
    const T_MAX: f64 = 4.0;
    let h = T_MAX / m as f64;
    let half = 0.5 * (b - a);
    let mut nodes = Vec::with_capacity(2 * m + 1);
    let mut weights = Vec::with_capacity(2 * m + 1);
    for k in -(m as i64)..=(m as i64) {
        let tau = k as f64 * h;
        let u = FRAC_PI_2 * tau.sinh();
        let cosh_u = u.cosh();
        // 1 - tanh|u| = 2 / (1 + e^{2|u|}), the distance to the nearer endpoint over `half`.
        let gap = 2.0 / (1.0 + (2.0 * u.abs()).exp());
        let w = half * h * FRAC_PI_2 * tau.cosh() / (cosh_u * cosh_u);
        if w == 0.0 || gap == 0.0 {
            continue;
        }
        let x = if u < 0.0 { a + half * gap } else { b - half * gap };
        nodes.push(x);
        weights.push(w);
    }
    Rule { nodes, weights }
}

/// Composite Simpson rule for samples on a uniform grid with spacing `h`;
/// a trailing odd interval is closed with the trapezoid rule.
pub fn simpson_uniform(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let pairs = (n - 1) / 2;
    let mut acc = 0.0;
    for k in 0..pairs {
        acc += f[2 * k] + 4.0 * f[2 * k + 1] + f[2 * k + 2];
    }
    acc *= h / 3.0;
    if (n - 1) % 2 == 1 {
        acc += 0.5 * h * (f[n - 2] + f[n - 1]);
    }
    acc
}

/// Barycentric Lagrange interpolation on an equispaced table.
///
/// Evaluates the degree-15 interpolant through the 16 table entries centred on
/// `s`, where entry `j` sits at `origin + j * step`. Points outside the table
/// return `None`.
pub fn equispaced_interp(values: &[f64], origin: f64, step: f64, s: f64) -> Option<f64> {
    const W: [f64; 16] = binomial_weights();
    let pos = (s - origin) / step;
    let j0 = pos.floor() as i64 - 7;
    if j0 < 0 || (j0 + 16) as usize > values.len() {
        return None;
    }
    let j0 = j0 as usize;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &wi) in W.iter().enumerate() {
        let d = pos - (j0 + i) as f64;
        if d == 0.0 {
            return Some(values[j0 + i]);
        }
        let c = wi / d;
        num += c * values[j0 + i];
        den += c;
    }
    Some(num / den)
}

/// Interpolate two tables sharing the same abscissae in one pass.
pub fn equispaced_interp2(a: &[f64], b: &[f64], origin: f64, step: f64, s: f64) -> Option<(f64, f64)> {
    const W: [f64; 16] = binomial_weights();
    let pos = (s - origin) / step;
    let j0 = pos.floor() as i64 - 7;
    if j0 < 0 || (j0 + 16) as usize > a.len().min(b.len()) {
        return None;
    }
    let j0 = j0 as usize;
    let (mut na, mut nb, mut den) = (0.0, 0.0, 0.0);
    for (i, &wi) in W.iter().enumerate() {
        let d = pos - (j0 + i) as f64;
        if d == 0.0 {
            return Some((a[j0 + i], b[j0 + i]));
        }
        let c = wi / d;
        na += c * a[j0 + i];
        nb += c * b[j0 + i];
        den += c;
    }
    Some((na / den, nb / den))
}

const fn binomial_weights() -> [f64; 16] {
    let mut w = [0.0; 16];
    let mut c = 1.0;
    let mut i = 0;
    while i < 16 {
        w[i] = if i % 2 == 0 { c } else { -c };
        c = c * (15 - i) as f64 / (i + 1) as f64;
        i += 1;
    }
    w
}
