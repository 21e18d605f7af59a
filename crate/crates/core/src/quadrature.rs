//! Gauss-Legendre and trapezoidal quadrature.

use std::sync::OnceLock;

use crate::scalar::Scalar;

/// Number of nodes of the rule used for time-dependent after-default
/// coefficients.
pub const GAUSS_LEGENDRE_NODES: usize = 64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// P_n(x) and P_n'(x)
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(GAUSS_LEGENDRE_NODES))
}

/// Integrates `f` over `[a, b]` with the 64-point Gauss-Legendre rule.
pub fn integrate<S: Scalar>(mut f: impl FnMut(S) -> S, a: S, b: S) -> S {
    if a == b {
        return S::zero();
    }
    let (nodes, weights) = rule64();
    let half = (b - a) / S::lit(2.0);
    let mid = (a + b) / S::lit(2.0);
    let mut acc = S::zero();
    for (x, w) in nodes.iter().zip(weights) {
        acc = acc + S::lit(*w) * f(mid + half * S::lit(*x));
    }
    acc * half
}

/// Trapezoidal rule on a uniform grid of spacing `h`.
pub fn trapezoid_uniform<S: Scalar>(values: &[S], h: S) -> S {
    match values.len() {
        0 | 1 => S::zero(),
        n => {
            let inner = values[1..n - 1].iter().fold(S::zero(), |acc, &v| acc + v);
            h * (inner + (values[0] + values[n - 1]) / S::lit(2.0))
        }
    }
}
