//! Gauss–Legendre quadrature.

use std::sync::OnceLock;

/// Default node count for integrals of operands without closed-form antiderivatives.
pub const DEFAULT_NODES: usize = 64;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// computed by Newton iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let pnm1 = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
    (pn, d)
}

/// Cached default rule.
pub fn default_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(DEFAULT_NODES))
}

/// Nodes and weights of the default rule mapped to [a, b].
pub fn mapped_rule(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (z, w) = default_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    z.iter().zip(w.iter()).map(move |(&z, &w)| (mid + half * z, half * w))
}

/// Integrate `f` over [a, b] with the default rule.
pub fn integrate(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    mapped_rule(a, b).map(|(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules_match_closed_form() {
        let (z, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((z[0] + r).abs() < 1e-15 && (z[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        let (z, w) = gauss_legendre(3);
        assert!((z[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_127() {
        for p in [0, 1, 2, 7, 30, 100, 126] {
            let got = integrate(-1.0, 1.0, |x| x.powi(p));
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "degree {p}: {got} vs {exact}");
        }
        assert!((integrate(-2.0, 3.0, |_| 1.0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 5, 64, 200] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }
}
