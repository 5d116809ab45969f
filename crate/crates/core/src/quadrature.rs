//! One-dimensional rules, tensor-product helpers and compensated summation.

use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.total()
    }
}

/// Gauss–Legendre rule with `n` points on `[-1, 1]`.
///
/// Roots of `P_n` are found by Newton iteration from the Tricomi initial
/// guess; weights are `2 / ((1 - x^2) P_n'(x)^2)`.
pub fn gauss_legendre(n: usize) -> Rule1d {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule1d { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels of
/// `order` points each.
pub fn composite_gauss_legendre(a: f64, b: f64, order: usize, panels: usize) -> Rule1d {
    let base = gauss_legendre(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (&x, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + 0.5 * h * x);
            weights.push(0.5 * h * w);
        }
    }
    Rule1d { nodes, weights }
}

/// Trapezoidal rule with `points` equispaced samples on `[-radius, radius]`.
pub fn trapezoid(radius: f64, points: usize) -> Rule1d {
    assert!(points >= 2);
    let h = 2.0 * radius / (points - 1) as f64;
    let nodes: Vec<f64> = (0..points).map(|i| -radius + i as f64 * h).collect();
    let mut weights = vec![h; points];
    weights[0] = 0.5 * h;
    weights[points - 1] = 0.5 * h;
    Rule1d { nodes, weights }
}

/// Decodes a flat index into a multi-index over `dims` axes of length `len`
/// (last axis fastest).
pub fn unravel(mut flat: usize, len: usize, dims: usize, out: &mut [usize]) {
    for d in (0..dims).rev() {
        out[d] = flat % len;
        flat /= len;
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_rules_match_tables() {
        let r = gauss_legendre(2);
        assert_abs_diff_eq!(r.nodes[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[0], 1.0, epsilon = 1e-15);
        let r = gauss_legendre(3);
        assert_abs_diff_eq!(r.nodes[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [1usize, 4, 17, 64, 128] {
            let r = gauss_legendre(n);
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            let deg = 2 * n - 2;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert_abs_diff_eq!(r.integrate(|x| x.powi(deg as i32)), exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_rule_integrates_oscillation() {
        // int_0^1 cos(40 pi x) dx = 0, int_0^1 x cos(40 pi x) dx = 0
        let r = composite_gauss_legendre(0.0, 1.0, 16, 8);
        assert_abs_diff_eq!(r.integrate(|x| (40.0 * PI * x).cos()), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.integrate(|x| x.exp()), 1f64.exp() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
