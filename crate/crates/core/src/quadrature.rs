//! Gauss-Legendre rules on `[0, 1]`.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order`-point rule mapped to `[0, 1]`; exact for polynomials of degree
    /// up to `2 order - 1`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            // Roots come in +/- pairs; map [-1, 1] onto [0, 1].
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let r = GaussLegendre::new(2);
        let s = 0.5 / 3f64.sqrt();
        assert!((r.nodes[0] - (0.5 - s)).abs() < 1e-15);
        assert!((r.nodes[1] - (0.5 + s)).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn odd_order_has_midpoint() {
        let r = GaussLegendre::new(5);
        assert!((r.nodes[2] - 0.5).abs() < 1e-15);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exact_for_polynomials() {
        for order in [1, 2, 3, 8, 16, 32] {
            let r = GaussLegendre::new(order);
            for deg in 0..(2 * order) {
                let got = r.integrate(|t| t.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-14, "order {order} degree {deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn converges_on_analytic_integrand() {
        let r = GaussLegendre::new(16);
        let got = r.integrate(|t| (3.0 * t).exp());
        let want = ((3.0f64).exp() - 1.0) / 3.0;
        assert!((got - want).abs() < 1e-14 * want);
    }
}
