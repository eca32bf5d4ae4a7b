//! One-dimensional Gauss–Legendre rules, composite panels built from them, and
//! the deterministic pairwise reduction used by every sampled integral.

use std::f64::consts::PI;

use num_complex::Complex64;

/// A one-dimensional rule: abscissae with matching weights.
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
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(order: usize) -> Rule1d {
    assert!(order > 0, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    let nf = order as f64;
    for i in 0..m {
        // Tricomi's initial guess
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    Rule1d { nodes, weights }
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=order {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let nf = order as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels of
/// `order` nodes each.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> Rule1d {
    let base = gauss_legendre(order);
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for j in 0..panels {
        let lo = a + j as f64 * width;
        let mid = lo + width / 2.0;
        for (&x, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + x * width / 2.0);
            weights.push(w * width / 2.0);
        }
    }
    Rule1d { nodes, weights }
}

/// How finely oscillatory integrands are resolved: each panel spans at most
/// `max_phase_per_panel` radians of phase and carries `order` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionRule {
    pub order: usize,
    pub max_phase_per_panel: f64,
    pub min_panels: usize,
}

impl Default for ResolutionRule {
    fn default() -> Self {
        // ten nodes per full period
        ResolutionRule {
            order: 10,
            max_phase_per_panel: 2.0 * PI,
            min_panels: 1,
        }
    }
}

impl ResolutionRule {
    /// Number of panels for an interval across which the phase varies by at
    /// most `phase_variation` radians.
    pub fn panels_for(&self, phase_variation: f64) -> usize {
        let need = (phase_variation.abs() / self.max_phase_per_panel).ceil() as usize;
        need.max(self.min_panels).max(1)
    }

    pub fn rule_for(&self, a: f64, b: f64, phase_variation: f64) -> Rule1d {
        composite_gauss(a, b, self.panels_for(phase_variation), self.order)
    }

    /// The same rule with twice as many nodes per panel.
    pub fn refined(&self) -> Self {
        ResolutionRule {
            order: 2 * self.order,
            ..*self
        }
    }
}

/// Pairwise (cascade) summation; the reduction order depends only on the
/// length of the slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_nodes_match_closed_forms() {
        let r = gauss_legendre(2);
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
        let r = gauss_legendre(3);
        assert!((r.nodes[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((r.weights[0] - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for order in [1usize, 4, 9, 20, 64] {
            let r = gauss_legendre(order);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * order {
                let got = r.integrate(|x| x.powi(deg as i32));
                let want = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!(
                    (got - want).abs() < 1e-12,
                    "order {order} deg {deg}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn composite_rule_integrates_oscillation() {
        let rule = ResolutionRule::default();
        let freq = 200.0;
        let r = rule.rule_for(0.0, 1.0, freq);
        let got = r.integrate(|x| (freq * x).cos());
        let want = freq.sin() / freq;
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }
}
