//! Gauss-Legendre quadrature on the reference interval `[-1, 1]`.

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// The rule integrates polynomials up to degree `2n - 1` exactly. Nodes are
/// stored in increasing order and the weights sum to 2 up to roundoff.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre
    /// polynomial `P_n`, starting from Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("quadrature rule needs at least one node"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        Ok(GaussLegendre { nodes, weights })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True only for the (unconstructible) empty rule; present for API
    /// completeness.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`Self::nodes`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule to `f` on `[-1, 1]`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p_next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..40 {
            let rule = GaussLegendre::new(n).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 2.0).abs() < 1e-14, "n = {n}: sum = {total}");
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        for n in 1..20 {
            let rule = GaussLegendre::new(n).unwrap();
            let nodes = rule.nodes();
            for i in 1..n {
                assert!(nodes[i] > nodes[i - 1]);
            }
            for i in 0..n {
                assert!((nodes[i] + nodes[n - 1 - i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..12 {
            let rule = GaussLegendre::new(n).unwrap();
            for degree in 0..2 * n {
                let value = rule.integrate(|x| x.powi(degree as i32));
                let exact = if degree % 2 == 0 {
                    2.0 / (degree as f64 + 1.0)
                } else {
                    0.0
                };
                assert!(
                    (value - exact).abs() < 1e-13,
                    "n = {n}, degree = {degree}: {value} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn converges_on_smooth_non_polynomial() {
        let rule = GaussLegendre::new(20).unwrap();
        let value = rule.integrate(f64::sin);
        assert!(value.abs() < 1e-15);
        let value = rule.integrate(f64::exp);
        let exact = std::f64::consts::E - (-1.0f64).exp();
        assert!((value - exact).abs() < 1e-14);
    }

    #[test]
    fn zero_nodes_is_rejected() {
        assert!(GaussLegendre::new(0).is_err());
    }
}
