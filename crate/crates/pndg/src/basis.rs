//! Orthonormal Legendre element bases and the L2 and Radau projections.
//!
//! The local space on the reference element `[-1,1]^d` is spanned by
//! orthonormal Legendre polynomials `phi_j` (`d = 1`) or their tensor
//! products (`d = 2`), so the reference mass matrix is the identity. On a
//! physical element the basis is rescaled to stay orthonormal in `L^2`,
//! which keeps global mass matrices diagonal and makes coefficient norms
//! equal to `L^2` norms.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Values of the orthonormal Legendre polynomials
/// `phi_j(x) = sqrt((2j+1)/2) P_j(x)` for `j = 0..=k`.
pub fn orthonormal_legendre(k: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = x;
    }
    for j in 2..=k {
        let jf = j as f64;
        p[j] = ((2.0 * jf - 1.0) * x * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf;
    }
    for (j, v) in p.iter_mut().enumerate() {
        *v *= ((2 * j + 1) as f64 / 2.0).sqrt();
    }
    p
}

/// Values and first derivatives of the orthonormal Legendre polynomials.
pub fn orthonormal_legendre_with_derivative(k: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; k + 1];
    let mut dp = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for j in 2..=k {
        let jf = j as f64;
        p[j] = ((2.0 * jf - 1.0) * x * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf;
        dp[j] = dp[j - 2] + (2.0 * jf - 1.0) * p[j - 1];
    }
    for j in 0..=k {
        let scale = ((2 * j + 1) as f64 / 2.0).sqrt();
        p[j] *= scale;
        dp[j] *= scale;
    }
    (p, dp)
}

/// Tabulated local basis of degree `k` on the reference element `[-1,1]^d`.
///
/// Holds the element quadrature rule (a tensor Gauss-Legendre rule), basis
/// values and reference gradients at the quadrature points, the face rule
/// one dimension down, and basis traces on all element faces. Local
/// functions are indexed `j = jx + (k+1) * jy` for `d = 2`.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    dim: usize,
    k: usize,
    n_local: usize,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    values: Vec<f64>,
    gradients: Vec<f64>,
    face_nodes: Vec<f64>,
    face_weights: Vec<f64>,
    traces: [[Vec<f64>; 2]; 2],
}

impl LocalBasis {
    /// Basis with the default `k + 2`-point rule per axis, exact for
    /// integrands of degree up to `2k + 3` per axis.
    pub fn new(dim: usize, k: usize) -> Result<Self> {
        Self::with_points(dim, k, k + 2)
    }

    /// Basis tabulated on a rule with a custom point count per axis, for
    /// callers that need extra quadrature accuracy on the same space.
    pub fn with_points(dim: usize, k: usize, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("basis dimension must be 1 or 2, got {dim}")));
        }
        if points_per_axis < k + 1 {
            return Err(Error::invalid(
                "quadrature must have at least k + 1 points per axis",
            ));
        }
        let line = GaussLegendre::new(points_per_axis)?;
        let n_1d = line.len();
        let n_local = (k + 1).pow(dim as u32);

        let line_derivs: Vec<(Vec<f64>, Vec<f64>)> = line
            .nodes()
            .iter()
            .map(|&x| orthonormal_legendre_with_derivative(k, x))
            .collect();

        let n_quad = if dim == 1 { n_1d } else { n_1d * n_1d };
        let mut nodes = Vec::with_capacity(n_quad);
        let mut weights = Vec::with_capacity(n_quad);
        let mut values = vec![0.0; n_quad * n_local];
        let mut gradients = vec![0.0; n_quad * n_local * 2];
        for q in 0..n_quad {
            let (qx, qy) = (q % n_1d, q / n_1d);
            let node = if dim == 1 {
                [line.nodes()[qx], 0.0]
            } else {
                [line.nodes()[qx], line.nodes()[qy]]
            };
            nodes.push(node);
            weights.push(if dim == 1 {
                line.weights()[qx]
            } else {
                line.weights()[qx] * line.weights()[qy]
            });
            for j in 0..n_local {
                let (jx, jy) = (j % (k + 1), j / (k + 1));
                let (vx, dx) = (&line_derivs[qx].0, &line_derivs[qx].1);
                if dim == 1 {
                    values[q * n_local + j] = vx[jx];
                    gradients[(q * n_local + j) * 2] = dx[jx];
                } else {
                    let (vy, dy) = (&line_derivs[qy].0, &line_derivs[qy].1);
                    values[q * n_local + j] = vx[jx] * vy[jy];
                    gradients[(q * n_local + j) * 2] = dx[jx] * vy[jy];
                    gradients[(q * n_local + j) * 2 + 1] = vx[jx] * dy[jy];
                }
            }
        }

        let (face_nodes, face_weights) = if dim == 1 {
            (vec![0.0], vec![1.0])
        } else {
            (line.nodes().to_vec(), line.weights().to_vec())
        };
        let endpoint = [orthonormal_legendre(k, -1.0), orthonormal_legendre(k, 1.0)];
        let n_face = face_nodes.len();
        let mut traces: [[Vec<f64>; 2]; 2] = Default::default();
        for axis in 0..dim {
            for side in 0..2 {
                let mut table = vec![0.0; n_face * n_local];
                for (fq, &t) in face_nodes.iter().enumerate() {
                    let along = orthonormal_legendre(k, t);
                    for j in 0..n_local {
                        let (jx, jy) = (j % (k + 1), j / (k + 1));
                        table[fq * n_local + j] = if dim == 1 {
                            endpoint[side][jx]
                        } else if axis == 0 {
                            endpoint[side][jx] * along[jy]
                        } else {
                            along[jx] * endpoint[side][jy]
                        };
                    }
                }
                traces[axis][side] = table;
            }
        }

        Ok(LocalBasis {
            dim,
            k,
            n_local,
            nodes,
            weights,
            values,
            gradients,
            face_nodes,
            face_weights,
            traces,
        })
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Polynomial degree `k`.
    pub fn degree(&self) -> usize {
        self.k
    }

    /// Dimension of the local space, `(k+1)^d`.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Reference quadrature nodes in `[-1,1]^d` (second entry 0 for d = 1).
    pub fn quad_nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Tensor quadrature weights matching [`Self::quad_nodes`].
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Value of local function `j` at quadrature node `q`.
    pub fn value(&self, q: usize, j: usize) -> f64 {
        self.values[q * self.n_local + j]
    }

    /// Reference-coordinate derivative of local function `j` at node `q`.
    pub fn gradient(&self, q: usize, j: usize, axis: usize) -> f64 {
        self.gradients[(q * self.n_local + j) * 2 + axis]
    }

    /// Transverse coordinates of the face quadrature nodes (a single dummy
    /// node for `d = 1`, where faces are points).
    pub fn face_nodes(&self) -> &[f64] {
        &self.face_nodes
    }

    /// Face quadrature weights.
    pub fn face_weights(&self) -> &[f64] {
        &self.face_weights
    }

    /// Trace of local function `j` at face node `fq` on the face where the
    /// coordinate along `axis` is fixed to `-1` (`side = 0`) or `+1`
    /// (`side = 1`).
    pub fn trace(&self, axis: usize, side: usize, fq: usize, j: usize) -> f64 {
        self.traces[axis][side][fq * self.n_local + j]
    }

    /// Values of all local functions at an arbitrary reference point.
    pub fn eval_point(&self, xi: &[f64; 2]) -> Vec<f64> {
        let px = orthonormal_legendre(self.k, xi[0]);
        if self.dim == 1 {
            return px;
        }
        let py = orthonormal_legendre(self.k, xi[1]);
        let mut out = vec![0.0; self.n_local];
        for j in 0..self.n_local {
            out[j] = px[j % (self.k + 1)] * py[j / (self.k + 1)];
        }
        out
    }
}

/// `L^2` projection of `f` onto the local space of a physical element with
/// the given lower corner and axis widths.
///
/// Coefficients refer to the `L^2`-orthonormal physical basis, so the first
/// coefficient of a constant `c` is `c * sqrt(|K|)`.
pub fn l2_project(
    mut f: impl FnMut(&[f64; 2]) -> f64,
    origin: &[f64; 2],
    widths: &[f64; 2],
    basis: &LocalBasis,
) -> Vec<f64> {
    let dim = basis.dim();
    let scale = (0..dim).map(|a| widths[a] / 2.0).product::<f64>().sqrt();
    let mut coeffs = vec![0.0; basis.n_local()];
    for (q, xi) in basis.quad_nodes().iter().enumerate() {
        let mut x = [0.0; 2];
        for a in 0..dim {
            x[a] = origin[a] + 0.5 * (xi[a] + 1.0) * widths[a];
        }
        let wf = basis.quad_weights()[q] * f(&x) * scale;
        for j in 0..basis.n_local() {
            coeffs[j] += wf * basis.value(q, j);
        }
    }
    coeffs
}

/// Endpoint a Radau projection matches exactly; the opposite endpoint of
/// the inflow boundary of the transport direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadauOutflow {
    /// Match the function value at the left endpoint `-1`.
    Left,
    /// Match the function value at the right endpoint `+1`.
    Right,
}

fn radau_rule(k: usize) -> Result<GaussLegendre> {
    GaussLegendre::new((2 * k + 2).max(16))
}

fn radau_from_samples(
    samples: &[f64],
    endpoint_value: f64,
    rule: &GaussLegendre,
    k: usize,
    outflow: RadauOutflow,
) -> Vec<f64> {
    let mut coeffs = vec![0.0; k + 1];
    for ((&x, &w), &fx) in rule.nodes().iter().zip(rule.weights()).zip(samples) {
        let phi = orthonormal_legendre(k, x);
        for j in 0..k {
            coeffs[j] += w * fx * phi[j];
        }
    }
    let s = match outflow {
        RadauOutflow::Left => -1.0,
        RadauOutflow::Right => 1.0,
    };
    let phi_end = orthonormal_legendre(k, s);
    let partial: f64 = (0..k).map(|j| coeffs[j] * phi_end[j]).sum();
    coeffs[k] = (endpoint_value - partial) / phi_end[k];
    coeffs
}

/// Radau projection of `f` on `[-1,1]` onto polynomials of degree `k >= 1`.
///
/// The result `R f` satisfies `(f - R f, v) = 0` for every `v` of degree at
/// most `k - 1` and matches `f` exactly at the outflow endpoint. Returned
/// coefficients refer to the orthonormal Legendre basis.
pub fn radau_project(
    mut f: impl FnMut(f64) -> f64,
    k: usize,
    outflow: RadauOutflow,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid(
            "radau projection requires k >= 1; use the L2 projection for k = 0",
        ));
    }
    let rule = radau_rule(k)?;
    let samples: Vec<f64> = rule.nodes().iter().map(|&x| f(x)).collect();
    let s = match outflow {
        RadauOutflow::Left => -1.0,
        RadauOutflow::Right => 1.0,
    };
    Ok(radau_from_samples(&samples, f(s), &rule, k, outflow))
}

/// Tensor Radau projection `R_1 (x) R_2` of `f` on `[-1,1]^2` onto tensor
/// polynomials of degree `k >= 1` per axis.
///
/// Coefficients refer to the orthonormal tensor Legendre basis with index
/// `j = jx + (k+1) * jy`. The two axis projections commute, so the
/// application order does not matter.
pub fn tensor_radau_project(
    mut f: impl FnMut(f64, f64) -> f64,
    k: usize,
    outflow: [RadauOutflow; 2],
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid(
            "radau projection requires k >= 1; use the L2 projection for k = 0",
        ));
    }
    let rule = radau_rule(k)?;
    let sy = match outflow[1] {
        RadauOutflow::Left => -1.0,
        RadauOutflow::Right => 1.0,
    };
    // x-projection coefficients as functions of y, sampled at the y-rule
    // nodes and at the y-outflow endpoint.
    let mut project_x = |y: f64| -> Result<Vec<f64>> {
        radau_project(|x| f(x, y), k, outflow[0])
    };
    let per_node: Vec<Vec<f64>> = rule
        .nodes()
        .to_vec()
        .iter()
        .map(|&y| project_x(y))
        .collect::<Result<_>>()?;
    let at_end = project_x(sy)?;

    let mut coeffs = vec![0.0; (k + 1) * (k + 1)];
    let mut samples = vec![0.0; rule.len()];
    for jx in 0..=k {
        for (q, row) in per_node.iter().enumerate() {
            samples[q] = row[jx];
        }
        let cy = radau_from_samples(&samples, at_end[jx], &rule, k, outflow[1]);
        for (jy, &c) in cy.iter().enumerate() {
            coeffs[jx + (k + 1) * jy] = c;
        }
    }
    Ok(coeffs)
}

/// Evaluates a polynomial given by orthonormal Legendre coefficients.
pub fn eval_legendre_series(coeffs: &[f64], x: f64) -> f64 {
    let phi = orthonormal_legendre(coeffs.len() - 1, x);
    coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_mass_matrix_is_identity() {
        for dim in 1..=2 {
            for k in 0..=3 {
                let basis = LocalBasis::new(dim, k).unwrap();
                for i in 0..basis.n_local() {
                    for j in 0..basis.n_local() {
                        let entry: f64 = (0..basis.quad_nodes().len())
                            .map(|q| basis.quad_weights()[q] * basis.value(q, i) * basis.value(q, j))
                            .sum();
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (entry - expected).abs() < 1e-12,
                            "dim = {dim}, k = {k}, ({i},{j}): {entry}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn element_quadrature_exact_to_degree_2k_plus_3() {
        for k in 0..=3 {
            let basis = LocalBasis::new(1, k).unwrap();
            let degree = 2 * k + 3;
            let value: f64 = (0..basis.quad_nodes().len())
                .map(|q| basis.quad_weights()[q] * basis.quad_nodes()[q][0].powi(degree as i32))
                .sum();
            assert!(value.abs() < 1e-13, "k = {k}: odd power {value}");
            let even = degree - 1;
            let value: f64 = (0..basis.quad_nodes().len())
                .map(|q| basis.quad_weights()[q] * basis.quad_nodes()[q][0].powi(even as i32))
                .sum();
            assert_relative_eq!(value, 2.0 / (even as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn gradients_match_difference_quotients() {
        let basis = LocalBasis::new(2, 2).unwrap();
        let eps = 1e-6;
        for q in 0..basis.quad_nodes().len() {
            let xi = basis.quad_nodes()[q];
            for j in 0..basis.n_local() {
                for axis in 0..2 {
                    let mut plus = xi;
                    let mut minus = xi;
                    plus[axis] += eps;
                    minus[axis] -= eps;
                    let fd = (basis.eval_point(&plus)[j] - basis.eval_point(&minus)[j]) / (2.0 * eps);
                    assert_relative_eq!(basis.gradient(q, j, axis), fd, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn traces_match_point_evaluation() {
        let basis = LocalBasis::new(2, 2).unwrap();
        for axis in 0..2 {
            for side in 0..2 {
                let fixed = if side == 0 { -1.0 } else { 1.0 };
                for (fq, &t) in basis.face_nodes().iter().enumerate() {
                    let xi = if axis == 0 { [fixed, t] } else { [t, fixed] };
                    let point = basis.eval_point(&xi);
                    for j in 0..basis.n_local() {
                        assert_relative_eq!(
                            basis.trace(axis, side, fq, j),
                            point[j],
                            epsilon = 1e-13
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn l2_projection_of_constant_and_reproduction() {
        let basis = LocalBasis::new(1, 2).unwrap();
        let coeffs = l2_project(|_| 3.0, &[0.25, 0.0], &[0.125, 1.0], &basis);
        assert_relative_eq!(coeffs[0], 3.0 * 0.125f64.sqrt(), max_relative = 1e-14);
        assert!(coeffs[1].abs() < 1e-14 && coeffs[2].abs() < 1e-14);

        // A degree-k polynomial is reproduced exactly: project, evaluate,
        // re-project, and compare.
        let f = |x: &[f64; 2]| 1.0 + 2.0 * x[0] + 0.5 * x[0] * x[0];
        let origin = [0.5, 0.0];
        let widths = [0.25, 1.0];
        let coeffs = l2_project(f, &origin, &widths, &basis);
        let scale = (widths[0] / 2.0).sqrt();
        for sample in [0.55, 0.6, 0.7] {
            let xi = 2.0 * (sample - origin[0]) / widths[0] - 1.0;
            let value = eval_legendre_series(&coeffs, xi) / scale;
            assert_relative_eq!(value, f(&[sample, 0.0]), max_relative = 1e-13);
        }
    }

    #[test]
    fn l2_projection_error_decays_at_k_plus_one() {
        let k = 2;
        let basis = LocalBasis::new(1, k).unwrap();
        let fine = GaussLegendre::new(20).unwrap();
        let f = |x: f64| (std::f64::consts::TAU * x).sin();
        let mut errors = Vec::new();
        let mut widths = Vec::new();
        for level in 0..4 {
            let n = 8 << level;
            let h = 1.0 / n as f64;
            let mut err_sq = 0.0;
            for e in 0..n {
                let origin = [e as f64 * h, 0.0];
                let coeffs = l2_project(|x| f(x[0]), &origin, &[h, 1.0], &basis);
                let scale = (h / 2.0).sqrt();
                err_sq += fine.integrate(|xi| {
                    let x = origin[0] + 0.5 * (xi + 1.0) * h;
                    let p = eval_legendre_series(&coeffs, xi) / scale;
                    (f(x) - p) * (f(x) - p)
                }) * h
                    / 2.0;
            }
            errors.push(err_sq.sqrt());
            widths.push(h);
        }
        for i in 0..errors.len() - 1 {
            let rate = (errors[i] / errors[i + 1]).ln() / (widths[i] / widths[i + 1]).ln();
            assert!(
                (rate - (k as f64 + 1.0)).abs() < 0.1,
                "rate {rate} at level {i}"
            );
        }
    }

    #[test]
    fn radau_projection_of_square() {
        let coeffs = radau_project(|x| x * x, 1, RadauOutflow::Right).unwrap();
        // The two conditions pin R f = 1/3 + (2/3) x: mean orthogonality
        // gives the constant, the endpoint match the slope.
        let c0 = 1.0 / 3.0 * 2.0f64.sqrt();
        let c1 = 2.0 / 3.0 * (2.0 / 3.0f64).sqrt();
        assert_relative_eq!(coeffs[0], c0, max_relative = 1e-13);
        assert_relative_eq!(coeffs[1], c1, max_relative = 1e-13);
        assert_relative_eq!(eval_legendre_series(&coeffs, 1.0), 1.0, max_relative = 1e-13);

        let mirror = radau_project(|x| x * x, 1, RadauOutflow::Left).unwrap();
        assert_relative_eq!(mirror[0], c0, max_relative = 1e-13);
        assert_relative_eq!(mirror[1], -c1, max_relative = 1e-13);
        assert_relative_eq!(eval_legendre_series(&mirror, -1.0), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn radau_reproduces_polynomials_and_is_idempotent() {
        for k in 1..=3 {
            for outflow in [RadauOutflow::Left, RadauOutflow::Right] {
                let f = |x: f64| {
                    (0..=k).map(|j| (j as f64 + 0.5) * x.powi(j as i32)).sum::<f64>()
                };
                let coeffs = radau_project(f, k, outflow).unwrap();
                for x in [-0.9, -0.3, 0.2, 0.8] {
                    assert_relative_eq!(
                        eval_legendre_series(&coeffs, x),
                        f(x),
                        max_relative = 1e-12
                    );
                }
                let again =
                    radau_project(|x| eval_legendre_series(&coeffs, x), k, outflow).unwrap();
                for (a, b) in coeffs.iter().zip(&again) {
                    assert!((a - b).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn radau_rejects_k_zero() {
        assert!(radau_project(|x| x, 0, RadauOutflow::Right).is_err());
        assert!(tensor_radau_project(|x, _| x, 0, [RadauOutflow::Right; 2]).is_err());
    }

    #[test]
    fn tensor_radau_separates_and_commutes() {
        let outflows = [
            [RadauOutflow::Right, RadauOutflow::Right],
            [RadauOutflow::Left, RadauOutflow::Right],
            [RadauOutflow::Right, RadauOutflow::Left],
            [RadauOutflow::Left, RadauOutflow::Left],
        ];
        for outflow in outflows {
            let coeffs = tensor_radau_project(|x, y| x * x * y * y, 1, outflow).unwrap();
            // Separable data factors into the two 1D projections.
            let cx = radau_project(|x| x * x, 1, outflow[0]).unwrap();
            let cy = radau_project(|y| y * y, 1, outflow[1]).unwrap();
            for jx in 0..2 {
                for jy in 0..2 {
                    assert_relative_eq!(
                        coeffs[jx + 2 * jy],
                        cx[jx] * cy[jy],
                        epsilon = 1e-13
                    );
                }
            }
            // Swapping the application order leaves the result unchanged.
            let swapped = tensor_radau_project(
                |y, x| x * x * y * y,
                1,
                [outflow[1], outflow[0]],
            )
            .unwrap();
            for jx in 0..2 {
                for jy in 0..2 {
                    assert!((coeffs[jx + 2 * jy] - swapped[jy + 2 * jx]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn tensor_radau_reproduces_tensor_polynomials() {
        let k = 2;
        let f = |x: f64, y: f64| (1.0 + x + x * x) * (2.0 - y + 0.5 * y * y);
        let coeffs = tensor_radau_project(f, k, [RadauOutflow::Right, RadauOutflow::Left]).unwrap();
        let basis = LocalBasis::new(2, k).unwrap();
        for xi in [[-0.7, 0.4], [0.1, -0.9], [0.8, 0.8]] {
            let phi = basis.eval_point(&xi);
            let value: f64 = coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum();
            assert_relative_eq!(value, f(xi[0], xi[1]), max_relative = 1e-12);
        }
    }
}
