//! Real spherical harmonics, sphere quadrature, and the P_N moment matrices.
//!
//! The moment basis collects the real-valued normalized harmonics
//! `m_l^kappa(omega) = alpha_l^kappa * P_l^|kappa|(mu) * T^kappa(phi)` of
//! degree `l <= N`, where `mu = omega_3` is the polar cosine, `phi` the
//! azimuth, `P_l^k` the associated Legendre functions without the
//! Condon-Shortley phase, and
//!
//! - `T^kappa(phi) = sqrt(2) * cos(kappa * phi)` for `kappa > 0`,
//! - `T^0(phi) = 1`,
//! - `T^kappa(phi) = sqrt(2) * sin(|kappa| * phi)` for `kappa < 0`.
//!
//! The normalization `alpha_l^kappa = sqrt((2l+1)/(4 pi) *
//! (l-|kappa|)!/(l+|kappa|)!)` makes the basis orthonormal,
//! `<m m^T> = I`, with `<.>` the integral over the unit sphere.
//!
//! The flux matrices `A^(i) = <omega_i m m^T>` are symmetric, have spectral
//! norm at most 1, and couple only neighbouring degrees. Their spectral
//! factorizations `A = Q Lambda Q^T` define the matrix absolute values
//! `|A| = Q |Lambda| Q^T` used by the upwind flux.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Tolerance below which assembled matrix entries are snapped to exact zero,
/// enforcing the analytic sparsity pattern.
pub const ZERO_SNAP: f64 = 1e-13;

/// Real spherical-harmonic basis truncated at degree `N`.
///
/// Components are indexed degree-major with the order `kappa` ascending from
/// `-l` to `l` inside each degree, so the flat index of `(l, kappa)` is
/// `l^2 + l + kappa` and the total count is `L = (N+1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentBasis {
    n: usize,
    l: usize,
}

impl MomentBasis {
    /// Creates the basis of all harmonics with degree at most `n`.
    pub fn new(n: usize) -> Self {
        MomentBasis {
            n,
            l: (n + 1) * (n + 1),
        }
    }

    /// Truncation degree `N`.
    pub fn order(&self) -> usize {
        self.n
    }

    /// Number of moments `L = (N+1)^2`.
    pub fn len(&self) -> usize {
        self.l
    }

    /// True only for an empty basis, which cannot be constructed.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of the harmonic of degree `l` and order `kappa`.
    pub fn flat_index(&self, l: usize, kappa: i64) -> Result<usize> {
        if l > self.n || kappa.unsigned_abs() as usize > l {
            return Err(Error::invalid(format!(
                "harmonic (l = {l}, kappa = {kappa}) outside basis with N = {}",
                self.n
            )));
        }
        Ok(((l * l + l) as i64 + kappa) as usize)
    }

    /// Degree and order of the harmonic at a flat index.
    pub fn degree_order(&self, index: usize) -> Result<(usize, i64)> {
        if index >= self.l {
            return Err(Error::invalid(format!(
                "moment index {index} outside basis of size {}",
                self.l
            )));
        }
        let l = (index as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
        let kappa = index as i64 - (l * l + l) as i64;
        Ok((l, kappa))
    }

    /// Evaluates all basis harmonics at a unit direction, in flat order.
    pub fn eval(&self, omega: &[f64; 3]) -> Result<Vec<f64>> {
        let norm = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "direction must be a unit vector, got norm {norm:.17e}"
            )));
        }
        let mu = omega[2];
        let sin_theta = omega[0].hypot(omega[1]);
        let phi = omega[1].atan2(omega[0]);

        let plm = associated_legendre_table(self.n, mu, sin_theta);
        let mut values = vec![0.0; self.l];
        for l in 0..=self.n {
            for kappa in -(l as i64)..=(l as i64) {
                let k = kappa.unsigned_abs() as usize;
                let angular = match kappa.signum() {
                    1 => std::f64::consts::SQRT_2 * (k as f64 * phi).cos(),
                    -1 => std::f64::consts::SQRT_2 * (k as f64 * phi).sin(),
                    _ => 1.0,
                };
                let idx = (l * l + l) as i64 + kappa;
                values[idx as usize] = normalization(l, k) * plm[l][k] * angular;
            }
        }
        Ok(values)
    }
}

/// `alpha_l^k = sqrt((2l+1)/(4 pi) * (l-k)!/(l+k)!)` for `k = |kappa|`.
fn normalization(l: usize, k: usize) -> f64 {
    let mut ratio = 1.0;
    for j in (l - k + 1)..=(l + k) {
        ratio /= j as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}

/// Table `plm[l][k] = P_l^k(mu)` for `k <= l <= n`, without the
/// Condon-Shortley phase, filled by the stable upward recurrence in `l`.
fn associated_legendre_table(n: usize, mu: f64, sin_theta: f64) -> Vec<Vec<f64>> {
    let mut plm: Vec<Vec<f64>> = (0..=n).map(|l| vec![0.0; l + 1]).collect();
    plm[0][0] = 1.0;
    for k in 1..=n {
        plm[k][k] = (2 * k - 1) as f64 * sin_theta * plm[k - 1][k - 1];
    }
    for k in 0..n {
        plm[k + 1][k] = (2 * k + 1) as f64 * mu * plm[k][k];
        for l in (k + 2)..=n {
            plm[l][k] = ((2 * l - 1) as f64 * mu * plm[l - 1][k]
                - (l - 1 + k) as f64 * plm[l - 2][k])
                / (l - k) as f64;
        }
    }
    plm
}

/// Product quadrature on the unit sphere: Gauss-Legendre in the polar cosine
/// times a uniform rule in the azimuth.
///
/// Built for truncation degree `N`, the rule integrates all spherical
/// polynomials of degree at most `2N + 2` exactly and its weights sum to
/// `4 pi`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    /// Quadrature nodes on the unit sphere.
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Positive weights matching [`Self::nodes`], summing to `4 pi`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True if the rule has no nodes; never the case after construction.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f(omega)`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64; 3]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(omega, &w)| w * f(omega))
            .sum()
    }
}

/// Builds the product rule for truncation degree `n`: `n + 2` Gauss-Legendre
/// points in the polar cosine and `2n + 3` uniform azimuthal points.
pub fn sphere_quadrature(n: usize) -> Result<SphereQuadrature> {
    let n_mu = n + 2;
    let n_phi = 2 * n + 3;
    let gauss = GaussLegendre::new(n_mu)?;
    let phi_weight = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_mu * n_phi);
    let mut weights = Vec::with_capacity(n_mu * n_phi);
    for (&mu, &w_mu) in gauss.nodes().iter().zip(gauss.weights()) {
        let sin_theta = (1.0 - mu * mu).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            nodes.push([sin_theta * phi.cos(), sin_theta * phi.sin(), mu]);
            weights.push(w_mu * phi_weight);
        }
    }
    Ok(SphereQuadrature { nodes, weights })
}

/// The flux matrices `A^(i) = <omega_i m m^T>`, their spectral
/// factorizations, and the matrix absolute values `|A^(i)|`.
#[derive(Debug, Clone)]
pub struct MomentMatrices {
    basis: MomentBasis,
    a: [DMatrix<f64>; 3],
    abs_a: [DMatrix<f64>; 3],
    eigenvectors: [DMatrix<f64>; 3],
    eigenvalues: [DVector<f64>; 3],
}

impl MomentMatrices {
    /// The moment basis the matrices were built for.
    pub fn basis(&self) -> &MomentBasis {
        &self.basis
    }

    /// Flux matrix `A^(i)` for coordinate `i` in `{0, 1, 2}`.
    pub fn a(&self, i: usize) -> &DMatrix<f64> {
        &self.a[i]
    }

    /// Matrix absolute value `|A^(i)| = Q |Lambda| Q^T`.
    pub fn abs_a(&self, i: usize) -> &DMatrix<f64> {
        &self.abs_a[i]
    }

    /// Orthogonal eigenvector matrix of `A^(i)`.
    pub fn eigenvectors(&self, i: usize) -> &DMatrix<f64> {
        &self.eigenvectors[i]
    }

    /// Eigenvalues of `A^(i)`, all within `[-1, 1]`.
    pub fn eigenvalues(&self, i: usize) -> &DVector<f64> {
        &self.eigenvalues[i]
    }

    /// Spectral norm of `A^(i)`.
    pub fn spectral_norm(&self, i: usize) -> f64 {
        self.eigenvalues[i].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Builds the moment matrices for a basis by sphere quadrature.
///
/// Entries with magnitude below [`ZERO_SNAP`] are set to exact zero, which
/// recovers the analytic block-tridiagonal sparsity in the degree.
pub fn moment_matrices(basis: &MomentBasis) -> Result<MomentMatrices> {
    let l = basis.len();
    let quad = sphere_quadrature(basis.order())?;
    let mut a = [
        DMatrix::zeros(l, l),
        DMatrix::zeros(l, l),
        DMatrix::zeros(l, l),
    ];
    for (omega, &w) in quad.nodes().iter().zip(quad.weights()) {
        let m = basis.eval(omega)?;
        for i in 0..3 {
            let wi = w * omega[i];
            if wi == 0.0 {
                continue;
            }
            let ai = &mut a[i];
            for p in 0..l {
                let wmp = wi * m[p];
                for q in 0..l {
                    ai[(p, q)] += wmp * m[q];
                }
            }
        }
    }

    let mut abs_a = Vec::with_capacity(3);
    let mut eigenvectors = Vec::with_capacity(3);
    let mut eigenvalues = Vec::with_capacity(3);
    for ai in a.iter_mut() {
        symmetrize_and_snap(ai);
        let eig = nalgebra::SymmetricEigen::new(ai.clone());
        let mut abs = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::abs))
            * eig.eigenvectors.transpose();
        symmetrize_and_snap(&mut abs);
        abs_a.push(abs);
        eigenvectors.push(eig.eigenvectors);
        eigenvalues.push(eig.eigenvalues);
    }

    Ok(MomentMatrices {
        basis: *basis,
        a,
        abs_a: abs_a
            .try_into()
            .map_err(|_| Error::Internal("matrix triple construction".into()))?,
        eigenvectors: eigenvectors
            .try_into()
            .map_err(|_| Error::Internal("matrix triple construction".into()))?,
        eigenvalues: eigenvalues
            .try_into()
            .map_err(|_| Error::Internal("matrix triple construction".into()))?,
    })
}

fn symmetrize_and_snap(m: &mut DMatrix<f64>) {
    for p in 0..m.nrows() {
        for q in (p + 1)..m.ncols() {
            let avg = 0.5 * (m[(p, q)] + m[(q, p)]);
            m[(p, q)] = avg;
            m[(q, p)] = avg;
        }
    }
    m.apply(|x| {
        if x.abs() < ZERO_SNAP {
            *x = 0.0;
        }
    });
}

/// Matrix absolute value `|M| = Q |Lambda| Q^T` of a symmetric matrix.
pub fn abs_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("matrix absolute value needs a square matrix"));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for p in 0..m.nrows() {
        for q in (p + 1)..m.ncols() {
            if (m[(p, q)] - m[(q, p)]).abs() > 1e-10 * scale {
                return Err(Error::invalid(format!(
                    "matrix absolute value needs a symmetric matrix; entries ({p},{q}) and ({q},{p}) differ by {:.3e}",
                    (m[(p, q)] - m[(q, p)]).abs()
                )));
            }
        }
    }
    let mut sym = m.clone();
    for p in 0..sym.nrows() {
        for q in (p + 1)..sym.ncols() {
            let avg = 0.5 * (sym[(p, q)] + sym[(q, p)]);
            sym[(p, q)] = avg;
            sym[(q, p)] = avg;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut abs = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::abs))
        * eig.eigenvectors.transpose();
    for p in 0..abs.nrows() {
        for q in (p + 1)..abs.ncols() {
            let avg = 0.5 * (abs[(p, q)] + abs[(q, p)]);
            abs[(p, q)] = avg;
            abs[(q, p)] = avg;
        }
    }
    Ok(abs)
}

/// Index of the flux matrix acting along spatial axis `axis` for a problem
/// of dimension `dim`.
///
/// The slab problem (`dim = 1`) varies along the polar axis and uses
/// `A^(3)`; the plane-parallel problem (`dim = 2`) uses `A^(1)` and `A^(2)`.
pub fn flux_matrix_index(dim: usize, axis: usize) -> Result<usize> {
    match (dim, axis) {
        (1, 0) => Ok(2),
        (2, 0) => Ok(0),
        (2, 1) => Ok(1),
        _ => Err(Error::invalid(format!(
            "no flux matrix for axis {axis} in dimension {dim}"
        ))),
    }
}

/// Checks the standing model assumptions on the cross sections and the
/// scaling parameter.
// The negated comparisons also reject NaN inputs, which `<=` would let
// through.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_materials(sigma_t: f64, sigma_a: f64, eps: f64) -> Result<()> {
    if !(sigma_a > 0.0) {
        return Err(Error::config(format!(
            "requires sigma_a > 0, got sigma_a = {sigma_a}"
        )));
    }
    if !(sigma_t > sigma_a) {
        return Err(Error::config(format!(
            "requires sigma_t > sigma_a, got sigma_t = {sigma_t}, sigma_a = {sigma_a}"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config(format!("requires eps in (0, 1], got {eps}")));
    }
    if !(sigma_t - eps * eps * sigma_a > 0.0) {
        return Err(Error::config(format!(
            "requires sigma_t - eps^2 * sigma_a > 0, got {}",
            sigma_t - eps * eps * sigma_a
        )));
    }
    Ok(())
}

/// The diagonal reaction matrix `Q = diag(eps * sigma_a, sigma_t / eps,
/// ..., sigma_t / eps)` of the scaled moment system.
#[derive(Debug, Clone)]
pub struct ScatteringDiagonal {
    l: usize,
    absorption: f64,
    transport: f64,
}

impl ScatteringDiagonal {
    /// Builds the diagonal for constant cross sections, validating the
    /// model assumptions.
    pub fn new(sigma_t: f64, sigma_a: f64, eps: f64, l: usize) -> Result<Self> {
        validate_materials(sigma_t, sigma_a, eps)?;
        if l == 0 {
            return Err(Error::invalid("moment count must be positive"));
        }
        Ok(ScatteringDiagonal {
            l,
            absorption: eps * sigma_a,
            transport: sigma_t / eps,
        })
    }

    /// Number of moments `L`.
    pub fn len(&self) -> usize {
        self.l
    }

    /// True for an empty diagonal, which cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    /// Entry `p` of the diagonal: `eps * sigma_a` for the zeroth moment,
    /// `sigma_t / eps` for all higher moments.
    pub fn entry(&self, p: usize) -> f64 {
        if p == 0 {
            self.absorption
        } else {
            self.transport
        }
    }

    /// All `L` diagonal entries.
    pub fn entries(&self) -> Vec<f64> {
        (0..self.l).map(|p| self.entry(p)).collect()
    }

    /// Entrywise square root of the diagonal.
    pub fn sqrt_entries(&self) -> Vec<f64> {
        (0..self.l).map(|p| self.entry(p).sqrt()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
        let mu: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let s = (1.0 - mu * mu).sqrt();
        [s * phi.cos(), s * phi.sin(), mu]
    }

    #[test]
    fn flat_index_is_a_bijection() {
        for n in 0..=9 {
            let basis = MomentBasis::new(n);
            assert_eq!(basis.len(), (n + 1) * (n + 1));
            let mut seen = vec![false; basis.len()];
            for l in 0..=n {
                for kappa in -(l as i64)..=(l as i64) {
                    let idx = basis.flat_index(l, kappa).unwrap();
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(basis.degree_order(idx).unwrap(), (l, kappa));
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn invalid_indices_are_rejected() {
        let basis = MomentBasis::new(2);
        assert!(basis.flat_index(3, 0).is_err());
        assert!(basis.flat_index(1, 2).is_err());
        assert!(basis.degree_order(9).is_err());
    }

    #[test]
    fn constant_harmonic_value() {
        let basis = MomentBasis::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let omega = random_unit(&mut rng);
            let m = basis.eval(&omega).unwrap();
            assert_relative_eq!(m[0], 0.28209479177387814, max_relative = 1e-13);
        }
    }

    #[test]
    fn polar_harmonic_at_north_pole() {
        let basis = MomentBasis::new(1);
        let m = basis.eval(&[0.0, 0.0, 1.0]).unwrap();
        let idx = basis.flat_index(1, 0).unwrap();
        assert_relative_eq!(m[idx], 0.4886025119029199, max_relative = 1e-13);
    }

    #[test]
    fn non_unit_direction_is_rejected() {
        let basis = MomentBasis::new(1);
        assert!(basis.eval(&[0.5, 0.0, 0.0]).is_err());
        assert!(basis.eval(&[1.0 + 1e-9, 0.0, 0.0]).is_err());
    }

    #[test]
    fn quadrature_weights_and_low_moments() {
        for n in 0..=9 {
            let quad = sphere_quadrature(n).unwrap();
            let area: f64 = quad.weights().iter().sum();
            assert_relative_eq!(area, 4.0 * std::f64::consts::PI, max_relative = 1e-13);
            let mu2 = quad.integrate(|o| o[2] * o[2]);
            assert_relative_eq!(mu2, 4.0 * std::f64::consts::PI / 3.0, max_relative = 1e-12);
            let cross = quad.integrate(|o| o[0] * o[1]);
            assert!(cross.abs() < 1e-13);
        }
    }

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        for n in 0..=9 {
            let basis = MomentBasis::new(n);
            let quad = sphere_quadrature(n).unwrap();
            let l = basis.len();
            let mut gram = DMatrix::<f64>::zeros(l, l);
            for (omega, &w) in quad.nodes().iter().zip(quad.weights()) {
                let m = basis.eval(omega).unwrap();
                for p in 0..l {
                    for q in 0..l {
                        gram[(p, q)] += w * m[p] * m[q];
                    }
                }
            }
            let deviation = (&gram - DMatrix::identity(l, l)).abs().max();
            assert!(deviation < 1e-12, "N = {n}: Gram deviation {deviation:.3e}");
        }
    }

    #[test]
    fn moment_matrices_match_low_order_analytics() {
        let basis = MomentBasis::new(1);
        let mm = moment_matrices(&basis).unwrap();
        let i00 = basis.flat_index(0, 0).unwrap();
        let i10 = basis.flat_index(1, 0).unwrap();
        let i1m = basis.flat_index(1, -1).unwrap();
        let i1p = basis.flat_index(1, 1).unwrap();
        let c = 1.0 / 3.0f64.sqrt();
        assert_relative_eq!(mm.a(2)[(i00, i10)], c, max_relative = 1e-12);
        assert_eq!(mm.a(2)[(i00, i1m)], 0.0);
        assert_eq!(mm.a(2)[(i00, i1p)], 0.0);
        assert_relative_eq!(mm.a(0)[(i00, i1p)], c, max_relative = 1e-12);
        assert_relative_eq!(mm.a(1)[(i00, i1m)], c, max_relative = 1e-12);
    }

    #[test]
    fn moment_matrices_are_symmetric_and_degree_sparse() {
        for n in 1..=9 {
            let basis = MomentBasis::new(n);
            let mm = moment_matrices(&basis).unwrap();
            for i in 0..3 {
                let a = mm.a(i);
                assert_eq!(a, &a.transpose());
                let mut nonzero_blocks = std::collections::BTreeSet::new();
                for p in 0..basis.len() {
                    for q in 0..basis.len() {
                        if a[(p, q)] != 0.0 {
                            let (lp, _) = basis.degree_order(p).unwrap();
                            let (lq, _) = basis.degree_order(q).unwrap();
                            assert_eq!(
                                lp.abs_diff(lq),
                                1,
                                "N = {n}, i = {i}: entry ({p},{q}) couples degrees {lp},{lq}"
                            );
                            nonzero_blocks.insert((lp, lq));
                        }
                    }
                }
                assert_eq!(nonzero_blocks.len(), 2 * n);
            }
        }
    }

    #[test]
    fn recursion_identity_at_random_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in 1..=9 {
            let basis = MomentBasis::new(n);
            let mm = moment_matrices(&basis).unwrap();
            for _ in 0..20 {
                let omega = random_unit(&mut rng);
                let m = DVector::from_vec(basis.eval(&omega).unwrap());
                for i in 0..3 {
                    let product = mm.a(i) * &m;
                    for p in 0..basis.len() {
                        let (l, _) = basis.degree_order(p).unwrap();
                        if l >= n {
                            continue;
                        }
                        let residual = (omega[i] * m[p] - product[p]).abs();
                        assert!(
                            residual < 1e-11,
                            "N = {n}, i = {i}, p = {p}: residual {residual:.3e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn eigendecomposition_reconstructs_and_bounds_spectrum() {
        for n in 1..=9 {
            let basis = MomentBasis::new(n);
            let mm = moment_matrices(&basis).unwrap();
            for i in 0..3 {
                let rebuilt = mm.eigenvectors(i)
                    * DMatrix::from_diagonal(mm.eigenvalues(i))
                    * mm.eigenvectors(i).transpose();
                let deviation = (rebuilt - mm.a(i)).abs().max();
                assert!(deviation < 1e-12, "N = {n}, i = {i}: {deviation:.3e}");
                assert!(mm.spectral_norm(i) <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn abs_matrices_dominate_and_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=5 {
            let basis = MomentBasis::new(n);
            let mm = moment_matrices(&basis).unwrap();
            for i in 0..3 {
                let eig = nalgebra::SymmetricEigen::new(mm.abs_a(i).clone());
                let min = eig.eigenvalues.min();
                assert!(min > -5e-12, "N = {n}, i = {i}: min eigenvalue {min:.3e}");
                for _ in 0..20 {
                    let v = DVector::from_fn(basis.len(), |_, _| rng.random_range(-1.0..1.0));
                    let dv = (mm.abs_a(i) * &v).dot(&v);
                    let av = (mm.a(i) * &v).dot(&v);
                    assert!(dv >= av.abs() - 1e-10 * v.norm_squared());
                }
            }
        }
    }

    #[test]
    fn abs_matrix_small_cases() {
        let diag = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 3.0]);
        let abs = abs_matrix(&diag).unwrap();
        assert_relative_eq!(abs[(0, 0)], 2.0, max_relative = 1e-14);
        assert_relative_eq!(abs[(1, 1)], 3.0, max_relative = 1e-14);
        assert!(abs[(0, 1)].abs() < 1e-14);

        let zero = DMatrix::zeros(3, 3);
        assert_eq!(abs_matrix(&zero).unwrap(), zero);

        let a = 1.5;
        let off = DMatrix::from_row_slice(2, 2, &[0.0, a, a, 0.0]);
        let abs = abs_matrix(&off).unwrap();
        assert_relative_eq!(abs[(0, 0)], a, max_relative = 1e-14);
        assert_relative_eq!(abs[(1, 1)], a, max_relative = 1e-14);
        assert!(abs[(0, 1)].abs() < 1e-14);

        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(abs_matrix(&asym).is_err());
    }

    #[test]
    fn scattering_diagonal_entries() {
        let q = ScatteringDiagonal::new(1.0, 0.5, 1.0, 4).unwrap();
        assert_eq!(q.entries(), vec![0.5, 1.0, 1.0, 1.0]);
        let q = ScatteringDiagonal::new(1.0, 0.5, 0.1, 4).unwrap();
        let entries = q.entries();
        assert_relative_eq!(entries[0], 0.05, max_relative = 1e-15);
        for &e in &entries[1..] {
            assert_relative_eq!(e, 10.0, max_relative = 1e-15);
        }
        let roots = q.sqrt_entries();
        for (e, r) in entries.iter().zip(&roots) {
            assert_relative_eq!(e.sqrt(), *r, max_relative = 1e-15);
        }
    }

    #[test]
    fn material_assumptions_are_enforced() {
        assert!(ScatteringDiagonal::new(1.0, 1.0, 1.0, 4).is_err());
        assert!(ScatteringDiagonal::new(1.0, 0.0, 1.0, 4).is_err());
        assert!(ScatteringDiagonal::new(1.0, 0.5, 0.0, 4).is_err());
        assert!(ScatteringDiagonal::new(1.0, 0.5, 1.5, 4).is_err());
        let err = ScatteringDiagonal::new(1.0, 1.0, 1.0, 4).unwrap_err();
        assert!(err.to_string().contains("sigma_t > sigma_a"));
    }

    #[test]
    fn flux_matrix_axis_mapping() {
        assert_eq!(flux_matrix_index(1, 0).unwrap(), 2);
        assert_eq!(flux_matrix_index(2, 0).unwrap(), 0);
        assert_eq!(flux_matrix_index(2, 1).unwrap(), 1);
        assert!(flux_matrix_index(1, 1).is_err());
        assert!(flux_matrix_index(3, 0).is_err());
    }
}
