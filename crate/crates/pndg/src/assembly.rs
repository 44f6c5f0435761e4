//! Global assembly of the upwind DG discretisation of the moment system.
//!
//! The bilinear form couples volume terms `-(A^(a) u, d_a v)_K + (Q u, v)_K`
//! with upwind face terms built from the numerical flux
//! `n . A {{u}} - 1/2 |n| . D [[u]]`, `D^(a) = |A^(a)|`, and the load is
//! `eps (f, v)`. Degrees of freedom are laid out element-major, then by
//! moment, then by local basis function, and faces are visited in mesh
//! order with each face integrated once and scattered to both sides, so
//! assembly is deterministic and exactly conservative.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::LocalBasis;
use crate::error::{Error, Result};
use crate::geometry::PeriodicCartesianMesh;
use crate::harmonics::{flux_matrix_index, validate_materials, MomentMatrices};
use crate::sparse::CsrMatrix;

/// Flat layout of the global coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    /// Number of mesh elements.
    pub n_elements: usize,
    /// Number of moments `L`.
    pub n_moments: usize,
    /// Local space dimension `(k+1)^d`.
    pub n_local: usize,
}

impl DofLayout {
    /// Global index of a coefficient.
    pub fn index(&self, element: usize, moment: usize, local: usize) -> usize {
        (element * self.n_moments + moment) * self.n_local + local
    }

    /// Coefficients per element.
    pub fn block_size(&self) -> usize {
        self.n_moments * self.n_local
    }

    /// Total number of degrees of freedom.
    pub fn total(&self) -> usize {
        self.n_elements * self.block_size()
    }
}

/// Shared spatially varying scalar coefficient.
pub type CrossSection = Arc<dyn Fn(&[f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Coefficient {
    Constant(f64),
    Function(CrossSection),
}

impl Coefficient {
    fn eval(&self, x: &[f64; 2]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function(f) => f(x),
        }
    }
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Cross sections and the scaling parameter.
///
/// Constant cross sections are validated on construction; spatially varying
/// ones are validated at every quadrature point they are sampled at.
#[derive(Debug, Clone)]
pub struct MaterialField {
    sigma_t: Coefficient,
    sigma_a: Coefficient,
    eps: f64,
}

impl MaterialField {
    /// Constant cross sections.
    pub fn constant(sigma_t: f64, sigma_a: f64, eps: f64) -> Result<Self> {
        validate_materials(sigma_t, sigma_a, eps)?;
        Ok(MaterialField {
            sigma_t: Coefficient::Constant(sigma_t),
            sigma_a: Coefficient::Constant(sigma_a),
            eps,
        })
    }

    /// Spatially varying cross sections. The model assumptions are enforced
    /// pointwise wherever the field is sampled.
    pub fn variable(
        sigma_t: impl Fn(&[f64; 2]) -> f64 + Send + Sync + 'static,
        sigma_a: impl Fn(&[f64; 2]) -> f64 + Send + Sync + 'static,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::config(format!("requires eps in (0, 1], got {eps}")));
        }
        Ok(MaterialField {
            sigma_t: Coefficient::Function(Arc::new(sigma_t)),
            sigma_a: Coefficient::Function(Arc::new(sigma_a)),
            eps,
        })
    }

    /// The scaling parameter `eps`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Total cross section at a point.
    pub fn sigma_t(&self, x: &[f64; 2]) -> f64 {
        self.sigma_t.eval(x)
    }

    /// Absorption cross section at a point.
    pub fn sigma_a(&self, x: &[f64; 2]) -> f64 {
        self.sigma_a.eval(x)
    }

    /// True if both cross sections are constants.
    pub fn is_constant(&self) -> bool {
        matches!(
            (&self.sigma_t, &self.sigma_a),
            (Coefficient::Constant(_), Coefficient::Constant(_))
        )
    }

    /// Checks the model assumptions at a sample point.
    pub fn validate_at(&self, x: &[f64; 2]) -> Result<()> {
        validate_materials(self.sigma_t(x), self.sigma_a(x), self.eps).map_err(|e| {
            Error::config(format!("at x = ({}, {}): {e}", x[0], x[1]))
        })
    }

    /// First diagonal entry of `Q` at a point, `eps * sigma_a(x)`.
    pub fn q_first(&self, x: &[f64; 2]) -> f64 {
        self.eps * self.sigma_a(x)
    }

    /// Higher diagonal entries of `Q` at a point, `sigma_t(x) / eps`.
    pub fn q_rest(&self, x: &[f64; 2]) -> f64 {
        self.sigma_t(x) / self.eps
    }
}

/// A DG moment field: piecewise polynomial coefficients of all `L` moments.
///
/// Coefficients refer to the `L^2`-orthonormal physical element basis, so
/// the Euclidean norm of the coefficient vector is the `L^2` norm of the
/// field.
#[derive(Debug, Clone)]
pub struct MomentField {
    mesh: PeriodicCartesianMesh,
    basis: LocalBasis,
    n_moments: usize,
    coeffs: Vec<f64>,
}

impl MomentField {
    /// The zero field.
    pub fn zeros(mesh: &PeriodicCartesianMesh, basis: &LocalBasis, n_moments: usize) -> Result<Self> {
        if mesh.dim() != basis.dim() {
            return Err(Error::invalid(format!(
                "mesh dimension {} does not match basis dimension {}",
                mesh.dim(),
                basis.dim()
            )));
        }
        let total = mesh.n_elements() * n_moments * basis.n_local();
        Ok(MomentField {
            mesh: mesh.clone(),
            basis: basis.clone(),
            n_moments,
            coeffs: vec![0.0; total],
        })
    }

    /// Wraps an existing coefficient vector.
    pub fn from_coefficients(
        mesh: &PeriodicCartesianMesh,
        basis: &LocalBasis,
        n_moments: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let mut field = Self::zeros(mesh, basis, n_moments)?;
        if coeffs.len() != field.coeffs.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                field.coeffs.len(),
                coeffs.len()
            )));
        }
        field.coeffs = coeffs;
        Ok(field)
    }

    /// The mesh the field lives on.
    pub fn mesh(&self) -> &PeriodicCartesianMesh {
        &self.mesh
    }

    /// The local basis of the field.
    pub fn basis(&self) -> &LocalBasis {
        &self.basis
    }

    /// Number of moments `L`.
    pub fn n_moments(&self) -> usize {
        self.n_moments
    }

    /// The coefficient layout.
    pub fn layout(&self) -> DofLayout {
        DofLayout {
            n_elements: self.mesh.n_elements(),
            n_moments: self.n_moments,
            n_local: self.basis.n_local(),
        }
    }

    /// All coefficients in layout order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Mutable access to the coefficients.
    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient block of one element.
    pub fn element_coeffs(&self, element: usize) -> &[f64] {
        let b = self.n_moments * self.basis.n_local();
        &self.coeffs[element * b..(element + 1) * b]
    }

    /// Values of all moments at a reference point of an element.
    pub fn evaluate(&self, element: usize, xi: &[f64; 2]) -> Vec<f64> {
        let phi = self.basis.eval_point(xi);
        let scale = self.physical_scale();
        let block = self.element_coeffs(element);
        let n_local = self.basis.n_local();
        (0..self.n_moments)
            .map(|m| {
                let row = &block[m * n_local..(m + 1) * n_local];
                scale * row.iter().zip(&phi).map(|(c, p)| c * p).sum::<f64>()
            })
            .collect()
    }

    /// Values of all moments at a physical point, wrapping periodically.
    pub fn evaluate_at(&self, x: &[f64; 2]) -> Vec<f64> {
        let e = self.mesh.locate(x);
        let origin = self.mesh.element_origin(e);
        let mut xi = [0.0; 2];
        for a in 0..self.mesh.dim() {
            xi[a] = 2.0 * (x[a].rem_euclid(1.0) - origin[a]) / self.mesh.h(a) - 1.0;
        }
        self.evaluate(e, &xi)
    }

    /// Scale factor of the physical orthonormal basis relative to the
    /// reference basis.
    pub fn physical_scale(&self) -> f64 {
        (0..self.mesh.dim())
            .map(|a| 2.0 / self.mesh.h(a))
            .product::<f64>()
            .sqrt()
    }

    /// Global `L^2(X)` norm of the field.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `L^2(X)` norm of a single moment component.
    pub fn moment_l2_norm(&self, moment: usize) -> f64 {
        let n_local = self.basis.n_local();
        let block = self.n_moments * n_local;
        let mut total = 0.0;
        for e in 0..self.mesh.n_elements() {
            let start = e * block + moment * n_local;
            total += self.coeffs[start..start + n_local]
                .iter()
                .map(|c| c * c)
                .sum::<f64>();
        }
        total.sqrt()
    }
}

/// A signed coordinate direction `+-e_axis` serving as a face normal.
///
/// The axis indexes the sphere coordinates, so it ranges over `{0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedAxis {
    /// Coordinate axis of the normal.
    pub axis: usize,
    /// True for `-e_axis`.
    pub negative: bool,
}

/// The upwind flux `sign * A {{u}} - 1/2 D [[u]]` for explicit flux and
/// stabilisation matrices.
pub fn upwind_flux(
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
    u_minus: &[f64],
    u_plus: &[f64],
    negative: bool,
) -> Vec<f64> {
    let l = u_minus.len();
    let sign = if negative { -1.0 } else { 1.0 };
    let mut flux = vec![0.0; l];
    for p in 0..l {
        let mut acc = 0.0;
        for q in 0..l {
            let avg = 0.5 * (u_minus[q] + u_plus[q]);
            let jump = u_plus[q] - u_minus[q];
            acc += sign * a[(p, q)] * avg - 0.5 * d[(p, q)] * jump;
        }
        flux[p] = acc;
    }
    flux
}

/// The upwind numerical flux across a face with normal `+-e_axis`.
///
/// `u_minus` is the trace from the element the normal points out of,
/// `u_plus` the trace from its neighbor.
pub fn numerical_flux(
    u_minus: &[f64],
    u_plus: &[f64],
    normal: SignedAxis,
    matrices: &MomentMatrices,
) -> Result<Vec<f64>> {
    let l = matrices.basis().len();
    if u_minus.len() != l || u_plus.len() != l {
        return Err(Error::invalid(format!(
            "trace length {} or {} does not match L = {l}",
            u_minus.len(),
            u_plus.len()
        )));
    }
    if normal.axis >= 3 {
        return Err(Error::invalid(format!("normal axis {} out of range", normal.axis)));
    }
    Ok(upwind_flux(
        matrices.a(normal.axis),
        matrices.abs_a(normal.axis),
        u_minus,
        u_plus,
        normal.negative,
    ))
}

/// The assembled linear system `M u = b` representing the DG problem.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    /// Coefficient layout of the unknown vector.
    pub layout: DofLayout,
    /// Sparse system matrix.
    pub matrix: CsrMatrix,
    /// Load vector.
    pub rhs: Vec<f64>,
    mesh: PeriodicCartesianMesh,
    basis: LocalBasis,
}

impl GlobalSystem {
    /// The mesh the system was assembled on.
    pub fn mesh(&self) -> &PeriodicCartesianMesh {
        &self.mesh
    }

    /// The local basis the system was assembled with.
    pub fn basis(&self) -> &LocalBasis {
        &self.basis
    }

    /// Wraps a solution vector in the field structure of this system.
    pub fn field_from(&self, coeffs: Vec<f64>) -> Result<MomentField> {
        MomentField::from_coefficients(&self.mesh, &self.basis, self.layout.n_moments, coeffs)
    }
}

/// Nonzero moment couplings of one face: flattened pairs with the flux and
/// stabilisation entries.
fn moment_couplings(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Vec<(usize, usize, f64, f64)> {
    let l = a.nrows();
    let mut list = Vec::new();
    for p in 0..l {
        for q in 0..l {
            if a[(p, q)] != 0.0 || d[(p, q)] != 0.0 {
                list.push((p, q, a[(p, q)], d[(p, q)]));
            }
        }
    }
    list
}

/// Reference trace product matrices of one axis, indexed by the sides of
/// the test and trial functions: `[plus-plus, plus-minus, minus-plus,
/// minus-minus]`.
fn trace_products(basis: &LocalBasis, axis: usize) -> [DMatrix<f64>; 4] {
    let n = basis.n_local();
    let mut out = [
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
    ];
    for (slot, (s_test, s_trial)) in [(1, 1), (1, 0), (0, 1), (0, 0)].into_iter().enumerate() {
        for (fq, &w) in basis.face_weights().iter().enumerate() {
            for i in 0..n {
                let ti = basis.trace(axis, s_test, fq, i);
                if ti == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[slot][(i, j)] += w * ti * basis.trace(axis, s_trial, fq, j);
                }
            }
        }
    }
    out
}

/// Assembles the global matrix and load vector.
///
/// The forcing callable returns all `L` moment components of `f` at a
/// point; the load is `eps (f, v)`.
pub fn assemble(
    mesh: &PeriodicCartesianMesh,
    basis: &LocalBasis,
    matrices: &MomentMatrices,
    materials: &MaterialField,
    forcing: impl Fn(&[f64; 2]) -> Vec<f64>,
) -> Result<GlobalSystem> {
    let dim = mesh.dim();
    if basis.dim() != dim {
        return Err(Error::invalid(format!(
            "basis dimension {} does not match mesh dimension {dim}",
            basis.dim()
        )));
    }
    let l = matrices.basis().len();
    let n_local = basis.n_local();
    let layout = DofLayout {
        n_elements: mesh.n_elements(),
        n_moments: l,
        n_local,
    };
    let n_quad = basis.quad_nodes().len();
    let volume_scale: f64 = (0..dim).map(|a| mesh.h(a) / 2.0).product();
    let rhs_scale = volume_scale.sqrt();

    // Reference volume matrices: grad_products[a][(i, j)] = integral of
    // phi_j * d_a phi_i over the reference element.
    let mut grad_products = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut g = DMatrix::<f64>::zeros(n_local, n_local);
        for q in 0..n_quad {
            let w = basis.quad_weights()[q];
            for i in 0..n_local {
                let di = basis.gradient(q, i, a);
                if di == 0.0 {
                    continue;
                }
                for j in 0..n_local {
                    g[(i, j)] += w * di * basis.value(q, j);
                }
            }
        }
        grad_products.push(g);
    }

    let mut axis_matrices = Vec::with_capacity(dim);
    for a in 0..dim {
        let idx = flux_matrix_index(dim, a)?;
        axis_matrices.push((matrices.a(idx), matrices.abs_a(idx)));
    }
    let couplings: Vec<Vec<(usize, usize, f64, f64)>> = axis_matrices
        .iter()
        .map(|(a, d)| moment_couplings(a, d))
        .collect();
    let traces: Vec<[DMatrix<f64>; 4]> = (0..dim).map(|a| trace_products(basis, a)).collect();

    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    let mut rhs = vec![0.0; layout.total()];

    let constant_materials = materials.is_constant();
    let origin_probe = [0.0; 2];
    let q_const = (
        materials.q_first(&origin_probe),
        materials.q_rest(&origin_probe),
    );

    for e in 0..mesh.n_elements() {
        let origin = mesh.element_origin(e);

        // Reaction mass matrices for the first and the remaining moments.
        let mut mass_first = DMatrix::<f64>::zeros(n_local, n_local);
        let mut mass_rest = DMatrix::<f64>::zeros(n_local, n_local);
        let need_mass = !constant_materials;
        for q in 0..n_quad {
            let xi = basis.quad_nodes()[q];
            let mut x = [0.0; 2];
            for a in 0..dim {
                x[a] = origin[a] + 0.5 * (xi[a] + 1.0) * mesh.h(a);
            }
            if !constant_materials {
                materials.validate_at(&x)?;
            }
            let w = basis.quad_weights()[q];
            if need_mass {
                let (q1, qr) = (materials.q_first(&x), materials.q_rest(&x));
                for i in 0..n_local {
                    let wi = w * basis.value(q, i);
                    for j in 0..n_local {
                        let v = wi * basis.value(q, j);
                        mass_first[(i, j)] += q1 * v;
                        mass_rest[(i, j)] += qr * v;
                    }
                }
            }
            // Load vector.
            let f = forcing(&x);
            if f.len() != l {
                return Err(Error::invalid(format!(
                    "forcing returned {} components, expected L = {l}",
                    f.len()
                )));
            }
            let wf = materials.eps() * rhs_scale * w;
            for m in 0..l {
                if f[m] == 0.0 {
                    continue;
                }
                let base = layout.index(e, m, 0);
                for i in 0..n_local {
                    rhs[base + i] += wf * f[m] * basis.value(q, i);
                }
            }
        }
        // Reaction term.
        if constant_materials {
            for m in 0..l {
                let qm = if m == 0 { q_const.0 } else { q_const.1 };
                for i in 0..n_local {
                    let dof = layout.index(e, m, i) as u32;
                    triplets.push((dof, dof, qm));
                }
            }
        } else {
            for m in 0..l {
                let mass = if m == 0 { &mass_first } else { &mass_rest };
                for i in 0..n_local {
                    for j in 0..n_local {
                        let v = mass[(i, j)];
                        if v != 0.0 {
                            triplets.push((
                                layout.index(e, m, i) as u32,
                                layout.index(e, m, j) as u32,
                                v,
                            ));
                        }
                    }
                }
            }
        }

        // Volume transport term.
        for a in 0..dim {
            let factor = 2.0 / mesh.h(a);
            let g = &grad_products[a];
            for &(p, q, apq, _) in &couplings[a] {
                if apq == 0.0 {
                    continue;
                }
                for i in 0..n_local {
                    for j in 0..n_local {
                        let v = g[(i, j)];
                        if v != 0.0 {
                            triplets.push((
                                layout.index(e, p, i) as u32,
                                layout.index(e, q, j) as u32,
                                -apq * factor * v,
                            ));
                        }
                    }
                }
            }
        }
    }

    // Face terms, one pass per face, scattered to both sides.
    for face in mesh.faces() {
        let a = face.axis;
        let factor = 2.0 / mesh.h(a);
        let [tpp, tpm, tmp, tmm] = &traces[a];
        for &(p, q, apq, dpq) in &couplings[a] {
            let c_left = 0.5 * (apq + dpq);
            let c_right = 0.5 * (apq - dpq);
            for i in 0..n_local {
                let row_l = layout.index(face.left, p, i) as u32;
                let row_r = layout.index(face.right, p, i) as u32;
                for j in 0..n_local {
                    let col_l = layout.index(face.left, q, j) as u32;
                    let col_r = layout.index(face.right, q, j) as u32;
                    if c_left != 0.0 {
                        if tpp[(i, j)] != 0.0 {
                            triplets.push((row_l, col_l, factor * c_left * tpp[(i, j)]));
                        }
                        if tmp[(i, j)] != 0.0 {
                            triplets.push((row_r, col_l, -factor * c_left * tmp[(i, j)]));
                        }
                    }
                    if c_right != 0.0 {
                        if tpm[(i, j)] != 0.0 {
                            triplets.push((row_l, col_r, factor * c_right * tpm[(i, j)]));
                        }
                        if tmm[(i, j)] != 0.0 {
                            triplets.push((row_r, col_r, -factor * c_right * tmm[(i, j)]));
                        }
                    }
                }
            }
        }
    }

    let matrix = CsrMatrix::from_triplets(layout.total(), layout.total(), &mut triplets)?;
    Ok(GlobalSystem {
        layout,
        matrix,
        rhs,
        mesh: mesh.clone(),
        basis: basis.clone(),
    })
}

/// The `Q`-weighted `L^2` norm of a moment field.
pub fn q_norm(field: &MomentField, materials: &MaterialField) -> Result<f64> {
    let mesh = field.mesh();
    let basis = field.basis();
    let dim = mesh.dim();
    let n_quad = basis.quad_nodes().len();
    let n_local = basis.n_local();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let origin = mesh.element_origin(e);
        let block = field.element_coeffs(e);
        for q in 0..n_quad {
            let xi = basis.quad_nodes()[q];
            let mut x = [0.0; 2];
            for a in 0..dim {
                x[a] = origin[a] + 0.5 * (xi[a] + 1.0) * mesh.h(a);
            }
            if !materials.is_constant() {
                materials.validate_at(&x)?;
            }
            let (q1, qr) = (materials.q_first(&x), materials.q_rest(&x));
            let w = basis.quad_weights()[q];
            for m in 0..field.n_moments() {
                let row = &block[m * n_local..(m + 1) * n_local];
                let value: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * basis.value(q, j))
                    .sum();
                total += w * if m == 0 { q1 } else { qr } * value * value;
            }
        }
    }
    Ok(total.sqrt())
}

/// The mesh-dependent triple norm combining the `Q` norm with the upwind
/// jump penalty.
pub fn triple_norm(
    field: &MomentField,
    materials: &MaterialField,
    matrices: &MomentMatrices,
) -> Result<f64> {
    if matrices.basis().len() != field.n_moments() {
        return Err(Error::invalid(format!(
            "matrices have L = {}, field has L = {}",
            matrices.basis().len(),
            field.n_moments()
        )));
    }
    let q_part = q_norm(field, materials)?;
    let total = q_part * q_part + jump_penalty_sq(field, matrices)?;
    Ok(total.sqrt())
}

/// The squared upwind jump penalty of a field,
/// `(1/2) sum_F (2/h_a) int_F [[u]]^T |A| [[u]]`.
///
/// This is the face part of the triple norm. For the error against a
/// smooth exact solution it equals the penalty of the discrete field
/// alone, since a continuous function has no jumps.
pub fn jump_penalty_sq(field: &MomentField, matrices: &MomentMatrices) -> Result<f64> {
    if matrices.basis().len() != field.n_moments() {
        return Err(Error::invalid(format!(
            "matrices have L = {}, field has L = {}",
            matrices.basis().len(),
            field.n_moments()
        )));
    }
    let mesh = field.mesh();
    let basis = field.basis();
    let dim = mesh.dim();
    let n_local = basis.n_local();
    let l = field.n_moments();
    let mut total = 0.0;
    let mut jump = vec![0.0; l];
    for face in mesh.faces() {
        let a = face.axis;
        let d = matrices.abs_a(flux_matrix_index(dim, a)?);
        let factor = 2.0 / mesh.h(a);
        let left = field.element_coeffs(face.left);
        let right = field.element_coeffs(face.right);
        let mut face_sum = 0.0;
        for (fq, &w) in basis.face_weights().iter().enumerate() {
            for (m, slot) in jump.iter_mut().enumerate() {
                let mut v = 0.0;
                for j in 0..n_local {
                    v += right[m * n_local + j] * basis.trace(a, 0, fq, j)
                        - left[m * n_local + j] * basis.trace(a, 1, fq, j);
                }
                *slot = v;
            }
            let mut quad = 0.0;
            for p in 0..l {
                if jump[p] == 0.0 {
                    continue;
                }
                for q in 0..l {
                    quad += jump[p] * d[(p, q)] * jump[q];
                }
            }
            face_sum += w * quad;
        }
        total += 0.5 * factor * face_sum;
    }
    Ok(total)
}

/// Residual of the bilinear form against a smooth exact solution: the
/// vector with entries `a_h(u, phi_i) - eps (f, phi_i)` over all test
/// functions `phi_i`.
///
/// For the exact solution of the moment system with forcing `f` this
/// vanishes up to quadrature error, which is the discrete consistency
/// statement behind Galerkin orthogonality.
pub fn consistency_residual(
    mesh: &PeriodicCartesianMesh,
    basis: &LocalBasis,
    matrices: &MomentMatrices,
    materials: &MaterialField,
    exact: impl Fn(&[f64; 2]) -> Vec<f64>,
    forcing: impl Fn(&[f64; 2]) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let dim = mesh.dim();
    if basis.dim() != dim {
        return Err(Error::invalid(format!(
            "basis dimension {} does not match mesh dimension {dim}",
            basis.dim()
        )));
    }
    let l = matrices.basis().len();
    let n_local = basis.n_local();
    let layout = DofLayout {
        n_elements: mesh.n_elements(),
        n_moments: l,
        n_local,
    };
    let volume_scale: f64 = (0..dim).map(|a| mesh.h(a) / 2.0).product::<f64>().sqrt();
    let mut residual = vec![0.0; layout.total()];

    for e in 0..mesh.n_elements() {
        let origin = mesh.element_origin(e);
        for (q, xi) in basis.quad_nodes().iter().enumerate() {
            let mut x = [0.0; 2];
            for a in 0..dim {
                x[a] = origin[a] + 0.5 * (xi[a] + 1.0) * mesh.h(a);
            }
            materials.validate_at(&x)?;
            let w = basis.quad_weights()[q];
            let u = exact(&x);
            let f = forcing(&x);
            if u.len() != l || f.len() != l {
                return Err(Error::invalid(
                    "exact solution or forcing length does not match L",
                ));
            }
            let (q1, qr) = (materials.q_first(&x), materials.q_rest(&x));
            for m in 0..l {
                let qm = if m == 0 { q1 } else { qr };
                let base = layout.index(e, m, 0);
                let coeff = w * volume_scale * (qm * u[m] - materials.eps() * f[m]);
                for i in 0..n_local {
                    residual[base + i] += coeff * basis.value(q, i);
                }
            }
            for a in 0..dim {
                let amat = matrices.a(flux_matrix_index(dim, a)?);
                let factor = 2.0 / mesh.h(a);
                for m in 0..l {
                    let mut au = 0.0;
                    for n in 0..l {
                        au += amat[(m, n)] * u[n];
                    }
                    if au == 0.0 {
                        continue;
                    }
                    let base = layout.index(e, m, 0);
                    for i in 0..n_local {
                        residual[base + i] -= w * volume_scale * factor * au * basis.gradient(q, i, a);
                    }
                }
            }
        }
    }

    // Faces: the exact solution is continuous, so the flux is the plain
    // trace of A u evaluated on the face.
    let s: f64 = (0..dim).map(|a| 2.0 / mesh.h(a)).product::<f64>().sqrt();
    for face in mesh.faces() {
        let a = face.axis;
        let amat = matrices.a(flux_matrix_index(dim, a)?);
        let face_scale = if dim == 1 { s } else { mesh.h(1 - a) / 2.0 * s };
        let origin = mesh.element_origin(face.left);
        let plane = origin[a] + mesh.h(a);
        for (fq, &w) in basis.face_weights().iter().enumerate() {
            let mut x = [0.0; 2];
            x[a] = plane.rem_euclid(1.0);
            if dim == 2 {
                let t = basis.face_nodes()[fq];
                x[1 - a] = origin[1 - a] + 0.5 * (t + 1.0) * mesh.h(1 - a);
            }
            let u = exact(&x);
            for m in 0..l {
                let mut au = 0.0;
                for n in 0..l {
                    au += amat[(m, n)] * u[n];
                }
                if au == 0.0 {
                    continue;
                }
                let base_l = layout.index(face.left, m, 0);
                let base_r = layout.index(face.right, m, 0);
                for i in 0..n_local {
                    residual[base_l + i] += w * face_scale * au * basis.trace(a, 1, fq, i);
                    residual[base_r + i] -= w * face_scale * au * basis.trace(a, 0, fq, i);
                }
            }
        }
    }
    Ok(residual)
}
