//! Uniform periodic Cartesian meshes of the unit interval and unit square.
//!
//! Elements are axis-aligned cells of `(0,1)^d`, indexed lexicographically by
//! their integer coordinates. Opposite boundary faces are identified, so
//! every face is interior and shared by exactly two elements (possibly the
//! same element on a one-cell axis). Faces are indexed axis-major: all faces
//! orthogonal to axis 0 first, then axis 1, each block in element order. The
//! face with axis `a` and index offset equal to an element's index sits on
//! that element's positive side, with the unit normal `+e_a` pointing from
//! its `left` element into its `right` element.

use crate::error::{Error, Result};

/// An oriented interior face between two elements.
///
/// The normal `+e_axis` points from `left` into `right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    /// Element on the negative side of the face.
    pub left: usize,
    /// Element on the positive side, wrapping around the periodic boundary.
    pub right: usize,
    /// Axis the face is orthogonal to.
    pub axis: usize,
}

/// A uniform mesh of `(0,1)^d`, `d` in `{1, 2}`, with periodic topology.
#[derive(Debug, Clone)]
pub struct PeriodicCartesianMesh {
    dim: usize,
    cells: [usize; 2],
    h: [f64; 2],
    faces: Vec<Face>,
}

impl PeriodicCartesianMesh {
    /// Builds the uniform grid with `cells_per_axis[a]` cells along axis `a`.
    pub fn new(dim: usize, cells_per_axis: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("mesh dimension must be 1 or 2, got {dim}")));
        }
        if cells_per_axis.len() != dim {
            return Err(Error::invalid(format!(
                "expected {dim} cell counts, got {}",
                cells_per_axis.len()
            )));
        }
        if cells_per_axis.contains(&0) {
            return Err(Error::invalid("cell counts must be positive"));
        }
        let mut cells = [1usize; 2];
        cells[..dim].copy_from_slice(cells_per_axis);
        let h = [1.0 / cells[0] as f64, 1.0 / cells[1] as f64];

        let n_elements = cells[0] * cells[1];
        let mut faces = Vec::with_capacity(dim * n_elements);
        for axis in 0..dim {
            for e in 0..n_elements {
                let (ix, iy) = (e % cells[0], e / cells[0]);
                let right = match axis {
                    0 => (ix + 1) % cells[0] + cells[0] * iy,
                    _ => ix + cells[0] * ((iy + 1) % cells[1]),
                };
                faces.push(Face { left: e, right, axis });
            }
        }
        Ok(PeriodicCartesianMesh { dim, cells, h, faces })
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells along `axis`.
    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    /// Cell width along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    /// Largest cell width over all axes.
    pub fn h_max(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    /// Number of elements.
    pub fn n_elements(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    /// Number of distinct periodic faces, `d * n_1 * ... * n_d`.
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Volume of each element.
    pub fn element_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    /// Measure of a face orthogonal to `axis`: 1 for `d = 1`, the width of
    /// the transverse axis for `d = 2`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            self.h[1 - axis]
        }
    }

    /// Integer grid coordinates of an element.
    pub fn element_coords(&self, element: usize) -> (usize, usize) {
        (element % self.cells[0], element / self.cells[0])
    }

    /// Lower-left corner of an element.
    pub fn element_origin(&self, element: usize) -> [f64; 2] {
        let (ix, iy) = self.element_coords(element);
        [ix as f64 * self.h[0], iy as f64 * self.h[1]]
    }

    /// Center of an element.
    pub fn element_center(&self, element: usize) -> [f64; 2] {
        let o = self.element_origin(element);
        [o[0] + 0.5 * self.h[0], o[1] + 0.5 * self.h[1]]
    }

    /// Maps a reference point in `[-1,1]^d` to physical coordinates inside
    /// an element. The second reference coordinate is ignored for `d = 1`.
    pub fn map_to_physical(&self, element: usize, xi: &[f64; 2]) -> [f64; 2] {
        let c = self.element_center(element);
        [c[0] + 0.5 * self.h[0] * xi[0], c[1] + 0.5 * self.h[1] * xi[1]]
    }

    /// Element containing a point, with periodic wrapping.
    pub fn locate(&self, x: &[f64; 2]) -> usize {
        let mut idx = [0usize; 2];
        for a in 0..self.dim {
            let cell = (x[a].rem_euclid(1.0) / self.h[a]).floor() as usize;
            idx[a] = cell.min(self.cells[a] - 1);
        }
        idx[0] + self.cells[0] * idx[1]
    }

    /// All faces, axis-major, each block in element order.
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Face at a given index.
    pub fn face(&self, index: usize) -> &Face {
        &self.faces[index]
    }

    /// Neighbor across a local face and the matching local face seen from
    /// the neighbor. Local faces are numbered `2*axis` for the negative side
    /// and `2*axis + 1` for the positive side.
    pub fn neighbor(&self, element: usize, local_face: usize) -> Result<(usize, usize)> {
        if element >= self.n_elements() || local_face >= 2 * self.dim {
            return Err(Error::invalid(format!(
                "invalid element {element} or local face {local_face}"
            )));
        }
        let axis = local_face / 2;
        let positive = local_face % 2 == 1;
        let (ix, iy) = self.element_coords(element);
        let n = self.cells[axis];
        let shift = |i: usize| {
            if positive {
                (i + 1) % n
            } else {
                (i + n - 1) % n
            }
        };
        let (jx, jy) = if axis == 0 { (shift(ix), iy) } else { (ix, shift(iy)) };
        Ok((jx + self.cells[0] * jy, local_face ^ 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_construction() {
        assert!(PeriodicCartesianMesh::new(0, &[]).is_err());
        assert!(PeriodicCartesianMesh::new(3, &[2, 2, 2]).is_err());
        assert!(PeriodicCartesianMesh::new(1, &[0]).is_err());
        assert!(PeriodicCartesianMesh::new(2, &[4]).is_err());
    }

    #[test]
    fn one_dimensional_wrap() {
        let mesh = PeriodicCartesianMesh::new(1, &[4]).unwrap();
        assert_eq!(mesh.n_elements(), 4);
        assert_eq!(mesh.n_faces(), 4);
        assert_eq!(mesh.neighbor(3, 1).unwrap(), (0, 0));
        assert_eq!(mesh.neighbor(0, 0).unwrap(), (3, 1));
        assert_eq!(mesh.element_volume(), 0.25);
        assert_eq!(mesh.face_measure(0), 1.0);
    }

    #[test]
    fn two_dimensional_counts_and_wrap() {
        let mesh = PeriodicCartesianMesh::new(2, &[3, 2]).unwrap();
        assert_eq!(mesh.n_elements(), 6);
        assert_eq!(mesh.n_faces(), 12);
        let (ix, iy) = (2, 1);
        let e = iy * 3 + ix;
        assert_eq!(mesh.neighbor(e, 1).unwrap(), (3, 0));
        assert_eq!(mesh.neighbor(e, 3).unwrap(), (2, 2));
    }

    #[test]
    fn single_cell_axis_is_self_adjacent() {
        let mesh = PeriodicCartesianMesh::new(1, &[1]).unwrap();
        assert_eq!(mesh.neighbor(0, 0).unwrap(), (0, 1));
        assert_eq!(mesh.neighbor(0, 1).unwrap(), (0, 0));
    }

    #[test]
    fn neighbor_is_an_involution() {
        for (dim, cells) in [(1, vec![5]), (2, vec![4, 3]), (2, vec![1, 6])] {
            let mesh = PeriodicCartesianMesh::new(dim, &cells).unwrap();
            for e in 0..mesh.n_elements() {
                for f in 0..2 * dim {
                    let (ne, nf) = mesh.neighbor(e, f).unwrap();
                    assert_eq!(mesh.neighbor(ne, nf).unwrap(), (e, f));
                }
            }
        }
    }

    #[test]
    fn volumes_sum_to_one() {
        for (dim, cells) in [(1, vec![7]), (2, vec![5, 3])] {
            let mesh = PeriodicCartesianMesh::new(dim, &cells).unwrap();
            let total = mesh.element_volume() * mesh.n_elements() as f64;
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn faces_pair_elements_consistently() {
        let mesh = PeriodicCartesianMesh::new(2, &[4, 4]).unwrap();
        let mut per_element = vec![0usize; mesh.n_elements()];
        for face in mesh.faces() {
            per_element[face.left] += 1;
            per_element[face.right] += 1;
            let (ne, _) = mesh.neighbor(face.left, 2 * face.axis + 1).unwrap();
            assert_eq!(ne, face.right);
        }
        for &count in &per_element {
            assert_eq!(count, 4);
        }
    }

    #[test]
    fn outward_flux_of_periodic_field_telescopes() {
        use crate::quadrature::GaussLegendre;
        let tau = std::f64::consts::TAU;
        let field = |x: &[f64; 2]| {
            [
                (tau * x[0]).sin() + (2.0 * tau * x[1]).cos(),
                (tau * x[0]).cos() * (tau * x[1]).sin(),
            ]
        };
        let mesh = PeriodicCartesianMesh::new(2, &[4, 3]).unwrap();
        let rule = GaussLegendre::new(4).unwrap();
        let mut total = 0.0;
        for e in 0..mesh.n_elements() {
            let origin = mesh.element_origin(e);
            for local_face in 0..4 {
                let axis = local_face / 2;
                let sign = if local_face % 2 == 1 { 1.0 } else { -1.0 };
                let plane = origin[axis] + if local_face % 2 == 1 { mesh.h(axis) } else { 0.0 };
                for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
                    let along = origin[1 - axis] + 0.5 * (t + 1.0) * mesh.h(1 - axis);
                    let mut x = [0.0; 2];
                    x[axis] = plane.rem_euclid(1.0);
                    x[1 - axis] = along;
                    total += sign * w * 0.5 * mesh.face_measure(axis) * field(&x)[axis];
                }
            }
        }
        assert!(total.abs() < 1e-12, "net outward flux {total:.3e}");
    }

    #[test]
    fn locate_inverts_centers() {
        let mesh = PeriodicCartesianMesh::new(2, &[5, 4]).unwrap();
        for e in 0..mesh.n_elements() {
            let c = mesh.element_center(e);
            assert_eq!(mesh.locate(&c), e);
        }
        assert_eq!(mesh.locate(&[1.01, 0.01]), 0);
    }
}
