//! Broken (test) and continuous (trial) Lagrange spaces on a mesh.

mod basis;
mod quadrature;

pub use basis::{local_dimension, reference_basis, LagrangeBasis, MAX_DEGREE};
pub use quadrature::{gauss_legendre, make_quadrature, QuadratureRule};

use sprs::{CsMat, TriMat};
use thiserror::Error;

use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("polynomial degree {0} is not supported (expected 1..=4)")]
    UnsupportedDegree(usize),
}

/// Piecewise polynomials of degree `p` without continuity constraints.
/// Degrees of freedom are element-local Lagrange nodes: dof `e * n + k`.
#[derive(Debug, Clone)]
pub struct DgSpace {
    basis: LagrangeBasis,
    num_elements: usize,
}

impl DgSpace {
    pub fn new(mesh: &Mesh, p: usize) -> Result<Self, SpaceError> {
        Ok(DgSpace { basis: LagrangeBasis::new(p)?, num_elements: mesh.num_elements() })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn local_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.num_elements * self.basis.len()
    }

    pub fn dof(&self, e: usize, k: usize) -> usize {
        e * self.basis.len() + k
    }

    pub fn element_coefficients<'a>(&self, coeffs: &'a [f64], e: usize) -> &'a [f64] {
        let n = self.basis.len();
        &coeffs[e * n..(e + 1) * n]
    }

    /// Value of a discrete function inside element `e` at reference point `xi`.
    pub fn evaluate(&self, coeffs: &[f64], e: usize, xi: [f64; 2]) -> f64 {
        self.basis.values(xi).iter().zip(self.element_coefficients(coeffs, e)).map(|(v, c)| v * c).sum()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn(Point, usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for e in 0..mesh.num_elements() {
            let g = mesh.geometry(e);
            for k in 0..self.local_dim() {
                out[self.dof(e, k)] = f(g.map(self.basis.node(k)), e);
            }
        }
        out
    }

    /// Transfers `coeffs` from `coarse` to the refined `fine` mesh, whose
    /// elements carry a parent on `coarse`. Exact for nested meshes.
    pub fn prolongate(&self, coarse: &Mesh, coeffs: &[f64], fine: &Mesh, fine_space: &DgSpace) -> Vec<f64> {
        let basis = fine_space.basis();
        let mut out = vec![0.0; fine_space.dim()];
        for e in 0..fine.num_elements() {
            let parent = fine.parent(e).expect("refined mesh without parent links");
            let g = fine.geometry(e);
            let gp = coarse.geometry(parent);
            for k in 0..fine_space.local_dim() {
                let xi = gp.inverse_map(g.map(basis.node(k)));
                out[fine_space.dof(e, k)] = self.evaluate(coeffs, parent, xi);
            }
        }
        out
    }
}

/// Continuous piecewise polynomials U_h, a subspace of the broken space.
#[derive(Debug, Clone)]
pub struct CgSpace {
    basis: LagrangeBasis,
    dim: usize,
    /// Injection: for each broken dof, the continuous dof it copies.
    dg_to_cg: Vec<usize>,
}

impl CgSpace {
    pub fn new(mesh: &Mesh, p: usize) -> Result<Self, SpaceError> {
        let basis = LagrangeBasis::new(p)?;
        let nloc = basis.len();
        let nv = mesh.num_vertices();
        let per_edge = p - 1;
        let edge_base = nv;
        let interior_base = edge_base + mesh.num_faces() * per_edge;
        let per_interior = basis.interior_nodes().len();
        let mut dg_to_cg = vec![0; mesh.num_elements() * nloc];
        for (e, t) in mesh.elements().iter().enumerate() {
            let row = &mut dg_to_cg[e * nloc..(e + 1) * nloc];
            row[..3].copy_from_slice(t);
            let faces = mesh.element_faces(e);
            for i in 0..3 {
                let f = faces[i];
                let same_direction = mesh.faces()[f].minus == e;
                for (k, local) in basis.edge_nodes(i).enumerate() {
                    let along = if same_direction { k } else { per_edge - 1 - k };
                    row[local] = edge_base + f * per_edge + along;
                }
            }
            for (k, local) in basis.interior_nodes().enumerate() {
                row[local] = interior_base + e * per_interior + k;
            }
        }
        let dim = interior_base + mesh.num_elements() * per_interior;
        Ok(CgSpace { basis, dim, dg_to_cg })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dg_to_cg(&self) -> &[usize] {
        &self.dg_to_cg
    }

    /// The injection E as a sparse (dim V_h) x (dim U_h) matrix.
    pub fn injection(&self) -> CsMat<f64> {
        let mut t = TriMat::with_capacity((self.dg_to_cg.len(), self.dim), self.dg_to_cg.len());
        for (i, &j) in self.dg_to_cg.iter().enumerate() {
            t.add_triplet(i, j, 1.0);
        }
        t.to_csr()
    }

    /// Broken coefficients of a continuous function (applies E).
    pub fn inject(&self, u: &[f64]) -> Vec<f64> {
        self.dg_to_cg.iter().map(|&j| u[j]).collect()
    }

    /// Nodal interpolant of `f` (evaluated once per global node).
    pub fn interpolate(&self, mesh: &Mesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
        let nloc = self.basis.len();
        let mut out = vec![f64::NAN; self.dim];
        for e in 0..mesh.num_elements() {
            let g = mesh.geometry(e);
            for k in 0..nloc {
                let j = self.dg_to_cg[e * nloc + k];
                if out[j].is_nan() {
                    out[j] = f(g.map(self.basis.node(k)));
                }
            }
        }
        out
    }

    /// Continuous coefficients read off broken ones (left inverse of `inject`
    /// on continuous data; the last broken copy of each node wins).
    pub fn from_broken(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, &j) in self.dg_to_cg.iter().enumerate() {
            out[j] = w[i];
        }
        out
    }

    /// Values at mesh vertices (the first `num_vertices` dofs).
    pub fn vertex_values<'a>(&self, mesh: &Mesh, u: &'a [f64]) -> &'a [f64] {
        &u[..mesh.num_vertices()]
    }
}
