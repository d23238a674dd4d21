//! Sparse operators of the discrete problem: the dG form (SWIP diffusion with
//! upwind advection-reaction), the Gram matrix of the test-space inner
//! product, the load vector with weakly imposed Dirichlet data, and the
//! restriction of the dG form to the continuous trial space.
//!
//! Jumps are `⟦v⟧ = v⁻ - v⁺` with the face normal pointing from `T⁻` to
//! `T⁺`; on boundary faces `⟦v⟧ = v` and the normal is outward.

use sprs::CsMat;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::mesh::{ElementGeometry, Mesh, Point};
use crate::par;
use crate::problem::{ProblemSpec, RegionId, Sym2};
use crate::spaces::{local_dimension, CgSpace, DgSpace, QuadratureRule};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("quadrature of degree {degree} is too low for p = {p} (need at least {required})")]
    InsufficientQuadrature { degree: usize, p: usize, required: usize },
    #[error("{what} is not finite at ({}, {})", point[0], point[1])]
    NonFinite { what: &'static str, point: Point },
    #[error("diffusion tensor has a negative eigenvalue at ({}, {})", point[0], point[1])]
    IndefiniteDiffusion { point: Point },
    #[error("space was built on a different mesh ({space} elements, mesh has {mesh})")]
    MeshMismatch { space: usize, mesh: usize },
    #[error("cannot restrict: {0}")]
    Restrict(#[from] LinalgError),
}

/// `x^⊖ = (|x| - x) / 2`
pub fn negative_part(x: f64) -> f64 {
    0.5 * (x.abs() - x)
}

/// Diffusive face weights and penalty of the SWIP scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceCoefficients {
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub gamma_k: f64,
    pub eta: f64,
    pub gamma_f: f64,
}

fn shape_ratio(g: &ElementGeometry) -> f64 {
    g.perimeter / g.area
}

impl FaceCoefficients {
    /// `delta_*` are the normal diffusivities `nᵀKn` on either side.
    pub fn interior(p: usize, delta_minus: f64, delta_plus: f64, minus: &ElementGeometry, plus: &ElementGeometry) -> Self {
        let sum = delta_minus + delta_plus;
        let (omega_minus, omega_plus, gamma_k) = if sum > 0.0 {
            (delta_plus / sum, delta_minus / sum, delta_minus * delta_plus / sum)
        } else {
            (0.5, 0.5, 0.0)
        };
        let eta = 0.5 * local_dimension(p) as f64 * (shape_ratio(minus) + shape_ratio(plus));
        FaceCoefficients { omega_minus, omega_plus, delta_minus, delta_plus, gamma_k, eta, gamma_f: eta * gamma_k }
    }

    pub fn boundary(p: usize, delta: f64, element: &ElementGeometry) -> Self {
        let eta = local_dimension(p) as f64 * shape_ratio(element);
        let gamma_k = delta.max(0.0);
        FaceCoefficients {
            omega_minus: 1.0,
            omega_plus: 0.0,
            delta_minus: delta,
            delta_plus: 0.0,
            gamma_k,
            eta,
            gamma_f: eta * gamma_k,
        }
    }
}

/// Evaluates `nᵀKn` at the face midpoint from each side.
pub fn face_coefficients(mesh: &Mesh, problem: &ProblemSpec, regions: &[RegionId], face: usize, p: usize) -> FaceCoefficients {
    let f = &mesh.faces()[face];
    let [a, b] = f.vertices.map(|v| mesh.vertices()[v]);
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let delta_minus = problem.diffusion.eval(mid, regions[f.minus]).quad(f.normal);
    match f.plus_element() {
        Some(plus) => {
            let delta_plus = problem.diffusion.eval(mid, regions[plus]).quad(f.normal);
            FaceCoefficients::interior(p, delta_minus, delta_plus, mesh.geometry(f.minus), mesh.geometry(plus))
        }
        None => FaceCoefficients::boundary(p, delta_minus, mesh.geometry(f.minus)),
    }
}

/// Local matrices of one element or face, row = test, column = trial, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMatrices {
    /// Elements whose dofs index the local rows/columns, in order.
    pub elements: Vec<usize>,
    pub form: Vec<f64>,
    pub gram: Vec<f64>,
    pub load: Vec<f64>,
}

impl LocalMatrices {
    fn zeros(elements: Vec<usize>, n: usize) -> Self {
        let m = elements.len() * n;
        LocalMatrices { elements, form: vec![0.0; m * m], gram: vec![0.0; m * m], load: vec![0.0; m] }
    }

    pub fn size(&self) -> usize {
        self.load.len()
    }

    fn mirror_gram(&mut self) {
        let m = self.size();
        for i in 0..m {
            for j in 0..i {
                self.gram[i * m + j] = self.gram[j * m + i];
            }
        }
    }
}

struct Pattern {
    neighbors: Vec<Vec<usize>>,
    element_start: Vec<usize>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    n: usize,
}

impl Pattern {
    fn new(mesh: &Mesh, n: usize) -> Self {
        let ne = mesh.num_elements();
        let mut neighbors: Vec<Vec<usize>> = (0..ne).map(|e| vec![e]).collect();
        for f in mesh.faces() {
            if let Some(p) = f.plus_element() {
                neighbors[f.minus].push(p);
                neighbors[p].push(f.minus);
            }
        }
        let mut indptr = Vec::with_capacity(ne * n + 1);
        let mut indices = Vec::new();
        let mut element_start = Vec::with_capacity(ne);
        indptr.push(0);
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
            nb.dedup();
            element_start.push(indices.len());
            for _ in 0..n {
                for &c in nb.iter() {
                    indices.extend(c * n..(c + 1) * n);
                }
                indptr.push(indices.len());
            }
        }
        Pattern { neighbors, element_start, indptr, indices, n }
    }

    /// Offset of `(row element, i)` x `(column element, 0)` in the value array.
    fn offset(&self, row_elem: usize, i: usize, col_elem: usize) -> usize {
        let nb = &self.neighbors[row_elem];
        let k = nb.iter().position(|&c| c == col_elem).expect("element pair outside the pattern");
        self.element_start[row_elem] + i * nb.len() * self.n + k * self.n
    }
}

/// Assembles the dG form, Gram matrix and load on a fixed mesh.
pub struct Assembler<'a> {
    mesh: &'a Mesh,
    problem: &'a ProblemSpec,
    p: usize,
    n: usize,
    quad: QuadratureRule,
    regions: Vec<RegionId>,
    faces: Vec<FaceCoefficients>,
    ref_values: Vec<Vec<f64>>,
    ref_gradients: Vec<Vec<[f64; 2]>>,
    basis: crate::spaces::LagrangeBasis,
}

/// Minimum quadrature degree for polynomial degree `p`.
pub fn required_quadrature(p: usize) -> usize {
    2 * p + 2
}

impl<'a> Assembler<'a> {
    pub fn new(mesh: &'a Mesh, space: &DgSpace, problem: &'a ProblemSpec) -> Result<Self, AssemblyError> {
        Self::with_quadrature(mesh, space, problem, required_quadrature(space.degree()))
    }

    pub fn with_quadrature(
        mesh: &'a Mesh,
        space: &DgSpace,
        problem: &'a ProblemSpec,
        degree: usize,
    ) -> Result<Self, AssemblyError> {
        let p = space.degree();
        if degree < required_quadrature(p) {
            return Err(AssemblyError::InsufficientQuadrature { degree, p, required: required_quadrature(p) });
        }
        if space.dim() != mesh.num_elements() * space.local_dim() {
            return Err(AssemblyError::MeshMismatch { space: space.dim() / space.local_dim(), mesh: mesh.num_elements() });
        }
        let quad = QuadratureRule::with_degree(degree);
        let basis = space.basis().clone();
        let (ref_values, ref_gradients) = quad.triangle_points.iter().map(|&xi| basis.values_and_gradients(xi)).unzip();
        let regions: Vec<RegionId> = (0..mesh.num_elements()).map(|e| problem.region_of(mesh.centroid(e))).collect();
        let faces = (0..mesh.num_faces()).map(|f| face_coefficients(mesh, problem, &regions, f, p)).collect();
        Ok(Assembler { mesh, problem, p, n: space.local_dim(), quad, regions, faces, ref_values, ref_gradients, basis })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn face_coefficients(&self) -> &[FaceCoefficients] {
        &self.faces
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    fn diffusion(&self, x: Point, region: RegionId) -> Result<Sym2, AssemblyError> {
        let k = self.problem.diffusion.eval(x, region);
        if !(k.xx.is_finite() && k.xy.is_finite() && k.yy.is_finite()) {
            return Err(AssemblyError::NonFinite { what: "diffusion", point: x });
        }
        let [lo, hi] = k.eigenvalues();
        if lo < -1e-12 * hi.abs().max(1.0) {
            return Err(AssemblyError::IndefiniteDiffusion { point: x });
        }
        Ok(k)
    }

    fn advection(&self, x: Point, region: RegionId) -> Result<[f64; 2], AssemblyError> {
        let b = self.problem.advection.eval(x, region);
        if b.iter().all(|v| v.is_finite()) {
            Ok(b)
        } else {
            Err(AssemblyError::NonFinite { what: "advection", point: x })
        }
    }

    fn scalar(&self, what: &'static str, v: f64, x: Point) -> Result<f64, AssemblyError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(AssemblyError::NonFinite { what, point: x })
        }
    }

    /// Volume contributions of element `e`.
    pub fn element_matrices(&self, e: usize) -> Result<LocalMatrices, AssemblyError> {
        let n = self.n;
        let geo = self.mesh.geometry(e);
        let region = self.regions[e];
        let jac = geo.det.abs();
        let h = geo.diameter;
        let mut out = LocalMatrices::zeros(vec![e], n);
        let mut grads = vec![[0.0; 2]; n];
        let mut kgrads = vec![[0.0; 2]; n];
        let mut bgrads = vec![0.0; n];
        for (q, (&xi, &wq)) in self.quad.triangle_points.iter().zip(&self.quad.triangle_weights).enumerate() {
            let x = geo.map(xi);
            let w = wq * jac;
            let k = self.diffusion(x, region)?;
            let b = self.advection(x, region)?;
            let sigma = self.scalar("reaction", self.problem.reaction.eval(x, region), x)?;
            let f = self.scalar("source", self.problem.source.eval(x, region), x)?;
            let phi = &self.ref_values[q];
            for k_ in 0..n {
                grads[k_] = geo.push_gradient(self.ref_gradients[q][k_]);
                kgrads[k_] = k.apply(grads[k_]);
                bgrads[k_] = b[0] * grads[k_][0] + b[1] * grads[k_][1];
            }
            for i in 0..n {
                let row = i * n;
                for j in 0..n {
                    let stiff = kgrads[j][0] * grads[i][0] + kgrads[j][1] * grads[i][1];
                    out.form[row + j] += w * (stiff + bgrads[j] * phi[i] + sigma * phi[j] * phi[i]);
                    if j >= i {
                        out.gram[row + j] += w * (phi[i] * phi[j] + h * bgrads[i] * bgrads[j] + stiff);
                    }
                }
                out.load[i] += w * f * phi[i];
            }
        }
        out.mirror_gram();
        Ok(out)
    }

    fn face_side(&self, e: usize, x: Point, normal: [f64; 2], k: Sym2) -> (Vec<f64>, Vec<f64>) {
        let geo = self.mesh.geometry(e);
        let (vals, ref_grads) = self.basis.values_and_gradients(geo.inverse_map(x));
        let kn = k.apply(normal);
        let flux = ref_grads
            .iter()
            .map(|&g| {
                let g = geo.push_gradient(g);
                kn[0] * g[0] + kn[1] * g[1]
            })
            .collect();
        (vals, flux)
    }

    /// Skeleton contributions of face `f`.
    pub fn face_matrices(&self, f: usize) -> Result<LocalMatrices, AssemblyError> {
        let n = self.n;
        let face = &self.mesh.faces()[f];
        let c = self.faces[f];
        let [a, bv] = face.vertices.map(|v| self.mesh.vertices()[v]);
        let nrm = face.normal;
        let len = face.diameter;
        let minus = face.minus;
        match face.plus_element() {
            None => {
                let region = self.regions[minus];
                let mut out = LocalMatrices::zeros(vec![minus], n);
                for (&t, &wt) in self.quad.edge_points.iter().zip(&self.quad.edge_weights) {
                    let x = [a[0] + t * (bv[0] - a[0]), a[1] + t * (bv[1] - a[1])];
                    let w = wt * len;
                    let k = self.diffusion(x, region)?;
                    let b = self.advection(x, region)?;
                    let bn = b[0] * nrm[0] + b[1] * nrm[1];
                    let inflow = negative_part(bn);
                    let g = self.scalar("Dirichlet data", self.problem.dirichlet.eval(x, region), x)?;
                    let (phi, flux) = self.face_side(minus, x, nrm, k);
                    let mass = c.gamma_f + inflow;
                    let norm_w = 0.5 * bn.abs() + c.gamma_f;
                    for i in 0..n {
                        for j in 0..n {
                            out.form[i * n + j] += w * (-phi[j] * flux[i] - flux[j] * phi[i] + mass * phi[j] * phi[i]);
                            if j >= i {
                                out.gram[i * n + j] += w * norm_w * phi[i] * phi[j];
                            }
                        }
                        out.load[i] += w * g * (-flux[i] + c.gamma_f * phi[i] + inflow * phi[i]);
                    }
                }
                out.mirror_gram();
                Ok(out)
            }
            Some(plus) => {
                let regs = [self.regions[minus], self.regions[plus]];
                let elems = [minus, plus];
                let sign = [1.0, -1.0];
                let omega = [c.omega_minus, c.omega_plus];
                let m = 2 * n;
                let mut out = LocalMatrices::zeros(vec![minus, plus], n);
                for (&t, &wt) in self.quad.edge_points.iter().zip(&self.quad.edge_weights) {
                    let x = [a[0] + t * (bv[0] - a[0]), a[1] + t * (bv[1] - a[1])];
                    let w = wt * len;
                    let bm = self.advection(x, regs[0])?;
                    let bp = self.advection(x, regs[1])?;
                    let bn = 0.5 * ((bm[0] + bp[0]) * nrm[0] + (bm[1] + bp[1]) * nrm[1]);
                    let mut phi = [Vec::new(), Vec::new()];
                    let mut flux = [Vec::new(), Vec::new()];
                    for s in 0..2 {
                        let k = self.diffusion(x, regs[s])?;
                        (phi[s], flux[s]) = self.face_side(elems[s], x, nrm, k);
                    }
                    let jump_w = c.gamma_f + 0.5 * bn.abs();
                    for tt in 0..2 {
                        for i in 0..n {
                            let row = (tt * n + i) * m;
                            let (psi, dpsi) = (phi[tt][i], flux[tt][i]);
                            for s in 0..2 {
                                for j in 0..n {
                                    let (ph, dph) = (phi[s][j], flux[s][j]);
                                    let jump_u = sign[s] * ph;
                                    let jump_v = sign[tt] * psi;
                                    let col = s * n + j;
                                    out.form[row + col] += w
                                        * (-jump_u * omega[tt] * dpsi - omega[s] * dph * jump_v + jump_w * jump_u * jump_v
                                            - bn * jump_u * 0.5 * psi);
                                    if col >= tt * n + i {
                                        out.gram[row + col] += w * jump_w * jump_u * jump_v;
                                    }
                                }
                            }
                        }
                    }
                }
                out.mirror_gram();
                Ok(out)
            }
        }
    }

    /// Assembles `(B_full, G, L)` in one sweep.
    pub fn assemble(&self) -> Result<(CsMat<f64>, CsMat<f64>, Vec<f64>), AssemblyError> {
        let pattern = Pattern::new(self.mesh, self.n);
        let dim = self.mesh.num_elements() * self.n;
        let nnz = pattern.indices.len();
        let mut form = vec![0.0; nnz];
        let mut gram = vec![0.0; nnz];
        let mut load = vec![0.0; dim];

        let elements = par::map_range(self.mesh.num_elements(), |e| self.element_matrices(e));
        for local in elements {
            self.scatter(&pattern, &local?, &mut form, &mut gram, &mut load);
        }
        let faces = par::map_range(self.mesh.num_faces(), |f| self.face_matrices(f));
        for local in faces {
            self.scatter(&pattern, &local?, &mut form, &mut gram, &mut load);
        }
        let b_full = CsMat::new((dim, dim), pattern.indptr.clone(), pattern.indices.clone(), form);
        let g = CsMat::new((dim, dim), pattern.indptr, pattern.indices, gram);
        Ok((b_full, g, load))
    }

    fn scatter(&self, pattern: &Pattern, local: &LocalMatrices, form: &mut [f64], gram: &mut [f64], load: &mut [f64]) {
        let n = self.n;
        let m = local.size();
        for (tt, &re) in local.elements.iter().enumerate() {
            for i in 0..n {
                let lrow = (tt * n + i) * m;
                for (s, &ce) in local.elements.iter().enumerate() {
                    let off = pattern.offset(re, i, ce);
                    for j in 0..n {
                        form[off + j] += local.form[lrow + s * n + j];
                        gram[off + j] += local.gram[lrow + s * n + j];
                    }
                }
                load[re * n + i] += local.load[tt * n + i];
            }
        }
    }
}

/// The dG form with rows indexed by test and columns by trial dofs, both in
/// the broken space.
pub fn assemble_dg_matrix(mesh: &Mesh, space: &DgSpace, problem: &ProblemSpec) -> Result<CsMat<f64>, AssemblyError> {
    Ok(Assembler::new(mesh, space, problem)?.assemble()?.0)
}

pub fn assemble_gram(mesh: &Mesh, space: &DgSpace, problem: &ProblemSpec) -> Result<CsMat<f64>, AssemblyError> {
    Ok(Assembler::new(mesh, space, problem)?.assemble()?.1)
}

pub fn assemble_load(mesh: &Mesh, space: &DgSpace, problem: &ProblemSpec) -> Result<Vec<f64>, AssemblyError> {
    Ok(Assembler::new(mesh, space, problem)?.assemble()?.2)
}

/// `B = B_full · E`.
pub fn restrict_to_trial(b_full: &CsMat<f64>, injection: &CsMat<f64>) -> Result<CsMat<f64>, AssemblyError> {
    if b_full.cols() != injection.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "form has {} columns, injection has {} rows",
            b_full.cols(),
            injection.rows()
        ))
        .into());
    }
    Ok(b_full * injection)
}

/// Blocks of `[[G, B], [Bᵀ, 0]] [ε; u] = [L; 0]`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub g: CsMat<f64>,
    pub b: CsMat<f64>,
    pub b_full: CsMat<f64>,
    pub load: Vec<f64>,
}

impl SaddleSystem {
    pub fn assemble(mesh: &Mesh, dg: &DgSpace, cg: &CgSpace, problem: &ProblemSpec) -> Result<Self, AssemblyError> {
        let (b_full, g, load) = Assembler::new(mesh, dg, problem)?.assemble()?;
        let b = restrict_to_trial(&b_full, &cg.injection())?;
        Ok(SaddleSystem { g, b, b_full, load })
    }

    pub fn dim_test(&self) -> usize {
        self.g.rows()
    }

    pub fn dim_trial(&self) -> usize {
        self.b.cols()
    }

    /// The full symmetric indefinite matrix, test block first.
    pub fn kkt(&self) -> CsMat<f64> {
        let m = self.dim_test();
        let mut t = Vec::with_capacity(self.g.nnz() + 2 * self.b.nnz());
        for (v, (r, c)) in self.g.iter() {
            t.push((r, c, *v));
        }
        for (v, (r, c)) in self.b.iter() {
            t.push((r, m + c, *v));
            t.push((m + c, r, *v));
        }
        crate::linalg::csr_from_triplets(m + self.dim_trial(), m + self.dim_trial(), &t)
    }
}
