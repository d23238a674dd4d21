//! Discrete norms, true errors, element indicators and Dörfler marking.
//!
//! The evaluator here integrates the norm directly, with `κ = K^{1/2}` in the
//! diffusive term, instead of going through the assembled Gram matrix.

use thiserror::Error;

use crate::assembly::{face_coefficients, FaceCoefficients};
use crate::mesh::{Mesh, Point};
use crate::par;
use crate::problem::{ExactSolution, ProblemSpec, RegionId};
use crate::spaces::{DgSpace, LagrangeBasis, QuadratureRule};

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error("marking fraction must lie in (0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("indicator of element {0} is negative or not finite")]
    InvalidIndicator(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Squared contributions to `‖w‖²_{V_h}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormBreakdown {
    /// `‖w‖²_{0,Ω}`
    pub l2: f64,
    /// `½ ‖|b·n|^{1/2} w‖²_{0,Γ}`
    pub boundary_advection: f64,
    /// `½ Σ (|b·n| ⟦w⟧, ⟦w⟧)` over interior faces
    pub jump_advection: f64,
    /// `Σ h_T ‖b·∇w‖²_{0,T}`
    pub streamline: f64,
    /// `‖κ∇w‖²_{0,Ω}`
    pub diffusion: f64,
    /// `Σ γ_F ‖⟦w⟧‖²_{0,F}` over all faces
    pub penalty: f64,
}

impl NormBreakdown {
    fn add(&mut self, o: &NormBreakdown) {
        self.l2 += o.l2;
        self.boundary_advection += o.boundary_advection;
        self.jump_advection += o.jump_advection;
        self.streamline += o.streamline;
        self.diffusion += o.diffusion;
        self.penalty += o.penalty;
    }

    pub fn total_squared(&self) -> f64 {
        self.advective_squared() + self.diffusive_squared()
    }

    pub fn advective_squared(&self) -> f64 {
        self.l2 + self.boundary_advection + self.jump_advection + self.streamline
    }

    pub fn diffusive_squared(&self) -> f64 {
        self.diffusion + self.penalty
    }

    /// `‖w‖_{V_h}`
    pub fn vh(&self) -> f64 {
        self.total_squared().sqrt()
    }

    pub fn advective(&self) -> f64 {
        self.advective_squared().sqrt()
    }

    pub fn diffusive(&self) -> f64 {
        self.diffusive_squared().sqrt()
    }

    /// `|w|_{V_h,β}`
    pub fn beta(&self) -> f64 {
        self.streamline.sqrt()
    }
}

/// True errors of a discrete solution against an exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueErrors {
    pub l2: f64,
    pub vh: f64,
    pub vh_beta: f64,
    pub breakdown: NormBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `E_T ≥ 0` per element.
    pub indicators: Vec<f64>,
    /// `‖ε_h‖_{V_h}`
    pub estimator: f64,
    pub errors: Option<TrueErrors>,
    /// `estimator / ‖u - u_h‖_{V_h}` when the exact solution is known.
    pub effectivity: Option<f64>,
}

/// The field being measured: `w_h` from coefficients, or `u - w_h`.
struct Target<'a> {
    coeffs: &'a [f64],
    exact: Option<&'a ExactSolution>,
}

/// Quadrature-based evaluator of the test-space norm on one mesh.
pub struct NormEvaluator<'a> {
    mesh: &'a Mesh,
    problem: &'a ProblemSpec,
    basis: LagrangeBasis,
    quad: QuadratureRule,
    regions: Vec<RegionId>,
    faces: Vec<FaceCoefficients>,
    ref_values: Vec<Vec<f64>>,
    ref_gradients: Vec<Vec<[f64; 2]>>,
}

impl<'a> NormEvaluator<'a> {
    /// Quadrature exact to degree `2p + 2`, enough for discrete fields.
    pub fn new(mesh: &'a Mesh, problem: &'a ProblemSpec, space: &DgSpace) -> Self {
        Self::with_quadrature(mesh, problem, space, 2 * space.degree() + 2)
    }

    pub fn with_quadrature(mesh: &'a Mesh, problem: &'a ProblemSpec, space: &DgSpace, degree: usize) -> Self {
        let p = space.degree();
        let basis = space.basis().clone();
        let quad = QuadratureRule::with_degree(degree);
        let (ref_values, ref_gradients) = quad.triangle_points.iter().map(|&xi| basis.values_and_gradients(xi)).unzip();
        let regions: Vec<RegionId> = (0..mesh.num_elements()).map(|e| problem.region_of(mesh.centroid(e))).collect();
        let faces = (0..mesh.num_faces()).map(|f| face_coefficients(mesh, problem, &regions, f, p)).collect();
        NormEvaluator { mesh, problem, basis, quad, regions, faces, ref_values, ref_gradients }
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<(), EstimateError> {
        let expected = self.mesh.num_elements() * self.basis.len();
        if coeffs.len() == expected {
            Ok(())
        } else {
            Err(EstimateError::LengthMismatch { got: coeffs.len(), expected })
        }
    }

    fn volume(&self, e: usize, t: &Target) -> NormBreakdown {
        let n = self.basis.len();
        let geo = self.mesh.geometry(e);
        let region = self.regions[e];
        let c = &t.coeffs[e * n..(e + 1) * n];
        let mut out = NormBreakdown::default();
        for (q, (&xi, &wq)) in self.quad.triangle_points.iter().zip(&self.quad.triangle_weights).enumerate() {
            let x = geo.map(xi);
            let w = wq * geo.det.abs();
            let mut v: f64 = (0..n).map(|k| c[k] * self.ref_values[q][k]).sum();
            let mut rg = [0.0; 2];
            for k in 0..n {
                rg[0] += c[k] * self.ref_gradients[q][k][0];
                rg[1] += c[k] * self.ref_gradients[q][k][1];
            }
            let mut g = geo.push_gradient(rg);
            if let Some(u) = t.exact {
                let ug = u.gradient.eval(x, region);
                v = u.value.eval(x, region) - v;
                g = [ug[0] - g[0], ug[1] - g[1]];
            }
            let kappa = self.problem.diffusion.eval(x, region).sqrt();
            let kg = kappa.apply(g);
            let b = self.problem.advection.eval(x, region);
            let bg = b[0] * g[0] + b[1] * g[1];
            out.l2 += w * v * v;
            out.diffusion += w * (kg[0] * kg[0] + kg[1] * kg[1]);
            out.streamline += w * geo.diameter * bg * bg;
        }
        out
    }

    /// Discrete trace of the coefficient field on element `e` at `x`.
    fn trace(&self, e: usize, coeffs: &[f64], x: Point) -> f64 {
        let n = self.basis.len();
        let vals = self.basis.values(self.mesh.geometry(e).inverse_map(x));
        (0..n).map(|k| coeffs[e * n + k] * vals[k]).sum()
    }

    fn face(&self, f: usize, t: &Target) -> NormBreakdown {
        let face = &self.mesh.faces()[f];
        let c = self.faces[f];
        let [a, b] = face.vertices.map(|v| self.mesh.vertices()[v]);
        let mut out = NormBreakdown::default();
        for (&s, &ws) in self.quad.edge_points.iter().zip(&self.quad.edge_weights) {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let w = ws * face.diameter;
            let rm = self.regions[face.minus];
            let bm = self.problem.advection.eval(x, rm);
            match face.plus_element() {
                None => {
                    let mut v = self.trace(face.minus, t.coeffs, x);
                    if let Some(u) = t.exact {
                        v = u.value.eval(x, rm) - v;
                    }
                    let bn = (bm[0] * face.normal[0] + bm[1] * face.normal[1]).abs();
                    out.boundary_advection += w * 0.5 * bn * v * v;
                    out.penalty += w * c.gamma_f * v * v;
                }
                Some(plus) => {
                    // The exact solution is continuous, so only the discrete part jumps.
                    let jump = self.trace(face.minus, t.coeffs, x) - self.trace(plus, t.coeffs, x);
                    let bp = self.problem.advection.eval(x, self.regions[plus]);
                    let bn = 0.5 * ((bm[0] + bp[0]) * face.normal[0] + (bm[1] + bp[1]) * face.normal[1]);
                    out.jump_advection += w * 0.5 * bn.abs() * jump * jump;
                    out.penalty += w * c.gamma_f * jump * jump;
                }
            }
        }
        out
    }

    fn collect(&self, t: &Target) -> (Vec<NormBreakdown>, Vec<NormBreakdown>) {
        let vols = par::map_range(self.mesh.num_elements(), |e| self.volume(e, t));
        let faces = par::map_range(self.mesh.num_faces(), |f| self.face(f, t));
        (vols, faces)
    }

    fn total(&self, t: &Target) -> NormBreakdown {
        let (vols, faces) = self.collect(t);
        let mut out = NormBreakdown::default();
        for v in vols.iter().chain(&faces) {
            out.add(v);
        }
        out
    }

    /// `‖w‖_{V_h}` of a broken-space field, by components.
    pub fn breakdown(&self, w: &[f64]) -> Result<NormBreakdown, EstimateError> {
        self.check_len(w)?;
        Ok(self.total(&Target { coeffs: w, exact: None }))
    }

    /// Norms of `u - u_h` where `u_h` is given by broken-space coefficients.
    pub fn true_errors(&self, u_h: &[f64], exact: &ExactSolution) -> Result<TrueErrors, EstimateError> {
        self.check_len(u_h)?;
        let b = self.total(&Target { coeffs: u_h, exact: Some(exact) });
        Ok(TrueErrors { l2: b.l2.sqrt(), vh: b.vh(), vh_beta: b.beta(), breakdown: b })
    }

    /// `E_T = (‖ε‖²_{loc,T} + ½ |ε|²_{loc,S})^{1/2}` per element.
    pub fn indicators(&self, eps: &[f64]) -> Result<Vec<f64>, EstimateError> {
        self.check_len(eps)?;
        let (vols, faces) = self.collect(&Target { coeffs: eps, exact: None });
        let mut sq: Vec<f64> = vols.iter().map(|v| v.total_squared()).collect();
        for (f, contrib) in faces.iter().enumerate() {
            let face = &self.mesh.faces()[f];
            let value = contrib.total_squared();
            match face.plus_element() {
                None => sq[face.minus] += value,
                Some(plus) => {
                    sq[face.minus] += 0.5 * value;
                    sq[plus] += 0.5 * value;
                }
            }
        }
        Ok(sq.into_iter().map(|v| v.max(0.0).sqrt()).collect())
    }
}

/// `‖w‖_{V_h}` with its components.
pub fn norm_vh(mesh: &Mesh, problem: &ProblemSpec, space: &DgSpace, w: &[f64]) -> Result<NormBreakdown, EstimateError> {
    NormEvaluator::new(mesh, problem, space).breakdown(w)
}

/// Errors of `u_h` (broken-space coefficients) against the problem's exact
/// solution, with quadrature four degrees above the discrete requirement.
pub fn exact_errors(mesh: &Mesh, problem: &ProblemSpec, space: &DgSpace, u_h: &[f64]) -> Result<TrueErrors, EstimateError> {
    let exact = problem.exact.as_ref().ok_or(EstimateError::NoExactSolution)?;
    NormEvaluator::with_quadrature(mesh, problem, space, 2 * space.degree() + 6).true_errors(u_h, exact)
}

/// Indicators from `ε_h`, plus true errors of `u_h` when the exact solution
/// is known. Both vectors are broken-space coefficients.
pub fn local_indicators(
    mesh: &Mesh,
    problem: &ProblemSpec,
    space: &DgSpace,
    eps: &[f64],
    u_h: Option<&[f64]>,
) -> Result<ErrorReport, EstimateError> {
    let indicators = NormEvaluator::new(mesh, problem, space).indicators(eps)?;
    let estimator = indicators.iter().map(|e| e * e).sum::<f64>().sqrt();
    let errors = match (u_h, problem.exact.is_some()) {
        (Some(u), true) => Some(exact_errors(mesh, problem, space, u)?),
        _ => None,
    };
    let effectivity = errors.and_then(|e| (e.vh > 0.0).then(|| estimator / e.vh));
    Ok(ErrorReport { indicators, estimator, errors, effectivity })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkingSum {
    /// Cumulative sums of `E_T`.
    #[default]
    Plain,
    /// Cumulative sums of `E_T²`.
    Squared,
}

/// Dörfler bulk marking: the smallest set of largest indicators (ties by
/// ascending id) whose sum reaches `theta` times the total. Returned in
/// ascending id order; empty when every indicator is zero.
pub fn dorfler_mark(indicators: &[f64], theta: f64, sum: MarkingSum) -> Result<Vec<usize>, EstimateError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(EstimateError::InvalidTheta(theta));
    }
    if let Some(bad) = indicators.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(EstimateError::InvalidIndicator(bad));
    }
    let weight = |e: f64| match sum {
        MarkingSum::Plain => e,
        MarkingSum::Squared => e * e,
    };
    let total: f64 = indicators.iter().map(|&e| weight(e)).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for e in order {
        marked.push(e);
        acc += weight(indicators[e]);
        if acc >= target {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}
