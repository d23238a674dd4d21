//! Problem definitions: coefficient fields, boundary data, exact solutions,
//! the benchmark catalog and custom problems built from expressions.

mod catalog;
mod custom;
pub mod expr;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{Domain, Interfaces, Point};

pub use catalog::{catalog, catalog_entries, hetero_exact, hetero_interface_with, lshape_exact};
pub use custom::{CustomDomain, CustomProblem, CustomRegion, ExactExprs};
pub use expr::{EvalError, Expr, ParseError};

pub type RegionId = usize;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown problem '{0}' (try list-problems)")]
    UnknownProblem(String),
    #[error("in {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("region {index}: {message}")]
    InvalidRegion { index: usize, message: String },
    #[error("problem has no exact solution")]
    NoExactSolution,
}

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Sym2::diag(1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Sym2 { xx: a, xy: 0.0, yy: b }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// `nᵀ K n`.
    pub fn quad(&self, n: [f64; 2]) -> f64 {
        let kn = self.apply(n);
        kn[0] * n[0] + kn[1] * n[1]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * self.trace();
        let half_diff = 0.5 * (self.xx - self.yy);
        let rad = half_diff.hypot(self.xy);
        [mean - rad, mean + rad]
    }

    pub fn is_spd(&self) -> bool {
        let [lo, _] = self.eigenvalues();
        lo > 0.0 && self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Principal square root of a positive semidefinite tensor.
    ///
    /// For 2x2 matrices Cayley-Hamilton gives `sqrt(A) = (A + sI) / t` with
    /// `s = sqrt(det A)` and `t = sqrt(tr A + 2s)`.
    pub fn sqrt(&self) -> Sym2 {
        let s = self.det().max(0.0).sqrt();
        let t = (self.trace() + 2.0 * s).max(0.0).sqrt();
        if t == 0.0 {
            return Sym2::ZERO;
        }
        Sym2 { xx: (self.xx + s) / t, xy: self.xy / t, yy: (self.yy + s) / t }
    }
}

/// An evaluator `(point, region) -> T`.
pub struct Field<T> {
    eval: Arc<dyn Fn(Point, RegionId) -> T + Send + Sync>,
}

impl<T> Clone for Field<T> {
    fn clone(&self) -> Self {
        Field { eval: Arc::clone(&self.eval) }
    }
}

impl<T> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Field(..)")
    }
}

impl<T: Copy + Send + Sync + 'static> Field<T> {
    pub fn new(f: impl Fn(Point, RegionId) -> T + Send + Sync + 'static) -> Self {
        Field { eval: Arc::new(f) }
    }

    /// A field that ignores the region.
    pub fn spatial(f: impl Fn(Point) -> T + Send + Sync + 'static) -> Self {
        Field::new(move |p, _| f(p))
    }

    pub fn constant(v: T) -> Self {
        Field::new(move |_, _| v)
    }

    /// One value per region, indexed by region id.
    pub fn piecewise(values: Vec<T>) -> Self {
        Field::new(move |_, r| values[r.min(values.len() - 1)])
    }

    pub fn eval(&self, p: Point, region: RegionId) -> T {
        (self.eval)(p, region)
    }
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<[f64; 2]>;
pub type TensorField = Field<Sym2>;

/// Axis-aligned box `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        self.x[0] <= p[0] && p[0] <= self.x[1] && self.y[0] <= p[1] && p[1] <= self.y[1]
    }
}

/// Region `i + 1` is `boxes[i]`; region 0 is whatever the boxes leave over.
/// The first matching box wins, so pass interior points (element centroids).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionPartition {
    pub boxes: Vec<Region>,
}

impl RegionPartition {
    pub fn region_of(&self, p: Point) -> RegionId {
        self.boxes.iter().position(|b| b.contains(p)).map_or(0, |i| i + 1)
    }

    pub fn num_regions(&self) -> usize {
        self.boxes.len() + 1
    }

    /// Box edges strictly inside the bounding box, for the initial mesh.
    pub fn interfaces(&self, bbox: [f64; 4]) -> Interfaces {
        let mut out = Interfaces::default();
        let push = |v: &mut Vec<f64>, c: f64, lo: f64, hi: f64| {
            if c > lo && c < hi && !v.iter().any(|&o| (o - c).abs() < 1e-12) {
                v.push(c);
            }
        };
        for b in &self.boxes {
            for c in b.x {
                push(&mut out.x, c, bbox[0], bbox[1]);
            }
            for c in b.y {
                push(&mut out.y, c, bbox[2], bbox[3]);
            }
        }
        out.x.sort_by(f64::total_cmp);
        out.y.sort_by(f64::total_cmp);
        out
    }
}

/// Exact solution with its gradient. The region argument picks the side of
/// a material interface where the gradient jumps.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: Field<f64>,
    pub gradient: Field<[f64; 2]>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution(..)")
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub interfaces: Interfaces,
    pub regions: RegionPartition,
    pub diffusion: TensorField,
    pub advection: VectorField,
    pub reaction: ScalarField,
    pub source: ScalarField,
    pub dirichlet: ScalarField,
    pub exact: Option<ExactSolution>,
    /// Cells per unit length for the initial structured mesh.
    pub default_resolution: usize,
}

impl ProblemSpec {
    pub fn region_of(&self, p: Point) -> RegionId {
        self.regions.region_of(p)
    }

    pub fn exact(&self) -> Result<&ExactSolution, ProblemError> {
        self.exact.as_ref().ok_or(ProblemError::NoExactSolution)
    }
}
