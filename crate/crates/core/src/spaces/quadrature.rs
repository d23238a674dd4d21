//! Gauss rules on the reference edge [0, 1] and the reference triangle.
//!
//! The triangle rule is a collapsed (Duffy) tensor product of Gauss-Legendre
//! rules. It has positive weights and is exact for any requested total degree.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub triangle_points: Vec<[f64; 2]>,
    pub triangle_weights: Vec<f64>,
    /// Points on [0, 1].
    pub edge_points: Vec<f64>,
    pub edge_weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Rules integrating polynomials of total degree `degree` exactly.
    pub fn with_degree(degree: usize) -> Self {
        let n_edge = degree / 2 + 1;
        let (x, w) = gauss_legendre(n_edge);
        let edge_points = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
        let edge_weights = w.iter().map(|w| 0.5 * w).collect();

        // The Duffy Jacobian adds one degree in the collapsed direction.
        let n_tri = (degree + 2) / 2 + 1;
        let (x, w) = gauss_legendre(n_tri);
        let mut triangle_points = Vec::with_capacity(n_tri * n_tri);
        let mut triangle_weights = Vec::with_capacity(n_tri * n_tri);
        for (xv, wv) in x.iter().zip(&w) {
            let v = 0.5 * (xv + 1.0);
            for (xu, wu) in x.iter().zip(&w) {
                let u = 0.5 * (xu + 1.0);
                triangle_points.push([u * (1.0 - v), v]);
                triangle_weights.push(0.25 * wu * wv * (1.0 - v));
            }
        }
        QuadratureRule { triangle_points, triangle_weights, edge_points, edge_weights, degree }
    }
}

/// Quadrature for trial/test degree `p`: exact to degree 2p + 2.
pub fn make_quadrature(p: usize) -> QuadratureRule {
    QuadratureRule::with_degree(2 * p + 2)
}
