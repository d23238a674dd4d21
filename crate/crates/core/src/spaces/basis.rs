//! Equispaced Lagrange bases on the reference triangle (0,0), (1,0), (0,1).
//!
//! Node order: the three vertices, then `p - 1` nodes per local edge (edge
//! `i` runs from vertex `i+1` to vertex `i+2`), then interior nodes.

use super::SpaceError;

pub const MAX_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeBasis {
    degree: usize,
    /// Barycentric multi-indices (i0, i1, i2) with i0 + i1 + i2 = p.
    nodes: Vec<[usize; 3]>,
}

pub fn local_dimension(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

impl LagrangeBasis {
    pub fn new(p: usize) -> Result<Self, SpaceError> {
        if p == 0 || p > MAX_DEGREE {
            return Err(SpaceError::UnsupportedDegree(p));
        }
        let mut nodes = vec![[p, 0, 0], [0, p, 0], [0, 0, p]];
        for k in 1..p {
            nodes.push([0, p - k, k]);
        }
        for k in 1..p {
            nodes.push([k, 0, p - k]);
        }
        for k in 1..p {
            nodes.push([p - k, k, 0]);
        }
        for i1 in 1..p {
            for i2 in 1..p {
                if i1 + i2 < p {
                    nodes.push([p - i1 - i2, i1, i2]);
                }
            }
        }
        debug_assert_eq!(nodes.len(), local_dimension(p));
        Ok(LagrangeBasis { degree: p, nodes })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reference coordinates of node `k`.
    pub fn node(&self, k: usize) -> [f64; 2] {
        let p = self.degree as f64;
        [self.nodes[k][1] as f64 / p, self.nodes[k][2] as f64 / p]
    }

    /// Local indices of the `p - 1` interior nodes of local edge `i`,
    /// ordered from vertex `i+1` to vertex `i+2`.
    pub fn edge_nodes(&self, i: usize) -> std::ops::Range<usize> {
        let start = 3 + i * (self.degree - 1);
        start..start + self.degree - 1
    }

    pub fn interior_nodes(&self) -> std::ops::Range<usize> {
        3 + 3 * (self.degree - 1)..self.nodes.len()
    }

    /// Basis values at a reference point.
    pub fn values_into(&self, xi: [f64; 2], out: &mut [f64]) {
        let lambda = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let table = self.factor_table(lambda);
        for (k, idx) in self.nodes.iter().enumerate() {
            out[k] = table[0][idx[0]].0 * table[1][idx[1]].0 * table[2][idx[2]].0;
        }
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.values_into(xi, &mut v);
        v
    }

    /// Basis values and reference gradients at a reference point.
    pub fn values_and_gradients(&self, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let lambda = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let table = self.factor_table(lambda);
        let mut values = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        for idx in &self.nodes {
            let (f0, d0) = table[0][idx[0]];
            let (f1, d1) = table[1][idx[1]];
            let (f2, d2) = table[2][idx[2]];
            values.push(f0 * f1 * f2);
            let dl0 = d0 * f1 * f2;
            let dl1 = f0 * d1 * f2;
            let dl2 = f0 * f1 * d2;
            // lambda0 = 1 - xi - eta, lambda1 = xi, lambda2 = eta
            grads.push([dl1 - dl0, dl2 - dl0]);
        }
        (values, grads)
    }

    /// For each barycentric coordinate, the univariate factors
    /// prod_{m<i} (p*lambda - m) / (m + 1) and their lambda-derivatives,
    /// for i = 0..=p.
    fn factor_table(&self, lambda: [f64; 3]) -> [[(f64, f64); MAX_DEGREE + 1]; 3] {
        let p = self.degree;
        let pf = p as f64;
        let mut table = [[(0.0, 0.0); MAX_DEGREE + 1]; 3];
        for (c, &l) in lambda.iter().enumerate() {
            table[c][0] = (1.0, 0.0);
            for i in 1..=p {
                let (f, d) = table[c][i - 1];
                let m = (i - 1) as f64;
                let s = 1.0 / i as f64;
                let factor = (pf * l - m) * s;
                table[c][i] = (f * factor, d * factor + f * pf * s);
            }
        }
        table
    }
}

/// Basis values and reference gradients of degree `p` at `point`.
pub fn reference_basis(p: usize, point: [f64; 2]) -> Result<(Vec<f64>, Vec<[f64; 2]>), SpaceError> {
    Ok(LagrangeBasis::new(p)?.values_and_gradients(point))
}
