//! Conforming triangle meshes.
//!
//! Elements are stored counterclockwise. Local edge `i` is the edge opposite
//! local vertex `i`, traversed from vertex `i+1` to vertex `i+2`. The
//! refinement edge used by newest-vertex bisection is always local edge 0, so
//! vertex 0 is the "newest" (peak) vertex of every element.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("number of subdivisions must be positive, got {0}")]
    InvalidResolution(usize),
    #[error("interface {axis}={value} cannot be represented with {n} subdivisions per axis")]
    InterfaceNotRepresentable { axis: char, value: f64, n: usize },
    #[error("degenerate rectangle [{0}, {1}] x [{2}, {3}]")]
    DegenerateDomain(f64, f64, f64, f64),
    #[error("edge ({0}, {1}) is shared by more than two elements")]
    NonManifoldEdge(usize, usize),
    #[error("element {0} has non-positive signed area")]
    Inverted(usize),
}

/// Polygonal domains supported by the structured mesh builder.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// (-1,1)^2 minus (-1,0]^2.
    LShape,
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
            Domain::LShape => 3.0,
        }
    }

    pub fn bounding_box(&self) -> [f64; 4] {
        match *self {
            Domain::Rectangle { x0, x1, y0, y1 } => [x0, x1, y0, y1],
            Domain::LShape => [-1.0, 1.0, -1.0, 1.0],
        }
    }
}

/// Lines the initial mesh has to resolve, e.g. material interfaces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interfaces {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// An edge of the skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Endpoints, ordered counterclockwise with respect to `minus`.
    pub vertices: [usize; 2],
    pub minus: usize,
    pub minus_edge: usize,
    pub plus: Option<(usize, usize)>,
    /// Unit normal pointing from `minus` to `plus` (outward on the boundary).
    pub normal: [f64; 2],
    pub diameter: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }

    pub fn plus_element(&self) -> Option<usize> {
        self.plus.map(|(e, _)| e)
    }
}

/// Affine map from the reference triangle (0,0), (1,0), (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub origin: Point,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub inverse_transpose: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
    pub perimeter: f64,
    pub diameter: f64,
}

impl ElementGeometry {
    fn new(v: [Point; 3]) -> Self {
        let a = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
        let b = [v[2][0] - v[0][0], v[2][1] - v[0][1]];
        let jacobian = [[a[0], b[0]], [a[1], b[1]]];
        let det = a[0] * b[1] - b[0] * a[1];
        // J^{-T} = (1/det) [[ J11, -J10], [-J01, J00]]
        let inverse_transpose = [
            [jacobian[1][1] / det, -jacobian[1][0] / det],
            [-jacobian[0][1] / det, jacobian[0][0] / det],
        ];
        let lengths = [dist(v[1], v[2]), dist(v[2], v[0]), dist(v[0], v[1])];
        ElementGeometry {
            origin: v[0],
            jacobian,
            inverse_transpose,
            det,
            area: 0.5 * det.abs(),
            perimeter: lengths.iter().sum(),
            diameter: lengths.iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn map(&self, xi: [f64; 2]) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    /// Reference coordinates of a physical point (affine inverse).
    pub fn inverse_map(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let it = &self.inverse_transpose;
        // J^{-1} = (J^{-T})^T
        [it[0][0] * d[0] + it[1][0] * d[1], it[0][1] * d[0] + it[1][1] * d[1]]
    }

    /// Physical gradient from a reference gradient.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let it = &self.inverse_transpose;
        [it[0][0] * g[0] + it[0][1] * g[1], it[1][0] * g[0] + it[1][1] * g[1]]
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_area(v: [Point; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

/// A conforming simplicial mesh with its face skeleton.
///
/// Meshes are immutable; [`Mesh::bisect`] returns a new mesh.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
    generation: Vec<u32>,
    parent: Vec<Option<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw vertices and counterclockwise elements. The
    /// refinement edge of each element is its longest edge.
    pub fn from_elements(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let elements = elements
            .into_iter()
            .map(|t| rotate_longest_edge_first(&vertices, t))
            .collect::<Vec<_>>();
        let n = elements.len();
        Self::assemble(vertices, elements, vec![0; n], vec![None; n])
    }

    fn assemble(
        vertices: Vec<Point>,
        elements: Vec<[usize; 3]>,
        generation: Vec<u32>,
        parent: Vec<Option<usize>>,
    ) -> Result<Self, MeshError> {
        let mut geometry = Vec::with_capacity(elements.len());
        for (e, t) in elements.iter().enumerate() {
            let v = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            if signed_area(v) <= 0.0 {
                return Err(MeshError::Inverted(e));
            }
            geometry.push(ElementGeometry::new(v));
        }
        let (faces, element_faces) = compute_skeleton(&vertices, &elements)?;
        Ok(Mesh { vertices, elements, faces, element_faces, geometry, generation, parent })
    }

    /// Tensor-product triangulation of `domain` with `n` cells per unit of the
    /// reference length (per axis for rectangles, per unit square for the
    /// L-shape). Grid lines are snapped so that every interface line is a
    /// union of mesh edges.
    pub fn structured(domain: &Domain, n: usize, interfaces: &Interfaces) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::InvalidResolution(n));
        }
        match *domain {
            Domain::Rectangle { x0, x1, y0, y1 } => {
                if !(x1 > x0 && y1 > y0) {
                    return Err(MeshError::DegenerateDomain(x0, x1, y0, y1));
                }
                let xs = grid_line_positions(x0, x1, n, &interfaces.x, 'x')?;
                let ys = grid_line_positions(y0, y1, n, &interfaces.y, 'y')?;
                Ok(tensor_mesh(&xs, &ys, |_, _| true, |_, _| Diagonal::Rising))
            }
            Domain::LShape => {
                let xs = grid_line_positions(-1.0, 1.0, 2 * n, &interfaces.x, 'x')?;
                let ys = grid_line_positions(-1.0, 1.0, 2 * n, &interfaces.y, 'y')?;
                // Diagonals run radially away from the reentrant corner.
                Ok(tensor_mesh(
                    &xs,
                    &ys,
                    |cx, cy| !(cx < 0.0 && cy < 0.0),
                    |cx, cy| if cx > 0.0 && cy > 0.0 { Diagonal::Rising } else { Diagonal::Falling },
                ))
            }
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Face index of each local edge.
    pub fn element_faces(&self, e: usize) -> [usize; 3] {
        self.element_faces[e]
    }

    pub fn geometry(&self, e: usize) -> &ElementGeometry {
        &self.geometry[e]
    }

    pub fn element_vertices(&self, e: usize) -> [Point; 3] {
        let t = self.elements[e];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Longest edge length h_T.
    pub fn diameter(&self, e: usize) -> f64 {
        self.geometry[e].diameter
    }

    pub fn max_diameter(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    pub fn generation(&self, e: usize) -> u32 {
        self.generation[e]
    }

    /// Element of the previous mesh this element was cut from (`None` for an
    /// initial mesh).
    pub fn parent(&self, e: usize) -> Option<usize> {
        self.parent[e]
    }

    /// Refinement edge as a vertex pair.
    pub fn refinement_edge(&self, e: usize) -> [usize; 2] {
        let t = self.elements[e];
        [t[1], t[2]]
    }

    pub fn centroid(&self, e: usize) -> Point {
        let v = self.element_vertices(e);
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Smallest interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| {
                let v = self.element_vertices(e);
                (0..3)
                    .map(|i| {
                        let p = v[i];
                        let a = v[(i + 1) % 3];
                        let b = v[(i + 2) % 3];
                        let u = [a[0] - p[0], a[1] - p[1]];
                        let w = [b[0] - p[0], b[1] - p[1]];
                        let c = (u[0] * w[0] + u[1] * w[1]) / (dist(a, p) * dist(b, p));
                        c.clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Newest-vertex bisection of the marked elements with conformity
    /// closure. Every marked element is cut at least once; neighbours are cut
    /// as needed so that no hanging nodes remain.
    pub fn bisect(&self, marked: &[usize]) -> Mesh {
        let mut edge_marked = vec![false; self.faces.len()];
        let mut queue = VecDeque::new();
        for &e in marked {
            let f = self.element_faces[e][0];
            if !edge_marked[f] {
                edge_marked[f] = true;
                queue.push_back(f);
            }
        }
        // Any element with a marked edge must also have its refinement edge
        // marked.
        while let Some(f) = queue.pop_front() {
            let face = &self.faces[f];
            let mut neighbours = vec![face.minus];
            neighbours.extend(face.plus_element());
            for e in neighbours {
                let r = self.element_faces[e][0];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    queue.push_back(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoints = HashMap::new();
        for (f, face) in self.faces.iter().enumerate() {
            if edge_marked[f] {
                let [a, b] = face.vertices;
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                midpoints.insert(edge_key(a, b), vertices.len());
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }

        let mut elements = Vec::with_capacity(self.elements.len() * 2);
        let mut generation = Vec::with_capacity(self.elements.len() * 2);
        let mut parent = Vec::with_capacity(self.elements.len() * 2);
        let mut pieces = Vec::with_capacity(4);
        for (e, &t) in self.elements.iter().enumerate() {
            pieces.clear();
            split_recursive(t, 0, &midpoints, &mut pieces);
            for &(child, depth) in &pieces {
                elements.push(child);
                generation.push(self.generation[e] + depth);
                parent.push(Some(e));
            }
        }
        Mesh::assemble(vertices, elements, generation, parent)
            .expect("newest-vertex bisection preserves conformity and orientation")
    }

    /// Bisects every element twice, halving all element diameters.
    pub fn refine_uniform(&self) -> Mesh {
        let all: Vec<usize> = (0..self.num_elements()).collect();
        let once = self.bisect(&all);
        let all: Vec<usize> = (0..once.num_elements()).collect();
        let twice = once.bisect(&all);
        // Collapse the genealogy onto this mesh.
        let parent = (0..twice.num_elements())
            .map(|e| twice.parent[e].and_then(|p| once.parent[p]))
            .collect();
        Mesh { parent, ..twice }
    }

    /// Genealogy map composed over several refinements: for each element of
    /// `self`, the element of `ancestor` that contains it, given the chain of
    /// intermediate meshes (oldest first, excluding `self`).
    pub fn ancestor_map(&self, chain: &[&Mesh]) -> Vec<usize> {
        let mut map: Vec<usize> = (0..self.num_elements()).collect();
        let mut current = self;
        for previous in chain.iter().rev() {
            map = map.iter().map(|&e| current.parent[e].expect("mesh has no genealogy")).collect();
            current = previous;
        }
        map
    }

    /// Locates the element containing `x` (linear scan).
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.num_elements()).find(|&e| self.contains(e, x))
    }

    /// Whether `x` lies in the closed element `e`.
    pub fn contains(&self, e: usize, x: Point) -> bool {
        const TOL: f64 = 1e-12;
        let xi = self.geometry[e].inverse_map(x);
        xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn split_recursive(
    t: [usize; 3],
    depth: u32,
    midpoints: &HashMap<(usize, usize), usize>,
    out: &mut Vec<([usize; 3], u32)>,
) {
    let [a, b, c] = t;
    match midpoints.get(&edge_key(b, c)) {
        Some(&m) => {
            split_recursive([m, a, b], depth + 1, midpoints, out);
            split_recursive([m, c, a], depth + 1, midpoints, out);
        }
        None => out.push((t, depth)),
    }
}

fn rotate_longest_edge_first(vertices: &[Point], t: [usize; 3]) -> [usize; 3] {
    let len = |i: usize| dist(vertices[t[(i + 1) % 3]], vertices[t[(i + 2) % 3]]);
    let mut best = 0;
    for i in 1..3 {
        if len(i) > len(best) * (1.0 + 1e-12) {
            best = i;
        }
    }
    [t[best], t[(best + 1) % 3], t[(best + 2) % 3]]
}

/// Builds the face skeleton. Faces are numbered in order of first
/// appearance, so the lower-numbered element of an interior face is `minus`.
pub fn compute_skeleton(
    vertices: &[Point],
    elements: &[[usize; 3]],
) -> Result<(Vec<Face>, Vec<[usize; 3]>), MeshError> {
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(elements.len() * 2);
    let mut faces: Vec<Face> = Vec::with_capacity(elements.len() * 2);
    let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
    for (e, t) in elements.iter().enumerate() {
        for i in 0..3 {
            let a = t[(i + 1) % 3];
            let b = t[(i + 2) % 3];
            let key = edge_key(a, b);
            match lookup.get(&key) {
                None => {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let len = dist(pa, pb);
                    let normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                    lookup.insert(key, faces.len());
                    element_faces[e][i] = faces.len();
                    faces.push(Face {
                        vertices: [a, b],
                        minus: e,
                        minus_edge: i,
                        plus: None,
                        normal,
                        diameter: len,
                    });
                }
                Some(&f) => {
                    if faces[f].plus.is_some() {
                        return Err(MeshError::NonManifoldEdge(key.0, key.1));
                    }
                    faces[f].plus = Some((e, i));
                    element_faces[e][i] = f;
                }
            }
        }
    }
    Ok((faces, element_faces))
}

fn grid_line_positions(lo: f64, hi: f64, n: usize, interfaces: &[f64], axis: char) -> Result<Vec<f64>, MeshError> {
    let len = hi - lo;
    let mut breaks: Vec<(usize, f64)> = vec![(0, lo)];
    let mut inner: Vec<f64> = interfaces.iter().cloned().filter(|&c| c > lo && c < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    for c in inner {
        let k = (n as f64 * (c - lo) / len).round() as usize;
        let previous = breaks.last().expect("non-empty").0;
        if k <= previous || k >= n {
            return Err(MeshError::InterfaceNotRepresentable { axis, value: c, n });
        }
        breaks.push((k, c));
    }
    breaks.push((n, hi));
    let mut positions = Vec::with_capacity(n + 1);
    for w in breaks.windows(2) {
        let ((k0, x0), (k1, x1)) = (w[0], w[1]);
        for k in k0..k1 {
            positions.push(x0 + (x1 - x0) * (k - k0) as f64 / (k1 - k0) as f64);
        }
    }
    positions.push(hi);
    Ok(positions)
}

#[derive(Clone, Copy)]
enum Diagonal {
    /// bottom-left to top-right
    Rising,
    /// bottom-right to top-left
    Falling,
}

fn tensor_mesh(
    xs: &[f64],
    ys: &[f64],
    keep: impl Fn(f64, f64) -> bool,
    diagonal: impl Fn(f64, f64) -> Diagonal,
) -> Mesh {
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    let mut vertex = |i: usize, j: usize, vertices: &mut Vec<Point>| {
        let k = j * (nx + 1) + i;
        if index[k] == usize::MAX {
            index[k] = vertices.len();
            vertices.push([xs[i], ys[j]]);
        }
        index[k]
    };
    for j in 0..ny {
        for i in 0..nx {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if !keep(cx, cy) {
                continue;
            }
            let p00 = vertex(i, j, &mut vertices);
            let p10 = vertex(i + 1, j, &mut vertices);
            let p01 = vertex(i, j + 1, &mut vertices);
            let p11 = vertex(i + 1, j + 1, &mut vertices);
            match diagonal(cx, cy) {
                Diagonal::Rising => {
                    elements.push([p10, p11, p00]);
                    elements.push([p01, p00, p11]);
                }
                Diagonal::Falling => {
                    elements.push([p00, p10, p01]);
                    elements.push([p11, p01, p10]);
                }
            }
        }
    }
    Mesh::from_elements(vertices, elements).expect("tensor grids are conforming")
}
