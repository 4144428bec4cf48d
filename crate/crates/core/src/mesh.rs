//! Structured triangular meshes of axis-aligned rectangles.
//!
//! Every grid square is split along its lower-left to upper-right diagonal.
//! Square `(i, j)` owns cells `2(j nx + i)` (below the diagonal) and
//! `2(j nx + i) + 1` (above it). Edges are oriented from the lower to the
//! higher vertex index.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric side of the rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Left,
    Right,
    Top,
    Bottom,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Top,
        BoundaryTag::Bottom,
    ];
}

/// Absolute tolerance used to classify boundary edges.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Affine data of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    /// Vertex coordinates in local order.
    pub vertices: [[f64; 2]; 3],
    /// `jac[r][c]`: the columns are `x1 - x0` and `x2 - x0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// Inverse transpose of the Jacobian, maps reference gradients to physical ones.
    pub inv_t: [[f64; 2]; 2],
    pub area: f64,
    /// Length of local edge `i` (the edge opposite vertex `i`).
    pub edge_lengths: [f64; 3],
    /// Outward unit normal of local edge `i`.
    pub normals: [[f64; 2]; 3],
}

impl CellGeometry {
    /// Maps reference coordinates to physical coordinates.
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let [x0, y0] = self.vertices[0];
        [
            x0 + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            y0 + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    /// Reference coordinates of a physical point.
    pub fn pullback(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.vertices[0][0], x[1] - self.vertices[0][1]];
        // J^{-1} = (J^{-T})^T
        [
            self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1],
            self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1],
        ]
    }

    /// Maps a reference gradient to the physical gradient.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    /// Contravariant Piola push-forward of a reference vector.
    #[inline]
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        [
            (self.jac[0][0] * v[0] + self.jac[0][1] * v[1]) / self.det,
            (self.jac[1][0] * v[0] + self.jac[1][1] * v[1]) / self.det,
        ]
    }
}

/// Structured triangulation of `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    /// Vertex pairs with `edge[0] < edge[1]`.
    pub edges: Vec<[usize; 2]>,
    /// Per cell, local edge `i` (opposite vertex `i`) as (edge index, sign).
    pub cell_edges: Vec<[(usize, f64); 3]>,
    pub boundary_facets: Vec<(usize, BoundaryTag)>,
    /// Cells adjacent to each edge; the second entry is `None` on the boundary.
    pub edge_cells: Vec<(usize, Option<usize>)>,
    pub nx: usize,
    pub ny: usize,
    pub bounds: [f64; 4],
}

/// Builds the mesh and tags its boundary.
pub fn build_rect_mesh(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!("cell counts must be positive, got {nx}x{ny}")));
    }
    if !(x1 > x0 && y1 > y0) || !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(Error::invalid(format!(
            "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
        )));
    }
    let dx = (x1 - x0) / nx as f64;
    let dy = (y1 - y0) / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Pin the far sides exactly so boundary tests are exact.
            let x = if i == nx { x1 } else { x0 + i as f64 * dx };
            let y = if j == ny { y1 } else { y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }

    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    let mut edge_cells: Vec<(usize, Option<usize>)> = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let mut local = [(0usize, 0.0f64); 3];
        for (i, slot) in local.iter_mut().enumerate() {
            let a = cell[(i + 1) % 3];
            let b = cell[(i + 2) % 3];
            let key = (a.min(b), a.max(b));
            let e = *lookup.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edge_cells.push((c, None));
                edges.len() - 1
            });
            if edge_cells[e].0 != c {
                edge_cells[e].1 = Some(c);
            }
            *slot = (e, if a < b { 1.0 } else { -1.0 });
        }
        cell_edges.push(local);
    }

    let mesh = Mesh {
        vertices,
        cells,
        edges,
        cell_edges,
        boundary_facets: Vec::new(),
        edge_cells,
        nx,
        ny,
        bounds: [x0, y0, x1, y1],
    };
    tag_boundary(mesh)
}

/// Tags every boundary edge by the rectangle side it lies on.
pub fn tag_boundary(mut mesh: Mesh) -> Result<Mesh> {
    let [x0, y0, x1, y1] = mesh.bounds;
    let mut facets = Vec::new();
    for (e, &(_, other)) in mesh.edge_cells.iter().enumerate() {
        if other.is_some() {
            continue;
        }
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let on = |k: usize, v: f64| (pa[k] - v).abs() <= BOUNDARY_TOL && (pb[k] - v).abs() <= BOUNDARY_TOL;
        let tag = if on(0, x0) {
            BoundaryTag::Left
        } else if on(0, x1) {
            BoundaryTag::Right
        } else if on(1, y0) {
            BoundaryTag::Bottom
        } else if on(1, y1) {
            BoundaryTag::Top
        } else {
            return Err(Error::Internal(format!("boundary edge {e} lies on no side")));
        };
        facets.push((e, tag));
    }
    if facets.len() != 2 * (mesh.nx + mesh.ny) {
        return Err(Error::Internal(format!(
            "found {} boundary edges, expected {}",
            facets.len(),
            2 * (mesh.nx + mesh.ny)
        )));
    }
    mesh.boundary_facets = facets;
    Ok(mesh)
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Grid spacing in x and y.
    pub fn spacing(&self) -> [f64; 2] {
        let [x0, y0, x1, y1] = self.bounds;
        [(x1 - x0) / self.nx as f64, (y1 - y0) / self.ny as f64]
    }

    /// Mesh size `max(dx, dy)`.
    pub fn h(&self) -> f64 {
        let [dx, dy] = self.spacing();
        dx.max(dy)
    }

    pub fn area(&self) -> f64 {
        let [x0, y0, x1, y1] = self.bounds;
        (x1 - x0) * (y1 - y0)
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        let [a, b, c] = self.cells[cell];
        let vertices = [self.vertices[a], self.vertices[b], self.vertices[c]];
        let jac = [
            [vertices[1][0] - vertices[0][0], vertices[2][0] - vertices[0][0]],
            [vertices[1][1] - vertices[0][1], vertices[2][1] - vertices[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        let mut edge_lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        for i in 0..3 {
            let p = vertices[(i + 1) % 3];
            let q = vertices[(i + 2) % 3];
            let t = [q[0] - p[0], q[1] - p[1]];
            let len = t[0].hypot(t[1]);
            edge_lengths[i] = len;
            // Counterclockwise traversal: the outward normal is on the right.
            normals[i] = [t[1] / len, -t[0] / len];
        }
        CellGeometry {
            vertices,
            jac,
            det,
            inv_t,
            area: 0.5 * det,
            edge_lengths,
            normals,
        }
    }

    /// Unit normal of a global edge: the tangent (low to high vertex) rotated clockwise.
    pub fn edge_normal(&self, edge: usize) -> [f64; 2] {
        let [a, b] = self.edges[edge];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let t = [q[0] - p[0], q[1] - p[1]];
        let len = t[0].hypot(t[1]);
        [t[1] / len, -t[0] / len]
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edges[edge];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Point on a global edge at parameter `s` in `[0, 1]`, from its low to its high vertex.
    pub fn edge_point(&self, edge: usize, s: f64) -> [f64; 2] {
        let [a, b] = self.edges[edge];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
    }

    pub fn centroid(&self, cell: usize) -> [f64; 2] {
        let [a, b, c] = self.cells[cell];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Edges carrying one of the given tags.
    pub fn tagged_edges<'a>(&'a self, tags: &'a [BoundaryTag]) -> impl Iterator<Item = (usize, BoundaryTag)> + 'a {
        self.boundary_facets
            .iter()
            .copied()
            .filter(move |(_, t)| tags.contains(t))
    }

    /// Cell containing a point (closed cells; ties resolved toward lower indices).
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let [x0, y0, x1, y1] = self.bounds;
        let tol = 1e-12 * (x1 - x0).max(y1 - y0);
        if x[0] < x0 - tol || x[0] > x1 + tol || x[1] < y0 - tol || x[1] > y1 + tol {
            return None;
        }
        let [dx, dy] = self.spacing();
        let fx = ((x[0] - x0) / dx).max(0.0);
        let fy = ((x[1] - y0) / dy).max(0.0);
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        let (lx, ly) = (fx - i as f64, fy - j as f64);
        let base = 2 * (j * self.nx + i);
        Some(if ly <= lx { base } else { base + 1 })
    }
}
