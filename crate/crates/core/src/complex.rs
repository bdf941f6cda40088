//! Attributed simplicial 2-complexes and their signed incidence structure.
//!
//! A complex stores vertices as the index range `0..num_vertices`, oriented
//! edges as ordered vertex pairs and oriented triangles as ordered vertex
//! triples. Attributes live in one column-major matrix per dimension, so the
//! `d`-th attribute signal of dimension `k` is the contiguous column
//! `attributes(k).column(d)`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Highest simplex dimension handled by this crate.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    num_vertices: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    attributes: [DMatrix<f64>; 3],
    label: Option<f64>,
}

impl SimplicialComplex {
    /// Builds a complex without checking any invariant. Use [`validate`] or
    /// [`SimplicialComplex::try_new`] when the input is untrusted.
    ///
    /// [`validate`]: SimplicialComplex::validate
    pub fn from_parts(num_vertices: usize, edges: Vec<[usize; 2]>, triangles: Vec<[usize; 3]>) -> Self {
        let attributes = [
            DMatrix::zeros(num_vertices, 0),
            DMatrix::zeros(edges.len(), 0),
            DMatrix::zeros(triangles.len(), 0),
        ];
        Self {
            num_vertices,
            edges,
            triangles,
            attributes,
            label: None,
        }
    }

    /// Builds a complex and rejects it if [`validate`](Self::validate) reports anything.
    pub fn try_new(num_vertices: usize, edges: Vec<[usize; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let sc = Self::from_parts(num_vertices, edges, triangles);
        sc.validate().into_result()?;
        Ok(sc)
    }

    /// Canonical orientation: every edge runs from its lower to its upper
    /// vertex index and every triangle lists its vertices in sorted order.
    /// Attributes are carried over unchanged.
    pub fn canonicalized(mut self) -> Self {
        for e in &mut self.edges {
            if e[0] > e[1] {
                e.swap(0, 1);
            }
        }
        for t in &mut self.triangles {
            t.sort_unstable();
        }
        self
    }

    pub fn with_attributes(mut self, k: usize, x: DMatrix<f64>) -> Self {
        self.attributes[k] = x;
        self
    }

    pub fn set_attributes(&mut self, k: usize, x: DMatrix<f64>) {
        self.attributes[k] = x;
    }

    pub fn with_label(mut self, y: f64) -> Self {
        self.label = Some(y);
        self
    }

    pub fn set_label(&mut self, y: Option<f64>) {
        self.label = y;
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Number of `k`-simplices.
    pub fn count(&self, k: usize) -> usize {
        match k {
            0 => self.num_vertices,
            1 => self.edges.len(),
            2 => self.triangles.len(),
            _ => 0,
        }
    }

    /// Attribute matrix `X_k` of shape `N_k × D_k`.
    pub fn attributes(&self, k: usize) -> &DMatrix<f64> {
        &self.attributes[k]
    }

    pub fn attribute_dim(&self, k: usize) -> usize {
        self.attributes[k].ncols()
    }

    pub fn label(&self) -> Option<f64> {
        self.label
    }

    pub fn is_graph(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Checks closure, self-loops, duplicate simplices and attribute shapes.
    /// Violations are collected, never raised.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen_edges: HashMap<[usize; 2], usize> = HashMap::new();
        for (i, &[a, b]) in self.edges.iter().enumerate() {
            for v in [a, b] {
                if v >= self.num_vertices {
                    violations.push(Violation::MissingVertex { edge: i, vertex: v });
                }
            }
            if a == b {
                violations.push(Violation::SelfLoop { edge: i, vertex: a });
                continue;
            }
            let key = sorted2(a, b);
            if let Some(&first) = seen_edges.get(&key) {
                violations.push(Violation::DuplicateEdge { first, duplicate: i });
            } else {
                seen_edges.insert(key, i);
            }
        }

        let mut seen_triangles: HashMap<[usize; 3], usize> = HashMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            let key = sorted3(*t);
            if key[0] == key[1] || key[1] == key[2] {
                violations.push(Violation::DegenerateTriangle { triangle: i });
                continue;
            }
            if let Some(&first) = seen_triangles.get(&key) {
                violations.push(Violation::DuplicateTriangle { first, duplicate: i });
            } else {
                seen_triangles.insert(key, i);
            }
            for [a, b] in triangle_faces(*t) {
                if !seen_edges.contains_key(&sorted2(a, b)) {
                    violations.push(Violation::MissingFace {
                        triangle: i,
                        face: [a, b],
                    });
                }
            }
        }

        for k in 0..=MAX_DIM {
            let rows = self.attributes[k].nrows();
            if rows != self.count(k) {
                violations.push(Violation::AttributeShape {
                    dim: k,
                    rows,
                    expected: self.count(k),
                });
            }
        }
        ValidationReport { violations }
    }

    /// Signed incidence matrices `B_1` and `B_2`.
    ///
    /// Edge `(a, b)` contributes `-1` at `a` and `+1` at `b`. Triangle
    /// `(a, b, c)` contributes `+1` on each boundary edge whose stored
    /// orientation agrees with the traversal `a → b → c → a` and `-1` otherwise.
    pub fn incidence_matrices(&self) -> Result<IncidenceMatrices> {
        self.validate().into_result()?;
        let b1 = SignedIncidence {
            nrows: self.num_vertices,
            columns: self.edges.iter().map(|&[a, b]| vec![(a, -1), (b, 1)]).collect(),
        };
        let index = self.edge_index();
        let b2 = SignedIncidence {
            nrows: self.edges.len(),
            columns: self
                .triangles
                .iter()
                .map(|&t| {
                    triangle_faces(t)
                        .iter()
                        .map(|&[a, b]| {
                            let e = index[&sorted2(a, b)];
                            (e, if self.edges[e] == [a, b] { 1 } else { -1 })
                        })
                        .collect()
                })
                .collect(),
        };
        Ok(IncidenceMatrices { b1, b2 })
    }

    /// Map from an unordered vertex pair to the edge index.
    fn edge_index(&self) -> HashMap<[usize; 2], usize> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, &[a, b])| (sorted2(a, b), i))
            .collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for &[a, b] in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Vertex degrees in the underlying graph.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for &[a, b] in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Number of connected components of the 1-skeleton.
    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.num_vertices).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.num_vertices;
        for &[a, b] in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                count -= 1;
            }
        }
        count
    }

    /// Fills every 3-clique of a graph with a canonically oriented triangle.
    /// Vertex and edge data are untouched; the new triangles carry no attributes.
    pub fn clique_lift(&self) -> Result<Self> {
        if !self.triangles.is_empty() {
            return Err(Error::AlreadyHasTriangles(self.triangles.len()));
        }
        let adj = self.adjacency();
        let mut triangles = Vec::new();
        for a in 0..self.num_vertices {
            for (i, &b) in adj[a].iter().enumerate() {
                if b <= a {
                    continue;
                }
                for &c in &adj[a][i + 1..] {
                    if adj[b].binary_search(&c).is_ok() {
                        triangles.push([a, b, c]);
                    }
                }
            }
        }
        let mut out = self.clone();
        out.attributes[2] = DMatrix::zeros(triangles.len(), 0);
        out.triangles = triangles;
        Ok(out)
    }

    /// Line graph: one vertex per input edge carrying that edge's attributes,
    /// and an edge between every pair of input edges that share a vertex.
    pub fn line_graph(&self) -> Result<Self> {
        if self.attribute_dim(1) == 0 {
            return Err(Error::MissingAttributes { dim: 1 });
        }
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.num_vertices];
        for (i, &[a, b]) in self.edges.iter().enumerate() {
            incident[a].push(i);
            incident[b].push(i);
        }
        let mut edges = Vec::new();
        for list in &incident {
            for (p, &e) in list.iter().enumerate() {
                for &f in &list[p + 1..] {
                    edges.push(sorted2(e, f));
                }
            }
        }
        edges.sort_unstable();
        let mut out =
            Self::from_parts(self.edges.len(), edges, Vec::new()).with_attributes(0, self.attributes[1].clone());
        out.label = self.label;
        Ok(out)
    }

    /// Applies a relabeling: vertex `v` becomes `vertex_perm[v]`, edge `e`
    /// moves to position `edge_perm[e]` and triangle `t` to `triangle_perm[t]`.
    /// Orientations follow the vertices, so the result is the same oriented
    /// complex under new names.
    pub fn relabeled(&self, vertex_perm: &[usize], edge_perm: &[usize], triangle_perm: &[usize]) -> Self {
        let mut edges = vec![[0; 2]; self.edges.len()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            edges[edge_perm[e]] = [vertex_perm[a], vertex_perm[b]];
        }
        let mut triangles = vec![[0; 3]; self.triangles.len()];
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            triangles[triangle_perm[t]] = [vertex_perm[a], vertex_perm[b], vertex_perm[c]];
        }
        let perms: [&[usize]; 3] = [vertex_perm, edge_perm, triangle_perm];
        let attributes = std::array::from_fn(|k| {
            let x = &self.attributes[k];
            let mut y = DMatrix::zeros(x.nrows(), x.ncols());
            for (i, &p) in perms[k].iter().enumerate().take(x.nrows()) {
                y.row_mut(p).copy_from(&x.row(i));
            }
            y
        });
        Self {
            num_vertices: self.num_vertices,
            edges,
            triangles,
            attributes,
            label: self.label,
        }
    }

    /// Reverses the orientation of edge `e`, negating its attribute row.
    pub fn flip_edge(&mut self, e: usize) {
        self.edges[e].swap(0, 1);
        let mut row = self.attributes[1].row_mut(e);
        row.neg_mut();
    }
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

/// Boundary edges of an oriented triangle in traversal order.
fn triangle_faces([a, b, c]: [usize; 3]) -> [[usize; 2]; 3] {
    [[a, b], [b, c], [c, a]]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingVertex { edge: usize, vertex: usize },
    SelfLoop { edge: usize, vertex: usize },
    DuplicateEdge { first: usize, duplicate: usize },
    DegenerateTriangle { triangle: usize },
    DuplicateTriangle { first: usize, duplicate: usize },
    MissingFace { triangle: usize, face: [usize; 2] },
    AttributeShape { dim: usize, rows: usize, expected: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingVertex { edge, vertex } => {
                write!(f, "edge {edge} references missing vertex {vertex}")
            }
            Violation::SelfLoop { edge, vertex } => {
                write!(f, "edge {edge} is a self-loop on vertex {vertex}")
            }
            Violation::DuplicateEdge { first, duplicate } => {
                write!(f, "edge {duplicate} duplicates edge {first}")
            }
            Violation::DegenerateTriangle { triangle } => {
                write!(f, "triangle {triangle} repeats a vertex")
            }
            Violation::DuplicateTriangle { first, duplicate } => {
                write!(f, "triangle {duplicate} duplicates triangle {first}")
            }
            Violation::MissingFace { triangle, face } => write!(
                f,
                "triangle {triangle} has face {{{}, {}}} missing from the edge list",
                face[0], face[1]
            ),
            Violation::AttributeShape { dim, rows, expected } => write!(
                f,
                "attribute matrix of dimension {dim} has {rows} rows, expected {expected}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidComplex(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Sparse signed incidence matrix stored by columns of `(row, sign)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedIncidence {
    nrows: usize,
    columns: Vec<Vec<(usize, i8)>>,
}

impl SignedIncidence {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            columns: vec![Vec::new(); ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, i8)] {
        &self.columns[j]
    }

    pub fn to_dense(&self) -> DMatrix<i64> {
        let mut m = DMatrix::zeros(self.nrows, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, s) in col {
                m[(i, j)] += s as i64;
            }
        }
        m
    }

    pub fn to_dense_f64(&self) -> DMatrix<f64> {
        self.to_dense().map(|v| v as f64)
    }

    /// Exact integer product `self · rhs` in sparse column form.
    pub fn mul(&self, rhs: &SignedIncidence) -> Result<Vec<HashMap<usize, i64>>> {
        if self.ncols() != rhs.nrows {
            return Err(Error::DimensionMismatch {
                what: "incidence product",
                expected: self.ncols(),
                found: rhs.nrows,
            });
        }
        Ok(rhs
            .columns
            .iter()
            .map(|col| {
                let mut acc: HashMap<usize, i64> = HashMap::new();
                for &(k, s) in col {
                    for &(i, t) in &self.columns[k] {
                        *acc.entry(i).or_default() += (s as i64) * (t as i64);
                    }
                }
                acc.retain(|_, v| *v != 0);
                acc
            })
            .collect())
    }

    /// `self · selfᵀ` as a dense matrix.
    pub fn gram_rows(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.nrows);
        for col in &self.columns {
            for &(i, s) in col {
                for &(j, t) in col {
                    m[(i, j)] += (s as f64) * (t as f64);
                }
            }
        }
        m
    }

    /// `selfᵀ · self` as a dense matrix.
    pub fn gram_cols(&self) -> DMatrix<f64> {
        let n = self.columns.len();
        let mut rows: Vec<Vec<(usize, i8)>> = vec![Vec::new(); self.nrows];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, s) in col {
                rows[i].push((j, s));
            }
        }
        let mut m = DMatrix::zeros(n, n);
        for row in &rows {
            for &(a, s) in row {
                for &(b, t) in row {
                    m[(a, b)] += (s as f64) * (t as f64);
                }
            }
        }
        m
    }

    /// Dense product `self · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, s) in col {
                out[i] += s as f64 * v[j];
            }
        }
        out
    }

    /// Dense product `selfᵀ · v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(i, s)| s as f64 * v[i]).sum())
            .collect()
    }
}

/// `B_1` (vertices × edges) and `B_2` (edges × triangles). `B_0` and `B_3`
/// are zero maps and are materialized on request by [`IncidenceMatrices::boundary`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrices {
    pub b1: SignedIncidence,
    pub b2: SignedIncidence,
}

impl IncidenceMatrices {
    pub fn count(&self, k: usize) -> usize {
        match k {
            0 => self.b1.nrows(),
            1 => self.b1.ncols(),
            2 => self.b2.ncols(),
            _ => 0,
        }
    }

    /// `B_k` for `k ∈ 0..=3`, with `B_0 : R^{N_0} → R^0` and `B_3 : R^0 → R^{N_2}` zero.
    pub fn boundary(&self, k: usize) -> SignedIncidence {
        match k {
            0 => SignedIncidence::zero(0, self.count(0)),
            1 => self.b1.clone(),
            2 => self.b2.clone(),
            _ => SignedIncidence::zero(self.count(2), 0),
        }
    }

    /// True when every entry of `B_1 · B_2` is exactly zero.
    pub fn boundary_of_boundary_vanishes(&self) -> bool {
        self.b1
            .mul(&self.b2)
            .map(|cols| cols.iter().all(|c| c.is_empty()))
            .unwrap_or(false)
    }
}

/// Unordered edge set, handy for comparing complexes up to orientation.
pub fn undirected_edge_set(sc: &SimplicialComplex) -> HashSet<[usize; 2]> {
    sc.edges.iter().map(|&[a, b]| sorted2(a, b)).collect()
}
