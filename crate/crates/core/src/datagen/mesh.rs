//! Random Delaunay meshes of the unit square and the de Rham map onto them.

use std::collections::BTreeSet;

use delaunator::{triangulate, Point};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::VectorField;
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;

const MIN_AREA: f64 = 1e-12;
const MAX_ATTEMPTS: usize = 100;

/// A triangulated point set with every triangle filled.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularMesh {
    pub points: Vec<[f64; 2]>,
    pub complex: SimplicialComplex,
}

fn area2([a, b, c]: [[f64; 2]; 3]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

/// Polar angle about the centre of the unit square, then radius.
fn polar_key(p: &[f64; 2]) -> (f64, f64) {
    let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
    (dy.atan2(dx), dx.hypot(dy))
}

/// Delaunay triangulation of the given points. Vertices are renumbered by
/// polar angle about `(0.5, 0.5)`, so canonical edge orientations run
/// anticlockwise about the centre, apart from edges crossing the cut along
/// the negative `x` direction.
pub fn mesh_from_points(points: &[[f64; 2]]) -> Result<TriangularMesh> {
    let mut points = points.to_vec();
    points.sort_by(|a, b| {
        let (ka, kb) = (polar_key(a), polar_key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let pts: Vec<Point> = points.iter().map(|&[x, y]| Point { x, y }).collect();
    let tri = triangulate(&pts);
    if tri.triangles.is_empty() {
        return Err(Error::Config("point set is degenerate".into()));
    }
    let mut triangles = Vec::with_capacity(tri.triangles.len() / 3);
    let mut edges = BTreeSet::new();
    for t in tri.triangles.chunks_exact(3) {
        let mut t = [t[0], t[1], t[2]];
        if area2(t.map(|i| points[i])).abs() < MIN_AREA {
            return Err(Error::Config("triangulation has a degenerate triangle".into()));
        }
        t.sort_unstable();
        edges.insert([t[0], t[1]]);
        edges.insert([t[1], t[2]]);
        edges.insert([t[0], t[2]]);
        triangles.push(t);
    }
    if edges.iter().any(|&[a, b]| points[a] == points[b]) {
        return Err(Error::Config("repeated point".into()));
    }
    triangles.sort_unstable();
    let complex = SimplicialComplex::try_new(points.len(), edges.into_iter().collect(), triangles)?;
    Ok(TriangularMesh { points, complex })
}

/// Random mesh of `[0, 1]²` with `n` vertices: the four corners plus `n − 4`
/// uniform points (just `n` uniform points when `n < 4`). Degenerate draws
/// are redrawn.
pub fn random_mesh_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<TriangularMesh> {
    if n < 3 {
        return Err(Error::Config(format!("a mesh needs at least 3 vertices, got {n}")));
    }
    for _ in 0..MAX_ATTEMPTS {
        let mut points = Vec::with_capacity(n);
        if n >= 4 {
            points.extend([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        }
        while points.len() < n {
            points.push([rng.random::<f64>(), rng.random::<f64>()]);
        }
        if let Ok(mesh) = mesh_from_points(&points) {
            return Ok(mesh);
        }
    }
    Err(Error::Config("could not draw a non-degenerate mesh".into()))
}

pub fn random_mesh(seed: u64, n: usize) -> Result<TriangularMesh> {
    random_mesh_with(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// `X^e = ∫₀¹ X(x₀ + t(x₁ − x₀)) · t̂ dt` for every oriented edge, with an
/// `order`-point Gauss–Legendre rule.
pub fn de_rham_project(field: &VectorField, mesh: &TriangularMesh, order: usize) -> Result<DVector<f64>> {
    de_rham_edges(field, &mesh.points, mesh.complex.edges(), order)
}

pub fn de_rham_edges(
    field: &VectorField,
    points: &[[f64; 2]],
    edges: &[[usize; 2]],
    order: usize,
) -> Result<DVector<f64>> {
    if order == 0 {
        return Err(Error::Config("quadrature order must be positive".into()));
    }
    let rule = gauss_legendre_unit(order);
    let mut out = DVector::zeros(edges.len());
    for (e, &[a, b]) in edges.iter().enumerate() {
        let (x0, x1) = (points[a], points[b]);
        let d = [x1[0] - x0[0], x1[1] - x0[1]];
        let len = d[0].hypot(d[1]);
        if len == 0.0 {
            return Err(Error::Config(format!("edge {e} has zero length")));
        }
        let tangent = [d[0] / len, d[1] / len];
        out[e] = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| {
                let [u, v] = field.eval([x0[0] + t * d[0], x0[1] + t * d[1]]);
                w * (u * tangent[0] + v * tangent[1])
            })
            .sum();
    }
    Ok(out)
}
