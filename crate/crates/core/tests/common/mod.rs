#![allow(dead_code)]

use hodgelet::datagen::random_mesh_with;
use hodgelet::SimplicialComplex;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

/// A random valid complex on `n` vertices: a Delaunay mesh with a random
/// subset of triangles and edges removed, its vertices shuffled, and
/// Gaussian attributes of widths `dims`.
pub fn random_complex<R: Rng>(rng: &mut R, n: usize, dims: [usize; 3]) -> SimplicialComplex {
    let mesh = random_mesh_with(rng, n).unwrap();
    let keep_tri: f64 = rng.random_range(0.0..1.0);
    let keep_edge: f64 = rng.random_range(0.4..1.0);
    let triangles: Vec<[usize; 3]> = mesh
        .complex
        .triangles()
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < keep_tri)
        .collect();
    let mut needed = std::collections::HashSet::new();
    for &[a, b, c] in &triangles {
        needed.extend([[a, b], [b, c], [a, c]]);
    }
    let edges: Vec<[usize; 2]> = mesh
        .complex
        .edges()
        .iter()
        .copied()
        .filter(|e| needed.contains(e) || rng.random::<f64>() < keep_edge)
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let edges = edges.iter().map(|&[a, b]| [perm[a], perm[b]]).collect();
    let triangles = triangles.iter().map(|&[a, b, c]| [perm[a], perm[b], perm[c]]).collect();
    let mut sc = SimplicialComplex::try_new(n, edges, triangles).unwrap();
    for k in 0..3 {
        let rows = sc.count(k);
        sc.set_attributes(k, DMatrix::from_fn(rows, dims[k], |_, _| rng.sample(StandardNormal)));
    }
    sc
}

pub fn hollow_triangle() -> SimplicialComplex {
    SimplicialComplex::try_new(3, vec![[0, 1], [1, 2], [0, 2]], vec![]).unwrap()
}

pub fn filled_triangle() -> SimplicialComplex {
    SimplicialComplex::try_new(3, vec![[0, 1], [1, 2], [0, 2]], vec![[0, 1, 2]]).unwrap()
}

pub fn two_hollow_triangles() -> SimplicialComplex {
    SimplicialComplex::try_new(6, vec![[0, 1], [1, 2], [0, 2], [3, 4], [4, 5], [3, 5]], vec![]).unwrap()
}

/// Uniformly random permutation of `0..n`.
pub fn permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
