use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Task};
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    pub drop_disconnected: bool,
    /// One-hot vertex degrees when the dataset has no vertex attributes.
    pub vertex_degree_onehot: bool,
    /// One-hot edge degrees (edges sharing a vertex) when the dataset has no
    /// edge attributes.
    pub edge_degree_onehot: bool,
    /// Fill 3-cliques of complexes that have no triangles.
    pub clique_lift: bool,
}

fn edge_degrees(sc: &SimplicialComplex) -> Vec<usize> {
    let deg = sc.degrees();
    sc.edges().iter().map(|&[a, b]| deg[a] + deg[b] - 2).collect()
}

fn one_hot(values: &[usize], width: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(values.len(), width);
    for (i, &v) in values.iter().enumerate() {
        m[(i, v)] = 1.0;
    }
    m
}

/// Applies the selected steps in the order drop, lift, encode. Idempotent.
pub fn preprocess(ds: &Dataset, opts: &PreprocessOptions) -> Result<Dataset> {
    let mut complexes: Vec<SimplicialComplex> = ds
        .complexes
        .iter()
        .filter(|sc| !opts.drop_disconnected || sc.connected_components() <= 1)
        .cloned()
        .collect();
    if complexes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if opts.clique_lift {
        for sc in &mut complexes {
            if sc.is_graph() {
                *sc = sc.clique_lift()?;
            }
        }
    }
    if opts.vertex_degree_onehot && complexes[0].attribute_dim(0) == 0 {
        let width = complexes.iter().flat_map(|c| c.degrees()).max().unwrap_or(0) + 1;
        for sc in &mut complexes {
            let x = one_hot(&sc.degrees(), width);
            sc.set_attributes(0, x);
        }
    }
    if opts.edge_degree_onehot && complexes[0].attribute_dim(1) == 0 {
        let width = complexes.iter().flat_map(edge_degrees).max().unwrap_or(0) + 1;
        for sc in &mut complexes {
            let x = one_hot(&edge_degrees(sc), width);
            sc.set_attributes(1, x);
        }
    }
    let mut out = Dataset::new(complexes, Some(ds.task()))?;
    out.manifest.preprocessing = Some(opts.clone());
    out.manifest.generator = ds.manifest.generator.clone();
    Ok(out)
}

/// Draws `n` complexes without replacement, stratified by class for
/// classification tasks.
pub fn subsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n >= ds.len() {
        return Ok(ds.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(n);
    if let Task::Regression = ds.task() {
        let mut idx: Vec<usize> = (0..ds.len()).collect();
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..n]);
    } else {
        let labels = ds.labels();
        let mut classes: Vec<i64> = labels.iter().map(|y| *y as i64).collect();
        classes.sort_unstable();
        classes.dedup();
        let mut groups: Vec<Vec<usize>> = classes
            .iter()
            .map(|c| (0..ds.len()).filter(|&i| labels[i] as i64 == *c).collect())
            .collect();
        for g in &mut groups {
            g.shuffle(&mut rng);
        }
        let mut cursor = vec![0; groups.len()];
        while chosen.len() < n {
            for (g, c) in groups.iter().zip(&mut cursor) {
                if chosen.len() < n && *c < g.len() {
                    chosen.push(g[*c]);
                    *c += 1;
                }
            }
        }
        chosen.sort_unstable();
    }
    ds.subset(&chosen)
}
