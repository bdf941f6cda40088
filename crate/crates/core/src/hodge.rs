//! Hodge Laplacians and their spectra split into exact, co-exact and
//! harmonic blocks.
//!
//! For dimension `k` the lower Laplacian is `B_kᵀ B_k`, the upper Laplacian
//! `B_{k+1} B_{k+1}ᵀ` and the Hodge Laplacian their sum. Since
//! `B_k B_{k+1} = 0` the non-zero eigenpairs of the two parts are also
//! eigenpairs of the sum, and `R^{N_k}` splits orthogonally into
//! `im(B_kᵀ) ⊕ im(B_{k+1}) ⊕ ker(L_k)`.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::complex::{IncidenceMatrices, MAX_DIM};
use crate::error::{Error, Result};

/// Relative zero-eigenvalue threshold: `λ ≤ ZERO_REL · max(λ_max, 1)` counts as zero.
pub const ZERO_REL: f64 = 1e-8;
/// Relative slack for the positive semi-definiteness check.
pub const PSD_REL: f64 = 1e-10;
/// Relative bound on `‖L u − λ u‖₂ / ‖L‖₂` for every reported eigenpair.
pub const RESIDUAL_REL: f64 = 1e-8;
/// Tolerance on `‖UᵀU − I‖_max` before the basis is re-orthonormalized.
pub const ORTHO_TOL: f64 = 1e-10;

/// Lower and upper parts of the Hodge Laplacian of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub k: usize,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

impl Laplacian {
    pub fn full(&self) -> DMatrix<f64> {
        &self.lower + &self.upper
    }

    pub fn size(&self) -> usize {
        self.lower.nrows()
    }
}

/// Hodge Laplacians for `k = 0, 1, 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeLaplacians {
    pub dims: [Laplacian; 3],
}

impl HodgeLaplacians {
    pub fn compute(b: &IncidenceMatrices) -> Result<Self> {
        Ok(Self {
            dims: [hodge_laplacian(b, 0)?, hodge_laplacian(b, 1)?, hodge_laplacian(b, 2)?],
        })
    }

    pub fn get(&self, k: usize) -> &Laplacian {
        &self.dims[k]
    }
}

/// `L_k^low = B_kᵀB_k` and `L_k^up = B_{k+1}B_{k+1}ᵀ` for a single `k`.
pub fn hodge_laplacian(b: &IncidenceMatrices, k: usize) -> Result<Laplacian> {
    if k > MAX_DIM {
        return Err(Error::DimensionMismatch {
            what: "simplex dimension",
            expected: MAX_DIM,
            found: k,
        });
    }
    let lower_b = b.boundary(k);
    let upper_b = b.boundary(k + 1);
    if lower_b.ncols() != upper_b.nrows() {
        return Err(Error::DimensionMismatch {
            what: "incidence chain",
            expected: lower_b.ncols(),
            found: upper_b.nrows(),
        });
    }
    Ok(Laplacian {
        k,
        lower: lower_b.gram_cols(),
        upper: upper_b.gram_rows(),
    })
}

/// The Hodge subspaces of a `k`-signal space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HodgeComponent {
    Exact,
    CoExact,
    Harmonic,
}

impl HodgeComponent {
    pub const ALL: [HodgeComponent; 3] = [Self::Exact, Self::CoExact, Self::Harmonic];

    /// Whether the subspace is structurally zero at dimension `k` (no
    /// `(k−1)`-simplices below vertices, no 3-simplices above triangles).
    pub fn vanishes_at(self, k: usize) -> bool {
        matches!((self, k), (Self::Exact, 0) | (Self::CoExact, MAX_DIM))
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::Exact => "e",
            Self::CoExact => "c",
            Self::Harmonic => "h",
        }
    }
}

/// Eigenvalues with their orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBlock {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenBlock {
    pub fn empty(n: usize) -> Self {
        Self {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(n, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Orthogonal projection `U Uᵀ x` onto the span of the block.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.vectors * (self.vectors.transpose() * x)
    }

    fn select(values: &DVector<f64>, vectors: &DMatrix<f64>, keep: &[usize]) -> Self {
        let values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| values[i]));
        let vectors = vectors.select_columns(keep);
        Self { values, vectors }
    }
}

/// Spectrum of one dimension split by Hodge subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpectrum {
    pub k: usize,
    pub size: usize,
    pub exact: EigenBlock,
    pub coexact: EigenBlock,
    pub harmonic: EigenBlock,
}

impl DimSpectrum {
    pub fn block(&self, c: HodgeComponent) -> &EigenBlock {
        match c {
            HodgeComponent::Exact => &self.exact,
            HodgeComponent::CoExact => &self.coexact,
            HodgeComponent::Harmonic => &self.harmonic,
        }
    }

    pub fn block_sizes(&self) -> [usize; 3] {
        [self.exact.len(), self.coexact.len(), self.harmonic.len()]
    }

    /// Dimension of the harmonic subspace, i.e. the `k`-th Betti number.
    pub fn betti(&self) -> usize {
        self.harmonic.len()
    }

    /// The whole spectrum `[U_e U_c U_h]` as one unsplit block.
    pub fn unsplit(&self) -> EigenBlock {
        let blocks = [&self.exact, &self.coexact, &self.harmonic];
        let values = DVector::from_iterator(self.size, blocks.iter().flat_map(|b| b.values.iter().copied()));
        let cols: Vec<_> = blocks.iter().flat_map(|b| b.vectors.column_iter()).collect();
        let vectors = if cols.is_empty() {
            DMatrix::zeros(self.size, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        EigenBlock { values, vectors }
    }

    /// Splits a `k`-signal into its exact, co-exact and harmonic parts.
    pub fn project(&self, x: &DVector<f64>) -> Result<[DVector<f64>; 3]> {
        if x.len() != self.size {
            return Err(Error::DimensionMismatch {
                what: "signal length",
                expected: self.size,
                found: x.len(),
            });
        }
        Ok([self.exact.project(x), self.coexact.project(x), self.harmonic.project(x)])
    }
}

/// Per-dimension Hodge spectra. Dimensions that were not requested are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HodgeSpectrum {
    pub dims: [Option<DimSpectrum>; 3],
}

impl HodgeSpectrum {
    /// Spectra of all three dimensions.
    pub fn compute(b: &IncidenceMatrices) -> Result<Self> {
        Self::compute_dims(b, &[0, 1, 2])
    }

    /// Spectra of the listed dimensions only; the others stay `None`.
    pub fn compute_dims(b: &IncidenceMatrices, dims: &[usize]) -> Result<Self> {
        let mut out: [Option<DimSpectrum>; 3] = Default::default();
        for &k in dims {
            if out[k].is_none() {
                out[k] = Some(decompose(&hodge_laplacian(b, k)?)?);
            }
        }
        Ok(Self { dims: out })
    }

    pub fn get(&self, k: usize) -> Option<&DimSpectrum> {
        self.dims.get(k).and_then(|d| d.as_ref())
    }

    pub fn require(&self, k: usize) -> Result<&DimSpectrum> {
        self.get(k)
            .ok_or_else(|| Error::Config(format!("spectrum of dimension {k} was not computed")))
    }
}

/// Eigendecomposition of precomputed Laplacians for all three dimensions.
pub fn hodge_eigendecomposition(lap: &HodgeLaplacians) -> Result<HodgeSpectrum> {
    let mut dims: [Option<DimSpectrum>; 3] = Default::default();
    for (k, l) in lap.dims.iter().enumerate() {
        dims[k] = Some(decompose(l)?);
    }
    Ok(HodgeSpectrum { dims })
}

/// Convenience wrapper returning `(x_e, x_c, x_h)`.
pub fn hodge_project(
    x: &DVector<f64>,
    spectrum: &HodgeSpectrum,
    k: usize,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let [e, c, h] = spectrum.require(k)?.project(x)?;
    Ok((e, c, h))
}

/// Splits one Laplacian into its Hodge blocks.
///
/// Exact and co-exact blocks are the non-zero eigenpairs of the lower and
/// upper parts; the harmonic block is the numerical kernel of the full
/// Laplacian.
pub fn decompose(lap: &Laplacian) -> Result<DimSpectrum> {
    let n = lap.size();
    let full = lap.full();
    let (full_values, full_vectors) = symmetric_eigen(&full, "full Laplacian")?;
    let lambda_max = full_values.iter().copied().fold(0.0, f64::max);
    let tau = ZERO_REL * lambda_max.max(1.0);

    let nonzero_block = |m: &DMatrix<f64>, what: &str| -> Result<EigenBlock> {
        if m.iter().all(|&v| v == 0.0) {
            return Ok(EigenBlock::empty(n));
        }
        let (values, vectors) = symmetric_eigen(m, what)?;
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > tau).collect();
        Ok(EigenBlock::select(&values, &vectors, &keep))
    };
    let exact = nonzero_block(&lap.lower, "lower Laplacian")?;
    let coexact = nonzero_block(&lap.upper, "upper Laplacian")?;
    let kernel: Vec<usize> = (0..n).filter(|&i| full_values[i] <= tau).collect();
    let mut harmonic = EigenBlock::select(&full_values, &full_vectors, &kernel);
    harmonic.values.fill(0.0);

    let mut spec = DimSpectrum {
        k: lap.k,
        size: n,
        exact,
        coexact,
        harmonic,
    };
    let total: usize = spec.block_sizes().iter().sum();
    if total != n {
        warn!(
            "dimension {}: Hodge blocks {:?} do not add up to {n}",
            lap.k,
            spec.block_sizes()
        );
    }
    let defect = orthonormality_defect(&spec.unsplit().vectors);
    if defect > ORTHO_TOL {
        warn!(
            "dimension {}: Hodge basis orthonormality defect {defect:e}, re-orthonormalizing",
            lap.k
        );
        reorthonormalize(&mut spec);
    }
    Ok(spec)
}

/// `‖UᵀU − I‖_max`.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Modified Gram–Schmidt over `[U_e U_c U_h]` in block order.
fn reorthonormalize(spec: &mut DimSpectrum) {
    let mut done: Vec<DVector<f64>> = Vec::with_capacity(spec.size);
    for block in [&mut spec.exact, &mut spec.coexact, &mut spec.harmonic] {
        for mut col in block.vectors.column_iter_mut() {
            let mut v = col.clone_owned();
            for q in &done {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            col.copy_from(&v);
            done.push(v);
        }
    }
}

/// Dense symmetric eigendecomposition with residual and PSD checks.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>, what: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let mut eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100_000);
    if !eig
        .as_ref()
        .is_some_and(|e| finite(&e.eigenvalues) && finite(&e.eigenvectors))
    {
        // the QR iteration can break down on exactly decoupled blocks; a
        // diagonal shift changes the rotations without changing the eigenvectors
        let shift = 1.0 + m.diagonal().amax();
        let shifted = m + DMatrix::identity(n, n) * shift;
        eig = SymmetricEigen::try_new(shifted, f64::EPSILON, 100_000).map(|mut e| {
            e.eigenvalues.add_scalar_mut(-shift);
            e
        });
    }
    let eig = eig
        .filter(|e| finite(&e.eigenvalues) && finite(&e.eigenvectors))
        .ok_or_else(|| Error::Eigen {
            what: what.to_string(),
            residual: f64::NAN,
        })?;
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let residual = m * &eig.eigenvectors - &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues);
    let worst = residual.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    if !(worst <= RESIDUAL_REL * norm.max(f64::MIN_POSITIVE)) {
        return Err(Error::Eigen {
            what: what.to_string(),
            residual: worst,
        });
    }
    if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -PSD_REL * norm {
            return Err(Error::NegativeEigenvalue(min));
        }
    }
    Ok((eig.eigenvalues, eig.eigenvectors))
}

fn finite<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<f64, R, C>>(
    m: &nalgebra::Matrix<f64, R, C, S>,
) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::SimplicialComplex;

    fn hollow_cycle() -> SimplicialComplex {
        SimplicialComplex::try_new(3, vec![[0, 1], [1, 2], [0, 2]], vec![]).unwrap()
    }

    fn spectrum(sc: &SimplicialComplex) -> HodgeSpectrum {
        HodgeSpectrum::compute(&sc.incidence_matrices().unwrap()).unwrap()
    }

    fn naive_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
            (0..a.ncols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
        })
    }

    #[test]
    fn single_edge_graph_laplacian() {
        let sc = SimplicialComplex::try_new(2, vec![[0, 1]], vec![]).unwrap();
        let lap = HodgeLaplacians::compute(&sc.incidence_matrices().unwrap()).unwrap();
        assert_eq!(
            lap.get(0).full(),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
        assert!(lap.get(0).lower.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hollow_cycle_edge_laplacian() {
        let b = hollow_cycle().incidence_matrices().unwrap();
        let lap = hodge_laplacian(&b, 1).unwrap();
        let b1 = b.b1.to_dense_f64();
        let oracle = naive_product(&b1.transpose(), &b1);
        assert_eq!(lap.lower, oracle);
        assert!(lap.upper.iter().all(|&v| v == 0.0));
        assert!((0..3).all(|i| lap.full()[(i, i)] == 2.0));
    }

    #[test]
    fn laplacians_are_symmetric_and_triangles_have_no_upper_part() {
        let sc = SimplicialComplex::try_new(4, vec![[0, 1], [1, 2], [0, 2], [2, 3]], vec![[0, 1, 2]]).unwrap();
        let lap = HodgeLaplacians::compute(&sc.incidence_matrices().unwrap()).unwrap();
        for l in &lap.dims {
            let full = l.full();
            assert_eq!(full, full.transpose());
        }
        assert!(lap.get(2).upper.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn betti_numbers() {
        assert_eq!(spectrum(&hollow_cycle()).require(1).unwrap().betti(), 1);
        let filled = SimplicialComplex::try_new(3, vec![[0, 1], [1, 2], [0, 2]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(spectrum(&filled).require(1).unwrap().betti(), 0);
        let two = SimplicialComplex::try_new(6, vec![[0, 1], [1, 2], [0, 2], [3, 4], [4, 5], [3, 5]], vec![]).unwrap();
        let spec = spectrum(&two);
        assert_eq!(spec.require(1).unwrap().betti(), 2);
        assert_eq!(spec.require(0).unwrap().betti(), 2);
    }

    #[test]
    fn graph_vertex_exact_block_is_empty() {
        let spec = spectrum(&hollow_cycle());
        let d0 = spec.require(0).unwrap();
        assert!(d0.exact.is_empty());
        assert_eq!(d0.block_sizes(), [0, 2, 1]);
        let d1 = spec.require(1).unwrap();
        assert_eq!(d1.exact.values.as_slice().len(), 2);
        for &v in d1.exact.values.iter() {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_and_curls_land_in_their_blocks() {
        let sc = SimplicialComplex::try_new(
            4,
            vec![[0, 1], [1, 2], [0, 2], [2, 3], [1, 3]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let b = sc.incidence_matrices().unwrap();
        let spec = HodgeSpectrum::compute(&b).unwrap();
        let grad = DVector::from_vec(b.b1.apply_transpose(&[0.3, -1.2, 2.0, 0.7]));
        let (_, c, h) = hodge_project(&grad, &spec, 1).unwrap();
        assert!(c.norm() < 1e-10 && h.norm() < 1e-10);
        let curl = DVector::from_vec(b.b2.apply(&[1.5, -0.4]));
        let (e, _, h) = hodge_project(&curl, &spec, 1).unwrap();
        assert!(e.norm() < 1e-10 && h.norm() < 1e-10);
    }

    #[test]
    fn projection_matches_dense_projector_oracle() {
        let sc = hollow_cycle();
        let b = sc.incidence_matrices().unwrap();
        let spec = HodgeSpectrum::compute(&b).unwrap();
        let x = DVector::from_vec(vec![0.4, -1.1, 2.5]);
        let (e, c, h) = hodge_project(&x, &spec, 1).unwrap();
        // im(B_1ᵀ) projector: B_1ᵀ (B_1 B_1ᵀ)^+ B_1, computed via the explicit
        // cycle vector: the kernel of B_1 is spanned by the signed cycle (1, 1, -1).
        let z = DVector::from_vec(vec![1.0, 1.0, -1.0]) / 3f64.sqrt();
        let harmonic = &z * z.dot(&x);
        let exact = &x - &harmonic;
        assert!((&h - &harmonic).norm() < 1e-12);
        assert!((&e - &exact).norm() < 1e-12);
        assert!(c.norm() == 0.0);
        assert!(e.dot(&h).abs() < 1e-12);
        assert!((&e + &c + &h - &x).norm() < 1e-12);
        assert!(hodge_project(&DVector::zeros(2), &spec, 1).is_err());
    }

    #[test]
    fn eigen_survives_qr_breakdown() {
        // scattered disjoint triangles on which the plain QR iteration yields NaN
        let cols = [
            [(7, 1.0), (23, 1.0), (67, -1.0)],
            [(28, 1.0), (56, 1.0), (26, -1.0)],
            [(2, 1.0), (73, 1.0), (13, -1.0)],
            [(32, 1.0), (3, 1.0), (16, -1.0)],
            [(5, 1.0), (10, 1.0), (78, -1.0)],
            [(39, 1.0), (19, 1.0), (17, -1.0)],
            [(1, 1.0), (42, 1.0), (45, -1.0)],
        ];
        let mut b2 = DMatrix::zeros(79, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                b2[(i, j)] = v;
            }
        }
        let up = &b2 * b2.transpose();
        let (values, vectors) = symmetric_eigen(&up, "upper").unwrap();
        assert_eq!(values.iter().filter(|v| **v > 1e-8).count(), 7);
        assert!(values.iter().all(|v| v.abs() < 1e-8 || (v - 3.0).abs() < 1e-8));
        assert!(orthonormality_defect(&vectors) < 1e-10);
    }
}
