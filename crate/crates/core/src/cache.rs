//! On-disk cache of Hodge spectra keyed by a content hash of the complex.
//!
//! File layout (all integers `u64`, all numbers little-endian):
//! magic `HSPEC001`, the number of stored dimensions, then per dimension
//! `k, N_k, N_ke, N_kc, N_kh`; the payload follows with, per dimension and
//! per block in exact/co-exact/harmonic order, the eigenvalues and then the
//! eigenvectors column by column as `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::hodge::{DimSpectrum, EigenBlock, HodgeSpectrum};

const MAGIC: &[u8; 8] = b"HSPEC001";

/// Hex SHA-256 of `(vertex count, edges, triangles, requested dims)`.
pub fn content_key(sc: &SimplicialComplex, dims: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update((sc.num_vertices() as u64).to_le_bytes());
    h.update((sc.edges().len() as u64).to_le_bytes());
    for e in sc.edges() {
        for &v in e {
            h.update((v as u64).to_le_bytes());
        }
    }
    h.update((sc.triangles().len() as u64).to_le_bytes());
    for t in sc.triangles() {
        for &v in t {
            h.update((v as u64).to_le_bytes());
        }
    }
    for &k in dims {
        h.update([k as u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn spectrum_to_bytes(spec: &HodgeSpectrum) -> Vec<u8> {
    let present: Vec<&DimSpectrum> = spec.dims.iter().flatten().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u64).to_le_bytes());
    put(&mut out, present.len());
    for d in &present {
        put(&mut out, d.k);
        put(&mut out, d.size);
        for s in d.block_sizes() {
            put(&mut out, s);
        }
    }
    for d in &present {
        for b in [&d.exact, &d.coexact, &d.harmonic] {
            for v in b.values.iter().chain(b.vectors.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated spectrum file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("block too large".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn spectrum_from_bytes(bytes: &[u8]) -> Result<HodgeSpectrum> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a spectrum file".into()));
    }
    let count = r.u64()?;
    if count > 3 {
        return Err(Error::Format(format!("{count} dimensions stored")));
    }
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        let (k, size) = (r.u64()?, r.u64()?);
        let sizes = [r.u64()?, r.u64()?, r.u64()?];
        if k > 2 || sizes.iter().sum::<usize>() != size {
            return Err(Error::Format(format!("bad header for dimension {k}")));
        }
        headers.push((k, size, sizes));
    }
    let mut dims: [Option<DimSpectrum>; 3] = Default::default();
    for (k, size, sizes) in headers {
        let mut blocks = Vec::with_capacity(3);
        for m in sizes {
            let values = DVector::from_vec(r.f64s(m)?);
            let vectors = DMatrix::from_vec(size, m, r.f64s(size * m)?);
            blocks.push(EigenBlock { values, vectors });
        }
        let harmonic = blocks.pop().unwrap();
        let coexact = blocks.pop().unwrap();
        let exact = blocks.pop().unwrap();
        dims[k] = Some(DimSpectrum {
            k,
            size,
            exact,
            coexact,
            harmonic,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes in spectrum file".into()));
    }
    Ok(HodgeSpectrum { dims })
}

/// Directory of `<key>.spec` files. A missing or unreadable entry is
/// recomputed and rewritten.
#[derive(Debug, Clone)]
pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    pub fn path_for(&self, sc: &SimplicialComplex, dims: &[usize]) -> PathBuf {
        self.dir.join(format!("{}.spec", content_key(sc, dims)))
    }

    pub fn get_or_compute(&self, sc: &SimplicialComplex, dims: &[usize]) -> Result<HodgeSpectrum> {
        let path = self.path_for(sc, dims);
        if let Ok(bytes) = fs::read(&path) {
            match spectrum_from_bytes(&bytes) {
                Ok(s) => return Ok(s),
                Err(e) => log::warn!("ignoring cache entry {}: {e}", path.display()),
            }
        }
        let spec = compute_spectrum(sc, dims)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, spectrum_to_bytes(&spec))?;
        fs::rename(&tmp, &path)?;
        Ok(spec)
    }
}

pub fn compute_spectrum(sc: &SimplicialComplex, dims: &[usize]) -> Result<HodgeSpectrum> {
    HodgeSpectrum::compute_dims(&sc.incidence_matrices()?, dims)
}

/// Spectrum through the cache when one is given.
pub fn spectrum_for(sc: &SimplicialComplex, dims: &[usize], cache: Option<&SpectrumCache>) -> Result<HodgeSpectrum> {
    match cache {
        Some(c) => c.get_or_compute(sc, dims),
        None => compute_spectrum(sc, dims),
    }
}
