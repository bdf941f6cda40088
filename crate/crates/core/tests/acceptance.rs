//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always show up in
//! `cargo test` output. Exits non-zero when any criterion fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hodgelet::datagen::{ei, Benchmark, BenchmarkConfig, VortexFlow};
use hodgelet::dataset::{self, parse_dataset, Task};
use hodgelet::experiment::{run_experiment, DatasetSpec, ExperimentConfig, ModelKind, Placement, RunOptions, Variant};
use hodgelet::gp::{GpConfig, GpModel, Inference, Likelihood, OptimConfig, ParamGroups, Predictive};
use hodgelet::hodge::HodgeSpectrum;
use hodgelet::hodgelet::{Aggregation, BankConfig, BlockKey, FilterBank, PreparedComplex};
use hodgelet::SimplicialComplex;

use common::{filled_triangle, hollow_triangle, permutation, random_complex, two_hollow_triangles};

// criterion 1
const STRUCTURE_COMPLEXES: usize = 1000;
const STRUCTURE_SECONDS: f64 = 10.0;
// criterion 2
const HODGE_COMPLEXES: usize = 200;
const HODGE_TOL: f64 = 1e-8;
// criterion 3
const PERM_COMPLEXES: usize = 100;
const PERM_RELABELINGS: usize = 10;
const PERM_TOL: f64 = 1e-10;
// criterion 4
const GP_PROBLEMS: usize = 20;
const ORACLE_TOL: f64 = 1e-8;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_FLOOR: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
// criterion 5
const ELBO_TOL: f64 = 1e-4;
// criterion 6
const DCF_RESOLUTIONS: [usize; 3] = [10, 50, 150];
const DCF_ORDERED_AT: [usize; 2] = [50, 150];
const DCF_MIN_ACCURACY_150: f64 = 0.85;
// criterion 7
const VORTEX_SUM_MIN: f64 = 0.75;
const VORTEX_ENERGY_BAND: [f64; 2] = [0.35, 0.65];
// criterion 9
const EI_MINUS_ONE: f64 = -0.219_383_934_4;
const EI_TOL: f64 = 1e-10;
const TANGENT_TOL: f64 = 1e-10;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut largest = 0;
    for i in 0..STRUCTURE_COMPLEXES {
        let n = rng.random_range(3..=150);
        let sc = random_complex(&mut rng, n, [0, 0, 0]);
        check(sc.validate().is_valid(), || {
            format!("complex {i} rejected: {}", sc.validate())
        })?;
        let b = sc.incidence_matrices().map_err(|e| e.to_string())?;
        // B1·B2 column by column in i64
        for t in 0..b.b2.ncols() {
            let mut acc: HashMap<usize, i64> = HashMap::new();
            for &(e, s2) in b.b2.column(t) {
                for &(v, s1) in b.b1.column(e) {
                    *acc.entry(v).or_default() += i64::from(s1) * i64::from(s2);
                }
            }
            check(acc.values().all(|&v| v == 0), || {
                format!("complex {i}: B1·B2 ≠ 0 at triangle {t}")
            })?;
        }
        largest = largest.max(sc.count(1));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < STRUCTURE_SECONDS, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{STRUCTURE_COMPLEXES} complexes valid with B1·B2 = 0 (up to {largest} edges) in {secs:.2} s"
    ))
}

fn dense_laplacian(sc: &SimplicialComplex, k: usize) -> DMatrix<f64> {
    let b = sc.incidence_matrices().unwrap();
    let b1 = b.b1.to_dense().map(|v| v as f64);
    let b2 = b.b2.to_dense().map(|v| v as f64);
    match k {
        0 => &b1 * b1.transpose(),
        1 => b1.transpose() * &b1 + &b2 * b2.transpose(),
        _ => b2.transpose() * &b2,
    }
}

/// Nullity from singular values.
fn nullity(l: &DMatrix<f64>) -> usize {
    if l.nrows() == 0 {
        return 0;
    }
    let sv = l.clone().svd(false, false).singular_values;
    let tol = 1e-8 * sv.max().max(1.0);
    sv.iter().filter(|s| **s <= tol).count()
}

fn criterion_2() -> Outcome {
    for (sc, want) in [
        (hollow_triangle(), 1),
        (filled_triangle(), 0),
        (two_hollow_triangles(), 2),
    ] {
        let spec = HodgeSpectrum::compute(&sc.incidence_matrices().unwrap()).unwrap();
        let got = spec.require(1).unwrap().betti();
        check(got == want, || format!("betti1 {got}, expected {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_c, mut worst_o) = (0.0f64, 0.0f64);
    for i in 0..HODGE_COMPLEXES {
        let n = rng.random_range(3..=100);
        let sc = random_complex(&mut rng, n, [0, 0, 0]);
        let spec = HodgeSpectrum::compute(&sc.incidence_matrices().unwrap()).map_err(|e| e.to_string())?;
        for k in 0..3 {
            let d = spec.require(k).unwrap();
            let oracle = nullity(&dense_laplacian(&sc, k));
            check(d.betti() == oracle, || {
                format!("complex {i}, k={k}: {} harmonic vs nullity {oracle}", d.betti())
            })?;
        }
        let m = sc.count(1);
        if m == 0 {
            continue;
        }
        let x = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let [xe, xc, xh] = spec.require(1).unwrap().project(&x).unwrap();
        let nx = x.norm();
        let c = (&xe + &xc + &xh - &x).norm() / nx;
        let o = [xe.dot(&xc), xe.dot(&xh), xc.dot(&xh)]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
            / (nx * nx);
        check(c <= HODGE_TOL, || format!("complex {i}: completeness {c:e}"))?;
        check(o <= HODGE_TOL, || format!("complex {i}: orthogonality {o:e}"))?;
        worst_c = worst_c.max(c);
        worst_o = worst_o.max(o);
    }
    Ok(format!(
        "{HODGE_COMPLEXES} complexes: completeness ≤ {worst_c:.1e}, orthogonality ≤ {worst_o:.1e}, harmonic dims = SVD nullity; betti 1/0/2"
    ))
}

fn features(sc: &SimplicialComplex, bank: &FilterBank) -> Vec<f64> {
    let spec = HodgeSpectrum::compute(&sc.incidence_matrices().unwrap()).unwrap();
    PreparedComplex::new(sc, &spec, &bank.keys(), false)
        .unwrap()
        .features(bank)
        .unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let keys = BlockKey::for_dims(&[0, 1, 2], true);
    let mut worst = 0.0f64;
    for i in 0..PERM_COMPLEXES {
        let n = rng.random_range(3..=40);
        let sc = random_complex(&mut rng, n, [2, 2, 1]);
        for aggregation in [Aggregation::Energy, Aggregation::Sum] {
            let cfg = BankConfig {
                aggregation,
                ..Default::default()
            };
            let bank = FilterBank::init(&keys, &cfg, &mut rng).unwrap();
            let base = features(&sc, &bank);
            for _ in 0..PERM_RELABELINGS {
                let vp = permutation(&mut rng, sc.count(0));
                let ep = permutation(&mut rng, sc.count(1));
                let tp = permutation(&mut rng, sc.count(2));
                let other = features(&sc.relabeled(&vp, &ep, &tp), &bank);
                for (a, b) in base.iter().zip(&other) {
                    let err = (a - b).abs() / a.abs().max(1.0);
                    worst = worst.max(err);
                    check(err <= PERM_TOL, || format!("complex {i} ({aggregation}): {a} vs {b}"))?;
                }
            }
        }
    }
    Ok(format!(
        "{PERM_COMPLEXES} complexes × {PERM_RELABELINGS} relabelings, energy and sum: max deviation {worst:.1e}"
    ))
}

/// z-score columns; near-constant columns are only centred.
fn zscore(train: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = train.nrows() as f64;
    let mut out = x.clone();
    for j in 0..train.ncols() {
        let col = train.column(j);
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let constant = col.amax() == 0.0 || sd <= 1e-10 * col.amax();
        for i in 0..x.nrows() {
            out[(i, j)] = if constant {
                x[(i, j)] - mean
            } else {
                (x[(i, j)] - mean) / sd
            };
        }
    }
    out
}

/// Additive squared-exponential kernel over the model's blocks.
fn oracle_gram(model: &GpModel, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        model
            .kernel
            .components
            .iter()
            .map(|c| {
                let ell = c.kernel.log_lengthscales[0].exp();
                let r2: f64 = c.range.clone().map(|d| (a[(i, d)] - b[(j, d)]).powi(2)).sum();
                c.kernel.log_variance.exp() * (-0.5 * r2 / (ell * ell)).exp()
            })
            .sum()
    })
}

fn prepare(sc: &[SimplicialComplex], keys: &[BlockKey]) -> Vec<PreparedComplex> {
    sc.iter()
        .map(|c| {
            let spec = HodgeSpectrum::compute(&c.incidence_matrices().unwrap()).unwrap();
            PreparedComplex::new(c, &spec, keys, false).unwrap()
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let keys = BlockKey::for_dims(&[0, 1], true);
    let (mut worst_oracle, mut worst_grad, mut checked) = (0.0f64, 0.0f64, 0usize);
    for p in 0..GP_PROBLEMS {
        let complexes: Vec<SimplicialComplex> = (0..8)
            .map(|_| {
                let n = rng.random_range(4..=20);
                random_complex(&mut rng, n, [1, 2, 0])
            })
            .collect();
        let x = prepare(&complexes[..5], &keys);
        let xs = prepare(&complexes[5..], &keys);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bank = FilterBank::init(&keys, &BankConfig::default(), &mut rng).unwrap();
        let cfg = GpConfig {
            likelihood: Likelihood::Gaussian {
                noise_variance: rng.random_range(0.05..0.5),
            },
            ..Default::default()
        };
        let mut model = GpModel::for_inputs(cfg, bank, &x[0]).unwrap();
        model.condition(&x, &y).map_err(|e| e.to_string())?;
        let pred = model.predict(&xs).unwrap();

        let r = model.features(&x).unwrap();
        let z = zscore(&r, &r);
        let zs = zscore(&r, &model.features(&xs).unwrap());
        let mut ky = oracle_gram(&model, &z, &z);
        for i in 0..5 {
            ky[(i, i)] += model.noise_variance() + model.jitter().unwrap();
        }
        let inv = ky.try_inverse().ok_or("singular oracle matrix")?;
        let kx = oracle_gram(&model, &zs, &z);
        let kss = oracle_gram(&model, &zs, &zs);
        let yv = DVector::from_column_slice(&y);
        for (i, pr) in pred.iter().enumerate() {
            let ks = kx.row(i).transpose();
            let mean = ks.dot(&(&inv * &yv));
            let var = kss[(i, i)] - ks.dot(&(&inv * &ks));
            let Predictive::Gaussian {
                mean: pm,
                latent_variance: pv,
                ..
            } = pr
            else {
                return Err("expected a Gaussian predictive".into());
            };
            let err = (pm - mean).abs().max((pv - var).abs());
            worst_oracle = worst_oracle.max(err);
            check(err <= ORACLE_TOL, || {
                format!("problem {p}: mean {pm} vs {mean}, var {pv} vs {var}")
            })?;
        }

        let (_, grad) = model.log_marginal_likelihood(&x, &y).unwrap();
        let base = model.params();
        let names = model.param_names();
        let lay = model.layout();
        let mut probe = model.clone();
        for j in lay.bank.start..lay.likelihood.end {
            let mut q = base.clone();
            q[j] = base[j] + FD_STEP;
            probe.set_params(&q);
            let up = probe.log_marginal_likelihood(&x, &y).unwrap().0;
            q[j] = base[j] - FD_STEP;
            probe.set_params(&q);
            let down = probe.log_marginal_likelihood(&x, &y).unwrap().0;
            let fd = (up - down) / (2.0 * FD_STEP);
            let err = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(GRAD_FLOOR);
            worst_grad = worst_grad.max(err);
            checked += 1;
            check(err <= GRAD_REL_TOL, || {
                format!("problem {p}, {}: analytic {} vs fd {fd}", names[j], grad[j])
            })?;
        }
    }
    Ok(format!(
        "{GP_PROBLEMS} problems: oracle deviation {worst_oracle:.1e}; {checked} gradient entries, max rel error {worst_grad:.1e}"
    ))
}

fn criterion_5() -> Outcome {
    let keys = BlockKey::for_dims(&[1], true);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let complexes: Vec<SimplicialComplex> = (0..3).map(|_| random_complex(&mut rng, 8, [0, 1, 0])).collect();
    let x = prepare(&complexes, &keys);
    let y = [0.7, -0.4, 1.1];
    let bank = FilterBank::init(&keys, &BankConfig::default(), &mut rng).unwrap();
    let cfg = GpConfig {
        likelihood: Likelihood::Gaussian { noise_variance: 0.2 },
        inference: Inference::Variational,
        beta: 1.0,
        ..Default::default()
    };
    let mut model = GpModel::for_inputs(cfg, bank, &x[0]).unwrap();
    let opt = OptimConfig {
        learning_rate: 0.05,
        iterations: 4000,
        weight_decay: 0.0,
        cosine_decay: true,
        train: ParamGroups {
            bank: false,
            kernel: false,
            likelihood: false,
            variational: true,
        },
        ..Default::default()
    };
    model.fit(&x, &y, &opt).map_err(|e| e.to_string())?;
    let elbo = model.elbo(&x, &y).unwrap().0;
    let mut exact = model.clone();
    exact.config.inference = Inference::Exact;
    exact.variational = None;
    let lml = exact.log_marginal_likelihood(&x, &y).unwrap().0;
    let gap = (elbo - lml).abs();
    check(gap <= ELBO_TOL, || {
        format!("ELBO {elbo} vs log marginal likelihood {lml}")
    })?;
    Ok(format!(
        "ELBO {elbo:.8} vs log marginal likelihood {lml:.8} (gap {gap:.1e})"
    ))
}

fn benchmark_config(benchmark: Benchmark, resolution: usize, variant: Variant, aggregation: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("{benchmark}-{resolution}"),
        dataset: DatasetSpec::generated(BenchmarkConfig {
            benchmark,
            n_complexes: 100,
            resolution,
            seed: 0,
            ..Default::default()
        }),
        variant,
        aggregation: vec![aggregation.into()],
        seeds: vec![0],
        ..Default::default()
    }
}

fn edge(model: ModelKind) -> Variant {
    Variant {
        model,
        placement: Placement::Edge,
        line_graph: false,
    }
}

fn line_graph() -> Variant {
    Variant {
        model: ModelKind::Htgp,
        placement: Placement::Vertex,
        line_graph: true,
    }
}

fn accuracy(cfg: &ExperimentConfig, cache: &Path) -> Result<f64, String> {
    let opts = RunOptions {
        cache_dir: Some(cache.to_path_buf()),
        ..Default::default()
    };
    let r = run_experiment(cfg, &opts).map_err(|e| e.to_string())?;
    check(r.failed_folds == 0, || {
        format!("{}: {} folds failed", r.variant, r.failed_folds)
    })?;
    Ok(r.mean)
}

fn criterion_6(cache: &Path) -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for res in DCF_RESOLUTIONS {
        let h = accuracy(
            &benchmark_config(Benchmark::DivCurlFree, res, edge(ModelKind::Htgp), "energy"),
            cache,
        )?;
        let w = accuracy(
            &benchmark_config(Benchmark::DivCurlFree, res, edge(ModelKind::Wtgp), "energy"),
            cache,
        )?;
        let l = accuracy(
            &benchmark_config(Benchmark::DivCurlFree, res, line_graph(), "energy"),
            cache,
        )?;
        lines.push(format!("{res}: HTGP(edge) {h:.3} WTGP(edge) {w:.3} line graph {l:.3}"));
        if DCF_ORDERED_AT.contains(&res) && !(h >= w && w >= l) {
            failures.push(format!("ordering fails at {res}"));
        }
        if res == 150 && h < DCF_MIN_ACCURACY_150 {
            failures.push(format!("HTGP(edge) {h:.3} < {DCF_MIN_ACCURACY_150} at 150"));
        }
    }
    let summary = lines.join("; ");
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join(", ")))
    }
}

fn criterion_7(cache: &Path) -> Outcome {
    let sum = accuracy(
        &benchmark_config(Benchmark::Vortices, 150, edge(ModelKind::Htgp), "sum"),
        cache,
    )?;
    let energy = accuracy(
        &benchmark_config(Benchmark::Vortices, 150, edge(ModelKind::Htgp), "energy"),
        cache,
    )?;
    let summary = format!("HTGP(edge) at 150: sum {sum:.3}, energy {energy:.3}");
    check(sum > VORTEX_SUM_MIN, || {
        format!("sum below {VORTEX_SUM_MIN}; {summary}")
    })?;
    check(
        (VORTEX_ENERGY_BAND[0]..=VORTEX_ENERGY_BAND[1]).contains(&energy),
        || format!("energy outside {VORTEX_ENERGY_BAND:?}; {summary}"),
    )?;
    Ok(summary)
}

const TEN_COMPLEXES: &str = r#"[
  {"vertices": 3, "edges": [[0, 1], [1, 2], [0, 2]], "triangles": [[0, 1, 2]],
   "x1": [[0.1], [-2.5e10], [0.3333333333333333]], "y": 1},
  {"vertices": [7, 3, 9], "edges": [[3, 7], [9, 3], [7, 9]], "x1": [[1.0], [0.0], [0.5]], "y": 0},
  {"vertices": 4, "edges": [[0, 1], [1, 2], [2, 3], [0, 3], [0, 2]], "triangles": [[0, 2, 1]],
   "x1": [[1e-300], [2.0], [-3.0], [4.5], [5.25]], "y": 1},
  {"vertices": 2, "edges": [[0, 1]], "x1": [[-0.0]], "y": 0},
  {"vertices": 5, "edges": [[0, 1], [1, 2], [2, 0], [3, 4]], "x1": [[1], [2], [3], [4]], "y": 1},
  {"vertices": 4, "edges": [[1, 0], [2, 1], [0, 2], [2, 3], [1, 3]], "triangles": [[2, 1, 0], [1, 2, 3]],
   "oriented": true, "x1": [[0.25], [0.5], [0.75], [1.0], [1.25]], "y": 0},
  {"vertices": 3, "edges": [[0, 1]], "x1": [[3.14159]], "y": 1},
  {"vertices": [100, 200, 300, 400], "edges": [[100, 200], [200, 300], [300, 400], [400, 100]],
   "x1": [[1.5], [-1.5], [2.5], [-2.5]], "y": 0},
  {"vertices": 3, "edges": [[0, 1], [1, 2]], "x1": [[0.1], [0.7]], "y": 1},
  {"vertices": 6, "edges": [[0, 1], [1, 2], [0, 2], [3, 4], [4, 5], [3, 5]], "triangles": [[3, 4, 5]],
   "x1": [[6e-5], [7e5], [8.125], [-9.5], [10.0], [11.0]], "y": 0}
]"#;

fn criterion_8() -> Outcome {
    let ds = parse_dataset(TEN_COMPLEXES, None).map_err(|e| e.to_string())?;
    check(ds.len() == 10 && ds.task() == Task::Binary, || {
        "wrong count or task".into()
    })?;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.json");
    dataset::save(&ds, &path).map_err(|e| e.to_string())?;
    let back = dataset::load(&path).map_err(|e| e.to_string())?;
    check(back == ds, || "reloaded dataset differs".into())?;
    let bits = |d: &dataset::Dataset| -> Vec<u64> {
        d.complexes
            .iter()
            .flat_map(|c| c.attributes(1).iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    };
    check(bits(&back) == bits(&ds), || "attribute bits differ".into())?;
    let again = dataset::dataset_to_json(&back).unwrap();
    check(again == dataset::dataset_to_json(&ds).unwrap(), || {
        "re-serialization differs".into()
    })?;
    Ok("10-complex hand-built dataset round-trips bit-exactly; published benchmark tables (TU, MoleculeNet, PowerGraph) are not reproduced".into())
}

/// `Ei(x) = γ + ln|x| + Σ xᵏ/(k·k!)`.
fn ei_series(x: f64) -> f64 {
    let gamma = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..60 {
        term *= x / k as f64;
        sum += term / k as f64;
    }
    gamma + x.abs().ln() + sum
}

fn criterion_9() -> Outcome {
    let v = ei(-1.0);
    let oracle = ei_series(-1.0);
    check((v - EI_MINUS_ONE).abs() <= EI_TOL, || format!("Ei(-1) = {v}"))?;
    check((v - oracle).abs() <= EI_TOL, || {
        format!("Ei(-1) = {v}, series {oracle}")
    })?;
    let centre = [0.3, 0.6];
    let flow = VortexFlow::new(vec![centre], vec![1.3], 0.1).map_err(|e| e.to_string())?;
    let mut points = vec![centre, [0.3 + 1e-12, 0.6], [0.3, 0.6 - 1e-9], [1e6, -1e6]];
    for i in 0..=40 {
        for j in 0..=40 {
            points.push([-0.5 + 0.05 * i as f64, -0.5 + 0.05 * j as f64]);
        }
    }
    let mut worst = 0.0f64;
    for p in points {
        let u = flow.velocity(p);
        check(u[0].is_finite() && u[1].is_finite(), || {
            format!("velocity at {p:?} is {u:?}")
        })?;
        let r = [p[0] - centre[0], p[1] - centre[1]];
        let scale = u[0].hypot(u[1]) * r[0].hypot(r[1]);
        if scale > 0.0 {
            let cos = (u[0] * r[0] + u[1] * r[1]).abs() / scale;
            worst = worst.max(cos);
            check(cos <= TANGENT_TOL, || format!("radial component {cos:e} at {p:?}"))?;
        }
    }
    Ok(format!(
        "Ei(-1) = {v:.12} (series {oracle:.12}); single blob finite and tangential, max |cos| {worst:.1e}"
    ))
}

fn main() {
    let cache = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("structural exactness", Box::new(criterion_1)),
        ("Hodge decomposition", Box::new(criterion_2)),
        ("permutation invariance", Box::new(criterion_3)),
        ("GP correctness", Box::new(criterion_4)),
        ("ELBO consistency", Box::new(criterion_5)),
        ("div-curl-free ordering", Box::new(|| criterion_6(cache.path()))),
        ("vortices aggregation", Box::new(|| criterion_7(cache.path()))),
        ("dataset round trip", Box::new(criterion_8)),
        ("special functions", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
