//! Build a small complex, validate it and read off its Betti numbers.

use hodgelet::hodge::HodgeSpectrum;
use hodgelet::SimplicialComplex;

fn main() -> hodgelet::Result<()> {
    // a square with one filled half and one hole
    let sc = SimplicialComplex::try_new(
        5,
        vec![[0, 1], [1, 2], [2, 3], [0, 3], [0, 2], [3, 4], [2, 4]],
        vec![[0, 1, 2]],
    )?;
    println!("{}", sc.validate());

    let b = sc.incidence_matrices()?;
    println!("B1 =\n{}", b.b1.to_dense());
    println!("B2 =\n{}", b.b2.to_dense());
    println!("B1·B2 = 0: {}", b.boundary_of_boundary_vanishes());

    let spec = HodgeSpectrum::compute(&b)?;
    let betti: Vec<usize> = (0..3)
        .map(|k| spec.require(k).map(|d| d.betti()))
        .collect::<Result<_, _>>()?;
    println!("Betti numbers {betti:?}");

    // an invalid one: triangle without its edges
    let bad = SimplicialComplex::from_parts(3, vec![[0, 1]], vec![[0, 1, 2]]);
    println!("{}", bad.validate());
    Ok(())
}
