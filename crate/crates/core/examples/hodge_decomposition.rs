//! Split a discretized vector field on a random mesh into gradient, curl
//! and harmonic parts. Edge values average the field along the unit
//! tangent, so even a pure gradient leaks into the curl block on a coarse
//! mesh.

use std::sync::Arc;

use hodgelet::datagen::{curl_free, de_rham_project, random_mesh, sample_potential};
use hodgelet::hodge::HodgeSpectrum;

fn main() -> hodgelet::Result<()> {
    let mesh = random_mesh(7, 80)?;
    let potential = Arc::new(sample_potential(1, 0.2, 256)?);
    let flow = de_rham_project(&curl_free(potential), &mesh, 5)?;

    let spec = HodgeSpectrum::compute(&mesh.complex.incidence_matrices()?)?;
    let edges = spec.require(1)?;
    println!("edge blocks (exact, co-exact, harmonic): {:?}", edges.block_sizes());

    let [grad, curl, harm] = edges.project(&flow)?;
    let total = flow.norm_squared();
    println!(
        "energy share: gradient {:.4}, curl {:.4}, harmonic {:.4}",
        grad.norm_squared() / total,
        curl.norm_squared() / total,
        harm.norm_squared() / total
    );
    println!("reconstruction error {:.2e}", (grad + curl + harm - flow).norm());
    Ok(())
}
