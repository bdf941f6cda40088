//! Cache Hodge spectra on disk so repeated runs skip the eigensolves.

use std::time::Instant;

use hodgelet::cache::{content_key, SpectrumCache};
use hodgelet::datagen::random_mesh;

fn main() -> hodgelet::Result<()> {
    let dir = std::env::temp_dir().join("hodgelet-cache-demo");
    let _ = std::fs::remove_dir_all(&dir);
    let cache = SpectrumCache::new(&dir)?;
    let mesh = random_mesh(11, 150)?;
    let dims = [0, 1];
    println!("key {}", content_key(&mesh.complex, &dims));

    for pass in ["cold", "warm"] {
        let t = Instant::now();
        let spec = cache.get_or_compute(&mesh.complex, &dims)?;
        println!(
            "{pass}: {:.1} ms, edge blocks {:?}",
            t.elapsed().as_secs_f64() * 1e3,
            spec.require(1)?.block_sizes()
        );
    }
    println!("stored at {}", cache.path_for(&mesh.complex, &dims).display());
    Ok(())
}
