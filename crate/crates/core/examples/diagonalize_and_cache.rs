//! Diagonalize a model, store the spectral cache and read it back.
//!
//! ```bash
//! cargo run --release --example diagonalize_and_cache
//! ```

use ethlab::models::{self, ModelSpec};
use ethlab::spectral;

fn main() -> ethlab::Result<()> {
    let spec = ModelSpec::default_benchmark(1, 7);
    let h = models::build_hamiltonian(&spec)?;
    let sd = spectral::diagonalize(&h)?;
    let diag = sd.diagnostics(h.h.as_ref());
    println!(
        "d={}  E ∈ [{:.4}, {:.4}]  max residual {:.1e}  orthonormality {:.1e}",
        sd.dim(),
        sd.energies()[0],
        sd.energies()[sd.dim() - 1],
        diag.max_residual,
        diag.max_orthonormality_error
    );
    println!("degenerate classes: {}", sd.degeneracy_classes().iter().filter(|c| c.1 > c.0 + 1).count());

    let root = std::env::temp_dir().join("ethlab-example-cache");
    let dir = spectral::cache_dir(&root, &spec.content_hash());
    spectral::write_cache(&dir, &sd, Some(&spec))?;
    let back = spectral::read_cache(&dir, Some(&spec.content_hash()))?;
    assert_eq!(back.energies(), sd.energies());
    println!("cache at {}", dir.display());

    // A different model must not be served from this cache.
    let other = ModelSpec::default_benchmark(1, 6).content_hash();
    match spectral::read_cache(&dir, Some(&other)) {
        Err(e) => println!("refused: {e}"),
        Ok(_) => unreachable!(),
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(())
}
