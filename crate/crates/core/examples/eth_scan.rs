//! Measured ETH precision over the middle third of the spectrum, for several
//! scales and bath sizes.
//!
//! ```bash
//! cargo run --release --example eth_scan
//! ```

use ethlab::analysis;
use ethlab::models::{self, ModelSpec};
use ethlab::spectral;

fn main() -> ethlab::Result<()> {
    for nb in [5, 6, 7] {
        let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, nb))?;
        let sd = spectral::diagonalize(&h)?;
        let region = analysis::mid_spectrum_region(sd.energies());
        print!("nb={nb}  region [{:>7.3}, {:>6.3}]", region.0, region.1);
        for delta in [0.05, 0.1, 0.2] {
            let r = analysis::eth_scan(&sd, region, delta)?;
            print!("   Δ={delta}: ε={:.3} ({} pairs)", r.eps_measured, r.pair_count);
        }
        println!();
    }
    Ok(())
}
