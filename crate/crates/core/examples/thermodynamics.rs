//! Micro-canonical β(E) and C(E) of the bath, and the constants they imply.
//!
//! ```bash
//! cargo run --release --example thermodynamics -- 9
//! ```

use ethlab::models::{self, ModelSpec};
use ethlab::spectral;
use ethlab::thermo::{self, ThermoConfig};

fn main() -> ethlab::Result<()> {
    let nb = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(9);
    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, nb))?;
    let bath = spectral::diagonalize_bath(&h)?;

    let w = thermo::default_kernel_width(&bath.energies);
    let profile = thermo::thermo_profile_with(&bath.energies, &ThermoConfig::new(w, 512))?;
    let Some((lo, hi)) = profile.valid_range else {
        println!("kernel {w:.3}: no valid range at {nb} bath sites");
        return Ok(());
    };
    println!("kernel {w:.3}  valid range [{lo:.3}, {hi:.3}]");
    for k in 0..=6 {
        let e = lo + (hi - lo) * k as f64 / 6.0;
        println!(
            "  E={e:>7.3}  β={:>7.4}  C={:>8.3}",
            profile.beta_at(e)?,
            profile.heat_capacity_at(e)?
        );
    }

    let c = thermo::theorem1_constants(&profile, (lo, hi), 2, h.norm_hc)?;
    println!("ε_eth ≤ {:.4} at Δ = {:.4} (sup at E = {:.3})", c.eps_eth, c.delta, c.sup_energy);
    Ok(())
}
