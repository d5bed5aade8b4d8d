//! How well does one bath shell thermalize the system? Lower bounds on the
//! worst-case deviation over product and entangled initial states.
//!
//! ```bash
//! cargo run --release --example thermalization
//! ```

use ethlab::analysis::{self, OmegaVariant, SamplerConfig};
use ethlab::models::{self, ModelSpec};
use ethlab::shells::{self, ShellTag};
use ethlab::spectral;
use ethlab::thermo::{self, ThermoConfig};

fn main() -> ethlab::Result<()> {
    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, 8))?;
    let sd = spectral::diagonalize(&h)?;
    let bath = spectral::diagonalize_bath(&h)?;
    let w = thermo::default_kernel_width(&bath.energies);
    let profile = thermo::thermo_profile_with(&bath.energies, &ThermoConfig::new(w, 512))?;

    let e = 0.0;
    let omega = analysis::omega_builder(&sd, &h, &profile, e, OmegaVariant::MicrocanonicalReduced, w)?;
    for db in [0.5, 1.0, 2.0, 4.0] {
        let shell = shells::make_shell(&bath.energies, e, db, ShellTag::Bath)?;
        let r = analysis::therm_scan(&sd, &bath, &shell, &omega, &SamplerConfig::default())?;
        let l1 = analysis::lemma1_check(&r, 2);
        println!(
            "Δ_B={db:<4} {:>3} levels  ε_product ≥ {:.4}  ε_entangled ≥ {:.4}  lemma 1: {:?}",
            shell.len(),
            r.eps_product,
            r.eps_entangled,
            l1.verdict
        );
    }
    Ok(())
}
