//! Write the three standard figures into a directory.
//!
//! ```bash
//! cargo run --release --example plots -- out/
//! ```

use std::path::PathBuf;

use ethlab::analysis::{self, AuditConfig};
use ethlab::models::{self, ModelSpec};
use ethlab::thermo::{self, ThermoConfig};
use ethlab::{plot, spectral};

fn main() -> ethlab::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("ethlab-plots"));
    std::fs::create_dir_all(&out).map_err(|e| ethlab::Error::Io { path: out.clone(), source: e })?;

    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, 8))?;
    let sd = spectral::diagonalize(&h)?;
    let bath = spectral::diagonalize_bath(&h)?;

    let region = analysis::mid_spectrum_region(sd.energies());
    let eth: Vec<_> = [0.02, 0.05, 0.1, 0.2, 0.5]
        .iter()
        .map(|&d| analysis::eth_scan(&sd, region, d))
        .collect::<ethlab::Result<_>>()?;

    let w = thermo::default_kernel_width(&bath.energies);
    let profile = thermo::thermo_profile_with(&bath.energies, &ThermoConfig::new(w, 512))?;
    let cells = [(0.0, 2.0 * h.norm_hc)];
    let bounds = analysis::bounds_scan(&sd, &h, &bath, &profile, &cells, &AuditConfig::default())?;

    for (name, svg) in [
        ("eth_curve.svg", plot::eth_curve(&eth)),
        ("thermo.svg", plot::thermo_profile(&profile)),
        ("bounds_scatter.svg", plot::bounds_scatter(&bounds)),
    ] {
        let p = out.join(name);
        std::fs::write(&p, svg).map_err(|e| ethlab::Error::Io { path: p.clone(), source: e })?;
        println!("{}", p.display());
    }
    Ok(())
}
