//! Predicted against measured ETH precision on the 1+8 model.
//!
//! ```bash
//! cargo run --release --example audit -- 3
//! ```

use ethlab::analysis::{self, AuditConfig};
use ethlab::models::{self, ModelSpec};
use ethlab::spectral;
use ethlab::thermo::{self, ThermoConfig};

fn main() -> ethlab::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, 8))?;
    let sd = spectral::diagonalize(&h)?;
    let bath = spectral::diagonalize_bath(&h)?;
    let w = thermo::default_kernel_width(&bath.energies);
    let profile = thermo::thermo_profile_with(&bath.energies, &ThermoConfig::new(w, 512))?;
    let region = profile.valid_range.expect("1+8 has a valid range");

    let config = AuditConfig {
        grid_e: n,
        grid_db: n,
        ..AuditConfig::default()
    };
    let report = analysis::theorem1_audit(&sd, &h, &bath, &profile, region, &config)?;
    let v = &report.verdict;
    println!("predicted ε_eth {:.4} (vacuous: {})  at Δ = {:.4}", v.eth_pred, v.vacuous, report.constants.delta);
    println!("measured  ε_eth {:.4} over {} pairs", v.eth_measured, report.eth.pair_count);
    println!("ideal bath: {}  ({}/{} grid cells ideal)", v.bath_ideal, v.grid_ideal_cells, v.grid_cells);
    println!("conclusive violations {}  inconclusive cells {}", v.conclusive_violations, v.inconclusive_cells);
    for s in &report.sensitivity {
        println!("kernel ×{}: ε_pred {:?}", s.factor, s.eps_eth_pred);
    }
    Ok(())
}
