//! Distances of eigenstate reduced states from the thermal reference ω on a
//! small (E, Δ_B) grid, with the bounds they are checked against.
//!
//! ```bash
//! cargo run --release --example eigenstate_bounds
//! ```

use ethlab::analysis::{self, AuditConfig};
use ethlab::models::{self, ModelSpec};
use ethlab::spectral;
use ethlab::thermo::{self, ThermoConfig};

fn main() -> ethlab::Result<()> {
    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, 8))?;
    let sd = spectral::diagonalize(&h)?;
    let bath = spectral::diagonalize_bath(&h)?;
    let w = thermo::default_kernel_width(&bath.energies);
    let profile = thermo::thermo_profile_with(&bath.energies, &ThermoConfig::new(w, 512))?;
    let region = profile.valid_range.expect("1+8 has a valid range");

    let cells = analysis::grid_cells(region, 2, analysis::default_db_range(h.norm_hc), 2);
    let report = analysis::bounds_scan(&sd, &h, &bath, &profile, &cells, &AuditConfig::default())?;
    for c in &report.cells {
        println!(
            "cell {} E={:>6.3} Δ_B={:.3}: {} eigenstates, ε_product ≥ {:.3}, min slack {:.3}",
            c.cell,
            c.e,
            c.delta_b,
            c.eigenstates,
            c.eps_product.unwrap_or(f64::NAN),
            c.min_slack_eq8.unwrap_or(f64::NAN)
        );
    }
    let worst = report
        .records
        .iter()
        .max_by(|a, b| a.bound.leakage.total_cmp(&b.bound.leakage));
    if let Some(r) = worst {
        println!(
            "largest leakage {:.3e} (n={}), exact bound {:.3e}",
            r.bound.leakage, r.bound.n, r.bound.leakage_bound.rhs
        );
    }
    println!("conclusive violations: {}", report.conclusive_violations());
    Ok(())
}
