//! States concentrated in a global energy shell relax to the micro-canonical
//! reduced state, up to the measured ETH precision.
//!
//! ```bash
//! cargo run --release --example peaked_states
//! ```

use ethlab::analysis;
use ethlab::hilbert::GlobalState;
use ethlab::models::{self, ModelSpec};
use ethlab::shells::{self, ShellTag};
use ethlab::spectral;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ethlab::Result<()> {
    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, 7))?;
    let sd = spectral::diagonalize(&h)?;
    let region = analysis::mid_spectrum_region(sd.energies());
    let center = 0.5 * (region.0 + region.1);
    let delta = 0.25 * (region.1 - region.0);
    let eth = analysis::eth_scan(&sd, (center - delta, center + delta), delta)?;
    let shell = shells::make_shell(sd.energies(), center, delta, ShellTag::Global)?;
    println!("shell E={center:.3}±{delta:.3}: {} levels, ε_eth = {:.4}", shell.len(), eth.eps_measured);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut states = Vec::new();
    for leak in [0.0, 0.5 * eth.eps_measured, 2.0 * eth.eps_measured] {
        states.push(GlobalState::Pure(analysis::random_peaked_state(&sd, &shell, leak, &mut rng)?));
    }
    for out in analysis::prop1_check(&sd, &shell, eth.eps_measured, &states)? {
        match (&out.report, &out.skipped) {
            (Some(r), _) => println!("state {}: {:.4} ≤ {:.4}  {:?}", out.index, r.lhs, r.rhs, r.verdict),
            (None, Some(why)) => println!("state {}: skipped, {why}", out.index),
            _ => unreachable!(),
        }
    }
    Ok(())
}
