//! Reduced dynamics after a product-state quench and convergence of its
//! finite-time average to the dephased state.
//!
//! ```bash
//! cargo run --release --example quench_dynamics
//! ```

use ethlab::analysis::haar_vector;
use ethlab::hilbert::{self, GlobalState, PureState, Space};
use ethlab::models::{self, ModelSpec};
use ethlab::spectral;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ethlab::Result<()> {
    let h = models::build_hamiltonian(&ModelSpec::default_benchmark(1, 6))?;
    let sd = spectral::diagonalize(&h)?;
    let shape = sd.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi = PureState::product(
        &PureState::basis(Space::System(shape.d_s()), 0)?,
        &PureState::normalized(Space::Bath(shape.d_b()), haar_vector(&mut rng, shape.d_b()))?,
    )?;
    let eq = spectral::equilibrium_state_pure(&psi, &sd)?;
    let state = GlobalState::Pure(psi);

    let times: Vec<f64> = (0..=8).map(|k| 2.5 * k as f64).collect();
    for (t, rho) in times.iter().zip(spectral::evolve_reduced(&state, &sd, &times)?) {
        let d = hilbert::trace_distance(rho.matrix(), eq.matrix())?;
        println!("t={t:>5.1}  ⟨↑|ρ_S|↑⟩={:.4}  distance to equilibrium {d:.4}", rho.matrix()[(0, 0)].re);
    }
    for horizon in [1e1, 1e2, 1e3, 1e4, 1e5] {
        let avg = spectral::finite_time_average(&state, &sd, horizon)?;
        println!("T={horizon:>8.0e}  ‖avg − Φ_S(ρ)‖₁ = {:.3e}", hilbert::trace_distance(avg.matrix(), eq.matrix())?);
    }
    Ok(())
}
