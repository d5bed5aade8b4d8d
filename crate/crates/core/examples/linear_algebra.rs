//! Partial traces, trace norms and tensor products on random states.
//!
//! ```bash
//! cargo run --release --example linear_algebra
//! ```

use ethlab::analysis::haar_vector;
use ethlab::hilbert::{self, DensityMatrix, PureState, Space, SpaceShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ethlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shape = SpaceShape::new(2, 8)?;

    let a = PureState::normalized(Space::System(2), haar_vector(&mut rng, 2))?;
    let b = PureState::normalized(Space::Bath(8), haar_vector(&mut rng, 8))?;
    let product = PureState::product(&a, &b)?;
    let reduced = hilbert::partial_trace_pure(product.amplitudes(), shape);
    let d = hilbert::trace_distance(reduced.as_ref(), a.projector().as_ref())?;
    println!("product state: ‖Tr_B|ψ⟩⟨ψ| − |a⟩⟨a|‖₁ = {d:.2e}");

    let psi = PureState::normalized(Space::Global(shape), haar_vector(&mut rng, 16))?;
    let rho = DensityMatrix::from_pure(&psi);
    let tau = hilbert::partial_trace_bath(&rho)?;
    println!("random global state: purity of Tr_B ρ = {:.4}", tau.purity());

    let mixed = DensityMatrix::maximally_mixed(Space::System(2));
    println!(
        "distance to 1/2: {:.4}   operator norm of ρ_S: {:.4}",
        hilbert::trace_distance(tau.matrix(), mixed.matrix())?,
        hilbert::operator_norm(tau.matrix())?
    );

    let kron = hilbert::tensor_product(a.projector().as_ref(), b.projector().as_ref())?;
    let err = hilbert::trace_norm((&kron - &product.projector()).as_ref())?;
    println!("|a⟩⟨a| ⊗ |b⟩⟨b| against the product projector: {err:.2e}");
    Ok(())
}
