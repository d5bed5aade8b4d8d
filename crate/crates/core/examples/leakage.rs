//! Spectral leakage between two nearby Hermitian operators.
//!
//! ```bash
//! cargo run --release --example leakage
//! ```

use ethlab::analysis::haar_vector;
use ethlab::hilbert::{DensityMatrix, PureState, Space};
use ethlab::shells::{self, Spectrum};
use ethlab::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Mat<c64> {
    let g: Vec<c64> = haar_vector(rng, d * d);
    Mat::from_fn(d, d, |i, j| {
        let (a, b) = (g[i * d + j], g[j * d + i]);
        (a + b.conj()) * (0.5 * scale * d as f64)
    })
}

fn main() -> ethlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 24;
    let a2 = random_hermitian(&mut rng, d, 1.0);
    let v = random_hermitian(&mut rng, d, 0.05);
    let a1 = &a2 + &v;
    let s1 = Spectrum::of(a1.as_ref())?;
    let s2 = Spectrum::of(a2.as_ref())?;

    // A state built from the eigenvectors of A2 inside [λ−Δ2, λ+Δ2].
    let (lambda, delta2) = (0.0, 0.3);
    let inside: Vec<usize> = (0..d).filter(|&k| (s2.values[k] - lambda).abs() <= delta2).collect();
    let c = haar_vector(&mut rng, inside.len());
    let amps: Vec<c64> = (0..d)
        .map(|i| inside.iter().zip(&c).map(|(&k, &ck)| s2.vectors[(i, k)] * ck).sum())
        .collect();
    let rho = DensityMatrix::from_pure(&PureState::normalized(Space::System(d), amps)?);

    for delta1 in [0.5, 1.0, 2.0, 4.0] {
        let r = shells::leakage_bound_check_with(&s1, &s2, a1.as_ref(), a2.as_ref(), lambda, delta1, delta2, &rho)?;
        println!("Δ1={delta1:<4} Tr(ρQ) = {:.3e}  bound {:.3e}  {:?}", r.lhs, r.rhs, r.verdict);
    }
    Ok(())
}
