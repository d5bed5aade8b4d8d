mod common;

use common::*;
use ethlab::hilbert::{self, DensityMatrix, PureState, Space, SpaceShape};
use ethlab::{c64, Mat};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=6, 2usize..=10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_matches_index_sum(seed in any::<u64>(), (d_s, d_b) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = SpaceShape::new(d_s, d_b).unwrap();
        let x = random_matrix(&mut rng, d_s * d_b, d_s * d_b);
        let got = hilbert::partial_trace_bath_op(x.as_ref(), shape).unwrap();
        prop_assert!(max_abs_diff(got.as_ref(), partial_trace_oracle(x.as_ref(), d_s, d_b).as_ref()) <= 1e-12);
    }

    #[test]
    fn pure_partial_trace_agrees_with_mixed(seed in any::<u64>(), (d_s, d_b) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = SpaceShape::new(d_s, d_b).unwrap();
        let v = random_unit_vector(&mut rng, d_s * d_b);
        let a = hilbert::partial_trace_pure(&v, shape);
        let b = partial_trace_oracle(outer(&v).as_ref(), d_s, d_b);
        prop_assert!(max_abs_diff(a.as_ref(), b.as_ref()) <= 1e-13);
    }

    #[test]
    fn product_state_reduces_to_its_factor(seed in any::<u64>(), (d_s, d_b) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = DensityMatrix::new(Space::System(d_s), random_density(&mut rng, d_s, 2)).unwrap();
        let b = DensityMatrix::new(Space::Bath(d_b), random_density(&mut rng, d_b, 3)).unwrap();
        let rho = DensityMatrix::product(&s, &b).unwrap();
        let red = hilbert::partial_trace_bath(&rho).unwrap();
        prop_assert!(max_abs_diff(red.matrix(), s.matrix()) <= 1e-13);
    }

    #[test]
    fn trace_norm_matches_jacobi(seed in any::<u64>(), d in 1usize..=24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d);
        let got = hilbert::trace_norm(h.as_ref()).unwrap();
        prop_assert!((got - trace_norm_hermitian(h.as_ref())).abs() <= 1e-10 * got.max(1.0));
    }

    #[test]
    fn operator_norm_matches_power_iteration(seed in any::<u64>(), d in 1usize..=24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d);
        let got = hilbert::operator_norm(h.as_ref()).unwrap();
        prop_assert!((got - power_iteration_norm(h.as_ref(), &mut rng)).abs() <= 1e-10 * got.max(1.0));
        prop_assert!(got <= hilbert::trace_norm(h.as_ref()).unwrap() + 1e-12);
    }

    #[test]
    fn tensor_product_matches_kron(seed in any::<u64>(), a in 1usize..=5, b in 1usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, a, a);
        let y = random_matrix(&mut rng, b, b);
        let got = hilbert::tensor_product(x.as_ref(), y.as_ref()).unwrap();
        prop_assert!(max_abs_diff(got.as_ref(), kron_oracle(x.as_ref(), y.as_ref()).as_ref()) == 0.0);
        let t = hilbert::trace(got.as_ref());
        let tt = hilbert::trace(x.as_ref()) * hilbert::trace(y.as_ref());
        prop_assert!((t - tt).norm() <= 1e-10 * tt.norm().max(1.0));
    }

    #[test]
    fn trace_distance_is_a_bounded_metric(seed in any::<u64>(), d in 2usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: Vec<Mat<c64>> = (0..3).map(|k| random_density(&mut rng, d, 1 + k)).collect();
        let dist = |a: usize, b: usize| hilbert::trace_distance(r[a].as_ref(), r[b].as_ref()).unwrap();
        prop_assert!(dist(0, 0) <= 1e-12);
        prop_assert!((dist(0, 1) - dist(1, 0)).abs() <= 1e-12);
        prop_assert!(dist(0, 1) <= 2.0 + 1e-12);
        prop_assert!(dist(0, 2) <= dist(0, 1) + dist(1, 2) + 1e-12);
    }

    #[test]
    fn orthogonal_pure_states_are_at_distance_two(d in 2usize..=16, i in 0usize..16, j in 0usize..16) {
        prop_assume!(i < d && j < d && i != j);
        let a = PureState::basis(Space::System(d), i).unwrap();
        let b = PureState::basis(Space::System(d), j).unwrap();
        let dist = hilbert::trace_distance(a.projector().as_ref(), b.projector().as_ref()).unwrap();
        prop_assert!((dist - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn eigh_reconstructs(seed in any::<u64>(), d in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, d);
        let e = hilbert::eigh(h.as_ref()).unwrap();
        let vd = Mat::from_fn(d, d, |i, k| e.vectors[(i, k)] * e.values[k]);
        let back = hilbert::matmul_adjoint_seq(vd.as_ref(), e.vectors.as_ref());
        prop_assert!(max_abs_diff(back.as_ref(), h.as_ref()) <= 1e-11 * (d as f64));
        let jac = hermitian_eigenvalues(h.as_ref());
        for (a, b) in e.values.iter().zip(&jac) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn jacobi_oracle_on_a_known_spectrum() {
    let h = Mat::from_fn(3, 3, |i, j| match (i, j) {
        (0, 0) => c64::new(2.0, 0.0),
        (1, 1) | (2, 2) => c64::new(1.0, 0.0),
        (1, 2) => c64::new(0.0, 1.0),
        (2, 1) => c64::new(0.0, -1.0),
        _ => c64::new(0.0, 0.0),
    });
    let ev = hermitian_eigenvalues(h.as_ref());
    for (a, b) in ev.iter().zip([0.0, 2.0, 2.0]) {
        assert!((a - b).abs() < 1e-14, "{ev:?}");
    }
}
