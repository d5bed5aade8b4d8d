//! Build the default spin-chain benchmark, inspect its split and round-trip the spec.
//!
//! ```bash
//! cargo run --release --example build_model -- 1 7
//! ```

use ethlab::models::{self, ModelSpec};

fn main() -> ethlab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (ns, nb) = (args.first().copied().unwrap_or(1), args.get(1).copied().unwrap_or(7));

    let spec = ModelSpec::default_benchmark(ns, nb);
    let h = models::build_hamiltonian(&spec)?;
    println!("model {}  d_S={} d_B={}", spec.content_hash(), h.shape.d_s(), h.shape.d_b());
    println!("‖H_C‖ = {:.6}", h.norm_hc);
    for (k, v) in models::coupling_record(&spec) {
        println!("  {k:<12} {v}");
    }

    let report = models::verify_split(&h)?;
    for c in &report.checks {
        println!("{:<20} {:.2e} ≤ {:.2e}  {:?}", c.name, c.lhs, c.rhs, c.verdict);
    }

    // The hash is a function of the canonical JSON, so a round trip keeps it.
    let again = ModelSpec::from_json(&spec.to_json_pretty())?;
    assert_eq!(again.content_hash(), spec.content_hash());
    Ok(())
}
