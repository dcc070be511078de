//! The hard-concrete gate: deterministic median, probability of being
//! nonzero and a sampled histogram for a few log-locations.
//!
//! ```text
//! cargo run --release --example gate_distribution
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_inr::HardConcreteConfig;

fn main() {
    let hc = HardConcreteConfig::default();
    println!(
        "median is 0 for ψ ≤ {:.4} and 1 for ψ ≥ {:.4}",
        hc.off_threshold(),
        hc.on_threshold()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let draws = 200_000;
    println!("   ψ     median  P[z≠0]  sampled  P[z=0] P[0<z<1] P[z=1]");
    for psi in [-3.0f64, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0] {
        let (mut zero, mut one, mut nonzero) = (0, 0, 0);
        for _ in 0..draws {
            let z = hc.sample_gate(psi, rng.random::<f64>());
            zero += usize::from(z == 0.0);
            one += usize::from(z == 1.0);
            nonzero += usize::from(z > 0.0);
        }
        let frac = |n: usize| n as f64 / draws as f64;
        println!(
            "{psi:>5.1}  {:>7.4}  {:>6.4}  {:>7.4}  {:>6.3} {:>8.3} {:>6.3}",
            hc.gate_median(psi),
            hc.prob_nonzero(psi),
            frac(nonzero),
            frac(zero),
            1.0 - frac(zero) - frac(one),
            frac(one)
        );
    }
}
