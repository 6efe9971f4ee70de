//! Evaluates the closed-form bounds for a layer: variance proxy β_t, the
//! covariance majorant Σ_t against it, error radius κ and failure mass.
//!
//! cargo run --example error_bounds

use spfc::analysis::{beta_sequence, failure_mass, kappa, sigma_recursion, synthetic_data, BoundInputs, DataDistribution};
use spfc::numerics::max_eigenvalue;
use spfc::operators::OperatorSpec;

fn main() {
    let (m, n0, n1, p) = (32, 256, 16, 2.0);
    let x = synthetic_data(m, n0, DataDistribution::Uniform, 1);
    for spec in [
        OperatorSpec::onebit(1.0).unwrap(),
        OperatorSpec::prune(1.0, 0.5).unwrap(),
        OperatorSpec::quantize_prune(1.0, 0.5).unwrap(),
    ] {
        for c in [9.0, 100.0, 1000.0] {
            let inputs = BoundInputs::from_data(&x, n1, &spec, c, p).unwrap();
            let k = kappa(&inputs, spec.kind()).unwrap();
            let f = failure_mass(&inputs, spec.kind()).unwrap();
            let note = if f >= 1.0 { " (vacuous)" } else { "" };
            println!("{:<16} C = {c:>6}: kappa {k:9.2}, failure mass {f:.3e}{note}", spec.kind().as_str());
        }
    }

    let small = synthetic_data(4, 32, DataDistribution::Uniform, 2);
    let spec = OperatorSpec::onebit(1.0).unwrap();
    let inputs = BoundInputs::from_data(&small, 1, &spec, 2.0, 1.0).unwrap();
    let beta = beta_sequence(&inputs);
    let sigma = sigma_recursion(&small, 2.0, inputs.deviation, 32).unwrap();
    println!("\nt   lambda_max(Sigma_t)   beta_t");
    for t in [1, 2, 4, 8, 16, 32] {
        println!("{t:<3} {:>18.4} {:>9.4}", max_eigenvalue(&sigma[t]).unwrap(), beta[t]);
    }
}
