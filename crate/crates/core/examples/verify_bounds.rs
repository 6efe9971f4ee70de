//! Monte Carlo validation: the tail of the accumulated error against its
//! Gaussian bound, and the per-layer error radius for each operator.
//!
//! cargo run --release --example verify_bounds

use spfc::analysis::{
    synthetic_data, theorem_trials, verify_proposition, verify_theorem, BoundInputs, DataDistribution, PropositionSetup,
};
use spfc::{Activation, CompressionConfig, OperatorSpec};

fn main() {
    let x = synthetic_data(16, 128, DataDistribution::Uniform, 1);
    let cfg = CompressionConfig::new(4.0, OperatorSpec::onebit(1.0).unwrap(), 2).unwrap();
    let samples = theorem_trials(&x, &cfg, 500, 3).unwrap();
    let inputs = BoundInputs::from_data(&x, 1, &cfg.operator, cfg.scale, 1.0).unwrap();
    let report = verify_theorem(&samples, &inputs, None).unwrap();
    println!("tail check over {} trials (beta = {:.1}):", report.trials, report.beta);
    for c in &report.checks {
        println!("  alpha {:7.2}: empirical {:.3} <= bound {:.3} + {:.3}", c.alpha, c.empirical, c.bound, c.slack);
    }

    let setup = PropositionSetup {
        x: synthetic_data(32, 256, DataDistribution::Uniform, 4),
        n1: 16,
        p: 2.0,
        trials: 200,
        weight_seed: 5,
        activation: Activation::Relu,
    };
    for spec in [
        OperatorSpec::onebit(1.0).unwrap(),
        OperatorSpec::prune(1.0, 0.5).unwrap(),
        OperatorSpec::quantize_prune(1.0, 0.5).unwrap(),
    ] {
        let cfg = CompressionConfig::new(9.0, spec, 6).unwrap();
        let r = verify_proposition(&cfg, &setup).unwrap();
        let e = &r.empirical;
        println!(
            "{:<16} kappa {:7.2}, max error {:6.2}, exceed {}/{}, support violations {}, mass {:.3e}: {:?}",
            r.kind.as_str(),
            r.kappa,
            e.max_observed_error,
            e.error_exceed_count,
            e.trials,
            e.support_violation_count,
            r.failure_mass_raw,
            r.verdict
        );
    }
}
