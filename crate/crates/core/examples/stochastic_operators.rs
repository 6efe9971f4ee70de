//! Applies each stochastic operator many times to one input and prints the
//! empirical mean, spread and support.
//!
//! cargo run --example stochastic_operators

use std::collections::BTreeMap;

use spfc::operators::{deviation_bound, OperatorSpec, RngStream, StochasticOperator};

fn main() {
    let z = 0.7;
    let draws = 200_000;
    let specs = [
        OperatorSpec::onebit(1.0).unwrap(),
        OperatorSpec::prune(1.0, 0.8).unwrap(),
        OperatorSpec::quantize_prune(1.0, 0.5).unwrap(),
        OperatorSpec::rtn(1.0).unwrap(),
    ];
    for spec in specs {
        let mut rng = RngStream::derive(1, 0, 0);
        let mut sum = 0.0;
        let mut worst: f64 = 0.0;
        let mut support: BTreeMap<String, usize> = BTreeMap::new();
        for _ in 0..draws {
            let q = spec.apply(z, &mut rng).unwrap();
            sum += q;
            worst = worst.max((q - z).abs());
            if spec.kind().is_discrete() {
                *support.entry(format!("{q}")).or_default() += 1;
            }
        }
        let bound = deviation_bound(&spec).map(|m| format!("{}", m.value())).unwrap_or_else(|_| "none".into());
        println!(
            "{:<16} mean {:+.4} (z = {z})  max |T(z)-z| {:.4}  bound M = {bound}  support {:?}",
            spec.kind().as_str(),
            sum / draws as f64,
            worst,
            support
        );
    }
}
