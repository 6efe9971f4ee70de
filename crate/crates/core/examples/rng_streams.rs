//! Counter-based random streams: every (seed, layer, column) owns an
//! independent stream, so results do not depend on scheduling.
//!
//! cargo run --example rng_streams

use rayon::prelude::*;
use spfc::operators::{mix_seed, RngStream};

fn main() {
    let first_draws = |layer: usize, column: usize| {
        let mut s = RngStream::derive(42, layer, column);
        [s.next_f64(), s.next_f64(), s.next_f64()]
    };
    println!("layer 0 column 0: {:?}", first_draws(0, 0));
    println!("layer 0 column 1: {:?}", first_draws(0, 1));
    println!("layer 1 column 0: {:?}", first_draws(1, 0));

    let serial: Vec<u64> = (0..1000).map(|j| RngStream::derive(7, 0, j).next_word()).collect();
    let parallel: Vec<u64> = (0..1000).into_par_iter().map(|j| RngStream::derive(7, 0, j).next_word()).collect();
    println!("serial == parallel: {}", serial == parallel);
    println!("trial seeds: {:?}", (0..3).map(|t| mix_seed(42, t)).collect::<Vec<_>>());
}
