//! Round-to-nearest versus stochastic 1-bit compression on data whose columns
//! all point the same way, printed as CSV.
//!
//! cargo run --release --example rtn_comparison

use spfc::analysis::{rtn_comparison, rtn_table_csv, RtnSetup};

fn main() {
    let setup = RtnSetup::new(vec![16, 64, 256, 1024, 4096], 1.0, 9.0, 1);
    let rows = rtn_comparison(&setup).unwrap();
    print!("{}", rtn_table_csv(&rows));
}
