//! Reader-side synchronisation counts for delegation chains of growing
//! length, with and without forward*.

use defcal::stats::{format_chain_table, list_sum_table};

fn main() {
    let rows = list_sum_table(&[1, 5, 10, 20], 100_000).unwrap();
    print!("{}", format_chain_table(&rows));
}
