//! Forward elimination of the forward* variant of the delegation example.

use defcal::corpus;
use defcal::pretty::pretty;
use defcal::transform::fwd_elim;

fn main() {
    let p = corpus::get("delegate_forward").unwrap().parse().unwrap();
    let q = fwd_elim(&p).unwrap();
    print!("{}", pretty(&q));
    assert_eq!(q, corpus::get("delegate").unwrap().parse().unwrap());

    let flexible = corpus::get("sync_forward_wait").unwrap().parse().unwrap();
    println!("\n{}", fwd_elim(&flexible).unwrap_err());
}
