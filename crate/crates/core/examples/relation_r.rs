//! Check directly that the relation R between a DeF+F program and its
//! forward elimination is a branching bisimulation.

use defcal::bisim::check_r_is_bisimulation;
use defcal::bisim::relation::check_lemmas;
use defcal::corpus;
use defcal::explore::{explore, ExploreBounds};
use defcal::transform::fwd_elim;
use defcal::typecheck::ForwardMode;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "chain4".into());
    let p = corpus::get(&name)
        .expect("unknown corpus program")
        .parse()
        .unwrap();
    let bounds = ExploreBounds::from_env();
    let lf = explore(&p, bounds, ForwardMode::Strict).unwrap();
    let ld = explore(&fwd_elim(&p).unwrap(), bounds, ForwardMode::Strict).unwrap();
    match check_r_is_bisimulation(&lf, &ld, 1_000_000) {
        Ok(c) => println!("{name}: R is a branching bisimulation on {} pairs", c.pairs),
        Err(c) => println!("{name}: {c}"),
    }
    let (a, b) = (&lf.states[lf.initial], &ld.states[ld.initial]);
    println!("lemmas on the initial pair: {:?}", check_lemmas(a, b));
}
