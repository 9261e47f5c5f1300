//! Explore every interleaving of the future-cycle program on both sides of
//! forward elimination.

use defcal::bisim::{has_tau_cycle, relabel, Granularity};
use defcal::corpus;
use defcal::explore::{check_progress, explore, ExploreBounds, Lts};
use defcal::runtime::{classify, Status};
use defcal::transform::fwd_elim;
use defcal::typecheck::ForwardMode;

fn describe(name: &str, lts: &Lts) {
    let leaves = lts.leaves();
    let deadlocks = leaves
        .iter()
        .filter(|&&i| matches!(classify(&lts.states[i]), Status::Deadlocked(_)))
        .count();
    println!(
        "{name}: {} states, {} edges, {} leaves ({deadlocks} deadlocked), silent cycle: {}, progress: {}",
        lts.states.len(),
        lts.edges.len(),
        leaves.len(),
        has_tau_cycle(&relabel(lts, Granularity::Coarse)),
        if check_progress(lts).is_ok() { "ok" } else { "violated" },
    );
}

fn main() {
    let p = corpus::get("cycle").unwrap().parse().unwrap();
    let bounds = ExploreBounds::from_env();
    describe("DeF+F", &explore(&p, bounds, ForwardMode::Strict).unwrap());
    describe(
        "DeF",
        &explore(&fwd_elim(&p).unwrap(), bounds, ForwardMode::Strict).unwrap(),
    );
}
