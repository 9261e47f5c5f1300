//! Compare every delegation program with its forward elimination, then
//! show the witness separating a mutant from the original.

use defcal::bisim::{accepts_weak_trace, branching_bisimilar, relabel, BisimVerdict, Granularity};
use defcal::corpus::{self, MUTANTS, PROGRAMS};
use defcal::explore::{explore, ExploreBounds};
use defcal::transform::fwd_elim;
use defcal::typecheck::ForwardMode;

fn main() {
    let bounds = ExploreBounds::from_env();
    for e in PROGRAMS.iter().filter(|e| e.delegation) {
        let p = e.parse().unwrap();
        let lf = explore(&p, bounds, ForwardMode::Strict).unwrap();
        let ld = explore(&fwd_elim(&p).unwrap(), bounds, ForwardMode::Strict).unwrap();
        let r = branching_bisimilar(
            &relabel(&lf, Granularity::Fine),
            &relabel(&ld, Granularity::Fine),
        )
        .unwrap();
        println!(
            "{:<20} {:>6} / {:<6} states  {}",
            e.name,
            lf.states.len(),
            ld.states.len(),
            r.to_json()
        );
    }

    let original = relabel(
        &explore(
            &corpus::get("checked").unwrap().parse().unwrap(),
            bounds,
            ForwardMode::Strict,
        )
        .unwrap(),
        Granularity::Fine,
    );
    for m in MUTANTS {
        let lm = relabel(
            &explore(&m.parse().unwrap(), bounds, ForwardMode::Strict).unwrap(),
            Granularity::Fine,
        );
        if let BisimVerdict::NotBisimilar { witness, .. } =
            branching_bisimilar(&original, &lm).unwrap().verdict
        {
            let w: Vec<String> = witness.iter().map(|l| l.to_string()).collect();
            println!(
                "{}: {} (original accepts: {}, mutant accepts: {})",
                m.name,
                w.join(" "),
                accepts_weak_trace(&original, &witness),
                accepts_weak_trace(&lm, &witness)
            );
        }
    }
}
