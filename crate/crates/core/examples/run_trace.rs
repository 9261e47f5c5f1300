//! Run one interleaving step by step.

use defcal::corpus;
use defcal::explore::{run, SchedulerPolicy};
use defcal::typecheck::ForwardMode;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let policy = match seed {
        Some(s) => SchedulerPolicy::SeededRandom(s),
        None => SchedulerPolicy::RoundRobin,
    };
    let p = corpus::get("delegate_forward").unwrap().parse().unwrap();
    let trace = run(&p, policy, ForwardMode::Strict, 1000).unwrap();
    println!("   {}", trace.initial);
    for (label, cn) in &trace.steps {
        println!("-> {label}\n   {cn}");
    }
    println!("{:?}", trace.outcome);
}
