//! A synchronous call to a forwarding function: flexible typing waits for
//! the forwarded future and deadlocks, strict typing hands the future back.

use defcal::corpus;
use defcal::explore::{run, SchedulerPolicy};
use defcal::typecheck::ForwardMode;

fn main() {
    for (name, mode) in [
        ("sync_forward_wait", ForwardMode::Flexible),
        ("sync_forward_flow", ForwardMode::Strict),
    ] {
        let p = corpus::get(name).unwrap().parse().unwrap();
        let t = run(&p, SchedulerPolicy::RoundRobin, mode, 1000).unwrap();
        println!("{name} ({mode}): {:?}", t.outcome);
        println!("  final: {}", t.final_configuration());
    }
}
