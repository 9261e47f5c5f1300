//! Type every reachable configuration of a program.

use defcal::corpus;
use defcal::explore::{check_preservation, explore, ExploreBounds};
use defcal::typecheck::{check_configuration, ConfigTypeEnv, ForwardMode};

fn main() {
    let p = corpus::get("mutual").unwrap().parse().unwrap();
    let lts = explore(&p, ExploreBounds::from_env(), ForwardMode::Strict).unwrap();
    match check_preservation(&p, &lts) {
        Ok(()) => println!("{} configurations well typed", lts.states.len()),
        Err((i, errors)) => println!("state {i}: {errors:?}"),
    }
    let last = lts.states.last().unwrap();
    let omega = ConfigTypeEnv::reconstruct(&p, last, ForwardMode::Strict).unwrap();
    println!("{last}");
    println!("{:?}", check_configuration(&omega, last));
}
