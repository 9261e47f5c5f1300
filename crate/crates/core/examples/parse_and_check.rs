//! Parse a program, print its normal form and its typing environment.

use defcal::corpus;
use defcal::pretty::pretty;
use defcal::typecheck::{check_program, ForwardMode};

fn main() {
    let entry = corpus::get("delegate").unwrap();
    let p = entry.parse().expect("corpus program parses");
    print!("{}", pretty(&p));
    match check_program(&p, ForwardMode::Strict) {
        Ok(env) => print!("\nwell typed:\n{}", env.summary()),
        Err(errors) => {
            for e in errors {
                println!("{e}");
            }
        }
    }

    // forward* in a function returning int only types in flexible mode.
    let q = corpus::get("sync_forward_wait").unwrap().parse().unwrap();
    for e in check_program(&q, ForwardMode::Strict).unwrap_err() {
        println!("strict: {e}");
    }
    println!(
        "flexible: {}",
        if check_program(&q, ForwardMode::Flexible).is_ok() {
            "ok"
        } else {
            "rejected"
        }
    );
}
