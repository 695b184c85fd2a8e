//! The robot world: the ten-action run, its extracted trace, and the replay
//! of that trace. Starting from the initial state the axioms give,
//! the very first action is not possible.

use chrv::os_sim::script::{parse_events, parse_script};
use chrv::os_sim::{extraction, replay, robots, run_script};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = robots::spec();
    println!("S0 = {}\n", spec.initial);

    let (sit, failure) = run_script(&spec, &parse_script(robots::SCRIPT)?);
    assert!(failure.is_none());
    for (h, e) in sit.history.iter().zip(extraction(&sit)) {
        let args: Vec<_> = h.args.iter().map(|a| a.to_string()).collect();
        println!("{:<32} {e}", format!("{}({})", h.action, args.join(",")));
    }
    println!("\nfinal state = {}", sit.current());

    let (replayed, failed) = replay(&spec, &parse_events(robots::TRACE)?);
    println!("\nreplay: {} events, first impossible: {failed:?}", replayed.history.len());

    let axiomatic = robots::spec_from(robots::axiomatic_initial_state());
    let (_, failure) = run_script(&axiomatic, &parse_script(robots::SCRIPT)?);
    if let Some(f) = failure {
        println!("from the axiomatic S0: step {} fails: {}", f.index + 1, f.error);
    }
    Ok(())
}
