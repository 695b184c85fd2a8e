//! The rabbit population simulator: five months of growth, then a replay
//! of observed events that recovers the population.

use chrv::os_sim::script::parse_events;
use chrv::os_sim::{extraction, fibonacci, replay, run_script};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fibonacci::spec();
    let (sit, _) = run_script(&spec, &vec![("Mg".to_string(), Vec::new()); 5]);
    for e in extraction(&sit) {
        println!("{e}");
    }
    println!("T^w = {:?}", fibonacci::actual_trace(&sit));
    for (chrono, action, population) in fibonacci::virtual_trace(&sit) {
        println!("({chrono}, {action}, {population:?})");
    }

    let (rebuilt, failed) = replay(&spec, &parse_events("mg 2\nmg 3\nmg 5\nmg 8")?);
    println!(
        "\nreplayed {} events (first impossible: {failed:?}), population {:?}",
        rebuilt.history.len(),
        fibonacci::population(rebuilt.current()).unwrap_or_default()
    );
    Ok(())
}
