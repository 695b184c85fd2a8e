//! Rebuilds the virtual states from an XML trace alone and checks them
//! against the engine's states.

use chrv::lang::{parse_program, parse_query};
use chrv::rebuilder::{check_faithful, rebuild};
use chrv::tracer::{from_xml, run_traced, to_xml};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse_program(include_str!("../programs/leq.chr"))?;
    let query = parse_query("leq(A,B), leq(B,C), leq(C,A)")?;

    let doc = to_xml(&run_traced(&program, &query, 10_000).trace);
    let trace = from_xml(&doc)?;
    for (e, state) in trace.events.iter().zip(rebuild(&trace)?) {
        println!("{:>2} {:<12} {state}", e.chrono, e.kind.as_str());
    }

    println!();
    println!("{}", check_faithful(&program, &query, 10_000)?);
    Ok(())
}
