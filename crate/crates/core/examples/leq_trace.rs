//! Runs the partial-order program on a cyclic query and prints the trace
//! in the functional form and as XML.

use chrv::lang::{parse_program, parse_query};
use chrv::tracer::{run_traced, to_xml, validate_xml};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse_program(include_str!("../programs/leq.chr"))?;
    let query = parse_query("leq(A,B), leq(B,C), leq(C,A)")?;
    let run = run_traced(&program, &query, 10_000);
    for e in &run.trace.events {
        println!("{e}");
    }
    let fin = run.result?;
    println!("\nfinal builtin store: {}", fin.state.render_bics());

    let doc = to_xml(&run.trace);
    validate_xml(&doc)?;
    println!("\n{doc}");
    Ok(())
}
