//! Steps through a run one transition at a time, printing the virtual
//! state the driver keeps after each event.

use chrv::driver::{Driver, DriverConfig};
use chrv::lang::{parse_program, parse_query};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut driver = Driver::new(DriverConfig { step_by_step: true, budget: 100 })?;
    driver.load(
        parse_program(include_str!("../programs/leq.chr"))?,
        parse_query("leq(A,B), leq(B,A)")?,
    )?;
    while let Some(event) = driver.new_step()? {
        let state = driver.snapshot(event.chrono).expect("every event has a state");
        println!("{event}");
        println!(
            "    goal [{}]  store [{}]  builtins [{}]",
            state.render_goal(),
            state.render_store(),
            state.render_bics()
        );
    }
    println!("{}", driver.status().as_str());
    Ok(())
}
