//! Two analyzers with different filters watch the same run. One of them
//! pauses the run at the first rule firing, then narrows its filter.

use chrv::driver::{Command, Directive, Driver, DriverConfig, FilterQuery, Mailbox};
use chrv::lang::{parse_program, parse_query};
use chrv::tracer::{ActualTraceEvent, EventKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut driver = Driver::new(DriverConfig::default())?;

    let everything = Mailbox::new();
    driver.register_analyzer("log", FilterQuery::all(), everything.clone())?;

    let firings = Mailbox::new();
    let mut watch = firings.clone();
    let mut paused_once = false;
    driver.register_analyzer("rules", FilterQuery::kinds([EventKind::Apply]), move |e: &ActualTraceEvent| {
        chrv::driver::Sink::deliver(&mut watch, e)?;
        if paused_once {
            return Ok(Directive::Proceed);
        }
        paused_once = true;
        Ok(Directive::Pause)
    })?;

    driver.load(
        parse_program(include_str!("../programs/leq.chr"))?,
        parse_query("leq(A,B), leq(B,C), leq(C,A)")?,
    )?;
    let status = driver.control(Command::Continue)?;
    println!("{} after chrono {:?}", status.as_str(), everything.chronos().last());

    driver.update_filter("rules", "kinds=apply; bic~A=C".parse()?)?;
    let status = driver.control(Command::Continue)?;
    println!("{}", status.as_str());

    println!("\nrule firings seen by `rules`:");
    for e in firings.take() {
        println!("  {e}");
    }
    println!("`log` saw chronos {:?}", everything.chronos());

    println!("\nretrospective query for introduce events in chronos 1..5:");
    for e in driver.fetch(Some((1, 5)), &FilterQuery::kinds([EventKind::Introduce])) {
        println!("  {e}");
    }
    Ok(())
}
