pub mod cli;
pub mod driver;
pub mod engine;
pub mod lang;
pub mod os_sim;
pub mod rebuilder;
pub mod tracer;
