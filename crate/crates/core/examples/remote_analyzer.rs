//! Starts the driver server on a free port and drives a session over TCP
//! the way a remote analyzer would.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use chrv::driver::server::Server;
use chrv::driver::DriverConfig;
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let addr = Server::bind("127.0.0.1:0", DriverConfig::default())?.spawn()?;
    println!("driver listening on {addr}");

    let mut stream = TcpStream::connect(addr)?;
    let mut lines = BufReader::new(stream.try_clone()?).lines();
    let mut send = |req: Value| -> Result<Value, Box<dyn std::error::Error>> {
        println!("> {req}");
        writeln!(stream, "{req}")?;
        let line = lines.next().ok_or("connection closed")??;
        println!("< {line}\n");
        Ok(serde_json::from_str(&line)?)
    };

    send(json!({"id": 1, "op": "load", "program": include_str!("../programs/leq.chr"),
                "query": "leq(A,B), leq(B,A)", "step": true}))?;
    send(json!({"id": 2, "op": "step"}))?;
    send(json!({"id": 3, "op": "filter", "query": {"kinds": ["apply"]}}))?;
    send(json!({"id": 4, "op": "control", "cmd": "continue"}))?;
    send(json!({"id": 5, "op": "fetch", "range": [1, 3], "states": true}))?;
    let xml = send(json!({"id": 6, "op": "export_xml"}))?;
    println!("exported {} bytes of XML", xml["xml"].as_str().unwrap_or("").len());
    Ok(())
}
