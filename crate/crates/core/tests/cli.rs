use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::Command;

use chrv::cli::{main_with, EXIT_BUDGET, EXIT_ERROR, EXIT_FAIL, EXIT_OK};
use chrv::driver::server::Server;
use chrv::driver::DriverConfig;
use chrv::tracer::{canonicalize, from_xml, validate_xml, ActualTraceEvent};
use serde_json::{json, Value};

const LEQ_QUERY: &str = "leq(A,B),leq(B,C),leq(C,A)";
const GOLDEN: &str = include_str!("fixtures/leq_golden.chrv.xml");

fn program(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("programs").join(name).display().to_string()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chrv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn chrv(args: &[&str], stdin: &str) -> Out {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("chrv").chain(args.iter().copied());
    let code = main_with(argv, &mut stdin.as_bytes(), &mut out, &mut err);
    Out {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn run(args: &[&str]) -> Out {
    chrv(args, "")
}

fn jsonl(text: &str) -> Vec<ActualTraceEvent> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn run_leq_writes_the_golden_document() {
    let leq = program("leq.chr");
    let o = run(&["run", &leq, "--query", LEQ_QUERY, "--output", "xml"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    validate_xml(&o.stdout).unwrap();
    assert_eq!(canonicalize(&o.stdout).unwrap(), canonicalize(GOLDEN).unwrap());
}

#[test]
fn formats_describe_the_same_events() {
    let leq = program("leq.chr");
    let xml = from_xml(&run(&["run", &leq, "-q", LEQ_QUERY, "--output", "xml"]).stdout).unwrap();
    let json = jsonl(&run(&["run", &leq, "-q", LEQ_QUERY, "--output", "jsonl"]).stdout);
    let pretty = run(&["run", &leq, "-q", LEQ_QUERY, "--output", "pretty"]).stdout;
    assert_eq!(xml.events, json);
    let listed: Vec<String> = json.iter().map(|e| e.to_string()).collect();
    assert_eq!(pretty.lines().collect::<Vec<_>>(), listed);
    assert_eq!(listed[0], "1 initialState goal((leq(A,B), leq(B,C), leq(C,A))) hind(1)");
}

#[test]
fn reflexivity_fires_after_one_introduce() {
    let o = run(&["run", &program("leq.chr"), "-q", "leq(A,A)", "--output", "jsonl"]);
    let kinds: Vec<_> = jsonl(&o.stdout).iter().map(|e| e.kind.as_str()).collect();
    assert_eq!(kinds, ["initialState", "introduce", "apply"]);
}

#[test]
fn empty_program_and_query() {
    let o = run(&["run", &program("empty.chr"), "--query", "", "--output", "jsonl"]);
    assert_eq!(o.code, EXIT_OK);
    assert_eq!(jsonl(&o.stdout).len(), 1);
}

#[test]
fn exit_codes() {
    let empty = program("empty.chr");
    assert_eq!(run(&["run", &empty, "-q", "X=a, X=b"]).code, EXIT_FAIL);
    let looping = tmp("loop.chr");
    std::fs::write(&looping, "r@ p(X) <=> p(X).").unwrap();
    let o = run(&["run", looping.to_str().unwrap(), "-q", "p(a)", "--budget", "20", "--output", "jsonl"]);
    assert_eq!(o.code, EXIT_BUDGET);
    assert_eq!(jsonl(&o.stdout).len(), 20);
    assert_eq!(run(&["verify", looping.to_str().unwrap(), "-q", "p(a)", "--budget", "20"]).code, EXIT_BUDGET);
    assert_eq!(run(&["run", &empty, "-q", "leq(A"]).code, EXIT_ERROR);
    assert_eq!(run(&["run", "/nonexistent.chr"]).code, EXIT_ERROR);
    assert_eq!(run(&["run", &empty, "--budget", "0"]).code, EXIT_ERROR);
    assert_eq!(run(&["frobnicate"]).code, EXIT_ERROR);
    assert_eq!(run(&["--help"]).code, EXIT_OK);
}

#[test]
fn filters() {
    let leq = program("leq.chr");
    let o = run(&["run", &leq, "-q", LEQ_QUERY, "--output", "pretty", "--filter", "kinds=apply"]);
    assert_eq!(o.stdout.lines().count(), 3);
    let o = run(&["run", &leq, "-q", LEQ_QUERY, "--output", "jsonl", "--filter", "bic~A=C"]);
    assert_eq!(jsonl(&o.stdout).iter().map(|e| e.chrono).collect::<Vec<_>>(), [7, 8]);
    assert_eq!(run(&["run", &leq, "-q", LEQ_QUERY, "--filter", "kinds=apply"]).code, EXIT_ERROR);
    assert_eq!(run(&["run", &leq, "-q", LEQ_QUERY, "--output", "pretty", "--filter", "chrono=5..2"]).code, EXIT_ERROR);
}

#[test]
fn out_file() {
    let path = tmp("leq.xml");
    let o = run(&["run", &program("leq.chr"), "-q", LEQ_QUERY, "--out", path.to_str().unwrap()]);
    assert_eq!((o.code, o.stdout.as_str()), (EXIT_OK, ""));
    let doc = std::fs::read_to_string(&path).unwrap();
    assert_eq!(from_xml(&doc).unwrap().len(), 8);
    let v = run(&["validate", path.to_str().unwrap()]);
    assert_eq!((v.code, v.stdout.trim()), (EXIT_OK, "valid: 8 events"));
}

#[test]
fn step_mode() {
    let leq = program("leq.chr");
    let o = chrv(&["run", &leq, "-q", LEQ_QUERY, "--step"], "\n\n\n");
    assert_eq!(o.stdout.lines().count(), 3);
    assert!(o.stderr.ends_with("ended\n"), "{}", o.stderr);

    let o = chrv(&["run", &leq, "-q", LEQ_QUERY, "--step"], "f kinds=apply\n\n\nq\n");
    let chronos: Vec<_> = o.stdout.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(chronos, ["4", "7"]);

    let o = chrv(&["run", &leq, "-q", LEQ_QUERY, "--step"], "\nc\n");
    assert_eq!(o.stdout.lines().count(), 8);
    assert!(o.stderr.ends_with("finished\n"));
    assert_eq!(o.code, EXIT_OK);

    let o = chrv(&["run", &program("empty.chr"), "-q", "X=a, X=b", "--step"], "c\n");
    assert_eq!(o.code, EXIT_FAIL);
}

#[test]
fn verify_and_replay() {
    let leq = program("leq.chr");
    let o = run(&["verify", &leq, "-q", LEQ_QUERY]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.starts_with("faithful"), "{}", o.stdout);

    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/leq_golden.chrv.xml");
    let o = run(&["replay", golden.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK);
    let last = o.stdout.lines().last().unwrap();
    assert_eq!(last, "8 apply goal() udc() bic((A=C, C=B)) next_id(5)");
}

#[test]
fn ossim() {
    let o = run(&["ossim", "fibonacci", "--script", &program("fibonacci.script")]);
    assert_eq!(o.code, EXIT_OK);
    let vs: Vec<i64> = o
        .stdout
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["attributes"]["v"].as_i64().unwrap())
        .collect();
    assert_eq!(vs, [2, 3, 5, 8, 13]);

    let xml = tmp("robots.xml");
    let o = run(&["ossim", "robots", "--replay", &program("robots.trace"), "--xml", xml.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert_eq!(o.stdout.lines().count(), 10);
    let first: Value = serde_json::from_str(o.stdout.lines().next().unwrap()).unwrap();
    assert_eq!(first, json!({"chrono": 1, "kind": "pickup", "attributes": {"a": "a1", "o": "o1", "r": "r1"}}));
    assert_eq!(std::fs::read_to_string(&xml).unwrap().matches("<event ").count(), 10);

    let bad = tmp("bad.script");
    std::fs::write(&bad, "Pickup a1 o1 r1\nOpen a1 d12\n").unwrap();
    let o = run(&["ossim", "robots", "--script", bad.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_FAIL);
    assert_eq!(o.stdout.lines().count(), 1);
    assert!(o.stderr.contains("step 2"), "{}", o.stderr);
    assert_eq!(run(&["ossim", "chess", "--script", bad.to_str().unwrap()]).code, EXIT_ERROR);
    assert_eq!(run(&["ossim", "robots"]).code, EXIT_ERROR);
}

fn request(stream: &mut TcpStream, reader: &mut impl BufRead, req: Value) -> Value {
    writeln!(stream, "{req}").unwrap();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    serde_json::from_str(&line).unwrap()
}

#[test]
fn protocol_reproduces_run() {
    let leq_src = std::fs::read_to_string(program("leq.chr")).unwrap();
    let expected = jsonl(&run(&["run", &program("leq.chr"), "-q", LEQ_QUERY, "--output", "jsonl"]).stdout);

    let addr = Server::bind("127.0.0.1:0", DriverConfig::default()).unwrap().spawn().unwrap();
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let r = request(&mut stream, &mut reader, json!({"id": 1, "op": "load", "program": leq_src, "query": LEQ_QUERY, "step": true}));
    assert_eq!(r["ok"], true);
    let mut stepped = Vec::new();
    for _ in 0..3 {
        let r = request(&mut stream, &mut reader, json!({"op": "step"}));
        let events: Vec<ActualTraceEvent> = serde_json::from_value(r["events"].clone()).unwrap();
        assert_eq!(events.len(), 1);
        stepped.extend(events);
    }
    let partial = request(&mut stream, &mut reader, json!({"op": "export_xml"}));
    let partial = partial["xml"].as_str().unwrap();
    validate_xml(partial).unwrap();
    assert_eq!(from_xml(partial).unwrap().len(), 3);

    let r = request(&mut stream, &mut reader, json!({"op": "control", "cmd": "continue"}));
    assert_eq!(r["status"], "finished");
    stepped.extend(serde_json::from_value::<Vec<ActualTraceEvent>>(r["events"].clone()).unwrap());
    assert_eq!(stepped, expected);

    let r = request(&mut stream, &mut reader, json!({"op": "fetch", "query": {"kinds": ["apply"]}}));
    let chronos: Vec<u64> = r["events"].as_array().unwrap().iter().map(|e| e["chrono"].as_u64().unwrap()).collect();
    assert_eq!(chronos, [4, 7, 8]);
}

#[test]
fn binary_exit_codes_and_budget_variable() {
    let bin = env!("CARGO_BIN_EXE_chrv");
    let looping = tmp("loop_env.chr");
    std::fs::write(&looping, "r@ p(X) <=> p(X).").unwrap();
    let out = Command::new(bin)
        .args(["run", looping.to_str().unwrap(), "-q", "p(a)", "--output", "jsonl"])
        .env("CHR_TRACE_BUDGET", "9")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_BUDGET));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 9);
    let out = Command::new(bin)
        .args(["run", &program("leq.chr"), "-q", LEQ_QUERY])
        .env_remove("CHR_TRACE_BUDGET")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(canonicalize(&String::from_utf8(out.stdout).unwrap()).unwrap(), canonicalize(GOLDEN).unwrap());
}

/// The request/response example in the protocol document.
#[test]
fn documented_protocol_example() {
    use chrv::driver::protocol::{handle_line, Connection};
    use chrv::driver::Driver;

    let doc = include_str!("../../../docs/protocol.md");
    let lines: Vec<&str> = doc.lines().filter(|l| l.starts_with("{\"id\"")).collect();
    let (requests, documented) = lines.split_at(5);
    let mut driver = Driver::new(DriverConfig::default()).unwrap();
    let conn = Connection::open(&mut driver, "conn-1").unwrap();
    let responses: Vec<Value> = requests
        .iter()
        .map(|l| serde_json::to_value(handle_line(&mut driver, &conn, l)).unwrap())
        .collect();
    assert!(responses.iter().all(|r| r["ok"] == true), "{responses:?}");
    let want: Value = serde_json::from_str(documented[0]).unwrap();
    assert_eq!(responses[3], want);
}
