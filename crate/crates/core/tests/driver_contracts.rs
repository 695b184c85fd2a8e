mod common;

use std::sync::{Arc, Mutex};

use chrv::driver::{Command, Directive, Driver, DriverConfig, DriverError, FilterQuery, Mailbox, SessionStatus};
use chrv::lang::{parse_program, parse_query, Program, Query};
use chrv::tracer::{ActualTraceEvent, EventKind};
use common::filters::{event, filter, reference};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEQ: &str = include_str!("../programs/leq.chr");
const LEQ_QUERY: &str = "leq(A,B), leq(B,C), leq(C,A)";

fn leq() -> (Program, Query) {
    (parse_program(LEQ).unwrap(), parse_query(LEQ_QUERY).unwrap())
}

fn driver(step: bool) -> Driver {
    Driver::new(DriverConfig { step_by_step: step, budget: 1000 }).unwrap()
}

fn random_session(seed: u64) -> (Program, Query) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = common::random_program(&mut rng);
    let q = common::random_query(&mut rng);
    (parse_program(&p).unwrap(), parse_query(&q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn filter_agrees_with_reference(e in event(), q in filter()) {
        prop_assert_eq!(q.matches(&e), reference(&q, &e));
    }

    #[test]
    fn filter_text_round_trip(q in filter()) {
        let back: FilterQuery = q.to_string().parse().unwrap();
        prop_assert_eq!(back, q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// An analyzer receives exactly the events of the full trace its filter
    /// accepts, in chrono order.
    #[test]
    fn delivery_is_sound_and_complete(seed in 0..200u64, q in filter()) {
        let (p, query) = random_session(seed);
        let mut d = driver(false);
        let mailbox = Mailbox::new();
        d.register_analyzer("a", q.clone(), mailbox.clone()).unwrap();
        d.load(p, query).unwrap();
        d.control(Command::Continue).unwrap();
        let want: Vec<u64> = d.trace().unwrap().events.iter().filter(|e| reference(&q, e)).map(|e| e.chrono).collect();
        prop_assert_eq!(mailbox.chronos(), want);
    }
}

#[test]
fn one_event_per_step() {
    for seed in 0..50 {
        let (p, q) = random_session(seed);
        let mut d = driver(true);
        d.load(p, q).unwrap();
        let mut n = 0;
        while let Some(e) = d.new_step().unwrap() {
            n += 1;
            assert_eq!(e.chrono, n, "seed {seed}");
            assert_eq!(d.trace().unwrap().len() as u64, n, "seed {seed}");
            assert_eq!(d.trace().unwrap().events.last(), Some(&e));
        }
        assert!(d.status().is_terminal(), "seed {seed}");
        assert_eq!(d.new_step().unwrap(), None);
        assert_eq!(d.trace().unwrap().len() as u64, n);
    }
}

#[test]
fn step_requires_step_mode() {
    let (p, q) = leq();
    let mut d = driver(false);
    d.load(p, q).unwrap();
    assert_eq!(d.new_step(), Err(DriverError::NotStepMode));
}

/// Random interleavings of step, continue, pause directives and filter
/// updates keep every analyzer's deliveries strictly increasing, and the
/// session still produces the trace of an uninterrupted run.
#[test]
fn delivery_order_under_random_schedules() {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (p, q) = random_session(seed);
        let mut reference_run = driver(false);
        reference_run.load(p.clone(), q.clone()).unwrap();
        reference_run.control(Command::Continue).unwrap();
        let full = reference_run.trace().unwrap().clone();

        let mut d = driver(true);
        let logs: Vec<Arc<Mutex<Vec<u64>>>> = (0..3).map(|_| Arc::default()).collect();
        for (i, log) in logs.iter().enumerate() {
            let log = Arc::clone(log);
            let pause_every = rng.gen_range(2..6u64);
            d.register_analyzer(format!("a{i}"), FilterQuery::all(), move |e: &ActualTraceEvent| {
                log.lock().unwrap().push(e.chrono);
                Ok(if e.chrono.is_multiple_of(pause_every) { Directive::Pause } else { Directive::Proceed })
            })
            .unwrap();
        }
        d.load(p, q).unwrap();
        let mut guard = 0;
        while !d.status().is_terminal() && guard < 10_000 {
            guard += 1;
            match rng.gen_range(0..4) {
                0 | 1 => {
                    d.new_step().unwrap();
                }
                2 => {
                    d.control(Command::Continue).unwrap();
                }
                _ => {
                    let k = EventKind::ALL[rng.gen_range(0..EventKind::ALL.len())];
                    let q = if rng.gen_bool(0.5) { FilterQuery::kinds([k]) } else { FilterQuery::all() };
                    d.update_filter(&format!("a{}", rng.gen_range(0..3)), q).unwrap();
                }
            }
        }
        assert_eq!(d.trace().unwrap(), &full, "seed {seed}");
        for log in &logs {
            let log = log.lock().unwrap();
            assert!(log.windows(2).all(|w| w[0] < w[1]), "seed {seed}: {log:?}");
        }
    }
}

#[test]
fn end_directive_ends_the_session() {
    let (p, q) = leq();
    let mut d = driver(false);
    d.register_analyzer("stop", FilterQuery::kinds([EventKind::Apply]), |_: &ActualTraceEvent| Ok(Directive::End))
        .unwrap();
    d.load(p, q).unwrap();
    assert_eq!(d.control(Command::Continue).unwrap(), SessionStatus::Ended);
    assert_eq!(d.trace().unwrap().len(), 4);
    assert_eq!(d.control(Command::Continue), Err(DriverError::NoActiveSession));
}

#[test]
fn fetch_equals_filtered_trace() {
    let (p, q) = leq();
    let mut d = driver(false);
    d.load(p, q).unwrap();
    d.control(Command::Continue).unwrap();
    let chronos = |q: FilterQuery| d.fetch(None, &q).iter().map(|e| e.chrono).collect::<Vec<_>>();
    assert_eq!(chronos(FilterQuery::all()), (1..=8).collect::<Vec<_>>());
    assert_eq!(chronos(FilterQuery::kinds([EventKind::Apply])), [4, 7, 8]);
    assert_eq!(chronos(FilterQuery::contains("bic", "A=C")), [7, 8]);
    assert_eq!(chronos("rule~r2".parse().unwrap()), [7, 8]);
    assert_eq!(d.fetch(Some((2, 5)), &FilterQuery::kinds([EventKind::Introduce])).len(), 3);
}

#[test]
fn failing_run_reports_failed() {
    let mut d = driver(false);
    d.load(parse_program("").unwrap(), parse_query("X=a, X=b").unwrap()).unwrap();
    assert_eq!(d.control(Command::Continue).unwrap(), SessionStatus::Failed);
    assert_eq!(d.trace().unwrap().events.last().unwrap().kind, EventKind::Fail);
}

#[test]
fn budget_exhaustion() {
    let mut d = Driver::new(DriverConfig { step_by_step: false, budget: 7 }).unwrap();
    d.load(parse_program("r@ p(X) <=> p(X).").unwrap(), parse_query("p(a)").unwrap()).unwrap();
    assert_eq!(d.control(Command::Continue).unwrap(), SessionStatus::Exhausted);
    assert_eq!(d.trace().unwrap().len(), 7);
}
