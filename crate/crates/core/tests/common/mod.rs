//! Random CHR programs that always terminate.
//!
//! User-defined symbols are stratified: `p0/1`, `p1/2`, `p2/1`, `p3/2` have
//! levels 0..3 and a rule body may only mention symbols of a higher level
//! than every head. Each firing therefore replaces or adds constraints of
//! strictly higher levels, and the propagation history stops propagation
//! rules from firing twice on the same constraints.
#![allow(dead_code)]

pub mod filters;
pub mod fluents;

use rand::seq::SliceRandom;
use rand::Rng;

const SYMBOLS: [(&str, usize); 4] = [("p0", 1), ("p1", 2), ("p2", 1), ("p3", 2)];
const CONSTANTS: [&str; 2] = ["a", "b"];

/// `var_weight` out of 10 terms are plain variables.
fn term(rng: &mut impl Rng, vars: &[&str], var_weight: u32) -> String {
    let roll = rng.gen_range(0..10);
    if roll < var_weight {
        vars.choose(rng).unwrap().to_string()
    } else if roll < 9 {
        CONSTANTS.choose(rng).unwrap().to_string()
    } else {
        format!("f({})", vars.choose(rng).unwrap())
    }
}

fn atom(rng: &mut impl Rng, level: usize, vars: &[&str], var_weight: u32) -> String {
    let (sym, arity) = SYMBOLS[level];
    let args: Vec<_> = (0..arity).map(|_| term(rng, vars, var_weight)).collect();
    format!("{sym}({})", args.join(","))
}

fn equation(rng: &mut impl Rng, vars: &[&str]) -> String {
    format!("{}={}", term(rng, vars, 6), term(rng, vars, 6))
}

fn rule(rng: &mut impl Rng, n: usize) -> String {
    let head_vars = ["X", "Y"];
    let body_vars = ["X", "Y", "Z", "W"];
    let max_level = if rng.gen_bool(0.8) { rng.gen_range(0..2) } else { 2 };
    let mut heads = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let level = rng.gen_range(0..=max_level);
        heads.push(atom(rng, level, &head_vars, 9));
    }
    let guard = match rng.gen_range(0..4) {
        0 => format!("{} | ", equation(rng, &head_vars)),
        _ => String::new(),
    };
    let mut body = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let higher = max_level + 1..SYMBOLS.len();
        if !higher.is_empty() && rng.gen_bool(0.6) {
            let level = rng.gen_range(higher);
            body.push(atom(rng, level, &body_vars, 7));
        } else {
            match rng.gen_range(0..10) {
                0 => body.push("false".into()),
                1 => body.push("true".into()),
                _ => body.push(equation(rng, &body_vars)),
            }
        }
    }
    let body = if body.is_empty() { "true".to_string() } else { body.join(", ") };
    let name = format!("r{n}");
    match (heads.len(), rng.gen_range(0..3)) {
        (2, 0) => format!("{name}@ {} \\ {} <=> {guard}{body}.", heads[0], heads[1]),
        (_, 1) => format!("{name}@ {} ==> {guard}{body}.", heads.join(", ")),
        _ => format!("{name}@ {} <=> {guard}{body}.", heads.join(", ")),
    }
}

/// At most three rules.
pub fn random_program(rng: &mut impl Rng) -> String {
    (1..=rng.gen_range(1..=3))
        .map(|n| rule(rng, n))
        .collect::<Vec<_>>()
        .join("\n")
}

/// At most four constraints.
pub fn random_query(rng: &mut impl Rng) -> String {
    let vars = ["A", "B", "C"];
    let cs: Vec<_> = (0..rng.gen_range(2..=4))
        .map(|_| {
            if rng.gen_bool(0.8) {
                let level = rng.gen_range(0..2);
                atom(rng, level, &vars, 6)
            } else {
                equation(rng, &vars)
            }
        })
        .collect();
    cs.join(", ")
}
