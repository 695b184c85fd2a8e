//! Text formats for action scripts and observed event lists.
//!
//! A script has one action per line, `Name arg...`. An event list has one
//! event per line, `[chrono] kind value...`; a leading chrono is checked
//! against the line's position. Blank lines and `#` comments are skipped.

use super::Value;

fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

fn values(line: usize, words: &[&str]) -> Result<Vec<Value>, String> {
    words
        .iter()
        .map(|w| w.parse::<Value>().map_err(|e| format!("line {line}: {e}")))
        .collect()
}

pub fn parse_script(text: &str) -> Result<Vec<(String, Vec<Value>)>, String> {
    lines(text)
        .map(|(n, words)| Ok((words[0].to_string(), values(n, &words[1..])?)))
        .collect()
}

pub fn parse_events(text: &str) -> Result<Vec<(String, Vec<Value>)>, String> {
    let mut out = Vec::new();
    for (n, words) in lines(text) {
        let mut words = words.as_slice();
        if let Ok(chrono) = words[0].parse::<usize>() {
            if chrono != out.len() + 1 {
                return Err(format!("line {n}: expected chrono {}, found {chrono}", out.len() + 1));
            }
            words = &words[1..];
        }
        let (kind, rest) = words
            .split_first()
            .ok_or_else(|| format!("line {n}: missing event kind"))?;
        out.push((kind.to_string(), values(n, rest)?));
    }
    Ok(out)
}
