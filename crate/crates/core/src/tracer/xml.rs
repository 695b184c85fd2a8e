use std::fmt::Write as _;

use quick_xml::escape::minimal_escape;

use super::dom::{self, Element};
use super::schema::{Schema, SchemaError, XSI_NS};
use super::{check_chronos, ActualTraceEvent, Attributes, ChronoError, EventKind, Trace, TraceError};

pub const CHRV_NS: &str = "http://orcas.org.br/chrv";

const PROLOGUE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>"#;

fn root_open(empty: bool) -> String {
    format!(
        r#"<chrv xmlns="{CHRV_NS}" xmlns:xsi="{XSI_NS}" xsi:schemaLocation="{CHRV_NS} chrv.xsd"{}>"#,
        if empty { "/" } else { "" }
    )
}

/// Serializes a trace. The initial virtual state is not part of the format.
pub fn to_xml(t: &Trace) -> String {
    let mut out = String::new();
    out.push_str(PROLOGUE);
    out.push('\n');
    out.push_str(&root_open(t.events.is_empty()));
    out.push('\n');
    if t.events.is_empty() {
        return out;
    }
    for e in &t.events {
        let _ = writeln!(out, "\t<event chrono=\"{}\">", e.chrono);
        let _ = writeln!(out, "\t\t<{}>", e.kind);
        for (name, value) in e.attributes.ordered(e.kind) {
            let _ = writeln!(out, "\t\t\t<{name}>{}</{name}>", minimal_escape(&value));
        }
        let _ = writeln!(out, "\t\t</{}>", e.kind);
        out.push_str("\t</event>\n");
    }
    out.push_str("</chrv>\n");
    out
}

fn schema_error(e: SchemaError) -> TraceError {
    match e {
        SchemaError::Invalid { path, message } => TraceError::Schema { element: path, message },
        other => TraceError::Xml(other.to_string()),
    }
}

/// Checks a document against the shipped schema.
pub fn validate_xml(doc: &str) -> Result<(), TraceError> {
    Schema::chrv().validate(doc).map_err(schema_error)
}

fn event_chrono(el: &Element) -> Option<Result<u64, ChronoError>> {
    let raw = el.attr("chrono")?;
    Some(
        raw.trim()
            .parse::<u64>()
            .ok()
            .filter(|c| *c > 0)
            .ok_or_else(|| ChronoError::NotNatural(raw.to_string())),
    )
}

/// Whitespace-normalised form of a document: no prologue, no indentation,
/// element text trimmed, attributes in document order with prefixes as
/// written. Two documents that differ only in layout canonicalise equally.
pub fn canonicalize(doc: &str) -> Result<String, TraceError> {
    fn emit(el: &Element, out: &mut String) {
        out.push('<');
        out.push_str(&el.local);
        if let Some(ns) = &el.ns {
            let _ = write!(out, " {{{ns}}}");
        }
        for a in &el.attrs {
            let _ = write!(out, " {}=\"{}\"", a.local, minimal_escape(a.value.split_whitespace().collect::<Vec<_>>().join(" ").as_str()));
        }
        out.push('>');
        out.push_str(&minimal_escape(el.text.trim()));
        for c in &el.children {
            emit(c, out);
        }
        let _ = write!(out, "</{}>", el.local);
    }
    let root = dom::parse(doc).map_err(|e| TraceError::Xml(e.to_string()))?;
    let mut out = String::new();
    emit(&root, &mut out);
    Ok(out)
}

/// Parses and validates a trace document. Attribute text is trimmed.
pub fn from_xml(doc: &str) -> Result<Trace, TraceError> {
    let root = dom::parse(doc).map_err(|e| TraceError::Xml(e.to_string()))?;
    let mut chronos = Vec::new();
    for el in root.children.iter().filter(|c| c.is(CHRV_NS, "event")) {
        if let Some(c) = event_chrono(el) {
            chronos.push(c?);
        }
    }
    let mut sorted = chronos.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(ChronoError::Duplicate(w[0]).into());
    }
    Schema::chrv().validate(doc).map_err(schema_error)?;
    check_chronos(chronos)?;

    let mut events = Vec::new();
    for el in &root.children {
        let chrono = event_chrono(el).expect("schema requires chrono")?;
        let body = &el.children[0];
        let kind: EventKind = body.local.parse().map_err(TraceError::Xml)?;
        let mut a = Attributes::default();
        for child in &body.children {
            let text = child.text.trim().to_string();
            match child.local.as_str() {
                "rule" => a.rule = Some(text),
                "goal" => a.goal = Some(text),
                "udc" => a.udc = Some(text),
                "bic" => a.bic = Some(text),
                "hind" => {
                    a.hind = Some(text.parse().map_err(|_| TraceError::Schema {
                        element: format!("event[@chrono={chrono}]/{kind}/hind"),
                        message: format!("`{text}` is not a natural number"),
                    })?)
                }
                other => return Err(TraceError::Xml(format!("unexpected element `{other}`"))),
            }
        }
        let e = ActualTraceEvent {
            chrono,
            kind,
            attributes: a,
        };
        e.check_discipline()?;
        events.push(e);
    }
    Ok(Trace {
        initial_state: None,
        events,
    })
}
