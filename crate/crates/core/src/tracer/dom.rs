//! Minimal namespace-resolved element tree built with quick-xml.

use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

pub const XMLNS_NS: &str = "http://www.w3.org/2000/xmlns/";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attr {
    /// Namespace of a prefixed attribute; unprefixed attributes have none.
    pub ns: Option<String>,
    pub local: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub ns: Option<String>,
    pub local: String,
    pub attrs: Vec<Attr>,
    pub children: Vec<Element>,
    /// Concatenated character data directly inside this element.
    pub text: String,
    /// Prefix bindings in scope at this element.
    pub scope: HashMap<String, String>,
}

impl Element {
    pub fn attr(&self, local: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.ns.is_none() && a.local == local)
            .map(|a| a.value.as_str())
    }

    pub fn is(&self, ns: &str, local: &str) -> bool {
        self.ns.as_deref() == Some(ns) && self.local == local
    }

    /// Resolves a `prefix:local` name against this element's scope.
    pub fn resolve_qname(&self, qname: &str) -> (Option<String>, String) {
        match qname.split_once(':') {
            Some((prefix, local)) => (self.scope.get(prefix).cloned(), local.to_string()),
            None => (self.scope.get("").cloned(), qname.to_string()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed XML at byte {position}: {message}")]
pub struct XmlError {
    pub position: u64,
    pub message: String,
}

fn open(
    start: &BytesStart<'_>,
    parent_scope: &HashMap<String, String>,
    position: u64,
) -> Result<Element, XmlError> {
    let err = |message: String| XmlError { position, message };
    let mut scope = parent_scope.clone();
    let mut raw = Vec::new();
    for a in start.attributes() {
        let a = a.map_err(|e| err(e.to_string()))?;
        let key = String::from_utf8(a.key.as_ref().to_vec()).map_err(|e| err(e.to_string()))?;
        let value = a.unescape_value().map_err(|e| err(e.to_string()))?.into_owned();
        if key == "xmlns" {
            scope.insert(String::new(), value);
        } else if let Some(prefix) = key.strip_prefix("xmlns:") {
            scope.insert(prefix.to_string(), value);
        } else {
            raw.push((key, value));
        }
    }
    let name = String::from_utf8(start.name().as_ref().to_vec()).map_err(|e| err(e.to_string()))?;
    let (ns, local) = match name.split_once(':') {
        Some((prefix, local)) => {
            let ns = scope
                .get(prefix)
                .cloned()
                .ok_or_else(|| err(format!("unbound prefix `{prefix}`")))?;
            (Some(ns), local.to_string())
        }
        None => (scope.get("").cloned().filter(|s| !s.is_empty()), name),
    };
    let mut attrs = Vec::new();
    for (key, value) in raw {
        let attr = match key.split_once(':') {
            Some((prefix, local)) => Attr {
                ns: Some(
                    scope
                        .get(prefix)
                        .cloned()
                        .ok_or_else(|| err(format!("unbound prefix `{prefix}`")))?,
                ),
                local: local.to_string(),
                value,
            },
            None => Attr {
                ns: None,
                local: key,
                value,
            },
        };
        attrs.push(attr);
    }
    Ok(Element {
        ns,
        local,
        attrs,
        children: Vec::new(),
        text: String::new(),
        scope,
    })
}

/// Parses a document and returns its root element.
pub fn parse(doc: &str) -> Result<Element, XmlError> {
    let mut reader = Reader::from_str(doc);
    let mut stack: Vec<Element> = Vec::new();
    let mut root = None;
    let empty_scope = HashMap::new();
    loop {
        let position = reader.buffer_position();
        let err = |message: String| XmlError { position, message };
        let event = reader.read_event().map_err(|e| err(e.to_string()))?;
        match event {
            Event::Start(s) => {
                let scope = stack.last().map(|e| &e.scope).unwrap_or(&empty_scope);
                let el = open(&s, scope, position)?;
                stack.push(el);
            }
            Event::Empty(s) => {
                let scope = stack.last().map(|e| &e.scope).unwrap_or(&empty_scope);
                let el = open(&s, scope, position)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(err("multiple root elements".into())),
                }
            }
            Event::End(_) => {
                let el = stack.pop().ok_or_else(|| err("unbalanced end tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(err("multiple root elements".into())),
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| err(e.to_string()))?;
                match stack.last_mut() {
                    Some(el) => el.text.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => return Err(err("text outside the root element".into())),
                }
            }
            Event::CData(c) => {
                let text = String::from_utf8(c.into_inner().into_owned()).map_err(|e| err(e.to_string()))?;
                match stack.last_mut() {
                    Some(el) => el.text.push_str(&text),
                    None => return Err(err("CDATA outside the root element".into())),
                }
            }
            Event::Eof => break,
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
        }
    }
    if !stack.is_empty() {
        return Err(XmlError {
            position: reader.buffer_position(),
            message: format!("unclosed element `{}`", stack.last().unwrap().local),
        });
    }
    root.ok_or(XmlError {
        position: 0,
        message: "no root element".into(),
    })
}
