//! Validation against the shipped trace schema.
//!
//! Implements the part of XML Schema 1.0 the trace schema uses: global and
//! local element declarations, anonymous complex types with `sequence` and
//! `choice` particles, occurrence bounds, attributes, the `xs:string` and
//! `xs:integer` simple types and single-step `xs:unique` constraints.
//! Anything else in a schema is rejected when the schema is loaded.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::dom::{self, Element};

pub const XS_NS: &str = "http://www.w3.org/2001/XMLSchema";
pub const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";

/// The trace schema shipped with the crate.
pub const CHRV_XSD: &str = include_str!("../../schema/chrv.xsd");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unsupported schema construct: {0}")]
    Unsupported(String),
    #[error("malformed schema: {0}")]
    Malformed(String),
    #[error("invalid document at {path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SimpleType {
    String,
    Integer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Occurs {
    min: usize,
    max: Option<usize>,
}

#[derive(Debug)]
struct AttrDecl {
    name: String,
    ty: SimpleType,
    required: bool,
}

#[derive(Debug)]
struct Unique {
    name: String,
    selector: (Option<String>, String),
    field: String,
}

#[derive(Debug)]
enum Content {
    Simple(SimpleType),
    Complex {
        particle: Option<Particle>,
        attrs: Vec<AttrDecl>,
    },
}

#[derive(Debug)]
struct ElementDecl {
    ns: Option<String>,
    name: String,
    occurs: Occurs,
    content: Content,
    uniques: Vec<Unique>,
}

#[derive(Debug)]
enum Particle {
    Element(Box<ElementDecl>),
    Sequence(Vec<Particle>, Occurs),
    Choice(Vec<Particle>, Occurs),
}

impl Particle {
    fn occurs(&self) -> Occurs {
        match self {
            Particle::Element(e) => e.occurs,
            Particle::Sequence(_, o) | Particle::Choice(_, o) => *o,
        }
    }
}

/// A loaded schema with one or more global element declarations.
#[derive(Debug)]
pub struct Schema {
    roots: Vec<ElementDecl>,
}

fn malformed(msg: impl Into<String>) -> SchemaError {
    SchemaError::Malformed(msg.into())
}

fn parse_occurs(el: &Element) -> Result<Occurs, SchemaError> {
    let min = match el.attr("minOccurs") {
        Some(v) => v.parse().map_err(|_| malformed(format!("bad minOccurs `{v}`")))?,
        None => 1,
    };
    let max = match el.attr("maxOccurs") {
        Some("unbounded") => None,
        Some(v) => Some(v.parse().map_err(|_| malformed(format!("bad maxOccurs `{v}`")))?),
        None => Some(1),
    };
    if max.is_some_and(|m| m < min) {
        return Err(malformed("maxOccurs below minOccurs"));
    }
    Ok(Occurs { min, max })
}

fn parse_type(el: &Element, qname: &str) -> Result<SimpleType, SchemaError> {
    match el.resolve_qname(qname) {
        (Some(ns), local) if ns == XS_NS && local == "string" => Ok(SimpleType::String),
        (Some(ns), local) if ns == XS_NS && local == "integer" => Ok(SimpleType::Integer),
        _ => Err(SchemaError::Unsupported(format!("type `{qname}`"))),
    }
}

struct Loader {
    target_ns: Option<String>,
    qualified: bool,
}

impl Loader {
    fn element(&self, el: &Element, global: bool) -> Result<ElementDecl, SchemaError> {
        let name = el
            .attr("name")
            .ok_or_else(|| malformed("element declaration without a name"))?
            .to_string();
        let occurs = if global {
            Occurs { min: 1, max: Some(1) }
        } else {
            parse_occurs(el)?
        };
        let ns = if global || self.qualified {
            self.target_ns.clone()
        } else {
            None
        };
        let mut content = match el.attr("type") {
            Some(t) => Some(Content::Simple(parse_type(el, t)?)),
            None => None,
        };
        let mut uniques = Vec::new();
        for child in &el.children {
            match (child.ns.as_deref(), child.local.as_str()) {
                (Some(XS_NS), "complexType") if content.is_none() => {
                    content = Some(self.complex_type(child)?);
                }
                (Some(XS_NS), "unique") => uniques.push(self.unique(child)?),
                (Some(XS_NS), "annotation") => {}
                (_, other) => {
                    return Err(SchemaError::Unsupported(format!("`{other}` inside element `{name}`")))
                }
            }
        }
        Ok(ElementDecl {
            ns,
            name,
            occurs,
            content: content.unwrap_or(Content::Simple(SimpleType::String)),
            uniques,
        })
    }

    fn complex_type(&self, el: &Element) -> Result<Content, SchemaError> {
        let mut particle = None;
        let mut attrs = Vec::new();
        for child in &el.children {
            match (child.ns.as_deref(), child.local.as_str()) {
                (Some(XS_NS), "sequence" | "choice") if particle.is_none() => {
                    particle = Some(self.group(child)?);
                }
                (Some(XS_NS), "attribute") => {
                    let name = child
                        .attr("name")
                        .ok_or_else(|| malformed("attribute without a name"))?;
                    let ty = match child.attr("type") {
                        Some(t) => parse_type(child, t)?,
                        None => SimpleType::String,
                    };
                    attrs.push(AttrDecl {
                        name: name.to_string(),
                        ty,
                        required: child.attr("use") == Some("required"),
                    });
                }
                (_, other) => return Err(SchemaError::Unsupported(format!("`{other}` in complexType"))),
            }
        }
        Ok(Content::Complex { particle, attrs })
    }

    fn group(&self, el: &Element) -> Result<Particle, SchemaError> {
        let occurs = parse_occurs(el)?;
        let mut items = Vec::new();
        for child in &el.children {
            match (child.ns.as_deref(), child.local.as_str()) {
                (Some(XS_NS), "element") => items.push(Particle::Element(Box::new(self.element(child, false)?))),
                (Some(XS_NS), "sequence" | "choice") => items.push(self.group(child)?),
                (_, other) => return Err(SchemaError::Unsupported(format!("`{other}` in model group"))),
            }
        }
        Ok(if el.local == "sequence" {
            Particle::Sequence(items, occurs)
        } else {
            Particle::Choice(items, occurs)
        })
    }

    fn unique(&self, el: &Element) -> Result<Unique, SchemaError> {
        let name = el.attr("name").unwrap_or_default().to_string();
        let mut selector = None;
        let mut field = None;
        for child in &el.children {
            match (child.ns.as_deref(), child.local.as_str()) {
                (Some(XS_NS), "selector") => {
                    let xpath = child.attr("xpath").ok_or_else(|| malformed("selector without xpath"))?;
                    if xpath.contains('/') || xpath.contains('*') {
                        return Err(SchemaError::Unsupported(format!("selector `{xpath}`")));
                    }
                    // unprefixed names in XPath denote no namespace
                    let resolved = match xpath.split_once(':') {
                        Some(_) => child.resolve_qname(xpath),
                        None => (None, xpath.to_string()),
                    };
                    selector = Some(resolved);
                }
                (Some(XS_NS), "field") => {
                    let xpath = child.attr("xpath").ok_or_else(|| malformed("field without xpath"))?;
                    let attr = xpath
                        .strip_prefix('@')
                        .ok_or_else(|| SchemaError::Unsupported(format!("field `{xpath}`")))?;
                    field = Some(attr.to_string());
                }
                (_, other) => return Err(SchemaError::Unsupported(format!("`{other}` in unique"))),
            }
        }
        Ok(Unique {
            name,
            selector: selector.ok_or_else(|| malformed("unique without selector"))?,
            field: field.ok_or_else(|| malformed("unique without field"))?,
        })
    }
}

impl Schema {
    pub fn parse(xsd: &str) -> Result<Schema, SchemaError> {
        let root = dom::parse(xsd).map_err(|e| malformed(e.to_string()))?;
        if !root.is(XS_NS, "schema") {
            return Err(malformed("root is not xs:schema"));
        }
        let loader = Loader {
            target_ns: root.attr("targetNamespace").map(str::to_string),
            qualified: root.attr("elementFormDefault") == Some("qualified"),
        };
        let mut roots = Vec::new();
        for child in &root.children {
            match (child.ns.as_deref(), child.local.as_str()) {
                (Some(XS_NS), "element") => roots.push(loader.element(child, true)?),
                (Some(XS_NS), "annotation") => {}
                (_, other) => return Err(SchemaError::Unsupported(format!("top-level `{other}`"))),
            }
        }
        Ok(Schema { roots })
    }

    /// The shipped trace schema.
    pub fn chrv() -> Schema {
        Schema::parse(CHRV_XSD).expect("shipped schema loads")
    }

    pub fn validate(&self, doc: &str) -> Result<(), SchemaError> {
        let root = dom::parse(doc).map_err(|e| SchemaError::Invalid {
            path: "/".into(),
            message: e.to_string(),
        })?;
        let decl = self
            .roots
            .iter()
            .find(|d| d.ns == root.ns && d.name == root.local)
            .ok_or_else(|| SchemaError::Invalid {
                path: "/".into(),
                message: format!("no global declaration for root `{}`", root.local),
            })?;
        validate_element(decl, &root, &format!("/{}", root.local))
    }
}

fn invalid(path: &str, message: impl Into<String>) -> SchemaError {
    SchemaError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

fn check_simple(ty: SimpleType, value: &str, path: &str) -> Result<(), SchemaError> {
    match ty {
        SimpleType::String => Ok(()),
        SimpleType::Integer => {
            let v = value.trim();
            let digits = v.strip_prefix(['+', '-']).unwrap_or(v);
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                Ok(())
            } else {
                Err(invalid(path, format!("`{value}` is not an xs:integer")))
            }
        }
    }
}

type Assignment<'d> = Vec<(usize, &'d ElementDecl)>;

/// All ways `p` can consume children starting at `pos`: end position plus
/// which declaration matched each consumed child.
fn match_particle<'d>(p: &'d Particle, children: &[Element], pos: usize) -> Vec<(usize, Assignment<'d>)> {
    let Occurs { min, max } = p.occurs();
    let mut results = Vec::new();
    let mut frontier = vec![(pos, Vec::new())];
    let mut count = 0;
    loop {
        if count >= min {
            results.extend(frontier.iter().cloned());
        }
        if max.is_some_and(|m| count >= m) || frontier.is_empty() {
            break;
        }
        let mut next: Vec<(usize, Assignment<'d>)> = Vec::new();
        for (at, assigned) in &frontier {
            for (end, more) in match_once(p, children, *at) {
                // progress is required to repeat
                if end == *at && count >= min {
                    continue;
                }
                if next.iter().any(|(e, _)| *e == end) {
                    continue;
                }
                let mut a = assigned.clone();
                a.extend(more);
                next.push((end, a));
            }
        }
        frontier = next;
        count += 1;
    }
    let mut seen = HashSet::new();
    results.retain(|(end, _)| seen.insert(*end));
    results
}

fn match_once<'d>(p: &'d Particle, children: &[Element], pos: usize) -> Vec<(usize, Assignment<'d>)> {
    match p {
        Particle::Element(decl) => match children.get(pos) {
            Some(c) if c.ns == decl.ns && c.local == decl.name => vec![(pos + 1, vec![(pos, &**decl)])],
            _ => Vec::new(),
        },
        Particle::Choice(items, _) => items.iter().flat_map(|i| match_particle(i, children, pos)).collect(),
        Particle::Sequence(items, _) => {
            let mut states = vec![(pos, Vec::new())];
            for item in items {
                let mut next = Vec::new();
                for (at, assigned) in &states {
                    for (end, more) in match_particle(item, children, *at) {
                        let mut a: Assignment<'d> = assigned.clone();
                        a.extend(more);
                        next.push((end, a));
                    }
                }
                states = next;
            }
            states
        }
    }
}

fn validate_element(decl: &ElementDecl, el: &Element, path: &str) -> Result<(), SchemaError> {
    match &decl.content {
        Content::Simple(ty) => {
            if let Some(c) = el.children.first() {
                return Err(invalid(path, format!("unexpected child element `{}`", c.local)));
            }
            check_simple(*ty, &el.text, path)?;
            check_no_plain_attrs(el, &[], path)?;
        }
        Content::Complex { particle, attrs } => {
            if !el.text.trim().is_empty() {
                return Err(invalid(path, "character data is not allowed here"));
            }
            check_no_plain_attrs(el, attrs, path)?;
            for a in attrs {
                match el.attr(&a.name) {
                    Some(v) => check_simple(a.ty, v, &format!("{path}/@{}", a.name))?,
                    None if a.required => {
                        return Err(invalid(path, format!("missing required attribute `{}`", a.name)))
                    }
                    None => {}
                }
            }
            let assignment = match particle {
                None if el.children.is_empty() => Vec::new(),
                None => return Err(invalid(path, "element must be empty")),
                Some(p) => match_particle(p, &el.children, 0)
                    .into_iter()
                    .find(|(end, _)| *end == el.children.len())
                    .map(|(_, a)| a)
                    .ok_or_else(|| {
                        let names: Vec<_> = el.children.iter().map(|c| c.local.as_str()).collect();
                        invalid(path, format!("children [{}] do not match the content model", names.join(", ")))
                    })?,
            };
            let mut positions: HashMap<&str, usize> = HashMap::new();
            for (idx, child_decl) in assignment {
                let child = &el.children[idx];
                let n = positions.entry(child.local.as_str()).or_insert(0);
                *n += 1;
                validate_element(child_decl, child, &format!("{path}/{}[{n}]", child.local))?;
            }
        }
    }
    for u in &decl.uniques {
        let mut seen = HashSet::new();
        for target in el.children.iter().filter(|c| c.ns == u.selector.0 && c.local == u.selector.1) {
            if let Some(v) = target.attr(&u.field) {
                if !seen.insert(v.trim().to_string()) {
                    return Err(invalid(
                        path,
                        format!("duplicate value `{v}` for @{} violates `{}`", u.field, u.name),
                    ));
                }
            }
        }
    }
    Ok(())
}

fn check_no_plain_attrs(el: &Element, declared: &[AttrDecl], path: &str) -> Result<(), SchemaError> {
    for a in &el.attrs {
        match a.ns.as_deref() {
            None if declared.iter().any(|d| d.name == a.local) => {}
            Some(XSI_NS) => {}
            _ => return Err(invalid(path, format!("undeclared attribute `{}`", a.local))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(events: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<chrv xmlns="http://orcas.org.br/chrv" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"
      xsi:schemaLocation="http://orcas.org.br/chrv chrv.xsd">{events}</chrv>"#
        )
    }

    #[test]
    fn shipped_schema_loads() {
        let s = Schema::chrv();
        assert_eq!(s.roots.len(), 1);
        assert_eq!(s.roots[0].uniques.len(), 1);
    }

    #[test]
    fn accepts_valid_events() {
        let s = Schema::chrv();
        s.validate(&doc("")).unwrap();
        s.validate(&doc(
            r#"<event chrono="1"><initialState><goal> p </goal><hind> 1 </hind></initialState></event>
               <event chrono="2"><apply><rule>r@ p ==> true</rule><goal></goal></apply></event>
               <event chrono="3"><fail><goal/></fail></event>"#,
        ))
        .unwrap();
    }

    #[test]
    fn rejects_violations() {
        let s = Schema::chrv();
        let cases = [
            // missing chrono
            r#"<event><solve><bic>a=a</bic><goal/></solve></event>"#,
            // wrong order
            r#"<event chrono="1"><introduce><goal/><udc/><hind>1</hind></introduce></event>"#,
            // bad integer
            r#"<event chrono="1"><initialState><goal/><hind>one</hind></initialState></event>"#,
            // two kinds in one event
            r#"<event chrono="1"><solve><bic/><goal/></solve><solve><bic/><goal/></solve></event>"#,
            // unknown element
            r#"<event chrono="1"><jump/></event>"#,
            // duplicate chrono
            r#"<event chrono="1"><solve><bic/><goal/></solve></event><event chrono="1"><solve><bic/><goal/></solve></event>"#,
            // fail with both
            r#"<event chrono="1"><fail><rule/><goal/></fail></event>"#,
            // stray text
            r#"<event chrono="1">x<solve><bic/><goal/></solve></event>"#,
        ];
        for c in cases {
            assert!(s.validate(&doc(c)).is_err(), "accepted {c}");
        }
        // wrong namespace
        assert!(s.validate("<chrv/>").is_err());
    }

    #[test]
    fn unsupported_constructs_are_reported() {
        let xsd = r#"<xs:schema xmlns:xs="http://www.w3.org/2001/XMLSchema"><xs:simpleType name="t"/></xs:schema>"#;
        assert!(matches!(Schema::parse(xsd), Err(SchemaError::Unsupported(_))));
    }
}
