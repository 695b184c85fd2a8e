use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tracer::{ActualTraceEvent, Attributes, EventKind};

/// A conjunctive predicate over trace events. Absent parts match anything.
///
/// Text form, clauses separated by `;`:
///
/// ```text
/// kinds=apply,introduce; chrono=1..4; rule~r2; bic~A=C
/// ```
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<BTreeSet<EventKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chrono_range: Option<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attr_contains: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid filter: {0}")]
pub struct FilterError(pub String);

impl FilterQuery {
    pub fn all() -> Self {
        FilterQuery::default()
    }

    /// Matches nothing: an empty kind set.
    pub fn none() -> Self {
        FilterQuery {
            kinds: Some(BTreeSet::new()),
            ..FilterQuery::default()
        }
    }

    pub fn kinds(kinds: impl IntoIterator<Item = EventKind>) -> Self {
        FilterQuery {
            kinds: Some(kinds.into_iter().collect()),
            ..FilterQuery::default()
        }
    }

    pub fn range(lo: u64, hi: u64) -> Self {
        FilterQuery {
            chrono_range: Some((lo, hi)),
            ..FilterQuery::default()
        }
    }

    pub fn contains(attr: &str, needle: &str) -> Self {
        FilterQuery {
            attr_contains: vec![(attr.to_string(), needle.to_string())],
            ..FilterQuery::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == FilterQuery::default()
    }

    pub fn check(&self) -> Result<(), FilterError> {
        if let Some((lo, hi)) = self.chrono_range {
            if lo > hi {
                return Err(FilterError(format!("chrono range {lo}..{hi} is empty")));
            }
        }
        for (name, _) in &self.attr_contains {
            if !Attributes::NAMES.contains(&name.as_str()) {
                return Err(FilterError(format!("unknown attribute `{name}`")));
            }
        }
        Ok(())
    }

    pub fn matches(&self, e: &ActualTraceEvent) -> bool {
        if let Some(kinds) = &self.kinds {
            if !kinds.contains(&e.kind) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.chrono_range {
            if e.chrono < lo || e.chrono > hi {
                return false;
            }
        }
        self.attr_contains
            .iter()
            .all(|(name, needle)| e.attributes.get(name).is_some_and(|v| v.contains(needle.as_str())))
    }
}

impl FromStr for FilterQuery {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut q = FilterQuery::default();
        for clause in s.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            if let Some(list) = clause.strip_prefix("kinds=") {
                let kinds = q.kinds.get_or_insert_with(BTreeSet::new);
                for k in list.split(',').map(str::trim).filter(|k| !k.is_empty()) {
                    kinds.insert(k.parse().map_err(FilterError)?);
                }
            } else if let Some(range) = clause.strip_prefix("chrono=") {
                let (lo, hi) = range.split_once("..").unwrap_or((range, range));
                let num = |t: &str| {
                    t.trim()
                        .parse::<u64>()
                        .map_err(|_| FilterError(format!("bad chrono `{t}`")))
                };
                q.chrono_range = Some((num(lo)?, num(hi)?));
            } else if let Some((name, needle)) = clause.split_once('~') {
                q.attr_contains.push((name.trim().to_string(), needle.trim().to_string()));
            } else {
                return Err(FilterError(format!("cannot read clause `{clause}`")));
            }
        }
        q.check()?;
        Ok(q)
    }
}

impl fmt::Display for FilterQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut clauses = Vec::new();
        if let Some(kinds) = &self.kinds {
            let names: Vec<_> = kinds.iter().map(|k| k.as_str()).collect();
            clauses.push(format!("kinds={}", names.join(",")));
        }
        if let Some((lo, hi)) = self.chrono_range {
            clauses.push(format!("chrono={lo}..{hi}"));
        }
        for (name, needle) in &self.attr_contains {
            clauses.push(format!("{name}~{needle}"));
        }
        f.write_str(&clauses.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(chrono: u64, kind: EventKind, rule: Option<&str>) -> ActualTraceEvent {
        ActualTraceEvent {
            chrono,
            kind,
            attributes: Attributes {
                rule: rule.map(str::to_string),
                ..Attributes::default()
            },
        }
    }

    #[test]
    fn text_form() {
        let q: FilterQuery = "kinds=apply, introduce; chrono=1..4; rule~r2".parse().unwrap();
        assert_eq!(q.kinds.as_ref().unwrap().len(), 2);
        assert_eq!(q.chrono_range, Some((1, 4)));
        assert_eq!(q.attr_contains, vec![("rule".into(), "r2".into())]);
        assert_eq!(q.to_string().parse::<FilterQuery>().unwrap(), q);
        assert_eq!("".parse::<FilterQuery>().unwrap(), FilterQuery::all());
        assert_eq!("chrono=3".parse::<FilterQuery>().unwrap().chrono_range, Some((3, 3)));
        assert!("chrono=4..1".parse::<FilterQuery>().is_err());
        assert!("colour~red".parse::<FilterQuery>().is_err());
        assert!("kinds=jump".parse::<FilterQuery>().is_err());
        assert!("nonsense".parse::<FilterQuery>().is_err());
    }

    #[test]
    fn matching() {
        let apply = ev(5, EventKind::Apply, Some("r2@ x"));
        assert!(FilterQuery::all().matches(&apply));
        assert!(!FilterQuery::none().matches(&apply));
        assert!(FilterQuery::kinds([EventKind::Apply]).matches(&apply));
        assert!(!FilterQuery::range(1, 4).matches(&apply));
        assert!(FilterQuery::contains("rule", "r2").matches(&apply));
        assert!(!FilterQuery::contains("goal", "").matches(&apply));
    }

    #[test]
    fn json_shape() {
        let q: FilterQuery = "kinds=apply; chrono=2..3; bic~A".parse().unwrap();
        let j = serde_json::to_value(&q).unwrap();
        assert_eq!(
            j,
            serde_json::json!({"kinds": ["apply"], "chrono_range": [2, 3], "attr_contains": [["bic", "A"]]})
        );
        assert_eq!(serde_json::from_value::<FilterQuery>(serde_json::json!({})).unwrap(), FilterQuery::all());
    }
}
