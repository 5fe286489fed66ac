//! The PNML dialect: parsing and serialization.
//!
//! The dialect is documented in `docs/pnml.md`. In short: `<variable>`
//! children of `<net>` declare typed process variables, transitions
//! carry their guard as a `<guard>` text child, and the (single) final
//! marking lives under `<finalmarkings>`. Guards use the textual
//! syntax of [`crate::guard`].

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::constraint::{Assignment, Constraint, Sort, Value, Var};
use crate::dpn::{validate, Diagnostic, Dpn, Marking, Transition};
use crate::guard::{parse_guard, GuardParseError};

#[derive(Debug, Error)]
pub enum PnmlError {
    #[error("XML error: {0}")]
    Xml(String),
    #[error("no <net> element found")]
    MissingNet,
    #[error("<{element}> lacks required attribute '{attr}'")]
    MissingAttr { element: String, attr: String },
    #[error("bad number '{text}' in {context}")]
    BadNumber { context: String, text: String },
    #[error("variable '{var}' has unknown sort '{text}' (expected bool, int, or rat)")]
    BadSort { var: String, text: String },
    #[error("bad initial value for variable '{var}': {why}")]
    BadInitial { var: String, why: String },
    #[error("{context} references unknown id '{id}'")]
    UnknownReference { context: String, id: String },
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("guard of transition '{transition}': {source}")]
    Guard {
        transition: String,
        source: GuardParseError,
    },
    #[error("guard of transition '{transition}' uses undeclared variable '{var}'")]
    UndeclaredVariable { transition: String, var: String },
    #[error("no final marking declared (add <finalmarkings>)")]
    MissingFinalMarking,
    #[error("more than one final marking declared; exactly one is supported")]
    MultipleFinalMarkings,
    #[error("invalid net: {0}")]
    Invalid(String),
}

/// Parses a DPN from PNML text and validates it.
pub fn parse_pnml(text: &str) -> Result<Dpn, PnmlError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| PnmlError::Xml(e.to_string()))?;
    let net = doc
        .descendants()
        .find(|n| n.has_tag_name("net"))
        .ok_or(PnmlError::MissingNet)?;
    let name = net.attribute("id").unwrap_or("net").to_string();

    let mut vars: Vec<Var> = Vec::new();
    let mut initial_assignment = Assignment::new();
    let mut places: Vec<String> = Vec::new();
    let mut initial_marking = Marking::new();
    let mut transitions: Vec<Transition> = Vec::new();
    let mut guards_text: Vec<Option<String>> = Vec::new();
    let mut final_markings: Vec<Marking> = Vec::new();
    let mut arcs: Vec<(String, String, u32)> = Vec::new();

    for child in net.children().filter(|c| c.is_element()) {
        match child.tag_name().name() {
            "variable" => {
                let vname = require_attr(&child, "name")?;
                let sort_text = require_attr(&child, "sort")?;
                let sort = match sort_text.as_str() {
                    "bool" => Sort::Bool,
                    "int" => Sort::Int,
                    "rat" => Sort::Rat,
                    _ => {
                        return Err(PnmlError::BadSort {
                            var: vname,
                            text: sort_text,
                        })
                    }
                };
                if vars.iter().any(|v| v.name == vname) {
                    return Err(PnmlError::DuplicateId(vname));
                }
                let initial = match child.attribute("initial") {
                    Some(text) => parse_value(sort, text).map_err(|why| PnmlError::BadInitial {
                        var: vname.clone(),
                        why,
                    })?,
                    None => Value::zero_of(sort),
                };
                let var = Var::plain(vname, sort);
                initial_assignment.set(var.clone(), initial).map_err(|e| {
                    PnmlError::BadInitial {
                        var: var.name.clone(),
                        why: e.to_string(),
                    }
                })?;
                vars.push(var);
            }
            "place" => {
                let id = require_attr(&child, "id")?;
                if places.contains(&id) {
                    return Err(PnmlError::DuplicateId(id));
                }
                if let Some(n) = text_of(&child, "initialMarking") {
                    let tokens = n.trim().parse::<u32>().map_err(|_| PnmlError::BadNumber {
                        context: format!("initial marking of place '{id}'"),
                        text: n.clone(),
                    })?;
                    initial_marking.set(&id, tokens);
                }
                places.push(id);
            }
            "transition" => {
                let id = require_attr(&child, "id")?;
                if transitions.iter().any(|t| t.id == id) {
                    return Err(PnmlError::DuplicateId(id));
                }
                let label = text_of(&child, "name").unwrap_or_else(|| id.clone());
                let guard_text = child
                    .children()
                    .find(|c| c.has_tag_name("guard"))
                    .and_then(|g| g.text())
                    .map(|s| s.trim().to_string());
                guards_text.push(guard_text);
                transitions.push(Transition {
                    id,
                    label,
                    guard: Constraint::tt(),
                    pre: BTreeMap::new(),
                    post: BTreeMap::new(),
                });
            }
            "arc" => {
                let source = require_attr(&child, "source")?;
                let target = require_attr(&child, "target")?;
                let mult = match text_of(&child, "inscription") {
                    Some(n) => n.trim().parse::<u32>().map_err(|_| PnmlError::BadNumber {
                        context: format!("inscription of arc {source}->{target}"),
                        text: n.clone(),
                    })?,
                    None => 1,
                };
                arcs.push((source, target, mult));
            }
            "finalmarkings" => {
                for marking_el in child.children().filter(|c| c.has_tag_name("marking")) {
                    let mut m = Marking::new();
                    for entry in marking_el.children().filter(|c| c.has_tag_name("place")) {
                        let idref = entry
                            .attribute("idref")
                            .ok_or_else(|| PnmlError::MissingAttr {
                                element: "place".into(),
                                attr: "idref".into(),
                            })?
                            .to_string();
                        let tokens = match entry.attribute("tokens") {
                            Some(text) => {
                                text.parse::<u32>().map_err(|_| PnmlError::BadNumber {
                                    context: format!("final marking entry for '{idref}'"),
                                    text: text.into(),
                                })?
                            }
                            None => 1,
                        };
                        m.set(&idref, tokens);
                    }
                    final_markings.push(m);
                }
            }
            _ => {}
        }
    }

    // Resolve arcs into transition pre/post multisets.
    for (source, target, mult) in arcs {
        let source_is_place = places.contains(&source);
        let target_is_place = places.contains(&target);
        if source_is_place {
            let t = transitions
                .iter_mut()
                .find(|t| t.id == target)
                .ok_or_else(|| PnmlError::UnknownReference {
                    context: format!("arc from '{source}'"),
                    id: target.clone(),
                })?;
            *t.pre.entry(source).or_insert(0) += mult;
        } else if target_is_place {
            let t = transitions
                .iter_mut()
                .find(|t| t.id == source)
                .ok_or_else(|| PnmlError::UnknownReference {
                    context: format!("arc to '{target}'"),
                    id: source.clone(),
                })?;
            *t.post.entry(target).or_insert(0) += mult;
        } else {
            let context = format!("arc '{source}' -> '{target}'");
            let id = if transitions.iter().any(|t| t.id == source) {
                target
            } else {
                source
            };
            return Err(PnmlError::UnknownReference { context, id });
        }
    }

    // Parse guards now that variable declarations are complete.
    let decls: BTreeMap<String, Sort> = vars.iter().map(|v| (v.name.clone(), v.sort)).collect();
    for (t, guard_text) in transitions.iter_mut().zip(guards_text) {
        if let Some(text) = guard_text {
            t.guard = parse_guard(&text, &decls).map_err(|e| {
                if let Some(var) = e.msg.strip_prefix("undeclared variable '") {
                    PnmlError::UndeclaredVariable {
                        transition: t.id.clone(),
                        var: var.trim_end_matches('\'').to_string(),
                    }
                } else {
                    PnmlError::Guard {
                        transition: t.id.clone(),
                        source: e,
                    }
                }
            })?;
        }
    }

    let final_marking = match final_markings.len() {
        0 => return Err(PnmlError::MissingFinalMarking),
        1 => final_markings.pop().unwrap(),
        _ => return Err(PnmlError::MultipleFinalMarkings),
    };

    let dpn = Dpn {
        name,
        places,
        transitions,
        vars,
        initial_marking,
        final_marking,
        initial_assignment,
    };
    let diagnostics: Vec<Diagnostic> = validate(&dpn);
    if !diagnostics.is_empty() {
        let text: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(PnmlError::Invalid(text.join("; ")));
    }
    Ok(dpn)
}

fn require_attr(node: &roxmltree::Node, attr: &str) -> Result<String, PnmlError> {
    node.attribute(attr)
        .map(str::to_string)
        .ok_or_else(|| PnmlError::MissingAttr {
            element: node.tag_name().name().to_string(),
            attr: attr.to_string(),
        })
}

/// Text of `<child><text>...</text></child>`, or the child's own text.
fn text_of(node: &roxmltree::Node, child: &str) -> Option<String> {
    let c = node.children().find(|c| c.has_tag_name(child))?;
    let text = c
        .children()
        .find(|g| g.has_tag_name("text"))
        .and_then(|g| g.text())
        .or_else(|| c.text())?;
    let trimmed = text.trim();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_string())
    }
}

fn parse_value(sort: Sort, text: &str) -> Result<Value, String> {
    let text = text.trim();
    match sort {
        Sort::Bool => match text {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true/false, got '{text}'")),
        },
        Sort::Int => text
            .parse::<BigInt>()
            .map(Value::Int)
            .map_err(|_| format!("expected an integer, got '{text}'")),
        Sort::Rat => parse_rational(text).map(Value::Rat),
    }
}

fn parse_rational(text: &str) -> Result<BigRational, String> {
    if let Some((p, q)) = text.split_once('/') {
        let p: BigInt = p
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator '{p}'"))?;
        let q: BigInt = q
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator '{q}'"))?;
        if q == BigInt::from(0) {
            return Err("zero denominator".into());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let sign = if whole.trim_start().starts_with('-') {
            -1
        } else {
            1
        };
        let whole_val: BigInt = whole
            .trim()
            .parse()
            .map_err(|_| format!("bad number '{text}'"))?;
        let frac_digits = frac.trim();
        let frac_val: BigInt = frac_digits
            .parse()
            .map_err(|_| format!("bad number '{text}'"))?;
        let scale = BigInt::from(10u32).pow(frac_digits.len() as u32);
        let frac_part = BigRational::new(frac_val * sign, scale);
        return Ok(BigRational::from_integer(whole_val) + frac_part);
    }
    text.parse::<BigInt>()
        .map(BigRational::from_integer)
        .map_err(|_| format!("bad number '{text}'"))
}

// ── Serialization ───────────────────────────────────────────────────

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a DPN back into the dialect. `parse_pnml(serialize_pnml(n))`
/// is structurally equal to `n`.
pub fn serialize_pnml(dpn: &Dpn) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<pnml>\n");
    out.push_str(&format!("  <net id=\"{}\">\n", escape(&dpn.name)));
    for v in &dpn.vars {
        let initial = dpn
            .initial_assignment
            .get(v)
            .map(|x| x.to_string())
            .unwrap_or_else(|| Value::zero_of(v.sort).to_string());
        out.push_str(&format!(
            "    <variable name=\"{}\" sort=\"{}\" initial=\"{}\"/>\n",
            escape(&v.name),
            v.sort,
            escape(&initial)
        ));
    }
    for p in &dpn.places {
        let tokens = dpn.initial_marking.tokens(p);
        if tokens > 0 {
            out.push_str(&format!(
                "    <place id=\"{}\"><initialMarking><text>{tokens}</text></initialMarking></place>\n",
                escape(p)
            ));
        } else {
            out.push_str(&format!("    <place id=\"{}\"/>\n", escape(p)));
        }
    }
    for t in &dpn.transitions {
        out.push_str(&format!("    <transition id=\"{}\">", escape(&t.id)));
        if t.label != t.id {
            out.push_str(&format!("<name><text>{}</text></name>", escape(&t.label)));
        }
        if t.guard != Constraint::tt() {
            out.push_str(&format!("<guard>{}</guard>", escape(&t.guard.to_string())));
        }
        out.push_str("</transition>\n");
    }
    for t in &dpn.transitions {
        for (p, n) in &t.pre {
            out.push_str(&arc(p, &t.id, *n));
        }
        for (p, n) in &t.post {
            out.push_str(&arc(&t.id, p, *n));
        }
    }
    out.push_str("    <finalmarkings>\n      <marking>\n");
    for (p, n) in dpn.final_marking.iter() {
        out.push_str(&format!(
            "        <place idref=\"{}\" tokens=\"{n}\"/>\n",
            escape(p)
        ));
    }
    out.push_str("      </marking>\n    </finalmarkings>\n");
    out.push_str("  </net>\n</pnml>\n");
    out
}

fn arc(source: &str, target: &str, mult: u32) -> String {
    if mult == 1 {
        format!(
            "    <arc source=\"{}\" target=\"{}\"/>\n",
            escape(source),
            escape(target)
        )
    } else {
        format!(
            "    <arc source=\"{}\" target=\"{}\"><inscription><text>{mult}</text></inscription></arc>\n",
            escape(source),
            escape(target)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn parses_auction_structure() {
        let dpn = samples::auction();
        assert_eq!(dpn.places, ["p0", "p1", "p2", "p3"]);
        let ids: Vec<&str> = dpn.transitions.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["init", "bid", "timer", "hammer"]);
        assert_eq!(dpn.initial_marking, Marking::of(&[("p0", 1)]));
        assert_eq!(dpn.final_marking, Marking::of(&[("p3", 1)]));
        for v in &dpn.vars {
            assert_eq!(dpn.initial_assignment.get(v), Some(&Value::zero_of(v.sort)));
        }
    }

    #[test]
    fn missing_guard_means_true_and_defaults_apply() {
        let text = r#"<pnml><net id="n">
            <variable name="x" sort="int"/>
            <place id="a"><initialMarking><text>1</text></initialMarking></place>
            <place id="b"/>
            <transition id="go"/>
            <arc source="a" target="go"/>
            <arc source="go" target="b"/>
            <finalmarkings><marking><place idref="b"/></marking></finalmarkings>
        </net></pnml>"#;
        let dpn = parse_pnml(text).unwrap();
        assert_eq!(dpn.transitions[0].guard, Constraint::tt());
        assert_eq!(dpn.transitions[0].pre["a"], 1);
        assert_eq!(dpn.final_marking.tokens("b"), 1);
        assert_eq!(
            dpn.initial_assignment.get(&dpn.vars[0]),
            Some(&Value::int(0))
        );
    }

    #[test]
    fn arc_to_unknown_id_is_reported() {
        let text = r#"<pnml><net id="n">
            <place id="a"><initialMarking><text>1</text></initialMarking></place>
            <transition id="go"/>
            <arc source="a" target="go"/>
            <arc source="go" target="nowhere"/>
            <finalmarkings><marking><place idref="a"/></marking></finalmarkings>
        </net></pnml>"#;
        match parse_pnml(text) {
            Err(PnmlError::UnknownReference { id, .. }) => assert_eq!(id, "nowhere"),
            other => panic!("expected UnknownReference, got {other:?}"),
        }
    }

    #[test]
    fn undeclared_guard_variable_is_reported() {
        let text = r#"<pnml><net id="n">
            <place id="a"><initialMarking><text>1</text></initialMarking></place>
            <place id="b"/>
            <transition id="go"><guard>z &gt; 0</guard></transition>
            <arc source="a" target="go"/>
            <arc source="go" target="b"/>
            <finalmarkings><marking><place idref="b"/></marking></finalmarkings>
        </net></pnml>"#;
        match parse_pnml(text) {
            Err(PnmlError::UndeclaredVariable { var, transition }) => {
                assert_eq!(var, "z");
                assert_eq!(transition, "go");
            }
            other => panic!("expected UndeclaredVariable, got {other:?}"),
        }
    }

    #[test]
    fn final_marking_is_mandatory_and_unique() {
        let base = r#"<pnml><net id="n">
            <place id="a"><initialMarking><text>1</text></initialMarking></place>
            <transition id="go"/>
            <arc source="a" target="go"/>
            <arc source="go" target="a"/>
            {FM}
        </net></pnml>"#;
        let none = base.replace("{FM}", "");
        assert!(matches!(
            parse_pnml(&none),
            Err(PnmlError::MissingFinalMarking)
        ));
        let two = base.replace(
            "{FM}",
            "<finalmarkings><marking><place idref=\"a\"/></marking><marking><place idref=\"a\"/></marking></finalmarkings>",
        );
        assert!(matches!(
            parse_pnml(&two),
            Err(PnmlError::MultipleFinalMarkings)
        ));
    }

    #[test]
    fn round_trip_all_samples() {
        for dpn in samples::all() {
            let text = serialize_pnml(&dpn);
            let again = parse_pnml(&text)
                .unwrap_or_else(|e| panic!("reparse of {} failed: {e}\n{text}", dpn.name));
            assert_eq!(dpn, again, "round trip changed {}", dpn.name);
        }
    }

    #[test]
    fn rational_initial_values() {
        assert_eq!(
            parse_value(Sort::Rat, "-3/2").unwrap(),
            Value::rational(-3, 2)
        );
        assert_eq!(
            parse_value(Sort::Rat, "0.25").unwrap(),
            Value::rational(1, 4)
        );
        assert_eq!(parse_value(Sort::Rat, "2").unwrap(), Value::rational(2, 1));
        assert!(parse_value(Sort::Int, "1/2").is_err());
        assert_eq!(parse_value(Sort::Bool, "true").unwrap(), Value::Bool(true));
    }
}
