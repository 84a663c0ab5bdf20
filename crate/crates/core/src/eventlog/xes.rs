//! Minimal XES reader/writer: `log`, `trace` and `event` with string attributes.
//!
//! The activity of an event is its `concept:name` string attribute. Lifecycle
//! and every other attribute are ignored.

use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{EventLog, LogError, Trace};

const CONCEPT_NAME: &str = "concept:name";

fn concept_name<'a>(node: Node<'a, '_>) -> Option<&'a str> {
    node.children()
        .filter(|c| c.is_element() && c.tag_name().name() == "string")
        .find(|c| c.attribute("key") == Some(CONCEPT_NAME))
        .and_then(|c| c.attribute("value"))
}

pub fn parse_xes(bytes: &[u8]) -> Result<EventLog, LogError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LogError::MalformedXes(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| LogError::MalformedXes(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "log" {
        return Err(LogError::MalformedXes(format!("root element is <{}>, expected <log>", root.tag_name().name())));
    }
    let mut log = EventLog::new();
    let traces = root.children().filter(|c| c.is_element() && c.tag_name().name() == "trace");
    for (ti, trace_el) in traces.enumerate() {
        let mut trace = Trace::empty();
        let events = trace_el.children().filter(|c| c.is_element() && c.tag_name().name() == "event");
        for (ei, event) in events.enumerate() {
            let name = concept_name(event).ok_or(LogError::MissingConceptName { trace: ti, event: ei })?;
            trace.push(name);
        }
        log.add(trace, 1);
    }
    Ok(log)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Writes one `<trace>` per occurrence, named `case1`, `case2`, ... in trace order.
pub fn write_xes(log: &EventLog) -> Vec<u8> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<log xes.version=\"1.0\" xmlns=\"http://www.xes-standard.org/\">\n");
    s.push_str("  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n");
    let mut case = 0;
    for (trace, &freq) in log.entries() {
        for _ in 0..freq {
            case += 1;
            s.push_str("  <trace>\n");
            let _ = writeln!(s, "    <string key=\"concept:name\" value=\"case{case}\"/>");
            for a in trace.events() {
                let _ = writeln!(s, "    <event><string key=\"concept:name\" value=\"{}\"/></event>", escape(a));
            }
            s.push_str("  </trace>\n");
        }
    }
    s.push_str("</log>\n");
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xes(traces: &[&[&str]]) -> String {
        let mut s = String::from("<log xes.version=\"1.0\">");
        for (i, t) in traces.iter().enumerate() {
            s += &format!("<trace><string key=\"concept:name\" value=\"c{i}\"/>");
            for a in *t {
                s += &format!(
                    "<event><string key=\"lifecycle:transition\" value=\"complete\"/><string key=\"concept:name\" value=\"{a}\"/></event>"
                );
            }
            s += "</trace>";
        }
        s + "</log>"
    }

    #[test]
    fn identical_traces_aggregate() {
        let log = parse_xes(xes(&[&["A"], &["A"]]).as_bytes()).unwrap();
        assert_eq!(log.frequency(&Trace::from_chars("A")), 2);
        assert_eq!(log.support_size(), 1);
    }

    #[test]
    fn document_order() {
        let log = parse_xes(xes(&[&["A", "Q", "A"]]).as_bytes()).unwrap();
        assert_eq!(log.frequency(&Trace::from_chars("AQA")), 1);
    }

    #[test]
    fn missing_concept_name() {
        let bad = "<log><trace><event><string key=\"org:resource\" value=\"x\"/></event></trace></log>";
        assert!(matches!(
            parse_xes(bad.as_bytes()),
            Err(LogError::MissingConceptName { trace: 0, event: 0 })
        ));
        assert!(matches!(parse_xes(b"<log><trace>"), Err(LogError::MalformedXes(_))));
    }

    #[test]
    fn write_then_read() {
        let mut log = EventLog::new();
        log.add(Trace::from_chars("abc"), 3);
        log.add(Trace::new(vec!["x & <y>".into()]), 1);
        log.add(Trace::empty(), 2);
        assert_eq!(parse_xes(&write_xes(&log)).unwrap(), log);
    }
}
