//! PNML subset reader and writer.
//!
//! Understands `net`, `page`, `place` (with `initialMarking`), `transition`
//! (with `name`) and `arc` (with an optional `inscription`). Transition weights
//! travel in a dedicated tool block:
//!
//! ```xml
//! <toolspecific tool="stochastic-weights" version="1"><weight>0.35</weight></toolspecific>
//! ```
//!
//! Anything else is skipped with a warning.

use std::fmt::Write as _;

use log::warn;
use roxmltree::{Document, Node as XmlNode};
use thiserror::Error;

use super::{Label, LabeledPetriNet, NetBuilder, NetError, Node, PlaceIdx, StochasticWorkflowNet, WeightVector};

pub const WEIGHT_TOOL: &str = "stochastic-weights";
pub const WEIGHT_TOOL_VERSION: &str = "1";
const PTNET_TYPE: &str = "http://www.pnml.org/version-2009/grammar/ptnet";

#[derive(Debug, Error, PartialEq)]
pub enum PnmlError {
    #[error("malformed PNML: {0}")]
    Malformed(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("arc {from:?} -> {to:?} references undeclared node {missing:?}")]
    DanglingArc { from: String, to: String, missing: String },
}

impl From<NetError> for PnmlError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::DuplicateId(id) => PnmlError::DuplicateId(id),
            NetError::DanglingArc { from, to, missing } => PnmlError::DanglingArc { from, to, missing },
            other => PnmlError::Malformed(other.to_string()),
        }
    }
}

/// Result of reading a PNML document.
#[derive(Clone, Debug, PartialEq)]
pub struct PnmlNet {
    pub net: LabeledPetriNet,
    pub source: Option<PlaceIdx>,
    pub sink: Option<PlaceIdx>,
    /// `None` when no transition carries a weight block.
    pub weights: Option<WeightVector>,
    /// True when at least one transition had no weight and got the default 1.0.
    pub unweighted: bool,
}

impl PnmlNet {
    /// Weights as read, with 1.0 for any transition lacking one.
    pub fn weights_or_default(&self) -> WeightVector {
        self.weights
            .clone()
            .unwrap_or_else(|| WeightVector::uniform(self.net.transitions().len()))
    }
}

/// True for names that denote the silent action.
pub fn is_silent_name(name: Option<&str>) -> bool {
    match name.map(str::trim) {
        None => true,
        Some(n) => n.is_empty() || n == "tau" || n == "τ",
    }
}

fn malformed(msg: impl Into<String>) -> PnmlError {
    PnmlError::Malformed(msg.into())
}

fn child<'a, 'i>(node: XmlNode<'a, 'i>, tag: &str) -> Option<XmlNode<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

/// `<tag><text>..</text></tag>` helper used by names and markings.
fn text_of(node: XmlNode, tag: &str) -> Option<String> {
    let inner = child(node, tag)?;
    let text = child(inner, "text")?;
    Some(text.text().unwrap_or("").to_string())
}

fn required_id(node: XmlNode) -> Result<String, PnmlError> {
    node.attribute("id")
        .map(str::to_string)
        .ok_or_else(|| malformed(format!("<{}> without id", node.tag_name().name())))
}

fn weight_of(node: XmlNode) -> Result<Option<f64>, PnmlError> {
    for ts in node.children().filter(|c| c.is_element() && c.tag_name().name() == "toolspecific") {
        if ts.attribute("tool") != Some(WEIGHT_TOOL) {
            continue;
        }
        let Some(w) = child(ts, "weight") else {
            return Err(malformed("stochastic-weights block without <weight>"));
        };
        let raw = w.text().unwrap_or("").trim();
        let value: f64 = raw.parse().map_err(|_| malformed(format!("weight {raw:?} is not a decimal number")))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(malformed(format!("weight {raw:?} must be strictly positive")));
        }
        return Ok(Some(value));
    }
    Ok(None)
}

struct Collected {
    builder: NetBuilder,
    weights: Vec<Option<f64>>,
}

fn collect(node: XmlNode, out: &mut Collected) -> Result<(), PnmlError> {
    for el in node.children().filter(|c| c.is_element()) {
        match el.tag_name().name() {
            "page" => collect(el, out)?,
            "place" => {
                let id = required_id(el)?;
                let tokens = match text_of(el, "initialMarking") {
                    None => 0,
                    Some(t) => t
                        .trim()
                        .parse()
                        .map_err(|_| malformed(format!("place {id:?}: bad initial marking {t:?}")))?,
                };
                let name = text_of(el, "name");
                out.builder.add_place(&id, name, tokens);
            }
            "transition" => {
                let id = required_id(el)?;
                let name = text_of(el, "name");
                let label = if is_silent_name(name.as_deref()) {
                    Label::Silent
                } else {
                    Label::Activity(name.unwrap_or_default().trim().to_string())
                };
                out.builder.add_transition(&id, label);
                out.weights.push(weight_of(el)?);
            }
            "arc" => {
                let from = el.attribute("source").ok_or_else(|| malformed("<arc> without source"))?;
                let to = el.attribute("target").ok_or_else(|| malformed("<arc> without target"))?;
                let multiplicity = match text_of(el, "inscription") {
                    None => 1,
                    Some(t) => t
                        .trim()
                        .parse()
                        .map_err(|_| malformed(format!("arc {from:?} -> {to:?}: bad inscription {t:?}")))?,
                };
                out.builder.add_arc(from, to, multiplicity);
            }
            "name" | "toolspecific" | "graphics" => {}
            other => warn!("ignoring unsupported PNML element <{other}>"),
        }
    }
    Ok(())
}

/// Reads a PNML document. The first `<net>` is used.
pub fn parse_pnml(bytes: &[u8]) -> Result<PnmlNet, PnmlError> {
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    let net_el = if root.tag_name().name() == "net" {
        root
    } else {
        child(root, "net").ok_or_else(|| malformed("no <net> element"))?
    };
    let mut collected = Collected { builder: NetBuilder::new(), weights: Vec::new() };
    collect(net_el, &mut collected)?;
    let net = collected.builder.build()?;

    let any = collected.weights.iter().any(Option::is_some);
    let unweighted = collected.weights.iter().any(Option::is_none);
    let weights = if any {
        if unweighted {
            warn!("some transitions carry no weight; defaulting them to 1.0");
        }
        let values = collected.weights.iter().map(|w| w.unwrap_or(1.0)).collect();
        Some(WeightVector::new(values).map_err(|e| malformed(e.to_string()))?)
    } else {
        None
    };
    let (source, sink) = net.infer_source_sink();
    Ok(PnmlNet { net, source: source.ok(), sink: sink.ok(), weights, unweighted })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Writes a net in canonical form: places, transitions, then arcs, each in
/// declaration order. Weights are omitted when `weights` is `None`.
pub fn write_net(net: &LabeledPetriNet, weights: Option<&WeightVector>) -> Vec<u8> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    let _ = writeln!(s, "  <net id=\"net1\" type=\"{PTNET_TYPE}\">");
    s.push_str("    <page id=\"page1\">\n");
    for (p, place) in net.places().iter().enumerate() {
        let _ = write!(s, "      <place id=\"{}\">", escape(&place.id));
        if let Some(name) = &place.name {
            let _ = write!(s, "<name><text>{}</text></name>", escape(name));
        }
        let tokens = net.initial_marking()[p];
        if tokens > 0 {
            let _ = write!(s, "<initialMarking><text>{tokens}</text></initialMarking>");
        }
        s.push_str("</place>\n");
    }
    for (t, tr) in net.transitions().iter().enumerate() {
        let name = match &tr.label {
            Label::Silent => "tau",
            Label::Activity(a) => a.as_str(),
        };
        let _ = write!(s, "      <transition id=\"{}\"><name><text>{}</text></name>", escape(&tr.id), escape(name));
        if let Some(w) = weights {
            let _ = write!(
                s,
                "<toolspecific tool=\"{WEIGHT_TOOL}\" version=\"{WEIGHT_TOOL_VERSION}\"><weight>{}</weight></toolspecific>",
                w[t]
            );
        }
        s.push_str("</transition>\n");
    }
    let id = |n: Node| match n {
        Node::Place(p) => &net.places()[p].id,
        Node::Transition(t) => &net.transitions()[t].id,
    };
    for (i, arc) in net.arcs().iter().enumerate() {
        let _ = write!(
            s,
            "      <arc id=\"arc{}\" source=\"{}\" target=\"{}\"",
            i + 1,
            escape(id(arc.source)),
            escape(id(arc.target))
        );
        if arc.multiplicity == 1 {
            s.push_str("/>\n");
        } else {
            let _ = writeln!(s, "><inscription><text>{}</text></inscription></arc>", arc.multiplicity);
        }
    }
    s.push_str("    </page>\n  </net>\n</pnml>\n");
    s.into_bytes()
}

pub fn write_pnml(swn: &StochasticWorkflowNet) -> Vec<u8> {
    write_net(swn.net(), Some(swn.weights()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::generate::{random_workflow_net, TreeShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MINIMAL: &str = r#"<?xml version="1.0"?>
<pnml><net id="n" type="ptnet"><page id="pg">
  <place id="i"><initialMarking><text>1</text></initialMarking></place>
  <place id="o"/>
  <transition id="t"><name><text>NAME</text></name></transition>
  <arc id="a1" source="i" target="t"/>
  <arc id="a2" source="t" target="o"/>
</page></net></pnml>"#;

    #[test]
    fn minimal_net() {
        let parsed = parse_pnml(MINIMAL.replace("NAME", "a").as_bytes()).unwrap();
        assert_eq!(parsed.net.places().len(), 2);
        assert_eq!(parsed.net.transitions().len(), 1);
        assert_eq!(parsed.net.transitions()[0].label, Label::Activity("a".into()));
        assert_eq!(parsed.net.initial_marking(), &[1, 0]);
        assert_eq!((parsed.source, parsed.sink), (Some(0), Some(1)));
        assert!(parsed.weights.is_none());
        assert!(parsed.unweighted);
    }

    #[test]
    fn silent_names() {
        for name in ["tau", "τ", "", "  "] {
            let parsed = parse_pnml(MINIMAL.replace("NAME", name).as_bytes()).unwrap();
            assert_eq!(parsed.net.transitions()[0].label, Label::Silent, "name {name:?}");
        }
        let no_name = MINIMAL.replace("<name><text>NAME</text></name>", "");
        assert_eq!(parse_pnml(no_name.as_bytes()).unwrap().net.transitions()[0].label, Label::Silent);
    }

    #[test]
    fn errors() {
        let dangling = MINIMAL.replace("target=\"o\"", "target=\"nowhere\"");
        assert!(matches!(parse_pnml(dangling.as_bytes()), Err(PnmlError::DanglingArc { missing, .. }) if missing == "nowhere"));
        let dup = MINIMAL.replace("<place id=\"o\"/>", "<place id=\"i\"/>");
        assert_eq!(parse_pnml(dup.as_bytes()), Err(PnmlError::DuplicateId("i".into())));
        assert!(matches!(parse_pnml(b"<pnml><net>"), Err(PnmlError::Malformed(_))));
        assert!(matches!(parse_pnml(b"<something/>"), Err(PnmlError::Malformed(_))));
    }

    #[test]
    fn unknown_elements_are_ignored() {
        let noisy = MINIMAL.replace("<place id=\"o\"/>", "<place id=\"o\"/><referencePlace id=\"r\"/><foo><bar/></foo>");
        let parsed = parse_pnml(noisy.as_bytes()).unwrap();
        assert_eq!(parsed.net.places().len(), 2);
    }

    #[test]
    fn weighted_round_trip() {
        let swn = fixtures::parallel_choice_swn();
        let bytes = write_pnml(&swn);
        let parsed = parse_pnml(&bytes).unwrap();
        assert_eq!(parsed.weights.as_ref().unwrap().values(), &[1.0, 0.3, 0.35, 0.35, 1.0]);
        assert!(!parsed.unweighted);
        assert_eq!(parsed.net, *swn.net());
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains(
            "<toolspecific tool=\"stochastic-weights\" version=\"1\"><weight>0.35</weight></toolspecific>"
        ));
        // canonical output is a fixed point
        assert_eq!(write_net(&parsed.net, parsed.weights.as_ref()), bytes);
    }

    #[test]
    fn tiny_weight_is_preserved() {
        let wn = fixtures::parallel_choice_net();
        let swn = StochasticWorkflowNet::new(wn, WeightVector::new(vec![1e-9, 1.0, 0.1, 1.0 / 3.0, 7.0]).unwrap()).unwrap();
        let parsed = parse_pnml(&write_pnml(&swn)).unwrap();
        assert_eq!(parsed.weights.unwrap(), *swn.weights());
    }

    #[test]
    fn random_nets_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let shape = TreeShape { max_transitions: 50, allow_loops: true, ..TreeShape::default() };
        let mut tested = 0;
        while tested < 5 {
            let swn = random_workflow_net(&mut rng, &shape);
            if swn.net().transitions().len() < 30 {
                continue;
            }
            let parsed = parse_pnml(&write_pnml(&swn)).unwrap();
            assert_eq!(parsed.net, *swn.net());
            assert_eq!(parsed.weights.unwrap(), *swn.weights());
            tested += 1;
        }
    }
}
