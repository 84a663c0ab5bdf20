use std::collections::HashMap;

use indexmap::IndexSet;

use crate::eventlog::Trace;

pub type NodeId = u32;
pub type SymbolId = u32;

#[derive(Clone, Debug)]
struct TrieNode {
    parent: NodeId,
    symbol: SymbolId,
    depth: u32,
    member: bool,
}

/// Trie over a set of traces. Each node stands for one prefix, so a node id
/// is an interned trace.
///
/// A fixed index answers prefix/member queries for a target set. A growable
/// index ([`PrefixIndex::growable`]) accepts every trace and interns new
/// prefixes on demand.
#[derive(Clone, Debug)]
pub struct PrefixIndex {
    symbols: IndexSet<String>,
    nodes: Vec<TrieNode>,
    children: HashMap<(NodeId, SymbolId), NodeId>,
    growable: bool,
}

impl PrefixIndex {
    pub const ROOT: NodeId = 0;

    fn empty(growable: bool) -> Self {
        PrefixIndex {
            symbols: IndexSet::new(),
            nodes: vec![TrieNode { parent: 0, symbol: 0, depth: 0, member: growable }],
            children: HashMap::new(),
            growable,
        }
    }

    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> Self {
        let mut index = Self::empty(false);
        for t in traces {
            let node = index.insert(t);
            index.nodes[node as usize].member = true;
        }
        index
    }

    /// An index in which every trace is a member.
    pub fn growable() -> Self {
        Self::empty(true)
    }

    pub fn is_growable(&self) -> bool {
        self.growable
    }

    fn intern_symbol(&mut self, s: &str) -> SymbolId {
        match self.symbols.get_index_of(s) {
            Some(i) => i as SymbolId,
            None => self.symbols.insert_full(s.to_string()).0 as SymbolId,
        }
    }

    fn insert(&mut self, trace: &Trace) -> NodeId {
        let mut node = Self::ROOT;
        for a in trace.events() {
            let sym = self.intern_symbol(a);
            node = self.child_or_insert(node, sym);
        }
        node
    }

    fn child_or_insert(&mut self, node: NodeId, sym: SymbolId) -> NodeId {
        if let Some(&c) = self.children.get(&(node, sym)) {
            return c;
        }
        let id = self.nodes.len() as NodeId;
        let depth = self.nodes[node as usize].depth + 1;
        self.nodes.push(TrieNode { parent: node, symbol: sym, depth, member: self.growable });
        self.children.insert((node, sym), id);
        id
    }

    /// Symbol id of `activity`. A growable index interns unknown symbols;
    /// a fixed one returns `None` for symbols no target uses.
    pub fn symbol(&mut self, activity: &str) -> Option<SymbolId> {
        if self.growable {
            Some(self.intern_symbol(activity))
        } else {
            self.symbols.get_index_of(activity).map(|i| i as SymbolId)
        }
    }

    /// Symbol id of `activity` without interning.
    pub fn symbol_id(&self, activity: &str) -> Option<SymbolId> {
        self.symbols.get_index_of(activity).map(|i| i as SymbolId)
    }

    /// The prefix extended by `sym`, if it is a prefix of some target
    /// (always, for a growable index).
    pub fn extend(&mut self, node: NodeId, sym: SymbolId) -> Option<NodeId> {
        if self.growable {
            Some(self.child_or_insert(node, sym))
        } else {
            self.children.get(&(node, sym)).copied()
        }
    }

    /// Like [`PrefixIndex::extend`] without interning, for shared access.
    pub fn extend_existing(&self, node: NodeId, sym: SymbolId) -> Option<NodeId> {
        self.children.get(&(node, sym)).copied()
    }

    pub fn is_member_node(&self, node: NodeId) -> bool {
        self.nodes[node as usize].member
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.nodes[node as usize].depth as usize
    }

    fn lookup(&self, trace: &Trace) -> Option<NodeId> {
        let mut node = Self::ROOT;
        for a in trace.events() {
            let sym = self.symbols.get_index_of(a.as_str())? as SymbolId;
            node = *self.children.get(&(node, sym))?;
        }
        Some(node)
    }

    pub fn is_prefix(&self, trace: &Trace) -> bool {
        self.growable || self.lookup(trace).is_some()
    }

    pub fn is_member(&self, trace: &Trace) -> bool {
        self.growable || self.lookup(trace).is_some_and(|n| self.is_member_node(n))
    }

    /// Rebuilds the trace a node stands for.
    pub fn trace(&self, node: NodeId) -> Trace {
        let mut symbols = Vec::with_capacity(self.depth(node));
        let mut n = node;
        while n != Self::ROOT {
            let entry = &self.nodes[n as usize];
            symbols.push(self.symbols[entry.symbol as usize].clone());
            n = entry.parent;
        }
        symbols.reverse();
        Trace::new(symbols)
    }

    /// Length of the longest member trace (0 for a growable index).
    pub fn max_member_len(&self) -> usize {
        if self.growable {
            return 0;
        }
        self.nodes.iter().filter(|n| n.member).map(|n| n.depth as usize).max().unwrap_or(0)
    }

    pub fn member_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.member).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prefixes_and_members() {
        let targets = [Trace::from_chars("abc"), Trace::from_chars("ab"), Trace::from_chars("q")];
        let index = PrefixIndex::from_traces(&targets);
        assert!(index.is_prefix(&Trace::empty()));
        assert!(!index.is_member(&Trace::empty()));
        assert!(index.is_prefix(&Trace::from_chars("a")));
        assert!(!index.is_member(&Trace::from_chars("a")));
        assert!(index.is_member(&Trace::from_chars("ab")));
        assert!(!index.is_prefix(&Trace::from_chars("abd")));
        assert!(!index.is_prefix(&Trace::from_chars("z")));
        assert_eq!(index.max_member_len(), 3);
        assert_eq!(index.member_count(), 3);
    }

    #[test]
    fn growable_interns_on_demand() {
        let mut index = PrefixIndex::growable();
        let x = index.symbol("x").unwrap();
        let n = index.extend(PrefixIndex::ROOT, x).unwrap();
        let n2 = index.extend(n, x).unwrap();
        assert_eq!(index.trace(n2), Trace::from_chars("xx"));
        assert!(index.is_member_node(n2));
        assert_eq!(index.extend(n, x), Some(n2));
    }

    proptest! {
        #[test]
        fn members_are_prefixes(traces in proptest::collection::vec("[abc]{0,5}", 1..10), probe in "[abc]{0,6}") {
            let traces: Vec<Trace> = traces.iter().map(|s| Trace::from_chars(s)).collect();
            let index = PrefixIndex::from_traces(&traces);
            let probe = Trace::from_chars(&probe);
            let brute_member = traces.contains(&probe);
            let brute_prefix = traces.iter().any(|t| t.events().starts_with(probe.events()));
            prop_assert_eq!(index.is_member(&probe), brute_member);
            prop_assert_eq!(index.is_prefix(&probe), brute_prefix);
            prop_assert!(!index.is_member(&probe) || index.is_prefix(&probe));
            prop_assert!(index.is_prefix(&Trace::empty()));
        }
    }
}
