//! Finite nets: directed multigraphs of ranked-letter nodes with ordered
//! ports, inter-port links and frontier letters on unbound ports.
//!
//! Ports are positional: port `k` of a node is identified by its direction
//! and 1-based index, and positional indices double as the default arity
//! annotation. A port is the endpoint of at most one link; every port that
//! is not linked must appear in the frontier map exactly once, labeled
//! either with a manoeuvre letter (a binder for surrounding context in
//! patterns) or an arity letter (an open position).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Symbol = String;
pub type NodeId = u32;

/// A node label with fixed in/out port counts. The rank of a letter is the
/// concatenation of its in- and out-arity, so `rank_len` is their sum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankedLetter {
    pub name: Symbol,
    pub in_count: u32,
    pub out_count: u32,
}

impl RankedLetter {
    pub fn new(name: impl Into<Symbol>, in_count: u32, out_count: u32) -> Self {
        RankedLetter {
            name: name.into(),
            in_count,
            out_count,
        }
    }

    pub fn rank_len(&self) -> u32 {
        self.in_count + self.out_count
    }
}

impl fmt::Display for RankedLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}/{})", self.name, self.in_count, self.out_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PortDir {
    In,
    Out,
}

impl PortDir {
    pub fn flip(self) -> PortDir {
        match self {
            PortDir::In => PortDir::Out,
            PortDir::Out => PortDir::In,
        }
    }
}

/// One in- or out-port of a node, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port {
    pub node: NodeId,
    pub dir: PortDir,
    pub index: u32,
}

impl Port {
    pub fn input(node: NodeId, index: u32) -> Self {
        Port {
            node,
            dir: PortDir::In,
            index,
        }
    }

    pub fn output(node: NodeId, index: u32) -> Self {
        Port {
            node,
            dir: PortDir::Out,
            index,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.dir {
            PortDir::In => 'i',
            PortDir::Out => 'o',
        };
        write!(f, "{}.{}{}", self.node, d, self.index)
    }
}

/// A directed link from an out-port to an in-port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub src: NodeId,
    pub src_port: u32,
    pub dst: NodeId,
    pub dst_port: u32,
}

impl Link {
    pub fn new(src: NodeId, src_port: u32, dst: NodeId, dst_port: u32) -> Self {
        Link {
            src,
            src_port,
            dst,
            dst_port,
        }
    }

    pub fn source(&self) -> Port {
        Port::output(self.src, self.src_port)
    }

    pub fn target(&self) -> Port {
        Port::input(self.dst, self.dst_port)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source(), self.target())
    }
}

/// Label of an unbound port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrontierLabel {
    /// Context binder: in a pattern it captures whatever the environment
    /// attaches at this port.
    Manoeuvre(Symbol),
    /// Open position; positional indices are the default arity letters.
    Arity(Symbol),
}

impl FrontierLabel {
    pub fn manoeuvre(s: impl Into<Symbol>) -> Self {
        FrontierLabel::Manoeuvre(s.into())
    }

    pub fn arity(s: impl Into<Symbol>) -> Self {
        FrontierLabel::Arity(s.into())
    }

    /// Default arity letter for a cut or unoccupied port: its positional index.
    pub fn positional(index: u32) -> Self {
        FrontierLabel::Arity(index.to_string())
    }

    pub fn symbol(&self) -> &str {
        match self {
            FrontierLabel::Manoeuvre(s) | FrontierLabel::Arity(s) => s,
        }
    }

    pub fn is_manoeuvre(&self) -> bool {
        matches!(self, FrontierLabel::Manoeuvre(_))
    }
}

impl fmt::Display for FrontierLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrontierLabel::Manoeuvre(s) => write!(f, "{s}"),
            FrontierLabel::Arity(s) => write!(f, "#{s}"),
        }
    }
}

/// Alphabet partitioned into ranked letters, manoeuvre letters and arity
/// letters; the three symbol pools must be pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alphabet {
    pub letters: BTreeMap<Symbol, RankedLetter>,
    pub manoeuvre_letters: BTreeSet<Symbol>,
    pub arity_letters: BTreeSet<Symbol>,
}

impl Alphabet {
    /// Collects the alphabet occurring in a net: its letters plus the
    /// frontier symbols split by kind.
    pub fn of_net(net: &Net) -> Self {
        let mut a = Alphabet::default();
        for letter in net.nodes.values() {
            a.letters.insert(letter.name.clone(), letter.clone());
        }
        for label in net.frontier.values() {
            match label {
                FrontierLabel::Manoeuvre(s) => {
                    a.manoeuvre_letters.insert(s.clone());
                }
                FrontierLabel::Arity(s) => {
                    a.arity_letters.insert(s.clone());
                }
            }
        }
        a
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for name in self.letters.keys() {
            if self.manoeuvre_letters.contains(name) {
                out.push(format!("symbol `{name}` is both a letter and a manoeuvre letter"));
            }
            if self.arity_letters.contains(name) {
                out.push(format!("symbol `{name}` is both a letter and an arity letter"));
            }
        }
        for name in &self.manoeuvre_letters {
            if self.arity_letters.contains(name) {
                out.push(format!(
                    "symbol `{name}` is both a manoeuvre and an arity letter"
                ));
            }
        }
        out
    }
}

/// A violation of the net invariants, reported by [`Net::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetViolation {
    UnknownNode { node: NodeId, link: Link },
    PortOutOfRange { port: Port },
    DuplicateLink { port: Port },
    FrontierOnLinkedPort { port: Port },
    MissingFrontier { port: Port },
    FrontierUnknownNode { port: Port },
}

impl fmt::Display for NetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetViolation::UnknownNode { node, link } => {
                write!(f, "link {link} references unknown node {node}")
            }
            NetViolation::PortOutOfRange { port } => {
                write!(f, "port {port} exceeds the node's arity")
            }
            NetViolation::DuplicateLink { port } => {
                write!(f, "port {port} is the endpoint of more than one link")
            }
            NetViolation::FrontierOnLinkedPort { port } => {
                write!(f, "port {port} is linked but also appears in the frontier")
            }
            NetViolation::MissingFrontier { port } => {
                write!(f, "unbound port {port} has no frontier entry")
            }
            NetViolation::FrontierUnknownNode { port } => {
                write!(f, "frontier entry {port} references an unknown node or port")
            }
        }
    }
}

/// A finite net. The empty net (no nodes) is the designated empty value.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Net {
    nodes: BTreeMap<NodeId, RankedLetter>,
    links: BTreeSet<Link>,
    frontier: BTreeMap<Port, FrontierLabel>,
}

impl Net {
    pub fn empty() -> Self {
        Net::default()
    }

    /// Builds a net and fills every unbound port that is missing a frontier
    /// entry with its positional arity letter.
    pub fn build(
        nodes: impl IntoIterator<Item = (NodeId, RankedLetter)>,
        links: impl IntoIterator<Item = Link>,
        frontier: impl IntoIterator<Item = (Port, FrontierLabel)>,
    ) -> Self {
        let mut net = Net {
            nodes: nodes.into_iter().collect(),
            links: links.into_iter().collect(),
            frontier: frontier.into_iter().collect(),
        };
        net.fill_positional_frontier();
        net
    }

    /// Single node with all ports open on positional arity letters.
    pub fn single(letter: RankedLetter) -> Self {
        Net::build([(1, letter)], [], [])
    }

    fn fill_positional_frontier(&mut self) {
        let linked = self.linked_ports();
        for (&id, letter) in &self.nodes {
            for k in 1..=letter.in_count {
                let p = Port::input(id, k);
                if !linked.contains(&p) && !self.frontier.contains_key(&p) {
                    self.frontier.insert(p, FrontierLabel::positional(k));
                }
            }
            for k in 1..=letter.out_count {
                let p = Port::output(id, k);
                if !linked.contains(&p) && !self.frontier.contains_key(&p) {
                    self.frontier.insert(p, FrontierLabel::positional(k));
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, RankedLetter> {
        &self.nodes
    }

    pub fn links(&self) -> &BTreeSet<Link> {
        &self.links
    }

    pub fn frontier(&self) -> &BTreeMap<Port, FrontierLabel> {
        &self.frontier
    }

    pub fn letter(&self, node: NodeId) -> Option<&RankedLetter> {
        self.nodes.get(&node)
    }

    pub fn node_ids(&self) -> BTreeSet<NodeId> {
        self.nodes.keys().copied().collect()
    }

    /// Set of ranked-letter names occurring in the net.
    pub fn letter_names(&self) -> BTreeSet<Symbol> {
        self.nodes.values().map(|l| l.name.clone()).collect()
    }

    /// Manoeuvre letters occurring on the frontier.
    pub fn manoeuvre_letters(&self) -> BTreeSet<Symbol> {
        self.frontier
            .values()
            .filter_map(|l| match l {
                FrontierLabel::Manoeuvre(s) => Some(s.clone()),
                FrontierLabel::Arity(_) => None,
            })
            .collect()
    }

    pub fn linked_ports(&self) -> BTreeSet<Port> {
        let mut set = BTreeSet::new();
        for link in &self.links {
            set.insert(link.source());
            set.insert(link.target());
        }
        set
    }

    /// All ports of a node in canonical order (in-ports then out-ports).
    pub fn ports_of(&self, node: NodeId) -> Vec<Port> {
        let mut out = Vec::new();
        if let Some(letter) = self.nodes.get(&node) {
            for k in 1..=letter.in_count {
                out.push(Port::input(node, k));
            }
            for k in 1..=letter.out_count {
                out.push(Port::output(node, k));
            }
        }
        out
    }

    /// Link whose endpoint is the given port, if any.
    pub fn link_at(&self, port: Port) -> Option<&Link> {
        self.links.iter().find(|l| match port.dir {
            PortDir::In => l.target() == port,
            PortDir::Out => l.source() == port,
        })
    }

    /// Number of open (frontier) ports; the rank of the net seen as a block.
    pub fn open_port_count(&self) -> usize {
        self.frontier.len()
    }

    pub fn open_ports(&self, dir: PortDir) -> Vec<Port> {
        self.frontier
            .keys()
            .filter(|p| p.dir == dir)
            .copied()
            .collect()
    }

    /// Root-most nodes: nodes none of whose in-ports is linked.
    pub fn apex(&self) -> BTreeSet<NodeId> {
        let linked = self.linked_ports();
        self.nodes
            .keys()
            .filter(|&&id| {
                let letter = &self.nodes[&id];
                (1..=letter.in_count).all(|k| !linked.contains(&Port::input(id, k)))
            })
            .copied()
            .collect()
    }

    /// Letter names of the apex nodes.
    pub fn apex_letters(&self) -> BTreeSet<Symbol> {
        self.apex()
            .into_iter()
            .map(|id| self.nodes[&id].name.clone())
            .collect()
    }

    /// Checks every net invariant; an empty list means the net is valid.
    pub fn validate(&self) -> Vec<NetViolation> {
        let mut out = Vec::new();
        let mut seen_endpoints: BTreeSet<Port> = BTreeSet::new();
        for link in &self.links {
            for port in [link.source(), link.target()] {
                match self.nodes.get(&port.node) {
                    None => out.push(NetViolation::UnknownNode {
                        node: port.node,
                        link: *link,
                    }),
                    Some(letter) => {
                        let cap = match port.dir {
                            PortDir::In => letter.in_count,
                            PortDir::Out => letter.out_count,
                        };
                        if port.index == 0 || port.index > cap {
                            out.push(NetViolation::PortOutOfRange { port });
                        }
                    }
                }
                if !seen_endpoints.insert(port) {
                    out.push(NetViolation::DuplicateLink { port });
                }
            }
        }
        for (port, _) in &self.frontier {
            match self.nodes.get(&port.node) {
                None => out.push(NetViolation::FrontierUnknownNode { port: *port }),
                Some(letter) => {
                    let cap = match port.dir {
                        PortDir::In => letter.in_count,
                        PortDir::Out => letter.out_count,
                    };
                    if port.index == 0 || port.index > cap {
                        out.push(NetViolation::FrontierUnknownNode { port: *port });
                    }
                }
            }
            if seen_endpoints.contains(port) {
                out.push(NetViolation::FrontierOnLinkedPort { port: *port });
            }
        }
        for (&id, _) in &self.nodes {
            for port in self.ports_of(id) {
                if !seen_endpoints.contains(&port) && !self.frontier.contains_key(&port) {
                    out.push(NetViolation::MissingFrontier { port });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Undirected adjacency between nodes (links in either direction).
    pub fn neighbors(&self, node: NodeId) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for link in &self.links {
            if link.src == node {
                out.insert(link.dst);
            }
            if link.dst == node {
                out.insert(link.src);
            }
        }
        out.remove(&node);
        out
    }

    pub fn is_connected(&self) -> bool {
        let Some((&start, _)) = self.nodes.iter().next() else {
            return false;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for m in self.neighbors(n) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    pub fn connected_components(&self) -> Vec<BTreeSet<NodeId>> {
        let mut unseen = self.node_ids();
        let mut components = Vec::new();
        while let Some(&start) = unseen.iter().next() {
            let mut comp = BTreeSet::from([start]);
            let mut stack = vec![start];
            unseen.remove(&start);
            while let Some(n) = stack.pop() {
                for m in self.neighbors(n) {
                    if unseen.remove(&m) {
                        comp.insert(m);
                        stack.push(m);
                    }
                }
            }
            components.push(comp);
        }
        components
    }

    /// Induced subnet on a node subset. Links with both endpoints inside are
    /// kept; ports whose link is cut become frontier ports with positional
    /// arity letters; genuine frontier entries are preserved.
    pub fn induced(&self, node_set: &BTreeSet<NodeId>) -> Net {
        let nodes: BTreeMap<NodeId, RankedLetter> = node_set
            .iter()
            .filter_map(|id| self.nodes.get(id).map(|l| (*id, l.clone())))
            .collect();
        let links: BTreeSet<Link> = self
            .links
            .iter()
            .filter(|l| node_set.contains(&l.src) && node_set.contains(&l.dst))
            .copied()
            .collect();
        let frontier: BTreeMap<Port, FrontierLabel> = self
            .frontier
            .iter()
            .filter(|(p, _)| node_set.contains(&p.node))
            .map(|(p, l)| (*p, l.clone()))
            .collect();
        Net::build(nodes, links, frontier)
    }

    /// Same net with every node id shifted by `offset`.
    pub fn offset_ids(&self, offset: NodeId) -> Net {
        let nodes = self
            .nodes
            .iter()
            .map(|(&id, l)| (id + offset, l.clone()))
            .collect::<BTreeMap<_, _>>();
        let links = self
            .links
            .iter()
            .map(|l| Link::new(l.src + offset, l.src_port, l.dst + offset, l.dst_port))
            .collect::<BTreeSet<_>>();
        let frontier = self
            .frontier
            .iter()
            .map(|(p, label)| {
                (
                    Port {
                        node: p.node + offset,
                        ..*p
                    },
                    label.clone(),
                )
            })
            .collect::<BTreeMap<_, _>>();
        Net {
            nodes,
            links,
            frontier,
        }
    }

    /// Applies a node-id relabeling. Ids absent from the map are kept.
    pub fn relabel_ids(&self, map: &BTreeMap<NodeId, NodeId>) -> Net {
        let get = |id: NodeId| map.get(&id).copied().unwrap_or(id);
        let nodes = self
            .nodes
            .iter()
            .map(|(&id, l)| (get(id), l.clone()))
            .collect::<BTreeMap<_, _>>();
        let links = self
            .links
            .iter()
            .map(|l| Link::new(get(l.src), l.src_port, get(l.dst), l.dst_port))
            .collect::<BTreeSet<_>>();
        let frontier = self
            .frontier
            .iter()
            .map(|(p, label)| {
                (
                    Port {
                        node: get(p.node),
                        ..*p
                    },
                    label.clone(),
                )
            })
            .collect::<BTreeMap<_, _>>();
        Net {
            nodes,
            links,
            frontier,
        }
    }

    pub fn max_node_id(&self) -> NodeId {
        self.nodes.keys().max().copied().unwrap_or(0)
    }

    /// Disjoint union; ids of `other` are shifted past `self`'s.
    pub fn disjoint_union(&self, other: &Net) -> Net {
        let shifted = other.offset_ids(self.max_node_id());
        let mut nodes = self.nodes.clone();
        nodes.extend(shifted.nodes);
        let mut links = self.links.clone();
        links.extend(shifted.links);
        let mut frontier = self.frontier.clone();
        frontier.extend(shifted.frontier);
        Net {
            nodes,
            links,
            frontier,
        }
    }

    /// Raw constructor for callers that already hold consistent parts.
    pub fn from_parts(
        nodes: BTreeMap<NodeId, RankedLetter>,
        links: BTreeSet<Link>,
        frontier: BTreeMap<Port, FrontierLabel>,
    ) -> Net {
        Net {
            nodes,
            links,
            frontier,
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// `[1:a(0/0)]`
    pub fn single_a() -> Net {
        Net::single(RankedLetter::new("a", 0, 0))
    }

    /// `[1:c(0/0)]`
    pub fn single_c() -> Net {
        Net::single(RankedLetter::new("c", 0, 0))
    }

    /// `[1:a(0/1), 2:b(1/0); 1.o1->2.i1]`
    pub fn chain2() -> Net {
        Net::build(
            [
                (1, RankedLetter::new("a", 0, 1)),
                (2, RankedLetter::new("b", 1, 0)),
            ],
            [Link::new(1, 1, 2, 1)],
            [],
        )
    }

    /// `[1:a(1/1); 1.o1->1.i1]`
    pub fn loop_net() -> Net {
        Net::build([(1, RankedLetter::new("a", 1, 1))], [Link::new(1, 1, 1, 1)], [])
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn single_node_net_is_valid() {
        assert!(single_a().validate().is_empty());
    }

    #[test]
    fn duplicate_link_is_reported() {
        // Two links sharing 2.i1; built from raw parts to bypass the builder.
        let mut nodes = BTreeMap::new();
        nodes.insert(1, RankedLetter::new("a", 0, 2));
        nodes.insert(2, RankedLetter::new("b", 1, 0));
        let links = BTreeSet::from([Link::new(1, 1, 2, 1), Link::new(1, 2, 2, 1)]);
        let net = Net::from_parts(nodes, links, BTreeMap::new());
        let violations = net.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, NetViolation::DuplicateLink { port } if *port == Port::input(2, 1))));
    }

    #[test]
    fn cycles_are_permitted() {
        assert!(loop_net().validate().is_empty());
    }

    #[test]
    fn missing_frontier_is_reported() {
        let net = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("a", 0, 1))]),
            BTreeSet::new(),
            BTreeMap::new(),
        );
        let violations = net.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, NetViolation::MissingFrontier { .. })));
    }

    #[test]
    fn induced_subnet_cuts_links_to_frontier() {
        let sub = chain2().induced(&BTreeSet::from([1]));
        assert_eq!(sub.node_count(), 1);
        assert!(sub.links().is_empty());
        assert_eq!(
            sub.frontier().get(&Port::output(1, 1)),
            Some(&FrontierLabel::positional(1))
        );
    }

    #[test]
    fn apex_is_the_rootmost_node_set() {
        assert_eq!(chain2().apex(), BTreeSet::from([1]));
        // A self-loop occupies the in-port, so a loop has no apex node.
        assert!(loop_net().apex().is_empty());
    }

    #[test]
    fn connectivity() {
        assert!(chain2().is_connected());
        let two = single_a().disjoint_union(&single_c());
        assert!(!two.is_connected());
        assert_eq!(two.connected_components().len(), 2);
    }
}
