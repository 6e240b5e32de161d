//! Canonical labeling, isomorphism and jungles (finite sets of nets up to
//! isomorphism).
//!
//! Equality of nets is decided by a canonical form: a degree/label-refined
//! individualization search per connected component, components merged in
//! sorted order. Two nets are isomorphic iff a node relabeling preserves
//! letters, links (port-exact) and frontier labels (port-exact).

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::net::{Net, NodeId, PortDir};

/// Canonical relabeling of a net plus its canonical key. Nets are isomorphic
/// iff their keys are equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub net: Net,
    pub key: String,
}

/// Serializes a net under a fixed node order into a comparable key.
fn key_of(net: &Net) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for (id, letter) in net.nodes() {
        let _ = write!(s, "n{} {} {} {};", id, letter.name, letter.in_count, letter.out_count);
    }
    for link in net.links() {
        let _ = write!(s, "l{}.{}>{}.{};", link.src, link.src_port, link.dst, link.dst_port);
    }
    for (port, label) in net.frontier() {
        let d = match port.dir {
            PortDir::In => 'i',
            PortDir::Out => 'o',
        };
        let _ = write!(s, "f{}.{}{}={};", port.node, d, port.index, label);
    }
    s
}

type Coloring = BTreeMap<NodeId, u64>;

fn initial_coloring(net: &Net) -> Coloring {
    let mut invariants: BTreeMap<NodeId, String> = BTreeMap::new();
    for (&id, letter) in net.nodes() {
        let mut desc = format!("{}|{}|{}", letter.name, letter.in_count, letter.out_count);
        for port in net.ports_of(id) {
            if let Some(label) = net.frontier().get(&port) {
                desc.push_str(&format!("|{}{}={}", port_dir_char(port.dir), port.index, label));
            }
        }
        invariants.insert(id, desc);
    }
    compress(&invariants)
}

fn port_dir_char(d: PortDir) -> char {
    match d {
        PortDir::In => 'i',
        PortDir::Out => 'o',
    }
}

/// Maps arbitrary per-node descriptions to dense color numbers.
fn compress<T: Ord>(desc: &BTreeMap<NodeId, T>) -> Coloring {
    let distinct: BTreeSet<&T> = desc.values().collect();
    let index: BTreeMap<&T, u64> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, d)| (d, i as u64))
        .collect();
    desc.iter().map(|(&id, d)| (id, index[d])).collect()
}

/// One round of refinement: a node's new color combines its old color with
/// the colors seen across each of its ports.
fn refine_step(net: &Net, coloring: &Coloring) -> Coloring {
    let mut desc: BTreeMap<NodeId, (u64, Vec<(u8, u32, u64, u32)>)> = net
        .nodes()
        .keys()
        .map(|&id| (id, (coloring[&id], Vec::new())))
        .collect();
    for link in net.links() {
        desc.get_mut(&link.src)
            .unwrap()
            .1
            .push((0, link.src_port, coloring[&link.dst], link.dst_port));
        desc.get_mut(&link.dst)
            .unwrap()
            .1
            .push((1, link.dst_port, coloring[&link.src], link.src_port));
    }
    for (_, entry) in desc.iter_mut() {
        entry.1.sort();
    }
    compress(&desc)
}

fn refine_to_fixpoint(net: &Net, mut coloring: Coloring) -> Coloring {
    loop {
        let next = refine_step(net, &coloring);
        let classes = |c: &Coloring| c.values().collect::<BTreeSet<_>>().len();
        if classes(&next) == classes(&coloring) {
            return next;
        }
        coloring = next;
    }
}

/// Canonical key of a connected net via individualization-refinement: at each
/// level the smallest non-singleton color class is split by individualizing
/// each member in turn; the lexicographically least serialized form wins.
fn canonical_connected(net: &Net) -> (Net, String) {
    let coloring = refine_to_fixpoint(net, initial_coloring(net));
    let mut best: Option<(String, Net)> = None;
    search(net, &coloring, &mut best);
    let (key, relabeled) = best.expect("connected net has at least one labeling");
    (relabeled, key)
}

fn search(net: &Net, coloring: &Coloring, best: &mut Option<(String, Net)>) {
    // Group nodes by color; colors are already refined.
    let mut classes: BTreeMap<u64, Vec<NodeId>> = BTreeMap::new();
    for (&id, &c) in coloring {
        classes.entry(c).or_default().push(id);
    }
    if let Some((_, members)) = classes.iter().find(|(_, m)| m.len() > 1) {
        let fresh = coloring.values().max().copied().unwrap_or(0) + 1;
        for &pick in members {
            let mut next = coloring.clone();
            next.insert(pick, fresh);
            let refined = refine_to_fixpoint(net, next);
            search(net, &refined, best);
        }
        return;
    }
    // Discrete coloring: the color order is the canonical node order.
    let mut order: Vec<(u64, NodeId)> = coloring.iter().map(|(&id, &c)| (c, id)).collect();
    order.sort();
    let relabel: BTreeMap<NodeId, NodeId> = order
        .iter()
        .enumerate()
        .map(|(i, &(_, id))| (id, (i + 1) as NodeId))
        .collect();
    let candidate = net.relabel_ids(&relabel);
    let key = key_of(&candidate);
    match best {
        Some((best_key, _)) if *best_key <= key => {}
        _ => *best = Some((key, candidate)),
    }
}

/// Canonical form of an arbitrary (possibly disconnected, possibly empty)
/// net: components are canonicalized independently, sorted by key, and
/// renumbered consecutively.
pub fn canonical_form(net: &Net) -> CanonicalForm {
    if net.is_empty() {
        return CanonicalForm {
            net: Net::empty(),
            key: String::new(),
        };
    }
    let mut parts: Vec<(String, Net)> = net
        .connected_components()
        .into_iter()
        .map(|comp| {
            let piece = net.induced(&comp);
            let (canon, key) = canonical_connected(&piece);
            (key, canon)
        })
        .collect();
    parts.sort();
    let mut merged = Net::empty();
    for (_, part) in parts {
        merged = merged.disjoint_union(&part);
    }
    // Re-key the merged net so the key covers cross-component numbering.
    let key = key_of(&merged);
    CanonicalForm { net: merged, key }
}

pub fn canonical_key(net: &Net) -> String {
    canonical_form(net).key
}

pub fn is_isomorphic(a: &Net, b: &Net) -> bool {
    if a.node_count() != b.node_count()
        || a.links().len() != b.links().len()
        || a.frontier().len() != b.frontier().len()
    {
        return false;
    }
    canonical_key(a) == canonical_key(b)
}

/// A finite set of nets up to isomorphism, iterated in canonical-key order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Jungle {
    members: BTreeMap<String, Net>,
}

impl Jungle {
    pub fn new() -> Self {
        Jungle::default()
    }

    pub fn from_nets(nets: impl IntoIterator<Item = Net>) -> Self {
        let mut j = Jungle::new();
        for net in nets {
            j.insert(net);
        }
        j
    }

    /// Inserts the canonical representative; returns true if it was new.
    pub fn insert(&mut self, net: Net) -> bool {
        let form = canonical_form(&net);
        self.members.insert(form.key, form.net).is_none()
    }

    pub fn contains(&self, net: &Net) -> bool {
        self.members.contains_key(&canonical_key(net))
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.members.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in canonical-key order.
    pub fn iter(&self) -> impl Iterator<Item = &Net> {
        self.members.values()
    }

    pub fn iter_keyed(&self) -> impl Iterator<Item = (&String, &Net)> {
        self.members.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.members.keys()
    }

    pub fn is_subset(&self, other: &Jungle) -> bool {
        self.members.keys().all(|k| other.members.contains_key(k))
    }

    pub fn union(&self, other: &Jungle) -> Jungle {
        let mut members = self.members.clone();
        for (k, v) in &other.members {
            members.entry(k.clone()).or_insert_with(|| v.clone());
        }
        Jungle { members }
    }

    pub fn intersection(&self, other: &Jungle) -> Jungle {
        Jungle {
            members: self
                .members
                .iter()
                .filter(|(k, _)| other.members.contains_key(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn difference(&self, other: &Jungle) -> Jungle {
        Jungle {
            members: self
                .members
                .iter()
                .filter(|(k, _)| !other.members.contains_key(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

impl FromIterator<Net> for Jungle {
    fn from_iter<T: IntoIterator<Item = Net>>(iter: T) -> Self {
        Jungle::from_nets(iter)
    }
}

impl Extend<Net> for Jungle {
    fn extend<T: IntoIterator<Item = Net>>(&mut self, iter: T) {
        for net in iter {
            self.insert(net);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::*;
    use crate::net::{FrontierLabel, Link, Port, RankedLetter};

    fn relabeled_chain2() -> Net {
        // Same shape as CHAIN2 but with ids 7 and 3.
        Net::build(
            [
                (7, RankedLetter::new("a", 0, 1)),
                (3, RankedLetter::new("b", 1, 0)),
            ],
            [Link::new(7, 1, 3, 1)],
            [],
        )
    }

    #[test]
    fn isomorphism_ignores_node_ids() {
        assert!(is_isomorphic(&chain2(), &relabeled_chain2()));
    }

    #[test]
    fn isomorphism_distinguishes_letters() {
        assert!(!is_isomorphic(&single_a(), &single_c()));
    }

    #[test]
    fn isomorphism_distinguishes_frontier_labels() {
        let with_x = Net::build(
            [(1, RankedLetter::new("a", 0, 1))],
            [],
            [(Port::output(1, 1), FrontierLabel::manoeuvre("x"))],
        );
        let with_y = Net::build(
            [(1, RankedLetter::new("a", 0, 1))],
            [],
            [(Port::output(1, 1), FrontierLabel::manoeuvre("y"))],
        );
        assert!(!is_isomorphic(&with_x, &with_y));
        assert!(is_isomorphic(&with_x, &with_x.offset_ids(5)));
    }

    #[test]
    fn canonical_form_is_stable_under_relabeling() {
        let a = canonical_key(&chain2());
        let b = canonical_key(&relabeled_chain2());
        assert_eq!(a, b);
        let again = canonical_key(&canonical_form(&chain2()).net);
        assert_eq!(a, again);
    }

    #[test]
    fn symmetric_cycle_canonicalizes() {
        // Directed 4-cycle of identical letters: every rotation must agree.
        let cycle = |ids: [NodeId; 4]| {
            Net::build(
                ids.map(|i| (i, RankedLetter::new("r", 1, 1))),
                [
                    Link::new(ids[0], 1, ids[1], 1),
                    Link::new(ids[1], 1, ids[2], 1),
                    Link::new(ids[2], 1, ids[3], 1),
                    Link::new(ids[3], 1, ids[0], 1),
                ],
                [],
            )
        };
        assert_eq!(
            canonical_key(&cycle([1, 2, 3, 4])),
            canonical_key(&cycle([4, 1, 3, 2]))
        );
    }

    #[test]
    fn jungle_dedups_up_to_isomorphism() {
        let j = Jungle::from_nets([chain2(), relabeled_chain2(), single_a()]);
        assert_eq!(j.len(), 2);
        assert!(j.contains(&chain2()));
    }

    #[test]
    fn disconnected_nets_canonicalize_componentwise() {
        let ab = single_a().disjoint_union(&single_c());
        let ba = single_c().disjoint_union(&single_a());
        assert!(is_isomorphic(&ab, &ba));
    }
}
