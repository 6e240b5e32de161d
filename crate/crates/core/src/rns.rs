//! Renetting systems: rewrite rules over nets, one-step application and the
//! universally-partitioning validator.
//!
//! One application step produces the set of all single-occurrence
//! replacements, over every member net, every rule, every embedding of the
//! rule's left side, and every right-side substitution; the result is
//! deduplicated up to isomorphism. An empty result means no rule matched.
//!
//! Redex replacement rewires boundary links by matching frontier ports of
//! the left side to frontier ports of the right side via shared manoeuvre
//! letters; a boundary link that the right side cannot absorb is a rewire
//! failure, reported per occurrence, never silently dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded, Countdown};
use crate::jungle::Jungle;
use crate::matching::{match_net, Attachment, Embedding};
use crate::net::{FrontierLabel, Link, Net, NodeId, Port, PortDir, Symbol};

/// One right-side substitution: extra manoeuvre letters on the right side
/// mapped to the nets spliced in for them.
pub type Substitution = BTreeMap<Symbol, Net>;

/// A rewrite rule. `substitutions` is the set of alternative right-side
/// substitutions; empty means the singleton identity substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub left: Net,
    pub right: Net,
    pub substitutions: Vec<Substitution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleViolation {
    #[error("rule `{rule}`: left side is empty")]
    EmptyLeft { rule: String },
    #[error("rule `{rule}`: manoeuvre letter `{letter}` repeats on the left frontier")]
    NonLinearLeft { rule: String, letter: Symbol },
    #[error(
        "rule `{rule}`: right-side manoeuvre letter `{letter}` is neither bound on the left nor substituted"
    )]
    UnboundRight { rule: String, letter: Symbol },
}

impl Rule {
    pub fn new(name: impl Into<String>, left: Net, right: Net) -> Self {
        Rule {
            name: name.into(),
            left,
            right,
            substitutions: Vec::new(),
        }
    }

    pub fn with_substitutions(mut self, substitutions: Vec<Substitution>) -> Self {
        self.substitutions = substitutions;
        self
    }

    /// The alternatives actually applied: the identity when none declared.
    pub fn effective_substitutions(&self) -> Vec<Substitution> {
        if self.substitutions.is_empty() {
            vec![Substitution::new()]
        } else {
            self.substitutions.clone()
        }
    }

    pub fn validate(&self) -> Vec<RuleViolation> {
        let mut out = Vec::new();
        if self.left.is_empty() {
            out.push(RuleViolation::EmptyLeft {
                rule: self.name.clone(),
            });
        }
        let mut seen = BTreeSet::new();
        for label in self.left.frontier().values() {
            if let FrontierLabel::Manoeuvre(s) = label {
                if !seen.insert(s.clone()) {
                    out.push(RuleViolation::NonLinearLeft {
                        rule: self.name.clone(),
                        letter: s.clone(),
                    });
                }
            }
        }
        let left_letters = self.left.manoeuvre_letters();
        let substituted: BTreeSet<Symbol> = self
            .substitutions
            .iter()
            .flat_map(|g| g.keys().cloned())
            .collect();
        for letter in self.right.manoeuvre_letters() {
            if !left_letters.contains(&letter) && !substituted.contains(&letter) {
                out.push(RuleViolation::UnboundRight {
                    rule: self.name.clone(),
                    letter,
                });
            }
        }
        out
    }

    /// Stable identity of a rule up to node relabeling of its sides.
    pub fn canonical_signature(&self) -> String {
        let mut sig = format!(
            "L:{}|R:{}",
            crate::jungle::canonical_key(&self.left),
            crate::jungle::canonical_key(&self.right)
        );
        for g in &self.substitutions {
            sig.push_str("|G:");
            for (sym, net) in g {
                sig.push_str(&format!("{}>{};", sym, crate::jungle::canonical_key(net)));
            }
        }
        sig
    }
}

/// Opaque condition hook carried by a rule system. Defaults to always-true.
#[derive(Clone, Default)]
pub struct ConditionHook(Option<Arc<dyn Fn(&Net) -> bool + Send + Sync>>);

impl ConditionHook {
    pub fn always_true() -> Self {
        ConditionHook(None)
    }

    pub fn from_fn(f: impl Fn(&Net) -> bool + Send + Sync + 'static) -> Self {
        ConditionHook(Some(Arc::new(f)))
    }

    pub fn admits(&self, net: &Net) -> bool {
        match &self.0 {
            None => true,
            Some(f) => f(net),
        }
    }
}

impl std::fmt::Debug for ConditionHook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            None => write!(f, "ConditionHook(always-true)"),
            Some(_) => write!(f, "ConditionHook(user)"),
        }
    }
}

impl PartialEq for ConditionHook {
    fn eq(&self, other: &Self) -> bool {
        self.0.is_none() && other.0.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SystemFlags {
    pub uprns_checked: bool,
    pub instance_sensitive: bool,
}

/// A finite set of rewrite rules with a condition hook and type flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSystem {
    pub name: String,
    pub rules: Vec<Rule>,
    pub condition: ConditionHook,
    pub flags: SystemFlags,
}

impl RuleSystem {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>) -> Self {
        let mut sys = RuleSystem {
            name: name.into(),
            rules,
            condition: ConditionHook::always_true(),
            flags: SystemFlags::default(),
        };
        sys.flags.instance_sensitive = sys.recompute_instance_sensitive();
        sys
    }

    pub fn single(rule: Rule) -> Self {
        let name = rule.name.clone();
        RuleSystem::new(name, vec![rule])
    }

    /// A system is instance sensitive iff some rule carries a non-singleton
    /// right-substitution set.
    pub fn recompute_instance_sensitive(&self) -> bool {
        self.rules.iter().any(|r| r.substitutions.len() > 1)
    }

    /// Stable identity of the system: sorted rule signatures.
    pub fn canonical_signature(&self) -> String {
        let mut sigs: Vec<String> = self.rules.iter().map(Rule::canonical_signature).collect();
        sigs.sort();
        sigs.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RnsError {
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
    #[error("rule `{rule}`: {detail} (occurrence at nodes {occurrence:?})")]
    RewireFailure {
        rule: String,
        occurrence: Vec<NodeId>,
        detail: String,
    },
}

/// Applies one rule at one embedding under one substitution.
///
/// The matched occurrence is removed; the substituted right side is spliced
/// in; boundary links are rewired through the shared frontier letters.
pub fn apply_rule_at(
    target: &Net,
    rule: &Rule,
    embedding: &Embedding,
    substitution: &Substitution,
) -> Result<Net, RnsError> {
    let fail = |detail: String| RnsError::RewireFailure {
        rule: rule.name.clone(),
        occurrence: embedding.image().into_iter().collect(),
        detail,
    };

    // Instantiate the right side above the target's ids, splicing in the
    // substituted nets for extra manoeuvre letters.
    let mut rhs = rule.right.offset_ids(target.max_node_id());
    for (letter, net) in substitution {
        rhs = splice_substitution(rhs, letter, net).map_err(&fail)?;
    }

    let region = embedding.image();

    // Boundary letters of the left side and the target attachment each one
    // captured. Ports whose attachment lies inside the region pair up with
    // the letter owning that port.
    let mut port_owner: BTreeMap<Port, Symbol> = BTreeMap::new();
    for (port, label) in rule.left.frontier() {
        if let FrontierLabel::Manoeuvre(s) = label {
            port_owner.insert(embedding.map_port(*port), s.clone());
        }
    }

    #[derive(Debug)]
    enum Captured {
        Outside(Port),
        Inside(Symbol),
        Free(FrontierLabel),
    }

    let mut captured: BTreeMap<Symbol, (PortDir, Captured)> = BTreeMap::new();
    for (port, label) in rule.left.frontier() {
        let FrontierLabel::Manoeuvre(letter) = label else {
            continue;
        };
        let att = &embedding.bindings[port];
        let value = match att {
            Attachment::Linked(peer) if region.contains(&peer.node) => {
                let owner = port_owner
                    .get(peer)
                    .ok_or_else(|| {
                        fail(format!(
                            "link back into the occurrence at {peer} is not captured by any frontier letter"
                        ))
                    })?
                    .clone();
                Captured::Inside(owner)
            }
            Attachment::Linked(peer) => Captured::Outside(*peer),
            Attachment::Free(l) => Captured::Free(l.clone()),
        };
        captured.insert(letter.clone(), (port.dir, value));
    }

    // Right-side ports per manoeuvre letter.
    let mut right_ports: BTreeMap<Symbol, Vec<Port>> = BTreeMap::new();
    for (port, label) in rhs.frontier() {
        if let FrontierLabel::Manoeuvre(s) = label {
            right_ports.entry(s.clone()).or_default().push(*port);
        }
    }

    // Assemble the result: target minus the occurrence, plus the right side.
    let mut nodes: BTreeMap<_, _> = target
        .nodes()
        .iter()
        .filter(|(id, _)| !region.contains(id))
        .map(|(&id, l)| (id, l.clone()))
        .collect();
    nodes.extend(rhs.nodes().iter().map(|(&id, l)| (id, l.clone())));

    let mut links: BTreeSet<Link> = target
        .links()
        .iter()
        .filter(|l| !region.contains(&l.src) && !region.contains(&l.dst))
        .copied()
        .collect();
    links.extend(rhs.links().iter().copied());

    let mut frontier: BTreeMap<Port, FrontierLabel> = target
        .frontier()
        .iter()
        .filter(|(p, _)| !region.contains(&p.node))
        .map(|(p, l)| (*p, l.clone()))
        .collect();
    for (port, label) in rhs.frontier() {
        if !label.is_manoeuvre() {
            frontier.insert(*port, label.clone());
        }
    }

    // Rewire each captured boundary through the right side.
    let mut inside_pairs: BTreeSet<(Symbol, Symbol)> = BTreeSet::new();
    for (letter, (dir, value)) in &captured {
        let ports = right_ports.get(letter).cloned().unwrap_or_default();
        match value {
            Captured::Outside(peer) => {
                let &[right_port] = ports.as_slice() else {
                    return Err(fail(format!(
                        "boundary link through `{letter}` needs exactly one right-side port, found {}",
                        ports.len()
                    )));
                };
                if right_port.dir != *dir {
                    return Err(fail(format!(
                        "boundary letter `{letter}` changes direction between left and right"
                    )));
                }
                let link = match dir {
                    PortDir::In => Link::new(peer.node, peer.index, right_port.node, right_port.index),
                    PortDir::Out => {
                        Link::new(right_port.node, right_port.index, peer.node, peer.index)
                    }
                };
                links.insert(link);
            }
            Captured::Inside(other) => {
                // A link that both leaves and re-enters the occurrence: the
                // two owning letters reconnect on the right side.
                let pair = if *letter <= *other {
                    (letter.clone(), other.clone())
                } else {
                    (other.clone(), letter.clone())
                };
                if !inside_pairs.insert(pair) {
                    continue;
                }
                let (out_letter, in_letter) = match dir {
                    PortDir::Out => (letter.clone(), other.clone()),
                    PortDir::In => (other.clone(), letter.clone()),
                };
                let out_ports = right_ports.get(&out_letter).cloned().unwrap_or_default();
                let in_ports = right_ports.get(&in_letter).cloned().unwrap_or_default();
                let (&[op], &[ip]) = (out_ports.as_slice(), in_ports.as_slice()) else {
                    return Err(fail(format!(
                        "internal boundary through `{out_letter}`/`{in_letter}` needs exactly one right-side port each"
                    )));
                };
                if op.dir != PortDir::Out || ip.dir != PortDir::In {
                    return Err(fail(format!(
                        "internal boundary letters `{out_letter}`/`{in_letter}` have mismatched directions on the right"
                    )));
                }
                links.insert(Link::new(op.node, op.index, ip.node, ip.index));
            }
            Captured::Free(label) => {
                // The environment was open here; right-side ports carrying
                // the letter inherit the open label.
                for p in ports {
                    frontier.insert(p, label.clone());
                }
            }
        }
    }

    // Any right-side manoeuvre port still unwired is an unbound binder.
    for (letter, ports) in &right_ports {
        for p in ports {
            let wired = links
                .iter()
                .any(|l| l.source() == *p || l.target() == *p);
            if !wired && !frontier.contains_key(p) {
                if captured.contains_key(letter) {
                    return Err(fail(format!(
                        "right-side port {p} for `{letter}` was left unwired"
                    )));
                }
                // Letter never bound on the left: keep it as an open binder.
                frontier.insert(*p, FrontierLabel::manoeuvre(letter.clone()));
            }
        }
    }

    let result = Net::from_parts(nodes, links, frontier);
    debug_assert!(result.validate().is_empty(), "rewrite produced an invalid net");
    Ok(result)
}

/// Splices `net` in for every right-side frontier port labeled with the
/// extra manoeuvre letter.
fn splice_substitution(rhs: Net, letter: &str, net: &Net) -> Result<Net, String> {
    let holes: Vec<Port> = rhs
        .frontier()
        .iter()
        .filter(|(_, l)| matches!(l, FrontierLabel::Manoeuvre(s) if s == letter))
        .map(|(p, _)| *p)
        .collect();
    let mut current = rhs;
    for hole in holes {
        let insert = net.offset_ids(current.max_node_id());
        // The spliced net must offer exactly one open port of the opposite
        // direction to fill the hole.
        let mouths: Vec<Port> = insert
            .frontier()
            .keys()
            .filter(|p| p.dir == hole.dir.flip())
            .copied()
            .collect();
        let &[mouth] = mouths.as_slice() else {
            return Err(format!(
                "substitution for `{letter}` must expose exactly one {} port, found {}",
                match hole.dir.flip() {
                    PortDir::In => "in",
                    PortDir::Out => "out",
                },
                mouths.len()
            ));
        };
        let mut nodes = current.nodes().clone();
        nodes.extend(insert.nodes().iter().map(|(&id, l)| (id, l.clone())));
        let mut links = current.links().clone();
        links.extend(insert.links().iter().copied());
        let link = match hole.dir {
            PortDir::In => Link::new(mouth.node, mouth.index, hole.node, hole.index),
            PortDir::Out => Link::new(hole.node, hole.index, mouth.node, mouth.index),
        };
        links.insert(link);
        let mut frontier: BTreeMap<Port, FrontierLabel> = current
            .frontier()
            .iter()
            .filter(|(p, _)| **p != hole)
            .map(|(p, l)| (*p, l.clone()))
            .collect();
        frontier.extend(
            insert
                .frontier()
                .iter()
                .filter(|(p, _)| **p != mouth)
                .map(|(p, l)| (*p, l.clone())),
        );
        current = Net::from_parts(nodes, links, frontier);
    }
    Ok(current)
}

/// One rewrite step of a system over a jungle: the union of all
/// single-occurrence replacements, deduplicated up to isomorphism.
pub fn apply_rns(sys: &RuleSystem, jungle: &Jungle, budget: &Budget) -> Result<Jungle, RnsError> {
    let mut countdown = Countdown::new("apply_rns", budget.candidates);
    let mut out = Jungle::new();
    for member in jungle.iter() {
        if !sys.condition.admits(member) {
            continue;
        }
        for rule in &sys.rules {
            for embedding in match_net(&rule.left, member, budget)? {
                for substitution in rule.effective_substitutions() {
                    countdown.tick()?;
                    let rewritten = apply_rule_at(member, rule, &embedding, &substitution)?;
                    out.insert(rewritten);
                }
            }
        }
    }
    Ok(out)
}

/// Variant used by the derivation oracle: per-occurrence rewire failures are
/// collected instead of aborting, so exploration can flag them explicitly.
pub fn apply_rns_lenient(
    sys: &RuleSystem,
    jungle: &Jungle,
    budget: &Budget,
) -> Result<(Jungle, Vec<RnsError>), BudgetExceeded> {
    let mut countdown = Countdown::new("apply_rns", budget.candidates);
    let mut out = Jungle::new();
    let mut skipped = Vec::new();
    for member in jungle.iter() {
        if !sys.condition.admits(member) {
            continue;
        }
        for rule in &sys.rules {
            for embedding in match_net(&rule.left, member, budget)? {
                for substitution in rule.effective_substitutions() {
                    countdown.tick()?;
                    match apply_rule_at(member, rule, &embedding, &substitution) {
                        Ok(net) => {
                            out.insert(net);
                        }
                        Err(e) => skipped.push(e),
                    }
                }
            }
        }
    }
    Ok((out, skipped))
}

/// A violation of the universally-partitioning conditions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UprnsViolation {
    #[error("rule `{rule}`: drops boundary letter `{letter}` from the right side")]
    DroppedBoundary { rule: String, letter: Symbol },
    #[error("rule `{rule}`: boundary letter `{letter}` changes port direction")]
    BoundaryDirection { rule: String, letter: Symbol },
    #[error("rule `{rule}`: outward rank changes from {left} to {right}")]
    OutwardRank { rule: String, left: usize, right: usize },
    #[error("applying the system to the ground reintroduces labels {labels:?}")]
    LabelsNotDisjoint { labels: Vec<Symbol> },
    #[error("rule `{rule}`: right apex carries {count} non-arity letters, expected exactly one")]
    ApexNotSingleton { rule: String, count: usize },
    #[error("rule `{rule}`: right apex letter `{letter}` already occurs in the ground")]
    ApexNotFresh { rule: String, letter: Symbol },
    #[error("rules `{first}` and `{second}` share an identical (left, right) pair")]
    NotInjective { first: String, second: String },
    #[error("rule `{rule}`: {violation}")]
    Malformed { rule: String, violation: String },
}

/// Checks the universally-partitioning conditions of a system against a
/// ground net:
///
/// 1. every rule preserves its boundary letters and the outward rank count,
/// 2. labels produced by applying the system to the ground are disjoint
///    from the ground's labels,
/// 3. each right apex introduces exactly one non-arity letter, fresh with
///    respect to the ground, and the (left, right) pairing is injective.
pub fn validate_uprns(sys: &RuleSystem, ground: &Net, budget: &Budget) -> Vec<UprnsViolation> {
    let mut out = Vec::new();
    for rule in &sys.rules {
        for v in rule.validate() {
            out.push(UprnsViolation::Malformed {
                rule: rule.name.clone(),
                violation: v.to_string(),
            });
        }
    }

    let ground_labels = ground.letter_names();

    for rule in &sys.rules {
        // (i) boundary preservation: every manoeuvre letter of the left
        // frontier appears on the right frontier with the same direction,
        // and the outward port count is preserved.
        let left_letters: BTreeMap<Symbol, PortDir> = rule
            .left
            .frontier()
            .iter()
            .filter_map(|(p, l)| match l {
                FrontierLabel::Manoeuvre(s) => Some((s.clone(), p.dir)),
                _ => None,
            })
            .collect();
        let right_letters: BTreeMap<Symbol, PortDir> = rule
            .right
            .frontier()
            .iter()
            .filter_map(|(p, l)| match l {
                FrontierLabel::Manoeuvre(s) => Some((s.clone(), p.dir)),
                _ => None,
            })
            .collect();
        for (letter, dir) in &left_letters {
            match right_letters.get(letter) {
                None => out.push(UprnsViolation::DroppedBoundary {
                    rule: rule.name.clone(),
                    letter: letter.clone(),
                }),
                Some(d) if d != dir => out.push(UprnsViolation::BoundaryDirection {
                    rule: rule.name.clone(),
                    letter: letter.clone(),
                }),
                Some(_) => {}
            }
        }
        let out_rank = |n: &Net| n.open_ports(PortDir::Out).len();
        if out_rank(&rule.left) != out_rank(&rule.right) {
            out.push(UprnsViolation::OutwardRank {
                rule: rule.name.clone(),
                left: out_rank(&rule.left),
                right: out_rank(&rule.right),
            });
        }

        // (iii) right apex: exactly one distinct non-arity letter, fresh.
        let apex_letters = rule.right.apex_letters();
        if apex_letters.len() != 1 {
            out.push(UprnsViolation::ApexNotSingleton {
                rule: rule.name.clone(),
                count: apex_letters.len(),
            });
        }
        for letter in &apex_letters {
            if ground_labels.contains(letter) {
                out.push(UprnsViolation::ApexNotFresh {
                    rule: rule.name.clone(),
                    letter: letter.clone(),
                });
            }
        }
    }

    // (iii) injectivity of the (left, right) pairing.
    let mut seen: BTreeMap<(String, String), &Rule> = BTreeMap::new();
    for rule in &sys.rules {
        let key = (
            crate::jungle::canonical_key(&rule.left),
            crate::jungle::canonical_key(&rule.right),
        );
        if let Some(prev) = seen.get(&key) {
            out.push(UprnsViolation::NotInjective {
                first: prev.name.clone(),
                second: rule.name.clone(),
            });
        } else {
            seen.insert(key, rule);
        }
    }

    // (ii) rewritten labels disjoint from the ground's labels.
    let ground_jungle = Jungle::from_nets([ground.clone()]);
    match apply_rns(sys, &ground_jungle, budget) {
        Ok(result) => {
            let mut reintroduced: BTreeSet<Symbol> = BTreeSet::new();
            for net in result.iter() {
                for name in net.letter_names() {
                    if ground_labels.contains(&name) {
                        reintroduced.insert(name);
                    }
                }
            }
            if !reintroduced.is_empty() {
                out.push(UprnsViolation::LabelsNotDisjoint {
                    labels: reintroduced.into_iter().collect(),
                });
            }
        }
        Err(e) => out.push(UprnsViolation::Malformed {
            rule: sys.name.clone(),
            violation: format!("system could not be applied to the ground: {e}"),
        }),
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::*;
    use crate::net::RankedLetter;

    fn relabel_rule(name: &str, from: RankedLetter, to: RankedLetter) -> Rule {
        // Left: single node of `from` with manoeuvre letters on every port;
        // right: same shape relabeled `to`.
        let mut left = Net::single(from.clone());
        let mut right = Net::single(to);
        let mut left_frontier = BTreeMap::new();
        let mut right_frontier = BTreeMap::new();
        for (i, port) in left.ports_of(1).into_iter().enumerate() {
            left_frontier.insert(port, FrontierLabel::manoeuvre(format!("x{i}")));
        }
        for (i, port) in right.ports_of(1).into_iter().enumerate() {
            right_frontier.insert(port, FrontierLabel::manoeuvre(format!("x{i}")));
        }
        left = Net::from_parts(left.nodes().clone(), BTreeSet::new(), left_frontier);
        right = Net::from_parts(right.nodes().clone(), BTreeSet::new(), right_frontier);
        Rule::new(name, left, right)
    }

    #[test]
    fn identity_rewrite_preserves_the_net() {
        let rule = relabel_rule("id_a", RankedLetter::new("a", 0, 1), RankedLetter::new("a", 0, 1));
        let sys = RuleSystem::single(rule);
        let result = apply_rns(&sys, &Jungle::from_nets([chain2()]), &Budget::desk()).unwrap();
        assert_eq!(result.len(), 1);
        assert!(result.contains(&chain2()));
    }

    #[test]
    fn closed_relabel_replaces_the_node() {
        let rule = relabel_rule("a_to_c", RankedLetter::new("a", 0, 0), RankedLetter::new("c", 0, 0));
        let sys = RuleSystem::single(rule);
        let result = apply_rns(&sys, &Jungle::from_nets([single_a()]), &Budget::desk()).unwrap();
        assert_eq!(result.len(), 1);
        assert!(result.contains(&single_c()));
    }

    #[test]
    fn frontier_preserving_relabel_keeps_the_environment() {
        let rule = relabel_rule("a_to_c", RankedLetter::new("a", 0, 1), RankedLetter::new("c", 0, 1));
        let sys = RuleSystem::single(rule);
        let result = apply_rns(&sys, &Jungle::from_nets([chain2()]), &Budget::desk()).unwrap();
        let expected = Net::build(
            [
                (1, RankedLetter::new("c", 0, 1)),
                (2, RankedLetter::new("b", 1, 0)),
            ],
            [Link::new(1, 1, 2, 1)],
            [],
        );
        assert_eq!(result.len(), 1);
        assert!(result.contains(&expected));
    }

    #[test]
    fn rewrite_through_a_loop_reconnects_both_ends() {
        let rule = relabel_rule("a_to_c", RankedLetter::new("a", 1, 1), RankedLetter::new("c", 1, 1));
        let sys = RuleSystem::single(rule);
        let result = apply_rns(&sys, &Jungle::from_nets([loop_net()]), &Budget::desk()).unwrap();
        let expected = Net::build(
            [(1, RankedLetter::new("c", 1, 1))],
            [Link::new(1, 1, 1, 1)],
            [],
        );
        assert_eq!(result.len(), 1);
        assert!(result.contains(&expected));
    }

    #[test]
    fn dropped_boundary_is_a_rewire_failure() {
        // Left binds x, right has no port for it: a boundary link dies.
        let left = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("a", 0, 1))]),
            BTreeSet::new(),
            BTreeMap::from([(Port::output(1, 1), FrontierLabel::manoeuvre("x"))]),
        );
        let right = Net::single(RankedLetter::new("c", 0, 0));
        let rule = Rule::new("drop", left, right);
        let sys = RuleSystem::single(rule);
        let err = apply_rns(&sys, &Jungle::from_nets([chain2()]), &Budget::desk()).unwrap_err();
        assert!(matches!(err, RnsError::RewireFailure { .. }));
    }

    #[test]
    fn dropping_an_open_boundary_is_fine() {
        // Same rule, but the environment is open at the matched port.
        let left = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("a", 0, 1))]),
            BTreeSet::new(),
            BTreeMap::from([(Port::output(1, 1), FrontierLabel::manoeuvre("x"))]),
        );
        let right = Net::single(RankedLetter::new("c", 0, 0));
        let rule = Rule::new("drop_open", left, right);
        let sys = RuleSystem::single(rule);
        let a_open = Net::single(RankedLetter::new("a", 0, 1));
        let result = apply_rns(&sys, &Jungle::from_nets([a_open]), &Budget::desk()).unwrap();
        assert!(result.contains(&Net::single(RankedLetter::new("c", 0, 0))));
    }

    #[test]
    fn no_match_yields_the_empty_jungle() {
        let rule = relabel_rule("c_to_a", RankedLetter::new("c", 0, 0), RankedLetter::new("a", 0, 0));
        let sys = RuleSystem::single(rule);
        let result = apply_rns(&sys, &Jungle::from_nets([single_a()]), &Budget::desk()).unwrap();
        assert!(result.is_empty());
    }

    #[test]
    fn application_is_monotone_in_the_rule_set() {
        let r1 = relabel_rule("a_to_c", RankedLetter::new("a", 0, 0), RankedLetter::new("c", 0, 0));
        let r2 = relabel_rule("a_to_d", RankedLetter::new("a", 0, 0), RankedLetter::new("d", 0, 0));
        let small = RuleSystem::new("small", vec![r1.clone()]);
        let big = RuleSystem::new("big", vec![r1, r2]);
        let start = Jungle::from_nets([single_a()]);
        let small_result = apply_rns(&small, &start, &Budget::desk()).unwrap();
        let big_result = apply_rns(&big, &start, &Budget::desk()).unwrap();
        assert!(small_result.is_subset(&big_result));
    }

    #[test]
    fn substitution_splices_extra_variables() {
        // a -> e(x) where x is substituted by a closed-ish net with one
        // open out-port feeding e.
        let left = Net::single(RankedLetter::new("a", 0, 0));
        let right = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("e", 1, 0))]),
            BTreeSet::new(),
            BTreeMap::from([(Port::input(1, 1), FrontierLabel::manoeuvre("x"))]),
        );
        let feeder = Net::single(RankedLetter::new("f", 0, 1));
        let g1 = Substitution::from([("x".to_string(), feeder)]);
        let rule = Rule::new("subst", left, right).with_substitutions(vec![g1]);
        let sys = RuleSystem::single(rule);
        let result = apply_rns(&sys, &Jungle::from_nets([single_a()]), &Budget::desk()).unwrap();
        let expected = Net::build(
            [
                (1, RankedLetter::new("e", 1, 0)),
                (2, RankedLetter::new("f", 0, 1)),
            ],
            [Link::new(2, 1, 1, 1)],
            [],
        );
        assert_eq!(result.len(), 1);
        assert!(result.contains(&expected));
    }

    #[test]
    fn instance_sensitivity_tracks_substitution_count() {
        let left = Net::single(RankedLetter::new("a", 0, 0));
        let right = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("e", 1, 0))]),
            BTreeSet::new(),
            BTreeMap::from([(Port::input(1, 1), FrontierLabel::manoeuvre("x"))]),
        );
        let g1 = Substitution::from([("x".to_string(), Net::single(RankedLetter::new("f", 0, 1)))]);
        let g2 = Substitution::from([("x".to_string(), Net::single(RankedLetter::new("g", 0, 1)))]);
        let rule = Rule::new("multi", left, right).with_substitutions(vec![g1, g2]);
        let sys = RuleSystem::single(rule);
        assert!(sys.flags.instance_sensitive);
        let result = apply_rns(&sys, &Jungle::from_nets([single_a()]), &Budget::desk()).unwrap();
        assert_eq!(result.len(), 2);
    }

    fn fresh_relabel(name: &str, from: &str, to: &str) -> Rule {
        relabel_rule(name, RankedLetter::new(from, 0, 0), RankedLetter::new(to, 0, 0))
    }

    #[test]
    fn uprns_accepts_a_fresh_arity_preserving_rule() {
        let sys = RuleSystem::single(fresh_relabel("fresh", "a", "w"));
        let diags = validate_uprns(&sys, &single_a(), &Budget::desk());
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn uprns_rejects_two_fresh_apex_letters() {
        let left = Net::single(RankedLetter::new("a", 0, 0));
        let right = Net::single(RankedLetter::new("w", 0, 0))
            .disjoint_union(&Net::single(RankedLetter::new("v", 0, 0)));
        let sys = RuleSystem::single(Rule::new("two_apex", left, right));
        let diags = validate_uprns(&sys, &single_a(), &Budget::desk());
        assert!(diags
            .iter()
            .any(|d| matches!(d, UprnsViolation::ApexNotSingleton { count: 2, .. })));
    }

    #[test]
    fn uprns_rejects_duplicate_rule_pairs() {
        let sys = RuleSystem::new(
            "dup",
            vec![fresh_relabel("r1", "a", "w"), fresh_relabel("r2", "a", "w")],
        );
        let diags = validate_uprns(&sys, &single_a(), &Budget::desk());
        assert!(diags
            .iter()
            .any(|d| matches!(d, UprnsViolation::NotInjective { .. })));
    }

    #[test]
    fn uprns_rejects_stale_labels() {
        // Rewriting a to itself keeps a ground label in the image.
        let sys = RuleSystem::single(fresh_relabel("stale", "a", "a"));
        let diags = validate_uprns(&sys, &single_a(), &Budget::desk());
        assert!(diags
            .iter()
            .any(|d| matches!(d, UprnsViolation::LabelsNotDisjoint { .. })));
        assert!(diags
            .iter()
            .any(|d| matches!(d, UprnsViolation::ApexNotFresh { .. })));
    }
}
