//! Subnet enclosure and pattern embedding.
//!
//! `enclose` enumerates the connected induced sub-nets of a net (links cut
//! at the boundary become positional frontier ports). `match_net` finds all
//! label-, arity- and link-preserving embeddings of a pattern into a target;
//! manoeuvre letters on the pattern frontier bind to whatever the target
//! attaches at the corresponding port, arity letters require an equally
//! labeled open port.

use std::collections::{BTreeMap, BTreeSet};

use crate::budget::{Budget, BudgetExceeded, Countdown};
use crate::jungle::Jungle;
use crate::net::{FrontierLabel, Net, NodeId, Port, PortDir};

/// Enumerates the node sets of all connected induced sub-nets, in a
/// deterministic order. Fails once more than `budget.candidates` subsets
/// have been produced.
pub fn connected_subsets(
    net: &Net,
    budget: &Budget,
) -> Result<Vec<BTreeSet<NodeId>>, BudgetExceeded> {
    let ids: Vec<NodeId> = net.node_ids().into_iter().collect();
    let adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> =
        ids.iter().map(|&id| (id, net.neighbors(id))).collect();
    let mut countdown = Countdown::new("connected_subsets", budget.candidates);
    let mut out = Vec::new();
    // Each subset is produced exactly once, anchored at its minimum node:
    // every neighbor candidate is either included or excluded forever.
    for &anchor in &ids {
        let mut current = BTreeSet::from([anchor]);
        let mut forbidden: BTreeSet<NodeId> = ids.iter().copied().filter(|&n| n < anchor).collect();
        countdown.tick()?;
        out.push(current.clone());
        extend(
            &adjacency,
            &mut current,
            &mut forbidden,
            &mut out,
            &mut countdown,
        )?;
    }
    out.sort();
    Ok(out)
}

fn extend(
    adjacency: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    current: &mut BTreeSet<NodeId>,
    forbidden: &mut BTreeSet<NodeId>,
    out: &mut Vec<BTreeSet<NodeId>>,
    countdown: &mut Countdown,
) -> Result<(), BudgetExceeded> {
    let candidates: Vec<NodeId> = current
        .iter()
        .flat_map(|n| adjacency[n].iter().copied())
        .filter(|m| !current.contains(m) && !forbidden.contains(m))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut excluded_here = Vec::new();
    for m in candidates {
        if forbidden.contains(&m) {
            continue;
        }
        current.insert(m);
        countdown.tick()?;
        out.push(current.clone());
        extend(adjacency, current, forbidden, out, countdown)?;
        current.remove(&m);
        forbidden.insert(m);
        excluded_here.push(m);
    }
    for m in excluded_here {
        forbidden.remove(&m);
    }
    Ok(())
}

/// The set of all connected induced sub-nets of `n` (including `n` itself
/// when connected), as a jungle.
pub fn enclose(net: &Net, budget: &Budget) -> Result<Jungle, BudgetExceeded> {
    let mut jungle = Jungle::new();
    for subset in connected_subsets(net, budget)? {
        jungle.insert(net.induced(&subset));
    }
    Ok(jungle)
}

/// Enclosure of every member of a jungle.
pub fn enclose_jungle(jungle: &Jungle, budget: &Budget) -> Result<Jungle, BudgetExceeded> {
    let mut out = Jungle::new();
    for net in jungle.iter() {
        out = out.union(&enclose(net, budget)?);
    }
    Ok(out)
}

/// All occurrences of `member` inside `host`: node subsets inducing a subnet
/// isomorphic to `member`.
pub fn occurrences(
    member: &Net,
    host: &Net,
    budget: &Budget,
) -> Result<Vec<BTreeSet<NodeId>>, BudgetExceeded> {
    let key = crate::jungle::canonical_key(member);
    let mut out = Vec::new();
    for subset in connected_subsets(host, budget)? {
        if subset.len() == member.node_count()
            && crate::jungle::canonical_key(&host.induced(&subset)) == key
        {
            out.push(subset);
        }
    }
    Ok(out)
}

/// What the target offers at a port matched against a pattern frontier port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Attachment {
    /// The target port is linked; the peer port is recorded. For a pattern
    /// in-port this is the feeding out-port and vice versa.
    Linked(Port),
    /// The target port is itself unbound, labeled as recorded.
    Free(FrontierLabel),
}

/// A label-, arity- and link-preserving embedding of a pattern into a target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Embedding {
    /// Injective node map pattern -> target.
    pub node_map: BTreeMap<NodeId, NodeId>,
    /// For every pattern frontier port: what the target attaches there.
    pub bindings: BTreeMap<Port, Attachment>,
}

impl Embedding {
    /// Target node set covered by the embedding.
    pub fn image(&self) -> BTreeSet<NodeId> {
        self.node_map.values().copied().collect()
    }

    pub fn map_port(&self, p: Port) -> Port {
        Port {
            node: self.node_map[&p.node],
            ..p
        }
    }

    /// Composes two embeddings: `self` embeds p into q, `other` embeds q
    /// into t; the result embeds p into t.
    pub fn compose(&self, other: &Embedding) -> Embedding {
        let node_map: BTreeMap<NodeId, NodeId> = self
            .node_map
            .iter()
            .map(|(&p, &q)| (p, other.node_map[&q]))
            .collect();
        let bindings = self
            .bindings
            .iter()
            .map(|(&port, att)| {
                let mapped = match att {
                    Attachment::Linked(peer) => {
                        if let Some(&t) = other.node_map.get(&peer.node) {
                            Attachment::Linked(Port { node: t, ..*peer })
                        } else {
                            att.clone()
                        }
                    }
                    Attachment::Free(label) => {
                        // The mid-level port may itself be bound deeper.
                        let mid = Port {
                            node: self.node_map[&port.node],
                            ..port
                        };
                        other
                            .bindings
                            .get(&mid)
                            .cloned()
                            .unwrap_or(Attachment::Free(label.clone()))
                    }
                };
                (port, mapped)
            })
            .collect();
        Embedding { node_map, bindings }
    }
}

/// All embeddings of `pattern` into `target`, exhaustively. The empty
/// pattern has no embeddings.
pub fn match_net(
    pattern: &Net,
    target: &Net,
    budget: &Budget,
) -> Result<Vec<Embedding>, BudgetExceeded> {
    if pattern.is_empty() {
        return Ok(Vec::new());
    }
    let pattern_ids: Vec<NodeId> = pattern.node_ids().into_iter().collect();
    let mut countdown = Countdown::new("match_net", budget.candidates);
    let mut out = Vec::new();
    let mut map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    assign(
        pattern,
        target,
        &pattern_ids,
        0,
        &mut map,
        &mut used,
        &mut out,
        &mut countdown,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn assign(
    pattern: &Net,
    target: &Net,
    order: &[NodeId],
    pos: usize,
    map: &mut BTreeMap<NodeId, NodeId>,
    used: &mut BTreeSet<NodeId>,
    out: &mut Vec<Embedding>,
    countdown: &mut Countdown,
) -> Result<(), BudgetExceeded> {
    if pos == order.len() {
        if let Some(embedding) = finish(pattern, target, map) {
            countdown.tick()?;
            out.push(embedding);
        }
        return Ok(());
    }
    let p = order[pos];
    let letter = &pattern.nodes()[&p];
    for (&t, t_letter) in target.nodes() {
        if t_letter != letter || used.contains(&t) {
            continue;
        }
        map.insert(p, t);
        used.insert(t);
        if links_consistent(pattern, target, map, p) {
            assign(pattern, target, order, pos + 1, map, used, out, countdown)?;
        }
        map.remove(&p);
        used.remove(&t);
    }
    Ok(())
}

/// Checks that every pattern link incident to `p` whose endpoints are both
/// mapped corresponds to a target link on the same ports.
fn links_consistent(
    pattern: &Net,
    target: &Net,
    map: &BTreeMap<NodeId, NodeId>,
    p: NodeId,
) -> bool {
    for link in pattern.links() {
        if link.src != p && link.dst != p {
            continue;
        }
        let (Some(&ts), Some(&td)) = (map.get(&link.src), map.get(&link.dst)) else {
            continue;
        };
        let expected = crate::net::Link::new(ts, link.src_port, td, link.dst_port);
        if !target.links().contains(&expected) {
            return false;
        }
    }
    true
}

/// Validates the frontier conditions of a completed node map and collects
/// the bindings.
fn finish(pattern: &Net, target: &Net, map: &BTreeMap<NodeId, NodeId>) -> Option<Embedding> {
    let mut bindings = BTreeMap::new();
    for (port, label) in pattern.frontier() {
        let t_port = Port {
            node: map[&port.node],
            ..*port
        };
        let attachment = match target.link_at(t_port) {
            Some(link) => {
                let peer = match t_port.dir {
                    PortDir::In => link.source(),
                    PortDir::Out => link.target(),
                };
                Attachment::Linked(peer)
            }
            None => Attachment::Free(target.frontier().get(&t_port)?.clone()),
        };
        match label {
            FrontierLabel::Manoeuvre(_) => {}
            FrontierLabel::Arity(a) => {
                // Arity-labeled pattern ports demand an equally labeled open
                // target port.
                match &attachment {
                    Attachment::Free(FrontierLabel::Arity(b)) if a == b => {}
                    _ => return None,
                }
            }
        }
        bindings.insert(*port, attachment);
    }
    Some(Embedding {
        node_map: map.clone(),
        bindings,
    })
}
