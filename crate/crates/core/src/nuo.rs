//! Block-cover decompositions of nets and their reconstruction.
//!
//! A representation splits a net into a context element plus indexed,
//! possibly overlapping subnet blocks whose union covers the net. Blocks
//! are classified inward when they connect into the context and outward
//! when they connect out of it, ties toward inward. The original link set
//! is carried as glue so reconstruction is exact; overlapping nodes are
//! recorded explicitly.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded, Countdown};
use crate::matching::{connected_subsets, occurrences};
use crate::net::{FrontierLabel, Link, Net, NodeId, Port};
use crate::rns::ConditionHook;

/// One cover element: the node subset it occupies in the source net plus
/// the induced subnet (original node ids preserved).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverElement {
    pub node_set: BTreeSet<NodeId>,
    pub net: Net,
}

impl CoverElement {
    fn of(source: &Net, node_set: BTreeSet<NodeId>) -> Self {
        let net = source.induced(&node_set);
        CoverElement { node_set, net }
    }
}

/// Where a block sits relative to the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BlockSide {
    Inward,
    Outward,
}

/// Reference to a block of a representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockRef {
    pub side: BlockSide,
    pub index: usize,
}

/// A context plus indexed blocks covering a net, with glue links and the
/// recorded overlaps. Reconstruction via [`nuo_inverse`] is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NuoRepresentation {
    pub context: CoverElement,
    pub inward: Vec<CoverElement>,
    pub outward: Vec<CoverElement>,
    /// (block, context node) pairs for nodes shared with the context.
    pub overlap: Vec<(BlockRef, NodeId)>,
    /// The source net's full link set; the glue for reconstruction.
    pub glue_links: BTreeSet<Link>,
    pub condition: ConditionHook,
}

impl NuoRepresentation {
    pub fn blocks(&self) -> impl Iterator<Item = (BlockRef, &CoverElement)> {
        let inward = self.inward.iter().enumerate().map(|(i, e)| {
            (
                BlockRef {
                    side: BlockSide::Inward,
                    index: i,
                },
                e,
            )
        });
        let outward = self.outward.iter().enumerate().map(|(i, e)| {
            (
                BlockRef {
                    side: BlockSide::Outward,
                    index: i,
                },
                e,
            )
        });
        inward.chain(outward)
    }

    pub fn block(&self, r: BlockRef) -> &CoverElement {
        match r.side {
            BlockSide::Inward => &self.inward[r.index],
            BlockSide::Outward => &self.outward[r.index],
        }
    }

    /// Context plus all blocks, context first.
    pub fn elements(&self) -> Vec<&CoverElement> {
        let mut out = vec![&self.context];
        out.extend(self.inward.iter());
        out.extend(self.outward.iter());
        out
    }

    pub fn block_count(&self) -> usize {
        self.inward.len() + self.outward.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NuoError {
    #[error("cover does not reach nodes {missing:?} of the source net")]
    NotACover { missing: Vec<NodeId> },
    #[error("cover element {index} is not a subnet occurrence of the source")]
    NotASubnet { index: usize },
    #[error("context choice {index} is out of range for a cover of {len} elements")]
    BadIndex { index: usize, len: usize },
    #[error("shared node {node} carries conflicting letters `{first}` and `{second}`")]
    InconsistentOverlap {
        node: NodeId,
        first: String,
        second: String,
    },
    #[error("glued net is invalid: {detail}")]
    BadGlue { detail: String },
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Decomposes `net` along a cover given as node subsets; `context_choice`
/// selects the context element.
pub fn nuo_decompose_sets(
    net: &Net,
    cover: &[BTreeSet<NodeId>],
    context_choice: usize,
) -> Result<NuoRepresentation, NuoError> {
    if context_choice >= cover.len() {
        return Err(NuoError::BadIndex {
            index: context_choice,
            len: cover.len(),
        });
    }
    let all: BTreeSet<NodeId> = net.node_ids();
    let covered: BTreeSet<NodeId> = cover.iter().flatten().copied().collect();
    let missing: Vec<NodeId> = all.difference(&covered).copied().collect();
    if !missing.is_empty() {
        return Err(NuoError::NotACover { missing });
    }
    for (i, part) in cover.iter().enumerate() {
        if !part.iter().all(|n| all.contains(n)) {
            return Err(NuoError::NotASubnet { index: i });
        }
    }

    let context = CoverElement::of(net, cover[context_choice].clone());
    let mut inward = Vec::new();
    let mut outward = Vec::new();
    for (i, part) in cover.iter().enumerate() {
        if i == context_choice {
            continue;
        }
        let element = CoverElement::of(net, part.clone());
        match classify_side(net, part, &context.node_set) {
            BlockSide::Inward => inward.push(element),
            BlockSide::Outward => outward.push(element),
        }
    }

    let mut rep = NuoRepresentation {
        context,
        inward,
        outward,
        overlap: Vec::new(),
        glue_links: net.links().clone(),
        condition: ConditionHook::always_true(),
    };
    let overlap: Vec<(BlockRef, NodeId)> = rep
        .blocks()
        .flat_map(|(r, e)| {
            e.node_set
                .intersection(&rep.context.node_set)
                .map(move |&n| (r, n))
                .collect::<Vec<_>>()
        })
        .collect();
    rep.overlap = overlap;
    Ok(rep)
}

/// A block connecting into the context is inward, out of it outward; blocks
/// linked both ways or not at all default to inward.
fn classify_side(net: &Net, block: &BTreeSet<NodeId>, context: &BTreeSet<NodeId>) -> BlockSide {
    let mut into_context = false;
    let mut out_of_context = false;
    for link in net.links() {
        let src_in_block = block.contains(&link.src) && !context.contains(&link.src);
        let dst_in_block = block.contains(&link.dst) && !context.contains(&link.dst);
        let src_in_ctx = context.contains(&link.src);
        let dst_in_ctx = context.contains(&link.dst);
        if src_in_block && dst_in_ctx {
            into_context = true;
        }
        if src_in_ctx && dst_in_block {
            out_of_context = true;
        }
    }
    if out_of_context && !into_context {
        BlockSide::Outward
    } else {
        BlockSide::Inward
    }
}

/// Decomposes `net` along a cover given as nets; each cover net is resolved
/// to its first occurrence (canonical order) in the source.
pub fn nuo_decompose(
    net: &Net,
    cover: &[Net],
    context_choice: usize,
    budget: &Budget,
) -> Result<NuoRepresentation, NuoError> {
    let mut sets = Vec::new();
    let mut claimed: BTreeSet<NodeId> = BTreeSet::new();
    for (i, part) in cover.iter().enumerate() {
        let occ = occurrences(part, net, budget)?;
        // Prefer an occurrence adding uncovered nodes, so that covers given
        // as isomorphic copies resolve to distinct regions.
        let chosen = occ
            .iter()
            .find(|s| !s.iter().all(|n| claimed.contains(n)))
            .or_else(|| occ.first())
            .ok_or(NuoError::NotASubnet { index: i })?;
        claimed.extend(chosen.iter().copied());
        sets.push(chosen.clone());
    }
    nuo_decompose_sets(net, &sets, context_choice)
}

/// Glues context and blocks along overlap and links; the result is the net
/// the representation was decomposed from.
pub fn nuo_inverse(rep: &NuoRepresentation) -> Result<Net, NuoError> {
    let mut nodes: BTreeMap<NodeId, crate::net::RankedLetter> = BTreeMap::new();
    for element in rep.elements() {
        for (&id, letter) in element.net.nodes() {
            match nodes.get(&id) {
                Some(existing) if existing != letter => {
                    return Err(NuoError::InconsistentOverlap {
                        node: id,
                        first: existing.name.clone(),
                        second: letter.name.clone(),
                    });
                }
                _ => {
                    nodes.insert(id, letter.clone());
                }
            }
        }
    }

    let links = rep.glue_links.clone();
    for link in &links {
        if !nodes.contains_key(&link.src) || !nodes.contains_key(&link.dst) {
            return Err(NuoError::BadGlue {
                detail: format!("glue link {link} references a node outside the cover"),
            });
        }
    }

    let linked: BTreeSet<Port> = links
        .iter()
        .flat_map(|l| [l.source(), l.target()])
        .collect();
    let mut frontier: BTreeMap<Port, FrontierLabel> = BTreeMap::new();
    for element in rep.elements() {
        for (port, label) in element.net.frontier() {
            if !linked.contains(port) {
                frontier.entry(*port).or_insert_with(|| label.clone());
            }
        }
    }

    let net = Net::from_parts(nodes, links, frontier);
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(NuoError::BadGlue {
            detail: violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    Ok(net)
}

/// A grade-nested representation: the top-level decomposition plus, above
/// grade one, a full nested decomposition per block.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedRep {
    pub rep: NuoRepresentation,
    pub refinements: Vec<(BlockRef, GradedRep)>,
}

impl GradedRep {
    /// Union of the block node sets at the deepest grade; covers never lose
    /// nodes, so this equals the union at every shallower grade.
    pub fn deep_block_nodes(&self) -> BTreeSet<NodeId> {
        if self.refinements.is_empty() {
            self.rep
                .elements()
                .iter()
                .flat_map(|e| e.node_set.iter().copied())
                .collect()
        } else {
            let mut out: BTreeSet<NodeId> = self.rep.context.node_set.clone();
            for (_, nested) in &self.refinements {
                out.extend(nested.deep_block_nodes());
            }
            out
        }
    }
}

/// Enumerates every cover of `net` by connected subnets, as lists of node
/// subsets, in deterministic order.
pub fn enumerate_covers(
    net: &Net,
    budget: &Budget,
) -> Result<Vec<Vec<BTreeSet<NodeId>>>, BudgetExceeded> {
    let parts = connected_subsets(net, budget)?;
    let all: BTreeSet<NodeId> = net.node_ids();
    let mut countdown = Countdown::new("enumerate_covers", budget.candidates);
    let mut out = Vec::new();
    // Subset enumeration over the connected parts; a cover is any subset
    // whose union is the full node set.
    let n = parts.len();
    if n > 20 {
        return Err(BudgetExceeded::candidates("enumerate_covers", budget.candidates));
    }
    for mask in 1u32..(1 << n) {
        let chosen: Vec<&BTreeSet<NodeId>> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &parts[i])
            .collect();
        let union: BTreeSet<NodeId> = chosen.iter().flat_map(|s| s.iter().copied()).collect();
        if union == all {
            countdown.tick()?;
            out.push(chosen.into_iter().cloned().collect());
        }
    }
    Ok(out)
}

/// Enumerates grade-nested representations. Grade one lists every cover by
/// connected subnets crossed with every context choice; each further grade
/// recursively decomposes every block the same way.
pub fn nuo_grade(net: &Net, grade: usize, budget: &Budget) -> Result<Vec<GradedRep>, NuoError> {
    assert!(grade >= 1, "grade must be at least 1");
    let mut countdown = Countdown::new("nuo_grade", budget.candidates);
    nuo_grade_inner(net, grade, budget, &mut countdown)
}

fn nuo_grade_inner(
    net: &Net,
    grade: usize,
    budget: &Budget,
    countdown: &mut Countdown,
) -> Result<Vec<GradedRep>, NuoError> {
    let mut out = Vec::new();
    for cover in enumerate_covers(net, budget)? {
        for context_choice in 0..cover.len() {
            let rep = nuo_decompose_sets(net, &cover, context_choice)?;
            if grade == 1 {
                countdown.tick()?;
                out.push(GradedRep {
                    rep,
                    refinements: Vec::new(),
                });
            } else {
                // Every block is refined one grade deeper, all combinations.
                let block_refs: Vec<BlockRef> = rep.blocks().map(|(r, _)| r).collect();
                let mut options: Vec<Vec<(BlockRef, GradedRep)>> = Vec::new();
                for r in &block_refs {
                    let nested = nuo_grade_inner(&rep.block(*r).net, grade - 1, budget, countdown)?;
                    options.push(nested.into_iter().map(|g| (*r, g)).collect());
                }
                let mut combos: Vec<Vec<(BlockRef, GradedRep)>> = vec![Vec::new()];
                for opts in options {
                    let mut next = Vec::new();
                    for combo in &combos {
                        for opt in &opts {
                            let mut extended = combo.clone();
                            extended.push(opt.clone());
                            next.push(extended);
                        }
                    }
                    combos = next;
                }
                for refinements in combos {
                    countdown.tick()?;
                    out.push(GradedRep {
                        rep: rep.clone(),
                        refinements,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jungle::is_isomorphic;
    use crate::net::fixtures::*;
    use crate::net::RankedLetter;

    #[test]
    fn trivial_cover_decomposes_to_a_bare_context() {
        let rep = nuo_decompose(&single_a(), &[single_a()], 0, &Budget::desk()).unwrap();
        assert_eq!(rep.block_count(), 0);
        assert!(is_isomorphic(&rep.context.net, &single_a()));
    }

    #[test]
    fn chain2_two_block_decomposition_reconstructs() {
        let a_part = chain2().induced(&BTreeSet::from([1]));
        let b_part = chain2().induced(&BTreeSet::from([2]));
        let rep = nuo_decompose(&chain2(), &[a_part, b_part], 0, &Budget::desk()).unwrap();
        assert_eq!(rep.block_count(), 1);
        // The b-block receives the link from the a-context: outward.
        assert_eq!(rep.outward.len(), 1);
        let back = nuo_inverse(&rep).unwrap();
        assert!(is_isomorphic(&back, &chain2()));
    }

    #[test]
    fn missing_nodes_fail_as_not_a_cover() {
        let a_part = chain2().induced(&BTreeSet::from([1]));
        let err = nuo_decompose(&chain2(), &[a_part], 0, &Budget::desk()).unwrap_err();
        assert!(matches!(err, NuoError::NotACover { missing } if missing == vec![2]));
    }

    #[test]
    fn bad_context_index_is_reported() {
        let err = nuo_decompose(&single_a(), &[single_a()], 3, &Budget::desk()).unwrap_err();
        assert!(matches!(err, NuoError::BadIndex { index: 3, len: 1 }));
    }

    #[test]
    fn overlapping_blocks_share_nodes_once() {
        // Both elements contain node 2; reconstruction has it exactly once.
        let whole = chain2();
        let left = BTreeSet::from([1, 2]);
        let right = BTreeSet::from([2]);
        let rep = nuo_decompose_sets(&whole, &[left, right], 0).unwrap();
        assert_eq!(rep.overlap.len(), 1);
        assert_eq!(rep.overlap[0].1, 2);
        let back = nuo_inverse(&rep).unwrap();
        assert_eq!(back.node_count(), 2);
        assert!(is_isomorphic(&back, &chain2()));
    }

    #[test]
    fn inverse_of_trivial_representation_is_identity() {
        let rep = nuo_decompose(&single_a(), &[single_a()], 0, &Budget::desk()).unwrap();
        assert!(is_isomorphic(&nuo_inverse(&rep).unwrap(), &single_a()));
    }

    #[test]
    fn grade_one_of_a_single_node_is_the_trivial_representation() {
        let reps = nuo_grade(&single_a(), 1, &Budget::desk()).unwrap();
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].rep.block_count(), 0);
    }

    #[test]
    fn grade_one_of_chain2_counts_covers_times_context_choices() {
        // Independent count: subsets of the three connected subnets whose
        // union is the whole net, each counted once per element.
        let parts = connected_subsets(&chain2(), &Budget::desk()).unwrap();
        assert_eq!(parts.len(), 3);
        let all: BTreeSet<NodeId> = chain2().node_ids();
        let mut expected = 0;
        for mask in 1u32..(1 << parts.len()) {
            let chosen: Vec<_> = (0..parts.len())
                .filter(|i| mask & (1 << i) != 0)
                .collect();
            let union: BTreeSet<NodeId> = chosen
                .iter()
                .flat_map(|&i| parts[i].iter().copied())
                .collect();
            if union == all {
                expected += chosen.len();
            }
        }
        let reps = nuo_grade(&chain2(), 1, &Budget::desk()).unwrap();
        assert_eq!(reps.len(), expected);
        assert_eq!(expected, 10);
    }

    #[test]
    fn grade_two_of_a_single_node_is_nested_trivial() {
        let reps = nuo_grade(&single_a(), 2, &Budget::desk()).unwrap();
        assert_eq!(reps.len(), 1);
        assert!(reps[0].refinements.is_empty());
    }

    #[test]
    fn every_grade_one_representation_roundtrips() {
        for net in [single_a(), chain2(), loop_net()] {
            for graded in nuo_grade(&net, 1, &Budget::desk()).unwrap() {
                let back = nuo_inverse(&graded.rep).unwrap();
                assert!(is_isomorphic(&back, &net));
            }
        }
    }

    #[test]
    fn deep_block_nodes_are_grade_stable() {
        let chain = chain2();
        for graded in nuo_grade(&chain, 2, &Budget::new(64, 4, 100_000)).unwrap() {
            assert_eq!(graded.deep_block_nodes(), chain.node_ids());
        }
    }

    #[test]
    fn cover_correspondence_holds_for_every_enumerated_cover() {
        let net = chain2();
        let covers = enumerate_covers(&net, &Budget::desk()).unwrap();
        let reps = nuo_grade(&net, 1, &Budget::desk()).unwrap();
        for cover in covers {
            let matching = reps.iter().any(|g| {
                let mut rep_sets: Vec<BTreeSet<NodeId>> = g
                    .rep
                    .elements()
                    .iter()
                    .map(|e| e.node_set.clone())
                    .collect();
                rep_sets.sort();
                let mut cover_sets = cover.clone();
                cover_sets.sort();
                rep_sets == cover_sets
            });
            assert!(matching);
        }
    }

    #[test]
    fn conflicting_overlap_letters_error() {
        let mut rep = nuo_decompose_sets(
            &chain2(),
            &[BTreeSet::from([1, 2]), BTreeSet::from([2])],
            0,
        )
        .unwrap();
        // Corrupt the overlapping block's letter for node 2.
        let bad = Net::build([(2, RankedLetter::new("z", 1, 0))], [], []);
        rep.inward[0].net = bad;
        let err = nuo_inverse(&rep).unwrap_err();
        assert!(matches!(err, NuoError::InconsistentOverlap { node: 2, .. }));
    }
}
