//! Synthesis of parallel rule pairs that commute with abstraction.
//!
//! Given a net `k`, two alphabetical abstracting homomorphisms whose block
//! domains cover it, and a rule with a redex in the first image, the
//! synthesizer constructs:
//!
//! - `micro`: the rule pulled back onto `k` itself — its left side is the
//!   preimage of the redex, its right side the rule's right side;
//! - `hom3`: a homomorphism over the common refinement of both covers;
//! - `ferp`: the re-representation rule carrying the second image onto the
//!   refined abstraction of `k`;
//! - `serp`: the abstracted rewrite performed after the re-representation;
//! - `hom01`, `hom02`: the intervening homomorphisms (equal block domains)
//!   closing the two commutation equations, which `verify_commutation`
//!   evaluates by direct rewriting and isomorphism comparison.
//!
//! On top of the synthesizer sit the finite-sample operations: fixed
//! parallel sets over a declared context universe, entangling classes with
//! their mediatory sets, the participatory center, the hermeneutic rule
//! area, and the generation closure over the first-rule components.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded, Countdown};
use crate::jungle::{canonical_key, is_isomorphic, Jungle};
use crate::matching::{match_net, occurrences, Attachment, Embedding};
use crate::nbh::{
    apply_nbh_traced, BlockHomomorphism, BlockImage, NbhApplication, NbhError,
};
use crate::net::{FrontierLabel, Net, NodeId, Port, Symbol};
use crate::nuo::{nuo_decompose_sets, NuoError, NuoRepresentation};
use crate::rns::{apply_rule_at, RnsError, Rule, RuleSystem, Substitution};

/// The coarsest partition of the union in which every input set is a union
/// of cells: elements are grouped by their membership signature.
pub fn pi_partition<T: Ord + Clone>(family: &[BTreeSet<T>]) -> Vec<BTreeSet<T>> {
    let mut signature: BTreeMap<&T, Vec<usize>> = BTreeMap::new();
    for (i, set) in family.iter().enumerate() {
        for element in set {
            signature.entry(element).or_default().push(i);
        }
    }
    let mut cells: BTreeMap<Vec<usize>, BTreeSet<T>> = BTreeMap::new();
    for (element, sig) in signature {
        cells.entry(sig).or_default().insert(element.clone());
    }
    let mut out: Vec<BTreeSet<T>> = cells.into_values().collect();
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("the homomorphism `{hom}` has no partition cover of the context net")]
    NoCover { hom: String },
    #[error("the rule has no redex in the abstracted image")]
    NoRedex,
    #[error("no right-side preimage could be constructed: {detail}")]
    PreimageNotFound { detail: String },
    #[error("rules with multiple right-side substitutions are not synthesizable here")]
    InstanceSensitive,
    #[error("context net frontier repeats manoeuvre letter `{letter}`")]
    FrontierNotLinear { letter: Symbol },
    #[error(transparent)]
    Nbh(#[from] NbhError),
    #[error(transparent)]
    Nuo(#[from] NuoError),
    #[error(transparent)]
    Rns(#[from] RnsError),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Everything the verifier needs to replay the construction.
#[derive(Debug, Clone)]
pub struct SynthesisPlan {
    pub k: Net,
    pub a_net: Net,
    pub b_net: Net,
    pub cover1: Vec<BTreeSet<NodeId>>,
    pub cover2: Vec<BTreeSet<NodeId>>,
    pub venn: Vec<BTreeSet<NodeId>>,
    pub region: BTreeSet<NodeId>,
    pub redex: Embedding,
    pub micro_embedding: Embedding,
    pub k_abstracted: Net,
    pub non_redex_cover1: Vec<BTreeSet<NodeId>>,
    pub non_redex_venn: Vec<BTreeSet<NodeId>>,
}

/// A synthesized parallel pair with its intervening homomorphisms.
#[derive(Debug, Clone)]
pub struct ParallelSynthesis {
    pub micro: Rule,
    pub ferp: Rule,
    pub serp: Rule,
    pub hom3: BlockHomomorphism,
    pub hom01: BlockHomomorphism,
    pub hom02: BlockHomomorphism,
    pub plan: SynthesisPlan,
}

/// Applies a homomorphism to a net through its first partition cover;
/// `None` when the domain does not cover the net.
pub fn apply_via_cover(
    hom: &BlockHomomorphism,
    net: &Net,
    budget: &Budget,
) -> Result<Option<Net>, SynthesisError> {
    let Some(parts) = partition_cover(net, hom, budget)? else {
        return Ok(None);
    };
    let rep = rep_from_parts(net, &parts)?;
    Ok(Some(crate::nbh::apply_nbh(hom, &rep)?))
}

/// Inverts an alphabetical homomorphism on a net: every node whose letter
/// is the image of some domain block is substituted by that block, links
/// reattached through the blocks' open ports in positional order. One net
/// per combination of choices; empty when some letter has no preimage.
pub fn invert_alphabetical(hom: &BlockHomomorphism, net: &Net, budget: &Budget) -> Vec<Net> {
    let _ = budget;
    let mut choices: Vec<Vec<&Net>> = Vec::new();
    let node_ids: Vec<NodeId> = net.node_ids().into_iter().collect();
    for id in &node_ids {
        let letter = &net.nodes()[id];
        let blocks: Vec<&Net> = hom
            .domain_nets()
            .iter()
            .zip(hom.images())
            .filter(|(_, img)| matches!(img, BlockImage::Letter(l) if l == letter))
            .map(|(d, _)| d)
            .collect();
        if blocks.is_empty() {
            return Vec::new();
        }
        choices.push(blocks);
    }

    let mut combos: Vec<Vec<&Net>> = vec![Vec::new()];
    for options in &choices {
        let mut next = Vec::new();
        for combo in &combos {
            for &option in options {
                let mut extended = combo.clone();
                extended.push(option);
                next.push(extended);
            }
        }
        combos = next;
        if combos.len() > 64 {
            combos.truncate(64);
        }
    }

    let mut out = Vec::new();
    'combos: for combo in combos {
        // Instantiate one block per node, then rewire the outer links
        // through the blocks' open ports.
        let mut nodes = BTreeMap::new();
        let mut links = BTreeSet::new();
        let mut frontier = BTreeMap::new();
        let mut offset: NodeId = 0;
        let mut placed: BTreeMap<NodeId, Net> = BTreeMap::new();
        for (pos, id) in node_ids.iter().enumerate() {
            let inst = combo[pos].offset_ids(offset);
            offset = inst.max_node_id();
            nodes.extend(inst.nodes().iter().map(|(&n, l)| (n, l.clone())));
            links.extend(inst.links().iter().copied());
            frontier.extend(inst.frontier().iter().map(|(p, l)| (*p, l.clone())));
            placed.insert(*id, inst);
        }
        for link in net.links() {
            let src_block = &placed[&link.src];
            let dst_block = &placed[&link.dst];
            let outs = src_block.open_ports(crate::net::PortDir::Out);
            let ins = dst_block.open_ports(crate::net::PortDir::In);
            let (Some(src_port), Some(dst_port)) = (
                outs.get(link.src_port as usize - 1),
                ins.get(link.dst_port as usize - 1),
            ) else {
                continue 'combos;
            };
            links.insert(crate::net::Link::new(
                src_port.node,
                src_port.index,
                dst_port.node,
                dst_port.index,
            ));
            frontier.remove(src_port);
            frontier.remove(dst_port);
        }
        let candidate = Net::from_parts(nodes, links, frontier);
        if candidate.is_valid() {
            out.push(candidate);
        }
    }
    out
}

/// First partition of the net's nodes into parts each inducing a subnet
/// in the homomorphism's domain, in deterministic order.
pub fn partition_cover(
    k: &Net,
    hom: &BlockHomomorphism,
    budget: &Budget,
) -> Result<Option<Vec<BTreeSet<NodeId>>>, BudgetExceeded> {
    let mut all_occurrences: Vec<Vec<BTreeSet<NodeId>>> = Vec::new();
    for d in hom.domain_nets() {
        all_occurrences.push(occurrences(d, k, budget)?);
    }
    let mut assigned: BTreeSet<NodeId> = BTreeSet::new();
    let mut parts: Vec<BTreeSet<NodeId>> = Vec::new();
    let found = cover_search(k, &all_occurrences, &mut assigned, &mut parts);
    Ok(if found { Some(parts) } else { None })
}

fn cover_search(
    k: &Net,
    occurrences: &[Vec<BTreeSet<NodeId>>],
    assigned: &mut BTreeSet<NodeId>,
    parts: &mut Vec<BTreeSet<NodeId>>,
) -> bool {
    let Some(&next) = k.node_ids().iter().find(|n| !assigned.contains(n)) else {
        return true;
    };
    for occ_list in occurrences {
        for occ in occ_list {
            if occ.contains(&next) && occ.iter().all(|n| !assigned.contains(n)) {
                assigned.extend(occ.iter().copied());
                parts.push(occ.clone());
                if cover_search(k, occurrences, assigned, parts) {
                    return true;
                }
                parts.pop();
                for n in occ {
                    assigned.remove(n);
                }
            }
        }
    }
    false
}

fn rep_from_parts(k: &Net, parts: &[BTreeSet<NodeId>]) -> Result<NuoRepresentation, NuoError> {
    let mut sorted: Vec<BTreeSet<NodeId>> = parts.to_vec();
    sorted.sort_by_key(|p| p.iter().next().copied());
    nuo_decompose_sets(k, &sorted, 0)
}

fn fresh_cell_letter(index: usize) -> String {
    format!("~v{index}")
}

/// Builds the homomorphism over the common-refinement cells: cells that
/// coincide with a cover part reuse that cover's image, the rest get fresh
/// letters sized to their open ports, one per isomorphism class.
#[allow(clippy::too_many_arguments)]
fn build_hom3(
    k: &Net,
    venn: &[BTreeSet<NodeId>],
    cover1: &[BTreeSet<NodeId>],
    cover2: &[BTreeSet<NodeId>],
    hom1: &BlockHomomorphism,
    hom2: &BlockHomomorphism,
) -> Result<BlockHomomorphism, SynthesisError> {
    let mut entries: Vec<(Net, BlockImage)> = Vec::new();
    let mut fresh_by_class: BTreeMap<String, BlockImage> = BTreeMap::new();
    let mut fresh_counter = 0usize;
    for cell in venn {
        let extract = k.induced(cell);
        let image = if cover2.contains(cell) {
            hom2.image_of(&extract)
                .cloned()
                .ok_or_else(|| SynthesisError::PreimageNotFound {
                    detail: "cover part missing from its own homomorphism domain".into(),
                })?
        } else if cover1.contains(cell) {
            hom1.image_of(&extract)
                .cloned()
                .ok_or_else(|| SynthesisError::PreimageNotFound {
                    detail: "cover part missing from its own homomorphism domain".into(),
                })?
        } else {
            let key = canonical_key(&extract);
            fresh_by_class
                .entry(key)
                .or_insert_with(|| {
                    let letter = crate::net::RankedLetter::new(
                        fresh_cell_letter(fresh_counter),
                        extract.open_ports(crate::net::PortDir::In).len() as u32,
                        extract.open_ports(crate::net::PortDir::Out).len() as u32,
                    );
                    fresh_counter += 1;
                    BlockImage::Letter(letter)
                })
                .clone()
        };
        entries.push((extract, image));
    }
    let mut merged: BTreeMap<String, (Net, BlockImage)> = BTreeMap::new();
    for (net, image) in entries {
        let key = canonical_key(&net);
        merged.entry(key).or_insert((net, image));
    }
    BlockHomomorphism::new(
        "hom3",
        merged.into_values().collect(),
        hom2.frontier_relabel.clone(),
    )
    .map_err(SynthesisError::Nbh)
}

/// Entries merged with priority: earlier lists win on isomorphism-class
/// collisions; collisions inside one list are conflicts.
fn merge_hom_entries(
    name: &str,
    primary: Vec<(Net, BlockImage)>,
    fillers: Vec<(Net, BlockImage)>,
    frontier_relabel: BTreeMap<FrontierLabel, FrontierLabel>,
) -> Result<BlockHomomorphism, NbhError> {
    let mut merged: Vec<(Net, BlockImage)> = Vec::new();
    let mut keys: BTreeSet<String> = BTreeSet::new();
    let mut primary_hom_entries = Vec::new();
    for (net, image) in primary {
        primary_hom_entries.push((net, image));
    }
    // Conflicts among primary entries surface through the constructor.
    let probe = BlockHomomorphism::new(name, primary_hom_entries.clone(), BTreeMap::new())?;
    let _ = probe;
    for (net, image) in primary_hom_entries {
        let key = canonical_key(&net);
        if keys.insert(key) {
            merged.push((net, image));
        }
    }
    for (net, image) in fillers {
        let key = canonical_key(&net);
        if keys.insert(key) {
            merged.push((net, image));
        }
    }
    BlockHomomorphism::new(name, merged, frontier_relabel)
}

/// Singleton entry for a freshly introduced node of the rewritten context.
fn singleton_entry(net: &Net, node: NodeId) -> (Net, BlockImage) {
    let extract = net.induced(&BTreeSet::from([node]));
    let image = if extract.links().is_empty() {
        BlockImage::Letter(extract.nodes()[&node].clone())
    } else {
        BlockImage::Net(extract.clone())
    };
    (extract, image)
}

/// Pulls one rule through two abstractions of a common context net,
/// producing the parallel pair and the homomorphisms that close both
/// commutation equations.
pub fn synthesize_parallel(
    r: &Rule,
    hom1: &BlockHomomorphism,
    hom2: &BlockHomomorphism,
    k: &Net,
    budget: &Budget,
) -> Result<ParallelSynthesis, SynthesisError> {
    if r.substitutions.len() > 1 {
        return Err(SynthesisError::InstanceSensitive);
    }
    {
        let mut seen = BTreeSet::new();
        for label in k.frontier().values() {
            if let FrontierLabel::Manoeuvre(s) = label {
                if !seen.insert(s.clone()) {
                    return Err(SynthesisError::FrontierNotLinear { letter: s.clone() });
                }
            }
        }
    }

    let cover1 = partition_cover(k, hom1, budget)?.ok_or_else(|| SynthesisError::NoCover {
        hom: hom1.name.clone(),
    })?;
    let cover2 = partition_cover(k, hom2, budget)?.ok_or_else(|| SynthesisError::NoCover {
        hom: hom2.name.clone(),
    })?;

    let rep1 = rep_from_parts(k, &cover1)?;
    let app1 = apply_nbh_traced(hom1, &rep1)?;
    let rep2 = rep_from_parts(k, &cover2)?;
    let app2 = apply_nbh_traced(hom2, &rep2)?;
    let a_net = app1.result.clone();
    let b_net = app2.result.clone();

    // Pick the first redex whose attachments stay outside the matched image
    // and trace back to the context net.
    let embeddings = match_net(&r.left, &a_net, budget)?;
    let rep1_elements: Vec<BTreeSet<NodeId>> = rep1
        .elements()
        .iter()
        .map(|e| e.node_set.clone())
        .collect();
    let mut chosen: Option<(Embedding, BTreeSet<NodeId>)> = None;
    'embeddings: for embedding in &embeddings {
        let image = embedding.image();
        for attachment in embedding.bindings.values() {
            if let Attachment::Linked(peer) = attachment {
                if image.contains(&peer.node) {
                    continue 'embeddings;
                }
            }
        }
        // Consumed elements must sit wholly inside the redex image.
        let mut region: BTreeSet<NodeId> = BTreeSet::new();
        for (i, nodes) in app1.element_nodes.iter().enumerate() {
            let touched = nodes.iter().any(|n| image.contains(n));
            if touched {
                if !nodes.iter().all(|n| image.contains(n)) {
                    continue 'embeddings;
                }
                region.extend(rep1_elements[i].iter().copied());
            }
        }
        chosen = Some((embedding.clone(), region));
        break;
    }
    let (redex, region) = chosen.ok_or(SynthesisError::NoRedex)?;

    // Left side of micro: the region extracted from k, cut ports renamed to
    // the rule's own frontier letters through the image traces.
    let micro_left = pull_back_left(k, &region, &r.left, &redex, &app1)?;
    let unmatched_letters = unmatched_right_letters(&micro_left, &r.right);
    let micro_right = retarget_right(&r.right, &unmatched_letters);
    let micro = Rule::new(format!("micro_{}", r.name), micro_left.clone(), micro_right.clone());

    // Locate micro's redex in k: the embedding covering exactly the region.
    let micro_embedding = match_net(&micro.left, k, budget)?
        .into_iter()
        .find(|e| e.image() == region)
        .ok_or_else(|| SynthesisError::PreimageNotFound {
            detail: "pulled-back left side does not re-match its own region".into(),
        })?;

    // Common refinement of both covers.
    let family: Vec<BTreeSet<NodeId>> = cover1.iter().chain(cover2.iter()).cloned().collect();
    let venn = pi_partition(&family);
    let hom3 = build_hom3(k, &venn, &cover1, &cover2, hom1, hom2)?;
    let rep3 = rep_from_parts(k, &venn)?;
    let app3 = apply_nbh_traced(&hom3, &rep3)?;
    let k_abstracted = app3.result.clone();

    // ferp: re-representation of the second image onto the refinement.
    let ferp = Rule::new(format!("ferp_{}", r.name), b_net.clone(), k_abstracted.clone());

    // serp: the same rewrite on the refined abstraction.
    let serp_left = image_of_region(&region, &micro_left, &rep3, &app3)?;
    let serp = Rule::new(format!("serp_{}", r.name), serp_left, micro_right.clone());

    // The two intervening homomorphisms share one block domain: surviving
    // cover parts, surviving refinement cells, and the nodes the right side
    // introduces.
    let k_rewritten = apply_rule_at(
        k,
        &micro,
        &micro_embedding,
        &r.effective_substitutions()[0],
    )?;
    let new_nodes: Vec<NodeId> = k_rewritten
        .node_ids()
        .into_iter()
        .filter(|n| !k.nodes().contains_key(n))
        .collect();

    let non_redex_cover1: Vec<BTreeSet<NodeId>> = cover1
        .iter()
        .filter(|p| p.iter().all(|n| !region.contains(n)))
        .cloned()
        .collect();
    let non_redex_venn: Vec<BTreeSet<NodeId>> = venn
        .iter()
        .filter(|p| p.iter().all(|n| !region.contains(n)))
        .cloned()
        .collect();

    let singletons: Vec<(Net, BlockImage)> = new_nodes
        .iter()
        .map(|&n| singleton_entry(&k_rewritten, n))
        .collect();
    let cover1_entries: Vec<(Net, BlockImage)> = non_redex_cover1
        .iter()
        .map(|p| {
            let extract = k.induced(p);
            let image = hom1.image_of(&extract).cloned().expect("covered by hom1");
            (extract, image)
        })
        .collect();
    let venn_entries: Vec<(Net, BlockImage)> = non_redex_venn
        .iter()
        .map(|p| {
            let extract = k.induced(p);
            let image = hom3.image_of(&extract).cloned().expect("covered by hom3");
            (extract, image)
        })
        .collect();

    let hom01 = merge_hom_entries(
        "hom01",
        cover1_entries
            .iter()
            .cloned()
            .chain(singletons.iter().cloned())
            .collect(),
        venn_entries.clone(),
        hom1.frontier_relabel.clone(),
    )?;
    let hom02 = merge_hom_entries(
        "hom02",
        venn_entries
            .into_iter()
            .chain(singletons.iter().cloned())
            .collect(),
        cover1_entries,
        hom2.frontier_relabel.clone(),
    )?;

    Ok(ParallelSynthesis {
        micro,
        ferp,
        serp,
        hom3,
        hom01,
        hom02,
        plan: SynthesisPlan {
            k: k.clone(),
            a_net,
            b_net,
            cover1,
            cover2,
            venn,
            region,
            redex,
            micro_embedding,
            k_abstracted,
            non_redex_cover1,
            non_redex_venn,
        },
    })
}

/// Extracts the region from `k` and renames its boundary to the rule's own
/// frontier letters: cut links take the letter bound to their image link,
/// open ports the letter the pattern binds them with.
fn pull_back_left(
    k: &Net,
    region: &BTreeSet<NodeId>,
    pattern: &Net,
    redex: &Embedding,
    app1: &NbhApplication,
) -> Result<Net, SynthesisError> {
    let mut extract = k.induced(region);
    let mut frontier = extract.frontier().clone();

    // Image link -> pattern letter, from the redex bindings.
    let mut image_port_letter: BTreeMap<Port, Symbol> = BTreeMap::new();
    let mut image_free_letter: BTreeMap<Port, FrontierLabel> = BTreeMap::new();
    for (port, label) in pattern.frontier() {
        let image_port = redex.map_port(*port);
        match (&redex.bindings[port], label) {
            (Attachment::Linked(_), FrontierLabel::Manoeuvre(s)) => {
                image_port_letter.insert(image_port, s.clone());
            }
            (Attachment::Free(_), l) => {
                image_free_letter.insert(image_port, l.clone());
            }
            (Attachment::Linked(_), FrontierLabel::Arity(_)) => {
                return Err(SynthesisError::PreimageNotFound {
                    detail: "arity-labeled pattern port bound to a link".into(),
                });
            }
        }
    }

    for (port, _) in extract.frontier().clone() {
        if let Some(link) = k.link_at(port) {
            // A cut link: its image link ends on a redex port carrying a
            // pattern letter.
            let image_link =
                app1.link_trace
                    .get(link)
                    .ok_or_else(|| SynthesisError::PreimageNotFound {
                        detail: format!("cut link {link} has no image trace"),
                    })?;
            let image_port = match port.dir {
                crate::net::PortDir::Out => image_link.source(),
                crate::net::PortDir::In => image_link.target(),
            };
            let letter = image_port_letter.get(&image_port).ok_or_else(|| {
                SynthesisError::PreimageNotFound {
                    detail: format!("image link {image_link} is not bound by the redex"),
                }
            })?;
            frontier.insert(port, FrontierLabel::manoeuvre(letter.clone()));
        } else if let Some(image_port) = app1.frontier_trace.get(&port) {
            // Genuine context frontier: adopt the pattern's manoeuvre letter
            // when one binds the image port; arity ports keep their label.
            match image_free_letter.get(image_port) {
                Some(FrontierLabel::Manoeuvre(s)) => {
                    frontier.insert(port, FrontierLabel::manoeuvre(s.clone()));
                }
                Some(FrontierLabel::Arity(_)) | None => {}
            }
        }
    }

    extract = Net::from_parts(extract.nodes().clone(), extract.links().clone(), frontier);
    Ok(extract)
}

/// Letters on the rule's right frontier with no counterpart on the
/// pulled-back left side bind nothing in the context; their ports stay open
/// as positional arity ports.
fn unmatched_right_letters(micro_left: &Net, right: &Net) -> BTreeSet<Symbol> {
    let left_letters = micro_left.manoeuvre_letters();
    right
        .manoeuvre_letters()
        .into_iter()
        .filter(|s| !left_letters.contains(s))
        .collect()
}

fn retarget_right(right: &Net, unmatched: &BTreeSet<Symbol>) -> Net {
    if unmatched.is_empty() {
        return right.clone();
    }
    let frontier: BTreeMap<Port, FrontierLabel> = right
        .frontier()
        .iter()
        .map(|(p, label)| {
            let new_label = match label {
                FrontierLabel::Manoeuvre(s) if unmatched.contains(s) => {
                    FrontierLabel::positional(p.index)
                }
                other => other.clone(),
            };
            (*p, new_label)
        })
        .collect();
    Net::from_parts(right.nodes().clone(), right.links().clone(), frontier)
}

/// The refined-abstraction image of the region, boundary renamed with the
/// pulled-back left side's letters.
fn image_of_region(
    region: &BTreeSet<NodeId>,
    micro_left: &Net,
    rep3: &NuoRepresentation,
    app3: &NbhApplication,
) -> Result<Net, SynthesisError> {
    let elements: Vec<BTreeSet<NodeId>> = rep3
        .elements()
        .iter()
        .map(|e| e.node_set.clone())
        .collect();
    let mut image_nodes: BTreeSet<NodeId> = BTreeSet::new();
    for (i, cell) in elements.iter().enumerate() {
        if cell.iter().all(|n| region.contains(n)) {
            image_nodes.extend(app3.element_nodes[i].iter().copied());
        } else if cell.iter().any(|n| region.contains(n)) {
            return Err(SynthesisError::PreimageNotFound {
                detail: "refinement cell straddles the region boundary".into(),
            });
        }
    }
    let mut extract = app3.result.induced(&image_nodes);
    let mut frontier = extract.frontier().clone();

    // Rename the extraction boundary consistently with micro's left side.
    for (port, _) in extract.frontier().clone() {
        if let Some(image_link) = app3.result.link_at(port) {
            // Cut link in the abstracted net: find its source link in k and
            // the letter micro's left side gave that boundary.
            let source_link = app3
                .link_trace
                .iter()
                .find(|(_, img)| *img == image_link)
                .map(|(src, _)| *src)
                .ok_or_else(|| SynthesisError::PreimageNotFound {
                    detail: "abstracted link has no source trace".into(),
                })?;
            let region_port = if region.contains(&source_link.src) {
                source_link.source()
            } else {
                source_link.target()
            };
            let label = micro_left
                .frontier()
                .get(&region_port)
                .cloned()
                .ok_or_else(|| SynthesisError::PreimageNotFound {
                    detail: "region boundary port missing from the pulled-back left side".into(),
                })?;
            frontier.insert(port, label);
        } else {
            // Open in the abstraction: trace back to the context frontier.
            let source_port = app3
                .frontier_trace
                .iter()
                .find(|(_, img)| **img == port)
                .map(|(src, _)| *src);
            if let Some(src) = source_port {
                if let Some(label) = micro_left.frontier().get(&src) {
                    frontier.insert(port, label.clone());
                }
            }
        }
    }
    extract = Net::from_parts(extract.nodes().clone(), extract.links().clone(), frontier);
    Ok(extract)
}

/// Outcome of evaluating one commutation equation.
#[derive(Debug, Clone)]
pub struct EquationCheck {
    pub holds: bool,
    pub lhs: Net,
    pub rhs: Net,
}

#[derive(Debug, Clone)]
pub struct CommutationReport {
    pub direct_equation: EquationCheck,
    pub staged_equation: EquationCheck,
}

impl CommutationReport {
    pub fn passed(&self) -> bool {
        self.direct_equation.holds && self.staged_equation.holds
    }
}

/// Evaluates both commutation equations on the synthesized objects:
///
/// 1. rewriting the first image directly equals rewriting the context with
///    `micro` and abstracting through `hom01`;
/// 2. re-representing the second image with `ferp`, rewriting with `serp`,
///    equals the same `micro` rewrite abstracted through `hom02`.
pub fn verify_commutation(
    ps: &ParallelSynthesis,
    r: &Rule,
    budget: &Budget,
) -> Result<CommutationReport, SynthesisError> {
    let plan = &ps.plan;
    let substitution = r
        .effective_substitutions()
        .into_iter()
        .next()
        .unwrap_or_default();

    // Shared right-hand side: context rewritten by micro, abstracted.
    let k_rewritten = apply_rule_at(&plan.k, &ps.micro, &plan.micro_embedding, &substitution)?;
    let new_nodes: Vec<NodeId> = k_rewritten
        .node_ids()
        .into_iter()
        .filter(|n| !plan.k.nodes().contains_key(n))
        .collect();
    let abstracted_through = |parts: &[BTreeSet<NodeId>],
                              hom: &BlockHomomorphism|
     -> Result<Net, SynthesisError> {
        let mut cover: Vec<BTreeSet<NodeId>> = parts.to_vec();
        cover.extend(new_nodes.iter().map(|&n| BTreeSet::from([n])));
        if cover.is_empty() {
            return Ok(Net::empty());
        }
        let rep = rep_from_parts(&k_rewritten, &cover)?;
        Ok(crate::nbh::apply_nbh(hom, &rep)?)
    };

    // Equation 1: direct rewrite of the first image.
    let lhs1 = apply_rule_at(&plan.a_net, r, &plan.redex, &substitution)?;
    let rhs1 = abstracted_through(&plan.non_redex_cover1, &ps.hom01)?;
    let eq1 = EquationCheck {
        holds: is_isomorphic(&lhs1, &rhs1),
        lhs: lhs1,
        rhs: rhs1,
    };

    // Equation 2: re-representation then the abstracted rewrite.
    let staged = (|| -> Result<Net, SynthesisError> {
        let ferp_embeddings = match_net(&ps.ferp.left, &plan.b_net, budget)?;
        let full = ferp_embeddings
            .into_iter()
            .find(|e| e.image() == plan.b_net.node_ids())
            .ok_or_else(|| SynthesisError::PreimageNotFound {
                detail: "re-representation rule does not match the second image".into(),
            })?;
        let mid = apply_rule_at(&plan.b_net, &ps.ferp, &full, &Substitution::new())?;
        let serp_embeddings = match_net(&ps.serp.left, &mid, budget)?;
        let first = serp_embeddings
            .into_iter()
            .next()
            .ok_or_else(|| SynthesisError::PreimageNotFound {
                detail: "abstracted rewrite does not match the re-represented net".into(),
            })?;
        Ok(apply_rule_at(&mid, &ps.serp, &first, &substitution)?)
    })();
    let rhs2 = abstracted_through(&plan.non_redex_venn, &ps.hom02)?;
    let eq2 = match staged {
        Ok(lhs2) => EquationCheck {
            holds: is_isomorphic(&lhs2, &rhs2),
            lhs: lhs2,
            rhs: rhs2,
        },
        Err(_) => EquationCheck {
            holds: false,
            lhs: Net::empty(),
            rhs: rhs2,
        },
    };

    Ok(CommutationReport {
        direct_equation: eq1,
        staged_equation: eq2,
    })
}

/// One verified parallel pair.
#[derive(Debug, Clone)]
pub struct FixedParallel {
    pub ferp: Rule,
    pub serp: Rule,
}

impl FixedParallel {
    pub fn as_system(&self) -> RuleSystem {
        RuleSystem::new("parallel", vec![self.ferp.clone(), self.serp.clone()])
    }

    pub fn key(&self) -> String {
        self.as_system().canonical_signature()
    }
}

/// The abstraction contexts a fixed-parallel computation ranges over: the
/// candidate context nets and the homomorphism pairs applied to them.
#[derive(Debug, Clone)]
pub struct ThetaConfig {
    pub k_universe: Jungle,
    pub hom_pairs: Vec<(BlockHomomorphism, BlockHomomorphism)>,
}

impl ThetaConfig {
    /// Identity homomorphisms over every universe member.
    pub fn identity_over(k_universe: Jungle) -> Self {
        let hom_pairs = k_universe
            .iter()
            .map(|k| {
                let h = BlockHomomorphism::identity_for(k);
                (h.clone(), h)
            })
            .collect();
        ThetaConfig {
            k_universe,
            hom_pairs,
        }
    }
}

/// All verified parallels of a system over the configured contexts, keyed
/// canonically.
pub fn fixed_parallel_set(
    sys: &RuleSystem,
    cfg: &ThetaConfig,
    budget: &Budget,
) -> BTreeMap<String, FixedParallel> {
    let mut out = BTreeMap::new();
    for rule in &sys.rules {
        for k in cfg.k_universe.iter() {
            for (h1, h2) in &cfg.hom_pairs {
                let Ok(ps) = synthesize_parallel(rule, h1, h2, k, budget) else {
                    continue;
                };
                let Ok(report) = verify_commutation(&ps, rule, budget) else {
                    continue;
                };
                if report.passed() {
                    let fp = FixedParallel {
                        ferp: ps.ferp,
                        serp: ps.serp,
                    };
                    out.insert(fp.key(), fp);
                }
            }
        }
    }
    out
}

/// Entangling classes over a finite sample with their mediatory sets, the
/// participatory center and the hermeneutic rule area.
#[derive(Debug, Clone)]
pub struct EntanglementReport {
    /// Partition of the sample (indices), singletons included.
    pub classes: Vec<Vec<usize>>,
    /// Mediatory set per class index, present only when nonempty.
    pub mediatory: BTreeMap<usize, Vec<FixedParallel>>,
    /// Sample indices whose every rule is the abstracted-rewrite component
    /// of some parallel in its class pool.
    pub center: Vec<usize>,
    /// Rules whose left apex letters match a cell of the induced partition
    /// of paired class apex sets.
    pub hermeneutic: Vec<Rule>,
    /// Per-sample fixed-parallel keys, for reporting.
    pub fixed_parallels: Vec<Vec<String>>,
}

/// Groups sample systems by shared fixed parallels (transitive closure of
/// the pairwise intersection relation), then derives the class artifacts.
pub fn entangling_classes(
    sample: &[RuleSystem],
    cfg: &ThetaConfig,
    budget: &Budget,
) -> EntanglementReport {
    let sets: Vec<BTreeMap<String, FixedParallel>> = sample
        .iter()
        .map(|sys| fixed_parallel_set(sys, cfg, budget))
        .collect();

    // Union-find by shared keys.
    let mut parent: Vec<usize> = (0..sample.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..sample.len() {
        for j in (i + 1)..sample.len() {
            if sets[i].keys().any(|k| sets[j].contains_key(k)) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sample.len() {
        let root = find(&mut parent, i);
        by_root.entry(root).or_default().push(i);
    }
    let classes: Vec<Vec<usize>> = by_root.into_values().collect();

    let mut mediatory = BTreeMap::new();
    for (ci, class) in classes.iter().enumerate() {
        if class.len() < 2 {
            continue;
        }
        let mut shared: Vec<&String> = sets[class[0]].keys().collect();
        for &i in &class[1..] {
            shared.retain(|k| sets[i].contains_key(*k));
        }
        if !shared.is_empty() {
            let parallels: Vec<FixedParallel> = shared
                .iter()
                .map(|k| sets[class[0]][*k].clone())
                .collect();
            mediatory.insert(ci, parallels);
        }
    }

    // Serp-type rule signatures per class.
    let mut center = Vec::new();
    for class in &classes {
        let serp_signatures: BTreeSet<String> = class
            .iter()
            .flat_map(|&i| sets[i].values().map(|fp| fp.serp.canonical_signature()))
            .collect();
        for &i in class {
            let rules = &sample[i].rules;
            if !rules.is_empty()
                && rules
                    .iter()
                    .all(|r| serp_signatures.contains(&r.canonical_signature()))
            {
                center.push(i);
            }
        }
    }
    center.sort();

    // Hermeneutic area: left apex letter sets matching a cell of the
    // induced partition of paired apex sets within a class.
    let apexes = |sys: &RuleSystem| -> BTreeSet<Symbol> {
        sys.rules
            .iter()
            .flat_map(|r| crate::jungle::canonical_form(&r.left).net.apex_letters())
            .collect()
    };
    let mut hermeneutic: Vec<Rule> = Vec::new();
    let mut seen_rules: BTreeSet<String> = BTreeSet::new();
    for class in &classes {
        for &i in class {
            for &j in class {
                if i == j && class.len() > 1 {
                    continue;
                }
                let cells = pi_partition(&[apexes(&sample[i]), apexes(&sample[j])]);
                for &m in class {
                    for rule in &sample[m].rules {
                        let apex: BTreeSet<Symbol> =
                            crate::jungle::canonical_form(&rule.left).net.apex_letters();
                        if cells.contains(&apex) && seen_rules.insert(rule.canonical_signature()) {
                            hermeneutic.push(rule.clone());
                        }
                    }
                }
            }
        }
    }

    EntanglementReport {
        classes,
        mediatory,
        center,
        hermeneutic,
        fixed_parallels: sets.iter().map(|s| s.keys().cloned().collect()).collect(),
    }
}

/// Closure of the first-rule components: every nonempty subset of a
/// member's fixed-parallel set combines its re-representation rules into a
/// system; the operation is iterated until nothing new appears.
pub fn ferp_generation(
    systems: &[RuleSystem],
    cfg: &ThetaConfig,
    budget: &Budget,
) -> Result<Vec<RuleSystem>, BudgetExceeded> {
    let mut countdown = Countdown::new("ferp_generation", budget.candidates);
    let mut pool: BTreeMap<String, RuleSystem> = BTreeMap::new();
    let mut frontier: Vec<RuleSystem> = systems.to_vec();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for sys in &frontier {
            countdown.tick()?;
            let parallels: Vec<FixedParallel> =
                fixed_parallel_set(sys, cfg, budget).into_values().collect();
            let n = parallels.len().min(10);
            for mask in 1u32..(1u32 << n) {
                countdown.tick()?;
                let ferps: Vec<Rule> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| parallels[i].ferp.clone())
                    .collect();
                let candidate = RuleSystem::new("generated", ferps);
                let key = candidate.canonical_signature();
                if !pool.contains_key(&key) {
                    pool.insert(key, candidate.clone());
                    next.push(candidate);
                }
            }
        }
        frontier = next;
    }
    Ok(pool.into_values().collect())
}

/// Order-one check that composing an abstraction relation with a system on
/// one side equals composing its parallel on the other, as pair sets over a
/// finite universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionCheck {
    pub theta_then_rules: BTreeSet<(usize, usize)>,
    pub parallel_then_theta: BTreeSet<(usize, usize)>,
}

impl CompositionCheck {
    pub fn commutes(&self) -> bool {
        self.theta_then_rules == self.parallel_then_theta
    }
}

pub fn composition_commutes(
    universe: &Jungle,
    theta: &BTreeSet<(usize, usize)>,
    sys: &RuleSystem,
    parallel: &RuleSystem,
    budget: &Budget,
) -> Result<CompositionCheck, RnsError> {
    let members: Vec<&Net> = universe.iter().collect();
    let index_of = |net: &Net| -> Option<usize> {
        let key = canonical_key(net);
        universe.keys().position(|k| *k == key)
    };
    let step = |sys: &RuleSystem, i: usize| -> Result<Vec<usize>, RnsError> {
        let start = Jungle::from_nets([members[i].clone()]);
        let out = crate::rns::apply_rns(sys, &start, budget)?;
        Ok(out.iter().filter_map(index_of).collect())
    };

    let mut theta_then_rules = BTreeSet::new();
    for &(x, y) in theta {
        for z in step(sys, y)? {
            theta_then_rules.insert((x, z));
        }
    }
    let mut parallel_then_theta = BTreeSet::new();
    for x in 0..members.len() {
        for p in step(parallel, x)? {
            for &(a, b) in theta {
                if a == p {
                    parallel_then_theta.insert((x, b));
                }
            }
        }
    }
    Ok(CompositionCheck {
        theta_then_rules,
        parallel_then_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::*;
    use crate::net::RankedLetter;

    #[test]
    fn pi_partition_single_set() {
        let family = [BTreeSet::from([1, 2, 3])];
        assert_eq!(pi_partition(&family), vec![BTreeSet::from([1, 2, 3])]);
    }

    #[test]
    fn pi_partition_overlapping_sets() {
        let family = [BTreeSet::from([1, 2]), BTreeSet::from([2, 3])];
        assert_eq!(
            pi_partition(&family),
            vec![
                BTreeSet::from([1]),
                BTreeSet::from([2]),
                BTreeSet::from([3])
            ]
        );
    }

    #[test]
    fn pi_partition_disjoint_sets() {
        let family = [BTreeSet::from([1]), BTreeSet::from([2, 3])];
        assert_eq!(
            pi_partition(&family),
            vec![BTreeSet::from([1]), BTreeSet::from([2, 3])]
        );
    }

    #[test]
    fn pi_partition_cells_refine_every_input() {
        let family = [
            BTreeSet::from([1, 2, 3, 4]),
            BTreeSet::from([3, 4, 5]),
            BTreeSet::from([4, 6]),
        ];
        let cells = pi_partition(&family);
        let union: BTreeSet<i32> = family.iter().flatten().copied().collect();
        let cell_union: BTreeSet<i32> = cells.iter().flatten().copied().collect();
        assert_eq!(union, cell_union);
        for (i, a) in cells.iter().enumerate() {
            for (j, b) in cells.iter().enumerate() {
                if i != j {
                    assert!(a.intersection(b).next().is_none());
                }
            }
        }
        for set in &family {
            let covered: BTreeSet<i32> = cells
                .iter()
                .filter(|c| c.iter().all(|e| set.contains(e)))
                .flatten()
                .copied()
                .collect();
            assert_eq!(&covered, set);
        }
    }

    fn closed_relabel(name: &str, from: &str, to: &str) -> Rule {
        Rule::new(
            name,
            Net::single(RankedLetter::new(from, 0, 0)),
            Net::single(RankedLetter::new(to, 0, 0)),
        )
    }

    #[test]
    fn identity_synthesis_on_a_single_node() {
        let r = closed_relabel("r", "a", "c");
        let h = BlockHomomorphism::identity_for(&single_a());
        let ps = synthesize_parallel(&r, &h, &h, &single_a(), &Budget::desk()).unwrap();
        assert!(is_isomorphic(&ps.micro.left, &r.left));
        assert!(is_isomorphic(&ps.micro.right, &r.right));
        // The re-representation maps the image onto itself.
        assert!(is_isomorphic(&ps.ferp.left, &single_a()));
        assert!(is_isomorphic(&ps.ferp.right, &single_a()));
        assert!(is_isomorphic(&ps.serp.right, &r.right));
        let report = verify_commutation(&ps, &r, &Budget::desk()).unwrap();
        assert!(report.passed());
    }

    fn beta_collapse_of_b() -> BlockHomomorphism {
        let a_part = chain2().induced(&BTreeSet::from([1]));
        let b_part = chain2().induced(&BTreeSet::from([2]));
        BlockHomomorphism::new(
            "collapse_b",
            vec![
                (a_part, BlockImage::Letter(RankedLetter::new("a", 0, 1))),
                (b_part, BlockImage::Letter(RankedLetter::new("beta", 1, 0))),
            ],
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn alpha_collapse_of_a() -> BlockHomomorphism {
        let a_part = chain2().induced(&BTreeSet::from([1]));
        let b_part = chain2().induced(&BTreeSet::from([2]));
        BlockHomomorphism::new(
            "collapse_a",
            vec![
                (a_part, BlockImage::Letter(RankedLetter::new("alpha", 0, 1))),
                (b_part, BlockImage::Letter(RankedLetter::new("b", 1, 0))),
            ],
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn relabel_apex_rule() -> Rule {
        // Relabels the apex of the first image: a(0/1) -> a2(0/1), binding
        // the outgoing link with x.
        let left = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("a", 0, 1))]),
            BTreeSet::new(),
            BTreeMap::from([(Port::output(1, 1), FrontierLabel::manoeuvre("x"))]),
        );
        let right = Net::from_parts(
            BTreeMap::from([(1, RankedLetter::new("a2", 0, 1))]),
            BTreeSet::new(),
            BTreeMap::from([(Port::output(1, 1), FrontierLabel::manoeuvre("x"))]),
        );
        Rule::new("relabel_apex", left, right)
    }

    #[test]
    fn chain_synthesis_with_two_different_collapses() {
        // First abstraction keeps a and collapses b; second keeps b and
        // collapses a. The rule rewrites the first image's apex.
        let hom1 = beta_collapse_of_b();
        let hom2 = alpha_collapse_of_a();
        let r = relabel_apex_rule();
        let ps = synthesize_parallel(&r, &hom1, &hom2, &chain2(), &Budget::desk()).unwrap();
        // The refinement separates the two nodes.
        assert_eq!(ps.plan.venn.len(), 2);
        assert_eq!(
            ps.hom01.block_domain().len(),
            ps.hom02.block_domain().len()
        );
        assert!(ps
            .hom01
            .block_domain()
            .iter()
            .zip(ps.hom02.block_domain().iter())
            .all(|(x, y)| is_isomorphic(x, y)));
        let report = verify_commutation(&ps, &r, &Budget::desk()).unwrap();
        assert!(
            report.passed(),
            "direct: {:?}\nstaged: {:?}",
            report.direct_equation,
            report.staged_equation
        );
    }

    #[test]
    fn missing_redex_is_reported() {
        let r = closed_relabel("r", "z", "c");
        let h = BlockHomomorphism::identity_for(&single_a());
        let err = synthesize_parallel(&r, &h, &h, &single_a(), &Budget::desk()).unwrap_err();
        assert!(matches!(err, SynthesisError::NoRedex));
    }

    #[test]
    fn corrupted_abstracted_rewrite_fails_verification() {
        let r = closed_relabel("r", "a", "c");
        let h = BlockHomomorphism::identity_for(&single_a());
        let mut ps = synthesize_parallel(&r, &h, &h, &single_a(), &Budget::desk()).unwrap();
        // Graft an extra node onto the abstracted rewrite's right side.
        ps.serp.right = ps
            .serp
            .right
            .disjoint_union(&Net::single(RankedLetter::new("junk", 0, 0)));
        let report = verify_commutation(&ps, &r, &Budget::desk()).unwrap();
        assert!(!report.passed());
        assert!(!report.staged_equation.holds);
    }

    #[test]
    fn fixed_parallels_of_matching_systems_coincide() {
        let sys = RuleSystem::single(closed_relabel("r", "a", "c"));
        let cfg = ThetaConfig::identity_over(Jungle::from_nets([single_a()]));
        let set1 = fixed_parallel_set(&sys, &cfg, &Budget::desk());
        let set2 = fixed_parallel_set(&sys, &cfg, &Budget::desk());
        assert!(!set1.is_empty());
        assert_eq!(
            set1.keys().collect::<Vec<_>>(),
            set2.keys().collect::<Vec<_>>()
        );
    }

    #[test]
    fn copies_of_one_system_form_one_class_with_shared_mediatory() {
        let sys = RuleSystem::single(closed_relabel("r", "a", "c"));
        let cfg = ThetaConfig::identity_over(Jungle::from_nets([single_a()]));
        let report = entangling_classes(&[sys.clone(), sys], &cfg, &Budget::desk());
        assert_eq!(report.classes.len(), 1);
        assert_eq!(report.classes[0].len(), 2);
        assert!(report.mediatory.contains_key(&0));
        assert!(!report.mediatory[&0].is_empty());
    }

    #[test]
    fn disjoint_alphabets_stay_unentangled() {
        let sys1 = RuleSystem::single(closed_relabel("r1", "a", "c"));
        let sys2 = RuleSystem::single(closed_relabel("r2", "x", "y"));
        let cfg = ThetaConfig::identity_over(Jungle::from_nets([single_a()]));
        let report = entangling_classes(&[sys1, sys2], &cfg, &Budget::desk());
        assert_eq!(report.classes.len(), 2);
        assert!(report.mediatory.is_empty());
    }

    #[test]
    fn center_of_an_empty_parallel_pool_is_empty() {
        // No universe member matches the rule, so no parallels exist.
        let sys = RuleSystem::single(closed_relabel("r", "z", "w"));
        let cfg = ThetaConfig::identity_over(Jungle::from_nets([single_a()]));
        let report = entangling_classes(&[sys], &cfg, &Budget::desk());
        assert!(report.center.is_empty());
    }

    #[test]
    fn ferp_generation_of_nothing_is_nothing() {
        let cfg = ThetaConfig::identity_over(Jungle::from_nets([single_a()]));
        let out = ferp_generation(&[], &cfg, &Budget::desk()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn ferp_generation_reaches_a_fixed_point() {
        let sys = RuleSystem::single(closed_relabel("r", "a", "c"));
        let cfg = ThetaConfig::identity_over(Jungle::from_nets([single_a()]));
        let generated = ferp_generation(&[sys], &cfg, &Budget::desk()).unwrap();
        assert!(!generated.is_empty());
        let again = ferp_generation(&generated, &cfg, &Budget::desk()).unwrap();
        let keys = |v: &[RuleSystem]| -> BTreeSet<String> {
            v.iter().map(|s| s.canonical_signature()).collect()
        };
        assert_eq!(keys(&generated), keys(&again));
    }

    #[test]
    fn composition_orders_agree_under_the_identity_relation() {
        let universe = Jungle::from_nets([single_a(), single_c()]);
        let theta: BTreeSet<(usize, usize)> = BTreeSet::from([(0, 0), (1, 1)]);
        let sys = RuleSystem::single(closed_relabel("r", "a", "c"));
        let check =
            composition_commutes(&universe, &theta, &sys, &sys, &Budget::desk()).unwrap();
        assert!(check.commutes());
    }

    #[test]
    fn composition_check_detects_a_mismatched_parallel() {
        // The parallel rewrites in the wrong direction, so the two
        // composition orders differ.
        let universe = Jungle::from_nets([single_a(), single_c()]);
        let theta: BTreeSet<(usize, usize)> = BTreeSet::from([(0, 0), (1, 1)]);
        let sys = RuleSystem::single(closed_relabel("r", "a", "c"));
        let par = RuleSystem::single(closed_relabel("p", "c", "a"));
        let check =
            composition_commutes(&universe, &theta, &sys, &par, &Budget::desk()).unwrap();
        assert!(!check.commutes());
    }
}
