//! Block homomorphisms: mappings that replace whole cover elements of a
//! decomposed net by letters (or small nets), rewiring the surviving
//! linkages.
//!
//! A homomorphism carries a jungle of pairwise non-isomorphic domain nets,
//! an image per domain net, and a frontier-letter relabeling. Four
//! classification flags are recomputed from the data:
//!
//! - alphabetical: every image is a single ranked letter,
//! - unexpanding: no image has more open ports than its source,
//! - abstracting: no image is empty,
//! - environment saving: manoeuvre letters stay manoeuvre letters.
//!
//! The conjunction alphabetical + abstracting + environment saving is the
//! class used everywhere abstraction relations are built.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded, Countdown};
use crate::jungle::{canonical_form, canonical_key, is_isomorphic, Jungle};
use crate::net::{FrontierLabel, Link, Net, NodeId, Port, PortDir, RankedLetter};
use crate::nuo::{nuo_decompose_sets, nuo_inverse, NuoError, NuoRepresentation};

/// Image of one domain net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockImage {
    Letter(RankedLetter),
    Net(Net),
}

impl BlockImage {
    /// A one-node image with no links and purely positional frontier is the
    /// same thing as a letter; normalize it.
    fn normalized(self) -> BlockImage {
        if let BlockImage::Net(net) = &self {
            if net.node_count() == 1 && net.links().is_empty() {
                let (&id, letter) = net.nodes().iter().next().unwrap();
                let positional = net.frontier().iter().all(|(p, label)| {
                    p.node == id && *label == FrontierLabel::positional(p.index)
                });
                if positional {
                    return BlockImage::Letter(letter.clone());
                }
            }
        }
        self
    }

    pub fn rank_len(&self) -> usize {
        match self {
            BlockImage::Letter(l) => l.rank_len() as usize,
            BlockImage::Net(n) => n.open_port_count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            BlockImage::Letter(_) => false,
            BlockImage::Net(n) => n.is_empty(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NbhFlags {
    pub alphabetical: bool,
    pub unexpanding: bool,
    pub abstracting: bool,
    pub environment_saving: bool,
}

impl NbhFlags {
    /// Alphabetical, abstracting and environment saving at once.
    pub fn is_alpanbh(&self) -> bool {
        self.alphabetical && self.abstracting && self.environment_saving
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NbhError {
    #[error("domain nets {first} and {second} are isomorphic but map to different images")]
    DomainConflict { first: usize, second: usize },
    #[error("block at element {element} is not in the homomorphism's domain")]
    BlockNotInDomain { element: usize },
    #[error("element {element} needs {needed} {dir} attachment slots but the image offers {capacity}")]
    ArityMismatch {
        element: usize,
        dir: &'static str,
        needed: usize,
        capacity: usize,
    },
    #[error("collapsing loses every linkage between the context and block element {block}")]
    LinkageLost { block: usize },
    #[error("net is not a member of the declared universe")]
    NotInUniverse,
    #[error("universe of {size} nets exceeds the cap {cap}")]
    UniverseTooLarge { size: usize, cap: usize },
    #[error("gravity product overflows")]
    GravityOverflow,
    #[error(transparent)]
    Nuo(#[from] NuoError),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// A net block homomorphism: domain jungle, image per member, frontier
/// relabeling, and optionally the flags the author declared (cross-checked
/// against the recomputed ones on load).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHomomorphism {
    pub name: String,
    domain: Vec<Net>,
    images: Vec<BlockImage>,
    index: BTreeMap<String, usize>,
    pub frontier_relabel: BTreeMap<FrontierLabel, FrontierLabel>,
    pub declared_flags: Option<NbhFlags>,
}

impl BlockHomomorphism {
    pub fn new(
        name: impl Into<String>,
        entries: Vec<(Net, BlockImage)>,
        frontier_relabel: BTreeMap<FrontierLabel, FrontierLabel>,
    ) -> Result<Self, NbhError> {
        let mut domain = Vec::new();
        let mut images = Vec::new();
        let mut index = BTreeMap::new();
        for (net, image) in entries {
            let form = canonical_form(&net);
            let image = image.normalized();
            if let Some(&existing) = index.get(&form.key) {
                if images[existing] != image {
                    return Err(NbhError::DomainConflict {
                        first: existing,
                        second: domain.len(),
                    });
                }
                continue;
            }
            index.insert(form.key, domain.len());
            domain.push(form.net);
            images.push(image);
        }
        Ok(BlockHomomorphism {
            name: name.into(),
            domain,
            images,
            index,
            frontier_relabel,
            declared_flags: None,
        })
    }

    /// The identity homomorphism for a net: every single-node subnet maps to
    /// itself (self-loops keep their net image, plain nodes their letter).
    pub fn identity_for(net: &Net) -> Self {
        let mut entries = Vec::new();
        for &id in net.nodes().keys() {
            let piece = net.induced(&BTreeSet::from([id]));
            let image = BlockImage::Net(piece.clone()).normalized();
            entries.push((piece, image));
        }
        BlockHomomorphism::new("identity", entries, BTreeMap::new())
            .expect("identity entries cannot conflict")
    }

    /// Domain as a jungle, in canonical order.
    pub fn block_domain(&self) -> Jungle {
        Jungle::from_nets(self.domain.iter().cloned())
    }

    pub fn domain_nets(&self) -> &[Net] {
        &self.domain
    }

    pub fn images(&self) -> &[BlockImage] {
        &self.images
    }

    /// Injective index of a domain member.
    pub fn index_of(&self, net: &Net) -> Option<usize> {
        self.index.get(&canonical_key(net)).copied()
    }

    pub fn image_of(&self, net: &Net) -> Option<&BlockImage> {
        self.index_of(net).map(|i| &self.images[i])
    }

    pub fn relabel(&self, label: &FrontierLabel) -> FrontierLabel {
        self.frontier_relabel
            .get(label)
            .cloned()
            .unwrap_or_else(|| label.clone())
    }

    /// Recomputes the four classification flags from the data.
    pub fn flags(&self) -> NbhFlags {
        let alphabetical = self
            .images
            .iter()
            .all(|i| matches!(i, BlockImage::Letter(_)));
        let unexpanding = self
            .domain
            .iter()
            .zip(&self.images)
            .all(|(d, i)| i.rank_len() <= d.open_port_count());
        let abstracting = self.images.iter().all(|i| !i.is_empty());
        let environment_saving = self
            .frontier_relabel
            .iter()
            .all(|(k, v)| !k.is_manoeuvre() || v.is_manoeuvre());
        NbhFlags {
            alphabetical,
            unexpanding,
            abstracting,
            environment_saving,
        }
    }

    pub fn is_alpanbh(&self) -> bool {
        self.flags().is_alpanbh()
    }
}

/// Recomputed classification of a homomorphism.
pub fn classify_nbh(h: &BlockHomomorphism) -> NbhFlags {
    h.flags()
}

/// Traced result of applying a homomorphism: the image net plus the
/// correspondence from source elements, links and frontier ports.
#[derive(Debug, Clone)]
pub struct NbhApplication {
    pub result: Net,
    /// Result node ids per source element (context first).
    pub element_nodes: Vec<BTreeSet<NodeId>>,
    /// Source inter-element link -> result link.
    pub link_trace: BTreeMap<Link, Link>,
    /// Source frontier port -> result frontier port.
    pub frontier_trace: BTreeMap<Port, Port>,
}

/// Replaces every cover element of the representation by its image and
/// rewires the surviving linkages.
pub fn apply_nbh(h: &BlockHomomorphism, rep: &NuoRepresentation) -> Result<Net, NbhError> {
    apply_nbh_traced(h, rep).map(|app| app.result)
}

pub fn apply_nbh_traced(
    h: &BlockHomomorphism,
    rep: &NuoRepresentation,
) -> Result<NbhApplication, NbhError> {
    let source = nuo_inverse(rep)?;
    let elements = rep.elements();
    let check_linkage = h.flags().abstracting;

    // Image lookup per element.
    let mut images = Vec::new();
    for (i, element) in elements.iter().enumerate() {
        match h.image_of(&element.net) {
            Some(img) => images.push(img.clone()),
            None => return Err(NbhError::BlockNotInDomain { element: i }),
        }
    }

    // Canonical owner of a node: the first element containing it.
    let owner = |node: NodeId| -> usize {
        elements
            .iter()
            .position(|e| e.node_set.contains(&node))
            .expect("cover reaches every node")
    };
    let owners = |node: NodeId| -> BTreeSet<usize> {
        elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.node_set.contains(&node))
            .map(|(i, _)| i)
            .collect()
    };

    // Instantiate images and collect their attachment slots.
    let mut nodes: BTreeMap<NodeId, RankedLetter> = BTreeMap::new();
    let mut links: BTreeSet<Link> = BTreeSet::new();
    let mut frontier: BTreeMap<Port, FrontierLabel> = BTreeMap::new();
    let mut element_nodes: Vec<BTreeSet<NodeId>> = Vec::new();
    let mut slots_in: Vec<Vec<Port>> = Vec::new();
    let mut slots_out: Vec<Vec<Port>> = Vec::new();
    let mut next_id: NodeId = 1;
    for image in &images {
        match image {
            BlockImage::Letter(letter) => {
                let id = next_id;
                next_id += 1;
                nodes.insert(id, letter.clone());
                element_nodes.push(BTreeSet::from([id]));
                slots_in.push((1..=letter.in_count).map(|k| Port::input(id, k)).collect());
                slots_out.push((1..=letter.out_count).map(|k| Port::output(id, k)).collect());
            }
            BlockImage::Net(m) => {
                let relabel: BTreeMap<NodeId, NodeId> = m
                    .node_ids()
                    .into_iter()
                    .enumerate()
                    .map(|(k, id)| (id, next_id + k as NodeId))
                    .collect();
                next_id += m.node_count() as NodeId;
                let inst = m.relabel_ids(&relabel);
                nodes.extend(inst.nodes().iter().map(|(&id, l)| (id, l.clone())));
                links.extend(inst.links().iter().copied());
                element_nodes.push(inst.node_ids());
                slots_in.push(inst.open_ports(PortDir::In));
                slots_out.push(inst.open_ports(PortDir::Out));
                // Slot ports stay open unless an attachment claims them.
                for (p, label) in inst.frontier() {
                    frontier.insert(*p, label.clone());
                }
            }
        }
    }

    // Attachment points per element: open ports of the extracted element
    // whose node the element canonically owns, in canonical order.
    let mut used_in: Vec<usize> = vec![0; elements.len()];
    let mut used_out: Vec<usize> = vec![0; elements.len()];
    let mut port_slot: BTreeMap<Port, Port> = BTreeMap::new();
    let mut frontier_trace: BTreeMap<Port, Port> = BTreeMap::new();

    for (i, element) in elements.iter().enumerate() {
        for (port, _) in element.net.frontier() {
            if owner(port.node) != i {
                continue;
            }
            // Only ports that carry an inter-element link or a genuine
            // source frontier entry consume a slot.
            let is_genuine_frontier = source.frontier().contains_key(port);
            let inter_link = source.link_at(*port).and_then(|l| {
                let peer_owners = match port.dir {
                    PortDir::In => owners(l.src),
                    PortDir::Out => owners(l.dst),
                };
                if peer_owners.intersection(&owners(port.node)).next().is_none() {
                    Some(*l)
                } else {
                    None
                }
            });
            if !is_genuine_frontier && inter_link.is_none() {
                continue;
            }
            let (slots, used): (&Vec<Port>, &mut usize) = match port.dir {
                PortDir::In => (&slots_in[i], &mut used_in[i]),
                PortDir::Out => (&slots_out[i], &mut used_out[i]),
            };
            if *used >= slots.len() {
                return Err(NbhError::ArityMismatch {
                    element: i,
                    dir: match port.dir {
                        PortDir::In => "in",
                        PortDir::Out => "out",
                    },
                    needed: *used + 1,
                    capacity: slots.len(),
                });
            }
            let slot = slots[*used];
            *used += 1;
            port_slot.insert(*port, slot);
            if is_genuine_frontier {
                let label = h.relabel(&source.frontier()[port]);
                frontier.insert(slot, label);
                frontier_trace.insert(*port, slot);
            } else {
                // The slot will be linked below; drop any open label the
                // image carried there.
                frontier.remove(&slot);
            }
        }
    }

    // Surviving links: source links whose endpoint owner sets are disjoint.
    let mut link_trace: BTreeMap<Link, Link> = BTreeMap::new();
    for link in &rep.glue_links {
        let src_owners = owners(link.src);
        let dst_owners = owners(link.dst);
        if src_owners.intersection(&dst_owners).next().is_some() {
            continue;
        }
        let from = port_slot
            .get(&link.source())
            .expect("inter-element out-port was assigned a slot");
        let to = port_slot
            .get(&link.target())
            .expect("inter-element in-port was assigned a slot");
        let image_link = Link::new(from.node, from.index, to.node, to.index);
        links.insert(image_link);
        link_trace.insert(*link, image_link);
    }

    // Remaining unclaimed slots on letter images become positional frontier.
    for (i, image) in images.iter().enumerate() {
        if let BlockImage::Letter(_) = image {
            for slot in slots_in[i].iter().chain(slots_out[i].iter()) {
                let occupied = links
                    .iter()
                    .any(|l| l.source() == *slot || l.target() == *slot);
                if !occupied && !frontier.contains_key(slot) {
                    frontier.insert(*slot, FrontierLabel::positional(slot.index));
                }
            }
        }
    }

    // Abstracting homomorphisms must keep at least one linkage between the
    // context image and each interacting block image.
    if check_linkage {
        for (b, element) in elements.iter().enumerate().skip(1) {
            let interacts = rep.glue_links.iter().any(|l| {
                let s = &rep.context.node_set;
                let t = &element.node_set;
                (s.contains(&l.src) && t.contains(&l.dst))
                    || (t.contains(&l.src) && s.contains(&l.dst))
            }) || element
                .node_set
                .intersection(&rep.context.node_set)
                .next()
                .is_some();
            if !interacts {
                continue;
            }
            let ctx_nodes = &element_nodes[0];
            let blk_nodes = &element_nodes[b];
            let linked = links.iter().any(|l| {
                (ctx_nodes.contains(&l.src) && blk_nodes.contains(&l.dst))
                    || (blk_nodes.contains(&l.src) && ctx_nodes.contains(&l.dst))
            });
            if !linked {
                return Err(NbhError::LinkageLost { block: b });
            }
        }
    }

    let result = Net::from_parts(nodes, links, frontier);
    debug_assert!(
        result.validate().is_empty(),
        "homomorphism produced an invalid net: {:?}",
        result.validate()
    );
    Ok(NbhApplication {
        result,
        element_nodes,
        link_trace,
        frontier_trace,
    })
}

/// Witness that two jungles are images of decompositions of one common net.
#[derive(Debug, Clone)]
pub struct AbstractionWitness {
    pub common_net: Net,
    pub rep_a: NuoRepresentation,
    pub rep_b: NuoRepresentation,
    pub hom_a: BlockHomomorphism,
    pub hom_b: BlockHomomorphism,
}

impl AbstractionWitness {
    /// The same witness viewed from the other side.
    pub fn swapped(self) -> AbstractionWitness {
        AbstractionWitness {
            common_net: self.common_net,
            rep_a: self.rep_b,
            rep_b: self.rep_a,
            hom_a: self.hom_b,
            hom_b: self.hom_a,
        }
    }
}

/// Bounded search for a common net whose decompositions collapse onto the
/// two singleton jungles. Candidates are enumerated by node count, then
/// canonical form; the first witness wins. `None` means not found within
/// budget — a legitimate answer for a bounded search.
pub fn abstraction_related(a: &Jungle, b: &Jungle, budget: &Budget) -> Option<AbstractionWitness> {
    let (x, y) = match (exactly_one(a), exactly_one(b)) {
        (Some(x), Some(y)) => (x, y),
        _ => return None,
    };
    let mut letter_pool: Vec<RankedLetter> = BTreeSet::from_iter(
        x.nodes()
            .values()
            .chain(y.nodes().values())
            .cloned()
            .chain([
                RankedLetter::new("g1", 0, 1),
                RankedLetter::new("g2", 1, 0),
                RankedLetter::new("g3", 1, 1),
            ]),
    )
    .into_iter()
    .collect();
    letter_pool.sort();

    let mut countdown = Countdown::new("abstraction_related", budget.candidates);
    let max_nodes = budget.nodes.min(4);
    for size in 1..=max_nodes {
        let candidates = enumerate_connected_nets(&letter_pool, size, &mut countdown);
        for k in candidates {
            if let Some(witness) = witness_for(&k, x, y, &mut countdown) {
                return Some(witness);
            }
        }
    }
    None
}

fn exactly_one(j: &Jungle) -> Option<&Net> {
    if j.len() == 1 {
        j.iter().next()
    } else {
        None
    }
}

/// All connected nets with `size` nodes over the letter pool, up to
/// isomorphism, in canonical order. Cut off silently once the countdown is
/// spent: the enclosing search treats exhaustion as "not found".
fn enumerate_connected_nets(
    pool: &[RankedLetter],
    size: usize,
    countdown: &mut Countdown,
) -> Vec<Net> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut letters = vec![0usize; size];
    'outer: loop {
        if countdown.tick().is_err() {
            break;
        }
        // Non-decreasing letter assignments only; isomorphism dedup below.
        if letters.windows(2).all(|w| w[0] <= w[1]) {
            let nodes: Vec<(NodeId, RankedLetter)> = letters
                .iter()
                .enumerate()
                .map(|(i, &l)| ((i + 1) as NodeId, pool[l].clone()))
                .collect();
            enumerate_linkings(&nodes, &mut seen, &mut out, countdown);
        }
        // Advance the letter multi-index.
        let mut i = 0;
        loop {
            if i == size {
                break 'outer;
            }
            letters[i] += 1;
            if letters[i] < pool.len() {
                break;
            }
            letters[i] = 0;
            i += 1;
        }
    }
    out.sort_by_key(canonical_key);
    out
}

fn enumerate_linkings(
    nodes: &[(NodeId, RankedLetter)],
    seen: &mut BTreeSet<String>,
    out: &mut Vec<Net>,
    countdown: &mut Countdown,
) {
    let out_ports: Vec<Port> = nodes
        .iter()
        .flat_map(|(id, l)| (1..=l.out_count).map(|k| Port::output(*id, k)))
        .collect();
    let in_ports: Vec<Port> = nodes
        .iter()
        .flat_map(|(id, l)| (1..=l.in_count).map(|k| Port::input(*id, k)))
        .collect();
    // Each out-port links to at most one in-port; enumerate partial
    // injective assignments.
    let mut assignment: Vec<Option<usize>> = vec![None; out_ports.len()];
    let mut used: Vec<bool> = vec![false; in_ports.len()];
    enumerate_assignments(
        nodes,
        &out_ports,
        &in_ports,
        0,
        &mut assignment,
        &mut used,
        seen,
        out,
        countdown,
    );
}

#[allow(clippy::too_many_arguments)]
fn enumerate_assignments(
    nodes: &[(NodeId, RankedLetter)],
    out_ports: &[Port],
    in_ports: &[Port],
    pos: usize,
    assignment: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    seen: &mut BTreeSet<String>,
    out: &mut Vec<Net>,
    countdown: &mut Countdown,
) {
    if countdown.tick().is_err() {
        return;
    }
    if pos == out_ports.len() {
        let links: BTreeSet<Link> = assignment
            .iter()
            .enumerate()
            .filter_map(|(o, maybe_i)| {
                maybe_i.map(|i| {
                    Link::new(
                        out_ports[o].node,
                        out_ports[o].index,
                        in_ports[i].node,
                        in_ports[i].index,
                    )
                })
            })
            .collect();
        let net = Net::build(nodes.iter().cloned(), links, []);
        if net.is_connected() {
            let key = canonical_key(&net);
            if seen.insert(key) {
                out.push(net);
            }
        }
        return;
    }
    // Leave the port open.
    enumerate_assignments(
        nodes, out_ports, in_ports, pos + 1, assignment, used, seen, out, countdown,
    );
    for i in 0..in_ports.len() {
        if !used[i] {
            used[i] = true;
            assignment[pos] = Some(i);
            enumerate_assignments(
                nodes, out_ports, in_ports, pos + 1, assignment, used, seen, out, countdown,
            );
            assignment[pos] = None;
            used[i] = false;
        }
    }
}

/// Tries to exhibit `k` as a common source for `x` and `y`: some partition
/// of `k` into connected parts collapses onto each of them under an
/// alphabetical abstracting homomorphism.
fn witness_for(k: &Net, x: &Net, y: &Net, countdown: &mut Countdown) -> Option<AbstractionWitness> {
    let partitions = connected_partitions(k);
    let mut found_a: Option<(NuoRepresentation, BlockHomomorphism)> = None;
    let mut found_b: Option<(NuoRepresentation, BlockHomomorphism)> = None;
    for partition in &partitions {
        if countdown.tick().is_err() {
            return None;
        }
        if found_a.is_none() {
            found_a = collapse_onto(k, partition, x, "hom_a");
        }
        if found_b.is_none() {
            found_b = collapse_onto(k, partition, y, "hom_b");
        }
        if found_a.is_some() && found_b.is_some() {
            break;
        }
    }
    let (rep_a, hom_a) = found_a?;
    let (rep_b, hom_b) = found_b?;
    Some(AbstractionWitness {
        common_net: k.clone(),
        rep_a,
        rep_b,
        hom_a,
        hom_b,
    })
}

/// Partitions of the node set into connected parts, fewest parts last.
fn connected_partitions(net: &Net) -> Vec<Vec<BTreeSet<NodeId>>> {
    let ids: Vec<NodeId> = net.node_ids().into_iter().collect();
    let mut out = Vec::new();
    let mut current: Vec<BTreeSet<NodeId>> = Vec::new();
    fn recurse(
        net: &Net,
        ids: &[NodeId],
        pos: usize,
        current: &mut Vec<BTreeSet<NodeId>>,
        out: &mut Vec<Vec<BTreeSet<NodeId>>>,
    ) {
        if pos == ids.len() {
            if current.iter().all(|part| net.induced(part).is_connected()) {
                out.push(current.clone());
            }
            return;
        }
        let node = ids[pos];
        for i in 0..current.len() {
            current[i].insert(node);
            recurse(net, ids, pos + 1, current, out);
            current[i].remove(&node);
        }
        current.push(BTreeSet::from([node]));
        recurse(net, ids, pos + 1, current, out);
        current.pop();
    }
    recurse(net, &ids, 0, &mut current, &mut out);
    out.sort_by_key(|p| p.len());
    out
}

/// Builds a homomorphism collapsing the partition's parts onto the nodes of
/// `target`, if some part-to-node assignment reproduces `target` exactly.
fn collapse_onto(
    k: &Net,
    partition: &[BTreeSet<NodeId>],
    target: &Net,
    name: &str,
) -> Option<(NuoRepresentation, BlockHomomorphism)> {
    if partition.len() != target.node_count() {
        return None;
    }
    let target_ids: Vec<NodeId> = target.node_ids().into_iter().collect();
    let mut perm: Vec<usize> = (0..partition.len()).collect();
    loop {
        let entries: Vec<(Net, BlockImage)> = perm
            .iter()
            .enumerate()
            .map(|(part_idx, &t_idx)| {
                let part_net = k.induced(&partition[part_idx]);
                let letter = target.nodes()[&target_ids[t_idx]].clone();
                (part_net, BlockImage::Letter(letter))
            })
            .collect();
        if let Ok(hom) = BlockHomomorphism::new(name, entries, BTreeMap::new()) {
            if hom.is_alpanbh() {
                if let Ok(rep) = nuo_decompose_sets(k, partition, 0) {
                    if let Ok(image) = apply_nbh(&hom, &rep) {
                        if is_isomorphic(&image, target) {
                            return Some((rep, hom));
                        }
                    }
                }
            }
        }
        if !next_permutation(&mut perm) {
            return None;
        }
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// A relation over universe indices.
pub type Relation = BTreeSet<(usize, usize)>;

/// Per-level saturation families and the gravity product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaturationReport {
    /// Families of classes (as universe index sets), one per level.
    pub per_level: Vec<BTreeSet<BTreeSet<usize>>>,
    /// Product of the per-level family cardinalities.
    pub gravity: u128,
}

/// Computes saturation levels 1..=depth of `t` over a finite universe.
///
/// The fundamental relations are closed into equivalences; the saturation
/// set of `t` is everything reachable from it under their union. Level k
/// collects the classes of the level-(k-1) relations intersected with the
/// saturation set (empty intersections dropped); each level's relation set
/// is generated by the existential pairing condition over every nonempty
/// subset of the previous level's relations, evaluated by exhaustive search.
pub fn saturation_and_gravity(
    t: &Net,
    depth: usize,
    universe: &Jungle,
    fundamental: &[Relation],
    cap: usize,
) -> Result<SaturationReport, NbhError> {
    if universe.len() > cap {
        return Err(NbhError::UniverseTooLarge {
            size: universe.len(),
            cap,
        });
    }
    let n = universe.len();
    let t_index = universe
        .keys()
        .position(|k| *k == canonical_key(t))
        .ok_or(NbhError::NotInUniverse)?;

    let mut level_relations: Vec<Relation> = fundamental
        .iter()
        .map(|r| equivalence_closure(r, n))
        .collect();
    level_relations.sort();
    level_relations.dedup();

    let union: Relation = level_relations.iter().flatten().copied().collect();
    let reach = equivalence_closure(&union, n);
    let sats: Vec<BTreeSet<usize>> = (0..n).map(|s| reachable(s, &reach)).collect();

    let mut per_level = Vec::new();
    let mut gravity: u128 = 1;
    for _ in 1..=depth {
        if level_relations.len() > cap {
            return Err(NbhError::UniverseTooLarge {
                size: level_relations.len(),
                cap,
            });
        }
        let families: Vec<BTreeSet<BTreeSet<usize>>> = (0..n)
            .map(|s| saturation_family(&level_relations, &sats[s], n))
            .collect();

        let family_t = families[t_index].clone();
        gravity = gravity
            .checked_mul(family_t.len() as u128)
            .ok_or(NbhError::GravityOverflow)?;
        per_level.push(family_t);

        // Next level: one relation per nonempty subset of this level's.
        let count = level_relations.len().min(16);
        let mut next: Vec<Relation> = Vec::new();
        for mask in 1u64..(1u64 << count) {
            let subset: Vec<&Relation> = (0..count)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| &level_relations[i])
                .collect();
            let mut rel: Relation = BTreeSet::new();
            for s in 0..n {
                for t2 in 0..n {
                    if paired(&families[s], &families[t2], &subset) {
                        rel.insert((s, t2));
                    }
                }
            }
            next.push(rel);
        }
        next.sort();
        next.dedup();
        level_relations = next;
    }

    Ok(SaturationReport { per_level, gravity })
}

/// Classes of the level relations cut down to a saturation set, empties
/// dropped.
fn saturation_family(
    rels: &[Relation],
    sat: &BTreeSet<usize>,
    n: usize,
) -> BTreeSet<BTreeSet<usize>> {
    let mut family: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
    for rel in rels {
        for s in 0..n {
            let class: BTreeSet<usize> = rel
                .iter()
                .filter(|(a, _)| *a == s)
                .map(|(_, b)| *b)
                .collect();
            if class.is_empty() {
                continue;
            }
            let cut: BTreeSet<usize> = class.intersection(sat).copied().collect();
            if !cut.is_empty() {
                family.insert(cut);
            }
        }
    }
    family
}

/// The existential pairing condition: some class of `s` and some class of
/// `t` relate element-wise through some relation of the subset, in both
/// directions.
fn paired(
    fam_s: &BTreeSet<BTreeSet<usize>>,
    fam_t: &BTreeSet<BTreeSet<usize>>,
    subset: &[&Relation],
) -> bool {
    fam_s.iter().any(|p_class| {
        fam_t.iter().any(|q_class| {
            let forward = p_class.iter().all(|&p| {
                q_class
                    .iter()
                    .any(|&q| subset.iter().any(|rel| rel.contains(&(p, q))))
            });
            let backward = q_class.iter().all(|&q| {
                p_class
                    .iter()
                    .any(|&p| subset.iter().any(|rel| rel.contains(&(q, p))))
            });
            forward && backward
        })
    })
}

fn equivalence_closure(rel: &Relation, n: usize) -> Relation {
    let mut closed: Relation = rel.clone();
    for i in 0..n {
        closed.insert((i, i));
    }
    let symmetric: Vec<(usize, usize)> = closed.iter().map(|&(a, b)| (b, a)).collect();
    closed.extend(symmetric);
    loop {
        let mut grew = false;
        let snapshot: Vec<(usize, usize)> = closed.iter().copied().collect();
        for &(a, b) in &snapshot {
            for &(c, d) in &snapshot {
                if b == c && closed.insert((a, d)) {
                    grew = true;
                }
            }
        }
        if !grew {
            return closed;
        }
    }
}

fn reachable(start: usize, equivalence: &Relation) -> BTreeSet<usize> {
    equivalence
        .iter()
        .filter(|(a, _)| *a == start)
        .map(|(_, b)| *b)
        .chain([start])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::*;

    fn trivial_rep(net: &Net) -> NuoRepresentation {
        nuo_decompose_sets(net, &[net.node_ids()], 0).unwrap()
    }

    #[test]
    fn identity_on_a_singleton_cover_is_identity() {
        let h = BlockHomomorphism::identity_for(&chain2());
        let rep =
            nuo_decompose_sets(&chain2(), &[BTreeSet::from([1]), BTreeSet::from([2])], 0).unwrap();
        let image = apply_nbh(&h, &rep).unwrap();
        assert!(is_isomorphic(&image, &chain2()));
    }

    #[test]
    fn identity_preserves_loops_and_frontier() {
        for net in [single_a(), chain2(), loop_net()] {
            let h = BlockHomomorphism::identity_for(&net);
            let cover: Vec<BTreeSet<NodeId>> = net
                .node_ids()
                .into_iter()
                .map(|id| BTreeSet::from([id]))
                .collect();
            let rep = nuo_decompose_sets(&net, &cover, 0).unwrap();
            let image = apply_nbh(&h, &rep).unwrap();
            assert!(is_isomorphic(&image, &net), "identity failed on {net:?}");
        }
    }

    #[test]
    fn collapsing_the_whole_chain_to_a_letter() {
        let h = BlockHomomorphism::new(
            "collapse",
            vec![(chain2(), BlockImage::Letter(RankedLetter::new("c", 0, 0)))],
            BTreeMap::new(),
        )
        .unwrap();
        let image = apply_nbh(&h, &trivial_rep(&chain2())).unwrap();
        assert!(is_isomorphic(&image, &single_c()));
    }

    #[test]
    fn collapsing_one_block_preserves_the_linkage() {
        let a_part = chain2().induced(&BTreeSet::from([1]));
        let b_part = chain2().induced(&BTreeSet::from([2]));
        let h = BlockHomomorphism::new(
            "abstract_b",
            vec![
                (a_part.clone(), BlockImage::Net(a_part)),
                (b_part, BlockImage::Letter(RankedLetter::new("beta", 1, 0))),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let rep =
            nuo_decompose_sets(&chain2(), &[BTreeSet::from([1]), BTreeSet::from([2])], 0).unwrap();
        let image = apply_nbh(&h, &rep).unwrap();
        let expected = Net::build(
            [
                (1, RankedLetter::new("a", 0, 1)),
                (2, RankedLetter::new("beta", 1, 0)),
            ],
            [Link::new(1, 1, 2, 1)],
            [],
        );
        assert!(is_isomorphic(&image, &expected));
    }

    #[test]
    fn identity_classifies_with_all_flags() {
        let h = BlockHomomorphism::identity_for(&chain2());
        let flags = classify_nbh(&h);
        assert!(flags.alphabetical);
        assert!(flags.unexpanding);
        assert!(flags.abstracting);
        assert!(flags.environment_saving);
        assert!(h.is_alpanbh());
    }

    #[test]
    fn net_images_are_not_alphabetical() {
        let h = BlockHomomorphism::new(
            "expand",
            vec![(single_a(), BlockImage::Net(chain2()))],
            BTreeMap::new(),
        )
        .unwrap();
        assert!(!classify_nbh(&h).alphabetical);
    }

    #[test]
    fn rank_expansion_is_flagged() {
        let c = Net::single(RankedLetter::new("c", 1, 1));
        let h = BlockHomomorphism::new(
            "expand_rank",
            vec![(c, BlockImage::Letter(RankedLetter::new("d", 2, 1)))],
            BTreeMap::new(),
        )
        .unwrap();
        let flags = classify_nbh(&h);
        assert!(!flags.unexpanding);
        assert!(flags.alphabetical);
    }

    #[test]
    fn missing_block_is_reported() {
        let h = BlockHomomorphism::new(
            "partial",
            vec![(single_a(), BlockImage::Letter(RankedLetter::new("a", 0, 0)))],
            BTreeMap::new(),
        )
        .unwrap();
        let err = apply_nbh(&h, &trivial_rep(&single_c())).unwrap_err();
        assert!(matches!(err, NbhError::BlockNotInDomain { element: 0 }));
    }

    #[test]
    fn overlap_only_interaction_loses_linkage_under_abstracting() {
        // Cover: whole chain as context, node 2 again as an overlapping
        // block. Collapsing both to letters leaves no context-block link.
        let rep =
            nuo_decompose_sets(&chain2(), &[BTreeSet::from([1, 2]), BTreeSet::from([2])], 0)
                .unwrap();
        let b_part = chain2().induced(&BTreeSet::from([2]));
        let h = BlockHomomorphism::new(
            "overlapping",
            vec![
                (chain2(), BlockImage::Letter(RankedLetter::new("s", 0, 0))),
                (b_part, BlockImage::Letter(RankedLetter::new("beta", 1, 0))),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let err = apply_nbh(&h, &rep).unwrap_err();
        assert!(matches!(err, NbhError::LinkageLost { block: 1 }));
    }

    #[test]
    fn abstraction_relates_a_net_to_itself() {
        let a = Jungle::from_nets([single_a()]);
        let witness = abstraction_related(&a, &a, &Budget::desk()).unwrap();
        assert!(is_isomorphic(&witness.common_net, &single_a()));
        let image_a = apply_nbh(&witness.hom_a, &witness.rep_a).unwrap();
        assert!(is_isomorphic(&image_a, &single_a()));
    }

    #[test]
    fn abstraction_relates_two_different_letters() {
        let a = Jungle::from_nets([single_c()]);
        let d = Net::single(RankedLetter::new("d", 0, 0));
        let b = Jungle::from_nets([d.clone()]);
        let witness = abstraction_related(&a, &b, &Budget::new(4, 4, 200_000)).unwrap();
        let image_a = apply_nbh(&witness.hom_a, &witness.rep_a).unwrap();
        let image_b = apply_nbh(&witness.hom_b, &witness.rep_b).unwrap();
        assert!(is_isomorphic(&image_a, &single_c()));
        assert!(is_isomorphic(&image_b, &d));
        assert!(witness.hom_a.is_alpanbh());
        assert!(witness.hom_b.is_alpanbh());
    }

    #[test]
    fn zero_budget_finds_nothing() {
        let a = Jungle::from_nets([single_a()]);
        let b = Jungle::from_nets([single_c()]);
        let none = abstraction_related(&a, &b, &Budget::new(0, 4, 1000));
        assert!(none.is_none());
    }

    #[test]
    fn witnesses_swap_symmetrically() {
        let a = Jungle::from_nets([single_a()]);
        let witness = abstraction_related(&a, &a, &Budget::desk()).unwrap();
        let swapped = witness.swapped();
        let image = apply_nbh(&swapped.hom_a, &swapped.rep_a).unwrap();
        assert!(is_isomorphic(&image, &single_a()));
    }

    fn identity_relation(n: usize) -> Relation {
        (0..n).map(|i| (i, i)).collect()
    }

    #[test]
    fn saturation_over_a_singleton_universe_is_trivial() {
        let universe = Jungle::from_nets([single_a()]);
        let report =
            saturation_and_gravity(&single_a(), 3, &universe, &[identity_relation(1)], 64).unwrap();
        assert_eq!(report.per_level.len(), 3);
        for level in &report.per_level {
            assert_eq!(level.len(), 1);
        }
        assert_eq!(report.gravity, 1);
    }

    #[test]
    fn saturation_reflects_a_two_element_class() {
        let universe = Jungle::from_nets([single_a(), single_c(), chain2()]);
        let idx = |net: &Net| {
            universe
                .keys()
                .position(|k| *k == canonical_key(net))
                .unwrap()
        };
        let glue: Relation = BTreeSet::from([(idx(&single_a()), idx(&single_c()))]);
        let report = saturation_and_gravity(&single_a(), 1, &universe, &[glue], 64).unwrap();
        assert_eq!(report.per_level.len(), 1);
        let family = &report.per_level[0];
        assert_eq!(family.len(), 1);
        let class = family.iter().next().unwrap();
        assert_eq!(class.len(), 2);
        assert_eq!(report.gravity, 1);
    }

    #[test]
    fn gravity_is_the_product_of_level_cardinalities() {
        let universe = Jungle::from_nets([single_a(), single_c(), chain2()]);
        let idx = |net: &Net| {
            universe
                .keys()
                .position(|k| *k == canonical_key(net))
                .unwrap()
        };
        let glue: Relation = BTreeSet::from([(idx(&single_a()), idx(&single_c()))]);
        let report = saturation_and_gravity(&single_a(), 2, &universe, &[glue], 64).unwrap();
        let expected: u128 = report
            .per_level
            .iter()
            .map(|family| family.len() as u128)
            .product();
        assert_eq!(report.gravity, expected);
    }

    #[test]
    fn nets_outside_the_universe_are_rejected() {
        let universe = Jungle::from_nets([single_a()]);
        let err = saturation_and_gravity(&single_c(), 1, &universe, &[], 64).unwrap_err();
        assert!(matches!(err, NbhError::NotInUniverse));
    }

    #[test]
    fn oversized_universes_are_rejected() {
        let universe = Jungle::from_nets([single_a(), single_c()]);
        let err = saturation_and_gravity(&single_a(), 1, &universe, &[], 1).unwrap_err();
        assert!(matches!(err, NbhError::UniverseTooLarge { .. }));
    }
}
