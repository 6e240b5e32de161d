//! Brute-force derivation-space exploration.
//!
//! Ground truth for the confluence checker on desk-scale instances: a
//! breadth-first closure of one-step rewrite images, deduplicated by
//! isomorphism, plus a joinability search that compares the enclosures of
//! candidate meets. Built only on the net and rule machinery, sharing no
//! code with the analytic demand evaluation, so agreement between the two
//! is evidence rather than tautology.

use std::collections::BTreeMap;

use crate::budget::{Budget, BudgetExceeded};
use crate::jungle::{canonical_form, canonical_key, Jungle};
use crate::matching::enclose;
use crate::net::Net;
use crate::rns::{apply_rns_lenient, Rule, RuleSystem};

/// Breadth-first derivation space: vertices are isomorphism classes,
/// edges record which rule produced which class.
#[derive(Debug, Clone)]
pub struct DerivationSpace {
    /// Canonical representatives, in discovery order (root first).
    pub vertices: Vec<Net>,
    /// (source vertex, rule index, target vertex).
    pub edges: Vec<(usize, usize, usize)>,
    pub root: usize,
    pub depth: usize,
    /// True when the vertex cap stopped the closure early.
    pub truncated: bool,
    /// Occurrences skipped because their boundary could not be rewired.
    pub skipped_rewires: usize,
}

impl DerivationSpace {
    /// Vertex layers by distance from the root.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut distance: BTreeMap<usize, usize> = BTreeMap::from([(self.root, 0)]);
        let mut layers: Vec<Vec<usize>> = vec![vec![self.root]];
        loop {
            let mut next = Vec::new();
            for &(src, _, dst) in &self.edges {
                if distance.contains_key(&src)
                    && distance[&src] + 1 == layers.len()
                    && !distance.contains_key(&dst)
                {
                    distance.insert(dst, layers.len());
                    next.push(dst);
                }
            }
            if next.is_empty() {
                return layers;
            }
            next.sort();
            next.dedup();
            layers.push(next);
        }
    }
}

/// Breadth-first closure of single-step rewrite images up to `depth`,
/// deduplicated by isomorphism. Hitting the vertex cap is recorded on the
/// result, never silent.
pub fn derivation_space(
    root: &Net,
    rules: &[Rule],
    depth: usize,
    cap: usize,
    budget: &Budget,
) -> Result<DerivationSpace, BudgetExceeded> {
    let root_form = canonical_form(root);
    let mut index: BTreeMap<String, usize> = BTreeMap::from([(root_form.key.clone(), 0)]);
    let mut vertices = vec![root_form.net];
    let mut edges = Vec::new();
    let mut truncated = false;
    let mut skipped = 0usize;
    let mut frontier: Vec<usize> = vec![0];

    for _ in 0..depth {
        let mut next_frontier = Vec::new();
        for &v in &frontier {
            for (rule_idx, rule) in rules.iter().enumerate() {
                let sys = RuleSystem::single(rule.clone());
                let start = Jungle::from_nets([vertices[v].clone()]);
                let (images, failures) = apply_rns_lenient(&sys, &start, budget)?;
                skipped += failures.len();
                for image in images.iter() {
                    let key = canonical_key(image);
                    let target = match index.get(&key) {
                        Some(&t) => t,
                        None => {
                            if vertices.len() >= cap {
                                truncated = true;
                                continue;
                            }
                            let t = vertices.len();
                            index.insert(key, t);
                            vertices.push(image.clone());
                            next_frontier.push(t);
                            t
                        }
                    };
                    edges.push((v, rule_idx, target));
                }
            }
        }
        edges.sort();
        edges.dedup();
        if next_frontier.is_empty() {
            break;
        }
        frontier = next_frontier;
    }
    edges.sort();
    edges.dedup();

    Ok(DerivationSpace {
        vertices,
        edges,
        root: 0,
        depth,
        truncated,
        skipped_rewires: skipped,
    })
}

/// How the enclosures of the two candidate meets compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EnclosureRelation {
    Equal,
    /// Left side's enclosure is a proper subset of the right side's.
    Subset,
    /// Left side's enclosure is a proper superset of the right side's.
    Superset,
    Incomparable,
}

impl std::fmt::Display for EnclosureRelation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EnclosureRelation::Equal => "=",
            EnclosureRelation::Subset => "subset",
            EnclosureRelation::Superset => "superset",
            EnclosureRelation::Incomparable => "incomparable",
        };
        write!(f, "{s}")
    }
}

/// Compares the enclosures of two jungles.
pub fn compare_enclosures(
    left: &Jungle,
    right: &Jungle,
    budget: &Budget,
) -> Result<EnclosureRelation, BudgetExceeded> {
    let enc = |j: &Jungle| -> Result<Jungle, BudgetExceeded> {
        let mut out = Jungle::new();
        for net in j.iter() {
            out = out.union(&enclose(net, budget)?);
        }
        Ok(out)
    };
    let l = enc(left)?;
    let r = enc(right)?;
    Ok(compare_jungles(&l, &r))
}

fn compare_jungles(l: &Jungle, r: &Jungle) -> EnclosureRelation {
    match (l.is_subset(r), r.is_subset(l)) {
        (true, true) => EnclosureRelation::Equal,
        (true, false) => EnclosureRelation::Subset,
        (false, true) => EnclosureRelation::Superset,
        (false, false) => EnclosureRelation::Incomparable,
    }
}

/// Verdict of the joinability search.
#[derive(Debug, Clone)]
pub struct JoinVerdict {
    /// Total completion steps (both sides) of the first comparable pair.
    pub joinable_at: Option<usize>,
    /// The meet when the enclosures are equal.
    pub meet: Option<Net>,
    pub relation: EnclosureRelation,
}

/// Computes the one-step images of `v` under `r_a` and `r_b`, explores
/// completion-rule derivations from both, and reports the first pair of
/// nets whose enclosures are comparable; equality is preferred over proper
/// inclusion at the same search rank.
pub fn joinable(
    v: &Net,
    r_a: &Rule,
    r_b: &Rule,
    completion_rules: &[Rule],
    depth: usize,
    budget: &Budget,
) -> Result<JoinVerdict, BudgetExceeded> {
    let start = Jungle::from_nets([v.clone()]);
    let side = |rule: &Rule| -> Result<Vec<Vec<Net>>, BudgetExceeded> {
        let sys = RuleSystem::single(rule.clone());
        let (first, _) = apply_rns_lenient(&sys, &start, budget)?;
        // Layered derivations: layer d = nets d completion steps after the
        // initial rule application.
        let mut layers: Vec<Vec<Net>> = vec![first.iter().cloned().collect()];
        let mut seen: Jungle = first.clone();
        for _ in 0..depth {
            let mut layer = Jungle::new();
            for net in layers.last().unwrap() {
                for c in completion_rules {
                    let sys = RuleSystem::single(c.clone());
                    let (images, _) =
                        apply_rns_lenient(&sys, &Jungle::from_nets([net.clone()]), budget)?;
                    for image in images.iter() {
                        if !seen.contains(image) {
                            layer.insert(image.clone());
                        }
                    }
                }
            }
            if layer.is_empty() {
                break;
            }
            seen = seen.union(&layer);
            layers.push(layer.iter().cloned().collect());
        }
        Ok(layers)
    };

    let side_a = side(r_a)?;
    let side_b = side(r_b)?;

    // Precompute enclosures once per net.
    let enclosures = |layers: &[Vec<Net>]| -> Result<Vec<Vec<(Net, Jungle)>>, BudgetExceeded> {
        layers
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|net| Ok((net.clone(), enclose(net, budget)?)))
                    .collect()
            })
            .collect()
    };
    let enc_a = enclosures(&side_a)?;
    let enc_b = enclosures(&side_b)?;

    // Scan pairs by total completion depth, preferring equality.
    let max_rank = (enc_a.len() - 1) + (enc_b.len() - 1);
    for rank in 0..=max_rank {
        let mut best: Option<(EnclosureRelation, Net)> = None;
        for da in 0..enc_a.len() {
            let Some(db) = rank.checked_sub(da) else {
                continue;
            };
            if db >= enc_b.len() {
                continue;
            }
            for (net_a, enc_of_a) in &enc_a[da] {
                for (_net_b, enc_of_b) in &enc_b[db] {
                    let relation = compare_jungles(enc_of_a, enc_of_b);
                    if relation == EnclosureRelation::Incomparable {
                        continue;
                    }
                    let better = match (&best, relation) {
                        (None, _) => true,
                        (Some((EnclosureRelation::Equal, _)), _) => false,
                        (Some(_), EnclosureRelation::Equal) => true,
                        _ => false,
                    };
                    if better {
                        best = Some((relation, net_a.clone()));
                    }
                }
            }
        }
        if let Some((relation, net_a)) = best {
            return Ok(JoinVerdict {
                joinable_at: Some(rank),
                meet: if relation == EnclosureRelation::Equal {
                    Some(net_a)
                } else {
                    None
                },
                relation,
            });
        }
    }
    Ok(JoinVerdict {
        joinable_at: None,
        meet: None,
        relation: EnclosureRelation::Incomparable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::*;
    use crate::net::{FrontierLabel, Net, RankedLetter};
    use std::collections::{BTreeMap, BTreeSet};

    fn closed_relabel(name: &str, from: &str, to: &str) -> Rule {
        Rule::new(
            name,
            Net::single(RankedLetter::new(from, 0, 0)),
            Net::single(RankedLetter::new(to, 0, 0)),
        )
    }

    fn open_relabel(name: &str, from: RankedLetter, to: RankedLetter) -> Rule {
        let make = |letter: RankedLetter| {
            let base = Net::single(letter);
            let frontier: BTreeMap<_, _> = base
                .ports_of(1)
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p, FrontierLabel::manoeuvre(format!("x{i}"))))
                .collect();
            Net::from_parts(base.nodes().clone(), BTreeSet::new(), frontier)
        };
        Rule::new(name, make(from), make(to))
    }

    #[test]
    fn depth_zero_space_is_the_root_alone() {
        let space = derivation_space(
            &single_a(),
            &[closed_relabel("r", "a", "c")],
            0,
            64,
            &Budget::desk(),
        )
        .unwrap();
        assert_eq!(space.vertices.len(), 1);
        assert!(space.edges.is_empty());
    }

    #[test]
    fn single_application_adds_one_vertex_and_edge() {
        let space = derivation_space(
            &single_a(),
            &[closed_relabel("r", "a", "c")],
            1,
            64,
            &Budget::desk(),
        )
        .unwrap();
        assert_eq!(space.vertices.len(), 2);
        assert_eq!(space.edges.len(), 1);
        assert!(!space.truncated);
    }

    #[test]
    fn relabel_cycle_closes_without_growth() {
        let rules = [
            closed_relabel("ac", "a", "c"),
            closed_relabel("ca", "c", "a"),
        ];
        let space = derivation_space(&single_a(), &rules, 2, 64, &Budget::desk()).unwrap();
        assert_eq!(space.vertices.len(), 2);
        assert_eq!(space.edges.len(), 2);
        let deeper = derivation_space(&single_a(), &rules, 4, 64, &Budget::desk()).unwrap();
        assert_eq!(deeper.vertices.len(), 2);
        assert_eq!(deeper.edges.len(), 2);
    }

    #[test]
    fn rule_order_does_not_change_the_space() {
        let r1 = closed_relabel("ac", "a", "c");
        let r2 = closed_relabel("ad", "a", "d");
        let fwd =
            derivation_space(&single_a(), &[r1.clone(), r2.clone()], 2, 64, &Budget::desk())
                .unwrap();
        let rev = derivation_space(&single_a(), &[r2, r1], 2, 64, &Budget::desk()).unwrap();
        let keys = |s: &DerivationSpace| {
            let mut v: Vec<String> = s.vertices.iter().map(canonical_key).collect();
            v.sort();
            v
        };
        assert_eq!(keys(&fwd), keys(&rev));
        assert_eq!(fwd.edges.len(), rev.edges.len());
    }

    #[test]
    fn truncation_is_flagged() {
        let rules = [
            closed_relabel("ac", "a", "c"),
            closed_relabel("cd", "c", "d"),
            closed_relabel("de", "d", "e"),
        ];
        let space = derivation_space(&single_a(), &rules, 3, 2, &Budget::desk()).unwrap();
        assert!(space.truncated);
        assert_eq!(space.vertices.len(), 2);
    }

    #[test]
    fn identity_rules_join_at_depth_zero() {
        let id = open_relabel(
            "id",
            RankedLetter::new("a", 0, 1),
            RankedLetter::new("a", 0, 1),
        );
        let verdict = joinable(&chain2(), &id, &id, &[], 2, &Budget::desk()).unwrap();
        assert_eq!(verdict.joinable_at, Some(0));
        assert_eq!(verdict.relation, EnclosureRelation::Equal);
        assert!(verdict.meet.is_some());
    }

    #[test]
    fn commuting_relabels_join_at_depth_two() {
        // CHAIN2 with r_a relabeling node 1 and r_b relabeling node 2; the
        // mirrored completions close the square.
        let ra = open_relabel(
            "ra",
            RankedLetter::new("a", 0, 1),
            RankedLetter::new("a2", 0, 1),
        );
        let rb = open_relabel(
            "rb",
            RankedLetter::new("b", 1, 0),
            RankedLetter::new("b2", 1, 0),
        );
        let verdict = joinable(
            &chain2(),
            &ra,
            &rb,
            &[ra.clone(), rb.clone()],
            2,
            &Budget::desk(),
        )
        .unwrap();
        assert_eq!(verdict.joinable_at, Some(2));
        assert_eq!(verdict.relation, EnclosureRelation::Equal);
    }

    #[test]
    fn conflicting_rules_without_completions_do_not_join() {
        let ra = closed_relabel("ra", "a", "c");
        let rb = closed_relabel("rb", "a", "d");
        let verdict = joinable(&single_a(), &ra, &rb, &[], 2, &Budget::desk()).unwrap();
        assert_eq!(verdict.joinable_at, None);
        assert_eq!(verdict.relation, EnclosureRelation::Incomparable);
    }
}
