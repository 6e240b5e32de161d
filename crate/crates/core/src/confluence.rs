//! Multi-dimensional confluence checking.
//!
//! Dimensions are named jungles scoping where rewriting is allowed to act;
//! grade homomorphisms abstract nets before dimension membership is tested.
//! A net belongs to the initial family of a dimension set when some grade
//! image of it encloses a dimension member.
//!
//! For a ground net and a rule pair, connector pairs drawn from the two
//! dimensional rule sets are screened against demand conditions (dimension
//! content of the one-sided result must survive into the joined result,
//! without stray outward links into same-dimension content, while staying
//! linked to other-dimension content); pairs that pass are compared by the
//! enclosures of the two joined results. Equal enclosures mean the verdict
//! is comprehensive, a proper inclusion makes it partial with a direction,
//! and a failed demand or incomparable enclosures mean none.
//!
//! The demand clauses nest enclosure applications ambiguously; the default
//! reading intersects first, rewrites, then encloses. The `strict_parens`
//! switch wraps the intersected jungles in one extra enclosure before
//! rewriting, the alternative reading of the same clauses.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded, Countdown};
use crate::jungle::{canonical_key, Jungle};
use crate::matching::{enclose_jungle, occurrences};
use crate::nbh::BlockHomomorphism;
use crate::net::{Net, NodeId};
use crate::oracle::EnclosureRelation;
use crate::parallel::apply_via_cover;
use crate::rns::{apply_rns, apply_rns_lenient, RnsError, Rule, RuleSystem};

/// Abstraction applied before dimension membership is tested.
#[derive(Debug, Clone)]
pub enum Grade {
    Identity,
    Hom(BlockHomomorphism),
}

impl Grade {
    /// Image of a net under the grade; `None` when the homomorphism's
    /// domain does not cover it.
    pub fn image(&self, net: &Net, budget: &Budget) -> Option<Net> {
        match self {
            Grade::Identity => Some(net.clone()),
            Grade::Hom(h) => apply_via_cover(h, net, budget).ok().flatten(),
        }
    }

    /// Preimages of a net under the grade: letters are substituted back by
    /// the domain blocks mapping to them.
    pub fn preimages(&self, net: &Net, budget: &Budget) -> Vec<Net> {
        match self {
            Grade::Identity => vec![net.clone()],
            Grade::Hom(h) => crate::parallel::invert_alphabetical(h, net, budget),
        }
    }
}

/// Grade plus its declared name for reports.
#[derive(Debug, Clone)]
pub struct GradeEntry {
    pub name: String,
    pub grade: Grade,
}

impl GradeEntry {
    pub fn identity() -> Self {
        GradeEntry {
            name: "identity".into(),
            grade: Grade::Identity,
        }
    }
}

/// A family of named dimensions with the grade homomorphisms used to test
/// membership.
#[derive(Debug, Clone, Default)]
pub struct DimensionFamily {
    pub dimensions: Vec<(String, Jungle)>,
    pub grades: Vec<GradeEntry>,
}

impl DimensionFamily {
    pub fn union(&self) -> Jungle {
        self.dimensions
            .iter()
            .fold(Jungle::new(), |acc, (_, j)| acc.union(j))
    }
}

/// Everything the checker needs besides the ground and the rules.
#[derive(Debug, Clone)]
pub struct ConfluenceContext {
    pub dims_a: DimensionFamily,
    pub dims_b: DimensionFamily,
    pub strict_parens: bool,
    pub budget: Budget,
}

impl ConfluenceContext {
    fn grades(&self) -> Vec<GradeEntry> {
        let mut out: Vec<GradeEntry> = self.dims_a.grades.clone();
        out.extend(self.dims_b.grades.iter().cloned());
        if out.is_empty() {
            // Membership degenerates to plain enclosure overlap.
            out.push(GradeEntry::identity());
        }
        out
    }
}

/// Membership in the initial family of a dimension union: some grade image
/// of the net encloses a member of the union.
pub fn is_initial(
    net: &Net,
    dims_union: &Jungle,
    grades: &[GradeEntry],
    budget: &Budget,
) -> Result<bool, BudgetExceeded> {
    if dims_union.is_empty() {
        return Ok(false);
    }
    for entry in grades {
        if let Some(image) = entry.grade.image(net, budget) {
            let enc = crate::matching::enclose(&image, budget)?;
            if dims_union.iter().any(|d| enc.contains(d)) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The members of `space` that belong to the initial family of the
/// dimension subset under the given grades.
pub fn initial_family(
    space: &Jungle,
    dims: &[(String, Jungle)],
    grades: &[GradeEntry],
    budget: &Budget,
) -> Result<Jungle, BudgetExceeded> {
    let union = dims
        .iter()
        .fold(Jungle::new(), |acc, (_, j)| acc.union(j));
    let grade_list: Vec<GradeEntry> = if grades.is_empty() {
        vec![GradeEntry::identity()]
    } else {
        grades.to_vec()
    };
    let mut out = Jungle::new();
    for net in space.iter() {
        if is_initial(net, &union, &grade_list, budget)? {
            out.insert(net.clone());
        }
    }
    Ok(out)
}

/// Keeps the rules that preserve the dimensional closure: for every grade
/// and every nonempty dimension subset, rewriting the grade-preimage
/// enclosure of the subset's union and pushing the results back through the
/// grade stays inside the union's enclosure.
pub fn dimensional_rule_set(
    rules: &[Rule],
    dims: &DimensionFamily,
    budget: &Budget,
) -> Result<Vec<Rule>, BudgetExceeded> {
    let grade_list: Vec<GradeEntry> = if dims.grades.is_empty() {
        vec![GradeEntry::identity()]
    } else {
        dims.grades.clone()
    };
    let n = dims.dimensions.len();
    let mut kept = Vec::new();
    'rules: for rule in rules {
        for entry in &grade_list {
            for mask in 1u32..(1u32 << n.min(16)) {
                let union = dims
                    .dimensions
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .fold(Jungle::new(), |acc, (_, (_, j))| acc.union(j));
                let target = enclose_jungle(&union, budget)?;
                let mut preimage = Jungle::new();
                for d in union.iter() {
                    preimage.extend(entry.grade.preimages(d, budget));
                }
                let source = enclose_jungle(&preimage, budget)?;
                let sys = RuleSystem::single(rule.clone());
                let (rewritten, _) = apply_rns_lenient(&sys, &source, budget)?;
                for net in rewritten.iter() {
                    match entry.grade.image(net, budget) {
                        Some(image) if target.contains(&image) => {}
                        _ => continue 'rules,
                    }
                }
            }
        }
        kept.push(rule.clone());
    }
    Ok(kept)
}

/// Connector pairs drawn from the two dimensional rule sets.
#[derive(Debug, Clone, Default)]
pub struct ConnectorSet {
    pub pairs: Vec<(Rule, Rule)>,
}

impl ConnectorSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfluenceError {
    #[error(transparent)]
    Rns(#[from] RnsError),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Evaluation of one connector pair.
#[derive(Debug, Clone)]
pub struct PairEvaluation {
    pub forward_rule: String,
    pub backward_rule: String,
    pub demands_passed: bool,
    pub demand_failures: Vec<String>,
    pub relation: EnclosureRelation,
    pub left_enclosure: usize,
    pub right_enclosure: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Comprehensive,
    Partial,
    None,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerdictKind::Comprehensive => "comprehensive",
            VerdictKind::Partial => "partial",
            VerdictKind::None => "none",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct ConfluenceVerdict {
    pub kind: VerdictKind,
    /// Equal for comprehensive; the proper inclusion direction for partial.
    pub direction: Option<EnclosureRelation>,
    pub pairs: Vec<PairEvaluation>,
}

fn enc_members_in(
    jungle: &Jungle,
    family: &Jungle,
    budget: &Budget,
) -> Result<Jungle, BudgetExceeded> {
    Ok(enclose_jungle(jungle, budget)?.intersection(family))
}

/// The initial family used by the demand filters, computed over the
/// enclosure of the dimension union itself.
fn family_of(
    dims: &DimensionFamily,
    grades: &[GradeEntry],
    budget: &Budget,
) -> Result<Jungle, BudgetExceeded> {
    let union = dims.union();
    let space = enclose_jungle(&union, budget)?;
    let mut out = Jungle::new();
    for net in space.iter() {
        if is_initial(net, &union, grades, budget)? {
            out.insert(net.clone());
        }
    }
    Ok(out)
}

fn apply_one(rule: &Rule, jungle: &Jungle, budget: &Budget) -> Result<Jungle, BudgetExceeded> {
    let sys = RuleSystem::single(rule.clone());
    let (out, _) = apply_rns_lenient(&sys, jungle, budget)?;
    Ok(out)
}

struct DemandInputs {
    joined: Jungle,
    x_b: Jungle,
    y_b: Jungle,
    z_a: Jungle,
    x_a: Jungle,
}

/// Demand conditions for one connector pair. Returns the failure notes;
/// empty means the demands pass.
fn evaluate_demands(
    inputs: &DemandInputs,
    r_ad: &Rule,
    ctx: &ConfluenceContext,
) -> Result<Vec<String>, BudgetExceeded> {
    let budget = &ctx.budget;
    let mut failures = Vec::new();

    // Second-dimension content of the one-sided result must survive the
    // join.
    if !inputs.x_b.is_subset(&inputs.y_b) {
        let missing = inputs.x_b.difference(&inputs.y_b);
        failures.push(format!(
            "{} second-dimension subnet(s) of the one-sided result are missing from the joined result",
            missing.len()
        ));
    }

    // Link conditions over occurrences inside the joined results.
    for host in inputs.joined.iter() {
        let occ_of = |family: &Jungle| -> Result<Vec<(String, BTreeSet<NodeId>)>, BudgetExceeded> {
            let mut out = Vec::new();
            for member in family.iter() {
                if member.node_count() > host.node_count() {
                    continue;
                }
                for occ in occurrences(member, host, budget)? {
                    out.push((canonical_key(member), occ));
                }
            }
            Ok(out)
        };
        let x_occurrences = occ_of(&inputs.x_b)?;
        let y_occurrences = occ_of(&inputs.y_b)?;
        let z_occurrences = occ_of(&inputs.z_a)?;

        for (_, x_occ) in &x_occurrences {
            for (_, y_occ) in &y_occurrences {
                if x_occ.intersection(y_occ).next().is_some() {
                    continue;
                }
                for link in host.links() {
                    if x_occ.contains(&link.src) && y_occ.contains(&link.dst) {
                        failures.push(format!(
                            "outward link {link} runs between two second-dimension subnets"
                        ));
                    }
                }
            }
            let disjoint_z: Vec<&BTreeSet<NodeId>> = z_occurrences
                .iter()
                .map(|(_, occ)| occ)
                .filter(|occ| occ.intersection(x_occ).next().is_none())
                .collect();
            if !disjoint_z.is_empty() {
                let linked = disjoint_z.iter().any(|z_occ| {
                    host.links().iter().any(|l| {
                        (x_occ.contains(&l.src) && z_occ.contains(&l.dst))
                            || (z_occ.contains(&l.src) && x_occ.contains(&l.dst))
                    })
                });
                if !linked {
                    failures.push(
                        "a second-dimension subnet is not linked to any first-dimension subnet"
                            .to_string(),
                    );
                }
            }
        }
    }

    // Completion demands on the first-dimension side: one of three clauses.
    let wrap = |j: &Jungle| -> Result<Jungle, BudgetExceeded> {
        if ctx.strict_parens {
            enclose_jungle(j, budget)
        } else {
            Ok(j.clone())
        }
    };
    let clause1 = {
        let base = wrap(&inputs.y_b)?;
        let rewritten = apply_one(r_ad, &base, budget)?;
        inputs
            .x_a
            .is_subset(&enclose_jungle(&rewritten, budget)?)
    };
    let clause2i = {
        let base = wrap(&inputs.x_b)?;
        let rewritten = apply_one(r_ad, &base, budget)?;
        rewritten.is_subset(&enclose_jungle(&inputs.y_b, budget)?)
    };
    let clause2ii = {
        let base = wrap(&inputs.x_b)?;
        let rewritten = apply_one(r_ad, &base, budget)?;
        inputs.y_b.is_subset(&enclose_jungle(&rewritten, budget)?)
    };
    if !(clause1 || clause2i || clause2ii) {
        failures.push("no completion clause holds for the first-dimension connector".to_string());
    }

    Ok(failures)
}

/// Checks the rule pair against every connector pair and aggregates: all
/// demands passing with equal enclosures is comprehensive, a proper
/// inclusion makes it partial, any demand failure or incomparable
/// enclosures mean none.
pub fn check_confluence(
    v: &Net,
    r_a: &Rule,
    r_b: &Rule,
    conn: &ConnectorSet,
    ctx: &ConfluenceContext,
) -> Result<ConfluenceVerdict, ConfluenceError> {
    let budget = &ctx.budget;
    let grades = ctx.grades();
    let t_a = family_of(&ctx.dims_a, &grades, budget)?;
    let t_b = family_of(&ctx.dims_b, &grades, budget)?;

    let start = Jungle::from_nets([v.clone()]);
    let j_a = apply_rns(&RuleSystem::single(r_a.clone()), &start, budget)?;
    let j_b = apply_rns(&RuleSystem::single(r_b.clone()), &start, budget)?;

    let mut pairs = Vec::new();
    for (r_ad, r_bd) in &conn.pairs {
        let joined_ab = apply_rns(&RuleSystem::single(r_bd.clone()), &j_a, budget)?;
        let joined_ba = apply_rns(&RuleSystem::single(r_ad.clone()), &j_b, budget)?;

        let inputs = DemandInputs {
            joined: joined_ab.clone(),
            x_b: enc_members_in(&j_b, &t_b, budget)?,
            y_b: enc_members_in(&joined_ab, &t_b, budget)?,
            z_a: enc_members_in(&joined_ab, &t_a, budget)?,
            x_a: enc_members_in(&j_b, &t_a, budget)?,
        };
        let demand_failures = evaluate_demands(&inputs, r_ad, ctx)?;

        let left = enclose_jungle(&joined_ab, budget)?;
        let right = enclose_jungle(&joined_ba, budget)?;
        let relation = match (left.is_subset(&right), right.is_subset(&left)) {
            (true, true) => EnclosureRelation::Equal,
            (true, false) => EnclosureRelation::Subset,
            (false, true) => EnclosureRelation::Superset,
            (false, false) => EnclosureRelation::Incomparable,
        };
        pairs.push(PairEvaluation {
            forward_rule: r_ad.name.clone(),
            backward_rule: r_bd.name.clone(),
            demands_passed: demand_failures.is_empty(),
            demand_failures,
            relation,
            left_enclosure: left.len(),
            right_enclosure: right.len(),
        });
    }

    let kind = if pairs.is_empty()
        || pairs
            .iter()
            .any(|p| !p.demands_passed || p.relation == EnclosureRelation::Incomparable)
    {
        VerdictKind::None
    } else if pairs.iter().all(|p| p.relation == EnclosureRelation::Equal) {
        VerdictKind::Comprehensive
    } else {
        VerdictKind::Partial
    };
    let direction = match kind {
        VerdictKind::Comprehensive => Some(EnclosureRelation::Equal),
        VerdictKind::Partial => pairs
            .iter()
            .map(|p| p.relation)
            .find(|r| *r != EnclosureRelation::Equal),
        VerdictKind::None => None,
    };

    Ok(ConfluenceVerdict {
        kind,
        direction,
        pairs,
    })
}

/// Enumerates candidate pairs from the two dimensional rule sets, keeping
/// those whose demand conditions hold against the ground.
pub fn connector_set(
    r_a: &Rule,
    r_b: &Rule,
    pool_a: &[Rule],
    pool_b: &[Rule],
    ground: &Net,
    ctx: &ConfluenceContext,
) -> Result<ConnectorSet, ConfluenceError> {
    let set_a = dimensional_rule_set(pool_a, &ctx.dims_a, &ctx.budget)?;
    let set_b = dimensional_rule_set(pool_b, &ctx.dims_b, &ctx.budget)?;
    let mut pairs = Vec::new();
    for r_ad in &set_a {
        for r_bd in &set_b {
            let candidate = ConnectorSet {
                pairs: vec![(r_ad.clone(), r_bd.clone())],
            };
            let verdict = check_confluence(ground, r_a, r_b, &candidate, ctx)?;
            if verdict.pairs[0].demands_passed {
                pairs.push((r_ad.clone(), r_bd.clone()));
            }
        }
    }
    Ok(ConnectorSet { pairs })
}

/// Evaluation of the two impossibility preconditions.
#[derive(Debug, Clone)]
pub struct UnavoidabilityReport {
    /// No single dimensional rule can complete the first side over the
    /// second: both non-inclusions of the first block hold.
    pub case_i: bool,
    /// The mirrored precondition.
    pub case_ii: bool,
    pub details: Vec<String>,
}

/// Evaluates the non-inclusion preconditions under which no single
/// dimensional rule can complete either side of the square.
pub fn check_unavoidability(
    v: &Net,
    r_a: &Rule,
    r_b: &Rule,
    ctx: &ConfluenceContext,
) -> Result<UnavoidabilityReport, ConfluenceError> {
    let budget = &ctx.budget;
    let grades = ctx.grades();
    let t_a = family_of(&ctx.dims_a, &grades, budget)?;
    let t_b = family_of(&ctx.dims_b, &grades, budget)?;

    let start = Jungle::from_nets([v.clone()]);
    let j_a = apply_rns(&RuleSystem::single(r_a.clone()), &start, budget)?;
    let j_b = apply_rns(&RuleSystem::single(r_b.clone()), &start, budget)?;

    let mut details = Vec::new();
    let mut non_inclusion = |label: &str,
                             from: &Jungle,
                             through: &Jungle,
                             family: &Jungle|
     -> Result<bool, BudgetExceeded> {
        let lhs = enc_members_in(from, family, budget)?;
        let base = enc_members_in(through, family, budget)?;
        let rhs = enclose_jungle(&base, budget)?;
        let holds = !lhs.is_subset(&rhs);
        details.push(format!(
            "{label}: {} member(s) against {}: non-inclusion {}",
            lhs.len(),
            rhs.len(),
            if holds { "holds" } else { "fails" }
        ));
        Ok(holds)
    };

    let case_i = {
        let first = non_inclusion("case i, first dimension", &j_b, &j_a, &t_a)?;
        let second = non_inclusion("case i, second dimension", &j_b, &j_a, &t_b)?;
        first && second
    };
    let case_ii = {
        let first = non_inclusion("case ii, second dimension", &j_a, &j_b, &t_b)?;
        let second = non_inclusion("case ii, first dimension", &j_a, &j_b, &t_a)?;
        first && second
    };

    Ok(UnavoidabilityReport {
        case_i,
        case_ii,
        details,
    })
}

/// Minimum number of comprehensive connector pairs needed to harmonize a
/// rule set of the given size.
pub fn min_connector_bound(n: usize) -> usize {
    assert!(n >= 1, "rule set must be nonempty");
    (n - 1) * n / 2
}

/// A schedule collapsing the results of a rule set on a ground net to one
/// isomorphism class.
#[derive(Debug, Clone)]
pub struct Harmonizer {
    /// Application steps, each a small rule system applied to the whole
    /// jungle.
    pub schedule: Vec<RuleSystem>,
    pub result: Net,
    /// Connector pairs employed by the schedule steps.
    pub connectors_used: ConnectorSet,
    /// One comprehensive connector per rule 2-subset: the set whose
    /// cardinality the bound speaks about.
    pub guarantee: ConnectorSet,
    pub bound: usize,
    pub level: (usize, usize),
}

#[derive(Debug, Clone)]
pub enum HarmonizeOutcome {
    Found(Box<Harmonizer>),
    /// The search space was exhausted within the budget without a schedule.
    Exhausted { explored: usize },
    /// The budget ran out before exhaustion.
    BudgetSpent { explored: usize },
}

impl HarmonizeOutcome {
    pub fn found(&self) -> Option<&Harmonizer> {
        match self {
            HarmonizeOutcome::Found(h) => Some(h),
            _ => None,
        }
    }
}

/// Searches for a harmonizer: grows the connector closure of the rule set,
/// collects comprehensive connector pairs per rule 2-subset, and runs a
/// breadth-first schedule search over pair steps until the rewrite results
/// collapse to one isomorphism class.
pub fn harmonize(
    v: &Net,
    rules: &[Rule],
    level: (usize, usize),
    pool: &[Rule],
    ctx: &ConfluenceContext,
) -> Result<HarmonizeOutcome, ConfluenceError> {
    let budget = &ctx.budget;
    let mut countdown = Countdown::new("harmonize", budget.candidates);
    let mut explored = 0usize;

    let start_system = RuleSystem::new("start", rules.to_vec());
    let start = match apply_rns(&start_system, &Jungle::from_nets([v.clone()]), budget) {
        Ok(j) => j,
        Err(RnsError::Budget(_)) => return Ok(HarmonizeOutcome::BudgetSpent { explored }),
        Err(e) => return Err(e.into()),
    };
    if start.len() <= 1 {
        let result = start.iter().next().cloned().unwrap_or_else(Net::empty);
        return Ok(HarmonizeOutcome::Found(Box::new(Harmonizer {
            schedule: Vec::new(),
            result,
            connectors_used: ConnectorSet::default(),
            guarantee: ConnectorSet::default(),
            bound: min_connector_bound(rules.len().max(1)),
            level,
        })));
    }

    // Connector closure: repeatedly extend the candidate rule pool with the
    // elements of connector pairs over the current closure.
    let mut closure: Vec<Rule> = rules.to_vec();
    let mut closure_keys: BTreeSet<String> =
        closure.iter().map(Rule::canonical_signature).collect();
    let mut comprehensive: Vec<((usize, usize), (Rule, Rule))> = Vec::new();
    for _ in 0..=budget.depth {
        let snapshot = closure.clone();
        for (i, r1) in snapshot.iter().enumerate() {
            for (j, r2) in snapshot.iter().enumerate() {
                if i >= j {
                    continue;
                }
                if countdown.tick().is_err() {
                    return Ok(HarmonizeOutcome::BudgetSpent { explored });
                }
                let conn = connector_set(r1, r2, pool, pool, v, ctx)?;
                for pair in &conn.pairs {
                    let candidate = ConnectorSet {
                        pairs: vec![pair.clone()],
                    };
                    let verdict = check_confluence(v, r1, r2, &candidate, ctx)?;
                    if verdict.kind == VerdictKind::Comprehensive {
                        comprehensive.push(((i, j), pair.clone()));
                    }
                    for rule in [&pair.0, &pair.1] {
                        if closure_keys.insert(rule.canonical_signature()) {
                            closure.push(rule.clone());
                        }
                    }
                }
            }
        }
        if closure.len() == snapshot.len() {
            break;
        }
    }

    // The guarantee set: the first comprehensive connector per 2-subset of
    // the original rules.
    let mut guarantee = ConnectorSet::default();
    let mut covered: BTreeSet<(usize, usize)> = BTreeSet::new();
    for ((i, j), pair) in &comprehensive {
        if *i < rules.len() && *j < rules.len() && covered.insert((*i, *j)) {
            guarantee.pairs.push(pair.clone());
        }
    }

    // Breadth-first schedule search over pair steps.
    let steps: Vec<(RuleSystem, (Rule, Rule))> = comprehensive
        .iter()
        .map(|(_, pair)| {
            (
                RuleSystem::new("step", vec![pair.0.clone(), pair.1.clone()]),
                pair.clone(),
            )
        })
        .collect();
    let key_of = |j: &Jungle| -> String { j.keys().cloned().collect::<Vec<_>>().join("\u{1}") };
    let mut seen: BTreeSet<String> = BTreeSet::from([key_of(&start)]);
    let mut queue: Vec<(Jungle, Vec<usize>)> = vec![(start, Vec::new())];
    for _ in 0..budget.depth {
        let mut next_queue = Vec::new();
        for (jungle, path) in &queue {
            for (idx, (step, _)) in steps.iter().enumerate() {
                if countdown.tick().is_err() {
                    return Ok(HarmonizeOutcome::BudgetSpent { explored });
                }
                explored += 1;
                let (next, _) = apply_rns_lenient(step, jungle, budget)?;
                if next.is_empty() {
                    continue;
                }
                if next.len() == 1 {
                    let mut schedule = Vec::new();
                    let mut used = ConnectorSet::default();
                    for &p in path {
                        schedule.push(steps[p].0.clone());
                        used.pairs.push(steps[p].1.clone());
                    }
                    schedule.push(step.clone());
                    used.pairs.push(steps[idx].1.clone());
                    return Ok(HarmonizeOutcome::Found(Box::new(Harmonizer {
                        schedule,
                        result: next.iter().next().unwrap().clone(),
                        connectors_used: used,
                        guarantee,
                        bound: min_connector_bound(rules.len()),
                        level,
                    })));
                }
                let key = key_of(&next);
                if seen.insert(key) {
                    let mut new_path = path.clone();
                    new_path.push(idx);
                    next_queue.push((next, new_path));
                }
            }
        }
        if next_queue.is_empty() {
            return Ok(HarmonizeOutcome::Exhausted { explored });
        }
        queue = next_queue;
    }
    Ok(HarmonizeOutcome::Exhausted { explored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::fixtures::*;
    use crate::net::{FrontierLabel, RankedLetter};
    use std::collections::BTreeMap;

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

    fn cut_single(letter: RankedLetter) -> Net {
        Net::single(letter)
    }

    /// Ground CHAIN2, first rule relabels the a-node, second the b-node;
    /// dimensions are the letter orbits.
    fn chain_fixture() -> (Net, Rule, Rule, ConfluenceContext) {
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
        let dims_a = DimensionFamily {
            dimensions: vec![(
                "first".into(),
                Jungle::from_nets([
                    cut_single(RankedLetter::new("a", 0, 1)),
                    cut_single(RankedLetter::new("a2", 0, 1)),
                ]),
            )],
            grades: Vec::new(),
        };
        let dims_b = DimensionFamily {
            dimensions: vec![(
                "second".into(),
                Jungle::from_nets([
                    cut_single(RankedLetter::new("b", 1, 0)),
                    cut_single(RankedLetter::new("b2", 1, 0)),
                ]),
            )],
            grades: Vec::new(),
        };
        let ctx = ConfluenceContext {
            dims_a,
            dims_b,
            strict_parens: false,
            budget: Budget::desk(),
        };
        (chain2(), ra, rb, ctx)
    }

    #[test]
    fn empty_dimensions_have_an_empty_initial_family() {
        let space = Jungle::from_nets([single_a(), chain2()]);
        let family = initial_family(&space, &[], &[], &Budget::desk()).unwrap();
        assert!(family.is_empty());
    }

    #[test]
    fn dimensions_covering_the_space_make_everything_initial() {
        let space = Jungle::from_nets([single_a(), chain2()]);
        let dims = vec![("all".to_string(), space.clone())];
        let family = initial_family(&space, &dims, &[], &Budget::desk()).unwrap();
        assert_eq!(family.len(), space.len());
    }

    #[test]
    fn disjoint_dimensions_make_nothing_initial() {
        let space = Jungle::from_nets([single_a()]);
        let dims = vec![(
            "other".to_string(),
            Jungle::from_nets([Net::single(RankedLetter::new("zz", 0, 0))]),
        )];
        let family = initial_family(&space, &dims, &[], &Budget::desk()).unwrap();
        assert!(family.is_empty());
    }

    #[test]
    fn empty_rule_set_filters_to_nothing() {
        let dims = DimensionFamily::default();
        let kept = dimensional_rule_set(&[], &dims, &Budget::desk()).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn orbit_preserving_relabel_is_kept() {
        let (_, ra, _, ctx) = chain_fixture();
        let kept = dimensional_rule_set(&[ra.clone()], &ctx.dims_a, &ctx.budget).unwrap();
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn escaping_rule_is_dropped() {
        // Rewrites the dimension content to a letter outside the orbit.
        let (_, _, _, ctx) = chain_fixture();
        let escape = open_relabel(
            "escape",
            RankedLetter::new("a", 0, 1),
            RankedLetter::new("zz", 0, 1),
        );
        let kept = dimensional_rule_set(&[escape], &ctx.dims_a, &ctx.budget).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn mirrored_relabels_are_comprehensive() {
        let (v, ra, rb, ctx) = chain_fixture();
        let conn = ConnectorSet {
            pairs: vec![(ra.clone(), rb.clone())],
        };
        let verdict = check_confluence(&v, &ra, &rb, &conn, &ctx).unwrap();
        assert_eq!(verdict.kind, VerdictKind::Comprehensive, "{verdict:?}");
        assert_eq!(verdict.direction, Some(EnclosureRelation::Equal));
    }

    #[test]
    fn connector_enumeration_finds_the_mirrored_pair() {
        let (v, ra, rb, ctx) = chain_fixture();
        let pool_a = [ra.clone()];
        let pool_b = [rb.clone()];
        let conn = connector_set(&ra, &rb, &pool_a, &pool_b, &v, &ctx).unwrap();
        assert_eq!(conn.len(), 1);
    }

    #[test]
    fn empty_pools_give_an_empty_connector_set() {
        let (v, ra, rb, ctx) = chain_fixture();
        let conn = connector_set(&ra, &rb, &[], &[], &v, &ctx).unwrap();
        assert!(conn.is_empty());
    }

    /// Summarize-versus-refine fixture: the first rule collapses the whole
    /// chain to a summary letter, the second relabels inside it; the
    /// connector completes only one direction.
    fn partial_fixture() -> (Net, Rule, Rule, Rule, Rule, ConfluenceContext) {
        // First rule: the whole closed chain becomes s(0/1), one open port.
        let summary_right = Net::single(RankedLetter::new("s", 0, 1));
        let ra = Rule::new("ra", chain2(), summary_right);
        let rb = open_relabel(
            "rb",
            RankedLetter::new("b", 1, 0),
            RankedLetter::new("b2", 1, 0),
        );
        // Second-side connector: identity on the summary letter.
        let rbd = open_relabel(
            "rbd",
            RankedLetter::new("s", 0, 1),
            RankedLetter::new("s", 0, 1),
        );
        // First-side connector: summarize the a-node inside the refined
        // chain.
        let rad = open_relabel(
            "rad",
            RankedLetter::new("a", 0, 1),
            RankedLetter::new("s", 0, 1),
        );
        let dims_a = DimensionFamily {
            dimensions: vec![(
                "first".into(),
                Jungle::from_nets([
                    cut_single(RankedLetter::new("a", 0, 1)),
                    cut_single(RankedLetter::new("s", 0, 1)),
                ]),
            )],
            grades: Vec::new(),
        };
        let dims_b = DimensionFamily {
            dimensions: vec![("second".into(), Jungle::new())],
            grades: Vec::new(),
        };
        let ctx = ConfluenceContext {
            dims_a,
            dims_b,
            strict_parens: false,
            budget: Budget::desk(),
        };
        (chain2(), ra, rb, rad, rbd, ctx)
    }

    #[test]
    fn summarize_versus_refine_is_partial() {
        let (v, ra, rb, rad, rbd, ctx) = partial_fixture();
        let conn = ConnectorSet {
            pairs: vec![(rad, rbd)],
        };
        let verdict = check_confluence(&v, &ra, &rb, &conn, &ctx).unwrap();
        assert_eq!(verdict.kind, VerdictKind::Partial, "{verdict:?}");
        assert_eq!(verdict.direction, Some(EnclosureRelation::Subset));
    }

    /// Ground with two second-dimension nodes linked to each other: the
    /// extra link violates the outward-connection demand.
    fn outward_link_fixture() -> (Net, Rule, Rule, ConfluenceContext) {
        let v = Net::build(
            [
                (1, RankedLetter::new("p", 0, 1)),
                (2, RankedLetter::new("q", 1, 0)),
            ],
            [crate::net::Link::new(1, 1, 2, 1)],
            [],
        );
        let ra = open_relabel(
            "ra",
            RankedLetter::new("p", 0, 1),
            RankedLetter::new("p", 0, 1),
        );
        let rb = open_relabel(
            "rb",
            RankedLetter::new("q", 1, 0),
            RankedLetter::new("q", 1, 0),
        );
        let dims_a = DimensionFamily {
            dimensions: vec![("first".into(), Jungle::new())],
            grades: Vec::new(),
        };
        // Both node shapes sit in the second dimension, so the link between
        // their occurrences is an outward connection inside it.
        let dims_b = DimensionFamily {
            dimensions: vec![(
                "second".into(),
                Jungle::from_nets([
                    cut_single(RankedLetter::new("p", 0, 1)),
                    cut_single(RankedLetter::new("q", 1, 0)),
                ]),
            )],
            grades: Vec::new(),
        };
        let ctx = ConfluenceContext {
            dims_a,
            dims_b,
            strict_parens: false,
            budget: Budget::desk(),
        };
        (v, ra, rb, ctx)
    }

    #[test]
    fn outward_links_between_second_dimension_subnets_fail_the_demands() {
        let (v, ra, rb, ctx) = outward_link_fixture();
        let conn = ConnectorSet {
            pairs: vec![(ra.clone(), rb.clone())],
        };
        let verdict = check_confluence(&v, &ra, &rb, &conn, &ctx).unwrap();
        assert_eq!(verdict.kind, VerdictKind::None);
        assert!(verdict.pairs[0]
            .demand_failures
            .iter()
            .any(|f| f.contains("outward link")));
    }

    #[test]
    fn identity_rules_avoid_nothing() {
        let (v, _, _, ctx) = chain_fixture();
        let id_a = open_relabel(
            "ida",
            RankedLetter::new("a", 0, 1),
            RankedLetter::new("a", 0, 1),
        );
        let id_b = open_relabel(
            "idb",
            RankedLetter::new("b", 1, 0),
            RankedLetter::new("b", 1, 0),
        );
        let report = check_unavoidability(&v, &id_a, &id_b, &ctx).unwrap();
        assert!(!report.case_i);
        assert!(!report.case_ii);
    }

    #[test]
    fn summarizer_triggers_the_first_impossibility_case() {
        // The first rule destroys both dimensions' content; the second
        // keeps it.
        let ra = Rule::new("ra", chain2(), Net::single(RankedLetter::new("zz", 0, 0)));
        let rb = open_relabel(
            "rb",
            RankedLetter::new("b", 1, 0),
            RankedLetter::new("b2", 1, 0),
        );
        let dims_a = DimensionFamily {
            dimensions: vec![(
                "first".into(),
                Jungle::from_nets([cut_single(RankedLetter::new("a", 0, 1))]),
            )],
            grades: Vec::new(),
        };
        let dims_b = DimensionFamily {
            dimensions: vec![(
                "second".into(),
                Jungle::from_nets([cut_single(RankedLetter::new("b2", 1, 0))]),
            )],
            grades: Vec::new(),
        };
        let ctx = ConfluenceContext {
            dims_a,
            dims_b,
            strict_parens: false,
            budget: Budget::desk(),
        };
        let report = check_unavoidability(&chain2(), &ra, &rb, &ctx).unwrap();
        assert!(report.case_i, "{:?}", report.details);
    }

    #[test]
    fn bound_formula() {
        assert_eq!(min_connector_bound(1), 0);
        assert_eq!(min_connector_bound(2), 1);
        assert_eq!(min_connector_bound(3), 3);
        assert_eq!(min_connector_bound(4), 6);
    }

    #[test]
    fn singleton_rule_set_needs_no_schedule() {
        let (v, ra, _, ctx) = chain_fixture();
        let outcome = harmonize(&v, &[ra.clone()], (1, 1), &[ra], &ctx).unwrap();
        let h = outcome.found().expect("already a singleton");
        assert!(h.schedule.is_empty());
    }

    #[test]
    fn two_commuting_relabels_harmonize_with_one_pair() {
        let (v, ra, rb, ctx) = chain_fixture();
        let pool = [ra.clone(), rb.clone()];
        let outcome = harmonize(&v, &[ra, rb], (1, 1), &pool, &ctx).unwrap();
        let h = outcome.found().expect("harmonizable fixture");
        assert_eq!(h.connectors_used.len(), 1);
        assert_eq!(h.guarantee.len(), 1);
        assert_eq!(h.bound, 1);
        // Replay the schedule: the results collapse to one class.
        let start = apply_rns(
            &RuleSystem::new("s", vec![pool[0].clone(), pool[1].clone()]),
            &Jungle::from_nets([v.clone()]),
            &ctx.budget,
        )
        .unwrap();
        let mut current = start;
        for step in &h.schedule {
            let (next, _) = apply_rns_lenient(step, &current, &ctx.budget).unwrap();
            current = next;
        }
        assert_eq!(current.len(), 1);
    }

    #[test]
    fn zero_budget_reports_exhaustion() {
        let (v, ra, rb, mut ctx) = chain_fixture();
        ctx.budget = Budget::new(64, 0, 0);
        let outcome = harmonize(&v, &[ra.clone(), rb.clone()], (1, 1), &[ra, rb], &ctx).unwrap();
        assert!(outcome.found().is_none());
    }
}
