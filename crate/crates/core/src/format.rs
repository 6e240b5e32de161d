//! Line-based text formats for nets, rules, systems and homomorphisms.
//!
//! ```text
//! net CHAIN2 {
//!   node 1 : a in=0 out=1
//!   node 2 : b in=1 out=0
//!   link 1.o1 -> 2.i1
//!   frontier 1.i1 = x
//! }
//!
//! rule r1 {
//!   left { node 1 : a in=0 out=0 }   // one directive per line
//!   right { node 1 : w in=0 out=0 }
//!   subst x = HELPER
//! }
//!
//! system S {
//!   rule r1
//!   uprns ground CHAIN2
//! }
//!
//! nbh H {
//!   block B { node 1 : a in=0 out=1 }
//!   image B -> letter alpha in=0 out=1
//!   frontier x -> y
//!   flags alphabetical abstracting environment_saving
//! }
//! ```
//!
//! Frontier symbols starting with `#` are arity letters, a bare run of
//! digits is a positional arity letter, anything else is a manoeuvre
//! letter. The serializer emits nodes, links and frontier entries in
//! canonical order so that parse-serialize-parse is the identity and
//! re-serialization is byte-exact. The parser rejects unknown directives
//! with line-numbered errors; declared homomorphism flags are recomputed
//! and cross-checked on load.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::nbh::{BlockHomomorphism, BlockImage, NbhFlags};
use crate::net::{FrontierLabel, Link, Net, NodeId, Port, PortDir, RankedLetter};
use crate::rns::{Rule, RuleSystem, Substitution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Parsed contents of one file.
#[derive(Debug, Clone, Default)]
pub struct ParsedFile {
    pub nets: Vec<(String, Net)>,
    pub rules: Vec<Rule>,
    pub systems: Vec<ParsedSystem>,
    pub homs: Vec<BlockHomomorphism>,
}

#[derive(Debug, Clone)]
pub struct ParsedSystem {
    pub system: RuleSystem,
    /// Name of the declared ground net the universally-partitioning
    /// assertion is validated against on load.
    pub uprns_ground: Option<String>,
}

impl ParsedFile {
    pub fn net(&self, name: &str) -> Option<&Net> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, n)| n)
    }

    pub fn first_net(&self) -> Option<&Net> {
        self.nets.first().map(|(_, n)| n)
    }

    /// All rules of the file: free-standing ones plus the systems' rules.
    pub fn all_rules(&self) -> Vec<Rule> {
        let mut out = self.rules.clone();
        for parsed in &self.systems {
            for rule in &parsed.system.rules {
                if !out.iter().any(|r| r.name == rule.name) {
                    out.push(rule.clone());
                }
            }
        }
        out
    }
}

fn parse_symbol(token: &str, line: usize) -> Result<String, ParseError> {
    if token.is_empty() {
        return Err(ParseError::new(line, "empty symbol"));
    }
    if token.starts_with('~') {
        return Err(ParseError::new(
            line,
            format!("symbol `{token}` uses the reserved `~` prefix"),
        ));
    }
    Ok(token.to_string())
}

fn parse_label(token: &str, line: usize) -> Result<FrontierLabel, ParseError> {
    if let Some(rest) = token.strip_prefix('#') {
        if rest.is_empty() {
            return Err(ParseError::new(line, "empty arity letter"));
        }
        return Ok(FrontierLabel::arity(rest));
    }
    if token.chars().all(|c| c.is_ascii_digit()) {
        return Ok(FrontierLabel::arity(token));
    }
    Ok(FrontierLabel::manoeuvre(parse_symbol(token, line)?))
}

fn parse_port(token: &str, line: usize) -> Result<Port, ParseError> {
    let (node_str, port_str) = token
        .split_once('.')
        .ok_or_else(|| ParseError::new(line, format!("expected `<id>.<i|o><k>`, got `{token}`")))?;
    let node: NodeId = node_str
        .parse()
        .map_err(|_| ParseError::new(line, format!("bad node id `{node_str}`")))?;
    let dir = match port_str.chars().next() {
        Some('i') => PortDir::In,
        Some('o') => PortDir::Out,
        _ => {
            return Err(ParseError::new(
                line,
                format!("port `{port_str}` must start with `i` or `o`"),
            ))
        }
    };
    let index: u32 = port_str[1..]
        .parse()
        .map_err(|_| ParseError::new(line, format!("bad port index `{port_str}`")))?;
    Ok(Port { node, dir, index })
}

fn parse_kv(token: &str, key: &str, line: usize) -> Result<u32, ParseError> {
    let rest = token
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| ParseError::new(line, format!("expected `{key}=<n>`, got `{token}`")))?;
    rest.parse()
        .map_err(|_| ParseError::new(line, format!("bad number in `{token}`")))
}

struct NetBuilder {
    nodes: BTreeMap<NodeId, RankedLetter>,
    links: Vec<Link>,
    frontier: BTreeMap<Port, FrontierLabel>,
}

impl NetBuilder {
    fn new() -> Self {
        NetBuilder {
            nodes: BTreeMap::new(),
            links: Vec::new(),
            frontier: BTreeMap::new(),
        }
    }

    fn directive(&mut self, tokens: &[&str], line: usize) -> Result<(), ParseError> {
        match tokens {
            ["node", id, ":", letter, in_kv, out_kv] => {
                let id: NodeId = id
                    .parse()
                    .map_err(|_| ParseError::new(line, format!("bad node id `{id}`")))?;
                let name = parse_symbol(letter, line)?;
                let in_count = parse_kv(in_kv, "in", line)?;
                let out_count = parse_kv(out_kv, "out", line)?;
                if self
                    .nodes
                    .insert(id, RankedLetter::new(name, in_count, out_count))
                    .is_some()
                {
                    return Err(ParseError::new(line, format!("duplicate node id {id}")));
                }
                Ok(())
            }
            ["link", src, "->", dst] => {
                let src = parse_port(src, line)?;
                let dst = parse_port(dst, line)?;
                if src.dir != PortDir::Out || dst.dir != PortDir::In {
                    return Err(ParseError::new(
                        line,
                        "links run from an out-port to an in-port",
                    ));
                }
                self.links.push(Link::new(src.node, src.index, dst.node, dst.index));
                Ok(())
            }
            ["frontier", port, "=", label] => {
                let port = parse_port(port, line)?;
                let label = parse_label(label, line)?;
                if self.frontier.insert(port, label).is_some() {
                    return Err(ParseError::new(
                        line,
                        format!("duplicate frontier entry for {port}"),
                    ));
                }
                Ok(())
            }
            _ => Err(ParseError::new(
                line,
                format!("unknown net directive `{}`", tokens.join(" ")),
            )),
        }
    }

    fn finish(self, line: usize) -> Result<Net, ParseError> {
        let net = Net::build(self.nodes, self.links, self.frontier);
        let violations = net.validate();
        if let Some(v) = violations.first() {
            return Err(ParseError::new(line, format!("invalid net: {v}")));
        }
        Ok(net)
    }
}

/// Tokenized line with its 1-based number; blank lines skipped.
fn lines_of(text: &str) -> Vec<(usize, Vec<String>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            (
                i + 1,
                l.split_whitespace().map(str::to_string).collect::<Vec<_>>(),
            )
        })
        .filter(|(_, tokens)| !tokens.is_empty())
        .collect()
}

enum PendingSubst {
    /// letter -> net name, one mapping per directive.
    Resolve(Vec<Vec<(String, String)>>),
}

/// Parses a full file of net / rule / system / nbh blocks.
pub fn parse_file(text: &str) -> Result<ParsedFile, ParseError> {
    let lines = lines_of(text);
    let mut out = ParsedFile::default();
    let mut pending_substs: Vec<(usize, PendingSubst)> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (line_no, tokens) = &lines[i];
        let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
        match tokens.as_slice() {
            ["net", name, "{"] => {
                let name = parse_symbol(name, *line_no)?;
                let (net, next) = parse_net_body(&lines, i + 1)?;
                out.nets.push((name, net));
                i = next;
            }
            ["rule", name, "{"] => {
                let name = parse_symbol(name, *line_no)?;
                let (rule, substs, next) = parse_rule_body(&lines, i + 1, &name)?;
                pending_substs.push((out.rules.len(), PendingSubst::Resolve(substs)));
                out.rules.push(rule);
                i = next;
            }
            ["system", name, "{"] => {
                let name = parse_symbol(name, *line_no)?;
                let (parsed, next) = parse_system_body(&lines, i + 1, &name, &out)?;
                out.systems.push(parsed);
                i = next;
            }
            ["nbh", name, "{"] => {
                let name = parse_symbol(name, *line_no)?;
                let (hom, next) = parse_nbh_body(&lines, i + 1, &name, &out)?;
                out.homs.push(hom);
                i = next;
            }
            _ => {
                return Err(ParseError::new(
                    *line_no,
                    format!("unknown directive `{}`", tokens.join(" ")),
                ))
            }
        }
    }

    // Resolve substitution references now that every net is parsed.
    for (rule_idx, PendingSubst::Resolve(substs)) in pending_substs {
        let mut resolved: Vec<Substitution> = Vec::new();
        for mapping in substs {
            let mut g = Substitution::new();
            for (letter, net_name) in mapping {
                let net = out.net(&net_name).cloned().ok_or_else(|| {
                    ParseError::new(0, format!("substitution references unknown net `{net_name}`"))
                })?;
                g.insert(letter, net);
            }
            resolved.push(g);
        }
        out.rules[rule_idx].substitutions = resolved;
    }

    // Rebuild the systems' rules after substitution resolution.
    for parsed in &mut out.systems {
        for rule in &mut parsed.system.rules {
            if let Some(updated) = out.rules.iter().find(|r| r.name == rule.name) {
                *rule = updated.clone();
            }
        }
        parsed.system.flags.instance_sensitive = parsed.system.recompute_instance_sensitive();
    }

    Ok(out)
}

fn parse_net_body(
    lines: &[(usize, Vec<String>)],
    mut i: usize,
) -> Result<(Net, usize), ParseError> {
    let mut builder = NetBuilder::new();
    while i < lines.len() {
        let (line_no, tokens) = &lines[i];
        let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
        if tokens == ["}"] {
            return Ok((builder.finish(*line_no)?, i + 1));
        }
        builder.directive(&tokens, *line_no)?;
        i += 1;
    }
    Err(ParseError::new(
        lines.last().map(|(n, _)| *n).unwrap_or(0),
        "unterminated net block",
    ))
}

type SubstSpecs = Vec<Vec<(String, String)>>;

fn parse_rule_body(
    lines: &[(usize, Vec<String>)],
    mut i: usize,
    name: &str,
) -> Result<(Rule, SubstSpecs, usize), ParseError> {
    let mut left: Option<Net> = None;
    let mut right: Option<Net> = None;
    let mut substs: SubstSpecs = Vec::new();
    while i < lines.len() {
        let (line_no, tokens) = &lines[i];
        let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
        match tokens.as_slice() {
            ["}"] => {
                let left = left
                    .ok_or_else(|| ParseError::new(*line_no, "rule is missing its left side"))?;
                let right = right
                    .ok_or_else(|| ParseError::new(*line_no, "rule is missing its right side"))?;
                let rule = Rule::new(name, left, right);
                return Ok((rule, substs, i + 1));
            }
            ["left", "{"] => {
                let (net, next) = parse_net_body(lines, i + 1)?;
                left = Some(net);
                i = next;
            }
            ["right", "{"] => {
                let (net, next) = parse_net_body(lines, i + 1)?;
                right = Some(net);
                i = next;
            }
            ["subst", rest @ ..] => {
                // subst x = NET [, y = NET2 ...] — one alternative mapping.
                let joined = rest.join(" ");
                let mut mapping = Vec::new();
                for part in joined.split(',') {
                    let mut sides = part.split('=');
                    let (Some(letter), Some(net_name), None) =
                        (sides.next(), sides.next(), sides.next())
                    else {
                        return Err(ParseError::new(
                            *line_no,
                            format!("expected `subst <letter> = <net>`, got `{joined}`"),
                        ));
                    };
                    mapping.push((
                        parse_symbol(letter.trim(), *line_no)?,
                        parse_symbol(net_name.trim(), *line_no)?,
                    ));
                }
                substs.push(mapping);
                i += 1;
            }
            _ => {
                return Err(ParseError::new(
                    *line_no,
                    format!("unknown rule directive `{}`", tokens.join(" ")),
                ))
            }
        }
    }
    Err(ParseError::new(
        lines.last().map(|(n, _)| *n).unwrap_or(0),
        "unterminated rule block",
    ))
}

fn parse_system_body(
    lines: &[(usize, Vec<String>)],
    mut i: usize,
    name: &str,
    file: &ParsedFile,
) -> Result<(ParsedSystem, usize), ParseError> {
    let mut rules = Vec::new();
    let mut uprns_ground = None;
    while i < lines.len() {
        let (line_no, tokens) = &lines[i];
        let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
        match tokens.as_slice() {
            ["}"] => {
                let system = RuleSystem::new(name, rules);
                return Ok((
                    ParsedSystem {
                        system,
                        uprns_ground,
                    },
                    i + 1,
                ));
            }
            ["rule", rule_name] => {
                let rule = file
                    .rules
                    .iter()
                    .find(|r| r.name == *rule_name)
                    .cloned()
                    .ok_or_else(|| {
                        ParseError::new(*line_no, format!("unknown rule `{rule_name}`"))
                    })?;
                rules.push(rule);
                i += 1;
            }
            ["uprns", "ground", net_name] => {
                uprns_ground = Some(parse_symbol(net_name, *line_no)?);
                i += 1;
            }
            _ => {
                return Err(ParseError::new(
                    *line_no,
                    format!("unknown system directive `{}`", tokens.join(" ")),
                ))
            }
        }
    }
    Err(ParseError::new(
        lines.last().map(|(n, _)| *n).unwrap_or(0),
        "unterminated system block",
    ))
}

fn parse_nbh_body(
    lines: &[(usize, Vec<String>)],
    mut i: usize,
    name: &str,
    file: &ParsedFile,
) -> Result<(BlockHomomorphism, usize), ParseError> {
    let mut blocks: Vec<(String, Net)> = Vec::new();
    let mut images: BTreeMap<String, BlockImage> = BTreeMap::new();
    let mut frontier_relabel: BTreeMap<FrontierLabel, FrontierLabel> = BTreeMap::new();
    let mut declared: Option<NbhFlags> = None;
    let start_line = lines.get(i).map(|(n, _)| *n).unwrap_or(0);
    while i < lines.len() {
        let (line_no, tokens) = &lines[i];
        let tokens: Vec<&str> = tokens.iter().map(String::as_str).collect();
        match tokens.as_slice() {
            ["}"] => {
                let mut entries = Vec::new();
                for (block_name, net) in &blocks {
                    let image = images.remove(block_name).ok_or_else(|| {
                        ParseError::new(
                            *line_no,
                            format!("block `{block_name}` has no image directive"),
                        )
                    })?;
                    entries.push((net.clone(), image));
                }
                if let Some((orphan, _)) = images.iter().next() {
                    return Err(ParseError::new(
                        *line_no,
                        format!("image for undeclared block `{orphan}`"),
                    ));
                }
                let mut hom = BlockHomomorphism::new(name, entries, frontier_relabel)
                    .map_err(|e| ParseError::new(start_line, e.to_string()))?;
                if let Some(flags) = declared {
                    let actual = hom.flags();
                    let mismatch = (flags.alphabetical && !actual.alphabetical)
                        || (flags.unexpanding && !actual.unexpanding)
                        || (flags.abstracting && !actual.abstracting)
                        || (flags.environment_saving && !actual.environment_saving);
                    if mismatch {
                        return Err(ParseError::new(
                            start_line,
                            format!(
                                "declared flags {flags:?} do not hold; recomputed {actual:?}"
                            ),
                        ));
                    }
                    hom.declared_flags = Some(flags);
                }
                return Ok((hom, i + 1));
            }
            ["block", block_name, "{"] => {
                let (net, next) = parse_net_body(lines, i + 1)?;
                blocks.push((parse_symbol(block_name, *line_no)?, net));
                i = next;
            }
            ["image", block_name, "->", "letter", letter, in_kv, out_kv] => {
                let letter = RankedLetter::new(
                    parse_symbol(letter, *line_no)?,
                    parse_kv(in_kv, "in", *line_no)?,
                    parse_kv(out_kv, "out", *line_no)?,
                );
                images.insert(block_name.to_string(), BlockImage::Letter(letter));
                i += 1;
            }
            ["image", block_name, "->", "net", net_name] => {
                let net = file.net(net_name).cloned().ok_or_else(|| {
                    ParseError::new(*line_no, format!("unknown net `{net_name}`"))
                })?;
                images.insert(block_name.to_string(), BlockImage::Net(net));
                i += 1;
            }
            ["frontier", from, "->", to] => {
                frontier_relabel.insert(parse_label(from, *line_no)?, parse_label(to, *line_no)?);
                i += 1;
            }
            ["flags", rest @ ..] => {
                let mut flags = NbhFlags::default();
                for flag in rest {
                    match *flag {
                        "alphabetical" => flags.alphabetical = true,
                        "unexpanding" => flags.unexpanding = true,
                        "abstracting" => flags.abstracting = true,
                        "environment_saving" => flags.environment_saving = true,
                        other => {
                            return Err(ParseError::new(
                                *line_no,
                                format!("unknown flag `{other}`"),
                            ))
                        }
                    }
                }
                declared = Some(flags);
                i += 1;
            }
            _ => {
                return Err(ParseError::new(
                    *line_no,
                    format!("unknown nbh directive `{}`", tokens.join(" ")),
                ))
            }
        }
    }
    Err(ParseError::new(
        lines.last().map(|(n, _)| *n).unwrap_or(0),
        "unterminated nbh block",
    ))
}

fn write_net_body(out: &mut String, net: &Net, indent: &str) {
    use std::fmt::Write;
    for (id, letter) in net.nodes() {
        let _ = writeln!(
            out,
            "{indent}node {} : {} in={} out={}",
            id, letter.name, letter.in_count, letter.out_count
        );
    }
    for link in net.links() {
        let _ = writeln!(out, "{indent}link {} -> {}", link.source(), link.target());
    }
    for (port, label) in net.frontier() {
        let _ = writeln!(out, "{indent}frontier {port} = {label}");
    }
}

/// Canonical text of a named net block.
pub fn serialize_net(name: &str, net: &Net) -> String {
    let mut out = format!("net {name} {{\n");
    write_net_body(&mut out, net, "  ");
    out.push_str("}\n");
    out
}

/// Canonical text of a rule block. Substitution nets are emitted as
/// auxiliary net blocks named `<rule>_subst_<i>_<letter>` before the rule.
pub fn serialize_rule(rule: &Rule) -> String {
    let mut out = String::new();
    for (i, subst) in rule.substitutions.iter().enumerate() {
        for (letter, net) in subst {
            out.push_str(&serialize_net(
                &format!("{}_subst_{}_{}", rule.name, i, letter),
                net,
            ));
        }
    }
    out.push_str(&format!("rule {} {{\n", rule.name));
    out.push_str("  left {\n");
    write_net_body(&mut out, &rule.left, "    ");
    out.push_str("  }\n  right {\n");
    write_net_body(&mut out, &rule.right, "    ");
    out.push_str("  }\n");
    for (i, subst) in rule.substitutions.iter().enumerate() {
        let parts: Vec<String> = subst
            .keys()
            .map(|letter| format!("{letter} = {}_subst_{}_{}", rule.name, i, letter))
            .collect();
        out.push_str(&format!("  subst {}\n", parts.join(", ")));
    }
    out.push_str("}\n");
    out
}

pub fn serialize_system(sys: &RuleSystem, uprns_ground: Option<&str>) -> String {
    let mut out = String::new();
    for rule in &sys.rules {
        out.push_str(&serialize_rule(rule));
    }
    out.push_str(&format!("system {} {{\n", sys.name));
    for rule in &sys.rules {
        out.push_str(&format!("  rule {}\n", rule.name));
    }
    if let Some(ground) = uprns_ground {
        out.push_str(&format!("  uprns ground {ground}\n"));
    }
    out.push_str("}\n");
    out
}

/// Canonical text of a homomorphism block, domain blocks inline.
pub fn serialize_nbh(hom: &BlockHomomorphism) -> String {
    let mut out = String::new();
    let mut net_refs: Vec<(String, Net)> = Vec::new();
    for (i, image) in hom.images().iter().enumerate() {
        if let BlockImage::Net(net) = image {
            net_refs.push((format!("{}_image_{}", hom.name, i), net.clone()));
        }
    }
    for (name, net) in &net_refs {
        out.push_str(&serialize_net(name, net));
    }
    out.push_str(&format!("nbh {} {{\n", hom.name));
    for (i, domain) in hom.domain_nets().iter().enumerate() {
        out.push_str(&format!("  block b{i} {{\n"));
        write_net_body(&mut out, domain, "    ");
        out.push_str("  }\n");
    }
    for (i, image) in hom.images().iter().enumerate() {
        match image {
            BlockImage::Letter(letter) => {
                out.push_str(&format!(
                    "  image b{i} -> letter {} in={} out={}\n",
                    letter.name, letter.in_count, letter.out_count
                ));
            }
            BlockImage::Net(_) => {
                out.push_str(&format!("  image b{i} -> net {}_image_{}\n", hom.name, i));
            }
        }
    }
    for (from, to) in &hom.frontier_relabel {
        out.push_str(&format!("  frontier {from} -> {to}\n"));
    }
    let flags = hom.flags();
    let mut names = Vec::new();
    if flags.alphabetical {
        names.push("alphabetical");
    }
    if flags.unexpanding {
        names.push("unexpanding");
    }
    if flags.abstracting {
        names.push("abstracting");
    }
    if flags.environment_saving {
        names.push("environment_saving");
    }
    if !names.is_empty() {
        out.push_str(&format!("  flags {}\n", names.join(" ")));
    }
    out.push_str("}\n");
    out
}
