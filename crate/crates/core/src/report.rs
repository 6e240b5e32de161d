//! Deterministic plain-text reports with a JSON mirror.
//!
//! Reports are human-auditable first and scriptable second: stable section
//! markers, fields in fixed order, and a header embedding the tool version,
//! seed, budgets and the content hash of every input. Identical invocations
//! produce identical bytes.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::budget::Budget;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub budget_nodes: usize,
    pub budget_depth: usize,
    pub budget_candidates: usize,
    /// (path, sha256) per input, in argument order.
    pub inputs: Vec<(String, String)>,
}

impl ReportHeader {
    pub fn new(version: &str, command: &str, seed: u64, budget: &Budget) -> Self {
        ReportHeader {
            version: version.to_string(),
            command: command.to_string(),
            seed,
            budget_nodes: budget.nodes,
            budget_depth: budget.depth,
            budget_candidates: budget.candidates,
            inputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &str, contents: &[u8]) {
        self.inputs.push((path.to_string(), sha256_hex(contents)));
    }
}

/// A report under assembly: a header plus named sections of lines.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub header: ReportHeader,
    pub sections: Vec<(String, Vec<String>)>,
}

impl Report {
    pub fn new(header: ReportHeader) -> Self {
        Report {
            header,
            sections: Vec::new(),
        }
    }

    pub fn section(&mut self, name: &str) -> &mut Vec<String> {
        self.sections.push((name.to_string(), Vec::new()));
        &mut self.sections.last_mut().unwrap().1
    }

    pub fn push_line(&mut self, section: &str, line: impl Into<String>) {
        match self.sections.iter_mut().find(|(n, _)| n == section) {
            Some((_, lines)) => lines.push(line.into()),
            None => {
                self.sections.push((section.to_string(), vec![line.into()]));
            }
        }
    }

    /// The plain-text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("=== netrw report ===\n");
        out.push_str(&format!("version: {}\n", self.header.version));
        out.push_str(&format!("command: {}\n", self.header.command));
        out.push_str(&format!("seed: {}\n", self.header.seed));
        out.push_str(&format!(
            "budgets: nodes={} depth={} candidates={}\n",
            self.header.budget_nodes, self.header.budget_depth, self.header.budget_candidates
        ));
        for (path, hash) in &self.header.inputs {
            out.push_str(&format!("input: {path} sha256={hash}\n"));
        }
        for (name, lines) in &self.sections {
            out.push_str(&format!("--- {name} ---\n"));
            for line in lines {
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str("=== end ===\n");
        out
    }

    /// The JSON mirror: same content, sorted keys, machine-diffable.
    pub fn render_json(&self) -> String {
        #[derive(Serialize)]
        struct Mirror<'a> {
            header: &'a ReportHeader,
            sections: BTreeMap<&'a str, &'a Vec<String>>,
        }
        let mirror = Mirror {
            header: &self.header,
            sections: self
                .sections
                .iter()
                .map(|(n, l)| (n.as_str(), l))
                .collect(),
        };
        let mut rendered =
            serde_json::to_string_pretty(&mirror).expect("report serialization cannot fail");
        rendered.push('\n');
        rendered
    }
}
