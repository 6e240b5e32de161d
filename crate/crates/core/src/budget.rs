//! Search and enumeration budgets.
//!
//! Every enumerating operation takes an explicit budget and fails loudly
//! with [`BudgetExceeded`] rather than silently truncating.

use thiserror::Error;

/// Caps for enumerating and searching operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest net (node count) a search may construct.
    pub nodes: usize,
    /// Deepest derivation / nesting a search may explore.
    pub depth: usize,
    /// Total candidates (embeddings, covers, rewrites, ...) an operation
    /// may produce or visit.
    pub candidates: usize,
}

impl Budget {
    pub const fn new(nodes: usize, depth: usize, candidates: usize) -> Self {
        Budget {
            nodes,
            depth,
            candidates,
        }
    }

    /// Roomy default for desk-scale instances.
    pub const fn desk() -> Self {
        Budget::new(64, 4, 4096)
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("budget exceeded in {operation}: {kind} cap {cap} reached")]
pub struct BudgetExceeded {
    pub operation: &'static str,
    pub kind: &'static str,
    pub cap: usize,
}

impl BudgetExceeded {
    pub fn candidates(operation: &'static str, cap: usize) -> Self {
        BudgetExceeded {
            operation,
            kind: "candidates",
            cap,
        }
    }

    pub fn nodes(operation: &'static str, cap: usize) -> Self {
        BudgetExceeded {
            operation,
            kind: "nodes",
            cap,
        }
    }
}

/// Countdown helper shared by the enumeration loops.
#[derive(Debug)]
pub struct Countdown {
    left: usize,
    operation: &'static str,
    cap: usize,
}

impl Countdown {
    pub fn new(operation: &'static str, cap: usize) -> Self {
        Countdown {
            left: cap,
            operation,
            cap,
        }
    }

    /// Consumes one unit; errors once the cap is spent.
    pub fn tick(&mut self) -> Result<(), BudgetExceeded> {
        if self.left == 0 {
            return Err(BudgetExceeded::candidates(self.operation, self.cap));
        }
        self.left -= 1;
        Ok(())
    }
}
