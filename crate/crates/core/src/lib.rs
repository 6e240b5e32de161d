//! Net class-rewriting engine.
//!
//! Nets are finite directed multigraphs of ranked-letter nodes with ordered
//! in/out ports; unbound ports carry frontier letters (manoeuvre letters
//! binding environment, or arity letters marking open positions). On top of
//! that base the crate provides:
//!
//! - jungles (sets of nets up to isomorphism) and canonical labeling,
//! - pattern embedding and rewrite-rule application (renetting systems),
//! - block-cover decompositions of nets and their reconstruction,
//! - block homomorphisms that collapse whole subnet blocks to letters,
//!   with an abstraction-relation search built on them,
//! - synthesis of parallel rule pairs that commute with abstraction,
//! - a multi-dimensional confluence checker with harmonizer search,
//! - a brute-force derivation-space oracle used to cross-validate the
//!   analytic verdicts on desk-scale instances.
//!
//! All values are immutable after construction and every operation is a pure
//! function; enumerating operations take explicit budgets and fail loudly
//! instead of truncating.

pub mod budget;
pub mod confluence;
pub mod format;
pub mod jungle;
pub mod matching;
pub mod nbh;
pub mod net;
pub mod nuo;
pub mod oracle;
pub mod parallel;
pub mod report;
pub mod rns;

pub use budget::{Budget, BudgetExceeded};
pub use jungle::Jungle;
pub use net::{FrontierLabel, Net, NodeId, Port, PortDir, RankedLetter};
