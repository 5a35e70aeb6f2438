//! Dynamic construction of Bayesian networks from a background knowledge
//! base of parameterized schemata.
//!
//! The knowledge base separates general knowledge (schemata: parameterized
//! conditional dependency statements with contingency-table templates) from
//! run-time knowledge of individuals. [`ground::ground`] instantiates every
//! schema for the known individuals, expanding existential and universal
//! combinations into deterministic Or/And nodes, and [`infer::posterior`]
//! answers queries under evidence by variable elimination.

pub mod ground;
pub mod infer;
pub mod model;
pub mod parser;
pub mod testing;

pub use ground::{ground, GroundNetwork, NodeId};
pub use infer::{posterior, Evidence, QueryResult};
pub use model::{classify, validate_kb, KnowledgeBase};
pub use parser::{parse_command, parse_kb};
