//! Hierarchical plan recognition over click-stream sessions.
//!
//! The pipeline: parse a plan library, map raw page visits to terminal
//! actions and collapse repeats (`preprocess`), then explain the resulting
//! observation sequence incrementally (`recognizer`) as a set of candidate
//! explanations, each a forest of partially expanded plan trees plus
//! exogenous marks (`explanation`). CRADLE behavior adds domain-independent
//! pruning (`filters`) on top of the PHATT-style search. A seeded simulator
//! generates synthetic sessions with ground truth (`simulator`), and
//! `metrics` aggregates per-session results into corpus reports. `brute`
//! holds an exhaustive reference recognizer used as an independent check.

pub mod brute;
pub mod explanation;
pub mod filters;
pub mod format;
pub mod library;
pub mod metrics;
pub mod preprocess;
pub mod recognizer;
pub mod simulator;

pub use explanation::{describes, Explanation, ObservationSequence, PlanTree};
pub use library::{parse_library, validate_library, PlanLibrary};
pub use recognizer::{recognize, Mode, RecognizerParams, RecognizerState};
