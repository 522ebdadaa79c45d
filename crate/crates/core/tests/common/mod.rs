//! Shared generators for the integration suites: small random plan libraries
//! that always parse, and observation sequences biased toward explainable
//! material.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use planrec::explanation::{ObservationItem, ObservationSequence};
use planrec::library::{PlanLibrary, SymbolId};
use planrec::recognizer::RecognizerParams;
use planrec::simulator::sample_plan;

pub const TERMINAL_POOL: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

/// Build a random valid library: ≤ 12 symbols, only forward ordering pairs
/// (never cyclic), every non-terminal derivable or at worst flagged by a
/// warning. Recursion is possible and intended.
pub fn random_library(rng: &mut ChaCha8Rng) -> PlanLibrary {
    let n_terms = rng.gen_range(2..=6usize);
    let n_nts = rng.gen_range(1..=3usize);
    let terminals: Vec<&str> = TERMINAL_POOL[..n_terms].to_vec();
    let nts: Vec<String> = (0..n_nts).map(|i| format!("N{i}")).collect();
    let n_goals = rng.gen_range(1..=n_nts.min(2));

    let mut rules = Vec::new();
    for nt in &nts {
        let n_rules = rng.gen_range(1..=2usize);
        for _ in 0..n_rules {
            let n_children = rng.gen_range(1..=3usize);
            let mut children = Vec::new();
            for _ in 0..n_children {
                // Terminals three times as likely as non-terminals.
                if rng.gen_range(0..4) < 3 || nts.is_empty() {
                    children.push(terminals[rng.gen_range(0..terminals.len())].to_string());
                } else {
                    children.push(nts[rng.gen_range(0..nts.len())].clone());
                }
            }
            let mut ordering = Vec::new();
            for i in 0..n_children {
                for j in (i + 1)..n_children {
                    if rng.gen_bool(0.5) {
                        ordering.push([i, j]);
                    }
                }
            }
            rules.push(serde_json::json!({
                "head": nt,
                "children": children,
                "ordering": ordering,
            }));
        }
    }

    let doc = serde_json::json!({
        "terminals": terminals,
        "goals": nts[..n_goals].to_vec(),
        "rules": rules,
    });
    planrec::parse_library(&doc.to_string()).expect("generated library is always valid")
}

/// Random observation sequence over the library's terminals. Half the time
/// it follows a sampled plan emission (possibly with one random insertion),
/// the other half it is uniform noise, so both explainable and unexplainable
/// inputs appear.
pub fn random_sequence(lib: &PlanLibrary, max_len: usize, rng: &mut ChaCha8Rng) -> Vec<SymbolId> {
    let terminals: Vec<SymbolId> = lib.terminals().to_vec();
    let len = rng.gen_range(0..=max_len);
    let plan_based = rng.gen_bool(0.5);
    if plan_based {
        let goals: Vec<SymbolId> = lib.goals().to_vec();
        let goal = goals[rng.gen_range(0..goals.len())];
        if let Ok((tree, order)) = sample_plan(lib, goal, 6, rng) {
            let mut seq: Vec<SymbolId> =
                order.iter().map(|&id| tree.node(id).label).take(len).collect();
            if !seq.is_empty() && rng.gen_bool(0.3) {
                let at = rng.gen_range(0..=seq.len());
                seq.insert(at, terminals[rng.gen_range(0..terminals.len())]);
                seq.truncate(max_len);
            }
            return seq;
        }
    }
    (0..len).map(|_| terminals[rng.gen_range(0..terminals.len())]).collect()
}

pub fn to_obs(seq: &[SymbolId]) -> ObservationSequence {
    ObservationSequence::new(
        seq.iter()
            .enumerate()
            .map(|(i, &t)| ObservationItem { terminal: t, source: Some(i) })
            .collect(),
    )
}

/// Random recognizer parameters within the exhaustive oracle's guards, with
/// the hard cap effectively off. Only safe when the exhaustive reference's
/// build budget has been checked first (it bounds the explanation space).
pub fn random_params(rng: &mut ChaCha8Rng) -> RecognizerParams {
    RecognizerParams {
        max_depth: rng.gen_range(3..=5),
        max_exogenous: rng.gen_range(0..=2),
        max_explanations: 1_000_000_000,
        ..RecognizerParams::phatt()
    }
}

/// Same, but with a finite hard cap, for sweeps that run the incremental
/// recognizer on its own: recursive random libraries can otherwise make the
/// candidate set explode.
pub fn capped_params(rng: &mut ChaCha8Rng) -> RecognizerParams {
    RecognizerParams { max_explanations: 20_000, ..random_params(rng) }
}
