//! Exhaustive reference recognizer.
//!
//! Enumerates every explanation directly: every exogenous subset within the
//! budget, every set partition of the remaining observation indices, and for
//! each block every (goal, rule-chain, leaf-assignment) tree that covers
//! exactly that block. The construction shares nothing with the incremental
//! recognizer except the data types, which is what makes it usable as an
//! independent check: in PHATT mode with filters off and no effective cap,
//! `recognize` must return exactly this set.
//!
//! The search is guarded: at most 7 observations and a bounded number of
//! enumerated tree nodes.

use std::collections::{BTreeMap, BTreeSet};

use crate::explanation::{Explanation, NodeId, ObservationSequence, PlanTree};
use crate::library::{PlanLibrary, RuleId, SymbolId};
use crate::recognizer::{RecognizeError, RecognizerParams};

const MAX_OBSERVATIONS: usize = 7;
const NODE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone)]
enum Shape {
    Leaf { label: SymbolId, observed: Option<usize> },
    Expanded { label: SymbolId, rule: RuleId, kids: Vec<Shape> },
}

#[derive(Debug, Clone)]
struct Build {
    shape: Shape,
    complete: bool,
}

pub fn brute_force_recognize(
    lib: &PlanLibrary,
    obs: &ObservationSequence,
    params: &RecognizerParams,
) -> Result<Vec<Explanation>, RecognizeError> {
    let n = obs.len();
    if n > MAX_OBSERVATIONS {
        return Err(RecognizeError::GuardExceeded(format!(
            "{n} observations exceed the exhaustive limit of {MAX_OBSERVATIONS}"
        )));
    }
    for (i, item) in obs.items().iter().enumerate() {
        if !lib.is_terminal(item.terminal) {
            return Err(RecognizeError::UnknownTerminal(format!("observation {i}")));
        }
    }

    let mut budget = NODE_BUDGET;
    let mut results: BTreeMap<String, Explanation> = BTreeMap::new();

    for mask in 0u32..(1u32 << n) {
        if (mask.count_ones() as usize) > params.max_exogenous {
            continue;
        }
        let exogenous: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let rest: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();

        for partition in set_partitions(&rest) {
            // All covering trees per block, over every goal.
            let mut options: Vec<Vec<PlanTree>> = Vec::with_capacity(partition.len());
            let mut dead = false;
            for block in &partition {
                let mut trees = Vec::new();
                for &goal in lib.goals() {
                    for b in enumerate(lib, obs, goal, block, 0, params.max_depth, &mut budget)? {
                        trees.push(shape_to_tree(goal, &b.shape, lib));
                    }
                }
                if trees.is_empty() {
                    dead = true;
                    break;
                }
                options.push(trees);
            }
            if dead {
                continue;
            }

            // Cartesian product over blocks.
            let mut picks = vec![0usize; options.len()];
            loop {
                let plans: Vec<PlanTree> =
                    picks.iter().enumerate().map(|(bi, &k)| options[bi][k].clone()).collect();
                let mut covered: BTreeMap<usize, (usize, NodeId)> = BTreeMap::new();
                for (pi, plan) in plans.iter().enumerate() {
                    for (o, leaf) in plan.observed_leaves() {
                        covered.insert(o, (pi, leaf));
                    }
                }
                let exp = Explanation::from_parts(plans, exogenous.clone(), covered);
                debug_assert!(
                    crate::explanation::describes(&exp, obs, lib),
                    "exhaustive enumeration produced a non-describing explanation"
                );
                results.entry(exp.canon().to_string()).or_insert(exp);
                if results.len() > NODE_BUDGET {
                    return Err(RecognizeError::GuardExceeded(
                        "exhaustive result budget spent".into(),
                    ));
                }

                // Advance the product counter.
                let mut i = 0;
                loop {
                    if i == picks.len() {
                        break;
                    }
                    picks[i] += 1;
                    if picks[i] < options[i].len() {
                        break;
                    }
                    picks[i] = 0;
                    i += 1;
                }
                if i == picks.len() {
                    break;
                }
            }
        }
    }

    let mut out: Vec<Explanation> = results.into_values().collect();
    out.sort_by_cached_key(Explanation::preference_key);
    Ok(out)
}

/// All partitions of `items` into non-empty unordered blocks. Each element
/// joins an existing block or opens a new one; blocks keep insertion order,
/// so every partition shows up exactly once.
fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn rec(
        items: &[usize],
        pos: usize,
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if pos == items.len() {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(items[pos]);
            rec(items, pos + 1, current, out);
            current[b].pop();
        }
        current.push(vec![items[pos]]);
        rec(items, pos + 1, current, out);
        current.pop();
    }
    rec(items, 0, &mut current, &mut out);
    out
}

/// Every minimally expanded tree rooted at `sym` whose observed leaves are
/// exactly `block`. Nodes are only expanded when an observation lies beneath
/// them; ordering constraints are enforced against observation order.
fn enumerate(
    lib: &PlanLibrary,
    obs: &ObservationSequence,
    sym: SymbolId,
    block: &[usize],
    depth: usize,
    max_depth: usize,
    budget: &mut usize,
) -> Result<Vec<Build>, RecognizeError> {
    if *budget == 0 {
        return Err(RecognizeError::GuardExceeded("exhaustive node budget spent".into()));
    }
    *budget -= 1;

    if lib.is_terminal(sym) {
        return Ok(match block {
            [] => {
                vec![Build { shape: Shape::Leaf { label: sym, observed: None }, complete: false }]
            }
            [i] if obs.get(*i).unwrap().terminal == sym => {
                vec![Build {
                    shape: Shape::Leaf { label: sym, observed: Some(*i) },
                    complete: true,
                }]
            }
            _ => Vec::new(),
        });
    }

    if block.is_empty() {
        return Ok(vec![Build {
            shape: Shape::Leaf { label: sym, observed: None },
            complete: false,
        }]);
    }
    if depth >= max_depth {
        return Ok(Vec::new());
    }

    let mut out = Vec::new();
    for &rule in lib.rules_for(sym) {
        let r = lib.rule(rule);
        let k = r.children.len();
        for dist in distributions(block, k) {
            // Ordering against observation order, on index ranges alone;
            // completeness of predecessors is checked after recursion.
            let ok = r.ordering.iter().all(|&(a, b)| {
                dist[b].is_empty()
                    || (!dist[a].is_empty() && dist[a].iter().max() < dist[b].iter().min())
            });
            if !ok {
                continue;
            }
            // Cheap reachability prune per child.
            let feasible = (0..k).all(|p| {
                dist[p].iter().all(|&i| {
                    lib.reachable_terminals(r.children[p], max_depth - (depth + 1))
                        .contains(&obs.get(i).unwrap().terminal)
                })
            });
            if !feasible {
                continue;
            }

            let mut kid_builds: Vec<Vec<Build>> = Vec::with_capacity(k);
            let mut dead = false;
            for (&child, d) in r.children.iter().zip(&dist) {
                let builds = enumerate(lib, obs, child, d, depth + 1, max_depth, budget)?;
                if builds.is_empty() {
                    dead = true;
                    break;
                }
                kid_builds.push(builds);
            }
            if dead {
                continue;
            }

            let mut picks = vec![0usize; k];
            loop {
                let combo: Vec<&Build> =
                    picks.iter().enumerate().map(|(p, &c)| &kid_builds[p][c]).collect();
                let order_ok =
                    r.ordering.iter().all(|&(a, b)| dist[b].is_empty() || combo[a].complete);
                if order_ok {
                    if *budget == 0 {
                        return Err(RecognizeError::GuardExceeded(
                            "exhaustive node budget spent".into(),
                        ));
                    }
                    *budget -= 1;
                    let kids: Vec<Shape> = combo.iter().map(|b| b.shape.clone()).collect();
                    let complete = combo.iter().all(|b| b.complete);
                    out.push(Build { shape: Shape::Expanded { label: sym, rule, kids }, complete });
                }
                let mut i = 0;
                loop {
                    if i == k {
                        break;
                    }
                    picks[i] += 1;
                    if picks[i] < kid_builds[i].len() {
                        break;
                    }
                    picks[i] = 0;
                    i += 1;
                }
                if i == k {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// All assignments of the block's indices to `k` child positions.
fn distributions(block: &[usize], k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = vec![Vec::new(); k];
    fn rec(
        block: &[usize],
        pos: usize,
        k: usize,
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if pos == block.len() {
            out.push(current.clone());
            return;
        }
        for p in 0..k {
            current[p].push(block[pos]);
            rec(block, pos + 1, k, current, out);
            current[p].pop();
        }
    }
    rec(block, 0, k, &mut current, &mut out);
    out
}

fn shape_to_tree(goal: SymbolId, shape: &Shape, lib: &PlanLibrary) -> PlanTree {
    type Raw = (SymbolId, Option<RuleId>, Vec<NodeId>, Option<usize>);
    fn rec(s: &Shape, raw: &mut Vec<Raw>) -> NodeId {
        let id = NodeId(raw.len() as u32);
        match s {
            Shape::Leaf { label, observed } => {
                raw.push((*label, None, Vec::new(), *observed));
            }
            Shape::Expanded { label, rule, kids } => {
                raw.push((*label, Some(*rule), Vec::new(), None));
                let kid_ids: Vec<NodeId> = kids.iter().map(|kid| rec(kid, raw)).collect();
                raw[id.0 as usize].2 = kid_ids;
            }
        }
        id
    }
    let mut raw = Vec::new();
    let root = rec(shape, &mut raw);
    PlanTree::from_raw(goal, root, raw, lib).expect("enumerated shapes are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::parse_library;
    use crate::recognizer::recognize;
    use crate::testutil::EXAMPLE;

    fn lib() -> PlanLibrary {
        parse_library(EXAMPLE).unwrap()
    }

    fn canon_set(v: &[Explanation]) -> Vec<String> {
        v.iter().map(|e| e.canon().to_string()).collect()
    }

    #[test]
    fn empty_sequence_gives_the_empty_explanation() {
        let l = lib();
        let out =
            brute_force_recognize(&l, &ObservationSequence::default(), &RecognizerParams::phatt())
                .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].stats().num_plans, 0);
    }

    #[test]
    fn worked_example_matches_the_incremental_recognizer() {
        let l = lib();
        let obs = ObservationSequence::from_names(
            &l,
            &["home", "login", "addName", "login", "addCredit"],
        )
        .unwrap();
        let params = RecognizerParams { max_exogenous: 0, ..RecognizerParams::phatt() };
        let exhaustive = brute_force_recognize(&l, &obs, &params).unwrap();
        let incremental = recognize(&l, &obs, &params).unwrap();
        assert_eq!(exhaustive.len(), 2);
        assert_eq!(canon_set(&exhaustive), canon_set(&incremental));
    }

    #[test]
    fn exogenous_budget_enumerates_marked_subsets() {
        let l = lib();
        let obs = ObservationSequence::from_names(&l, &["login"]).unwrap();
        let params = RecognizerParams { max_exogenous: 1, ..RecognizerParams::phatt() };
        let out = brute_force_recognize(&l, &obs, &params).unwrap();
        // One attached explanation plus the all-exogenous one.
        assert_eq!(out.len(), 2);
        assert!(out.iter().any(|e| e.stats().num_exogenous == 1 && e.stats().num_plans == 0));
    }

    #[test]
    fn guard_rejects_long_sequences() {
        let l = lib();
        let obs = ObservationSequence::from_names(
            &l,
            &["home", "home", "home", "home", "home", "home", "home", "home"],
        )
        .unwrap();
        assert!(matches!(
            brute_force_recognize(&l, &obs, &RecognizerParams::phatt()),
            Err(RecognizeError::GuardExceeded(_))
        ));
    }

    #[test]
    fn set_partitions_count_follows_the_bell_numbers() {
        assert_eq!(set_partitions(&[]).len(), 1);
        assert_eq!(set_partitions(&[0]).len(), 1);
        assert_eq!(set_partitions(&[0, 1]).len(), 2);
        assert_eq!(set_partitions(&[0, 1, 2]).len(), 5);
        assert_eq!(set_partitions(&[0, 1, 2, 3]).len(), 15);
        assert_eq!(set_partitions(&[0, 1, 2, 3, 4]).len(), 52);
    }
}
