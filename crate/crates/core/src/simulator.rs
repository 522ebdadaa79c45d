//! Synthetic session generation with ground truth.
//!
//! Sampling a plan picks a rule uniformly at each expansion (among rules that
//! still fit the depth bound) and emits the terminal leaves in a uniformly
//! random linear extension of the tree's ordering constraints. Sessions are
//! built by order-preserving interleaving of one terminal stream per goal,
//! then repeat duplication, then exogenous filler insertion. Every entry
//! carries provenance, so the exact intended explanation can be rebuilt and
//! checked against the recognizer. Equal inputs and seed give byte-identical
//! sessions.

use std::collections::{BTreeMap, HashMap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explanation::{Explanation, NodeId, PlanTree};
use crate::format::{plan_tree_from_doc, plan_tree_to_doc, PlanTreeDoc};
use crate::library::{PlanLibrary, RuleId, SymbolId};
use crate::preprocess::{preprocess, LandmarkMapping, PreprocessError, SessionEntry, SessionLog};

/// Exact uniform sampling of linear extensions is done with a bitmask count
/// over the leaf set; beyond this many leaves a greedy random topological
/// order is used instead.
const EXACT_EXTENSION_LEAVES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Probability that an emitted entry is immediately duplicated; applies
    /// again to each duplicate, so run lengths are geometric.
    pub repeat_prob: f64,
    /// Expected number of exogenous filler entries per session (Poisson).
    pub exogenous_rate: f64,
    /// Page labels the fillers are drawn from.
    pub filler_labels: Vec<String>,
    /// Merge the goal streams randomly; false concatenates them.
    pub interleave: bool,
    /// Draw fillers from mapped landmark labels instead, so they survive
    /// preprocessing and exercise the recognizer's exogenous branch.
    pub hard_exogenous: bool,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            repeat_prob: 0.0,
            exogenous_rate: 0.0,
            filler_labels: Vec::new(),
            interleave: true,
            hard_exogenous: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    /// Emitted by a leaf of one of the sampled plans.
    Plan { goal_index: usize, node: u32 },
    /// Immediate duplicate of the previous entry.
    Repeat,
    /// Inserted filler.
    Exogenous,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub goals: Vec<SymbolId>,
    /// Complete sampled plan trees, observation marks unset.
    pub plans: Vec<PlanTree>,
    /// One entry per session log entry, in log order.
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("goal `{goal}` cannot be derived within depth {bound}")]
    Underivable { goal: String, bound: usize },
    #[error("`{0}` is not a goal of the library")]
    NotAGoal(String),
    #[error("no page label maps to terminal `{0}`")]
    MissingLabel(String),
    #[error("bad corpus configuration: {0}")]
    BadConfig(String),
}

/// Sample one complete plan for `goal`: the tree plus its leaves in emission
/// order.
pub fn sample_plan(
    lib: &PlanLibrary,
    goal: SymbolId,
    depth_bound: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(PlanTree, Vec<NodeId>), SimError> {
    sample_plan_with_rule(lib, goal, depth_bound, None, rng)
}

/// Same, but with the root rule pinned (used by corpus session types that
/// follow one decomposition on purpose).
pub fn sample_plan_with_rule(
    lib: &PlanLibrary,
    goal: SymbolId,
    depth_bound: usize,
    root_rule: Option<RuleId>,
    rng: &mut ChaCha8Rng,
) -> Result<(PlanTree, Vec<NodeId>), SimError> {
    if !lib.is_goal(goal) {
        return Err(SimError::NotAGoal(lib.name(goal).to_string()));
    }
    match lib.min_height(goal) {
        Some(h) if h <= depth_bound => {}
        _ => {
            return Err(SimError::Underivable {
                goal: lib.name(goal).to_string(),
                bound: depth_bound,
            })
        }
    }

    let mut tree = PlanTree::new_goal(goal);
    loop {
        // Always expand the lowest-id open non-terminal leaf, so the arena
        // layout is a function of the rule choices alone.
        let next =
            tree.node_ids().find(|&id| tree.is_leaf(id) && !lib.is_terminal(tree.node(id).label));
        let Some(id) = next else { break };
        let depth = tree.node(id).depth as usize;
        let remaining = depth_bound - depth - 1;
        let feasible: Vec<RuleId> = lib
            .rules_for(tree.node(id).label)
            .iter()
            .copied()
            .filter(|&r| {
                lib.rule(r)
                    .children
                    .iter()
                    .all(|&c| lib.min_height(c).is_some_and(|h| h <= remaining))
            })
            .collect();
        let rule = match root_rule {
            Some(r) if id == tree.root() => {
                if !feasible.contains(&r) {
                    return Err(SimError::BadConfig(format!(
                        "pinned rule {} does not fit goal `{}` within depth {}",
                        r.0,
                        lib.name(goal),
                        depth_bound
                    )));
                }
                r
            }
            _ => feasible[rng.gen_range(0..feasible.len())],
        };
        tree = tree.expand(id, rule, lib);
    }

    let order = sample_leaf_order(&tree, lib, rng);
    Ok((tree, order))
}

/// Uniformly random linear extension of the leaf partial order.
fn sample_leaf_order(tree: &PlanTree, lib: &PlanLibrary, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    let leaves: Vec<NodeId> = tree.node_ids().filter(|&id| tree.is_leaf(id)).collect();
    let pos: BTreeMap<NodeId, usize> = leaves.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    // Leaf bitmask per subtree, then precedence masks from rule orderings.
    let mut leafmask: HashMap<NodeId, u128> = HashMap::new();
    fn mask_of(
        tree: &PlanTree,
        id: NodeId,
        pos: &BTreeMap<NodeId, usize>,
        memo: &mut HashMap<NodeId, u128>,
    ) -> u128 {
        if let Some(&m) = memo.get(&id) {
            return m;
        }
        let n = tree.node(id);
        let m = if n.children.is_empty() {
            1u128 << pos[&id]
        } else {
            n.children.iter().map(|&c| mask_of(tree, c, pos, memo)).fold(0, |a, b| a | b)
        };
        memo.insert(id, m);
        m
    }
    let mut preds: Vec<u128> = vec![0; leaves.len()];
    for id in tree.node_ids() {
        let n = tree.node(id);
        let Some(rule) = n.rule_used else { continue };
        for &(a, b) in &lib.rule(rule).ordering {
            let ma = mask_of(tree, n.children[a], &pos, &mut leafmask);
            let mb = mask_of(tree, n.children[b], &pos, &mut leafmask);
            for (i, p) in preds.iter_mut().enumerate() {
                if mb & (1u128 << i) != 0 {
                    *p |= ma;
                }
            }
        }
    }

    let full: u128 = if leaves.len() == 128 { u128::MAX } else { (1u128 << leaves.len()) - 1 };
    let exact = leaves.len() <= EXACT_EXTENSION_LEAVES;
    let mut memo: HashMap<u128, f64> = HashMap::new();
    fn count(done: u128, full: u128, preds: &[u128], memo: &mut HashMap<u128, f64>) -> f64 {
        if done == full {
            return 1.0;
        }
        if let Some(&c) = memo.get(&done) {
            return c;
        }
        let mut total = 0.0;
        for (i, &p) in preds.iter().enumerate() {
            let bit = 1u128 << i;
            if done & bit == 0 && p & !done == 0 {
                total += count(done | bit, full, preds, memo);
            }
        }
        memo.insert(done, total);
        total
    }

    let mut done: u128 = 0;
    let mut order = Vec::with_capacity(leaves.len());
    while done != full {
        let avail: Vec<usize> = (0..leaves.len())
            .filter(|&i| done & (1u128 << i) == 0 && preds[i] & !done == 0)
            .collect();
        let pick = if exact {
            let weights: Vec<f64> = avail
                .iter()
                .map(|&i| count(done | (1u128 << i), full, &preds, &mut memo))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen::<f64>() * total;
            let mut chosen = avail[avail.len() - 1];
            for (k, &i) in avail.iter().enumerate() {
                if x < weights[k] {
                    chosen = i;
                    break;
                }
                x -= weights[k];
            }
            chosen
        } else {
            avail[rng.gen_range(0..avail.len())]
        };
        done |= 1u128 << pick;
        order.push(leaves[pick]);
    }
    order
}

/// Generate one session for the given goals. `inverse` maps terminal names
/// to page labels and must cover every terminal the plans can emit.
pub fn generate_session(
    lib: &PlanLibrary,
    goals: &[SymbolId],
    noise: &NoiseModel,
    inverse: &BTreeMap<String, String>,
) -> Result<(SessionLog, GroundTruth), SimError> {
    generate_session_with_rules(lib, goals, &vec![None; goals.len()], noise, inverse)
}

pub fn generate_session_with_rules(
    lib: &PlanLibrary,
    goals: &[SymbolId],
    root_rules: &[Option<RuleId>],
    noise: &NoiseModel,
    inverse: &BTreeMap<String, String>,
) -> Result<(SessionLog, GroundTruth), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let depth_bound = 10;

    let mut plans = Vec::new();
    let mut streams: Vec<Vec<(usize, NodeId, SymbolId)>> = Vec::new();
    for (gi, &goal) in goals.iter().enumerate() {
        let (tree, order) =
            sample_plan_with_rule(lib, goal, depth_bound, root_rules[gi], &mut rng)?;
        let stream = order.iter().map(|&leaf| (gi, leaf, tree.node(leaf).label)).collect();
        plans.push(tree);
        streams.push(stream);
    }

    // Order-preserving merge, uniform over all interleavings: pick the next
    // stream with probability proportional to its remaining length.
    let mut merged: Vec<(usize, NodeId, SymbolId)> = Vec::new();
    if noise.interleave {
        let mut heads = vec![0usize; streams.len()];
        loop {
            let remaining: Vec<usize> =
                streams.iter().enumerate().map(|(s, st)| st.len() - heads[s]).collect();
            let total: usize = remaining.iter().sum();
            if total == 0 {
                break;
            }
            let mut x = rng.gen_range(0..total);
            let mut s = 0;
            for (i, &r) in remaining.iter().enumerate() {
                if x < r {
                    s = i;
                    break;
                }
                x -= r;
            }
            merged.push(streams[s][heads[s]]);
            heads[s] += 1;
        }
    } else {
        for st in &streams {
            merged.extend(st.iter().copied());
        }
    }

    // Repeat duplication.
    let mut with_repeats: Vec<(Provenance, SymbolId)> = Vec::new();
    for (gi, leaf, term) in merged {
        with_repeats.push((Provenance::Plan { goal_index: gi, node: leaf.0 }, term));
        while noise.repeat_prob > 0.0 && rng.gen_bool(noise.repeat_prob.min(1.0)) {
            with_repeats.push((Provenance::Repeat, term));
        }
    }

    // Exogenous fillers. Hard mode draws from mapped landmark labels.
    let filler_pool: Vec<String> = if noise.hard_exogenous {
        inverse.values().cloned().collect()
    } else {
        noise.filler_labels.clone()
    };
    let mut labeled: Vec<(Provenance, String)> = Vec::new();
    for (prov, term) in &with_repeats {
        let name = lib.name(*term);
        let label = inverse.get(name).ok_or_else(|| SimError::MissingLabel(name.to_string()))?;
        labeled.push((*prov, label.clone()));
    }
    if noise.exogenous_rate > 0.0 && !filler_pool.is_empty() {
        let poisson = Poisson::new(noise.exogenous_rate)
            .map_err(|e| SimError::BadConfig(format!("exogenous_rate: {e}")))?;
        let count = poisson.sample(&mut rng) as usize;
        for _ in 0..count {
            let at = rng.gen_range(0..=labeled.len());
            let label = filler_pool[rng.gen_range(0..filler_pool.len())].clone();
            labeled.insert(at, (Provenance::Exogenous, label));
        }
    }

    // Timestamps and user id.
    let user = format!("u{:05}", rng.gen_range(0..100_000u32));
    let mut ts = 1_700_000_000_000u64 + rng.gen_range(0..86_400_000u64);
    let mut entries = Vec::with_capacity(labeled.len());
    let mut provenance = Vec::with_capacity(labeled.len());
    for (prov, label) in labeled {
        ts += rng.gen_range(800..20_000u64);
        entries.push(SessionEntry { timestamp: ts, user: user.clone(), page_label: label });
        provenance.push(prov);
    }

    Ok((SessionLog::new(entries), GroundTruth { goals: goals.to_vec(), plans, provenance }))
}

/// Rebuild the intended explanation for a generated session against its
/// preprocessed observation sequence: plan leaves take the observation that
/// survived from their entry; surviving repeats and fillers become exogenous
/// marks.
pub fn ground_truth_explanation(
    truth: &GroundTruth,
    log: &SessionLog,
    mapping: &LandmarkMapping,
    lib: &PlanLibrary,
) -> Result<Explanation, PreprocessError> {
    let obs = preprocess(log, mapping, lib)?;
    let mut plans = truth.plans.clone();
    let mut exogenous = std::collections::BTreeSet::new();
    let mut covered = BTreeMap::new();
    for (j, item) in obs.items().iter().enumerate() {
        let raw = item.source.expect("preprocessed observations keep sources");
        match truth.provenance[raw] {
            Provenance::Plan { goal_index, node } => {
                let leaf = NodeId(node);
                plans[goal_index] = plans[goal_index].observe_leaf(leaf, j, lib);
                covered.insert(j, (goal_index, leaf));
            }
            Provenance::Repeat | Provenance::Exogenous => {
                exogenous.insert(j);
            }
        }
    }
    Ok(Explanation::from_parts(plans, exogenous, covered))
}

// --- corpus generation --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionTypeConfig {
    pub name: String,
    pub goals: Vec<String>,
    pub count: usize,
    /// Pin the root rule (index into the library's rule list) per goal name.
    #[serde(default)]
    pub root_rules: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub seed: u64,
    pub noise: NoiseModel,
    pub types: Vec<SessionTypeConfig>,
}

impl CorpusConfig {
    pub fn parse_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::BadConfig(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedSession {
    pub session_type: String,
    pub index: usize,
    pub log: SessionLog,
    pub truth: GroundTruth,
}

/// Generate every session of the corpus, in config order, with per-session
/// seeds drawn from the master seed.
pub fn generate_corpus(
    lib: &PlanLibrary,
    cfg: &CorpusConfig,
    mapping: &LandmarkMapping,
) -> Result<Vec<GeneratedSession>, SimError> {
    let inverse = mapping.invert();
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for ty in &cfg.types {
        let mut goals = Vec::new();
        let mut rules = Vec::new();
        for g in &ty.goals {
            let id = lib
                .lookup(g)
                .filter(|&id| lib.is_goal(id))
                .ok_or_else(|| SimError::NotAGoal(g.clone()))?;
            goals.push(id);
            rules.push(ty.root_rules.get(g).map(|&r| RuleId(r)));
        }
        for index in 0..ty.count {
            let noise = NoiseModel { seed: master.gen(), ..cfg.noise.clone() };
            let (log, truth) = generate_session_with_rules(lib, &goals, &rules, &noise, &inverse)?;
            out.push(GeneratedSession { session_type: ty.name.clone(), index, log, truth });
        }
    }
    Ok(out)
}

// --- ground truth sidecar documents -------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthDoc {
    pub session_type: String,
    pub goals: Vec<String>,
    pub plans: Vec<PlanTreeDoc>,
    pub provenance: Vec<Provenance>,
}

pub fn ground_truth_to_doc(
    truth: &GroundTruth,
    session_type: &str,
    lib: &PlanLibrary,
) -> GroundTruthDoc {
    GroundTruthDoc {
        session_type: session_type.to_string(),
        goals: truth.goals.iter().map(|&g| lib.name(g).to_string()).collect(),
        plans: truth.plans.iter().map(|p| plan_tree_to_doc(p, lib)).collect(),
        provenance: truth.provenance.clone(),
    }
}

pub fn ground_truth_from_doc(
    doc: &GroundTruthDoc,
    lib: &PlanLibrary,
) -> Result<GroundTruth, String> {
    let mut goals = Vec::new();
    for g in &doc.goals {
        goals.push(lib.lookup(g).ok_or_else(|| format!("unknown goal `{g}`"))?);
    }
    let mut plans = Vec::new();
    for p in &doc.plans {
        plans.push(plan_tree_from_doc(p, lib)?);
    }
    Ok(GroundTruth { goals, plans, provenance: doc.provenance.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explanation::describes;
    use crate::library::parse_library;
    use crate::recognizer::{recognize, RecognizerParams};
    use crate::testutil::{paper_mapping, EXAMPLE};
    use std::collections::BTreeSet;

    fn lib() -> PlanLibrary {
        parse_library(EXAMPLE).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn buy_samples_one_of_its_two_decompositions() {
        let l = lib();
        let buy = l.lookup("Buy").unwrap();
        let mut saw_payment = false;
        let mut saw_transfer = false;
        for seed in 0..40 {
            let (tree, order) = sample_plan(&l, buy, 10, &mut rng(seed)).unwrap();
            assert!(
                tree.is_complete() || tree.node_ids().all(|id| tree.node(id).observed.is_none())
            );
            let names: Vec<&str> = order.iter().map(|&id| l.name(tree.node(id).label)).collect();
            match names.as_slice() {
                ["home", "payment", "success"] => saw_payment = true,
                ["home", "transfer", "confirm"] => saw_transfer = true,
                other => panic!("unexpected emission order {other:?}"),
            }
        }
        assert!(saw_payment && saw_transfer);
    }

    #[test]
    fn ordering_constraints_bind_the_emission_order() {
        let l = lib();
        let add = l.lookup("AddAccount").unwrap();
        let rule = l.rules_for(add)[0];
        for seed in 0..20 {
            let (tree, order) =
                sample_plan_with_rule(&l, add, 10, Some(rule), &mut rng(seed)).unwrap();
            let names: Vec<&str> = order.iter().map(|&id| l.name(tree.node(id).label)).collect();
            assert_eq!(names, vec!["login", "addName", "addCredit"]);
        }
    }

    #[test]
    fn unordered_children_appear_in_both_orders() {
        let text = r#"{
            "terminals": ["a", "b"],
            "goals": ["G"],
            "rules": [ { "head": "G", "children": ["a", "b"], "ordering": [] } ]
        }"#;
        let l = parse_library(text).unwrap();
        let g = l.lookup("G").unwrap();
        let mut ab = 0;
        let mut ba = 0;
        for seed in 0..200 {
            let (tree, order) = sample_plan(&l, g, 10, &mut rng(seed)).unwrap();
            let names: Vec<&str> = order.iter().map(|&id| l.name(tree.node(id).label)).collect();
            if names == vec!["a", "b"] {
                ab += 1;
            } else {
                ba += 1;
            }
        }
        // Exact uniform sampling: both extensions, roughly balanced.
        assert!(ab > 60 && ba > 60, "ab={ab} ba={ba}");
    }

    #[test]
    fn underivable_goal_is_rejected() {
        let text = r#"{
            "terminals": ["b"],
            "goals": ["A"],
            "rules": [ { "head": "A", "children": ["A", "b"], "ordering": [] } ]
        }"#;
        let l = parse_library(text).unwrap();
        let a = l.lookup("A").unwrap();
        assert!(matches!(sample_plan(&l, a, 10, &mut rng(1)), Err(SimError::Underivable { .. })));
    }

    #[test]
    fn sessions_are_byte_identical_for_equal_seeds() {
        let l = lib();
        let m = paper_mapping();
        let inverse = m.invert();
        let noise = NoiseModel {
            repeat_prob: 0.5,
            exogenous_rate: 10.0,
            filler_labels: vec!["search".into(), "promo".into()],
            interleave: true,
            hard_exogenous: false,
            seed: 99,
        };
        let goals = vec![l.lookup("Buy").unwrap(), l.lookup("AddAccount").unwrap()];
        let (log1, _) = generate_session(&l, &goals, &noise, &inverse).unwrap();
        let (log2, _) = generate_session(&l, &goals, &noise, &inverse).unwrap();
        assert_eq!(log1.to_csv(), log2.to_csv());
        let other = NoiseModel { seed: 100, ..noise };
        let (log3, _) = generate_session(&l, &goals, &other, &inverse).unwrap();
        assert_ne!(log1.to_csv(), log3.to_csv());
    }

    #[test]
    fn provenance_covers_every_entry() {
        let l = lib();
        let m = paper_mapping();
        let noise = NoiseModel {
            repeat_prob: 0.4,
            exogenous_rate: 5.0,
            filler_labels: vec!["search".into()],
            seed: 7,
            ..NoiseModel::default()
        };
        let goals = vec![l.lookup("Buy").unwrap()];
        let (log, truth) = generate_session(&l, &goals, &noise, &m.invert()).unwrap();
        assert_eq!(log.len(), truth.provenance.len());
        // Each plan leaf is emitted exactly once.
        let plan_entries: Vec<u32> = truth
            .provenance
            .iter()
            .filter_map(|p| match p {
                Provenance::Plan { node, .. } => Some(*node),
                _ => None,
            })
            .collect();
        let distinct: BTreeSet<u32> = plan_entries.iter().copied().collect();
        assert_eq!(plan_entries.len(), distinct.len());
        assert_eq!(plan_entries.len(), 3);
    }

    #[test]
    fn noise_free_round_trip_contains_the_truth_shape() {
        let l = lib();
        let m = paper_mapping();
        let inverse = m.invert();
        for seed in 0..30 {
            let noise = NoiseModel { seed, ..NoiseModel::default() };
            let goals = vec![l.lookup("Buy").unwrap()];
            let (log, truth) = generate_session(&l, &goals, &noise, &inverse).unwrap();
            let obs = preprocess(&log, &m, &l).unwrap();
            let found = recognize(&l, &obs, &RecognizerParams::phatt()).unwrap();
            let want: Vec<SymbolId> = truth.goals.clone();
            assert!(found.iter().any(|e| {
                let mut goals: Vec<SymbolId> = e.plans().iter().map(|p| p.goal).collect();
                goals.sort();
                e.stats().num_exogenous == 0 && goals == want
            }));
        }
    }

    #[test]
    fn noisy_ground_truth_explanations_describe_their_sessions() {
        let l = lib();
        let m = paper_mapping();
        let inverse = m.invert();
        for seed in 0..30 {
            let noise = NoiseModel {
                repeat_prob: 0.5,
                exogenous_rate: 8.0,
                filler_labels: vec!["search".into(), "promo".into(), "help".into()],
                interleave: true,
                hard_exogenous: false,
                seed,
            };
            let goals = vec![l.lookup("AddAccount").unwrap()];
            let (log, truth) = generate_session(&l, &goals, &noise, &inverse).unwrap();
            let exp = ground_truth_explanation(&truth, &log, &m, &l).unwrap();
            let obs = preprocess(&log, &m, &l).unwrap();
            assert!(describes(&exp, &obs, &l), "seed {seed}");
            assert!(exp.stats().has_full_plan);
        }
    }

    #[test]
    fn corpus_generation_is_deterministic_and_typed() {
        let l = lib();
        let m = paper_mapping();
        let cfg = CorpusConfig {
            seed: 42,
            noise: NoiseModel {
                repeat_prob: 0.3,
                exogenous_rate: 4.0,
                filler_labels: vec!["search".into()],
                ..NoiseModel::default()
            },
            types: vec![
                SessionTypeConfig {
                    name: "buy".into(),
                    goals: vec!["Buy".into()],
                    count: 3,
                    root_rules: BTreeMap::new(),
                },
                SessionTypeConfig {
                    name: "aa-new".into(),
                    goals: vec!["AddAccount".into()],
                    count: 2,
                    root_rules: [("AddAccount".to_string(), 1u32)].into_iter().collect(),
                },
            ],
        };
        let a = generate_corpus(&l, &cfg, &m).unwrap();
        let b = generate_corpus(&l, &cfg, &m).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.log.to_csv(), y.log.to_csv());
            assert_eq!(x.session_type, y.session_type);
        }
        // Pinned root rule: every aa-new plan starts with signup.
        for s in a.iter().filter(|s| s.session_type == "aa-new") {
            let signup = l.lookup("signup").unwrap();
            assert!(s.truth.plans[0]
                .node_ids()
                .any(|id| s.truth.plans[0].node(id).label == signup));
        }
    }

    #[test]
    fn ground_truth_documents_round_trip() {
        let l = lib();
        let m = paper_mapping();
        let noise = NoiseModel { seed: 5, ..NoiseModel::default() };
        let goals = vec![l.lookup("Buy").unwrap()];
        let (_, truth) = generate_session(&l, &goals, &noise, &m.invert()).unwrap();
        let doc = ground_truth_to_doc(&truth, "buy", &l);
        let text = serde_json::to_string(&doc).unwrap();
        let parsed: GroundTruthDoc = serde_json::from_str(&text).unwrap();
        let back = ground_truth_from_doc(&parsed, &l).unwrap();
        assert_eq!(back.goals, truth.goals);
        assert_eq!(back.provenance, truth.provenance);
        assert_eq!(back.plans[0].canon(), truth.plans[0].canon());
    }
}
