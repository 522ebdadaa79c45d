//! Incremental plan recognition.
//!
//! The recognizer keeps a set of candidate explanations and refines it one
//! observation at a time. Each observation is explained in every possible
//! way: attached to an enabled frontier leaf of an existing plan (expanding
//! non-terminal leaves on demand, one rule chain at a time), attached to a
//! freshly started plan for some goal, or marked exogenous while the budget
//! lasts. Candidates are then deduplicated structurally, optionally filtered,
//! sorted by a deterministic preference order and capped.
//!
//! Rule choices are lazy: a non-terminal leaf is only expanded when an
//! observation needs to land inside it, so sibling subtrees stay unexpanded
//! until the session forces a commitment.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::explanation::{Explanation, NodeId, ObservationSequence, PlanTree};
use crate::filters::{apply_filters, FilterConfig};
use crate::library::{PlanLibrary, SymbolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Cradle,
    Phatt,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Cradle => "cradle",
            Mode::Phatt => "phatt",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cradle" => Ok(Mode::Cradle),
            "phatt" => Ok(Mode::Phatt),
            other => Err(format!("unknown mode `{other}` (expected cradle or phatt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerParams {
    /// Longest allowed root-to-leaf rule chain.
    pub max_depth: usize,
    /// How many observations one explanation may mark exogenous.
    pub max_exogenous: usize,
    /// CRADLE behavior when true; plain PHATT otherwise.
    pub filters_enabled: bool,
    pub filter_config: FilterConfig,
    /// Hard cap on the candidate set after every step.
    pub max_explanations: usize,
}

impl Default for RecognizerParams {
    fn default() -> Self {
        RecognizerParams {
            max_depth: 10,
            max_exogenous: 2,
            filters_enabled: true,
            filter_config: FilterConfig::default(),
            max_explanations: 10_000,
        }
    }
}

impl RecognizerParams {
    pub fn cradle() -> Self {
        RecognizerParams::default()
    }

    pub fn phatt() -> Self {
        RecognizerParams { filters_enabled: false, ..RecognizerParams::default() }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Cradle => RecognizerParams::cradle(),
            Mode::Phatt => RecognizerParams::phatt(),
        }
    }

    pub fn mode(&self) -> Mode {
        if self.filters_enabled {
            Mode::Cradle
        } else {
            Mode::Phatt
        }
    }

    fn check(&self) -> Result<(), RecognizeError> {
        if self.max_depth == 0 {
            return Err(RecognizeError::InvalidParams("max_depth must be at least 1".into()));
        }
        if self.max_explanations == 0 {
            return Err(RecognizeError::InvalidParams(
                "max_explanations must be at least 1".into(),
            ));
        }
        if self.filter_config.distinct_plans_max == 0 {
            return Err(RecognizeError::InvalidParams(
                "distinct_plans_max must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RecognizeError {
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),
    #[error("unexplainable observation {index} (`{terminal}`): no candidate explanation survives")]
    Unexplainable { index: usize, terminal: String },
    #[error("invalid recognizer parameters: {0}")]
    InvalidParams(String),
    #[error("exhaustive search guard exceeded: {0}")]
    GuardExceeded(String),
}

/// Recognition state after some prefix of the observation sequence. The
/// library is shared read-only, so states for concurrent sessions can reuse
/// one library. `observe` returns a new state and leaves `self` usable, which
/// is what keeps the last good candidate set around when a step fails.
#[derive(Debug, Clone)]
pub struct RecognizerState {
    lib: Arc<PlanLibrary>,
    params: RecognizerParams,
    seen: ObservationSequence,
    candidates: Vec<Explanation>,
}

impl RecognizerState {
    pub fn init(lib: Arc<PlanLibrary>, params: RecognizerParams) -> Result<Self, RecognizeError> {
        params.check()?;
        Ok(RecognizerState {
            lib,
            params,
            seen: ObservationSequence::default(),
            candidates: vec![Explanation::empty()],
        })
    }

    pub fn library(&self) -> &Arc<PlanLibrary> {
        &self.lib
    }

    pub fn params(&self) -> &RecognizerParams {
        &self.params
    }

    pub fn seen(&self) -> &ObservationSequence {
        &self.seen
    }

    pub fn candidates(&self) -> &[Explanation] {
        &self.candidates
    }

    /// Explain one more observation. `source` is the raw session entry the
    /// observation came from, when there is one.
    pub fn observe(
        &self,
        terminal: SymbolId,
        source: Option<usize>,
    ) -> Result<Self, RecognizeError> {
        let known = (terminal.0 as usize) < self.lib.symbol_count();
        if !known || !self.lib.is_terminal(terminal) {
            return Err(RecognizeError::UnknownTerminal(if known {
                self.lib.name(terminal).to_string()
            } else {
                format!("#{}", terminal.0)
            }));
        }
        let obs_index = self.seen.len();
        let mut next: Vec<Explanation> = Vec::new();
        for cand in &self.candidates {
            extend_candidate(cand, obs_index, terminal, &self.lib, &self.params, &mut next);
        }

        // Structural dedup.
        let mut by_canon: BTreeMap<String, Explanation> = BTreeMap::new();
        for e in next {
            by_canon.entry(e.canon().to_string()).or_insert(e);
        }
        let mut candidates: Vec<Explanation> = by_canon.into_values().collect();
        if candidates.is_empty() {
            return Err(RecognizeError::Unexplainable {
                index: obs_index,
                terminal: self.lib.name(terminal).to_string(),
            });
        }

        candidates.sort_by_cached_key(Explanation::preference_key);
        if self.params.filters_enabled && self.params.filter_config.apply_each_step {
            candidates = apply_filters(&candidates, &self.params.filter_config);
        }
        candidates.truncate(self.params.max_explanations);

        let mut seen = self.seen.clone();
        let mut items = seen.items().to_vec();
        items.push(crate::explanation::ObservationItem { terminal, source });
        seen = ObservationSequence::new(items);

        Ok(RecognizerState { lib: self.lib.clone(), params: self.params.clone(), seen, candidates })
    }

    pub fn observe_name(&self, name: &str) -> Result<Self, RecognizeError> {
        let id = self
            .lib
            .lookup(name)
            .ok_or_else(|| RecognizeError::UnknownTerminal(name.to_string()))?;
        self.observe(id, None)
    }

    /// Ranked prediction: each terminal that can come next, with the number
    /// of candidate explanations whose frontier offers it.
    pub fn predict_next(&self) -> BTreeMap<SymbolId, usize> {
        predict_support(&self.candidates, &self.lib, self.params.max_depth)
    }
}

/// Frontier support over an explanation set: how many explanations could
/// accept each terminal as the next observation.
pub fn predict_support(
    cands: &[Explanation],
    lib: &PlanLibrary,
    max_depth: usize,
) -> BTreeMap<SymbolId, usize> {
    let mut counts: BTreeMap<SymbolId, usize> = BTreeMap::new();
    for cand in cands {
        for t in cand.frontier(lib, max_depth) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    counts
}

/// Run the whole sequence. In batch filter mode the filters are applied once
/// after the final observation.
pub fn recognize(
    lib: &PlanLibrary,
    obs: &ObservationSequence,
    params: &RecognizerParams,
) -> Result<Vec<Explanation>, RecognizeError> {
    let mut state = RecognizerState::init(Arc::new(lib.clone()), params.clone())?;
    for item in obs.items() {
        state = state.observe(item.terminal, item.source)?;
    }
    let mut out = state.candidates;
    if params.filters_enabled && !params.filter_config.apply_each_step {
        out = apply_filters(&out, &params.filter_config);
        out.sort_by_cached_key(Explanation::preference_key);
    }
    Ok(out)
}

fn extend_candidate(
    cand: &Explanation,
    obs_index: usize,
    terminal: SymbolId,
    lib: &PlanLibrary,
    params: &RecognizerParams,
    out: &mut Vec<Explanation>,
) {
    // (a) attach into an existing plan.
    for (pi, plan) in cand.plans().iter().enumerate() {
        for (tree, leaf) in attach_ways(plan, terminal, obs_index, lib, params.max_depth) {
            out.push(cand.with_extended_plan(pi, tree, obs_index, leaf));
        }
    }
    // (b) start a new plan for any goal that can begin with this terminal.
    for &goal in lib.goals() {
        let seed = PlanTree::new_goal(goal);
        for (tree, leaf) in attach_ways(&seed, terminal, obs_index, lib, params.max_depth) {
            out.push(cand.with_new_plan(tree, obs_index, leaf));
        }
    }
    // (c) mark the observation exogenous.
    if cand.exogenous().len() < params.max_exogenous {
        out.push(cand.with_exogenous(obs_index));
    }
}

/// Every way to make `terminal` the next observation of `plan`: directly on
/// an enabled terminal leaf, or through rule chains expanded from an enabled
/// non-terminal leaf. Returns the new tree and the observed leaf.
fn attach_ways(
    plan: &PlanTree,
    terminal: SymbolId,
    obs_index: usize,
    lib: &PlanLibrary,
    max_depth: usize,
) -> Vec<(PlanTree, NodeId)> {
    let mut out = Vec::new();
    for leaf in plan.frontier_leaves() {
        let label = plan.node(leaf).label;
        if lib.is_terminal(label) {
            if label == terminal {
                out.push((plan.observe_leaf(leaf, obs_index, lib), leaf));
            }
        } else {
            expand_chains(plan, leaf, terminal, obs_index, lib, max_depth, &mut out);
        }
    }
    out
}

/// Expand non-terminal leaf `nt` by every rule chain that lets `terminal`
/// become enabled first, within the depth bound. Freshly created siblings
/// hold no observations, so only ordering-minimal positions are enabled.
fn expand_chains(
    plan: &PlanTree,
    nt: NodeId,
    terminal: SymbolId,
    obs_index: usize,
    lib: &PlanLibrary,
    max_depth: usize,
    out: &mut Vec<(PlanTree, NodeId)>,
) {
    let depth = plan.node(nt).depth as usize;
    if depth >= max_depth {
        return;
    }
    let budget = max_depth - depth;
    if !lib.first_terminals(plan.node(nt).label, budget).contains(&terminal) {
        return;
    }
    for &rule in lib.rules_for(plan.node(nt).label) {
        let expanded = plan.expand(nt, rule, lib);
        let kids: Vec<(usize, NodeId)> =
            expanded.node(nt).children.iter().copied().enumerate().collect();
        let r = lib.rule(rule);
        for (pos, kid) in kids {
            if !r.preds(pos).is_empty() {
                continue;
            }
            let label = expanded.node(kid).label;
            if lib.is_terminal(label) {
                if label == terminal {
                    out.push((expanded.observe_leaf(kid, obs_index, lib), kid));
                }
            } else {
                expand_chains(&expanded, kid, terminal, obs_index, lib, max_depth, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explanation::describes;
    use crate::library::parse_library;
    use crate::testutil::EXAMPLE;

    fn lib() -> Arc<PlanLibrary> {
        Arc::new(parse_library(EXAMPLE).unwrap())
    }

    fn exo0(filters: bool) -> RecognizerParams {
        RecognizerParams {
            max_exogenous: 0,
            filters_enabled: filters,
            ..RecognizerParams::default()
        }
    }

    #[test]
    fn init_starts_from_the_empty_explanation() {
        let state = RecognizerState::init(lib(), RecognizerParams::default()).unwrap();
        assert_eq!(state.candidates().len(), 1);
        assert_eq!(state.candidates()[0].stats().num_plans, 0);
    }

    #[test]
    fn zero_depth_is_rejected() {
        let params = RecognizerParams { max_depth: 0, ..RecognizerParams::default() };
        assert!(matches!(
            RecognizerState::init(lib(), params),
            Err(RecognizeError::InvalidParams(_))
        ));
    }

    #[test]
    fn first_login_starts_one_add_account_plan() {
        let state = RecognizerState::init(lib(), exo0(false)).unwrap();
        let state = state.observe_name("login").unwrap();
        assert_eq!(state.candidates().len(), 1);
        let e = &state.candidates()[0];
        assert_eq!(e.stats().num_plans, 1);
        let l = state.library().clone();
        let front: Vec<&str> = e.frontier(&l, 10).iter().map(|&s| l.name(s)).collect();
        assert_eq!(front, vec!["addName"]);
    }

    #[test]
    fn exogenous_branch_respects_the_budget() {
        let params =
            RecognizerParams { max_exogenous: 1, filters_enabled: false, ..Default::default() };
        let state = RecognizerState::init(lib(), params).unwrap();
        let state = state.observe_name("login").unwrap();
        // Attachment plus one exogenous marking.
        assert_eq!(state.candidates().len(), 2);
        assert!(state.candidates().iter().any(|e| e.stats().num_exogenous == 1));
    }

    #[test]
    fn home_opens_both_buy_rules() {
        let state = RecognizerState::init(lib(), exo0(false)).unwrap();
        let state = state.observe_name("home").unwrap();
        assert_eq!(state.candidates().len(), 2);
        let l = state.library().clone();
        let pred = state.predict_next();
        let names: Vec<&str> = pred.keys().map(|&s| l.name(s)).collect();
        assert_eq!(names, vec!["payment", "transfer"]);
        assert!(pred.values().all(|&c| c == 1));
    }

    #[test]
    fn worked_example_yields_exactly_two_explanations() {
        let state = RecognizerState::init(lib(), exo0(false)).unwrap();
        let mut state = state;
        for name in ["home", "login", "addName", "login", "addCredit"] {
            state = state.observe_name(name).unwrap();
        }
        assert_eq!(state.candidates().len(), 2);
        let l = state.library().clone();
        for e in state.candidates() {
            assert_eq!(e.stats().num_plans, 3);
            assert!(e.stats().has_full_plan);
            assert!(describes(e, state.seen(), &l));
        }
        // Both next steps of the open Buy plan are offered across candidates.
        let pred = state.predict_next();
        let names: Vec<&str> = pred.keys().map(|&s| l.name(s)).collect();
        assert!(names.contains(&"transfer"));
        assert!(names.contains(&"payment"));
    }

    #[test]
    fn unexplainable_observation_preserves_state() {
        let state = RecognizerState::init(lib(), exo0(false)).unwrap();
        let state = state.observe_name("addCredit");
        // addCredit can never be the first observation of any plan.
        assert!(matches!(state, Err(RecognizeError::Unexplainable { index: 0, .. })));
    }

    #[test]
    fn junk_beyond_the_exogenous_budget_fails_midway() {
        let params =
            RecognizerParams { max_exogenous: 1, filters_enabled: false, ..Default::default() };
        let state = RecognizerState::init(lib(), params).unwrap();
        let state = state.observe_name("addCredit").unwrap();
        assert_eq!(state.candidates().len(), 1);
        let err = state.observe_name("addCredit").unwrap_err();
        assert_eq!(err, RecognizeError::Unexplainable { index: 1, terminal: "addCredit".into() });
        // The failed step leaves the previous state untouched.
        assert_eq!(state.candidates().len(), 1);
        assert_eq!(state.seen().len(), 1);
    }

    #[test]
    fn recognize_is_deterministic() {
        let l = lib();
        let obs = ObservationSequence::from_names(&l, &["home", "login", "addName"]).unwrap();
        let a = recognize(&l, &obs, &RecognizerParams::phatt()).unwrap();
        let b = recognize(&l, &obs, &RecognizerParams::phatt()).unwrap();
        let keys = |v: &[Explanation]| v.iter().map(|e| e.canon().to_string()).collect::<Vec<_>>();
        assert_eq!(keys(&a), keys(&b));
    }

    #[test]
    fn empty_sequence_recognizes_to_the_empty_explanation() {
        let l = lib();
        let out =
            recognize(&l, &ObservationSequence::default(), &RecognizerParams::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].stats().num_plans, 0);
    }

    #[test]
    fn hard_cap_keeps_the_preferred_candidates() {
        let l = lib();
        let obs = ObservationSequence::from_names(&l, &["home", "login"]).unwrap();
        let full = recognize(&l, &obs, &RecognizerParams::phatt()).unwrap();
        assert!(full.len() > 2);
        let capped_params = RecognizerParams { max_explanations: 2, ..RecognizerParams::phatt() };
        let capped = recognize(&l, &obs, &capped_params).unwrap();
        assert_eq!(capped.len(), 2);
        // The cap keeps a prefix of the preference order at the final step.
        for e in &capped {
            assert!(full.iter().any(|f| f == e));
        }
    }

    #[test]
    fn predictions_after_completion_are_empty() {
        let state = RecognizerState::init(lib(), exo0(false)).unwrap();
        let mut state = state;
        for name in ["login", "addName", "addCredit"] {
            state = state.observe_name(name).unwrap();
        }
        assert_eq!(state.candidates().len(), 1);
        assert!(state.candidates()[0].stats().no_open);
        assert!(state.predict_next().is_empty());
    }

    #[test]
    fn cradle_output_is_a_subset_of_phatt() {
        let l = lib();
        let seqs: [&[&str]; 4] = [
            &["home", "login", "addName", "login", "addCredit"],
            &["login", "home", "addName"],
            &["signup", "addName", "submit", "home"],
            &["home", "home", "login"],
        ];
        for names in seqs {
            let obs = ObservationSequence::from_names(&l, names).unwrap();
            let big = 1_000_000;
            let phatt = RecognizerParams {
                max_exogenous: 0,
                max_explanations: big,
                ..RecognizerParams::phatt()
            };
            let cradle = RecognizerParams {
                max_exogenous: 0,
                max_explanations: big,
                ..RecognizerParams::cradle()
            };
            let all = recognize(&l, &obs, &phatt).unwrap();
            let kept = recognize(&l, &obs, &cradle).unwrap();
            assert!(!kept.is_empty());
            for e in &kept {
                assert!(all.iter().any(|a| a == e), "cradle kept a non-phatt explanation");
            }
        }
    }

    // With an exogenous budget, the plans-below-average filter favors the
    // zero-plan candidate that marks everything exogenous, so each-step
    // filtering can commit to a branch that later becomes a dead end. The
    // pruning is allowed to discard the right answer; what it keeps is still
    // always a subset of the unfiltered set.
    #[test]
    fn each_step_filtering_can_over_commit_with_exogenous_budget() {
        let l = lib();
        let obs = ObservationSequence::from_names(&l, &["home", "payment", "success"]).unwrap();
        let phatt = RecognizerParams { max_exogenous: 2, ..RecognizerParams::phatt() };
        let cradle = RecognizerParams { max_exogenous: 2, ..RecognizerParams::cradle() };
        assert!(!recognize(&l, &obs, &phatt).unwrap().is_empty());
        assert!(matches!(
            recognize(&l, &obs, &cradle),
            Err(RecognizeError::Unexplainable { index: 2, .. })
        ));
    }
}
