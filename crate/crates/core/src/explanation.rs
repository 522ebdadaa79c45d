//! Plan trees and explanations.
//!
//! A plan tree is a partially expanded derivation of one goal. Leaves are
//! either terminals (observed or not) or non-terminals still awaiting a rule
//! choice. Leaf statuses are materialized on every tree edit: `observed`
//! carries the index of the matched observation, `frontier` marks leaves
//! whose ordering predecessors are all satisfied, and `pending` marks leaves
//! blocked by an unsatisfied predecessor.
//!
//! An explanation is a set of plans covering mutually exclusive subsets of
//! the observation sequence, plus the indices it marks exogenous.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::library::{PlanLibrary, RuleId, SymbolId};

/// Index into a plan tree's node arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Observed(usize),
    Frontier,
    Pending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub label: SymbolId,
    /// Some iff the node has been expanded by that rule.
    pub rule_used: Option<RuleId>,
    /// Child nodes in the rule's child order; empty for leaves.
    pub children: Vec<NodeId>,
    /// Observation index for observed terminal leaves.
    pub observed: Option<usize>,
    /// Expansion levels from the root (root = 0).
    pub depth: u16,
    /// Materialized status; None on expanded inner nodes.
    pub status: Option<NodeStatus>,
    satisfied: bool,
}

/// Node fields as documents carry them: label, rule, children, observation index.
pub(crate) type RawNode = (SymbolId, Option<RuleId>, Vec<NodeId>, Option<usize>);

/// One partially or fully expanded plan for a single goal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanTree {
    pub goal: SymbolId,
    root: NodeId,
    nodes: Vec<PlanNode>,
}

impl PlanTree {
    /// A plan consisting only of the unexpanded goal.
    pub fn new_goal(goal: SymbolId) -> Self {
        let root = PlanNode {
            label: goal,
            rule_used: None,
            children: Vec::new(),
            observed: None,
            depth: 0,
            status: Some(NodeStatus::Frontier),
            satisfied: false,
        };
        PlanTree { goal, root: NodeId(0), nodes: vec![root] }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &PlanNode {
        &self.nodes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.node(id).children.is_empty()
    }

    /// True when the whole subtree under `id` is expanded down to terminals
    /// and every terminal leaf is observed.
    pub fn subtree_satisfied(&self, id: NodeId) -> bool {
        self.node(id).satisfied
    }

    /// A plan is complete when every leaf is a terminal and observed.
    pub fn is_complete(&self) -> bool {
        self.nodes[self.root.0 as usize].satisfied
    }

    /// Observation indices matched inside this plan, with their leaves.
    pub fn observed_leaves(&self) -> impl Iterator<Item = (usize, NodeId)> + '_ {
        self.node_ids().filter_map(|id| self.node(id).observed.map(|o| (o, id)))
    }

    /// Leaves with frontier status.
    pub fn frontier_leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&id| self.node(id).status == Some(NodeStatus::Frontier))
    }

    /// Terminals that could be observed next for this plan. Non-terminal
    /// frontier leaves are reported through the first observable terminals of
    /// any rule chain that still fits in `max_depth`.
    pub fn frontier(&self, lib: &PlanLibrary, max_depth: usize) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        for id in self.frontier_leaves() {
            let n = self.node(id);
            if lib.is_terminal(n.label) {
                out.insert(n.label);
            } else {
                let budget = max_depth.saturating_sub(n.depth as usize);
                out.extend(lib.first_terminals(n.label, budget));
            }
        }
        out
    }

    /// Expand leaf `id` with `rule`, returning the new tree. The children are
    /// fresh unobserved leaves in rule child order.
    pub(crate) fn expand(&self, id: NodeId, rule: RuleId, lib: &PlanLibrary) -> PlanTree {
        debug_assert!(self.is_leaf(id));
        debug_assert_eq!(lib.rule(rule).head, self.node(id).label);
        let mut t = self.clone();
        let depth = t.nodes[id.0 as usize].depth + 1;
        let mut kids = Vec::new();
        for &c in &lib.rule(rule).children {
            let nid = NodeId(t.nodes.len() as u32);
            t.nodes.push(PlanNode {
                label: c,
                rule_used: None,
                children: Vec::new(),
                observed: None,
                depth,
                status: None,
                satisfied: false,
            });
            kids.push(nid);
        }
        t.nodes[id.0 as usize].rule_used = Some(rule);
        t.nodes[id.0 as usize].children = kids;
        t.refresh(lib);
        t
    }

    /// Mark terminal leaf `id` as matching observation `obs_index`.
    pub(crate) fn observe_leaf(&self, id: NodeId, obs_index: usize, lib: &PlanLibrary) -> PlanTree {
        debug_assert!(self.is_leaf(id));
        debug_assert!(lib.is_terminal(self.node(id).label));
        debug_assert!(self.node(id).observed.is_none());
        let mut t = self.clone();
        t.nodes[id.0 as usize].observed = Some(obs_index);
        t.refresh(lib);
        t
    }

    /// Recompute `satisfied` and leaf statuses bottom-up, then top-down.
    pub(crate) fn refresh(&mut self, lib: &PlanLibrary) {
        // Bottom-up: a leaf is satisfied iff observed; an expanded node iff
        // all children are. A reversed pre-order visits children first.
        let mut order: Vec<NodeId> = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id.0 as usize].children.iter().copied());
        }
        for &id in order.iter().rev() {
            let i = id.0 as usize;
            let n = &self.nodes[i];
            self.nodes[i].satisfied = if n.children.is_empty() {
                n.observed.is_some()
            } else {
                n.children.iter().all(|&c| self.nodes[c.0 as usize].satisfied)
            };
        }
        // Top-down: a node is enabled iff its parent is and every direct
        // ordering predecessor among its siblings is satisfied.
        let mut enabled = vec![false; self.nodes.len()];
        enabled[self.root.0 as usize] = true;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id.0 as usize];
            if let Some(rule) = n.rule_used {
                let r = lib.rule(rule);
                for (pos, &kid) in n.children.iter().enumerate() {
                    let mut e = enabled[id.0 as usize];
                    for &p in r.preds(pos) {
                        if !self.nodes[n.children[p].0 as usize].satisfied {
                            e = false;
                            break;
                        }
                    }
                    enabled[kid.0 as usize] = e;
                    stack.push(kid);
                }
            }
        }
        for (n, &e) in self.nodes.iter_mut().zip(&enabled) {
            n.status = if !n.children.is_empty() {
                None
            } else if let Some(o) = n.observed {
                Some(NodeStatus::Observed(o))
            } else if e {
                Some(NodeStatus::Frontier)
            } else {
                Some(NodeStatus::Pending)
            };
        }
    }

    /// Rebuild a tree from raw node data (deserialization path). Depths and
    /// statuses are recomputed; stored statuses in documents are advisory.
    pub(crate) fn from_raw(
        goal: SymbolId,
        root: NodeId,
        raw: Vec<RawNode>,
        lib: &PlanLibrary,
    ) -> Result<PlanTree, String> {
        if raw.is_empty() {
            return Err("plan tree has no nodes".into());
        }
        if root.0 as usize >= raw.len() {
            return Err("root id out of range".into());
        }
        let mut parent = vec![None; raw.len()];
        for (i, (_, _, children, _)) in raw.iter().enumerate() {
            for &k in children {
                if k.0 as usize >= raw.len() {
                    return Err(format!("child {k:?} out of range"));
                }
                if parent[k.0 as usize].replace(i).is_some() {
                    return Err(format!("node {k:?} has two parents"));
                }
            }
        }
        if parent[root.0 as usize].is_some() {
            return Err("root has a parent".into());
        }
        // Depths via traversal; counting visits also rejects unreachable nodes.
        let mut depth = vec![0u16; raw.len()];
        let mut seen = 1usize;
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            for &k in &raw[id.0 as usize].2 {
                depth[k.0 as usize] = depth[id.0 as usize] + 1;
                seen += 1;
                stack.push(k);
            }
        }
        if seen != raw.len() {
            return Err("plan tree has unreachable nodes".into());
        }
        let nodes = raw
            .into_iter()
            .enumerate()
            .map(|(i, (label, rule_used, children, observed))| PlanNode {
                label,
                rule_used,
                children,
                observed,
                depth: depth[i],
                status: None,
                satisfied: false,
            })
            .collect();
        let mut t = PlanTree { goal, root, nodes };
        t.refresh(lib);
        Ok(t)
    }

    /// Canonical structural form: ignores node ids, keeps rule choices and
    /// observation indices.
    pub fn canon(&self) -> String {
        fn rec(t: &PlanTree, id: NodeId, out: &mut String) {
            let n = t.node(id);
            if let Some(rule) = n.rule_used {
                out.push('(');
                out.push_str(&format!("{}:r{}", n.label.0, rule.0));
                for &k in &n.children {
                    out.push(' ');
                    rec(t, k, out);
                }
                out.push(')');
            } else if let Some(o) = n.observed {
                out.push_str(&format!("{}@{}", n.label.0, o));
            } else {
                out.push_str(&format!("{}_", n.label.0));
            }
        }
        let mut s = String::new();
        rec(self, self.root, &mut s);
        s
    }
}

/// Statistics read by the filters and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplanationStats {
    pub num_plans: usize,
    pub num_frontier_nodes: usize,
    pub num_distinct_goals: usize,
    pub num_exogenous: usize,
    /// Some plan is complete.
    pub has_full_plan: bool,
    /// Every plan is complete (vacuously true with no plans).
    pub no_open: bool,
}

#[derive(Debug, Clone)]
pub struct Explanation {
    plans: Vec<PlanTree>,
    exogenous: BTreeSet<usize>,
    /// obs_index -> (plan index, leaf). Kept consistent with leaf statuses.
    covered: BTreeMap<usize, (usize, NodeId)>,
    canon: String,
}

impl PartialEq for Explanation {
    fn eq(&self, other: &Self) -> bool {
        self.canon == other.canon
    }
}
impl Eq for Explanation {}

impl Explanation {
    /// The empty explanation: no plans, nothing exogenous.
    pub fn empty() -> Self {
        let mut e = Explanation {
            plans: Vec::new(),
            exogenous: BTreeSet::new(),
            covered: BTreeMap::new(),
            canon: String::new(),
        };
        e.canon = e.compute_canon();
        e
    }

    pub(crate) fn from_parts(
        plans: Vec<PlanTree>,
        exogenous: BTreeSet<usize>,
        covered: BTreeMap<usize, (usize, NodeId)>,
    ) -> Self {
        let mut e = Explanation { plans, exogenous, covered, canon: String::new() };
        e.canon = e.compute_canon();
        e
    }

    pub fn plans(&self) -> &[PlanTree] {
        &self.plans
    }

    pub fn exogenous(&self) -> &BTreeSet<usize> {
        &self.exogenous
    }

    pub fn covered(&self) -> &BTreeMap<usize, (usize, NodeId)> {
        &self.covered
    }

    /// Structural identity: plan order and node ids do not matter.
    pub fn canon(&self) -> &str {
        &self.canon
    }

    fn compute_canon(&self) -> String {
        let mut parts: Vec<String> = self.plans.iter().map(PlanTree::canon).collect();
        parts.sort();
        let exo: Vec<String> = self.exogenous.iter().map(usize::to_string).collect();
        format!("{}|x[{}]", parts.join(" "), exo.join(","))
    }

    pub(crate) fn with_extended_plan(
        &self,
        plan_index: usize,
        tree: PlanTree,
        obs_index: usize,
        leaf: NodeId,
    ) -> Explanation {
        let mut plans = self.plans.clone();
        plans[plan_index] = tree;
        let mut covered = self.covered.clone();
        covered.insert(obs_index, (plan_index, leaf));
        Explanation::from_parts(plans, self.exogenous.clone(), covered)
    }

    pub(crate) fn with_new_plan(
        &self,
        tree: PlanTree,
        obs_index: usize,
        leaf: NodeId,
    ) -> Explanation {
        let mut plans = self.plans.clone();
        plans.push(tree);
        let mut covered = self.covered.clone();
        covered.insert(obs_index, (plans.len() - 1, leaf));
        Explanation::from_parts(plans, self.exogenous.clone(), covered)
    }

    pub(crate) fn with_exogenous(&self, obs_index: usize) -> Explanation {
        let mut exo = self.exogenous.clone();
        exo.insert(obs_index);
        Explanation::from_parts(self.plans.clone(), exo, self.covered.clone())
    }

    pub fn stats(&self) -> ExplanationStats {
        let goals: BTreeSet<SymbolId> = self.plans.iter().map(|p| p.goal).collect();
        ExplanationStats {
            num_plans: self.plans.len(),
            num_frontier_nodes: self.plans.iter().map(|p| p.frontier_leaves().count()).sum(),
            num_distinct_goals: goals.len(),
            num_exogenous: self.exogenous.len(),
            has_full_plan: self.plans.iter().any(PlanTree::is_complete),
            no_open: self.plans.iter().all(PlanTree::is_complete),
        }
    }

    /// Union of per-plan frontiers.
    pub fn frontier(&self, lib: &PlanLibrary, max_depth: usize) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        for p in &self.plans {
            out.extend(p.frontier(lib, max_depth));
        }
        out
    }

    /// Sorting key for the deterministic preference order: fewer exogenous
    /// marks, then fewer plans, then fewer frontier nodes, then canon.
    pub fn preference_key(&self) -> (usize, usize, usize, String) {
        let s = self.stats();
        (s.num_exogenous, s.num_plans, s.num_frontier_nodes, self.canon.clone())
    }
}

/// Terminal names of an observation sequence entry plus where it came from in
/// the raw session, when it came from one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationItem {
    pub terminal: SymbolId,
    /// Raw session entry index this observation survived from.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObservationSequence {
    items: Vec<ObservationItem>,
}

impl ObservationSequence {
    pub fn new(items: Vec<ObservationItem>) -> Self {
        ObservationSequence { items }
    }

    pub fn from_names(lib: &PlanLibrary, names: &[&str]) -> Result<Self, String> {
        let mut items = Vec::new();
        for &n in names {
            let id = lib
                .lookup(n)
                .filter(|&id| lib.is_terminal(id))
                .ok_or_else(|| format!("unknown terminal `{n}`"))?;
            items.push(ObservationItem { terminal: id, source: None });
        }
        Ok(ObservationSequence { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&ObservationItem> {
        self.items.get(i)
    }

    pub fn items(&self) -> &[ObservationItem] {
        &self.items
    }

    pub fn terminals(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.items.iter().map(|i| i.terminal)
    }
}

/// From-scratch verification that `exp` explains `obs`: coverage partitions
/// the sequence, trees are well formed, the observation-to-leaf mapping is
/// injective and every rule's ordering constraints hold against observation
/// order. Independent of how the explanation was built.
pub fn describes(exp: &Explanation, obs: &ObservationSequence, lib: &PlanLibrary) -> bool {
    check_describes(exp, obs, lib).is_ok()
}

/// Like `describes`, with the first violated condition for diagnostics.
pub fn check_describes(
    exp: &Explanation,
    obs: &ObservationSequence,
    lib: &PlanLibrary,
) -> Result<(), String> {
    let n = obs.len();
    // Coverage partition.
    for &i in exp.exogenous() {
        if i >= n {
            return Err(format!("exogenous index {i} out of range"));
        }
        if exp.covered().contains_key(&i) {
            return Err(format!("observation {i} both covered and exogenous"));
        }
    }
    for &i in exp.covered().keys() {
        if i >= n {
            return Err(format!("covered index {i} out of range"));
        }
    }
    if exp.covered().len() + exp.exogenous().len() != n {
        return Err(format!(
            "coverage is not a partition: {} covered + {} exogenous != {} observations",
            exp.covered().len(),
            exp.exogenous().len(),
            n
        ));
    }

    // Tree shape and label checks.
    for (pi, plan) in exp.plans().iter().enumerate() {
        check_tree(plan, lib).map_err(|e| format!("plan {pi}: {e}"))?;
    }

    // covered <-> observed-leaf cross consistency (this is the injectivity
    // of the observation mapping: each index lands on exactly one leaf and
    // each leaf holds at most one index).
    let mut seen_leaves: BTreeSet<(usize, NodeId)> = BTreeSet::new();
    for (&i, &(pi, leaf)) in exp.covered() {
        let plan = exp
            .plans()
            .get(pi)
            .ok_or_else(|| format!("covered {i} points at missing plan {pi}"))?;
        if leaf.0 as usize >= plan.len() {
            return Err(format!("covered {i} points at missing node {leaf:?}"));
        }
        let node = plan.node(leaf);
        if node.observed != Some(i) {
            return Err(format!("covered {i} disagrees with leaf observation {:?}", node.observed));
        }
        if node.label != obs.get(i).unwrap().terminal {
            return Err(format!(
                "observation {i} is `{}` but the leaf is labeled `{}`",
                lib.name(obs.get(i).unwrap().terminal),
                lib.name(node.label)
            ));
        }
        if !seen_leaves.insert((pi, leaf)) {
            return Err(format!("leaf {leaf:?} of plan {pi} covers two observations"));
        }
    }
    for (pi, plan) in exp.plans().iter().enumerate() {
        for (o, leaf) in plan.observed_leaves() {
            if exp.covered().get(&o) != Some(&(pi, leaf)) {
                return Err(format!(
                    "plan {pi} leaf {leaf:?} observes {o} without a covered entry"
                ));
            }
        }
    }

    // Ordering constraints against observation order, per expanded node:
    // when a successor subtree holds any observation, the predecessor
    // subtree must be fully satisfied and strictly earlier.
    for (pi, plan) in exp.plans().iter().enumerate() {
        for id in plan.node_ids() {
            let node = plan.node(id);
            let Some(rule) = node.rule_used else { continue };
            let r = lib.rule(rule);
            for &(a, b) in &r.ordering {
                let sb = subtree_obs_range(plan, node.children[b]);
                if let Some((bmin, _)) = sb {
                    if !plan.subtree_satisfied(node.children[a]) {
                        return Err(format!(
                            "plan {pi}: position {b} observed before predecessor {a} was satisfied"
                        ));
                    }
                    let (_, amax) = subtree_obs_range(plan, node.children[a])
                        .expect("satisfied subtree has observations");
                    if amax >= bmin {
                        return Err(format!(
                            "plan {pi}: ordering ({a},{b}) violated: {amax} is not before {bmin}"
                        ));
                    }
                }
            }
        }
    }

    Ok(())
}

fn check_tree(plan: &PlanTree, lib: &PlanLibrary) -> Result<(), String> {
    if !lib.is_goal(plan.goal) {
        return Err(format!("root `{}` is not a goal", lib.name(plan.goal)));
    }
    if plan.node(plan.root()).label != plan.goal {
        return Err("root label disagrees with the plan goal".into());
    }
    // Single-parent, fully reachable arena.
    let mut parent = vec![None; plan.len()];
    for id in plan.node_ids() {
        for &k in &plan.node(id).children {
            if k.0 as usize >= plan.len() {
                return Err(format!("child {k:?} out of range"));
            }
            if parent[k.0 as usize].replace(id).is_some() {
                return Err(format!("node {k:?} has two parents"));
            }
        }
    }
    for id in plan.node_ids() {
        if id != plan.root() && parent[id.0 as usize].is_none() {
            return Err(format!("node {id:?} unreachable from the root"));
        }
    }
    for id in plan.node_ids() {
        let n = plan.node(id);
        match n.rule_used {
            Some(rule) => {
                if rule.0 as usize >= lib.rules().len() {
                    return Err(format!("unknown rule {rule:?}"));
                }
                let r = lib.rule(rule);
                if r.head != n.label {
                    return Err(format!("rule {rule:?} does not expand `{}`", lib.name(n.label)));
                }
                if n.children.len() != r.children.len()
                    || n.children.iter().zip(&r.children).any(|(&k, &c)| plan.node(k).label != c)
                {
                    return Err(format!("children of node {id:?} disagree with rule {rule:?}"));
                }
                if n.observed.is_some() {
                    return Err(format!("expanded node {id:?} claims an observation"));
                }
            }
            None => {
                if !n.children.is_empty() {
                    return Err(format!("leaf {id:?} has children"));
                }
                if n.observed.is_some() && !lib.is_terminal(n.label) {
                    return Err(format!("non-terminal leaf {id:?} claims an observation"));
                }
            }
        }
    }
    Ok(())
}

fn subtree_obs_range(plan: &PlanTree, id: NodeId) -> Option<(usize, usize)> {
    let mut range: Option<(usize, usize)> = None;
    let mut stack = vec![id];
    while let Some(cur) = stack.pop() {
        let n = plan.node(cur);
        if let Some(o) = n.observed {
            range = Some(match range {
                None => (o, o),
                Some((lo, hi)) => (lo.min(o), hi.max(o)),
            });
        }
        stack.extend(n.children.iter().copied());
    }
    range
}
