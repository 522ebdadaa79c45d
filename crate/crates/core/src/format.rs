//! Interchange documents and renderers for explanations.
//!
//! The JSON documents mirror the in-memory types field by field but use
//! symbol names instead of ids, so they stay readable and stable across
//! library reloads. Statuses in documents are advisory: loading recomputes
//! them from structure. DOT output colors frontier leaves green and pending
//! leaves blue.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::explanation::{Explanation, NodeId, NodeStatus, ObservationSequence, PlanTree, RawNode};
use crate::library::{PlanLibrary, RuleId};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: u32,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_used: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<StatusDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusDoc {
    Observed(usize),
    Frontier,
    Pending,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanTreeDoc {
    pub goal: String,
    pub root: u32,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveredDoc {
    pub obs: usize,
    pub plan: usize,
    pub node: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub plans: Vec<PlanTreeDoc>,
    pub exogenous: Vec<usize>,
    pub covered: Vec<CoveredDoc>,
}

pub fn plan_tree_to_doc(tree: &PlanTree, lib: &PlanLibrary) -> PlanTreeDoc {
    let nodes = tree
        .node_ids()
        .map(|id| {
            let n = tree.node(id);
            NodeDoc {
                id: id.0,
                label: lib.name(n.label).to_string(),
                rule_used: n.rule_used.map(|r| r.0),
                children: n.children.iter().map(|c| c.0).collect(),
                status: n.status.map(|s| match s {
                    NodeStatus::Observed(o) => StatusDoc::Observed(o),
                    NodeStatus::Frontier => StatusDoc::Frontier,
                    NodeStatus::Pending => StatusDoc::Pending,
                }),
            }
        })
        .collect();
    PlanTreeDoc { goal: lib.name(tree.goal).to_string(), root: tree.root().0, nodes }
}

pub fn plan_tree_from_doc(doc: &PlanTreeDoc, lib: &PlanLibrary) -> Result<PlanTree, String> {
    let goal = lib.lookup(&doc.goal).ok_or_else(|| format!("unknown goal `{}`", doc.goal))?;
    let mut raw: Vec<RawNode> = Vec::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.id as usize != i {
            return Err(format!("node ids must match their position; got {} at {}", n.id, i));
        }
        let label = lib.lookup(&n.label).ok_or_else(|| format!("unknown symbol `{}`", n.label))?;
        let rule = match n.rule_used {
            Some(r) => {
                let rule =
                    lib.rules().get(r as usize).ok_or_else(|| format!("unknown rule {r}"))?;
                if rule.head != label {
                    return Err(format!("rule {r} does not expand `{}`", n.label));
                }
                if rule.children.len() != n.children.len() {
                    return Err(format!("rule {r} expects {} children", rule.children.len()));
                }
                Some(RuleId(r))
            }
            None => None,
        };
        let observed = match n.status {
            Some(StatusDoc::Observed(o)) => Some(o),
            _ => None,
        };
        raw.push((label, rule, n.children.iter().map(|&c| NodeId(c)).collect(), observed));
    }
    PlanTree::from_raw(goal, NodeId(doc.root), raw, lib)
}

pub fn explanation_to_doc(exp: &Explanation, lib: &PlanLibrary) -> ExplanationDoc {
    ExplanationDoc {
        plans: exp.plans().iter().map(|p| plan_tree_to_doc(p, lib)).collect(),
        exogenous: exp.exogenous().iter().copied().collect(),
        covered: exp
            .covered()
            .iter()
            .map(|(&obs, &(plan, node))| CoveredDoc { obs, plan, node: node.0 })
            .collect(),
    }
}

pub fn explanation_from_doc(
    doc: &ExplanationDoc,
    lib: &PlanLibrary,
) -> Result<Explanation, String> {
    let mut plans = Vec::new();
    for (i, p) in doc.plans.iter().enumerate() {
        plans.push(plan_tree_from_doc(p, lib).map_err(|e| format!("plan {i}: {e}"))?);
    }
    let exogenous: BTreeSet<usize> = doc.exogenous.iter().copied().collect();
    let mut covered: BTreeMap<usize, (usize, NodeId)> = BTreeMap::new();
    for c in &doc.covered {
        if covered.insert(c.obs, (c.plan, NodeId(c.node))).is_some() {
            return Err(format!("observation {} covered twice", c.obs));
        }
    }
    Ok(Explanation::from_parts(plans, exogenous, covered))
}

// --- human-readable rendering ------------------------------------------------

/// Indented tree view with one status tag per leaf.
pub fn render_explanation_text(exp: &Explanation, lib: &PlanLibrary) -> String {
    let stats = exp.stats();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "plans={} frontier={} exogenous={}{}",
        stats.num_plans,
        stats.num_frontier_nodes,
        stats.num_exogenous,
        if stats.has_full_plan { " [has complete plan]" } else { "" }
    );
    for (pi, plan) in exp.plans().iter().enumerate() {
        let _ = writeln!(
            out,
            "  plan {pi}: {}{}",
            lib.name(plan.goal),
            if plan.is_complete() { " (complete)" } else { " (open)" }
        );
        render_node(plan, plan.root(), lib, 2, &mut out);
    }
    if !exp.exogenous().is_empty() {
        let marks: Vec<String> = exp.exogenous().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "  exogenous observations: {}", marks.join(", "));
    }
    out
}

fn render_node(plan: &PlanTree, id: NodeId, lib: &PlanLibrary, indent: usize, out: &mut String) {
    let n = plan.node(id);
    let pad = "  ".repeat(indent);
    let tag = match n.status {
        Some(NodeStatus::Observed(o)) => format!(" @{o}"),
        Some(NodeStatus::Frontier) => " (next)".to_string(),
        Some(NodeStatus::Pending) => " (blocked)".to_string(),
        None => String::new(),
    };
    let _ = writeln!(out, "{pad}{}{tag}", lib.name(n.label));
    for &k in &n.children {
        render_node(plan, k, lib, indent + 1, out);
    }
}

/// One digraph per explanation, one cluster per plan. Frontier leaves are
/// filled green, pending leaves blue.
pub fn explanation_to_dot(exp: &Explanation, lib: &PlanLibrary) -> String {
    let mut out = String::from("digraph explanation {\n  rankdir=TB;\n  node [shape=box];\n");
    for (pi, plan) in exp.plans().iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_plan{pi} {{");
        let _ = writeln!(out, "    label=\"plan {pi}: {}\";", lib.name(plan.goal));
        for id in plan.node_ids() {
            let n = plan.node(id);
            let name = format!("p{pi}n{}", id.0);
            let (label, attrs) = match n.status {
                Some(NodeStatus::Observed(o)) => {
                    (format!("{} [{}]", lib.name(n.label), o), String::new())
                }
                Some(NodeStatus::Frontier) => {
                    (lib.name(n.label).to_string(), ", style=filled, fillcolor=green".to_string())
                }
                Some(NodeStatus::Pending) => {
                    (lib.name(n.label).to_string(), ", style=filled, fillcolor=blue".to_string())
                }
                None => (lib.name(n.label).to_string(), String::new()),
            };
            let _ = writeln!(out, "    {name} [label=\"{label}\"{attrs}];");
        }
        for id in plan.node_ids() {
            for &k in &plan.node(id).children {
                let _ = writeln!(out, "    p{pi}n{} -> p{pi}n{};", id.0, k.0);
            }
        }
        let _ = writeln!(out, "  }}");
    }
    if !exp.exogenous().is_empty() {
        let marks: Vec<String> = exp.exogenous().iter().map(usize::to_string).collect();
        let _ =
            writeln!(out, "  exogenous [label=\"exogenous: {}\", shape=note];", marks.join(", "));
    }
    out.push_str("}\n");
    out
}

/// Observation sequence as (index, terminal, source) triples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationDoc {
    pub index: usize,
    pub terminal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_entry: Option<usize>,
}

pub fn observations_to_doc(obs: &ObservationSequence, lib: &PlanLibrary) -> Vec<ObservationDoc> {
    obs.items()
        .iter()
        .enumerate()
        .map(|(i, item)| ObservationDoc {
            index: i,
            terminal: lib.name(item.terminal).to_string(),
            source_entry: item.source,
        })
        .collect()
}
