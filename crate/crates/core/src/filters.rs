//! Domain-independent explanation filters.
//!
//! Three predicates prune the candidate set: (1) the number of plans is at
//! most the arithmetic mean over the current candidates, (2) the number of
//! frontier nodes is at most the mean, (3) the number of different plans
//! stays below a fixed bound. The third counts distinct goal labels by
//! default; a switch restores the raw plan count. Means are taken over the
//! input set itself, so applying the filters twice changes nothing new on
//! the second pass only if the survivors' means still cover them.

use serde::{Deserialize, Serialize};

use crate::explanation::Explanation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Filter 1: keep candidates with num_plans <= mean(num_plans).
    pub enable_plans_leq_avg: bool,
    /// Filter 2: keep candidates with num_frontier_nodes <= mean.
    pub enable_frontier_leq_avg: bool,
    /// Filter 3 bound: keep candidates with fewer different plans than this.
    pub distinct_plans_max: usize,
    /// Count distinct goal labels for filter 3; false counts plans directly.
    pub distinct_by_goal: bool,
    /// Run the filters after every observation; false defers them to the end
    /// of the sequence (batch mode, useful for experiments).
    pub apply_each_step: bool,
    /// When every candidate fails, keep the least-violating one instead of
    /// emptying the set. Disable for the strict behavior.
    pub retain_best_on_empty: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            enable_plans_leq_avg: true,
            enable_frontier_leq_avg: true,
            distinct_plans_max: 4,
            distinct_by_goal: true,
            apply_each_step: true,
            retain_best_on_empty: true,
        }
    }
}

/// How many candidates each filter would remove from `cands` on its own,
/// with means computed over `cands`. Purely informational.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub plans_over_avg: usize,
    pub frontier_over_avg: usize,
    pub distinct_plans_over: usize,
}

fn different_plans(e: &Explanation, cfg: &FilterConfig) -> usize {
    let s = e.stats();
    if cfg.distinct_by_goal {
        s.num_distinct_goals
    } else {
        s.num_plans
    }
}

/// Keep the candidates that pass every enabled filter. Input order is
/// preserved. `n * len <= total` is the integer form of `n <= mean`.
pub fn apply_filters(cands: &[Explanation], cfg: &FilterConfig) -> Vec<Explanation> {
    if cands.is_empty() {
        return Vec::new();
    }
    let len = cands.len();
    let total_plans: usize = cands.iter().map(|e| e.stats().num_plans).sum();
    let total_frontier: usize = cands.iter().map(|e| e.stats().num_frontier_nodes).sum();

    let survives = |e: &Explanation| -> bool {
        let s = e.stats();
        if cfg.enable_plans_leq_avg && s.num_plans * len > total_plans {
            return false;
        }
        if cfg.enable_frontier_leq_avg && s.num_frontier_nodes * len > total_frontier {
            return false;
        }
        different_plans(e, cfg) < cfg.distinct_plans_max
    };

    let kept: Vec<Explanation> = cands.iter().filter(|e| survives(e)).cloned().collect();
    if kept.is_empty() && cfg.retain_best_on_empty {
        let best = cands.iter().min_by_key(|e| e.preference_key()).expect("non-empty input");
        return vec![best.clone()];
    }
    kept
}

/// Independent per-filter removal counts over `cands`.
pub fn filter_report(cands: &[Explanation], cfg: &FilterConfig) -> FilterReport {
    let len = cands.len();
    if len == 0 {
        return FilterReport::default();
    }
    let total_plans: usize = cands.iter().map(|e| e.stats().num_plans).sum();
    let total_frontier: usize = cands.iter().map(|e| e.stats().num_frontier_nodes).sum();
    FilterReport {
        input: len,
        plans_over_avg: cands.iter().filter(|e| e.stats().num_plans * len > total_plans).count(),
        frontier_over_avg: cands
            .iter()
            .filter(|e| e.stats().num_frontier_nodes * len > total_frontier)
            .count(),
        distinct_plans_over: cands
            .iter()
            .filter(|e| different_plans(e, cfg) >= cfg.distinct_plans_max)
            .count(),
    }
}
