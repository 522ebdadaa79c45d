//! Plan libraries: action symbols, decomposition rules with partial-order
//! constraints, parsing, validation and a few derived symbol tables.
//!
//! A library is the tuple (terminals, non-terminals, goals, rules). The JSON
//! document only declares terminals, goals and rules; non-terminals are
//! implied by rule heads plus goals. Ordering constraints are pairs of child
//! positions (0-based). Pairs may also be written as symbol names, which are
//! resolved to positions at parse time and rejected when ambiguous.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Index into the library's symbol table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymbolId(pub u32);

/// Index into the library's rule table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Terminal,
    NonTerminal,
}

#[derive(Debug, Clone)]
pub struct ActionSymbol {
    pub name: String,
    pub kind: SymbolKind,
}

/// One decomposition rule: `head -> children` plus ordering constraints over
/// child positions. `(i, j)` means the subtree at position i must be fully
/// executed before anything in the subtree at position j starts.
#[derive(Debug, Clone)]
pub struct Rule {
    pub head: SymbolId,
    pub children: Vec<SymbolId>,
    pub ordering: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
}

impl Rule {
    /// Direct ordering predecessors of a child position.
    pub fn preds(&self, pos: usize) -> &[usize] {
        &self.preds[pos]
    }

    /// Positions with no ordering predecessor at all.
    pub fn minimal_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.children.len()).filter(|&p| self.preds[p].is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct PlanLibrary {
    symbols: Vec<ActionSymbol>,
    by_name: BTreeMap<String, SymbolId>,
    terminals: Vec<SymbolId>,
    non_terminals: Vec<SymbolId>,
    goals: Vec<SymbolId>,
    rules: Vec<Rule>,
    rules_by_head: BTreeMap<SymbolId, Vec<RuleId>>,
    min_heights: Vec<Option<usize>>,
}

impl PlanLibrary {
    pub fn symbol(&self, id: SymbolId) -> &ActionSymbol {
        &self.symbols[id.0 as usize]
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id.0 as usize].name
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn is_terminal(&self, id: SymbolId) -> bool {
        self.symbols[id.0 as usize].kind == SymbolKind::Terminal
    }

    pub fn is_goal(&self, id: SymbolId) -> bool {
        self.goals.contains(&id)
    }

    pub fn terminals(&self) -> &[SymbolId] {
        &self.terminals
    }

    pub fn non_terminals(&self) -> &[SymbolId] {
        &self.non_terminals
    }

    pub fn goals(&self) -> &[SymbolId] {
        &self.goals
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0 as usize]
    }

    pub fn rules_for(&self, head: SymbolId) -> &[RuleId] {
        self.rules_by_head.get(&head).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Minimum number of expansion levels needed to derive `sym` down to
    /// terminals, or None when no finite derivation exists.
    pub fn min_height(&self, sym: SymbolId) -> Option<usize> {
        self.min_heights[sym.0 as usize]
    }

    /// Non-terminals that can reach themselves through rule expansion.
    pub fn detect_recursion(&self) -> BTreeSet<SymbolId> {
        // reach[a] = set of non-terminals reachable from a in >= 1 step
        let mut reach: BTreeMap<SymbolId, BTreeSet<SymbolId>> = BTreeMap::new();
        for &nt in &self.non_terminals {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<SymbolId> = self
                .rules_for(nt)
                .iter()
                .flat_map(|&r| self.rule(r).children.iter().copied())
                .filter(|&c| !self.is_terminal(c))
                .collect();
            while let Some(s) = stack.pop() {
                if seen.insert(s) {
                    for &r in self.rules_for(s) {
                        for &c in &self.rule(r).children {
                            if !self.is_terminal(c) && !seen.contains(&c) {
                                stack.push(c);
                            }
                        }
                    }
                }
            }
            reach.insert(nt, seen);
        }
        self.non_terminals.iter().copied().filter(|nt| reach[nt].contains(nt)).collect()
    }

    /// Terminals that can appear as the first observable action of `sym`,
    /// allowing at most `budget` expansion levels.
    pub fn first_terminals(&self, sym: SymbolId, budget: usize) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        self.first_into(sym, budget, &mut out);
        out
    }

    fn first_into(&self, sym: SymbolId, budget: usize, out: &mut BTreeSet<SymbolId>) {
        if self.is_terminal(sym) {
            out.insert(sym);
            return;
        }
        if budget == 0 {
            return;
        }
        for &r in self.rules_for(sym) {
            let rule = self.rule(r);
            for p in rule.minimal_positions() {
                self.first_into(rule.children[p], budget - 1, out);
            }
        }
    }

    /// Terminals that can appear anywhere in a derivation of `sym` within
    /// `budget` expansion levels.
    pub fn reachable_terminals(&self, sym: SymbolId, budget: usize) -> BTreeSet<SymbolId> {
        let mut memo: BTreeMap<(SymbolId, usize), BTreeSet<SymbolId>> = BTreeMap::new();
        self.reach_memo(sym, budget, &mut memo).clone()
    }

    fn reach_memo<'a>(
        &self,
        sym: SymbolId,
        budget: usize,
        memo: &'a mut BTreeMap<(SymbolId, usize), BTreeSet<SymbolId>>,
    ) -> &'a BTreeSet<SymbolId> {
        if !memo.contains_key(&(sym, budget)) {
            let mut out = BTreeSet::new();
            if self.is_terminal(sym) {
                out.insert(sym);
            } else if budget > 0 {
                for &r in self.rules_for(sym) {
                    for &c in &self.rule(r).children.clone() {
                        out.extend(self.reach_memo(c, budget - 1, memo).iter().copied());
                    }
                }
            }
            memo.insert((sym, budget), out);
        }
        &memo[&(sym, budget)]
    }

    /// Serialize back to the JSON document format accepted by `parse_library`.
    pub fn to_json(&self) -> String {
        let doc = LibraryDoc {
            terminals: self.terminals.iter().map(|&t| self.name(t).to_string()).collect(),
            goals: self.goals.iter().map(|&g| self.name(g).to_string()).collect(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleDoc {
                    head: self.name(r.head).to_string(),
                    children: r.children.iter().map(|&c| self.name(c).to_string()).collect(),
                    ordering: r
                        .ordering
                        .iter()
                        .map(|&(i, j)| vec![PosOrName::Pos(i), PosOrName::Pos(j)])
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("library document serializes")
    }

    /// Structural equivalence up to rule order.
    pub fn equivalent(&self, other: &PlanLibrary) -> bool {
        let names = |ids: &[SymbolId], lib: &PlanLibrary| -> BTreeSet<String> {
            ids.iter().map(|&i| lib.name(i).to_string()).collect()
        };
        if names(&self.terminals, self) != names(&other.terminals, other)
            || names(&self.goals, self) != names(&other.goals, other)
            || names(&self.non_terminals, self) != names(&other.non_terminals, other)
        {
            return false;
        }
        let rule_key = |lib: &PlanLibrary, r: &Rule| {
            let mut ord = r.ordering.clone();
            ord.sort_unstable();
            (
                lib.name(r.head).to_string(),
                r.children.iter().map(|&c| lib.name(c).to_string()).collect::<Vec<_>>(),
                ord,
            )
        };
        let mut a: Vec<_> = self.rules.iter().map(|r| rule_key(self, r)).collect();
        let mut b: Vec<_> = other.rules.iter().map(|r| rule_key(other, r)).collect();
        a.sort();
        b.sort();
        a == b
    }
}

// --- validation -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueCode {
    MalformedDocument,
    EmptySymbolName,
    DuplicateSymbol,
    UndeclaredSymbol,
    GoalNotNonTerminal,
    NoRulesForNonTerminal,
    EmptyRuleChildren,
    OrderingOutOfRange,
    OrderingCycle,
    OrderingNameUnknown,
    OrderingNameAmbiguous,
    RecursiveNonTerminal,
    UnderivableNonTerminal,
    UnusedTerminal,
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("issue code serializes");
        write!(f, "{}", s.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    /// Where the issue was found, e.g. `rules[2]` or `goals`.
    pub location: String,
}

/// Every problem found in a library document. Validation is total: all
/// errors are collected in one pass instead of stopping at the first.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, code: IssueCode, location: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue { code, message: message.into(), location: location.into() });
    }

    fn warn(&mut self, code: IssueCode, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue { code, message: message.into(), location: location.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.errors {
            writeln!(f, "error[{}] at {}: {}", i.code, i.location, i.message)?;
        }
        for i in &self.warnings {
            writeln!(f, "warning[{}] at {}: {}", i.code, i.location, i.message)?;
        }
        Ok(())
    }
}

// --- document types ----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LibraryDoc {
    terminals: Vec<String>,
    goals: Vec<String>,
    rules: Vec<RuleDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleDoc {
    head: String,
    children: Vec<String>,
    #[serde(default)]
    ordering: Vec<Vec<PosOrName>>,
}

/// Ordering pair element: a 0-based child position or a child symbol name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PosOrName {
    Pos(usize),
    Name(String),
}

/// Parse and validate a library document, returning either a usable library
/// or the full validation report.
pub fn parse_library(text: &str) -> Result<PlanLibrary, ValidationReport> {
    let (lib, report) = build_library(text);
    match lib {
        Some(l) if report.is_ok() => Ok(l),
        _ => Err(report),
    }
}

/// Validate without keeping the library. Warnings are included.
pub fn validate_library(text: &str) -> ValidationReport {
    build_library(text).1
}

fn build_library(text: &str) -> (Option<PlanLibrary>, ValidationReport) {
    let mut report = ValidationReport::default();
    let doc: LibraryDoc = match serde_json::from_str(text) {
        Ok(d) => d,
        Err(e) => {
            report.error(
                IssueCode::MalformedDocument,
                "document",
                format!("not a valid library document: {e}"),
            );
            return (None, report);
        }
    };

    // Symbol tables. Non-terminals are implied by rule heads plus goals.
    let mut symbols: Vec<ActionSymbol> = Vec::new();
    let mut by_name: BTreeMap<String, SymbolId> = BTreeMap::new();
    let mut terminals = Vec::new();

    for (i, t) in doc.terminals.iter().enumerate() {
        let loc = format!("terminals[{i}]");
        if t.is_empty() {
            report.error(IssueCode::EmptySymbolName, &loc, "empty symbol name");
            continue;
        }
        if by_name.contains_key(t) {
            report.error(IssueCode::DuplicateSymbol, &loc, format!("symbol `{t}` declared twice"));
            continue;
        }
        let id = SymbolId(symbols.len() as u32);
        symbols.push(ActionSymbol { name: t.clone(), kind: SymbolKind::Terminal });
        by_name.insert(t.clone(), id);
        terminals.push(id);
    }

    let mut nt_names: Vec<String> = Vec::new();
    for r in &doc.rules {
        if !r.head.is_empty() && !nt_names.contains(&r.head) {
            nt_names.push(r.head.clone());
        }
    }
    for g in &doc.goals {
        if !g.is_empty() && !nt_names.contains(g) && !by_name.contains_key(g) {
            nt_names.push(g.clone());
        }
    }

    let mut non_terminals = Vec::new();
    for n in &nt_names {
        if let Some(&existing) = by_name.get(n) {
            // A rule head that is also a declared terminal.
            if symbols[existing.0 as usize].kind == SymbolKind::Terminal {
                report.error(
                    IssueCode::DuplicateSymbol,
                    "rules",
                    format!("symbol `{n}` is declared terminal but used as a rule head"),
                );
            }
            continue;
        }
        let id = SymbolId(symbols.len() as u32);
        symbols.push(ActionSymbol { name: n.clone(), kind: SymbolKind::NonTerminal });
        by_name.insert(n.clone(), id);
        non_terminals.push(id);
    }

    // Goals.
    let mut goals = Vec::new();
    let mut seen_goals = BTreeSet::new();
    for (i, g) in doc.goals.iter().enumerate() {
        let loc = format!("goals[{i}]");
        if g.is_empty() {
            report.error(IssueCode::EmptySymbolName, &loc, "empty symbol name");
            continue;
        }
        if !seen_goals.insert(g.clone()) {
            report.error(IssueCode::DuplicateSymbol, &loc, format!("goal `{g}` declared twice"));
            continue;
        }
        match by_name.get(g) {
            Some(&id) if symbols[id.0 as usize].kind == SymbolKind::NonTerminal => goals.push(id),
            Some(_) => {
                report.error(
                    IssueCode::GoalNotNonTerminal,
                    &loc,
                    format!("goal `{g}` is a terminal"),
                );
            }
            None => unreachable!("goal names are interned above"),
        }
    }

    // Rules.
    let mut rules: Vec<Rule> = Vec::new();
    let mut rules_by_head: BTreeMap<SymbolId, Vec<RuleId>> = BTreeMap::new();
    for (ri, rd) in doc.rules.iter().enumerate() {
        let loc = format!("rules[{ri}]");
        let mut ok = true;
        if rd.head.is_empty() {
            report.error(IssueCode::EmptySymbolName, &loc, "empty rule head");
            ok = false;
        }
        if rd.children.is_empty() {
            report.error(
                IssueCode::EmptyRuleChildren,
                &loc,
                format!("rule for `{}` has no children", rd.head),
            );
            ok = false;
        }
        let mut child_ids = Vec::new();
        for (ci, c) in rd.children.iter().enumerate() {
            match by_name.get(c) {
                Some(&id) => child_ids.push(id),
                None => {
                    report.error(
                        IssueCode::UndeclaredSymbol,
                        format!("{loc}.children[{ci}]"),
                        format!("symbol `{c}` is neither a terminal nor a non-terminal"),
                    );
                    ok = false;
                }
            }
        }

        // Resolve ordering pairs: positions as written, names to positions.
        let mut ordering: Vec<(usize, usize)> = Vec::new();
        let mut ordering_ok = true;
        for (oi, pair) in rd.ordering.iter().enumerate() {
            let oloc = format!("{loc}.ordering[{oi}]");
            if pair.len() != 2 {
                report.error(
                    IssueCode::OrderingOutOfRange,
                    &oloc,
                    "ordering entry must have exactly two elements",
                );
                ok = false;
                ordering_ok = false;
                continue;
            }
            let mut resolved = [0usize; 2];
            let mut pair_ok = true;
            for (k, elem) in pair.iter().enumerate() {
                match elem {
                    PosOrName::Pos(p) => {
                        if *p >= rd.children.len() {
                            report.error(
                                IssueCode::OrderingOutOfRange,
                                &oloc,
                                format!(
                                    "position {p} out of range for {} children",
                                    rd.children.len()
                                ),
                            );
                            pair_ok = false;
                        } else {
                            resolved[k] = *p;
                        }
                    }
                    PosOrName::Name(n) => {
                        let hits: Vec<usize> = rd
                            .children
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| *c == n)
                            .map(|(i, _)| i)
                            .collect();
                        match hits.len() {
                            0 => {
                                report.error(
                                    IssueCode::OrderingNameUnknown,
                                    &oloc,
                                    format!("`{n}` is not a child of this rule"),
                                );
                                pair_ok = false;
                            }
                            1 => resolved[k] = hits[0],
                            _ => {
                                report.error(
                                    IssueCode::OrderingNameAmbiguous,
                                    &oloc,
                                    format!(
                                        "`{n}` appears {} times among the children; use positions",
                                        hits.len()
                                    ),
                                );
                                pair_ok = false;
                            }
                        }
                    }
                }
            }
            if pair_ok {
                ordering.push((resolved[0], resolved[1]));
            } else {
                ok = false;
                ordering_ok = false;
            }
        }

        // Cycle check over the ordering relation (a self-pair is a cycle).
        // Runs even when other parts of the rule failed, so one pass reports
        // everything; it only needs the resolved positions.
        if ordering_ok {
            let n = rd.children.len();
            let mut closure = vec![vec![false; n]; n];
            for &(i, j) in &ordering {
                closure[i][j] = true;
            }
            for k in 0..n {
                for i in 0..n {
                    if closure[i][k] {
                        #[allow(clippy::needless_range_loop)] // reads and writes the same matrix
                        for j in 0..n {
                            if closure[k][j] {
                                closure[i][j] = true;
                            }
                        }
                    }
                }
            }
            if (0..n).any(|i| closure[i][i]) {
                report.error(
                    IssueCode::OrderingCycle,
                    &loc,
                    "ordering cycle: the rule can never be satisfied",
                );
                ok = false;
            }
        }

        if ok {
            let head = by_name[&rd.head];
            let mut preds = vec![Vec::new(); child_ids.len()];
            for &(i, j) in &ordering {
                preds[j].push(i);
            }
            let id = RuleId(rules.len() as u32);
            rules_by_head.entry(head).or_default().push(id);
            rules.push(Rule { head, children: child_ids, ordering, preds });
        }
    }

    // Every non-terminal needs at least one rule.
    for &nt in &non_terminals {
        if !rules_by_head.contains_key(&nt) {
            report.error(
                IssueCode::NoRulesForNonTerminal,
                "rules",
                format!("non-terminal `{}` has no rules", symbols[nt.0 as usize].name),
            );
        }
    }

    if !report.is_ok() {
        return (None, report);
    }

    let min_heights = compute_min_heights(&symbols, &rules);
    let lib = PlanLibrary {
        symbols,
        by_name,
        terminals,
        non_terminals,
        goals,
        rules,
        rules_by_head,
        min_heights,
    };

    // Warnings on the finished library.
    let rec = lib.detect_recursion();
    for &nt in &rec {
        report.warn(
            IssueCode::RecursiveNonTerminal,
            "rules",
            format!("non-terminal `{}` is recursive; recognition is depth-bounded", lib.name(nt)),
        );
    }
    for &nt in &lib.non_terminals {
        if lib.min_height(nt).is_none() {
            report.warn(
                IssueCode::UnderivableNonTerminal,
                "rules",
                format!("non-terminal `{}` cannot derive a finite terminal sequence", lib.name(nt)),
            );
        }
    }
    let used: BTreeSet<SymbolId> =
        lib.rules.iter().flat_map(|r| r.children.iter().copied()).collect();
    for &t in &lib.terminals {
        if !used.contains(&t) {
            report.warn(
                IssueCode::UnusedTerminal,
                "terminals",
                format!("terminal `{}` appears in no rule", lib.name(t)),
            );
        }
    }

    (Some(lib), report)
}

fn compute_min_heights(symbols: &[ActionSymbol], rules: &[Rule]) -> Vec<Option<usize>> {
    let mut h: Vec<Option<usize>> = symbols
        .iter()
        .map(|s| if s.kind == SymbolKind::Terminal { Some(0) } else { None })
        .collect();
    loop {
        let mut changed = false;
        for r in rules {
            let mut worst = 0usize;
            let mut all = true;
            for &c in &r.children {
                match h[c.0 as usize] {
                    Some(v) => worst = worst.max(v),
                    None => {
                        all = false;
                        break;
                    }
                }
            }
            if all {
                let cand = worst + 1;
                let slot = &mut h[r.head.0 as usize];
                if slot.is_none_or(|cur| cand < cur) {
                    *slot = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            return h;
        }
    }
}
