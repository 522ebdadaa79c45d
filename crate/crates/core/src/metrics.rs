//! Session and corpus measurement.
//!
//! A session report captures one recognizer run: counts before and after
//! preprocessing, how many explanations came back, how many of those contain
//! a complete plan or consist only of complete plans, and wall time. Corpus
//! reports aggregate per session type as mean and population standard
//! deviation, rendered as one column per type.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::explanation::{Explanation, ObservationSequence};
use crate::library::PlanLibrary;
use crate::recognizer::{recognize, Mode, RecognizeError, RecognizerParams};

/// (total, with a complete plan, with no open plans).
///
/// An explanation with zero plans has no complete plan but also nothing
/// open, so it counts toward the third number only.
pub fn classify(exps: &[Explanation]) -> (usize, usize, usize) {
    let total = exps.len();
    let full = exps.iter().filter(|e| e.stats().has_full_plan).count();
    let closed = exps.iter().filter(|e| e.stats().no_open).count();
    (total, full, closed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub session_type: String,
    pub mode: String,
    pub raw_entry_count: usize,
    pub observation_count: usize,
    pub explanation_count: usize,
    pub full_plan_count: usize,
    pub no_open_count: usize,
    /// Fewest exogenous marks across the returned explanations.
    pub exogenous_min: Option<usize>,
    /// Recognizer wall time in seconds.
    pub recognize_wall_time: f64,
}

impl SessionReport {
    /// Fraction of raw entries removed by preprocessing.
    pub fn compression(&self) -> f64 {
        if self.raw_entry_count == 0 {
            return 0.0;
        }
        1.0 - self.observation_count as f64 / self.raw_entry_count as f64
    }
}

/// Run the recognizer over a preprocessed session and fill in a report.
pub fn measure_session(
    lib: &PlanLibrary,
    obs: &ObservationSequence,
    params: &RecognizerParams,
    session_id: &str,
    session_type: &str,
    raw_entry_count: usize,
) -> Result<(SessionReport, Vec<Explanation>), RecognizeError> {
    let start = Instant::now();
    let exps = recognize(lib, obs, params)?;
    let elapsed = start.elapsed().as_secs_f64();
    let (total, full, closed) = classify(&exps);
    let report = SessionReport {
        session_id: session_id.to_string(),
        session_type: session_type.to_string(),
        mode: params.mode().as_str().to_string(),
        raw_entry_count,
        observation_count: obs.len(),
        explanation_count: total,
        full_plan_count: full,
        no_open_count: closed,
        exogenous_min: exps.iter().map(|e| e.stats().num_exogenous).min(),
        recognize_wall_time: elapsed,
    };
    Ok((report, exps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn from_values(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }

    fn render(&self, decimals: usize) -> String {
        format!("{:.d$} ({:.d$})", self.mean, self.std, d = decimals)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeSummary {
    pub session_type: String,
    pub sessions: usize,
    pub entries: MeanStd,
    pub observations: MeanStd,
    /// Mean fraction of entries removed by preprocessing.
    pub compression: f64,
    /// Explanation counts keyed by recognizer mode.
    pub explanations: BTreeMap<String, MeanStd>,
    /// Wall times in seconds keyed by recognizer mode.
    pub time_seconds: BTreeMap<String, MeanStd>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusReport {
    pub types: Vec<TypeSummary>,
}

impl CorpusReport {
    /// Aggregate session reports by type. Entry and observation counts are
    /// taken once per session (a session measured under both modes is not
    /// double counted); explanations and time are grouped by mode.
    pub fn from_reports(reports: &[SessionReport]) -> CorpusReport {
        let mut order: Vec<String> = Vec::new();
        for r in reports {
            if !order.contains(&r.session_type) {
                order.push(r.session_type.clone());
            }
        }
        let mut types = Vec::new();
        for ty in order {
            let of_type: Vec<&SessionReport> =
                reports.iter().filter(|r| r.session_type == ty).collect();
            let mut per_session: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for r in &of_type {
                per_session
                    .entry(r.session_id.as_str())
                    .or_insert((r.raw_entry_count, r.observation_count));
            }
            let entries: Vec<f64> = per_session.values().map(|&(e, _)| e as f64).collect();
            let observations: Vec<f64> = per_session.values().map(|&(_, o)| o as f64).collect();
            let total_entries: f64 = entries.iter().sum();
            let total_obs: f64 = observations.iter().sum();
            let compression =
                if total_entries > 0.0 { 1.0 - total_obs / total_entries } else { 0.0 };

            let mut explanations = BTreeMap::new();
            let mut time_seconds = BTreeMap::new();
            let mut modes: Vec<&str> = of_type.iter().map(|r| r.mode.as_str()).collect();
            modes.sort();
            modes.dedup();
            for mode in modes {
                let of_mode: Vec<&&SessionReport> =
                    of_type.iter().filter(|r| r.mode == mode).collect();
                let counts: Vec<f64> = of_mode.iter().map(|r| r.explanation_count as f64).collect();
                let times: Vec<f64> = of_mode.iter().map(|r| r.recognize_wall_time).collect();
                explanations.insert(mode.to_string(), MeanStd::from_values(&counts));
                time_seconds.insert(mode.to_string(), MeanStd::from_values(&times));
            }
            types.push(TypeSummary {
                session_type: ty,
                sessions: per_session.len(),
                entries: MeanStd::from_values(&entries),
                observations: MeanStd::from_values(&observations),
                compression,
                explanations,
                time_seconds,
            });
        }
        CorpusReport { types }
    }

    /// Fixed-row table, one column per session type.
    pub fn render_text(&self) -> String {
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        rows.push((
            "Sessions".to_string(),
            self.types.iter().map(|t| t.sessions.to_string()).collect(),
        ));
        rows.push((
            "Session Entries".to_string(),
            self.types.iter().map(|t| t.entries.render(1)).collect(),
        ));
        rows.push((
            "Observations".to_string(),
            self.types.iter().map(|t| t.observations.render(1)).collect(),
        ));
        for mode in [Mode::Cradle, Mode::Phatt] {
            let key = mode.as_str();
            let title = key.to_uppercase();
            if self.types.iter().all(|t| !t.explanations.contains_key(key)) {
                continue;
            }
            let cell = |m: Option<&MeanStd>, d: usize| {
                m.map(|v| v.render(d)).unwrap_or_else(|| "-".to_string())
            };
            rows.push((
                format!("{title} Explanations"),
                self.types.iter().map(|t| cell(t.explanations.get(key), 1)).collect(),
            ));
            rows.push((
                format!("{title} Time (seconds)"),
                self.types.iter().map(|t| cell(t.time_seconds.get(key), 4)).collect(),
            ));
        }

        let mut widths: Vec<usize> = self.types.iter().map(|t| t.session_type.len()).collect();
        for (_, cells) in &rows {
            for (i, c) in cells.iter().enumerate() {
                widths[i] = widths[i].max(c.len());
            }
        }
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);

        let mut out = String::new();
        out.push_str(&format!("{:label_w$}", ""));
        for (t, w) in self.types.iter().zip(&widths) {
            out.push_str(&format!("  {:>w$}", t.session_type, w = w));
        }
        out.push('\n');
        for (label, cells) in &rows {
            out.push_str(&format!("{label:label_w$}"));
            for (c, w) in cells.iter().zip(&widths) {
                out.push_str(&format!("  {c:>w$}"));
            }
            out.push('\n');
        }
        out.push('\n');
        for t in &self.types {
            out.push_str(&format!(
                "compression {}: {:.1}%\n",
                t.session_type,
                t.compression * 100.0
            ));
        }
        out
    }

    /// Wide CSV, one row per session type.
    pub fn to_csv(&self) -> String {
        let mut modes: Vec<&str> =
            self.types.iter().flat_map(|t| t.explanations.keys().map(|s| s.as_str())).collect();
        modes.sort();
        modes.dedup();
        let mut out = String::from("session_type,sessions,entries_mean,entries_std,observations_mean,observations_std,compression");
        for m in &modes {
            out.push_str(&format!(
                ",{m}_explanations_mean,{m}_explanations_std,{m}_time_mean,{m}_time_std"
            ));
        }
        out.push('\n');
        for t in &self.types {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                t.session_type,
                t.sessions,
                t.entries.mean,
                t.entries.std,
                t.observations.mean,
                t.observations.std,
                t.compression
            ));
            for m in &modes {
                match (t.explanations.get(*m), t.time_seconds.get(*m)) {
                    (Some(e), Some(s)) => out.push_str(&format!(
                        ",{:.4},{:.4},{:.6},{:.6}",
                        e.mean, e.std, s.mean, s.std
                    )),
                    _ => out.push_str(",,,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explanation::Explanation;
    use crate::library::parse_library;
    use crate::testutil::EXAMPLE;

    fn lib() -> PlanLibrary {
        parse_library(EXAMPLE).unwrap()
    }

    #[test]
    fn classify_counts_complete_and_closed() {
        let l = lib();
        let obs = ObservationSequence::from_names(&l, &["login", "addName", "addCredit"]).unwrap();
        let exps = recognize(&l, &obs, &RecognizerParams::phatt()).unwrap();
        let (total, full, closed) = classify(&exps);
        assert_eq!(total, exps.len());
        assert!(full >= 1);
        assert!(closed >= 1);
        assert!(closed <= full, "closed explanations all contain a complete plan");
    }

    #[test]
    fn classify_of_the_empty_explanation() {
        let (total, full, closed) = classify(&[Explanation::empty()]);
        assert_eq!((total, full, closed), (1, 0, 1));
    }

    #[test]
    fn mean_std_is_population_based() {
        let m = MeanStd::from_values(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((m.mean - 5.0).abs() < 1e-12);
        assert!((m.std - 2.0).abs() < 1e-12);
        let single = MeanStd::from_values(&[3.0]);
        assert_eq!(single.std, 0.0);
        assert_eq!(MeanStd::from_values(&[]).mean, 0.0);
    }

    #[test]
    fn measure_session_fills_counts() {
        let l = lib();
        let obs = ObservationSequence::from_names(
            &l,
            &["home", "login", "addName", "login", "addCredit"],
        )
        .unwrap();
        let (report, exps) =
            measure_session(&l, &obs, &RecognizerParams::phatt(), "s1", "mixed", 12).unwrap();
        assert_eq!(report.observation_count, 5);
        assert_eq!(report.raw_entry_count, 12);
        assert_eq!(report.explanation_count, exps.len());
        assert_eq!(report.exogenous_min, Some(0));
        assert!(report.recognize_wall_time >= 0.0);
        assert!((report.compression() - (1.0 - 5.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn corpus_report_groups_by_type_and_mode() {
        let mk = |id: &str, ty: &str, mode: &str, raw: usize, obs: usize, exps: usize, t: f64| {
            SessionReport {
                session_id: id.into(),
                session_type: ty.into(),
                mode: mode.into(),
                raw_entry_count: raw,
                observation_count: obs,
                explanation_count: exps,
                full_plan_count: 1,
                no_open_count: 1,
                exogenous_min: Some(0),
                recognize_wall_time: t,
            }
        };
        let reports = vec![
            mk("a", "buy", "cradle", 20, 4, 2, 0.01),
            mk("a", "buy", "phatt", 20, 4, 6, 0.02),
            mk("b", "buy", "cradle", 30, 6, 4, 0.01),
            mk("b", "buy", "phatt", 30, 6, 10, 0.03),
            mk("c", "acct", "cradle", 10, 5, 3, 0.02),
        ];
        let report = CorpusReport::from_reports(&reports);
        assert_eq!(report.types.len(), 2);
        let buy = &report.types[0];
        assert_eq!(buy.session_type, "buy");
        assert_eq!(buy.sessions, 2);
        assert!((buy.entries.mean - 25.0).abs() < 1e-12);
        assert!((buy.explanations["cradle"].mean - 3.0).abs() < 1e-12);
        assert!((buy.explanations["phatt"].mean - 8.0).abs() < 1e-12);
        assert!((buy.compression - (1.0 - 10.0 / 50.0)).abs() < 1e-12);
        assert!(!report.types[1].explanations.contains_key("phatt"));
    }

    #[test]
    fn rendered_table_has_fixed_rows_and_type_columns() {
        let reports = vec![SessionReport {
            session_id: "a".into(),
            session_type: "buy".into(),
            mode: "cradle".into(),
            raw_entry_count: 40,
            observation_count: 8,
            explanation_count: 3,
            full_plan_count: 2,
            no_open_count: 1,
            exogenous_min: Some(1),
            recognize_wall_time: 0.0123,
        }];
        let text = CorpusReport::from_reports(&reports).render_text();
        assert!(text.contains("Session Entries"));
        assert!(text.contains("Observations"));
        assert!(text.contains("CRADLE Explanations"));
        assert!(text.contains("CRADLE Time (seconds)"));
        assert!(!text.contains("PHATT Explanations"));
        assert!(text.contains("buy"));
        assert!(text.contains("compression buy: 80.0%"));
    }

    #[test]
    fn csv_round_trips_through_headers() {
        let reports = vec![SessionReport {
            session_id: "a".into(),
            session_type: "buy".into(),
            mode: "phatt".into(),
            raw_entry_count: 40,
            observation_count: 8,
            explanation_count: 3,
            full_plan_count: 2,
            no_open_count: 1,
            exogenous_min: None,
            recognize_wall_time: 0.5,
        }];
        let csv = CorpusReport::from_reports(&reports).to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("session_type,sessions,entries_mean"));
        assert!(header.contains("phatt_explanations_mean"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("buy,1,40.0000"));
    }
}
