//! planrec: validate plan libraries, recognize and predict over click-stream
//! sessions, and generate or benchmark synthetic corpora.
//!
//! Exit codes: 0 success, 2 validation failure, 3 recognition failure,
//! 4 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use planrec::explanation::{Explanation, ObservationSequence};
use planrec::filters::apply_filters;
use planrec::format::{
    explanation_to_doc, explanation_to_dot, observations_to_doc, render_explanation_text,
    ExplanationDoc, ObservationDoc,
};
use planrec::library::PlanLibrary;
use planrec::metrics::{classify, CorpusReport, SessionReport};
use planrec::preprocess::{preprocess, LandmarkMapping, SessionLog};
use planrec::recognizer::{
    predict_support, Mode, RecognizeError, RecognizerParams, RecognizerState,
};
use planrec::simulator::{generate_corpus, ground_truth_to_doc, CorpusConfig};
use planrec::{parse_library, validate_library};

#[derive(Parser)]
#[command(
    name = "planrec",
    version,
    about = "Hierarchical plan recognition over click-stream sessions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a plan library document; reports every issue found.
    Validate {
        #[arg(long, env = "PLANREC_LIBRARY")]
        library: PathBuf,
    },
    /// Preprocess a session and compute the explanation set.
    Recognize {
        #[command(flatten)]
        run: RunArgs,
        /// Session log (CSV with header, or JSON array).
        session: PathBuf,
    },
    /// Rank the terminals that could come next after a session.
    Predict {
        #[command(flatten)]
        run: RunArgs,
        session: PathBuf,
    },
    /// Generate a synthetic corpus with ground-truth sidecars.
    Simulate {
        #[arg(long, env = "PLANREC_LIBRARY")]
        library: PathBuf,
        #[arg(long, env = "PLANREC_MAPPING")]
        mapping: PathBuf,
        /// Corpus configuration (JSON).
        config: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long, env = "PLANREC_SEED")]
        seed: Option<u64>,
    },
    /// Run both recognizer modes over a corpus directory and aggregate.
    Bench {
        #[arg(long, env = "PLANREC_LIBRARY")]
        library: PathBuf,
        #[arg(long, env = "PLANREC_MAPPING")]
        mapping: PathBuf,
        /// Directory of session CSV files.
        corpus: PathBuf,
        #[arg(long, env = "PLANREC_MAX_EXOGENOUS")]
        max_exogenous: Option<usize>,
        #[arg(long, env = "PLANREC_MAX_DEPTH")]
        max_depth: Option<usize>,
        #[arg(long, env = "PLANREC_FORMAT", value_enum, default_value_t = BenchFormat::Text)]
        format: BenchFormat,
        /// Parallel workers; 0 uses all cores.
        #[arg(long, env = "PLANREC_WORKERS", default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "PLANREC_LIBRARY")]
    library: PathBuf,
    #[arg(long, env = "PLANREC_MAPPING")]
    mapping: PathBuf,
    #[arg(long, env = "PLANREC_MODE", value_enum, default_value_t = ModeArg::Cradle)]
    mode: ModeArg,
    #[arg(long, env = "PLANREC_MAX_EXOGENOUS")]
    max_exogenous: Option<usize>,
    #[arg(long, env = "PLANREC_MAX_DEPTH")]
    max_depth: Option<usize>,
    #[arg(long, env = "PLANREC_FORMAT", value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Apply filters once at the end instead of after every observation.
    #[arg(long)]
    batch_filters: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Cradle,
    Phatt,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Cradle => Mode::Cradle,
            ModeArg::Phatt => Mode::Phatt,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BenchFormat {
    Text,
    Json,
    Csv,
}

enum CliError {
    Io(String),
    Validation(String),
    Recognition(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Recognition(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Validation(m) | CliError::Recognition(m) => m,
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when the reader goes away (`planrec ... | head`), like
    // other line-oriented Unix tools, instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.message();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Validate { library } => cmd_validate(&library),
        Cmd::Recognize { run, session } => cmd_recognize(&run, &session),
        Cmd::Predict { run, session } => cmd_predict(&run, &session),
        Cmd::Simulate { library, mapping, config, out, seed } => {
            cmd_simulate(&library, &mapping, &config, &out, seed)
        }
        Cmd::Bench { library, mapping, corpus, max_exogenous, max_depth, format, workers } => {
            cmd_bench(&library, &mapping, &corpus, max_exogenous, max_depth, format, workers)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_library(path: &Path) -> Result<Arc<PlanLibrary>, CliError> {
    let text = read(path)?;
    match parse_library(&text) {
        Ok(lib) => Ok(Arc::new(lib)),
        Err(report) => {
            eprint!("{report}");
            Err(CliError::Validation(format!("{} is not a valid plan library", path.display())))
        }
    }
}

fn load_mapping(path: &Path, lib: &PlanLibrary) -> Result<LandmarkMapping, CliError> {
    let text = read(path)?;
    let mapping = LandmarkMapping::parse_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    mapping.validate(lib).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(mapping)
}

fn load_session(path: &Path) -> Result<SessionLog, CliError> {
    let text = read(path)?;
    SessionLog::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn params_from(run: &RunArgs) -> RecognizerParams {
    let mut params = RecognizerParams::for_mode(run.mode.into());
    if let Some(x) = run.max_exogenous {
        params.max_exogenous = x;
    }
    if let Some(d) = run.max_depth {
        params.max_depth = d;
    }
    if run.batch_filters {
        params.filter_config.apply_each_step = false;
    }
    params
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "session".into())
}

/// "buy-017" → "buy"; anything without a numeric suffix is its own type.
fn type_of(stem: &str) -> String {
    match stem.rsplit_once('-') {
        Some((ty, idx)) if !ty.is_empty() && idx.chars().all(|c| c.is_ascii_digit()) => {
            ty.to_string()
        }
        _ => stem.to_string(),
    }
}

fn cmd_validate(library: &Path) -> Result<(), CliError> {
    let text = read(library)?;
    let report = validate_library(&text);
    if report.errors.is_empty() {
        for w in &report.warnings {
            eprintln!("warning[{}] at {}: {}", w.code, w.location, w.message);
        }
        println!("ok: {} is a valid plan library", library.display());
        Ok(())
    } else {
        eprint!("{report}");
        Err(CliError::Validation(String::new()))
    }
}

/// Feed the preprocessed observations one at a time so the last consistent
/// candidate set survives an unexplainable observation.
fn observe_all(
    lib: Arc<PlanLibrary>,
    obs: &ObservationSequence,
    params: RecognizerParams,
) -> (RecognizerState, Option<RecognizeError>) {
    let mut state = RecognizerState::init(lib, params).expect("params checked by clap defaults");
    for item in obs.items() {
        match state.observe(item.terminal, item.source) {
            Ok(next) => state = next,
            Err(e) => return (state, Some(e)),
        }
    }
    (state, None)
}

/// Candidates as the run's mode defines them: a batch-filter run applies the
/// filters once here, after the last observation.
fn final_candidates(state: &RecognizerState) -> Vec<Explanation> {
    let params = state.params();
    let mut out = state.candidates().to_vec();
    if params.filters_enabled && !params.filter_config.apply_each_step {
        out = apply_filters(&out, &params.filter_config);
        out.sort_by_cached_key(Explanation::preference_key);
    }
    out
}

#[derive(serde::Serialize)]
struct RecognizeOutput {
    report: SessionReport,
    observations: Vec<ObservationDoc>,
    explanations: Vec<ExplanationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

fn render_explanations(
    out: &RecognizeOutput,
    exps: &[Explanation],
    lib: &PlanLibrary,
    format: FormatArg,
) -> Result<(), CliError> {
    match format {
        FormatArg::Text => {
            let r = &out.report;
            println!(
                "session {} [{}]: {} entries -> {} observations; {} explanations ({} with a complete plan, {} fully closed) in {:.4}s",
                r.session_id,
                r.mode,
                r.raw_entry_count,
                r.observation_count,
                r.explanation_count,
                r.full_plan_count,
                r.no_open_count,
                r.recognize_wall_time,
            );
            for (i, e) in exps.iter().enumerate() {
                println!("--- explanation {} ---", i + 1);
                print!("{}", render_explanation_text(e, lib));
            }
        }
        FormatArg::Json => {
            let text = serde_json::to_string_pretty(out)
                .map_err(|e| CliError::Io(format!("serialize: {e}")))?;
            println!("{text}");
        }
        FormatArg::Dot => {
            if let Some(best) = exps.first() {
                if exps.len() > 1 {
                    eprintln!("note: rendering the best of {} explanations", exps.len());
                }
                print!("{}", explanation_to_dot(best, lib));
            }
        }
    }
    Ok(())
}

fn cmd_recognize(run: &RunArgs, session: &Path) -> Result<(), CliError> {
    let lib = load_library(&run.library)?;
    let mapping = load_mapping(&run.mapping, &lib)?;
    let log = load_session(session)?;
    let obs = preprocess(&log, &mapping, &lib)
        .map_err(|e| CliError::Validation(format!("{}: {e}", session.display())))?;
    let params = params_from(run);
    let stem = stem_of(session);

    let start = Instant::now();
    let (state, err) = observe_all(lib.clone(), &obs, params);
    let elapsed = start.elapsed().as_secs_f64();

    let warning = err.as_ref().map(|e| {
        eprintln!("warning: {e}; rendering the last consistent candidate set");
        e.to_string()
    });
    let candidates = final_candidates(&state);
    let (total, full, closed) = classify(&candidates);
    let report = SessionReport {
        session_id: stem.clone(),
        session_type: type_of(&stem),
        mode: state.params().mode().as_str().to_string(),
        raw_entry_count: log.len(),
        observation_count: obs.len(),
        explanation_count: total,
        full_plan_count: full,
        no_open_count: closed,
        exogenous_min: candidates.iter().map(|e| e.stats().num_exogenous).min(),
        recognize_wall_time: elapsed,
    };
    let out = RecognizeOutput {
        report,
        observations: observations_to_doc(&obs, &lib),
        explanations: candidates.iter().map(|e| explanation_to_doc(e, &lib)).collect(),
        warning,
    };
    render_explanations(&out, &candidates, &lib, run.format)?;
    match err {
        None => Ok(()),
        Some(e) => Err(CliError::Recognition(e.to_string())),
    }
}

fn cmd_predict(run: &RunArgs, session: &Path) -> Result<(), CliError> {
    let lib = load_library(&run.library)?;
    let mapping = load_mapping(&run.mapping, &lib)?;
    let log = load_session(session)?;
    let obs = preprocess(&log, &mapping, &lib)
        .map_err(|e| CliError::Validation(format!("{}: {e}", session.display())))?;
    let (state, err) = observe_all(lib.clone(), &obs, params_from(run));
    if let Some(e) = err {
        return Err(CliError::Recognition(e.to_string()));
    }

    let support = predict_support(&final_candidates(&state), &lib, state.params().max_depth);
    let mut ranked: Vec<(String, usize)> =
        support.into_iter().map(|(t, n)| (lib.name(t).to_string(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    match run.format {
        FormatArg::Json => {
            #[derive(serde::Serialize)]
            struct Prediction {
                terminal: String,
                support: usize,
            }
            let docs: Vec<Prediction> = ranked
                .into_iter()
                .map(|(terminal, support)| Prediction { terminal, support })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&docs)
                    .map_err(|e| CliError::Io(format!("serialize: {e}")))?
            );
        }
        _ => {
            for (name, n) in ranked {
                println!("{name}\t{n}");
            }
        }
    }
    Ok(())
}

fn cmd_simulate(
    library: &Path,
    mapping_path: &Path,
    config: &Path,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let lib = load_library(library)?;
    let mapping = load_mapping(mapping_path, &lib)?;
    let mut cfg = CorpusConfig::parse_json(&read(config)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sessions =
        generate_corpus(&lib, &cfg, &mapping).map_err(|e| CliError::Validation(e.to_string()))?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    for s in &sessions {
        let base = format!("{}-{:03}", s.session_type, s.index);
        let csv_path = out.join(format!("{base}.csv"));
        fs::write(&csv_path, s.log.to_csv())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", csv_path.display())))?;
        let doc = ground_truth_to_doc(&s.truth, &s.session_type, &lib);
        let truth_path = out.join(format!("{base}.truth.json"));
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| CliError::Io(format!("serialize: {e}")))?;
        fs::write(&truth_path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", truth_path.display())))?;
    }
    println!("wrote {} sessions to {}", sessions.len(), out.display());
    Ok(())
}

fn cmd_bench(
    library: &Path,
    mapping_path: &Path,
    corpus: &Path,
    max_exogenous: Option<usize>,
    max_depth: Option<usize>,
    format: BenchFormat,
    workers: usize,
) -> Result<(), CliError> {
    let lib = load_library(library)?;
    let mapping = load_mapping(mapping_path, &lib)?;

    let mut files: Vec<PathBuf> = fs::read_dir(corpus)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", corpus.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Io(format!("no session CSV files in {}", corpus.display())));
    }

    let mut params_by_mode = Vec::new();
    for mode in [Mode::Cradle, Mode::Phatt] {
        let mut params = RecognizerParams::for_mode(mode);
        if let Some(x) = max_exogenous {
            params.max_exogenous = x;
        }
        if let Some(d) = max_depth {
            params.max_depth = d;
        }
        params_by_mode.push(params);
    }

    let bench_one = |path: &PathBuf| -> Result<Vec<SessionReport>, CliError> {
        let log = load_session(path)?;
        let obs = preprocess(&log, &mapping, &lib)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let stem = stem_of(path);
        let ty = type_of(&stem);
        let mut reports = Vec::new();
        for params in &params_by_mode {
            let start = Instant::now();
            let (state, err) = observe_all(lib.clone(), &obs, params.clone());
            let elapsed = start.elapsed().as_secs_f64();
            // An unexplainable observation in one mode still yields a row:
            // zero explanations, so the run is visible in the aggregates.
            let candidates = if err.is_some() { Vec::new() } else { final_candidates(&state) };
            let (total, full, closed) = classify(&candidates);
            reports.push(SessionReport {
                session_id: stem.clone(),
                session_type: ty.clone(),
                mode: params.mode().as_str().to_string(),
                raw_entry_count: log.len(),
                observation_count: obs.len(),
                explanation_count: total,
                full_plan_count: full,
                no_open_count: closed,
                exogenous_min: candidates.iter().map(|e| e.stats().num_exogenous).min(),
                recognize_wall_time: elapsed,
            });
        }
        Ok(reports)
    };

    let results: Vec<Result<Vec<SessionReport>, CliError>> = if workers == 1 {
        files.iter().map(bench_one).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
        pool.install(|| files.par_iter().map(bench_one).collect())
    };

    let mut reports = Vec::new();
    for r in results {
        reports.extend(r?);
    }
    let corpus_report = CorpusReport::from_reports(&reports);
    match format {
        BenchFormat::Text => print!("{}", corpus_report.render_text()),
        BenchFormat::Json => println!(
            "{}",
            serde_json::to_string_pretty(&corpus_report)
                .map_err(|e| CliError::Io(format!("serialize: {e}")))?
        ),
        BenchFormat::Csv => print!("{}", corpus_report.to_csv()),
    }
    Ok(())
}
