//! Benchmark harness: every strategy on every corpus program, tabulated.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frontend::{self, Loaded};
use crate::synthesis::{self, Options, Strategy, SynthError};

/// One corpus entry: a program and its optional annotation file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Benchmark {
    /// File stem, e.g. `cousot9_pl`.
    pub name: String,
    /// Stem without the mutation suffix.
    pub model: String,
    pub program: PathBuf,
    pub inv: Option<PathBuf>,
}

const SUFFIXES: [&str; 2] = ["_pl_pa", "_pl"];

fn model_of(stem: &str) -> &str {
    SUFFIXES
        .iter()
        .find_map(|s| stem.strip_suffix(s))
        .unwrap_or(stem)
}

fn variant_rank(stem: &str) -> usize {
    match SUFFIXES.iter().position(|s| stem.ends_with(s)) {
        Some(0) => 2,
        Some(_) => 1,
        None => 0,
    }
}

/// The `.pp` files of `dir` with their `.inv` companions, grouped by model
/// with the base program first.
pub fn discover(dir: &Path) -> std::io::Result<Vec<Benchmark>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pp") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let inv = path.with_extension("inv");
        out.push(Benchmark {
            name: stem.to_string(),
            model: model_of(stem).to_string(),
            inv: inv.exists().then_some(inv),
            program: path.clone(),
        });
    }
    out.sort_by(|a, b| (&a.model, variant_rank(&a.name)).cmp(&(&b.model, variant_rank(&b.name))));
    Ok(out)
}

/// Result of one strategy on one program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Success {
        dimension: usize,
        certificate_ok: bool,
    },
    Failure,
    Unsupported,
    InvalidInvariant,
    Timeout,
    InputError {
        message: String,
    },
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success { .. })
    }

    /// A definite negative answer, as opposed to a timeout or bad input.
    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::Failure | Outcome::Unsupported)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Success {
                dimension,
                certificate_ok: true,
            } => write!(f, "{dimension}"),
            Outcome::Success {
                dimension,
                certificate_ok: false,
            } => write!(f, "{dimension}!"),
            Outcome::Failure => f.write_str("×"),
            Outcome::Unsupported => f.write_str("N/A"),
            Outcome::InvalidInvariant => f.write_str("INV"),
            Outcome::Timeout => f.write_str("T/O"),
            Outcome::InputError { .. } => f.write_str("ERR"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub strategy: Strategy,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub name: String,
    pub model: String,
    pub prob_loops: bool,
    pub prob_assignments: bool,
    /// In [`Strategy::ALL`] order.
    pub cells: Vec<Cell>,
    pub wall_secs: f64,
}

impl BenchResult {
    pub fn outcome(&self, s: Strategy) -> &Outcome {
        &self
            .cells
            .iter()
            .find(|c| c.strategy == s)
            .expect("every strategy is run")
            .outcome
    }
}

/// Run one strategy with a time limit, checking any certificate it returns.
pub fn run_cell(loaded: &Loaded, strategy: Strategy, timeout: Duration) -> Cell {
    let started = Instant::now();
    let mut opts = Options::new(strategy);
    opts.deadline = Some(started + timeout);
    let outcome = match synthesis::synthesize(&loaded.pcfg, &loaded.inv, &opts) {
        Ok(s) => {
            let certificate_ok = synthesis::verify(&loaded.pcfg, &loaded.inv, &s, &opts).is_ok();
            Outcome::Success {
                dimension: s.dimension(),
                certificate_ok,
            }
        }
        Err(SynthError::NoProgress { .. } | SynthError::MaxDim { .. }) => Outcome::Failure,
        Err(SynthError::Unsupported(_)) => Outcome::Unsupported,
        Err(SynthError::InvariantNotInductive(_)) => Outcome::InvalidInvariant,
        Err(SynthError::Timeout) => Outcome::Timeout,
        Err(e @ SynthError::Pcfg(_)) => Outcome::InputError {
            message: e.to_string(),
        },
    };
    Cell {
        strategy,
        outcome,
        secs: started.elapsed().as_secs_f64(),
    }
}

/// Worker count from `LEXRSM_THREADS`, defaulting to the available cores.
pub fn thread_count() -> usize {
    std::env::var("LEXRSM_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run every strategy on every benchmark in a pool of `threads` workers.
/// Rows come back in corpus order.
pub fn run_all(benches: &[Benchmark], timeout: Duration, threads: usize) -> Vec<BenchResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| {
        benches
            .par_iter()
            .map(|b| {
                let started = Instant::now();
                let row = |cells, pl, pa| BenchResult {
                    name: b.name.clone(),
                    model: b.model.clone(),
                    prob_loops: pl,
                    prob_assignments: pa,
                    cells,
                    wall_secs: started.elapsed().as_secs_f64(),
                };
                match frontend::load(&b.program, b.inv.as_deref()) {
                    Ok(ld) => {
                        let cells = Strategy::ALL
                            .par_iter()
                            .map(|&s| run_cell(&ld, s, timeout))
                            .collect();
                        row(cells, ld.pcfg.has_prob_branching(), ld.pcfg.has_sampling())
                    }
                    Err(e) => {
                        let outcome = Outcome::InputError {
                            message: e.to_string(),
                        };
                        let cells = Strategy::ALL
                            .iter()
                            .map(|&s| Cell {
                                strategy: s,
                                outcome: outcome.clone(),
                                secs: 0.0,
                            })
                            .collect();
                        row(cells, false, false)
                    }
                }
            })
            .collect()
    })
}

fn tick(b: bool) -> &'static str {
    if b {
        "√"
    } else {
        "-"
    }
}

/// Markdown table with aggregate success counts. Timings are left out so the
/// output is stable across runs.
pub fn render_markdown(results: &[BenchResult]) -> String {
    let mut out = String::from(
        "| Model | p.l. | p.a. | STR | LWN | SMC | EMC |\n|---|---|---|---|---|---|---|\n",
    );
    for r in results {
        let cells: Vec<String> = r.cells.iter().map(|c| c.outcome.to_string()).collect();
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            r.model,
            tick(r.prob_loops),
            tick(r.prob_assignments),
            cells.join(" | ")
        ));
    }
    out.push('\n');
    out.push_str(&format!("{}\n", summary(results)));
    out
}

pub fn render_csv(results: &[BenchResult]) -> String {
    let mut out = String::from("name,model,pl,pa,STR,LWN,SMC,EMC\n");
    for r in results {
        let cells: Vec<String> = r.cells.iter().map(|c| c.outcome.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.name,
            r.model,
            u8::from(r.prob_loops),
            u8::from(r.prob_assignments),
            cells.join(",")
        ));
    }
    out
}

/// `successes: STR a/n, LWN b/n, ...`
pub fn summary(results: &[BenchResult]) -> String {
    let counts: Vec<String> = Strategy::ALL
        .iter()
        .map(|&s| {
            format!(
                "{} {}/{}",
                s.name(),
                results.iter().filter(|r| r.outcome(s).is_success()).count(),
                results.len()
            )
        })
        .collect();
    format!("successes: {}", counts.join(", "))
}

/// A row where a stronger strategy succeeds and the next weaker one does not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityBreak {
    pub name: String,
    pub stronger: Strategy,
    pub weaker: Strategy,
    /// The weaker strategy timed out rather than failing.
    pub unresolved: bool,
}

/// Check success(STR) ⇒ success(LWN) ⇒ success(SMC) ⇒ success(EMC).
pub fn monotonicity_audit(results: &[BenchResult]) -> Vec<MonotonicityBreak> {
    let mut out = Vec::new();
    for r in results {
        for w in Strategy::ALL.windows(2) {
            let (a, b) = (r.outcome(w[0]), r.outcome(w[1]));
            if a.is_success() && !b.is_success() {
                out.push(MonotonicityBreak {
                    name: r.name.clone(),
                    stronger: w[0],
                    weaker: w[1],
                    unresolved: matches!(b, Outcome::Timeout),
                });
            }
        }
    }
    out
}

/// A published cell: success with a dimension, or failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Dim(usize),
    Fail,
    NotApplicable,
}

impl std::str::FromStr for Expected {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "x" | "×" => Ok(Expected::Fail),
            "N/A" | "n/a" => Ok(Expected::NotApplicable),
            d => d
                .parse()
                .map(Expected::Dim)
                .map_err(|_| format!("bad expected cell {d}")),
        }
    }
}

/// One expected row: benchmark name and a cell per strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedRow {
    pub name: String,
    pub cells: [Expected; 4],
}

/// Parse `name,STR,LWN,SMC,EMC` lines; `#` starts a comment.
pub fn parse_expected(src: &str) -> Result<Vec<ExpectedRow>, String> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with("name,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(format!("line {}: expected 5 fields", i + 1));
        }
        let cell = |s: &str| {
            s.parse::<Expected>()
                .map_err(|e| format!("line {}: {e}", i + 1))
        };
        out.push(ExpectedRow {
            name: f[0].to_string(),
            cells: [cell(f[1])?, cell(f[2])?, cell(f[3])?, cell(f[4])?],
        });
    }
    Ok(out)
}

/// Whether `got` matches `want`: same success pattern, dimension within
/// `tolerance`.
pub fn cell_matches(want: Expected, got: &Outcome, tolerance: usize) -> bool {
    match (want, got) {
        (
            Expected::Dim(d),
            Outcome::Success {
                dimension,
                certificate_ok: true,
            },
        ) => dimension.abs_diff(d) <= tolerance,
        (Expected::Fail, Outcome::Failure) => true,
        (Expected::NotApplicable, Outcome::Unsupported) => true,
        _ => false,
    }
}

/// Rows of `results` that disagree with `expected`, as readable lines.
pub fn compare(results: &[BenchResult], expected: &[ExpectedRow], tolerance: usize) -> Vec<String> {
    let mut out = Vec::new();
    for e in expected {
        let Some(r) = results.iter().find(|r| r.name == e.name) else {
            out.push(format!("{}: not run", e.name));
            continue;
        };
        for (s, want) in Strategy::ALL.iter().zip(e.cells) {
            let got = r.outcome(*s);
            if !cell_matches(want, got, tolerance) {
                out.push(format!(
                    "{} {}: expected {:?}, got {}",
                    e.name,
                    s.name(),
                    want,
                    got
                ));
            }
        }
    }
    out
}
