//! `lexrsm`: synthesis, checking, benchmarking, simulation and the
//! fixability lab from the command line.
//!
//! Exit codes: 0 success, 1 negative verdict, 2 bad input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use lexrsm::bench;
use lexrsm::checker::{self, Flavor};
use lexrsm::fixlab::{self, FiniteInstance, Kind, Shape};
use lexrsm::frontend::{self, mutate, Loaded};
use lexrsm::simulator::{self, PolicyTable, Scheduler};
use lexrsm::synthesis::{self, Certificate, Options, Strategy, SynthError};
use lexrsm::Rational;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "lexrsm",
    version,
    about = "Lexicographic ranking supermartingales for probabilistic programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize a certificate of almost-sure termination.
    Synth(SynthArgs),
    /// Check a certificate against a program.
    Check(CheckArgs),
    /// Run every strategy over a corpus directory.
    Bench(BenchArgs),
    /// Monte-Carlo termination frequency.
    Simulate(SimArgs),
    /// Evaluate fixability of a finite instance.
    Fixlab(FixArgs),
    /// Write a finite instance (a fixed counterexample or a random one) as JSON.
    Instance(InstanceArgs),
    /// Apply a probabilistic mutation to a program.
    Mutate(MutateArgs),
}

#[derive(Args)]
struct SynthArgs {
    program: PathBuf,
    inv: Option<PathBuf>,
    #[arg(long, default_value = "smc")]
    method: Strategy,
    #[arg(long, default_value_t = 16)]
    max_dim: usize,
    #[arg(long, default_value = "1")]
    c: Rational,
    /// Seconds before giving up.
    #[arg(long)]
    timeout: Option<f64>,
    /// Skip the invariant inductiveness audit.
    #[arg(long)]
    force_invariants: bool,
    /// Write the certificate here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    program: PathBuf,
    /// `[INV] CERT`: optional annotation file, then the certificate.
    #[arg(num_args = 1..=2, required = true)]
    files: Vec<PathBuf>,
    /// Defaults to the flavor matching the certificate's strategy.
    #[arg(long)]
    flavor: Option<Flavor>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    /// Seconds per cell.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Table file; `.csv` and `.json` select those formats, anything else markdown.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Expected rows (`name,STR,LWN,SMC,EMC`) to compare against.
    #[arg(long)]
    expected: Option<PathBuf>,
    /// Allowed dimension difference against the expected rows.
    #[arg(long, default_value_t = 1)]
    tolerance: usize,
}

#[derive(Args)]
struct SimArgs {
    program: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    #[arg(long, default_value_t = 10_000)]
    max_steps: u64,
    /// `first`, `uniform`, or a JSON policy table file.
    #[arg(long, default_value = "first")]
    scheduler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial values as `x=1,y=-2`; unlisted variables start at 0.
    #[arg(long, default_value = "")]
    init: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FixArgs {
    instance: PathBuf,
    #[arg(long, default_value = "1")]
    eps: Rational,
    #[arg(long)]
    gamma: Option<Rational>,
    /// Also check the instance itself against this flavor.
    #[arg(long)]
    flavor: Option<fixlab::Flavor>,
}

#[derive(Args)]
struct InstanceArgs {
    /// `fig3`, `fig4`, `glex`, `sc` or `lw`.
    kind: String,
    #[arg(long, default_value_t = 8)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MutateArgs {
    program: PathBuf,
    /// `pl` (probabilistic loops) or `pl-pa` (also assignments).
    #[arg(long, default_value = "pl")]
    mode: mutate::Mode,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying its exit code.
struct Fail(u8, String);

fn input<E: std::fmt::Display>(e: E) -> Fail {
    Fail(2, e.to_string())
}

type Res = Result<ExitCode, Fail>;

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail(2, format!("{}: {e}", path.display())))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Fail> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Fail(2, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(program: &Path, inv: Option<&Path>) -> Result<Loaded, Fail> {
    frontend::load(program, inv).map_err(input)
}

fn synth(a: SynthArgs) -> Res {
    let ld = load(&a.program, a.inv.as_deref())?;
    let started = Instant::now();
    let mut opts = Options::new(a.method);
    opts.c = a.c.clone();
    opts.max_dim = a.max_dim;
    opts.force_invariants = a.force_invariants;
    opts.deadline = a.timeout.map(|s| started + Duration::from_secs_f64(s));
    match synthesis::synthesize(&ld.pcfg, &ld.inv, &opts) {
        Ok(s) => {
            let cert = Certificate::new(
                &ld.pcfg,
                &s,
                a.method,
                &a.c,
                started.elapsed().as_secs_f64(),
            );
            let text = serde_json::to_string_pretty(&cert).expect("certificate serializes") + "\n";
            write_or_print(a.out.as_deref(), &text)?;
            eprintln!("{}: dimension {}", a.method.name(), s.dimension());
            Ok(ExitCode::SUCCESS)
        }
        Err(SynthError::NoProgress { unranked, .. } | SynthError::MaxDim { unranked }) => {
            let names: Vec<String> = unranked
                .iter()
                .map(|&t| ld.pcfg.describe(&ld.pcfg.transitions[t]))
                .collect();
            println!("{}: failed; unranked transitions:", a.method.name());
            for n in names {
                println!("  {n}");
            }
            Ok(ExitCode::from(1))
        }
        Err(SynthError::InvariantNotInductive(r)) => {
            print!("invariants are not inductive\n{}", r.render(&ld.pcfg));
            Ok(ExitCode::from(2))
        }
        Err(e @ SynthError::Timeout) => {
            println!("{}: {e}", a.method.name());
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(input(e)),
    }
}

fn check(a: CheckArgs) -> Res {
    let (inv, cert) = match a.files.as_slice() {
        [cert] => (None, cert),
        [inv, cert] => (Some(inv.as_path()), cert),
        _ => unreachable!("clap bounds the count"),
    };
    let ld = load(&a.program, inv)?;
    let cert: Certificate = serde_json::from_str(&read(cert)?).map_err(input)?;
    let (eta, lv) = cert.to_maps(&ld.pcfg).map_err(input)?;
    let flavor = a.flavor.unwrap_or(cert.strategy.flavor());
    let report =
        checker::check_certificate(&ld.pcfg, &ld.inv, &eta, &lv, &cert.c, flavor).map_err(input)?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(
                &json!({ "flavor": flavor, "verdict": report.verdict(), "report": report })
            )
            .expect("json")
        );
    } else {
        println!("{flavor:?}: {:?}", report.verdict());
        print!("{}", report.render(&ld.pcfg));
    }
    Ok(if report.is_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn bench_cmd(a: BenchArgs) -> Res {
    let benches =
        bench::discover(&a.corpus).map_err(|e| Fail(2, format!("{}: {e}", a.corpus.display())))?;
    if benches.is_empty() {
        return Err(Fail(2, format!("no .pp files in {}", a.corpus.display())));
    }
    let results = bench::run_all(
        &benches,
        Duration::from_secs_f64(a.timeout),
        bench::thread_count(),
    );
    let ext = a
        .out
        .as_ref()
        .and_then(|p| p.extension())
        .and_then(|e| e.to_str())
        .unwrap_or("md");
    let text = match ext {
        "csv" => bench::render_csv(&results),
        "json" => serde_json::to_string_pretty(&results).expect("json") + "\n",
        _ => bench::render_markdown(&results),
    };
    write_or_print(a.out.as_deref(), &text)?;
    if a.out.is_some() {
        eprintln!("{}", bench::summary(&results));
    }
    let mut bad = false;
    for b in bench::monotonicity_audit(&results) {
        let kind = if b.unresolved {
            "unresolved (timeout)"
        } else {
            "violated"
        };
        eprintln!(
            "monotonicity {kind}: {} {} succeeds, {} does not",
            b.name,
            b.stronger.name(),
            b.weaker.name()
        );
        bad |= !b.unresolved;
    }
    for r in &results {
        for c in &r.cells {
            if let bench::Outcome::Success {
                certificate_ok: false,
                ..
            } = c.outcome
            {
                eprintln!("round trip failed: {} {}", r.name, c.strategy.name());
                bad = true;
            }
        }
    }
    if let Some(p) = &a.expected {
        let rows = bench::parse_expected(&read(p)?).map_err(input)?;
        let diffs = bench::compare(&results, &rows, a.tolerance);
        for d in &diffs {
            eprintln!("expected mismatch: {d}");
        }
        bad |= !diffs.is_empty();
    }
    Ok(if bad {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn parse_init(spec: &str, vars: &[String]) -> Result<Vec<f64>, Fail> {
    let mut init = vec![0.0; vars.len()];
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Fail(2, format!("bad --init entry {part}")))?;
        let i = vars
            .iter()
            .position(|v| v == name.trim())
            .ok_or_else(|| Fail(2, format!("unknown variable {name}")))?;
        init[i] = value
            .trim()
            .parse()
            .map_err(|_| Fail(2, format!("bad value in {part}")))?;
    }
    Ok(init)
}

fn simulate(a: SimArgs) -> Res {
    let ld = load(&a.program, None)?;
    let scheduler = match a.scheduler.as_str() {
        "first" => Scheduler::FirstEnabled,
        "uniform" => Scheduler::UniformRandom(a.seed),
        path => Scheduler::PolicyTable(
            serde_json::from_str::<PolicyTable>(&read(Path::new(path))?).map_err(input)?,
        ),
    };
    let init = parse_init(&a.init, &ld.pcfg.vars)?;
    let stats =
        simulator::estimate_termination(&ld.pcfg, &scheduler, &init, a.runs, a.max_steps, a.seed)
            .map_err(input)?;
    if a.json {
        let note = "simulation can refute almost-sure termination under the schedulers run, never confirm it";
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "stats": stats, "note": note })).expect("json")
        );
    } else {
        print!("{}", stats.render());
    }
    Ok(ExitCode::SUCCESS)
}

fn fixlab_cmd(a: FixArgs) -> Res {
    let inst: FiniteInstance = serde_json::from_str(&read(&a.instance)?).map_err(input)?;
    inst.validate().map_err(input)?;
    let fixable = fixlab::is_eps_fixable(&inst, &a.eps);
    let mut report = json!({
        "eps": a.eps.to_string(),
        "eps_fixable": fixable,
        "failures": fixlab::check_flavor(&fixlab::eps_fix(&inst, &a.eps), &fixlab::Flavor::Un(-a.eps.clone())).failures().collect::<Vec<_>>(),
    });
    let mut verdict = if fixable {
        "ε-fixable"
    } else {
        "not ε-fixable"
    };
    if let Some(g) = &a.gamma {
        let v = fixlab::eps_gamma_verdict(&inst, &a.eps, g);
        report["gamma"] = json!(g.to_string());
        report["eps_gamma_fixable"] = json!(v.ok);
        report["waived"] = json!(v.outcomes.iter().filter(|o| o.waived).count());
        verdict = if v.ok {
            "(ε,γ)-fixable"
        } else {
            "not (ε,γ)-fixable"
        };
    }
    if let Some(f) = &a.flavor {
        let v = fixlab::check_flavor(&inst, f);
        report["flavor"] = json!({ "name": f.to_string(), "ok": v.ok, "failures": v.failures().collect::<Vec<_>>() });
    }
    report["verdict"] = json!(verdict);
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(ExitCode::SUCCESS)
}

fn instance(a: InstanceArgs) -> Res {
    let inst = match a.kind.as_str() {
        "fig3" => fixlab::fig3_instance(a.horizon),
        "fig4" => fixlab::fig4_instance(a.horizon),
        k => {
            let kind: Kind = k.parse().map_err(input)?;
            let shape = Shape {
                dim: a.dim,
                horizon: a.horizon,
                ..Shape::default()
            };
            fixlab::random_instance(kind, a.seed, shape).instance
        }
    };
    write_or_print(
        a.out.as_deref(),
        &(serde_json::to_string_pretty(&inst).expect("json") + "\n"),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn mutate_cmd(a: MutateArgs) -> Res {
    let out = mutate::mutate_source(&read(&a.program)?, a.mode).map_err(input)?;
    write_or_print(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Check(a) => check(a),
        Cmd::Bench(a) => bench_cmd(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Fixlab(a) => fixlab_cmd(a),
        Cmd::Instance(a) => instance(a),
        Cmd::Mutate(a) => mutate_cmd(a),
    };
    r.unwrap_or_else(|Fail(code, msg)| {
        eprintln!("error: {msg}");
        ExitCode::from(code)
    })
}
