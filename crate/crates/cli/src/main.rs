//! `robustz`: robust matched-pair Z-tests from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 the matching rules
//! admit no pair, 3 the requested number of pairs cannot be matched.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use robustz_core::export::{export_ilp, export_qip};
use robustz_core::orchestrator::Feasibility;
use robustz_core::statistic::ext_real;
use robustz_core::{
    build_effect_matrix, build_match_matrix, enumerate_extrema, load_config, load_dataset,
    partition_blocks, Case, Dataset, Direction, EffectMatrix, MatchMatrix, NSpec, RunConfig,
    SolveError, Solver, SweepEntry,
};
use serde_json::{json, Value};

/// Version of the JSON report layout. Bump on any breaking change.
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "robustz",
    version,
    about = "Robust Z-tests over matched-pair assignments"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the data, build the eligible pairs and report their structure.
    Match {
        /// Write the effect matrix as `i,j,effect` lines.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Bound Z at one `n` and classify the test.
    Test {
        #[arg(long, value_parser = pair_count)]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// One CSV row per `n`; or the largest solvable `n` with `--binary-search`.
    Sweep {
        /// `N_MIN:N_MAX[:STEP]`, overriding the configuration.
        #[arg(long, value_parser = parse_range)]
        sweep: Option<(usize, usize, usize)>,
        #[arg(long)]
        binary_search: bool,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Exact extrema by enumeration (small instances only).
    Oracle {
        #[arg(long, value_parser = pair_count)]
        n: Option<usize>,
        #[arg(long)]
        oracle_budget: Option<u64>,
    },
    /// Write a CPLEX-LP model and its JSON sidecar. Requires `--out`.
    Export {
        #[arg(long, value_parser = pair_count)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value = "qip")]
        kind: Kind,
        #[arg(long, value_enum, default_value = "min")]
        direction: Dir,
        /// Quadratic case, 1 or 2 (qip only).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2), default_value = "1")]
        case: u8,
        /// Variance bound (ilp only).
        #[arg(long)]
        b_l: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Qip,
    Ilp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Min,
    Max,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Min => Direction::Min,
            Dir::Max => Direction::Max,
        }
    }
}

fn pair_count(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 2 {
        return Err(format!("n must be at least 2 (got {n})"));
    }
    Ok(n)
}

fn parse_range(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}"));
    let (lo, hi, step) = match parts.as_slice() {
        [a, b] => (num(a)?, num(b)?, 1),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err("expected N_MIN:N_MAX[:STEP]".into()),
    };
    if lo < 2 || lo > hi || step == 0 {
        return Err(format!("invalid range {lo}:{hi}:{step}"));
    }
    Ok((lo, hi, step))
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::EmptyEligibility => 2,
            SolveError::NoPairsPossible(_) | SolveError::NoAssignment(_) => 3,
            _ => 1,
        };
        let message = match e {
            SolveError::EmptyEligibility => "no good matches".to_string(),
            e => e.to_string(),
        };
        Self { code, message }
    }
}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::usage(e.to_string())
            }
        }
    )*};
}
usage_from!(
    robustz_core::DataError,
    robustz_core::MatchError,
    io::Error,
    serde_json::Error
);

struct Loaded {
    config: RunConfig,
    dataset: Dataset,
    matches: MatchMatrix,
    delta: EffectMatrix,
    load_ms: f64,
}

fn load(config: Option<&Path>) -> Result<Loaded, Failure> {
    let path = config.ok_or_else(|| Failure::usage("--config is required"))?;
    let start = Instant::now();
    let config = load_config(path)?;
    let dataset = load_dataset(&config.data_path, &config)?;
    let matches = build_match_matrix(&dataset, &config.covariate_rules)?;
    let delta = build_effect_matrix(&matches, &dataset)?;
    Ok(Loaded {
        config,
        dataset,
        matches,
        delta,
        load_ms: ms(start),
    })
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn alpha_or(cli: Option<f64>, config: &RunConfig) -> Result<f64, Failure> {
    let alpha = cli.unwrap_or(config.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::usage(format!(
            "alpha must lie in (0, 1) (got {alpha})"
        )));
    }
    Ok(alpha)
}

fn n_or(cli: Option<usize>, config: &RunConfig) -> Result<usize, Failure> {
    match (cli, config.n_spec) {
        (Some(n), _) | (None, NSpec::Fixed(n)) => Ok(n),
        _ => Err(Failure::usage(
            "--n is required unless the configuration fixes n",
        )),
    }
}

fn envelope(command: &str, body: Value) -> Value {
    let mut report = json!({ "schema_version": SCHEMA_VERSION, "command": command });
    if let (Value::Object(head), Value::Object(rest)) = (&mut report, body) {
        head.extend(rest);
    }
    report
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(out: Option<&Path>, report: &Value) -> Result<(), Failure> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_match(cli: &Cli, dump: Option<&Path>) -> Result<(), Failure> {
    let l = load(cli.config.as_deref())?;
    if let Some(path) = dump {
        let mut w = BufWriter::new(File::create(path)?);
        l.delta.write_coordinate_list(&mut w)?;
        w.flush()?;
    }
    let blocks = partition_blocks(&l.matches);
    let report = envelope(
        "match",
        json!({
            "treated": l.dataset.n_treated(),
            "control": l.dataset.n_control(),
            "excluded": l.dataset.excluded,
            "active_treated": l.matches.active_treated(),
            "active_control": l.matches.active_control(),
            "nnz": l.matches.nnz(),
            "blocks": blocks.len(),
            "identical_rows": blocks.identical_rows(),
            "timing_ms": { "load": l.load_ms },
        }),
    );
    emit_json(cli.out.as_deref(), &report)?;
    if l.matches.is_empty() {
        return Err(SolveError::EmptyEligibility.into());
    }
    Ok(())
}

fn cmd_test(cli: &Cli, n: Option<usize>, alpha: Option<f64>) -> Result<(), Failure> {
    let l = load(cli.config.as_deref())?;
    let n = n_or(n, &l.config)?;
    let alpha = alpha_or(alpha, &l.config)?;
    let start = Instant::now();
    let solver = Solver::new(&l.delta)?;
    let prepare_ms = ms(start);
    let start = Instant::now();
    let result = solver.run_test(n, alpha)?;
    let solve_ms = ms(start);
    let mut body = serde_json::to_value(&result)?;
    body["timing_ms"] = json!({ "load": l.load_ms, "prepare": prepare_ms, "solve": solve_ms });
    emit_json(cli.out.as_deref(), &envelope("test", body))
}

fn csv_row(w: &mut dyn Write, e: &SweepEntry) -> io::Result<()> {
    match &e.result {
        Some(r) => writeln!(
            w,
            "{},{},{},{},{},{},{:.3}",
            e.n,
            ext_real::format(r.z_min),
            ext_real::format(r.z_max),
            r.p_min,
            r.p_max,
            r.classification.as_str(),
            e.elapsed_ms
        ),
        None => writeln!(w, "{},,,,,no_pairs,{:.3}", e.n, e.elapsed_ms),
    }
}

fn cmd_sweep(
    cli: &Cli,
    range: Option<(usize, usize, usize)>,
    binary_search: bool,
    alpha: Option<f64>,
) -> Result<(), Failure> {
    let l = load(cli.config.as_deref())?;
    let alpha = alpha_or(alpha, &l.config)?;
    let solver = Solver::new(&l.delta)?;
    let upper = l.dataset.n_treated().min(l.dataset.n_control()).max(2);
    let (n_min, n_max, step) = match (range, l.config.n_spec) {
        (Some(r), _) => r,
        (None, NSpec::Sweep { n_min, n_max, step }) => (n_min, n_max, step),
        (None, NSpec::BinarySearch { n_min, n_max }) => (n_min, n_max, 1),
        (None, NSpec::Fixed(_)) if binary_search => (2, upper, 1),
        (None, NSpec::Fixed(n)) => (n, n, 1),
    };
    let bisect =
        binary_search || (range.is_none() && matches!(l.config.n_spec, NSpec::BinarySearch { .. }));

    let mut w = open_out(cli.out.as_deref())?;
    writeln!(w, "n,z_min,z_max,p_min,p_max,classification,ms")?;
    if bisect {
        let start = Instant::now();
        let entry = match solver.find_max_feasible_n(n_min, n_max, Feasibility::WithFallback)? {
            Some(n) => SweepEntry {
                n,
                result: Some(solver.run_test(n, alpha)?),
                elapsed_ms: ms(start),
            },
            None => SweepEntry {
                n: n_min,
                result: None,
                elapsed_ms: ms(start),
            },
        };
        csv_row(&mut *w, &entry)?;
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs.map_or(0, usize::from))
            .build()
            .map_err(|e| Failure::usage(e.to_string()))?;
        for entry in pool.install(|| solver.sweep(n_min, n_max, step, alpha))? {
            csv_row(&mut *w, &entry)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_oracle(cli: &Cli, n: Option<usize>, budget: Option<u64>) -> Result<(), Failure> {
    let l = load(cli.config.as_deref())?;
    let n = n_or(n, &l.config)?;
    let budget = budget.unwrap_or(l.config.oracle_budget);
    if budget == 0 {
        return Err(Failure::usage("--oracle-budget must be positive"));
    }
    if l.delta.is_empty() {
        return Err(SolveError::EmptyEligibility.into());
    }
    let start = Instant::now();
    let result = enumerate_extrema(&l.delta, n, budget)?;
    let mut body = serde_json::to_value(&result)?;
    body["n"] = json!(n);
    body["budget"] = json!(budget);
    body["timing_ms"] = json!({ "load": l.load_ms, "enumerate": ms(start) });
    emit_json(cli.out.as_deref(), &envelope("oracle", body))
}

fn sidecar_path(lp: &Path) -> PathBuf {
    lp.with_extension("json")
}

fn cmd_export(
    cli: &Cli,
    n: Option<usize>,
    kind: Kind,
    direction: Dir,
    case: u8,
    b_l: Option<f64>,
) -> Result<(), Failure> {
    let lp_path = cli
        .out
        .as_deref()
        .ok_or_else(|| Failure::usage("export needs --out for the model file"))?;
    let l = load(cli.config.as_deref())?;
    let n = n_or(n, &l.config)?;
    if l.delta.is_empty() {
        return Err(SolveError::EmptyEligibility.into());
    }
    let spec = match kind {
        Kind::Qip => {
            let case = if case == 1 { Case::Case1 } else { Case::Case2 };
            export_qip(&l.delta, n, direction.into(), case)?
        }
        Kind::Ilp => {
            let b_l = b_l.ok_or_else(|| Failure::usage("--b-l is required for ilp"))?;
            if !(b_l.is_finite() && b_l > 0.0) {
                return Err(Failure::usage(format!(
                    "--b-l must be positive and finite (got {b_l})"
                )));
            }
            export_ilp(&l.delta, n, direction.into(), b_l)?
        }
    };
    std::fs::write(lp_path, spec.to_lp())?;
    let sidecar = sidecar_path(lp_path);
    let mut meta = spec.sidecar(&l.matches.treated_ids, &l.matches.control_ids);
    meta["schema_version"] = json!(SCHEMA_VERSION);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)? + "\n")?;
    let report = envelope(
        "export",
        json!({
            "model": lp_path,
            "sidecar": sidecar,
            "n": n,
            "n_variables": spec.n_variables(),
            "n_cross_terms": spec.n_cross_terms(),
            "n_constraints": spec.constraints.len(),
            "notes": spec.notes,
        }),
    );
    emit_json(None, &report)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Match { dump } => cmd_match(cli, dump.as_deref()),
        Command::Test { n, alpha } => cmd_test(cli, *n, *alpha),
        Command::Sweep {
            sweep,
            binary_search,
            alpha,
        } => cmd_sweep(cli, *sweep, *binary_search, *alpha),
        Command::Oracle { n, oracle_budget } => cmd_oracle(cli, *n, *oracle_budget),
        Command::Export {
            n,
            kind,
            direction,
            case,
            b_l,
        } => cmd_export(cli, *n, *kind, *direction, *case, *b_l),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("robustz: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
