use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use memc::bench::{self, Backend, BackendSettings, BenchmarkConfig};
use memc::classical::SolverReport;
use memc::instances::{generate_instance, instance_from_name, load_instance, save_instance, GeneratorParams};
use memc::photonic::Objective;
use memc::qubo::Encoding;
use memc::{Error, MulticutInstance, Result};

#[derive(Parser)]
#[command(name = "memc", version, about = "Minimum edge multiway cut solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instance files.
    Gen(GenArgs),
    /// Solve one instance with one backend.
    Solve(SolveArgs),
    /// Run a benchmark suite from a config file.
    Bench(BenchArgs),
    /// Summarize record files into a CSV table.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, short = 'n', default_value_t = 8)]
    vertices: usize,
    /// Edge count; defaults to the `--density` share of the non-tree pairs.
    #[arg(long, short = 'm')]
    edges: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, short, default_value_t = 2)]
    k: usize,
    #[arg(long, short, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    cost_min: f64,
    #[arg(long, default_value_t = 10.0)]
    cost_max: f64,
    /// Draw real-valued costs instead of integers.
    #[arg(long)]
    real_costs: bool,
    #[arg(long, short, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Instance file, or `toy3` / `toy4`.
    instance: String,
    #[arg(long, short, value_parser = Backend::NAMES)]
    backend: String,
    #[arg(long, short, default_value_t = 0)]
    seed: u64,
    /// Final sampling shots (qaoa, photonic).
    #[arg(long)]
    shots: Option<usize>,
    /// QAOA depth.
    #[arg(long, short = 'p')]
    depth: Option<usize>,
    /// Penalty weight; defaults to one plus the total edge cost.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = ["full", "reduced"])]
    encoding: Option<String>,
    /// Objective-evaluation budget (qaoa, photonic).
    #[arg(long)]
    max_evals: Option<usize>,
    /// Depth-1 QAOA by grid scan with this many points per angle.
    #[arg(long)]
    grid: Option<usize>,
    /// Annealing reads.
    #[arg(long)]
    reads: Option<usize>,
    /// Annealing sweeps per read.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Photonic training objective from this many shots instead of the exact expectation.
    #[arg(long)]
    objective_shots: Option<usize>,
    /// Keep the optimizer trace in JSON output.
    #[arg(long)]
    trace: bool,
    #[arg(long, short, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(clap::Args)]
struct BenchArgs {
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ReportArgs {
    /// Record files (CSV or JSON).
    #[arg(required = true)]
    records: Vec<PathBuf>,
    /// Write the summary here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve(args) => solve(args),
        Command::Bench(args) => run_bench(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_capacity() { 2 } else { 1 })
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let n = args.vertices;
    let edges = args
        .edges
        .unwrap_or_else(|| GeneratorParams::edges_for_density(n, args.density));
    let mut params = GeneratorParams::new(n, edges, args.k, (args.cost_min, args.cost_max));
    params.integer_costs = !args.real_costs;
    for i in 0..args.count {
        let instance = generate_instance(&params, args.seed.wrapping_add(i as u64))?;
        let path = args
            .out
            .join(format!("{}.txt", bench::instance_id(&instance, &format!("s{i:03}"))));
        save_instance(&instance, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn read_instance(name: &str) -> Result<MulticutInstance> {
    match instance_from_name(name) {
        Some(instance) => Ok(instance),
        None => load_instance(name),
    }
}

fn settings_for(args: &SolveArgs) -> Result<BackendSettings> {
    let mut backend = Backend::from_name(&args.backend)?;
    match &mut backend {
        Backend::Sa { reads, sweeps, .. } => {
            if let Some(r) = args.reads {
                *reads = r;
            }
            if let Some(s) = args.sweeps {
                *sweeps = s;
            }
        }
        Backend::Qaoa(config) => {
            if let Some(points) = args.grid {
                if args.depth.is_some_and(|d| d != 1) {
                    return Err(Error::Parameter("grid scan is only available at depth 1".into()));
                }
                *config = memc::qaoa::QaoaConfig::grid(points);
            } else if let Some(depth) = args.depth {
                *config = memc::qaoa::QaoaConfig::new(depth);
            }
            if let Some(s) = args.shots {
                config.shots = s;
            }
            if let Some(n) = args.max_evals {
                config.optimizer.max_evaluations = n;
            }
        }
        Backend::Photonic(config) => {
            if let Some(s) = args.shots {
                config.final_shots = s;
            }
            if let Some(n) = args.max_evals {
                config.optimizer.max_evaluations = n;
            }
            if let Some(s) = args.objective_shots {
                config.objective = Objective::Shots(s);
            }
        }
        _ => {}
    }
    let mut settings = BackendSettings::new(backend);
    if let Some(e) = &args.encoding {
        settings.encoding = e.parse::<Encoding>()?;
    }
    Ok(settings)
}

fn solve(args: SolveArgs) -> Result<()> {
    let instance = read_instance(&args.instance)?;
    let settings = settings_for(&args)?;
    let mut report = settings.solve(&instance, args.alpha, args.seed)?;
    match args.format {
        Format::Json => {
            if !args.trace {
                report.trace = None;
            }
            emit(&(serde_json::to_string_pretty(&report)? + "\n"))
        }
        Format::Text => emit(&render_text(&report)),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(io_error(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}

fn render_text(report: &SolverReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "backend: {}", report.backend);
    if let Some(seed) = report.seed {
        let _ = writeln!(out, "seed: {seed}");
    }
    let _ = writeln!(out, "energy: {}", report.best_energy);
    let _ = writeln!(out, "bitstring: {}", report.best_bitstring);
    match &report.best_cut {
        Some(cut) => {
            let _ = writeln!(out, "cut cost: {}", cut.cut_cost);
            let edges: Vec<String> = cut
                .cut_edges
                .iter()
                .map(|e| format!("{}-{} ({})", e.u, e.v, e.cost))
                .collect();
            let _ = writeln!(out, "cut edges: {}", edges.join(", "));
            let assignment: Vec<String> = cut.assignment.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "assignment: {}", assignment.join(" "));
        }
        None => {
            let _ = writeln!(out, "cut: infeasible bitstring");
        }
    }
    if let Some(e) = report.expectation {
        let _ = writeln!(out, "expectation: {e}");
    }
    let _ = writeln!(out, "evaluations: {}", report.samples_evaluated);
    let _ = writeln!(out, "converged: {}", report.converged);
    out
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let mut config = BenchmarkConfig::load(&args.config)?;
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let output = bench::run_suite(&config)?;
    bench::write_suite(&config.output_dir, &output, config.inline_timing)?;
    let skipped = output.records.iter().filter(|r| r.is_skipped()).count();
    println!(
        "{} rows ({skipped} skipped) written to {}",
        output.records.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.records {
        records.extend(bench::read_records(path)?);
    }
    let table = bench::summary_to_csv(&bench::summarize(&records)?)?;
    match args.out {
        Some(path) => fs::write(&path, table).map_err(|e| io_error(&path, e)),
        None => emit(&table),
    }
}
