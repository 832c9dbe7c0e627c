//! Experiment harness: instance suites, backend dispatch, per-row metrics,
//! summaries and report files.
//!
//! A suite config is TOML with one table per concern:
//!
//! ```toml
//! [run]
//! seed = 7
//! workers = 4            # 0 = one per core
//!
//! [instances]
//! vertices = "4..10"     # or 6, or [4, 6, 8]
//! k = 2
//! count = 20             # generated instances, cycling over (vertices, k)
//! density = 0.4
//! cost_min = 1.0
//! cost_max = 10.0
//!
//! [backend.sa]
//! reads = 100
//!
//! [backend.qaoa]
//! depth = 1
//!
//! [output]
//! dir = "bench-out"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{
    brute_force_partition, greedy_isolation, min_cut_k2, partition_count, simulated_annealing,
    AnnealSchedule, Cooling, SolverReport, Timer, DEFAULT_FINAL_TEMPERATURE, DEFAULT_READS,
    DEFAULT_SWEEPS, MAX_PARTITIONS,
};
use crate::error::{Error, Result};
use crate::instances::{generate_instance, instance_from_name, load_instance, GeneratorParams, MulticutInstance};
use crate::optim::Method;
use crate::photonic::{photonic_optimize, Objective, PhotonicConfig, DEFAULT_FINAL_SHOTS};
use crate::qaoa::{qaoa_optimize, QaoaConfig, DEFAULT_SHOTS};
use crate::qubo::{build_qubo_with, Encoding, QuboModel};
use crate::{energies_match, rng};

/// One solver with its settings.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// Exhaustive enumeration of terminal assignments.
    Exact,
    /// Max-flow minimum cut; two terminals only.
    MaxFlow,
    /// Isolating-cut heuristic.
    Greedy,
    Sa {
        reads: usize,
        sweeps: usize,
        /// `None` uses the instance's total edge cost.
        initial_temperature: Option<f64>,
        final_temperature: f64,
        cooling: Cooling,
    },
    Qaoa(QaoaConfig),
    Photonic(PhotonicConfig),
}

impl Backend {
    pub const NAMES: [&'static str; 6] = ["exact", "maxflow", "greedy", "sa", "qaoa", "photonic"];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::MaxFlow => "maxflow",
            Backend::Greedy => "greedy",
            Backend::Sa { .. } => "sa",
            Backend::Qaoa(_) => "qaoa",
            Backend::Photonic(_) => "photonic",
        }
    }

    /// Default settings for a backend name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "exact" => Backend::Exact,
            "maxflow" => Backend::MaxFlow,
            "greedy" => Backend::Greedy,
            "sa" => Backend::Sa {
                reads: DEFAULT_READS,
                sweeps: DEFAULT_SWEEPS,
                initial_temperature: None,
                final_temperature: DEFAULT_FINAL_TEMPERATURE,
                cooling: Cooling::Geometric,
            },
            "qaoa" => Backend::Qaoa(QaoaConfig::new(1)),
            "photonic" => Backend::Photonic(PhotonicConfig::default()),
            other => {
                return Err(Error::Parameter(format!(
                    "unknown backend {other:?}; expected one of {}",
                    Backend::NAMES.join(", ")
                )))
            }
        })
    }

    /// Photonic runs default to the reduced encoding to keep the mode count low.
    pub fn default_encoding(&self) -> Encoding {
        match self {
            Backend::Photonic(_) => Encoding::Reduced,
            _ => Encoding::Full,
        }
    }

    fn order(&self) -> u64 {
        Backend::NAMES.iter().position(|&n| n == self.name()).unwrap_or(0) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendSettings {
    pub backend: Backend,
    pub encoding: Encoding,
}

impl BackendSettings {
    pub fn new(backend: Backend) -> Self {
        let encoding = backend.default_encoding();
        BackendSettings { backend, encoding }
    }

    pub fn name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn build_model(&self, instance: &MulticutInstance, alpha: Option<f64>) -> Result<QuboModel> {
        build_qubo_with(instance, alpha, self.encoding)
    }

    /// Why this backend cannot run on `instance`, if it cannot.
    pub fn inapplicable(&self, instance: &MulticutInstance) -> Option<String> {
        match self.backend {
            Backend::MaxFlow if instance.k() != 2 => {
                Some(format!("maxflow needs exactly 2 terminals, instance has {}", instance.k()))
            }
            _ => None,
        }
    }

    /// Runs the backend on a model built from `instance`; the report's
    /// `best_cut` is filled whenever the best bitstring is feasible.
    pub fn solve_model(&self, model: &QuboModel, instance: &MulticutInstance, seed: u64) -> Result<SolverReport> {
        let timer = Timer::start();
        let mut report = match &self.backend {
            Backend::Exact => {
                let cut = brute_force_partition(instance)?;
                let samples = partition_count(instance).unwrap_or(u64::MAX);
                SolverReport::from_cut("exact", model, cut, samples, timer.elapsed())?
            }
            Backend::MaxFlow => {
                let cut = min_cut_k2(instance)?;
                SolverReport::from_cut("maxflow", model, cut, 1, timer.elapsed())?
            }
            Backend::Greedy => {
                let cut = greedy_isolation(instance)?;
                SolverReport::from_cut("greedy", model, cut, instance.k() as u64, timer.elapsed())?
            }
            Backend::Sa {
                reads,
                sweeps,
                initial_temperature,
                final_temperature,
                cooling,
            } => {
                let mut schedule = AnnealSchedule::for_instance(instance);
                if let Some(t0) = initial_temperature {
                    schedule.initial_temperature = *t0;
                }
                schedule.final_temperature = *final_temperature;
                schedule.sweeps = *sweeps;
                schedule.cooling = *cooling;
                simulated_annealing(model, &schedule, *reads, seed)?
            }
            Backend::Qaoa(config) => qaoa_optimize(model, config, seed)?,
            Backend::Photonic(config) => photonic_optimize(model, config, seed)?,
        };
        if report.best_cut.is_none() {
            report.attach_cut(model, instance)?;
        }
        Ok(report)
    }

    pub fn solve(&self, instance: &MulticutInstance, alpha: Option<f64>, seed: u64) -> Result<SolverReport> {
        if let Some(reason) = self.inapplicable(instance) {
            return Err(Error::Parameter(reason));
        }
        let model = self.build_model(instance, alpha)?;
        self.solve_model(&model, instance, seed)
    }
}

/// Where suite instances come from.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFamily {
    pub vertices: Vec<usize>,
    pub ks: Vec<usize>,
    /// Generated instances; `(vertices, k)` combinations are cycled in order.
    pub count: usize,
    /// Edge count; overrides `density` when set.
    pub edges: Option<usize>,
    pub density: f64,
    pub cost_range: (f64, f64),
    pub integer_costs: bool,
    pub seed: u64,
    pub files: Vec<PathBuf>,
    /// Built-in fixtures: `toy3`, `toy4`.
    pub toys: Vec<String>,
}

impl Default for InstanceFamily {
    fn default() -> Self {
        InstanceFamily {
            vertices: vec![6],
            ks: vec![2],
            count: 0,
            edges: None,
            density: 0.5,
            cost_range: (1.0, 10.0),
            integer_costs: true,
            seed: 0,
            files: Vec::new(),
            toys: Vec::new(),
        }
    }
}

/// Suite instance ids have the form `n{V}-k{k}-{label}`; summaries bucket on `V`.
pub fn instance_id(instance: &MulticutInstance, label: &str) -> String {
    format!("n{}-k{}-{label}", instance.num_vertices(), instance.k())
}

/// Vertex count encoded in an instance id, if it follows the suite convention.
pub fn size_bucket(id: &str) -> Option<usize> {
    id.strip_prefix('n')?.split('-').next()?.parse().ok()
}

impl InstanceFamily {
    pub fn build(&self) -> Result<Vec<(String, MulticutInstance)>> {
        let mut out = Vec::new();
        for toy in &self.toys {
            let instance = instance_from_name(toy)
                .ok_or_else(|| Error::Config(format!("unknown built-in instance {toy:?}")))?;
            out.push((instance_id(&instance, toy), instance));
        }
        for path in &self.files {
            let instance = load_instance(path)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into());
            out.push((instance_id(&instance, &stem), instance));
        }
        if self.count > 0 {
            let combos: Vec<(usize, usize)> = self
                .vertices
                .iter()
                .flat_map(|&n| self.ks.iter().filter(move |&&k| k <= n).map(move |&k| (n, k)))
                .collect();
            if combos.is_empty() {
                return Err(Error::Config("no (vertices, k) combination with k <= vertices".into()));
            }
            for i in 0..self.count {
                let (n, k) = combos[i % combos.len()];
                let max_edges = n * (n - 1) / 2;
                let m = self
                    .edges
                    .unwrap_or_else(|| GeneratorParams::edges_for_density(n, self.density))
                    .clamp(n - 1, max_edges);
                let mut params = GeneratorParams::new(n, m, k, self.cost_range);
                params.integer_costs = self.integer_costs;
                let instance = generate_instance(&params, rng::mix_seed(self.seed, i as u64))?;
                out.push((instance_id(&instance, &format!("s{i:03}")), instance));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub instances: InstanceFamily,
    /// Run in canonical backend order regardless of config order.
    pub backends: Vec<BackendSettings>,
    pub seed: u64,
    /// Rayon worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Penalty weight for every model; default per instance when `None`.
    pub alpha: Option<f64>,
    pub output_dir: PathBuf,
    /// Write wall times into the record files instead of only the metadata file.
    pub inline_timing: bool,
}

// Raw TOML shape

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    instances: RawInstances,
    #[serde(default)]
    backend: RawBackends,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRun {
    seed: u64,
    workers: usize,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SizeSpec {
    One(usize),
    List(Vec<usize>),
    Range(String),
}

impl SizeSpec {
    fn expand(&self, key: &str) -> Result<Vec<usize>> {
        let values = match self {
            SizeSpec::One(v) => vec![*v],
            SizeSpec::List(v) => v.clone(),
            SizeSpec::Range(s) => {
                let bad = || Error::Config(format!("{key} = {s:?}: expected \"lo..hi\" (inclusive)"));
                let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
                (lo..=hi).collect()
            }
        };
        if values.is_empty() {
            return Err(Error::Config(format!("{key} is empty")));
        }
        Ok(values)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawInstances {
    vertices: Option<SizeSpec>,
    k: Option<SizeSpec>,
    count: usize,
    edges: Option<usize>,
    density: Option<f64>,
    cost_min: Option<f64>,
    cost_max: Option<f64>,
    integer_costs: Option<bool>,
    seed: u64,
    files: Vec<PathBuf>,
    toys: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackends {
    exact: Option<RawSimple>,
    maxflow: Option<RawSimple>,
    greedy: Option<RawSimple>,
    sa: Option<RawSa>,
    qaoa: Option<RawQaoa>,
    photonic: Option<RawPhotonic>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSimple {
    encoding: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSa {
    encoding: Option<String>,
    reads: Option<usize>,
    sweeps: Option<usize>,
    t0: Option<f64>,
    tf: Option<f64>,
    cooling: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawQaoa {
    encoding: Option<String>,
    depth: Option<usize>,
    shots: Option<usize>,
    optimizer: Option<String>,
    max_evals: Option<usize>,
    tolerance: Option<f64>,
    grid_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawPhotonic {
    encoding: Option<String>,
    max_evals: Option<usize>,
    tolerance: Option<f64>,
    /// Shots per objective evaluation; exact expectation when absent.
    objective_shots: Option<usize>,
    shots: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    dir: PathBuf,
    inline_timing: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            dir: PathBuf::from("bench-out"),
            inline_timing: false,
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Parameter(m) => Error::Config(m),
        other => other,
    }
}

fn parse_encoding(value: &Option<String>, backend: &Backend) -> Result<Encoding> {
    value
        .as_deref()
        .map_or(Ok(backend.default_encoding()), str::parse)
        .map_err(config_err)
}

impl BenchmarkConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let defaults = InstanceFamily::default();
        let inst = raw.instances;
        let instances = InstanceFamily {
            vertices: match &inst.vertices {
                Some(s) => s.expand("vertices")?,
                None => defaults.vertices,
            },
            ks: match &inst.k {
                Some(s) => s.expand("k")?,
                None => defaults.ks,
            },
            count: inst.count,
            edges: inst.edges,
            density: inst.density.unwrap_or(defaults.density),
            cost_range: (
                inst.cost_min.unwrap_or(defaults.cost_range.0),
                inst.cost_max.unwrap_or(defaults.cost_range.1),
            ),
            integer_costs: inst.integer_costs.unwrap_or(defaults.integer_costs),
            seed: inst.seed,
            files: inst.files,
            toys: inst.toys,
        };

        let b = raw.backend;
        let mut backends = Vec::new();
        for (raw, backend) in [(&b.exact, Backend::Exact), (&b.maxflow, Backend::MaxFlow), (&b.greedy, Backend::Greedy)] {
            if let Some(raw) = raw {
                let encoding = parse_encoding(&raw.encoding, &backend)?;
                backends.push(BackendSettings { backend, encoding });
            }
        }
        if let Some(sa) = &b.sa {
            let backend = Backend::Sa {
                reads: sa.reads.unwrap_or(DEFAULT_READS),
                sweeps: sa.sweeps.unwrap_or(DEFAULT_SWEEPS),
                initial_temperature: sa.t0,
                final_temperature: sa.tf.unwrap_or(DEFAULT_FINAL_TEMPERATURE),
                cooling: sa.cooling.as_deref().unwrap_or("geometric").parse().map_err(config_err)?,
            };
            let encoding = parse_encoding(&sa.encoding, &backend)?;
            backends.push(BackendSettings { backend, encoding });
        }
        if let Some(q) = &b.qaoa {
            let mut config = QaoaConfig::new(q.depth.unwrap_or(1));
            if let Some(method) = &q.optimizer {
                config.optimizer.method = method.parse::<Method>().map_err(config_err)?;
            }
            if let Some(n) = q.max_evals {
                config.optimizer.max_evaluations = n;
            }
            if let Some(t) = q.tolerance {
                config.optimizer.tolerance = t;
            }
            if let Some(g) = q.grid_points {
                config.optimizer.grid_points = g;
            }
            config.shots = q.shots.unwrap_or(DEFAULT_SHOTS);
            let backend = Backend::Qaoa(config);
            let encoding = parse_encoding(&q.encoding, &backend)?;
            backends.push(BackendSettings { backend, encoding });
        }
        if let Some(p) = &b.photonic {
            let mut config = PhotonicConfig::default();
            if let Some(n) = p.max_evals {
                config.optimizer.max_evaluations = n;
            }
            if let Some(t) = p.tolerance {
                config.optimizer.tolerance = t;
            }
            if let Some(s) = p.objective_shots {
                config.objective = Objective::Shots(s);
            }
            config.final_shots = p.shots.unwrap_or(DEFAULT_FINAL_SHOTS);
            let backend = Backend::Photonic(config);
            let encoding = parse_encoding(&p.encoding, &backend)?;
            backends.push(BackendSettings { backend, encoding });
        }

        let config = BenchmarkConfig {
            instances,
            backends,
            seed: raw.run.seed,
            workers: raw.run.workers,
            alpha: raw.run.alpha,
            output_dir: raw.output.dir,
            inline_timing: raw.output.inline_timing,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = BenchmarkConfig::parse(&text)?;
        // relative paths resolve against the config's directory
        if let Some(dir) = path.parent() {
            for file in config.instances.files.iter_mut().chain([&mut config.output_dir]) {
                if file.is_relative() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.backends.is_empty() {
            return Err(Error::Config("at least one backend is required".into()));
        }
        let inst = &self.instances;
        if inst.count == 0 && inst.files.is_empty() && inst.toys.is_empty() {
            return Err(Error::Config("at least one instance is required".into()));
        }
        let (lo, hi) = inst.cost_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::Config(format!("cost range must satisfy 0 <= min <= max, got ({lo}, {hi})")));
        }
        if !(0.0..=1.0).contains(&inst.density) {
            return Err(Error::Config(format!("density must lie in [0, 1], got {}", inst.density)));
        }
        if inst.ks.iter().any(|&k| k < 2) {
            return Err(Error::Config("k must be at least 2".into()));
        }
        if self.alpha.is_some_and(|a| !(a.is_finite() && a > 0.0)) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        for settings in &self.backends {
            match &settings.backend {
                Backend::Sa {
                    reads,
                    sweeps,
                    initial_temperature,
                    final_temperature,
                    cooling,
                } => {
                    let t0 = initial_temperature.unwrap_or(*final_temperature);
                    AnnealSchedule::new(t0.max(*final_temperature), *final_temperature, *sweeps, *cooling)
                        .map_err(config_err)?;
                    if *reads == 0 {
                        return Err(Error::Config("sa reads must be at least 1".into()));
                    }
                }
                Backend::Qaoa(c) => {
                    c.optimizer.validate().map_err(config_err)?;
                    if c.depth == 0 || c.shots == 0 {
                        return Err(Error::Config("qaoa depth and shots must be at least 1".into()));
                    }
                }
                Backend::Photonic(c) => {
                    c.optimizer.validate().map_err(config_err)?;
                    if c.final_shots == 0 || c.objective == Objective::Shots(0) {
                        return Err(Error::Config("photonic shot counts must be at least 1".into()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One (instance, backend) row. Skipped rows have no `best_energy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub instance: String,
    pub backend: String,
    pub best_energy: Option<f64>,
    pub opt_energy: Option<f64>,
    /// `(best − opt) / opt`, or the absolute difference when `opt = 0`.
    pub gap: Option<f64>,
    pub hit: Option<bool>,
    /// Fraction of samples (shots or reads) landing on an optimal bitstring.
    pub opt_prob: Option<f64>,
    pub evals: Option<u64>,
    pub wall_ms: Option<f64>,
    pub seed: Option<u64>,
}

impl BenchmarkRecord {
    pub fn is_skipped(&self) -> bool {
        self.best_energy.is_none()
    }
}

/// Relative gap; absolute when the optimum is zero. Matching energies give exactly 0.
pub fn relative_gap(best: f64, opt: f64) -> f64 {
    if energies_match(best, opt) {
        0.0
    } else if opt == 0.0 {
        best - opt
    } else {
        (best - opt) / opt
    }
}

/// Per-row details kept out of the records so that record files are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetadata {
    pub instance: String,
    pub backend: String,
    pub wall_ms: f64,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub records: Vec<BenchmarkRecord>,
    pub metadata: Vec<RowMetadata>,
}

/// Optimal cut cost by enumeration when feasible, else max flow for two terminals.
pub fn oracle_optimum(instance: &MulticutInstance) -> Result<Option<f64>> {
    if partition_count(instance).is_some_and(|c| c <= MAX_PARTITIONS) {
        return Ok(Some(brute_force_partition(instance)?.cut_cost));
    }
    if instance.k() == 2 {
        return Ok(Some(min_cut_k2(instance)?.cut_cost));
    }
    Ok(None)
}

fn run_row(
    config: &BenchmarkConfig,
    id: &str,
    instance: &MulticutInstance,
    opt: Option<f64>,
    settings: &BackendSettings,
    seed: u64,
) -> Result<(BenchmarkRecord, RowMetadata)> {
    let timer = Timer::start();
    let mut record = BenchmarkRecord {
        instance: id.to_string(),
        backend: settings.name().to_string(),
        best_energy: None,
        opt_energy: opt,
        gap: None,
        hit: None,
        opt_prob: None,
        evals: None,
        wall_ms: None,
        seed: None,
    };
    let outcome = match settings.inapplicable(instance) {
        Some(reason) => Err(reason),
        None => {
            let solved = settings
                .build_model(instance, config.alpha)
                .and_then(|model| Ok((settings.solve_model(&model, instance, seed)?, model)));
            match solved {
                Ok(ok) => Ok(ok),
                Err(e) if e.is_capacity() => Err(e.to_string()),
                Err(e) => return Err(e),
            }
        }
    };
    let skipped = match outcome {
        Ok((report, model)) => {
            record.best_energy = Some(report.best_energy);
            record.evals = Some(report.samples_evaluated);
            record.seed = report.seed;
            if let Some(opt) = opt {
                let gap = relative_gap(report.best_energy, opt);
                record.gap = Some(gap);
                record.hit = Some(gap == 0.0);
                record.opt_prob = report.sampled_fraction(|b| {
                    model.energy(b).is_ok_and(|e| energies_match(e, opt))
                });
            }
            None
        }
        Err(reason) => Some(reason),
    };
    let wall_ms = timer.elapsed() * 1e3;
    record.wall_ms = Some(wall_ms);
    let meta = RowMetadata {
        instance: id.to_string(),
        backend: settings.name().to_string(),
        wall_ms,
        skipped,
    };
    Ok((record, meta))
}

/// Runs every backend on every instance. Rows are independent, each with a
/// seed derived from the suite seed and its position.
pub fn run_suite(config: &BenchmarkConfig) -> Result<SuiteOutput> {
    config.validate()?;
    let instances = config.instances.build()?;
    let mut backends = config.backends.clone();
    backends.sort_by_key(|b| b.backend.order());

    let work = || -> Result<SuiteOutput> {
        let optima: Vec<Option<f64>> = instances
            .par_iter()
            .map(|(_, inst)| oracle_optimum(inst))
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, &BackendSettings)> = (0..instances.len())
            .flat_map(|i| backends.iter().map(move |b| (i, b)))
            .collect();
        let rows: Vec<(BenchmarkRecord, RowMetadata)> = jobs
            .par_iter()
            .map(|&(i, settings)| {
                let (id, inst) = &instances[i];
                let seed = rng::mix_seed(rng::mix_seed(config.seed, i as u64), settings.backend.order());
                run_row(config, id, inst, optima[i], settings, seed)
            })
            .collect::<Result<_>>()?;
        let (records, metadata) = rows.into_iter().unzip();
        Ok(SuiteOutput { records, metadata })
    };

    if config.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(work)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub backend: String,
    /// Vertex count bucket; `None` for ids outside the suite convention.
    pub vertices: Option<usize>,
    pub rows: usize,
    pub skipped: usize,
    pub hit_rate: Option<f64>,
    pub gap_median: Option<f64>,
    pub gap_p90: Option<f64>,
    pub gap_max: Option<f64>,
    pub mean_opt_prob: Option<f64>,
    pub mean_evals: Option<f64>,
    pub mean_wall_ms: Option<f64>,
}

/// Lower-interpolation quantile: element `floor(q·(n−1))` of the sorted values.
pub fn quantile_lower(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = (q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64).floor() as usize;
    Some(sorted[pos])
}

fn sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

// sums over sorted values so that means do not depend on record order
fn mean(values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    Some(sorted(values).iter().sum::<f64>() / n)
}

/// Aggregates per (backend, size bucket), ordered by backend name then size.
pub fn summarize(records: &[BenchmarkRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Parameter("no records to summarize".into()));
    }
    let mut groups: BTreeMap<(String, Option<usize>), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.backend.clone(), size_bucket(&r.instance)))
            .or_default()
            .push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((backend, vertices), rows)| {
            let hits: Vec<f64> = rows.iter().filter_map(|r| r.hit).map(|h| h as u8 as f64).collect();
            let gaps = sorted(rows.iter().filter_map(|r| r.gap).collect());
            SummaryRow {
                backend,
                vertices,
                rows: rows.len(),
                skipped: rows.iter().filter(|r| r.is_skipped()).count(),
                hit_rate: mean(hits),
                gap_median: quantile_lower(&gaps, 0.5),
                gap_p90: quantile_lower(&gaps, 0.9),
                gap_max: gaps.last().copied(),
                mean_opt_prob: mean(rows.iter().filter_map(|r| r.opt_prob).collect()),
                mean_evals: mean(rows.iter().filter_map(|r| r.evals.map(|e| e as f64)).collect()),
                mean_wall_ms: mean(rows.iter().filter_map(|r| r.wall_ms).collect()),
            }
        })
        .collect())
}

fn without_timing(records: &[BenchmarkRecord], inline_timing: bool) -> Vec<BenchmarkRecord> {
    records
        .iter()
        .cloned()
        .map(|mut r| {
            if !inline_timing {
                r.wall_ms = None;
            }
            r
        })
        .collect()
}

pub fn records_to_csv(records: &[BenchmarkRecord], inline_timing: bool) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        writer.write_record(["instance", "backend", "best_energy", "opt_energy", "gap", "hit", "opt_prob", "evals", "wall_ms", "seed"])?;
    }
    for r in without_timing(records, inline_timing) {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn records_from_csv(text: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in rows {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BenchmarkRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        records_from_csv(&text)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Files produced by [`write_suite`].
pub const RECORDS_CSV: &str = "records.csv";
pub const RECORDS_JSON: &str = "records.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const METADATA_JSON: &str = "metadata.json";

/// Writes records (CSV and JSON), the summary, and a metadata file holding
/// wall times, skip reasons and a timestamp. Only the metadata file varies
/// between identical runs unless `inline_timing` is set.
pub fn write_suite(dir: impl AsRef<Path>, output: &SuiteOutput, inline_timing: bool) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(RECORDS_CSV), &records_to_csv(&output.records, inline_timing)?)?;
    let json = serde_json::to_string_pretty(&without_timing(&output.records, inline_timing))?;
    write_file(&dir.join(RECORDS_JSON), &(json + "\n"))?;
    let summary = summarize(&without_timing(&output.records, inline_timing))?;
    write_file(&dir.join(SUMMARY_CSV), &summary_to_csv(&summary)?)?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let meta = serde_json::json!({
        "finished_unix_s": stamp,
        "rows": output.metadata,
    });
    write_file(&dir.join(METADATA_JSON), &(serde_json::to_string_pretty(&meta)? + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(backend: &str, instance: &str, gap: Option<f64>, prob: Option<f64>) -> BenchmarkRecord {
        BenchmarkRecord {
            instance: instance.into(),
            backend: backend.into(),
            best_energy: gap.map(|g| 2.0 * (1.0 + g)),
            opt_energy: Some(2.0),
            gap,
            hit: gap.map(|g| g == 0.0),
            opt_prob: prob,
            evals: gap.map(|_| 10),
            wall_ms: None,
            seed: Some(1),
        }
    }

    #[test]
    fn gap_rules() {
        assert_eq!(relative_gap(3.0, 2.0), 0.5);
        assert_eq!(relative_gap(2.0 + 1e-12, 2.0), 0.0);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert_eq!(relative_gap(1.5, 0.0), 1.5);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_lower(&v, 0.5), Some(2.0));
        assert_eq!(quantile_lower(&v, 0.9), Some(3.0));
        assert_eq!(quantile_lower(&v, 1.0), Some(4.0));
        assert_eq!(quantile_lower(&[], 0.5), None);
    }

    #[test]
    fn buckets() {
        assert_eq!(size_bucket("n12-k3-s004"), Some(12));
        assert_eq!(size_bucket("n3-k2-toy3"), Some(3));
        assert_eq!(size_bucket("custom"), None);
    }

    #[test]
    fn summary_all_hits() {
        let recs: Vec<_> = (0..4).map(|i| record("sa", &format!("n5-k2-s{i}"), Some(0.0), Some(0.5))).collect();
        let s = summarize(&recs).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].hit_rate, Some(1.0));
        assert_eq!(s[0].gap_median, Some(0.0));
        assert_eq!(s[0].mean_opt_prob, Some(0.5));
    }

    #[test]
    fn summary_single_record() {
        let r = record("qaoa", "n4-k2-s0", Some(0.25), Some(0.1));
        let s = summarize(std::slice::from_ref(&r)).unwrap();
        assert_eq!(s[0].rows, 1);
        assert_eq!(s[0].hit_rate, Some(0.0));
        assert_eq!(s[0].gap_median, Some(0.25));
        assert_eq!(s[0].gap_max, Some(0.25));
        assert_eq!(s[0].mean_opt_prob, Some(0.1));
        assert_eq!(s[0].mean_evals, Some(10.0));
    }

    #[test]
    fn summary_is_order_invariant() {
        let mut recs = vec![
            record("sa", "n5-k2-a", Some(0.1), Some(0.3)),
            record("sa", "n5-k2-b", Some(0.0), Some(0.7)),
            record("greedy", "n6-k2-c", Some(0.2), None),
            record("sa", "n6-k2-d", None, None),
            record("sa", "n5-k2-e", Some(0.3), Some(0.1)),
        ];
        let a = summarize(&recs).unwrap();
        recs.reverse();
        recs.swap(0, 2);
        assert_eq!(a, summarize(&recs).unwrap());
        assert_eq!(a[0].backend, "greedy");
        let sa5 = &a[1];
        assert_eq!((sa5.vertices, sa5.rows, sa5.skipped), (Some(5), 3, 0));
        assert_eq!(sa5.gap_median, Some(0.1));
        assert_eq!(a[2].skipped, 1);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![record("sa", "n5-k2-a", Some(0.0), Some(0.3)), record("maxflow", "n5-k3-a", None, None)];
        let text = records_to_csv(&recs, false).unwrap();
        assert!(text.starts_with("instance,backend,best_energy,opt_energy,gap,hit,opt_prob,evals,wall_ms,seed\n"));
        assert_eq!(records_from_csv(&text).unwrap(), recs);
        let empty = records_to_csv(&[], false).unwrap();
        assert_eq!(empty.lines().count(), 1);
    }

    #[test]
    fn config_parsing() {
        let config = BenchmarkConfig::parse(
            r#"
            [run]
            seed = 5
            [instances]
            vertices = "4..6"
            k = [2, 3]
            count = 6
            [backend.sa]
            reads = 10
            sweeps = 200
            [backend.greedy]
            "#,
        )
        .unwrap();
        assert_eq!(config.instances.vertices, vec![4, 5, 6]);
        assert_eq!(config.instances.ks, vec![2, 3]);
        assert_eq!(config.backends.len(), 2);
        let ids: Vec<String> = config.instances.build().unwrap().into_iter().map(|(id, _)| id).collect();
        assert_eq!(ids[0], "n4-k2-s000");
        assert_eq!(ids[1], "n4-k3-s001");
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn config_errors() {
        let no_backend = "[instances]\ncount = 2\n";
        assert!(matches!(BenchmarkConfig::parse(no_backend), Err(Error::Config(_))));
        let no_instance = "[backend.sa]\n";
        assert!(matches!(BenchmarkConfig::parse(no_instance), Err(Error::Config(_))));
        let typo = "[instances]\ncount = 2\n[backend.sa]\nreeds = 3\n";
        assert!(matches!(BenchmarkConfig::parse(typo), Err(Error::Config(_))));
        let unknown = "[instances]\ncount = 2\n[backend.dwave]\n";
        assert!(matches!(BenchmarkConfig::parse(unknown), Err(Error::Config(_))));
        let bad_cooling = "[instances]\ncount = 2\n[backend.sa]\ncooling = \"fast\"\n";
        assert!(matches!(BenchmarkConfig::parse(bad_cooling), Err(Error::Config(_))));
    }

    #[test]
    fn toy3_across_backends() {
        let config = BenchmarkConfig::parse(
            r#"
            [instances]
            toys = ["toy3"]
            [backend.exact]
            [backend.maxflow]
            [backend.greedy]
            [backend.sa]
            reads = 20
            "#,
        )
        .unwrap();
        let out = run_suite(&config).unwrap();
        assert_eq!(out.records.len(), 4);
        for r in &out.records {
            assert_eq!(r.opt_energy, Some(1.0));
            assert_eq!(r.gap, Some(0.0), "{}", r.backend);
            assert_eq!(r.hit, Some(true));
        }
        let names: Vec<&str> = out.records.iter().map(|r| r.backend.as_str()).collect();
        assert_eq!(names, ["exact", "maxflow", "greedy", "sa"]);
    }

    #[test]
    fn inapplicable_backend_is_skipped() {
        let config = BenchmarkConfig::parse(
            "[instances]\nvertices = 5\nk = 3\ncount = 1\n[backend.maxflow]\n[backend.greedy]\n",
        )
        .unwrap();
        let out = run_suite(&config).unwrap();
        assert!(out.records[0].is_skipped());
        assert!(out.metadata[0].skipped.is_some());
        assert!(!out.records[1].is_skipped());
    }
}
