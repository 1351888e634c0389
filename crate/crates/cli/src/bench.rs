//! Seeded benchmark on the switched-system control problem.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::Instant;

use lcqp::solver::{solve, SolverOptions, SolverStatus};
use lcqp::transcription::{analytic_optimum, build_ivocp, extract_x0, IvocpConfig, IvocpLcqp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// First line of every benchmark CSV.
pub const CSV_HEADER: &str = "# lcqp-bench v1";

pub const COLUMNS: [&str; 13] = [
    "instance",
    "seed",
    "N",
    "status",
    "objective",
    "phi",
    "stationarity",
    "x0_error",
    "inner_iterations",
    "outer_iterations",
    "factorization_count",
    "wall_ms",
    "trajectory_rms",
];

/// Index of the timing column in [`COLUMNS`].
pub const WALL_MS_COLUMN: usize = 11;

/// Half-width of the interval the initial state guesses are drawn from.
pub const GUESS_RANGE: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n_steps: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// Worker threads; 0 means one per hardware thread.
    pub jobs: usize,
    pub regularization_eps: f64,
    pub options: SolverOptions,
}

impl BenchConfig {
    pub fn new(n_steps: Vec<usize>, runs: usize, seed: u64) -> Self {
        BenchConfig {
            n_steps,
            runs,
            seed,
            jobs: 0,
            regularization_eps: lcqp::transcription::DEFAULT_REGULARIZATION,
            options: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub instance: String,
    pub seed: u64,
    pub n_steps: usize,
    pub status: SolverStatus,
    /// Discretized control cost including the constant term.
    pub objective: f64,
    pub phi: f64,
    pub stationarity: f64,
    pub x0_error: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub factorization_count: usize,
    pub wall_ms: f64,
    pub trajectory_rms: f64,
    /// Initial state the run started from. Not written to the CSV.
    pub guess: f64,
}

impl RunRecord {
    fn fields(&self) -> [String; 13] {
        [
            self.instance.clone(),
            self.seed.to_string(),
            self.n_steps.to_string(),
            self.status.as_str().to_string(),
            format!("{:?}", self.objective),
            format!("{:?}", self.phi),
            format!("{:?}", self.stationarity),
            format!("{:?}", self.x0_error),
            self.inner_iterations.to_string(),
            self.outer_iterations.to_string(),
            self.factorization_count.to_string(),
            format!("{:.3}", self.wall_ms),
            format!("{:?}", self.trajectory_rms),
        ]
    }
}

struct Task<'a> {
    instance: &'a IvocpLcqp,
    run: usize,
    guess: f64,
}

/// Solve `runs` differently initialized copies of the problem for every grid size.
///
/// Guesses are drawn in order from a single generator seeded with `seed`, so the records depend
/// only on the configuration. They are returned grouped by grid size, then by run index.
pub fn run_benchmark(config: &BenchConfig) -> anyhow::Result<Vec<RunRecord>> {
    config.options.validate()?;
    let instances = config
        .n_steps
        .iter()
        .map(|&n| {
            build_ivocp(IvocpConfig {
                regularization_eps: config.regularization_eps,
                ..IvocpConfig::new(n)
            })
        })
        .collect::<lcqp::Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tasks = Vec::with_capacity(instances.len() * config.runs);
    for instance in &instances {
        for run in 0..config.runs {
            let guess = rng.gen_range(-GUESS_RANGE..=GUESS_RANGE);
            tasks.push(Task {
                instance,
                run,
                guess,
            });
        }
    }

    let target = analytic_optimum();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()?;
    log::info!("bench: {} runs on {} threads", tasks.len(), pool.current_num_threads());
    pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_one(task, config, target))
            .collect()
    })
}

fn run_one(task: &Task<'_>, config: &BenchConfig, target: f64) -> anyhow::Result<RunRecord> {
    let inst = task.instance;
    let n_steps = inst.config.n_steps;
    let x0 = inst.forward_simulation(task.guess);
    let start = Instant::now();
    let result = solve(&inst.problem, &config.options, Some(&x0))?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let x0_final = extract_x0(&result, &inst.map)?;
    log::debug!(
        "N={n_steps} run {}: {} x0={x0_final:.6} in {wall_ms:.2} ms",
        task.run,
        result.status
    );
    Ok(RunRecord {
        instance: format!("ivocp-N{n_steps}-{:03}", task.run),
        seed: config.seed,
        n_steps,
        status: result.status,
        objective: inst.total_objective(&result.x),
        phi: result.phi,
        stationarity: result.stationarity,
        x0_error: (x0_final - target).abs(),
        inner_iterations: result.inner_iterations,
        outer_iterations: result.outer_iterations,
        factorization_count: result.factorization_count,
        wall_ms,
        trajectory_rms: inst.trajectory_rms(&result.x),
        guess: task.guess,
    })
}

pub fn write_csv<W: Write>(records: &[RunRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(COLUMNS)?;
    for r in records {
        csv.write_record(r.fields())?;
    }
    csv.flush()
}

/// Means over the runs of one grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n_steps: usize,
    pub runs: usize,
    pub stationary: usize,
    pub mean_phi: f64,
    pub mean_x0_error: f64,
    pub mean_trajectory_rms: f64,
    pub mean_wall_ms: f64,
    pub mean_inner_iterations: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(r.n_steps).or_default().push(r);
        }
        let rows = groups
            .into_iter()
            .map(|(n_steps, rs)| {
                let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                    rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
                };
                SummaryRow {
                    n_steps,
                    runs: rs.len(),
                    stationary: rs
                        .iter()
                        .filter(|r| r.status == SolverStatus::StationaryPoint)
                        .count(),
                    mean_phi: mean(&|r| r.phi),
                    mean_x0_error: mean(&|r| r.x0_error),
                    mean_trajectory_rms: mean(&|r| r.trajectory_rms),
                    mean_wall_ms: mean(&|r| r.wall_ms),
                    mean_inner_iterations: mean(&|r| r.inner_iterations as f64),
                }
            })
            .collect();
        Summary { rows }
    }

    pub fn row(&self, n_steps: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.n_steps == n_steps)
    }

    pub fn write_table(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "{:>6} {:>5} {:>10} {:>12} {:>12} {:>12} {:>10} {:>8}",
            "N", "runs", "stationary", "mean phi", "mean |dx0|", "mean rms", "mean ms", "inner"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{:>6} {:>5} {:>10} {:>12.3e} {:>12.4e} {:>12.4e} {:>10.3} {:>8.1}",
                r.n_steps,
                r.runs,
                r.stationary,
                r.mean_phi,
                r.mean_x0_error,
                r.mean_trajectory_rms,
                r.mean_wall_ms,
                r.mean_inner_iterations
            )?;
        }
        Ok(())
    }
}
