//! Monte Carlo sweep: random run configurations, per-run pipelines and a
//! parallel, resumable driver.
//!
//! Every random draw of run `i` comes from ChaCha8 streams keyed by the master
//! seed and indexed by `(i, phase)`, so results never depend on scheduling.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{
    evaluate, read_results, results_header, EvaluationReport, RunResult, ScenarioOutcome,
};
use crate::netgen::{NetgenError, NetworkParams, Population};
use crate::recruitment::{
    assign_attrition, draw_golden_sample, run_scenario, RecruitmentError, RecruitmentForest,
    Scenario,
};

pub const ENGINE_VERSION: &str = concat!("hpssd-core ", env!("CARGO_PKG_VERSION"));

/// Hyperparameter ranges sampled for every run.
pub mod ranges {
    pub const P_D: (f64, f64) = (0.15, 0.30);
    pub const OMEGA_COUNT: (u32, u32) = (5_000, 15_000);
    pub const TARGET_MEAN_DEGREE: (f64, f64) = (5.0, 25.0);
    pub const W: (f64, f64) = (0.1, 0.5);
    pub const GAMMA: (f64, f64) = (0.2, 0.8);
    pub const R_V: (f64, f64) = (0.0, 0.5);
}

/// Default run count of a desk-scale sweep.
pub const DESK_RUNS: u64 = 500;
/// Run count of the full-scale sweep.
pub const PAPER_RUNS: u64 = 8_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: u64,
    pub master_seed: u64,
    pub p_d: f64,
    pub omega_count: u32,
    pub target_mean_degree: f64,
    pub w: f64,
    pub gamma: f64,
    pub r_v: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("`{name}` = {value} outside [{low}, {high}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },
}

impl RunConfig {
    pub fn network(&self) -> NetworkParams {
        NetworkParams {
            omega_count: self.omega_count,
            p_d: self.p_d,
            target_mean_degree: self.target_mean_degree,
            w: self.w,
            gamma: self.gamma,
        }
    }

    /// Checks every hyperparameter against the sweep ranges.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |name, value: f64, (low, high): (f64, f64)| {
            if (low..=high).contains(&value) {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    name,
                    value,
                    low,
                    high,
                })
            }
        };
        let omega = (
            f64::from(ranges::OMEGA_COUNT.0),
            f64::from(ranges::OMEGA_COUNT.1),
        );
        check("p_d", self.p_d, ranges::P_D)?;
        check("omega_count", f64::from(self.omega_count), omega)?;
        check(
            "target_mean_degree",
            self.target_mean_degree,
            ranges::TARGET_MEAN_DEGREE,
        )?;
        check("w", self.w, ranges::W)?;
        check("gamma", self.gamma, ranges::GAMMA)?;
        check("r_v", self.r_v, ranges::R_V)
    }
}

/// Independent random streams within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Config,
    Population,
    Scenario(Scenario),
}

impl Phase {
    fn offset(self) -> u64 {
        match self {
            Self::Config => 0,
            Self::Population => 1,
            Self::Scenario(s) => 2 + s.index() as u64,
        }
    }
}

const PHASES_PER_RUN: u64 = 8;

/// Counter-based substream for `(master_seed, run_index, phase)`.
pub fn stream(master_seed: u64, run_index: u64, phase: Phase) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index.wrapping_mul(PHASES_PER_RUN) + phase.offset());
    rng
}

fn uniform<R: Rng>(rng: &mut R, (low, high): (f64, f64)) -> f64 {
    low + (high - low) * rng.random::<f64>()
}

/// Draws all six hyperparameters uniformly from their ranges.
pub fn sample_run_config(master_seed: u64, run_index: u64) -> RunConfig {
    let mut rng = stream(master_seed, run_index, Phase::Config);
    let p_d = uniform(&mut rng, ranges::P_D);
    let omega_count = rng.random_range(ranges::OMEGA_COUNT.0..=ranges::OMEGA_COUNT.1);
    let target_mean_degree = uniform(&mut rng, ranges::TARGET_MEAN_DEGREE);
    let w = uniform(&mut rng, ranges::W);
    let gamma = uniform(&mut rng, ranges::GAMMA);
    let r_v = uniform(&mut rng, ranges::R_V);
    RunConfig {
        run_id: run_index,
        master_seed,
        p_d,
        omega_count,
        target_mean_degree,
        w,
        gamma,
        r_v,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("run {run_id}: generation failed: {source}")]
    Generation { run_id: u64, source: NetgenError },
    #[error("run {run_id}: recruitment failed: {source}")]
    Recruitment {
        run_id: u64,
        source: RecruitmentError,
    },
}

/// Population, samples and forests of one run, kept for inspection.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub population: Population,
    pub forests: Vec<RecruitmentForest>,
    pub result: RunResult,
}

/// Generates the population and runs the golden sample plus all scenarios.
pub fn execute_run_detailed(config: &RunConfig) -> Result<RunArtifacts, RunError> {
    let run_id = config.run_id;
    let mut rng = stream(config.master_seed, run_id, Phase::Population);
    let mut population = Population::generate(config.network(), &mut rng)
        .map_err(|source| RunError::Generation { run_id, source })?;
    let recruit_err = |source| RunError::Recruitment { run_id, source };
    assign_attrition(&mut population, config.r_v, &mut rng).map_err(recruit_err)?;
    let golden = draw_golden_sample(&population, config.r_v, &mut rng).map_err(recruit_err)?;

    let mut scenarios = [ScenarioOutcome::default(); 4];
    let mut forests = Vec::with_capacity(4);
    for scenario in Scenario::ALL {
        let mut srng = stream(config.master_seed, run_id, Phase::Scenario(scenario));
        let (sample, forest) = run_scenario(&population, &golden, scenario, &mut srng);
        scenarios[scenario.index()] = ScenarioOutcome {
            seed_estimate: sample.seed_estimate(&population),
            estimate: sample.estimate,
            size: sample.len(),
            seeds: sample.seeds.len(),
        };
        forests.push(forest);
    }

    let result = RunResult {
        config: *config,
        population_size: population.len(),
        edge_count: population.edges.len(),
        prevalence: population.prevalence(),
        phi_y: population.phi_y,
        phi_k: population.phi_k,
        golden_drawn: golden.drawn.len(),
        golden_size: golden.sample.len(),
        golden_estimate: golden.sample.estimate,
        scenarios,
    };
    Ok(RunArtifacts {
        population,
        forests,
        result,
    })
}

pub fn execute_run(config: &RunConfig) -> Result<RunResult, RunError> {
    execute_run_detailed(config).map(|a| a.result)
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn default_version() -> String {
    ENGINE_VERSION.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub master_seed: u64,
    pub n_runs: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Results CSV; when it already exists, completed runs are skipped.
    #[serde(default)]
    pub results_path: Option<PathBuf>,
    #[serde(default)]
    pub report_path: Option<PathBuf>,
    #[serde(default = "default_version")]
    pub engine_version: String,
}

impl SweepManifest {
    pub fn new(master_seed: u64, n_runs: u64) -> Self {
        Self {
            master_seed,
            n_runs,
            parallelism: default_parallelism(),
            results_path: None,
            report_path: None,
            engine_version: default_version(),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.n_runs == 0 {
            return Err(SweepError::Manifest("n_runs must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(SweepError::Manifest(
                "parallelism must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Sidecar file recording seed and engine version next to the results.
    pub fn echo_path(&self) -> Option<PathBuf> {
        self.results_path.as_ref().map(|p| {
            let mut name = p.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            p.with_file_name(name)
        })
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("results file {path}: {source}")]
    Results {
        path: PathBuf,
        source: crate::evaluation::ResultsError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// Completed runs sorted by run id, including resumed ones.
    pub results: Vec<RunResult>,
    pub failures: Vec<RunError>,
    pub report: EvaluationReport,
    /// Runs taken from an existing results file instead of re-executed.
    pub resumed: usize,
}

fn load_existing(path: &Path) -> Result<Vec<RunResult>, SweepError> {
    if !path.exists() || fs::metadata(path).map_err(io_err(path))?.len() == 0 {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(io_err(path))?;
    read_results(file).map_err(|source| SweepError::Results {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs every pending run of the manifest and evaluates the full table.
pub fn execute_sweep(manifest: &SweepManifest) -> Result<SweepOutcome, SweepError> {
    execute_sweep_with(manifest, execute_run)
}

/// [`execute_sweep`] with a caller-supplied run pipeline. A run that returns
/// an error is logged and left out; the rest of the sweep is unaffected.
pub fn execute_sweep_with<F>(manifest: &SweepManifest, run: F) -> Result<SweepOutcome, SweepError>
where
    F: Fn(&RunConfig) -> Result<RunResult, RunError> + Sync,
{
    manifest.validate()?;
    let mut done: Vec<RunResult> = match &manifest.results_path {
        Some(path) => load_existing(path)?,
        None => Vec::new(),
    };
    done.retain(|r| {
        r.config.run_id < manifest.n_runs && r.config.master_seed == manifest.master_seed
    });
    let completed: BTreeSet<u64> = done.iter().map(|r| r.config.run_id).collect();
    let resumed = completed.len();
    let pending: Vec<u64> = (0..manifest.n_runs)
        .filter(|i| !completed.contains(i))
        .collect();
    info!(
        "sweep seed={} runs={} pending={} workers={}",
        manifest.master_seed,
        manifest.n_runs,
        pending.len(),
        manifest.parallelism
    );

    let sink = match &manifest.results_path {
        Some(path) => {
            // Rewrite what was recovered so a torn final line cannot survive.
            let mut writer =
                csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(io_err(path))?));
            writer.write_record(results_header())?;
            for r in &done {
                writer.write_record(r.to_record())?;
            }
            writer.flush().map_err(io_err(path))?;
            drop(writer);
            let file = OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(io_err(path))?;
            Some(Mutex::new(csv::Writer::from_writer(file)))
        }
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.parallelism)
        .build()?;
    let finished = std::sync::atomic::AtomicUsize::new(0);
    let total = pending.len();
    let outcomes: Vec<Result<RunResult, RunError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&run_index| {
                let config = sample_run_config(manifest.master_seed, run_index);
                let outcome = run(&config);
                match &outcome {
                    Ok(result) => {
                        if let Some(sink) = &sink {
                            let mut w = sink.lock().expect("results sink poisoned");
                            if let Err(e) = w
                                .write_record(result.to_record())
                                .and_then(|_| Ok(w.flush()?))
                            {
                                warn!("could not append run {run_index}: {e}");
                            }
                        }
                    }
                    Err(e) => warn!("{e}"),
                }
                let n = finished.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                log::debug!("run {run_index} finished ({n}/{total})");
                outcome
            })
            .collect()
    });
    drop(sink);

    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => done.push(r),
            Err(e) => failures.push(e),
        }
    }
    done.sort_by_key(|r| r.config.run_id);

    if let Some(path) = &manifest.results_path {
        let tmp = path.with_extension("csv.tmp");
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        crate::evaluation::write_results(BufWriter::new(file), &done)?;
        fs::rename(&tmp, path).map_err(io_err(path))?;
    }
    if let Some(echo) = manifest.echo_path() {
        let file = File::create(&echo).map_err(io_err(&echo))?;
        serde_json::to_writer_pretty(BufWriter::new(file), manifest)?;
    }

    let report = evaluate(&done);
    if let Some(path) = &manifest.report_path {
        let mut file = BufWriter::new(File::create(path).map_err(io_err(path))?);
        serde_json::to_writer_pretty(&mut file, &report)?;
        writeln!(file).map_err(io_err(path))?;
    }

    Ok(SweepOutcome {
        results: done,
        failures,
        report,
        resumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_sampling_is_deterministic_and_in_range() {
        assert_eq!(sample_run_config(7, 3), sample_run_config(7, 3));
        assert_ne!(sample_run_config(7, 3), sample_run_config(7, 4));
        assert_ne!(sample_run_config(7, 3), sample_run_config(8, 3));
        for i in 0..2000 {
            sample_run_config(11, i).validate().unwrap();
        }
    }

    #[test]
    fn phases_use_distinct_streams() {
        let a: u64 = stream(1, 0, Phase::Population).random();
        let b: u64 = stream(1, 0, Phase::Scenario(Scenario::I)).random();
        let c: u64 = stream(1, 1, Phase::Population).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn validation_names_offending_field() {
        let mut c = sample_run_config(1, 0);
        c.gamma = 0.9;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::OutOfRange { name: "gamma", .. })
        ));
    }

    #[test]
    fn manifest_rejects_zero_runs() {
        let m = SweepManifest::new(1, 0);
        assert!(matches!(m.validate(), Err(SweepError::Manifest(_))));
        let json = r#"{"master_seed": 3, "n_runs": 5}"#;
        let parsed: SweepManifest = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.n_runs, 5);
        assert!(parsed.parallelism >= 1);
        assert!(serde_json::from_str::<SweepManifest>(
            r#"{"master_seed": 3, "n_runs": 5, "bogus": 1}"#
        )
        .is_err());
    }

    #[test]
    fn echo_path_sits_next_to_results() {
        let mut m = SweepManifest::new(1, 1);
        m.results_path = Some(PathBuf::from("/tmp/out/results.csv"));
        assert_eq!(
            m.echo_path(),
            Some(PathBuf::from("/tmp/out/results.csv.manifest.json"))
        );
    }
}
