//! Performance statistics of the hybrid designs against the golden sample,
//! computed over a table of completed runs.
//!
//! Orientation: a positive `delta` and a run counted by `zeta` both mean the
//! hybrid estimate had the smaller absolute error.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::RunConfig;
use crate::recruitment::Scenario;
use crate::stats::{mean, ols, sample_variance, standardize, OlsError};

/// Per-scenario outcome of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScenarioOutcome {
    /// Mean outcome over the scenario's seeds.
    pub seed_estimate: Option<f64>,
    /// Mean outcome over the whole hybrid sample.
    pub estimate: Option<f64>,
    pub size: usize,
    pub seeds: usize,
}

/// Everything recorded about one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: RunConfig,
    pub population_size: usize,
    pub edge_count: usize,
    pub prevalence: f64,
    pub phi_y: Option<f64>,
    pub phi_k: Option<f64>,
    pub golden_drawn: usize,
    pub golden_size: usize,
    pub golden_estimate: Option<f64>,
    pub scenarios: [ScenarioOutcome; 4],
}

impl RunResult {
    pub fn scenario(&self, scenario: Scenario) -> &ScenarioOutcome {
        &self.scenarios[scenario.index()]
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count as f64 / self.population_size as f64
    }

    /// Truth, benchmark and hybrid estimate when both estimates are defined.
    ///
    /// The benchmark is the scenario's own random stage 0: the golden sample
    /// for I and II, its random half for III and IV.
    pub fn paired(&self, scenario: Scenario) -> Option<PairedEstimate> {
        let outcome = self.scenario(scenario);
        Some(PairedEstimate {
            truth: self.prevalence,
            benchmark: outcome.seed_estimate?,
            alternative: outcome.estimate?,
        })
    }
}

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("results header does not match the expected layout")]
    Header,
    #[error("row {row}: column `{column}`: cannot parse {value:?}")]
    Field {
        row: usize,
        column: String,
        value: String,
    },
    #[error("results file holds no rows")]
    Empty,
}

const CONFIG_COLUMNS: [&str; 8] = [
    "run_id",
    "master_seed",
    "p_d",
    "omega_count",
    "target_mean_degree",
    "w",
    "gamma",
    "r_v",
];

const RUN_COLUMNS: [&str; 8] = [
    "n_nodes",
    "n_edges",
    "y",
    "phi_y",
    "phi_k",
    "golden_drawn",
    "golden_n",
    "y_hat_golden",
];

const SCENARIO_COLUMNS: [&str; 4] = ["y_hat0", "y_hat", "n", "n0"];

/// Column names of the results CSV.
pub fn results_header() -> Vec<String> {
    let mut header: Vec<String> = CONFIG_COLUMNS
        .iter()
        .chain(RUN_COLUMNS.iter())
        .map(|s| s.to_string())
        .collect();
    for scenario in Scenario::ALL {
        for col in SCENARIO_COLUMNS {
            header.push(format!("{col}_{}", scenario.label()));
        }
    }
    header
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunResult {
    pub fn to_record(&self) -> Vec<String> {
        let c = &self.config;
        let mut rec = vec![
            c.run_id.to_string(),
            c.master_seed.to_string(),
            c.p_d.to_string(),
            c.omega_count.to_string(),
            c.target_mean_degree.to_string(),
            c.w.to_string(),
            c.gamma.to_string(),
            c.r_v.to_string(),
            self.population_size.to_string(),
            self.edge_count.to_string(),
            self.prevalence.to_string(),
            fmt_opt(self.phi_y),
            fmt_opt(self.phi_k),
            self.golden_drawn.to_string(),
            self.golden_size.to_string(),
            fmt_opt(self.golden_estimate),
        ];
        for s in &self.scenarios {
            rec.push(fmt_opt(s.seed_estimate));
            rec.push(fmt_opt(s.estimate));
            rec.push(s.size.to_string());
            rec.push(s.seeds.to_string());
        }
        rec
    }

    pub fn from_record(record: &csv::StringRecord, row: usize) -> Result<Self, ResultsError> {
        let header = results_header();
        if record.len() != header.len() {
            return Err(ResultsError::Field {
                row,
                column: "<row length>".into(),
                value: record.len().to_string(),
            });
        }
        let field = |i: usize| -> &str { &record[i] };
        let bad = |i: usize| ResultsError::Field {
            row,
            column: header[i].clone(),
            value: record[i].to_string(),
        };
        let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(i));
        let opt = |i: usize| -> Result<Option<f64>, ResultsError> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };

        let config = RunConfig {
            run_id: int(0)?,
            master_seed: int(1)?,
            p_d: num(2)?,
            omega_count: int(3)? as u32,
            target_mean_degree: num(4)?,
            w: num(5)?,
            gamma: num(6)?,
            r_v: num(7)?,
        };
        let mut scenarios = [ScenarioOutcome::default(); 4];
        for (k, s) in scenarios.iter_mut().enumerate() {
            let base = 16 + 4 * k;
            *s = ScenarioOutcome {
                seed_estimate: opt(base)?,
                estimate: opt(base + 1)?,
                size: int(base + 2)? as usize,
                seeds: int(base + 3)? as usize,
            };
        }
        Ok(Self {
            config,
            population_size: int(8)? as usize,
            edge_count: int(9)? as usize,
            prevalence: num(10)?,
            phi_y: opt(11)?,
            phi_k: opt(12)?,
            golden_drawn: int(13)? as usize,
            golden_size: int(14)? as usize,
            golden_estimate: opt(15)?,
            scenarios,
        })
    }
}

/// Writes a header and one row per run, in the given order.
pub fn write_results<W: Write>(out: W, results: &[RunResult]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(results_header())?;
    for r in results {
        writer.write_record(r.to_record())?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses a results CSV, rejecting a foreign header or malformed rows.
pub fn read_results<R: Read>(input: R) -> Result<Vec<RunResult>, ResultsError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header
        .iter()
        .ne(results_header().iter().map(String::as_str))
    {
        return Err(ResultsError::Header);
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        out.push(RunResult::from_record(&record?, row + 1)?);
    }
    Ok(out)
}

/// Truth with the benchmark and hybrid estimates of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedEstimate {
    pub truth: f64,
    pub benchmark: f64,
    pub alternative: f64,
}

impl PairedEstimate {
    pub fn benchmark_error(&self) -> f64 {
        (self.truth - self.benchmark).abs()
    }

    pub fn alternative_error(&self) -> f64 {
        (self.truth - self.alternative).abs()
    }

    pub fn alternative_wins(&self) -> bool {
        self.benchmark_error() > self.alternative_error()
    }
}

/// Relative improvement in absolute error, `(|y - bench| - |y - hpssd|) / y`.
pub fn delta(truth: f64, benchmark: f64, alternative: f64) -> Option<f64> {
    if truth == 0.0 {
        return None;
    }
    Some(((truth - benchmark).abs() - (truth - alternative).abs()) / truth)
}

/// Share of runs where the benchmark error strictly exceeds the hybrid error.
pub fn zeta(runs: &[PairedEstimate]) -> Option<f64> {
    if runs.is_empty() {
        return None;
    }
    let wins = runs.iter().filter(|p| p.alternative_wins()).count();
    Some(wins as f64 / runs.len() as f64)
}

/// Variance-reduction rate `1 - s2(y - hpssd) / s2(y - bench)`.
pub fn psi(runs: &[PairedEstimate]) -> Option<f64> {
    let alt: Vec<f64> = runs.iter().map(|p| p.truth - p.alternative).collect();
    let bench: Vec<f64> = runs.iter().map(|p| p.truth - p.benchmark).collect();
    let denom = sample_variance(&bench)?;
    if denom <= 0.0 {
        return None;
    }
    Some(1.0 - sample_variance(&alt)? / denom)
}

/// Mean signed deviation of the hybrid estimate, `avg(hpssd - y)`; negative
/// when the design underestimates.
pub fn bias_estimate(runs: &[PairedEstimate]) -> Option<f64> {
    let errs: Vec<f64> = runs.iter().map(|p| p.alternative - p.truth).collect();
    mean(&errs)
}

/// Subtracts a global bias and clamps to the unit interval.
pub fn debias(estimate: f64, bias: f64) -> f64 {
    (estimate - bias).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub std_error: f64,
}

/// OLS slope of z(err) on z(x); equals their Pearson correlation.
pub fn standardized_bivariate_regression(x: &[f64], err: &[f64]) -> Option<Coefficient> {
    if x.len() < 3 || x.len() != err.len() {
        return None;
    }
    let zx = standardize(x)?;
    let zy = standardize(err)?;
    let fit = ols(&[&zx], &zy).ok()?;
    Some(Coefficient {
        estimate: fit.coefficients[1],
        std_error: fit.std_errors[1],
    })
}

/// Standardized multiple regression of `response` on the given regressors;
/// slopes only, intercept dropped.
pub fn standardized_multiple_regression(
    regressors: &[&[f64]],
    response: &[f64],
) -> Result<Vec<Coefficient>, OlsError> {
    let n = response.len();
    let constant = || OlsError::RankDeficient { pivot: 0 };
    let zy = match standardize(response) {
        Some(z) => z,
        // A constant response has nothing to explain.
        None if n > regressors.len() + 1 => {
            return Ok(vec![
                Coefficient {
                    estimate: 0.0,
                    std_error: 0.0
                };
                regressors.len()
            ])
        }
        None => {
            return Err(OlsError::TooFewObservations {
                observations: n,
                parameters: regressors.len() + 1,
            })
        }
    };
    let zx: Vec<Vec<f64>> = regressors
        .iter()
        .map(|c| standardize(c).ok_or_else(constant))
        .collect::<Result<_, _>>()?;
    let cols: Vec<&[f64]> = zx.iter().map(Vec::as_slice).collect();
    let fit = ols(&cols, &zy)?;
    Ok((1..fit.coefficients.len())
        .map(|i| Coefficient {
            estimate: fit.coefficients[i],
            std_error: fit.std_errors[i],
        })
        .collect())
}

/// Slopes of `delta ~ (n - n0) + gamma + r_v`, standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateCheck {
    pub snowball_size: Coefficient,
    pub gamma: Coefficient,
    pub attrition: Coefficient,
}

pub fn multivariate_check(
    results: &[RunResult],
    scenario: Scenario,
) -> Result<MultivariateCheck, OlsError> {
    let mut deltas = Vec::new();
    let mut growth = Vec::new();
    let mut gammas = Vec::new();
    let mut attrition = Vec::new();
    for r in results {
        let Some(p) = r.paired(scenario) else {
            continue;
        };
        let Some(d) = delta(p.truth, p.benchmark, p.alternative) else {
            continue;
        };
        let s = r.scenario(scenario);
        deltas.push(d);
        growth.push((s.size - s.seeds) as f64);
        gammas.push(r.config.gamma);
        attrition.push(r.config.r_v);
    }
    if deltas.len() < 5 {
        return Err(OlsError::TooFewObservations {
            observations: deltas.len(),
            parameters: 4,
        });
    }
    let b = standardized_multiple_regression(&[&growth, &gammas, &attrition], &deltas)?;
    Ok(MultivariateCheck {
        snowball_size: b[0],
        gamma: b[1],
        attrition: b[2],
    })
}

/// Homophily quartile labels, lowest gamma first.
pub const QUARTILE_LABELS: [&str; 4] = ["Low", "Mid-Low", "Mid-High", "High"];

/// Splits runs into four near-equal groups by rank of gamma (ties broken by
/// run id). Returns the group of each input position; `None` when fewer than
/// eight runs are given.
pub fn gamma_quartiles(results: &[RunResult]) -> Option<Vec<usize>> {
    let n = results.len();
    if n < 8 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        results[a]
            .config
            .gamma
            .total_cmp(&results[b].config.gamma)
            .then(results[a].config.run_id.cmp(&results[b].config.run_id))
    });
    let mut group = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        group[i] = rank * 4 / n;
    }
    Some(group)
}

/// A statistic by gamma quartile and over all runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileTable {
    pub low: Option<f64>,
    pub mid_low: Option<f64>,
    pub mid_high: Option<f64>,
    pub high: Option<f64>,
    pub all: Option<f64>,
}

impl QuartileTable {
    pub fn quartiles(&self) -> [Option<f64>; 4] {
        [self.low, self.mid_low, self.mid_high, self.high]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuartileStatistic {
    MeanDelta,
    Zeta,
    /// Zeta after removing the given global bias from every hybrid estimate.
    DebiasedZeta,
}

/// Computes `statistic` inside each gamma quartile and overall.
pub fn quartile_breakdown(
    results: &[RunResult],
    statistic: QuartileStatistic,
    scenario: Scenario,
    bias: Option<f64>,
) -> QuartileTable {
    let compute = |subset: &[&RunResult]| -> Option<f64> {
        let pairs: Vec<PairedEstimate> = subset.iter().filter_map(|r| r.paired(scenario)).collect();
        match statistic {
            QuartileStatistic::MeanDelta => {
                let d: Vec<f64> = pairs
                    .iter()
                    .filter_map(|p| delta(p.truth, p.benchmark, p.alternative))
                    .collect();
                mean(&d)
            }
            QuartileStatistic::Zeta => zeta(&pairs),
            QuartileStatistic::DebiasedZeta => {
                let b = bias?;
                let adjusted: Vec<PairedEstimate> = pairs
                    .iter()
                    .map(|p| PairedEstimate {
                        alternative: debias(p.alternative, b),
                        ..*p
                    })
                    .collect();
                zeta(&adjusted)
            }
        }
    };
    let everything: Vec<&RunResult> = results.iter().collect();
    let all = compute(&everything);
    let mut cells = [None; 4];
    if let Some(groups) = gamma_quartiles(results) {
        for (q, cell) in cells.iter_mut().enumerate() {
            let subset: Vec<&RunResult> = results
                .iter()
                .zip(&groups)
                .filter(|(_, &g)| g == q)
                .map(|(r, _)| r)
                .collect();
            *cell = compute(&subset);
        }
    }
    QuartileTable {
        low: cells[0],
        mid_low: cells[1],
        mid_high: cells[2],
        high: cells[3],
        all,
    }
}

/// Regressors of the bivariate absolute-error table, in display order.
pub const REGRESSORS: [(&str, &str); 7] = [
    ("y_hat0", "Stage 0"),
    ("gamma", "Homophily"),
    ("w", "Familism"),
    ("r", "Attrition"),
    ("k", "Ego-nets size"),
    ("y", "Target Quota"),
    ("N", "Pop. Size"),
];

fn regressor_value(r: &RunResult, name: &str, scenario: Scenario) -> Option<f64> {
    match name {
        "y_hat0" => r.scenario(scenario).seed_estimate,
        "gamma" => Some(r.config.gamma),
        "w" => Some(r.config.w),
        "r" => Some(r.config.r_v),
        "k" => Some(r.config.target_mean_degree),
        "y" => Some(r.prevalence),
        "N" => Some(r.population_size as f64),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub regressor: String,
    pub concept: String,
    pub coefficient: Option<Coefficient>,
}

/// Bivariate standardized regressions of `|y - hpssd|` on each regressor.
pub fn regression_table(results: &[RunResult], scenario: Scenario) -> Vec<RegressionRow> {
    REGRESSORS
        .iter()
        .map(|&(name, concept)| {
            let mut xs = Vec::new();
            let mut errs = Vec::new();
            for r in results {
                let (Some(p), Some(x)) = (r.paired(scenario), regressor_value(r, name, scenario))
                else {
                    continue;
                };
                xs.push(x);
                errs.push(p.alternative_error());
            }
            RegressionRow {
                regressor: name.to_string(),
                concept: concept.to_string(),
                coefficient: standardized_bivariate_regression(&xs, &errs),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub valid_runs: usize,
    pub mean_delta: QuartileTable,
    pub zeta: QuartileTable,
    pub zeta_debiased: QuartileTable,
    pub psi: Option<f64>,
    pub bias: Option<f64>,
    pub regressions: Vec<RegressionRow>,
    pub multivariate: Option<MultivariateCheck>,
    pub multivariate_diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub runs: usize,
    /// Share of runs with `phi_k > phi_y`.
    pub phi_k_exceeds_phi_y: Option<f64>,
    pub scenarios: Vec<ScenarioReport>,
}

impl EvaluationReport {
    pub fn scenario(&self, scenario: Scenario) -> &ScenarioReport {
        &self.scenarios[scenario.index()]
    }
}

/// Full report over a run table. Input order does not matter.
pub fn evaluate(results: &[RunResult]) -> EvaluationReport {
    let mut sorted: Vec<RunResult> = results.to_vec();
    sorted.sort_by_key(|r| r.config.run_id);
    let results = &sorted[..];

    let phi_pairs: Vec<bool> = results
        .iter()
        .filter_map(|r| Some(r.phi_k? > r.phi_y?))
        .collect();
    let phi_k_exceeds_phi_y = (!phi_pairs.is_empty())
        .then(|| phi_pairs.iter().filter(|&&b| b).count() as f64 / phi_pairs.len() as f64);

    let scenarios = Scenario::ALL
        .iter()
        .map(|&scenario| {
            let pairs: Vec<PairedEstimate> =
                results.iter().filter_map(|r| r.paired(scenario)).collect();
            let bias = bias_estimate(&pairs);
            let (multivariate, multivariate_diagnostic) =
                match multivariate_check(results, scenario) {
                    Ok(fit) => (Some(fit), None),
                    Err(e) => (None, Some(e.to_string())),
                };
            ScenarioReport {
                scenario,
                valid_runs: pairs.len(),
                mean_delta: quartile_breakdown(
                    results,
                    QuartileStatistic::MeanDelta,
                    scenario,
                    None,
                ),
                zeta: quartile_breakdown(results, QuartileStatistic::Zeta, scenario, None),
                zeta_debiased: quartile_breakdown(
                    results,
                    QuartileStatistic::DebiasedZeta,
                    scenario,
                    bias,
                ),
                psi: psi(&pairs),
                bias,
                regressions: regression_table(results, scenario),
                multivariate,
                multivariate_diagnostic,
            }
        })
        .collect();

    EvaluationReport {
        runs: results.len(),
        phi_k_exceeds_phi_y,
        scenarios,
    }
}

/// Per-scenario lookup of the regression rows, keyed by regressor name.
pub fn regression_map(report: &ScenarioReport) -> BTreeMap<&str, Option<Coefficient>> {
    report
        .regressions
        .iter()
        .map(|row| (row.regressor.as_str(), row.coefficient))
        .collect()
}
