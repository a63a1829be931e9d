//! Golden random sample and the four hybrid probabilistic-snowball scenarios.
//!
//! Every scenario starts from the same golden sample. Seeds recruit a random
//! number of distinct neighbours per stage; a recruit joins the next stage
//! only if it responds (probability `1 - r_j`) and has not been sampled yet.

use std::fmt;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rand_distr::Binomial;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{sample_poisson, ShiftedYule};
use crate::netgen::Population;

/// Golden sample size before attrition is `floor(GOLDEN_TARGET / (1 - r_v))`.
pub const GOLDEN_TARGET: f64 = 1000.0;

/// Rate of the low-dispersion (Poisson) recruit count.
pub const POISSON_RECRUITS: f64 = 0.5;

/// Shape of the high-dispersion (shifted Yule) recruit count; mean 0.5.
pub const YULE_RECRUITS: f64 = 3.0;

/// Hard stop on the number of recruitment waves.
pub const MAX_STAGES: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecruitmentError {
    #[error("universal attrition must lie in [0, 1), got {0}")]
    Attrition(f64),
    #[error("golden sample needs {requested} distinct nodes but the population has {available}")]
    GoldenTooLarge { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    I,
    II,
    III,
    IV,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::I, Scenario::II, Scenario::III, Scenario::IV];

    pub fn label(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::I => 0,
            Self::II => 1,
            Self::III => 2,
            Self::IV => 3,
        }
    }

    /// III and IV seed with a random half of the golden sample.
    pub fn halves_seeds(self) -> bool {
        matches!(self, Self::III | Self::IV)
    }

    pub fn branching(self) -> Branching {
        match self {
            Self::I | Self::III => Branching::Poisson(POISSON_RECRUITS),
            Self::II | Self::IV => {
                Branching::Yule(ShiftedYule::new(YULE_RECRUITS).expect("constant shape"))
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Law of the number of recruits a respondent attempts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branching {
    Poisson(f64),
    Yule(ShiftedYule),
}

impl Branching {
    /// Recruit count capped at the respondent's degree.
    pub fn draw<R: Rng + ?Sized>(&self, degree: usize, rng: &mut R) -> usize {
        let m = match self {
            Self::Poisson(rate) => sample_poisson(*rate, rng).expect("validated rate"),
            Self::Yule(yule) => yule.sample(rng),
        };
        (m as usize).min(degree)
    }
}

/// Fills `r_i ~ Binomial(100, p_r) / 100` with
/// `p_r = r_v + (e_i - mean(e)) / 10 * 0.25`, clamped to `[0, 1]`.
pub fn assign_attrition<R: Rng + ?Sized>(
    population: &mut Population,
    r_v: f64,
    rng: &mut R,
) -> Result<(), RecruitmentError> {
    if !(0.0..1.0).contains(&r_v) {
        return Err(RecruitmentError::Attrition(r_v));
    }
    let mean_e = population.mean_risk();
    for node in population.nodes.iter_mut() {
        let p = (r_v + (node.e - mean_e) / 10.0 * 0.25).clamp(0.0, 1.0);
        let hits = Binomial::new(100, p)
            .expect("clamped probability")
            .sample(rng);
        node.r = hits as f64 / 100.0;
    }
    Ok(())
}

/// Which design produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    Golden,
    Hpssd(Scenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSample {
    pub design: Design,
    /// Every respondent, seeds first, in order of entry.
    pub members: Vec<u32>,
    pub seeds: Vec<u32>,
    /// Mean outcome over members; `None` for an empty sample.
    pub estimate: Option<f64>,
}

impl ScenarioSample {
    fn new(population: &Population, design: Design, seeds: Vec<u32>, members: Vec<u32>) -> Self {
        let estimate = estimate_mean(population, &members);
        Self {
            design,
            members,
            seeds,
            estimate,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mean outcome over the seeds alone (the stage-0 estimate).
    pub fn seed_estimate(&self, population: &Population) -> Option<f64> {
        estimate_mean(population, &self.seeds)
    }
}

/// Arithmetic mean of `y` over `members`; `None` when empty.
pub fn estimate_mean(population: &Population, members: &[u32]) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let hits = members
        .iter()
        .filter(|&&i| population.nodes[i as usize].y)
        .count();
    Some(hits as f64 / members.len() as f64)
}

/// Benchmark sample plus the full list of contacted nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenSample {
    pub drawn: Vec<u32>,
    pub sample: ScenarioSample,
}

pub fn golden_draw_size(r_v: f64) -> usize {
    (GOLDEN_TARGET / (1.0 - r_v)).floor() as usize
}

/// Draws `floor(1000 / (1 - r_v))` distinct nodes; each responds with
/// probability `1 - r_i`.
pub fn draw_golden_sample<R: Rng + ?Sized>(
    population: &Population,
    r_v: f64,
    rng: &mut R,
) -> Result<GoldenSample, RecruitmentError> {
    if !(0.0..1.0).contains(&r_v) {
        return Err(RecruitmentError::Attrition(r_v));
    }
    let requested = golden_draw_size(r_v);
    if requested > population.len() {
        return Err(RecruitmentError::GoldenTooLarge {
            requested,
            available: population.len(),
        });
    }
    let drawn: Vec<u32> = index::sample(rng, population.len(), requested)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    let retained: Vec<u32> = drawn
        .iter()
        .copied()
        .filter(|&i| responds(population, i, rng))
        .collect();
    let sample = ScenarioSample::new(population, Design::Golden, retained.clone(), retained);
    Ok(GoldenSample { drawn, sample })
}

fn responds<R: Rng + ?Sized>(population: &Population, node: u32, rng: &mut R) -> bool {
    rng.random::<f64>() >= population.nodes[node as usize].r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestRecord {
    pub node: u32,
    pub stage: u32,
    pub recruiter: Option<u32>,
}

/// Link-traced recruitment trees of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RecruitmentForest {
    pub scenario: Scenario,
    pub records: Vec<ForestRecord>,
    /// Recruit counts drawn by each processed respondent, after the degree cap.
    pub recruit_draws: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForestViolation {
    SeedWithRecruiter { node: u32 },
    MissingRecruiter { node: u32 },
    StageGap { node: u32, recruiter: u32 },
    NotAnEdge { node: u32, recruiter: u32 },
    Duplicate { node: u32 },
}

impl RecruitmentForest {
    /// `n_t` for every stage, starting at the seeds.
    pub fn stage_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        for rec in &self.records {
            let s = rec.stage as usize;
            if sizes.len() <= s {
                sizes.resize(s + 1, 0);
            }
            sizes[s] += 1;
        }
        sizes
    }

    pub fn validate(&self, population: &Population) -> Result<(), ForestViolation> {
        let mut stage_of = vec![None; population.len()];
        for rec in &self.records {
            if stage_of[rec.node as usize].replace(rec.stage).is_some() {
                return Err(ForestViolation::Duplicate { node: rec.node });
            }
        }
        for rec in &self.records {
            match (rec.stage, rec.recruiter) {
                (0, Some(_)) => return Err(ForestViolation::SeedWithRecruiter { node: rec.node }),
                (0, None) => {}
                (_, None) => return Err(ForestViolation::MissingRecruiter { node: rec.node }),
                (stage, Some(recruiter)) => {
                    if stage_of[recruiter as usize] != Some(stage - 1) {
                        return Err(ForestViolation::StageGap {
                            node: rec.node,
                            recruiter,
                        });
                    }
                    if !population
                        .adjacency
                        .neighbors(recruiter)
                        .contains(&rec.node)
                    {
                        return Err(ForestViolation::NotAnEdge {
                            node: rec.node,
                            recruiter,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Writes `scenario,node_id,stage,recruiter_id`; the recruiter is empty for seeds.
pub fn write_forests_csv<'a, W, I>(out: W, forests: I) -> csv::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RecruitmentForest>,
{
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["scenario", "node_id", "stage", "recruiter_id"])?;
    for forest in forests {
        for rec in &forest.records {
            writer.write_record([
                forest.scenario.label().to_string(),
                rec.node.to_string(),
                rec.stage.to_string(),
                rec.recruiter.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Runs one hybrid scenario from `golden`.
pub fn run_scenario<R: Rng + ?Sized>(
    population: &Population,
    golden: &GoldenSample,
    scenario: Scenario,
    rng: &mut R,
) -> (ScenarioSample, RecruitmentForest) {
    let pool = &golden.sample.members;
    let seeds: Vec<u32> = if scenario.halves_seeds() {
        let mut picked = index::sample(rng, pool.len(), pool.len() / 2).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| pool[i]).collect()
    } else {
        pool.clone()
    };
    snowball(population, seeds, scenario, rng)
}

/// Link-traced recruitment from an explicit seed set.
pub fn snowball<R: Rng + ?Sized>(
    population: &Population,
    seeds: Vec<u32>,
    scenario: Scenario,
    rng: &mut R,
) -> (ScenarioSample, RecruitmentForest) {
    let branching = scenario.branching();
    let mut sampled = vec![false; population.len()];
    let mut records: Vec<ForestRecord> = Vec::with_capacity(seeds.len() * 2);
    let mut recruit_draws = Vec::with_capacity(seeds.len() * 2);
    for &s in &seeds {
        sampled[s as usize] = true;
        records.push(ForestRecord {
            node: s,
            stage: 0,
            recruiter: None,
        });
    }

    let mut wave_start = 0;
    let mut stage = 0u32;
    while wave_start < records.len() && stage < MAX_STAGES {
        let wave_end = records.len();
        for w in wave_start..wave_end {
            let recruiter = records[w].node;
            let neighbors = population.adjacency.neighbors(recruiter);
            let m = branching.draw(neighbors.len(), rng);
            recruit_draws.push(m);
            if m == 0 {
                continue;
            }
            for pick in index::sample(rng, neighbors.len(), m) {
                let j = neighbors[pick];
                if sampled[j as usize] {
                    continue;
                }
                if responds(population, j, rng) {
                    sampled[j as usize] = true;
                    records.push(ForestRecord {
                        node: j,
                        stage: stage + 1,
                        recruiter: Some(recruiter),
                    });
                }
            }
        }
        wave_start = wave_end;
        stage += 1;
    }

    let members = records.iter().map(|r| r.node).collect();
    let sample = ScenarioSample::new(population, Design::Hpssd(scenario), seeds, members);
    let forest = RecruitmentForest {
        scenario,
        records,
        recruit_draws,
    };
    (sample, forest)
}
