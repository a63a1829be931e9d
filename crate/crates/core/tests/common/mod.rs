#![allow(dead_code)]

use hpssd_core::distributions::Level;
use hpssd_core::evaluation::ScenarioOutcome;
use hpssd_core::netgen::{Edge, EdgeKind, NetworkParams, Node};
use hpssd_core::{Population, RunConfig, RunResult};

pub fn params() -> NetworkParams {
    NetworkParams {
        omega_count: 1,
        p_d: 0.2,
        target_mean_degree: 5.0,
        w: 0.3,
        gamma: 0.5,
    }
}

/// Population over an explicit edge set; degrees follow the edges.
pub fn population(ys: &[bool], pairs: &[(u32, u32)]) -> Population {
    let mut degree = vec![0u32; ys.len()];
    let mut edges: Vec<Edge> = pairs
        .iter()
        .map(|&(a, b)| {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
            Edge {
                a: a.min(b),
                b: a.max(b),
                kind: EdgeKind::Block,
            }
        })
        .collect();
    edges.sort();
    let level = Level::new(2).unwrap();
    let nodes = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| Node {
            id: i as u32,
            clique: i as u32,
            alpha: level,
            beta: level,
            e: level.value(),
            y,
            r: 0.0,
            degree: degree[i],
        })
        .collect();
    Population::assemble(params(), nodes, edges, Vec::new())
}

/// Synthetic run row with the given truth and, for every scenario, the same
/// seed and hybrid estimates.
pub fn run_row(run_id: u64, gamma: f64, truth: f64, seed_est: f64, est: f64) -> RunResult {
    let outcome = ScenarioOutcome {
        seed_estimate: Some(seed_est),
        estimate: Some(est),
        size: 1500 + run_id as usize % 7,
        seeds: 1000,
    };
    RunResult {
        config: RunConfig {
            run_id,
            master_seed: 1,
            p_d: 0.2,
            omega_count: 10_000,
            target_mean_degree: 10.0 + (run_id % 5) as f64,
            w: 0.1 + 0.01 * (run_id % 11) as f64,
            gamma,
            r_v: 0.05 * (run_id % 9) as f64,
        },
        population_size: 22_000 + run_id as usize,
        edge_count: 110_000,
        prevalence: truth,
        phi_y: Some(0.02),
        phi_k: Some(0.07),
        golden_drawn: 1000,
        golden_size: 1000,
        golden_estimate: Some(seed_est),
        scenarios: [outcome; 4],
    }
}
