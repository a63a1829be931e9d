//! Cliques-and-blocks population generator.
//!
//! A population is built in layers: households (cliques) sharing an `alpha`
//! risk level, independent block levels `beta` per node, a Poisson
//! stochastic-blockmodel edge layer grafted onto the clique edges, and finally
//! risk scores and binary outcomes.

use std::io::Write;

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{
    sample_clique_size, sample_level_with, sample_poisson, DistError, Level, OverdispersedBinomial,
    LEVEL_COUNT, LEVEL_RHO, LEVEL_TRIALS,
};
use crate::mixing::{MixingError, MixingMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetgenError {
    #[error(transparent)]
    Distribution(#[from] DistError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error("parameter `{name}` out of domain: {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("population has no nodes")]
    Empty,
}

/// Hyperparameters of one generated network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub omega_count: u32,
    pub p_d: f64,
    pub target_mean_degree: f64,
    pub w: f64,
    pub gamma: f64,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<(), NetgenError> {
        if self.omega_count == 0 {
            return Err(NetgenError::Parameter {
                name: "omega_count",
                value: 0.0,
            });
        }
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(NetgenError::Parameter {
                name: "p_d",
                value: self.p_d,
            });
        }
        if !(self.target_mean_degree >= 0.0 && self.target_mean_degree.is_finite()) {
            return Err(NetgenError::Parameter {
                name: "target_mean_degree",
                value: self.target_mean_degree,
            });
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(NetgenError::Parameter {
                name: "w",
                value: self.w,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: u32,
    pub clique: u32,
    pub alpha: Level,
    pub beta: Level,
    /// Risk score `alpha * w + beta * (1 - w)`.
    pub e: f64,
    pub y: bool,
    /// Individual attrition, filled in by recruitment.
    pub r: f64,
    pub degree: u32,
}

impl Node {
    fn new(id: u32, clique: u32, alpha: Level) -> Self {
        Self {
            id,
            clique,
            alpha,
            beta: alpha,
            e: 0.0,
            y: false,
            r: 0.0,
            degree: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Clique,
    Block,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clique => "clique",
            Self::Block => "block",
        }
    }
}

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub kind: EdgeKind,
}

/// Compressed neighbour lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    pub fn from_edges(node_count: usize, edges: &[Edge]) -> Self {
        let mut counts = vec![0usize; node_count + 1];
        for e in edges {
            counts[e.a as usize + 1] += 1;
            counts[e.b as usize + 1] += 1;
        }
        for i in 0..node_count {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; offsets[node_count]];
        for e in edges {
            targets[cursor[e.a as usize]] = e.b;
            cursor[e.a as usize] += 1;
            targets[cursor[e.b as usize]] = e.a;
            cursor[e.b as usize] += 1;
        }
        Self { offsets, targets }
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        let i = node as usize;
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.neighbors(node).len()
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }
}

/// Households with their shared `alpha` and all within-household edges.
#[derive(Debug, Clone)]
pub struct CliqueLayer {
    pub nodes: Vec<Node>,
    pub edges: Vec<(u32, u32)>,
}

impl CliqueLayer {
    /// Mean degree induced by clique edges alone.
    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.nodes.len() as f64
        }
    }
}

pub fn generate_cliques<R: Rng + ?Sized>(
    omega_count: u32,
    p_d: f64,
    rng: &mut R,
) -> Result<CliqueLayer, NetgenError> {
    let level = OverdispersedBinomial::new(LEVEL_TRIALS, p_d, LEVEL_RHO)?;
    let mut nodes = Vec::with_capacity(omega_count as usize * 3);
    let mut edges = Vec::with_capacity(omega_count as usize * 2);
    for clique in 0..omega_count {
        let size = sample_clique_size(rng);
        let alpha = sample_level_with(&level, rng);
        let first = nodes.len() as u32;
        for offset in 0..size {
            nodes.push(Node::new(first + offset, clique, alpha));
        }
        for i in first..first + size {
            for j in i + 1..first + size {
                edges.push((i, j));
            }
        }
    }
    Ok(CliqueLayer { nodes, edges })
}

/// Gives every node an independent block level, regardless of its clique.
pub fn assign_blocks<R: Rng + ?Sized>(
    nodes: &mut [Node],
    p_d: f64,
    rng: &mut R,
) -> Result<(), NetgenError> {
    let level = OverdispersedBinomial::new(LEVEL_TRIALS, p_d, LEVEL_RHO)?;
    for node in nodes.iter_mut() {
        node.beta = sample_level_with(&level, rng);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GenerationWarning {
    /// The clique layer alone already meets or exceeds the degree target.
    TargetBelowCliqueDegree {
        target: f64,
        clique_mean_degree: f64,
    },
}

impl std::fmt::Display for GenerationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TargetBelowCliqueDegree {
                target,
                clique_mean_degree,
            } => write!(
                f,
                "target mean degree {target} is not above the clique mean degree {clique_mean_degree}; no block edges drawn"
            ),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BlockEdges {
    /// Sampled edges with self-loops removed; duplicates are left to [`graft`].
    pub edges: Vec<(u32, u32)>,
    pub warning: Option<GenerationWarning>,
}

/// Poisson stochastic-blockmodel edge layer.
///
/// The edge count is `Poisson((target - clique_mean_degree) * N / 2)`. Each
/// edge picks an ordered block pair with probability proportional to
/// `B[b][b'] * |b| * |b'|` and then a uniform node inside each block.
pub fn sample_block_edges<R: Rng + ?Sized>(
    nodes: &[Node],
    matrix: &MixingMatrix,
    target_mean_degree: f64,
    clique_mean_degree: f64,
    rng: &mut R,
) -> Result<BlockEdges, NetgenError> {
    let n = nodes.len() as f64;
    let excess = target_mean_degree - clique_mean_degree;
    if excess <= 0.0 {
        let warning = GenerationWarning::TargetBelowCliqueDegree {
            target: target_mean_degree,
            clique_mean_degree,
        };
        if excess < 0.0 {
            warn!("target mean degree {target_mean_degree} below clique mean degree {clique_mean_degree}; no block edges");
        }
        return Ok(BlockEdges {
            edges: Vec::new(),
            warning: Some(warning),
        });
    }

    let mut members: Vec<Vec<u32>> = vec![Vec::new(); LEVEL_COUNT];
    for node in nodes {
        members[node.beta.index()].push(node.id);
    }
    let mut weights = Vec::with_capacity(LEVEL_COUNT * LEVEL_COUNT);
    for from in 0..LEVEL_COUNT {
        for to in 0..LEVEL_COUNT {
            weights
                .push(matrix.get(from, to) * members[from].len() as f64 * members[to].len() as f64);
        }
    }
    let pairs = match WeightedIndex::new(&weights) {
        Ok(pairs) => pairs,
        // A single-node population has nothing to connect.
        Err(_) => return Ok(BlockEdges::default()),
    };

    let total = sample_poisson(excess * n / 2.0, rng)? as usize;
    let mut edges = Vec::with_capacity(total);
    for _ in 0..total {
        let pair = pairs.sample(rng);
        let from = &members[pair / LEVEL_COUNT];
        let to = &members[pair % LEVEL_COUNT];
        let a = from[rng.random_range(0..from.len())];
        let b = to[rng.random_range(0..to.len())];
        if a != b {
            edges.push((a, b));
        }
    }
    Ok(BlockEdges {
        edges,
        warning: None,
    })
}

#[derive(Debug, Clone)]
pub struct Grafted {
    pub edges: Vec<Edge>,
    pub degrees: Vec<u32>,
}

/// Union of the two edge layers without duplicates or self-loops. An edge
/// present in both layers keeps clique provenance.
pub fn graft(
    node_count: usize,
    clique_edges: &[(u32, u32)],
    block_edges: &[(u32, u32)],
) -> Grafted {
    let tagged = clique_edges
        .iter()
        .map(|&p| (p, EdgeKind::Clique))
        .chain(block_edges.iter().map(|&p| (p, EdgeKind::Block)));
    let mut edges: Vec<Edge> = tagged
        .filter(|((a, b), _)| a != b)
        .map(|((a, b), kind)| Edge {
            a: a.min(b),
            b: a.max(b),
            kind,
        })
        .collect();
    edges.sort_unstable();
    edges.dedup_by_key(|e| (e.a, e.b));

    let mut degrees = vec![0u32; node_count];
    for e in &edges {
        degrees[e.a as usize] += 1;
        degrees[e.b as usize] += 1;
    }
    Grafted { edges, degrees }
}

pub fn compute_risk_scores(nodes: &mut [Node], w: f64) -> Result<(), NetgenError> {
    if !(0.0..=1.0).contains(&w) {
        return Err(NetgenError::Parameter {
            name: "w",
            value: w,
        });
    }
    for node in nodes.iter_mut() {
        node.e = node.alpha.value() * w + node.beta.value() * (1.0 - w);
    }
    Ok(())
}

pub fn assign_outcomes<R: Rng + ?Sized>(nodes: &mut [Node], rng: &mut R) {
    for node in nodes.iter_mut() {
        node.y = rng.random::<f64>() < node.e;
    }
}

/// Pearson correlation of `value` across edge endpoints, each undirected edge
/// contributing both orderings. `None` when the endpoint values have zero
/// variance or there are no edges.
pub fn edge_assortativity<F>(edges: &[Edge], value: F) -> Option<f64>
where
    F: Fn(u32) -> f64,
{
    if edges.is_empty() {
        return None;
    }
    let ends = 2.0 * edges.len() as f64;
    let mean = edges.iter().map(|e| value(e.a) + value(e.b)).sum::<f64>() / ends;
    let mut cross = 0.0;
    let mut spread = 0.0;
    for e in edges {
        let da = value(e.a) - mean;
        let db = value(e.b) - mean;
        cross += 2.0 * da * db;
        spread += da * da + db * db;
    }
    if spread <= 0.0 {
        return None;
    }
    Some((cross / spread).clamp(-1.0, 1.0))
}

/// A fully generated cliques-and-blocks population.
#[derive(Debug, Clone)]
pub struct Population {
    pub params: NetworkParams,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub adjacency: Adjacency,
    pub phi_y: Option<f64>,
    pub phi_k: Option<f64>,
    pub warnings: Vec<GenerationWarning>,
}

impl Population {
    pub fn generate<R: Rng + ?Sized>(
        params: NetworkParams,
        rng: &mut R,
    ) -> Result<Self, NetgenError> {
        params.validate()?;
        let matrix = MixingMatrix::with_gamma(params.gamma)?;

        let CliqueLayer {
            mut nodes,
            edges: clique_edges,
        } = generate_cliques(params.omega_count, params.p_d, rng)?;
        if nodes.is_empty() {
            return Err(NetgenError::Empty);
        }
        let clique_mean_degree = 2.0 * clique_edges.len() as f64 / nodes.len() as f64;
        assign_blocks(&mut nodes, params.p_d, rng)?;
        let block = sample_block_edges(
            &nodes,
            &matrix,
            params.target_mean_degree,
            clique_mean_degree,
            rng,
        )?;
        let Grafted { edges, degrees } = graft(nodes.len(), &clique_edges, &block.edges);
        for (node, degree) in nodes.iter_mut().zip(degrees) {
            node.degree = degree;
        }
        compute_risk_scores(&mut nodes, params.w)?;
        assign_outcomes(&mut nodes, rng);

        Ok(Self::assemble(
            params,
            nodes,
            edges,
            block.warning.into_iter().collect(),
        ))
    }

    /// Builds adjacency and homophily statistics around a finished node table.
    pub fn assemble(
        params: NetworkParams,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        warnings: Vec<GenerationWarning>,
    ) -> Self {
        let adjacency = Adjacency::from_edges(nodes.len(), &edges);
        let phi_y = edge_assortativity(&edges, |i| f64::from(u8::from(nodes[i as usize].y)));
        let phi_k = edge_assortativity(&edges, |i| f64::from(nodes[i as usize].degree));
        Self {
            params,
            nodes,
            edges,
            adjacency,
            phi_y,
            phi_k,
            warnings,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Population quota of `y = 1`.
    pub fn prevalence(&self) -> f64 {
        self.nodes.iter().filter(|n| n.y).count() as f64 / self.nodes.len() as f64
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.nodes.len() as f64
    }

    pub fn mean_risk(&self) -> f64 {
        self.nodes.iter().map(|n| n.e).sum::<f64>() / self.nodes.len() as f64
    }

    /// One edge per line: `id1<TAB>id2<TAB>provenance`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{}\t{}\t{}", e.a, e.b, e.kind.as_str())?;
        }
        Ok(())
    }

    /// CSV with header `id,clique,alpha,beta,e,y,r,degree`.
    pub fn write_node_table<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["id", "clique", "alpha", "beta", "e", "y", "r", "degree"])?;
        for n in &self.nodes {
            writer.write_record([
                n.id.to_string(),
                n.clique.to_string(),
                format!("{:.2}", n.alpha.value()),
                format!("{:.2}", n.beta.value()),
                n.e.to_string(),
                u8::from(n.y).to_string(),
                n.r.to_string(),
                n.degree.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}
