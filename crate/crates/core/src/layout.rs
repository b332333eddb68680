//! ForceAtlas2 layout of the directed connectedness network.
//!
//! Every ordered pair of firms is an edge whose weight is the pairwise
//! directional connectedness (as a fraction of one). Attraction acts along
//! each directed edge, repulsion between each unordered pair. Node speeds
//! adapt from the swinging and traction of consecutive net forces, and all
//! positions are updated together once every force of an iteration is known.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fevd::ConnectednessTable;
use crate::{Error, Result};

pub type Point = [f64; 2];

/// Side of the square in which unseeded layouts start.
pub const INITIAL_REGION: f64 = 1000.0;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutGraph {
    pub nodes: Vec<String>,
    pub degrees: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl LayoutGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Degree assigned to each node of the fully connected network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegreeConvention {
    /// `deg = N`, which reproduces `S·(deg+1)² = 10·98·98 = 96040` for 97 firms.
    Published,
    /// `deg = N − 1`, the number of neighbours of each node.
    Neighbours,
    Fixed(usize),
}

impl DegreeConvention {
    pub fn degree(self, n_nodes: usize) -> usize {
        match self {
            DegreeConvention::Published => n_nodes,
            DegreeConvention::Neighbours => n_nodes.saturating_sub(1),
            DegreeConvention::Fixed(d) => d,
        }
    }
}

/// Builds the `N² − N` directed edges of a table. The edge from firm `j` to
/// firm `i` carries `d[[i, j]] / 100`.
pub fn edges_from_table(table: &ConnectednessTable, degrees: DegreeConvention) -> LayoutGraph {
    let n = table.n_firms();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push(Edge {
                    source: j,
                    target: i,
                    weight: table.d[[i, j]] / 100.0,
                });
            }
        }
    }
    LayoutGraph {
        nodes: table.firms.clone(),
        degrees: vec![degrees.degree(n); n],
        edges,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    /// Repulsion scaling `S`.
    pub scaling: f64,
    /// Edge-weight influence `δ`, 0 or 1.
    pub edge_weight_influence: u8,
    /// Swinging tolerance `τ`.
    pub tolerance: f64,
    /// Halve `τ` whenever global swinging grows tenfold between iterations.
    pub adaptive_tolerance: bool,
    /// Speed constant `k_s`; 0.1 is used instead when `prevent_overlap` is set.
    pub speed_constant: f64,
    pub prevent_overlap: bool,
    /// Global speed used when global swinging is exactly zero.
    pub max_global_speed: f64,
    pub iterations: usize,
    /// Largest per-iteration displacement still counted as converged.
    pub convergence_tolerance: f64,
    /// Distances below this are floored.
    pub min_distance: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            scaling: 10.0,
            edge_weight_influence: 1,
            tolerance: 1.0,
            adaptive_tolerance: false,
            speed_constant: 1.0,
            prevent_overlap: false,
            max_global_speed: 10.0,
            iterations: 600,
            convergence_tolerance: 1e-3,
            min_distance: 1e-4,
        }
    }
}

impl LayoutParams {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.scaling > 0.0) {
            problems.push(format!("scaling must be > 0, got {}", self.scaling));
        }
        if self.edge_weight_influence > 1 {
            problems.push(format!(
                "edge_weight_influence must be 0 or 1, got {}",
                self.edge_weight_influence
            ));
        }
        if !(self.tolerance > 0.0) {
            problems.push(format!("tolerance must be > 0, got {}", self.tolerance));
        }
        if self.iterations == 0 {
            problems.push("iterations must be at least 1".into());
        }
        if !(self.min_distance > 0.0) {
            problems.push("min_distance must be > 0".into());
        }
        problems
    }

    pub fn effective_speed_constant(&self) -> f64 {
        if self.prevent_overlap {
            0.1
        } else {
            self.speed_constant
        }
    }
}

/// Unit direction from `a` to `b` and their (floored) distance. Coincident
/// nodes are separated along the x axis, lower index to the left.
fn direction(a: Point, b: Point, ia: usize, ib: usize, floor: f64) -> (Point, f64) {
    let delta = sub(b, a);
    let dist = norm(delta);
    if dist == 0.0 {
        let sign = if ia < ib { 1.0 } else { -1.0 };
        return ([sign, 0.0], floor);
    }
    ([delta[0] / dist, delta[1] / dist], dist.max(floor))
}

/// Attraction on the node at `p1` from an edge of weight `w` to `p2`:
/// magnitude `w^δ·d`, pointing at `p2`. The node at `p2` receives the
/// negated vector.
pub fn attraction_force(weight: f64, p1: Point, p2: Point, delta: u8, min_distance: f64) -> Point {
    let (u, dist) = direction(p1, p2, 0, 1, min_distance);
    let mag = weight.powi(delta as i32) * dist;
    [u[0] * mag, u[1] * mag]
}

/// Repulsion numerator `S·(deg₁+1)·(deg₂+1)`.
pub fn repulsion_constant(deg1: usize, deg2: usize, scaling: f64) -> f64 {
    scaling * (deg1 as f64 + 1.0) * (deg2 as f64 + 1.0)
}

/// Repulsion on the node at `p1`: magnitude `S(deg₁+1)(deg₂+1)/d`, pointing
/// away from `p2`. The node at `p2` receives the negated vector.
pub fn repulsion_force(
    deg1: usize,
    deg2: usize,
    p1: Point,
    p2: Point,
    scaling: f64,
    min_distance: f64,
) -> Point {
    let (u, dist) = direction(p1, p2, 0, 1, min_distance);
    let mag = repulsion_constant(deg1, deg2, scaling) / dist;
    [-u[0] * mag, -u[1] * mag]
}

/// Net force on every node: attraction over directed edges plus repulsion
/// over unordered pairs. Pair contributions are accumulated in a fixed
/// order so results are reproducible.
pub fn net_forces(graph: &LayoutGraph, positions: &[Point], params: &LayoutParams) -> Vec<Point> {
    let n = graph.n_nodes();
    let mut forces = vec![[0.0; 2]; n];
    for a in 0..n {
        for b in a + 1..n {
            let (u, dist) = direction(positions[a], positions[b], a, b, params.min_distance);
            let mag = repulsion_constant(graph.degrees[a], graph.degrees[b], params.scaling) / dist;
            forces[a][0] -= u[0] * mag;
            forces[a][1] -= u[1] * mag;
            forces[b][0] += u[0] * mag;
            forces[b][1] += u[1] * mag;
        }
    }
    for e in &graph.edges {
        let (s, t) = (e.source, e.target);
        if s == t {
            continue;
        }
        let (u, dist) = direction(positions[s], positions[t], s, t, params.min_distance);
        let mag = e.weight.powi(params.edge_weight_influence as i32) * dist;
        forces[s][0] += u[0] * mag;
        forces[s][1] += u[1] * mag;
        forces[t][0] -= u[0] * mag;
        forces[t][1] -= u[1] * mag;
    }
    forces
}

/// Per-node and global speed bookkeeping carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceState {
    pub current_force: Vec<Point>,
    pub previous_force: Vec<Point>,
    pub swinging: Vec<f64>,
    pub traction: Vec<f64>,
    pub local_speed: Vec<f64>,
    pub global_swinging: f64,
    pub global_traction: f64,
    pub global_speed: f64,
    /// Current `τ` (changes only under the adaptive rule).
    pub tolerance: f64,
    pub iteration: usize,
}

impl ForceState {
    pub fn new(n: usize, tolerance: f64) -> Self {
        Self {
            current_force: vec![[0.0; 2]; n],
            previous_force: vec![[0.0; 2]; n],
            swinging: vec![0.0; n],
            traction: vec![0.0; n],
            local_speed: vec![0.0; n],
            global_swinging: 0.0,
            global_traction: 0.0,
            global_speed: 0.0,
            tolerance,
            iteration: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub global_speed: f64,
    pub global_swinging: f64,
    pub global_traction: f64,
    pub max_displacement: f64,
    pub tolerance: f64,
}

/// One full iteration: forces, speeds, then a simultaneous position update.
pub fn iterate(
    graph: &LayoutGraph,
    positions: &mut [Point],
    state: &mut ForceState,
    params: &LayoutParams,
) -> IterationRecord {
    let n = graph.n_nodes();
    let forces = net_forces(graph, positions, params);
    state.previous_force = std::mem::replace(&mut state.current_force, forces);

    let previous_global_swinging = state.global_swinging;
    let (mut swg_g, mut tra_g) = (0.0, 0.0);
    for v in 0..n {
        let (f, p) = (state.current_force[v], state.previous_force[v]);
        state.swinging[v] = norm(sub(f, p));
        state.traction[v] = norm([f[0] + p[0], f[1] + p[1]]) / 2.0;
        let weight = graph.degrees[v] as f64 + 1.0;
        swg_g += weight * state.swinging[v];
        tra_g += weight * state.traction[v];
    }
    state.global_swinging = swg_g;
    state.global_traction = tra_g;

    if params.adaptive_tolerance
        && state.iteration > 0
        && previous_global_swinging > 0.0
        && swg_g > 10.0 * previous_global_swinging
    {
        state.tolerance /= 2.0;
    }

    state.global_speed = if swg_g > 0.0 {
        state.tolerance * tra_g / swg_g
    } else {
        params.max_global_speed
    };

    let ks = params.effective_speed_constant();
    let mut max_displacement = 0.0f64;
    for v in 0..n {
        let s = ks * state.global_speed / (1.0 + state.global_speed * state.swinging[v].sqrt());
        state.local_speed[v] = s;
        let f = state.current_force[v];
        let step = [s * f[0], s * f[1]];
        positions[v][0] += step[0];
        positions[v][1] += step[1];
        max_displacement = max_displacement.max(norm(step));
    }
    state.iteration += 1;

    IterationRecord {
        iteration: state.iteration,
        global_speed: state.global_speed,
        global_swinging: swg_g,
        global_traction: tra_g,
        max_displacement,
        tolerance: state.tolerance,
    }
}

/// Uniform random positions in the `INITIAL_REGION` square.
pub fn random_positions(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..INITIAL_REGION),
                rng.random_range(0.0..INITIAL_REGION),
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPositions {
    Random { seed: u64 },
    Given(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutResult {
    pub positions: Vec<Point>,
    pub initial_positions: Vec<Point>,
    pub seed: Option<u64>,
    pub trace: Vec<IterationRecord>,
    /// First iteration from which every later displacement stays below the
    /// convergence tolerance.
    pub converged_at: Option<usize>,
}

/// Runs `params.iterations` iterations from the given or random start.
pub fn run_layout(
    graph: &LayoutGraph,
    params: &LayoutParams,
    initial: InitialPositions,
) -> Result<LayoutResult> {
    let problems = params.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let n = graph.n_nodes();
    let (start, seed) = match initial {
        InitialPositions::Random { seed } => (random_positions(n, seed), Some(seed)),
        InitialPositions::Given(p) => {
            if p.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} initial positions for {n} nodes",
                    p.len()
                )));
            }
            if p.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite initial position".into()));
            }
            (p, None)
        }
    };
    let mut positions = start.clone();
    let mut state = ForceState::new(n, params.tolerance);
    let trace: Vec<IterationRecord> = (0..params.iterations)
        .map(|_| iterate(graph, &mut positions, &mut state, params))
        .collect();
    let converged_at = trace
        .iter()
        .rposition(|r| r.max_displacement >= params.convergence_tolerance)
        .map_or(Some(1), |last_big| {
            (last_big + 1 < trace.len()).then_some(last_big + 2)
        });
    Ok(LayoutResult {
        positions,
        initial_positions: start,
        seed,
        trace,
        converged_at,
    })
}

/// Hex SHA-256 of the exact bit patterns of a position list.
pub fn positions_fingerprint(positions: &[Point]) -> String {
    let mut h = Sha256::new();
    for p in positions {
        h.update(p[0].to_bits().to_le_bytes());
        h.update(p[1].to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// On-disk layout: `{ "date": …, "seed": …, "positions": { ticker: [x, y] } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub date: crate::Date,
    pub seed: Option<u64>,
    pub positions: BTreeMap<String, Point>,
}

impl LayoutFile {
    pub fn new(date: crate::Date, seed: Option<u64>, nodes: &[String], positions: &[Point]) -> Self {
        Self {
            date,
            seed,
            positions: nodes.iter().cloned().zip(positions.iter().copied()).collect(),
        }
    }

    /// Positions in the order of `nodes`.
    pub fn ordered(&self, nodes: &[String]) -> Result<Vec<Point>> {
        nodes
            .iter()
            .map(|t| {
                self.positions
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("layout has no position for `{t}`")))
            })
            .collect()
    }
}

pub fn write_trace_csv<W: Write>(trace: &[IterationRecord], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record([
        "iteration",
        "global_speed",
        "global_swinging",
        "global_traction",
        "max_displacement",
    ])?;
    for r in trace {
        csv.write_record([
            r.iteration.to_string(),
            r.global_speed.to_string(),
            r.global_swinging.to_string(),
            r.global_traction.to_string(),
            r.max_displacement.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}
