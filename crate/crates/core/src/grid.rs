//! Static network data, instance file I/O, and radiality rules.
//!
//! An instance is a JSON document with sections `base_mva`, `buses[]`,
//! `lines[]`, `substations[]`, `loss_cost`, and an optional
//! `forbidden_patterns[]` (generated from the topology when absent).
//! All powers are per-unit on `base_mva`; voltages are per-unit.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BusId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LineId(pub u32);

impl std::fmt::Display for BusId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bus {}", self.0)
    }
}

impl std::fmt::Display for LineId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}", self.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub demand_p: f64,
    pub power_factor: f64,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default)]
    pub is_substation: bool,
}

impl Bus {
    /// Reactive demand is always derived from the power factor.
    pub fn demand_q(&self) -> f64 {
        self.power_factor.acos().tan() * self.demand_p
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Substation {
    pub bus: BusId,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub energy_cost: f64,
    pub v_ref: f64,
    /// Post-contingency injection caps; fall back to the pre-contingency
    /// limits when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_post: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min_post: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max_post: Option<f64>,
}

impl Substation {
    pub fn p_max_c(&self) -> f64 {
        self.p_max_post.unwrap_or(self.p_max)
    }
    pub fn q_min_c(&self) -> f64 {
        self.q_min_post.unwrap_or(self.q_min)
    }
    pub fn q_max_c(&self) -> f64 {
        self.q_max_post.unwrap_or(self.q_max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    pub f_max: f64,
    #[serde(default)]
    pub switchable: bool,
    #[serde(default = "default_true")]
    pub initial_closed: bool,
    #[serde(default)]
    pub switch_cost: f64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read instance file: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance file does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{entity} references unknown {bus}")]
    DanglingBus { entity: String, bus: BusId },
    #[error("{entity}: {detail}")]
    Invariant { entity: String, detail: String },
    #[error("duplicate {0}")]
    DuplicateBus(BusId),
    #[error("duplicate {0}")]
    DuplicateLine(LineId),
    #[error("fixed (non-switchable) network already contains a cycle through {0}")]
    UnrepairableCycle(LineId),
    #[error("negative failure rate {0}")]
    NegativeRate(f64),
    #[error("horizon must be positive, got {0} h")]
    BadHorizon(f64),
    #[error("radiality rule generation exceeded {0} cycles; declare forbidden_patterns explicitly")]
    TooManyCycles(usize),
}

/// The full static input: buses, lines, substations, cost data, and the
/// family of switchable-line sets that may not be simultaneously closed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridInstance {
    pub base_mva: f64,
    pub loss_cost: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub substations: Vec<Substation>,
    pub forbidden_patterns: Vec<Vec<LineId>>,
    #[serde(skip)]
    bus_pos: BTreeMap<BusId, usize>,
    #[serde(skip)]
    line_pos: BTreeMap<LineId, usize>,
}

impl GridInstance {
    pub fn new(
        base_mva: f64,
        loss_cost: f64,
        mut buses: Vec<Bus>,
        mut lines: Vec<Line>,
        substations: Vec<Substation>,
        forbidden_patterns: Option<Vec<Vec<LineId>>>,
    ) -> Result<Self, InstanceError> {
        buses.sort_by_key(|b| b.id);
        lines.sort_by_key(|l| l.id);
        let mut g = GridInstance {
            base_mva,
            loss_cost,
            buses,
            lines,
            substations,
            forbidden_patterns: forbidden_patterns.unwrap_or_default(),
            bus_pos: BTreeMap::new(),
            line_pos: BTreeMap::new(),
        };
        g.reindex()?;
        g.validate()?;
        if g.forbidden_patterns.is_empty() {
            g.forbidden_patterns = generate_radiality_rules(&g)?;
        }
        g.validate_patterns()?;
        Ok(g)
    }

    fn reindex(&mut self) -> Result<(), InstanceError> {
        self.bus_pos.clear();
        for (i, b) in self.buses.iter().enumerate() {
            if self.bus_pos.insert(b.id, i).is_some() {
                return Err(InstanceError::DuplicateBus(b.id));
            }
        }
        self.line_pos.clear();
        for (i, l) in self.lines.iter().enumerate() {
            if self.line_pos.insert(l.id, i).is_some() {
                return Err(InstanceError::DuplicateLine(l.id));
            }
        }
        Ok(())
    }

    fn validate(&mut self) -> Result<(), InstanceError> {
        let inv = |entity: String, detail: String| InstanceError::Invariant { entity, detail };
        if self.substations.is_empty() {
            return Err(inv("instance".into(), "at least one substation required".into()));
        }
        if !(self.base_mva > 0.0) {
            return Err(inv("instance".into(), format!("base_mva must be positive, got {}", self.base_mva)));
        }
        if self.loss_cost < 0.0 {
            return Err(inv("instance".into(), "loss_cost must be nonnegative".into()));
        }
        for b in &self.buses {
            if !(b.v_min > 0.0 && b.v_min <= b.v_max) {
                return Err(inv(b.id.to_string(), format!("voltage bounds [{}, {}] invalid", b.v_min, b.v_max)));
            }
            if b.demand_p < 0.0 {
                return Err(inv(b.id.to_string(), "negative demand".into()));
            }
            if !(b.power_factor > 0.0 && b.power_factor <= 1.0) {
                return Err(inv(b.id.to_string(), format!("power factor {} outside (0, 1]", b.power_factor)));
            }
        }
        let mut sub_buses = BTreeSet::new();
        for s in &self.substations {
            let Some(&pos) = self.bus_pos.get(&s.bus) else {
                return Err(InstanceError::DanglingBus {
                    entity: "substation".into(),
                    bus: s.bus,
                });
            };
            if !sub_buses.insert(s.bus) {
                return Err(inv(s.bus.to_string(), "more than one substation".into()));
            }
            if s.q_min > s.q_max {
                return Err(inv(s.bus.to_string(), "q_min > q_max".into()));
            }
            if s.p_max < 0.0 {
                return Err(inv(s.bus.to_string(), "p_max < 0".into()));
            }
            let b = &self.buses[pos];
            if !(b.v_min <= s.v_ref && s.v_ref <= b.v_max) {
                return Err(inv(
                    s.bus.to_string(),
                    format!("v_ref {} outside voltage bounds [{}, {}]", s.v_ref, b.v_min, b.v_max),
                ));
            }
        }
        for b in &mut self.buses {
            b.is_substation = sub_buses.contains(&b.id);
        }
        for l in &self.lines {
            if !(l.f_max > 0.0) {
                return Err(inv(l.id.to_string(), format!("f_max {} not positive", l.f_max)));
            }
            if l.r < 0.0 {
                return Err(inv(l.id.to_string(), "negative resistance".into()));
            }
            if !l.x.is_finite() {
                return Err(inv(l.id.to_string(), "non-finite reactance".into()));
            }
            if l.from_bus == l.to_bus {
                return Err(inv(l.id.to_string(), "from_bus equals to_bus".into()));
            }
            if l.switch_cost < 0.0 {
                return Err(inv(l.id.to_string(), "negative switch cost".into()));
            }
            for end in [l.from_bus, l.to_bus] {
                if !self.bus_pos.contains_key(&end) {
                    return Err(InstanceError::DanglingBus {
                        entity: l.id.to_string(),
                        bus: end,
                    });
                }
            }
        }
        Ok(())
    }

    fn validate_patterns(&self) -> Result<(), InstanceError> {
        for pat in &self.forbidden_patterns {
            if pat.is_empty() {
                return Err(InstanceError::Invariant {
                    entity: "forbidden_patterns".into(),
                    detail: "empty pattern".into(),
                });
            }
            for lid in pat {
                match self.line_pos.get(lid) {
                    None => {
                        return Err(InstanceError::Invariant {
                            entity: "forbidden_patterns".into(),
                            detail: format!("unknown {lid}"),
                        })
                    }
                    Some(&p) if !self.lines[p].switchable => {
                        return Err(InstanceError::Invariant {
                            entity: "forbidden_patterns".into(),
                            detail: format!("{lid} is not switchable"),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.bus_pos.get(&id).copied()
    }

    pub fn line_index(&self, id: LineId) -> Option<usize> {
        self.line_pos.get(&id).copied()
    }

    /// Positions (into `lines`) of switchable lines, in id order.
    pub fn switchable_positions(&self) -> Vec<usize> {
        (0..self.lines.len()).filter(|&i| self.lines[i].switchable).collect()
    }

    pub fn substation_for_bus(&self, bus: BusId) -> Option<&Substation> {
        self.substations.iter().find(|s| s.bus == bus)
    }

    pub fn total_demand_p(&self) -> f64 {
        self.buses.iter().map(|b| b.demand_p).sum()
    }

    /// Initial switching vector over switchable positions.
    pub fn initial_switch_state(&self) -> Vec<bool> {
        self.switchable_positions()
            .iter()
            .map(|&i| self.lines[i].initial_closed)
            .collect()
    }

    /// Per-line big-M for the voltage-drop relaxations: the widest
    /// possible squared-voltage difference plus the largest drop the
    /// line itself can produce.
    pub fn voltage_big_m(&self, line: &Line) -> f64 {
        let v_hi = self.buses.iter().fold(0.0f64, |m, b| m.max(b.v_max * b.v_max));
        let v_lo = self
            .buses
            .iter()
            .fold(f64::INFINITY, |m, b| m.min(b.v_min * b.v_min));
        (v_hi - v_lo) + 2.0 * (line.r + line.x) * line.f_max
    }

    /// FNV-1a fingerprint of the topology and ratings; used to pair cut
    /// caches with the instance they came from.
    pub fn signature(&self) -> u64 {
        let mut h = Fnv::new();
        h.u64(self.buses.len() as u64);
        h.u64(self.lines.len() as u64);
        for b in &self.buses {
            h.u64(b.id.0 as u64);
            h.f64(b.demand_p);
            h.f64(b.power_factor);
        }
        for l in &self.lines {
            h.u64(l.id.0 as u64);
            h.u64(l.from_bus.0 as u64);
            h.u64(l.to_bus.0 as u64);
            h.u64(l.switchable as u64);
            h.f64(l.f_max);
        }
        for s in &self.substations {
            h.u64(s.bus.0 as u64);
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }
    fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.byte(b);
        }
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// Loads and validates an instance file, generating radiality rules when
/// the file does not declare `forbidden_patterns`.
pub fn load_instance(path: impl AsRef<Path>) -> Result<GridInstance, InstanceError> {
    let text = std::fs::read_to_string(path)?;
    load_instance_str(&text)
}

pub fn load_instance_str(text: &str) -> Result<GridInstance, InstanceError> {
    #[derive(Deserialize)]
    struct InstanceFile {
        base_mva: f64,
        loss_cost: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        substations: Vec<Substation>,
        #[serde(default)]
        forbidden_patterns: Option<Vec<Vec<LineId>>>,
    }
    let f: InstanceFile = serde_json::from_str(text)?;
    GridInstance::new(f.base_mva, f.loss_cost, f.buses, f.lines, f.substations, f.forbidden_patterns)
}

pub fn save_instance(g: &GridInstance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let text = serde_json::to_string_pretty(g)?;
    std::fs::write(path, text)?;
    Ok(())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }
    /// Returns false when both ends were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

const MAX_RULES: usize = 100_000;

/// Enumerates, for every cycle that closing switchable lines can create
/// on top of the fixed network, the set of switchable lines in that
/// cycle. Keeping at least one line of each returned set open keeps any
/// switching configuration acyclic.
///
/// The fixed (non-switchable) edges are contracted first; the rules are
/// then exactly the simple cycles of the remaining multigraph of
/// switchable edges, found by depth-first path enumeration.
pub fn generate_radiality_rules(g: &GridInstance) -> Result<Vec<Vec<LineId>>, InstanceError> {
    let n = g.num_buses();
    let mut uf = UnionFind::new(n);
    for l in &g.lines {
        if !l.switchable {
            let a = g.bus_index(l.from_bus).unwrap();
            let b = g.bus_index(l.to_bus).unwrap();
            if !uf.union(a, b) {
                return Err(InstanceError::UnrepairableCycle(l.id));
            }
        }
    }

    // Contracted multigraph: one node per fixed component, one edge per
    // switchable line, ordered by line id for determinism.
    let mut edges: Vec<SwEdge> = Vec::new();
    for l in &g.lines {
        if l.switchable {
            let u = uf.find(g.bus_index(l.from_bus).unwrap());
            let v = uf.find(g.bus_index(l.to_bus).unwrap());
            edges.push(SwEdge { u, v, id: l.id });
        }
    }
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (e, edge) in edges.iter().enumerate() {
        adj.entry(edge.u).or_default().push(e);
        adj.entry(edge.v).or_default().push(e);
    }

    let mut rules: Vec<Vec<LineId>> = Vec::new();
    for (e0, edge0) in edges.iter().enumerate() {
        if edge0.u == edge0.v {
            // Self-loop after contraction: the line alone closes a cycle.
            rules.push(vec![edge0.id]);
            continue;
        }
        // Simple paths edge0.v -> edge0.u using only edges with a larger
        // index, so each cycle is reported once (at its smallest edge).
        let mut path: Vec<usize> = Vec::new();
        let mut visited: BTreeSet<usize> = BTreeSet::new();
        visited.insert(edge0.v);
        dfs_paths(
            &edges, &adj, e0, edge0.v, edge0.u, &mut visited, &mut path, &mut rules,
        )?;
    }
    for rule in &mut rules {
        rule.sort_unstable();
    }
    rules.sort_unstable_by(|a, b| (a.len(), a.as_slice()).cmp(&(b.len(), b.as_slice())));
    rules.dedup();
    Ok(rules)
}

struct SwEdge {
    u: usize,
    v: usize,
    id: LineId,
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths(
    edges: &[SwEdge],
    adj: &BTreeMap<usize, Vec<usize>>,
    e0: usize,
    node: usize,
    target: usize,
    visited: &mut BTreeSet<usize>,
    path: &mut Vec<usize>,
    rules: &mut Vec<Vec<LineId>>,
) -> Result<(), InstanceError> {
    let Some(out) = adj.get(&node) else { return Ok(()) };
    for &e in out {
        if e <= e0 {
            continue;
        }
        let edge = &edges[e];
        if edge.u == edge.v {
            continue;
        }
        let next = if edge.u == node { edge.v } else { edge.u };
        if next == target {
            let mut rule: Vec<LineId> = path.iter().map(|&p| edges[p].id).collect();
            rule.push(edges[e].id);
            rule.push(edges[e0].id);
            rules.push(rule);
            if rules.len() > MAX_RULES {
                return Err(InstanceError::TooManyCycles(MAX_RULES));
            }
            continue;
        }
        if visited.contains(&next) {
            continue;
        }
        visited.insert(next);
        path.push(e);
        dfs_paths(edges, adj, e0, next, target, visited, path, rules)?;
        path.pop();
        visited.remove(&next);
    }
    Ok(())
}

/// Converts an annual failure rate into a failure probability over the
/// given horizon through the exponential distribution.
pub fn annual_rate_to_horizon_probability(
    rate: f64,
    horizon_hours: f64,
) -> Result<f64, InstanceError> {
    if rate < 0.0 {
        return Err(InstanceError::NegativeRate(rate));
    }
    if !(horizon_hours > 0.0) {
        return Err(InstanceError::BadHorizon(horizon_hours));
    }
    Ok(1.0 - (-rate * horizon_hours / HOURS_PER_YEAR).exp())
}
