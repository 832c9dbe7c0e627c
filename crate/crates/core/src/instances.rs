//! Multiway cut instances: the graph model, solution checking, random
//! generation and the line-oriented instance file format.
//!
//! File format (whitespace separated, `#` starts a comment):
//!
//! ```text
//! memc <num_vertices> <num_edges> <k>
//! t <vertex>            # one line per terminal
//! e <u> <v> <cost>      # one line per edge
//! ```

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// An undirected edge. Stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
}

impl Edge {
    pub fn new(u: usize, v: usize, cost: f64) -> Self {
        Edge {
            u: u.min(v),
            v: u.max(v),
            cost,
        }
    }
}

/// Undirected connected graph with non-negative edge costs and `k >= 2`
/// terminals. Vertex ids are `0..num_vertices`; terminals are kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticutInstance {
    num_vertices: usize,
    edges: Vec<Edge>,
    terminals: Vec<usize>,
}

impl MulticutInstance {
    /// Validates and builds an instance. Edge endpoints are normalized to
    /// `u < v` and terminals are sorted ascending.
    pub fn new(num_vertices: usize, edges: Vec<Edge>, mut terminals: Vec<usize>) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::Validation("instance has no vertices".into()));
        }
        let edges: Vec<Edge> = edges.into_iter().map(|e| Edge::new(e.u, e.v, e.cost)).collect();
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.v >= num_vertices {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) references a vertex outside 0..{num_vertices}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::Validation(format!("self-loop on vertex {}", e.u)));
            }
            if !(e.cost.is_finite() && e.cost >= 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) has invalid cost {}",
                    e.u, e.v, e.cost
                )));
            }
            if !seen.insert((e.u, e.v)) {
                return Err(Error::Validation(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
        }
        terminals.sort_unstable();
        if terminals.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 terminals, got {}",
                terminals.len()
            )));
        }
        if terminals.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("terminal listed twice".into()));
        }
        if let Some(&t) = terminals.iter().find(|&&t| t >= num_vertices) {
            return Err(Error::Validation(format!("terminal {t} is not a vertex")));
        }
        let instance = MulticutInstance {
            num_vertices,
            edges,
            terminals,
        };
        if !instance.is_connected() {
            return Err(Error::Validation("graph is not connected".into()));
        }
        Ok(instance)
    }

    /// Path `t1 - a - t2` with costs 1 and 2; vertices `t1 = 0, a = 1, t2 = 2`. Optimum 1.
    pub fn toy3() -> Self {
        MulticutInstance::new(3, vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 2.0)], vec![0, 2])
            .expect("toy3 fixture is valid")
    }

    /// Unit 4-cycle `t1 - a - t2 - b - t1`; vertices `t1 = 0, a = 1, t2 = 2, b = 3`. Optimum 2.
    pub fn toy4() -> Self {
        MulticutInstance::new(
            4,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(1, 2, 1.0),
                Edge::new(2, 3, 1.0),
                Edge::new(3, 0, 1.0),
            ],
            vec![0, 2],
        )
        .expect("toy4 fixture is valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    pub fn k(&self) -> usize {
        self.terminals.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).sum()
    }

    /// Position of `v` in the terminal list, if it is a terminal.
    pub fn terminal_position(&self, v: usize) -> Option<usize> {
        self.terminals.binary_search(&v).ok()
    }

    pub fn is_terminal(&self, v: usize) -> bool {
        self.terminal_position(v).is_some()
    }

    /// Adjacency lists of `(neighbor, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for (idx, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, idx));
            adj[e.v].push((e.u, idx));
        }
        adj
    }

    /// Copy of the instance with every edge cost multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.u, e.v, e.cost * factor))
            .collect();
        MulticutInstance::new(self.num_vertices, edges, self.terminals.clone())
    }

    fn is_connected(&self) -> bool {
        let keep = vec![true; self.edges.len()];
        let components = self.components(&keep);
        components.iter().all(|&c| c == 0)
    }

    /// Component label per vertex using only edges with `keep[idx] == true`.
    pub(crate) fn components(&self, keep: &[bool]) -> Vec<usize> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.num_vertices];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.num_vertices {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &(w, idx) in &adj[u] {
                    if keep[idx] && label[w] == usize::MAX {
                        label[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// True when removing the edges flagged in `removed` leaves every
    /// terminal in a different component.
    pub fn separates_terminals(&self, removed: &[bool]) -> bool {
        let keep: Vec<bool> = removed.iter().map(|&r| !r).collect();
        let label = self.components(&keep);
        let mut seen = HashSet::new();
        self.terminals.iter().all(|&t| seen.insert(label[t]))
    }

    /// Serializes to the instance file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "memc {} {} {}", self.num_vertices, self.edges.len(), self.k());
        for t in &self.terminals {
            let _ = writeln!(out, "t {t}");
        }
        for e in &self.edges {
            let _ = writeln!(out, "e {} {} {}", e.u, e.v, e.cost);
        }
        out
    }

    /// Parses the instance file format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut terminals = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut seen_edges = HashSet::new();
        let mut last_line = 0;

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            last_line = lineno;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let Some((n, _, _)) = header else {
                if tokens[0] != "memc" || tokens.len() != 4 {
                    return Err(Error::parse(lineno, "expected header `memc <vertices> <edges> <k>`"));
                }
                let n = parse_usize(tokens[1], lineno)?;
                let m = parse_usize(tokens[2], lineno)?;
                let k = parse_usize(tokens[3], lineno)?;
                header = Some((n, m, k));
                continue;
            };
            match tokens[0] {
                "t" => {
                    if tokens.len() != 2 {
                        return Err(Error::parse(lineno, "expected `t <vertex>`"));
                    }
                    let t = parse_usize(tokens[1], lineno)?;
                    if t >= n {
                        return Err(Error::parse(lineno, format!("terminal {t} out of range")));
                    }
                    if terminals.contains(&t) {
                        return Err(Error::parse(lineno, format!("duplicate terminal {t}")));
                    }
                    terminals.push(t);
                }
                "e" => {
                    if tokens.len() != 4 {
                        return Err(Error::parse(lineno, "expected `e <u> <v> <cost>`"));
                    }
                    let u = parse_usize(tokens[1], lineno)?;
                    let v = parse_usize(tokens[2], lineno)?;
                    let cost: f64 = tokens[3]
                        .parse()
                        .map_err(|_| Error::parse(lineno, format!("invalid cost {:?}", tokens[3])))?;
                    if u >= n || v >= n {
                        return Err(Error::parse(lineno, format!("edge ({u}, {v}) out of range")));
                    }
                    if u == v {
                        return Err(Error::parse(lineno, format!("self-loop on vertex {u}")));
                    }
                    if !(cost.is_finite() && cost >= 0.0) {
                        return Err(Error::parse(lineno, format!("invalid cost {cost}")));
                    }
                    let edge = Edge::new(u, v, cost);
                    if !seen_edges.insert((edge.u, edge.v)) {
                        return Err(Error::parse(lineno, format!("duplicate edge ({u}, {v})")));
                    }
                    edges.push(edge);
                }
                other => {
                    return Err(Error::parse(lineno, format!("unknown record type {other:?}")));
                }
            }
        }

        let Some((n, m, k)) = header else {
            return Err(Error::parse(last_line.max(1), "missing `memc` header"));
        };
        if edges.len() != m {
            return Err(Error::parse(
                last_line,
                format!("header declares {m} edges, found {}", edges.len()),
            ));
        }
        if terminals.len() != k {
            return Err(Error::parse(
                last_line,
                format!("header declares {k} terminals, found {}", terminals.len()),
            ));
        }
        MulticutInstance::new(n, edges, terminals)
    }
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a non-negative integer, got {token:?}")))
}

/// Built-in fixtures by name: `toy3`, `toy4`.
pub fn instance_from_name(name: &str) -> Option<MulticutInstance> {
    match name {
        "toy3" => Some(MulticutInstance::toy3()),
        "toy4" => Some(MulticutInstance::toy4()),
        _ => None,
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<MulticutInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MulticutInstance::from_text(&text)
}

pub fn save_instance(instance: &MulticutInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance.to_text()).map_err(|e| Error::io(path, e))
}

/// A feasible multiway cut: every vertex mapped to a terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSolution {
    /// `assignment[v]` is the terminal vertex id that `v` joins.
    pub assignment: Vec<usize>,
    pub cut_edges: Vec<Edge>,
    pub cut_cost: f64,
}

impl CutSolution {
    /// Flags per instance edge: true when the edge is cut.
    pub fn cut_mask(&self, instance: &MulticutInstance) -> Vec<bool> {
        instance
            .edges()
            .iter()
            .map(|e| self.assignment[e.u] != self.assignment[e.v])
            .collect()
    }
}

/// Recomputes the cut induced by `assignment` and checks feasibility.
pub fn validate_solution(instance: &MulticutInstance, assignment: &[usize]) -> Result<CutSolution> {
    if assignment.len() != instance.num_vertices() {
        return Err(Error::Dimension {
            expected: instance.num_vertices(),
            actual: assignment.len(),
        });
    }
    for (v, &t) in assignment.iter().enumerate() {
        if !instance.is_terminal(t) {
            return Err(Error::InfeasibleSolution(format!(
                "vertex {v} assigned to {t}, which is not a terminal"
            )));
        }
    }
    for &t in instance.terminals() {
        if assignment[t] != t {
            return Err(Error::InfeasibleSolution(format!(
                "terminal {t} assigned to terminal {}",
                assignment[t]
            )));
        }
    }
    let cut_edges: Vec<Edge> = instance
        .edges()
        .iter()
        .filter(|e| assignment[e.u] != assignment[e.v])
        .copied()
        .collect();
    let cut_cost = cut_edges.iter().map(|e| e.cost).sum();
    Ok(CutSolution {
        assignment: assignment.to_vec(),
        cut_edges,
        cut_cost,
    })
}

/// Parameters of the random instance family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub num_vertices: usize,
    pub num_edges: usize,
    pub k: usize,
    pub cost_range: (f64, f64),
    /// Draw integer costs uniformly from `ceil(lo)..=floor(hi)` instead of reals.
    pub integer_costs: bool,
}

impl GeneratorParams {
    pub fn new(num_vertices: usize, num_edges: usize, k: usize, cost_range: (f64, f64)) -> Self {
        GeneratorParams {
            num_vertices,
            num_edges,
            k,
            cost_range,
            integer_costs: false,
        }
    }

    pub fn integer(mut self) -> Self {
        self.integer_costs = true;
        self
    }

    /// Edge count for a density in `[0, 1]` between a spanning tree and the complete graph.
    pub fn edges_for_density(num_vertices: usize, density: f64) -> usize {
        let tree = num_vertices.saturating_sub(1);
        let complete = num_vertices * num_vertices.saturating_sub(1) / 2;
        tree + ((complete - tree) as f64 * density.clamp(0.0, 1.0)).round() as usize
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vertices;
        if n == 0 {
            return Err(Error::Parameter("num_vertices must be positive".into()));
        }
        if self.num_edges < n - 1 || self.num_edges > n * (n - 1) / 2 {
            return Err(Error::Parameter(format!(
                "{} edges cannot form a connected simple graph on {n} vertices",
                self.num_edges
            )));
        }
        if self.k < 2 || self.k > n {
            return Err(Error::Parameter(format!("k = {} must lie in 2..={n}", self.k)));
        }
        let (lo, hi) = self.cost_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(Error::Parameter(format!("invalid cost range ({lo}, {hi})")));
        }
        if self.integer_costs && lo.ceil() > hi.floor() {
            return Err(Error::Parameter(format!("cost range ({lo}, {hi}) contains no integer")));
        }
        Ok(())
    }
}

/// Random connected instance with real costs; see [`generate_instance`].
pub fn generate_random_instance(
    num_vertices: usize,
    num_edges: usize,
    k: usize,
    cost_range: (f64, f64),
    seed: u64,
) -> Result<MulticutInstance> {
    generate_instance(&GeneratorParams::new(num_vertices, num_edges, k, cost_range), seed)
}

/// Random spanning tree plus uniformly chosen extra edges, uniform costs and
/// terminals sampled without replacement. Pure function of `(params, seed)`.
pub fn generate_instance(params: &GeneratorParams, seed: u64) -> Result<MulticutInstance> {
    params.check()?;
    let n = params.num_vertices;
    let mut rng = rng::seeded(seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut present = HashSet::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        let (a, b) = (order[i].min(parent), order[i].max(parent));
        present.insert((a, b));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|p| !present.contains(p))
        .collect();
    candidates.shuffle(&mut rng);
    let extra = params.num_edges - (n - 1);
    present.extend(candidates.into_iter().take(extra));

    let mut pairs: Vec<(usize, usize)> = present.into_iter().collect();
    pairs.sort_unstable();
    let (lo, hi) = params.cost_range;
    let edges = pairs
        .into_iter()
        .map(|(u, v)| {
            let cost = if params.integer_costs {
                rng.gen_range(lo.ceil() as u64..=hi.floor() as u64) as f64
            } else if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            };
            Edge::new(u, v, cost)
        })
        .collect();

    let mut terminals: Vec<usize> = (0..n).collect();
    terminals.shuffle(&mut rng);
    terminals.truncate(params.k);
    MulticutInstance::new(n, edges, terminals)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY3_FILE: &str = "\
# path t1 - a - t2
memc 3 2 2
t 0
t 2
e 0 1 1
e 1 2 2   # heavier edge
";

    #[test]
    fn toy3_file_parses() {
        let inst = MulticutInstance::from_text(TOY3_FILE).unwrap();
        assert_eq!(inst, MulticutInstance::toy3());
        assert_eq!(inst.num_vertices(), 3);
        assert_eq!(inst.terminals(), &[0, 2]);
    }

    #[test]
    fn duplicate_edge_is_parse_error() {
        let text = "memc 3 3 2\nt 0\nt 2\ne 0 1 1\ne 1 2 1\ne 1 0 3\n";
        match MulticutInstance::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "memc 3 2 2\nt 0\nt 2\ne 0 1 x\ne 1 2 2\n";
        match MulticutInstance::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn disconnected_graph_is_validation_error() {
        let text = "memc 4 2 2\nt 0\nt 3\ne 0 1 1\ne 2 3 1\n";
        assert!(matches!(
            MulticutInstance::from_text(text),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn edge_count_mismatch_is_parse_error() {
        let text = "memc 3 3 2\nt 0\nt 2\ne 0 1 1\ne 1 2 2\n";
        assert!(matches!(MulticutInstance::from_text(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn validate_toy3_assignments() {
        let inst = MulticutInstance::toy3();
        let cut = validate_solution(&inst, &[0, 2, 2]).unwrap();
        assert_eq!(cut.cut_edges, vec![Edge::new(0, 1, 1.0)]);
        assert_eq!(cut.cut_cost, 1.0);
        let cut = validate_solution(&inst, &[0, 0, 2]).unwrap();
        assert_eq!(cut.cut_cost, 2.0);
        assert!(inst.separates_terminals(&cut.cut_mask(&inst)));
    }

    #[test]
    fn all_to_one_terminal_is_infeasible() {
        let inst = MulticutInstance::toy4();
        assert!(matches!(
            validate_solution(&inst, &[0, 0, 0, 0]),
            Err(Error::InfeasibleSolution(_))
        ));
        assert!(matches!(
            validate_solution(&inst, &[0, 1, 2, 2]),
            Err(Error::InfeasibleSolution(_))
        ));
        assert!(matches!(
            validate_solution(&inst, &[0, 2]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn tree_is_forced_with_n_minus_one_edges() {
        let inst = generate_random_instance(4, 3, 2, (1.0, 1.0), 0).unwrap();
        assert_eq!(inst.num_edges(), 3);
        assert!(inst.edges().iter().all(|e| e.cost == 1.0));
        assert_eq!(inst.k(), 2);
    }

    #[test]
    fn small_regime_instance() {
        let inst = generate_random_instance(10, 15, 2, (1.0, 10.0), 7).unwrap();
        assert_eq!(inst.num_vertices(), 10);
        assert_eq!(inst.num_edges(), 15);
        assert!(inst.edges().iter().all(|e| (1.0..=10.0).contains(&e.cost)));
        assert_eq!(inst, generate_random_instance(10, 15, 2, (1.0, 10.0), 7).unwrap());
        assert_ne!(inst, generate_random_instance(10, 15, 2, (1.0, 10.0), 8).unwrap());
    }

    #[test]
    fn infeasible_edge_counts_rejected() {
        assert!(matches!(
            generate_random_instance(5, 3, 2, (1.0, 2.0), 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate_random_instance(5, 11, 2, (1.0, 2.0), 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            generate_random_instance(3, 3, 4, (1.0, 2.0), 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn integer_costs_are_integral() {
        let params = GeneratorParams::new(8, 12, 3, (1.0, 5.0)).integer();
        let inst = generate_instance(&params, 3).unwrap();
        assert!(inst.edges().iter().all(|e| e.cost.fract() == 0.0 && (1.0..=5.0).contains(&e.cost)));
    }

    #[test]
    fn density_edge_counts() {
        assert_eq!(GeneratorParams::edges_for_density(6, 0.0), 5);
        assert_eq!(GeneratorParams::edges_for_density(6, 1.0), 15);
    }
}
