//! Exact oracles and classical solvers.
//!
//! * [`brute_force_qubo`] enumerates every bitstring of a QUBO;
//! * [`brute_force_partition`] enumerates every terminal assignment;
//! * [`min_cut_k2`] solves the two-terminal case with max flow;
//! * [`greedy_isolation`] is the isolating-cut heuristic with the `2 − 2/k` guarantee;
//! * [`simulated_annealing`] is the single-flip Metropolis baseline.

mod anneal;
mod flow;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::instances::{validate_solution, CutSolution, MulticutInstance};
use crate::optim::OptimizerTrace;
use crate::qubo::{decode_bitstring, QuboModel};

pub use anneal::{
    simulated_annealing, AnnealSchedule, Cooling, DEFAULT_FINAL_TEMPERATURE, DEFAULT_READS,
    DEFAULT_SWEEPS,
};
use flow::FlowNetwork;

/// Largest QUBO size [`brute_force_qubo`] accepts.
pub const MAX_BRUTE_FORCE_VARIABLES: usize = 26;
/// Largest number of assignments [`brute_force_partition`] enumerates.
pub const MAX_PARTITIONS: u64 = 1 << 26;

/// Uniform result record for every backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub backend: String,
    pub seed: Option<u64>,
    pub best_bitstring: Bitstring,
    /// Always `qubo_energy(best_bitstring)`.
    pub best_energy: f64,
    pub best_cut: Option<CutSolution>,
    /// Bitstrings, proposals or objective calls evaluated, depending on the backend.
    pub samples_evaluated: u64,
    pub wall_time_s: f64,
    pub converged: bool,
    /// Final variational expectation value, for the variational backends.
    pub expectation: Option<f64>,
    /// Sampled bitstring counts (shots, or one entry per annealing read).
    pub histogram: Option<BTreeMap<Bitstring, u64>>,
    pub trace: Option<OptimizerTrace>,
}

impl SolverReport {
    /// Report for a backend that returns a partition directly.
    pub fn from_cut(
        backend: &str,
        model: &QuboModel,
        cut: CutSolution,
        samples_evaluated: u64,
        wall_time_s: f64,
    ) -> Result<Self> {
        let index = model
            .index()
            .ok_or_else(|| Error::Parameter("model was not built from an instance".into()))?;
        let best_bitstring = index.encode(&cut.assignment)?;
        let best_energy = model.energy(&best_bitstring)?;
        Ok(SolverReport {
            backend: backend.into(),
            seed: None,
            best_bitstring,
            best_energy,
            best_cut: Some(cut),
            samples_evaluated,
            wall_time_s,
            converged: true,
            expectation: None,
            histogram: None,
            trace: None,
        })
    }

    /// Fills `best_cut` when the best bitstring decodes to a feasible partition.
    pub fn attach_cut(&mut self, model: &QuboModel, instance: &MulticutInstance) -> Result<()> {
        let Some(index) = model.index() else {
            return Ok(());
        };
        self.best_cut = match decode_bitstring(index, &self.best_bitstring)? {
            crate::qubo::Decoded::Feasible(assignment) => {
                Some(validate_solution(instance, &assignment)?)
            }
            crate::qubo::Decoded::Infeasible(_) => None,
        };
        Ok(())
    }

    /// Equality of everything except the wall-clock time.
    pub fn eq_ignoring_timing(&self, other: &SolverReport) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        &a == other
    }

    /// Fraction of histogram mass on bitstrings satisfying `is_optimal`.
    pub fn sampled_fraction(&self, mut is_optimal: impl FnMut(&Bitstring) -> bool) -> Option<f64> {
        let hist = self.histogram.as_ref()?;
        let total: u64 = hist.values().sum();
        if total == 0 {
            return None;
        }
        let hits: u64 = hist
            .iter()
            .filter(|(b, _)| is_optimal(b))
            .map(|(_, &c)| c)
            .sum();
        Some(hits as f64 / total as f64)
    }
}

pub(crate) struct Timer(Instant);

impl Timer {
    pub(crate) fn start() -> Self {
        Timer(Instant::now())
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Lowest energy, ties to the lexicographically smallest bitstring.
pub(crate) fn merge_best(items: impl IntoIterator<Item = (f64, Bitstring)>) -> Option<(f64, Bitstring)> {
    items.into_iter().min_by(compare_candidates)
}

fn compare_candidates(a: &(f64, Bitstring), b: &(f64, Bitstring)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

pub(crate) fn histogram_of(bits: impl IntoIterator<Item = Bitstring>) -> BTreeMap<Bitstring, u64> {
    let mut hist = BTreeMap::new();
    for b in bits {
        *hist.entry(b).or_insert(0) += 1;
    }
    hist
}

/// True when basis index `a` is lexicographically before `b` (bit 0 most significant).
fn index_lex_less(a: u64, b: u64) -> bool {
    let diff = a ^ b;
    diff != 0 && (a >> diff.trailing_zeros()) & 1 == 0
}

const GRAY_BLOCK_BITS: usize = 16;

/// Best `(energy, index)` over the Gray-code block whose high bits are `block`.
fn brute_force_block(model: &QuboModel, block: u64, low_bits: usize) -> (f64, u64) {
    let n = model.size();
    let start = block << low_bits;
    let mut x: Vec<bool> = (0..n).map(|i| (start >> i) & 1 == 1).collect();
    let mut index = start;
    let mut tracked = model.energy_of_index(index);
    let mut best = (tracked, index);
    for g in 1u64..(1u64 << low_bits) {
        let bit = g.trailing_zeros() as usize;
        tracked += model.flip_delta(&x, bit);
        x[bit] = !x[bit];
        index ^= 1 << bit;
        // Incremental energies drift slightly; anything close to the best
        // is re-evaluated exactly before comparing.
        let slack = 1e-7 * (1.0 + best.0.abs());
        if tracked < best.0 + slack {
            let exact = model.energy_of_index(index);
            if exact < best.0 || (exact == best.0 && index_lex_less(index, best.1)) {
                best = (exact, index);
            }
        }
    }
    best
}

/// Exhaustive QUBO minimum over all `2^N` bitstrings, ties broken by the
/// lexicographically smallest bitstring.
pub fn brute_force_qubo(model: &QuboModel) -> Result<SolverReport> {
    let n = model.size();
    if n > MAX_BRUTE_FORCE_VARIABLES {
        return Err(Error::Capacity(format!(
            "brute force over {n} variables exceeds the limit of {MAX_BRUTE_FORCE_VARIABLES}"
        )));
    }
    let timer = Timer::start();
    let low_bits = n.min(GRAY_BLOCK_BITS);
    let blocks = 1u64 << (n - low_bits);
    let (best_energy, best_index) = (0..blocks)
        .into_par_iter()
        .map(|block| brute_force_block(model, block, low_bits))
        .reduce_with(|a, b| {
            if b.0 < a.0 || (b.0 == a.0 && index_lex_less(b.1, a.1)) {
                b
            } else {
                a
            }
        })
        .expect("at least one block");
    let best_bitstring = Bitstring::from_index(best_index, n);
    debug_assert_eq!(model.energy(&best_bitstring).unwrap(), best_energy);
    Ok(SolverReport {
        backend: "brute_qubo".into(),
        seed: None,
        best_bitstring,
        best_energy,
        best_cut: None,
        samples_evaluated: 1u64 << n,
        wall_time_s: timer.elapsed(),
        converged: true,
        expectation: None,
        histogram: None,
        trace: None,
    })
}

/// Number of assignments [`brute_force_partition`] would enumerate, if it fits in `u64`.
pub fn partition_count(instance: &MulticutInstance) -> Option<u64> {
    let free = (instance.num_vertices() - instance.k()) as u32;
    (instance.k() as u64).checked_pow(free)
}

/// Minimum cut over every assignment of non-terminal vertices to terminals.
///
/// Ties resolve to the assignment whose one-hot encoding is lexicographically
/// smallest, matching [`brute_force_qubo`] on the full encoding.
pub fn brute_force_partition(instance: &MulticutInstance) -> Result<CutSolution> {
    let count = partition_count(instance).filter(|&c| c <= MAX_PARTITIONS).ok_or_else(|| {
        Error::Capacity(format!(
            "{}^{} assignments exceed the enumeration limit",
            instance.k(),
            instance.num_vertices() - instance.k()
        ))
    })?;
    let k = instance.k();
    let terminals = instance.terminals();
    let free: Vec<usize> = (0..instance.num_vertices())
        .filter(|&v| !instance.is_terminal(v))
        .collect();
    // position[v] = terminal position of v's side
    let mut position: Vec<usize> = (0..instance.num_vertices())
        .map(|v| instance.terminal_position(v).unwrap_or(0))
        .collect();
    let cost_of = |position: &[usize]| -> f64 {
        instance
            .edges()
            .iter()
            .filter(|e| position[e.u] != position[e.v])
            .map(|e| e.cost)
            .sum()
    };
    // One-hot blocks compare smaller when the selected position is larger.
    let key_less = |a: &[usize], b: &[usize]| -> bool {
        match a.iter().zip(b).find(|(x, y)| x != y) {
            Some((x, y)) => x > y,
            None => false,
        }
    };

    let mut best_cost = cost_of(&position);
    let mut best = position.clone();
    for _ in 1..count {
        // odometer increment over the free vertices
        for &v in &free {
            position[v] += 1;
            if position[v] < k {
                break;
            }
            position[v] = 0;
        }
        let cost = cost_of(&position);
        if cost < best_cost || (cost == best_cost && key_less(&position, &best)) {
            best_cost = cost;
            best.copy_from_slice(&position);
        }
    }
    let assignment: Vec<usize> = best.iter().map(|&p| terminals[p]).collect();
    validate_solution(instance, &assignment)
}

/// Minimum cut between the terminal at `position` and all other terminals.
/// Returns the source-side vertex set and the max-flow value.
pub(crate) fn isolating_cut(instance: &MulticutInstance, position: usize) -> (Vec<bool>, f64) {
    let n = instance.num_vertices();
    let sink = n;
    let mut net = FlowNetwork::new(n + 1);
    for e in instance.edges() {
        net.add_arc_pair(e.u, e.v, e.cost, e.cost);
    }
    let unbounded = 1.0 + instance.total_cost();
    for (pos, &t) in instance.terminals().iter().enumerate() {
        if pos != position {
            net.add_arc_pair(t, sink, unbounded, 0.0);
        }
    }
    let source = instance.terminals()[position];
    let flow = net.max_flow(source, sink);
    let mut side = net.source_side(source);
    side.truncate(n);
    (side, flow)
}

/// Two-terminal minimum cut by shortest augmenting paths; the first terminal
/// keeps the residual-reachable side.
pub fn min_cut_k2(instance: &MulticutInstance) -> Result<CutSolution> {
    if instance.k() != 2 {
        return Err(Error::Parameter(format!(
            "max-flow oracle needs exactly 2 terminals, instance has {}",
            instance.k()
        )));
    }
    let (side, _flow) = isolating_cut(instance, 0);
    let [t0, t1] = [instance.terminals()[0], instance.terminals()[1]];
    let assignment: Vec<usize> = side.iter().map(|&s| if s { t0 } else { t1 }).collect();
    validate_solution(instance, &assignment)
}

/// Isolating-cut heuristic: union of every terminal's minimum isolating cut
/// except the most expensive, then a prune pass restoring edges that are not
/// needed for separation. Cost is at most `(2 − 2/k)·OPT`.
pub fn greedy_isolation(instance: &MulticutInstance) -> Result<CutSolution> {
    let k = instance.k();
    let cuts: Vec<(Vec<bool>, f64)> = (0..k)
        .map(|pos| {
            let (side, _) = isolating_cut(instance, pos);
            let mask: Vec<bool> = instance.edges().iter().map(|e| side[e.u] != side[e.v]).collect();
            let cost = instance
                .edges()
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(e, _)| e.cost)
                .sum();
            (mask, cost)
        })
        .collect();
    // first maximum is dropped
    let heaviest = cuts
        .iter()
        .enumerate()
        .fold(0, |best, (i, c)| if c.1 > cuts[best].1 { i } else { best });

    let mut removed = vec![false; instance.num_edges()];
    for (i, (mask, _)) in cuts.iter().enumerate() {
        if i != heaviest {
            for (r, &m) in removed.iter_mut().zip(mask) {
                *r |= m;
            }
        }
    }

    let mut order: Vec<usize> = (0..instance.num_edges()).filter(|&i| removed[i]).collect();
    order.sort_by(|&a, &b| {
        instance.edges()[b]
            .cost
            .total_cmp(&instance.edges()[a].cost)
            .then(a.cmp(&b))
    });
    for idx in order {
        removed[idx] = false;
        if !instance.separates_terminals(&removed) {
            removed[idx] = true;
        }
    }

    let keep: Vec<bool> = removed.iter().map(|&r| !r).collect();
    let label = instance.components(&keep);
    let mut owner = vec![instance.terminals()[0]; instance.num_vertices()];
    for &t in instance.terminals() {
        owner[label[t]] = t;
    }
    let assignment: Vec<usize> = label.iter().map(|&c| owner[c]).collect();
    validate_solution(instance, &assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_random_instance, Edge};
    use crate::qubo::{build_qubo, Decoded};

    fn star(k: usize) -> MulticutInstance {
        let edges = (1..k).map(|leaf| Edge::new(0, leaf, leaf as f64)).collect();
        MulticutInstance::new(k, edges, (0..k).collect()).unwrap()
    }

    #[test]
    fn brute_force_qubo_fixtures() {
        let toy3 = build_qubo(&MulticutInstance::toy3(), None).unwrap();
        assert_eq!(brute_force_qubo(&toy3).unwrap().best_energy, 1.0);
        let toy4 = build_qubo(&MulticutInstance::toy4(), None).unwrap();
        assert_eq!(brute_force_qubo(&toy4).unwrap().best_energy, 2.0);
        let single = MulticutInstance::new(2, vec![Edge::new(0, 1, 5.0)], vec![0, 1]).unwrap();
        let model = build_qubo(&single, None).unwrap();
        assert_eq!(brute_force_qubo(&model).unwrap().best_energy, 5.0);
    }

    #[test]
    fn brute_force_qubo_tie_break_is_lexicographic() {
        // TOY-4 has four optimal partitions; the smallest encoding wins.
        let inst = MulticutInstance::toy4();
        let model = build_qubo(&inst, None).unwrap();
        let report = brute_force_qubo(&model).unwrap();
        let mut minimizers: Vec<Bitstring> = (0..1u64 << model.size())
            .map(|b| Bitstring::from_index(b, model.size()))
            .filter(|b| model.energy(b).unwrap() == 2.0)
            .collect();
        minimizers.sort();
        assert_eq!(minimizers.len(), 4);
        assert_eq!(report.best_bitstring, minimizers[0]);
        let partition = brute_force_partition(&inst).unwrap();
        assert_eq!(
            decode_bitstring(model.index().unwrap(), &report.best_bitstring).unwrap(),
            Decoded::Feasible(partition.assignment)
        );
    }

    #[test]
    fn brute_force_qubo_capacity() {
        let model = QuboModel::from_terms(27, [], 0.0).unwrap();
        assert!(matches!(brute_force_qubo(&model), Err(Error::Capacity(_))));
    }

    #[test]
    fn brute_force_qubo_spans_blocks() {
        // 18 variables forces several Gray-code blocks.
        let terms: Vec<(usize, usize, f64)> = (0..18)
            .map(|i| (i, i, if i == 17 { -2.0 } else { 1.0 }))
            .chain((0..17).map(|i| (i, i + 1, 0.5)))
            .collect();
        let model = QuboModel::from_terms(18, terms, 0.0).unwrap();
        let report = brute_force_qubo(&model).unwrap();
        assert_eq!(report.best_energy, -2.0);
        assert_eq!(report.best_bitstring, Bitstring::from_index(1 << 17, 18));
    }

    #[test]
    fn partition_fixtures() {
        assert_eq!(brute_force_partition(&MulticutInstance::toy3()).unwrap().cut_cost, 1.0);
        assert_eq!(brute_force_partition(&MulticutInstance::toy4()).unwrap().cut_cost, 2.0);
        let s = star(4);
        let cut = brute_force_partition(&s).unwrap();
        assert_eq!(cut.cut_edges.len(), 3);
        assert_eq!(cut.cut_cost, 6.0);
    }

    #[test]
    fn partition_capacity() {
        let inst = generate_random_instance(40, 39, 2, (1.0, 1.0), 1).unwrap();
        assert!(matches!(brute_force_partition(&inst), Err(Error::Capacity(_))));
    }

    #[test]
    fn max_flow_fixtures() {
        assert_eq!(min_cut_k2(&MulticutInstance::toy3()).unwrap().cut_cost, 1.0);
        assert_eq!(min_cut_k2(&MulticutInstance::toy4()).unwrap().cut_cost, 2.0);
        let pair = MulticutInstance::new(2, vec![Edge::new(0, 1, 5.0)], vec![0, 1]).unwrap();
        assert_eq!(min_cut_k2(&pair).unwrap().cut_cost, 5.0);
        assert!(matches!(min_cut_k2(&star(3)), Err(Error::Parameter(_))));
    }

    #[test]
    fn flow_value_equals_cut_cost() {
        for seed in 0..20 {
            let inst = generate_random_instance(12, 25, 2, (0.1, 9.0), seed).unwrap();
            let (_, flow) = isolating_cut(&inst, 0);
            let cut = min_cut_k2(&inst).unwrap();
            assert!((flow - cut.cut_cost).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn greedy_fixtures() {
        assert_eq!(greedy_isolation(&MulticutInstance::toy3()).unwrap().cut_cost, 1.0);
        assert_eq!(greedy_isolation(&MulticutInstance::toy4()).unwrap().cut_cost, 2.0);
        let triangle = MulticutInstance::new(
            3,
            vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0), Edge::new(0, 2, 1.0)],
            vec![0, 1, 2],
        )
        .unwrap();
        // every edge of a terminal triangle must go: each isolating cut costs 2
        let cut = greedy_isolation(&triangle).unwrap();
        assert_eq!(cut.cut_cost, 3.0);
        assert_eq!(brute_force_partition(&triangle).unwrap().cut_cost, 3.0);
    }

    #[test]
    fn triangle_with_hub() {
        // Terminals 0, 1, 2 joined through a hub vertex 3 with unit spokes and
        // a unit triangle; isolating cuts cost 3 each.
        let inst = MulticutInstance::new(
            4,
            vec![
                Edge::new(0, 1, 1.0),
                Edge::new(1, 2, 1.0),
                Edge::new(0, 2, 1.0),
                Edge::new(0, 3, 1.0),
                Edge::new(1, 3, 1.0),
                Edge::new(2, 3, 1.0),
            ],
            vec![0, 1, 2],
        )
        .unwrap();
        let opt = brute_force_partition(&inst).unwrap().cut_cost;
        let greedy = greedy_isolation(&inst).unwrap().cut_cost;
        assert_eq!(opt, 5.0);
        assert!(greedy <= (2.0 - 2.0 / 3.0) * opt + 1e-9);
    }

    #[test]
    fn report_json_round_trip() {
        let inst = MulticutInstance::toy3();
        let model = build_qubo(&inst, None).unwrap();
        let cut = brute_force_partition(&inst).unwrap();
        let mut report = SolverReport::from_cut("exact", &model, cut, 2, 0.0).unwrap();
        report.histogram = Some(histogram_of([report.best_bitstring.clone()]));
        let json = serde_json::to_string(&report).unwrap();
        let back: SolverReport = serde_json::from_str(&json).unwrap();
        assert!(back.eq_ignoring_timing(&report));
        assert_eq!(report.best_energy, 1.0);
    }
}
