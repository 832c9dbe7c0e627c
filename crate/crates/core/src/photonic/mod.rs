//! Linear-optical variational solver: a Fock-space simulator for meshes of
//! beam splitters and phase shifters, with bits read out as photon-count parity.

mod circuit;
mod fock;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::classical::{histogram_of, merge_best, SolverReport, Timer};
use crate::error::{Error, Result};
use crate::optim::{self, OptimizerConfig};
use crate::qubo::{decode_bitstring, Encoding, QuboModel};
use crate::rng;

pub use circuit::{build_generic_interferometer, run_circuit, Angle, Gate, InterferometerCircuit};
pub use fock::{basis_size, FockBasis, FockSimulator, FockState, MAX_BASIS_SIZE};

pub const DEFAULT_FINAL_SHOTS: usize = 10_000;
pub const DEFAULT_MAX_EVALUATIONS: usize = 1500;

/// `x_i = n_i mod 2`.
pub fn parity_decode(occupation: &[u8]) -> Bitstring {
    Bitstring::from_bits(occupation.iter().map(|n| n % 2 == 1).collect())
}

/// Photon number for a model: the smallest `P >= |V|` whose parity matches
/// the popcount of feasible bitstrings (`|V|` in full encoding, `|V| − k` in
/// reduced). Models without a variable index get `ceil(N / 2)` photons.
pub fn default_photon_count(model: &QuboModel) -> usize {
    match model.index() {
        Some(index) => {
            let v = index.num_vertices();
            let feasible = match index.encoding() {
                Encoding::Full => v,
                Encoding::Reduced => v - index.terminals().len(),
            };
            if (v - feasible) % 2 == 0 {
                v
            } else {
                v + 1
            }
        }
        None => model.size().div_ceil(2),
    }
}

/// `photons` spread one per mode from mode 0, wrapping around when there are
/// more photons than modes.
pub fn spread_input(modes: usize, photons: usize) -> Vec<u8> {
    let mut occ = vec![0u8; modes];
    for i in 0..photons {
        occ[i % modes] += 1;
    }
    occ
}

pub fn default_input(model: &QuboModel) -> Vec<u8> {
    spread_input(model.size(), default_photon_count(model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectationMode {
    Exact,
    Shots { count: usize, seed: u64 },
}

/// A model, circuit and input bound together, with per-basis-state energies
/// of the parity-decoded readout precomputed.
#[derive(Debug)]
pub struct PhotonicProblem {
    circuit: InterferometerCircuit,
    input: Vec<u8>,
    simulator: FockSimulator,
    energies: Vec<f64>,
}

impl PhotonicProblem {
    pub fn new(model: &QuboModel, circuit: InterferometerCircuit, input: Vec<u8>) -> Result<Self> {
        if circuit.modes() != model.size() {
            return Err(Error::Dimension {
                expected: model.size(),
                actual: circuit.modes(),
            });
        }
        if input.len() != model.size() {
            return Err(Error::Dimension {
                expected: model.size(),
                actual: input.len(),
            });
        }
        let photons = input.iter().map(|&n| n as usize).sum();
        let simulator = FockSimulator::new(model.size(), photons)?;
        let energies = simulator
            .basis()
            .iter()
            .map(|occ| model.energy(&parity_decode(occ)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(PhotonicProblem {
            circuit,
            input,
            simulator,
            energies,
        })
    }

    pub fn circuit(&self) -> &InterferometerCircuit {
        &self.circuit
    }

    pub fn input(&self) -> &[u8] {
        &self.input
    }

    pub fn simulator(&self) -> &FockSimulator {
        &self.simulator
    }

    /// Energy of the parity readout of each basis state.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn output_state(&self, params: &[f64]) -> Result<FockState> {
        run_circuit(&self.simulator, &self.circuit, &self.input, params)
    }

    pub fn expectation(&self, params: &[f64], mode: ExpectationMode) -> Result<f64> {
        let probs = self.output_state(params)?.probabilities();
        match mode {
            ExpectationMode::Exact => Ok(probs.iter().zip(&self.energies).map(|(p, e)| p * e).sum()),
            ExpectationMode::Shots { count, seed } => {
                let counts = sample_indices(&probs, count, seed)?;
                let total: f64 = counts.iter().map(|(&i, &c)| self.energies[i] * c as f64).sum();
                Ok(total / count as f64)
            }
        }
    }

    /// Parity-decoded bitstring counts from `shots` measurements.
    pub fn sample(&self, params: &[f64], shots: usize, seed: u64) -> Result<BTreeMap<Bitstring, u64>> {
        let probs = self.output_state(params)?.probabilities();
        let counts = sample_indices(&probs, shots, seed)?;
        let mut out = BTreeMap::new();
        for (i, c) in counts {
            *out.entry(parity_decode(self.simulator.basis().state(i))).or_insert(0) += c;
        }
        Ok(out)
    }
}

fn sample_indices(probs: &[f64], shots: usize, seed: u64) -> Result<BTreeMap<usize, u64>> {
    if shots == 0 {
        return Err(Error::Parameter("shots must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut rng = rng::seeded(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let r = rng.gen::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
        *counts.entry(idx).or_insert(0) += 1;
    }
    Ok(counts)
}

/// `Σ_n p(n) · E(parity(n))`, exactly or estimated from shots.
pub fn photonic_expectation(
    model: &QuboModel,
    circuit: &InterferometerCircuit,
    input: &[u8],
    params: &[f64],
    mode: ExpectationMode,
) -> Result<f64> {
    PhotonicProblem::new(model, circuit.clone(), input.to_vec())?.expectation(params, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Exact,
    /// Fresh shots per evaluation, seeded from the run seed and evaluation count.
    Shots(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonicConfig {
    /// Bounds default to `[0, 2π]` on every angle when unset.
    pub optimizer: OptimizerConfig,
    pub objective: Objective,
    pub final_shots: usize,
    /// Input occupation; [`default_input`] when unset.
    pub input: Option<Vec<u8>>,
}

impl Default for PhotonicConfig {
    fn default() -> Self {
        PhotonicConfig {
            optimizer: OptimizerConfig::nelder_mead(DEFAULT_MAX_EVALUATIONS, 1e-10),
            objective: Objective::Exact,
            final_shots: DEFAULT_FINAL_SHOTS,
            input: None,
        }
    }
}

/// Optimizes every angle of the generic mesh, then samples the optimum and
/// reports the lowest-energy feasible readout (lowest overall if none is feasible).
pub fn photonic_optimize(model: &QuboModel, config: &PhotonicConfig, seed: u64) -> Result<SolverReport> {
    let timer = Timer::start();
    let circuit = build_generic_interferometer(model.size())?;
    let input = config.input.clone().unwrap_or_else(|| default_input(model));
    let problem = PhotonicProblem::new(model, circuit, input)?;
    let n = problem.circuit().num_params();

    let mut optimizer = config.optimizer.clone();
    optimizer.seed = seed;
    let bounds = optimizer.bounds.get_or_insert_with(|| vec![(0.0, TAU); n]);
    if bounds.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: bounds.len(),
        });
    }
    let mut init_rng = rng::seeded(seed);
    let initial: Vec<f64> = (0..n).map(|_| init_rng.gen_range(0.0..TAU)).collect();

    let mut evaluation = 0u64;
    let objective_mode = config.objective;
    let mut objective = |x: &[f64]| {
        evaluation += 1;
        let mode = match objective_mode {
            Objective::Exact => ExpectationMode::Exact,
            Objective::Shots(count) => ExpectationMode::Shots {
                count,
                seed: rng::mix_seed(seed, 1 + evaluation),
            },
        };
        problem.expectation(x, mode).unwrap_or(f64::NAN)
    };
    let result = optim::minimize(&mut objective, &initial, &optimizer)?;

    let histogram = problem.sample(&result.best_point, config.final_shots, rng::mix_seed(seed, 0))?;
    let scored = |feasible_only: bool| {
        merge_best(histogram.keys().filter_map(|b| {
            let keep = !feasible_only
                || model.index().is_some_and(|index| {
                    decode_bitstring(index, b).is_ok_and(|d| d.is_feasible())
                });
            keep.then(|| (model.energy(b).expect("readout has model size"), b.clone()))
        }))
    };
    let (best_energy, best_bitstring) = scored(model.index().is_some())
        .or_else(|| scored(false))
        .expect("at least one shot");
    Ok(SolverReport {
        backend: "photonic".into(),
        seed: Some(seed),
        best_bitstring,
        best_energy,
        best_cut: None,
        samples_evaluated: result.evaluations() as u64,
        wall_time_s: timer.elapsed(),
        converged: result.converged(),
        expectation: Some(result.best_value),
        histogram: Some(histogram),
        trace: Some(result.trace),
    })
}

/// Histogram of decoded readouts aggregated from raw occupation samples.
pub fn parity_histogram<'a>(occupations: impl IntoIterator<Item = &'a [u8]>) -> BTreeMap<Bitstring, u64> {
    histogram_of(occupations.into_iter().map(parity_decode))
}
