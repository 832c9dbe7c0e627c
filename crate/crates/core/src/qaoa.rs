//! Statevector QAOA over the diagonal QUBO cost Hamiltonian.
//!
//! The ansatz state is
//! `|ψ(γ, β)⟩ = Π_ℓ e^{−iβ_ℓ H_M} e^{−iγ_ℓ H_C} |+⟩^{⊗n}` with `H_M = Σ_i X_i`.
//! `H_C` is diagonal in the computational basis, so the cost layer is an
//! exact per-amplitude phase `e^{−iγ E_b}`. Basis index `b` holds the
//! bitstring with `x_i` equal to bit `i` of `b`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::classical::{merge_best, SolverReport, Timer};
use crate::error::{Error, Result};
use crate::optim::{self, Method, OptimizationResult, OptimizerConfig};
use crate::qubo::QuboModel;
use crate::rng;

pub const MAX_QUBITS: usize = 24;
pub const DEFAULT_SHOTS: usize = 4000;

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("need at least one qubit".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "{n} qubits exceed the statevector limit of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        *amplitudes
            .get_mut(index)
            .ok_or_else(|| Error::Parameter(format!("basis index {index} out of range")))? =
            Complex64::new(1.0, 0.0);
        Ok(Statevector {
            num_qubits,
            amplitudes,
        })
    }

    /// State from raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Parameter(format!("{len} amplitudes is not 2^n for n >= 1")));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubits(num_qubits)?;
        Ok(Statevector {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// `|+⟩^{⊗n}`: every amplitude `2^{−n/2}`.
pub fn prepare_plus_state(n: usize) -> Result<Statevector> {
    check_qubits(n)?;
    let dim = 1usize << n;
    let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    Ok(Statevector {
        num_qubits: n,
        amplitudes: vec![amp; dim],
    })
}

/// QUBO energy of every basis state; the spectrum of `H_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    energies: Vec<f64>,
}

impl EnergyTable {
    pub fn new(model: &QuboModel) -> Result<Self> {
        check_qubits(model.size())?;
        let energies = (0..1u64 << model.size())
            .map(|b| model.energy_of_index(b))
            .collect();
        Ok(EnergyTable { energies })
    }

    pub fn from_energies(energies: Vec<f64>) -> Result<Self> {
        if !energies.len().is_power_of_two() || energies.len() < 2 {
            return Err(Error::Parameter("energy table length must be 2^n".into()));
        }
        Ok(EnergyTable { energies })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn num_qubits(&self) -> usize {
        self.energies.len().trailing_zeros() as usize
    }

    pub fn min(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len() as f64
    }
}

/// Multiplies amplitude `b` by `e^{−iγ E_b}`.
pub fn apply_cost_layer(state: &mut Statevector, energies: &EnergyTable, gamma: f64) -> Result<()> {
    if energies.energies.len() != state.amplitudes.len() {
        return Err(Error::Dimension {
            expected: state.amplitudes.len(),
            actual: energies.energies.len(),
        });
    }
    for (amp, &e) in state.amplitudes.iter_mut().zip(&energies.energies) {
        *amp *= Complex64::from_polar(1.0, -gamma * e);
    }
    Ok(())
}

/// `e^{−iβX}` on one qubit: `[[cos β, −i sin β], [−i sin β, cos β]]`.
pub fn apply_rx(state: &mut Statevector, qubit: usize, beta: f64) {
    assert!(qubit < state.num_qubits, "qubit {qubit} out of range");
    let (s, c) = beta.sin_cos();
    let minus_i_sin = Complex64::new(0.0, -s);
    let stride = 1usize << qubit;
    for chunk in state.amplitudes.chunks_exact_mut(2 * stride) {
        let (low, high) = chunk.split_at_mut(stride);
        for (a0, a1) in low.iter_mut().zip(high.iter_mut()) {
            let (x0, x1) = (*a0, *a1);
            *a0 = x0 * c + x1 * minus_i_sin;
            *a1 = x0 * minus_i_sin + x1 * c;
        }
    }
}

/// `e^{−iβ Σ_i X_i}`, qubits in ascending order.
pub fn apply_mixer_layer(state: &mut Statevector, beta: f64) {
    for q in 0..state.num_qubits {
        apply_rx(state, q, beta);
    }
}

/// Angles `γ_1..γ_p` and `β_1..β_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    gammas: Vec<f64>,
    betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(Error::Parameter(format!(
                "need equal, non-zero numbers of gammas and betas (got {} and {})",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("QAOA angles must be finite".into()));
        }
        Ok(QaoaParams { gammas, betas })
    }

    /// Every layer at `(γ, β)`.
    pub fn uniform(depth: usize, gamma: f64, beta: f64) -> Result<Self> {
        QaoaParams::new(vec![gamma; depth], vec![beta; depth])
    }

    /// From the flat layout `[γ_1..γ_p, β_1..β_p]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::Parameter("flat QAOA parameter vector has odd length".into()));
        }
        let (g, b) = flat.split_at(flat.len() / 2);
        QaoaParams::new(g.to_vec(), b.to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// The QAOA state for `params` starting from `|+⟩^{⊗n}`.
pub fn evolve(energies: &EnergyTable, params: &QaoaParams) -> Statevector {
    let mut state = prepare_plus_state(energies.num_qubits()).expect("table size already checked");
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        apply_cost_layer(&mut state, energies, gamma).expect("sizes agree");
        apply_mixer_layer(&mut state, beta);
    }
    state
}

/// `⟨ψ|H_C|ψ⟩ = Σ_b |amp_b|² E_b` for a prebuilt table.
pub fn expectation_with_table(energies: &EnergyTable, params: &QaoaParams) -> f64 {
    let state = evolve(energies, params);
    state
        .amplitudes
        .iter()
        .zip(&energies.energies)
        .map(|(a, e)| a.norm_sqr() * e)
        .sum()
}

pub fn qaoa_expectation(model: &QuboModel, params: &QaoaParams) -> Result<f64> {
    let table = EnergyTable::new(model)?;
    Ok(expectation_with_table(&table, params))
}

/// Draws `shots` basis states from `|amp|²`.
pub fn sample_state(state: &Statevector, shots: usize, seed: u64) -> Result<BTreeMap<Bitstring, u64>> {
    if shots == 0 {
        return Err(Error::Parameter("shots must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(state.amplitudes.len());
    let mut acc = 0.0;
    for a in &state.amplitudes {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let mut rng = rng::seeded(seed);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let r = rng.gen::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= r).min(cumulative.len() - 1);
        *counts.entry(idx as u64).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(idx, c)| (Bitstring::from_index(idx, state.num_qubits), c))
        .collect())
}

pub fn qaoa_sample(
    model: &QuboModel,
    params: &QaoaParams,
    shots: usize,
    seed: u64,
) -> Result<BTreeMap<Bitstring, u64>> {
    let table = EnergyTable::new(model)?;
    sample_state(&evolve(&table, params), shots, seed)
}

/// Exhaustive `p = 1` scan of `points × points` angles over `[0, π]²`
/// (flat order `[γ, β]`).
pub fn grid_scan_p1(table: &EnergyTable, points: usize) -> Result<OptimizationResult> {
    let grid = optim::linspace(0.0, PI, points);
    let mut objective = |x: &[f64]| {
        let params = QaoaParams::new(vec![x[0]], vec![x[1]]).expect("finite grid angles");
        expectation_with_table(table, &params)
    };
    optim::grid_scan(&mut objective, &[grid.clone(), grid])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaConfig {
    pub depth: usize,
    pub optimizer: OptimizerConfig,
    pub shots: usize,
    /// Starting angles; defaults to every layer at `γ = π/4, β = π/2`.
    pub initial: Option<QaoaParams>,
}

impl QaoaConfig {
    /// Nelder–Mead inside `[0, π]` from `γ = π/4, β = π/2`, 4000 final shots.
    pub fn new(depth: usize) -> Self {
        QaoaConfig {
            depth,
            optimizer: OptimizerConfig {
                max_evaluations: 1000,
                tolerance: 1e-10,
                bounds: Some(vec![(0.0, PI); 2 * depth]),
                ..OptimizerConfig::default()
            },
            shots: DEFAULT_SHOTS,
            initial: None,
        }
    }

    pub fn grid(points: usize) -> Self {
        let mut config = QaoaConfig::new(1);
        config.optimizer.method = Method::GridScan;
        config.optimizer.grid_points = points;
        config
    }
}

/// Minimizes the QAOA expectation, then samples `config.shots` shots at the
/// optimum and reports the lowest-energy sampled bitstring.
pub fn qaoa_optimize(model: &QuboModel, config: &QaoaConfig, seed: u64) -> Result<SolverReport> {
    if config.depth == 0 {
        return Err(Error::Parameter("QAOA depth must be at least 1".into()));
    }
    let timer = Timer::start();
    let table = EnergyTable::new(model)?;
    let initial = match &config.initial {
        Some(p) if p.depth() == config.depth => p.clone(),
        Some(p) => {
            return Err(Error::Parameter(format!(
                "initial parameters have depth {}, expected {}",
                p.depth(),
                config.depth
            )))
        }
        None => QaoaParams::uniform(config.depth, FRAC_PI_4, FRAC_PI_2)?,
    };
    let mut optimizer = config.optimizer.clone();
    optimizer.seed = seed;
    if optimizer.bounds.as_ref().is_some_and(|b| b.len() != 2 * config.depth) {
        return Err(Error::Dimension {
            expected: 2 * config.depth,
            actual: optimizer.bounds.as_ref().map_or(0, Vec::len),
        });
    }
    let mut objective = |x: &[f64]| match QaoaParams::from_flat(x) {
        Ok(params) => expectation_with_table(&table, &params),
        Err(_) => f64::NAN,
    };
    let result = optim::minimize(&mut objective, &initial.to_flat(), &optimizer)?;
    let best_params = QaoaParams::from_flat(&result.best_point)?;
    let state = evolve(&table, &best_params);
    let histogram = sample_state(&state, config.shots, rng::mix_seed(seed, 1))?;
    let (best_energy, best_bitstring) = merge_best(
        histogram
            .keys()
            .map(|b| (table.energies[b.to_index() as usize], b.clone())),
    )
    .expect("at least one shot");
    Ok(SolverReport {
        backend: "qaoa".into(),
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
