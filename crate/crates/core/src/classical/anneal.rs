use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::instances::MulticutInstance;
use crate::qubo::QuboModel;
use crate::rng;

use super::{histogram_of, merge_best, SolverReport, Timer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cooling {
    Geometric,
    Linear,
}

impl std::str::FromStr for Cooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Cooling::Geometric),
            "linear" => Ok(Cooling::Linear),
            other => Err(Error::Parameter(format!("unknown cooling schedule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    pub final_temperature: f64,
    pub sweeps: usize,
    pub cooling: Cooling,
}

pub const DEFAULT_SWEEPS: usize = 1000;
pub const DEFAULT_READS: usize = 100;
pub const DEFAULT_FINAL_TEMPERATURE: f64 = 1e-2;

impl AnnealSchedule {
    pub fn new(
        initial_temperature: f64,
        final_temperature: f64,
        sweeps: usize,
        cooling: Cooling,
    ) -> Result<Self> {
        let schedule = AnnealSchedule {
            initial_temperature,
            final_temperature,
            sweeps,
            cooling,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// `T0 = Σ_e C(e)`, `Tf = 0.01`, geometric, 1000 sweeps.
    pub fn for_instance(instance: &MulticutInstance) -> Self {
        AnnealSchedule {
            initial_temperature: instance.total_cost().max(DEFAULT_FINAL_TEMPERATURE),
            final_temperature: DEFAULT_FINAL_TEMPERATURE,
            sweeps: DEFAULT_SWEEPS,
            cooling: Cooling::Geometric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, tf) = (self.initial_temperature, self.final_temperature);
        if !(t0.is_finite() && tf.is_finite() && tf > 0.0 && t0 >= tf) {
            return Err(Error::Parameter(format!(
                "temperatures must satisfy initial >= final > 0, got {t0} and {tf}"
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::Parameter("at least one sweep is required".into()));
        }
        Ok(())
    }

    /// Temperature during sweep `s` (0-based); the last sweep runs at the final temperature.
    pub fn temperature(&self, s: usize) -> f64 {
        if self.sweeps == 1 {
            return self.final_temperature;
        }
        let frac = s as f64 / (self.sweeps - 1) as f64;
        let (t0, tf) = (self.initial_temperature, self.final_temperature);
        match self.cooling {
            Cooling::Geometric => t0 * (tf / t0).powf(frac),
            Cooling::Linear => t0 + (tf - t0) * frac,
        }
    }
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct ReadOutcome {
    pub best: Bitstring,
    pub final_state: Bitstring,
    /// Energy of `final_state` tracked through incremental deltas only.
    pub tracked_final_energy: f64,
}

/// One annealing read on stream `read` of `seed`.
pub(crate) fn anneal_read(
    model: &QuboModel,
    schedule: &AnnealSchedule,
    seed: u64,
    read: u64,
) -> ReadOutcome {
    let n = model.size();
    let mut rng = rng::stream(seed, read);
    let mut x: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let mut energy = model
        .energy(&Bitstring::from_bits(x.clone()))
        .expect("state has model size");
    let mut best = x.clone();
    let mut best_energy = energy;
    let mut order: Vec<usize> = (0..n).collect();

    for sweep in 0..schedule.sweeps {
        let temperature = schedule.temperature(sweep);
        order.shuffle(&mut rng);
        for &i in &order {
            let delta = model.flip_delta(&x, i);
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp();
            if accept {
                x[i] = !x[i];
                energy += delta;
                if energy < best_energy {
                    best_energy = energy;
                    best.copy_from_slice(&x);
                }
            }
        }
    }
    ReadOutcome {
        best: Bitstring::from_bits(best),
        final_state: Bitstring::from_bits(x),
        tracked_final_energy: energy,
    }
}

/// Independent single-flip Metropolis reads; each read uses its own
/// generator derived from `(seed, read index)`, so the result does not
/// depend on how reads are scheduled across threads.
pub fn simulated_annealing(
    model: &QuboModel,
    schedule: &AnnealSchedule,
    num_reads: usize,
    seed: u64,
) -> Result<SolverReport> {
    schedule.validate()?;
    if num_reads == 0 {
        return Err(Error::Parameter("num_reads must be at least 1".into()));
    }
    let timer = Timer::start();
    let outcomes: Vec<(f64, Bitstring)> = (0..num_reads as u64)
        .into_par_iter()
        .map(|read| {
            let outcome = anneal_read(model, schedule, seed, read);
            let energy = model.energy(&outcome.best).expect("state has model size");
            (energy, outcome.best)
        })
        .collect();
    let (best_energy, best_bitstring) = merge_best(outcomes.iter().cloned())
        .expect("at least one read");
    let histogram = histogram_of(outcomes.into_iter().map(|(_, b)| b));
    Ok(SolverReport {
        backend: "sa".into(),
        seed: Some(seed),
        best_bitstring,
        best_energy,
        best_cut: None,
        samples_evaluated: (num_reads * schedule.sweeps * model.size()) as u64,
        wall_time_s: timer.elapsed(),
        converged: true,
        expectation: None,
        histogram: Some(histogram),
        trace: None,
    })
}
