use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fock::{FockSimulator, FockState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Index into the flat parameter vector.
    Param(usize),
    Fixed(f64),
}

impl Angle {
    fn resolve(self, params: &[f64]) -> f64 {
        match self {
            Angle::Param(i) => params[i],
            Angle::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    BeamSplitter { p: usize, q: usize, theta: Angle, phi: Angle },
    PhaseShifter { mode: usize, phi: Angle },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerCircuit {
    modes: usize,
    gates: Vec<Gate>,
    num_params: usize,
}

impl InterferometerCircuit {
    /// Validates modes and that free angles use each of `0..n` exactly once.
    pub fn new(modes: usize, gates: Vec<Gate>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Parameter("circuit needs at least one mode".into()));
        }
        let mut used = Vec::new();
        let mut mark = |a: Angle| {
            if let Angle::Param(i) = a {
                used.push(i);
            }
        };
        for gate in &gates {
            match *gate {
                Gate::BeamSplitter { p, q, theta, phi } => {
                    if p == q || p >= modes || q >= modes {
                        return Err(Error::Parameter(format!("invalid beam splitter modes ({p}, {q})")));
                    }
                    mark(theta);
                    mark(phi);
                }
                Gate::PhaseShifter { mode, phi } => {
                    if mode >= modes {
                        return Err(Error::Parameter(format!("invalid phase shifter mode {mode}")));
                    }
                    mark(phi);
                }
            }
        }
        used.sort_unstable();
        if used.iter().enumerate().any(|(k, &i)| k != i) {
            return Err(Error::Parameter(
                "free angles must use parameter indices 0..n exactly once".into(),
            ));
        }
        Ok(InterferometerCircuit {
            modes,
            gates,
            num_params: used.len(),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn beam_splitter_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::BeamSplitter { .. }))
            .count()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(Error::Parameter(format!(
                "circuit has {} parameters, got {}",
                self.num_params,
                params.len()
            )));
        }
        Ok(())
    }

    /// `M × M` row-major mode transformation; column `j` is the image of `a_j†`.
    pub fn mode_unitary(&self, params: &[f64]) -> Result<Vec<Complex64>> {
        self.check_params(params)?;
        let m = self.modes;
        let mut u = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..m {
            u[i * m + i] = Complex64::new(1.0, 0.0);
        }
        for gate in &self.gates {
            match *gate {
                Gate::BeamSplitter { p, q, theta, phi } => {
                    let (s, c) = theta.resolve(params).sin_cos();
                    let phi = phi.resolve(params);
                    let upq = -Complex64::from_polar(s, phi);
                    let uqp = Complex64::from_polar(s, -phi);
                    for col in 0..m {
                        let (a, b) = (u[p * m + col], u[q * m + col]);
                        u[p * m + col] = a * c + upq * b;
                        u[q * m + col] = uqp * a + b * c;
                    }
                }
                Gate::PhaseShifter { mode, phi } => {
                    let phase = Complex64::from_polar(1.0, phi.resolve(params));
                    for col in 0..m {
                        u[mode * m + col] *= phase;
                    }
                }
            }
        }
        Ok(u)
    }

    /// Text dump with angles resolved against `params`.
    pub fn to_text(&self, params: &[f64]) -> Result<String> {
        self.check_params(params)?;
        let mut out = format!("lo {}\n", self.modes);
        for gate in &self.gates {
            match *gate {
                Gate::BeamSplitter { p, q, theta, phi } => {
                    let _ = writeln!(out, "bs {p} {q} {} {}", theta.resolve(params), phi.resolve(params));
                }
                Gate::PhaseShifter { mode, phi } => {
                    let _ = writeln!(out, "ps {mode} {}", phi.resolve(params));
                }
            }
        }
        Ok(out)
    }

    /// Parses a dump back into a circuit with fixed angles.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or_else(|| Error::parse(1, "missing `lo` header"))?;
        let modes = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["lo", m] => m.parse().map_err(|_| Error::parse(line, format!("bad mode count {m:?}")))?,
            _ => return Err(Error::parse(line, "expected `lo <modes>`")),
        };
        let mut gates = Vec::new();
        for (line, text) in lines {
            let fields: Vec<&str> = text.split_whitespace().collect();
            let int = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(line, format!("bad mode {s:?}")));
            let real = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Angle::Fixed)
                    .ok_or_else(|| Error::parse(line, format!("bad angle {s:?}")))
            };
            let gate = match fields.as_slice() {
                ["bs", p, q, theta, phi] => Gate::BeamSplitter {
                    p: int(p)?,
                    q: int(q)?,
                    theta: real(theta)?,
                    phi: real(phi)?,
                },
                ["ps", j, phi] => Gate::PhaseShifter {
                    mode: int(j)?,
                    phi: real(phi)?,
                },
                _ => return Err(Error::parse(line, format!("unrecognized gate line {text:?}"))),
            };
            gates.push(gate);
        }
        InterferometerCircuit::new(modes, gates).map_err(|e| match e {
            Error::Parameter(m) => Error::Validation(m),
            other => other,
        })
    }
}

/// Rectangular mesh: `M` alternating layers of beam splitters on even then
/// odd neighbouring pairs, then one phase shifter per mode.
///
/// Parameters are ordered `(θ, φ)` per beam splitter in gate order, then the
/// phase-shifter angles by mode.
pub fn build_generic_interferometer(modes: usize) -> Result<InterferometerCircuit> {
    if modes < 2 {
        return Err(Error::Parameter("a generic interferometer needs at least two modes".into()));
    }
    let mut gates = Vec::new();
    let mut next = 0;
    for layer in 0..modes {
        let mut p = layer % 2;
        while p + 1 < modes {
            gates.push(Gate::BeamSplitter {
                p,
                q: p + 1,
                theta: Angle::Param(next),
                phi: Angle::Param(next + 1),
            });
            next += 2;
            p += 2;
        }
    }
    for mode in 0..modes {
        gates.push(Gate::PhaseShifter {
            mode,
            phi: Angle::Param(next),
        });
        next += 1;
    }
    InterferometerCircuit::new(modes, gates)
}

/// Propagates the basis state `input` through `circuit`.
pub fn run_circuit(
    simulator: &FockSimulator,
    circuit: &InterferometerCircuit,
    input: &[u8],
    params: &[f64],
) -> Result<FockState> {
    if circuit.modes() != simulator.basis().modes() {
        return Err(Error::Dimension {
            expected: simulator.basis().modes(),
            actual: circuit.modes(),
        });
    }
    circuit.check_params(params)?;
    let mut state = simulator.basis_state(input)?;
    for gate in circuit.gates() {
        match *gate {
            Gate::BeamSplitter { p, q, theta, phi } => {
                simulator.apply_beam_splitter(&mut state, p, q, theta.resolve(params), phi.resolve(params))?
            }
            Gate::PhaseShifter { mode, phi } => {
                simulator.apply_phase_shifter(&mut state, mode, phi.resolve(params))?
            }
        }
    }
    Ok(state)
}
