use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest Fock basis the simulator will allocate.
pub const MAX_BASIS_SIZE: usize = 2_000_000;

/// `C(modes + photons − 1, photons)`, or `None` on overflow.
pub fn basis_size(modes: usize, photons: usize) -> Option<usize> {
    if modes == 0 {
        return (photons == 0).then_some(1);
    }
    let mut acc: u128 = 1;
    for i in 0..photons as u128 {
        acc = acc * (modes as u128 + i) / (i + 1);
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// All occupation vectors of `photons` photons in `modes` modes, in
/// descending lexicographic order: `(P, 0, …, 0)` first, `(0, …, 0, P)` last.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    modes: usize,
    photons: usize,
    occupations: Vec<u8>,
    /// `compositions[p][m]`: ways to place `p` photons in `m` modes.
    compositions: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(modes: usize, photons: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Parameter("need at least one mode".into()));
        }
        if photons > u8::MAX as usize {
            return Err(Error::Capacity(format!("{photons} photons exceed per-mode storage")));
        }
        let size = basis_size(modes, photons)
            .filter(|&s| s <= MAX_BASIS_SIZE)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "Fock basis for {modes} modes and {photons} photons exceeds {MAX_BASIS_SIZE} states"
                ))
            })?;
        let compositions: Vec<Vec<usize>> = (0..=photons)
            .map(|p| {
                (0..=modes)
                    .map(|m| if m == 0 { (p == 0) as usize } else { basis_size(m, p).unwrap_or(0) })
                    .collect()
            })
            .collect();

        let mut occupations = Vec::with_capacity(size * modes);
        let mut current = vec![0u8; modes];
        fill(&mut current, 0, photons, &mut occupations);
        debug_assert_eq!(occupations.len(), size * modes);
        Ok(FockBasis {
            modes,
            photons,
            occupations,
            compositions,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn len(&self) -> usize {
        self.occupations.len() / self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn state(&self, index: usize) -> &[u8] {
        &self.occupations[index * self.modes..(index + 1) * self.modes]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.occupations.chunks_exact(self.modes)
    }

    /// Position of `occupation` in the enumeration.
    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        if occupation.len() != self.modes
            || occupation.iter().map(|&n| n as usize).sum::<usize>() != self.photons
        {
            return None;
        }
        let mut rank = 0;
        let mut remaining = self.photons;
        for (j, &n) in occupation.iter().enumerate() {
            let n = n as usize;
            let rest = self.modes - j - 1;
            for v in n + 1..=remaining {
                rank += self.compositions[remaining - v][rest];
            }
            remaining -= n;
        }
        Some(rank)
    }
}

fn fill(current: &mut [u8], mode: usize, remaining: usize, out: &mut Vec<u8>) {
    if mode == current.len() - 1 {
        current[mode] = remaining as u8;
        out.extend_from_slice(current);
        return;
    }
    for v in (0..=remaining).rev() {
        current[mode] = v as u8;
        fill(current, mode + 1, remaining - v, out);
    }
    current[mode] = 0;
}

/// Basis indices sharing occupations outside a mode pair, grouped so each
/// run lists `n_p = 0, 1, …, N` for pair total `N`.
#[derive(Debug)]
pub(crate) struct PairGroups {
    /// `(pair photon total N, offset into indices)`; each run has `N + 1` entries.
    runs: Vec<(usize, usize)>,
    indices: Vec<u32>,
}

impl PairGroups {
    fn build(basis: &FockBasis, p: usize, q: usize) -> Self {
        let mut runs = Vec::new();
        let mut indices = Vec::with_capacity(basis.len());
        let mut scratch = vec![0u8; basis.modes];
        for occ in basis.iter() {
            // representative: every pair photon sits in mode p
            if occ[q] != 0 {
                continue;
            }
            let total = occ[p] as usize;
            scratch.copy_from_slice(occ);
            runs.push((total, indices.len()));
            for np in 0..=total {
                scratch[p] = np as u8;
                scratch[q] = (total - np) as u8;
                let idx = basis.index_of(&scratch).expect("pair redistribution stays in basis");
                indices.push(idx as u32);
            }
        }
        PairGroups { runs, indices }
    }

    #[cfg(test)]
    pub(crate) fn covered_indices(&self) -> Vec<u32> {
        self.indices.clone()
    }
}

/// Fock-space amplitudes over a fixed-photon-number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn basis(&self) -> &FockBasis {
        &self.basis
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

    /// Amplitude of `occupation`, zero when it is outside the basis.
    pub fn amplitude(&self, occupation: &[u8]) -> Complex64 {
        self.basis
            .index_of(occupation)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }
}

/// Gate kernels over one Fock basis, with per-pair index groups built on first use.
#[derive(Debug)]
pub struct FockSimulator {
    basis: Arc<FockBasis>,
    pair_groups: Vec<OnceLock<PairGroups>>,
}

impl FockSimulator {
    pub fn new(modes: usize, photons: usize) -> Result<Self> {
        let basis = Arc::new(FockBasis::new(modes, photons)?);
        let pair_groups = (0..modes * modes).map(|_| OnceLock::new()).collect();
        Ok(FockSimulator { basis, pair_groups })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn basis_state(&self, occupation: &[u8]) -> Result<FockState> {
        let index = self.basis.index_of(occupation).ok_or_else(|| {
            Error::Parameter(format!(
                "occupation {occupation:?} is not in the {}-mode, {}-photon basis",
                self.basis.modes, self.basis.photons
            ))
        })?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); self.basis.len()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(FockState {
            basis: Arc::clone(&self.basis),
            amplitudes,
        })
    }

    pub(crate) fn groups(&self, p: usize, q: usize) -> &PairGroups {
        self.pair_groups[p * self.basis.modes + q].get_or_init(|| PairGroups::build(&self.basis, p, q))
    }

    fn check_state(&self, state: &FockState) -> Result<()> {
        if !Arc::ptr_eq(&state.basis, &self.basis) && *state.basis != *self.basis {
            return Err(Error::Parameter("state belongs to a different Fock basis".into()));
        }
        Ok(())
    }

    /// Beam splitter on modes `(p, q)` acting on creation operators as
    /// `a_p† → cos θ a_p† + e^{−iφ} sin θ a_q†`, `a_q† → −e^{iφ} sin θ a_p† + cos θ a_q†`.
    pub fn apply_beam_splitter(
        &self,
        state: &mut FockState,
        p: usize,
        q: usize,
        theta: f64,
        phi: f64,
    ) -> Result<()> {
        let modes = self.basis.modes;
        if p == q || p >= modes || q >= modes {
            return Err(Error::Parameter(format!("invalid beam splitter modes ({p}, {q})")));
        }
        self.check_state(state)?;
        let blocks: Vec<Vec<Complex64>> = (0..=self.basis.photons)
            .map(|n| beam_splitter_block(n, theta, phi))
            .collect();
        let groups = self.groups(p, q);
        let mut gathered = Vec::with_capacity(self.basis.photons + 1);
        for &(total, offset) in &groups.runs {
            if total == 0 {
                continue;
            }
            let run = &groups.indices[offset..offset + total + 1];
            gathered.clear();
            gathered.extend(run.iter().map(|&i| state.amplitudes[i as usize]));
            let block = &blocks[total];
            let dim = total + 1;
            for (out, &idx) in run.iter().enumerate() {
                let row = &block[out * dim..(out + 1) * dim];
                state.amplitudes[idx as usize] =
                    row.iter().zip(&gathered).map(|(u, a)| u * a).sum();
            }
        }
        Ok(())
    }

    /// Multiplies each amplitude by `e^{iφ n_mode}`.
    pub fn apply_phase_shifter(&self, state: &mut FockState, mode: usize, phi: f64) -> Result<()> {
        if mode >= self.basis.modes {
            return Err(Error::Parameter(format!("invalid phase shifter mode {mode}")));
        }
        self.check_state(state)?;
        let phases: Vec<Complex64> = (0..=self.basis.photons)
            .map(|n| Complex64::from_polar(1.0, phi * n as f64))
            .collect();
        for (amp, occ) in state.amplitudes.iter_mut().zip(self.basis.iter()) {
            *amp *= phases[occ[mode] as usize];
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `(N+1)×(N+1)` row-major block on `|n, N−n⟩`, rows indexed by output `n_p`.
pub(crate) fn beam_splitter_block(total: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let dim = total + 1;
    let (s, c) = theta.sin_cos();
    let to_q = Complex64::from_polar(s, -phi);
    let to_p = -Complex64::from_polar(s, phi);
    let c = Complex64::new(c, 0.0);
    let mut block = vec![Complex64::new(0.0, 0.0); dim * dim];
    for n_in in 0..=total {
        let m_in = total - n_in;
        let norm_in = (factorial(n_in) * factorial(m_in)).sqrt();
        // (c a_p† + to_q a_q†)^n_in (to_p a_p† + c a_q†)^m_in, expanded binomially
        for a in 0..=n_in {
            for b in 0..=m_in {
                let coef = binomial(n_in, a)
                    * binomial(m_in, b)
                    * c.powu(a as u32)
                    * to_q.powu((n_in - a) as u32)
                    * to_p.powu(b as u32)
                    * c.powu((m_in - b) as u32);
                let n_out = a + b;
                let norm_out = (factorial(n_out) * factorial(total - n_out)).sqrt();
                block[n_out * dim + n_in] += coef * (norm_out / norm_in);
            }
        }
    }
    block
}
