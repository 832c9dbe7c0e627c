//! One-hot QUBO encoding of multiway cut and its Ising form.
//!
//! Variable `x_{u,t}` is 1 when vertex `u` joins terminal `t`. The energy is
//!
//! ```text
//! H(x) = α Σ_u (1 − Σ_t x_{u,t})² + α Σ_{t≠t'} x_{t,t'}
//!      + Σ_{{u,v}∈E} Σ_t Σ_{t'≠t} C(u,v) x_{u,t} x_{v,t'}
//! ```
//!
//! Coefficients are stored upper-triangular (`i <= j`, diagonal = linear
//! terms) plus an explicit constant, so feasible one-hot strings evaluate to
//! exactly the cut cost.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};
use crate::instances::MulticutInstance;

/// Which variables the encoding keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// Every `x_{u,t}`, including terminal rows, as written in the energy above.
    #[default]
    Full,
    /// Terminal rows fixed to `x_{t,t} = 1` and dropped; `(|V| − k)·k` variables.
    Reduced,
}

impl std::str::FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Encoding::Full),
            "reduced" => Ok(Encoding::Reduced),
            other => Err(Error::Parameter(format!("unknown encoding {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Free(usize),
    Fixed(bool),
}

/// Bijection between `(vertex, terminal position)` pairs and flat variable
/// indices. Iteration order is vertex ascending, then terminal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableIndex {
    num_vertices: usize,
    terminals: Vec<usize>,
    encoding: Encoding,
    /// `(vertex, terminal position)` for each flat index.
    pairs: Vec<(usize, usize)>,
}

impl VariableIndex {
    pub fn new(instance: &MulticutInstance, encoding: Encoding) -> Self {
        let k = instance.k();
        let pairs = (0..instance.num_vertices())
            .filter(|&u| encoding == Encoding::Full || !instance.is_terminal(u))
            .flat_map(|u| (0..k).map(move |t| (u, t)))
            .collect();
        VariableIndex {
            num_vertices: instance.num_vertices(),
            terminals: instance.terminals().to_vec(),
            encoding,
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    fn terminal_position(&self, v: usize) -> Option<usize> {
        self.terminals.binary_search(&v).ok()
    }

    /// `(vertex, terminal position)` of variable `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        self.pairs[i]
    }

    /// Flat index of `x_{u,t}` (`t` is a terminal position), or `None` when
    /// the variable is fixed by the reduced encoding.
    pub fn index(&self, u: usize, t: usize) -> Option<usize> {
        match self.slot(u, t) {
            Slot::Free(i) => Some(i),
            Slot::Fixed(_) => None,
        }
    }

    fn slot(&self, u: usize, t: usize) -> Slot {
        let k = self.terminals.len();
        match (self.encoding, self.terminal_position(u)) {
            (Encoding::Full, _) => Slot::Free(u * k + t),
            (Encoding::Reduced, Some(pos)) => Slot::Fixed(pos == t),
            (Encoding::Reduced, None) => {
                let earlier_terminals = self.terminals.partition_point(|&x| x < u);
                Slot::Free((u - earlier_terminals) * k + t)
            }
        }
    }

    /// One-hot bitstring of an assignment `vertex -> terminal vertex id`.
    pub fn encode(&self, assignment: &[usize]) -> Result<Bitstring> {
        if assignment.len() != self.num_vertices {
            return Err(Error::Dimension {
                expected: self.num_vertices,
                actual: assignment.len(),
            });
        }
        let mut bits = Bitstring::zeros(self.len());
        for (i, &(u, t)) in self.pairs.iter().enumerate() {
            let target = self.terminal_position(assignment[u]).ok_or_else(|| {
                Error::InfeasibleSolution(format!(
                    "vertex {u} assigned to {}, which is not a terminal",
                    assignment[u]
                ))
            })?;
            bits.set(i, target == t);
        }
        Ok(bits)
    }
}

/// Why a bitstring does not describe a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// No terminal selected for the vertex.
    Unassigned { vertex: usize },
    /// More than one terminal (vertex ids listed) selected for the vertex.
    MultipleTerminals { vertex: usize, terminals: Vec<usize> },
    /// A terminal row selects a different terminal.
    TerminalMisassigned { terminal: usize, assigned_to: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoded {
    /// `assignment[v]` is the terminal vertex id chosen for `v`.
    Feasible(Vec<usize>),
    Infeasible(InfeasibilityReport),
}

impl Decoded {
    pub fn assignment(&self) -> Option<&[usize]> {
        match self {
            Decoded::Feasible(a) => Some(a),
            Decoded::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Decoded::Feasible(_))
    }
}

/// Maps a bitstring back to a vertex partition, or reports every violated row.
pub fn decode_bitstring(index: &VariableIndex, bits: &Bitstring) -> Result<Decoded> {
    if bits.len() != index.len() {
        return Err(Error::Dimension {
            expected: index.len(),
            actual: bits.len(),
        });
    }
    let k = index.terminals.len();
    let mut assignment = vec![usize::MAX; index.num_vertices];
    let mut violations = Vec::new();
    for (u, slot) in assignment.iter_mut().enumerate() {
        let selected: Vec<usize> = (0..k)
            .filter(|&t| match index.slot(u, t) {
                Slot::Free(i) => bits.get(i),
                Slot::Fixed(b) => b,
            })
            .collect();
        match selected.as_slice() {
            [] => violations.push(Violation::Unassigned { vertex: u }),
            &[t] => {
                let target = index.terminals[t];
                if index.terminal_position(u).is_some() && target != u {
                    violations.push(Violation::TerminalMisassigned {
                        terminal: u,
                        assigned_to: target,
                    });
                }
                *slot = target;
            }
            many => violations.push(Violation::MultipleTerminals {
                vertex: u,
                terminals: many.iter().map(|&t| index.terminals[t]).collect(),
            }),
        }
    }
    if violations.is_empty() {
        Ok(Decoded::Feasible(assignment))
    } else {
        Ok(Decoded::Infeasible(InfeasibilityReport { violations }))
    }
}

#[derive(Default)]
struct Accumulator {
    coefficients: BTreeMap<(usize, usize), f64>,
    constant: f64,
}

impl Accumulator {
    fn add(&mut self, i: usize, j: usize, c: f64) {
        *self.coefficients.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
    }

    fn linear(&mut self, c: f64, a: Slot) {
        match a {
            Slot::Free(i) => self.add(i, i, c),
            Slot::Fixed(true) => self.constant += c,
            Slot::Fixed(false) => {}
        }
    }

    fn product(&mut self, c: f64, a: Slot, b: Slot) {
        match (a, b) {
            (Slot::Free(i), Slot::Free(j)) => self.add(i, j, c),
            (Slot::Free(i), Slot::Fixed(true)) | (Slot::Fixed(true), Slot::Free(i)) => {
                self.add(i, i, c)
            }
            (Slot::Fixed(true), Slot::Fixed(true)) => self.constant += c,
            _ => {}
        }
    }
}

/// Quadratic binary model `constant + Σ_{i<=j} Q_ij x_i x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboModel {
    size: usize,
    /// Nonzero coefficients sorted ascending by `(i, j)`, `i <= j`.
    terms: Vec<(usize, usize, f64)>,
    constant: f64,
    penalty_weight: Option<f64>,
    index: Option<VariableIndex>,
    #[serde(skip)]
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl QuboModel {
    /// Model from raw coefficients; pairs with `i > j` are folded onto `(j, i)`.
    pub fn from_terms(
        size: usize,
        terms: impl IntoIterator<Item = (usize, usize, f64)>,
        constant: f64,
    ) -> Result<Self> {
        let mut acc = Accumulator::default();
        for (i, j, c) in terms {
            if i >= size || j >= size {
                return Err(Error::Parameter(format!("term ({i}, {j}) outside 0..{size}")));
            }
            if !c.is_finite() {
                return Err(Error::Parameter(format!("non-finite coefficient at ({i}, {j})")));
            }
            acc.add(i, j, c);
        }
        if !constant.is_finite() {
            return Err(Error::Parameter("non-finite constant".into()));
        }
        acc.constant = constant;
        Ok(Self::from_accumulator(size, acc, None, None))
    }

    fn from_accumulator(
        size: usize,
        acc: Accumulator,
        penalty_weight: Option<f64>,
        index: Option<VariableIndex>,
    ) -> Self {
        let terms: Vec<(usize, usize, f64)> = acc
            .coefficients
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((i, j), c)| (i, j, c))
            .collect();
        let mut model = QuboModel {
            size,
            terms,
            constant: acc.constant,
            penalty_weight,
            index,
            neighbors: Vec::new(),
        };
        model.neighbors = model.build_neighbors();
        model
    }

    fn build_neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut neighbors = vec![Vec::new(); self.size];
        for &(i, j, c) in &self.terms {
            if i != j {
                neighbors[i].push((j, c));
                neighbors[j].push((i, c));
            }
        }
        neighbors
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn terms(&self) -> &[(usize, usize, f64)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn penalty_weight(&self) -> Option<f64> {
        self.penalty_weight
    }

    pub fn index(&self) -> Option<&VariableIndex> {
        self.index.as_ref()
    }

    /// `Q_ij` for `i <= j` (arguments are ordered internally).
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.terms
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .map(|pos| self.terms[pos].2)
            .unwrap_or(0.0)
    }

    /// Energy of `bits`, summed in ascending `(i, j)` order after the constant.
    pub fn energy(&self, bits: &Bitstring) -> Result<f64> {
        if bits.len() != self.size {
            return Err(Error::Dimension {
                expected: self.size,
                actual: bits.len(),
            });
        }
        let x = bits.bits();
        Ok(self.terms.iter().fold(self.constant, |acc, &(i, j, c)| {
            if x[i] && x[j] {
                acc + c
            } else {
                acc
            }
        }))
    }

    /// Same value as [`QuboModel::energy`] for the bitstring with bit `i` of
    /// `index` as `x_i`, using the same summation order.
    pub fn energy_of_index(&self, index: u64) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, j, c)| {
            if (index >> i) & 1 == 1 && (index >> j) & 1 == 1 {
                acc + c
            } else {
                acc
            }
        })
    }

    /// Energy change from flipping bit `i` of `x`.
    pub fn flip_delta(&self, x: &[bool], i: usize) -> f64 {
        let local = self.neighbors[i]
            .iter()
            .fold(self.coefficient(i, i), |acc, &(j, c)| if x[j] { acc + c } else { acc });
        if x[i] {
            -local
        } else {
            local
        }
    }

    /// Sum of coefficient magnitudes; bounds `|E(x) − constant|`.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.2.abs()).sum()
    }

    /// Text export: header `qubo <N> <constant> <alpha>` then `<i> <j> <coefficient>`
    /// per nonzero. `alpha` is 0 for models without a penalty weight.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "qubo {} {} {}",
            self.size,
            self.constant,
            self.penalty_weight.unwrap_or(0.0)
        );
        for &(i, j, c) in &self.terms {
            let _ = writeln!(out, "{i} {j} {c}");
        }
        out
    }
}

/// Default penalty weight `1 + Σ_e C(e)`: one violated constraint costs more
/// than cutting every edge.
pub fn default_penalty(instance: &MulticutInstance) -> f64 {
    1.0 + instance.total_cost()
}

/// Full-encoding QUBO; `penalty_weight` defaults to [`default_penalty`].
pub fn build_qubo(instance: &MulticutInstance, penalty_weight: Option<f64>) -> Result<QuboModel> {
    build_qubo_with(instance, penalty_weight, Encoding::Full)
}

pub fn build_qubo_with(
    instance: &MulticutInstance,
    penalty_weight: Option<f64>,
    encoding: Encoding,
) -> Result<QuboModel> {
    let alpha = penalty_weight.unwrap_or_else(|| default_penalty(instance));
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Parameter(format!("penalty weight must be positive, got {alpha}")));
    }
    let index = VariableIndex::new(instance, encoding);
    let k = instance.k();
    let mut acc = Accumulator::default();

    // α (1 − Σ_t x_{u,t})² = α (1 − 2 Σ_t x_t + Σ_t Σ_t' x_t x_t')
    for u in 0..instance.num_vertices() {
        acc.constant += alpha;
        for t in 0..k {
            acc.linear(-2.0 * alpha, index.slot(u, t));
        }
        for t in 0..k {
            for t2 in 0..k {
                acc.product(alpha, index.slot(u, t), index.slot(u, t2));
            }
        }
    }
    for (pos, &terminal) in instance.terminals().iter().enumerate() {
        for other in (0..k).filter(|&o| o != pos) {
            acc.linear(alpha, index.slot(terminal, other));
        }
    }
    for e in instance.edges() {
        for t in 0..k {
            for t2 in (0..k).filter(|&t2| t2 != t) {
                acc.product(e.cost, index.slot(e.u, t), index.slot(e.v, t2));
            }
        }
    }
    Ok(QuboModel::from_accumulator(index.len(), acc, Some(alpha), Some(index)))
}

pub fn qubo_energy(model: &QuboModel, bits: &Bitstring) -> Result<f64> {
    model.energy(bits)
}

/// Ising model `Σ_{i<j} J_ij z_i z_j + Σ_i h_i z_i + offset` over spins `z ∈ {−1, 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    size: usize,
    couplings: Vec<(usize, usize, f64)>,
    fields: Vec<f64>,
    offset: f64,
}

impl IsingModel {
    pub fn size(&self) -> usize {
        self.size
    }

    /// `(i, j, J_ij)` with `i < j`, ascending.
    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `Σ J_ij z_i z_j + Σ h_i z_i`, without the offset.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.size {
            return Err(Error::Dimension {
                expected: self.size,
                actual: spins.len(),
            });
        }
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Parameter(format!("spin value {bad} is not ±1")));
        }
        let pair: f64 = self
            .couplings
            .iter()
            .map(|&(i, j, c)| c * f64::from(spins[i] * spins[j]))
            .sum();
        let field: f64 = self
            .fields
            .iter()
            .zip(spins)
            .map(|(h, &s)| h * f64::from(s))
            .sum();
        Ok(pair + field)
    }

    /// Eigenvalue of the diagonal Hamiltonian on basis state `index`
    /// (`z_i = 1 − 2 x_i`), including the offset.
    pub fn diagonal_energy(&self, index: u64) -> f64 {
        let z = |i: usize| if (index >> i) & 1 == 1 { -1.0 } else { 1.0 };
        let pair: f64 = self.couplings.iter().map(|&(i, j, c)| c * z(i) * z(j)).sum();
        let field: f64 = self.fields.iter().enumerate().map(|(i, h)| h * z(i)).sum();
        pair + field + self.offset
    }
}

/// Spin vector for `x` under `x_i = (1 − z_i)/2`.
pub fn spins_from_bits(bits: &Bitstring) -> Vec<i8> {
    bits.bits().iter().map(|&b| if b { -1 } else { 1 }).collect()
}

pub fn bits_from_spins(spins: &[i8]) -> Bitstring {
    Bitstring::from_bits(spins.iter().map(|&s| s == -1).collect())
}

/// Substitutes `x_i = (1 − z_i)/2`: `J_ij = Q_ij/4`, `h_i = −(Q_ii/2 + Σ_{j≠i} Q_ij/4)`,
/// `offset = constant + Σ_i Q_ii/2 + Σ_{i<j} Q_ij/4`.
pub fn to_ising(model: &QuboModel) -> IsingModel {
    let mut fields = vec![0.0; model.size()];
    let mut couplings = Vec::new();
    let mut offset = model.constant();
    for &(i, j, q) in model.terms() {
        if i == j {
            fields[i] -= q / 2.0;
            offset += q / 2.0;
        } else {
            couplings.push((i, j, q / 4.0));
            fields[i] -= q / 4.0;
            fields[j] -= q / 4.0;
            offset += q / 4.0;
        }
    }
    IsingModel {
        size: model.size(),
        couplings,
        fields,
        offset,
    }
}
