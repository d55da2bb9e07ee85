//! Query-counted black boxes.
//!
//! A [`QueryCountedUnitary`] pairs a unitary matrix with the list of counters
//! one invocation charges. Base oracles charge their own counter once;
//! composite constructions (controlled block encodings, products, polynomial
//! transforms) charge the counters of the oracles they are built from. The
//! adjoint and controlled variants share the charges of the original, so a
//! query to `O†`, `c-O` or `c-O†` costs the same as a query to `O`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::simkern::{DenseOperator, StateVector, MAX_OPERATOR_QUBITS, UNITARY_TOL};

struct CounterInner {
    label: String,
    count: AtomicU64,
}

/// Shared, atomically updated query counter.
#[derive(Clone)]
pub struct Counter(Arc<CounterInner>);

impl Counter {
    pub fn new(label: impl Into<String>) -> Self {
        Counter(Arc::new(CounterInner {
            label: label.into(),
            count: AtomicU64::new(0),
        }))
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    pub fn get(&self) -> u64 {
        self.0.count.load(Ordering::SeqCst)
    }

    pub fn add(&self, k: u64) {
        self.0.count.fetch_add(k, Ordering::SeqCst);
    }

    pub fn reset(&self) {
        self.0.count.store(0, Ordering::SeqCst);
    }

    pub fn same_as(&self, other: &Counter) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Counter({}={})", self.label(), self.get())
    }
}

/// Counters charged per invocation, with multiplicities.
#[derive(Clone, Debug, Default)]
pub struct Charges(Vec<(Counter, u64)>);

impl Charges {
    pub fn single(counter: &Counter) -> Self {
        Charges(vec![(counter.clone(), 1)])
    }

    pub fn add(&mut self, counter: &Counter, times: u64) {
        if times == 0 {
            return;
        }
        match self.0.iter_mut().find(|(c, _)| c.same_as(counter)) {
            Some((_, w)) => *w += times,
            None => self.0.push((counter.clone(), times)),
        }
    }

    /// Adds `times` invocations' worth of `other`.
    pub fn absorb(&mut self, other: &Charges, times: u64) {
        for (c, w) in &other.0 {
            self.add(c, w * times);
        }
    }

    pub fn scaled(&self, times: u64) -> Charges {
        let mut out = Charges::default();
        out.absorb(self, times);
        out
    }

    pub fn combined(parts: &[(&Charges, u64)]) -> Charges {
        let mut out = Charges::default();
        for (p, times) in parts {
            out.absorb(p, *times);
        }
        out
    }

    /// Records `times` invocations.
    pub fn charge(&self, times: u64) {
        for (c, w) in &self.0 {
            c.add(w * times);
        }
    }

    pub fn counters(&self) -> impl Iterator<Item = &Counter> {
        self.0.iter().map(|(c, _)| c)
    }

    /// Multiplicity charged to counters carrying `label`.
    pub fn weight_of(&self, label: &str) -> u64 {
        self.0
            .iter()
            .filter(|(c, _)| c.label() == label)
            .map(|(_, w)| w)
            .sum()
    }
}

/// A unitary black box with query accounting.
#[derive(Clone, Debug)]
pub struct QueryCountedUnitary {
    op: Arc<DenseOperator>,
    charges: Charges,
    label: String,
}

impl QueryCountedUnitary {
    /// A base oracle with its own fresh counter.
    pub fn new(op: DenseOperator, label: impl Into<String>) -> Result<Self> {
        if !op.is_unitary(UNITARY_TOL) {
            return Err(Error::invalid("oracle matrix is not unitary"));
        }
        let label = label.into();
        let counter = Counter::new(label.clone());
        Ok(Self {
            op: Arc::new(op),
            charges: Charges::single(&counter),
            label,
        })
    }

    /// A derived black box that charges `charges` per invocation.
    pub fn composite(op: DenseOperator, label: impl Into<String>, charges: Charges) -> Result<Self> {
        if !op.is_unitary(UNITARY_TOL) {
            return Err(Error::invalid("composite matrix is not unitary"));
        }
        Ok(Self {
            op: Arc::new(op),
            charges,
            label: label.into(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_qubits(&self) -> usize {
        self.op.n_qubits()
    }

    /// The matrix, for building composite operators. Does not charge.
    pub fn matrix(&self) -> &DenseOperator {
        &self.op
    }

    pub fn charges(&self) -> &Charges {
        &self.charges
    }

    /// Records `times` invocations without simulating them.
    pub fn charge(&self, times: u64) {
        self.charges.charge(times);
    }

    /// One query: applies the unitary to `targets` of `state`.
    pub fn apply(&self, state: &mut StateVector, targets: &[usize]) -> Result<()> {
        state.apply(&self.op, targets)?;
        self.charge(1);
        Ok(())
    }

    /// One query to the controlled variant.
    pub fn apply_controlled(
        &self,
        state: &mut StateVector,
        control: usize,
        targets: &[usize],
    ) -> Result<()> {
        state.apply_controlled(&self.op, &[(control, true)], targets)?;
        self.charge(1);
        Ok(())
    }

    /// Count of the first charged counter; for base oracles, its own count.
    pub fn queries(&self) -> u64 {
        self.charges.counters().next().map_or(0, Counter::get)
    }

    /// Same matrix, charging a brand-new counter with the same label.
    pub fn with_fresh_counter(&self) -> Self {
        let counter = Counter::new(self.label.clone());
        Self {
            op: Arc::clone(&self.op),
            charges: Charges::single(&counter),
            label: self.label.clone(),
        }
    }
}

/// `c-u`, control as the new most significant qubit; shares `u`'s charges.
pub fn make_controlled(u: &QueryCountedUnitary) -> QueryCountedUnitary {
    QueryCountedUnitary {
        op: Arc::new(u.op.controlled()),
        charges: u.charges.clone(),
        label: format!("c-{}", u.label),
    }
}

/// `u†`, sharing `u`'s charges.
pub fn make_adjoint(u: &QueryCountedUnitary) -> QueryCountedUnitary {
    QueryCountedUnitary {
        op: Arc::new(u.op.adjoint()),
        charges: u.charges.clone(),
        label: format!("{}†", u.label),
    }
}

/// Zeroes every counter reachable from `oracles`.
pub fn reset_counters(oracles: &[&QueryCountedUnitary]) {
    for o in oracles {
        for c in o.charges.counters() {
            c.reset();
        }
    }
}

/// Snapshot of a set of counters, used to attribute queries to one run.
#[derive(Debug, Clone)]
pub struct QueryLedger {
    start: Vec<(Counter, u64)>,
}

impl QueryLedger {
    pub fn snapshot<'a>(charges: impl IntoIterator<Item = &'a Charges>) -> Self {
        let mut start: Vec<(Counter, u64)> = Vec::new();
        for ch in charges {
            for c in ch.counters() {
                if !start.iter().any(|(s, _)| s.same_as(c)) {
                    start.push((c.clone(), c.get()));
                }
            }
        }
        Self { start }
    }

    /// Counter increments since the snapshot, summed per label.
    pub fn deltas(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for (c, v0) in &self.start {
            *out.entry(c.label().to_string()).or_insert(0) += c.get() - v0;
        }
        out
    }
}

/// A black-box function `g: [N] → [0, β]` with values on an `r`-bit grid
/// `β·k/(2^r − 1)`, `k ∈ [2^r]`.
#[derive(Clone, Debug)]
pub struct FunctionOracle {
    beta: f64,
    bits: u32,
    codes: Arc<Vec<u64>>,
    charges: Charges,
    label: String,
}

pub const DEFAULT_VALUE_BITS: u32 = 16;

impl FunctionOracle {
    /// Quantizes `values` (each in `[0, β]`) to `bits`-bit codes.
    pub fn from_values(values: &[f64], beta: f64, bits: u32, label: impl Into<String>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("range bound must be positive, got {beta}")));
        }
        if !(1..=52).contains(&bits) {
            return Err(Error::invalid(format!("value bits must be in 1..=52, got {bits}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("function table is empty"));
        }
        let top = ((1u64 << bits) - 1) as f64;
        let codes = values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if !(v >= -1e-12 && v <= beta * (1.0 + 1e-12)) {
                    return Err(Error::invalid(format!("g({j}) = {v} outside [0, {beta}]")));
                }
                Ok(((v / beta).clamp(0.0, 1.0) * top).round() as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        let label = label.into();
        let counter = Counter::new(label.clone());
        Ok(Self {
            beta,
            bits,
            codes: Arc::new(codes),
            charges: Charges::single(&counter),
            label,
        })
    }

    /// Uniformly random codes, i.e. values spread evenly over `[0, β]`.
    pub fn random<R: Rng + ?Sized>(
        len: usize,
        beta: f64,
        bits: u32,
        label: impl Into<String>,
        rng: &mut R,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("range bound must be positive, got {beta}")));
        }
        if !(1..=52).contains(&bits) {
            return Err(Error::invalid(format!("value bits must be in 1..=52, got {bits}")));
        }
        let codes = (0..len).map(|_| rng.random_range(0..1u64 << bits)).collect();
        Self::from_codes(codes, beta, bits, label)
    }

    pub fn from_codes(codes: Vec<u64>, beta: f64, bits: u32, label: impl Into<String>) -> Result<Self> {
        if !(1..=52).contains(&bits) {
            return Err(Error::invalid(format!("value bits must be in 1..=52, got {bits}")));
        }
        if let Some(&bad) = codes.iter().find(|&&k| k >= 1u64 << bits) {
            return Err(Error::invalid(format!("code {bad} does not fit in {bits} bits")));
        }
        let label = label.into();
        let counter = Counter::new(label.clone());
        Ok(Self {
            beta,
            bits,
            codes: Arc::new(codes),
            charges: Charges::single(&counter),
            label,
        })
    }

    /// `j ↦ scale·g(j)` with range bound `scale·β`. Each query to the result
    /// costs one query to `self`.
    pub fn rescaled(&self, scale: f64, label: impl Into<String>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        let label = label.into();
        let own = Counter::new(label.clone());
        let mut charges = Charges::single(&own);
        charges.absorb(&self.charges, 1);
        Ok(Self {
            beta: self.beta * scale,
            bits: self.bits,
            codes: Arc::clone(&self.codes),
            charges,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn charges(&self) -> &Charges {
        &self.charges
    }

    fn grid_top(&self) -> f64 {
        ((1u64 << self.bits) - 1) as f64
    }

    /// Value without charging a query (construction-time access).
    pub fn peek(&self, j: usize) -> f64 {
        self.beta * self.codes[j] as f64 / self.grid_top()
    }

    /// One query.
    pub fn query(&self, j: usize) -> f64 {
        self.charges.charge(1);
        self.peek(j)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.peek(j)).collect()
    }

    /// Exact mean of the represented values.
    pub fn mean(&self) -> f64 {
        let total: u128 = self.codes.iter().map(|&k| k as u128).sum();
        self.beta * (total as f64) / (self.grid_top() * self.len() as f64)
    }

    pub fn queries(&self) -> u64 {
        self.charges.counters().next().map_or(0, Counter::get)
    }
}

/// The XOR oracle `|j⟩|s⟩ ↦ |j⟩|s ⊕ enc(g(j))⟩` on `⌈log₂N⌉ + value_bits`
/// qubits, where `enc` is the `value_bits` fixed-point code of `g(j)/β`.
/// Domains that are not a power of two are padded with `g = 0`.
pub fn function_to_unitary(g: &FunctionOracle, value_bits: u32) -> Result<QueryCountedUnitary> {
    if value_bits == 0 {
        return Err(Error::invalid("value register needs at least one bit"));
    }
    let index_qubits = g.len().next_power_of_two().trailing_zeros() as usize;
    let total = index_qubits + value_bits as usize;
    if total > MAX_OPERATOR_QUBITS {
        return Err(Error::RegisterBudget {
            requested: total,
            limit: MAX_OPERATOR_QUBITS,
        });
    }
    let top = ((1u64 << value_bits) - 1) as f64;
    let resolution = g.beta() * 2f64.powi(-(value_bits as i32));
    let mut enc = vec![0u64; 1 << index_qubits];
    for (j, e) in enc.iter_mut().enumerate().take(g.len()) {
        let v = g.peek(j);
        let code = ((v / g.beta()) * top).round() as u64;
        if code == 0 && v > resolution {
            return Err(Error::invalid(format!(
                "{value_bits} value bits cannot distinguish g({j}) = {v} from 0"
            )));
        }
        *e = code;
    }
    let dim = 1usize << total;
    let mut entries = vec![crate::simkern::re(0.0); dim * dim];
    for (j, &code) in enc.iter().enumerate() {
        for s in 0..(1u64 << value_bits) {
            let col = (j << value_bits) | s as usize;
            let row = (j << value_bits) | (s ^ code) as usize;
            entries[row * dim + col] = crate::simkern::re(1.0);
        }
    }
    let op = DenseOperator::from_rows(dim, &entries)?;
    QueryCountedUnitary::composite(op, g.label().to_string(), g.charges().clone())
}
