//! The `ind` packing, the `(n, d)`-matrix encoding of a function, and its
//! sparse-access oracles.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::blockenc::{EntryFn, LocationFn, SparseAccess};
use crate::error::{Error, Result};
use crate::oracle::{Charges, Counter, FunctionOracle, DEFAULT_VALUE_BITS};
use crate::simkern::{re, DenseOperator};

/// `2^n((j − i) mod 2^n) + i`.
pub fn ind(n: usize, i: usize, j: usize) -> Result<usize> {
    let dim = 1usize << n;
    if i >= dim || j >= dim {
        return Err(Error::invalid(format!("index ({i},{j}) out of range for n = {n}")));
    }
    Ok(ind_unchecked(n, i, j))
}

fn ind_unchecked(n: usize, i: usize, j: usize) -> usize {
    let dim = 1usize << n;
    (((j + dim - i) % dim) << n) + i
}

pub fn ind_inverse(n: usize, k: usize) -> Result<(usize, usize)> {
    let dim = 1usize << n;
    if k >= dim * dim {
        return Err(Error::invalid(format!("{k} out of range for n = {n}")));
    }
    let i = k % dim;
    Ok((i, (i + (k >> n)) % dim))
}

/// `g: [d·2^{n−1}] → [0, β]` to be packed into a `2^n × 2^n` matrix.
#[derive(Clone, Debug)]
pub struct MatrixEncoding {
    pub n: usize,
    pub d: usize,
    pub g: FunctionOracle,
}

/// Largest `n` for which construction runs the exhaustive location self-check.
const SELF_CHECK_MAX_N: usize = 10;

impl MatrixEncoding {
    pub fn new(n: usize, d: usize, g: FunctionOracle) -> Result<Self> {
        if n == 0 || d == 0 || d > 1 << n {
            return Err(Error::invalid(format!("sparsity {d} invalid for n = {n}")));
        }
        let want = domain_size(n, d);
        if g.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                found: g.len(),
            });
        }
        let enc = Self { n, d, g };
        if n <= SELF_CHECK_MAX_N {
            enc.check_locations()?;
        }
        Ok(enc)
    }

    pub fn beta(&self) -> f64 {
        self.g.beta()
    }

    pub fn domain_size(&self) -> usize {
        domain_size(self.n, self.d)
    }

    /// Structurally nonzero columns of every row must sit inside the
    /// location window.
    fn check_locations(&self) -> Result<()> {
        let dim = 1usize << self.n;
        let limit = self.domain_size();
        for i in 0..dim {
            let window: Vec<usize> = (0..self.d).map(|l| location(self.n, self.d, i, l)).collect();
            for j in 0..dim {
                let structural = ind_unchecked(self.n, i, j) < limit || ind_unchecked(self.n, j, i) < limit;
                if structural && !window.contains(&j) {
                    return Err(Error::invalid(format!(
                        "column {j} of row {i} escapes the location window (n = {}, d = {})",
                        self.n, self.d
                    )));
                }
            }
        }
        Ok(())
    }

    /// Entry `M_ij` from the table, without charging a query.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        entry_from(self.n, self.domain_size(), i, j, |k| self.g.peek(k))
    }
}

fn domain_size(n: usize, d: usize) -> usize {
    (d << n) >> 1
}

fn entry_from(n: usize, limit: usize, i: usize, j: usize, g: impl Fn(usize) -> f64) -> f64 {
    let k = ind_unchecked(n, i, j);
    if i == j {
        return if k < limit { g(k) } else { 0.0 };
    }
    if k < limit {
        return g(k) / 2.0;
    }
    let kt = ind_unchecked(n, j, i);
    if kt < limit {
        g(kt) / 2.0
    } else {
        0.0
    }
}

/// `j + l − ⌊d/2⌋ mod 2^n`.
pub fn location(n: usize, d: usize, j: usize, l: usize) -> usize {
    let dim = 1usize << n;
    (j + l + dim - (d / 2) % dim) % dim
}

pub fn build_matrix_encoding(enc: &MatrixEncoding) -> DenseOperator {
    let dim = 1usize << enc.n;
    let entries: Vec<f64> = (0..dim * dim)
        .map(|idx| enc.entry(idx / dim, idx % dim))
        .collect();
    DenseOperator::from_real_rows(dim, &entries).expect("power-of-two dimension")
}

/// Sparse access to the encoded matrix. `O_val` has its own counter and
/// charges one query to `g` per invocation; `O_loc` never touches `g`.
pub fn encoding_oracles(enc: &MatrixEncoding) -> Result<SparseAccess> {
    let (n, d) = (enc.n, enc.d);
    let limit = enc.domain_size();
    let table = Arc::new(enc.g.values());
    let values: EntryFn = Arc::new(move |i, j| re(entry_from(n, limit, i, j, |k| table[k])));
    let locations: LocationFn = Arc::new(move |j, l| location(n, d, j, l));
    let mut val_charges = Charges::single(&Counter::new("O_val"));
    val_charges.absorb(enc.g.charges(), 1);
    SparseAccess::new(
        n,
        d,
        enc.beta(),
        values,
        locations,
        val_charges,
        Charges::single(&Counter::new("O_loc")),
    )
}

/// `μ_g = 2⟨+^n|M|+^n⟩ / d`.
pub fn mean_from_expectation(d: usize, expectation: f64) -> f64 {
    2.0 * expectation / d as f64
}

/// Exact `⟨+^n|M|+^n⟩`, the entry sum over `2^n`.
pub fn plus_expectation(m: &DenseOperator) -> f64 {
    let sum: f64 = m.matrix().iter().map(|z| z.re).sum();
    sum / m.dim() as f64
}

/// Text form: `n`, `d`, `beta`, `bits` header lines, then one `g(k)` per line.
pub fn write_encoding(enc: &MatrixEncoding) -> String {
    let mut out = String::new();
    writeln!(out, "n {}", enc.n).unwrap();
    writeln!(out, "d {}", enc.d).unwrap();
    writeln!(out, "beta {}", enc.beta()).unwrap();
    writeln!(out, "bits {}", enc.g.bits()).unwrap();
    for v in enc.g.values() {
        writeln!(out, "{v}").unwrap();
    }
    out
}

pub fn parse_encoding(text: &str, label: &str) -> Result<MatrixEncoding> {
    let mut header = [None::<f64>; 4];
    let keys = ["n", "d", "beta", "bits"];
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut parts = line.split_whitespace();
        let first = parts.next().unwrap();
        if let Some(slot) = keys.iter().position(|k| *k == first) {
            let val = parts
                .next()
                .ok_or_else(|| parse_err(format!("missing value for {first}")))?;
            let parsed: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("bad number {val:?}")))?;
            header[slot] = Some(parsed);
        } else {
            let v: f64 = first
                .parse()
                .map_err(|_| parse_err(format!("bad value {first:?}")))?;
            values.push(v);
        }
    }
    let get = |slot: usize| {
        header[slot].ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing header {}", keys[slot]),
        })
    };
    let n = get(0)? as usize;
    let d = get(1)? as usize;
    let beta = get(2)?;
    let bits = header[3].map_or(DEFAULT_VALUE_BITS, |b| b as u32);
    let g = FunctionOracle::from_values(&values, beta, bits, label)?;
    MatrixEncoding::new(n, d, g)
}
