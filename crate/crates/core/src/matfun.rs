//! Polynomial eigenvalue transformation of block encodings and the
//! polynomial approximation of `1/x` used to invert them.

use rustdct::DctPlanner;

use crate::blockenc::{dilate_exact, BlockAccess};
use crate::error::{Error, Result};
use crate::oracle::QueryCountedUnitary;
use crate::simkern::{DenseOperator, HERMITIAN_TOL};

pub const DEGREE_CAP: usize = 4000;
/// Points in the brute-force scans over `[-1, 1]`.
pub const GRID_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Real polynomial stored by its Chebyshev coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn from_chebyshev(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// From monomial coefficients `c₀ + c₁x + c₂x² + …`.
    pub fn from_monomial(monomial: &[f64]) -> Self {
        // Horner in the Chebyshev basis: p ← x·p + c, with x·T_k = (T_{k+1} + T_{|k-1|})/2
        let mut acc: Vec<f64> = vec![0.0];
        for &c in monomial.iter().rev() {
            let mut next = vec![0.0; acc.len() + 1];
            for (k, &a) in acc.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                if k == 0 {
                    next[1] += a;
                } else {
                    next[k + 1] += a / 2.0;
                    next[k - 1] += a / 2.0;
                }
            }
            next[0] += c;
            acc = next;
        }
        Self::from_chebyshev(acc)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn parity(&self) -> Parity {
        let even = self.coeffs.iter().step_by(2).any(|&c| c != 0.0);
        let odd = self.coeffs.iter().skip(1).step_by(2).any(|&c| c != 0.0);
        match (even, odd) {
            (true, true) => Parity::Mixed,
            (false, true) => Parity::Odd,
            _ => Parity::Even,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_chebyshev(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// Clenshaw evaluation; `x` outside `[-1, 1]` is allowed but unbounded.
    pub fn eval(&self, x: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    /// Max of `|p|` over a uniform grid of `[-1, 1]` (both endpoints included).
    pub fn max_abs_on_grid(&self, points: usize) -> f64 {
        uniform_grid(-1.0, 1.0, points)
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
    (0..points).map(move |i| if i + 1 == points { hi } else { lo + step * i as f64 })
}

/// Chebyshev coefficients of the degree `len - 1` interpolant of `f` at the
/// first-kind nodes `cos(π(k + ½)/len)`.
fn chebyshev_interpolate(f: impl Fn(f64) -> f64, len: usize) -> Vec<f64> {
    let mut buf: Vec<f64> = (0..len)
        .map(|k| f((std::f64::consts::PI * (k as f64 + 0.5) / len as f64).cos()))
        .collect();
    DctPlanner::new().plan_dct2(len).process_dct2(&mut buf);
    let scale = 2.0 / len as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    buf[0] /= 2.0;
    buf
}

/// Even window rising from `0` at `y = 0` to about `1` past `y₀`:
/// `½[erfc(k(y₀ − y)) + erfc(k(y₀ + y))]`, shifted and rescaled so that it
/// vanishes exactly at the origin.
fn window(y: f64, k: f64, y0: f64) -> f64 {
    let raw = |y: f64| 0.5 * (libm::erfc(k * (y0 - y)) + libm::erfc(k * (y0 + y)));
    let r0 = raw(0.0);
    (raw(y) - r0) / (1.0 - r0)
}

/// `erfc(t) ≤ target` solved for `t` by bisection.
fn erfc_inverse_bound(target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::erfc(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Peak of the windowed target `(3/4)·window(y)/y` must stay under this, leaving
/// room for the truncation error.
const WINDOW_PEAK: f64 = 0.95;

/// Step centre and sharpness for the window: the smallest `k` over a scan of
/// centres `y₀` such that the window error at `y = 1` is at most `tail` and
/// the windowed target stays below [`WINDOW_PEAK`].
fn choose_window(tail: f64) -> (f64, f64) {
    let t = erfc_inverse_bound(tail);
    let mut best: Option<(f64, f64)> = None;
    for step in 0..=40 {
        let y0 = 0.55 + 0.01 * step as f64;
        let k = t / (1.0 - y0);
        let peak = uniform_grid(1e-6, 1.0, 4000)
            .map(|y| 0.75 * window(y, k, y0) / y)
            .fold(0.0, f64::max);
        if peak <= WINDOW_PEAK && best.is_none_or(|(kb, _)| k < kb) {
            best = Some((k, y0));
        }
    }
    best.expect("y0 = 0.95 always satisfies the peak bound")
}

/// Odd polynomial with `|P(x) − (3/(4κ))/x| < eps` on `1/κ ≤ |x| ≤ 1` and
/// `|P| ≤ 1` on `[-1, 1]`.
///
/// `P` is a truncated Chebyshev series of `(3/(4κ))·φ(κx)/x`, where `φ` is a
/// smooth even window that reaches 1 (to within `eps/4`) at `|x| = 1/κ` and
/// keeps the product bounded inside the gap.
pub fn inverse_poly(kappa: f64, eps: f64) -> Result<Polynomial> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("condition number must be >= 1, got {kappa}")));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::invalid(format!("polynomial error must lie in (0, 1/2], got {eps}")));
    }
    // window error at x = 1/κ is (3/4)·erfc(k(1 − y₀))/2
    let (k, y0) = choose_window(2.0 * eps / 3.0);
    let scale = 0.75 / kappa;
    let target = move |x: f64| scale * window(kappa * x, k, y0) / x;

    let mut len = 64usize;
    let coeffs = loop {
        let c = chebyshev_interpolate(target, len);
        let top = c[len * 9 / 10..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if top < 1e-4 * eps {
            break c;
        }
        if len >= 4 * DEGREE_CAP {
            let tail: f64 = c[DEGREE_CAP + 1..].iter().map(|v| v.abs()).sum();
            return Err(Error::DegreeCap {
                cap: DEGREE_CAP,
                requested: eps,
                achieved: tail + eps / 4.0,
            });
        }
        len *= 2;
    };

    // smallest odd degree whose discarded tail is within eps/4
    let mut tail = 0.0;
    let mut degree = coeffs.len() - 1;
    while degree > 1 {
        let drop = coeffs[degree].abs() + coeffs[degree - 1].abs();
        if tail + drop > eps / 4.0 {
            break;
        }
        tail += drop;
        degree -= 2;
    }
    if degree % 2 == 0 {
        degree += 1;
    }
    if degree > DEGREE_CAP {
        let tail: f64 = coeffs[DEGREE_CAP + 1..].iter().map(|v| v.abs()).sum();
        return Err(Error::DegreeCap {
            cap: DEGREE_CAP,
            requested: eps,
            achieved: tail + eps / 4.0,
        });
    }
    let odd: Vec<f64> = coeffs[..=degree]
        .iter()
        .enumerate()
        .map(|(j, &c)| if j % 2 == 1 { c } else { 0.0 })
        .collect();
    let p = Polynomial::from_chebyshev(odd);

    let err = inverse_poly_error(&p, kappa, GRID_POINTS);
    let peak = p.max_abs_on_grid(GRID_POINTS);
    if err >= eps || peak > 1.0 {
        return Err(Error::DegreeCap {
            cap: DEGREE_CAP,
            requested: eps,
            achieved: err.max(peak - 1.0),
        });
    }
    Ok(p)
}

/// Max of `|P(x) − (3/(4κ))/x|` over `points` grid points spread across
/// `[-1, -1/κ] ∪ [1/κ, 1]`.
pub fn inverse_poly_error(p: &Polynomial, kappa: f64, points: usize) -> f64 {
    let half = points / 2;
    let scale = 0.75 / kappa;
    uniform_grid(1.0 / kappa, 1.0, half)
        .flat_map(|x| [x, -x])
        .map(|x| (p.eval(x) - scale / x).abs())
        .fold(0.0, f64::max)
}

/// Block access `(1, a_A + 2, 4d√(δ_A/α_A) + σ)` to `P(A/α_A)`.
///
/// The block of `U_A` is transformed through its eigendecomposition and
/// embedded by an exact one-ancilla dilation; one idle ancilla pads the
/// register to `a_A + 2`. Each application charges `2d + 1` queries to `U_A`.
pub fn apply_polynomial(b: &BlockAccess, p: &Polynomial, sigma: f64) -> Result<BlockAccess> {
    let peak = p.max_abs_on_grid(GRID_POINTS);
    if peak > 0.5 + 1e-12 {
        return Err(Error::invalid(format!("polynomial peaks at {peak} > 1/2 on [-1, 1]")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let block = b.block();
    let herm = block.add(&block.adjoint())?.scale(0.5);
    if block.max_abs_diff(&herm) > 1e-9 + b.delta / b.alpha {
        return Err(Error::invalid("block of U_A is not Hermitian"));
    }
    let transformed = herm.hermitian_function(|x| p.eval(x.clamp(-1.0, 1.0)));
    let dilated = dilate_exact(&transformed, 1.0, "P(A)")?;
    let padded = DenseOperator::identity(b.ancillas + 1).kron(dilated.u.matrix());
    let d = p.degree() as u64;
    let charges = b.u.charges().scaled(2 * d + 1);
    let u = QueryCountedUnitary::composite(padded, format!("P({})", b.u.label()), charges)?;
    let delta = 4.0 * d as f64 * (b.delta / b.alpha).sqrt() + sigma;
    BlockAccess::new(1.0, b.ancillas + 2, delta, u)
}

#[derive(Clone, Debug)]
pub struct InverseBlockResult {
    pub block: BlockAccess,
    pub degree_used: usize,
    pub queries_per_application: u64,
}

/// Block access `(8κ/(3α_A), a_A + 2, ε)` to `A⁻¹`.
pub fn inverse_block(b: &BlockAccess, kappa: f64, eps: f64) -> Result<InverseBlockResult> {
    if b.delta != 0.0 {
        return Err(Error::invalid("inverse_block needs an exact block encoding"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    let block = b.block();
    if !block.is_hermitian(HERMITIAN_TOL.max(1e-10)) {
        return Err(Error::invalid("block of U_A is not Hermitian"));
    }
    let (eigs, _) = block.hermitian_eigen();
    let gap = eigs.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if gap < 1.0 / kappa - 1e-9 {
        return Err(Error::promise(format!(
            "spectrum of A/α_A reaches {gap}, inside (-1/κ, 1/κ) for κ = {kappa}"
        )));
    }
    let alpha = 8.0 * kappa / (3.0 * b.alpha);
    // ‖α·P(B)/2 − A⁻¹‖ ≤ α·poly_eps/2; spend half the budget on it
    let poly_eps = (eps / (2.0 * alpha)).min(0.5);
    let p = inverse_poly(kappa, poly_eps)?;
    let half = p.scaled(0.5);
    let applied = apply_polynomial(b, &half, 0.0)?;
    let degree = p.degree();
    let u = applied.u;
    let block = BlockAccess::new(alpha, applied.ancillas, eps, u)?;
    Ok(InverseBlockResult {
        block,
        degree_used: degree,
        queries_per_application: 2 * degree as u64 + 1,
    })
}
