//! Interference functionals of the two-block model.
//!
//! `psi(p, q) = ∫₁^∞ p / (p + t^{q/2}) dt` is the building block. With
//! `s = t^{q/2}`, a PPP of interferers outside the exclusion radius sees
//!
//! ```text
//! F[a, b, q] = ∫₁^∞ 1 − s² / ((a + s)(b + s)) dt
//!            = (a·Ψ(a) − b·Ψ(b)) / (a − b)        (correlated blocks)
//! F[a, b, q] = Ψ(a) + Ψ(b)                        (independent blocks)
//! ```
//!
//! Every integral over `t ∈ [1, ∞)` is evaluated after the substitution
//! `t = u^{-k}` with `k = 4/(q − 2)`, which turns the algebraic tail into a
//! smooth integrand on `u ∈ (0, 1]`:
//!
//! ```text
//! Ψ(p)        = ∫₀¹ k·u·p / (1 + p·v) du,          v = u^{2q/(q−2)}
//! ∂Ψ/∂p       = ∫₀¹ k·u / (1 + p·v)² du
//! ∂F/∂b (a,b) = ∫₀¹ k·u / ((1 + a·v)(1 + b·v)²) du
//! ```

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::model::ResourceSplit;
use crate::quadrature::Quadrature;

/// `|a − b| ≤ DIAGONAL_SWITCH · max(a, b)` evaluates `F` through its limit.
pub const DIAGONAL_SWITCH: f64 = 1e-6;

/// `|a − b| ≤ DERIVATIVE_SWITCH · max(a, b)` evaluates `∂F/∂b` by direct
/// quadrature instead of the closed difference quotient, whose `(a − b)²`
/// denominator amplifies rounding in Ψ.
pub const DERIVATIVE_SWITCH: f64 = 1e-2;

const PSI_QUADRATURE: Quadrature = Quadrature {
    abs_tol: 1e-13,
    rel_tol: 1e-13,
    max_evals: crate::quadrature::DEFAULT_MAX_EVALS,
};

fn check_exponent(q: f64) -> Result<()> {
    if q.is_finite() && q > 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "path-loss exponent must exceed 2 (integral diverges), got {q}"
        )))
    }
}

fn check_threshold(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && p >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be finite and non-negative, got {p}"
        )))
    }
}

fn check_bandwidth(name: &str, n: f64) -> Result<()> {
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive; route single-block cases to the coherent evaluation (got {n})"
        )))
    }
}

/// Block-1 SINR threshold `2^{(τ − z)⁺ / n1} − 1`.
pub fn beta_of(z: f64, tau: f64, n1: f64) -> Result<f64> {
    check_bandwidth("n1", n1)?;
    check_threshold("z", z)?;
    check_threshold("tau", tau)?;
    let excess = (tau - z).max(0.0);
    Ok((excess / n1 * LN_2).exp_m1())
}

/// Block-2 SINR threshold `2^{w / n2} − 1`.
pub fn gamma_of(w: f64, n2: f64) -> Result<f64> {
    check_bandwidth("n2", n2)?;
    check_threshold("w", w)?;
    Ok((w / n2 * LN_2).exp_m1())
}

/// `dγ/dw = ln 2 / n2 · 2^{w/n2}`.
pub fn gamma_prime(w: f64, n2: f64) -> Result<f64> {
    check_bandwidth("n2", n2)?;
    Ok(LN_2 / n2 * (w / n2 * LN_2).exp())
}

struct UnitMap {
    k: f64,
    m: f64,
}

impl UnitMap {
    fn new(q: f64) -> Self {
        Self {
            k: 4.0 / (q - 2.0),
            m: 2.0 * q / (q - 2.0),
        }
    }

    /// Where `p·u^m = 1`, i.e. where the integrand turns over.
    fn knee(&self, p: f64) -> Vec<f64> {
        if p > 1.0 {
            vec![p.powf(-1.0 / self.m)]
        } else {
            Vec::new()
        }
    }

    fn integrate<F: Fn(f64) -> f64>(&self, scale: f64, integrand: F) -> Result<f64> {
        let (k, m) = (self.k, self.m);
        PSI_QUADRATURE
            .integrate(
                |u| k * u * integrand(u.powf(m)),
                0.0,
                1.0,
                &self.knee(scale),
            )
            .map(|r| r.value)
    }
}

/// `Ψ(p, q) = ∫₁^∞ p / (p + t^{q/2}) dt`.
///
/// Uses `√p·arctan√p` for `q = 4` and adaptive quadrature otherwise.
pub fn psi(p: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    check_threshold("p", p)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    if q == 4.0 {
        let r = p.sqrt();
        return Ok(r * r.atan());
    }
    psi_quadrature(p, q)
}

/// Ψ by quadrature of its defining integral for any `q`, including 4.
pub fn psi_quadrature(p: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    check_threshold("p", p)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    UnitMap::new(q)
        .integrate(p, |v| p / (1.0 + p * v))
        .map_err(|e| e.named(format!("psi(p={p}, q={q})")))
}

/// `∂Ψ/∂p = ∫₁^∞ t^{q/2} / (p + t^{q/2})² dt`.
pub fn psi_dp(p: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    check_threshold("p", p)?;
    if p == 0.0 {
        return Ok(2.0 / (q - 2.0));
    }
    if q == 4.0 {
        let r = p.sqrt();
        return Ok(r.atan() / (2.0 * r) + 0.5 / (1.0 + p));
    }
    UnitMap::new(q)
        .integrate(p, |v| {
            let d = 1.0 + p * v;
            1.0 / (d * d)
        })
        .map_err(|e| e.named(format!("dpsi/dp(p={p}, q={q})")))
}

fn near_diagonal(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.max(b)
}

fn f_from_psi(a: f64, b: f64, psi_a: f64, psi_b: f64, c: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(psi_b);
    }
    if b == 0.0 {
        return Ok(psi_a);
    }
    if near_diagonal(a, b, DIAGONAL_SWITCH) {
        // L'Hôpital limit Ψ(x) + x·Ψ'(x), taken at the midpoint to stay symmetric.
        let x = 0.5 * (a + b);
        return Ok(psi(x, c)? + x * psi_dp(x, c)?);
    }
    Ok((a * psi_a - b * psi_b) / (a - b))
}

/// Correlated-interference functional `(a·Ψ(a,c) − b·Ψ(b,c)) / (a − b)`.
pub fn f_correlated(a: f64, b: f64, c: f64) -> Result<f64> {
    check_exponent(c)?;
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    f_from_psi(a, b, psi(a, c)?, psi(b, c)?, c)
}

/// Independent-interference functional `Ψ(a,c) + Ψ(b,c)`.
pub fn f_independent(a: f64, b: f64, c: f64) -> Result<f64> {
    check_exponent(c)?;
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    Ok(psi(a, c)? + psi(b, c)?)
}

/// Elementary form of the correlated functional for `c = 4`:
/// `(a^{3/2}·arctan√a − b^{3/2}·arctan√b) / (a − b)`.
pub fn f_correlated_alpha4(a: f64, b: f64) -> Result<f64> {
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    let g = |x: f64| x * x.sqrt() * x.sqrt().atan();
    if a == b {
        let r = a.sqrt();
        return Ok(1.5 * r * r.atan() + 0.5 * a / (1.0 + a));
    }
    Ok((g(a) - g(b)) / (a - b))
}

fn df_db_from_psi(a: f64, b: f64, psi_a: f64, psi_b: f64, c: f64) -> Result<f64> {
    if near_diagonal(a, b, DERIVATIVE_SWITCH) {
        return df_db_quadrature(a, b, c);
    }
    // The bracket of the closed form with the leading factor a distributed,
    // so that a = 0 needs no special case. b/(1+b) = 1/(1 + 1/b).
    let d = a - b;
    let two_over_c = 2.0 / c;
    let bracket = a * psi_a - d * two_over_c * b / (1.0 + b) - (a + two_over_c * d) * psi_b;
    Ok(bracket / (d * d))
}

/// `∂F/∂b` for the correlated functional by direct quadrature. Valid
/// everywhere, including on the diagonal `a = b`.
pub fn df_db_quadrature(a: f64, b: f64, c: f64) -> Result<f64> {
    check_exponent(c)?;
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    if a == 0.0 && b == 0.0 {
        return Ok(2.0 / (c - 2.0));
    }
    UnitMap::new(c)
        .integrate(a.max(b), |v| {
            let db = 1.0 + b * v;
            1.0 / ((1.0 + a * v) * db * db)
        })
        .map_err(|e| e.named(format!("dF/db(a={a}, b={b}, c={c})")))
}

/// `∂F/∂b` of the correlated functional.
pub fn df_db_correlated(a: f64, b: f64, c: f64) -> Result<f64> {
    check_exponent(c)?;
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    df_db_from_psi(a, b, psi(a, c)?, psi(b, c)?, c)
}

/// Value and `∂/∂b` of the correlated functional, sharing the Ψ evaluations.
pub fn correlated_with_slope(a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    check_exponent(c)?;
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    let psi_a = psi(a, c)?;
    let psi_b = psi(b, c)?;
    Ok((
        f_from_psi(a, b, psi_a, psi_b, c)?,
        df_db_from_psi(a, b, psi_a, psi_b, c)?,
    ))
}

/// Value and `∂/∂b` of the independent functional.
pub fn independent_with_slope(a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    check_exponent(c)?;
    check_threshold("a", a)?;
    check_threshold("b", b)?;
    Ok((psi(a, c)? + psi(b, c)?, psi_dp(b, c)?))
}

fn two_block(split: &ResourceSplit) -> Result<()> {
    if split.is_coherent() {
        Err(Error::Domain(
            "the two-block derivative needs n1 > 0 and n2 > 0".into(),
        ))
    } else {
        Ok(())
    }
}

/// `d/dw F[β(z), γ(w), c]` at `w = z` for correlated interference.
pub fn df_dw_at_z(z: f64, tau: f64, split: &ResourceSplit, c: f64) -> Result<f64> {
    two_block(split)?;
    let beta = beta_of(z, tau, split.n1())?;
    let gamma = gamma_of(z, split.n2())?;
    Ok(gamma_prime(z, split.n2())? * df_db_correlated(beta, gamma, c)?)
}

/// `d/dw F[β(z), γ(w), c]` at `w = z` when the blocks see independent interference.
pub fn df_dw_at_z_independent(z: f64, tau: f64, split: &ResourceSplit, c: f64) -> Result<f64> {
    two_block(split)?;
    check_threshold("tau", tau)?;
    let gamma = gamma_of(z, split.n2())?;
    Ok(gamma_prime(z, split.n2())? * psi_dp(gamma, c)?)
}

/// Ψ through the Gauss hypergeometric function:
/// `2π p^{2/q} csc(2π/q) / q − ₂F₁(1, 2/q; 1 + 2/q; −1/p)`.
///
/// Only a cross-check for [`psi`].
pub fn hyp_psi(p: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Domain(format!("hyp_psi needs p > 0, got {p}")));
    }
    let delta = 2.0 / q;
    let full_plane = PI * delta / (PI * delta).sin() * p.powf(delta);
    Ok(full_plane - hyp2f1_one_delta(delta, 1.0 / p))
}

/// `₂F₁(1, δ; 1 + δ; −x)` for `x ≥ 0`, `0 < δ < 1`.
fn hyp2f1_one_delta(delta: f64, x: f64) -> f64 {
    if x <= 1.0 {
        // Pfaff: (1 + x)⁻¹ ₂F₁(1, 1; 1 + δ; x/(1 + x)).
        hyp2f1_series(1.0, 1.0, 1.0 + delta, x / (1.0 + x)) / (1.0 + x)
    } else {
        // z → 1/z connection (a − b = 1 − δ is not an integer), then Pfaff
        // on the remaining ₂F₁(1, 1 − δ; 2 − δ; −1/x).
        let reflected = PI * delta / (PI * delta).sin() * x.powf(-delta);
        let tail = x / (1.0 + x) * hyp2f1_series(1.0, 1.0, 2.0 - delta, 1.0 / (1.0 + x));
        reflected + delta / (delta - 1.0) / x * tail
    }
}

/// Power series of ₂F₁(a, b; c; w); callers keep |w| ≤ 1/2.
fn hyp2f1_series(a: f64, b: f64, c: f64, w: f64) -> f64 {
    debug_assert!(w.abs() <= 0.5 + 1e-12);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..2000 {
        let n = n as f64;
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * w;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}
