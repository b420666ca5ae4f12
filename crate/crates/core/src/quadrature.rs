//! One-dimensional adaptive integration and bracketing root finding.
//!
//! The integrator is a globally adaptive Gauss–Kronrod (10/21-point) scheme:
//! the panel with the largest error estimate is bisected until the summed
//! error meets the tolerance. Error estimates follow QUADPACK's `qk21`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default evaluation budget per integral.
pub const DEFAULT_MAX_EVALS: usize = 1_000_000;

// Nodes and weights as published with QUADPACK, beyond f64 precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_653_860,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const EVALS_PER_PANEL: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position so the order is total.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for (j, wg) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += wg * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_k += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Tolerances and budget for an adaptive integration.
///
/// The result is accepted once the summed error estimate falls below
/// `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 0.0,
            max_evals: DEFAULT_MAX_EVALS,
        }
    }
}

impl Quadrature {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    /// Integrates `f` over `[lo, hi]`. Breakpoints inside the interval start
    /// the subdivision there; points outside are ignored.
    pub fn integrate<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
    ) -> Result<QuadResult> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!(
                "integration bounds must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        let mut edges = vec![lo];
        let mut inner: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b.is_finite() && b > lo && b < hi)
            .collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        edges.extend(inner);
        edges.push(hi);

        let mut heap = BinaryHeap::new();
        let mut done: Vec<Panel> = Vec::new();
        let mut evaluations = 0;
        for w in edges.windows(2) {
            heap.push(kronrod21(&f, w[0], w[1]));
            evaluations += EVALS_PER_PANEL;
        }

        let (mut value, mut error) = totals(heap.iter());
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations % 64 == 0 {
                (value, error) = totals(heap.iter().chain(done.iter()));
            }
            if error <= self.tolerance(value) {
                (value, error) = totals(heap.iter().chain(done.iter()));
                if error <= self.tolerance(value) {
                    return Ok(QuadResult {
                        value,
                        error_estimate: error,
                        evaluations,
                    });
                }
            }
            let Some(worst) = heap.pop() else {
                let (value, error) = totals(done.iter());
                return Err(no_convergence(value, error, evaluations));
            };
            let mid = 0.5 * (worst.lo + worst.hi);
            // A panel this narrow cannot be refined further in double precision.
            if !(mid > worst.lo && mid < worst.hi)
                || (worst.hi - worst.lo) <= 8.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE)
            {
                done.push(worst);
                continue;
            }
            if evaluations + 2 * EVALS_PER_PANEL > self.max_evals {
                heap.push(worst);
                let (value, error) = totals(heap.iter().chain(done.iter()));
                return Err(no_convergence(value, error, evaluations));
            }
            let left = kronrod21(&f, worst.lo, mid);
            let right = kronrod21(&f, mid, worst.hi);
            evaluations += 2 * EVALS_PER_PANEL;
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
    }

    /// Integrates `f` over `[lo, ∞)` through `u = lo + scale·s/(1−s)`.
    ///
    /// `scale` should be the length over which `f` decays; the default
    /// mapping uses 1. Breakpoints are given in the original variable.
    pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        scale: f64,
        breakpoints: &[f64],
    ) -> Result<QuadResult> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!(
                "mapping scale must be positive, got {scale}"
            )));
        }
        let mapped: Vec<f64> = breakpoints
            .iter()
            .filter(|&&b| b > lo && b.is_finite())
            .map(|&b| (b - lo) / (scale + (b - lo)))
            .collect();
        let g = |s: f64| {
            let one_minus = 1.0 - s;
            let u = lo + scale * s / one_minus;
            let v = f(u);
            if v == 0.0 {
                0.0
            } else {
                v * scale / (one_minus * one_minus)
            }
        };
        self.integrate(g, 0.0, 1.0, &mapped)
    }
}

fn totals<'a>(panels: impl Iterator<Item = &'a Panel>) -> (f64, f64) {
    // Sum in position order so the result does not depend on heap layout.
    let mut all: Vec<&Panel> = panels.collect();
    all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    all.iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

fn no_convergence(estimate: f64, error_estimate: f64, evaluations: usize) -> Error {
    Error::NoConvergence {
        integral: "adaptive quadrature".into(),
        estimate,
        error_estimate,
        evaluations,
    }
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    breakpoints: &[f64],
) -> Result<QuadResult> {
    Quadrature::with_abs_tol(abs_tol).integrate(f, lo, hi, breakpoints)
}

/// Integrates `f` over `[lo, ∞)` with the unit-scale mapping `u = lo + s/(1−s)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    abs_tol: f64,
    breakpoints: &[f64],
) -> Result<QuadResult> {
    Quadrature::with_abs_tol(abs_tol).integrate_semi_infinite(f, lo, 1.0, breakpoints)
}

/// Bisection for a non-increasing `f` with `f(lo) ≥ 0 ≥ f(hi)`.
///
/// Returns the midpoint of the final bracket, whose width is at most `tol`.
pub fn find_root_decreasing<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    try_find_root_decreasing(|x| Ok(f(x)), lo, hi, tol)
}

/// Like [`find_root_decreasing`] for a fallible function.
pub fn try_find_root_decreasing<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(lo < hi && tol > 0.0) {
        return Err(Error::Domain(format!(
            "root bracket [{lo}, {hi}] with tolerance {tol} is invalid"
        )));
    }
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        return Err(Error::BracketViolation { f_lo, f_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
