//! End-to-end acceptance checks on the three-tier reference scenario.
//!
//! Runs as a plain binary and prints one PASS/FAIL line per criterion.
//! Exits nonzero if any criterion fails.

use std::f64::consts::FRAC_PI_4;
use std::process::ExitCode;
use std::time::Instant;

use hetcov::analytic::{
    association_probability, coverage_curve, deviation_ignoring_correlation, gain_vs_coherent,
    rate_at_coverage, rate_coverage, rate_coverage_with, CoverageMethod, CoverageOptions,
};
use hetcov::montecarlo::{estimate_coverage_curve, sample_rates, truncation_check, McConfig};
use hetcov::specfun::{
    beta_of, df_dw_at_z, f_correlated, f_correlated_alpha4, gamma_of, psi_quadrature,
};
use hetcov::{ResourceSplit, Scenario, TierParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: f64 = 8_820_000.0;
const ETAS: [f64; 4] = [0.0, 0.1, 0.2, 0.5];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn method_for(split: &ResourceSplit) -> CoverageMethod {
    if split.is_coherent() {
        CoverageMethod::Coherent
    } else {
        CoverageMethod::Exact
    }
}

fn theory_matches_simulation() -> Outcome {
    let s = Scenario::reference_three_tier();
    let opts = CoverageOptions::default();
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut lines = Vec::new();
    for eta in ETAS {
        let split = ResourceSplit::from_eta(N, eta).map_err(|e| e.to_string())?;
        let m = method_for(&split);
        let lo = rate_at_coverage(&s, &split, 0.99, m, &opts).map_err(|e| e.to_string())?;
        let hi = rate_at_coverage(&s, &split, 0.1, m, &opts).map_err(|e| e.to_string())?;
        let grid: Vec<f64> = (0..15).map(|i| lo + (hi - lo) * i as f64 / 14.0).collect();
        let curve = coverage_curve(&s, &split, &grid, &[m], &opts).map_err(|e| e.to_string())?;
        let mc = estimate_coverage_curve(&s, &split, &grid, &McConfig::default())
            .map_err(|e| e.to_string())?;
        let mut fails = 0;
        for (pc, est) in curve.columns[0].values.iter().zip(&mc) {
            let diff = (pc - est.p_hat).abs();
            let allowed = (3.0 * est.std_err).max(0.01);
            if diff > allowed {
                fails += 1;
            }
            if diff / allowed > worst.0 {
                worst = (diff / allowed, diff, eta);
            }
        }
        lines.push(format!("eta={eta}: {fails} of 15 outside"));
    }
    check(
        worst.0 <= 1.0,
        format!(
            "{}; worst |dP|={:.4} at eta={} ({:.2} of allowance)",
            lines.join(", "),
            worst.1,
            worst.2,
            worst.0
        ),
    )
}

fn diversity_gain() -> Outcome {
    let s = Scenario::reference_three_tier();
    let opts = CoverageOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (eta, target) in [(0.1, 0.40), (0.5, 0.90)] {
        let g = gain_vs_coherent(&s, N, eta, 0.9, &opts).map_err(|e| e.to_string())?;
        ok &= (g.gain() - target).abs() <= 0.10;
        parts.push(format!(
            "eta={eta}: gain {:.3} (expected {target:.2} +/- 0.10)",
            g.gain()
        ));
    }
    check(ok, parts.join(", "))
}

fn correlation_deviation() -> Outcome {
    let s = Scenario::reference_three_tier();
    let opts = CoverageOptions::default();
    let mut ok = true;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut diff = 0.0;
    for eta in [0.1, 0.2, 0.5] {
        for pc in [0.5, 0.7, 0.9] {
            let d =
                deviation_ignoring_correlation(&s, N, eta, pc, &opts).map_err(|e| e.to_string())?;
            let dev = d.deviation();
            ok &= dev > 0.0 && (0.02..=0.07).contains(&dev);
            lo = lo.min(dev);
            hi = hi.max(dev);
            if eta == 0.5 && pc == 0.9 {
                diff = d.abs_diff();
            }
        }
    }
    ok &= (diff - 129e3).abs() <= 25e3;
    check(
        ok,
        format!(
            "deviation range [{lo:.4}, {hi:.4}] (allowed [0.02, 0.07]); \
             abs diff at eta=0.5, pc=0.9: {:.1} kbit/s (expected 129 +/- 25)",
            diff / 1e3
        ),
    )
}

fn special_function_exactness() -> Outcome {
    let mut worst_psi = 0.0f64;
    for p in [0.01f64, 0.1, 1.0, 10.0, 100.0] {
        let closed = p.sqrt() * p.sqrt().atan();
        worst_psi = worst_psi.max(rel(
            psi_quadrature(p, 4.0).map_err(|e| e.to_string())?,
            closed,
        ));
    }
    // Two interleaved grids keep a ≠ b in every cell.
    let a_grid = logspace(1e-3, 50.0, 20);
    let b_grid = logspace(1.4e-3, 40.0, 20);
    let mut worst_f = 0.0f64;
    for &a in &a_grid {
        for &b in &b_grid {
            let pa = psi_quadrature(a, 4.0).map_err(|e| e.to_string())?;
            let pb = psi_quadrature(b, 4.0).map_err(|e| e.to_string())?;
            let composed = (a * pa - b * pb) / (a - b);
            let elementary = f_correlated_alpha4(a, b).map_err(|e| e.to_string())?;
            worst_f = worst_f.max(rel(composed, elementary));
        }
    }
    check(
        worst_psi <= 1e-10 && worst_f <= 1e-10,
        format!(
            "psi max rel err {worst_psi:.2e}, F(a,b,4) max rel err {worst_f:.2e} (limit 1e-10)"
        ),
    )
}

fn central_difference(z: f64, tau: f64, split: &ResourceSplit, c: f64) -> Result<f64, String> {
    let beta = beta_of(z, tau, split.n1()).map_err(|e| e.to_string())?;
    let h = 1e-4 * split.n2();
    let f = |w: f64| -> Result<f64, String> {
        let g = gamma_of(w, split.n2()).map_err(|e| e.to_string())?;
        f_correlated(beta, g, c).map_err(|e| e.to_string())
    };
    Ok((f(z + h)? - f(z - h)?) / (2.0 * h))
}

fn derivative_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_off = 0.0f64;
    let mut samples = 0;
    while samples < 100 {
        let eta = rng.random_range(0.05..0.95);
        let split = ResourceSplit::from_eta(1e6, eta).map_err(|e| e.to_string())?;
        let tau = rng.random_range(0.1..3.0) * split.total();
        let z = rng.random_range(0.01..0.99) * tau;
        let c = rng.random_range(2.5..6.0);
        if (z - tau * split.n2() / split.total()).abs() < 0.05 * tau {
            continue;
        }
        let analytic = df_dw_at_z(z, tau, &split, c).map_err(|e| e.to_string())?;
        worst_off = worst_off.max(rel(analytic, central_difference(z, tau, &split, c)?));
        samples += 1;
    }
    let mut worst_on = 0.0f64;
    for i in 0..20 {
        let eta = 0.05 + 0.045 * i as f64;
        let split = ResourceSplit::from_eta(1e6, eta).map_err(|e| e.to_string())?;
        let tau = (0.2 + 0.1 * i as f64) * split.total();
        let z = tau * split.n2() / split.total();
        let c = 2.5 + 0.15 * i as f64;
        let analytic = df_dw_at_z(z, tau, &split, c).map_err(|e| e.to_string())?;
        worst_on = worst_on.max(rel(analytic, central_difference(z, tau, &split, c)?));
    }
    check(
        worst_off <= 1e-5 && worst_on <= 1e-4,
        format!(
            "off-diagonal max rel err {worst_off:.2e} (limit 1e-5), \
             on beta=gamma {worst_on:.2e} (limit 1e-4)"
        ),
    )
}

fn noiseless_equal_alpha(density_factor: f64) -> Result<Scenario, String> {
    let base = Scenario::reference_three_tier();
    let tiers = base
        .tiers()
        .iter()
        .map(|t| TierParams::new(t.density_per_km2() * density_factor, t.power_dbm(), 3.76))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Scenario::new(tiers, None).map_err(|e| e.to_string())
}

fn corollary_consistency() -> Outcome {
    let s = noiseless_equal_alpha(1.0)?;
    let dense = noiseless_equal_alpha(10.0)?;
    let split = ResourceSplit::from_eta(N, 0.2).map_err(|e| e.to_string())?;
    let (mut gap, mut drift) = (0.0f64, 0.0f64);
    for i in 1..=10 {
        let tau = 0.2 * i as f64 * N;
        let mut values = Vec::new();
        for sc in [&s, &dense] {
            for m in [CoverageMethod::Exact, CoverageMethod::NoNoiseEqualAlpha] {
                values.push(rate_coverage(sc, &split, tau, m).map_err(|e| e.to_string())?);
            }
        }
        gap = gap.max((values[0] - values[1]).abs());
        drift = drift
            .max((values[0] - values[2]).abs())
            .max((values[1] - values[3]).abs());
    }
    check(
        gap <= 1e-4 && drift <= 1e-6,
        format!("max |double - single| {gap:.2e} (limit 1e-4), density x10 drift {drift:.2e} (limit 1e-6)"),
    )
}

fn random_scenario(rng: &mut ChaCha8Rng) -> Result<Scenario, String> {
    let k = rng.random_range(1..=5);
    let tiers = (0..k)
        .map(|_| {
            TierParams::new(
                rng.random_range(0.01..100.0),
                rng.random_range(-10.0..50.0),
                rng.random_range(2.2..6.0),
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let noise = if rng.random_bool(0.5) {
        Some(rng.random_range(-120.0..-80.0))
    } else {
        None
    };
    Scenario::new(tiers, noise).map_err(|e| e.to_string())
}

fn structural_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_sum = 0.0f64;
    for _ in 0..50 {
        let s = random_scenario(&mut rng)?;
        let total: f64 = (0..s.num_tiers())
            .map(|l| association_probability(&s, l))
            .sum::<Result<f64, _>>()
            .map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((total - 1.0).abs());
    }

    let s = Scenario::reference_three_tier();
    let mut worst_swap = 0.0f64;
    let mut at_zero = true;
    let mut monotone = true;
    let grid: Vec<f64> = (0..25).map(|i| i as f64 * 0.1 * N).collect();
    for eta in [0.1, 0.2, 0.35, 0.5, 0.8] {
        let split = ResourceSplit::from_eta(N, eta).map_err(|e| e.to_string())?;
        for m in [
            CoverageMethod::Exact,
            CoverageMethod::IndependentInterference,
        ] {
            let raw = grid
                .iter()
                .map(|&t| rate_coverage_with(&s, &split, t, m, &CoverageOptions::default()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            at_zero &= raw[0] == 1.0;
            monotone &= raw.windows(2).all(|w| w[1] <= w[0]);
            for &tau in &[0.3 * N, 0.9 * N, 1.7 * N] {
                let a = rate_coverage(&s, &split, tau, m).map_err(|e| e.to_string())?;
                let b = rate_coverage(&s, &split.swapped(), tau, m).map_err(|e| e.to_string())?;
                worst_swap = worst_swap.max((a - b).abs());
            }
        }
    }

    let single = Scenario::new(
        vec![TierParams::new(1.0, 30.0, 4.0).map_err(|e| e.to_string())?],
        None,
    )
    .map_err(|e| e.to_string())?;
    let coherent = ResourceSplit::from_eta(N, 0.0).map_err(|e| e.to_string())?;
    let pc = rate_coverage(&single, &coherent, N, CoverageMethod::Coherent)
        .map_err(|e| e.to_string())?;
    let closed_gap = (pc - 1.0 / (1.0 + FRAC_PI_4)).abs();

    check(
        worst_sum <= 1e-9 && worst_swap <= 1e-6 && at_zero && monotone && closed_gap <= 1e-6,
        format!(
            "sum A_l err {worst_sum:.1e}, swap err {worst_swap:.1e}, P(0)=1 {at_zero}, \
             monotone {monotone}, single-tier closed form err {closed_gap:.1e}"
        ),
    )
}

fn determinism_and_truncation() -> Outcome {
    let s = Scenario::reference_three_tier();
    let split = ResourceSplit::from_eta(N, 0.2).map_err(|e| e.to_string())?;
    let small = McConfig {
        trials: 5_000,
        seed: 17,
        ..McConfig::default()
    };
    let bits = |cfg: &McConfig| -> Result<Vec<u64>, String> {
        Ok(sample_rates(&s, &split, cfg)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|r| r.to_bits())
            .collect())
    };
    let identical = bits(&small)? == bits(&small)?;

    let opts = CoverageOptions::default();
    let lo = rate_at_coverage(&s, &split, 0.99, CoverageMethod::Exact, &opts)
        .map_err(|e| e.to_string())?;
    let hi = rate_at_coverage(&s, &split, 0.1, CoverageMethod::Exact, &opts)
        .map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..15).map(|i| lo + (hi - lo) * i as f64 / 14.0).collect();
    let check_result =
        truncation_check(&s, &split, &grid, &McConfig::default()).map_err(|e| e.to_string())?;
    let shift = check_result.max_shift_in_std_err();
    check(
        identical && shift < 1.0,
        format!("repeat run bit-identical {identical}; radius 5 km -> 10 km max shift {shift:.3} std_err (limit 1)"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "theory vs simulation coverage curves",
            theory_matches_simulation,
        ),
        ("frequency-diversity rate gain", diversity_gain),
        (
            "rate deviation when ignoring correlation",
            correlation_deviation,
        ),
        ("special-function exactness", special_function_exactness),
        ("derivative exactness", derivative_exactness),
        (
            "noiseless equal-exponent consistency",
            corollary_consistency,
        ),
        ("structural invariants", structural_invariants),
        (
            "simulation determinism and truncation",
            determinism_and_truncation,
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
