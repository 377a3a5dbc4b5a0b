//! Built-in invariant suite run by the `verify` subcommand.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{density_lipschitz, rugosity_check, RugosityOptions};
use crate::density::{density_curve, geometric_radii, sphere_coarea_density, DensityMethod, DensityOptions};
use crate::error::Result;
use crate::geometry::{dot, invert, invert_fiber_polynomial, inversion_jacobian, norm, sphere_point};
use crate::kinf::{detect_kinf, BinSpec, KinfConfig};
use crate::poly::Polynomial;
use crate::rng::{stage, StreamId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

type CheckFn = fn(u64) -> Result<(bool, String)>;

fn poly(s: &str, n: usize) -> Polynomial {
    Polynomial::parse(s, n).expect("built-in expression")
}

/// Count-based cases with their exact densities.
const COUNT_CASES: &[(&str, &[f64], f64)] = &[
    ("x", &[-1.0, 0.0, 2.0], 1.0),
    ("x*y", &[-5.0, -1.0, 0.0, 1.0, 5.0], 2.0),
    ("x + x^2*y", &[-1.0, -0.5, -0.1, 0.1, 0.5, 1.0], 2.0),
    ("x + x^2*y", &[0.0], 3.0),
];

fn parse_print(_: u64) -> Result<(bool, String)> {
    let cases = [
        ("x + x^2*y", 2),
        ("3*x^3 - 2.5*x*y + 7", 2),
        ("(x - y)^4 - z", 3),
        ("x1*x2*x3 + x4^2 - 0.125", 4),
    ];
    let mut bad = Vec::new();
    for (s, n) in cases {
        let p = Polynomial::parse(s, n)?;
        let q = Polynomial::parse(&p.to_string(), n)?;
        if p != q {
            bad.push(s);
        }
    }
    Ok((bad.is_empty(), format!("{} expressions, mismatches: {bad:?}", cases.len())))
}

fn counts(_: u64) -> Result<(bool, String)> {
    let radii = geometric_radii(8.0, 6);
    let opts = DensityOptions::default();
    let mut bad = Vec::new();
    for (f, ts, want) in COUNT_CASES {
        for &t in *ts {
            let c = density_curve(&poly(f, 2), t, DensityMethod::SphereCount, &radii, &opts, 0)?;
            if c.values().iter().any(|v| v != want) {
                bad.push(format!("{f} t={t}: {:?}", c.values()));
            }
        }
    }
    Ok((bad.is_empty(), if bad.is_empty() { "all counts exact".into() } else { bad.join("; ") }))
}

fn inversion_counts(_: u64) -> Result<(bool, String)> {
    let radii = geometric_radii(8.0, 6);
    let opts = DensityOptions::default();
    let mut bad = Vec::new();
    let mut n = 0;
    for (f, ts, _) in COUNT_CASES {
        for &t in *ts {
            let a = density_curve(&poly(f, 2), t, DensityMethod::SphereCount, &radii, &opts, 0)?;
            let b = density_curve(&poly(f, 2), t, DensityMethod::Inversion, &radii, &opts, 0)?;
            n += 1;
            if a.values() != b.values() {
                bad.push(format!("{f} t={t}"));
            }
        }
    }
    Ok((bad.is_empty(), format!("{n} curves compared, mismatches: {bad:?}")))
}

fn conformality(seed: u64) -> Result<(bool, String)> {
    let mut rng = StreamId::new(seed, stage::VERIFY, 0).rng();
    let mut worst_sv = 0.0f64;
    let mut worst_inv = 0.0f64;
    for n in [2, 3] {
        for _ in 0..1000 {
            let r = 10f64.powf(rng.gen_range(-3.0..3.0));
            let x = sphere_point(&mut rng, n, r);
            let j = inversion_jacobian(&x)?;
            // J J^T = |x|^-4 I  <=>  every singular value is |x|^-2
            let s = dot(&x, &x).powi(2);
            for a in 0..n {
                for b in 0..n {
                    let g: f64 = (0..n).map(|k| j.entries[a][k] * j.entries[b][k]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst_sv = worst_sv.max((g * s - want).abs());
                }
            }
            let back = invert(&invert(&x)?)?;
            let d: Vec<f64> = back.iter().zip(&x).map(|(a, b)| a - b).collect();
            worst_inv = worst_inv.max(norm(&d) / norm(&x));
        }
    }
    Ok((
        worst_sv <= 1e-10 && worst_inv <= 1e-12,
        format!("max |x|^4 JJ^T - I| = {worst_sv:e}, max involution error = {worst_inv:e}"),
    ))
}

fn inverted_fiber_identity(seed: u64) -> Result<(bool, String)> {
    let mut rng = StreamId::new(seed, stage::VERIFY, 1).rng();
    let mut worst = 0.0f64;
    for (s, t) in [("x + x^2*y", 0.3), ("x*y - 2*y^3", -1.0), ("x^2 + y^2", 4.0)] {
        let f = poly(s, 2);
        let d = f.degree().unwrap_or(0) as i32;
        let g = invert_fiber_polynomial(&f, t)?;
        for _ in 0..1000 {
            let r = rng.gen_range(0.2..5.0);
            let x = sphere_point(&mut rng, 2, r);
            let lhs = g.eval(&invert(&x)?)? * dot(&x, &x).powi(d);
            let rhs = f.eval(&x)? - t;
            let scale = 1.0 + f.eval(&x)?.abs() + t.abs();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok((worst <= 1e-10, format!("max scaled error {worst:e}")))
}

fn kinf_broughton(seed: u64) -> Result<(bool, String)> {
    let cfg = KinfConfig { seed, ..KinfConfig::default() };
    let rep = detect_kinf(&poly("x + x^2*y", 2), &geometric_radii(8.0, 6), &cfg)?;
    let ok = rep.candidates.len() == 1
        && rep.candidates[0].value.abs() < cfg.bins.width
        && (rep.candidates[0].decay_slope + 1.0).abs() <= 0.2;
    let desc: Vec<String> = rep
        .candidates
        .iter()
        .map(|c| format!("value {:?} slope {:?}", c.value, c.decay_slope))
        .collect();
    Ok((ok, format!("candidates: [{}]", desc.join(", "))))
}

fn kinf_hyperbola(seed: u64) -> Result<(bool, String)> {
    let cfg = KinfConfig { seed, ..KinfConfig::default() };
    let rep = detect_kinf(&poly("x*y", 2), &geometric_radii(8.0, 6), &cfg)?;
    let slope = rep.global_slope.unwrap_or(f64::NAN);
    Ok((
        rep.candidates.is_empty() && (slope - 2.0).abs() <= 0.05,
        format!("{} candidates, envelope slope {slope:?}", rep.candidates.len()),
    ))
}

fn kinf_shift(seed: u64) -> Result<(bool, String)> {
    let radii = geometric_radii(8.0, 6);
    let base_cfg = KinfConfig { seed, ..KinfConfig::default() };
    let shifted_cfg = KinfConfig {
        bins: BinSpec {
            center: 0.5,
            ..BinSpec::default()
        },
        ..base_cfg
    };
    let a = detect_kinf(&poly("x + x^2*y", 2), &radii, &base_cfg)?;
    let b = detect_kinf(&poly("x + x^2*y + 0.5", 2), &radii, &shifted_cfg)?;
    let ok = a.candidates.len() == b.candidates.len()
        && a
            .candidates
            .iter()
            .zip(&b.candidates)
            .all(|(p, q)| (q.value - p.value - 0.5).abs() < 1e-12 && p.final_nu == q.final_nu);
    Ok((ok, format!("{} vs {} candidates", a.candidates.len(), b.candidates.len())))
}

fn lipschitz_broughton(seed: u64) -> Result<(bool, String)> {
    let grid: Vec<f64> = (-4..=4).map(|k| 0.05 * k as f64).collect();
    let opts = DensityOptions { seed, ..DensityOptions::default() };
    let rep = density_lipschitz(
        &poly("x + x^2*y", 2),
        &grid,
        DensityMethod::SphereCount,
        &geometric_radii(8.0, 6),
        &opts,
        0.5,
        &[0.0],
    )?;
    let ok = rep.discontinuities.len() == 1
        && rep.discontinuities[0].t_location == 0.0
        && (rep.discontinuities[0].jump_size - 1.0).abs() <= 0.05;
    let desc: Vec<String> = rep
        .discontinuities
        .iter()
        .map(|d| format!("at {:?} jump {:?}", d.t_location, d.jump_size))
        .collect();
    Ok((ok, format!("discontinuities: [{}]", desc.join(", "))))
}

fn rugosity_bounds(seed: u64) -> Result<(bool, String)> {
    let opts = RugosityOptions {
        pairs_per_radius: 32,
        seed,
        ..RugosityOptions::default()
    };
    let f = poly("x*y", 2);
    let rep = rugosity_check(&f, (0.5, 2.0), &[], &geometric_radii(8.0, 4), &opts)?;
    let df = crate::poly::DiffPoly::new(f);
    let mut worst = 0.0f64;
    let mut dist_ok = true;
    for s in &rep.pair_samples {
        worst = worst.max(s.v_tail_norm * dot(&s.x, &s.x) * norm(&df.gradient_at(&s.x)));
        dist_ok &= s.distance >= (1.0 / norm(&s.x)) * (1.0 - 1e-15);
    }
    Ok((
        worst <= 1.0 + 1e-12 && dist_ok && rep.fitted_c.is_finite(),
        format!("{} pairs, max |v_tail| |x|^2 |grad f| = {worst:?}", rep.pair_samples.len()),
    ))
}

fn coarea_line(seed: u64) -> Result<(bool, String)> {
    let est = sphere_coarea_density(&poly("x", 2), 0.0, 16.0, 0.05, 200_000, StreamId::new(seed, stage::VERIFY, 2))?;
    Ok((
        (est.value - 1.0).abs() <= 4.0 * est.stderr,
        format!("value {:?} stderr {:?}", est.value, est.stderr),
    ))
}

const CHECKS: &[(&str, CheckFn)] = &[
    ("parse_print_fixed_point", parse_print),
    ("sphere_count_exact", counts),
    ("inversion_equals_count", inversion_counts),
    ("inversion_conformal_involution", conformality),
    ("inverted_fiber_identity", inverted_fiber_identity),
    ("kinf_broughton_single_candidate", kinf_broughton),
    ("kinf_hyperbola_none", kinf_hyperbola),
    ("kinf_shift_invariance", kinf_shift),
    ("lipschitz_broughton_jump", lipschitz_broughton),
    ("rugosity_conformal_bound", rugosity_bounds),
    ("coarea_line_unit_density", coarea_line),
];

/// Runs every built-in check; deterministic in `seed`.
pub fn verify(seed: u64) -> VerifyReport {
    let checks: Vec<Check> = CHECKS
        .par_iter()
        .map(|(name, check)| {
            let (passed, detail) = check(seed).unwrap_or_else(|e| (false, format!("error: {e}")));
            Check {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect();
    let passed = checks.iter().filter(|c| c.passed).count();
    VerifyReport {
        seed,
        failed: checks.len() - passed,
        passed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_repeats() {
        let a = verify(7);
        for c in &a.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(a, verify(7));
    }
}
