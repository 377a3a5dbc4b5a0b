//! The density profile `t -> theta(f^{-1}(t), infinity)`, its empirical
//! Lipschitz behaviour, and the rugosity check of the lifted vector field
//! `v(t, u) = d/dt + d_x phi (grad f / |grad f|^2)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{density_curve, extrapolate_limit, DensityCurve, DensityEstimate, DensityMethod, DensityOptions};
use crate::error::{Error, Result};
use crate::fiber::{circle_fiber_points_diff, ScanConfig};
use crate::geometry::{apply_inversion_jacobian, dot, invert, norm};
use crate::kinf::{critical_points, rabier_scan_diff, sigma1_from_critical, CriticalSearch, RabierScanConfig};
use crate::numerics::sorted_quantile;
use crate::poly::{DiffPoly, Polynomial};
use crate::rng::{stage, StreamId};

/// Streams reserved per grid level; level `i` uses tasks `i * TASKS_PER_LEVEL ..`.
pub const TASKS_PER_LEVEL: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub t: f64,
    pub curve: Option<DensityCurve>,
    pub estimate: Option<DensityEstimate>,
    /// Set when the estimator failed at this level.
    pub error: Option<String>,
}

impl ProfilePoint {
    pub fn theta(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.theta)
    }
}

fn check_increasing(t_grid: &[f64]) -> Result<()> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("t grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn estimate_at(f: &Polynomial, t: f64, method: DensityMethod, radii: &[f64], opts: &DensityOptions, task: u32) -> ProfilePoint {
    let curve = match density_curve(f, t, method, radii, opts, task) {
        Ok(c) => c,
        Err(e) => {
            return ProfilePoint {
                t,
                curve: None,
                estimate: None,
                error: Some(e.to_string()),
            }
        }
    };
    let (estimate, error) = match extrapolate_limit(&curve) {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ProfilePoint {
        t,
        curve: Some(curve),
        estimate,
        error,
    }
}

/// One extrapolated density per level. Failures are recorded on the point.
pub fn density_profile(
    f: &Polynomial,
    t_grid: &[f64],
    method: DensityMethod,
    radii: &[f64],
    opts: &DensityOptions,
) -> Result<Vec<ProfilePoint>> {
    check_increasing(t_grid)?;
    Ok(t_grid
        .par_iter()
        .enumerate()
        .map(|(i, &t)| estimate_at(f, t, method, radii, opts, i as u32 * TASKS_PER_LEVEL))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzVerdict {
    ConsistentWithLocallyLipschitz,
    DiscontinuityDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalModulus {
    pub lo: f64,
    pub hi: f64,
    /// `None` when no cell of the subinterval had two estimates.
    pub max_modulus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub t_location: f64,
    pub jump_size: f64,
    /// Grid cells `(t_i, t_{i+1})` the jump was found in.
    pub cells: Vec<(f64, f64)>,
    /// Interval the jump was localized to after refinement.
    pub localized: (f64, f64),
    pub nearest_kinf_candidate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub t_grid: Vec<f64>,
    pub theta: Vec<Option<DensityEstimate>>,
    /// `|theta_{i+1} - theta_i| / (t_{i+1} - t_i)`.
    pub moduli: Vec<Option<f64>>,
    pub max_modulus_per_interval: Vec<IntervalModulus>,
    pub discontinuities: Vec<Discontinuity>,
    pub jump_threshold: f64,
    pub verdict: LipschitzVerdict,
}

/// Grid moduli, per-subinterval maxima with candidate cells excised, and
/// discontinuities. A cell with `|delta theta| > jump_threshold` is split in
/// four using `refine(t, k)` (`k` numbers the evaluations); it is a
/// discontinuity when one of the four sub-cells still jumps by more than the
/// threshold.
pub fn lipschitz_report<R>(profile: &[ProfilePoint], jump_threshold: f64, candidates: &[f64], refine: R) -> Result<LipschitzReport>
where
    R: Fn(f64, usize) -> Result<f64> + Sync,
{
    if profile.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: profile.len(),
        });
    }
    let t: Vec<f64> = profile.iter().map(|p| p.t).collect();
    check_increasing(&t)?;
    if !(jump_threshold > 0.0) {
        return Err(Error::InvalidArgument("jump threshold must be positive".into()));
    }
    let theta: Vec<Option<f64>> = profile.iter().map(|p| p.theta()).collect();
    let cells = t.len() - 1;
    let moduli: Vec<Option<f64>> = (0..cells)
        .map(|i| match (theta[i], theta[i + 1]) {
            (Some(a), Some(b)) => Some((b - a).abs() / (t[i + 1] - t[i])),
            _ => None,
        })
        .collect();

    let excised: Vec<bool> = (0..cells)
        .map(|i| candidates.iter().any(|&c| c >= t[i] && c <= t[i + 1]))
        .collect();
    let mut max_modulus_per_interval = Vec::new();
    let mut i = 0;
    while i < cells {
        if excised[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < cells && !excised[i] {
            i += 1;
        }
        max_modulus_per_interval.push(IntervalModulus {
            lo: t[start],
            hi: t[i],
            max_modulus: moduli[start..i].iter().flatten().copied().reduce(f64::max),
        });
    }

    let flagged: Vec<usize> = (0..cells)
        .filter(|&i| matches!((theta[i], theta[i + 1]), (Some(a), Some(b)) if (b - a).abs() > jump_threshold))
        .collect();
    let refined: Vec<Option<(f64, (f64, f64))>> = flagged
        .par_iter()
        .map(|&i| {
            let h = (t[i + 1] - t[i]) / 4.0;
            let mut nodes = vec![(t[i], theta[i])];
            for k in 1..4 {
                let tk = t[i] + k as f64 * h;
                nodes.push((tk, refine(tk, 3 * i + k - 1).ok()));
            }
            nodes.push((t[i + 1], theta[i + 1]));
            let mut best: Option<(f64, (f64, f64))> = None;
            for w in nodes.windows(2) {
                let jump = match (w[0].1, w[1].1) {
                    (Some(a), Some(b)) => (b - a).abs(),
                    // an unresolved sub-cell cannot clear the jump
                    _ => f64::INFINITY,
                };
                if best.map_or(true, |(j, _)| jump > j) {
                    best = Some((jump, (w[0].0, w[1].0)));
                }
            }
            let (jump, span) = best.expect("four sub-cells");
            if jump > jump_threshold {
                let full = (theta[i + 1].unwrap() - theta[i].unwrap()).abs();
                Some((if jump.is_finite() { jump } else { full }, span))
            } else {
                None
            }
        })
        .collect();

    let nearest = |x: f64| candidates.iter().copied().min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()));
    let mut discontinuities: Vec<Discontinuity> = Vec::new();
    for (&i, r) in flagged.iter().zip(&refined) {
        let Some((jump, span)) = *r else { continue };
        if let Some(last) = discontinuities.last_mut() {
            // both neighbours of a grid point jump there: one discontinuity
            if last.localized.1 == span.0 && span.0 == t[i] {
                last.t_location = t[i];
                last.jump_size = last.jump_size.max(jump);
                last.cells.push((t[i], t[i + 1]));
                last.localized = (t[i], t[i]);
                last.nearest_kinf_candidate = nearest(t[i]);
                continue;
            }
        }
        let loc = 0.5 * (span.0 + span.1);
        discontinuities.push(Discontinuity {
            t_location: loc,
            jump_size: jump,
            cells: vec![(t[i], t[i + 1])],
            localized: span,
            nearest_kinf_candidate: nearest(loc),
        });
    }

    let verdict = if discontinuities.is_empty() {
        LipschitzVerdict::ConsistentWithLocallyLipschitz
    } else {
        LipschitzVerdict::DiscontinuityDetected
    };
    Ok(LipschitzReport {
        t_grid: t,
        theta: profile.iter().map(|p| p.estimate.clone()).collect(),
        moduli,
        max_modulus_per_interval,
        discontinuities,
        jump_threshold,
        verdict,
    })
}

/// Profile plus Lipschitz report, refining with the same estimator.
pub fn density_lipschitz(
    f: &Polynomial,
    t_grid: &[f64],
    method: DensityMethod,
    radii: &[f64],
    opts: &DensityOptions,
    jump_threshold: f64,
    candidates: &[f64],
) -> Result<LipschitzReport> {
    let profile = density_profile(f, t_grid, method, radii, opts)?;
    let base = t_grid.len() as u32;
    lipschitz_report(&profile, jump_threshold, candidates, |t, k| {
        let p = estimate_at(f, t, method, radii, opts, (base + k as u32) * TASKS_PER_LEVEL);
        match (p.estimate, p.error) {
            (Some(e), _) => Ok(e.theta),
            (None, e) => Err(Error::InvalidArgument(e.unwrap_or_default())),
        }
    })
}

/// A point `z = (t, u)` of the inverted fiber family and the tail of the
/// vector field there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RugosityField {
    pub t: f64,
    pub u: Vec<f64>,
    pub v_tail: Vec<f64>,
}

/// `z = (f(x), phi(x))` and `v_tail = d_x phi (grad f / |grad f|^2)`.
pub fn rugosity_field(f: &Polynomial, x: &[f64]) -> Result<RugosityField> {
    if x.len() != f.nvars() {
        return Err(Error::DimensionMismatch {
            expected: f.nvars(),
            got: x.len(),
        });
    }
    rugosity_field_diff(&DiffPoly::new(f.clone()), x)
}

pub fn rugosity_field_diff(df: &DiffPoly, x: &[f64]) -> Result<RugosityField> {
    let g = df.gradient_at(x);
    let g2 = dot(&g, &g);
    if g2 == 0.0 {
        return Err(Error::VanishingGradient);
    }
    let w: Vec<f64> = g.iter().map(|v| v / g2).collect();
    Ok(RugosityField {
        t: df.value(x),
        u: invert(x)?,
        v_tail: apply_inversion_jacobian(x, &w)?,
    })
}

/// `|v(z) - v(y)| / |z - y|` for `y = (t_y, 0)`; `v(y) = (1, 0)`.
pub fn rugosity_ratio(field: &RugosityField, t_y: f64) -> (f64, f64) {
    let du = dot(&field.u, &field.u);
    let dist = ((field.t - t_y).powi(2) + du).sqrt();
    (norm(&field.v_tail) / dist, dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub r: f64,
    pub x: Vec<f64>,
    pub t_z: f64,
    pub u: Vec<f64>,
    pub t_y: f64,
    pub v_tail_norm: f64,
    pub distance: f64,
    pub ratio: f64,
    /// `z` is a refined local minimum of `nu` on its circle rather than a
    /// point of a uniformly drawn level.
    pub refined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusMax {
    pub r: f64,
    pub max_ratio: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RugosityReport {
    pub interval: (f64, f64),
    pub pair_samples: Vec<PairSample>,
    pub max_ratio: f64,
    /// 95th percentile of the ratios.
    pub fitted_c: f64,
    /// Every ratio is at most `1.2 fitted_c`.
    pub compliant: bool,
    pub per_radius_max: Vec<RadiusMax>,
    /// Radii skipped because they do not exceed the `eps1` envelope.
    pub skipped_radii: Vec<f64>,
}

impl RugosityReport {
    /// Whether the per-radius maximum never grows by more than `slack`
    /// (relative) from one radius to the next, starting at `r0`.
    pub fn nonincreasing_beyond(&self, r0: f64, slack: f64) -> bool {
        let tail: Vec<&RadiusMax> = self.per_radius_max.iter().filter(|m| m.r >= r0).collect();
        tail.windows(2).all(|w| w[1].max_ratio <= w[0].max_ratio * (1.0 + slack))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RugosityOptions {
    pub pairs_per_radius: usize,
    /// Minimum distance between the interval and any candidate.
    pub margin: f64,
    pub scan: ScanConfig,
    pub critical: CriticalSearch,
    pub seed: u64,
}

impl Default for RugosityOptions {
    fn default() -> Self {
        Self {
            pairs_per_radius: 128,
            margin: 0.2,
            scan: ScanConfig::default(),
            critical: CriticalSearch::default(),
            seed: 0,
        }
    }
}

/// Samples pairs `(z, y)` for a planar polynomial and the interval
/// `(a, b)`: levels stratified over the interval, fiber points on the
/// scheduled circles beyond `eps1 = 1.1 sigma1`, each `z` paired with its
/// foot `(t_z, 0)` and with `(t_y, 0)` for a uniform `t_y`. The local minima
/// of `nu` on each circle whose level falls in the interval are added as
/// well: the largest ratios sit there, on arcs too thin for level sampling
/// to hit. No candidate check; see [`rugosity_check`].
pub fn rugosity_sample(f: &Polynomial, interval: (f64, f64), radii: &[f64], opts: &RugosityOptions) -> Result<RugosityReport> {
    let (a, b) = interval;
    if f.nvars() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: f.nvars(),
        });
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid interval ({a}, {b})")));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidArgument("radii must be positive and increasing".into()));
    }
    if opts.pairs_per_radius == 0 {
        return Err(Error::InvalidArgument("need at least one pair per radius".into()));
    }
    let df = DiffPoly::new(f.clone());
    let crit = critical_points(f, &opts.critical)?;
    let eps1 = |t: f64| 1.1 * sigma1_from_critical(f, &crit, t, 1e-9);
    let m = opts.pairs_per_radius;

    let per_radius: Vec<(f64, Option<Vec<PairSample>>)> = radii
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let mut rng = StreamId::new(opts.seed, stage::RUGOSITY, j as u32).rng();
            let mut out = Vec::with_capacity(2 * m);
            let mut beyond = false;
            for k in 0..m {
                let t_z = a + (b - a) * (k as f64 + rng.gen::<f64>()) / m as f64;
                let t_y = a + (b - a) * rng.gen::<f64>();
                if r <= eps1(t_z) {
                    continue;
                }
                beyond = true;
                let set = circle_fiber_points_diff(&df, t_z, r, &opts.scan)?;
                if set.points.is_empty() {
                    continue;
                }
                let x = set.points[rng.gen_range(0..set.points.len())].x.clone();
                let field = match rugosity_field_diff(&df, &x) {
                    Ok(v) => v,
                    Err(Error::VanishingGradient) => continue,
                    Err(e) => return Err(e),
                };
                push_pairs(&mut out, r, x, field, t_y, false);
            }
            let scan = RabierScanConfig {
                resolution: opts.scan.resolution,
                ..RabierScanConfig::default()
            };
            let minima = rabier_scan_diff(&df, r, &scan, StreamId::new(opts.seed, stage::RUGOSITY, j as u32))?;
            for q in minima.pairs.into_iter().filter(|q| q.refined && q.f_value > a && q.f_value < b && r > eps1(q.f_value)) {
                beyond = true;
                let field = match rugosity_field_diff(&df, &q.x) {
                    Ok(v) => v,
                    Err(Error::VanishingGradient) => continue,
                    Err(e) => return Err(e),
                };
                let t_y = a + (b - a) * rng.gen::<f64>();
                push_pairs(&mut out, r, q.x, field, t_y, true);
            }
            Ok((r, beyond.then_some(out)))
        })
        .collect::<Result<_>>()?;

    let mut pair_samples = Vec::new();
    let mut per_radius_max = Vec::new();
    let mut skipped_radii = Vec::new();
    for (r, samples) in per_radius {
        match samples {
            None => skipped_radii.push(r),
            Some(s) => {
                if let Some(mx) = s.iter().map(|p| p.ratio).reduce(f64::max) {
                    per_radius_max.push(RadiusMax {
                        r,
                        max_ratio: mx,
                        pairs: s.len(),
                    });
                }
                pair_samples.extend(s);
            }
        }
    }
    if pair_samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut ratios: Vec<f64> = pair_samples.iter().map(|p| p.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let max_ratio = *ratios.last().unwrap();
    let fitted_c = sorted_quantile(&ratios, 0.95);
    Ok(RugosityReport {
        interval,
        compliant: max_ratio <= 1.2 * fitted_c,
        pair_samples,
        max_ratio,
        fitted_c,
        per_radius_max,
        skipped_radii,
    })
}

fn push_pairs(out: &mut Vec<PairSample>, r: f64, x: Vec<f64>, field: RugosityField, t_y: f64, refined: bool) {
    let v_tail_norm = norm(&field.v_tail);
    for ty in [field.t, t_y] {
        let (ratio, distance) = rugosity_ratio(&field, ty);
        out.push(PairSample {
            r,
            x: x.clone(),
            t_z: field.t,
            u: field.u.clone(),
            t_y: ty,
            v_tail_norm,
            distance,
            ratio,
            refined,
        });
    }
}

/// [`rugosity_sample`] after refusing intervals within `margin` of a
/// candidate. The refusal still carries the per-radius maxima.
pub fn rugosity_check(
    f: &Polynomial,
    interval: (f64, f64),
    candidates: &[f64],
    radii: &[f64],
    opts: &RugosityOptions,
) -> Result<RugosityReport> {
    let (a, b) = interval;
    let near = candidates
        .iter()
        .copied()
        .filter(|&c| c > a - opts.margin && c < b + opts.margin)
        .min_by(|x, y| {
            let d = |c: f64| (a - c).max(c - b).max(0.0);
            d(*x).total_cmp(&d(*y))
        });
    if let Some(candidate) = near {
        let per_radius_max = rugosity_sample(f, interval, radii, opts)
            .map(|r| r.per_radius_max.iter().map(|m| (m.r, m.max_ratio)).collect())
            .unwrap_or_default();
        return Err(Error::IntervalNearCandidate {
            a,
            b,
            candidate,
            margin: opts.margin,
            per_radius_max,
        });
    }
    rugosity_sample(f, interval, radii, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::geometric_radii;
    use crate::geometry::tangent_projection_norm;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s, 2).unwrap()
    }

    fn counts(f: &str, grid: &[f64]) -> Vec<ProfilePoint> {
        density_profile(&p(f), grid, DensityMethod::SphereCount, &geometric_radii(8.0, 6), &DensityOptions::default()).unwrap()
    }

    #[test]
    fn profile_examples() {
        for q in counts("x*y", &[0.5, 1.0, 1.5, 2.0]) {
            assert_eq!(q.theta(), Some(2.0));
        }
        for q in counts("x", &[-1.0, 0.0, 1.0]) {
            assert_eq!(q.theta(), Some(1.0));
        }
        let grid: Vec<f64> = (-4..=4).map(|k| 0.05 * k as f64).collect();
        for q in counts("x + x^2*y", &grid) {
            let want = if q.t == 0.0 { 3.0 } else { 2.0 };
            assert_eq!(q.theta(), Some(want), "t = {}", q.t);
        }
        for q in counts("x^2 + y^2", &[0.5, 1.0]) {
            assert_eq!(q.theta(), Some(0.0));
        }
        assert!(density_profile(&p("x"), &[1.0, 0.0], DensityMethod::SphereCount, &[8.0], &DensityOptions::default()).is_err());
    }

    #[test]
    fn failed_levels_are_flagged() {
        // two radii cannot be extrapolated
        let prof = density_profile(&p("x"), &[0.0, 1.0], DensityMethod::SphereCount, &[8.0, 16.0], &DensityOptions::default()).unwrap();
        assert!(prof.iter().all(|q| q.estimate.is_none() && q.error.is_some()));
    }

    fn constant_profile(n: usize, v: f64) -> Vec<ProfilePoint> {
        (0..n)
            .map(|i| ProfilePoint {
                t: i as f64,
                curve: None,
                estimate: Some(DensityEstimate {
                    theta: v,
                    c: 0.0,
                    alpha: None,
                    fit_residual: 0.0,
                    n_points_used: 3,
                    uncertainty: 0.0,
                    status: crate::density::FitStatus::Exact,
                    plausible: true,
                }),
                error: None,
            })
            .collect()
    }

    #[test]
    fn constant_profile_is_lipschitz() {
        let rep = lipschitz_report(&constant_profile(5, 2.0), 0.5, &[], |_, _| Ok(2.0)).unwrap();
        assert_eq!(rep.moduli.len(), 4);
        assert!(rep.moduli.iter().all(|m| *m == Some(0.0)));
        assert!(rep.discontinuities.is_empty());
        assert_eq!(rep.verdict, LipschitzVerdict::ConsistentWithLocallyLipschitz);
        assert_eq!(rep.max_modulus_per_interval.len(), 1);
        assert!(lipschitz_report(&constant_profile(2, 2.0), 0.5, &[], |_, _| Ok(2.0)).is_err());
    }

    #[test]
    fn steep_ramp_resolves_under_refinement() {
        // theta(t) = t on a coarse grid: every cell jumps by 1, sub-cells by 1/4
        let mut prof = constant_profile(4, 0.0);
        for q in &mut prof {
            q.estimate.as_mut().unwrap().theta = q.t;
        }
        let rep = lipschitz_report(&prof, 0.5, &[], |t, _| Ok(t)).unwrap();
        assert!(rep.discontinuities.is_empty());
        // a genuine step at 1.3 stays
        for q in &mut prof {
            q.estimate.as_mut().unwrap().theta = if q.t < 1.3 { 0.0 } else { 1.0 };
        }
        let rep = lipschitz_report(&prof, 0.5, &[1.3], |t, _| Ok(if t < 1.3 { 0.0 } else { 1.0 })).unwrap();
        assert_eq!(rep.discontinuities.len(), 1);
        let d = &rep.discontinuities[0];
        assert!(d.localized.0 < 1.3 && d.localized.1 > 1.3);
        assert_eq!(d.nearest_kinf_candidate, Some(1.3));
        // cell (1, 2) excised: intervals [0, 1] and [2, 3]
        assert_eq!(rep.max_modulus_per_interval.len(), 2);
        assert_eq!(rep.max_modulus_per_interval[0].hi, 1.0);
        assert_eq!(rep.max_modulus_per_interval[1].lo, 2.0);
    }

    #[test]
    fn broughton_has_one_jump_at_zero() {
        let f = p("x + x^2*y");
        let grid: Vec<f64> = (-4..=4).map(|k| 0.05 * k as f64).collect();
        let radii = geometric_radii(8.0, 6);
        let rep = density_lipschitz(&f, &grid, DensityMethod::SphereCount, &radii, &DensityOptions::default(), 0.5, &[0.0]).unwrap();
        assert_eq!(rep.discontinuities.len(), 1, "{:?}", rep.discontinuities);
        let d = &rep.discontinuities[0];
        assert_eq!(d.t_location, 0.0);
        assert!((d.jump_size - 1.0).abs() < 0.05);
        assert_eq!(d.nearest_kinf_candidate, Some(0.0));
        assert_eq!(rep.verdict, LipschitzVerdict::DiscontinuityDetected);
        for iv in &rep.max_modulus_per_interval {
            assert_eq!(iv.max_modulus, Some(0.0));
        }
    }

    #[test]
    fn hyperbola_moduli_vanish() {
        let f = p("x*y");
        let grid = [0.5, 1.0, 1.5, 2.0];
        let rep = density_lipschitz(&f, &grid, DensityMethod::SphereCount, &geometric_radii(8.0, 6), &DensityOptions::default(), 0.5, &[]).unwrap();
        assert!(rep.moduli.iter().all(|m| *m == Some(0.0)));
        assert!(rep.discontinuities.is_empty());
    }

    #[test]
    fn rugosity_field_examples() {
        let z = rugosity_field(&p("x"), &[10.0, 0.0]).unwrap();
        assert_eq!(z.t, 10.0);
        assert!((z.u[0] - 0.1).abs() < 1e-16 && z.u[1] == 0.0);
        assert!((norm(&z.v_tail) - 0.01).abs() < 1e-16);
        let (ratio, dist) = rugosity_ratio(&z, 10.0);
        assert!((dist - 0.1).abs() < 1e-16);
        assert!((ratio - 0.1).abs() < 1e-15);
        assert!(matches!(rugosity_field(&p("x^2 + y^2"), &[0.0, 0.0]), Err(Error::VanishingGradient)));
    }

    #[test]
    fn conformal_bound_is_sharp() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for f in ["x + x^2*y", "x*y", "x^3 - y^2 + 2*x*y"] {
            let df = DiffPoly::new(p(f));
            for _ in 0..1000 {
                let x = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
                let z = rugosity_field_diff(&df, &x).unwrap();
                let prod = norm(&z.v_tail) * dot(&x, &x) * norm(&df.gradient_at(&x));
                assert!(prod <= 1.0 + 1e-12 && prod >= 1.0 - 1e-12, "{prod}");
            }
        }
    }

    #[test]
    fn hyperbola_rugosity_decays() {
        let radii = geometric_radii(8.0, 6);
        let rep = rugosity_check(&p("x*y"), (0.5, 2.0), &[], &radii, &RugosityOptions::default()).unwrap();
        assert!(rep.fitted_c.is_finite() && rep.max_ratio.is_finite());
        assert!(rep.nonincreasing_beyond(16.0, 0.1));
        for s in &rep.pair_samples {
            assert!(s.distance >= 1.0 / norm(&s.x) * (1.0 - 1e-15));
            assert!(s.t_y >= 0.5 && s.t_y < 2.0 && s.t_z > 0.5 - 1e-9 && s.t_z < 2.0 + 1e-9);
        }
        // worst case 1/nu = 1/r^2 at the smallest radius
        assert!((rep.max_ratio - 1.0 / 64.0).abs() < 1e-9, "{}", rep.max_ratio);
    }

    #[test]
    fn broughton_rugosity_and_refusal() {
        let f = p("x + x^2*y");
        let radii = geometric_radii(8.0, 6);
        let rep = rugosity_check(&f, (0.5, 1.5), &[0.0], &radii, &RugosityOptions::default()).unwrap();
        assert!(rep.fitted_c.is_finite());
        match rugosity_check(&f, (0.001, 0.01), &[0.0], &radii, &RugosityOptions::default()) {
            Err(Error::IntervalNearCandidate { candidate, per_radius_max, .. }) => {
                assert_eq!(candidate, 0.0);
                assert_eq!(per_radius_max.len(), radii.len());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rugosity_is_deterministic() {
        let radii = geometric_radii(8.0, 3);
        let o = RugosityOptions {
            pairs_per_radius: 16,
            seed: 4,
            ..Default::default()
        };
        let a = rugosity_check(&p("x*y"), (0.5, 2.0), &[], &radii, &o).unwrap();
        let b = rugosity_check(&p("x*y"), (0.5, 2.0), &[], &radii, &o).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fiber_branches_become_radial_orthogonal() {
        for (f, t) in [("x", 0.0), ("x*y", 1.0), ("x + x^2*y", 0.0), ("x + x^2*y", 0.5)] {
            let set = crate::fiber::circle_fiber_points(&p(f), t, 1e3, &ScanConfig::default()).unwrap();
            assert!(!set.points.is_empty());
            for q in &set.points {
                let v = tangent_projection_norm(&p(f), &q.x).unwrap();
                assert!(v > 0.99, "{f} t={t} x={:?} {v}", q.x);
            }
        }
    }
}
