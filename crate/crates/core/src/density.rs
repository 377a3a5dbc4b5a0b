//! Density at infinity of a fiber, estimated three independent ways.
//!
//! * sphere counts: in the plane, half the number of points of
//!   `f^{-1}(t)` on the circle of radius `r`;
//! * coarea: Monte Carlo measure of `f^{-1}(t)` inside a sphere or ball,
//!   from a thin slab `|f - t| < δ` weighted by the gradient norm;
//! * inversion: the density at the origin of the zero set of `G_t`, the
//!   polynomial image of the fiber under `x -> x/|x|^2`.
//!
//! Each produces a [`DensityCurve`] over a radius schedule;
//! [`extrapolate_limit`] turns a curve into a limit estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::fiber::{circle_fiber_points_diff, slab_sample_diff, ScanConfig, SlabMode};
use crate::geometry::{ball_volume, dot, invert_fiber_polynomial, norm, sphere_point, sphere_volume};
use crate::numerics::{golden_min, sorted_quantile};
use crate::poly::{DiffPoly, Polynomial};
use crate::rng::{stage, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    SphereCount,
    SphereCoarea,
    BallCoarea,
    Inversion,
}

impl DensityMethod {
    pub fn name(self) -> &'static str {
        match self {
            DensityMethod::SphereCount => "sphere_count",
            DensityMethod::SphereCoarea => "sphere_coarea",
            DensityMethod::BallCoarea => "ball_coarea",
            DensityMethod::Inversion => "inversion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub t: f64,
    pub method: DensityMethod,
    pub samples: Vec<CurveSample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DensityCurve {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// The two widest reliable samples agree exactly.
    Exact,
    /// Noisy samples consistent with a constant.
    Constant,
    /// `theta + c r^(-alpha)` fitted.
    PowerLaw,
    /// Tail oscillates beyond its error bars; widest value returned.
    NoisyTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub theta: f64,
    pub c: f64,
    /// Decay exponent; `None` when the limit is reached exactly.
    pub alpha: Option<f64>,
    pub fit_residual: f64,
    pub n_points_used: usize,
    pub uncertainty: f64,
    pub status: FitStatus,
    /// `theta` lies within the last two samples widened by three standard
    /// errors and the geometric tail implied by their differences.
    pub plausible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoareaEstimate {
    pub value: f64,
    pub stderr: f64,
    pub retained: usize,
    pub delta: f64,
}

/// Budget and tuning for the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub scan: ScanConfig,
    /// Monte Carlo draws per coarea estimate.
    pub draws: usize,
    /// Starting slab half-width; `None` means `0.05 (1 + |t|)`.
    pub delta0: Option<f64>,
    /// The slab is widened until at least this many draws are retained.
    pub min_retained: usize,
    pub seed: u64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            scan: ScanConfig::default(),
            draws: 200_000,
            delta0: None,
            min_retained: 1000,
            seed: 0,
        }
    }
}

/// Geometric radius schedule `r0 2^j`, `j = 0..count`.
pub fn geometric_radii(r0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| r0 * 2f64.powi(j as i32)).collect()
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be strictly increasing".into()));
    }
    Ok(())
}

fn require_planar(f: &Polynomial) -> Result<()> {
    if f.nvars() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: f.nvars(),
        });
    }
    Ok(())
}

/// Half the number of points of `f^{-1}(t)` on each circle.
pub fn sphere_count_density(f: &Polynomial, t: f64, radii: &[f64], scan: &ScanConfig) -> Result<DensityCurve> {
    require_planar(f)?;
    check_radii(radii)?;
    let df = DiffPoly::new(f.clone());
    let samples = radii
        .par_iter()
        .map(|&r| {
            let set = circle_fiber_points_diff(&df, t, r, scan)?;
            Ok(CurveSample {
                r,
                value: set.count() as f64 / 2.0,
                stderr: 0.0,
                reliable: set.complete,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityCurve {
        t,
        method: DensityMethod::SphereCount,
        samples,
        warnings: Vec::new(),
    })
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    (mean, (var / nf).sqrt())
}

fn coarea_once(df: &DiffPoly, t: f64, r: f64, delta: f64, draws: usize, stream: StreamId, mode: SlabMode) -> Result<CoareaEstimate> {
    let n = df.nvars();
    let slab = slab_sample_diff(df, t, r, delta, draws, stream, mode)?;
    if slab.draws.is_empty() {
        return Err(Error::Starved { delta });
    }
    let (domain, reference) = match mode {
        SlabMode::Sphere => (sphere_volume(n - 1, r), sphere_volume(n - 2, r)),
        SlabMode::Ball => (ball_volume(n, r), ball_volume(n - 1, r)),
    };
    let scale = domain / (2.0 * delta) / reference;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for d in &slab.draws {
        let w = match mode {
            SlabMode::Sphere => d.tangential_grad_norm,
            SlabMode::Ball => d.grad_norm,
        };
        let y = scale * w;
        sum += y;
        sum_sq += y * y;
    }
    let (value, stderr) = mean_and_stderr(sum, sum_sq, slab.n_total);
    Ok(CoareaEstimate {
        value,
        stderr,
        retained: slab.draws.len(),
        delta,
    })
}

/// Coarea estimate of `vol_{n-2}(f^{-1}(t) ∩ S_r) / vol_{n-2}(S^{n-2}_r)`
/// with a fixed slab half-width `delta`.
pub fn sphere_coarea_density(f: &Polynomial, t: f64, r: f64, delta: f64, draws: usize, stream: StreamId) -> Result<CoareaEstimate> {
    coarea_once(&DiffPoly::new(f.clone()), t, r, delta, draws, stream, SlabMode::Sphere)
}

/// Coarea estimate of `vol_{n-1}(f^{-1}(t) ∩ B_r) / vol_{n-1}(B^{n-1}_r)`
/// with a fixed slab half-width `delta`.
pub fn ball_coarea_density(f: &Polynomial, t: f64, r: f64, delta: f64, draws: usize, stream: StreamId) -> Result<CoareaEstimate> {
    coarea_once(&DiffPoly::new(f.clone()), t, r, delta, draws, stream, SlabMode::Ball)
}

/// Runs the coarea estimator with the slab schedule: start at `delta0` and
/// double until `min_retained` draws land in the slab.
fn coarea_adaptive(df: &DiffPoly, t: f64, r: f64, opts: &DensityOptions, stream: StreamId, mode: SlabMode) -> Result<CoareaEstimate> {
    let mut delta = opts.delta0.unwrap_or(0.05 * (1.0 + t.abs()));
    let mut last = None;
    for _ in 0..60 {
        match coarea_once(df, t, r, delta, opts.draws, stream, mode) {
            Ok(est) if est.retained >= opts.min_retained.min(opts.draws) => return Ok(est),
            Ok(est) => last = Some(est),
            Err(Error::Starved { .. }) => {}
            Err(e) => return Err(e),
        }
        delta *= 2.0;
    }
    last.ok_or(Error::Starved { delta })
}

/// Coarea curve over a radius schedule; one random stream per radius,
/// `task_base + index`.
pub fn coarea_curve(
    f: &Polynomial,
    t: f64,
    radii: &[f64],
    mode: SlabMode,
    opts: &DensityOptions,
    task_base: u32,
) -> Result<DensityCurve> {
    check_radii(radii)?;
    if f.nvars() < 2 {
        return Err(Error::InvalidArgument("coarea needs n >= 2".into()));
    }
    let df = DiffPoly::new(f.clone());
    let (st, method) = match mode {
        SlabMode::Sphere => (stage::SPHERE_COAREA, DensityMethod::SphereCoarea),
        SlabMode::Ball => (stage::BALL_COAREA, DensityMethod::BallCoarea),
    };
    let samples = radii
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let stream = StreamId::new(opts.seed, st, task_base + j as u32);
            let est = coarea_adaptive(&df, t, r, opts, stream, mode)?;
            Ok(CurveSample {
                r,
                value: est.value,
                stderr: est.stderr,
                reliable: est.retained >= opts.min_retained.min(opts.draws),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityCurve {
        t,
        method,
        samples,
        warnings: Vec::new(),
    })
}

/// Coarea estimate at level 0 of `g` on the sphere of radius `rho`, with the
/// slab half-width set to the `fraction` quantile of `|g|` over the draws.
/// Scale-free in `g`, which matters for the inverted fiber polynomial whose
/// values shrink like a power of `rho`.
fn quantile_coarea(dg: &DiffPoly, rho: f64, draws: usize, fraction: f64, stream: StreamId) -> Result<CoareaEstimate> {
    let n = dg.nvars();
    let mut rng = stream.rng();
    let pts: Vec<Vec<f64>> = (0..draws).map(|_| sphere_point(&mut rng, n, rho)).collect();
    let vals: Vec<f64> = pts.iter().map(|x| dg.value(x)).collect();
    let mut abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let delta = sorted_quantile(&abs, fraction);
    if !(delta > 0.0) {
        return Err(Error::Starved { delta });
    }
    let scale = sphere_volume(n - 1, rho) / (2.0 * delta) / sphere_volume(n - 2, rho);
    let (mut sum, mut sum_sq, mut retained) = (0.0, 0.0, 0usize);
    for (x, v) in pts.iter().zip(&vals) {
        if v.abs() >= delta {
            continue;
        }
        let g = dg.gradient_at(x);
        let radial = dot(&g, x) / rho;
        let tan: Vec<f64> = g.iter().zip(x).map(|(gi, xi)| gi - radial * xi / rho).collect();
        let y = scale * norm(&tan);
        sum += y;
        sum_sq += y * y;
        retained += 1;
    }
    if retained == 0 {
        return Err(Error::Starved { delta });
    }
    let (value, stderr) = mean_and_stderr(sum, sum_sq, draws);
    Ok(CoareaEstimate {
        value,
        stderr,
        retained,
        delta,
    })
}

/// Density at the origin of `{g = 0}` sampled on spheres of radius `rho`
/// (decreasing toward 0). Planar `g` is scanned exactly; otherwise the
/// coarea estimator runs at level 0.
pub fn density_at_origin(g: &Polynomial, rhos: &[f64], opts: &DensityOptions) -> Result<DensityCurve> {
    density_at_origin_tasks(g, rhos, opts, 0)
}

fn density_at_origin_tasks(g: &Polynomial, rhos: &[f64], opts: &DensityOptions, task_base: u32) -> Result<DensityCurve> {
    if rhos.is_empty() || rhos.iter().any(|r| !(*r > 0.0)) || rhos.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("rhos must be positive and strictly decreasing".into()));
    }
    let mut warnings = Vec::new();
    let g0 = g.eval(&vec![0.0; g.nvars()])?;
    if g0 != 0.0 {
        warnings.push(format!(
            "g(0) = {g0:e}: the origin is not on the zero set, density is 0"
        ));
    }
    let dg = DiffPoly::new(g.clone());
    let samples = if g.nvars() == 2 {
        rhos.par_iter()
            .map(|&rho| {
                let set = circle_fiber_points_diff(&dg, 0.0, rho, &opts.scan)?;
                Ok(CurveSample {
                    r: rho,
                    value: set.count() as f64 / 2.0,
                    stderr: 0.0,
                    reliable: set.complete,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let fraction = (opts.min_retained as f64 * 2.0 / opts.draws as f64).clamp(1e-3, 0.05);
        rhos.par_iter()
            .enumerate()
            .map(|(j, &rho)| {
                let stream = StreamId::new(opts.seed, stage::INVERSION_COAREA, task_base + j as u32);
                let est = quantile_coarea(&dg, rho, opts.draws, fraction, stream)?;
                Ok(CurveSample {
                    r: rho,
                    value: est.value,
                    stderr: est.stderr,
                    reliable: est.retained >= opts.min_retained.min(opts.draws),
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(DensityCurve {
        t: 0.0,
        method: DensityMethod::Inversion,
        samples,
        warnings,
    })
}

/// Density at infinity of `f^{-1}(t)` computed at the origin of the inverted
/// fiber `{G_t = 0}`, sampled at `rho = 1/r` and reported against `r`.
pub fn inversion_density(f: &Polynomial, t: f64, radii: &[f64], opts: &DensityOptions) -> Result<DensityCurve> {
    inversion_density_tasks(f, t, radii, opts, 0)
}

pub(crate) fn inversion_density_tasks(
    f: &Polynomial,
    t: f64,
    radii: &[f64],
    opts: &DensityOptions,
    task_base: u32,
) -> Result<DensityCurve> {
    check_radii(radii)?;
    let g = invert_fiber_polynomial(f, t)?;
    let rhos: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let at_origin = density_at_origin_tasks(&g, &rhos, opts, task_base)?;
    let samples = at_origin
        .samples
        .into_iter()
        .zip(radii)
        .map(|(s, &r)| CurveSample { r, ..s })
        .collect();
    Ok(DensityCurve {
        t,
        method: DensityMethod::Inversion,
        samples,
        warnings: at_origin.warnings,
    })
}

/// Any of the four estimators over a radius schedule.
pub fn density_curve(f: &Polynomial, t: f64, method: DensityMethod, radii: &[f64], opts: &DensityOptions, task_base: u32) -> Result<DensityCurve> {
    match method {
        DensityMethod::SphereCount => sphere_count_density(f, t, radii, &opts.scan),
        DensityMethod::SphereCoarea => coarea_curve(f, t, radii, SlabMode::Sphere, opts, task_base),
        DensityMethod::BallCoarea => coarea_curve(f, t, radii, SlabMode::Ball, opts, task_base),
        DensityMethod::Inversion => inversion_density_tasks(f, t, radii, opts, task_base),
    }
}

/// Weighted least squares of `v ≈ theta + c r^(-alpha)` for fixed `alpha`.
/// Returns `(theta, c, ssr)`.
fn fit_fixed_alpha(r: &[f64], v: &[f64], w: &[f64], alpha: f64) -> (f64, f64, f64) {
    let b: Vec<f64> = r.iter().map(|ri| ri.powf(-alpha)).collect();
    let (mut sw, mut sb, mut sbb, mut sv, mut sbv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..r.len() {
        sw += w[i];
        sb += w[i] * b[i];
        sbb += w[i] * b[i] * b[i];
        sv += w[i] * v[i];
        sbv += w[i] * b[i] * v[i];
    }
    let det = sw * sbb - sb * sb;
    let (theta, c) = if det.abs() <= 1e-300 {
        (sv / sw, 0.0)
    } else {
        ((sbb * sv - sb * sbv) / det, (sw * sbv - sb * sv) / det)
    };
    let ssr = (0..r.len())
        .map(|i| w[i] * (v[i] - theta - c * b[i]).powi(2))
        .sum();
    (theta, c, ssr)
}

/// Significance level below which a constant model is rejected.
const CONSTANT_REJECT_P: f64 = 1e-3;

/// Largest chi-square with `dof` degrees of freedom still consistent with a
/// constant at level [`CONSTANT_REJECT_P`].
fn constant_cutoff(dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .map(|d| d.inverse_cdf(1.0 - CONSTANT_REJECT_P))
        .unwrap_or(f64::INFINITY)
}

const ALPHA_MIN: f64 = 0.02;
const ALPHA_MAX: f64 = 8.0;

/// Limit of a density curve as the radius grows.
///
/// Uses the reliable samples only. Exact agreement of the two widest samples
/// (count-based curves) is returned as is; otherwise a constant is tried when
/// the samples carry error bars, and finally `theta + c r^(-alpha)` is fitted
/// by variable projection over `alpha`.
pub fn extrapolate_limit(curve: &DensityCurve) -> Result<DensityEstimate> {
    let mut pts: Vec<&CurveSample> = curve.samples.iter().filter(|s| s.reliable).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: pts.len(),
        });
    }
    pts.sort_by(|a, b| a.r.total_cmp(&b.r));
    let n = pts.len();
    let r: Vec<f64> = pts.iter().map(|s| s.r).collect();
    let v: Vec<f64> = pts.iter().map(|s| s.value).collect();
    let se: Vec<f64> = pts.iter().map(|s| s.stderr).collect();
    let max_se = se.iter().fold(0.0f64, |a, b| a.max(*b));

    let (last, prev) = (v[n - 1], v[n - 2]);
    if last == prev {
        return Ok(DensityEstimate {
            theta: last,
            c: 0.0,
            alpha: None,
            fit_residual: 0.0,
            n_points_used: n,
            uncertainty: se[n - 1].max(se[n - 2]),
            status: FitStatus::Exact,
            plausible: true,
        });
    }

    let diffs: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let noisy = diffs.windows(2).any(|d| d[0] * d[1] < 0.0)
        && diffs
            .iter()
            .zip(se.windows(2))
            .any(|(d, s)| d.abs() > 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt());
    if noisy {
        let spread = diffs.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        return Ok(DensityEstimate {
            theta: last,
            c: 0.0,
            alpha: None,
            fit_residual: v.iter().map(|x| (x - last) * (x - last)).sum(),
            n_points_used: n,
            uncertainty: spread.max(3.0 * max_se),
            status: FitStatus::NoisyTail,
            plausible: false,
        });
    }

    let weighted = se.iter().all(|s| *s > 0.0);
    let w: Vec<f64> = if weighted {
        se.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; n]
    };

    if weighted {
        let sw: f64 = w.iter().sum();
        let mean = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / sw;
        let chi2: f64 = w.iter().zip(&v).map(|(a, b)| a * (b - mean).powi(2)).sum();
        if chi2 <= constant_cutoff(n - 1) {
            return Ok(DensityEstimate {
                theta: mean,
                c: 0.0,
                alpha: None,
                fit_residual: chi2,
                n_points_used: n,
                uncertainty: 1.0 / sw.sqrt(),
                status: FitStatus::Constant,
                plausible: true,
            });
        }
    }

    // grid in log(alpha), then golden refinement around the best cell
    let grid = 200;
    let la = |k: usize| ALPHA_MIN.ln() + (ALPHA_MAX.ln() - ALPHA_MIN.ln()) * k as f64 / grid as f64;
    let ssr_at = |log_alpha: f64| fit_fixed_alpha(&r, &v, &w, log_alpha.exp()).2;
    let best_k = (0..=grid)
        .min_by(|&a, &b| ssr_at(la(a)).total_cmp(&ssr_at(la(b))))
        .unwrap_or(0);
    let lo = la(best_k.saturating_sub(1));
    let hi = la((best_k + 1).min(grid));
    let (log_alpha, _) = golden_min(&ssr_at, lo, hi, 1e-13);
    let alpha = log_alpha.exp();
    let (theta, c, ssr) = fit_fixed_alpha(&r, &v, &w, alpha);

    // geometric tail beyond the widest sample implied by the last differences
    let d_last = diffs[n - 2];
    let d_prev = diffs[n - 3];
    let q = if d_prev != 0.0 { (d_last / d_prev).abs() } else { f64::INFINITY };
    let tail = if q < 1.0 { d_last.abs() * q / (1.0 - q) } else { f64::INFINITY };
    let slack = 3.0 * max_se + tail + 1e-9 * (1.0 + last.abs());
    let plausible = theta >= last.min(prev) - slack && theta <= last.max(prev) + slack;
    let at_boundary = alpha <= ALPHA_MIN * 1.0001;

    Ok(DensityEstimate {
        theta,
        c,
        alpha: Some(alpha),
        fit_residual: ssr,
        n_points_used: n,
        uncertainty: (3.0 * max_se).max(if tail.is_finite() { tail } else { (last - prev).abs() }),
        status: FitStatus::PowerLaw,
        plausible: plausible && !at_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> Polynomial {
        Polynomial::parse(s, n).unwrap()
    }

    fn counts(f: &str, t: f64, radii: &[f64]) -> Vec<f64> {
        sphere_count_density(&p(f, 2), t, radii, &ScanConfig::default())
            .unwrap()
            .values()
    }

    #[test]
    fn sphere_count_examples() {
        assert_eq!(counts("x", 0.0, &[10.0, 100.0, 1000.0]), vec![1.0; 3]);
        assert_eq!(counts("x*y", 1.0, &[10.0, 100.0]), vec![2.0; 2]);
        assert_eq!(counts("x + x^2*y", 0.0, &[50.0, 500.0]), vec![3.0; 2]);
        assert!(matches!(
            sphere_count_density(&p("x", 3), 0.0, &[1.0], &ScanConfig::default()),
            Err(Error::WrongDimension { .. })
        ));
    }

    #[test]
    fn inversion_matches_counts() {
        let opts = DensityOptions::default();
        for (f, t) in [("x", 0.0), ("x*y", 1.0), ("x + x^2*y", 0.0), ("x + x^2*y", 0.5)] {
            let radii = geometric_radii(8.0, 6);
            let a = sphere_count_density(&p(f, 2), t, &radii, &opts.scan).unwrap();
            let b = inversion_density(&p(f, 2), t, &radii, &opts).unwrap();
            assert_eq!(a.values(), b.values(), "{f} at t = {t}");
        }
    }

    #[test]
    fn density_at_origin_examples() {
        let opts = DensityOptions::default();
        let c = density_at_origin(&p("x", 2), &[0.1, 0.01], &opts).unwrap();
        assert_eq!(c.values(), vec![1.0, 1.0]);
        let c = density_at_origin(&p("x*y - (x^2+y^2)^2", 2), &[0.01], &opts).unwrap();
        assert_eq!(c.values(), vec![2.0]);
        let c = density_at_origin(&p("x*(x^2+y^2)^2 + x^2*y", 2), &[0.01], &opts).unwrap();
        assert_eq!(c.values(), vec![3.0]);
        let c = density_at_origin(&p("x^2 + y^2 + 1", 2), &[0.1], &opts).unwrap();
        assert_eq!(c.values(), vec![0.0]);
        assert_eq!(c.warnings.len(), 1);
        assert!(density_at_origin(&p("x", 2), &[0.01, 0.1], &opts).is_err());
    }

    #[test]
    fn sphere_coarea_great_circle() {
        let f = p("x", 3);
        let est = sphere_coarea_density(&f, 0.0, 10.0, 0.05, 1_000_000, StreamId::new(1, 2, 0)).unwrap();
        assert!((est.value - 1.0).abs() <= 3.0 * est.stderr, "{est:?}");
        assert!(est.stderr < 0.05);
    }

    #[test]
    fn sphere_coarea_stderr_scaling() {
        let f = p("x", 3);
        let a = sphere_coarea_density(&f, 0.0, 10.0, 0.05, 200_000, StreamId::new(1, 2, 0)).unwrap();
        let b = sphere_coarea_density(&f, 0.0, 10.0, 0.05, 400_000, StreamId::new(1, 2, 0)).unwrap();
        let ratio = b.stderr / a.stderr;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn ball_coarea_examples() {
        let est = ball_coarea_density(&p("x", 2), 0.0, 1.0, 0.01, 400_000, StreamId::new(3, 3, 0)).unwrap();
        assert!((est.value - 1.0).abs() <= 3.0 * est.stderr, "{est:?}");
        let est = ball_coarea_density(&p("x*y", 2), 0.0, 10.0, 0.05, 400_000, StreamId::new(3, 3, 1)).unwrap();
        assert!((est.value - 2.0).abs() <= 3.0 * est.stderr, "{est:?}");
        let half = ball_coarea_density(&p("x*y", 2), 0.0, 10.0, 0.025, 400_000, StreamId::new(3, 3, 2)).unwrap();
        let combined = (est.stderr.powi(2) + half.stderr.powi(2)).sqrt();
        assert!((est.value - half.value).abs() <= 3.0 * combined);
        assert!(matches!(
            ball_coarea_density(&p("x^2 + y^2", 2), -5.0, 1.0, 0.01, 1000, StreamId::new(3, 3, 3)),
            Err(Error::Starved { .. })
        ));
    }

    fn synthetic(values: &[(f64, f64)]) -> DensityCurve {
        DensityCurve {
            t: 0.0,
            method: DensityMethod::SphereCount,
            samples: values
                .iter()
                .map(|&(r, value)| CurveSample {
                    r,
                    value,
                    stderr: 0.0,
                    reliable: true,
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn extrapolate_constant() {
        let est = extrapolate_limit(&synthetic(&[(8.0, 2.0), (16.0, 2.0), (32.0, 2.0)])).unwrap();
        assert_eq!(est.theta, 2.0);
        assert_eq!(est.fit_residual, 0.0);
        assert_eq!(est.status, FitStatus::Exact);
        assert_eq!(est.alpha, None);
    }

    #[test]
    fn extrapolate_power_tail() {
        let curve = synthetic(&[(10.0, 1.1), (100.0, 1.01), (1000.0, 1.001)]);
        let est = extrapolate_limit(&curve).unwrap();
        assert!((est.theta - 1.0).abs() < 1e-6, "{est:?}");
        assert!((est.alpha.unwrap() - 1.0).abs() < 1e-3);
        assert!(est.plausible);
        assert_eq!(est.status, FitStatus::PowerLaw);
    }

    #[test]
    fn noisy_constant_stays_constant() {
        // last sample 2.2 sigma high; a constant is still the right model
        let mut curve = synthetic(&[(16.0, 0.994), (32.0, 1.005), (64.0, 1.055)]);
        for (s, se) in curve.samples.iter_mut().zip([0.011, 0.016, 0.023]) {
            s.stderr = se;
        }
        let est = extrapolate_limit(&curve).unwrap();
        assert_eq!(est.status, FitStatus::Constant);
        assert!((est.theta - 1.0).abs() < 3.0 * est.uncertainty, "{est:?}");
        // a clear trend is not absorbed
        let mut curve = synthetic(&[(8.0, 0.5), (16.0, 0.75), (32.0, 0.875), (64.0, 0.9375)]);
        for s in curve.samples.iter_mut() {
            s.stderr = 0.005;
        }
        let est = extrapolate_limit(&curve).unwrap();
        assert_eq!(est.status, FitStatus::PowerLaw);
        assert!((est.theta - 1.0).abs() < 0.01, "{est:?}");
    }

    #[test]
    fn extrapolate_needs_three_points() {
        let curve = synthetic(&[(10.0, 1.0), (20.0, 1.0)]);
        assert!(matches!(
            extrapolate_limit(&curve),
            Err(Error::InsufficientSamples { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn extrapolate_flags_oscillation() {
        let curve = synthetic(&[(8.0, 2.0), (16.0, 3.0), (32.0, 2.0), (64.0, 3.0)]);
        let est = extrapolate_limit(&curve).unwrap();
        assert_eq!(est.status, FitStatus::NoisyTail);
        assert_eq!(est.theta, 3.0);
        assert!(!est.plausible);
    }

    #[test]
    fn bounded_fiber_has_zero_density() {
        let radii = geometric_radii(8.0, 4);
        let c = sphere_count_density(&p("x^2 + y^2", 2), 100.0, &radii, &ScanConfig::default()).unwrap();
        // the circle of radius 10 lies between r = 8 and r = 16
        assert_eq!(c.values(), vec![0.0, 0.0, 0.0, 0.0]);
        let est = extrapolate_limit(&c).unwrap();
        assert_eq!(est.theta, 0.0);
    }
}
