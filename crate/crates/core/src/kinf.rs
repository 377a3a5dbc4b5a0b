//! Detection of asymptotic critical values.
//!
//! A value `y` is an asymptotic critical value when points escaping to
//! infinity with `f -> y` can make the Rabier quantity
//! `nu(x) = |x| |grad f(x)|` tend to zero. We scan `nu` on growing spheres,
//! keep the lower envelope of `nu` per `f`-bin and flag bins whose envelope
//! decays. The module also computes the radius/gap functions `sigma1`,
//! `sigma2` and their continuous envelopes `eps1 > sigma1`, `eps2 < sigma2`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{circle_fiber_points_diff, ScanConfig};
use crate::geometry::{dot, norm, sphere_point};
use crate::numerics::{golden_min, linear_fit, solve_linear};
use crate::poly::{DiffPoly, Polynomial};
use crate::rng::{stage, StreamId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabierPair {
    pub f_value: f64,
    pub nu: f64,
    pub x: Vec<f64>,
    /// Produced by local refinement rather than the base sampling.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabierField {
    pub r: f64,
    pub pairs: Vec<RabierPair>,
}

impl RabierField {
    pub fn min_nu(&self) -> Option<&RabierPair> {
        self.pairs.iter().min_by(|a, b| a.nu.total_cmp(&b.nu))
    }
}

/// Sampling budget for [`rabier_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabierScanConfig {
    /// Angular grid size in the plane.
    pub resolution: usize,
    /// Uniform draws per sphere for `n >= 3`.
    pub draws: usize,
    /// Fraction of the lowest draws refined by descent (`n >= 3`).
    pub refine_fraction: f64,
}

impl Default for RabierScanConfig {
    fn default() -> Self {
        Self {
            resolution: 4096,
            draws: 100_000,
            refine_fraction: 1e-3,
        }
    }
}

fn pair(df: &DiffPoly, x: Vec<f64>, refined: bool) -> RabierPair {
    RabierPair {
        f_value: df.value(&x),
        nu: df.rabier(&x),
        x,
        refined,
    }
}

fn rabier_scan_planar(df: &DiffPoly, r: f64, m: usize) -> RabierField {
    let h = 2.0 * PI / m as f64;
    let at = |th: f64| [r * th.cos(), r * th.sin()];
    let nu = |th: f64| df.rabier(&at(th));
    let mut pairs: Vec<RabierPair> = (0..m).map(|j| pair(df, at(h * j as f64).to_vec(), false)).collect();
    let mut refined = Vec::new();
    for j in 0..m {
        let c = pairs[j].nu;
        let p = pairs[(j + m - 1) % m].nu;
        let n = pairs[(j + 1) % m].nu;
        if c <= p && c <= n && (c < p || c < n) {
            let th0 = h * j as f64;
            // the valley of nu can be ~1/r^4 wide; refine to floating resolution
            let (th, _) = golden_min(&nu, th0 - h, th0 + h, 0.0);
            refined.push(pair(df, at(th).to_vec(), true));
        }
    }
    pairs.extend(refined);
    RabierField { r, pairs }
}

/// Second derivatives, `hess[i][j] = d^2 f / dx_i dx_j`.
fn hessian(df: &DiffPoly) -> Vec<Vec<Polynomial>> {
    df.grad.iter().map(|g| g.gradient()).collect()
}

/// Projected gradient descent of `|grad f|^2` on the sphere of radius `r`.
fn descend_on_sphere(df: &DiffPoly, hess: &[Vec<Polynomial>], r: f64, mut x: Vec<f64>, iters: usize) -> Vec<f64> {
    let objective = |x: &[f64]| {
        let g = df.gradient_at(x);
        dot(&g, &g)
    };
    let retract = |y: Vec<f64>| {
        let s = norm(&y);
        y.into_iter().map(|v| r * v / s).collect::<Vec<f64>>()
    };
    let mut step = 1.0;
    let mut val = objective(&x);
    for _ in 0..iters {
        let g = df.gradient_at(&x);
        // d|grad f|^2 = 2 H grad f
        let d: Vec<f64> = hess
            .iter()
            .map(|row| 2.0 * row.iter().zip(&g).map(|(h, gi)| h.eval_unchecked(&x) * gi).sum::<f64>())
            .collect();
        let radial = dot(&d, &x) / (r * r);
        let tan: Vec<f64> = d.iter().zip(&x).map(|(di, xi)| di - radial * xi).collect();
        let tn = norm(&tan);
        if tn == 0.0 || val == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..50 {
            let cand = retract(x.iter().zip(&tan).map(|(xi, ti)| xi - step * ti / tn * r).collect());
            let cv = objective(&cand);
            if cv < val {
                x = cand;
                val = cv;
                improved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved || step < 1e-16 {
            break;
        }
    }
    x
}

fn rabier_scan_sampled(df: &DiffPoly, r: f64, cfg: &RabierScanConfig, stream: StreamId) -> RabierField {
    let n = df.nvars();
    let mut rng = stream.rng();
    let mut pairs: Vec<RabierPair> = (0..cfg.draws)
        .map(|_| pair(df, sphere_point(&mut rng, n, r), false))
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].nu.total_cmp(&pairs[b].nu));
    let k = ((cfg.draws as f64 * cfg.refine_fraction).ceil() as usize).clamp(1, cfg.draws);
    let hess = hessian(df);
    let refined: Vec<RabierPair> = order[..k]
        .iter()
        .map(|&i| pair(df, descend_on_sphere(df, &hess, r, pairs[i].x.clone(), 200), true))
        .collect();
    pairs.extend(refined);
    RabierField { r, pairs }
}

/// Samples `nu` on the sphere of radius `r`, refining its local minima.
pub fn rabier_scan(f: &Polynomial, r: f64, cfg: &RabierScanConfig, stream: StreamId) -> Result<RabierField> {
    rabier_scan_diff(&DiffPoly::new(f.clone()), r, cfg, stream)
}

pub fn rabier_scan_diff(df: &DiffPoly, r: f64, cfg: &RabierScanConfig, stream: StreamId) -> Result<RabierField> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    match df.nvars() {
        0 | 1 => Err(Error::InvalidArgument("rabier scan needs n >= 2".into())),
        2 => {
            if cfg.resolution < 16 {
                return Err(Error::InvalidArgument("scan resolution must be at least 16".into()));
            }
            Ok(rabier_scan_planar(df, r, cfg.resolution))
        }
        _ => {
            if cfg.draws == 0 {
                return Err(Error::InvalidArgument("need at least one draw".into()));
            }
            Ok(rabier_scan_sampled(df, r, cfg, stream))
        }
    }
}

/// Uniform grid of `count` bins of width `width` centred on `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub center: f64,
    pub width: f64,
    pub count: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            center: 0.0,
            width: 0.02,
            count: 64,
        }
    }
}

impl BinSpec {
    pub fn index(&self, value: f64) -> Option<usize> {
        let k = ((value - self.center) / self.width + self.count as f64 / 2.0).floor();
        (k >= 0.0 && k < self.count as f64).then_some(k as usize)
    }

    pub fn lower(&self, k: usize) -> f64 {
        self.center + (k as f64 - self.count as f64 / 2.0) * self.width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.lower(k) + 0.5 * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinfConfig {
    pub bins: BinSpec,
    /// A bin decays when its fitted log-log slope is below this.
    pub slope_threshold: f64,
    /// ...and its envelope at the largest radius is below this.
    pub abs_threshold: f64,
    pub scan: RabierScanConfig,
    pub seed: u64,
}

impl Default for KinfConfig {
    fn default() -> Self {
        Self {
            bins: BinSpec::default(),
            slope_threshold: -0.5,
            abs_threshold: 0.1,
            scan: RabierScanConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub r: f64,
    pub x: Vec<f64>,
    pub f_value: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinfCandidate {
    pub value: f64,
    pub bin_width: f64,
    /// `[lo, hi)` covered by the clustered bins.
    pub span: (f64, f64),
    pub decay_slope: f64,
    pub final_nu: f64,
    pub n_witnesses: usize,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub r: f64,
    pub bin_center: f64,
    /// `None` when no sample fell in the bin at this radius.
    pub min_nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinfReport {
    pub radii: Vec<f64>,
    pub candidates: Vec<KinfCandidate>,
    /// Minimum of `nu` over the whole sphere, per radius.
    pub global_min_nu: Vec<f64>,
    /// Log-log slope of `global_min_nu` against the radius.
    pub global_slope: Option<f64>,
    pub envelope: Vec<EnvelopeRow>,
}

/// Slope of `log nu` against `log r` over the tail of the finite samples:
/// the last half of them, at least three.
fn tail_slope(radii: &[f64], env: &[Option<f64>]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(env)
        .filter_map(|(r, v)| v.filter(|v| *v > 0.0).map(|v| (r.ln(), v.ln())))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let keep = (pts.len() + 1) / 2;
    let tail = &pts[pts.len() - keep.max(3)..];
    let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
    linear_fit(&x, &y).map(|(s, _)| s)
}

/// Scans `nu` over the radius schedule and reports decaying `f`-bins as
/// asymptotic critical value candidates. An empty candidate list means no
/// evidence within the binned `f` range at the scanned radii.
pub fn detect_kinf(f: &Polynomial, radii: &[f64], cfg: &KinfConfig) -> Result<KinfReport> {
    if radii.len() < 4 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            got: radii.len(),
        });
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidArgument("radii must be positive and increasing".into()));
    }
    if !(cfg.bins.width > 0.0) || cfg.bins.count == 0 {
        return Err(Error::InvalidArgument("bins need positive width and count".into()));
    }
    let df = DiffPoly::new(f.clone());
    let fields = radii
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let stream = StreamId::new(cfg.seed, stage::RABIER_SCAN, j as u32);
            rabier_scan_diff(&df, r, &cfg.scan, stream)
        })
        .collect::<Result<Vec<_>>>()?;

    let nb = cfg.bins.count;
    // per bin, per radius: best pair
    let mut best: Vec<Vec<Option<&RabierPair>>> = vec![vec![None; radii.len()]; nb];
    let mut global_min_nu = Vec::with_capacity(radii.len());
    for (j, field) in fields.iter().enumerate() {
        global_min_nu.push(field.min_nu().map_or(f64::INFINITY, |p| p.nu));
        for p in &field.pairs {
            if let Some(k) = cfg.bins.index(p.f_value) {
                let slot = &mut best[k][j];
                if slot.map_or(true, |q| p.nu < q.nu) {
                    *slot = Some(p);
                }
            }
        }
    }
    let env: Vec<Vec<Option<f64>>> = best
        .iter()
        .map(|row| row.iter().map(|p| p.map(|p| p.nu)).collect())
        .collect();

    let last = radii.len() - 1;
    let decaying: Vec<bool> = env
        .iter()
        .map(|row| match (tail_slope(radii, row), row[last]) {
            (Some(s), Some(fin)) => s < cfg.slope_threshold && fin < cfg.abs_threshold,
            _ => false,
        })
        .collect();

    let mut candidates = Vec::new();
    let mut k = 0;
    while k < nb {
        if !decaying[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < nb && decaying[k] {
            k += 1;
        }
        let bins = start..k;
        let cluster_env: Vec<Option<f64>> = (0..radii.len())
            .map(|j| {
                bins.clone()
                    .filter_map(|b| env[b][j])
                    .min_by(f64::total_cmp)
            })
            .collect();
        let witnesses: Vec<Witness> = (0..radii.len())
            .filter_map(|j| {
                bins.clone()
                    .filter_map(|b| best[b][j])
                    .min_by(|a, b| a.nu.total_cmp(&b.nu))
                    .map(|p| Witness {
                        r: radii[j],
                        x: p.x.clone(),
                        f_value: p.f_value,
                        nu: p.nu,
                    })
            })
            .collect();
        let lo = cfg.bins.lower(start);
        let hi = cfg.bins.lower(k);
        let value = 0.5 * (lo + hi);
        let witnesses: Vec<Witness> = witnesses
            .into_iter()
            .filter(|w| (w.f_value - value).abs() <= cfg.bins.width)
            .collect();
        candidates.push(KinfCandidate {
            value,
            bin_width: cfg.bins.width,
            span: (lo, hi),
            decay_slope: tail_slope(radii, &cluster_env).expect("flagged bins carry a slope"),
            final_nu: cluster_env[last].expect("flagged bins reach the last radius"),
            n_witnesses: witnesses.len(),
            witnesses,
        });
    }

    let finite: Vec<Option<f64>> = global_min_nu.iter().map(|v| v.is_finite().then_some(*v)).collect();
    let global_slope = {
        let pts: Vec<(f64, f64)> = radii
            .iter()
            .zip(&finite)
            .filter_map(|(r, v)| v.filter(|v| *v > 0.0).map(|v| (r.ln(), v.ln())))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y).map(|(s, _)| s)
    };

    let envelope = radii
        .iter()
        .enumerate()
        .flat_map(|(j, &r)| {
            let env = &env;
            (0..nb).map(move |b| EnvelopeRow {
                r,
                bin_center: cfg.bins.bin_center(b),
                min_nu: env[b][j],
            })
        })
        .collect();

    Ok(KinfReport {
        radii: radii.to_vec(),
        candidates,
        global_min_nu,
        global_slope,
        envelope,
    })
}

/// Minimum of `nu` over `f^{-1}(t)` on the circle of radius `r`;
/// `+inf` when the intersection is empty.
pub fn fiber_rabier_min(f: &Polynomial, t: f64, r: f64, scan: &ScanConfig) -> Result<f64> {
    fiber_rabier_min_diff(&DiffPoly::new(f.clone()), t, r, scan)
}

pub fn fiber_rabier_min_diff(df: &DiffPoly, t: f64, r: f64, scan: &ScanConfig) -> Result<f64> {
    let set = circle_fiber_points_diff(df, t, r, scan)?;
    Ok(set
        .points
        .iter()
        .map(|p| p.rabier)
        .fold(f64::INFINITY, f64::min))
}

/// Square search region `[lo, hi]^n` seeded with `grid^n` Newton starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearch {
    pub lo: f64,
    pub hi: f64,
    pub grid: usize,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            lo: -10.0,
            hi: 10.0,
            grid: 41,
        }
    }
}

/// Critical points of a planar polynomial inside the search box, by Newton's
/// method on `grad f = 0` from a grid of seeds. Deduplicated.
pub fn critical_points(f: &Polynomial, search: &CriticalSearch) -> Result<Vec<Vec<f64>>> {
    if f.nvars() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: f.nvars(),
        });
    }
    let df = DiffPoly::new(f.clone());
    let hess = hessian(&df);
    let g = search.grid.max(2);
    let step = (search.hi - search.lo) / (g - 1) as f64;
    let mut found: Vec<Vec<f64>> = Vec::new();
    for i in 0..g {
        for j in 0..g {
            let mut x = vec![search.lo + step * i as f64, search.lo + step * j as f64];
            let mut ok = false;
            for _ in 0..60 {
                let grad = df.gradient_at(&x);
                let scale = 1.0 + norm(&x);
                if norm(&grad) <= 1e-12 * scale {
                    ok = true;
                    break;
                }
                let h: Vec<Vec<f64>> = hess
                    .iter()
                    .map(|row| row.iter().map(|p| p.eval_unchecked(&x)).collect())
                    .collect();
                let Some(dx) = solve_linear(h, grad) else { break };
                for (xi, d) in x.iter_mut().zip(&dx) {
                    *xi -= d;
                }
                if !x.iter().all(|v| v.is_finite()) {
                    break;
                }
            }
            let inside = x.iter().all(|v| *v >= search.lo - step && *v <= search.hi + step);
            if ok && inside && !found.iter().any(|c| norm(&[c[0] - x[0], c[1] - x[1]]) < 1e-6 * (1.0 + norm(c))) {
                found.push(x);
            }
        }
    }
    found.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(found)
}

/// `1 + max |c|` over critical points `c` on the fiber `f = t` (within
/// `tol`), or `1` when the fiber carries no critical point.
pub fn sigma1(f: &Polynomial, t: f64, search: &CriticalSearch, tol: f64) -> Result<f64> {
    let crit = critical_points(f, search)?;
    Ok(sigma1_from_critical(f, &crit, t, tol))
}

pub fn sigma1_from_critical(f: &Polynomial, crit: &[Vec<f64>], t: f64, tol: f64) -> f64 {
    crit.iter()
        .filter(|c| (f.eval_unchecked(c) - t).abs() <= tol)
        .map(|c| 1.0 + norm(c))
        .fold(1.0, f64::max)
}

/// Lower estimate of `inf { nu(x) : f(x) = t, |x| >= eps1 }` from the
/// circles of the radius schedule; `+inf` when no sampled circle meets the
/// fiber.
pub fn sigma2(f: &Polynomial, t: f64, eps1: f64, radii: &[f64], scan: &ScanConfig) -> Result<f64> {
    let df = DiffPoly::new(f.clone());
    let mins = radii
        .par_iter()
        .filter(|r| **r >= eps1)
        .map(|&r| fiber_rabier_min_diff(&df, t, r, scan))
        .collect::<Result<Vec<_>>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSample {
    pub t: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Piecewise-linear envelopes through `1.1 sigma1` and `0.9 sigma2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEnvelope {
    pub t_grid: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    /// Grid points dropped because `sigma2` was not finite and positive.
    pub dropped: Vec<f64>,
}

fn interp(grid: &[f64], vals: &[f64], t: f64) -> f64 {
    if t <= grid[0] {
        return vals[0];
    }
    if t >= grid[grid.len() - 1] {
        return vals[vals.len() - 1];
    }
    let k = grid.partition_point(|g| *g <= t) - 1;
    let w = (t - grid[k]) / (grid[k + 1] - grid[k]);
    vals[k] + w * (vals[k + 1] - vals[k])
}

impl SigmaEnvelope {
    pub fn eps1_at(&self, t: f64) -> f64 {
        interp(&self.t_grid, &self.eps1, t)
    }

    pub fn eps2_at(&self, t: f64) -> f64 {
        interp(&self.t_grid, &self.eps2, t)
    }
}

pub fn build_envelopes(samples: &[SigmaSample]) -> Result<SigmaEnvelope> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let (kept, dropped): (Vec<SigmaSample>, Vec<SigmaSample>) = sorted
        .into_iter()
        .partition(|s| s.sigma2.is_finite() && s.sigma2 > 0.0 && s.sigma1.is_finite());
    if kept.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: kept.len(),
        });
    }
    if kept.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidArgument("sigma grid must have distinct levels".into()));
    }
    Ok(SigmaEnvelope {
        t_grid: kept.iter().map(|s| s.t).collect(),
        sigma1: kept.iter().map(|s| s.sigma1).collect(),
        sigma2: kept.iter().map(|s| s.sigma2).collect(),
        eps1: kept.iter().map(|s| 1.1 * s.sigma1).collect(),
        eps2: kept.iter().map(|s| 0.9 * s.sigma2).collect(),
        dropped: dropped.iter().map(|s| s.t).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::geometric_radii;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s, 2).unwrap()
    }

    fn scan(f: &str, r: f64) -> RabierField {
        rabier_scan(&p(f), r, &RabierScanConfig::default(), StreamId::new(0, 5, 0)).unwrap()
    }

    #[test]
    fn rabier_scan_examples() {
        let fl = scan("x", 7.0);
        assert!(fl.pairs.iter().all(|q| (q.nu - 7.0).abs() < 1e-12));
        let fl = scan("x*y", 5.0);
        assert!((fl.min_nu().unwrap().nu - 25.0).abs() < 1e-10);
        let fl = scan("x + x^2*y", 50.0);
        let m = fl.min_nu().unwrap();
        assert!((m.nu - 0.005).abs() < 0.0005, "{m:?}");
        assert!((m.f_value.abs() - 0.005).abs() < 0.0005, "{m:?}");
        for q in &fl.pairs {
            let df = DiffPoly::new(p("x + x^2*y"));
            assert!((df.rabier(&q.x) - q.nu).abs() <= 1e-12 * q.nu.max(1e-300));
        }
    }

    #[test]
    fn rabier_scan_in_three_dimensions_finds_valley() {
        // grad(x + x^2 y) does not involve z; the valley is the Broughton witness
        // family crossed with z, so the minimum on the sphere is below the 2d one
        let f = Polynomial::parse("x + x^2*y", 3).unwrap();
        let cfg = RabierScanConfig {
            draws: 20_000,
            ..Default::default()
        };
        let fl = rabier_scan(&f, 20.0, &cfg, StreamId::new(3, 5, 0)).unwrap();
        let raw = fl.pairs.iter().filter(|q| !q.refined).map(|q| q.nu).fold(f64::INFINITY, f64::min);
        let refined = fl.min_nu().unwrap().nu;
        assert!(refined < raw);
        assert!(refined < 0.05, "{refined}");
    }

    fn detect(f: &str) -> KinfReport {
        detect_kinf(&p(f), &geometric_radii(8.0, 6), &KinfConfig::default()).unwrap()
    }

    #[test]
    fn no_candidates_for_line_and_hyperbola() {
        let rep = detect("x");
        assert!(rep.candidates.is_empty());
        assert!((rep.global_slope.unwrap() - 1.0).abs() < 0.05);
        let rep = detect("x*y");
        assert!(rep.candidates.is_empty());
        assert!((rep.global_slope.unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn broughton_has_one_candidate_at_zero() {
        let rep = detect("x + x^2*y");
        assert_eq!(rep.candidates.len(), 1, "{:?}", rep.candidates);
        let c = &rep.candidates[0];
        assert!(c.value.abs() < c.bin_width);
        assert!((c.decay_slope + 1.0).abs() < 0.2, "{}", c.decay_slope);
        assert!(c.final_nu < 0.1);
        for w in &c.witnesses {
            assert!(w.f_value >= c.span.0 && w.f_value < c.span.1);
            assert!((w.f_value - c.value).abs() <= c.bin_width);
        }
    }

    #[test]
    fn detection_is_shift_invariant() {
        let radii = geometric_radii(8.0, 6);
        let base = detect_kinf(&p("x + x^2*y"), &radii, &KinfConfig::default()).unwrap();
        let shifted_cfg = KinfConfig {
            bins: BinSpec {
                center: 0.5,
                ..BinSpec::default()
            },
            ..KinfConfig::default()
        };
        let shifted = detect_kinf(&p("x + x^2*y + 0.5"), &radii, &shifted_cfg).unwrap();
        assert_eq!(base.candidates.len(), shifted.candidates.len());
        for (a, b) in base.candidates.iter().zip(&shifted.candidates) {
            assert!((b.value - a.value - 0.5).abs() < 1e-12);
            assert_eq!(a.witnesses.len(), b.witnesses.len());
            for (wa, wb) in a.witnesses.iter().zip(&b.witnesses) {
                assert_eq!(wa.nu, wb.nu);
            }
        }
        assert_eq!(base.global_min_nu, shifted.global_min_nu);
    }

    #[test]
    fn detect_needs_four_radii() {
        assert!(matches!(
            detect_kinf(&p("x"), &[1.0, 2.0, 3.0], &KinfConfig::default()),
            Err(Error::InsufficientSamples { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn fiber_rabier_min_examples() {
        let s = ScanConfig::default();
        assert!((fiber_rabier_min(&p("x*y"), 1.0, 10.0, &s).unwrap() - 100.0).abs() < 1e-9);
        // t = 0.005 nearly touches the lower arm y = -sqrt(2500 - x^2) at x = 0.01;
        // locate its two roots there by bisection in x and evaluate nu directly
        let g = |x: f64| x - x * x * (2500.0 - x * x).sqrt() - 0.005;
        let nu = |x: f64| {
            let y = -(2500.0 - x * x).sqrt();
            50.0 * ((1.0 + 2.0 * x * y).powi(2) + (x * x).powi(2)).sqrt()
        };
        let a = crate::numerics::bisect(&g, 0.009, 0.01, g(0.009), 1e-18);
        let b = crate::numerics::bisect(&g, 0.011, 0.01, g(0.011), 1e-18);
        let oracle = nu(a).min(nu(b));
        let m = fiber_rabier_min(&p("x + x^2*y"), 0.005, 50.0, &s).unwrap();
        assert!((m - oracle).abs() < 1e-4 * oracle, "{m} {oracle}");
        assert!(m > 0.0025 && m < 0.01, "{m}");
        assert_eq!(fiber_rabier_min(&p("x*y"), 100.0, 1.0, &s).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sigma1_examples() {
        let s = CriticalSearch::default();
        assert_eq!(sigma1(&p("x"), 3.0, &s, 1e-9).unwrap(), 1.0);
        assert_eq!(sigma1(&p("x*y"), 0.0, &s, 1e-9).unwrap(), 1.0);
        assert_eq!(sigma1(&p("x*y"), 3.0, &s, 1e-9).unwrap(), 1.0);
        // critical point (1, 0) of x^3 - 3x + y^2 lies on the fiber t = -2
        let v = sigma1(&p("x^3 - 3*x + y^2"), -2.0, &s, 1e-9).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        // (-1, 0) lies on t = 2
        let v = sigma1(&p("x^3 - 3*x + y^2"), 2.0, &s, 1e-9).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    /// Brute-force infimum of `nu` over the fiber `f = t` restricted to
    /// `|x| >= rmin`, by a dense radius sweep.
    fn brute_sigma2(f: &Polynomial, t: f64, rmin: f64, rmax: f64) -> f64 {
        let s = ScanConfig {
            resolution: 1024,
            ..ScanConfig::default()
        };
        (0..=2000)
            .map(|k| rmin * (rmax / rmin).powf(k as f64 / 2000.0))
            .map(|r| fiber_rabier_min(f, t, r, &s).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn sigma2_examples() {
        let s = ScanConfig::default();
        let radii = geometric_radii(1.0, 8);
        let v = sigma2(&p("x*y"), 1.0, 1.0, &radii, &s).unwrap();
        // the true infimum is 2 at (±1, ±1); the schedule first meets the fiber at r = 2
        let oracle = brute_sigma2(&p("x*y"), 1.0, 1.0, 128.0);
        assert!((oracle - 2.0).abs() < 0.01, "{oracle}");
        assert!(v >= oracle);
        assert!((v - 4.0).abs() < 1e-9);
        let v = sigma2(&p("x"), 0.0, 1.0, &radii, &s).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = sigma2(&p("x^2 + y^2"), 4.0, 3.0, &radii, &s).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn envelopes() {
        let flat: Vec<SigmaSample> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&t| SigmaSample {
                t,
                sigma1: 1.0,
                sigma2: 2.0,
            })
            .collect();
        let e = build_envelopes(&flat).unwrap();
        assert!(e.eps1.iter().all(|v| (v - 1.1).abs() < 1e-15));
        assert!(e.eps2.iter().all(|v| (v - 1.8).abs() < 1e-15));
        assert!((e.eps2_at(0.37) - 1.8).abs() < 1e-15);
        assert!(build_envelopes(&flat[..1]).is_err());

        let f = p("x*y");
        let s = ScanConfig::default();
        let radii: Vec<f64> = (1..=400).map(|k| 0.25 * k as f64).collect();
        let samples: Vec<SigmaSample> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&t| SigmaSample {
                t,
                sigma1: sigma1(&f, t, &CriticalSearch::default(), 1e-9).unwrap(),
                sigma2: sigma2(&f, t, 1.0, &radii, &s).unwrap(),
            })
            .collect();
        let e = build_envelopes(&samples).unwrap();
        for (k, &t) in e.t_grid.iter().enumerate() {
            // sigma2(t) = 2|t| up to the radius grid
            assert!(e.sigma2[k] >= 2.0 * t - 1e-9 && e.sigma2[k] <= 2.0 * t + 0.6);
            assert!(e.eps2[k] > 0.0 && e.eps2[k] < e.sigma2[k]);
            assert!(e.eps1[k] > e.sigma1[k]);
        }
        for k in 0..=100 {
            let t = 0.5 + 1.5 * k as f64 / 100.0;
            assert!(e.eps2_at(t) > 0.0);
        }
    }

    #[test]
    fn sigma_inequality_on_samples() {
        // no critical values at infinity for x*y away from 0; every sampled fiber
        // point beyond eps1 has nu above eps2
        let f = p("x*y");
        let s = ScanConfig::default();
        let radii = geometric_radii(1.0, 8);
        let grid = [0.5, 1.0, 1.5, 2.0];
        let samples: Vec<SigmaSample> = grid
            .iter()
            .map(|&t| {
                let s1 = sigma1(&f, t, &CriticalSearch::default(), 1e-9).unwrap();
                SigmaSample {
                    t,
                    sigma1: s1,
                    sigma2: sigma2(&f, t, 1.1 * s1, &radii, &s).unwrap(),
                }
            })
            .collect();
        let e = build_envelopes(&samples).unwrap();
        for &t in &grid {
            for &r in &radii {
                let set = circle_fiber_points_diff(&DiffPoly::new(f.clone()), t, r, &s).unwrap();
                for q in set.points.iter().filter(|q| norm(&q.x) > e.eps1_at(t)) {
                    assert!(q.rabier > e.eps2_at(t));
                }
            }
        }
    }
}
