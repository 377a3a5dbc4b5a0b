//! Point samples of a fiber `f^{-1}(t)` intersected with a sphere.
//!
//! In the plane the intersection with a circle is found exhaustively by an
//! angular sign scan with bisection. In higher dimension we sample a thin
//! slab around the fiber, or project seed points with a damped Newton
//! iteration on the two constraints `f = t`, `|x| = r`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, sphere_point};
use crate::numerics::{bisect, golden_min};
use crate::poly::{DiffPoly, Polynomial};
use crate::rng::StreamId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Number of equispaced angles in the first pass.
    pub resolution: usize,
    /// Bisection stops below this angular width (radians).
    pub angle_tol: f64,
    /// An extremum of the scanned function with `|g| < tangency_tol * max|g|`
    /// that does not cross zero is treated as a tangency.
    pub tangency_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            resolution: 4096,
            angle_tol: 1e-12,
            tangency_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub x: Vec<f64>,
    /// `f(x) - t`.
    pub f_residual: f64,
    pub grad_norm: f64,
    /// `|x| |grad f(x)|`.
    pub rabier: f64,
    /// Suspected double root; counted once.
    pub tangent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberPointSet {
    pub t: f64,
    pub r: f64,
    pub points: Vec<FiberPoint>,
    /// True when the scan certifies that every intersection point was found.
    pub complete: bool,
    /// Angular resolution of the pass that produced `points`.
    pub resolution: usize,
}

impl FiberPointSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleRoot {
    pub theta: f64,
    pub tangent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleScan {
    pub roots: Vec<CircleRoot>,
    pub resolution: usize,
    pub complete: bool,
}

struct PassResult {
    roots: Vec<CircleRoot>,
    /// A cell held two roots (found through its extremum) or a tangency was
    /// suspected.
    needs_refinement: bool,
    tangency: bool,
}

fn scan_pass<G: Fn(f64) -> f64>(g: &G, m: usize, cfg: &ScanConfig) -> PassResult {
    let h = 2.0 * PI / m as f64;
    let theta = |j: usize| h * j as f64;
    let vals: Vec<f64> = (0..m).map(|j| g(theta(j))).collect();
    let max_abs = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let at = |j: isize| vals[j.rem_euclid(m as isize) as usize];

    let mut roots = Vec::new();
    let mut needs_refinement = false;
    let mut tangency = false;
    if max_abs == 0.0 {
        // g vanishes identically on the scan: the circle lies in the fiber
        return PassResult {
            roots,
            needs_refinement: true,
            tangency: true,
        };
    }

    for j in 0..m {
        let ji = j as isize;
        let (a, b) = (vals[j], at(ji + 1));
        if a == 0.0 {
            let (prev, next) = (at(ji - 1), b);
            let tangent = prev != 0.0 && next != 0.0 && (prev > 0.0) == (next > 0.0);
            if tangent {
                needs_refinement = true;
                tangency = true;
            }
            roots.push(CircleRoot {
                theta: theta(j),
                tangent,
            });
        } else if b != 0.0 && (a > 0.0) != (b > 0.0) {
            let th = bisect(g, theta(j), theta(j) + h, a, cfg.angle_tol);
            roots.push(CircleRoot {
                theta: th,
                tangent: false,
            });
        }
    }

    // Discrete local minima of |g| without a sign change may hide a pair of
    // close roots or a tangency.
    for j in 0..m {
        let ji = j as isize;
        let (p, c, n) = (at(ji - 1), vals[j], at(ji + 1));
        if p == 0.0 || c == 0.0 || n == 0.0 {
            continue;
        }
        let s = c.signum();
        if p.signum() != s || n.signum() != s || c.abs() > p.abs() || c.abs() > n.abs() {
            continue;
        }
        let lo = theta(j) - h;
        let hi = theta(j) + h;
        let sg = |th: f64| s * g(th);
        let (th_min, v_min) = golden_min(&sg, lo, hi, cfg.angle_tol);
        if v_min < 0.0 {
            needs_refinement = true;
            let left = bisect(g, lo, th_min, p, cfg.angle_tol);
            let right = bisect(g, th_min, hi, g(th_min), cfg.angle_tol);
            roots.push(CircleRoot {
                theta: left,
                tangent: false,
            });
            roots.push(CircleRoot {
                theta: right,
                tangent: false,
            });
        } else if v_min <= cfg.tangency_tol * max_abs {
            needs_refinement = true;
            tangency = true;
            roots.push(CircleRoot {
                theta: th_min,
                tangent: true,
            });
        }
    }

    for r in &mut roots {
        r.theta = r.theta.rem_euclid(2.0 * PI);
    }
    roots.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    PassResult {
        roots,
        needs_refinement,
        tangency,
    }
}

/// Zeros of a `2π`-periodic function by sign scan, bisection and extremum
/// refinement. A pass that finds close root pairs or near-tangencies is
/// repeated once at four times the resolution.
pub fn scan_circle<G: Fn(f64) -> f64>(g: &G, cfg: &ScanConfig) -> CircleScan {
    let mut m = cfg.resolution.max(16);
    let mut pass = scan_pass(g, m, cfg);
    if pass.needs_refinement {
        m *= 4;
        pass = scan_pass(g, m, cfg);
    }
    let even = pass.roots.len() % 2 == 0;
    CircleScan {
        complete: !pass.tangency && even,
        roots: pass.roots,
        resolution: m,
    }
}

fn check_planar(f: &Polynomial) -> Result<()> {
    if f.nvars() != 2 {
        return Err(Error::WrongDimension {
            expected: 2,
            got: f.nvars(),
        });
    }
    Ok(())
}

/// All points of `f^{-1}(t)` on the circle of radius `r` (planar `f`).
pub fn circle_fiber_points(f: &Polynomial, t: f64, r: f64, cfg: &ScanConfig) -> Result<FiberPointSet> {
    check_planar(f)?;
    circle_fiber_points_diff(&DiffPoly::new(f.clone()), t, r, cfg)
}

/// [`circle_fiber_points`] with a precomputed gradient.
pub fn circle_fiber_points_diff(df: &DiffPoly, t: f64, r: f64, cfg: &ScanConfig) -> Result<FiberPointSet> {
    check_planar(&df.f)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if cfg.resolution < 16 {
        return Err(Error::InvalidArgument("scan resolution must be at least 16".into()));
    }
    let g = |th: f64| df.value(&[r * th.cos(), r * th.sin()]) - t;
    let scan = scan_circle(&g, cfg);
    let points = scan
        .roots
        .iter()
        .map(|root| {
            let x = vec![r * root.theta.cos(), r * root.theta.sin()];
            let grad_norm = norm(&df.gradient_at(&x));
            FiberPoint {
                f_residual: df.value(&x) - t,
                rabier: norm(&x) * grad_norm,
                grad_norm,
                tangent: root.tangent,
                x,
            }
        })
        .collect();
    Ok(FiberPointSet {
        t,
        r,
        points,
        complete: scan.complete,
        resolution: scan.resolution,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
}

fn constraint_residual(df: &DiffPoly, t: f64, r: f64, x: &[f64]) -> [f64; 2] {
    [df.value(x) - t, (dot(x, x) - r * r) / (2.0 * r)]
}

/// Projects `x0` onto `{f = t, |x| = r}` by damped Gauss-Newton steps with a
/// minimum-norm update. Converged when `|f - t| <= tol (1 + |t|)` and
/// `||x| - r| <= tol r`.
pub fn newton_project(
    f: &Polynomial,
    t: f64,
    r: f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    if x0.len() != f.nvars() {
        return Err(Error::DimensionMismatch {
            expected: f.nvars(),
            got: x0.len(),
        });
    }
    let df = DiffPoly::new(f.clone());
    newton_project_diff(&df, t, r, x0, tol, max_iter)
}

pub fn newton_project_diff(
    df: &DiffPoly,
    t: f64,
    r: f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let converged = |x: &[f64]| {
        (df.value(x) - t).abs() <= tol * (1.0 + t.abs()) && (norm(x) - r).abs() <= tol * r
    };
    let merit = |x: &[f64]| {
        let [a, b] = constraint_residual(df, t, r, x);
        a * a + b * b
    };
    let mut x = x0.to_vec();
    for it in 0..max_iter {
        if converged(&x) {
            return Ok(NewtonOutcome { x, iterations: it });
        }
        let grad = df.gradient_at(&x);
        if norm(&grad) == 0.0 {
            return Err(Error::RankDeficient);
        }
        let rows = [grad, x.iter().map(|v| v / r).collect::<Vec<f64>>()];
        let res = constraint_residual(df, t, r, &x);
        // (J J^T + λ I) w = F, step = -J^T w
        let a = dot(&rows[0], &rows[0]);
        let b = dot(&rows[0], &rows[1]);
        let c = dot(&rows[1], &rows[1]);
        let lambda = 1e-14 * (a + c);
        let (a, c) = (a + lambda, c + lambda);
        let det = a * c - b * b;
        if !(det > 0.0) {
            return Err(Error::RankDeficient);
        }
        let w0 = (c * res[0] - b * res[1]) / det;
        let w1 = (a * res[1] - b * res[0]) / det;
        let step: Vec<f64> = (0..x.len())
            .map(|i| -(rows[0][i] * w0 + rows[1][i] * w1))
            .collect();
        let m0 = merit(&x);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi + alpha * si).collect();
            if merit(&cand) < m0 {
                accepted = Some(cand);
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(cand) => x = cand,
            None => {
                if converged(&x) {
                    return Ok(NewtonOutcome { x, iterations: it });
                }
                let [ra, rb] = constraint_residual(df, t, r, &x);
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: ra.abs().max(rb.abs()),
                });
            }
        }
    }
    if converged(&x) {
        return Ok(NewtonOutcome {
            x,
            iterations: max_iter,
        });
    }
    let [ra, rb] = constraint_residual(df, t, r, &x);
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: ra.abs().max(rb.abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlabMode {
    /// Uniform on the sphere of radius `r`.
    Sphere,
    /// Uniform in the ball of radius `r`.
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabDraw {
    pub x: Vec<f64>,
    pub f_value: f64,
    pub grad_norm: f64,
    /// `|(I - x̂ x̂^T) grad f(x)|`, the gradient of `f` restricted to the sphere.
    pub tangential_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSample {
    pub t: f64,
    pub r: f64,
    pub delta: f64,
    pub mode: SlabMode,
    pub draws: Vec<SlabDraw>,
    /// All draws, including those outside the slab.
    pub n_total: usize,
}

impl SlabSample {
    pub fn retained_fraction(&self) -> f64 {
        self.draws.len() as f64 / self.n_total as f64
    }
}

fn ball_point<R: Rng>(rng: &mut R, n: usize, r: f64) -> Vec<f64> {
    if n <= 4 {
        loop {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
            if dot(&x, &x) <= r * r {
                return x;
            }
        }
    }
    let rho = r * rng.gen::<f64>().powf(1.0 / n as f64);
    sphere_point(rng, n, rho)
}

/// Draws `count` uniform points on the sphere (or in the ball) of radius `r`
/// and keeps those with `|f(x) - t| < delta`.
pub fn slab_sample(
    f: &Polynomial,
    t: f64,
    r: f64,
    delta: f64,
    count: usize,
    stream: StreamId,
    mode: SlabMode,
) -> Result<SlabSample> {
    slab_sample_diff(&DiffPoly::new(f.clone()), t, r, delta, count, stream, mode)
}

pub fn slab_sample_diff(
    df: &DiffPoly,
    t: f64,
    r: f64,
    delta: f64,
    count: usize,
    stream: StreamId,
    mode: SlabMode,
) -> Result<SlabSample> {
    let n = df.nvars();
    if n < 2 {
        return Err(Error::InvalidArgument("slab sampling needs n >= 2".into()));
    }
    if !(delta > 0.0) || !(r > 0.0) || count == 0 {
        return Err(Error::InvalidArgument(
            "slab needs delta > 0, r > 0 and at least one draw".into(),
        ));
    }
    let mut rng = stream.rng();
    let mut draws = Vec::new();
    for _ in 0..count {
        let x = match mode {
            SlabMode::Sphere => sphere_point(&mut rng, n, r),
            SlabMode::Ball => ball_point(&mut rng, n, r),
        };
        let fv = df.value(&x);
        if (fv - t).abs() >= delta {
            continue;
        }
        let g = df.gradient_at(&x);
        let rx = norm(&x);
        let tangential = if rx > 0.0 {
            let radial = dot(&g, &x) / rx;
            let tan: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| gi - radial * xi / rx).collect();
            norm(&tan)
        } else {
            norm(&g)
        };
        draws.push(SlabDraw {
            f_value: fv,
            grad_norm: norm(&g),
            tangential_grad_norm: tangential,
            x,
        });
    }
    Ok(SlabSample {
        t,
        r,
        delta,
        mode,
        draws,
        n_total: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s, 2).unwrap()
    }

    fn scan(f: &str, t: f64, r: f64) -> FiberPointSet {
        circle_fiber_points(&p(f), t, r, &ScanConfig::default()).unwrap()
    }

    fn check_invariants(set: &FiberPointSet, f: &Polynomial) {
        let df = DiffPoly::new(f.clone());
        for q in &set.points {
            assert!((norm(&q.x) - set.r).abs() <= 1e-10 * set.r);
            let rab = df.rabier(&q.x);
            assert!((rab - q.rabier).abs() <= 1e-12 * rab.max(1e-300));
            // bisection to 1e-12 rad moves f by at most |dg/dθ| * 1e-12 = |x| |grad f| 1e-12
            let bound = 2e-12 * q.rabier + 1e-12 * (1.0 + set.t.abs());
            assert!(q.f_residual.abs() <= bound || q.tangent, "{} > {bound}", q.f_residual);
        }
    }

    #[test]
    fn line_meets_circle_twice() {
        let s = scan("x", 0.0, 1.0);
        assert_eq!(s.count(), 2);
        assert!(s.complete);
        let mut ys: Vec<f64> = s.points.iter().map(|q| q.x[1]).collect();
        ys.sort_by(f64::total_cmp);
        assert!((ys[0] + 1.0).abs() < 1e-12 && (ys[1] - 1.0).abs() < 1e-12);
        for q in &s.points {
            assert!(q.x[0].abs() < 1e-12);
        }
        check_invariants(&s, &p("x"));
    }

    #[test]
    fn hyperbola_counts() {
        let s = scan("x*y", 1.0, 10.0);
        assert_eq!(s.count(), 4);
        assert!(s.complete);
        check_invariants(&s, &p("x*y"));
        let s = scan("x*y", 100.0, 1.0);
        assert_eq!(s.count(), 0);
        assert!(s.complete);
    }

    #[test]
    fn broughton_zero_fiber() {
        for r in [8.0, 50.0, 100.0, 256.0] {
            let s = scan("x + x^2*y", 0.0, r);
            assert_eq!(s.count(), 6, "r = {r}");
            assert!(s.complete, "r = {r}");
            check_invariants(&s, &p("x + x^2*y"));
        }
    }

    #[test]
    fn doubling_resolution_never_loses_points() {
        for (f, t, r) in [("x + x^2*y", 0.0, 100.0), ("x*y", 1.0, 10.0), ("x + x^2*y", 0.1, 64.0)] {
            let mut last = 0;
            for m in [256, 512, 1024, 2048, 4096, 8192] {
                let cfg = ScanConfig {
                    resolution: m,
                    ..ScanConfig::default()
                };
                let c = circle_fiber_points(&p(f), t, r, &cfg).unwrap();
                assert!(c.count() >= last, "{f} at m = {m}");
                last = c.count();
            }
        }
    }

    #[test]
    fn tangency_is_flagged() {
        // x^2 + y^2 + x: on the circle of radius 1, f - 2 = 1 + cos θ - 2 touches 0 at θ = 0
        let s = scan("x^2 + y^2 + x", 2.0, 1.0);
        assert_eq!(s.count(), 1);
        assert!(s.points[0].tangent);
        assert!(!s.complete);
        assert_eq!(s.resolution, 4 * 4096);
    }

    #[test]
    fn scan_rejects_bad_input() {
        let f3 = Polynomial::parse("x", 3).unwrap();
        assert!(matches!(
            circle_fiber_points(&f3, 0.0, 1.0, &ScanConfig::default()),
            Err(Error::WrongDimension { expected: 2, got: 3 })
        ));
        assert!(circle_fiber_points(&p("x"), 0.0, -1.0, &ScanConfig::default()).is_err());
    }

    #[test]
    fn newton_examples() {
        let out = newton_project(&p("x"), 0.0, 1.0, &[0.1, 0.99], 1e-14, 50).unwrap();
        assert!(out.x[0].abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-12);
        let on = [0.0, 1.0];
        let out = newton_project(&p("x"), 0.0, 1.0, &on, 1e-14, 50).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, on.to_vec());
        let err = newton_project(&p("x^2 + y^2"), 1.0, 2.0, &[1.0, 1.0], 1e-12, 100).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err}");
        assert!(matches!(
            newton_project(&p("x"), 0.0, 1.0, &[1.0], 1e-12, 10),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn newton_in_three_dimensions() {
        let f = Polynomial::parse("x + y*z", 3).unwrap();
        let out = newton_project(&f, 1.0, 3.0, &[1.0, 2.0, 1.5], 1e-13, 100).unwrap();
        assert!((f.eval(&out.x).unwrap() - 1.0).abs() <= 1e-12);
        assert!((norm(&out.x) - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn slab_fraction_for_line() {
        let n = 100_000;
        let s = slab_sample(&p("x"), 0.0, 1.0, 0.1, n, StreamId::new(5, 1, 0), SlabMode::Sphere).unwrap();
        let expected = 4.0 * 0.1f64.asin() / (2.0 * PI);
        let frac = s.retained_fraction();
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((frac - expected).abs() < 3.0 * se, "{frac} vs {expected}");
        for d in &s.draws {
            assert!(d.f_value.abs() < 0.1);
            assert!((norm(&d.x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slab_vacuous_and_deterministic() {
        let f = p("x*y");
        let a = slab_sample(&f, 0.0, 2.0, f64::INFINITY, 500, StreamId::new(1, 1, 3), SlabMode::Ball).unwrap();
        assert_eq!(a.draws.len(), 500);
        assert!(a.draws.iter().all(|d| norm(&d.x) <= 2.0));
        let b = slab_sample(&f, 0.0, 2.0, f64::INFINITY, 500, StreamId::new(1, 1, 3), SlabMode::Ball).unwrap();
        assert_eq!(a, b);
    }
}
