//! The inversion map `x -> x/|x|^2`, its Jacobian, sphere sampling and the
//! polynomial equation of an inverted fiber.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rng::StreamId;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    // hypot-style scaling keeps huge/tiny coordinates finite
    let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

/// `x / |x|^2`.
pub fn invert(x: &[f64]) -> Result<Vec<f64>> {
    let n2 = dot(x, x);
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let s = norm(x);
    // divide twice by |x| rather than once by |x|^2 to avoid overflow
    Ok(x.iter().map(|v| v / s / s).collect())
}

/// Dense Jacobian of the inversion at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianMatrix {
    pub entries: Vec<Vec<f64>>,
}

impl JacobianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|row| dot(row, v)).collect()
    }
}

/// Entry `(i, j)` is `(|x|^2 delta_ij - 2 x_i x_j) / |x|^4`.
pub fn inversion_jacobian(x: &[f64]) -> Result<JacobianMatrix> {
    let n2 = dot(x, x);
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let n4 = n2 * n2;
    let entries = (0..x.len())
        .map(|i| {
            (0..x.len())
                .map(|j| {
                    let diag = if i == j { n2 } else { 0.0 };
                    (diag - 2.0 * x[i] * x[j]) / n4
                })
                .collect()
        })
        .collect();
    Ok(JacobianMatrix { entries })
}

/// `d_x(invert) v` in rank-one form `(v - 2 x̂ <x̂, v>) / |x|^2`.
pub fn apply_inversion_jacobian(x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    let xh: Vec<f64> = x.iter().map(|c| c / r).collect();
    let p = dot(&xh, v);
    Ok(v.iter()
        .zip(&xh)
        .map(|(vi, hi)| (vi - 2.0 * hi * p) / r / r)
        .collect())
}

/// `u_1^2 + ... + u_n^2`.
pub fn norm_squared_polynomial(nvars: usize) -> Polynomial {
    Polynomial::from_terms(
        nvars,
        (0..nvars).map(|i| {
            let mut e = vec![0; nvars];
            e[i] = 2;
            (1.0, e)
        }),
    )
}

/// Polynomial `G_t` whose zero set minus the origin is the image of
/// `f^{-1}(t)` under inversion:
///
/// `G_t(u) = sum_a c_a u^a |u|^{2(d - |a|)} - t |u|^{2d}`, `d = deg f`,
///
/// so that `G_t(invert(x)) = (f(x) - t) / |x|^{2d}`.
pub fn invert_fiber_polynomial(f: &Polynomial, t: f64) -> Result<Polynomial> {
    let d = match f.degree() {
        Some(d) if d > 0 => d,
        _ => return Err(Error::ConstantPolynomial),
    };
    let n = f.nvars();
    let q = norm_squared_polynomial(n);
    let powers: Vec<Polynomial> = (0..=d).map(|k| q.pow(k)).collect();
    let mut g = powers[d as usize].scale(-t);
    for term in f.terms() {
        let mono = Polynomial::from_terms(n, [(term.coeff, term.exps.clone())]);
        let lifted = mono.mul(&powers[(d - term.degree()) as usize])?;
        g = g.add(&lifted)?;
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSample {
    pub radius: f64,
    pub points: Vec<Vec<f64>>,
    pub stream: StreamId,
}

/// Draws a single uniform point on the sphere of radius `r` in `R^n`.
pub fn sphere_point<R: Rng>(rng: &mut R, n: usize, r: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm(&g);
        if s > 1e-300 {
            return g.into_iter().map(|v| r * (v / s)).collect();
        }
    }
}

/// `count` points uniformly distributed on the sphere of radius `r` in `R^n`,
/// by normalizing Gaussian vectors.
pub fn uniform_sphere_sample(n: usize, r: f64, count: usize, stream: StreamId) -> Result<SphereSample> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("sphere sampling needs n >= 2, got {n}")));
    }
    if !(r > 0.0) || count == 0 {
        return Err(Error::InvalidArgument("radius must be positive and count >= 1".into()));
    }
    let mut rng = stream.rng();
    let points = (0..count).map(|_| sphere_point(&mut rng, n, r)).collect();
    Ok(SphereSample {
        radius: r,
        points,
        stream,
    })
}

/// `m` equispaced points on the circle of radius `r`, starting at angle 0,
/// counter-clockwise.
pub fn angular_grid(r: f64, m: usize) -> Vec<[f64; 2]> {
    (0..m)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / m as f64;
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

/// Length of the component of the radial unit vector tangent to the level set
/// of `f` through `x`: `|(I - n n^T) x̂|` with `n` the unit normal.
pub fn tangent_projection_norm(f: &Polynomial, x: &[f64]) -> Result<f64> {
    let grad: Vec<f64> = f
        .gradient()
        .iter()
        .map(|g| g.eval(x))
        .collect::<Result<_>>()?;
    let gn = norm(&grad);
    if gn == 0.0 {
        return Err(Error::VanishingGradient);
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::ZeroVector);
    }
    let nh: Vec<f64> = grad.iter().map(|g| g / gn).collect();
    let xh: Vec<f64> = x.iter().map(|v| v / r).collect();
    let p = dot(&nh, &xh);
    let proj: Vec<f64> = xh.iter().zip(&nh).map(|(a, b)| a - p * b).collect();
    Ok(norm(&proj).min(1.0))
}

fn gamma_half_integer(twice: u32) -> f64 {
    // Gamma(twice / 2) for positive integers `twice`
    match twice {
        1 => PI.sqrt(),
        2 => 1.0,
        k => (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2),
    }
}

/// `k`-dimensional volume of the round `k`-sphere of radius `r` (a
/// `k`-manifold in `R^{k+1}`). For `k = 0` this is 2, the two points.
pub fn sphere_volume(k: usize, r: f64) -> f64 {
    let m = (k + 1) as u32;
    2.0 * PI.powf(m as f64 / 2.0) / gamma_half_integer(m) * r.powi(k as i32)
}

/// Volume of the `k`-dimensional ball of radius `r`.
pub fn ball_volume(k: usize, r: f64) -> f64 {
    PI.powf(k as f64 / 2.0) / gamma_half_integer(k as u32 + 2) * r.powi(k as i32)
}
