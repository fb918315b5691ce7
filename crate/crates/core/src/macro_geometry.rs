//! Macroscopic density from the saddle points of
//!
//! ```text
//! F(z) = τ(z + 1/z) + (μ/2) log(1 + ε² - ε(z + 1/z)) - ξ log z
//! ```
//!
//! Inside the liquid region `𝒟₁` the equation `F'(z) = 0` has a unique root in
//! the upper half plane and the particle density is `arg z / π`. The boundary
//! of `𝒟₁` is where two real critical points merge, `F' = F'' = 0` for real
//! `z`, a system that is linear in `(μ, ξ)`.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use thiserror::Error;

use crate::C64;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MacroError {
    #[error("singular point z = {0}")]
    Singular(C64),
    #[error("degenerate quartic: {0}")]
    DegenerateQuartic(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroPoint {
    pub xi: f64,
    pub mu: f64,
    pub tau: f64,
    pub eps: f64,
}

impl MacroPoint {
    pub fn new(xi: f64, mu: f64, tau: f64, eps: f64) -> Result<Self, MacroError> {
        if !(mu >= 0.0 && tau > 0.0 && eps > 0.0 && eps < 1.0 && xi.is_finite() && mu.is_finite())
        {
            return Err(MacroError::Invalid(format!(
                "need μ ≥ 0, τ > 0, 0 < ε < 1; got ξ={xi}, μ={mu}, τ={tau}, ε={eps}"
            )));
        }
        Ok(Self { xi, mu, tau, eps })
    }

    fn scale(&self) -> f64 {
        1.0 + self.tau.abs() + self.mu.abs() + self.xi.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    D1,
    D2,
    Outside,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::D1 => "D1",
            Region::D2 => "D2",
            Region::Outside => "out",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleResult {
    pub region: Region,
    pub z: Option<C64>,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub z_real: f64,
    pub xi: f64,
    pub mu: f64,
}

fn d_of(z: C64, eps: f64) -> C64 {
    1.0 + eps * eps - eps * (z + z.inv())
}

/// `(F, F', F'')` at `z`, principal branches for the logarithms.
pub fn f_derivatives(z: C64, p: &MacroPoint) -> Result<(C64, C64, C64), MacroError> {
    let d = d_of(z, p.eps);
    if z.norm() < 1e-300 || d.norm() < 1e-15 {
        return Err(MacroError::Singular(z));
    }
    let zi = z.inv();
    let one_m = 1.0 - zi * zi;
    let f = p.tau * (z + zi) + 0.5 * p.mu * d.ln() - p.xi * z.ln();
    let f1 = one_m * (p.tau - 0.5 * p.mu * p.eps / d) - p.xi * zi;
    let f2 = 2.0 * p.tau * zi * zi * zi
        - 0.5 * p.mu * p.eps * (2.0 * zi * zi * zi / d + p.eps * one_m * one_m / (d * d))
        + p.xi * zi * zi;
    Ok((f, f1, f2))
}

/// Coefficients `[c0, c1, c2, c3, c4]` of
/// `Q(z) = (z²-1)(τP(z) - (με/2) z) - ξ z P(z)`, `P(z) = -εz² + (1+ε²)z - ε`,
/// which is `z² P(z) F'(z)`.
pub fn saddle_quartic(p: &MacroPoint) -> [f64; 5] {
    let e = p.eps;
    let pc = [-e, 1.0 + e * e, -e]; // P: c0, c1, c2
    // R(z) = τP(z) - (με/2) z
    let r = [p.tau * pc[0], p.tau * pc[1] - 0.5 * p.mu * e, p.tau * pc[2]];
    let mut q = [0.0; 5];
    // (z² - 1) R(z)
    for (i, ri) in r.iter().enumerate() {
        q[i + 2] += ri;
        q[i] -= ri;
    }
    // - ξ z P(z)
    for (i, pi) in pc.iter().enumerate() {
        q[i + 1] -= p.xi * pi;
    }
    q
}

fn eval_poly(c: &[f64; 5], z: C64) -> (C64, C64) {
    let mut v = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for k in (0..5).rev() {
        d = d * z + v;
        v = v * z + c[k];
    }
    (v, d)
}

/// All four roots of the saddle quartic, polished by Newton steps.
pub fn quartic_roots(p: &MacroPoint) -> Result<Vec<C64>, MacroError> {
    let c = saddle_quartic(p);
    if c[4].abs() < 1e-300 {
        return Err(MacroError::DegenerateQuartic("leading coefficient vanishes".into()));
    }
    let mut m = Matrix4::<f64>::zeros();
    for i in 1..4 {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..4 {
        m[(i, 3)] = -c[i] / c[4];
    }
    let ev = m.complex_eigenvalues();
    let mut roots = Vec::with_capacity(4);
    for r in ev.iter() {
        let mut z = *r;
        for _ in 0..8 {
            let (v, d) = eval_poly(&c, z);
            if d.norm() == 0.0 {
                break;
            }
            let step = v / d;
            z -= step;
            if step.norm() < 1e-16 * z.norm().max(1.0) {
                break;
            }
        }
        roots.push(z);
    }
    Ok(roots)
}

/// The boundary-μ lookup needed to tell `𝒟₂` from the outer region, built
/// once per `(ε, τ)`.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub eps: f64,
    pub tau: f64,
    /// Dense samples of the boundary curve, one vector per real interval of
    /// the parameter `z`.
    branches: Vec<Vec<BoundaryPoint>>,
}

impl Classifier {
    pub fn new(eps: f64, tau: f64) -> Result<Self, MacroError> {
        MacroPoint::new(0.0, 0.0, tau, eps)?;
        let mut branches = Vec::new();
        for (lo, hi) in parameter_intervals(eps) {
            let pts: Vec<BoundaryPoint> = (0..=SAMPLES)
                .filter_map(|i| {
                    let s = i as f64 / SAMPLES as f64;
                    boundary_point(eps, tau, interval_map(lo, hi, s)).ok()
                })
                .collect();
            branches.push(pts);
        }
        Ok(Self { eps, tau, branches })
    }

    /// Boundary points of the curve on the vertical line `ξ = xi`, with
    /// `μ ≥ 0`, found by bisection between samples.
    pub fn crossings(&self, xi: f64) -> Vec<BoundaryPoint> {
        let mut out = Vec::new();
        for br in &self.branches {
            for w in br.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (a.xi - xi, b.xi - xi);
                if fa == 0.0 {
                    if a.mu >= 0.0 {
                        out.push(a);
                    }
                    continue;
                }
                if fa * fb >= 0.0 {
                    continue;
                }
                if let Some(bp) = self.bisect(a.z_real, b.z_real, xi) {
                    if bp.mu >= 0.0 {
                        out.push(bp);
                    }
                }
            }
        }
        out
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, xi: f64) -> Option<BoundaryPoint> {
        let f = |z: f64| boundary_point(self.eps, self.tau, z).map(|b| b.xi - xi);
        let mut flo = f(lo).ok()?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid).ok()?;
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() <= 4.0 * f64::EPSILON * mid.abs().max(1e-300) {
                break;
            }
        }
        boundary_point(self.eps, self.tau, 0.5 * (lo + hi)).ok()
    }

    /// Largest boundary μ on the line `ξ = xi`, if the line meets the curve.
    pub fn max_boundary_mu(&self, xi: f64) -> Option<f64> {
        self.crossings(xi)
            .iter()
            .map(|b| b.mu)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    pub fn saddle(&self, xi: f64, mu: f64) -> Result<SaddleResult, MacroError> {
        let p = MacroPoint::new(xi, mu, self.tau, self.eps)?;
        if let Some(z) = upper_root(&p)? {
            return Ok(SaddleResult {
                region: Region::D1,
                z: Some(z),
                density: z.arg() / PI,
            });
        }
        let packed = xi.abs() <= mu / 2.0
            && self.max_boundary_mu(xi).is_some_and(|top| mu > top);
        Ok(if packed {
            SaddleResult {
                region: Region::D2,
                z: None,
                density: 1.0,
            }
        } else {
            SaddleResult {
                region: Region::Outside,
                z: None,
                density: 0.0,
            }
        })
    }
}

const SAMPLES: usize = 4000;

/// Open intervals of the real line avoiding `0, ε, 1/ε`.
fn parameter_intervals(eps: f64) -> [(f64, f64); 4] {
    [
        (f64::NEG_INFINITY, 0.0),
        (0.0, eps),
        (eps, 1.0 / eps),
        (1.0 / eps, f64::INFINITY),
    ]
}

/// Maps `s ∈ [0,1]` into the open interval `(lo, hi)`, staying clear of the
/// endpoints and reaching far out on the infinite ones.
fn interval_map(lo: f64, hi: f64, s: f64) -> f64 {
    let s = 1e-6 + (1.0 - 2e-6) * s;
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            // denser near the endpoints
            let u = 0.5 - 0.5 * (PI * s).cos();
            lo + (hi - lo) * u
        }
        (false, true) => hi - ((1.0 - s) / s).powi(2) * hi.abs().max(1.0),
        (true, false) => lo + (s / (1.0 - s)).powi(2) * lo.abs().max(1.0),
        (false, false) => unreachable!(),
    }
}

fn upper_root(p: &MacroPoint) -> Result<Option<C64>, MacroError> {
    let scale = p.scale();
    let mut best: Option<C64> = None;
    for z in quartic_roots(p)? {
        if z.im <= 1e-10 * z.norm().max(1.0) {
            continue;
        }
        let (_, f1, _) = match f_derivatives(z, p) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if f1.norm() > 1e-9 * scale {
            continue;
        }
        best = match best {
            Some(b) if b.im >= z.im => Some(b),
            _ => Some(z),
        };
    }
    Ok(best)
}

/// Saddle-point classification of a single point. Builds a fresh
/// [`Classifier`]; reuse one for grids.
pub fn saddle(p: &MacroPoint) -> Result<SaddleResult, MacroError> {
    Classifier::new(p.eps, p.tau)?.saddle(p.xi, p.mu)
}

/// Solves `F'(z) = F''(z) = 0` for `(ξ, μ)` at real `z`.
pub fn boundary_point(eps: f64, tau: f64, z: f64) -> Result<BoundaryPoint, MacroError> {
    let d = 1.0 + eps * eps - eps * (z + 1.0 / z);
    if z == 0.0 || !z.is_finite() || d.abs() < 1e-14 {
        return Err(MacroError::Singular(C64::new(z, 0.0)));
    }
    let zi = 1.0 / z;
    let om = 1.0 - zi * zi;
    let (a1, b1, c1) = (tau * om, -0.5 * eps * om / d, -zi);
    let (a2, b2, c2) = (
        2.0 * tau * zi * zi * zi,
        -0.5 * eps * (2.0 * zi * zi * zi / d + eps * om * om / (d * d)),
        zi * zi,
    );
    let det = b1 * c2 - b2 * c1;
    let scale = (b1.abs() + c1.abs()) * (b2.abs() + c2.abs());
    if det.abs() <= 1e-14 * scale {
        return Err(MacroError::Singular(C64::new(z, 0.0)));
    }
    let mu = (-a1 * c2 + a2 * c1) / det;
    let xi = (-b1 * a2 + b2 * a1) / det;
    Ok(BoundaryPoint { z_real: z, xi, mu })
}

/// Boundary points for the given real parameters, ordered by `z`; points
/// with `μ < 0` are dropped. Singular parameters are returned separately.
pub fn boundary_curve(
    eps: f64,
    tau: f64,
    z_samples: &[f64],
) -> (Vec<BoundaryPoint>, Vec<f64>) {
    let mut zs = z_samples.to_vec();
    zs.sort_by(|a, b| a.total_cmp(b));
    let mut pts = Vec::new();
    let mut skipped = Vec::new();
    for z in zs {
        match boundary_point(eps, tau, z) {
            Ok(b) if b.mu >= 0.0 => pts.push(b),
            Ok(_) => {}
            Err(_) => skipped.push(z),
        }
    }
    (pts, skipped)
}

/// `(μ_low, μ_high) = (ε + 1/ε - 2, ε + 1/ε + 2)`: the cusps at `τ = 1/2`.
pub fn cusp_points(eps: f64) -> (f64, f64) {
    cusp_points_at(eps, 0.5)
}

/// Cusps of the boundary on `ξ = 0` for general `τ`: `2τ(ε + 1/ε ∓ 2)`.
pub fn cusp_points_at(eps: f64, tau: f64) -> (f64, f64) {
    let s = eps + 1.0 / eps;
    (2.0 * tau * (s - 2.0), 2.0 * tau * (s + 2.0))
}

/// Closed-form density on `ξ = 0`: `arccos(s/2)/π`, `s = (1+ε²-με/(2τ))/ε`,
/// when `|s| ≤ 2`.
pub fn density_xi0(eps: f64, tau: f64, mu: f64) -> Option<f64> {
    let s = (1.0 + eps * eps - mu * eps / (2.0 * tau)) / eps;
    (s.abs() <= 2.0).then(|| (s / 2.0).acos() / PI)
}
