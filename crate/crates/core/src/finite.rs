//! The finite-time correlation kernel `K(x1, m1; x2, m2)`.
//!
//! ```text
//! K = -χ(m1<m2)/(2πi) ∮ (1-εw)^{a1-a2} (1-ε/w)^{b1-b2} w^{⌊x1⌋-⌊x2⌋} dw/w
//!     + 1/(2πi)² ∮dw ∮dz  G_{m1,x1}(w) / G_{m2,x2}(z) · 1/(z(w-z))
//!
//! G_{m,x}(w) = e^{t(w+1/w)} (1-εw)^{a} (1-ε/w)^{b} w^{⌊x⌋},  a = ⌊m/2⌋, b = ⌊(m+1)/2⌋
//! ```
//!
//! Three contour schemes are available. They compute the same function and
//! differ only in conditioning:
//!
//! - [`Scheme::Original`]: `w` on a small circle around 0, `z` on one circle
//!   around both poles `ε` and `1/ε`.
//! - [`Scheme::Deformed`]: `w` on the unit circle, `z` on two small circles
//!   around `ε` and `1/ε`. The residue picked up at `w = z` is absorbed by
//!   running the single integral over the unit circle as well.
//! - [`Scheme::Steepest`]: `w` on the unit circle, `z` on a ray pair `Σ` that
//!   separates `1` from `1/ε` plus its image `Σ⁻¹` under `z ↦ 1/z`. This is
//!   the only scheme that stays accurate when `m` is in the thousands.

use std::f64::consts::PI;

use crate::contour::{
    cauchy_double, integrate_adaptive, ray_pair_truncation, Contour, KernelValue, QuadOptions,
    C64, TWO_PI_I,
};
use crate::extended::{self, Circle, Monomial};
use crate::KernelError;

/// A site of the interlacing grid, `x = x2/2` with `x ∈ ℤ + (m+1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint {
    pub m: u32,
    pub x2: i64,
}

impl GridPoint {
    pub fn new(x2: i64, m: u32) -> Result<Self, KernelError> {
        if m == 0 || (x2 + m as i64 + 1).rem_euclid(2) != 0 {
            return Err(KernelError::OffGrid { x2, m });
        }
        Ok(Self { m, x2 })
    }

    /// Grid point at the physical position `x`; `2x` must be an integer.
    pub fn at(x: f64, m: u32) -> Result<Self, KernelError> {
        let x2 = 2.0 * x;
        if x2.fract() != 0.0 || !x2.is_finite() {
            return Err(KernelError::OffGrid { x2: x2 as i64, m });
        }
        Self::new(x2 as i64, m)
    }

    pub fn x(&self) -> f64 {
        self.x2 as f64 / 2.0
    }

    /// `⌊x⌋`
    pub fn floor_x(&self) -> i64 {
        self.x2.div_euclid(2)
    }

    /// Exponent of `(1 - εw)` in `G`.
    pub fn a(&self) -> i64 {
        (self.m / 2) as i64
    }

    /// Exponent of `(1 - ε/w)` in `G`.
    pub fn b(&self) -> i64 {
        self.m.div_ceil(2) as i64
    }

    /// Same level, `x` shifted by `dx`.
    pub fn shifted(&self, dx: i64) -> Self {
        Self {
            m: self.m,
            x2: self.x2 + 2 * dx,
        }
    }
}

/// Jump-rate parameter `ε ∈ (0,1)` and time `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eps: f64,
    pub t: f64,
}

impl ModelParams {
    pub fn new(eps: f64, t: f64) -> Result<Self, KernelError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(KernelError::Domain(format!("eps must lie in (0,1), got {eps}")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(KernelError::Domain(format!("t must be finite and ≥ 0, got {t}")));
        }
        Ok(Self { eps, t })
    }
}

/// Contour configuration used by [`kernel_finite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Original,
    Deformed,
    Steepest { anchor: f64, angle: f64 },
}

impl Scheme {
    pub const DEFAULT_ANCHOR: f64 = 2.0;
    pub const DEFAULT_ANGLE: f64 = 3.0 * PI / 8.0;

    pub fn steepest() -> Self {
        Scheme::Steepest {
            anchor: Self::DEFAULT_ANCHOR,
            angle: Self::DEFAULT_ANGLE,
        }
    }
}

fn log_g_raw(p: &ModelParams, a: i64, b: i64, fx: i64, w: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let mut s = (w + w.inv()) * p.t;
    if a != 0 {
        s += (one - w * p.eps).ln() * a as f64;
    }
    if b != 0 {
        s += (one - w.inv() * p.eps).ln() * b as f64;
    }
    if fx != 0 {
        s += w.ln() * fx as f64;
    }
    s
}

/// `log G_{t,m,x}(w)` with principal branches. All exponents are integers,
/// so `exp` of the result is `G` exactly.
pub fn log_g(p: &ModelParams, m: u32, x: f64, w: C64) -> Result<C64, KernelError> {
    let tiny = 1e-14;
    if w.norm() <= tiny || (w - p.eps).norm() <= tiny || (w - 1.0 / p.eps).norm() <= tiny / p.eps
    {
        return Err(KernelError::Singular(w));
    }
    let a = (m / 2) as i64;
    let b = m.div_ceil(2) as i64;
    Ok(log_g_raw(p, a, b, x.floor() as i64, w))
}

/// Contours for the double integral (outer `w`, inner `z`) and the circle
/// carrying the single integral.
struct Layout {
    w: Vec<Contour>,
    z: Vec<Contour>,
    chi: Contour,
}

fn origin() -> C64 {
    C64::new(0.0, 0.0)
}

fn layout(
    p: &ModelParams,
    p2: &GridPoint,
    scheme: Scheme,
) -> Result<Layout, KernelError> {
    let eps = p.eps;
    match scheme {
        Scheme::Original => Err(KernelError::Unsupported(
            "the original scheme is evaluated in extended precision".into(),
        )),
        Scheme::Deformed => {
            let unit = Contour::circle(origin(), 1.0)?;
            let r_eps = (eps / 2.0).min((1.0 - eps) / 2.0);
            let r_inv = (1.0 / eps - 1.0) / 2.0;
            Ok(Layout {
                w: vec![unit.clone()],
                z: vec![
                    Contour::circle(C64::new(eps, 0.0), r_eps)?,
                    Contour::circle(C64::new(1.0 / eps, 0.0), r_inv)?,
                ],
                chi: unit,
            })
        }
        Scheme::Steepest { anchor, angle } => {
            if !(p.t > 0.0) {
                return Err(KernelError::ContourConflict(
                    "the steepest scheme needs t > 0 for decay along Σ".into(),
                ));
            }
            if !(anchor < 1.0 / eps) {
                return Err(KernelError::ContourConflict(format!(
                    "Σ anchor {anchor} must lie left of the pole 1/ε = {}",
                    1.0 / eps
                )));
            }
            if !(anchor * angle.sin() > 1.0) {
                return Err(KernelError::ContourConflict(format!(
                    "Σ (anchor {anchor}, angle {angle}) meets the unit circle"
                )));
            }
            let (a2, b2, f2) = (p2.a(), p2.b(), p2.floor_x());
            let lg = |z: C64| -log_g_raw(p, a2, b2, f2, z) - z.ln();
            let t_out = ray_pair_truncation(anchor, angle, |z| lg(z).re)?;
            let t_in = ray_pair_truncation(anchor, angle, |s| {
                lg(s.inv()).re - 2.0 * s.norm().ln()
            })?;
            let sigma = Contour::ray_pair(anchor, angle, t_out)?.reversed();
            let sigma_inv = Contour::ray_pair(anchor, angle, t_in)?.reversed().inverted()?;
            Ok(Layout {
                w: vec![Contour::circle(origin(), 1.0)?],
                z: vec![sigma, sigma_inv],
                chi: Contour::circle(origin(), 1.0)?,
            })
        }
    }
}

/// `K(p1; p2)` at absolute tolerance `tol`.
pub fn kernel_finite(
    p1: &GridPoint,
    p2: &GridPoint,
    params: &ModelParams,
    scheme: Scheme,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    if scheme == Scheme::Original {
        return kernel_original(p1, p2, params, tol);
    }
    let lay = layout(params, p2, scheme)?;
    let (a1, b1, f1) = (p1.a(), p1.b(), p1.floor_x());
    let (a2, b2, f2) = (p2.a(), p2.b(), p2.floor_x());

    let four_pi2 = 4.0 * PI * PI;
    let double = cauchy_double(
        &lay.w,
        &lay.z,
        |w| log_g_raw(params, a1, b1, f1, w),
        |z| -log_g_raw(params, a2, b2, f2, z) - z.ln(),
        &QuadOptions::double(tol * four_pi2),
    )?;
    let mut out = double.scale(C64::new(1.0, 0.0) / (TWO_PI_I * TWO_PI_I));

    if p1.m < p2.m {
        let (da, db, k) = (a1 - a2, b1 - b2, f1 - f2);
        let eps = params.eps;
        let one = C64::new(1.0, 0.0);
        let single = integrate_adaptive(
            |w| {
                ((one - w * eps).ln() * da as f64
                    + (one - w.inv() * eps).ln() * db as f64
                    + w.ln() * (k - 1) as f64)
                    .exp()
            },
            &lay.chi,
            tol * 2.0 * PI,
            64,
            1 << 17,
        )?;
        out = out - single.scale(one / TWO_PI_I);
    }
    Ok(out)
}

/// The original contours carry integrands far larger than the kernel, so
/// the sums run in extended precision.
fn kernel_original(
    p1: &GridPoint,
    p2: &GridPoint,
    params: &ModelParams,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let eps = params.eps;
    let small = Circle {
        center: 0.0,
        radius: eps / 4.0,
    };
    let big = Circle {
        center: (eps + 1.0 / eps) / 2.0,
        radius: (1.0 / eps - eps) / 2.0 + eps / 4.0,
    };
    let f = Monomial {
        c: params.t,
        eps,
        a: p1.a(),
        b: p1.b(),
        k: p1.floor_x(),
    };
    let g = Monomial {
        c: -params.t,
        eps,
        a: -p2.a(),
        b: -p2.b(),
        k: -p2.floor_x() - 1,
    };
    let four_pi2 = 4.0 * PI * PI;
    let double = extended::cauchy(small, big, &f, &g, &QuadOptions::double(tol * four_pi2))?;
    let one = C64::new(1.0, 0.0);
    let mut out = double.scale(one / (TWO_PI_I * TWO_PI_I));
    if p1.m < p2.m {
        let h = Monomial {
            c: 0.0,
            eps,
            a: p1.a() - p2.a(),
            b: p1.b() - p2.b(),
            k: p1.floor_x() - p2.floor_x() - 1,
        };
        let single = extended::single(small, &h, &QuadOptions::with_tol(tol * 2.0 * PI))?;
        out = out - single.scale(one / TWO_PI_I);
    }
    Ok(out)
}

/// `(1/2πi) ∮ (1-εw)^A (1-ε/w)^B w^{k-1} dw` around the origin for `A, B ≥ 0`:
/// the constant Laurent coefficient of `(1-εw)^A (1-ε/w)^B w^k`.
pub fn laurent_coeff(a: i64, b: i64, k: i64, eps: f64) -> Result<f64, KernelError> {
    if a < 0 || b < 0 {
        return Err(KernelError::Unsupported(format!(
            "negative binomial exponent (A = {a}, B = {b})"
        )));
    }
    // Σ_j C(A,j) C(B,j+k) (-ε)^{2j+k}
    let mut s = 0.0;
    for j in 0..=a {
        let l = j + k;
        if l < 0 || l > b {
            continue;
        }
        s += binom(a, j) * binom(b, l) * (-eps).powi((j + l) as i32);
    }
    Ok(s)
}

/// Exact value of `(1/2πi) ∮` of the single-integral integrand of the
/// kernel for levels `m1`, `m2` and `k = ⌊x1⌋ - ⌊x2⌋`.
pub fn chi_coeff_oracle(m1: u32, m2: u32, k: i64, eps: f64) -> Result<f64, KernelError> {
    let a = (m1 / 2) as i64 - (m2 / 2) as i64;
    let b = m1.div_ceil(2) as i64 - m2.div_ceil(2) as i64;
    laurent_coeff(a, b, k, eps)
}

fn binom(n: i64, k: i64) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Residuals of the level-shift identities for odd levels `n`, `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceResiduals {
    /// `|K(x,n+2;y,m) - (1+ε²)K(x,n;y,m) + ε(K(x+1,n;y,m)+K(x-1,n;y,m)) - c|`
    pub rec1: f64,
    /// `|K(x,n;y,m-2) - (1+ε²)K(x,n;y,m) + ε(K(x,n;y+1,m)+K(x,n;y-1,m)) - c|`
    pub rec2: f64,
    /// `(-K(x,n+2;y,m) + K(x,n;y,m) + K(x,n+2;y,m+2) - K(x,n;y,m+2) - δ) / ε²`
    pub rec5_over_eps2: f64,
    /// Sum of the quadrature error estimates that entered the residuals.
    pub err: f64,
}

/// Correction term `c = δ_{n,m-2} · (1/2πi)∮ w^{x-y-1} dw` shared by the
/// first two identities.
pub fn recurrence_correction(x: i64, y: i64, n: u32, m: u32, eps: f64) -> f64 {
    if n + 2 != m {
        return 0.0;
    }
    chi_coeff_oracle(n + 2, m, x - y, eps).unwrap_or(0.0)
}

pub fn recurrence_residuals(
    x: i64,
    y: i64,
    n: u32,
    m: u32,
    params: &ModelParams,
    scheme: Scheme,
    tol: f64,
) -> Result<RecurrenceResiduals, KernelError> {
    if n % 2 == 0 || m % 2 == 0 || m < 3 {
        return Err(KernelError::Domain(format!(
            "levels must be odd with m ≥ 3, got n = {n}, m = {m}"
        )));
    }
    let eps = params.eps;
    let gp = |x: i64, lvl: u32| GridPoint::new(2 * x, lvl);
    let k = |x1: i64, n1: u32, y1: i64, m1: u32| -> Result<KernelValue, KernelError> {
        kernel_finite(&gp(x1, n1)?, &gp(y1, m1)?, params, scheme, tol)
    };
    let c = recurrence_correction(x, y, n, m, eps);
    let e2 = 1.0 + eps * eps;

    let base = k(x, n, y, m)?;
    let lhs1 = k(x, n + 2, y, m)?;
    let xp = k(x + 1, n, y, m)?;
    let xm = k(x - 1, n, y, m)?;
    let r1 = lhs1.value - base.value * e2 + (xp.value + xm.value) * eps - c;

    let lhs2 = k(x, n, y, m - 2)?;
    let yp = k(x, n, y + 1, m)?;
    let ym = k(x, n, y - 1, m)?;
    let r2 = lhs2.value - base.value * e2 + (yp.value + ym.value) * eps - c;

    let up = k(x, n + 2, y, m + 2)?;
    let cross = k(x, n, y, m + 2)?;
    let delta = if n == m && x == y { 1.0 } else { 0.0 };
    let r5 = -lhs1.value + base.value + up.value - cross.value - delta;

    let err = [base, lhs1, xp, xm, lhs2, yp, ym, up, cross]
        .iter()
        .map(|v| v.err)
        .sum();
    Ok(RecurrenceResiduals {
        rec1: r1.norm(),
        rec2: r2.norm(),
        rec5_over_eps2: r5.re / (eps * eps),
        err,
    })
}
