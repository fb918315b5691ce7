//! The tacnode kernel
//!
//! ```text
//! 𝒦(x1,μ1; x2,μ2) = -χ(μ1<μ2) I_{x2-x1}(2ϵ(μ2-μ1))
//!   + 1/(2πi)² ∮_{|w|=1} dw ∫_{Σ∪Σ⁻¹} dz
//!       e^{ϵμ2(z+1/z) + ϵ²/2 (z+1/z)²} w^{x1}
//!     / (e^{ϵμ1(w+1/w) + ϵ²/2 (w+1/w)²} z^{x2}) · 1/(z(w-z))
//! ```
//!
//! `Σ` is a ray pair in the right half plane traversed from `+i∞` to `-i∞`,
//! so that together with an arc at infinity it circles the right half plane
//! counter-clockwise. `Σ⁻¹` is its image under `z ↦ 1/z`, with the pulled-back
//! orientation.

use std::f64::consts::PI;

use crate::contour::{
    cauchy_double, integrate_adaptive, ray_pair_truncation, Contour, KernelValue, QuadOptions,
    C64, TWO_PI_I,
};
use crate::KernelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TacnodePoint {
    pub x: i64,
    pub mu: f64,
}

impl TacnodePoint {
    pub fn new(x: i64, mu: f64) -> Self {
        Self { x, mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TacnodeParams {
    pub eps_tac: f64,
    pub tol: f64,
    pub anchor: f64,
    pub angle: f64,
}

impl TacnodeParams {
    pub fn new(eps_tac: f64) -> Result<Self, KernelError> {
        if !(eps_tac > 0.0 && eps_tac.is_finite()) {
            return Err(KernelError::Domain(format!(
                "eps_tac must be positive, got {eps_tac}"
            )));
        }
        Ok(Self {
            eps_tac,
            tol: 1e-10,
            anchor: 2.0,
            angle: 3.0 * PI / 8.0,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_sigma(mut self, anchor: f64, angle: f64) -> Self {
        self.anchor = anchor;
        self.angle = angle;
        self
    }
}

/// `I_k(2a)` from its power series.
pub fn chi_term_bessel(k: i64, a: f64) -> f64 {
    let k = k.unsigned_abs();
    if a == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    // first term a^k / k!, computed in logs to survive large k
    let log_first = k as f64 * a.abs().ln() - ln_factorial(k);
    let sign = if a < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    let a2 = a * a;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut j = 0u64;
    loop {
        term *= a2 / ((j + 1) as f64 * (k + j + 1) as f64);
        sum += term;
        j += 1;
        if term < 1e-17 * sum {
            break;
        }
    }
    sign * (log_first.exp() * sum)
}

pub(crate) fn ln_factorial(n: u64) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// `(1/2πi) ∮_{|w|=1} e^{a(w+1/w)} w^{-k-1} dw` by quadrature; equals
/// [`chi_term_bessel`]`(k, a)`.
pub fn chi_term_quadrature(k: i64, a: f64, tol: f64) -> Result<KernelValue, KernelError> {
    let c = Contour::circle(C64::new(0.0, 0.0), 1.0)?;
    let v = integrate_adaptive(
        |w| (a * (w + w.inv()) - (k + 1) as f64 * w.ln()).exp(),
        &c,
        tol * 2.0 * PI,
        64,
        1 << 17,
    )?;
    Ok(v.scale(C64::new(1.0, 0.0) / TWO_PI_I))
}

/// The single-integral part `-χ(μ1<μ2) I_{x2-x1}(2ϵ(μ2-μ1))`.
pub fn chi_part(a: &TacnodePoint, b: &TacnodePoint, eps_tac: f64) -> f64 {
    if a.mu < b.mu {
        -chi_term_bessel(b.x - a.x, eps_tac * (b.mu - a.mu))
    } else {
        0.0
    }
}

fn sigma_contours<G>(anchor: f64, angle: f64, lg: G) -> Result<Vec<Contour>, KernelError>
where
    G: Fn(C64) -> C64,
{
    let t_out = ray_pair_truncation(anchor, angle, |z| lg(z).re)?;
    let t_in = ray_pair_truncation(anchor, angle, |s| lg(s.inv()).re - 2.0 * s.norm().ln())?;
    Ok(vec![
        Contour::ray_pair(anchor, angle, t_out)?.reversed(),
        Contour::ray_pair(anchor, angle, t_in)?.reversed().inverted()?,
    ])
}

/// The double-integral part of the kernel.
pub fn double_part(
    a: &TacnodePoint,
    b: &TacnodePoint,
    params: &TacnodeParams,
) -> Result<KernelValue, KernelError> {
    let e = params.eps_tac;
    if !(params.anchor * params.angle.sin() > 1.0) {
        return Err(KernelError::ContourConflict(format!(
            "Σ (anchor {}, angle {}) meets the unit circle",
            params.anchor, params.angle
        )));
    }
    let (x1, mu1, x2, mu2) = (a.x as f64, a.mu, b.x as f64, b.mu);
    let lf = |w: C64| {
        let s = w + w.inv();
        -e * mu1 * s - 0.5 * e * e * s * s + x1 * w.ln()
    };
    let lg = |z: C64| {
        let s = z + z.inv();
        e * mu2 * s + 0.5 * e * e * s * s - (x2 + 1.0) * z.ln()
    };
    let inner = sigma_contours(params.anchor, params.angle, lg)?;
    let outer = [Contour::circle(C64::new(0.0, 0.0), 1.0)?];
    let four_pi2 = 4.0 * PI * PI;
    let v = cauchy_double(
        &outer,
        &inner,
        lf,
        lg,
        &QuadOptions::double(params.tol * four_pi2),
    )?;
    Ok(v.scale(C64::new(1.0, 0.0) / (TWO_PI_I * TWO_PI_I)))
}

pub fn kernel_tacnode(
    a: &TacnodePoint,
    b: &TacnodePoint,
    params: &TacnodeParams,
) -> Result<KernelValue, KernelError> {
    let d = double_part(a, b, params)?;
    Ok(d + KernelValue::exact(C64::new(chi_part(a, b, params.eps_tac), 0.0)))
}

/// `ϵ (𝒦(x_a-1, μ_a; x_b, μ_b) + 𝒦(x_a+1, μ_a; x_b, μ_b))`, the entry of the
/// matrix whose determinants are the scaled endpoint correlations.
pub fn endpoint_kernel(
    a: &TacnodePoint,
    b: &TacnodePoint,
    params: &TacnodeParams,
) -> Result<KernelValue, KernelError> {
    let lo = kernel_tacnode(&TacnodePoint::new(a.x - 1, a.mu), b, params)?;
    let hi = kernel_tacnode(&TacnodePoint::new(a.x + 1, a.mu), b, params)?;
    Ok((lo + hi).scale(C64::new(params.eps_tac, 0.0)))
}
