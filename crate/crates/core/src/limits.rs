//! Limits of the tacnode kernel and the scaling maps that lead to them.
//!
//! Small ϵ gives a kernel built from `e^{μz + z²/2}` (the GUE-minor side),
//! large ϵ at the lower cusp gives the extended Pearcey kernel. The
//! `scaled_*` functions evaluate the pre-limit kernel in the coordinates of
//! the limit so the two can be compared entry by entry.

use std::f64::consts::PI;

use crate::contour::{
    cauchy_double, integrate_adaptive, tail_truncation, Contour, KernelValue, QuadOptions, C64,
    MIN_TRUNCATION, TWO_PI_I,
};
use crate::finite::{kernel_finite, GridPoint, ModelParams, Scheme};
use crate::tacnode::{kernel_tacnode, ln_factorial, TacnodeParams, TacnodePoint};
use crate::KernelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuePoint {
    pub x: i64,
    pub mu: f64,
}

impl GuePoint {
    pub fn new(x: i64, mu: f64) -> Self {
        Self { x, mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearceyPoint {
    pub xi: f64,
    pub nu: f64,
}

impl PearceyPoint {
    pub fn new(xi: f64, nu: f64) -> Self {
        Self { xi, nu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Negative,
    Nonnegative,
}

/// Normalization of the indicator term in the small-ϵ limits: with
/// `1/|Δx|!` or without it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChiNormalization {
    Plain,
    #[default]
    Factorial,
}

/// Offset of the vertical `z` line in the small-ϵ kernels.
pub const GUE_LINE_OFFSET: f64 = 2.0;

/// Default Pearcey cross: ray angle and vertex offset.
pub const PEARCEY_ANGLE: f64 = PI / 4.0;
pub const PEARCEY_OFFSET: f64 = 0.5;

fn indicator_power(dmu: f64, k: i64, norm: ChiNormalization) -> f64 {
    let p = dmu.powi(k as i32);
    match norm {
        ChiNormalization::Plain => p,
        ChiNormalization::Factorial => p / ln_factorial(k as u64).exp(),
    }
}

/// `∮_{|w|=1} dw ∫_{Re z = 2, downward} dz e^{μ2 z + z²/2 - μ1 w - w²/2} w^p z^q / (w - z)`
fn gue_double(
    mu1: f64,
    mu2: f64,
    p: i64,
    q: i64,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let lf = |w: C64| -mu1 * w - 0.5 * w * w + p as f64 * w.ln();
    let lg = |z: C64| mu2 * z + 0.5 * z * z + q as f64 * z.ln();
    let inner = [gue_line(&lg)?];
    let outer = [Contour::circle(C64::new(0.0, 0.0), 1.0)?];
    Ok(cauchy_double(&outer, &inner, lf, lg, &QuadOptions::double(tol))?)
}

/// The vertical line `Re z = 2`, traversed downward, truncated where
/// `exp(lg)` is negligible.
fn gue_line<G: Fn(C64) -> C64>(lg: &G) -> Result<Contour, KernelError> {
    let a = C64::new(GUE_LINE_OFFSET, 0.0);
    let i = C64::new(0.0, 1.0);
    let up = tail_truncation(|r| a + i * r, |z| lg(z).re, MIN_TRUNCATION, 1e4)?;
    let down = tail_truncation(|r| a - i * r, |z| lg(z).re, MIN_TRUNCATION, 1e4)?;
    Ok(Contour::vertical_line(GUE_LINE_OFFSET, up.max(down))?.reversed())
}

fn scaled_double(v: KernelValue) -> KernelValue {
    v.scale(C64::new(1.0, 0.0) / (TWO_PI_I * TWO_PI_I))
}

/// Small-ϵ limit of the rescaled tacnode kernel on one half line.
pub fn kernel_gue_limit(
    a: &GuePoint,
    b: &GuePoint,
    branch: Branch,
    norm: ChiNormalization,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let dmu = b.mu - a.mu;
    let ordered = a.mu < b.mu;
    match branch {
        Branch::Nonnegative => {
            if a.x < 0 || b.x < 0 {
                return Ok(KernelValue::zero());
            }
            let d = scaled_double(gue_double(a.mu, b.mu, -a.x - 1, b.x, tol * 4.0 * PI * PI)?);
            let chi = if ordered && b.x <= a.x {
                -indicator_power(dmu, a.x - b.x, norm)
            } else {
                0.0
            };
            Ok(d + KernelValue::exact(C64::new(chi, 0.0)))
        }
        Branch::Negative => {
            if a.x >= 0 || b.x >= 0 {
                return Ok(KernelValue::zero());
            }
            let d = scaled_double(gue_double(a.mu, b.mu, a.x, -b.x - 1, tol * 4.0 * PI * PI)?);
            let chi = if ordered && a.x <= b.x {
                -indicator_power(dmu, b.x - a.x, norm)
            } else {
                0.0
            };
            Ok(d + KernelValue::exact(C64::new(chi, 0.0)))
        }
    }
}

/// Branch selected by the signs of the two arguments, `None` when they differ.
pub fn branch_of(a: &GuePoint, b: &GuePoint) -> Option<Branch> {
    match (a.x >= 0, b.x >= 0) {
        (true, true) => Some(Branch::Nonnegative),
        (false, false) => Some(Branch::Negative),
        _ => None,
    }
}

/// The GUE-minor kernel for `x1, x2 ≥ 0`.
pub fn kernel_gue_minor(
    a: &GuePoint,
    b: &GuePoint,
    norm: ChiNormalization,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    if a.x < 0 || b.x < 0 {
        return Err(KernelError::Domain("GUE-minor arguments must be ≥ 0".into()));
    }
    let d = scaled_double(gue_double(a.mu, b.mu, -a.x, b.x, tol * 4.0 * PI * PI)?);
    let chi = if a.mu < b.mu && b.x < a.x {
        -indicator_power(b.mu - a.mu, a.x - b.x - 1, norm)
    } else {
        0.0
    };
    Ok(d + KernelValue::exact(C64::new(chi, 0.0)))
}

/// Taylor coefficients `c_0..=c_n` of `e^{-μw - w²/2}`.
fn gauss_taylor(mu: f64, n: usize) -> Vec<f64> {
    // c_{k+1} (k+1) = -μ c_k - c_{k-1}
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    if n >= 1 {
        c[1] = -mu;
    }
    for k in 1..n {
        c[k + 1] = (-mu * c[k] - c[k - 1]) / (k + 1) as f64;
    }
    c
}

/// The double integral of [`kernel_gue_limit`] / [`kernel_gue_minor`] as a
/// finite sum: expanding `1/(w-z) = -Σ w^n / z^{n+1}` (valid since `|w| < |z|`)
/// splits it into exact circle coefficients times single line integrals.
/// `p`, `q` are the powers of `w` and `z` in the integrand.
pub fn gue_double_series(
    mu1: f64,
    mu2: f64,
    p: i64,
    q: i64,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    // ∮ e^{-μ1 w - w²/2} w^{p+n} dw = 2πi c_{-p-1-n}
    let top = -p - 1;
    if top < 0 {
        return Ok(KernelValue::zero());
    }
    let c = gauss_taylor(mu1, top as usize);
    let mut total = KernelValue::zero();
    for n in 0..=top {
        let coeff = c[(top - n) as usize];
        if coeff == 0.0 {
            continue;
        }
        let qn = q - n - 1;
        let lg = |z: C64| mu2 * z + 0.5 * z * z + qn as f64 * z.ln();
        let line = gue_line(&lg)?;
        let zi = integrate_adaptive(|z| lg(z).exp(), &line, tol, 64, 1 << 17)?;
        total = total + zi.scale(-TWO_PI_I * coeff);
    }
    Ok(scaled_double(total))
}

/// Powers `(p, q)` of `w` and `z` used by the double integrals.
pub fn gue_powers(a: &GuePoint, b: &GuePoint, kind: GueKind) -> (i64, i64) {
    match kind {
        GueKind::Limit(Branch::Nonnegative) => (-a.x - 1, b.x),
        GueKind::Limit(Branch::Negative) => (a.x, -b.x - 1),
        GueKind::Minor => (-a.x, b.x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GueKind {
    Limit(Branch),
    Minor,
}

/// Direct double quadrature of the same integrals as [`gue_double_series`].
pub fn gue_double_direct(
    mu1: f64,
    mu2: f64,
    p: i64,
    q: i64,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    Ok(scaled_double(gue_double(mu1, mu2, p, q, tol * 4.0 * PI * PI)?))
}

/// `-χ(ν1<ν2)/(2πi) ∫_{-i∞}^{i∞} e^{Δν w² - Δξ w} dw` in closed form.
pub fn pearcey_single_closed(a: &PearceyPoint, b: &PearceyPoint) -> f64 {
    let dnu = b.nu - a.nu;
    if !(a.nu < b.nu) {
        return 0.0;
    }
    let dxi = b.xi - a.xi;
    -(-dxi * dxi / (4.0 * dnu)).exp() / (2.0 * (PI * dnu).sqrt())
}

/// The same single term by quadrature along the imaginary axis.
pub fn pearcey_single_quadrature(
    a: &PearceyPoint,
    b: &PearceyPoint,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    if !(a.nu < b.nu) {
        return Ok(KernelValue::zero());
    }
    let (dnu, dxi) = (b.nu - a.nu, b.xi - a.xi);
    let f = |w: C64| dnu * w * w - dxi * w;
    let i = C64::new(0.0, 1.0);
    let t = tail_truncation(|r| i * r, |w| f(w).re, MIN_TRUNCATION, 1e4)?;
    let line = Contour::vertical_line(0.0, t)?;
    let v = integrate_adaptive(|w| f(w).exp(), &line, tol * 2.0 * PI, 64, 1 << 17)?;
    Ok(v.scale(-C64::new(1.0, 0.0) / TWO_PI_I))
}

/// Extended Pearcey kernel: `w` on the imaginary axis (upward), `z` on the
/// cross with vertices at `±offset`.
pub fn kernel_pearcey(
    a: &PearceyPoint,
    b: &PearceyPoint,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    kernel_pearcey_with(a, b, PEARCEY_ANGLE, PEARCEY_OFFSET, tol)
}

pub fn kernel_pearcey_with(
    a: &PearceyPoint,
    b: &PearceyPoint,
    angle: f64,
    offset: f64,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    if !(offset > 0.0) {
        return Err(KernelError::ContourConflict(
            "the cross must not touch the imaginary axis".into(),
        ));
    }
    let lf = |w: C64| -(0.5 * w * w * w * w + a.nu * w * w - a.xi * w);
    let lg = |z: C64| 0.5 * z * z * z * z + b.nu * z * z - b.xi * z;
    let i = C64::new(0.0, 1.0);
    let tw = tail_truncation(|r| i * r, |w| lf(w).re, MIN_TRUNCATION, 1e4)?
        .max(tail_truncation(|r| -i * r, |w| lf(w).re, MIN_TRUNCATION, 1e4)?);
    let mut tz: f64 = MIN_TRUNCATION;
    for (o, th) in [
        (offset, angle),
        (offset, -angle),
        (-offset, PI - angle),
        (-offset, angle - PI),
    ] {
        let d = C64::from_polar(1.0, th);
        tz = tz.max(tail_truncation(
            |r| C64::new(o, 0.0) + d * r,
            |z| lg(z).re,
            MIN_TRUNCATION,
            1e4,
        )?);
    }
    let outer = [Contour::vertical_line(0.0, tw)?];
    let inner = [Contour::cross(angle, tz, offset)?];
    let d = cauchy_double(&outer, &inner, lf, lg, &QuadOptions::double(tol * 4.0 * PI * PI))?;
    Ok(scaled_double(d) + KernelValue::exact(C64::new(pearcey_single_closed(a, b), 0.0)))
}

/// Levels `m = ⌊2L²(1 + μ/L)⌋` for the tacnode scaling.
pub fn tacnode_level(l: f64, mu: f64) -> Result<u32, KernelError> {
    let m = (2.0 * l * l * (1.0 + mu / l)).floor();
    if !(m >= 1.0 && m < u32::MAX as f64) {
        return Err(KernelError::Domain(format!(
            "level {m} out of range for L = {l}, μ = {mu}"
        )));
    }
    Ok(m as u32)
}

/// Grid point at integer `x` on level `m`; even levels are shifted left by
/// one half so that `x` labels `x + 1/2`.
pub fn tacnode_grid_point(x: i64, m: u32) -> GridPoint {
    let x2 = if m % 2 == 0 { 2 * x + 1 } else { 2 * x };
    GridPoint { m, x2 }
}

fn scaled_params(l: f64, eps_tac: f64) -> Result<(ModelParams, Scheme), KernelError> {
    let eps = eps_tac / l;
    if !(eps < 1.0) {
        return Err(KernelError::Domain(format!(
            "ε = ϵ/L = {eps} must be < 1"
        )));
    }
    let p = ModelParams::new(eps, eps_tac * l)?;
    // Σ needs room between the unit circle and 1/ε.
    let scheme = if 1.0 / eps > 2.0 * Scheme::DEFAULT_ANCHOR {
        Scheme::steepest()
    } else {
        Scheme::Deformed
    };
    Ok((p, scheme))
}

/// Finite kernel at `t = ϵL`, `ε = ϵ/L`, `m_j = ⌊2L²(1+μ_j/L)⌋`.
pub fn scaled_finite_for_tacnode(
    l: f64,
    eps_tac: f64,
    a: &TacnodePoint,
    b: &TacnodePoint,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let (p, scheme) = scaled_params(l, eps_tac)?;
    let pa = tacnode_grid_point(a.x, tacnode_level(l, a.mu)?);
    let pb = tacnode_grid_point(b.x, tacnode_level(l, b.mu)?);
    kernel_finite(&pa, &pb, &p, scheme, tol)
}

/// Same scaling with both points near one section: level of `a` from
/// `a.mu`, level of `b` offset from it by `dm`.
pub fn scaled_finite_nearby(
    l: f64,
    eps_tac: f64,
    a: &TacnodePoint,
    b_x: i64,
    dm: i64,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let (p, scheme) = scaled_params(l, eps_tac)?;
    let m1 = tacnode_level(l, a.mu)?;
    let m2 = m1 as i64 + dm;
    if m2 < 1 {
        return Err(KernelError::Domain(format!("level {m2} < 1")));
    }
    let m2 = m2 as u32;
    let pa = tacnode_grid_point(a.x, m1);
    // keep the same physical offset convention on the partner level
    let pb = tacnode_grid_point(b_x, m2);
    kernel_finite(&pa, &pb, &p, scheme, tol)
}

/// Limit of [`scaled_finite_nearby`]: `𝒦(x1,μ;x2,μ) - δ_{x1,x2}` when the
/// first level is the lower one.
pub fn nearby_limit(
    eps_tac: f64,
    a: &TacnodePoint,
    b_x: i64,
    dm: i64,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let params = TacnodeParams::new(eps_tac)?.with_tol(tol);
    let b = TacnodePoint::new(b_x, a.mu);
    let k = kernel_tacnode(a, &b, &params)?;
    let delta = if dm > 0 && a.x == b_x { 1.0 } else { 0.0 };
    Ok(k - KernelValue::exact(C64::new(delta, 0.0)))
}

/// `ϵ^{x2-x1} 𝒦(x1,μ1;x2,μ2)` (nonnegative branch) or `ϵ^{x1-x2} 𝒦(…)`
/// (negative branch).
pub fn scaled_tacnode_for_gue(
    eps_tac: f64,
    a: &GuePoint,
    b: &GuePoint,
    branch: Branch,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let params = TacnodeParams::new(eps_tac)?.with_tol(tol);
    let k = kernel_tacnode(
        &TacnodePoint::new(a.x, a.mu),
        &TacnodePoint::new(b.x, b.mu),
        &params,
    )?;
    let power = match branch {
        Branch::Nonnegative => b.x - a.x,
        Branch::Negative => a.x - b.x,
    };
    Ok(k.scale(C64::new(eps_tac.powi(power as i32), 0.0)))
}

/// `ϵ^{x_b+1-x_a} 𝒦(x_a-1, μ_a; x_b, μ_b)`, which tends to the GUE-minor
/// kernel entry.
pub fn scaled_endpoint_for_gue_minor(
    eps_tac: f64,
    a: &GuePoint,
    b: &GuePoint,
    tol: f64,
) -> Result<KernelValue, KernelError> {
    let params = TacnodeParams::new(eps_tac)?.with_tol(tol);
    let k = kernel_tacnode(
        &TacnodePoint::new(a.x - 1, a.mu),
        &TacnodePoint::new(b.x, b.mu),
        &params,
    )?;
    Ok(k.scale(C64::new(eps_tac.powi((b.x + 1 - a.x) as i32), 0.0)))
}

/// Pearcey scaling of the tacnode kernel: `ϵ = M`, `μ = -2M + ν`,
/// `x = ⌊ξ√M⌋`, prefactor `e^{2M(ν1-ν2)} √M`. Returns the scaled value and
/// the lattice-effective arguments `((x+1/2)/√M, ν)` at which it approximates the
/// Pearcey kernel.
pub fn scaled_tacnode_for_pearcey(
    m: f64,
    a: &PearceyPoint,
    b: &PearceyPoint,
    tol: f64,
) -> Result<(KernelValue, PearceyPoint, PearceyPoint), KernelError> {
    if !(m > 0.0) {
        return Err(KernelError::Domain(format!("M must be positive, got {m}")));
    }
    let s = m.sqrt();
    let xa = (a.xi * s).floor() as i64;
    let xb = (b.xi * s).floor() as i64;
    let (anchor, angle) = pearcey_sigma(m);
    let params = TacnodeParams::new(m)?.with_tol(tol).with_sigma(anchor, angle);
    let k = kernel_tacnode(
        &TacnodePoint::new(xa, -2.0 * m + a.nu),
        &TacnodePoint::new(xb, -2.0 * m + b.nu),
        &params,
    )?;
    let pref = (2.0 * m * (a.nu - b.nu)).exp() * s;
    Ok((
        k.scale(C64::new(pref, 0.0)),
        // x ↦ -1-x is the lattice reflection, so sites are centred at x + 1/2
        PearceyPoint::new((xa as f64 + 0.5) / s, a.nu),
        PearceyPoint::new((xb as f64 + 0.5) / s, b.nu),
    ))
}

/// Σ passing the saddle `z = 1` at distance of order `M^{-1/2}` and leaving
/// it along the steepest-descent directions of `z⁴`.
pub fn pearcey_sigma(m: f64) -> (f64, f64) {
    let angle = 0.3 * PI;
    let anchor = (1.0 + 1.5 / m.sqrt()).max(1.05 / angle.sin());
    (anchor, angle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearcey_single_closed_values() {
        let a = PearceyPoint::new(0.0, 0.0);
        let v = pearcey_single_closed(&a, &PearceyPoint::new(0.0, 1.0));
        assert!((v + 0.282_094_791_773_878_14).abs() < 1e-15);
        let v = pearcey_single_closed(&a, &PearceyPoint::new(2.0, 1.0));
        assert!((v + (-1.0f64).exp() / (2.0 * PI.sqrt())).abs() < 1e-15);
        assert_eq!(pearcey_single_closed(&PearceyPoint::new(0.0, 1.0), &a), 0.0);
    }

    #[test]
    fn pearcey_single_quadrature_matches() {
        for dnu in [0.5, 1.0, 2.0] {
            for dxi in [0.0, 1.0, 3.0] {
                let a = PearceyPoint::new(0.3, -0.2);
                let b = PearceyPoint::new(0.3 + dxi, -0.2 + dnu);
                let q = pearcey_single_quadrature(&a, &b, 1e-12).unwrap();
                assert!((q.value - pearcey_single_closed(&a, &b)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn gauss_taylor_matches_exp() {
        let mu = 0.7;
        let c = gauss_taylor(mu, 30);
        let w: f64 = 0.4;
        let s: f64 = c.iter().enumerate().map(|(k, ck)| ck * w.powi(k as i32)).sum();
        assert!((s - (-mu * w - 0.5 * w * w).exp()).abs() < 1e-15);
    }

    #[test]
    fn mixed_signs_vanish() {
        let a = GuePoint::new(-1, 0.2);
        let b = GuePoint::new(1, 0.5);
        for br in [Branch::Negative, Branch::Nonnegative] {
            let v = kernel_gue_limit(&a, &b, br, ChiNormalization::Factorial, 1e-10).unwrap();
            assert_eq!(v.value, C64::new(0.0, 0.0));
        }
        assert_eq!(branch_of(&a, &b), None);
    }

    #[test]
    fn gue_minor_chi_vanishes_for_ordered_x() {
        let a = GuePoint::new(1, 0.0);
        let b = GuePoint::new(1, 0.5);
        let d = gue_double_direct(0.0, 0.5, -1, 1, 1e-11).unwrap();
        let k = kernel_gue_minor(&a, &b, ChiNormalization::Factorial, 1e-11).unwrap();
        assert!((k.value - d.value).norm() < 1e-12);
    }

    #[test]
    fn gue_minor_vanishes_at_zero() {
        let a = GuePoint::new(0, 0.1);
        for x in 0..3 {
            let v = kernel_gue_minor(&a, &GuePoint::new(x, -0.4), ChiNormalization::Factorial, 1e-11)
                .unwrap();
            assert!(v.value.norm() < 1e-10);
        }
    }

    #[test]
    fn levels_and_grid() {
        assert_eq!(tacnode_level(8.0, 0.0).unwrap(), 128);
        assert_eq!(tacnode_level(8.0, 0.5).unwrap(), 136);
        assert!(tacnode_level(1.0, -1.0).is_err());
        let g = tacnode_grid_point(0, 128);
        assert_eq!(g.x2, 1);
        assert_eq!(g.floor_x(), 0);
        let g = tacnode_grid_point(-3, 129);
        assert_eq!(g.floor_x(), -3);
        assert!(GridPoint::new(g.x2, g.m).is_ok());
    }
}
