//! Extended-precision trapezoidal sums on circles.
//!
//! Integrand values are computed with 128-bit arithmetic and rounded to
//! double-double; the Cauchy sums run in double-double. Used where the
//! integrand on the contour is many orders of magnitude larger than the
//! integral.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use twofloat::TwoFloat;

use crate::contour::{refine_with, KernelValue, QuadError, QuadOptions, C64};

const P: usize = 128;
const RM: RoundingMode = RoundingMode::ToEven;
/// Relative round-off of the double-double sums, with headroom.
const DD_ROUNDOFF: f64 = 256.0 * 1.232_595_164_407_831e-32;

/// `e^{c(u + 1/u)} (1 - εu)^a (1 - ε/u)^b u^k`
#[derive(Debug, Clone, Copy)]
pub(crate) struct Monomial {
    pub c: f64,
    pub eps: f64,
    pub a: i64,
    pub b: i64,
    pub k: i64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Circle {
    pub center: f64,
    pub radius: f64,
}

#[derive(Clone)]
struct Big {
    re: BigFloat,
    im: BigFloat,
}

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x, P)
}

impl Big {
    fn real(x: BigFloat) -> Self {
        Self { re: x, im: bf(0.0) }
    }

    fn add(&self, o: &Big) -> Big {
        Big {
            re: self.re.add(&o.re, P, RM),
            im: self.im.add(&o.im, P, RM),
        }
    }

    fn mul(&self, o: &Big) -> Big {
        let re = self.re.mul(&o.re, P, RM).sub(&self.im.mul(&o.im, P, RM), P, RM);
        let im = self.re.mul(&o.im, P, RM).add(&self.im.mul(&o.re, P, RM), P, RM);
        Big { re, im }
    }

    fn scale(&self, x: &BigFloat) -> Big {
        Big {
            re: self.re.mul(x, P, RM),
            im: self.im.mul(x, P, RM),
        }
    }

    fn inv(&self) -> Big {
        let n = self.re.mul(&self.re, P, RM).add(&self.im.mul(&self.im, P, RM), P, RM);
        Big {
            re: self.re.div(&n, P, RM),
            im: self.im.neg().div(&n, P, RM),
        }
    }

    fn powi(&self, k: i64) -> Big {
        let mut base = if k < 0 { self.inv() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Big::real(bf(1.0));
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    fn exp(&self, cc: &mut Consts) -> Big {
        let m = self.re.exp(P, RM, cc);
        Big {
            re: self.im.cos(P, RM, cc).mul(&m, P, RM),
            im: self.im.sin(P, RM, cc).mul(&m, P, RM),
        }
    }

    fn to_dd(&self) -> DdC {
        DdC {
            re: to_dd(&self.re),
            im: to_dd(&self.im),
        }
    }
}

/// Leading 53 bits of `x`, truncated.
fn leading_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let Some((m, _, sign, e, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    let top = *m.last().expect("normalised mantissa") as u64;
    // x = 0.top… × 2^e
    let v = (top >> 11) as f64 * 2f64.powi(e - 53);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

fn to_dd(x: &BigFloat) -> TwoFloat {
    let hi = leading_f64(x);
    let lo = leading_f64(&x.sub(&bf(hi), P, RM));
    TwoFloat::new_add(hi, lo)
}

#[derive(Clone, Copy)]
struct DdC {
    re: TwoFloat,
    im: TwoFloat,
}

impl DdC {
    fn zero() -> Self {
        Self {
            re: TwoFloat::from(0.0),
            im: TwoFloat::from(0.0),
        }
    }

    fn add(self, o: DdC) -> DdC {
        DdC {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn sub(self, o: DdC) -> DdC {
        DdC {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }

    fn mul(self, o: DdC) -> DdC {
        DdC {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn div(self, o: DdC) -> DdC {
        let inv = TwoFloat::from(1.0) / (o.re * o.re + o.im * o.im);
        DdC {
            re: (self.re * o.re + self.im * o.im) * inv,
            im: (self.im * o.re - self.re * o.im) * inv,
        }
    }

    fn to_c64(self) -> C64 {
        C64::new(self.re.hi() + self.re.lo(), self.im.hi() + self.im.lo())
    }

    fn l1(self) -> f64 {
        self.re.hi().abs() + self.im.hi().abs()
    }
}

/// Trapezoidal samples `u_j` and `f(u_j) · i r e^{iθ_j}` on a circle,
/// extended in place when the node count doubles.
struct Samples {
    circle: Circle,
    f: Monomial,
    nodes: Vec<DdC>,
    vals: Vec<DdC>,
}

impl Samples {
    fn new(circle: Circle, f: Monomial) -> Self {
        Self {
            circle,
            f,
            nodes: Vec::new(),
            vals: Vec::new(),
        }
    }

    fn sample(&self, j: usize, n: usize, cc: &mut Consts) -> (DdC, DdC) {
        let f = &self.f;
        let pi = cc.pi(P, RM);
        let th = pi.mul(&bf(2.0 * j as f64), P, RM).div(&bf(n as f64), P, RM);
        let e = Big {
            re: th.cos(P, RM, cc),
            im: th.sin(P, RM, cc),
        };
        let r = bf(self.circle.radius);
        let u = Big::real(bf(self.circle.center)).add(&e.scale(&r));
        let ui = u.inv();
        let one = Big::real(bf(1.0));
        let minus_eps = bf(-f.eps);
        let mut v = Big::real(bf(1.0));
        if f.c != 0.0 {
            v = u.add(&ui).scale(&bf(f.c)).exp(cc);
        }
        if f.a != 0 {
            v = v.mul(&one.add(&u.scale(&minus_eps)).powi(f.a));
        }
        if f.b != 0 {
            v = v.mul(&one.add(&ui.scale(&minus_eps)).powi(f.b));
        }
        if f.k != 0 {
            v = v.mul(&u.powi(f.k));
        }
        let w = Big {
            re: e.im.neg(),
            im: e.re.clone(),
        }
        .scale(&r);
        (u.to_dd(), v.mul(&w).to_dd())
    }

    /// Brings the sample set to `n` nodes.
    fn ensure(&mut self, n: usize, cc: &mut Consts) {
        let have = self.nodes.len();
        if have == n {
            return;
        }
        let fresh = |s: &Self, js: &mut dyn Iterator<Item = usize>, cc: &mut Consts| {
            js.map(|j| s.sample(j, n, cc)).collect::<Vec<_>>()
        };
        if have > 0 && n == 2 * have {
            let odd = fresh(self, &mut (1..n).step_by(2), cc);
            let mut nodes = Vec::with_capacity(n);
            let mut vals = Vec::with_capacity(n);
            for (j, (u, v)) in odd.into_iter().enumerate() {
                nodes.push(self.nodes[j]);
                vals.push(self.vals[j]);
                nodes.push(u);
                vals.push(v);
            }
            self.nodes = nodes;
            self.vals = vals;
        } else {
            let all = fresh(self, &mut (0..n), cc);
            (self.nodes, self.vals) = all.into_iter().unzip();
        }
    }

    fn step(n: usize) -> TwoFloat {
        TwoFloat::from(2.0 * std::f64::consts::PI) / TwoFloat::from(n as f64)
            + TwoFloat::from(2.0 * 1.224_646_799_147_353_2e-16) / TwoFloat::from(n as f64)
    }
}

fn consts() -> Result<Consts, QuadError> {
    Consts::new().map_err(|e| QuadError::InvalidContour(format!("constant cache: {e:?}")))
}

fn scale_dd(z: DdC, s: TwoFloat) -> DdC {
    DdC {
        re: z.re * s,
        im: z.im * s,
    }
}

/// `∮ f(u) du` around `circle`.
pub(crate) fn single(circle: Circle, f: &Monomial, opts: &QuadOptions) -> Result<KernelValue, QuadError> {
    let mut cc = consts()?;
    let mut s = Samples::new(circle, *f);
    refine_with(
        |n| {
            s.ensure(n, &mut cc);
            let mut acc = DdC::zero();
            let mut mag = 0.0;
            for v in &s.vals {
                acc = acc.add(*v);
                mag += v.l1();
            }
            let h = Samples::step(n);
            Ok((scale_dd(acc, h).to_c64(), mag * h.hi()))
        },
        opts,
        DD_ROUNDOFF,
    )
}

/// `∮_outer dw ∮_inner dz f(w) g(z) / (w - z)` for circles with
/// `max |w| < min |z|`, through `1/(w - z) = -Σ_n w^n / z^{n+1}`.
pub(crate) fn cauchy(
    outer: Circle,
    inner: Circle,
    f: &Monomial,
    g: &Monomial,
    opts: &QuadOptions,
) -> Result<KernelValue, QuadError> {
    let w_max = outer.center.abs() + outer.radius;
    let z_min = inner.center.abs() - inner.radius;
    let q = w_max / z_min;
    if !(z_min > 0.0 && q < 1.0) {
        return Err(QuadError::InvalidContour(format!(
            "need max|w| < min|z|, got {w_max} and {z_min}"
        )));
    }
    let mut cc = consts()?;
    let mut sw = Samples::new(outer, *f);
    let mut sz = Samples::new(inner, *g);
    refine_with(
        |n| {
            sw.ensure(n, &mut cc);
            sz.ensure(n, &mut cc);
            let h = Samples::step(n);
            let sf: f64 = sw.vals.iter().map(|v| v.l1()).sum::<f64>() * h.hi();
            let sg: f64 = sz.vals.iter().map(|v| v.l1()).sum::<f64>() * h.hi();
            let mag = sf * sg / (z_min * (1.0 - q));
            // terms beyond K are below q^K · mag
            let target = 1e-6 * opts.tol.min(1e-3 * mag.max(f64::MIN_POSITIVE));
            let k_max = if mag > target {
                ((target / mag).ln() / q.ln()).ceil().clamp(1.0, 4000.0) as usize
            } else {
                1
            };
            let mut wp: Vec<DdC> = sw.vals.clone();
            let zi: Vec<DdC> = sz.nodes.iter().map(|z| inv_dd(*z)).collect();
            let mut zp: Vec<DdC> = sz.vals.iter().zip(&zi).map(|(v, r)| v.mul(*r)).collect();
            let mut acc = DdC::zero();
            for _ in 0..k_max {
                let a = wp.iter().fold(DdC::zero(), |s, v| s.add(*v));
                let b = zp.iter().fold(DdC::zero(), |s, v| s.add(*v));
                acc = acc.sub(a.mul(b));
                for (v, w) in wp.iter_mut().zip(&sw.nodes) {
                    *v = v.mul(*w);
                }
                for (v, r) in zp.iter_mut().zip(&zi) {
                    *v = v.mul(*r);
                }
            }
            let out = scale_dd(acc, h * h).to_c64();
            if !(out.re.is_finite() && out.im.is_finite()) {
                return Err(QuadError::NonFinite {
                    point: C64::new(f64::NAN, f64::NAN),
                });
            }
            Ok((out, mag))
        },
        opts,
        DD_ROUNDOFF,
    )
}

fn inv_dd(z: DdC) -> DdC {
    let one = DdC {
        re: TwoFloat::from(1.0),
        im: TwoFloat::from(0.0),
    };
    one.div(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_round_trip() {
        let x = bf(1.0).div(&bf(3.0), P, RM);
        let d = to_dd(&x);
        let back = bf(d.hi()).add(&bf(d.lo()), P, RM);
        let err = leading_f64(&back.sub(&x, P, RM)).abs();
        assert!(err < 1e-31, "{err}");
        assert_eq!(leading_f64(&bf(-2.5)), -2.5);
        assert_eq!(leading_f64(&bf(0.0)), 0.0);
    }

    #[test]
    fn exp_series_coefficient() {
        // ∮ e^{c(u+1/u)} u^{-1} du / 2πi = I_0(2c)
        let f = Monomial {
            c: 0.5,
            eps: 0.5,
            a: 0,
            b: 0,
            k: -1,
        };
        let v = single(
            Circle {
                center: 0.0,
                radius: 0.3,
            },
            &f,
            &QuadOptions::with_tol(1e-14),
        )
        .unwrap();
        let i0 = 1.266_065_877_752_008_4;
        let got = v.value / C64::new(0.0, 2.0 * std::f64::consts::PI);
        assert!((got.re - i0).abs() < 1e-14 && got.im.abs() < 1e-14);
    }
}

