//! Parametrized complex contours and the quadrature rules used along them.
//!
//! Closed circles use the periodic trapezoid rule, which converges
//! geometrically for integrands analytic in an annulus around the circle.
//! Open contours (ray pairs, vertical lines, the Pearcey cross) are unions of
//! straight rays truncated at a finite length and integrated with composite
//! 16-point Gauss–Legendre panels.
//!
//! Every kernel in this crate is a sum of a single contour integral and a
//! "Cauchy-type" double integral
//!
//! ```text
//!     ∮ dw ∮ dz  f(w) g(z) / (w - z)
//! ```
//!
//! whose integrand factors apart from the Cauchy denominator. [`cauchy_double`]
//! evaluates such integrals with `f` and `g` supplied in log form, so factors
//! like `e^{t(w+1/w)}` or `(1 - εz)^{-m/2}` never overflow on their own.

use std::f64::consts::PI;
use std::sync::LazyLock;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

pub type C64 = Complex64;

/// `i`
pub const I: C64 = C64::new(0.0, 1.0);

/// `2πi`
pub const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

/// Points per Gauss–Legendre panel on open contours.
pub const PANEL_ORDER: usize = 16;

/// Tail factor below which an open contour is truncated: `ln(1e18)` plus slack.
pub const TAIL_LOG_DROP: f64 = 42.0;

/// Minimum truncation length of any open contour.
pub const MIN_TRUNCATION: f64 = 6.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("at least 4 nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("inverted circle contours are not supported")]
    InvertedCircle,
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("quadrature did not converge: n_max = {n_max}, last difference = {last_diff:e}")]
    NonConvergence { n_max: usize, last_diff: f64 },
    #[error("integrand is not finite at {point}")]
    NonFinite { point: C64 },
}

/// A complex value together with a quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    pub err: f64,
}

impl KernelValue {
    pub fn new(value: C64, err: f64) -> Self {
        Self { value, err }
    }

    pub fn exact(value: C64) -> Self {
        Self { value, err: 0.0 }
    }

    pub fn zero() -> Self {
        Self::exact(C64::new(0.0, 0.0))
    }

    /// Multiplies the value by `c`, scaling the error accordingly.
    pub fn scale(self, c: C64) -> Self {
        Self {
            value: self.value * c,
            err: self.err * c.norm(),
        }
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }

    pub fn im(&self) -> f64 {
        self.value.im
    }
}

impl std::ops::Add for KernelValue {
    type Output = KernelValue;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            err: self.err + rhs.err,
        }
    }
}

impl std::ops::Sub for KernelValue {
    type Output = KernelValue;
    fn sub(self, rhs: Self) -> Self {
        Self {
            value: self.value - rhs.value,
            err: self.err + rhs.err,
        }
    }
}

impl std::ops::Neg for KernelValue {
    type Output = KernelValue;
    fn neg(self) -> Self {
        Self {
            value: -self.value,
            err: self.err,
        }
    }
}

/// One quadrature node: the point and its weight, the weight already
/// containing the `dz` element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub point: C64,
    pub weight: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Counter-clockwise for circles; the drawn direction for open contours.
    Forward,
    Reverse,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Forward => 1.0,
            Orientation::Reverse => -1.0,
        }
    }

    fn flip(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Circle {
        center: C64,
        radius: f64,
    },
    /// Two rays leaving `anchor` (on the positive real axis) at angles
    /// `±angle`. Forward traversal runs from the `-i∞` end to the `+i∞` end.
    RayPair {
        anchor: f64,
        angle: f64,
        truncation: f64,
    },
    /// Image of the base contour under `z ↦ 1/z`.
    Inverted(Box<Contour>),
    /// Four rays at angles `±angle`, `π ± angle`. The right pair meets at
    /// `+offset`, the left pair at `-offset`; `offset = 0` is the plain cross.
    /// Forward traversal: the right pair from `e^{i·angle}∞` down to
    /// `e^{-i·angle}∞`, the left pair from `e^{-i(π-angle)}∞` up to
    /// `e^{i(π-angle)}∞`.
    Cross {
        angle: f64,
        truncation: f64,
        offset: f64,
    },
    /// `Re z = offset`, forward from `-i∞` to `+i∞`.
    VerticalLine { offset: f64, truncation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub shape: Shape,
    pub orientation: Orientation,
}

/// A straight piece `origin + r·direction`, `r ∈ [0, length]`, integrated
/// with sign `sign` (−1 for rays traversed towards their origin).
#[derive(Debug, Clone, Copy)]
struct Segment {
    origin: C64,
    direction: C64,
    length: f64,
    sign: f64,
}

impl Contour {
    pub fn circle(center: C64, radius: f64) -> Result<Self, QuadError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(QuadError::InvalidContour(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            shape: Shape::Circle { center, radius },
            orientation: Orientation::Forward,
        })
    }

    pub fn ray_pair(anchor: f64, angle: f64, truncation: f64) -> Result<Self, QuadError> {
        if !(anchor > 0.0) {
            return Err(QuadError::InvalidContour(format!(
                "ray pair anchor must be positive, got {anchor}"
            )));
        }
        if !(angle > PI / 4.0 && angle < PI / 2.0) {
            return Err(QuadError::InvalidContour(format!(
                "ray pair angle must lie strictly inside (π/4, π/2), got {angle}"
            )));
        }
        check_truncation(truncation)?;
        Ok(Self {
            shape: Shape::RayPair {
                anchor,
                angle,
                truncation,
            },
            orientation: Orientation::Forward,
        })
    }

    pub fn cross(angle: f64, truncation: f64, offset: f64) -> Result<Self, QuadError> {
        if !(angle > 0.0 && angle < PI / 2.0) {
            return Err(QuadError::InvalidContour(format!(
                "cross angle must lie in (0, π/2), got {angle}"
            )));
        }
        if !(offset >= 0.0) {
            return Err(QuadError::InvalidContour(format!(
                "cross offset must be non-negative, got {offset}"
            )));
        }
        check_truncation(truncation)?;
        Ok(Self {
            shape: Shape::Cross {
                angle,
                truncation,
                offset,
            },
            orientation: Orientation::Forward,
        })
    }

    pub fn vertical_line(offset: f64, truncation: f64) -> Result<Self, QuadError> {
        check_truncation(truncation)?;
        Ok(Self {
            shape: Shape::VerticalLine { offset, truncation },
            orientation: Orientation::Forward,
        })
    }

    pub fn inverted(self) -> Result<Self, QuadError> {
        if matches!(self.shape, Shape::Circle { .. }) {
            return Err(QuadError::InvertedCircle);
        }
        Ok(Self {
            shape: Shape::Inverted(Box::new(self)),
            orientation: Orientation::Forward,
        })
    }

    pub fn reversed(mut self) -> Self {
        self.orientation = self.orientation.flip();
        self
    }

    /// Quadrature nodes for roughly `n` points. Circles get exactly `n`
    /// nodes; open contours get `ceil(n/16)` Gauss–Legendre panels per ray.
    pub fn nodes(&self, n: usize) -> Result<Vec<QuadNode>, QuadError> {
        if n < 4 {
            return Err(QuadError::TooFewNodes(n));
        }
        let sign = self.orientation.sign();
        let mut out = match &self.shape {
            Shape::Circle { center, radius } => {
                let h = 2.0 * PI / n as f64;
                (0..n)
                    .map(|k| {
                        let e = C64::from_polar(1.0, h * k as f64);
                        QuadNode {
                            point: center + e * *radius,
                            weight: I * e * (*radius * h),
                        }
                    })
                    .collect()
            }
            Shape::Inverted(base) => {
                if matches!(base.shape, Shape::Circle { .. }) {
                    return Err(QuadError::InvertedCircle);
                }
                base.nodes(n)?
                    .into_iter()
                    .map(|q| {
                        let inv = q.point.inv();
                        QuadNode {
                            point: inv,
                            weight: -q.weight * inv * inv,
                        }
                    })
                    .collect()
            }
            _ => {
                let panels = n.div_ceil(PANEL_ORDER);
                let mut v = Vec::new();
                for seg in self.segments() {
                    push_segment_nodes(&seg, panels, &mut v);
                }
                v
            }
        };
        if sign < 0.0 {
            for q in &mut out {
                q.weight = -q.weight;
            }
        }
        Ok(out)
    }

    fn segments(&self) -> Vec<Segment> {
        match &self.shape {
            Shape::RayPair {
                anchor,
                angle,
                truncation,
            } => {
                let a = C64::new(*anchor, 0.0);
                vec![
                    Segment {
                        origin: a,
                        direction: C64::from_polar(1.0, -angle),
                        length: *truncation,
                        sign: -1.0,
                    },
                    Segment {
                        origin: a,
                        direction: C64::from_polar(1.0, *angle),
                        length: *truncation,
                        sign: 1.0,
                    },
                ]
            }
            Shape::VerticalLine { offset, truncation } => {
                let a = C64::new(*offset, 0.0);
                vec![
                    Segment {
                        origin: a,
                        direction: -I,
                        length: *truncation,
                        sign: -1.0,
                    },
                    Segment {
                        origin: a,
                        direction: I,
                        length: *truncation,
                        sign: 1.0,
                    },
                ]
            }
            Shape::Cross {
                angle,
                truncation,
                offset,
            } => {
                let right = C64::new(*offset, 0.0);
                let left = C64::new(-*offset, 0.0);
                let back = PI - angle;
                vec![
                    Segment {
                        origin: right,
                        direction: C64::from_polar(1.0, *angle),
                        length: *truncation,
                        sign: -1.0,
                    },
                    Segment {
                        origin: right,
                        direction: C64::from_polar(1.0, -angle),
                        length: *truncation,
                        sign: 1.0,
                    },
                    Segment {
                        origin: left,
                        direction: C64::from_polar(1.0, -back),
                        length: *truncation,
                        sign: -1.0,
                    },
                    Segment {
                        origin: left,
                        direction: C64::from_polar(1.0, back),
                        length: *truncation,
                        sign: 1.0,
                    },
                ]
            }
            Shape::Circle { .. } | Shape::Inverted(_) => Vec::new(),
        }
    }
}

fn check_truncation(truncation: f64) -> Result<(), QuadError> {
    if truncation >= 0.0 && truncation.is_finite() {
        Ok(())
    } else {
        Err(QuadError::InvalidContour(format!(
            "truncation must be finite and non-negative, got {truncation}"
        )))
    }
}

fn push_segment_nodes(seg: &Segment, panels: usize, out: &mut Vec<QuadNode>) {
    let gl = &*GAUSS_LEGENDRE_16;
    let width = seg.length / panels as f64;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        for (x, w) in gl.nodes.iter().zip(gl.weights.iter()) {
            let r = mid + half * x;
            out.push(QuadNode {
                point: seg.origin + seg.direction * r,
                weight: seg.direction * (seg.sign * half * w),
            });
        }
    }
}

struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre
/// polynomial, started from the Chebyshev-like initial guesses.
fn gauss_legendre(order: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    GaussLegendre { nodes, weights }
}

static GAUSS_LEGENDRE_16: LazyLock<GaussLegendre> =
    LazyLock::new(|| gauss_legendre(PANEL_ORDER));

/// Tolerance and node-count schedule for the adaptive rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub tol: f64,
    pub n0: usize,
    pub n_max: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            n0: 64,
            n_max: 1 << 17,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// Schedule for double integrals, whose cost grows like `n²`.
    pub fn double(tol: f64) -> Self {
        Self {
            tol,
            n0: 64,
            n_max: 4096,
        }
    }
}

/// Relative round-off level below which successive differences are noise.
const ROUNDOFF: f64 = 256.0 * f64::EPSILON;

/// Quadrature sum and the sum of absolute values of its terms.
fn rule_sum<F>(f: &F, nodes: &[QuadNode]) -> Result<(C64, f64), QuadError>
where
    F: Fn(C64) -> C64,
{
    let mut acc = C64::new(0.0, 0.0);
    let mut mag = 0.0;
    for q in nodes {
        let v = f(q.point);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(QuadError::NonFinite { point: q.point });
        }
        let term = v * q.weight;
        acc += term;
        mag += term.l1_norm();
    }
    Ok((acc, mag))
}

/// Doubling loop shared by the adaptive rules. `eval(n)` returns the rule
/// value and its absolute-value scale; the loop stops when two successive
/// values agree to `tol` or to the round-off level of the scale.
fn refine<E>(eval: E, opts: &QuadOptions) -> Result<KernelValue, QuadError>
where
    E: FnMut(usize) -> Result<(C64, f64), QuadError>,
{
    refine_with(eval, opts, ROUNDOFF)
}

/// [`refine`] with an explicit relative round-off level.
pub(crate) fn refine_with<E>(
    mut eval: E,
    opts: &QuadOptions,
    roundoff: f64,
) -> Result<KernelValue, QuadError>
where
    E: FnMut(usize) -> Result<(C64, f64), QuadError>,
{
    let mut n = opts.n0.max(4);
    let (mut prev, _) = eval(n)?;
    let mut last_diff = f64::INFINITY;
    while n * 2 <= opts.n_max {
        n *= 2;
        let (cur, mag) = eval(n)?;
        last_diff = (cur - prev).norm();
        let floor = roundoff * mag;
        if last_diff < opts.tol || last_diff < floor {
            return Ok(KernelValue::new(cur, last_diff));
        }
        prev = cur;
    }
    Err(QuadError::NonConvergence {
        n_max: opts.n_max,
        last_diff,
    })
}

/// Integrates `f` along `contour`, doubling the node count from `n0` until
/// two successive values differ by less than `tol`.
pub fn integrate_adaptive<F>(
    f: F,
    contour: &Contour,
    tol: f64,
    n0: usize,
    n_max: usize,
) -> Result<KernelValue, QuadError>
where
    F: Fn(C64) -> C64,
{
    refine(
        |n| rule_sum(&f, &contour.nodes(n)?),
        &QuadOptions { tol, n0, n_max },
    )
}

/// Same as [`integrate_adaptive`] over a union of contours.
pub fn integrate_union<F>(
    f: F,
    contours: &[Contour],
    opts: &QuadOptions,
) -> Result<KernelValue, QuadError>
where
    F: Fn(C64) -> C64,
{
    refine(
        |n| {
            let mut acc = C64::new(0.0, 0.0);
            let mut mag = 0.0;
            for c in contours {
                let (v, m) = rule_sum(&f, &c.nodes(n)?)?;
                acc += v;
                mag += m;
            }
            Ok((acc, mag))
        },
        opts,
    )
}

/// Nodes with the integrand already folded into the weight, scaled by
/// `e^{-shift}` so that the largest entry has modulus about one.
struct Weighted {
    points: Vec<C64>,
    values: Vec<C64>,
    shift: f64,
}

fn weighted_nodes<F>(contours: &[Contour], n: usize, log_f: &F) -> Result<Weighted, QuadError>
where
    F: Fn(C64) -> C64,
{
    let mut points = Vec::new();
    let mut logs = Vec::new();
    let mut weights = Vec::new();
    for c in contours {
        for q in c.nodes(n)? {
            let l = log_f(q.point);
            if l.re.is_nan() || l.im.is_nan() || l.re == f64::INFINITY {
                return Err(QuadError::NonFinite { point: q.point });
            }
            points.push(q.point);
            logs.push(l);
            weights.push(q.weight);
        }
    }
    let shift = logs
        .iter()
        .map(|l| l.re)
        .filter(|r| r.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let values = logs
        .iter()
        .zip(weights.iter())
        .map(|(l, w)| {
            if l.re == f64::NEG_INFINITY {
                C64::new(0.0, 0.0)
            } else {
                (l - shift).exp() * w
            }
        })
        .collect();
    Ok(Weighted {
        points,
        values,
        shift,
    })
}

fn cauchy_sum<F, G>(
    outer: &[Contour],
    inner: &[Contour],
    n: usize,
    log_f: &F,
    log_g: &G,
) -> Result<(C64, f64), QuadError>
where
    F: Fn(C64) -> C64,
    G: Fn(C64) -> C64,
{
    let wn = weighted_nodes(outer, n, log_f)?;
    let zn = weighted_nodes(inner, n, log_g)?;
    // ordered collect then a sequential sum keeps the result bit-reproducible
    let rows: Vec<(C64, f64)> = wn
        .points
        .par_iter()
        .zip(wn.values.par_iter())
        .map(|(w, fw)| {
            let mut acc = C64::new(0.0, 0.0);
            let mut mag = 0.0;
            for (z, gz) in zn.points.iter().zip(zn.values.iter()) {
                let term = gz / (w - z);
                acc += term;
                mag += term.l1_norm();
            }
            (acc * fw, mag * fw.l1_norm())
        })
        .collect();
    let sum = rows
        .iter()
        .fold((C64::new(0.0, 0.0), 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let scale = (wn.shift + zn.shift).exp();
    let (total, mag) = (sum.0 * scale, sum.1 * scale);
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(QuadError::NonFinite {
            point: C64::new(f64::NAN, f64::NAN),
        });
    }
    Ok((total, mag))
}

/// Evaluates `∫_outer dw ∫_inner dz e^{log_f(w)} e^{log_g(z)} / (w - z)`
/// adaptively. The outer and inner contour sets must not intersect.
pub fn cauchy_double<F, G>(
    outer: &[Contour],
    inner: &[Contour],
    log_f: F,
    log_g: G,
    opts: &QuadOptions,
) -> Result<KernelValue, QuadError>
where
    F: Fn(C64) -> C64,
    G: Fn(C64) -> C64,
{
    refine(|n| cauchy_sum(outer, inner, n, &log_f, &log_g), opts)
}

/// Length at which `log_abs` along the ray `r ↦ point(r)` has dropped
/// [`TAIL_LOG_DROP`] below its running maximum and stays there, floored at
/// `floor`. Fails if the integrand has not decayed by `cap`.
pub fn tail_truncation<P, L>(point: P, log_abs: L, floor: f64, cap: f64) -> Result<f64, QuadError>
where
    P: Fn(f64) -> C64,
    L: Fn(C64) -> f64,
{
    const STEP: f64 = 0.125;
    const CONFIRM: usize = 16;
    let mut peak = f64::NEG_INFINITY;
    let mut below = 0usize;
    let mut first_below = 0.0;
    let mut r = 0.0;
    while r <= cap {
        let v = log_abs(point(r));
        if v.is_nan() {
            return Err(QuadError::NonFinite { point: point(r) });
        }
        if v > peak {
            peak = v;
            below = 0;
        }
        if v < peak - TAIL_LOG_DROP {
            if below == 0 {
                first_below = r;
            }
            below += 1;
            if below >= CONFIRM {
                return Ok(first_below.max(floor));
            }
        } else {
            below = 0;
        }
        // Coarser steps far out; the tails are smooth there.
        r += STEP * (1.0 + r / 16.0);
    }
    Err(QuadError::InvalidContour(format!(
        "integrand has not decayed along the ray by length {cap}"
    )))
}

/// Truncation that covers both rays of a [`Shape::RayPair`] for `log_abs`.
pub fn ray_pair_truncation<L>(anchor: f64, angle: f64, log_abs: L) -> Result<f64, QuadError>
where
    L: Fn(C64) -> f64,
{
    let a = C64::new(anchor, 0.0);
    let up = C64::from_polar(1.0, angle);
    let down = up.conj();
    let t1 = tail_truncation(|r| a + up * r, &log_abs, MIN_TRUNCATION, 1e4)?;
    let t2 = tail_truncation(|r| a + down * r, &log_abs, MIN_TRUNCATION, 1e4)?;
    Ok(t1.max(t2))
}
