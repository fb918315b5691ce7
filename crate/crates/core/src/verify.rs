//! Identity suites shared by the `verify` command and the test targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::finite::{kernel_finite, recurrence_residuals, GridPoint, ModelParams, Scheme};
use crate::tacnode::{kernel_tacnode, TacnodeParams, TacnodePoint};
use crate::KernelError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Diagnostic only: not part of the pass decision.
    pub informational: bool,
}

impl Check {
    fn new(name: &str, residuals: &[f64], threshold: f64) -> Self {
        let max = residuals.iter().cloned().fold(0.0, f64::max);
        let finite = residuals.iter().all(|r| r.is_finite());
        Self {
            name: name.to_string(),
            cases: residuals.len(),
            max_residual: max,
            threshold,
            passed: finite && max <= threshold,
            informational: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.informational || c.passed)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Residual bound; `None` keeps each check's default.
    pub threshold: Option<f64>,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            threshold: None,
            tol: 1e-12,
            seed: 20,
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 1e-8;

/// 20 random finite-kernel tuples with `ε ∈ {0.2, 0.4}`, `t ∈ {0.1, 0.5}`,
/// `m ≤ 6`, `|x| ≤ 3`.
pub fn deform_tuples(seed: u64) -> Vec<(GridPoint, GridPoint, ModelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| {
        let m: u32 = rng.random_range(1..=6);
        // x2 ∈ [-6, 6] with the parity of m + 1
        let par = (m as i64 + 1) % 2;
        let x2 = 2 * rng.random_range(-3..=3) + par;
        let x2 = if x2 > 6 { x2 - 2 } else { x2 };
        GridPoint::new(x2, m).expect("on grid")
    };
    (0..20)
        .map(|_| {
            let eps = [0.2, 0.4][rng.random_range(0..2)];
            let t = [0.1, 0.5][rng.random_range(0..2)];
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            (a, b, ModelParams::new(eps, t).expect("valid"))
        })
        .collect()
}

pub fn deform_suite(opts: &SuiteOptions) -> Result<SuiteReport, KernelError> {
    let mut res = Vec::new();
    for (a, b, p) in deform_tuples(opts.seed) {
        let o = kernel_finite(&a, &b, &p, Scheme::Original, opts.tol)?;
        let d = kernel_finite(&a, &b, &p, Scheme::Deformed, opts.tol)?;
        res.push((o.value - d.value).norm());
    }
    Ok(SuiteReport {
        suite: "deform".into(),
        checks: vec![Check::new(
            "original_vs_deformed",
            &res,
            opts.threshold.unwrap_or(DEFAULT_THRESHOLD),
        )],
    })
}

/// 20 tuples `(x1, μ1, x2, μ2)` with `|x| ≤ 2`; the first one is coincident.
pub fn symmetry_tuples(seed: u64) -> Vec<(TacnodePoint, TacnodePoint)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mus = [-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75];
    let mut out = vec![(TacnodePoint::new(0, 0.5), TacnodePoint::new(0, 0.5))];
    while out.len() < 20 {
        let a = TacnodePoint::new(rng.random_range(-2..=2), mus[rng.random_range(0..mus.len())]);
        let b = TacnodePoint::new(rng.random_range(-2..=2), mus[rng.random_range(0..mus.len())]);
        out.push((a, b));
    }
    out
}

pub const SYMMETRY_EPS: [f64; 3] = [0.25, 0.5, 1.0];

/// `|𝒦(-x1,μ1;-x2,μ2) - 𝒦(x1-1,μ1;x2-1,μ2)|`
pub fn symmetry1(
    a: &TacnodePoint,
    b: &TacnodePoint,
    params: &TacnodeParams,
) -> Result<f64, KernelError> {
    let l = kernel_tacnode(
        &TacnodePoint::new(-a.x, a.mu),
        &TacnodePoint::new(-b.x, b.mu),
        params,
    )?;
    let r = kernel_tacnode(
        &TacnodePoint::new(a.x - 1, a.mu),
        &TacnodePoint::new(b.x - 1, b.mu),
        params,
    )?;
    Ok((l.value - r.value).norm())
}

/// `|(-1)^{x1-x2} 𝒦(x1,-μ1;x2,-μ2) + 𝒦(x1,μ1;x2,μ2) - δ|`
pub fn symmetry2(
    a: &TacnodePoint,
    b: &TacnodePoint,
    params: &TacnodeParams,
) -> Result<f64, KernelError> {
    let flipped = kernel_tacnode(
        &TacnodePoint::new(a.x, -a.mu),
        &TacnodePoint::new(b.x, -b.mu),
        params,
    )?;
    let k = kernel_tacnode(a, b, params)?;
    let sign = if (a.x - b.x).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let delta = if a.x == b.x && a.mu.to_bits() == b.mu.to_bits() {
        1.0
    } else {
        0.0
    };
    Ok((flipped.value * sign + k.value - delta).norm())
}

pub fn symmetry_suite(opts: &SuiteOptions) -> Result<SuiteReport, KernelError> {
    let th = opts.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let (mut r1, mut r2) = (Vec::new(), Vec::new());
    for e in SYMMETRY_EPS {
        let params = TacnodeParams::new(e)?.with_tol(opts.tol);
        for (a, b) in symmetry_tuples(opts.seed) {
            r1.push(symmetry1(&a, &b, &params)?);
            r2.push(symmetry2(&a, &b, &params)?);
        }
    }
    Ok(SuiteReport {
        suite: "symmetry".into(),
        checks: vec![
            Check::new("reflection", &r1, th),
            Check::new("particle_hole", &r2, th),
        ],
    })
}

/// 20 tuples `(x, y, n, m, ε, t)` on odd levels `≤ 9`.
pub fn recurrence_tuples(seed: u64) -> Vec<(i64, i64, u32, u32, ModelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    // make sure the δ_{n,m-2} correction is exercised
    out.push((0, 0, 3, 5, ModelParams::new(0.3, 0.4).expect("valid")));
    out.push((1, 0, 5, 7, ModelParams::new(0.2, 0.1).expect("valid")));
    while out.len() < 20 {
        let n = [1, 3, 5, 7][rng.random_range(0..4)];
        let m = [3, 5, 7, 9][rng.random_range(0..4)];
        let x = rng.random_range(-3..=3);
        let y = rng.random_range(-3..=3);
        let eps = [0.2, 0.4][rng.random_range(0..2)];
        let t = [0.1, 0.5][rng.random_range(0..2)];
        out.push((x, y, n, m, ModelParams::new(eps, t).expect("valid")));
    }
    out
}

/// Tacnode-section tuples `(x, μ1, y, μ2)` for the second-order identity:
/// sections at distinct `μ`, or a common section with `|x - y| ≥ 2`.
pub const REC5_TUPLES: [(i64, f64, i64, f64); 6] = [
    (2, 0.0, 0, 0.0),
    (0, 0.0, 3, 0.0),
    (0, 0.0, 0, 0.5),
    (1, 0.0, -1, 0.5),
    (0, 0.5, 0, 0.0),
    (-1, 0.3, 1, -0.4),
];

/// Tuples on a common section with `|x - y| ≤ 1`, where the identity carries
/// extra lower-order terms. Reported, not checked.
pub const REC5_INFO_TUPLES: [(i64, f64, i64, f64); 2] = [(0, 0.0, 0, 0.0), (1, 0.0, 0, 0.0)];

pub const REC5_EPS: [f64; 2] = [0.1, 0.05];
pub const REC5_EPS_TAC: f64 = 0.5;
pub const REC5_RATIO: (f64, f64) = (0.5, 2.0);

/// Odd level `2⌊L²(1 + μ/L)⌋ + 1`.
pub fn rec5_level(l: f64, mu: f64) -> u32 {
    2 * (l * l * (1.0 + mu / l)).floor() as u32 + 1
}

/// `rec5/ε²` at `ε`, with `L = ϵ/ε`, `t = ϵL` and levels from
/// [`rec5_level`].
pub fn rec5_scaled(
    tuple: (i64, f64, i64, f64),
    eps: f64,
    tol: f64,
) -> Result<f64, KernelError> {
    let (x, mu1, y, mu2) = tuple;
    let l = REC5_EPS_TAC / eps;
    let p = ModelParams::new(eps, REC5_EPS_TAC * l)?;
    let scheme = if 1.0 / eps > 2.0 * Scheme::DEFAULT_ANCHOR {
        Scheme::steepest()
    } else {
        Scheme::Deformed
    };
    let r = recurrence_residuals(x, y, rec5_level(l, mu1), rec5_level(l, mu2), &p, scheme, tol)?;
    Ok(r.rec5_over_eps2)
}

/// `|log2(r(ε1)/r(ε2))|` normalised so that 1 marks a ratio at the edge of
/// [`REC5_RATIO`].
fn ratio_excess(a: f64, b: f64) -> f64 {
    let r = a / b;
    if !(r > 0.0) || !r.is_finite() {
        return f64::INFINITY;
    }
    let (lo, hi) = REC5_RATIO;
    (r.ln() / if r >= 1.0 { hi.ln() } else { -lo.ln() }).abs()
}

pub fn recurrence_suite(opts: &SuiteOptions) -> Result<SuiteReport, KernelError> {
    let th = opts.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let (mut r1, mut r2) = (Vec::new(), Vec::new());
    for (x, y, n, m, p) in recurrence_tuples(opts.seed) {
        let r = recurrence_residuals(x, y, n, m, &p, Scheme::Deformed, opts.tol)?;
        r1.push(r.rec1);
        r2.push(r.rec2);
    }
    let mut excess = Vec::new();
    for t in REC5_TUPLES {
        let a = rec5_scaled(t, REC5_EPS[0], opts.tol)?;
        let b = rec5_scaled(t, REC5_EPS[1], opts.tol)?;
        excess.push(ratio_excess(a, b));
    }
    let mut info = Vec::new();
    for t in REC5_INFO_TUPLES {
        info.push(rec5_scaled(t, REC5_EPS[1], opts.tol)?.abs());
    }
    let mut info_check = Check::new("second_order_common_section_near_diagonal", &info, f64::INFINITY);
    info_check.informational = true;
    Ok(SuiteReport {
        suite: "recurrence".into(),
        checks: vec![
            Check::new("level_up", &r1, th),
            Check::new("level_down", &r2, th),
            // 1.0 is the edge of the accepted ratio band
            Check::new("second_order_ratio", &excess, 1.0),
            info_check,
        ],
    })
}

pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Vec<SuiteReport>, KernelError> {
    Ok(match name {
        "deform" => vec![deform_suite(opts)?],
        "symmetry" => vec![symmetry_suite(opts)?],
        "recurrence" => vec![recurrence_suite(opts)?],
        "all" => vec![
            deform_suite(opts)?,
            symmetry_suite(opts)?,
            recurrence_suite(opts)?,
        ],
        other => return Err(KernelError::Unsupported(format!("unknown suite {other}"))),
    })
}
