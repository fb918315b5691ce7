//! Determinantal correlation functions built from a kernel.

use nalgebra::DMatrix;

use crate::contour::{KernelValue, C64};
use crate::finite::{kernel_finite, GridPoint, ModelParams, Scheme};
use crate::KernelError;

/// A correlation value with the imaginary part kept as a diagnostic and a
/// first-order error propagated from the kernel entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    pub value: f64,
    pub imag: f64,
    pub err: f64,
}

/// Determinant by LU with partial pivoting; the empty matrix gives 1.
pub fn det(m: &DMatrix<C64>) -> C64 {
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

fn minor(m: &DMatrix<C64>, row: usize, col: usize) -> DMatrix<C64> {
    m.clone().remove_row(row).remove_column(col)
}

/// `det` together with `Σ |cofactor_ij| err_ij`.
pub fn det_with_err(values: &DMatrix<C64>, errs: &DMatrix<f64>) -> Rho {
    let d = det(values);
    let n = values.nrows();
    let mut err = 0.0;
    for i in 0..n {
        for j in 0..n {
            if errs[(i, j)] > 0.0 {
                err += det(&minor(values, i, j)).norm() * errs[(i, j)];
            }
        }
    }
    Rho {
        value: d.re,
        imag: d.im,
        err,
    }
}

fn assemble<P, K>(rows: &[P], cols: &[P], kernel: &K) -> Result<(DMatrix<C64>, DMatrix<f64>), KernelError>
where
    K: Fn(&P, &P) -> Result<KernelValue, KernelError>,
{
    let mut v = DMatrix::zeros(rows.len(), cols.len());
    let mut e = DMatrix::zeros(rows.len(), cols.len());
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            let k = kernel(a, b)?;
            v[(i, j)] = k.value;
            e[(i, j)] = k.err;
        }
    }
    Ok((v, e))
}

fn require_distinct<P: PartialEq + std::fmt::Debug>(points: &[P]) -> Result<(), KernelError> {
    for (i, a) in points.iter().enumerate() {
        if points[i + 1..].contains(a) {
            return Err(KernelError::Domain(format!("repeated point {a:?}")));
        }
    }
    Ok(())
}

/// `ρ(X) = det[K(x_i, x_j)]`.
pub fn rho<P, K>(points: &[P], kernel: K) -> Result<Rho, KernelError>
where
    P: PartialEq + std::fmt::Debug,
    K: Fn(&P, &P) -> Result<KernelValue, KernelError>,
{
    require_distinct(points)?;
    let (v, e) = assemble(points, points, &kernel)?;
    Ok(det_with_err(&v, &e))
}

/// The particle-hole transform `δ(p1, p2) - K(p1, p2)`.
pub fn complement_kernel<P, K>(kernel: K) -> impl Fn(&P, &P) -> Result<KernelValue, KernelError>
where
    P: PartialEq,
    K: Fn(&P, &P) -> Result<KernelValue, KernelError>,
{
    move |a, b| {
        let k = kernel(a, b)?;
        let delta = if a == b { 1.0 } else { 0.0 };
        Ok(KernelValue::exact(C64::new(delta, 0.0)) - k)
    }
}

/// Probability of particles at every `p_i` and holes at every `q_j`:
///
/// ```text
/// det ⎡ K(p_i, p_j)    K(p_i, q_j)     ⎤
///     ⎣ -K(q_i, p_j)   δ_ij - K(q_i, q_j) ⎦
/// ```
pub fn particles_and_holes<P, K>(particles: &[P], holes: &[P], kernel: K) -> Result<Rho, KernelError>
where
    P: PartialEq + Clone + std::fmt::Debug,
    K: Fn(&P, &P) -> Result<KernelValue, KernelError>,
{
    let all: Vec<P> = particles.iter().chain(holes).cloned().collect();
    require_distinct(&all)?;
    let n = particles.len();
    let (mut v, e) = assemble(&all, &all, &kernel)?;
    for i in n..all.len() {
        for j in 0..all.len() {
            v[(i, j)] = -v[(i, j)];
        }
        v[(i, i)] += 1.0;
    }
    Ok(det_with_err(&v, &e))
}

/// The level-`m+2` site above `p`.
pub fn above(p: &GridPoint) -> GridPoint {
    GridPoint {
        m: p.m + 2,
        x2: p.x2,
    }
}

/// Endpoint correlation: particles at every odd-level `p_i` and no particle
/// at any `(x_i, m_i + 2)`.
pub fn endpoint_block_rho(
    points: &[GridPoint],
    params: &ModelParams,
    scheme: Scheme,
    tol: f64,
) -> Result<Rho, KernelError> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if let Some(p) = pts.iter().find(|p| p.m % 2 == 0) {
        return Err(KernelError::Domain(format!("endpoint level {} is even", p.m)));
    }
    let ups: Vec<GridPoint> = pts.iter().map(above).collect();
    particles_and_holes(&pts, &ups, |a, b| kernel_finite(a, b, params, scheme, tol))
}
