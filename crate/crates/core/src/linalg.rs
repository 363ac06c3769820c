//! Solving `A Δθ = -b` for the angle update and evaluating the quadratic model.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `σ_max` times this are discarded on the SVD path.
pub const PSEUDOINVERSE_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolvePath {
    /// LU factorization with partial pivoting.
    Direct,
    /// Truncated SVD pseudoinverse, keeping `rank` singular values.
    Pseudoinverse { rank: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngleUpdate {
    pub delta: Vec<f64>,
    pub path: SolvePath,
    /// `σ_max / σ_min` of `A` (infinite when singular).
    pub condition: f64,
}

/// Solves `A Δθ = -b`, switching to a truncated pseudoinverse when the
/// condition number exceeds `condition_cutoff`.
pub fn solve_angle_update(a: &DMatrix<f64>, b: &[f64], condition_cutoff: f64) -> Result<AngleUpdate> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch("A must be square with the length of b"));
    }
    if n == 0 {
        return Ok(AngleUpdate {
            delta: Vec::new(),
            path: SolvePath::Direct,
            condition: 1.0,
        });
    }
    let rhs = -DVector::from_column_slice(b);
    if a.iter().all(|v| *v == 0.0) {
        if b.iter().any(|v| *v != 0.0) {
            return Err(Error::UnsolvableSystem);
        }
        return Ok(AngleUpdate {
            delta: alloc::vec![0.0; n],
            path: SolvePath::Pseudoinverse { rank: 0 },
            condition: f64::INFINITY,
        });
    }
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };

    if condition <= condition_cutoff {
        if let Some(x) = a.clone().lu().solve(&rhs) {
            return Ok(AngleUpdate {
                delta: x.iter().copied().collect(),
                path: SolvePath::Direct,
                condition,
            });
        }
    }

    let threshold = s_max * PSEUDOINVERSE_CUTOFF;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut coeffs = u.transpose() * &rhs;
    let mut rank = 0;
    for (c, &s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        if s > threshold {
            *c /= s;
            rank += 1;
        } else {
            *c = 0.0;
        }
    }
    let x = v_t.transpose() * coeffs;
    Ok(AngleUpdate {
        delta: x.iter().copied().collect(),
        path: SolvePath::Pseudoinverse { rank },
        condition,
    })
}

/// `e0 + b·Δ + ½ Δᵀ A Δ`.
pub fn quadratic_energy(e0: f64, b: &[f64], a: &DMatrix<f64>, delta: &[f64]) -> Result<f64> {
    let n = b.len();
    if delta.len() != n || a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch("quadratic model dimensions"));
    }
    let d = DVector::from_column_slice(delta);
    let linear: f64 = b.iter().zip(delta).map(|(x, y)| x * y).sum();
    let quad = d.dot(&(a * &d));
    Ok(e0 + linear + 0.5 * quad)
}
