//! Quasi-Newton (BFGS) minimization with a strong-Wolfe line search.
//!
//! The inverse Hessian starts at the identity. Near convergence the energy
//! differences reach rounding level, so values within a small relative noise
//! band count as equal and the line search is steered by the directional
//! derivative instead.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct BfgsOptions {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
    /// Largest allowed change in any single coordinate per step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            gradient_tolerance: 1e-8,
            max_iterations: 500,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
            max_step: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if libm::fabs(*x) > m { libm::fabs(*x) } else { m })
}

struct Point {
    alpha: f64,
    value: f64,
    gradient: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    p: &'a [f64],
    value0: f64,
    slope0: f64,
    noise: f64,
    opts: &'a BfgsOptions,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let trial: Vec<f64> = self.x.iter().zip(self.p).map(|(x, p)| x + alpha * p).collect();
        let (value, gradient) = (self.f)(&trial);
        self.evaluations += 1;
        let slope = dot(&gradient, self.p);
        Point {
            alpha,
            value,
            gradient,
            slope,
        }
    }

    fn sufficient(&self, pt: &Point) -> bool {
        pt.value <= self.value0 + self.opts.c1 * pt.alpha * self.slope0
            || pt.value <= self.value0 + self.noise
    }

    fn curvature(&self, pt: &Point) -> bool {
        libm::fabs(pt.slope) <= -self.opts.c2 * self.slope0
    }

    /// `a` is higher than `b` by more than the evaluation noise.
    fn higher(&self, a: &Point, b: &Point) -> bool {
        a.value > b.value + self.noise
    }

    fn run(&mut self, alpha_max: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            value: self.value0,
            gradient: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha_max.min(1.0);
        for i in 0..self.opts.max_line_search {
            let pt = self.eval(alpha);
            if !pt.value.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.sufficient(&pt) || (i > 0 && self.higher(&pt, &prev)) {
                return self.zoom(prev, pt);
            }
            if self.curvature(&pt) {
                return Some(pt);
            }
            if pt.slope >= 0.0 {
                return self.zoom(pt, prev);
            }
            if alpha >= alpha_max {
                return Some(pt);
            }
            alpha = (2.0 * alpha).min(alpha_max);
            prev = pt;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        for _ in 0..self.opts.max_line_search {
            let alpha = interpolate(&lo, &hi);
            let pt = self.eval(alpha);
            if !self.sufficient(&pt) || self.higher(&pt, &lo) {
                hi = pt;
            } else {
                if self.curvature(&pt) {
                    return Some(pt);
                }
                if pt.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = pt;
            }
            if libm::fabs(hi.alpha - lo.alpha) < 1e-14 * lo.alpha.max(1e-300) {
                break;
            }
        }
        // Accept the best sufficient-decrease point if it moved at all.
        (lo.alpha > 0.0 && lo.value <= self.value0 + self.noise).then_some(lo)
    }
}

/// Minimizer of the cubic through both end points, kept inside the interval.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a0, a1) = (lo.alpha, hi.alpha);
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a0 - a1);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let (left, right) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
    let width = right - left;
    if disc >= 0.0 {
        let d2 = libm::copysign(libm::sqrt(disc), a1 - a0);
        let cand = a1 - (a1 - a0) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
        if cand.is_finite() && cand > left + 0.1 * width && cand < right - 0.1 * width {
            return cand;
        }
    }
    0.5 * (a0 + a1)
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsReport>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut value, mut g) = f(&x);
    let mut evaluations = 1;
    let identity = |n: usize| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
        h
    };
    let mut h_inv = identity(n);
    let mut fresh = true;
    let mut iterations = 0;

    while max_norm(&g) > opts.gradient_tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::OptimizerNotConverged {
                iterations,
                best_value: value,
                gradient_norm: max_norm(&g),
                best_angles: x,
            });
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..n)
            .map(|i| -dot(&h_inv[i * n..(i + 1) * n], &g))
            .collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            h_inv = identity(n);
            fresh = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let alpha_max = opts.max_step / max_norm(&p);
        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            p: &p,
            value0: value,
            slope0: slope,
            noise: 1e-13 * libm::fabs(value).max(1.0),
            opts,
            evaluations: 0,
        };
        let found = ls.run(alpha_max);
        evaluations += ls.evaluations;
        let Some(pt) = found else {
            if !fresh {
                h_inv = identity(n);
                fresh = true;
                continue;
            }
            return Err(Error::OptimizerNotConverged {
                iterations,
                best_value: value,
                gradient_norm: max_norm(&g),
                best_angles: x,
            });
        };
        let s: Vec<f64> = p.iter().map(|v| pt.alpha * v).collect();
        let y: Vec<f64> = pt.gradient.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        value = pt.value;
        g = pt.gradient;
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            // H <- (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h_inv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
    }
    Ok(BfgsReport {
        x,
        value,
        gradient: g,
        iterations,
        evaluations,
    })
}
