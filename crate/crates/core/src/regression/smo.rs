//! Sequential minimal optimization for the epsilon-SVR dual.
//!
//! The dual is written over `2n` variables `beta = [alpha; alpha*]` with
//! signs `s = [+1; -1]`:
//!
//! ```text
//! min  1/2 beta' Q beta + p' beta
//! s.t. s' beta = 0,  0 <= beta <= K
//! Q_tu = s_t s_u k(x_t, x_u),  p = [eps - y; eps + y]
//! ```
//!
//! Each iteration picks the maximal violating index `i` and pairs it with the
//! `j` giving the largest second-order decrease, then solves the two-variable
//! subproblem analytically. Stops when the KKT gap `m - M` drops below `tol`.

use super::kernel::{DataMatrix, KernelRows};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Solver controls.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// KKT gap at which the solver stops.
    pub tol: f64,
    /// Maximum number of two-variable updates.
    pub max_iter: usize,
    /// Memory budget for kernel rows, bytes.
    pub cache_bytes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 1_000_000,
            cache_bytes: 512 << 20,
        }
    }
}

/// Raw dual solution.
#[derive(Clone, Debug)]
pub struct DualSolution {
    /// `alpha_i - alpha*_i` per training point.
    pub coefs: Vec<f64>,
    /// `alpha_i + alpha*_i` per training point.
    pub abs_sum: Vec<f64>,
    pub bias: f64,
    /// Value of the (maximized) dual objective.
    pub objective: f64,
    pub iterations: usize,
    /// Final KKT gap.
    pub violation: f64,
}

pub(crate) fn solve(
    x: &DataMatrix,
    y: &[f64],
    epsilon: f64,
    cost: f64,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    let n = x.rows;
    let l = 2 * n;
    let mut kernel = KernelRows::new(x, gamma, opts.cache_bytes);

    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..l)
        .map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] })
        .collect();
    let mut alpha = vec![0.0; l];
    let mut grad = p.clone();

    let is_upper = |a: f64| a >= cost;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let violation;
    loop {
        // i: maximal violator of the "up" set.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..l {
            let v = if t < n {
                if is_upper(alpha[t]) {
                    continue;
                }
                -grad[t]
            } else {
                if is_lower(alpha[t]) {
                    continue;
                }
                grad[t]
            };
            if v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }

        // j: second-order choice from the "low" set.
        let (gmax2, j_sel) = match i_sel {
            None => (f64::NEG_INFINITY, None),
            Some(i) => kernel.with_row(i % n, |ki| {
                let si = sign(i);
                let mut gmax2 = f64::NEG_INFINITY;
                let mut best = None;
                let mut best_obj = f64::INFINITY;
                for t in 0..l {
                    let st = sign(t);
                    let q_it = si * st * ki[t % n];
                    let (v, diff, quad) = if t < n {
                        if is_lower(alpha[t]) {
                            continue;
                        }
                        (grad[t], gmax + grad[t], 2.0 - 2.0 * si * q_it)
                    } else {
                        if is_upper(alpha[t]) {
                            continue;
                        }
                        (-grad[t], gmax - grad[t], 2.0 + 2.0 * si * q_it)
                    };
                    if v >= gmax2 {
                        gmax2 = v;
                    }
                    if diff > 0.0 {
                        let quad = if quad > 0.0 { quad } else { TAU };
                        let obj = -(diff * diff) / quad;
                        if obj <= best_obj {
                            best_obj = obj;
                            best = Some(t);
                        }
                    }
                }
                (gmax2, best)
            }),
        };

        let gap = gmax + gmax2;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gap >= opts.tol => (i, j),
            _ => {
                violation = gap.max(0.0);
                break;
            }
        };
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        kernel.with_rows(i % n, j % n, |ki, kj| {
            let q_ij = si * sj * ki[j % n];
            let (mut ai, mut aj) = (old_i, old_j);
            if si != sj {
                let quad = (2.0 + 2.0 * q_ij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > 0.0 {
                    if aj < 0.0 {
                        aj = 0.0;
                        ai = diff;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if diff > 0.0 {
                    if ai > cost {
                        ai = cost;
                        aj = cost - diff;
                    }
                } else if aj > cost {
                    aj = cost;
                    ai = cost + diff;
                }
            } else {
                let quad = (2.0 - 2.0 * q_ij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > cost {
                    if ai > cost {
                        ai = cost;
                        aj = sum - cost;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > cost {
                    if aj > cost {
                        aj = cost;
                        ai = sum - cost;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            alpha[i] = ai;
            alpha[j] = aj;

            // grad_t += Q_ti d_i + Q_tj d_j, with Q_tu = s_t s_u k
            let di = si * (ai - old_i);
            let dj = sj * (aj - old_j);
            let (gpos, gneg) = grad.split_at_mut(n);
            for s in 0..n {
                let d = ki[s] * di + kj[s] * dj;
                gpos[s] += d;
                gneg[s] -= d;
            }
        });
    }

    // bias from free variables, midpoint of the feasible interval otherwise
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if is_upper(alpha[t]) {
            if sign(t) < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if sign(t) > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (upper + lower)
    };

    // objective 1/2 beta'Q beta + p'beta = 1/2 sum beta_t (grad_t + p_t)
    let primal_form: f64 = (0..l).map(|t| alpha[t] * (grad[t] + p[t])).sum::<f64>() * 0.5;

    Ok(DualSolution {
        coefs: (0..n).map(|s| alpha[s] - alpha[s + n]).collect(),
        abs_sum: (0..n).map(|s| alpha[s] + alpha[s + n]).collect(),
        bias: -rho,
        objective: -primal_form,
        iterations,
        violation,
    })
}
