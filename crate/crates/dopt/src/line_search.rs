//! Integer line search along exchange directions: feasibility intervals for
//! `x + k d`, and closed-form stationary points of
//! `g(k) = ldet(B + kV)` for rank-2 and rank-3 update matrices `V`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{solve_lower, spectral_decomposition, LogDet};

pub(crate) fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

pub(crate) fn div_ceil(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

/// Integer steps `k` keeping `l ≤ x + k d ≤ u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInterval {
    pub k_min: i64,
    pub k_max: i64,
}

pub fn step_interval(x: &[i64], d: &[i64], l: &[i64], u: &[i64]) -> StepInterval {
    let mut k_min = i64::MIN / 4;
    let mut k_max = i64::MAX / 4;
    for i in 0..x.len() {
        if d[i] > 0 {
            k_min = k_min.max(div_ceil(l[i] - x[i], d[i]));
            k_max = k_max.min(div_floor(u[i] - x[i], d[i]));
        } else if d[i] < 0 {
            k_min = k_min.max(div_ceil(u[i] - x[i], d[i]));
            k_max = k_max.min(div_floor(l[i] - x[i], d[i]));
        }
    }
    StepInterval { k_min, k_max }
}

/// Result of an integer line search: the real stationary point (when the
/// closed form applies), the best feasible integer step, and its exact
/// objective change.
#[derive(Debug, Clone, Copy)]
pub struct StepChoice {
    pub k_stationary: Option<f64>,
    pub k_best: i64,
    pub delta: LogDet,
}

/// Objective change of the rank-2 exchange `B + k(v_i v_iᵀ − v_j v_jᵀ)` as a
/// function of the inner products `γ`:
/// `log(k²(γ_ij² − γ_ii γ_jj) + k(γ_ii − γ_jj) + 1)`.
pub(crate) fn rank2_delta(g11: f64, g22: f64, g12: f64, k: f64) -> LogDet {
    let arg = k * k * (g12 * g12 - g11 * g22) + k * (g11 - g22) + 1.0;
    if arg > 0.0 {
        LogDet::Finite(arg.ln())
    } else {
        LogDet::NegInfinity
    }
}

/// Closed-form rank-2 step: stationary point
/// `k̄ = (γ_ii − γ_jj) / (2(γ_ii γ_jj − γ_ij²))`, then the best integer among
/// its floor/ceil and the interval endpoints. A degenerate denominator
/// (vectors parallel in the B-metric) falls back to an endpoint scan.
pub fn rank2_optimal_step_from_gammas(
    g11: f64,
    g22: f64,
    g12: f64,
    interval: StepInterval,
) -> StepChoice {
    let den = 2.0 * (g11 * g22 - g12 * g12);
    let k_stationary = if den.abs() > 1e-14 { Some((g11 - g22) / den) } else { None };
    let mut candidates: Vec<i64> = Vec::with_capacity(4);
    if let Some(kb) = k_stationary {
        for k in [kb.floor() as i64, kb.ceil() as i64] {
            if k >= interval.k_min && k <= interval.k_max {
                candidates.push(k);
            }
        }
    }
    candidates.push(interval.k_min);
    candidates.push(interval.k_max);
    candidates.sort_unstable();
    candidates.dedup();
    let mut best = StepChoice { k_stationary, k_best: 0, delta: LogDet::Finite(0.0) };
    for &k in &candidates {
        if k == 0 || k < interval.k_min || k > interval.k_max {
            continue;
        }
        let delta = rank2_delta(g11, g22, g12, k as f64);
        if delta.as_f64() > best.delta.as_f64() {
            best.k_best = k;
            best.delta = delta;
        }
    }
    best
}

/// Rank-2 step for the exchange pair `(i1, i2)` given `B⁻¹`.
pub fn rank2_optimal_step(
    binv: &DMatrix<f64>,
    v1: &DVector<f64>,
    v2: &DVector<f64>,
    interval: StepInterval,
) -> StepChoice {
    let q = binv * v1;
    let g11 = v1.dot(&q);
    let g12 = v2.dot(&q);
    let g22 = v2.dot(&(binv * v2));
    rank2_optimal_step_from_gammas(g11, g22, g12, interval)
}

/// Closed-form rank-3 step along `d` with three nonzero entries summing to
/// zero. Eigenvalues of `B^{-1/2} V B^{-1/2}` must have three nonzeros; with
/// sign pattern (+,−,−) the stationary point is the smaller quadratic root
/// `k̄₋ = (−b − √(b²−4ac))/(2a)`; the (−,−,+) pattern is handled by negating
/// the direction, which flips the root's sign.
pub fn rank3_optimal_step(
    chol_b: &DMatrix<f64>,
    rows: &[(usize, i64, DVector<f64>)],
    x: &[i64],
    d: &[i64],
    l: &[i64],
    u: &[i64],
) -> Result<StepChoice> {
    let m = chol_b.nrows();
    let mut v = DMatrix::<f64>::zeros(m, m);
    for (_, coef, row) in rows {
        v.ger(*coef as f64, row, row, 1.0);
    }
    // eigenvalues of B^{-1/2} V B^{-1/2} via L^{-1} V L^{-T}
    let mut w = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        w.set_column(j, &solve_lower(chol_b, &v.column(j).into_owned()));
    }
    let mut c = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        c.set_column(j, &solve_lower(chol_b, &w.row(j).transpose()));
    }
    let c = (&c + c.transpose()) * 0.5;
    let eig = spectral_decomposition(&c).eigenvalues;
    let scale = eig.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let nz: Vec<f64> = eig.iter().copied().filter(|v| v.abs() > 1e-9 * scale).collect();
    if nz.len() != 3 {
        return Err(Error::RankDrop(format!("{} nonzero eigenvalues, need 3", nz.len())));
    }
    let pos = nz.iter().filter(|&&v| v > 0.0).count();
    let (lam, flipped) = match pos {
        1 => {
            let mut s = nz.clone();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            (s, false)
        }
        2 => {
            let mut s: Vec<f64> = nz.iter().map(|&v| -v).collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            (s, true)
        }
        _ => {
            return Err(Error::RankDrop(format!("sign pattern with {pos} positive eigenvalues")));
        }
    };
    let (l1, l2, l3) = (lam[0], lam[1], lam[2]);
    let a = 3.0 * l1 * l2 * l3;
    let b = 2.0 * (l1 * l2 + l1 * l3 + l2 * l3);
    let cc = l1 + l2 + l3;
    let mut disc = b * b - 4.0 * a * cc;
    let disc_scale = (b * b).max((4.0 * a * cc).abs()).max(1.0);
    assert!(disc >= -1e-12 * disc_scale, "negative discriminant {disc}");
    if disc < 0.0 {
        disc = 0.0;
    }
    let k_bar_flipped = if a.abs() > 1e-300 {
        (-b - disc.sqrt()) / (2.0 * a)
    } else {
        -cc / b
    };
    let k_bar = if flipped { -k_bar_flipped } else { k_bar_flipped };

    let interval = step_interval(x, d, l, u);
    let mut candidates = vec![
        k_bar.floor() as i64,
        k_bar.ceil() as i64,
        interval.k_min,
        interval.k_max,
    ];
    candidates.sort_unstable();
    candidates.dedup();
    let delta_at = |k: i64| -> LogDet {
        let mut acc = 0.0;
        for &lv in &nz {
            let t = 1.0 + k as f64 * lv;
            if t <= 0.0 {
                return LogDet::NegInfinity;
            }
            acc += t.ln();
        }
        LogDet::Finite(acc)
    };
    let mut best = StepChoice { k_stationary: Some(k_bar), k_best: 0, delta: LogDet::Finite(0.0) };
    for &k in &candidates {
        if k == 0 || k < interval.k_min || k > interval.k_max {
            continue;
        }
        let delta = delta_at(k);
        if delta.as_f64() > best.delta.as_f64() {
            best.k_best = k;
            best.delta = delta;
        }
    }
    Ok(best)
}
