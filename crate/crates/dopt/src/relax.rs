//! Shared relaxation machinery: the closed-form linear oracle over
//! `{eᵀx = budget, l ≤ x ≤ u}`, the KKT multiplier construction used by the
//! dual certificates, and a Frank-Wolfe driver (with away steps) whose
//! stopping rule is the certified dual gap.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feasible point of the Lagrangian dual together with its objective value,
/// a valid upper bound for the node regardless of primal accuracy.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub theta: DMatrix<f64>,
    pub omega: DVector<f64>,
    pub nu: DVector<f64>,
    pub tau: f64,
    pub value: f64,
}

/// Outcome of a relaxation solve.
#[derive(Debug, Clone)]
pub struct RelaxResult {
    pub x_hat: DVector<f64>,
    pub primal_value: f64,
    pub certificate: DualCertificate,
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RelaxOptions {
    /// Stop once the certified dual gap falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Stop as soon as the certified upper bound drops to this value or
    /// below (the caller will discard the node anyway).
    pub prune_target: Option<f64>,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions { tol: 1e-6, max_iter: 2000, prune_target: None }
    }
}

/// Maximize `cᵀx` over `{eᵀx = budget, l ≤ x ≤ u}`: sort scores
/// non-increasing (stable), fill upper bounds while the prefix fits, give
/// the pivot coordinate the remainder, leave the rest at their lower bound.
pub fn extreme_point(c: &[f64], l: &[i64], u: &[i64], budget: i64) -> Result<Vec<i64>> {
    Ok(greedy_fill(c, l, u, budget)?.x)
}

pub(crate) struct GreedyFill {
    pub x: Vec<i64>,
    /// indices sorted by score, non-increasing
    pub sigma: Vec<usize>,
    /// number of coordinates set to their upper bound (prefix of sigma)
    pub phi: usize,
}

fn greedy_fill(c: &[f64], l: &[i64], u: &[i64], budget: i64) -> Result<GreedyFill> {
    let n = c.len();
    let sum_l: i64 = l.iter().sum();
    let sum_u: i64 = u.iter().sum();
    if sum_l > budget || budget > sum_u {
        return Err(Error::Infeasible(format!(
            "empty polytope: e'l={sum_l}, e'u={sum_u}, budget={budget}"
        )));
    }
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.sort_by(|&i, &j| c[j].partial_cmp(&c[i]).unwrap());

    // largest prefix of sigma that can sit at its upper bound
    let mut phi = 0usize;
    let mut head = 0i64; // sum of u over the prefix
    let mut tail = sum_l; // sum of l over the complement
    while phi < n {
        let idx = sigma[phi];
        if head + u[idx] + (tail - l[idx]) <= budget {
            head += u[idx];
            tail -= l[idx];
            phi += 1;
        } else {
            break;
        }
    }
    let mut x: Vec<i64> = l.to_vec();
    for &idx in sigma.iter().take(phi) {
        x[idx] = u[idx];
    }
    if phi < n {
        let pivot = sigma[phi];
        let rest: i64 = budget - head - (tail - l[pivot]);
        debug_assert!(rest >= l[pivot] && rest <= u[pivot]);
        x[pivot] = rest;
    }
    Ok(GreedyFill { x, sigma, phi })
}

/// Optimal multipliers of the score-LP: `τ* = c_pivot`, `ν* = c − τ*` on the
/// saturated prefix, `ω* = τ* − c` past the pivot, zero elsewhere.
pub(crate) struct KktMultipliers {
    /// the LP maximizer realizing complementary slackness
    #[allow(dead_code)]
    pub x: Vec<i64>,
    pub tau: f64,
    pub nu: DVector<f64>,
    pub omega: DVector<f64>,
}

pub(crate) fn kkt_multipliers(
    c: &DVector<f64>,
    l: &[i64],
    u: &[i64],
    budget: i64,
) -> Result<KktMultipliers> {
    let n = c.len();
    let fill = greedy_fill(c.as_slice(), l, u, budget)?;
    let tau = if fill.phi < n { c[fill.sigma[fill.phi]] } else { c[fill.sigma[n - 1]] };
    let mut nu = DVector::<f64>::zeros(n);
    let mut omega = DVector::<f64>::zeros(n);
    let upto = if fill.phi < n { fill.phi } else { n };
    for &idx in fill.sigma.iter().take(upto) {
        nu[idx] = (c[idx] - tau).max(0.0);
    }
    if fill.phi + 1 < n {
        for &idx in fill.sigma.iter().skip(fill.phi + 1) {
            omega[idx] = (tau - c[idx]).max(0.0);
        }
    }
    Ok(KktMultipliers { x: fill.x, tau, nu, omega })
}

/// Concave objective over the box-and-budget polytope, as consumed by the
/// Frank-Wolfe driver. `eval` returns the primal bound value (including any
/// additive constant) and the supergradient, or `None` at singular points.
pub(crate) trait RelaxObjective {
    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)>;
    /// Exact maximizer of the objective along `x + γ d` for `γ ∈ [0, γ_max]`.
    fn line_search(&self, x: &DVector<f64>, d: &DVector<f64>, gamma_max: f64) -> f64;
    /// Full dual certificate at a primal point.
    fn certificate(&self, x: &DVector<f64>, l: &[i64], u: &[i64], budget: i64)
        -> Result<DualCertificate>;
}

struct Atom {
    point: DVector<f64>,
    weight: f64,
    key: Option<Vec<i64>>,
}

/// Frank-Wolfe with away steps. The linear oracle is `extreme_point`; the
/// iterate is kept as an explicit convex combination of the starting point
/// and oracle vertices so away steps can strip weight from bad vertices.
/// Terminates when the certified dual gap drops below `opts.tol`.
pub(crate) fn frank_wolfe<O: RelaxObjective>(
    obj: &O,
    x0: DVector<f64>,
    l: &[i64],
    u: &[i64],
    budget: i64,
    opts: &RelaxOptions,
) -> Result<RelaxResult> {
    let (mut f, mut g) = obj
        .eval(&x0)
        .ok_or(Error::NodePruneSingular)?;
    let mut atoms: Vec<Atom> = vec![Atom { point: x0.clone(), weight: 1.0, key: None }];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut x = x0;

    let mut best_cert_value = f64::INFINITY;
    let mut best_cert_x = x.clone();
    let mut iterations = 0usize;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let vertex = extreme_point(g.as_slice(), l, u, budget)?;
        let v = DVector::from_iterator(vertex.len(), vertex.iter().map(|&t| t as f64));
        let fw_gap = g.dot(&v) - g.dot(&x);
        let zeta = f + fw_gap;
        if zeta < best_cert_value {
            best_cert_value = zeta;
            best_cert_x = x.clone();
        }
        if best_cert_value - f <= opts.tol {
            break;
        }
        if let Some(target) = opts.prune_target {
            if best_cert_value <= target {
                break;
            }
        }

        // away atom: the active point the gradient likes least
        let mut away_idx = 0usize;
        let mut away_score = f64::INFINITY;
        for (i, at) in atoms.iter().enumerate() {
            let s = g.dot(&at.point);
            if s < away_score {
                away_score = s;
                away_idx = i;
            }
        }
        let away_gap = g.dot(&x) - away_score;

        let take_fw = fw_gap >= away_gap || atoms[away_idx].weight >= 1.0 - 1e-14;
        let (dir, gamma_max) = if take_fw {
            (&v - &x, 1.0)
        } else {
            let w = atoms[away_idx].weight;
            ((&x - &atoms[away_idx].point), w / (1.0 - w))
        };
        let gamma = obj.line_search(&x, &dir, gamma_max);
        if gamma <= 0.0 {
            if take_fw {
                // no ascent along the oracle direction: numerically stalled
                break;
            }
            // try a plain Frank-Wolfe step instead of the away step
            let dir = &v - &x;
            let gamma = obj.line_search(&x, &dir, 1.0);
            if gamma <= 0.0 {
                break;
            }
            apply_fw_step(&mut atoms, &mut index, vertex, v, gamma);
            refresh_iterate(&mut atoms, &mut index, &mut x);
            match obj.eval(&x) {
                Some((nf, ng)) => {
                    f = nf;
                    g = ng;
                }
                None => break,
            }
            continue;
        }

        if take_fw {
            apply_fw_step(&mut atoms, &mut index, vertex, v, gamma);
        } else {
            let scale = 1.0 + gamma;
            for at in atoms.iter_mut() {
                at.weight *= scale;
            }
            atoms[away_idx].weight -= gamma;
        }
        refresh_iterate(&mut atoms, &mut index, &mut x);
        match obj.eval(&x) {
            Some((nf, ng)) => {
                f = nf;
                g = ng;
            }
            None => break,
        }
    }

    let certificate = obj.certificate(&best_cert_x, l, u, budget)?;
    let gap = certificate.value - f;
    Ok(RelaxResult { x_hat: x, primal_value: f, certificate, gap, iterations })
}

fn apply_fw_step(
    atoms: &mut Vec<Atom>,
    index: &mut HashMap<Vec<i64>, usize>,
    key: Vec<i64>,
    point: DVector<f64>,
    gamma: f64,
) {
    for at in atoms.iter_mut() {
        at.weight *= 1.0 - gamma;
    }
    if let Some(&i) = index.get(&key) {
        atoms[i].weight += gamma;
    } else {
        index.insert(key.clone(), atoms.len());
        atoms.push(Atom { point, weight: gamma, key: Some(key) });
    }
}

fn refresh_iterate(
    atoms: &mut Vec<Atom>,
    index: &mut HashMap<Vec<i64>, usize>,
    x: &mut DVector<f64>,
) {
    atoms.retain(|a| a.weight > 1e-14);
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    index.clear();
    x.fill(0.0);
    for (i, at) in atoms.iter_mut().enumerate() {
        at.weight /= total;
        x.axpy(at.weight, &at.point, 1.0);
        if let Some(key) = &at.key {
            index.insert(key.clone(), i);
        }
    }
}

/// Interior starting point `l + θ(u − l)` with `θ = (budget − eᵀl)/(eᵀu − eᵀl)`.
pub(crate) fn interior_point(l: &[i64], u: &[i64], budget: i64) -> DVector<f64> {
    let n = l.len();
    let sum_l: i64 = l.iter().sum();
    let sum_u: i64 = u.iter().sum();
    if sum_u == sum_l {
        return DVector::from_iterator(n, l.iter().map(|&v| v as f64));
    }
    let theta = (budget - sum_l) as f64 / (sum_u - sum_l) as f64;
    DVector::from_fn(n, |i, _| l[i] as f64 + theta * (u[i] - l[i]) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_point_greedy() {
        let x = extreme_point(&[3.0, 2.0, 1.0], &[0, 0, 0], &[2, 2, 2], 3).unwrap();
        assert_eq!(x, vec![2, 1, 0]);
    }

    #[test]
    fn extreme_point_constant_scores_stable() {
        let x = extreme_point(&[1.0, 1.0, 1.0, 1.0], &[0, 0, 0, 0], &[1, 1, 1, 1], 2).unwrap();
        assert_eq!(x, vec![1, 1, 0, 0]);
    }

    #[test]
    fn extreme_point_forced_full() {
        let x = extreme_point(&[0.1, 5.0], &[0, 0], &[2, 3], 5).unwrap();
        assert_eq!(x, vec![2, 3]);
    }

    #[test]
    fn extreme_point_infeasible() {
        assert!(matches!(
            extreme_point(&[1.0], &[0], &[1], 2),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn extreme_point_matches_enumeration() {
        // brute force over all integer feasible points of a small box
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(2..=5usize);
            let l: Vec<i64> = (0..n).map(|_| rng.random_range(0..=1)).collect();
            let u: Vec<i64> = l.iter().map(|&lo| lo + rng.random_range(0..=3)).collect();
            let sum_l: i64 = l.iter().sum();
            let sum_u: i64 = u.iter().sum();
            if sum_l == sum_u {
                continue;
            }
            let budget = rng.random_range(sum_l..=sum_u);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x = extreme_point(&c, &l, &u, budget).unwrap();
            let val: f64 = x.iter().zip(&c).map(|(&xi, &ci)| xi as f64 * ci).sum();
            let best = enumerate_best(&c, &l, &u, budget);
            assert!(
                (val - best).abs() <= 1e-9,
                "greedy {val} vs enumeration {best}"
            );
        }
    }

    fn enumerate_best(c: &[f64], l: &[i64], u: &[i64], budget: i64) -> f64 {
        fn rec(i: usize, rem: i64, acc: f64, c: &[f64], l: &[i64], u: &[i64], best: &mut f64) {
            if i == c.len() {
                if rem == 0 && acc > *best {
                    *best = acc;
                }
                return;
            }
            let tail_l: i64 = l[i + 1..].iter().sum();
            let tail_u: i64 = u[i + 1..].iter().sum();
            for v in l[i]..=u[i] {
                let r = rem - v;
                if r < tail_l || r > tail_u {
                    continue;
                }
                rec(i + 1, r, acc + v as f64 * c[i], c, l, u, best);
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(0, budget, 0.0, c, l, u, &mut best);
        best
    }

    #[test]
    fn kkt_multipliers_disjoint_supports() {
        let c = DVector::from_vec(vec![0.9, 0.5, 0.2, 0.7]);
        let kkt = kkt_multipliers(&c, &[0, 0, 0, 0], &[1, 1, 1, 1], 2).unwrap();
        for i in 0..4 {
            assert!(kkt.nu[i] >= 0.0 && kkt.omega[i] >= 0.0);
            assert!(kkt.nu[i] * kkt.omega[i] == 0.0);
        }
        // stationarity: c + omega - nu - tau e = 0
        for i in 0..4 {
            let r = c[i] + kkt.omega[i] - kkt.nu[i] - kkt.tau;
            assert!(r.abs() <= 1e-12, "stationarity residual {r}");
        }
    }

    #[test]
    fn interior_point_feasible() {
        let l = [0i64, 1, 0];
        let u = [2i64, 3, 1];
        let x = interior_point(&l, &u, 4);
        let sum: f64 = x.iter().sum();
        assert!((sum - 4.0).abs() <= 1e-12);
        for i in 0..3 {
            assert!(x[i] >= l[i] as f64 - 1e-12 && x[i] <= u[i] as f64 + 1e-12);
        }
    }
}
