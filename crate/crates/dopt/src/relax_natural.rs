//! The natural continuous relaxation: maximize `ldet(AᵀDiag(x)A)` over the
//! box-and-budget polytope, with the closed-form dual certificate built from
//! any positive-definite primal point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heuristics::independent_rows;
use crate::linalg::{
    cholesky_with_tol, inverse_from_chol, logdet_from_chol, solve_lower, spectral_decomposition,
    SINGULAR_TOL,
};
use crate::model::Instance;
use crate::relax::{
    extreme_point, frank_wolfe, interior_point, kkt_multipliers, DualCertificate, RelaxObjective,
    RelaxOptions, RelaxResult,
};

pub(crate) struct NaturalObjective<'a> {
    pub a: &'a DMatrix<f64>,
}

impl<'a> NaturalObjective<'a> {
    fn info_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = self.a.ncols();
        let mut out = DMatrix::<f64>::zeros(m, m);
        for (i, &w) in x.iter().enumerate() {
            if w != 0.0 {
                let v = self.a.row(i).transpose();
                out.ger(w, &v, &v, 1.0);
            }
        }
        out
    }
}

impl<'a> RelaxObjective for NaturalObjective<'a> {
    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let m = self.info_matrix(x);
        let l = cholesky_with_tol(&m, SINGULAR_TOL)?;
        let f = logdet_from_chol(&l);
        let n = self.a.nrows();
        let mut g = DVector::<f64>::zeros(n);
        for i in 0..n {
            let w = solve_lower(&l, &self.a.row(i).transpose());
            g[i] = w.norm_squared();
        }
        Some((f, g))
    }

    fn line_search(&self, x: &DVector<f64>, d: &DVector<f64>, gamma_max: f64) -> f64 {
        // along the segment the objective is ldet(M0 + γ D) = const + Σ log(1 + γ μ_i)
        let m0 = self.info_matrix(x);
        let l = match cholesky_with_tol(&m0, SINGULAR_TOL) {
            Some(l) => l,
            None => return 0.0,
        };
        let dm = self.info_matrix(d); // Diag(d) may be indefinite; ger handles signs
        let k = m0.nrows();
        let mut w = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            w.set_column(j, &solve_lower(&l, &dm.column(j).into_owned()));
        }
        let mut c = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            c.set_column(j, &solve_lower(&l, &w.row(j).transpose()));
        }
        let c = (&c + c.transpose()) * 0.5;
        let mu = spectral_decomposition(&c).eigenvalues;

        let mut hi = gamma_max;
        for &m in mu.iter() {
            if m < 0.0 {
                hi = hi.min(-1.0 / m * (1.0 - 1e-12));
            }
        }
        if hi <= 0.0 {
            return 0.0;
        }
        let der = |g: f64| mu.iter().map(|&m| m / (1.0 + g * m)).sum::<f64>();
        if der(0.0) <= 0.0 {
            return 0.0;
        }
        if der(hi) >= 0.0 {
            return hi;
        }
        let mut lo = 0.0;
        let mut up = hi;
        while up - lo > 1e-12 {
            let mid = 0.5 * (lo + up);
            if der(mid) > 0.0 {
                lo = mid;
            } else {
                up = mid;
            }
        }
        0.5 * (lo + up)
    }

    fn certificate(
        &self,
        x: &DVector<f64>,
        l: &[i64],
        u: &[i64],
        budget: i64,
    ) -> Result<DualCertificate> {
        natural_certificate(self.a, x, l, u, budget)
    }
}

fn natural_certificate(
    a: &DMatrix<f64>,
    x_hat: &DVector<f64>,
    l: &[i64],
    u: &[i64],
    budget: i64,
) -> Result<DualCertificate> {
    let obj = NaturalObjective { a };
    let m_mat = obj.info_matrix(x_hat);
    let lfac = cholesky_with_tol(&m_mat, SINGULAR_TOL)
        .ok_or_else(|| Error::SingularPrimal("information matrix not positive definite".into()))?;
    let theta = inverse_from_chol(&lfac);
    let n = a.nrows();
    let mut c = DVector::<f64>::zeros(n);
    for i in 0..n {
        let w = solve_lower(&lfac, &a.row(i).transpose());
        c[i] = w.norm_squared();
    }
    let kkt = kkt_multipliers(&c, l, u, budget)?;
    let m = a.ncols() as f64;
    let ldet_m = logdet_from_chol(&lfac);
    let mut value = ldet_m + kkt.tau * budget as f64 - m;
    for i in 0..n {
        value += -kkt.omega[i] * l[i] as f64 + kkt.nu[i] * u[i] as f64;
    }
    Ok(DualCertificate { theta, omega: kkt.omega, nu: kkt.nu, tau: kkt.tau, value })
}

/// Dual certificate of the natural relaxation at a feasible primal point,
/// with bounds taken from the instance.
pub fn dual_certificate_from_primal(inst: &Instance, x_hat: &DVector<f64>) -> Result<DualCertificate> {
    natural_certificate(inst.a(), x_hat, inst.l(), inst.u(), inst.s())
}

/// Same, with explicit (node) bounds.
pub fn dual_certificate_with_bounds(
    inst: &Instance,
    l: &[i64],
    u: &[i64],
    x_hat: &DVector<f64>,
) -> Result<DualCertificate> {
    natural_certificate(inst.a(), x_hat, l, u, inst.s())
}

/// Solve the natural relaxation over the instance bounds.
pub fn solve_natural_relaxation(inst: &Instance, opts: &RelaxOptions) -> Result<RelaxResult> {
    solve_natural_with_bounds(inst, inst.l(), inst.u(), opts)
}

/// Solve the natural relaxation with node bounds `l ≤ x ≤ u`.
///
/// The start point is the interior blend `l + θ(u−l)`; its support is the
/// largest any feasible point can have, so if it is singular every feasible
/// point is and the node prunes. A few blends toward a set of independent
/// rows guard against borderline numerics before giving up.
pub fn solve_natural_with_bounds(
    inst: &Instance,
    l: &[i64],
    u: &[i64],
    opts: &RelaxOptions,
) -> Result<RelaxResult> {
    let obj = NaturalObjective { a: inst.a() };
    let x0 = find_pd_start(&obj, inst, l, u)?;
    frank_wolfe(&obj, x0, l, u, inst.s(), opts)
}

fn find_pd_start(
    obj: &NaturalObjective<'_>,
    inst: &Instance,
    l: &[i64],
    u: &[i64],
) -> Result<DVector<f64>> {
    let x0 = interior_point(l, u, inst.s());
    if obj.eval(&x0).is_some() {
        return Ok(x0);
    }
    // blend toward a feasible point concentrated on independent rows
    if let Ok((rows, _)) = independent_rows(inst.a()) {
        let score: Vec<f64> =
            (0..inst.n()).map(|i| if rows.contains(&i) { 1.0 } else { 0.0 }).collect();
        if let Ok(target) = extreme_point(&score, l, u, inst.s()) {
            let t = DVector::from_iterator(target.len(), target.iter().map(|&v| v as f64));
            for k in 1..=50 {
                let beta = k as f64 / 50.0;
                let cand = &x0 * (1.0 - beta) + &t * beta;
                if obj.eval(&cand).is_some() {
                    return Ok(cand);
                }
            }
        }
    }
    Err(Error::NodePruneSingular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, gen_binary_gaussian, Instance, Kind};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar_instance() -> Instance {
        Instance::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            vec![0, 0],
            vec![1, 1],
            1,
            Kind::Binary,
        )
        .unwrap()
    }

    #[test]
    fn scalar_relaxation_optimum() {
        let inst = scalar_instance();
        let res = solve_natural_relaxation(&inst, &RelaxOptions::default()).unwrap();
        assert_relative_eq!(res.primal_value, 4.0_f64.ln(), epsilon = 1e-6);
        assert!(res.gap <= 1e-6 + 1e-9);
        assert!((res.x_hat[0]).abs() < 1e-6);
        assert!((res.x_hat[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_certificate_closed_form() {
        let inst = scalar_instance();
        let x_hat = DVector::from_vec(vec![0.0, 1.0]);
        let cert = dual_certificate_from_primal(&inst, &x_hat).unwrap();
        assert_relative_eq!(cert.value, 4.0_f64.ln(), epsilon = 1e-12);
        // stationarity of (c, omega, nu, tau)
        let c = [0.25, 1.0];
        for i in 0..2 {
            let r = c[i] + cert.omega[i] - cert.nu[i] - cert.tau;
            assert!(r.abs() <= 1e-12);
        }
        // weak duality against both feasible points
        for x in [[1i64, 0], [0, 1]] {
            let v = evaluate(&inst, &x).unwrap().as_f64();
            assert!(v <= cert.value + 1e-9);
        }
    }

    #[test]
    fn symmetric_instance_uniform_solution() {
        // all rows identical up to sign: the concave program has the
        // symmetric solution s/n * e
        let a = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let inst = Instance::new(a, vec![0; 4], vec![1; 4], 2, Kind::Binary).unwrap();
        let res = solve_natural_relaxation(&inst, &RelaxOptions::default()).unwrap();
        assert_relative_eq!(res.primal_value, 2.0_f64.ln(), epsilon = 1e-8);
        assert!(res.gap <= 1e-6 + 1e-9);
    }

    #[test]
    fn inexact_primal_still_upper_bounds() {
        let inst = gen_binary_gaussian(9, 3, 4, 5);
        // deliberately coarse solve
        let coarse = RelaxOptions { tol: 1e-1, max_iter: 5, ..Default::default() };
        let res = solve_natural_relaxation(&inst, &coarse).unwrap();
        let tight = RelaxOptions { tol: 1e-9, max_iter: 5000, ..Default::default() };
        let exact = solve_natural_relaxation(&inst, &tight).unwrap();
        assert!(res.certificate.value >= exact.primal_value - 1e-9);
        assert!(res.gap >= -1e-9);
    }

    #[test]
    fn weak_duality_against_brute_force() {
        for seed in 0..5 {
            let inst = gen_binary_gaussian(8, 3, 4, seed);
            let res =
                solve_natural_relaxation(&inst, &RelaxOptions { tol: 1e-8, max_iter: 4000, ..Default::default() })
                    .unwrap();
            let best = crate::bnb::brute_force_dopt(&inst).unwrap();
            assert!(
                best.objective.as_f64() <= res.certificate.value + 1e-7,
                "brute {} vs bound {}",
                best.objective.as_f64(),
                res.certificate.value
            );
        }
    }
}
