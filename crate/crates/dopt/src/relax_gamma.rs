//! The Γ-function and the Γ-relaxation for 0/1 instances: a concave spectral
//! bound built on the orthonormal complement of the design's left singular
//! space, exact at binary points, with a closed-form dual certificate under
//! general (node) bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, LogDet, SpectralDecomp};
use crate::relax::{
    extreme_point, frank_wolfe, interior_point, kkt_multipliers, DualCertificate, RelaxObjective,
    RelaxOptions, RelaxResult,
};

/// Relative floor below which eigenvalues count as zero for rank purposes.
const EIG_RANK_TOL: f64 = 1e-9;

/// SVD data of the design plus the complement factor `W` with
/// `WWᵀ = I − UUᵀ`, and the additive constant `2 Σ log σ_i = ldet(AᵀA)`.
#[derive(Debug, Clone)]
pub struct GammaContext {
    pub u_basis: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub w: DMatrix<f64>,
    pub const_term: f64,
}

pub fn build_gamma_context(a: &DMatrix<f64>) -> Result<GammaContext> {
    let svd = linalg::thin_svd(a)?;
    let w = linalg::complement_factor(&svd.u);
    let const_term = 2.0 * svd.sigma.iter().map(|&s| s.ln()).sum::<f64>();
    Ok(GammaContext { u_basis: svd.u, sigma: svd.sigma, w, const_term })
}

/// The unique index ι with `λ_ι > (1/(t−ι)) Σ_{ℓ>ι} λ_ℓ ≥ λ_{ι+1}`
/// (convention `λ_0 = +∞`), for a non-increasing nonnegative sequence.
pub fn gamma_iota(lam: &[f64], t: usize) -> usize {
    assert!(t >= 1 && t <= lam.len(), "need 0 < t <= n");
    for k in 1..lam.len() {
        assert!(
            lam[k - 1] >= lam[k] - 1e-12 * lam[0].abs().max(1.0),
            "eigenvalue sequence must be non-increasing"
        );
    }
    let mut tail: f64 = lam.iter().sum();
    for iota in 0..t {
        let avg = tail / (t - iota) as f64;
        let next = if iota < lam.len() { lam[iota] } else { 0.0 };
        if avg >= next {
            return iota;
        }
        tail -= lam[iota];
    }
    t - 1
}

/// Value of the head/tail split `φ_t` at the sequence: ι, the tail average
/// δ, and `Σ_{ℓ≤ι} log λ_ℓ + (t−ι) log δ` (−∞ when δ = 0).
#[derive(Debug, Clone, Copy)]
pub struct GammaEval {
    pub t: usize,
    pub iota: usize,
    pub delta: f64,
    pub value: LogDet,
}

pub fn gamma_value(lam: &[f64], t: usize) -> GammaEval {
    if t == 0 {
        return GammaEval { t, iota: 0, delta: 0.0, value: LogDet::Finite(0.0) };
    }
    let iota = gamma_iota(lam, t);
    let tail: f64 = lam[iota..].iter().sum();
    let delta = tail / (t - iota) as f64;
    let value = if delta <= 0.0 {
        LogDet::NegInfinity
    } else {
        let head: f64 = lam[..iota].iter().map(|&v| v.ln()).sum();
        LogDet::Finite(head + (t - iota) as f64 * delta.ln())
    };
    GammaEval { t, iota, delta, value }
}

/// `Γ_t(X) = φ_t(λ(X))` for a positive-semidefinite matrix; eigenvalues
/// slightly below zero are clamped.
pub fn gamma_of_matrix(x: &DMatrix<f64>, t: usize) -> LogDet {
    let dec = linalg::spectral_decomposition(x);
    let lam: Vec<f64> = dec.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    gamma_value(&lam, t).value
}

/// Γ-relaxation objective over a factor `F` (rows `f_iᵀ`): maximize
/// `const + Γ_t(FᵀDiag(y)F)`.
pub(crate) struct GammaObjective<'a> {
    pub f: &'a DMatrix<f64>,
    pub const_term: f64,
    pub t: usize,
}

struct GammaPoint {
    dec: SpectralDecomp,
    lam: Vec<f64>,
    eval: GammaEval,
}

impl<'a> GammaObjective<'a> {
    fn factor_gram(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let k = self.f.ncols();
        let mut out = DMatrix::<f64>::zeros(k, k);
        for (i, &w) in y.iter().enumerate() {
            if w != 0.0 {
                let v = self.f.row(i).transpose();
                out.ger(w, &v, &v, 1.0);
            }
        }
        out
    }

    fn analyze(&self, y: &DVector<f64>) -> GammaPoint {
        let gram = self.factor_gram(y);
        let dec = linalg::spectral_decomposition(&gram);
        let lam: Vec<f64> = dec.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let eval = gamma_value(&lam, self.t);
        GammaPoint { dec, lam, eval }
    }

    /// Supergradient coefficients 1/λ̂_ℓ on the head, 1/δ̂ on the tail
    /// (the ε = 0 choice, so rank-deficient directions share 1/δ̂).
    fn beta(&self, pt: &GammaPoint) -> Vec<f64> {
        let mut beta = Vec::with_capacity(pt.lam.len());
        for (idx, &lv) in pt.lam.iter().enumerate() {
            if idx < pt.eval.iota {
                beta.push(1.0 / lv);
            } else {
                beta.push(1.0 / pt.eval.delta);
            }
        }
        beta
    }

    fn scores(&self, pt: &GammaPoint, beta: &[f64]) -> DVector<f64> {
        // c_i = f_iᵀ Θ̂ f_i with Θ̂ = Σ β̂_ℓ û_ℓ û_ℓᵀ
        let proj = self.f * &pt.dec.eigenvectors; // n × k
        let n = self.f.nrows();
        let mut c = DVector::<f64>::zeros(n);
        for i in 0..n {
            let mut acc = 0.0;
            for (k, &b) in beta.iter().enumerate() {
                let t = proj[(i, k)];
                acc += b * t * t;
            }
            c[i] = acc;
        }
        c
    }
}

impl<'a> RelaxObjective for GammaObjective<'a> {
    fn eval(&self, y: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let pt = self.analyze(y);
        let value = pt.eval.value.finite()?;
        let beta = self.beta(&pt);
        let g = self.scores(&pt, &beta);
        Some((self.const_term + value, g))
    }

    fn line_search(&self, y: &DVector<f64>, d: &DVector<f64>, gamma_max: f64) -> f64 {
        if self.t == 0 {
            return 0.0;
        }
        let y0 = self.factor_gram(y);
        let dy = self.factor_gram(d);
        // directional derivative trace(Θ̂(γ) ΔY); the supergradient
        // coefficients are continuous across head/tail crossings, so a sign
        // bisection on the concave section works. Returns None past the
        // finite region (rank below t).
        let der = |g: f64| -> Option<f64> {
            let m = &y0 + &dy * g;
            let dec = linalg::spectral_decomposition(&m);
            let lam: Vec<f64> = dec.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
            let eval = gamma_value(&lam, self.t);
            eval.value.finite()?;
            let mut acc = 0.0;
            for (k, &lv) in lam.iter().enumerate() {
                let beta = if k < eval.iota { 1.0 / lv } else { 1.0 / eval.delta };
                let uk = dec.eigenvectors.column(k);
                acc += beta * (uk.transpose() * &dy * uk)[0];
            }
            Some(acc)
        };
        match der(0.0) {
            Some(d0) if d0 > 0.0 => {}
            _ => return 0.0,
        }
        let mut hi = gamma_max;
        let mut hi_der = der(hi);
        let mut shrink = 0;
        while hi_der.is_none() && shrink < 60 {
            hi *= 0.5;
            hi_der = der(hi);
            shrink += 1;
        }
        let mut lo = 0.0;
        match hi_der {
            Some(dh) if dh >= 0.0 => return hi,
            Some(_) => {}
            None => return 0.0,
        }
        while hi - lo > 1e-11 {
            let mid = 0.5 * (lo + hi);
            match der(mid) {
                Some(dm) if dm > 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        0.5 * (lo + hi)
    }

    fn certificate(
        &self,
        y: &DVector<f64>,
        l: &[i64],
        u: &[i64],
        budget: i64,
    ) -> Result<DualCertificate> {
        gamma_factor_certificate(self.f, self.const_term, self.t, y, l, u, budget)
    }
}

fn gamma_factor_certificate(
    f: &DMatrix<f64>,
    const_term: f64,
    t: usize,
    y_hat: &DVector<f64>,
    l: &[i64],
    u: &[i64],
    budget: i64,
) -> Result<DualCertificate> {
    let obj = GammaObjective { f, const_term, t };
    if t == 0 {
        let k = f.ncols();
        return Ok(DualCertificate {
            theta: DMatrix::identity(k, k),
            omega: DVector::zeros(f.nrows()),
            nu: DVector::zeros(f.nrows()),
            tau: 0.0,
            value: const_term,
        });
    }
    let pt = obj.analyze(y_hat);
    let lam_max = pt.lam.first().copied().unwrap_or(0.0);
    let rank = pt.lam.iter().filter(|&&v| v > EIG_RANK_TOL * lam_max).count();
    if rank < t || !pt.eval.value.is_finite() {
        return Err(Error::SingularPrimal(format!(
            "factor gram has rank {rank} < t = {t}"
        )));
    }
    let beta = obj.beta(&pt);
    let c = obj.scores(&pt, &beta);
    let kkt = kkt_multipliers(&c, l, u, budget)?;
    // the t smallest eigenvalues of Θ̂ are the first t entries of β̂
    let gamma_part: f64 = -beta.iter().take(t).map(|&b| b.ln()).sum::<f64>();
    let mut value = const_term + gamma_part + kkt.tau * budget as f64 - t as f64;
    for i in 0..f.nrows() {
        value += -kkt.omega[i] * l[i] as f64 + kkt.nu[i] * u[i] as f64;
    }
    let k = f.ncols();
    let mut theta = DMatrix::<f64>::zeros(k, k);
    for (idx, &b) in beta.iter().enumerate() {
        let col = pt.dec.eigenvectors.column(idx);
        theta.ger(b, &col.into_owned(), &col.into_owned(), 1.0);
    }
    Ok(DualCertificate { theta, omega: kkt.omega, nu: kkt.nu, tau: kkt.tau, value })
}

/// Solve `max const + Γ_t(FᵀDiag(y)F)` over `{eᵀy = t, ly ≤ y ≤ uy}` for a
/// generic factor matrix. Shared by the 0/1 design bound (F = W) and the
/// data-fusion Γ bounds.
pub(crate) fn solve_gamma_factor_relaxation(
    f: &DMatrix<f64>,
    const_term: f64,
    ly: &[i64],
    uy: &[i64],
    t: usize,
    opts: &RelaxOptions,
) -> Result<RelaxResult> {
    let n = f.nrows();
    if t == 0 {
        let cert = gamma_factor_certificate(f, const_term, 0, &DVector::zeros(n), ly, uy, 0)?;
        return Ok(RelaxResult {
            x_hat: DVector::from_iterator(n, ly.iter().map(|&v| v as f64)),
            primal_value: const_term,
            certificate: cert,
            gap: 0.0,
            iterations: 0,
        });
    }
    let obj = GammaObjective { f, const_term, t };
    let y0 = find_rank_start(&obj, ly, uy, t as i64)?;
    frank_wolfe(&obj, y0, ly, uy, t as i64, opts)
}

fn find_rank_start(
    obj: &GammaObjective<'_>,
    ly: &[i64],
    uy: &[i64],
    budget: i64,
) -> Result<DVector<f64>> {
    let y0 = interior_point(ly, uy, budget);
    if obj.eval(&y0).is_some() {
        return Ok(y0);
    }
    // blend toward mass on the heaviest factor rows
    let score: Vec<f64> = (0..obj.f.nrows()).map(|i| obj.f.row(i).norm_squared()).collect();
    if let Ok(target) = extreme_point(&score, ly, uy, budget) {
        let t = DVector::from_iterator(target.len(), target.iter().map(|&v| v as f64));
        for k in 1..=50 {
            let beta = k as f64 / 50.0;
            let cand = &y0 * (1.0 - beta) + &t * beta;
            if obj.eval(&cand).is_some() {
                return Ok(cand);
            }
        }
    }
    Err(Error::NodePruneSingular)
}

/// Solve the Γ-relaxation of a 0/1 design in complement space: bounds are on
/// `y = e − x`, the budget is `t = n − s`, and the reported value includes
/// the `ldet(AᵀA)` constant.
pub fn solve_gamma_relaxation(
    ctx: &GammaContext,
    ly: &[i64],
    uy: &[i64],
    t: usize,
    opts: &RelaxOptions,
) -> Result<RelaxResult> {
    solve_gamma_factor_relaxation(&ctx.w, ctx.const_term, ly, uy, t, opts)
}

/// Dual certificate of the Γ-relaxation at a feasible `ŷ` (complement space).
pub fn gamma_dual_certificate(
    ctx: &GammaContext,
    y_hat: &DVector<f64>,
    ly: &[i64],
    uy: &[i64],
    t: usize,
) -> Result<DualCertificate> {
    gamma_factor_certificate(&ctx.w, ctx.const_term, t, y_hat, ly, uy, t as i64)
}
