//! Construction heuristics and exchange local searches. Move scoring relies
//! on rank-one inverse/determinant updates so a full pass costs O(n² m²)
//! rather than O(n² m³).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::line_search::{
    rank2_optimal_step_from_gammas, rank3_optimal_step, StepInterval,
};
use crate::linalg::{
    self, det_lemma_factor, sherman_morrison_update, FimState, LogDet, SINGULAR_TOL,
};
use crate::model::Instance;

const IMPROVE_TOL: f64 = 1e-9;
const REFRESH_PERIOD: usize = 64;

/// Pick `m` linearly independent rows of `A`, scanning in index order and
/// keeping each row whose residual against the chosen span is nonzero.
/// Returns the index set and its incidence vector.
pub fn independent_rows(a: &DMatrix<f64>) -> Result<(Vec<usize>, Vec<i64>)> {
    let allowed: Vec<usize> = (0..a.nrows()).collect();
    let rows = extend_independent_rows(a, &[], &allowed)?;
    let mut x = vec![0i64; a.nrows()];
    for &i in &rows {
        x[i] = 1;
    }
    Ok((rows, x))
}

/// Greedily extend the span of `seeded` rows to full rank using rows from
/// `allowed` (scanned in order). Returns only the added rows.
pub(crate) fn extend_independent_rows(
    a: &DMatrix<f64>,
    seeded: &[usize],
    allowed: &[usize],
) -> Result<Vec<usize>> {
    let m = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let push_row = |basis: &mut Vec<DVector<f64>>, i: usize| -> bool {
        let mut r = a.row(i).transpose();
        let norm0 = r.norm();
        if norm0 == 0.0 {
            return false;
        }
        for b in basis.iter() {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
        // re-orthogonalize once for stability
        for b in basis.iter() {
            let c = b.dot(&r);
            r.axpy(-c, b, 1.0);
        }
        let norm = r.norm();
        if norm > 1e-8 * norm0 {
            basis.push(r / norm);
            true
        } else {
            false
        }
    };
    for &i in seeded {
        if basis.len() == m {
            break;
        }
        push_row(&mut basis, i);
    }
    let mut added = Vec::new();
    for &i in allowed {
        if basis.len() == m {
            break;
        }
        if push_row(&mut basis, i) {
            added.push(i);
        }
    }
    if basis.len() < m {
        return Err(Error::RankDeficient(format!(
            "only {} independent rows available, need {m}",
            basis.len()
        )));
    }
    Ok(added)
}

/// Leverage-score start from the SVD: unweighted scores sum the squared
/// entries of the first `s` columns of the orthonormal basis `[U | W]`
/// (a feasible point of the continuous relaxation); weighted scores use
/// `(U_ji Σ_ii)²` and need not be feasible.
pub fn leverage_init(a: &DMatrix<f64>, s: i64, weighted: bool) -> Result<DVector<f64>> {
    let svd = linalg::thin_svd(a)?;
    let n = a.nrows();
    let m = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    if weighted {
        for j in 0..n {
            for i in 0..m {
                let t = svd.u[(j, i)] * svd.sigma[i];
                x[j] += t * t;
            }
        }
        return Ok(x);
    }
    let take = (s as usize).min(n);
    let head = take.min(m);
    for j in 0..n {
        for k in 0..head {
            x[j] += svd.u[(j, k)] * svd.u[(j, k)];
        }
    }
    if take > m {
        let w = linalg::complement_factor(&svd.u);
        for j in 0..n {
            for k in 0..(take - m) {
                x[j] += w[(j, k)] * w[(j, k)];
            }
        }
    }
    Ok(x)
}

fn order_by_scores(scores: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap());
    idx
}

/// Binary construction: ones at the independent set plus the `s − m`
/// highest-score indices outside it.
pub fn init_bin(scores: &DVector<f64>, x_tilde: &[i64], n_tilde: &[usize], s: i64) -> Vec<i64> {
    let mut x = x_tilde.to_vec();
    let mut remaining = s - n_tilde.len() as i64;
    for &j in order_by_scores(scores).iter() {
        if remaining == 0 {
            break;
        }
        if x[j] == 0 {
            x[j] = 1;
            remaining -= 1;
        }
    }
    x
}

/// Integer construction: greedy fill `ỹ_{τ(j)} = min{Δ_{τ(j)},
/// max{0, s̄ − Σ_{i<j} ỹ_{τ(i)}}}` with `Δ = u − x̃`, `s̄ = s − eᵀx̃`.
pub fn init_int(scores: &DVector<f64>, x_tilde: &[i64], u: &[i64], s: i64) -> Vec<i64> {
    let mut x = x_tilde.to_vec();
    let mut remaining = s - x_tilde.iter().sum::<i64>();
    for &j in order_by_scores(scores).iter() {
        if remaining <= 0 {
            break;
        }
        let add = (u[j] - x_tilde[j]).min(remaining).max(0);
        x[j] += add;
        remaining -= add;
    }
    x
}

/// Round a fractional point: floor, then distribute the missing budget at
/// the largest fractional parts (ties by lower index), skipping entries
/// already at their upper bound.
pub fn round_heuristic(x_hat: &DVector<f64>, l: &[i64], u: &[i64], s: i64) -> Vec<i64> {
    let n = x_hat.len();
    let mut x: Vec<i64> = (0..n)
        .map(|i| (x_hat[i].floor() as i64).clamp(l[i], u[i]))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let frac: Vec<f64> = (0..n).map(|i| x_hat[i] - x_hat[i].floor()).collect();
    order.sort_by(|&i, &j| frac[j].partial_cmp(&frac[i]).unwrap());
    let mut rem = s - x.iter().sum::<i64>();
    while rem > 0 {
        let mut moved = false;
        for &j in &order {
            if rem == 0 {
                break;
            }
            if x[j] < u[j] {
                x[j] += 1;
                rem -= 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    while rem < 0 {
        let mut moved = false;
        for &j in order.iter().rev() {
            if rem == 0 {
                break;
            }
            if x[j] > l[j] {
                x[j] -= 1;
                rem += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    x
}

/// Accepted-move counters: total improvements, split by unit steps
/// (`|k| = 1`) and longer steps (`|k| > 1`).
#[derive(Debug, Clone, Copy, Default)]
pub struct LsCounters {
    pub improvements: u64,
    pub k_bin: u64,
    pub k_int: u64,
}

impl LsCounters {
    pub fn merge(&mut self, other: &LsCounters) {
        self.improvements += other.improvements;
        self.k_bin += other.k_bin;
        self.k_int += other.k_int;
    }
}

/// A feasible point with its cached information-matrix state.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub x: Vec<i64>,
    pub fim: FimState,
    pub counters: LsCounters,
    accepts: usize,
    gamma_diag: Option<Vec<f64>>,
}

impl SearchState {
    pub fn new(a: &DMatrix<f64>, x: Vec<i64>) -> Result<Self> {
        let m = info_matrix(a, &x);
        let fim = FimState::from_matrix(m, SINGULAR_TOL)?;
        Ok(SearchState { x, fim, counters: LsCounters::default(), accepts: 0, gamma_diag: None })
    }

    pub fn objective(&self) -> LogDet {
        self.fim.logdet
    }

    fn refresh(&mut self, a: &DMatrix<f64>) -> Result<()> {
        let m = info_matrix(a, &self.x);
        self.fim = FimState::from_matrix(m, SINGULAR_TOL)?;
        self.gamma_diag = None;
        Ok(())
    }

    fn ensure_gamma_diag(&mut self, a: &DMatrix<f64>) -> Vec<f64> {
        if self.gamma_diag.is_none() {
            let inv = self.fim.inverse.as_ref().expect("finite state");
            let n = a.nrows();
            let mut diag = vec![0.0f64; n];
            for i in 0..n {
                let v = a.row(i).transpose();
                diag[i] = v.dot(&(inv * &v));
            }
            self.gamma_diag = Some(diag);
        }
        self.gamma_diag.clone().unwrap()
    }

    /// Apply an accepted move; falls back to a fresh factorization if the
    /// incremental update runs into trouble. Returns false when the move is
    /// numerically untenable (caller skips it).
    fn apply(&mut self, a: &DMatrix<f64>, mv: &Move) -> bool {
        let mut x = self.x.clone();
        let mut updates: Vec<(usize, i64)> = Vec::with_capacity(3);
        match mv.kind {
            MoveKind::Exchange { i, j } => {
                updates.push((i, mv.k));
                updates.push((j, -mv.k));
            }
            MoveKind::Triple { i1, i2, i3 } => {
                updates.push((i1, 2 * mv.k));
                updates.push((i2, -mv.k));
                updates.push((i3, -mv.k));
            }
        }
        for &(idx, c) in &updates {
            x[idx] += c;
        }
        let mut next = self.fim.clone();
        let mut ok = true;
        for &(idx, c) in &updates {
            match next.rank_one_update(&a.row(idx).transpose(), c as f64) {
                Ok(st) => next = st,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            match FimState::from_matrix(info_matrix(a, &x), SINGULAR_TOL) {
                Ok(st) if st.logdet.is_finite() => next = st,
                _ => return false,
            }
        }
        self.x = x;
        self.fim = next;
        self.gamma_diag = None;
        self.accepts += 1;
        self.counters.improvements += 1;
        if mv.k.abs() == 1 {
            self.counters.k_bin += 1;
        } else {
            self.counters.k_int += 1;
        }
        if self.accepts % REFRESH_PERIOD == 0 {
            let _ = self.refresh(a);
        }
        true
    }
}

pub(crate) fn info_matrix(a: &DMatrix<f64>, x: &[i64]) -> DMatrix<f64> {
    let m = a.ncols();
    let mut out = DMatrix::<f64>::zeros(m, m);
    for (i, &w) in x.iter().enumerate() {
        if w != 0 {
            let v = a.row(i).transpose();
            out.ger(w as f64, &v, &v, 1.0);
        }
    }
    out
}

/// Exchange local-search flavors: first improvement, first improvement with
/// the best partner for the chosen index, and best improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsVariant {
    Fi,
    FiPlus,
    Bi,
}

/// Which move families the search may use.
#[derive(Debug, Clone, Copy)]
pub struct MoveSet {
    pub rank2_unit: bool,
    pub rank2_opt: bool,
    pub rank3: bool,
}

impl MoveSet {
    pub fn binary() -> Self {
        MoveSet { rank2_unit: true, rank2_opt: false, rank3: false }
    }

    pub fn integer() -> Self {
        MoveSet { rank2_unit: true, rank2_opt: true, rank3: false }
    }

    pub fn integer_with_rank3() -> Self {
        MoveSet { rank2_unit: true, rank2_opt: true, rank3: true }
    }
}

#[derive(Debug, Clone, Copy)]
enum MoveKind {
    Exchange { i: usize, j: usize },
    Triple { i1: usize, i2: usize, i3: usize },
}

#[derive(Debug, Clone, Copy)]
struct Move {
    kind: MoveKind,
    k: i64,
    delta: f64,
}

/// Run the local search until no enabled move improves the objective by more
/// than 1e-9 or the deadline passes. The scan restarts from the lowest index
/// after every accepted move.
pub fn local_search(
    state: &mut SearchState,
    a: &DMatrix<f64>,
    l: &[i64],
    u: &[i64],
    variant: LsVariant,
    moves: MoveSet,
    deadline: Option<Instant>,
) {
    if !state.objective().is_finite() {
        return;
    }
    loop {
        if past(deadline) {
            return;
        }
        let mv = find_rank2_move(state, a, l, u, variant, moves, deadline);
        if let Some(mv) = mv {
            if state.apply(a, &mv) {
                continue;
            }
        }
        if moves.rank3 {
            if let Some(mv) = find_rank3_move(state, a, l, u, variant, deadline) {
                if state.apply(a, &mv) {
                    continue;
                }
            }
        }
        return;
    }
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.map(|d| Instant::now() >= d).unwrap_or(false)
}

fn find_rank2_move(
    state: &mut SearchState,
    a: &DMatrix<f64>,
    l: &[i64],
    u: &[i64],
    variant: LsVariant,
    moves: MoveSet,
    deadline: Option<Instant>,
) -> Option<Move> {
    let n = a.nrows();
    let use_opt = moves.rank2_opt;
    let diag = if use_opt { Some(state.ensure_gamma_diag(a)) } else { None };
    let binv = state.fim.inverse.clone().expect("finite state");
    let mut best_overall: Option<Move> = None;
    for i in 0..n {
        if past(deadline) {
            return best_overall;
        }
        if !use_opt && state.x[i] >= u[i] {
            continue;
        }
        if u[i] == l[i] && use_opt {
            // pinned coordinate: no exchange through i can move it
            continue;
        }
        let vi = a.row(i).transpose();
        let q = &binv * &vi;
        let (b1inv, log_fi) = if use_opt {
            (None, 0.0)
        } else {
            let fi = 1.0 + vi.dot(&q);
            match sherman_morrison_update(&binv, &vi, &vi) {
                Ok(inv) => (Some(inv), fi.ln()),
                Err(_) => continue,
            }
        };
        let mut best_for_i: Option<Move> = None;
        for j in 0..n {
            if j == i {
                continue;
            }
            let (k, delta) = if use_opt {
                let interval = pair_interval(&state.x, i, j, l, u);
                if interval.k_min == 0 && interval.k_max == 0 {
                    continue;
                }
                let diag = diag.as_ref().unwrap();
                let vj = a.row(j).transpose();
                let g12 = vj.dot(&q);
                let choice =
                    rank2_optimal_step_from_gammas(diag[i], diag[j], g12, interval);
                if choice.k_best == 0 {
                    continue;
                }
                (choice.k_best, choice.delta.as_f64())
            } else {
                if state.x[j] <= l[j] {
                    continue;
                }
                let vj = a.row(j).transpose();
                let fj = det_lemma_factor(b1inv.as_ref().unwrap(), &(-&vj), &vj);
                if fj <= 0.0 {
                    continue;
                }
                (1, log_fi + fj.ln())
            };
            if delta <= IMPROVE_TOL {
                continue;
            }
            let mv = Move { kind: MoveKind::Exchange { i, j }, k, delta };
            match variant {
                LsVariant::Fi => return Some(mv),
                LsVariant::FiPlus => {
                    if best_for_i.map(|b| delta > b.delta).unwrap_or(true) {
                        best_for_i = Some(mv);
                    }
                }
                LsVariant::Bi => {
                    if best_overall.map(|b| delta > b.delta).unwrap_or(true) {
                        best_overall = Some(mv);
                    }
                }
            }
        }
        if variant == LsVariant::FiPlus {
            if let Some(mv) = best_for_i {
                return Some(mv);
            }
        }
    }
    best_overall
}

fn pair_interval(x: &[i64], i: usize, j: usize, l: &[i64], u: &[i64]) -> StepInterval {
    // d = e_i - e_j; only two coordinates bind
    let k_max = (u[i] - x[i]).min(x[j] - l[j]);
    let k_min = (-(x[i] - l[i])).max(-(u[j] - x[j]));
    StepInterval { k_min, k_max }
}

fn find_rank3_move(
    state: &mut SearchState,
    a: &DMatrix<f64>,
    l: &[i64],
    u: &[i64],
    variant: LsVariant,
    deadline: Option<Instant>,
) -> Option<Move> {
    let n = a.nrows();
    let chol = state.fim.chol.clone().expect("finite state");
    let mut best_overall: Option<Move> = None;
    let mut d = vec![0i64; n];
    for i1 in 0..n {
        if state.x[i1] + 2 > u[i1] {
            continue;
        }
        let mut best_for_i: Option<Move> = None;
        for i2 in 0..n {
            if past(deadline) {
                return best_overall;
            }
            if i2 == i1 || state.x[i2] - 1 < l[i2] {
                continue;
            }
            for i3 in (i2 + 1)..n {
                if i3 == i1 || state.x[i3] - 1 < l[i3] {
                    continue;
                }
                d[i1] = 2;
                d[i2] = -1;
                d[i3] = -1;
                let rows = [
                    (i1, 2i64, a.row(i1).transpose()),
                    (i2, -1, a.row(i2).transpose()),
                    (i3, -1, a.row(i3).transpose()),
                ];
                let choice = rank3_optimal_step(&chol, &rows, &state.x, &d, l, u);
                d[i1] = 0;
                d[i2] = 0;
                d[i3] = 0;
                let choice = match choice {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                if choice.k_best == 0 {
                    continue;
                }
                let delta = choice.delta.as_f64();
                if delta <= IMPROVE_TOL {
                    continue;
                }
                let mv = Move { kind: MoveKind::Triple { i1, i2, i3 }, k: choice.k_best, delta };
                match variant {
                    LsVariant::Fi => return Some(mv),
                    LsVariant::FiPlus => {
                        if best_for_i.map(|b| delta > b.delta).unwrap_or(true) {
                            best_for_i = Some(mv);
                        }
                    }
                    LsVariant::Bi => {
                        if best_overall.map(|b| delta > b.delta).unwrap_or(true) {
                            best_overall = Some(mv);
                        }
                    }
                }
            }
        }
        if variant == LsVariant::FiPlus {
            if let Some(mv) = best_for_i {
                return Some(mv);
            }
        }
    }
    best_overall
}

/// Make a feasible point's support span the column space by shifting units
/// onto a set of independent rows; `None` when no finite-objective feasible
/// point exists.
pub fn repair_to_finite(
    a: &DMatrix<f64>,
    x: &[i64],
    l: &[i64],
    u: &[i64],
) -> Option<Vec<i64>> {
    let m0 = info_matrix(a, x);
    if linalg::cholesky_with_tol(&m0, SINGULAR_TOL).is_some() {
        return Some(x.to_vec());
    }
    let seeded: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0).collect();
    let allowed: Vec<usize> = (0..x.len()).filter(|&i| x[i] == 0 && u[i] >= 1).collect();
    let needed = extend_independent_rows(a, &seeded, &allowed).ok()?;
    let mut x = x.to_vec();
    for &t in &needed {
        // take one unit from the most loaded donor outside the needed set
        let donor = (0..x.len())
            .filter(|&j| x[j] > l[j] && !needed.contains(&j))
            .max_by_key(|&j| x[j] - l[j])?;
        x[donor] -= 1;
        x[t] += 1;
    }
    let m1 = info_matrix(a, &x);
    if linalg::cholesky_with_tol(&m1, SINGULAR_TOL).is_some() {
        Some(x)
    } else {
        None
    }
}

/// Best feasible point found by the construction heuristics followed by all
/// three local searches from each start.
pub struct InitialIncumbent {
    pub x: Vec<i64>,
    pub objective: LogDet,
    pub counters: LsCounters,
}

pub fn initial_incumbent(
    inst: &Instance,
    l: &[i64],
    u: &[i64],
    moves: MoveSet,
    deadline: Option<Instant>,
) -> Result<Option<InitialIncumbent>> {
    let a = inst.a();
    let s = inst.s();
    let starts = construction_starts(inst, l, u)?;
    let mut counters = LsCounters::default();
    let mut best: Option<(Vec<i64>, LogDet)> = None;
    for start in &starts {
        for variant in [LsVariant::Fi, LsVariant::FiPlus, LsVariant::Bi] {
            let mut state = match SearchState::new(a, start.clone()) {
                Ok(st) => st,
                Err(_) => continue,
            };
            if !state.objective().is_finite() {
                continue;
            }
            local_search(&mut state, a, l, u, variant, moves, deadline);
            counters.merge(&state.counters);
            let obj = state.objective();
            if best.as_ref().map(|(_, b)| obj.as_f64() > b.as_f64()).unwrap_or(true) {
                best = Some((state.x.clone(), obj));
            }
            if past(deadline) {
                break;
            }
        }
        if past(deadline) {
            break;
        }
    }
    let _ = s;
    Ok(best.map(|(x, objective)| InitialIncumbent { x, objective, counters }))
}

/// Feasible starts from the construction heuristics, adapted to general
/// lower bounds by building in shifted coordinates `x = l + x'`.
fn construction_starts(inst: &Instance, l: &[i64], u: &[i64]) -> Result<Vec<Vec<i64>>> {
    let a = inst.a();
    let n = inst.n();
    let s = inst.s();
    let free_budget = s - l.iter().sum::<i64>();
    if free_budget < 0 {
        return Err(Error::Infeasible("node lower bounds exceed the budget".into()));
    }
    let seeded: Vec<usize> = (0..n).filter(|&i| l[i] > 0).collect();
    let allowed: Vec<usize> = (0..n).filter(|&i| u[i] > l[i]).collect();
    let n_tilde = extend_independent_rows(a, &seeded, &allowed).unwrap_or_default();
    let x_tilde_shift: Vec<i64> = {
        let mut x = vec![0i64; n];
        for &i in &n_tilde {
            x[i] = 1;
        }
        x
    };
    let cap: Vec<i64> = (0..n).map(|i| u[i] - l[i]).collect();

    let mut score_vecs: Vec<DVector<f64>> = Vec::new();
    if let Ok(sc) = leverage_init(a, s, false) {
        score_vecs.push(sc);
    }
    if let Ok(sc) = leverage_init(a, s, true) {
        score_vecs.push(sc);
    }
    if score_vecs.is_empty() {
        score_vecs.push(DVector::from_element(n, 1.0));
    }

    let mut starts: Vec<Vec<i64>> = Vec::new();
    let push = |shift: Vec<i64>, starts: &mut Vec<Vec<i64>>| {
        if shift.iter().sum::<i64>() != free_budget {
            return;
        }
        if (0..n).any(|i| shift[i] < 0 || shift[i] > cap[i]) {
            return;
        }
        let x: Vec<i64> = (0..n).map(|i| l[i] + shift[i]).collect();
        if let Some(fixed) = repair_to_finite(a, &x, l, u) {
            if !starts.contains(&fixed) {
                starts.push(fixed);
            }
        }
    };

    for scores in &score_vecs {
        // binary construction restricted to free capacity
        if n_tilde.len() as i64 <= free_budget {
            let mut bin = x_tilde_shift.clone();
            let mut remaining = free_budget - n_tilde.len() as i64;
            for &j in order_by_scores(scores).iter() {
                if remaining == 0 {
                    break;
                }
                if bin[j] == 0 && cap[j] >= 1 {
                    bin[j] = 1;
                    remaining -= 1;
                }
            }
            push(bin, &mut starts);
        }
        if inst.kind() == crate::model::Kind::Integer {
            let capped_tilde: Vec<i64> =
                (0..n).map(|i| x_tilde_shift[i].min(cap[i])).collect();
            let mut int = capped_tilde.clone();
            let mut remaining = free_budget - capped_tilde.iter().sum::<i64>();
            for &j in order_by_scores(scores).iter() {
                if remaining <= 0 {
                    break;
                }
                let add = (cap[j] - int[j]).min(remaining).max(0);
                int[j] += add;
                remaining -= add;
            }
            push(int, &mut starts);
        }
    }
    Ok(starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::brute_force_dopt;
    use crate::model::{evaluate, gen_binary_gaussian, gen_integer_sparse};
    use approx::assert_relative_eq;

    #[test]
    fn independent_rows_first_occurrences() {
        let a = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                1.0, 0.0, 0.0, // duplicate
                0.0, 0.0, 1.0, //
                0.0, 1.0, 0.0, // duplicate
                0.0, 0.0, 1.0, // duplicate
            ],
        );
        let (rows, x) = independent_rows(&a).unwrap();
        assert_eq!(rows, vec![0, 1, 3]);
        assert_eq!(x, vec![1, 1, 0, 1, 0, 0]);
        let m = info_matrix(&a, &x);
        assert!(linalg::cholesky_with_tol(&m, SINGULAR_TOL).is_some());
    }

    #[test]
    fn independent_rows_random_full_rank() {
        let inst = gen_binary_gaussian(12, 4, 6, 3);
        let (rows, x) = independent_rows(inst.a()).unwrap();
        assert_eq!(rows.len(), 4);
        let m = info_matrix(inst.a(), &x);
        assert!(linalg::cholesky_with_tol(&m, SINGULAR_TOL).is_some());
    }

    #[test]
    fn leverage_symmetric_case() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let x = leverage_init(&a, 1, false).unwrap();
        for i in 0..3 {
            assert_relative_eq!(x[i], 1.0 / 3.0, epsilon = 1e-12);
        }
        let sum: f64 = x.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn leverage_feasible_for_relaxation() {
        let inst = gen_binary_gaussian(10, 3, 6, 5);
        let x = leverage_init(inst.a(), 6, false).unwrap();
        let sum: f64 = x.iter().sum();
        assert_relative_eq!(sum, 6.0, epsilon = 1e-9);
        assert!(x.iter().all(|&v| v >= -1e-12 && v <= 1.0 + 1e-12));
    }

    #[test]
    fn leverage_weighted_scalar() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let x = leverage_init(&a, 1, true).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn init_bin_examples() {
        let scores = DVector::from_vec(vec![0.9, 0.8, 0.1]);
        let x = init_bin(&scores, &[1, 0, 1], &[0, 2], 3);
        assert_eq!(x, vec![1, 1, 1]);
        let x = init_bin(&scores, &[1, 0, 1], &[0, 2], 2);
        assert_eq!(x, vec![1, 0, 1]);
        assert_eq!(x.iter().sum::<i64>(), 2);
    }

    #[test]
    fn init_int_example() {
        // order indices by score descending: tau = (2, 0, 1)
        let scores = DVector::from_vec(vec![0.5, 0.2, 0.9]);
        let x = init_int(&scores, &[1, 1, 0], &[3, 2, 2], 5);
        assert_eq!(x, vec![2, 1, 2]);
        // saturation and no-op cases
        let x = init_int(&scores, &[1, 1, 0], &[3, 2, 2], 2);
        assert_eq!(x, vec![1, 1, 0]);
        let x = init_int(&scores, &[1, 1, 0], &[3, 2, 2], 7);
        assert_eq!(x, vec![3, 2, 2]);
    }

    #[test]
    fn round_examples() {
        let x = round_heuristic(&DVector::from_vec(vec![1.7, 0.6, 0.7]), &[0; 3], &[3; 3], 3);
        assert_eq!(x, vec![2, 0, 1]);
        let x = round_heuristic(&DVector::from_vec(vec![2.0, 1.0, 0.0]), &[0; 3], &[3; 3], 3);
        assert_eq!(x, vec![2, 1, 0]);
        // increments that would exceed u cascade to the next index
        let x = round_heuristic(&DVector::from_vec(vec![1.9, 1.1, 0.0]), &[0; 3], &[2, 1, 2], 3);
        assert_eq!(x, vec![2, 1, 0]);
    }

    #[test]
    fn round_always_feasible() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(3..8usize);
            let u: Vec<i64> = (0..n).map(|_| rng.random_range(1..4)).collect();
            let l = vec![0i64; n];
            let su: i64 = u.iter().sum();
            let s = rng.random_range(1..=su);
            // random feasible fractional point
            let mut x = vec![0.0f64; n];
            let mut rem = s as f64;
            for i in 0..n {
                let cap = (u[i] as f64).min(rem);
                let take = rng.random_range(0.0..=cap);
                x[i] = take;
                rem -= take;
            }
            // dump remainder greedily
            for i in 0..n {
                let cap = u[i] as f64 - x[i];
                let take = cap.min(rem);
                x[i] += take;
                rem -= take;
            }
            if rem > 1e-9 {
                continue;
            }
            let r = round_heuristic(&DVector::from_vec(x), &l, &u, s);
            assert_eq!(r.iter().sum::<i64>(), s);
            for i in 0..n {
                assert!(r[i] >= l[i] && r[i] <= u[i]);
            }
        }
    }

    #[test]
    fn local_search_reaches_local_optimality() {
        for seed in [1u64, 2, 3] {
            let inst = gen_binary_gaussian(8, 3, 4, seed);
            let (_, xt) = independent_rows(inst.a()).unwrap();
            let scores = leverage_init(inst.a(), 4, false).unwrap();
            let rows: Vec<usize> = (0..8).filter(|&i| xt[i] == 1).collect();
            let start = init_bin(&scores, &xt, &rows, 4);
            let mut state = SearchState::new(inst.a(), start).unwrap();
            local_search(
                &mut state,
                inst.a(),
                inst.l(),
                inst.u(),
                LsVariant::Fi,
                MoveSet::binary(),
                None,
            );
            // exhaustive neighbor scan: no improving +1/-1 exchange remains
            let obj = state.objective().as_f64();
            for i in 0..8 {
                for j in 0..8 {
                    if i == j || state.x[i] >= 1 || state.x[j] <= 0 {
                        continue;
                    }
                    let mut y = state.x.clone();
                    y[i] += 1;
                    y[j] -= 1;
                    let v = evaluate(&inst, &y).unwrap().as_f64();
                    assert!(v <= obj + 1e-9, "improving neighbor left behind");
                }
            }
        }
    }

    #[test]
    fn local_search_monotone_and_counters_consistent() {
        let inst = gen_integer_sparse(7, 2, 5, 0.8, 11);
        let starts = construction_starts(&inst, inst.l(), inst.u()).unwrap();
        assert!(!starts.is_empty());
        for start in starts {
            let mut state = SearchState::new(inst.a(), start.clone()).unwrap();
            let before = state.objective().as_f64();
            local_search(
                &mut state,
                inst.a(),
                inst.l(),
                inst.u(),
                LsVariant::Bi,
                MoveSet::integer(),
                None,
            );
            let after = state.objective().as_f64();
            assert!(after >= before - 1e-12);
            assert_eq!(
                state.counters.improvements,
                state.counters.k_bin + state.counters.k_int
            );
            // cached state agrees with a fresh factorization
            let fresh = evaluate(&inst, &state.x).unwrap().as_f64();
            assert!((after - fresh).abs() <= 1e-6 * fresh.abs().max(1.0));
        }
    }

    #[test]
    fn local_optimum_of_brute_forced_instance_stays_put() {
        let inst = gen_binary_gaussian(8, 3, 4, 9);
        let best = brute_force_dopt(&inst).unwrap();
        let mut state = SearchState::new(inst.a(), best.x.clone()).unwrap();
        local_search(
            &mut state,
            inst.a(),
            inst.l(),
            inst.u(),
            LsVariant::Bi,
            MoveSet::binary(),
            None,
        );
        assert_eq!(state.x, best.x);
        assert_eq!(state.counters.improvements, 0);
    }

    #[test]
    fn initial_incumbent_feasible_and_finite() {
        let inst = gen_integer_sparse(8, 2, 6, 0.7, 3);
        let inc = initial_incumbent(
            &inst,
            inst.l(),
            inst.u(),
            MoveSet::integer_with_rank3(),
            None,
        )
        .unwrap()
        .expect("incumbent");
        assert!(inst.check_feasible(&inc.x).is_ok());
        assert!(inc.objective.is_finite());
        let fresh = evaluate(&inst, &inc.x).unwrap();
        assert_relative_eq!(
            inc.objective.finite().unwrap(),
            fresh.finite().unwrap(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn fast_delta_matches_fresh_cholesky() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let inst = gen_integer_sparse(9, 3, 7, 0.8, 13);
        let starts = construction_starts(&inst, inst.l(), inst.u()).unwrap();
        let state = SearchState::new(inst.a(), starts[0].clone()).unwrap();
        let binv = state.fim.inverse.clone().unwrap();
        let before = state.objective().as_f64();
        for _ in 0..200 {
            let i = rng.random_range(0..9usize);
            let j = rng.random_range(0..9usize);
            if i == j || state.x[i] + 1 > inst.u()[i] || state.x[j] - 1 < inst.l()[j] {
                continue;
            }
            let vi = inst.a().row(i).transpose();
            let vj = inst.a().row(j).transpose();
            let fi = det_lemma_factor(&binv, &vi, &vi);
            let b1 = sherman_morrison_update(&binv, &vi, &vi).unwrap();
            let fj = det_lemma_factor(&b1, &(-&vj), &vj);
            if fi <= 0.0 || fj <= 0.0 {
                continue;
            }
            let mut y = state.x.clone();
            y[i] += 1;
            y[j] -= 1;
            let after = evaluate(&inst, &y).unwrap().as_f64();
            if after == f64::NEG_INFINITY {
                continue;
            }
            let delta_fast = fi.ln() + fj.ln();
            assert!(
                ((after - before) - delta_fast).abs() <= 1e-8,
                "fast delta {delta_fast} vs fresh {}",
                after - before
            );
        }
    }
}
