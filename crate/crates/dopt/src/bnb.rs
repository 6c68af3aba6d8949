//! Branch-and-bound driver: node relaxation with either bound, dual-certificate
//! variable-bound tightening, node-level local search, pseudocost branching,
//! best-bound node selection, and a brute-force enumeration oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::heuristics::{
    initial_incumbent, local_search, repair_to_finite, round_heuristic, LsCounters, LsVariant,
    MoveSet, SearchState,
};
use crate::linalg::LogDet;
use crate::model::{evaluate, from_binary_reform, to_binary_reform, Instance, Kind, Solution};
use crate::relax::{RelaxOptions, RelaxResult};
use crate::relax_gamma::{build_gamma_context, solve_gamma_relaxation, GammaContext};
use crate::relax_natural::solve_natural_with_bounds;

const PRUNE_TOL: f64 = 1e-9;
const IMPROVE_TOL: f64 = 1e-9;

/// Which relaxation produces node upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Natural,
    Gamma,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Natural => "natural",
            BoundKind::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BnbConfig {
    pub bound_kind: BoundKind,
    pub vbt: bool,
    pub ls: bool,
    pub time_limit_seconds: Option<f64>,
    pub int_tol: f64,
    pub relax_tol: f64,
    pub relax_max_iter: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            bound_kind: BoundKind::Natural,
            vbt: true,
            ls: true,
            time_limit_seconds: None,
            int_tol: 1e-5,
            relax_tol: 1e-6,
            relax_max_iter: 2000,
            threads: 1,
            seed: 0,
        }
    }
}

/// Run statistics mirroring the solver's CSV schema.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub root_gap: f64,
    pub final_gap: f64,
    pub time_seconds: f64,
    pub nodes: u64,
    pub cuts: u64,
    pub fixed: u64,
    pub lsi: u64,
    pub k_bin: u64,
    pub k_int: u64,
    pub optimal: bool,
}

impl SolveStats {
    pub fn csv_header() -> &'static str {
        "n,m,s,bound,root_gap,gap,time,nodes,cuts,fixed,lsi,k_bin,k_int,optimal"
    }

    pub fn csv_row(&self, n: usize, m: usize, s: i64, bound: BoundKind) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.3},{},{},{},{},{},{},{}",
            n,
            m,
            s,
            bound.as_str(),
            self.root_gap,
            self.final_gap,
            self.time_seconds,
            self.nodes,
            self.cuts,
            self.fixed,
            self.lsi,
            self.k_bin,
            self.k_int,
            self.optimal
        )
    }
}

/// Variable-bound tightening from a dual certificate and an incumbent value:
/// `ω̂_k > 0` caps `x_k ≤ l_k + ⌊(ζ̂−LB)/ω̂_k⌋`, `ν̂_k > 0` forces
/// `x_k ≥ u_k − ⌊(ζ̂−LB)/ν̂_k⌋`. Any point cut off is strictly worse than LB.
pub struct VbtOutcome {
    pub l: Vec<i64>,
    pub u: Vec<i64>,
    pub cuts: u64,
    pub fixed: u64,
    pub pruned: bool,
}

pub fn vbt_tighten(
    l: &[i64],
    u: &[i64],
    omega: &DVector<f64>,
    nu: &DVector<f64>,
    zeta: f64,
    lb: f64,
    budget: i64,
) -> VbtOutcome {
    let n = l.len();
    let slack = (zeta - lb).max(0.0);
    let mut nl = l.to_vec();
    let mut nu_out = u.to_vec();
    let mut cuts = 0u64;
    let mut fixed = 0u64;
    let mut pruned = false;
    for k in 0..n {
        if omega[k] > 1e-12 {
            let q = slack / omega[k];
            if q < 1e15 {
                let cap = l[k] + q.floor() as i64;
                if cap < nu_out[k] {
                    nu_out[k] = cap;
                    cuts += 1;
                }
            }
        }
        if nu[k] > 1e-12 {
            let q = slack / nu[k];
            if q < 1e15 {
                let low = u[k] - q.floor() as i64;
                if low > nl[k] {
                    nl[k] = low;
                    cuts += 1;
                }
            }
        }
        if nl[k] > nu_out[k] {
            pruned = true;
        } else if nl[k] == nu_out[k] && l[k] != u[k] {
            fixed += 1;
        }
    }
    if !pruned {
        let sum_l: i64 = nl.iter().sum();
        let sum_u: i64 = nu_out.iter().sum();
        if sum_l > budget || sum_u < budget {
            pruned = true;
        }
    }
    VbtOutcome { l: nl, u: nu_out, cuts, fixed, pruned }
}

/// Floor/ceil split of a node on one variable (clamped into the node's
/// range so both children strictly shrink). The children partition the
/// parent's integer set.
pub fn branch(
    l: &[i64],
    u: &[i64],
    x_hat: &DVector<f64>,
    var: usize,
) -> ((Vec<i64>, Vec<i64>), (Vec<i64>, Vec<i64>)) {
    debug_assert!(l[var] < u[var]);
    let split = (x_hat[var].floor() as i64).clamp(l[var], u[var] - 1);
    let dl = l.to_vec();
    let mut du = u.to_vec();
    du[var] = split;
    let mut ul = l.to_vec();
    let uu = u.to_vec();
    ul[var] = split + 1;
    ((dl, du), (ul, uu))
}

struct Node {
    l: Vec<i64>,
    u: Vec<i64>,
    bound: f64,
    depth: u32,
    id: u64,
    /// (variable, fractional part at the parent, went up) for pseudocosts
    branch_info: Option<(usize, f64, bool)>,
}

struct HeapNode(Node);

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound && self.0.id == other.0.id
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on bound; ties resolved oldest-first for determinism
        self.0
            .bound
            .partial_cmp(&other.0.bound)
            .unwrap_or(Ordering::Equal)
            .then(other.0.id.cmp(&self.0.id))
    }
}

#[derive(Default)]
struct PseudoCost {
    up_sum: Vec<f64>,
    up_cnt: Vec<u64>,
    down_sum: Vec<f64>,
    down_cnt: Vec<u64>,
}

impl PseudoCost {
    fn new(n: usize) -> Self {
        PseudoCost {
            up_sum: vec![0.0; n],
            up_cnt: vec![0; n],
            down_sum: vec![0.0; n],
            down_cnt: vec![0; n],
        }
    }

    fn record(&mut self, var: usize, frac: f64, up: bool, degrade: f64) {
        let frac = frac.clamp(1e-6, 1.0 - 1e-6);
        if up {
            self.up_sum[var] += degrade / (1.0 - frac);
            self.up_cnt[var] += 1;
        } else {
            self.down_sum[var] += degrade / frac;
            self.down_cnt[var] += 1;
        }
    }

    fn score(&self, var: usize, frac: f64) -> (bool, f64) {
        if self.up_cnt[var] > 0 && self.down_cnt[var] > 0 {
            let up = self.up_sum[var] / self.up_cnt[var] as f64;
            let down = self.down_sum[var] / self.down_cnt[var] as f64;
            (true, (down * frac).max(1e-12) * (up * (1.0 - frac)).max(1e-12))
        } else {
            (false, frac.min(1.0 - frac))
        }
    }
}

struct Shared {
    state: Mutex<SharedInner>,
    cv: Condvar,
}

struct SharedInner {
    heap: BinaryHeap<HeapNode>,
    incumbent: Option<Vec<i64>>,
    lb: f64,
    nodes: u64,
    cuts: u64,
    fixed: u64,
    lsi: u64,
    ls_counters: LsCounters,
    pseudo: PseudoCost,
    next_id: u64,
    active: usize,
    active_bounds: Vec<f64>,
    root_bound: Option<f64>,
    stop: bool,
}

struct SolverCtx {
    inst: Instance,
    gamma: Option<GammaContext>,
    config: BnbConfig,
    deadline: Option<Instant>,
    node_moves: MoveSet,
    relax_opts: RelaxOptions,
    /// ranges of identical row copies in a reformulated instance; within a
    /// group only non-increasing solutions are kept (value-preserving
    /// symmetry reduction)
    copy_groups: Vec<(usize, usize)>,
}

/// Restrict to solutions sorted non-increasing within each copy group by
/// propagating bounds. Returns false when the node holds no sorted point.
fn enforce_group_order(l: &mut [i64], u: &mut [i64], groups: &[(usize, usize)]) -> bool {
    for &(start, end) in groups {
        for i in (start + 1)..end {
            if u[i] > u[i - 1] {
                u[i] = u[i - 1];
            }
        }
        for i in (start..end - 1).rev() {
            if l[i] < l[i + 1] {
                l[i] = l[i + 1];
            }
        }
        for i in start..end {
            if l[i] > u[i] {
                return false;
            }
        }
    }
    true
}

impl SolverCtx {
    fn relax_node(&self, l: &[i64], u: &[i64], opts: &RelaxOptions) -> Result<NodeBound> {
        match self.config.bound_kind {
            BoundKind::Natural => {
                let res = solve_natural_with_bounds(&self.inst, l, u, opts)?;
                Ok(NodeBound::from_natural(res))
            }
            BoundKind::Gamma => {
                let n = self.inst.n();
                let t = n - self.inst.s() as usize;
                let ly: Vec<i64> = (0..n).map(|i| 1 - u[i]).collect();
                let uy: Vec<i64> = (0..n).map(|i| 1 - l[i]).collect();
                let ctx = self.gamma.as_ref().expect("gamma context");
                let res = solve_gamma_relaxation(ctx, &ly, &uy, t, opts)?;
                Ok(NodeBound::from_gamma(res, n))
            }
        }
    }
}

/// Node relaxation outcome with multipliers already mapped to x-space.
struct NodeBound {
    x_hat: DVector<f64>,
    zeta: f64,
    omega_x: DVector<f64>,
    nu_x: DVector<f64>,
}

impl NodeBound {
    fn from_natural(res: RelaxResult) -> Self {
        NodeBound {
            x_hat: res.x_hat,
            zeta: res.certificate.value,
            omega_x: res.certificate.omega,
            nu_x: res.certificate.nu,
        }
    }

    /// Complement-space result: `x = e − y`, and the roles of the bound
    /// multipliers swap when flipping coordinates.
    fn from_gamma(res: RelaxResult, n: usize) -> Self {
        let x_hat = DVector::from_fn(n, |i, _| 1.0 - res.x_hat[i]);
        NodeBound {
            x_hat,
            zeta: res.certificate.value,
            omega_x: res.certificate.nu,
            nu_x: res.certificate.omega,
        }
    }
}

/// Exact solver. Returns the best solution found and run statistics;
/// `optimal` is true when the tree was exhausted within the time limit.
pub fn solve(inst: &Instance, config: &BnbConfig) -> Result<(Solution, SolveStats)> {
    let t0 = Instant::now();
    let deadline = config.time_limit_seconds.map(|s| t0 + Duration::from_secs_f64(s));

    // the gamma bound runs on the 0/1 reformulation of integer instances
    let (work, map) = if config.bound_kind == BoundKind::Gamma && inst.kind() == Kind::Integer {
        let (reform, map) = to_binary_reform(inst)?;
        (reform, Some(map))
    } else {
        (inst.clone(), None)
    };
    let gamma = match config.bound_kind {
        BoundKind::Gamma => Some(build_gamma_context(work.a())?),
        BoundKind::Natural => None,
    };

    let init_moves = match work.kind() {
        Kind::Binary => MoveSet::binary(),
        Kind::Integer => MoveSet::integer_with_rank3(),
    };
    let node_moves = match work.kind() {
        Kind::Binary => MoveSet::binary(),
        Kind::Integer => MoveSet::integer(),
    };
    let init_deadline = {
        let cap = config
            .time_limit_seconds
            .map(|s| Duration::from_secs_f64((s / 4.0).min(30.0)))
            .unwrap_or(Duration::from_secs(30));
        Some(deadline.map_or(t0 + cap, |d| d.min(t0 + cap)))
    };
    let init = initial_incumbent(&work, work.l(), work.u(), init_moves, init_deadline)?;
    let (mut incumbent, mut lb, mut ls_counters) = match init {
        Some(inc) => (Some(inc.x), inc.objective.as_f64(), inc.counters),
        None => (None, f64::NEG_INFINITY, LsCounters::default()),
    };

    let copy_groups = match &map {
        Some(map) => {
            let mut groups = Vec::new();
            let mut start = 0usize;
            for i in 1..=map.len() {
                if i == map.len() || map[i] != map[start] {
                    if i - start >= 2 {
                        groups.push((start, i));
                    }
                    start = i;
                }
            }
            groups
        }
        None => Vec::new(),
    };
    let ctx = SolverCtx {
        inst: work,
        gamma,
        config: config.clone(),
        deadline,
        node_moves,
        relax_opts: RelaxOptions {
            tol: config.relax_tol,
            max_iter: config.relax_max_iter,
            ..Default::default()
        },
        copy_groups,
    };

    let shared = Shared {
        state: Mutex::new(SharedInner {
            heap: BinaryHeap::new(),
            incumbent: incumbent.take(),
            lb,
            nodes: 0,
            cuts: 0,
            fixed: 0,
            lsi: 0,
            ls_counters: std::mem::take(&mut ls_counters),
            pseudo: PseudoCost::new(ctx.inst.n()),
            next_id: 1,
            active: 0,
            active_bounds: Vec::new(),
            root_bound: None,
            stop: false,
        }),
        cv: Condvar::new(),
    };
    shared.state.lock().unwrap().heap.push(HeapNode(Node {
        l: ctx.inst.l().to_vec(),
        u: ctx.inst.u().to_vec(),
        bound: f64::INFINITY,
        depth: 0,
        id: 0,
        branch_info: None,
    }));

    let workers = config.threads.max(1);
    if workers == 1 {
        worker_loop(&ctx, &shared);
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| worker_loop(&ctx, &shared));
            }
        });
    }

    let inner = shared.state.into_inner().unwrap();
    lb = inner.lb;
    let optimal = !inner.stop && inner.heap.is_empty();
    let remaining_bound = inner
        .heap
        .iter()
        .map(|h| h.0.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let final_gap = if optimal {
        0.0
    } else {
        (remaining_bound - lb).max(0.0)
    };
    let root_bound = inner.root_bound.unwrap_or(lb);
    let root_gap = (root_bound - lb).max(0.0);

    let x_work = match inner.incumbent {
        Some(x) => x,
        None => {
            // every feasible point is singular: report any feasible vertex
            crate::relax::extreme_point(
                &vec![0.0; ctx.inst.n()],
                ctx.inst.l(),
                ctx.inst.u(),
                ctx.inst.s(),
            )?
        }
    };
    let solution = match &map {
        Some(map) => {
            let x = from_binary_reform(&x_work, map, inst.n());
            let objective = evaluate(inst, &x)?;
            Solution { x, objective }
        }
        None => {
            let objective = evaluate(inst, &x_work)?;
            Solution { x: x_work, objective }
        }
    };
    let stats = SolveStats {
        root_gap: if solution.objective.is_finite() { root_gap } else { 0.0 },
        final_gap,
        time_seconds: t0.elapsed().as_secs_f64(),
        nodes: inner.nodes,
        cuts: inner.cuts,
        fixed: inner.fixed,
        lsi: inner.lsi,
        k_bin: inner.ls_counters.k_bin,
        k_int: inner.ls_counters.k_int,
        optimal,
    };
    Ok((solution, stats))
}

fn worker_loop(ctx: &SolverCtx, shared: &Shared) {
    loop {
        let node = {
            let mut st = shared.state.lock().unwrap();
            loop {
                if st.stop {
                    return;
                }
                if let Some(d) = ctx.deadline {
                    if Instant::now() >= d {
                        st.stop = true;
                        shared.cv.notify_all();
                        return;
                    }
                }
                // drop nodes that cannot beat the incumbent
                let lb = st.lb;
                if let Some(top) = st.heap.peek() {
                    if top.0.bound <= lb + PRUNE_TOL {
                        st.heap.pop();
                        continue;
                    }
                    let node = st.heap.pop().unwrap().0;
                    st.active += 1;
                    st.active_bounds.push(node.bound);
                    break node;
                }
                if st.active == 0 {
                    shared.cv.notify_all();
                    return;
                }
                st = shared.cv.wait(st).unwrap();
            }
        };

        let lb_snapshot = shared.state.lock().unwrap().lb;
        let outcome = process_node(ctx, &node, lb_snapshot, shared);

        let mut st = shared.state.lock().unwrap();
        st.nodes += 1;
        st.active -= 1;
        if let Some(pos) = st.active_bounds.iter().position(|&b| b == node.bound) {
            st.active_bounds.swap_remove(pos);
        }
        if node.depth == 0 {
            st.root_bound = Some(outcome.zeta.unwrap_or(f64::NEG_INFINITY));
        }
        if let Some((var, frac, up, degrade)) = outcome.pseudo_update {
            st.pseudo.record(var, frac, up, degrade);
        }
        st.cuts += outcome.cuts;
        st.fixed += outcome.fixed;
        st.ls_counters.merge(&outcome.ls_counters);
        for (x, val) in outcome.candidates {
            if val > st.lb + IMPROVE_TOL {
                st.lb = val;
                st.incumbent = Some(x);
            }
        }
        if outcome.ls_improved_incumbent {
            st.lsi += 1;
        }
        for child in outcome.children {
            let id = st.next_id;
            st.next_id += 1;
            st.heap.push(HeapNode(Node { id, ..child }));
        }
        shared.cv.notify_all();
    }
}

struct NodeOutcome {
    zeta: Option<f64>,
    children: Vec<Node>,
    candidates: Vec<(Vec<i64>, f64)>,
    cuts: u64,
    fixed: u64,
    ls_counters: LsCounters,
    ls_improved_incumbent: bool,
    pseudo_update: Option<(usize, f64, bool, f64)>,
}

impl NodeOutcome {
    fn pruned() -> Self {
        NodeOutcome {
            zeta: None,
            children: Vec::new(),
            candidates: Vec::new(),
            cuts: 0,
            fixed: 0,
            ls_counters: LsCounters::default(),
            ls_improved_incumbent: false,
            pseudo_update: None,
        }
    }
}

fn process_node(ctx: &SolverCtx, node: &Node, lb_in: f64, shared: &Shared) -> NodeOutcome {
    let mut out = NodeOutcome::pruned();
    let s = ctx.inst.s();
    let mut node_l = node.l.clone();
    let mut node_u = node.u.clone();
    if !enforce_group_order(&mut node_l, &mut node_u, &ctx.copy_groups) {
        return out;
    }
    let sum_l: i64 = node_l.iter().sum();
    let sum_u: i64 = node_u.iter().sum();
    if sum_l > s || sum_u < s {
        return out;
    }

    let opts = RelaxOptions {
        prune_target: if node.depth > 0 && lb_in.is_finite() {
            Some(lb_in + 0.5 * PRUNE_TOL)
        } else {
            None
        },
        ..ctx.relax_opts
    };
    let relax = match ctx.relax_node(&node_l, &node_u, &opts) {
        Ok(r) => r,
        Err(Error::NodePruneSingular) => return out,
        Err(Error::Infeasible(_)) => return out,
        Err(_) => return out,
    };
    // a child's effective bound never exceeds its parent's
    let zeta = relax.zeta.min(node.bound);
    out.zeta = Some(zeta);
    if let Some((var, frac, up)) = node.branch_info {
        let degrade = (node.bound - zeta).max(0.0);
        if node.bound.is_finite() {
            out.pseudo_update = Some((var, frac, up, degrade));
        }
    }

    let mut lb = lb_in;

    // integral relaxation solution: direct incumbent candidate
    let int_tol = ctx.config.int_tol;
    let fractional: Vec<usize> = (0..ctx.inst.n())
        .filter(|&i| {
            let v = relax.x_hat[i];
            (v - v.round()).abs() > int_tol && node_l[i] < node_u[i]
        })
        .collect();
    if fractional.is_empty() {
        let cand = round_heuristic(&relax.x_hat, &node_l, &node_u, s);
        if ctx.inst.check_feasible(&cand).is_ok() {
            if let Ok(LogDet::Finite(v)) = evaluate(&ctx.inst, &cand) {
                if v > lb {
                    lb = v;
                    out.candidates.push((cand, v));
                }
            }
        }
    }

    if zeta <= lb + PRUNE_TOL {
        return out;
    }

    let (mut nl, mut nuo) = (node_l.clone(), node_u.clone());
    if ctx.config.vbt && lb.is_finite() {
        let vbt = vbt_tighten(&node_l, &node_u, &relax.omega_x, &relax.nu_x, zeta, lb, s);
        out.cuts = vbt.cuts;
        out.fixed = vbt.fixed;
        if vbt.pruned {
            return out;
        }
        nl = vbt.l;
        nuo = vbt.u;
    }

    if ctx.config.ls {
        let rounded = round_heuristic(&relax.x_hat, &node_l, &node_u, s);
        if let Some(start) = repair_to_finite(ctx.inst.a(), &rounded, &node_l, &node_u) {
            if let Ok(mut state) = SearchState::new(ctx.inst.a(), start) {
                if state.objective().is_finite() {
                    local_search(
                        &mut state,
                        ctx.inst.a(),
                        &node_l,
                        &node_u,
                        LsVariant::Fi,
                        ctx.node_moves,
                        ctx.deadline,
                    );
                    if state.counters.improvements > 0 {
                        local_search(
                            &mut state,
                            ctx.inst.a(),
                            &node_l,
                            &node_u,
                            LsVariant::FiPlus,
                            ctx.node_moves,
                            ctx.deadline,
                        );
                        local_search(
                            &mut state,
                            ctx.inst.a(),
                            &node_l,
                            &node_u,
                            LsVariant::Bi,
                            ctx.node_moves,
                            ctx.deadline,
                        );
                    }
                    out.ls_counters.merge(&state.counters);
                    if let LogDet::Finite(v) = state.objective() {
                        // re-check against the freshest incumbent
                        let current_lb = shared.state.lock().unwrap().lb.max(lb);
                        if v > current_lb + IMPROVE_TOL {
                            lb = v;
                            out.candidates.push((state.x.clone(), v));
                            out.ls_improved_incumbent = true;
                        }
                    }
                }
            }
        }
    }

    if zeta <= lb + PRUNE_TOL {
        return out;
    }

    // branch on a variable still free after tightening
    let branchable: Vec<usize> =
        fractional.iter().copied().filter(|&i| nl[i] < nuo[i]).collect();
    let var = match select_branch_var(ctx, node, &branchable, &nl, &nuo, &relax.x_hat, shared) {
        Some(v) => v,
        None => {
            // fully fixed node: evaluate its single point
            if nl == nuo {
                if ctx.inst.check_feasible(&nl).is_ok() {
                    if let Ok(LogDet::Finite(v)) = evaluate(&ctx.inst, &nl) {
                        if v > lb {
                            out.candidates.push((nl, v));
                        }
                    }
                }
            }
            return out;
        }
    };
    let frac = {
        let v = relax.x_hat[var];
        let f = v - v.floor();
        if f < int_tol || f > 1.0 - int_tol {
            0.5
        } else {
            f
        }
    };
    let ((dl, du), (ul, uu)) = branch(&nl, &nuo, &relax.x_hat, var);
    for (cl, cu, up) in [(dl, du, false), (ul, uu, true)] {
        let cs_l: i64 = cl.iter().sum();
        let cs_u: i64 = cu.iter().sum();
        if cl.iter().zip(&cu).any(|(a, b)| a > b) || cs_l > s || cs_u < s {
            continue;
        }
        out.children.push(Node {
            l: cl,
            u: cu,
            bound: zeta,
            depth: node.depth + 1,
            id: 0,
            branch_info: Some((var, frac, up)),
        });
    }
    out
}

fn select_branch_var(
    ctx: &SolverCtx,
    node: &Node,
    fractional: &[usize],
    nl: &[i64],
    nu: &[i64],
    x_hat: &DVector<f64>,
    shared: &Shared,
) -> Option<usize> {
    if fractional.is_empty() {
        // fall back to any unfixed variable, splitting at the relaxation value
        return (0..ctx.inst.n()).find(|&i| nl[i] < nu[i]);
    }
    // strong-branching estimates near the root for candidates without history
    if node.depth <= 2 {
        let need: Vec<usize> = {
            let st = shared.state.lock().unwrap();
            fractional
                .iter()
                .copied()
                .filter(|&i| st.pseudo.up_cnt[i] == 0 || st.pseudo.down_cnt[i] == 0)
                .take(2)
                .collect()
        };
        let coarse = RelaxOptions { tol: 1e-3, max_iter: 300, ..Default::default() };
        for &i in &need {
            let ((dl, du), (ul, uu)) = branch(&node.l, &node.u, x_hat, i);
            let frac = (x_hat[i] - x_hat[i].floor()).clamp(1e-6, 1.0 - 1e-6);
            let base = ctx
                .relax_node(&node.l, &node.u, &coarse)
                .map(|r| r.zeta)
                .unwrap_or(f64::INFINITY);
            for (cl, cu, up) in [(&dl, &du, false), (&ul, &uu, true)] {
                let degrade = match ctx.relax_node(cl, cu, &coarse) {
                    Ok(r) => (base - r.zeta).max(0.0),
                    Err(_) => base.abs().max(1.0), // infeasible child: strong cut
                };
                shared.state.lock().unwrap().pseudo.record(i, frac, up, degrade);
            }
        }
    }
    let st = shared.state.lock().unwrap();
    let mut best: Option<(bool, f64, usize)> = None;
    for &i in fractional {
        let v = x_hat[i];
        let frac = (v - v.floor()).clamp(1e-6, 1.0 - 1e-6);
        let (has_data, score) = st.pseudo.score(i, frac);
        let cand = (has_data, score, i);
        best = Some(match best {
            None => cand,
            Some(prev) => {
                let better = (cand.0, cand.1) > (prev.0, prev.1)
                    || ((cand.0, cand.1) == (prev.0, prev.1) && cand.2 < prev.2);
                if better {
                    cand
                } else {
                    prev
                }
            }
        });
    }
    best.map(|(_, _, i)| i)
}

/// Exact optimum by enumerating `{eᵀx = s, l ≤ x ≤ u}`. Guarded by a count
/// of feasible points.
pub fn brute_force_dopt(inst: &Instance) -> Result<Solution> {
    let (x, val) = brute_force_inner(inst, None)?;
    Ok(Solution { x, objective: val })
}

/// All optimal points within `tol` of the optimum, plus the optimal value.
pub fn brute_force_all_optima(inst: &Instance, tol: f64) -> Result<(Vec<Vec<i64>>, f64)> {
    let (_, best) = brute_force_inner(inst, None)?;
    let best_v = best.as_f64();
    let mut optima = Vec::new();
    brute_force_inner(inst, Some((&mut optima, best_v - tol)))?;
    Ok((optima, best_v))
}

fn count_feasible(inst: &Instance) -> u64 {
    const CAP: u64 = 10_000_000;
    let n = inst.n();
    let s = inst.s() as usize;
    let mut dp = vec![0u64; s + 1];
    dp[0] = 1;
    for i in 0..n {
        let mut next = vec![0u64; s + 1];
        for r in 0..=s {
            if dp[r] == 0 {
                continue;
            }
            for v in inst.l()[i]..=inst.u()[i] {
                let nr = r + v as usize;
                if nr <= s {
                    next[nr] = (next[nr] + dp[r]).min(CAP);
                }
            }
        }
        dp = next;
    }
    dp[s]
}

fn brute_force_inner(
    inst: &Instance,
    mut collect: Option<(&mut Vec<Vec<i64>>, f64)>,
) -> Result<(Vec<i64>, LogDet)> {
    let count = count_feasible(inst);
    if count > 5_000_000 {
        return Err(Error::TooLarge(format!("{count}+ feasible points")));
    }
    let n = inst.n();
    let mut x = vec![0i64; n];
    let mut best_x = Vec::new();
    let mut best = LogDet::NegInfinity;
    let tail_l: Vec<i64> = suffix_sums(inst.l());
    let tail_u: Vec<i64> = suffix_sums(inst.u());
    fn rec(
        i: usize,
        rem: i64,
        inst: &Instance,
        x: &mut Vec<i64>,
        tail_l: &[i64],
        tail_u: &[i64],
        best: &mut LogDet,
        best_x: &mut Vec<i64>,
        collect: &mut Option<(&mut Vec<Vec<i64>>, f64)>,
    ) {
        let n = inst.n();
        if i == n {
            if rem != 0 {
                return;
            }
            let m = inst.information_matrix_int(x);
            let v = crate::linalg::logdet_psd(&m, crate::linalg::SINGULAR_TOL).unwrap();
            if let Some((acc, floor)) = collect {
                if v.as_f64() >= *floor {
                    acc.push(x.clone());
                }
            }
            if v.as_f64() > best.as_f64() || best_x.is_empty() {
                *best = v;
                *best_x = x.clone();
            }
            return;
        }
        for v in inst.l()[i]..=inst.u()[i] {
            let r = rem - v;
            if r < tail_l[i + 1] || r > tail_u[i + 1] {
                continue;
            }
            x[i] = v;
            rec(i + 1, r, inst, x, tail_l, tail_u, best, best_x, collect);
        }
        x[i] = inst.l()[i];
    }
    rec(
        0,
        inst.s(),
        inst,
        &mut x,
        &tail_l,
        &tail_u,
        &mut best,
        &mut best_x,
        &mut collect,
    );
    Ok((best_x, best))
}

fn suffix_sums(v: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; v.len() + 1];
    for i in (0..v.len()).rev() {
        out[i] = out[i + 1] + v[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_binary_gaussian, gen_integer_sparse};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn vbt_examples() {
        let omega = DVector::from_vec(vec![2.0, 0.0]);
        let nu = DVector::from_vec(vec![0.0, 0.0]);
        let out = vbt_tighten(&[0, 0], &[5, 5], &omega, &nu, 3.0, 0.0, 5);
        assert_eq!(out.u[0], 1);
        assert_eq!(out.cuts, 1);

        let omega = DVector::from_vec(vec![0.0, 0.0]);
        let nu = DVector::from_vec(vec![4.0, 0.0]);
        let out = vbt_tighten(&[0, 0], &[1, 1], &omega, &nu, 3.0, 0.0, 1);
        assert_eq!(out.l[0], 1);
        assert_eq!(out.fixed, 1);
    }

    #[test]
    fn branch_partitions_parent() {
        let x = DVector::from_vec(vec![0.5, 1.0]);
        let ((dl, du), (ul, uu)) = branch(&[0, 0], &[1, 2], &x, 0);
        assert_eq!((dl[0], du[0]), (0, 0));
        assert_eq!((ul[0], uu[0]), (1, 1));
        assert_eq!(du[1], 2);

        // integral value split still shrinks both children
        let x = DVector::from_vec(vec![2.0]);
        let ((_, du), (ul, _)) = branch(&[0], &[2], &x, 0);
        assert_eq!(du[0], 1);
        assert_eq!(ul[0], 2);
    }

    #[test]
    fn brute_force_forced_point() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let inst =
            Instance::new(a, vec![0; 3], vec![1; 3], 3, Kind::Binary).unwrap();
        let sol = brute_force_dopt(&inst).unwrap();
        assert_eq!(sol.x, vec![1, 1, 1]);
    }

    #[test]
    fn solve_matches_brute_force_binary() {
        for seed in [0u64, 1, 2] {
            let inst = gen_binary_gaussian(8, 3, 4, seed);
            let brute = brute_force_dopt(&inst).unwrap();
            for bound in [BoundKind::Natural, BoundKind::Gamma] {
                let config = BnbConfig { bound_kind: bound, ..Default::default() };
                let (sol, stats) = solve(&inst, &config).unwrap();
                assert!(stats.optimal);
                assert_relative_eq!(
                    sol.objective.finite().unwrap(),
                    brute.objective.finite().unwrap(),
                    epsilon = 1e-6
                );
                assert!(stats.nodes >= 1);
                assert!(stats.final_gap <= stats.root_gap + 1e-9);
            }
        }
    }

    #[test]
    fn solve_matches_brute_force_integer() {
        for seed in [3u64, 4] {
            let inst = gen_integer_sparse(6, 2, 4, 0.7, seed);
            let capped = Instance::new(
                inst.a().clone(),
                inst.l().to_vec(),
                inst.u().iter().map(|&v| v.min(3)).collect(),
                4,
                Kind::Integer,
            )
            .unwrap();
            let brute = brute_force_dopt(&capped).unwrap();
            for bound in [BoundKind::Natural, BoundKind::Gamma] {
                let config = BnbConfig { bound_kind: bound, ..Default::default() };
                let (sol, stats) = solve(&capped, &config).unwrap();
                assert!(stats.optimal, "not optimal with {bound:?}");
                assert_relative_eq!(
                    sol.objective.finite().unwrap(),
                    brute.objective.finite().unwrap(),
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn vbt_on_off_same_objective() {
        let inst = gen_binary_gaussian(9, 3, 5, 7);
        let on = solve(&inst, &BnbConfig::default()).unwrap();
        let off = solve(
            &inst,
            &BnbConfig { vbt: false, ls: false, ..Default::default() },
        )
        .unwrap();
        assert_relative_eq!(
            on.0.objective.finite().unwrap(),
            off.0.objective.finite().unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn stats_csv_schema() {
        let stats = SolveStats { optimal: true, ..Default::default() };
        assert_eq!(
            SolveStats::csv_header(),
            "n,m,s,bound,root_gap,gap,time,nodes,cuts,fixed,lsi,k_bin,k_int,optimal"
        );
        let row = stats.csv_row(8, 3, 4, BoundKind::Natural);
        assert!(row.starts_with("8,3,4,natural,"));
        assert!(row.ends_with(",true"));
    }

    #[test]
    fn parallel_solve_agrees() {
        let inst = gen_binary_gaussian(9, 3, 5, 13);
        let single = solve(&inst, &BnbConfig::default()).unwrap();
        let multi = solve(&inst, &BnbConfig { threads: 3, ..Default::default() }).unwrap();
        assert_relative_eq!(
            single.0.objective.finite().unwrap(),
            multi.0.objective.finite().unwrap(),
            epsilon = 1e-9
        );
        assert!(multi.1.optimal);
    }
}
