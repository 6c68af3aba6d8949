//! Problem instances: the design matrix with integer repetition bounds and a
//! budget, objective evaluation, the binary reformulation, random instance
//! generators, and a plain-text file format.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, LogDet, SINGULAR_TOL};

/// Whether repetition counts are 0/1 or general integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Binary,
    Integer,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Binary => "binary",
            Kind::Integer => "integer",
        }
    }
}

/// An integer D-optimality instance: choose repetition counts `x` with
/// `eᵀx = s`, `l ≤ x ≤ u`, maximizing `ldet(AᵀDiag(x)A)`.
///
/// Rows of `a` are the experiment vectors `v_ℓᵀ`. Binary instances may carry
/// coordinates fixed at one (`l = u = 1`), which is how a known information
/// matrix (e.g. the rows of a data-fusion block) is folded into the same
/// representation.
#[derive(Debug, Clone)]
pub struct Instance {
    a: DMatrix<f64>,
    l: Vec<i64>,
    u: Vec<i64>,
    s: i64,
    kind: Kind,
}

impl Instance {
    pub fn new(a: DMatrix<f64>, l: Vec<i64>, u: Vec<i64>, s: i64, kind: Kind) -> Result<Self> {
        let n = a.nrows();
        let m = a.ncols();
        if n == 0 || m == 0 || m > n {
            return Err(Error::Infeasible(format!("bad dimensions n={n} m={m}")));
        }
        if l.len() != n || u.len() != n {
            return Err(Error::Infeasible("bound vectors must have length n".into()));
        }
        for i in 0..n {
            if l[i] < 0 {
                return Err(Error::Infeasible(format!("l[{i}] = {} < 0", l[i])));
            }
            if l[i] > u[i] {
                return Err(Error::Infeasible(format!("l[{i}] = {} > u[{i}] = {}", l[i], u[i])));
            }
            if kind == Kind::Binary && u[i] > 1 {
                return Err(Error::Infeasible(format!("binary instance with u[{i}] = {}", u[i])));
            }
        }
        let sum_l: i64 = l.iter().sum();
        let sum_u: i64 = u.iter().sum();
        if sum_l > s {
            return Err(Error::Infeasible(format!("e'l = {sum_l} > s = {s}")));
        }
        if s > sum_u {
            return Err(Error::Infeasible(format!("s = {s} > e'u = {sum_u}")));
        }
        if s < m as i64 {
            return Err(Error::Infeasible(format!("s = {s} < m = {m}")));
        }
        linalg::thin_svd(&a)?; // full column rank required
        Ok(Instance { a, l, u, s, kind })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn l(&self) -> &[i64] {
        &self.l
    }

    pub fn u(&self) -> &[i64] {
        &self.u
    }

    pub fn s(&self) -> i64 {
        self.s
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.a.row(i).transpose()
    }

    /// `AᵀDiag(x)A` for real weights.
    pub fn information_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::<f64>::zeros(m, m);
        for (i, &w) in x.iter().enumerate() {
            if w != 0.0 {
                let v = self.row(i);
                out.ger(w, &v, &v, 1.0);
            }
        }
        out
    }

    pub fn information_matrix_int(&self, x: &[i64]) -> DMatrix<f64> {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        self.information_matrix(&xf)
    }

    /// Check `l ≤ x ≤ u`, `eᵀx = s`; reports the violated constraint.
    pub fn check_feasible(&self, x: &[i64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Infeasible("x has wrong length".into()));
        }
        for i in 0..self.n() {
            if x[i] < self.l[i] {
                return Err(Error::Infeasible(format!("x[{i}] = {} < l[{i}] = {}", x[i], self.l[i])));
            }
            if x[i] > self.u[i] {
                return Err(Error::Infeasible(format!("x[{i}] = {} > u[{i}] = {}", x[i], self.u[i])));
            }
        }
        let sum: i64 = x.iter().sum();
        if sum != self.s {
            return Err(Error::Infeasible(format!("e'x = {sum} != s = {}", self.s)));
        }
        Ok(())
    }
}

/// A feasible point and its objective value.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<i64>,
    pub objective: LogDet,
}

/// Objective `ldet(AᵀDiag(x)A)` of a feasible integer point;
/// `NegInfinity` when the information matrix is singular.
pub fn evaluate(inst: &Instance, x: &[i64]) -> Result<LogDet> {
    inst.check_feasible(x)?;
    let m = inst.information_matrix_int(x);
    linalg::logdet_psd(&m, SINGULAR_TOL)
}

/// Binary reformulation of an integer instance: row `ℓ` appears `l_ℓ` times
/// fixed at one (carrying the baseline term `Σ l_ℓ v_ℓ v_ℓᵀ`) followed by
/// `u_ℓ − l_ℓ` free 0/1 copies, so the free coordinates sum to `s − eᵀl`.
/// The returned map sends each reformed row back to its original index.
pub fn to_binary_reform(inst: &Instance) -> Result<(Instance, Vec<usize>)> {
    let n = inst.n();
    let m = inst.m();
    let total: i64 = inst.u.iter().sum();
    let mut a = DMatrix::<f64>::zeros(total as usize, m);
    let mut l = Vec::with_capacity(total as usize);
    let mut u = Vec::with_capacity(total as usize);
    let mut map = Vec::with_capacity(total as usize);
    let mut r = 0usize;
    for i in 0..n {
        for c in 0..inst.u[i] {
            a.set_row(r, &inst.a.row(i));
            let fixed = c < inst.l[i];
            l.push(if fixed { 1 } else { 0 });
            u.push(1);
            map.push(i);
            r += 1;
        }
    }
    let reform = Instance::new(a, l, u, inst.s, Kind::Binary)?;
    Ok((reform, map))
}

/// Fold a reformed 0/1 point back into original coordinates.
pub fn from_binary_reform(x_reform: &[i64], map: &[usize], n_orig: usize) -> Vec<i64> {
    let mut x = vec![0i64; n_orig];
    for (j, &orig) in map.iter().enumerate() {
        x[orig] += x_reform[j];
    }
    x
}

/// Random binary instance with i.i.d. standard-normal design entries,
/// regenerated until the matrix has full column rank.
pub fn gen_binary_gaussian(n: usize, m: usize, s: i64, seed: u64) -> Instance {
    assert!(m <= n, "need m <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal));
        if linalg::thin_svd(&a).is_ok() {
            return Instance::new(a, vec![0; n], vec![1; n], s, Kind::Binary).unwrap();
        }
    }
}

/// Random integer instance: sparse design with roughly `density·n·m`
/// uniform(0,1) nonzeros, upper bounds uniform in 1..=10, l = 0.
pub fn gen_integer_sparse(n: usize, m: usize, s: i64, density: f64, seed: u64) -> Instance {
    assert!(m <= n, "need m <= n");
    assert!(density > 0.0 && density <= 1.0, "density in (0,1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = DMatrix::from_fn(n, m, |_, _| {
            if rng.random::<f64>() < density {
                rng.random::<f64>()
            } else {
                0.0
            }
        });
        if linalg::thin_svd(&a).is_err() {
            continue;
        }
        let u: Vec<i64> = (0..n).map(|_| rng.random_range(1..=10)).collect();
        if u.iter().sum::<i64>() < s {
            continue;
        }
        return Instance::new(a, vec![0; n], u, s, Kind::Integer).unwrap();
    }
}

/// Write an instance as plain text: `n m s kind`, then `l`, then `u`, then
/// the `n` design rows.
pub fn write_instance(inst: &Instance, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{} {} {} {}", inst.n(), inst.m(), inst.s(), inst.kind().as_str()).unwrap();
    writeln!(out, "{}", join_ints(inst.l())).unwrap();
    writeln!(out, "{}", join_ints(inst.u())).unwrap();
    for i in 0..inst.n() {
        let row: Vec<String> = (0..inst.m()).map(|j| format!("{}", inst.a()[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn join_ints(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().enumerate();
    let (ln, header) = lines
        .next()
        .ok_or(Error::ParseError { line: 1, msg: "empty file".into() })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 {
        return Err(Error::ParseError { line: ln + 1, msg: "expected `n m s kind`".into() });
    }
    let n: usize = parse_field(head[0], ln + 1, "n")?;
    let m: usize = parse_field(head[1], ln + 1, "m")?;
    let s: i64 = parse_field(head[2], ln + 1, "s")?;
    let kind = match head[3] {
        "binary" => Kind::Binary,
        "integer" => Kind::Integer,
        other => {
            return Err(Error::ParseError { line: ln + 1, msg: format!("unknown kind `{other}`") })
        }
    };
    let l = parse_int_line(&mut lines, n, "l")?;
    let u = parse_int_line(&mut lines, n, "u")?;
    let mut a = DMatrix::<f64>::zeros(n, m);
    for i in 0..n {
        let (ln, line) = lines.next().ok_or(Error::ParseError {
            line: 3 + n.min(2) + i + 1,
            msg: format!("missing design row {i}"),
        })?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != m {
            return Err(Error::ParseError {
                line: ln + 1,
                msg: format!("expected {m} values, found {}", vals.len()),
            });
        }
        for j in 0..m {
            a[(i, j)] = parse_field(vals[j], ln + 1, "matrix entry")?;
        }
    }
    Instance::new(a, l, u, s, kind)
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::ParseError { line, msg: format!("bad {what}: `{s}`") })
}

fn parse_int_line<'a, I>(lines: &mut I, n: usize, what: &str) -> Result<Vec<i64>>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (ln, line) = lines
        .next()
        .ok_or(Error::ParseError { line: 0, msg: format!("missing {what} line") })?;
    let vals: Vec<&str> = line.split_whitespace().collect();
    if vals.len() != n {
        return Err(Error::ParseError {
            line: ln + 1,
            msg: format!("expected {n} integers for {what}, found {}", vals.len()),
        });
    }
    vals.iter().map(|v| parse_field(v, ln + 1, what)).collect()
}
