//! Bounded-variable simplex on the row-activity form `A x - r = 0`.
//!
//! Every row `i` gets a logical variable `r_i` carrying the row bounds, so a
//! problem is `max c x` subject to box constraints on `(x, r)` only. The
//! basis is a sparse LU of its kernel plus an eta file of updates. The
//! primal simplex (composite phase 1, Dantzig pricing with a Bland fallback)
//! is used for cold solves, the dual simplex for re-optimisation after bound
//! changes and added rows. Data are scaled by powers of two.

use std::time::Instant;

use serde::Serialize;

use super::lu::KernelLu;
use crate::formulation::{Model, Sense};

pub const PRIMAL_TOL: f64 = 1e-7;
pub const DUAL_TOL: f64 = 1e-7;
pub const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;
/// Largest cost shift the dual simplex applies to stay dual feasible.
const COST_SHIFT_TOL: f64 = 1e-5;
const BLAND_AFTER: usize = 1000;
const DEFAULT_ITERATION_LIMIT: usize = 500_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
    /// The factorization could not be kept accurate; see
    /// [`Simplex::diagnostics`].
    Numerical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    Lower,
    Upper,
}

/// Status of every structural then every logical variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
}

/// A row `lo <= sum a_j x_j <= hi` with possibly infinite sides.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

fn pow2_round(x: f64) -> f64 {
    if !(x.is_finite() && x > 0.0) {
        return 1.0;
    }
    2f64.powi(x.log2().round().clamp(-60.0, 60.0) as i32)
}

fn row_scale_for(coeffs: &[(usize, f64)], col_scale: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &(j, a) in coeffs {
        let v = (a * col_scale[j]).abs();
        if v > 0.0 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi == 0.0 {
        1.0
    } else {
        pow2_round(1.0 / (lo * hi).sqrt())
    }
}

/// Geometric-mean scaling, a few alternating passes.
fn compute_scaling(n: usize, rows: &[LpRow]) -> (Vec<f64>, Vec<f64>) {
    let mut col_scale = vec![1.0; n];
    let mut row_scale = vec![1.0; rows.len()];
    for _ in 0..4 {
        for (i, row) in rows.iter().enumerate() {
            row_scale[i] = row_scale_for(&row.coeffs, &col_scale);
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                let v = (a * row_scale[i]).abs();
                if v > 0.0 {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        for j in 0..n {
            col_scale[j] = if hi[j] == 0.0 { 1.0 } else { pow2_round(1.0 / (lo[j] * hi[j]).sqrt()) };
        }
    }
    for (i, row) in rows.iter().enumerate() {
        row_scale[i] = row_scale_for(&row.coeffs, &col_scale);
    }
    (row_scale, col_scale)
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// `B = B0 E_1 .. E_t`: a sparse LU of the kernel of `B0` plus one eta
/// column per basis change since.
#[derive(Clone, Debug, Default)]
struct Factor {
    lu: KernelLu,
    /// Kernel column `a` is structural `kvar[a]`, at position `a` of `B0`.
    kvar: Vec<usize>,
    krow: Vec<usize>,
    row_k: Vec<usize>,
    /// Position in `B0` of each basic logical, `MAX` for kernel rows.
    row_pos0: Vec<usize>,
    /// `(row, position)` of the basic logicals of `B0`.
    logical0: Vec<(usize, usize)>,
    /// Kernel column of each structural, `MAX` if not in `B0`.
    col_k: Vec<usize>,
    etas: Vec<Eta>,
}

const MAX_ETAS: usize = 80;

/// Simplex state over a fixed set of columns and a growing set of rows.
#[derive(Clone, Debug)]
pub struct Simplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    obj: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    val: Vec<f64>,
    status: Vec<VarStatus>,
    /// Basic variable at each basis position.
    head: Vec<usize>,
    /// Basis position of each variable, `MAX` if nonbasic.
    bpos: Vec<usize>,
    f: Factor,
    factored: bool,
    dirty: bool,
    iterations: usize,
    pub iteration_limit: usize,
    /// Always price by Bland's rule in the primal simplex.
    pub force_bland: bool,
    diagnostics: Option<String>,
    /// `B^-1 a_e` of the last entering column, over positions.
    alpha: Vec<f64>,
    /// Reduced costs maintained by the dual simplex.
    d: Vec<f64>,
    price_start: usize,
}

impl Simplex {
    /// `objective` is maximised.
    pub fn new(objective: Vec<f64>, col_lo: Vec<f64>, col_hi: Vec<f64>, rows: Vec<LpRow>) -> Self {
        let n = objective.len();
        assert_eq!(col_lo.len(), n);
        assert_eq!(col_hi.len(), n);
        let m = rows.len();
        let (row_scale, col_scale) = compute_scaling(n, &rows);
        let mut cols = vec![Vec::new(); n];
        let mut srows = Vec::with_capacity(m);
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        for j in 0..n {
            lo.push(col_lo[j] / col_scale[j]);
            hi.push(col_hi[j] / col_scale[j]);
        }
        for (i, row) in rows.iter().enumerate() {
            let rs = row_scale[i];
            let mut r = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                let v = a * rs * col_scale[j];
                if v != 0.0 {
                    r.push((j, v));
                    cols[j].push((i, v));
                }
            }
            srows.push(r);
            lo.push(row.lo * rs);
            hi.push(row.hi * rs);
        }
        let mut cost: Vec<f64> = objective.iter().zip(&col_scale).map(|(c, s)| c * s).collect();
        cost.resize(n + m, 0.0);
        let mut status: Vec<VarStatus> = (0..n)
            .map(|j| {
                assert!(col_lo[j].is_finite() || col_hi[j].is_finite(), "free column {j} is not supported");
                if col_lo[j].is_finite() { VarStatus::Lower } else { VarStatus::Upper }
            })
            .collect();
        status.extend(std::iter::repeat(VarStatus::Basic).take(m));
        Self {
            n,
            m,
            cols,
            rows: srows,
            col_scale,
            row_scale,
            obj: objective,
            cost,
            lo,
            hi,
            val: vec![0.0; n + m],
            status,
            head: Vec::new(),
            bpos: Vec::new(),
            f: Factor::default(),
            factored: false,
            dirty: false,
            iterations: 0,
            iteration_limit: DEFAULT_ITERATION_LIMIT,
            force_bland: false,
            diagnostics: None,
            alpha: Vec::new(),
            d: Vec::new(),
            price_start: 0,
        }
    }

    pub fn from_model(model: &Model) -> Self {
        let n = model.n_columns();
        let mut objective = vec![0.0; n];
        for &(j, c) in &model.objective {
            objective[j] += c;
        }
        let col_lo = model.variables.iter().map(|v| v.lower).collect();
        let col_hi = model.variables.iter().map(|v| v.upper).collect();
        let rows = model
            .rows
            .iter()
            .map(|r| {
                let (lo, hi) = match r.sense {
                    Sense::Le => (f64::NEG_INFINITY, r.rhs),
                    Sense::Ge => (r.rhs, f64::INFINITY),
                    Sense::Eq => (r.rhs, r.rhs),
                };
                LpRow { coeffs: r.coeffs.clone(), lo, hi }
            })
            .collect();
        Self::new(objective, col_lo, col_hi, rows)
    }

    pub fn n_cols(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Basic structurals at the last factorization.
    pub fn kernel_dim(&self) -> usize {
        self.f.kvar.len()
    }

    pub fn diagnostics(&self) -> Option<&str> {
        self.diagnostics.as_deref()
    }

    /// Structural values in original units.
    pub fn x(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.val[j] * self.col_scale[j]).collect()
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.obj[j] * self.val[j] * self.col_scale[j]).sum()
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j] * self.col_scale[j], self.hi[j] * self.col_scale[j])
    }

    /// Changes the bounds of a structural. Values are brought in line at
    /// the start of the next solve.
    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        let s = self.col_scale[j];
        let (lo, hi) = (lo / s, hi / s);
        if self.lo[j] == lo && self.hi[j] == hi {
            return;
        }
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.status[j] == VarStatus::Lower && !lo.is_finite() {
            self.status[j] = VarStatus::Upper;
        } else if self.status[j] == VarStatus::Upper && !hi.is_finite() {
            self.status[j] = VarStatus::Lower;
        }
        self.dirty = true;
    }

    /// Appends a row with a basic logical. The basis is refactored at the
    /// next solve.
    pub fn add_row(&mut self, row: &LpRow) {
        let rs = row_scale_for(&row.coeffs, &self.col_scale);
        let i = self.m;
        let mut r = Vec::with_capacity(row.coeffs.len());
        for &(j, a) in &row.coeffs {
            let v = a * rs * self.col_scale[j];
            if v != 0.0 {
                r.push((j, v));
                self.cols[j].push((i, v));
            }
        }
        self.rows.push(r);
        self.row_scale.push(rs);
        self.lo.push(row.lo * rs);
        self.hi.push(row.hi * rs);
        self.val.push(0.0);
        self.cost.push(0.0);
        self.status.push(VarStatus::Basic);
        self.m += 1;
        self.factored = false;
    }

    /// Whether row `i` is inactive in the current basis: its logical is
    /// basic and at least `tol` (unscaled) away from both row bounds.
    pub fn row_is_slack(&self, i: usize, tol: f64) -> bool {
        let v = self.n + i;
        if self.status[v] != VarStatus::Basic {
            return false;
        }
        let gap = (self.val[v] - self.lo[v]).min(self.hi[v] - self.val[v]);
        gap / self.row_scale[i] >= tol
    }

    /// Drops every row `i` with `remove[i]`. Those rows must have basic
    /// logicals, so the remaining basis stays valid (and optimal if it was).
    /// Surviving rows keep their relative order.
    pub fn remove_rows(&mut self, remove: &[bool]) {
        assert_eq!(remove.len(), self.m);
        let n = self.n;
        let mut new_index = vec![usize::MAX; self.m];
        let mut next = 0;
        for i in 0..self.m {
            if remove[i] {
                assert_eq!(self.status[n + i], VarStatus::Basic, "row {i} has a nonbasic logical");
            } else {
                new_index[i] = next;
                next += 1;
            }
        }
        if next == self.m {
            return;
        }
        for col in &mut self.cols {
            col.retain_mut(|(i, _)| {
                let k = new_index[*i];
                *i = k;
                k != usize::MAX
            });
        }
        retain_by(&mut self.rows, |i| !remove[i]);
        retain_by(&mut self.row_scale, |i| !remove[i]);
        let keep_var = |v: usize| v < n || !remove[v - n];
        retain_by(&mut self.lo, keep_var);
        retain_by(&mut self.hi, keep_var);
        retain_by(&mut self.val, keep_var);
        retain_by(&mut self.cost, keep_var);
        retain_by(&mut self.status, keep_var);
        self.m = next;
        self.factored = false;
    }

    pub fn basis(&self) -> Basis {
        Basis { status: self.status.clone() }
    }

    /// Installs a basis snapshot. Snapshots with fewer variables (taken
    /// before rows were added) are extended with basic logicals.
    pub fn set_basis(&mut self, basis: &Basis) -> bool {
        let mut status = basis.status.clone();
        if status.len() > self.n + self.m {
            return false;
        }
        status.resize(self.n + self.m, VarStatus::Basic);
        let nb_struct = status[..self.n].iter().filter(|s| **s == VarStatus::Basic).count();
        let nb_tight = status[self.n..].iter().filter(|s| **s != VarStatus::Basic).count();
        if nb_struct != nb_tight {
            return false;
        }
        for (v, s) in status.iter().enumerate() {
            let (lo, hi) = (self.lo[v], self.hi[v]);
            if (*s == VarStatus::Lower && !lo.is_finite()) || (*s == VarStatus::Upper && !hi.is_finite()) {
                return false;
            }
        }
        self.status = status;
        self.refactor();
        true
    }

    #[inline]
    fn bound_of(&self, v: usize, st: VarStatus) -> f64 {
        match st {
            VarStatus::Upper => self.hi[v],
            _ => self.lo[v],
        }
    }

    fn nearest_status(&self, v: usize) -> VarStatus {
        let (lo, hi, x) = (self.lo[v], self.hi[v], self.val[v]);
        if !lo.is_finite() {
            VarStatus::Upper
        } else if !hi.is_finite() || (x - lo).abs() <= (hi - x).abs() {
            VarStatus::Lower
        } else {
            VarStatus::Upper
        }
    }

    /// Fresh factorization of the basis given by `status`, repairing a
    /// singular kernel by swapping dependent structurals for logicals.
    pub fn refactor(&mut self) {
        let (n, m) = (self.n, self.m);
        for _ in 0..4 {
            let kvar: Vec<usize> = (0..n).filter(|&j| self.status[j] == VarStatus::Basic).collect();
            let krow: Vec<usize> = (0..m).filter(|&i| self.status[n + i] != VarStatus::Basic).collect();
            assert_eq!(kvar.len(), krow.len(), "basis has the wrong size");
            let mut row_k = vec![usize::MAX; m];
            for (p, &i) in krow.iter().enumerate() {
                row_k[i] = p;
            }
            let kcols: Vec<Vec<(usize, f64)>> = kvar
                .iter()
                .map(|&j| {
                    self.cols[j].iter().filter(|&&(i, _)| row_k[i] != usize::MAX).map(|&(i, v)| (row_k[i], v)).collect()
                })
                .collect();
            match KernelLu::factor(kvar.len(), &kcols, SINGULAR_TOL) {
                Ok(lu) => {
                    let k = kvar.len();
                    self.head.clear();
                    self.head.extend_from_slice(&kvar);
                    let mut row_pos0 = vec![usize::MAX; m];
                    let mut logical0 = Vec::with_capacity(m - k);
                    for i in 0..m {
                        if row_k[i] == usize::MAX {
                            row_pos0[i] = self.head.len();
                            logical0.push((i, self.head.len()));
                            self.head.push(n + i);
                        }
                    }
                    let mut col_k = vec![usize::MAX; n];
                    for (a, &j) in kvar.iter().enumerate() {
                        col_k[j] = a;
                    }
                    debug_assert_eq!(self.head.len(), m);
                    self.bpos = vec![usize::MAX; n + m];
                    for (p, &v) in self.head.iter().enumerate() {
                        self.bpos[v] = p;
                    }
                    self.f = Factor { lu, kvar, krow, row_k, row_pos0, logical0, col_k, etas: Vec::new() };
                    debug_assert_eq!(self.f.lu.dim(), k);
                    self.factored = true;
                    self.dirty = false;
                    self.recompute_primal();
                    return;
                }
                Err(sing) => {
                    log::debug!("repairing singular kernel: {} dependent columns", sing.cols.len());
                    for &a in &sing.cols {
                        let j = kvar[a];
                        self.status[j] = self.nearest_status(j);
                    }
                    for &p in &sing.rows {
                        self.status[n + krow[p]] = VarStatus::Basic;
                    }
                }
            }
        }
        self.diagnostics = Some("kernel stayed singular after repeated repair".into());
    }

    /// Solves `B z = a` for a sparse `a` over rows; `z` is over positions.
    fn ftran(&self, a: &[(usize, f64)], out: &mut Vec<f64>) {
        let f = &self.f;
        let k = f.kvar.len();
        let mut b = vec![0.0; k];
        for &(i, v) in a {
            let p = f.row_k[i];
            if p != usize::MAX {
                b[p] += v;
            }
        }
        out.clear();
        out.resize(self.m, 0.0);
        f.lu.solve(&mut b, &mut out[..k]);
        for a_ in 0..k {
            let x = out[a_];
            if x != 0.0 {
                for &(i, v) in &self.cols[f.kvar[a_]] {
                    let p = f.row_pos0[i];
                    if p != usize::MAX {
                        out[p] += v * x;
                    }
                }
            }
        }
        for &(i, v) in a {
            let p = f.row_pos0[i];
            if p != usize::MAX {
                out[p] -= v;
            }
        }
        for eta in &f.etas {
            let t = out[eta.pos];
            if t == 0.0 {
                continue;
            }
            let t = t / eta.pivot;
            out[eta.pos] = t;
            for &(q, a) in &eta.entries {
                out[q] -= a * t;
            }
        }
    }

    /// Solves `B^T y = w` for `w` over positions; `y` is over rows.
    fn btran(&self, mut w: Vec<f64>) -> Vec<f64> {
        let f = &self.f;
        for eta in f.etas.iter().rev() {
            let mut v = w[eta.pos];
            for &(q, a) in &eta.entries {
                v -= a * w[q];
            }
            w[eta.pos] = v / eta.pivot;
        }
        let k = f.kvar.len();
        let mut y = vec![0.0; self.m];
        let mut g = w[..k].to_vec();
        for &(i, p) in &f.logical0 {
            let v = -w[p];
            if v != 0.0 {
                y[i] = v;
                for &(j, c) in &self.rows[i] {
                    let a = f.col_k[j];
                    if a != usize::MAX {
                        g[a] -= c * v;
                    }
                }
            }
        }
        let mut yk = vec![0.0; k];
        f.lu.solve_t(&g, &mut yk);
        for (p, &i) in f.krow.iter().enumerate() {
            y[i] = yk[p];
        }
        y
    }

    fn column(&self, v: usize) -> std::borrow::Cow<'_, [(usize, f64)]> {
        if v < self.n {
            std::borrow::Cow::Borrowed(&self.cols[v])
        } else {
            std::borrow::Cow::Owned(vec![(v - self.n, -1.0)])
        }
    }

    /// Recomputes all values from the nonbasic bounds.
    fn recompute_primal(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut act = vec![0.0; m];
        for j in 0..n {
            if self.status[j] != VarStatus::Basic {
                self.val[j] = self.bound_of(j, self.status[j]);
                let x = self.val[j];
                if x != 0.0 {
                    for &(i, a) in &self.cols[j] {
                        act[i] += a * x;
                    }
                }
            }
        }
        for i in 0..m {
            if self.status[n + i] != VarStatus::Basic {
                self.val[n + i] = self.bound_of(n + i, self.status[n + i]);
                act[i] -= self.val[n + i];
            }
        }
        let sparse: Vec<(usize, f64)> = act.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, v)).collect();
        let mut xb = Vec::new();
        self.ftran(&sparse, &mut xb);
        for (p, &v) in self.head.iter().enumerate() {
            self.val[v] = -xb[p];
        }
    }

    /// Row duals for the given costs of basic variables.
    fn duals(&self, basic_cost: &dyn Fn(&Self, usize) -> f64) -> Vec<f64> {
        let w: Vec<f64> = self.head.iter().map(|&v| basic_cost(self, v)).collect();
        self.btran(w)
    }

    #[inline]
    fn reduced_cost(&self, v: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[v] };
        if v < self.n {
            c - self.cols[v].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
        } else {
            c + y[v - self.n]
        }
    }

    /// Reduced costs of every variable under the current costs.
    fn compute_reduced_costs(&mut self) {
        let y = self.duals(&|s: &Self, v| s.cost[v]);
        let mut d = vec![0.0; self.n + self.m];
        for (v, dv) in d.iter_mut().enumerate() {
            if self.status[v] != VarStatus::Basic {
                *dv = self.reduced_cost(v, &y, false);
            }
        }
        self.d = d;
    }

    fn infeasibility(&self, v: usize) -> f64 {
        let x = self.val[v];
        if x < self.lo[v] - PRIMAL_TOL {
            self.lo[v] - x
        } else if x > self.hi[v] + PRIMAL_TOL {
            x - self.hi[v]
        } else {
            0.0
        }
    }

    fn phase1_cost(&self, v: usize) -> f64 {
        let x = self.val[v];
        if x < self.lo[v] - PRIMAL_TOL {
            1.0
        } else if x > self.hi[v] + PRIMAL_TOL {
            -1.0
        } else {
            0.0
        }
    }

    /// `B^-1 a_e` into `alpha`. A unit increase of `e` moves the basic
    /// variable at position `p` by `-alpha[p]`.
    fn direction(&mut self, e: usize) {
        let col = self.column(e).into_owned();
        let mut alpha = std::mem::take(&mut self.alpha);
        self.ftran(&col, &mut alpha);
        self.alpha = alpha;
    }

    #[inline]
    fn rate(&self, v: usize) -> f64 {
        -self.alpha[self.bpos[v]]
    }

    fn apply_step(&mut self, e: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        let step = dir * theta;
        self.val[e] += step;
        for (p, &a) in self.alpha.iter().enumerate() {
            if a != 0.0 {
                self.val[self.head[p]] -= step * a;
            }
        }
    }

    /// Swaps entering `e` into the basis for leaving `l`, which becomes
    /// nonbasic with status `leave_as`. Requires `direction(e)`.
    fn change_basis(&mut self, e: usize, l: usize, leave_as: VarStatus) {
        let p = self.bpos[l];
        let pivot = self.alpha[p];
        let entries = self
            .alpha
            .iter()
            .enumerate()
            .filter(|&(q, a)| q != p && a.abs() > 1e-14)
            .map(|(q, &a)| (q, a))
            .collect();
        self.f.etas.push(Eta { pos: p, pivot, entries });
        self.head[p] = e;
        self.bpos[e] = p;
        self.bpos[l] = usize::MAX;
        self.status[e] = VarStatus::Basic;
        self.status[l] = leave_as;
        self.val[l] = self.bound_of(l, leave_as);
    }

    fn needs_refactor(&self) -> bool {
        self.f.etas.len() >= MAX_ETAS
    }

    fn ensure_factored(&mut self) {
        if !self.factored {
            self.refactor();
        } else if self.dirty {
            self.recompute_primal();
        }
        self.dirty = false;
    }

    fn check_limits(&mut self, deadline: Option<Instant>, start_iter: usize) -> Option<LpStatus> {
        if self.iterations - start_iter >= self.iteration_limit {
            return Some(LpStatus::IterationLimit);
        }
        if let Some(d) = deadline {
            if Instant::now() >= d {
                return Some(LpStatus::TimeLimit);
            }
        }
        if self.diagnostics.is_some() {
            return Some(LpStatus::Numerical);
        }
        None
    }

    /// Re-optimises from the current basis: dual simplex when the basis is
    /// dual feasible (always reachable by bound flips unless a one-sided row
    /// has the wrong dual sign), primal simplex otherwise.
    pub fn solve(&mut self, deadline: Option<Instant>) -> LpStatus {
        self.ensure_factored();
        // Perturbed costs break the heavy dual degeneracy of 0-1 models; the
        // primal simplex then cleans up under the true costs.
        let saved = self.cost.clone();
        self.perturb_costs();
        let status = self.dual(deadline);
        self.cost = saved;
        match status {
            Some(LpStatus::Optimal) | None => self.primal(deadline),
            Some(status) => status,
        }
    }

    fn perturb_costs(&mut self) {
        for j in 0..self.n {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let u = (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40;
            let frac = u as f64 / (1u64 << 24) as f64;
            let delta = 1e-6 * (1.0 + self.cost[j].abs()) * (0.5 + frac);
            if st == VarStatus::Lower {
                self.cost[j] -= delta;
            } else {
                self.cost[j] += delta;
            }
        }
    }

    pub fn solve_primal(&mut self, deadline: Option<Instant>) -> LpStatus {
        self.ensure_factored();
        self.primal(deadline)
    }

    /// Chooses the entering variable: partial Dantzig pricing over a
    /// rotating window, or the first eligible index in Bland mode.
    fn price(&mut self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let total = self.n + self.m;
        let window = (total / 8).max(1000);
        let mut best: Option<(usize, f64, f64)> = None;
        let start = if bland { 0 } else { self.price_start % total.max(1) };
        for off in 0..total {
            let v = (start + off) % total;
            let st = self.status[v];
            if st == VarStatus::Basic || self.lo[v] == self.hi[v] {
                continue;
            }
            let d = self.reduced_cost(v, y, phase1);
            let dir = match st {
                VarStatus::Lower if d > DUAL_TOL => 1.0,
                VarStatus::Upper if d < -DUAL_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((v, dir));
            }
            if best.map_or(true, |(_, _, b)| d.abs() > b) {
                best = Some((v, dir, d.abs()));
            }
            if off + 1 >= window && best.is_some() {
                self.price_start = v + 1;
                break;
            }
        }
        best.map(|(v, dir, _)| (v, dir))
    }

    /// Primal simplex with a composite phase 1.
    fn primal(&mut self, deadline: Option<Instant>) -> LpStatus {
        let start_iter = self.iterations;
        let mut degenerate = 0usize;
        let mut bland = self.force_bland;
        let mut confirmations = 0;
        loop {
            if let Some(st) = self.check_limits(deadline, start_iter) {
                return st;
            }
            if self.needs_refactor() {
                self.refactor();
            }
            let phase1 = self.head.iter().any(|&v| self.infeasibility(v) > 0.0);
            let y = if phase1 {
                self.duals(&|s: &Self, v| s.phase1_cost(v))
            } else {
                self.duals(&|s: &Self, v| s.cost[v])
            };
            let Some((e, dir)) = self.price(&y, phase1, bland) else {
                if confirmations < 2 && !self.f.etas.is_empty() {
                    confirmations += 1;
                    self.refactor();
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            self.direction(e);
            let own_range = self.hi[e] - self.lo[e];

            // Ratio test (Harris two-pass unless in Bland mode).
            let mut relaxed_min = f64::INFINITY;
            let mut cands: Vec<(usize, f64, f64, VarStatus)> = Vec::new();
            for p in 0..self.m {
                let a = self.alpha[p];
                if a == 0.0 {
                    continue;
                }
                let b = self.head[p];
                let rate = -dir * a;
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let (x, lo, hi) = (self.val[b], self.lo[b], self.hi[b]);
                let infeasible_low = x < lo - PRIMAL_TOL;
                let infeasible_high = x > hi + PRIMAL_TOL;
                let cand = if infeasible_low {
                    (rate > 0.0).then(|| ((lo - x) / rate, (lo - x) / rate, VarStatus::Lower))
                } else if infeasible_high {
                    (rate < 0.0).then(|| ((x - hi) / -rate, (x - hi) / -rate, VarStatus::Upper))
                } else if rate > 0.0 {
                    hi.is_finite().then(|| (((hi - x) / rate).max(0.0), (hi + PRIMAL_TOL - x) / rate, VarStatus::Upper))
                } else {
                    lo.is_finite().then(|| (((x - lo) / -rate).max(0.0), (x - lo + PRIMAL_TOL) / -rate, VarStatus::Lower))
                };
                if let Some((exact, relaxed, st)) = cand {
                    relaxed_min = relaxed_min.min(if bland { exact } else { relaxed });
                    cands.push((b, exact, rate.abs(), st));
                }
            }
            let mut leaving: Option<(usize, f64, VarStatus)> = None;
            let mut best_rate = 0.0;
            for &(b, exact, rate, st) in &cands {
                if exact > relaxed_min {
                    continue;
                }
                let better = if bland {
                    leaving.map_or(true, |(lb, lt, _)| exact < lt || (exact == lt && b < lb))
                } else {
                    rate > best_rate
                };
                if better {
                    best_rate = rate;
                    leaving = Some((b, exact, st));
                }
            }

            self.iterations += 1;
            let theta = leaving.map_or(f64::INFINITY, |(_, t, _)| t);
            if own_range <= theta {
                if !own_range.is_finite() {
                    return LpStatus::Unbounded;
                }
                self.apply_step(e, dir, own_range);
                self.status[e] = if dir > 0.0 { VarStatus::Upper } else { VarStatus::Lower };
                self.val[e] = self.bound_of(e, self.status[e]);
                degenerate = 0;
                bland = self.force_bland;
                continue;
            }
            let (l, theta, leave_as) = leaving.expect("finite step has a leaving variable");
            self.apply_step(e, dir, theta);
            self.change_basis(e, l, leave_as);
            if theta < 1e-12 {
                degenerate += 1;
                if degenerate >= BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = self.force_bland;
            }
        }
    }

    /// Makes the basis dual feasible by flipping boxed nonbasics, leaving
    /// fresh reduced costs in `d`. A one-sided variable with a slightly wrong
    /// dual sign gets its cost shifted; returns false when the error is
    /// larger than that.
    fn make_dual_feasible(&mut self) -> bool {
        self.compute_reduced_costs();
        let mut flipped = false;
        for v in 0..self.n + self.m {
            let st = self.status[v];
            if st == VarStatus::Basic || self.lo[v] == self.hi[v] {
                continue;
            }
            let d = self.d[v];
            let wrong = match st {
                VarStatus::Lower => d > DUAL_TOL,
                _ => d < -DUAL_TOL,
            };
            if !wrong {
                continue;
            }
            if d.abs() <= COST_SHIFT_TOL {
                self.cost[v] -= d;
                self.d[v] = 0.0;
            } else if st == VarStatus::Lower && self.hi[v].is_finite() {
                self.status[v] = VarStatus::Upper;
                flipped = true;
            } else if st == VarStatus::Upper && self.lo[v].is_finite() {
                self.status[v] = VarStatus::Lower;
                flipped = true;
            } else {
                return false;
            }
        }
        if flipped {
            self.recompute_primal();
        }
        true
    }

    /// `d x_l / d v` for every nonbasic `v` with a nonzero rate.
    fn pivot_row(&self, l: usize) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut w = vec![0.0; self.m];
        w[self.bpos[l]] = 1.0;
        let u = self.btran(w);
        let mut acc = vec![0.0; n];
        let mut touched = Vec::new();
        let mut out = Vec::new();
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            if self.status[n + i] != VarStatus::Basic {
                out.push((n + i, ui));
            }
            for &(j, a) in &self.rows[i] {
                if self.status[j] != VarStatus::Basic {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] -= ui * a;
                    if acc[j] == 0.0 {
                        acc[j] = f64::MIN_POSITIVE;
                    }
                }
            }
        }
        for j in touched {
            out.push((j, acc[j]));
        }
        out
    }

    /// Dual simplex. `None` means the basis could not be made dual
    /// feasible and the caller should fall back to the primal simplex.
    fn dual(&mut self, deadline: Option<Instant>) -> Option<LpStatus> {
        if !self.make_dual_feasible() {
            return None;
        }
        let start_iter = self.iterations;
        let mut confirmations = 0;
        // Dual Devex reference weights, per variable.
        let mut weight = vec![1.0; self.n + self.m];
        loop {
            if let Some(st) = self.check_limits(deadline, start_iter) {
                return Some(st);
            }
            if self.needs_refactor() {
                self.refactor();
                if !self.make_dual_feasible() {
                    return None;
                }
            }
            // Leaving variable: largest weighted bound violation.
            let mut leaving: Option<(usize, f64)> = None;
            for &v in &self.head {
                let inf = self.infeasibility(v);
                if inf > 0.0 {
                    let score = inf * inf / weight[v];
                    if leaving.map_or(true, |(_, best)| score > best) {
                        leaving = Some((v, score));
                    }
                }
            }
            let Some((l, _)) = leaving else {
                if confirmations < 1 && !self.f.etas.is_empty() {
                    confirmations += 1;
                    self.refactor();
                    if !self.make_dual_feasible() {
                        return None;
                    }
                    continue;
                }
                return Some(LpStatus::Optimal);
            };
            let increase = self.val[l] < self.lo[l];
            let s = if increase { 1.0 } else { -1.0 };

            let row = self.pivot_row(l);
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            let mut relaxed_min = f64::INFINITY;
            for &(v, rho) in &row {
                if rho.abs() < PIVOT_TOL || self.lo[v] == self.hi[v] {
                    continue;
                }
                let st = self.status[v];
                let eligible = match st {
                    VarStatus::Lower => s * rho > 0.0,
                    VarStatus::Upper => s * rho < 0.0,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.d[v];
                let slack = if st == VarStatus::Lower { -d } else { d };
                let slack = slack.max(0.0);
                relaxed_min = relaxed_min.min((slack + DUAL_TOL) / rho.abs());
                cands.push((v, slack / rho.abs(), rho.abs(), rho));
            }
            let mut entering: Option<(usize, f64, f64)> = None;
            for &(v, ratio, mag, rho) in &cands {
                if ratio <= relaxed_min && entering.map_or(true, |(_, best, _)| mag > best) {
                    entering = Some((v, mag, rho));
                }
            }
            let Some((e, _, rho_e)) = entering else {
                if confirmations < 1 && !self.f.etas.is_empty() {
                    confirmations += 1;
                    self.refactor();
                    if !self.make_dual_feasible() {
                        return None;
                    }
                    continue;
                }
                return Some(LpStatus::Infeasible);
            };
            let dir = if self.status[e] == VarStatus::Lower { 1.0 } else { -1.0 };
            self.direction(e);
            let rate = self.rate(l);
            if (rate - rho_e).abs() > 1e-6 * (1.0 + rate.abs()) || rate.abs() < PIVOT_TOL {
                if self.f.etas.is_empty() {
                    self.diagnostics = Some(format!(
                        "pivot mismatch on a fresh factorization: row {rho_e:e}, column {rate:e}, kernel {}",
                        self.f.kvar.len()
                    ));
                    return Some(LpStatus::Numerical);
                }
                self.refactor();
                if !self.make_dual_feasible() {
                    return None;
                }
                continue;
            }
            let target = if increase { self.lo[l] } else { self.hi[l] };
            let theta = ((target - self.val[l]) / (dir * rate)).max(0.0);
            self.iterations += 1;
            self.apply_step(e, dir, theta);

            // A slightly wrong-signed d_e accepted by the Harris test is
            // shifted to zero rather than spread over the row.
            let d_e = self.d[e];
            if (self.status[e] == VarStatus::Lower) == (d_e > 0.0) {
                self.cost[e] -= d_e;
                self.d[e] = 0.0;
            }
            // Dual step: d_v += t rho_v with d_e reaching zero.
            let t = -self.d[e] / rho_e;
            for &(v, rho) in &row {
                self.d[v] += t * rho;
            }
            self.d[e] = 0.0;
            self.d[l] = -t;
            let w_l = weight[l];
            for (p, &a) in self.alpha.iter().enumerate() {
                if a != 0.0 {
                    let v = self.head[p];
                    let r = a / rate;
                    weight[v] = weight[v].max(r * r * w_l);
                }
            }
            weight[e] = (w_l / (rate * rate)).max(1.0);
            self.change_basis(e, l, if increase { VarStatus::Lower } else { VarStatus::Upper });
            confirmations = 0;
        }
    }

    /// Largest primal bound violation in scaled units.
    pub fn max_primal_infeasibility(&self) -> f64 {
        (0..self.n + self.m)
            .map(|v| (self.lo[v] - self.val[v]).max(self.val[v] - self.hi[v]).max(0.0))
            .fold(0.0, f64::max)
    }
}

fn retain_by<T>(v: &mut Vec<T>, keep: impl Fn(usize) -> bool) {
    let mut i = 0;
    v.retain(|_| {
        i += 1;
        keep(i - 1)
    });
}

/// One-shot LP solve by the primal simplex.
pub fn solve_lp(model: &Model, bounds_override: Option<&[(f64, f64)]>, basis_hint: Option<&Basis>) -> LpResult {
    let mut lp = Simplex::from_model(model);
    if let Some(bounds) = bounds_override {
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            lp.set_col_bounds(j, lo, hi);
        }
    }
    if let Some(b) = basis_hint {
        lp.set_basis(b);
    }
    let status = lp.solve_primal(None);
    LpResult { status, x: lp.x(), objective: lp.objective(), basis: lp.basis(), iterations: lp.iterations() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], lo: f64, hi: f64) -> LpRow {
        LpRow { coeffs: coeffs.to_vec(), lo, hi }
    }

    #[test]
    fn tiny_max() {
        let mut lp = Simplex::new(vec![1.0, 1.0], vec![0.0; 2], vec![1.0; 2], vec![row(&[(0, 1.0), (1, 1.0)], f64::NEG_INFINITY, 1.0)]);
        assert_eq!(lp.solve_primal(None), LpStatus::Optimal);
        assert!((lp.objective() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_bounds() {
        // x >= 2 as a row, x <= 1 as a bound.
        let mut lp = Simplex::new(vec![1.0], vec![0.0], vec![1.0], vec![row(&[(0, 1.0)], 2.0, f64::INFINITY)]);
        assert_eq!(lp.solve_primal(None), LpStatus::Infeasible);
        let mut lp = Simplex::new(vec![1.0], vec![0.0], vec![1.0], vec![row(&[(0, 1.0)], 2.0, f64::INFINITY)]);
        assert_eq!(lp.solve(None), LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_ranges() {
        // max 3x + 2y, x + y = 1.5, x - y >= -0.5, x,y in [0,1]
        let rows = vec![row(&[(0, 1.0), (1, 1.0)], 1.5, 1.5), row(&[(0, 1.0), (1, -1.0)], -0.5, f64::INFINITY)];
        let mut lp = Simplex::new(vec![3.0, 2.0], vec![0.0; 2], vec![1.0; 2], rows.clone());
        assert_eq!(lp.solve_primal(None), LpStatus::Optimal);
        assert!((lp.objective() - 4.0).abs() < 1e-9, "{}", lp.objective());
        let mut lp = Simplex::new(vec![3.0, 2.0], vec![0.0; 2], vec![1.0; 2], rows);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn removing_slack_rows_keeps_the_optimum() {
        let rows = vec![
            row(&[(0, 1.0), (1, 1.0)], f64::NEG_INFINITY, 1.0),
            row(&[(0, 1.0)], f64::NEG_INFINITY, 5.0),
            row(&[(1, 1.0)], f64::NEG_INFINITY, 7.0),
            row(&[(0, 1.0), (1, 2.0)], f64::NEG_INFINITY, 1.5),
        ];
        let mut lp = Simplex::new(vec![1.0, 2.0], vec![0.0; 2], vec![1.0; 2], rows);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        let before = lp.objective();
        assert!(lp.row_is_slack(1, 1e-6) && lp.row_is_slack(2, 1e-6));
        assert!(!lp.row_is_slack(3, 1e-6));
        lp.remove_rows(&[false, true, true, false]);
        assert_eq!(lp.n_rows(), 2);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - before).abs() < 1e-12);
        lp.set_col_bounds(0, 0.0, 0.0);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - 1.5).abs() < 1e-9, "{}", lp.objective());
    }

    #[test]
    fn warm_start_after_bound_change_and_cut() {
        let rows = vec![row(&[(0, 2.0), (1, 1.0), (2, 1.0)], f64::NEG_INFINITY, 2.0)];
        let mut lp = Simplex::new(vec![3.0, 1.0, 1.0], vec![0.0; 3], vec![1.0; 3], rows);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - 3.0).abs() < 1e-9);
        lp.set_col_bounds(0, 0.0, 0.0);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - 2.0).abs() < 1e-9);
        lp.add_row(&row(&[(1, 1.0), (2, 1.0)], f64::NEG_INFINITY, 1.0));
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - 1.0).abs() < 1e-9);
        lp.set_col_bounds(0, 0.0, 1.0);
        assert_eq!(lp.solve(None), LpStatus::Optimal);
        assert!((lp.objective() - 3.0).abs() < 1e-9, "{}", lp.objective());
    }

    #[test]
    fn badly_scaled_rows() {
        // max x + y, 1e-6 x + 1e4 y <= 5e3, x,y in [0, 1e4]
        let rows = vec![row(&[(0, 1e-6), (1, 1e4)], f64::NEG_INFINITY, 5e3)];
        let mut lp = Simplex::new(vec![1.0, 1.0], vec![0.0; 2], vec![1e4; 2], rows);
        assert_eq!(lp.solve_primal(None), LpStatus::Optimal);
        let x = lp.x();
        assert!((x[0] - 1e4).abs() < 1e-6);
        assert!((x[1] - (5e3 - 1e-2) / 1e4).abs() < 1e-9);
    }
}
