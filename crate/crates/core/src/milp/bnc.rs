//! Branch-and-cut over a [`Model`] with 0-1 integer columns.
//!
//! One simplex object lives through the whole search; nodes only carry the
//! bound changes that lead to them and are re-optimised by the dual simplex.
//! Nodes are taken in best-bound order, and after every branching the up
//! child is processed immediately (a depth-first plunge). Cuts are global.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::lp::{LpRow, LpStatus, Simplex};
use crate::formulation::{Model, Row, RowKind, Sense};
use crate::instance::VerificationReport;

/// A binary is fractional when `min(x, 1 - x)` exceeds this.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Largest row violation accepted for a heuristic or seeded incumbent.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// A lazy row enters the LP once violated by more than this.
const LAZY_TOL: f64 = 1e-7;
/// Most violated lazy rows activated per LP solve.
const LAZY_PER_ROUND: usize = 500;
/// Held-back rows and cuts slack by at least this leave the LP...
const PURGE_SLACK: f64 = 1e-6;
/// ...once there are this many of them.
const PURGE_MIN: usize = 1000;

/// Supplies violated valid inequalities.
pub trait Separator {
    /// Cuts for a fractional LP point. May miss violated cuts.
    fn fractional(&mut self, x: &[f64]) -> Vec<Row>;
    /// Cuts for a point whose binaries are integral. Must be exact: an
    /// empty answer accepts the point as feasible.
    fn integral(&mut self, x: &[f64]) -> Vec<Row>;
}

/// For formulations whose rows are already exact.
pub struct NoSeparator;

impl Separator for NoSeparator {
    fn fractional(&mut self, _x: &[f64]) -> Vec<Row> {
        Vec::new()
    }
    fn integral(&mut self, _x: &[f64]) -> Vec<Row> {
        Vec::new()
    }
}

/// Builds candidate solutions from LP points.
pub trait PrimalHeuristic {
    fn propose(&mut self, x: &[f64]) -> Option<Vec<f64>>;
}

pub struct NoHeuristic;

impl PrimalHeuristic for NoHeuristic {
    fn propose(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct BncConfig {
    pub time_limit: Option<Duration>,
    /// Stop once the relative gap in percent is at most this.
    pub gap_tol_pct: f64,
    pub node_limit: Option<usize>,
    /// Fractional separation rounds per node.
    pub cut_rounds: usize,
    /// Starting solution; ignored if infeasible.
    pub incumbent: Option<Vec<f64>>,
    /// Keep the model's GCI rows out of the LP until an LP point violates
    /// them, and drop them (and cuts) again once slack. Every LP is still
    /// solved over all of them.
    pub lazy_gci_rows: bool,
}

impl Default for BncConfig {
    fn default() -> Self {
        Self { time_limit: None, gap_tol_pct: 1e-6, node_limit: None, cut_rounds: 3, incumbent: None, lazy_gci_rows: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
    /// Some subtree could not be solved reliably; the bound accounts for it.
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressLine {
    pub time: f64,
    pub node: usize,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    pub gap_pct: Option<f64>,
    pub cuts: usize,
}

impl std::fmt::Display for ProgressLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));
        write!(
            f,
            "{:8.2} {:7} {:>12} {:>12} {:>8} {:6}",
            self.time,
            self.node,
            opt(self.lb, 4),
            opt(self.ub, 4),
            opt(self.gap_pct, 2),
            self.cuts
        )
    }
}

/// Discrete solution decoded from an incumbent and its off-line audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub server: Vec<Option<usize>>,
    /// 0-based levels; absent for continuous powers.
    pub power_level: Option<Vec<usize>>,
    pub powers: Vec<f64>,
    pub report: VerificationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub time_limit_hit: bool,
    #[serde(skip)]
    pub x: Option<Vec<f64>>,
    /// Incumbent value (the lower bound).
    pub objective: Option<f64>,
    /// Upper bound on the optimum; infinite if the root was not solved.
    pub best_bound: f64,
    pub gap_pct: Option<f64>,
    /// LP bound of the root before any cut.
    pub root_lp_bound: Option<f64>,
    /// Root bound after the root cut rounds.
    pub root_bound: Option<f64>,
    pub nodes: usize,
    pub cuts_added: usize,
    pub lp_iterations: usize,
    pub wall_secs: f64,
    /// Largest amount by which a node LP exceeded its parent's bound.
    pub max_bound_excess: f64,
    pub progress: Vec<ProgressLine>,
    pub audit: Option<Audit>,
}

/// `100 (UB - LB) / max(1, LB)`.
pub fn gap_pct(ub: f64, lb: f64) -> f64 {
    100.0 * (ub - lb).max(0.0) / lb.max(1.0)
}

#[derive(Clone, Debug)]
struct OpenNode {
    bound: f64,
    depth: usize,
    id: usize,
    changes: Vec<(usize, f64)>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum NodeResult {
    Pruned,
    Branch { col: usize, bound: f64 },
    Interrupted,
    Abandoned,
}

fn lp_row(row: &Row) -> LpRow {
    let (lo, hi) = match row.sense {
        Sense::Le => (f64::NEG_INFINITY, row.rhs),
        Sense::Ge => (row.rhs, f64::INFINITY),
        Sense::Eq => (row.rhs, row.rhs),
    };
    LpRow { coeffs: row.coeffs.clone(), lo, hi }
}

/// Origin of an LP row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowRef {
    Model(usize),
    Cut(usize),
}

struct Search<'a> {
    model: &'a Model,
    config: &'a BncConfig,
    start: Instant,
    deadline: Option<Instant>,
    lp: Simplex,
    /// Origin of each LP row.
    lp_rows: Vec<RowRef>,
    /// Held-back model rows.
    lazy_rows: Vec<usize>,
    binaries: Vec<usize>,
    /// Every cut found so far; inactive ones are held back like lazy rows.
    cuts: Vec<Row>,
    cut_active: Vec<bool>,
    incumbent: Option<(f64, Vec<f64>)>,
    integral_objective: bool,
    root_lp_bound: Option<f64>,
    root_bound: Option<f64>,
    abandoned_bound: f64,
    max_bound_excess: f64,
    nodes: usize,
    lp_iterations: usize,
    progress: Vec<ProgressLine>,
    last_logged_ub: f64,
    last_log_time: f64,
}

impl<'a> Search<'a> {
    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(v, _)| *v)
    }

    /// Whether a subtree with this bound can still beat the incumbent.
    fn improvable(&self, bound: f64) -> bool {
        let inc = self.incumbent_value();
        if !inc.is_finite() {
            return true;
        }
        let bound = if self.integral_objective { (bound + 1e-6).floor() } else { bound };
        bound > inc + 1e-9 * inc.abs().max(1.0)
    }

    fn log_progress(&mut self, ub: f64, force: bool) {
        let now = self.elapsed();
        if !force && !(ub < self.last_logged_ub - 1e-9 && now - self.last_log_time >= 1.0) {
            return;
        }
        let lb = self.incumbent.as_ref().map(|(v, _)| *v);
        let line = ProgressLine {
            time: now,
            node: self.nodes,
            lb,
            ub: ub.is_finite().then_some(ub),
            gap_pct: lb.filter(|_| ub.is_finite()).map(|lb| gap_pct(ub, lb)),
            cuts: self.cuts.len(),
        };
        log::info!("{line}");
        if self.progress.len() < 10_000 {
            self.progress.push(line);
        }
        self.last_logged_ub = ub;
        self.last_log_time = now;
    }

    fn apply_bounds(&mut self, changes: &[(usize, f64)]) {
        for &j in &self.binaries {
            let v = &self.model.variables[j];
            self.lp.set_col_bounds(j, v.lower, v.upper);
        }
        for &(j, val) in changes {
            self.lp.set_col_bounds(j, val, val);
        }
    }

    fn row(&self, r: RowRef) -> &Row {
        match r {
            RowRef::Model(i) => &self.model.rows[i],
            RowRef::Cut(c) => &self.cuts[c],
        }
    }

    fn add_cuts(&mut self, rows: Vec<Row>) {
        for row in rows {
            self.lp.add_row(&lp_row(&row));
            self.lp_rows.push(RowRef::Cut(self.cuts.len()));
            self.cuts.push(row);
            self.cut_active.push(true);
        }
    }

    /// Moves the held-back rows and cuts most violated by `x` into the LP.
    fn activate_lazy(&mut self, x: &[f64]) -> usize {
        let model = self.model;
        let mut viol: Vec<(f64, RowRef)> = self
            .lazy_rows
            .iter()
            .map(|&i| (model.rows[i].violation(x), RowRef::Model(i)))
            .chain(
                (0..self.cuts.len())
                    .filter(|&c| !self.cut_active[c])
                    .map(|c| (self.cuts[c].violation(x), RowRef::Cut(c))),
            )
            .filter(|&(v, _)| v > LAZY_TOL)
            .collect();
        if viol.is_empty() {
            return 0;
        }
        viol.sort_by(|a, b| b.0.total_cmp(&a.0));
        viol.truncate(LAZY_PER_ROUND);
        let mut taken = vec![false; model.rows.len()];
        for &(_, r) in &viol {
            self.lp.add_row(&lp_row(self.row(r)));
            self.lp_rows.push(r);
            match r {
                RowRef::Model(i) => taken[i] = true,
                RowRef::Cut(c) => self.cut_active[c] = true,
            }
        }
        self.lazy_rows.retain(|&i| !taken[i]);
        viol.len()
    }

    fn purgeable(&self, r: RowRef) -> bool {
        match r {
            RowRef::Model(i) => self.config.lazy_gci_rows && self.model.rows[i].kind == RowKind::Gci,
            RowRef::Cut(_) => true,
        }
    }

    /// Drops slack held-back rows and cuts from the LP once there are many.
    fn purge_slack_rows(&mut self) {
        let remove: Vec<bool> = self
            .lp_rows
            .iter()
            .enumerate()
            .map(|(i, &r)| self.purgeable(r) && self.lp.row_is_slack(i, PURGE_SLACK))
            .collect();
        let count = remove.iter().filter(|&&b| b).count();
        if count < PURGE_MIN {
            return;
        }
        log::debug!("purging {count} of {} LP rows", remove.len());
        self.lp.remove_rows(&remove);
        let mut kept = Vec::with_capacity(self.lp_rows.len() - count);
        for (i, &r) in self.lp_rows.iter().enumerate() {
            if !remove[i] {
                kept.push(r);
                continue;
            }
            match r {
                RowRef::Model(j) => self.lazy_rows.push(j),
                RowRef::Cut(c) => self.cut_active[c] = false,
            }
        }
        self.lp_rows = kept;
    }

    fn fresh_lp(&mut self, changes: &[(usize, f64)]) {
        self.lp_iterations += self.lp.iterations();
        let rows: Vec<LpRow> = self.lp_rows.iter().map(|&r| lp_row(self.row(r))).collect();
        self.lp = model_lp(self.model, rows);
        self.apply_bounds(changes);
    }

    /// Accepts `x` as incumbent if it is better. Returns true on improvement.
    fn offer(&mut self, x: Vec<f64>, ub: f64) -> bool {
        let value = self.model.objective_value(&x);
        if value <= self.incumbent_value() + 1e-9 {
            return false;
        }
        self.incumbent = Some((value, x));
        self.log_progress(ub, true);
        true
    }

    fn check_candidate(&self, x: &[f64], sep: &mut dyn Separator) -> bool {
        x.len() == self.model.n_columns()
            && self.binaries.iter().all(|&j| x[j] == 0.0 || x[j] == 1.0)
            && self.model.max_violation(x) <= FEASIBILITY_TOL
            && self.cuts.iter().all(|r| r.violation(x) <= FEASIBILITY_TOL)
            && sep.integral(x).is_empty()
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let f = x[j].min(1.0 - x[j]);
            if f > INTEGRALITY_TOL && best.map_or(true, |(_, bf)| f > bf) {
                best = Some((j, f));
            }
        }
        best.map(|(j, _)| j)
    }

    fn solve_node(
        &mut self,
        node: &OpenNode,
        sep: &mut dyn Separator,
        heur: &mut dyn PrimalHeuristic,
        ub_hint: f64,
    ) -> NodeResult {
        self.apply_bounds(&node.changes);
        let is_root = node.id == 0;
        let mut rounds = 0;
        let mut integral_rounds = 0;
        let mut retried = false;
        loop {
            let status = self.lp.solve(self.deadline);
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return NodeResult::Pruned,
                LpStatus::TimeLimit => return NodeResult::Interrupted,
                other => {
                    if retried {
                        log::warn!("node {} abandoned after LP status {other:?}", node.id);
                        return NodeResult::Abandoned;
                    }
                    log::debug!("LP status {other:?}, rebuilding");
                    retried = true;
                    self.fresh_lp(&node.changes);
                    continue;
                }
            }
            let x = self.lp.x();
            // Purged rows are slack at `x`, so activation cannot bring them
            // straight back.
            self.purge_slack_rows();
            if self.activate_lazy(&x) > 0 {
                continue;
            }
            let obj = self.lp.objective();
            if node.bound.is_finite() {
                self.max_bound_excess = self.max_bound_excess.max(obj - node.bound);
            }
            if is_root && self.root_lp_bound.is_none() {
                self.root_lp_bound = Some(obj);
            }
            if !self.improvable(obj) {
                return NodeResult::Pruned;
            }
            match self.most_fractional(&x) {
                None => {
                    let mut snapped = x;
                    for &j in &self.binaries {
                        snapped[j] = snapped[j].round();
                    }
                    let cuts = sep.integral(&snapped);
                    if cuts.is_empty() {
                        if is_root && self.root_bound.is_none() {
                            self.root_bound = Some(obj);
                        }
                        self.offer(snapped, ub_hint);
                        return NodeResult::Pruned;
                    }
                    integral_rounds += 1;
                    if integral_rounds > 200 {
                        log::warn!("node {}: integral separation does not converge", node.id);
                        return NodeResult::Abandoned;
                    }
                    self.add_cuts(cuts);
                }
                Some(col) => {
                    if rounds < self.config.cut_rounds {
                        let cuts = sep.fractional(&x);
                        if !cuts.is_empty() {
                            rounds += 1;
                            self.add_cuts(cuts);
                            if self.out_of_time() {
                                return NodeResult::Interrupted;
                            }
                            continue;
                        }
                    }
                    if is_root && self.root_bound.is_none() {
                        self.root_bound = Some(obj);
                    }
                    if let Some(cand) = heur.propose(&x) {
                        if self.check_candidate(&cand, sep) {
                            self.offer(cand, ub_hint);
                        }
                    }
                    if !self.improvable(obj) {
                        return NodeResult::Pruned;
                    }
                    return NodeResult::Branch { col, bound: obj };
                }
            }
        }
    }
}

fn model_lp(model: &Model, rows: Vec<LpRow>) -> Simplex {
    let n = model.n_columns();
    let mut objective = vec![0.0; n];
    for &(j, c) in &model.objective {
        objective[j] += c;
    }
    Simplex::new(
        objective,
        model.variables.iter().map(|v| v.lower).collect(),
        model.variables.iter().map(|v| v.upper).collect(),
        rows,
    )
}

pub fn branch_and_cut(
    model: &Model,
    sep: &mut dyn Separator,
    heur: &mut dyn PrimalHeuristic,
    config: &BncConfig,
) -> SolveOutcome {
    let start = Instant::now();
    let binaries: Vec<usize> = (0..model.n_columns()).filter(|&j| model.is_binary(j)).collect();
    let integral_objective = model
        .objective
        .iter()
        .all(|&(j, c)| model.is_binary(j) && c.fract() == 0.0);
    let (lazy_rows, active_rows): (Vec<usize>, Vec<usize>) = (0..model.rows.len())
        .partition(|&i| config.lazy_gci_rows && model.rows[i].kind == RowKind::Gci);
    let mut s = Search {
        model,
        config,
        start,
        deadline: config.time_limit.map(|d| start + d),
        lp: model_lp(model, active_rows.iter().map(|&i| lp_row(&model.rows[i])).collect()),
        lp_rows: active_rows.into_iter().map(RowRef::Model).collect(),
        lazy_rows,
        binaries,
        cuts: Vec::new(),
        cut_active: Vec::new(),
        incumbent: None,
        integral_objective,
        root_lp_bound: None,
        root_bound: None,
        abandoned_bound: f64::NEG_INFINITY,
        max_bound_excess: f64::NEG_INFINITY,
        nodes: 0,
        lp_iterations: 0,
        progress: Vec::new(),
        last_logged_ub: f64::INFINITY,
        last_log_time: f64::NEG_INFINITY,
    };
    if let Some(seed) = &config.incumbent {
        if s.check_candidate(seed, sep) {
            s.offer(seed.clone(), f64::INFINITY);
        } else {
            log::warn!("seed incumbent rejected as infeasible");
        }
    }

    let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
    let mut plunge: Option<OpenNode> = Some(OpenNode { bound: f64::INFINITY, depth: 0, id: 0, changes: Vec::new() });
    let mut next_id = 1;
    let mut time_limit_hit = false;
    let mut node_limit_hit = false;
    let mut incomplete = false;

    let open_bound = |heap: &BinaryHeap<OpenNode>, plunge: &Option<OpenNode>, abandoned: f64| {
        let h = heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        let p = plunge.as_ref().map_or(f64::NEG_INFINITY, |n| n.bound);
        h.max(p).max(abandoned)
    };

    loop {
        let Some(node) = plunge.take().or_else(|| heap.pop()) else { break };
        if !s.improvable(node.bound) {
            continue;
        }
        if s.out_of_time() {
            time_limit_hit = true;
            heap.push(node);
            break;
        }
        if config.node_limit.is_some_and(|lim| s.nodes >= lim) {
            node_limit_hit = true;
            heap.push(node);
            break;
        }
        if let Some((inc, _)) = &s.incumbent {
            let ub = open_bound(&heap, &Some(node.clone()), s.abandoned_bound);
            if gap_pct(ub, *inc) <= config.gap_tol_pct {
                heap.push(node);
                break;
            }
        }
        s.nodes += 1;
        let ub_hint = open_bound(&heap, &Some(node.clone()), s.abandoned_bound);
        match s.solve_node(&node, sep, heur, ub_hint) {
            NodeResult::Pruned => {}
            NodeResult::Interrupted => {
                time_limit_hit = true;
                heap.push(node);
                break;
            }
            NodeResult::Abandoned => {
                incomplete = true;
                s.abandoned_bound = s.abandoned_bound.max(node.bound);
            }
            NodeResult::Branch { col, bound } => {
                let mut up = node.changes.clone();
                up.push((col, 1.0));
                let mut down = node.changes;
                down.push((col, 0.0));
                heap.push(OpenNode { bound, depth: node.depth + 1, id: next_id, changes: down });
                plunge = Some(OpenNode { bound, depth: node.depth + 1, id: next_id + 1, changes: up });
                next_id += 2;
            }
        }
        let ub = open_bound(&heap, &plunge, s.abandoned_bound).max(s.incumbent_value());
        s.log_progress(ub, false);
    }

    let mut remaining = open_bound(&heap, &plunge, s.abandoned_bound);
    if s.integral_objective && remaining.is_finite() {
        remaining = (remaining + 1e-6).floor();
    }
    let best_bound = match &s.incumbent {
        Some((v, _)) => remaining.max(*v),
        None => remaining,
    };
    let status = if time_limit_hit {
        SolveStatus::TimeLimit
    } else if node_limit_hit {
        SolveStatus::NodeLimit
    } else if incomplete {
        SolveStatus::Incomplete
    } else if s.incumbent.is_none() {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Optimal
    };
    s.log_progress(best_bound, true);
    s.lp_iterations += s.lp.iterations();
    let objective = s.incumbent.as_ref().map(|(v, _)| *v);
    SolveOutcome {
        status,
        time_limit_hit,
        objective,
        best_bound,
        gap_pct: objective.filter(|_| best_bound.is_finite()).map(|lb| gap_pct(best_bound, lb)),
        root_lp_bound: s.root_lp_bound,
        root_bound: s.root_bound,
        nodes: s.nodes,
        cuts_added: s.cuts.len(),
        lp_iterations: s.lp_iterations,
        wall_secs: s.elapsed(),
        max_bound_excess: s.max_bound_excess.max(0.0),
        progress: s.progress,
        x: s.incumbent.map(|(_, x)| x),
        audit: None,
    }
}
