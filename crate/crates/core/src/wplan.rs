//! Iterative solving of the power-indexed model over nested power sets.
//!
//! Each iteration builds PI0 over the next set, seeds it with the previous
//! incumbent and every GCI generated so far (re-anchored to the finer grid)
//! and runs branch-and-cut. Unused time rolls over to the next iteration.

use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::build_pi0;
use crate::gci::{make_cut, q_threshold, single_interferer_family, GubCoverCut};
use crate::instance::{verify, Assignment, Instance, PowerSet, SirSystem};
use crate::milp::{branch_and_cut, BncConfig, PrimalHeuristic, SolveStatus};
use crate::report::{opt_num, Table, TableFormat};
use crate::formulation::Model;
use crate::solver::{audit_outcome, decode_point, CutPool, GciSeparator};

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("empty schedule")]
    Empty,
    #[error("power range [{0}, {1}] dB is empty")]
    Range(i32, i32),
    #[error("level count {size} not available (the range allows 2..={max})")]
    Size { size: usize, max: usize },
    #[error("level counts must be strictly increasing")]
    NotIncreasing,
    #[error("set {0} is not contained in set {1}")]
    NotNested(usize, usize),
    #[error("set {0} does not reach the maximum power of the last set")]
    PmaxMismatch(usize),
    #[error("bad schedule `{0}`: expected comma-separated level counts such as 2,4,6")]
    Parse(String),
    #[error("power {0} of the incumbent is missing from the finer set")]
    MissingValue(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleStyle {
    /// 2, 4, 6, then two more levels per step up to the full integer range.
    EvenSteps,
    /// 2, 4, 6 and the full integer range.
    WimaxFinal,
}

impl FromStr for ScheduleStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "even-steps" => Ok(Self::EvenSteps),
            "wimax-final" => Ok(Self::WimaxFinal),
            other => Err(format!("unknown schedule style `{other}`")),
        }
    }
}

/// Active dB values in the order the schedules introduce them: `P_max`,
/// `P_min`, then repeated bisection of the widest gap (lower gap on ties,
/// midpoint rounded down) until every integer is present.
pub fn insertion_order(p_min_db: i32, p_max_db: i32) -> Vec<i32> {
    let mut order = vec![p_max_db];
    if p_min_db >= p_max_db {
        return order;
    }
    order.push(p_min_db);
    let mut present = vec![p_min_db, p_max_db];
    loop {
        let mut widest: Option<(i32, i32)> = None;
        for w in present.windows(2) {
            if w[1] - w[0] > 1 && widest.map_or(true, |(lo, hi)| w[1] - w[0] > hi - lo) {
                widest = Some((w[0], w[1]));
            }
        }
        let Some((lo, hi)) = widest else { break };
        let mid = lo + (hi - lo) / 2;
        order.push(mid);
        let at = present.partition_point(|&v| v < mid);
        present.insert(at, mid);
    }
    order
}

/// Largest level count (off included) over the integer range.
pub fn full_size(p_min_db: i32, p_max_db: i32) -> usize {
    (p_max_db - p_min_db).max(0) as usize + 2
}

/// The `n`-level set: off plus the first `n - 1` values of
/// [`insertion_order`].
pub fn power_set_with_levels(p_min_db: i32, p_max_db: i32, n: usize) -> Result<PowerSet, ScheduleError> {
    if p_min_db > p_max_db {
        return Err(ScheduleError::Range(p_min_db, p_max_db));
    }
    let max = full_size(p_min_db, p_max_db);
    if n < 2 || n > max {
        return Err(ScheduleError::Size { size: n, max });
    }
    let mut db: Vec<i32> = insertion_order(p_min_db, p_max_db)[..n - 1].to_vec();
    db.sort_unstable();
    Ok(PowerSet::from_db(&db).expect("distinct sorted values"))
}

/// Parses `2,4,6` into level counts.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>, ScheduleError> {
    let sizes: Result<Vec<usize>, _> = spec.split(',').map(|s| s.trim().parse::<usize>()).collect();
    match sizes {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(ScheduleError::Parse(spec.to_string())),
    }
}

/// Nested power sets `P_0 ⊂ P_1 ⊂ ... ⊂ P_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    sets: Vec<PowerSet>,
}

impl Schedule {
    pub fn new(sets: Vec<PowerSet>) -> Result<Self, ScheduleError> {
        let last = sets.last().ok_or(ScheduleError::Empty)?;
        for (i, set) in sets.iter().enumerate() {
            if set.p_max() != last.p_max() {
                return Err(ScheduleError::PmaxMismatch(i));
            }
            if i > 0 {
                let prev = &sets[i - 1];
                if prev.len() >= set.len() || prev.levels().iter().any(|&p| set.index_of(p).is_none()) {
                    return Err(ScheduleError::NotNested(i - 1, i));
                }
            }
        }
        Ok(Self { sets })
    }

    pub fn from_sizes(p_min_db: i32, p_max_db: i32, sizes: &[usize]) -> Result<Self, ScheduleError> {
        if sizes.is_empty() {
            return Err(ScheduleError::Empty);
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ScheduleError::NotIncreasing);
        }
        let sets = sizes
            .iter()
            .map(|&n| power_set_with_levels(p_min_db, p_max_db, n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(sets)
    }

    pub fn parse(p_min_db: i32, p_max_db: i32, spec: &str) -> Result<Self, ScheduleError> {
        Self::from_sizes(p_min_db, p_max_db, &parse_sizes(spec)?)
    }

    pub fn sets(&self) -> &[PowerSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(PowerSet::len).collect()
    }

    pub fn last(&self) -> &PowerSet {
        self.sets.last().expect("schedules are never empty")
    }
}

pub fn default_schedule(p_min_db: i32, p_max_db: i32, style: ScheduleStyle) -> Schedule {
    let max = full_size(p_min_db, p_max_db);
    let mut sizes: Vec<usize> = match style {
        ScheduleStyle::EvenSteps => (2..max).step_by(2).chain([max]).collect(),
        ScheduleStyle::WimaxFinal => vec![2, 4, 6, max],
    };
    sizes.retain(|&n| n <= max);
    sizes.dedup();
    Schedule::from_sizes(p_min_db, p_max_db, &sizes).expect("sizes are valid by construction")
}

/// Re-indexes every power level of `a` into `to`.
pub fn lift_incumbent(a: &Assignment, from: &PowerSet, to: &PowerSet) -> Result<Assignment, ScheduleError> {
    let power_level = a
        .power_level
        .iter()
        .map(|&l| {
            let p = from.value(l);
            to.index_of(p).ok_or(ScheduleError::MissingValue(p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Assignment { server: a.server.clone(), power_level })
}

/// Re-anchors cuts to `to` by power value: the server prefix ends at the
/// old server power, each interferer suffix starts at the old interferer
/// power. Single-interferer cuts take the finer grid's threshold when it is
/// lower. Cuts that no longer pass the cover check are dropped.
pub fn lift_cuts(cuts: &[GubCoverCut], sir: &SirSystem, from: &PowerSet, to: &PowerSet) -> CutPool {
    let mut pool = CutPool::new();
    for cut in cuts {
        let reindex = |l: usize| to.index_of(from.value(l));
        let lifted = reindex(cut.server_level).and_then(|lambda| {
            let gamma: Option<Vec<(usize, usize)>> =
                cut.interferers.iter().map(|&(b, q)| reindex(q).map(|q| (b, q))).collect();
            gamma.map(|mut gamma| {
                // A finer grid may deny coverage at a lower interferer level.
                if let [(b, q)] = gamma.as_mut_slice() {
                    if let Some(q2) = q_threshold(sir, to, cut.t, cut.server, *b, lambda) {
                        *q = (*q).min(q2);
                    }
                }
                make_cut(sir, to, cut.t, cut.server, lambda, &gamma)
            })
        });
        match lifted {
            Some(Ok(c)) => {
                pool.insert(c);
            }
            Some(Err(e)) => warn!("dropping lifted cut {cut}: {e}"),
            None => warn!("dropping cut {cut}: a power value is missing from the finer set"),
        }
    }
    pool
}

#[derive(Clone, Debug)]
pub struct WplanConfig {
    /// Total budget, split across iterations in proportion to their level
    /// counts, with rollover.
    pub time_limit: Option<Duration>,
    /// Template for every iteration; its time limit and incumbent are
    /// overwritten.
    pub bnc: BncConfig,
}

impl Default for WplanConfig {
    fn default() -> Self {
        Self { time_limit: None, bnc: BncConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n_levels: usize,
    /// GCI rows of the initial model: the single-interferer family plus
    /// inherited cuts.
    pub gcis_init: usize,
    pub gcis_added: usize,
    /// Bound at the end of root processing.
    pub ub_root: Option<f64>,
    /// Bound of the iteration's own model when it stopped.
    pub best_bound: f64,
    pub nominal: f64,
    pub verified: f64,
    pub gap_pct: Option<f64>,
    pub status: SolveStatus,
    pub time_limit_secs: Option<f64>,
    pub wall_secs: f64,
    pub nodes: usize,
    pub errors: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WplanResult {
    pub iterations: Vec<IterationRecord>,
    /// Final solution over the last power set.
    pub assignment: Assignment,
    pub power_set: PowerSet,
    pub nominal_revenue: f64,
    pub verified_revenue: f64,
    /// Level count of the iteration that found the final solution value.
    pub best_levels: usize,
    pub wall_secs: f64,
}

impl WplanResult {
    pub fn table(&self) -> Table {
        let mut table = Table::new(["|L|", "GCIs-init", "GCIs-added", "UB", "|T*|", "gap%"]);
        for it in &self.iterations {
            let served = if (it.nominal - it.verified).abs() > 1e-9 {
                format!("{} [{}]", fmt_value(it.verified), fmt_value(it.nominal))
            } else {
                fmt_value(it.verified)
            };
            table.push(vec![
                it.n_levels.to_string(),
                it.gcis_init.to_string(),
                it.gcis_added.to_string(),
                opt_num(it.ub_root, 2),
                served,
                opt_num(it.gap_pct, 2),
            ]);
        }
        table
    }

    /// CSV gets separate nominal and verified columns instead of brackets.
    pub fn render(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Text => format!("{}|L*| = {}\n", self.table().render(format), self.best_levels),
            TableFormat::Csv => {
                let mut table = Table::new([
                    "levels", "gcis_init", "gcis_added", "ub_root", "nominal", "verified", "gap_pct", "status", "secs",
                ]);
                for it in &self.iterations {
                    table.push(vec![
                        it.n_levels.to_string(),
                        it.gcis_init.to_string(),
                        it.gcis_added.to_string(),
                        opt_num(it.ub_root, 6),
                        it.nominal.to_string(),
                        it.verified.to_string(),
                        opt_num(it.gap_pct, 4),
                        format!("{:?}", it.status),
                        format!("{:.3}", it.wall_secs),
                    ]);
                }
                table.render(format)
            }
        }
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn served_revenue(revenue: &[f64], a: &Assignment) -> f64 {
    a.server.iter().zip(revenue).filter(|(s, _)| s.is_some()).map(|(_, r)| r).sum()
}

fn covered_revenue(sir: &SirSystem, revenue: &[f64], powers: &[f64]) -> f64 {
    (0..sir.n_testpoints())
        .filter(|&t| (0..powers.len()).any(|b| powers[b] > 0.0 && sir.serves(t, b, powers)))
        .map(|t| revenue[t])
        .sum()
}

/// Hill climbing over level changes of one transmitter, then of two at a
/// time once single changes stall, serving every covered testpoint by its
/// best server. Never returns a worse vector.
pub fn improve_levels(sir: &SirSystem, set: &PowerSet, revenue: &[f64], mut levels: Vec<usize>) -> Assignment {
    let nb = levels.len();
    let n = set.len();
    let mut powers: Vec<f64> = levels.iter().map(|&l| set.value(l)).collect();
    let mut best = covered_revenue(sir, revenue, &powers);
    let mut try_move = |levels: &mut Vec<usize>, powers: &mut Vec<f64>, moves: &[(usize, usize)]| {
        let old: Vec<usize> = moves.iter().map(|&(b, _)| levels[b]).collect();
        for &(b, l) in moves {
            powers[b] = set.value(l);
        }
        let rev = covered_revenue(sir, revenue, powers);
        if rev > best + 1e-9 {
            best = rev;
            for &(b, l) in moves {
                levels[b] = l;
            }
            true
        } else {
            for (&(b, _), &l) in moves.iter().zip(&old) {
                powers[b] = set.value(l);
            }
            false
        }
    };
    loop {
        let mut improved = false;
        for b in 0..nb {
            for l in 0..n {
                if l != levels[b] {
                    improved |= try_move(&mut levels, &mut powers, &[(b, l)]);
                }
            }
        }
        if improved {
            continue;
        }
        'pairs: for b1 in 0..nb {
            for b2 in b1 + 1..nb {
                let (c1, c2) = (levels[b1], levels[b2]);
                for l1 in (0..n).filter(|&l| l != c1) {
                    for l2 in (0..n).filter(|&l| l != c2) {
                        if try_move(&mut levels, &mut powers, &[(b1, l1), (b2, l2)]) {
                            improved = true;
                            break 'pairs;
                        }
                    }
                }
            }
        }
        if !improved {
            return Assignment::with_best_servers(sir, set, levels);
        }
    }
}

/// Largest-mass level per transmitter, polished by [`improve_levels`].
struct PolishedRounding<'a> {
    sir: &'a SirSystem,
    set: &'a PowerSet,
    revenue: &'a [f64],
    model: &'a Model,
}

impl PrimalHeuristic for PolishedRounding<'_> {
    fn propose(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let levels = decode_point(&self.model.layout, x).power_level;
        Some(self.model.encode(&improve_levels(self.sir, self.set, self.revenue, levels)))
    }
}

pub fn run(instance: &Instance, schedule: &Schedule, config: &WplanConfig) -> WplanResult {
    let start = Instant::now();
    let sir = SirSystem::new(instance);
    let r = schedule.len();
    let total_levels: usize = schedule.sets().iter().map(PowerSet::len).sum();
    let mut carry = Duration::ZERO;

    let first = &schedule.sets()[0];
    let mut prev_set = first.clone();
    let mut best = Assignment::all_off(instance.n_testpoints, instance.n_transmitters);
    let mut best_verified = 0.0;
    let mut best_nominal = 0.0;
    let mut inherited: Vec<GubCoverCut> = Vec::new();
    let mut records = Vec::with_capacity(r);

    for (i, set) in schedule.sets().iter().enumerate() {
        let budget = config.time_limit.map(|t| t.mul_f64(set.len() as f64 / total_levels as f64) + carry);
        let iter_start = Instant::now();

        let seed = lift_incumbent(&best, &prev_set, set).expect("schedule sets are nested");
        let seed = improve_levels(&sir, set, &instance.revenue, seed.power_level);
        let seed_verified = verify(instance, set, &seed).expect("levels are in range").verified_revenue;

        let mut init = CutPool::from_iter(single_interferer_family(&sir, set));
        for cut in lift_cuts(&inherited, &sir, &prev_set, set).cuts() {
            init.insert(cut.clone());
        }
        let model = build_pi0(&sir, set, &instance.revenue, init.cuts());
        let mut sep = GciSeparator::new(&sir, set, model.layout);
        sep.pool = init.clone();
        let mut heur = PolishedRounding { sir: &sir, set, revenue: &instance.revenue, model: &model };
        let bnc = BncConfig { time_limit: budget, incumbent: Some(model.encode(&seed)), ..config.bnc.clone() };
        let mut outcome = branch_and_cut(&model, &mut sep, &mut heur, &bnc);
        audit_outcome(&mut outcome, &model, instance, Some(set));
        let audit = outcome.audit.as_ref().expect("audited");

        let (nominal, verified) = (audit.report.nominal_revenue, audit.report.verified_revenue);
        if outcome.x.is_some() && verified >= seed_verified && verified >= best_verified {
            let found = Assignment {
                server: audit.server.clone(),
                power_level: audit.power_level.clone().expect("discrete model"),
            };
            let polished = improve_levels(&sir, set, &instance.revenue, found.power_level.clone());
            let polished_rev = served_revenue(&instance.revenue, &polished);
            if polished_rev > verified {
                best = polished;
                best_verified = polished_rev;
                best_nominal = polished_rev;
            } else {
                best = found;
                best_verified = verified;
                best_nominal = nominal;
            }
        } else {
            if outcome.x.is_some() {
                warn!("iteration {i}: incumbent {verified} below the lifted seed {seed_verified}; keeping the seed");
            }
            best = seed;
            best_verified = seed_verified;
            best_nominal = seed_verified;
        }
        prev_set = set.clone();

        inherited = init.cuts().to_vec();
        inherited.extend(sep.added.iter().cloned());

        let used = iter_start.elapsed();
        if let Some(b) = budget {
            carry = b.saturating_sub(used);
        }
        let record = IterationRecord {
            n_levels: set.len(),
            gcis_init: init.len(),
            gcis_added: sep.added.len(),
            ub_root: outcome.root_bound.or(outcome.root_lp_bound),
            best_bound: outcome.best_bound,
            nominal: best_nominal,
            verified: best_verified,
            gap_pct: outcome.best_bound.is_finite().then(|| crate::milp::gap_pct(outcome.best_bound, best_nominal)),
            status: outcome.status,
            time_limit_secs: budget.map(|b| b.as_secs_f64()),
            wall_secs: used.as_secs_f64(),
            nodes: outcome.nodes,
            errors: audit.report.error_count(),
        };
        info!(
            "|L|={} init={} added={} ub={} lb={} gap={} {:?} {:.2}s",
            record.n_levels,
            record.gcis_init,
            record.gcis_added,
            opt_num(record.ub_root, 3),
            record.verified,
            opt_num(record.gap_pct, 2),
            record.status,
            record.wall_secs
        );
        records.push(record);
    }

    let final_value = best_verified;
    let best_levels = records
        .iter()
        .find(|it| it.verified >= final_value - 1e-9)
        .map_or(first.len(), |it| it.n_levels);
    WplanResult {
        iterations: records,
        assignment: best,
        power_set: prev_set,
        nominal_revenue: best_nominal,
        verified_revenue: best_verified,
        best_levels,
        wall_secs: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{micro_instance, micro_levels};
    use crate::formulation::FormulationKind;
    use crate::instance::{generate, PropagationConfig};
    use crate::solver::solve_formulation;

    fn db_values(set: &PowerSet) -> Vec<f64> {
        set.db_labels().to_vec()
    }

    #[test]
    fn wimax_final_matches_the_published_sequence() {
        let s = default_schedule(20, 40, ScheduleStyle::WimaxFinal);
        assert_eq!(s.sizes(), vec![2, 4, 6, 22]);
        assert_eq!(db_values(&s.sets()[0]), vec![-99.0, 40.0]);
        assert_eq!(db_values(&s.sets()[1]), vec![-99.0, 20.0, 30.0, 40.0]);
        assert_eq!(db_values(&s.sets()[2]), vec![-99.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        let full: Vec<f64> = std::iter::once(-99.0).chain((20..=40).map(f64::from)).collect();
        assert_eq!(db_values(&s.sets()[3]), full);
    }

    #[test]
    fn even_steps_bisects_widest_gap_lower_first() {
        let s = default_schedule(20, 40, ScheduleStyle::EvenSteps);
        assert_eq!(s.sizes(), vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22]);
        // Gaps of 5 are bisected at 22 and then 27.
        assert_eq!(db_values(&s.sets()[3]), vec![-99.0, 20.0, 22.0, 25.0, 27.0, 30.0, 35.0, 40.0]);
    }

    #[test]
    fn tiny_range_reaches_full_set_at_four_levels() {
        let s = default_schedule(0, 2, ScheduleStyle::EvenSteps);
        assert_eq!(s.sizes(), vec![2, 4]);
        assert_eq!(db_values(s.last()), vec![-99.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn schedule_rejects_bad_input() {
        assert_eq!(Schedule::parse(20, 40, "2,x"), Err(ScheduleError::Parse("2,x".into())));
        assert_eq!(Schedule::parse(20, 40, "4,2"), Err(ScheduleError::NotIncreasing));
        assert_eq!(Schedule::parse(20, 40, "2,23"), Err(ScheduleError::Size { size: 23, max: 22 }));
        assert_eq!(Schedule::parse(20, 40, "1"), Err(ScheduleError::Size { size: 1, max: 22 }));
        let a = PowerSet::from_db(&[30, 40]).unwrap();
        let b = PowerSet::from_db(&[20, 40]).unwrap();
        assert_eq!(Schedule::new(vec![a, b]), Err(ScheduleError::NotNested(0, 1)));
    }

    #[test]
    fn lift_incumbent_remaps_levels() {
        let from = PowerSet::from_db(&[40]).unwrap();
        let to = PowerSet::from_db(&[20, 30, 40]).unwrap();
        let a = Assignment { server: vec![Some(0), None], power_level: vec![1, 0] };
        let lifted = lift_incumbent(&a, &from, &to).unwrap();
        assert_eq!(lifted.power_level, vec![3, 0]);
        assert_eq!(lifted.server, a.server);
        let back = lift_incumbent(&lifted, &to, &from);
        assert_eq!(back, Ok(Assignment { server: a.server.clone(), power_level: vec![1, 0] }));
        let mid = Assignment { server: vec![None, None], power_level: vec![1, 2] };
        assert!(matches!(lift_incumbent(&mid, &to, &from), Err(ScheduleError::MissingValue(_))));
    }

    #[test]
    fn lifting_to_the_same_set_keeps_cuts() {
        let inst = micro_instance();
        let sir = SirSystem::new(&inst);
        let ps = micro_levels();
        let family = single_interferer_family(&sir, &ps);
        assert!(!family.is_empty());
        let lifted = lift_cuts(&family, &sir, &ps, &ps);
        assert_eq!(lifted.cuts(), &family[..]);
        assert!(lift_cuts(&[], &sir, &ps, &ps).is_empty());
    }

    #[test]
    fn single_iteration_matches_pi0() {
        let cfg = PropagationConfig { side_m: 300.0, ..Default::default() };
        let inst = generate(3, 3, 8, &cfg).unwrap();
        let schedule = Schedule::parse(20, 40, "4").unwrap();
        let res = run(&inst, &schedule, &WplanConfig::default());
        let (_, out) = solve_formulation(FormulationKind::Pi0, &inst, schedule.last(), None);
        assert_eq!(res.iterations.len(), 1);
        assert_eq!(Some(res.nominal_revenue), out.objective);
        assert_eq!(res.iterations[0].errors, 0);
    }

    #[test]
    fn lower_bound_is_monotone() {
        let cfg = PropagationConfig { side_m: 400.0, ..Default::default() };
        for seed in 0..3 {
            let inst = generate(seed, 4, 10, &cfg).unwrap();
            let schedule = Schedule::parse(20, 40, "2,4,6").unwrap();
            let res = run(&inst, &schedule, &WplanConfig::default());
            for w in res.iterations.windows(2) {
                assert!(w[1].verified >= w[0].verified);
            }
            assert_eq!(res.power_set.len(), 6);
            let report = verify(&inst, &res.power_set, &res.assignment).unwrap();
            assert_eq!(report.error_count(), 0);
            assert_eq!(report.verified_revenue, res.verified_revenue);
        }
    }

    #[test]
    fn table_brackets_nominal_when_it_differs() {
        let rec = |nominal, verified| IterationRecord {
            n_levels: 2,
            gcis_init: 5,
            gcis_added: 1,
            ub_root: Some(7.5),
            best_bound: 7.5,
            nominal,
            verified,
            gap_pct: Some(0.0),
            status: SolveStatus::Optimal,
            time_limit_secs: None,
            wall_secs: 0.1,
            nodes: 1,
            errors: 0,
        };
        let res = WplanResult {
            iterations: vec![rec(5.0, 5.0), rec(6.0, 4.0)],
            assignment: Assignment::all_off(1, 1),
            power_set: PowerSet::from_db(&[40]).unwrap(),
            nominal_revenue: 6.0,
            verified_revenue: 4.0,
            best_levels: 2,
            wall_secs: 0.2,
        };
        let text = res.render(TableFormat::Text);
        assert!(text.contains("4 [6]"), "{text}");
        assert!(text.ends_with("|L*| = 2\n"));
        let csv = res.render(TableFormat::Csv);
        assert!(csv.lines().nth(2).unwrap().starts_with("2,5,1,7.500000,6,4,"), "{csv}");
    }
}
