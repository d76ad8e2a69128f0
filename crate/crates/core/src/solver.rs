//! WND-specific glue around the branch-and-cut engine: the GCI separator
//! and its cut pool, an LP rounding heuristic and the off-line audit of
//! solver outcomes.

use std::collections::HashMap;
use std::time::Duration;

use crate::formulation::{build_bm, build_discrete, ColumnLayout, FormulationKind, Model, Row};
use crate::gci::GubCoverCut;
use crate::instance::{best_servers, verify_powers, Assignment, Instance, PowerSet, SirSystem};
use crate::milp::{branch_and_cut, Audit, BncConfig, NoSeparator, PrimalHeuristic, Separator, SolveOutcome};
use crate::separation::{separate_exact_integral_all, separate_heuristic, SeparationQuery};

/// Distinct GCIs, in insertion order, with how often each was found.
#[derive(Clone, Debug, Default)]
pub struct CutPool {
    cuts: Vec<GubCoverCut>,
    index: HashMap<GubCoverCut, usize>,
    hits: Vec<usize>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the cut was not pooled yet.
    pub fn insert(&mut self, cut: GubCoverCut) -> bool {
        if let Some(&i) = self.index.get(&cut) {
            self.hits[i] += 1;
            return false;
        }
        self.index.insert(cut.clone(), self.cuts.len());
        self.cuts.push(cut);
        self.hits.push(1);
        true
    }

    pub fn contains(&self, cut: &GubCoverCut) -> bool {
        self.index.contains_key(cut)
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[GubCoverCut] {
        &self.cuts
    }

    pub fn hits(&self, cut: &GubCoverCut) -> usize {
        self.index.get(cut).map_or(0, |&i| self.hits[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &GubCoverCut> {
        self.cuts.iter()
    }
}

impl FromIterator<GubCoverCut> for CutPool {
    fn from_iter<I: IntoIterator<Item = GubCoverCut>>(iter: I) -> Self {
        let mut pool = Self::new();
        for cut in iter {
            pool.insert(cut);
        }
        pool
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeparationStats {
    pub queries: usize,
    pub fractional_cuts: usize,
    pub integral_cuts: usize,
}

/// GCI separation over the shared `x`/`z` layout: the Lagrangian heuristic
/// for fractional points, exact separation for 0-1 points.
pub struct GciSeparator<'a> {
    sir: &'a SirSystem,
    power_set: &'a PowerSet,
    layout: ColumnLayout,
    /// Cuts known to be in the model already.
    pub pool: CutPool,
    /// Cuts generated by this separator.
    pub added: Vec<GubCoverCut>,
    pub eps_viol: f64,
    /// Pairs with a smaller serve value are not queried.
    pub min_serve: f64,
    pub stats: SeparationStats,
}

impl<'a> GciSeparator<'a> {
    pub fn new(sir: &'a SirSystem, power_set: &'a PowerSet, layout: ColumnLayout) -> Self {
        assert_eq!(layout.n_levels, power_set.len());
        Self {
            sir,
            power_set,
            layout,
            pool: CutPool::new(),
            added: Vec::new(),
            eps_viol: 1e-6,
            min_serve: 1e-6,
            stats: SeparationStats::default(),
        }
    }

    fn take_new(&mut self, cut: GubCoverCut) -> Option<Row> {
        if self.pool.insert(cut.clone()) {
            let row = cut.row(&self.layout);
            self.added.push(cut);
            Some(row)
        } else {
            None
        }
    }
}

/// Reads a discrete assignment off a point over the shared layout.
pub fn decode_point(layout: &ColumnLayout, x: &[f64]) -> Assignment {
    let server = (0..layout.n_testpoints)
        .map(|t| (0..layout.n_transmitters).find(|&b| x[layout.x(t, b)] > 0.5))
        .collect();
    let power_level = (0..layout.n_transmitters)
        .map(|b| {
            let mut best = 0;
            for l in 1..layout.n_levels {
                if x[layout.z(b, l)] > x[layout.z(b, best)] {
                    best = l;
                }
            }
            best
        })
        .collect();
    Assignment { server, power_level }
}

impl Separator for GciSeparator<'_> {
    fn fractional(&mut self, x: &[f64]) -> Vec<Row> {
        let lay = self.layout;
        let z = &x[lay.n_x()..lay.n_x() + lay.n_transmitters * lay.n_levels];
        let mut rows = Vec::new();
        for t in 0..lay.n_testpoints {
            for server in 0..lay.n_transmitters {
                let x_serve = x[lay.x(t, server)];
                if x_serve <= self.min_serve {
                    continue;
                }
                let query = SeparationQuery { t, server, x_serve, z, n_levels: lay.n_levels, eps_viol: self.eps_viol };
                self.stats.queries += 1;
                if let Some(cut) = separate_heuristic(&query, self.sir, self.power_set) {
                    if let Some(row) = self.take_new(cut) {
                        self.stats.fractional_cuts += 1;
                        rows.push(row);
                    }
                }
            }
        }
        rows
    }

    fn integral(&mut self, x: &[f64]) -> Vec<Row> {
        let point = decode_point(&self.layout, x);
        let mut rows = Vec::new();
        for cut in separate_exact_integral_all(&point, self.sir, self.power_set) {
            if let Some(row) = self.take_new(cut) {
                self.stats.integral_cuts += 1;
                rows.push(row);
            }
        }
        rows
    }
}

/// Rounds an LP point to a physical power vector and serves every testpoint
/// that vector covers. Discrete models take the level with the largest
/// mass, the continuous model its `p` values.
pub struct LpRounding<'a> {
    sir: &'a SirSystem,
    power_set: Option<&'a PowerSet>,
    layout: ColumnLayout,
    n_columns: usize,
}

impl<'a> LpRounding<'a> {
    pub fn new(sir: &'a SirSystem, power_set: Option<&'a PowerSet>, model: &Model) -> Self {
        Self { sir, power_set, layout: model.layout, n_columns: model.n_columns() }
    }
}

impl PrimalHeuristic for LpRounding<'_> {
    fn propose(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let lay = self.layout;
        let mut out = vec![0.0; self.n_columns];
        let powers: Vec<f64> = match self.power_set {
            Some(ps) => {
                let levels = decode_point(&lay, x).power_level;
                for (b, &l) in levels.iter().enumerate() {
                    out[lay.z(b, l)] = 1.0;
                }
                levels.iter().map(|&l| ps.value(l)).collect()
            }
            None => (0..lay.n_transmitters)
                .map(|b| {
                    let p = x[lay.p(b)].max(0.0);
                    out[lay.p(b)] = p;
                    p
                })
                .collect(),
        };
        for (t, s) in best_servers(self.sir, &powers).into_iter().enumerate() {
            if let Some(b) = s {
                out[lay.x(t, b)] = 1.0;
            }
        }
        Some(out)
    }
}

/// Decodes the incumbent and attaches the off-line verification report.
/// An outcome without incumbent gets an all-off audit.
pub fn audit_outcome(outcome: &mut SolveOutcome, model: &Model, instance: &Instance, power_set: Option<&PowerSet>) {
    let lay = model.layout;
    let audit = match (&outcome.x, power_set) {
        (None, _) => Audit {
            server: vec![None; lay.n_testpoints],
            power_level: power_set.map(|_| vec![0; lay.n_transmitters]),
            powers: vec![0.0; lay.n_transmitters],
            report: Default::default(),
        },
        (Some(x), Some(ps)) if lay.n_levels > 0 => {
            let a = decode_point(&lay, x);
            let powers: Vec<f64> = a.power_level.iter().map(|&l| ps.value(l)).collect();
            let report = verify_powers(instance, &a.server, &powers);
            Audit { server: a.server, power_level: Some(a.power_level), powers, report }
        }
        (Some(x), _) => {
            let server: Vec<Option<usize>> = (0..lay.n_testpoints)
                .map(|t| (0..lay.n_transmitters).find(|&b| x[lay.x(t, b)] > 0.5))
                .collect();
            let powers = model.decode_powers(x);
            let report = verify_powers(instance, &server, &powers);
            Audit { server, power_level: None, powers, report }
        }
    };
    outcome.audit = Some(audit);
}

/// Solves one formulation over one power set (ignored for BM, which uses
/// the instance's maximum power) and audits the result.
pub fn solve_formulation(
    kind: FormulationKind,
    instance: &Instance,
    power_set: &PowerSet,
    time_limit: Option<Duration>,
) -> (Model, SolveOutcome) {
    let sir = SirSystem::new(instance);
    let config = BncConfig { time_limit, ..Default::default() };
    if kind == FormulationKind::Bm {
        let model = build_bm(&sir, power_set.p_max(), &instance.revenue);
        let mut heur = LpRounding::new(&sir, None, &model);
        let mut outcome = branch_and_cut(&model, &mut NoSeparator, &mut heur, &config);
        audit_outcome(&mut outcome, &model, instance, None);
        return (model, outcome);
    }
    let model = build_discrete(kind, &sir, power_set, &instance.revenue);
    let mut heur = LpRounding::new(&sir, Some(power_set), &model);
    let mut outcome = if kind.needs_integral_separation() {
        let mut sep = GciSeparator::new(&sir, power_set, model.layout);
        branch_and_cut(&model, &mut sep, &mut heur, &config)
    } else {
        branch_and_cut(&model, &mut NoSeparator, &mut heur, &config)
    };
    audit_outcome(&mut outcome, &model, instance, Some(power_set));
    (model, outcome)
}
