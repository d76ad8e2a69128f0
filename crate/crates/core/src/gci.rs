//! GUB cover inequalities for the discretized SIR knapsack.
//!
//! For a testpoint `t`, server `beta` emitting at level `lambda` and a set of
//! interferers `b_i` emitting at levels `q_i` such that
//!
//! ```text
//! sum_i a_{t b_i} P_{q_i} - a_{t beta} P_lambda > delta
//! ```
//!
//! (the receiver is then not served), the inequality
//!
//! ```text
//! x_{t beta} + sum_{l <= lambda} z_{beta l} + sum_i sum_{j >= q_i} z_{b_i j} <= |Gamma| + 1
//! ```
//!
//! holds for every 0-1 point satisfying the knapsack SIR row and the
//! one-level-per-transmitter rows. Levels are 0-based in this module.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::formulation::{ColumnLayout, Row, RowKind, Sense};
use crate::instance::{PowerSet, SirSystem, COVER_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum GciError {
    #[error("cover condition violated for t={t}, server={server}: lhs {lhs} <= delta {delta}")]
    CoverConditionViolated { t: usize, server: usize, lhs: f64, delta: f64 },
    #[error("interferer {0} equals the server")]
    ServerInterferes(usize),
    #[error("interferer {0} appears twice")]
    RepeatedInterferer(usize),
    #[error("level {level} out of range for {n_levels} levels")]
    LevelOutOfRange { level: usize, n_levels: usize },
    #[error("transmitter {0} out of range")]
    TransmitterOutOfRange(usize),
}

/// One GUB cover inequality. Interferers are kept sorted by transmitter
/// index, which makes the derived `Eq`/`Hash` a canonical identity for
/// pooling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GubCoverCut {
    pub t: usize,
    pub server: usize,
    pub server_level: usize,
    /// `(b, q)` pairs, strictly increasing in `b`.
    pub interferers: Vec<(usize, usize)>,
}

impl GubCoverCut {
    pub fn rhs(&self) -> f64 {
        (self.interferers.len() + 1) as f64
    }

    /// Sparse row over the shared `x`/`z` column layout; all coefficients 1.
    pub fn row(&self, layout: &ColumnLayout) -> Row {
        let mut coeffs = Vec::with_capacity(1 + self.server_level + 1 + self.interferers.len() * layout.n_levels);
        coeffs.push((layout.x(self.t, self.server), 1.0));
        coeffs.extend((0..=self.server_level).map(|l| (layout.z(self.server, l), 1.0)));
        for &(b, q) in &self.interferers {
            coeffs.extend((q..layout.n_levels).map(|j| (layout.z(b, j), 1.0)));
        }
        Row { coeffs, sense: Sense::Le, rhs: self.rhs(), kind: RowKind::Gci }
    }

    /// Left-hand side at a point given the serve value and a level-mass
    /// accessor `z(b, l)`.
    pub fn lhs_with(&self, x_serve: f64, z: impl Fn(usize, usize) -> f64, n_levels: usize) -> f64 {
        let mut lhs = x_serve;
        lhs += (0..=self.server_level).map(|l| z(self.server, l)).sum::<f64>();
        for &(b, q) in &self.interferers {
            lhs += (q..n_levels).map(|j| z(b, j)).sum::<f64>();
        }
        lhs
    }

    pub fn violation_with(&self, x_serve: f64, z: impl Fn(usize, usize) -> f64, n_levels: usize) -> f64 {
        self.lhs_with(x_serve, z, n_levels) - self.rhs()
    }

    /// Whether the stored levels still form a cover.
    pub fn is_cover(&self, sir: &SirSystem, power_set: &PowerSet) -> bool {
        sir.denies_coverage(
            self.t,
            self.server,
            power_set.value(self.server_level),
            self.interferers.iter().map(|&(b, q)| (b, power_set.value(q))),
        )
    }
}

/// Cut dump line: `t beta lambda | b1:q1 b2:q2 ...`, levels 1-based.
impl fmt::Display for GubCoverCut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} |", self.t, self.server, self.server_level + 1)?;
        for &(b, q) in &self.interferers {
            write!(f, " {}:{}", b, q + 1)?;
        }
        Ok(())
    }
}

/// Smallest interfering level of `b` that denies coverage of `t` by `server`
/// emitting at `server_level`, if any.
pub fn q_threshold(
    sir: &SirSystem,
    power_set: &PowerSet,
    t: usize,
    server: usize,
    b: usize,
    server_level: usize,
) -> Option<usize> {
    debug_assert_ne!(b, server);
    let p_server = power_set.value(server_level);
    // The left-hand side is nondecreasing in the interferer's level.
    let q = power_set
        .levels()
        .partition_point(|&p| !sir.denies_coverage(t, server, p_server, [(b, p)]));
    (q < power_set.len()).then_some(q)
}

/// The non-dominated single-interferer family for `(t, server, b)`: one cut
/// per server level with a defined threshold.
pub fn enumerate_single_interferer(
    sir: &SirSystem,
    power_set: &PowerSet,
    t: usize,
    server: usize,
    b: usize,
) -> Vec<GubCoverCut> {
    let mut seen = HashSet::new();
    (0..power_set.len())
        .filter_map(|lambda| {
            q_threshold(sir, power_set, t, server, b, lambda).map(|q| GubCoverCut {
                t,
                server,
                server_level: lambda,
                interferers: vec![(b, q)],
            })
        })
        .filter(|cut| seen.insert(cut.clone()))
        .collect()
}

/// Strongest cut with no interferer at all: the server alone cannot beat
/// the noise up to the returned level. Only needed when the server is the
/// sole transmitter; otherwise the single-interferer cuts with `q = 1`
/// already imply it.
pub fn noise_only_cut(sir: &SirSystem, power_set: &PowerSet, t: usize, server: usize) -> Option<GubCoverCut> {
    let top = power_set
        .levels()
        .partition_point(|&p| sir.denies_coverage(t, server, p, std::iter::empty()));
    (top > 0).then(|| GubCoverCut { t, server, server_level: top - 1, interferers: Vec::new() })
}

/// Every single-interferer cut of the instance (plus the noise-only cut
/// when there is a single transmitter). This is the GCI part of PI0.
pub fn single_interferer_family(sir: &SirSystem, power_set: &PowerSet) -> Vec<GubCoverCut> {
    let nb = sir.n_transmitters();
    let mut family = Vec::new();
    for t in 0..sir.n_testpoints() {
        for server in 0..nb {
            if nb == 1 {
                family.extend(noise_only_cut(sir, power_set, t, server));
            }
            for b in (0..nb).filter(|&b| b != server) {
                family.extend(enumerate_single_interferer(sir, power_set, t, server, b));
            }
        }
    }
    family
}

/// Builds and checks a cut. Interferers may be given in any order.
pub fn make_cut(
    sir: &SirSystem,
    power_set: &PowerSet,
    t: usize,
    server: usize,
    server_level: usize,
    interferers: &[(usize, usize)],
) -> Result<GubCoverCut, GciError> {
    let n_levels = power_set.len();
    let check_level = |level: usize| {
        if level < n_levels {
            Ok(())
        } else {
            Err(GciError::LevelOutOfRange { level, n_levels })
        }
    };
    check_level(server_level)?;
    let mut sorted = interferers.to_vec();
    sorted.sort_unstable();
    for (i, &(b, q)) in sorted.iter().enumerate() {
        if b >= sir.n_transmitters() {
            return Err(GciError::TransmitterOutOfRange(b));
        }
        if b == server {
            return Err(GciError::ServerInterferes(b));
        }
        if i > 0 && sorted[i - 1].0 == b {
            return Err(GciError::RepeatedInterferer(b));
        }
        check_level(q)?;
    }
    let cut = GubCoverCut { t, server, server_level, interferers: sorted };
    if !cut.is_cover(sir, power_set) {
        let lhs = sir.cover_lhs(
            t,
            server,
            power_set.value(server_level),
            cut.interferers.iter().map(|&(b, q)| (b, power_set.value(q))),
        );
        return Err(GciError::CoverConditionViolated { t, server, lhs, delta: sir.delta() });
    }
    Ok(cut)
}

/// All covers for `(t, server)` with at most `max_gamma` interferers,
/// including the empty interferer set. Exponential; for tests and tiny
/// instances only.
pub fn all_covers(
    sir: &SirSystem,
    power_set: &PowerSet,
    t: usize,
    server: usize,
    max_gamma: usize,
) -> Vec<GubCoverCut> {
    let others: Vec<usize> = (0..sir.n_transmitters()).filter(|&b| b != server).collect();
    let n_levels = power_set.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << others.len()) {
        if mask.count_ones() as usize > max_gamma {
            continue;
        }
        let gamma: Vec<usize> = others
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask & (1 << i) != 0)
            .map(|(_, &b)| b)
            .collect();
        let mut q = vec![0usize; gamma.len()];
        loop {
            for lambda in 0..n_levels {
                let cut = GubCoverCut {
                    t,
                    server,
                    server_level: lambda,
                    interferers: gamma.iter().copied().zip(q.iter().copied()).collect(),
                };
                if cut.is_cover(sir, power_set) {
                    out.push(cut);
                }
            }
            // Odometer over L^|Gamma|.
            let mut i = 0;
            while i < q.len() {
                q[i] += 1;
                if q[i] < n_levels {
                    break;
                }
                q[i] = 0;
                i += 1;
            }
            if i == q.len() {
                break;
            }
        }
    }
    out
}

/// Which side of the knapsack an item sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnapsackSide {
    /// `N1`: positive coefficient.
    Plus,
    /// `N2`: negative coefficient.
    Minus,
}

/// A knapsack `sum_{N1} a_j y_j - sum_{N2} a_j y_j <= a0` whose items are
/// partitioned into GUB groups `S_i` (`sum_{S_i} y_j <= 1`), each group lying
/// entirely on one side. Weights are non-negative (zero weights occur for the
/// switched-off level).
#[derive(Clone, Debug)]
pub struct GubKnapsack {
    pub weights: Vec<f64>,
    pub capacity: f64,
    pub groups: Vec<Vec<usize>>,
    pub group_side: Vec<KnapsackSide>,
}

/// A lifted GUB cover inequality `sum_j coeff_j y_j <= rhs` over the items
/// of a [`GubKnapsack`].
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedInequality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl GubKnapsack {
    fn group_of(&self) -> Vec<usize> {
        let mut group_of = vec![usize::MAX; self.weights.len()];
        for (i, group) in self.groups.iter().enumerate() {
            for &j in group {
                group_of[j] = i;
            }
        }
        group_of
    }

    /// Checks the GUB cover conditions for `cover` and, when they hold,
    /// returns the lifted inequality in its general form:
    ///
    /// ```text
    /// sum_{i in I1+} sum_{j in S_i+} y_j
    ///   <= |C1| - 1 + sum_{i in I2+} sum_{j in S_i \ S_i+} y_j + sum_{i in I2 \ I2+} sum_{j in S_i} y_j
    /// ```
    ///
    /// Here `C_k` is the part of the cover on side `k`, `I_k+` the groups of
    /// side `k` meeting the cover, and `S_i+` the items of a covered group
    /// whose weight is at least (side 1) or at most (side 2) the weight of
    /// the cover item in that group.
    pub fn check_gub_cover(&self, cover: &[usize]) -> Option<LiftedInequality> {
        let group_of = self.group_of();
        let mut cover_in_group: Vec<Option<usize>> = vec![None; self.groups.len()];
        let mut c1 = 0usize;
        let mut excess = 0.0;
        for &j in cover {
            let g = *group_of.get(j)?;
            if g == usize::MAX || cover_in_group[g].is_some() {
                return None;
            }
            cover_in_group[g] = Some(j);
            match self.group_side[g] {
                KnapsackSide::Plus => {
                    c1 += 1;
                    excess += self.weights[j];
                }
                KnapsackSide::Minus => excess -= self.weights[j],
            }
        }
        if excess <= self.capacity + COVER_TOL {
            return None;
        }

        let mut coeffs = vec![0.0; self.weights.len()];
        for (g, group) in self.groups.iter().enumerate() {
            match (self.group_side[g], cover_in_group[g]) {
                (KnapsackSide::Plus, Some(l)) => {
                    for &j in group.iter().filter(|&&j| self.weights[j] >= self.weights[l]) {
                        coeffs[j] += 1.0;
                    }
                }
                (KnapsackSide::Minus, Some(l)) => {
                    for &j in group.iter().filter(|&&j| self.weights[j] > self.weights[l]) {
                        coeffs[j] -= 1.0;
                    }
                }
                (KnapsackSide::Minus, None) => {
                    for &j in group {
                        coeffs[j] -= 1.0;
                    }
                }
                (KnapsackSide::Plus, None) => {}
            }
        }
        Some(LiftedInequality {
            coeffs: coeffs.into_iter().enumerate().filter(|&(_, c)| c != 0.0).collect(),
            rhs: c1 as f64 - 1.0,
        })
    }

    /// Rewrites a lifted inequality using `sum_{S_i} y = 1` on the single
    /// minus-side group, which must meet the cover. Produces the reduced
    /// form `sum_{I1+} sum_{S_i+} y + sum_{S_2+} y <= |C1|`.
    pub fn reduce_single_minus_group(&self, ineq: &LiftedInequality, cover: &[usize]) -> Option<LiftedInequality> {
        let minus: Vec<usize> = (0..self.groups.len())
            .filter(|&g| self.group_side[g] == KnapsackSide::Minus)
            .collect();
        let &[g] = minus.as_slice() else { return None };
        if !cover.iter().any(|j| self.groups[g].contains(j)) {
            return None;
        }
        let mut coeffs: Vec<f64> = vec![0.0; self.weights.len()];
        for &(j, c) in &ineq.coeffs {
            coeffs[j] = c;
        }
        // -sum_{S \ S+} y = sum_{S+} y - 1: every item of the group gains +1.
        for &j in &self.groups[g] {
            coeffs[j] += 1.0;
        }
        Some(LiftedInequality {
            coeffs: coeffs.into_iter().enumerate().filter(|&(_, c)| c != 0.0).collect(),
            rhs: ineq.rhs + 1.0,
        })
    }
}

/// The `(t, server)` knapsack of the discrete big-M model, cast into the
/// GUB framework: `N1` holds the serve variable (weight `M`) and every
/// interferer level, `N2` the server's levels. Returns the knapsack together
/// with the item index of each model column.
pub fn wnd_knapsack(
    sir: &SirSystem,
    power_set: &PowerSet,
    layout: &ColumnLayout,
    t: usize,
    server: usize,
) -> (GubKnapsack, Vec<usize>) {
    let nb = sir.n_transmitters();
    let nl = power_set.len();
    let big_m = crate::formulation::big_m(sir, t, server, power_set.p_max());
    let mut weights = Vec::new();
    let mut columns = Vec::new();
    let mut groups = Vec::new();
    let mut group_side = Vec::new();

    weights.push(big_m);
    columns.push(layout.x(t, server));
    groups.push(vec![0]);
    group_side.push(KnapsackSide::Plus);
    for b in 0..nb {
        let side = if b == server { KnapsackSide::Minus } else { KnapsackSide::Plus };
        let a = sir.coeff(t, server, b);
        let mut group = Vec::with_capacity(nl);
        for l in 0..nl {
            group.push(weights.len());
            weights.push(a * power_set.value(l));
            columns.push(layout.z(b, l));
        }
        groups.push(group);
        group_side.push(side);
    }
    let knapsack = GubKnapsack { weights, capacity: sir.delta() + big_m, groups, group_side };
    (knapsack, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{micro_instance, micro_levels, three_transmitters};

    fn micro() -> (SirSystem, PowerSet) {
        (SirSystem::new(&micro_instance()), micro_levels())
    }

    #[test]
    fn q_threshold_micro() {
        // Brute force over the three levels: a_tb P_l - a_tbeta P_lambda > -0.1.
        let (sir, ps) = micro();
        let brute = |lambda: usize| (0..3).find(|&l| 0.6 * ps.value(l) - 1.0 * ps.value(lambda) > -0.1);
        for lambda in 0..3 {
            assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, lambda), brute(lambda));
        }
        assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, 0), Some(0));
        assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, 1), Some(2));
        assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, 2), None);
    }

    #[test]
    fn q_threshold_without_interference_path() {
        let mut inst = micro_instance();
        inst.fading[0][1] = 0.0;
        let sir = SirSystem::new(&inst);
        let ps = micro_levels();
        // Server strong enough to beat the noise alone.
        assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, 1), None);
        assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, 2), None);
        // Server off: 0 - 0 > delta always.
        assert_eq!(q_threshold(&sir, &ps, 0, 0, 1, 0), Some(0));
    }

    #[test]
    fn single_interferer_family_micro() {
        let (sir, ps) = micro();
        let cuts = enumerate_single_interferer(&sir, &ps, 0, 0, 1);
        assert_eq!(
            cuts,
            vec![
                GubCoverCut { t: 0, server: 0, server_level: 0, interferers: vec![(1, 0)] },
                GubCoverCut { t: 0, server: 0, server_level: 1, interferers: vec![(1, 2)] },
            ]
        );
        let layout = ColumnLayout::new(1, 2, 3);
        // u + v1 + w1 + w2 + w3 <= 2 and u + v1 + v2 + w3 <= 2
        let cols = |row: &Row| row.coeffs.iter().map(|&(c, _)| c).collect::<Vec<_>>();
        let (u, v, w) = (layout.x(0, 0), |l| layout.z(0, l), |l| layout.z(1, l));
        assert_eq!(cols(&cuts[0].row(&layout)), vec![u, v(0), w(0), w(1), w(2)]);
        assert_eq!(cols(&cuts[1].row(&layout)), vec![u, v(0), v(1), w(2)]);
        assert!(cuts.iter().all(|c| c.rhs() == 2.0));
        assert_eq!(cuts[1].to_string(), "0 0 2 | 1:3");
    }

    #[test]
    fn empty_family_when_interferer_is_harmless() {
        let mut inst = micro_instance();
        inst.fading[0][1] = 0.0;
        let sir = SirSystem::new(&inst);
        let ps = PowerSet::from_linear(vec![0.0, 1.0, 4.0]).unwrap();
        // Only lambda = 0 (server off) denies coverage.
        let cuts = enumerate_single_interferer(&sir, &ps, 0, 0, 1);
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].server_level, 0);
        // Restricted to active levels the family is empty.
        assert!(cuts.iter().all(|c| c.server_level == 0));
    }

    #[test]
    fn make_cut_micro() {
        let (sir, ps) = micro();
        // 0.6 * 4 - 1.0 * 1 = 1.4 > -0.1
        let cut = make_cut(&sir, &ps, 0, 0, 1, &[(1, 2)]).unwrap();
        assert_eq!(cut.rhs(), 2.0);
        // 0.6 * 4 - 1.0 * 4 = -1.6 <= -0.1
        assert!(matches!(
            make_cut(&sir, &ps, 0, 0, 2, &[(1, 2)]),
            Err(GciError::CoverConditionViolated { .. })
        ));
        assert_eq!(make_cut(&sir, &ps, 0, 0, 1, &[(0, 2)]), Err(GciError::ServerInterferes(0)));
    }

    #[test]
    fn make_cut_two_interferers() {
        let sir = SirSystem::new(&three_transmitters());
        let ps = micro_levels();
        // Server at 4: 0.6*4 + 0.6*4 - 4 = 0.8 > -0.1, while one interferer
        // alone gives -1.6.
        let cut = make_cut(&sir, &ps, 0, 0, 2, &[(2, 2), (1, 2)]).unwrap();
        assert_eq!(cut.interferers, vec![(1, 2), (2, 2)]);
        assert_eq!(cut.rhs(), 3.0);
        assert!(make_cut(&sir, &ps, 0, 0, 2, &[(1, 2)]).is_err());
        assert_eq!(make_cut(&sir, &ps, 0, 0, 2, &[(1, 2), (1, 1)]), Err(GciError::RepeatedInterferer(1)));
    }

    #[test]
    fn noise_only_cut_for_lone_transmitter() {
        let inst = crate::instance::Instance {
            n_transmitters: 1,
            n_testpoints: 1,
            noise_mu: 0.5,
            sir_threshold: 2.0,
            p_min_db: 0,
            p_max_db: 6,
            power_unit: "dBm".into(),
            revenue: vec![1.0],
            fading: vec![vec![0.5]],
        };
        let sir = SirSystem::new(&inst);
        let ps = micro_levels();
        // delta = -1: level 1 gives -0.5 > -1 (not served), level 2 gives -2.
        let cut = noise_only_cut(&sir, &ps, 0, 0).unwrap();
        assert_eq!(cut.server_level, 1);
        assert!(cut.interferers.is_empty());
        assert_eq!(single_interferer_family(&sir, &ps), vec![cut]);
    }

    #[test]
    fn generic_checker_rejects_non_covers() {
        // 3 y0 + 2 y1 - 4 y2 <= 1, groups {0}, {1}, {2}
        let k = GubKnapsack {
            weights: vec![3.0, 2.0, 4.0],
            capacity: 1.0,
            groups: vec![vec![0], vec![1], vec![2]],
            group_side: vec![KnapsackSide::Plus, KnapsackSide::Plus, KnapsackSide::Minus],
        };
        assert!(k.check_gub_cover(&[0, 1]).is_some());
        // 3 + 2 - 4 = 1 is not > 1.
        assert!(k.check_gub_cover(&[0, 1, 2]).is_none());
        // Two items of one GUB group.
        let k2 = GubKnapsack {
            weights: vec![3.0, 2.0],
            capacity: 1.0,
            groups: vec![vec![0, 1]],
            group_side: vec![KnapsackSide::Plus],
        };
        assert!(k2.check_gub_cover(&[0, 1]).is_none());
        assert!(k2.check_gub_cover(&[0]).is_some());
    }

    #[test]
    fn generic_lifting_matches_make_cut_micro() {
        let (sir, ps) = micro();
        let layout = ColumnLayout::new(1, 2, 3);
        let (knapsack, columns) = wnd_knapsack(&sir, &ps, &layout, 0, 0);
        let cut = make_cut(&sir, &ps, 0, 0, 1, &[(1, 2)]).unwrap();
        let item = |col: usize| columns.iter().position(|&c| c == col).unwrap();
        let cover = vec![item(layout.x(0, 0)), item(layout.z(1, 2)), item(layout.z(0, 1))];
        let general = knapsack.check_gub_cover(&cover).unwrap();
        let reduced = knapsack.reduce_single_minus_group(&general, &cover).unwrap();
        let row = cut.row(&layout);
        let mut expected: Vec<(usize, f64)> = row.coeffs.iter().map(|&(c, v)| (item(c), v)).collect();
        expected.sort_by_key(|&(i, _)| i);
        assert_eq!(reduced.coeffs, expected);
        assert_eq!(reduced.rhs, row.rhs);
    }
}
