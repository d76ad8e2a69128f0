//! Separation of GUB cover inequalities.
//!
//! For a fractional point the search problem (pick one level per
//! transmitter forming a cover of maximal violation) is relaxed in a
//! Lagrangian fashion on the cover condition. For a multiplier `eta >= 0`
//!
//! ```text
//! c_{beta l}(eta) = sum_{k <= l} z*_{beta k} - eta a_{t beta} P_l
//! c_{b l}(eta)    = sum_{k >= l} z*_{b k} - 1 + eta a_{t b} P_l     (b != beta)
//! Z(eta)          = -delta eta + sum_b max_l c_{b l}(eta)
//! ```
//!
//! `Z` is a maximum of affine functions of `eta`, hence convex, and bounds
//! the best achievable `prefix + sum (suffix - 1)`. When `min Z <= 1 - x*`
//! no cover inequality for `(t, beta)` is violated.

use crate::gci::{all_covers, make_cut, GubCoverCut};
use crate::instance::{Assignment, PowerSet, SirSystem};

/// Evaluations of the fallback scan after golden section.
const GRID_POINTS: usize = 64;
/// Floor used when the smallest positive coefficient is tiny.
const ETA_EPS: f64 = 1e-9;

/// A point restricted to one `(t, server)` pair. `z` holds the level masses
/// transmitter major (`z[b * n_levels + l]`), exactly as the level columns
/// of a model.
#[derive(Clone, Copy, Debug)]
pub struct SeparationQuery<'a> {
    pub t: usize,
    pub server: usize,
    pub x_serve: f64,
    pub z: &'a [f64],
    pub n_levels: usize,
    pub eps_viol: f64,
}

impl SeparationQuery<'_> {
    #[inline]
    pub fn z(&self, b: usize, l: usize) -> f64 {
        self.z[b * self.n_levels + l]
    }

    pub fn violation(&self, cut: &GubCoverCut) -> f64 {
        cut.violation_with(self.x_serve, |b, l| self.z(b, l), self.n_levels)
    }
}

/// Inspection solution of the Lagrangian problem at one multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianState {
    pub eta: f64,
    /// `c[b * n_levels + l]`.
    pub coeffs: Vec<f64>,
    /// Chosen level per transmitter (smallest index among ties).
    pub levels: Vec<usize>,
    pub value: f64,
}

/// Prefix sums of the server's masses and suffix sums of everybody else's,
/// the `eta`-free part of the coefficients.
fn base_coeffs(query: &SeparationQuery, n_transmitters: usize) -> Vec<f64> {
    let nl = query.n_levels;
    let mut base = vec![0.0; n_transmitters * nl];
    for b in 0..n_transmitters {
        let row = &mut base[b * nl..(b + 1) * nl];
        if b == query.server {
            let mut acc = 0.0;
            for l in 0..nl {
                acc += query.z(b, l);
                row[l] = acc;
            }
        } else {
            let mut acc = 0.0;
            for l in (0..nl).rev() {
                acc += query.z(b, l);
                row[l] = acc - 1.0;
            }
        }
    }
    base
}

/// Multiplier slopes: `-a_{t beta} P_l` for the server, `a_tb P_l` otherwise.
fn slopes(query: &SeparationQuery, sir: &SirSystem, power_set: &PowerSet) -> Vec<f64> {
    let nb = sir.n_transmitters();
    let nl = query.n_levels;
    let mut s = vec![0.0; nb * nl];
    for b in 0..nb {
        let a = sir.coeff(query.t, query.server, b);
        let sign = if b == query.server { -1.0 } else { 1.0 };
        for l in 0..nl {
            s[b * nl + l] = sign * a * power_set.value(l);
        }
    }
    s
}

pub fn lagrangian_coeffs(query: &SeparationQuery, sir: &SirSystem, power_set: &PowerSet, eta: f64) -> Vec<f64> {
    let base = base_coeffs(query, sir.n_transmitters());
    let slope = slopes(query, sir, power_set);
    base.iter().zip(&slope).map(|(c, s)| c + eta * s).collect()
}

/// Per-transmitter argmax over levels, ties to the smallest level.
fn inspect(coeffs: &[f64], n_levels: usize, levels: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (b, row) in coeffs.chunks_exact(n_levels).enumerate() {
        let mut best = 0;
        for l in 1..n_levels {
            if row[l] > row[best] {
                best = l;
            }
        }
        levels[b] = best;
        total += row[best];
    }
    total
}

/// `Z(eta)` and the inspection solution `u(eta)`.
pub fn eval_z(query: &SeparationQuery, sir: &SirSystem, power_set: &PowerSet, eta: f64) -> LagrangianState {
    let coeffs = lagrangian_coeffs(query, sir, power_set, eta);
    let mut levels = vec![0; sir.n_transmitters()];
    let value = -sir.delta() * eta + inspect(&coeffs, query.n_levels, &mut levels);
    LagrangianState { eta, coeffs, levels, value }
}

/// Reusable evaluator that avoids reallocating per multiplier.
struct ZEvaluator {
    base: Vec<f64>,
    slope: Vec<f64>,
    scratch: Vec<f64>,
    levels: Vec<usize>,
    n_levels: usize,
    minus_delta: f64,
}

impl ZEvaluator {
    fn new(query: &SeparationQuery, sir: &SirSystem, power_set: &PowerSet) -> Self {
        let base = base_coeffs(query, sir.n_transmitters());
        Self {
            scratch: vec![0.0; base.len()],
            slope: slopes(query, sir, power_set),
            base,
            levels: vec![0; sir.n_transmitters()],
            n_levels: query.n_levels,
            minus_delta: -sir.delta(),
        }
    }

    fn value(&mut self, eta: f64) -> f64 {
        for ((s, b), m) in self.scratch.iter_mut().zip(&self.base).zip(&self.slope) {
            *s = b + eta * m;
        }
        self.minus_delta * eta + inspect(&self.scratch, self.n_levels, &mut self.levels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFiniteValue {
    pub at: f64,
}

/// Golden-section search for the minimiser of a unimodal function on
/// `[lo, hi]`. Returns the midpoint of the final bracket, of width at most
/// `tol`.
pub fn golden_section_min(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NonFiniteValue> {
    golden_section_bracket(&mut f, lo, hi, tol).map(|(a, b)| 0.5 * (a + b))
}

fn golden_section_bracket(
    f: &mut impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64), NonFiniteValue> {
    let rho = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(NonFiniteValue { at: x })
        }
    };
    let mut c = b - rho * (b - a);
    let mut d = a + rho * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - rho * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + rho * (b - a);
            fd = eval(d)?;
        }
    }
    Ok((a, b))
}

/// Upper end of the multiplier range: beyond it the argmax of every
/// transmitter is frozen and `Z` is affine.
pub fn eta_max(query: &SeparationQuery, sir: &SirSystem, power_set: &PowerSet) -> f64 {
    let nb = sir.n_transmitters();
    let smallest = if power_set.len() > 1 {
        (0..nb)
            .map(|b| sir.coeff(query.t, query.server, b) * power_set.value(1))
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let denom = if smallest.is_finite() { smallest.max(ETA_EPS) } else { 1.0 };
    (nb as f64 + 1.0) / denom
}

/// Result of the Lagrangian separation heuristic.
#[derive(Clone, Debug, PartialEq)]
pub enum HeuristicOutcome {
    /// `min Z <= 1 - x* + eps`: no violated cover inequality exists.
    Certified { z_min: f64 },
    Cut { cut: GubCoverCut, violation: f64, z_min: f64 },
    /// Not certified, but no violated cut recovered from `u(eta)`.
    Miss { z_min: f64 },
}

impl HeuristicOutcome {
    pub fn into_cut(self) -> Option<GubCoverCut> {
        match self {
            HeuristicOutcome::Cut { cut, .. } => Some(cut),
            _ => None,
        }
    }
}

pub fn separate_heuristic(query: &SeparationQuery, sir: &SirSystem, power_set: &PowerSet) -> Option<GubCoverCut> {
    separate_heuristic_detailed(query, sir, power_set).into_cut()
}

pub fn separate_heuristic_detailed(
    query: &SeparationQuery,
    sir: &SirSystem,
    power_set: &PowerSet,
) -> HeuristicOutcome {
    let threshold = 1.0 - query.x_serve + query.eps_viol;
    let hi = eta_max(query, sir, power_set);
    let tol = 1e-8 * (1.0 + hi);
    let mut evaluator = ZEvaluator::new(query, sir, power_set);
    let mut best = (f64::INFINITY, 0.0);
    let mut tracked = |eta: f64, ev: &mut ZEvaluator| {
        let v = ev.value(eta);
        if v < best.0 {
            best = (v, eta);
        }
        v
    };
    // Cheap exits: eta = 0 alone may certify.
    if tracked(0.0, &mut evaluator) <= threshold {
        return HeuristicOutcome::Certified { z_min: best.0 };
    }
    let bracket = golden_section_bracket(&mut |eta| tracked(eta, &mut evaluator), 0.0, hi, tol);
    let (lo_end, hi_end) = match bracket {
        Ok(b) => b,
        Err(_) => return HeuristicOutcome::Miss { z_min: f64::NAN },
    };
    let mid = 0.5 * (lo_end + hi_end);
    let z_mid = evaluator.value(mid);
    let z_min = z_mid.min(best.0);
    if z_min <= threshold {
        return HeuristicOutcome::Certified { z_min };
    }

    // Candidates read off the inspection solutions around the minimiser.
    let mut candidates = vec![mid, best.1, hi_end];
    candidates.dedup();
    for eta in candidates {
        evaluator.value(eta);
        let levels = evaluator.levels.clone();
        if let Some((cut, violation)) = cut_from_levels(query, sir, power_set, &levels) {
            return HeuristicOutcome::Cut { cut, violation, z_min };
        }
    }

    // Z may not be unimodal in practice; scan a fixed grid before giving up.
    let mut z_min = z_min;
    for k in 0..=GRID_POINTS {
        let eta = hi * k as f64 / GRID_POINTS as f64;
        let v = evaluator.value(eta);
        z_min = z_min.min(v);
        if v <= threshold {
            return HeuristicOutcome::Certified { z_min: v };
        }
        let levels = evaluator.levels.clone();
        if let Some((cut, violation)) = cut_from_levels(query, sir, power_set, &levels) {
            return HeuristicOutcome::Cut { cut, violation, z_min };
        }
    }
    HeuristicOutcome::Miss { z_min }
}

/// Builds a cover from a level choice, trims it to a minimal cover and
/// strengthens it; returns it when violated by more than `eps_viol`.
fn cut_from_levels(
    query: &SeparationQuery,
    sir: &SirSystem,
    power_set: &PowerSet,
    levels: &[usize],
) -> Option<(GubCoverCut, f64)> {
    let (t, server) = (query.t, query.server);
    let gamma: Vec<(usize, usize)> = (0..sir.n_transmitters())
        .filter(|&b| b != server)
        .filter(|&b| {
            let q = levels[b];
            let suffix: f64 = (q..query.n_levels).map(|l| query.z(b, l)).sum();
            suffix > 0.0 && sir.coeff(t, server, b) * power_set.value(q) > 0.0
        })
        .map(|b| (b, levels[b]))
        .collect();
    let cut = GubCoverCut { t, server, server_level: levels[server], interferers: gamma };
    if !cut.is_cover(sir, power_set) {
        return None;
    }
    let cut = strengthen(minimal_cover(cut, sir, power_set, |b, q| (q..query.n_levels).map(|l| query.z(b, l)).sum()), sir, power_set);
    let cut = make_cut(sir, power_set, cut.t, cut.server, cut.server_level, &cut.interferers).ok()?;
    let violation = query.violation(&cut);
    (violation > query.eps_viol).then_some((cut, violation))
}

/// Greedily drops interferers while the cover condition survives, weakest
/// suffix mass first, then smallest interference.
fn minimal_cover(
    mut cut: GubCoverCut,
    sir: &SirSystem,
    power_set: &PowerSet,
    suffix_mass: impl Fn(usize, usize) -> f64,
) -> GubCoverCut {
    let mut order: Vec<(usize, usize)> = cut.interferers.clone();
    let strength = |&(b, q): &(usize, usize)| sir.coeff(cut.t, cut.server, b) * power_set.value(q);
    order.sort_by(|x, y| {
        suffix_mass(x.0, x.1)
            .total_cmp(&suffix_mass(y.0, y.1))
            .then(strength(x).total_cmp(&strength(y)))
            .then(x.0.cmp(&y.0))
    });
    for item in order {
        let pos = cut.interferers.iter().position(|&i| i == item).expect("member");
        cut.interferers.remove(pos);
        if !cut.is_cover(sir, power_set) {
            cut.interferers.insert(pos, item);
        }
    }
    cut
}

/// Raises the server level and then lowers each interfering level as far
/// as the cover condition allows. The resulting inequality dominates the
/// input one and keeps its violation on any point with unit GUB mass.
fn strengthen(mut cut: GubCoverCut, sir: &SirSystem, power_set: &PowerSet) -> GubCoverCut {
    while cut.server_level + 1 < power_set.len() {
        cut.server_level += 1;
        if !cut.is_cover(sir, power_set) {
            cut.server_level -= 1;
            break;
        }
    }
    for i in 0..cut.interferers.len() {
        while cut.interferers[i].1 > 0 {
            cut.interferers[i].1 -= 1;
            if !cut.is_cover(sir, power_set) {
                cut.interferers[i].1 += 1;
                break;
            }
        }
    }
    cut
}

/// Exact separation for a 0-1 point: the first testpoint whose claimed
/// server is not actually covering yields a cut.
pub fn separate_exact_integral(point: &Assignment, sir: &SirSystem, power_set: &PowerSet) -> Option<GubCoverCut> {
    (0..sir.n_testpoints()).find_map(|t| exact_cut_for(point, sir, power_set, t))
}

/// As [`separate_exact_integral`], one cut per violated testpoint.
pub fn separate_exact_integral_all(point: &Assignment, sir: &SirSystem, power_set: &PowerSet) -> Vec<GubCoverCut> {
    (0..sir.n_testpoints()).filter_map(|t| exact_cut_for(point, sir, power_set, t)).collect()
}

fn exact_cut_for(point: &Assignment, sir: &SirSystem, power_set: &PowerSet, t: usize) -> Option<GubCoverCut> {
    let server = point.server[t]?;
    let levels = &point.power_level;
    let gamma: Vec<(usize, usize)> = (0..sir.n_transmitters())
        .filter(|&b| b != server && sir.coeff(t, server, b) * power_set.value(levels[b]) > 0.0)
        .map(|b| (b, levels[b]))
        .collect();
    let cut = GubCoverCut { t, server, server_level: levels[server], interferers: gamma };
    if !cut.is_cover(sir, power_set) {
        return None;
    }
    let cut = strengthen(minimal_cover(cut, sir, power_set, |_, _| 1.0), sir, power_set);
    debug_assert!(make_cut(sir, power_set, t, server, cut.server_level, &cut.interferers).is_ok());
    Some(cut)
}

/// Most violated cover inequality with at most `max_gamma` interferers,
/// by enumeration. Test oracle for small dimensions.
pub fn separate_exhaustive(
    query: &SeparationQuery,
    sir: &SirSystem,
    power_set: &PowerSet,
    max_gamma: usize,
) -> Option<GubCoverCut> {
    let mut best: Option<(GubCoverCut, f64)> = None;
    for cut in all_covers(sir, power_set, query.t, query.server, max_gamma) {
        let v = query.violation(&cut);
        if v > query.eps_viol && best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((cut, v));
        }
    }
    best.map(|(c, _)| c)
}

/// Level masses of a 0-1 point, in query layout.
pub fn integral_masses(assignment: &Assignment, n_levels: usize) -> Vec<f64> {
    let mut z = vec![0.0; assignment.power_level.len() * n_levels];
    for (b, &l) in assignment.power_level.iter().enumerate() {
        z[b * n_levels + l] = 1.0;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{micro_instance, micro_levels, three_transmitters};

    fn micro() -> (SirSystem, PowerSet) {
        (SirSystem::new(&micro_instance()), micro_levels())
    }

    fn query<'a>(z: &'a [f64], x: f64) -> SeparationQuery<'a> {
        SeparationQuery { t: 0, server: 0, x_serve: x, z, n_levels: 3, eps_viol: 1e-6 }
    }

    #[test]
    fn coeffs_at_zero_multiplier() {
        let (sir, ps) = micro();
        // server at level 1 (off), interferer at level 3
        let z = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let c = lagrangian_coeffs(&query(&z, 1.0), &sir, &ps, 0.0);
        assert_eq!(&c[0..3], &[1.0, 1.0, 1.0]);
        assert_eq!(&c[3..6], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn coeff_hand_check() {
        let (sir, ps) = micro();
        let z = [0.2, 0.3, 0.5, 0.1, 0.6, 0.3];
        let c = lagrangian_coeffs(&query(&z, 0.4), &sir, &ps, 1.0);
        // b != beta, l = 3: suffix 0.3 - 1 + 0.6 * 4
        assert!((c[5] - (0.3 - 1.0 + 2.4)).abs() < 1e-12);
        // beta, l = 2: prefix 0.5 - 1.0 * 1
        assert!((c[1] - (0.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn constant_rows_pick_smallest_level() {
        let (sir, ps) = micro();
        // All mass on level 1 for the server makes prefix sums constant;
        // interferer mass on level 1 makes suffix sums 0, 0-1, 0-1.
        let z = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let st = eval_z(&query(&z, 0.0), &sir, &ps, 0.0);
        assert_eq!(st.levels, vec![0, 0]);
        assert_eq!(st.value, 1.0 + -1.0);
    }

    #[test]
    fn z_by_enumeration_micro() {
        let (sir, ps) = micro();
        let z = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let q = query(&z, 1.0);
        for eta in [0.0, 0.3, 1.0, 2.5] {
            let mut best = f64::NEG_INFINITY;
            for lb in 0..3 {
                for li in 0..3 {
                    let server = z[..=lb].iter().sum::<f64>() - eta * ps.value(lb);
                    let other = z[3 + li..].iter().sum::<f64>() - 1.0 + eta * 0.6 * ps.value(li);
                    best = best.max(server + other);
                }
            }
            let st = eval_z(&q, &sir, &ps, eta);
            assert!((st.value - (0.1 * eta + best)).abs() < 1e-12, "eta {eta}");
        }
    }

    #[test]
    fn golden_section_cases() {
        let eta = golden_section_min(|x| (x - 2.0).powi(2), 0.0, 5.0, 1e-6).unwrap();
        assert!((eta - 2.0).abs() <= 1e-6);
        let eta = golden_section_min(|x| x, 0.0, 1.0, 1e-6).unwrap();
        assert!(eta.abs() <= 1e-6);
        let eta = golden_section_min(|_| 3.0, -1.0, 1.0, 1e-6).unwrap();
        assert!((-1.0..=1.0).contains(&eta));
        assert!(golden_section_min(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-6).is_err());
    }

    #[test]
    fn golden_section_evaluation_budget() {
        let (lo, hi, tol) = (0.0, 10.0, 1e-7);
        let mut evals = 0;
        golden_section_min(
            |x| {
                evals += 1;
                (x - 3.3).abs()
            },
            lo,
            hi,
            tol,
        )
        .unwrap();
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        let bound = (((hi - lo) / tol).ln() / (1.0 / rho).ln()).ceil() as usize + 2;
        assert!(evals <= bound, "{evals} > {bound}");
    }

    #[test]
    fn heuristic_finds_known_infeasible_point() {
        let (sir, ps) = micro();
        // x = 1, server at level 2, interferer at level 3.
        let z = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let q = query(&z, 1.0);
        let HeuristicOutcome::Cut { cut, violation, .. } = separate_heuristic_detailed(&q, &sir, &ps) else {
            panic!("expected a cut");
        };
        assert_eq!(cut, make_cut(&sir, &ps, 0, 0, 1, &[(1, 2)]).unwrap());
        assert!((violation - 1.0).abs() < 1e-12);
        assert_eq!(separate_exhaustive(&q, &sir, &ps, 1), Some(cut));
    }

    #[test]
    fn heuristic_certifies_feasible_points() {
        let (sir, ps) = micro();
        let all_off = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert!(matches!(
            separate_heuristic_detailed(&query(&all_off, 0.0), &sir, &ps),
            HeuristicOutcome::Certified { .. }
        ));
        // server at 4, interferer at 1: covered.
        let served = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert_eq!(separate_heuristic(&query(&served, 1.0), &sir, &ps), None);
    }

    #[test]
    fn exact_integral_micro() {
        let (sir, ps) = micro();
        let bad = Assignment { server: vec![Some(0)], power_level: vec![1, 2] };
        let cut = separate_exact_integral(&bad, &sir, &ps).unwrap();
        assert_eq!(cut, GubCoverCut { t: 0, server: 0, server_level: 1, interferers: vec![(1, 2)] });
        let z = integral_masses(&bad, 3);
        assert_eq!(query(&z, 1.0).violation(&cut), 1.0);
        let good = Assignment { server: vec![Some(0)], power_level: vec![2, 1] };
        assert_eq!(separate_exact_integral(&good, &sir, &ps), None);
    }

    #[test]
    fn exact_integral_trims_to_minimal_cover() {
        // Both interferers at 4 against a server at 1: either alone denies.
        let sir = SirSystem::new(&three_transmitters());
        let ps = micro_levels();
        let point = Assignment { server: vec![Some(0)], power_level: vec![1, 2, 2] };
        let cut = separate_exact_integral(&point, &sir, &ps).unwrap();
        assert_eq!(cut.interferers.len(), 1);
        // Server at 4 needs both interferers.
        let point = Assignment { server: vec![Some(0)], power_level: vec![2, 2, 2] };
        let cut = separate_exact_integral(&point, &sir, &ps).unwrap();
        assert_eq!(cut.interferers, vec![(1, 2), (2, 2)]);
    }

    #[test]
    fn eta_max_uses_smallest_active_coefficient() {
        let (sir, ps) = micro();
        let z = [0.0; 6];
        // min(1.0 * 1, 0.6 * 1) = 0.6
        assert!((eta_max(&query(&z, 0.0), &sir, &ps) - 3.0 / 0.6).abs() < 1e-12);
    }
}
