//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! `WND_ACCEPT_BUDGET_SECS` sets the per-solve budget of the 20-instance
//! suite (criteria 6 to 8); `WND_ACCEPT_SUITE` its size.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wnd_core::formulation::build_pi0;
use wnd_core::gci::{all_covers, enumerate_single_interferer, make_cut, noise_only_cut, q_threshold};
use wnd_core::instance::{generate, PropagationConfig, SirSystem};
use wnd_core::milp::{LpRow, LpStatus, Simplex};
use wnd_core::separation::{separate_exhaustive, separate_heuristic_detailed, HeuristicOutcome, SeparationQuery};
use wnd_core::wplan::{power_set_with_levels, run, WplanConfig};
use wnd_core::{build_discrete, solve_formulation, BncConfig, FormulationKind, Instance, PowerSet, Schedule};

const INTEGRALITY_TOL: f64 = 1e-7;
const ROW_TOL: f64 = 1e-10;
const BOUND_TOL: f64 = 1e-6;
const EPS_VIOL: f64 = 1e-6;
const TREND_PASS: f64 = 0.8;
const TREND_HARD_FAIL: f64 = 0.6;
const DEFAULT_BUDGET_SECS: f64 = 6.0;
const DEFAULT_SUITE: usize = 20;

struct Verdict {
    pass: bool,
    hard: bool,
    detail: String,
}

impl Verdict {
    fn exact(failures: usize, total: usize, what: &str) -> Self {
        Self { pass: failures == 0, hard: failures > 0, detail: format!("{} / {total} {what}", total - failures) }
    }
}

fn random_levels(rng: &mut ChaCha8Rng, sizes: std::ops::RangeInclusive<usize>) -> PowerSet {
    let n = rng.gen_range(sizes);
    let mut v: Vec<f64> = (1..n).map(|_| rng.gen_range(0.1..10.0)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.insert(0, 0.0);
    PowerSet::from_linear(v).expect("strictly increasing")
}

fn random_instance(rng: &mut ChaCha8Rng, nb: usize, nt: usize) -> Instance {
    Instance {
        n_transmitters: nb,
        n_testpoints: nt,
        noise_mu: rng.gen_range(0.01..0.5),
        sir_threshold: rng.gen_range(1.0..4.0),
        p_min_db: 0,
        p_max_db: 10,
        power_unit: "mW".into(),
        revenue: (0..nt).map(|_| rng.gen_range(1..=3) as f64).collect(),
        fading: (0..nt).map(|_| (0..nb).map(|_| rng.gen_range(0.01..1.0)).collect()).collect(),
    }
}

/// Single-interferer polytope of one `(t, server, b)` triple: GUB rows on
/// both transmitters plus the whole family, random objective.
fn criterion_1(rng: &mut ChaCha8Rng) -> Verdict {
    let total = 200;
    let mut failures = 0;
    for _ in 0..total {
        let n = rng.gen_range(2..=8);
        let set = random_levels(rng, n..=n);
        let n = set.len();
        let inst = random_instance(rng, 2, 1);
        let sir = SirSystem::new(&inst);
        let (x, zs, zb) = (0, |l: usize| 1 + l, |l: usize| 1 + n + l);
        let mut rows = vec![
            LpRow { coeffs: (0..n).map(|l| (zs(l), 1.0)).collect(), lo: 1.0, hi: 1.0 },
            LpRow { coeffs: (0..n).map(|l| (zb(l), 1.0)).collect(), lo: 1.0, hi: 1.0 },
        ];
        let family = enumerate_single_interferer(&sir, &set, 0, 0, 1).into_iter().chain(noise_only_cut(&sir, &set, 0, 0));
        for cut in family {
            let mut coeffs = vec![(x, 1.0)];
            coeffs.extend((0..=cut.server_level).map(|l| (zs(l), 1.0)));
            for &(_, q) in &cut.interferers {
                coeffs.extend((q..n).map(|l| (zb(l), 1.0)));
            }
            rows.push(LpRow { coeffs, lo: f64::NEG_INFINITY, hi: cut.rhs() });
        }
        let cols = 1 + 2 * n;
        let objective: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lp = Simplex::new(objective, vec![0.0; cols], vec![1.0; cols], rows);
        let ok = lp.solve(None) == LpStatus::Optimal
            && lp.x().iter().all(|v| v.min(1.0 - v).abs() <= INTEGRALITY_TOL);
        failures += usize::from(!ok);
    }
    Verdict::exact(failures, total, "LP optima integral")
}

/// A single `x(t, server) = 1` with the given levels satisfies every row.
fn point_feasible(model: &wnd_core::Model, t: usize, server: usize, levels: &[usize]) -> bool {
    let lay = model.layout;
    let mut x = vec![0.0; model.n_columns()];
    x[lay.x(t, server)] = 1.0;
    for (b, &l) in levels.iter().enumerate() {
        x[lay.z(b, l)] = 1.0;
    }
    model.rows.iter().all(|r| r.violation(&x) <= ROW_TOL * (1.0 + r.rhs.abs()))
}

fn criterion_2(rng: &mut ChaCha8Rng) -> Verdict {
    let total = 100;
    let mut failures = 0;
    let mut checked = 0usize;
    for _ in 0..total {
        let nb = rng.gen_range(2..=4);
        let nt = rng.gen_range(1..=6);
        let set = random_levels(rng, 2..=3);
        let inst = random_instance(rng, nb, nt);
        let sir = SirSystem::new(&inst);
        let dm = build_discrete(FormulationKind::Dm, &sir, &set, &inst.revenue);
        let mut full = Vec::new();
        for t in 0..nt {
            for s in 0..nb {
                full.extend(all_covers(&sir, &set, t, s, nb - 1));
            }
        }
        let pi = build_pi0(&sir, &set, &inst.revenue, &full);
        let mut bad = false;
        for levels in common::level_vectors(set.len(), nb) {
            let powers: Vec<f64> = levels.iter().map(|&l| set.value(l)).collect();
            for t in 0..nt {
                for s in 0..nb {
                    let a = point_feasible(&dm, t, s, &levels);
                    let b = point_feasible(&pi, t, s, &levels);
                    let oracle = common::served_by(&inst, &powers, t, s);
                    bad |= a != b || a != oracle;
                    checked += 1;
                }
            }
        }
        failures += usize::from(bad);
    }
    let mut v = Verdict::exact(failures, total, "instances with identical DM / PI / oracle sets");
    v.detail += &format!(" ({checked} (t, server, levels) points)");
    v
}

fn criterion_3(rng: &mut ChaCha8Rng) -> Verdict {
    let total = 200;
    let mut failures = 0;
    for _ in 0..total {
        let nb = rng.gen_range(2..=4);
        let nt = rng.gen_range(1..=6);
        let set = random_levels(rng, 2..=4);
        let inst = random_instance(rng, nb, nt);
        let (opt, _) = common::brute_force(&inst, &set);
        let (_, out) = solve_formulation(FormulationKind::Pi0, &inst, &set, None);
        let audit = out.audit.as_ref().expect("audited");
        let ok = out.status == wnd_core::SolveStatus::Optimal
            && (out.objective.unwrap_or(-1.0) - opt).abs() <= 1e-9
            && (audit.report.verified_revenue - opt).abs() <= 1e-9
            && audit.report.error_count() == 0;
        failures += usize::from(!ok);
    }
    Verdict::exact(failures, total, "B&C optima equal brute force")
}

fn criterion_4(rng: &mut ChaCha8Rng) -> Verdict {
    let total = 1000;
    let (mut failures, mut cuts, mut certs) = (0, 0, 0);
    for _ in 0..total {
        let nb = rng.gen_range(2..=4);
        let set = random_levels(rng, 2..=5);
        let n = set.len();
        let inst = random_instance(rng, nb, 1);
        let sir = SirSystem::new(&inst);
        let server = rng.gen_range(0..nb);
        let mut z = Vec::with_capacity(nb * n);
        for _ in 0..nb {
            let w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen::<f64>() }).collect();
            let sum: f64 = w.iter().sum();
            if sum == 0.0 {
                let mut e = vec![0.0; n];
                e[rng.gen_range(0..n)] = 1.0;
                z.extend(e);
            } else {
                z.extend(w.iter().map(|v| v / sum));
            }
        }
        let x_serve = rng.gen_range(0.05..=1.0);
        let query = SeparationQuery { t: 0, server, x_serve, z: &z, n_levels: n, eps_viol: EPS_VIOL };
        let ok = match separate_heuristic_detailed(&query, &sir, &set) {
            HeuristicOutcome::Cut { cut, .. } => {
                cuts += 1;
                make_cut(&sir, &set, cut.t, cut.server, cut.server_level, &cut.interferers).is_ok()
                    && query.violation(&cut) > EPS_VIOL
            }
            HeuristicOutcome::Certified { .. } => {
                certs += 1;
                separate_exhaustive(&query, &sir, &set, nb - 1).is_none()
            }
            HeuristicOutcome::Miss { .. } => true,
        };
        failures += usize::from(!ok);
    }
    let mut v = Verdict::exact(failures, total, "queries sound");
    v.detail += &format!(" ({cuts} cuts, {certs} certificates)");
    v
}

fn criterion_5(rng: &mut ChaCha8Rng) -> Verdict {
    let total = 10_000;
    let mut failures = 0;
    for _ in 0..total {
        let set = random_levels(rng, 2..=12);
        let inst = random_instance(rng, 2, 1);
        let sir = SirSystem::new(&inst);
        let n = set.len();
        let q: Vec<usize> = (0..n).map(|lambda| q_threshold(&sir, &set, 0, 0, 1, lambda).unwrap_or(n)).collect();
        let monotone = q.windows(2).all(|w| w[0] <= w[1]);
        let family = enumerate_single_interferer(&sir, &set, 0, 0, 1).len();
        failures += usize::from(!monotone || family > n);
    }
    Verdict::exact(failures, total, "draws with monotone q and family size <= |L|")
}

struct SuiteRun {
    errors: usize,
    wplan: f64,
    bm: f64,
    cold: f64,
    pi0_root: f64,
    dm0_root: f64,
    monotone: bool,
}

fn root_lp_bound(kind: FormulationKind, inst: &Instance, set: &PowerSet) -> f64 {
    let sir = SirSystem::new(inst);
    let model = build_discrete(kind, &sir, set, &inst.revenue);
    let config = BncConfig { node_limit: Some(1), cut_rounds: 0, ..Default::default() };
    let out = wnd_core::branch_and_cut(&model, &mut wnd_core::milp::NoSeparator, &mut wnd_core::milp::NoHeuristic, &config);
    out.root_lp_bound.unwrap_or(f64::INFINITY)
}

fn suite(n: usize, budget: Duration) -> Vec<SuiteRun> {
    let cfg = PropagationConfig::default();
    (1..=n as u64)
        .map(|seed| {
            let started = Instant::now();
            let inst = generate(seed, 12, 100, &cfg).expect("generator");
            let full = power_set_with_levels(cfg.p_min_db, cfg.p_max_db, 6).expect("range");
            let wplan_cfg = WplanConfig { time_limit: Some(budget), ..Default::default() };
            let warm = run(&inst, &Schedule::parse(cfg.p_min_db, cfg.p_max_db, "2,4,6").unwrap(), &wplan_cfg);
            let cold = run(&inst, &Schedule::parse(cfg.p_min_db, cfg.p_max_db, "6").unwrap(), &wplan_cfg);
            let (_, bm) = solve_formulation(FormulationKind::Bm, &inst, &full, Some(budget));
            let r = SuiteRun {
                errors: warm.iterations.iter().map(|i| i.errors).sum(),
                wplan: warm.verified_revenue,
                bm: bm.audit.as_ref().map_or(0.0, |a| a.report.verified_revenue),
                cold: cold.verified_revenue,
                pi0_root: root_lp_bound(FormulationKind::Pi0, &inst, &full),
                dm0_root: root_lp_bound(FormulationKind::Dm0, &inst, &full),
                monotone: warm.iterations.windows(2).all(|w| w[0].verified <= w[1].verified),
            };
            eprintln!(
                "  seed {seed:2}: wplan {} (cold {}) bm {} errors {} root pi0 {:.3} dm0 {:.3} [{:.0}s]",
                r.wplan,
                r.cold,
                r.bm,
                r.errors,
                r.pi0_root,
                r.dm0_root,
                started.elapsed().as_secs_f64()
            );
            r
        })
        .collect()
}

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> ExitCode {
    // Skip when run as part of a filtered `cargo test` invocation that
    // names other tests.
    if std::env::args().skip(1).any(|a| !a.starts_with('-')) {
        return ExitCode::SUCCESS;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x57_4e_44);
    let mut verdicts: Vec<(usize, Verdict, f64)> = Vec::new();
    let mut timed = |k: usize, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {k}: {} {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push((k, v, secs));
    };
    timed(1, &mut || criterion_1(&mut rng));
    timed(2, &mut || criterion_2(&mut rng));
    timed(3, &mut || criterion_3(&mut rng));
    timed(4, &mut || criterion_4(&mut rng));
    timed(5, &mut || criterion_5(&mut rng));

    let budget = Duration::from_secs_f64(env_or("WND_ACCEPT_BUDGET_SECS", DEFAULT_BUDGET_SECS));
    let n = env_or("WND_ACCEPT_SUITE", DEFAULT_SUITE);
    eprintln!("suite: {n} instances of 100 x 12, {:.0}s per solve", budget.as_secs_f64());
    let runs = suite(n, budget);

    timed(6, &mut || {
        let bad = runs.iter().filter(|r| r.errors > 0).count();
        Verdict::exact(bad, n, "WPLAN runs without coverage errors")
    });
    timed(7, &mut || {
        let bound_bad = runs.iter().filter(|r| r.pi0_root > r.dm0_root + BOUND_TOL).count();
        let wins = runs.iter().filter(|r| r.wplan >= r.bm).count();
        let share = wins as f64 / n.max(1) as f64;
        Verdict {
            pass: bound_bad == 0 && share >= TREND_PASS,
            hard: bound_bad > 0 || share < TREND_HARD_FAIL,
            detail: format!(
                "root PI0 <= DM0 on {} / {n}; WPLAN >= BM on {wins} / {n} ({:.0}%, target {:.0}%)",
                n - bound_bad,
                100.0 * share,
                100.0 * TREND_PASS
            ),
        }
    });
    timed(8, &mut || {
        let non_monotone = runs.iter().filter(|r| !r.monotone).count();
        let below_cold = runs.iter().filter(|r| r.wplan < r.cold).count();
        let share = (n - below_cold) as f64 / n.max(1) as f64;
        Verdict {
            pass: non_monotone == 0 && below_cold == 0,
            hard: non_monotone > 0 || share < TREND_HARD_FAIL,
            detail: format!("LB monotone on {} / {n}; warm >= cold on {} / {n}", n - non_monotone, n - below_cold),
        }
    });

    let hard = verdicts.iter().filter(|(_, v, _)| v.hard).count();
    if hard > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
