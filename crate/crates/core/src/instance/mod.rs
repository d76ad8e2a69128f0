//! Problem data for discretized wireless network design.
//!
//! An [`Instance`] is geometry free: it only carries the fading matrix, the
//! noise power, the SIR threshold and the testpoint revenues. Everything the
//! optimisation models need is derived from it through [`SirSystem`].

mod generate;
mod io;
mod verify;

pub use generate::{fading_coefficient, generate, generate_with_layout, Layout, PropagationConfig};
pub use io::{read_instance, read_solution, write_instance, write_solution, SolutionFile};
pub use verify::{sir_lhs, verify, verify_powers, VerificationReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Display label of the switched-off state.
pub const OFF_DB: f64 = -99.0;

/// Absolute slack on the SIR inequality used by the off-line audit.
pub const VERIFY_TOL: f64 = 1e-9;

/// Absolute margin of the strict cover condition `lhs > delta`.
///
/// Every discrete coverage decision (q thresholds, cover checks, exact
/// separation and the brute-force oracles in the tests) goes through
/// [`SirSystem::denies_coverage`] so that they all agree on ties.
pub const COVER_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("unsupported instance version {0} (expected 1)")]
    Version(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("fading[{row}][{col}] = {value} is outside [0, 1]")]
    FadingOutOfRange { row: usize, col: usize, value: f64 },
    #[error("{field} must be finite and positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("revenue[{index}] = {value} must be finite and non-negative")]
    BadRevenue { index: usize, value: f64 },
    #[error("power range [{min}, {max}] dB is empty")]
    PowerRange { min: i32, max: i32 },
    #[error("bad solution file: {0}")]
    Solution(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// WND problem data. `fading[t][b]` is the attenuation from transmitter `b`
/// to testpoint `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n_transmitters: usize,
    pub n_testpoints: usize,
    pub noise_mu: f64,
    pub sir_threshold: f64,
    pub p_min_db: i32,
    pub p_max_db: i32,
    pub power_unit: String,
    pub revenue: Vec<f64>,
    pub fading: Vec<Vec<f64>>,
}

impl Instance {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.fading.len() != self.n_testpoints {
            return Err(InstanceError::Dimension(format!(
                "fading has {} rows, n_testpoints = {}",
                self.fading.len(),
                self.n_testpoints
            )));
        }
        if self.revenue.len() != self.n_testpoints {
            return Err(InstanceError::Dimension(format!(
                "revenue has {} entries, n_testpoints = {}",
                self.revenue.len(),
                self.n_testpoints
            )));
        }
        for (row, values) in self.fading.iter().enumerate() {
            if values.len() != self.n_transmitters {
                return Err(InstanceError::Dimension(format!(
                    "fading row {row} has {} columns, n_transmitters = {}",
                    values.len(),
                    self.n_transmitters
                )));
            }
            for (col, &value) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(InstanceError::FadingOutOfRange { row, col, value });
                }
            }
        }
        for (field, value) in [("noise_mu", self.noise_mu), ("sir_threshold", self.sir_threshold)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(InstanceError::NotPositive { field, value });
            }
        }
        for (index, &value) in self.revenue.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(InstanceError::BadRevenue { index, value });
            }
        }
        if self.p_min_db > self.p_max_db {
            return Err(InstanceError::PowerRange { min: self.p_min_db, max: self.p_max_db });
        }
        Ok(())
    }

    pub fn total_revenue(&self) -> f64 {
        self.revenue.iter().sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PowerSetError {
    #[error("a power set needs at least the off level")]
    Empty,
    #[error("the first level must be exactly 0 (switched off), got {0}")]
    FirstNotOff(f64),
    #[error("power values must be strictly increasing and finite (level {0})")]
    NotIncreasing(usize),
    #[error("power level {level} out of range (set has {len} levels)")]
    LevelOutOfRange { level: usize, len: usize },
}

/// Ordered admissible power values. Level 0 is the switched-off state with
/// power exactly 0; the remaining levels are strictly increasing.
///
/// Levels are 0-based here. Files, cut dumps and tables print them 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSet {
    levels: Vec<f64>,
    db_labels: Vec<f64>,
}

impl PowerSet {
    /// Builds the set `{off} ∪ active_db`, converting each label with
    /// `P = 10^(dB/10)`.
    pub fn from_db(active_db: &[i32]) -> Result<Self, PowerSetError> {
        let mut levels = vec![0.0];
        let mut db_labels = vec![OFF_DB];
        for (i, &db) in active_db.iter().enumerate() {
            if i > 0 && db <= active_db[i - 1] {
                return Err(PowerSetError::NotIncreasing(i + 1));
            }
            levels.push(db_to_linear(db as f64));
            db_labels.push(db as f64);
        }
        Ok(Self { levels, db_labels })
    }

    /// Builds a set from raw linear values. The first value must be 0.
    pub fn from_linear(values: Vec<f64>) -> Result<Self, PowerSetError> {
        let first = *values.first().ok_or(PowerSetError::Empty)?;
        if first != 0.0 {
            return Err(PowerSetError::FirstNotOff(first));
        }
        for l in 1..values.len() {
            if !(values[l].is_finite() && values[l] > values[l - 1]) {
                return Err(PowerSetError::NotIncreasing(l));
            }
        }
        let db_labels = values
            .iter()
            .enumerate()
            .map(|(l, &p)| if l == 0 { OFF_DB } else { 10.0 * p.log10() })
            .collect();
        Ok(Self { levels: values, db_labels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn db_labels(&self) -> &[f64] {
        &self.db_labels
    }

    pub fn value(&self, level: usize) -> f64 {
        self.levels[level]
    }

    pub fn p_max(&self) -> f64 {
        *self.levels.last().expect("power set is never empty")
    }

    /// Position of an exact power value, if present.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.levels.iter().position(|&p| p == value)
    }

    pub fn check_level(&self, level: usize) -> Result<(), PowerSetError> {
        if level < self.len() {
            Ok(())
        } else {
            Err(PowerSetError::LevelOutOfRange { level, len: self.len() })
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// SIR coefficients: for testpoint `t` and server `beta`,
/// `a_{t,beta} = fading[t][beta]`, `a_{t,b} = threshold * fading[t][b]` for
/// `b != beta`, and `delta = -noise * threshold`.
#[derive(Clone, Debug)]
pub struct SirSystem {
    n_testpoints: usize,
    n_transmitters: usize,
    gain: Vec<f64>,
    interference: Vec<f64>,
    delta: f64,
}

impl SirSystem {
    pub fn new(instance: &Instance) -> Self {
        let threshold = instance.sir_threshold;
        let gain: Vec<f64> = instance.fading.iter().flatten().copied().collect();
        let interference = gain.iter().map(|&g| threshold * g).collect();
        Self {
            n_testpoints: instance.n_testpoints,
            n_transmitters: instance.n_transmitters,
            gain,
            interference,
            delta: -instance.noise_mu * threshold,
        }
    }

    pub fn n_testpoints(&self) -> usize {
        self.n_testpoints
    }

    pub fn n_transmitters(&self) -> usize {
        self.n_transmitters
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Coefficient of transmitter `b` in the SIR inequality of `(t, server)`.
    #[inline]
    pub fn coeff(&self, t: usize, server: usize, b: usize) -> f64 {
        let k = t * self.n_transmitters + b;
        if b == server {
            self.gain[k]
        } else {
            self.interference[k]
        }
    }

    /// The strict cover test `sum_i a_{t b_i} P_{q_i} - a_{t beta} P_lambda > delta`.
    ///
    /// `interferers` yields `(b, power)` pairs; they are summed in the order
    /// given, then the server term is subtracted.
    pub fn denies_coverage<I>(&self, t: usize, server: usize, server_power: f64, interferers: I) -> bool
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        self.cover_lhs(t, server, server_power, interferers) > self.delta + COVER_TOL
    }

    pub fn cover_lhs<I>(&self, t: usize, server: usize, server_power: f64, interferers: I) -> f64
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let interference: f64 = interferers
            .into_iter()
            .map(|(b, p)| self.coeff(t, server, b) * p)
            .sum();
        interference - self.coeff(t, server, server) * server_power
    }

    /// Discrete coverage rule: `t` is served by `server` under the given
    /// power vector iff the full SIR inequality is not a cover.
    pub fn serves(&self, t: usize, server: usize, powers: &[f64]) -> bool {
        let others = powers
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != server)
            .map(|(b, &p)| (b, p));
        !self.denies_coverage(t, server, powers[server], others)
    }
}

/// A discrete solution: at most one server per testpoint and exactly one
/// (0-based) power level per transmitter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub server: Vec<Option<usize>>,
    pub power_level: Vec<usize>,
}

impl Assignment {
    /// All transmitters off, nobody served.
    pub fn all_off(n_testpoints: usize, n_transmitters: usize) -> Self {
        Self { server: vec![None; n_testpoints], power_level: vec![0; n_transmitters] }
    }

    pub fn powers(&self, power_set: &PowerSet) -> Result<Vec<f64>, PowerSetError> {
        self.power_level
            .iter()
            .map(|&l| power_set.check_level(l).map(|_| power_set.value(l)))
            .collect()
    }

    pub fn nominal_revenue(&self, revenue: &[f64]) -> f64 {
        self.server
            .iter()
            .zip(revenue)
            .filter(|(s, _)| s.is_some())
            .map(|(_, r)| r)
            .sum()
    }

    /// Serves every testpoint that some transmitter covers under the
    /// current power levels, picking the server with the lowest SIR
    /// left-hand side.
    pub fn with_best_servers(sir: &SirSystem, power_set: &PowerSet, power_level: Vec<usize>) -> Self {
        let powers: Vec<f64> = power_level.iter().map(|&l| power_set.value(l)).collect();
        let server = best_servers(sir, &powers);
        Self { server, power_level }
    }
}

/// For each testpoint, the covering transmitter with the most SIR margin.
pub fn best_servers(sir: &SirSystem, powers: &[f64]) -> Vec<Option<usize>> {
    (0..sir.n_testpoints())
        .map(|t| {
            let mut best: Option<(usize, f64)> = None;
            for beta in 0..sir.n_transmitters() {
                if powers[beta] <= 0.0 || !sir.serves(t, beta, powers) {
                    continue;
                }
                let lhs = sir_lhs(sir, t, beta, powers);
                if best.map_or(true, |(_, v)| lhs < v) {
                    best = Some((beta, lhs));
                }
            }
            best.map(|(b, _)| b)
        })
        .collect()
}
