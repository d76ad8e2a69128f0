//! Sparse MILP models of the discretized WND problem.
//!
//! All models share one column layout: the serve flags `x(t, b)` come first
//! (testpoint major), followed either by the level flags `z(b, l)`
//! (transmitter major) or, for BM, by the continuous powers `p(b)`.
//! Every model maximises revenue.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::gci::GubCoverCut;
use crate::instance::{Assignment, PowerSet, SirSystem};

/// Coefficients of smaller magnitude are never stored.
pub const COEFF_DROP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnLayout {
    pub n_testpoints: usize,
    pub n_transmitters: usize,
    /// 0 for the continuous-power model.
    pub n_levels: usize,
}

impl ColumnLayout {
    pub fn new(n_testpoints: usize, n_transmitters: usize, n_levels: usize) -> Self {
        Self { n_testpoints, n_transmitters, n_levels }
    }

    #[inline]
    pub fn x(&self, t: usize, b: usize) -> usize {
        t * self.n_transmitters + b
    }

    #[inline]
    pub fn z(&self, b: usize, l: usize) -> usize {
        debug_assert!(l < self.n_levels);
        self.n_x() + b * self.n_levels + l
    }

    #[inline]
    pub fn p(&self, b: usize) -> usize {
        debug_assert_eq!(self.n_levels, 0);
        self.n_x() + b
    }

    pub fn n_x(&self) -> usize {
        self.n_testpoints * self.n_transmitters
    }

    pub fn n_columns(&self) -> usize {
        self.n_x() + self.n_transmitters * self.n_levels.max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKey {
    Serve { t: usize, b: usize },
    Level { b: usize, l: usize },
    Power { b: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub key: VarKey,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// Big-M SIR knapsack (full or single interferer).
    Sir,
    OneServer,
    /// One level per transmitter.
    Gub,
    Gci,
}

impl RowKind {
    fn prefix(self) -> &'static str {
        match self {
            RowKind::Sir => "sir",
            RowKind::OneServer => "srv",
            RowKind::Gub => "gub",
            RowKind::Gci => "gci",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub kind: RowKind,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FormulationKind {
    Bm,
    Dm,
    Dm0,
    Pi0,
    DmGci1,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 5] =
        [FormulationKind::Bm, FormulationKind::Dm, FormulationKind::Dm0, FormulationKind::Pi0, FormulationKind::DmGci1];

    pub fn name(self) -> &'static str {
        match self {
            FormulationKind::Bm => "bm",
            FormulationKind::Dm => "dm",
            FormulationKind::Dm0 => "dm0",
            FormulationKind::Pi0 => "pi0",
            FormulationKind::DmGci1 => "dm-gci1",
        }
    }

    /// Whether the model's rows describe the discrete SIR constraints only
    /// partially, so integral points must be checked by exact separation.
    pub fn needs_integral_separation(self) -> bool {
        matches!(self, FormulationKind::Dm0 | FormulationKind::Pi0)
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormulationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown formulation '{s}' (expected bm, dm, dm0, pi0 or dm-gci1)"))
    }
}

/// A sparse maximisation MILP.
#[derive(Clone, Debug)]
pub struct Model {
    pub kind: FormulationKind,
    pub layout: ColumnLayout,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub var_index: HashMap<VarKey, usize>,
}

impl Model {
    fn with_layout(kind: FormulationKind, layout: ColumnLayout) -> Self {
        Self {
            kind,
            layout,
            variables: Vec::with_capacity(layout.n_columns()),
            rows: Vec::new(),
            objective: Vec::new(),
            var_index: HashMap::with_capacity(layout.n_columns()),
        }
    }

    fn add_var(&mut self, key: VarKey, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let j = self.variables.len();
        self.variables.push(Variable { name, key, kind, lower, upper });
        self.var_index.insert(key, j);
        j
    }

    /// Appends a row, dropping negligible coefficients.
    pub fn add_row(&mut self, mut row: Row) {
        row.coeffs.retain(|&(j, a)| {
            assert!(j < self.variables.len(), "row references missing column {j}");
            a.abs() >= COEFF_DROP
        });
        self.rows.push(row);
    }

    pub fn n_columns(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn col(&self, key: VarKey) -> Option<usize> {
        self.var_index.get(&key).copied()
    }

    pub fn count_rows(&self, kind: RowKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xj)| (v.lower - xj).max(xj - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.variables[j].kind == VarKind::Binary
    }

    /// Reads the discrete solution off a (near) integral point: servers from
    /// `x > 0.5`, levels from the largest `z` of each transmitter.
    pub fn decode(&self, x: &[f64]) -> Assignment {
        let lay = self.layout;
        let server = (0..lay.n_testpoints)
            .map(|t| (0..lay.n_transmitters).find(|&b| x[lay.x(t, b)] > 0.5))
            .collect();
        let power_level = if lay.n_levels == 0 {
            vec![0; lay.n_transmitters]
        } else {
            (0..lay.n_transmitters)
                .map(|b| {
                    let mut best = 0;
                    for l in 1..lay.n_levels {
                        if x[lay.z(b, l)] > x[lay.z(b, best)] {
                            best = l;
                        }
                    }
                    best
                })
                .collect()
        };
        Assignment { server, power_level }
    }

    /// Continuous powers of a BM point.
    pub fn decode_powers(&self, x: &[f64]) -> Vec<f64> {
        (0..self.layout.n_transmitters).map(|b| x[self.layout.p(b)]).collect()
    }

    /// 0-1 point of a discrete model encoding `assignment`.
    pub fn encode(&self, assignment: &Assignment) -> Vec<f64> {
        let lay = self.layout;
        let mut x = vec![0.0; self.n_columns()];
        for (t, s) in assignment.server.iter().enumerate() {
            if let Some(b) = *s {
                x[lay.x(t, b)] = 1.0;
            }
        }
        for (b, &l) in assignment.power_level.iter().enumerate() {
            x[lay.z(b, l)] = 1.0;
        }
        x
    }

    /// Writes the model in CPLEX LP syntax.
    pub fn write_lp(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "\\ formulation {}", self.kind)?;
        writeln!(w, "Maximize")?;
        write!(w, " obj:")?;
        self.write_terms(&mut w, &self.objective)?;
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        let mut counters: HashMap<RowKind, usize> = HashMap::new();
        for row in &self.rows {
            let n = counters.entry(row.kind).or_default();
            write!(w, " {}{}:", row.kind.prefix(), n)?;
            *n += 1;
            self.write_terms(&mut w, &row.coeffs)?;
            let sense = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            writeln!(w, " {sense} {}", row.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for v in self.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
            writeln!(w, " {} <= {} <= {}", v.lower, v.name, v.upper)?;
        }
        writeln!(w, "Binaries")?;
        for v in self.variables.iter().filter(|v| v.kind == VarKind::Binary) {
            writeln!(w, " {}", v.name)?;
        }
        writeln!(w, "End")
    }

    fn write_terms(&self, w: &mut impl Write, terms: &[(usize, f64)]) -> io::Result<()> {
        if terms.is_empty() {
            return write!(w, " 0 {}", self.variables[0].name);
        }
        for (i, &(j, a)) in terms.iter().enumerate() {
            let sign = match (i, a < 0.0) {
                (0, false) => "",
                (0, true) => " -",
                (_, false) => " +",
                (_, true) => " -",
            };
            write!(w, "{sign} {} {}", a.abs(), self.variables[j].name)?;
        }
        Ok(())
    }
}

/// `M = -delta + sum_{b != server} a_tb P_max` for the `(t, server)` SIR row.
pub fn big_m(sir: &SirSystem, t: usize, server: usize, p_max: f64) -> f64 {
    let interference: f64 = (0..sir.n_transmitters())
        .filter(|&b| b != server)
        .map(|b| sir.coeff(t, server, b) * p_max)
        .sum();
    -sir.delta() + interference
}

fn serve_columns(model: &mut Model, revenue: &[f64]) {
    let lay = model.layout;
    for t in 0..lay.n_testpoints {
        for b in 0..lay.n_transmitters {
            let j = model.add_var(VarKey::Serve { t, b }, format!("x_{t}_{b}"), VarKind::Binary, 0.0, 1.0);
            if revenue[t] != 0.0 {
                model.objective.push((j, revenue[t]));
            }
        }
    }
}

fn level_columns(model: &mut Model) {
    let lay = model.layout;
    for b in 0..lay.n_transmitters {
        for l in 0..lay.n_levels {
            model.add_var(VarKey::Level { b, l }, format!("z_{b}_{}", l + 1), VarKind::Binary, 0.0, 1.0);
        }
    }
}

fn one_server_rows(model: &mut Model) {
    let lay = model.layout;
    for t in 0..lay.n_testpoints {
        let coeffs = (0..lay.n_transmitters).map(|b| (lay.x(t, b), 1.0)).collect();
        model.add_row(Row { coeffs, sense: Sense::Le, rhs: 1.0, kind: RowKind::OneServer });
    }
}

fn gub_rows(model: &mut Model) {
    let lay = model.layout;
    for b in 0..lay.n_transmitters {
        let coeffs = (0..lay.n_levels).map(|l| (lay.z(b, l), 1.0)).collect();
        model.add_row(Row { coeffs, sense: Sense::Eq, rhs: 1.0, kind: RowKind::Gub });
    }
}

/// Big-M SIR row of `(t, server)` over the level columns, restricted to the
/// interferers in `others`.
fn discrete_sir_row(
    sir: &SirSystem,
    power_set: &PowerSet,
    lay: &ColumnLayout,
    t: usize,
    server: usize,
    others: impl Iterator<Item = usize>,
    big_m: f64,
) -> Row {
    let mut coeffs = Vec::new();
    for b in others {
        let a = sir.coeff(t, server, b);
        coeffs.extend((0..lay.n_levels).map(|l| (lay.z(b, l), a * power_set.value(l))));
    }
    let a = sir.coeff(t, server, server);
    coeffs.extend((0..lay.n_levels).map(|l| (lay.z(server, l), -a * power_set.value(l))));
    coeffs.push((lay.x(t, server), big_m));
    Row { coeffs, sense: Sense::Le, rhs: sir.delta() + big_m, kind: RowKind::Sir }
}

fn discrete_base(kind: FormulationKind, sir: &SirSystem, power_set: &PowerSet, revenue: &[f64]) -> Model {
    assert_eq!(revenue.len(), sir.n_testpoints());
    let layout = ColumnLayout::new(sir.n_testpoints(), sir.n_transmitters(), power_set.len());
    let mut model = Model::with_layout(kind, layout);
    serve_columns(&mut model, revenue);
    level_columns(&mut model);
    model
}

/// Continuous-power big-M model.
pub fn build_bm(sir: &SirSystem, p_max: f64, revenue: &[f64]) -> Model {
    assert_eq!(revenue.len(), sir.n_testpoints());
    let layout = ColumnLayout::new(sir.n_testpoints(), sir.n_transmitters(), 0);
    let mut model = Model::with_layout(FormulationKind::Bm, layout);
    serve_columns(&mut model, revenue);
    for b in 0..layout.n_transmitters {
        model.add_var(VarKey::Power { b }, format!("p_{b}"), VarKind::Continuous, 0.0, p_max);
    }
    for t in 0..layout.n_testpoints {
        for server in 0..layout.n_transmitters {
            let m = big_m(sir, t, server, p_max);
            let mut coeffs: Vec<(usize, f64)> = (0..layout.n_transmitters)
                .map(|b| {
                    let a = sir.coeff(t, server, b);
                    (layout.p(b), if b == server { -a } else { a })
                })
                .collect();
            coeffs.push((layout.x(t, server), m));
            model.add_row(Row { coeffs, sense: Sense::Le, rhs: sir.delta() + m, kind: RowKind::Sir });
        }
    }
    one_server_rows(&mut model);
    model
}

/// Discrete big-M model with the full SIR knapsack per `(t, server)`.
pub fn build_dm(sir: &SirSystem, power_set: &PowerSet, revenue: &[f64]) -> Model {
    let mut model = discrete_base(FormulationKind::Dm, sir, power_set, revenue);
    let lay = model.layout;
    for t in 0..lay.n_testpoints {
        for server in 0..lay.n_transmitters {
            let m = big_m(sir, t, server, power_set.p_max());
            let others = (0..lay.n_transmitters).filter(|&b| b != server);
            let row = discrete_sir_row(sir, power_set, &lay, t, server, others, m);
            model.add_row(row);
        }
    }
    gub_rows(&mut model);
    one_server_rows(&mut model);
    model
}

/// Relaxation of DM with one big-M row per interferer. With a single
/// transmitter the noise-only knapsack row is kept so that the model still
/// constrains coverage.
pub fn build_dm0(sir: &SirSystem, power_set: &PowerSet, revenue: &[f64]) -> Model {
    let mut model = discrete_base(FormulationKind::Dm0, sir, power_set, revenue);
    let lay = model.layout;
    for t in 0..lay.n_testpoints {
        for server in 0..lay.n_transmitters {
            let m = big_m(sir, t, server, power_set.p_max());
            if lay.n_transmitters == 1 {
                let row = discrete_sir_row(sir, power_set, &lay, t, server, std::iter::empty(), m);
                model.add_row(row);
            }
            for b in (0..lay.n_transmitters).filter(|&b| b != server) {
                let row = discrete_sir_row(sir, power_set, &lay, t, server, std::iter::once(b), m);
                model.add_row(row);
            }
        }
    }
    gub_rows(&mut model);
    one_server_rows(&mut model);
    model
}

fn add_gci_rows(model: &mut Model, family: &[GubCoverCut]) {
    let lay = model.layout;
    for cut in family {
        model.add_row(cut.row(&lay));
    }
}

/// Initial power-indexed model: GUB, one-server and the given GCI rows.
pub fn build_pi0(sir: &SirSystem, power_set: &PowerSet, revenue: &[f64], family: &[GubCoverCut]) -> Model {
    let mut model = discrete_base(FormulationKind::Pi0, sir, power_set, revenue);
    gub_rows(&mut model);
    one_server_rows(&mut model);
    add_gci_rows(&mut model, family);
    model
}

/// DM strengthened by the single-interferer GCIs.
pub fn build_dm_gci1(sir: &SirSystem, power_set: &PowerSet, revenue: &[f64], family: &[GubCoverCut]) -> Model {
    let mut model = build_dm(sir, power_set, revenue);
    model.kind = FormulationKind::DmGci1;
    add_gci_rows(&mut model, family);
    model
}

/// Builds any discrete formulation, enumerating the GCI family as needed.
pub fn build_discrete(kind: FormulationKind, sir: &SirSystem, power_set: &PowerSet, revenue: &[f64]) -> Model {
    match kind {
        FormulationKind::Bm => build_bm(sir, power_set.p_max(), revenue),
        FormulationKind::Dm => build_dm(sir, power_set, revenue),
        FormulationKind::Dm0 => build_dm0(sir, power_set, revenue),
        FormulationKind::Pi0 => {
            build_pi0(sir, power_set, revenue, &crate::gci::single_interferer_family(sir, power_set))
        }
        FormulationKind::DmGci1 => {
            build_dm_gci1(sir, power_set, revenue, &crate::gci::single_interferer_family(sir, power_set))
        }
    }
}
