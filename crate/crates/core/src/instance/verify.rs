//! Off-line coverage audit: re-evaluates the SIR inequality of every
//! testpoint a solver claims to cover, in linear units.

use serde::{Deserialize, Serialize};

use super::{Assignment, Instance, PowerSet, PowerSetError, SirSystem, VERIFY_TOL};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub nominal_covered: Vec<usize>,
    pub verified_covered: Vec<usize>,
    /// Claimed but not actually covered.
    pub errors: Vec<usize>,
    pub nominal_revenue: f64,
    pub verified_revenue: f64,
}

impl VerificationReport {
    pub fn error_count(&self) -> usize {
        self.errors.len()
    }
}

/// `sum_{b != server} a_tb p_b - a_t,server p_server`.
pub fn sir_lhs(sir: &SirSystem, t: usize, server: usize, powers: &[f64]) -> f64 {
    let others = powers
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != server)
        .map(|(b, &p)| (b, p));
    sir.cover_lhs(t, server, powers[server], others)
}

pub fn verify(
    instance: &Instance,
    power_set: &PowerSet,
    assignment: &Assignment,
) -> Result<VerificationReport, PowerSetError> {
    let powers = assignment.powers(power_set)?;
    Ok(verify_powers(instance, &assignment.server, &powers))
}

/// Audits claimed servers against arbitrary (possibly continuous) powers.
pub fn verify_powers(instance: &Instance, server: &[Option<usize>], powers: &[f64]) -> VerificationReport {
    let sir = SirSystem::new(instance);
    let mut report = VerificationReport::default();
    for (t, claim) in server.iter().enumerate() {
        let Some(beta) = *claim else { continue };
        report.nominal_covered.push(t);
        report.nominal_revenue += instance.revenue[t];
        if sir_lhs(&sir, t, beta, powers) <= sir.delta() + VERIFY_TOL {
            report.verified_covered.push(t);
            report.verified_revenue += instance.revenue[t];
        } else {
            report.errors.push(t);
        }
    }
    report
}
