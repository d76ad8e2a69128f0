use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, InstanceError};

/// Parameters of the synthetic log-distance path-loss generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Side of the square service area in metres.
    pub side_m: f64,
    pub path_loss_exponent: f64,
    /// Distances below this are clamped, giving fading 1.
    pub reference_distance_m: f64,
    /// Linear noise power (same unit as the power levels, e.g. mW).
    pub noise_mu: f64,
    /// Linear SIR threshold.
    pub sir_threshold: f64,
    pub p_min_db: i32,
    pub p_max_db: i32,
    pub power_unit: String,
    /// Integer revenues in [1, 100] instead of unit revenues.
    pub population: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            side_m: 1000.0,
            path_loss_exponent: 3.5,
            reference_distance_m: 25.0,
            noise_mu: 0.5,
            sir_threshold: 4.0,
            p_min_db: 20,
            p_max_db: 40,
            power_unit: "dBm".into(),
            population: false,
        }
    }
}

/// Site and testpoint coordinates drawn by the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub sites: Vec<(f64, f64)>,
    pub testpoints: Vec<(f64, f64)>,
}

/// `min(1, (d0 / d)^gamma)`, with `d` clamped to at least `d0`.
pub fn fading_coefficient(distance: f64, reference: f64, exponent: f64) -> f64 {
    let d = distance.max(reference);
    (reference / d).powf(exponent).min(1.0)
}

pub fn generate(
    seed: u64,
    n_sites: usize,
    n_testpoints: usize,
    config: &PropagationConfig,
) -> Result<Instance, InstanceError> {
    generate_with_layout(seed, n_sites, n_testpoints, config).map(|(inst, _)| inst)
}

/// Places sites, then testpoints, uniformly in the square and applies the
/// path-loss model. Deterministic for a fixed seed.
pub fn generate_with_layout(
    seed: u64,
    n_sites: usize,
    n_testpoints: usize,
    config: &PropagationConfig,
) -> Result<(Instance, Layout), InstanceError> {
    if n_sites == 0 || n_testpoints == 0 {
        return Err(InstanceError::Dimension(format!(
            "need at least one site and one testpoint, got {n_sites} and {n_testpoints}"
        )));
    }
    for (field, value) in [
        ("side_m", config.side_m),
        ("path_loss_exponent", config.path_loss_exponent),
        ("reference_distance_m", config.reference_distance_m),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(InstanceError::NotPositive { field, value });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = config.side_m;
    let point = |rng: &mut ChaCha8Rng| (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
    let sites: Vec<_> = (0..n_sites).map(|_| point(&mut rng)).collect();
    let testpoints: Vec<_> = (0..n_testpoints).map(|_| point(&mut rng)).collect();
    let revenue = (0..n_testpoints)
        .map(|_| if config.population { rng.gen_range(1..=100) as f64 } else { 1.0 })
        .collect();

    let fading = testpoints
        .iter()
        .map(|&(tx, ty)| {
            sites
                .iter()
                .map(|&(sx, sy)| {
                    let d = (tx - sx).hypot(ty - sy);
                    fading_coefficient(d, config.reference_distance_m, config.path_loss_exponent)
                })
                .collect()
        })
        .collect();

    let instance = Instance {
        n_transmitters: n_sites,
        n_testpoints,
        noise_mu: config.noise_mu,
        sir_threshold: config.sir_threshold,
        p_min_db: config.p_min_db,
        p_max_db: config.p_max_db,
        power_unit: config.power_unit.clone(),
        revenue,
        fading,
    };
    instance.validate()?;
    Ok((instance, Layout { sites, testpoints }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = PropagationConfig::default();
        let a = generate(7, 2, 3, &cfg).unwrap();
        let b = generate(7, 2, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(8, 2, 3, &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn clamp_boundary() {
        assert_eq!(fading_coefficient(25.0, 25.0, 3.5), 1.0);
        assert_eq!(fading_coefficient(0.0, 25.0, 3.5), 1.0);
        assert_eq!(fading_coefficient(10.0, 25.0, 2.0), 1.0);
        let f = fading_coefficient(50.0, 25.0, 2.0);
        assert!((f - 0.25).abs() < 1e-15);
    }

    #[test]
    fn population_revenues_are_integers_in_range() {
        let cfg = PropagationConfig { population: true, ..Default::default() };
        let inst = generate(3, 4, 50, &cfg).unwrap();
        for &r in &inst.revenue {
            assert!((1.0..=100.0).contains(&r) && r.fract() == 0.0);
        }
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(generate(1, 0, 5, &PropagationConfig::default()).is_err());
        assert!(generate(1, 5, 0, &PropagationConfig::default()).is_err());
    }
}
