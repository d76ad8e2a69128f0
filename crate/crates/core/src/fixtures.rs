//! Small hand-checkable instances shared by the unit tests.

use crate::instance::{Instance, PowerSet};

/// One testpoint, two transmitters. With transmitter 0 serving:
/// `a_server = 1.0`, `a_interferer = 0.6`, `delta = -0.1`.
pub fn micro_instance() -> Instance {
    Instance {
        n_transmitters: 2,
        n_testpoints: 1,
        noise_mu: 0.05,
        sir_threshold: 2.0,
        p_min_db: 0,
        p_max_db: 6,
        power_unit: "dBm".into(),
        revenue: vec![1.0],
        fading: vec![vec![1.0, 0.3]],
    }
}

/// Levels `{0, 1, 4}`.
pub fn micro_levels() -> PowerSet {
    PowerSet::from_linear(vec![0.0, 1.0, 4.0]).unwrap()
}

/// One testpoint, three transmitters; transmitter 0 serves, 1 and 2 are
/// equally strong interferers (`a = 0.6` each).
pub fn three_transmitters() -> Instance {
    Instance {
        n_transmitters: 3,
        n_testpoints: 1,
        noise_mu: 0.05,
        sir_threshold: 2.0,
        p_min_db: 0,
        p_max_db: 6,
        power_unit: "dBm".into(),
        revenue: vec![1.0],
        fading: vec![vec![1.0, 0.3, 0.3]],
    }
}
