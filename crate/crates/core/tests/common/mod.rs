//! Oracles written straight from the SIR model, sharing no code with the
//! solver beyond the data types.
#![allow(dead_code)]

use wnd_core::instance::{generate, PropagationConfig};
use wnd_core::{Instance, PowerSet};

/// `f_beta p_beta >= thr (noise + sum_{b != beta} f_b p_b) - 1e-12`.
pub fn served_by(inst: &Instance, powers: &[f64], t: usize, beta: usize) -> bool {
    if powers[beta] <= 0.0 {
        return false;
    }
    let f = &inst.fading[t];
    let interference: f64 = (0..powers.len()).filter(|&b| b != beta).map(|b| f[b] * powers[b]).sum();
    f[beta] * powers[beta] >= inst.sir_threshold * (inst.noise_mu + interference) - 1e-12
}

pub fn covered(inst: &Instance, powers: &[f64], t: usize) -> bool {
    (0..powers.len()).any(|b| served_by(inst, powers, t, b))
}

pub fn revenue_of(inst: &Instance, powers: &[f64]) -> f64 {
    (0..inst.n_testpoints).filter(|&t| covered(inst, powers, t)).map(|t| inst.revenue[t]).sum()
}

/// Every level vector in `levels^|B|`, in odometer order.
pub fn level_vectors(n_levels: usize, n_transmitters: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n_levels.pow(n_transmitters as u32);
    (0..total).map(move |mut k| {
        (0..n_transmitters)
            .map(|_| {
                let l = k % n_levels;
                k /= n_levels;
                l
            })
            .collect()
    })
}

/// Optimal revenue over all level vectors, with one maximiser.
pub fn brute_force(inst: &Instance, set: &PowerSet) -> (f64, Vec<usize>) {
    let mut best = (-1.0, Vec::new());
    for levels in level_vectors(set.len(), inst.n_transmitters) {
        let powers: Vec<f64> = levels.iter().map(|&l| set.value(l)).collect();
        let r = revenue_of(inst, &powers);
        if r > best.0 {
            best = (r, levels);
        }
    }
    best
}

/// Dense micro instance: a small square keeps every site an interferer.
pub fn micro(seed: u64, sites: usize, testpoints: usize) -> Instance {
    let cfg = PropagationConfig { side_m: 300.0, sir_threshold: 2.0, noise_mu: 0.05, p_min_db: 0, p_max_db: 6, ..Default::default() };
    generate(seed, sites, testpoints, &cfg).expect("valid generator config")
}

/// `n` linear levels including off, spread over `[1, 4]`.
pub fn levels(n: usize) -> PowerSet {
    let mut v = vec![0.0];
    v.extend((0..n - 1).map(|i| if n == 2 { 4.0 } else { 1.0 + 3.0 * i as f64 / (n - 2) as f64 }));
    PowerSet::from_linear(v).expect("increasing levels")
}
