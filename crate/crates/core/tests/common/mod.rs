#![allow(dead_code)]

use hfopf::network::{Branch, Bus, Generator, Network, QuadraticCost};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_voltages(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            Complex64::from_polar(rng.gen_range(0.7..1.3), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        })
        .collect()
}

/// Connected network on `n` buses: a random spanning tree plus one extra
/// branch, random impedances, one generator at bus 0.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize) -> Network {
    let buses = (0..n)
        .map(|id| Bus {
            id,
            v_min_nominal: 0.9,
            v_max_nominal: 1.1,
            p_load: rng.gen_range(0.0..0.5),
            q_load: rng.gen_range(-0.1..0.2),
        })
        .collect();
    let mut branches = Vec::new();
    let branch = |rng: &mut ChaCha8Rng, k: usize, l: usize| Branch {
        from_bus: k,
        to_bus: l,
        r: rng.gen_range(0.0..0.3),
        x: rng.gen_range(0.01..0.5),
        s_max: 2.0,
    };
    for l in 1..n {
        let k = rng.gen_range(0..l);
        branches.push(branch(rng, k, l));
    }
    if n > 2 {
        branches.push(branch(rng, 0, n - 1));
    }
    Network {
        buses,
        branches,
        generators: vec![Generator {
            bus: 0,
            p_min_rated: 0.0,
            p_max_rated: 3.0,
            q_min_rated: -2.0,
            q_max_rated: 2.0,
            cost: QuadraticCost { c2: 1.0, c1: 10.0, c0: 1.0 },
        }],
        bess_units: vec![],
        base_mva: 100.0,
        reference_bus: 0,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
