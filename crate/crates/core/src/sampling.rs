//! Deterministic low-discrepancy point sets.
//!
//! Every sequence here is an infinite sequence indexed from zero, so a set of
//! `m` points is always a prefix of the set of `m + k` points. Minima taken
//! over these sets can therefore only decrease as the sample count grows.

use std::f64::consts::PI;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `index` in the given base.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

/// Point `index` of the Halton sequence in `[0, 1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton sequence limited to {} dimensions", PRIMES.len());
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Additive recurrence with the generalized golden ratio of dimension `dim`
/// (the unique positive root of `x^(dim+1) = x + 1`).
pub fn kronecker(index: u64, dim: usize) -> Vec<f64> {
    let mut g = 2.0_f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (dim as f64 + 1.0));
    }
    let mut out = Vec::with_capacity(dim);
    let mut inv = 1.0;
    for _ in 0..dim {
        inv /= g;
        out.push((0.5 + inv * index as f64).fract());
    }
    out
}

/// Unit vectors in `R^dim`. For `dim == 1` the set is exactly `{-1, +1}` and
/// `count` is ignored.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![-1.0], vec![1.0]],
        2 => {
            // golden-angle spiral on the circle
            let golden = 0.5 * (5.0_f64.sqrt() - 1.0);
            (0..count)
                .map(|k| {
                    let theta = 2.0 * PI * (k as f64 * golden).fract();
                    vec![theta.cos(), theta.sin()]
                })
                .collect()
        }
        3 => (0..count)
            .map(|k| {
                let r = kronecker(k as u64, 2);
                let z = 1.0 - 2.0 * r[0];
                let phi = 2.0 * PI * r[1];
                let s = (1.0 - z * z).max(0.0).sqrt();
                vec![s * phi.cos(), s * phi.sin(), z]
            })
            .collect(),
        _ => {
            let pairs = dim.div_ceil(2);
            (0..count)
                .map(|k| {
                    let r = kronecker(k as u64, 2 * pairs);
                    let mut v = Vec::with_capacity(2 * pairs);
                    for p in 0..pairs {
                        // keep the radius finite at r == 0
                        let u1 = r[2 * p].max(1e-12);
                        let u2 = r[2 * p + 1];
                        let rad = (-2.0 * u1.ln()).sqrt();
                        v.push(rad * (2.0 * PI * u2).cos());
                        v.push(rad * (2.0 * PI * u2).sin());
                    }
                    v.truncate(dim);
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        v.iter_mut().for_each(|x| *x /= norm);
                    } else {
                        v[0] = 1.0;
                    }
                    v
                })
                .collect()
        }
    }
}

/// `count` Halton points inside the closed ball of the given centre and
/// radius (rejection from the bounding cube).
pub fn ball_points(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let dim = center.len();
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    let max_tries = 1_000u64 * count as u64 + 1_000;
    while out.len() < count && index < max_tries {
        let h = halton(index, dim);
        index += 1;
        let p: Vec<f64> = h
            .iter()
            .zip(center)
            .map(|(t, c)| c + radius * (2.0 * t - 1.0))
            .collect();
        let r2: f64 = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
        if r2 <= radius * radius {
            out.push(p);
        }
    }
    out
}
