//! Independent oracles used by the integration tests: dense convolution,
//! high-order finite differences, and direct physical-space quadrature.
//! These deliberately avoid the library's padded-product machinery.

use hmhd_core::spectral::{Grid, SpectralScalar};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;

pub type ModeDict = HashMap<Vec<i64>, Complex64>;

/// Random Hermitian-symmetric mode dictionary with |k|_inf <= k_max.
pub fn random_dict(dim: usize, k_max: i64, seed: u64) -> ModeDict {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
    let mut dict: ModeDict = HashMap::new();
    let mut idx = vec![-k_max; dim];
    loop {
        let k = idx.clone();
        let c = Complex64::new(unit(), unit());
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        dict.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0));
        dict.entry(neg.clone()).or_insert(Complex64::new(0.0, 0.0));
        *dict.get_mut(&k).unwrap() += c * 0.5;
        *dict.get_mut(&neg).unwrap() += c.conj() * 0.5;
        // advance odometer
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] <= k_max {
                break;
            }
            idx[a] = -k_max;
            a += 1;
            if a == dim {
                // force a real mean and return
                let zero = vec![0i64; dim];
                if let Some(v) = dict.get_mut(&zero) {
                    *v = Complex64::new(v.re, 0.0);
                }
                return dict;
            }
        }
    }
}

/// The field whose spectrum is `dict`.  Only one representative of each
/// conjugate pair is handed over, since the constructor fills in the mirror
/// coefficient itself.
pub fn dict_to_field(grid: &Grid, dict: &ModeDict) -> SpectralScalar {
    let mut modes: Vec<(Vec<i64>, Complex64)> = Vec::new();
    for (k, v) in dict {
        let neg: Vec<i64> = k.iter().map(|x| -x).collect();
        if *k >= neg {
            modes.push((k.clone(), *v));
        }
    }
    SpectralScalar::from_modes(grid, &modes).expect("dict fits the grid band")
}

pub fn dict_derivative(dict: &ModeDict, axis: usize) -> ModeDict {
    dict.iter()
        .map(|(k, v)| (k.clone(), v * Complex64::new(0.0, k[axis] as f64)))
        .collect()
}

pub fn dict_laplacian(dict: &ModeDict) -> ModeDict {
    dict.iter()
        .map(|(k, v)| {
            let k2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
            (k.clone(), v * (-k2))
        })
        .collect()
}

/// Torus integral of the product of two real fields given as dictionaries:
/// volume times the sum over k of a_k b_{-k}.
pub fn dict_pair_integral(a: &ModeDict, b: &ModeDict, volume: f64) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (k, va) in a {
        let neg: Vec<i64> = k.iter().map(|x| -x).collect();
        if let Some(vb) = b.get(&neg) {
            s += va * vb;
        }
    }
    volume * s.re
}

pub fn dict_add(a: &ModeDict, b: &ModeDict, w: f64) -> ModeDict {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += v * w;
    }
    out
}

/// Dense O(M^2) convolution of two mode dictionaries.
pub fn convolve_dicts(a: &ModeDict, b: &ModeDict) -> ModeDict {
    let mut out: ModeDict = HashMap::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<i64> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_insert(Complex64::new(0.0, 0.0)) += va * vb;
        }
    }
    out
}

/// Evaluate a mode dictionary at a physical point.
pub fn eval_dict(dict: &ModeDict, x: &[f64]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (k, v) in dict {
        let phase: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
        s += v * Complex64::new(0.0, phase).exp();
    }
    s.re
}

/// Largest coefficient mismatch between a spectral scalar and a dictionary.
pub fn max_coeff_gap(f: &SpectralScalar, dict: &ModeDict) -> f64 {
    let grid = f.grid();
    let mut worst = 0.0f64;
    for (idx, &v) in f.coeffs().indexed_iter() {
        let k: Vec<i64> = (0..grid.dim()).map(|a| grid.freq(a, idx[a])).collect();
        let want = dict.get(&k).copied().unwrap_or(Complex64::new(0.0, 0.0));
        worst = worst.max((v - want).norm());
    }
    // modes of the dictionary outside the grid band must be checked by the
    // caller against the band it expects; here every in-band mode is covered
    worst
}

/// 8th-order centered finite-difference first derivative of samples on a
/// uniform periodic grid.
pub fn fd8_derivative(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    (0..n)
        .map(|i| {
            let s = |off: i64| samples[((i as i64 + off).rem_euclid(n as i64)) as usize];
            (1..=4)
                .map(|m| c[m - 1] * (s(m as i64) - s(-(m as i64))))
                .sum::<f64>()
                / h
        })
        .collect()
}

/// Trapezoid-rule integral over the full torus given uniform samples
/// (exact mean times volume for periodic data).
pub fn quadrature_integral(samples: &[f64], volume: f64) -> f64 {
    volume * samples.iter().sum::<f64>() / samples.len() as f64
}
