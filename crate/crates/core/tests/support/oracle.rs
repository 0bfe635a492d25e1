//! Dense-unitary / permanent reference for linear-optics amplitudes.
//!
//! Independent of the ladder-operator code: builds the full single-photon
//! unitary over all (spatial, internal) modes and computes transition
//! amplitudes as `Perm(U[out, in]) / √(Π n_in! Π n_out!)`.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub enum Element {
    Coupler(usize, usize, f64),
    Phase(usize, f64),
}

/// Unitary over `n_spatial * n_internal` modes; column k = image of mode k.
pub fn mode_unitary(n_spatial: usize, n_internal: usize, elements: &[Element]) -> DMatrix<Complex64> {
    let dim = n_spatial * n_internal;
    let mut total = DMatrix::<Complex64>::identity(dim, dim);
    for el in elements {
        let mut step = DMatrix::<Complex64>::identity(dim, dim);
        for m in 0..n_internal {
            match *el {
                Element::Coupler(i, j, eta) => {
                    let (a, b) = (i * n_internal + m, j * n_internal + m);
                    let r = Complex64::new(eta.sqrt(), 0.0);
                    let t = Complex64::new((1.0 - eta).sqrt(), 0.0);
                    step[(a, a)] = r;
                    step[(a, b)] = t;
                    step[(b, a)] = t;
                    step[(b, b)] = -r;
                }
                Element::Phase(s, phi) => {
                    let k = s * n_internal + m;
                    step[(k, k)] = Complex64::from_polar(1.0, phi);
                }
            }
        }
        total = step * total;
    }
    total
}

/// Permanent by expansion over all permutations (n ≤ 6 here).
pub fn permanent(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut cols: Vec<usize> = (0..n).collect();
    let mut acc = Complex64::default();
    permute(m, 0, &mut cols, &mut acc);
    acc
}

fn permute(m: &DMatrix<Complex64>, k: usize, cols: &mut Vec<usize>, acc: &mut Complex64) {
    let n = cols.len();
    if k == n {
        let mut prod = Complex64::new(1.0, 0.0);
        for (row, &col) in cols.iter().enumerate() {
            prod *= m[(row, col)];
        }
        *acc += prod;
        return;
    }
    for i in k..n {
        cols.swap(k, i);
        permute(m, k + 1, cols, acc);
        cols.swap(k, i);
    }
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

fn expand(counts: &[u8]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize))
        .collect()
}

/// ⟨out| Û |in⟩.
pub fn transition_amplitude(u: &DMatrix<Complex64>, input: &[u8], output: &[u8]) -> Complex64 {
    let cols = expand(input);
    let rows = expand(output);
    if cols.len() != rows.len() {
        return Complex64::default();
    }
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| u[(rows[r], cols[c])]);
    let norm: f64 = input.iter().chain(output).map(|&n| factorial(n)).product();
    permanent(&sub) / norm.sqrt()
}

/// All occupation vectors of `photons` photons over `modes` modes.
pub fn occupations(photons: u8, modes: usize) -> Vec<Vec<u8>> {
    fn rec(left: u8, modes: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if modes == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for n in 0..=left {
            prefix.push(n);
            rec(left - n, modes - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(photons, modes, &mut Vec::new(), &mut out);
    out
}

/// Output amplitudes for a superposition input, keyed by occupation vector.
pub fn evolve(u: &DMatrix<Complex64>, input: &[(Vec<u8>, Complex64)]) -> Vec<(Vec<u8>, Complex64)> {
    let photons: u8 = input[0].0.iter().sum();
    let modes = u.nrows();
    occupations(photons, modes)
        .into_iter()
        .map(|out| {
            let amp = input
                .iter()
                .map(|(ket, a)| a * transition_amplitude(u, ket, &out))
                .sum();
            (out, amp)
        })
        .collect()
}
