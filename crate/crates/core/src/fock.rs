//! Sparse complex-amplitude Fock states over a (spatial × internal) mode grid.
//!
//! Mode `(s, m)` lives at flat index `s * n_internal + m`, so the ordering of
//! occupation vectors in the term map is lexicographic by (spatial, internal).
//! Every operation returns a new state; states are never mutated in place.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Default maximum number of photons a state may hold.
pub const DEFAULT_PHOTON_CAP: usize = 6;

/// Terms whose amplitude magnitude falls below this are dropped.
pub const PRUNE_EPSILON: f64 = 1e-14;

/// Tolerance on `u†u - 1` accepted by [`FockState::apply_two_mode_unitary`].
pub const UNITARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub spatial: usize,
    pub internal: usize,
}

impl ModeIndex {
    pub fn new(spatial: usize, internal: usize) -> Self {
        Self { spatial, internal }
    }
}

/// Photon counts per mode, flattened spatial-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector(Vec<u8>);

impl OccupationVector {
    pub fn new(counts: Vec<u8>) -> Self {
        Self(counts)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn total_photons(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    n_spatial: usize,
    n_internal: usize,
    photon_cap: usize,
    terms: BTreeMap<OccupationVector, Complex64>,
}

impl FockState {
    /// The vacuum on an `n_spatial × n_internal` grid.
    pub fn vacuum(n_spatial: usize, n_internal: usize) -> Result<Self> {
        if n_spatial == 0 || n_internal == 0 {
            return Err(invalid(format!(
                "grid dimensions must be positive, got {n_spatial}×{n_internal}"
            )));
        }
        let mut terms = BTreeMap::new();
        terms.insert(
            OccupationVector::zeros(n_spatial * n_internal),
            Complex64::new(1.0, 0.0),
        );
        Ok(Self {
            n_spatial,
            n_internal,
            photon_cap: DEFAULT_PHOTON_CAP,
            terms,
        })
    }

    /// Builds a state from explicit `(counts, amplitude)` pairs. Repeated
    /// occupation vectors are summed. The result is not normalized.
    pub fn from_terms<I>(n_spatial: usize, n_internal: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, Complex64)>,
    {
        let mut state = Self::vacuum(n_spatial, n_internal)?;
        state.terms.clear();
        let width = n_spatial * n_internal;
        let mut photons = None;
        for (counts, amp) in terms {
            if counts.len() != width {
                return Err(invalid(format!(
                    "occupation vector has {} entries, grid needs {width}",
                    counts.len()
                )));
            }
            let occ = OccupationVector::new(counts);
            let n = occ.total_photons();
            match photons {
                None => photons = Some(n),
                Some(p) if p != n => return Err(invalid(format!("terms mix photon numbers {p} and {n}"))),
                _ => {}
            }
            if n > state.photon_cap {
                return Err(Error::Capacity {
                    requested: n,
                    cap: state.photon_cap,
                });
            }
            *state.terms.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        state.prune();
        Ok(state)
    }

    /// Returns the same state with a different photon cap.
    pub fn with_photon_cap(mut self, cap: usize) -> Result<Self> {
        let n = self.photon_number();
        if n > cap {
            return Err(Error::Capacity { requested: n, cap });
        }
        self.photon_cap = cap;
        Ok(self)
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    pub fn photon_cap(&self) -> usize {
        self.photon_cap
    }

    pub fn flat_index(&self, mode: ModeIndex) -> usize {
        mode.spatial * self.n_internal + mode.internal
    }

    /// Photon number shared by every term (0 for an empty state).
    pub fn photon_number(&self) -> usize {
        self.terms
            .keys()
            .next()
            .map(OccupationVector::total_photons)
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, counts: &[u8]) -> Complex64 {
        self.terms
            .get(&OccupationVector::new(counts.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Photon counts per spatial mode for an occupation vector of this grid,
    /// summed over internal modes.
    pub fn spatial_counts(&self, occ: &OccupationVector) -> Vec<usize> {
        occ.counts()
            .chunks(self.n_internal)
            .map(|c| c.iter().map(|&n| n as usize).sum())
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(Complex64::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NumericalDegeneracy(
                "cannot normalize a state of zero norm".into(),
            ));
        }
        let mut out = self.clone();
        for amp in out.terms.values_mut() {
            *amp /= norm;
        }
        out.prune();
        Ok(out)
    }

    fn check_mode(&self, mode: ModeIndex) -> Result<()> {
        if mode.spatial >= self.n_spatial || mode.internal >= self.n_internal {
            return Err(invalid(format!(
                "mode ({}, {}) outside {}×{} grid",
                mode.spatial, mode.internal, self.n_spatial, self.n_internal
            )));
        }
        Ok(())
    }

    fn check_spatial(&self, s: usize) -> Result<()> {
        if s >= self.n_spatial {
            return Err(invalid(format!(
                "spatial mode {s} outside grid of width {}",
                self.n_spatial
            )));
        }
        Ok(())
    }

    fn check_capacity(&self, requested: usize) -> Result<()> {
        if requested > self.photon_cap || requested > u8::MAX as usize {
            return Err(Error::Capacity {
                requested,
                cap: self.photon_cap,
            });
        }
        Ok(())
    }

    fn with_terms(&self, terms: BTreeMap<OccupationVector, Complex64>) -> Self {
        let mut out = Self {
            n_spatial: self.n_spatial,
            n_internal: self.n_internal,
            photon_cap: self.photon_cap,
            terms,
        };
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, amp| amp.norm() >= PRUNE_EPSILON);
    }

    /// Applies a†(mode). The result is not renormalized.
    pub fn apply_creation(&self, mode: ModeIndex) -> Result<Self> {
        self.apply_creation_combination(&[(mode, Complex64::new(1.0, 0.0))])
    }

    /// Applies the creation operator `Σ_k c_k a†(mode_k)`, e.g. a photon in a
    /// superposition of internal modes. Not renormalized.
    pub fn apply_creation_combination(&self, modes: &[(ModeIndex, Complex64)]) -> Result<Self> {
        for &(mode, _) in modes {
            self.check_mode(mode)?;
        }
        self.check_capacity(self.photon_number() + 1)?;
        let mut terms = BTreeMap::new();
        for (occ, &amp) in &self.terms {
            for &(mode, coeff) in modes {
                if coeff == Complex64::default() {
                    continue;
                }
                let k = self.flat_index(mode);
                let mut counts = occ.counts().to_vec();
                let n = counts[k];
                counts[k] = n + 1;
                let factor = ((n as f64) + 1.0).sqrt();
                *terms
                    .entry(OccupationVector::new(counts))
                    .or_insert(Complex64::default()) += amp * coeff * factor;
            }
        }
        Ok(self.with_terms(terms))
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        if self.n_spatial != other.n_spatial || self.n_internal != other.n_internal {
            return Err(invalid(format!(
                "grid mismatch: {}×{} vs {}×{}",
                self.n_spatial, self.n_internal, other.n_spatial, other.n_internal
            )));
        }
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::default();
        for (occ, a) in &small.terms {
            if let Some(b) = large.terms.get(occ) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// Transforms creation operators on spatial modes `i` and `j` by `u`,
    /// identically for every internal index:
    /// `a†_i → u₀₀ a†_i + u₁₀ a†_j`, `a†_j → u₀₁ a†_i + u₁₁ a†_j`.
    pub fn apply_two_mode_unitary(&self, u: &Matrix2<Complex64>, i: usize, j: usize) -> Result<Self> {
        self.check_spatial(i)?;
        self.check_spatial(j)?;
        if i == j {
            return Err(invalid("two-mode unitary needs distinct modes"));
        }
        check_unitary(u)?;

        let n_internal = self.n_internal;
        let mut out: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
        let mut cache: BTreeMap<(u8, u8), Vec<Complex64>> = BTreeMap::new();

        for (occ, &amp) in &self.terms {
            let mut base = occ.counts().to_vec();
            for m in 0..n_internal {
                base[i * n_internal + m] = 0;
                base[j * n_internal + m] = 0;
            }
            let mut partial = vec![(base, amp)];
            for m in 0..n_internal {
                let ki = i * n_internal + m;
                let kj = j * n_internal + m;
                let p = occ.counts()[ki];
                let q = occ.counts()[kj];
                if p == 0 && q == 0 {
                    continue;
                }
                let coeffs = cache
                    .entry((p, q))
                    .or_insert_with(|| two_mode_expansion(u, p as usize, q as usize));
                let total = p + q;
                let mut next = Vec::with_capacity(partial.len() * coeffs.len());
                for (counts, a) in &partial {
                    for (r, &c) in coeffs.iter().enumerate() {
                        if c.norm() < PRUNE_EPSILON {
                            continue;
                        }
                        let mut counts = counts.clone();
                        counts[ki] = r as u8;
                        counts[kj] = total - r as u8;
                        next.push((counts, a * c));
                    }
                }
                partial = next;
            }
            for (counts, a) in partial {
                *out.entry(OccupationVector::new(counts)).or_default() += a;
            }
        }
        Ok(self.with_terms(out))
    }

    /// Multiplies each term by `e^{i n φ}`, `n` being that term's photon count
    /// in `spatial` summed over internal modes.
    pub fn apply_phase(&self, spatial: usize, phi: f64) -> Result<Self> {
        self.check_spatial(spatial)?;
        let lo = spatial * self.n_internal;
        let hi = lo + self.n_internal;
        let terms = self
            .terms
            .iter()
            .map(|(occ, &amp)| {
                let n: usize = occ.counts()[lo..hi].iter().map(|&c| c as usize).sum();
                (occ.clone(), amp * Complex64::from_polar(1.0, n as f64 * phi))
            })
            .collect();
        Ok(self.with_terms(terms))
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (occ, amp)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i){occ}", amp.re, amp.im)?;
        }
        Ok(())
    }
}

pub(crate) fn check_unitary(u: &Matrix2<Complex64>) -> Result<()> {
    let prod = u.adjoint() * u;
    let dev = (prod - Matrix2::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !(dev <= UNITARY_TOLERANCE) {
        return Err(invalid(format!("matrix is not unitary (‖u†u − 1‖ = {dev:e})")));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Amplitudes on `|r, p+q−r⟩` (index `r`) produced from `|p, q⟩` by `u`.
fn two_mode_expansion(u: &Matrix2<Complex64>, p: usize, q: usize) -> Vec<Complex64> {
    // (u00 x + u10 y)^p (u01 x + u11 y)^q, coefficient of x^r y^(N-r)
    let first: Vec<Complex64> = (0..=p)
        .map(|k| u[(0, 0)].powu(k as u32) * u[(1, 0)].powu((p - k) as u32) * binomial(p, k))
        .collect();
    let second: Vec<Complex64> = (0..=q)
        .map(|l| u[(0, 1)].powu(l as u32) * u[(1, 1)].powu((q - l) as u32) * binomial(q, l))
        .collect();
    let total = p + q;
    let mut poly = vec![Complex64::default(); total + 1];
    for (k, a) in first.iter().enumerate() {
        for (l, b) in second.iter().enumerate() {
            poly[k + l] += a * b;
        }
    }
    let norm_in = (factorial(p) * factorial(q)).sqrt();
    poly.iter()
        .enumerate()
        .map(|(r, c)| c * (factorial(r) * factorial(total - r)).sqrt() / norm_in)
        .collect()
}
