//! Photon wavepackets and partial distinguishability.
//!
//! Each photon carries a Gaussian spectral amplitude
//! `φ(ω) ∝ exp(−(ω−ω₀)²/(4σ²)) · exp(iωτ)`, so `|φ|²` has standard deviation
//! σ and the photon arrives with delay τ. Overlaps between photons define a
//! Gram matrix; a Gram-Schmidt (Cholesky) factor of it expands every photon
//! over an orthonormal set of internal modes, which is how distinguishability
//! enters the Fock-space simulation.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{FockState, ModeIndex, DEFAULT_PHOTON_CAP};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Photons whose overlap differs from 1 by less than this are treated as
/// identical.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Gram-Schmidt residuals below `-NON_PSD_TOLERANCE` mean the Gram matrix is
/// not positive semidefinite.
const NON_PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavepacket {
    pub center_wavelength_nm: f64,
    /// Angular-frequency standard deviation of `|φ(ω)|²`, rad/s.
    pub bandwidth_sigma: f64,
    /// Relative arrival time, s.
    pub delay_s: f64,
}

impl Wavepacket {
    pub fn new(center_wavelength_nm: f64, bandwidth_sigma: f64, delay_s: f64) -> Result<Self> {
        if !(center_wavelength_nm > 0.0) || !center_wavelength_nm.is_finite() {
            return Err(invalid(format!(
                "center wavelength must be positive, got {center_wavelength_nm}"
            )));
        }
        if !(bandwidth_sigma > 0.0) || !bandwidth_sigma.is_finite() {
            return Err(invalid(format!(
                "bandwidth sigma must be positive, got {bandwidth_sigma}"
            )));
        }
        if !delay_s.is_finite() {
            return Err(invalid("delay must be finite"));
        }
        Ok(Self {
            center_wavelength_nm,
            bandwidth_sigma,
            delay_s,
        })
    }

    pub fn delayed(self, delay_s: f64) -> Self {
        Self { delay_s, ..self }
    }

    /// Center angular frequency, rad/s.
    pub fn center_angular_frequency(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / (self.center_wavelength_nm * 1e-9)
    }
}

/// `⟨w1|w2⟩` for two Gaussian wavepackets.
///
/// For equal bandwidths this is `e^{iω̄Δτ} e^{−σ²Δτ²/2}` (times a
/// center-frequency mismatch factor), with `Δτ = τ₂ − τ₁`.
pub fn overlap(w1: &Wavepacket, w2: &Wavepacket) -> Complex64 {
    let (s1, s2) = (w1.bandwidth_sigma.powi(2), w2.bandwidth_sigma.powi(2));
    let (o1, o2) = (w1.center_angular_frequency(), w2.center_angular_frequency());
    let dt = w2.delay_s - w1.delay_s;
    let sum = s1 + s2;
    let prefactor = (2.0 * w1.bandwidth_sigma * w2.bandwidth_sigma / sum).sqrt();
    let magnitude = prefactor * (-(o1 - o2).powi(2) / (4.0 * sum) - dt * dt * s1 * s2 / sum).exp();
    let phase = dt * (o1 * s2 + o2 * s1) / sum;
    Complex64::from_polar(magnitude, phase)
}

/// Converts a filter FWHM in wavelength to the angular-frequency σ of a
/// Gaussian spectrum with that width.
pub fn bandwidth_from_filter(center_wavelength_nm: f64, fwhm_nm: f64) -> Result<f64> {
    if !(center_wavelength_nm > 0.0) || !(fwhm_nm > 0.0) {
        return Err(invalid(format!(
            "wavelength and FWHM must be positive, got {center_wavelength_nm} nm and {fwhm_nm} nm"
        )));
    }
    let lambda = center_wavelength_nm * 1e-9;
    let fwhm_omega = 2.0 * PI * SPEED_OF_LIGHT * (fwhm_nm * 1e-9) / (lambda * lambda);
    Ok(fwhm_omega / (2.0 * (2.0 * LN_2).sqrt()))
}

/// `G[k][j] = ⟨w_j|w_k⟩`, so that `C·C† = G` for the decomposition below.
pub fn gram_matrix(wavepackets: &[Wavepacket]) -> DMatrix<Complex64> {
    let n = wavepackets.len();
    DMatrix::from_fn(n, n, |k, j| overlap(&wavepackets[j], &wavepackets[k]))
}

/// Expansion of each wavepacket over an orthonormal internal basis built by
/// Gram-Schmidt in list order. Row `k` is wavepacket `k`; the matrix is
/// square and lower triangular.
pub fn orthonormal_decomposition(wavepackets: &[Wavepacket]) -> Result<DMatrix<Complex64>> {
    decompose_gram(&gram_matrix(wavepackets))
}

/// Lower-triangular `C` with `C·C† = gram`. Rows that are linearly dependent
/// on earlier rows get a zero diagonal entry instead of a new basis vector.
pub fn decompose_gram(gram: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = gram.nrows();
    if n == 0 || gram.ncols() != n {
        return Err(invalid("Gram matrix must be square and nonempty"));
    }
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        for j in 0..k {
            let diag = c[(j, j)].re;
            if diag == 0.0 {
                continue;
            }
            let mut acc = gram[(k, j)];
            for l in 0..j {
                acc -= c[(k, l)] * c[(j, l)].conj();
            }
            c[(k, j)] = acc / diag;
        }
        let used: f64 = (0..k).map(|l| c[(k, l)].norm_sqr()).sum();
        let residual = gram[(k, k)].re - used;
        if residual < -NON_PSD_TOLERANCE {
            return Err(Error::NumericalDegeneracy(format!(
                "Gram matrix is not positive semidefinite (row {k} residual {residual:e})"
            )));
        }
        // |1 − x| < tol  ⇔  1 − |x|² ≲ 2·tol
        c[(k, k)] = if residual <= 2.0 * DEGENERACY_TOLERANCE {
            Complex64::default()
        } else {
            Complex64::new(residual.sqrt(), 0.0)
        };
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonInput {
    pub spatial_mode: usize,
    pub wavepacket: Wavepacket,
    pub multiplicity: usize,
}

impl PhotonInput {
    pub fn new(spatial_mode: usize, wavepacket: Wavepacket, multiplicity: usize) -> Self {
        Self {
            spatial_mode,
            wavepacket,
            multiplicity,
        }
    }

    pub fn single(spatial_mode: usize, wavepacket: Wavepacket) -> Self {
        Self::new(spatial_mode, wavepacket, 1)
    }
}

/// Normalized multi-photon input state. Photons sharing one `PhotonInput`
/// occupy the same wavepacket.
pub fn build_input_state(inputs: &[PhotonInput], n_spatial: usize) -> Result<FockState> {
    if inputs.is_empty() {
        return Err(invalid("no photons to inject"));
    }
    if let Some(bad) = inputs.iter().find(|p| p.multiplicity == 0) {
        return Err(invalid(format!(
            "photon in mode {} has zero multiplicity",
            bad.spatial_mode
        )));
    }
    let total: usize = inputs.iter().map(|p| p.multiplicity).sum();
    if total > DEFAULT_PHOTON_CAP {
        return Err(Error::Capacity {
            requested: total,
            cap: DEFAULT_PHOTON_CAP,
        });
    }
    let wavepackets: Vec<Wavepacket> = inputs.iter().map(|p| p.wavepacket).collect();
    let spatial: Vec<(usize, usize)> = inputs.iter().map(|p| (p.spatial_mode, p.multiplicity)).collect();
    state_from_gram(&spatial, &gram_matrix(&wavepackets), n_spatial)
}

/// Like [`build_input_state`] but with photon overlaps given directly as a
/// Gram matrix (one row per photon, `G[k][j] = ⟨j|k⟩`). Useful when some
/// degrees of freedom are not described by a [`Wavepacket`].
pub fn build_state_from_gram(
    spatial_modes: &[usize],
    gram: &DMatrix<Complex64>,
    n_spatial: usize,
) -> Result<FockState> {
    let spatial: Vec<(usize, usize)> = spatial_modes.iter().map(|&s| (s, 1)).collect();
    state_from_gram(&spatial, gram, n_spatial)
}

fn state_from_gram(photons: &[(usize, usize)], gram: &DMatrix<Complex64>, n_spatial: usize) -> Result<FockState> {
    if gram.nrows() != photons.len() {
        return Err(invalid(format!(
            "Gram matrix is {}×{} for {} photons",
            gram.nrows(),
            gram.ncols(),
            photons.len()
        )));
    }
    if let Some(&(s, _)) = photons.iter().find(|&&(s, _)| s >= n_spatial) {
        return Err(invalid(format!("photon in spatial mode {s} outside width {n_spatial}")));
    }
    let c = decompose_gram(gram)?;
    // Drop internal modes no photon occupies.
    let columns: Vec<usize> = (0..c.ncols())
        .filter(|&m| (0..c.nrows()).any(|k| c[(k, m)].norm() > 0.0))
        .collect();
    let n_internal = columns.len().max(1);
    let mut state = FockState::vacuum(n_spatial, n_internal)?;
    for (k, &(spatial, multiplicity)) in photons.iter().enumerate() {
        let creation: Vec<(ModeIndex, Complex64)> = columns
            .iter()
            .enumerate()
            .map(|(m, &col)| (ModeIndex::new(spatial, m), c[(k, col)]))
            .filter(|(_, z)| z.norm() > 0.0)
            .collect();
        for _ in 0..multiplicity {
            state = state.apply_creation_combination(&creation)?;
        }
    }
    state.normalize()
}
