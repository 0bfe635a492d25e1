//! Couplers, phase shifters and the Mach-Zehnder interferometer.
//!
//! A directional coupler of reflectivity η acts on its two waveguides as
//! `[[√η, √(1−η)], [√(1−η), −√η]]`; η is the probability that a photon stays
//! in its own waveguide.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::FockState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CircuitElement {
    Coupler { modes: (usize, usize), eta: f64 },
    PhaseShift { mode: usize, phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_spatial: usize,
    elements: Vec<CircuitElement>,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("reflectivity must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// The 2×2 coupler matrix for reflectivity `eta`.
pub fn coupler_unitary(eta: f64) -> Result<Matrix2<Complex64>> {
    check_eta(eta)?;
    let r = Complex64::new(eta.sqrt(), 0.0);
    let t = Complex64::new((1.0 - eta).sqrt(), 0.0);
    Ok(Matrix2::new(r, t, t, -r))
}

impl Circuit {
    pub fn new(n_spatial: usize) -> Result<Self> {
        if n_spatial == 0 {
            return Err(invalid("circuit needs at least one spatial mode"));
        }
        Ok(Self {
            n_spatial,
            elements: Vec::new(),
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn elements(&self) -> &[CircuitElement] {
        &self.elements
    }

    pub fn push(&mut self, element: CircuitElement) -> Result<()> {
        match element {
            CircuitElement::Coupler { modes: (i, j), eta } => {
                check_eta(eta)?;
                if i == j {
                    return Err(invalid("coupler needs two distinct modes"));
                }
                if i >= self.n_spatial || j >= self.n_spatial {
                    return Err(invalid(format!(
                        "coupler modes ({i}, {j}) outside circuit width {}",
                        self.n_spatial
                    )));
                }
            }
            CircuitElement::PhaseShift { mode, phi } => {
                if mode >= self.n_spatial {
                    return Err(invalid(format!(
                        "phase shifter mode {mode} outside circuit width {}",
                        self.n_spatial
                    )));
                }
                if !phi.is_finite() {
                    return Err(invalid("phase must be finite"));
                }
            }
        }
        self.elements.push(element);
        Ok(())
    }

    pub fn coupler(mut self, i: usize, j: usize, eta: f64) -> Result<Self> {
        self.push(CircuitElement::Coupler { modes: (i, j), eta })?;
        Ok(self)
    }

    pub fn phase_shift(mut self, mode: usize, phi: f64) -> Result<Self> {
        self.push(CircuitElement::PhaseShift { mode, phi })?;
        Ok(self)
    }

    /// Single-photon transfer matrix: column `k` holds the output amplitudes
    /// of a photon entering spatial mode `k`.
    pub fn transfer_matrix(&self) -> Result<DMatrix<Complex64>> {
        let mut total = DMatrix::<Complex64>::identity(self.n_spatial, self.n_spatial);
        for element in &self.elements {
            let mut step = DMatrix::<Complex64>::identity(self.n_spatial, self.n_spatial);
            match *element {
                CircuitElement::Coupler { modes: (i, j), eta } => {
                    let u = coupler_unitary(eta)?;
                    step[(i, i)] = u[(0, 0)];
                    step[(i, j)] = u[(0, 1)];
                    step[(j, i)] = u[(1, 0)];
                    step[(j, j)] = u[(1, 1)];
                }
                CircuitElement::PhaseShift { mode, phi } => {
                    step[(mode, mode)] = Complex64::from_polar(1.0, phi);
                }
            }
            total = step * total;
        }
        Ok(total)
    }
}

/// Applies the circuit elements to `state` in list order.
pub fn apply_circuit(state: &FockState, circuit: &Circuit) -> Result<FockState> {
    if state.n_spatial() != circuit.n_spatial {
        return Err(invalid(format!(
            "state has {} spatial modes, circuit has {}",
            state.n_spatial(),
            circuit.n_spatial
        )));
    }
    let mut current = state.clone();
    for element in &circuit.elements {
        current = match *element {
            CircuitElement::Coupler { modes: (i, j), eta } => {
                current.apply_two_mode_unitary(&coupler_unitary(eta)?, i, j)?
            }
            CircuitElement::PhaseShift { mode, phi } => current.apply_phase(mode, phi)?,
        };
    }
    Ok(current)
}

/// Two couplers with a phase `phi` on arm 1 between them.
pub fn mz_circuit(eta1: f64, eta2: f64, phi: f64) -> Result<Circuit> {
    Circuit::new(2)?
        .coupler(0, 1, eta1)?
        .phase_shift(1, phi)?
        .coupler(0, 1, eta2)
}

/// Bar-port probability of a single photon through [`mz_circuit`].
pub fn mz_effective_reflectivity(eta1: f64, eta2: f64, phi: f64) -> Result<f64> {
    check_eta(eta1)?;
    check_eta(eta2)?;
    let bar =
        Complex64::new((eta1 * eta2).sqrt(), 0.0) + Complex64::from_polar(((1.0 - eta1) * (1.0 - eta2)).sqrt(), phi);
    Ok(bar.norm_sqr())
}

/// Arm phase in `[0, π]` that gives effective reflectivity `eta_mz` for a
/// balanced interferometer, i.e. the root of `cos²(φ/2) = η_MZ`.
pub fn balanced_mz_phase(eta_mz: f64) -> Result<f64> {
    check_eta(eta_mz)?;
    Ok(2.0 * eta_mz.sqrt().acos())
}

/// Optical path difference (nm) equivalent to phase `phi` at `wavelength_nm`.
pub fn phase_to_path_difference_nm(phi: f64, wavelength_nm: f64) -> f64 {
    phi / (2.0 * PI) * wavelength_nm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeIndex;
    use approx::assert_abs_diff_eq;

    fn single_photon(mode: usize) -> FockState {
        FockState::vacuum(2, 1)
            .unwrap()
            .apply_creation(ModeIndex::new(mode, 0))
            .unwrap()
    }

    fn bar_probability(state: &FockState) -> f64 {
        state.amplitude(&[1, 0]).norm_sqr()
    }

    #[test]
    fn coupler_matrix_entries() {
        let u = coupler_unitary(1.0).unwrap();
        assert_eq!(u[(0, 0)].re, 1.0);
        assert_eq!(u[(1, 1)].re, -1.0);
        assert_eq!(u[(0, 1)].norm(), 0.0);
        let u = coupler_unitary(0.5).unwrap();
        for z in u.iter() {
            assert_abs_diff_eq!(z.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        }
        let u = coupler_unitary(0.5128).unwrap();
        assert_abs_diff_eq!(u[(0, 0)].norm_sqr(), 0.5128, epsilon = 1e-15);
        assert!(coupler_unitary(1.01).is_err());
        assert!(coupler_unitary(-0.1).is_err());
        assert!(coupler_unitary(f64::NAN).is_err());
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = single_photon(1);
        assert_eq!(apply_circuit(&s, &Circuit::new(2).unwrap()).unwrap(), s);
    }

    #[test]
    fn width_mismatch_rejected() {
        let s = single_photon(0);
        assert!(apply_circuit(&s, &Circuit::new(3).unwrap()).is_err());
    }

    #[test]
    fn element_validation() {
        let c = Circuit::new(2).unwrap();
        assert!(c.clone().coupler(0, 2, 0.5).is_err());
        assert!(c.clone().coupler(1, 1, 0.5).is_err());
        assert!(c.clone().coupler(0, 1, 2.0).is_err());
        assert!(c.clone().phase_shift(2, 0.1).is_err());
        assert!(c.phase_shift(1, f64::INFINITY).is_err());
    }

    #[test]
    fn pi_phase_on_occupied_mode() {
        let c = Circuit::new(2).unwrap().phase_shift(0, PI).unwrap();
        let out = apply_circuit(&single_photon(0), &c).unwrap();
        assert_abs_diff_eq!(out.amplitude(&[1, 0]).re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn balanced_mz_null_phase_stays_in_bar() {
        let out = apply_circuit(&single_photon(0), &mz_circuit(0.5, 0.5, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(bar_probability(&out), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mz_effective_reflectivity(0.5, 0.5, 0.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn balanced_mz_pi_phase_switches_port() {
        // H·diag(1,−1)·H = [[0,1],[1,0]]
        let out = apply_circuit(&single_photon(0), &mz_circuit(0.5, 0.5, PI).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amplitude(&[0, 1]).norm_sqr(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mz_effective_reflectivity(0.5, 0.5, PI).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn full_reflectivity_never_switches() {
        for phi in [0.0, 0.7, 2.0, PI] {
            let out = apply_circuit(&single_photon(0), &mz_circuit(1.0, 1.0, phi).unwrap()).unwrap();
            assert_abs_diff_eq!(bar_probability(&out), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn balanced_mz_is_cos_squared() {
        for k in 0..=20 {
            let phi = k as f64 * 0.3;
            assert_abs_diff_eq!(
                mz_effective_reflectivity(0.5, 0.5, phi).unwrap(),
                (phi / 2.0).cos().powi(2),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn phase_for_measured_reflectivity() {
        let phi = balanced_mz_phase(0.960).unwrap();
        assert_abs_diff_eq!(phi, 0.4027, epsilon = 5e-5);
        assert_abs_diff_eq!(
            mz_effective_reflectivity(0.5, 0.5, phi).unwrap(),
            0.960,
            epsilon = 1e-14
        );
        let path = phase_to_path_difference_nm(phi, 804.0);
        assert!(path > 50.0 && path < 53.0, "{path}");
    }

    #[test]
    fn transfer_matrix_matches_fock_path() {
        let c = Circuit::new(3)
            .unwrap()
            .coupler(0, 1, 0.3)
            .unwrap()
            .phase_shift(1, 0.8)
            .unwrap()
            .coupler(1, 2, 0.6)
            .unwrap();
        let t = c.transfer_matrix().unwrap();
        let photon = FockState::vacuum(3, 1)
            .unwrap()
            .apply_creation(ModeIndex::new(0, 0))
            .unwrap();
        let out = apply_circuit(&photon, &c).unwrap();
        for row in 0..3 {
            let mut counts = [0u8; 3];
            counts[row] = 1;
            assert_abs_diff_eq!((out.amplitude(&counts) - t[(row, 0)]).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn phase_on_empty_mode_is_noop() {
        let s = single_photon(0);
        let c = Circuit::new(2).unwrap().phase_shift(1, 1.1).unwrap();
        assert_eq!(apply_circuit(&s, &c).unwrap(), s);
    }
}
