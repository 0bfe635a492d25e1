//! Exact few-photon linear-optics simulation.
//!
//! The crate models photons as bosonic excitations on a grid of spatial
//! modes (waveguides) and internal modes (orthonormal temporal/spectral
//! labels that detectors do not resolve). On top of that it provides
//! directional couplers and Mach-Zehnder circuits, Gaussian wavepacket
//! distinguishability, number-resolving detection, delay-scan experiments
//! with Poissonian counting, and the curve fits used to extract dip
//! visibilities.
//!
//! ```
//! use fockwise::{circuit, detection::{pattern_probability, DetectionPattern}, FockState, ModeIndex};
//!
//! let input = FockState::vacuum(2, 1)?
//!     .apply_creation(ModeIndex::new(0, 0))?
//!     .apply_creation(ModeIndex::new(1, 0))?;
//! let out = input.apply_two_mode_unitary(&circuit::coupler_unitary(0.5)?, 0, 1)?;
//! let coincidences = pattern_probability(&out, &DetectionPattern::new(vec![1, 1]))?;
//! assert!(coincidences < 1e-15);
//! # Ok::<(), fockwise::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuit;
pub mod detection;
pub mod distinguishability;
pub mod error;
pub mod experiments;
pub mod fock;

pub use analysis::{
    fit_dip, fit_mode_mismatch, relative_visibility, v_ideal, DipFitResult, DipPoint, ModeMismatchFit, VisibilityPoint,
};
pub use circuit::{Circuit, CircuitElement};
pub use detection::DetectionPattern;
pub use distinguishability::{PhotonInput, Wavepacket};
pub use error::{Error, Result};
pub use experiments::{ScanConfig, ScanPoint, ScanResult, WavepacketTemplate};
pub use fock::{FockState, ModeIndex, OccupationVector};

pub use num_complex::Complex64;
