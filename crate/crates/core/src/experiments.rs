//! Simulated delay scans, visibility sweeps and Mach-Zehnder measurements.
//!
//! Scans evaluate detection probabilities point by point (in parallel) and
//! then draw Poissonian counts from a seeded stream in delay-list order, so
//! results depend only on the configuration.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{poisson_sigma, DipPoint};
use crate::circuit::{apply_circuit, coupler_unitary, mz_circuit};
use crate::detection::{pattern_probability, DetectionPattern};
use crate::distinguishability::{bandwidth_from_filter, build_state_from_gram, overlap, Wavepacket};
use crate::error::{invalid, Result};
use crate::fock::{FockState, ModeIndex};

/// Pair rate giving about 2000 coincidences per point far from the dip of a
/// balanced coupler with the default integration time.
pub const DEFAULT_RATE_PAIRS_PER_S: f64 = 400.0;
pub const DEFAULT_INTEGRATION_TIME_S: f64 = 10.0;

/// Points in the dense scan used by [`hom_visibility`].
const DENSE_SCAN_POINTS: usize = 401;

/// Source spectrum shared by every photon of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketTemplate {
    pub center_wavelength_nm: f64,
    pub filter_fwhm_nm: f64,
}

impl WavepacketTemplate {
    pub fn new(center_wavelength_nm: f64, filter_fwhm_nm: f64) -> Self {
        Self {
            center_wavelength_nm,
            filter_fwhm_nm,
        }
    }

    pub fn sigma(&self) -> Result<f64> {
        bandwidth_from_filter(self.center_wavelength_nm, self.filter_fwhm_nm)
    }

    pub fn wavepacket(&self, delay_s: f64) -> Result<Wavepacket> {
        Wavepacket::new(self.center_wavelength_nm, self.sigma()?, delay_s)
    }

    /// `1/σ`: the delay at which `|overlap|²` has dropped to `e⁻¹`.
    pub fn coherence_time_s(&self) -> Result<f64> {
        Ok(1.0 / self.sigma()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub delays_s: Vec<f64>,
    pub eta: f64,
    pub template: WavepacketTemplate,
    pub rate_pairs_per_s: f64,
    pub integration_time_s: f64,
    pub rng_seed: u64,
    /// Amplitude overlap between the two photons injected together into A
    /// (three-photon scans only).
    pub intra_pair_overlap: f64,
    /// Amplitude overlap of the non-temporal degrees of freedom (polarization,
    /// spatial mode) between the photon in B and those in A.
    pub mode_overlap: f64,
    /// Linear drift of the count rate, fractional change per second of delay.
    pub drift_per_s: f64,
    /// Overall detection success fraction (heralding, probabilistic splitting).
    pub success_fraction: f64,
}

impl ScanConfig {
    pub fn new(delays_s: Vec<f64>, eta: f64, template: WavepacketTemplate) -> Self {
        Self {
            delays_s,
            eta,
            template,
            rate_pairs_per_s: DEFAULT_RATE_PAIRS_PER_S,
            integration_time_s: DEFAULT_INTEGRATION_TIME_S,
            rng_seed: 0,
            intra_pair_overlap: 1.0,
            mode_overlap: 1.0,
            drift_per_s: 0.0,
            success_fraction: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays_s.is_empty() {
            return Err(invalid("scan needs at least one delay"));
        }
        if self.delays_s.iter().any(|d| !d.is_finite()) {
            return Err(invalid("delays must be finite"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        self.template.sigma()?;
        for (name, v) in [
            ("rate_pairs_per_s", self.rate_pairs_per_s),
            ("integration_time_s", self.integration_time_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        for (name, v) in [
            ("intra_pair_overlap", self.intra_pair_overlap),
            ("mode_overlap", self.mode_overlap),
            ("success_fraction", self.success_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !self.drift_per_s.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        Ok(())
    }

    fn expected_counts(&self, probability: f64, delay_s: f64) -> f64 {
        let drift = (1.0 + self.drift_per_s * delay_s).max(0.0);
        probability * self.rate_pairs_per_s * self.integration_time_s * self.success_fraction * drift
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delay_s: f64,
    pub expected_probability: f64,
    pub expected_counts: f64,
    pub sampled_counts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub config: ScanConfig,
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    /// Sampled counts with Poisson error bars, ready for [`crate::fit_dip`].
    pub fn dip_points(&self) -> Vec<DipPoint> {
        self.points
            .iter()
            .map(|p| {
                let counts = p.sampled_counts as f64;
                DipPoint::new(p.delay_s, counts, poisson_sigma(counts))
            })
            .collect()
    }
}

/// Evenly spaced delays from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Temporal overlap between a photon at delay 0 and one at `delay_s`,
/// scaled by the mode overlap.
fn scaled_overlap(template: &WavepacketTemplate, delay_s: f64, mode_overlap: f64) -> Result<Complex64> {
    let x = overlap(&template.wavepacket(0.0)?, &template.wavepacket(delay_s)?);
    Ok(x * mode_overlap)
}

fn hom_probability_for_overlap(eta: f64, x: Complex64) -> Result<f64> {
    let gram = DMatrix::from_row_slice(2, 2, &[one(), x.conj(), x, one()]);
    let state = build_state_from_gram(&[0, 1], &gram, 2)?;
    let out = state.apply_two_mode_unitary(&coupler_unitary(eta)?, 0, 1)?;
    pattern_probability(&out, &DetectionPattern::new(vec![1, 1]))
}

/// Photons A₁, A₂ in waveguide A and B in waveguide B. A₂ overlaps A₁ with
/// amplitude `r`; its remainder is orthogonal to both other photons, so
/// `⟨A₁|B⟩ = x` and `⟨A₂|B⟩ = r·x`.
fn three_photon_probability_for_overlap(eta: f64, x: Complex64, r: f64) -> Result<f64> {
    let r = Complex64::new(r, 0.0);
    // G[k][j] = ⟨j|k⟩
    let gram = DMatrix::from_row_slice(3, 3, &[one(), r, x.conj(), r, one(), r * x.conj(), x, r * x, one()]);
    let state = build_state_from_gram(&[0, 0, 1], &gram, 2)?;
    let out = state.apply_two_mode_unitary(&coupler_unitary(eta)?, 0, 1)?;
    pattern_probability(&out, &DetectionPattern::new(vec![2, 1]))
}

/// Coincidence probability, pattern (1,1), for `|11⟩_AB` with the photon in
/// B delayed by `delay_s`.
pub fn hom_coincidence_probability(
    eta: f64,
    template: &WavepacketTemplate,
    delay_s: f64,
    mode_overlap: f64,
) -> Result<f64> {
    hom_probability_for_overlap(eta, scaled_overlap(template, delay_s, mode_overlap)?)
}

/// Probability of two photons in C and one in D for `|21⟩_AB` with the
/// photon in B delayed by `delay_s`.
pub fn three_photon_probability(
    eta: f64,
    template: &WavepacketTemplate,
    delay_s: f64,
    intra_pair_overlap: f64,
    mode_overlap: f64,
) -> Result<f64> {
    three_photon_probability_for_overlap(
        eta,
        scaled_overlap(template, delay_s, mode_overlap)?,
        intra_pair_overlap,
    )
}

/// Large-delay limit of the coincidence probability (photons fully
/// distinguishable).
pub fn hom_asymptote(eta: f64) -> Result<f64> {
    hom_probability_for_overlap(eta, Complex64::default())
}

pub fn three_photon_asymptote(eta: f64, intra_pair_overlap: f64) -> Result<f64> {
    three_photon_probability_for_overlap(eta, Complex64::default(), intra_pair_overlap)
}

fn run_scan<F>(config: &ScanConfig, probability: F) -> Result<ScanResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    config.validate()?;
    let probabilities: Vec<f64> = config
        .delays_s
        .par_iter()
        .map(|&tau| probability(tau))
        .collect::<Result<_>>()?;
    let expected: Vec<f64> = config
        .delays_s
        .iter()
        .zip(&probabilities)
        .map(|(&tau, &p)| config.expected_counts(p, tau))
        .collect();
    let sampled = sample_counts(&expected, config.rng_seed)?;
    let points = config
        .delays_s
        .iter()
        .zip(probabilities)
        .zip(expected)
        .zip(sampled)
        .map(
            |(((&delay_s, expected_probability), expected_counts), sampled_counts)| ScanPoint {
                delay_s,
                expected_probability,
                expected_counts,
                sampled_counts,
            },
        )
        .collect();
    Ok(ScanResult {
        config: config.clone(),
        points,
    })
}

/// Two-photon delay scan: coincidences between C and D versus delay.
pub fn hom_scan(config: &ScanConfig) -> Result<ScanResult> {
    run_scan(config, |tau| {
        hom_coincidence_probability(config.eta, &config.template, tau, config.mode_overlap)
    })
}

/// Three-photon delay scan: pattern (2,1) versus delay of the photon in B.
pub fn three_photon_scan(config: &ScanConfig) -> Result<ScanResult> {
    run_scan(config, |tau| {
        three_photon_probability(
            config.eta,
            &config.template,
            tau,
            config.intra_pair_overlap,
            config.mode_overlap,
        )
    })
}

/// `(max − min)/max` of a dense noiseless HOM scan, with `max` the
/// large-delay asymptote.
pub fn hom_visibility(eta: f64, template: &WavepacketTemplate, mode_overlap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mode_overlap) {
        return Err(invalid(format!("mode overlap must lie in [0, 1], got {mode_overlap}")));
    }
    let span = 4.0 * template.coherence_time_s()?;
    let min = linspace(-span, span, DENSE_SCAN_POINTS)
        .into_par_iter()
        .map(|tau| hom_coincidence_probability(eta, template, tau, mode_overlap))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let max = hom_asymptote(eta)?;
    Ok(if max > 0.0 { (max - min) / max } else { 0.0 })
}

/// Visibility of the three-photon dip, `(P(∞) − P(0))/P(∞)`. The (2,1)
/// probability is linear in `|overlap|²`, so its extremes sit at zero and
/// infinite delay.
pub fn three_photon_visibility(eta: f64, intra_pair_overlap: f64, mode_overlap: f64) -> Result<f64> {
    let max = three_photon_asymptote(eta, intra_pair_overlap)?;
    let min = three_photon_probability_for_overlap(eta, Complex64::new(mode_overlap, 0.0), intra_pair_overlap)?;
    Ok(if max > 0.0 { (max - min) / max } else { 0.0 })
}

/// Intra-pair overlap at which the three-photon dip reaches
/// `target_relative` times the visibility of a perfectly degenerate pair.
pub fn solve_intra_pair_overlap(eta: f64, target_relative: f64) -> Result<f64> {
    let ideal = three_photon_visibility(eta, 1.0, 1.0)?;
    if ideal <= 0.0 {
        return Err(invalid(format!("no three-photon dip at eta = {eta}")));
    }
    let relative = |r: f64| three_photon_visibility(eta, r, 1.0).map(|v| v / ideal);
    let (mut lo, mut hi) = (0.0, 1.0);
    let (f_lo, f_hi) = (relative(lo)?, relative(hi)?);
    if !(f_lo.min(f_hi)..=f_lo.max(f_hi)).contains(&target_relative) {
        return Err(invalid(format!(
            "relative visibility {target_relative} unreachable (range {f_lo:.4}..{f_hi:.4})"
        )));
    }
    let increasing = f_hi >= f_lo;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (relative(mid)? < target_relative) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mode overlap that scales the ideal HOM visibility at `eta` down to
/// `target_visibility`.
pub fn mode_overlap_for_visibility(eta: f64, target_visibility: f64) -> Result<f64> {
    let ideal = crate::analysis::v_ideal(eta)?;
    if ideal <= 0.0 || !(0.0..=ideal).contains(&target_visibility) {
        return Err(invalid(format!(
            "visibility {target_visibility} unreachable at eta = {eta} (ideal {ideal})"
        )));
    }
    Ok((target_visibility / ideal).sqrt())
}

/// `(η, V)` for each coupler reflectivity, photons otherwise ideal.
pub fn visibility_sweep(etas: &[f64], template: &WavepacketTemplate) -> Result<Vec<(f64, f64)>> {
    etas.iter()
        .map(|&eta| Ok((eta, hom_visibility(eta, template, 1.0)?)))
        .collect()
}

/// Independent Poisson draws, one per expected value, in order.
pub fn sample_counts(expected_counts: &[f64], rng_seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    expected_counts
        .iter()
        .map(|&mean| {
            if !(mean >= 0.0) || !mean.is_finite() {
                return Err(invalid(format!("expected counts must be nonnegative, got {mean}")));
            }
            if mean == 0.0 {
                return Ok(0);
            }
            let dist = Poisson::new(mean).map_err(|e| invalid(format!("Poisson mean {mean}: {e}")))?;
            Ok(dist.sample(&mut rng) as u64)
        })
        .collect()
}

/// Single photon into waveguide 0 of a Mach-Zehnder interferometer; returns
/// the probability it leaves from waveguide 0.
pub fn mz_experiment(eta1: f64, eta2: f64, phi: f64) -> Result<f64> {
    let photon = FockState::vacuum(2, 1)?.apply_creation(ModeIndex::new(0, 0))?;
    let out = apply_circuit(&photon, &mz_circuit(eta1, eta2, phi)?)?;
    pattern_probability(&out, &DetectionPattern::new(vec![1, 0]))
}
