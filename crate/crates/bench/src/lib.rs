//! Shared fixtures for the criterion benches.

use fockwise::experiments::{hom_scan, linspace};
use fockwise::{Complex64, DipPoint, FockState, ScanConfig, WavepacketTemplate};

/// The 40-point, ±3 coherence-time scan used throughout the benches.
pub fn standard_scan(eta: f64, seed: u64) -> ScanConfig {
    let template = WavepacketTemplate::new(804.0, 2.0);
    let span = 3.0 * template.coherence_time_s().expect("valid template");
    let mut cfg = ScanConfig::new(linspace(-span, span, 40), eta, template);
    cfg.rng_seed = seed;
    cfg
}

/// Poisson-sampled dip ready for fitting.
pub fn sampled_dip(seed: u64) -> Vec<DipPoint> {
    hom_scan(&standard_scan(0.5128, seed)).expect("valid scan").dip_points()
}

/// `photons` photons spread over two spatial and `n_internal` internal modes,
/// in an equal superposition of every arrangement.
pub fn dense_state(photons: u8, n_internal: usize) -> FockState {
    let modes = 2 * n_internal;
    let mut kets = Vec::new();
    let mut stack = vec![(Vec::new(), photons)];
    while let Some((prefix, left)) = stack.pop() {
        if prefix.len() + 1 == modes {
            let mut k: Vec<u8> = prefix;
            k.push(left);
            kets.push(k);
            continue;
        }
        for n in 0..=left {
            let mut p = prefix.clone();
            p.push(n);
            stack.push((p, left - n));
        }
    }
    let terms = kets.into_iter().map(|k| (k, Complex64::new(1.0, 0.0)));
    FockState::from_terms(2, n_internal, terms)
        .and_then(|s| s.normalize())
        .expect("valid state")
}
