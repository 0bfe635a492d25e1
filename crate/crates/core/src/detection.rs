//! Number-resolving detection that sees spatial modes but not internal ones.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::FockState;

/// Photon counts registered per spatial mode, e.g. `(2, 1)` for two photons
/// in C and one in D.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionPattern(Vec<usize>);

impl DetectionPattern {
    pub fn new(counts: Vec<usize>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl fmt::Display for DetectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// Probability of registering `pattern`, summed over internal modes.
pub fn pattern_probability(state: &FockState, pattern: &DetectionPattern) -> Result<f64> {
    if pattern.counts().len() != state.n_spatial() {
        return Err(invalid(format!(
            "pattern {pattern} has {} modes, state has {}",
            pattern.counts().len(),
            state.n_spatial()
        )));
    }
    if pattern.total() != state.photon_number() {
        return Err(invalid(format!(
            "pattern {pattern} holds {} photons, state holds {}",
            pattern.total(),
            state.photon_number()
        )));
    }
    let p = state
        .terms()
        .filter(|(occ, _)| state.spatial_counts(occ) == pattern.counts())
        .map(|(_, amp)| amp.norm_sqr())
        .fold(0.0, |acc, x| acc + x); // an empty f64 sum is -0.0
    Ok(p)
}

/// Every pattern with the state's photon number, including those of zero
/// probability.
pub fn all_pattern_probabilities(state: &FockState) -> BTreeMap<DetectionPattern, f64> {
    let mut out: BTreeMap<DetectionPattern, f64> = enumerate_patterns(state.photon_number(), state.n_spatial())
        .into_iter()
        .map(|p| (p, 0.0))
        .collect();
    for (occ, amp) in state.terms() {
        let key = DetectionPattern::new(state.spatial_counts(occ));
        *out.entry(key).or_insert(0.0) += amp.norm_sqr();
    }
    out
}

/// All ways to place `photons` photons into `modes` spatial modes.
pub fn enumerate_patterns(photons: usize, modes: usize) -> Vec<DetectionPattern> {
    fn recurse(left: usize, modes_left: usize, prefix: &mut Vec<usize>, out: &mut Vec<DetectionPattern>) {
        if modes_left == 1 {
            prefix.push(left);
            out.push(DetectionPattern::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for n in (0..=left).rev() {
            prefix.push(n);
            recurse(left - n, modes_left - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if modes > 0 {
        recurse(photons, modes, &mut Vec::new(), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::coupler_unitary;
    use crate::fock::ModeIndex;
    use approx::assert_abs_diff_eq;

    fn p(v: &[usize]) -> DetectionPattern {
        DetectionPattern::new(v.to_vec())
    }

    fn through_coupler(counts: &[u8], n_internal: usize, eta: f64) -> FockState {
        FockState::from_terms(
            2,
            n_internal,
            [(counts.to_vec(), num_complex::Complex64::new(1.0, 0.0))],
        )
        .unwrap()
        .apply_two_mode_unitary(&coupler_unitary(eta).unwrap(), 0, 1)
        .unwrap()
    }

    #[test]
    fn noon_output_patterns() {
        let out = through_coupler(&[1, 1], 1, 0.5);
        assert_abs_diff_eq!(pattern_probability(&out, &p(&[1, 1])).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pattern_probability(&out, &p(&[2, 0])).unwrap(), 0.5, epsilon = 1e-15);
        let all = all_pattern_probabilities(&out);
        assert_eq!(all.len(), 3);
        assert_abs_diff_eq!(all[&p(&[0, 2])], 0.5, epsilon = 1e-15);
        assert_eq!(all[&p(&[1, 1])], 0.0);
    }

    #[test]
    fn three_photon_output_patterns() {
        let out = through_coupler(&[2, 1], 1, 2.0 / 3.0);
        let all = all_pattern_probabilities(&out);
        assert_abs_diff_eq!(all[&p(&[3, 0])], 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(all[&p(&[1, 2])], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(all[&p(&[0, 3])], 2.0 / 9.0, epsilon = 1e-15);
        assert_eq!(all[&p(&[2, 1])], 0.0);
    }

    #[test]
    fn distinguishable_pair_coincides_half_the_time() {
        // photons on orthogonal internal modes: (A,0) and (B,1)
        let out = through_coupler(&[1, 0, 0, 1], 2, 0.5);
        assert_abs_diff_eq!(pattern_probability(&out, &p(&[1, 1])).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn sums_to_one() {
        let s = FockState::vacuum(3, 2)
            .unwrap()
            .apply_creation(ModeIndex::new(0, 1))
            .unwrap()
            .apply_creation(ModeIndex::new(2, 0))
            .unwrap()
            .apply_creation(ModeIndex::new(1, 1))
            .unwrap()
            .apply_two_mode_unitary(&coupler_unitary(0.3).unwrap(), 0, 2)
            .unwrap();
        let total: f64 = all_pattern_probabilities(&s).values().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_pattern_rejected() {
        let out = through_coupler(&[1, 1], 1, 0.5);
        assert!(pattern_probability(&out, &p(&[1, 0])).is_err());
        assert!(pattern_probability(&out, &p(&[1, 1, 0])).is_err());
    }

    #[test]
    fn pattern_enumeration() {
        assert_eq!(
            enumerate_patterns(3, 2),
            vec![p(&[3, 0]), p(&[2, 1]), p(&[1, 2]), p(&[0, 3])]
        );
        assert_eq!(enumerate_patterns(2, 3).len(), 6);
        assert_eq!(enumerate_patterns(0, 2), vec![p(&[0, 0])]);
    }
}
