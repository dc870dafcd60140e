//! Monte Carlo model of preparation, collection, detection, dark-count and
//! coincidence-window imperfections, estimating yield and heralded fidelity.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::detection::{enumerate_counts, ClickPattern, DetectorSemantics};
use crate::emission::{emit, EmissionConfig};
use crate::fock::{AtomLevel, HybridState, ModeId};
use crate::protocols::{
    build_final_state_with, classify_fired, subset_fidelity, Herald, ProtocolError,
    ProtocolParams, Variant,
};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise probability `{0}` must lie in [0, 1], got {1}")]
    BadProbability(&'static str, f64),
    #[error("dark_rate must be finite and non-negative, got {0}")]
    BadDarkRate(f64),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Per-trial imperfection parameters. The defaults are the ideal case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Probability the atom is correctly prepared in the excited state.
    pub p_excitation: f64,
    /// Probability an emitted photon is captured into the guided mode.
    pub p_collect: f64,
    /// Detector efficiency.
    pub p_detect: f64,
    /// Expected dark counts per detector per coincidence window.
    pub dark_rate: f64,
    /// Probability a photon arrives inside the coincidence window.
    pub p_window: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            p_excitation: 1.0,
            p_collect: 1.0,
            p_detect: 1.0,
            dark_rate: 0.0,
            p_window: 1.0,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, v) in [
            ("p_excitation", self.p_excitation),
            ("p_collect", self.p_collect),
            ("p_detect", self.p_detect),
            ("p_window", self.p_window),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(NoiseError::BadProbability(name, v));
            }
        }
        if !self.dark_rate.is_finite() || self.dark_rate < 0.0 {
            return Err(NoiseError::BadDarkRate(self.dark_rate));
        }
        Ok(())
    }

    /// Probability a photon survives collection, detection and windowing.
    pub fn p_survive(&self) -> f64 {
        self.p_collect * self.p_detect * self.p_window
    }
}

/// What happened to one atom in a trial, before optical interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum AtomFate {
    /// Correctly excited and its photon survived to the detectors.
    Emitting,
    /// No usable photon; the atom sits in a ground level (failed excitation,
    /// or its photon was lost and the atom collapsed with it).
    Ground(AtomLevel),
}

/// Result of one Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub heralded: bool,
    /// Observed click pattern (including dark counts), when any detector fired.
    pub pattern: Option<ClickPattern>,
    /// Fidelity of the prepared atoms against the claimed target. For
    /// genuine heralds this is exact; for false heralds it measures the
    /// damage the spurious herald would cause.
    pub fidelity: Option<f64>,
    /// Heralded by the observed clicks although the true photon record does
    /// not support the same herald.
    pub false_herald: bool,
}

/// Aggregate estimate over many trials.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub trials: u64,
    pub heralds: u64,
    pub yield_rate: f64,
    /// Mean fidelity over genuine heralds; NaN when none occurred.
    pub mean_fidelity: f64,
    /// 1.96 standard errors of the mean fidelity.
    pub fidelity_ci95: f64,
    pub false_herald_rate: f64,
}

struct DistEntry {
    counts: BTreeMap<ModeId, u32>,
    probability: f64,
    /// True herald classification of this outcome and its exact fidelity.
    herald: Option<(Herald, f64)>,
    branch: HybridState,
}

/// Precomputed trial machinery: one exact outcome distribution per atom-fate
/// vector, so sampling a trial is a table lookup.
pub struct NoiseModel {
    protocol: ProtocolParams,
    noise: NoiseParams,
    detectors: BTreeSet<ModeId>,
    detector_list: Vec<ModeId>,
    atom_count: usize,
    distributions: HashMap<Vec<AtomFate>, Vec<DistEntry>>,
}

impl NoiseModel {
    pub fn new(p: &ProtocolParams, n: &NoiseParams) -> Result<Self, NoiseError> {
        n.validate()?;
        // Keep the vacuum term so each fate-conditional distribution is
        // complete (probabilities sum to the state norm of 1).
        let mut protocol = *p;
        protocol.keep_vacuum_term = true;
        let atom_count = protocol.variant.atom_count();
        let detectors = crate::protocols::variant_detectors(&protocol.variant);
        let detector_list: Vec<ModeId> = detectors.iter().copied().collect();

        let fates = [
            AtomFate::Emitting,
            AtomFate::Ground(AtomLevel::GroundL),
            AtomFate::Ground(AtomLevel::GroundR),
        ];
        let mut distributions = HashMap::new();
        let mut stack = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == atom_count {
                let dist = Self::distribution_for(&protocol, &detectors, &prefix)?;
                distributions.insert(prefix, dist);
                continue;
            }
            for f in fates {
                let mut next = prefix.clone();
                next.push(f);
                stack.push(next);
            }
        }
        Ok(NoiseModel {
            protocol,
            noise: *n,
            detectors,
            detector_list,
            atom_count,
            distributions,
        })
    }

    fn distribution_for(
        p: &ProtocolParams,
        detectors: &BTreeSet<ModeId>,
        fates: &[AtomFate],
    ) -> Result<Vec<DistEntry>, NoiseError> {
        let source = |cfg: &EmissionConfig| match fates[cfg.atom_index] {
            AtomFate::Emitting => emit(cfg),
            AtomFate::Ground(level) => HybridState::new_product_state(&[level]).map_err(Into::into),
        };
        let built = build_final_state_with(p, &source)?;
        let entries = enumerate_counts(built.final_state(), detectors)
            .into_iter()
            .map(|(counts, probability, branch)| {
                let herald = Self::true_herald(p, &counts, &branch);
                DistEntry {
                    counts,
                    probability,
                    herald,
                    branch,
                }
            })
            .collect();
        Ok(entries)
    }

    fn true_herald(
        p: &ProtocolParams,
        counts: &BTreeMap<ModeId, u32>,
        branch: &HybridState,
    ) -> Option<(Herald, f64)> {
        let herald = classify_counts(&p.variant, p.semantics, counts)?;
        let fidelity = subset_fidelity(branch, &herald.target.state(), &herald.atom_subset);
        Some((herald, fidelity))
    }

    /// Samples one trial with counter-based randomness: the result depends
    /// only on (params, seed, trial_index), never on execution order.
    pub fn sample(&self, trial_index: u64) -> TrialRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise.seed);
        rng.set_stream(trial_index.wrapping_add(1));

        // Atom fates: failed excitation leaves the atom in a random ground
        // level; a lost photon collapses the atom coupling-weighted.
        let coupling = self.protocol.coupling;
        let p_l = coupling.lambda_l.powi(2) / (coupling.omega().powi(2));
        let mut fates = Vec::with_capacity(self.atom_count);
        for _ in 0..self.atom_count {
            let excited = rng.gen_bool(self.noise.p_excitation);
            if !excited {
                let level = if rng.gen_bool(0.5) {
                    AtomLevel::GroundL
                } else {
                    AtomLevel::GroundR
                };
                fates.push(AtomFate::Ground(level));
                continue;
            }
            let survives = rng.gen_bool(self.noise.p_survive());
            if survives {
                fates.push(AtomFate::Emitting);
            } else {
                let level = if rng.gen_bool(p_l) {
                    AtomLevel::GroundL
                } else {
                    AtomLevel::GroundR
                };
                fates.push(AtomFate::Ground(level));
            }
        }

        // Sample the exact outcome for this fate vector.
        let dist = &self.distributions[&fates];
        let total: f64 = dist.iter().map(|e| e.probability).sum();
        let mut u: f64 = rng.gen_range(0.0..1.0) * total;
        let mut chosen = dist.last().expect("distribution non-empty");
        for entry in dist {
            if u < entry.probability {
                chosen = entry;
                break;
            }
            u -= entry.probability;
        }

        // Inject dark counts on top of the true photon counts.
        let mut observed = chosen.counts.clone();
        if self.noise.dark_rate > 0.0 {
            let poisson = Poisson::new(self.noise.dark_rate).expect("validated dark rate");
            for &mode in &self.detector_list {
                let darks = poisson.sample(&mut rng) as u32;
                if darks > 0 {
                    *observed.entry(mode).or_insert(0) += darks;
                }
            }
        }

        let observed_herald = classify_counts(&self.protocol.variant, self.protocol.semantics, &observed);
        let fired: BTreeSet<ModeId> = observed
            .iter()
            .filter(|(_, &n)| n >= 1)
            .map(|(&m, _)| m)
            .collect();
        let pattern = if fired.is_empty() {
            None
        } else {
            Some(ClickPattern::new(fired, &self.detectors))
        };

        match observed_herald {
            None => TrialRecord {
                heralded: false,
                pattern,
                fidelity: None,
                false_herald: false,
            },
            Some(claimed) => {
                let genuine = chosen
                    .herald
                    .as_ref()
                    .map(|(h, _)| *h == claimed)
                    .unwrap_or(false);
                let fidelity = if genuine {
                    chosen.herald.as_ref().map(|(_, f)| *f)
                } else {
                    Some(subset_fidelity(
                        &chosen.branch,
                        &claimed.target.state(),
                        &claimed.atom_subset,
                    ))
                };
                TrialRecord {
                    heralded: true,
                    pattern,
                    fidelity,
                    false_herald: !genuine,
                }
            }
        }
    }
}

/// Classifies exact detector counts under the given semantics. Under
/// exactly-one semantics any multi-photon hit voids the event; under
/// threshold semantics only the click set matters.
pub fn classify_counts(
    variant: &Variant,
    sem: DetectorSemantics,
    counts: &BTreeMap<ModeId, u32>,
) -> Option<Herald> {
    if sem == DetectorSemantics::NumberResolvingExactlyOne && counts.values().any(|&n| n >= 2) {
        return None;
    }
    let fired: BTreeSet<ModeId> = counts
        .iter()
        .filter(|(_, &n)| n >= 1)
        .map(|(&m, _)| m)
        .collect();
    classify_fired(variant, &fired)
}

/// Runs a single trial. Prefer building a [`NoiseModel`] once when sampling
/// many trials; this convenience wrapper rebuilds it per call.
pub fn sample_trial(
    p: &ProtocolParams,
    n: &NoiseParams,
    trial_index: u64,
) -> Result<TrialRecord, NoiseError> {
    Ok(NoiseModel::new(p, n)?.sample(trial_index))
}

/// Estimates yield and heralded fidelity over `trials` trials. Trials run
/// in parallel but are aggregated in index order, so results are
/// bit-identical for a fixed (params, seed, trials) triple.
pub fn estimate(
    p: &ProtocolParams,
    n: &NoiseParams,
    trials: u64,
) -> Result<(Estimate, Vec<TrialRecord>), NoiseError> {
    if trials == 0 {
        return Err(NoiseError::NoTrials);
    }
    let model = NoiseModel::new(p, n)?;
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|i| model.sample(i))
        .collect();

    let mut heralds = 0u64;
    let mut false_heralds = 0u64;
    let mut fid_sum = 0.0;
    let mut fid_sq_sum = 0.0;
    let mut genuine = 0u64;
    for r in &records {
        if r.heralded {
            heralds += 1;
            if r.false_herald {
                false_heralds += 1;
            } else if let Some(f) = r.fidelity {
                genuine += 1;
                fid_sum += f;
                fid_sq_sum += f * f;
            }
        }
    }
    let mean_fidelity = if genuine > 0 {
        fid_sum / genuine as f64
    } else {
        f64::NAN
    };
    let fidelity_ci95 = if genuine > 1 {
        let m = mean_fidelity;
        let var = (fid_sq_sum / genuine as f64 - m * m).max(0.0);
        1.96 * (var / genuine as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok((
        Estimate {
            trials,
            heralds,
            yield_rate: heralds as f64 / trials as f64,
            mean_fidelity,
            fidelity_ci95,
            false_herald_rate: false_heralds as f64 / trials as f64,
        },
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_params(variant: Variant) -> ProtocolParams {
        ProtocolParams::ideal(variant)
    }

    #[test]
    fn noiseless_ghz_matches_exact_probability() {
        let (est, _) = estimate(&ideal_params(Variant::Ghz), &NoiseParams::default(), 20_000)
            .unwrap();
        // Binomial sigma at p = 0.25, n = 20000 is about 0.0031.
        assert!((est.yield_rate - 0.25).abs() < 4.0 * 0.0031);
        assert!((est.mean_fidelity - 1.0).abs() < 1e-12);
        assert_eq!(est.false_herald_rate, 0.0);
    }

    #[test]
    fn zero_detection_never_heralds() {
        let noise = NoiseParams {
            p_detect: 0.0,
            ..NoiseParams::default()
        };
        let (est, _) = estimate(&ideal_params(Variant::Ghz), &noise, 500).unwrap();
        assert_eq!(est.heralds, 0);
    }

    #[test]
    fn excitation_loss_reduces_yield_keeps_fidelity() {
        let noise = NoiseParams {
            p_excitation: 0.9,
            ..NoiseParams::default()
        };
        let (est, records) = estimate(&ideal_params(Variant::Ghz), &noise, 5_000).unwrap();
        // Expected yield 0.9^3 * 0.25, sigma ~ 0.0055 at n = 5000.
        assert!((est.yield_rate - 0.729 * 0.25).abs() < 4.0 * 0.0055);
        for r in records.iter().filter(|r| r.heralded) {
            assert!(!r.false_herald);
            assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_loss_scales_w_direct_yield() {
        let noise = NoiseParams {
            p_window: 0.8,
            ..NoiseParams::default()
        };
        let (est, _) = estimate(&ideal_params(Variant::WDirect), &noise, 20_000).unwrap();
        // Survival 0.8 per photon; heralds need all three.
        let expect = 0.8f64.powi(3) * 0.25;
        let sigma = (expect * (1.0 - expect) / 20_000f64).sqrt();
        assert!((est.yield_rate - expect).abs() < 4.0 * sigma);
        assert!((est.mean_fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dark_counts_create_false_heralds_only() {
        let noise = NoiseParams {
            p_collect: 0.7,
            dark_rate: 0.02,
            ..NoiseParams::default()
        };
        let (est, records) = estimate(&ideal_params(Variant::WDirect), &noise, 30_000).unwrap();
        assert!(est.false_herald_rate > 0.0);
        // Genuine heralds keep fidelity 1 even with darks present.
        for r in records.iter().filter(|r| r.heralded && !r.false_herald) {
            assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((est.mean_fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_determinism() {
        let p = ideal_params(Variant::WDirect);
        let noise = NoiseParams {
            p_collect: 0.85,
            dark_rate: 0.01,
            seed: 42,
            ..NoiseParams::default()
        };
        let (a, _) = estimate(&p, &noise, 2_000).unwrap();
        let (b, _) = estimate(&p, &noise, 2_000).unwrap();
        assert_eq!(a.yield_rate.to_bits(), b.yield_rate.to_bits());
        assert_eq!(a.mean_fidelity.to_bits(), b.mean_fidelity.to_bits());
        assert_eq!(a.false_herald_rate.to_bits(), b.false_herald_rate.to_bits());
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = NoiseParams {
            p_detect: 1.5,
            ..NoiseParams::default()
        };
        assert!(matches!(
            estimate(&ideal_params(Variant::Ghz), &bad, 10),
            Err(NoiseError::BadProbability("p_detect", _))
        ));
    }
}
