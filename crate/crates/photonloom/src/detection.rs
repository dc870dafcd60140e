//! Detector-click semantics, outcome enumeration, projective post-selection,
//! and sequential-click equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::fock::{HybridState, ModeId};

/// How a physical detector reports photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorSemantics {
    /// A click means exactly one photon; multi-photon hits are rejected
    /// events routed to the discarded bucket.
    NumberResolvingExactlyOne,
    /// A click means one or more photons.
    ThresholdAtLeastOne,
}

/// A demanded detector outcome over the full detector set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClickPattern {
    pub fired: BTreeSet<ModeId>,
    pub silent: BTreeSet<ModeId>,
}

impl ClickPattern {
    /// Builds a pattern from the fired set; every other detector is silent.
    pub fn new<I>(fired: I, all_detectors: &BTreeSet<ModeId>) -> Self
    where
        I: IntoIterator<Item = ModeId>,
    {
        let fired: BTreeSet<ModeId> = fired.into_iter().collect();
        let silent = all_detectors.difference(&fired).copied().collect();
        ClickPattern { fired, silent }
    }

    pub fn detector_count(&self) -> usize {
        self.fired.len() + self.silent.len()
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fired.is_empty() {
            return write!(f, "(none)");
        }
        let parts: Vec<String> = self.fired.iter().map(|m| m.to_string()).collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// One realized detector outcome with its conditional state.
#[derive(Debug, Clone)]
pub struct OutcomeRecord {
    pub pattern: ClickPattern,
    /// Exact per-detector photon counts; `None` when threshold semantics
    /// merged distinguishable count vectors into one click set.
    pub counts: Option<BTreeMap<ModeId, u32>>,
    pub probability: f64,
    /// The projected, still subnormalized branch including any photons on
    /// undetected modes.
    pub branch: HybridState,
    /// Unit-norm conditional atomic state, when the branch factorizes into
    /// a single photonic occupation times an atomic superposition.
    pub conditional_atoms: Option<HybridState>,
}

/// Result of a full outcome enumeration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub records: Vec<OutcomeRecord>,
    /// Multi-photon-per-detector groups rejected under exactly-one
    /// semantics, with their probabilities.
    pub discarded: Vec<(BTreeMap<ModeId, u32>, f64)>,
    pub discarded_probability: f64,
}

impl Enumeration {
    /// Total probability over records plus the discarded bucket.
    pub fn total_probability(&self) -> f64 {
        self.records.iter().map(|r| r.probability).sum::<f64>() + self.discarded_probability
    }
}

/// Groups the state's terms by their exact per-detector count vector.
/// This is the semantics-free physical outcome distribution; both detector
/// models and the Monte Carlo sampler are built on it.
pub fn enumerate_counts(
    s: &HybridState,
    detectors: &BTreeSet<ModeId>,
) -> Vec<(BTreeMap<ModeId, u32>, f64, HybridState)> {
    let mut groups: BTreeMap<BTreeMap<ModeId, u32>, HybridState> = BTreeMap::new();
    for (term, amp) in s.iter() {
        let mut counts = BTreeMap::new();
        for (&mode, &n) in term.occupation.iter() {
            if detectors.contains(&mode) {
                counts.insert(mode, n);
            }
        }
        groups
            .entry(counts)
            .or_insert_with(|| HybridState::zero(s.atom_count()))
            .add_amplitude(term.clone(), *amp);
    }
    groups
        .into_iter()
        .map(|(counts, branch)| {
            let p = branch.norm_sqr();
            (counts, p, branch)
        })
        .collect()
}

fn conditional_of(branch: &HybridState) -> Option<HybridState> {
    let reduced = branch.reduced_atomic_state().ok()?;
    reduced.normalize().ok().map(|(unit, _)| unit)
}

/// Enumerates every realized outcome of measuring `detectors` on `s`.
pub fn enumerate_outcomes(
    s: &HybridState,
    detectors: &BTreeSet<ModeId>,
    sem: DetectorSemantics,
) -> Enumeration {
    let count_groups = enumerate_counts(s, detectors);
    match sem {
        DetectorSemantics::NumberResolvingExactlyOne => {
            let mut records = Vec::new();
            let mut discarded = Vec::new();
            let mut discarded_probability = 0.0;
            for (counts, p, branch) in count_groups {
                if counts.values().any(|&n| n >= 2) {
                    discarded_probability += p;
                    discarded.push((counts, p));
                } else {
                    let pattern = ClickPattern::new(counts.keys().copied(), detectors);
                    let conditional_atoms = conditional_of(&branch);
                    records.push(OutcomeRecord {
                        pattern,
                        counts: Some(counts),
                        probability: p,
                        branch,
                        conditional_atoms,
                    });
                }
            }
            Enumeration {
                records,
                discarded,
                discarded_probability,
            }
        }
        DetectorSemantics::ThresholdAtLeastOne => {
            // Merge count vectors that produce the same click set.
            let mut merged: BTreeMap<BTreeSet<ModeId>, (f64, HybridState, bool)> = BTreeMap::new();
            for (counts, p, branch) in count_groups {
                let fired: BTreeSet<ModeId> = counts.keys().copied().collect();
                let multi = counts.values().any(|&n| n >= 2);
                match merged.get_mut(&fired) {
                    Some((p0, b0, seen_multi)) => {
                        *p0 += p;
                        *b0 = b0.superpose(&branch).expect("same atom count");
                        *seen_multi |= multi;
                    }
                    None => {
                        merged.insert(fired, (p, branch, multi));
                    }
                }
            }
            let records = merged
                .into_iter()
                .map(|(fired, (p, branch, multi))| {
                    let pattern = ClickPattern::new(fired, detectors);
                    let conditional_atoms = if multi { None } else { conditional_of(&branch) };
                    OutcomeRecord {
                        pattern,
                        counts: None,
                        probability: p,
                        branch,
                        conditional_atoms,
                    }
                })
                .collect();
            Enumeration {
                records,
                discarded: Vec::new(),
                discarded_probability: 0.0,
            }
        }
    }
}

fn click_matches(sem: DetectorSemantics, n: u32) -> bool {
    match sem {
        DetectorSemantics::NumberResolvingExactlyOne => n == 1,
        DetectorSemantics::ThresholdAtLeastOne => n >= 1,
    }
}

/// Projects onto one click pattern. Returns the pattern probability and the
/// unit-norm conditional atomic state. A zero-probability pattern yields
/// probability 0 and an empty placeholder state rather than an error, so
/// sweep loops stay total.
pub fn post_select(
    s: &HybridState,
    pattern: &ClickPattern,
    sem: DetectorSemantics,
) -> (f64, HybridState) {
    let branch = s.filter_terms(|term| {
        pattern
            .fired
            .iter()
            .all(|&m| click_matches(sem, term.count_at(m)))
            && pattern.silent.iter().all(|&m| term.count_at(m) == 0)
    });
    let p = branch.norm_sqr();
    if p < crate::fock::NORM_EPSILON {
        return (0.0, HybridState::zero(s.atom_count()));
    }
    let conditional = conditional_of(&branch).unwrap_or_else(|| HybridState::zero(s.atom_count()));
    (p, conditional)
}

/// Applies single-detector click projections one at a time, renormalizing
/// between steps, then demands silence on the remaining detectors. The
/// cumulative probability and conditional state match [`post_select`] of
/// the simultaneous pattern for every ordering, because the projections
/// are diagonal in the Fock basis and therefore commute.
pub fn sequential_project(
    s: &HybridState,
    ordered_clicks: &[ModeId],
    sem: DetectorSemantics,
    all_detectors: &BTreeSet<ModeId>,
) -> (f64, HybridState) {
    let mut current = s.clone();
    let mut cumulative = 1.0;
    for &click in ordered_clicks {
        let branch = current.filter_terms(|term| click_matches(sem, term.count_at(click)));
        match branch.normalize() {
            Ok((unit, p)) => {
                cumulative *= p;
                current = unit;
            }
            Err(_) => return (0.0, HybridState::zero(s.atom_count())),
        }
    }
    let fired: BTreeSet<ModeId> = ordered_clicks.iter().copied().collect();
    let branch = current.filter_terms(|term| {
        all_detectors
            .iter()
            .filter(|m| !fired.contains(m))
            .all(|&m| term.count_at(m) == 0)
    });
    match branch.normalize() {
        Ok((unit, p)) => {
            cumulative *= p;
            let conditional =
                conditional_of(&unit).unwrap_or_else(|| HybridState::zero(s.atom_count()));
            (cumulative, conditional)
        }
        Err(_) => (0.0, HybridState::zero(s.atom_count())),
    }
}
