//! End-to-end drivers wiring emission, optical elements, and detection into
//! the three heralding setups, plus robustness parameter sweeps.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::detection::{
    enumerate_outcomes, ClickPattern, DetectorSemantics, Enumeration, OutcomeRecord,
};
use crate::elements::{
    bs, bs_single, fs_pbs, lift_apply, pbs, pbs_split, BsPhase, ElementError, ModeTransform,
    BS1_PHASE,
};
use crate::emission::{emit, EmissionConfig, EmissionError};
use crate::fock::{
    AtomLevel, BasisTerm, CouplingParams, FockError, HybridState, ModeId, Polarization, Port,
    StagePort, DEFAULT_N_MAX,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Emission(#[from] EmissionError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("bs transmittance must lie in (0, 1) for protocol runs, got {0}")]
    BadTransmittance(f64),
}

/// Which heralding setup to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Ghz,
    WDirect,
    WBunching { f2: bool, f1_aux: bool },
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Ghz => "ghz".to_string(),
            Variant::WDirect => "w-direct".to_string(),
            Variant::WBunching { f2, f1_aux } => {
                let mut s = "w-bunching".to_string();
                if *f2 {
                    s.push_str("+f2");
                }
                if *f1_aux {
                    s.push_str("+f1-aux");
                }
                s
            }
        }
    }

    pub fn atom_count(&self) -> usize {
        match self {
            Variant::WBunching { f1_aux: true, .. } => 4,
            _ => 3,
        }
    }
}

/// A heralded target state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    GhzPlus,
    GhzMinus,
    W,
    WTilde,
}

impl Target {
    pub fn label(&self) -> &'static str {
        match self {
            Target::GhzPlus => "GHZ+",
            Target::GhzMinus => "GHZ-",
            Target::W => "W",
            Target::WTilde => "W~",
        }
    }

    /// The three-atom target state.
    pub fn state(&self) -> HybridState {
        use AtomLevel::{GroundL as L, GroundR as R};
        let terms: Vec<[AtomLevel; 3]> = match self {
            Target::GhzPlus | Target::GhzMinus => vec![[L, L, L], [R, R, R]],
            Target::W => vec![[L, L, R], [L, R, L], [R, L, L]],
            Target::WTilde => vec![[R, R, L], [R, L, R], [L, R, R]],
        };
        let n = terms.len() as f64;
        let mut amp = vec![Complex64::new(1.0 / n.sqrt(), 0.0); terms.len()];
        if *self == Target::GhzMinus {
            amp[1] = -amp[1];
        }
        HybridState::from_terms(
            3,
            terms
                .into_iter()
                .zip(amp)
                .map(|(t, a)| (BasisTerm::atomic(t.to_vec()), a)),
        )
    }
}

/// Run parameters shared by all variants.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolParams {
    pub coupling: CouplingParams,
    pub semantics: DetectorSemantics,
    pub keep_vacuum_term: bool,
    pub bs_transmittance: f64,
    pub variant: Variant,
}

impl ProtocolParams {
    pub fn ideal(variant: Variant) -> Self {
        ProtocolParams {
            coupling: CouplingParams::symmetric(),
            semantics: DetectorSemantics::NumberResolvingExactlyOne,
            keep_vacuum_term: false,
            bs_transmittance: 0.5,
            variant,
        }
    }
}

/// One recorded pipeline step, kept for independent dense verification.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub label: String,
    pub transform: Option<ModeTransform>,
    pub state_before: HybridState,
    pub state_after: HybridState,
}

/// A classified detector outcome.
#[derive(Debug, Clone)]
pub struct LabeledOutcome {
    pub pattern: ClickPattern,
    pub counts: Option<BTreeMap<ModeId, u32>>,
    pub probability: f64,
    pub heralded: bool,
    pub target: Option<Target>,
    pub fidelity: Option<f64>,
    /// Unit-norm conditional atomic state, when defined.
    pub conditional: Option<HybridState>,
}

/// Full result of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub variant: Variant,
    pub outcomes: Vec<LabeledOutcome>,
    pub total_success_probability: f64,
    pub per_target_yield: BTreeMap<Target, f64>,
    pub discarded_probability: f64,
    /// Probability of realized outcomes that are neither heralds nor
    /// discarded multi-photon hits (missing clicks, stray patterns).
    pub unheralded_probability: f64,
    pub notes: Vec<String>,
    pub final_state: HybridState,
    pub detectors: BTreeSet<ModeId>,
    pub trace: Vec<TraceStep>,
}

impl ProtocolReport {
    /// Heralded + discarded + unheralded; equals the input squared norm.
    pub fn ledger_total(&self) -> f64 {
        self.total_success_probability + self.discarded_probability + self.unheralded_probability
    }
}

fn stage_port(sp: StagePort, copy: u8) -> Port {
    Port::Stage(sp, copy)
}

fn stage_detector_modes(copy: u8) -> [ModeId; 4] {
    use Polarization::{H, V};
    [
        ModeId::new(stage_port(StagePort::Da, copy), V),
        ModeId::new(stage_port(StagePort::Db, copy), V),
        ModeId::new(stage_port(StagePort::Dc, copy), H),
        ModeId::new(stage_port(StagePort::Dd, copy), H),
    ]
}

fn ghz_detector_modes() -> [ModeId; 6] {
    use Polarization::{F, S};
    let a = stage_port(StagePort::Da, 0);
    let b = stage_port(StagePort::Db, 0);
    let c = stage_port(StagePort::Dc, 0);
    [
        ModeId::new(a, F),
        ModeId::new(a, S),
        ModeId::new(b, F),
        ModeId::new(b, S),
        ModeId::new(c, F),
        ModeId::new(c, S),
    ]
}

/// Detection-stage copies active for a variant, with the atoms whose W state
/// each stage heralds.
fn active_stages(variant: &Variant) -> Vec<(u8, Vec<usize>)> {
    match variant {
        Variant::Ghz => vec![(0, vec![0, 1, 2])],
        Variant::WDirect => vec![(0, vec![0, 1, 2])],
        Variant::WBunching { f2, f1_aux } => {
            let mut stages = vec![(0u8, vec![0, 1, 2])];
            if *f2 {
                stages.push((1, vec![0, 1, 2]));
            }
            if *f1_aux {
                stages.push((2, vec![0, 1, 3]));
                if *f2 {
                    stages.push((3, vec![0, 1, 3]));
                }
            }
            stages
        }
    }
}

/// The detector mode set read out by a variant.
pub fn variant_detectors(variant: &Variant) -> BTreeSet<ModeId> {
    match variant {
        Variant::Ghz => ghz_detector_modes().into_iter().collect(),
        _ => active_stages(variant)
            .iter()
            .flat_map(|(copy, _)| stage_detector_modes(*copy))
            .collect(),
    }
}

/// A recognized herald: the stage that fired, the target it prepares, and
/// the atoms it prepares it on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Herald {
    pub stage: u8,
    pub target: Target,
    pub atom_subset: Vec<usize>,
}

/// Classifies a set of fired detectors. Works purely on the click set, so
/// the Monte Carlo layer can reuse it on observed (dark-count-contaminated)
/// outcomes.
pub fn classify_fired(variant: &Variant, fired: &BTreeSet<ModeId>) -> Option<Herald> {
    match variant {
        Variant::Ghz => {
            if fired.len() != 3 {
                return None;
            }
            let ports = [
                stage_port(StagePort::Da, 0),
                stage_port(StagePort::Db, 0),
                stage_port(StagePort::Dc, 0),
            ];
            let mut f_count = 0;
            for port in ports {
                let hits: Vec<&ModeId> = fired.iter().filter(|m| m.port == port).collect();
                if hits.len() != 1 {
                    return None;
                }
                if hits[0].pol == Polarization::F {
                    f_count += 1;
                }
            }
            let target = if f_count % 2 == 1 {
                Target::GhzPlus
            } else {
                Target::GhzMinus
            };
            Some(Herald {
                stage: 0,
                target,
                atom_subset: vec![0, 1, 2],
            })
        }
        Variant::WDirect => {
            if fired.len() != 3 {
                return None;
            }
            classify_w_stage(fired, 0).map(|target| Herald {
                stage: 0,
                target,
                atom_subset: vec![0, 1, 2],
            })
        }
        Variant::WBunching { .. } => {
            for (copy, atoms) in active_stages(variant) {
                let stage_set: BTreeSet<ModeId> = stage_detector_modes(copy).into_iter().collect();
                let stage_fired: BTreeSet<ModeId> =
                    fired.intersection(&stage_set).copied().collect();
                if stage_fired.len() == 3 {
                    if let Some(target) = classify_w_stage(&stage_fired, copy) {
                        return Some(Herald {
                            stage: copy,
                            target,
                            atom_subset: atoms,
                        });
                    }
                }
            }
            None
        }
    }
}

fn classify_w_stage(fired: &BTreeSet<ModeId>, copy: u8) -> Option<Target> {
    let [da, db, dc, dd] = stage_detector_modes(copy);
    if !fired.iter().all(|m| [da, db, dc, dd].contains(m)) {
        return None;
    }
    if fired.contains(&da) && fired.contains(&db) {
        Some(Target::W)
    } else if fired.contains(&dc) && fired.contains(&dd) {
        Some(Target::WTilde)
    } else {
        None
    }
}

/// Fidelity of the atoms listed in `subset` against `target`, with every
/// other degree of freedom (remaining atoms, stray photons) traced out:
/// the squared overlaps are summed over the configurations of the
/// complement.
pub fn subset_fidelity(branch: &HybridState, target: &HybridState, subset: &[usize]) -> f64 {
    let norm = branch.norm_sqr();
    if norm < crate::fock::NORM_EPSILON {
        return 0.0;
    }
    let mut overlaps: BTreeMap<(Vec<AtomLevel>, BTreeMap<ModeId, u32>), Complex64> =
        BTreeMap::new();
    for (term, amp) in branch.iter() {
        let sub_atoms: Vec<AtomLevel> = subset.iter().map(|&i| term.atoms[i]).collect();
        let target_amp = target.amplitude(&BasisTerm::atomic(sub_atoms));
        if target_amp.norm() == 0.0 {
            continue;
        }
        let rest_atoms: Vec<AtomLevel> = term
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| !subset.contains(i))
            .map(|(_, &l)| l)
            .collect();
        let key = (rest_atoms, term.occupation.clone());
        *overlaps.entry(key).or_default() += target_amp.conj() * amp;
    }
    overlaps.values().map(|o| o.norm_sqr()).sum::<f64>() / norm
}

struct Pipeline {
    state: HybridState,
    trace: Vec<TraceStep>,
}

impl Pipeline {
    fn new(initial: HybridState, label: &str) -> Self {
        let trace = vec![TraceStep {
            label: label.to_string(),
            transform: None,
            state_before: initial.clone(),
            state_after: initial.clone(),
        }];
        Pipeline {
            state: initial,
            trace,
        }
    }

    fn apply(&mut self, label: &str, t: ModeTransform) -> Result<(), ProtocolError> {
        let before = self.state.clone();
        self.state = lift_apply(&self.state, &t, DEFAULT_N_MAX)?;
        self.trace.push(TraceStep {
            label: label.to_string(),
            transform: Some(t),
            state_before: before,
            state_after: self.state.clone(),
        });
        Ok(())
    }

    fn record(&mut self, label: &str, state: HybridState) {
        self.trace.push(TraceStep {
            label: label.to_string(),
            transform: None,
            state_before: self.state.clone(),
            state_after: state.clone(),
        });
        self.state = state;
    }
}

fn check_transmittance(t: f64) -> Result<(), ProtocolError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(ProtocolError::BadTransmittance(t));
    }
    Ok(())
}

/// Appends one copy of the detection stage (polarization splitter plus the
/// paired beam splitters) reading from `source`.
fn apply_detection_stage(
    pipe: &mut Pipeline,
    source: Port,
    copy: u8,
    transmittance: f64,
) -> Result<(), ProtocolError> {
    use Polarization::{H, V};
    let in_v = stage_port(StagePort::InV, copy);
    let in_h = stage_port(StagePort::InH, copy);
    pipe.apply(
        &format!("stage{copy}: PBS split {source}"),
        pbs_split(source, in_v, in_h)?,
    )?;
    pipe.apply(
        &format!("stage{copy}: BS1"),
        bs_single(
            in_v,
            stage_port(StagePort::Da, copy),
            stage_port(StagePort::Db, copy),
            transmittance,
            BS1_PHASE,
            &[V, H],
        )?,
    )?;
    pipe.apply(
        &format!("stage{copy}: BS2"),
        bs_single(
            in_h,
            stage_port(StagePort::Dc, copy),
            stage_port(StagePort::Dd, copy),
            transmittance,
            BsPhase::ConjugateI,
            &[V, H],
        )?,
    )?;
    Ok(())
}

/// A pluggable per-atom emission source. The default protocol path uses
/// [`emit`]; the noise layer substitutes sampled atom fates.
pub type EmissionSource<'a> =
    &'a (dyn Fn(&EmissionConfig) -> Result<HybridState, EmissionError> + Sync);

/// Joint emission through a source, mirroring `emission::emit_all`: atoms
/// ordered by index, bosonic tensor on a shared port, renormalized when
/// shared.
fn joint_emission(
    source: EmissionSource<'_>,
    cfgs: &[EmissionConfig],
    shared_port: Option<Port>,
) -> Result<HybridState, ProtocolError> {
    let mut sorted: Vec<EmissionConfig> = cfgs.to_vec();
    sorted.sort_by_key(|c| c.atom_index);
    for pair in sorted.windows(2) {
        if pair[0].atom_index == pair[1].atom_index {
            return Err(ProtocolError::Emission(EmissionError::DuplicateAtomIndex(
                pair[0].atom_index,
            )));
        }
    }
    let shared = shared_port.is_some();
    let mut joint = HybridState::unit();
    for mut cfg in sorted {
        if let Some(port) = shared_port {
            cfg.output_port = port;
        }
        joint = joint.tensor(&source(&cfg)?, shared)?;
    }
    if shared {
        joint = joint.normalize()?.0;
    }
    Ok(joint)
}

/// Builds the final pre-detection state for a variant. Discard-eligible
/// branches (bunching at the PBSs, photons escaping to unread ports) are
/// carried through and eliminated only by detection, so the probability
/// ledger can be checked against 1.
pub fn build_final_state(p: &ProtocolParams) -> Result<Pipeline0, ProtocolError> {
    build_final_state_with(p, &|cfg| emit(cfg))
}

/// As [`build_final_state`], with every emission drawn from `source`.
pub fn build_final_state_with(
    p: &ProtocolParams,
    source: EmissionSource<'_>,
) -> Result<Pipeline0, ProtocolError> {
    check_transmittance(p.bs_transmittance)?;
    let cfg = |atom: usize, port: Port| {
        let mut c = EmissionConfig::new(p.coupling, atom, port);
        c.keep_vacuum_term = p.keep_vacuum_term;
        c
    };
    let mut notes = Vec::new();
    let pipe = match p.variant {
        Variant::Ghz => {
            let initial = joint_emission(
                source,
                &[cfg(0, Port::A), cfg(1, Port::B), cfg(2, Port::C)],
                None,
            )?;
            let mut pipe = Pipeline::new(initial, "emission A,B,C");
            let a = stage_port(StagePort::Da, 0);
            let b = stage_port(StagePort::Db, 0);
            let c = stage_port(StagePort::Dc, 0);
            let d = stage_port(StagePort::Dd, 0);
            pipe.apply("PBS1 (B,C -> c,d)", pbs(Port::B, Port::C, c, d)?)?;
            pipe.apply("PBS2 (d,A -> a,b)", pbs(d, Port::A, a, b)?)?;
            pipe.apply("FS-PBS a", fs_pbs(a, a, a)?)?;
            pipe.apply("FS-PBS b", fs_pbs(b, b, b)?)?;
            pipe.apply("FS-PBS c", fs_pbs(c, c, c)?)?;
            pipe
        }
        Variant::WDirect => {
            let initial = joint_emission(
                source,
                &[cfg(0, Port::Out), cfg(1, Port::Out), cfg(2, Port::Out)],
                Some(Port::Out),
            )?;
            let mut pipe = Pipeline::new(initial, "bunched emission into OUT");
            apply_detection_stage(&mut pipe, Port::Out, 0, p.bs_transmittance)?;
            pipe
        }
        Variant::WBunching { f2, f1_aux } => {
            use Polarization::{H, V};
            let initial = joint_emission(source, &[cfg(0, Port::A), cfg(1, Port::B)], None)?;
            let mut pipe = Pipeline::new(initial, "emission A,B");
            pipe.apply(
                "BS1' (A,B -> t',s')",
                bs(
                    Port::A,
                    Port::B,
                    Port::TPrime,
                    Port::SPrime,
                    p.bs_transmittance,
                    BsPhase::SymmetricI,
                    &[V, H],
                )?,
            )?;
            let p_t_prime = pipe
                .state
                .filter_terms(|t| t.port_count(Port::TPrime) == 2)
                .norm_sqr();
            notes.push(format!(
                "P_t' (both first-stage photons bunched in t') = {p_t_prime:.10}"
            ));
            let with_c = pipe.state.tensor(&source(&cfg(2, Port::C))?, false)?;
            pipe.record("tensor emission C", with_c);
            pipe.apply(
                "BS2' (t',C -> OUT,F2)",
                bs(
                    Port::TPrime,
                    Port::C,
                    Port::Out,
                    Port::F2,
                    p.bs_transmittance,
                    BsPhase::SymmetricI,
                    &[V, H],
                )?,
            )?;
            let p_out3 = pipe
                .state
                .filter_terms(|t| t.port_count(Port::Out) == 3)
                .norm_sqr();
            if p_t_prime > 0.0 {
                let p_s = p_out3 / p_t_prime;
                let cp = p.coupling;
                let (ll2, lr2) = (cp.lambda_l.powi(2), cp.lambda_r.powi(2));
                let omega4 = (ll2 + lr2).powi(2);
                let cand_a = omega4 / (2.0 * omega4 + 8.0 * ll2 * lr2);
                let cand_b = omega4 / (4.0 * omega4 + 8.0 * ll2 * lr2);
                let verdict = if (p_s - cand_a).abs() < 1e-10 {
                    "matches Omega^4/(2*Omega^4+8*ll^2*lr^2)"
                } else if (p_s - cand_b).abs() < 1e-10 {
                    "matches Omega^4/(4*Omega^4+8*ll^2*lr^2)"
                } else {
                    "matches neither closed-form candidate"
                };
                notes.push(format!(
                    "P_s (three photons bunched in OUT, conditioned on t' bunching) = {p_s:.10}; \
                     {verdict} (candidates: {cand_a:.10}, {cand_b:.10})"
                ));
            }
            if f1_aux {
                let with_aux = pipe.state.tensor(&source(&cfg(3, Port::CPrime))?, false)?;
                pipe.record("tensor auxiliary emission C'", with_aux);
                pipe.apply(
                    "BS'' (s',C' -> OUT',F2')",
                    bs(
                        Port::SPrime,
                        Port::CPrime,
                        Port::OutPrime,
                        Port::F2Prime,
                        p.bs_transmittance,
                        BsPhase::SymmetricI,
                        &[V, H],
                    )?,
                )?;
            }
            apply_detection_stage(&mut pipe, Port::Out, 0, p.bs_transmittance)?;
            if f2 {
                apply_detection_stage(&mut pipe, Port::F2, 1, p.bs_transmittance)?;
            }
            if f1_aux {
                apply_detection_stage(&mut pipe, Port::OutPrime, 2, p.bs_transmittance)?;
                if f2 {
                    apply_detection_stage(&mut pipe, Port::F2Prime, 3, p.bs_transmittance)?;
                }
            }
            notes.push(
                "wiring: BS1'(A,B -> t',s'); BS2'(t',C -> OUT,F2); detection stages read \
                 OUT, F2, OUT', F2' as enabled"
                    .to_string(),
            );
            pipe
        }
    };
    Ok(Pipeline0 { pipe, notes })
}

/// Intermediate result of pipeline construction.
pub struct Pipeline0 {
    pipe: Pipeline,
    notes: Vec<String>,
}

impl Pipeline0 {
    pub fn final_state(&self) -> &HybridState {
        &self.pipe.state
    }

    pub fn trace(&self) -> &[TraceStep] {
        &self.pipe.trace
    }
}

fn label_record(variant: &Variant, record: &OutcomeRecord) -> LabeledOutcome {
    let herald = classify_fired(variant, &record.pattern.fired);
    let (heralded, target, fidelity) = match &herald {
        Some(h) => {
            let f = subset_fidelity(&record.branch, &h.target.state(), &h.atom_subset);
            (true, Some(h.target), Some(f))
        }
        None => (false, None, None),
    };
    LabeledOutcome {
        pattern: record.pattern.clone(),
        counts: record.counts.clone(),
        probability: record.probability,
        heralded,
        target,
        fidelity,
        conditional: record.conditional_atoms.clone(),
    }
}

fn assemble_report(
    p: &ProtocolParams,
    built: Pipeline0,
    enumeration: Enumeration,
    detectors: BTreeSet<ModeId>,
) -> ProtocolReport {
    let mut outcomes = Vec::new();
    let mut total_success = 0.0;
    let mut unheralded = 0.0;
    let mut per_target_yield: BTreeMap<Target, f64> = BTreeMap::new();
    for record in &enumeration.records {
        let labeled = label_record(&p.variant, record);
        if labeled.heralded {
            total_success += labeled.probability;
            *per_target_yield.entry(labeled.target.unwrap()).or_default() +=
                labeled.probability;
        } else {
            unheralded += labeled.probability;
        }
        outcomes.push(labeled);
    }
    ProtocolReport {
        variant: p.variant,
        outcomes,
        total_success_probability: total_success,
        per_target_yield,
        discarded_probability: enumeration.discarded_probability,
        unheralded_probability: unheralded,
        notes: built.notes,
        final_state: built.pipe.state,
        detectors,
        trace: built.pipe.trace,
    }
}

/// Runs any variant end to end.
pub fn run(p: &ProtocolParams) -> Result<ProtocolReport, ProtocolError> {
    let built = build_final_state(p)?;
    let detectors = variant_detectors(&p.variant);
    let enumeration = enumerate_outcomes(built.final_state(), &detectors, p.semantics);
    Ok(assemble_report(p, built, enumeration, detectors))
}

pub fn run_ghz(p: &ProtocolParams) -> Result<ProtocolReport, ProtocolError> {
    assert!(matches!(p.variant, Variant::Ghz));
    run(p)
}

pub fn run_w_direct(p: &ProtocolParams) -> Result<ProtocolReport, ProtocolError> {
    assert!(matches!(p.variant, Variant::WDirect));
    run(p)
}

pub fn run_w_bunching(p: &ProtocolParams) -> Result<ProtocolReport, ProtocolError> {
    assert!(matches!(p.variant, Variant::WBunching { .. }));
    run(p)
}

/// One sweep result row.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub value: f64,
    pub total_probability: f64,
    pub min_fidelity: f64,
    pub max_fidelity: f64,
}

fn fidelity_span(report: &ProtocolReport) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for o in &report.outcomes {
        if let Some(f) = o.fidelity {
            min = min.min(f);
            max = max.max(f);
        }
    }
    if min > max {
        (f64::NAN, f64::NAN)
    } else {
        (min, max)
    }
}

/// Sweeps the coupling ratio lambda_l / lambda_r at fixed lambda_r = 1.
/// Rows come back in input order.
pub fn sweep_coupling_ratio(
    base: &ProtocolParams,
    ratios: &[f64],
) -> Result<Vec<SweepRow>, ProtocolError> {
    ratios
        .par_iter()
        .map(|&ratio| {
            let mut p = *base;
            p.coupling = CouplingParams::new(ratio, 1.0, base.coupling.theta)?;
            let report = run(&p)?;
            let (min_fidelity, max_fidelity) = fidelity_span(&report);
            Ok(SweepRow {
                value: ratio,
                total_probability: report.total_success_probability,
                min_fidelity,
                max_fidelity,
            })
        })
        .collect()
}

/// Sweeps the beam-splitter transmittance. Rows come back in input order.
pub fn sweep_bs_imbalance(
    base: &ProtocolParams,
    transmittances: &[f64],
) -> Result<Vec<SweepRow>, ProtocolError> {
    transmittances
        .par_iter()
        .map(|&t| {
            let mut p = *base;
            p.bs_transmittance = t;
            let report = run(&p)?;
            let (min_fidelity, max_fidelity) = fidelity_span(&report);
            Ok(SweepRow {
                value: t,
                total_probability: report.total_success_probability,
                min_fidelity,
                max_fidelity,
            })
        })
        .collect()
}
