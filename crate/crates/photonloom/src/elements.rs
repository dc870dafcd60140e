//! Linear-optical elements as isometries on creation operators, lifted to
//! Fock space by photon-by-photon substitution.

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FockError, HybridState, ModeId, Polarization, Port};

#[derive(Debug, Error, PartialEq)]
pub enum ElementError {
    #[error("element ports must be distinct")]
    DuplicatePorts,
    #[error("matrix is not an isometry and the lossy flag is not set")]
    NonIsometric,
    #[error("matrix shape does not match the mode lists")]
    ShapeMismatch,
    #[error("transmittance must lie in [0, 1], got {0}")]
    BadTransmittance(f64),
    #[error("output mode {0} is already occupied but is not an input of the transform")]
    OutputOccupied(ModeId),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Beam-splitter phase convention at transmittance t.
///
/// `SymmetricI` puts +i on both reflections. `ConjugateI` is its complex
/// conjugate, with -i on both reflections; the shipped W-state wiring pairs
/// one splitter of each kind so the golden amplitudes come out exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsPhase {
    /// sqrt(t) on transmission, +i sqrt(1-t) on reflection.
    SymmetricI,
    /// sqrt(t) on transmission, -i sqrt(1-t) on reflection.
    ConjugateI,
}

impl BsPhase {
    fn reflection(self, r_amp: f64) -> Complex64 {
        match self {
            BsPhase::SymmetricI => Complex64::new(0.0, r_amp),
            BsPhase::ConjugateI => Complex64::new(0.0, -r_amp),
        }
    }
}

/// The first splitter of the detection stage uses the +i convention.
pub const BS1_PHASE: BsPhase = BsPhase::SymmetricI;

/// An isometry mapping input creation operators to superpositions of output
/// creation operators. Modes not listed as inputs pass through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    inputs: Vec<ModeId>,
    outputs: Vec<ModeId>,
    /// Row-major, outputs x inputs.
    matrix: Vec<Vec<Complex64>>,
    lossy: bool,
}

const ISOMETRY_TOL: f64 = 1e-12;

impl ModeTransform {
    /// Builds a transform from an explicit matrix, verifying the isometry
    /// condition unless `lossy` is set.
    pub fn from_matrix(
        inputs: Vec<ModeId>,
        outputs: Vec<ModeId>,
        matrix: Vec<Vec<Complex64>>,
        lossy: bool,
    ) -> Result<Self, ElementError> {
        if matrix.len() != outputs.len() || matrix.iter().any(|row| row.len() != inputs.len()) {
            return Err(ElementError::ShapeMismatch);
        }
        if has_duplicates(&inputs) || has_duplicates(&outputs) {
            return Err(ElementError::DuplicatePorts);
        }
        let t = ModeTransform {
            inputs,
            outputs,
            matrix,
            lossy,
        };
        if !lossy && !t.is_isometry(ISOMETRY_TOL) {
            return Err(ElementError::NonIsometric);
        }
        Ok(t)
    }

    pub fn inputs(&self) -> &[ModeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[ModeId] {
        &self.outputs
    }

    pub fn matrix(&self) -> &[Vec<Complex64>] {
        &self.matrix
    }

    pub fn is_lossy(&self) -> bool {
        self.lossy
    }

    /// Checks matrix-dagger times matrix against the identity.
    pub fn is_isometry(&self, tol: f64) -> bool {
        let n = self.inputs.len();
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::default();
                for row in &self.matrix {
                    acc += row[i].conj() * row[j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (acc - expect).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Column of the matrix for one input mode, paired with output modes.
    fn column(&self, input_idx: usize) -> impl Iterator<Item = (ModeId, Complex64)> + '_ {
        self.outputs
            .iter()
            .zip(self.matrix.iter())
            .map(move |(&m, row)| (m, row[input_idx]))
            .filter(|(_, c)| c.norm() > 0.0)
    }
}

/// Applies a transform in second quantization. Each input creation operator
/// is rewritten as the matrix-weighted sum of output creation operators;
/// multi-photon occupations expand multinomially, with the sqrt(n!) ladder
/// normalization carried by `apply_creation`.
pub fn lift_apply(
    s: &HybridState,
    t: &ModeTransform,
    n_max: u32,
) -> Result<HybridState, ElementError> {
    let mut out = HybridState::zero(s.atom_count());
    for (term, amp) in s.iter() {
        // Check that fresh output modes really are fresh for this term.
        for &m in &t.outputs {
            if !t.inputs.contains(&m) && term.count_at(m) > 0 {
                return Err(ElementError::OutputOccupied(m));
            }
        }
        // Base term: amplitude with the input ladder factors stripped,
        // occupation with the input modes removed.
        let mut base_amp = *amp;
        let mut base_occ = term.occupation.clone();
        let mut input_counts: Vec<(usize, u32)> = Vec::new();
        for (idx, &mode) in t.inputs.iter().enumerate() {
            if let Some(n) = base_occ.remove(&mode) {
                base_amp /= sqrt_factorial(n);
                input_counts.push((idx, n));
            }
        }
        let base = HybridState::from_terms(
            s.atom_count(),
            [(
                crate::fock::BasisTerm {
                    atoms: term.atoms.clone(),
                    occupation: base_occ,
                },
                base_amp,
            )],
        );
        let mut acc = base;
        for (idx, n) in input_counts {
            for _ in 0..n {
                let mut next = HybridState::zero(s.atom_count());
                for (out_mode, coeff) in t.column(idx) {
                    let created = acc.apply_creation(out_mode, n_max)?;
                    next = next.superpose(&created.scaled(coeff))?;
                }
                acc = next;
            }
        }
        out = out.superpose(&acc)?;
    }
    out.prune();
    Ok(out)
}

/// Two-port PBS. H transmits, V reflects: H(in1) goes to out1, V(in1) to
/// out2, H(in2) to out2, V(in2) to out1.
pub fn pbs(in1: Port, in2: Port, out1: Port, out2: Port) -> Result<ModeTransform, ElementError> {
    use Polarization::{H, V};
    if has_duplicates(&[in1, in2]) || has_duplicates(&[out1, out2]) {
        return Err(ElementError::DuplicatePorts);
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    ModeTransform::from_matrix(
        vec![
            ModeId::new(in1, H),
            ModeId::new(in1, V),
            ModeId::new(in2, H),
            ModeId::new(in2, V),
        ],
        vec![
            ModeId::new(out1, H),
            ModeId::new(out1, V),
            ModeId::new(out2, H),
            ModeId::new(out2, V),
        ],
        vec![
            vec![one, zero, zero, zero],
            vec![zero, zero, zero, one],
            vec![zero, zero, one, zero],
            vec![zero, one, zero, zero],
        ],
        false,
    )
}

/// Single-input PBS used as a polarization splitter: V to out_v, H to out_h.
pub fn pbs_split(input: Port, out_v: Port, out_h: Port) -> Result<ModeTransform, ElementError> {
    use Polarization::{H, V};
    if out_v == out_h {
        return Err(ElementError::DuplicatePorts);
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    ModeTransform::from_matrix(
        vec![ModeId::new(input, V), ModeId::new(input, H)],
        vec![ModeId::new(out_v, V), ModeId::new(out_h, H)],
        vec![vec![one, zero], vec![zero, one]],
        false,
    )
}

/// PBS in the rotated F/S basis: V maps to (F + S)/sqrt(2), H to
/// (F - S)/sqrt(2). `out_f` and `out_s` may name the same spatial port;
/// the two outputs are then distinguished by polarization alone.
pub fn fs_pbs(input: Port, out_f: Port, out_s: Port) -> Result<ModeTransform, ElementError> {
    use Polarization::{F, H, S, V};
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ModeTransform::from_matrix(
        vec![ModeId::new(input, V), ModeId::new(input, H)],
        vec![ModeId::new(out_f, F), ModeId::new(out_s, S)],
        vec![vec![h, h], vec![h, -h]],
        false,
    )
}

/// Polarization-independent beam splitter on two input ports.
pub fn bs(
    in1: Port,
    in2: Port,
    out1: Port,
    out2: Port,
    transmittance: f64,
    phase: BsPhase,
    pols: &[Polarization],
) -> Result<ModeTransform, ElementError> {
    if !(0.0..=1.0).contains(&transmittance) || !transmittance.is_finite() {
        return Err(ElementError::BadTransmittance(transmittance));
    }
    if has_duplicates(&[in1, in2]) || has_duplicates(&[out1, out2]) {
        return Err(ElementError::DuplicatePorts);
    }
    let t_amp = Complex64::new(transmittance.sqrt(), 0.0);
    let r_amp = phase.reflection((1.0 - transmittance).sqrt());
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let n = 2 * pols.len();
    let mut matrix = vec![vec![Complex64::default(); n]; n];
    for (k, &p) in pols.iter().enumerate() {
        inputs.push(ModeId::new(in1, p));
        inputs.push(ModeId::new(in2, p));
        outputs.push(ModeId::new(out1, p));
        outputs.push(ModeId::new(out2, p));
        matrix[2 * k][2 * k] = t_amp;
        matrix[2 * k][2 * k + 1] = r_amp;
        matrix[2 * k + 1][2 * k] = r_amp;
        matrix[2 * k + 1][2 * k + 1] = t_amp;
    }
    ModeTransform::from_matrix(inputs, outputs, matrix, false)
}

/// Beam splitter fed from a single port, the other input held in vacuum.
/// A one-column isometry per polarization.
pub fn bs_single(
    input: Port,
    out1: Port,
    out2: Port,
    transmittance: f64,
    phase: BsPhase,
    pols: &[Polarization],
) -> Result<ModeTransform, ElementError> {
    if !(0.0..=1.0).contains(&transmittance) || !transmittance.is_finite() {
        return Err(ElementError::BadTransmittance(transmittance));
    }
    if out1 == out2 {
        return Err(ElementError::DuplicatePorts);
    }
    let t_amp = Complex64::new(transmittance.sqrt(), 0.0);
    let r_amp = phase.reflection((1.0 - transmittance).sqrt());
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut matrix = vec![vec![Complex64::default(); pols.len()]; 2 * pols.len()];
    for (k, &p) in pols.iter().enumerate() {
        inputs.push(ModeId::new(input, p));
        outputs.push(ModeId::new(out1, p));
        outputs.push(ModeId::new(out2, p));
        matrix[2 * k][k] = t_amp;
        matrix[2 * k + 1][k] = r_amp;
    }
    ModeTransform::from_matrix(inputs, outputs, matrix, false)
}

/// Quarter-wave plate on one port: circular L to linear V, R to H.
pub fn qwp(port: Port) -> Result<ModeTransform, ElementError> {
    use Polarization::{H, L, R, V};
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    ModeTransform::from_matrix(
        vec![ModeId::new(port, L), ModeId::new(port, R)],
        vec![ModeId::new(port, V), ModeId::new(port, H)],
        vec![vec![one, zero], vec![zero, one]],
        false,
    )
}

/// Renames a port, keeping each polarization.
pub fn relabel(from: Port, to: Port, pols: &[Polarization]) -> Result<ModeTransform, ElementError> {
    if from == to {
        return Err(ElementError::DuplicatePorts);
    }
    let mut matrix = vec![vec![Complex64::default(); pols.len()]; pols.len()];
    for k in 0..pols.len() {
        matrix[k][k] = Complex64::new(1.0, 0.0);
    }
    ModeTransform::from_matrix(
        pols.iter().map(|&p| ModeId::new(from, p)).collect(),
        pols.iter().map(|&p| ModeId::new(to, p)).collect(),
        matrix,
        false,
    )
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    for (i, a) in items.iter().enumerate() {
        if items[i + 1..].contains(a) {
            return true;
        }
    }
    false
}

fn sqrt_factorial(n: u32) -> f64 {
    let mut acc = 1f64;
    for k in 2..=n {
        acc *= k as f64;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{AtomLevel, BasisTerm, StagePort, DEFAULT_N_MAX};
    use std::collections::BTreeMap;
    use Polarization::{H, V};

    const A_PRIME: Port = Port::Stage(StagePort::InV, 0);
    const B_PRIME: Port = Port::Stage(StagePort::InH, 0);
    const DA: Port = Port::Stage(StagePort::Da, 0);
    const DB: Port = Port::Stage(StagePort::Db, 0);
    const DC: Port = Port::Stage(StagePort::Dc, 0);
    const DD: Port = Port::Stage(StagePort::Dd, 0);

    fn photons(pairs: &[(ModeId, u32)]) -> HybridState {
        let mut s = HybridState::new_product_state(&[AtomLevel::GroundL]).unwrap();
        for &(mode, n) in pairs {
            for _ in 0..n {
                s = s.apply_creation(mode, DEFAULT_N_MAX).unwrap();
            }
        }
        // Strip ladder factors so the requested occupation has amplitude 1.
        s.normalize().unwrap().0
    }

    fn amp_at(s: &HybridState, pairs: &[(ModeId, u32)]) -> Complex64 {
        let mut occupation = BTreeMap::new();
        for &(m, n) in pairs {
            occupation.insert(m, n);
        }
        s.amplitude(&BasisTerm {
            atoms: vec![AtomLevel::GroundL],
            occupation,
        })
    }

    #[test]
    fn bs_splits_single_photon() {
        let t = bs_single(A_PRIME, DA, DB, 0.5, BS1_PHASE, &[V]).unwrap();
        let s = photons(&[(ModeId::new(A_PRIME, V), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        let a = amp_at(&out, &[(ModeId::new(DA, V), 1)]);
        let b = amp_at(&out, &[(ModeId::new(DB, V), 1)]);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a - Complex64::new(inv_sqrt2, 0.0)).norm() < 1e-14);
        assert!((b - Complex64::new(0.0, inv_sqrt2)).norm() < 1e-14);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_one_split_expansion() {
        // |2> on the V arm, |1> on the H arm, through the paired splitters.
        let s = photons(&[(ModeId::new(A_PRIME, V), 2), (ModeId::new(B_PRIME, H), 1)]);
        let bs1 = bs_single(A_PRIME, DA, DB, 0.5, BS1_PHASE, &[V]).unwrap();
        let bs2 = bs_single(B_PRIME, DC, DD, 0.5, BsPhase::ConjugateI, &[H]).unwrap();
        let out = lift_apply(
            &lift_apply(&s, &bs1, DEFAULT_N_MAX).unwrap(),
            &bs2,
            DEFAULT_N_MAX,
        )
        .unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        // Bunched V pair: amplitude magnitude 1/(2 sqrt(2)).
        let bunched = amp_at(&out, &[(ModeId::new(DA, V), 2), (ModeId::new(DC, H), 1)]);
        let quarter = 0.25;
        assert!((bunched - Complex64::new(2f64.sqrt() * quarter, 0.0)).norm() < 1e-14);
        // Antibunched V pair: one photon in each arm, amplitude i/2.
        let anti = amp_at(
            &out,
            &[
                (ModeId::new(DA, V), 1),
                (ModeId::new(DB, V), 1),
                (ModeId::new(DC, H), 1),
            ],
        );
        assert!((anti - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        // The d-arm picks up the conjugate phase.
        let anti_d = amp_at(
            &out,
            &[
                (ModeId::new(DA, V), 1),
                (ModeId::new(DB, V), 1),
                (ModeId::new(DD, H), 1),
            ],
        );
        assert!((anti_d - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        // Identical photons entering both ports of a 50/50 splitter
        // never exit on opposite sides.
        let s = photons(&[(ModeId::new(Port::A, V), 1), (ModeId::new(Port::B, V), 1)]);
        let t = bs(
            Port::A,
            Port::B,
            Port::TPrime,
            Port::SPrime,
            0.5,
            BsPhase::SymmetricI,
            &[V, H],
        )
        .unwrap();
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        let cross = amp_at(
            &out,
            &[
                (ModeId::new(Port::TPrime, V), 1),
                (ModeId::new(Port::SPrime, V), 1),
            ],
        );
        assert!(cross.norm() < 1e-14);
        let bunched_t = amp_at(&out, &[(ModeId::new(Port::TPrime, V), 2)]);
        assert!((bunched_t.norm_sqr() - 0.5).abs() < 1e-12);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pbs_routes_polarizations() {
        let t = pbs(Port::B, Port::C, DC, DD).unwrap();
        // V from B reflects to the second output, H from C crosses to it.
        let s = photons(&[(ModeId::new(Port::B, V), 1), (ModeId::new(Port::C, H), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        let both_d = amp_at(&out, &[(ModeId::new(DD, V), 1), (ModeId::new(DD, H), 1)]);
        assert!((both_d - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // V from both inputs stays antibunched.
        let s = photons(&[(ModeId::new(Port::B, V), 1), (ModeId::new(Port::C, V), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        let anti = amp_at(&out, &[(ModeId::new(DC, V), 1), (ModeId::new(DD, V), 1)]);
        assert!((anti - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn fs_pbs_basis_rotation() {
        use Polarization::{F, S};
        let t = fs_pbs(DA, DA, DA).unwrap();
        let s = photons(&[(ModeId::new(DA, V), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        assert!((amp_at(&out, &[(ModeId::new(DA, F), 1)]).re - inv).abs() < 1e-14);
        assert!((amp_at(&out, &[(ModeId::new(DA, S), 1)]).re - inv).abs() < 1e-14);
        // (V + H)/sqrt(2) rotates to pure F.
        let v = photons(&[(ModeId::new(DA, V), 1)]);
        let h = photons(&[(ModeId::new(DA, H), 1)]);
        let sup = v
            .scaled(Complex64::new(inv, 0.0))
            .superpose(&h.scaled(Complex64::new(inv, 0.0)))
            .unwrap();
        let out = lift_apply(&sup, &t, DEFAULT_N_MAX).unwrap();
        assert!((amp_at(&out, &[(ModeId::new(DA, F), 1)]).re - 1.0).abs() < 1e-14);
        assert!(amp_at(&out, &[(ModeId::new(DA, S), 1)]).norm() < 1e-14);
    }

    #[test]
    fn identity_transmittance_routes_straight() {
        let t = bs(
            Port::A,
            Port::B,
            Port::TPrime,
            Port::SPrime,
            1.0,
            BsPhase::SymmetricI,
            &[V],
        )
        .unwrap();
        let s = photons(&[(ModeId::new(Port::A, V), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        let straight = amp_at(&out, &[(ModeId::new(Port::TPrime, V), 1)]);
        assert!((straight - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn constructor_validation() {
        assert_eq!(
            pbs(Port::A, Port::A, DC, DD).unwrap_err(),
            ElementError::DuplicatePorts
        );
        assert_eq!(
            bs(Port::A, Port::B, DC, DD, 1.5, BsPhase::SymmetricI, &[V]).unwrap_err(),
            ElementError::BadTransmittance(1.5)
        );
        let bad = ModeTransform::from_matrix(
            vec![ModeId::new(Port::A, V)],
            vec![ModeId::new(Port::B, V)],
            vec![vec![Complex64::new(0.5, 0.0)]],
            false,
        );
        assert_eq!(bad.unwrap_err(), ElementError::NonIsometric);
    }

    #[test]
    fn lossy_flag_permits_non_isometry() {
        let t = ModeTransform::from_matrix(
            vec![ModeId::new(Port::A, V)],
            vec![ModeId::new(Port::B, V)],
            vec![vec![Complex64::new(0.5, 0.0)]],
            true,
        )
        .unwrap();
        let s = photons(&[(ModeId::new(Port::A, V), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        assert!((out.norm_sqr() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn untouched_modes_pass_through() {
        let t = bs_single(A_PRIME, DA, DB, 0.5, BS1_PHASE, &[V]).unwrap();
        let s = photons(&[(ModeId::new(A_PRIME, V), 1), (ModeId::new(Port::C, H), 1)]);
        let out = lift_apply(&s, &t, DEFAULT_N_MAX).unwrap();
        for (term, _) in out.iter() {
            assert_eq!(term.count_at(ModeId::new(Port::C, H)), 1);
        }
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupied_fresh_output_rejected() {
        let t = bs_single(A_PRIME, DA, DB, 0.5, BS1_PHASE, &[V]).unwrap();
        let s = photons(&[(ModeId::new(A_PRIME, V), 1), (ModeId::new(DA, V), 1)]);
        assert!(matches!(
            lift_apply(&s, &t, DEFAULT_N_MAX),
            Err(ElementError::OutputOccupied(_))
        ));
    }
}
