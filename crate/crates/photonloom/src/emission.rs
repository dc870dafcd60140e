//! Post-interaction atom–photon entangled states of the atom–cavity systems.
//!
//! The quarter-wave plate is folded in, so emissions are expressed directly
//! in the linear V/H basis: an excited atom evolves to
//! sin(theta) (lambda_l |g_l>|V> + lambda_r |g_r>|H>) / Omega,
//! plus cos(theta) |e>|vac> when the vacuum term is kept.

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{
    AtomLevel, CouplingParams, FockError, HybridState, ModeId, Polarization, Port, DEFAULT_N_MAX,
};

#[derive(Debug, Error, PartialEq)]
pub enum EmissionError {
    #[error("duplicate atom index {0}")]
    DuplicateAtomIndex(usize),
    #[error("no emission configs supplied")]
    Empty,
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Parameters of one atom–cavity emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionConfig {
    pub coupling: CouplingParams,
    /// Keep the cos(theta)|e>|vac> branch instead of dropping it.
    pub keep_vacuum_term: bool,
    /// Position of this atom in the joint atomic register.
    pub atom_index: usize,
    pub output_port: Port,
}

impl EmissionConfig {
    pub fn new(coupling: CouplingParams, atom_index: usize, output_port: Port) -> Self {
        EmissionConfig {
            coupling,
            keep_vacuum_term: false,
            atom_index,
            output_port,
        }
    }

    /// Probability that the photon branch is realized.
    pub fn p1(&self) -> f64 {
        self.coupling.theta.sin().powi(2)
    }
}

/// Single-atom emission. The photon branch has squared norm sin^2(theta);
/// with the vacuum term kept the total squared norm is exactly 1.
pub fn emit(cfg: &EmissionConfig) -> Result<HybridState, EmissionError> {
    let omega = cfg.coupling.omega();
    let sin = cfg.coupling.theta.sin();
    let cos = cfg.coupling.theta.cos();

    let l_branch = HybridState::new_product_state(&[AtomLevel::GroundL])?
        .apply_creation(ModeId::new(cfg.output_port, Polarization::V), DEFAULT_N_MAX)?
        .scaled(Complex64::new(sin * cfg.coupling.lambda_l / omega, 0.0));
    let r_branch = HybridState::new_product_state(&[AtomLevel::GroundR])?
        .apply_creation(ModeId::new(cfg.output_port, Polarization::H), DEFAULT_N_MAX)?
        .scaled(Complex64::new(sin * cfg.coupling.lambda_r / omega, 0.0));
    let mut state = l_branch.superpose(&r_branch)?;
    if cfg.keep_vacuum_term {
        let vac = HybridState::new_product_state(&[AtomLevel::Excited])?
            .scaled(Complex64::new(cos, 0.0));
        state = state.superpose(&vac)?;
    }
    state.prune();
    Ok(state)
}

/// Joint emission of several atoms, ordered by atom_index.
///
/// With `shared_port` set, every photon branch is emitted into that single
/// port and the result is renormalized. The raw bosonic tensor over one
/// shared port has squared norm above 1 (stimulated-bunching enhancement of
/// the symmetrized terms); renormalizing yields the unit-norm ideal
/// pre-bunched input state, with the |3> and |2>|1> components present.
pub fn emit_all(
    cfgs: &[EmissionConfig],
    shared_port: Option<Port>,
) -> Result<HybridState, EmissionError> {
    if cfgs.is_empty() {
        return Err(EmissionError::Empty);
    }
    let mut sorted: Vec<EmissionConfig> = cfgs.to_vec();
    sorted.sort_by_key(|c| c.atom_index);
    for pair in sorted.windows(2) {
        if pair[0].atom_index == pair[1].atom_index {
            return Err(EmissionError::DuplicateAtomIndex(pair[0].atom_index));
        }
    }
    let shared = shared_port.is_some();
    let mut joint = HybridState::unit();
    for mut cfg in sorted {
        if let Some(port) = shared_port {
            cfg.output_port = port;
        }
        let single = emit(&cfg)?;
        joint = joint.tensor(&single, shared)?;
    }
    if shared {
        let (unit, _) = joint.normalize()?;
        joint = unit;
    }
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::BasisTerm;
    use std::collections::BTreeMap;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn sym(theta: f64) -> CouplingParams {
        CouplingParams::new(1.0, 1.0, theta).unwrap()
    }

    #[test]
    fn symmetric_emission_is_balanced() {
        let cfg = EmissionConfig::new(sym(FRAC_PI_2), 0, Port::A);
        let s = emit(&cfg).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
        assert_eq!(s.term_count(), 2);
        for (_, a) in s.iter() {
            assert!((a.norm_sqr() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_theta_keeps_excited_atom() {
        let mut cfg = EmissionConfig::new(sym(0.0), 0, Port::A);
        cfg.keep_vacuum_term = true;
        let s = emit(&cfg).unwrap();
        assert_eq!(s.term_count(), 1);
        let (term, amp) = s.iter().next().unwrap();
        assert_eq!(term.atoms, vec![AtomLevel::Excited]);
        assert!(term.occupation.is_empty());
        assert!((amp.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn photon_branch_norm_is_sin_squared() {
        let cfg = EmissionConfig::new(sym(FRAC_PI_4), 0, Port::A);
        let s = emit(&cfg).unwrap();
        assert!((s.norm_sqr() - 0.5).abs() < 1e-14);
        // And the kept vacuum term completes the norm.
        let mut cfg = cfg;
        cfg.keep_vacuum_term = true;
        let s = emit(&cfg).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn photon_branch_norm_random_thetas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let cfg = EmissionConfig::new(
                CouplingParams::new(rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0), theta)
                    .unwrap(),
                0,
                Port::A,
            );
            let s = emit(&cfg).unwrap();
            assert!((s.norm_sqr() - theta.sin().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn emit_all_disjoint_ports() {
        let cfgs = [
            EmissionConfig::new(sym(FRAC_PI_2), 0, Port::A),
            EmissionConfig::new(sym(FRAC_PI_2), 1, Port::B),
        ];
        let s = emit_all(&cfgs, None).unwrap();
        assert_eq!(s.atom_count(), 2);
        assert_eq!(s.term_count(), 4);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn emit_all_shared_port_bunched_components() {
        let coupling = sym(FRAC_PI_2);
        let cfgs: Vec<EmissionConfig> = (0..3)
            .map(|i| EmissionConfig::new(coupling, i, Port::A))
            .collect();
        let s = emit_all(&cfgs, Some(Port::Out)).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        // Triple-V component: atoms all in g_l, three photons bunched.
        let mut occ = BTreeMap::new();
        occ.insert(ModeId::new(Port::Out, Polarization::V), 3);
        let amp = s.amplitude(&BasisTerm {
            atoms: vec![AtomLevel::GroundL; 3],
            occupation: occ,
        });
        // Raw weight lambda_l^3 sqrt(3!) / Omega^3 before renormalization;
        // total raw squared norm is 3 at equal couplings, so the
        // renormalized amplitude is sqrt(6)/(2 sqrt(2) sqrt(3)) = 1/2.
        assert!((amp.re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn emit_all_single_matches_emit() {
        let cfg = EmissionConfig::new(sym(FRAC_PI_2), 0, Port::C);
        assert_eq!(emit_all(&[cfg], None).unwrap(), emit(&cfg).unwrap());
    }

    #[test]
    fn emit_all_rejects_duplicates() {
        let cfgs = [
            EmissionConfig::new(sym(FRAC_PI_2), 0, Port::A),
            EmissionConfig::new(sym(FRAC_PI_2), 0, Port::B),
        ];
        assert_eq!(
            emit_all(&cfgs, None).unwrap_err(),
            EmissionError::DuplicateAtomIndex(0)
        );
    }
}
