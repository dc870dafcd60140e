//! Sparse algebra of hybrid atom–photon states.
//!
//! A [`HybridState`] is a sparse superposition over basis terms, each pairing
//! an ordered list of three-level atomic configurations with a bosonic Fock
//! occupation over labelled optical modes. Subnormalized states are
//! first-class: a post-selected branch keeps its squared norm, which is the
//! branch probability.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Default photon-number truncation. The shipped protocols carry at most
/// four photons (three signal photons plus one auxiliary emission).
pub const DEFAULT_N_MAX: u32 = 4;

/// Amplitudes with magnitude below this are pruned after each operation.
/// Two orders of magnitude below accumulated rounding at three-photon depth.
pub const AMPLITUDE_EPSILON: f64 = 1e-14;

/// States with squared norm below this cannot be normalized.
pub const NORM_EPSILON: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("atom list must be non-empty")]
    EmptyAtomList,
    #[error("atom counts differ: {0} vs {1}")]
    AtomCountMismatch(usize, usize),
    #[error("states share mode {0} but the shared-port flag is not set")]
    OverlappingModes(ModeId),
    #[error("photon-number truncation exceeded on mode {0} (n_max = {1})")]
    TruncationExceeded(ModeId, u32),
    #[error("state has effectively zero norm")]
    ZeroNorm,
    #[error("photonic occupations differ across terms; enumerate outcomes before reducing")]
    NonUniformOccupation,
    #[error("invalid coupling: lambda_l and lambda_r must be positive and finite")]
    InvalidCoupling,
}

/// One of the three levels of a lambda-type atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomLevel {
    Excited,
    GroundL,
    GroundR,
}

impl AtomLevel {
    pub fn symbol(self) -> char {
        match self {
            AtomLevel::Excited => 'e',
            AtomLevel::GroundL => 'l',
            AtomLevel::GroundR => 'r',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'e' => Some(AtomLevel::Excited),
            'l' => Some(AtomLevel::GroundL),
            'r' => Some(AtomLevel::GroundR),
            _ => None,
        }
    }
}

/// Detection-side ports of one copy of the four-detector splitting stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StagePort {
    /// Input carrying vertical polarization into the first splitter (a').
    InV,
    /// Input carrying horizontal polarization into the second splitter (b').
    InH,
    Da,
    Db,
    Dc,
    Dd,
}

impl StagePort {
    fn label(self) -> &'static str {
        match self {
            StagePort::InV => "a'",
            StagePort::InH => "b'",
            StagePort::Da => "a",
            StagePort::Db => "b",
            StagePort::Dc => "c",
            StagePort::Dd => "d",
        }
    }
}

/// A spatial port label. `Stage(p, k)` is port `p` of detection-stage copy
/// `k`; copy 0 is the main stage, copies 1..4 serve the expanded setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    /// Output of cavity A.
    A,
    /// Output of cavity B.
    B,
    /// Output of cavity C.
    C,
    /// Output of the auxiliary cavity C'.
    CPrime,
    /// Bunching-splitter output t'.
    TPrime,
    /// Bunching-splitter output s' (the expanded port F1).
    SPrime,
    /// Bunched output port feeding the main detection stage.
    Out,
    /// Second output of the final bunching splitter.
    F2,
    /// Bunched output of the primed (auxiliary) side.
    OutPrime,
    /// Second output of the primed bunching splitter.
    F2Prime,
    Stage(StagePort, u8),
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::A => write!(f, "A"),
            Port::B => write!(f, "B"),
            Port::C => write!(f, "C"),
            Port::CPrime => write!(f, "C'"),
            Port::TPrime => write!(f, "t'"),
            Port::SPrime => write!(f, "s'"),
            Port::Out => write!(f, "OUT"),
            Port::F2 => write!(f, "F2"),
            Port::OutPrime => write!(f, "OUT'"),
            Port::F2Prime => write!(f, "F2'"),
            Port::Stage(p, 0) => write!(f, "{}", p.label()),
            Port::Stage(p, k) => write!(f, "{}{}", p.label(), k + 1),
        }
    }
}

/// A polarization basis element. L/R are the intra-cavity circular modes,
/// H/V the linear modes after the quarter-wave plate, F/S the rotated
/// frame downstream of an FS-PBS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    L,
    R,
    H,
    V,
    F,
    S,
}

impl Polarization {
    pub fn symbol(self) -> char {
        match self {
            Polarization::L => 'L',
            Polarization::R => 'R',
            Polarization::H => 'H',
            Polarization::V => 'V',
            Polarization::F => 'F',
            Polarization::S => 'S',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'L' => Some(Polarization::L),
            'R' => Some(Polarization::R),
            'H' => Some(Polarization::H),
            'V' => Some(Polarization::V),
            'F' => Some(Polarization::F),
            'S' => Some(Polarization::S),
            _ => None,
        }
    }
}

/// A photonic mode: spatial port times polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub port: Port,
    pub pol: Polarization,
}

impl ModeId {
    pub const fn new(port: Port, pol: Polarization) -> Self {
        ModeId { port, pol }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.port, self.pol.symbol())
    }
}

impl FromStr for ModeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (port_s, pol_s) = s
            .rsplit_once('.')
            .ok_or_else(|| format!("mode `{s}` is missing the `.` separator"))?;
        let pol = pol_s
            .chars()
            .next()
            .filter(|_| pol_s.len() == 1)
            .and_then(Polarization::from_symbol)
            .ok_or_else(|| format!("unknown polarization `{pol_s}`"))?;
        let port = parse_port(port_s).ok_or_else(|| format!("unknown port `{port_s}`"))?;
        Ok(ModeId::new(port, pol))
    }
}

fn parse_port(s: &str) -> Option<Port> {
    let fixed = match s {
        "A" => Some(Port::A),
        "B" => Some(Port::B),
        "C" => Some(Port::C),
        "C'" => Some(Port::CPrime),
        "t'" => Some(Port::TPrime),
        "s'" => Some(Port::SPrime),
        "OUT" => Some(Port::Out),
        "F2" => Some(Port::F2),
        "OUT'" => Some(Port::OutPrime),
        "F2'" => Some(Port::F2Prime),
        _ => None,
    };
    if fixed.is_some() {
        return fixed;
    }
    let stages = [
        StagePort::InV,
        StagePort::InH,
        StagePort::Da,
        StagePort::Db,
        StagePort::Dc,
        StagePort::Dd,
    ];
    for sp in stages {
        let base = sp.label();
        if s == base {
            return Some(Port::Stage(sp, 0));
        }
        if let Some(rest) = s.strip_prefix(base) {
            if let Ok(n) = rest.parse::<u8>() {
                if (2..=9).contains(&n) {
                    return Some(Port::Stage(sp, n - 1));
                }
            }
        }
    }
    None
}

/// Atom–cavity coupling constants and the dimensionless interaction phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    pub lambda_l: f64,
    pub lambda_r: f64,
    /// The product of the Rabi frequency and the interaction time.
    pub theta: f64,
}

impl CouplingParams {
    pub fn new(lambda_l: f64, lambda_r: f64, theta: f64) -> Result<Self, FockError> {
        if !(lambda_l > 0.0) || !(lambda_r > 0.0) || !lambda_l.is_finite() || !lambda_r.is_finite()
        {
            return Err(FockError::InvalidCoupling);
        }
        if !theta.is_finite() {
            return Err(FockError::InvalidCoupling);
        }
        Ok(CouplingParams {
            lambda_l,
            lambda_r,
            theta,
        })
    }

    pub fn symmetric() -> Self {
        CouplingParams {
            lambda_l: 1.0,
            lambda_r: 1.0,
            theta: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn omega(&self) -> f64 {
        self.lambda_l.hypot(self.lambda_r)
    }
}

/// One basis term: an atomic configuration plus a photonic occupation.
/// The occupation map stores no zero entries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisTerm {
    pub atoms: Vec<AtomLevel>,
    pub occupation: BTreeMap<ModeId, u32>,
}

impl BasisTerm {
    pub fn atomic(atoms: Vec<AtomLevel>) -> Self {
        BasisTerm {
            atoms,
            occupation: BTreeMap::new(),
        }
    }

    pub fn photon_count(&self) -> u32 {
        self.occupation.values().sum()
    }

    pub fn count_at(&self, mode: ModeId) -> u32 {
        self.occupation.get(&mode).copied().unwrap_or(0)
    }

    pub fn port_count(&self, port: Port) -> u32 {
        self.occupation
            .iter()
            .filter(|(m, _)| m.port == port)
            .map(|(_, c)| c)
            .sum()
    }
}

/// A sparse superposition over [`BasisTerm`]s with complex amplitudes.
///
/// Terms are held in a `BTreeMap`, so iteration order is the canonical
/// lexicographic order by (atom levels, sorted mode occupations) and
/// serialized snapshots are byte-stable across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    terms: BTreeMap<BasisTerm, Complex64>,
    atom_count: usize,
}

impl HybridState {
    /// The scalar unit: zero atoms, vacuum, amplitude one.
    pub fn unit() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(BasisTerm::atomic(Vec::new()), Complex64::new(1.0, 0.0));
        HybridState {
            terms,
            atom_count: 0,
        }
    }

    /// A state with no terms at all (the zero vector).
    pub fn zero(atom_count: usize) -> Self {
        HybridState {
            terms: BTreeMap::new(),
            atom_count,
        }
    }

    /// Product state of the given atoms with the photonic vacuum.
    pub fn new_product_state(atoms: &[AtomLevel]) -> Result<Self, FockError> {
        if atoms.is_empty() {
            return Err(FockError::EmptyAtomList);
        }
        let mut terms = BTreeMap::new();
        terms.insert(
            BasisTerm::atomic(atoms.to_vec()),
            Complex64::new(1.0, 0.0),
        );
        Ok(HybridState {
            terms,
            atom_count: atoms.len(),
        })
    }

    pub fn from_terms<I>(atom_count: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (BasisTerm, Complex64)>,
    {
        let mut state = HybridState::zero(atom_count);
        for (t, a) in terms {
            debug_assert_eq!(t.atoms.len(), atom_count);
            state.add_amplitude(t, a);
        }
        state.prune();
        state
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisTerm, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, term: &BasisTerm) -> Complex64 {
        self.terms.get(term).copied().unwrap_or_default()
    }

    pub(crate) fn add_amplitude(&mut self, term: BasisTerm, amp: Complex64) {
        let entry = self.terms.entry(term).or_default();
        *entry += amp;
    }

    /// Drops amplitudes with magnitude below [`AMPLITUDE_EPSILON`].
    pub fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= AMPLITUDE_EPSILON);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.terms.values_mut() {
            *a *= factor;
        }
        out.prune();
        out
    }

    /// Coherent sum of two states over the same atoms.
    pub fn superpose(&self, other: &Self) -> Result<Self, FockError> {
        if self.atom_count != other.atom_count {
            return Err(FockError::AtomCountMismatch(
                self.atom_count,
                other.atom_count,
            ));
        }
        let mut out = self.clone();
        for (t, a) in other.terms.iter() {
            out.add_amplitude(t.clone(), *a);
        }
        out.prune();
        Ok(out)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Conjugate-linear in `self`: returns ⟨self|other⟩.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64, FockError> {
        if self.atom_count != other.atom_count {
            return Err(FockError::AtomCountMismatch(
                self.atom_count,
                other.atom_count,
            ));
        }
        let mut acc = Complex64::default();
        // Iterate the smaller map.
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (&self.terms, &other.terms, true)
        } else {
            (&other.terms, &self.terms, false)
        };
        for (t, a) in small {
            if let Some(b) = large.get(t) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// Returns the unit-norm state and the original squared norm
    /// (the branch probability).
    pub fn normalize(&self) -> Result<(Self, f64), FockError> {
        let n2 = self.norm_sqr();
        if n2 < NORM_EPSILON {
            return Err(FockError::ZeroNorm);
        }
        let inv = Complex64::new(1.0 / n2.sqrt(), 0.0);
        Ok((self.scaled(inv), n2))
    }

    /// Tensor product. Mode sets must be disjoint unless `allow_shared_ports`
    /// is set, in which case coinciding modes combine bosonically with the
    /// usual sqrt((n+m)!/(n! m!)) symmetrization factor.
    pub fn tensor(&self, other: &Self, allow_shared_ports: bool) -> Result<Self, FockError> {
        let mut out = HybridState::zero(self.atom_count + other.atom_count);
        for (t1, a1) in &self.terms {
            for (t2, a2) in &other.terms {
                let mut occupation = t1.occupation.clone();
                let mut amp = a1 * a2;
                for (&mode, &n2) in &t2.occupation {
                    match occupation.get_mut(&mode) {
                        Some(n1) => {
                            if !allow_shared_ports {
                                return Err(FockError::OverlappingModes(mode));
                            }
                            amp *= sqrt_binomial(*n1 + n2, n2);
                            *n1 += n2;
                        }
                        None => {
                            occupation.insert(mode, n2);
                        }
                    }
                }
                let mut atoms = t1.atoms.clone();
                atoms.extend_from_slice(&t2.atoms);
                out.add_amplitude(BasisTerm { atoms, occupation }, amp);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Applies a creation operator: occupation at `mode` increments and the
    /// amplitude gains the ladder factor sqrt(n+1).
    pub fn apply_creation(&self, mode: ModeId, n_max: u32) -> Result<Self, FockError> {
        let mut out = HybridState::zero(self.atom_count);
        for (t, a) in &self.terms {
            if t.photon_count() + 1 > n_max {
                return Err(FockError::TruncationExceeded(mode, n_max));
            }
            let mut occ = t.occupation.clone();
            let n = occ.entry(mode).or_insert(0);
            *n += 1;
            let factor = (*n as f64).sqrt();
            out.add_amplitude(
                BasisTerm {
                    atoms: t.atoms.clone(),
                    occupation: occ,
                },
                a * factor,
            );
        }
        Ok(out)
    }

    /// Strips a photonic factor common to every term and returns the atomic
    /// superposition with the same relative amplitudes. Errors if the terms
    /// do not all share one identical occupation.
    pub fn reduced_atomic_state(&self) -> Result<Self, FockError> {
        let mut iter = self.terms.iter();
        let first = iter.next().ok_or(FockError::ZeroNorm)?;
        let occupation = &first.0.occupation;
        for (t, _) in iter.clone() {
            if &t.occupation != occupation {
                return Err(FockError::NonUniformOccupation);
            }
        }
        let mut out = HybridState::zero(self.atom_count);
        for (t, a) in &self.terms {
            out.add_amplitude(BasisTerm::atomic(t.atoms.clone()), *a);
        }
        Ok(out)
    }

    /// All modes occupied anywhere in the state, in canonical order.
    pub fn occupied_modes(&self) -> Vec<ModeId> {
        let mut set = std::collections::BTreeSet::new();
        for t in self.terms.keys() {
            set.extend(t.occupation.keys().copied());
        }
        set.into_iter().collect()
    }

    /// Keeps only the terms satisfying the predicate. The result is
    /// subnormalized; its squared norm is the branch probability.
    pub fn filter_terms<F>(&self, mut pred: F) -> Self
    where
        F: FnMut(&BasisTerm) -> bool,
    {
        let mut out = HybridState::zero(self.atom_count);
        for (t, a) in &self.terms {
            if pred(t) {
                out.add_amplitude(t.clone(), *a);
            }
        }
        out
    }

    /// Serializes the state: one term per line, canonical order, amplitudes
    /// with 17 significant digits.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        for (t, a) in &self.terms {
            let atoms: String = if t.atoms.is_empty() {
                "-".to_string()
            } else {
                t.atoms.iter().map(|l| l.symbol()).collect()
            };
            let occ = if t.occupation.is_empty() {
                "-".to_string()
            } else {
                t.occupation
                    .iter()
                    .map(|(m, c)| format!("{m}:{c}"))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push_str(&format!("{atoms} | {occ} | {:.16e} {:.16e}\n", a.re, a.im));
        }
        out
    }

    /// Parses a snapshot produced by [`Self::to_snapshot`]. Total: every
    /// error names the offending line.
    pub fn from_snapshot(text: &str) -> Result<Self, SnapshotError> {
        let mut state: Option<HybridState> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('|');
            let atoms_s = fields.next().unwrap_or("").trim();
            let occ_s = fields
                .next()
                .ok_or(SnapshotError::MissingField(lineno))?
                .trim();
            let amp_s = fields
                .next()
                .ok_or(SnapshotError::MissingField(lineno))?
                .trim();
            if fields.next().is_some() {
                return Err(SnapshotError::TooManyFields(lineno));
            }

            let atoms: Vec<AtomLevel> = if atoms_s == "-" {
                Vec::new()
            } else {
                atoms_s
                    .chars()
                    .map(|c| {
                        AtomLevel::from_symbol(c).ok_or(SnapshotError::BadAtomLevel(lineno, c))
                    })
                    .collect::<Result<_, _>>()?
            };

            let mut occupation = BTreeMap::new();
            if occ_s != "-" {
                for part in occ_s.split(',') {
                    let (mode_s, count_s) = part
                        .rsplit_once(':')
                        .ok_or_else(|| SnapshotError::BadOccupation(lineno, part.to_string()))?;
                    let mode: ModeId = mode_s
                        .trim()
                        .parse()
                        .map_err(|e| SnapshotError::BadMode(lineno, e))?;
                    let count: u32 = count_s
                        .trim()
                        .parse()
                        .ok()
                        .filter(|&c| c >= 1 && c <= 64)
                        .ok_or_else(|| SnapshotError::BadOccupation(lineno, part.to_string()))?;
                    if occupation.insert(mode, count).is_some() {
                        return Err(SnapshotError::DuplicateMode(lineno, mode));
                    }
                }
            }

            let mut amps = amp_s.split_whitespace();
            let re: f64 = amps
                .next()
                .and_then(|s| s.parse().ok())
                .filter(|x: &f64| x.is_finite())
                .ok_or(SnapshotError::BadAmplitude(lineno))?;
            let im: f64 = amps
                .next()
                .and_then(|s| s.parse().ok())
                .filter(|x: &f64| x.is_finite())
                .ok_or(SnapshotError::BadAmplitude(lineno))?;
            if amps.next().is_some() {
                return Err(SnapshotError::BadAmplitude(lineno));
            }

            let term = BasisTerm { atoms, occupation };
            let state = state.get_or_insert_with(|| HybridState::zero(term.atoms.len()));
            if term.atoms.len() != state.atom_count {
                return Err(SnapshotError::AtomCountMismatch(lineno));
            }
            if state.terms.contains_key(&term) {
                return Err(SnapshotError::DuplicateTerm(lineno));
            }
            state.terms.insert(term, Complex64::new(re, im));
        }
        state.ok_or(SnapshotError::Empty)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SnapshotError {
    #[error("snapshot is empty")]
    Empty,
    #[error("line {0}: expected three `|`-separated fields")]
    MissingField(usize),
    #[error("line {0}: too many fields")]
    TooManyFields(usize),
    #[error("line {0}: unknown atom level `{1}`")]
    BadAtomLevel(usize, char),
    #[error("line {0}: bad occupation entry `{1}`")]
    BadOccupation(usize, String),
    #[error("line {0}: {1}")]
    BadMode(usize, String),
    #[error("line {0}: duplicate mode {1}")]
    DuplicateMode(usize, ModeId),
    #[error("line {0}: bad amplitude")]
    BadAmplitude(usize),
    #[error("line {0}: atom count differs from earlier lines")]
    AtomCountMismatch(usize),
    #[error("line {0}: duplicate basis term")]
    DuplicateTerm(usize),
}

/// sqrt(binomial(n, k)) with exact small-integer arithmetic.
fn sqrt_binomial(n: u32, k: u32) -> f64 {
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k.min(n - k) {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    ((num / den) as f64).sqrt()
}
