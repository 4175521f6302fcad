//! Exact state-vector simulation of a few photons in a handful of modes.
//!
//! A [`PureState`] is a sparse map from occupation vectors to complex
//! amplitudes. Linear optics acts through the bosonic substitution
//! `a†_j -> Σ_k u[k][j] a†_k` expanded term by term, so photon number is
//! conserved exactly and norms are preserved to machine precision.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::ModeTransform;
use crate::numfmt::round_sig;

/// Normalization checks use this tolerance.
pub const NORM_TOL: f64 = 1e-12;
/// Amplitudes below this magnitude are dropped after each operation.
pub const PRUNE_TOL: f64 = 1e-14;
/// Default total-photon capacity.
pub const DEFAULT_CAPACITY: usize = 2;
/// Largest supported total-photon capacity.
pub const MAX_CAPACITY: usize = 4;

const FACTORIAL: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("photon capacity {requested} outside the supported range 1..={MAX_CAPACITY}")]
    InvalidCapacity { requested: usize },
    #[error("occupation vector has {got} modes, expected {expected}")]
    ModeCountMismatch { expected: usize, got: usize },
    #[error("total photon number {total} exceeds the capacity {capacity}")]
    CapacityExceeded { total: usize, capacity: usize },
    #[error("mode index {index} out of range for {mode_count} modes")]
    ModeOutOfRange { index: usize, mode_count: usize },
    #[error("target modes must be distinct")]
    DuplicateTarget,
    #[error("transform dimension {dim} does not match {targets} target modes")]
    DimensionMismatch { dim: usize, targets: usize },
    #[error("state is not normalized (|norm² − 1| = {deviation:.3e})")]
    NotNormalized { deviation: f64 },
    #[error("state has zero norm")]
    ZeroState,
    #[error("pattern has {got} constraints, expected {expected}")]
    PatternLength { expected: usize, got: usize },
    #[error("basis state {occupation} does not hold exactly one photon across the qubit pair")]
    DualRailViolation { occupation: String },
    #[error("invalid density matrix: {reason}")]
    InvalidDensityMatrix { reason: String },
    #[error("malformed state JSON: {0}")]
    Json(String),
}

/// Photon counts per mode; the basis label of the Fock space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(Vec<u8>);

impl Occupation {
    pub fn new(counts: Vec<u8>) -> Self {
        Occupation(counts)
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// Sparse complex-amplitude map over occupation vectors.
///
/// Iteration order is the lexicographic order of the occupation vectors, so
/// every export is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    mode_count: usize,
    capacity: usize,
    amps: BTreeMap<Occupation, Complex64>,
}

/// Per-mode projection constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeConstraint {
    Exactly(u8),
    Any,
}

/// A post-selected branch: the kept component renormalized, plus the
/// probability of landing in it. A zero-probability branch is empty and
/// flagged impossible.
#[derive(Debug, Clone)]
pub struct ProjectedBranch {
    pub state: PureState,
    pub probability: f64,
}

impl ProjectedBranch {
    pub fn is_impossible(&self) -> bool {
        self.probability == 0.0
    }
}

impl PureState {
    pub fn vacuum(mode_count: usize) -> Self {
        Self::vacuum_with_capacity(mode_count, DEFAULT_CAPACITY).expect("default capacity valid")
    }

    pub fn vacuum_with_capacity(mode_count: usize, capacity: usize) -> Result<Self, FockError> {
        check_capacity(capacity)?;
        let mut amps = BTreeMap::new();
        amps.insert(Occupation(vec![0; mode_count]), Complex64::new(1.0, 0.0));
        Ok(Self {
            mode_count,
            capacity,
            amps,
        })
    }

    pub fn single_photon(mode_count: usize, mode: usize) -> Result<Self, FockError> {
        if mode >= mode_count {
            return Err(FockError::ModeOutOfRange {
                index: mode,
                mode_count,
            });
        }
        let mut counts = vec![0u8; mode_count];
        counts[mode] = 1;
        Self::from_terms(mode_count, DEFAULT_CAPACITY, [(counts, Complex64::new(1.0, 0.0))])
    }

    pub fn from_terms<I>(mode_count: usize, capacity: usize, terms: I) -> Result<Self, FockError>
    where
        I: IntoIterator<Item = (Vec<u8>, Complex64)>,
    {
        check_capacity(capacity)?;
        let mut amps: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (counts, amp) in terms {
            if counts.len() != mode_count {
                return Err(FockError::ModeCountMismatch {
                    expected: mode_count,
                    got: counts.len(),
                });
            }
            let occ = Occupation(counts);
            let total = occ.total();
            if total > capacity {
                return Err(FockError::CapacityExceeded { total, capacity });
            }
            *amps.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let mut state = Self {
            mode_count,
            capacity,
            amps,
        };
        state.prune();
        Ok(state)
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    /// Terms in lexicographic occupation order.
    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, Complex64)> {
        self.amps.iter().map(|(occ, &amp)| (occ, amp))
    }

    pub fn amplitude(&self, counts: &[u8]) -> Complex64 {
        self.amps
            .get(&Occupation(counts.to_vec()))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self, FockError> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(FockError::ZeroState);
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for amp in out.amps.values_mut() {
            *amp *= factor;
        }
        out.prune();
        out
    }

    fn max_total_photons(&self) -> usize {
        self.amps.keys().map(Occupation::total).max().unwrap_or(0)
    }

    fn prune(&mut self) {
        self.amps.retain(|_, amp| amp.norm() >= PRUNE_TOL);
    }

    /// Tensor product; modes of `other` are appended after the modes of `self`.
    pub fn tensor(&self, other: &PureState) -> Result<PureState, FockError> {
        let capacity = self.capacity.max(other.capacity);
        let total = self.max_total_photons() + other.max_total_photons();
        if total > capacity {
            return Err(FockError::CapacityExceeded { total, capacity });
        }
        let mut amps = BTreeMap::new();
        for (a_occ, &a_amp) in &self.amps {
            for (b_occ, &b_amp) in &other.amps {
                let mut counts = a_occ.0.clone();
                counts.extend_from_slice(&b_occ.0);
                amps.insert(Occupation(counts), a_amp * b_amp);
            }
        }
        let mut state = PureState {
            mode_count: self.mode_count + other.mode_count,
            capacity,
            amps,
        };
        state.prune();
        Ok(state)
    }

    /// Applies `u` to the listed modes as the bosonic substitution on
    /// creation operators, with the √(n!) occupation factors restored.
    pub fn apply(&self, u: &ModeTransform, targets: &[usize]) -> Result<PureState, FockError> {
        let dim = u.dim();
        if dim != targets.len() {
            return Err(FockError::DimensionMismatch {
                dim,
                targets: targets.len(),
            });
        }
        let mut seen = vec![false; self.mode_count];
        for &t in targets {
            if t >= self.mode_count {
                return Err(FockError::ModeOutOfRange {
                    index: t,
                    mode_count: self.mode_count,
                });
            }
            if seen[t] {
                return Err(FockError::DuplicateTarget);
            }
            seen[t] = true;
        }

        let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, &amp) in &self.amps {
            // strip the input √(n!) factors on the target modes
            let mut base = amp;
            for &t in targets {
                base /= FACTORIAL[occ.0[t] as usize].sqrt();
            }
            // expand the substituted creation-operator monomial one photon at
            // a time; keys are occupations of the target modes only
            let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            poly.insert(vec![0; dim], base);
            for (col, &t) in targets.iter().enumerate() {
                for _ in 0..occ.0[t] {
                    let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                    for (m, &coeff) in &poly {
                        for row in 0..dim {
                            let w = u.entry(row, col);
                            if w.norm_sqr() == 0.0 {
                                continue;
                            }
                            let mut bumped = m.clone();
                            bumped[row] += 1;
                            *next.entry(bumped).or_insert(Complex64::new(0.0, 0.0)) += coeff * w;
                        }
                    }
                    poly = next;
                }
            }
            for (m, coeff) in poly {
                let mut counts = occ.0.clone();
                let mut factor = 1.0;
                for (row, &t) in targets.iter().enumerate() {
                    counts[t] = m[row];
                    factor *= FACTORIAL[m[row] as usize];
                }
                let occ_out = Occupation(counts);
                *out.entry(occ_out).or_insert(Complex64::new(0.0, 0.0)) +=
                    coeff * factor.sqrt();
            }
        }
        let mut state = PureState {
            mode_count: self.mode_count,
            capacity: self.capacity,
            amps: out,
        };
        state.prune();
        Ok(state)
    }

    /// Projects onto the basis states satisfying the per-mode pattern.
    /// Requires a normalized input so the probability is meaningful.
    pub fn project(&self, pattern: &[ModeConstraint]) -> Result<ProjectedBranch, FockError> {
        if pattern.len() != self.mode_count {
            return Err(FockError::PatternLength {
                expected: self.mode_count,
                got: pattern.len(),
            });
        }
        self.require_normalized()?;
        self.keep(|occ| {
            occ.0.iter().zip(pattern).all(|(&n, c)| match c {
                ModeConstraint::Exactly(want) => n == *want,
                ModeConstraint::Any => true,
            })
        })
    }

    /// Projects onto the subspace where each listed mode group holds exactly
    /// the stated total photon number. Modes not mentioned are unconstrained.
    pub fn project_group_counts(
        &self,
        groups: &[(&[usize], usize)],
    ) -> Result<ProjectedBranch, FockError> {
        for (modes, _) in groups {
            for &m in *modes {
                if m >= self.mode_count {
                    return Err(FockError::ModeOutOfRange {
                        index: m,
                        mode_count: self.mode_count,
                    });
                }
            }
        }
        self.require_normalized()?;
        self.keep(|occ| {
            groups.iter().all(|(modes, want)| {
                let total: usize = modes.iter().map(|&m| occ.0[m] as usize).sum();
                total == *want
            })
        })
    }

    fn require_normalized(&self) -> Result<(), FockError> {
        let deviation = (self.norm_sqr() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(FockError::NotNormalized { deviation });
        }
        Ok(())
    }

    fn keep<F: Fn(&Occupation) -> bool>(&self, pred: F) -> Result<ProjectedBranch, FockError> {
        let kept: BTreeMap<Occupation, Complex64> = self
            .amps
            .iter()
            .filter(|(occ, _)| pred(occ))
            .map(|(occ, &amp)| (occ.clone(), amp))
            .collect();
        let probability: f64 = kept.values().map(|a| a.norm_sqr()).sum();
        if probability == 0.0 {
            return Ok(ProjectedBranch {
                state: PureState {
                    mode_count: self.mode_count,
                    capacity: self.capacity,
                    amps: BTreeMap::new(),
                },
                probability: 0.0,
            });
        }
        let scale = Complex64::new(1.0 / probability.sqrt(), 0.0);
        let mut state = PureState {
            mode_count: self.mode_count,
            capacity: self.capacity,
            amps: kept,
        };
        for amp in state.amps.values_mut() {
            *amp *= scale;
        }
        state.prune();
        Ok(ProjectedBranch { state, probability })
    }

    /// Partial trace down to the dual-rail qubit held by `(h_mode, v_mode)`.
    /// Every surviving basis state must carry exactly one photon across the
    /// pair; the offending basis state is reported otherwise.
    pub fn reduce_to_qubit(
        &self,
        h_mode: usize,
        v_mode: usize,
    ) -> Result<QubitDensityMatrix, FockError> {
        for &m in &[h_mode, v_mode] {
            if m >= self.mode_count {
                return Err(FockError::ModeOutOfRange {
                    index: m,
                    mode_count: self.mode_count,
                });
            }
        }
        if h_mode == v_mode {
            return Err(FockError::DuplicateTarget);
        }
        let mut by_env: BTreeMap<Vec<u8>, [Complex64; 2]> = BTreeMap::new();
        for (occ, &amp) in &self.amps {
            let idx = match (occ.0[h_mode], occ.0[v_mode]) {
                (1, 0) => 0,
                (0, 1) => 1,
                _ => {
                    return Err(FockError::DualRailViolation {
                        occupation: occ.to_string(),
                    })
                }
            };
            let env: Vec<u8> = occ
                .0
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != h_mode && i != v_mode)
                .map(|(_, &n)| n)
                .collect();
            by_env.entry(env).or_insert([Complex64::new(0.0, 0.0); 2])[idx] += amp;
        }
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        for pair in by_env.values() {
            for i in 0..2 {
                for j in 0..2 {
                    rho[i][j] += pair[i] * pair[j].conj();
                }
            }
        }
        let trace = (rho[0][0] + rho[1][1]).re;
        if trace <= 0.0 {
            return Err(FockError::ZeroState);
        }
        for row in rho.iter_mut() {
            for e in row.iter_mut() {
                *e /= trace;
            }
        }
        QubitDensityMatrix::new(rho)
    }

    pub fn to_json_string(&self) -> String {
        let terms: Vec<TermJson> = self
            .amps
            .iter()
            .map(|(occ, amp)| TermJson {
                occ: occ.0.clone(),
                re: round_sig(amp.re, 12),
                im: round_sig(amp.im, 12),
            })
            .collect();
        serde_json::to_string(&StateJson {
            modes: self.mode_count,
            terms,
        })
        .expect("state serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self, FockError> {
        let raw: StateJson =
            serde_json::from_str(text).map_err(|e| FockError::Json(e.to_string()))?;
        let max_total = raw
            .terms
            .iter()
            .map(|t| t.occ.iter().map(|&n| n as usize).sum())
            .max()
            .unwrap_or(0);
        let capacity = max_total.clamp(DEFAULT_CAPACITY, MAX_CAPACITY);
        Self::from_terms(
            raw.modes,
            capacity,
            raw.terms
                .into_iter()
                .map(|t| (t.occ, Complex64::new(t.re, t.im))),
        )
    }
}

fn check_capacity(capacity: usize) -> Result<(), FockError> {
    if !(1..=MAX_CAPACITY).contains(&capacity) {
        return Err(FockError::InvalidCapacity {
            requested: capacity,
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    modes: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    occ: Vec<u8>,
    re: f64,
    im: f64,
}

/// 2×2 Hermitian, unit-trace, positive-semidefinite matrix in the (H, V)
/// basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix {
    entries: [[Complex64; 2]; 2],
}

impl QubitDensityMatrix {
    const HERMITICITY_TOL: f64 = 1e-12;
    const TRACE_TOL: f64 = 1e-12;
    const EIGENVALUE_TOL: f64 = 1e-12;

    pub fn new(entries: [[Complex64; 2]; 2]) -> Result<Self, FockError> {
        let invalid = |reason: &str| FockError::InvalidDensityMatrix {
            reason: reason.to_string(),
        };
        if (entries[0][1] - entries[1][0].conj()).norm() > Self::HERMITICITY_TOL
            || entries[0][0].im.abs() > Self::HERMITICITY_TOL
            || entries[1][1].im.abs() > Self::HERMITICITY_TOL
        {
            return Err(invalid("not Hermitian"));
        }
        let trace = entries[0][0].re + entries[1][1].re;
        if (trace - 1.0).abs() > Self::TRACE_TOL {
            return Err(invalid("trace is not 1"));
        }
        let det = entries[0][0].re * entries[1][1].re - entries[0][1].norm_sqr();
        let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
        if trace / 2.0 - disc < -Self::EIGENVALUE_TOL {
            return Err(invalid("negative eigenvalue"));
        }
        Ok(Self { entries })
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row][col]
    }

    /// (H population, V population).
    pub fn populations(&self) -> (f64, f64) {
        (self.entries[0][0].re, self.entries[1][1].re)
    }

    /// The H-V coherence ρ_HV.
    pub fn coherence(&self) -> Complex64 {
        self.entries[0][1]
    }

    /// Tr[ρ²]; lies in [1/2, 1] for a qubit.
    pub fn purity(&self) -> f64 {
        let (ph, pv) = self.populations();
        ph * ph + pv * pv + 2.0 * self.entries[0][1].norm_sqr()
    }

    /// Row-major entries with `re`/`im` fields at 12 significant digits.
    pub fn to_json_value(&self) -> serde_json::Value {
        let cell = |c: Complex64| {
            serde_json::json!({ "re": round_sig(c.re, 12), "im": round_sig(c.im, 12) })
        };
        serde_json::json!([
            [cell(self.entries[0][0]), cell(self.entries[0][1])],
            [cell(self.entries[1][0]), cell(self.entries[1][1])],
        ])
    }
}
