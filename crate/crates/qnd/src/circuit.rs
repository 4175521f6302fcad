//! The heralded polarization-measurement circuit.
//!
//! Mode order is fixed: signal H, signal V, meter H, meter V, loss ancilla.
//! The signal H mode and meter H mode interact on a beam splitter of
//! reflectivity `eta`; an optional 2/3 loss on the signal V mode balances the
//! success probability for weak operation; a half-wave plate at 22.5° rotates
//! the meter before the detectors. Success means exactly one photon in the
//! signal pair, one in the meter pair, and none in the ancilla.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::elements::{
    beam_splitter, half_wave_plate, loss_channel, quarter_wave_plate, ElementError, ModeTransform,
};
use crate::fock::{FockError, ModeConstraint, PureState, QubitDensityMatrix};
use crate::metrics;
use crate::numfmt::sig;

pub const SIGNAL_H: usize = 0;
pub const SIGNAL_V: usize = 1;
pub const METER_H: usize = 2;
pub const METER_V: usize = 3;
pub const LOSS_ANCILLA: usize = 4;
pub const MODE_COUNT: usize = 5;

/// Loss applied to the signal V mode when balancing is on.
pub const BALANCING_LOSS_FRACTION: f64 = 2.0 / 3.0;
/// The beam-splitter reflectivity at which both meter output coefficients for
/// an H-polarized signal coincide.
pub const DEFAULT_ETA: f64 = 1.0 / 3.0;
pub const DEFAULT_METER_HWP_DEG: f64 = 22.5;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("qubit amplitudes are not normalized (deviation {deviation:.3e})")]
    NotNormalized { deviation: f64 },
    #[error("qubit amplitudes are both zero")]
    ZeroAmplitudes,
    #[error("meter weight alpha = {value} is outside [0, 1]")]
    AlphaOutOfRange { value: f64 },
    #[error("the sweep runs the circuit weakly and requires balanced_loss on")]
    SweepRequiresLoss,
    #[error("the success branch has zero probability for this configuration")]
    NoSuccessBranch,
    #[error("the requested meter outcome never occurs")]
    ImpossibleOutcome,
    #[error("joint distribution invalid: {reason}")]
    InvalidJoint { reason: String },
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// One dual-rail polarization qubit: `h_amp |H> + v_amp |V>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationQubit {
    h: Complex64,
    v: Complex64,
}

impl PolarizationQubit {
    /// Requires `|h|² + |v|² = 1` within 1e-12.
    pub fn new(h: Complex64, v: Complex64) -> Result<Self, CircuitError> {
        let deviation = (h.norm_sqr() + v.norm_sqr() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(CircuitError::NotNormalized { deviation });
        }
        Ok(Self { h, v })
    }

    pub fn new_real(h: f64, v: f64) -> Result<Self, CircuitError> {
        Self::new(Complex64::new(h, 0.0), Complex64::new(v, 0.0))
    }

    /// Rescales arbitrary amplitudes to a unit ket.
    pub fn normalized(h: Complex64, v: Complex64) -> Result<Self, CircuitError> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if norm <= 0.0 {
            return Err(CircuitError::ZeroAmplitudes);
        }
        Ok(Self {
            h: h / norm,
            v: v / norm,
        })
    }

    pub fn horizontal() -> Self {
        Self {
            h: Complex64::new(1.0, 0.0),
            v: Complex64::new(0.0, 0.0),
        }
    }

    pub fn vertical() -> Self {
        Self {
            h: Complex64::new(0.0, 0.0),
            v: Complex64::new(1.0, 0.0),
        }
    }

    pub fn equal_superposition() -> Self {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            h: Complex64::new(inv, 0.0),
            v: Complex64::new(inv, 0.0),
        }
    }

    pub fn h_amp(&self) -> Complex64 {
        self.h
    }

    pub fn v_amp(&self) -> Complex64 {
        self.v
    }

    /// (P(H), P(V)) of the bare input.
    pub fn populations(&self) -> (f64, f64) {
        (self.h.norm_sqr(), self.v.norm_sqr())
    }

    /// Two-mode Fock representation (H mode first).
    pub fn to_fock(&self) -> PureState {
        PureState::from_terms(2, 2, [(vec![1, 0], self.h), (vec![0, 1], self.v)])
            .expect("one photon in two modes fits any capacity")
    }
}

/// The six reference inputs: both eigenstates and the four balanced
/// superpositions `(±√3 |H> + |V>)/2` and `(±i√3 |H> + |V>)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardInput {
    H,
    V,
    DPlus,
    DMinus,
    RPlus,
    RMinus,
}

impl StandardInput {
    pub fn all() -> [StandardInput; 6] {
        use StandardInput::*;
        [H, V, DPlus, DMinus, RPlus, RMinus]
    }

    pub fn label(&self) -> &'static str {
        match self {
            StandardInput::H => "H",
            StandardInput::V => "V",
            StandardInput::DPlus => "D+",
            StandardInput::DMinus => "D-",
            StandardInput::RPlus => "R+",
            StandardInput::RMinus => "R-",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::all().into_iter().find(|s| s.label() == label)
    }

    pub fn qubit(&self) -> PolarizationQubit {
        let root3_half = 3.0_f64.sqrt() / 2.0;
        let (h, v) = match self {
            StandardInput::H => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            StandardInput::V => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            StandardInput::DPlus => (Complex64::new(root3_half, 0.0), Complex64::new(0.5, 0.0)),
            StandardInput::DMinus => (Complex64::new(-root3_half, 0.0), Complex64::new(0.5, 0.0)),
            StandardInput::RPlus => (Complex64::new(0.0, root3_half), Complex64::new(0.5, 0.0)),
            StandardInput::RMinus => (Complex64::new(0.0, -root3_half), Complex64::new(0.5, 0.0)),
        };
        PolarizationQubit { h, v }
    }
}

/// The meter preparation that makes both eigenstate outputs herald correctly:
/// `sqrt(1/(1+eta)) |H> + sqrt(eta/(1+eta)) |V>`.
pub fn prepare_meter(eta: f64) -> Result<PolarizationQubit, CircuitError> {
    if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
        return Err(CircuitError::Element(ElementError::ParameterOutOfRange {
            name: "eta",
            value: eta,
        }));
    }
    PolarizationQubit::new_real((1.0 / (1.0 + eta)).sqrt(), (eta / (1.0 + eta)).sqrt())
}

/// The standard strong-measurement meter, `prepare_meter(1/3)`.
pub fn meter_d_prime() -> PolarizationQubit {
    prepare_meter(DEFAULT_ETA).expect("1/3 is a valid reflectivity")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitConfig {
    /// Beam-splitter reflectivity for the signal-meter interaction.
    pub eta: f64,
    /// Apply the 2/3 loss to the signal V mode (weak operation).
    pub balanced_loss: bool,
    /// Meter wave-plate angle in degrees.
    pub meter_hwp_deg: f64,
}

impl CircuitConfig {
    pub fn strong() -> Self {
        Self {
            eta: DEFAULT_ETA,
            balanced_loss: false,
            meter_hwp_deg: DEFAULT_METER_HWP_DEG,
        }
    }

    pub fn weak() -> Self {
        Self {
            balanced_loss: true,
            ..Self::strong()
        }
    }

    fn validate(&self) -> Result<(), CircuitError> {
        if !(0.0..=1.0).contains(&self.eta) || self.eta.is_nan() {
            return Err(CircuitError::Element(ElementError::ParameterOutOfRange {
                name: "eta",
                value: self.eta,
            }));
        }
        Ok(())
    }
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self::strong()
    }
}

/// Where the probability that is not in the success branch went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureBreakdown {
    pub two_in_signal: f64,
    pub two_in_meter: f64,
    pub photon_lost: f64,
}

impl FailureBreakdown {
    pub fn total(&self) -> f64 {
        self.two_in_signal + self.two_in_meter + self.photon_lost
    }
}

/// Result of one circuit run: the heralded branch and the bookkeeping.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Normalized success branch over all five modes; empty when impossible.
    pub success_state: PureState,
    pub success_probability: f64,
    pub failures: FailureBreakdown,
}

/// Post-selected coincidence probabilities, first index signal, second meter,
/// normalized over successes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistribution {
    pub p_hh: f64,
    pub p_hv: f64,
    pub p_vh: f64,
    pub p_vv: f64,
}

impl JointDistribution {
    pub fn new(p_hh: f64, p_hv: f64, p_vh: f64, p_vv: f64) -> Result<Self, CircuitError> {
        let probs = [p_hh, p_hv, p_vh, p_vv];
        if probs.iter().any(|&p| !(-NORM_TOL..=1.0 + NORM_TOL).contains(&p)) {
            return Err(CircuitError::InvalidJoint {
                reason: "probability outside [0, 1]".to_string(),
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(CircuitError::InvalidJoint {
                reason: format!("probabilities sum to {sum}, not 1"),
            });
        }
        Ok(Self {
            p_hh,
            p_hv,
            p_vh,
            p_vv,
        })
    }

    /// (P(signal H), P(signal V)).
    pub fn signal_marginal(&self) -> (f64, f64) {
        (self.p_hh + self.p_hv, self.p_vh + self.p_vv)
    }

    /// (P(meter H), P(meter V)).
    pub fn meter_marginal(&self) -> (f64, f64) {
        (self.p_hh + self.p_vh, self.p_hv + self.p_vv)
    }
}

/// Polarization analyzer in front of a detector pair: an optional half-wave
/// plate followed by an optional quarter-wave plate, then the splitting into
/// the H and V ports. Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalyzerBasis {
    pub hwp_deg: Option<f64>,
    pub qwp_deg: Option<f64>,
}

impl AnalyzerBasis {
    /// Bare H/V measurement.
    pub fn computational() -> Self {
        Self::default()
    }

    /// Ports measure the diagonal pair `(|H> ± |V>)/sqrt(2)`.
    pub fn diagonal() -> Self {
        Self {
            hwp_deg: Some(22.5),
            qwp_deg: None,
        }
    }

    /// Ports measure the circular pair `(|H> ∓ i|V>)/sqrt(2)`.
    pub fn circular() -> Self {
        Self {
            hwp_deg: None,
            qwp_deg: Some(45.0),
        }
    }

    fn transform(&self) -> ModeTransform {
        let mut t = ModeTransform::identity(2);
        if let Some(deg) = self.hwp_deg {
            t = t
                .then(&half_wave_plate(deg.to_radians()))
                .expect("2x2 composition");
        }
        if let Some(deg) = self.qwp_deg {
            t = t
                .then(&quarter_wave_plate(deg.to_radians()))
                .expect("2x2 composition");
        }
        t
    }
}

fn meter_port_swap() -> ModeTransform {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    ModeTransform::new(vec![vec![zero, one], vec![one, zero]]).expect("swap is unitary")
}

/// Runs the full circuit and classifies every photon-number pattern.
pub fn run(
    signal: &PolarizationQubit,
    meter: &PolarizationQubit,
    config: &CircuitConfig,
) -> Result<RunOutcome, CircuitError> {
    config.validate()?;
    let state = signal
        .to_fock()
        .tensor(&meter.to_fock())?
        .tensor(&PureState::vacuum(1))?;
    let state = state.apply(&beam_splitter(config.eta)?, &[SIGNAL_H, METER_H])?;
    let state = if config.balanced_loss {
        let lossy = state.apply(
            &loss_channel(BALANCING_LOSS_FRACTION)?,
            &[SIGNAL_V, LOSS_ANCILLA],
        )?;
        // Interferometer calibration: the surviving signal V amplitude must
        // carry the same sign as the signal H reflection, so that a meter
        // which never interacts (alpha = 0) leaves the signal unchanged. A
        // half-wave plate at 0° puts the pi on the V arm.
        lossy.apply(&half_wave_plate(0.0), &[SIGNAL_H, SIGNAL_V])?
    } else {
        state
    };
    let state = state.apply(
        &half_wave_plate(config.meter_hwp_deg.to_radians()),
        &[METER_H, METER_V],
    )?;
    // Detector wiring: the port that receives (|H> + |V>)/sqrt(2) reports
    // outcome V, so a V eigenstate heralds meter outcome V.
    let state = state.apply(&meter_port_swap(), &[METER_H, METER_V])?;

    let sig_modes: [usize; 2] = [SIGNAL_H, SIGNAL_V];
    let met_modes: [usize; 2] = [METER_H, METER_V];
    let anc_modes: [usize; 1] = [LOSS_ANCILLA];
    let success =
        state.project_group_counts(&[(&sig_modes, 1), (&met_modes, 1), (&anc_modes, 0)])?;
    let two_in_signal = state
        .project_group_counts(&[(&sig_modes, 2), (&met_modes, 0), (&anc_modes, 0)])?
        .probability;
    let two_in_meter = state
        .project_group_counts(&[(&sig_modes, 0), (&met_modes, 2), (&anc_modes, 0)])?
        .probability;
    let photon_lost = state.project_group_counts(&[(&anc_modes, 1)])?.probability
        + state.project_group_counts(&[(&anc_modes, 2)])?.probability;

    Ok(RunOutcome {
        success_state: success.state,
        success_probability: success.probability,
        failures: FailureBreakdown {
            two_in_signal,
            two_in_meter,
            photon_lost,
        },
    })
}

/// Coincidence distribution of an already-computed success branch, measured
/// through the given analyzers.
pub fn success_joint_distribution(
    outcome: &RunOutcome,
    signal_basis: &AnalyzerBasis,
    meter_basis: &AnalyzerBasis,
) -> Result<JointDistribution, CircuitError> {
    if outcome.success_probability <= 0.0 {
        return Err(CircuitError::NoSuccessBranch);
    }
    let state = outcome
        .success_state
        .apply(&signal_basis.transform(), &[SIGNAL_H, SIGNAL_V])?
        .apply(&meter_basis.transform(), &[METER_H, METER_V])?;
    let p = |sh: u8, sv: u8, mh: u8, mv: u8| -> Result<f64, FockError> {
        use ModeConstraint::Exactly;
        Ok(state
            .project(&[Exactly(sh), Exactly(sv), Exactly(mh), Exactly(mv), Exactly(0)])?
            .probability)
    };
    JointDistribution::new(p(1, 0, 1, 0)?, p(1, 0, 0, 1)?, p(0, 1, 1, 0)?, p(0, 1, 0, 1)?)
}

/// Runs the circuit and measures both outputs through the given analyzers.
pub fn joint_distribution(
    signal: &PolarizationQubit,
    meter: &PolarizationQubit,
    config: &CircuitConfig,
    signal_basis: &AnalyzerBasis,
    meter_basis: &AnalyzerBasis,
) -> Result<JointDistribution, CircuitError> {
    success_joint_distribution(&run(signal, meter, config)?, signal_basis, meter_basis)
}

/// Reduced state of the signal output, traced over the meter, conditioned on
/// success.
pub fn signal_output_density_matrix(
    signal: &PolarizationQubit,
    meter: &PolarizationQubit,
    config: &CircuitConfig,
) -> Result<QubitDensityMatrix, CircuitError> {
    let outcome = run(signal, meter, config)?;
    if outcome.success_probability <= 0.0 {
        return Err(CircuitError::NoSuccessBranch);
    }
    Ok(outcome.success_state.reduce_to_qubit(SIGNAL_H, SIGNAL_V)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeterOutcome {
    H,
    V,
}

/// The pure signal qubit left behind when the meter detector fires with the
/// given outcome, plus the probability of that outcome within the success
/// branch. This is what feeds a second, chained measurement.
pub fn conditional_signal_output(
    outcome: &RunOutcome,
    meter_outcome: MeterOutcome,
) -> Result<(PolarizationQubit, f64), CircuitError> {
    if outcome.success_probability <= 0.0 {
        return Err(CircuitError::NoSuccessBranch);
    }
    use ModeConstraint::{Any, Exactly};
    let (mh, mv) = match meter_outcome {
        MeterOutcome::H => (1, 0),
        MeterOutcome::V => (0, 1),
    };
    let branch = outcome.success_state.project(&[
        Any,
        Any,
        Exactly(mh),
        Exactly(mv),
        Exactly(0),
    ])?;
    if branch.is_impossible() {
        return Err(CircuitError::ImpossibleOutcome);
    }
    let h = branch.state.amplitude(&[1, 0, mh, mv, 0]);
    let v = branch.state.amplitude(&[0, 1, mh, mv, 0]);
    Ok((PolarizationQubit::normalized(h, v)?, branch.probability))
}

/// One row of the weak-measurement sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub knowledge: f64,
    pub visibility: f64,
    pub purity: f64,
    pub success_probability: f64,
}

impl SweepPoint {
    pub fn duality_sum(&self) -> f64 {
        self.knowledge * self.knowledge + self.visibility * self.visibility
    }
}

/// Sweeps the meter weight `alpha` (with `beta = sqrt(1 - alpha²)`), returning
/// knowledge, visibility, purity and success probability per point. Points
/// are evaluated independently (in parallel under the ambient thread pool)
/// and returned in input order.
pub fn weak_sweep(
    signal: &PolarizationQubit,
    alphas: &[f64],
    config: &CircuitConfig,
) -> Result<Vec<SweepPoint>, CircuitError> {
    if !config.balanced_loss {
        return Err(CircuitError::SweepRequiresLoss);
    }
    alphas
        .par_iter()
        .map(|&alpha| sweep_point(signal, alpha, config))
        .collect()
}

fn sweep_point(
    signal: &PolarizationQubit,
    alpha: f64,
    config: &CircuitConfig,
) -> Result<SweepPoint, CircuitError> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(CircuitError::AlphaOutOfRange { value: alpha });
    }
    let beta = (1.0 - alpha * alpha).sqrt();
    let meter = PolarizationQubit::new_real(alpha, beta)?;
    let outcome = run(signal, &meter, config)?;
    if outcome.success_probability <= 0.0 {
        return Err(CircuitError::NoSuccessBranch);
    }
    let joint = success_joint_distribution(
        &outcome,
        &AnalyzerBasis::computational(),
        &AnalyzerBasis::computational(),
    )?;
    let rho = outcome.success_state.reduce_to_qubit(SIGNAL_H, SIGNAL_V)?;
    Ok(SweepPoint {
        alpha,
        knowledge: metrics::knowledge(&joint),
        visibility: 2.0 * rho.coherence().norm(),
        purity: rho.purity(),
        success_probability: outcome.success_probability,
    })
}

/// Visibility of the linear polarization fringes of the success branch,
/// scanned directly: the signal analyzer direction sweeps 0°..180° in 1°
/// steps and the H-port probability is read out at each angle. Cross-checks
/// the `2|ρ_HV|` route used by the sweep.
pub fn fringe_visibility(outcome: &RunOutcome) -> Result<f64, CircuitError> {
    if outcome.success_probability <= 0.0 {
        return Err(CircuitError::NoSuccessBranch);
    }
    use ModeConstraint::{Any, Exactly};
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for deg in 0..180 {
        let phi = (deg as f64).to_radians();
        let (c, s) = (phi.cos(), phi.sin());
        // rotate the analyzed direction onto the H port
        let rot = ModeTransform::new(vec![
            vec![Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
            vec![Complex64::new(-s, 0.0), Complex64::new(c, 0.0)],
        ])
        .expect("rotations are unitary");
        let p = outcome
            .success_state
            .apply(&rot, &[SIGNAL_H, SIGNAL_V])?
            .project(&[Exactly(1), Exactly(0), Any, Any, Any])?
            .probability;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    Ok((hi - lo) / (hi + lo))
}

/// CSV for a sweep: `alpha,K,V,K2plusV2,purity,p_success`, 12 significant
/// digits, LF line endings. Byte-identical across runs for the same points.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("alpha,K,V,K2plusV2,purity,p_success\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig(p.alpha, 12),
            sig(p.knowledge, 12),
            sig(p.visibility, 12),
            sig(p.duality_sum(), 12),
            sig(p.purity, 12),
            sig(p.success_probability, 12),
        ));
    }
    out
}
