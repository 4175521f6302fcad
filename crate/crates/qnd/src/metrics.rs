//! Fidelity and complementarity measures for a nondestructive measurement.
//!
//! Three binary distributions characterize one run: the signal input
//! distribution p_in, the signal output distribution p_out, and the meter
//! distribution p_m. The three criteria compare them pairwise with the
//! classical fidelity; knowledge and visibility quantify the weak regime.

use serde_json::json;
use thiserror::Error;

use crate::circuit::{
    self, AnalyzerBasis, CircuitConfig, CircuitError, JointDistribution, PolarizationQubit,
};
use crate::numfmt::round_sig;

/// Slack allowed on the complementarity bound; looser than state-vector
/// tolerances to absorb accumulation across the sweep pipeline.
pub const COMPLEMENTARITY_TOL: f64 = 1e-9;

const DIST_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid binary distribution: {reason}")]
    InvalidDistribution { reason: String },
}

/// A probability distribution over the two polarization outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryDistribution {
    p_h: f64,
    p_v: f64,
}

impl BinaryDistribution {
    pub fn new(p_h: f64, p_v: f64) -> Result<Self, MetricsError> {
        if p_h < -DIST_TOL || p_v < -DIST_TOL {
            return Err(MetricsError::InvalidDistribution {
                reason: format!("negative probability ({p_h}, {p_v})"),
            });
        }
        if (p_h + p_v - 1.0).abs() > DIST_TOL {
            return Err(MetricsError::InvalidDistribution {
                reason: format!("probabilities sum to {}", p_h + p_v),
            });
        }
        Ok(Self {
            p_h: p_h.max(0.0),
            p_v: p_v.max(0.0),
        })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(w_h: f64, w_v: f64) -> Result<Self, MetricsError> {
        if w_h < 0.0 || w_v < 0.0 || w_h + w_v <= 0.0 {
            return Err(MetricsError::InvalidDistribution {
                reason: format!("weights ({w_h}, {w_v}) cannot be normalized"),
            });
        }
        let sum = w_h + w_v;
        Ok(Self {
            p_h: w_h / sum,
            p_v: w_v / sum,
        })
    }

    pub fn p_h(&self) -> f64 {
        self.p_h
    }

    pub fn p_v(&self) -> f64 {
        self.p_v
    }
}

/// Classical fidelity `F(p, q) = (Σ_i sqrt(p_i q_i))²`: 1 for identical,
/// 1/2 for uncorrelated, 0 for anti-correlated distributions.
pub fn classical_fidelity(p: &BinaryDistribution, q: &BinaryDistribution) -> f64 {
    let overlap = (p.p_h * q.p_h).sqrt() + (p.p_v * q.p_v).sqrt();
    overlap * overlap
}

/// Criterion 1 — the meter reads out the input: `F(p_in, p_m)`.
pub fn measurement_fidelity(p_in: &BinaryDistribution, p_m: &BinaryDistribution) -> f64 {
    classical_fidelity(p_in, p_m)
}

/// Criterion 2 — the signal survives undisturbed: `F(p_in, p_out)`.
pub fn qnd_fidelity(p_in: &BinaryDistribution, p_out: &BinaryDistribution) -> f64 {
    classical_fidelity(p_in, p_out)
}

/// Criterion 3 — the heralded output matches the meter outcome. For this
/// scheme it reduces to `P_HH + P_VV`; also known as the likelihood.
pub fn qsp_fidelity(joint: &JointDistribution) -> f64 {
    joint.p_hh + joint.p_vv
}

/// The general conditional form `Σ_i p_i^m · p_i^out|i`; equals
/// [`qsp_fidelity`] whenever the joint distribution is consistent.
pub fn qsp_fidelity_conditional(joint: &JointDistribution) -> f64 {
    let (m_h, m_v) = joint.meter_marginal();
    let mut total = 0.0;
    if m_h > 0.0 {
        total += m_h * (joint.p_hh / m_h);
    }
    if m_v > 0.0 {
        total += m_v * (joint.p_vv / m_v);
    }
    total
}

/// Signal-meter correlation `P_HH + P_VV − P_HV − P_VH`, computed through the
/// qubit identity `K = 2L − 1` so the identity holds exactly.
pub fn knowledge(joint: &JointDistribution) -> f64 {
    2.0 * qsp_fidelity(joint) - 1.0
}

/// Checks `K² + V² ≤ 1`, returning the sum and the verdict.
pub fn complementarity_check(k: f64, v: f64) -> (f64, bool) {
    let sum = k * k + v * v;
    (sum, sum <= 1.0 + COMPLEMENTARITY_TOL)
}

/// How the input distribution is inferred when success probabilities depend
/// on the input state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputDistMode {
    /// Reweight the input populations by the eigenstate success
    /// probabilities; this is what coincidence counting actually samples.
    /// With balanced loss the reweighting is uniform and this reduces to
    /// [`InputDistMode::Raw`].
    SuccessWeighted,
    /// Use the bare input populations.
    Raw,
}

/// The full characterization of one input state.
#[derive(Debug, Clone)]
pub struct InputReport {
    pub input: String,
    pub joint: JointDistribution,
    pub p_in: BinaryDistribution,
    pub p_m: BinaryDistribution,
    pub p_out: BinaryDistribution,
    pub f_m: f64,
    pub f_qnd: f64,
    pub f_qsp: f64,
    pub k: f64,
}

/// Runs the circuit for one input and assembles all three distributions and
/// the derived measures.
pub fn input_report(
    label: &str,
    signal: &PolarizationQubit,
    meter: &PolarizationQubit,
    config: &CircuitConfig,
    mode: InputDistMode,
) -> Result<InputReport, CircuitError> {
    let outcome = circuit::run(signal, meter, config)?;
    if outcome.success_probability <= 0.0 {
        return Err(CircuitError::NoSuccessBranch);
    }
    let comp = AnalyzerBasis::computational();
    let joint = circuit::success_joint_distribution(&outcome, &comp, &comp)?;

    let (in_h, in_v) = signal.populations();
    let p_in = match mode {
        InputDistMode::Raw => BinaryDistribution::from_weights(in_h, in_v),
        InputDistMode::SuccessWeighted => {
            let p_h = circuit::run(&PolarizationQubit::horizontal(), meter, config)?
                .success_probability;
            let p_v = circuit::run(&PolarizationQubit::vertical(), meter, config)?
                .success_probability;
            BinaryDistribution::from_weights(in_h * p_h, in_v * p_v)
        }
    }
    .map_err(|e| CircuitError::InvalidJoint {
        reason: e.to_string(),
    })?;

    let (m_h, m_v) = joint.meter_marginal();
    let (out_h, out_v) = joint.signal_marginal();
    let p_m = BinaryDistribution::new(m_h, m_v).map_err(|e| CircuitError::InvalidJoint {
        reason: e.to_string(),
    })?;
    let p_out = BinaryDistribution::new(out_h, out_v).map_err(|e| CircuitError::InvalidJoint {
        reason: e.to_string(),
    })?;

    Ok(InputReport {
        input: label.to_string(),
        joint,
        p_in,
        p_m,
        p_out,
        f_m: measurement_fidelity(&p_in, &p_m),
        f_qnd: qnd_fidelity(&p_in, &p_out),
        f_qsp: qsp_fidelity(&joint),
        k: knowledge(&joint),
    })
}

impl InputReport {
    /// Per-input JSON block at 12 significant digits.
    pub fn to_json_value(&self) -> serde_json::Value {
        let dist = |d: &BinaryDistribution| {
            json!({ "p_h": round_sig(d.p_h(), 12), "p_v": round_sig(d.p_v(), 12) })
        };
        json!({
            "input": self.input,
            "joint": {
                "p_hh": round_sig(self.joint.p_hh, 12),
                "p_hv": round_sig(self.joint.p_hv, 12),
                "p_vh": round_sig(self.joint.p_vh, 12),
                "p_vv": round_sig(self.joint.p_vv, 12),
            },
            "p_in": dist(&self.p_in),
            "p_m": dist(&self.p_m),
            "p_out": dist(&self.p_out),
            "F_M": round_sig(self.f_m, 12),
            "F_QND": round_sig(self.f_qnd, 12),
            "F_QSP": round_sig(self.f_qsp, 12),
            "K": round_sig(self.k, 12),
        })
    }
}

/// The six-input characterization table.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub inputs: Vec<InputReport>,
    pub f_qsp_average: f64,
}

impl MetricsReport {
    pub fn new(inputs: Vec<InputReport>) -> Self {
        let f_qsp_average = if inputs.is_empty() {
            0.0
        } else {
            inputs.iter().map(|r| r.f_qsp).sum::<f64>() / inputs.len() as f64
        };
        Self {
            inputs,
            f_qsp_average,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        json!({
            "inputs": self.inputs.iter().map(|r| r.to_json_value()).collect::<Vec<_>>(),
            "f_qsp_average": round_sig(self.f_qsp_average, 12),
        })
    }
}
