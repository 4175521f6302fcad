//! Mode transforms for the optical elements of the measurement circuit.
//!
//! Every element lowers to a small unitary acting on a subset of modes. Loss
//! is never represented by a sub-unitary matrix; it is dilated to a beam
//! splitter coupling the lossy mode to a fresh vacuum ancilla, so heralding
//! "no photon lost" is an ordinary projection.

use num_complex::Complex64;
use thiserror::Error;

/// Unitarity is enforced at construction to this tolerance.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ElementError {
    #[error("{name} = {value} is outside [0, 1]")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("matrix must be square and non-empty")]
    BadShape,
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
}

/// A unitary acting on `dim` optical modes, stored row-major.
///
/// Applied to states as the substitution on creation operators
/// `a†_j -> Σ_k u[k][j] a†_k`: column `j` is the image of input mode `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ModeTransform {
    /// Validates unitarity; rejects non-square or empty input.
    pub fn new(rows: Vec<Vec<Complex64>>) -> Result<Self, ElementError> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(ElementError::BadShape);
        }
        let entries: Vec<Complex64> = rows.into_iter().flatten().collect();
        let t = Self { dim, entries };
        let deviation = t.unitarity_deviation();
        if deviation > UNITARITY_TOL {
            return Err(ElementError::NotUnitary { deviation });
        }
        Ok(t)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// The single transform equivalent to applying `self` first, `later` second.
    pub fn then(&self, later: &ModeTransform) -> Result<Self, ElementError> {
        if later.dim != self.dim {
            return Err(ElementError::BadShape);
        }
        let dim = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..dim {
                    acc += later.entry(r, k) * self.entry(k, c);
                }
                entries[r * dim + c] = acc;
            }
        }
        Ok(Self { dim, entries })
    }

    /// Max-norm deviation of `U U†` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.dim {
                    acc += self.entry(r, k) * self.entry(c, k).conj();
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), ElementError> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(ElementError::ParameterOutOfRange { name, value });
    }
    Ok(())
}

/// Beam splitter of reflectivity `eta` on a (signal-side, meter-side) pair:
/// `[[-sqrt(eta), sqrt(1-eta)], [sqrt(1-eta), sqrt(eta)]]`.
/// The reflected signal-side amplitude carries the minus sign.
pub fn beam_splitter(eta: f64) -> Result<ModeTransform, ElementError> {
    check_fraction("eta", eta)?;
    let r = eta.sqrt();
    let t = (1.0 - eta).sqrt();
    Ok(real2(&[[-r, t], [t, r]]))
}

/// Half-wave plate with fast axis at `theta` (radians) on an (H, V) pair:
/// `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`.
pub fn half_wave_plate(theta: f64) -> ModeTransform {
    let c = (2.0 * theta).cos();
    let s = (2.0 * theta).sin();
    real2(&[[c, s], [s, -c]])
}

/// Quarter-wave plate with fast axis at `theta` (radians); the slow component
/// picks up the phase `i`, global phase dropped.
pub fn quarter_wave_plate(theta: f64) -> ModeTransform {
    let c = theta.cos();
    let s = theta.sin();
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let off = (one - i) * c * s;
    let rows = vec![
        vec![one * c * c + i * s * s, off],
        vec![off, one * s * s + i * c * c],
    ];
    ModeTransform::new(rows).expect("wave plate matrices are unitary")
}

/// Loss of the given `fraction`, dilated to a beam splitter coupling the lossy
/// mode (first) to a fresh vacuum ancilla (second). The surviving amplitude is
/// `sqrt(1 - fraction)`; heralding on an empty ancilla keeps that branch.
pub fn loss_channel(fraction: f64) -> Result<ModeTransform, ElementError> {
    check_fraction("loss fraction", fraction)?;
    let keep = (1.0 - fraction).sqrt();
    let leak = fraction.sqrt();
    Ok(real2(&[[keep, leak], [leak, -keep]]))
}

fn real2(m: &[[f64; 2]; 2]) -> ModeTransform {
    let rows = m
        .iter()
        .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
        .collect();
    ModeTransform::new(rows).expect("2x2 element matrices are unitary")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn assert_c(actual: Complex64, re: f64, im: f64) {
        assert!(
            (actual.re - re).abs() < TOL && (actual.im - im).abs() < TOL,
            "expected {re}+{im}i, got {actual}"
        );
    }

    #[test]
    fn beam_splitter_one_third() {
        let bs = beam_splitter(1.0 / 3.0).unwrap();
        let r = (1.0f64 / 3.0).sqrt(); // 0.57735...
        let t = (2.0f64 / 3.0).sqrt(); // 0.81650...
        assert_c(bs.entry(0, 0), -r, 0.0);
        assert_c(bs.entry(0, 1), t, 0.0);
        assert_c(bs.entry(1, 0), t, 0.0);
        assert_c(bs.entry(1, 1), r, 0.0);
    }

    #[test]
    fn beam_splitter_limits() {
        let mirror = beam_splitter(1.0).unwrap();
        assert_c(mirror.entry(0, 0), -1.0, 0.0);
        assert_c(mirror.entry(1, 1), 1.0, 0.0);
        assert_c(mirror.entry(0, 1), 0.0, 0.0);

        let swap = beam_splitter(0.0).unwrap();
        assert_c(swap.entry(0, 0), 0.0, 0.0);
        assert_c(swap.entry(0, 1), 1.0, 0.0);
        assert_c(swap.entry(1, 0), 1.0, 0.0);
        assert_c(swap.entry(1, 1), 0.0, 0.0);
    }

    #[test]
    fn beam_splitter_rejects_out_of_range() {
        assert!(matches!(
            beam_splitter(-0.1),
            Err(ElementError::ParameterOutOfRange { .. })
        ));
        assert!(beam_splitter(1.1).is_err());
        assert!(beam_splitter(f64::NAN).is_err());
    }

    #[test]
    fn beam_splitter_columns_normalized_on_grid() {
        for k in 0..=100 {
            let eta = k as f64 / 100.0;
            let bs = beam_splitter(eta).unwrap();
            for col in 0..2 {
                let norm: f64 = (0..2).map(|row| bs.entry(row, col).norm_sqr()).sum();
                assert!((norm - 1.0).abs() < TOL);
            }
            assert!(bs.unitarity_deviation() < TOL);
        }
    }

    #[test]
    fn half_wave_plate_principal_angles() {
        let hwp0 = half_wave_plate(0.0);
        assert_c(hwp0.entry(0, 0), 1.0, 0.0);
        assert_c(hwp0.entry(1, 1), -1.0, 0.0);

        let hwp45 = half_wave_plate(45f64.to_radians());
        assert_c(hwp45.entry(0, 0), 0.0, 0.0);
        assert_c(hwp45.entry(0, 1), 1.0, 0.0);
        assert_c(hwp45.entry(1, 0), 1.0, 0.0);
        assert_c(hwp45.entry(1, 1), 0.0, 0.0);
    }

    #[test]
    fn half_wave_plate_at_22_5_maps_diagonal_to_h() {
        // (|H> + |V>)/sqrt(2) lands on the first port; the circuit's detector
        // labeling then reports that port as outcome V.
        let hwp = half_wave_plate(22.5f64.to_radians());
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let out_h = hwp.entry(0, 0) * inv + hwp.entry(0, 1) * inv;
        let out_v = hwp.entry(1, 0) * inv + hwp.entry(1, 1) * inv;
        assert_c(out_h, 1.0, 0.0);
        assert_c(out_v, 0.0, 0.0);
    }

    #[test]
    fn half_wave_plate_is_involutive_on_grid() {
        for k in 0..=72 {
            let theta = k as f64 * 5f64.to_radians();
            let hwp = half_wave_plate(theta);
            let twice = hwp.then(&hwp).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((twice.entry(r, c) - expect).norm() < TOL);
                }
            }
        }
    }

    #[test]
    fn quarter_wave_plate_at_zero_is_diag_1_i() {
        let qwp = quarter_wave_plate(0.0);
        assert_c(qwp.entry(0, 0), 1.0, 0.0);
        assert_c(qwp.entry(0, 1), 0.0, 0.0);
        assert_c(qwp.entry(1, 0), 0.0, 0.0);
        assert_c(qwp.entry(1, 1), 0.0, 1.0);
    }

    #[test]
    fn quarter_wave_plate_at_45_linearizes_circular() {
        // (|H> - i|V>)/sqrt(2) exits in a single linear port.
        let qwp = quarter_wave_plate(45f64.to_radians());
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let minus_i = Complex64::new(0.0, -1.0);
        let out_h = qwp.entry(0, 0) * inv + qwp.entry(0, 1) * minus_i * inv;
        let out_v = qwp.entry(1, 0) * inv + qwp.entry(1, 1) * minus_i * inv;
        assert!(out_h.norm() < TOL);
        assert!((out_v.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn two_quarter_wave_plates_make_a_half_wave_plate() {
        for k in 0..=36 {
            let theta = k as f64 * 5f64.to_radians();
            let qwp = quarter_wave_plate(theta);
            let twice = qwp.then(&qwp).unwrap();
            let hwp = half_wave_plate(theta);
            // strip the global phase by aligning on the largest entry
            let mut phase = Complex64::new(1.0, 0.0);
            'outer: for r in 0..2 {
                for c in 0..2 {
                    if hwp.entry(r, c).norm() > 0.5 {
                        phase = twice.entry(r, c) / hwp.entry(r, c);
                        break 'outer;
                    }
                }
            }
            assert!((phase.norm() - 1.0).abs() < TOL);
            for r in 0..2 {
                for c in 0..2 {
                    assert!((twice.entry(r, c) - phase * hwp.entry(r, c)).norm() < TOL);
                }
            }
        }
    }

    #[test]
    fn loss_channel_survival_amplitude() {
        let loss = loss_channel(2.0 / 3.0).unwrap();
        assert_c(loss.entry(0, 0), (1.0f64 / 3.0).sqrt(), 0.0);
        assert_c(loss.entry(1, 0), (2.0f64 / 3.0).sqrt(), 0.0);
    }

    #[test]
    fn loss_channel_limits() {
        // fraction 0: identity on the signal mode (the ancilla stays in vacuum,
        // so its -1 is unobservable)
        let none = loss_channel(0.0).unwrap();
        assert_c(none.entry(0, 0), 1.0, 0.0);
        assert_c(none.entry(0, 1), 0.0, 0.0);

        // fraction 1: the photon always ends up in the ancilla
        let all = loss_channel(1.0).unwrap();
        assert_c(all.entry(0, 0), 0.0, 0.0);
        assert_c(all.entry(1, 0), 1.0, 0.0);

        assert!(loss_channel(1.5).is_err());
    }

    #[test]
    fn loss_channel_heralded_survival_probability() {
        use crate::fock::{ModeConstraint, PureState};
        for k in 0..=20 {
            let fraction = k as f64 / 20.0;
            let branch = PureState::single_photon(2, 0)
                .unwrap()
                .apply(&loss_channel(fraction).unwrap(), &[0, 1])
                .unwrap()
                .project(&[ModeConstraint::Any, ModeConstraint::Exactly(0)])
                .unwrap();
            assert!((branch.probability - (1.0 - fraction)).abs() < TOL);
        }
    }

    #[test]
    fn factories_are_unitary_on_grid() {
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert!(beam_splitter(x).unwrap().unitarity_deviation() < TOL);
            assert!(loss_channel(x).unwrap().unitarity_deviation() < TOL);
            let theta = (x * 360.0).to_radians();
            assert!(half_wave_plate(theta).unitarity_deviation() < TOL);
            assert!(quarter_wave_plate(theta).unitarity_deviation() < TOL);
        }
    }

    #[test]
    fn non_unitary_matrix_rejected() {
        let rows = vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
        assert!(matches!(
            ModeTransform::new(rows),
            Err(ElementError::NotUnitary { .. })
        ));
    }
}
