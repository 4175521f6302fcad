//! Shared fixtures for the integration suites: seeded randomness and
//! Gram-Schmidt random unitaries so every run is reproducible.

use num_complex::Complex64;
use qnd::circuit::PolarizationQubit;
use qnd::elements::ModeTransform;
use qnd::fock::PureState;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_qubit(rng: &mut ChaCha8Rng) -> PolarizationQubit {
    loop {
        let h = random_complex(rng);
        let v = random_complex(rng);
        if h.norm_sqr() + v.norm_sqr() > 1e-3 {
            return PolarizationQubit::normalized(h, v).unwrap();
        }
    }
}

/// Haar-ish random unitary from Gram-Schmidt on random complex columns.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> ModeTransform {
    'resample: loop {
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut col: Vec<Complex64> = (0..dim).map(|_| random_complex(rng)).collect();
            for prev in &cols {
                let overlap: Complex64 = prev
                    .iter()
                    .zip(&col)
                    .map(|(p, c)| p.conj() * c)
                    .sum();
                for (c, p) in col.iter_mut().zip(prev) {
                    *c -= overlap * p;
                }
            }
            let norm: f64 = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue 'resample;
            }
            for c in col.iter_mut() {
                *c /= norm;
            }
            cols.push(col);
        }
        let rows: Vec<Vec<Complex64>> = (0..dim)
            .map(|r| (0..dim).map(|c| cols[c][r]).collect())
            .collect();
        return ModeTransform::new(rows).expect("Gram-Schmidt output is unitary");
    }
}

/// Random normalized state with exactly two photons over `modes` modes.
pub fn random_two_photon_state(rng: &mut ChaCha8Rng, modes: usize) -> PureState {
    let mut terms = Vec::new();
    for i in 0..modes {
        for j in i..modes {
            let mut counts = vec![0u8; modes];
            counts[i] += 1;
            counts[j] += 1;
            terms.push((counts, random_complex(rng)));
        }
    }
    PureState::from_terms(modes, 2, terms)
        .unwrap()
        .normalized()
        .unwrap()
}
