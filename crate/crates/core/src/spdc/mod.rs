//! Type-0 quasi-phase-matched SPDC source: joint spectral amplitude,
//! Schmidt decomposition and the supermode squeezing spectrum.

mod jsa;
mod schmidt;
pub mod sellmeier;

pub use jsa::{
    compute_jsa, JointSpectralAmplitude, MismatchOffset, PhaseMatchingSpec, PumpEnvelope,
};
pub use schmidt::{
    decompose_svd, schmidt_decompose, schmidt_number, DecompositionMethod, SchmidtDecomposition,
    SchmidtJson,
};
pub use sellmeier::SellmeierSet;

use crate::error::{Error, Result};

const GAIN_BRACKET: (f64, f64) = (0.0, 10.0);

/// Squeezing parameters `r_j = gain · λ_j` of the first `n_modes` supermodes.
pub fn squeezing_spectrum(
    dec: &SchmidtDecomposition,
    gain: f64,
    n_modes: usize,
) -> Result<Vec<f64>> {
    if !(gain >= 0.0) || !gain.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gain {gain} must be finite and non-negative"
        )));
    }
    if n_modes > dec.lambdas.len() {
        return Err(Error::InvalidParameter(format!(
            "asked for {n_modes} modes, decomposition has {} non-zero coefficients",
            dec.lambdas.len()
        )));
    }
    Ok(dec.lambdas[..n_modes].iter().map(|l| gain * l).collect())
}

/// Like [`squeezing_spectrum`] but with the sign of each mode's squeezed
/// quadrature folded in (`r < 0` squeezes `p`). Requires the modes to have
/// real orientation (`θ ∈ {0, π}`).
pub fn signed_squeezing(dec: &SchmidtDecomposition, gain: f64, n_modes: usize) -> Result<Vec<f64>> {
    if n_modes > dec.modes.n_modes() {
        return Err(Error::InvalidParameter(format!(
            "asked for {n_modes} signed modes, decomposition kept {}",
            dec.modes.n_modes()
        )));
    }
    let r = squeezing_spectrum(dec, gain, n_modes)?;
    r.iter()
        .zip(&dec.orientation)
        .map(|(r, theta)| {
            let c = theta.cos();
            if (c.abs() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "mode orientation {theta} is not a quadrature axis"
                )));
            }
            Ok(r * c.signum())
        })
        .collect()
}

/// Mode-0 squeezing in dB after a loss channel of transmission `eta`.
pub fn lossy_squeezing_db(r: f64, eta: f64) -> f64 {
    10.0 * (eta * (-2.0 * r).exp() + 1.0 - eta).log10()
}

/// Gain that brings the leading supermode to `target_db` after loss `eta`.
pub fn calibrate_gain(dec: &SchmidtDecomposition, target_db: f64, eta: f64) -> Result<f64> {
    if !(target_db < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target {target_db} dB must be negative"
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "transmission {eta} outside (0, 1]"
        )));
    }
    let floor_db = 10.0 * (1.0 - eta).log10();
    if target_db <= floor_db {
        return Err(Error::InfeasibleTarget {
            target_db,
            floor_db,
        });
    }
    let lambda1 = dec.lambdas[0];
    let f = |g: f64| lossy_squeezing_db(g * lambda1, eta) - target_db;
    let (mut lo, mut hi) = GAIN_BRACKET;
    // tiny lambda1 can push the root past the default bracket
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InfeasibleTarget {
                target_db,
                floor_db,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn toy() -> SchmidtDecomposition {
        let g = FrequencyGrid::new(700.0, 900.0, 16).unwrap();
        let mut a = DMatrix::<Complex64>::zeros(16, 16);
        a[(0, 0)] = Complex64::new(0.8, 0.0);
        a[(1, 1)] = Complex64::new(-0.6, 0.0);
        schmidt_decompose(&JointSpectralAmplitude::from_matrix(g, a).unwrap(), 2).unwrap()
    }

    #[test]
    fn zero_gain_means_no_squeezing() {
        assert_eq!(squeezing_spectrum(&toy(), 0.0, 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn spectrum_is_linear_in_gain() {
        let dec = toy();
        let a = squeezing_spectrum(&dec, 0.3, 2).unwrap();
        let b = squeezing_spectrum(&dec, 0.6, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-15);
        }
        assert!(squeezing_spectrum(&dec, -1.0, 2).is_err());
    }

    #[test]
    fn signs_follow_eigenvalue_sign() {
        let r = signed_squeezing(&toy(), 1.0, 2).unwrap();
        assert!((r[0] - 0.8).abs() < 1e-12);
        assert!((r[1] + 0.6).abs() < 1e-12);
    }

    #[test]
    fn lossless_closed_form() {
        let dec = toy();
        let g = calibrate_gain(&dec, -3.0, 1.0).unwrap();
        let closed = -(10f64.powf(-3.0 / 20.0)).ln() / dec.lambdas[0];
        assert!((g - closed).abs() < 1e-10);
    }

    #[test]
    fn lossy_target_reached_by_bisection() {
        let dec = toy();
        let g = calibrate_gain(&dec, -0.47, 0.7).unwrap();
        assert!((lossy_squeezing_db(g * dec.lambdas[0], 0.7) + 0.47).abs() < 1e-6);
    }

    #[test]
    fn unreachable_target() {
        let err = calibrate_gain(&toy(), -20.0, 0.7).unwrap_err();
        match err {
            Error::InfeasibleTarget { floor_db, .. } => {
                assert!((floor_db - 10.0 * 0.3f64.log10()).abs() < 1e-12)
            }
            other => panic!("unexpected {other}"),
        }
        assert!((10.0 * 0.3f64.log10() + 5.23).abs() < 0.01);
    }
}
