use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn nm_to_omega(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * 1e-9)
}

pub fn omega_to_nm(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e9
}

/// Angular-frequency width of a wavelength interval `fwhm_nm` centred on `center_nm`.
pub fn nm_width_to_omega(center_nm: f64, fwhm_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * fwhm_nm * 1e-9 / (center_nm * 1e-9).powi(2)
}

/// Uniform sampling in angular frequency between two wavelengths.
///
/// Point 0 is the lowest frequency (longest wavelength, `lambda_max`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n_points: usize,
    lambda_min_nm: f64,
    lambda_max_nm: f64,
}

impl FrequencyGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(lambda_min_nm: f64, lambda_max_nm: f64, n_points: usize) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::Configuration(format!(
                "frequency grid needs at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        if !(lambda_min_nm > 0.0 && lambda_min_nm < lambda_max_nm && lambda_max_nm.is_finite()) {
            return Err(Error::Configuration(format!(
                "invalid wavelength span [{lambda_min_nm}, {lambda_max_nm}] nm"
            )));
        }
        Ok(Self {
            n_points,
            lambda_min_nm,
            lambda_max_nm,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn lambda_min_nm(&self) -> f64 {
        self.lambda_min_nm
    }

    pub fn lambda_max_nm(&self) -> f64 {
        self.lambda_max_nm
    }

    pub fn omega_min(&self) -> f64 {
        nm_to_omega(self.lambda_max_nm)
    }

    pub fn omega_max(&self) -> f64 {
        nm_to_omega(self.lambda_min_nm)
    }

    /// Spacing between neighbouring points, rad/s. Also the quadrature weight.
    pub fn spacing(&self) -> f64 {
        (self.omega_max() - self.omega_min()) / (self.n_points - 1) as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.omega_min() + i as f64 * self.spacing()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.omega(i)).collect()
    }

    pub fn wavelength_nm(&self, i: usize) -> f64 {
        omega_to_nm(self.omega(i))
    }

    pub fn wavelengths_nm(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.wavelength_nm(i)).collect()
    }

    /// Index of the grid point closest to `omega`, if it lies inside the grid.
    pub fn nearest_index(&self, omega: f64) -> Option<usize> {
        let half = 0.5 * self.spacing();
        if omega < self.omega_min() - half || omega > self.omega_max() + half {
            return None;
        }
        let k = ((omega - self.omega_min()) / self.spacing()).round();
        Some((k.max(0.0) as usize).min(self.n_points - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_increasing_in_frequency() {
        let g = FrequencyGrid::new(695.0, 895.0, 64).unwrap();
        let w = g.omegas();
        assert!(w.windows(2).all(|p| p[1] > p[0]));
        assert!((g.wavelength_nm(0) - 895.0).abs() < 1e-9);
        assert!((g.wavelength_nm(63) - 695.0).abs() < 1e-9);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(FrequencyGrid::new(695.0, 895.0, 15).is_err());
        assert!(FrequencyGrid::new(895.0, 695.0, 64).is_err());
        assert!(FrequencyGrid::new(-1.0, 695.0, 64).is_err());
    }

    #[test]
    fn nearest_index_bounds() {
        let g = FrequencyGrid::new(700.0, 900.0, 32).unwrap();
        assert_eq!(g.nearest_index(g.omega(5) + 0.3 * g.spacing()), Some(5));
        assert_eq!(g.nearest_index(nm_to_omega(1000.0)), None);
    }
}
