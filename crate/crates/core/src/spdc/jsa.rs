use std::f64::consts::{LN_2, PI};
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sellmeier::SellmeierSet;
use crate::error::{Error, Result};
use crate::grid::{nm_to_omega, nm_width_to_omega, FrequencyGrid, SPEED_OF_LIGHT};

/// Slack allowed when checking that the grid spans the degenerate wavelength.
const DEGENERACY_TOLERANCE_NM: f64 = 0.5;

/// Gaussian pump spectrum. `fwhm_nm` is the intensity FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpEnvelope {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl PumpEnvelope {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Result<Self> {
        if !(center_nm > 0.0 && fwhm_nm > 0.0) {
            return Err(Error::Configuration(format!(
                "pump needs positive centre and width, got {center_nm} nm / {fwhm_nm} nm"
            )));
        }
        Ok(Self { center_nm, fwhm_nm })
    }

    pub fn center_omega(&self) -> f64 {
        nm_to_omega(self.center_nm)
    }

    /// Field amplitude at pump frequency `omega`; `|α|²` has the configured FWHM.
    pub fn amplitude(&self, omega: f64) -> f64 {
        let width = nm_width_to_omega(self.center_nm, self.fwhm_nm);
        let d = omega - self.center_omega();
        (-2.0 * LN_2 * d * d / (width * width)).exp()
    }
}

impl Default for PumpEnvelope {
    fn default() -> Self {
        Self {
            center_nm: 397.5,
            fwhm_nm: 0.7,
        }
    }
}

/// Extra wave-vector mismatch contributed by the guiding structure.
///
/// Bulk Sellmeier data does not reproduce the measured optimum temperature of
/// a waveguide. `Auto` adds the constant that cancels the mismatch at the
/// degenerate point, i.e. it treats the configured temperature as the
/// phase-matching optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MismatchOffset {
    #[default]
    Auto,
    None,
    /// Fixed offset in rad/m.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchingSpec {
    pub poling_period_um: f64,
    pub interaction_length_mm: f64,
    pub temperature_c: f64,
    pub sellmeier_set: SellmeierSet,
    #[serde(default)]
    pub offset: MismatchOffset,
    /// Test hook: replace the phase-matching function by 1 everywhere.
    #[serde(default)]
    pub force_zero_mismatch: bool,
}

impl PhaseMatchingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.poling_period_um > 0.0 && self.interaction_length_mm > 0.0) {
            return Err(Error::Configuration(format!(
                "poling period ({} um) and length ({} mm) must be positive",
                self.poling_period_um, self.interaction_length_mm
            )));
        }
        if !self.temperature_c.is_finite() {
            return Err(Error::Configuration("temperature must be finite".into()));
        }
        Ok(())
    }

    /// `k(ω) = n(λ, T) ω / c`.
    pub fn wavevector(&self, omega: f64) -> f64 {
        let lambda_um = 2.0 * PI * SPEED_OF_LIGHT / omega * 1e6;
        self.sellmeier_set.index(lambda_um, self.temperature_c) * omega / SPEED_OF_LIGHT
    }

    fn grating_vector(&self) -> f64 {
        2.0 * PI / (self.poling_period_um * 1e-6)
    }

    /// Bulk mismatch `k(ωs+ωi) − k(ωs) − k(ωi) − 2π/Λ` before any offset.
    pub fn bulk_mismatch(&self, omega_s: f64, omega_i: f64) -> f64 {
        self.wavevector(omega_s + omega_i)
            - self.wavevector(omega_s)
            - self.wavevector(omega_i)
            - self.grating_vector()
    }

    /// Offset actually applied for a pump centred at `pump_omega`.
    pub fn resolved_offset(&self, pump_omega: f64) -> f64 {
        match self.offset {
            MismatchOffset::Auto => {
                let half = 0.5 * pump_omega;
                -self.bulk_mismatch(half, half)
            }
            MismatchOffset::None => 0.0,
            MismatchOffset::Fixed(dk) => dk,
        }
    }
}

impl Default for PhaseMatchingSpec {
    fn default() -> Self {
        Self {
            poling_period_um: 3.19,
            interaction_length_mm: 1.0,
            temperature_c: 89.1,
            sellmeier_set: SellmeierSet::default(),
            offset: MismatchOffset::Auto,
            force_zero_mismatch: false,
        }
    }
}

/// Two-photon amplitude `A(ωs, ωi)` sampled on a square grid, rows = signal.
#[derive(Debug, Clone)]
pub struct JointSpectralAmplitude {
    pub grid: FrequencyGrid,
    pub amplitude: DMatrix<Complex64>,
    /// Provenance of the dispersion data, `"none"` for hand-built amplitudes.
    pub sellmeier: String,
    /// Mismatch offset that was applied, rad/m.
    pub mismatch_offset: f64,
}

impl JointSpectralAmplitude {
    /// Wraps an arbitrary amplitude matrix and normalizes it.
    pub fn from_matrix(grid: FrequencyGrid, amplitude: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.n_points();
        if amplitude.shape() != (n, n) {
            return Err(Error::InvalidParameter(format!(
                "amplitude is {:?}, grid has {n} points",
                amplitude.shape()
            )));
        }
        let mut jsa = Self {
            grid,
            amplitude,
            sellmeier: "none".into(),
            mismatch_offset: 0.0,
        };
        jsa.normalize()?;
        Ok(jsa)
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.amplitude.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical(format!("amplitude has norm {norm}")));
        }
        self.amplitude /= Complex64::new(norm, 0.0);
        Ok(())
    }

    /// `max |A(ωs, ωi) − A(ωi, ωs)|`.
    pub fn exchange_asymmetry(&self) -> f64 {
        let a = &self.amplitude;
        let n = a.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((a[(i, j)] - a[(j, i)]).norm());
            }
        }
        worst
    }

    /// Writes `omega_s,omega_i,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega_s", "omega_i", "re", "im"])?;
        let omegas = self.grid.omegas();
        for (i, ws) in omegas.iter().enumerate() {
            for (j, wi) in omegas.iter().enumerate() {
                let a = self.amplitude[(i, j)];
                w.serialize((ws, wi, a.re, a.im))?;
            }
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}

/// Pump envelope times first-order quasi-phase-matching sinc, normalized to
/// unit Frobenius norm.
pub fn compute_jsa(
    pump: &PumpEnvelope,
    pm: &PhaseMatchingSpec,
    grid: &FrequencyGrid,
) -> Result<JointSpectralAmplitude> {
    pm.validate()?;
    let degenerate_nm = 2.0 * pump.center_nm;
    let covered = degenerate_nm >= grid.lambda_min_nm() - DEGENERACY_TOLERANCE_NM
        && degenerate_nm <= grid.lambda_max_nm() + DEGENERACY_TOLERANCE_NM;
    if !covered {
        return Err(Error::Configuration(format!(
            "grid [{}, {}] nm does not resolve the degenerate wavelength {degenerate_nm} nm",
            grid.lambda_min_nm(),
            grid.lambda_max_nm()
        )));
    }

    let n = grid.n_points();
    let omegas = grid.omegas();
    let offset = pm.resolved_offset(pump.center_omega());
    let half_length = 0.5 * pm.interaction_length_mm * 1e-3;
    let k_single: Vec<f64> = omegas.iter().map(|&w| pm.wavevector(w)).collect();
    // ωs + ωi only takes 2n − 1 distinct values on a uniform grid
    let sums: Vec<f64> = (0..2 * n - 1)
        .map(|s| 2.0 * grid.omega_min() + s as f64 * grid.spacing())
        .collect();
    let k_pump: Vec<f64> = sums.iter().map(|&w| pm.wavevector(w)).collect();
    let alpha: Vec<f64> = sums.iter().map(|&w| pump.amplitude(w)).collect();
    let grating = pm.grating_vector();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let phase_matching = if pm.force_zero_mismatch {
                        1.0
                    } else {
                        let dk = k_pump[i + j] - k_single[i] - k_single[j] - grating + offset;
                        sinc(dk * half_length)
                    };
                    alpha[i + j] * phase_matching
                })
                .collect()
        })
        .collect();
    let amplitude = DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0));

    let mut jsa = JointSpectralAmplitude {
        grid: *grid,
        amplitude,
        sellmeier: pm.sellmeier_set.provenance(),
        mismatch_offset: offset,
    };
    jsa.normalize()?;
    Ok(jsa)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}
