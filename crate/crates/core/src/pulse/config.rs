use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synthesized homodyne photocurrent settings.
///
/// A record is `duration_pulses` periods long. The first `vacuum_pulses`
/// periods are a shot-noise calibration segment (squeezed light blocked);
/// the rest carry the phase-swept signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseTrainConfig {
    pub rep_rate_hz: f64,
    pub samples_per_pulse: usize,
    /// Single-pole detector cutoff; `None` is an ideal detector.
    pub detector_bandwidth_hz: Option<f64>,
    /// Electronic noise floor below the shot noise of a full-period
    /// integration, dB; `None` disables electronic noise.
    pub electronic_clearance_db: Option<f64>,
    /// Classical LO noise leaking through the subtraction; `None` is perfect.
    pub cmrr_db: Option<f64>,
    /// Period of the triangular LO phase sweep over `[0, π]`.
    pub piezo_period_pulses: usize,
    pub duration_pulses: usize,
    pub vacuum_pulses: usize,
    /// Width of the rectangular optical pulse before the detector, samples.
    pub pulse_width_samples: usize,
    /// Variance of the optional 1/f contamination added to every pulse.
    pub flicker_variance: Option<f64>,
    pub seed: u64,
}

impl Default for PulseTrainConfig {
    fn default() -> Self {
        Self {
            rep_rate_hz: 156e6,
            samples_per_pulse: 64,
            detector_bandwidth_hz: Some(300e6),
            electronic_clearance_db: Some(10.0),
            cmrr_db: Some(64.0),
            piezo_period_pulses: 20_000,
            duration_pulses: 100_000,
            vacuum_pulses: 20_000,
            pulse_width_samples: 1,
            flicker_variance: None,
            seed: 2024,
        }
    }
}

impl PulseTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_hz > 0.0) || !self.rep_rate_hz.is_finite() {
            return Err(Error::Configuration(format!(
                "rep rate {} Hz must be positive",
                self.rep_rate_hz
            )));
        }
        if self.samples_per_pulse < 4 {
            return Err(Error::Configuration(format!(
                "need at least 4 samples per pulse, got {}",
                self.samples_per_pulse
            )));
        }
        if self.duration_pulses < 1 {
            return Err(Error::Configuration(
                "record must contain at least one pulse".into(),
            ));
        }
        if self.vacuum_pulses > self.duration_pulses {
            return Err(Error::Configuration(format!(
                "vacuum segment ({}) longer than the record ({})",
                self.vacuum_pulses, self.duration_pulses
            )));
        }
        if let Some(bw) = self.detector_bandwidth_hz {
            if !(bw >= self.rep_rate_hz / 2.0) {
                return Err(Error::Configuration(format!(
                    "detector bandwidth {bw:e} Hz is below half the repetition rate; pulses are unresolvable"
                )));
            }
        }
        if self.pulse_width_samples == 0
            || self.pulse_delay() + self.pulse_width_samples > self.samples_per_pulse
        {
            return Err(Error::Configuration(format!(
                "pulse of {} samples does not fit the period after a {}-sample delay",
                self.pulse_width_samples,
                self.pulse_delay()
            )));
        }
        if self.piezo_period_pulses < 2 {
            return Err(Error::Configuration(
                "piezo period must span at least 2 pulses".into(),
            ));
        }
        for (name, v) in [
            ("electronic clearance", self.electronic_clearance_db),
            ("CMRR", self.cmrr_db),
            ("flicker variance", self.flicker_variance),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::Configuration(format!("{name} must be finite")));
                }
            }
        }
        if self.flicker_variance.is_some_and(|v| v < 0.0) {
            return Err(Error::Configuration(
                "flicker variance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Sample offset of the optical pulse inside its period.
    pub fn pulse_delay(&self) -> usize {
        self.samples_per_pulse / 4
    }

    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.rep_rate_hz * self.samples_per_pulse as f64)
    }

    /// Pole of the detector filter, `exp(−2π f_c Δt)`; 0 for an ideal detector.
    pub fn filter_pole(&self) -> f64 {
        match self.detector_bandwidth_hz {
            Some(bw) => (-2.0 * std::f64::consts::PI * bw * self.sample_interval()).exp(),
            None => 0.0,
        }
    }

    /// Per-sample electronic noise variance. Summed over a full period it is
    /// `10^{−clearance/10}` of the vacuum variance.
    pub fn electronic_variance(&self) -> f64 {
        match self.electronic_clearance_db {
            Some(c) => 10f64.powf(-c / 10.0) / self.samples_per_pulse as f64,
            None => 0.0,
        }
    }

    pub fn signal_pulses(&self) -> usize {
        self.duration_pulses - self.vacuum_pulses
    }

    pub fn n_samples(&self) -> usize {
        self.duration_pulses * self.samples_per_pulse
    }

    /// LO phase at pulse `m`: triangular sweep `0 → π → 0`.
    pub fn phase_of(&self, m: usize) -> f64 {
        let period = self.piezo_period_pulses;
        let pos = (m % period) as f64 / period as f64;
        let tri = if pos < 0.5 {
            2.0 * pos
        } else {
            2.0 - 2.0 * pos
        };
        std::f64::consts::PI * tri
    }
}
