//! Pulsed homodyne simulator and pulse-by-pulse squeezing estimator.

mod config;
mod estimate;
mod extract;
pub mod io;
mod synth;

use serde::{Deserialize, Serialize};

pub use config::PulseTrainConfig;
pub use estimate::{
    estimate_squeezing, phase_bin, standard_error_db, PhaseBinAccumulator, RunningVariance,
    SqueezingEstimate, DEFAULT_PHASE_BINS,
};
pub use extract::{
    estimate_electronic_noise, extract_pulse_quadratures, integrate_windows, optimize_window,
    optimize_window_from_frames, verify_pulse_isolation, verify_pulse_isolation_binned,
    IsolationCheck, PulseQuadratures, PulseWindow, WindowChoice, MIN_ISOLATION_PULSES,
    WINDOW_PROBE_FRAMES,
};
pub use synth::{
    squeezed_variance, synthesize_train, PulseTrainRecord, PulseTruth, TrainSynthesizer,
    MAX_RECORD_SAMPLES,
};

use crate::error::{Error, Result};

/// Pulses synthesized per chunk by [`run_pulse_experiment`].
pub const STREAM_CHUNK_PULSES: usize = 1 << 16;

/// Per-pulse values kept for each isolation test.
pub const ISOLATION_PULSES: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowPolicy {
    /// Search the vacuum segment with [`optimize_window`].
    Optimize,
    Fixed(PulseWindow),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub window: WindowPolicy,
    /// Remove the electronic noise measured on the vacuum frames before
    /// forming the ratios. Off, the estimate is biased towards 0 dB by the
    /// noise the window collects.
    pub subtract_electronic_noise: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            window: WindowPolicy::Optimize,
            subtract_electronic_noise: false,
        }
    }
}

impl From<WindowPolicy> for AnalysisOptions {
    fn from(window: WindowPolicy) -> Self {
        Self {
            window,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseExperiment {
    pub config: PulseTrainConfig,
    pub estimate: SqueezingEstimate,
    pub window_choice: Option<WindowChoice>,
    /// Per-sample electronic noise variance measured on the vacuum frames.
    pub electronic_variance: f64,
    /// Lag-1 test on the vacuum segment.
    pub vacuum_isolation: IsolationCheck,
    /// Lag-1 test on the signal segment after per-bin standardization.
    pub signal_isolation: IsolationCheck,
}

/// Streams a train through synthesis, windowed integration and the phase-bin
/// estimator without materializing it. The output equals what the same steps
/// give on [`synthesize_train`]'s record.
pub fn run_pulse_experiment<F: Fn(f64) -> f64>(
    variance_of_phase: F,
    cfg: &PulseTrainConfig,
    options: impl Into<AnalysisOptions>,
) -> Result<PulseExperiment> {
    let options = options.into();
    cfg.validate()?;
    let spp = cfg.samples_per_pulse;
    if cfg.vacuum_pulses < MIN_ISOLATION_PULSES {
        return Err(Error::Configuration(format!(
            "vacuum segment of {} pulses is shorter than the {MIN_ISOLATION_PULSES} needed for calibration",
            cfg.vacuum_pulses
        )));
    }
    if cfg.signal_pulses() < MIN_ISOLATION_PULSES {
        return Err(Error::Configuration(format!(
            "signal segment of {} pulses is shorter than {MIN_ISOLATION_PULSES}",
            cfg.signal_pulses()
        )));
    }
    if let WindowPolicy::Fixed(w) = options.window {
        if w.len == 0 || w.offset + w.len > spp {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}) leaves the {spp}-sample pulse period",
                w.offset,
                w.offset + w.len
            )));
        }
    }

    let mut synth = TrainSynthesizer::new(variance_of_phase, cfg)?;
    let mut samples = Vec::with_capacity(STREAM_CHUNK_PULSES * spp);
    let mut truth = Vec::with_capacity(STREAM_CHUNK_PULSES);
    let probe = cfg.vacuum_pulses.min(WINDOW_PROBE_FRAMES);
    synth.fill(STREAM_CHUNK_PULSES.max(probe), &mut samples, &mut truth)?;

    let probe_frames = &samples[..probe * spp];
    let (window, window_choice, electronic_variance) = match options.window {
        WindowPolicy::Fixed(w) => (w, None, estimate_electronic_noise(probe_frames, spp)?),
        WindowPolicy::Optimize => {
            let choice = optimize_window_from_frames(probe_frames, spp)?;
            log::debug!(
                "integration window {:?}, SNR {:.2}",
                choice.window,
                choice.snr
            );
            let e = choice.electronic_variance;
            (choice.window, Some(choice), e)
        }
    };

    let mut acc = PhaseBinAccumulator::new(DEFAULT_PHASE_BINS);
    let mut vac_values = Vec::new();
    let mut sig_values = Vec::new();
    let mut sig_phases = Vec::new();
    let mut m0 = 0;
    loop {
        let values = integrate_windows(&samples, spp, window);
        for (k, (&v, t)) in values.iter().zip(&truth).enumerate() {
            if m0 + k < cfg.vacuum_pulses {
                acc.push_vacuum(v);
                if vac_values.len() < ISOLATION_PULSES {
                    vac_values.push(v);
                }
            } else {
                acc.push_signal(t.theta, v);
                if sig_values.len() < ISOLATION_PULSES {
                    sig_values.push(v);
                    sig_phases.push(t.theta);
                }
            }
        }
        m0 += truth.len();
        if synth.remaining() == 0 {
            break;
        }
        samples.clear();
        truth.clear();
        synth.fill(STREAM_CHUNK_PULSES, &mut samples, &mut truth)?;
    }

    let estimate = if options.subtract_electronic_noise {
        acc.estimate_subtracting(Some(window), electronic_variance * window.len as f64)?
    } else {
        acc.estimate(Some(window))?
    };
    let vacuum_isolation = verify_pulse_isolation(&vac_values)?;
    let signal_isolation = verify_pulse_isolation_binned(&sig_values, &sig_phases)?;
    Ok(PulseExperiment {
        config: cfg.clone(),
        estimate,
        window_choice,
        electronic_variance,
        vacuum_isolation,
        signal_isolation,
    })
}
