use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::estimate::{phase_bin, DEFAULT_PHASE_BINS};
use super::synth::PulseTrainRecord;
use crate::error::{Error, Result};

/// Frames of the vacuum segment used to choose the integration window.
pub const WINDOW_PROBE_FRAMES: usize = 8192;

/// Minimum sequence length for the lag-1 isolation test.
pub const MIN_ISOLATION_PULSES: usize = 1000;

/// Candidates tried (best SNR first) before giving up on isolation.
const MAX_WINDOW_ATTEMPTS: usize = 256;

/// Integration window inside each pulse period, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PulseWindow {
    pub offset: usize,
    pub len: usize,
}

/// Window sums `Σ_{k ∈ [offset, offset+len)} s[m·spp + k]` for every pulse
/// whose window lies inside `samples`. The window may run past the period
/// (that is how crosstalk is provoked in tests).
pub fn integrate_windows(
    samples: &[f64],
    samples_per_pulse: usize,
    window: PulseWindow,
) -> Vec<f64> {
    let end = window.offset + window.len;
    samples
        .chunks(samples_per_pulse)
        .enumerate()
        .map_while(|(m, _)| {
            let start = m * samples_per_pulse + window.offset;
            let stop = m * samples_per_pulse + end;
            (stop <= samples.len()).then(|| samples[start..stop].iter().sum())
        })
        .collect()
}

/// Integrated quadratures scaled so the vacuum segment has unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseQuadratures {
    pub window: PulseWindow,
    pub vacuum: Vec<f64>,
    pub signal: Vec<f64>,
    /// Raw vacuum variance of the window sum before scaling.
    pub raw_vacuum_variance: f64,
}

pub fn extract_pulse_quadratures(
    record: &PulseTrainRecord,
    window_offset: usize,
    window_len: usize,
) -> Result<PulseQuadratures> {
    let cfg = &record.config;
    if window_len == 0 {
        return Err(Error::InvalidParameter(
            "integration window is empty".into(),
        ));
    }
    if window_offset + window_len > cfg.samples_per_pulse {
        return Err(Error::InvalidParameter(format!(
            "window [{window_offset}, {}) leaves the {}-sample pulse period",
            window_offset + window_len,
            cfg.samples_per_pulse
        )));
    }
    if cfg.vacuum_pulses < 2 {
        return Err(Error::InvalidParameter(
            "record has no vacuum calibration segment".into(),
        ));
    }
    let window = PulseWindow {
        offset: window_offset,
        len: window_len,
    };
    let mut values = integrate_windows(&record.samples, cfg.samples_per_pulse, window);
    let raw = variance(&values[..cfg.vacuum_pulses]);
    if !(raw > 0.0) {
        return Err(Error::Numerical(
            "vacuum segment has zero variance in this window".into(),
        ));
    }
    let scale = 1.0 / raw.sqrt();
    values.iter_mut().for_each(|v| *v *= scale);
    let signal = values.split_off(cfg.vacuum_pulses);
    Ok(PulseQuadratures {
        window,
        vacuum: values,
        signal,
        raw_vacuum_variance: raw,
    })
}

pub(crate) fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationCheck {
    pub rho1: f64,
    pub threshold: f64,
    pub n_pulses: usize,
    pub passed: bool,
}

/// Normalized lag-1 autocorrelation; passes when `|ρ₁| < 3/√N`.
pub fn verify_pulse_isolation(values: &[f64]) -> Result<IsolationCheck> {
    let n = values.len();
    if n < MIN_ISOLATION_PULSES {
        return Err(Error::InvalidParameter(format!(
            "isolation test needs at least {MIN_ISOLATION_PULSES} pulses, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    if !(var > 0.0) {
        return Err(Error::Numerical(
            "constant sequence has no autocorrelation".into(),
        ));
    }
    let lag: f64 = values
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    let rho1 = lag / var;
    let threshold = 3.0 / (n as f64).sqrt();
    Ok(IsolationCheck {
        rho1,
        threshold,
        n_pulses: n,
        passed: rho1.abs() < threshold,
    })
}

/// Isolation test on a phase-swept segment: each value is standardized by
/// the mean and spread of its phase bin first, so the variance sweep itself
/// does not masquerade as correlation.
pub fn verify_pulse_isolation_binned(values: &[f64], phases: &[f64]) -> Result<IsolationCheck> {
    if values.len() != phases.len() {
        return Err(Error::InvalidParameter(
            "values and phases differ in length".into(),
        ));
    }
    let bins = DEFAULT_PHASE_BINS;
    let mut count = vec![0usize; bins];
    let mut sum = vec![0.0; bins];
    let mut sq = vec![0.0; bins];
    for (&v, &t) in values.iter().zip(phases) {
        let b = phase_bin(t, bins);
        count[b] += 1;
        sum[b] += v;
        sq[b] += v * v;
    }
    let stats: Vec<(f64, f64)> = (0..bins)
        .map(|b| {
            let n = count[b].max(1) as f64;
            let mean = sum[b] / n;
            let var = (sq[b] / n - mean * mean).max(f64::MIN_POSITIVE);
            (mean, var.sqrt())
        })
        .collect();
    let z: Vec<f64> = values
        .iter()
        .zip(phases)
        .map(|(&v, &t)| {
            let (m, s) = stats[phase_bin(t, bins)];
            (v - m) / s
        })
        .collect();
    verify_pulse_isolation(&z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowChoice {
    pub window: PulseWindow,
    /// Own-pulse power over crosstalk plus electronic noise, estimated from the
    /// vacuum frames.
    pub snr: f64,
    pub isolation: IsolationCheck,
    /// Per-sample electronic noise variance seen on the vacuum frames.
    pub electronic_variance: f64,
    /// Candidates rejected by the isolation test before this one.
    pub rejected: usize,
}

/// Grid search over all windows inside the period on the vacuum segment.
pub fn optimize_window(record: &PulseTrainRecord) -> Result<WindowChoice> {
    let cfg = &record.config;
    let n = cfg.vacuum_pulses.min(WINDOW_PROBE_FRAMES);
    optimize_window_from_frames(
        &record.samples[..n * cfg.samples_per_pulse],
        cfg.samples_per_pulse,
    )
}

/// Window search on consecutive vacuum frames.
///
/// With `h` the in-period response to the frame's own pulse and `g` the tail
/// of the previous one, a window `W` integrates `a·x_m + b·x_{m−1} + noise`
/// with `a = Σ_W h`, `b = Σ_W g`. The frame covariance `C = hhᵀ + ggᵀ + σ²I`
/// and the lag-1 cross covariance `D = hgᵀ` give `a² + b² = 1ᵀC1 − |W|σ²` and
/// `ab = 1ᵀD1` over the window, hence `a²` and `b²` for every window from two
/// prefix-sum tables. The noise level `σ²` is the mean of the eigenvalues of
/// `C` beyond the two signal directions, see [`estimate_electronic_noise`].
pub fn optimize_window_from_frames(
    frames: &[f64],
    samples_per_pulse: usize,
) -> Result<WindowChoice> {
    let spp = samples_per_pulse;
    let n = frames.len() / spp;
    if n < MIN_ISOLATION_PULSES {
        return Err(Error::InvalidParameter(format!(
            "window search needs at least {MIN_ISOLATION_PULSES} vacuum frames, got {n}"
        )));
    }
    let f = DMatrix::from_row_slice(n, spp, &frames[..n * spp]);
    let mean = f.row_mean();
    let centred = DMatrix::from_fn(n, spp, |i, j| f[(i, j)] - mean[j]);
    let c = centred.transpose() * &centred / n as f64;
    let cur = centred.rows(1, n - 1);
    let prev = centred.rows(0, n - 1);
    let d = cur.transpose() * prev / (n - 1) as f64;

    let sigma2 = noise_floor(&c);

    let pc = prefix_2d(&c);
    let pd = prefix_2d(&d);
    let block = |p: &DMatrix<f64>, o: usize, l: usize| {
        p[(o + l, o + l)] - p[(o, o + l)] - p[(o + l, o)] + p[(o, o)]
    };

    let mut candidates = Vec::with_capacity(spp * (spp + 1) / 2);
    for o in 0..spp {
        for l in 1..=spp - o {
            let s = block(&pc, o, l) - l as f64 * sigma2;
            if !(s > 0.0) {
                continue;
            }
            let p = block(&pd, o, l);
            let disc = (s * s - 4.0 * p * p).max(0.0).sqrt();
            let a2 = 0.5 * (s + disc);
            let b2 = (s - a2).max(0.0);
            candidates.push((
                a2 / (b2 + l as f64 * sigma2),
                PulseWindow { offset: o, len: l },
            ));
        }
    }
    candidates.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then(x.1.len.cmp(&y.1.len))
            .then(x.1.offset.cmp(&y.1.offset))
    });

    for (rejected, &(snr, window)) in candidates.iter().take(MAX_WINDOW_ATTEMPTS).enumerate() {
        let values = integrate_windows(&frames[..n * spp], spp, window);
        let isolation = verify_pulse_isolation(&values)?;
        if isolation.passed {
            return Ok(WindowChoice {
                window,
                snr,
                isolation,
                electronic_variance: sigma2,
                rejected,
            });
        }
    }
    Err(Error::Numerical(format!(
        "none of the {} best windows passes the pulse isolation test",
        candidates.len().min(MAX_WINDOW_ATTEMPTS)
    )))
}

/// Per-sample white-noise variance of vacuum frames: the mean eigenvalue of
/// the frame covariance beyond the two pulse directions (own pulse and the
/// previous pulse's tail).
pub fn estimate_electronic_noise(frames: &[f64], samples_per_pulse: usize) -> Result<f64> {
    let spp = samples_per_pulse;
    let n = frames.len() / spp.max(1);
    if spp == 0 || n < 2 {
        return Err(Error::InvalidParameter("need at least two frames".into()));
    }
    let f = DMatrix::from_row_slice(n, spp, &frames[..n * spp]);
    let mean = f.row_mean();
    let centred = DMatrix::from_fn(n, spp, |i, j| f[(i, j)] - mean[j]);
    Ok(noise_floor(&(centred.transpose() * &centred / n as f64)))
}

fn noise_floor(c: &DMatrix<f64>) -> f64 {
    let spp = c.nrows();
    let eig = SymmetricEigen::new(c.clone());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let rest = &ev[2.min(ev.len())..];
    let floor = 1e-12 * c.trace() / spp as f64;
    if rest.is_empty() {
        floor
    } else {
        (rest.iter().sum::<f64>() / rest.len() as f64).max(floor)
    }
}

/// `P[(i, j)] = Σ_{r<i, c<j} M[(r, c)]`.
fn prefix_2d(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut p = DMatrix::zeros(r + 1, c + 1);
    for i in 0..r {
        for j in 0..c {
            p[(i + 1, j + 1)] = m[(i, j)] + p[(i, j + 1)] + p[(i + 1, j)] - p[(i, j)];
        }
    }
    p
}
