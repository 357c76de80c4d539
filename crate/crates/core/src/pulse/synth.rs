use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::PulseTrainConfig;
use crate::error::{Error, Result};

/// Largest record [`synthesize_train`] will hold in memory (1 GiB of samples).
pub const MAX_RECORD_SAMPLES: usize = 1 << 27;

const FLICKER_STAGES: usize = 8;

/// Ground truth of one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTruth {
    /// LO phase.
    pub theta: f64,
    /// Quadrature value, drawn from `N(0, V(θ))` (`N(0, 1)` in the vacuum segment).
    pub x: f64,
}

/// Materialized photocurrent with its truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrainRecord {
    pub config: PulseTrainConfig,
    pub samples: Vec<f64>,
    pub truth: Vec<PulseTruth>,
}

impl PulseTrainRecord {
    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.samples.chunks_exact(self.config.samples_per_pulse)
    }

    pub fn vacuum_samples(&self) -> &[f64] {
        &self.samples[..self.config.vacuum_pulses * self.config.samples_per_pulse]
    }
}

/// Sequential photocurrent generator. Produces the record period by period so
/// arbitrarily long trains can be consumed in chunks; the detector filter
/// state carries over between chunks, so chunking never changes the output.
pub struct TrainSynthesizer<F> {
    cfg: PulseTrainConfig,
    variance: F,
    rng: ChaCha8Rng,
    pole: f64,
    sigma_e: f64,
    sigma_cmrr: f64,
    flicker: Option<Flicker>,
    filter_state: f64,
    next_pulse: usize,
}

struct Flicker {
    scale: f64,
    rho: [f64; FLICKER_STAGES],
    state: [f64; FLICKER_STAGES],
}

impl Flicker {
    fn new(variance: f64) -> Self {
        let mut rho = [0.0; FLICKER_STAGES];
        for (k, r) in rho.iter_mut().enumerate() {
            *r = (-1.0 / (1u64 << k) as f64).exp();
        }
        Self {
            scale: (variance / FLICKER_STAGES as f64).sqrt(),
            rho,
            state: [0.0; FLICKER_STAGES],
        }
    }

    fn step<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let mut sum = 0.0;
        for k in 0..FLICKER_STAGES {
            let n: f64 = rng.sample(StandardNormal);
            self.state[k] =
                self.rho[k] * self.state[k] + (1.0 - self.rho[k] * self.rho[k]).sqrt() * n;
            sum += self.state[k];
        }
        self.scale * sum
    }
}

impl<F: Fn(f64) -> f64> TrainSynthesizer<F> {
    pub fn new(variance: F, cfg: &PulseTrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            variance,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            pole: cfg.filter_pole(),
            sigma_e: cfg.electronic_variance().sqrt(),
            sigma_cmrr: cfg.cmrr_db.map_or(0.0, |c| 10f64.powf(-c / 20.0)),
            flicker: cfg.flicker_variance.filter(|&v| v > 0.0).map(Flicker::new),
            filter_state: 0.0,
            next_pulse: 0,
        })
    }

    pub fn config(&self) -> &PulseTrainConfig {
        &self.cfg
    }

    pub fn pulses_emitted(&self) -> usize {
        self.next_pulse
    }

    pub fn remaining(&self) -> usize {
        self.cfg.duration_pulses - self.next_pulse
    }

    /// Appends up to `max_pulses` periods; returns how many were produced.
    pub fn fill(
        &mut self,
        max_pulses: usize,
        samples: &mut Vec<f64>,
        truth: &mut Vec<PulseTruth>,
    ) -> Result<usize> {
        let n = max_pulses.min(self.remaining());
        let spp = self.cfg.samples_per_pulse;
        let delay = self.cfg.pulse_delay();
        let width = self.cfg.pulse_width_samples;
        samples.reserve(n * spp);
        truth.reserve(n);
        for _ in 0..n {
            let m = self.next_pulse;
            let theta = self.cfg.phase_of(m);
            let v = if m < self.cfg.vacuum_pulses {
                1.0
            } else {
                (self.variance)(theta)
            };
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "quadrature variance {v} at phase {theta}"
                )));
            }
            let n0: f64 = self.rng.sample(StandardNormal);
            let x = v.sqrt() * n0;
            let mut drive = x;
            if self.sigma_cmrr > 0.0 {
                let n1: f64 = self.rng.sample(StandardNormal);
                drive += self.sigma_cmrr * n1;
            }
            if let Some(f) = self.flicker.as_mut() {
                drive += f.step(&mut self.rng);
            }
            let level = drive / width as f64;
            for k in 0..spp {
                let u = if (delay..delay + width).contains(&k) {
                    level
                } else {
                    0.0
                };
                self.filter_state = self.pole * self.filter_state + (1.0 - self.pole) * u;
                let mut s = self.filter_state;
                if self.sigma_e > 0.0 {
                    let ne: f64 = self.rng.sample(StandardNormal);
                    s += self.sigma_e * ne;
                }
                samples.push(s);
            }
            truth.push(PulseTruth { theta, x });
            self.next_pulse += 1;
        }
        Ok(n)
    }
}

/// Whole record in memory; for long trains use [`TrainSynthesizer`] directly.
pub fn synthesize_train<F: Fn(f64) -> f64>(
    variance_of_phase: F,
    config: &PulseTrainConfig,
) -> Result<PulseTrainRecord> {
    config.validate()?;
    if config.n_samples() > MAX_RECORD_SAMPLES {
        return Err(Error::Configuration(format!(
            "{} samples is too large to materialize; stream the record instead",
            config.n_samples()
        )));
    }
    let mut synth = TrainSynthesizer::new(variance_of_phase, config)?;
    let mut samples = Vec::new();
    let mut truth = Vec::new();
    synth.fill(config.duration_pulses, &mut samples, &mut truth)?;
    Ok(PulseTrainRecord {
        config: config.clone(),
        samples,
        truth,
    })
}

/// `V(θ) = V_sq cos²θ + V_asq sin²θ`: quadrature variance of a squeezed
/// mode seen by an LO at phase `θ`.
pub fn squeezed_variance(
    squeeze_db: f64,
    antisqueeze_db: f64,
) -> impl Fn(f64) -> f64 + Clone + Send + Sync {
    let vs = 10f64.powf(squeeze_db / 10.0);
    let va = 10f64.powf(antisqueeze_db / 10.0);
    move |theta: f64| {
        let c = theta.cos();
        vs * c * c + va * (1.0 - c * c)
    }
}
