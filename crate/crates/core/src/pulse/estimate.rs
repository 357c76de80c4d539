use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};

use super::extract::PulseWindow;
use crate::error::{Error, Result};

pub const DEFAULT_PHASE_BINS: usize = 16;

/// Bin `k` is centred on `kπ/n_bins`; phases are taken modulo π.
pub fn phase_bin(theta: f64, n_bins: usize) -> usize {
    let width = PI / n_bins as f64;
    let t = (theta + 0.5 * width).rem_euclid(PI);
    ((t / width) as usize).min(n_bins - 1)
}

/// Standard error in dB of `10 log10(var_a / var_b)` for two independent
/// Gaussian sample variances of `n_a` and `n_b` values: each has relative
/// spread `√(2/(n−1))`.
pub fn standard_error_db(n_a: u64, n_b: u64) -> f64 {
    if n_a < 2 || n_b < 2 {
        return f64::INFINITY;
    }
    10.0 / LN_10 * (2.0 / (n_a - 1) as f64 + 2.0 / (n_b - 1) as f64).sqrt()
}

/// Running count, mean and centred sum of squares (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningVariance {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningVariance {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// Per-phase-bin variance accumulators plus the vacuum reference. Chunks can
/// be accumulated independently and merged in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBinAccumulator {
    pub bins: Vec<RunningVariance>,
    pub vacuum: RunningVariance,
}

impl PhaseBinAccumulator {
    pub fn new(n_bins: usize) -> Self {
        Self {
            bins: vec![RunningVariance::default(); n_bins.max(1)],
            vacuum: RunningVariance::default(),
        }
    }

    pub fn push_signal(&mut self, theta: f64, value: f64) {
        let b = phase_bin(theta, self.bins.len());
        self.bins[b].push(value);
    }

    pub fn push_vacuum(&mut self, value: f64) {
        self.vacuum.push(value);
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.bins.len() != self.bins.len() {
            return Err(Error::InvalidParameter(
                "accumulators use different bin counts".into(),
            ));
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            a.merge(b);
        }
        self.vacuum.merge(&other.vacuum);
        Ok(())
    }

    /// Squeezing from the extremal-variance bins relative to the vacuum.
    pub fn estimate(&self, window: Option<PulseWindow>) -> Result<SqueezingEstimate> {
        self.estimate_subtracting(window, 0.0)
    }

    /// As [`estimate`](Self::estimate), with a known additive noise variance
    /// (electronic noise integrated over the window) removed from every bin
    /// and from the vacuum first.
    pub fn estimate_subtracting(
        &self,
        window: Option<PulseWindow>,
        noise_variance: f64,
    ) -> Result<SqueezingEstimate> {
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance {noise_variance} is negative"
            )));
        }
        let vac_raw = self.vacuum.variance();
        if !(vac_raw > 0.0) {
            return Err(Error::InvalidParameter(
                "need at least two vacuum values".into(),
            ));
        }
        let vac = vac_raw - noise_variance;
        if !(vac > 0.0) {
            return Err(Error::Numerical(format!(
                "noise variance {noise_variance:e} swamps the vacuum variance {vac_raw:e}"
            )));
        }
        let filled: Vec<(usize, &RunningVariance)> = self
            .bins
            .iter()
            .enumerate()
            .filter(|(_, b)| b.count >= 2)
            .collect();
        if filled.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least two populated phase bins to find the quadratures".into(),
            ));
        }
        let by_var = |a: &&(usize, &RunningVariance), b: &&(usize, &RunningVariance)| {
            a.1.variance().total_cmp(&b.1.variance())
        };
        let (sq_bin, sq) = *filled.iter().min_by(by_var).unwrap();
        let (asq_bin, asq) = *filled.iter().max_by(by_var).unwrap();
        if !(sq.variance() > noise_variance) {
            return Err(Error::Numerical(format!(
                "noise variance {noise_variance:e} exceeds the squeezed-bin variance {:e}",
                sq.variance()
            )));
        }
        let db = |v: f64| 10.0 * ((v - noise_variance) / vac).log10();
        // relative spread of V − e is that of V scaled by V / (V − e)
        let se = |b: &RunningVariance| {
            let (vs, ns, nv) = (b.variance(), b.count as f64, self.vacuum.count as f64);
            let gs = vs / (vs - noise_variance);
            let gv = vac_raw / vac;
            10.0 / LN_10 * (2.0 / (ns - 1.0) * gs * gs + 2.0 / (nv - 1.0) * gv * gv).sqrt()
        };
        let n_bins = self.bins.len();
        Ok(SqueezingEstimate {
            squeeze_db: db(sq.variance()),
            antisqueeze_db: db(asq.variance()),
            squeeze_se_db: se(sq),
            antisqueeze_se_db: se(asq),
            squeeze_phase: sq_bin as f64 * PI / n_bins as f64,
            antisqueeze_phase: asq_bin as f64 * PI / n_bins as f64,
            bin_variance_db: self.bins.iter().map(|b| db(b.variance())).collect(),
            vacuum_variance: vac,
            subtracted_noise_variance: noise_variance,
            window,
            n_pulses_used: sq.count + asq.count,
            n_vacuum_pulses: self.vacuum.count,
        })
    }
}

/// Pulse-resolved squeezing of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingEstimate {
    pub squeeze_db: f64,
    pub antisqueeze_db: f64,
    pub squeeze_se_db: f64,
    pub antisqueeze_se_db: f64,
    /// Centre of the bin that held the minimum / maximum variance.
    pub squeeze_phase: f64,
    pub antisqueeze_phase: f64,
    /// Every bin relative to the vacuum, dB; `NaN` for bins with < 2 values.
    pub bin_variance_db: Vec<f64>,
    /// Vacuum variance in the units of the inputs, after any subtraction.
    pub vacuum_variance: f64,
    /// Additive noise removed before taking ratios; 0 for the plain estimate.
    pub subtracted_noise_variance: f64,
    pub window: Option<PulseWindow>,
    /// Values in the two extremal bins; intermediate phases are discarded.
    pub n_pulses_used: u64,
    pub n_vacuum_pulses: u64,
}

impl SqueezingEstimate {
    /// The larger of the two standard errors.
    pub fn standard_error_db(&self) -> f64 {
        self.squeeze_se_db.max(self.antisqueeze_se_db)
    }
}

/// Bins `values` by LO phase and compares the extremal bins with the vacuum.
pub fn estimate_squeezing(
    values: &[f64],
    phases: &[f64],
    vacuum_values: &[f64],
) -> Result<SqueezingEstimate> {
    if values.len() != phases.len() {
        return Err(Error::InvalidParameter(format!(
            "{} values but {} phases",
            values.len(),
            phases.len()
        )));
    }
    let mut acc = PhaseBinAccumulator::new(DEFAULT_PHASE_BINS);
    for (&v, &t) in values.iter().zip(phases) {
        acc.push_signal(t, v);
    }
    for &v in vacuum_values {
        acc.push_vacuum(v);
    }
    acc.estimate(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn bins_wrap_modulo_pi() {
        assert_eq!(phase_bin(0.0, 16), 0);
        assert_eq!(phase_bin(PI, 16), 0);
        assert_eq!(phase_bin(PI / 2.0, 16), 8);
        assert_eq!(phase_bin(PI - 0.01, 16), 0);
        assert_eq!(phase_bin(PI / 16.0 * 0.49, 16), 0);
        assert_eq!(phase_bin(PI / 16.0 * 0.51, 16), 1);
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = RunningVariance::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = RunningVariance::default();
        let mut b = RunningVariance::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count, whole.count);
        assert!((a.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn vacuum_is_zero_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 160_000;
        let vals: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let phases: Vec<f64> = (0..n).map(|i| PI * i as f64 / n as f64).collect();
        let vac: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let est = estimate_squeezing(&vals, &phases, &vac).unwrap();
        // extremal bins of pure noise: within a few standard errors of 0
        assert!(est.squeeze_db.abs() < 4.0 * est.squeeze_se_db);
        assert!(est.antisqueeze_db.abs() < 4.0 * est.antisqueeze_se_db);
        assert!(est.squeeze_se_db > 0.0);
    }

    #[test]
    fn chi_squared_error() {
        let se = standard_error_db(10_001, 10_001);
        assert!((se - 10.0 / LN_10 * (4.0f64 / 10_000.0).sqrt()).abs() < 1e-15);
        assert!(standard_error_db(1, 100).is_infinite());
    }

    #[test]
    fn subtraction_removes_additive_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 320_000;
        let e = 0.3;
        let vs = 0.5f64;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let theta = PI * i as f64 / n as f64;
                let c = theta.cos();
                let v = vs * c * c + (1.0 / vs) * (1.0 - c * c) + e;
                v.sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let phases: Vec<f64> = (0..n).map(|i| PI * i as f64 / n as f64).collect();
        let mut acc = PhaseBinAccumulator::new(64);
        for (&v, &t) in vals.iter().zip(&phases) {
            acc.push_signal(t, v);
        }
        for _ in 0..n {
            acc.push_vacuum((1.0 + e).sqrt() * rng.sample::<f64, _>(StandardNormal));
        }
        let raw = acc.estimate(None).unwrap();
        let fixed = acc.estimate_subtracting(None, e).unwrap();
        let truth = 10.0 * vs.log10();
        assert!(raw.squeeze_db > truth + 0.5);
        assert!(
            (fixed.squeeze_db - truth).abs() < 4.0 * fixed.squeeze_se_db + 0.01,
            "{fixed:?}"
        );
        assert!(fixed.squeeze_se_db > raw.squeeze_se_db);
        assert!(acc.estimate_subtracting(None, 5.0).is_err());
    }

    #[test]
    fn needs_vacuum() {
        assert!(estimate_squeezing(&[1.0, 2.0], &[0.0, 1.0], &[1.0]).is_err());
        assert!(estimate_squeezing(&[1.0], &[0.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
