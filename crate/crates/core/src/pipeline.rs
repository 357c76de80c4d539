//! Experiment configuration and the stages that chain the modules together:
//! source model, calibrated supermode state, frexel projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{apply_loss, make_squeezed_vacuum, GaussianState, SqueezingReportEntry};
use crate::grid::FrequencyGrid;
use crate::modes::{
    frexel_basis, overlap_matrix, project_state, FrexelBasis, FrexelSpec, LoSpectrum,
};
use crate::pulse::{
    run_pulse_experiment, squeezed_variance, AnalysisOptions, PulseExperiment, PulseTrainConfig,
    PulseWindow, WindowPolicy,
};
use crate::spdc::{
    calibrate_gain, compute_jsa, schmidt_decompose, signed_squeezing, JointSpectralAmplitude,
    MismatchOffset, PhaseMatchingSpec, PumpEnvelope, SchmidtDecomposition, SellmeierSet,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pump: PumpSection,
    pub phase_matching: PhaseMatchingSection,
    pub grid: GridSection,
    pub modes: ModesSection,
    pub calibration: CalibrationSection,
    pub pulse: PulseSection,
    pub noise: NoiseSection,
    pub entanglement: EntanglementSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSection {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        let p = PumpEnvelope::default();
        Self {
            center_nm: p.center_nm,
            fwhm_nm: p.fwhm_nm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseMatchingSection {
    pub poling_um: f64,
    pub length_mm: f64,
    pub temperature_c: f64,
    pub sellmeier_set: String,
    pub offset: MismatchOffset,
    /// Replaces the phase-matching function by 1 (separable-source check).
    pub force_zero_mismatch: bool,
}

impl Default for PhaseMatchingSection {
    fn default() -> Self {
        let pm = PhaseMatchingSpec::default();
        Self {
            poling_um: pm.poling_period_um,
            length_mm: pm.interaction_length_mm,
            temperature_c: pm.temperature_c,
            sellmeier_set: pm.sellmeier_set.id().to_string(),
            offset: pm.offset,
            force_zero_mismatch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lambda_min_nm: 695.0,
            lambda_max_nm: 895.0,
            n_points: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSection {
    /// Rows of the reported squeezing table.
    pub n_supermodes: usize,
    /// Supermodes carried into the frexel projection; all non-zero ones if unset.
    pub n_state_modes: Option<usize>,
    pub hg0_fwhm_nm: f64,
    pub frexel_edges_nm: Vec<f64>,
    pub lo_center_nm: f64,
    pub lo_fwhm_nm: f64,
    /// Pulse-shaper window applied to the LO; unset means unshaped.
    pub lo_window_nm: Option<(f64, f64)>,
}

impl Default for ModesSection {
    fn default() -> Self {
        let lo = LoSpectrum::default();
        Self {
            n_supermodes: 21,
            n_state_modes: None,
            hg0_fwhm_nm: 18.0,
            frexel_edges_nm: FrexelSpec::default().band_edges_nm().to_vec(),
            lo_center_nm: lo.center_nm,
            lo_fwhm_nm: lo.fwhm_nm,
            lo_window_nm: lo.window_nm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub target_hg0_db: f64,
    pub eta_total: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            target_hg0_db: -0.47,
            eta_total: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub rep_rate_hz: f64,
    pub samples_per_pulse: usize,
    /// `None` (or absent) means an ideal, infinitely fast detector.
    pub detector_bandwidth_hz: Option<f64>,
    pub clearance_db: Option<f64>,
    pub cmrr_db: Option<f64>,
    pub n_pulses: usize,
    pub vacuum_pulses: usize,
    pub piezo_period_pulses: usize,
    /// Pulses written to the binary record file.
    pub record_pulses: usize,
    pub seed: u64,
    /// Sideband truth of the simulated mode; taken from the calibrated
    /// squeezing table when unset or when `truth_from_table` is set.
    pub squeeze_db: Option<f64>,
    pub antisqueeze_db: Option<f64>,
    pub truth_from_table: bool,
    /// Row of the squeezing table used for the truth.
    pub mode: usize,
    /// Fixed integration window; searched on the vacuum segment when unset.
    pub window: Option<PulseWindow>,
    pub subtract_electronic_noise: bool,
}

impl PulseSection {
    /// The full streamed train.
    pub fn train_config(&self) -> PulseTrainConfig {
        PulseTrainConfig {
            rep_rate_hz: self.rep_rate_hz,
            samples_per_pulse: self.samples_per_pulse,
            detector_bandwidth_hz: self.detector_bandwidth_hz,
            electronic_clearance_db: self.clearance_db,
            cmrr_db: self.cmrr_db,
            piezo_period_pulses: self.piezo_period_pulses,
            duration_pulses: self.n_pulses,
            vacuum_pulses: self.vacuum_pulses,
            seed: self.seed,
            ..Default::default()
        }
    }

    /// The short record written to disk: `record_pulses` long with the same
    /// vacuum fraction as the full train.
    pub fn record_config(&self) -> PulseTrainConfig {
        let vacuum = (self.record_pulses as u128 * self.vacuum_pulses as u128
            / self.n_pulses.max(1) as u128) as usize;
        PulseTrainConfig {
            duration_pulses: self.record_pulses,
            vacuum_pulses: vacuum.min(self.record_pulses),
            ..self.train_config()
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            window: self
                .window
                .map_or(WindowPolicy::Optimize, WindowPolicy::Fixed),
            subtract_electronic_noise: self.subtract_electronic_noise,
        }
    }
}

impl Default for PulseSection {
    fn default() -> Self {
        let p = PulseTrainConfig::default();
        Self {
            rep_rate_hz: p.rep_rate_hz,
            samples_per_pulse: 256,
            detector_bandwidth_hz: p.detector_bandwidth_hz,
            clearance_db: p.electronic_clearance_db,
            cmrr_db: p.cmrr_db,
            n_pulses: 1_000_000,
            vacuum_pulses: 200_000,
            piezo_period_pulses: p.piezo_period_pulses,
            record_pulses: 10_000,
            seed: p.seed,
            squeeze_db: Some(-0.47),
            antisqueeze_db: Some(0.55),
            truth_from_table: false,
            mode: 0,
            window: None,
            subtract_electronic_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub variance_noise_db: f64,
    pub seed: u64,
    /// Inject the LO band-power imbalance into the pair measurements.
    pub band_power_imbalance: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            variance_noise_db: 0.05,
            seed: 1,
            band_power_imbalance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EntanglementSection {
    /// Priority pairs for band classification, innermost first. Defaults to
    /// the mirror-symmetric frexel pairs without the outermost one.
    pub frexel_pairs: Option<Vec<(usize, usize)>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump.center_nm", self.pump.center_nm),
            ("pump.fwhm_nm", self.pump.fwhm_nm),
            ("phase_matching.poling_um", self.phase_matching.poling_um),
            ("phase_matching.length_mm", self.phase_matching.length_mm),
            ("grid.lambda_min_nm", self.grid.lambda_min_nm),
            ("grid.lambda_max_nm", self.grid.lambda_max_nm),
            ("modes.hg0_fwhm_nm", self.modes.hg0_fwhm_nm),
            ("modes.lo_center_nm", self.modes.lo_center_nm),
            ("modes.lo_fwhm_nm", self.modes.lo_fwhm_nm),
            ("calibration.eta_total", self.calibration.eta_total),
            ("pulse.rep_rate_hz", self.pulse.rep_rate_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Configuration(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.calibration.eta_total > 1.0 {
            return Err(Error::Configuration(format!(
                "calibration.eta_total {} exceeds 1",
                self.calibration.eta_total
            )));
        }
        if self.modes.n_supermodes == 0 {
            return Err(Error::Configuration(
                "modes.n_supermodes must be at least 1".into(),
            ));
        }
        if !(self.noise.variance_noise_db >= 0.0) {
            return Err(Error::Configuration(
                "noise.variance_noise_db must be non-negative".into(),
            ));
        }
        if self.pulse.squeeze_db.is_some() != self.pulse.antisqueeze_db.is_some() {
            return Err(Error::Configuration(
                "pulse.squeeze_db and pulse.antisqueeze_db must be given together".into(),
            ));
        }
        if self.pulse.record_pulses == 0 {
            return Err(Error::Configuration(
                "pulse.record_pulses must be at least 1".into(),
            ));
        }
        self.pulse.train_config().validate()?;
        self.sellmeier_set()?;
        self.frexel_spec()?;
        self.grid()?;
        Ok(())
    }

    pub fn sellmeier_set(&self) -> Result<SellmeierSet> {
        self.phase_matching.sellmeier_set.parse()
    }

    pub fn pump(&self) -> Result<PumpEnvelope> {
        PumpEnvelope::new(self.pump.center_nm, self.pump.fwhm_nm)
    }

    pub fn phase_matching(&self) -> Result<PhaseMatchingSpec> {
        let pm = PhaseMatchingSpec {
            poling_period_um: self.phase_matching.poling_um,
            interaction_length_mm: self.phase_matching.length_mm,
            temperature_c: self.phase_matching.temperature_c,
            sellmeier_set: self.sellmeier_set()?,
            offset: self.phase_matching.offset,
            force_zero_mismatch: self.phase_matching.force_zero_mismatch,
        };
        pm.validate()?;
        Ok(pm)
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(
            self.grid.lambda_min_nm,
            self.grid.lambda_max_nm,
            self.grid.n_points,
        )
    }

    pub fn frexel_spec(&self) -> Result<FrexelSpec> {
        FrexelSpec::new(self.modes.frexel_edges_nm.clone())
    }

    pub fn lo_spectrum(&self) -> LoSpectrum {
        LoSpectrum {
            center_nm: self.modes.lo_center_nm,
            fwhm_nm: self.modes.lo_fwhm_nm,
            window_nm: self.modes.lo_window_nm,
        }
    }

    /// Band-classification priority pairs.
    pub fn frexel_pairs(&self) -> Result<Vec<(usize, usize)>> {
        if let Some(p) = &self.entanglement.frexel_pairs {
            return Ok(p.clone());
        }
        let mut pairs = self.frexel_spec()?.mirror_pairs(2.0 * self.pump.center_nm);
        if pairs.len() > 1 {
            pairs.pop();
        }
        Ok(pairs)
    }
}

/// JSA and its Schmidt decomposition.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub jsa: JointSpectralAmplitude,
    pub decomposition: SchmidtDecomposition,
}

pub fn run_source(cfg: &ExperimentConfig) -> Result<SourceModel> {
    let grid = cfg.grid()?;
    let jsa = compute_jsa(&cfg.pump()?, &cfg.phase_matching()?, &grid)?;
    let decomposition = schmidt_decompose(&jsa, grid.n_points())?;
    Ok(SourceModel { jsa, decomposition })
}

/// Supermode state after gain calibration and loss.
#[derive(Debug, Clone)]
pub struct CalibratedState {
    pub gain: f64,
    /// Signed squeezing parameters of every supermode kept in `state`.
    pub squeezing: Vec<f64>,
    pub state: GaussianState<f64>,
    /// First `n_supermodes` rows of the squeezing report.
    pub table: Vec<SqueezingReportEntry>,
}

pub fn calibrate_state(
    cfg: &ExperimentConfig,
    dec: &SchmidtDecomposition,
) -> Result<CalibratedState> {
    let eta = cfg.calibration.eta_total;
    let gain = calibrate_gain(dec, cfg.calibration.target_hg0_db, eta)?;
    let available = dec.lambdas.len().min(dec.modes.n_modes());
    let n_state = cfg.modes.n_state_modes.unwrap_or(available);
    if n_state > available || n_state < cfg.modes.n_supermodes.min(available) {
        return Err(Error::Configuration(format!(
            "modes.n_state_modes = {n_state} outside [{}, {available}]",
            cfg.modes.n_supermodes.min(available)
        )));
    }
    if cfg.modes.n_supermodes > available {
        return Err(Error::Configuration(format!(
            "modes.n_supermodes = {} but the source has {available} non-zero supermodes",
            cfg.modes.n_supermodes
        )));
    }
    let squeezing = signed_squeezing(dec, gain, n_state)?;
    let state = apply_loss(&make_squeezed_vacuum(&squeezing)?, eta)?.with_basis("supermode");
    let table = state
        .squeezing_report()?
        .into_iter()
        .take(cfg.modes.n_supermodes)
        .collect();
    Ok(CalibratedState {
        gain,
        squeezing,
        state,
        table,
    })
}

/// The calibrated state seen through the frexel bands.
#[derive(Debug, Clone)]
pub struct FrexelProjection {
    pub frexels: FrexelBasis<f64>,
    pub state: GaussianState<f64>,
}

pub fn project_to_frexels(
    cfg: &ExperimentConfig,
    dec: &SchmidtDecomposition,
    calibrated: &CalibratedState,
) -> Result<FrexelProjection> {
    let grid = dec.modes.grid();
    let frexels = frexel_basis::<f64>(grid, &cfg.frexel_spec()?, Some(&cfg.lo_spectrum()))?;
    let kept = dec.modes.truncate(calibrated.state.n_modes())?;
    let o = overlap_matrix(&frexels.basis, &kept)?;
    let state = project_state(&calibrated.state, &o, "frexel")?;
    Ok(FrexelProjection { frexels, state })
}

/// Source, calibration and frexel projection in one go.
#[derive(Debug, Clone)]
pub struct ExperimentState {
    pub source: SourceModel,
    pub calibrated: CalibratedState,
    pub frexel: FrexelProjection,
}

pub fn build_state(cfg: &ExperimentConfig) -> Result<ExperimentState> {
    let source = run_source(cfg)?;
    let calibrated = calibrate_state(cfg, &source.decomposition)?;
    let frexel = project_to_frexels(cfg, &source.decomposition, &calibrated)?;
    Ok(ExperimentState {
        source,
        calibrated,
        frexel,
    })
}

/// Sideband (squeeze, antisqueeze) dB of the simulated pulse mode: the
/// configured values, or row `pulse.mode` of the calibrated table.
pub fn pulse_truth_db(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    if let (false, Some(sq), Some(asq)) = (
        cfg.pulse.truth_from_table,
        cfg.pulse.squeeze_db,
        cfg.pulse.antisqueeze_db,
    ) {
        return Ok((sq, asq));
    }
    let source = run_source(cfg)?;
    let calibrated = calibrate_state(cfg, &source.decomposition)?;
    let row = calibrated.table.get(cfg.pulse.mode).ok_or_else(|| {
        Error::Configuration(format!(
            "pulse.mode = {} but the table has {} rows",
            cfg.pulse.mode,
            calibrated.table.len()
        ))
    })?;
    Ok((row.squeeze_db, row.antisqueeze_db))
}

/// Streams the configured pulse train through the estimator.
pub fn run_pulses(cfg: &ExperimentConfig) -> Result<PulseExperiment> {
    let (sq, asq) = pulse_truth_db(cfg)?;
    run_pulse_experiment(
        squeezed_variance(sq, asq),
        &cfg.pulse.train_config(),
        cfg.pulse.analysis_options(),
    )
}
