use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use squeezekit::entanglement::{ppt_scan, BandSummary};
use squeezekit::pipeline::{build_state, pulse_truth_db, run_pulses, run_source, ExperimentConfig};
use squeezekit::pulse::{io as record_io, squeezed_variance, synthesize_train, PulseExperiment};
use squeezekit::tomography::{
    propagate_uncertainty, reconstruct_covariance, recover_supermodes, simulate_variance_dataset,
    MeasurementModel, RecoveredMode, RecoveryJson, VarianceDataset,
};
use squeezekit::{Error, GaussianState, Physicality, Result, SqueezingReportEntry, StateJson};

use crate::Context;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(ctx: &Context, name: &str, doc: &T) -> Result<()> {
    let path = ctx.path(name);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, doc)?;
    w.write_all(b"\n").map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    finish(&path, w)
}

fn write_with(
    ctx: &Context,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let path = ctx.path(name);
    let mut w = create(&path)?;
    f(&mut w)?;
    finish(&path, w)
}

#[derive(Serialize)]
struct SchmidtDoc<'a> {
    config: &'a ExperimentConfig,
    schmidt: squeezekit::spdc::SchmidtJson,
}

pub fn jsa(mut ctx: Context, separable: bool) -> Result<()> {
    if separable {
        ctx.config.phase_matching.force_zero_mismatch = true;
        ctx.config.pump.fwhm_nm = 1e4;
    }
    let source = run_source(&ctx.config)?;
    write_with(&ctx, "jsa.csv", |w| source.jsa.write_csv(w))?;
    let doc = SchmidtDoc {
        config: &ctx.config,
        schmidt: source.decomposition.to_json(),
    };
    write_json(&ctx, "schmidt.json", &doc)?;
    let lead: Vec<String> = source
        .decomposition
        .lambdas
        .iter()
        .take(5)
        .map(|l| format!("{l:.4}"))
        .collect();
    ctx.say(format!("K = {:.2}", source.decomposition.schmidt_k));
    ctx.say(format!("leading Schmidt coefficients: {}", lead.join(" ")));
    Ok(())
}

#[derive(Serialize)]
struct StateDoc<'a> {
    config: &'a ExperimentConfig,
    gain: f64,
    squeezing: &'a [f64],
    table: &'a [SqueezingReportEntry],
    /// The first `n_supermodes` supermodes; their covariance is diagonal.
    supermode: StateJson,
    frexel: StateJson,
    frexel_band_power: &'a [f64],
}

fn leading_modes(state: &GaussianState<f64>, n: usize) -> Result<GaussianState<f64>> {
    let n = n.min(state.n_modes());
    GaussianState::new(
        state.vqq().view((0, 0), (n, n)).into_owned(),
        state.vpp().view((0, 0), (n, n)).into_owned(),
        state.basis(),
    )
}

fn write_table(w: impl Write, table: &[SqueezingReportEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for row in table {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn state(ctx: Context) -> Result<()> {
    let model = build_state(&ctx.config)?;
    let cal = &model.calibrated;
    let doc = StateDoc {
        config: &ctx.config,
        gain: cal.gain,
        squeezing: &cal.squeezing,
        table: &cal.table,
        supermode: leading_modes(&cal.state, ctx.config.modes.n_supermodes)?.to_json(),
        frexel: model.frexel.state.to_json(),
        frexel_band_power: &model.frexel.frexels.band_power,
    };
    write_json(&ctx, "state.json", &doc)?;
    write_with(&ctx, "state.csv", |w| write_table(w, &cal.table))?;
    ctx.say(format!(
        "gain {:.6}, K = {:.2}",
        cal.gain, model.source.decomposition.schmidt_k
    ));
    ctx.say("mode  squeeze_dB  antisqueeze_dB");
    for e in &cal.table {
        ctx.say(format!(
            "{:>4}  {:>+10.3}  {:>+14.3}",
            e.mode_index, e.squeeze_db, e.antisqueeze_db
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct TomographyDoc<'a> {
    config: &'a ExperimentConfig,
    dataset: String,
    reconstruction: StateJson,
    physicality: Physicality,
    recovery: RecoveryJson,
    /// First-order (squeeze, antisqueeze) errors per recovered mode, dB.
    sigma_db: Vec<(f64, f64)>,
    /// Recovery of the exact frexel state, when the data were simulated.
    truth: Option<Vec<RecoveredMode>>,
}

#[derive(Serialize)]
struct ComparisonRow {
    mode: usize,
    squeeze_db: f64,
    sigma_squeeze_db: f64,
    antisqueeze_db: f64,
    sigma_antisqueeze_db: f64,
    truth_squeeze_db: Option<f64>,
    truth_antisqueeze_db: Option<f64>,
}

pub fn tomography(ctx: Context, dataset: Option<&Path>) -> Result<()> {
    let (data, truth, source) = match dataset {
        Some(path) => {
            let f = File::open(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            (
                VarianceDataset::<f64>::read_csv(f)?,
                None,
                path.display().to_string(),
            )
        }
        None => {
            let exp = build_state(&ctx.config)?;
            let model = MeasurementModel {
                noise_db: ctx.config.noise.variance_noise_db,
                band_power: ctx
                    .config
                    .noise
                    .band_power_imbalance
                    .then(|| exp.frexel.frexels.band_power.clone()),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.noise.seed);
            let data = simulate_variance_dataset(&exp.frexel.state, &model, &mut rng)?;
            write_with(&ctx, "dataset.csv", |w| data.write_csv(w))?;
            let truth = recover_supermodes(&exp.frexel.state)?.eigen_db;
            (data, Some(truth), "simulated".to_string())
        }
    };
    let rec = reconstruct_covariance(&data)?;
    let recovery = recover_supermodes(&rec.state)?;
    let sigma = propagate_uncertainty(&data, &recovery)?.sigma_squeeze_antisqueeze_db(&recovery);

    let rows: Vec<ComparisonRow> = recovery
        .eigen_db
        .iter()
        .zip(&sigma)
        .enumerate()
        .map(|(k, (m, &(ss, sa)))| ComparisonRow {
            mode: k,
            squeeze_db: m.squeeze_db,
            sigma_squeeze_db: ss,
            antisqueeze_db: m.antisqueeze_db,
            sigma_antisqueeze_db: sa,
            truth_squeeze_db: truth.as_ref().map(|t| t[k].squeeze_db),
            truth_antisqueeze_db: truth.as_ref().map(|t| t[k].antisqueeze_db),
        })
        .collect();
    write_with(&ctx, "tomography.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    })?;
    let doc = TomographyDoc {
        config: &ctx.config,
        dataset: source,
        reconstruction: rec.state.to_json(),
        physicality: rec.physicality,
        recovery: recovery.to_json(),
        sigma_db: sigma,
        truth,
    };
    write_json(&ctx, "tomography.json", &doc)?;

    ctx.say("mode  squeeze_dB          antisqueeze_dB      truth");
    for r in &rows {
        let truth = match (r.truth_squeeze_db, r.truth_antisqueeze_db) {
            (Some(s), Some(a)) => format!("{s:+.3} / {a:+.3}"),
            _ => "-".into(),
        };
        ctx.say(format!(
            "{:>4}  {:+.3} ± {:.3}    {:+.3} ± {:.3}    {truth}",
            r.mode, r.squeeze_db, r.sigma_squeeze_db, r.antisqueeze_db, r.sigma_antisqueeze_db
        ));
    }
    Ok(())
}

/// A bare state JSON, or a document holding one under `frexel`.
fn read_state(path: &Path) -> Result<GaussianState<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut doc: Value = serde_json::from_str(&text)?;
    if doc.get("Vqq").is_none() {
        doc = doc.get_mut("frexel").map(Value::take).ok_or_else(|| {
            Error::Format(format!(
                "{}: no state (Vqq) or frexel entry",
                path.display()
            ))
        })?;
    }
    GaussianState::from_json(&serde_json::from_value(doc)?)
}

#[derive(Serialize)]
struct PptDoc<'a> {
    config: &'a ExperimentConfig,
    state: String,
    n_modes: usize,
    n_bipartitions: usize,
    n_entangled: usize,
    bands: &'a [BandSummary],
}

pub fn ppt(ctx: Context, state_path: Option<&Path>) -> Result<()> {
    let (state, source) = match state_path {
        Some(p) => (read_state(p)?, p.display().to_string()),
        None => (build_state(&ctx.config)?.frexel.state, "config".to_string()),
    };
    let n = state.n_modes();
    let pairs: Vec<(usize, usize)> = ctx
        .config
        .frexel_pairs()?
        .into_iter()
        .filter(|&(a, b)| a < n && b < n && a != b)
        .collect();
    let scan = ppt_scan(&state, &pairs)?;
    write_with(&ctx, "ppt.csv", |w| scan.write_csv(w))?;
    let doc = PptDoc {
        config: &ctx.config,
        state: source,
        n_modes: n,
        n_bipartitions: scan.n_bipartitions,
        n_entangled: scan.n_entangled,
        bands: &scan.bands,
    };
    write_json(&ctx, "ppt.json", &doc)?;
    ctx.say(format!(
        "{} of {} bipartitions entangled",
        scan.n_entangled, scan.n_bipartitions
    ));
    for b in &scan.bands {
        let median = b
            .median_ppt_value
            .map_or("-".to_string(), |m| format!("{m:+.5}"));
        ctx.say(format!(
            "{:<12} {:>3} bipartitions, {:>3} entangled, median {median}",
            b.band_class.to_string(),
            b.count,
            b.entangled
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct PulsesDoc<'a> {
    config: &'a ExperimentConfig,
    truth_squeeze_db: f64,
    truth_antisqueeze_db: f64,
    experiment: &'a PulseExperiment,
}

pub fn pulses(ctx: Context) -> Result<()> {
    let (sq, asq) = pulse_truth_db(&ctx.config)?;
    let mut cfg = ctx.config.clone();
    cfg.pulse.squeeze_db = Some(sq);
    cfg.pulse.antisqueeze_db = Some(asq);
    cfg.pulse.truth_from_table = false;
    let run = run_pulses(&cfg)?;

    let record = synthesize_train(squeezed_variance(sq, asq), &cfg.pulse.record_config())?;
    record_io::write_record(&ctx.path("pulses.bin"), &record)?;
    write_with(&ctx, "pulses.csv", |w| {
        record_io::write_truth_csv(w, &record.truth)
    })?;
    let doc = PulsesDoc {
        config: &ctx.config,
        truth_squeeze_db: sq,
        truth_antisqueeze_db: asq,
        experiment: &run,
    };
    write_json(&ctx, "pulses.json", &doc)?;

    let e = &run.estimate;
    ctx.say(format!(
        "squeeze {:+.3} ± {:.3} dB (truth {sq:+.3}), antisqueeze {:+.3} ± {:.3} dB (truth {asq:+.3})",
        e.squeeze_db, e.squeeze_se_db, e.antisqueeze_db, e.antisqueeze_se_db
    ));
    if let Some(w) = e.window {
        ctx.say(format!(
            "window offset {} length {}, {} pulses in the extreme bins",
            w.offset, w.len, e.n_pulses_used
        ));
    }
    for (name, iso) in [
        ("vacuum", &run.vacuum_isolation),
        ("signal", &run.signal_isolation),
    ] {
        ctx.say(format!(
            "{name} lag-1 correlation {:+.2e} (threshold {:.2e}): {}",
            iso.rho1,
            iso.threshold,
            if iso.passed { "isolated" } else { "CORRELATED" }
        ));
    }
    Ok(())
}
