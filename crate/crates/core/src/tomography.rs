//! Covariance reconstruction from single-mode and pairwise quadrature
//! variances, and recovery of the squeezed supermodes.
//!
//! Pair measurements use the balanced combination `x_{i+j} = (x_i + x_j)/√2`,
//! so `⟨x_i x_j⟩ = Δ²x_{i+j} − (Δ²x_i + Δ²x_j)/2`.

use std::collections::BTreeMap;
use std::f64::consts::LN_10;
use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{check_physicality, variance_to_db, GaussianState, Physicality};
use crate::scalar::Real;

/// Eigenvalues of the diagonalized block closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// `dB` per unit relative variance change.
const DB_PER_REL: f64 = 10.0 / LN_10;

/// One measured entry: both quadrature variances and their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEntry<T: Real> {
    pub var_q: T,
    pub var_p: T,
    pub sigma_q: T,
    pub sigma_p: T,
}

impl<T: Real> VarianceEntry<T> {
    pub fn exact(var_q: T, var_p: T) -> Self {
        Self {
            var_q,
            var_p,
            sigma_q: T::zero(),
            sigma_p: T::zero(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = self.var_q > T::zero()
            && self.var_p > T::zero()
            && self.var_q.is_finite()
            && self.var_p.is_finite()
            && self.sigma_q >= T::zero()
            && self.sigma_p >= T::zero();
        if !ok {
            return Err(Error::Domain(format!(
                "{what}: variances must be positive and errors non-negative, got {self:?}"
            )));
        }
        Ok(())
    }
}

type PairMap<T> = BTreeMap<(usize, usize), VarianceEntry<T>>;

/// One Monte-Carlo draw: `Vqq`, `Vpp`, sorted squeeze and antisqueeze dB.
type Draw = (DMatrix<f64>, DMatrix<f64>, Vec<f64>, Vec<f64>);

/// Single-mode variances `Δ²x_i` and pair variances `Δ²x_{i+j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDataset<T: Real> {
    n_modes: usize,
    single: Vec<Option<VarianceEntry<T>>>,
    pairs: BTreeMap<(usize, usize), VarianceEntry<T>>,
}

impl<T: Real> VarianceDataset<T> {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidParameter(
                "dataset needs at least one mode".into(),
            ));
        }
        Ok(Self {
            n_modes,
            single: vec![None; n_modes],
            pairs: BTreeMap::new(),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn set_single(&mut self, i: usize, entry: VarianceEntry<T>) -> Result<()> {
        self.check_index(i)?;
        entry.validate(&format!("single {i}"))?;
        self.single[i] = Some(entry);
        Ok(())
    }

    pub fn set_pair(&mut self, i: usize, j: usize, entry: VarianceEntry<T>) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(Error::InvalidParameter(format!(
                "pair ({i}, {j}) needs distinct modes"
            )));
        }
        entry.validate(&format!("pair ({i}, {j})"))?;
        self.pairs.insert((i.min(j), i.max(j)), entry);
        Ok(())
    }

    pub fn single(&self, i: usize) -> Option<&VarianceEntry<T>> {
        self.single.get(i).and_then(|e| e.as_ref())
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&VarianceEntry<T>> {
        self.pairs.get(&(i.min(j), i.max(j)))
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Missing measurements; a missing single-mode entry `i` shows up as `(i, i)`.
    pub fn missing(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_modes {
            if self.single[i].is_none() {
                out.push((i, i));
            }
        }
        for i in 0..self.n_modes {
            for j in i + 1..self.n_modes {
                if !self.pairs.contains_key(&(i, j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n_modes {
            return Err(Error::InvalidParameter(format!(
                "mode {i} out of range for {} modes",
                self.n_modes
            )));
        }
        Ok(())
    }

    fn entries(&self) -> Result<(Vec<VarianceEntry<T>>, &PairMap<T>)> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(Error::IncompleteDataset { missing });
        }
        Ok((
            self.single.iter().map(|e| e.unwrap()).collect(),
            &self.pairs,
        ))
    }

    /// Reads `kind,i,j,var_q,var_p,sigma_q,sigma_p` rows. The mode count is
    /// the largest index seen plus one.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize::<CsvRow>() {
            rows.push(row?);
        }
        let n = rows
            .iter()
            .map(|r| r.i.max(r.j) + 1)
            .max()
            .ok_or_else(|| Error::Format("variance dataset has no rows".into()))?;
        let mut data = Self::new(n)?;
        for r in rows {
            let entry = VarianceEntry {
                var_q: T::lit(r.var_q),
                var_p: T::lit(r.var_p),
                sigma_q: T::lit(r.sigma_q),
                sigma_p: T::lit(r.sigma_p),
            };
            match r.kind {
                EntryKind::Single if r.i == r.j => data.set_single(r.i, entry)?,
                EntryKind::Single => {
                    return Err(Error::Format(format!(
                        "single row has i = {} but j = {}",
                        r.i, r.j
                    )))
                }
                EntryKind::Pair => data.set_pair(r.i, r.j, entry)?,
            }
        }
        Ok(data)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let row = |kind, i, j, e: &VarianceEntry<T>| CsvRow {
            kind,
            i,
            j,
            var_q: e.var_q.as_f64(),
            var_p: e.var_p.as_f64(),
            sigma_q: e.sigma_q.as_f64(),
            sigma_p: e.sigma_p.as_f64(),
        };
        for (i, e) in self.single.iter().enumerate() {
            if let Some(e) = e {
                w.serialize(row(EntryKind::Single, i, i, e))?;
            }
        }
        for (&(i, j), e) in &self.pairs {
            w.serialize(row(EntryKind::Pair, i, j, e))?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EntryKind {
    Single,
    Pair,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    kind: EntryKind,
    i: usize,
    j: usize,
    var_q: f64,
    var_p: f64,
    sigma_q: f64,
    sigma_p: f64,
}

/// How [`simulate_variance_dataset`] corrupts the ideal variances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementModel {
    /// Each variance is multiplied by `10^{ε/10}`, `ε ~ U(−noise_db, noise_db)`.
    pub noise_db: f64,
    /// Relative optical power per mode. `None` is the balanced ideal; with
    /// unequal powers the combined quadrature becomes
    /// `(√P_i x_i + √P_j x_j)/√(P_i + P_j)`.
    pub band_power: Option<Vec<f64>>,
}

impl MeasurementModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_noise_db(noise_db: f64) -> Self {
        Self {
            noise_db,
            band_power: None,
        }
    }
}

/// Standard deviation of the multiplicative `10^{ε/10}` factor, `ε ~ U(−a, a)`,
/// to first order.
pub fn uniform_db_noise_sigma(noise_db: f64) -> f64 {
    noise_db / DB_PER_REL / 3f64.sqrt()
}

/// Ideal measurement record of `state`, corrupted per `model`.
pub fn simulate_variance_dataset<T: Real, R: Rng + ?Sized>(
    state: &GaussianState<T>,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<VarianceDataset<T>> {
    let phys = check_physicality(state);
    if !phys.physical {
        return Err(Error::Domain(format!(
            "cannot measure an unphysical state (min eigenvalue {:.3e})",
            phys.min_eigenvalue
        )));
    }
    if !(model.noise_db >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise {} dB must be non-negative",
            model.noise_db
        )));
    }
    let n = state.n_modes();
    let power = match &model.band_power {
        Some(p) if p.len() != n || p.iter().any(|&x| !(x > 0.0)) => {
            return Err(Error::InvalidParameter(format!(
                "band power needs {n} positive entries, got {p:?}"
            )))
        }
        Some(p) => p.clone(),
        None => vec![1.0; n],
    };
    let rel = uniform_db_noise_sigma(model.noise_db);
    let mut corrupt = |v: f64| -> (T, T) {
        let factor = if model.noise_db > 0.0 {
            10f64.powf(rng.random_range(-model.noise_db..=model.noise_db) / 10.0)
        } else {
            1.0
        };
        (T::lit(v * factor), T::lit(v * rel))
    };

    let (vqq, vpp) = (state.vqq(), state.vpp());
    let mut data = VarianceDataset::new(n)?;
    for i in 0..n {
        let (var_q, sigma_q) = corrupt(vqq[(i, i)].as_f64());
        let (var_p, sigma_p) = corrupt(vpp[(i, i)].as_f64());
        data.set_single(
            i,
            VarianceEntry {
                var_q,
                var_p,
                sigma_q,
                sigma_p,
            },
        )?;
    }
    for i in 0..n {
        for j in i + 1..n {
            let combined = |v: &DMatrix<T>| {
                let (pi, pj) = (power[i], power[j]);
                (pi * v[(i, i)].as_f64()
                    + pj * v[(j, j)].as_f64()
                    + 2.0 * (pi * pj).sqrt() * v[(i, j)].as_f64())
                    / (pi + pj)
            };
            let (var_q, sigma_q) = corrupt(combined(vqq));
            let (var_p, sigma_p) = corrupt(combined(vpp));
            data.set_pair(
                i,
                j,
                VarianceEntry {
                    var_q,
                    var_p,
                    sigma_q,
                    sigma_p,
                },
            )?;
        }
    }
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T: Real> {
    pub state: GaussianState<T>,
    pub physicality: Physicality,
}

/// Covariance blocks from a complete dataset. Unphysical results are
/// returned as they are, flagged, never repaired.
pub fn reconstruct_covariance<T: Real>(data: &VarianceDataset<T>) -> Result<Reconstruction<T>> {
    let (single, pairs) = data.entries()?;
    let n = data.n_modes();
    let half = T::lit(0.5);
    let block = |pick: fn(&VarianceEntry<T>) -> T| {
        let mut v = DMatrix::zeros(n, n);
        for i in 0..n {
            v[(i, i)] = pick(&single[i]);
        }
        for (&(i, j), e) in pairs {
            let c = pick(e) - (pick(&single[i]) + pick(&single[j])) * half;
            v[(i, j)] = c;
            v[(j, i)] = c;
        }
        v
    };
    let state = GaussianState::new(block(|e| e.var_q), block(|e| e.var_p), "reconstructed")?;
    let physicality = check_physicality(&state);
    if !physicality.physical {
        log::warn!(
            "reconstructed covariance is unphysical (min eigenvalue of V + iJ = {:.3e})",
            physicality.min_eigenvalue
        );
    }
    Ok(Reconstruction { state, physicality })
}

/// Which covariance block was diagonalized to define the supermodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalizedBlock {
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveredMode {
    pub squeeze_db: f64,
    pub antisqueeze_db: f64,
    /// Diagonal of the transformed `Vqq`, dB.
    pub q_db: f64,
    /// Diagonal of the transformed `Vpp`, dB.
    pub p_db: f64,
}

#[derive(Debug, Clone)]
pub struct SupermodeRecovery<T: Real> {
    /// Rows are the recovered modes in the input basis.
    pub transform: DMatrix<T>,
    pub eigen_db: Vec<RecoveredMode>,
    /// `+1` where the q quadrature is the squeezed one, `−1` where p is.
    pub relative_signs: Vec<i8>,
    /// Groups of output positions whose `Vpp` eigenvalues tied and were
    /// reordered by `|q diagonal|`.
    pub tie_breaks: Vec<Vec<usize>>,
    /// Largest off-diagonal magnitude left in the transformed `Vqq`.
    pub residual_q_offdiag: f64,
    pub diagonalized_block: DiagonalizedBlock,
    pub transformed: GaussianState<T>,
}

impl<T: Real> SupermodeRecovery<T> {
    pub fn to_json(&self) -> RecoveryJson {
        RecoveryJson {
            diagonalized_block: self.diagonalized_block,
            modes: self.eigen_db.clone(),
            relative_signs: self.relative_signs.clone(),
            tie_breaks: self.tie_breaks.clone(),
            residual_q_offdiag: self.residual_q_offdiag,
            transform: (0..self.transform.nrows())
                .map(|i| self.transform.row(i).iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecoveryJson {
    pub diagonalized_block: DiagonalizedBlock,
    pub modes: Vec<RecoveredMode>,
    pub relative_signs: Vec<i8>,
    pub tie_breaks: Vec<Vec<usize>>,
    pub residual_q_offdiag: f64,
    pub transform: Vec<Vec<f64>>,
}

/// Diagonalizes `Vpp`, orders its eigenvectors by descending eigenvalue,
/// re-orthogonalizes them by Gram–Schmidt and applies the result to both
/// blocks. The q block inherits the p-block eigenbasis; whatever
/// off-diagonal weight remains there is reported.
pub fn recover_supermodes<T: Real>(state: &GaussianState<T>) -> Result<SupermodeRecovery<T>> {
    let n = state.n_modes();
    let eig = SymmetricEigen::try_new(state.vpp().clone(), T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical("Vpp eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let rows = |order: &[usize]| DMatrix::from_fn(n, n, |k, c| eig.eigenvectors[(c, order[k])]);
    let q_diag = |t: &DMatrix<T>, k: usize| (t.row(k) * state.vqq() * t.row(k).transpose())[(0, 0)];

    // ties: reorder each run of (near-)equal eigenvalues by |q diagonal|
    let mut tie_breaks = Vec::new();
    let t0 = rows(&order);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]])
                .abs()
                .as_f64()
                <= TIE_TOLERANCE
        {
            end += 1;
        }
        if end - start > 1 {
            let mut run: Vec<(usize, T)> = (start..end)
                .map(|k| (order[k], q_diag(&t0, k).abs()))
                .collect();
            run.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            for (k, (idx, _)) in (start..end).zip(run) {
                order[k] = idx;
            }
            tie_breaks.push((start..end).collect());
        }
        start = end;
    }

    let mut t = rows(&order);
    gram_schmidt_rows(&mut t)?;
    let transformed = state.transform(&t, format!("{}/recovered", state.basis()))?;

    let mut eigen_db = Vec::with_capacity(n);
    let mut relative_signs = Vec::with_capacity(n);
    for k in 0..n {
        let q_db = variance_to_db(transformed.vqq()[(k, k)].as_f64())?;
        let p_db = variance_to_db(transformed.vpp()[(k, k)].as_f64())?;
        eigen_db.push(RecoveredMode {
            squeeze_db: q_db.min(p_db),
            antisqueeze_db: q_db.max(p_db),
            q_db,
            p_db,
        });
        relative_signs.push(if q_db <= p_db { 1 } else { -1 });
    }
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                residual = residual.max(transformed.vqq()[(i, j)].abs().as_f64());
            }
        }
    }
    Ok(SupermodeRecovery {
        transform: t,
        eigen_db,
        relative_signs,
        tie_breaks,
        residual_q_offdiag: residual,
        diagonalized_block: DiagonalizedBlock::P,
        transformed,
    })
}

/// Two-pass modified Gram–Schmidt on the rows of `t`, in row order.
fn gram_schmidt_rows<T: Real>(t: &mut DMatrix<T>) -> Result<()> {
    for k in 0..t.nrows() {
        for _ in 0..2 {
            for j in 0..k {
                let proj = t.row(k).dot(&t.row(j));
                let rj = t.row(j).into_owned();
                let mut rk = t.row_mut(k);
                rk -= rj * proj;
            }
        }
        let norm = t.row(k).norm();
        if !(norm > T::default_epsilon()) {
            return Err(Error::Numerical(format!(
                "eigenvector {k} collapsed during Gram-Schmidt"
            )));
        }
        t.row_mut(k).unscale_mut(norm);
    }
    Ok(())
}

/// First-order standard errors of the reconstruction.
#[derive(Debug, Clone)]
pub struct Uncertainty<T: Real> {
    pub sigma_vqq: DMatrix<T>,
    pub sigma_vpp: DMatrix<T>,
    /// Per recovered mode, aligned with [`SupermodeRecovery::eigen_db`].
    pub sigma_q_db: Vec<f64>,
    pub sigma_p_db: Vec<f64>,
}

impl<T: Real> Uncertainty<T> {
    /// Error on the squeezed / antisqueezed value of each recovered mode.
    pub fn sigma_squeeze_antisqueeze_db(&self, rec: &SupermodeRecovery<T>) -> Vec<(f64, f64)> {
        rec.relative_signs
            .iter()
            .zip(self.sigma_q_db.iter().zip(&self.sigma_p_db))
            .map(|(&s, (&q, &p))| if s > 0 { (q, p) } else { (p, q) })
            .collect()
    }
}

/// Propagates the per-entry standard errors through the reconstruction and
/// the recovered-mode diagonals, assuming independent measurements.
///
/// Entry errors combine as `σ²_off = σ²_{i+j} + (σ²_i + σ²_j)/4`. For a
/// fixed unit mode vector `v` the diagonal `vᵀVv` is linear in the raw data,
/// with gradient `v_k² − v_k Σ_{l≠k} v_l` along `Δ²x_k` and `2 v_k v_l`
/// along `Δ²x_{k+l}`.
pub fn propagate_uncertainty<T: Real>(
    data: &VarianceDataset<T>,
    recovery: &SupermodeRecovery<T>,
) -> Result<Uncertainty<T>> {
    let (single, pairs) = data.entries()?;
    let n = data.n_modes();
    if recovery.transform.shape() != (n, n) {
        return Err(Error::InvalidParameter(format!(
            "recovery is for {} modes, dataset has {n}",
            recovery.transform.nrows()
        )));
    }
    let quarter = T::lit(0.25);
    let sigma_block = |pick: fn(&VarianceEntry<T>) -> T| {
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            s[(i, i)] = pick(&single[i]);
        }
        for (&(i, j), e) in pairs {
            let (a, b, c) = (pick(e), pick(&single[i]), pick(&single[j]));
            let v = (a * a + (b * b + c * c) * quarter).sqrt();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
        s
    };
    let diag_sigma_db =
        |pick: fn(&VarianceEntry<T>) -> T, diag: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..n)
                .map(|m| {
                    let v: Vec<f64> = recovery
                        .transform
                        .row(m)
                        .iter()
                        .map(|x| x.as_f64())
                        .collect();
                    let total: f64 = v.iter().sum();
                    let mut var = 0.0;
                    for k in 0..n {
                        let grad = v[k] * v[k] - v[k] * (total - v[k]);
                        var += (grad * pick(&single[k]).as_f64()).powi(2);
                    }
                    for (&(k, l), e) in pairs {
                        var += (2.0 * v[k] * v[l] * pick(e).as_f64()).powi(2);
                    }
                    DB_PER_REL * var.sqrt() / diag(m)
                })
                .collect()
        };
    let tq = recovery.transformed.vqq();
    let tp = recovery.transformed.vpp();
    Ok(Uncertainty {
        sigma_vqq: sigma_block(|e| e.sigma_q),
        sigma_vpp: sigma_block(|e| e.sigma_p),
        sigma_q_db: diag_sigma_db(|e| e.sigma_q, &|m| tq[(m, m)].as_f64()),
        sigma_p_db: diag_sigma_db(|e| e.sigma_p, &|m| tp[(m, m)].as_f64()),
    })
}

/// Monte-Carlo spread of the reconstruction: each draw perturbs every raw
/// entry by an independent Gaussian of its stated error, reconstructs and
/// recovers. Draw `k` uses ChaCha stream `k` of `master_seed`, so the
/// result does not depend on thread scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpread {
    pub n_draws: usize,
    pub sigma_vqq: DMatrix<f64>,
    pub sigma_vpp: DMatrix<f64>,
    /// Spread of the sorted squeeze / antisqueeze values, dB.
    pub sigma_squeeze_db: Vec<f64>,
    pub sigma_antisqueeze_db: Vec<f64>,
}

pub fn monte_carlo_uncertainty<T: Real>(
    data: &VarianceDataset<T>,
    n_draws: usize,
    master_seed: u64,
) -> Result<MonteCarloSpread> {
    if n_draws < 2 {
        return Err(Error::InvalidParameter(
            "need at least two Monte-Carlo draws".into(),
        ));
    }
    let (single, pairs) = data.entries()?;
    let n = data.n_modes();
    let draws: Vec<Draw> = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(k as u64);
            let mut jitter = |x: T, s: T| -> Result<T> {
                let (x, s) = (x.as_f64(), s.as_f64());
                if s == 0.0 {
                    return Ok(T::lit(x));
                }
                let d = Normal::new(x, s).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                // a draw can't make a variance non-positive
                Ok(T::lit(d.sample(&mut rng).max(1e-12)))
            };
            let mut perturbed = VarianceDataset::new(n)?;
            for (i, e) in single.iter().enumerate() {
                let entry = VarianceEntry {
                    var_q: jitter(e.var_q, e.sigma_q)?,
                    var_p: jitter(e.var_p, e.sigma_p)?,
                    ..*e
                };
                perturbed.set_single(i, entry)?;
            }
            for (&(i, j), e) in pairs {
                let entry = VarianceEntry {
                    var_q: jitter(e.var_q, e.sigma_q)?,
                    var_p: jitter(e.var_p, e.sigma_p)?,
                    ..*e
                };
                perturbed.set_pair(i, j, entry)?;
            }
            let rec = reconstruct_covariance(&perturbed)?;
            let sup = recover_supermodes(&rec.state)?;
            let to64 = |m: &DMatrix<T>| m.map(|x| x.as_f64());
            let mut sq: Vec<f64> = sup.eigen_db.iter().map(|m| m.squeeze_db).collect();
            let mut asq: Vec<f64> = sup.eigen_db.iter().map(|m| m.antisqueeze_db).collect();
            sq.sort_by(f64::total_cmp);
            asq.sort_by(f64::total_cmp);
            Ok((to64(rec.state.vqq()), to64(rec.state.vpp()), sq, asq))
        })
        .collect::<Result<_>>()?;

    let count = n_draws as f64;
    let spread_m = |pick: &dyn Fn(&Draw) -> &DMatrix<f64>| {
        let mean = draws
            .iter()
            .map(pick)
            .fold(DMatrix::zeros(n, n), |a, b| a + b)
            / count;
        let var = draws
            .iter()
            .map(|d| (pick(d) - &mean).map(|x| x * x))
            .fold(DMatrix::zeros(n, n), |a, b| a + b)
            / (count - 1.0);
        var.map(f64::sqrt)
    };
    let spread_v = |pick: &dyn Fn(&Draw) -> &Vec<f64>| {
        (0..n)
            .map(|k| {
                let mean = draws.iter().map(|d| pick(d)[k]).sum::<f64>() / count;
                (draws
                    .iter()
                    .map(|d| (pick(d)[k] - mean).powi(2))
                    .sum::<f64>()
                    / (count - 1.0))
                    .sqrt()
            })
            .collect()
    };
    Ok(MonteCarloSpread {
        n_draws,
        sigma_vqq: spread_m(&|d| &d.0),
        sigma_vpp: spread_m(&|d| &d.1),
        sigma_squeeze_db: spread_v(&|d| &d.2),
        sigma_antisqueeze_db: spread_v(&|d| &d.3),
    })
}
