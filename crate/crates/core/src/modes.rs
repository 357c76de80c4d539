//! Spectral mode functions sampled on a [`FrequencyGrid`] and the basis
//! changes they induce on covariance matrices.
//!
//! Functions are real and normalized under the grid quadrature
//! `Σ_k f(ω_k) g(ω_k) Δω`.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{symmetrize, GaussianState};
use crate::grid::{nm_to_omega, nm_width_to_omega, omega_to_nm, FrequencyGrid};
use crate::scalar::Real;

/// Spectral span of the shaped local oscillator used to flag wide HG modes.
pub const DEFAULT_LO_WINDOW_NM: f64 = 40.0;

/// Edge amplitude (relative to peak) above which a mode counts as truncated.
const TRUNCATION_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisWarning {
    /// Mode still has appreciable amplitude at the grid boundary.
    Truncated { mode: usize, edge_ratio: f64 },
    /// Estimated spectral support exceeds the local-oscillator window.
    ExceedsLoWindow {
        mode: usize,
        support_nm: f64,
        window_nm: f64,
    },
}

/// Ordered set of orthonormal real mode functions, one per row.
#[derive(Debug, Clone)]
pub struct ModeBasis<T: Real> {
    grid: FrequencyGrid,
    functions: DMatrix<T>,
    label: String,
    warnings: Vec<BasisWarning>,
}

impl<T: Real> ModeBasis<T> {
    /// Checks shape and orthonormality (Gram = I within [`Real::ortho_tol`]).
    pub fn new(
        grid: FrequencyGrid,
        functions: DMatrix<T>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if functions.ncols() != grid.n_points() {
            return Err(Error::InvalidParameter(format!(
                "mode functions have {} samples, grid has {}",
                functions.ncols(),
                grid.n_points()
            )));
        }
        if functions.nrows() == 0 || functions.nrows() > functions.ncols() {
            return Err(Error::InvalidParameter(format!(
                "{} modes on {} grid points",
                functions.nrows(),
                functions.ncols()
            )));
        }
        let basis = Self {
            grid,
            functions,
            label: label.into(),
            warnings: Vec::new(),
        };
        let defect = basis.orthonormality_defect();
        if defect > T::ortho_tol() {
            return Err(Error::InvalidParameter(format!(
                "mode functions not orthonormal (max |G - I| = {defect})"
            )));
        }
        Ok(basis)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn functions(&self) -> &DMatrix<T> {
        &self.functions
    }

    pub fn n_modes(&self) -> usize {
        self.functions.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn warnings(&self) -> &[BasisWarning] {
        &self.warnings
    }

    fn weight(&self) -> T {
        T::lit(self.grid.spacing())
    }

    pub fn gram(&self) -> DMatrix<T> {
        &self.functions * self.functions.transpose() * self.weight()
    }

    pub fn orthonormality_defect(&self) -> T {
        let g = self.gram();
        (g - DMatrix::identity(self.n_modes(), self.n_modes())).amax()
    }

    /// Keeps the first `m` modes.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "cannot keep {m} of {} modes",
                self.n_modes()
            )));
        }
        Ok(Self {
            grid: self.grid,
            functions: self.functions.rows(0, m).into_owned(),
            label: self.label.clone(),
            warnings: self
                .warnings
                .iter()
                .filter(|w| match w {
                    BasisWarning::Truncated { mode, .. }
                    | BasisWarning::ExceedsLoWindow { mode, .. } => *mode < m,
                })
                .cloned()
                .collect(),
        })
    }

    /// Wavelength column followed by one column per mode.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["wavelength_nm".to_string()];
        header.extend((0..self.n_modes()).map(|k| format!("{}_{k}", self.label)));
        w.write_record(&header)?;
        for i in 0..self.grid.n_points() {
            let mut row = vec![format!("{}", self.grid.wavelength_nm(i))];
            row.extend((0..self.n_modes()).map(|k| format!("{}", self.functions[(k, i)].as_f64())));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub(crate) fn from_f64(
        grid: FrequencyGrid,
        functions: &DMatrix<f64>,
        label: impl Into<String>,
        warnings: Vec<BasisWarning>,
    ) -> Result<Self> {
        let mut basis = Self::new(grid, functions.map(T::lit), label)?;
        basis.warnings = warnings;
        Ok(basis)
    }
}

/// Modified Gram–Schmidt (two passes) of the rows of `f` under weight `w`.
pub(crate) fn orthonormalize_rows(f: &mut DMatrix<f64>, w: f64) -> Result<()> {
    for k in 0..f.nrows() {
        for _ in 0..2 {
            for j in 0..k {
                let proj = f.row(k).dot(&f.row(j)) * w;
                let rj = f.row(j).into_owned();
                let mut rk = f.row_mut(k);
                rk -= rj * proj;
            }
        }
        let norm = (f.row(k).norm_squared() * w).sqrt();
        if !(norm > 1e-300) {
            return Err(Error::Numerical(format!(
                "mode {k} is linearly dependent on the preceding modes"
            )));
        }
        f.row_mut(k).scale_mut(1.0 / norm);
    }
    Ok(())
}

/// Hermite–Gauss modes in angular frequency, re-orthonormalized on the grid.
///
/// `hg0_fwhm_nm` is the intensity FWHM of `|HG0|²`.
pub fn hermite_gauss_basis<T: Real>(
    grid: &FrequencyGrid,
    center_nm: f64,
    hg0_fwhm_nm: f64,
    n_modes: usize,
) -> Result<ModeBasis<T>> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("need at least one HG mode".into()));
    }
    if n_modes > grid.n_points() {
        return Err(Error::InvalidParameter(format!(
            "{n_modes} HG modes on {} grid points",
            grid.n_points()
        )));
    }
    if !(center_nm > 0.0 && hg0_fwhm_nm > 0.0) {
        return Err(Error::InvalidParameter(
            "HG centre and width must be positive".into(),
        ));
    }
    let w0 = nm_to_omega(center_nm);
    // |ψ0(x)|² = e^{-x²}/√π has FWHM 2√ln2 in x
    let sigma = nm_width_to_omega(center_nm, hg0_fwhm_nm) / (2.0 * LN_2.sqrt());
    let n = grid.n_points();
    let mut f = DMatrix::zeros(n_modes, n);
    for i in 0..n {
        let x = (grid.omega(i) - w0) / sigma;
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
        for m in 0..n_modes {
            f[(m, i)] = cur / sigma.sqrt();
            let next = (2.0 / (m as f64 + 1.0)).sqrt() * x * cur
                - (m as f64 / (m as f64 + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    orthonormalize_rows(&mut f, grid.spacing())?;

    let mut warnings = Vec::new();
    for m in 0..n_modes {
        let row = f.row(m);
        let peak = row.amax();
        let edge = row[0].abs().max(row[n - 1].abs());
        if edge > TRUNCATION_THRESHOLD * peak {
            warnings.push(BasisWarning::Truncated {
                mode: m,
                edge_ratio: edge / peak,
            });
        }
        let support_nm = ((2 * m + 1) as f64).sqrt() * hg0_fwhm_nm;
        if support_nm > DEFAULT_LO_WINDOW_NM {
            warnings.push(BasisWarning::ExceedsLoWindow {
                mode: m,
                support_nm,
                window_nm: DEFAULT_LO_WINDOW_NM,
            });
        }
    }
    ModeBasis::from_f64(*grid, &f, "hg", warnings)
}

/// Local-oscillator spectral amplitude: Gaussian in wavelength (intensity
/// FWHM `fwhm_nm`), optionally clipped to a window by the pulse shaper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoSpectrum {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub window_nm: Option<(f64, f64)>,
}

impl LoSpectrum {
    pub fn amplitude(&self, lambda_nm: f64) -> f64 {
        if let Some((lo, hi)) = self.window_nm {
            if lambda_nm < lo || lambda_nm > hi {
                return 0.0;
            }
        }
        let d = (lambda_nm - self.center_nm) / self.fwhm_nm;
        (-2.0 * LN_2 * d * d).exp()
    }
}

impl Default for LoSpectrum {
    fn default() -> Self {
        Self {
            center_nm: 795.0,
            fwhm_nm: 42.0,
            window_nm: Some((775.0, 815.0)),
        }
    }
}

/// Contiguous wavelength bands used as measurement modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrexelSpec {
    band_edges_nm: Vec<f64>,
}

impl FrexelSpec {
    pub fn new(band_edges_nm: Vec<f64>) -> Result<Self> {
        if band_edges_nm.len() < 2 {
            return Err(Error::Configuration(
                "frexels need at least two band edges".into(),
            ));
        }
        if band_edges_nm.windows(2).any(|e| !(e[1] > e[0])) {
            return Err(Error::Configuration(format!(
                "frexel edges must be strictly increasing: {band_edges_nm:?}"
            )));
        }
        Ok(Self { band_edges_nm })
    }

    /// `n_bands` adjacent bands of `width_nm` starting at `start_nm`.
    pub fn uniform(start_nm: f64, width_nm: f64, n_bands: usize) -> Result<Self> {
        Self::new(
            (0..=n_bands)
                .map(|k| start_nm + k as f64 * width_nm)
                .collect(),
        )
    }

    pub fn n_bands(&self) -> usize {
        self.band_edges_nm.len() - 1
    }

    pub fn band_edges_nm(&self) -> &[f64] {
        &self.band_edges_nm
    }

    pub fn band_of(&self, lambda_nm: f64) -> Option<usize> {
        let e = &self.band_edges_nm;
        if lambda_nm < e[0] || lambda_nm >= e[e.len() - 1] {
            return None;
        }
        Some(e.partition_point(|&x| x <= lambda_nm) - 1)
    }

    /// Pairs of bands that map onto each other under `ω → 2ω_deg − ω`,
    /// innermost pair first. Bands without a mutual partner are left out.
    pub fn mirror_pairs(&self, degenerate_nm: f64) -> Vec<(usize, usize)> {
        let w_deg = nm_to_omega(degenerate_nm);
        let centers: Vec<f64> = self
            .band_edges_nm
            .windows(2)
            .map(|e| 0.5 * (nm_to_omega(e[0]) + nm_to_omega(e[1])))
            .collect();
        let partner = |k: usize| -> Option<usize> {
            let target = omega_to_nm(2.0 * w_deg - centers[k]);
            self.band_of(target)
        };
        let mut pairs: Vec<(usize, usize)> = (0..self.n_bands())
            .filter_map(|k| {
                let j = partner(k)?;
                (j > k && partner(j) == Some(k)).then_some((k, j))
            })
            .collect();
        pairs.sort_by(|a, b| {
            let da = (centers[a.0] - w_deg)
                .abs()
                .min((centers[a.1] - w_deg).abs());
            let db = (centers[b.0] - w_deg)
                .abs()
                .min((centers[b.1] - w_deg).abs());
            da.total_cmp(&db)
        });
        pairs
    }
}

impl Default for FrexelSpec {
    fn default() -> Self {
        Self::uniform(775.0, 5.0, 8).expect("default frexels")
    }
}

#[derive(Debug, Clone)]
pub struct FrexelBasis<T: Real> {
    pub basis: ModeBasis<T>,
    /// `∫_band |LO|² dω`, in units of the first band.
    pub band_power: Vec<f64>,
    /// `band_power / mean − 1` for every band.
    pub power_imbalance: Vec<f64>,
}

/// Normalized (optionally LO-weighted) band indicators.
pub fn frexel_basis<T: Real>(
    grid: &FrequencyGrid,
    spec: &FrexelSpec,
    lo: Option<&LoSpectrum>,
) -> Result<FrexelBasis<T>> {
    let edges = spec.band_edges_nm();
    if edges[0] < grid.lambda_min_nm() || edges[edges.len() - 1] > grid.lambda_max_nm() {
        return Err(Error::Configuration(format!(
            "frexel bands [{}, {}] nm exceed the grid",
            edges[0],
            edges[edges.len() - 1]
        )));
    }
    let n = grid.n_points();
    let w = grid.spacing();
    let mut f = DMatrix::zeros(spec.n_bands(), n);
    for i in 0..n {
        let lambda = grid.wavelength_nm(i);
        if let Some(b) = spec.band_of(lambda) {
            f[(b, i)] = lo.map_or(1.0, |lo| lo.amplitude(lambda));
        }
    }
    let mut band_power = Vec::with_capacity(spec.n_bands());
    for b in 0..spec.n_bands() {
        let p = f.row(b).norm_squared() * w;
        if !(p > 0.0) {
            return Err(Error::Configuration(format!(
                "frexel band {b} [{}, {}] nm contains no weighted grid point",
                edges[b],
                edges[b + 1]
            )));
        }
        band_power.push(p);
        f.row_mut(b).scale_mut(1.0 / p.sqrt());
    }
    let p0 = band_power[0];
    band_power.iter_mut().for_each(|p| *p /= p0);
    let mean = band_power.iter().sum::<f64>() / band_power.len() as f64;
    let power_imbalance = band_power.iter().map(|p| p / mean - 1.0).collect();
    Ok(FrexelBasis {
        basis: ModeBasis::from_f64(*grid, &f, "frexel", Vec::new())?,
        band_power,
        power_imbalance,
    })
}

/// `O_kj = Σ a_k(ω) b_j(ω) Δω`.
pub fn overlap_matrix<T: Real>(a: &ModeBasis<T>, b: &ModeBasis<T>) -> Result<DMatrix<T>> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidParameter(format!(
            "bases '{}' and '{}' live on different grids",
            a.label(),
            b.label()
        )));
    }
    Ok(a.functions() * b.functions().transpose() * a.weight())
}

/// Re-expresses a state given in basis `b` in basis `a`, with `O` mapping
/// `b → a`. The part of each `a` mode outside the span of `b` sees vacuum:
/// `V_a = O (V_b − I) Oᵀ + I`.
pub fn project_state<T: Real>(
    state: &GaussianState<T>,
    o: &DMatrix<T>,
    basis: impl Into<String>,
) -> Result<GaussianState<T>> {
    if o.ncols() != state.n_modes() {
        return Err(Error::InvalidParameter(format!(
            "overlap has {} columns for a {}-mode state",
            o.ncols(),
            state.n_modes()
        )));
    }
    let limit = T::one() + T::lit(1e-6);
    for (k, row) in o.row_iter().enumerate() {
        let norm = row.norm();
        if !(norm <= limit) {
            return Err(Error::InvalidProjection {
                row: k,
                norm: norm.as_f64(),
            });
        }
    }
    let n_in = state.n_modes();
    let m = o.nrows();
    let eye_in = DMatrix::<T>::identity(n_in, n_in);
    let eye_out = DMatrix::<T>::identity(m, m);
    let vqq = symmetrize(o * (state.vqq() - &eye_in) * o.transpose()) + &eye_out;
    let vpp = symmetrize(o * (state.vpp() - &eye_in) * o.transpose()) + &eye_out;
    GaussianState::new(vqq, vpp, basis)
}
