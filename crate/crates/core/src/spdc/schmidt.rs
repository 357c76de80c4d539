use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::jsa::JointSpectralAmplitude;
use crate::error::{Error, Result};
use crate::modes::ModeBasis;

/// Singular values below this fraction of the largest are treated as zero.
const RANK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMethod {
    /// Real symmetric amplitude: symmetric eigendecomposition, `|eig|` are
    /// the singular values and left/right vectors differ by the eigenvalue sign.
    RealSymmetric,
    /// General complex amplitude: full SVD.
    ComplexSvd,
}

/// Schmidt (Bloch–Messiah) decomposition of a joint spectral amplitude.
///
/// `A ≈ Σ_j λ_j e^{iθ_j} S_j(ωs) S_j(ωi)` with real supermodes `S_j`.
/// The orientation `θ_j` says which quadrature mode `j` squeezes:
/// `0` squeezes `q`, `π` squeezes `p`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Non-zero Schmidt coefficients, non-increasing, `Σ λ² = 1`.
    pub lambdas: Vec<f64>,
    pub modes: ModeBasis<f64>,
    /// Orientation `θ_j` of each kept mode, radians in `(−π, π]`.
    pub orientation: Vec<f64>,
    pub schmidt_k: f64,
    /// `max_j ‖A m_j − λ_j e^{iθ_j} m_j‖` over the kept modes (unit vectors).
    /// Small when left and right singular vectors agree up to a phase.
    pub pairing_residual: f64,
    /// Largest imaginary remainder discarded when making modes real.
    pub imaginary_residual: f64,
    pub method: DecompositionMethod,
    pub sellmeier: String,
}

impl SchmidtDecomposition {
    /// `cos θ_j`, i.e. `+1` for q-squeezed and `−1` for p-squeezed real modes.
    pub fn quadrature_signs(&self) -> Vec<f64> {
        self.orientation.iter().map(|t| t.cos()).collect()
    }

    pub fn to_json(&self) -> SchmidtJson {
        SchmidtJson {
            lambdas: self.lambdas.clone(),
            k: self.schmidt_k,
            sellmeier_set: self.sellmeier.clone(),
            orientation: self.orientation.clone(),
            method: self.method,
            pairing_residual: self.pairing_residual,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SchmidtJson {
    pub lambdas: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub sellmeier_set: String,
    pub orientation: Vec<f64>,
    pub method: DecompositionMethod,
    pub pairing_residual: f64,
}

pub fn schmidt_number(lambdas: &[f64]) -> f64 {
    let s2: f64 = lambdas.iter().map(|l| l * l).sum();
    let s4: f64 = lambdas.iter().map(|l| l.powi(4)).sum();
    s2 * s2 / s4
}

/// Decomposes `jsa`, keeping `n_keep` supermodes.
///
/// Real exchange-symmetric amplitudes (everything [`compute_jsa`] produces)
/// take the symmetric-eigen route; anything else goes through a complex SVD.
///
/// [`compute_jsa`]: super::compute_jsa
pub fn schmidt_decompose(
    jsa: &JointSpectralAmplitude,
    n_keep: usize,
) -> Result<SchmidtDecomposition> {
    let real = jsa.amplitude.iter().all(|a| a.im == 0.0) && jsa.exchange_asymmetry() <= 1e-12;
    if real {
        decompose_real_symmetric(jsa, n_keep)
    } else {
        decompose_svd(jsa, n_keep)
    }
}

fn check_keep(jsa: &JointSpectralAmplitude, n_keep: usize) -> Result<()> {
    let n = jsa.grid.n_points();
    if n_keep == 0 || n_keep > n {
        return Err(Error::InvalidParameter(format!(
            "cannot keep {n_keep} modes of a {n}-point grid"
        )));
    }
    Ok(())
}

fn diagnostics(a: &DMatrix<Complex64>) -> String {
    let non_finite = a
        .iter()
        .filter(|z| !z.re.is_finite() || !z.im.is_finite())
        .count();
    let max = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min_nonzero = a
        .iter()
        .map(|z| z.norm())
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min);
    format!(
        "{}x{} matrix, Frobenius norm {:.3e}, max |a| {:.3e}, min nonzero |a| {:.3e}, {} non-finite entries",
        a.nrows(),
        a.ncols(),
        a.norm(),
        max,
        min_nonzero,
        non_finite
    )
}

pub(crate) fn decompose_real_symmetric(
    jsa: &JointSpectralAmplitude,
    n_keep: usize,
) -> Result<SchmidtDecomposition> {
    check_keep(jsa, n_keep)?;
    let a = jsa.amplitude.map(|z| z.re);
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "symmetric eigensolve impossible: {}",
            diagnostics(&jsa.amplitude)
        )));
    }
    let eig = SymmetricEigen::try_new(a.clone(), 1e-15, 0).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolve did not converge: {}",
            diagnostics(&jsa.amplitude)
        ))
    })?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .abs()
            .total_cmp(&eig.eigenvalues[i].abs())
    });

    let singular: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].abs()).collect();
    let mut vectors = Vec::with_capacity(n_keep);
    let mut orientation = Vec::with_capacity(n_keep);
    let mut residual = 0.0f64;
    for &i in order.iter().take(n_keep) {
        let v = canonical_sign(eig.eigenvectors.column(i).into_owned());
        let value = eig.eigenvalues[i];
        residual = residual.max((&a * &v - &v * value).norm());
        orientation.push(if value < 0.0 { PI } else { 0.0 });
        vectors.push(v);
    }
    finish(
        jsa,
        singular,
        vectors,
        orientation,
        residual,
        0.0,
        DecompositionMethod::RealSymmetric,
    )
}

/// General route: `A = U Σ Vᴴ`. For an exchange-symmetric amplitude
/// `v_j = conj(u_j) e^{iφ_j}`; the supermode is `u_j` with its global phase
/// removed.
pub fn decompose_svd(jsa: &JointSpectralAmplitude, n_keep: usize) -> Result<SchmidtDecomposition> {
    check_keep(jsa, n_keep)?;
    let a = &jsa.amplitude;
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "SVD impossible: {}",
            diagnostics(a)
        )));
    }
    let svd = SVD::try_new(a.clone(), true, true, 1e-15, 0)
        .ok_or_else(|| Error::Numerical(format!("SVD did not converge: {}", diagnostics(a))))?;
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("Vᴴ requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let mut vectors = Vec::with_capacity(n_keep);
    let mut orientation = Vec::with_capacity(n_keep);
    let mut residual = 0.0f64;
    let mut imaginary = 0.0f64;
    for (rank, &i) in order.iter().take(n_keep).enumerate() {
        let uj = u.column(i).into_owned();
        let vj = v_t.row(i).transpose().map(|z| z.conj());
        let peak = uj.map(|z| z.norm()).iamax();
        let psi = uj[peak].arg();
        let rotated = uj.map(|z| z * Complex64::from_polar(1.0, -psi));
        imaginary = imaginary.max(rotated.map(|z| z.im).norm());
        let m = rotated.map(|z| z.re);
        let m = canonical_sign(&m / m.norm());
        // v_j^T u_j = e^{iφ_j}
        let phi = vj
            .iter()
            .zip(uj.iter())
            .map(|(v, u)| v * u)
            .sum::<Complex64>()
            .arg();
        let theta = wrap_angle(2.0 * psi - phi);
        // the sign flip in canonical_sign does not change m mᵀ
        let mc = m.map(|x| Complex64::new(x, 0.0));
        let target = &mc * Complex64::from_polar(singular[rank], theta);
        residual = residual.max((a * &mc - target).norm());
        orientation.push(theta);
        vectors.push(m);
    }
    finish(
        jsa,
        singular,
        vectors,
        orientation,
        residual,
        imaginary,
        DecompositionMethod::ComplexSvd,
    )
}

fn finish(
    jsa: &JointSpectralAmplitude,
    singular: Vec<f64>,
    vectors: Vec<DVector<f64>>,
    orientation: Vec<f64>,
    pairing_residual: f64,
    imaginary_residual: f64,
    method: DecompositionMethod,
) -> Result<SchmidtDecomposition> {
    let top = singular.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::Numerical(
            "amplitude has no non-zero singular value".into(),
        ));
    }
    let norm = singular.iter().map(|s| s * s).sum::<f64>().sqrt();
    let lambdas: Vec<f64> = singular
        .iter()
        .filter(|&&s| s > RANK_CUTOFF * top)
        .map(|s| s / norm)
        .collect();
    let grid = jsa.grid;
    let n = grid.n_points();
    let scale = 1.0 / grid.spacing().sqrt();
    let functions = DMatrix::from_fn(vectors.len(), n, |k, i| vectors[k][i] * scale);
    if pairing_residual > 1e-6 {
        log::warn!(
            "left/right singular vectors disagree beyond a phase (residual {pairing_residual:.3e})"
        );
    }
    Ok(SchmidtDecomposition {
        schmidt_k: schmidt_number(&lambdas),
        lambdas,
        modes: ModeBasis::new(grid, functions, "supermode")?,
        orientation,
        pairing_residual,
        imaginary_residual,
        method,
        sellmeier: jsa.sellmeier.clone(),
    })
}

/// Flips `v` so its first substantial entry (at least half the peak
/// magnitude) is positive. Parity-symmetric modes have two equal peaks, so
/// the sign of the peak alone is not stable.
fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let peak = v.amax();
    let first = v
        .iter()
        .find(|x| x.abs() >= 0.5 * peak)
        .copied()
        .unwrap_or(0.0);
    if first < 0.0 {
        -v
    } else {
        v
    }
}

fn wrap_angle(x: f64) -> f64 {
    let mut t = x % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}
