//! Covariance-matrix description of zero-mean multimode Gaussian states.
//!
//! Quadratures are ordered `(q_1..q_n, p_1..p_n)` and normalized so that the
//! vacuum has unit variance. Only the `qq` and `pp` blocks are stored; the
//! `qp` cross block is identically zero for the real-pump states handled here.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Multimode Gaussian state `V = diag(Vqq, Vpp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState<T: Real> {
    vqq: DMatrix<T>,
    vpp: DMatrix<T>,
    basis: String,
}

impl<T: Real> GaussianState<T> {
    pub fn new(vqq: DMatrix<T>, vpp: DMatrix<T>, basis: impl Into<String>) -> Result<Self> {
        let n = vqq.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "state needs at least one mode".into(),
            ));
        }
        if !vqq.is_square() || vpp.shape() != (n, n) {
            return Err(Error::InvalidParameter(format!(
                "block shapes {:?} and {:?} do not form an n-mode state",
                vqq.shape(),
                vpp.shape()
            )));
        }
        check_symmetric(&vqq, "Vqq")?;
        check_symmetric(&vpp, "Vpp")?;
        Ok(Self {
            vqq,
            vpp,
            basis: basis.into(),
        })
    }

    pub fn vacuum(n_modes: usize, basis: impl Into<String>) -> Self {
        Self {
            vqq: DMatrix::identity(n_modes, n_modes),
            vpp: DMatrix::identity(n_modes, n_modes),
            basis: basis.into(),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.vqq.nrows()
    }

    pub fn vqq(&self) -> &DMatrix<T> {
        &self.vqq
    }

    pub fn vpp(&self) -> &DMatrix<T> {
        &self.vpp
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    pub fn with_basis(mut self, basis: impl Into<String>) -> Self {
        self.basis = basis.into();
        self
    }

    /// Full `2n x 2n` covariance matrix.
    pub fn full_matrix(&self) -> DMatrix<T> {
        let n = self.n_modes();
        let mut v = DMatrix::zeros(2 * n, 2 * n);
        v.view_mut((0, 0), (n, n)).copy_from(&self.vqq);
        v.view_mut((n, n), (n, n)).copy_from(&self.vpp);
        v
    }

    /// Applies the same real orthogonal mode transform `O` to both blocks.
    /// Rows of `O` are the new modes expressed in the current basis.
    pub fn transform(&self, o: &DMatrix<T>, basis: impl Into<String>) -> Result<Self> {
        if o.ncols() != self.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "transform has {} columns for a {}-mode state",
                o.ncols(),
                self.n_modes()
            )));
        }
        let vqq = symmetrize(o * &self.vqq * o.transpose());
        let vpp = symmetrize(o * &self.vpp * o.transpose());
        Self::new(vqq, vpp, basis)
    }

    /// Per-mode squeezing read off the diagonal.
    pub fn squeezing_report(&self) -> Result<Vec<SqueezingReportEntry>> {
        (0..self.n_modes())
            .map(|j| {
                let q = variance_to_db(self.vqq[(j, j)].as_f64())?;
                let p = variance_to_db(self.vpp[(j, j)].as_f64())?;
                Ok(SqueezingReportEntry {
                    mode_index: j,
                    squeeze_db: q.min(p),
                    antisqueeze_db: q.max(p),
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> StateJson {
        StateJson {
            n_modes: self.n_modes(),
            basis: self.basis.clone(),
            vqq: rows_of(&self.vqq),
            vpp: rows_of(&self.vpp),
        }
    }

    pub fn from_json(json: &StateJson) -> Result<Self> {
        let vqq = matrix_from_rows(&json.vqq, "Vqq")?;
        let vpp = matrix_from_rows(&json.vpp, "Vpp")?;
        if vqq.nrows() != json.n_modes {
            return Err(Error::Format(format!(
                "n_modes = {} but Vqq is {}x{}",
                json.n_modes,
                vqq.nrows(),
                vqq.ncols()
            )));
        }
        Self::new(vqq, vpp, json.basis.clone())
    }
}

/// On-disk form of a [`GaussianState`]: full row-major matrices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateJson {
    pub n_modes: usize,
    pub basis: String,
    #[serde(rename = "Vqq")]
    pub vqq: Vec<Vec<f64>>,
    #[serde(rename = "Vpp")]
    pub vpp: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReportEntry {
    pub mode_index: usize,
    pub squeeze_db: f64,
    pub antisqueeze_db: f64,
}

/// The symplectic form `J = [[0, -I], [I, 0]]` in `(q, p)` ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n_modes: usize,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes }
    }

    pub fn matrix<T: Real>(&self) -> DMatrix<T> {
        let n = self.n_modes;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(k, n + k)] = -T::one();
            j[(n + k, k)] = T::one();
        }
        j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physicality {
    pub min_eigenvalue: f64,
    pub physical: bool,
}

/// Squeezed vacuum with `Vqq = diag(e^{-2r})`, `Vpp = diag(e^{2r})`.
/// Positive `r` squeezes `q`; negative `r` squeezes `p`.
pub fn make_squeezed_vacuum<T: Real>(r_list: &[T]) -> Result<GaussianState<T>> {
    if r_list.is_empty() {
        return Err(Error::InvalidParameter("empty squeezing list".into()));
    }
    if let Some((j, r)) = r_list.iter().enumerate().find(|(_, r)| !r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "squeezing parameter {j} is not finite ({r})"
        )));
    }
    let two = T::lit(2.0);
    let q = DMatrix::from_diagonal(
        &r_list
            .iter()
            .map(|&r| (-two * r).exp())
            .collect::<Vec<_>>()
            .into(),
    );
    let p = DMatrix::from_diagonal(
        &r_list
            .iter()
            .map(|&r| (two * r).exp())
            .collect::<Vec<_>>()
            .into(),
    );
    GaussianState::new(q, p, "squeezed")
}

/// Pure-loss channel of transmission `eta`: `V -> eta V + (1 - eta) I`.
pub fn apply_loss<T: Real>(state: &GaussianState<T>, eta: T) -> Result<GaussianState<T>> {
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "transmission {eta} outside [0, 1]"
        )));
    }
    let n = state.n_modes();
    let floor = DMatrix::identity(n, n) * (T::one() - eta);
    Ok(GaussianState {
        vqq: &state.vqq * eta + &floor,
        vpp: &state.vpp * eta + &floor,
        basis: state.basis.clone(),
    })
}

pub fn variance_to_db(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("variance {v} has no decibel value")));
    }
    Ok(10.0 * v.log10())
}

pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Smallest eigenvalue of the Hermitian matrix `V + iJ`.
pub fn check_physicality<T: Real>(state: &GaussianState<T>) -> Physicality {
    let n = state.n_modes();
    let re = state.full_matrix();
    let im = SymplecticForm::new(n).matrix::<T>();
    match hermitian_min_eigenvalue(&re, &im) {
        Some(min) => Physicality {
            min_eigenvalue: min.as_f64(),
            physical: min >= -T::eig_tol(),
        },
        None => Physicality {
            min_eigenvalue: f64::NAN,
            physical: false,
        },
    }
}

/// Smallest eigenvalue of the Hermitian matrix `re + i im`.
///
/// Uses the real symmetric embedding `[[re, -im], [im, re]]`, whose spectrum
/// is that of `re + i im` with every eigenvalue doubled.
/// `None` if the eigensolver does not converge.
pub(crate) fn hermitian_min_eigenvalue<T: Real>(re: &DMatrix<T>, im: &DMatrix<T>) -> Option<T> {
    let m = re.nrows();
    let mut big = DMatrix::zeros(2 * m, 2 * m);
    big.view_mut((0, 0), (m, m)).copy_from(re);
    big.view_mut((m, m), (m, m)).copy_from(re);
    big.view_mut((0, m), (m, m)).copy_from(&(-im));
    big.view_mut((m, 0), (m, m)).copy_from(im);
    SymmetricEigen::try_new(big, T::default_epsilon(), 1000 * m.max(1)).map(|e| e.eigenvalues.min())
}

pub(crate) fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.transpose()) * T::lit(0.5)
}

fn check_symmetric<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    let scale = m.amax().max(T::one());
    let tol = T::lit(1e-12).max(T::default_epsilon() * T::lit(100.0)) * scale;
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "{name} not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} has non-finite entries"
        )));
    }
    Ok(())
}

fn rows_of<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.as_f64()).collect())
        .collect()
}

fn matrix_from_rows<T: Real>(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<T>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Format(format!("{name} is not square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| T::lit(rows[i][j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_from_zero_squeezing() {
        let s = make_squeezed_vacuum(&[0.0, 0.0]).unwrap();
        assert_eq!(s.vqq(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(s.vpp(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn squeezed_vacuum_definition() {
        let s = make_squeezed_vacuum(&[1.0]).unwrap();
        assert_abs_diff_eq!(s.vqq()[(0, 0)], (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.vpp()[(0, 0)], 2.0f64.exp(), epsilon = 1e-14);
    }

    #[test]
    fn leading_mode_squeezing_level() {
        // r recovered from the -0.47 dB leading-mode level
        let r = -(10f64.powf(-0.47 / 20.0)).ln();
        assert_abs_diff_eq!(r, 0.0541, epsilon = 1e-4);
        let s = make_squeezed_vacuum(&[r]).unwrap();
        assert_abs_diff_eq!(s.vqq()[(0, 0)], 0.8974, epsilon = 1e-4);
        assert_abs_diff_eq!(
            variance_to_db(s.vqq()[(0, 0)]).unwrap(),
            -0.47,
            epsilon = 1e-9
        );
    }

    #[test]
    fn non_finite_squeezing_rejected() {
        assert!(matches!(
            make_squeezed_vacuum(&[0.1, f64::NAN]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn loss_limits_and_midpoint() {
        let s = make_squeezed_vacuum(&[1.0]).unwrap();
        assert_eq!(apply_loss(&s, 1.0).unwrap(), s);
        let gone = apply_loss(&s, 0.0).unwrap();
        assert_eq!(gone.vqq(), &DMatrix::<f64>::identity(1, 1));
        let half = apply_loss(&s, 0.5).unwrap();
        assert_abs_diff_eq!(
            half.vqq()[(0, 0)],
            0.5 * (-2.0f64).exp() + 0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(half.vqq()[(0, 0)], 0.5677, epsilon = 1e-4);
        assert!(apply_loss(&s, 1.2).is_err());
        assert!(apply_loss(&s, -0.1).is_err());
    }

    #[test]
    fn decibels() {
        assert_eq!(variance_to_db(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(variance_to_db(0.8974).unwrap(), -0.470, epsilon = 1e-3);
        assert_abs_diff_eq!(variance_to_db(1.135).unwrap(), 0.55, epsilon = 1e-2);
        assert!(matches!(variance_to_db(0.0), Err(Error::Domain(_))));
        assert!(matches!(variance_to_db(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn physicality_of_vacuum_and_half_vacuum() {
        let vac = GaussianState::<f64>::vacuum(3, "x");
        let p = check_physicality(&vac);
        assert_abs_diff_eq!(p.min_eigenvalue, 0.0, epsilon = 1e-12);
        assert!(p.physical);

        let half = GaussianState::new(
            DMatrix::<f64>::identity(2, 2) * 0.5,
            DMatrix::identity(2, 2) * 0.5,
            "x",
        )
        .unwrap();
        let p = check_physicality(&half);
        // single-mode block [[0.5, -i], [i, 0.5]] has eigenvalues 0.5 +- 1
        assert_abs_diff_eq!(p.min_eigenvalue, -0.5, epsilon = 1e-12);
        assert!(!p.physical);
    }

    #[test]
    fn symplectic_form_identities() {
        let j = SymplecticForm::new(3).matrix::<f64>();
        assert_eq!(&j * &j, -DMatrix::<f64>::identity(6, 6));
        assert_eq!(j.transpose(), -j);
    }

    #[test]
    fn asymmetric_block_rejected() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = 0.1;
        assert!(GaussianState::new(m, DMatrix::identity(2, 2), "x").is_err());
    }

    #[test]
    fn json_layout() {
        let s = make_squeezed_vacuum(&[0.1, 0.2])
            .unwrap()
            .with_basis("supermodes");
        let text = serde_json::to_string(&s.to_json()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n_modes"], 2);
        assert_eq!(v["basis"], "supermodes");
        assert_eq!(v["Vqq"].as_array().unwrap().len(), 2);
        assert_eq!(v["Vpp"][1].as_array().unwrap().len(), 2);
        let back: GaussianState<f64> =
            GaussianState::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn single_precision_state() {
        let s = make_squeezed_vacuum(&[0.3f32, -0.2]).unwrap();
        let lossy = apply_loss(&s, 0.8f32).unwrap();
        assert!(check_physicality(&lossy).physical);
    }
}
