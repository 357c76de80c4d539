#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use squeezekit::{apply_loss, make_squeezed_vacuum, GaussianState};

/// Haar-ish orthogonal matrix from the QR factors of a Gaussian matrix.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Squeezed vacuum in a random basis, then loss and extra classical noise.
pub fn random_physical_state<R: Rng>(rng: &mut R, n: usize) -> GaussianState<f64> {
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let o = random_orthogonal(rng, n);
    let pure = make_squeezed_vacuum(&r)
        .unwrap()
        .transform(&o, "random")
        .unwrap();
    let lossy = apply_loss(&pure, rng.random_range(0.2..=1.0)).unwrap();
    let noise = |rng: &mut R| {
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() * rng.random_range(0.0..0.05)
    };
    let (nq, np) = (noise(rng), noise(rng));
    GaussianState::new(lossy.vqq() + nq, lossy.vpp() + np, "random").unwrap()
}

/// Signed squeezing parameters of eight modes, falling off slowly, with
/// alternating squeezed quadrature.
pub fn eight_mode_r_list() -> Vec<f64> {
    (0..8)
        .map(|k| {
            let r = 0.12 * (-0.15 * k as f64).exp();
            if k % 2 == 0 {
                r
            } else {
                -r
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
