mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squeezekit::entanglement::{enumerate_bipartitions, ppt_eigenvalue};
use squeezekit::tomography::recover_supermodes;
use squeezekit::{apply_loss, check_physicality, make_squeezed_vacuum, project_state};

use common::{random_orthogonal, random_physical_state};

/// Contraction `U diag(s) Vᵀ` with singular values in [0, 1].
fn random_contraction(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    let u = random_orthogonal(rng, m);
    let v = random_orthogonal(rng, n);
    let k = m.min(n);
    let mut s = DMatrix::zeros(m, n);
    for j in 0..k {
        s[(j, j)] = rng.random_range(0.0..=1.0);
    }
    u * s * v.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn loss_preserves_physicality(seed in any::<u64>(), n in 1usize..=8, eta in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_physical_state(&mut rng, n);
        prop_assert!(check_physicality(&s).physical);
        let lossy = apply_loss(&s, eta).unwrap();
        let p = check_physicality(&lossy);
        prop_assert!(p.physical, "min eigenvalue {}", p.min_eigenvalue);
    }

    #[test]
    fn projection_preserves_physicality(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_physical_state(&mut rng, n);
        let o = random_contraction(&mut rng, m, n);
        let projected = project_state(&s, &o, "projected").unwrap();
        let p = check_physicality(&projected);
        prop_assert!(p.physical, "min eigenvalue {}", p.min_eigenvalue);
    }

    #[test]
    fn recovery_transform_is_orthogonal(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_physical_state(&mut rng, n);
        let rec = recover_supermodes(&s).unwrap();
        let t = &rec.transform;
        let defect = (t * t.transpose() - DMatrix::<f64>::identity(n, n)).amax();
        prop_assert!(defect < 1e-8, "{defect:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ppt_is_exactly_complement_symmetric(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_physical_state(&mut rng, n);
        for bp in enumerate_bipartitions(n).unwrap() {
            let a = ppt_eigenvalue(&s, &bp).unwrap();
            let b = ppt_eigenvalue(&s, &bp.complement()).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits(), "{}", bp);
        }
    }

    #[test]
    fn loss_never_deepens_the_ppt_violation(seed in any::<u64>(), n in 2usize..=6, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assume!(hi > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_physical_state(&mut rng, n);
        let strong = apply_loss(&s, hi).unwrap();
        let weak = apply_loss(&strong, lo / hi).unwrap();
        for bp in enumerate_bipartitions(n).unwrap() {
            let a = ppt_eigenvalue(&strong, &bp).unwrap();
            let b = ppt_eigenvalue(&weak, &bp).unwrap();
            // V(lo) = (lo/hi) V(hi) + (1 − lo/hi) I, and I − iJ is PSD
            prop_assert!(b >= lo / hi * a - 1e-12, "{} : {} -> {}", bp, a, b);
        }
    }

    #[test]
    fn loss_shrinks_squeezing(r in -1.5f64..1.5, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let s = make_squeezed_vacuum(&[r]).unwrap();
        let db = |eta: f64| {
            let e = apply_loss(&s, eta).unwrap().squeezing_report().unwrap()[0];
            (e.squeeze_db, e.antisqueeze_db)
        };
        let (sq_lo, asq_lo) = db(lo);
        let (sq_hi, asq_hi) = db(hi);
        prop_assert!(sq_lo >= sq_hi - 1e-12);
        prop_assert!(asq_lo <= asq_hi + 1e-12);
    }
}
