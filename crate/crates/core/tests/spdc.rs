use std::time::Instant;

use squeezekit::spdc::{
    calibrate_gain, compute_jsa, schmidt_decompose, DecompositionMethod, MismatchOffset,
    PhaseMatchingSpec, PumpEnvelope, SellmeierSet,
};
use squeezekit::FrequencyGrid;

fn default_grid(n: usize) -> FrequencyGrid {
    FrequencyGrid::new(695.0, 895.0, n).unwrap()
}

#[test]
fn default_schmidt_number() {
    let t = Instant::now();
    let jsa = compute_jsa(
        &PumpEnvelope::default(),
        &PhaseMatchingSpec::default(),
        &default_grid(512),
    )
    .unwrap();
    let dec = schmidt_decompose(&jsa, 40).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    assert_eq!(dec.method, DecompositionMethod::RealSymmetric);
    assert!(
        (50.0..=200.0).contains(&dec.schmidt_k),
        "K = {}",
        dec.schmidt_k
    );
    assert!(elapsed < 30.0, "{elapsed} s");
    let s2: f64 = dec.lambdas.iter().map(|l| l * l).sum();
    assert!((s2 - 1.0).abs() < 1e-9);
    assert!(dec.lambdas.windows(2).all(|w| w[0] >= w[1]));
    assert!(dec.modes.orthonormality_defect() < 1e-8);
    assert!(dec.pairing_residual < 1e-8);
}

#[test]
fn schmidt_number_converges_under_refinement() {
    let k = |n| {
        let jsa = compute_jsa(
            &PumpEnvelope::default(),
            &PhaseMatchingSpec::default(),
            &default_grid(n),
        )
        .unwrap();
        schmidt_decompose(&jsa, 1).unwrap().schmidt_k
    };
    let (coarse, fine) = (k(512), k(1024));
    assert!(((coarse - fine) / fine).abs() < 0.02, "{coarse} vs {fine}");
}

#[test]
fn flat_phase_matching_is_separable() {
    let pm = PhaseMatchingSpec {
        force_zero_mismatch: true,
        ..Default::default()
    };
    let jsa = compute_jsa(&PumpEnvelope::default(), &pm, &default_grid(256)).unwrap();
    let dec = schmidt_decompose(&jsa, 4).unwrap();
    // a pump function of ωs + ωi alone still correlates the photons; the
    // separable limit needs a pump much broader than the grid
    let wide = PumpEnvelope::new(397.5, 1e4).unwrap();
    let sep = schmidt_decompose(&compute_jsa(&wide, &pm, &default_grid(256)).unwrap(), 4).unwrap();
    assert!((sep.schmidt_k - 1.0).abs() < 1e-9, "K = {}", sep.schmidt_k);
    assert!(dec.schmidt_k > sep.schmidt_k);
}

#[test]
fn shorter_crystal_has_fewer_modes() {
    let k = |mm| {
        let pm = PhaseMatchingSpec {
            interaction_length_mm: mm,
            ..Default::default()
        };
        let jsa = compute_jsa(&PumpEnvelope::default(), &pm, &default_grid(512)).unwrap();
        schmidt_decompose(&jsa, 1).unwrap().schmidt_k
    };
    assert!(k(0.5) < k(1.0));
}

#[test]
fn amplitude_ridge_follows_energy_conservation() {
    let pump = PumpEnvelope::default();
    let grid = default_grid(512);
    let jsa = compute_jsa(&pump, &PhaseMatchingSpec::default(), &grid).unwrap();
    let n = grid.n_points();
    // index of the ωs + ωi lattice point nearest the pump centre
    let ridge = ((pump.center_omega() - 2.0 * grid.omega_min()) / grid.spacing()).round() as i64;
    // the measured LO band; further out the phase-matching slope across the
    // pump width walks the row maximum off the ridge
    for i in (0..n).filter(|&i| (775.0..=815.0).contains(&grid.wavelength_nm(i))) {
        let j_max = (0..n)
            .max_by(|&a, &b| {
                jsa.amplitude[(i, a)]
                    .norm()
                    .total_cmp(&jsa.amplitude[(i, b)].norm())
            })
            .unwrap();
        let off = (i + j_max) as i64 - ridge;
        assert!(
            off.abs() <= 1,
            "row {i} ({:.1} nm): ridge off by {off} cells",
            grid.wavelength_nm(i)
        );
    }
}

#[test]
fn sellmeier_sets_agree_within_band() {
    for set in SellmeierSet::ALL {
        let pm = PhaseMatchingSpec {
            sellmeier_set: set,
            ..Default::default()
        };
        let jsa = compute_jsa(&PumpEnvelope::default(), &pm, &default_grid(512)).unwrap();
        let k = schmidt_decompose(&jsa, 1).unwrap().schmidt_k;
        assert!((50.0..=200.0).contains(&k), "{set}: K = {k}");
        assert!(jsa.sellmeier.starts_with(set.id()));
    }
}

#[test]
fn bulk_mismatch_without_offset_is_not_phase_matched() {
    // raw bulk indices put the configured temperature far from the optimum
    let pm = PhaseMatchingSpec {
        offset: MismatchOffset::None,
        ..Default::default()
    };
    let pump = PumpEnvelope::default();
    let half = 0.5 * pump.center_omega();
    let dk = pm.bulk_mismatch(half, half);
    assert!((dk * 0.5e-3).abs() > std::f64::consts::PI);
}

#[test]
fn gain_hits_lossy_target() {
    let jsa = compute_jsa(
        &PumpEnvelope::default(),
        &PhaseMatchingSpec::default(),
        &default_grid(512),
    )
    .unwrap();
    let dec = schmidt_decompose(&jsa, 21).unwrap();
    let g = calibrate_gain(&dec, -0.47, 0.7).unwrap();
    let v = 0.7 * (-2.0 * g * dec.lambdas[0]).exp() + 0.3;
    assert!((10.0 * v.log10() + 0.47).abs() < 1e-9);
}
