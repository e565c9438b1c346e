use std::f64::consts::TAU;

use gk_base::{par, q, Q, Z};
use kronecker_set::AtomicMeasure;
use num_complex::Complex64;
use stage_gen::StageParams;
use wiener_sim::*;

fn one_piece(alpha: Q) -> RotationSpec {
    RotationSpec::new(vec![q(0, 1), q(1, 1)], vec![alpha]).unwrap()
}

fn stage_one() -> StageParams {
    // Frozen stage 1 of the default chain: p/q = 4/3, b = (1, 2).
    StageParams::from_rotation(1, Z::from(4), Z::from(3), vec![Z::from(1), Z::from(2)]).unwrap()
}

#[test]
fn endpoint_moments() {
    let n = 20_000;
    let ens = sample_paths(4, n, 11).unwrap();
    let tol = 4.0 / (n as f64).sqrt();
    let (m_re, _) = mean_se(n, |w| ens.endpoint(w).re);
    let (m_im, _) = mean_se(n, |w| ens.endpoint(w).im);
    assert!(m_re.abs() <= tol && m_im.abs() <= tol);
    // |B_1|² is exponential with mean 2 under the chosen normalisation.
    let (m2, se2) = mean_se(n, |w| ens.endpoint(w).norm_sqr());
    assert!((m2 - 2.0).abs() <= 3.0 * se2, "{m2} ± {se2}");
    // Disjoint increments are uncorrelated.
    let scale = (ens.steps() as f64).sqrt();
    let (c, _) = mean_se(n, |w| ens.increment(w, 0).re * ens.increment(w, 1).re * scale * scale);
    assert!(c.abs() <= tol);
    // Positions are prefix sums starting at 0.
    let pos = ens.positions(3);
    assert_eq!(pos[0], Complex64::new(0.0, 0.0));
    assert_eq!(pos[ens.steps()], ens.endpoint(3));
}

#[test]
fn single_piece_rotation_multiplies_positions() {
    let ens = sample_paths(3, 50, 1).unwrap();
    let alpha = q(1, 7);
    let rot = cut_rotate(&ens, &one_piece(alpha), 1).unwrap();
    let f = Complex64::from_polar(1.0, TAU / 7.0);
    for w in 0..ens.count() {
        for (a, b) in ens.positions(w).iter().zip(rot.positions(w)) {
            assert!((a * f - b).norm() <= 1e-12);
        }
    }
}

#[test]
fn power_zero_inverse_and_semigroup_are_exact() {
    let ens = sample_paths(4, 200, 5).unwrap();
    let spec = RotationSpec::new(
        vec![q(0, 1), q(1, 4), q(1, 2), q(1, 1)],
        vec![q(1, 3), q(2, 5), q(1, 9)],
    )
    .unwrap();
    assert_eq!(cut_rotate(&ens, &spec, 0).unwrap(), ens);
    let there = cut_rotate(&ens, &spec, 3).unwrap();
    assert_ne!(there, ens);
    assert_eq!(cut_rotate(&there, &spec, -3).unwrap(), ens);
    let two_then_three = cut_rotate(&cut_rotate(&ens, &spec, 2).unwrap(), &spec, 3).unwrap();
    assert_eq!(two_then_three, cut_rotate(&ens, &spec, 5).unwrap());
}

#[test]
fn rotation_preserves_increment_statistics() {
    let ens = sample_paths(3, 20_000, 9).unwrap();
    let spec = RotationSpec::new(vec![q(0, 1), q(3, 8), q(1, 1)], vec![q(1, 5), q(3, 7)]).unwrap();
    let rot = cut_rotate(&ens, &spec, 1).unwrap();
    let v = 1.0 / ens.steps() as f64;
    for m in [increment_moments(&ens), increment_moments(&rot)] {
        for row in m {
            let [(re2, s1), (im2, s2), (cross, s3)] = row;
            assert!((re2 - v).abs() <= 4.0 * s1);
            assert!((im2 - v).abs() <= 4.0 * s2);
            assert!(cross.abs() <= 4.0 * s3);
        }
    }
}

#[test]
fn non_dyadic_cut_rejected() {
    let ens = sample_paths(2, 4, 0).unwrap();
    let spec = RotationSpec::new(vec![q(0, 1), q(1, 3), q(1, 1)], vec![q(0, 1), q(1, 2)]).unwrap();
    assert!(matches!(
        cut_rotate(&ens, &spec, 1),
        Err(WienerError::NotDyadic { .. })
    ));
}

#[test]
fn covariance_examples() {
    let ens = sample_paths(2, 20_000, 3).unwrap();
    let spec = one_piece(q(1, 8));
    for p in 0..4 {
        let r = covariance_check(&ens, &spec, p).unwrap();
        assert!((r.analytic - (TAU * p as f64 / 8.0).cos()).abs() < 1e-12);
        assert!(r.z_score <= 3.0, "{r:?}");
    }
    let r0 = covariance_check(&ens, &spec, 0).unwrap();
    assert_eq!(r0.analytic, 1.0);
    let flat = one_piece(q(0, 1));
    let a: Vec<f64> = (0..4).map(|p| covariance_check(&ens, &flat, p).unwrap().analytic).collect();
    assert!(a.iter().all(|&x| x == 1.0));
}

#[test]
fn covariance_of_symmetrised_measure() {
    let sigma = AtomicMeasure::new([(q(1, 10), q(1, 4)), (q(1, 3), q(3, 4))]).unwrap();
    let spec = RotationSpec::from_measure(&sigma).unwrap();
    let gamma = sigma.symmetrized().unwrap();
    let ens = sample_paths(2, 20_000, 4).unwrap();
    for p in 0..5 {
        let r = covariance_check(&ens, &spec, p).unwrap();
        let by_gamma: f64 = gamma
            .atoms()
            .iter()
            .map(|a| gk_base::to_f64(&a.weight) * (TAU * p as f64 * gk_base::to_f64(&a.position)).cos())
            .sum();
        assert!((r.analytic - by_gamma).abs() < 1e-12);
        assert!(r.z_score <= 3.0, "{r:?}");
    }
}

#[test]
fn sector_of_zero_argument() {
    assert_eq!(sector(Complex64::new(1.0, 0.0), 5).0, 0);
    assert!(sector(Complex64::new(1.0, 0.0), 5).1);
    assert_eq!(sector(Complex64::new(-1.0, 1e-3), 4), (1, false));
}

#[test]
fn shift_law_on_stage_one() {
    let st = stage_one();
    let spec = RotationSpec::from_stage(&st).unwrap();
    let shifts = stage_shifts(&st).unwrap();
    assert_eq!(shifts, vec![1, 2]);
    let ens = sample_paths(3, 20_000, 21).unwrap();
    for power in [1, 2, -1, 7] {
        let r = shift_law(&ens, &spec, 3, &shifts, power).unwrap();
        assert_eq!(r.mismatches, 0, "{r:?}");
        assert!(r.excluded_fraction < 1e-6);
    }
}

#[test]
fn sector_frequencies_uniform_and_independent() {
    let n = 40_000;
    let st = stage_one();
    let spec = RotationSpec::from_stage(&st).unwrap();
    let ens = sample_paths(3, n, 8).unwrap();
    let s = classify(&ens, &spec, 3).unwrap();
    let tol = 4.0 / (n as f64).sqrt();
    let marg = marginal_frequencies(&s);
    for row in &marg {
        for f in row {
            assert!((f - 1.0 / 3.0).abs() <= tol);
        }
    }
    let joint = joint_frequencies(&s, 0, 1);
    for a in 0..3 {
        for b in 0..3 {
            assert!((joint[a][b] - marg[0][a] * marg[1][b]).abs() <= tol);
        }
    }
}

#[test]
fn trivial_partition_estimate_is_mean_zero() {
    let n = 20_000;
    let ens = sample_paths(3, n, 2).unwrap();
    let r = cond_exp(&ens, Word { start: 0, len: 8 }, &[SectorFamily::trivial()], 0.01).unwrap();
    assert_eq!(r.cells.len(), 1);
    let (re, im) = r.cells[0].mean;
    let tol = 4.0 / (n as f64).sqrt();
    assert!(re.abs() <= tol && im.abs() <= tol);
}

#[test]
fn fine_sectors_of_the_word_pin_its_argument() {
    let ens = sample_paths(4, 20_000, 6).unwrap();
    let w = Word::dyadic(0, 0, 4).unwrap();
    let r = cond_exp(&ens, w, &[SectorFamily::uniform(64)], 1.0 / 100.0).unwrap();
    assert_eq!(r.holdout_excluded, 0);
    assert!(r.diagnostic_fraction >= 0.99, "{}", r.diagnostic_fraction);
}

#[test]
fn refinement_lowers_in_sample_residual() {
    let ens = sample_paths(3, 10_000, 13).unwrap();
    let w = Word::dyadic(1, 1, 3).unwrap();
    let mut last = f64::INFINITY;
    for q in [1, 2, 4, 8, 16] {
        let fams = vec![SectorFamily::uniform(q); 2];
        let r = cond_exp(&ens, w, &fams, 0.05).unwrap();
        assert!(r.l2_residual <= last * (1.0 + 1e-12), "q = {q}");
        last = r.l2_residual;
    }
}

#[test]
fn dyadic_probe_reports_a_gap() {
    // Diagnostic only: the two conditional expectations are estimated from
    // the same sample and their gap is compared with the sampling noise.
    let ens = sample_paths(2, 20_000, 17).unwrap();
    let r = dyadic_probe(&ens, 1, 2).unwrap();
    assert_eq!(r.cells_a, 4);
    assert!(r.cells_b >= r.cells_a);
    assert!(r.u_hat.is_finite() && r.noise_floor > 0.0);
    assert!(r.residual_b <= r.residual_a);
}

#[test]
fn sampling_ignores_worker_count() {
    let a = par::with_workers(1, || sample_paths(3, 300, 42).unwrap());
    let b = par::with_workers(8, || sample_paths(3, 300, 42).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, sample_paths(3, 300, 43).unwrap());
}

#[test]
fn dump_round_trip() {
    let ens = sample_paths(2, 30, 5).unwrap();
    let spec = one_piece(q(2, 9));
    let rot = cut_rotate(&ens, &spec, 4).unwrap();
    let mut buf = Vec::new();
    rot.write_to(&mut buf).unwrap();
    let back = PathEnsemble::read_from(&buf[..]).unwrap();
    assert_eq!(back, rot);
    assert_eq!(back.phases(), rot.phases());
    assert_eq!(back.seed(), 5);
}

proptest::proptest! {
    #[test]
    fn inverse_and_composition_for_random_angles(
        a in 0i64..97, b in 0i64..97, p in -6i64..6, r in -6i64..6, seed in 0u64..1000
    ) {
        let ens = sample_paths(2, 16, seed).unwrap();
        let spec = RotationSpec::new(vec![q(0, 1), q(1, 4), q(1, 1)], vec![q(a, 97), q(b, 97)]).unwrap();
        let up = cut_rotate(&ens, &spec, p).unwrap();
        proptest::prop_assert!(cut_rotate(&up, &spec, -p).unwrap() == ens);
        let both = cut_rotate(&up, &spec, r).unwrap();
        proptest::prop_assert!(both == cut_rotate(&ens, &spec, p + r).unwrap());
    }
}
