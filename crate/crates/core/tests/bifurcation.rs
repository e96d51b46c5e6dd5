use std::f64::consts::PI;

use qpf_core::bifurcation::{
    find_invariant_curves, intervals_in, mode_lock_interval, phi, phi0, BifurcationOptions, Classification,
};
use qpf_core::curves::{translated_curve, CurveOptions};
use qpf_core::maps::ForcedMap;
use qpf_core::periodic::PeriodicFunction;
use qpf_core::Frequency;

fn bessel_j0(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..60 {
        sum += term;
        term *= -(x * x / 4.0) / (k * k) as f64;
    }
    sum
}

fn arnold(omega1: f64) -> ForcedMap {
    ForcedMap::transformed_arnold(omega1, 1.0, 0.3, &Frequency::golden()).unwrap()
}

fn j0_golden() -> f64 {
    bessel_j0(1.0 / (2.0 * (PI * Frequency::golden().alpha()).sin()))
}

fn options() -> BifurcationOptions {
    BifurcationOptions { samples_per_period: 64, curve: CurveOptions::default().with_order(32), ..Default::default() }
}

#[test]
fn r_free_phi_is_the_mean() {
    let alpha = Frequency::golden();
    let p = PeriodicFunction::from_cos_sin(0.35, &[1.0], &[0.4, 0.1], 16);
    let map = ForcedMap::theta_only(p);
    for c in [-2.0, 0.0, 1.3] {
        let value = phi(&map, 0.1, &alpha, c, &CurveOptions::default().with_order(16)).unwrap();
        assert!((value - 0.35).abs() < 1e-13);
    }
}

#[test]
fn phi_is_periodic_and_matches_translation_number() {
    let alpha = Frequency::golden();
    let map = arnold(0.2);
    let opts = CurveOptions::default().with_order(64);
    let eps = 0.05;
    for c in [0.3, 2.1] {
        let a = phi(&map, eps, &alpha, c, &opts).unwrap();
        let b = phi(&map, eps, &alpha, c + 2.0 * PI, &opts).unwrap();
        assert!((a - b).abs() < 1e-10);
        let curve = translated_curve(&map, eps, &alpha, c, &opts).unwrap();
        assert!((curve.lambda + eps * a).abs() < 1e-12);
    }
}

#[test]
fn averaged_function_has_bessel_closed_form() {
    let map = arnold(0.15);
    for c in [0.0, 0.8, 2.5, 5.0] {
        assert!((phi0(&map, c) - (0.15 + j0_golden() * f64::sin(c))).abs() < 1e-12);
    }
}

#[test]
fn phi_converges_to_phi0_linearly() {
    let alpha = Frequency::golden();
    let map = arnold(0.0);
    let opts = CurveOptions::default().with_order(64);
    let gap = |eps: f64| {
        (0..8)
            .map(|k| 2.0 * PI * k as f64 / 8.0)
            .map(|c| (phi(&map, eps, &alpha, c, &opts).unwrap() - phi0(&map, c)).abs())
            .fold(0.0, f64::max)
    };
    let ratio = gap(0.02) / gap(0.01);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn two_roots_inside_the_tongue() {
    let alpha = Frequency::golden();
    let j0 = j0_golden();
    let omega1 = 0.4;
    let report = find_invariant_curves(&arnold(omega1), 1e-3, &alpha, (-PI / 2.0, 1.5 * PI), &options()).unwrap();
    assert_eq!(report.roots.len(), 2);
    let attractors = report.roots.iter().filter(|r| r.classification == Classification::Attractor).count();
    let repellers = report.roots.iter().filter(|r| r.classification == Classification::Repeller).count();
    assert_eq!((attractors, repellers), (1, 1));
    for root in &report.roots {
        assert!((root.c.sin() + omega1 / j0).abs() < 5e-3, "c = {}", root.c);
        assert!(root.lambda.abs() < 1e-9);
    }
}

#[test]
fn no_roots_outside_the_tongue() {
    let alpha = Frequency::golden();
    let report = find_invariant_curves(&arnold(j0_golden() + 0.05), 1e-3, &alpha, (0.0, 2.0 * PI), &options()).unwrap();
    assert!(report.roots.is_empty());
    assert!(report.phi_samples.iter().all(|&(_, v)| v > 0.0));
}

#[test]
fn zero_drift_only_admits_the_trivial_interval() {
    let alpha = Frequency::golden();
    let family = |w: f64| ForcedMap::zero().with_offset(w);
    let report = intervals_in(&family, 0.1, &alpha, (-2, 2), (-PI, PI), &options()).unwrap();
    assert!(report.base.degenerate);
    assert_eq!(report.base.omega_lower, 0.0);
    assert_eq!(report.base.omega_upper, 0.0);
    for item in &report.intervals {
        if item.n == 0 {
            assert_eq!(item.interval, Some((0.0, 0.0)));
        } else {
            assert_eq!(item.interval, None);
        }
    }
}

#[test]
fn only_the_zeroth_interval_is_feasible_for_small_eps() {
    let alpha = Frequency::golden();
    let family = |w: f64| arnold(w);
    let report = intervals_in(&family, 1e-3, &alpha, (-3, 3), (-PI, PI), &options()).unwrap();
    let lock = mode_lock_interval(&family, 1e-3, &alpha, &options()).unwrap();
    for item in &report.intervals {
        match item.n {
            0 => assert_eq!(item.interval, Some((lock.omega_lower, lock.omega_upper))),
            _ => assert_eq!(item.interval, None),
        }
    }
    assert!(report.overlap_warning.is_none());
}
