use std::f64::consts::PI;

use num_complex::Complex64;
use qpf_core::curves::{continuation_in_eps, dpsi_dc, foliation_sweep, translated_curve, CurveOptions};
use qpf_core::maps::ForcedMap;
use qpf_core::periodic::PeriodicFunction;
use qpf_core::Frequency;

fn cos_theta(scale: f64, order: usize) -> PeriodicFunction {
    PeriodicFunction::from_cos_sin(0.0, &[scale], &[], order)
}

#[test]
fn linear_curve_matches_fourier_division() {
    let alpha = Frequency::golden();
    let eps = 0.1;
    let map = ForcedMap::linear_test(cos_theta(1.0, 16));
    let curve = translated_curve(&map, eps, &alpha, 0.0, &CurveOptions::default().with_order(16)).unwrap();
    assert!(curve.converged);
    assert!(curve.lambda.abs() < 1e-12);
    let expected = Complex64::new(eps * 0.5, 0.0) / (alpha.phase(1) - (1.0 - eps));
    assert!((curve.psi.coeff(1) - expected).norm() < 1e-10);
    assert!((curve.psi.coeff(-1) - expected.conj()).norm() < 1e-10);
    for n in 2..=16 {
        assert!(curve.psi.coeff(n).norm() < 1e-12);
    }
}

#[test]
fn linear_translation_number_is_eps_times_c() {
    let alpha = Frequency::golden();
    let map = ForcedMap::linear_test(PeriodicFunction::zeros(8));
    for c in [-1.0, 0.5, 2.0] {
        let curve = translated_curve(&map, 0.3, &alpha, c, &CurveOptions::default().with_order(8)).unwrap();
        assert!((curve.lambda - 0.3 * c).abs() < 1e-13);
        assert!(curve.psi.add_constant(-c).sup_norm_bound() < 1e-14);
    }
}

#[test]
fn initialization_does_not_change_the_limit() {
    let alpha = Frequency::golden();
    let map = ForcedMap::transformed_arnold(0.0, 1.0, 0.3, &alpha).unwrap();
    let opts = CurveOptions::default().with_order(64);
    let cold = translated_curve(&map, 0.05, &alpha, 1.2, &opts).unwrap();
    let start = PeriodicFunction::from_cos_sin(0.0, &[0.05], &[-0.03, 0.01], 64);
    let warm = translated_curve(&map, 0.05, &alpha, 1.2, &opts.clone().with_initial(start)).unwrap();
    assert!(cold.converged && warm.converged);
    assert!(cold.psi.max_coeff_diff(&warm.psi) < 1e-10);
    assert!((cold.lambda - warm.lambda).abs() < 1e-12);
}

#[test]
fn curve_deviation_scales_linearly_in_eps() {
    let alpha = Frequency::golden();
    let map = ForcedMap::transformed_arnold(0.0, 1.0, 0.3, &alpha).unwrap();
    let opts = CurveOptions::default().with_order(64);
    let dev = |eps: f64| translated_curve(&map, eps, &alpha, 0.7, &opts).unwrap().psi.add_constant(-0.7).sobolev_norm(0);
    let ratio = dev(0.02) / dev(0.01);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn derivative_in_c_trivial_cases() {
    let alpha = Frequency::golden();
    let opts = CurveOptions::default().with_order(16);
    let zero = translated_curve(&ForcedMap::zero(), 0.2, &alpha, 0.4, &opts).unwrap();
    let d = dpsi_dc(&zero, &ForcedMap::zero(), &alpha).unwrap();
    assert!(d.delta.add_constant(-1.0).sup_norm_bound() < 1e-15);

    let map = ForcedMap::transformed_arnold(0.0, 1.0, 0.3, &alpha).unwrap();
    let flat = translated_curve(&map, 0.0, &alpha, 0.4, &opts).unwrap();
    let d = dpsi_dc(&flat, &map, &alpha).unwrap();
    assert!(d.delta.add_constant(-1.0).sup_norm_bound() < 1e-15);
}

#[test]
fn derivative_in_c_agrees_with_bifurcation_slope() {
    let alpha = Frequency::golden();
    let map = ForcedMap::transformed_arnold(0.0, 1.0, 0.3, &alpha).unwrap();
    let curve = translated_curve(&map, 0.05, &alpha, 2.0, &CurveOptions::default().with_order(64)).unwrap();
    let d = dpsi_dc(&curve, &map, &alpha).unwrap();
    assert!((d.dphi_dc - d.dphi_dc_from_nu).abs() < 1e-9);
}

#[test]
fn zero_map_foliation_is_exact() {
    let alpha = Frequency::golden();
    let cs = [-1.0, 0.0, 0.5, 3.0];
    let report = foliation_sweep(&ForcedMap::zero(), 0.2, &alpha, &cs, &CurveOptions::default().with_order(8)).unwrap();
    for (curve, &c) in report.curves.iter().zip(&cs) {
        assert!(curve.psi.add_constant(-c).sup_norm_bound() == 0.0);
    }
    assert_eq!(report.min_gap, 0.5);
}

#[test]
fn linear_curves_are_vertical_translates() {
    let alpha = Frequency::golden();
    let map = ForcedMap::linear_test(cos_theta(1.0, 16));
    let cs = [-1.0, 0.0, 1.0];
    let report = foliation_sweep(&map, 0.1, &alpha, &cs, &CurveOptions::default().with_order(16)).unwrap();
    let base = &report.curves[1].psi;
    for (curve, &c) in report.curves.iter().zip(&cs) {
        assert!((&curve.psi - base).add_constant(-c).sup_norm_bound() < 1e-12);
    }
    assert!((report.min_gap - 1.0).abs() < 1e-12);
    assert!(report.k_emp < 1e-9);
}

#[test]
fn arnold_sweep_has_no_crossings() {
    let alpha = Frequency::golden();
    let map = ForcedMap::transformed_arnold(0.0, 1.0, 0.3, &alpha).unwrap();
    let cs: Vec<f64> = (0..41).map(|i| -PI + 2.0 * PI * i as f64 / 40.0).collect();
    let report = foliation_sweep(&map, 0.05, &alpha, &cs, &CurveOptions::default().with_order(64)).unwrap();
    assert!(report.min_gap > 0.0);
    assert!(report.k_emp.is_finite());
}

#[test]
fn zero_map_never_breaks_down() {
    let alpha = Frequency::golden();
    let ladder: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64).collect();
    let report = continuation_in_eps(&ForcedMap::zero(), &alpha, 0.3, &ladder, &CurveOptions::default().with_order(8)).unwrap();
    assert!(report.breakdown.is_none());
    assert_eq!(report.trace.len(), 9);
    assert!(report.trace.iter().all(|p| p.d2_norm == 0.0));
}

#[test]
fn linear_continuation_reaches_large_eps() {
    let alpha = Frequency::golden();
    let map = ForcedMap::linear_test(cos_theta(0.25, 16));
    let ladder: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64).collect();
    let opts = CurveOptions { a_box: (0.05, 1.5), ..CurveOptions::default().with_order(16) };
    let report = continuation_in_eps(&map, &alpha, 0.0, &ladder, &opts).unwrap();
    assert!(report.breakdown.is_none(), "{:?}", report.breakdown);
    assert_eq!(report.trace.len(), 9);
    // ψ̂₁ = εĝ₁/(e^{2πiα} − 1 + ε), so d2_norm/ε is |e^{2πiα} − 1 + ε|⁻¹ up to a constant.
    for p in &report.trace {
        let predicted = (alpha.phase(1) - 1.0 + p.epsilon).norm().recip();
        let scaled = p.d2_norm / p.epsilon / predicted;
        let first = report.trace[0].d2_norm / report.trace[0].epsilon / (alpha.phase(1) - 1.0 + 0.1).norm().recip();
        assert!((scaled - first).abs() < 1e-9 * first);
    }
}

#[test]
fn breakdown_comes_earlier_for_stronger_forcing() {
    let alpha = Frequency::golden();
    let ladder: Vec<f64> = (1..=60).map(|k| 0.02 * k as f64).collect();
    let opts = CurveOptions::default().with_order(64);
    let mut found = Vec::new();
    for b0 in [0.25, 1.0, 2.0, 4.0] {
        let map = ForcedMap::transformed_arnold(0.0, b0, 0.3, &alpha).unwrap();
        let report = continuation_in_eps(&map, &alpha, 0.5, &ladder, &opts).unwrap();
        let (eps, _) = report.breakdown.expect("breakdown within the ladder");
        found.push(eps);
    }
    // The a-box test depends only on sup|F_r| = 1; the amplitude enters through ‖D²ψ‖.
    assert!(found.windows(2).all(|w| w[1] <= w[0]), "{found:?}");
    assert!(found[3] < found[0], "{found:?}");
}
