use cavity_dimer_core::numerics::grid_levels;
use cavity_dimer_core::resonance::*;
use cavity_dimer_core::scattering::Propagator;
use nalgebra::Matrix3;

/// Attractive well plus a barrier: one narrow and one broad shape resonance.
fn well(d: f64) -> f64 {
    -3.0 * (-d * d / 8.0).exp() + 2.5 * (-(d - 6.0).powi(2) / 2.0).exp()
}

fn single_channel(v: impl Fn(f64) -> f64) -> Propagator {
    let r: Vec<f64> = (0..40 * 128 + 1).map(|i| 1.0 + i as f64 / 128.0).collect();
    let w = r
        .iter()
        .map(|&x| {
            let mut m = Matrix3::zeros();
            m[(0, 0)] = v(x - 1.0);
            m
        })
        .collect();
    Propagator::new(r, w, [0.0, 50.0, 60.0], 1.0, 3).unwrap()
}

#[test]
fn peak_fits_agree_with_complex_poles() {
    let prop = single_channel(well);
    let (e, y) = adaptive_scan((0.05, 2.4), ScanSettings { coarse_points: 600, ..Default::default() }, |xs| {
        xs.iter().map(|&x| prop.scatter(x).map(|s| s.sigma11())).collect()
    })
    .unwrap();
    let found = scan_and_fit(&e, &y);
    assert_eq!(found.len(), 2, "{found:?}");
    for (res, fit) in &found {
        assert_eq!(res.kind, ResonanceKind::PeakFit);
        assert!(fit.is_some());
        let PoleOutcome::Converged(pole) = find_pole(&prop, res.e_r, res.gamma_r, 60).unwrap() else {
            panic!("pole search failed near {}", res.e_r);
        };
        assert!((pole.gamma_r / res.gamma_r - 1.0).abs() < 0.1, "{pole:?} vs {res:?}");
        assert!((pole.e_r - res.e_r).abs() < 0.1 * pole.gamma_r, "{pole:?} vs {res:?}");
    }
    // the narrow line is isolated, so the Fano form is essentially exact
    let narrow = found.iter().map(|(r, _)| r).min_by(|a, b| a.gamma_r.total_cmp(&b.gamma_r)).unwrap();
    let PoleOutcome::Converged(p) = find_pole(&prop, narrow.e_r, narrow.gamma_r, 60).unwrap() else { panic!() };
    assert!((p.gamma_r / narrow.gamma_r - 1.0).abs() < 1e-3);
}

#[test]
fn bound_states_match_a_direct_eigensolve() {
    let deep = |d: f64| -3.0 * (-d * d / 8.0).exp();
    let prop = single_channel(deep);
    let found = find_bound_states(&prop, (-3.0, -1e-3), 3000).unwrap();
    let reference = grid_levels(0.0, 40.0, 8000, 1.0, deep, -1e-3);
    assert!(!reference.is_empty());
    assert_eq!(found.len(), reference.len(), "{found:?} vs {reference:?}");
    for (b, e) in found.iter().zip(&reference) {
        assert!((b.e_b - e).abs() < 1e-3, "{} vs {}", b.e_b, e);
    }
}

#[test]
fn free_motion_has_no_bound_states() {
    let prop = single_channel(|_| 0.0);
    assert!(find_bound_states(&prop, (-3.0, -1e-3), 500).unwrap().is_empty());
}

#[test]
fn bound_state_window_must_be_below_thresholds() {
    let prop = single_channel(|_| 0.0);
    assert!(find_bound_states(&prop, (-1.0, 0.5), 100).is_err());
}
