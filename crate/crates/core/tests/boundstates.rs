use cavity_dimer_core::boundstates::*;
use cavity_dimer_core::params::*;
use cavity_dimer_core::units::*;

#[test]
fn morse_parameters_round_trip() {
    let c = cs_optical().params.kinetic_constant();
    let truth = MorseFit::new(mhz_to_internal(50.0), 2000.0, 2e-3, c).unwrap();
    let fit = fit_morse_to(|r| truth.potential(r), 2050.0, c).unwrap();
    assert!((fit.d_e / truth.d_e - 1.0).abs() < 1e-8, "{fit:?}");
    assert!((fit.r_e / truth.r_e - 1.0).abs() < 1e-8, "{fit:?}");
    assert!((fit.a / truth.a - 1.0).abs() < 1e-8, "{fit:?}");
    assert!(fit.rms_residual < 1e-8 * truth.d_e);
}

#[test]
fn analytic_levels_match_grid_eigensolve() {
    let fit = fit_morse(&cs_optical().params).unwrap();
    let analytic = morse_levels(&fit, 0.0);
    assert!(fit.v_max().unwrap() >= 1);
    let grid = morse_grid_levels(&fit, 0.5);
    assert_eq!(grid.len(), analytic.len());
    for (k, (a, g)) in analytic.iter().zip(&grid).enumerate() {
        let spacing = if k + 1 < analytic.len() { analytic[k + 1].e_v - a.e_v } else { a.e_v - analytic[k - 1].e_v };
        assert!((a.e_v - g).abs() < 0.01 * spacing, "v={k}: {} vs {g}", a.e_v);
    }
}

#[test]
fn harmonic_limit_has_uniform_spacing() {
    // ω_e fixed while x_e → 0
    let c = 1.0;
    let a: f64 = 1e-4;
    let d = (1.0 / (2.0 * a)).powi(2) / c;
    let m = MorseFit::new(d, 0.0, a, c).unwrap();
    assert!((m.omega_e - 1.0).abs() < 1e-12);
    for v in 0..10 {
        let s = m.level_energy(v + 1) - m.level_energy(v);
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }
}

#[test]
fn levels_stop_at_v_max() {
    let m = MorseFit::new(30.0, 5.0, 1.0, 0.1).unwrap();
    let levels = morse_levels(&m, 0.0);
    assert_eq!(levels.len(), m.v_max().unwrap() + 1);
    assert!(levels.windows(2).all(|w| w[0].e_v < w[1].e_v));
    assert!(levels.iter().all(|l| l.e_v < 0.0));
    assert!(m.v_max().unwrap() as f64 + 1.0 > m.lambda() - 0.5);
}

#[test]
fn landau_zener_limits() {
    assert!(landau_zener(1e6, 1.0, 1.0) < 1e-300);
    assert_eq!(landau_zener(0.0, 1.0, 1.0), 1.0);
    let p: Vec<f64> = (1..50).map(|k| landau_zener(1.0, k as f64, 3.0)).collect();
    assert!(p.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn lzs_corrections_are_physical() {
    let p = cs_optical().params;
    let fit = fit_morse(&p).unwrap();
    let cr = crossing_parameters(&p, &fit).unwrap();
    assert!((cr.r_c - 2000.0).abs() < 1.0);
    let levels = lzs_correct(&morse_levels(&fit, 0.3), &cr, &fit);
    for l in &levels {
        assert!((0.0..=1.0).contains(&l.p_lz));
        assert!(l.lzs_width >= 0.0);
        assert_eq!(l.theta, 0.3);
    }
    // infinitely strong coupling at the crossing → adiabatic, no widths
    let stiff = Crossing { v12: 1e6 * cr.v12, ..cr };
    assert!(lzs_correct(&levels, &stiff, &fit).iter().all(|l| l.lzs_width == 0.0));
}

#[test]
fn coupling_strength_deepens_and_tightens_the_well() {
    let base = fit_morse(&cs_optical().params).unwrap();
    let strong = fit_morse(&cs_optical().params.scale_coupling(100.0)).unwrap();
    assert!(strong.d_e > 10.0 * base.d_e);
    assert!(strong.omega_e > 10.0 * base.omega_e);
}

#[test]
fn axis_along_cavity_has_no_sigma_levels() {
    let p = cs_optical().params;
    assert!(levels_at_angle(&p, 0.0, Symmetry::Sigma).unwrap().levels.is_empty());
    assert!(!levels_at_angle(&p, 0.0, Symmetry::Pi).unwrap().levels.is_empty());
    let s = levels_at_angle(&p, 0.7, Symmetry::Sigma).unwrap();
    let q = levels_at_angle(&p, std::f64::consts::FRAC_PI_2 - 0.7, Symmetry::Pi).unwrap();
    assert_eq!(s.levels.len(), q.levels.len());
}
