use cavity_dimer_core::boundstates::*;
use cavity_dimer_core::params::*;
use cavity_dimer_core::spectrum::*;
use cavity_dimer_core::units::*;
use std::f64::consts::PI;

#[test]
fn cs_recoil_matches_hand_value() {
    // h / (2 m λ²) with λ = c / 3.5172e14 Hz: 2066.27 Hz
    let e = recoil_energy(cs_optical().wavelength, CS133_MASS);
    assert!((e / (2.0 * PI) / 2066.27 - 1.0).abs() < 1e-5, "{}", e / (2.0 * PI));
    let c = cs_optical().params.kinetic_constant();
    let k_photon = 2.0 * PI / cs_optical().wavelength;
    assert!((ground_wavenumber(e, c) * 2f64.sqrt() / k_photon - 1.0).abs() < 1e-12);
}

#[test]
fn single_line_is_a_lorentzian() {
    let g = 2.0;
    let omega: Vec<f64> = (0..401).map(|i| -20.0 + 0.1 * i as f64).collect();
    let cfg = SpectrumConfig { symmetry: Symmetry::Sigma, gamma_eff: g, e_gg: 1.0, omega: omega.clone(), n_theta: 8 };
    let line = SpectrumLine { theta: 1.0, v: 0, center: -3.0, weight: 0.7, amplitude: 1.0 };
    let s = emission_spectrum(&cfg, vec![line]).unwrap();
    for (w, i) in omega.iter().zip(&s.intensity) {
        assert!((i - g * g / ((w + 3.0).powi(2) + g * g)).abs() < 1e-14);
    }
}

#[test]
fn empty_line_list_gives_zero_spectrum() {
    let cfg = SpectrumConfig { symmetry: Symmetry::Pi, gamma_eff: 1.0, e_gg: 1.0, omega: vec![0.0, 1.0], n_theta: 8 };
    let s = emission_spectrum(&cfg, Vec::new()).unwrap();
    assert!(s.is_empty());
    assert!(s.intensity.iter().all(|&v| v == 0.0));
}

#[test]
fn config_validation() {
    let ok = SpectrumConfig { symmetry: Symmetry::Pi, gamma_eff: 1.0, e_gg: 1.0, omega: vec![0.0], n_theta: 8 };
    assert!(ok.validate().is_ok());
    assert!(SpectrumConfig { gamma_eff: 0.0, ..ok.clone() }.validate().is_err());
    assert!(SpectrumConfig { n_theta: 4, ..ok.clone() }.validate().is_err());
    assert!(SpectrumConfig { e_gg: -1.0, ..ok }.validate().is_err());
}

#[test]
fn ground_state_amplitude_is_converged() {
    let pre = cs_optical();
    let a = levels_at_angle(&pre.params, PI / 2.0, Symmetry::Sigma).unwrap();
    let fit = a.fit.unwrap();
    let k = ground_wavenumber(recoil_energy(pre.wavelength, CS133_MASS), fit.kinetic);
    let coarse = franck_condon_amplitude(&a.params, &fit, 0, k, 1).unwrap();
    let fine = franck_condon_amplitude(&a.params, &fit, 0, k, 2).unwrap();
    assert!(coarse.abs() > 0.0);
    assert!((coarse / fine - 1.0).abs() < 1e-3);
}

#[test]
fn no_cavity_admixture_no_emission() {
    // uncoupled atoms: χ₂ is the bare cavity state, so c_s vanishes
    let mut p = cs_optical().params;
    p.kappa_a = 0.0;
    p.kappa_b = 0.0;
    let grid = cavity_dimer_core::RadialGrid::uniform(500.0, 5000.0, 200).unwrap();
    assert!(symmetric_admixture(&p, &grid).unwrap().iter().all(|c| c.abs() < 1e-12));
}

#[test]
fn spectral_lines_lie_inside_the_well() {
    let pre = cs_optical();
    let angles: Vec<AngleLevels> =
        theta_grid(9).into_iter().map(|t| levels_at_angle(&pre.params, t, Symmetry::Pi).unwrap()).collect();
    let cfg = SpectrumConfig {
        symmetry: Symmetry::Pi,
        gamma_eff: mhz_to_internal(8.0),
        e_gg: recoil_energy(pre.wavelength, CS133_MASS),
        omega: vec![0.0],
        n_theta: 9,
    };
    let lines = spectrum_lines(&cfg, &angles, 1).unwrap();
    assert!(!lines.is_empty());
    for (l, a) in lines.iter().filter_map(|l| angles.iter().find(|a| a.theta == l.theta).map(|a| (l, a))) {
        let bottom = a.threshold + a.crossing.unwrap().well_bottom;
        assert!(l.center < a.threshold && l.center > bottom, "{l:?}");
        assert!(l.weight >= 0.0);
    }
}

#[test]
fn shifted_halo_levels_above_threshold_emit_nothing() {
    // at this angle the LZS shift lifts the top level just past threshold
    let pre = cs_optical();
    let a = levels_at_angle(&pre.params, theta_grid(32)[2], Symmetry::Pi).unwrap();
    assert!(a.levels.iter().any(|l| l.corrected_energy() >= 0.0));
    let cfg = SpectrumConfig {
        symmetry: Symmetry::Pi,
        gamma_eff: mhz_to_internal(8.0),
        e_gg: recoil_energy(pre.wavelength, 2.0 * pre.params.mu),
        omega: vec![0.0],
        n_theta: 1,
    };
    let lines = spectrum_lines(&cfg, std::slice::from_ref(&a), 1).unwrap();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l.center < a.threshold));
}
