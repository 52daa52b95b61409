use cavity_dimer_core::adiabatic::*;
use cavity_dimer_core::boundstates::*;
use cavity_dimer_core::nonadiabatic::CouplingTables;
use cavity_dimer_core::params::*;
use cavity_dimer_core::scattering::*;
use cavity_dimer_core::units::*;
use cavity_dimer_core::RadialGrid;
use nalgebra::{DMatrix, Matrix3};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SystemParams> {
    (1.0f64..500.0, 0.1f64..1.5, -50.0f64..50.0, 0.1f64..10.0).prop_map(|(kappa, ratio, detuning, c3_scale)| {
        let mut p = cs_optical().params;
        p.kappa_a = mhz_to_internal(kappa);
        p.kappa_b = ratio * p.kappa_a;
        p.omega_c = p.omega_a + mhz_to_internal(detuning);
        p.c3 *= c3_scale;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_sorted_trace_preserved_and_exact(p in params(), r in 150.0f64..1e5) {
        let h = relative_hamiltonian(&p, r).unwrap();
        let (w, v) = eigen_sorted(h);
        prop_assert!(w[0] <= w[1] && w[1] <= w[2]);
        let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!((w.iter().sum::<f64>() - h.trace()).abs() <= 1e-10 * scale);
        for (i, wi) in w.iter().enumerate() {
            let res = h * v.column(i) - v.column(i) * *wi;
            prop_assert!(res.norm() <= 1e-10 * scale);
        }
        prop_assert!((v.transpose() * v - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn eigenvectors_are_phase_continuous(p in params()) {
        let grid = RadialGrid::uniform(300.0, 30_000.0, 400).unwrap();
        let c = diagonalize_curves(&p, &grid).unwrap();
        for k in 1..c.chi.len() {
            for i in 0..3 {
                prop_assert!(c.chi[k].column(i).dot(&c.chi[k - 1].column(i)) > 0.0);
            }
        }
    }

    #[test]
    fn couplings_antisymmetric_and_transform_orthogonal(p in params()) {
        let grid = RadialGrid::uniform(300.0, 20_000.0, 2000).unwrap();
        let c = diagonalize_curves(&p, &grid).unwrap();
        let t = CouplingTables::build(&c).unwrap();
        for (tau, tm) in t.tau.iter().zip(&t.t) {
            prop_assert!((tau + tau.transpose()).norm() <= 1e-12 * tau.norm().max(1e-30));
            prop_assert!((tm.transpose() * tm - Matrix3::identity()).norm() < 1e-10);
        }
        for w in &t.w {
            prop_assert!((w - w.transpose()).norm() <= 1e-9 * w.norm().max(1e-30));
        }
    }

    #[test]
    fn landau_zener_is_a_probability(v12 in 0.0f64..1e9, vel in 1e-3f64..1e9, f in 1e-3f64..1e12, dv in 0.0f64..1e9) {
        let a = landau_zener(v12, vel, f);
        let b = landau_zener(v12, vel + dv, f);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn cayley_transform_round_trip(k in proptest::collection::vec(-5.0f64..5.0, 6)) {
        let km = DMatrix::from_fn(3, 3, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            k[a * 3 - a * (a + 1) / 2 + b]
        });
        let s = s_from_k(&km).unwrap();
        let u = s.adjoint() * &s - DMatrix::identity(3, 3);
        prop_assert!(u.iter().all(|z| z.norm() < 1e-12));
        prop_assert!((&s - s.transpose()).iter().all(|z| z.norm() < 1e-12));
        let back = k_from_s(&s).unwrap();
        prop_assert!((back - km).abs().max() < 1e-9);
    }

    #[test]
    fn unit_round_trip(f in -1e9f64..1e9) {
        prop_assert!((internal_to_mhz(mhz_to_internal(f)) - f).abs() <= 1e-12 * f.abs().max(1.0));
    }

    #[test]
    fn convolution_preserves_area(ys in proptest::collection::vec(0.0f64..1.0, 64..200), g in 0.0f64..3.0) {
        let e: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.1).collect();
        let out = lossy_convolve(&e, &ys, g).unwrap();
        let (a, b): (f64, f64) = (ys.iter().sum(), out.iter().sum());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
        prop_assert!(out.iter().all(|&v| v >= -1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn morse_round_trip(d in 1e6f64..1e10, a in 5e-4f64..1e-2, re in 500.0f64..5000.0) {
        let c = kinetic_constant(CS133_MASS / 2.0);
        let truth = MorseFit::new(d, re, a, c).unwrap();
        let fit = fit_morse_to(|r| truth.potential(r), re * 1.01, c).unwrap();
        prop_assert!((fit.d_e / d - 1.0).abs() < 1e-8);
        prop_assert!((fit.a / a - 1.0).abs() < 1e-8);
        prop_assert!((fit.r_e / re - 1.0).abs() < 1e-8);
        let levels = morse_levels(&fit, 0.0);
        prop_assert!(levels.windows(2).all(|w| w[0].e_v < w[1].e_v));
        prop_assert!(levels.iter().all(|l| l.e_v < 0.0));
    }
}
