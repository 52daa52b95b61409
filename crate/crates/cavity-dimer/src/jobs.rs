//! The computations behind each subcommand. Every job returns its artifacts
//! in memory; parallel maps use indexed collection, so row order (and hence
//! output bytes) never depends on the thread count.

use std::cell::RefCell;
use std::f64::consts::PI;

use cavity_dimer_core::adiabatic::{curves_at, diagonalize_curves, locate_well, thresholds};
use cavity_dimer_core::boundstates::{fit_morse, levels_at_angle, morse_grid_levels, theta_grid, AngleLevels, MorseFit};
use cavity_dimer_core::nonadiabatic::CouplingTables;
use cavity_dimer_core::params::Symmetry;
use cavity_dimer_core::resonance::{adaptive_scan, find_pole, scan_and_fit, PoleOutcome, Resonance, ScanSettings};
use cavity_dimer_core::scattering::{lossy_convolve, lossy_convolve_onto, unitarity_limit, Propagator, ScatteringMatrices};
use cavity_dimer_core::spectrum::{emission_spectrum, recoil_energy, spectrum_lines, SpectrumConfig, SpectrumLine};
use cavity_dimer_core::units::{internal_to_mhz, mhz_to_internal, momentum_to_fig_units};
use cavity_dimer_core::{Error, RadialGrid, SystemParams};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::config::Setup;
use crate::table::{Cell, Table};
use crate::AppError;

/// Range searched for the ω₂ minimum [a0].
const WELL_SEARCH: (f64, f64) = (1.0, 1e8);

pub enum Payload {
    Csv(Table),
    Json(serde_json::Value),
}

pub struct Artifact {
    pub name: String,
    pub payload: Payload,
}

impl Artifact {
    fn csv(name: &str, t: Table) -> Self {
        Self { name: name.into(), payload: Payload::Csv(t) }
    }

    pub fn bytes(&self) -> Result<Vec<u8>, AppError> {
        match &self.payload {
            Payload::Csv(t) => t.to_csv_bytes(),
            Payload::Json(v) => {
                let mut s = serde_json::to_string_pretty(v).map_err(|e| AppError::Io(e.to_string()))?;
                s.push('\n');
                Ok(s.into_bytes())
            }
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match &self.payload {
            Payload::Csv(t) => Some(t),
            Payload::Json(_) => None,
        }
    }
}

fn par_try_map<T: Sync, U: Send>(
    pool: &ThreadPool,
    xs: &[T],
    f: impl Fn(&T) -> Result<U, AppError> + Sync + Send,
) -> Result<Vec<U>, AppError> {
    pool.install(|| xs.par_iter().map(f).collect())
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn potentials(s: &Setup) -> Result<Vec<Artifact>, AppError> {
    let g = &s.preset.grid;
    let grid = RadialGrid::uniform(g.r_wall, g.r_infinity, g.n_uniform)?;
    let curves = diagonalize_curves(&s.preset.params, &grid)?;
    let mut t = Table::new(&["R_a0", "omega1_MHz", "omega2_MHz", "omega3_MHz"]);
    for (r, w) in curves.r.iter().zip(&curves.omega) {
        t.push(vec![
            Cell::Num(*r),
            Cell::Num(internal_to_mhz(w[0])),
            Cell::Num(internal_to_mhz(w[1])),
            Cell::Num(internal_to_mhz(w[2])),
        ]);
    }
    Ok(vec![Artifact::csv("potentials.csv", t)])
}

fn well_cells(p: &SystemParams) -> Vec<Cell> {
    match locate_well(p, WELL_SEARCH.0, WELL_SEARCH.1) {
        Some(w) => vec![Cell::Num(w.r_c), Cell::Num(internal_to_mhz(w.depth)), Cell::Num(internal_to_mhz(w.min_value))],
        None => vec![Cell::Missing; 3],
    }
}

/// κ_A from ×1 to ×100 (κ_B follows), log-spaced.
pub fn sweep_kappa(s: &Setup, pool: &ThreadPool) -> Result<Vec<Artifact>, AppError> {
    let p = s.preset.params;
    let factors: Vec<f64> = (0..=20).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    let rows = par_try_map(pool, &factors, |&f| {
        let q = p.with_kappa_a(f * p.kappa_a);
        let mut row = vec![Cell::Num(f), Cell::Num(internal_to_mhz(q.kappa_a))];
        row.extend(well_cells(&q));
        Ok(row)
    })?;
    let mut t = Table::new(&["kappa_factor", "kappa_A_MHz", "R_c_a0", "depth_MHz", "min_omega2_MHz"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(vec![Artifact::csv("sweep_kappa.csv", t)])
}

/// Detunings ω_c − ω_A over ±40 MHz.
pub fn sweep_detuning(s: &Setup, pool: &ThreadPool) -> Result<Vec<Artifact>, AppError> {
    let p = s.preset.params;
    let det = uniform(-40.0, 40.0, 17);
    let rows = par_try_map(pool, &det, |&d| {
        let mut row = vec![Cell::Num(d)];
        row.extend(well_cells(&p.with_detuning(mhz_to_internal(d))));
        Ok(row)
    })?;
    let mut t = Table::new(&["detuning_MHz", "R_c_a0", "depth_MHz", "min_omega2_MHz"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(vec![Artifact::csv("sweep_detuning.csv", t)])
}

pub fn propagator(s: &Setup) -> Result<Propagator, AppError> {
    Ok(Propagator::for_params(&s.preset.params, &s.preset.grid, s.window, s.richardson_levels)?)
}

/// Momentum of the lowest (entrance) channel [a0⁻¹].
pub fn entrance_momentum(m: &ScatteringMatrices) -> f64 {
    m.channels.p[m.channels.open_indices()[0]].re
}

pub fn scatter_energies(s: &Setup) -> Vec<f64> {
    uniform(s.window.0, s.window.1, s.points)
}

pub fn scatter(s: &Setup, pool: &ThreadPool) -> Result<Vec<Artifact>, AppError> {
    let prop = propagator(s)?;
    let e = scatter_energies(s);
    let ms = par_try_map(pool, &e, |&x| Ok(prop.scatter(x)?))?;
    let sigma: Vec<f64> = ms.iter().map(|m| m.sigma11()).collect();
    let lossy = s.loss.map(|g| lossy_convolve(&e, &sigma, g)).transpose()?;
    let mut header = vec!["E_MHz", "P1_1e-22_g_cm_s", "sigma11_cm2", "abs_S11", "re_S11", "im_S11"];
    if lossy.is_some() {
        header.push("sigma11_lossy_cm2");
    }
    let mut t = Table::new(&header);
    for (i, m) in ms.iter().enumerate() {
        let s11 = m.s11();
        let mut row = vec![
            Cell::Num(internal_to_mhz(e[i])),
            Cell::Num(momentum_to_fig_units(entrance_momentum(m))),
            Cell::Num(sigma[i]),
            Cell::Num(s11.norm()),
            Cell::Num(s11.re),
            Cell::Num(s11.im),
        ];
        if let Some(l) = &lossy {
            row.push(Cell::Num(l[i]));
        }
        t.push(row);
    }
    Ok(vec![Artifact::csv("scatter.csv", t)])
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRecord {
    #[serde(rename = "e_r_MHz")]
    pub e_r_mhz: f64,
    #[serde(rename = "gamma_r_MHz")]
    pub gamma_r_mhz: f64,
    pub kind: &'static str,
    /// Seed centre [MHz] for pole entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(rename = "seed_MHz")]
    pub seed_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

impl ResonanceRecord {
    fn from_resonance(r: &Resonance) -> Self {
        Self {
            e_r_mhz: internal_to_mhz(r.e_r),
            gamma_r_mhz: internal_to_mhz(r.gamma_r),
            kind: r.kind.name(),
            seed_mhz: None,
            converged: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub preset: String,
    #[serde(rename = "window_MHz")]
    pub window_mhz: (f64, f64),
    pub peaks: Vec<ResonanceRecord>,
    pub poles: Vec<ResonanceRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(rename = "loss_MHz")]
    pub loss_mhz: Option<f64>,
    /// Peaks of the loss-convolved curve (refined scan convolved onto the coarse grid).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lossy_peaks: Option<Vec<ResonanceRecord>>,
}

/// In-memory results of [`resonance_scan`].
pub struct ResonanceScan {
    pub e: Vec<f64>,
    pub sigma: Vec<f64>,
    /// The initial uniform scan (before refinement).
    pub coarse: (Vec<f64>, Vec<f64>),
    pub peaks: Vec<Resonance>,
    pub poles: Vec<(Resonance, PoleOutcome)>,
    pub lossy: Option<(Vec<f64>, Vec<Resonance>)>,
}

pub fn resonance_scan(s: &Setup, pool: &ThreadPool, prop: &Propagator) -> Result<ResonanceScan, AppError> {
    let first: RefCell<Option<(Vec<f64>, Vec<f64>)>> = RefCell::new(None);
    let settings = ScanSettings { coarse_points: s.points, refine_points: 32, rounds: 2 };
    let (e, sigma) = adaptive_scan(s.window, settings, |xs| {
        let y =
            pool.install(|| xs.par_iter().map(|&x| prop.scatter(x).map(|m| m.sigma11())).collect::<Result<Vec<_>, Error>>())?;
        first.borrow_mut().get_or_insert_with(|| (xs.to_vec(), y.clone()));
        Ok(y)
    })?;
    let coarse = first.into_inner().expect("adaptive scan evaluates the coarse grid");
    let peaks: Vec<Resonance> = scan_and_fit(&e, &sigma).into_iter().map(|(r, _)| r).collect();
    let seeds: Vec<Resonance> =
        peaks.iter().filter(|r| r.kind == cavity_dimer_core::resonance::ResonanceKind::PeakFit).copied().collect();
    let poles = par_try_map(pool, &seeds, |r| Ok((*r, find_pole(prop, r.e_r, r.gamma_r, 40)?)))?;
    let lossy = match s.loss {
        Some(g) => {
            let y = lossy_convolve_onto(&e, &sigma, &coarse.0, g)?;
            let fits = scan_and_fit(&coarse.0, &y).into_iter().map(|(r, _)| r).collect();
            Some((y, fits))
        }
        None => None,
    };
    Ok(ResonanceScan { e, sigma, coarse, peaks, poles, lossy })
}

pub fn resonances(s: &Setup, pool: &ThreadPool) -> Result<Vec<Artifact>, AppError> {
    let prop = propagator(s)?;
    let scan = resonance_scan(s, pool, &prop)?;
    let poles = scan
        .poles
        .iter()
        .map(|(seed, out)| match out {
            PoleOutcome::Converged(r) => ResonanceRecord {
                seed_mhz: Some(internal_to_mhz(seed.e_r)),
                converged: Some(true),
                ..ResonanceRecord::from_resonance(r)
            },
            PoleOutcome::Unconverged { last, .. } => ResonanceRecord {
                e_r_mhz: internal_to_mhz(last.re),
                gamma_r_mhz: internal_to_mhz(-2.0 * last.im),
                kind: "complex-pole",
                seed_mhz: Some(internal_to_mhz(seed.e_r)),
                converged: Some(false),
            },
        })
        .collect();
    let report = ResonanceReport {
        preset: s.preset.name.to_string(),
        window_mhz: s.window_mhz(),
        peaks: scan.peaks.iter().map(ResonanceRecord::from_resonance).collect(),
        poles,
        loss_mhz: s.loss.map(internal_to_mhz),
        lossy_peaks: scan.lossy.as_ref().map(|(_, r)| r.iter().map(ResonanceRecord::from_resonance).collect()),
    };
    for r in report.peaks.iter().chain(&report.poles) {
        if !(r.e_r_mhz.is_finite() && r.gamma_r_mhz.is_finite()) {
            return Err(AppError::NonFinite { column: "resonances".into(), row: 0 });
        }
    }
    let value = serde_json::to_value(&report).map_err(|e| AppError::Io(e.to_string()))?;
    let mut t = Table::new(&["E_MHz", "sigma11_cm2"]);
    for (x, y) in scan.e.iter().zip(&scan.sigma) {
        t.push(vec![Cell::Num(internal_to_mhz(*x)), Cell::Num(*y)]);
    }
    let mut out =
        vec![Artifact { name: "resonances.json".into(), payload: Payload::Json(value) }, Artifact::csv("resonance_scan.csv", t)];
    if let Some((y, _)) = &scan.lossy {
        let mut t = Table::new(&["E_MHz", "sigma11_lossy_cm2"]);
        for (x, v) in scan.coarse.0.iter().zip(y) {
            t.push(vec![Cell::Num(internal_to_mhz(*x)), Cell::Num(*v)]);
        }
        out.push(Artifact::csv("resonance_scan_lossy.csv", t));
    }
    Ok(out)
}

pub fn angle_levels(p: &SystemParams, n_theta: usize, sym: Symmetry, pool: &ThreadPool) -> Result<Vec<AngleLevels>, AppError> {
    par_try_map(pool, &theta_grid(n_theta), |&t| Ok(levels_at_angle(p, t, sym)?))
}

pub fn levels(s: &Setup, pool: &ThreadPool) -> Result<Vec<Artifact>, AppError> {
    let sym = s.symmetry.unwrap_or(Symmetry::Sigma);
    let angles = angle_levels(&s.preset.params, s.n_theta, sym, pool)?;
    let mut t = Table::new(&["theta_rad", "v", "e_v_MHz", "shift_MHz", "width_MHz", "p_LZ"]);
    for a in &angles {
        for l in &a.levels {
            t.push(vec![
                Cell::Num(a.theta),
                Cell::from(l.v),
                Cell::Num(internal_to_mhz(l.e_v)),
                Cell::Num(internal_to_mhz(l.lzs_shift)),
                Cell::Num(internal_to_mhz(l.lzs_width)),
                Cell::Num(l.p_lz),
            ]);
        }
    }
    Ok(vec![Artifact::csv(&format!("levels_{}.csv", sym.name()), t)])
}

/// Emission axis relative to ω_A: from 25% below the well bottom to 25% of
/// the depth above the ω₂ threshold, at full coupling.
pub fn spectrum_axis(p: &SystemParams, n: usize) -> Result<Vec<f64>, AppError> {
    let thr = thresholds(p)[1];
    let well = locate_well(p, WELL_SEARCH.0, WELL_SEARCH.1).ok_or(Error::NoWell)?;
    Ok(uniform(thr - 1.25 * well.depth, thr + 0.25 * well.depth, n))
}

/// Lines for one symmetry with trapezoid weights in θ applied.
pub fn lines_for(
    s: &Setup,
    sym: Symmetry,
    n_theta: usize,
    pool: &ThreadPool,
) -> Result<(SpectrumConfig, Vec<SpectrumLine>), AppError> {
    let p = s.preset.params;
    let cfg = SpectrumConfig {
        symmetry: sym,
        gamma_eff: s.gamma_eff,
        e_gg: recoil_energy(s.preset.wavelength, 2.0 * p.mu),
        omega: spectrum_axis(&p, 1601)?,
        n_theta,
    };
    cfg.validate()?;
    let thetas = theta_grid(n_theta);
    let h = PI / (n_theta - 1) as f64;
    let per_angle = par_try_map(pool, &thetas, |&t| {
        let a = levels_at_angle(&p, t, sym)?;
        Ok(spectrum_lines(&cfg, std::slice::from_ref(&a), 1)?)
    })?;
    let mut lines = Vec::new();
    for (i, ls) in per_angle.into_iter().enumerate() {
        let q = if i == 0 || i + 1 == n_theta { 0.5 * h } else { h };
        lines.extend(ls.into_iter().map(|l| SpectrumLine { weight: q * l.weight, ..l }));
    }
    Ok((cfg, lines))
}

/// ω axis [rad/s], I_Σ and I_Π.
pub type Spectra = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Both symmetries on a common axis, each normalized to unit maximum.
pub fn spectra(s: &Setup, n_theta: usize, pool: &ThreadPool) -> Result<Spectra, AppError> {
    let (cs, ls) = lines_for(s, Symmetry::Sigma, n_theta, pool)?;
    let (cp, lp) = lines_for(s, Symmetry::Pi, n_theta, pool)?;
    let is = emission_spectrum(&cs, ls)?;
    let ip = emission_spectrum(&cp, lp)?;
    Ok((cs.omega, is.intensity, ip.intensity))
}

pub fn spectrum(s: &Setup, pool: &ThreadPool) -> Result<Vec<Artifact>, AppError> {
    let (w, is, ip) = spectra(s, s.n_theta, pool)?;
    let mut t = Table::new(&["omega_MHz_rel", "I_sigma", "I_pi"]);
    for i in 0..w.len() {
        t.push(vec![Cell::Num(internal_to_mhz(w[i])), Cell::Num(is[i]), Cell::Num(ip[i])]);
    }
    Ok(vec![Artifact::csv("spectrum.csv", t)])
}

/// Result of one quick invariant check.
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn morse_round_trip() -> Result<f64, AppError> {
    let truth = MorseFit::new(mhz_to_internal(80.0), 1800.0, 2.5e-3, 1.7e11)?;
    let fit = cavity_dimer_core::boundstates::fit_morse_to(|r| truth.potential(r), 1800.0, truth.kinetic)?;
    Ok([(fit.d_e, truth.d_e), (fit.r_e, truth.r_e), (fit.a, truth.a)]
        .iter()
        .map(|(x, y)| (x / y - 1.0).abs())
        .fold(0.0, f64::max))
}

/// Fast invariant suite; each check is cheap enough to run on every call.
pub fn invariant_checks(s: &Setup, pool: &ThreadPool) -> Result<Vec<Check>, AppError> {
    let p = s.preset.params;
    let mut out = Vec::new();

    let r_far = 10.0 * s.preset.grid.r_infinity;
    let thr = thresholds(&p);
    let far = curves_at(&p, r_far);
    let tail = p.c3 / r_far.powi(3);
    let dev = thr.iter().zip(&far).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(Check { name: "thresholds_vs_far_curves_rel_tail", value: dev / tail, tolerance: 1.0 + 1e-6 });

    let grid = RadialGrid::uniform(s.preset.grid.r_wall, s.preset.grid.r_infinity, 2001)?;
    let curves = diagonalize_curves(&p, &grid)?;
    let ortho = curves.chi.iter().map(|c| (c.transpose() * c - nalgebra::Matrix3::identity()).abs().max()).fold(0.0, f64::max);
    out.push(Check { name: "eigenvector_orthonormality", value: ortho, tolerance: 1e-12 });
    let tables = CouplingTables::build(&curves)?;
    let wsym = tables.w.iter().map(|w| (w - w.transpose()).abs().max() / w.abs().max().max(1e-300)).fold(0.0, f64::max);
    out.push(Check { name: "coupling_matrix_symmetry", value: wsym, tolerance: 1e-10 });
    let torth = tables.t.iter().map(|t| (t.transpose() * t - nalgebra::Matrix3::identity()).abs().max()).fold(0.0, f64::max);
    out.push(Check { name: "transform_orthogonality", value: torth, tolerance: 1e-10 });

    let prop = propagator(s)?;
    let es = uniform(s.window.0, s.window.1, 5);
    let ms = par_try_map(pool, &es, |&e| Ok((prop.scatter(e)?, prop.scatter_log_derivative(e)?)))?;
    out.push(Check {
        name: "s_unitarity",
        value: ms.iter().map(|(m, _)| m.unitarity_defect()).fold(0.0, f64::max),
        tolerance: 1e-6,
    });
    out.push(Check {
        name: "s_symmetry",
        value: ms.iter().map(|(m, _)| m.symmetry_defect()).fold(0.0, f64::max),
        tolerance: 1e-6,
    });
    out.push(Check {
        name: "sigma_over_unitarity_bound",
        value: ms.iter().map(|(m, _)| (m.sigma11() / unitarity_limit(entrance_momentum(m)) - 1.0).max(0.0)).fold(0.0, f64::max),
        tolerance: 1e-6,
    });
    out.push(Check {
        name: "volterra_vs_log_derivative_sigma",
        value: ms.iter().map(|(a, b)| (a.sigma11() / b.sigma11() - 1.0).abs()).fold(0.0, f64::max),
        tolerance: 1e-4,
    });

    out.push(Check { name: "morse_round_trip", value: morse_round_trip()?, tolerance: 1e-8 });
    if let Ok(fit) = fit_morse(&p) {
        if let Some(top) = fit.v_max() {
            let grid_e = morse_grid_levels(&fit, 0.5);
            let spacing = fit.level_energy(1) - fit.level_energy(0);
            let dev = (0..=top.min(grid_e.len().saturating_sub(1)).min(5))
                .map(|v| (grid_e[v] - fit.level_energy(v)).abs() / spacing)
                .fold(0.0, f64::max);
            out.push(Check { name: "morse_levels_vs_grid_rel_spacing", value: dev, tolerance: 1e-2 });
        }
    }
    Ok(out)
}

pub fn validate(s: &Setup, pool: &ThreadPool) -> Result<(Vec<Artifact>, bool), AppError> {
    let checks = invariant_checks(s, pool)?;
    let mut t = Table::new(&["check", "value", "tolerance", "pass"]);
    let mut ok = true;
    for c in &checks {
        ok &= c.passed();
        t.push(vec![Cell::Text(c.name.into()), Cell::Num(c.value), Cell::Num(c.tolerance), Cell::Int(c.passed() as i64)]);
    }
    Ok((vec![Artifact::csv("validate.csv", t)], ok))
}
