//! Dressed one-excitation Hamiltonian in the basis
//! |e_A g_B,0⟩, |e_B g_A,0⟩, |g_A g_B,1⟩ and its adiabatic curves.
//!
//! Internally every energy is measured from ω_A, which keeps the MHz-scale
//! structure far above rounding of the optical carrier.

use alloc::vec::Vec;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::SystemParams;

/// Absolute Hamiltonian [rad/s] at separation `r` [a0].
pub fn build_hamiltonian(p: &SystemParams, r: f64) -> Result<Matrix3<f64>> {
    let mut h = relative_hamiltonian(p, r)?;
    for i in 0..3 {
        h[(i, i)] += p.omega_a;
    }
    Ok(h)
}

/// Hamiltonian with ω_A subtracted from the diagonal.
pub fn relative_hamiltonian(p: &SystemParams, r: f64) -> Result<Matrix3<f64>> {
    if !(r > 0.0) {
        return Err(Error::Domain(alloc::format!("separation must be positive, got {r}")));
    }
    Ok(rel_h(p, p.c3 / (r * r * r)))
}

fn rel_h(p: &SystemParams, v: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, v, p.kappa_a, v, p.omega_b - p.omega_a, p.kappa_b, p.kappa_a, p.kappa_b, p.omega_c - p.omega_a)
}

/// Ascending eigenvalues and matching eigenvector columns.
pub fn eigen_sorted(h: Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let eig = SymmetricEigen::new(h);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let w = [eig.eigenvalues[idx[0]], eig.eigenvalues[idx[1]], eig.eigenvalues[idx[2]]];
    let v = Matrix3::from_columns(&[
        eig.eigenvectors.column(idx[0]).into_owned(),
        eig.eigenvectors.column(idx[1]).into_owned(),
        eig.eigenvectors.column(idx[2]).into_owned(),
    ]);
    (w, v)
}

/// Relative eigenvalues at separation `r`.
pub fn curves_at(p: &SystemParams, r: f64) -> [f64; 3] {
    eigen_sorted(rel_h(p, p.c3 / (r * r * r))).0
}

/// Asymptotic thresholds ωᵢ(∞) − ω_A from the R-independent part.
pub fn thresholds(p: &SystemParams) -> [f64; 3] {
    eigen_sorted(rel_h(p, 0.0)).0
}

fn fix_outer_sign(v: &mut Vector3<f64>) {
    let s = if v[2].abs() > 1e-6 {
        v[2]
    } else if v[0].abs() > 1e-6 {
        v[0]
    } else {
        v[1]
    };
    if s < 0.0 {
        *v = -*v;
    }
}

/// Eigenvalues ω₁ ≤ ω₂ ≤ ω₃ (relative to ω_A) and sign-continuous eigenvectors.
#[derive(Debug, Clone)]
pub struct AdiabaticCurves {
    pub r: Vec<f64>,
    pub omega: Vec<[f64; 3]>,
    /// Columns are χ₁, χ₂, χ₃.
    pub chi: Vec<Matrix3<f64>>,
    pub thresholds: [f64; 3],
    pub params: SystemParams,
}

pub fn diagonalize_curves(p: &SystemParams, grid: &RadialGrid) -> Result<AdiabaticCurves> {
    let r = grid.points().to_vec();
    let n = r.len();
    let mut omega = alloc::vec![[0.0; 3]; n];
    let mut chi = alloc::vec![Matrix3::zeros(); n];
    for k in (0..n).rev() {
        let h = rel_h(p, p.c3 / (r[k] * r[k] * r[k]));
        let (w, mut v) = eigen_sorted(h);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalAt { r: r[k], reason: "eigen-solver failure".into() });
        }
        for i in 0..3 {
            let mut col: Vector3<f64> = v.column(i).into_owned();
            if k + 1 == n {
                fix_outer_sign(&mut col);
            } else if col.dot(&chi[k + 1].column(i)) < 0.0 {
                col = -col;
            }
            v.set_column(i, &col);
        }
        omega[k] = w;
        chi[k] = v;
    }
    Ok(AdiabaticCurves { r, omega, chi, thresholds: thresholds(p), params: *p })
}

/// Minimum of the middle curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellCharacterization {
    pub r_c: f64,
    /// ω₂(∞) − ω₂(R_c) ≥ 0.
    pub depth: f64,
    /// ω₂(R_c) − ω_A.
    pub min_value: f64,
}

/// Discrete interior minimum of ω₂ refined by a three-point parabola.
pub fn characterize_well(curves: &AdiabaticCurves) -> Option<WellCharacterization> {
    let n = curves.r.len();
    if n < 3 {
        return None;
    }
    let (k, _) = curves.omega.iter().enumerate().min_by(|a, b| a.1[1].total_cmp(&b.1[1]))?;
    if k == 0 || k == n - 1 {
        return None;
    }
    let (x0, x1, x2) = (curves.r[k - 1], curves.r[k], curves.r[k + 1]);
    let (y0, y1, y2) = (curves.omega[k - 1][1], curves.omega[k][1], curves.omega[k + 1][1]);
    let (r_c, min_value) = parabola_vertex(x0, x1, x2, y0, y1, y2);
    let depth = curves.thresholds[1] - min_value;
    (depth > 0.0).then_some(WellCharacterization { r_c, depth, min_value })
}

fn parabola_vertex(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a <= 0.0 {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
    (xv, yv)
}

/// Well of ω₂ located to machine precision by golden-section search on the
/// analytic curve, scanning `[r_lo, r_hi]` on a log grid first.
pub fn locate_well(p: &SystemParams, r_lo: f64, r_hi: f64) -> Option<WellCharacterization> {
    const N: usize = 800;
    let ratio = libm::pow(r_hi / r_lo, 1.0 / (N - 1) as f64);
    let mut best = (0usize, f64::INFINITY);
    let mut rs = [0.0; N];
    for (i, slot) in rs.iter_mut().enumerate() {
        let r = r_lo * libm::pow(ratio, i as f64);
        *slot = r;
        let w = curves_at(p, r)[1];
        if w < best.1 {
            best = (i, w);
        }
    }
    let i = best.0;
    if i == 0 || i == N - 1 {
        return None;
    }
    let f = |r: f64| curves_at(p, r)[1];
    let (mut a, mut b) = (rs[i - 1], rs[i + 1]);
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) < 1e-10 * b {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let r_c = 0.5 * (a + b);
    let min_value = f(r_c);
    let depth = thresholds(p)[1] - min_value;
    (depth > 0.0).then_some(WellCharacterization { r_c, depth, min_value })
}

/// C₃ placing the ω₂ minimum at `target_rc`, by bisection in log C₃.
pub fn calibrate_c3(p: &SystemParams, target_rc: f64, r_lo: f64, r_hi: f64) -> Result<f64> {
    if !(target_rc > r_lo && target_rc < r_hi) {
        return Err(Error::Calibration(alloc::format!("target {target_rc} a0 outside ({r_lo}, {r_hi})")));
    }
    let scale = libm::sqrt(p.kappa_a * p.kappa_a + p.kappa_b * p.kappa_b) * target_rc.powi(3);
    if !(scale > 0.0) {
        return Err(Error::Calibration("couplings vanish; no well to place".into()));
    }
    let rc = |c3: f64| locate_well(&SystemParams { c3, ..*p }, r_lo, r_hi).map(|w| w.r_c);
    let (mut lo, mut hi) = (libm::log(scale), libm::log(scale));
    let mut tries = 0;
    loop {
        match (rc(libm::exp(lo)), rc(libm::exp(hi))) {
            (Some(a), Some(b)) if a < target_rc && b > target_rc => break,
            (Some(a), Some(_)) if a >= target_rc => lo -= core::f64::consts::LN_2,
            (Some(_), Some(_)) => hi += core::f64::consts::LN_2,
            _ => return Err(Error::Calibration("interval does not bracket the target".into())),
        }
        tries += 1;
        if tries > 60 {
            return Err(Error::Calibration("interval does not bracket the target".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match rc(libm::exp(mid)) {
            Some(r) if r < target_rc => lo = mid,
            Some(_) => hi = mid,
            None => return Err(Error::Calibration("well vanished during bisection".into())),
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(libm::exp(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Swept value: κ_A or ω_c − ω_A [rad/s].
    pub x: f64,
    pub well: Option<WellCharacterization>,
}

pub fn sweep_coupling(p: &SystemParams, kappas: &[f64], r_lo: f64, r_hi: f64) -> Vec<SweepRow> {
    kappas.iter().map(|&k| SweepRow { x: k, well: locate_well(&p.with_kappa_a(k), r_lo, r_hi) }).collect()
}

pub fn sweep_detuning(p: &SystemParams, detunings: &[f64], r_lo: f64, r_hi: f64) -> Vec<SweepRow> {
    detunings.iter().map(|&d| SweepRow { x: d, well: locate_well(&p.with_detuning(d), r_lo, r_hi) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{cs_optical, CS_OPTICAL_C3};
    use crate::units::mhz_to_internal;

    #[test]
    fn calibration_reproduces_shipped_c3() {
        let p = cs_optical().params;
        let c3 = calibrate_c3(&p, 2000.0, 200.0, 20_000.0).unwrap();
        assert!((c3 / CS_OPTICAL_C3 - 1.0).abs() < 1e-7, "{c3:e}");
        let w = locate_well(&p, 200.0, 20_000.0).unwrap();
        assert!((w.r_c - 2000.0).abs() < 1e-3);
        assert!(calibrate_c3(&p, 30_000.0, 200.0, 20_000.0).is_err());
    }

    #[test]
    fn rydberg_calibration() {
        let p = crate::params::cs_rydberg().params;
        let c3 = calibrate_c3(&p, 20_000.0, 2_000.0, 200_000.0).unwrap();
        assert!((c3 / crate::params::CS_RYDBERG_C3 - 1.0).abs() < 1e-7, "{c3:e}");
    }

    #[test]
    fn c3_scaling_exponent() {
        let p = cs_optical().params;
        let r1 = locate_well(&p, 200.0, 20_000.0).unwrap().r_c;
        let r8 = locate_well(&SystemParams { c3: 8.0 * p.c3, ..p }, 200.0, 20_000.0).unwrap().r_c;
        let expo = libm::log(r8 / r1) / libm::log(8.0);
        assert!((expo - 1.0 / 3.0).abs() < 0.02, "{expo}");
    }

    #[test]
    fn grid_well_matches_exact() {
        let p = cs_optical().params;
        let g = RadialGrid::uniform(200.0, 20_000.0, 16_384).unwrap();
        let c = diagonalize_curves(&p, &g).unwrap();
        let w = characterize_well(&c).unwrap();
        let e = locate_well(&p, 200.0, 20_000.0).unwrap();
        assert!((w.r_c - e.r_c).abs() < 1.0);
        assert!((w.min_value - e.min_value).abs() < 1e-6 * e.depth);
        assert!((crate::units::internal_to_mhz(e.min_value) + 95.5).abs() < 0.1);
    }

    #[test]
    fn no_well_without_coupling() {
        let mut p = cs_optical().params;
        p.kappa_a = 0.0;
        p.kappa_b = 0.0;
        let g = RadialGrid::uniform(200.0, 20_000.0, 2000).unwrap();
        assert!(characterize_well(&diagonalize_curves(&p, &g).unwrap()).is_none());
        assert!(locate_well(&p, 200.0, 20_000.0).is_none());
    }

    #[test]
    fn sweeps_trivial_cases() {
        let p = cs_optical().params;
        let one = sweep_coupling(&p, &[p.kappa_a], 200.0, 20_000.0);
        assert_eq!(one.len(), 1);
        let ks = [mhz_to_internal(120.0), mhz_to_internal(240.0), mhz_to_internal(480.0)];
        let fwd = sweep_coupling(&p, &ks, 200.0, 20_000.0);
        let mut rev_k = ks;
        rev_k.reverse();
        let mut rev = sweep_coupling(&p, &rev_k, 200.0, 20_000.0);
        rev.reverse();
        assert_eq!(fwd, rev);
        let base = sweep_detuning(&p, &[0.0], 200.0, 20_000.0);
        assert!(base[0].well.is_some());
    }
}
