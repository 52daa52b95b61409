//! Vibrational levels of the ω₂ well: Morse fit, analytic levels and
//! eigenfunctions, and a Landau–Zener–Stueckelberg correction from the
//! ω₁/ω₂ pseudocrossing.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::adiabatic::{curves_at, locate_well, thresholds};
use crate::error::{Error, Result};
use crate::numerics::{levenberg_marquardt, linear_lsq, ln_gamma};
use crate::params::{Symmetry, SystemParams};
use crate::C64;

/// V(R) = D_e(1 − e^{−a(R−R_e)})² − D_e, energies relative to the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseFit {
    pub d_e: f64,
    pub r_e: f64,
    pub a: f64,
    pub omega_e: f64,
    pub omega_e_x_e: f64,
    pub rms_residual: f64,
    /// ħ/(2μa0²) [rad/s].
    pub kinetic: f64,
}

impl MorseFit {
    pub fn new(d_e: f64, r_e: f64, a: f64, kinetic: f64) -> Result<Self> {
        if !(d_e > 0.0 && a > 0.0 && kinetic > 0.0 && r_e.is_finite()) {
            return Err(Error::Domain(alloc::format!("invalid Morse parameters D={d_e}, a={a}")));
        }
        Ok(Self {
            d_e,
            r_e,
            a,
            omega_e: 2.0 * a * (kinetic * d_e).sqrt(),
            omega_e_x_e: kinetic * a * a,
            rms_residual: 0.0,
            kinetic,
        })
    }

    pub fn potential(&self, r: f64) -> f64 {
        let u = 1.0 - (-self.a * (r - self.r_e)).exp();
        self.d_e * u * u - self.d_e
    }

    /// λ = √(D/c)/a; bound levels are v < λ − ½.
    pub fn lambda(&self) -> f64 {
        (self.d_e / self.kinetic).sqrt() / self.a
    }

    pub fn v_max(&self) -> Option<usize> {
        let top = (self.lambda() - 0.5).floor();
        (top >= 0.0).then_some(top as usize)
    }

    pub fn level_energy(&self, v: usize) -> f64 {
        let x = v as f64 + 0.5;
        self.omega_e * x - self.omega_e_x_e * x * x - self.d_e
    }

    /// Angular frequency of classical vibration, dE/dv.
    pub fn classical_frequency(&self, v: usize) -> f64 {
        self.omega_e - 2.0 * self.omega_e_x_e * (v as f64 + 0.5)
    }

    /// Normalized eigenfunction ψ_v(R) [a0^{-1/2}], evaluated in log space so
    /// that deep wells with large λ stay finite.
    pub fn wavefunction(&self, v: usize, r: f64) -> f64 {
        let lam = self.lambda();
        let s = lam - v as f64 - 0.5;
        if s <= 0.0 {
            return 0.0;
        }
        let alpha = 2.0 * s;
        let y = 2.0 * lam * (-self.a * (r - self.r_e)).exp();
        let ln_fact = ln_gamma(C64::new(v as f64 + 1.0, 0.0)).re;
        let ln_norm = 0.5 * (self.a.ln() + ln_fact + alpha.ln() - ln_gamma(C64::new(2.0 * lam - v as f64, 0.0)).re);
        let l = crate::numerics::laguerre(v, alpha, y);
        if l == 0.0 || y == 0.0 || !y.is_finite() {
            return 0.0;
        }
        let ln_mag = ln_norm + s * y.ln() - 0.5 * y + l.abs().ln();
        l.signum() * ln_mag.exp()
    }
}

/// Least-squares Morse fit to `f` (well-frame energies) over
/// [R_c − 3/a, R_c + 6/a], re-centring the window on each new `a`.
pub fn fit_morse_to(f: impl Fn(f64) -> f64, r_c: f64, kinetic: f64) -> Result<MorseFit> {
    let d0 = -f(r_c);
    if !(d0 > 0.0) {
        return Err(Error::NoWell);
    }
    let h = 1e-3 * r_c;
    let curv = (f(r_c + h) - 2.0 * f(r_c) + f(r_c - h)) / (h * h);
    if !(curv > 0.0) {
        return Err(Error::NoWell);
    }
    let mut fit = MorseFit::new(d0, r_c, (curv / (2.0 * d0)).sqrt(), kinetic)?;
    for _ in 0..8 {
        let lo = (r_c - 3.0 / fit.a).max(0.1 * r_c);
        let hi = r_c + 6.0 / fit.a;
        let n = 400;
        let rs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = rs.iter().map(|&r| f(r)).collect();
        let (ds, as_) = (fit.d_e, fit.a);
        let lm = levenberg_marquardt(
            |q| {
                let m = MorseFit::new(ds * q[0], fit.r_e + q[1] / as_, as_ * q[2], kinetic).ok()?;
                Some(rs.iter().zip(&ys).map(|(&r, &y)| (m.potential(r) - y) / ds).collect())
            },
            &[1.0, 0.0, 1.0],
            200,
            1e-15,
        )
        .ok_or_else(|| Error::Numerical("Morse fit failed".into()))?;
        let mut next = MorseFit::new(ds * lm.x[0], fit.r_e + lm.x[1] / as_, as_ * lm.x[2], kinetic)?;
        next.rms_residual = lm.rms * ds;
        let change = (next.a / fit.a - 1.0).abs();
        fit = next;
        if change < 1e-12 {
            break;
        }
    }
    Ok(fit)
}

/// Levels of the fitted Morse curve from a uniform finite-difference
/// eigen-solve with step `h` [a0]. The box reaches far enough past the
/// outer turning point of the top level for its tail to decay.
pub fn morse_grid_levels(fit: &MorseFit, h: f64) -> Vec<f64> {
    let Some(top) = fit.v_max() else { return Vec::new() };
    let e_top = fit.level_energy(top);
    let turn = (2.0 * fit.d_e / -e_top).ln() / fit.a;
    let decay = (fit.kinetic / -e_top).sqrt();
    let lo = fit.r_e - 3.0 / fit.a;
    let hi = fit.r_e + turn.max(0.0) + 12.0 * decay;
    let n = ((hi - lo) / h).ceil() as usize;
    crate::numerics::grid_levels(lo, hi, n, fit.kinetic, |r| fit.potential(r), 0.0)
}

/// Morse fit of ω₂(R) − ω₂(∞).
pub fn fit_morse(p: &SystemParams) -> Result<MorseFit> {
    let well = locate_well(p, 1.0, 1e8).ok_or(Error::NoWell)?;
    let thr = thresholds(p)[1];
    fit_morse_to(|r| curves_at(p, r)[1] - thr, well.r_c, p.kinetic_constant())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationalLevel {
    pub v: usize,
    /// Energy below the ω₂ threshold [rad/s].
    pub e_v: f64,
    pub lzs_shift: f64,
    pub lzs_width: f64,
    pub p_lz: f64,
    pub theta: f64,
}

impl VibrationalLevel {
    pub fn corrected_energy(&self) -> f64 {
        self.e_v + self.lzs_shift
    }
}

/// Uncorrected levels v = 0..=v_max.
pub fn morse_levels(fit: &MorseFit, theta: f64) -> Vec<VibrationalLevel> {
    let Some(top) = fit.v_max() else { return Vec::new() };
    (0..=top)
        .map(|v| VibrationalLevel { v, e_v: fit.level_energy(v), lzs_shift: 0.0, lzs_width: 0.0, p_lz: 0.0, theta })
        .filter(|l| l.e_v < 0.0)
        .collect()
}

/// Two-state pseudocrossing between ω₁ and ω₂ near the well minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub r_c: f64,
    /// Half the adiabatic gap at R_c.
    pub v12: f64,
    /// |ΔF|, difference of diabatic slopes [rad/s per a0].
    pub slope_diff: f64,
    /// ω₂(R_c) − ω₂(∞) (negative).
    pub well_bottom: f64,
}

/// Linear diabats with constant coupling give gap² = F²(R − R_x)² + 4V₁₂²;
/// F is read off a quadratic least-squares fit of the gap² over R_c ± 5/a.
pub fn crossing_parameters(p: &SystemParams, fit: &MorseFit) -> Result<Crossing> {
    let well = locate_well(p, 1.0, 1e8).ok_or(Error::NoWell)?;
    let r_c = well.r_c;
    let gap = |r: f64| {
        let w = curves_at(p, r);
        w[1] - w[0]
    };
    let lo = (r_c - 5.0 / fit.a).max(0.1 * r_c);
    let hi = r_c + 5.0 / fit.a;
    let n = 201;
    let rs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let scale = gap(r_c).powi(2);
    let width = hi - lo;
    let a = DMatrix::from_fn(n, 3, |i, j| ((rs[i] - r_c) / width).powi(j as i32));
    let y = DVector::from_iterator(n, rs.iter().map(|&r| gap(r).powi(2) / scale));
    let c = linear_lsq(&a, &y).ok_or_else(|| Error::Numerical("crossing fit failed".into()))?;
    let f2 = c[2] * scale / (width * width);
    if !(f2 > 0.0) {
        return Err(Error::Numerical("adiabatic gap has no crossing curvature near R_c".into()));
    }
    Ok(Crossing { r_c, v12: 0.5 * gap(r_c), slope_diff: f2.sqrt(), well_bottom: well.min_value - thresholds(p)[1] })
}

/// Stueckelberg phase π/4 + δ(ln δ − 1) + arg Γ(1 − iδ).
pub fn stueckelberg_phase(delta: f64) -> f64 {
    let tail = if delta > 0.0 { delta * (delta.ln() - 1.0) } else { 0.0 };
    PI / 4.0 + tail + ln_gamma(C64::new(1.0, -delta)).im
}

/// Landau–Zener hopping probability exp(−2πV₁₂²/(v|ΔF|)).
pub fn landau_zener(v12: f64, velocity: f64, slope_diff: f64) -> f64 {
    if velocity <= 0.0 || slope_diff <= 0.0 {
        return 0.0;
    }
    (-2.0 * PI * v12 * v12 / (velocity * slope_diff)).exp()
}

/// Predissociation width ν·P_LZ and Stueckelberg shift ν·φ_S per level, with
/// ν = ω_cl/2π the classical vibration frequency.
pub fn lzs_correct(levels: &[VibrationalLevel], crossing: &Crossing, fit: &MorseFit) -> Vec<VibrationalLevel> {
    levels
        .iter()
        .map(|l| {
            let ke = l.e_v - crossing.well_bottom;
            let nu = fit.classical_frequency(l.v) / (2.0 * PI);
            if !(ke > 0.0) || !(nu > 0.0) {
                return VibrationalLevel { lzs_shift: 0.0, lzs_width: 0.0, p_lz: 0.0, ..*l };
            }
            let velocity = 2.0 * (fit.kinetic * ke).sqrt();
            let p_lz = landau_zener(crossing.v12, velocity, crossing.slope_diff);
            let delta = crossing.v12 * crossing.v12 / (velocity * crossing.slope_diff);
            VibrationalLevel { lzs_shift: nu * stueckelberg_phase(delta), lzs_width: nu * p_lz, p_lz, ..*l }
        })
        .collect()
}

/// Levels for one molecular-axis angle.
#[derive(Debug, Clone)]
pub struct AngleLevels {
    pub theta: f64,
    pub params: SystemParams,
    /// ω₂(∞) − ω_A at this angle.
    pub threshold: f64,
    pub fit: Option<MorseFit>,
    pub crossing: Option<Crossing>,
    pub levels: Vec<VibrationalLevel>,
}

/// Fit, quantize and LZS-correct at angle θ. Angles where the scaled coupling
/// no longer produces a well yield an empty level list.
pub fn levels_at_angle(p: &SystemParams, theta: f64, symmetry: Symmetry) -> Result<AngleLevels> {
    let q = p.at_angle(theta, symmetry);
    let threshold = thresholds(&q)[1];
    let empty = AngleLevels { theta, params: q, threshold, fit: None, crossing: None, levels: Vec::new() };
    if q.kappa_a == 0.0 && q.kappa_b == 0.0 {
        return Ok(empty);
    }
    let fit = match fit_morse(&q) {
        Ok(f) => f,
        Err(Error::NoWell) => return Ok(empty),
        Err(e) => return Err(e),
    };
    let crossing = crossing_parameters(&q, &fit)?;
    let levels = lzs_correct(&morse_levels(&fit, theta), &crossing, &fit);
    Ok(AngleLevels { fit: Some(fit), crossing: Some(crossing), levels, ..empty })
}

/// `n` equally spaced angles covering [0, π].
pub fn theta_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.5 * PI],
        _ => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}
