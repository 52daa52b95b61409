//! Angle-averaged Franck–Condon fluorescence spectrum of the quasibound
//! diatom decaying to a p-wave ground-state pair.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

use crate::adiabatic::diagonalize_curves;
use crate::boundstates::{AngleLevels, MorseFit};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::numerics::{spherical_j1, trapezoid};
use crate::params::{Symmetry, SystemParams};
use crate::units::{BOHR_RADIUS, HBAR};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub symmetry: Symmetry,
    /// Lorentzian half-width Γ_eff [rad/s].
    pub gamma_eff: f64,
    /// Ground-state collision energy [rad/s].
    pub e_gg: f64,
    /// Emission frequencies relative to ω_A [rad/s].
    pub omega: Vec<f64>,
    pub n_theta: usize,
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_eff > 0.0) {
            return Err(Error::invalid("gamma_eff", "must be positive"));
        }
        if !(self.e_gg > 0.0) {
            return Err(Error::invalid("e_gg", "must be positive"));
        }
        if self.n_theta < 8 {
            return Err(Error::invalid("n_theta", "at least 8 angles"));
        }
        if self.omega.is_empty() || self.omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("omega", "non-empty finite frequency grid"));
        }
        Ok(())
    }
}

/// One-photon recoil ħk²/2m [rad/s] for a photon of wavelength `wavelength`
/// [a0] and an atom of mass `mass` [kg].
pub fn recoil_energy(wavelength: f64, mass: f64) -> f64 {
    let k = 2.0 * PI / (wavelength * BOHR_RADIUS);
    HBAR * k * k / (2.0 * mass)
}

/// Relative-motion wavenumber [a0⁻¹] at collision energy `e` [rad/s].
pub fn ground_wavenumber(e: f64, kinetic: f64) -> f64 {
    (e / kinetic).sqrt()
}

/// φ_gg(R) = kR·j₁(kR), the p-wave ground pair with unit asymptotic amplitude.
pub fn ground_wavefunction(k: f64, r: f64) -> f64 {
    let x = k * r;
    x * spherical_j1(x)
}

/// c_s(R) = (χ₂⁽¹⁾ + χ₂⁽²⁾)/√2 with a continuous sign along `grid`.
pub fn symmetric_admixture(p: &SystemParams, grid: &RadialGrid) -> Result<Vec<f64>> {
    let curves = diagonalize_curves(p, grid)?;
    Ok(curves.chi.iter().map(|c| (c[(0, 1)] + c[(1, 1)]) * FRAC_1_SQRT_2).collect())
}

/// Radial window and step for level `v`: classical region with tails, at
/// 40 points per shortest local wavelength.
fn level_grid(fit: &MorseFit, v: usize, refine: usize) -> Result<RadialGrid> {
    let e = fit.level_energy(v);
    let s = (1.0 + e / fit.d_e).max(0.0).sqrt();
    let x_in = -(1.0 + s).ln() / fit.a;
    let x_out = if s < 1.0 { -(1.0 - s).ln() / fit.a } else { 40.0 / fit.a };
    let tail = (fit.kinetic / -e).sqrt();
    let lo = (fit.r_e + x_in - 2.0 / fit.a).max(1.0);
    let hi = fit.r_e + x_out + 12.0 * tail;
    let k_max = (fit.d_e / fit.kinetic).sqrt();
    let h = 2.0 * PI / k_max / 40.0 / refine as f64;
    let n = (((hi - lo) / h).ceil() as usize).max(64) + 1;
    RadialGrid::uniform(lo, hi, n)
}

/// ∫ dR ψ_v(R) c_s(R) φ_gg(R). `refine` > 1 tightens the quadrature step.
pub fn franck_condon_amplitude(p: &SystemParams, fit: &MorseFit, v: usize, k_gg: f64, refine: usize) -> Result<f64> {
    let grid = level_grid(fit, v, refine)?;
    let cs = symmetric_admixture(p, &grid)?;
    let r = grid.points();
    let y: Vec<f64> = r.iter().zip(&cs).map(|(&x, &c)| fit.wavefunction(v, x) * c * ground_wavefunction(k_gg, x)).collect();
    Ok(trapezoid(r, &y))
}

/// sinθ·W_θ with W_θ = sin²θ (Σ) or cos²θ (Π).
pub fn angular_weight(theta: f64, symmetry: Symmetry) -> f64 {
    let w = match symmetry {
        Symmetry::Sigma => theta.sin().powi(2),
        Symmetry::Pi => theta.cos().powi(2),
    };
    theta.sin() * w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumLine {
    pub theta: f64,
    pub v: usize,
    /// ω_{2v}(θ) relative to ω_A [rad/s].
    pub center: f64,
    /// Quadrature weight × angular weight × |amplitude|².
    pub weight: f64,
    pub amplitude: f64,
}

/// Trapezoid weights for the angles in `angles` (uniform spacing assumed; a
/// single angle gets unit weight).
fn quadrature_weights(angles: &[AngleLevels]) -> Vec<f64> {
    let n = angles.len();
    if n == 1 {
        return alloc::vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { angles[i].theta - angles[i - 1].theta } else { 0.0 };
            let right = if i + 1 < n { angles[i + 1].theta - angles[i].theta } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Lines for every (θ, v) with the LZS-corrected centres. `angles` must be
/// computed for the same symmetry as `config`. Levels that the shift pushes
/// to or above the threshold are unbound and emit no line.
pub fn spectrum_lines(config: &SpectrumConfig, angles: &[AngleLevels], refine: usize) -> Result<Vec<SpectrumLine>> {
    let q = quadrature_weights(angles);
    let mut out = Vec::new();
    for (a, qw) in angles.iter().zip(q) {
        let Some(fit) = &a.fit else { continue };
        let k = ground_wavenumber(config.e_gg, fit.kinetic);
        let w = qw * angular_weight(a.theta, config.symmetry);
        for l in a.levels.iter().filter(|l| l.corrected_energy() < 0.0) {
            let amp = franck_condon_amplitude(&a.params, fit, l.v, k, refine)?;
            out.push(SpectrumLine {
                theta: a.theta,
                v: l.v,
                center: a.threshold + l.corrected_energy(),
                weight: w * amp * amp,
                amplitude: amp,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub symmetry: Symmetry,
    pub omega: Vec<f64>,
    /// Normalized to a maximum of one (all zero when there are no lines).
    pub intensity: Vec<f64>,
    pub lines: Vec<SpectrumLine>,
}

impl SpectrumResult {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty() || self.intensity.iter().all(|&v| v == 0.0)
    }
}

/// Σ over lines of weight·Γ²/((ω − ω_{2v})² + Γ²), in fixed line order.
pub fn emission_spectrum(config: &SpectrumConfig, lines: Vec<SpectrumLine>) -> Result<SpectrumResult> {
    config.validate()?;
    let g2 = config.gamma_eff * config.gamma_eff;
    let mut intensity: Vec<f64> =
        config.omega.iter().map(|&w| lines.iter().map(|l| l.weight * g2 / ((w - l.center).powi(2) + g2)).sum()).collect();
    let max = intensity.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        intensity.iter_mut().for_each(|v| *v /= max);
    }
    Ok(SpectrumResult { symmetry: config.symmetry, omega: config.omega.clone(), intensity, lines })
}

/// Relative sup-norm distance between two spectra on the same grid.
pub fn sup_norm_difference(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).cloned().fold(0.0, f64::max);
    let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_wavefunction_series_and_nodes() {
        let k = 1e-3;
        let r = 10.0;
        let x: f64 = k * r;
        assert!((ground_wavefunction(k, r) / (x * x / 3.0) - 1.0).abs() < 1e-4);
        // first zero of j₁ at x = 4.493409457909064
        assert!(ground_wavefunction(1.0, 4.493_409_457_909_064).abs() < 1e-12);
    }

    #[test]
    fn weights_emphasize_complementary_angles() {
        let t = 0.3;
        assert!(angular_weight(t, Symmetry::Pi) > angular_weight(t, Symmetry::Sigma));
        assert!(angular_weight(PI / 2.0, Symmetry::Pi).abs() < 1e-15);
        assert_eq!(angular_weight(0.0, Symmetry::Sigma), 0.0);
    }
}
