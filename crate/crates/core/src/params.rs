//! Physical parameters and the two shipped presets.

use crate::error::{Error, Result};
use crate::units::{khz_to_internal, mhz_to_internal, wavelength_a0, CS133_MASS};

/// Cs 6S₁/₂ → 6P₃/₂ line as a cyclic frequency [Hz].
pub const CS_D2_FREQUENCY_HZ: f64 = 3.5172e14;

/// Constants of the one-excitation Hamiltonian plus loss; all rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Resonant dipole-dipole coefficient [rad/s · a0³].
    pub c3: f64,
    /// Reduced mass [kg].
    pub mu: f64,
    pub gamma_c: f64,
    /// Partial wave; only l = 0 is exercised.
    pub l: u32,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("omega_A", self.omega_a), ("omega_B", self.omega_b), ("omega_c", self.omega_c)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        let nonneg = [("kappa_A", self.kappa_a), ("kappa_B", self.kappa_b), ("C3", self.c3), ("gamma_c", self.gamma_c)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::invalid("mu", "must be finite and > 0"));
        }
        if (self.omega_a - self.omega_b).abs() > 1e-3 * self.omega_a {
            return Err(Error::invalid("omega_B", "atomic lines must be nearly degenerate"));
        }
        if self.l != 0 {
            return Err(Error::invalid("l", "only s-wave scattering is supported"));
        }
        Ok(())
    }

    pub fn kinetic_constant(&self) -> f64 {
        crate::units::kinetic_constant(self.mu)
    }

    /// Cavity detuning ω_c − ω_A.
    pub fn detuning(&self) -> f64 {
        self.omega_c - self.omega_a
    }

    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.omega_c = self.omega_a + delta;
        self
    }

    /// Scales κ_A (and κ_B proportionally) to `kappa_a`.
    pub fn with_kappa_a(mut self, kappa_a: f64) -> Self {
        let ratio = if self.kappa_a > 0.0 { self.kappa_b / self.kappa_a } else { 1.0 };
        self.kappa_a = kappa_a;
        self.kappa_b = ratio * kappa_a;
        self
    }

    pub fn scale_coupling(mut self, factor: f64) -> Self {
        self.kappa_a *= factor;
        self.kappa_b *= factor;
        self
    }

    /// Couplings for molecular axis at angle θ to the cavity axis.
    pub fn at_angle(self, theta: f64, symmetry: Symmetry) -> Self {
        let f = match symmetry {
            Symmetry::Sigma => libm::sin(theta),
            Symmetry::Pi => libm::cos(theta),
        };
        self.scale_coupling(f.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    Sigma,
    Pi,
}

impl Symmetry {
    pub fn name(self) -> &'static str {
        match self {
            Symmetry::Sigma => "sigma",
            Symmetry::Pi => "pi",
        }
    }
}

/// Radial-grid construction knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub r_wall: f64,
    pub r_infinity: f64,
    /// Largest allowed step [a0].
    pub h_max: f64,
    /// Largest allowed local phase k(R)·h per step on the graded scattering grid.
    pub phase_step: f64,
    /// Point count for uniform grids (curves, Morse fits, spectra).
    pub n_uniform: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_wall > 0.0 && self.r_wall < self.r_infinity && self.r_infinity.is_finite()) {
            return Err(Error::invalid("r_wall", "need 0 < r_wall < r_infinity"));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::invalid("h_max", "must be > 0"));
        }
        if !(self.phase_step > 0.0 && self.phase_step <= 0.5) {
            return Err(Error::invalid("phase_step", "must lie in (0, 0.5]"));
        }
        if self.n_uniform < 2 {
            return Err(Error::invalid("n_uniform", "need at least 2 points"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: SystemParams,
    pub grid: GridSpec,
    /// Default scan window [rad/s, relative to ω_A].
    pub window: (f64, f64),
    /// Wavelength of the atomic transition [a0]; sets the cavity wavelength
    /// and the photon recoil.
    pub wavelength: f64,
}

/// Calibrated so the ω₁/ω₂ pseudocrossing sits at 2000 a0.
pub const CS_OPTICAL_C3: f64 = 6.000_523_803_311_718e18;
/// Calibrated so the pseudocrossing sits at 2×10⁴ a0.
pub const CS_RYDBERG_C3: f64 = 7.514_478_486_825_13e18;

pub fn cs_optical() -> Preset {
    let omega_a = 3.5172e14;
    let kappa_a = mhz_to_internal(120.0);
    Preset {
        name: "cs-optical",
        params: SystemParams {
            omega_a,
            omega_b: omega_a,
            omega_c: omega_a + mhz_to_internal(1.0),
            kappa_a,
            kappa_b: 0.8 * kappa_a,
            c3: CS_OPTICAL_C3,
            mu: CS133_MASS / 2.0,
            gamma_c: mhz_to_internal(5.0),
            l: 0,
        },
        grid: GridSpec { r_wall: 200.0, r_infinity: 20_000.0, h_max: 0.5, phase_step: 0.025, n_uniform: 16_384 },
        window: (mhz_to_internal(-96.0), mhz_to_internal(-0.2)),
        wavelength: wavelength_a0(2.0 * core::f64::consts::PI * CS_D2_FREQUENCY_HZ),
    }
}

pub fn cs_rydberg() -> Preset {
    let omega_a = mhz_to_internal(600.0e3);
    let kappa_a = khz_to_internal(150.0);
    Preset {
        name: "cs-rydberg",
        params: SystemParams {
            omega_a,
            omega_b: omega_a,
            omega_c: omega_a + khz_to_internal(1.0),
            kappa_a,
            kappa_b: 0.99 * kappa_a,
            c3: CS_RYDBERG_C3,
            mu: CS133_MASS / 2.0,
            gamma_c: khz_to_internal(2.0),
            l: 0,
        },
        grid: GridSpec { r_wall: 2_000.0, r_infinity: 200_000.0, h_max: 5.0, phase_step: 0.025, n_uniform: 16_384 },
        window: (khz_to_internal(-150.0), khz_to_internal(-1.0)),
        wavelength: wavelength_a0(omega_a),
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "cs-optical" => Ok(cs_optical()),
        "cs-rydberg" => Ok(cs_rydberg()),
        _ => Err(Error::invalid("preset", "unknown preset (cs-optical | cs-rydberg)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in [cs_optical(), cs_rydberg()] {
            p.params.validate().unwrap();
            p.grid.validate().unwrap();
        }
        let p = cs_optical().params;
        assert!((p.kappa_b / p.kappa_a - 0.8).abs() < 1e-15);
        // absolute frequencies carry ~0.06 rad/s of rounding at the optical carrier
        assert!((p.detuning() - mhz_to_internal(1.0)).abs() < 0.1);
    }

    #[test]
    fn negative_kappa_rejected() {
        let mut p = cs_optical().params;
        p.kappa_a = -1.0;
        match p.validate() {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "kappa_A"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn angle_scaling() {
        let p = cs_optical().params;
        let q = p.at_angle(core::f64::consts::FRAC_PI_2, Symmetry::Sigma);
        assert!((q.kappa_a - p.kappa_a).abs() < 1e-6);
        let q = p.at_angle(core::f64::consts::PI, Symmetry::Pi);
        assert!((q.kappa_b - p.kappa_b).abs() < 1e-6);
    }
}
