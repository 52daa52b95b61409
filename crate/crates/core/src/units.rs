//! Unit system: energies as angular frequencies [rad/s], lengths in a0.

use core::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34; // J s
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11; // m
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27; // kg
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0; // m/s
pub const CS133_MASS_U: f64 = 132.905_451_961;

/// Mass of 133Cs in kg.
pub const CS133_MASS: f64 = CS133_MASS_U * ATOMIC_MASS_UNIT;

/// a0² expressed in cm².
pub const BOHR2_CM2: f64 = (BOHR_RADIUS * 100.0) * (BOHR_RADIUS * 100.0);

pub fn mhz_to_internal(f_mhz: f64) -> f64 {
    2.0 * PI * 1e6 * f_mhz
}

pub fn internal_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}

pub fn khz_to_internal(f_khz: f64) -> f64 {
    2.0 * PI * 1e3 * f_khz
}

/// ħ/(2μ a0²) in rad/s: the radial equation reads −c φ'' + ω(R) φ = E φ.
pub fn kinetic_constant(mu: f64) -> f64 {
    HBAR / (2.0 * mu * BOHR_RADIUS * BOHR_RADIUS)
}

/// Reduced mass giving a kinetic constant of exactly `c` (inverse of the above).
pub fn mu_for_kinetic_constant(c: f64) -> f64 {
    HBAR / (2.0 * c * BOHR_RADIUS * BOHR_RADIUS)
}

/// Momentum ħP for P in a0⁻¹, expressed in 10⁻²² g·cm/s.
pub fn momentum_to_fig_units(p_inv_a0: f64) -> f64 {
    // kg m/s -> g cm/s is ×1e5
    HBAR * p_inv_a0 / BOHR_RADIUS * 1e5 / 1e-22
}

/// Wavelength [a0] of light with angular frequency `w`.
pub fn wavelength_a0(w: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / w / BOHR_RADIUS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cs_kinetic_constant() {
        // hand value: 1.054571817e-34 / (132.905451961 u * (0.529177e-10 m)^2)
        let c = kinetic_constant(CS133_MASS / 2.0);
        assert!((c / 1.706_404_55e11 - 1.0).abs() < 1e-8, "{c}");
    }

    #[test]
    fn mass_scaling() {
        let c = kinetic_constant(1e-25);
        assert!((kinetic_constant(2e-25) / c - 0.5).abs() < 1e-15);
        let mu = mu_for_kinetic_constant(1.0);
        assert!((kinetic_constant(mu) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mhz_round_trip() {
        for f in [1e-3, 0.8, 120.0, 6.0e5, 3.5e8] {
            let back = internal_to_mhz(mhz_to_internal(f));
            assert!((back / f - 1.0).abs() < 1e-12);
        }
    }
}
