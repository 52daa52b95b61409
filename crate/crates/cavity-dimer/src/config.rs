//! TOML run configuration layered over a named preset. Precedence:
//! command-line flags, then the config file, then preset defaults.
//! Every key and its unit is listed in `docs/config.md`.

use std::path::Path;

use cavity_dimer_core::params::{preset, GridSpec, Preset, Symmetry};
use cavity_dimer_core::units::{internal_to_mhz, mhz_to_internal, BOHR_RADIUS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::AppError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Physical overrides; frequencies in cyclic MHz unless the key says rad/s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub omega_a_rad_s: Option<f64>,
    pub omega_b_offset_mhz: Option<f64>,
    pub detuning_mhz: Option<f64>,
    pub kappa_a_mhz: Option<f64>,
    pub kappa_b_mhz: Option<f64>,
    pub c3_rad_s_a0_3: Option<f64>,
    pub mu_kg: Option<f64>,
    pub gamma_c_mhz: Option<f64>,
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub r_wall_a0: Option<f64>,
    pub r_infinity_a0: Option<f64>,
    pub h_max_a0: Option<f64>,
    pub phase_step: Option<f64>,
    pub n_uniform: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub emin_mhz: Option<f64>,
    pub emax_mhz: Option<f64>,
    pub points: Option<usize>,
    pub loss_mhz: Option<f64>,
    pub gamma_eff_mhz: Option<f64>,
    pub n_theta: Option<usize>,
    pub symmetry: Option<String>,
    pub richardson_levels: Option<usize>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub preset: Preset,
    /// Energy window [rad/s relative to ω_A].
    pub window: (f64, f64),
    pub points: usize,
    /// Lorentzian FWHM for the lossy curve [rad/s]; `None` for lossless only.
    pub loss: Option<f64>,
    pub gamma_eff: f64,
    pub n_theta: usize,
    pub symmetry: Option<Symmetry>,
    pub richardson_levels: usize,
    /// SHA-256 of the config file bytes (empty without a file).
    pub config_hash: String,
}

impl Setup {
    pub fn from_preset(p: Preset) -> Self {
        Self {
            window: p.window,
            preset: p,
            points: 2000,
            loss: None,
            gamma_eff: mhz_to_internal(8.0),
            n_theta: 32,
            symmetry: None,
            richardson_levels: 3,
            config_hash: String::new(),
        }
    }

    pub fn window_mhz(&self) -> (f64, f64) {
        (internal_to_mhz(self.window.0), internal_to_mhz(self.window.1))
    }

    pub fn validate(&self) -> Result<(), AppError> {
        self.preset.params.validate()?;
        let g = &self.preset.grid;
        if !(g.r_wall > 0.0 && g.r_infinity > g.r_wall) {
            return Err(AppError::Config("grid: need 0 < r_wall_a0 < r_infinity_a0".into()));
        }
        if !(g.h_max > 0.0 && g.phase_step > 0.0 && g.n_uniform >= 2) {
            return Err(AppError::Config("grid: h_max_a0, phase_step must be positive and n_uniform ≥ 2".into()));
        }
        if !(self.window.1 > self.window.0) {
            return Err(AppError::Config(format!(
                "empty energy range: emin = {} MHz, emax = {} MHz",
                self.window_mhz().0,
                self.window_mhz().1
            )));
        }
        if self.points < 2 {
            return Err(AppError::Config("points must be at least 2".into()));
        }
        if self.loss.is_some_and(|l| !(l >= 0.0)) {
            return Err(AppError::Config("loss must be non-negative".into()));
        }
        if !(self.gamma_eff > 0.0) {
            return Err(AppError::Config("gamma_eff must be positive".into()));
        }
        if self.n_theta < 8 {
            return Err(AppError::Config("n_theta must be at least 8".into()));
        }
        if !(1..=4).contains(&self.richardson_levels) {
            return Err(AppError::Config("richardson_levels must be 1 to 4".into()));
        }
        if !(self.preset.wavelength > 0.0) {
            return Err(AppError::Config("wavelength must be positive".into()));
        }
        Ok(())
    }
}

pub fn parse_symmetry(s: &str) -> Result<Symmetry, AppError> {
    match s.to_ascii_lowercase().as_str() {
        "sigma" | "σ" => Ok(Symmetry::Sigma),
        "pi" | "π" => Ok(Symmetry::Pi),
        _ => Err(AppError::Config(format!("symmetry must be sigma or pi, got `{s}`"))),
    }
}

pub fn load_file(path: &Path) -> Result<(ConfigFile, String), AppError> {
    let bytes = std::fs::read(path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    let hash = format!("{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| AppError::Config(format!("{}: not UTF-8", path.display())))?;
    let cfg = toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, hash))
}

/// Applies a config file on top of `preset_name` (file's preset wins when
/// the caller passes none).
pub fn resolve(cfg: &ConfigFile, preset_name: Option<&str>, config_hash: String) -> Result<Setup, AppError> {
    let name = preset_name.or(cfg.preset.as_deref()).unwrap_or("cs-optical");
    let mut pr = preset(name)?;
    let p = &mut pr.params;
    let s = &cfg.params;
    if let Some(v) = s.omega_a_rad_s {
        let (db, dc) = (p.omega_b - p.omega_a, p.omega_c - p.omega_a);
        p.omega_a = v;
        p.omega_b = v + db;
        p.omega_c = v + dc;
    }
    if let Some(v) = s.omega_b_offset_mhz {
        p.omega_b = p.omega_a + mhz_to_internal(v);
    }
    if let Some(v) = s.detuning_mhz {
        *p = p.with_detuning(mhz_to_internal(v));
    }
    if let Some(v) = s.kappa_a_mhz {
        p.kappa_a = mhz_to_internal(v);
    }
    if let Some(v) = s.kappa_b_mhz {
        p.kappa_b = mhz_to_internal(v);
    }
    if let Some(v) = s.c3_rad_s_a0_3 {
        p.c3 = v;
    }
    if let Some(v) = s.mu_kg {
        p.mu = v;
    }
    if let Some(v) = s.gamma_c_mhz {
        p.gamma_c = mhz_to_internal(v);
    }
    if let Some(v) = s.wavelength_nm {
        pr.wavelength = v * 1e-9 / BOHR_RADIUS;
    }
    let g = &cfg.grid;
    let spec: &mut GridSpec = &mut pr.grid;
    if let Some(v) = g.r_wall_a0 {
        spec.r_wall = v;
    }
    if let Some(v) = g.r_infinity_a0 {
        spec.r_infinity = v;
    }
    if let Some(v) = g.h_max_a0 {
        spec.h_max = v;
    }
    if let Some(v) = g.phase_step {
        spec.phase_step = v;
    }
    if let Some(v) = g.n_uniform {
        spec.n_uniform = v;
    }
    let mut setup = Setup::from_preset(pr);
    setup.config_hash = config_hash;
    let r = &cfg.run;
    if let Some(v) = r.emin_mhz {
        setup.window.0 = mhz_to_internal(v);
    }
    if let Some(v) = r.emax_mhz {
        setup.window.1 = mhz_to_internal(v);
    }
    if let Some(v) = r.points {
        setup.points = v;
    }
    if let Some(v) = r.loss_mhz {
        setup.loss = Some(mhz_to_internal(v));
    }
    if let Some(v) = r.gamma_eff_mhz {
        setup.gamma_eff = mhz_to_internal(v);
    }
    if let Some(v) = r.n_theta {
        setup.n_theta = v;
    }
    if let Some(v) = &r.symmetry {
        setup.symmetry = Some(parse_symmetry(v)?);
    }
    if let Some(v) = r.richardson_levels {
        setup.richardson_levels = v;
    }
    Ok(setup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_preset() {
        let s = resolve(&ConfigFile::default(), Some("cs-optical"), String::new()).unwrap();
        assert_eq!(s.preset, cavity_dimer_core::params::cs_optical());
        s.validate().unwrap();
    }

    #[test]
    fn overrides_apply_and_negative_kappa_is_named() {
        let cfg: ConfigFile = toml::from_str("[params]\nkappa_a_mhz = -1.0\n").unwrap();
        let s = resolve(&cfg, None, String::new()).unwrap();
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("kappa_A"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("[params]\nkappa = 1.0\n").is_err());
    }

    #[test]
    fn preset_round_trips_through_serialization() {
        let s = resolve(&ConfigFile::default(), Some("cs-rydberg"), String::new()).unwrap();
        let p = s.preset.params;
        let file = ConfigFile {
            preset: Some("cs-rydberg".into()),
            params: ParamsSection {
                kappa_a_mhz: Some(internal_to_mhz(p.kappa_a)),
                kappa_b_mhz: Some(internal_to_mhz(p.kappa_b)),
                c3_rad_s_a0_3: Some(p.c3),
                ..Default::default()
            },
            ..Default::default()
        };
        let text = toml::to_string(&file).unwrap();
        let back = resolve(&toml::from_str(&text).unwrap(), None, String::new()).unwrap();
        assert_eq!(back.preset.params.c3, p.c3);
        assert!((back.preset.params.kappa_a / p.kappa_a - 1.0).abs() < 1e-15);
    }
}
