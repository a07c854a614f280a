//! Run configuration, read from TOML.

use crate::error::{Error, Result};
use crate::initial::{InitialData, Profile};
use crate::settings::{GridSpec, IterationSpec, QuadratureSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub radius: f64,
    pub amplitude: f64,
    pub profile: Profile,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec { radius: 1.0, amplitude: 1e-4, profile: Profile::CubicBump }
    }
}

/// Settings of the post-run checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Table nodes drawn for the decay fits of the field and its gradient.
    pub decay_probes: usize,
    pub fsc_alpha: f64,
    /// Largest η accepted by the free streaming check.
    pub fsc_eta: f64,
    /// Sphere radii for the radiation fluxes.
    pub radii: Vec<f64>,
    /// Advanced-time window of the incoming flux; the outgoing flux uses
    /// the mirrored retarded-time window.
    pub v_window: [f64; 2],
    pub sphere_theta: usize,
    pub sphere_phi: usize,
    pub flux_time_nodes: usize,
    /// Gauss–Legendre nodes per axis over the spatial support box.
    pub phase_x_nodes: usize,
    /// Momentum nodes per axis for phase-space integrals.
    pub phase_p_nodes: usize,
    /// Composite Gauss panels per axis for field integrals over the cube.
    pub field_panels: usize,
    pub volume_times: Vec<f64>,
    /// Cells per axis of the velocity grid used for support volumes.
    pub volume_cells: usize,
    pub jacobian_samples: usize,
    pub support_samples: usize,
    pub char_samples: usize,
    pub energy_tolerance: f64,
    pub l1_tolerance: f64,
    pub linf_tolerance: f64,
    /// Relative error allowed for integrals of exactly transported quantities.
    pub quadrature_tolerance: f64,
    pub jacobian_tolerance: f64,
    pub radiation_fraction: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            decay_probes: 48,
            fsc_alpha: 0.75,
            fsc_eta: 1e-2,
            radii: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            v_window: [2.0, 6.0],
            sphere_theta: 4,
            sphere_phi: 8,
            flux_time_nodes: 4,
            phase_x_nodes: 20,
            phase_p_nodes: 16,
            field_panels: 8,
            volume_times: vec![1.0, 2.0, 4.0, 8.0],
            volume_cells: 48,
            jacobian_samples: 50,
            support_samples: 200,
            char_samples: 64,
            energy_tolerance: 0.05,
            l1_tolerance: 0.02,
            linf_tolerance: 1e-6,
            quadrature_tolerance: 1e-3,
            jacobian_tolerance: 1e-3,
            radiation_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub iteration: IterationSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

fn one() -> usize {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            output_dir: None,
            initial: InitialSpec::default(),
            grid: GridSpec::default(),
            quadrature: QuadratureSpec::default(),
            iteration: IterationSpec::default(),
            diagnostics: DiagnosticsSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.quadrature.validate()?;
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.iteration.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        let d = &self.diagnostics;
        if d.radii.windows(2).any(|w| w[0] >= w[1]) || d.radii.iter().any(|r| *r <= 0.0) {
            return Err(Error::Config("diagnostics radii must be positive and increasing".into()));
        }
        if !(d.fsc_alpha > 0.5) {
            return Err(Error::Config("fsc_alpha must exceed 1/2".into()));
        }
        Ok(())
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        InitialData::with_lattice(
            self.initial.radius,
            self.initial.amplitude,
            self.initial.profile.clone(),
            self.quadrature.delta_lattice,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.initial.profile = Profile::OffsetBump { x_center: [0.2, 0.0, 0.0], p_center: [0.3, 0.1, 0.0], radius: 0.6 };
        cfg.seed = 11;
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 3", "[grid]\nn_z = 4", "[initial]\nprofile = { name = \"cubic-bump\", width = 2 }"] {
            let err = RunConfig::from_toml(text).unwrap_err().to_string();
            assert!(err.contains("unknown"), "{err}");
        }
        for text in [
            "[initial]\nprofile = { name = \"gaussian\" }",
            "[initial]\nprofile = { name = \"cubic-bump\", radius = 2 }",
            "[initial]\nprofile = { name = \"offset-bump\", radius = 0.5 }",
        ] {
            assert!(RunConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn inline_profile() {
        let cfg = RunConfig::from_toml(
            "[initial]\namplitude = 2e-5\nprofile = { name = \"offset-bump\", x_center = [0.1, 0, 0], p_center = [0, 0, 0.2], radius = 0.5 }",
        )
        .unwrap();
        assert!(matches!(cfg.initial.profile, Profile::OffsetBump { radius, .. } if radius == 0.5));
        assert_eq!(cfg.initial_data().unwrap().amplitude, 2e-5);
    }
}
