//! Run configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use fluidplate::profiles::Profile;
use fluidplate::snapshot::SnapshotHeader;
use fluidplate::{BoxGeometry, CoupledState, Coupler, Forcing, ModelParams, PlateVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: BoxGeometry,
    pub physics: Physics,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub numerics: Numerics,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub nu: f64,
    pub mu: f64,
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

/// Constant loads plus optional profile-shaped plate loads, which are
/// added to the constants component by component.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    #[serde(default)]
    pub fluid: [f64; 3],
    #[serde(default)]
    pub plate: [f64; 3],
    #[serde(default)]
    pub plate_profiles: Vec<Profile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_tol_couple")]
    pub tol_couple: f64,
    #[serde(default = "default_tol_linear")]
    pub tol_linear: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    #[serde(default = "default_max_sub")]
    pub max_subiterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub eta: Option<f64>,
    #[serde(default = "default_omegas")]
    pub omegas: Vec<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Absorbing radius; when absent it is `2 E(stationary) + c_probe`.
    pub r0: Option<f64>,
    #[serde(default = "default_c_probe")]
    pub c_probe: f64,
    /// Largest in-plane load treated as small by the probes.
    #[serde(default = "default_in_plane_limit")]
    pub in_plane_limit: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            eta: None,
            omegas: default_omegas(),
            snapshot_stride: default_stride(),
            r0: None,
            c_probe: default_c_probe(),
            in_plane_limit: default_in_plane_limit(),
            output_dir: None,
        }
    }
}

/// Plate displacement and velocity as sums of named profiles, or a saved
/// snapshot. The fluid starts at the Stokes lift of the plate velocity.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub displacement: Vec<Profile>,
    #[serde(default)]
    pub velocity: Vec<Profile>,
    pub snapshot: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Bump amplitudes of the dissipativity initial states.
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    /// Displacement of the second separation trajectory; the initial state
    /// is reused when empty.
    #[serde(default)]
    pub separation_displacement: Vec<Profile>,
    #[serde(default = "default_stride")]
    pub separation_stride: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            amplitudes: default_amplitudes(),
            separation_displacement: Vec::new(),
            separation_stride: default_stride(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_tol_couple() -> f64 {
    1e-8
}
fn default_tol_linear() -> f64 {
    1e-10
}
fn default_picard_tol() -> f64 {
    1e-9
}
fn default_picard_max() -> usize {
    50
}
fn default_max_sub() -> usize {
    200
}
fn default_omegas() -> Vec<f64> {
    vec![0.1, 0.5]
}
fn default_stride() -> usize {
    1
}
fn default_c_probe() -> f64 {
    1.0
}
fn default_in_plane_limit() -> f64 {
    0.01
}
fn default_amplitudes() -> Vec<f64> {
    vec![0.01, 1.0]
}

impl RunConfig {
    /// Parses JSON for `.json` files and TOML otherwise.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.model_params().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.numerics.t_end < 0.0 {
            return Err(CliError::Config("invalid parameter `t_end`: must be nonnegative".into()));
        }
        Ok(cfg)
    }

    pub fn model_params(&self) -> ModelParams {
        let n = &self.numerics;
        let mut p = ModelParams::new(self.geometry, self.physics.nu, self.physics.mu, n.dt);
        p.tol_couple = n.tol_couple;
        p.tol_linear = n.tol_linear;
        p.picard_tol = n.picard_tol;
        p.picard_max = n.picard_max;
        p.max_subiterations = n.max_subiterations;
        p.nonlinear = self.physics.nonlinear;
        p
    }

    pub fn forcing(&self, c: &Coupler) -> Forcing {
        let mut f = Forcing::uniform(&c.fluid_grid, &c.plate_grid, self.forcing.fluid, self.forcing.plate);
        for p in &self.forcing.plate_profiles {
            f.plate.axpy(1.0, &p.sample(&c.plate_grid));
        }
        f
    }

    /// Largest in-plane load component.
    pub fn in_plane_load(&self, f: &Forcing) -> f64 {
        f.plate.x.iter().chain(f.plate.y.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn initial_state(&self, c: &Coupler) -> Result<(CoupledState, Option<SnapshotHeader>), CliError> {
        if let Some(path) = &self.initial.snapshot {
            let (header, state) = fluidplate::snapshot::load(path)?;
            if header.geometry != self.geometry {
                return Err(CliError::Config(format!(
                    "initial.snapshot: geometry {:?} differs from the configured {:?}",
                    header.geometry, self.geometry
                )));
            }
            return Ok((state, Some(header)));
        }
        Ok((self.state_from(c, &self.initial.displacement)?, None))
    }

    pub fn state_from(&self, c: &Coupler, displacement: &[Profile]) -> Result<CoupledState, CliError> {
        let u0 = sum(c, displacement);
        let u1 = sum(c, &self.initial.velocity);
        Ok(c.make_initial_state(None, &u0, &u1)?)
    }

    pub fn steps(&self) -> usize {
        (self.numerics.t_end / self.numerics.dt).round() as usize
    }
}

fn sum(c: &Coupler, profiles: &[Profile]) -> PlateVector {
    let mut out = PlateVector::zeros(&c.plate_grid);
    for p in profiles {
        out.axpy(1.0, &p.sample(&c.plate_grid));
    }
    out
}
