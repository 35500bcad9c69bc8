//! JSON file formats (schema version 1) and their conversion to the
//! internal types.
//!
//! File units are human-facing: meters, kilograms, newtons, and degrees.
//! Angles are converted to radians at this parse boundary and nowhere
//! else. Parsing is strict: unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dls_core::contact_sim::GraspConfig;
use dls_core::frames::PlanarPose;
use dls_core::planner::{Scenario, SolverConfig};

use crate::CmdError;

pub const SCHEMA_VERSION: u32 = 1;

/// A planar pose with the angle in degrees.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDeg {
    /// [m]
    pub x: f64,
    /// [m]
    pub y: f64,
    /// [deg]
    pub theta_deg: f64,
}

impl PoseDeg {
    pub fn to_pose(self) -> PlanarPose {
        PlanarPose::new(self.x, self.y, self.theta_deg.to_radians())
    }

    pub fn from_pose(p: &PlanarPose) -> Self {
        Self {
            x: p.x,
            y: p.y,
            theta_deg: p.theta.to_degrees(),
        }
    }
}

/// One (left, right) goal pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointPair {
    pub left: PoseDeg,
    pub right: PoseDeg,
}

/// Grasp physics in file units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspFile {
    /// Object mass [kg].
    pub mass_kg: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Grasp incline from horizontal [deg].
    pub incline_deg: f64,
    /// In-plane downhill direction in the contact frame [deg].
    pub downhill_deg: f64,
    /// Squeeze force [N].
    pub squeeze_force_n: f64,
    pub mu_static_palm: f64,
    pub mu_moving_palm: f64,
    /// Contact patch radius at the static palm [m].
    pub radius_static_palm_m: f64,
    /// Contact patch radius at the moving palm [m].
    pub radius_moving_palm_m: f64,
    /// Palm workspace disc radius [m].
    pub palm_radius_m: f64,
    /// Pressure distribution constant, in (0, 1].
    pub pressure_constant: f64,
}

impl GraspFile {
    pub fn to_config(&self) -> GraspConfig {
        GraspConfig {
            mass: self.mass_kg,
            gravity: self.gravity,
            incline_phi: self.incline_deg.to_radians(),
            downhill_alpha: self.downhill_deg.to_radians(),
            squeeze_force: self.squeeze_force_n,
            mu_static_palm: self.mu_static_palm,
            mu_moving_palm: self.mu_moving_palm,
            radius_static_palm: self.radius_static_palm_m,
            radius_moving_palm: self.radius_moving_palm_m,
            palm_radius: self.palm_radius_m,
            pressure_constant: self.pressure_constant,
        }
    }
}

/// Optional solver overrides; unset fields keep their defaults.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slip_margin_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_trans_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_rot_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_inner_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_stationarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_constraint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_terminal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_growth: Option<f64>,
}

impl SolverOverrides {
    pub fn is_empty(&self) -> bool {
        serde_json::to_value(self)
            .map(|v| v.as_object().map(|o| o.is_empty()).unwrap_or(true))
            .unwrap_or(true)
    }

    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.horizon_n {
            cfg.horizon_n = v;
        }
        if let Some(v) = self.slip_margin_eps {
            cfg.slip_margin_eps = v;
        }
        if let Some(v) = self.max_step_trans_m {
            cfg.max_step_trans = v;
        }
        if let Some(v) = self.max_step_rot_deg {
            cfg.max_step_rot = v.to_radians();
        }
        if let Some(v) = self.max_outer_iters {
            cfg.max_outer_iters = v;
        }
        if let Some(v) = self.max_inner_iters {
            cfg.max_inner_iters = v;
        }
        if let Some(v) = self.tol_stationarity {
            cfg.tol_stationarity = v;
        }
        if let Some(v) = self.tol_constraint {
            cfg.tol_constraint = v;
        }
        if let Some(v) = self.tol_terminal {
            cfg.tol_terminal = v;
        }
        if let Some(v) = self.penalty_init {
            cfg.penalty_init = v;
        }
        if let Some(v) = self.penalty_growth {
            cfg.penalty_growth = v;
        }
    }
}

/// Free-form tags carried through to reports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(default)]
    pub object: String,
    #[serde(default)]
    pub path: String,
}

/// The scenario proper, in file units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub start_left: PoseDeg,
    pub start_right: PoseDeg,
    pub goal_left: PoseDeg,
    pub goal_right: PoseDeg,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<WaypointPair>,
    pub grasp: GraspFile,
}

/// Top-level scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub labels: Labels,
    pub scenario: ScenarioSection,
    #[serde(default, skip_serializing_if = "SolverOverrides::is_empty")]
    pub solver: SolverOverrides,
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Scenario {
        let s = &self.scenario;
        Scenario {
            start_left: s.start_left.to_pose(),
            start_right: s.start_right.to_pose(),
            goal_left: s.goal_left.to_pose(),
            goal_right: s.goal_right.to_pose(),
            grasp: s.grasp.to_config(),
            waypoints: s
                .waypoints
                .iter()
                .map(|w| (w.left.to_pose(), w.right.to_pose()))
                .collect(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        self.solver.apply(&mut cfg);
        cfg
    }
}

/// One object geometry in a sweep (contact patch radius on both palms).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub label: String,
    pub patch_radius_m: f64,
}

/// One goal-pose path in a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub label: String,
    pub waypoints: Vec<WaypointPair>,
}

/// Grasp physics shared by all sweep cells (incline and patch radii come
/// from the cell coordinates).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteGrasp {
    pub mass_kg: f64,
    pub gravity: f64,
    pub downhill_deg: f64,
    pub squeeze_force_n: f64,
    pub mu_static_palm: f64,
    pub mu_moving_palm: f64,
    pub palm_radius_m: f64,
    pub pressure_constant: f64,
}

/// Top-level sweep suite: scenarios = objects x paths x inclines.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub schema_version: u32,
    pub label: String,
    pub inclines_deg: Vec<f64>,
    pub objects: Vec<ObjectSpec>,
    pub paths: Vec<PathSpec>,
    pub grasp: SuiteGrasp,
    #[serde(default, skip_serializing_if = "SolverOverrides::is_empty")]
    pub solver: SolverOverrides,
}

/// One expanded sweep cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub object: String,
    pub path: String,
    pub incline_deg: f64,
    pub scenario: Scenario,
    pub solver: SolverConfig,
}

impl SuiteFile {
    /// Expand the object x path x incline grid into scenarios.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for object in &self.objects {
            for path in &self.paths {
                for &incline_deg in &self.inclines_deg {
                    let grasp = GraspConfig {
                        mass: self.grasp.mass_kg,
                        gravity: self.grasp.gravity,
                        incline_phi: incline_deg.to_radians(),
                        downhill_alpha: self.grasp.downhill_deg.to_radians(),
                        squeeze_force: self.grasp.squeeze_force_n,
                        mu_static_palm: self.grasp.mu_static_palm,
                        mu_moving_palm: self.grasp.mu_moving_palm,
                        radius_static_palm: object.patch_radius_m,
                        radius_moving_palm: object.patch_radius_m,
                        palm_radius: self.grasp.palm_radius_m,
                        pressure_constant: self.grasp.pressure_constant,
                    };
                    let waypoints: Vec<_> = path
                        .waypoints
                        .iter()
                        .map(|w| (w.left.to_pose(), w.right.to_pose()))
                        .collect();
                    let (goal_left, goal_right) =
                        *waypoints.last().expect("paths must have waypoints");
                    let mut solver = SolverConfig::default();
                    self.solver.apply(&mut solver);
                    cells.push(Cell {
                        object: object.label.clone(),
                        path: path.label.clone(),
                        incline_deg,
                        scenario: Scenario {
                            start_left: PlanarPose::identity(),
                            start_right: PlanarPose::identity(),
                            goal_left,
                            goal_right,
                            grasp,
                            waypoints,
                        },
                        solver,
                    });
                }
            }
        }
        cells
    }
}

fn check_version(version: u32, path: &Path) -> Result<(), CmdError> {
    if version != SCHEMA_VERSION {
        return Err(CmdError::Parse(format!(
            "{}: schema_version {} unsupported (expected {})",
            path.display(),
            version,
            SCHEMA_VERSION
        )));
    }
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    check_version(file.schema_version, path)?;
    Ok(file)
}

pub fn load_suite(path: &Path) -> Result<SuiteFile, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    let file: SuiteFile = serde_json::from_str(&text)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    check_version(file.schema_version, path)?;
    Ok(file)
}

/// Canonical serialization: pretty-printed JSON in struct field order
/// with a trailing newline. Files written this way round-trip
/// byte-identically through parse and re-serialize.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Write a file atomically (temp file in the same directory + rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CmdError> {
    let mut name = path
        .file_name()
        .ok_or_else(|| CmdError::Io(format!("{}: no file name", path.display())))?
        .to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
