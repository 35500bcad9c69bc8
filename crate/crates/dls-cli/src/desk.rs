//! The canonical desk-scale suite shipped with the repository: three
//! goal-pose paths, three grasp inclines, two object geometries.
//!
//! The paths are sized so that the whole suite is reachable under the
//! per-step caps, while the straight-line baseline loses sticking contact
//! at the 45 degree incline on every path (the uphill component of each
//! straight segment exceeds what the moving contact can hold there).
//! Right-palm goals mirror the left-palm goals about the downhill axis,
//! matching the mirrored contact frames.

use crate::files::{
    GraspFile, Labels, ObjectSpec, PathSpec, PoseDeg, ScenarioFile, ScenarioSection,
    SolverOverrides, SuiteFile, SuiteGrasp, WaypointPair, SCHEMA_VERSION,
};

fn pose(x: f64, y: f64, theta_deg: f64) -> PoseDeg {
    PoseDeg { x, y, theta_deg }
}

/// Mirror a left-palm goal into the right palm's frame (reflection about
/// the downhill axis, which is -y here, so x and theta flip). Adding 0.0
/// keeps negated zeros out of the emitted files.
fn mirrored(left: PoseDeg) -> PoseDeg {
    PoseDeg {
        x: -left.x + 0.0,
        y: left.y,
        theta_deg: -left.theta_deg + 0.0,
    }
}

fn pair(left: PoseDeg) -> WaypointPair {
    WaypointPair {
        left,
        right: mirrored(left),
    }
}

/// Three waypoints per path, expressed as cumulative goals.
fn desk_paths() -> Vec<PathSpec> {
    vec![
        // Translation with a consistent uphill component.
        PathSpec {
            label: "slide".to_string(),
            waypoints: vec![
                pair(pose(0.009, 0.0035, 0.0)),
                pair(pose(0.018, 0.007, 0.0)),
                pair(pose(0.027, 0.0105, 0.0)),
            ],
        },
        // Climb once, then rotate in place at the offset position.
        PathSpec {
            label: "pivot".to_string(),
            waypoints: vec![
                pair(pose(0.0, 0.008, 5.0)),
                pair(pose(0.0, 0.008, 10.0)),
                pair(pose(0.0, 0.008, 15.0)),
            ],
        },
        // Combined translation and rotation.
        PathSpec {
            label: "mixed".to_string(),
            waypoints: vec![
                pair(pose(0.006, 0.008, 3.0)),
                pair(pose(0.012, 0.016, 6.0)),
                pair(pose(0.018, 0.024, 9.0)),
            ],
        },
    ]
}

/// The full desk suite: 3 paths x 3 inclines x 2 objects = 18 cells.
pub fn desk_suite() -> SuiteFile {
    SuiteFile {
        schema_version: SCHEMA_VERSION,
        label: "desk".to_string(),
        inclines_deg: vec![20.0, 30.0, 45.0],
        objects: vec![
            ObjectSpec {
                label: "circle".to_string(),
                patch_radius_m: 0.05,
            },
            ObjectSpec {
                label: "square".to_string(),
                patch_radius_m: 0.045,
            },
        ],
        paths: desk_paths(),
        grasp: SuiteGrasp {
            mass_kg: 0.5,
            gravity: 9.81,
            downhill_deg: -90.0,
            squeeze_force_n: 10.0,
            mu_static_palm: 0.5,
            mu_moving_palm: 0.5,
            palm_radius_m: 0.10,
            pressure_constant: 0.6,
        },
        solver: SolverOverrides {
            horizon_n: Some(16),
            ..Default::default()
        },
    }
}

/// A single self-contained scenario: the slide path's first waypoint at
/// the steepest incline. Useful for `dls check|plan|simulate` examples.
pub fn example_scenario() -> ScenarioFile {
    let suite = desk_suite();
    let waypoints = desk_paths()[0].waypoints.clone();
    let last = waypoints.last().copied().expect("non-empty path");
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        labels: Labels {
            object: "circle".to_string(),
            path: "slide".to_string(),
        },
        scenario: ScenarioSection {
            start_left: pose(0.0, 0.0, 0.0),
            start_right: pose(0.0, 0.0, 0.0),
            goal_left: last.left,
            goal_right: last.right,
            waypoints,
            grasp: GraspFile {
                mass_kg: suite.grasp.mass_kg,
                gravity: suite.grasp.gravity,
                incline_deg: 45.0,
                downhill_deg: suite.grasp.downhill_deg,
                squeeze_force_n: suite.grasp.squeeze_force_n,
                mu_static_palm: suite.grasp.mu_static_palm,
                mu_moving_palm: suite.grasp.mu_moving_palm,
                radius_static_palm_m: 0.05,
                radius_moving_palm_m: 0.05,
                palm_radius_m: suite.grasp.palm_radius_m,
                pressure_constant: suite.grasp.pressure_constant,
            },
        },
        solver: SolverOverrides {
            horizon_n: Some(16),
            ..Default::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::files::to_canonical_json;
    use std::path::PathBuf;

    fn scenarios_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
    }

    /// Run with `cargo test -p dls-cli regenerate -- --ignored` after
    /// editing the suite definition.
    #[test]
    #[ignore]
    fn regenerate_canonical_files() {
        let dir = scenarios_dir();
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("desk_suite.json"), to_canonical_json(&desk_suite())).unwrap();
        std::fs::write(
            dir.join("slide_45.json"),
            to_canonical_json(&example_scenario()),
        )
        .unwrap();
    }

    #[test]
    fn shipped_files_are_current() {
        let dir = scenarios_dir();
        let suite = std::fs::read_to_string(dir.join("desk_suite.json")).unwrap();
        assert_eq!(suite, to_canonical_json(&desk_suite()));
        let scenario = std::fs::read_to_string(dir.join("slide_45.json")).unwrap();
        assert_eq!(scenario, to_canonical_json(&example_scenario()));
    }

    #[test]
    fn desk_suite_expands_to_eighteen_cells() {
        let cells = desk_suite().cells();
        assert_eq!(cells.len(), 18);
        for cell in &cells {
            cell.scenario.validate().unwrap();
            assert_eq!(cell.scenario.waypoint_sequence().len(), 3);
        }
    }
}
