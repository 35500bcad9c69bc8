//! Command-level integration tests: file round-trips, exit codes, and
//! the documented behaviors of each subcommand.

use std::path::PathBuf;
use std::process::Command;

use dls_cli::commands::{cmd_check, cmd_plan, cmd_simulate, cmd_sweep, CliOverrides};
use dls_cli::files::{
    load_scenario, to_canonical_json, write_atomic, GraspFile, Labels, PoseDeg, ScenarioFile,
    ScenarioSection, SolverOverrides, SuiteFile, SuiteGrasp,
};
use dls_core::contact_sim::ContactMode;
use dls_core::frames::Twist;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dls-cli-test-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn pose(x: f64, y: f64, theta_deg: f64) -> PoseDeg {
    PoseDeg { x, y, theta_deg }
}

fn scenario_file(incline_deg: f64, squeeze: f64, goal: PoseDeg) -> ScenarioFile {
    ScenarioFile {
        schema_version: 1,
        labels: Labels {
            object: "test".into(),
            path: "test".into(),
        },
        scenario: ScenarioSection {
            start_left: pose(0.0, 0.0, 0.0),
            start_right: pose(0.0, 0.0, 0.0),
            goal_left: goal,
            goal_right: goal,
            waypoints: vec![],
            grasp: GraspFile {
                mass_kg: 0.5,
                gravity: 9.81,
                incline_deg,
                downhill_deg: -90.0,
                squeeze_force_n: squeeze,
                mu_static_palm: 0.5,
                mu_moving_palm: 0.5,
                radius_static_palm_m: 0.05,
                radius_moving_palm_m: 0.05,
                palm_radius_m: 0.10,
                pressure_constant: 0.6,
            },
        },
        solver: SolverOverrides::default(),
    }
}

#[test]
fn shipped_scenario_round_trips_byte_identically() {
    for name in ["slide_45.json", "desk_suite.json"] {
        let path = scenarios_dir().join(name);
        let original = std::fs::read_to_string(&path).unwrap();
        let reserialized = if name.contains("suite") {
            to_canonical_json(&serde_json::from_str::<SuiteFile>(&original).unwrap())
        } else {
            to_canonical_json(&serde_json::from_str::<ScenarioFile>(&original).unwrap())
        };
        assert_eq!(original, reserialized, "{name} did not round-trip");
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = temp_dir("unknown-field");
    let path = dir.join("bad.json");
    let mut text = to_canonical_json(&scenario_file(20.0, 10.0, pose(0.01, 0.0, 0.0)));
    text = text.replace("\"schema_version\": 1,", "\"schema_version\": 1,\n  \"surprise\": 3,");
    std::fs::write(&path, text).unwrap();
    let err = load_scenario(&path).unwrap_err();
    assert!(err.to_string().contains("surprise"), "got: {err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn wrong_schema_version_is_rejected() {
    let dir = temp_dir("schema-version");
    let path = dir.join("v9.json");
    let mut file = scenario_file(20.0, 10.0, pose(0.01, 0.0, 0.0));
    file.schema_version = 9;
    write_atomic(&path, &to_canonical_json(&file)).unwrap();
    let err = load_scenario(&path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn check_reports_all_stick_for_zero_twist() {
    let dir = temp_dir("check-zero");
    let path = dir.join("s.json");
    write_atomic(
        &path,
        &to_canonical_json(&scenario_file(20.0, 10.0, pose(0.01, 0.0, 0.0))),
    )
    .unwrap();
    let report = cmd_check(&path, Twist::zero()).unwrap();
    assert!(report.verdict.is_none());
    assert!(report.margins.is_empty());
    assert!(format!("{report}").contains("all-stick"));
}

#[test]
fn check_horizontal_grasp_is_slippage_free() {
    let dir = temp_dir("check-horizontal");
    let path = dir.join("s.json");
    write_atomic(
        &path,
        &to_canonical_json(&scenario_file(0.0, 10.0, pose(0.01, 0.0, 0.0))),
    )
    .unwrap();
    let report = cmd_check(&path, Twist::new(0.003, -0.001, 0.02)).unwrap();
    assert_eq!(report.verdict, Some(ContactMode::StickMovingSlideStatic));
    // Defined margins are negative, up to two exact boundary cases: the
    // downhill fallback is zero without tangential gravity, and the
    // normalized leading coefficient is zero for matched patches.
    for line in &report.margins {
        if let Some(v) = line.value {
            if line.name.starts_with("fallback") || line.name.starts_with("leading-coeff") {
                assert!(v <= 0.0, "{} = {v}", line.name);
            } else {
                assert!(v < 0.0, "{} = {v}", line.name);
            }
        }
    }
}

#[test]
fn check_steep_uphill_twist_slips() {
    let report = cmd_check(
        &scenarios_dir().join("slide_45.json"),
        Twist::new(0.0, 0.01, 0.0),
    )
    .unwrap();
    assert_eq!(report.verdict, Some(ContactMode::SlipAtMoving));
    assert!(report
        .margins
        .iter()
        .any(|m| m.value.map(|v| v > 0.0).unwrap_or(false)));
}

#[test]
fn simulate_zero_length_plan_echoes_initial_errors() {
    let dir = temp_dir("simulate-empty");
    let scenario_path = dir.join("s.json");
    write_atomic(
        &scenario_path,
        &to_canonical_json(&scenario_file(20.0, 10.0, pose(0.012, 0.0, 0.0))),
    )
    .unwrap();
    let plan_path = dir.join("plan.csv");
    std::fs::write(
        &plan_path,
        "t,phase,vx,vy,omega,margin,left_x,left_y,left_theta,right_x,right_y,right_theta\n",
    )
    .unwrap();
    let outcome = cmd_simulate(&plan_path, &scenario_path, &dir.join("out")).unwrap();
    assert_eq!(outcome.rollout.slip_events, 0);
    // Goal is 12 mm away and nothing moves.
    assert!((outcome.rollout.final_error_left.0 - 0.012).abs() < 1e-12);
}

#[test]
fn simulate_rejects_phase_mismatch() {
    let dir = temp_dir("simulate-phase");
    let scenario_path = dir.join("s.json");
    write_atomic(
        &scenario_path,
        &to_canonical_json(&scenario_file(20.0, 10.0, pose(0.01, 0.0, 0.0))),
    )
    .unwrap();
    let plan_path = dir.join("plan.csv");
    std::fs::write(
        &plan_path,
        "t,phase,vx,vy,omega,margin,left_x,left_y,left_theta,right_x,right_y,right_theta\n\
         0,right,0.001,0,0,,0,0,0,0.001,0,0\n",
    )
    .unwrap();
    let err = cmd_simulate(&plan_path, &scenario_path, &dir.join("out")).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn planned_output_replays_slip_free_and_baseline_slips_at_45() {
    let dir = temp_dir("plan-simulate");
    let out = dir.join("out");
    let outcome = cmd_plan(
        &scenarios_dir().join("slide_45.json"),
        &out,
        &CliOverrides::default(),
    )
    .unwrap();
    assert!(outcome.plan.converged);

    // Replaying our own plan through the oracle is slip-free and exact.
    let sim = cmd_simulate(
        &out.join("plan.csv"),
        &scenarios_dir().join("slide_45.json"),
        &dir.join("sim-ours"),
    )
    .unwrap();
    assert_eq!(sim.rollout.slip_events, 0);
    assert!(sim.rollout.final_error_left.0 <= 1e-6);
    assert!(sim.rollout.final_error_right.0 <= 1e-6);

    // The straight-line baseline loses sticking contact at 45 degrees.
    let sim = cmd_simulate(
        &out.join("baseline.csv"),
        &scenarios_dir().join("slide_45.json"),
        &dir.join("sim-base"),
    )
    .unwrap();
    assert!(sim.rollout.slip_events >= 1);

    // Output files exist and the SVG includes both palm panels.
    let svg = std::fs::read_to_string(out.join("trajectory.svg")).unwrap();
    assert!(svg.contains("left palm frame") || svg.contains("object in left palm frame"));
    assert!(svg.contains("polyline"));
}

#[test]
fn sweep_trivial_cell_yields_zero_errors() {
    let dir = temp_dir("sweep-trivial");
    let suite_path = dir.join("suite.json");
    let suite = SuiteFile {
        schema_version: 1,
        label: "trivial".into(),
        inclines_deg: vec![20.0],
        objects: vec![dls_cli::files::ObjectSpec {
            label: "disc".into(),
            patch_radius_m: 0.05,
        }],
        paths: vec![dls_cli::files::PathSpec {
            label: "stay".into(),
            waypoints: vec![dls_cli::files::WaypointPair {
                left: pose(0.0, 0.0, 0.0),
                right: pose(0.0, 0.0, 0.0),
            }],
        }],
        grasp: SuiteGrasp {
            mass_kg: 0.5,
            gravity: 9.81,
            downhill_deg: -90.0,
            squeeze_force_n: 10.0,
            mu_static_palm: 0.5,
            mu_moving_palm: 0.5,
            palm_radius_m: 0.1,
            pressure_constant: 0.6,
        },
        solver: SolverOverrides {
            horizon_n: Some(4),
            ..Default::default()
        },
    };
    write_atomic(&suite_path, &to_canonical_json(&suite)).unwrap();
    let outcome = cmd_sweep(&suite_path, &dir.join("out"), &CliOverrides::default()).unwrap();
    use dls_cli::table::Side;
    for side in [Side::Top, Side::Bottom] {
        let row = outcome.table.get("disc", "ours", side).unwrap();
        assert_eq!(row.rmse_mm, 0.0);
        assert_eq!(row.rmse_deg, 0.0);
    }
}

#[test]
fn sweep_empty_suite_succeeds_with_empty_table() {
    let dir = temp_dir("sweep-empty");
    let suite_path = dir.join("suite.json");
    let suite = SuiteFile {
        schema_version: 1,
        label: "empty".into(),
        inclines_deg: vec![],
        objects: vec![],
        paths: vec![],
        grasp: SuiteGrasp {
            mass_kg: 0.5,
            gravity: 9.81,
            downhill_deg: -90.0,
            squeeze_force_n: 10.0,
            mu_static_palm: 0.5,
            mu_moving_palm: 0.5,
            palm_radius_m: 0.1,
            pressure_constant: 0.6,
        },
        solver: SolverOverrides::default(),
    };
    write_atomic(&suite_path, &to_canonical_json(&suite)).unwrap();
    let outcome = cmd_sweep(&suite_path, &dir.join("out"), &CliOverrides::default()).unwrap();
    assert!(outcome.table.rows.is_empty());
    assert!(outcome.cells.is_empty());
    assert!(dir.join("out/results.csv").exists());
}

// ---------------------------------------------------------------------
// exit codes through the real binary

fn dls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dls"))
}

#[test]
fn exit_code_zero_on_success() {
    let status = dls()
        .args([
            "check",
            "--scenario",
            scenarios_dir().join("slide_45.json").to_str().unwrap(),
            "--vx",
            "0.003",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("verdict"));
}

#[test]
fn exit_code_two_on_parse_error() {
    let dir = temp_dir("exit-parse");
    let path = dir.join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let status = dls()
        .args(["check", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn exit_code_three_on_non_convergence() {
    // A 5 cm climb at 45 degrees cannot fit in a 4-step horizon.
    let dir = temp_dir("exit-solver");
    let path = dir.join("s.json");
    write_atomic(
        &path,
        &to_canonical_json(&scenario_file(45.0, 10.0, pose(0.0, 0.05, 0.0))),
    )
    .unwrap();
    let status = dls()
        .args([
            "plan",
            "--scenario",
            path.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
            "--horizon",
            "4",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
    // Outputs are still written with the best iterate.
    assert!(dir.join("out/plan.csv").exists());
    let summary = std::fs::read_to_string(dir.join("out/summary.txt")).unwrap();
    assert!(summary.contains("converged=false"));
}

#[test]
fn exit_code_four_on_oracle_failure() {
    // Gravity exceeds the combined friction capacity, so no quasi-static
    // balance exists once the contact slips.
    let dir = temp_dir("exit-oracle");
    let scenario_path = dir.join("s.json");
    let mut file = scenario_file(45.0, 1.0, pose(0.0, 0.01, 0.0));
    file.scenario.grasp.mass_kg = 2.0;
    file.scenario.grasp.mu_static_palm = 0.1;
    file.scenario.grasp.mu_moving_palm = 0.1;
    write_atomic(&scenario_path, &to_canonical_json(&file)).unwrap();
    let plan_path = dir.join("plan.csv");
    std::fs::write(
        &plan_path,
        "t,phase,vx,vy,omega,margin,left_x,left_y,left_theta,right_x,right_y,right_theta\n\
         0,left,0.0,0.005,0,,0,0,0,0,0.005,0\n",
    )
    .unwrap();
    let status = dls()
        .args([
            "simulate",
            "--plan",
            plan_path.to_str().unwrap(),
            "--scenario",
            scenario_path.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        status.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}
