//! The four subcommands. Each is a plain function returning typed
//! results so the integration tests can drive them in-process; `main`
//! maps errors to exit codes.

use std::path::Path;

use dls_core::contact_sim::{check_mode, rollout, ContactMode, RolloutResult};
use dls_core::frames::{PlanarPose, Twist};
use dls_core::limit_surface::{
    decomposed_margins, leading_coeff_margin, leading_coeff_margin_inverse_mid,
    nonconvex_fallback_margin, slip_free_twist_margin, slip_free_wrench_margin, soc_constant,
    soc_equal_radius_margin, twist_to_wrench,
};
use dls_core::planner::{
    baseline_plan, evaluate_plan, plan, Phase, Plan, PlanMetrics, Scenario, SolverConfig,
};
use dls_core::Error as CoreError;
use rayon::prelude::*;

use crate::files::{load_scenario, load_suite, write_atomic, Cell, Labels};
use crate::svg::{trajectory_svg, Series};
use crate::table::{ResultsTable, Side, TableBuilder};
use crate::CmdError;

/// Command-line overrides applied on top of file-level solver settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub margin_eps: Option<f64>,
    pub horizon: Option<usize>,
}

impl CliOverrides {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(eps) = self.margin_eps {
            cfg.slip_margin_eps = eps;
        }
        if let Some(h) = self.horizon {
            cfg.horizon_n = h;
        }
    }
}

fn core_to_cmd(e: CoreError) -> CmdError {
    match e {
        CoreError::SlipSolverFailure { .. } => CmdError::Oracle(e.to_string()),
        CoreError::PhaseMismatch { .. } => CmdError::Parse(e.to_string()),
        other => CmdError::Parse(other.to_string()),
    }
}

// ---------------------------------------------------------------------
// check

/// One labelled margin line in the check report.
#[derive(Debug, Clone)]
pub struct MarginLine {
    pub name: &'static str,
    pub value: Option<f64>,
    pub note: String,
}

/// Everything `dls check` prints, in structured form.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub labels: Labels,
    pub incline_deg: f64,
    pub normal_static: f64,
    pub normal_moving: f64,
    pub twist: Twist,
    pub margins: Vec<MarginLine>,
    pub verdict: Option<ContactMode>,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "scenario: object '{}' path '{}'",
            self.labels.object, self.labels.path
        )?;
        writeln!(
            f,
            "grasp: incline {:.2} deg, N_static {:.4} N, N_moving {:.4} N",
            self.incline_deg, self.normal_static, self.normal_moving
        )?;
        writeln!(
            f,
            "twist (contact frame): vx {:+.6} m, vy {:+.6} m, omega {:+.4} deg",
            self.twist.vx,
            self.twist.vy,
            self.twist.omega.to_degrees()
        )?;
        if self.margins.is_empty() {
            writeln!(f, "margins: undefined at zero twist")?;
        } else {
            writeln!(f, "margins (negative = slippage-free):")?;
            for m in &self.margins {
                match m.value {
                    Some(v) => writeln!(f, "  {:<28} {v:+.6e}  {}", m.name, m.note)?,
                    None => writeln!(f, "  {:<28} {:>13}  {}", m.name, "n/a", m.note)?,
                }
            }
        }
        match self.verdict {
            Some(mode) => writeln!(f, "verdict: {mode}"),
            None => writeln!(f, "verdict: all-stick (no commanded motion)"),
        }
    }
}

/// Evaluate every constraint margin for one twist, plus the oracle's
/// mode decision. The twist is interpreted directly in the contact frame
/// that `downhill_deg` lives in.
pub fn cmd_check(scenario_path: &Path, twist: Twist) -> Result<CheckReport, CmdError> {
    let file = load_scenario(scenario_path)?;
    let scenario = file.to_scenario();
    scenario.validate().map_err(core_to_cmd)?;
    let grasp = scenario.grasp;
    let surfaces = grasp.surfaces().map_err(core_to_cmd)?;

    let mut report = CheckReport {
        labels: file.labels.clone(),
        incline_deg: grasp.incline_phi.to_degrees(),
        normal_static: surfaces.normal_static,
        normal_moving: surfaces.normal_moving,
        twist,
        margins: Vec::new(),
        verdict: None,
    };

    if twist.is_zero() {
        return Ok(report);
    }

    let gl = surfaces.gravity;
    let a = surfaces.a;
    let b = surfaces.b;

    let w_a = twist_to_wrench(&a, &twist).map_err(core_to_cmd)?;
    report.margins.push(MarginLine {
        name: "wrench-space",
        value: Some(slip_free_wrench_margin(&w_a, &a, &b, &gl).value),
        note: format!(
            "at w_a = ({:+.4}, {:+.4}, {:+.5}) N/Nm",
            w_a.fx, w_a.fy, w_a.mz
        ),
    });
    report.margins.push(MarginLine {
        name: "twist-full",
        value: Some(slip_free_twist_margin(&twist, &a, &b, &gl).map_err(core_to_cmd)?.value),
        note: String::new(),
    });

    let a_hat = a.scaled(surfaces.normal_static * surfaces.normal_static).map_err(core_to_cmd)?;
    let b_hat = b.scaled(surfaces.normal_moving * surfaces.normal_moving).map_err(core_to_cmd)?;
    report.margins.push(MarginLine {
        name: "leading-coeff",
        value: Some(leading_coeff_margin(&twist, &a_hat, &b_hat).map_err(core_to_cmd)?.value),
        note: "high-load limit".to_string(),
    });
    report.margins.push(MarginLine {
        name: "leading-coeff (inverse mid)",
        value: Some(
            leading_coeff_margin_inverse_mid(&twist, &a_hat, &b_hat)
                .map_err(core_to_cmd)?
                .value,
        ),
        note: "diagnostic variant".to_string(),
    });

    let constant = soc_constant(&a, surfaces.c_ratio, &gl);
    let soc_note = if surfaces.matched_patches {
        if constant > 0.0 {
            format!("constant {constant:+.4} (convex cone)")
        } else {
            format!("constant {constant:+.4} (nonconvex regime)")
        }
    } else {
        format!("constant {constant:+.4}; patches differ, see decomposed")
    };
    report.margins.push(MarginLine {
        name: "soc-equal-radius",
        value: Some(
            soc_equal_radius_margin(&twist, &a, surfaces.c_ratio, &gl)
                .map_err(core_to_cmd)?
                .value,
        ),
        note: soc_note,
    });
    report.margins.push(MarginLine {
        name: "fallback (downhill)",
        value: Some(nonconvex_fallback_margin(&twist, &gl).value),
        note: if constant < 0.0 {
            "sufficient when the SOC constant is negative".to_string()
        } else {
            "informational; SOC constant is nonnegative".to_string()
        },
    });

    match decomposed_margins(&twist, &a, &b, &gl) {
        Ok((quad, soc)) => {
            report.margins.push(MarginLine {
                name: "decomposed-quadratic",
                value: Some(quad.value),
                note: String::new(),
            });
            report.margins.push(MarginLine {
                name: "decomposed-soc",
                value: Some(soc.value),
                note: String::new(),
            });
        }
        Err(CoreError::ZeroTangentialGravity) => {
            report.margins.push(MarginLine {
                name: "decomposed-quadratic",
                value: Some(
                    slip_free_twist_margin(&twist, &a, &b, &gl)
                        .map_err(core_to_cmd)?
                        .value,
                ),
                note: "equals twist-full for a horizontal grasp".to_string(),
            });
            report.margins.push(MarginLine {
                name: "decomposed-soc",
                value: None,
                note: "undefined for a horizontal grasp (g_f = 0)".to_string(),
            });
        }
        Err(e) => return Err(core_to_cmd(e)),
    }

    let (mode, _, _) = check_mode(&twist, &grasp).map_err(core_to_cmd)?;
    report.verdict = Some(mode);
    Ok(report)
}

// ---------------------------------------------------------------------
// plan

/// Outputs of `dls plan`.
pub struct PlanOutcome {
    pub scenario: Scenario,
    pub labels: Labels,
    pub plan: Plan,
    pub baseline: Plan,
}

fn plan_csv(plan: &Plan) -> String {
    let mut out = String::from(
        "t,phase,vx,vy,omega,margin,left_x,left_y,left_theta,right_x,right_y,right_theta\n",
    );
    for (t, v) in plan.twists.iter().enumerate() {
        let s = &plan.predicted_states[t + 1];
        let margin = match plan.margins.get(t).copied().flatten() {
            Some(m) => format!("{m}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{t},{},{},{},{},{margin},{},{},{},{},{},{}\n",
            plan.phases[t].name(),
            v.vx,
            v.vy,
            v.omega,
            s.pose_obj_in_left.x,
            s.pose_obj_in_left.y,
            s.pose_obj_in_left.theta,
            s.pose_obj_in_right.x,
            s.pose_obj_in_right.y,
            s.pose_obj_in_right.theta,
        ));
    }
    out
}

fn plan_summary(plan: &Plan) -> String {
    let worst = plan
        .margins
        .iter()
        .flatten()
        .cloned()
        .fold(None::<f64>, |acc, m| Some(acc.map_or(m, |a| a.max(m))));
    format!(
        "objective={:.6e} converged={} steps={} legs={} outer_iters={} inner_iters={} \
         attempts={} worst_margin={}\n",
        plan.objective_value,
        plan.converged,
        plan.twists.len(),
        plan.marks.len(),
        plan.stats.outer_iters,
        plan.stats.inner_iters,
        plan.stats.attempts,
        worst
            .map(|w| format!("{w:.6e}"))
            .unwrap_or_else(|| "none".to_string()),
    )
}

/// Object center positions per state, (left frame, right frame).
type PalmTraces = (Vec<(f64, f64)>, Vec<(f64, f64)>);

fn states_xy(plan: &Plan) -> PalmTraces {
    let left = plan
        .predicted_states
        .iter()
        .map(|s| (s.pose_obj_in_left.x, s.pose_obj_in_left.y))
        .collect();
    let right = plan
        .predicted_states
        .iter()
        .map(|s| (s.pose_obj_in_right.x, s.pose_obj_in_right.y))
        .collect();
    (left, right)
}

fn plan_svg(title: &str, scenario: &Scenario, ours: &Plan, baseline: &Plan) -> String {
    let (ours_l, ours_r) = states_xy(ours);
    let (base_l, base_r) = states_xy(baseline);
    let goals_left: Vec<PlanarPose> = ours.marks.iter().map(|m| m.goal_left).collect();
    let goals_right: Vec<PlanarPose> = ours.marks.iter().map(|m| m.goal_right).collect();
    trajectory_svg(
        title,
        scenario.grasp.palm_radius,
        &[
            Series {
                label: "baseline",
                color: "#d62728",
                dashed: true,
                left: base_l,
                right: base_r,
            },
            Series {
                label: "ours",
                color: "#1f77b4",
                dashed: false,
                left: ours_l,
                right: ours_r,
            },
        ],
        &goals_left,
        &goals_right,
    )
}

/// Plan the scenario, write `plan.csv`, `baseline.csv`, `summary.txt`,
/// and `trajectory.svg` into `out_dir`. Files are written even when the
/// solver does not converge; the caller picks the exit code.
pub fn cmd_plan(
    scenario_path: &Path,
    out_dir: &Path,
    overrides: &CliOverrides,
) -> Result<PlanOutcome, CmdError> {
    let file = load_scenario(scenario_path)?;
    let scenario = file.to_scenario();
    let mut cfg = file.solver_config();
    overrides.apply(&mut cfg);

    let ours = plan(&scenario, &cfg).map_err(core_to_cmd)?;
    let base = baseline_plan(&scenario, &cfg).map_err(core_to_cmd)?;

    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("plan.csv"), &plan_csv(&ours))?;
    write_atomic(&out_dir.join("baseline.csv"), &plan_csv(&base))?;
    write_atomic(&out_dir.join("summary.txt"), &plan_summary(&ours))?;
    let title = format!(
        "object '{}' path '{}' incline {:.0} deg",
        file.labels.object,
        file.labels.path,
        scenario.grasp.incline_phi.to_degrees()
    );
    write_atomic(
        &out_dir.join("trajectory.svg"),
        &plan_svg(&title, &scenario, &ours, &base),
    )?;

    Ok(PlanOutcome {
        scenario,
        labels: file.labels,
        plan: ours,
        baseline: base,
    })
}

// ---------------------------------------------------------------------
// simulate

/// Outputs of `dls simulate`.
#[derive(Debug)]
pub struct SimulateOutcome {
    pub plan: Plan,
    pub rollout: RolloutResult,
}

/// Parse a plan CSV produced by [`cmd_plan`] back into twists.
fn read_plan_csv(path: &Path) -> Result<Vec<Twist>, CmdError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
    let mut twists = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CmdError::Parse(format!("{}: {e}", path.display())))?;
        let field = |j: usize, name: &str| -> Result<f64, CmdError> {
            row.get(j)
                .ok_or_else(|| {
                    CmdError::Parse(format!("{}: row {i} missing {name}", path.display()))
                })?
                .parse::<f64>()
                .map_err(|e| CmdError::Parse(format!("{}: row {i} {name}: {e}", path.display())))
        };
        let t: usize = row
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CmdError::Parse(format!("{}: row {i} bad step index", path.display())))?;
        if t != i {
            return Err(CmdError::Parse(format!(
                "{}: step indices must be consecutive from 0 (got {t} at row {i})",
                path.display()
            )));
        }
        let phase = row.get(1).unwrap_or_default();
        if phase != Phase::for_step(t).name() {
            return Err(CmdError::Parse(format!(
                "{}: step {t} claims phase '{phase}' but the alternation schedule expects '{}'",
                path.display(),
                Phase::for_step(t).name()
            )));
        }
        twists.push(Twist::new(field(2, "vx")?, field(3, "vy")?, field(4, "omega")?));
    }
    Ok(twists)
}

fn rollout_csv(plan: &Plan, result: &RolloutResult) -> String {
    let mut out = String::from(
        "t,phase,mode,slip,residual_norm,left_x,left_y,left_theta,right_x,right_y,right_theta\n",
    );
    for (t, mode) in result.modes.iter().enumerate() {
        let s = &result.states[t + 1];
        let slip = (*mode != ContactMode::StickMovingSlideStatic && !plan.twists[t].is_zero()) as u8;
        out.push_str(&format!(
            "{t},{},{},{slip},{},{},{},{},{},{},{}\n",
            plan.phases[t].name(),
            mode.name(),
            result.residual_norms[t],
            s.pose_obj_in_left.x,
            s.pose_obj_in_left.y,
            s.pose_obj_in_left.theta,
            s.pose_obj_in_right.x,
            s.pose_obj_in_right.y,
            s.pose_obj_in_right.theta,
        ));
    }
    out
}

fn rollout_summary(result: &RolloutResult) -> String {
    format!(
        "steps={} slip_events={} workspace_exits={} \
         final_error_left_mm={:.6} final_error_left_deg={:.6} \
         final_error_right_mm={:.6} final_error_right_deg={:.6}\n",
        result.modes.len(),
        result.slip_events,
        result.workspace_exits,
        result.final_error_left.0 * 1000.0,
        result.final_error_left.1.to_degrees(),
        result.final_error_right.0 * 1000.0,
        result.final_error_right.1.to_degrees(),
    )
}

/// Roll a stored plan through the stick/slip oracle and write
/// `rollout.csv` plus `summary.txt`.
pub fn cmd_simulate(
    plan_path: &Path,
    scenario_path: &Path,
    out_dir: &Path,
) -> Result<SimulateOutcome, CmdError> {
    let file = load_scenario(scenario_path)?;
    let scenario = file.to_scenario();
    scenario.validate().map_err(core_to_cmd)?;

    let twists = read_plan_csv(plan_path)?;
    let plan = Plan::from_twists(
        twists,
        &scenario.initial_state(),
        scenario.goal_left,
        scenario.goal_right,
    );

    let result = rollout(&plan, &scenario.initial_state(), &scenario.grasp).map_err(|e| match e {
        CoreError::SlipSolverFailure { .. } => CmdError::Oracle(e.to_string()),
        other => core_to_cmd(other),
    })?;

    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("rollout.csv"), &rollout_csv(&plan, &result))?;
    write_atomic(&out_dir.join("summary.txt"), &rollout_summary(&result))?;

    Ok(SimulateOutcome {
        plan,
        rollout: result,
    })
}

// ---------------------------------------------------------------------
// sweep

/// One planner's run inside a cell.
pub struct CellRun {
    pub converged: bool,
    pub slip_events: usize,
    pub workspace_exits: usize,
    pub metrics: PlanMetrics,
    pub final_error_left: (f64, f64),
    pub final_error_right: (f64, f64),
}

/// Outcome of one (object, path, incline) cell.
pub struct CellOutcome {
    pub object: String,
    pub path: String,
    pub incline_deg: f64,
    pub ours: Result<CellRun, String>,
    pub baseline: Result<CellRun, String>,
}

/// Outputs of `dls sweep`.
pub struct SweepOutcome {
    pub table: ResultsTable,
    pub cells: Vec<CellOutcome>,
}

fn run_cell(cell: &Cell, out_dir: &Path, overrides: &CliOverrides) -> CellOutcome {
    let mut cfg = cell.solver;
    overrides.apply(&mut cfg);

    let cell_dir = out_dir
        .join("cells")
        .join(format!("{}_{}_{}", cell.object, cell.path, cell.incline_deg));
    let _ = std::fs::create_dir_all(&cell_dir);

    let run_one = |which: &str, p: Result<Plan, CoreError>| -> Result<(Plan, CellRun), String> {
        let p = p.map_err(|e| format!("plan: {e}"))?;
        let result = rollout(&p, &cell.scenario.initial_state(), &cell.scenario.grasp)
            .map_err(|e| format!("rollout: {e}"))?;
        let metrics = evaluate_plan(&p, &result, &cell.scenario);
        let _ = write_atomic(&cell_dir.join(format!("{which}_plan.csv")), &plan_csv(&p));
        let _ = write_atomic(
            &cell_dir.join(format!("{which}_rollout.csv")),
            &rollout_csv(&p, &result),
        );
        Ok((
            p,
            CellRun {
                converged: result.slip_events == 0,
                slip_events: result.slip_events,
                workspace_exits: result.workspace_exits,
                metrics,
                final_error_left: result.final_error_left,
                final_error_right: result.final_error_right,
            },
        ))
    };

    let ours_full = run_one("ours", plan(&cell.scenario, &cfg));
    let base_full = run_one("baseline", baseline_plan(&cell.scenario, &cfg));

    // Planner convergence is reported from the plan itself; the CellRun
    // built above only sees the rollout.
    let ours = match ours_full {
        Ok((p, mut run)) => {
            run.converged = p.converged;
            if let Ok((bp, _)) = &base_full {
                let title = format!(
                    "{} / {} / {:.0} deg (simulated)",
                    cell.object, cell.path, cell.incline_deg
                );
                let svg = cell_svg(&title, cell, &p, bp);
                let _ = write_atomic(&cell_dir.join("trajectory.svg"), &svg);
            }
            Ok(run)
        }
        Err(e) => Err(e),
    };
    let baseline = match base_full {
        Ok((bp, mut run)) => {
            run.converged = bp.converged;
            Ok(run)
        }
        Err(e) => Err(e),
    };

    CellOutcome {
        object: cell.object.clone(),
        path: cell.path.clone(),
        incline_deg: cell.incline_deg,
        ours,
        baseline,
    }
}

fn cell_svg(title: &str, cell: &Cell, ours: &Plan, base: &Plan) -> String {
    // Simulated trajectories, falling back to predicted ones if a
    // rollout fails here (it already succeeded once in run_cell).
    let sim_xy = |p: &Plan| -> PalmTraces {
        match rollout(p, &cell.scenario.initial_state(), &cell.scenario.grasp) {
            Ok(r) => (
                r.states
                    .iter()
                    .map(|s| (s.pose_obj_in_left.x, s.pose_obj_in_left.y))
                    .collect(),
                r.states
                    .iter()
                    .map(|s| (s.pose_obj_in_right.x, s.pose_obj_in_right.y))
                    .collect(),
            ),
            Err(_) => states_xy(p),
        }
    };
    let (ol, or) = sim_xy(ours);
    let (bl, br) = sim_xy(base);
    let goals_left: Vec<PlanarPose> = ours.marks.iter().map(|m| m.goal_left).collect();
    let goals_right: Vec<PlanarPose> = ours.marks.iter().map(|m| m.goal_right).collect();
    trajectory_svg(
        title,
        cell.scenario.grasp.palm_radius,
        &[
            Series {
                label: "baseline (simulated)",
                color: "#d62728",
                dashed: true,
                left: bl,
                right: br,
            },
            Series {
                label: "ours (simulated)",
                color: "#1f77b4",
                dashed: false,
                left: ol,
                right: or,
            },
        ],
        &goals_left,
        &goals_right,
    )
}

fn cells_csv(cells: &[CellOutcome]) -> String {
    let mut out = String::from(
        "object,path,incline_deg,planner,status,converged,slip_events,workspace_exits,\
         final_left_mm,final_left_deg,final_right_mm,final_right_deg\n",
    );
    for cell in cells {
        for (planner, run) in [("ours", &cell.ours), ("baseline", &cell.baseline)] {
            match run {
                Ok(r) => out.push_str(&format!(
                    "{},{},{},{planner},ok,{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                    cell.object,
                    cell.path,
                    cell.incline_deg,
                    r.converged,
                    r.slip_events,
                    r.workspace_exits,
                    r.final_error_left.0 * 1000.0,
                    r.final_error_left.1.to_degrees(),
                    r.final_error_right.0 * 1000.0,
                    r.final_error_right.1.to_degrees(),
                )),
                Err(e) => out.push_str(&format!(
                    "{},{},{},{planner},error: {},,,,,,,\n",
                    cell.object,
                    cell.path,
                    cell.incline_deg,
                    e.replace(',', ";"),
                )),
            }
        }
    }
    out
}

/// Run every suite cell (ours and baseline), roll out through the
/// oracle, and aggregate the results table. Individual cell failures are
/// recorded per row and do not abort the sweep.
pub fn cmd_sweep(
    suite_path: &Path,
    out_dir: &Path,
    overrides: &CliOverrides,
) -> Result<SweepOutcome, CmdError> {
    let suite = load_suite(suite_path)?;
    let cells = suite.cells();
    std::fs::create_dir_all(out_dir)?;

    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|cell| run_cell(cell, out_dir, overrides))
        .collect();

    let mut builder = TableBuilder::new();
    for cell in &outcomes {
        for (planner, run) in [("ours", &cell.ours), ("baseline", &cell.baseline)] {
            match run {
                Ok(r) => {
                    builder.record_cell(&cell.object, planner, false);
                    for w in &r.metrics.samples {
                        builder.add_sample(
                            &cell.object,
                            planner,
                            Side::Top,
                            w.trans_left * 1000.0,
                            w.rot_left.to_degrees(),
                        );
                        builder.add_sample(
                            &cell.object,
                            planner,
                            Side::Bottom,
                            w.trans_right * 1000.0,
                            w.rot_right.to_degrees(),
                        );
                    }
                }
                Err(_) => builder.record_cell(&cell.object, planner, true),
            }
        }
    }
    let table = builder.finish();

    write_atomic(&out_dir.join("results.csv"), &table.to_csv())?;
    write_atomic(&out_dir.join("results.txt"), &table.aligned_text())?;
    write_atomic(&out_dir.join("cells.csv"), &cells_csv(&outcomes))?;

    Ok(SweepOutcome {
        table,
        cells: outcomes,
    })
}
