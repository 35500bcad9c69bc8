//! Alternating-palm trajectory optimizer and the straight-line baseline.
//!
//! The planner chooses one twist per step over a fixed even horizon. On
//! even steps the left palm moves (the object slides over the static
//! right palm, so the right-relative pose integrates the twist); on odd
//! steps the roles swap. The objective accumulates the squared distance
//! of both relative poses to their goals over the whole horizon, so the
//! object approaches its goals as fast as the constraints allow.
//!
//! Constraints per step: the slippage-free margin of the active phase
//! (SOC form when both patches match, the quadratic/SOC decomposition
//! otherwise), per-step twist caps, and containment of both relative
//! positions in the palm disc. Terminal equality to the goal poses is
//! handled by the augmented-Lagrangian outer loop and reported as
//! converged when it lands within the terminal tolerance band.
//!
//! Multi-waypoint scenarios are planned as a sequence of independent
//! solves, one per waypoint pair, each starting from the previous
//! predicted end state. The pose integrator is shared with the
//! simulator, so a slip-free rollout reproduces `predicted_states`
//! bit-exactly.

use crate::contact_sim::{ContactSurfaces, GraspConfig, Palm, RolloutResult, SimState};
use crate::frames::{wrap_angle, PlanarPose, Twist};
use crate::limit_surface::{
    decomposed_margins, slip_free_twist_margin, soc_constant, soc_equal_radius_margin,
    ConstraintMargin,
};
use crate::nlp::{solve_auglag, AugLagConfig, AugLagProblem, AugLagReport};
use crate::{Error, Result};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Which palm moves during a step. The static palm's relative pose is the
/// one that changes (the object slides there); the moving palm's pose is
/// frozen by sticking contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    LeftMoves,
    RightMoves,
}

impl Phase {
    /// Fixed schedule: left moves on even steps, right on odd steps.
    pub fn for_step(t: usize) -> Phase {
        if t.is_multiple_of(2) {
            Phase::LeftMoves
        } else {
            Phase::RightMoves
        }
    }

    pub fn moving_palm(&self) -> Palm {
        match self {
            Phase::LeftMoves => Palm::Left,
            Phase::RightMoves => Palm::Right,
        }
    }

    pub fn static_palm(&self) -> Palm {
        self.moving_palm().other()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Phase::LeftMoves => "left",
            Phase::RightMoves => "right",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A regrasp task: start and goal relative poses plus the grasp physics.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub start_left: PlanarPose,
    pub start_right: PlanarPose,
    pub goal_left: PlanarPose,
    pub goal_right: PlanarPose,
    pub grasp: GraspConfig,
    /// Optional intermediate (left, right) goal pairs visited in order
    /// before the final goals.
    pub waypoints: Vec<(PlanarPose, PlanarPose)>,
}

impl Scenario {
    /// Initial simulator state; the left palm moves first.
    pub fn initial_state(&self) -> SimState {
        SimState::new(self.start_left, self.start_right, Palm::Left)
    }

    /// The ordered goal pairs: every waypoint, then the final goals if
    /// they differ from the last waypoint.
    pub fn waypoint_sequence(&self) -> Vec<(PlanarPose, PlanarPose)> {
        let mut seq = self.waypoints.clone();
        let last_matches = seq
            .last()
            .map(|(l, r)| *l == self.goal_left && *r == self.goal_right)
            .unwrap_or(false);
        if !last_matches {
            seq.push((self.goal_left, self.goal_right));
        }
        seq
    }

    pub fn validate(&self) -> Result<()> {
        self.grasp.validate()?;
        let radius = self.grasp.palm_radius;
        let check = |p: &PlanarPose| -> Result<()> {
            if p.translation_norm() > radius {
                Err(Error::GoalOutsideWorkspace(p.x, p.y, radius))
            } else {
                Ok(())
            }
        };
        check(&self.start_left)?;
        check(&self.start_right)?;
        check(&self.goal_left)?;
        check(&self.goal_right)?;
        for (l, r) in &self.waypoints {
            check(l)?;
            check(r)?;
        }
        Ok(())
    }
}

/// Solver parameters; see field docs for defaults.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Steps per waypoint leg; must be even and >= 2 so both palms get
    /// equal turns.
    pub horizon_n: usize,
    /// Safety band below zero required of every certified margin.
    pub slip_margin_eps: f64,
    /// Per-step translation cap [m].
    pub max_step_trans: f64,
    /// Per-step rotation cap [rad].
    pub max_step_rot: f64,
    /// Augmented-Lagrangian outer iteration cap.
    pub max_outer_iters: usize,
    /// Inner quasi-Newton iteration cap per outer iteration.
    pub max_inner_iters: usize,
    /// Stationarity tolerance on the merit gradient.
    pub tol_stationarity: f64,
    /// Constraint violation tolerance driving the outer loop.
    pub tol_constraint: f64,
    /// Terminal tolerance band on pose error [m and rad] for a leg to
    /// count as converged.
    pub tol_terminal: f64,
    /// Initial penalty parameter.
    pub penalty_init: f64,
    /// Penalty growth factor when feasibility stalls.
    pub penalty_growth: f64,
    /// Seed for the multi-start perturbations.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon_n: 14,
            slip_margin_eps: 1e-4,
            max_step_trans: 0.005,
            max_step_rot: 0.05,
            max_outer_iters: 40,
            max_inner_iters: 400,
            tol_stationarity: 1e-9,
            tol_constraint: 1e-8,
            tol_terminal: 1e-6,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_n < 2 || !self.horizon_n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "horizon_n {} must be even and >= 2",
                self.horizon_n
            )));
        }
        for (name, v) in [
            ("slip_margin_eps", self.slip_margin_eps),
            ("max_step_trans", self.max_step_trans),
            ("max_step_rot", self.max_step_rot),
            ("tol_stationarity", self.tol_stationarity),
            ("tol_constraint", self.tol_constraint),
            ("tol_terminal", self.tol_terminal),
            ("penalty_init", self.penalty_init),
            ("penalty_growth", self.penalty_growth),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} {v} must be > 0")));
            }
        }
        Ok(())
    }
}

/// A state index at which the plan is expected to sit on a goal pair.
#[derive(Debug, Clone, Copy)]
pub struct WaypointMark {
    pub state_index: usize,
    pub goal_left: PlanarPose,
    pub goal_right: PlanarPose,
}

/// Simulated pose errors at one waypoint.
#[derive(Debug, Clone, Copy)]
pub struct WaypointError {
    pub state_index: usize,
    /// Translation error of the left-relative pose [m].
    pub trans_left: f64,
    /// Rotation error of the left-relative pose [rad].
    pub rot_left: f64,
    pub trans_right: f64,
    pub rot_right: f64,
}

/// Solver diagnostics accumulated over all legs and attempts.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Merit at the start and end of every inner solve, in order; the
    /// merit never rises within one entry.
    pub merit_history: Vec<(f64, f64)>,
    pub max_violation: f64,
    pub attempts: usize,
}

/// A planned twist sequence with its predicted trajectory.
#[derive(Debug, Clone)]
pub struct Plan {
    pub twists: Vec<Twist>,
    pub phases: Vec<Phase>,
    /// Predicted states; length is `twists.len() + 1`.
    pub predicted_states: Vec<SimState>,
    pub objective_value: f64,
    pub converged: bool,
    /// Goal pairs and the state indices where they should be met.
    pub marks: Vec<WaypointMark>,
    /// Certified margin per step (`None` for zero twists).
    pub margins: Vec<Option<f64>>,
    pub stats: SolveStats,
}

impl Plan {
    /// Construct a plan around externally supplied twists (for replaying
    /// a stored plan through the simulator). Predicted states are rebuilt
    /// with the shared integrator; margins are left empty.
    pub fn from_twists(
        twists: Vec<Twist>,
        s0: &SimState,
        goal_left: PlanarPose,
        goal_right: PlanarPose,
    ) -> Self {
        let phases: Vec<Phase> = (0..twists.len()).map(Phase::for_step).collect();
        let predicted_states = propagate(s0, &twists);
        let n = twists.len();
        let margins = vec![None; n];
        Self {
            twists,
            phases,
            predicted_states,
            objective_value: 0.0,
            converged: true,
            marks: vec![WaypointMark {
                state_index: n,
                goal_left,
                goal_right,
            }],
            margins,
            stats: SolveStats::default(),
        }
    }
}

/// Advance a state sequence by the planner dynamics (identical to the
/// simulator's sticking update).
fn propagate(s0: &SimState, twists: &[Twist]) -> Vec<SimState> {
    let mut states = Vec::with_capacity(twists.len() + 1);
    states.push(*s0);
    let mut s = *s0;
    for v in twists {
        let advanced = s.static_pose().integrate(v);
        match s.moving_palm {
            Palm::Left => s.pose_obj_in_right = advanced,
            Palm::Right => s.pose_obj_in_left = advanced,
        }
        s.moving_palm = s.moving_palm.other();
        states.push(s);
    }
    states
}

/// Which margin family governs a step.
#[derive(Debug, Clone, Copy)]
enum MarginModel {
    /// Matched patches: single SOC margin with `B = c A`.
    EqualRadius { c_ratio: f64, constant: f64 },
    /// Mismatched patches with tangential gravity: quadratic + SOC pair.
    Decomposed,
    /// Mismatched patches on a horizontal grasp: quadratic part only
    /// (it equals the full margin when the tangential load vanishes).
    QuadOnly,
}

impl MarginModel {
    fn for_surfaces(surfaces: &ContactSurfaces) -> MarginModel {
        if surfaces.matched_patches {
            MarginModel::EqualRadius {
                c_ratio: surfaces.c_ratio,
                constant: soc_constant(&surfaces.a, surfaces.c_ratio, &surfaces.gravity),
            }
        } else if surfaces.gravity.tangential_norm() > 0.0 {
            MarginModel::Decomposed
        } else {
            MarginModel::QuadOnly
        }
    }

    fn constraints_per_step(&self) -> usize {
        match self {
            MarginModel::Decomposed => 2,
            _ => 1,
        }
    }

    /// Exact certified margin for a nonzero contact-frame twist: the
    /// value the plan invariant is checked against.
    fn certified(&self, u: &Twist, surfaces: &ContactSurfaces) -> Result<f64> {
        match self {
            MarginModel::EqualRadius { c_ratio, .. } => Ok(soc_equal_radius_margin(
                u,
                &surfaces.a,
                *c_ratio,
                &surfaces.gravity,
            )?
            .value),
            MarginModel::Decomposed => {
                let (quad, soc) = decomposed_margins(u, &surfaces.a, &surfaces.b, &surfaces.gravity)?;
                Ok(quad.value.max(soc.value))
            }
            MarginModel::QuadOnly => Ok(slip_free_twist_margin(
                u,
                &surfaces.a,
                &surfaces.b,
                &surfaces.gravity,
            )?
            .value),
        }
    }
}

/// Smoothing floor inside the SOC square roots (in ellipsoid-norm units).
const SQRT_SMOOTHING_SQ: f64 = 1e-24;
/// Scale (in squared ellipsoid-norm units) below which the margin
/// requirement fades out, keeping zero twists feasible.
const MARGIN_FADE_Q0: f64 = 1e-8;
/// Twists at or below this infinity norm are snapped to exactly zero
/// after the solve.
const SNAP_THRESHOLD: f64 = 2e-8;

/// One leg's NLP: decision variables are the stacked twists.
struct LegProblem<'a> {
    surfaces: &'a ContactSurfaces,
    model: MarginModel,
    horizon: usize,
    start_left: PlanarPose,
    start_right: PlanarPose,
    goal_left: PlanarPose,
    goal_right: PlanarPose,
    palm_radius: f64,
    max_step_trans: f64,
    max_step_rot: f64,
    /// Margin bound enforced inside the solver (double the certification
    /// band, so certified margins clear it with room).
    eps_solver: f64,
}

/// Forward rollout of one chain as raw (x, y, theta) triples.
struct ChainStates {
    left: Vec<[f64; 3]>,
    right: Vec<[f64; 3]>,
}

impl LegProblem<'_> {
    fn twist_at(z: &[f64], t: usize) -> Twist {
        Twist::new(z[3 * t], z[3 * t + 1], z[3 * t + 2])
    }

    /// Static chain updated at step `t` (even steps move the left palm,
    /// so the right-relative pose integrates).
    fn static_is_right(t: usize) -> bool {
        t.is_multiple_of(2)
    }

    fn forward(&self, z: &[f64]) -> ChainStates {
        let k = self.horizon;
        let mut left = Vec::with_capacity(k + 1);
        let mut right = Vec::with_capacity(k + 1);
        left.push([self.start_left.x, self.start_left.y, self.start_left.theta]);
        right.push([
            self.start_right.x,
            self.start_right.y,
            self.start_right.theta,
        ]);
        for t in 0..k {
            let v = Self::twist_at(z, t);
            let (prev_l, prev_r) = (left[t], right[t]);
            if Self::static_is_right(t) {
                right.push(integrate_raw(prev_r, &v));
                left.push(prev_l);
            } else {
                left.push(integrate_raw(prev_l, &v));
                right.push(prev_r);
            }
        }
        ChainStates { left, right }
    }

    /// Margin constraint values (with fade term) and optionally gradients
    /// with respect to the contact-frame twist `u`.
    fn margin_constraints(&self, u: [f64; 3], grads: Option<&mut [[f64; 3]; 2]>) -> ([f64; 2], usize) {
        let a = &self.surfaces.a;
        let ut = Twist::from_array(u);
        let q = a.inv_quad_twist(&ut);
        let sq = (q + SQRT_SMOOTHING_SQ).sqrt();
        let a_inv_u = a.inv_apply(u);
        let fade = q / (q + MARGIN_FADE_Q0);
        // d fade / du = 2 q0 / (q + q0)^2 * A^-1 u
        let fade_grad_coeff = 2.0 * MARGIN_FADE_Q0 / ((q + MARGIN_FADE_Q0) * (q + MARGIN_FADE_Q0));

        let gf = self.surfaces.gravity.tangential;
        let mut values = [0.0, 0.0];
        let mut gbuf = [[0.0; 3]; 2];
        let count;

        match self.model {
            MarginModel::EqualRadius { c_ratio, constant } => {
                count = 1;
                let gf_dot_u = gf.fx * u[0] + gf.fy * u[1];
                values[0] = constant * sq - 2.0 * c_ratio * gf_dot_u + self.eps_solver * fade;
                for i in 0..3 {
                    gbuf[0][i] = constant * a_inv_u[i] / sq
                        + self.eps_solver * fade_grad_coeff * a_inv_u[i];
                }
                gbuf[0][0] -= 2.0 * c_ratio * gf.fx;
                gbuf[0][1] -= 2.0 * c_ratio * gf.fy;
            }
            MarginModel::Decomposed | MarginModel::QuadOnly => {
                let b = &self.surfaces.b;
                let b_ainv_u = b.apply(a_inv_u);
                // Quadratic part: u'(A^-1 B A^-1 - A^-1) u.
                let quad = a_inv_u[0] * b_ainv_u[0] / a.diag()[0]
                    + a_inv_u[1] * b_ainv_u[1] / a.diag()[1]
                    + a_inv_u[2] * b_ainv_u[2] / a.diag()[2]
                    - q;
                values[0] = quad + self.eps_solver * fade;
                for i in 0..3 {
                    gbuf[0][i] = 2.0 * (b_ainv_u[i] / a.diag()[i] - a_inv_u[i])
                        + self.eps_solver * fade_grad_coeff * a_inv_u[i];
                }
                if matches!(self.model, MarginModel::Decomposed) {
                    count = 2;
                    let gfa = [gf.fx, gf.fy, 0.0];
                    let b_gf = b.apply(gfa);
                    let gbg = gfa[0] * b_gf[0] + gfa[1] * b_gf[1];
                    let coeff = 2.0 / gbg;
                    // w_i = coeff * (B A^-1 g_f)_i
                    let w = [
                        coeff * b_gf[0] / a.diag()[0],
                        coeff * b_gf[1] / a.diag()[1],
                        0.0,
                    ];
                    values[1] = sq - (w[0] * u[0] + w[1] * u[1]) + self.eps_solver * fade;
                    for i in 0..3 {
                        gbuf[1][i] = a_inv_u[i] / sq - w[i]
                            + self.eps_solver * fade_grad_coeff * a_inv_u[i];
                    }
                } else {
                    count = 1;
                }
            }
        }

        if let Some(out) = grads {
            *out = gbuf;
        }
        (values, count)
    }

    fn margins_per_step(&self) -> usize {
        self.model.constraints_per_step()
    }

    fn containment_base(&self) -> usize {
        self.horizon * (self.margins_per_step() + 2)
    }
}

fn integrate_raw(p: [f64; 3], v: &Twist) -> [f64; 3] {
    let pose = PlanarPose::new(p[0], p[1], p[2]).integrate(v);
    [pose.x, pose.y, pose.theta]
}

impl AugLagProblem for LegProblem<'_> {
    fn dim(&self) -> usize {
        3 * self.horizon
    }

    fn num_eq(&self) -> usize {
        6
    }

    fn num_ineq(&self) -> usize {
        // Per step: margins + translation cap + rotation cap; then the
        // two containment constraints per visited state.
        self.horizon * (self.margins_per_step() + 2) + 2 * self.horizon
    }

    fn eval(&self, z: &[f64], h: &mut [f64], g: &mut [f64]) -> f64 {
        let states = self.forward(z);
        let k = self.horizon;
        let gl = [self.goal_left.x, self.goal_left.y, self.goal_left.theta];
        let gr = [self.goal_right.x, self.goal_right.y, self.goal_right.theta];

        let mut f = 0.0;
        for t in 1..=k {
            f += pose_dist_sq(states.left[t], gl) + pose_dist_sq(states.right[t], gr);
        }

        let last_l = states.left[k];
        let last_r = states.right[k];
        h[0] = last_l[0] - gl[0];
        h[1] = last_l[1] - gl[1];
        h[2] = wrap_angle(last_l[2] - gl[2]);
        h[3] = last_r[0] - gr[0];
        h[4] = last_r[1] - gr[1];
        h[5] = wrap_angle(last_r[2] - gr[2]);

        let stride = self.margins_per_step() + 2;
        for t in 0..k {
            let v = Self::twist_at(z, t);
            let theta = if Self::static_is_right(t) {
                states.right[t][2]
            } else {
                states.left[t][2]
            };
            let u = v.rotated(theta);
            let (values, count) = self.margin_constraints(u.as_array(), None);
            let base = t * stride;
            g[base..base + count].copy_from_slice(&values[..count]);
            g[base + count] = v.vx * v.vx + v.vy * v.vy - self.max_step_trans * self.max_step_trans;
            g[base + count + 1] = v.omega * v.omega - self.max_step_rot * self.max_step_rot;
        }

        let cbase = self.containment_base();
        let r2 = self.palm_radius * self.palm_radius;
        for t in 1..=k {
            let l = states.left[t];
            let r = states.right[t];
            g[cbase + 2 * (t - 1)] = l[0] * l[0] + l[1] * l[1] - r2;
            g[cbase + 2 * (t - 1) + 1] = r[0] * r[0] + r[1] * r[1] - r2;
        }

        f
    }

    fn weighted_gradient(&self, z: &[f64], w_eq: &[f64], w_ineq: &[f64], grad: &mut [f64]) {
        let states = self.forward(z);
        let k = self.horizon;
        let gl = [self.goal_left.x, self.goal_left.y, self.goal_left.theta];
        let gr = [self.goal_right.x, self.goal_right.y, self.goal_right.theta];
        let stride = self.margins_per_step() + 2;
        let cbase = self.containment_base();

        grad.fill(0.0);

        // Adjoints of the current state for each chain.
        let mut a_l = [0.0; 3];
        let mut a_r = [0.0; 3];

        // Seeds at the terminal state: objective, containment, equality.
        add_objective_seed(&mut a_l, states.left[k], gl);
        add_objective_seed(&mut a_r, states.right[k], gr);
        add_containment_seed(&mut a_l, states.left[k], w_ineq[cbase + 2 * (k - 1)]);
        add_containment_seed(&mut a_r, states.right[k], w_ineq[cbase + 2 * (k - 1) + 1]);
        a_l[0] += w_eq[0];
        a_l[1] += w_eq[1];
        a_l[2] += w_eq[2];
        a_r[0] += w_eq[3];
        a_r[1] += w_eq[4];
        a_r[2] += w_eq[5];

        for t in (0..k).rev() {
            let v = Self::twist_at(z, t);
            let static_right = Self::static_is_right(t);
            let theta = if static_right {
                states.right[t][2]
            } else {
                states.left[t][2]
            };
            let (s, c) = theta.sin_cos();
            let base = t * stride;

            // Margin constraints: gradients with respect to the rotated
            // twist u, chained back to v and theta.
            let u = v.rotated(theta);
            let mut mgrads = [[0.0; 3]; 2];
            let (_, count) = self.margin_constraints(u.as_array(), Some(&mut mgrads));
            let mut theta_seed = 0.0;
            for m in 0..count {
                let w = w_ineq[base + m];
                if w == 0.0 {
                    continue;
                }
                let gu = mgrads[m];
                // du/dv = R(theta); du/dtheta = J u.
                grad[3 * t] += w * (c * gu[0] + s * gu[1]);
                grad[3 * t + 1] += w * (-s * gu[0] + c * gu[1]);
                grad[3 * t + 2] += w * gu[2];
                theta_seed += w * (gu[0] * (-u.vy) + gu[1] * u.vx);
            }

            // Step caps.
            let w_t = w_ineq[base + count];
            grad[3 * t] += w_t * 2.0 * v.vx;
            grad[3 * t + 1] += w_t * 2.0 * v.vy;
            let w_r = w_ineq[base + count + 1];
            grad[3 * t + 2] += w_r * 2.0 * v.omega;

            // Chain propagation through the static-side integration.
            let a_chain = if static_right { &mut a_r } else { &mut a_l };
            grad[3 * t] += c * a_chain[0] + s * a_chain[1];
            grad[3 * t + 1] += -s * a_chain[0] + c * a_chain[1];
            grad[3 * t + 2] += a_chain[2];
            let dx_dtheta = -s * v.vx - c * v.vy;
            let dy_dtheta = c * v.vx - s * v.vy;
            a_chain[2] += dx_dtheta * a_chain[0] + dy_dtheta * a_chain[1];
            a_chain[2] += theta_seed;

            // Seeds at state t (skip the fixed start state).
            if t >= 1 {
                add_objective_seed(&mut a_l, states.left[t], gl);
                add_objective_seed(&mut a_r, states.right[t], gr);
                add_containment_seed(&mut a_l, states.left[t], w_ineq[cbase + 2 * (t - 1)]);
                add_containment_seed(&mut a_r, states.right[t], w_ineq[cbase + 2 * (t - 1) + 1]);
            }
        }
    }
}

fn pose_dist_sq(p: [f64; 3], goal: [f64; 3]) -> f64 {
    let dt = wrap_angle(p[2] - goal[2]);
    (p[0] - goal[0]).powi(2) + (p[1] - goal[1]).powi(2) + dt * dt
}

fn add_objective_seed(adj: &mut [f64; 3], p: [f64; 3], goal: [f64; 3]) {
    adj[0] += 2.0 * (p[0] - goal[0]);
    adj[1] += 2.0 * (p[1] - goal[1]);
    adj[2] += 2.0 * wrap_angle(p[2] - goal[2]);
}

fn add_containment_seed(adj: &mut [f64; 3], p: [f64; 3], w: f64) {
    if w != 0.0 {
        adj[0] += w * 2.0 * p[0];
        adj[1] += w * 2.0 * p[1];
    }
}

struct LegSolution {
    twists: Vec<Twist>,
    objective: f64,
    converged: bool,
    report: AugLagReport,
    attempts: usize,
}

/// Plan a trajectory visiting every waypoint pair and ending at the
/// scenario goals.
///
/// Returns a non-converged plan (best iterate) when tolerances are not
/// met; goals outside the workspace are rejected up front.
pub fn plan(s: &Scenario, cfg: &SolverConfig) -> Result<Plan> {
    s.validate()?;
    cfg.validate()?;
    let surfaces = s.grasp.surfaces()?;
    let model = MarginModel::for_surfaces(&surfaces);

    let legs = s.waypoint_sequence();
    let mut twists: Vec<Twist> = Vec::new();
    let mut marks = Vec::new();
    let mut stats = SolveStats::default();
    let mut objective_value = 0.0;
    let mut converged = true;

    let mut state = s.initial_state();
    for (leg_index, (goal_l, goal_r)) in legs.iter().enumerate() {
        let solution = solve_leg(
            &surfaces,
            model,
            &state,
            goal_l,
            goal_r,
            s.grasp.palm_radius,
            cfg,
            leg_index as u64,
        );
        objective_value += solution.objective;
        converged &= solution.converged;
        stats.outer_iters += solution.report.outer_iters;
        stats.inner_iters += solution.report.inner_iters_total;
        stats.attempts += solution.attempts;
        stats.max_violation = stats.max_violation.max(solution.report.max_violation);
        stats
            .merit_history
            .extend(solution.report.merit_history.iter().copied());

        let leg_states = propagate(&state, &solution.twists);
        state = *leg_states.last().expect("at least the start state");
        twists.extend(solution.twists);
        marks.push(WaypointMark {
            state_index: twists.len(),
            goal_left: *goal_l,
            goal_right: *goal_r,
        });
    }

    let phases: Vec<Phase> = (0..twists.len()).map(Phase::for_step).collect();
    let predicted_states = propagate(&s.initial_state(), &twists);

    let mut plan = Plan {
        twists,
        phases,
        predicted_states,
        objective_value,
        converged,
        marks,
        margins: Vec::new(),
        stats,
    };

    let cert = certify_plan(&plan, &s.grasp, cfg.slip_margin_eps)?;
    plan.margins = cert.margins;
    plan.converged = plan.converged && cert.ok;
    Ok(plan)
}

#[allow(clippy::too_many_arguments)]
fn solve_leg(
    surfaces: &ContactSurfaces,
    model: MarginModel,
    start: &SimState,
    goal_left: &PlanarPose,
    goal_right: &PlanarPose,
    palm_radius: f64,
    cfg: &SolverConfig,
    leg_index: u64,
) -> LegSolution {
    let k = cfg.horizon_n;
    let problem = LegProblem {
        surfaces,
        model,
        horizon: k,
        start_left: start.pose_obj_in_left,
        start_right: start.pose_obj_in_right,
        goal_left: *goal_left,
        goal_right: *goal_right,
        palm_radius,
        max_step_trans: cfg.max_step_trans,
        max_step_rot: cfg.max_step_rot,
        eps_solver: 2.0 * cfg.slip_margin_eps,
    };

    let al_cfg = AugLagConfig {
        max_outer: cfg.max_outer_iters,
        max_inner: cfg.max_inner_iters,
        tol_stationarity: cfg.tol_stationarity,
        tol_constraint: cfg.tol_constraint,
        penalty_init: cfg.penalty_init,
        penalty_growth: cfg.penalty_growth,
    };

    let base_init = baseline_leg_twists(start, goal_left, goal_right, k, Some(cfg));
    let mut best: Option<LegSolution> = None;

    for attempt in 0..3u64 {
        let mut z0: Vec<f64> = Vec::with_capacity(3 * k);
        for v in &base_init {
            z0.extend_from_slice(&v.as_array());
        }
        if attempt > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed ^ (leg_index.wrapping_mul(0x9e37_79b9)) ^ (attempt << 32),
            );
            for (i, zi) in z0.iter_mut().enumerate() {
                let scale = if i % 3 == 2 {
                    cfg.max_step_rot
                } else {
                    cfg.max_step_trans
                };
                *zi += rng.gen_range(-0.2..0.2) * scale;
            }
        }

        let report = solve_auglag(&problem, &z0, &al_cfg);
        log::debug!(
            "leg {leg_index} attempt {attempt}: al converged {} violation {:.3e}",
            report.converged,
            report.max_violation
        );
        let mut twists: Vec<Twist> = (0..k).map(|t| LegProblem::twist_at(&report.z, t)).collect();
        for v in twists.iter_mut() {
            if v.norm_inf() < SNAP_THRESHOLD {
                *v = Twist::zero();
            }
        }

        // Material convergence after snapping: terminal poses inside the
        // tolerance band, every nonzero margin certified, step caps and
        // containment respected. The solver's lumped violation is kept
        // only as a diagnostic; the surrogate margin band is twice the
        // certification band, so sub-band solver residue is harmless.
        let states = propagate(start, &twists);
        let last = states.last().unwrap();
        let (elx, ely, elt) = last.pose_obj_in_left.error_to(goal_left);
        let (erx, ery, ert) = last.pose_obj_in_right.error_to(goal_right);
        let terminal_ok = elx.hypot(ely) <= cfg.tol_terminal
            && elt.abs() <= cfg.tol_terminal
            && erx.hypot(ery) <= cfg.tol_terminal
            && ert.abs() <= cfg.tol_terminal;
        let margins_ok = leg_margins_ok(&twists, &states, surfaces, model, cfg.slip_margin_eps);
        let caps_ok = twists.iter().all(|v| {
            v.vx.hypot(v.vy) <= cfg.max_step_trans * (1.0 + 1e-3)
                && v.omega.abs() <= cfg.max_step_rot * (1.0 + 1e-3)
        });
        let contained = states.iter().all(|s| {
            s.pose_obj_in_left.translation_norm() <= palm_radius * (1.0 + 1e-6)
                && s.pose_obj_in_right.translation_norm() <= palm_radius * (1.0 + 1e-6)
        });
        let converged = terminal_ok && margins_ok && caps_ok && contained;

        let mut h = vec![0.0; 6];
        let mut g = vec![0.0; problem.num_ineq()];
        let mut zsnap = Vec::with_capacity(3 * k);
        for v in &twists {
            zsnap.extend_from_slice(&v.as_array());
        }
        let objective = problem.eval(&zsnap, &mut h, &mut g);

        let candidate = LegSolution {
            twists,
            objective,
            converged,
            report,
            attempts: attempt as usize + 1,
        };

        let better = match &best {
            None => true,
            Some(b) => {
                (candidate.converged && !b.converged)
                    || (candidate.converged == b.converged
                        && candidate.report.max_violation < b.report.max_violation)
            }
        };
        let accept_now = candidate.converged;
        if better {
            best = Some(candidate);
        }
        if accept_now {
            break;
        }
    }

    let mut solution = best.expect("at least one attempt");
    if !solution.converged {
        log::warn!(
            "leg {leg_index}: not converged (violation {:.3e}, stationarity {:.3e})",
            solution.report.max_violation,
            solution.report.stationarity
        );
    }
    solution.attempts = solution.attempts.max(1);
    solution
}

fn leg_margins_ok(
    twists: &[Twist],
    states: &[SimState],
    surfaces: &ContactSurfaces,
    model: MarginModel,
    eps: f64,
) -> bool {
    for (t, v) in twists.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let theta = states[t].static_pose().theta;
        let u = v.rotated(theta);
        match model.certified(&u, surfaces) {
            Ok(value) => {
                if value > -eps + 1e-9 {
                    return false;
                }
            }
            Err(_) => return false,
        }
    }
    true
}

/// Straight-line baseline: equal pose-space increments toward each leg's
/// goals on the usual alternation schedule, with no slippage-free or
/// step-size constraints.
pub fn baseline_plan(s: &Scenario, cfg: &SolverConfig) -> Result<Plan> {
    s.validate()?;
    cfg.validate()?;
    let legs = s.waypoint_sequence();
    let mut twists: Vec<Twist> = Vec::new();
    let mut marks = Vec::new();
    let mut state = s.initial_state();
    for (goal_l, goal_r) in &legs {
        let leg = baseline_leg_twists(&state, goal_l, goal_r, cfg.horizon_n, None);
        let leg_states = propagate(&state, &leg);
        state = *leg_states.last().unwrap();
        twists.extend(leg);
        marks.push(WaypointMark {
            state_index: twists.len(),
            goal_left: *goal_l,
            goal_right: *goal_r,
        });
    }

    let phases: Vec<Phase> = (0..twists.len()).map(Phase::for_step).collect();
    let predicted_states = propagate(&s.initial_state(), &twists);

    let mut plan = Plan {
        twists,
        phases,
        predicted_states,
        objective_value: 0.0,
        converged: true,
        marks,
        margins: Vec::new(),
        stats: SolveStats::default(),
    };
    let cert = certify_plan(&plan, &s.grasp, cfg.slip_margin_eps)?;
    plan.margins = cert.margins;
    Ok(plan)
}

/// Equal pose-space increments for one leg. When `clip` is given the
/// twists are scaled into the per-step caps (used as the solver's initial
/// guess); the raw baseline is left unclipped.
fn baseline_leg_twists(
    start: &SimState,
    goal_left: &PlanarPose,
    goal_right: &PlanarPose,
    horizon: usize,
    clip: Option<&SolverConfig>,
) -> Vec<Twist> {
    let per_chain = horizon / 2;
    let mut twists = vec![Twist::zero(); horizon];

    for (chain_goal, chain_start, offset) in [
        // Right-relative pose updates on even steps (left palm moves).
        (goal_right, &start.pose_obj_in_right, 0usize),
        (goal_left, &start.pose_obj_in_left, 1usize),
    ] {
        let (dx, dy, dt) = (
            (chain_goal.x - chain_start.x) / per_chain as f64,
            (chain_goal.y - chain_start.y) / per_chain as f64,
            wrap_angle(chain_goal.theta - chain_start.theta) / per_chain as f64,
        );
        let mut theta = chain_start.theta;
        for k in 0..per_chain {
            // The pose increment is constant in pose space; the twist is
            // that increment expressed in the co-rotated frame.
            let (s, c) = theta.sin_cos();
            let mut v = Twist::new(c * dx + s * dy, -s * dx + c * dy, dt);
            if let Some(cfg) = clip {
                let trans = v.vx.hypot(v.vy);
                let mut scale: f64 = 1.0;
                if trans > cfg.max_step_trans {
                    scale = scale.min(0.95 * cfg.max_step_trans / trans);
                }
                if v.omega.abs() > cfg.max_step_rot {
                    scale = scale.min(0.95 * cfg.max_step_rot / v.omega.abs());
                }
                v = v.scaled(scale);
            }
            twists[2 * k + offset] = v;
            theta += dt;
        }
    }
    twists
}

/// Certification report: every nonzero twist's margin re-evaluated
/// through the limit-surface API against the phase's surfaces.
#[derive(Debug, Clone)]
pub struct CertificationReport {
    pub ok: bool,
    /// Certified margin per step (`None` for zero twists).
    pub margins: Vec<Option<f64>>,
    /// Largest (worst) certified margin, if any twist is nonzero.
    pub worst: Option<f64>,
}

/// Independently re-evaluate every step's slippage-free margin.
pub fn certify_plan(plan: &Plan, grasp: &GraspConfig, eps: f64) -> Result<CertificationReport> {
    let surfaces = grasp.surfaces()?;
    let model = MarginModel::for_surfaces(&surfaces);
    let mut margins = Vec::with_capacity(plan.twists.len());
    let mut ok = true;
    let mut worst: Option<f64> = None;
    for (t, v) in plan.twists.iter().enumerate() {
        if v.is_zero() {
            margins.push(None);
            continue;
        }
        let theta = plan.predicted_states[t].static_pose().theta;
        let u = v.rotated(theta);
        let value = model.certified(&u, &surfaces)?;
        ok &= value <= -eps + 1e-9;
        worst = Some(worst.map_or(value, |w| w.max(value)));
        margins.push(Some(value));
    }
    Ok(CertificationReport { ok, margins, worst })
}

/// Expose each step's constraint family margin for reporting tools.
pub fn step_margin(
    v: &Twist,
    theta_static: f64,
    grasp: &GraspConfig,
) -> Result<Option<ConstraintMargin>> {
    if v.is_zero() {
        return Ok(None);
    }
    let surfaces = grasp.surfaces()?;
    let model = MarginModel::for_surfaces(&surfaces);
    let u = v.rotated(theta_static);
    let value = model.certified(&u, &surfaces)?;
    let kind = match model {
        MarginModel::EqualRadius { .. } => crate::limit_surface::MarginKind::SocEqualRadius,
        MarginModel::Decomposed => crate::limit_surface::MarginKind::DecomposedSoc,
        MarginModel::QuadOnly => crate::limit_surface::MarginKind::TwistFull,
    };
    Ok(Some(ConstraintMargin::new(value, kind)))
}

/// Aggregate RMSE metrics of a rolled-out plan, per palm side.
#[derive(Debug, Clone)]
pub struct PlanMetrics {
    pub rmse_trans_left_mm: f64,
    pub rmse_rot_left_deg: f64,
    pub rmse_trans_right_mm: f64,
    pub rmse_rot_right_deg: f64,
    /// Raw per-waypoint errors backing the aggregates.
    pub samples: Vec<WaypointError>,
}

/// RMSE of the simulated waypoint errors against the plan's goals.
pub fn evaluate_plan(plan: &Plan, rollout: &RolloutResult, _s: &Scenario) -> PlanMetrics {
    let samples = rollout.waypoint_errors.clone();
    let n = samples.len().max(1) as f64;
    let rmse = |f: &dyn Fn(&WaypointError) -> f64| -> f64 {
        (samples.iter().map(|w| f(w) * f(w)).sum::<f64>() / n).sqrt()
    };
    let _ = plan;
    PlanMetrics {
        rmse_trans_left_mm: rmse(&|w| w.trans_left) * 1000.0,
        rmse_rot_left_deg: rmse(&|w| w.rot_left).to_degrees(),
        rmse_trans_right_mm: rmse(&|w| w.trans_right) * 1000.0,
        rmse_rot_right_deg: rmse(&|w| w.rot_right).to_degrees(),
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact_sim::rollout;
    use approx::assert_relative_eq;

    fn desk_grasp(incline_deg: f64) -> GraspConfig {
        GraspConfig {
            mass: 0.5,
            gravity: 9.81,
            incline_phi: incline_deg.to_radians(),
            downhill_alpha: -std::f64::consts::FRAC_PI_2,
            squeeze_force: 10.0,
            mu_static_palm: 0.5,
            mu_moving_palm: 0.5,
            radius_static_palm: 0.05,
            radius_moving_palm: 0.05,
            palm_radius: 0.10,
            pressure_constant: 0.6,
        }
    }

    fn scenario(incline_deg: f64, goal_left: PlanarPose, goal_right: PlanarPose) -> Scenario {
        Scenario {
            start_left: PlanarPose::identity(),
            start_right: PlanarPose::identity(),
            goal_left,
            goal_right,
            grasp: desk_grasp(incline_deg),
            waypoints: Vec::new(),
        }
    }

    #[test]
    fn leg_gradient_matches_finite_differences() {
        let grasp = desk_grasp(30.0);
        let surfaces = grasp.surfaces().unwrap();
        let model = MarginModel::for_surfaces(&surfaces);
        let problem = LegProblem {
            surfaces: &surfaces,
            model,
            horizon: 4,
            start_left: PlanarPose::new(0.001, -0.002, 0.01),
            start_right: PlanarPose::new(-0.003, 0.001, -0.02),
            goal_left: PlanarPose::new(0.004, 0.006, 0.05),
            goal_right: PlanarPose::new(-0.005, 0.004, -0.04),
            palm_radius: 0.1,
            max_step_trans: 0.005,
            max_step_rot: 0.05,
            eps_solver: 2e-4,
        };

        let z: Vec<f64> = (0..12)
            .map(|i| 0.0015 * ((i as f64) * 0.7).sin() + 0.0005)
            .collect();
        let w_eq: Vec<f64> = (0..6).map(|i| 0.3 + 0.1 * i as f64).collect();
        let w_ineq: Vec<f64> = (0..problem.num_ineq())
            .map(|i| 0.05 + 0.02 * ((i % 7) as f64))
            .collect();

        let mut grad = vec![0.0; 12];
        problem.weighted_gradient(&z, &w_eq, &w_ineq, &mut grad);

        let mut h = vec![0.0; 6];
        let mut g = vec![0.0; problem.num_ineq()];
        let weighted = |z: &[f64], h: &mut [f64], g: &mut [f64]| -> f64 {
            let f = problem.eval(z, h, g);
            f + h.iter().zip(&w_eq).map(|(a, b)| a * b).sum::<f64>()
                + g.iter().zip(&w_ineq).map(|(a, b)| a * b).sum::<f64>()
        };
        for i in 0..12 {
            let hstep = 1e-7;
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += hstep;
            zm[i] -= hstep;
            let fp = weighted(&zp, &mut h, &mut g);
            let fm = weighted(&zm, &mut h, &mut g);
            let fd = (fp - fm) / (2.0 * hstep);
            assert!(
                (grad[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                "grad[{i}] = {} vs fd {}",
                grad[i],
                fd
            );
        }
    }

    #[test]
    fn trivial_scenario_yields_zero_plan() {
        let s = scenario(20.0, PlanarPose::identity(), PlanarPose::identity());
        let cfg = SolverConfig::default();
        let plan = plan(&s, &cfg).unwrap();
        assert!(plan.converged);
        assert!(plan.twists.iter().all(|v| v.is_zero()));
        assert!(plan.objective_value.abs() < 1e-12);
    }

    #[test]
    fn horizontal_translation_reaches_goal_through_oracle() {
        let goal = PlanarPose::new(0.02, 0.0, 0.0);
        let s = scenario(0.0, goal, goal);
        let cfg = SolverConfig::default();
        let p = plan(&s, &cfg).unwrap();
        assert!(p.converged, "violation {:.3e}", p.stats.max_violation);
        for m in p.margins.iter().flatten() {
            assert!(*m < 0.0);
        }

        let result = rollout(&p, &s.initial_state(), &s.grasp).unwrap();
        assert_eq!(result.slip_events, 0);
        assert!(result.final_error_left.0 <= 1e-6);
        assert!(result.final_error_left.1 <= 1e-6);
        assert!(result.final_error_right.0 <= 1e-6);

        // Slip-free rollout reproduces the predicted states bit-exactly.
        for (sim, pred) in result.states.iter().zip(&p.predicted_states) {
            assert_eq!(sim.pose_obj_in_left, pred.pose_obj_in_left);
            assert_eq!(sim.pose_obj_in_right, pred.pose_obj_in_right);
        }
    }

    #[test]
    fn alternation_freezes_the_moving_side() {
        let goal = PlanarPose::new(0.01, 0.005, 0.1);
        let s = scenario(20.0, goal, goal);
        let p = plan(&s, &SolverConfig::default()).unwrap();
        for (t, pair) in p.predicted_states.windows(2).enumerate() {
            match Phase::for_step(t) {
                Phase::LeftMoves => {
                    assert_eq!(pair[0].pose_obj_in_left, pair[1].pose_obj_in_left);
                }
                Phase::RightMoves => {
                    assert_eq!(pair[0].pose_obj_in_right, pair[1].pose_obj_in_right);
                }
            }
        }
    }

    #[test]
    fn baseline_examples() {
        let s = scenario(20.0, PlanarPose::identity(), PlanarPose::identity());
        let cfg = SolverConfig::default();
        let b = baseline_plan(&s, &cfg).unwrap();
        assert!(b.twists.iter().all(|v| v.is_zero()));

        // A 3 cm left-relative displacement over 6 steps puts 1 cm on
        // each of the three odd (right-moves) steps.
        let mut cfg6 = cfg;
        cfg6.horizon_n = 6;
        let s = scenario(0.0, PlanarPose::new(0.03, 0.0, 0.0), PlanarPose::identity());
        let b = baseline_plan(&s, &cfg6).unwrap();
        for (t, v) in b.twists.iter().enumerate() {
            if t % 2 == 1 {
                assert_relative_eq!(v.vx, 0.01, epsilon = 1e-12);
                assert_relative_eq!(v.vy, 0.0, epsilon = 1e-12);
            } else {
                assert!(v.is_zero());
            }
        }
    }

    #[test]
    fn steep_uphill_curves_while_baseline_violates() {
        // Goal with a strong uphill component at 45 degrees: the planner
        // must curve (zig-zag) to keep the margins, while the straight
        // baseline violates them.
        let goal_l = PlanarPose::new(0.006, 0.006, 0.0);
        let goal_r = PlanarPose::new(-0.006, 0.006, 0.0);
        let s = scenario(45.0, goal_l, goal_r);
        let cfg = SolverConfig::default();

        let ours = plan(&s, &cfg).unwrap();
        assert!(ours.converged, "violation {:.3e}", ours.stats.max_violation);
        let cert = certify_plan(&ours, &s.grasp, cfg.slip_margin_eps).unwrap();
        assert!(cert.ok);

        let base = baseline_plan(&s, &cfg).unwrap();
        let worst = certify_plan(&base, &s.grasp, cfg.slip_margin_eps)
            .unwrap()
            .worst
            .unwrap();
        assert!(worst > 0.0, "baseline should violate, worst {worst}");
    }

    #[test]
    fn merit_history_is_monotone_within_inner_solves() {
        let goal = PlanarPose::new(0.0, 0.01, 0.0);
        let s = scenario(30.0, goal, goal);
        let p = plan(&s, &SolverConfig::default()).unwrap();
        assert!(!p.stats.merit_history.is_empty());
        for (start, end) in &p.stats.merit_history {
            assert!(
                end <= &(start + 1e-9 * (1.0 + start.abs())),
                "merit rose within an inner solve: {start} -> {end}"
            );
        }
    }

    #[test]
    fn rejects_goal_outside_workspace() {
        let s = scenario(20.0, PlanarPose::new(0.2, 0.0, 0.0), PlanarPose::identity());
        assert!(matches!(
            plan(&s, &SolverConfig::default()),
            Err(Error::GoalOutsideWorkspace(..))
        ));
    }

    #[test]
    fn evaluate_plan_three_four_five() {
        // A single waypoint missed by (3, 4) mm and 0 deg gives a 5 mm
        // translational RMSE.
        let s = scenario(20.0, PlanarPose::identity(), PlanarPose::identity());
        let p = Plan::from_twists(
            Vec::new(),
            &s.initial_state(),
            s.goal_left,
            s.goal_right,
        );
        let rollout = crate::contact_sim::RolloutResult {
            states: vec![s.initial_state()],
            modes: Vec::new(),
            residual_norms: Vec::new(),
            slip_events: 0,
            workspace_exits: 0,
            waypoint_errors: vec![WaypointError {
                state_index: 0,
                trans_left: (0.003f64.powi(2) + 0.004f64.powi(2)).sqrt(),
                rot_left: 0.0,
                trans_right: 0.0,
                rot_right: 0.0,
            }],
            final_error_left: (0.005, 0.0),
            final_error_right: (0.0, 0.0),
        };
        let m = evaluate_plan(&p, &rollout, &s);
        assert_relative_eq!(m.rmse_trans_left_mm, 5.0, epsilon = 1e-12);
        assert_relative_eq!(m.rmse_rot_left_deg, 0.0);
        assert_relative_eq!(m.rmse_trans_right_mm, 0.0);
    }
}
