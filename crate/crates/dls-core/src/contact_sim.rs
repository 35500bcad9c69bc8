//! Quasi-static stick/slip simulator for the bimanual grasp.
//!
//! Given a commanded per-step twist, the simulator decides which contact
//! mode is consistent (moving palm sticks and object slides on the static
//! palm, everything sticks, or the moving-palm contact slips), then
//! integrates the two relative object poses. It shares the pose
//! integrator with the planner, so planned and simulated trajectories
//! agree exactly when no slip occurs; slip is the only divergence source.
//!
//! Frame conventions:
//!
//! - Each palm's contact frame has z along the contact normal into the
//!   object. The two frames are mirror images about the in-plane downhill
//!   axis, so the downhill angle `alpha` has the same value in both. All
//!   margins are invariant under that mirror (isotropic friction), so each
//!   phase evaluates its mechanics in its own static-palm frame directly.
//! - Commanded twists are expressed in the frame co-rotated with the
//!   object over the static palm (the planner's convention). [`step`]
//!   rotates them by the current relative orientation before evaluating
//!   contact-frame mechanics.
//! - The moving palm is under the object, so it carries the squeeze force
//!   plus the normal component of gravity.

use crate::frames::{GravityLoad, PlanarPose, Twist, Wrench};
use crate::limit_surface::{
    boundary_residual, slip_free_wrench_margin, twist_to_wrench, EllipsoidMatrix,
    LimitSurfaceParams,
};
use crate::planner::{Plan, WaypointError};
use crate::{Error, Result};

use nalgebra::{Matrix3, Vector3};

/// Physical description of the grasp used by both simulator and planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspConfig {
    /// Object mass [kg].
    pub mass: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Grasp incline from horizontal [rad], in [0, pi/2).
    pub incline_phi: f64,
    /// In-plane downhill direction [rad] in the static palm's contact
    /// frame (shared by both palms under the mirror convention).
    pub downhill_alpha: f64,
    /// Squeeze force applied across the grasp [N].
    pub squeeze_force: f64,
    /// Friction coefficient at the static-palm contact.
    pub mu_static_palm: f64,
    /// Friction coefficient at the moving-palm contact.
    pub mu_moving_palm: f64,
    /// Patch radius at the static-palm contact [m].
    pub radius_static_palm: f64,
    /// Patch radius at the moving-palm contact [m].
    pub radius_moving_palm: f64,
    /// Radius of the palm workspace disc [m].
    pub palm_radius: f64,
    /// Pressure distribution constant, in (0, 1].
    pub pressure_constant: f64,
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} {v} must be > 0")))
            }
        };
        positive("mass", self.mass)?;
        positive("gravity", self.gravity)?;
        positive("squeeze_force", self.squeeze_force)?;
        positive("mu_static_palm", self.mu_static_palm)?;
        positive("mu_moving_palm", self.mu_moving_palm)?;
        positive("radius_static_palm", self.radius_static_palm)?;
        positive("radius_moving_palm", self.radius_moving_palm)?;
        positive("palm_radius", self.palm_radius)?;
        positive("pressure_constant", self.pressure_constant)?;
        if self.pressure_constant > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "pressure_constant {} must be in (0, 1]",
                self.pressure_constant
            )));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.incline_phi) {
            return Err(Error::InvalidIncline(self.incline_phi));
        }
        if !self.downhill_alpha.is_finite() {
            return Err(Error::InvalidParameter("downhill_alpha not finite".into()));
        }
        Ok(())
    }

    /// Build the per-phase contact surfaces and gravity load.
    pub fn surfaces(&self) -> Result<ContactSurfaces> {
        self.validate()?;
        let (n_static, n_moving) = normal_forces(self);
        let a = EllipsoidMatrix::from_params(&LimitSurfaceParams::new(
            self.mu_static_palm,
            n_static,
            self.radius_static_palm,
            self.pressure_constant,
        )?);
        let b = EllipsoidMatrix::from_params(&LimitSurfaceParams::new(
            self.mu_moving_palm,
            n_moving,
            self.radius_moving_palm,
            self.pressure_constant,
        )?);
        let gl = GravityLoad::from_incline(
            self.mass,
            self.gravity,
            self.incline_phi,
            self.downhill_alpha,
        )?;
        Ok(ContactSurfaces {
            a,
            b,
            gravity: gl,
            normal_static: n_static,
            normal_moving: n_moving,
            c_ratio: (n_static / n_moving).powi(2),
            matched_patches: self.mu_static_palm == self.mu_moving_palm
                && self.radius_static_palm == self.radius_moving_palm,
        })
    }
}

/// Normal forces carried by the two contacts: the static (upper) palm
/// carries the squeeze force, the moving palm underneath carries the
/// squeeze force plus the normal component of gravity.
pub fn normal_forces(cfg: &GraspConfig) -> (f64, f64) {
    let n_static = cfg.squeeze_force;
    let n_moving = cfg.squeeze_force + cfg.mass * cfg.gravity * cfg.incline_phi.cos();
    (n_static, n_moving)
}

/// Precomputed limit surfaces and gravity load for one phase. The same
/// pair applies to every phase because the moving palm is always the one
/// underneath.
#[derive(Debug, Clone, Copy)]
pub struct ContactSurfaces {
    /// Limit surface of the static-palm contact (the object slides here).
    pub a: EllipsoidMatrix,
    /// Limit surface of the moving-palm contact (must keep sticking).
    pub b: EllipsoidMatrix,
    /// Gravity load in the static palm's contact frame.
    pub gravity: GravityLoad,
    /// Normal force at the static-palm contact [N].
    pub normal_static: f64,
    /// Normal force at the moving-palm contact [N].
    pub normal_moving: f64,
    /// Normal-force ratio `(N_a / N_b)^2`; relates `B = c A` when the
    /// patches match.
    pub c_ratio: f64,
    /// True when both contacts share friction coefficient and patch
    /// radius, so the equal-radius SOC margin applies.
    pub matched_patches: bool,
}

/// Which palm is which.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palm {
    Left,
    Right,
}

impl Palm {
    pub fn other(&self) -> Palm {
        match self {
            Palm::Left => Palm::Right,
            Palm::Right => Palm::Left,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Palm::Left => "left",
            Palm::Right => "right",
        }
    }
}

impl std::fmt::Display for Palm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Contact mode resolved for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMode {
    /// The intended regime: object sticks to the moving palm and slides
    /// on the static palm.
    StickMovingSlideStatic,
    /// The moving-palm contact cannot hold the commanded motion; the
    /// object slips there.
    SlipAtMoving,
    /// No commanded motion; both contacts stick.
    AllStick,
    /// Commanded twist below the numeric floor; treated as no motion.
    Degenerate,
}

impl ContactMode {
    pub fn name(&self) -> &'static str {
        match self {
            ContactMode::StickMovingSlideStatic => "stick-slide",
            ContactMode::SlipAtMoving => "slip-at-moving",
            ContactMode::AllStick => "all-stick",
            ContactMode::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for ContactMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Relative object poses and whose turn it is to move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    /// Object pose relative to the left palm.
    pub pose_obj_in_left: PlanarPose,
    /// Object pose relative to the right palm.
    pub pose_obj_in_right: PlanarPose,
    /// The palm that moves in the next step.
    pub moving_palm: Palm,
}

impl SimState {
    pub fn new(pose_obj_in_left: PlanarPose, pose_obj_in_right: PlanarPose, moving_palm: Palm) -> Self {
        Self {
            pose_obj_in_left,
            pose_obj_in_right,
            moving_palm,
        }
    }

    /// Pose relative to the palm that stays static in the next step.
    pub fn static_pose(&self) -> &PlanarPose {
        match self.moving_palm {
            Palm::Left => &self.pose_obj_in_right,
            Palm::Right => &self.pose_obj_in_left,
        }
    }

    pub fn pose_for(&self, palm: Palm) -> &PlanarPose {
        match palm {
            Palm::Left => &self.pose_obj_in_left,
            Palm::Right => &self.pose_obj_in_right,
        }
    }
}

/// Commanded twists below this infinity norm are treated as no motion.
const TWIST_FLOOR: f64 = 1e-12;

/// Residual tolerance for the dual-slide root finder [N].
const SLIP_RESIDUAL_TOL: f64 = 1e-10;

/// Decide the contact mode for a commanded twist expressed in the contact
/// frame (the same frame `downhill_alpha` lives in).
///
/// Hypothesis: the object slides on the static palm with twist `v_cmd`,
/// producing the boundary wrench `w_a`; quasi-static balance then demands
/// `w_b = -w_a - g_f` at the moving palm. If the slippage-free wrench
/// margin is negative the hypothesis holds; otherwise the moving contact
/// slips. Returns the hypothesized wrench pair for inspection (zeros when
/// nothing moves).
pub fn check_mode(v_cmd: &Twist, cfg: &GraspConfig) -> Result<(ContactMode, Wrench, Wrench)> {
    Ok(cfg.surfaces()?.check_mode(v_cmd))
}

/// Resolve the object twist when the moving-palm contact slips; see
/// [`ContactSurfaces::resolve_slip`].
pub fn resolve_slip_twist(v_palm: &Twist, cfg: &GraspConfig) -> Result<Twist> {
    cfg.surfaces()?.resolve_slip(v_palm)
}

impl ContactSurfaces {
    /// Mode decision on precomputed surfaces; see [`check_mode`].
    pub fn check_mode(&self, v_cmd: &Twist) -> (ContactMode, Wrench, Wrench) {
        if v_cmd.is_zero() {
            return (ContactMode::AllStick, Wrench::zero(), Wrench::zero());
        }
        if v_cmd.norm_inf() < TWIST_FLOOR {
            return (ContactMode::Degenerate, Wrench::zero(), Wrench::zero());
        }
        let w_a = twist_to_wrench(&self.a, v_cmd).expect("nonzero twist");
        let w_b = w_a.neg().add(&self.gravity.tangential.neg());
        let margin = slip_free_wrench_margin(&w_a, &self.a, &self.b, &self.gravity);
        let mode = if margin.value < 0.0 {
            ContactMode::StickMovingSlideStatic
        } else {
            ContactMode::SlipAtMoving
        };
        (mode, w_a, w_b)
    }

    /// Force-balance residual when both contacts slide: the object moves
    /// with twist `u` over the static palm and with `u - v_palm` relative
    /// to the moving palm, each contact transmitting its boundary wrench.
    /// `None` within the numeric floor around the singular points `u = 0`
    /// and `u = v_palm`.
    pub fn dual_slide_residual(&self, u: &Twist, v_palm: &Twist) -> Option<Wrench> {
        let rel = u.sub(v_palm);
        if u.norm_inf() < TWIST_FLOOR || rel.norm_inf() < TWIST_FLOOR {
            return None;
        }
        let w_a = twist_to_wrench(&self.a, u).ok()?;
        let w_b = twist_to_wrench(&self.b, &rel).ok()?;
        Some(w_a.add(&w_b).add(&self.gravity.tangential))
    }

    /// Object twist when the moving-palm contact slips under palm twist
    /// `v_palm` (contact frame).
    ///
    /// Candidate modes, in order:
    ///
    /// 1. if `v_palm` itself satisfies the sticking hypothesis, it is
    ///    returned unchanged (boundary consistency with the mode check);
    /// 2. the object may stick to the static palm while the moving palm
    ///    slides underneath: consistent iff the balancing static wrench
    ///    lies strictly inside the `A` surface, in which case the object
    ///    twist is zero;
    /// 3. otherwise both contacts slide and the twist solves the
    ///    three-dimensional force balance by damped Newton iteration with
    ///    multiple starts (near `v_palm`, near zero, and along the
    ///    downhill direction; the exact points are singular and are
    ///    offset slightly).
    pub fn resolve_slip(&self, v_palm: &Twist) -> Result<Twist> {
        if v_palm.norm_inf() < TWIST_FLOOR {
            return Ok(Twist::zero());
        }

        // Candidate 1: sticking at the moving palm actually holds.
        let (mode, _, _) = self.check_mode(v_palm);
        if mode == ContactMode::StickMovingSlideStatic {
            return Ok(*v_palm);
        }

        // Candidate 2: object sticks to the static palm (zero object
        // twist) while the moving palm slides underneath.
        let w_b = twist_to_wrench(&self.b, &v_palm.scaled(-1.0)).expect("nonzero twist");
        let w_a_needed = w_b.neg().add(&self.gravity.tangential.neg());
        if boundary_residual(&self.a, &w_a_needed) < 0.0 {
            return Ok(Twist::zero());
        }

        // Candidate 3: dual slide.
        let scale = v_palm.norm_inf();
        let (sa, ca) = self.downhill().sin_cos();
        let downhill = Twist::new(ca * scale, sa * scale, 0.0);
        let starts = [
            v_palm.scaled(0.5),
            downhill.scaled(0.5),
            v_palm.scaled(0.9),
            Twist::new(
                0.25 * v_palm.vx + 0.5 * downhill.vx,
                0.25 * v_palm.vy + 0.5 * downhill.vy,
                0.25 * v_palm.omega,
            ),
            v_palm.scaled(1.5),
            downhill.scaled(0.1),
        ];

        let mut best_residual = f64::INFINITY;
        for start in starts {
            match self.damped_newton(&start, v_palm) {
                NewtonOutcome::Converged(u) => return Ok(u),
                NewtonOutcome::Stalled(residual) => best_residual = best_residual.min(residual),
            }
        }
        Err(Error::SlipSolverFailure { best_residual })
    }

    fn downhill(&self) -> f64 {
        self.gravity
            .tangential
            .fy
            .atan2(self.gravity.tangential.fx)
    }

    fn damped_newton(&self, start: &Twist, v_palm: &Twist) -> NewtonOutcome {
        let mut u = *start;
        let mut best = f64::INFINITY;
        let Some(mut f) = self.dual_slide_residual(&u, v_palm) else {
            return NewtonOutcome::Stalled(best);
        };
        for _ in 0..80 {
            let fnorm = f.norm_inf();
            best = best.min(fnorm);
            if fnorm < SLIP_RESIDUAL_TOL {
                return NewtonOutcome::Converged(u);
            }

            let Some(jac) = self.residual_jacobian(&u, v_palm) else {
                return NewtonOutcome::Stalled(best);
            };
            let rhs = Vector3::new(-f.fx, -f.fy, -f.mz);
            let dir = match jac.lu().solve(&rhs) {
                Some(d) => d,
                None => rhs, // singular Jacobian: fall back to a residual step
            };

            // Backtracking line search on the residual norm.
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-12 {
                let trial = Twist::new(
                    u.vx + alpha * dir[0],
                    u.vy + alpha * dir[1],
                    u.omega + alpha * dir[2],
                );
                if let Some(ft) = self.dual_slide_residual(&trial, v_palm) {
                    if ft.norm_inf() < (1.0 - 1e-4 * alpha) * fnorm {
                        u = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return NewtonOutcome::Stalled(best);
            }
        }
        NewtonOutcome::Stalled(best)
    }

    /// Central finite-difference Jacobian of the dual-slide residual.
    fn residual_jacobian(&self, u: &Twist, v_palm: &Twist) -> Option<Matrix3<f64>> {
        let mut jac = Matrix3::zeros();
        let ua = u.as_array();
        for j in 0..3 {
            let h = 1e-7 * (1.0 + ua[j].abs());
            let mut up = ua;
            let mut um = ua;
            up[j] += h;
            um[j] -= h;
            let fp = self.dual_slide_residual(&Twist::from_array(up), v_palm)?;
            let fm = self.dual_slide_residual(&Twist::from_array(um), v_palm)?;
            let scale = 0.5 / h;
            jac[(0, j)] = (fp.fx - fm.fx) * scale;
            jac[(1, j)] = (fp.fy - fm.fy) * scale;
            jac[(2, j)] = (fp.mz - fm.mz) * scale;
        }
        Some(jac)
    }
}

enum NewtonOutcome {
    Converged(Twist),
    Stalled(f64),
}

/// Reflect a twist between the two palm frames: the frames are mirror
/// images about the downhill axis, so the translation reflects about that
/// axis and the angular rate changes sign. The map is an involution.
pub fn mirror_twist(alpha: f64, v: &Twist) -> Twist {
    let (s2, c2) = (2.0 * alpha).sin_cos();
    Twist::new(
        c2 * v.vx + s2 * v.vy,
        s2 * v.vx - c2 * v.vy,
        -v.omega,
    )
}

/// Per-step record emitted by [`step`].
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub mode: ContactMode,
    /// Force balance residual at the resolved motion [N].
    pub residual_norm: f64,
    /// Object center left the palm workspace disc (flagged, not fatal).
    pub workspace_exit: bool,
}

/// Advance the state by one commanded step.
///
/// Under the stick-slide mode the pose relative to the static palm
/// integrates `v_cmd` (exactly the planner's update) and the pose
/// relative to the moving palm is untouched. Under slip, the resolved
/// object twist advances the static-side pose and the shortfall
/// `v_o - v_palm`, mirrored into the moving palm's frame, advances the
/// moving-side pose. The moving palm alternates on every step.
pub fn step(s: &SimState, v_cmd: &Twist, cfg: &GraspConfig) -> Result<(SimState, StepOutcome)> {
    let surfaces = cfg.surfaces()?;
    step_with(&surfaces, s, v_cmd, cfg.palm_radius)
}

/// [`step`] on precomputed surfaces.
pub fn step_with(
    surfaces: &ContactSurfaces,
    s: &SimState,
    v_cmd: &Twist,
    palm_radius: f64,
) -> Result<(SimState, StepOutcome)> {
    let theta_static = s.static_pose().theta;
    let v_contact = v_cmd.rotated(theta_static);
    let (mode, _, _) = surfaces.check_mode(&v_contact);

    let mut next = *s;
    let mut residual_norm = 0.0;

    match mode {
        ContactMode::AllStick | ContactMode::Degenerate => {}
        ContactMode::StickMovingSlideStatic => {
            let advanced = s.static_pose().integrate(v_cmd);
            match s.moving_palm {
                Palm::Left => next.pose_obj_in_right = advanced,
                Palm::Right => next.pose_obj_in_left = advanced,
            }
        }
        ContactMode::SlipAtMoving => {
            let v_obj = surfaces.resolve_slip(&v_contact)?;
            if let Some(f) = surfaces.dual_slide_residual(&v_obj, &v_contact) {
                residual_norm = f.norm();
            }

            // Static side: advance by the resolved object twist.
            if v_obj.norm_inf() >= TWIST_FLOOR {
                let advanced = s.static_pose().integrate(&v_obj.rotated(-theta_static));
                match s.moving_palm {
                    Palm::Left => next.pose_obj_in_right = advanced,
                    Palm::Right => next.pose_obj_in_left = advanced,
                }
            }

            // Moving side: the object falls short of the palm by
            // v_obj - v_palm; express it in that palm's frame.
            let shortfall = v_obj.sub(&v_contact);
            if shortfall.norm_inf() >= TWIST_FLOOR {
                let alpha = surfaces
                    .gravity
                    .tangential
                    .fy
                    .atan2(surfaces.gravity.tangential.fx);
                let in_moving = mirror_twist(alpha, &shortfall);
                let theta_moving = s.pose_for(s.moving_palm).theta;
                let advanced = s
                    .pose_for(s.moving_palm)
                    .integrate(&in_moving.rotated(-theta_moving));
                match s.moving_palm {
                    Palm::Left => next.pose_obj_in_left = advanced,
                    Palm::Right => next.pose_obj_in_right = advanced,
                }
            }
        }
    }

    let workspace_exit = next.pose_obj_in_left.translation_norm() > palm_radius
        || next.pose_obj_in_right.translation_norm() > palm_radius;
    if workspace_exit {
        log::warn!(
            "object left the palm workspace: |left| = {:.4} m, |right| = {:.4} m, radius {:.4} m",
            next.pose_obj_in_left.translation_norm(),
            next.pose_obj_in_right.translation_norm(),
            palm_radius
        );
    }

    next.moving_palm = s.moving_palm.other();
    Ok((
        next,
        StepOutcome {
            mode,
            residual_norm,
            workspace_exit,
        },
    ))
}

/// Result of rolling a plan through the simulator.
#[derive(Debug, Clone)]
pub struct RolloutResult {
    /// Visited states; length is plan length + 1.
    pub states: Vec<SimState>,
    /// Resolved contact mode per step.
    pub modes: Vec<ContactMode>,
    /// Force balance residual per step [N].
    pub residual_norms: Vec<f64>,
    /// Steps whose mode differed from stick-slide under a nonzero command.
    pub slip_events: usize,
    /// Steps that left the workspace disc.
    pub workspace_exits: usize,
    /// Simulated errors at each of the plan's waypoints.
    pub waypoint_errors: Vec<WaypointError>,
    /// Final (translation [m], rotation [rad]) error of the left-palm
    /// relative pose against the plan's final goal.
    pub final_error_left: (f64, f64),
    /// Same for the right palm.
    pub final_error_right: (f64, f64),
}

/// Roll a plan out step by step, recording modes, slip events, and pose
/// errors against the plan's waypoint goals.
pub fn rollout(plan: &Plan, s0: &SimState, cfg: &GraspConfig) -> Result<RolloutResult> {
    let surfaces = cfg.surfaces()?;
    let mut states = Vec::with_capacity(plan.twists.len() + 1);
    let mut modes = Vec::with_capacity(plan.twists.len());
    let mut residual_norms = Vec::with_capacity(plan.twists.len());
    let mut slip_events = 0;
    let mut workspace_exits = 0;

    let mut state = *s0;
    states.push(state);
    for (t, v_cmd) in plan.twists.iter().enumerate() {
        let expected = plan.phases[t].moving_palm();
        if expected != state.moving_palm {
            return Err(Error::PhaseMismatch {
                expected: expected.name().to_string(),
                actual: state.moving_palm.name().to_string(),
            });
        }
        let (next, outcome) = step_with(&surfaces, &state, v_cmd, cfg.palm_radius)?;
        if outcome.mode != ContactMode::StickMovingSlideStatic && !v_cmd.is_zero() {
            slip_events += 1;
        }
        if outcome.workspace_exit {
            workspace_exits += 1;
        }
        modes.push(outcome.mode);
        residual_norms.push(outcome.residual_norm);
        state = next;
        states.push(state);
    }

    let waypoint_errors = plan
        .marks
        .iter()
        .map(|mark| {
            let s = &states[mark.state_index];
            let (lx, ly, lt) = s.pose_obj_in_left.error_to(&mark.goal_left);
            let (rx, ry, rt) = s.pose_obj_in_right.error_to(&mark.goal_right);
            WaypointError {
                state_index: mark.state_index,
                trans_left: lx.hypot(ly),
                rot_left: lt.abs(),
                trans_right: rx.hypot(ry),
                rot_right: rt.abs(),
            }
        })
        .collect::<Vec<_>>();

    let (final_error_left, final_error_right) = match waypoint_errors.last() {
        Some(w) => ((w.trans_left, w.rot_left), (w.trans_right, w.rot_right)),
        None => {
            // Empty plan: echo the initial pose errors if goals exist.
            ((0.0, 0.0), (0.0, 0.0))
        }
    };

    Ok(RolloutResult {
        states,
        modes,
        residual_norms,
        slip_events,
        workspace_exits,
        waypoint_errors,
        final_error_left,
        final_error_right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn desk_config(incline_deg: f64, squeeze: f64) -> GraspConfig {
        GraspConfig {
            mass: 0.5,
            gravity: 9.81,
            incline_phi: incline_deg.to_radians(),
            downhill_alpha: -std::f64::consts::FRAC_PI_2,
            squeeze_force: squeeze,
            mu_static_palm: 0.5,
            mu_moving_palm: 0.5,
            radius_static_palm: 0.05,
            radius_moving_palm: 0.05,
            palm_radius: 0.10,
            pressure_constant: 0.6,
        }
    }

    fn centered_state() -> SimState {
        SimState::new(PlanarPose::identity(), PlanarPose::identity(), Palm::Left)
    }

    #[test]
    fn normal_forces_examples() {
        let cfg = desk_config(0.0, 10.0);
        let (ns, nm) = normal_forces(&cfg);
        assert_relative_eq!(nm, 14.905, epsilon = 1e-12);
        assert_relative_eq!(ns, 10.0);

        let mut steep = desk_config(0.0, 10.0);
        steep.incline_phi = std::f64::consts::FRAC_PI_2 - 1e-9;
        let (ns, nm) = normal_forces(&steep);
        assert_relative_eq!(ns, 10.0);
        assert_relative_eq!(nm, 10.0, epsilon = 1e-6);

        let mut light = desk_config(20.0, 10.0);
        light.mass = 1e-12;
        let (ns, nm) = normal_forces(&light);
        assert_relative_eq!(ns, 10.0);
        assert_relative_eq!(nm, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn check_mode_zero_twist_all_stick() {
        let cfg = desk_config(20.0, 10.0);
        let (mode, wa, wb) = check_mode(&Twist::zero(), &cfg).unwrap();
        assert_eq!(mode, ContactMode::AllStick);
        assert_eq!(wa, Wrench::zero());
        assert_eq!(wb, Wrench::zero());
    }

    #[test]
    fn check_mode_horizontal_grasp_always_sticks() {
        // g_f = 0 and N_moving > N_static: B's surface strictly contains
        // A's, so any commanded twist keeps the moving contact sticking.
        let cfg = desk_config(0.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let v = Twist::new(
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.1..0.1),
            );
            if v.norm_inf() < 1e-6 {
                continue;
            }
            let (mode, _, _) = check_mode(&v, &cfg).unwrap();
            assert_eq!(mode, ContactMode::StickMovingSlideStatic);
        }
    }

    #[test]
    fn check_mode_uphill_at_45_low_squeeze_slips() {
        // Fixture found by grid search over the desk parameters: 45
        // degree incline, 4 N squeeze, 1 cm uphill command.
        let cfg = desk_config(45.0, 4.0);
        let uphill = Twist::new(0.0, 0.01, 0.0);
        let (mode, _, wb) = check_mode(&uphill, &cfg).unwrap();
        assert_eq!(mode, ContactMode::SlipAtMoving);
        // The balancing wrench lies outside the moving surface.
        let surfaces = cfg.surfaces().unwrap();
        assert!(crate::limit_surface::sticking_margin(&surfaces.b, &wb) > 0.0);
    }

    #[test]
    fn check_mode_agrees_with_wrench_margin() {
        let cfg = desk_config(35.0, 6.0);
        let surfaces = cfg.surfaces().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..500 {
            let v = Twist::new(
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.01..0.01),
                rng.gen_range(-0.1..0.1),
            );
            if v.norm_inf() < 1e-9 {
                continue;
            }
            let (mode, wa, _) = surfaces.check_mode(&v);
            let margin =
                slip_free_wrench_margin(&wa, &surfaces.a, &surfaces.b, &surfaces.gravity);
            assert_eq!(
                mode == ContactMode::StickMovingSlideStatic,
                margin.value < 0.0
            );
        }
    }

    #[test]
    fn resolve_slip_returns_palm_twist_when_sticking_holds() {
        let cfg = desk_config(0.0, 10.0);
        let surfaces = cfg.surfaces().unwrap();
        let v = Twist::new(0.004, -0.002, 0.01);
        let resolved = surfaces.resolve_slip(&v).unwrap();
        assert_eq!(resolved, v);
    }

    #[test]
    fn resolve_slip_sticks_at_static_when_consistent() {
        // Uphill palm motion: the moving palm slides underneath while the
        // object holds still against the static palm (the balancing
        // static wrench stays inside its surface).
        let cfg = desk_config(45.0, 4.0);
        let surfaces = cfg.surfaces().unwrap();
        let v = Twist::new(0.0, 0.01, 0.0);
        let (mode, _, _) = surfaces.check_mode(&v);
        assert_eq!(mode, ContactMode::SlipAtMoving);
        let u = surfaces.resolve_slip(&v).unwrap();
        assert!(u.is_zero());
        let w_b = twist_to_wrench(&surfaces.b, &v.scaled(-1.0)).unwrap();
        let w_a = w_b.neg().add(&surfaces.gravity.tangential.neg());
        assert!(crate::limit_surface::boundary_residual(&surfaces.a, &w_a) < 0.0);
    }

    #[test]
    fn resolve_slip_balances_forces() {
        // Sideways palm motion at a steep incline with low squeeze: the
        // balancing static wrench would leave its surface, so both
        // contacts slide and the twist comes from the root finder.
        let cfg = desk_config(45.0, 4.0);
        let surfaces = cfg.surfaces().unwrap();
        let v = Twist::new(0.01, 0.0, 0.0);
        let (mode, _, _) = surfaces.check_mode(&v);
        assert_eq!(mode, ContactMode::SlipAtMoving);
        let u = surfaces.resolve_slip(&v).unwrap();
        assert!(!u.is_zero(), "expected a dual-slide solution");
        let f = surfaces.dual_slide_residual(&u, &v).unwrap();
        assert!(f.norm() < 1e-8, "residual {} too large", f.norm());

        // The object drifts downhill relative to the palm command.
        assert!(u.vy < v.vy);

        // Dissipation is nonnegative at both contacts.
        let wa = twist_to_wrench(&surfaces.a, &u).unwrap();
        let rel = u.sub(&v);
        let wb = twist_to_wrench(&surfaces.b, &rel).unwrap();
        assert!(-wa.dot_twist(&u) >= 0.0);
        assert!(-wb.dot_twist(&rel) >= 0.0);
    }

    #[test]
    fn step_zero_twist_keeps_poses() {
        let cfg = desk_config(30.0, 10.0);
        let s = centered_state();
        let (next, outcome) = step(&s, &Twist::zero(), &cfg).unwrap();
        assert_eq!(outcome.mode, ContactMode::AllStick);
        assert_eq!(next.pose_obj_in_left, s.pose_obj_in_left);
        assert_eq!(next.pose_obj_in_right, s.pose_obj_in_right);
        assert_eq!(next.moving_palm, Palm::Right);
    }

    #[test]
    fn step_stick_slide_updates_static_side_only() {
        let cfg = desk_config(0.0, 10.0);
        let mut s = centered_state();
        s.moving_palm = Palm::Right; // static palm is the left one
        let v = Twist::new(0.003, 0.001, 0.02);
        let (next, outcome) = step(&s, &v, &cfg).unwrap();
        assert_eq!(outcome.mode, ContactMode::StickMovingSlideStatic);
        assert_eq!(next.pose_obj_in_right, s.pose_obj_in_right);
        assert_eq!(next.pose_obj_in_left, s.pose_obj_in_left.integrate(&v));
    }

    #[test]
    fn sticking_preserves_moving_pose_bit_exactly() {
        let cfg = desk_config(20.0, 10.0);
        let mut s = centered_state();
        s.pose_obj_in_left = PlanarPose::new(0.0123, -0.0456, 0.789);
        let before = s.pose_obj_in_left;
        // Left palm moves first: its relative pose must stay bit-exact.
        let v = Twist::new(0.0, -0.002, 0.01);
        let (next, _) = step(&s, &v, &cfg).unwrap();
        assert_eq!(next.pose_obj_in_left, before);
    }

    #[test]
    fn slip_step_kinematic_consistency() {
        let cfg = desk_config(45.0, 4.0);
        let s = centered_state();
        let v = Twist::new(0.01, 0.0, 0.0);
        let (next, outcome) = step(&s, &v, &cfg).unwrap();
        assert_eq!(outcome.mode, ContactMode::SlipAtMoving);
        assert!(outcome.residual_norm < 1e-8);

        // Both relative poses changed, and the displacement difference
        // (moving side mirrored back) equals the commanded palm motion.
        let d_static = (
            next.pose_obj_in_right.x - s.pose_obj_in_right.x,
            next.pose_obj_in_right.y - s.pose_obj_in_right.y,
            next.pose_obj_in_right.theta - s.pose_obj_in_right.theta,
        );
        let d_moving = Twist::new(
            next.pose_obj_in_left.x - s.pose_obj_in_left.x,
            next.pose_obj_in_left.y - s.pose_obj_in_left.y,
            next.pose_obj_in_left.theta - s.pose_obj_in_left.theta,
        );
        let back = mirror_twist(cfg.downhill_alpha, &d_moving);
        // theta is zero here so contact frame and pose frame coincide.
        assert_relative_eq!(d_static.0 - back.vx, v.vx, epsilon = 1e-9);
        assert_relative_eq!(d_static.1 - back.vy, v.vy, epsilon = 1e-9);
        assert_relative_eq!(d_static.2 - back.omega, v.omega, epsilon = 1e-9);
    }

    #[test]
    fn mirror_twist_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let alpha = rng.gen_range(-3.0..3.0);
            let v = Twist::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let back = mirror_twist(alpha, &mirror_twist(alpha, &v));
            assert_relative_eq!(back.vx, v.vx, epsilon = 1e-12);
            assert_relative_eq!(back.vy, v.vy, epsilon = 1e-12);
            assert_relative_eq!(back.omega, v.omega, epsilon = 1e-12);
        }
    }
}
