//! Planar pose algebra, contact-frame twists and wrenches, and gravity
//! decomposition for an inclined grasp.
//!
//! Conventions, fixed once here and asserted in tests:
//!
//! - A contact frame has its z-axis along the contact normal, pointing
//!   from the palm into the object; x and y span the palm plane.
//! - Twists carry per-step units (displacement per planner step), not
//!   per-second. Quasi-static motion makes the time parametrization
//!   irrelevant.
//! - Angles are stored wrapped to (-pi, pi].
//! - The in-plane downhill direction is given as an angle `alpha` in the
//!   contact frame; together with the incline `phi` it fully determines
//!   the gravity load on a planar patch.

use crate::{Error, Result};

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = theta.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// A planar pose (x, y, theta) of one frame relative to another.
///
/// `theta` is always wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPose {
    /// Translation along the reference frame x-axis [m].
    pub x: f64,
    /// Translation along the reference frame y-axis [m].
    pub y: f64,
    /// Rotation about the contact normal [rad], in (-pi, pi].
    pub theta: f64,
}

impl PlanarPose {
    /// Create a pose, wrapping `theta` into (-pi, pi].
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    /// The identity pose.
    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    /// Standard SE(2) composition `self * other`.
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        let (s, c) = self.theta.sin_cos();
        PlanarPose::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    /// The inverse pose, so that `p.compose(&p.inverse())` is identity.
    pub fn inverse(&self) -> PlanarPose {
        let (s, c) = self.theta.sin_cos();
        PlanarPose::new(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.theta)
    }

    /// Advance the pose by one step of `twist`.
    ///
    /// The twist is expressed in the frame rotated by `self.theta` (the
    /// contact patch co-rotates with the object), so the translation is
    /// rotated before being added:
    /// `x' = x + R_z(theta) (v_x, v_y)`, `theta' = theta + omega`.
    pub fn integrate(&self, twist: &Twist) -> PlanarPose {
        let (s, c) = self.theta.sin_cos();
        PlanarPose::new(
            self.x + c * twist.vx - s * twist.vy,
            self.y + s * twist.vx + c * twist.vy,
            self.theta + twist.omega,
        )
    }

    /// Euclidean norm of the translation component [m].
    pub fn translation_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Component-wise difference `self - goal` with the angle wrapped.
    pub fn error_to(&self, goal: &PlanarPose) -> (f64, f64, f64) {
        (
            self.x - goal.x,
            self.y - goal.y,
            wrap_angle(self.theta - goal.theta),
        )
    }
}

/// A planar twist (v_x, v_y, omega_z) expressed in a contact frame.
///
/// Units are meters and radians per planner step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    /// Velocity along the contact frame x-axis [m/step].
    pub vx: f64,
    /// Velocity along the contact frame y-axis [m/step].
    pub vy: f64,
    /// Angular velocity about the contact normal [rad/step].
    pub omega: f64,
}

impl Twist {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn zero() -> Self {
        Self {
            vx: 0.0,
            vy: 0.0,
            omega: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.omega == 0.0
    }

    /// All components finite (no NaN or infinities).
    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    /// Rotate the translational part by `theta`; omega is unchanged.
    pub fn rotated(&self, theta: f64) -> Twist {
        let (s, c) = theta.sin_cos();
        Twist::new(c * self.vx - s * self.vy, s * self.vx + c * self.vy, self.omega)
    }

    pub fn scaled(&self, k: f64) -> Twist {
        Twist::new(k * self.vx, k * self.vy, k * self.omega)
    }

    pub fn sub(&self, other: &Twist) -> Twist {
        Twist::new(self.vx - other.vx, self.vy - other.vy, self.omega - other.omega)
    }

    pub fn norm_inf(&self) -> f64 {
        self.vx.abs().max(self.vy.abs()).max(self.omega.abs())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.omega]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// A planar friction wrench (f_x, f_y, m_z) expressed in a contact frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    /// Force along the contact frame x-axis [N].
    pub fx: f64,
    /// Force along the contact frame y-axis [N].
    pub fy: f64,
    /// Moment about the contact normal [N m].
    pub mz: f64,
}

impl Wrench {
    pub fn new(fx: f64, fy: f64, mz: f64) -> Self {
        Self { fx, fy, mz }
    }

    pub fn zero() -> Self {
        Self {
            fx: 0.0,
            fy: 0.0,
            mz: 0.0,
        }
    }

    pub fn add(&self, other: &Wrench) -> Wrench {
        Wrench::new(self.fx + other.fx, self.fy + other.fy, self.mz + other.mz)
    }

    pub fn neg(&self) -> Wrench {
        Wrench::new(-self.fx, -self.fy, -self.mz)
    }

    pub fn norm(&self) -> f64 {
        (self.fx * self.fx + self.fy * self.fy + self.mz * self.mz).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.fx.abs().max(self.fy.abs()).max(self.mz.abs())
    }

    /// Inner product with a twist, pairing force with velocity and moment
    /// with angular rate [N m / step].
    pub fn dot_twist(&self, v: &Twist) -> f64 {
        self.fx * v.vx + self.fy * v.vy + self.mz * v.omega
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.fx, self.fy, self.mz]
    }
}

/// Gravity acting on the grasped object, split in the contact frame into
/// a tangential wrench and a normal-force contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityLoad {
    /// In-plane gravity wrench [N]; its moment component is always zero
    /// because gravity acts through the patch center.
    pub tangential: Wrench,
    /// Gravity component along the contact normal [N]. Positive for the
    /// palm underneath the object.
    pub normal: f64,
}

impl GravityLoad {
    /// Zero-gravity load (or a horizontal grasp's tangential part).
    pub fn zero() -> Self {
        Self {
            tangential: Wrench::zero(),
            normal: 0.0,
        }
    }

    /// Decompose the gravity force `m g` for a grasp inclined by `phi`
    /// from horizontal, with the in-plane downhill direction at angle
    /// `alpha` in the contact frame.
    ///
    /// The tangential part has magnitude `m g sin(phi)` along `alpha`,
    /// and the normal part is `m g cos(phi)`.
    pub fn from_incline(mass: f64, gravity: f64, phi: f64, alpha: f64) -> Result<Self> {
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::InvalidParameter(format!("mass {mass} must be > 0")));
        }
        if !gravity.is_finite() || gravity <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gravity {gravity} must be > 0"
            )));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&phi) {
            return Err(Error::InvalidIncline(phi));
        }
        let tangential_mag = mass * gravity * phi.sin();
        let (sa, ca) = alpha.sin_cos();
        Ok(Self {
            tangential: Wrench::new(tangential_mag * ca, tangential_mag * sa, 0.0),
            normal: mass * gravity * phi.cos(),
        })
    }

    /// Magnitude of the tangential component [N].
    pub fn tangential_norm(&self) -> f64 {
        self.tangential.fx.hypot(self.tangential.fy)
    }
}
