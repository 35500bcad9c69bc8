//! Ellipsoidal limit-surface friction model for patch contacts, and the
//! slippage-free constraint margins built on top of it.
//!
//! A patch contact with friction coefficient `mu`, normal force `N`, and
//! patch radius `r` can transmit any friction wrench `w = (f_x, f_y, m_z)`
//! inside the ellipsoid `w' A w <= 1`, with
//! `A = Diag{(mu N)^-2, (mu N)^-2, (mu c r N)^-2}` and `c` the pressure
//! distribution constant (0.6 for uniform pressure). While the object
//! slides with twist `v`, maximum dissipation pins the wrench to the
//! boundary: `w = -A^-1 v / sqrt(v' A^-1 v)`.
//!
//! Two such surfaces are analyzed jointly: `A` for the static-palm contact
//! (object slides there) and `B` for the moving-palm contact (object must
//! stick there). Every constraint in this module is exposed as a signed
//! margin: negative means slippage-free, positive means the moving-palm
//! contact would slip. The planner enforces `margin <= -eps` with a
//! configurable eps, since strict inequalities are not representable in
//! numerical solvers.
//!
//! One note on [`leading_coeff_margin`]: the high-load leading coefficient
//! admits two plausible middle factors (the scaled second surface or its
//! inverse). Fitting the full twist margin as a quartic in the second
//! contact's normal force confirms the non-inverted form, which is what
//! `leading_coeff_margin` computes; [`leading_coeff_margin_inverse_mid`]
//! keeps the inverted variant for diagnostic comparison (the fit rejects
//! it in general).

use crate::frames::{GravityLoad, Twist, Wrench};
use crate::{Error, Result};

/// Pressure distribution constant for a uniform pressure patch.
pub const UNIFORM_PRESSURE_CONSTANT: f64 = 0.6;

/// Physical parameters of one patch contact's friction model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSurfaceParams {
    /// Coulomb friction coefficient (unitless, > 0).
    pub mu: f64,
    /// Normal force pressing the patch together [N].
    pub normal_force: f64,
    /// Radius of the circular contact patch [m].
    pub patch_radius: f64,
    /// Torque-capacity factor of the pressure distribution, in (0, 1].
    pub pressure_constant: f64,
}

impl LimitSurfaceParams {
    pub fn new(mu: f64, normal_force: f64, patch_radius: f64, pressure_constant: f64) -> Result<Self> {
        let check = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} {v} must be > 0")))
            }
        };
        check("mu", mu)?;
        check("normal_force", normal_force)?;
        check("patch_radius", patch_radius)?;
        check("pressure_constant", pressure_constant)?;
        if pressure_constant > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "pressure_constant {pressure_constant} must be in (0, 1]"
            )));
        }
        Ok(Self {
            mu,
            normal_force,
            patch_radius,
            pressure_constant,
        })
    }

    /// Same parameters with the uniform-pressure constant.
    pub fn uniform(mu: f64, normal_force: f64, patch_radius: f64) -> Result<Self> {
        Self::new(mu, normal_force, patch_radius, UNIFORM_PRESSURE_CONSTANT)
    }
}

/// Diagonal matrix of the ellipsoidal limit surface `w' A w = 1`.
///
/// The first two entries are equal (isotropic friction); all entries are
/// strictly positive. Units: N^-2, N^-2, (N m)^-2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidMatrix {
    diag: [f64; 3],
}

impl EllipsoidMatrix {
    /// Build the surface matrix from physical parameters:
    /// `Diag{(mu N)^-2, (mu N)^-2, (mu c r N)^-2}`.
    pub fn from_params(p: &LimitSurfaceParams) -> Self {
        let tangential = (p.mu * p.normal_force).powi(-2);
        let rotational = (p.mu * p.pressure_constant * p.patch_radius * p.normal_force).powi(-2);
        Self {
            diag: [tangential, tangential, rotational],
        }
    }

    /// Build from explicit diagonal entries. The first two must be equal
    /// (isotropic friction) and all must be positive.
    pub fn from_diag(diag: [f64; 3]) -> Result<Self> {
        if diag.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid diagonal {diag:?} must be strictly positive"
            )));
        }
        if diag[0] != diag[1] {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid diagonal {diag:?} must have equal tangential entries"
            )));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> [f64; 3] {
        self.diag
    }

    /// The matrix scaled by `k > 0`. Scaling `N -> s N` corresponds to
    /// `k = s^-2`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::from_diag([k * self.diag[0], k * self.diag[1], k * self.diag[2]])
    }

    /// `w' A w` for a wrench.
    pub fn quad_wrench(&self, w: &Wrench) -> f64 {
        self.diag[0] * w.fx * w.fx + self.diag[1] * w.fy * w.fy + self.diag[2] * w.mz * w.mz
    }

    /// `v' A^-1 v` for a twist.
    pub fn inv_quad_twist(&self, v: &Twist) -> f64 {
        v.vx * v.vx / self.diag[0] + v.vy * v.vy / self.diag[1] + v.omega * v.omega / self.diag[2]
    }

    /// `A^-1 v` as a raw 3-vector (twist ordering).
    pub fn inv_apply(&self, v: [f64; 3]) -> [f64; 3] {
        [v[0] / self.diag[0], v[1] / self.diag[1], v[2] / self.diag[2]]
    }

    /// `A x` as a raw 3-vector.
    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        [self.diag[0] * x[0], self.diag[1] * x[1], self.diag[2] * x[2]]
    }

    /// `|| A^-1/2 v ||_2`, the ellipsoid norm that appears in the SOC
    /// margins; equals `sqrt(v' A^-1 v)`.
    pub fn inv_sqrt_norm(&self, v: &Twist) -> f64 {
        self.inv_quad_twist(v).sqrt()
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Which constraint family a margin value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    /// Wrench-space slippage-free constraint on the static-palm wrench.
    WrenchSpace,
    /// Full twist-space slippage-free constraint (quartic form).
    TwistFull,
    /// High-normal-force leading-coefficient constraint.
    LeadingCoeff,
    /// Second-order-cone form for equal patch radii.
    SocEqualRadius,
    /// Downhill half-space fallback for the nonconvex regime.
    NonconvexFallback,
    /// Quadratic part of the unequal-radius decomposition.
    DecomposedQuadratic,
    /// SOC part of the unequal-radius decomposition.
    DecomposedSoc,
}

/// A signed constraint value: negative means the constraint is satisfied
/// (slippage-free), positive means it is violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintMargin {
    pub value: f64,
    pub kind: MarginKind,
}

impl ConstraintMargin {
    pub fn new(value: f64, kind: MarginKind) -> Self {
        Self { value, kind }
    }

    /// True when the margin clears the requested safety band.
    pub fn satisfied(&self, eps: f64) -> bool {
        self.value <= -eps
    }
}

/// Friction wrench transmitted by a patch while the object slides on it
/// with twist `v`: `w = -A^-1 v / sqrt(v' A^-1 v)`.
///
/// The returned wrench lies on the limit surface boundary (`w' A w = 1`)
/// and maximizes dissipation among all boundary wrenches. Undefined at
/// `v = 0`: sticking contacts must be handled explicitly by the caller.
pub fn twist_to_wrench(a: &EllipsoidMatrix, v: &Twist) -> Result<Wrench> {
    if v.is_zero() {
        return Err(Error::DegenerateTwist);
    }
    let q = a.inv_quad_twist(v);
    if !q.is_finite() || q <= 0.0 {
        return Err(Error::DegenerateTwist);
    }
    let scale = -1.0 / q.sqrt();
    let u = a.inv_apply(v.as_array());
    Ok(Wrench::new(scale * u[0], scale * u[1], scale * u[2]))
}

/// `w' A w - 1`: zero on the limit surface, negative inside.
pub fn boundary_residual(a: &EllipsoidMatrix, w: &Wrench) -> f64 {
    a.quad_wrench(w) - 1.0
}

/// `w' B w - 1`: negative iff the contact can sustain `w` without
/// slipping.
pub fn sticking_margin(b: &EllipsoidMatrix, w: &Wrench) -> f64 {
    b.quad_wrench(w) - 1.0
}

/// Quasi-static force balance residual `w_a + w_b + g_f`; zero iff the
/// object is in equilibrium under the two contact wrenches and gravity.
pub fn quasi_static_residual(w_a: &Wrench, w_b: &Wrench, gl: &GravityLoad) -> Wrench {
    w_a.add(w_b).add(&gl.tangential)
}

/// Wrench-space slippage-free margin:
/// `w_a'(B - A)w_a + 2 g_f' B w_a + g_f' B g_f`.
///
/// Negative means the static-palm contact slides while the moving-palm
/// contact sticks. Equals `sticking_margin(B, -w_a - g_f)` whenever
/// `w_a` lies exactly on the `A` boundary.
pub fn slip_free_wrench_margin(
    w_a: &Wrench,
    a: &EllipsoidMatrix,
    b: &EllipsoidMatrix,
    gl: &GravityLoad,
) -> ConstraintMargin {
    let wa = w_a.as_array();
    let gf = gl.tangential.as_array();
    let b_wa = b.apply(wa);
    let value = dot3(wa, b_wa) - a.quad_wrench(w_a) + 2.0 * dot3(gf, b_wa) + dot3(gf, b.apply(gf));
    ConstraintMargin::new(value, MarginKind::WrenchSpace)
}

/// Twist-space slippage-free margin:
/// `v'(A^-1 B A^-1 - A^-1)v - 2 sqrt(v' A^-1 v) v' A^-1 B g_f
///  + (g_f' B g_f) v' A^-1 v`.
///
/// Same sign as [`slip_free_wrench_margin`] evaluated at
/// `w_a = twist_to_wrench(A, v)` (it is that margin scaled by the
/// positive factor `v' A^-1 v`). Homogeneous of degree 2 in `v`.
pub fn slip_free_twist_margin(
    v: &Twist,
    a: &EllipsoidMatrix,
    b: &EllipsoidMatrix,
    gl: &GravityLoad,
) -> Result<ConstraintMargin> {
    if v.is_zero() {
        return Err(Error::DegenerateTwist);
    }
    let q = a.inv_quad_twist(v);
    let u = a.inv_apply(v.as_array());
    let gf = gl.tangential.as_array();
    let b_u = b.apply(u);
    let value = dot3(u, b_u) - q - 2.0 * q.sqrt() * dot3(b_u, gf) + dot3(gf, b.apply(gf)) * q;
    Ok(ConstraintMargin::new(value, MarginKind::TwistFull))
}

/// Leading-coefficient margin for the high-normal-force regime:
/// `v'(A^-1 B^ A^-1 - A^-1)v` on the normalized surfaces
/// `A^ = N_a^2 A`, `B^ = N_b^2 B`.
///
/// This is the true leading coefficient of the full twist margin viewed
/// as a quartic in the moving-contact normal force (confirmed by the
/// polynomial-fit tests). Homogeneous of degree 2 in `v`.
pub fn leading_coeff_margin(
    v: &Twist,
    a_hat: &EllipsoidMatrix,
    b_hat: &EllipsoidMatrix,
) -> Result<ConstraintMargin> {
    if v.is_zero() {
        return Err(Error::DegenerateTwist);
    }
    let u = a_hat.inv_apply(v.as_array());
    let value = dot3(u, b_hat.apply(u)) - dot3(v.as_array(), u);
    Ok(ConstraintMargin::new(value, MarginKind::LeadingCoeff))
}

/// Variant of [`leading_coeff_margin`] with the middle factor inverted:
/// `v'(A^-1 B^-1 A^-1 - A^-1)v`.
///
/// Kept for diagnostic comparison; the quartic-fit tests show it does not
/// track the true leading coefficient in general. Do not use it as a
/// planning constraint.
pub fn leading_coeff_margin_inverse_mid(
    v: &Twist,
    a_hat: &EllipsoidMatrix,
    b_hat: &EllipsoidMatrix,
) -> Result<ConstraintMargin> {
    if v.is_zero() {
        return Err(Error::DegenerateTwist);
    }
    let u = a_hat.inv_apply(v.as_array());
    let value = dot3(u, b_hat.inv_apply(u)) - dot3(v.as_array(), u);
    Ok(ConstraintMargin::new(value, MarginKind::LeadingCoeff))
}

/// The constant `c - 1 + c g_f' A g_f` that multiplies the ellipsoid norm
/// in the equal-radius SOC margin. When positive, the constraint is a
/// second-order cone; when negative the feasible twist set is nonconvex.
pub fn soc_constant(a: &EllipsoidMatrix, c_ratio: f64, gl: &GravityLoad) -> f64 {
    let gf = gl.tangential.as_array();
    c_ratio - 1.0 + c_ratio * dot3(gf, a.apply(gf))
}

/// Equal-radius slippage-free margin in SOC form:
/// `(c - 1 + c g_f' A g_f) ||A^-1/2 v||_2 - 2 c g_f' v`
/// with `B = c A`, `c = N_a^2 / N_b^2`.
///
/// Same sign as [`slip_free_twist_margin`] under `B = c A` (it is that
/// margin divided by the positive factor `sqrt(v' A^-1 v)`). Homogeneous
/// of degree 1 in `v`.
pub fn soc_equal_radius_margin(
    v: &Twist,
    a: &EllipsoidMatrix,
    c_ratio: f64,
    gl: &GravityLoad,
) -> Result<ConstraintMargin> {
    if v.is_zero() {
        return Err(Error::DegenerateTwist);
    }
    let value = soc_constant(a, c_ratio, gl) * a.inv_sqrt_norm(v)
        - 2.0 * c_ratio * gl.tangential.dot_twist(v);
    Ok(ConstraintMargin::new(value, MarginKind::SocEqualRadius))
}

/// Downhill half-space fallback `-g_f' v` for the nonconvex regime.
///
/// Negative iff the twist has positive inner product with tangential
/// gravity. Whenever the SOC constant is negative and this margin is
/// negative, the equal-radius margin is negative too, so the fallback is
/// a sufficient (conservative) condition.
pub fn nonconvex_fallback_margin(v: &Twist, gl: &GravityLoad) -> ConstraintMargin {
    ConstraintMargin::new(-gl.tangential.dot_twist(v), MarginKind::NonconvexFallback)
}

/// Unequal-radius decomposition of the twist margin into two smaller
/// constraints:
///
/// - quadratic part `v'(A^-1 B A^-1 - A^-1)v`, and
/// - SOC part `||A^-1/2 v||_2 - (2 / (g_f' B g_f)) g_f' A^-1 B v`.
///
/// Both negative implies the full twist margin is negative. The SOC part
/// divides by `g_f' B g_f` and is therefore undefined for a horizontal
/// grasp (`g_f = 0`), which is reported as an error; in that case the
/// quadratic part alone is equivalent to the full margin.
pub fn decomposed_margins(
    v: &Twist,
    a: &EllipsoidMatrix,
    b: &EllipsoidMatrix,
    gl: &GravityLoad,
) -> Result<(ConstraintMargin, ConstraintMargin)> {
    if v.is_zero() {
        return Err(Error::DegenerateTwist);
    }
    let gf = gl.tangential.as_array();
    let gbg = dot3(gf, b.apply(gf));
    if gbg == 0.0 {
        return Err(Error::ZeroTangentialGravity);
    }
    let u = a.inv_apply(v.as_array());
    let quadratic = dot3(u, b.apply(u)) - dot3(v.as_array(), u);
    let soc = a.inv_sqrt_norm(v) - (2.0 / gbg) * dot3(b.apply(gf), u);
    Ok((
        ConstraintMargin::new(quadratic, MarginKind::DecomposedQuadratic),
        ConstraintMargin::new(soc, MarginKind::DecomposedSoc),
    ))
}
