//! Collision laws, conserved quantities and pathology predicates.
//!
//! All state is kept in rescaled variables: atom velocities `v = α v̂`,
//! angular velocity `Ω = (ε/α) Ω̂` and moment of inertia `I = (α/ε)² Î`,
//! with atom mass `m = α²` and body mass `M = 1`.

use crate::contact::{ContactDetector, RelativeMotion};
use crate::error::{Error, Result};
use crate::geometry::{ShapeConstants, SupportBody};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Default horizon multiplier for the two-body recollision test.
pub const DEFAULT_HORIZON_FACTOR: f64 = 4.0;

/// Physical and numerical parameters shared by every simulation level.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub n_atoms: usize,
    /// Atom diameter.
    pub epsilon: f64,
    /// Mass/size scale: atom mass is `α²`, body size is `ε/α`.
    pub alpha: f64,
    pub beta: f64,
    /// Truncation exponent of the pathology thresholds.
    pub eta: f64,
    pub body: Arc<SupportBody>,
    pub consts: ShapeConstants,
}

impl SimParams {
    /// Boltzmann-Grad parameters: `ε = 1/N`.
    pub fn new(n_atoms: usize, alpha: f64, beta: f64, eta: f64, body: SupportBody) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::config("N", "at least one atom is needed to fix ε = 1/N"));
        }
        Self::with_epsilon(n_atoms, 1.0 / n_atoms as f64, alpha, beta, eta, body)
    }

    /// Parameters with an explicit atom diameter, for small test systems
    /// that cannot satisfy `Nε = 1`.
    pub fn with_epsilon(
        n_atoms: usize,
        epsilon: f64,
        alpha: f64,
        beta: f64,
        eta: f64,
        body: SupportBody,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config("alpha", format!("need 0 < α < 1, got {alpha}")));
        }
        if !(epsilon > 0.0 && epsilon < alpha) {
            return Err(Error::config("epsilon", format!("need 0 < ε < α, got ε = {epsilon}, α = {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("beta", format!("need β > 0, got {beta}")));
        }
        if !(eta > 0.0 && eta < 1.0 / 6.0) {
            return Err(Error::config(
                "eta",
                format!("need 0 < η < 1/6 for the no-recollision estimate, got {eta}"),
            ));
        }
        let consts = body.shape_constants(alpha)?;
        Ok(SimParams {
            n_atoms,
            epsilon,
            alpha,
            beta,
            eta,
            body: Arc::new(body),
            consts,
        })
    }

    /// Rescaled moment of inertia `I`.
    #[inline]
    pub fn inertia(&self) -> f64 {
        self.consts.inertia
    }

    /// Contact offset of the grown body, `α/2` in body units.
    #[inline]
    pub fn contact_offset(&self) -> f64 {
        self.alpha / 2.0
    }

    /// World size of the body, `ε/α`.
    #[inline]
    pub fn body_scale(&self) -> f64 {
        self.epsilon / self.alpha
    }

    /// `|log α|` (natural log).
    pub fn speed_cap(&self) -> f64 {
        self.alpha.ln().abs()
    }

    pub fn deflection_threshold(&self) -> f64 {
        self.alpha.powf(2.0 + self.eta)
    }

    pub fn slow_relative_threshold(&self) -> f64 {
        self.alpha.powf(2.0 / 3.0 + self.eta)
    }

    pub fn detector(&self) -> ContactDetector<'_> {
        ContactDetector::with_radius(&self.body, self.contact_offset(), self.consts.r_max_alpha)
    }
}

/// Rigid body state `Y = (X, V, Θ, Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyState {
    pub x: Vec2,
    pub v: Vec2,
    pub theta: f64,
    /// Rescaled angular velocity.
    pub omega: f64,
}

impl BodyState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    /// Same pose with velocities reversed.
    pub fn reversed(&self) -> Self {
        BodyState {
            v: -self.v,
            omega: -self.omega,
            ..*self
        }
    }
}

/// Atom state: torus position and rescaled velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomState {
    pub x: Vec2,
    pub v: Vec2,
}

/// Geometry and kinematics of an atom-body contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactData {
    /// Body-frame normal angle.
    pub phi: f64,
    /// World-frame outward normal `n_Θ`.
    pub normal: Vec2,
    /// World-frame contact vector `r_Θ` on the reference body.
    pub r: Vec2,
    /// Effective-mass factor `A = α²(1 + (n·r⊥)²/I)`.
    pub a_factor: f64,
    /// Normal relative velocity `b_α = (v - αV - αΩ r_Θ⊥)·n_Θ`.
    pub b: f64,
}

pub fn contact_data(y: &BodyState, v: Vec2, phi: f64, p: &SimParams) -> ContactData {
    let bp = p.body.boundary(phi);
    let normal = bp.n.rotate(y.theta);
    let r = bp.r.rotate(y.theta);
    let alpha = p.alpha;
    let a_factor = alpha * alpha * (1.0 + bp.dh * bp.dh / p.inertia());
    let b = (v - y.v * alpha - r.perp() * (alpha * y.omega)).dot(normal);
    ContactData {
        phi,
        normal,
        r,
        a_factor,
        b,
    }
}

/// Specular reflection of two atoms; `nu` is the unit vector from `i` to `j`.
pub fn collide_atoms(vi: Vec2, vj: Vec2, nu: Vec2) -> (Vec2, Vec2) {
    let k = (vi - vj).dot(nu);
    (vi - nu * k, vj + nu * k)
}

/// Outcome of an atom-body collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyCollision {
    pub body: BodyState,
    pub v: Vec2,
    pub contact: ContactData,
    /// `b_α < 0` before the collision. The map is applied either way.
    pub incoming: bool,
}

/// Atom-body scattering at body-frame normal angle `phi`.
pub fn collide_body_atom(y: &BodyState, v: Vec2, phi: f64, p: &SimParams) -> BodyCollision {
    let c = contact_data(y, v, phi, p);
    let alpha = p.alpha;
    let d = -c.b;
    let k = 2.0 / (c.a_factor + 1.0);
    let n_rperp = c.normal.dot(c.r.perp());
    let body = BodyState {
        v: y.v - c.normal * (alpha * k * d),
        omega: y.omega - alpha * k / p.inertia() * n_rperp * d,
        ..*y
    };
    BodyCollision {
        body,
        v: v + c.normal * (k * d),
        contact: c,
        incoming: c.b < 0.0,
    }
}

/// Total momentum and energy of a body-atom pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub momentum: Vec2,
    pub energy: f64,
}

/// `P = αv + V`, `E = ½(|v|² + |V|² + IΩ²)`.
pub fn conserved_quantities(y: &BodyState, v: Vec2, p: &SimParams) -> Conserved {
    system_conserved(y, std::iter::once(v), p)
}

/// Same sums over any number of atoms.
pub fn system_conserved(y: &BodyState, atoms: impl IntoIterator<Item = Vec2>, p: &SimParams) -> Conserved {
    let mut momentum = y.v;
    let mut twice_e = y.v.norm_sq() + p.inertia() * y.omega * y.omega;
    for v in atoms {
        momentum += v * p.alpha;
        twice_e += v.norm_sq();
    }
    Conserved {
        momentum,
        energy: 0.5 * twice_e,
    }
}

/// Angular momentum about the contact point, `IΩ - V·r_Θ⊥`.
pub fn contact_angular_momentum(y: &BodyState, r_theta: Vec2, p: &SimParams) -> f64 {
    p.inertia() * y.omega - y.v.dot(r_theta.perp())
}

/// Unscaled variables: `v̂ = v/α`, `Ω̂ = (α/ε)Ω`, `Î = (ε/α)² I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalPair {
    pub body_v: Vec2,
    pub omega_hat: f64,
    pub atom_v_hat: Vec2,
}

impl PhysicalPair {
    pub fn from_rescaled(y: &BodyState, v: Vec2, p: &SimParams) -> Self {
        PhysicalPair {
            body_v: y.v,
            omega_hat: y.omega / p.body_scale(),
            atom_v_hat: v / p.alpha,
        }
    }

    pub fn to_rescaled(&self, y: &BodyState, p: &SimParams) -> (BodyState, Vec2) {
        (
            BodyState {
                v: self.body_v,
                omega: self.omega_hat * p.body_scale(),
                ..*y
            },
            self.atom_v_hat * p.alpha,
        )
    }
}

/// The same collision computed from the normal impulse in unscaled variables.
pub fn collide_body_atom_physical(y: &BodyState, v: Vec2, phi: f64, p: &SimParams) -> (BodyState, Vec2) {
    let pair = PhysicalPair::from_rescaled(y, v, p);
    let bp = p.body.boundary(phi);
    let n = bp.n.rotate(y.theta);
    let r = bp.r.rotate(y.theta);
    let m = p.alpha * p.alpha;
    let scale = p.body_scale();
    let inertia_hat = scale * scale * p.inertia();
    let n_rperp = n.dot(r.perp());
    let a = m + m / inertia_hat * scale * scale * n_rperp * n_rperp;
    let f = 2.0 * m / (a + 1.0) * (pair.body_v + r.perp() * (scale * pair.omega_hat) - pair.atom_v_hat).dot(n);
    let out = PhysicalPair {
        body_v: pair.body_v - n * f,
        omega_hat: pair.omega_hat - scale * f / inertia_hat * n_rperp,
        atom_v_hat: pair.atom_v_hat + n * (f / m),
    };
    out.to_rescaled(y, p)
}

/// Pathological-collision indicators. A collision is good iff none is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathologyFlags {
    pub small_deflection: bool,
    pub large_speed: bool,
    pub slow_relative_pre: bool,
    pub slow_relative_post: bool,
}

impl PathologyFlags {
    pub fn is_good(&self) -> bool {
        !(self.small_deflection || self.large_speed || self.slow_relative_pre || self.slow_relative_post)
    }

    /// Compact encoding used in CSV output, e.g. `D|S` or empty.
    pub fn code(&self) -> String {
        let mut parts = Vec::new();
        if self.small_deflection {
            parts.push("D");
        }
        if self.large_speed {
            parts.push("S");
        }
        if self.slow_relative_pre {
            parts.push("R");
        }
        if self.slow_relative_post {
            parts.push("Q");
        }
        parts.join("|")
    }

    /// First raised flag, for kill bookkeeping.
    pub fn reason(&self) -> Option<KillReason> {
        if self.small_deflection {
            Some(KillReason::SmallDeflection)
        } else if self.large_speed {
            Some(KillReason::LargeSpeed)
        } else if self.slow_relative_pre || self.slow_relative_post {
            Some(KillReason::SlowRelative)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillReason {
    SmallDeflection,
    LargeSpeed,
    SlowRelative,
    Recollision,
}

pub fn pathology_flags(
    pre: (&BodyState, Vec2),
    post: (&BodyState, Vec2),
    p: &SimParams,
) -> PathologyFlags {
    let (y, v) = pre;
    let (y2, v2) = post;
    let dv = (y2.v - y.v).norm();
    let cap = p.speed_cap();
    let slow = p.slow_relative_threshold();
    PathologyFlags {
        small_deflection: dv > 0.0 && dv < p.deflection_threshold(),
        large_speed: y.v.norm().max(y2.v.norm()).max(y.omega.abs()).max(y2.omega.abs()) > cap,
        slow_relative_pre: (v - y.v * p.alpha).norm() < slow,
        slow_relative_post: (v2 - y2.v * p.alpha).norm() < slow,
    }
}

/// Escape-time bound `2 r_max / |v'/α - V'|` in body-scale time units.
pub fn escape_time_bound(v_post: Vec2, body_v_post: Vec2, p: &SimParams) -> Result<f64> {
    escape_time_bound_with(v_post, body_v_post, p.alpha, p.consts.r_max)
}

pub fn escape_time_bound_with(v_post: Vec2, body_v_post: Vec2, alpha: f64, r_max: f64) -> Result<f64> {
    let w = (v_post / alpha - body_v_post).norm();
    if w < 1e-14 {
        return Err(Error::DegenerateVelocity(w));
    }
    Ok(2.0 * r_max / w)
}

/// Relative motion of the isolated pair starting at contact angle `phi`,
/// in body-scale units.
pub fn pair_motion(y: &BodyState, v: Vec2, phi: f64, p: &SimParams) -> RelativeMotion {
    let bp = p.body.boundary_offset(phi, p.contact_offset());
    RelativeMotion {
        y0: bp.r.rotate(y.theta),
        w: v / p.alpha - y.v,
        theta0: y.theta,
        omega: y.omega,
    }
}

/// Whether an atom leaving contact (outgoing configuration) touches the body
/// again within `horizon_factor` escape times, ignoring all other atoms and
/// periodic images.
pub fn forward_recollides(
    y: &BodyState,
    v: Vec2,
    phi: f64,
    p: &SimParams,
    horizon_factor: f64,
) -> Result<bool> {
    let horizon = match escape_time_bound_with(v, y.v, p.alpha, p.consts.r_max_alpha) {
        Ok(d) => horizon_factor * d,
        // Atom comoving with the body: it never separates.
        Err(Error::DegenerateVelocity(_)) => return Ok(true),
        Err(e) => return Err(e),
    };
    let m = pair_motion(y, v, phi, p);
    Ok(p.detector().first_contact(&m, horizon)?.is_some())
}

/// Two-body test for a pre-collisional configuration: run the pair backward
/// in time from contact and report whether it meets again.
pub fn backward_recollides(
    y: &BodyState,
    v: Vec2,
    phi: f64,
    p: &SimParams,
    horizon_factor: f64,
) -> Result<bool> {
    forward_recollides(&y.reversed(), -v, phi, p, horizon_factor)
}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ellipse_params(alpha: f64) -> SimParams {
        SimParams::new(500, alpha, 1.0, 0.1, SupportBody::ellipse(0.5, 0.3).unwrap()).unwrap()
    }

    fn disk_params(alpha: f64) -> SimParams {
        SimParams::new(500, alpha, 1.0, 0.1, SupportBody::disk(1.0).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn atom_head_on_exchange() {
        let (a, b) = collide_atoms(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        assert_eq!(a, Vec2::new(-1.0, 0.0));
        assert_eq!(b, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn atom_grazing_is_identity() {
        let (a, b) = collide_atoms(Vec2::new(1.0, 2.0), Vec2::new(1.0, -3.0), Vec2::new(1.0, 0.0));
        assert_eq!(a, Vec2::new(1.0, 2.0));
        assert_eq!(b, Vec2::new(1.0, -3.0));
    }

    #[test]
    fn disk_head_on_closed_form() {
        let p = disk_params(0.1);
        let y = BodyState::at_rest();
        let out = collide_body_atom(&y, Vec2::new(-1.0, 0.0), 0.0, &p);
        let a2 = 0.01;
        assert!((out.v - Vec2::new(-1.0 + 2.0 / (1.0 + a2), 0.0)).norm() < 1e-15);
        assert!((out.body.v - Vec2::new(-0.2 / (1.0 + a2), 0.0)).norm() < 1e-15);
        assert_eq!(out.body.omega, 0.0);
        assert!(out.incoming);
        // |V' - V| = 2α/(1+α²) is far above α^{2.1}.
        let f = pathology_flags((&y, Vec2::new(-1.0, 0.0)), (&out.body, out.v), &p);
        assert!(!f.small_deflection);
    }

    #[test]
    fn tangential_contact_is_identity() {
        let p = ellipse_params(0.1);
        let y = BodyState {
            x: Vec2::new(0.3, 0.3),
            v: Vec2::new(0.2, -0.4),
            theta: 0.9,
            omega: 0.7,
        };
        let phi = 1.1;
        let c = contact_data(&y, Vec2::ZERO, phi, &p);
        // Choose v with zero normal relative velocity.
        let v = c.normal.perp() * 0.8 + (y.v * p.alpha + c.r.perp() * (p.alpha * y.omega)).dot(c.normal) * c.normal;
        let out = collide_body_atom(&y, v, phi, &p);
        assert!((out.v - v).norm() < 1e-15);
        assert!((out.body.v - y.v).norm() < 1e-15);
        assert!((out.body.omega - y.omega).abs() < 1e-15);
    }

    #[test]
    fn conserved_at_rest_is_zero() {
        let p = ellipse_params(0.1);
        let c = conserved_quantities(&BodyState::at_rest(), Vec2::ZERO, &p);
        assert_eq!(c.momentum, Vec2::ZERO);
        assert_eq!(c.energy, 0.0);
    }

    #[test]
    fn slow_relative_and_large_speed_flags() {
        let p = ellipse_params(0.1);
        let y = BodyState {
            v: Vec2::new(0.5, 0.2),
            ..Default::default()
        };
        let v = y.v * p.alpha;
        let f = pathology_flags((&y, v), (&y, v), &p);
        assert!(f.slow_relative_pre && f.slow_relative_post);
        let fast = BodyState {
            omega: 2.0 * p.speed_cap(),
            ..Default::default()
        };
        let f = pathology_flags((&fast, Vec2::new(1.0, 0.0)), (&fast, Vec2::new(1.0, 0.0)), &p);
        assert!(f.large_speed);
        assert!(!f.small_deflection);
    }

    #[test]
    fn escape_time_examples() {
        let d = escape_time_bound_with(Vec2::new(1.0, 0.0), Vec2::new(-9.0, 0.0), 0.1, 1.0).unwrap();
        assert!((d - 2.0 / 19.0).abs() < 1e-15);
        let d = escape_time_bound_with(Vec2::new(1.0, 0.0), Vec2::ZERO, 0.1, 1.0).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        let p = ellipse_params(0.1);
        let vv = Vec2::new(0.3, 0.1);
        assert!(matches!(
            escape_time_bound(vv * p.alpha, vv, &p),
            Err(Error::DegenerateVelocity(_))
        ));
    }

    #[test]
    fn good_collisions_bound_escape_time() {
        // Under the slow-relative threshold the escape time is at most
        // 2 r_max α^{1/3 - η} in body units.
        let p = ellipse_params(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let y = random_body(&mut rng);
            let v = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            if (v - y.v * p.alpha).norm() < p.slow_relative_threshold() {
                continue;
            }
            let d = escape_time_bound(v, y.v, &p).unwrap();
            assert!(d <= 2.0 * p.consts.r_max * p.alpha.powf(1.0 / 3.0 - p.eta) * (1.0 + 1e-12));
        }
    }

    fn random_body<R: Rng>(rng: &mut R) -> BodyState {
        BodyState {
            x: Vec2::new(rng.random(), rng.random()),
            v: Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            theta: rng.random_range(0.0..TAU),
            omega: rng.random_range(-3.0..3.0),
        }
    }

    #[test]
    fn disk_never_recollides() {
        let p = disk_params(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let y = random_body(&mut rng);
            let phi = rng.random_range(0.0..TAU);
            let v = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let c = contact_data(&y, v, phi, &p);
            if c.b >= 0.0 {
                continue;
            }
            assert!(!backward_recollides(&y, v, phi, &p, DEFAULT_HORIZON_FACTOR).unwrap());
        }
    }

    #[test]
    fn physical_and_rescaled_laws_agree() {
        let p = ellipse_params(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let y = random_body(&mut rng);
            let v = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let phi = rng.random_range(0.0..TAU);
            let a = collide_body_atom(&y, v, phi, &p);
            let (yb, vb) = collide_body_atom_physical(&y, v, phi, &p);
            assert!((a.v - vb).norm() < 1e-12 * (1.0 + v.norm()));
            assert!((a.body.v - yb.v).norm() < 1e-12);
            assert!((a.body.omega - yb.omega).abs() < 1e-12 * (1.0 + y.omega.abs()));
        }
    }

    proptest! {
        #[test]
        fn atom_collision_is_an_involution(
            vx in -5.0..5.0f64, vy in -5.0..5.0f64, wx in -5.0..5.0f64, wy in -5.0..5.0f64,
            ang in 0.0..TAU,
        ) {
            let nu = Vec2::from_angle(ang);
            let (vi, vj) = (Vec2::new(vx, vy), Vec2::new(wx, wy));
            let (a, b) = collide_atoms(vi, vj, nu);
            let (c, d) = collide_atoms(a, b, nu);
            prop_assert!((c - vi).norm() < 1e-14 && (d - vj).norm() < 1e-14);
            prop_assert!((a + b - vi - vj).norm() < 1e-14);
            prop_assert!((a.norm_sq() + b.norm_sq() - vi.norm_sq() - vj.norm_sq()).abs() < 1e-12);
        }

        #[test]
        fn body_collision_conserves_and_inverts(
            vx in -4.0..4.0f64, vy in -4.0..4.0f64, bx in -2.0..2.0f64, by in -2.0..2.0f64,
            om in -3.0..3.0f64, theta in 0.0..TAU, phi in 0.0..TAU, alpha in 0.05..0.5f64,
        ) {
            let p = ellipse_params(alpha);
            let y = BodyState { x: Vec2::new(0.5, 0.5), v: Vec2::new(bx, by), theta, omega: om };
            let v = Vec2::new(vx, vy);
            let out = collide_body_atom(&y, v, phi, &p);
            let before = conserved_quantities(&y, v, &p);
            let after = conserved_quantities(&out.body, out.v, &p);
            prop_assert!((before.momentum - after.momentum).norm() <= 1e-12 * (1.0 + before.momentum.norm()));
            prop_assert!(rel(after.energy, before.energy) < 1e-12);
            let l0 = contact_angular_momentum(&y, out.contact.r, &p);
            let l1 = contact_angular_momentum(&out.body, out.contact.r, &p);
            prop_assert!((l0 - l1).abs() < 1e-12 * (1.0 + l0.abs()));
            // b flips sign.
            let c2 = contact_data(&out.body, out.v, phi, &p);
            prop_assert!((c2.b + out.contact.b).abs() < 1e-12 * (1.0 + out.contact.b.abs()));
            // Tangential body velocity is untouched.
            let t = out.contact.normal.perp();
            prop_assert!((out.body.v.dot(t) - y.v.dot(t)).abs() < 1e-13);
            prop_assert!(((out.v - v).dot(t)).abs() < 1e-13);
            // Involution.
            let back = collide_body_atom(&out.body, out.v, phi, &p);
            prop_assert!((back.v - v).norm() < 1e-12);
            prop_assert!((back.body.v - y.v).norm() < 1e-12);
            prop_assert!((back.body.omega - y.omega).abs() < 1e-12);
            // Incoming becomes outgoing.
            if out.incoming {
                prop_assert!(c2.b > 0.0);
            }
        }
    }
}
