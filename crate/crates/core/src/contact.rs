//! First-contact search between a point atom and a translating, rotating
//! convex body (conservative advancement).
//!
//! Everything here is expressed in body-scale units: lengths are measured in
//! units of the body size and time in units where the body rotates at rate
//! `Ω` and the atom moves relative to the body centre at constant velocity
//! `w`. The contact surface is the reference body grown by `offset`.

use crate::error::{Error, Result};
use crate::geometry::SupportBody;
use crate::vec2::Vec2;

/// Distance below which the atom is considered touching.
pub const CONTACT_TOL: f64 = 1e-12;

const MAX_ITER: usize = 200_000;
const MIN_STEP: f64 = 1e-13;

/// Relative motion of an atom with respect to the body centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeMotion {
    /// Atom position relative to the body centre at `s = 0` (world axes).
    pub y0: Vec2,
    /// Constant relative velocity (world axes).
    pub w: Vec2,
    /// Body orientation at `s = 0`.
    pub theta0: f64,
    /// Body angular velocity.
    pub omega: f64,
}

/// Gap function sample: signed distance, its time derivative and the normal
/// angle of the closest point (body frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub g: f64,
    pub dg: f64,
    pub phi: f64,
}

/// Conservative-advancement detector for one body shape and contact offset.
#[derive(Debug, Clone, Copy)]
pub struct ContactDetector<'a> {
    body: &'a SupportBody,
    offset: f64,
    r_max: f64,
    rho_min: f64,
}

impl<'a> ContactDetector<'a> {
    pub fn new(body: &'a SupportBody, offset: f64) -> Self {
        Self::with_radius(body, offset, body.r_max_offset(offset))
    }

    /// Uses a precomputed circumradius of the grown body.
    pub fn with_radius(body: &'a SupportBody, offset: f64, r_max: f64) -> Self {
        ContactDetector {
            body,
            offset,
            // Dense-grid maxima can undershoot slightly.
            r_max: r_max * (1.0 + 1e-6),
            rho_min: body.rho_min() + offset,
        }
    }

    /// Evaluates the gap at time `s`.
    pub fn gap(&self, m: &RelativeMotion, s: f64, guess: Option<f64>) -> Result<Gap> {
        let theta = m.theta0 + m.omega * s;
        let (sn, cs) = (-theta).sin_cos();
        let z = (m.y0 + m.w * s).rotate_sc(sn, cs);
        let (g, phi) = self.body.support_max(z, self.offset, guess)?;
        // Body-frame velocity of the atom; the envelope theorem gives g' = ż·n.
        let zdot = m.w.rotate_sc(sn, cs) - z.perp() * m.omega;
        Ok(Gap {
            g,
            dg: zdot.dot(Vec2::from_angle(phi)),
            phi,
        })
    }

    /// Lipschitz constant of the gap in time.
    pub fn lipschitz(&self, m: &RelativeMotion) -> f64 {
        (m.w.norm() + m.omega.abs() * self.r_max) * (1.0 + 1e-9)
    }

    /// Largest step that provably keeps the gap positive, from the
    /// curvature bound `|g''| ≤ K` valid while the atom is outside.
    fn safe_step(&self, m: &RelativeMotion, gap: &Gap, lip: f64) -> f64 {
        let ca = gap.g.max(0.0) / lip;
        let g = gap.g.max(0.0);
        let zmax = self.r_max + 2.0 * g + 1.0;
        let (wn, om) = (m.w.norm(), m.omega.abs());
        let zdot = wn + om * zmax;
        let k = 2.0 * om * wn + om * om * zmax + zdot * zdot / self.rho_min;
        if k <= 0.0 {
            return if gap.dg >= 0.0 { f64::INFINITY } else { ca.max(g / -gap.dg) };
        }
        let quad = 0.999 * (gap.dg + (gap.dg * gap.dg + 2.0 * k * g).sqrt()) / k;
        // Keep |z| inside the radius used for K over the whole step.
        let cap = (g + 1.0) / lip;
        ca.max(quad.min(cap))
    }

    /// First time in `[0, s_end]` at which the atom touches the grown body
    /// while approaching it.
    ///
    /// A start on the surface with the atom departing is allowed (the usual
    /// situation right after a collision).
    pub fn first_contact(&self, m: &RelativeMotion, s_end: f64) -> Result<Option<f64>> {
        let lip = self.lipschitz(m);
        if lip == 0.0 {
            let gap = self.gap(m, 0.0, None)?;
            return Ok((gap.g <= CONTACT_TOL && gap.dg < 0.0).then_some(0.0));
        }
        let mut s = 0.0;
        let mut guess = None;
        for _ in 0..MAX_ITER {
            let gap = self.gap(m, s, guess)?;
            guess = Some(gap.phi);
            if gap.g <= CONTACT_TOL && (gap.dg < 0.0 || gap.g < -CONTACT_TOL) {
                return Ok(Some(s));
            }
            let step = self.safe_step(m, &gap, lip).max(MIN_STEP);
            s += step;
            if s > s_end {
                return Ok(None);
            }
        }
        Err(Error::NoConvergence {
            what: "atom-body contact search",
            iterations: MAX_ITER,
        })
    }
}
