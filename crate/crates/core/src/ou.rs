//! Ornstein-Uhlenbeck limit of the body velocity and angular velocity.
//!
//! The coefficients come from the limiting generator
//! `a[(1/β)((L/2)Δ_V + (𝒦/I²)∂²_Ω) − (L/2)V·∇_V − (𝒦/I)Ω∂_Ω]` with
//! `a = (8/(πβ))^{1/2}`, whose stationary law is `M_{β,I}`.

use crate::error::{Error, Result};
use crate::geometry::ShapeConstants;
use crate::record::{BodySample, RecordKind, TrajectoryRecord};
use crate::scattering::BodyState;
use crate::vec2::Vec2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Which set of coefficients to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuVariant {
    /// Consistent with the limiting generator and with `M_{β,I}`.
    #[default]
    Generator,
    /// Coefficients as typeset in the stochastic differential equation:
    /// drift `aL` for `V` and noise `√(2a𝒦/(βI))` for `Ω`. Kept for comparison.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub a: f64,
    pub perimeter: f64,
    pub k_cal: f64,
    pub inertia: f64,
    pub beta: f64,
    pub variant: OuVariant,
    pub theta_v: f64,
    /// Noise variance per unit time of each velocity component.
    pub sigma_v2: f64,
    pub theta_omega: f64,
    pub sigma_omega2: f64,
}

/// `a = (8/(πβ))^{1/2}`.
pub fn friction_prefactor(beta: f64) -> f64 {
    (8.0 / (PI * beta)).sqrt()
}

pub fn params_from_body(consts: &ShapeConstants, beta: f64, variant: OuVariant) -> Result<OuParams> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::config("beta", format!("need β > 0, got {beta}")));
    }
    let a = friction_prefactor(beta);
    let (l, k, i) = (consts.perimeter, consts.k_cal, consts.inertia);
    let (theta_v, sigma_v2, theta_omega, sigma_omega2) = match variant {
        OuVariant::Generator => (a * l / 2.0, a * l / beta, a * k / i, 2.0 * a * k / (beta * i * i)),
        OuVariant::Printed => (a * l, 2.0 * a * l / beta, a * k / i, 2.0 * a * k / (beta * i)),
    };
    Ok(OuParams {
        a,
        perimeter: l,
        k_cal: k,
        inertia: i,
        beta,
        variant,
        theta_v,
        sigma_v2,
        theta_omega,
        sigma_omega2,
    })
}

impl OuParams {
    /// Stationary variance of each velocity component.
    pub fn stationary_var_v(&self) -> f64 {
        stationary_var(self.theta_v, self.sigma_v2)
    }

    pub fn stationary_var_omega(&self) -> f64 {
        stationary_var(self.theta_omega, self.sigma_omega2)
    }

    /// Drift of `V` and `Ω` at state `w` (the generator applied to the
    /// coordinate functions).
    pub fn drift(&self, w: &OuState) -> (Vec2, f64) {
        (w.v * -self.theta_v, -self.theta_omega * w.omega)
    }
}

fn stationary_var(theta: f64, sigma2: f64) -> f64 {
    if theta > 0.0 {
        sigma2 / (2.0 * theta)
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OuState {
    pub v: Vec2,
    pub omega: f64,
}

/// Mean factor and conditional standard deviation of an exact OU step.
fn step_coeffs(theta: f64, sigma2: f64, dt: f64) -> (f64, f64) {
    if theta == 0.0 {
        return (1.0, (sigma2 * dt).sqrt());
    }
    let decay = (-theta * dt).exp();
    let var = sigma2 / (2.0 * theta) * (-(-2.0 * theta * dt).exp_m1());
    (decay, var.max(0.0).sqrt())
}

/// Exact transition of `(V, Ω)` over time `dt`.
pub fn transition<R: Rng + ?Sized>(w: &OuState, dt: f64, params: &OuParams, rng: &mut R) -> OuState {
    let (dv, sv) = step_coeffs(params.theta_v, params.sigma_v2, dt);
    let (dom, som) = step_coeffs(params.theta_omega, params.sigma_omega2, dt);
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let v = Vec2::new(dv * w.v.x + sv * g(), dv * w.v.y + sv * g());
    let omega = dom * w.omega + som * g();
    OuState { v, omega }
}

/// Samples a path on the grid `k·sample_dt`. Positions are integrated by
/// the trapezoid rule and are not wrapped onto the torus; the orientation
/// is not modelled and stays at its initial value.
pub fn run_ou<R: Rng + ?Sized>(
    y0: &BodyState,
    t_end: f64,
    sample_dt: f64,
    params: &OuParams,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    if !(t_end > 0.0) {
        return Err(Error::config("T", "must be positive"));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::config("sample_dt", "must be positive"));
    }
    let mut record = TrajectoryRecord::new(RecordKind::Ou, *y0);
    record.samples.push(BodySample { t: 0.0, body: *y0 });
    let steps = (t_end / sample_dt).round().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let mut y = *y0;
    let mut w = OuState {
        v: y0.v,
        omega: y0.omega,
    };
    for k in 1..=steps {
        let next = transition(&w, dt, params, rng);
        y.x += (w.v + next.v) * (0.5 * dt);
        y.v = next.v;
        y.omega = next.omega;
        w = next;
        record.samples.push(BodySample { t: k as f64 * dt, body: y });
    }
    record.t_end = t_end;
    record.final_body = y;
    Ok(record)
}
