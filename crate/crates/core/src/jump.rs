//! Linear Boltzmann jump process for the body, simulated exactly by
//! thinning.
//!
//! Between jumps the body moves freely (`Ẋ = V`, `Θ̇ = (α/ε)Ω`). Jumps happen
//! at total rate `(1/α²) ∮ dσ_α ∫ M_β(v) (b_α)_− dv`, each one being a
//! collision with a fresh Maxwellian atom at a contact point on `∂Σ_α`.

use crate::error::{Error, Result};
use crate::geometry::ArcLengthTable;
use crate::record::{BodySample, CollisionRecord, Kill, RecordKind, TrajectoryRecord};
use crate::rng::SimRng;
use crate::scattering::{
    backward_recollides, collide_body_atom, contact_data, pathology_flags, BodyState, KillReason, PathologyFlags,
    SimParams, DEFAULT_HORIZON_FACTOR,
};
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as SNormal};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMode {
    #[default]
    Plain,
    /// Gate proposals by the two-body recollision test and absorb the
    /// process at the first jump violating the good-collision conditions.
    Killed,
}

/// `E[(a - X)_+]` for `X ~ N(0, 1/β)`.
fn positive_part_mean(a: f64, beta: f64) -> f64 {
    let sb = beta.sqrt();
    let z = a * sb;
    let std = SNormal::standard();
    a * std.cdf(z) + std.pdf(z) / sb
}

/// Total jump rate at body state `y` by periodic trapezoid quadrature on
/// the grown boundary.
pub fn total_jump_rate(y: &BodyState, p: &SimParams) -> f64 {
    total_jump_rate_with_nodes(y, p, p.body.quadrature_nodes())
}

pub fn total_jump_rate_with_nodes(y: &BodyState, p: &SimParams, nodes: usize) -> f64 {
    let dphi = TAU / nodes as f64;
    let alpha = p.alpha;
    let offset = p.contact_offset();
    let mut sum = 0.0;
    for k in 0..nodes {
        let phi = k as f64 * dphi;
        let sv = p.body.support(phi);
        let n = Vec2::from_angle(phi + y.theta);
        // (V + Ω r⊥)·n with r⊥·n = -h'.
        let un = y.v.dot(n) - y.omega * sv.dh;
        sum += (sv.rho() + offset) * positive_part_mean(alpha * un, p.beta);
    }
    sum * dphi / (alpha * alpha)
}

/// Dominating rate for thinning at fixed `(V, Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEnvelope {
    /// Total proposal rate `λ̄`.
    pub lambda_bar: f64,
    /// `∫ M_β (v·n)_− dv = (2πβ)^{-1/2}`.
    pub flux: f64,
    /// Bound on `|(V + Ω r⊥)·n|` over the boundary.
    pub wall_speed: f64,
}

impl RateEnvelope {
    pub fn new(y: &BodyState, p: &SimParams) -> Self {
        let flux = (2.0 * PI * p.beta).sqrt().recip();
        let wall_speed = y.v.norm() + p.consts.r_max_alpha * y.omega.abs();
        let lambda_bar = p.consts.perimeter_alpha / (p.alpha * p.alpha) * (flux + p.alpha * wall_speed);
        RateEnvelope {
            lambda_bar,
            flux,
            wall_speed,
        }
    }

    /// Confirms `λ̄` dominates the quadrature rate (with a small relative slack).
    pub fn verify(&self, y: &BodyState, p: &SimParams) -> Result<()> {
        let rate = total_jump_rate(y, p);
        if rate > self.lambda_bar * (1.0 + 1e-3) {
            return Err(Error::EnvelopeBreach(rate / self.lambda_bar));
        }
        Ok(())
    }
}

/// A proposed collision: contact angle, atom velocity and thinning uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub phi: f64,
    pub v: Vec2,
    pub u: f64,
}

/// Draws a proposal from the envelope density
/// `dσ_α · M_β(v) ((v·n)_− + α c) / (L_α (flux + α c))`.
pub fn propose<R: Rng + ?Sized>(
    y: &BodyState,
    env: &RateEnvelope,
    arc: &ArcLengthTable,
    p: &SimParams,
    rng: &mut R,
) -> Proposal {
    let phi = arc.sample(&p.body, rng);
    let n = Vec2::from_angle(phi + y.theta);
    let sd = p.beta.recip().sqrt();
    let ac = p.alpha * env.wall_speed;
    let v = if rng.random::<f64>() * (env.flux + ac) < env.flux {
        // Flux-weighted: inward normal speed is Rayleigh, tangential Gaussian.
        let e: f64 = Exp::new(1.0).expect("rate 1").sample(rng);
        let speed = sd * (2.0 * e).sqrt();
        let tangential: f64 = StandardNormal.sample(rng);
        n * (-speed) + n.perp() * (sd * tangential)
    } else {
        let g = Normal::new(0.0, sd).expect("beta > 0");
        Vec2::new(g.sample(rng), g.sample(rng))
    };
    Proposal {
        phi,
        v,
        u: rng.random(),
    }
}

/// Outcome of one accepted jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub body: BodyState,
    pub phi: f64,
    pub v: Vec2,
    pub v_post: Vec2,
    pub flags: PathologyFlags,
}

/// Thinning step: accepts the proposal with probability
/// `(b_α)_− / ((v·n)_− + α c)`.
pub fn accept(y: &BodyState, prop: &Proposal, env: &RateEnvelope, p: &SimParams) -> Result<Option<Jump>> {
    let c = contact_data(y, prop.v, prop.phi, p);
    let b_minus = (-c.b).max(0.0);
    if b_minus == 0.0 {
        return Ok(None);
    }
    let bound = (-prop.v.dot(c.normal)).max(0.0) + p.alpha * env.wall_speed;
    let ratio = b_minus / bound;
    if ratio > 1.0 + 1e-12 {
        return Err(Error::EnvelopeBreach(ratio));
    }
    if prop.u >= ratio {
        return Ok(None);
    }
    let out = collide_body_atom(y, prop.v, prop.phi, p);
    let flags = pathology_flags((y, prop.v), (&out.body, out.v), p);
    Ok(Some(Jump {
        body: out.body,
        phi: prop.phi,
        v: prop.v,
        v_post: out.v,
        flags,
    }))
}

/// One thinning proposal at the current state: `None` on rejection.
pub fn sample_jump<R: Rng + ?Sized>(y: &BodyState, p: &SimParams, rng: &mut R) -> Result<Option<Jump>> {
    let env = RateEnvelope::new(y, p);
    let arc = p.body.arc_length_table(p.contact_offset());
    let prop = propose(y, &env, &arc, p, rng);
    accept(y, &prop, &env, p)
}

/// Free transport of the body for time `dt`.
pub fn transport(y: &BodyState, dt: f64, p: &SimParams) -> BodyState {
    BodyState {
        x: (y.x + y.v * dt).wrap_torus(),
        theta: (y.theta + dt * y.omega / p.body_scale()).rem_euclid(TAU),
        ..*y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Accepted proposals removed by the recollision gate.
    pub gated: u64,
}

#[derive(Debug, Clone)]
pub struct JumpRun {
    pub record: TrajectoryRecord,
    pub stats: JumpStats,
}

/// Mutable state of one jump-process path.
struct Path<'a> {
    p: &'a SimParams,
    mode: JumpMode,
    t: f64,
    y: BodyState,
    env: RateEnvelope,
    record: TrajectoryRecord,
    stats: JumpStats,
    sample_dt: f64,
    horizon_factor: f64,
    alive: bool,
}

enum StepOutcome {
    Rejected,
    Jumped,
    Gated,
    Killed,
}

impl<'a> Path<'a> {
    fn new(p: &'a SimParams, y0: BodyState, mode: JumpMode, sample_dt: f64) -> Self {
        let mut record = TrajectoryRecord::new(RecordKind::Jump, y0);
        record.samples.push(BodySample { t: 0.0, body: y0 });
        Path {
            p,
            mode,
            t: 0.0,
            y: y0,
            env: RateEnvelope::new(&y0, p),
            record,
            stats: JumpStats::default(),
            sample_dt,
            horizon_factor: DEFAULT_HORIZON_FACTOR,
            alive: true,
        }
    }

    /// Moves to time `t`, recording samples on the way.
    fn advance_to(&mut self, t: f64) {
        loop {
            let next = self.record.samples.len() as f64 * self.sample_dt;
            if next > t {
                break;
            }
            let body = transport(&self.y, next - self.t, self.p);
            self.record.samples.push(BodySample { t: next, body });
        }
        self.y = transport(&self.y, t - self.t, self.p);
        self.t = t;
    }

    fn apply(&mut self, prop: &Proposal) -> Result<StepOutcome> {
        self.stats.proposals += 1;
        let Some(jump) = accept(&self.y, prop, &self.env, self.p)? else {
            return Ok(StepOutcome::Rejected);
        };
        self.stats.accepted += 1;
        if self.mode == JumpMode::Killed
            && backward_recollides(&self.y, prop.v, prop.phi, self.p, self.horizon_factor)? {
                self.stats.gated += 1;
                return Ok(StepOutcome::Gated);
            }
        let rec = CollisionRecord {
            t: self.t,
            phi: jump.phi,
            pre: self.y,
            post: jump.body,
            v_pre: jump.v,
            v_post: jump.v_post,
            flags: jump.flags,
        };
        self.record.collisions.push(rec);
        if self.mode == JumpMode::Killed {
            if let Some(reason) = jump.flags.reason() {
                self.kill(reason);
                return Ok(StepOutcome::Killed);
            }
        }
        self.y = jump.body;
        self.env = RateEnvelope::new(&self.y, self.p);
        Ok(StepOutcome::Jumped)
    }

    fn kill(&mut self, reason: KillReason) {
        self.alive = false;
        self.record.killed_at = Some(Kill { t: self.t, reason });
        self.record.t_end = self.t;
        self.record.final_body = self.y;
    }

    fn finish(mut self, t_end: f64) -> JumpRun {
        if self.alive {
            self.advance_to(t_end);
            if self.record.samples.last().is_none_or(|s| s.t < t_end - 1e-12) {
                self.record.samples.push(BodySample { t: t_end, body: self.y });
            }
            self.record.t_end = t_end;
            self.record.final_body = self.y;
        }
        JumpRun {
            record: self.record,
            stats: self.stats,
        }
    }
}

/// Runs one path of the jump process on `[0, t_end]`.
pub fn run_jump_process(
    y0: BodyState,
    t_end: f64,
    mode: JumpMode,
    p: &SimParams,
    rng: &mut SimRng,
    sample_dt: f64,
) -> Result<JumpRun> {
    if !(t_end >= 0.0) {
        return Err(Error::config("T", "must be non-negative"));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::config("sample_dt", "must be positive"));
    }
    let arc = p.body.arc_length_table(p.contact_offset());
    let mut path = Path::new(p, y0, mode, sample_dt);
    loop {
        let dt: f64 = Exp::new(path.env.lambda_bar).expect("positive rate").sample(rng);
        if path.t + dt > t_end {
            break;
        }
        path.advance_to(path.t + dt);
        let prop = propose(&path.y, &path.env, &arc, p, rng);
        if let StepOutcome::Killed = path.apply(&prop)? {
            break;
        }
    }
    Ok(path.finish(t_end))
}

/// Plain and killed paths driven by one proposal stream.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub plain: JumpRun,
    pub killed: JumpRun,
    /// First time the killed path is absorbed or gated while the plain
    /// one jumps.
    pub decouple_time: Option<f64>,
}

pub fn coupled_run(y0: BodyState, t_end: f64, p: &SimParams, rng: &mut SimRng, sample_dt: f64) -> Result<CoupledRun> {
    let arc = p.body.arc_length_table(p.contact_offset());
    let mut plain = Path::new(p, y0, JumpMode::Plain, sample_dt);
    let mut killed = Path::new(p, y0, JumpMode::Killed, sample_dt);
    let mut decouple_time = None;
    while decouple_time.is_none() {
        let dt: f64 = Exp::new(plain.env.lambda_bar).expect("positive rate").sample(rng);
        if plain.t + dt > t_end {
            return Ok(CoupledRun {
                plain: plain.finish(t_end),
                killed: killed.finish(t_end),
                decouple_time,
            });
        }
        let t = plain.t + dt;
        plain.advance_to(t);
        killed.advance_to(t);
        let prop = propose(&plain.y, &plain.env, &arc, p, rng);
        let a = plain.apply(&prop)?;
        let b = killed.apply(&prop)?;
        match (a, b) {
            (StepOutcome::Jumped, StepOutcome::Gated) | (_, StepOutcome::Killed) => decouple_time = Some(t),
            _ => {}
        }
    }
    let mut plain_rng = SimRng::from_rng(rng);
    let mut killed_rng = SimRng::from_rng(rng);
    let plain = continue_path(plain, t_end, &arc, &mut plain_rng)?;
    let killed = continue_path(killed, t_end, &arc, &mut killed_rng)?;
    Ok(CoupledRun {
        plain,
        killed,
        decouple_time,
    })
}

fn continue_path(mut path: Path<'_>, t_end: f64, arc: &ArcLengthTable, rng: &mut SimRng) -> Result<JumpRun> {
    let p = path.p;
    while path.alive {
        let dt: f64 = Exp::new(path.env.lambda_bar).expect("positive rate").sample(rng);
        if path.t + dt > t_end {
            break;
        }
        path.advance_to(path.t + dt);
        let prop = propose(&path.y, &path.env, arc, p, rng);
        if let StepOutcome::Killed = path.apply(&prop)? {
            break;
        }
    }
    Ok(path.finish(t_end))
}
