//! Event-driven hard-sphere dynamics of `N` atoms and one rigid body on the
//! unit torus.
//!
//! Positions are stored lazily: each particle keeps a reference position at
//! its own reference time and moves in a straight line until its velocity
//! changes. Atoms move at `v/α` in world units, the body at `V` and rotates
//! at `(α/ε)Ω`.

use crate::error::{Error, Result};
use crate::record::{BodySample, CollisionRecord, Kill, RecordKind, TrajectoryRecord};
use crate::scattering::{
    collide_atoms, collide_body_atom, pathology_flags, system_conserved, AtomState, BodyState, Conserved,
    KillReason, SimParams,
};
use crate::contact::{ContactDetector, RelativeMotion};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

/// Relative tolerance on contact distances when checking for overlaps.
pub const OVERLAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    /// Stop at the first pathological atom-body collision.
    Killed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    AtomAtom(usize, usize),
    AtomBody(usize),
    /// Atom `i` leaves its cell along `axis` (0 or 1) in direction `dir`.
    Cross { i: usize, axis: u8, dir: i8 },
    BodyCross { axis: u8, dir: i8 },
    Sample,
}

impl EventKind {
    fn rank(&self) -> (u8, usize, usize) {
        match *self {
            EventKind::AtomAtom(i, j) => (0, i, j),
            EventKind::AtomBody(i) => (1, i, 0),
            EventKind::Cross { i, .. } => (2, i, 0),
            EventKind::BodyCross { .. } => (3, 0, 0),
            EventKind::Sample => (4, 0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    epoch_a: u64,
    epoch_b: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.kind.rank().cmp(&self.kind.rank()))
    }
}

/// What [`Engine::step`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Processed {
    AtomAtom { t: f64, i: usize, j: usize },
    AtomBody { t: f64, i: usize, record: CollisionRecord },
    Grazing { t: f64, i: usize },
    CellCrossing { t: f64 },
    Sample { t: f64 },
    Killed { t: f64, reason: KillReason },
    /// Reached the end of the run.
    Finished { t: f64 },
}

/// Event counts and conservation diagnostics of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MdStats {
    pub atom_atom: u64,
    pub atom_body: u64,
    pub cell_crossings: u64,
    pub grazing: u64,
    pub stale: u64,
    pub energy_drift: f64,
    pub momentum_drift: f64,
    pub cells_per_side: usize,
}

#[derive(Debug, Clone)]
pub struct MdRun {
    pub record: TrajectoryRecord,
    pub stats: MdStats,
    pub atoms: Vec<AtomState>,
}

#[derive(Debug, Clone, Copy)]
struct Atom {
    x: Vec2,
    v: Vec2,
    t_ref: f64,
    cell: (usize, usize),
    epoch: u64,
}

#[derive(Debug, Clone, Copy)]
struct Body {
    x: Vec2,
    v: Vec2,
    theta: f64,
    omega: f64,
    t_ref: f64,
    cell: (usize, usize),
    epoch: u64,
}

/// Earliest time `s ≥ 0` at which two discs approaching with relative
/// position `d` and relative velocity `u` reach distance `sigma`.
pub fn predict_atom_atom(d: Vec2, u: Vec2, sigma: f64) -> Option<f64> {
    let b = d.dot(u);
    if b >= 0.0 {
        return None;
    }
    let uu = u.norm_sq();
    let c = d.norm_sq() - sigma * sigma;
    let disc = b * b - uu * c;
    if disc < 0.0 {
        return None;
    }
    Some((c / (-b + disc.sqrt())).max(0.0))
}

/// First atom-body contact within `window` world time. `d` is the atom
/// position relative to the body centre.
pub fn predict_atom_body(
    detector: &ContactDetector<'_>,
    p: &SimParams,
    d: Vec2,
    atom_v: Vec2,
    body: &BodyState,
    window: f64,
) -> Result<Option<f64>> {
    let scale = p.body_scale();
    let m = RelativeMotion {
        y0: d / scale,
        w: atom_v / p.alpha - body.v,
        theta0: body.theta,
        omega: body.omega,
    };
    Ok(detector.first_contact(&m, window / scale)?.map(|s| s * scale))
}

/// Event-driven simulation state.
pub struct Engine {
    p: SimParams,
    mode: Mode,
    t: f64,
    t_end: f64,
    atoms: Vec<Atom>,
    body: Body,
    n_cells: usize,
    edge: f64,
    cells: Vec<Vec<usize>>,
    queue: BinaryHeap<Event>,
    sample_dt: f64,
    next_sample: f64,
    record: TrajectoryRecord,
    stats: MdStats,
    initial: Conserved,
    momentum_scale: f64,
    finished: bool,
}

impl Engine {
    pub fn new(p: &SimParams, body: BodyState, atoms: &[AtomState], mode: Mode, sample_dt: f64) -> Result<Self> {
        if !(sample_dt > 0.0) {
            return Err(Error::config("sample_dt", "must be positive"));
        }
        let reach = p.body_scale() * p.consts.r_max_alpha;
        let edge_min = p.epsilon.max(reach);
        let max_cells = (1.0 / edge_min).floor() as usize;
        if max_cells < 5 {
            return Err(Error::config(
                "epsilon",
                format!("interaction range {edge_min} too large for the unit torus"),
            ));
        }
        let n_cells = ((atoms.len() as f64).sqrt().ceil() as usize).clamp(5, max_cells);
        let edge = 1.0 / n_cells as f64;
        let cell_of = |x: Vec2| {
            (
                ((x.x * n_cells as f64) as usize).min(n_cells - 1),
                ((x.y * n_cells as f64) as usize).min(n_cells - 1),
            )
        };
        let bx = body.x.wrap_torus();
        let b = Body {
            x: bx,
            v: body.v,
            theta: body.theta.rem_euclid(TAU),
            omega: body.omega,
            t_ref: 0.0,
            cell: cell_of(bx),
            epoch: 0,
        };
        let mut cells = vec![Vec::new(); n_cells * n_cells];
        let atoms: Vec<Atom> = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let x = a.x.wrap_torus();
                let cell = cell_of(x);
                cells[cell.0 * n_cells + cell.1].push(i);
                Atom {
                    x,
                    v: a.v,
                    t_ref: 0.0,
                    cell,
                    epoch: 0,
                }
            })
            .collect();
        let initial = system_conserved(&body, atoms.iter().map(|a| a.v), p);
        let momentum_scale = body.v.norm() + atoms.iter().map(|a| p.alpha * a.v.norm()).sum::<f64>();
        let mut record = TrajectoryRecord::new(RecordKind::Md, body);
        record.samples.push(BodySample { t: 0.0, body: b.state_at(0.0, p) });
        let engine = Engine {
            p: p.clone(),
            mode,
            t: 0.0,
            t_end: f64::INFINITY,
            atoms,
            body: b,
            n_cells,
            edge,
            cells,
            queue: BinaryHeap::new(),
            sample_dt,
            next_sample: sample_dt,
            record,
            stats: MdStats {
                cells_per_side: n_cells,
                ..Default::default()
            },
            initial,
            momentum_scale: momentum_scale.max(1e-300),
            finished: false,
        };
        engine.check_overlaps()?;
        Ok(engine)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &SimParams {
        &self.p
    }

    pub fn body_state(&self) -> BodyState {
        self.body.state_at(self.t, &self.p)
    }

    pub fn atom_states(&self) -> Vec<AtomState> {
        self.atoms
            .iter()
            .map(|a| AtomState {
                x: a.pos(self.t, self.p.alpha),
                v: a.v,
            })
            .collect()
    }

    pub fn record(&self) -> &TrajectoryRecord {
        &self.record
    }

    pub fn stats(&self) -> MdStats {
        let mut s = self.stats;
        let now = system_conserved(&self.body_state(), self.atoms.iter().map(|a| a.v), &self.p);
        s.energy_drift = (now.energy - self.initial.energy).abs() / self.initial.energy.max(1e-300);
        s.momentum_drift = (now.momentum - self.initial.momentum).norm() / self.momentum_scale;
        s
    }

    /// Sets the end time and schedules all initial events.
    pub fn start(&mut self, t_end: f64) -> Result<()> {
        self.t_end = t_end;
        self.queue.clear();
        for i in 0..self.atoms.len() {
            self.schedule_crossing(i);
            let (cx, cy) = self.atoms[i].cell;
            for c in self.neighbourhood(cx, cy) {
                for k in 0..self.cells[c].len() {
                    let j = self.cells[c][k];
                    if j > i {
                        self.predict_pair(i, j);
                    }
                }
            }
            self.predict_body(i)?;
        }
        self.schedule_body_crossing();
        if self.next_sample <= t_end {
            self.push(self.next_sample, EventKind::Sample, 0, 0);
        }
        Ok(())
    }

    /// Runs to `t_end` (or to the kill time).
    pub fn run(mut self, t_end: f64) -> Result<MdRun> {
        if !(t_end > 0.0) {
            return Err(Error::config("T", "must be positive"));
        }
        self.start(t_end)?;
        loop {
            match self.step()? {
                Processed::Finished { .. } | Processed::Killed { .. } => break,
                _ => {}
            }
        }
        let stats = self.stats();
        let atoms = self.atom_states();
        Ok(MdRun {
            record: self.record,
            stats,
            atoms,
        })
    }

    /// Pops and processes the next valid event.
    pub fn step(&mut self) -> Result<Processed> {
        if self.finished {
            return Ok(Processed::Finished { t: self.t });
        }
        if self.t_end.is_infinite() {
            return Err(Error::config("T", "call start() before stepping"));
        }
        loop {
            let Some(ev) = self.queue.pop() else {
                return Ok(self.finish(self.t_end));
            };
            if ev.t > self.t_end {
                return Ok(self.finish(self.t_end));
            }
            if !self.is_valid(&ev) {
                self.stats.stale += 1;
                continue;
            }
            self.maybe_purge();
            self.t = ev.t;
            return self.process(ev);
        }
    }

    fn finish(&mut self, t_end: f64) -> Processed {
        self.t = t_end;
        self.finished = true;
        let b = self.body_state();
        let last = self.record.samples.last().map(|s| s.t);
        if last.is_none_or(|t| t < t_end - 1e-12) {
            self.record.samples.push(BodySample { t: t_end, body: b });
        }
        self.record.t_end = t_end;
        self.record.final_body = b;
        Processed::Finished { t: t_end }
    }

    fn is_valid(&self, ev: &Event) -> bool {
        match ev.kind {
            EventKind::AtomAtom(i, j) => self.atoms[i].epoch == ev.epoch_a && self.atoms[j].epoch == ev.epoch_b,
            EventKind::AtomBody(i) => self.atoms[i].epoch == ev.epoch_a && self.body.epoch == ev.epoch_b,
            EventKind::Cross { i, .. } => self.atoms[i].epoch == ev.epoch_a,
            EventKind::BodyCross { .. } => self.body.epoch == ev.epoch_b,
            EventKind::Sample => true,
        }
    }

    fn maybe_purge(&mut self) {
        let limit = 64 * (self.atoms.len() + 1) + 4096;
        if self.queue.len() > limit {
            let events = std::mem::take(&mut self.queue).into_vec();
            self.queue = events.into_iter().filter(|e| self.is_valid(e)).collect();
        }
    }

    fn process(&mut self, ev: Event) -> Result<Processed> {
        let t = ev.t;
        match ev.kind {
            EventKind::AtomAtom(i, j) => {
                self.sync_atom(i);
                self.sync_atom(j);
                let d = (self.atoms[j].x - self.atoms[i].x).min_image();
                let dist = d.norm();
                if dist < self.p.epsilon * (1.0 - OVERLAP_TOL) {
                    return Err(Error::OverlapDetected {
                        t,
                        detail: format!("atoms {i} and {j} at distance {dist:e}"),
                    });
                }
                let (vi, vj) = collide_atoms(self.atoms[i].v, self.atoms[j].v, d / dist);
                self.atoms[i].v = vi;
                self.atoms[j].v = vj;
                self.stats.atom_atom += 1;
                self.after_atom_change(i)?;
                self.after_atom_change(j)?;
                Ok(Processed::AtomAtom { t, i, j })
            }
            EventKind::AtomBody(i) => self.process_atom_body(i),
            EventKind::Cross { i, axis, dir } => {
                self.sync_atom(i);
                let old = self.atoms[i].cell;
                let new = self.shift(old, axis, dir);
                let list = &mut self.cells[old.0 * self.n_cells + old.1];
                let k = list.iter().position(|&x| x == i).expect("atom listed in its cell");
                list.swap_remove(k);
                self.cells[new.0 * self.n_cells + new.1].push(i);
                self.atoms[i].cell = new;
                self.stats.cell_crossings += 1;
                // Only cells that just came into range need new pair predictions.
                for c in self.entering_cells(new, axis, dir) {
                    for k in 0..self.cells[c].len() {
                        let j = self.cells[c][k];
                        if j != i {
                            self.predict_pair(i, j);
                        }
                    }
                }
                self.predict_body(i)?;
                self.schedule_crossing(i);
                Ok(Processed::CellCrossing { t })
            }
            EventKind::BodyCross { axis, dir } => {
                self.body.cell = self.shift(self.body.cell, axis, dir);
                let (cx, cy) = self.body.cell;
                for c in self.neighbourhood(cx, cy) {
                    for k in 0..self.cells[c].len() {
                        let j = self.cells[c][k];
                        self.predict_body(j)?;
                    }
                }
                self.schedule_body_crossing();
                Ok(Processed::CellCrossing { t })
            }
            EventKind::Sample => {
                let body = self.body_state();
                self.record.samples.push(BodySample { t, body });
                self.next_sample = (self.record.samples.len()) as f64 * self.sample_dt;
                if self.next_sample <= self.t_end {
                    self.push(self.next_sample, EventKind::Sample, 0, 0);
                }
                Ok(Processed::Sample { t })
            }
        }
    }

    fn process_atom_body(&mut self, i: usize) -> Result<Processed> {
        let t = self.t;
        self.sync_atom(i);
        self.sync_body();
        let p = &self.p;
        let y = self.body_state();
        let d = (self.atoms[i].x - y.x).min_image();
        let scale = p.body_scale();
        let (g, phi) = p
            .body
            .signed_distance_offset(y.theta, scale, p.contact_offset(), d, None)?;
        if g.abs() > 1e-9 * scale {
            return Err(Error::OverlapDetected {
                t,
                detail: format!("atom {i} at body distance {g:e} when contact was predicted"),
            });
        }
        let v = self.atoms[i].v;
        let out = collide_body_atom(&y, v, phi, p);
        if !out.incoming {
            self.stats.grazing += 1;
            return Ok(Processed::Grazing { t, i });
        }
        let flags = pathology_flags((&y, v), (&out.body, out.v), p);
        let record = CollisionRecord {
            t,
            phi,
            pre: y,
            post: out.body,
            v_pre: v,
            v_post: out.v,
            flags,
        };
        self.stats.atom_body += 1;
        if self.mode == Mode::Killed {
            if let Some(reason) = flags.reason() {
                self.record.collisions.push(record);
                self.record.killed_at = Some(Kill { t, reason });
                self.record.t_end = t;
                self.record.final_body = y;
                self.finished = true;
                return Ok(Processed::Killed { t, reason });
            }
        }
        self.record.collisions.push(record);
        self.atoms[i].v = out.v;
        self.body.v = out.body.v;
        self.body.omega = out.body.omega;
        self.body.epoch += 1;
        self.after_atom_change(i)?;
        let (cx, cy) = self.body.cell;
        for c in self.neighbourhood(cx, cy) {
            for k in 0..self.cells[c].len() {
                let j = self.cells[c][k];
                if j != i {
                    self.predict_body(j)?;
                }
            }
        }
        self.schedule_body_crossing();
        Ok(Processed::AtomBody { t, i, record })
    }

    fn after_atom_change(&mut self, i: usize) -> Result<()> {
        self.atoms[i].epoch += 1;
        let (cx, cy) = self.atoms[i].cell;
        for c in self.neighbourhood(cx, cy) {
            for k in 0..self.cells[c].len() {
                let j = self.cells[c][k];
                if j != i {
                    self.predict_pair(i, j);
                }
            }
        }
        self.predict_body(i)?;
        self.schedule_crossing(i);
        Ok(())
    }

    fn push(&mut self, t: f64, kind: EventKind, epoch_a: u64, epoch_b: u64) {
        self.queue.push(Event {
            t,
            kind,
            epoch_a,
            epoch_b,
        });
    }

    fn sync_atom(&mut self, i: usize) {
        let a = &mut self.atoms[i];
        a.x = a.pos(self.t, self.p.alpha);
        a.t_ref = self.t;
    }

    fn sync_body(&mut self) {
        let s = self.body.state_at(self.t, &self.p);
        self.body.x = s.x;
        self.body.theta = s.theta;
        self.body.t_ref = self.t;
    }

    fn predict_pair(&mut self, i: usize, j: usize) {
        let (a, b) = (&self.atoms[i], &self.atoms[j]);
        let alpha = self.p.alpha;
        let d = (b.pos(self.t, alpha) - a.pos(self.t, alpha)).min_image();
        let u = (b.v - a.v) / alpha;
        if let Some(s) = predict_atom_atom(d, u, self.p.epsilon) {
            let t = self.t + s;
            if t <= self.t_end {
                let (ea, eb) = (a.epoch, b.epoch);
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let (elo, ehi) = if i < j { (ea, eb) } else { (eb, ea) };
                self.push(t, EventKind::AtomAtom(lo, hi), elo, ehi);
            }
        }
    }

    fn in_range(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let n = self.n_cells;
        let close = |x: usize, y: usize| {
            let d = (x + n - y) % n;
            d <= 1 || d == n - 1
        };
        close(a.0, b.0) && close(a.1, b.1)
    }

    fn predict_body(&mut self, i: usize) -> Result<()> {
        if !self.in_range(self.atoms[i].cell, self.body.cell) {
            return Ok(());
        }
        let a = self.atoms[i];
        let y = self.body_state();
        let window = self
            .crossing(a.pos(self.t, self.p.alpha), a.cell, a.v / self.p.alpha)
            .0
            .min(self.crossing(y.x, self.body.cell, y.v).0)
            .min(self.t_end - self.t);
        if window < 0.0 {
            return Ok(());
        }
        let d = (a.pos(self.t, self.p.alpha) - y.x).min_image();
        let det = self.p.detector();
        if let Some(s) = predict_atom_body(&det, &self.p, d, a.v, &y, window)? {
            let (ea, eb) = (a.epoch, self.body.epoch);
            self.push(self.t + s, EventKind::AtomBody(i), ea, eb);
        }
        Ok(())
    }

    /// Time until a point in logical cell `cell` moving at `u` leaves it,
    /// with the axis and direction of the exit.
    fn crossing(&self, x: Vec2, cell: (usize, usize), u: Vec2) -> (f64, u8, i8) {
        let mut best = (f64::INFINITY, 0u8, 0i8);
        for (axis, (xc, c, uc)) in [(x.x, cell.0, u.x), (x.y, cell.1, u.y)].into_iter().enumerate() {
            let lo = c as f64 * self.edge;
            let mut local = xc - lo;
            if local > 0.5 {
                local -= 1.0;
            } else if local < -0.5 {
                local += 1.0;
            }
            let (s, dir) = if uc > 0.0 {
                ((self.edge - local) / uc, 1)
            } else if uc < 0.0 {
                (-local / uc, -1)
            } else {
                continue;
            };
            let s = s.max(0.0);
            if s < best.0 {
                best = (s, axis as u8, dir);
            }
        }
        best
    }

    fn schedule_crossing(&mut self, i: usize) {
        let a = self.atoms[i];
        let (s, axis, dir) = self.crossing(a.pos(self.t, self.p.alpha), a.cell, a.v / self.p.alpha);
        let t = self.t + s;
        if t <= self.t_end {
            self.push(t, EventKind::Cross { i, axis, dir }, a.epoch, 0);
        }
    }

    fn schedule_body_crossing(&mut self) {
        let y = self.body_state();
        let (s, axis, dir) = self.crossing(y.x, self.body.cell, y.v);
        let t = self.t + s;
        if t <= self.t_end {
            self.push(t, EventKind::BodyCross { axis, dir }, 0, self.body.epoch);
        }
    }

    fn shift(&self, c: (usize, usize), axis: u8, dir: i8) -> (usize, usize) {
        let n = self.n_cells;
        let step = |x: usize| if dir > 0 { (x + 1) % n } else { (x + n - 1) % n };
        if axis == 0 {
            (step(c.0), c.1)
        } else {
            (c.0, step(c.1))
        }
    }

    fn neighbourhood(&self, cx: usize, cy: usize) -> impl Iterator<Item = usize> {
        let n = self.n_cells;
        (0..9).map(move |k| {
            let ix = (cx + n + k / 3 - 1) % n;
            let iy = (cy + n + k % 3 - 1) % n;
            ix * n + iy
        })
    }

    /// The three cells that enter the 3×3 neighbourhood after moving into `new`.
    fn entering_cells(&self, new: (usize, usize), axis: u8, dir: i8) -> impl Iterator<Item = usize> {
        let n = self.n_cells;
        (0..3).map(move |k| {
            let (ix, iy) = if axis == 0 {
                ((new.0 as isize + dir as isize).rem_euclid(n as isize) as usize, (new.1 + n + k - 1) % n)
            } else {
                ((new.0 + n + k - 1) % n, (new.1 as isize + dir as isize).rem_euclid(n as isize) as usize)
            };
            ix * n + iy
        })
    }

    /// Exhaustive exclusion check (quadratic in `N`).
    pub fn check_overlaps(&self) -> Result<()> {
        let alpha = self.p.alpha;
        let y = self.body_state();
        let scale = self.p.body_scale();
        let pos: Vec<Vec2> = self.atoms.iter().map(|a| a.pos(self.t, alpha)).collect();
        for i in 0..pos.len() {
            for j in 0..i {
                let d = (pos[i] - pos[j]).min_image().norm();
                if d < self.p.epsilon * (1.0 - OVERLAP_TOL) {
                    return Err(Error::OverlapDetected {
                        t: self.t,
                        detail: format!("atoms {i} and {j} at distance {d:e}"),
                    });
                }
            }
            let d = (pos[i] - y.x).min_image();
            if d.norm() <= scale * self.p.consts.r_max_alpha {
                let (g, _) = self
                    .p
                    .body
                    .signed_distance_offset(y.theta, scale, self.p.contact_offset(), d, None)?;
                if g < -1e-9 * scale {
                    return Err(Error::OverlapDetected {
                        t: self.t,
                        detail: format!("atom {i} inside the body (gap {g:e})"),
                    });
                }
            }
        }
        Ok(())
    }
}

impl Atom {
    fn pos(&self, t: f64, alpha: f64) -> Vec2 {
        (self.x + self.v * ((t - self.t_ref) / alpha)).wrap_torus()
    }
}

impl Body {
    fn state_at(&self, t: f64, p: &SimParams) -> BodyState {
        let dt = t - self.t_ref;
        BodyState {
            x: (self.x + self.v * dt).wrap_torus(),
            v: self.v,
            theta: (self.theta + dt * self.omega / p.body_scale()).rem_euclid(TAU),
            omega: self.omega,
        }
    }
}

/// Convenience wrapper: build an engine and run it to `t_end`.
pub fn run(
    p: &SimParams,
    body: BodyState,
    atoms: &[AtomState],
    t_end: f64,
    mode: Mode,
    sample_dt: f64,
) -> Result<MdRun> {
    Engine::new(p, body, atoms, mode, sample_dt)?.run(t_end)
}

/// Fixed-step reference integrator with overlap detection and bisection.
///
/// Every step advances all particles by `dt`; if any pair overlaps at the
/// end of the step, the earliest contact inside the step is located by
/// bisection, the system is moved there and the collision is applied.
pub fn brute_force_run(
    p: &SimParams,
    body: BodyState,
    atoms: &[AtomState],
    t_end: f64,
    dt: f64,
) -> Result<MdRun> {
    let alpha = p.alpha;
    let scale = p.body_scale();
    let offset = p.contact_offset();
    let mut y = body;
    let mut xs: Vec<Vec2> = atoms.iter().map(|a| a.x).collect();
    let mut vs: Vec<Vec2> = atoms.iter().map(|a| a.v).collect();
    let mut record = TrajectoryRecord::new(RecordKind::Md, body);
    record.samples.push(BodySample { t: 0.0, body });
    let mut stats = MdStats::default();
    let initial = system_conserved(&body, vs.iter().copied(), p);
    let momentum_scale = body.v.norm() + vs.iter().map(|v| alpha * v.norm()).sum::<f64>();

    let advance = |y: &BodyState, xs: &[Vec2], vs: &[Vec2], s: f64| -> (BodyState, Vec<Vec2>) {
        let y2 = BodyState {
            x: (y.x + y.v * s).wrap_torus(),
            theta: (y.theta + s * y.omega / scale).rem_euclid(TAU),
            ..*y
        };
        let x2 = xs.iter().zip(vs).map(|(x, v)| (*x + *v * (s / alpha)).wrap_torus()).collect();
        (y2, x2)
    };
    let body_gap = |y: &BodyState, x: Vec2| -> Result<(f64, f64)> {
        let d = (x - y.x).min_image();
        if d.norm() > scale * p.consts.r_max_alpha * 1.5 {
            return Ok((d.norm() - scale * p.consts.r_max_alpha, 0.0));
        }
        p.body.signed_distance_offset(y.theta, scale, offset, d, None)
    };
    // Overlap indicator of one interaction after advancing by `s`.
    #[derive(Clone, Copy)]
    enum Pair {
        Atoms(usize, usize),
        Body(usize),
    }
    let overlapping = |y: &BodyState, xs: &[Vec2], vs: &[Vec2], pair: Pair| -> Result<bool> {
        Ok(match pair {
            Pair::Atoms(i, j) => {
                let d = (xs[j] - xs[i]).min_image();
                d.norm() < p.epsilon && d.dot(vs[j] - vs[i]) < 0.0
            }
            Pair::Body(i) => {
                let (g, _) = body_gap(y, xs[i])?;
                g < 0.0
            }
        })
    };

    let n = xs.len();
    let mut t = 0.0;
    while t < t_end {
        let h = dt.min(t_end - t);
        let (y1, x1) = advance(&y, &xs, &vs, h);
        let mut hits = Vec::new();
        for i in 0..n {
            for j in 0..i {
                if overlapping(&y1, &x1, &vs, Pair::Atoms(j, i))? {
                    hits.push(Pair::Atoms(j, i));
                }
            }
            if overlapping(&y1, &x1, &vs, Pair::Body(i))? {
                hits.push(Pair::Body(i));
            }
        }
        if hits.is_empty() {
            y = y1;
            xs = x1;
            t += h;
            continue;
        }
        // Earliest contact among the overlapping pairs.
        let mut best: Option<(f64, Pair)> = None;
        for pair in hits {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (ym, xm) = advance(&y, &xs, &vs, mid);
                if overlapping(&ym, &xm, &vs, pair)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if best.is_none_or(|(s, _)| hi < s) {
                best = Some((hi, pair));
            }
        }
        let (s, pair) = best.expect("at least one hit");
        let (ym, xm) = advance(&y, &xs, &vs, s);
        y = ym;
        xs = xm;
        t += s;
        match pair {
            Pair::Atoms(i, j) => {
                let d = (xs[j] - xs[i]).min_image();
                let (a, b) = collide_atoms(vs[i], vs[j], d / d.norm());
                vs[i] = a;
                vs[j] = b;
                stats.atom_atom += 1;
            }
            Pair::Body(i) => {
                let (_, phi) = body_gap(&y, xs[i])?;
                let out = collide_body_atom(&y, vs[i], phi, p);
                if !out.incoming {
                    stats.grazing += 1;
                    continue;
                }
                let flags = pathology_flags((&y, vs[i]), (&out.body, out.v), p);
                record.collisions.push(CollisionRecord {
                    t,
                    phi,
                    pre: y,
                    post: out.body,
                    v_pre: vs[i],
                    v_post: out.v,
                    flags,
                });
                vs[i] = out.v;
                y = out.body;
                stats.atom_body += 1;
            }
        }
    }
    record.samples.push(BodySample { t: t_end, body: y });
    record.t_end = t_end;
    record.final_body = y;
    let now = system_conserved(&y, vs.iter().copied(), p);
    stats.energy_drift = (now.energy - initial.energy).abs() / initial.energy.max(1e-300);
    stats.momentum_drift = (now.momentum - initial.momentum).norm() / momentum_scale.max(1e-300);
    let atoms = xs.into_iter().zip(vs).map(|(x, v)| AtomState { x, v }).collect();
    Ok(MdRun { record, stats, atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SupportBody;
    use crate::gibbs::sample_equilibrium;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn ellipse_params(n: usize, alpha: f64) -> SimParams {
        SimParams::new(n, alpha, 1.0, 0.1, SupportBody::ellipse(0.5, 0.3).unwrap()).unwrap()
    }

    #[test]
    fn head_on_gap() {
        let eps = 0.01;
        let s = predict_atom_atom(Vec2::new(3.0 * eps, 0.0), Vec2::new(-1.0, 0.0), eps).unwrap();
        assert!((s - 2.0 * eps).abs() < 1e-15);
        assert_eq!(predict_atom_atom(Vec2::new(3.0 * eps, 0.0), Vec2::new(1.0, 0.0), eps), None);
    }

    #[test]
    fn pair_prediction_matches_scan() {
        let mut rng = stream_rng(11, 0);
        let eps = 0.01;
        let mut checked = 0;
        while checked < 50 {
            let d = Vec2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            let u = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if d.norm() <= eps {
                continue;
            }
            let Some(s) = predict_atom_atom(d, u, eps) else { continue };
            // Coarse scan, then bisection.
            let dt = 1e-4;
            let mut t = 0.0;
            while (d + u * (t + dt)).norm() > eps {
                t += dt;
            }
            let (mut lo, mut hi) = (t, t + dt);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (d + u * mid).norm() > eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((s - lo).abs() < 1e-9, "{s} vs {lo}");
            checked += 1;
        }
    }

    #[test]
    fn static_disk_contact_is_quadratic_root() {
        let p = SimParams::new(1000, 0.1, 1.0, 0.1, SupportBody::disk(1.0).unwrap()).unwrap();
        let det = p.detector();
        let y = BodyState::at_rest();
        let d = Vec2::new(-0.05, 0.003);
        let v = Vec2::new(0.2, 0.0);
        let s = predict_atom_body(&det, &p, d, v, &y, 1.0).unwrap().unwrap();
        let r = p.body_scale() * (1.0 + p.alpha / 2.0);
        let u = v / p.alpha;
        let c = d.norm_sq() - r * r;
        let b = d.dot(u);
        let root = (-b - (b * b - u.norm_sq() * c).sqrt()) / u.norm_sq();
        assert!((s - root).abs() < 1e-10, "{s} vs {root}");
    }

    #[test]
    fn body_alone_is_free_flight() {
        let p = ellipse_params(500, 0.1);
        let y = BodyState {
            x: Vec2::new(0.9, 0.2),
            v: Vec2::new(0.7, -0.3),
            theta: 1.0,
            omega: 0.4,
        };
        let run = run(&p, y, &[], 2.0, Mode::Full, 0.5).unwrap();
        let f = run.record.final_body;
        assert_eq!(f.v, y.v);
        assert_eq!(f.omega, y.omega);
        let x = (y.x + y.v * 2.0).wrap_torus();
        assert!((f.x - x).min_image().norm() < 1e-14);
        assert_eq!(run.record.samples.len(), 5);
    }

    fn head_on_setup(p: &SimParams) -> (BodyState, AtomState) {
        let y = BodyState {
            x: Vec2::new(0.5, 0.5),
            v: Vec2::new(0.1, 0.05),
            theta: 0.3,
            omega: 0.2,
        };
        let atom = AtomState {
            x: Vec2::new(0.5 - 0.5 * p.body_scale() - 0.02, 0.501),
            v: Vec2::new(1.0, 0.0) * p.alpha,
        };
        (y, atom)
    }

    #[test]
    fn engineered_collision_matches_direct_law() {
        let p = ellipse_params(500, 0.1);
        let (y, atom) = head_on_setup(&p);
        let mut e = Engine::new(&p, y, &[atom], Mode::Full, 1.0).unwrap();
        e.start(1.0).unwrap();
        let det = p.detector();
        let t_hit = predict_atom_body(&det, &p, (atom.x - y.x).min_image(), atom.v, &y, 1.0)
            .unwrap()
            .unwrap();
        let rec = loop {
            match e.step().unwrap() {
                Processed::AtomBody { record, .. } => break record,
                Processed::Finished { .. } => panic!("no collision"),
                _ => {}
            }
        };
        assert!((rec.t - t_hit).abs() < 1e-15);
        // Move the pair to the contact by hand and apply the law.
        let yc = BodyState {
            x: y.x + y.v * t_hit,
            theta: y.theta + t_hit * y.omega / p.body_scale(),
            ..y
        };
        let xc = atom.x + atom.v * (t_hit / p.alpha);
        let (_, phi) = p
            .body
            .signed_distance_offset(yc.theta, p.body_scale(), p.contact_offset(), xc - yc.x, None)
            .unwrap();
        let out = collide_body_atom(&yc, atom.v, phi, &p);
        assert!((out.body.v - rec.post.v).norm() < 1e-12);
        assert!((out.body.omega - rec.post.omega).abs() < 1e-12);
        assert!((out.v - rec.v_post).norm() < 1e-12);
    }

    #[test]
    fn far_atoms_only_cross_cells() {
        let p = ellipse_params(500, 0.1);
        let y = BodyState {
            x: Vec2::new(0.5, 0.5),
            ..Default::default()
        };
        let atom = AtomState {
            x: Vec2::new(0.1, 0.1),
            v: Vec2::new(0.05, 0.0),
        };
        let run = run(&p, y, &[atom], 1.0, Mode::Full, 0.25).unwrap();
        assert_eq!(run.stats.atom_body + run.stats.atom_atom, 0);
        assert!(run.stats.cell_crossings > 0);
    }

    #[test]
    fn killed_on_comoving_atom() {
        // The atom rides along with the body; the rotating tip sweeps into it.
        let p = ellipse_params(500, 0.1);
        let y = BodyState {
            x: Vec2::new(0.5, 0.5),
            v: Vec2::new(0.3, 0.0),
            theta: 0.0,
            omega: 1.0,
        };
        let atom = AtomState {
            x: y.x + Vec2::new(0.0, 0.45 * p.body_scale()),
            v: y.v * p.alpha,
        };
        let run = run(&p, y, &[atom], 1.0, Mode::Killed, 1.0).unwrap();
        let kill = run.record.killed_at.expect("killed");
        let c = run.record.collisions.last().unwrap();
        assert!(c.flags.slow_relative_pre);
        assert_eq!(kill.t, c.t);
    }

    #[test]
    fn equilibrium_run_conserves() {
        let p = ellipse_params(500, 0.1);
        let mut rng = stream_rng(12, 0);
        let (y, atoms) = sample_equilibrium(&p, &mut rng).unwrap();
        let run = run(&p, y, &atoms, 1.0, Mode::Full, 0.1).unwrap();
        assert!(run.stats.atom_body > 20, "{:?}", run.stats);
        assert!(run.stats.energy_drift < 1e-9, "{:?}", run.stats);
        assert!(run.stats.momentum_drift < 1e-9, "{:?}", run.stats);
        for c in &run.record.collisions {
            let r = p.body.boundary(c.phi).r.rotate(c.pre.theta);
            let l0 = crate::scattering::contact_angular_momentum(&c.pre, r, &p);
            let l1 = crate::scattering::contact_angular_momentum(&c.post, r, &p);
            assert!((l0 - l1).abs() < 1e-12 * (1.0 + l0.abs()));
        }
        let e = Engine::new(&p, run.record.final_body, &run.atoms, Mode::Full, 1.0).unwrap();
        e.check_overlaps().unwrap();
    }

    #[test]
    fn disk_body_never_spins_up() {
        let p = SimParams::new(300, 0.1, 1.0, 0.1, SupportBody::disk(0.5).unwrap()).unwrap();
        let mut rng = stream_rng(13, 0);
        let (y, atoms) = sample_equilibrium(&p, &mut rng).unwrap();
        let run = run(&p, y, &atoms, 0.5, Mode::Full, 0.1).unwrap();
        assert!(run.stats.atom_body > 0);
        assert!(run.record.samples.iter().all(|s| s.body.omega == y.omega));
    }

    #[test]
    fn time_reversal_returns_home() {
        let p = SimParams::with_epsilon(20, 0.01, 0.2, 1.0, 0.1, SupportBody::ellipse(0.5, 0.3).unwrap()).unwrap();
        let mut rng = stream_rng(14, 0);
        let (y, atoms) = sample_equilibrium(&p, &mut rng).unwrap();
        let fwd = run(&p, y, &atoms, 0.05, Mode::Full, 1.0).unwrap();
        let back_atoms: Vec<AtomState> = fwd.atoms.iter().map(|a| AtomState { x: a.x, v: -a.v }).collect();
        let back = run(&p, fwd.record.final_body.reversed(), &back_atoms, 0.05, Mode::Full, 1.0).unwrap();
        let f = back.record.final_body;
        assert!((f.x - y.x).min_image().norm() < 1e-6);
        assert!((f.v + y.v).norm() < 1e-6);
        assert!((f.omega + y.omega).abs() < 1e-6);
        for (a, b) in back.atoms.iter().zip(&atoms) {
            assert!((a.x - b.x).min_image().norm() < 1e-6);
        }
    }

    #[test]
    fn killed_equals_full_without_pathology() {
        let p = ellipse_params(300, 0.1);
        let mut rng = stream_rng(15, 0);
        let (y, atoms) = sample_equilibrium(&p, &mut rng).unwrap();
        let full = run(&p, y, &atoms, 0.2, Mode::Full, 0.05).unwrap();
        let killed = run(&p, y, &atoms, 0.2, Mode::Killed, 0.05).unwrap();
        if full.record.collisions.iter().all(|c| c.flags.is_good()) {
            assert_eq!(full.record, killed.record);
        } else {
            let first_bad = full.record.collisions.iter().position(|c| !c.flags.is_good()).unwrap();
            assert_eq!(killed.record.collisions.len(), first_bad + 1);
        }
    }

    #[test]
    fn brute_force_agrees_on_small_system() {
        let p = SimParams::with_epsilon(5, 0.02, 0.2, 1.0, 0.1, SupportBody::ellipse(0.5, 0.3).unwrap()).unwrap();
        let (y, atom) = head_on_setup(&p);
        let atoms = [atom, AtomState { x: Vec2::new(0.2, 0.2), v: Vec2::new(0.1, 0.1) }];
        let ev = run(&p, y, &atoms, 0.1, Mode::Full, 1.0).unwrap();
        let bf = brute_force_run(&p, y, &atoms, 0.1, 2e-5).unwrap();
        assert!(!ev.record.collisions.is_empty());
        assert_eq!(ev.record.collisions.len(), bf.record.collisions.len());
        let (a, b) = (ev.record.final_body, bf.record.final_body);
        assert!((a.v - b.v).norm() < 1e-6 && (a.omega - b.omega).abs() < 1e-6);
        assert!((a.x - b.x).min_image().norm() < 1e-6);
    }
}
