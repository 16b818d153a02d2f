//! Body trajectories shared by the three simulation levels.

use crate::error::Result;
use crate::scattering::{BodyState, KillReason, PathologyFlags};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Body state observed at a fixed sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodySample {
    pub t: f64,
    pub body: BodyState,
}

/// One body collision (MD) or jump (Boltzmann process).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub t: f64,
    /// Body-frame normal angle of the contact.
    pub phi: f64,
    pub pre: BodyState,
    pub post: BodyState,
    pub v_pre: Vec2,
    pub v_post: Vec2,
    pub flags: PathologyFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kill {
    pub t: f64,
    pub reason: KillReason,
}

/// Label of the CSV `event_kind` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Md,
    Jump,
    Ou,
}

impl RecordKind {
    fn sample_label(self) -> &'static str {
        match self {
            RecordKind::Ou => "ou_sample",
            _ => "sample",
        }
    }

    fn collision_label(self) -> &'static str {
        match self {
            RecordKind::Md => "body_collision",
            _ => "jump",
        }
    }
}

/// Piecewise-constant-velocity body path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub kind: RecordKind,
    pub samples: Vec<BodySample>,
    pub collisions: Vec<CollisionRecord>,
    pub killed_at: Option<Kill>,
    /// Time reached (the kill time for killed runs).
    pub t_end: f64,
    pub final_body: BodyState,
}

impl TrajectoryRecord {
    pub fn new(kind: RecordKind, start: BodyState) -> Self {
        TrajectoryRecord {
            kind,
            samples: Vec::new(),
            collisions: Vec::new(),
            killed_at: None,
            t_end: 0.0,
            final_body: start,
        }
    }

    pub fn is_killed(&self) -> bool {
        self.killed_at.is_some()
    }

    /// Sampled values of one scalar component.
    pub fn series(&self, component: Component) -> Vec<f64> {
        self.samples.iter().map(|s| component.get(&s.body)).collect()
    }

    /// Body state at time `t` from the nearest sample at or before it.
    pub fn sample_at(&self, t: f64) -> Option<&BodySample> {
        let i = self.samples.partition_point(|s| s.t <= t + 1e-12);
        i.checked_sub(1).map(|k| &self.samples[k])
    }

    /// Writes samples and collisions, merged by time, as CSV.
    pub fn write_csv<W: Write>(&self, w: W, seed: u64) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "X1", "X2", "V1", "V2", "Theta", "Omega", "event_kind", "phi", "flags", "seed"])?;
        let (mut i, mut j) = (0, 0);
        let seed = seed.to_string();
        let mut row = |t: f64, b: &BodyState, kind: &str, phi: Option<f64>, flags: String| {
            out.write_record([
                fmt(t),
                fmt(b.x.x),
                fmt(b.x.y),
                fmt(b.v.x),
                fmt(b.v.y),
                fmt(b.theta),
                fmt(b.omega),
                kind.to_string(),
                phi.map(fmt).unwrap_or_default(),
                flags,
                seed.clone(),
            ])
        };
        while i < self.samples.len() || j < self.collisions.len() {
            let take_sample = j >= self.collisions.len()
                || (i < self.samples.len() && self.samples[i].t <= self.collisions[j].t);
            if take_sample {
                let s = &self.samples[i];
                row(s.t, &s.body, self.kind.sample_label(), None, String::new())?;
                i += 1;
            } else {
                let c = &self.collisions[j];
                row(c.t, &c.post, self.kind.collision_label(), Some(c.phi), c.flags.code())?;
                j += 1;
            }
        }
        if let Some(k) = &self.killed_at {
            let reason = serde_json::to_value(k.reason)?;
            row(k.t, &self.final_body, "killed", None, reason.as_str().unwrap_or("").to_string())?;
        }
        out.flush()?;
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Scalar coordinate of the body state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    X1,
    X2,
    V1,
    V2,
    Theta,
    Omega,
}

impl Component {
    pub fn get(self, b: &BodyState) -> f64 {
        match self {
            Component::X1 => b.x.x,
            Component::X2 => b.x.y,
            Component::V1 => b.v.x,
            Component::V2 => b.v.y,
            Component::Theta => b.theta,
            Component::Omega => b.omega,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_merges_by_time() {
        let b = BodyState::at_rest();
        let mut r = TrajectoryRecord::new(RecordKind::Jump, b);
        r.samples.push(BodySample { t: 0.0, body: b });
        r.samples.push(BodySample { t: 1.0, body: b });
        r.collisions.push(CollisionRecord {
            t: 0.5,
            phi: 0.1,
            pre: b,
            post: b,
            v_pre: Vec2::ZERO,
            v_post: Vec2::ZERO,
            flags: PathologyFlags {
                large_speed: true,
                ..Default::default()
            },
        });
        let mut buf = Vec::new();
        r.write_csv(&mut buf, 42).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let kinds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(7).unwrap()).collect();
        assert_eq!(kinds, ["sample", "jump", "sample"]);
        assert!(text.lines().nth(2).unwrap().contains(",S,42"));
    }

    #[test]
    fn sample_lookup() {
        let b = BodyState::at_rest();
        let mut r = TrajectoryRecord::new(RecordKind::Ou, b);
        for k in 0..5 {
            r.samples.push(BodySample { t: k as f64 * 0.5, body: b });
        }
        assert_eq!(r.sample_at(1.0).unwrap().t, 1.0);
        assert_eq!(r.sample_at(1.2).unwrap().t, 1.0);
        assert!(r.sample_at(-0.1).is_none());
    }
}
