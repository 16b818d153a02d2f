//! Strictly convex reference bodies described by their support function.
//!
//! A body is the set `{y : y·u(φ) ≤ h(φ) for all φ}` with `u(φ) = (cos φ, sin φ)`.
//! The boundary point with outward normal `u(φ)` is
//! `r(φ) = h(φ) u(φ) + h'(φ) u⊥(φ)`, the radius of curvature there is
//! `ρ(φ) = h(φ) + h''(φ)` and arc length is `dσ = ρ dφ`. Growing the body by a
//! distance `δ` simply adds `δ` to `h`, so the enlarged contact body used for
//! atom centres keeps the same normals and the same angular parametrization.

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub const DEFAULT_QUADRATURE_NODES: usize = 512;

/// Shape description as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeSpec {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// `h(φ) = c₀ + Σ_k (a_k cos kφ + b_k sin kφ)`, one `[a_k, b_k]` pair per
    /// harmonic starting at `k = 0` (where `b₀` is ignored).
    Fourier { coeffs: Vec<[f64; 2]> },
}

/// Support function value and its first two angular derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportValue {
    pub h: f64,
    pub dh: f64,
    pub ddh: f64,
}

impl SupportValue {
    /// Radius of curvature `h + h''`.
    #[inline]
    pub fn rho(&self) -> f64 {
        self.h + self.ddh
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Support {
    Disk { r: f64 },
    Ellipse { a2: f64, b2: f64 },
    Fourier { cos: Vec<f64>, sin: Vec<f64> },
}

impl Support {
    fn eval(&self, phi: f64) -> SupportValue {
        match self {
            Support::Disk { r } => SupportValue {
                h: *r,
                dh: 0.0,
                ddh: 0.0,
            },
            Support::Ellipse { a2, b2 } => {
                let (s, c) = phi.sin_cos();
                let q = a2 * c * c + b2 * s * s;
                let h = q.sqrt();
                // q' = (b² - a²) sin 2φ, q'' = 2 (b² - a²) cos 2φ
                let dq = 2.0 * (b2 - a2) * s * c;
                let ddq = 2.0 * (b2 - a2) * (c * c - s * s);
                SupportValue {
                    h,
                    dh: dq / (2.0 * h),
                    ddh: (2.0 * q * ddq - dq * dq) / (4.0 * q * h),
                }
            }
            Support::Fourier { cos, sin } => {
                let mut v = SupportValue {
                    h: cos[0],
                    dh: 0.0,
                    ddh: 0.0,
                };
                for k in 1..cos.len() {
                    let kf = k as f64;
                    let (s, c) = (kf * phi).sin_cos();
                    let term = cos[k] * c + sin[k] * s;
                    v.h += term;
                    v.dh += kf * (sin[k] * c - cos[k] * s);
                    v.ddh -= kf * kf * term;
                }
                v
            }
        }
    }
}

/// A point of the boundary, in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// Position relative to the centroid.
    pub r: Vec2,
    /// Outward unit normal.
    pub n: Vec2,
    /// Curvature `1/(h + h'')`.
    pub kappa: f64,
    /// `h'(φ) = r·n⊥`.
    pub dh: f64,
}

/// Strictly convex reference body with centroid at the origin.
#[derive(Debug, Clone)]
pub struct SupportBody {
    spec: ShapeSpec,
    support: Support,
    nodes: usize,
    inertia: f64,
    area: f64,
    perimeter: f64,
    rho_min: f64,
    rho_max: f64,
    r_max: f64,
}

impl SupportBody {
    pub fn new(spec: &ShapeSpec) -> Result<Self> {
        Self::with_nodes(spec, DEFAULT_QUADRATURE_NODES)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(&ShapeSpec::Disk { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(&ShapeSpec::Ellipse { a, b })
    }

    /// Builds a body with `nodes` quadrature points for all boundary integrals.
    pub fn with_nodes(spec: &ShapeSpec, nodes: usize) -> Result<Self> {
        if nodes < 16 {
            return Err(Error::InvalidSpec(format!(
                "quadrature order {nodes} is too small (need at least 16)"
            )));
        }
        let support = match spec {
            ShapeSpec::Disk { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidSpec(format!("disk radius {radius} must be positive")));
                }
                Support::Disk { r: *radius }
            }
            ShapeSpec::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "ellipse semi-axes ({a}, {b}) must be positive"
                    )));
                }
                Support::Ellipse {
                    a2: a * a,
                    b2: b * b,
                }
            }
            ShapeSpec::Fourier { coeffs } => {
                if coeffs.is_empty() || !(coeffs[0][0] > 0.0) {
                    return Err(Error::InvalidSpec(
                        "fourier coefficients need a positive constant term".into(),
                    ));
                }
                if coeffs.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec("non-finite fourier coefficient".into()));
                }
                // Keep at least the k = 1 slot so the centroid shift can be absorbed.
                let len = coeffs.len().max(2);
                let mut cos = vec![0.0; len];
                let mut sin = vec![0.0; len];
                for (k, [a, b]) in coeffs.iter().enumerate() {
                    cos[k] = *a;
                    if k > 0 {
                        sin[k] = *b;
                    }
                }
                Support::Fourier { cos, sin }
            }
        };

        let mut body = SupportBody {
            spec: spec.clone(),
            support,
            nodes,
            inertia: 0.0,
            area: 0.0,
            perimeter: 0.0,
            rho_min: 0.0,
            rho_max: 0.0,
            r_max: 0.0,
        };
        body.check_convexity()?;
        body.recenter();
        body.finish_constants();
        Ok(body)
    }

    /// Replaces the uniform-density moment of inertia.
    pub fn with_inertia(mut self, inertia: f64) -> Result<Self> {
        if !(inertia > 0.0 && inertia.is_finite()) {
            return Err(Error::InvalidSpec(format!("moment of inertia {inertia} must be positive")));
        }
        self.inertia = inertia;
        Ok(self)
    }

    fn check_convexity(&self) -> Result<()> {
        // The quadrature grid is the contract; a 4x finer grid catches
        // violations that fall between nodes for high harmonics.
        let n = self.nodes * 4;
        let (mut min_rho, mut at) = (f64::INFINITY, 0.0);
        for k in 0..n {
            let phi = TAU * k as f64 / n as f64;
            let rho = self.support.eval(phi).rho();
            if rho < min_rho {
                min_rho = rho;
                at = phi;
            }
        }
        if !(min_rho > 0.0) {
            return Err(Error::ConvexityViolation {
                min_radius: min_rho,
                phi: at,
            });
        }
        Ok(())
    }

    fn recenter(&mut self) {
        if let Support::Fourier { cos, sin } = &mut self.support {
            // Translating the body by -c changes h by -c·u(φ): only the first
            // harmonic moves. Centroid = (1/3A) ∮ r (r·n) dσ.
            let n = self.nodes;
            let sup = Support::Fourier {
                cos: cos.clone(),
                sin: sin.clone(),
            };
            let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let phi = TAU * k as f64 / n as f64;
                let v = sup.eval(phi);
                let u = Vec2::from_angle(phi);
                let r = u * v.h + u.perp() * v.dh;
                let w = v.rho();
                area += 0.5 * v.h * w;
                cx += r.x * v.h * w / 3.0;
                cy += r.y * v.h * w / 3.0;
            }
            cos[1] -= cx / area;
            sin[1] -= cy / area;
        }
    }

    fn finish_constants(&mut self) {
        let n = self.nodes;
        let dphi = TAU / n as f64;
        let (mut area, mut second, mut perim) = (0.0, 0.0, 0.0);
        let (mut rho_min, mut rho_max) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let phi = k as f64 * dphi;
            let v = self.support.eval(phi);
            let r = self.boundary(phi).r;
            let w = v.rho();
            area += 0.5 * v.h * w;
            // ∫∫|x|² dA = (1/4) ∮ |r|² (r·n) dσ
            second += 0.25 * r.norm_sq() * v.h * w;
            perim += w;
            rho_min = rho_min.min(w);
            rho_max = rho_max.max(w);
        }
        self.area = area * dphi;
        self.inertia = second * dphi / self.area;
        self.perimeter = perim * dphi;
        self.rho_min = rho_min;
        self.rho_max = rho_max;
        self.r_max = self.max_radius(0.0);
    }

    /// max_φ |r(φ) + offset·n(φ)| on a dense grid.
    fn max_radius(&self, offset: f64) -> f64 {
        let n = self.nodes * 16;
        (0..n)
            .map(|k| {
                let phi = TAU * k as f64 / n as f64;
                self.boundary_offset(phi, offset).r.norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn spec(&self) -> &ShapeSpec {
        &self.spec
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.nodes
    }

    pub fn is_disk(&self) -> bool {
        matches!(self.support, Support::Disk { .. })
    }

    /// Moment of inertia per unit mass about the centroid.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Minimum radius of curvature (`1/κ_max`).
    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn kappa_min(&self) -> f64 {
        1.0 / self.rho_max
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Circumradius of the body grown by `offset`.
    pub fn r_max_offset(&self, offset: f64) -> f64 {
        if offset == 0.0 {
            self.r_max
        } else {
            self.max_radius(offset)
        }
    }

    #[inline]
    pub fn support(&self, phi: f64) -> SupportValue {
        self.support.eval(phi)
    }

    pub fn boundary(&self, phi: f64) -> BoundaryPoint {
        self.boundary_offset(phi, 0.0)
    }

    /// Boundary point of the body grown by `offset` (same normal, `r + offset·n`).
    pub fn boundary_offset(&self, phi: f64, offset: f64) -> BoundaryPoint {
        let phi = phi.rem_euclid(TAU);
        let v = self.support.eval(phi);
        let u = Vec2::from_angle(phi);
        BoundaryPoint {
            r: u * (v.h + offset) + u.perp() * v.dh,
            n: u,
            kappa: 1.0 / (v.rho() + offset),
            dh: v.dh,
        }
    }

    /// Maximizes `J(φ) = q·u(φ) - h(φ) - offset` over the normal angle.
    ///
    /// For a convex set the maximum is the signed distance from `q` to the
    /// boundary of the body grown by `offset` (positive outside). Returns the
    /// maximum and the maximizing angle. `guess` warm-starts a local search.
    pub fn support_max(&self, q: Vec2, offset: f64, guess: Option<f64>) -> Result<(f64, f64)> {
        let start = guess.unwrap_or_else(|| q.angle());
        if let Some((phi, j)) = self.local_max(q, offset, start)? {
            // A positive local maximum is the unique outward critical point.
            if j >= 0.0 {
                return Ok((j, phi.rem_euclid(TAU)));
            }
        }
        self.global_max(q, offset)
    }

    #[inline]
    fn dj(&self, q: Vec2, phi: f64) -> (f64, f64) {
        let v = self.support.eval(phi);
        let u = Vec2::from_angle(phi);
        (q.dot(u.perp()) - v.dh, -q.dot(u) - v.ddh)
    }

    #[inline]
    fn j(&self, q: Vec2, offset: f64, phi: f64) -> f64 {
        q.dot(Vec2::from_angle(phi)) - self.support.eval(phi).h - offset
    }

    fn local_max(&self, q: Vec2, offset: f64, start: f64) -> Result<Option<(f64, f64)>> {
        let mut half = 0.02;
        while half < 0.8 {
            let (a, b) = (start - half, start + half);
            if self.dj(q, a).0 > 0.0 && self.dj(q, b).0 < 0.0 {
                let phi = self.refine(q, a, b)?;
                return Ok(Some((phi, self.j(q, offset, phi))));
            }
            half *= 2.0;
        }
        Ok(None)
    }

    fn global_max(&self, q: Vec2, offset: f64) -> Result<(f64, f64)> {
        let m = (self.nodes / 4).max(128);
        let step = TAU / m as f64;
        let (mut best, mut best_j) = (0, f64::NEG_INFINITY);
        for k in 0..m {
            let j = self.j(q, offset, k as f64 * step);
            if j > best_j {
                best_j = j;
                best = k;
            }
        }
        let mid = best as f64 * step;
        let mut half = step;
        while half < PI {
            let (a, b) = (mid - half, mid + half);
            if self.dj(q, a).0 >= 0.0 && self.dj(q, b).0 <= 0.0 {
                let phi = self.refine(q, a, b)?;
                let j = self.j(q, offset, phi);
                // Inside points may have several local maxima; keep the grid
                // value if refinement wandered to a lower one.
                if j >= best_j {
                    return Ok((j, phi.rem_euclid(TAU)));
                }
                return Ok((best_j, mid.rem_euclid(TAU)));
            }
            half *= 2.0;
        }
        Ok((best_j, mid.rem_euclid(TAU)))
    }

    /// Safeguarded Newton on `J'` inside a bracket with `J'(a) ≥ 0 ≥ J'(b)`.
    fn refine(&self, q: Vec2, mut a: f64, mut b: f64) -> Result<f64> {
        const MAX_ITER: usize = 100;
        let mut phi = 0.5 * (a + b);
        for _ in 0..MAX_ITER {
            let (f, df) = self.dj(q, phi);
            if f == 0.0 {
                return Ok(phi);
            }
            if f > 0.0 {
                a = phi;
            } else {
                b = phi;
            }
            let newton = phi - f / df;
            let next = if df < 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - phi).abs() <= 1e-15 * (1.0 + phi.abs()) || (b - a) <= 1e-15 {
                return Ok(next);
            }
            phi = next;
        }
        Err(Error::NoConvergence {
            what: "closest-point angle search",
            iterations: MAX_ITER,
        })
    }

    /// Signed distance from world-frame offset `p` (relative to the body
    /// centre) to the body rotated by `theta` and scaled by `scale`.
    ///
    /// Returns `(d, φ*)` where `φ*` is the body-frame normal angle of the
    /// closest boundary point.
    pub fn signed_distance(&self, theta: f64, scale: f64, p: Vec2) -> Result<(f64, f64)> {
        self.signed_distance_offset(theta, scale, 0.0, p, None)
    }

    /// As [`signed_distance`](Self::signed_distance) for the body grown by
    /// `offset` (in reference-body units) before scaling.
    pub fn signed_distance_offset(
        &self,
        theta: f64,
        scale: f64,
        offset: f64,
        p: Vec2,
        guess: Option<f64>,
    ) -> Result<(f64, f64)> {
        debug_assert!(scale > 0.0);
        let q = p.rotate(-theta) / scale;
        let (j, phi) = self.support_max(q, offset, guess)?;
        Ok((j * scale, phi))
    }

    /// Shape moments of the body and of its enlargement by `alpha / 2`.
    pub fn shape_constants(&self, alpha: f64) -> Result<ShapeConstants> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidSpec(format!("alpha = {alpha} must be non-negative")));
        }
        let base = self.moments(0.0);
        let grown = self.moments(alpha / 2.0);
        Ok(ShapeConstants {
            alpha,
            perimeter: base.length,
            perimeter_alpha: grown.length,
            kappa_min: self.kappa_min(),
            r_max: self.r_max,
            r_max_alpha: self.r_max_offset(alpha / 2.0),
            area: self.area,
            inertia: self.inertia,
            k_cal: base.k,
            n_cal: base.n,
            gamma: base.gamma,
            k_cal_alpha: grown.k,
            n_cal_alpha: grown.n,
            gamma_alpha: grown.gamma,
        })
    }

    /// Periodic trapezoid moments of the boundary grown by `offset`.
    pub fn moments(&self, offset: f64) -> Moments {
        let n = self.nodes;
        let dphi = TAU / n as f64;
        let mut m = Moments::default();
        for k in 0..n {
            let phi = k as f64 * dphi;
            let v = self.support.eval(phi);
            let u = Vec2::from_angle(phi);
            let w = (v.rho() + offset) * dphi;
            m.length += w;
            m.k += v.dh * v.dh * w;
            m.n[0][0] += u.x * u.x * w;
            m.n[0][1] += u.x * u.y * w;
            m.n[1][1] += u.y * u.y * w;
            m.gamma[0] += v.dh * u.x * w;
            m.gamma[1] += v.dh * u.y * w;
        }
        m.n[1][0] = m.n[0][1];
        m
    }

    /// `(|∮ n dσ|, |∮ r⊥·n dσ|)` over the boundary grown by `offset`,
    /// evaluated from explicit boundary vectors. Both vanish for closed curves.
    pub fn closed_curve_residuals(&self, offset: f64) -> (f64, f64) {
        let n = self.nodes;
        let dphi = TAU / n as f64;
        let (mut sn, mut sr) = (Vec2::ZERO, 0.0);
        for k in 0..n {
            let phi = k as f64 * dphi;
            let b = self.boundary_offset(phi, offset);
            let w = (1.0 / b.kappa) * dphi;
            sn += b.n * w;
            sr += b.r.perp().dot(b.n) * w;
        }
        (sn.norm(), sr.abs())
    }

    /// `∮ (r·n⊥)² dσ` evaluated from explicit boundary vectors.
    pub fn k_cal_from_vectors(&self) -> f64 {
        let n = self.nodes;
        let dphi = TAU / n as f64;
        (0..n)
            .map(|k| {
                let b = self.boundary(k as f64 * dphi);
                let t = b.r.dot(b.n.perp());
                t * t * dphi / b.kappa
            })
            .sum()
    }

    /// Cumulative arc length of the boundary grown by `offset` on the
    /// quadrature grid, used to sample contact points uniformly in length.
    pub fn arc_length_table(&self, offset: f64) -> ArcLengthTable {
        let n = self.nodes;
        let dphi = TAU / n as f64;
        let weights: Vec<f64> = (0..n)
            .map(|k| self.support.eval(k as f64 * dphi).rho() + offset)
            .collect();
        let w_max = weights.iter().cloned().fold(0.0, f64::max);
        ArcLengthTable { w_max, offset }
    }
}

/// Rejection sampler for the arc-length measure on a grown boundary.
#[derive(Debug, Clone, Copy)]
pub struct ArcLengthTable {
    w_max: f64,
    offset: f64,
}

impl ArcLengthTable {
    /// Draws a normal angle with density proportional to `ρ(φ) + offset`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, body: &SupportBody, rng: &mut R) -> f64 {
        // The grid maximum can undershoot the true one slightly; pad it.
        let bound = self.w_max * 1.05;
        loop {
            let phi = rng.random::<f64>() * TAU;
            let w = body.support(phi).rho() + self.offset;
            if rng.random::<f64>() * bound < w {
                return phi;
            }
        }
    }
}

/// Raw boundary moments for one offset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub length: f64,
    pub k: f64,
    pub n: [[f64; 2]; 2],
    pub gamma: [f64; 2],
}

/// Every shape constant the dynamics and its limits depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConstants {
    pub alpha: f64,
    /// Perimeter `L` of the reference body.
    pub perimeter: f64,
    /// Perimeter `L_α` of the body grown by `α/2`.
    pub perimeter_alpha: f64,
    pub kappa_min: f64,
    pub r_max: f64,
    pub r_max_alpha: f64,
    pub area: f64,
    pub inertia: f64,
    /// `∮ (r·n⊥)² dσ`
    pub k_cal: f64,
    /// `∮ n⊗n dσ`
    pub n_cal: [[f64; 2]; 2],
    /// `∮ (r·n⊥) n dσ`
    pub gamma: [f64; 2],
    pub k_cal_alpha: f64,
    pub n_cal_alpha: [[f64; 2]; 2],
    pub gamma_alpha: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ellipse() -> SupportBody {
        SupportBody::ellipse(0.5, 0.3).unwrap()
    }

    #[test]
    fn disk_is_a_circle() {
        let body = SupportBody::disk(1.0).unwrap();
        for k in 0..16 {
            let phi = k as f64 * 0.4;
            let b = body.boundary(phi);
            assert!((b.r - Vec2::from_angle(phi)).norm() < 1e-15);
            assert_eq!(b.kappa, 1.0);
            assert_eq!(b.r.dot(b.n.perp()), 0.0);
        }
    }

    #[test]
    fn ellipse_axis_point() {
        let b = ellipse().boundary(0.0);
        assert_eq!(b.n, Vec2::new(1.0, 0.0));
        assert!((b.r.dot(b.n) - 0.5).abs() < 1e-15);
        assert!(b.r.y.abs() < 1e-15);
    }

    #[test]
    fn boundary_identities_hold() {
        let body = ellipse();
        for k in 0..50 {
            let phi = k as f64 * 0.13;
            let b = body.boundary(phi);
            let v = body.support(phi);
            assert!((b.n.norm() - 1.0).abs() < 1e-15);
            assert!((b.r.dot(b.n) - v.h).abs() < 1e-14);
            assert!((b.r.dot(b.n.perp()) - v.dh).abs() < 1e-14);
            assert!((b.kappa - 1.0 / v.rho()).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_point_matches_finite_difference_oracle() {
        // Parametric ellipse (a cos t, b sin t); normal angle φ satisfies
        // tan φ = (a/b) tan t.
        let (a, b) = (0.5, 0.3);
        let phi = std::f64::consts::FRAC_PI_4;
        let t = ((b / a) * phi.tan()).atan();
        let p = |t: f64| Vec2::new(a * t.cos(), b * t.sin());
        let h = 1e-4;
        let d1 = (p(t + h) - p(t - h)) / (2.0 * h);
        let d2 = (p(t + h) - p(t) * 2.0 + p(t - h)) / (h * h);
        let kappa_fd = (d1.x * d2.y - d1.y * d2.x).abs() / d1.norm().powi(3);
        let normal_fd = Vec2::new(d1.y, -d1.x) / d1.norm();

        let bp = ellipse().boundary(phi);
        assert!((bp.r - p(t)).norm() < 1e-12);
        assert!((bp.n - normal_fd).norm() < 1e-12);
        assert!((bp.kappa - kappa_fd).abs() / kappa_fd < 1e-6);
    }

    #[test]
    fn fourier_convexity_violation_is_rejected() {
        // h = 1 + 0.6 cos 2φ gives h + h'' = 1 - 1.8 cos 2φ, negative near φ = 0.
        let spec = ShapeSpec::Fourier {
            coeffs: vec![[1.0, 0.0], [0.0, 0.0], [0.6, 0.0]],
        };
        match SupportBody::new(&spec) {
            Err(Error::ConvexityViolation { min_radius, .. }) => {
                assert!((min_radius - (1.0 - 1.8)).abs() < 1e-9)
            }
            other => panic!("expected ConvexityViolation, got {other:?}"),
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(SupportBody::disk(0.0), Err(Error::InvalidSpec(_))));
        assert!(matches!(SupportBody::ellipse(0.5, -0.1), Err(Error::InvalidSpec(_))));
        assert!(matches!(
            SupportBody::new(&ShapeSpec::Fourier { coeffs: vec![] }),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn fourier_body_is_recentered() {
        // Off-centre disk of radius 1 at (0.3, -0.2) plus a mild 3-fold bump.
        let spec = ShapeSpec::Fourier {
            coeffs: vec![[1.0, 0.0], [0.3, -0.2], [0.0, 0.0], [0.05, 0.02]],
        };
        let body = SupportBody::new(&spec).unwrap();
        let n = 2048;
        let (mut area, mut c) = (0.0, Vec2::ZERO);
        for k in 0..n {
            let phi = TAU * k as f64 / n as f64;
            let b = body.boundary(phi);
            let v = body.support(phi);
            area += 0.5 * v.h * v.rho();
            c += b.r * (v.h * v.rho() / 3.0);
        }
        assert!((c / area).norm() < 1e-12);
    }

    #[test]
    fn disk_constants_are_closed_form() {
        let body = SupportBody::disk(1.0).unwrap();
        let c = body.shape_constants(0.0).unwrap();
        assert!((c.perimeter - TAU).abs() < 1e-12);
        assert_eq!(c.k_cal, 0.0);
        assert!((c.inertia - 0.5).abs() < 1e-12);
        assert!((c.area - PI).abs() < 1e-12);
        assert!((c.n_cal[0][0] - PI).abs() < 1e-12);
        assert!((c.n_cal[1][1] - PI).abs() < 1e-12);
        assert!(c.n_cal[0][1].abs() < 1e-12);
        let c2 = body.shape_constants(0.2).unwrap();
        assert!((c2.perimeter_alpha - TAU * 1.1).abs() < 1e-12);
        assert!((c2.r_max_alpha - 1.1).abs() < 1e-12);
    }

    #[test]
    fn ellipse_inertia_and_area() {
        let c = ellipse().shape_constants(0.0).unwrap();
        assert!((c.area - PI * 0.15).abs() < 1e-12);
        assert!((c.inertia - (0.25 + 0.09) / 4.0).abs() < 1e-12);
        assert!((c.r_max - 0.5).abs() < 1e-12);
        assert!((c.kappa_min - 0.3 / 0.25).abs() < 1e-9);
    }

    #[test]
    fn ellipse_constants_match_refined_quadrature() {
        let coarse = ellipse().shape_constants(0.0).unwrap();
        let fine = SupportBody::with_nodes(&ShapeSpec::Ellipse { a: 0.5, b: 0.3 }, 5120)
            .unwrap()
            .shape_constants(0.0)
            .unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(coarse.perimeter, fine.perimeter) < 1e-10);
        assert!(rel(coarse.k_cal, fine.k_cal) < 1e-10);
        assert!(rel(coarse.inertia, fine.inertia) < 1e-10);
        assert!((coarse.gamma[0] - fine.gamma[0]).abs() < 1e-10 * fine.perimeter);
        assert!((coarse.gamma[1] - fine.gamma[1]).abs() < 1e-10 * fine.perimeter);
    }

    #[test]
    fn k_cal_two_ways_agree() {
        let body = ellipse();
        let a = body.k_cal_from_vectors();
        let b = body.shape_constants(0.0).unwrap().k_cal;
        assert!((a - b).abs() / b < 1e-10);
    }

    #[test]
    fn enlarged_boundary_shares_normals() {
        let body = ellipse();
        for k in 0..20 {
            let phi = 0.31 * k as f64;
            let b = body.boundary(phi);
            let g = body.boundary_offset(phi, 0.05);
            assert_eq!(b.n, g.n);
            assert!((g.r - (b.r + b.n * 0.05)).norm() < 1e-15);
        }
    }

    #[test]
    fn signed_distance_disk() {
        let body = SupportBody::disk(1.0).unwrap();
        let (d, phi) = body.signed_distance(0.0, 1.0, Vec2::new(2.0, 0.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!(phi.abs() < 1e-12 || (phi - TAU).abs() < 1e-12);
        let (d, _) = body.signed_distance(0.3, 1.0, Vec2::new(0.0, 0.25)).unwrap();
        assert!((d + 0.75).abs() < 1e-12);
    }

    #[test]
    fn boundary_points_have_zero_distance() {
        let body = ellipse();
        for k in 0..64 {
            let phi = 0.1 * k as f64;
            let theta = 0.7;
            let p = body.boundary(phi).r.rotate(theta) * 0.02;
            let (d, _) = body.signed_distance(theta, 0.02, p).unwrap();
            assert!(d.abs() < 1e-12, "phi={phi} d={d}");
        }
    }

    #[test]
    fn signed_distance_matches_dense_sampling() {
        let body = ellipse();
        let (theta, scale) = (0.7, 0.02);
        let m = 1_000_000;
        let pts: Vec<Vec2> = (0..m)
            .map(|k| body.boundary(TAU * k as f64 / m as f64).r.rotate(theta) * scale)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let p = Vec2::new(rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03));
            let (d, phi) = body.signed_distance(theta, scale, p).unwrap();
            if d <= 0.0 {
                continue;
            }
            let brute = pts.iter().map(|&b| (p - b).norm()).fold(f64::INFINITY, f64::min);
            assert!((d - brute).abs() < 1e-8, "d={d} brute={brute}");
            let closest = body.boundary(phi).r.rotate(theta) * scale;
            assert!(((p - closest).norm() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn inside_points_are_negative() {
        let body = ellipse();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = Vec2::new(rng.random_range(-0.45..0.45), rng.random_range(-0.25..0.25));
            let inside = (p.x / 0.5).powi(2) + (p.y / 0.3).powi(2) < 1.0;
            let (d, _) = body.signed_distance(0.0, 1.0, p).unwrap();
            assert_eq!(d < 0.0, inside, "p={p:?} d={d}");
        }
    }
}
