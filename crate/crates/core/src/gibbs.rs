//! Sampling of the equilibrium measure and of perturbed initial data.

use crate::error::{Error, Result};
use crate::scattering::{AtomState, BodyState, SimParams};
use crate::vec2::Vec2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Insertion attempts per atom before giving up.
pub const MAX_ATTEMPTS_PER_ATOM: usize = 10_000;

/// `count` i.i.d. centred Gaussian velocities with per-component variance `1/β`.
pub fn sample_maxwellians<R: Rng + ?Sized>(count: usize, beta: f64, rng: &mut R) -> Vec<Vec2> {
    let g = Normal::new(0.0, beta.recip().sqrt()).expect("beta > 0");
    (0..count)
        .map(|_| Vec2::new(g.sample(rng), g.sample(rng)))
        .collect()
}

/// Body velocities `(V, Ω)` from `M_{β,I}`.
pub fn sample_body_velocity<R: Rng + ?Sized>(beta: f64, inertia: f64, rng: &mut R) -> (Vec2, f64) {
    let g = Normal::new(0.0, beta.recip().sqrt()).expect("beta > 0");
    let v = Vec2::new(g.sample(rng), g.sample(rng));
    let omega = g.sample(rng) / inertia.sqrt();
    (v, omega)
}

/// Body drawn from the equilibrium body marginal: uniform pose, Gaussian velocities.
pub fn sample_body<R: Rng + ?Sized>(p: &SimParams, rng: &mut R) -> BodyState {
    let (v, omega) = sample_body_velocity(p.beta, p.inertia(), rng);
    BodyState {
        x: Vec2::new(rng.random(), rng.random()),
        v,
        theta: rng.random_range(0.0..TAU),
        omega,
    }
}

/// Excluded area fraction `N(π/4)ε² + |Σ_α|(ε/α)²`; sampling is intended
/// for values below 0.2.
pub fn packing_fraction(p: &SimParams) -> f64 {
    let c = &p.consts;
    let half = p.alpha / 2.0;
    let area_alpha = c.area + half * c.perimeter + PI * half * half;
    let s = p.body_scale();
    p.n_atoms as f64 * PI / 4.0 * p.epsilon * p.epsilon + area_alpha * s * s
}

/// Equilibrium configuration: body from its marginal, atoms by sequential
/// insertion under hard-core exclusion.
pub fn sample_equilibrium<R: Rng + ?Sized>(p: &SimParams, rng: &mut R) -> Result<(BodyState, Vec<AtomState>)> {
    let body = sample_body(p, rng);
    let atoms = sample_atoms(p, &body, rng)?;
    Ok((body, atoms))
}

/// Atoms conditioned on a body pose.
pub fn sample_atoms<R: Rng + ?Sized>(p: &SimParams, body: &BodyState, rng: &mut R) -> Result<Vec<AtomState>> {
    let n = p.n_atoms;
    let eps = p.epsilon;
    let cells = ((1.0 / eps).floor() as usize).min((n as f64).sqrt().ceil() as usize);
    // With fewer than three cells per side a single cell holds everyone.
    let cells = if cells < 3 { 1 } else { cells };
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    let cell_of = |x: Vec2| -> (usize, usize) {
        (
            ((x.x * cells as f64) as usize).min(cells - 1),
            ((x.y * cells as f64) as usize).min(cells - 1),
        )
    };
    let mut positions: Vec<Vec2> = Vec::with_capacity(n);
    let scale = p.body_scale();
    let reach = scale * p.consts.r_max_alpha;
    let offset = p.contact_offset();
    let mut attempts = 0;
    while positions.len() < n {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS_PER_ATOM {
            attempts += 1;
            let x = Vec2::new(rng.random(), rng.random());
            let d = (x - body.x).min_image();
            if d.norm() <= reach {
                let (g, _) = p.body.signed_distance_offset(body.theta, scale, offset, d, None)?;
                if g <= 0.0 {
                    continue;
                }
            }
            let (cx, cy) = cell_of(x);
            let span = if cells == 1 { 0..=0 } else { 0..=2 };
            let mut clash = false;
            'scan: for dx in span.clone() {
                for dy in span.clone() {
                    let (ix, iy) = if cells == 1 {
                        (cx, cy)
                    } else {
                        ((cx + cells + dx - 1) % cells, (cy + cells + dy - 1) % cells)
                    };
                    for &j in &grid[ix * cells + iy] {
                        if (positions[j] - x).min_image().norm() <= eps {
                            clash = true;
                            break 'scan;
                        }
                    }
                }
            }
            if !clash {
                grid[cx * cells + cy].push(positions.len());
                positions.push(x);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PackingFailure {
                placed: positions.len(),
                requested: n,
                attempts,
            });
        }
    }
    let velocities = sample_maxwellians(n, p.beta, rng);
    Ok(positions
        .into_iter()
        .zip(velocities)
        .map(|(x, v)| AtomState { x, v })
        .collect())
}

/// Density `g₀` of the initial body law relative to equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationWeight {
    /// `g₀ ≡ 1`.
    #[default]
    Constant,
    /// `g₀ = 1 + amplitude·cos(2π X₁)`, `|amplitude| < 1`.
    CosineX { amplitude: f64 },
    /// `g₀ = exp(-|V - shift|² / (2 width²))`.
    GaussianV { shift: Vec2, width: f64 },
}

impl PerturbationWeight {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationWeight::Constant => Ok(()),
            PerturbationWeight::CosineX { amplitude } if amplitude.abs() < 1.0 => Ok(()),
            PerturbationWeight::CosineX { amplitude } => Err(Error::config(
                "perturbation.amplitude",
                format!("need |amplitude| < 1 for a positive weight, got {amplitude}"),
            )),
            PerturbationWeight::GaussianV { width, .. } if width > 0.0 => Ok(()),
            PerturbationWeight::GaussianV { width, .. } => Err(Error::config(
                "perturbation.width",
                format!("need width > 0, got {width}"),
            )),
        }
    }

    pub fn g0(&self, y: &BodyState) -> f64 {
        match *self {
            PerturbationWeight::Constant => 1.0,
            PerturbationWeight::CosineX { amplitude } => 1.0 + amplitude * (TAU * y.x.x).cos(),
            PerturbationWeight::GaussianV { shift, width } => {
                (-(y.v - shift).norm_sq() / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match *self {
            PerturbationWeight::Constant | PerturbationWeight::GaussianV { .. } => 1.0,
            PerturbationWeight::CosineX { amplitude } => 1.0 + amplitude.abs(),
        }
    }
}

/// Body drawn from `g₀ M̄_{β,I}` by rejection.
pub fn sample_perturbed_body<R: Rng + ?Sized>(
    p: &SimParams,
    w: &PerturbationWeight,
    rng: &mut R,
) -> Result<BodyState> {
    w.validate()?;
    let sup = w.sup_bound();
    loop {
        let y = sample_body(p, rng);
        let g = w.g0(&y);
        debug_assert!((0.0..=sup * (1.0 + 1e-12)).contains(&g));
        if rng.random::<f64>() * sup < g {
            return Ok(y);
        }
    }
}

/// Perturbed initial data: tilted body, equilibrium atoms given the pose.
pub fn sample_perturbed<R: Rng + ?Sized>(
    p: &SimParams,
    w: &PerturbationWeight,
    rng: &mut R,
) -> Result<(BodyState, Vec<AtomState>)> {
    let body = sample_perturbed_body(p, w, rng)?;
    let atoms = sample_atoms(p, &body, rng)?;
    Ok((body, atoms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SupportBody;
    use crate::rng::stream_rng;
    use statrs::distribution::{ContinuousCDF, Normal as SNormal};

    fn ks_normal(mut xs: Vec<f64>, sd: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let d = SNormal::new(0.0, sd).unwrap();
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    fn params(n: usize) -> SimParams {
        SimParams::new(n, 0.1, 1.0, 0.1, SupportBody::ellipse(0.5, 0.3).unwrap()).unwrap()
    }

    #[test]
    fn maxwellian_moments() {
        let mut rng = stream_rng(1, 0);
        let vs = sample_maxwellians(1_000_000, 1.0, &mut rng);
        let m2 = vs.iter().map(|v| v.norm_sq()).sum::<f64>() / vs.len() as f64;
        assert!((m2 - 2.0).abs() < 0.01, "{m2}");
        let ks = ks_normal(vs.iter().map(|v| v.x).collect(), 1.0);
        assert!(ks < 0.002, "{ks}");
    }

    #[test]
    fn body_angular_variance() {
        let mut rng = stream_rng(2, 0);
        let inertia = 0.0425;
        let n = 200_000;
        let var = (0..n)
            .map(|_| sample_body_velocity(2.0, inertia, &mut rng).1.powi(2))
            .sum::<f64>()
            / n as f64;
        let target = 1.0 / (2.0 * inertia);
        assert!((var / target - 1.0).abs() < 0.02, "{var} vs {target}");
    }

    #[test]
    fn exclusion_holds_by_exhaustive_scan() {
        let p = SimParams::with_epsilon(500, 0.002, 0.1, 1.0, 0.1, SupportBody::ellipse(0.5, 0.3).unwrap()).unwrap();
        let mut rng = stream_rng(3, 0);
        let (body, atoms) = sample_equilibrium(&p, &mut rng).unwrap();
        assert_eq!(atoms.len(), 500);
        for i in 0..atoms.len() {
            for j in 0..i {
                assert!((atoms[i].x - atoms[j].x).min_image().norm() > p.epsilon);
            }
            let d = (atoms[i].x - body.x).min_image();
            let (g, _) = p
                .body
                .signed_distance_offset(body.theta, p.body_scale(), p.contact_offset(), d, None)
                .unwrap();
            assert!(g > 0.0);
        }
    }

    #[test]
    fn single_atom_and_overpacking() {
        let mut rng = stream_rng(4, 0);
        let p = SimParams::with_epsilon(1, 0.01, 0.1, 1.0, 0.1, SupportBody::disk(1.0).unwrap()).unwrap();
        let (_, atoms) = sample_equilibrium(&p, &mut rng).unwrap();
        assert_eq!(atoms.len(), 1);
        let p = SimParams::with_epsilon(100, 0.2, 0.5, 1.0, 0.1, SupportBody::disk(1.0).unwrap()).unwrap();
        assert!(packing_fraction(&p) > 0.2);
        assert!(matches!(sample_equilibrium(&p, &mut rng), Err(Error::PackingFailure { .. })));
    }

    #[test]
    fn cosine_tilt_moment() {
        let p = params(500);
        let w = PerturbationWeight::CosineX { amplitude: 0.5 };
        let mut rng = stream_rng(5, 0);
        let n = 100_000;
        let m = (0..n)
            .map(|_| (TAU * sample_perturbed_body(&p, &w, &mut rng).unwrap().x.x).cos())
            .sum::<f64>()
            / n as f64;
        assert!((m - 0.25).abs() < 0.01, "{m}");
    }

    #[test]
    fn constant_weight_matches_equilibrium_stream() {
        let p = params(200);
        let a = sample_perturbed(&p, &PerturbationWeight::Constant, &mut stream_rng(6, 0)).unwrap();
        let mut rng = stream_rng(6, 0);
        let body = sample_body(&p, &mut rng);
        // The constant weight consumes one acceptance draw.
        let _: f64 = rng.random();
        let atoms = sample_atoms(&p, &body, &mut rng).unwrap();
        assert_eq!(a.0, body);
        assert_eq!(a.1, atoms);
    }

    #[test]
    fn velocity_tilt_leaves_atoms_alone() {
        let p = params(500);
        let w = PerturbationWeight::GaussianV {
            shift: Vec2::new(1.0, 0.0),
            width: 0.5,
        };
        let mut rng = stream_rng(7, 0);
        let mut xs = Vec::new();
        for _ in 0..500 {
            let (_, atoms) = sample_perturbed(&p, &w, &mut rng).unwrap();
            xs.extend(atoms.iter().map(|a| a.v.x));
        }
        let ks = ks_normal(xs, 1.0);
        assert!(ks < 0.005, "{ks}");
    }
}
