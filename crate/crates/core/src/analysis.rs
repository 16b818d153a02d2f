//! Statistics used to compare the three levels of description.

use crate::error::{Error, Result};
use crate::record::TrajectoryRecord;
use crate::scattering::{collide_body_atom, BodyState, SimParams};
use crate::vec2::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

/// Quadrature value, closed form and residual of one Gaussian half-moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentResidual {
    pub order: u32,
    pub beta: f64,
    pub quadrature: f64,
    pub closed_form: f64,
    pub residual: f64,
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `∫ M_β(v) (v·e)_±^k dv` for `k = 1, 2, 3` against
/// `(2πβ)^{-1/2}`, `1/(2β)` and `(2/(πβ³))^{1/2}`.
///
/// By rotation invariance the integral reduces to a one-dimensional
/// half-line integral of the Gaussian density.
pub fn moment_identity_check(beta: f64) -> Vec<MomentResidual> {
    let sd = beta.recip().sqrt();
    let closed = [
        (TAU * beta).sqrt().recip(),
        0.5 / beta,
        (2.0 / (PI * beta.powi(3))).sqrt(),
    ];
    (1..=3u32)
        .map(|k| {
            let f = |x: f64| x.powi(k as i32) * (-0.5 * beta * x * x).exp() / (sd * TAU.sqrt());
            let quadrature = simpson(f, 0.0, 40.0 * sd, 40_000);
            let closed_form = closed[(k - 1) as usize];
            MomentResidual {
                order: k,
                beta,
                quadrature,
                closed_form,
                residual: (quadrature - closed_form).abs(),
            }
        })
        .collect()
}

/// Biased-normalization autocovariance on lags `0..=max_lag` (in samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocovariance {
    pub dt: f64,
    pub values: Vec<f64>,
    /// Number of samples used (summed over series for ensembles).
    pub n: usize,
}

/// Minimum series length relative to the largest lag.
pub const MIN_LENGTH_FACTOR: usize = 10;

pub fn autocovariance(series: &[f64], dt: f64, max_lag: usize) -> Result<Autocovariance> {
    autocovariance_ensemble(&[series.to_vec()], dt, max_lag)
}

/// Autocovariance pooled over independent series, each centred on the
/// grand mean.
pub fn autocovariance_ensemble(series: &[Vec<f64>], dt: f64, max_lag: usize) -> Result<Autocovariance> {
    let total: usize = series.iter().map(Vec::len).sum();
    let shortest = series.iter().map(Vec::len).min().unwrap_or(0);
    if shortest < MIN_LENGTH_FACTOR * (max_lag + 1) {
        return Err(Error::InsufficientData(format!(
            "series of length {shortest} is too short for {max_lag} lags"
        )));
    }
    let mean = series.iter().flatten().sum::<f64>() / total as f64;
    let mut values = vec![0.0; max_lag + 1];
    for s in series {
        for (lag, v) in values.iter_mut().enumerate() {
            *v += s
                .iter()
                .zip(&s[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>();
        }
    }
    for v in values.iter_mut() {
        *v /= total as f64;
    }
    Ok(Autocovariance { dt, values, n: total })
}

/// Least-squares fit `C(s) ≈ C₀ e^{-θ s}` on `log C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub rate: f64,
    /// Approximate 95% interval for the rate.
    pub rate_lo: f64,
    pub rate_hi: f64,
    pub amplitude: f64,
    pub points: usize,
}

impl Autocovariance {
    /// Exponential fit using the lags where `C(s) > floor·C(0)`.
    pub fn fit_exponential(&self, floor: f64) -> Result<ExpFit> {
        let c0 = self.values[0];
        let pts: Vec<(f64, f64)> = self
            .values
            .iter()
            .enumerate()
            .take_while(|(_, &c)| c > floor * c0)
            .map(|(k, &c)| (k as f64 * self.dt, c.ln()))
            .collect();
        if pts.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "only {} lags above {floor} of the variance",
                pts.len()
            )));
        }
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let resid: f64 = pts.iter().map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let se = if pts.len() > 2 { (resid / (n - 2.0) / sxx).sqrt() } else { 0.0 };
        Ok(ExpFit {
            rate: -slope,
            rate_lo: -slope - 1.96 * se,
            rate_hi: -slope + 1.96 * se,
            amplitude: intercept.exp(),
            points: pts.len(),
        })
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let xs = sorted(samples);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Every `block`-th element.
pub fn block_subsample(xs: &[f64], block: usize) -> Vec<f64> {
    xs.iter().step_by(block.max(1)).copied().collect()
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical frequency with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: u64,
    pub total: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Frequency {
    pub fn new(count: u64, total: u64) -> Self {
        let (lo, hi) = wilson_interval(count, total, 1.96);
        Frequency {
            count,
            total,
            estimate: if total == 0 { 0.0 } else { count as f64 / total as f64 },
            lo,
            hi,
        }
    }

    /// Whether the two 95% intervals overlap.
    pub fn overlaps(&self, other: &Frequency) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Frequencies of the pathological sets over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathologyFrequency {
    /// Per collision: small deflection or large speed.
    pub a1: Frequency,
    /// Per collision: slow relative velocity before or after.
    pub a2: Frequency,
    /// Per collision: small deflection alone.
    pub small_deflection: Frequency,
    /// Per trajectory: killed before the end.
    pub killed: Frequency,
}

pub fn pathology_frequency(records: &[&TrajectoryRecord]) -> PathologyFrequency {
    let mut n = 0;
    let (mut a1, mut a2, mut sd) = (0, 0, 0);
    for c in records.iter().flat_map(|r| r.collisions.iter()) {
        n += 1;
        let f = c.flags;
        a1 += (f.small_deflection || f.large_speed) as u64;
        a2 += (f.slow_relative_pre || f.slow_relative_post) as u64;
        sd += f.small_deflection as u64;
    }
    let killed = records.iter().filter(|r| r.is_killed()).count() as u64;
    PathologyFrequency {
        a1: Frequency::new(a1, n),
        a2: Frequency::new(a2, n),
        small_deflection: Frequency::new(sd, n),
        killed: Frequency::new(killed, records.len() as u64),
    }
}

/// Exceedance probabilities `P(sup_{|σ-τ| ≤ η} |V(σ) - V(τ)| ≥ ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    /// `cells[i][j]` for `eta[i]`, `xi[j]`.
    pub cells: Vec<Vec<Frequency>>,
}

/// Largest velocity oscillation over windows of length `eta` on the sample grid.
pub fn path_modulus(record: &TrajectoryRecord, eta: f64) -> f64 {
    let s = &record.samples;
    let mut worst: f64 = 0.0;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if s[j].t - s[i].t > eta + 1e-12 {
                break;
            }
            worst = worst.max((s[j].body.v - s[i].body.v).norm());
        }
    }
    worst
}

pub fn modulus_of_continuity(records: &[&TrajectoryRecord], eta: &[f64], xi: &[f64]) -> ModulusTable {
    let n = records.len() as u64;
    let cells = eta
        .iter()
        .map(|&e| {
            let w: Vec<f64> = records.iter().map(|r| path_modulus(r, e)).collect();
            xi.iter()
                .map(|&x| Frequency::new(w.iter().filter(|&&m| m >= x).count() as u64, n))
                .collect()
        })
        .collect();
    ModulusTable {
        eta: eta.to_vec(),
        xi: xi.to_vec(),
        cells,
    }
}

impl ModulusTable {
    /// Cells whose Wilson intervals fail to overlap.
    pub fn disagreements(&self, other: &ModulusTable) -> usize {
        self.cells
            .iter()
            .flatten()
            .zip(other.cells.iter().flatten())
            .filter(|(a, b)| !a.overlaps(b))
            .count()
    }
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: usize,
    pub bins: usize,
}

/// Chi-square test of observed against expected counts, pooling bins with
/// expectation below 5 into one.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> ChiSquareReport {
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut po, mut pe) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e < 5.0 {
            po += o;
            pe += e;
        } else {
            stat += (o - e).powi(2) / e;
            bins += 1;
        }
    }
    if pe > 0.0 {
        stat += (po - pe).powi(2) / pe;
        bins += 1;
    } else if po > 0.0 {
        stat = f64::INFINITY;
    }
    let dof = bins.saturating_sub(1).max(1);
    let p_value = if stat.is_finite() {
        ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(0.0)
    } else {
        0.0
    };
    ChiSquareReport {
        statistic: stat,
        dof,
        p_value,
        samples: observed.iter().sum::<f64>() as usize,
        bins,
    }
}

/// Push-forward test of the collision map.
///
/// Incoming configurations are drawn with density `∝ D = -b_α` in the
/// normal angle `φ` (uniform, i.e. the measure `κ dσ`), the normal
/// relative speed `D ∈ (0, d_max)` and the tangential atom velocity. The
/// body velocity jump `V' - V = -(2αD/(A+1)) n` is binned in polar
/// coordinates `(ψ, ρ)` and compared with expected counts from the density
/// `((A+1)/(2α))²` with respect to `dV'`. With `drop_jacobian` the factor
/// is omitted (a negative control that must fail).
pub fn carleman_chi_square<R: Rng + ?Sized>(
    p: &SimParams,
    y: &BodyState,
    n_samples: usize,
    drop_jacobian: bool,
    rng: &mut R,
) -> ChiSquareReport {
    const NB: usize = 20;
    let d_max = 2.0;
    let t_max = 3.0;
    let alpha = p.alpha;
    let a_of = |phi: f64| {
        let dh = p.body.support(phi).dh;
        alpha * alpha * (1.0 + dh * dh / p.inertia())
    };
    // Smallest A gives the largest jump.
    let a_min = (0..4096)
        .map(|k| a_of(k as f64 * TAU / 4096.0))
        .fold(f64::INFINITY, f64::min);
    let rho_top = 2.0 * alpha * d_max / (a_min + 1.0) * (1.0 + 1e-9);
    let mut observed = vec![0.0; NB * NB];
    for _ in 0..n_samples {
        let phi = rng.random::<f64>() * TAU;
        let d = d_max * rng.random::<f64>().sqrt();
        let t = (2.0 * rng.random::<f64>() - 1.0) * t_max;
        let n = Vec2::from_angle(phi + y.theta);
        let r = p.body.boundary(phi).r.rotate(y.theta);
        let u = y.v + r.perp() * y.omega;
        let v = n * (alpha * u.dot(n) - d) + n.perp() * t;
        let out = collide_body_atom(y, v, phi, p);
        let jump = out.body.v - y.v;
        let psi = jump.angle().rem_euclid(TAU);
        let rho = jump.norm();
        let i = ((psi / TAU * NB as f64) as usize).min(NB - 1);
        let j = ((rho / rho_top * NB as f64) as usize).min(NB - 1);
        observed[i * NB + j] += 1.0;
    }
    // Sampling density in (φ, D) is (1/2π)(2D/d_max²); expected counts are
    // n/Z ∫∫ ((A+1)/(2α))² ρ dρ dψ with Z = π d_max².
    let z = PI * d_max * d_max;
    let sub = 64;
    let mut expected = vec![0.0; NB * NB];
    for i in 0..NB {
        for q in 0..sub {
            let psi = (i as f64 + (q as f64 + 0.5) / sub as f64) * TAU / NB as f64;
            let phi = psi - PI - y.theta;
            let a = a_of(phi);
            let rho_max = 2.0 * alpha * d_max / (a + 1.0);
            let jac = if drop_jacobian { 1.0 } else { ((a + 1.0) / (2.0 * alpha)).powi(2) };
            let dpsi = TAU / (NB * sub) as f64;
            for j in 0..NB {
                let lo = j as f64 * rho_top / NB as f64;
                let hi = ((j + 1) as f64 * rho_top / NB as f64).min(rho_max);
                if hi > lo {
                    expected[i * NB + j] += n_samples as f64 / z * jac * 0.5 * (hi * hi - lo * lo) * dpsi;
                }
            }
        }
    }
    chi_square(&observed, &expected)
}

/// Largest deviation after applying the body-atom collision twice at the
/// same contact angle.
pub fn involution_residual(y: &BodyState, v: Vec2, phi: f64, p: &SimParams) -> f64 {
    let once = collide_body_atom(y, v, phi, p);
    let twice = collide_body_atom(&once.body, once.v, phi, p);
    [
        (twice.body.v - y.v).norm(),
        (twice.body.omega - y.omega).abs(),
        (twice.v - v).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// A configuration whose pair meets again after a good collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecollisionWitness {
    pub body: BodyState,
    pub v: Vec2,
    pub phi: f64,
    /// `true` if found by the forward test on the outgoing configuration.
    pub forward: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecollisionSurvey {
    /// Incoming configurations drawn.
    pub sampled: u64,
    /// Of which the collision passed both good-collision tests.
    pub good: u64,
    /// Outgoing pairs meeting again in forward time.
    pub forward: u64,
    /// Incoming pairs having met before in backward time.
    pub backward: u64,
    pub witnesses: Vec<RecollisionWitness>,
}

/// Samples incoming contacts (body from equilibrium, contact point uniform
/// in arc length on the enlarged boundary, atom velocity Maxwellian and
/// conditioned to approach) until `target_good` collisions pass the
/// pathology filters, and runs the isolated two-body recollision test on
/// each in both time directions.
pub fn recollision_survey<R: Rng + ?Sized>(
    p: &SimParams,
    target_good: u64,
    horizon_factor: f64,
    rng: &mut R,
) -> Result<RecollisionSurvey> {
    let arc = p.body.arc_length_table(p.contact_offset());
    let mut s = RecollisionSurvey::default();
    while s.good < target_good {
        let y = crate::gibbs::sample_body(p, rng);
        let phi = arc.sample(&p.body, rng);
        let v = crate::gibbs::sample_maxwellians(1, p.beta, rng)[0];
        let out = collide_body_atom(&y, v, phi, p);
        if !out.incoming {
            continue;
        }
        s.sampled += 1;
        let flags = crate::scattering::pathology_flags((&y, v), (&out.body, out.v), p);
        if !flags.is_good() {
            continue;
        }
        s.good += 1;
        let fwd = crate::scattering::forward_recollides(&out.body, out.v, phi, p, horizon_factor)?;
        let bwd = crate::scattering::backward_recollides(&y, v, phi, p, horizon_factor)?;
        s.forward += fwd as u64;
        s.backward += bwd as u64;
        if fwd || bwd {
            s.witnesses.push(RecollisionWitness { body: y, v, phi, forward: fwd });
        }
    }
    Ok(s)
}

/// KS distance of one marginal, with sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub name: String,
    pub statistic: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub threshold: f64,
}

/// Outcome of one acceptance-style check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Collected cross-level statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub replicas: usize,
    pub ks: Vec<KsEntry>,
    pub decay_rates: Vec<(String, ExpFit)>,
    pub pathology: Vec<(String, PathologyFrequency)>,
    pub drift: Vec<(String, f64)>,
    pub chi_square: Vec<(String, ChiSquareReport)>,
    pub checks: Vec<CheckResult>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed {} replicas {}", self.seed, self.replicas);
        for k in &self.ks {
            let _ = writeln!(
                s,
                "ks {:<28} {:.4} (threshold {:.4}, n = {} / {})",
                k.name, k.statistic, k.threshold, k.n_a, k.n_b
            );
        }
        for (name, f) in &self.decay_rates {
            let _ = writeln!(s, "decay {:<25} {:.4} [{:.4}, {:.4}]", name, f.rate, f.rate_lo, f.rate_hi);
        }
        for (name, p) in &self.pathology {
            let _ = writeln!(
                s,
                "pathology {:<21} A1 {:.4} A2 {:.4} killed {:.4}",
                name, p.a1.estimate, p.a2.estimate, p.killed.estimate
            );
        }
        for (name, d) in &self.drift {
            let _ = writeln!(s, "drift {:<25} {:.3e}", name, d);
        }
        for (name, c) in &self.chi_square {
            let _ = writeln!(s, "chi2 {:<26} {:.2} dof {} p {:.3e}", name, c.statistic, c.dof, c.p_value);
        }
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}
