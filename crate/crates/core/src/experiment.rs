//! Replica ensembles, the three-level comparison and the invariant suite.

use crate::analysis::{
    carleman_chi_square, involution_residual, ks_one_sample, ks_two_sample, modulus_of_continuity,
    moment_identity_check, pathology_frequency, recollision_survey, ComparisonReport, KsEntry,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::SupportBody;
use crate::gibbs::{sample_body, sample_equilibrium, sample_maxwellians, sample_perturbed, sample_perturbed_body};
use crate::jump::{run_jump_process, JumpMode, JumpRun, RateEnvelope};
use crate::md::{self, MdRun, Mode};
use crate::ou::{params_from_body, run_ou, OuParams, OuVariant};
use crate::record::{Component, TrajectoryRecord};
use crate::rng::{stream_rng, SimRng};
use crate::scattering::{
    collide_body_atom, conserved_quantities, contact_angular_momentum, BodyState, SimParams,
    DEFAULT_HORIZON_FACTOR,
};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::TAU;

/// Random stream of one replica at one level of description.
pub fn replica_rng(seed: u64, replica: usize, level: Level) -> SimRng {
    stream_rng(seed, replica as u64 * 3 + level as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Md = 0,
    Jump = 1,
    Ou = 2,
}

/// Maps `f` over `0..n` on a pool of `workers` threads (0 = all cores),
/// keeping the output order.
pub fn in_pool<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

pub fn md_replica(p: &SimParams, cfg: &RunConfig, replica: usize) -> Result<MdRun> {
    let mut rng = replica_rng(cfg.seed, replica, Level::Md);
    let (body, atoms) = sample_perturbed(p, &cfg.perturbation, &mut rng)?;
    md::run(p, body, &atoms, cfg.t_end, cfg.mode.md(), cfg.sample_dt)
}

pub fn jump_replica(p: &SimParams, cfg: &RunConfig, replica: usize) -> Result<JumpRun> {
    let mut rng = replica_rng(cfg.seed, replica, Level::Jump);
    let y0 = sample_perturbed_body(p, &cfg.perturbation, &mut rng)?;
    run_jump_process(y0, cfg.t_end, cfg.mode.jump(), p, &mut rng, cfg.sample_dt)
}

pub fn ou_replica(p: &SimParams, ou: &OuParams, cfg: &RunConfig, replica: usize) -> Result<TrajectoryRecord> {
    let mut rng = replica_rng(cfg.seed, replica, Level::Ou);
    let y0 = sample_perturbed_body(p, &cfg.perturbation, &mut rng)?;
    run_ou(&y0, cfg.t_end, cfg.sample_dt, ou, &mut rng)
}

/// Increments `Ξ(s + len) - Ξ(s)` of one component over the windows
/// `[k·len, (k+1)·len] ⊂ [0, T]`, taking every `block`-th window. Records
/// that stop before a window ends contribute nothing for it.
pub fn window_increments(records: &[&TrajectoryRecord], len: f64, block: usize, comp: Component) -> Vec<f64> {
    let mut out = Vec::new();
    for r in records {
        let mut k = 0;
        loop {
            let (s, e) = (k as f64 * len, (k + 1) as f64 * len);
            if e > r.t_end + 1e-9 {
                break;
            }
            if let (Some(a), Some(b)) = (r.sample_at(s), r.sample_at(e)) {
                out.push(comp.get(&b.body) - comp.get(&a.body));
            }
            k += block.max(1);
        }
    }
    out
}

/// Values of one component at the given times, pooled over records.
pub fn slice_values(records: &[&TrajectoryRecord], times: &[f64], comp: Component) -> Vec<f64> {
    records
        .iter()
        .flat_map(|r| times.iter().filter_map(move |&t| r.sample_at(t)).map(move |s| comp.get(&s.body)))
        .collect()
}

/// KS distance of pooled slices from the centred Gaussian with variance `var`.
pub fn stationarity_ks(records: &[&TrajectoryRecord], times: &[f64], comp: Component, var: f64) -> f64 {
    let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
    ks_one_sample(&slice_values(records, times, comp), |x| normal.cdf(x))
}

/// KS statistics of velocity increments between two ensembles, with
/// `V₁` and `V₂` pooled by isotropy.
pub fn increment_ks(a: &[&TrajectoryRecord], b: &[&TrajectoryRecord], len: f64) -> (KsEntry, KsEntry) {
    let pooled = |rs: &[&TrajectoryRecord]| {
        let mut v = window_increments(rs, len, 1, Component::V1);
        v.extend(window_increments(rs, len, 1, Component::V2));
        v
    };
    let (va, vb) = (pooled(a), pooled(b));
    let (oa, ob) = (
        window_increments(a, len, 1, Component::Omega),
        window_increments(b, len, 1, Component::Omega),
    );
    (
        KsEntry {
            name: "dV".into(),
            statistic: ks_two_sample(&va, &vb),
            n_a: va.len(),
            n_b: vb.len(),
            threshold: 0.05,
        },
        KsEntry {
            name: "dOmega".into(),
            statistic: ks_two_sample(&oa, &ob),
            n_a: oa.len(),
            n_b: ob.len(),
            threshold: 0.05,
        },
    )
}

/// Runs MD, the jump process and the OU limit at matched parameters and
/// collects the cross-level statistics.
pub fn compare(cfg: &RunConfig) -> Result<ComparisonReport> {
    let p = cfg.sim_params()?;
    let ou = params_from_body(&p.consts, p.beta, cfg.ou_variant)?;
    let n = cfg.replicas;
    let md_runs = in_pool(cfg.workers, n, |r| md_replica(&p, cfg, r))?;
    let jump_runs = in_pool(cfg.workers, n, |r| jump_replica(&p, cfg, r))?;
    let ou_runs = in_pool(cfg.workers, n, |r| ou_replica(&p, &ou, cfg, r))?;
    let md: Vec<&TrajectoryRecord> = md_runs.iter().map(|r| &r.record).collect();
    let jp: Vec<&TrajectoryRecord> = jump_runs.iter().map(|r| &r.record).collect();
    let oup: Vec<&TrajectoryRecord> = ou_runs.iter().collect();

    let mut report = ComparisonReport {
        seed: cfg.seed,
        replicas: n,
        ..Default::default()
    };
    for (label, other) in [("jump", &jp), ("ou", &oup)] {
        let (dv, dom) = increment_ks(&md, other, cfg.window.expect("filled by validation"));
        for mut e in [dv, dom] {
            e.name = format!("md_vs_{label}_{}", e.name);
            if label == "jump" {
                report.check(
                    e.name.clone(),
                    e.statistic < e.threshold,
                    format!("KS {:.4} < {}", e.statistic, e.threshold),
                );
            }
            report.ks.push(e);
        }
    }

    let eta = [0.1, 0.25, 0.5];
    let xi = [0.5, 1.0, 2.0];
    let tm = modulus_of_continuity(&md, &eta, &xi);
    let tj = modulus_of_continuity(&jp, &eta, &xi);
    let bad = tm.disagreements(&tj);
    report.check("modulus_md_vs_jump", bad == 0, format!("{bad} of {} cells disagree", eta.len() * xi.len()));

    report.pathology.push(("md".into(), pathology_frequency(&md)));
    report.pathology.push(("jump".into(), pathology_frequency(&jp)));
    let drift = md_runs
        .iter()
        .map(|r| r.stats.energy_drift.max(r.stats.momentum_drift))
        .fold(0.0, f64::max);
    report.drift.push(("md_max_relative".into(), drift));
    report.check("md_conservation", drift < 1e-9, format!("max drift {drift:.3e}"));

    let lags = ((cfg.t_end / cfg.sample_dt) as usize / crate::analysis::MIN_LENGTH_FACTOR).min(40);
    for (label, recs) in [("md", &md), ("jump", &jp), ("ou", &oup)] {
        let series: Vec<Vec<f64>> = recs.iter().map(|r| r.series(Component::V1)).collect();
        if lags >= 3 {
            if let Ok(fit) = crate::analysis::autocovariance_ensemble(&series, cfg.sample_dt, lags - 1)
                .and_then(|c| c.fit_exponential(0.2))
            {
                report.decay_rates.push((format!("{label}_V1"), fit));
            }
        }
    }
    Ok(report)
}

fn ellipse() -> SupportBody {
    SupportBody::ellipse(0.5, 0.3).expect("valid ellipse")
}

/// The invariant suite. `fast` shrinks every sample size so the whole
/// suite runs in well under a minute.
pub fn validate_suite(fast: bool, seed: u64) -> Result<ComparisonReport> {
    let scale = if fast { 10 } else { 1 };
    let mut report = ComparisonReport {
        seed,
        ..Default::default()
    };

    // Closed-curve identities of the enlarged boundary.
    let mut worst: f64 = 0.0;
    for body in [SupportBody::disk(1.0)?, ellipse()] {
        for alpha in [0.0, 0.1, 0.2] {
            let (a, b) = body.closed_curve_residuals(alpha / 2.0);
            let l = body.perimeter() + std::f64::consts::PI * alpha;
            worst = worst.max(a.max(b) / l);
        }
    }
    report.check("closed_curve_identities", worst < 1e-9, format!("max relative residual {worst:.2e}"));

    let worst = [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&b| moment_identity_check(b))
        .map(|m| m.residual)
        .fold(0.0, f64::max);
    report.check("gaussian_half_moments", worst < 1e-10, format!("max residual {worst:.2e}"));

    // Single collisions: involution and conservation.
    let p = SimParams::new(1000, 0.2, 1.0, 0.1, ellipse())?;
    let mut rng = stream_rng(seed, 0);
    let (mut inv, mut cons): (f64, f64) = (0.0, 0.0);
    for _ in 0..100_000 / scale {
        let y = sample_body(&p, &mut rng);
        let v = sample_maxwellians(1, 1.0, &mut rng)[0];
        let phi = rng.random::<f64>() * TAU;
        inv = inv.max(involution_residual(&y, v, phi, &p));
        let out = collide_body_atom(&y, v, phi, &p);
        let (c0, c1) = (conserved_quantities(&y, v, &p), conserved_quantities(&out.body, out.v, &p));
        let r = out.contact.r;
        let l0 = contact_angular_momentum(&y, r, &p);
        let l1 = contact_angular_momentum(&out.body, r, &p);
        cons = cons
            .max((c0.momentum - c1.momentum).norm())
            .max((c0.energy - c1.energy).abs() / c0.energy)
            .max((l0 - l1).abs());
    }
    report.check("collision_involution", inv < 1e-12, format!("max residual {inv:.2e}"));
    report.check("collision_conservation", cons < 1e-12, format!("max residual {cons:.2e}"));

    // Thinning envelope.
    let mut breach = None;
    for _ in 0..2000 / scale {
        let mut y = sample_body(&p, &mut rng);
        y.v = y.v * 3.0;
        y.omega *= 3.0;
        if let Err(e) = RateEnvelope::new(&y, &p).verify(&y, &p) {
            breach = Some(e.to_string());
        }
    }
    report.check("rate_envelope", breach.is_none(), breach.unwrap_or_else(|| "dominates".into()));

    // Whole-system conservation in MD.
    let pm = SimParams::new(if fast { 200 } else { 500 }, 0.1, 1.0, 0.1, ellipse())?;
    let (body, atoms) = sample_equilibrium(&pm, &mut rng)?;
    let run = md::run(&pm, body, &atoms, if fast { 1.0 } else { 5.0 }, Mode::Full, 0.1)?;
    let drift = run.stats.energy_drift.max(run.stats.momentum_drift);
    report.drift.push(("md_relative".into(), drift));
    report.check("md_conservation", drift < 1e-9, format!("drift {drift:.2e}"));

    // Disk degeneracy.
    let pd = SimParams::new(200, 0.2, 1.0, 0.1, SupportBody::disk(0.5)?)?;
    let (body, atoms) = sample_equilibrium(&pd, &mut rng)?;
    let w0 = body.omega;
    let run = md::run(&pd, body, &atoms, 1.0, Mode::Full, 0.05)?;
    let md_const = run.record.samples.iter().all(|s| s.body.omega == w0) && run.record.final_body.omega == w0;
    let y0 = sample_body(&pd, &mut rng);
    let jr = run_jump_process(y0, 2.0, JumpMode::Plain, &pd, &mut rng, 0.05)?;
    let jump_const = jr.record.collisions.iter().all(|c| c.post.omega == y0.omega);
    let ou = params_from_body(&pd.consts, 1.0, OuVariant::Generator)?;
    report.check(
        "disk_degeneracy",
        md_const && jump_const && ou.theta_omega == 0.0 && ou.sigma_omega2 == 0.0,
        format!(
            "md {md_const}, jump {jump_const}, theta_omega {}, sigma_omega2 {}",
            ou.theta_omega, ou.sigma_omega2
        ),
    );

    // OU stationary law.
    let ou = params_from_body(&p.consts, p.beta, OuVariant::Generator)?;
    let dv = (ou.stationary_var_v() - 1.0 / p.beta).abs();
    let dom = (ou.stationary_var_omega() - 1.0 / (p.beta * p.inertia())).abs();
    report.check("ou_stationary_law", dv.max(dom) < 1e-12, format!("variance errors {dv:.1e}, {dom:.1e}"));

    // Carleman push-forward with its negative control.
    let y = BodyState {
        v: crate::Vec2::new(0.3, -0.6),
        omega: 0.7,
        ..BodyState::at_rest()
    };
    let pc = SimParams::new(1000, 0.3, 1.0, 0.1, ellipse())?;
    let good = carleman_chi_square(&pc, &y, 1_000_000 / scale, false, &mut rng);
    let bad = carleman_chi_square(&pc, &y, 1_000_000 / scale, true, &mut rng);
    report.chi_square.push(("carleman".into(), good));
    report.chi_square.push(("carleman_negative_control".into(), bad));
    report.check("carleman", good.p_value > 0.01, format!("p = {:.3}", good.p_value));
    report.check("carleman_negative_control", bad.p_value < 1e-6, format!("p = {:.2e}", bad.p_value));

    // Good collisions never recollide.
    let pr = SimParams::new(1000, 0.1, 1.0, 0.1, ellipse())?;
    let s = recollision_survey(&pr, 10_000 / scale as u64, DEFAULT_HORIZON_FACTOR, &mut rng)?;
    report.check(
        "no_recollision",
        s.forward + s.backward == 0,
        match s.witnesses.first() {
            None => format!("{} good collisions, none recollide", s.good),
            Some(w) => format!("witness {}", serde_json::to_string(w)?),
        },
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{BodySample, RecordKind};

    #[test]
    fn increments_over_windows() {
        let mut r = TrajectoryRecord::new(RecordKind::Ou, BodyState::at_rest());
        for k in 0..=10 {
            let mut b = BodyState::at_rest();
            b.v.x = k as f64;
            r.samples.push(BodySample { t: k as f64 * 0.1, body: b });
        }
        r.t_end = 1.0;
        let inc = window_increments(&[&r], 0.2, 1, Component::V1);
        assert_eq!(inc.len(), 5);
        assert!(inc.iter().all(|&d| (d - 2.0).abs() < 1e-12));
        assert_eq!(window_increments(&[&r], 0.2, 2, Component::V1).len(), 3);
        r.t_end = 0.5;
        assert_eq!(window_increments(&[&r], 0.2, 1, Component::V1).len(), 2);
    }

    #[test]
    fn replicas_are_reproducible() {
        let cfg = RunConfig::from_json_str(r#"{"N": 200, "alpha": 0.2, "T": 0.5, "seed": 5}"#).unwrap();
        let p = cfg.sim_params().unwrap();
        let a = in_pool(1, 2, |r| jump_replica(&p, &cfg, r)).unwrap();
        let b = in_pool(2, 2, |r| jump_replica(&p, &cfg, r)).unwrap();
        assert_eq!(a[1].record, b[1].record);
        assert_ne!(a[0].record, a[1].record);
    }

    #[test]
    fn fast_suite_passes() {
        let r = validate_suite(true, 1).unwrap();
        assert!(r.passed(), "{}", r.to_text());
    }
}
