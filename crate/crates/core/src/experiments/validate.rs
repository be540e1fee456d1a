use std::sync::Arc;

use num_complex::Complex64;

use super::{drop_scene, dual_correlations, dual_estimators, SystemConfig, TAG_VALIDATE};
use crate::channel::{empirical_xpd, sample_cross_covariance, sample_dual_channel};
use crate::correlation::build_correlation_set;
use crate::error::Result;
use crate::estimation::{build_pilot_book, estimate_with, process_pilots, DualEstimator};
use crate::numerics::{frobenius, CMatrix};
use crate::precoding::MrFactory;
use crate::rng::{derive_seed, stream};
use crate::se::{closed_form_se_mr, monte_carlo_se, prelog, DualPolSource, MonteCarloSpec, SeReport};
use crate::units::PolPair;

const IDENTITY_TOL: f64 = 1e-10;
const XPD_TOL_DB: f64 = 0.3;
const XPD_SAMPLES: usize = 20_000;
const ORTHOGONALITY_TRIALS: usize = 2_000;

/// Deliberate corruption for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultInjection {
    /// Factor applied to `Γ` before the closed form is evaluated.
    pub gamma_scale: f64,
}

impl Default for FaultInjection {
    fn default() -> Self {
        FaultInjection { gamma_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub config_digest: String,
    pub seed: u64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("config digest {}\nseed {}\n", self.config_digest, self.seed);
        for c in &self.checks {
            s += &format!(
                "{} {}: measured {} tolerance {}{}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                super::format_float(c.measured),
                super::format_float(c.tolerance),
                if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) }
            );
        }
        s += if self.passed() { "all checks passed\n" } else { "validation FAILED\n" };
        s
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| crate::Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "passed", "measured", "tolerance", "config_digest", "seed"]).map_err(io)?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.passed.to_string(),
                super::format_float(c.measured),
                super::format_float(c.tolerance),
                self.config_digest.clone(),
                self.seed.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one check: the measured error and its tolerance.
struct Measure {
    measured: f64,
    tolerance: f64,
    detail: String,
}

fn record(checks: &mut Vec<Check>, name: &str, outcome: Result<Measure>) {
    checks.push(match outcome {
        Ok(m) => Check {
            name: name.into(),
            passed: m.measured <= m.tolerance,
            measured: m.measured,
            tolerance: m.tolerance,
            detail: m.detail,
        },
        Err(e) => Check { name: name.into(), passed: false, measured: f64::NAN, tolerance: 0.0, detail: e.to_string() },
    });
}

fn relative(diff: &CMatrix, base: &CMatrix) -> f64 {
    frobenius(diff) / frobenius(base).max(f64::MIN_POSITIVE)
}

pub fn validate(cfg: &SystemConfig) -> ValidationReport {
    validate_with(cfg, FaultInjection::default())
}

/// Run every check on drop 0 of the configured system.
pub fn validate_with(cfg: &SystemConfig, fault: FaultInjection) -> ValidationReport {
    let mut checks = Vec::new();
    let report = |checks| ValidationReport { checks, config_digest: cfg.digest(), seed: cfg.seed };
    let setup = cfg.validate().and_then(|_| {
        let scene = drop_scene(cfg, cfg.m, 0)?;
        let corrs = dual_correlations(&scene, cfg.xpd_db)?;
        let est = dual_estimators(cfg, &corrs)?;
        Ok((scene, corrs, est))
    });
    let (scene, corrs, est) = match setup {
        Ok(s) => s,
        Err(e) => {
            record(&mut checks, "setup", Err(e));
            return report(checks);
        }
    };
    let noise = cfg.noise_var();

    record(
        &mut checks,
        "covariance_split",
        Ok(Measure {
            measured: corrs.iter().map(|c| relative(&(c.r_v() + c.r_h() - c.r()), c.r())).fold(0.0, f64::max),
            tolerance: IDENTITY_TOL,
            detail: "R_v + R_h = R".into(),
        }),
    );

    record(
        &mut checks,
        "estimate_error_split",
        Ok(Measure {
            measured: est
                .iter()
                .flat_map(|e| [&e.v, &e.h])
                .map(|s| relative(&(s.gamma() + s.error_covariance() - s.covariance()), s.covariance()))
                .fold(0.0, f64::max),
            tolerance: IDENTITY_TOL,
            detail: "gamma + C = R per polarization".into(),
        }),
    );

    record(&mut checks, "equal_traces", (|| {
        let p = PolPair::both(0.5 * (cfg.p_kv + cfg.p_kh));
        let mut worst: f64 = 0.0;
        for c in &corrs {
            let t = DualEstimator::new(c, p, cfg.tau_p(), noise)?.traces();
            worst = worst.max((t.v - t.h).abs() / t.v.abs().max(f64::MIN_POSITIVE));
        }
        Ok(Measure { measured: worst, tolerance: IDENTITY_TOL, detail: "equal pilot powers".into() })
    })());

    record(&mut checks, "xpd_statistics", (|| {
        let beta = scene.ues[0].beta;
        let r_bs = CMatrix::identity(cfg.m / 2, cfg.m / 2) * Complex64::new(beta, 0.0);
        let corr = build_correlation_set(&r_bs, cfg.xpd().q)?;
        let mut rng = stream(cfg.seed, &[TAG_VALIDATE, 0]);
        let samples: Vec<_> = (0..XPD_SAMPLES).map(|_| sample_dual_channel(&corr, &mut rng)).collect();
        let xpd = empirical_xpd(&samples)?;
        let measured = if cfg.xpd_db.is_infinite() {
            if xpd.is_infinite() { 0.0 } else { f64::INFINITY }
        } else {
            (xpd - cfg.xpd_db).abs()
        };
        Ok(Measure { measured, tolerance: XPD_TOL_DB, detail: format!("empirical {xpd:.3} dB") })
    })());

    let stats: Vec<Arc<DualEstimator>> = est.iter().cloned().map(Arc::new).collect();
    let book = build_pilot_book(&vec![cfg.pilot_powers(); cfg.k], cfg.tau_c);

    record(&mut checks, "mmse_orthogonality", (|| {
        let book = book.clone()?;
        let mut rng = stream(cfg.seed, &[TAG_VALIDATE, 1]);
        let mut pairs = Vec::with_capacity(ORTHOGONALITY_TRIALS);
        for _ in 0..ORTHOGONALITY_TRIALS {
            let chans: Vec<_> = corrs.iter().map(|c| sample_dual_channel(c, &mut rng)).collect();
            let y = process_pilots(&chans, &book, noise, &mut rng)?;
            let e = estimate_with(&stats[0], &y[0]);
            let err = &chans[0].h_v - &e.hhat_v;
            pairs.push((e.hhat_v, err));
        }
        let cross = sample_cross_covariance(pairs.iter().map(|(a, b)| (a, b)), cfg.m);
        let worst = cross.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tolerance = 5.0 * frobenius(corrs[0].r_v()) / (ORTHOGONALITY_TRIALS as f64).sqrt();
        Ok(Measure { measured: worst, tolerance, detail: "max |E{hhat_v e_v^H}| entry, UE 0".into() })
    })());

    let rhos = vec![cfg.downlink_powers(); cfg.k];
    let pre = prelog(cfg.tau_c, cfg.tau_p());
    let mr = MrFactory::dual(&est, &rhos);
    let direct = (|| -> Result<SeReport> {
        let spec = MonteCarloSpec::new(cfg.mc_trials, derive_seed(cfg.seed, &[TAG_VALIDATE, 2]))?;
        monte_carlo_se(&DualPolSource::direct(stats.clone())?, &mr, noise, pre.clone()?, &spec)
    })();

    record(&mut checks, "closed_form_vs_monte_carlo", (|| {
        let scaled: Vec<DualEstimator> = est
            .iter()
            .map(|e| DualEstimator { v: e.v.with_scaled_gamma(fault.gamma_scale), h: e.h.with_scaled_gamma(fault.gamma_scale) })
            .collect();
        let cf = closed_form_se_mr(&scaled, &rhos, noise, pre.clone()?)?;
        let mc = direct.clone()?;
        let se = mc.std_errors.clone().unwrap_or_else(|| vec![0.0; cfg.k]);
        let worst = (0..cfg.k)
            .map(|k| (cf.per_ue_se[k] - mc.per_ue_se[k]).abs() / (3.0 * se[k]).max(0.02))
            .fold(0.0, f64::max);
        Ok(Measure { measured: worst, tolerance: 1.0, detail: "max |cf - mc| / max(3 se, 0.02)".into() })
    })());

    record(&mut checks, "estimator_path_equivalence", (|| {
        let a = direct.clone()?;
        let spec = MonteCarloSpec::new(cfg.mc_trials, derive_seed(cfg.seed, &[TAG_VALIDATE, 3]))?;
        let src = DualPolSource::end_to_end(stats.clone(), corrs.clone(), book.clone()?, noise)?;
        let b = monte_carlo_se(&src, &mr, noise, pre.clone()?, &spec)?;
        let sa = a.std_errors.clone().unwrap_or_else(|| vec![0.0; cfg.k]);
        let sb = b.std_errors.clone().unwrap_or_else(|| vec![0.0; cfg.k]);
        let worst = (0..cfg.k)
            .map(|k| (a.per_ue_se[k] - b.per_ue_se[k]).abs() / (3.0 * (sa[k].powi(2) + sb[k].powi(2)).sqrt()))
            .fold(0.0, f64::max);
        Ok(Measure { measured: worst, tolerance: 1.0, detail: "max |direct - end_to_end| / joint 3 se".into() })
    })());

    report(checks)
}
