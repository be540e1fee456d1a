//! Experiment campaigns: antenna sweeps, per-UE SE samples for CDFs, XPD
//! sweeps and the validation battery, all written as CSV rows.

mod config;
mod validate;

pub use config::SystemConfig;
pub use validate::{validate, validate_with, Check, FaultInjection, ValidationReport};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{build_correlation_set, local_scattering_cov, xpd_from_db, CorrelationSet};
use crate::error::{Error, Result};
use crate::estimation::{DualEstimator, StreamEstimator};
use crate::numerics::CMatrix;
use crate::precoding::{Scheme, ZfFactory};
use crate::rng::{derive_seed, stream};
use crate::scenario::{drop_ues, UeDrop};
use crate::se::{
    closed_form_se_mr, monte_carlo_se, prelog, uni_closed_form_se_mr, DualPolSource, MonteCarloSpec,
    SeReport, UniPolSource,
};

pub const CSV_HEADER: [&str; 11] =
    ["experiment", "M", "K", "precoder", "setup", "xpd_db", "drop_index", "ue_index", "se", "method", "seed"];

pub(crate) const TAG_DROP: u64 = 1;
pub(crate) const TAG_MC: u64 = 2;
pub(crate) const TAG_VALIDATE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    Dual,
    Uni,
}

impl Setup {
    pub fn label(self) -> &'static str {
        match self {
            Setup::Dual => "dual",
            Setup::Uni => "uni",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Setup::Dual => 0,
            Setup::Uni => 1,
        }
    }
}

fn scheme_tag(s: Scheme) -> u64 {
    match s {
        Scheme::Mr => 0,
        Scheme::Zf => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    MSweep,
    Cdf,
    XpdSweep,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::MSweep => "m_sweep",
            Experiment::Cdf => "cdf",
            Experiment::XpdSweep => "xpd_sweep",
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        match label {
            "m_sweep" => Ok(Experiment::MSweep),
            "cdf" => Ok(Experiment::Cdf),
            "xpd_sweep" => Ok(Experiment::XpdSweep),
            _ => Err(Error::InvalidParameter(format!("unknown experiment {label}"))),
        }
    }

    fn combos(self) -> &'static [(Setup, Scheme)] {
        const ALL: [(Setup, Scheme); 4] =
            [(Setup::Dual, Scheme::Mr), (Setup::Dual, Scheme::Zf), (Setup::Uni, Scheme::Mr), (Setup::Uni, Scheme::Zf)];
        match self {
            Experiment::MSweep | Experiment::Cdf => &ALL,
            Experiment::XpdSweep => &ALL[..2],
        }
    }

    fn per_ue_rows(self) -> bool {
        !matches!(self, Experiment::XpdSweep)
    }

    fn sum_rows(self) -> bool {
        !matches!(self, Experiment::Cdf)
    }
}

/// Row label for drops that could not be evaluated.
pub const FAILED_METHOD: &str = "failed";

/// One CSV line. `drop_index = -1` marks an average over drops and
/// `ue_index = -1` a sum over UEs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub m: usize,
    pub k: usize,
    pub precoder: Scheme,
    pub setup: Setup,
    pub xpd_db: f64,
    pub drop_index: i64,
    pub ue_index: i64,
    pub se: f64,
    pub method: String,
    pub seed: u64,
}

/// Nine significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        x.to_string()
    }
}

impl ResultRow {
    pub fn record(&self) -> [String; 11] {
        [
            self.experiment.label().to_string(),
            self.m.to_string(),
            self.k.to_string(),
            self.precoder.label().to_string(),
            self.setup.label().to_string(),
            format_float(self.xpd_db),
            self.drop_index.to_string(),
            self.ue_index.to_string(),
            format_float(self.se),
            self.method.clone(),
            self.seed.to_string(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::InvalidParameter(format!("row lacks field {i}")));
        let bad = |what: &str| Error::InvalidParameter(format!("cannot parse {what}"));
        Ok(ResultRow {
            experiment: Experiment::parse(field(0)?)?,
            m: field(1)?.parse().map_err(|_| bad("M"))?,
            k: field(2)?.parse().map_err(|_| bad("K"))?,
            precoder: match field(3)? {
                "MR" => Scheme::Mr,
                "ZF" => Scheme::Zf,
                _ => return Err(bad("precoder")),
            },
            setup: match field(4)? {
                "dual" => Setup::Dual,
                "uni" => Setup::Uni,
                _ => return Err(bad("setup")),
            },
            xpd_db: field(5)?.parse().map_err(|_| bad("xpd_db"))?,
            drop_index: field(6)?.parse().map_err(|_| bad("drop_index"))?,
            ue_index: field(7)?.parse().map_err(|_| bad("ue_index"))?,
            se: field(8)?.parse().map_err(|_| bad("se"))?,
            method: field(9)?.to_string(),
            seed: field(10)?.parse().map_err(|_| bad("seed"))?,
        })
    }

    pub fn is_failed(&self) -> bool {
        self.method == FAILED_METHOD
    }
}

/// Large-scale quantities of one UE drop evaluated for one array size.
#[derive(Debug, Clone)]
pub struct DropScene {
    pub ues: Vec<UeDrop>,
    /// Per-UE `M/2 × M/2` array covariance.
    pub r_bs: Vec<CMatrix>,
}

/// UE positions and angles depend only on the seed and drop index, so the
/// same drop is shared across array sizes and XPD values.
pub fn drop_scene(cfg: &SystemConfig, m: usize, drop_index: usize) -> Result<DropScene> {
    let mut rng = stream(cfg.seed, &[TAG_DROP, drop_index as u64]);
    let ues = drop_ues(cfg.k, &cfg.drop_model(), &mut rng)?;
    let r_bs = ues
        .iter()
        .map(|u| local_scattering_cov(u.beta, &u.cluster_angles, cfg.asd_rad(), m / 2))
        .collect::<Result<Vec<_>>>()?;
    Ok(DropScene { ues, r_bs })
}

/// Seed of the Monte Carlo stream for one cell. The XPD is left out so XPD
/// sweeps compare on common random numbers.
pub fn mc_seed(cfg: &SystemConfig, m: usize, drop_index: usize, setup: Setup, scheme: Scheme) -> u64 {
    derive_seed(cfg.seed, &[TAG_MC, drop_index as u64, m as u64, setup.tag(), scheme_tag(scheme)])
}

pub fn dual_correlations(scene: &DropScene, xpd_db: f64) -> Result<Vec<CorrelationSet>> {
    let q = xpd_from_db(xpd_db).q;
    scene.r_bs.iter().map(|r| build_correlation_set(r, q)).collect()
}

pub fn dual_estimators(cfg: &SystemConfig, corrs: &[CorrelationSet]) -> Result<Vec<DualEstimator>> {
    corrs.iter().map(|c| DualEstimator::new(c, cfg.pilot_powers(), cfg.tau_p(), cfg.noise_var())).collect()
}

pub fn uni_estimators(cfg: &SystemConfig, scene: &DropScene) -> Result<Vec<StreamEstimator>> {
    scene.r_bs.iter().map(|r| StreamEstimator::new(r, cfg.p_uni, cfg.tau_uni_p(), cfg.noise_var())).collect()
}

/// SE of one drop for each requested (setup, precoder) pair. MR uses the
/// closed forms and ZF the Monte Carlo bound.
pub fn evaluate_drop(
    cfg: &SystemConfig,
    scene: &DropScene,
    m: usize,
    xpd_db: f64,
    drop_index: usize,
    combos: &[(Setup, Scheme)],
) -> Vec<Result<SeReport>> {
    let noise = cfg.noise_var();
    let needs = |s: Setup| combos.iter().any(|c| c.0 == s);
    let dual = needs(Setup::Dual).then(|| dual_correlations(scene, xpd_db).and_then(|c| dual_estimators(cfg, &c)));
    let uni = needs(Setup::Uni).then(|| uni_estimators(cfg, scene));
    combos
        .iter()
        .map(|&(setup, scheme)| {
            let spec = MonteCarloSpec::new(cfg.mc_trials, mc_seed(cfg, m, drop_index, setup, scheme))?;
            match setup {
                Setup::Dual => {
                    let est = dual.as_ref().expect("dual estimators prepared").as_ref().map_err(Clone::clone)?;
                    let rhos = vec![cfg.downlink_powers(); est.len()];
                    let pre = prelog(cfg.tau_c, cfg.tau_p())?;
                    match scheme {
                        Scheme::Mr => closed_form_se_mr(est, &rhos, noise, pre),
                        Scheme::Zf => {
                            let src = DualPolSource::direct(est.iter().cloned().map(Arc::new).collect())?;
                            monte_carlo_se(&src, &ZfFactory::dual(&rhos), noise, pre, &spec)
                        }
                    }
                }
                Setup::Uni => {
                    let est = uni.as_ref().expect("uni estimators prepared").as_ref().map_err(Clone::clone)?;
                    let pre = prelog(cfg.tau_c, cfg.tau_uni_p())?;
                    match scheme {
                        Scheme::Mr => uni_closed_form_se_mr(est, cfg.rho_uni, noise, pre),
                        Scheme::Zf => {
                            let src = UniPolSource::direct(est)?;
                            monte_carlo_se(&src, &ZfFactory::uni(est.len(), cfg.rho_uni), noise, pre, &spec)
                        }
                    }
                }
            }
        })
        .collect()
}

fn check_array_size(cfg: &SystemConfig, m: usize) -> Result<()> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidParameter(format!("M = {m} must be even and at least 2")));
    }
    if m < 2 * cfg.k {
        return Err(Error::InvalidParameter(format!("M = {m} cannot zero-force {} streams", 2 * cfg.k)));
    }
    Ok(())
}

/// Rows of a single (experiment, M, XPD, drop) cell. Sweeps are assembled
/// from these, so any row can be regenerated from its own metadata.
pub fn run_cell(
    cfg: &SystemConfig,
    experiment: Experiment,
    m: usize,
    xpd_db: f64,
    drop_index: usize,
) -> Result<Vec<ResultRow>> {
    check_array_size(cfg, m)?;
    let scene = drop_scene(cfg, m, drop_index);
    Ok(cell_rows(cfg, experiment, m, &[xpd_db], drop_index, scene.as_ref()).remove(0))
}

/// Rows for every XPD value of one drop, sharing the drop's scene.
fn cell_rows(
    cfg: &SystemConfig,
    experiment: Experiment,
    m: usize,
    xpds: &[f64],
    drop_index: usize,
    scene: std::result::Result<&DropScene, &Error>,
) -> Vec<Vec<ResultRow>> {
    let combos = experiment.combos();
    xpds.iter()
        .map(|&xpd_db| {
            let reports: Vec<Result<SeReport>> = match scene {
                Ok(s) => evaluate_drop(cfg, s, m, xpd_db, drop_index, combos),
                Err(e) => combos.iter().map(|_| Err(e.clone())).collect(),
            };
            let mut rows = Vec::new();
            for (&(setup, precoder), report) in combos.iter().zip(reports) {
                let row = |ue_index: i64, se: f64, method: &str| ResultRow {
                    experiment,
                    m,
                    k: cfg.k,
                    precoder,
                    setup,
                    xpd_db,
                    drop_index: drop_index as i64,
                    ue_index,
                    se,
                    method: method.to_string(),
                    seed: cfg.seed,
                };
                match report {
                    Ok(r) => {
                        if experiment.per_ue_rows() {
                            for (k, &se) in r.per_ue_se.iter().enumerate() {
                                rows.push(row(k as i64, se, r.method.label()));
                            }
                        }
                        if experiment.sum_rows() {
                            rows.push(row(-1, r.sum_se, r.method.label()));
                        }
                    }
                    Err(e) => {
                        eprintln!(
                            "warning: {} M={m} xpd={xpd_db} drop {drop_index} {}/{} failed: {e}",
                            experiment.label(),
                            setup.label(),
                            precoder.label()
                        );
                        rows.push(row(-1, f64::NAN, FAILED_METHOD));
                    }
                }
            }
            rows
        })
        .collect()
}

/// Average sum-SE rows over the drops of one (M, XPD) group.
fn average_rows(cfg: &SystemConfig, experiment: Experiment, m: usize, xpd_db: f64, rows: &[ResultRow]) -> Vec<ResultRow> {
    experiment
        .combos()
        .iter()
        .map(|&(setup, precoder)| {
            let sums: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.setup == setup && r.precoder == precoder && r.ue_index == -1 && !r.is_failed())
                .collect();
            let (se, method) = match sums.first() {
                Some(first) => (sums.iter().map(|r| r.se).sum::<f64>() / sums.len() as f64, first.method.clone()),
                None => (f64::NAN, FAILED_METHOD.to_string()),
            };
            ResultRow {
                experiment,
                m,
                k: cfg.k,
                precoder,
                setup,
                xpd_db,
                drop_index: -1,
                ue_index: -1,
                se,
                method,
                seed: cfg.seed,
            }
        })
        .collect()
}

fn run_grid(cfg: &SystemConfig, experiment: Experiment, m_values: &[usize], xpds: &[f64]) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    for &m in m_values {
        check_array_size(cfg, m)?;
    }
    if xpds.iter().any(|x| x.is_nan() || *x == f64::NEG_INFINITY) {
        return Err(Error::InvalidParameter("XPD values must be real numbers or inf".into()));
    }
    let mut out = Vec::new();
    for &m in m_values {
        // per drop: one row list per XPD value
        let cells: Vec<Vec<Vec<ResultRow>>> = (0..cfg.drops)
            .into_par_iter()
            .map(|d| {
                let scene = drop_scene(cfg, m, d);
                cell_rows(cfg, experiment, m, xpds, d, scene.as_ref())
            })
            .collect();
        for (x, &xpd_db) in xpds.iter().enumerate() {
            let group: Vec<ResultRow> = cells.iter().flat_map(|c| c[x].iter().cloned()).collect();
            let averages = if experiment.sum_rows() { average_rows(cfg, experiment, m, xpd_db, &group) } else { vec![] };
            out.extend(group);
            out.extend(averages);
        }
    }
    Ok(out)
}

/// Sum SE against array size for all four setup/precoder pairs.
pub fn run_m_sweep(cfg: &SystemConfig, m_values: &[usize]) -> Result<Vec<ResultRow>> {
    run_grid(cfg, Experiment::MSweep, m_values, &[cfg.xpd_db])
}

/// Per-UE SE samples at the configured array size.
pub fn run_cdf(cfg: &SystemConfig) -> Result<Vec<ResultRow>> {
    run_grid(cfg, Experiment::Cdf, &[cfg.m], &[cfg.xpd_db])
}

/// Dual-polarized sum SE across XPD values, the same XPD for every UE.
pub fn run_xpd_sweep(cfg: &SystemConfig, m_values: &[usize], xpd_values_db: &[f64]) -> Result<Vec<ResultRow>> {
    run_grid(cfg, Experiment::XpdSweep, m_values, xpd_values_db)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    rdr.records()
        .map(|r| ResultRow::from_record(&r.map_err(|e| Error::Io(e.to_string()))?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub config: String,
}

impl RunMetadata {
    pub fn new(experiment: &str, cfg: &SystemConfig) -> Self {
        RunMetadata {
            experiment: experiment.to_string(),
            config_digest: cfg.digest(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.to_toml_string(),
        }
    }
}

/// `<out>.meta.json` next to the CSV.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Write the CSV and its metadata sidecar.
pub fn write_outputs(rows: &[ResultRow], out: &Path, meta: &RunMetadata) -> Result<()> {
    write_csv(rows, std::io::BufWriter::new(std::fs::File::create(out)?))?;
    let json = serde_json::to_string_pretty(meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(sidecar_path(out), json + "\n")?;
    Ok(())
}
