use dualpol_mimo::experiments::{
    read_csv, run_cdf, run_cell, run_m_sweep, run_xpd_sweep, sidecar_path, write_outputs, Experiment, ResultRow,
    RunMetadata, Setup, SystemConfig,
};
use dualpol_mimo::precoding::Scheme;

fn small() -> SystemConfig {
    SystemConfig { m: 16, k: 3, drops: 3, mc_trials: 200, seed: 21, ..SystemConfig::default() }
}

#[test]
fn rows_replay_from_their_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = small();
    let rows = run_m_sweep(&cfg, &[12, 16]).unwrap();
    write_outputs(&rows, &out, &RunMetadata::new("m_sweep", &cfg)).unwrap();

    let meta: RunMetadata = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&out)).unwrap()).unwrap();
    let replay_cfg = SystemConfig::from_toml_str(&meta.config).unwrap();
    assert_eq!(replay_cfg.digest(), meta.config_digest);

    let saved = read_csv(&out).unwrap();
    for target in saved.iter().filter(|r| r.drop_index == 1 && r.ue_index >= 0) {
        let cell = run_cell(&replay_cfg, target.experiment, target.m, target.xpd_db, target.drop_index as usize).unwrap();
        let again = cell
            .iter()
            .find(|r| r.setup == target.setup && r.precoder == target.precoder && r.ue_index == target.ue_index)
            .unwrap();
        assert_eq!(again.record(), target.record());
    }
}

#[test]
fn duplicate_xpd_entries_agree() {
    let rows = run_xpd_sweep(&small(), &[16], &[0.0, 0.0]).unwrap();
    let avgs: Vec<&ResultRow> = rows.iter().filter(|r| r.drop_index == -1).collect();
    assert_eq!(avgs.len(), 4);
    for p in [Scheme::Mr, Scheme::Zf] {
        let v: Vec<f64> = avgs.iter().filter(|r| r.precoder == p).map(|r| r.se).collect();
        assert_eq!(v[0], v[1]);
    }
}

#[test]
fn overwhelming_noise_drives_se_to_zero() {
    let cfg = SystemConfig { m: 8, k: 1, drops: 2, noise_dbm: 60.0, ..small() };
    let rows = run_m_sweep(&cfg, &[8]).unwrap();
    assert!(rows.iter().all(|r| !r.is_failed() && r.se >= 0.0 && r.se < 1e-6), "{rows:?}");
}

#[test]
fn cdf_rows_cover_every_ue_and_combination() {
    let cfg = SystemConfig { drops: 2, ..small() };
    let rows = run_cdf(&cfg).unwrap();
    assert_eq!(rows.len(), 2 * 4 * cfg.k);
    assert!(rows.iter().all(|r| r.experiment == Experiment::Cdf && r.ue_index >= 0 && r.se >= 0.0));
}

fn percentile(mut v: Vec<f64>, p: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[((v.len() - 1) as f64 * p).round() as usize]
}

#[test]
fn dual_polarization_lifts_the_upper_tail() {
    let cfg = SystemConfig { drops: 20, mc_trials: 300, seed: 77, ..SystemConfig::default() };
    let rows = run_cdf(&cfg).unwrap();
    for p in [Scheme::Mr, Scheme::Zf] {
        let pick = |s: Setup| rows.iter().filter(|r| r.setup == s && r.precoder == p).map(|r| r.se).collect::<Vec<_>>();
        let (dual, uni) = (pick(Setup::Dual), pick(Setup::Uni));
        assert_eq!(dual.len(), 200);
        // empirical CDF of the sorted samples is nondecreasing and ends at 1
        let mut sorted = dual.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        let (d90, u90) = (percentile(dual, 0.9), percentile(uni, 0.9));
        assert!(d90 > u90, "{}: dual {d90} uni {u90}", p.label());
    }
}

#[test]
fn mr_and_zf_lose_similar_fractions_to_leakage() {
    let cfg = SystemConfig { k: 10, drops: 20, mc_trials: 300, seed: 31, ..SystemConfig::default() };
    let rows = run_xpd_sweep(&cfg, &[40], &[f64::INFINITY, 7.0]).unwrap();
    let avg = |p: Scheme, x: f64| {
        rows.iter().find(|r| r.drop_index == -1 && r.precoder == p && r.xpd_db == x).unwrap().se
    };
    let loss = |p: Scheme| 100.0 * (avg(p, f64::INFINITY) - avg(p, 7.0)) / avg(p, f64::INFINITY);
    let (mr, zf) = (loss(Scheme::Mr), loss(Scheme::Zf));
    assert!(mr > 0.0 && zf > 0.0, "MR {mr}% ZF {zf}%");
    assert!((mr - zf).abs() <= 5.0, "MR {mr}% ZF {zf}%");
}
