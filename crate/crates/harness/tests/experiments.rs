use std::collections::BTreeMap;
use std::process::Command;

use cfmimo_core::detectors::LocalDetector;
use cfmimo_core::quantization::Resolution;
use cfmimo_harness::baselines::{self, Strategy};
use cfmimo_harness::config::SchemeSelection;
use cfmimo_harness::experiments::{self, CDF_COLUMNS, SWEEP_COLUMNS};
use cfmimo_harness::{run_experiment, ResultTable, SimConfig, EXPERIMENTS};

fn tiny() -> SimConfig {
    SimConfig {
        num_aps: 6,
        num_ues: 5,
        antennas: 2,
        tau: 3,
        trials: 100,
        setups: 2,
        ..SimConfig::default()
    }
}

fn column_f64(t: &ResultTable, rows: &[usize], name: &str) -> Vec<f64> {
    rows.iter().map(|&r| t.get(r, name).unwrap().as_f64().unwrap()).collect()
}

fn series(t: &ResultTable) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in &t.rows {
        let s = r[0].as_str().unwrap().to_string();
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

#[test]
fn unknown_experiment_is_an_error() {
    let err = run_experiment("fig-9", &tiny()).unwrap_err();
    assert!(format!("{err}").contains("unknown experiment"));
}

#[test]
fn every_experiment_runs_with_metadata() {
    let cfg = tiny();
    for (name, _) in EXPERIMENTS {
        let t = run_experiment(name, &cfg).unwrap();
        assert!(!t.rows.is_empty(), "{name}");
        for r in 0..t.rows.len() {
            assert_eq!(t.rows[r].len(), t.columns.len());
            assert_eq!(t.get(r, "config_hash").unwrap().as_str(), Some(cfg.hash().as_str()));
            assert_eq!(t.get(r, "seed").unwrap().as_f64(), Some(0.0));
            assert_eq!(t.get(r, "trials").unwrap().as_f64(), Some(100.0));
        }
    }
}

#[test]
fn sweep_tables_cover_every_point() {
    let cfg = SimConfig {
        sweep: cfmimo_harness::config::SweepConfig::default(),
        ..tiny()
    };
    let t = run_experiment("sum-se-vs-N", &cfg).unwrap();
    assert_eq!(&t.columns[..SWEEP_COLUMNS.len()], SWEEP_COLUMNS);
    assert_eq!(t.rows.len(), 3 * cfg.sweep.antennas.len());
    let t = run_experiment("sum-se-vs-bits", &cfg).unwrap();
    assert_eq!(t.rows.len(), 3 * 2 * cfg.sweep.bits.len());
    assert_eq!(t.select("sweep", "b_ad").count(), 15);
}

#[test]
fn scheme_selection_limits_series() {
    let cfg = SimConfig {
        scheme: SchemeSelection::Distributed,
        ..tiny()
    };
    let t = run_experiment("sum-se-vs-N", &cfg).unwrap();
    assert_eq!(series(&t), vec!["distributed/mrc/lsfd"]);
}

#[test]
fn ideal_distributed_sum_se_grows_with_antennas() {
    let cfg = SimConfig {
        scheme: SchemeSelection::Distributed,
        b_da: Resolution::Ideal,
        b_ad: Resolution::Ideal,
        ..tiny()
    };
    let t = run_experiment("sum-se-vs-N", &cfg).unwrap();
    let rows: Vec<usize> = (0..t.rows.len()).collect();
    let se = column_f64(&t, &rows, "se");
    assert!(se.windows(2).all(|w| w[1] > w[0]), "{se:?}");
}

#[test]
fn cdfs_are_proper_per_series() {
    let cfg = tiny();
    for name in ["cdf-detectors-distributed", "cdf-detectors-centralized", "cdf-algorithm", "cdf-vs-nu"] {
        let t = run_experiment(name, &cfg).unwrap();
        assert_eq!(&t.columns[..CDF_COLUMNS.len()], CDF_COLUMNS);
        let mut groups: BTreeMap<(String, String, String), Vec<usize>> = BTreeMap::new();
        for r in 0..t.rows.len() {
            let key = (
                t.rows[r][0].as_str().unwrap().to_string(),
                t.rows[r][1].as_str().unwrap().to_string(),
                format!("{:?}", t.get(r, "value").unwrap()),
            );
            groups.entry(key).or_default().push(r);
        }
        for (key, rows) in groups {
            assert_eq!(rows.len(), cfg.num_ues * cfg.setups, "{name} {key:?}");
            let se = column_f64(&t, &rows, "se");
            let p = column_f64(&t, &rows, "probability");
            assert!(se.windows(2).all(|w| w[0] <= w[1]), "{name} {key:?}");
            assert!(p.windows(2).all(|w| w[0] < w[1]), "{name} {key:?}");
            assert_eq!(*p.last().unwrap(), 1.0);
        }
    }
}

#[test]
fn algorithm_cdf_lists_every_strategy() {
    let t = run_experiment("cdf-algorithm", &tiny()).unwrap();
    let names = series(&t);
    for s in Strategy::ALL {
        assert!(names.iter().any(|n| n.starts_with(s.name())), "{names:?}");
    }
    assert!(names.contains(&"algorithm1 distributed/lp-mmse/p-lsfd".to_string()));
    assert!(names.contains(&"algorithm1 centralized/p-mmse".to_string()));
}

#[test]
fn mrc_detector_uses_the_closed_form() {
    let cfg = SimConfig {
        local_detector: LocalDetector::Mrc,
        scheme: SchemeSelection::Distributed,
        ..tiny()
    };
    let t = run_experiment("cdf-algorithm", &cfg).unwrap();
    assert!(t.select("evaluation", "closed-form").count() == t.rows.len());
}

#[test]
fn validation_grid_has_sum_rows() {
    let t = run_experiment("validate-closed-forms", &SimConfig { trials: 2000, ..tiny() }).unwrap();
    let sums: Vec<usize> = t.select("ue", "sum").collect();
    assert_eq!(sums.len(), 2 * 2);
    for r in sums {
        assert!(t.get(r, "rel_gap").unwrap().as_f64().unwrap() < 0.25);
    }
}

#[test]
fn baselines_respect_their_definitions() {
    let cfg = SimConfig { num_aps: 10, num_ues: 12, ..tiny() };
    let stats = experiments::channel_statistics(&cfg, 0).unwrap();
    let q = cfg.quantizer().unwrap();
    let sched = cfg.scheduler();
    let alg = baselines::schedule(&stats, &sched, q.rho_da, Strategy::Algorithm1, 1).unwrap();
    let equal = baselines::schedule(&stats, &sched, q.rho_da, Strategy::EqualPower, 1).unwrap();
    assert_eq!(equal.clusters, alg.clusters);
    assert_eq!(equal.pilots, alg.pilots);
    assert!(equal.powers.effective.iter().all(|&p| p == cfg.p_max * (1.0 - q.rho_da)));

    let a = baselines::schedule(&stats, &sched, q.rho_da, Strategy::RandomPilots, 7).unwrap();
    let b = baselines::schedule(&stats, &sched, q.rho_da, Strategy::RandomPilots, 7).unwrap();
    assert_eq!(a.pilots, b.pilots);
    a.clusters.validate(Some(&a.pilots)).unwrap();
    let used: std::collections::BTreeSet<usize> = (0..12).map(|k| a.pilots.pilot(k)).collect();
    assert!(used.iter().all(|&t| t < cfg.tau));
    let other: Vec<Vec<usize>> = (8..16)
        .map(|s| {
            let p = baselines::schedule(&stats, &sched, q.rho_da, Strategy::RandomPilots, s).unwrap().pilots;
            (0..12).map(|k| p.pilot(k)).collect()
        })
        .collect();
    assert!(other.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn tables_do_not_depend_on_worker_count() {
    let cfg = tiny();
    for name in ["cdf-detectors-distributed", "cdf-detectors-centralized", "sum-se-vs-bits"] {
        let run = |n: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| run_experiment(name, &cfg).unwrap().to_json())
        };
        assert_eq!(run(1), run(3), "{name}");
    }
}

#[test]
fn cli_runs_lists_and_rejects() {
    let bin = env!("CARGO_BIN_EXE_cfmimo");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, "num_aps = 6\nnum_ues = 5\ntau = 3\n").unwrap();

    let list = Command::new(bin).arg("list").output().unwrap();
    assert!(list.status.success());
    let text = String::from_utf8(list.stdout).unwrap();
    for (name, _) in EXPERIMENTS {
        assert!(text.contains(name));
    }

    let out = dir.path().join("o.json");
    let status = Command::new(bin)
        .args(["run", "cdf-vs-nu", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "3", "--trials", "50", "--format", "json", "--out"])
        .arg(&out)
        .env("CFMIMO_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    let t = ResultTable::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.get(0, "seed").unwrap().as_f64(), Some(3.0));
    assert_eq!(t.get(0, "trials").unwrap().as_f64(), Some(50.0));

    let bad = Command::new(bin)
        .args(["run", "no-such", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown experiment"));

    std::fs::write(&cfg_path, "tau = 300\n").unwrap();
    let invalid = Command::new(bin)
        .args(["run", "cdf-vs-nu", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("y.csv"))
        .output()
        .unwrap();
    assert!(!invalid.status.success());
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("tau"));
}
