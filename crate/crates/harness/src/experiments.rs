//! The experiment suite. Every experiment pools `setups` independent network
//! realizations; all randomness is derived from the configured seed, so a
//! table depends on the configuration alone.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use cfmimo_core::channel::{self, ChannelStatistics};
use cfmimo_core::detectors::{CentralDetector, LocalDetector};
use cfmimo_core::lsfd::Weighting;
use cfmimo_core::quantization::Resolution;
use cfmimo_core::rng::stream_id;
use cfmimo_core::se::{self, Estimate, Evaluation};
use cfmimo_core::Deployment;
use rayon::prelude::*;

use crate::baselines::{self, Strategy};
use crate::config::SimConfig;
use crate::output::{empirical_cdf, Cell, ResultTable, ARTIFACT_VERSION};

/// Experiment names and one-line descriptions.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("sum-se-vs-N", "sum SE against antennas per AP for both schemes"),
    ("sum-se-vs-bits", "sum SE against ADC resolution, then against DAC resolution"),
    ("cdf-detectors-distributed", "per-UE SE CDFs of local combiners and weightings"),
    ("cdf-detectors-centralized", "per-UE SE CDFs of centralized combiners"),
    ("cdf-algorithm", "per-UE SE CDFs of the scheduler against random pilots and equal power"),
    ("cdf-vs-nu", "per-UE SE CDFs against the power control exponent"),
    ("validate-closed-forms", "closed-form SE against Monte Carlo, per UE and summed"),
];

const META: [&str; 4] = ["config_hash", "seed", "trials", "version"];

/// Columns of the sweep experiments.
pub const SWEEP_COLUMNS: &[&str] = &["series", "evaluation", "sweep", "value", "ue", "se", "stderr"];
/// Columns of the CDF experiments.
pub const CDF_COLUMNS: &[&str] = &[
    "series",
    "evaluation",
    "sweep",
    "value",
    "setup",
    "ue",
    "se",
    "stderr",
    "probability",
];
/// Columns of `validate-closed-forms`.
pub const VALIDATION_COLUMNS: &[&str] = &["check", "setup", "ue", "closed", "monte_carlo", "stderr", "rel_gap"];

fn table(columns: &[&str]) -> ResultTable {
    let all: Vec<&str> = columns.iter().chain(META.iter()).copied().collect();
    ResultTable::new(&all)
}

struct Meta {
    hash: String,
    seed: u64,
    trials: usize,
}

impl Meta {
    fn of(cfg: &SimConfig) -> Self {
        Meta {
            hash: cfg.hash(),
            seed: cfg.seed,
            trials: cfg.trials,
        }
    }

    fn finish(&self, mut row: Vec<Cell>) -> Vec<Cell> {
        row.extend([
            Cell::from(self.hash.as_str()),
            Cell::from(self.seed),
            Cell::from(self.trials),
            Cell::from(ARTIFACT_VERSION),
        ]);
        row
    }
}

/// How one curve is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// MRC with the closed-form distributed SE.
    DistributedClosed(Weighting),
    DistributedMc(LocalDetector, Weighting),
    /// MRC with the closed-form centralized approximation.
    CentralizedApprox,
    CentralizedMc(CentralDetector),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::DistributedClosed(w) => format!("distributed/mrc/{}", w.name()),
            Method::DistributedMc(d, w) => format!("distributed/{}/{}", d.name(), w.name()),
            Method::CentralizedApprox => "centralized/mrc".into(),
            Method::CentralizedMc(d) => format!("centralized/{}", d.name()),
        }
    }

    pub fn evaluation(&self) -> Evaluation {
        match self {
            Method::DistributedClosed(_) => Evaluation::ClosedForm,
            Method::CentralizedApprox => Evaluation::Approximate,
            _ => Evaluation::MonteCarlo,
        }
    }

    /// The distributed method for a configured detector: MRC goes through
    /// the closed form.
    pub fn distributed(detector: LocalDetector, weighting: Weighting) -> Self {
        match detector {
            LocalDetector::Mrc => Method::DistributedClosed(weighting),
            d => Method::DistributedMc(d, weighting),
        }
    }
}

fn evaluation_name(e: Evaluation) -> &'static str {
    match e {
        Evaluation::ClosedForm => "closed-form",
        Evaluation::Approximate => "approximate",
        Evaluation::MonteCarlo => "monte-carlo",
    }
}

/// Per-UE SE of one method on one deployment.
#[derive(Clone, Debug)]
pub struct Curve {
    pub label: String,
    pub evaluation: Evaluation,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

fn from_estimates(label: String, est: &[Estimate]) -> Curve {
    Curve {
        label,
        evaluation: Evaluation::MonteCarlo,
        values: est.iter().map(|e| e.value).collect(),
        stderr: Some(est.iter().map(|e| e.stderr).collect()),
    }
}

/// Evaluates `methods` on `dep`; distributed Monte Carlo runs share one
/// set of moments per detector. `seed` keys every Monte Carlo stream.
pub fn evaluate(dep: &Deployment, methods: &[Method], trials: usize, seed: u64) -> Result<Vec<Curve>> {
    let mut moments = BTreeMap::new();
    let mut out = Vec::with_capacity(methods.len());
    for m in methods {
        let curve = match *m {
            Method::DistributedClosed(w) => Curve {
                label: m.label(),
                evaluation: m.evaluation(),
                values: se::se_distributed_closed_all(dep, w)?,
                stderr: None,
            },
            Method::CentralizedApprox => Curve {
                label: m.label(),
                evaluation: m.evaluation(),
                values: (0..dep.num_ues())
                    .map(|k| se::se_centralized_closed(dep, k))
                    .collect::<cfmimo_core::Result<_>>()?,
                stderr: None,
            },
            Method::DistributedMc(d, w) => {
                if !moments.contains_key(d.name()) {
                    let s = stream_id(seed, &format!("distributed/{}", d.name()), 0);
                    moments.insert(d.name(), se::distributed_moments(dep, d, trials, s)?);
                }
                from_estimates(m.label(), &moments[d.name()].se_all(dep, w)?)
            }
            Method::CentralizedMc(d) => {
                let s = stream_id(seed, &format!("centralized/{}", d.name()), 0);
                from_estimates(m.label(), &se::se_centralized_mc_exact(dep, d, trials, s)?)
            }
        };
        out.push(curve);
    }
    Ok(out)
}

/// Seed of network realization `setup`.
pub fn setup_seed(cfg: &SimConfig, setup: usize) -> u64 {
    stream_id(cfg.seed, "setup", setup as u64)
}

/// Channel statistics of realization `setup`. Placement and shadowing depend
/// on the seed only, so changing `antennas` keeps the geometry.
pub fn channel_statistics(cfg: &SimConfig, setup: usize) -> Result<ChannelStatistics> {
    let seed = setup_seed(cfg, setup);
    let scenario = channel::generate_scenario(&cfg.scenario_params(), seed)?;
    Ok(ChannelStatistics::generate(scenario, &cfg.fading_params(), seed)?)
}

/// Schedules `stats` with `strategy` and builds the deployment.
pub fn deployment(cfg: &SimConfig, stats: ChannelStatistics, strategy: Strategy, setup: usize) -> Result<Deployment> {
    let q = cfg.quantizer()?;
    let seed = stream_id(cfg.seed, "strategy", setup as u64);
    let schedule = baselines::schedule(&stats, &cfg.scheduler(), q.rho_da, strategy, seed)?;
    Ok(Deployment::from_schedule(stats, schedule, q, cfg.sigma2(), cfg.tau_c)?.with_noise_model(cfg.pilot_noise))
}

fn mc_seed(cfg: &SimConfig, setup: usize) -> u64 {
    stream_id(cfg.seed, "monte-carlo", setup as u64)
}

/// Runs `job(point, setup)` over every sweep point and setup in parallel;
/// results come back indexed `[point][setup]`.
fn grid<T, F>(points: usize, setups: usize, job: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, usize) -> Result<T> + Sync,
{
    let flat: Vec<T> = (0..points * setups)
        .into_par_iter()
        .map(|j| job(j / setups, j % setups))
        .collect::<Result<_>>()?;
    let mut it = flat.into_iter();
    Ok((0..points).map(|_| it.by_ref().take(setups).collect()).collect())
}

/// Mean over setups of the summed SE, and the matching standard error.
fn aggregate(per_setup: &[&Curve]) -> (f64, Option<f64>) {
    let s = per_setup.len() as f64;
    let mean = per_setup.iter().map(|c| c.values.iter().sum::<f64>()).sum::<f64>() / s;
    let stderr = per_setup
        .iter()
        .map(|c| c.stderr.as_ref().map(|e| e.iter().map(|x| x * x).sum::<f64>()))
        .sum::<Option<f64>>()
        .map(|v| v.sqrt() / s);
    (mean, stderr)
}

fn push_sweep(t: &mut ResultTable, meta: &Meta, sweep: &str, value: Cell, curves: &[Vec<Curve>]) {
    for (m, first) in curves[0].iter().enumerate() {
        let per_setup: Vec<&Curve> = curves.iter().map(|c| &c[m]).collect();
        let (se, stderr) = aggregate(&per_setup);
        t.push(meta.finish(vec![
            first.label.as_str().into(),
            evaluation_name(first.evaluation).into(),
            sweep.into(),
            value.clone(),
            "aggregate".into(),
            se.into(),
            stderr.filter(|v| v.is_finite()).into(),
        ]));
    }
}

/// Adds one CDF per curve label, pooling every setup.
fn push_cdfs(t: &mut ResultTable, meta: &Meta, sweep: &str, value: Cell, prefix: &str, curves: &[Vec<Curve>]) {
    for (m, first) in curves[0].iter().enumerate() {
        let mut samples = Vec::new();
        for (setup, c) in curves.iter().enumerate() {
            for (ue, &v) in c[m].values.iter().enumerate() {
                let err = c[m].stderr.as_ref().map(|e| e[ue]).filter(|e| e.is_finite());
                samples.push((setup, ue, v, err));
            }
        }
        let values: Vec<f64> = samples.iter().map(|s| s.2).collect();
        let series = format!("{prefix}{}", first.label);
        for (i, se, p) in empirical_cdf(&values) {
            let (setup, ue, _, err) = samples[i];
            t.push(meta.finish(vec![
                series.as_str().into(),
                evaluation_name(first.evaluation).into(),
                sweep.into(),
                value.clone(),
                setup.into(),
                ue.into(),
                se.into(),
                err.into(),
                p.into(),
            ]));
        }
    }
}

fn sweep_methods(cfg: &SimConfig) -> Vec<Method> {
    let mut m = Vec::new();
    if cfg.scheme.distributed() {
        m.push(Method::DistributedClosed(Weighting::Lsfd));
    }
    if cfg.scheme.centralized() {
        m.push(Method::CentralizedApprox);
        m.push(Method::CentralizedMc(CentralDetector::Mrc));
    }
    m
}

fn strategy_methods(cfg: &SimConfig) -> Vec<Method> {
    let mut m = Vec::new();
    if cfg.scheme.distributed() {
        m.push(Method::distributed(cfg.local_detector, cfg.weighting));
    }
    if cfg.scheme.centralized() {
        m.push(match cfg.central_detector {
            CentralDetector::Mrc => Method::CentralizedApprox,
            d => Method::CentralizedMc(d),
        });
    }
    m
}

fn sum_se_vs_n(cfg: &SimConfig) -> Result<ResultTable> {
    let meta = Meta::of(cfg);
    let methods = sweep_methods(cfg);
    let points = &cfg.sweep.antennas;
    let curves = grid(points.len(), cfg.setups, |p, s| {
        let c = SimConfig { antennas: points[p], ..cfg.clone() };
        let dep = deployment(&c, channel_statistics(&c, s)?, Strategy::Algorithm1, s)?;
        evaluate(&dep, &methods, cfg.trials, mc_seed(cfg, s))
    })?;
    let mut t = table(SWEEP_COLUMNS);
    for (p, c) in curves.iter().enumerate() {
        push_sweep(&mut t, &meta, "antennas", points[p].into(), c);
    }
    Ok(t)
}

fn sum_se_vs_bits(cfg: &SimConfig) -> Result<ResultTable> {
    let meta = Meta::of(cfg);
    let methods = sweep_methods(cfg);
    let bits = &cfg.sweep.bits;
    let mut t = table(SWEEP_COLUMNS);
    for sweep in ["b_ad", "b_da"] {
        let curves = grid(bits.len(), cfg.setups, |p, s| {
            let b = Resolution::Bits(bits[p]);
            let c = match sweep {
                "b_ad" => SimConfig { b_ad: b, ..cfg.clone() },
                _ => SimConfig { b_da: b, ..cfg.clone() },
            };
            let dep = deployment(&c, channel_statistics(&c, s)?, Strategy::Algorithm1, s)?;
            evaluate(&dep, &methods, cfg.trials, mc_seed(cfg, s))
        })?;
        for (p, c) in curves.iter().enumerate() {
            push_sweep(&mut t, &meta, sweep, (bits[p] as usize).into(), c);
        }
    }
    Ok(t)
}

fn cdf_detectors(cfg: &SimConfig, methods: &[Method]) -> Result<ResultTable> {
    let meta = Meta::of(cfg);
    let curves = grid(1, cfg.setups, |_, s| {
        let dep = deployment(cfg, channel_statistics(cfg, s)?, Strategy::Algorithm1, s)?;
        evaluate(&dep, methods, cfg.trials, mc_seed(cfg, s))
    })?;
    let mut t = table(CDF_COLUMNS);
    push_cdfs(&mut t, &meta, "antennas", cfg.antennas.into(), "", &curves[0]);
    Ok(t)
}

fn cdf_detectors_distributed(cfg: &SimConfig) -> Result<ResultTable> {
    use LocalDetector::*;
    use Weighting::*;
    let methods = [
        Method::DistributedClosed(Lsfd),
        Method::DistributedClosed(PLsfd),
        Method::DistributedMc(LMmse, Lsfd),
        Method::DistributedMc(LpMmse, Lsfd),
        Method::DistributedMc(LpMmse, PLsfd),
        Method::DistributedMc(LpMmseFull, PLsfd),
        Method::DistributedMc(LpMmse, L2Lsfd),
    ];
    cdf_detectors(cfg, &methods)
}

fn cdf_detectors_centralized(cfg: &SimConfig) -> Result<ResultTable> {
    use CentralDetector::*;
    let methods = [
        Method::CentralizedApprox,
        Method::CentralizedMc(Mrc),
        Method::CentralizedMc(Mmse),
        Method::CentralizedMc(PMmse),
        Method::CentralizedMc(PMmseOriginal),
    ];
    cdf_detectors(cfg, &methods)
}

fn cdf_algorithm(cfg: &SimConfig) -> Result<ResultTable> {
    let meta = Meta::of(cfg);
    let methods = strategy_methods(cfg);
    let curves = grid(Strategy::ALL.len(), cfg.setups, |p, s| {
        let dep = deployment(cfg, channel_statistics(cfg, s)?, Strategy::ALL[p], s)?;
        evaluate(&dep, &methods, cfg.trials, mc_seed(cfg, s))
    })?;
    let mut t = table(CDF_COLUMNS);
    for (p, c) in curves.iter().enumerate() {
        let prefix = format!("{} ", Strategy::ALL[p].name());
        push_cdfs(&mut t, &meta, "nu", cfg.nu.into(), &prefix, c);
    }
    Ok(t)
}

fn cdf_vs_nu(cfg: &SimConfig) -> Result<ResultTable> {
    let meta = Meta::of(cfg);
    let methods = strategy_methods(cfg);
    let nus = &cfg.sweep.nu;
    let curves = grid(nus.len(), cfg.setups, |p, s| {
        let c = SimConfig { nu: nus[p], ..cfg.clone() };
        let dep = deployment(&c, channel_statistics(&c, s)?, Strategy::Algorithm1, s)?;
        evaluate(&dep, &methods, cfg.trials, mc_seed(cfg, s))
    })?;
    let mut t = table(CDF_COLUMNS);
    for (p, c) in curves.iter().enumerate() {
        push_cdfs(&mut t, &meta, "nu", nus[p].into(), "", c);
    }
    Ok(t)
}

fn rel_gap(closed: f64, mc: f64) -> f64 {
    (closed - mc).abs() / mc.abs().max(f64::MIN_POSITIVE)
}

fn validate_closed_forms(cfg: &SimConfig) -> Result<ResultTable> {
    let meta = Meta::of(cfg);
    let mut pairs = Vec::new();
    if cfg.scheme.distributed() {
        pairs.push((
            Method::DistributedClosed(Weighting::Lsfd),
            Method::DistributedMc(LocalDetector::Mrc, Weighting::Lsfd),
        ));
    }
    if cfg.scheme.centralized() {
        pairs.push((Method::CentralizedApprox, Method::CentralizedMc(CentralDetector::Mrc)));
    }
    let methods: Vec<Method> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let curves = grid(1, cfg.setups, |_, s| {
        let dep = deployment(cfg, channel_statistics(cfg, s)?, Strategy::Algorithm1, s)?;
        evaluate(&dep, &methods, cfg.trials, mc_seed(cfg, s))
    })?;
    let mut t = table(VALIDATION_COLUMNS);
    for (setup, c) in curves[0].iter().enumerate() {
        for (i, &(closed_method, _)) in pairs.iter().enumerate() {
            let (closed, mc) = (&c[2 * i], &c[2 * i + 1]);
            let err = mc.stderr.as_ref().expect("Monte Carlo curve has standard errors");
            let check = closed_method.label();
            for ue in 0..closed.values.len() {
                t.push(meta.finish(vec![
                    check.as_str().into(),
                    setup.into(),
                    ue.to_string().into(),
                    closed.values[ue].into(),
                    mc.values[ue].into(),
                    Some(err[ue]).filter(|e| e.is_finite()).into(),
                    rel_gap(closed.values[ue], mc.values[ue]).into(),
                ]));
            }
            let (cs, ms): (f64, f64) = (closed.values.iter().sum(), mc.values.iter().sum());
            let es = err.iter().map(|e| e * e).sum::<f64>().sqrt();
            t.push(meta.finish(vec![
                check.as_str().into(),
                setup.into(),
                "sum".into(),
                cs.into(),
                ms.into(),
                Some(es).filter(|e| e.is_finite()).into(),
                rel_gap(cs, ms).into(),
            ]));
        }
    }
    Ok(t)
}

/// Runs a named experiment on a validated configuration.
pub fn run_experiment(name: &str, cfg: &SimConfig) -> Result<ResultTable> {
    cfg.validate()?;
    log::info!("running {name} (config {}, seed {}, trials {})", cfg.hash(), cfg.seed, cfg.trials);
    match name {
        "sum-se-vs-N" => sum_se_vs_n(cfg),
        "sum-se-vs-bits" => sum_se_vs_bits(cfg),
        "cdf-detectors-distributed" => cdf_detectors_distributed(cfg),
        "cdf-detectors-centralized" => cdf_detectors_centralized(cfg),
        "cdf-algorithm" => cdf_algorithm(cfg),
        "cdf-vs-nu" => cdf_vs_nu(cfg),
        "validate-closed-forms" => validate_closed_forms(cfg),
        other => {
            let known: Vec<&str> = EXPERIMENTS.iter().map(|e| e.0).collect();
            bail!("unknown experiment {other:?}; known: {}", known.join(", "))
        }
    }
}
