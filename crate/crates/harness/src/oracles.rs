//! Quick self-checks behind `cfmimo validate`.

use anyhow::Result;
use cfmimo_core::channel::{self, ChannelStatistics, FadingMode, FadingParams, ScenarioParams};
use cfmimo_core::pilots::PilotPlan;
use cfmimo_core::quantization::{QuantizerConfig, Resolution};
use cfmimo_core::scheduler::{self, ClusterPlan, PowerPlan, SchedulerConfig};
use cfmimo_core::se::{self, run_batches};
use cfmimo_core::{Deployment, C64};

use crate::config::SimConfig;
use crate::experiments::run_experiment;

/// Sample mean of the pairwise expectation kernel with per-component
/// standard errors.
pub struct KernelEstimate {
    pub mean: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Monte Carlo estimate of `E[(h_hat_kl1^H h_il1)(h_il2^H h_hat_kl2)]`.
pub fn kernel_mc(dep: &Deployment, k: usize, i: usize, l1: usize, l2: usize, trials: usize, seed: u64) -> Result<KernelEstimate> {
    let parts = run_batches(seed, "kernel", trials, |rng, n| {
        let (mut sum, mut sq_re, mut sq_im) = (C64::new(0.0, 0.0), 0.0, 0.0);
        for _ in 0..n {
            let s = dep.sample(rng);
            let x = s.h_hat(k, l1).dotc(s.h(i, l1)) * s.h(i, l2).dotc(s.h_hat(k, l2));
            sum += x;
            sq_re += x.re * x.re;
            sq_im += x.im * x.im;
        }
        Ok((sum, sq_re, sq_im))
    })?;
    let (sum, sq_re, sq_im) = parts
        .into_iter()
        .fold((C64::new(0.0, 0.0), 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let n = trials as f64;
    let mean = sum / n;
    Ok(KernelEstimate {
        mean,
        stderr_re: ((sq_re / n - mean.re * mean.re).max(0.0) / n).sqrt(),
        stderr_im: ((sq_im / n - mean.im * mean.im).max(0.0) / n).sqrt(),
    })
}

/// Outcome of one named check.
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e:#}"),
        },
    }
}

fn small_deployment() -> Result<Deployment> {
    let params = ScenarioParams {
        num_aps: 2,
        num_ues: 4,
        antennas: 2,
        area_side: 300.0,
    };
    let scenario = channel::generate_scenario(&params, 4)?;
    let stats = ChannelStatistics::generate(scenario, &FadingParams::default(), 4)?;
    let q = QuantizerConfig::new(Resolution::Bits(1), Resolution::Bits(2))?;
    let pilots = PilotPlan::new(2, vec![0, 1, 0, 1])?;
    let clusters = ClusterPlan::full(&stats);
    let powers = PowerPlan::equal(4, 0.1, q.rho_da);
    let sigma2 = SimConfig::default().sigma2();
    Ok(Deployment::new(stats, pilots, clusters, powers, q, sigma2, 200)?)
}

fn kernel_cases() -> Result<(bool, String)> {
    let dep = small_deployment()?;
    let mut worst: f64 = 0.0;
    for (n, (k, i, l1, l2)) in [(0, 2, 0, 0), (0, 2, 0, 1), (0, 1, 1, 1), (0, 1, 0, 1)].into_iter().enumerate() {
        let closed = se::theorem1_kernel(&dep, k, i, l1, l2);
        let mc = kernel_mc(&dep, k, i, l1, l2, 100_000, n as u64)?;
        let z_re = (closed.re - mc.mean.re).abs() / mc.stderr_re.max(f64::MIN_POSITIVE);
        let z_im = if mc.stderr_im > 0.0 {
            (closed.im - mc.mean.im).abs() / mc.stderr_im
        } else {
            0.0
        };
        worst = worst.max(z_re).max(z_im);
    }
    Ok((worst <= 4.0, format!("largest deviation {worst:.2} standard errors (limit 4)")))
}

fn closed_forms() -> Result<(bool, String)> {
    let cfg = SimConfig {
        num_aps: 4,
        num_ues: 6,
        antennas: 2,
        tau: 3,
        trials: 20_000,
        ..SimConfig::default()
    };
    let t = run_experiment("validate-closed-forms", &cfg)?;
    let gap = t
        .select("check", "distributed/mrc/lsfd")
        .filter_map(|r| t.get(r, "rel_gap").and_then(|c| c.as_f64()))
        .fold(0.0, f64::max);
    Ok((gap < 0.02, format!("largest distributed closed-form/Monte Carlo gap {:.3}% (limit 2%)", 100.0 * gap)))
}

fn scheduler_invariants() -> Result<(bool, String)> {
    for seed in 0..20u64 {
        let params = ScenarioParams {
            num_aps: 16,
            num_ues: 24,
            antennas: 1,
            area_side: 1000.0,
        };
        let stats = ChannelStatistics::generate(
            channel::generate_scenario(&params, seed)?,
            &FadingParams {
                mode: FadingMode::Rayleigh,
                ..Default::default()
            },
            seed,
        )?;
        let cfg = SchedulerConfig { tau: 5, ..Default::default() };
        let s = scheduler::run_algorithm1(&stats, &cfg, 0.01)?;
        if let Err(e) = s.clusters.validate(Some(&s.pilots)) {
            return Ok((false, format!("scenario {seed}: {e}")));
        }
        let cap = cfg.p_max * 0.99;
        if s.powers.effective.iter().any(|&p| !(p > 0.0 && p <= cap * (1.0 + 1e-12))) {
            return Ok((false, format!("scenario {seed}: power outside (0, p_max]")));
        }
    }
    Ok((true, "20 scenarios".into()))
}

fn reproducibility() -> Result<(bool, String)> {
    let cfg = SimConfig {
        num_aps: 8,
        num_ues: 6,
        tau: 3,
        trials: 300,
        setups: 2,
        ..SimConfig::default()
    };
    let run = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(|| run_experiment("cdf-detectors-distributed", &cfg)?.to_csv())
    };
    let (a, b) = (run(1)?, run(4)?);
    Ok((a == b, format!("{} bytes, 1 vs 4 workers", a.len())))
}

fn cdf_shape() -> Result<(bool, String)> {
    let cfg = SimConfig {
        num_aps: 8,
        num_ues: 6,
        tau: 3,
        trials: 200,
        setups: 2,
        ..SimConfig::default()
    };
    let t = run_experiment("cdf-algorithm", &cfg)?;
    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in 0..t.rows.len() {
        let key = format!("{} ({})", t.rows[r][0].as_str().unwrap_or(""), t.rows[r][1].as_str().unwrap_or(""));
        let pair = (
            t.get(r, "se").and_then(|c| c.as_f64()).unwrap_or(f64::NAN),
            t.get(r, "probability").and_then(|c| c.as_f64()).unwrap_or(f64::NAN),
        );
        match groups.last_mut() {
            Some((k, v)) if *k == key => v.push(pair),
            _ => groups.push((key, vec![pair])),
        }
    }
    for (name, pairs) in &groups {
        let sorted = pairs.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1);
        if !sorted || pairs.last().map(|p| p.1) != Some(1.0) {
            return Ok((false, format!("series {name} is not a proper CDF")));
        }
    }
    Ok((true, format!("{} series", groups.len())))
}

/// Runs every check in order.
pub fn run_suite() -> Vec<Check> {
    vec![
        check("kernel-monte-carlo", kernel_cases()),
        check("closed-form-monte-carlo", closed_forms()),
        check("scheduler-invariants", scheduler_invariants()),
        check("cdf-shape", cdf_shape()),
        check("reproducibility", reproducibility()),
    ]
}
