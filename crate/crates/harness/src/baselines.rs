//! Pilot and power strategies compared against the joint scheduler.

use anyhow::{bail, Result};
use cfmimo_core::channel::ChannelStatistics;
use cfmimo_core::pilots::PilotPlan;
use cfmimo_core::rng;
use cfmimo_core::scheduler::{self, ClusterPlan, PowerPlan, Schedule, SchedulerConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Joint clustering, pilot assignment and fractional power control.
    Algorithm1,
    /// Uniformly random pilots; clusters and fractional powers as in the scheduler.
    RandomPilots,
    /// The scheduler's clusters and pilots with every UE at full power.
    EqualPower,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Algorithm1, Strategy::RandomPilots, Strategy::EqualPower];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Algorithm1 => "algorithm1",
            Strategy::RandomPilots => "random-pilots",
            Strategy::EqualPower => "equal-power",
        }
    }
}

/// Builds the schedule of `strategy`; `seed` drives the random pilots only.
pub fn schedule(
    stats: &ChannelStatistics,
    cfg: &SchedulerConfig,
    rho_da: f64,
    strategy: Strategy,
    seed: u64,
) -> Result<Schedule> {
    match strategy {
        Strategy::Algorithm1 => Ok(scheduler::run_algorithm1(stats, cfg, rho_da)?),
        Strategy::EqualPower => {
            let mut s = scheduler::run_algorithm1(stats, cfg, rho_da)?;
            s.powers = PowerPlan::equal(stats.num_ues(), cfg.p_max, rho_da);
            Ok(s)
        }
        Strategy::RandomPilots => random_pilots(stats, cfg, rho_da, seed),
    }
}

fn random_pilots(stats: &ChannelStatistics, cfg: &SchedulerConfig, rho_da: f64, seed: u64) -> Result<Schedule> {
    if cfg.tau == 0 {
        bail!("invalid `tau`: must be at least 1");
    }
    let (k_count, l_count) = (stats.num_ues(), stats.num_aps());
    let mut rng = rng::stream(seed, "random-pilots", 0);
    let assignment: Vec<usize> = (0..k_count).map(|_| rng.random_range(0..cfg.tau)).collect();
    let mut primary = Vec::with_capacity(k_count);
    let mut candidate_sizes = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let candidates: Vec<usize> = (0..l_count)
            .filter(|&l| cfg.d_bar.is_none_or(|r| stats.scenario.distance(k, l) <= r))
            .collect();
        if candidates.is_empty() {
            bail!("invalid `d_bar`: no candidate AP within range of UE {k}");
        }
        candidate_sizes.push(candidates.len());
        primary.push(scheduler::strongest_ap(stats, k, candidates));
    }
    let pdd = vec![cfg.p_max * (1.0 - rho_da); k_count];
    let serving = scheduler::assign_secondary(stats, &primary, &assignment, &pdd, cfg.tau, cfg.eta_db);
    let clusters = ClusterPlan::new(l_count, primary, serving)?;
    let powers = PowerPlan::fractional(stats, &clusters, cfg.p_max, rho_da, cfg.nu)?;
    Ok(Schedule {
        clusters,
        pilots: PilotPlan::new(cfg.tau, assignment)?,
        powers,
        candidate_sizes,
    })
}
