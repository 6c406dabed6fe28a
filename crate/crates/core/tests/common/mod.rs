#![allow(dead_code)]

pub mod ideal;

use cfmimo_core::channel::{self, ChannelStatistics, FadingMode, FadingParams, ScenarioParams};
use cfmimo_core::pilots::PilotPlan;
use cfmimo_core::quantization::{QuantizerConfig, Resolution};
use cfmimo_core::scheduler::{self, ClusterPlan, PowerPlan, SchedulerConfig};
use cfmimo_core::Deployment;

pub const SIGMA2: f64 = 2.511_886_431_509_582e-13; // -96 dBm in W
pub const TAU_C: usize = 200;
pub const P_MAX: f64 = 0.1;

pub fn quant(b_da: u32, b_ad: u32) -> QuantizerConfig {
    QuantizerConfig::new(Resolution::Bits(b_da), Resolution::Bits(b_ad)).unwrap()
}

pub fn stats(l: usize, k: usize, n: usize, area: f64, mode: FadingMode, seed: u64) -> ChannelStatistics {
    let params = ScenarioParams { num_aps: l, num_ues: k, antennas: n, area_side: area };
    let scenario = channel::generate_scenario(&params, seed).unwrap();
    let fading = FadingParams { mode, ..Default::default() };
    ChannelStatistics::generate(scenario, &fading, seed).unwrap()
}

/// Deployment whose clusters, pilots and powers come from the scheduler.
pub fn scheduled(stats: ChannelStatistics, tau: usize, q: QuantizerConfig) -> Deployment {
    let cfg = SchedulerConfig { tau, ..Default::default() };
    let schedule = scheduler::run_algorithm1(&stats, &cfg, q.rho_da).unwrap();
    Deployment::from_schedule(stats, schedule, q, SIGMA2, TAU_C).unwrap()
}

/// Every AP serves every UE; pilots are given explicitly; equal power.
pub fn fully_connected(stats: ChannelStatistics, tau: usize, assignment: Vec<usize>, q: QuantizerConfig) -> Deployment {
    let k = stats.num_ues();
    let pilots = PilotPlan::new(tau, assignment).unwrap();
    let clusters = ClusterPlan::full(&stats);
    let powers = PowerPlan::equal(k, P_MAX, q.rho_da);
    Deployment::new(stats, pilots, clusters, powers, q, SIGMA2, TAU_C).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
