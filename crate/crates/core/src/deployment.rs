use rand::Rng;

use crate::channel::ChannelStatistics;
use crate::linalg::{self, real};
use crate::pilots::{self, EstimationContext, JointSample, PilotNoiseModel, PilotPlan};
use crate::quantization::QuantizerConfig;
use crate::scheduler::{ClusterPlan, PowerPlan, Schedule};
use crate::{CMat, Error, Result};

/// One fully configured network together with its estimation context.
#[derive(Clone, Debug)]
pub struct Deployment {
    pub stats: ChannelStatistics,
    pub pilots: PilotPlan,
    pub clusters: ClusterPlan,
    pub powers: PowerPlan,
    pub quant: QuantizerConfig,
    pub sigma2: f64,
    pub tau_c: usize,
    pub noise_model: PilotNoiseModel,
    pub ctx: EstimationContext,
    /// `(1 - rho_ad)^2 sum_i pdd_i (R_il - C_hat_il) + C_n,l` per AP: the
    /// estimation-error plus noise covariance seen by a centralized receiver.
    pub residual: Vec<CMat>,
}

impl Deployment {
    pub fn new(
        stats: ChannelStatistics,
        pilots: PilotPlan,
        clusters: ClusterPlan,
        powers: PowerPlan,
        quant: QuantizerConfig,
        sigma2: f64,
        tau_c: usize,
    ) -> Result<Self> {
        let k_count = stats.num_ues();
        if pilots.num_ues() != k_count || clusters.num_ues() != k_count || powers.num_ues() != k_count {
            return Err(Error::invalid("deployment", "plans disagree on the number of UEs"));
        }
        if clusters.num_aps != stats.num_aps() {
            return Err(Error::invalid("deployment", "cluster plan disagrees on the number of APs"));
        }
        if pilots.tau >= tau_c {
            return Err(Error::invalid("tau", format!("pilot length {} must be below tau_c = {tau_c}", pilots.tau)));
        }
        let ctx = EstimationContext::build(&stats, &pilots, &powers.effective, &quant, sigma2)?;
        let residual = (0..stats.num_aps())
            .map(|l| {
                let mut z = ctx.c_n[l].clone();
                for i in 0..k_count {
                    let p = powers.effective[i];
                    if p != 0.0 {
                        z += (&stats.link(i, l).r - ctx.c_hat(i, l)) * real(quant.adc_gain_sq() * p);
                    }
                }
                linalg::hermitize(&mut z);
                z
            })
            .collect();
        Ok(Deployment {
            stats,
            pilots,
            clusters,
            powers,
            quant,
            sigma2,
            tau_c,
            noise_model: PilotNoiseModel::default(),
            ctx,
            residual,
        })
    }

    /// Builds from the output of the scheduler.
    pub fn from_schedule(
        stats: ChannelStatistics,
        schedule: Schedule,
        quant: QuantizerConfig,
        sigma2: f64,
        tau_c: usize,
    ) -> Result<Self> {
        Deployment::new(stats, schedule.pilots, schedule.clusters, schedule.powers, quant, sigma2, tau_c)
    }

    pub fn with_noise_model(mut self, model: PilotNoiseModel) -> Self {
        self.noise_model = model;
        self
    }

    pub fn num_ues(&self) -> usize {
        self.stats.num_ues()
    }

    pub fn num_aps(&self) -> usize {
        self.stats.num_aps()
    }

    pub fn antennas(&self) -> usize {
        self.stats.antennas()
    }

    pub fn tau(&self) -> usize {
        self.pilots.tau
    }

    /// DAC-scaled power of UE `k`.
    pub fn pdd(&self, k: usize) -> f64 {
        self.powers.effective[k]
    }

    /// Fraction of the coherence block left for data.
    pub fn prelog(&self) -> f64 {
        1.0 - self.pilots.tau as f64 / self.tau_c as f64
    }

    /// One joint draw of channels and estimates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JointSample {
        pilots::sample_joint(
            &self.stats,
            &self.pilots,
            &self.powers.effective,
            &self.quant,
            self.sigma2,
            &self.ctx,
            self.noise_model,
            rng,
        )
    }
}
