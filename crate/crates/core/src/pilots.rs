//! Pilot book, pilot-domain statistics and MMSE channel estimation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelStatistics;
use crate::linalg::{self, real};
use crate::quantization::{self, QuantizerConfig};
use crate::rng::{self, complex_normal_vec};
use crate::{CMat, CVec, Error, Result, C64};

/// `tau x tau` DFT pilot book; column `t` is pilot `t`.
pub fn dft_pilot_matrix(tau: usize) -> Result<CMat> {
    if tau == 0 {
        return Err(Error::invalid("tau", "pilot length must be at least 1"));
    }
    let tf = tau as f64;
    Ok(CMat::from_fn(tau, tau, |t2, t1| {
        C64::from_polar(1.0, -2.0 * PI * (t1 * t2) as f64 / tf)
    }))
}

/// Pilot length, pilot book and per-UE pilot indices (zero-based).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PilotPlan {
    pub tau: usize,
    #[serde(skip)]
    pub phi: CMat,
    pub assignment: Vec<usize>,
    #[serde(skip)]
    groups: Vec<Vec<usize>>,
}

impl PilotPlan {
    pub fn new(tau: usize, assignment: Vec<usize>) -> Result<Self> {
        let phi = dft_pilot_matrix(tau)?;
        if let Some(bad) = assignment.iter().find(|&&t| t >= tau) {
            return Err(Error::invalid("assignment", format!("pilot {bad} outside 0..{tau}")));
        }
        let mut groups = vec![Vec::new(); tau];
        for (k, &t) in assignment.iter().enumerate() {
            groups[t].push(k);
        }
        Ok(PilotPlan {
            tau,
            phi,
            assignment,
            groups,
        })
    }

    /// UE `k` gets pilot `k mod tau`.
    pub fn round_robin(tau: usize, num_ues: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::invalid("tau", "pilot length must be at least 1"));
        }
        PilotPlan::new(tau, (0..num_ues).map(|k| k % tau).collect())
    }

    pub fn num_ues(&self) -> usize {
        self.assignment.len()
    }

    pub fn pilot(&self, k: usize) -> usize {
        self.assignment[k]
    }

    /// UEs sharing pilot `t`, ascending.
    pub fn users_of(&self, t: usize) -> &[usize] {
        &self.groups[t]
    }

    /// Co-pilot set of UE `k`, which includes `k`.
    pub fn copilots(&self, k: usize) -> &[usize] {
        &self.groups[self.assignment[k]]
    }

    pub fn shares_pilot(&self, k: usize, i: usize) -> bool {
        self.assignment[k] == self.assignment[i]
    }
}

/// How the pilot-phase noise `n_t` is generated when sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotNoiseModel {
    /// `n_t ~ CN(0, C_n)` independent of the channels, of other pilots and of
    /// other APs. This is the model under which the closed forms are exact.
    #[default]
    Aggregate,
    /// Symbol-level transmitter distortion `n_da,i` carried by the true
    /// channels, shared by every AP, followed by per-symbol ADC distortion.
    PerSymbol,
}

/// `(1 - rho_ad)^2 sum_{i in users} pdd_i tau R_il + C_n`.
pub fn psi_matrix(
    users: &[usize],
    l: usize,
    stats: &ChannelStatistics,
    pdd: &[f64],
    q: &QuantizerConfig,
    tau: usize,
    c_n: &CMat,
) -> CMat {
    let mut psi = c_n.clone();
    for &i in users {
        psi += &stats.link(i, l).r * real(q.adc_gain_sq() * pdd[i] * tau as f64);
    }
    linalg::hermitize(&mut psi);
    psi
}

/// Everything that follows from the statistics, pilots, powers and hardware:
/// noise covariances, `Psi`, estimator gains and estimate covariances.
#[derive(Clone, Debug)]
pub struct EstimationContext {
    num_ues: usize,
    num_aps: usize,
    tau: usize,
    /// `sum_i pdd_i (h_bar h_bar^H + R_il)` per AP.
    pub moment: Vec<CMat>,
    /// Aggregate received noise covariance per AP.
    pub c_n: Vec<CMat>,
    /// Thermal plus ADC part of the data noise, per AP.
    pub c_x: Vec<CMat>,
    c_n_sqrt: Vec<CMat>,
    psi: Vec<CMat>,
    psi_inv: Vec<CMat>,
    /// `R_kl Psi^{-1}` per link.
    r_psi_inv: Vec<CMat>,
    /// `(1 - rho_ad) sqrt(pdd_k tau) R_kl Psi^{-1}` per link.
    gain: Vec<CMat>,
    c_hat: Vec<CMat>,
}

impl EstimationContext {
    pub fn build(
        stats: &ChannelStatistics,
        pilots: &PilotPlan,
        pdd: &[f64],
        q: &QuantizerConfig,
        sigma2: f64,
    ) -> Result<Self> {
        let (k_count, l_count, tau) = (stats.num_ues(), stats.num_aps(), pilots.tau);
        if pilots.num_ues() != k_count || pdd.len() != k_count {
            return Err(Error::invalid("pilots/powers", "length differs from the UE count"));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::invalid("sigma2", "must be non-negative"));
        }
        if pdd.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("powers", "must be non-negative"));
        }
        let moment: Vec<CMat> = (0..l_count)
            .map(|l| quantization::weighted_second_moment(l, stats, pdd, 0..k_count))
            .collect();
        let c_n: Vec<CMat> = moment
            .iter()
            .map(|m| quantization::noise_covariance_from_moment(m, q, sigma2))
            .collect();
        let c_x: Vec<CMat> = moment
            .iter()
            .map(|m| quantization::channel_independent_noise_covariance(m, q, sigma2))
            .collect();
        let c_n_sqrt = c_n.iter().map(linalg::psd_sqrt).collect::<Result<Vec<_>>>()?;
        let mut psi = Vec::with_capacity(tau * l_count);
        let mut psi_inv = Vec::with_capacity(tau * l_count);
        for t in 0..tau {
            for l in 0..l_count {
                let p = psi_matrix(pilots.users_of(t), l, stats, pdd, q, tau, &c_n[l]);
                let mut inv = linalg::inverse_hpd(&p, "pilot covariance inverse")?;
                linalg::hermitize(&mut inv);
                psi.push(p);
                psi_inv.push(inv);
            }
        }
        let mut r_psi_inv = Vec::with_capacity(k_count * l_count);
        let mut gain = Vec::with_capacity(k_count * l_count);
        let mut c_hat = Vec::with_capacity(k_count * l_count);
        for k in 0..k_count {
            let t = pilots.pilot(k);
            let scale = q.adc_gain() * (pdd[k] * tau as f64).sqrt();
            for l in 0..l_count {
                let r = &stats.link(k, l).r;
                let rp = r * &psi_inv[t * l_count + l];
                let mut c = &rp * r * real(scale * scale);
                linalg::hermitize(&mut c);
                gain.push(&rp * real(scale));
                r_psi_inv.push(rp);
                c_hat.push(c);
            }
        }
        Ok(EstimationContext {
            num_ues: k_count,
            num_aps: l_count,
            tau,
            moment,
            c_n,
            c_x,
            c_n_sqrt,
            psi,
            psi_inv,
            r_psi_inv,
            gain,
            c_hat,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn psi(&self, t: usize, l: usize) -> &CMat {
        &self.psi[t * self.num_aps + l]
    }

    pub fn psi_inv(&self, t: usize, l: usize) -> &CMat {
        &self.psi_inv[t * self.num_aps + l]
    }

    pub fn r_psi_inv(&self, k: usize, l: usize) -> &CMat {
        &self.r_psi_inv[k * self.num_aps + l]
    }

    pub fn estimator_gain(&self, k: usize, l: usize) -> &CMat {
        &self.gain[k * self.num_aps + l]
    }

    /// Covariance of the estimate of link `(k, l)`.
    pub fn c_hat(&self, k: usize, l: usize) -> &CMat {
        &self.c_hat[k * self.num_aps + l]
    }
}

/// `h_bar_kl + (1 - rho_ad) sqrt(pdd_k tau) R_kl Psi^{-1} z_w`.
pub fn estimate_local(
    z_w: &CVec,
    k: usize,
    l: usize,
    stats: &ChannelStatistics,
    ctx: &EstimationContext,
) -> CVec {
    &stats.link(k, l).h_bar + ctx.estimator_gain(k, l) * z_w
}

/// One joint draw of every channel and its estimate, UE-major (`k * L + l`).
#[derive(Clone, Debug)]
pub struct JointSample {
    pub num_aps: usize,
    pub h: Vec<CVec>,
    pub h_hat: Vec<CVec>,
}

impl JointSample {
    pub fn h(&self, k: usize, l: usize) -> &CVec {
        &self.h[k * self.num_aps + l]
    }

    pub fn h_hat(&self, k: usize, l: usize) -> &CVec {
        &self.h_hat[k * self.num_aps + l]
    }
}

/// Draws channels, pilot-phase noise and the LOS-stripped observations
/// `z_w[t][l]`, then forms every estimate. Co-pilot UEs reuse the same
/// observation.
pub fn sample_joint<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    pilots: &PilotPlan,
    pdd: &[f64],
    q: &QuantizerConfig,
    sigma2: f64,
    ctx: &EstimationContext,
    model: PilotNoiseModel,
    rng: &mut R,
) -> JointSample {
    let (k_count, l_count, tau, n) = (stats.num_ues(), stats.num_aps(), pilots.tau, stats.antennas());
    let mut h_w = Vec::with_capacity(k_count * l_count);
    for k in 0..k_count {
        for l in 0..l_count {
            h_w.push(rng::correlated_normal(rng, &stats.link(k, l).r_sqrt));
        }
    }
    let observations = match model {
        PilotNoiseModel::Aggregate => {
            let mut z = Vec::with_capacity(tau * l_count);
            for t in 0..tau {
                for l in 0..l_count {
                    let mut zw = rng::correlated_normal(rng, &ctx.c_n_sqrt[l]);
                    for &i in pilots.users_of(t) {
                        zw += &h_w[i * l_count + l] * real(q.adc_gain() * (pdd[i] * tau as f64).sqrt());
                    }
                    z.push(zw);
                }
            }
            z
        }
        PilotNoiseModel::PerSymbol => {
            per_symbol_observations(stats, pilots, pdd, q, sigma2, ctx, &h_w, rng)
        }
    };
    let mut h = Vec::with_capacity(k_count * l_count);
    let mut h_hat = Vec::with_capacity(k_count * l_count);
    for k in 0..k_count {
        let t = pilots.pilot(k);
        for l in 0..l_count {
            let link = stats.link(k, l);
            h.push(&link.h_bar + &h_w[k * l_count + l]);
            h_hat.push(estimate_local(&observations[t * l_count + l], k, l, stats, ctx));
        }
    }
    debug_assert!(h.iter().all(|v| v.len() == n));
    JointSample {
        num_aps: l_count,
        h,
        h_hat,
    }
}

/// Builds the received pilot block symbol by symbol through the DAC and ADC
/// models, correlates with each pilot and strips the known LOS part.
#[allow(clippy::too_many_arguments)]
fn per_symbol_observations<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    pilots: &PilotPlan,
    pdd: &[f64],
    q: &QuantizerConfig,
    sigma2: f64,
    ctx: &EstimationContext,
    h_w: &[CVec],
    rng: &mut R,
) -> Vec<CVec> {
    let (k_count, l_count, tau, n) = (stats.num_ues(), stats.num_aps(), pilots.tau, stats.antennas());
    let p: Vec<f64> = pdd.iter().map(|x| x / (1.0 - q.rho_da)).collect();
    // Transmitted symbols after the DAC, shared by every AP.
    let mut sent = vec![vec![C64::new(0.0, 0.0); tau]; k_count];
    for (i, row) in sent.iter_mut().enumerate() {
        let t = pilots.pilot(i);
        let clean = CVec::from_fn(tau, |s, _| pilots.phi[(s, t)] * p[i].sqrt());
        let out = quantization::dac_apply(&clean, q.rho_da, &vec![p[i]; tau], rng)
            .expect("valid DAC parameters");
        row.copy_from_slice(out.as_slice());
    }
    let mut obs = vec![CVec::zeros(n); tau * l_count];
    for l in 0..l_count {
        let adc_diag: Vec<f64> = (0..n).map(|a| ctx.moment[l][(a, a)].re / (1.0 - q.rho_da) + sigma2).collect();
        let mut block = CMat::zeros(n, tau);
        for s in 0..tau {
            let mut x = complex_normal_vec(rng, n) * real(sigma2.sqrt());
            for i in 0..k_count {
                let h = &stats.link(i, l).h_bar + &h_w[i * l_count + l];
                x += h * sent[i][s];
            }
            let y = quantization::adc_apply(&x, q.rho_ad, &adc_diag, rng).expect("valid ADC parameters");
            block.set_column(s, &y);
        }
        let norm = real(1.0 / (tau as f64).sqrt());
        for t in 0..tau {
            let mut z = &block * pilots.phi.column(t).map(|c| c.conj()) * norm;
            for &i in pilots.users_of(t) {
                z -= &stats.link(i, l).h_bar * real(q.adc_gain() * (pdd[i] * tau as f64).sqrt());
            }
            obs[t * l_count + l] = z;
        }
    }
    obs
}

/// Concatenates per-AP vectors over the listed APs.
pub fn stack_vectors(parts: &[&CVec]) -> CVec {
    linalg::stack(parts)
}

/// Block-diagonal assembly over the listed per-AP matrices.
pub fn stack_block_diagonal(blocks: &[&CMat]) -> CMat {
    linalg::block_diagonal(blocks)
}
