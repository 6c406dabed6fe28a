//! Spectral efficiency: closed forms and Monte Carlo estimators for the
//! distributed (local combining + LSFD) and centralized schemes.
//!
//! Monte Carlo work is split into a fixed number of batches that depends only
//! on the trial count. Each batch draws from its own RNG stream and the batch
//! results are merged in index order, so output is bit-for-bit independent of
//! the rayon pool size.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{self, CentralDetector, LocalDetector};
use crate::linalg::{self, real};
use crate::lsfd::{self, LsfdIngredients, LsfdVector, Weighting};
use crate::rng::{self, SimRng};
use crate::{CMat, CVec, Deployment, Error, Result, C64};

/// `1 - tau / tau_c`.
pub fn prelog(tau: usize, tau_c: usize) -> Result<f64> {
    if tau_c == 0 || tau >= tau_c {
        return Err(Error::invalid("tau", format!("pilot length {tau} must be below tau_c = {tau_c}")));
    }
    Ok(1.0 - tau as f64 / tau_c as f64)
}

fn se_from_sinr(prelog: f64, sinr: f64) -> f64 {
    prelog * (1.0 + sinr).log2()
}

/// `E[h_hat_{k,l1}^H h_{i,l1} h_{i,l2}^H h_hat_{k,l2}]` in closed form.
pub fn theorem1_kernel(dep: &Deployment, k: usize, i: usize, l1: usize, l2: usize) -> C64 {
    let g = dep.quant.adc_gain_sq();
    let tau = dep.tau() as f64;
    let copilot = dep.pilots.shares_pilot(k, i);
    let mean = |l: usize| {
        let (lk, li) = (dep.stats.link(k, l), dep.stats.link(i, l));
        let lambda = lk.h_bar.dotc(&li.h_bar);
        if copilot {
            let t = linalg::trace(&(&li.r * dep.ctx.r_psi_inv(k, l).adjoint()));
            lambda + t * (g * tau * (dep.pdd(k) * dep.pdd(i)).sqrt())
        } else {
            lambda
        }
    };
    if l1 != l2 {
        return mean(l1) * mean(l2).conj();
    }
    let l = l1;
    let (lk, li) = (dep.stats.link(k, l), dep.stats.link(i, l));
    let c_hat = dep.ctx.c_hat(k, l);
    let spread = linalg::trace(&(&li.r * c_hat)).re
        + linalg::quad(&lk.h_bar, &li.r, &lk.h_bar).re
        + linalg::quad(&li.h_bar, c_hat, &li.h_bar).re;
    real(mean(l).norm_sqr() + spread)
}

/// SE of UE `k` with the optimal LSFD weights, in closed form.
pub fn se_distributed_closed_max(dep: &Deployment, ing: &LsfdIngredients) -> Result<f64> {
    let x = linalg::solve_hermitian(&ing.c_full, &ing.mean, "LSFD weights")?;
    let sinr = dep.quant.adc_gain_sq() * dep.pdd(ing.k) * ing.mean.dotc(&x).re;
    Ok(se_from_sinr(dep.prelog(), sinr.max(0.0)))
}

/// SE of UE `k` for an arbitrary weighting vector, in closed form. The
/// denominator always uses the full interference matrix.
pub fn se_distributed_closed(dep: &Deployment, ing: &LsfdIngredients, a: &LsfdVector) -> Result<f64> {
    if a.a.len() != ing.mean.len() {
        return Err(Error::invalid("a", "length differs from the serving set"));
    }
    if a.a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::invalid("a", "zero weighting vector"));
    }
    let gain = dep.quant.adc_gain_sq() * dep.pdd(ing.k);
    let sinr = lsfd::rayleigh_quotient(&a.a, &ing.mean, &ing.c_full, gain)?;
    Ok(se_from_sinr(dep.prelog(), sinr))
}

/// Closed-form SE of every UE under a given weighting.
pub fn se_distributed_closed_all(dep: &Deployment, weighting: Weighting) -> Result<Vec<f64>> {
    (0..dep.num_ues())
        .into_par_iter()
        .map(|k| {
            let ing = lsfd::build_ingredients(dep, k)?;
            match weighting {
                Weighting::Lsfd => se_distributed_closed_max(dep, &ing),
                Weighting::PLsfd => se_distributed_closed(dep, &ing, &lsfd::p_lsfd(&ing)?),
                Weighting::L2Lsfd => se_distributed_closed(dep, &ing, &lsfd::l2_lsfd(ing.aps.len())?),
            }
        })
        .collect()
}

/// A Monte Carlo estimate and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Trial counts per batch. The partition depends on `trials` only.
pub fn batch_sizes(trials: usize) -> Vec<usize> {
    let batches = (trials / 100).clamp(1, 100).min(trials.max(1));
    let base = trials / batches;
    let extra = trials % batches;
    (0..batches).map(|b| base + usize::from(b < extra)).collect()
}

/// Runs `f` once per batch on its own RNG stream; results come back in batch
/// order.
pub fn run_batches<T, F>(seed: u64, purpose: &str, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    batch_sizes(trials)
        .into_par_iter()
        .enumerate()
        .map(|(b, n)| f(&mut rng::stream(seed, purpose, b as u64), n))
        .collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample moments of the MR-combined local statistics for one UE.
#[derive(Clone, Debug)]
struct UeMoments {
    g: CVec,
    s_full: CMat,
    s_part: CMat,
    f: DVector<f64>,
}

impl UeMoments {
    fn zeros(m: usize) -> Self {
        UeMoments {
            g: CVec::zeros(m),
            s_full: CMat::zeros(m, m),
            s_part: CMat::zeros(m, m),
            f: DVector::zeros(m),
        }
    }

    fn add(&mut self, other: &UeMoments) {
        self.g += &other.g;
        self.s_full += &other.s_full;
        self.s_part += &other.s_part;
        self.f += &other.f;
    }
}

#[derive(Clone, Debug)]
struct BatchMoments {
    trials: usize,
    ues: Vec<UeMoments>,
}

/// Accumulated Monte Carlo moments for the distributed scheme under one local
/// detector. Every weighting is evaluated from the same trials.
#[derive(Clone, Debug)]
pub struct DistributedMoments {
    pub detector: LocalDetector,
    pub trials: usize,
    batches: Vec<BatchMoments>,
    pooled: BatchMoments,
}

fn accumulate_trial(dep: &Deployment, v: &[Vec<CVec>], sample: &crate::pilots::JointSample, acc: &mut BatchMoments) {
    let k_count = dep.num_ues();
    for (k, ue) in acc.ues.iter_mut().enumerate() {
        let aps = &dep.clusters.serving[k];
        let m = aps.len();
        let overlap = &dep.clusters.overlap[k];
        for i in 0..k_count {
            let p = dep.pdd(i);
            let gi = CVec::from_iterator(m, aps.iter().enumerate().map(|(j, &l)| v[k][j].dotc(sample.h(i, l))));
            if i == k {
                ue.g += &gi;
            }
            if p == 0.0 {
                continue;
            }
            let term = linalg::outer(&gi, &gi) * real(p);
            if overlap.binary_search(&i).is_ok() {
                ue.s_part += &term;
            }
            ue.s_full += term;
        }
        for (j, &l) in aps.iter().enumerate() {
            ue.f[j] += linalg::quad(&v[k][j], &dep.ctx.c_x[l], &v[k][j]).re;
        }
    }
}

/// Samples `trials` joint channel/estimate draws and accumulates the
/// statistics of `g_ki = [v_kl^H h_il]_l` and of the effective noise.
///
/// The data-phase distortion enters through its conditional second moment
/// given the channels, so its draws are integrated out exactly.
pub fn distributed_moments(dep: &Deployment, detector: LocalDetector, trials: usize, seed: u64) -> Result<DistributedMoments> {
    let sizes: Vec<usize> = dep.clusters.serving.iter().map(Vec::len).collect();
    let batches = run_batches(seed, "se-distributed", trials, |rng, n| {
        let mut acc = BatchMoments {
            trials: n,
            ues: sizes.iter().map(|&m| UeMoments::zeros(m)).collect(),
        };
        for _ in 0..n {
            let sample = dep.sample(rng);
            let v = detectors::local_combiners(dep, &sample, detector)?;
            accumulate_trial(dep, &v, &sample, &mut acc);
        }
        Ok(acc)
    })?;
    let mut pooled = BatchMoments {
        trials: 0,
        ues: sizes.iter().map(|&m| UeMoments::zeros(m)).collect(),
    };
    for b in &batches {
        pooled.trials += b.trials;
        for (p, u) in pooled.ues.iter_mut().zip(&b.ues) {
            p.add(u);
        }
    }
    Ok(DistributedMoments {
        detector,
        trials,
        batches,
        pooled,
    })
}

impl DistributedMoments {
    /// Sample mean `E[g_kk]`.
    pub fn mean(&self, k: usize) -> CVec {
        &self.pooled.ues[k].g / real(self.pooled.trials as f64)
    }

    /// Estimated interference-plus-noise matrix of UE `k`; `partial` restricts
    /// the interference sum to `Q_k`.
    pub fn interference_matrix(&self, dep: &Deployment, k: usize, partial: bool) -> CMat {
        let (_, b) = matrices(dep, k, &self.pooled, partial);
        b
    }

    /// SE of UE `k` under `weighting`, with a batch-means standard error.
    pub fn se(&self, dep: &Deployment, k: usize, weighting: Weighting) -> Result<Estimate> {
        let value = se_from_batch(dep, k, &self.pooled, weighting)?;
        let per_batch = self
            .batches
            .iter()
            .map(|b| se_from_batch(dep, k, b, weighting))
            .collect::<Result<Vec<_>>>()?;
        let (_, stderr) = mean_and_stderr(&per_batch);
        Ok(Estimate { value, stderr })
    }

    pub fn se_all(&self, dep: &Deployment, weighting: Weighting) -> Result<Vec<Estimate>> {
        (0..dep.num_ues()).map(|k| self.se(dep, k, weighting)).collect()
    }
}

fn matrices(dep: &Deployment, k: usize, acc: &BatchMoments, partial: bool) -> (CVec, CMat) {
    let n = real(acc.trials as f64);
    let ue = &acc.ues[k];
    let mean = &ue.g / n;
    let g = dep.quant.adc_gain_sq();
    let s = if partial { &ue.s_part } else { &ue.s_full };
    let mut b = s / n * real(g / (1.0 - dep.quant.rho_da)) - linalg::outer(&mean, &mean) * real(g * dep.pdd(k));
    for j in 0..mean.len() {
        b[(j, j)] += real(ue.f[j] / acc.trials as f64);
    }
    linalg::hermitize(&mut b);
    (mean, b)
}

fn se_from_batch(dep: &Deployment, k: usize, acc: &BatchMoments, weighting: Weighting) -> Result<f64> {
    let gain = dep.quant.adc_gain_sq() * dep.pdd(k);
    if gain == 0.0 {
        return Ok(0.0);
    }
    let (mean, b_full) = matrices(dep, k, acc, false);
    let a = match weighting {
        Weighting::Lsfd => lsfd::lsfd_optimal(&mean, &b_full)?,
        Weighting::PLsfd => lsfd::lsfd_optimal(&mean, &matrices(dep, k, acc, true).1)?,
        Weighting::L2Lsfd => lsfd::l2_lsfd(mean.len())?,
    };
    let sinr = lsfd::rayleigh_quotient(&a.a, &mean, &b_full, gain)?;
    Ok(se_from_sinr(dep.prelog(), sinr))
}

/// Monte Carlo SE of every UE in the distributed scheme.
pub fn se_distributed_mc(
    dep: &Deployment,
    detector: LocalDetector,
    weighting: Weighting,
    trials: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    distributed_moments(dep, detector, trials, seed)?.se_all(dep, weighting)
}

/// Instantaneous SINR of UE `k` for a centralized combiner, with the
/// estimation error and hardware noise in the denominator.
pub fn centralized_sinr(
    dep: &Deployment,
    k: usize,
    sample: &crate::pilots::JointSample,
    comb: &detectors::StackedCombiner,
) -> f64 {
    let g = dep.quant.adc_gain_sq();
    let n = dep.antennas();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..dep.num_ues() {
        let p = dep.pdd(i);
        if p == 0.0 {
            continue;
        }
        let x = comb.v.dotc(&detectors::restrict(sample, i, &comb.aps, true)).norm_sqr() * p;
        if i == k {
            signal = x;
        } else {
            interference += x;
        }
    }
    let mut noise = 0.0;
    for (j, &l) in comb.aps.iter().enumerate() {
        let vj = comb.v.rows(j * n, n).into_owned();
        noise += linalg::quad(&vj, &dep.residual[l], &vj).re;
    }
    let den = g * interference + noise;
    if signal == 0.0 || den <= 0.0 {
        return 0.0;
    }
    g * signal / den
}

/// Monte Carlo average of the instantaneous SE for every UE in the
/// centralized scheme.
pub fn se_centralized_mc_exact(
    dep: &Deployment,
    detector: CentralDetector,
    trials: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    let k_count = dep.num_ues();
    let prelog = dep.prelog();
    let batches = run_batches(seed, "se-centralized", trials, |rng, n| {
        let mut sum = vec![0.0; k_count];
        let mut sum_sq = vec![0.0; k_count];
        for _ in 0..n {
            let sample = dep.sample(rng);
            for k in 0..k_count {
                let comb = detectors::central_combiner(k, &sample, dep, detector)?;
                let se = se_from_sinr(prelog, centralized_sinr(dep, k, &sample, &comb));
                sum[k] += se;
                sum_sq[k] += se * se;
            }
        }
        Ok((sum, sum_sq))
    })?;
    let total = trials as f64;
    Ok((0..k_count)
        .map(|k| {
            let (s, s2) = batches.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x[k], b + y[k]));
            let mean = s / total;
            let var = if trials > 1 { ((s2 - total * mean * mean) / (total - 1.0)).max(0.0) } else { f64::NAN };
            Estimate {
                value: mean,
                stderr: (var / total).sqrt(),
            }
        })
        .collect())
}

/// Expected numerator and denominator of the centralized MRC SINR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentralizedTerms {
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl CentralizedTerms {
    pub fn sinr(&self) -> f64 {
        let den = self.interference + self.noise;
        if self.signal == 0.0 {
            0.0
        } else {
            self.signal / den
        }
    }
}

/// `E|v^H h_hat_i|^2`-type terms for centralized MRC, `v = D_k h_hat_k`.
/// Returns `(f^g(i), f^e(i))`; `f^e` is zero unless `i` shares `k`'s pilot.
pub fn centralized_f_terms(dep: &Deployment, k: usize, i: usize) -> (f64, f64) {
    let aps = &dep.clusters.serving[k];
    let mut fg = 0.0;
    let mut los = C64::new(0.0, 0.0);
    for &l in aps {
        let (lk, li) = (dep.stats.link(k, l), dep.stats.link(i, l));
        let (ck, ci) = (dep.ctx.c_hat(k, l), dep.ctx.c_hat(i, l));
        fg += linalg::trace(&(ck * ci)).re + linalg::quad(&lk.h_bar, ci, &lk.h_bar).re + linalg::quad(&li.h_bar, ck, &li.h_bar).re;
        los += lk.h_bar.dotc(&li.h_bar);
    }
    fg += los.norm_sqr();
    if !dep.pilots.shares_pilot(k, i) {
        return (fg, 0.0);
    }
    let g = dep.quant.adc_gain_sq();
    let tau = dep.tau() as f64;
    let mut t = C64::new(0.0, 0.0);
    for &l in aps {
        t += linalg::trace(&(&dep.stats.link(i, l).r * dep.ctx.r_psi_inv(k, l).adjoint()));
    }
    let t = t * (g * tau * (dep.pdd(k) * dep.pdd(i)).sqrt());
    let fe = t.norm_sqr() + 2.0 * (t * los).re;
    (fg, fe)
}

/// Expected signal, interference and noise of UE `k` with centralized MRC.
pub fn centralized_terms(dep: &Deployment, k: usize) -> CentralizedTerms {
    let g = dep.quant.adc_gain_sq();
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..dep.num_ues() {
        let p = dep.pdd(i);
        if p == 0.0 {
            continue;
        }
        let (fg, fe) = centralized_f_terms(dep, k, i);
        if i == k {
            signal = g * p * (fg + fe);
        } else {
            interference += g * p * (fg + fe);
        }
    }
    let mut noise = 0.0;
    for &l in &dep.clusters.serving[k] {
        let link = dep.stats.link(k, l);
        let second = linalg::outer(&link.h_bar, &link.h_bar) + dep.ctx.c_hat(k, l);
        noise += linalg::trace(&(&dep.residual[l] * second)).re;
    }
    CentralizedTerms {
        signal,
        interference,
        noise,
    }
}

/// Closed-form approximation of the centralized MRC SE of UE `k`.
pub fn se_centralized_closed(dep: &Deployment, k: usize) -> Result<f64> {
    if dep.clusters.serving[k].is_empty() {
        return Err(Error::Cluster(format!("UE {k} has no serving AP")));
    }
    Ok(se_from_sinr(dep.prelog(), centralized_terms(dep, k).sinr()))
}

/// How an SE figure was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    ClosedForm,
    Approximate,
    MonteCarlo,
}

/// Per-UE SE of one scheme configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeReport {
    pub scheme: String,
    pub detector: String,
    pub weighting: Option<String>,
    pub evaluation: Evaluation,
    pub trials: Option<usize>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl SeReport {
    pub fn closed(scheme: &str, detector: &str, weighting: Option<&str>, evaluation: Evaluation, values: Vec<f64>) -> Self {
        SeReport {
            scheme: scheme.into(),
            detector: detector.into(),
            weighting: weighting.map(Into::into),
            evaluation,
            trials: None,
            values,
            stderr: None,
        }
    }

    pub fn monte_carlo(scheme: &str, detector: &str, weighting: Option<&str>, trials: usize, est: &[Estimate]) -> Self {
        SeReport {
            scheme: scheme.into(),
            detector: detector.into(),
            weighting: weighting.map(Into::into),
            evaluation: Evaluation::MonteCarlo,
            trials: Some(trials),
            values: est.iter().map(|e| e.value).collect(),
            stderr: Some(est.iter().map(|e| e.stderr).collect()),
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// `SE_max - SE_min`.
    pub fn spread(&self) -> f64 {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}
