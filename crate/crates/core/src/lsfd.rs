//! Large-scale fading decoding: closed-form statistics of the MR-combined
//! local estimates and the weighting vectors built from them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, real};
use crate::{CMat, CVec, Deployment, Error, Result, C64};

/// Second-stage weighting applied by the CPU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `B^{-1} E[g_kk]` with interference summed over all UEs.
    Lsfd,
    /// Same with the interference sum restricted to `Q_k`.
    PLsfd,
    /// All-ones vector.
    L2Lsfd,
}

impl Weighting {
    pub fn name(&self) -> &'static str {
        match self {
            Weighting::Lsfd => "lsfd",
            Weighting::PLsfd => "p-lsfd",
            Weighting::L2Lsfd => "l2-lsfd",
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsfd" => Ok(Weighting::Lsfd),
            "p-lsfd" => Ok(Weighting::PLsfd),
            "l2-lsfd" => Ok(Weighting::L2Lsfd),
            other => Err(Error::Unknown {
                kind: "weighting",
                name: other.to_string(),
            }),
        }
    }
}

/// A weighting vector over the serving set, tagged with how it was made.
#[derive(Clone, Debug, PartialEq)]
pub struct LsfdVector {
    pub a: CVec,
    pub method: &'static str,
}

/// Closed-form ingredients for UE `k` under MR combining. Vectors are indexed
/// by position in the serving set `aps`.
#[derive(Clone, Debug)]
pub struct LsfdIngredients {
    pub k: usize,
    pub aps: Vec<usize>,
    /// `lambda[i]_j = h_bar_{k,l_j}^H h_bar_{i,l_j}` for every UE `i`.
    pub lambda: Vec<CVec>,
    /// Pilot-contamination means, present only for co-pilot UEs. Complex in
    /// general since `R_il` and `R_kl` need not commute.
    pub b: Vec<Option<CVec>>,
    pub c: Vec<DVector<f64>>,
    pub d: DVector<f64>,
    /// `E[g_kk] = lambda_k^k + b_k^k`.
    pub mean: CVec,
    /// Interference-plus-noise matrix with sums over all UEs.
    pub c_full: CMat,
    /// Same with sums over `Q_k` and `P_k ∩ Q_k`.
    pub c_partial: CMat,
}

/// Noise term `d_kl` in its expanded form.
pub fn d_kl(dep: &Deployment, k: usize, l: usize) -> f64 {
    let (ra, rd) = (dep.quant.rho_ad, dep.quant.rho_da);
    let tau = dep.tau() as f64;
    let pk = dep.pdd(k);
    let link = dep.stats.link(k, l);
    let mut diag_r = vec![0.0; dep.antennas()];
    let mut los_power = 0.0;
    for i in 0..dep.num_ues() {
        let li = dep.stats.link(i, l);
        let p = dep.pdd(i);
        for (n, d) in diag_r.iter_mut().enumerate() {
            *d += p * li.r[(n, n)].re;
        }
        los_power += p * li.beta_los;
    }
    let rpr = dep.ctx.r_psi_inv(k, l) * &link.r;
    let hb = &link.h_bar;
    let first: f64 = hb.iter().zip(&diag_r).map(|(h, d)| h.norm_sqr() * d).sum();
    let second: f64 = diag_r.iter().enumerate().map(|(n, d)| d * rpr[(n, n)].re).sum();
    let estimate_power = hb.norm_squared() + (1.0 - ra).powi(2) * tau * pk * linalg::trace(&rpr).re;
    ra * (1.0 - ra) / (1.0 - rd) * first
        + ra * (1.0 - ra).powi(3) / (1.0 - rd) * tau * pk * second
        + (1.0 - ra) * (dep.sigma2 + ra / (1.0 - rd) * los_power) * estimate_power
}

/// Assembles every ingredient for UE `k`.
pub fn build_ingredients(dep: &Deployment, k: usize) -> Result<LsfdIngredients> {
    let aps = dep.clusters.serving[k].clone();
    if aps.is_empty() {
        return Err(Error::Cluster(format!("UE {k} has no serving AP")));
    }
    let m = aps.len();
    let k_count = dep.num_ues();
    let g = dep.quant.adc_gain_sq();
    let tau = dep.tau() as f64;
    let pk = dep.pdd(k);

    let mut lambda = Vec::with_capacity(k_count);
    let mut b = Vec::with_capacity(k_count);
    let mut c = Vec::with_capacity(k_count);
    for i in 0..k_count {
        let mut lam = CVec::zeros(m);
        let mut ci = DVector::zeros(m);
        let copilot = dep.pilots.shares_pilot(k, i);
        let mut bi = copilot.then(|| CVec::zeros(m));
        for (j, &l) in aps.iter().enumerate() {
            let (lk, li) = (dep.stats.link(k, l), dep.stats.link(i, l));
            lam[j] = lk.h_bar.dotc(&li.h_bar);
            let c_hat_k = dep.ctx.c_hat(k, l);
            ci[j] = linalg::trace(&(&li.r * c_hat_k)).re
                + linalg::quad(&lk.h_bar, &li.r, &lk.h_bar).re
                + linalg::quad(&li.h_bar, c_hat_k, &li.h_bar).re;
            if let Some(bv) = bi.as_mut() {
                let t = linalg::trace(&(&li.r * dep.ctx.r_psi_inv(k, l).adjoint()));
                // tr(R_i Psi^{-1} R_k) = tr(R_i (R_k Psi^{-1})^H).
                bv[j] = t * (g * tau * (pk * dep.pdd(i)).sqrt());
            }
        }
        lambda.push(lam);
        b.push(bi);
        c.push(ci);
    }
    let d = DVector::from_iterator(m, aps.iter().map(|&l| d_kl(dep, k, l)));
    let mean = &lambda[k] + b[k].as_ref().expect("k shares its own pilot");

    let in_q: Vec<bool> = {
        let mut mask = vec![false; k_count];
        for &i in &dep.clusters.overlap[k] {
            mask[i] = true;
        }
        mask
    };
    let mut sum_full = CMat::zeros(m, m);
    let mut sum_part = CMat::zeros(m, m);
    for i in 0..k_count {
        let p = dep.pdd(i);
        if p == 0.0 {
            continue;
        }
        let mut term = linalg::outer(&lambda[i], &lambda[i]);
        for j in 0..m {
            term[(j, j)] += real(c[i][j]);
        }
        if let Some(bi) = &b[i] {
            term += linalg::outer(bi, bi) + linalg::outer(bi, &lambda[i]) + linalg::outer(&lambda[i], bi);
        }
        term *= real(p);
        if in_q[i] {
            sum_part += &term;
        }
        sum_full += term;
    }
    let scale = real(g / (1.0 - dep.quant.rho_da));
    let signal = linalg::outer(&mean, &mean) * real(g * pk);
    let noise = CMat::from_diagonal(&d.map(real));
    let mut c_full = sum_full * scale - &signal + &noise;
    let mut c_partial = sum_part * scale - signal + noise;
    linalg::hermitize(&mut c_full);
    linalg::hermitize(&mut c_partial);
    Ok(LsfdIngredients {
        k,
        aps,
        lambda,
        b,
        c,
        d,
        mean,
        c_full,
        c_partial,
    })
}

/// `B^{-1} E[g_kk]`.
pub fn lsfd_optimal(mean: &CVec, b: &CMat) -> Result<LsfdVector> {
    Ok(LsfdVector {
        a: linalg::solve_hermitian(b, mean, "LSFD weights")?,
        method: "optimal",
    })
}

/// LSFD with the full interference matrix.
pub fn lsfd_mr(ing: &LsfdIngredients) -> Result<LsfdVector> {
    Ok(LsfdVector {
        a: linalg::solve_hermitian(&ing.c_full, &ing.mean, "LSFD weights")?,
        method: "mr",
    })
}

/// LSFD with the partial interference matrix.
pub fn p_lsfd(ing: &LsfdIngredients) -> Result<LsfdVector> {
    Ok(LsfdVector {
        a: linalg::solve_hermitian(&ing.c_partial, &ing.mean, "P-LSFD weights")?,
        method: "p-mr",
    })
}

/// All-ones weights.
pub fn l2_lsfd(size: usize) -> Result<LsfdVector> {
    if size == 0 {
        return Err(Error::invalid("size", "must be at least 1"));
    }
    Ok(LsfdVector {
        a: CVec::from_element(size, C64::new(1.0, 0.0)),
        method: "l2",
    })
}

/// `gain |a^H mean|^2 / (a^H B a)`.
pub fn rayleigh_quotient(a: &CVec, mean: &CVec, b: &CMat, gain: f64) -> Result<f64> {
    let den = linalg::quad(a, b, a).re;
    if !(den > 0.0) {
        return Err(Error::Singular("SINR denominator"));
    }
    Ok(gain * a.dotc(mean).norm_sqr() / den)
}
