//! Local (per-AP) and centralized combining vectors.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, real};
use crate::pilots::JointSample;
use crate::{CMat, CVec, Deployment, Error, Result};

/// Combiners computed at each AP for the distributed scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalDetector {
    Mrc,
    /// Uses the estimates of all `K` UEs.
    LMmse,
    /// Estimates for primary-served UEs, statistics for secondary-served UEs.
    LpMmse,
    /// Estimates for every served UE.
    LpMmseFull,
}

/// Combiners computed at the CPU for the centralized scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentralDetector {
    Mrc,
    Mmse,
    /// Estimates for `Q_k ∩ N_{l_k^M}`, statistics for the rest of `Q_k`.
    PMmse,
    /// Estimates for all of `Q_k`.
    PMmseOriginal,
}

macro_rules! named {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(&self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Unknown { kind: "detector", name: other.to_string() }),
                }
            }
        }
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named!(LocalDetector { Mrc => "mrc", LMmse => "l-mmse", LpMmse => "lp-mmse", LpMmseFull => "lp-mmse-full" });
named!(CentralDetector { Mrc => "mrc", Mmse => "mmse", PMmse => "p-mmse", PMmseOriginal => "p-mmse-original" });

/// MR combining: the estimate itself.
pub fn mrc_local(h_hat: &CVec) -> CVec {
    h_hat.clone()
}

/// `p (h_hat h_hat^H + R - C_hat)` accumulated with weight `(1 - rho_ad)^2`.
fn add_estimated(acc: &mut CMat, dep: &Deployment, sample: &JointSample, i: usize, l: usize) {
    let p = dep.quant.adc_gain_sq() * dep.pdd(i);
    if p == 0.0 {
        return;
    }
    let h = sample.h_hat(i, l);
    *acc += (linalg::outer(h, h) + &dep.stats.link(i, l).r - dep.ctx.c_hat(i, l)) * real(p);
}

/// L-MMSE system matrix at AP `l` (shared by every UE it serves).
pub fn l_mmse_matrix(l: usize, sample: &JointSample, dep: &Deployment) -> CMat {
    let mut a = dep.ctx.c_n[l].clone();
    for i in 0..dep.num_ues() {
        add_estimated(&mut a, dep, sample, i, l);
    }
    linalg::hermitize(&mut a);
    a
}

/// LP-MMSE system matrix at AP `l`. With `full`, every served UE counts as
/// primary-served.
pub fn lp_mmse_matrix(l: usize, sample: &JointSample, dep: &Deployment, full: bool) -> CMat {
    let (q, n) = (&dep.quant, dep.antennas());
    let (ra, rd) = (q.rho_ad, q.rho_da);
    let served = &dep.clusters.served[l];
    let mut a = linalg::identity(n) * real((1.0 - ra) * dep.sigma2);
    let moment = crate::quantization::weighted_second_moment(l, &dep.stats, &dep.powers.effective, served.iter().copied());
    a += &moment * real((1.0 - ra).powi(2) * rd / (1.0 - rd));
    a += linalg::diag_part(&moment) * real(ra * (1.0 - ra) / (1.0 - rd));
    let (estimated, statistical): (&[usize], &[usize]) = if full {
        (served, &[])
    } else {
        (&dep.clusters.served_primary[l], &dep.clusters.served_secondary[l])
    };
    for &i in estimated {
        add_estimated(&mut a, dep, sample, i, l);
    }
    for &i in statistical {
        a += dep.stats.link(i, l).second_moment() * real(q.adc_gain_sq() * dep.pdd(i));
    }
    linalg::hermitize(&mut a);
    a
}

/// L-MMSE combiner of link `(k, l)`.
pub fn l_mmse_local(k: usize, l: usize, sample: &JointSample, dep: &Deployment) -> Result<CVec> {
    linalg::solve_hermitian(&l_mmse_matrix(l, sample, dep), sample.h_hat(k, l), "L-MMSE combiner")
}

/// LP-MMSE combiner of link `(k, l)`; `k` must be served by `l`.
pub fn lp_mmse_local(k: usize, l: usize, sample: &JointSample, dep: &Deployment, full: bool) -> Result<CVec> {
    if !dep.clusters.serves(k, l) {
        return Err(Error::Cluster(format!("UE {k} is not served by AP {l}")));
    }
    linalg::solve_hermitian(&lp_mmse_matrix(l, sample, dep, full), sample.h_hat(k, l), "LP-MMSE combiner")
}

/// Every local combiner `v_kl` for `l ∈ M_k`, laid out `[k][position in M_k]`.
/// System matrices are factored once per AP.
pub fn local_combiners(dep: &Deployment, sample: &JointSample, detector: LocalDetector) -> Result<Vec<Vec<CVec>>> {
    let clusters = &dep.clusters;
    let mut out: Vec<Vec<CVec>> = clusters.serving.iter().map(|m| Vec::with_capacity(m.len())).collect();
    if detector == LocalDetector::Mrc {
        for (k, m) in clusters.serving.iter().enumerate() {
            for &l in m {
                out[k].push(mrc_local(sample.h_hat(k, l)));
            }
        }
        return Ok(out);
    }
    let mut per_ap: Vec<Vec<(usize, CVec)>> = vec![Vec::new(); dep.num_aps()];
    for (l, ues) in clusters.served.iter().enumerate() {
        if ues.is_empty() {
            continue;
        }
        let a = match detector {
            LocalDetector::LMmse => l_mmse_matrix(l, sample, dep),
            LocalDetector::LpMmse => lp_mmse_matrix(l, sample, dep, false),
            LocalDetector::LpMmseFull => lp_mmse_matrix(l, sample, dep, true),
            LocalDetector::Mrc => unreachable!(),
        };
        let rhs = CMat::from_columns(&ues.iter().map(|&k| sample.h_hat(k, l).clone()).collect::<Vec<_>>());
        let sol = solve_columns(&a, &rhs, "local combiner")?;
        per_ap[l] = ues.iter().enumerate().map(|(c, &k)| (k, sol.column(c).into_owned())).collect();
    }
    for (k, m) in clusters.serving.iter().enumerate() {
        for &l in m {
            let v = per_ap[l].iter().find(|(i, _)| *i == k).map(|(_, v)| v.clone()).expect("served UE");
            out[k].push(v);
        }
    }
    Ok(out)
}

/// Solves `A X = B` for Hermitian positive definite `A`, falling back to the
/// column-wise robust solver.
fn solve_columns(a: &CMat, b: &CMat, context: &'static str) -> Result<CMat> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|z| z.is_finite()) {
            return Ok(x);
        }
    }
    let cols = (0..b.ncols())
        .map(|c| linalg::solve_hermitian(a, &b.column(c).into_owned(), context))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMat::from_columns(&cols))
}

/// Centralized combiner supported on the serving blocks of one UE.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedCombiner {
    /// Serving APs, ascending; block `j` of `v` belongs to `aps[j]`.
    pub aps: Vec<usize>,
    pub v: CVec,
}

impl StackedCombiner {
    /// Full `L N` vector, zero outside the serving blocks.
    pub fn to_full(&self, num_aps: usize, antennas: usize) -> CVec {
        let mut full = CVec::zeros(num_aps * antennas);
        for (j, &l) in self.aps.iter().enumerate() {
            full.rows_mut(l * antennas, antennas).copy_from(&self.v.rows(j * antennas, antennas));
        }
        full
    }
}

/// `[x_{l} | l ∈ aps]` stacked.
pub fn restrict(sample: &JointSample, i: usize, aps: &[usize], estimate: bool) -> CVec {
    let parts: Vec<&CVec> = aps
        .iter()
        .map(|&l| if estimate { sample.h_hat(i, l) } else { sample.h(i, l) })
        .collect();
    linalg::stack(&parts)
}

fn add_block(acc: &mut CMat, j: usize, n: usize, block: &CMat, scale: f64) {
    let mut view = acc.view_mut((j * n, j * n), (n, n));
    view += block * real(scale);
}

/// Centralized system matrix for UE `k` on its serving blocks.
pub fn central_matrix(k: usize, sample: &JointSample, dep: &Deployment, detector: CentralDetector) -> CMat {
    let aps = &dep.clusters.serving[k];
    let n = dep.antennas();
    let dim = aps.len() * n;
    let g = dep.quant.adc_gain_sq();
    let mut a = CMat::zeros(dim, dim);
    match detector {
        CentralDetector::Mrc => unreachable!("MRC has no system matrix"),
        CentralDetector::Mmse => {
            for i in 0..dep.num_ues() {
                let p = g * dep.pdd(i);
                if p != 0.0 {
                    let h = restrict(sample, i, aps, true);
                    a += linalg::outer(&h, &h) * real(p);
                }
            }
            for (j, &l) in aps.iter().enumerate() {
                add_block(&mut a, j, n, &dep.residual[l], 1.0);
            }
        }
        CentralDetector::PMmse | CentralDetector::PMmseOriginal => {
            let (ra, rd) = (dep.quant.rho_ad, dep.quant.rho_da);
            let overlap = &dep.clusters.overlap[k];
            let near = &dep.clusters.served[dep.clusters.primary[k]];
            for &i in overlap {
                let p = g * dep.pdd(i);
                if p == 0.0 {
                    continue;
                }
                let estimated = detector == CentralDetector::PMmseOriginal || near.binary_search(&i).is_ok();
                if estimated {
                    let h = restrict(sample, i, aps, true);
                    a += linalg::outer(&h, &h) * real(p);
                    for (j, &l) in aps.iter().enumerate() {
                        add_block(&mut a, j, n, &(&dep.stats.link(i, l).r - dep.ctx.c_hat(i, l)), p);
                    }
                } else {
                    let parts: Vec<&CVec> = aps.iter().map(|&l| &dep.stats.link(i, l).h_bar).collect();
                    let hb = linalg::stack(&parts);
                    a += linalg::outer(&hb, &hb) * real(p);
                    for (j, &l) in aps.iter().enumerate() {
                        add_block(&mut a, j, n, &dep.stats.link(i, l).r, p);
                    }
                }
            }
            for (j, &l) in aps.iter().enumerate() {
                let moment = crate::quantization::weighted_second_moment(
                    l,
                    &dep.stats,
                    &dep.powers.effective,
                    overlap.iter().copied(),
                );
                let mut block = &moment * real((1.0 - ra).powi(2) * rd / (1.0 - rd))
                    + linalg::diag_part(&moment) * real(ra * (1.0 - ra) / (1.0 - rd));
                for d in 0..n {
                    block[(d, d)] += real((1.0 - ra) * dep.sigma2);
                }
                add_block(&mut a, j, n, &block, 1.0);
            }
        }
    }
    linalg::hermitize(&mut a);
    a
}

/// Centralized combiner of UE `k`, solved on its serving-block subspace.
pub fn central_combiner(
    k: usize,
    sample: &JointSample,
    dep: &Deployment,
    detector: CentralDetector,
) -> Result<StackedCombiner> {
    let aps = dep.clusters.serving[k].clone();
    if aps.is_empty() {
        return Err(Error::Cluster(format!("UE {k} has no serving AP")));
    }
    let rhs = restrict(sample, k, &aps, true);
    let v = match detector {
        CentralDetector::Mrc => rhs,
        _ => linalg::solve_hermitian(&central_matrix(k, sample, dep, detector), &rhs, "centralized combiner")?,
    };
    Ok(StackedCombiner { aps, v })
}

/// MMSE combiner of UE `k`.
pub fn mmse_centralized(k: usize, sample: &JointSample, dep: &Deployment) -> Result<StackedCombiner> {
    central_combiner(k, sample, dep, CentralDetector::Mmse)
}

/// P-MMSE combiner of UE `k`; `original` uses estimates for all of `Q_k`.
pub fn p_mmse_centralized(k: usize, sample: &JointSample, dep: &Deployment, original: bool) -> Result<StackedCombiner> {
    let d = if original { CentralDetector::PMmseOriginal } else { CentralDetector::PMmse };
    central_combiner(k, sample, dep, d)
}

/// Estimate vectors a local detector consumes at AP `l`, times `N (N + tau)`.
pub fn local_ce_multiplications(dep: &Deployment, detector: LocalDetector, l: usize) -> u64 {
    let n = dep.antennas() as u64;
    let per = n * (n + dep.tau() as u64);
    let c = &dep.clusters;
    per * match detector {
        LocalDetector::Mrc => c.served[l].len(),
        LocalDetector::LMmse => dep.num_ues(),
        LocalDetector::LpMmse => c.served_primary[l].len(),
        LocalDetector::LpMmseFull => c.served[l].len(),
    } as u64
}

/// Estimate vectors a centralized detector consumes for UE `k` (one per UE
/// per serving AP), times `N (N + tau)`.
pub fn central_ce_multiplications(dep: &Deployment, detector: CentralDetector, k: usize) -> u64 {
    let n = dep.antennas() as u64;
    let per = n * (n + dep.tau() as u64);
    let c = &dep.clusters;
    let near = &c.served[c.primary[k]];
    let users = match detector {
        CentralDetector::Mrc => 1,
        CentralDetector::Mmse => dep.num_ues(),
        CentralDetector::PMmse => c.overlap[k].iter().filter(|i| near.binary_search(i).is_ok()).count(),
        CentralDetector::PMmseOriginal => c.overlap[k].len(),
    };
    per * users as u64 * c.serving[k].len() as u64
}
