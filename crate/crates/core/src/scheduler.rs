//! AP clustering, pilot assignment and fractional power control, plus the
//! complex-multiplication accounting of the combining and weighting schemes.

use serde::{Deserialize, Serialize};

use crate::channel::{linear_to_db, ChannelStatistics};
use crate::pilots::PilotPlan;
use crate::{Error, Result};

/// Which APs serve which UEs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterPlan {
    pub num_aps: usize,
    /// Primary AP of every UE.
    pub primary: Vec<usize>,
    /// Serving set of every UE, ascending.
    pub serving: Vec<Vec<usize>>,
    /// UEs served by every AP, ascending.
    pub served: Vec<Vec<usize>>,
    /// UEs for which the AP is the primary AP.
    pub served_primary: Vec<Vec<usize>>,
    /// UEs for which the AP is a secondary AP.
    pub served_secondary: Vec<Vec<usize>>,
    /// UEs whose serving set intersects that of each UE (the UE included).
    pub overlap: Vec<Vec<usize>>,
}

impl ClusterPlan {
    /// Derives every set from the primary APs and serving sets.
    pub fn new(num_aps: usize, primary: Vec<usize>, serving: Vec<Vec<usize>>) -> Result<Self> {
        if primary.len() != serving.len() {
            return Err(Error::Cluster("primary and serving lengths differ".into()));
        }
        let k_count = primary.len();
        let mut mask = vec![false; k_count * num_aps];
        let mut serving_sorted = Vec::with_capacity(k_count);
        for (k, set) in serving.into_iter().enumerate() {
            let mut set = set;
            set.sort_unstable();
            set.dedup();
            if set.iter().any(|&l| l >= num_aps) {
                return Err(Error::Cluster(format!("UE {k} served by an unknown AP")));
            }
            if set.binary_search(&primary[k]).is_err() {
                return Err(Error::Cluster(format!("primary AP of UE {k} is not in its serving set")));
            }
            for &l in &set {
                mask[k * num_aps + l] = true;
            }
            serving_sorted.push(set);
        }
        let mut served = vec![Vec::new(); num_aps];
        let mut served_primary = vec![Vec::new(); num_aps];
        let mut served_secondary = vec![Vec::new(); num_aps];
        for (k, set) in serving_sorted.iter().enumerate() {
            for &l in set {
                served[l].push(k);
                if primary[k] == l {
                    served_primary[l].push(k);
                } else {
                    served_secondary[l].push(k);
                }
            }
        }
        let overlap = (0..k_count)
            .map(|k| {
                (0..k_count)
                    .filter(|&i| serving_sorted[k].iter().any(|&l| mask[i * num_aps + l]))
                    .collect()
            })
            .collect();
        Ok(ClusterPlan {
            num_aps,
            primary,
            serving: serving_sorted,
            served,
            served_primary,
            served_secondary,
            overlap,
        })
    }

    /// Every AP serves every UE; primaries are the strongest APs.
    pub fn full(stats: &ChannelStatistics) -> Self {
        let l_count = stats.num_aps();
        let primary = (0..stats.num_ues()).map(|k| strongest_ap(stats, k, 0..l_count)).collect();
        let serving = vec![(0..l_count).collect(); stats.num_ues()];
        ClusterPlan::new(l_count, primary, serving).expect("full plan is consistent")
    }

    pub fn num_ues(&self) -> usize {
        self.primary.len()
    }

    pub fn serves(&self, k: usize, l: usize) -> bool {
        self.serving[k].binary_search(&l).is_ok()
    }

    /// Position of AP `l` inside the serving set of UE `k`.
    pub fn position(&self, k: usize, l: usize) -> Option<usize> {
        self.serving[k].binary_search(&l).ok()
    }

    /// Checks the structural invariants; with `pilots`, also that each AP
    /// serves at most one secondary UE per pilot.
    pub fn validate(&self, pilots: Option<&PilotPlan>) -> Result<()> {
        for (k, set) in self.serving.iter().enumerate() {
            if !set.contains(&self.primary[k]) {
                return Err(Error::Cluster(format!("UE {k} lacks its primary AP")));
            }
        }
        for l in 0..self.num_aps {
            let (p, s) = (&self.served_primary[l], &self.served_secondary[l]);
            if p.iter().any(|k| s.contains(k)) {
                return Err(Error::Cluster(format!("AP {l} has overlapping primary/secondary sets")));
            }
            let mut union: Vec<usize> = p.iter().chain(s).copied().collect();
            union.sort_unstable();
            if union != self.served[l] {
                return Err(Error::Cluster(format!("AP {l} partition does not cover its served set")));
            }
            if let Some(plan) = pilots {
                let mut seen = vec![false; plan.tau];
                for &k in s {
                    let t = plan.pilot(k);
                    if seen[t] {
                        return Err(Error::Cluster(format!("AP {l} serves two secondary UEs on pilot {t}")));
                    }
                    seen[t] = true;
                }
            }
        }
        for k in 0..self.num_ues() {
            if !self.overlap[k].contains(&k) {
                return Err(Error::Cluster(format!("UE {k} missing from its own overlap set")));
            }
            for &i in &self.overlap[k] {
                if !self.overlap[i].contains(&k) {
                    return Err(Error::Cluster(format!("overlap of UEs {k} and {i} is not symmetric")));
                }
            }
        }
        Ok(())
    }
}

/// Lowest-index argmax of `beta_kl` over `aps`.
pub fn strongest_ap(stats: &ChannelStatistics, k: usize, aps: impl IntoIterator<Item = usize>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for l in aps {
        let b = stats.beta(k, l);
        if best.is_none_or(|(_, v)| b > v) {
            best = Some((l, b));
        }
    }
    best.expect("non-empty AP set").0
}

/// Per-UE transmit powers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerPlan {
    pub p_max: f64,
    pub nu: f64,
    /// DAC-scaled powers `(1 - rho_da) p_k`.
    pub effective: Vec<f64>,
}

impl PowerPlan {
    pub fn equal(num_ues: usize, p_max: f64, rho_da: f64) -> Self {
        PowerPlan {
            p_max,
            nu: 0.0,
            effective: vec![p_max * (1.0 - rho_da); num_ues],
        }
    }

    /// `p (1 - rho_da) min_{i in Q_k} (sum_{M_i} beta)^nu / (sum_{M_k} beta)^nu`.
    pub fn fractional(
        stats: &ChannelStatistics,
        clusters: &ClusterPlan,
        p_max: f64,
        rho_da: f64,
        nu: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::invalid("nu", "must lie in [0, 1]"));
        }
        let gain: Vec<f64> = (0..clusters.num_ues())
            .map(|k| clusters.serving[k].iter().map(|&l| stats.beta(k, l)).sum::<f64>().powf(nu))
            .collect();
        let effective = (0..clusters.num_ues())
            .map(|k| {
                let floor = clusters.overlap[k]
                    .iter()
                    .map(|&i| gain[i])
                    .fold(f64::INFINITY, f64::min);
                p_max * (1.0 - rho_da) * floor / gain[k]
            })
            .collect();
        Ok(PowerPlan { p_max, nu, effective })
    }

    pub fn num_ues(&self) -> usize {
        self.effective.len()
    }
}

/// Parameters of the joint clustering / pilot / power algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub tau: usize,
    pub iterations: usize,
    /// Secondary-AP threshold in dB (negative).
    pub eta_db: f64,
    pub nu: f64,
    /// Candidate radius for primary APs; `None` admits every AP.
    pub d_bar: Option<f64>,
    pub p_max: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            tau: 10,
            iterations: 2,
            eta_db: -20.0,
            nu: 0.8,
            d_bar: None,
            p_max: 0.1,
        }
    }
}

/// Output of [`run_algorithm1`].
#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    pub clusters: ClusterPlan,
    pub pilots: PilotPlan,
    pub powers: PowerPlan,
    /// `|L_k(d_bar)|` per UE.
    pub candidate_sizes: Vec<usize>,
}

/// Joint AP cluster formation, pilot assignment and fractional power control.
///
/// Ties in every argmax/argmin go to the lowest index.
pub fn run_algorithm1(stats: &ChannelStatistics, cfg: &SchedulerConfig, rho_da: f64) -> Result<Schedule> {
    if cfg.tau == 0 {
        return Err(Error::invalid("tau", "pilot length must be at least 1"));
    }
    if cfg.iterations == 0 {
        return Err(Error::invalid("iterations", "must be at least 1"));
    }
    if !(cfg.p_max > 0.0) {
        return Err(Error::invalid("p_max", "must be positive"));
    }
    let (k_count, l_count, tau) = (stats.num_ues(), stats.num_aps(), cfg.tau);
    let scenario = &stats.scenario;

    let mut candidate_sizes = Vec::with_capacity(k_count);
    let mut primary = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let candidates: Vec<usize> = match cfg.d_bar {
            None => (0..l_count).collect(),
            Some(r) => (0..l_count).filter(|&l| scenario.distance(k, l) <= r).collect(),
        };
        if candidates.is_empty() {
            return Err(Error::invalid("d_bar", format!("no candidate AP within range of UE {k}")));
        }
        candidate_sizes.push(candidates.len());
        primary.push(strongest_ap(stats, k, candidates));
    }

    let mut pdd = vec![cfg.p_max * (1.0 - rho_da); k_count];
    let mut assignment = vec![0; k_count];
    let mut result = None;
    for _ in 0..cfg.iterations {
        // Pilots, given the current powers.
        for k in 0..k_count {
            let t = if k < tau {
                k
            } else {
                let lm = primary[k];
                let metric = |t: usize| -> f64 {
                    (0..k)
                        .filter(|&i| assignment[i] == t)
                        .map(|i| tau as f64 * pdd[i] * stats.link(i, lm).beta_nlos)
                        .sum()
                };
                let mut best = (0, metric(0));
                for t in 1..tau {
                    let m = metric(t);
                    if m < best.1 {
                        best = (t, m);
                    }
                }
                best.0
            };
            assignment[k] = t;
        }
        let serving = assign_secondary(stats, &primary, &assignment, &pdd, tau, cfg.eta_db);
        let clusters = ClusterPlan::new(l_count, primary.clone(), serving)?;
        let powers = PowerPlan::fractional(stats, &clusters, cfg.p_max, rho_da, cfg.nu)?;
        pdd.clone_from(&powers.effective);
        result = Some((clusters, powers));
    }
    let (clusters, powers) = result.expect("at least one iteration");
    let pilots = PilotPlan::new(tau, assignment)?;
    Ok(Schedule {
        clusters,
        pilots,
        powers,
        candidate_sizes,
    })
}

/// Serving sets grown from the primaries: each AP takes, per pilot, the co-pilot UE with the
/// largest `pdd * beta` unless one already uses it, subject to the `eta_db` margin against
/// that UE's primary link.
pub fn assign_secondary(
    stats: &ChannelStatistics,
    primary: &[usize],
    assignment: &[usize],
    pdd: &[f64],
    tau: usize,
    eta_db: f64,
) -> Vec<Vec<usize>> {
    let (k_count, l_count) = (stats.num_ues(), stats.num_aps());
    let mut serving: Vec<Vec<usize>> = primary.iter().map(|&l| vec![l]).collect();
    for l in 0..l_count {
        for t in 0..tau {
            let users: Vec<usize> = (0..k_count).filter(|&i| assignment[i] == t).collect();
            if users.is_empty() || users.iter().any(|&i| serving[i].contains(&l)) {
                continue;
            }
            let mut best = users[0];
            for &i in &users[1..] {
                if pdd[i] * stats.beta(i, l) > pdd[best] * stats.beta(best, l) {
                    best = i;
                }
            }
            let margin = linear_to_db(stats.beta(best, l)) - linear_to_db(stats.beta(best, primary[best]));
            if margin >= eta_db {
                serving[best].push(l);
            }
        }
    }
    serving
}

/// Complex multiplications and divisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub cm: u64,
    pub cd: u64,
}

/// Cost of a partial LSFD vector given `|M_k|`, the number of UEs entering the
/// statistics sum and the number of co-pilot UEs among them.
pub fn weighting_cost(m: u64, users: u64, copilot_users: u64) -> OpCount {
    let cm = m * (m + 1) * users / 2 + m * (5 * m + 1) * copilot_users / 2 + (m * m * m + 3 * m * m - m) / 3;
    OpCount { cm, cd: m }
}

/// P-LSFD cost for UE `k`: sums over `Q_k` and `P_k ∩ Q_k`.
pub fn cc_plsfd(clusters: &ClusterPlan, pilots: &PilotPlan, k: usize) -> OpCount {
    let q = &clusters.overlap[k];
    let pq = q.iter().filter(|&&i| pilots.shares_pilot(k, i)).count();
    weighting_cost(clusters.serving[k].len() as u64, q.len() as u64, pq as u64)
}

/// LSFD cost for UE `k`: sums over all `K` UEs and all of `P_k`.
pub fn cc_lsfd(clusters: &ClusterPlan, pilots: &PilotPlan, k: usize) -> OpCount {
    weighting_cost(
        clusters.serving[k].len() as u64,
        clusters.num_ues() as u64,
        pilots.copilots(k).len() as u64,
    )
}

/// The all-ones weighting costs nothing.
pub fn cc_l2_lsfd() -> OpCount {
    OpCount { cm: 0, cd: 0 }
}

/// Detector variants whose channel-estimation cost is tallied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeDetector {
    /// LP-MMSE with estimates only for primary-served UEs (index is the AP).
    LpMmse,
    /// LP-MMSE with estimates for every served UE (index is the AP).
    LpMmseOriginal,
    /// P-MMSE with estimates for `Q_k ∩ N_{l_k^M}` (index is the UE).
    PMmse,
    /// P-MMSE with estimates for all of `Q_k` (index is the UE).
    PMmseOriginal,
}

impl std::str::FromStr for CeDetector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp-mmse" => Ok(CeDetector::LpMmse),
            "lp-mmse-original" => Ok(CeDetector::LpMmseOriginal),
            "p-mmse" => Ok(CeDetector::PMmse),
            "p-mmse-original" => Ok(CeDetector::PMmseOriginal),
            other => Err(Error::Unknown {
                kind: "detector",
                name: other.to_string(),
            }),
        }
    }
}

/// Complex multiplications spent on channel estimation for a detector:
/// `N (N + tau)` per estimate vector it consumes.
pub fn cc_detector_ce(clusters: &ClusterPlan, detector: CeDetector, index: usize, n: u64, tau: u64) -> u64 {
    let per = n * (n + tau);
    match detector {
        CeDetector::LpMmse => per * clusters.served_primary[index].len() as u64,
        CeDetector::LpMmseOriginal => per * clusters.served[index].len() as u64,
        CeDetector::PMmse => {
            let lm = clusters.primary[index];
            let both = clusters.overlap[index]
                .iter()
                .filter(|&&i| clusters.served[lm].binary_search(&i).is_ok())
                .count();
            per * both as u64 * clusters.serving[index].len() as u64
        }
        CeDetector::PMmseOriginal => {
            per * clusters.overlap[index].len() as u64 * clusters.serving[index].len() as u64
        }
    }
}

/// `sum_k |L_k(d_bar)| + (K - tau + L + 1) tau + sum_i |Q_i|`.
pub fn algorithm1_complexity(clusters: &ClusterPlan, candidate_sizes: &[usize], tau: usize) -> i64 {
    let k = clusters.num_ues() as i64;
    let l = clusters.num_aps as i64;
    let tau = tau as i64;
    let candidates: i64 = candidate_sizes.iter().map(|&c| c as i64).sum();
    let overlaps: i64 = clusters.overlap.iter().map(|q| q.len() as i64).sum();
    candidates + (k - tau + l + 1) * tau + overlaps
}
