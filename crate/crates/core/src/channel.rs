//! Network geometry and per-link channel statistics.
//!
//! Each UE–AP link carries a large-scale gain `beta` split into a LOS part
//! (deterministic half-wavelength ULA steering vector) and an NLOS part whose
//! spatial covariance follows the Gaussian local scattering model.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, real};
use crate::rng::{self, SimRng};
use crate::{CMat, CVec, Error, Result, C64};

/// Pathloss intercept at the 1 m reference distance, in dB.
pub const PATHLOSS_AT_1M_DB: f64 = -30.5;
/// Pathloss exponent times ten.
pub const PATHLOSS_SLOPE_DB: f64 = 36.7;
/// Distances are floored here to keep the log-distance law finite.
pub const MIN_DISTANCE_M: f64 = 1.0;
/// The correlation integral is truncated at this many angular standard deviations.
pub const ANGULAR_SPAN_SIGMAS: f64 = 20.0;

const QUAD_START_NODES: usize = 64;
const QUAD_MAX_NODES: usize = 16_384;
const QUAD_REL_TOL: f64 = 1e-10;

/// Sizes of a deployment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas: usize,
    pub area_side: f64,
}

/// Node placement inside a square area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area_side: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub antennas: usize,
}

impl Scenario {
    /// Validates a hand-built placement.
    pub fn new(
        area_side: f64,
        ap_positions: Vec<[f64; 2]>,
        ue_positions: Vec<[f64; 2]>,
        antennas: usize,
    ) -> Result<Self> {
        if !(area_side > 0.0) {
            return Err(Error::invalid("area_side", "must be positive"));
        }
        if ap_positions.is_empty() {
            return Err(Error::invalid("num_aps", "at least one AP is required"));
        }
        if ue_positions.is_empty() {
            return Err(Error::invalid("num_ues", "at least one UE is required"));
        }
        if antennas == 0 {
            return Err(Error::invalid("antennas", "at least one antenna per AP"));
        }
        let inside = |p: &[f64; 2]| p.iter().all(|c| (0.0..=area_side).contains(c));
        if !ap_positions.iter().chain(&ue_positions).all(inside) {
            return Err(Error::invalid("positions", "node outside the square area"));
        }
        Ok(Scenario {
            area_side,
            ap_positions,
            ue_positions,
            antennas,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    /// UE–AP distance, floored at [`MIN_DISTANCE_M`].
    pub fn distance(&self, ue: usize, ap: usize) -> f64 {
        let (u, a) = (self.ue_positions[ue], self.ap_positions[ap]);
        (u[0] - a[0]).hypot(u[1] - a[1]).max(MIN_DISTANCE_M)
    }

    /// Bearing from the AP to the UE in the plane, used as the nominal AoA.
    pub fn bearing(&self, ue: usize, ap: usize) -> f64 {
        let (u, a) = (self.ue_positions[ue], self.ap_positions[ap]);
        (u[1] - a[1]).atan2(u[0] - a[0])
    }
}

/// Uniform i.i.d. placement of APs and UEs over the square.
pub fn generate_scenario(params: &ScenarioParams, seed: u64) -> Result<Scenario> {
    if params.num_aps == 0 || params.num_ues == 0 || params.antennas == 0 {
        return Err(Error::invalid("dimensions", "L, K and N must be positive"));
    }
    if !(params.area_side > 0.0) {
        return Err(Error::invalid("area_side", "must be positive"));
    }
    let mut rng = rng::stream(seed, "geometry", 0);
    let side = params.area_side;
    let mut draw = |n: usize| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
            .collect()
    };
    let ap_positions = draw(params.num_aps);
    let ue_positions = draw(params.num_ues);
    Scenario::new(side, ap_positions, ue_positions, params.antennas)
}

/// Large-scale gain (linear) for a distance in metres and a shadowing term in dB.
pub fn large_scale_fading(distance: f64, shadow_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid("distance", "must be positive"));
    }
    let db = PATHLOSS_AT_1M_DB - PATHLOSS_SLOPE_DB * distance.log10() + shadow_db;
    Ok(db_to_linear(db))
}

/// Distance-dependent Rician factor, `13 - 0.03 d` in dB, returned linear.
pub fn rician_factor(distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid("distance", "must be positive"));
    }
    Ok(db_to_linear(13.0 - 0.03 * distance))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Half-wavelength ULA response scaled by `sqrt(beta_los)`.
pub fn los_steering(theta: f64, antennas: usize, beta_los: f64) -> CVec {
    let amp = beta_los.max(0.0).sqrt();
    let phase = -PI * theta.sin();
    CVec::from_fn(antennas, |n, _| C64::from_polar(amp, n as f64 * phase))
}

fn legendre_nodes(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    let computed = Arc::new(gauss_legendre(n));
    cache.lock().unwrap().insert(n, computed.clone());
    computed
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            deriv = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / deriv;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// First column `c_m = E[exp(j pi m sin(theta + delta))]`, m = 0..N-1, of the
/// Toeplitz correlation, using `nodes` Gauss–Legendre points.
fn correlation_column(theta: f64, asd: f64, antennas: usize, nodes: usize) -> Vec<C64> {
    let rule = legendre_nodes(nodes);
    let half = ANGULAR_SPAN_SIGMAS * asd;
    let norm = 1.0 / ((2.0 * PI).sqrt() * asd);
    let mut col = vec![C64::new(0.0, 0.0); antennas];
    for (&x, &w) in rule.0.iter().zip(&rule.1) {
        let delta = half * x;
        let weight = half * w * norm * (-delta * delta / (2.0 * asd * asd)).exp();
        let phase = PI * (theta + delta).sin();
        for (m, c) in col.iter_mut().enumerate() {
            *c += C64::from_polar(weight, m as f64 * phase);
        }
    }
    col
}

/// NLOS spatial correlation under Gaussian local scattering around `theta`
/// with angular standard deviation `asd` (radians), scaled by `beta_nlos`.
///
/// The node count doubles until successive columns agree to 1e-10 relative.
pub fn spatial_correlation(theta: f64, asd: f64, beta_nlos: f64, antennas: usize) -> Result<CMat> {
    if !(asd > 0.0) {
        return Err(Error::invalid("asd", "angular spread must be positive"));
    }
    if antennas == 0 {
        return Err(Error::invalid("antennas", "must be positive"));
    }
    if beta_nlos == 0.0 {
        return Ok(linalg::zeros(antennas));
    }
    let mut nodes = QUAD_START_NODES;
    let mut prev = correlation_column(theta, asd, antennas, nodes);
    let col = loop {
        nodes *= 2;
        let next = correlation_column(theta, asd, antennas, nodes);
        let change = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if change < QUAD_REL_TOL {
            break next;
        }
        if nodes >= QUAD_MAX_NODES {
            return Err(Error::QuadratureNotConverged {
                nodes,
                last_change: change,
            });
        }
        prev = next;
    };
    let mut r = CMat::from_fn(antennas, antennas, |i, j| {
        if i >= j {
            col[i - j]
        } else {
            col[j - i].conj()
        }
    });
    r *= real(beta_nlos);
    linalg::hermitize(&mut r);
    linalg::psd_repair(&r)
}

/// Fading regime of the NLOS/LOS split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FadingMode {
    #[default]
    Rician,
    /// All links have `kappa = 0`.
    Rayleigh,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Angular standard deviation in radians.
    pub asd: f64,
    pub shadow_std_db: f64,
    pub mode: FadingMode,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams {
            asd: 15f64.to_radians(),
            shadow_std_db: 4.0,
            mode: FadingMode::Rician,
        }
    }
}

/// Statistics of one UE–AP link.
#[derive(Clone, Debug)]
pub struct LinkStatistics {
    pub beta: f64,
    pub kappa: f64,
    pub theta: f64,
    pub beta_los: f64,
    pub beta_nlos: f64,
    pub h_bar: CVec,
    pub r: CMat,
    /// Hermitian square root of `r`, used for sampling.
    pub r_sqrt: CMat,
}

impl LinkStatistics {
    pub fn new(beta: f64, kappa: f64, theta: f64, asd: f64, antennas: usize) -> Result<Self> {
        if !(beta >= 0.0) || !(kappa >= 0.0) {
            return Err(Error::invalid("beta/kappa", "must be non-negative"));
        }
        let beta_los = beta * kappa / (kappa + 1.0);
        let beta_nlos = beta / (kappa + 1.0);
        let r = spatial_correlation(theta, asd, beta_nlos, antennas)?;
        Self::from_parts(beta, kappa, theta, los_steering(theta, antennas, beta_los), r)
    }

    /// Link with an explicit correlation matrix (validated PSD).
    pub fn from_parts(beta: f64, kappa: f64, theta: f64, h_bar: CVec, r: CMat) -> Result<Self> {
        if h_bar.len() != r.nrows() || !r.is_square() {
            return Err(Error::invalid("r", "dimension mismatch with h_bar"));
        }
        let r = linalg::psd_repair(&r)?;
        let r_sqrt = linalg::psd_sqrt(&r)?;
        Ok(LinkStatistics {
            beta,
            kappa,
            theta,
            beta_los: beta * kappa / (kappa + 1.0),
            beta_nlos: beta / (kappa + 1.0),
            h_bar,
            r,
            r_sqrt,
        })
    }

    pub fn antennas(&self) -> usize {
        self.h_bar.len()
    }

    /// `E[h h^H] = h_bar h_bar^H + R`.
    pub fn second_moment(&self) -> CMat {
        linalg::outer(&self.h_bar, &self.h_bar) + &self.r
    }
}

/// `h_bar + R^{1/2} w`, `w ~ CN(0, I)`.
pub fn sample_channel<R: Rng + ?Sized>(link: &LinkStatistics, rng: &mut R) -> CVec {
    &link.h_bar + rng::correlated_normal(rng, &link.r_sqrt)
}

/// All link statistics of a deployment, indexed `(ue, ap)`.
#[derive(Clone, Debug)]
pub struct ChannelStatistics {
    pub scenario: Scenario,
    links: Vec<LinkStatistics>,
}

impl ChannelStatistics {
    /// Draws shadowing and builds every link from the geometry.
    pub fn generate(scenario: Scenario, fading: &FadingParams, seed: u64) -> Result<Self> {
        if !(fading.shadow_std_db >= 0.0) {
            return Err(Error::invalid("shadow_std_db", "must be non-negative"));
        }
        let mut rng: SimRng = rng::stream(seed, "shadowing", 0);
        let shadow = Normal::new(0.0, fading.shadow_std_db)
            .map_err(|e| Error::invalid("shadow_std_db", e.to_string()))?;
        let (k_count, l_count) = (scenario.num_ues(), scenario.num_aps());
        let mut params = Vec::with_capacity(k_count * l_count);
        for k in 0..k_count {
            for l in 0..l_count {
                let d = scenario.distance(k, l);
                let beta = large_scale_fading(d, shadow.sample(&mut rng))?;
                let kappa = match fading.mode {
                    FadingMode::Rician => rician_factor(d)?,
                    FadingMode::Rayleigh => 0.0,
                };
                params.push((beta, kappa, scenario.bearing(k, l)));
            }
        }
        let n = scenario.antennas;
        let links = params
            .into_iter()
            .map(|(beta, kappa, theta)| LinkStatistics::new(beta, kappa, theta, fading.asd, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelStatistics { scenario, links })
    }

    /// Builds from explicit links laid out UE-major (`ue * L + ap`).
    pub fn from_links(scenario: Scenario, links: Vec<LinkStatistics>) -> Result<Self> {
        let expected = scenario.num_ues() * scenario.num_aps();
        if links.len() != expected {
            return Err(Error::invalid(
                "links",
                format!("expected {expected} links, got {}", links.len()),
            ));
        }
        if links.iter().any(|l| l.antennas() != scenario.antennas) {
            return Err(Error::invalid("links", "antenna count mismatch"));
        }
        Ok(ChannelStatistics { scenario, links })
    }

    pub fn num_ues(&self) -> usize {
        self.scenario.num_ues()
    }

    pub fn num_aps(&self) -> usize {
        self.scenario.num_aps()
    }

    pub fn antennas(&self) -> usize {
        self.scenario.antennas
    }

    pub fn link(&self, ue: usize, ap: usize) -> &LinkStatistics {
        &self.links[ue * self.num_aps() + ap]
    }

    pub fn beta(&self, ue: usize, ap: usize) -> f64 {
        self.link(ue, ap).beta
    }

    /// Same statistics with every Rician factor forced to zero (pure NLOS with
    /// the full gain moved into `R`).
    pub fn to_rayleigh(&self, asd: f64) -> Result<Self> {
        let links = self
            .links
            .iter()
            .map(|l| LinkStatistics::new(l.beta, 0.0, l.theta, asd, l.antennas()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelStatistics {
            scenario: self.scenario.clone(),
            links,
        })
    }
}
