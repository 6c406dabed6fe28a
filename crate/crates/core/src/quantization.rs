//! Additive finite-resolution DAC/ADC model.
//!
//! A DAC maps `x` to `sqrt(1 - rho) x + n` and an ADC maps it to
//! `(1 - rho) x + n`, where `n` is Gaussian, independent of `x`, with a
//! diagonal covariance proportional to `diag(E[x x^H])`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::ChannelStatistics;
use crate::linalg::{self, real};
use crate::rng::complex_normal;
use crate::{CMat, CVec, Error, Result};

/// Distortion factors for 1 to 5 bits.
pub const TABLE_RHO: [f64; 5] = [0.3634, 0.1175, 0.03454, 0.009497, 0.002499];

/// Converter resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Resolution {
    Bits(u32),
    Ideal,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Ideal => f.write_str("ideal"),
        }
    }
}

impl Serialize for Resolution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Resolution::Bits(b) => s.serialize_u32(*b),
            Resolution::Ideal => s.serialize_str("ideal"),
        }
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(b) if b >= 1 && b <= u32::MAX as i64 => Ok(Resolution::Bits(b as u32)),
            Raw::Int(b) => Err(serde::de::Error::custom(format!(
                "bit depth must be at least 1, got {b}"
            ))),
            Raw::Text(t) if t.eq_ignore_ascii_case("ideal") => Ok(Resolution::Ideal),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a bit depth or \"ideal\", got {t:?}"
            ))),
        }
    }
}

/// Distortion factor for a resolution: the table for 1–5 bits,
/// `sqrt(3) pi 2^(-2b-1)` above, zero for ideal converters.
pub fn distortion_factor(bits: Resolution) -> Result<f64> {
    match bits {
        Resolution::Ideal => Ok(0.0),
        Resolution::Bits(0) => Err(Error::invalid("bits", "must be at least 1")),
        Resolution::Bits(b @ 1..=5) => Ok(TABLE_RHO[b as usize - 1]),
        Resolution::Bits(b) => Ok(3f64.sqrt() * std::f64::consts::PI * 2f64.powi(-2 * b as i32 - 1)),
    }
}

/// DAC and ADC resolutions with their distortion factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantizerConfig {
    pub b_da: Resolution,
    pub b_ad: Resolution,
    pub rho_da: f64,
    pub rho_ad: f64,
}

impl QuantizerConfig {
    pub fn new(b_da: Resolution, b_ad: Resolution) -> Result<Self> {
        Ok(QuantizerConfig {
            b_da,
            b_ad,
            rho_da: distortion_factor(b_da)?,
            rho_ad: distortion_factor(b_ad)?,
        })
    }

    pub fn ideal() -> Self {
        QuantizerConfig {
            b_da: Resolution::Ideal,
            b_ad: Resolution::Ideal,
            rho_da: 0.0,
            rho_ad: 0.0,
        }
    }

    /// `(1 - rho_ad)`, the ADC signal gain.
    pub fn adc_gain(&self) -> f64 {
        1.0 - self.rho_ad
    }

    /// `(1 - rho_ad)^2`.
    pub fn adc_gain_sq(&self) -> f64 {
        (1.0 - self.rho_ad).powi(2)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("must lie in [0, 1), got {rho}")));
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(
    mut out: CVec,
    variance: f64,
    cov_diag_x: &[f64],
    rng: &mut R,
) -> Result<CVec> {
    if cov_diag_x.len() != out.len() {
        return Err(Error::invalid("cov_diag_x", "length differs from the signal"));
    }
    if cov_diag_x.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("cov_diag_x", "entries must be non-negative"));
    }
    if variance > 0.0 {
        for (o, &v) in out.iter_mut().zip(cov_diag_x) {
            *o += complex_normal(rng) * (variance * v).sqrt();
        }
    }
    Ok(out)
}

/// `sqrt(1 - rho) x + n`, `n ~ CN(0, rho diag(cov_diag_x))`.
pub fn dac_apply<R: Rng + ?Sized>(x: &CVec, rho_da: f64, cov_diag_x: &[f64], rng: &mut R) -> Result<CVec> {
    check_rho(rho_da)?;
    add_noise(x * real((1.0 - rho_da).sqrt()), rho_da, cov_diag_x, rng)
}

/// `(1 - rho) x + n`, `n ~ CN(0, rho (1 - rho) diag(cov_diag_x))`.
pub fn adc_apply<R: Rng + ?Sized>(x: &CVec, rho_ad: f64, cov_diag_x: &[f64], rng: &mut R) -> Result<CVec> {
    check_rho(rho_ad)?;
    add_noise(x * real(1.0 - rho_ad), rho_ad * (1.0 - rho_ad), cov_diag_x, rng)
}

/// `sum_i pdd_i (h_bar_il h_bar_il^H + R_il)` over the UEs in `ues`, with
/// `pdd` the DAC-scaled powers.
pub fn weighted_second_moment(
    l: usize,
    stats: &ChannelStatistics,
    pdd: &[f64],
    ues: impl IntoIterator<Item = usize>,
) -> CMat {
    let mut acc = linalg::zeros(stats.antennas());
    for i in ues {
        if pdd[i] != 0.0 {
            acc += stats.link(i, l).second_moment() * real(pdd[i]);
        }
    }
    acc
}

/// Aggregate pilot/data noise covariance at AP `l`: DAC distortion carried by
/// all channels, ADC distortion and thermal noise.
///
/// `pdd` are the DAC-scaled powers `(1 - rho_da) p_i`.
pub fn received_noise_covariance(
    l: usize,
    stats: &ChannelStatistics,
    pdd: &[f64],
    q: &QuantizerConfig,
    sigma2: f64,
) -> CMat {
    let moment = weighted_second_moment(l, stats, pdd, 0..stats.num_ues());
    noise_covariance_from_moment(&moment, q, sigma2)
}

/// Same as [`received_noise_covariance`] with a precomputed moment.
pub fn noise_covariance_from_moment(moment: &CMat, q: &QuantizerConfig, sigma2: f64) -> CMat {
    let (ra, rd) = (q.rho_ad, q.rho_da);
    let n = moment.nrows();
    let mut c = moment * real((1.0 - ra).powi(2) * rd / (1.0 - rd))
        + linalg::diag_part(moment) * real(ra * (1.0 - ra) / (1.0 - rd))
        + linalg::identity(n) * real((1.0 - ra) * sigma2);
    linalg::hermitize(&mut c);
    c
}

/// Covariance of the part of the received noise that is independent of the
/// channels: thermal noise through the ADC plus ADC distortion.
pub fn channel_independent_noise_covariance(moment: &CMat, q: &QuantizerConfig, sigma2: f64) -> CMat {
    let (ra, rd) = (q.rho_ad, q.rho_da);
    let n = moment.nrows();
    linalg::diag_part(moment) * real(ra * (1.0 - ra) / (1.0 - rd))
        + linalg::identity(n) * real((1.0 - ra) * sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{LinkStatistics, Scenario};
    use crate::rng;

    #[test]
    fn table_and_formula() {
        assert_eq!(distortion_factor(Resolution::Bits(1)).unwrap(), 0.3634);
        assert_eq!(distortion_factor(Resolution::Bits(3)).unwrap(), 0.03454);
        let six = distortion_factor(Resolution::Bits(6)).unwrap();
        assert!((six - 3f64.sqrt() * std::f64::consts::PI / 8192.0).abs() < 1e-18);
        assert!((six - 6.6423e-4).abs() < 1e-8);
        assert_eq!(distortion_factor(Resolution::Ideal).unwrap(), 0.0);
        assert!(distortion_factor(Resolution::Bits(0)).is_err());
    }

    #[test]
    fn monotone_with_bounded_boundary_jump() {
        let rho: Vec<f64> = (1..=12)
            .map(|b| distortion_factor(Resolution::Bits(b)).unwrap())
            .collect();
        assert!(rho.windows(2).all(|w| w[1] < w[0]));
        let formula5 = 3f64.sqrt() * std::f64::consts::PI * 2f64.powi(-11);
        assert!((formula5 - TABLE_RHO[4]).abs() / TABLE_RHO[4] < 0.12);
    }

    #[test]
    fn resolution_serde() {
        let r: Resolution = serde_json::from_str("4").unwrap();
        assert_eq!(r, Resolution::Bits(4));
        let r: Resolution = serde_json::from_str("\"ideal\"").unwrap();
        assert_eq!(r, Resolution::Ideal);
        assert!(serde_json::from_str::<Resolution>("0").is_err());
        assert_eq!(serde_json::to_string(&Resolution::Bits(2)).unwrap(), "2");
    }

    #[test]
    fn ideal_converters_are_identity() {
        let mut rng = rng::stream(1, "q", 0);
        let x = CVec::from_vec(vec![C64::new(1.0, -2.0), C64::new(0.5, 0.25)]);
        assert_eq!(dac_apply(&x, 0.0, &[1.0, 1.0], &mut rng).unwrap(), x);
        assert_eq!(adc_apply(&x, 0.0, &[1.0, 1.0], &mut rng).unwrap(), x);
        assert!(dac_apply(&x, 0.1, &[-1.0, 1.0], &mut rng).is_err());
        assert!(adc_apply(&x, 1.0, &[1.0, 1.0], &mut rng).is_err());
    }

    use crate::C64;

    fn power_check(rho: f64, dac: bool) {
        let mut rng = rng::stream(9, "power", dac as u64);
        let n = 100_000;
        let mean = C64::new(0.7, -0.3);
        let var = 2.0;
        let second = mean.norm_sqr() + var;
        let mut out_power = Vec::with_capacity(n);
        let mut cross = C64::new(0.0, 0.0);
        let mut out_mean = C64::new(0.0, 0.0);
        for _ in 0..n {
            let x = CVec::from_element(1, mean + complex_normal(&mut rng) * var.sqrt());
            let y = if dac {
                dac_apply(&x, rho, &[second], &mut rng).unwrap()
            } else {
                adc_apply(&x, rho, &[second], &mut rng).unwrap()
            };
            let gain = if dac { (1.0 - rho).sqrt() } else { 1.0 - rho };
            let noise = y[0] - x[0] * gain;
            cross += noise * x[0].conj();
            out_power.push(y[0].norm_sqr());
            out_mean += y[0];
        }
        let m = out_power.iter().sum::<f64>() / n as f64;
        let sd = (out_power.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let expected = if dac { second } else { (1.0 - rho) * second };
        assert!((m - expected).abs() < 3.0 * sd / (n as f64).sqrt(), "power {m} vs {expected}");
        let gain = if dac { (1.0 - rho).sqrt() } else { 1.0 - rho };
        let mean_err = (out_mean / n as f64 - mean * gain).norm();
        assert!(mean_err < 4.0 * (second / n as f64).sqrt());
        let noise_sd = (rho * second * second / n as f64).sqrt();
        assert!((cross / n as f64).norm() < 4.0 * noise_sd);
    }

    #[test]
    fn dac_preserves_power() {
        power_check(0.3634, true);
    }

    #[test]
    fn adc_scales_power() {
        power_check(0.1175, false);
    }

    fn single_link_stats(beta: f64, n: usize) -> ChannelStatistics {
        let scenario = Scenario::new(100.0, vec![[0.0, 0.0]], vec![[10.0, 10.0]], n).unwrap();
        let link = LinkStatistics::new(beta, 0.0, 0.3, 0.26, n).unwrap();
        ChannelStatistics::from_links(scenario, vec![link]).unwrap()
    }

    #[test]
    fn noise_covariance_reductions() {
        let stats = single_link_stats(2.0, 3);
        let c = received_noise_covariance(0, &stats, &[0.5], &QuantizerConfig::ideal(), 0.1);
        assert!((c - linalg::identity(3) * real(0.1)).norm() < 1e-15);

        let scalar = single_link_stats(2.0, 1);
        let q = QuantizerConfig::new(Resolution::Bits(1), Resolution::Bits(2)).unwrap();
        let (ra, rd, p, s2) = (q.rho_ad, q.rho_da, 0.5, 0.1);
        let c = received_noise_covariance(0, &scalar, &[p], &q, s2);
        let hand = (1.0 - ra).powi(2) * rd / (1.0 - rd) * p * 2.0
            + ra * (1.0 - ra) / (1.0 - rd) * p * 2.0
            + (1.0 - ra) * s2;
        assert!((c[(0, 0)].re - hand).abs() < 1e-14);

        let multi = single_link_stats(1.0, 4);
        let c = received_noise_covariance(0, &multi, &[0.8], &q, 0.01);
        assert!(linalg::hermitian_defect(&c) == 0.0);
        assert!(linalg::min_eigenvalue(&c) > 0.0);
    }
}
