mod common;

use cfmimo_core::channel::FadingMode;
use cfmimo_core::rng;
use cfmimo_core::se;
use cfmimo_core::{Deployment, C64};
use common::*;

fn mc_kernel(dep: &Deployment, k: usize, i: usize, l1: usize, l2: usize, trials: usize, seed: u64) -> (C64, f64, f64) {
    let mut g = rng::stream(seed, "kernel-test", 0);
    let (mut sum, mut sq_re, mut sq_im) = (C64::new(0.0, 0.0), 0.0, 0.0);
    for _ in 0..trials {
        let s = dep.sample(&mut g);
        let x = s.h_hat(k, l1).dotc(s.h(i, l1)) * s.h(i, l2).dotc(s.h_hat(k, l2));
        sum += x;
        sq_re += x.re * x.re;
        sq_im += x.im * x.im;
    }
    let n = trials as f64;
    let m = sum / n;
    let se_re = ((sq_re / n - m.re * m.re) / n).sqrt();
    let se_im = ((sq_im / n - m.im * m.im) / n).sqrt();
    (m, se_re, se_im)
}

fn small(mode: FadingMode) -> Deployment {
    let s = stats(2, 4, 2, 300.0, mode, 4);
    fully_connected(s, 2, vec![0, 1, 0, 1], quant(1, 2))
}

#[test]
fn kernel_cases_match_monte_carlo() {
    let dep = small(FadingMode::Rician);
    // (k, i): co-pilot pair and non co-pilot pair; l1 = l2 and l1 != l2.
    for (k, i, l1, l2) in [(0, 2, 0, 0), (0, 2, 0, 1), (0, 1, 1, 1), (0, 1, 0, 1)] {
        let closed = se::theorem1_kernel(&dep, k, i, l1, l2);
        let (mc, se_re, se_im) = mc_kernel(&dep, k, i, l1, l2, 200_000, (k + 10 * i + 100 * l1 + 1000 * l2) as u64);
        assert!((closed.re - mc.re).abs() <= 4.0 * se_re, "re ({k},{i},{l1},{l2}): {closed} vs {mc} ± {se_re}");
        assert!((closed.im - mc.im).abs() <= 4.0 * se_im.max(1e-300), "im ({k},{i},{l1},{l2}): {closed} vs {mc} ± {se_im}");
    }
}

#[test]
fn non_copilot_cross_ap_kernel_is_los_product() {
    let dep = small(FadingMode::Rician);
    let (k, i, l1, l2) = (0, 1, 0, 1);
    let hb = |u: usize, l: usize| &dep.stats.link(u, l).h_bar;
    let expected = hb(k, l1).dotc(hb(i, l1)) * hb(i, l2).dotc(hb(k, l2));
    let got = se::theorem1_kernel(&dep, k, i, l1, l2);
    assert!((got - expected).norm() <= 1e-12 * expected.norm());
}

#[test]
fn rayleigh_non_copilot_cross_ap_kernel_vanishes() {
    let dep = small(FadingMode::Rayleigh);
    assert_eq!(se::theorem1_kernel(&dep, 0, 1, 0, 1), C64::new(0.0, 0.0));
}

#[test]
fn kernel_diagonal_is_real_and_positive() {
    let dep = small(FadingMode::Rician);
    for k in 0..4 {
        for i in 0..4 {
            for l in 0..2 {
                let x = se::theorem1_kernel(&dep, k, i, l, l);
                assert_eq!(x.im, 0.0);
                assert!(x.re > 0.0);
            }
        }
    }
}
