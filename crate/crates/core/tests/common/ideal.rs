//! Ideal-hardware, correlated-Rayleigh reference written directly from the
//! textbook expressions with plain matrix inverses. It shares nothing with the
//! library beyond the input correlation matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

pub type M = DMatrix<C>;
pub type V = DVector<C>;

pub struct Reference {
    pub tau: usize,
    pub power: Vec<f64>,
    pub sigma2: f64,
    pub pilot: Vec<usize>,
    /// `r[k][l]`.
    pub r: Vec<Vec<M>>,
}

impl Reference {
    fn n(&self) -> usize {
        self.r[0][0].nrows()
    }

    pub fn psi(&self, t: usize, l: usize) -> M {
        let n = self.n();
        let mut m = M::identity(n, n) * C::from(self.sigma2);
        for (i, &ti) in self.pilot.iter().enumerate() {
            if ti == t {
                m += &self.r[i][l] * C::from(self.power[i] * self.tau as f64);
            }
        }
        m
    }

    pub fn psi_inv(&self, t: usize, l: usize) -> M {
        self.psi(t, l).try_inverse().expect("invertible")
    }

    /// `sqrt(p_k tau) R_kl Psi^{-1}`.
    pub fn gain(&self, k: usize, l: usize) -> M {
        &self.r[k][l] * self.psi_inv(self.pilot[k], l) * C::from((self.power[k] * self.tau as f64).sqrt())
    }

    /// `p_k tau R Psi^{-1} R`.
    pub fn estimate_cov(&self, k: usize, l: usize) -> M {
        &self.r[k][l] * self.psi_inv(self.pilot[k], l) * &self.r[k][l] * C::from(self.power[k] * self.tau as f64)
    }

    /// L-MMSE combiner at AP `l` for UE `k`, given every estimate at `l`.
    pub fn l_mmse(&self, k: usize, l: usize, estimates: &[V]) -> V {
        let n = self.n();
        let mut a = M::identity(n, n) * C::from(self.sigma2);
        for (i, h) in estimates.iter().enumerate() {
            let e = h * h.adjoint() + &self.r[i][l] - self.estimate_cov(i, l);
            a += e * C::from(self.power[i]);
        }
        a.lu().solve(&estimates[k]).expect("invertible")
    }

    /// MR combining with optimal LSFD, every AP serving UE `k`.
    pub fn se_mr_lsfd(&self, k: usize, tau_c: usize) -> f64 {
        let l_count = self.r[0].len();
        let k_count = self.r.len();
        let tr = |m: &M| m.trace();
        let mean = V::from_fn(l_count, |l, _| tr(&self.estimate_cov(k, l)));
        let mut b = M::zeros(l_count, l_count);
        for i in 0..k_count {
            let mut cov = M::zeros(l_count, l_count);
            let copilot = self.pilot[i] == self.pilot[k];
            let cross = V::from_fn(l_count, |l, _| {
                if copilot {
                    let t = self.pilot[k];
                    tr(&(&self.r[i][l] * self.psi_inv(t, l) * &self.r[k][l]))
                        * C::from(self.tau as f64 * (self.power[k] * self.power[i]).sqrt())
                } else {
                    C::from(0.0)
                }
            });
            for l in 0..l_count {
                cov[(l, l)] += tr(&(&self.r[i][l] * self.estimate_cov(k, l)));
            }
            cov += &cross * cross.adjoint();
            b += cov * C::from(self.power[i]);
        }
        for l in 0..l_count {
            b[(l, l)] += tr(&self.estimate_cov(k, l)) * C::from(self.sigma2);
        }
        b -= &mean * mean.adjoint() * C::from(self.power[k]);
        let x = b.try_inverse().expect("invertible") * &mean;
        let sinr = self.power[k] * (mean.adjoint() * x)[(0, 0)].re;
        (1.0 - self.tau as f64 / tau_c as f64) * (1.0 + sinr).log2()
    }
}
