//! Separable quadratic finite sums, the Euclidean test bed.
//!
//! `f_i(x) = ½ Σ_j h_ij (x_j − c_ij)²` with `h_ij > 0`. Everything about
//! these problems is available in closed form: the minimizer, `F*`, the
//! smoothness and strong-convexity constants, and the proximal map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FiniteSumProblem;
use crate::error::{check_len, Error, Result};
use crate::kernels::KernelId;
use crate::prox::{ProxMethod, ProxResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableQuadratic {
    n: usize,
    d: usize,
    /// Row-major `n × d` curvatures.
    curvature: Vec<f64>,
    /// Row-major `n × d` centers.
    centers: Vec<f64>,
    #[serde(skip)]
    xstar: Vec<f64>,
    #[serde(skip)]
    fstar: f64,
}

impl SeparableQuadratic {
    /// Builds from row-major `n × d` curvature and center arrays.
    pub fn new(n: usize, d: usize, curvature: Vec<f64>, centers: Vec<f64>) -> Result<Self> {
        if n < 1 || d < 1 {
            return Err(Error::InvalidConfig(format!(
                "quadratic needs n >= 1 and d >= 1 (got n={n}, d={d})"
            )));
        }
        check_len(n * d, curvature.len())?;
        check_len(n * d, centers.len())?;
        if curvature.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidConfig("curvatures must be positive".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("centers must be finite".into()));
        }
        let mut q = SeparableQuadratic {
            n,
            d,
            curvature,
            centers,
            xstar: Vec::new(),
            fstar: 0.0,
        };
        q.solve();
        Ok(q)
    }

    /// `f(x) = ½ h (x − c)²` in one dimension with a single component.
    pub fn scalar(h: f64, c: f64) -> Result<Self> {
        Self::new(1, 1, vec![h], vec![c])
    }

    /// Curvatures uniform on `[h_lo, h_hi]`, centers uniform on `[-1, 1]`.
    pub fn random(n: usize, d: usize, h_lo: f64, h_hi: f64, seed: u64) -> Result<Self> {
        if !(h_lo > 0.0 && h_hi >= h_lo) {
            return Err(Error::InvalidConfig(format!(
                "curvature range [{h_lo}, {h_hi}] must be positive"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curvature = (0..n * d)
            .map(|_| if h_hi > h_lo { rng.random_range(h_lo..h_hi) } else { h_lo })
            .collect();
        let centers = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self::new(n, d, curvature, centers)
    }

    pub fn curvature(&self, i: usize, j: usize) -> f64 {
        self.curvature[i * self.d + j]
    }

    pub fn center(&self, i: usize, j: usize) -> f64 {
        self.centers[i * self.d + j]
    }

    fn solve(&mut self) {
        let (n, d) = (self.n, self.d);
        self.xstar = (0..d)
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    num += self.curvature(i, j) * self.center(i, j);
                    den += self.curvature(i, j);
                }
                num / den
            })
            .collect();
        let xs = self.xstar.clone();
        self.fstar = (0..n).map(|i| self.value_unchecked(i, &xs)).sum::<f64>() / n as f64;
    }

    fn value_unchecked(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.d)
            .map(|j| {
                let r = x[j] - self.center(i, j);
                0.5 * self.curvature(i, j) * r * r
            })
            .sum()
    }

    /// Restores the cached minimizer after deserialization.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: SeparableQuadratic = serde_json::from_str(s)?;
        Self::new(raw.n, raw.d, raw.curvature, raw.centers)
    }
}

impl FiniteSumProblem for SeparableQuadratic {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        check_len(self.d, x.len())?;
        Ok(self.value_unchecked(i, x))
    }

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.d, x.len())?;
        check_len(self.d, out.len())?;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.curvature(i, j) * (x[j] - self.center(i, j));
        }
        Ok(())
    }

    fn divergence(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.d, x.len())?;
        check_len(self.d, y.len())?;
        Ok((0..self.d)
            .map(|j| 0.5 * self.curvature(i, j) * (x[j] - y[j]) * (x[j] - y[j]))
            .sum())
    }

    fn declared_kernel(&self) -> KernelId {
        KernelId::Euclidean
    }

    fn rel_smoothness(&self) -> f64 {
        self.curvature.iter().copied().fold(0.0, f64::max)
    }

    fn rel_strong_convexity(&self) -> f64 {
        (0..self.d)
            .map(|j| (0..self.n).map(|i| self.curvature(i, j)).sum::<f64>() / self.n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    fn component_strong_convexity(&self) -> f64 {
        self.curvature.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn minimizer(&self) -> Option<&[f64]> {
        Some(&self.xstar)
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.fstar)
    }

    fn is_interpolating(&self) -> bool {
        (0..self.n).all(|i| (0..self.d).all(|j| self.center(i, j) == self.xstar[j]))
    }

    fn closed_form_prox(
        &self,
        kernel: KernelId,
        i: usize,
        x_k: &[f64],
        e: &[f64],
        alpha: f64,
    ) -> Option<Result<ProxResult>> {
        if kernel != KernelId::Euclidean {
            return None;
        }
        Some((|| {
            check_len(self.d, x_k.len())?;
            check_len(self.d, e.len())?;
            // h (x − c) − e + (x − x_k)/α = 0
            let point = (0..self.d)
                .map(|j| {
                    let h = self.curvature(i, j);
                    (h * self.center(i, j) + e[j] + x_k[j] / alpha) / (h + 1.0 / alpha)
                })
                .collect();
            Ok(ProxResult {
                point,
                stationarity_residual: 0.0,
                inner_iterations: 0,
                method: ProxMethod::ClosedForm,
            })
        })())
    }
}
