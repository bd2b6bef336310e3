use rand::Rng;

use super::config::{SamplingStreams, SvrpOuter, Variant};
use crate::error::{check_len, Error, Result};
use crate::kernels::Kernel;
use crate::linalg::all_finite;
use crate::problems::FiniteSumProblem;

/// Per-run variance-reduction state. All anchors start at `x_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorState {
    None,
    Saga {
        /// Row-major `n × d` table of `∇f_i(φ_i)`.
        table: Vec<f64>,
        mean: Vec<f64>,
        /// The points `φ_i` themselves, kept only on request.
        points: Option<Vec<f64>>,
        updates: usize,
    },
    Lsvrg {
        anchor: Vec<f64>,
        anchor_grad: Vec<f64>,
        p: f64,
    },
    Svrp {
        anchor: Vec<f64>,
        anchor_grad: Vec<f64>,
        m: usize,
        pos: usize,
        outer: SvrpOuter,
        restart: bool,
        /// `ξ_s` for the current epoch.
        xi: usize,
        picked: Vec<f64>,
        sum: Vec<f64>,
    },
}

impl EstimatorState {
    pub fn variant(&self) -> Variant {
        match self {
            EstimatorState::None => Variant::None,
            EstimatorState::Saga { .. } => Variant::Saga,
            EstimatorState::Lsvrg { .. } => Variant::Lsvrg,
            EstimatorState::Svrp { .. } => Variant::Svrp,
        }
    }

    pub fn none() -> Self {
        EstimatorState::None
    }

    pub fn saga<P: FiniteSumProblem + ?Sized>(
        problem: &P,
        x0: &[f64],
        retain_points: bool,
    ) -> Result<Self> {
        let (n, d) = (problem.n(), problem.dim());
        check_len(d, x0.len())?;
        let mut table = vec![0.0; n * d];
        for (i, row) in table.chunks_mut(d).enumerate() {
            problem.component_grad_into(i, x0, row)?;
        }
        let mean = table_mean(&table, n, d);
        Ok(EstimatorState::Saga {
            table,
            mean,
            points: retain_points.then(|| x0.repeat(n)),
            updates: 0,
        })
    }

    pub fn lsvrg<P: FiniteSumProblem + ?Sized>(problem: &P, x0: &[f64], p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidConfig(format!("lsvrg_prob must lie in (0, 1] (got {p})")));
        }
        Ok(EstimatorState::Lsvrg {
            anchor: x0.to_vec(),
            anchor_grad: problem.full_grad(x0)?,
            p,
        })
    }

    pub fn svrp<P: FiniteSumProblem + ?Sized>(
        problem: &P,
        x0: &[f64],
        m: usize,
        outer: SvrpOuter,
        restart: bool,
        streams: &mut SamplingStreams,
    ) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidConfig("svrp_epoch must be >= 1".into()));
        }
        Ok(EstimatorState::Svrp {
            anchor: x0.to_vec(),
            anchor_grad: problem.full_grad(x0)?,
            m,
            pos: 0,
            outer,
            restart,
            xi: streams.epoch.random_range(0..m),
            picked: x0.to_vec(),
            sum: vec![0.0; x0.len()],
        })
    }

    /// Writes `e_k` for the sampled index into `out`.
    pub fn compute_e_into<P: FiniteSumProblem + ?Sized>(
        &self,
        problem: &P,
        i: usize,
        out: &mut [f64],
    ) -> Result<()> {
        match self {
            EstimatorState::None => out.fill(0.0),
            EstimatorState::Saga { table, mean, .. } => {
                let d = mean.len();
                for (o, (t, m)) in out.iter_mut().zip(table[i * d..(i + 1) * d].iter().zip(mean)) {
                    *o = t - m;
                }
            }
            EstimatorState::Lsvrg { anchor, anchor_grad, .. }
            | EstimatorState::Svrp { anchor, anchor_grad, .. } => {
                problem.component_grad_into(i, anchor, out)?;
                for (o, g) in out.iter_mut().zip(anchor_grad) {
                    *o -= g;
                }
            }
        }
        Ok(())
    }

    pub fn compute_e<P: FiniteSumProblem + ?Sized>(&self, problem: &P, i: usize) -> Result<Vec<f64>> {
        let mut e = vec![0.0; problem.dim()];
        self.compute_e_into(problem, i, &mut e)?;
        Ok(e)
    }

    /// Advances the state after step `k`, given the pre-update iterate `x_k`.
    ///
    /// Returns the point the iterate must restart from, which only happens at
    /// the end of an svrp epoch with restarts enabled.
    pub fn update<P: FiniteSumProblem + ?Sized>(
        &mut self,
        problem: &P,
        kernel: &dyn Kernel,
        i: usize,
        x_k: &[f64],
        streams: &mut SamplingStreams,
    ) -> Result<Option<Vec<f64>>> {
        kernel.check_primal(x_k)?;
        match self {
            EstimatorState::None => {}
            EstimatorState::Saga { table, mean, points, updates } => {
                let d = mean.len();
                let n = table.len() / d;
                let mut new_row = vec![0.0; d];
                problem.component_grad_into(i, x_k, &mut new_row)?;
                let row = &mut table[i * d..(i + 1) * d];
                for j in 0..d {
                    mean[j] += (new_row[j] - row[j]) / n as f64;
                }
                row.copy_from_slice(&new_row);
                if let Some(pts) = points {
                    pts[i * d..(i + 1) * d].copy_from_slice(x_k);
                }
                *updates += 1;
                if *updates % n == 0 {
                    // Flush accumulated rounding from the incremental mean.
                    *mean = table_mean(table, n, d);
                }
            }
            EstimatorState::Lsvrg { anchor, anchor_grad, p } => {
                let refresh = *p >= 1.0 || streams.bernoulli.random::<f64>() < *p;
                if refresh {
                    anchor.copy_from_slice(x_k);
                    problem.full_grad_into(anchor, anchor_grad)?;
                }
            }
            EstimatorState::Svrp {
                anchor,
                anchor_grad,
                m,
                pos,
                outer,
                restart,
                xi,
                picked,
                sum,
            } => {
                if *pos == *xi {
                    picked.copy_from_slice(x_k);
                }
                for (s, x) in sum.iter_mut().zip(x_k) {
                    *s += x;
                }
                *pos += 1;
                if *pos == *m {
                    match outer {
                        SvrpOuter::RandomIndex => anchor.copy_from_slice(picked),
                        SvrpOuter::Average => {
                            for (a, s) in anchor.iter_mut().zip(sum.iter()) {
                                *a = s / *m as f64;
                            }
                        }
                    }
                    if !all_finite(anchor) {
                        return Err(Error::DomainViolation("svrp anchor is not finite".into()));
                    }
                    kernel.check_primal(anchor)?;
                    problem.full_grad_into(anchor, anchor_grad)?;
                    *pos = 0;
                    sum.fill(0.0);
                    *xi = streams.epoch.random_range(0..*m);
                    if *restart {
                        return Ok(Some(anchor.clone()));
                    }
                }
            }
        }
        Ok(None)
    }

    /// The point whose gradient component `i` of the estimator is built
    /// from, when it is available.
    pub fn anchor_point(&self, i: usize) -> Option<&[f64]> {
        match self {
            EstimatorState::None => None,
            EstimatorState::Saga { points, mean, .. } => {
                let d = mean.len();
                points.as_ref().map(|p| &p[i * d..(i + 1) * d])
            }
            EstimatorState::Lsvrg { anchor, .. } | EstimatorState::Svrp { anchor, .. } => Some(anchor),
        }
    }

    /// The stored gradient-table mean for saga, the cached full gradient at
    /// the anchor otherwise. This is `E_k[∇f_{i_k}(anchor_{i_k})]`.
    pub fn anchor_mean_grad(&self) -> Option<&[f64]> {
        match self {
            EstimatorState::None => None,
            EstimatorState::Saga { mean, .. } => Some(mean),
            EstimatorState::Lsvrg { anchor_grad, .. } | EstimatorState::Svrp { anchor_grad, .. } => {
                Some(anchor_grad)
            }
        }
    }

    /// Saga table row `i`.
    pub fn table_row(&self, i: usize) -> Option<&[f64]> {
        match self {
            EstimatorState::Saga { table, mean, .. } => {
                let d = mean.len();
                Some(&table[i * d..(i + 1) * d])
            }
            _ => None,
        }
    }
}

fn table_mean(table: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for row in table.chunks(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}
