//! Poisson linear inverse problems.
//!
//! `f_i(x) = b_i log(b_i / a_iᵀx) − b_i + a_iᵀx`, the KL divergence between
//! the measurement `b_i` and the forward model `a_iᵀx`. Each `f_i` is
//! `max_i b_i`-smooth relative to the Burg kernel.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::reference::{reference_minimize, ReferenceConfig};
use super::FiniteSumProblem;
use crate::error::{check_len, Error, Result};
use crate::kernels::{Burg, KernelId, DOMAIN_EPS};
use crate::prox::{solve_prox_separable, ProxResult};

pub const INSTANCE_FORMAT: &str = "bsppa-instance/1";

/// Standard deviation of the log-normal measurement perturbation in noisy mode.
pub const NOISE_SCALE: f64 = 0.05;

const TRUTH_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonMode {
    /// Dense uniform `A`, `b = A x*` exactly.
    Interpolation,
    /// Sparse banded projection `A`, `b` perturbed off the range of `A`.
    Noisy,
    /// Positive diagonal `A` (`n = d`); the prox has a closed form.
    Diagonal,
}

impl PoissonMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PoissonMode::Interpolation => "interpolation",
            PoissonMode::Noisy => "noisy",
            PoissonMode::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for PoissonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PoissonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interpolation" => Ok(PoissonMode::Interpolation),
            "noisy" => Ok(PoissonMode::Noisy),
            "diagonal" => Ok(PoissonMode::Diagonal),
            other => Err(Error::InvalidConfig(format!("unknown instance mode '{other}'"))),
        }
    }
}

/// Nonnegative forward operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DesignMatrix {
    /// Row-major `rows × cols`.
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    /// Square diagonal matrix.
    Diagonal { data: Vec<f64> },
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        match self {
            DesignMatrix::Dense { rows, .. } => *rows,
            DesignMatrix::Diagonal { data } => data.len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            DesignMatrix::Dense { cols, .. } => *cols,
            DesignMatrix::Diagonal { data } => data.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, DesignMatrix::Diagonal { .. })
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            DesignMatrix::Dense { cols, data, .. } => {
                let row = &data[i * cols..(i + 1) * cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            DesignMatrix::Diagonal { data } => data[i] * x[i],
        }
    }

    /// `out = s · a_i` (overwrites).
    pub fn row_scaled_into(&self, i: usize, s: f64, out: &mut [f64]) {
        match self {
            DesignMatrix::Dense { cols, data, .. } => {
                let row = &data[i * cols..(i + 1) * cols];
                for (o, a) in out.iter_mut().zip(row) {
                    *o = s * a;
                }
            }
            DesignMatrix::Diagonal { data } => {
                out.fill(0.0);
                out[i] = s * data[i];
            }
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.row_scaled_into(i, 1.0, &mut out);
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|i| self.row_dot(i, x)).collect()
    }

    pub fn diagonal_entry(&self, i: usize) -> Option<f64> {
        match self {
            DesignMatrix::Diagonal { data } => Some(data[i]),
            DesignMatrix::Dense { .. } => None,
        }
    }
}

/// A generated (or loaded) Poisson inverse problem.
///
/// `xstar` is the ground truth used to synthesize `b`. For interpolation and
/// diagonal instances it is also the minimizer with `F* = 0`; for noisy
/// instances the minimizer and `F*` come from a reference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonInstance {
    #[serde(default = "default_format")]
    pub format: String,
    pub mode: PoissonMode,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub matrix: DesignMatrix,
    pub b: Vec<f64>,
    pub xstar: Option<Vec<f64>>,
    pub fstar: Option<f64>,
    #[serde(default)]
    pub reference_minimizer: Option<Vec<f64>>,
}

fn default_format() -> String {
    INSTANCE_FORMAT.to_string()
}

/// Generates an instance; a pure function of `(n, d, mode, seed)`.
///
/// Noisy instances are returned without `F*`; call
/// [`PoissonInstance::compute_reference`] to attach it.
pub fn make_poisson_instance(
    n: usize,
    d: usize,
    mode: PoissonMode,
    seed: u64,
) -> Result<PoissonInstance> {
    make_poisson_instance_with_noise(n, d, mode, seed, NOISE_SCALE)
}

/// As [`make_poisson_instance`] with an explicit log-noise standard
/// deviation (used by noisy mode only).
pub fn make_poisson_instance_with_noise(
    n: usize,
    d: usize,
    mode: PoissonMode,
    seed: u64,
    noise_scale: f64,
) -> Result<PoissonInstance> {
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise scale must be nonnegative (got {noise_scale})"
        )));
    }
    if n < 1 || d < 1 {
        return Err(Error::InvalidConfig(format!(
            "instance needs n >= 1 and d >= 1 (got n={n}, d={d})"
        )));
    }
    if mode == PoissonMode::Diagonal && n != d {
        return Err(Error::InvalidConfig(format!(
            "diagonal instances need n = d (got n={n}, d={d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = TRUTH_RANGE;

    let matrix = match mode {
        PoissonMode::Interpolation => {
            let mut data = vec![0.0; n * d];
            for row in data.chunks_mut(d) {
                loop {
                    row.iter_mut().for_each(|a| *a = rng.random::<f64>());
                    if row.iter().any(|a| *a > 0.0) {
                        break;
                    }
                }
            }
            DesignMatrix::Dense { rows: n, cols: d, data }
        }
        PoissonMode::Noisy => {
            // Each row integrates a contiguous (cyclic) window of pixels,
            // like a ray crossing the image.
            let width = d.div_ceil(4).max(1);
            let mut data = vec![0.0; n * d];
            for (i, row) in data.chunks_mut(d).enumerate() {
                let offset = i * d / n;
                for j in 0..width {
                    row[(offset + j) % d] = 0.05 + 0.95 * rng.random::<f64>();
                }
            }
            DesignMatrix::Dense { rows: n, cols: d, data }
        }
        PoissonMode::Diagonal => DesignMatrix::Diagonal {
            data: (0..d).map(|_| rng.random_range(lo..hi)).collect(),
        },
    };

    let xstar: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    let mut b = matrix.apply(&xstar);
    let interpolating = mode != PoissonMode::Noisy;
    if !interpolating {
        let noise = Normal::new(0.0, noise_scale).expect("valid normal");
        for bi in b.iter_mut() {
            *bi = (*bi * noise.sample(&mut rng).exp()).max(DOMAIN_EPS);
        }
    }

    let inst = PoissonInstance {
        format: default_format(),
        mode,
        seed,
        n,
        d,
        matrix,
        b,
        fstar: interpolating.then_some(0.0),
        reference_minimizer: None,
        xstar: Some(xstar),
    };
    inst.validate()?;
    Ok(inst)
}

impl PoissonInstance {
    /// Checks shapes and the positivity invariants.
    pub fn validate(&self) -> Result<()> {
        check_len(self.n, self.matrix.rows())?;
        check_len(self.d, self.matrix.cols())?;
        check_len(self.n, self.b.len())?;
        if let DesignMatrix::Dense { rows, cols, data } = &self.matrix {
            check_len(rows * cols, data.len())?;
        }
        if self.mode == PoissonMode::Diagonal && !self.matrix.is_diagonal() {
            return Err(Error::InvalidConfig("diagonal mode with a dense matrix".into()));
        }
        for i in 0..self.n {
            let row = self.matrix.row(i);
            if row.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::InvalidConfig(format!("row {i} has a negative entry")));
            }
            if !row.iter().any(|a| *a > 0.0) {
                return Err(Error::InvalidConfig(format!("row {i} has no positive entry")));
            }
        }
        if let Some(j) = self.b.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!("measurement b[{j}] is not positive")));
        }
        for v in [&self.xstar, &self.reference_minimizer].into_iter().flatten() {
            check_len(self.d, v.len())?;
        }
        Ok(())
    }

    /// Attaches `F*` and the minimizer from a long deterministic Bregman
    /// gradient run, unless they are already known.
    pub fn compute_reference(&mut self, cfg: &ReferenceConfig) -> Result<()> {
        if self.fstar.is_some() {
            return Ok(());
        }
        let start = vec![1.0; self.d];
        let sol = reference_minimize(self, &Burg, &start, cfg)?;
        log::info!(
            "reference run: F* = {:e} after {} steps (stationarity {:e})",
            sol.value,
            sol.steps,
            sol.stationarity
        );
        self.fstar = Some(sol.value);
        self.reference_minimizer = Some(sol.minimizer);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: PoissonInstance = serde_json::from_str(s)?;
        if inst.format != INSTANCE_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unsupported instance format '{}'",
                inst.format
            )));
        }
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn forward(&self, i: usize, x: &[f64]) -> Result<f64> {
        let t = self.matrix.row_dot(i, x);
        if t > 0.0 && t.is_finite() {
            Ok(t)
        } else {
            Err(Error::DomainViolation(format!(
                "a_{i}ᵀx = {t} is not strictly positive"
            )))
        }
    }
}

impl FiniteSumProblem for PoissonInstance {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        check_len(self.d, x.len())?;
        let t = self.forward(i, x)?;
        let b = self.b[i];
        // b log(b/t) − b + t = b (u − log(1 + u)),  u = (t − b)/b
        let u = (t - b) / b;
        Ok(b * (u - u.ln_1p()))
    }

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.d, x.len())?;
        check_len(self.d, out.len())?;
        let t = self.forward(i, x)?;
        self.matrix.row_scaled_into(i, 1.0 - self.b[i] / t, out);
        Ok(())
    }

    fn divergence(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.d, x.len())?;
        check_len(self.d, y.len())?;
        // b (r − log r − 1) with r = a_iᵀx / a_iᵀy
        let u = (self.forward(i, x)? - self.forward(i, y)?) / self.forward(i, y)?;
        Ok(self.b[i] * (u - u.ln_1p()))
    }

    fn declared_kernel(&self) -> KernelId {
        KernelId::Burg
    }

    fn rel_smoothness(&self) -> f64 {
        self.b.iter().copied().fold(0.0, f64::max)
    }

    fn minimizer(&self) -> Option<&[f64]> {
        match self.mode {
            PoissonMode::Noisy => self.reference_minimizer.as_deref(),
            _ => self.xstar.as_deref(),
        }
    }

    fn optimal_value(&self) -> Option<f64> {
        self.fstar
    }

    fn is_interpolating(&self) -> bool {
        self.mode != PoissonMode::Noisy
    }

    fn closed_form_prox(
        &self,
        kernel: KernelId,
        i: usize,
        x_k: &[f64],
        e: &[f64],
        alpha: f64,
    ) -> Option<Result<ProxResult>> {
        (kernel == KernelId::Burg && self.matrix.is_diagonal())
            .then(|| solve_prox_separable(self, i, x_k, e, alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn rejects_bad_shapes() {
        assert!(make_poisson_instance(0, 3, PoissonMode::Noisy, 1).is_err());
        assert!(make_poisson_instance(3, 0, PoissonMode::Interpolation, 1).is_err());
        assert!(matches!(
            make_poisson_instance(4, 3, PoissonMode::Diagonal, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn diagonal_components_are_separable() {
        let inst = make_poisson_instance(4, 4, PoissonMode::Diagonal, 7).unwrap();
        assert!(inst.matrix.is_diagonal());
        let x = vec![1.0, 1.3, 0.7, 2.0];
        for i in 0..4 {
            let g = inst.component_grad(i, &x).unwrap();
            for (j, gj) in g.iter().enumerate() {
                if j != i {
                    assert_eq!(*gj, 0.0);
                }
            }
        }
    }

    #[test]
    fn diagonal_gradient_hand_value() {
        let inst = PoissonInstance {
            format: default_format(),
            mode: PoissonMode::Diagonal,
            seed: 0,
            n: 1,
            d: 1,
            matrix: DesignMatrix::Diagonal { data: vec![2.0] },
            b: vec![3.0],
            xstar: Some(vec![1.5]),
            fstar: Some(0.0),
            reference_minimizer: None,
        };
        // 2 (1 − 3/2) = −1
        assert_eq!(inst.component_grad(0, &[1.0]).unwrap(), vec![-1.0]);
        let h = 1e-6;
        let fd = (inst.component_value(0, &[1.0 + h]).unwrap()
            - inst.component_value(0, &[1.0 - h]).unwrap())
            / (2.0 * h);
        assert!((fd + 1.0).abs() < 1e-8);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_poisson_instance(8, 3, PoissonMode::Noisy, 3).unwrap();
        let b = make_poisson_instance(8, 3, PoissonMode::Noisy, 3).unwrap();
        assert_eq!(a, b);
        let c = make_poisson_instance(8, 3, PoissonMode::Noisy, 4).unwrap();
        assert_ne!(a.b, c.b);
    }

    #[test]
    fn interpolation_gradients_vanish_at_truth() {
        let inst = make_poisson_instance(30, 6, PoissonMode::Interpolation, 1).unwrap();
        let xs = inst.xstar.clone().unwrap();
        for i in 0..inst.n {
            let g = inst.component_grad(i, &xs).unwrap();
            assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
        }
        assert_eq!(inst.full_value(&xs).unwrap(), 0.0);
        assert_eq!(inst.rel_smoothness(), inst.b.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn forward_must_be_positive() {
        let inst = make_poisson_instance(3, 3, PoissonMode::Diagonal, 1).unwrap();
        assert!(matches!(
            inst.component_grad(0, &[0.0, 1.0, 1.0]),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut inst = make_poisson_instance(12, 4, PoissonMode::Noisy, 9).unwrap();
        inst.compute_reference(&ReferenceConfig::default()).unwrap();
        let back = PoissonInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(
            max_abs_diff(back.reference_minimizer.as_ref().unwrap(), inst.reference_minimizer.as_ref().unwrap()),
            0.0
        );
    }

    #[test]
    fn corrupt_json_is_rejected() {
        let inst = make_poisson_instance(3, 2, PoissonMode::Interpolation, 1).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&inst.to_json().unwrap()).unwrap();
        v["b"][0] = serde_json::json!(-1.0);
        assert!(PoissonInstance::from_json(&v.to_string()).is_err());
    }
}
