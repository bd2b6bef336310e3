//! Bregman kernels and their divergences.
//!
//! A kernel `h` is a strictly convex function with mirror map `∇h` and
//! inverse mirror map `∇h*`. Two kernels are provided:
//!
//! | id          | domain          | `∇h(x)` | `D_h(x, y)`                       |
//! |-------------|-----------------|---------|-----------------------------------|
//! | `euclidean` | `R^d`           | `x`     | `½‖x − y‖²`                       |
//! | `burg`      | `x_i > 0`       | `−1/x`  | `Σ x_i/y_i − log(x_i/y_i) − 1`    |
//!
//! Divergences are evaluated from closed forms. The definitional three-term
//! expression is available as [`bregman_definitional`] and
//! [`dual_bregman_definitional`] and is used as a test oracle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::dot;

/// Smallest coordinate accepted as interior for orthant kernels.
pub const DOMAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    FullSpace,
    PositiveOrthant,
}

/// Identifier used in config files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    Euclidean,
    Burg,
}

impl KernelId {
    pub fn kernel(self) -> &'static dyn Kernel {
        match self {
            KernelId::Euclidean => &Euclidean,
            KernelId::Burg => &Burg,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelId::Euclidean => "euclidean",
            KernelId::Burg => "burg",
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(KernelId::Euclidean),
            "burg" => Ok(KernelId::Burg),
            other => Err(Error::InvalidConfig(format!(
                "unknown kernel '{other}' (expected 'euclidean' or 'burg')"
            ))),
        }
    }
}

/// A Legendre kernel with its mirror-map pair.
///
/// Kernels are immutable values and are shared freely between runs.
/// `bregman` and `dual_bregman` default to the definitional formulas; the
/// built-in kernels override them with closed forms.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// `Some` for the built-in kernels. Closed-form prox solvers dispatch on it.
    fn id(&self) -> Option<KernelId> {
        None
    }

    fn domain(&self) -> DomainKind;

    /// Checks that `x` lies in `int dom h`.
    fn check_primal(&self, x: &[f64]) -> Result<()>;

    /// Checks that `y` lies in `int dom h*`.
    fn check_dual(&self, y: &[f64]) -> Result<()>;

    /// `h(x)`
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// `h*(y)`
    fn conjugate(&self, y: &[f64]) -> Result<f64>;

    /// Writes `∇h(x)` into `out`.
    fn mirror_into(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes `∇h*(y)` into `out`.
    fn inverse_mirror_into(&self, y: &[f64], out: &mut [f64]) -> Result<()>;

    fn mirror(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.mirror_into(x, &mut out)?;
        Ok(out)
    }

    fn inverse_mirror(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; y.len()];
        self.inverse_mirror_into(y, &mut out)?;
        Ok(out)
    }

    /// `D_h(x, y)`
    fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        bregman_definitional(self, x, y)
    }

    /// `D_{h*}(u, v)`
    fn dual_bregman(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        dual_bregman_definitional(self, u, v)
    }
}

/// `h(x) − h(y) − ⟨∇h(y), x − y⟩`
pub fn bregman_definitional<K: Kernel + ?Sized>(kernel: &K, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    let grad_y = kernel.mirror(y)?;
    let lin: f64 = grad_y
        .iter()
        .zip(x.iter().zip(y))
        .map(|(g, (xi, yi))| g * (xi - yi))
        .sum();
    Ok(kernel.value(x)? - kernel.value(y)? - lin)
}

/// `h*(u) − h*(v) − ⟨∇h*(v), u − v⟩`
pub fn dual_bregman_definitional<K: Kernel + ?Sized>(
    kernel: &K,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    check_len(u.len(), v.len())?;
    let grad_v = kernel.inverse_mirror(v)?;
    let lin: f64 = grad_v
        .iter()
        .zip(u.iter().zip(v))
        .map(|(g, (ui, vi))| g * (ui - vi))
        .sum();
    Ok(kernel.conjugate(u)? - kernel.conjugate(v)? - lin)
}

/// `h(x) = ½‖x‖²`
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Kernel for Euclidean {
    fn name(&self) -> &str {
        "euclidean"
    }

    fn id(&self) -> Option<KernelId> {
        Some(KernelId::Euclidean)
    }

    fn domain(&self) -> DomainKind {
        DomainKind::FullSpace
    }

    fn check_primal(&self, x: &[f64]) -> Result<()> {
        match x.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(j) => Err(Error::DomainViolation(format!(
                "coordinate {j} is not finite ({})",
                x[j]
            ))),
        }
    }

    fn check_dual(&self, y: &[f64]) -> Result<()> {
        self.check_primal(y)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_primal(x)?;
        Ok(0.5 * dot(x, x))
    }

    fn conjugate(&self, y: &[f64]) -> Result<f64> {
        self.value(y)
    }

    fn mirror_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(x.len(), out.len())?;
        self.check_primal(x)?;
        out.copy_from_slice(x);
        Ok(())
    }

    fn inverse_mirror_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.mirror_into(y, out)
    }

    fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(x.len(), y.len())?;
        self.check_primal(x)?;
        self.check_primal(y)?;
        Ok(0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    fn dual_bregman(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.bregman(u, v)
    }
}

/// Burg entropy `h(x) = −Σ log x_i` on the open positive orthant.
///
/// Its divergence is the Itakura–Saito divergence; the dual divergence
/// has the same form on the negative orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct Burg;

/// `Σ (r_i − log r_i − 1)` with `r_i = num_i / den_i`, evaluated via `log1p`.
fn itakura_saito(num: &[f64], den: &[f64]) -> f64 {
    num.iter()
        .zip(den)
        .map(|(a, b)| {
            let u = (a - b) / b;
            u - u.ln_1p()
        })
        .sum()
}

impl Kernel for Burg {
    fn name(&self) -> &str {
        "burg"
    }

    fn id(&self) -> Option<KernelId> {
        Some(KernelId::Burg)
    }

    fn domain(&self) -> DomainKind {
        DomainKind::PositiveOrthant
    }

    fn check_primal(&self, x: &[f64]) -> Result<()> {
        match x.iter().position(|v| !(v.is_finite() && *v >= DOMAIN_EPS)) {
            None => Ok(()),
            Some(j) => Err(Error::DomainViolation(format!(
                "coordinate {j} = {} is outside the open positive orthant",
                x[j]
            ))),
        }
    }

    fn check_dual(&self, y: &[f64]) -> Result<()> {
        match y
            .iter()
            .position(|v| !(v.is_finite() && *v < 0.0 && -1.0 / v >= DOMAIN_EPS))
        {
            None => Ok(()),
            Some(j) => Err(Error::DomainViolation(format!(
                "dual coordinate {j} = {} is not strictly negative",
                y[j]
            ))),
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_primal(x)?;
        Ok(-x.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn conjugate(&self, y: &[f64]) -> Result<f64> {
        self.check_dual(y)?;
        Ok(-(y.len() as f64) - y.iter().map(|v| (-v).ln()).sum::<f64>())
    }

    fn mirror_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(x.len(), out.len())?;
        self.check_primal(x)?;
        for (o, v) in out.iter_mut().zip(x) {
            *o = -1.0 / v;
        }
        Ok(())
    }

    fn inverse_mirror_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(y.len(), out.len())?;
        self.check_dual(y)?;
        for (o, v) in out.iter_mut().zip(y) {
            *o = -1.0 / v;
        }
        Ok(())
    }

    fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(x.len(), y.len())?;
        self.check_primal(x)?;
        self.check_primal(y)?;
        Ok(itakura_saito(x, y))
    }

    fn dual_bregman(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_len(u.len(), v.len())?;
        self.check_dual(u)?;
        self.check_dual(v)?;
        Ok(itakura_saito(u, v))
    }
}
