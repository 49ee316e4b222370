//! Scalar kernel families on the real line.
//!
//! Every kernel here is either positive definite (Gaussian, Gaussian mixtures,
//! exp-prod) or conditionally positive definite (unrectified `-|x - y|^alpha`
//! for `alpha` in `(0, 2]`). Either way the squared MMD between two
//! probability measures is a squared norm and therefore nonnegative.
//!
//! Kernels parse from short config strings:
//!
//! ```
//! use mmdrl::Kernel;
//!
//! let k: Kernel = "gaussian_mix:h=8,10,12".parse().unwrap();
//! assert_eq!(k.eval(0.0, 0.0), 3.0);
//! assert_eq!(k.to_string(), "gaussian_mix:h=8,10,12");
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A symmetric scalar kernel `k(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Kernel {
    /// `exp(-(x - y)^2 / h)`.
    Gaussian { h: f64 },
    /// Sum of Gaussians over a set of bandwidths.
    GaussianMixture { bandwidths: Vec<f64> },
    /// `-|x - y|^alpha` with `alpha` in `(0, 2]`.
    Unrectified { alpha: f64 },
    /// Nonnegative combination `sum_i c_i * (-|x - y|^alpha_i)`.
    UnrectifiedMixture { components: Vec<(f64, f64)> },
    /// `exp(x * y / sigma_sq)`.
    ExpProd { sigma_sq: f64 },
}

/// Bandwidths of the wide mixture used for large-scale agents, `{1, ..., 10}`.
pub const WIDE_MIXTURE_BANDWIDTHS: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

/// Bandwidths used by the tabular chain experiment, `{8, 10, 12}`.
pub const TABULAR_BANDWIDTHS: [f64; 3] = [8.0, 10.0, 12.0];

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        domain(format!("{name} must be finite and > 0, got {v}"))
    }
}

fn order(alpha: f64) -> Result<f64> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 2.0 {
        Ok(alpha)
    } else {
        domain(format!("unrectified order must lie in (0, 2], got {alpha}"))
    }
}

#[inline]
fn gaussian(h: f64, d: f64) -> f64 {
    (-d * d / h).exp()
}

#[inline]
fn gaussian_grad(h: f64, d: f64) -> f64 {
    -2.0 * d / h * (-d * d / h).exp()
}

#[inline]
fn unrectified(alpha: f64, d: f64) -> f64 {
    -d.abs().powf(alpha)
}

/// Derivative of `-|d|^alpha` in `d`. At `d == 0` this is 0: the true
/// derivative for `alpha > 1` and the symmetric subgradient for `alpha <= 1`.
#[inline]
fn unrectified_grad(alpha: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        -alpha * d.abs().powf(alpha - 1.0) * d.signum()
    }
}

impl Kernel {
    pub fn gaussian(h: f64) -> Result<Self> {
        Ok(Kernel::Gaussian {
            h: positive("bandwidth", h)?,
        })
    }

    pub fn gaussian_mixture(bandwidths: &[f64]) -> Result<Self> {
        if bandwidths.is_empty() {
            return domain("gaussian mixture needs at least one bandwidth");
        }
        let bandwidths = bandwidths
            .iter()
            .map(|&h| positive("bandwidth", h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel::GaussianMixture { bandwidths })
    }

    /// Mixture over bandwidths `{1, ..., 10}`.
    pub fn wide_mixture() -> Self {
        Kernel::GaussianMixture {
            bandwidths: WIDE_MIXTURE_BANDWIDTHS.to_vec(),
        }
    }

    /// Mixture over bandwidths `{8, 10, 12}`, the tabular default.
    pub fn tabular_mixture() -> Self {
        Kernel::GaussianMixture {
            bandwidths: TABULAR_BANDWIDTHS.to_vec(),
        }
    }

    /// Gaussian in the `exp(-(x - y)^2 / (2 sigma^2))` parameterization.
    pub fn gaussian_sigma(sigma: f64) -> Result<Self> {
        Self::gaussian(2.0 * positive("sigma", sigma)?.powi(2))
    }

    pub fn unrectified(alpha: f64) -> Result<Self> {
        Ok(Kernel::Unrectified { alpha: order(alpha)? })
    }

    /// Nonnegative combination of unrectified kernels given as `(weight, alpha)` pairs.
    pub fn unrectified_mixture(components: &[(f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return domain("unrectified mixture needs at least one component");
        }
        for &(c, a) in components {
            if !(c.is_finite() && c >= 0.0) {
                return domain(format!("mixture weight must be finite and >= 0, got {c}"));
            }
            order(a)?;
        }
        if components.iter().all(|&(c, _)| c == 0.0) {
            return domain("unrectified mixture has all-zero weights");
        }
        Ok(Kernel::UnrectifiedMixture {
            components: components.to_vec(),
        })
    }

    pub fn exp_prod(sigma_sq: f64) -> Result<Self> {
        Ok(Kernel::ExpProd {
            sigma_sq: positive("sigma_sq", sigma_sq)?,
        })
    }

    /// Re-checks the parameter invariants, e.g. after deserializing a variant by hand.
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Gaussian { h } => Self::gaussian(*h).map(drop),
            Kernel::GaussianMixture { bandwidths } => Self::gaussian_mixture(bandwidths).map(drop),
            Kernel::Unrectified { alpha } => Self::unrectified(*alpha).map(drop),
            Kernel::UnrectifiedMixture { components } => Self::unrectified_mixture(components).map(drop),
            Kernel::ExpProd { sigma_sq } => Self::exp_prod(*sigma_sq).map(drop),
        }
    }

    /// `k(x, y)`. Inputs are assumed finite; see [`Kernel::try_eval`].
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Gaussian { h } => gaussian(*h, x - y),
            Kernel::GaussianMixture { bandwidths } => {
                let d = x - y;
                bandwidths.iter().map(|&h| gaussian(h, d)).sum()
            }
            Kernel::Unrectified { alpha } => unrectified(*alpha, x - y),
            Kernel::UnrectifiedMixture { components } => {
                let d = x - y;
                components.iter().map(|&(c, a)| c * unrectified(a, d)).sum()
            }
            Kernel::ExpProd { sigma_sq } => (x * y / sigma_sq).exp(),
        }
    }

    pub fn try_eval(&self, x: f64, y: f64) -> Result<f64> {
        if !x.is_finite() || !y.is_finite() {
            return domain(format!("kernel arguments must be finite, got ({x}, {y})"));
        }
        Ok(self.eval(x, y))
    }

    /// `dk(x, y)/dx`.
    ///
    /// For unrectified kernels with `alpha <= 1` the derivative does not exist
    /// at `x == y`; 0 is returned there (a valid subgradient).
    #[inline]
    pub fn grad_x(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Gaussian { h } => gaussian_grad(*h, x - y),
            Kernel::GaussianMixture { bandwidths } => {
                let d = x - y;
                bandwidths.iter().map(|&h| gaussian_grad(h, d)).sum()
            }
            Kernel::Unrectified { alpha } => unrectified_grad(*alpha, x - y),
            Kernel::UnrectifiedMixture { components } => {
                let d = x - y;
                components.iter().map(|&(c, a)| c * unrectified_grad(a, d)).sum()
            }
            Kernel::ExpProd { sigma_sq } => y / sigma_sq * (x * y / sigma_sq).exp(),
        }
    }

    /// True for kernels whose Gram matrices are positive semidefinite outright.
    /// Unrectified kernels are only conditionally so.
    pub fn is_positive_definite(&self) -> bool {
        matches!(
            self,
            Kernel::Gaussian { .. } | Kernel::GaussianMixture { .. } | Kernel::ExpProd { .. }
        )
    }

    /// True when `k(x + c, y + c) == k(x, y)` for all shifts.
    pub fn is_shift_invariant(&self) -> bool {
        !matches!(self, Kernel::ExpProd { .. })
    }

    /// Smallest scale-sensitivity order, for kernels with `k(cx, cy) = |c|^a k(x, y)`
    /// componentwise. `None` for kernels that are not scale sensitive.
    pub fn min_scale_order(&self) -> Option<f64> {
        match self {
            Kernel::Unrectified { alpha } => Some(*alpha),
            Kernel::UnrectifiedMixture { components } => components
                .iter()
                .filter(|(c, _)| *c > 0.0)
                .map(|&(_, a)| a)
                .reduce(f64::min),
            _ => None,
        }
    }
}

fn fmt_list(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian { h } => write!(f, "gaussian:h={h}"),
            Kernel::GaussianMixture { bandwidths } => {
                write!(f, "gaussian_mix:h={}", fmt_list(bandwidths.iter().copied()))
            }
            Kernel::Unrectified { alpha } => write!(f, "unrectified:alpha={alpha}"),
            Kernel::UnrectifiedMixture { components } => write!(
                f,
                "unrectified_mix:alpha={};c={}",
                fmt_list(components.iter().map(|c| c.1)),
                fmt_list(components.iter().map(|c| c.0)),
            ),
            Kernel::ExpProd { sigma_sq } => write!(f, "expprod:sigma2={sigma_sq}"),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

/// Splits `key=value;key=value` into pairs.
fn parse_params(s: &str) -> Result<Vec<(&str, &str)>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {p:?}")))
        })
        .collect()
}

fn single(params: &[(&str, &str)], key: &str) -> Result<f64> {
    let list = list(params, key)?;
    match list.as_slice() {
        [v] => Ok(*v),
        _ => Err(Error::Parse(format!("{key} expects a single value"))),
    }
}

fn list(params: &[(&str, &str)], key: &str) -> Result<Vec<f64>> {
    let (_, v) = params
        .iter()
        .find(|(k, _)| *k == key)
        .ok_or_else(|| Error::Parse(format!("missing parameter {key}")))?;
    parse_list(v)
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("kernel spec {s:?} lacks a ':'")))?;
        let params = parse_params(rest)?;
        match family.trim() {
            "gaussian" => Kernel::gaussian(single(&params, "h")?),
            "gaussian_mix" => Kernel::gaussian_mixture(&list(&params, "h")?),
            "unrectified" => Kernel::unrectified(single(&params, "alpha")?),
            "unrectified_mix" => {
                let alphas = list(&params, "alpha")?;
                let weights = match params.iter().any(|(k, _)| *k == "c") {
                    true => list(&params, "c")?,
                    false => vec![1.0; alphas.len()],
                };
                if weights.len() != alphas.len() {
                    return Err(Error::Parse("alpha and c lists differ in length".into()));
                }
                let components: Vec<_> = weights.into_iter().zip(alphas).collect();
                Kernel::unrectified_mixture(&components)
            }
            "expprod" => Kernel::exp_prod(single(&params, "sigma2")?),
            other => Err(Error::Parse(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl TryFrom<String> for Kernel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Kernel> for String {
    fn from(k: Kernel) -> String {
        k.to_string()
    }
}
