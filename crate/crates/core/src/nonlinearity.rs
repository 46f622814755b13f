//! Gauge-invariant nonlinearities `f(u) = g(|u|²)·u`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A nonlinearity given through `g` acting on the squared modulus, together
/// with the antiderivative `G` of `g` normalized by `G(0) = 0`.
///
/// The energy density contribution is `-G(|u|²)/2`.
#[derive(Clone)]
pub enum Nonlinearity {
    /// `f(u) = sign·|u|^{p-1}u`, i.e. `g(s) = sign·s^{(p-1)/2}` with `p > 1`.
    /// `sign = +1` is focusing.
    Power { sign: f64, exponent: f64 },
    /// `f(u) = |u|^{p-1}u - |u|^{q-1}u`.
    DoublePower { p: f64, q: f64 },
    /// User-supplied `g` and `G`.
    Custom {
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        antiderivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Nonlinearity::Power { sign, exponent } => {
                write!(f, "Power {{ sign: {sign}, exponent: {exponent} }}")
            }
            Nonlinearity::DoublePower { p, q } => write!(f, "DoublePower {{ p: {p}, q: {q} }}"),
            Nonlinearity::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Nonlinearity {
    /// The focusing cubic nonlinearity `f(u) = |u|²u`: `g(s) = s`.
    pub fn cubic_focusing() -> Self {
        Nonlinearity::Power {
            sign: 1.0,
            exponent: 3.0,
        }
    }

    /// `g ≡ 0`; turns the flow into plain linear heat/inverse-power iteration.
    pub fn none() -> Self {
        Nonlinearity::Custom {
            g: Arc::new(|_| 0.0),
            antiderivative: Arc::new(|_| 0.0),
        }
    }

    pub fn power(sign: f64, exponent: f64) -> Result<Self> {
        if exponent <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "power nonlinearity needs exponent > 1, got {exponent}"
            )));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::InvalidParameter(format!(
                "power nonlinearity sign must be +1 or -1, got {sign}"
            )));
        }
        Ok(Nonlinearity::Power { sign, exponent })
    }

    /// `g(s)` for `s ≥ 0`.
    pub fn g(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Power { sign, exponent } => sign * s.powf((exponent - 1.0) / 2.0),
            Nonlinearity::DoublePower { p, q } => {
                s.powf((p - 1.0) / 2.0) - s.powf((q - 1.0) / 2.0)
            }
            Nonlinearity::Custom { g, .. } => g(s),
        }
    }

    /// Antiderivative `G(s) = ∫₀ˢ g`, `G(0) = 0`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Power { sign, exponent } => {
                let k = (exponent + 1.0) / 2.0;
                sign * s.powf(k) / k
            }
            Nonlinearity::DoublePower { p, q } => {
                let kp = (p + 1.0) / 2.0;
                let kq = (q + 1.0) / 2.0;
                s.powf(kp) / kp - s.powf(kq) / kq
            }
            Nonlinearity::Custom { antiderivative, .. } => antiderivative(s),
        }
    }
}
