//! Base functions of cylindrical test functions: a closed family of
//! combinators with exact gradients, so that positivity of the partial
//! derivatives can be certified at every evaluation.

use crate::error::{positive, Error, Result};
use crate::tataru::{psi, psi_prime};

#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    /// `offset + sum_i weights[i] r_i`.
    Affine { weights: Vec<f64>, offset: f64 },
    /// `c - (b/m) log sum_i exp(log_weights[i] - m scales[i] psi_eps(r_i))`.
    SoftMin { b: f64, c: f64, m: f64, eps: f64, log_weights: Vec<f64>, scales: Vec<f64> },
    /// `(r_0, r) -> a r_0 + inner(r)`.
    LeadingLinear { a: f64, inner: Box<Phi> },
    /// `truncation_n(inner(r))`, see [`truncation`].
    Truncate { n: f64, inner: Box<Phi> },
}

/// Increasing `C^1` cut-off: the identity up to `n`, the constant `n + 1`
/// from `n + 2` on, and `n + 2u - u^2` with `u = (r - n)/2` in between (the
/// cubic Hermite blend with these end conditions degenerates to this
/// quadratic). Returns the value and the derivative.
pub fn truncation(n: f64, r: f64) -> (f64, f64) {
    if r <= n {
        (r, 1.0)
    } else if r >= n + 2.0 {
        (n + 1.0, 0.0)
    } else {
        let u = 0.5 * (r - n);
        (n + 2.0 * u - u * u, 1.0 - u)
    }
}

impl Phi {
    pub fn affine(weights: Vec<f64>, offset: f64) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) || !offset.is_finite() {
            return Err(Error::ParameterOutOfRange { name: "weights", value: f64::NAN });
        }
        Ok(Phi::Affine { weights, offset })
    }

    pub fn soft_min(b: f64, c: f64, m: f64, eps: f64, log_weights: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        positive("b", b)?;
        positive("m", m)?;
        positive("epsilon", eps)?;
        if log_weights.len() != scales.len() || log_weights.is_empty() {
            return Err(Error::ParameterOutOfRange { name: "scales", value: scales.len() as f64 });
        }
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::ParameterOutOfRange { name: "scales", value: f64::NAN });
        }
        Ok(Phi::SoftMin { b, c, m, eps, log_weights, scales })
    }

    pub fn leading_linear(a: f64, inner: Phi) -> Result<Self> {
        positive("a", a)?;
        Ok(Phi::LeadingLinear { a, inner: Box::new(inner) })
    }

    pub fn truncate(n: f64, inner: Phi) -> Result<Self> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::ParameterOutOfRange { name: "n", value: n });
        }
        Ok(Phi::Truncate { n, inner: Box::new(inner) })
    }

    /// Number of arguments.
    pub fn arity(&self) -> usize {
        match self {
            Phi::Affine { weights, .. } => weights.len(),
            Phi::SoftMin { scales, .. } => scales.len(),
            Phi::LeadingLinear { inner, .. } => 1 + inner.arity(),
            Phi::Truncate { inner, .. } => inner.arity(),
        }
    }

    /// Bounded on `[0, inf)^k`; only truncated trees are.
    pub fn is_bounded(&self) -> bool {
        matches!(self, Phi::Truncate { .. })
    }

    /// Partials may vanish (past a truncation knee).
    pub fn is_truncated(&self) -> bool {
        match self {
            Phi::Truncate { .. } => true,
            Phi::LeadingLinear { inner, .. } => inner.is_truncated(),
            _ => false,
        }
    }

    pub fn value(&self, r: &[f64]) -> Result<f64> {
        Ok(self.eval(r)?.0)
    }

    /// Value and gradient at `r`.
    pub fn eval(&self, r: &[f64]) -> Result<(f64, Vec<f64>)> {
        if r.len() != self.arity() {
            return Err(Error::ParameterOutOfRange { name: "arity", value: r.len() as f64 });
        }
        if r.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::ParameterOutOfRange { name: "r", value: f64::NAN });
        }
        Ok(self.eval_unchecked(r))
    }

    fn eval_unchecked(&self, r: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Phi::Affine { weights, offset } => {
                let v = offset + weights.iter().zip(r).map(|(w, x)| w * x).sum::<f64>();
                (v, weights.clone())
            }
            Phi::SoftMin { b, c, m, eps, log_weights, scales } => {
                let z: Vec<f64> =
                    log_weights.iter().zip(scales).zip(r).map(|((lw, s), x)| lw - m * s * psi(*eps, *x)).collect();
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
                let lse = zmax + sum.ln();
                let grad = z
                    .iter()
                    .zip(scales)
                    .zip(r)
                    .map(|((zi, s), x)| b * ((zi - lse).exp()) * s * psi_prime(*eps, *x))
                    .collect();
                (c - b / m * lse, grad)
            }
            Phi::LeadingLinear { a, inner } => {
                let (v, g) = inner.eval_unchecked(&r[1..]);
                let mut grad = Vec::with_capacity(r.len());
                grad.push(*a);
                grad.extend(g);
                (a * r[0] + v, grad)
            }
            Phi::Truncate { n, inner } => {
                let (v, g) = inner.eval_unchecked(r);
                let (tv, td) = truncation(*n, v);
                (tv, g.into_iter().map(|x| x * td).collect())
            }
        }
    }

    /// Check the class-T sign condition on a gradient.
    pub fn check_partials(&self, grad: &[f64]) -> Result<()> {
        let allow_zero = self.is_truncated();
        for (index, &value) in grad.iter().enumerate() {
            let ok = if allow_zero { value >= 0.0 } else { value > 0.0 };
            if !ok || !value.is_finite() {
                return Err(Error::NotInClassT { index, value });
            }
        }
        Ok(())
    }
}
