//! Per-sample regression losses, their gradients and influence functions, and
//! the MAE / RMSE evaluation scores.
//!
//! The Cauchy loss with constant `c` is
//!
//! ```text
//! L(y, ŷ) = (c² / 2) · ln(1 + ((y − ŷ) / c)²)
//! ```
//!
//! Its derivative with respect to the residual is bounded by `c / 2` (reached
//! at `|y − ŷ| = c`) and decays to zero for large residuals, whereas the
//! squared error has a derivative that grows linearly without bound.

use std::fmt;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Clf,
}

/// A loss identity plus the Cauchy constant. `c` is ignored for MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Float + Deserialize<'de>"))]
pub struct LossSpec<T> {
    pub kind: LossKind,
    #[serde(default = "one")]
    pub c: T,
}

fn one<T: Float>() -> T {
    T::one()
}

impl<T: Float> LossSpec<T> {
    pub fn mse() -> Self {
        LossSpec {
            kind: LossKind::Mse,
            c: T::one(),
        }
    }

    pub fn clf(c: T) -> Result<Self> {
        let spec = LossSpec {
            kind: LossKind::Clf,
            c,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c.is_finite() {
            return Err(Error::domain("loss constant must be finite"));
        }
        if self.kind == LossKind::Clf && self.c <= T::zero() {
            return Err(Error::domain("Cauchy loss constant must be positive"));
        }
        Ok(())
    }

    /// Per-sample loss value.
    pub fn loss(&self, r: Residual<T>) -> Result<T> {
        match self.kind {
            LossKind::Mse => mse_loss(r),
            LossKind::Clf => clf_loss(r, self.c),
        }
    }

    /// Short stable label, e.g. `MSE` or `CLF_10`.
    pub fn label(&self) -> String
    where
        T: fmt::Display,
    {
        match self.kind {
            LossKind::Mse => "MSE".to_string(),
            LossKind::Clf => format!("CLF_{}", self.c),
        }
    }
}

/// A target and a model output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual<T> {
    pub y: T,
    pub y_hat: T,
}

impl<T: Float> Residual<T> {
    pub fn new(y: T, y_hat: T) -> Self {
        Residual { y, y_hat }
    }

    /// `y − ŷ`.
    pub fn value(&self) -> T {
        self.y - self.y_hat
    }

    fn checked(&self) -> Result<T> {
        if self.y.is_finite() && self.y_hat.is_finite() {
            Ok(self.value())
        } else {
            Err(Error::domain("residual inputs must be finite"))
        }
    }
}

fn two<T: Float>() -> T {
    T::one() + T::one()
}

fn check_c<T: Float>(c: T) -> Result<()> {
    if c.is_finite() && c > T::zero() {
        Ok(())
    } else {
        Err(Error::domain("Cauchy loss constant must be positive and finite"))
    }
}

pub fn clf_loss<T: Float>(r: Residual<T>, c: T) -> Result<T> {
    check_c(c)?;
    let u = r.checked()? / c;
    // ln_1p keeps full precision for residuals much smaller than c
    Ok(c * c / two() * (u * u).ln_1p())
}

pub fn mse_loss<T: Float>(r: Residual<T>) -> Result<T> {
    let d = r.checked()?;
    Ok(d * d)
}

/// Derivative of the per-sample loss with respect to the prediction `ŷ`.
pub fn loss_grad<T: Float>(r: Residual<T>, spec: &LossSpec<T>) -> Result<T> {
    let d = r.checked()?;
    match spec.kind {
        LossKind::Mse => Ok(-two::<T>() * d),
        LossKind::Clf => {
            check_c(spec.c)?;
            let c2 = spec.c * spec.c;
            Ok(-c2 * d / (c2 + d * d))
        }
    }
}

/// Influence of a residual of magnitude `r_abs`: `|∂L/∂r|`.
pub fn influence<T: Float>(r_abs: T, spec: &LossSpec<T>) -> Result<T> {
    if r_abs.is_nan() || r_abs < T::zero() {
        return Err(Error::domain("residual magnitude must be nonnegative"));
    }
    match spec.kind {
        LossKind::Mse => Ok(two::<T>() * r_abs),
        LossKind::Clf => {
            check_c(spec.c)?;
            if r_abs.is_infinite() {
                return Ok(T::zero());
            }
            // c²r/(c²+r²) written as c·u/(1+u²) with u = r/c so that huge
            // residuals do not overflow r²
            let u = r_abs / spec.c;
            Ok(spec.c * u / (T::one() + u * u))
        }
    }
}

fn check_scores<T: Float>(targets: &[T], preds: &[T]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::usage("cannot score an empty vector"));
    }
    if targets.len() != preds.len() {
        return Err(Error::usage(format!(
            "length mismatch: {} targets, {} predictions",
            targets.len(),
            preds.len()
        )));
    }
    if targets.iter().chain(preds).any(|v| !v.is_finite()) {
        return Err(Error::domain("scores require finite entries"));
    }
    Ok(())
}

pub fn mae_score<T: Float>(targets: &[T], preds: &[T]) -> Result<T> {
    check_scores(targets, preds)?;
    let n = T::from(targets.len()).unwrap();
    let sum = targets
        .iter()
        .zip(preds)
        .fold(T::zero(), |acc, (&y, &p)| acc + (y - p).abs());
    Ok(sum / n)
}

pub fn rmse_score<T: Float>(targets: &[T], preds: &[T]) -> Result<T> {
    check_scores(targets, preds)?;
    let n = T::from(targets.len()).unwrap();
    let sum = targets.iter().zip(preds).fold(T::zero(), |acc, (&y, &p)| {
        let d = y - p;
        acc + d * d
    });
    Ok((sum / n).sqrt())
}
