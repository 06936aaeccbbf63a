use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Focal { gamma: f64, alpha: f64 },
}

impl LossKind {
    pub fn focal_default() -> Self {
        LossKind::Focal {
            gamma: 2.0,
            alpha: 0.25,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Focal { .. } => "focal",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LossKind::Focal { gamma, alpha } = *self {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(Error::Parameter(format!(
                    "focal gamma must be >= 0, got {gamma}"
                )));
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Parameter(format!(
                    "focal alpha must lie in (0,1), got {alpha}"
                )));
            }
        }
        Ok(())
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

fn check(yhat: &[f64], y: &[f64]) -> Result<()> {
    if yhat.len() != y.len() {
        return Err(Error::Shape {
            op: "loss",
            left: (yhat.len(), 1),
            right: (y.len(), 1),
        });
    }
    if yhat.is_empty() {
        return Err(Error::Input("loss over an empty batch".into()));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Input(format!("label {v} is not 0/1")));
    }
    Ok(())
}

pub fn bce_loss(yhat: &[f64], y: &[f64]) -> Result<f64> {
    check(yhat, y)?;
    let total: f64 = yhat
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = clip(p);
            t * p.ln() + (1.0 - t) * (1.0 - p).ln()
        })
        .sum();
    Ok(-total / y.len() as f64)
}

pub fn focal_loss(yhat: &[f64], y: &[f64], gamma: f64, alpha: f64) -> Result<f64> {
    check(yhat, y)?;
    LossKind::Focal { gamma, alpha }.validate()?;
    let total: f64 = yhat
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = clip(p);
            alpha * t * (1.0 - p).powf(gamma) * p.ln()
                + (1.0 - alpha) * (1.0 - t) * p.powf(gamma) * (1.0 - p).ln()
        })
        .sum();
    Ok(-total / y.len() as f64)
}

pub fn loss_value(kind: LossKind, yhat: &[f64], y: &[f64]) -> Result<f64> {
    match kind {
        LossKind::Bce => bce_loss(yhat, y),
        LossKind::Focal { gamma, alpha } => focal_loss(yhat, y, gamma, alpha),
    }
}

/// Derivative of the mean loss with respect to one pre-sigmoid logit.
/// Zero where the probability is clipped.
pub(crate) fn logit_grad(kind: LossKind, p: f64, y: f64, n: usize) -> f64 {
    if !(PROB_CLIP..=1.0 - PROB_CLIP).contains(&p) {
        return 0.0;
    }
    let n = n as f64;
    match kind {
        LossKind::Bce => (p - y) / n,
        LossKind::Focal { gamma, alpha } => {
            let q = 1.0 - p;
            if y == 1.0 {
                -alpha * (q.powf(gamma + 1.0) - gamma * p * q.powf(gamma) * p.ln()) / n
            } else {
                (1.0 - alpha) * (p.powf(gamma + 1.0) - gamma * p.powf(gamma) * q * q.ln()) / n
            }
        }
    }
}
