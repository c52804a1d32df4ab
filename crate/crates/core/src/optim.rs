//! SGD with momentum and L2 decay, cosine annealing with warm restarts, and
//! the default learning rates per training mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Restart epochs used by every schedule unless overridden.
pub const DEFAULT_RESTARTS: [usize; 2] = [25, 75];
pub const MOMENTUM: f32 = 0.9;
pub const WEIGHT_DECAY: f32 = 1e-4;

/// Momentum buffer for one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    /// Identifies the parameter group in error messages.
    pub label: String,
    pub velocity: Vec<f32>,
    pub momentum: f32,
    pub weight_decay: f32,
}

impl SgdState {
    pub fn new(label: impl Into<String>, len: usize, momentum: f32, weight_decay: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum {momentum} not in [0, 1)")));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::invalid(format!("weight decay {weight_decay} must be non-negative")));
        }
        Ok(SgdState {
            label: label.into(),
            velocity: vec![0.0; len],
            momentum,
            weight_decay,
        })
    }
}

/// One SGD step: `g' = g + wd·p`, `v = μ·v + g'`, `p -= lr·v`.
///
/// Nothing is written when any gradient is non-finite.
pub fn sgd_step(params: &mut [f32], grads: &[f32], state: &mut SgdState, lr: f32) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::ShapeMismatch {
            op: "sgd_step",
            left: vec![params.len()],
            right: vec![grads.len(), state.velocity.len()],
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(state.label.clone()));
    }
    let (mu, wd) = (state.momentum, state.weight_decay);
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        let g = g + wd * *p;
        *v = mu * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Cosine annealing from `base_lr` to zero inside each segment delimited by
/// the restart epochs; the momentum buffers are left alone at restarts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    base_lr: f32,
    restarts: Vec<usize>,
    total_epochs: usize,
}

impl LrSchedule {
    pub fn new(base_lr: f32, restarts: Vec<usize>, total_epochs: usize) -> Result<Self> {
        if total_epochs == 0 {
            return Err(Error::invalid("schedule needs at least one epoch"));
        }
        if !(base_lr >= 0.0 && base_lr.is_finite()) {
            return Err(Error::invalid(format!("base learning rate {base_lr} must be non-negative")));
        }
        let increasing = restarts.windows(2).all(|w| w[0] < w[1]);
        if !increasing || restarts.first() == Some(&0) || restarts.last().is_some_and(|&r| r >= total_epochs) {
            return Err(Error::invalid(format!(
                "restarts {restarts:?} must be strictly increasing within (0, {total_epochs})"
            )));
        }
        Ok(LrSchedule {
            base_lr,
            restarts,
            total_epochs,
        })
    }

    /// Schedule for a run of `total_epochs`, keeping only the default restarts
    /// that fall inside the run.
    pub fn for_run(base_lr: f32, restarts: &[usize], total_epochs: usize) -> Result<Self> {
        let kept = restarts.iter().copied().filter(|&r| r > 0 && r < total_epochs).collect();
        Self::new(base_lr, kept, total_epochs)
    }

    pub fn base_lr(&self) -> f32 {
        self.base_lr
    }

    pub fn restarts(&self) -> &[usize] {
        &self.restarts
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    /// Learning rate for zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> Result<f32> {
        if epoch >= self.total_epochs {
            return Err(Error::invalid(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.total_epochs
            )));
        }
        let start = self.restarts.iter().rev().find(|&&r| r <= epoch).copied().unwrap_or(0);
        let end = self
            .restarts
            .iter()
            .find(|&&r| r > epoch)
            .copied()
            .unwrap_or(self.total_epochs);
        let phase = (epoch - start) as f64 / (end - start) as f64;
        let lr = 0.5 * self.base_lr as f64 * (1.0 + (std::f64::consts::PI * phase).cos());
        Ok(lr as f32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    SlotGs,
    SlotPs,
    Baseline,
    Finetune,
}

impl Mode {
    pub fn is_slot(self) -> bool {
        matches!(self, Mode::SlotGs | Mode::SlotPs)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::SlotGs => "slot_gs",
            Mode::SlotPs => "slot_ps",
            Mode::Baseline => "baseline",
            Mode::Finetune => "finetune",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slot_gs" | "gs" => Ok(Mode::SlotGs),
            "slot_ps" | "ps" => Ok(Mode::SlotPs),
            "baseline" => Ok(Mode::Baseline),
            "finetune" => Ok(Mode::Finetune),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Base learning rate: GS uses 0.2 up to K=8 and 0.1 beyond, PS uses 25,
/// and direct weight training uses 0.01.
pub fn policy_lr(mode: Mode, k: usize) -> f32 {
    match mode {
        Mode::SlotGs if k <= 8 => 0.2,
        Mode::SlotGs => 0.1,
        Mode::SlotPs => 25.0,
        Mode::Baseline | Mode::Finetune => 0.01,
    }
}

/// L2 penalty per mode; probabilistic sampling trains without decay.
pub fn policy_weight_decay(mode: Mode) -> f32 {
    match mode {
        Mode::SlotPs => 0.0,
        _ => WEIGHT_DECAY,
    }
}
