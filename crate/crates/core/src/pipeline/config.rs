use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::flowcore::FlowConfig;
use crate::modality::Task;
use crate::{Error, Result};

/// The four component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Fuse the unmapped features and train with the task loss only.
    NoAlignment,
    /// Drop the backward (cyclic) loss.
    NoCyclic,
    /// Force every margin to zero.
    NoAdaptive,
    /// Train on same-sample pairs only.
    NoOneToMany,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::NoAlignment,
        Ablation::NoCyclic,
        Ablation::NoAdaptive,
        Ablation::NoOneToMany,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoAlignment => "no_alignment",
            Ablation::NoCyclic => "no_cyclic",
            Ablation::NoAdaptive => "no_adaptive",
            Ablation::NoOneToMany => "no_one_to_many",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub no_alignment: bool,
    pub no_cyclic: bool,
    pub no_adaptive: bool,
    pub no_one_to_many: bool,
}

impl AblationFlags {
    pub fn set(&mut self, ablation: Ablation) {
        match ablation {
            Ablation::NoAlignment => self.no_alignment = true,
            Ablation::NoCyclic => self.no_cyclic = true,
            Ablation::NoAdaptive => self.no_adaptive = true,
            Ablation::NoOneToMany => self.no_one_to_many = true,
        }
    }

    pub fn only(ablation: Ablation) -> Self {
        let mut flags = Self::default();
        flags.set(ablation);
        flags
    }
}

/// Every training hyperparameter and ablation switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Shared latent width; must be even (time embedding width).
    pub d: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub alpha_f: f64,
    pub alpha_b: f64,
    pub epsilon: f64,
    pub beta: usize,
    pub euler_steps: usize,
    /// Bin count of the multi-class regression accuracy.
    pub acc_bins: usize,
    pub ablation: AblationFlags,
    /// Stop main-task gradients at the source features before transport.
    pub detach_main_path: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d: 16,
            epochs: 60,
            batch_size: 32,
            lr: 1e-3,
            alpha_f: 1.0,
            alpha_b: 0.1,
            epsilon: 0.1,
            beta: 4,
            euler_steps: 2,
            acc_bins: 7,
            ablation: AblationFlags::default(),
            detach_main_path: false,
        }
    }
}

/// Loss weights and pair settings after applying the ablation flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effective {
    pub align: bool,
    pub alpha_f: f64,
    pub alpha_b: f64,
    pub beta: usize,
    pub adaptive: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || !self.d.is_multiple_of(2) {
            return Err(Error::Config(format!("d must be even and positive, got {}", self.d)));
        }
        for (name, v) in [("alpha_f", self.alpha_f), ("alpha_b", self.alpha_b), ("epsilon", self.epsilon)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.euler_steps == 0 {
            return Err(Error::Config("euler_steps must be >= 1".into()));
        }
        if self.acc_bins < 2 {
            return Err(Error::Config("acc_bins must be >= 2".into()));
        }
        Ok(())
    }

    pub fn effective(&self) -> Effective {
        let flags = self.ablation;
        Effective {
            align: !flags.no_alignment,
            alpha_f: if flags.no_alignment { 0.0 } else { self.alpha_f },
            alpha_b: if flags.no_alignment || flags.no_cyclic { 0.0 } else { self.alpha_b },
            beta: if flags.no_one_to_many { 0 } else { self.beta },
            adaptive: !flags.no_adaptive,
        }
    }

    pub fn flow_config(&self, task: Task) -> FlowConfig {
        FlowConfig {
            epsilon: self.epsilon,
            beta: self.effective().beta,
            euler_steps: self.euler_steps,
            task,
        }
    }

    pub fn with_ablation(&self, ablation: Option<Ablation>) -> Self {
        let mut cfg = self.clone();
        if let Some(a) = ablation {
            cfg.ablation.set(a);
        }
        cfg
    }
}
