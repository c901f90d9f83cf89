use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DistillError;
use crate::model::TrainConfig;

/// How the original-context and counterfactual-context teacher
/// distributions are combined into one target.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ModFn {
    /// Plain teacher distribution.
    #[default]
    None,
    Max,
    Mean,
    ExpMean,
    Swap,
    /// `lambda * z + (1 - lambda) * z'`; `Blend(0.0)` equals `Swap`.
    Blend(f64),
}

impl fmt::Display for ModFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModFn::None => f.write_str("none"),
            ModFn::Max => f.write_str("max"),
            ModFn::Mean => f.write_str("mean"),
            ModFn::ExpMean => f.write_str("expMean"),
            ModFn::Swap => f.write_str("swap"),
            ModFn::Blend(l) => write!(f, "blend:{l}"),
        }
    }
}

impl FromStr for ModFn {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ModFn::None),
            "max" => Ok(ModFn::Max),
            "mean" => Ok(ModFn::Mean),
            "expMean" | "expmean" | "exp_mean" => Ok(ModFn::ExpMean),
            "swap" => Ok(ModFn::Swap),
            _ => {
                let lambda = s
                    .strip_prefix("blend:")
                    .and_then(|l| l.parse::<f64>().ok())
                    .ok_or_else(|| {
                        format!("unknown modification {s:?} (none, max, mean, expMean, swap, blend:<lambda>)")
                    })?;
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(format!("blend weight {lambda} outside [0, 1]"));
                }
                Ok(ModFn::Blend(lambda))
            }
        }
    }
}

impl Serialize for ModFn {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    pub alpha_ce: f64,
    pub alpha_kl: f64,
    pub temperature: f64,
    /// Multiply the KL term by `T^2`.
    pub scale_kl_by_t2: bool,
    pub mod_fn: ModFn,
    /// Add counterfactual sequences to the training set.
    pub augment: bool,
    /// Also modify the targets of counterfactual sequences (with the roles
    /// of the two contexts exchanged).
    pub modify_both: bool,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            alpha_ce: 0.5,
            alpha_kl: 0.5,
            temperature: 2.0,
            scale_kl_by_t2: true,
            mod_fn: ModFn::None,
            augment: false,
            modify_both: true,
            lr: 0.1,
            epochs: 50,
            batch: 32,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<(), DistillError> {
        let bad = |m: String| Err(DistillError::InvalidConfig(m));
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        for (name, w) in [("alpha_ce", self.alpha_ce), ("alpha_kl", self.alpha_kl)] {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("{name} must be non-negative, got {w}"));
            }
        }
        if self.alpha_ce + self.alpha_kl <= 0.0 {
            return bad("alpha_ce + alpha_kl must be positive".into());
        }
        self.train_config().validate()?;
        Ok(())
    }

    /// `T^2` or 1, depending on the scaling flag.
    pub fn kl_scale(&self) -> f64 {
        if self.scale_kl_by_t2 {
            self.temperature * self.temperature
        } else {
            1.0
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch: self.batch,
            seed: self.seed,
            init_scale: self.init_scale,
        }
    }
}
