//! Exact FLOP and parameter accounting for the three primitives.
//!
//! All arithmetic is exact integer arithmetic; floating point enters
//! only at the final division in [`steps_for_budget`]. Per-layer costs
//! follow the training convention of 6 FLOPs per multiply-accumulate
//! (forward plus two backward passes).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Primitive;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("no latency entry for primitive {0:?}")]
    MissingLatency(Primitive),
    #[error("unknown scale preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid scale config: {0}")]
    InvalidConfig(String),
}

/// Smallest multiple of `m` that is >= `x`.
pub fn multiple_of_ceil(x: u64, m: u64) -> u64 {
    assert!(m > 0);
    x.div_ceil(m) * m
}

/// SwiGLU MLP hidden width: `multiple_of(floor(2/3 * 4d * f), 1024)`,
/// rounding up to the next multiple.
pub fn mlp_hidden_dim(d: u64, f: f64) -> u64 {
    let raw = (8.0 * d as f64 * f / 3.0).floor() as u64;
    multiple_of_ceil(raw, 1024)
}

/// SSM hidden width: `multiple_of(floor(2/3 * 3d), 256)`.
pub fn ssm_hidden_dim(d: u64) -> u64 {
    multiple_of_ceil(2 * d, 256)
}

/// Raw Mamba-2 hyperparameters from which the derived widths follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsmParams {
    /// State dimension.
    pub n_s: u64,
    /// Convolution kernel size.
    pub k: u64,
    /// Number of groups.
    pub n_g: u64,
    /// SSM head dimension.
    pub d_h_ssm: u64,
}

/// Fully derived SSM configuration at a given model width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsmConfig {
    pub d_ssm: u64,
    pub n_s: u64,
    pub k: u64,
    pub n_g: u64,
    pub d_h_ssm: u64,
}

impl SsmConfig {
    pub fn derive(d: u64, params: SsmParams) -> SsmConfig {
        SsmConfig {
            d_ssm: ssm_hidden_dim(d),
            n_s: params.n_s,
            k: params.k,
            n_g: params.n_g,
            d_h_ssm: params.d_h_ssm,
        }
    }

    /// Number of SSM heads, `d_ssm / d_h_ssm`.
    pub fn n_ssm(&self) -> u64 {
        debug_assert_eq!(self.d_ssm % self.d_h_ssm, 0);
        self.d_ssm / self.d_h_ssm
    }

    /// Input projection width `2*d_ssm + 2*n_g*n_s + n_ssm`.
    pub fn d_in_proj(&self) -> u64 {
        2 * self.d_ssm + 2 * self.n_g * self.n_s + self.n_ssm()
    }

    /// Convolution channel count `d_ssm + 2*n_g*n_s`.
    pub fn d_conv(&self) -> u64 {
        self.d_ssm + 2 * self.n_g * self.n_s
    }
}

/// Per-scale model hyperparameters. `d_kv` and the MLP hidden width are
/// derived, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub d: u64,
    pub n_h: u64,
    pub d_h: u64,
    pub n_kv: u64,
    /// Sequence length in tokens.
    pub s: u64,
    /// MLP expansion factor.
    pub f: f64,
    pub vocab: u64,
    /// Batch size in tokens per optimizer step.
    pub tokens_per_step: u64,
    pub ssm: SsmParams,
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<(), ScaleError> {
        if self.d != self.n_h * self.d_h {
            return Err(ScaleError::InvalidConfig(format!(
                "d = {} must equal n_h * d_h = {}",
                self.d,
                self.n_h * self.d_h
            )));
        }
        if self.n_kv > self.n_h {
            return Err(ScaleError::InvalidConfig("n_kv must not exceed n_h".into()));
        }
        if self.s == 0 || self.tokens_per_step == 0 || self.d == 0 {
            return Err(ScaleError::InvalidConfig("dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Total key-value width `n_kv * d_h`.
    pub fn d_kv(&self) -> u64 {
        self.n_kv * self.d_h
    }

    /// SwiGLU hidden width for this scale.
    pub fn mlp_hidden(&self) -> u64 {
        mlp_hidden_dim(self.d, self.f)
    }

    /// Derived SSM configuration for this scale.
    pub fn ssm_config(&self) -> SsmConfig {
        SsmConfig::derive(self.d, self.ssm)
    }
}

/// Counts of each primitive in a full-scale model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCounts {
    pub attn: u64,
    pub mlp: u64,
    pub ssm: u64,
}

impl LayerCounts {
    pub fn total(&self) -> u64 {
        self.attn + self.mlp + self.ssm
    }

    pub fn get(&self, p: Primitive) -> u64 {
        match p {
            Primitive::Mlp => self.mlp,
            Primitive::Attention => self.attn,
            Primitive::Mamba => self.ssm,
        }
    }
}

/// Training FLOPs per token for one attention layer:
/// `6(2d^2 + 2d*d_kv) + 12sd`.
pub fn flops_attention(cfg: &ScaleConfig) -> u128 {
    let d = cfg.d as u128;
    let d_kv = cfg.d_kv() as u128;
    let s = cfg.s as u128;
    6 * (2 * d * d + 2 * d * d_kv) + 12 * s * d
}

/// Training FLOPs per token for one SwiGLU MLP layer: `18dh`.
pub fn flops_mlp(cfg: &ScaleConfig) -> u128 {
    18 * cfg.d as u128 * cfg.mlp_hidden() as u128
}

/// Training FLOPs per token for one Mamba-2 layer:
/// `6(d*d_in_proj + d_conv*k + 2*n_ssm*d_h_ssm*n_s + d_ssm*d)`.
pub fn flops_ssm(cfg: &ScaleConfig, ssm: &SsmConfig) -> u128 {
    let d = cfg.d as u128;
    6 * (d * ssm.d_in_proj() as u128
        + ssm.d_conv() as u128 * ssm.k as u128
        + 2 * ssm.n_ssm() as u128 * ssm.d_h_ssm as u128 * ssm.n_s as u128
        + ssm.d_ssm as u128 * d)
}

/// Per-layer FLOP costs for the three primitives at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerLayerFlops {
    pub attn: u128,
    pub mlp: u128,
    pub ssm: u128,
}

impl PerLayerFlops {
    pub fn for_scale(cfg: &ScaleConfig) -> PerLayerFlops {
        PerLayerFlops {
            attn: flops_attention(cfg),
            mlp: flops_mlp(cfg),
            ssm: flops_ssm(cfg, &cfg.ssm_config()),
        }
    }
}

/// Total FLOPs per training step, `(sum over layers) * B`.
pub fn flops_per_step(counts: &LayerCounts, per_layer: &PerLayerFlops, tokens_per_step: u64) -> u128 {
    let per_token = counts.attn as u128 * per_layer.attn
        + counts.mlp as u128 * per_layer.mlp
        + counts.ssm as u128 * per_layer.ssm;
    per_token * tokens_per_step as u128
}

/// Training steps that exhaust `budget` at `c_step` FLOPs per step,
/// rounded to nearest with halves up. Exact integer rounding.
pub fn steps_for_budget(budget: u128, c_step: u128) -> u64 {
    assert!(budget > 0 && c_step > 0);
    ((2 * budget + c_step) / (2 * c_step)) as u64
}

/// Weight parameters of one attention layer: `2d^2 + 2d*d_kv`.
pub fn params_attention(cfg: &ScaleConfig) -> u128 {
    let d = cfg.d as u128;
    2 * d * d + 2 * d * cfg.d_kv() as u128
}

/// Weight parameters of one SwiGLU MLP layer: `3dh`.
pub fn params_mlp(cfg: &ScaleConfig) -> u128 {
    3 * cfg.d as u128 * cfg.mlp_hidden() as u128
}

/// Weight parameters of one Mamba-2 layer: in/out projections plus conv
/// weights. The few thousand dt/A/D/norm parameters are omitted.
pub fn params_ssm(cfg: &ScaleConfig, ssm: &SsmConfig) -> u128 {
    let d = cfg.d as u128;
    d * ssm.d_in_proj() as u128
        + ssm.d_conv() as u128 * ssm.k as u128
        + ssm.d_ssm as u128 * d
}

/// (non-embedding, total) parameter counts for a model with the given
/// layer counts. The tied embedding `vocab * d` is counted once.
pub fn params_model(counts: &LayerCounts, cfg: &ScaleConfig) -> (u128, u128) {
    let ssm = cfg.ssm_config();
    let non_embed = counts.attn as u128 * params_attention(cfg)
        + counts.mlp as u128 * params_mlp(cfg)
        + counts.ssm as u128 * params_ssm(cfg, &ssm);
    let total = non_embed + cfg.vocab as u128 * cfg.d as u128;
    (non_embed, total)
}

/// Sums per-block latencies over a layer-count profile.
pub fn block_latency_total(
    counts: &LayerCounts,
    latency_ms: &HashMap<Primitive, f64>,
) -> Result<f64, ScaleError> {
    let mut total = 0.0;
    for p in Primitive::ALL {
        let n = counts.get(p);
        if n == 0 {
            continue;
        }
        let lat = latency_ms.get(&p).ok_or(ScaleError::MissingLatency(p))?;
        total += n as f64 * lat;
    }
    Ok(total)
}

/// Names of the scale presets shipped with the crate.
pub const PRESET_NAMES: [&str; 6] =
    ["350M-2prim", "1B-2prim", "3B-2prim", "350M-3prim", "1B-3prim", "3B-3prim"];

/// Loads a named built-in preset.
pub fn load_preset(name: &str) -> Result<ScaleConfig, ScaleError> {
    let json = match name {
        "350M-2prim" => include_str!("../presets/350M-2prim.json"),
        "1B-2prim" => include_str!("../presets/1B-2prim.json"),
        "3B-2prim" => include_str!("../presets/3B-2prim.json"),
        "350M-3prim" => include_str!("../presets/350M-3prim.json"),
        "1B-3prim" => include_str!("../presets/1B-3prim.json"),
        "3B-3prim" => include_str!("../presets/3B-3prim.json"),
        other => return Err(ScaleError::UnknownPreset(other.to_string())),
    };
    let cfg: ScaleConfig = serde_json::from_str(json)
        .map_err(|e| ScaleError::InvalidConfig(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
