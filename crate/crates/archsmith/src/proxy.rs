//! Desk-scale stand-in for proxy training: a deterministic synthetic
//! fitness oracle, the 70:30 split utility, and the external-evaluator
//! client.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{format_architecture, Architecture, Primitive};

/// Whether higher or lower fitness is better for a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessDirection {
    Maximize,
    Minimize,
}

impl FitnessDirection {
    /// True if `a` is strictly better than `b` in this direction.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            FitnessDirection::Maximize => a > b,
            FitnessDirection::Minimize => a < b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FitnessSource {
    Synthetic,
    External,
}

/// A scored architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub architecture: Architecture,
    pub val_fitness: f64,
    pub test_fitness: f64,
    pub source: FitnessSource,
    pub seed: u64,
}

// Weights of the synthetic base function. Single source of truth.
const BASE_OFFSET: f64 = 0.5;
const W_RATIO: f64 = 0.2;
const W_INTERLEAVE: f64 = 0.2;
const W_LAST: f64 = 0.1;
const TARGET_ATTN_SHARE: f64 = 0.4;
const NOISE_HALF_WIDTH: f64 = 0.02;

/// Structural base score in [0.5, 1.0]: rewards a ~40% attention share,
/// interleaving of unequal neighbors, and a final MLP layer.
pub fn synthetic_base(arch: &Architecture) -> f64 {
    let layers = arch.layers();
    let f_ratio =
        (1.0 - (arch.share(Primitive::Attention) - TARGET_ATTN_SHARE).abs() / TARGET_ATTN_SHARE)
            .max(0.0);
    let f_inter = if layers.len() > 1 {
        layers.windows(2).filter(|w| w[0] != w[1]).count() as f64 / (layers.len() - 1) as f64
    } else {
        0.0
    };
    let f_last = if layers.last() == Some(&Primitive::Mlp) { 1.0 } else { 0.0 };
    BASE_OFFSET + W_RATIO * f_ratio + W_INTERLEAVE * f_inter + W_LAST * f_last
}

/// 64-bit FNV-1a. Used for reproducible keyed noise, not security.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn keyed_noise(arch: &Architecture, seed: u64, tag: &str) -> f64 {
    let mut key = format_architecture(arch).into_bytes();
    key.extend_from_slice(&seed.to_le_bytes());
    key.extend_from_slice(tag.as_bytes());
    let h = fnv1a(&key);
    // top 53 bits -> uniform in [0, 1)
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    (2.0 * u - 1.0) * NOISE_HALF_WIDTH
}

/// Deterministic synthetic fitness: base plus hash-keyed noise in
/// [-0.02, +0.02], mirrored as `1 - x` for minimize tasks.
pub fn synthetic_fitness(
    arch: &Architecture,
    seed: u64,
    direction: FitnessDirection,
) -> FitnessRecord {
    let base = synthetic_base(arch);
    let val = base + keyed_noise(arch, seed, "val");
    let test = base + keyed_noise(arch, seed, "test");
    let (val, test) = match direction {
        FitnessDirection::Maximize => (val, test),
        FitnessDirection::Minimize => (1.0 - val, 1.0 - test),
    };
    FitnessRecord {
        architecture: arch.clone(),
        val_fitness: val,
        test_fitness: test,
        source: FitnessSource::Synthetic,
        seed,
    }
}

/// Deterministic shuffled partition of `0..items` into
/// (train, validation) index sets with `|train| = round(ratio * items)`.
pub fn split_train_val(items: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(ratio > 0.0 && ratio < 1.0, "ratio must be in (0, 1)");
    let mut indices: Vec<usize> = (0..items).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = (ratio * items as f64).round() as usize;
    let val = indices.split_off(n_train.min(items));
    (indices, val)
}
