//! Primitives, fixed-length architecture strings and their encodings.
//!
//! An architecture is an ordered sequence of computational primitives
//! (MLP, multi-head attention, Mamba-2 SSM) of a fixed search length,
//! 16 by default. Primitives carry a fixed total order `Mlp < Attention
//! < Mamba` that every tie-break in the toolkit relies on.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default search length for the 16-layer proxy.
pub const DEFAULT_LENGTH: usize = 16;

/// An atomic computational block. The declaration order defines the
/// canonical tie-break order used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Primitive {
    Mlp,
    Attention,
    Mamba,
}

impl Primitive {
    pub const ALL: [Primitive; 3] = [Primitive::Mlp, Primitive::Attention, Primitive::Mamba];

    /// Canonical token emitted by [`format_architecture`].
    pub fn token(self) -> &'static str {
        match self {
            Primitive::Mlp => "mlp",
            Primitive::Attention => "mh-attention",
            Primitive::Mamba => "mamba2",
        }
    }

    /// Parses a token, case-insensitively. "mamba" and "mb" are accepted
    /// aliases for the canonical "mamba2"; they are never emitted.
    pub fn from_token(tok: &str) -> Option<Primitive> {
        match tok.to_ascii_lowercase().as_str() {
            "mlp" => Some(Primitive::Mlp),
            "mh-attention" => Some(Primitive::Attention),
            "mamba2" | "mamba" | "mb" => Some(Primitive::Mamba),
            _ => None,
        }
    }

    /// Single-letter label used in compact pattern notation (M / A / Mb).
    pub fn short(self) -> &'static str {
        match self {
            Primitive::Mlp => "M",
            Primitive::Attention => "A",
            Primitive::Mamba => "Mb",
        }
    }

    /// Index in the fixed primitive order, used by one-hot encoding.
    pub fn index(self) -> usize {
        match self {
            Primitive::Mlp => 0,
            Primitive::Attention => 1,
            Primitive::Mamba => 2,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArchError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("expected {expected} tokens, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("token {0:?} is valid but not in this task's primitive pool")]
    OutOfPool(String),
    #[error("primitive pool must be nonempty and free of duplicates")]
    InvalidPool,
    #[error("search space size overflows the exact integer width")]
    Overflow,
}

/// The ordered set of primitives a task searches over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitivePool {
    members: Vec<Primitive>,
}

impl PrimitivePool {
    /// Builds a pool, normalizing member order to the fixed primitive order.
    pub fn new(members: &[Primitive]) -> Result<PrimitivePool, ArchError> {
        let mut sorted = members.to_vec();
        sorted.sort();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() != members.len() {
            return Err(ArchError::InvalidPool);
        }
        Ok(PrimitivePool { members: sorted })
    }

    /// The two-primitive pool {M, A}.
    pub fn two_primitive() -> PrimitivePool {
        PrimitivePool { members: vec![Primitive::Mlp, Primitive::Attention] }
    }

    /// The three-primitive pool {M, A, Mb}.
    pub fn three_primitive() -> PrimitivePool {
        PrimitivePool { members: Primitive::ALL.to_vec() }
    }

    pub fn members(&self) -> &[Primitive] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, p: Primitive) -> bool {
        self.members.contains(&p)
    }
}

/// A fixed-length arrangement of primitives: the searched and submitted
/// object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    layers: Vec<Primitive>,
}

impl Architecture {
    pub fn new(layers: Vec<Primitive>) -> Architecture {
        Architecture { layers }
    }

    pub fn layers(&self) -> &[Primitive] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Fraction of layers equal to `p`.
    pub fn share(&self, p: Primitive) -> f64 {
        if self.layers.is_empty() {
            return 0.0;
        }
        self.layers.iter().filter(|&&x| x == p).count() as f64 / self.layers.len() as f64
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_architecture(self))
    }
}

/// Parses a whitespace/newline-separated token string into an
/// architecture of exactly `length` layers drawn from `pool`.
pub fn parse_architecture(
    text: &str,
    pool: &PrimitivePool,
    length: usize,
) -> Result<Architecture, ArchError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != length {
        return Err(ArchError::WrongLength { expected: length, found: tokens.len() });
    }
    let mut layers = Vec::with_capacity(length);
    for tok in tokens {
        let p = Primitive::from_token(tok).ok_or_else(|| ArchError::UnknownToken(tok.to_string()))?;
        if !pool.contains(p) {
            return Err(ArchError::OutOfPool(tok.to_string()));
        }
        layers.push(p);
    }
    Ok(Architecture { layers })
}

/// Renders an architecture as space-separated lowercase canonical tokens.
/// Inverse of [`parse_architecture`].
pub fn format_architecture(arch: &Architecture) -> String {
    arch.layers.iter().map(|p| p.token()).collect::<Vec<_>>().join(" ")
}

/// One-hot encodes an architecture against the pool's member order.
/// The vector has length `arch.len() * pool.len()`, one block per layer.
pub fn encode_onehot(arch: &Architecture, pool: &PrimitivePool) -> Vec<f64> {
    let width = pool.len();
    let mut v = vec![0.0; arch.len() * width];
    for (i, layer) in arch.layers.iter().enumerate() {
        if let Some(j) = pool.members().iter().position(|p| p == layer) {
            v[i * width + j] = 1.0;
        }
    }
    v
}

/// Exact size of the search space, `|pool|^length`.
pub fn search_space_size(pool: &PrimitivePool, length: u32) -> Result<u128, ArchError> {
    let base = pool.len() as u128;
    base.checked_pow(length).ok_or(ArchError::Overflow)
}

/// Rewrites at most `edits` randomly chosen positions with primitives
/// drawn from `pool`. Deterministic given (arch, edits, rng state).
pub fn mutate<R: Rng>(
    arch: &Architecture,
    pool: &PrimitivePool,
    edits: usize,
    rng: &mut R,
) -> Architecture {
    assert!(edits >= 1 && edits <= arch.len(), "edits must be in 1..=length");
    let mut layers = arch.layers.clone();
    let mut positions: Vec<usize> = (0..layers.len()).collect();
    for i in 0..edits {
        let j = rng.gen_range(i..positions.len());
        positions.swap(i, j);
        let pos = positions[i];
        layers[pos] = pool.members()[rng.gen_range(0..pool.len())];
    }
    Architecture { layers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch(s: &str, pool: &PrimitivePool, len: usize) -> Architecture {
        parse_architecture(s, pool, len).unwrap()
    }

    #[test]
    fn parse_alternating_attention_mlp() {
        let pool = PrimitivePool::two_primitive();
        let text = "mh-attention mlp ".repeat(8);
        let a = arch(&text, &pool, 16);
        assert_eq!(a.len(), 16);
        assert_eq!(a.layers()[0], Primitive::Attention);
        assert_eq!(a.layers()[1], Primitive::Mlp);
        assert_eq!(a.share(Primitive::Attention), 0.5);
    }

    #[test]
    fn parse_uniform_mlp() {
        let pool = PrimitivePool::two_primitive();
        let a = arch(&"mlp ".repeat(16), &pool, 16);
        assert!(a.layers().iter().all(|&p| p == Primitive::Mlp));
    }

    #[test]
    fn parse_wrong_length() {
        let pool = PrimitivePool::three_primitive();
        let err = parse_architecture("mlp mamba2 mlp", &pool, 16).unwrap_err();
        assert_eq!(err, ArchError::WrongLength { expected: 16, found: 3 });
    }

    #[test]
    fn parse_unknown_token() {
        let pool = PrimitivePool::two_primitive();
        let err = parse_architecture(&("mlp ".repeat(15) + "conv"), &pool, 16).unwrap_err();
        assert_eq!(err, ArchError::UnknownToken("conv".into()));
    }

    #[test]
    fn parse_out_of_pool() {
        let pool = PrimitivePool::two_primitive();
        let err = parse_architecture(&("mlp ".repeat(15) + "mamba2"), &pool, 16).unwrap_err();
        assert_eq!(err, ArchError::OutOfPool("mamba2".into()));
    }

    #[test]
    fn parse_accepts_aliases_case_and_newlines() {
        let pool = PrimitivePool::three_primitive();
        let a = arch(&("MLP\nMamba mb Mamba2 ".to_owned() + &"mlp ".repeat(12)), &pool, 16);
        assert_eq!(a.layers()[1], Primitive::Mamba);
        assert_eq!(a.layers()[2], Primitive::Mamba);
        assert_eq!(a.layers()[3], Primitive::Mamba);
    }

    #[test]
    fn format_round_trips_hybrid_base_pattern() {
        // 2Mb + M + 11Mb + 2M
        let pool = PrimitivePool::three_primitive();
        let text = "mamba2 mamba2 mlp mamba2 mamba2 mamba2 mamba2 mamba2 mamba2 mamba2 mamba2 mamba2 mamba2 mamba2 mlp mlp";
        let a = arch(text, &pool, 16);
        let formatted = format_architecture(&a);
        assert!(formatted.starts_with("mamba2 mamba2 mlp"));
        assert_eq!(parse_architecture(&formatted, &pool, 16).unwrap(), a);
    }

    #[test]
    fn onehot_examples() {
        let two = PrimitivePool::two_primitive();
        let a = Architecture::new(vec![Primitive::Mlp, Primitive::Attention]);
        assert_eq!(encode_onehot(&a, &two), vec![1.0, 0.0, 0.0, 1.0]);

        let three = PrimitivePool::three_primitive();
        let b = Architecture::new(vec![Primitive::Mamba, Primitive::Mlp]);
        assert_eq!(encode_onehot(&b, &three), vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn onehot_sums_to_length() {
        let pool = PrimitivePool::three_primitive();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = random_arch(&pool, 16, &mut rng);
            let sum: f64 = encode_onehot(&a, &pool).iter().sum();
            assert_eq!(sum, 16.0);
        }
    }

    #[test]
    fn onehot_injective_exhaustive_l4() {
        let pool = PrimitivePool::two_primitive();
        let mut seen = std::collections::HashSet::new();
        for code in 0u32..16 {
            let layers: Vec<Primitive> = (0..4)
                .map(|i| if code >> i & 1 == 1 { Primitive::Attention } else { Primitive::Mlp })
                .collect();
            let v = encode_onehot(&Architecture::new(layers), &pool);
            let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            assert!(seen.insert(key), "one-hot encoding collided");
        }
    }

    #[test]
    fn search_space_sizes() {
        assert_eq!(search_space_size(&PrimitivePool::two_primitive(), 16).unwrap(), 65_536);
        assert_eq!(search_space_size(&PrimitivePool::three_primitive(), 16).unwrap(), 43_046_721);
        assert_eq!(search_space_size(&PrimitivePool::two_primitive(), 1).unwrap(), 2);
    }

    #[test]
    fn search_space_matches_enumeration() {
        // brute-force oracle for L <= 8, |pool| <= 3
        for (pool, base) in [
            (PrimitivePool::two_primitive(), 2u128),
            (PrimitivePool::three_primitive(), 3u128),
        ] {
            for len in 1..=8u32 {
                let mut count = 1u128;
                for _ in 0..len {
                    count *= base;
                }
                assert_eq!(search_space_size(&pool, len).unwrap(), count);
            }
        }
    }

    #[test]
    fn search_space_overflow() {
        assert_eq!(
            search_space_size(&PrimitivePool::three_primitive(), 100).unwrap_err(),
            ArchError::Overflow
        );
    }

    fn random_arch<R: Rng>(pool: &PrimitivePool, len: usize, rng: &mut R) -> Architecture {
        Architecture::new(
            (0..len).map(|_| pool.members()[rng.gen_range(0..pool.len())]).collect(),
        )
    }

    #[test]
    fn mutate_is_deterministic() {
        let pool = PrimitivePool::three_primitive();
        let a = Architecture::new(vec![Primitive::Mlp; 16]);
        let m1 = mutate(&a, &pool, 1, &mut ChaCha8Rng::seed_from_u64(11));
        let m2 = mutate(&a, &pool, 1, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(m1, m2);
    }

    #[test]
    fn mutate_hamming_distance_bound() {
        let pool = PrimitivePool::three_primitive();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let a = random_arch(&pool, 16, &mut rng);
            let edits = rng.gen_range(1..=16);
            let m = mutate(&a, &pool, edits, &mut rng);
            let dist = a
                .layers()
                .iter()
                .zip(m.layers())
                .filter(|(x, y)| x != y)
                .count();
            assert!(dist <= edits, "hamming distance {dist} exceeds edits {edits}");
        }
    }
}
