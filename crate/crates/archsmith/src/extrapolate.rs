//! Scales a 16-layer base pattern to a target parameter budget by
//! stacking (whole-sequence repetition) or stretching (proportional
//! run expansion), and picks the depth whose non-embedding parameter
//! count lands nearest the target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{Architecture, Primitive};
use crate::scale::{params_model, LayerCounts, ScaleConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtrapolateError {
    #[error("target depth {target} is below base length {base}")]
    DepthBelowBase { base: usize, target: usize },
    #[error("no depth in [{lo}, {hi}] comes within 50% of target {target} params (closest {closest})")]
    Unreachable { lo: usize, hi: usize, target: u128, closest: u128 },
}

/// A maximal contiguous block of one primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub primitive: Primitive,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PatternOrigin {
    Stacked,
    Stretched,
    Literal,
}

/// Remainder fill policy for stacking when the depth is not an exact
/// multiple of the base length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackFill {
    /// First r layers of the base (default).
    Prefix,
    /// Last r layers of the base.
    Suffix,
    /// r copies of one primitive.
    Constant(Primitive),
}

/// A full-scale layer pattern with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPattern {
    pub runs: Vec<Run>,
    pub depth: usize,
    pub origin: PatternOrigin,
    pub base: Architecture,
}

impl LayerPattern {
    pub fn literal(arch: &Architecture) -> LayerPattern {
        LayerPattern {
            runs: run_length_encode(arch),
            depth: arch.len(),
            origin: PatternOrigin::Literal,
            base: arch.clone(),
        }
    }

    /// Flattens the runs back into a layer sequence.
    pub fn layers(&self) -> Vec<Primitive> {
        run_length_decode(&self.runs)
    }

    pub fn counts(&self) -> LayerCounts {
        let mut counts = LayerCounts::default();
        for run in &self.runs {
            let n = run.length as u64;
            match run.primitive {
                Primitive::Mlp => counts.mlp += n,
                Primitive::Attention => counts.attn += n,
                Primitive::Mamba => counts.ssm += n,
            }
        }
        counts
    }

    /// Compact run notation, e.g. `2A-5M` or `k×(...)` when the run
    /// list is an exact repetition.
    pub fn compact(&self) -> String {
        let unit = |runs: &[Run]| {
            runs.iter()
                .map(|r| {
                    if r.length == 1 {
                        r.primitive.short().to_string()
                    } else {
                        format!("{}{}", r.length, r.primitive.short())
                    }
                })
                .collect::<Vec<_>>()
                .join("-")
        };
        for period in 1..=self.runs.len() / 2 {
            if self.runs.len() % period == 0
                && self.runs.chunks(period).all(|c| c == &self.runs[..period])
            {
                return format!("{}×({})", self.runs.len() / period, unit(&self.runs[..period]));
            }
        }
        unit(&self.runs)
    }

    /// One line of whitespace-separated layer tokens.
    pub fn exploded(&self) -> String {
        self.layers().iter().map(|p| p.token()).collect::<Vec<_>>().join(" ")
    }

    pub fn summary(&self, cfg: &ScaleConfig) -> PatternSummary {
        let counts = self.counts();
        let (non_embed, total) = params_model(&counts, cfg);
        PatternSummary {
            depth: self.depth,
            counts,
            params_non_embed: non_embed,
            params_total: total,
        }
    }
}

/// JSON sidecar emitted next to a pattern file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternSummary {
    pub depth: usize,
    pub counts: LayerCounts,
    pub params_non_embed: u128,
    pub params_total: u128,
}

/// Maximal run-length encoding of a layer sequence.
pub fn run_length_encode(arch: &Architecture) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for &p in arch.layers() {
        match runs.last_mut() {
            Some(run) if run.primitive == p => run.length += 1,
            _ => runs.push(Run { primitive: p, length: 1 }),
        }
    }
    runs
}

pub fn run_length_decode(runs: &[Run]) -> Vec<Primitive> {
    runs.iter().flat_map(|r| std::iter::repeat(r.primitive).take(r.length)).collect()
}

/// Expands each run proportionally to `target_depth` total layers using
/// largest-remainder (Hamilton) apportionment: exact quotas
/// `length * target / L_small`, floors first, then one extra layer per
/// largest fractional remainder with ties to the earlier run.
pub fn stretch(base: &Architecture, target_depth: usize) -> Result<LayerPattern, ExtrapolateError> {
    let l_small = base.len();
    if target_depth < l_small {
        return Err(ExtrapolateError::DepthBelowBase { base: l_small, target: target_depth });
    }
    let runs = run_length_encode(base);
    // exact integer arithmetic: floor(l*T/L) and remainder l*T mod L
    let mut lengths: Vec<usize> = Vec::with_capacity(runs.len());
    let mut remainders: Vec<(usize, usize)> = Vec::with_capacity(runs.len()); // (remainder, index)
    for (i, run) in runs.iter().enumerate() {
        let product = run.length * target_depth;
        lengths.push(product / l_small);
        remainders.push((product % l_small, i));
    }
    let leftover = target_depth - lengths.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover) {
        lengths[i] += 1;
    }
    let stretched: Vec<Run> = runs
        .iter()
        .zip(&lengths)
        .map(|(run, &length)| Run { primitive: run.primitive, length })
        .collect();
    debug_assert!(stretched.iter().all(|r| r.length >= 1));
    Ok(LayerPattern {
        runs: stretched,
        depth: target_depth,
        origin: PatternOrigin::Stretched,
        base: base.clone(),
    })
}

/// Repeats the base whole `floor(target / L_small)` times and fills the
/// remaining `target mod L_small` layers per the fill policy.
pub fn stack(
    base: &Architecture,
    target_depth: usize,
    fill: StackFill,
) -> Result<LayerPattern, ExtrapolateError> {
    let l_small = base.len();
    if target_depth < l_small {
        return Err(ExtrapolateError::DepthBelowBase { base: l_small, target: target_depth });
    }
    let copies = target_depth / l_small;
    let r = target_depth % l_small;
    let mut layers: Vec<Primitive> = Vec::with_capacity(target_depth);
    for _ in 0..copies {
        layers.extend_from_slice(base.layers());
    }
    match fill {
        StackFill::Prefix => layers.extend_from_slice(&base.layers()[..r]),
        StackFill::Suffix => layers.extend_from_slice(&base.layers()[l_small - r..]),
        StackFill::Constant(p) => layers.extend(std::iter::repeat(p).take(r)),
    }
    Ok(LayerPattern {
        runs: run_length_encode(&Architecture::new(layers)),
        depth: target_depth,
        origin: PatternOrigin::Stacked,
        base: base.clone(),
    })
}

fn expand(base: &Architecture, depth: usize, origin: PatternOrigin) -> LayerPattern {
    match origin {
        PatternOrigin::Stacked => stack(base, depth, StackFill::Prefix).unwrap(),
        PatternOrigin::Stretched => stretch(base, depth).unwrap(),
        PatternOrigin::Literal => unreachable!("literal patterns are not expanded"),
    }
}

/// Scans depths in `[L_small, 8*L_small]` and returns the one whose
/// non-embedding parameter count is nearest `target_params`; ties go to
/// the smaller depth. Errors if nothing lands within 50% of the target.
pub fn choose_depth(
    base: &Architecture,
    cfg: &ScaleConfig,
    mode: PatternOrigin,
    target_params: u128,
) -> Result<usize, ExtrapolateError> {
    assert!(matches!(mode, PatternOrigin::Stacked | PatternOrigin::Stretched));
    let lo = base.len();
    let hi = 8 * base.len();
    let mut best: Option<(u128, usize)> = None;
    for depth in lo..=hi {
        let (non_embed, _) = params_model(&expand(base, depth, mode).counts(), cfg);
        let diff = non_embed.abs_diff(target_params);
        if best.map_or(true, |(bd, _)| diff < bd) {
            best = Some((diff, depth));
        }
    }
    let (diff, depth) = best.expect("non-empty depth range");
    if 2 * diff > target_params {
        let (closest, _) = params_model(&expand(base, depth, mode).counts(), cfg);
        return Err(ExtrapolateError::Unreachable { lo, hi, target: target_params, closest });
    }
    Ok(depth)
}

/// Convenience wrapper: choose the depth, then expand to a full pattern.
pub fn extrapolate(
    base: &Architecture,
    cfg: &ScaleConfig,
    mode: PatternOrigin,
    target_params: u128,
) -> Result<LayerPattern, ExtrapolateError> {
    let depth = choose_depth(base, cfg, mode, target_params)?;
    Ok(expand(base, depth, mode))
}
