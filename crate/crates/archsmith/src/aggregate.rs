//! Collapses pools of scored architectures into robust base patterns:
//! ranking, k-means over one-hot encodings, centroid/mode aggregation,
//! and exponential-decay cross-dataset aggregation.
//!
//! The three aggregation flavors are: N0 = centroid-nearest member of
//! the top cluster, N1 = unweighted layer-wise mode, N2 = layer-wise
//! mode weighted by `exp(-lambda * rank)` over test-fitness rank.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{encode_onehot, format_architecture, Architecture, Primitive, PrimitivePool};
use crate::proxy::{FitnessDirection, FitnessRecord};

/// Default decay rate for N2 rank weighting.
pub const N2_LAMBDA: f64 = 0.1;
/// Default decay rate for the cross-dataset ("strong decay") aggregation.
pub const MULTIDATASET_LAMBDA: f64 = 0.5;

const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AggregateError {
    #[error("record pool is empty")]
    Empty,
    #[error("need at least {k} points for k-means, have {points}")]
    TooFewPoints { k: usize, points: usize },
    #[error("member architectures have mismatched lengths")]
    LengthMismatch,
}

/// One line of a pool file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolRecord {
    pub arch: String,
    pub val: f64,
    pub test: f64,
    #[serde(default)]
    pub agent: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dataset: String,
}

/// Deduplicated records sorted best-first by test fitness.
#[derive(Debug, Clone)]
pub struct RankedPool {
    pub records: Vec<FitnessRecord>,
    pub dataset_id: String,
    pub direction: FitnessDirection,
}

/// Sorts and deduplicates records by test fitness; duplicates keep the
/// best score, exact ties order by architecture text.
pub fn rank_architectures(
    records: &[FitnessRecord],
    direction: FitnessDirection,
    dataset_id: &str,
) -> Result<RankedPool, AggregateError> {
    if records.is_empty() {
        return Err(AggregateError::Empty);
    }
    let mut best: HashMap<String, FitnessRecord> = HashMap::new();
    for rec in records {
        let key = format_architecture(&rec.architecture);
        match best.get(&key) {
            Some(prev) if !direction.better(rec.test_fitness, prev.test_fitness) => {}
            _ => {
                best.insert(key, rec.clone());
            }
        }
    }
    let mut sorted: Vec<FitnessRecord> = best.into_values().collect();
    sorted.sort_by(|a, b| {
        let ord = match direction {
            FitnessDirection::Maximize => b.test_fitness.total_cmp(&a.test_fitness),
            FitnessDirection::Minimize => a.test_fitness.total_cmp(&b.test_fitness),
        };
        ord.then_with(|| {
            format_architecture(&a.architecture).cmp(&format_architecture(&b.architecture))
        })
    });
    Ok(RankedPool { records: sorted, dataset_id: dataset_id.to_string(), direction })
}

/// A finished k-means partition of a ranked pool.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster with the best mean test fitness.
    pub top_cluster: usize,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++-style seeding over the one-hot
/// encodings of the pool.
pub fn kmeans_cluster(
    pool: &RankedPool,
    prim_pool: &PrimitivePool,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, AggregateError> {
    let n = pool.records.len();
    if n < k || k == 0 {
        return Err(AggregateError::TooFewPoints { k, points: n });
    }
    let points: Vec<Vec<f64>> =
        pool.records.iter().map(|r| encode_onehot(&r.architecture, prim_pool)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![points[rng.gen_range(0..n)].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[idx].clone());
    }

    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        let mut new_labels = vec![0usize; n];
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            new_labels[i] = c;
            new_inertia += d;
        }
        debug_assert!(new_inertia <= inertia + 1e-9, "k-means inertia increased");
        let stable = new_labels == labels;
        labels = new_labels;
        inertia = new_inertia;
        if stable {
            break;
        }
        // recompute means; an emptied cluster grabs the farthest point
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &centroids[labels[b]]))
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                labels[far] = c;
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }

    // cluster with the best mean test fitness; ties to the lowest index
    let mut mean_test = vec![(0.0f64, 0usize); k];
    for (rec, &l) in pool.records.iter().zip(&labels) {
        mean_test[l].0 += rec.test_fitness;
        mean_test[l].1 += 1;
    }
    let mut top = 0;
    let mut top_mean = f64::NAN;
    for (c, &(sum, count)) in mean_test.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mean = sum / count as f64;
        if top_mean.is_nan() || pool.direction.better(mean, top_mean) {
            top = c;
            top_mean = mean;
        }
    }
    Ok(ClusterAssignment { k, labels, centroids, top_cluster: top, inertia })
}

/// N0: the member of the top cluster nearest its centroid. Ties break
/// to better test fitness, then architecture text.
pub fn aggregate_n0(
    assign: &ClusterAssignment,
    pool: &RankedPool,
    prim_pool: &PrimitivePool,
) -> Result<Architecture, AggregateError> {
    let centroid = &assign.centroids[assign.top_cluster];
    let mut best: Option<(f64, &FitnessRecord)> = None;
    for (rec, &l) in pool.records.iter().zip(&assign.labels) {
        if l != assign.top_cluster {
            continue;
        }
        let d = sq_dist(&encode_onehot(&rec.architecture, prim_pool), centroid);
        let replace = match &best {
            None => true,
            Some((bd, brec)) => {
                d < *bd
                    || (d == *bd
                        && (pool.direction.better(rec.test_fitness, brec.test_fitness)
                            || (rec.test_fitness == brec.test_fitness
                                && format_architecture(&rec.architecture)
                                    < format_architecture(&brec.architecture))))
            }
        };
        if replace {
            best = Some((d, rec));
        }
    }
    best.map(|(_, rec)| rec.architecture.clone()).ok_or(AggregateError::Empty)
}

/// Per layer position, picks the primitive with the largest (weighted)
/// count. Ties break by the fixed primitive order M < A < Mb.
pub fn aggregate_layerwise_mode(
    members: &[Architecture],
    weights: Option<&[f64]>,
) -> Result<Architecture, AggregateError> {
    if members.is_empty() {
        return Err(AggregateError::Empty);
    }
    let length = members[0].len();
    if members.iter().any(|m| m.len() != length) {
        return Err(AggregateError::LengthMismatch);
    }
    if let Some(w) = weights {
        assert_eq!(w.len(), members.len(), "one weight per member");
        assert!(w.iter().all(|&x| x > 0.0), "weights must be positive");
    }
    let mut layers = Vec::with_capacity(length);
    for pos in 0..length {
        let mut score = [0.0f64; 3];
        for (i, m) in members.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            score[m.layers()[pos].index()] += w;
        }
        let winner = Primitive::ALL
            .iter()
            .copied()
            .max_by(|a, b| score[a.index()].total_cmp(&score[b.index()]).then(b.cmp(a)))
            .unwrap();
        layers.push(winner);
    }
    Ok(Architecture::new(layers))
}

/// N1: unweighted layer-wise mode over the `top_n` best records.
pub fn aggregate_n1(pool: &RankedPool, top_n: usize) -> Result<Architecture, AggregateError> {
    let members: Vec<Architecture> = pool
        .records
        .iter()
        .take(top_n)
        .map(|r| r.architecture.clone())
        .collect();
    aggregate_layerwise_mode(&members, None)
}

/// N2: rank-weighted layer-wise mode with weights `exp(-lambda * rank)`
/// over the `top_n` best records.
pub fn aggregate_n2(
    pool: &RankedPool,
    top_n: usize,
    lambda: f64,
) -> Result<Architecture, AggregateError> {
    let members: Vec<Architecture> = pool
        .records
        .iter()
        .take(top_n)
        .map(|r| r.architecture.clone())
        .collect();
    let weights: Vec<f64> = (0..members.len()).map(|r| (-lambda * r as f64).exp()).collect();
    aggregate_layerwise_mode(&members, Some(&weights))
}

/// Cross-dataset aggregation: within each dataset the `top_n` records
/// get weights `exp(-lambda * rank)` normalized to sum 1, so every
/// dataset carries equal weight; the pooled weighted members go through
/// the layer-wise mode.
pub fn aggregate_exponential_multidataset(
    pools: &[RankedPool],
    top_n: usize,
    lambda: f64,
) -> Result<Architecture, AggregateError> {
    assert!(top_n >= 1 && lambda > 0.0);
    if pools.is_empty() || pools.iter().any(|p| p.records.is_empty()) {
        return Err(AggregateError::Empty);
    }
    let mut members = Vec::new();
    let mut weights = Vec::new();
    for pool in pools {
        let taken: Vec<&FitnessRecord> = pool.records.iter().take(top_n).collect();
        let raw: Vec<f64> = (0..taken.len()).map(|r| (-lambda * r as f64).exp()).collect();
        let total: f64 = raw.iter().sum();
        for (rec, w) in taken.iter().zip(raw) {
            members.push(rec.architecture.clone());
            weights.push(w / total);
        }
    }
    aggregate_layerwise_mode(&members, Some(&weights))
}
