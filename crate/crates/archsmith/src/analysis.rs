//! Scoring and scaling analysis: valid-submission rate, march-of-9s
//! normalized scores, generalization gap, isoFLOP parabola fits,
//! compute-optimal frontier fits, and Pareto frontier extraction.

use thiserror::Error;

use crate::proxy::FitnessDirection;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("total run count is zero")]
    ZeroTotal,
    #[error("score equals the task optimum; march of 9s is unbounded")]
    AtOptimum,
    #[error("score context is degenerate: {0}")]
    DegenerateContext(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

/// Fixed points of the normalized score: the worst observed score, the
/// SOTA score, and the task optimum (e.g. 1.0 for accuracy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreContext {
    pub s_min: f64,
    pub s_sota: f64,
    pub s_opt: f64,
    pub direction: FitnessDirection,
}

/// Least-squares line in (log10 budget, log10 loss) space:
/// `log10 loss = q * log10 C + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierFit {
    pub q: f64,
    pub m: f64,
    pub points: Vec<(f64, f64)>,
}

/// `y = a*x^2 + b*x + c` with x = log10(model size).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x_min: f64,
    pub y_min: f64,
}

/// Valid-submission rate: valid / total.
pub fn vsr(valid_runs: u64, total_runs: u64) -> Result<f64, AnalysisError> {
    if total_runs == 0 {
        return Err(AnalysisError::ZeroTotal);
    }
    assert!(valid_runs <= total_runs, "valid runs exceed total");
    Ok(valid_runs as f64 / total_runs as f64)
}

/// `-log10(|s - s_opt|)`: counts the nines of closeness to optimum.
pub fn march_of_9s(s: f64, s_opt: f64) -> Result<f64, AnalysisError> {
    let gap = (s - s_opt).abs();
    if gap == 0.0 {
        return Err(AnalysisError::AtOptimum);
    }
    Ok(-gap.log10())
}

/// Normalized score: `(phi(s) - phi(s_min)) / (phi(s_sota) - phi(s_min))`
/// with `phi = march_of_9s`. May exceed 1 when s beats SOTA.
pub fn normalized_score(s: f64, ctx: &ScoreContext) -> Result<f64, AnalysisError> {
    if ctx.s_min == ctx.s_opt || ctx.s_sota == ctx.s_opt {
        return Err(AnalysisError::DegenerateContext(
            "s_min and s_sota must differ from s_opt".into(),
        ));
    }
    let phi_s = march_of_9s(s, ctx.s_opt)?;
    let phi_min = march_of_9s(ctx.s_min, ctx.s_opt)?;
    let phi_sota = march_of_9s(ctx.s_sota, ctx.s_opt)?;
    if phi_sota == phi_min {
        return Err(AnalysisError::DegenerateContext("phi(s_sota) equals phi(s_min)".into()));
    }
    Ok((phi_s - phi_min) / (phi_sota - phi_min))
}

/// How much worse the submitted candidate is than the best explored one;
/// nonnegative when the submission came from the explored set.
pub fn generalization_gap(best: f64, submitted: f64, direction: FitnessDirection) -> f64 {
    match direction {
        FitnessDirection::Maximize => best - submitted,
        FitnessDirection::Minimize => submitted - best,
    }
}

fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    // Gaussian elimination with partial pivoting on a 3x4 system
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let factor = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Least-squares parabola of loss against log10(model size). `points`
/// are (non-embedding parameter count, validation loss) pairs.
pub fn fit_isoflop_parabola(points: &[(f64, f64)]) -> Result<ParabolaFit, AnalysisError> {
    let xs: Vec<f64> = points.iter().map(|&(size, _)| size.log10()).collect();
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 3 {
        return Err(AnalysisError::DegenerateFit(format!(
            "need >= 3 distinct sizes, have {}",
            distinct.len()
        )));
    }
    // normal equations for y = a x^2 + b x + c
    let (mut s0, mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
    for (&x, &(_, y)) in xs.iter().zip(points) {
        let x2 = x * x;
        s0 += 1.0;
        s1 += x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
        t0 += y;
        t1 += x * y;
        t2 += x2 * y;
    }
    let solution = solve3([[s4, s3, s2, t2], [s3, s2, s1, t1], [s2, s1, s0, t0]])
        .ok_or_else(|| AnalysisError::DegenerateFit("singular normal equations".into()))?;
    let [a, b, c] = solution;
    if a <= 1e-12 {
        return Err(AnalysisError::DegenerateFit(format!(
            "leading coefficient {a:.3e} gives no minimum"
        )));
    }
    let x_min = -b / (2.0 * a);
    let y_min = a * x_min * x_min + b * x_min + c;
    Ok(ParabolaFit { a, b, c, x_min, y_min })
}

/// Ordinary least squares of log10(loss) against log10(budget).
pub fn fit_frontier(minima: &[(f64, f64)]) -> Result<FrontierFit, AnalysisError> {
    if minima.len() < 2 {
        return Err(AnalysisError::DegenerateFit("need >= 2 budgets".into()));
    }
    let logs: Vec<(f64, f64)> =
        minima.iter().map(|&(c, loss)| (c.log10(), loss.log10())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(AnalysisError::DegenerateFit("all budgets identical".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let q = sxy / sxx;
    let m = mean_y - q * mean_x;
    if !q.is_finite() || !m.is_finite() {
        return Err(AnalysisError::DegenerateFit("non-finite coefficients".into()));
    }
    Ok(FrontierFit { q, m, points: minima.to_vec() })
}

/// (Δq, Δm) against a baseline frontier; lower is better on both.
pub fn frontier_delta(fit: &FrontierFit, baseline: &FrontierFit) -> (f64, f64) {
    (fit.q - baseline.q, fit.m - baseline.m)
}

fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Non-dominated points under minimize-both ordering, sorted by the
/// first coordinate ascending. Exact duplicates are all kept.
pub fn pareto_frontier(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut frontier: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&p| !points.iter().any(|&other| dominates(other, p)))
        .collect();
    frontier.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    frontier
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vsr_examples() {
        assert_eq!(vsr(7, 10).unwrap(), 0.7);
        assert_eq!(vsr(0, 20).unwrap(), 0.0);
        assert_eq!(vsr(10, 10).unwrap(), 1.0);
        assert_eq!(vsr(0, 0).unwrap_err(), AnalysisError::ZeroTotal);
    }

    #[test]
    fn march_of_9s_examples() {
        assert!((march_of_9s(0.9, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((march_of_9s(0.99, 1.0).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(march_of_9s(1.0, 1.0).unwrap_err(), AnalysisError::AtOptimum);
    }

    #[test]
    fn march_of_9s_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let s = i as f64 / 100.0;
            let phi = march_of_9s(s, 1.0).unwrap();
            assert!(phi > prev);
            prev = phi;
        }
    }

    fn ctx(s_min: f64, s_sota: f64, s_opt: f64) -> ScoreContext {
        ScoreContext { s_min, s_sota, s_opt, direction: FitnessDirection::Maximize }
    }

    #[test]
    fn normalized_score_fixed_points_and_oracle() {
        let c = ctx(0.1, 0.9, 1.0);
        assert!((normalized_score(0.9, &c).unwrap() - 1.0).abs() < 1e-12);
        assert!((normalized_score(0.1, &c).unwrap() - 0.0).abs() < 1e-12);
        // hand oracle: phi values 0.045757, 1.0, 0.30103
        assert!((normalized_score(0.5, &c).unwrap() - 0.26752).abs() < 1e-5);
        // beats SOTA -> NS > 1
        assert!(normalized_score(0.95, &c).unwrap() > 1.0);
    }

    #[test]
    fn normalized_score_degenerate() {
        assert!(matches!(
            normalized_score(0.5, &ctx(0.9, 0.9, 1.0)),
            Err(AnalysisError::DegenerateContext(_))
        ));
        assert!(matches!(
            normalized_score(0.5, &ctx(0.1, 1.0, 1.0)),
            Err(AnalysisError::DegenerateContext(_))
        ));
        assert_eq!(
            normalized_score(1.0, &ctx(0.1, 0.9, 1.0)).unwrap_err(),
            AnalysisError::AtOptimum
        );
    }

    #[test]
    fn normalized_score_depends_only_on_phi() {
        // invariance: same three phi values from a mirrored minimize
        // context produce the same NS
        let max_ns = normalized_score(0.5, &ctx(0.1, 0.9, 1.0)).unwrap();
        let min_ctx = ScoreContext {
            s_min: 1.9,
            s_sota: 1.1,
            s_opt: 1.0,
            direction: FitnessDirection::Minimize,
        };
        let min_ns = normalized_score(1.5, &min_ctx).unwrap();
        assert!((max_ns - min_ns).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        assert!((generalization_gap(0.85, 0.83, FitnessDirection::Maximize) - 0.02).abs() < 1e-12);
        assert_eq!(generalization_gap(0.85, 0.85, FitnessDirection::Maximize), 0.0);
        assert!((generalization_gap(2.70, 2.75, FitnessDirection::Minimize) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn parabola_exact_interpolation() {
        // y = (x-2)^2 + 1 at x in {1,2,3}; sizes are 10^x
        let points = [(10.0, 2.0), (100.0, 1.0), (1000.0, 2.0)];
        let fit = fit_isoflop_parabola(&points).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-9);
        assert!((fit.x_min - 2.0).abs() < 1e-9);
        assert!((fit.y_min - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parabola_degenerate_cases() {
        // collinear points: a = 0
        let line = [(10.0, 1.0), (100.0, 2.0), (1000.0, 3.0)];
        assert!(matches!(fit_isoflop_parabola(&line), Err(AnalysisError::DegenerateFit(_))));
        // fewer than 3 distinct sizes
        let dup = [(10.0, 1.0), (10.0, 1.1), (100.0, 2.0)];
        assert!(matches!(fit_isoflop_parabola(&dup), Err(AnalysisError::DegenerateFit(_))));
        // concave points: a < 0
        let concave = [(10.0, 1.0), (100.0, 2.0), (1000.0, 1.0)];
        assert!(matches!(fit_isoflop_parabola(&concave), Err(AnalysisError::DegenerateFit(_))));
    }

    #[test]
    fn parabola_recovers_known_coefficients() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (a, b, c) = (0.8, -14.0, 64.0);
        let points: Vec<(f64, f64)> = (0..5)
            .map(|i| {
                let x = 8.0 + 0.5 * i as f64; // log10 size
                let noise = (rng.gen::<f64>() * 2.0 - 1.0) * 1e-6;
                (10f64.powf(x), a * x * x + b * x + c + noise)
            })
            .collect();
        let fit = fit_isoflop_parabola(&points).unwrap();
        assert!((fit.a - a).abs() < 1e-4);
        assert!((fit.b - b).abs() < 1e-4);
        assert!((fit.c - c).abs() < 1e-4);
    }

    #[test]
    fn frontier_two_point_closed_form() {
        let fit = fit_frontier(&[(1e19, 3.0), (1e20, 2.5)]).unwrap();
        let q = (2.5f64 / 3.0).log10();
        assert!((fit.q - q).abs() < 1e-12);
        assert!((fit.m - (3.0f64.log10() - 19.0 * q)).abs() < 1e-9);
    }

    #[test]
    fn frontier_flat_and_degenerate() {
        let flat = fit_frontier(&[(1e19, 2.0), (1e20, 2.0), (1e21, 2.0)]).unwrap();
        assert!(flat.q.abs() < 1e-12);
        assert!(matches!(fit_frontier(&[(1e19, 3.0)]), Err(AnalysisError::DegenerateFit(_))));
        assert!(matches!(
            fit_frontier(&[(1e19, 3.0), (1e19, 2.5)]),
            Err(AnalysisError::DegenerateFit(_))
        ));
    }

    #[test]
    fn frontier_recovers_known_slope() {
        let (q, m) = (-0.057, 1.52);
        let minima: Vec<(f64, f64)> = [19.0, 19.6, 20.0, 20.6, 21.0]
            .iter()
            .map(|&logc| (10f64.powf(logc), 10f64.powf(q * logc + m)))
            .collect();
        let fit = fit_frontier(&minima).unwrap();
        assert!((fit.q - q).abs() < 1e-9);
        assert!((fit.m - m).abs() < 1e-9);
    }

    #[test]
    fn delta_examples() {
        let a = fit_frontier(&[(1e19, 3.0), (1e20, 2.5)]).unwrap();
        let b = fit_frontier(&[(1e19, 3.1), (1e20, 2.7)]).unwrap();
        assert_eq!(frontier_delta(&a, &a), (0.0, 0.0));
        let (dq, dm) = frontier_delta(&a, &b);
        let (dq2, dm2) = frontier_delta(&b, &a);
        assert!((dq + dq2).abs() < 1e-12 && (dm + dm2).abs() < 1e-12);
        assert!(dq < 0.0, "steeper fit has negative delta q");
    }

    #[test]
    fn pareto_examples() {
        let out = pareto_frontier(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0), (2.0, 3.0)]);
        assert_eq!(out, vec![(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]);
        assert_eq!(pareto_frontier(&[(5.0, 5.0)]), vec![(5.0, 5.0)]);
        // duplicates are both kept
        let dup = pareto_frontier(&[(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(dup, vec![(1.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn pareto_matches_bruteforce_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let points: Vec<(f64, f64)> = (0..200)
                .map(|_| (rng.gen_range(0..20) as f64, rng.gen_range(0..20) as f64))
                .collect();
            let frontier = pareto_frontier(&points);
            let brute: Vec<(f64, f64)> = {
                let mut kept: Vec<(f64, f64)> = points
                    .iter()
                    .copied()
                    .filter(|&p| !points.iter().any(|&o| dominates(o, p)))
                    .collect();
                kept.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                kept
            };
            assert_eq!(frontier, brute);
            // mutual non-domination
            for &p in &frontier {
                assert!(!frontier.iter().any(|&o| dominates(o, p)));
            }
            // every excluded point is dominated by a frontier point
            for &p in &points {
                if !frontier.contains(&p) {
                    assert!(frontier.iter().any(|&o| dominates(o, p)));
                }
            }
        }
    }
}
