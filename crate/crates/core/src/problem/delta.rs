//! Choosing the radius `δ` on a held-out part of the observations.

use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Instance, ObservedMatrix, ProblemError};
use crate::linalg::{sample_lowrank_entries, SparseMatrix, ThinSvd};
use crate::solvers::{run_frank_wolfe_from, Method, SolverConfig, StopRule};

#[derive(Debug, Clone)]
pub struct DeltaSelection {
    pub holdout_fraction: f64,
    /// Increasing radii; [`default_delta_grid`] when `None`.
    pub grid: Option<Vec<f64>>,
    pub grid_points: usize,
    /// Frank-Wolfe iterations per radius.
    pub budget_per_delta: usize,
    pub gap_target: f64,
    /// Stop the sweep after this many consecutive holdout-error increases.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for DeltaSelection {
    fn default() -> Self {
        Self {
            holdout_fraction: 0.1,
            grid: None,
            grid_points: 10,
            budget_per_delta: 400,
            gap_target: 1e-3,
            patience: Some(2),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeltaChoice {
    pub delta: f64,
    pub grid: Vec<f64>,
    /// Mean squared holdout error for each radius visited, in grid order.
    pub holdout_errors: Vec<f64>,
    pub train_size: usize,
    pub holdout_size: usize,
    pub seconds: f64,
}

/// Geometric grid from `F/2` to `8F`, where `F = ‖X_Ω‖_F / √(|Ω|/mn)`
/// estimates the Frobenius norm of the full matrix.
pub fn default_delta_grid(observed: &ObservedMatrix, points: usize) -> Vec<f64> {
    let frob: f64 = observed.values().iter().map(|x| x * x).sum::<f64>().sqrt();
    let density = observed.nnz() as f64 / (observed.nrows() as f64 * observed.ncols() as f64);
    let base = frob / density.sqrt();
    let (lo, hi) = (0.5 * base, 8.0 * base);
    match points {
        0 => Vec::new(),
        1 => vec![base],
        p => (0..p).map(|i| lo * (hi / lo).powf(i as f64 / (p - 1) as f64)).collect(),
    }
}

/// Splits `Ω` into training and holdout parts.
pub(crate) fn split_holdout(
    observed: &ObservedMatrix,
    fraction: f64,
    seed: u64,
) -> Result<(ObservedMatrix, Vec<(usize, usize)>, Vec<f64>), ProblemError> {
    let nnz = observed.nnz();
    let count = ((fraction * nnz as f64).round() as usize).max(1);
    if count >= nnz {
        return Err(ProblemError::InvalidSelection(format!("{nnz} observations are too few for a holdout split")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; nnz];
    for k in sample(&mut rng, nnz, count).iter() {
        keep[k] = false;
    }
    let (pattern, idx) = observed.pattern().subset(&keep);
    let values = idx.iter().map(|&k| observed.values()[k]).collect();
    let train = ObservedMatrix::new(SparseMatrix::new(std::sync::Arc::new(pattern), values));
    let pat = observed.pattern();
    let coords = (0..nnz).filter(|&k| !keep[k]).map(|k| (pat.row(k), pat.col(k))).collect();
    let held = (0..nnz).filter(|&k| !keep[k]).map(|k| observed.values()[k]).collect();
    Ok((train, coords, held))
}

/// Sweeps the grid upward, warm-starting Frank-Wolfe at each radius from the
/// previous solution, and returns the radius with the smallest holdout error.
pub fn select_delta(observed: &ObservedMatrix, sel: &DeltaSelection) -> Result<DeltaChoice, ProblemError> {
    if !(sel.holdout_fraction > 0.0 && sel.holdout_fraction < 0.5) {
        return Err(ProblemError::InvalidSelection(format!(
            "holdout fraction must lie in (0, 0.5), got {}",
            sel.holdout_fraction
        )));
    }
    let grid = sel.grid.clone().unwrap_or_else(|| default_delta_grid(observed, sel.grid_points));
    assert!(!grid.is_empty(), "the radius grid must not be empty");
    if grid.windows(2).any(|w| !(w[0] < w[1])) || !(grid[0] > 0.0) {
        return Err(ProblemError::InvalidSelection("grid must be positive and strictly increasing".into()));
    }
    let start = Instant::now();
    if grid.len() == 1 {
        return Ok(DeltaChoice {
            delta: grid[0],
            grid,
            holdout_errors: Vec::new(),
            train_size: observed.nnz(),
            holdout_size: 0,
            seconds: 0.0,
        });
    }
    let (train, coords, held) = split_holdout(observed, sel.holdout_fraction, sel.seed)?;
    let mut config = SolverConfig::new(Method::FrankWolfe);
    config.seed = sel.seed;
    config.stop = StopRule { gap_target: sel.gap_target, max_iters: sel.budget_per_delta, max_seconds: f64::INFINITY };
    let mut warm: Option<ThinSvd> = None;
    let mut errors = Vec::new();
    let mut rises = 0;
    for &delta in &grid {
        let instance = Instance::new(train.clone(), delta)?;
        let out = run_frank_wolfe_from(&instance, &config, warm.take()).map_err(Box::new)?;
        let pred = sample_lowrank_entries(&out.iterate, &coords);
        let err = pred.iter().zip(&held).map(|(p, x)| (p - x) * (p - x)).sum::<f64>() / held.len() as f64;
        if errors.last().is_some_and(|&prev| err > prev) {
            rises += 1;
        } else {
            rises = 0;
        }
        errors.push(err);
        warm = Some(out.iterate);
        if sel.patience.is_some_and(|p| rises >= p) {
            break;
        }
    }
    let best = errors.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("nonempty");
    Ok(DeltaChoice {
        delta: grid[best],
        grid,
        holdout_errors: errors,
        train_size: train.nnz(),
        holdout_size: held.len(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs() -> ObservedMatrix {
        let t = (0..40).map(|k| (k % 8, k / 8, 1.0 + k as f64 * 0.1)).collect();
        ObservedMatrix::from_triplets(8, 5, t).unwrap()
    }

    #[test]
    fn single_grid_point_is_returned() {
        let sel = DeltaSelection { grid: Some(vec![2.5]), ..Default::default() };
        assert_eq!(select_delta(&obs(), &sel).unwrap().delta, 2.5);
    }

    #[test]
    fn holdout_is_disjoint_from_training() {
        let o = obs();
        let (train, coords, held) = split_holdout(&o, 0.2, 3).unwrap();
        assert_eq!(train.nnz() + coords.len(), o.nnz());
        assert_eq!(coords.len(), held.len());
        let tr: std::collections::HashSet<_> = train.pattern().coords().collect();
        assert!(coords.iter().all(|c| !tr.contains(c)));
    }

    #[test]
    fn grid_is_geometric_and_increasing() {
        let g = default_delta_grid(&obs(), 10);
        assert_eq!(g.len(), 10);
        assert!((g[9] / g[0] - 16.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
