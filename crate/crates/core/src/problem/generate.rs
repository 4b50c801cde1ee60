use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ObservedMatrix, ProblemError};

/// Planted low-rank-plus-noise model `X = w₁ U Vᵀ + w₂ E` observed on a
/// Bernoulli(`rho`) mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub snr: f64,
    pub rho: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.m == 0 || self.n == 0 {
            return Err(ProblemError::InvalidSpec("dimensions must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.m.min(self.n) {
            return Err(ProblemError::InvalidSpec(format!("rank {} must lie in 1..={}", self.rank, self.m.min(self.n))));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(ProblemError::InvalidSpec(format!("SNR must be positive, got {}", self.snr)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(ProblemError::InvalidSpec(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub spec: GenSpec,
    pub observed: ObservedMatrix,
    /// Raw Gaussian factors `U` (`m x r`) and `V` (`n x r`).
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub w1: f64,
    pub w2: f64,
    /// `‖U Vᵀ‖_F` and `‖E‖_F` over the full `m x n` grid.
    pub signal_frobenius: f64,
    pub noise_frobenius: f64,
    /// Number of mask draws; more than one means earlier masks were empty.
    pub attempts: u32,
}

impl GeneratedInstance {
    /// `w₁ (U Vᵀ)_ij`, the noiseless planted entry.
    pub fn signal_entry(&self, i: usize, j: usize) -> f64 {
        self.w1 * self.left.row(i).dot(&self.right.row(j))
    }
}

const STREAM_FACTORS: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_MASK: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws an instance. The noise matrix is streamed entry by entry so only the
/// observed entries are stored.
pub fn generate_instance(spec: &GenSpec) -> Result<GeneratedInstance, ProblemError> {
    spec.validate()?;
    let (m, n, r) = (spec.m, spec.n, spec.rank);
    let mut rng = stream(spec.seed, STREAM_FACTORS);
    let left = DMatrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let right = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    // ‖UVᵀ‖²_F = tr((UᵀU)(VᵀV))
    let signal_frobenius = (left.tr_mul(&left) * right.tr_mul(&right)).trace().sqrt();
    let w1 = 1.0 / signal_frobenius;

    let mut attempts = 0u32;
    loop {
        let mut noise = stream(spec.seed, STREAM_NOISE);
        let mut mask = stream(spec.seed, STREAM_MASK + attempts as u64);
        attempts += 1;
        let mut noise_sq = 0.0;
        let mut picked: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..m {
            for j in 0..n {
                let e: f64 = noise.sample(StandardNormal);
                noise_sq += e * e;
                if mask.gen::<f64>() < spec.rho {
                    picked.push((i, j, e));
                }
            }
        }
        if picked.is_empty() {
            continue;
        }
        let noise_frobenius = noise_sq.sqrt();
        let w2 = 1.0 / (spec.snr * noise_frobenius);
        let triplets = picked
            .into_iter()
            .map(|(i, j, e)| (i, j, w1 * left.row(i).dot(&right.row(j)) + w2 * e))
            .collect();
        let observed = ObservedMatrix::from_triplets(m, n, triplets)?;
        return Ok(GeneratedInstance {
            spec: spec.clone(),
            observed,
            left,
            right,
            w1,
            w2,
            signal_frobenius,
            noise_frobenius,
            attempts,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sampling_observes_everything() {
        let g = generate_instance(&GenSpec { m: 7, n: 5, rank: 2, snr: 3.0, rho: 1.0, seed: 1 }).unwrap();
        assert_eq!(g.observed.nnz(), 35);
    }

    #[test]
    fn weights_are_definitional() {
        let g = generate_instance(&GenSpec { m: 20, n: 30, rank: 3, snr: 5.0, rho: 0.5, seed: 9 }).unwrap();
        let dense = &g.left * g.right.transpose();
        assert!((g.w1 * dense.norm() - 1.0).abs() < 1e-12);
        assert!((g.w2 * g.noise_frobenius * 5.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_instance() {
        let spec = GenSpec { m: 15, n: 12, rank: 2, snr: 2.0, rho: 0.3, seed: 44 };
        let a = generate_instance(&spec).unwrap();
        let b = generate_instance(&spec).unwrap();
        assert_eq!(a.observed, b.observed);
        let c = generate_instance(&GenSpec { seed: 45, ..spec }).unwrap();
        assert_ne!(a.observed.fingerprint(), c.observed.fingerprint());
    }

    #[test]
    fn empty_masks_are_redrawn() {
        let g = generate_instance(&GenSpec { m: 2, n: 2, rank: 1, snr: 1.0, rho: 0.01, seed: 3 }).unwrap();
        assert!(g.observed.nnz() >= 1);
        assert!(g.attempts >= 1);
    }

    #[test]
    fn rejects_invalid_specs() {
        let base = GenSpec { m: 4, n: 4, rank: 2, snr: 1.0, rho: 0.5, seed: 0 };
        assert!(generate_instance(&GenSpec { rank: 5, ..base.clone() }).is_err());
        assert!(generate_instance(&GenSpec { snr: 0.0, ..base.clone() }).is_err());
        assert!(generate_instance(&GenSpec { rho: 0.0, ..base }).is_err());
    }
}
