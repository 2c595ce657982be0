use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::operators::ProjectionSet;
use crate::scalar::Real;

/// Name of the generator recorded in run metadata.
pub const RNG_NAME: &str = "chacha8";

/// Photon (Poisson) plus electronic (Gaussian, in counts) noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Air photon count.
    pub i0: f64,
    /// Standard deviation of the additive Gaussian noise, in counts.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(i0: f64, sigma: f64, seed: u64) -> Result<Self> {
        let m = NoiseModel { i0, sigma, seed };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0 && self.i0.is_finite()) {
            return Err(param(format!("I0 must be positive, got {}", self.i0)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(param(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// `p ↦ ln(I0 / max(1, Poisson(I0 e^{-p}) + N(0, σ²)))`.
///
/// Angle `a` draws from stream `a` of a ChaCha8 generator keyed by the seed,
/// so the result does not depend on the thread count.
pub fn add_noise<T: Real>(proj: &ProjectionSet<T>, model: &NoiseModel) -> Result<ProjectionSet<T>> {
    model.validate()?;
    if let Some(i) = proj.data.iter().position(|v| !(v.as_f64() >= 0.0)) {
        return Err(Error::Domain(format!("projection value {} at index {i} is negative or not finite", proj.data[i])));
    }
    let per_angle = proj.nu * proj.nv;
    let gauss = Normal::new(0.0, model.sigma).map_err(|e| param(e.to_string()))?;
    let mut data = proj.data.clone();
    data.par_chunks_mut(per_angle.max(1)).enumerate().try_for_each(|(a, chunk)| -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(a as u64);
        for v in chunk.iter_mut() {
            let mean = model.i0 * (-v.as_f64()).exp();
            let mut counts =
                if mean > 0.0 { Poisson::new(mean).map_err(|e| param(e.to_string()))?.sample(&mut rng) } else { 0.0 };
            if model.sigma > 0.0 {
                counts += gauss.sample(&mut rng);
            }
            *v = T::of((model.i0 / counts.max(1.0)).ln());
        }
        Ok(())
    })?;
    Ok(ProjectionSet { data, ..proj.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(p: f64, n: usize) -> ProjectionSet<f64> {
        ProjectionSet::new(n, 1, vec![0.0, 1.0], vec![p; 2 * n]).unwrap()
    }

    #[test]
    fn negative_input_rejected() {
        let mut p = constant(1.0, 4);
        p.data[3] = -0.1;
        assert!(matches!(add_noise(&p, &NoiseModel::new(1e5, 0.5, 1).unwrap()), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_model_rejected() {
        assert!(NoiseModel::new(0.0, 0.5, 1).is_err());
        assert!(NoiseModel::new(1e5, -1.0, 1).is_err());
    }

    #[test]
    fn seeds_differ() {
        let p = constant(1.0, 16);
        let a = add_noise(&p, &NoiseModel::new(1e5, 0.5, 1).unwrap()).unwrap();
        let b = add_noise(&p, &NoiseModel::new(1e5, 0.5, 2).unwrap()).unwrap();
        assert_ne!(a.data, b.data);
    }
}
