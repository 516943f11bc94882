//! Synthetic two-class tasks for benchmarking and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::TimeSeries;

/// Probability that the class-0 generator of [`synth_hmm_task`] stays in its state.
pub const HMM_STAY_CLASS0: f64 = 0.9;
/// Probability that the class-1 generator of [`synth_hmm_task`] stays in its state.
pub const HMM_STAY_CLASS1: f64 = 0.3;
/// Emission means of the two hidden states.
pub const HMM_EMISSION_MEANS: [f64; 2] = [-1.0, 1.0];
pub const HMM_EMISSION_STD: f64 = 0.5;

fn gaussian(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("noise sigma {sigma}: {e}")))
}

/// Order task: class 0 shows `(1, 0)` for the first half and `(0, 1)` for the
/// second, class 1 the reverse, plus Gaussian noise. Both classes have the
/// same frame-sum distribution, so only temporal order separates them.
pub fn synth_order_task(n_per_class: usize, len: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if len < 4 || !len.is_multiple_of(2) {
        return Err(Error::invalid(format!("order task needs an even length >= 4, got {len}")));
    }
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be positive"));
    }
    let noise = gaussian(noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(2 * n_per_class);
    for class in 0..2 {
        for _ in 0..n_per_class {
            let mut data = Vec::with_capacity(len * 2);
            for t in 0..len {
                let first_half = t < len / 2;
                let on_first = first_half == (class == 0);
                let base = if on_first { [1.0, 0.0] } else { [0.0, 1.0] };
                for b in base {
                    data.push(b + noise.sample(&mut rng));
                }
            }
            series.push(TimeSeries::new(Matrix::from_vec(len, 2, data)?)?.with_label(class));
        }
    }
    Dataset::new(series, 2)
}

/// Two classes generated by 2-state Markov chains with Gaussian emissions
/// that differ only in their persistence ([`HMM_STAY_CLASS0`] vs
/// [`HMM_STAY_CLASS1`]). Both chains start uniformly and have a uniform
/// stationary distribution. `D = 1`.
pub fn synth_hmm_task(n_per_class: usize, len: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 || len == 0 {
        return Err(Error::invalid("n_per_class and length must be positive"));
    }
    let noise = gaussian(HMM_EMISSION_STD)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(2 * n_per_class);
    for (class, stay) in [HMM_STAY_CLASS0, HMM_STAY_CLASS1].into_iter().enumerate() {
        for _ in 0..n_per_class {
            let mut state = usize::from(rng.gen_bool(0.5));
            let mut data = Vec::with_capacity(len);
            for t in 0..len {
                if t > 0 && !rng.gen_bool(stay) {
                    state = 1 - state;
                }
                data.push(HMM_EMISSION_MEANS[state] + noise.sample(&mut rng));
            }
            series.push(TimeSeries::new(Matrix::from_vec(len, 1, data)?)?.with_label(class));
        }
    }
    Dataset::new(series, 2)
}

/// Linearly separable task: every frame of class 0 is centred at
/// `(+separation, 0)` and every frame of class 1 at `(-separation, 0)`.
pub fn synth_shift_task(n_per_class: usize, len: usize, separation: f64, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 || len == 0 {
        return Err(Error::invalid("n_per_class and length must be positive"));
    }
    let noise = gaussian(noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(2 * n_per_class);
    for class in 0..2 {
        let centre = if class == 0 { separation } else { -separation };
        for _ in 0..n_per_class {
            let data = (0..len).flat_map(|_| [centre + noise.sample(&mut rng), noise.sample(&mut rng)]).collect();
            series.push(TimeSeries::new(Matrix::from_vec(len, 2, data)?)?.with_label(class));
        }
    }
    Dataset::new(series, 2)
}
