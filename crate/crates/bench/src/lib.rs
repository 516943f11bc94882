//! Fixtures shared by the benchmarks.

use hulm::{init_params, HulmParams, LabelVector, Matrix, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded series of `len` frames in `dim` dimensions with values in `[-1, 1)`.
pub fn series(len: usize, dim: usize) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64((len * 131 + dim) as u64);
    let data = (0..len * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TimeSeries::new(Matrix::from_vec(len, dim, data).expect("shape")).expect("finite frames")
}

/// A model, series and label of the requested size.
pub fn fixture(len: usize, hidden: usize, dim: usize, classes: usize) -> (HulmParams, TimeSeries, LabelVector) {
    let theta = init_params(hidden, dim, classes, 7).expect("valid sizes");
    (theta, series(len, dim), LabelVector::new(0, classes).expect("valid label"))
}
