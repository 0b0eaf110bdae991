//! Fixed inputs shared by the benchmarks in `benches/`.

use polyfact::instances::{gen_lossless, gen_spectrum, Instance, LosslessInstance, SpectrumOptions};

/// Rank-deficient spectra `(m, k, N)` of increasing size.
pub const RANK_DEFICIENT: [(usize, usize, usize); 3] = [(2, 1, 2), (4, 2, 3), (5, 3, 6)];

/// Full-rank spectra `(m, N)`.
pub const FULL_RANK: [(usize, usize); 3] = [(2, 2), (3, 4), (5, 6)];

/// Lossless rows `(m, N)`.
pub const LOSSLESS: [(usize, usize); 3] = [(2, 1), (3, 4), (5, 6)];

pub fn spectrum(m: usize, k: usize, order: usize) -> Instance {
    gen_spectrum(m, k, order, 42, SpectrumOptions::default())
}

pub fn lossless(m: usize, order: usize) -> LosslessInstance {
    gen_lossless(m, order, 42)
}
