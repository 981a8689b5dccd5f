//! Seeded random streams.
//!
//! Every run is driven by a ChaCha8 generator keyed with `seed_from_u64(seed)`.
//! Independent replicates share the key and differ only by the ChaCha stream
//! id, so replicate `i` always reads stream `i`. Draws that are not part of the
//! optimizer noise (random initial points, random scan directions) use streams
//! offset by [`AUX_STREAM_BASE`], keeping the noise sequence of stream `i`
//! identical whether or not the caller asked for a random start.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Offset for auxiliary streams; `AUX_STREAM_BASE + i` draws the random
/// initial point of replicate `i`.
pub const AUX_STREAM_BASE: u64 = 1 << 40;

/// Long calibration chains (CLT calibration, bundle chain).
pub const CALIBRATION_STREAM: u64 = 2 * AUX_STREAM_BASE;
/// Pre-runs drawing stationary starts; start `i` uses `PRE_RUN_BASE + i`.
pub const PRE_RUN_BASE: u64 = 3 * AUX_STREAM_BASE;
/// Random directions of drift scans.
pub const DIRECTION_STREAM: u64 = 4 * AUX_STREAM_BASE;
/// Drift Monte Carlo; cell `i` uses `DRIFT_BASE + i`.
pub const DRIFT_BASE: u64 = 5 * AUX_STREAM_BASE;
/// Continuity-correction jitter of the CLT check.
pub const JITTER_STREAM: u64 = 6 * AUX_STREAM_BASE;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `buf` with i.i.d. standard normal draws.
pub fn fill_normal<R: rand::Rng + ?Sized>(rng: &mut R, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Uniform point on the sphere of radius `radius` (normalized Gaussian).
pub fn random_on_sphere<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    loop {
        fill_normal(rng, &mut v);
        let norm = crate::linalg::norm2(&v);
        if norm > 0.0 {
            v.iter_mut().for_each(|c| *c *= radius / norm);
            return v;
        }
    }
}
