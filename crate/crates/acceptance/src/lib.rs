//! Shared setup for the acceptance suite in `tests/acceptance.rs`.

use std::io::Write;

use onefifth::rng::{random_on_sphere, stream_rng, AUX_STREAM_BASE};
use onefifth::AlgoParams;

pub const SEED: u64 = 1;
pub const N: usize = 20;

/// Prints `criterion N PASS|FAIL: detail` straight to stderr so the line
/// shows up even when the test harness captures output.
pub fn report(criterion: u32, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion} {verdict}: {detail}");
}

/// `γ = e^{1/3}`, `q = 4` in dimension `n`.
pub fn classic_params(n: usize) -> AlgoParams {
    AlgoParams::new(n, (1.0f64 / 3.0).exp(), 4.0).expect("valid parameters")
}

/// Uniform point on the unit sphere, the initial point of replicate `replicate`.
pub fn unit_start(n: usize, replicate: u64) -> Vec<f64> {
    random_on_sphere(&mut stream_rng(SEED, AUX_STREAM_BASE + replicate), n, 1.0)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
