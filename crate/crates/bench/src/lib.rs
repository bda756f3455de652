//! Shared fixtures for the criterion benchmarks.

use cnmf_core::{init_random, synth_generate, CnmfModel, DataMatrix, SynthParams};

pub struct Fixture {
    pub x: DataMatrix,
    pub model: CnmfModel,
    pub k: usize,
    pub l: usize,
}

/// A noisy synthetic problem plus a seeded random starting point.
pub fn fixture(n: usize, t: usize, k: usize, l: usize) -> Fixture {
    let params = SynthParams { n, t, k, l, seed: 7, ..Default::default() };
    let data = synth_generate(&params).expect("valid synth params");
    let model = init_random(n, t, k, l, 7, &data.x).expect("valid dims");
    Fixture { x: data.x, model, k, l }
}
