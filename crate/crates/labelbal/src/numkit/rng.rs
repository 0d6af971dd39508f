//! Seeded, replayable random streams.
//!
//! Every source of randomness in the crate is a named `RngStream`. A stream is
//! fully determined by `(seed, stream id)`, so any run can be replayed
//! bit-identically, and distinct stages (data generation, weight init, batch
//! order, bank sampling, noise draws) never share a sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Named random streams. Each stage of the pipeline owns one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamId {
    DataGen,
    Init,
    BatchOrder,
    BankSampling,
    IsdaNoise,
    Split,
    Directions,
}

impl StreamId {
    fn value(self) -> u64 {
        match self {
            StreamId::DataGen => 0,
            StreamId::Init => 1,
            StreamId::BatchOrder => 2,
            StreamId::BankSampling => 3,
            StreamId::IsdaNoise => 4,
            StreamId::Split => 5,
            StreamId::Directions => 6,
        }
    }
}

/// Per-sample substreams live above this base so they never collide with the
/// named streams (ids < 256) or their phases.
const SAMPLE_STREAM_BASE: u64 = 1 << 40;

#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        Self::with_raw_stream(seed, id.value())
    }

    /// A named stream split into independent phases (e.g. the batch-order
    /// stream used separately by stage-1 training, harvesting, fine-tuning).
    pub fn new_phase(seed: u64, id: StreamId, phase: u64) -> Self {
        Self::with_raw_stream(seed, id.value() | (phase << 8))
    }

    /// Deterministic substream for one sample, independent of all others;
    /// lets data generation parallelize over samples without changing output.
    pub fn for_sample(seed: u64, index: u64) -> Self {
        Self::with_raw_stream(seed, SAMPLE_STREAM_BASE + index)
    }

    fn with_raw_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { rng }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw in `(-limit, limit)`.
    pub fn uniform_symmetric(&mut self, limit: f64) -> f64 {
        (2.0 * self.uniform() - 1.0) * limit
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0,1] so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        // Fisher-Yates, explicit so the draw sequence is pinned by this crate.
        for i in (1..xs.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            xs.swap(i, j);
        }
    }
}
