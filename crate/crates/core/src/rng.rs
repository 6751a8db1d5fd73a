//! Reproducible random streams.
//!
//! Every unit of work (one trial of one estimator) draws from its own ChaCha8
//! stream keyed by `(master_seed, stream_id)`. ChaCha is counter based, so the
//! sequence depends only on the key and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Purpose tags occupy the upper 32 bits of a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Purpose {
    FitTrial = 1,
    DualRestart = 2,
    DualProbe = 3,
    GramDeviation = 10,
    InftyNorm = 11,
    SEta = 12,
    WeibullSum = 13,
    HansonWright = 14,
    Chi2 = 15,
    QTilde = 16,
    Moments = 17,
    MomentGrowth = 18,
    InversePerturbation = 19,
    NetProfile = 20,
    DirectionDiagnostics = 21,
    Truncation = 22,
    Auxiliary = 99,
}

impl Purpose {
    pub fn tag(self) -> u64 {
        self as u32 as u64
    }
}

/// Key of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// `stream_id = purpose_tag * 2^32 + index`.
    pub fn for_purpose(master_seed: u64, purpose: Purpose, index: u32) -> Self {
        Self::new(master_seed, (purpose.tag() << 32) | index as u64)
    }

    /// Derives a child stream, e.g. one restart inside a trial. The child key
    /// mixes the parent id so that siblings of different parents never collide.
    pub fn child(&self, index: u64) -> Self {
        let mixed = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)));
        Self::new(self.master_seed, mixed)
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
