//! Deterministic seed tree.
//!
//! Every stochastic step in the pipeline draws from a ChaCha8 stream whose
//! seed is derived from one master seed by a counter scheme:
//!
//! ```text
//! master ──Repeat(i)──▶ repeat seed ──FoldPlan(attempt)──▶ outer fold plan
//!                               └────OuterFold(f)──▶ fold seed ──InnerCv(0)──▶ inner partition
//!                                                           └────Model(0)───▶ trainer stream
//! ```
//!
//! A child seed is `splitmix64(parent ^ splitmix64(stream_tag << 32 | index))`,
//! so any node of the tree can be recomputed in isolation from the master
//! seed and the path of `(stream, index)` pairs leading to it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named branches of the seed tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Repeat,
    FoldPlan,
    OuterFold,
    InnerCv,
    Model,
    Platt,
    Permutation,
    Bootstrap,
    Synth,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Repeat => 1,
            Stream::FoldPlan => 2,
            Stream::OuterFold => 3,
            Stream::InnerCv => 4,
            Stream::Model => 5,
            Stream::Platt => 6,
            Stream::Permutation => 7,
            Stream::Bootstrap => 8,
            Stream::Synth => 9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub u64);

impl Seed {
    pub fn child(self, stream: Stream, index: u64) -> Seed {
        let key = (stream.tag() << 32) ^ index;
        Seed(splitmix64(self.0 ^ splitmix64(key)))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
