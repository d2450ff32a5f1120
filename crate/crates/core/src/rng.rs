//! Named random sub-streams.
//!
//! Each consumer of randomness gets its own ChaCha stream keyed by
//! `(seed, stream, slot, index)`. Streams never share state, so the order in
//! which independent pieces of work run (including in parallel) cannot change
//! any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Fleet,
    Mobility,
    Fading,
    Split,
    Formation,
    Delivery,
    Baseline,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Fleet => 0x01,
            Stream::Mobility => 0x02,
            Stream::Fading => 0x03,
            Stream::Split => 0x04,
            Stream::Formation => 0x05,
            Stream::Delivery => 0x06,
            Stream::Baseline => 0x07,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit key of one sub-stream.
pub fn stream_key(seed: u64, stream: Stream, slot: u64, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    for word in [stream.tag(), slot, index] {
        h = splitmix64(h ^ word);
    }
    h
}

pub fn stream(seed: u64, stream: Stream, slot: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(stream_key(seed, stream, slot, index))
}
