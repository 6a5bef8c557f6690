//! Counter-based seed splitting.
//!
//! A replica's stream depends only on `(master, index)`, never on which
//! worker ran it or in what order, so any replica can be replayed alone.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of `master`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix(mix(master.wrapping_add(0x9E37_79B9_7F4A_7C15)) ^ mix(index.wrapping_mul(0xD1B5_4A32_D192_ED03).wrapping_add(1)))
}

/// Named sub-streams of one replica seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Noise = 1,
    Clock = 2,
    Offset = 3,
    Chain = 4,
    Driver = 5,
}

pub fn stream_seed(replica_seed: u64, stream: Stream) -> u64 {
    split_seed(replica_seed, stream as u64)
}
