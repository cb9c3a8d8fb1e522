//! Counter-based random substreams.
//!
//! Every random draw in the engine comes from a ChaCha8 generator keyed by
//! the scenario's root seed. The ChaCha stream number selects an independent
//! substream and is derived from a domain tag, the trace index and a stable
//! hash of the resource id:
//!
//! ```text
//! stream = mix(mix(domain) ^ mix(trace + 1) ^ mix(fnv1a(id)))
//! ```
//!
//! where `mix` is the SplitMix64 finaliser. A trace can therefore be
//! regenerated in isolation, in any order and on any thread, and adding a
//! unit to a fleet leaves every other unit's draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Separates the background fleet from resources evaluated on top of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Background = 1,
    Resource = 2,
    Fixture = 3,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream_id(domain: Domain, trace: usize, key: &str) -> u64 {
    mix(mix(domain as u64) ^ mix(trace as u64 + 1) ^ mix(fnv1a(key)))
}

pub fn substream(seed: u64, domain: Domain, trace: usize, key: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, trace, key));
    rng
}
