//! Named, counter-based random streams derived from a single seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent stream for `name` under `seed`. Same inputs give the same sequence.
pub fn stream(seed: u64, name: &str) -> StreamRng {
    keyed(seed, name.as_bytes())
}

fn keyed(seed: u64, key: &[u8]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(key));
    rng
}

/// Stream for the `index`-th worker of `name`, e.g. one block of paths.
pub fn substream(seed: u64, name: &str, index: u64) -> StreamRng {
    let mut key = name.as_bytes().to_vec();
    key.push(b'#');
    key.extend_from_slice(&index.to_le_bytes());
    keyed(seed, &key)
}

/// Derive a child seed, used when a sub-task needs a seed rather than a stream.
pub fn child_seed(seed: u64, name: &str, index: u64) -> u64 {
    let mut key = name.as_bytes().to_vec();
    key.extend_from_slice(&index.to_le_bytes());
    fnv1a(&key) ^ seed.rotate_left(17)
}
