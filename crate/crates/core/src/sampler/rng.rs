use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per iteration inside a chain's stream.
const WORDS_PER_ITERATION: u128 = 1 << 32;

/// Generator for `(seed, chain, iteration)`: the ChaCha key comes from the
/// seed, the stream id from the chain and the word position from the
/// iteration, so results never depend on scheduling.
pub fn stream_rng(seed: u64, chain: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng.set_word_pos(iteration as u128 * WORDS_PER_ITERATION);
    rng
}

/// Substream for a labelled purpose (e.g. "simulate", "elicit/amplitude").
pub fn purpose_rng(seed: u64, label: &str) -> ChaCha8Rng {
    // FNV-1a of the label selects the stream.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}
