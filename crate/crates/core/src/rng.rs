use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for substream `stream` of `seed`. Work split into
/// substreams gives the same numbers for any number of threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
