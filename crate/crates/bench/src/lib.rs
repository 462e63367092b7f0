//! Deterministic input generators for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrbit::{apply_rr, encode_set, privatize_sketch, NoiseParam, NoisyBit, UnionSketch};

/// A reproducible observation stream with mixed noise levels. The bit
/// density keeps the running product finite at any of these lengths.
pub fn noisy_stream(len: usize, seed: u64) -> Vec<NoisyBit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noises = [
        NoiseParam::new(0.1).unwrap(),
        NoiseParam::new(0.2).unwrap(),
        NoiseParam::new(0.25).unwrap(),
    ];
    (0..len)
        .map(|i| apply_rr(i % 2 == 0, noises[i % 3], &mut rng))
        .collect()
}

/// Privatized sketches for `parties` random sets in a universe of `m`
/// slots, each holding roughly a quarter of the universe.
pub fn privatized_sketches(parties: usize, m: usize, seed: u64) -> Vec<UnionSketch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = NoiseParam::new(0.25).unwrap();
    (0..parties)
        .map(|_| {
            let elements: Vec<usize> = (1..=m).filter(|_| rng.gen_bool(0.25)).collect();
            let exact = encode_set(&elements, m).unwrap();
            privatize_sketch(&exact, noise, &mut rng).unwrap()
        })
        .collect()
}
