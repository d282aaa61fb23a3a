//! Deterministic random substreams.
//!
//! Every random draw in a run comes from a ChaCha8 generator keyed by the
//! run seed and selected by a stream id. The id is a hash of a path such as
//! `[SITE_ACTION, epoch, step]`, so the draws at one site never depend on
//! how many draws were made elsewhere or in what order runs execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Continuous magnitudes for the chosen action.
pub const SITE_ACTION: u64 = 1;
/// Decisions of the random exploration policy.
pub const SITE_RANDOM_POLICY: u64 = 2;
/// Sampled hidden-variable imputation.
pub const SITE_IMPUTATION: u64 = 3;
/// Seeds of individual runs within a batch.
pub const SITE_BATCH: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id of a substream path.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter().fold(0, |h, &k| splitmix64(h ^ splitmix64(k)))
}

/// Generator for the substream at `path` under `seed`.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn paths_are_independent_of_order() {
        let a: u64 = substream(7, &[SITE_ACTION, 3, 9]).random();
        let _ = substream(7, &[SITE_ACTION, 3, 8]).random::<u64>();
        let b: u64 = substream(7, &[SITE_ACTION, 3, 9]).random();
        assert_eq!(a, b);
        assert_ne!(stream_id(&[1, 2]), stream_id(&[2, 1]));
        assert_ne!(stream_id(&[1]), stream_id(&[1, 0]));
    }
}
