//! Counter-based random streams and replicate-parallel mapping.
//!
//! Every Monte Carlo replicate draws from its own ChaCha8 stream addressed
//! by `(seed, stream, replicate)`: the seed is the key, the stream id
//! selects the ChaCha nonce and the replicate index positions the block
//! counter. A replicate's draws are therefore a pure function of its
//! coordinates, so results do not depend on how replicates are scheduled
//! across threads. Reductions are performed in replicate order, which
//! makes every estimate bit-reproducible for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved for each replicate within a stream (2³²).
const WORDS_PER_REPLICATE: u128 = 1 << 32;

/// Random generator for replicate `rep` of stream `stream` under `seed`.
pub fn replicate_rng(seed: u64, stream: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(rep as u128 * WORDS_PER_REPLICATE);
    rng
}

/// Stream identifiers keep the different simulation purposes apart.
pub mod streams {
    /// Calibration paths under the futility hypothesis.
    pub const CALIBRATE_FUTILITY: u64 = 0x0001_0000_0000;
    /// Calibration paths under the null hypothesis.
    pub const CALIBRATE_NULL: u64 = 0x0002_0000_0000;
    /// Operating characteristics; the grid index is added to this base.
    pub const OC_BASE: u64 = 0x0010_0000_0000;
    /// Auxiliary simulations (boundary constants, self-checks).
    pub const AUX: u64 = 0x0020_0000_0000;
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on,
/// returning results in index order.
pub fn map_indices<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Block size used by [`fold_indices`]; fixed so that reductions are
/// identical with and without the `parallel` feature.
pub const BLOCK: u64 = 4096;

/// Folds `0..n` in fixed-size blocks (each block sequentially, blocks
/// possibly in parallel) and merges block results in block order.
pub fn fold_indices<A, I, F, M>(n: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u64) + Sync + Send,
    M: Fn(&mut A, A),
{
    let blocks = n.div_ceil(BLOCK);
    let partials = map_indices(blocks, |blk| {
        let mut acc = init();
        let start = blk * BLOCK;
        let end = (start + BLOCK).min(n);
        for i in start..end {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Whether this build evaluates replicates on the rayon pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
