//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! master seed. Independent consumers (trials, diagnostic suites) select
//! disjoint ChaCha streams, so a trial's draws depend only on
//! `(master_seed, stream)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for stream `stream` under `master_seed`.
pub fn stream(master_seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream offsets reserved for non-trial consumers, far above any trial index.
pub mod streams {
    pub const INITIAL_ESTIMATE: u64 = 1 << 40;
    pub const MGF_EXCITATION: u64 = (1 << 40) + 1;
    pub const MGF_DISTURBANCE: u64 = (1 << 40) + 2;
    pub const DRIFT: u64 = (1 << 40) + 3;
    pub const BMSB: u64 = (1 << 40) + 4;
    pub const INEQUALITIES: u64 = (1 << 40) + 5;
    pub const MOMENT: u64 = (1 << 40) + 6;
}
