//! Seeded random streams.
//!
//! All randomness comes from [`ChaCha8Rng`], whose output is specified
//! bit-for-bit and therefore identical across platforms. A single run seed
//! fans out into independent streams so that, for example, changing the
//! placement policy never perturbs the generated workload.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Catalog = 1,
    Trace = 2,
    Policy = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
