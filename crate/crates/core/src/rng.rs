//! Named random substreams derived from one master seed.
//!
//! Every noise source draws from its own ChaCha stream, so switching one
//! source on or off leaves the draws of every other source untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent stream identities under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Initial conductance draws.
    Init = 1,
    /// Frozen per-device step factors.
    DeviceToDevice = 2,
    /// Per-pulse update noise.
    CycleToCycle = 3,
    /// Read noise during VMM.
    Read = 4,
}

pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Deterministic child stream `index` of a base seed, used for per-column
/// read-noise draws so columns can be sensed in any order.
pub fn child(base: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng
}

/// The substreams one simulated run consumes.
#[derive(Debug, Clone)]
pub struct Streams {
    pub init: SimRng,
    pub d2d: SimRng,
    pub c2c: SimRng,
    pub read: SimRng,
}

impl Streams {
    pub fn from_seed(seed: u64) -> Self {
        Streams {
            init: substream(seed, Stream::Init),
            d2d: substream(seed, Stream::DeviceToDevice),
            c2c: substream(seed, Stream::CycleToCycle),
            read: substream(seed, Stream::Read),
        }
    }
}
