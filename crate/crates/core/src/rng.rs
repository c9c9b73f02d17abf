//! Named random sub-streams derived from a master seed.
//!
//! Every `(repetition, purpose)` pair maps to its own ChaCha stream, so the
//! draws a repetition sees do not depend on which worker runs it or in what
//! order repetitions are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purposes are packed below the repetition index in the stream id.
const PURPOSE_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Train,
    Calib,
    MarginalTest,
    Split,
    /// Calibration sample for amputation intercepts.
    AmputeReference,
    /// Per-group test draws, indexed by group position.
    Group(u32),
}

impl Purpose {
    fn id(self) -> u64 {
        match self {
            Purpose::Train => 0,
            Purpose::Calib => 1,
            Purpose::MarginalTest => 2,
            Purpose::Split => 3,
            Purpose::AmputeReference => 4,
            Purpose::Group(k) => {
                assert!(u64::from(k) + 16 < 1 << PURPOSE_BITS, "group index out of range");
                16 + u64::from(k)
            }
        }
    }
}

pub fn stream(master_seed: u64, rep: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((rep << PURPOSE_BITS) | purpose.id());
    rng
}
