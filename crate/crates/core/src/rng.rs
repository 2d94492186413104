//! Seeded random streams.
//!
//! Every sampler takes a [`Seed`] and derives child seeds for each independent
//! piece of work (sample index, stick index, restart, replication). The derived
//! stream only depends on the path of indices, never on evaluation order, so
//! results are reproducible under any scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Child seed for the stream labelled `index`.
    pub fn derive(self, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    /// Child seed along a path of labels.
    pub fn derive_path(self, path: &[u64]) -> Seed {
        path.iter().fold(self, |s, &i| s.derive(i))
    }

    /// ChaCha8 generator keyed by this seed.
    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Generator for ChaCha stream `index` under this seed's key.
    pub fn stream(self, index: u64) -> Rng {
        let mut rng = self.rng();
        rng.set_stream(index);
        rng
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

// Stream labels. Distinct constants keep unrelated streams of the same seed apart.
pub(crate) mod tag {
    pub const STICK: u64 = 0x5354_4943;
    pub const ATOM: u64 = 0x4154_4f4d;
    pub const GLOBAL: u64 = 0x474c_4f42;
    pub const GROUP: u64 = 0x4752_5550;
    pub const DATA: u64 = 0x4441_5441;
    pub const PAIR: u64 = 0x5041_4952;
    pub const RESTART: u64 = 0x5253_5452;
    pub const REP: u64 = 0x5245_5053;
    pub const MC: u64 = 0x4d43_4d43;
    pub const BANK: u64 = 0x4241_4e4b;
    pub const FIT: u64 = 0x4649_5453;
    pub const PRIOR: u64 = 0x5052_494f;
}
