//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(master seed, domain, index)`. A path or particle always reads the same
//! stream no matter which worker advances it, so results do not depend on
//! scheduling or on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent families of streams drawn from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Particle = 1,
    InitialLaw = 2,
    SubordinatorPath = 3,
    Coupling = 4,
    Bootstrap = 5,
    Subsample = 6,
    AssumptionCheck = 7,
    Auxiliary = 8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master_seed: u64) -> Self {
        Self { master: master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    /// The stream for item `index` of `domain`.
    pub fn stream(&self, domain: Domain, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.master ^ splitmix64(domain as u64)));
        rng.set_stream(index);
        rng
    }

    /// A child factory, e.g. one per repetition of an experiment.
    pub fn derive(&self, label: u64) -> Streams {
        Streams {
            master: splitmix64(self.master.wrapping_add(splitmix64(label ^ 0x5851_f42d_4c95_7f2d))),
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Split one generator into two independent child streams.
pub fn split_pair<R: rand::RngCore + ?Sized>(rng: &mut R) -> (StreamRng, StreamRng) {
    let seed = rng.next_u64();
    let mut a = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ChaCha8Rng::seed_from_u64(seed);
    a.set_stream(1);
    b.set_stream(2);
    (a, b)
}
