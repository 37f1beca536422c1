//! Counter-based random numbers.
//!
//! Every deviate is a pure function of an [`RngKey`] `(seed, stream, counter)`
//! and a draw index, computed with the Philox4x32-10 bijection. Bulk
//! algorithms give event `i` the key with `counter = base + i`, so its
//! randomness does not depend on which worker produced it.

use rand_core::RngCore;

/// Stream tag for accept-reject p.d.f. sampling.
pub const STREAM_SAMPLING: u64 = 0;
/// Stream tag for phase-space generation.
pub const STREAM_PHASE_SPACE: u64 = 1;
/// Stream tag for toy-study generation.
pub const STREAM_TOYS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngKey {
    pub seed: u64,
    pub stream: u64,
    pub counter: u64,
}

impl RngKey {
    pub const fn new(seed: u64, stream: u64, counter: u64) -> Self {
        Self {
            seed,
            stream,
            counter,
        }
    }

    /// Key of the `offset`-th event after this one.
    #[inline]
    pub const fn at(&self, offset: u64) -> Self {
        Self {
            counter: self.counter.wrapping_add(offset),
            ..*self
        }
    }

    /// Independent key family tagged by `tag`, e.g. one per toy or per sub-task.
    /// The counter is part of the input, so `key.at(t).derive(k)` differs for every `t`.
    pub fn derive(&self, tag: u64) -> Self {
        let tagged = splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x632B_E59B_D9B4_E019)));
        Self {
            seed: splitmix64(tagged ^ self.counter),
            stream: self.stream,
            counter: 0,
        }
    }

    /// Generator for the sequence of draws belonging to this key.
    pub fn rng(&self) -> CounterRng {
        CounterRng::new(*self)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// Sequential draws for one key: block `j` is Philox of `(counter, j)` under
/// a cipher key mixed from `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    cipher_key: [u32; 2],
    counter: u64,
    block: u64,
    buffer: [u32; 4],
    used: usize,
}

impl CounterRng {
    pub fn new(key: RngKey) -> Self {
        let k = splitmix64(key.seed ^ splitmix64(key.stream));
        Self {
            cipher_key: [k as u32, (k >> 32) as u32],
            counter: key.counter,
            block: 0,
            buffer: [0; 4],
            used: 4,
        }
    }

    fn refill(&mut self) {
        let ctr = [
            self.counter as u32,
            (self.counter >> 32) as u32,
            self.block as u32,
            (self.block >> 32) as u32,
        ];
        self.buffer = philox4x32_10(ctr, self.cipher_key);
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }

    #[inline]
    pub fn next_word(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let w = self.buffer[self.used];
        self.used += 1;
        w
    }

    /// Uniform deviate in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate by the Box-Muller transform of two uniforms.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        self.next_word()
    }

    fn next_u64(&mut self) -> u64 {
        let lo = self.next_word() as u64;
        let hi = self.next_word() as u64;
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let w = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// First uniform deviate of `key`.
pub fn uniform(key: RngKey) -> f64 {
    key.rng().uniform()
}

/// First standard normal deviate of `key`.
pub fn gaussian_deviate(key: RngKey) -> f64 {
    key.rng().gaussian()
}
