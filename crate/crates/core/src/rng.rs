//! Counter-based random streams.
//!
//! Every random draw in the laboratory is a pure function of
//! `(seed, index, step, domain, block)`, evaluated with the Philox4x32-10
//! bijection. A particle's noise at a given step therefore does not depend
//! on how particles are partitioned across workers, on scheduling, or on
//! whether the ensemble is advanced particle-major or step-major.
//!
//! Counter layout (four 32-bit words):
//!
//! ```text
//! [ index lo | index hi | step | domain << 24 | block ]
//! ```
//!
//! The key is the 64-bit master seed.

use rand_core::RngCore;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

const BLOCK_BITS: u32 = 24;
const BLOCK_MASK: u32 = (1 << BLOCK_BITS) - 1;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 bijection with 10 rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Disjoint families of streams sharing one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Domain {
    /// Per-particle ensemble noise (order coins and Gaussian kicks).
    Ensemble = 0,
    /// Initial-law draws.
    Init = 1,
    /// Reference sampling.
    Reference = 2,
    /// Paired-chain coupling noise.
    Coupling = 3,
    /// A single order coin shared by the whole ensemble at each step.
    SharedCoin = 4,
    /// Bootstrap or subsampling draws.
    Resample = 5,
}

/// One counter-based stream: all blocks for a fixed `(seed, index, step, domain)`.
#[derive(Debug, Clone)]
pub struct Stream {
    key: [u32; 2],
    ctr: [u32; 4],
    buf: [u32; 4],
    pos: usize,
}

impl Stream {
    /// Opens the stream for `index` at `step`. Steps are taken modulo 2^32.
    #[inline]
    pub fn new(seed: u64, index: u64, step: u64, domain: Domain) -> Self {
        Stream {
            key: [seed as u32, (seed >> 32) as u32],
            ctr: [
                index as u32,
                (index >> 32) as u32,
                step as u32,
                (domain as u32) << BLOCK_BITS,
            ],
            buf: [0; 4],
            pos: 4,
        }
    }

    #[inline]
    fn refill(&mut self) {
        self.buf = philox4x32_10(self.ctr, self.key);
        let block = (self.ctr[3] & BLOCK_MASK).wrapping_add(1) & BLOCK_MASK;
        self.ctr[3] = (self.ctr[3] & !BLOCK_MASK) | block;
        self.pos = 0;
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.pos >= 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        if self.pos >= 3 {
            self.refill();
        }
        let lo = u64::from(self.buf[self.pos]);
        let hi = u64::from(self.buf[self.pos + 1]);
        self.pos += 2;
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let w = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// Derives a child seed from a master seed and a label (splitmix64 finalizer).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
