//! Seeded, splittable random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A ChaCha8 stream addressed by `(seed, stream_id)`.
///
/// The stream id selects one of ChaCha's 2⁶⁴ independent keystreams for the
/// same key, so distinct ids never overlap. [`RngStream::fork`] derives a new
/// key for hierarchical splitting (chunks within a run, replications within
/// a chunk).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream `child` of this stream, independent of the parent's
    /// position. Forking the same `(seed, stream_id, child)` always yields
    /// the same sequence.
    pub fn fork(&self, child: u64) -> RngStream {
        let key =
            splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(key, child)
    }

    /// Uniform on `(0, 1]`; safe to take the log of.
    #[inline]
    pub(crate) fn open_unit(&mut self) -> f64 {
        // 53 random mantissa bits, shifted off zero
        ((self.inner.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(rng: &mut RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.next_u64()).collect()
    }

    #[test]
    fn same_address_same_sequence() {
        let a = draw(&mut RngStream::new(42, 3), 16);
        let b = draw(&mut RngStream::new(42, 3), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = draw(&mut RngStream::new(42, 0), 16);
        let b = draw(&mut RngStream::new(42, 1), 16);
        let c = draw(&mut RngStream::new(43, 0), 16);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fork_is_positional_independent() {
        let parent = RngStream::new(7, 0);
        let mut advanced = parent.clone();
        draw(&mut advanced, 100);
        assert_eq!(draw(&mut parent.fork(5), 8), draw(&mut advanced.fork(5), 8));
        assert_ne!(draw(&mut parent.fork(5), 8), draw(&mut parent.fork(6), 8));
        assert_ne!(
            draw(&mut parent.fork(0), 8),
            draw(&mut RngStream::new(7, 0), 8)
        );
    }

    #[test]
    fn open_unit_range() {
        let mut r = RngStream::new(1, 1);
        for _ in 0..100_000 {
            let u = r.open_unit();
            assert!(u > 0.0 && u <= 1.0);
        }
    }
}
