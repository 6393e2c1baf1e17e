//! Counter-based splittable random streams.
//!
//! Every stochastic operation in the engine takes an explicit [`Stream`].
//! A stream is a pure function of its 64-bit key and a draw counter, and
//! child streams are derived functionally from `(key, domain, index)`, so
//! the numbers a worker sees depend only on how its stream was derived,
//! never on scheduling or on what other workers drew. Deriving per
//! `(seed, sample id, step, candidate id)` makes parallel generation
//! reproduce the sequential output bit for bit.
//!
//! The generator is the SplitMix64 finalizer applied to a Weyl sequence;
//! it is non-cryptographic and is only meant for simulation.

/// Domain tags keep derived streams from colliding when the same index is
/// used for different purposes at one site.
pub mod domain {
    pub const SAMPLE: u64 = 0x01;
    pub const STEP: u64 = 0x02;
    pub const CANDIDATE: u64 = 0x03;
    pub const SELECT: u64 = 0x04;
    pub const PARTICLE: u64 = 0x05;
    pub const RESAMPLE: u64 = 0x06;
    pub const ROLLOUT: u64 = 0x07;
    pub const VALUE: u64 = 0x08;
    pub const RUN: u64 = 0x09;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic random stream identified by a 64-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { key: mix64(seed.wrapping_add(GOLDEN)), counter: 0 }
    }

    /// Functionally derive a child stream for `(domain, index)`. Independent
    /// of this stream's draw position.
    #[must_use]
    pub fn derive(&self, domain: u64, index: u64) -> Stream {
        let k = mix64(self.key ^ mix64(domain.wrapping_mul(GOLDEN).wrapping_add(1)));
        Stream { key: mix64(k.wrapping_add(index.wrapping_mul(GOLDEN))), counter: 0 }
    }

    /// Mix an arbitrary label (e.g. a state hash) into a child key.
    #[must_use]
    pub fn derive_label(&self, label: u64) -> Stream {
        Stream { key: mix64(self.key ^ mix64(label ^ GOLDEN)), counter: 0 }
    }

    /// Derived 64-bit seed for a sub-run, published mixing function for
    /// reproducible sweeps: the key of `derive(domain, index)`.
    pub fn child_seed(&self, domain: u64, index: u64) -> u64 {
        self.derive(domain, index).key
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(c.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform in (0, 1]; safe as a log argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    /// Standard normal draw (Box-Muller).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Index into `probs` by inverse CDF. `probs` must be non-negative and
    /// sum to roughly one; trailing rounding slack goes to the last index.
    pub fn pick(&mut self, probs: &[f64]) -> usize {
        debug_assert!(!probs.is_empty());
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = Stream::new(7);
        let mut b = Stream::new(7);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derivation_ignores_draw_position() {
        let mut a = Stream::new(7);
        let _ = a.next_u64();
        let _ = a.next_u64();
        let b = Stream::new(7);
        assert_eq!(a.derive(domain::SAMPLE, 3), b.derive(domain::SAMPLE, 3));
        assert_ne!(b.derive(domain::SAMPLE, 3), b.derive(domain::SAMPLE, 4));
        assert_ne!(b.derive(domain::SAMPLE, 3), b.derive(domain::STEP, 3));
    }

    #[test]
    fn uniform_range_and_mean() {
        let mut s = Stream::new(11);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn normal_moments() {
        let mut s = Stream::new(13);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = s.next_normal();
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn pick_matches_weights() {
        let mut s = Stream::new(17);
        let probs = [0.2, 0.5, 0.3];
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[s.pick(&probs)] += 1;
        }
        for (c, p) in counts.iter().zip(probs.iter()) {
            let freq = *c as f64 / n as f64;
            assert!((freq - p).abs() < 0.01, "freq {freq} vs {p}");
        }
    }
}
