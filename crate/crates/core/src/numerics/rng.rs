/// PCG32 (PCG-XSH-RR, 64-bit state, 32-bit output) with the reference
/// constants and seeding procedure from the PCG paper's `pcg32_srandom_r`.
///
/// Output is a pure function of `(seed, sequence)`, independent of platform.
/// Gaussian variates come from Box–Muller; the second variate of each pair
/// is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Rng {
    state: u64,
    inc: u64,
    spare_normal: Option<f64>,
}

const MULTIPLIER: u64 = 6_364_136_223_846_793_005;

/// Purposes that own an independent PCG sequence under one experiment seed.
///
/// The discriminant is the fixed offset mixed into the sequence selector, so
/// draws for one purpose never shift the stream of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    SourceShuffle = 2,
    TargetShuffle = 3,
    TargetFakes = 4,
    SourceFakes = 5,
    GeneratorNoise = 6,
    Data = 7,
    GeneratorInit = 8,
}

impl Rng {
    /// Seeds with sequence 0.
    pub fn new(seed: u64) -> Self {
        Self::with_sequence(seed, 0)
    }

    pub fn with_sequence(seed: u64, sequence: u64) -> Self {
        let mut rng = Self {
            state: 0,
            inc: (sequence << 1) | 1,
            spare_normal: None,
        };
        rng.step();
        rng.state = rng.state.wrapping_add(seed);
        rng.step();
        rng
    }

    /// Per-purpose stream; `index` separates e.g. epochs within a purpose.
    pub fn for_stream(seed: u64, stream: Stream, index: u32) -> Self {
        Self::with_sequence(seed, ((stream as u64) << 32) | u64::from(index))
    }

    #[inline]
    fn step(&mut self) {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(self.inc);
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.step();
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = u64::from(self.next_u32());
        let lo = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_f64()
    }

    /// Unbiased integer in `[0, bound)`.
    pub fn below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u32 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn matches_reference_pcg32_demo_output() {
        // pcg32-global-demo output for srandom(42, 54)
        let mut rng = Rng::with_sequence(42, 54);
        let got: Vec<u32> = (0..6).map(|_| rng.next_u32()).collect();
        assert_eq!(
            got,
            [0xa15c02b7, 0x7b47f409, 0xba1d3330, 0x83d2f293, 0xbfa4784b, 0xcbed606e]
        );
    }

    #[test]
    fn seed_42_golden_stream() {
        let mut rng = Rng::new(42);
        let got: Vec<u32> = (0..16).map(|_| rng.next_u32()).collect();
        assert_eq!(got, GOLDEN_SEED_42);
    }

    const GOLDEN_SEED_42: [u32; 16] = [
        565663470, 3244226384, 2504567229, 903561869, 4026996297, 2722332799, 3032858066, 272411090,
        1181909318, 20290832, 809514014, 2164621145, 1367162753, 619412887, 360199006, 910471957,
    ];

    #[test]
    fn streams_are_independent() {
        let mut a = Rng::for_stream(7, Stream::Init, 0);
        let mut b = Rng::for_stream(7, Stream::SourceShuffle, 0);
        let mut c = Rng::for_stream(7, Stream::Init, 1);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn below_stays_in_range_and_unit_interval_is_half_open() {
        let mut rng = Rng::new(3);
        for _ in 0..10_000 {
            assert!(rng.below(7) < 7);
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(11);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt() * 1.5);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut rng = Rng::new(5);
        let mut v: Vec<usize> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
