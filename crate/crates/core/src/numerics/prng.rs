use crate::numerics::{Scalar, Tensor};

/// Deterministic 64-bit generator (SplitMix64 step function).
///
/// Every consumer that needs randomness takes one of these explicitly; there
/// is no global state. Independent subsystems should each get their own
/// stream via [`Prng::split`] so that inserting draws in one place never
/// shifts the sequence seen elsewhere.
#[derive(Clone, Debug)]
pub struct Prng {
    state: u64,
}

/// Root stream for a run. Equal seeds give equal sequences forever.
pub fn prng_stream(seed: u64) -> Prng {
    Prng::new(seed)
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Forks an independent child stream and advances this one by one draw.
    pub fn split(&mut self) -> Prng {
        Prng::new(self.next_u64())
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform<T: Scalar>(&mut self) -> T {
        T::cast(self.next_f64())
    }

    pub fn uniform_in<T: Scalar>(&mut self, lo: T, hi: T) -> T {
        lo + (hi - lo) * self.uniform::<T>()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive; the modulo bias is
    /// below 2^-50 for every `n` used here.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// One standard normal draw (Box-Muller; the sine mate is discarded).
    pub fn next_gaussian(&mut self) -> f64 {
        self.gaussian_pair().0
    }

    /// Box-Muller pair from two uniform draws. The log argument is mapped
    /// into `(0, 1]` so it never degenerates.
    pub fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    pub fn shuffle<E>(&mut self, xs: &mut [E]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Tensor of i.i.d. standard normal draws, filled pairwise from Box-Muller.
/// For odd element counts the final pair's second value is discarded, so the
/// stream position depends only on the element count.
pub fn gaussian_sample<T: Scalar>(rng: &mut Prng, shape: &[usize]) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let (a, b) = rng.gaussian_pair();
        data.push(T::cast(a));
        if data.len() < n {
            data.push(T::cast(b));
        }
    }
    Tensor::from_vec(shape, data).expect("length matches shape by construction")
}
