//! Deterministic random streams.
//!
//! Every random draw in the crate comes from [`CounterRng`], a SplitMix64
//! generator: the state is a 64-bit counter advanced by the golden-ratio
//! increment `0x9E3779B97F4A7C15`, and each output is the SplitMix64
//! finalizer applied to the counter. The algorithm is small enough to
//! reproduce in any language, which keeps sampling reports comparable across
//! implementations.
//!
//! Independent streams are derived from a root seed with [`derive_seed`],
//! so work split across threads draws the same numbers regardless of
//! scheduling.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `root`: `mix64(root + (stream + 1) * GOLDEN) ^ mix64(stream)`.
#[inline]
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    mix64(root.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN))) ^ mix64(stream)
}

/// Seed for a two-level stream, e.g. (time index, cell).
#[inline]
pub fn derive_seed2(root: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(root, a), b)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    counter: u64,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            counter: seed,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN);
        mix64(self.counter)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform direction on the unit sphere in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            let n = norm(&v);
            if n > 1e-12 {
                return v.into_iter().map(|c| c / n).collect();
            }
        }
    }

    /// Uniform point in the unit ball.
    pub fn in_unit_ball(&mut self, dim: usize) -> Vec<f64> {
        let dir = self.unit_vector(dim);
        let r = self.next_f64().powf(1.0 / dim as f64);
        dir.into_iter().map(|c| c * r).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Quasi-uniform points in the unit cube `[0,1)^dim`.
///
/// The first half is a Halton sequence with a seeded Cranley-Patterson shift,
/// the rest are plain uniform draws from the seeded stream.
pub fn quasi_uniform(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(
        dim <= PRIMES.len(),
        "quasi_uniform supports up to {} dimensions",
        PRIMES.len()
    );
    let mut rng = CounterRng::new(derive_seed(seed, 0x4841_4C54));
    let shift: Vec<f64> = (0..dim).map(|_| rng.next_f64()).collect();
    let n_lattice = n.div_ceil(2);
    let mut out = Vec::with_capacity(n);
    for i in 0..n_lattice {
        out.push(
            (0..dim)
                .map(|d| (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract())
                .collect(),
        );
    }
    let mut rng = CounterRng::new(derive_seed(seed, 0x554E_4946));
    for _ in n_lattice..n {
        out.push((0..dim).map(|_| rng.next_f64()).collect());
    }
    out
}
