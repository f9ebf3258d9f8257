//! Counter-based Gaussian stream.
//!
//! Brownian increments are keyed by `(seed, sample, step, particle)` so a
//! sampled path never depends on scheduling: any worker can produce any
//! sample and the ensemble is bit-identical to a serial run.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix(state ^ word.wrapping_mul(GOLDEN).wrapping_add(GOLDEN))
}

/// One 64-bit word for the given counter tuple.
#[inline]
pub fn word(seed: u64, sample: u64, step: u64, particle: u64) -> u64 {
    let mut h = mix(seed ^ GOLDEN);
    h = absorb(h, sample);
    h = absorb(h, step);
    h = absorb(h, particle);
    mix(h)
}

#[inline]
fn to_unit(word: u64) -> f64 {
    // 53 mantissa bits, offset by half an ulp so the result is in (0, 1).
    ((word >> 11) as f64 + 0.5) / 9_007_199_254_740_992.0
}

/// Standard normal draw for the given counter tuple (Box–Muller, cosine
/// branch).
#[inline]
pub fn standard_normal(seed: u64, sample: u64, step: u64, particle: u64) -> f64 {
    let w1 = word(seed, sample, step, particle);
    let w2 = mix(w1 ^ GOLDEN);
    let u1 = to_unit(w1);
    let u2 = to_unit(w2);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform draw in (0, 1) for the given counter tuple.
#[inline]
pub fn uniform(seed: u64, sample: u64, step: u64, particle: u64) -> f64 {
    to_unit(word(seed, sample, step, particle))
}
