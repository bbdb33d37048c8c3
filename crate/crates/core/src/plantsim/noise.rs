//! Counter-based random numbers: every draw is a pure function of a key, so
//! frames can be rendered in any order (or in parallel) reproducibly.

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child key from a parent key and a counter.
#[inline]
pub fn derive(key: u64, counter: u64) -> u64 {
    mix64(key ^ mix64(counter.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Uniform in (0, 1].
#[inline]
pub fn unit(key: u64) -> f64 {
    ((key >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normal draws (Box-Muller).
#[inline]
pub fn normal_pair(key: u64) -> (f64, f64) {
    let u1 = unit(mix64(key));
    let u2 = unit(mix64(key ^ 0xD1B5_4A32_D192_ED03));
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// A single standard normal draw.
#[inline]
pub fn normal(key: u64) -> f64 {
    normal_pair(key).0
}
