//! Decimal rounding without `std` float intrinsics.

use alloc::format;
use alloc::string::String;

// Values are first snapped to 9 decimals so binary artifacts such as
// 0.8895 == 0.88949999.. still round half-up as written.
const SNAP: f64 = 1e9;
const SNAP_DIGITS: u32 = 9;

fn snapped(x: f64) -> (bool, u64) {
    let neg = x < 0.0;
    let scaled = if neg { -x } else { x } * SNAP;
    (neg, (scaled + 0.5) as u64)
}

fn rounded_units(x: f64, decimals: u32) -> (bool, u64) {
    assert!(decimals <= SNAP_DIGITS);
    let (neg, n) = snapped(x);
    let div = 10u64.pow(SNAP_DIGITS - decimals);
    let q = (n + div / 2) / div;
    (neg && q != 0, q)
}

/// Round half away from zero to `decimals` places (at most 9).
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let (neg, q) = rounded_units(x, decimals);
    let v = q as f64 / 10u64.pow(decimals) as f64;
    if neg {
        -v
    } else {
        v
    }
}

/// Fixed-point rendering with the same rounding as [`round_half_up`].
pub fn fixed(x: f64, decimals: u32) -> String {
    let (neg, q) = rounded_units(x, decimals);
    let sign = if neg { "-" } else { "" };
    if decimals == 0 {
        return format!("{sign}{q}");
    }
    let scale = 10u64.pow(decimals);
    format!(
        "{sign}{}.{:0width$}",
        q / scale,
        q % scale,
        width = decimals as usize
    )
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from coordinates.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        state ^= p;
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}
