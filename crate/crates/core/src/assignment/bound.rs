//! Probability that a forger picks exactly the decoy subset.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn mantissa_exponent(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    }
}

/// Whether `x >= 1 / c` for a finite non-negative `x`.
fn at_least_reciprocal(x: f64, c: &BigUint) -> bool {
    let (m, e) = mantissa_exponent(x);
    let lhs = c * BigUint::from(m);
    if e >= 0 {
        lhs << (e as usize) >= BigUint::one()
    } else {
        lhs >= BigUint::one() << ((-e) as usize)
    }
}

/// `1 / C(total, decoys)` rounded up to the nearest `f64`.
///
/// Panics if `decoys > total`.
pub fn decoy_guess_bound(total: u64, decoys: u64) -> f64 {
    assert!(decoys <= total, "more decoys than reads");
    let c = binomial(total, decoys);
    let approx = c.to_f64().map_or(0.0, |f| 1.0 / f);
    let mut x = if approx.is_finite() { approx } else { 0.0 };
    while !at_least_reciprocal(x, &c) {
        x = x.next_up();
    }
    while x > 0.0 && at_least_reciprocal(x.next_down(), &c) {
        x = x.next_down();
    }
    x
}
