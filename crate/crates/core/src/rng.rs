//! Seeded randomness for reproducible assignments.
//!
//! Assignment manufacture uses PCG32 (`Lcg64Xsh32`: 64-bit LCG state,
//! xorshift-high / random-rotate output) so an authority can rebuild any
//! assignment from its seed.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;

pub type AssignmentRng = Pcg32;

pub fn seeded(seed: u64) -> AssignmentRng {
    Pcg32::seed_from_u64(seed)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let digest = crate::crypto::sha256(&[&seed.to_be_bytes()[..], label.as_bytes()].concat());
    u64::from_be_bytes(digest.0[..8].try_into().unwrap())
}

/// Fisher–Yates permutation of `0..n`.
pub fn permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}
