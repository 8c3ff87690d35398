//! Seeded jury selection. The generator and shuffle are fixed so anyone can
//! re-derive a published draw from `(eligible, k, seed, exclusions)`.

use std::collections::BTreeSet;

use crate::domain::MemberId;

use super::MechanismError;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `[0, bound)` by rejection of the biased low zone.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let min = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= min {
                return x % bound;
            }
        }
    }
}

/// Draws `k` jurors uniformly without replacement.
///
/// The pool is the sorted, de-duplicated eligible list minus exclusions;
/// a partial Fisher-Yates shuffle driven by SplitMix64(seed) picks the
/// first `k` positions. `subject`, when given, must be excluded.
pub fn draw_jury(
    eligible: &[MemberId],
    k: usize,
    seed: u64,
    exclusions: &BTreeSet<MemberId>,
    subject: Option<&MemberId>,
) -> Result<Vec<MemberId>, MechanismError> {
    let sorted: BTreeSet<&MemberId> = eligible.iter().collect();
    if let Some(s) = subject {
        if sorted.contains(s) && !exclusions.contains(s) {
            return Err(MechanismError::Conflict(s.clone()));
        }
    }
    let mut pool: Vec<MemberId> = sorted.into_iter().filter(|m| !exclusions.contains(*m)).cloned().collect();
    if k > pool.len() {
        return Err(MechanismError::InsufficientJurors { needed: k, available: pool.len() });
    }
    let mut rng = SplitMix64::new(seed);
    let n = pool.len();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(k);
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<MemberId> {
        v.iter().map(|s| MemberId::from(*s)).collect()
    }

    // Reference values from an independent Python transcription of the
    // generator and shuffle.
    #[test]
    fn splitmix_reference_outputs() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 16294208416658607535);
        assert_eq!(r.next_u64(), 7960286522194355700);
        assert_eq!(r.next_u64(), 487617019471545679);
    }

    #[test]
    fn reference_draws() {
        let none = BTreeSet::new();
        assert_eq!(draw_jury(&ids(&["e", "d", "c", "b", "a"]), 2, 42, &none, None).unwrap(), ids(&["d", "e"]));
        let excl: BTreeSet<MemberId> = ids(&["m4"]).into_iter().collect();
        let el = ids(&["m1", "m2", "m3", "m4", "m5", "m6", "m7"]);
        assert_eq!(draw_jury(&el, 3, 7, &excl, Some(&"m4".into())).unwrap(), ids(&["m5", "m7", "m6"]));
    }

    #[test]
    fn whole_pool_when_k_equals_n() {
        let el = ids(&["a", "b", "c"]);
        let mut got = draw_jury(&el, 3, 99, &BTreeSet::new(), None).unwrap();
        got.sort();
        assert_eq!(got, el);
    }

    #[test]
    fn deterministic_per_seed() {
        let el = ids(&["a", "b", "c", "d", "e", "f"]);
        let a = draw_jury(&el, 3, 1234, &BTreeSet::new(), None).unwrap();
        let b = draw_jury(&el, 3, 1234, &BTreeSet::new(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let el = ids(&["a", "b"]);
        assert!(matches!(
            draw_jury(&el, 3, 0, &BTreeSet::new(), None),
            Err(MechanismError::InsufficientJurors { needed: 3, available: 2 })
        ));
        assert!(matches!(
            draw_jury(&el, 1, 0, &BTreeSet::new(), Some(&"a".into())),
            Err(MechanismError::Conflict(_))
        ));
    }
}
