//! Deterministic seed derivation.
//!
//! Every randomized stage (dataset sampling, weight init, shuffling) gets its
//! own seed derived from the experiment seed plus a path of context tags, so
//! adding or reordering stages never perturbs the others.

/// Derives a child seed from `base` and an ordered tag path.
///
/// Uses SplitMix64 finalization per tag; any tag difference flips roughly
/// half the output bits.
pub fn derive(base: u64, tags: &[&str]) -> u64 {
    let mut state = splitmix(base ^ 0x9e37_79b9_7f4a_7c15);
    for tag in tags {
        for &b in tag.as_bytes() {
            state = splitmix(state ^ b as u64);
        }
        // Tag separator; keeps ["ab","c"] distinct from ["a","bc"].
        state = splitmix(state ^ 0xff00_ff00_ff00_ff00);
    }
    state
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
