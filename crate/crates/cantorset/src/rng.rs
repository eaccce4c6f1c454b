//! Deterministic, stateless randomness.
//!
//! Every random decision in this crate is a pure function of a master seed
//! and a structural coordinate (trial index, tree-node path, photon index),
//! built from the splitmix64 finalizer. Consequences:
//!
//! * sampling order and thread count cannot change any outcome;
//! * a node's membership draw can be recomputed in isolation;
//! * reports are bit-exact functions of (plan, seed).

/// splitmix64 finalizer (Stafford variant 13 constants).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keyed combination of two words; asymmetric in its arguments.
#[inline]
pub fn mix2(key: u64, word: u64) -> u64 {
    mix64(key ^ mix64(word ^ 0x9E37_79B9_7F4A_7C15))
}

const TAG_TRIAL: u64 = 0x7472_6961_6c73_6565; // "trialsee"
const TAG_MEMBER: u64 = 0x6d65_6d62_6572_0001;
const TAG_ROOT: u64 = 0x726f_6f74_0000_0001;
const TAG_BIT: u64 = 0x6269_7473_0000_0001;
const TAG_DETECT: u64 = 0x6465_7465_6374_0001;

/// Seed for trial `index` of a run keyed by `master`.
#[inline]
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix2(master ^ TAG_TRIAL, index)
}

/// State of the tree root for one sampled tree.
#[inline]
pub fn root_state(tree_seed: u64) -> u64 {
    mix2(tree_seed, TAG_ROOT)
}

/// State of the child reached by appending `symbol` to the path with the
/// given state. Chaining these from the root makes the state a pure function
/// of (tree seed, path).
#[inline]
pub fn child_state(state: u64, symbol: u32) -> u64 {
    mix2(state, u64::from(symbol) + 1)
}

/// Membership draw for the node with the given path state.
#[inline]
pub fn membership_draw(state: u64) -> u64 {
    mix2(state, TAG_MEMBER)
}

/// Fair bit for photon `index`.
#[inline]
pub fn photon_bit(master: u64, index: u64) -> u8 {
    (mix2(master ^ TAG_BIT, index) & 1) as u8
}

/// Detection draw for photon `index`.
#[inline]
pub fn photon_detect_draw(master: u64, index: u64) -> u64 {
    mix2(master ^ TAG_DETECT, index)
}

/// 64-bit acceptance threshold for probability `p`: accept when
/// `draw < threshold`.
#[inline]
pub fn threshold_for(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        (p * (u64::MAX as f64 + 1.0)) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_is_deterministic_and_asymmetric() {
        assert_eq!(mix2(1, 2), mix2(1, 2));
        assert_ne!(mix2(1, 2), mix2(2, 1));
        assert_ne!(mix64(0), mix64(1));
    }

    #[test]
    fn child_states_differ_per_symbol_and_depth() {
        let root = root_state(7);
        let a = child_state(root, 0);
        let b = child_state(root, 1);
        assert_ne!(a, b);
        assert_ne!(child_state(a, 0), child_state(b, 0));
        // path <0,1> differs from path <1,0>
        assert_ne!(child_state(a, 1), child_state(b, 0));
    }

    #[test]
    fn draws_are_roughly_balanced() {
        // Sanity check on the finalizer: 10_000 membership draws at p = 1/2
        // should accept close to half the time (4-sigma band ~ 200).
        let thresh = threshold_for(0.5);
        let mut hits = 0u32;
        for i in 0..10_000u64 {
            let st = child_state(root_state(trial_seed(42, i)), 3);
            if membership_draw(st) < thresh {
                hits += 1;
            }
        }
        assert!((4800..=5200).contains(&hits), "hits = {hits}");
    }

    #[test]
    fn threshold_edges() {
        assert_eq!(threshold_for(0.0), 0);
        assert_eq!(threshold_for(1.0), u64::MAX);
        assert_eq!(threshold_for(0.5), 1u64 << 63);
        assert_eq!(threshold_for(0.25), 1u64 << 62);
    }
}
