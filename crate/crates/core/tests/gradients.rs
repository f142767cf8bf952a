//! Central finite-difference checks of the hand-written gradients.

mod common;

use aoi_swarm::mfhppo::EntropyMode;
use common::{policy_case, sequence_case};

#[test]
fn dense_stack_matches_finite_differences() {
    for seed in 0..5 {
        let e = sequence_case(seed, None);
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

#[test]
fn recurrent_stack_matches_finite_differences() {
    for seed in 0..5 {
        let e = sequence_case(seed, Some(3));
        assert!(e < 1e-4, "seed {seed}: {e}");
    }
}

#[test]
fn policy_heads_match_finite_differences() {
    for seed in 0..5 {
        for (lstm, mode) in [(Some(3), EntropyMode::Product), (None, EntropyMode::Sum)] {
            let e = policy_case(seed, lstm, mode);
            assert!(e < 1e-4, "seed {seed} {lstm:?} {mode:?}: {e}");
        }
    }
}

