//! Shared helpers for the integration suites: seeded random market
//! generators that respect the parameter invariants.

use offnet_core::equilibrium::exante_multi;
use offnet_core::GameParameters;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sample_single(rng: &mut ChaCha8Rng) -> GameParameters {
    GameParameters::single(
        rng.random_range(50.0..200.0),
        rng.random_range(5.0..15.0),
        rng.random_range(0.0..6.0),
    )
    .with_gamma(vec![rng.random_range(0.2..0.8)])
}

pub fn sample_two_cp(rng: &mut ChaCha8Rng) -> GameParameters {
    let alpha = rng.random_range(5.0..15.0);
    let tau = rng.random_range(0.05..0.9);
    GameParameters::new(2, rng.random_range(50.0..200.0), alpha, tau * alpha)
        .with_pa(vec![rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)])
        .with_gamma(vec![rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)])
}

/// Two-CP parameters resampled until the positive-demand ex-ante
/// equilibrium exists.
pub fn sample_two_cp_with_equilibrium(rng: &mut ChaCha8Rng) -> GameParameters {
    loop {
        let params = sample_two_cp(rng);
        if exante_multi(&params, &[0.0, 0.0])
            .map(|eq| eq.exists())
            .unwrap_or(false)
        {
            return params;
        }
    }
}
