//! Named synthetic configurations used by `synth` and the test suites.

use clap::ValueEnum;
use serde::Serialize;

use deconfounder::SyntheticConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Nine causes driven by three latents that also move the outcome.
    Confounded,
    /// Same causes, latents do not touch the outcome.
    Unconfounded,
    /// One latent behind six causes; naive sweeps flip a sign.
    Flip,
    /// Causes act on popularity only through the rating.
    FullMediation,
    /// Two causes keep a direct effect next to the rating path.
    PartialMediation,
}

impl Scenario {
    pub fn config(self, n_units: usize, seed: u64) -> SyntheticConfig {
        match self {
            Scenario::Confounded => confounded(n_units, seed),
            Scenario::Unconfounded => {
                let mut cfg = confounded(n_units, seed);
                cfg.outcome_gamma = vec![0.0; 3];
                cfg
            }
            Scenario::Flip => flip(n_units, seed),
            Scenario::FullMediation => mediation(n_units, seed, [0.0; 6]),
            Scenario::PartialMediation => mediation(n_units, seed, [0.4, -0.3, 0.0, 0.0, 0.0, 0.0]),
        }
    }
}

/// Block loadings: latent `k` loads 1.0 on causes `3k..3k+3` and 0.4 on the
/// first cause of the next block.
pub fn confounded(n_units: usize, seed: u64) -> SyntheticConfig {
    let (d, k) = (9, 3);
    let mut loadings = vec![0.0; d * k];
    for j in 0..d {
        loadings[j * k + j / 3] = 1.0;
    }
    for c in 0..k {
        let j = (3 * (c + 1)) % d;
        loadings[j * k + c] = 0.4;
    }
    SyntheticConfig {
        confounder_loadings: loadings,
        ..SyntheticConfig::confounded(
            n_units,
            vec![0.5, -0.3, 0.0, 0.4, 0.0, -0.6, 0.2, 0.0, 0.3],
            vec![0.8, -0.6, 0.5],
            seed,
        )
    }
}

pub fn flip(n_units: usize, seed: u64) -> SyntheticConfig {
    SyntheticConfig::confounded(n_units, vec![0.5, -1.5, 0.0, 0.0, 0.0, 0.0], vec![-0.5], seed)
}

/// Two latents over six causes, rating `θᵀa`, popularity `direct·a + 0.8 r`.
pub fn mediation(n_units: usize, seed: u64, direct: [f64; 6]) -> SyntheticConfig {
    let loadings = vec![
        1.0, 0.3, //
        1.0, 0.0, //
        1.0, 0.0, //
        0.0, 1.0, //
        0.0, 1.0, //
        0.3, 1.0,
    ];
    SyntheticConfig {
        n_units,
        n_causes: 6,
        latent_dim: 2,
        confounder_loadings: loadings,
        outcome_gamma: vec![0.0, 0.0],
        true_beta: direct.to_vec(),
        mediator_theta: Some(vec![0.5, -0.4, 0.3, 0.0, 0.0, 0.0]),
        mediator_lambda: Some(0.8),
        mediator_confounding: 0.0,
        noise_sd_causes: 1.0,
        noise_sd_outcome: 1.0,
        missing_rate: 0.0,
        seed,
    }
}
